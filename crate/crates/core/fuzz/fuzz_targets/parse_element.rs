#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(x) = transprob::parse_element(data) {
        let _ = x.hs_norm();
    }
});
