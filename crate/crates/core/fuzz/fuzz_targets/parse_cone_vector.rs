#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(xi) = transprob::parse_cone_vector(data) {
        let _ = transprob::cone_decompose(&xi);
    }
});
