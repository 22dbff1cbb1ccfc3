#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(theta) = transprob::parse_jordan_iso(data) {
        let _ = theta.compose(&theta.inverse());
    }
});
