#![no_main]
use libfuzzer_sys::fuzz_target;

// Accepted states must survive every pair computation.
fuzz_target!(|data: &str| {
    if let Ok(mu) = transprob::parse_state(data) {
        let _ = transprob::audit_pair(&mu, &mu);
    }
});
