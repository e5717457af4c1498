#![no_main]
use libfuzzer_sys::fuzz_target;
use viprox_core::harness::parse_point;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(p) = parse_point(s) {
            assert!(!p.is_empty() && p.iter().all(|v| v.is_finite()));
        }
    }
});
