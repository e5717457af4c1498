#![no_main]
use libfuzzer_sys::fuzz_target;
use viprox_core::harness::parse_run_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_run_config(s) {
            assert!(cfg.iterations >= 1 && cfg.runs >= 1 && cfg.gap_samples >= 1);
            let _ = cfg.run_spec();
        }
    }
});
