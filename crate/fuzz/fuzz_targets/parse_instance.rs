#![no_main]
use libfuzzer_sys::fuzz_target;
use viprox_core::problems::ProblemInstance;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(inst) = ProblemInstance::from_json_str(s) {
            // accepted instances must survive a write/read cycle unchanged
            let text = inst.to_json_string();
            let back = ProblemInstance::from_json_str(&text).expect("re-read");
            assert_eq!(back.to_json_string(), text);
        }
    }
});
