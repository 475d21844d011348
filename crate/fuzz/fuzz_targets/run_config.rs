#![no_main]

use libfuzzer_sys::fuzz_target;
use marketgym_harness::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let again = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&again).expect("a valid config re-parses");
        assert_eq!(back.hash(), cfg.hash());
    }
});
