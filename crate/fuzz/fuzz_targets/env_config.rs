#![no_main]

use libfuzzer_sys::fuzz_target;
use marketgym_core::background::PopulationSpec;
use marketgym_core::serde_duration;
use marketgym_gym::registry::{daily_investor_config, execution_config, EnvOverrides};

fuzz_target!(|data: &[u8]| {
    let Ok(value) = serde_json::from_slice::<serde_json::Value>(data) else { return };
    let _ = serde_duration::parse_value(&value);
    if let Ok(overrides) = serde_json::from_value::<EnvOverrides>(value) {
        let pop = PopulationSpec::empty();
        if let Ok(cfg) = daily_investor_config(&overrides, &pop) {
            cfg.validate().expect("accepted config validates");
        }
        if let Ok(cfg) = execution_config(&overrides, &pop) {
            cfg.validate().expect("accepted config validates");
            assert!(cfg.child_order_size <= cfg.parent_order_size);
        }
    }
});
