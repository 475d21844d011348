#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use marketgym_harness::logs::{decode_episode, encode_episode};

fuzz_target!(|data: &[u8]| {
    if let Ok(log) = decode_episode(data, Path::new("fuzz")) {
        let bytes = encode_episode(&log);
        let back = decode_episode(&bytes[..], Path::new("fuzz")).expect("encoded log decodes");
        assert_eq!(encode_episode(&back), bytes);
    }
});
