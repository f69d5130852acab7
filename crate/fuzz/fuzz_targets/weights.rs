#![no_main]

use libfuzzer_sys::fuzz_target;
use mv3d::weights::{encode_weights, parse_weights};

fuzz_target!(|data: &[u8]| {
    if let Ok(tensors) = parse_weights(data) {
        let once = encode_weights(&tensors);
        assert_eq!(encode_weights(&parse_weights(&once).unwrap()), once);
    }
});
