#![no_main]

use libfuzzer_sys::fuzz_target;
use mv3d::fusion::{encode_ply, parse_ply};

fuzz_target!(|text: &str| {
    if let Ok(pc) = parse_ply(text) {
        let once = encode_ply(&pc);
        assert_eq!(encode_ply(&parse_ply(&once).unwrap()), once);
    }
});
