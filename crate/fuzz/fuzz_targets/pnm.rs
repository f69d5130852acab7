#![no_main]

use libfuzzer_sys::fuzz_target;
use mv3d::pnm::{encode_pgm, encode_pgm16, encode_ppm, parse_pnm, Pnm};

fuzz_target!(|data: &[u8]| {
    // Anything accepted must survive a write/read cycle unchanged.
    if let Ok(img) = parse_pnm(data) {
        let bytes = match &img {
            Pnm::Rgb(i) => encode_ppm(i),
            Pnm::Gray(i) => encode_pgm(i),
            Pnm::Gray16(i) => encode_pgm16(i),
        };
        assert_eq!(parse_pnm(&bytes).unwrap(), img);
    }
});
