#![no_main]

use libfuzzer_sys::fuzz_target;
use mv3d::eval::SplitResult;

fuzz_target!(|text: &str| {
    if let Ok((split, size)) = SplitResult::parse(text) {
        assert_eq!(SplitResult::parse(&split.to_text(size)).unwrap(), (split, size));
    }
});
