#![no_main]

use libfuzzer_sys::fuzz_target;
use mv3d::config::RunConfig;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = RunConfig::parse(text) {
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
});
