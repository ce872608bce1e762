#![no_main]

use libfuzzer_sys::fuzz_target;
use llimex::io::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // a resolved config must survive its own manifest
        let again = parse_config(&cfg.to_manifest()).expect("manifest reparses");
        assert_eq!(again.to_manifest(), cfg.to_manifest());
        let _ = cfg.grid_spec();
    }
});
