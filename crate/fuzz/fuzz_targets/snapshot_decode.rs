#![no_main]

use libfuzzer_sys::fuzz_target;
use llimex::io::FieldSnapshot;

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = FieldSnapshot::decode(data) {
        assert_eq!(snap.encode(), data);
    }
});
