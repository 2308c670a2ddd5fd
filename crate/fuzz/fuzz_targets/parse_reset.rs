#![no_main]

use libfuzzer_sys::fuzz_target;
use shype::parser::parse_reset;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(v) = parse_reset(src) {
            parse_reset(&v.to_string()).expect("printed form parses");
        }
    }
});
