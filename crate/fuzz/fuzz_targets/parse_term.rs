#![no_main]

use libfuzzer_sys::fuzz_target;
use shype::parser::parse_term;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(v) = parse_term(src) {
            parse_term(&v.to_string()).expect("printed form parses");
        }
    }
});
