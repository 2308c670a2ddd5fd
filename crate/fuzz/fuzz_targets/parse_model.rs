#![no_main]

use libfuzzer_sys::fuzz_target;
use shype::parser::{format_model, parse_model};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(model) = parse_model(src) else {
        return;
    };
    let text = format_model(&model);
    let back = parse_model(&text).expect("formatted model parses");
    assert_eq!(back, model);
});
