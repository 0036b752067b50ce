#![no_main]

use dynamix_core::io::{decode_dataset, encode_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = decode_dataset(data) {
        // Anything the decoder accepts must re-encode to a fixed point.
        let bytes = encode_dataset(&corpus).expect("decoded dataset re-encodes");
        let again = decode_dataset(&bytes).expect("re-encoded dataset decodes");
        assert_eq!(encode_dataset(&again).unwrap(), bytes);
    }
});
