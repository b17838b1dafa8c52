//! Hex-dump frames: whitespace-separated hex bytes, one frame per line,
//! the six address bytes first. Blank lines and `#` comments are skipped.

use super::{decode_advertisement, Advertisement, CodecError, ADDRESS_LEN};

pub fn parse_hex_frame(line: &str) -> Result<Advertisement, CodecError> {
    let bytes = line
        .split_whitespace()
        .map(|tok| {
            let tok = tok.trim_start_matches("0x").trim_start_matches("0X");
            if tok.len() != 2 {
                return Err(CodecError::BadHex(tok.to_string()));
            }
            u8::from_str_radix(tok, 16).map_err(|_| CodecError::BadHex(tok.to_string()))
        })
        .collect::<Result<Vec<u8>, _>>()?;
    if bytes.len() < ADDRESS_LEN {
        return Err(CodecError::AddressLength(bytes.len()));
    }
    let (address, payload) = bytes.split_at(ADDRESS_LEN);
    decode_advertisement(address, payload)
}

/// Parses every frame line, keeping the 1-based line number with each result.
pub fn parse_hex_dump(text: &str) -> Vec<(usize, Result<Advertisement, CodecError>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .map(|(i, l)| (i + 1, parse_hex_frame(l)))
        .collect()
}

pub fn format_hex_frame(adv: &Advertisement) -> String {
    adv.address.bytes().iter().chain(adv.payload()).map(|b| format!("{b:02X}")).collect::<Vec<_>>().join(" ")
}
