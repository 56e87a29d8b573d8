//! DNP3 link-layer CRC.
//!
//! Polynomial 0x3D65 processed LSB-first (reflected form 0xA6BC), zero
//! initial value, final value inverted. The two checksum octets follow each
//! block low octet first.

const REFLECTED_POLY: u16 = 0xA6BC;

static TABLE: [u16; 256] = build_table();

const fn build_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u16;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ REFLECTED_POLY
            } else {
                crc >> 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// Computes the DNP3 CRC of `block`.
pub fn crc_dnp(block: &[u8]) -> u16 {
    let crc = block.iter().fold(0u16, |crc, &b| {
        (crc >> 8) ^ TABLE[((crc ^ b as u16) & 0xFF) as usize]
    });
    !crc
}

/// Checks a block whose last two octets are its CRC (low octet first).
pub fn verify_block(block_with_crc: &[u8]) -> bool {
    if block_with_crc.len() < 3 {
        return false;
    }
    let (data, crc) = block_with_crc.split_at(block_with_crc.len() - 2);
    crc_dnp(data) == u16::from_le_bytes([crc[0], crc[1]])
}

/// Appends the CRC of `data` to `out`.
pub(crate) fn push_with_crc(out: &mut Vec<u8>, data: &[u8]) {
    out.extend_from_slice(data);
    out.extend_from_slice(&crc_dnp(data).to_le_bytes());
}
