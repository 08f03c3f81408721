//! Content fingerprints for fitted state and training sets.
//!
//! FNV-1a over canonical bytes. Not cryptographic; used to detect that a
//! model and a transformed matrix came from the same fitted transforms.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a of a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Hex rendering used everywhere a fingerprint appears in a document.
pub fn hex(hash: u64) -> String {
    format!("{hash:016x}")
}

/// Fingerprint of a serializable value via its canonical JSON bytes.
///
/// Callers must keep map fields ordered (`BTreeMap`) so the JSON is canonical.
pub fn of_json<T: serde::Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("fingerprint serialization");
    hex(fnv1a(&bytes))
}
