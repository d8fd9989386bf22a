use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::LedgerError;

/// SHA-256 over an arbitrary byte sequence.
pub fn compute_hash(bytes: &[u8]) -> Hash {
    Hash(Sha256::digest(bytes).into())
}

/// A 32-byte SHA-256 digest, rendered as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hash(pub [u8; 32]);

impl Hash {
    pub const ZERO: Hash = Hash([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash({})", &self.to_hex()[..16])
    }
}

impl FromStr for Hash {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || !is_lower_hex(s) {
            return Err(LedgerError::MalformedHex(s.to_string()));
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).map_err(|_| LedgerError::MalformedHex(s.to_string()))?;
        Ok(Hash(out))
    }
}

/// Pseudonymous participant identity: the first 16 bytes of SHA-256 over the
/// registration name, shown as 32 lowercase hex characters.
///
/// Ordering is byte-lexicographic, which coincides with the ordering of the
/// hex rendering.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address([u8; 16]);

impl Address {
    pub const HEX_LEN: usize = 32;

    pub fn from_name(name: &str) -> Self {
        let digest = compute_hash(name.as_bytes());
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest.0[..16]);
        Address(out)
    }

    /// Issuer of every genesis record.
    pub fn genesis_authority() -> Self {
        Address::from_name("exergy:genesis")
    }

    /// Sender of trade settlements and participation rewards.
    pub fn settlement_engine() -> Self {
        Address::from_name("exergy:settlement")
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", &self.to_hex()[..8])
    }
}

impl FromStr for Address {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != Self::HEX_LEN || !is_lower_hex(s) {
            return Err(LedgerError::MalformedHex(s.to_string()));
        }
        let mut out = [0u8; 16];
        hex::decode_to_slice(s, &mut out).map_err(|_| LedgerError::MalformedHex(s.to_string()))?;
        Ok(Address(out))
    }
}

fn is_lower_hex(s: &str) -> bool {
    s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

macro_rules! hex_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_serde!(Hash);
hex_serde!(Address);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_empty_vector() {
        assert_eq!(
            compute_hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn sha256_abc_vector() {
        assert_eq!(
            compute_hash(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn address_shape() {
        let a = Address::from_name("prosumer-1");
        let s = a.to_string();
        assert_eq!(s.len(), 32);
        assert!(s.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
        assert_eq!(a, Address::from_name("prosumer-1"));
        assert_ne!(a, Address::from_name("prosumer-2"));
        assert_eq!(s.parse::<Address>().unwrap(), a);
        assert_eq!(&s, &compute_hash(b"prosumer-1").to_hex()[..32]);
    }

    #[test]
    fn address_ordering_matches_hex() {
        let mut addrs: Vec<Address> = (0..50).map(|i| Address::from_name(&format!("n{i}"))).collect();
        let mut hexes: Vec<String> = addrs.iter().map(|a| a.to_hex()).collect();
        addrs.sort();
        hexes.sort();
        assert_eq!(addrs.iter().map(|a| a.to_hex()).collect::<Vec<_>>(), hexes);
    }

    #[test]
    fn rejects_bad_hex() {
        assert!("ABCDEF0123456789abcdef0123456789".parse::<Address>().is_err());
        assert!("abc".parse::<Address>().is_err());
        assert!("zz".repeat(32).parse::<Hash>().is_err());
    }

    #[test]
    fn distinct_inputs_distinct_digests() {
        let mut seen = std::collections::BTreeSet::new();
        for i in 0u32..1000 {
            seen.insert(compute_hash(&i.to_be_bytes()));
        }
        assert_eq!(seen.len(), 1000);
    }
}
