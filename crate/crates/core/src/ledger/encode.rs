//! Canonical byte encoding used for block hashing.
//!
//! Every replica must hash a block identically, so the layout is fixed:
//! integers are big-endian fixed width, strings and lists carry a `u32`
//! big-endian length prefix, enums are a one-byte tag followed by their
//! fields in declaration order, and `Option` is a `0`/`1` tag byte. The full
//! layout is documented in `docs/encoding.md`.

use super::{Address, Hash};

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(v as u8)
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.len_prefix(s.len());
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn put<T: Canonical + ?Sized>(&mut self, value: &T) -> &mut Self {
        value.encode_to(self);
        self
    }

    pub fn list<T: Canonical>(&mut self, items: &[T]) -> &mut Self {
        self.len_prefix(items.len());
        for item in items {
            item.encode_to(self);
        }
        self
    }

    pub fn opt<T: Canonical>(&mut self, value: &Option<T>) -> &mut Self {
        match value {
            None => self.u8(0),
            Some(v) => self.u8(1).put(v),
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    fn len_prefix(&mut self, len: usize) {
        let len = u32::try_from(len).expect("canonical length prefix exceeds u32");
        self.u32(len);
    }
}

/// Types with a fixed, documented byte layout.
pub trait Canonical {
    fn encode_to(&self, enc: &mut Encoder);

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode_to(&mut enc);
        enc.finish()
    }
}

impl Canonical for u64 {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.u64(*self);
    }
}

impl Canonical for String {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.str(self);
    }
}

impl Canonical for str {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.str(self);
    }
}

/// Addresses are encoded as their 32-character string form.
impl Canonical for Address {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.str(&self.to_hex());
    }
}

impl Canonical for Hash {
    fn encode_to(&self, enc: &mut Encoder) {
        enc.raw(self.as_bytes());
    }
}
