//! Fixed-length bit strings.
//!
//! Chain values, salts and keys are not byte aligned (the default password
//! is 130 bits), so they are carried as MSB-first bit strings whose unused
//! trailing bits in the last byte are always zero.

use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest bit string this crate handles.
pub const MAX_BITS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BitsError {
    #[error("bit length {0} exceeds the {MAX_BITS}-bit maximum")]
    TooLong(usize),
    #[error("expected {expected} bytes for {bits} bits, got {got}")]
    ByteCount { bits: usize, expected: usize, got: usize },
    #[error("non-zero padding bits after bit {0}")]
    NonZeroPadding(usize),
    #[error("invalid hex")]
    Hex,
    #[error("randomness source failed")]
    Rng,
}

/// An MSB-first bit string of at most [`MAX_BITS`] bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bits {
    len: u16,
    bytes: [u8; MAX_BITS / 8],
}

pub(crate) const fn byte_len(bits: usize) -> usize {
    bits.div_ceil(8)
}

impl Bits {
    pub fn zero(len: usize) -> Result<Self, BitsError> {
        if len > MAX_BITS {
            return Err(BitsError::TooLong(len));
        }
        Ok(Bits { len: len as u16, bytes: [0; MAX_BITS / 8] })
    }

    /// Builds a bit string from its packed bytes. The trailing pad bits of
    /// the final byte must be zero.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self, BitsError> {
        let mut out = Self::zero(len)?;
        let expected = byte_len(len);
        if bytes.len() != expected {
            return Err(BitsError::ByteCount { bits: len, expected, got: bytes.len() });
        }
        out.bytes[..expected].copy_from_slice(bytes);
        if out.pad_mask() & out.last_byte() != 0 {
            return Err(BitsError::NonZeroPadding(len));
        }
        Ok(out)
    }

    /// Takes the leading `len` bits of `bytes`, discarding the rest.
    pub fn prefix_of(bytes: &[u8], len: usize) -> Result<Self, BitsError> {
        let mut out = Self::zero(len)?;
        let n = byte_len(len);
        if bytes.len() < n {
            return Err(BitsError::ByteCount { bits: len, expected: n, got: bytes.len() });
        }
        out.bytes[..n].copy_from_slice(&bytes[..n]);
        if n > 0 {
            let mask = out.pad_mask();
            out.bytes[n - 1] &= !mask;
        }
        Ok(out)
    }

    pub fn random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R, len: usize) -> Result<Self, BitsError> {
        let mut out = Self::zero(len)?;
        let n = byte_len(len);
        rng.try_fill_bytes(&mut out.bytes[..n]).map_err(|_| BitsError::Rng)?;
        if n > 0 {
            let mask = out.pad_mask();
            out.bytes[n - 1] &= !mask;
        }
        Ok(out)
    }

    pub fn from_hex(hex: &str, len: usize) -> Result<Self, BitsError> {
        if hex.len() % 2 != 0 || !hex.is_ascii() {
            return Err(BitsError::Hex);
        }
        let bytes = (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| BitsError::Hex))
            .collect::<Result<Vec<u8>, _>>()?;
        Self::from_bytes(&bytes, len)
    }

    pub fn to_hex(&self) -> String {
        self.as_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Packed bytes; trailing pad bits are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..byte_len(self.len())]
    }

    /// Bit `i`, counting from the most significant end.
    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len(), "bit index {i} out of range for {} bits", self.len);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    pub fn set_bit(&mut self, i: usize, value: bool) {
        assert!(i < self.len(), "bit index {i} out of range for {} bits", self.len);
        let mask = 1 << (7 - i % 8);
        if value {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    /// Reads `width` (≤ 64) bits starting at `offset` as a big-endian integer.
    pub fn read_uint(&self, offset: usize, width: usize) -> u64 {
        assert!(width <= 64 && offset + width <= self.len());
        (offset..offset + width).fold(0u64, |acc, i| acc << 1 | self.bit(i) as u64)
    }

    fn last_byte(&self) -> u8 {
        match byte_len(self.len()) {
            0 => 0,
            n => self.bytes[n - 1],
        }
    }

    /// Mask of the unused low bits of the last byte.
    fn pad_mask(&self) -> u8 {
        match self.len() % 8 {
            0 => 0,
            r => 0xff >> r,
        }
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits<{}>({})", self.len, self.to_hex())
    }
}

/// Appends bit strings MSB-first into a zeroed buffer.
pub(crate) struct BitWriter<'a> {
    buf: &'a mut [u8],
    bit: usize,
}

impl<'a> BitWriter<'a> {
    pub(crate) fn new(buf: &'a mut [u8]) -> Self {
        buf.fill(0);
        BitWriter { buf, bit: 0 }
    }

    /// Appends the first `nbits` bits of `src`. Bits of `src` past `nbits`
    /// must be zero.
    pub(crate) fn push(&mut self, src: &[u8], nbits: usize) {
        let nbytes = byte_len(nbits);
        let shift = self.bit % 8;
        let start = self.bit / 8;
        if shift == 0 {
            self.buf[start..start + nbytes].copy_from_slice(&src[..nbytes]);
        } else {
            for (i, &b) in src[..nbytes].iter().enumerate() {
                self.buf[start + i] |= b >> shift;
                if b << (8 - shift) != 0 {
                    self.buf[start + i + 1] |= b << (8 - shift);
                }
            }
        }
        self.bit += nbits;
    }

    pub(crate) fn push_uint(&mut self, value: u64, width: usize) {
        debug_assert!(width == 64 || value >> width == 0);
        if width == 0 {
            return;
        }
        let aligned = (value << (64 - width)).to_be_bytes();
        self.push(&aligned, width);
    }

    pub(crate) fn bit_len(&self) -> usize {
        self.bit
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}:{}", self.len, self.to_hex()))
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let (len, hex) = s.split_once(':').ok_or_else(|| serde::de::Error::custom("expected <len>:<hex>"))?;
        let len: usize = len.parse().map_err(serde::de::Error::custom)?;
        Bits::from_hex(hex, len).map_err(serde::de::Error::custom)
    }
}
