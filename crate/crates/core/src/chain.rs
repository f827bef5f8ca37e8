//! Time-tagged hash chain primitives.
//!
//! A chain of length `k` anchored at tail slot `t_init` has one node per slot
//! in `[t_init, t_init + k]`. The head (slot `t_max = t_init + k`) is the
//! secret key; every other node is obtained by stepping down one slot:
//!
//! ```text
//! node(t - 1) = H(<t - 1>_c || salt || node(t))|_n
//! ```
//!
//! Each step hashes a fixed-size `c + s + n` bit message whose leading `c`
//! bits are the absolute slot number of the step's output node, so every
//! link of the chain uses a distinct function.

use std::fmt;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256, Sha512};

use crate::bits::{byte_len, BitWriter, Bits, BitsError, MAX_BITS};

/// Largest hashed message, in bytes.
const MAX_MESSAGE_BYTES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChainError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cannot step below the chain tail at slot {at}")]
    StepBelowTail { at: u64 },
    #[error("walk target {target} outside [{tail}, {from}]")]
    TargetOutOfRange { target: u64, tail: u64, from: u64 },
    #[error("slot {0} does not fit the time tag")]
    TagOverflow(u64),
    #[error("value has {got} bits, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("randomness source failed")]
    RngFailure,
}

/// Underlying hash function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashId {
    Sha256,
    Sha512,
}

impl HashId {
    pub fn output_bits(self) -> usize {
        match self {
            HashId::Sha256 => 256,
            HashId::Sha512 => 512,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashId::Sha256 => "sha256",
            HashId::Sha512 => "sha512",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sha256" => Some(HashId::Sha256),
            "sha512" => Some(HashId::Sha512),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            HashId::Sha256 => 1,
            HashId::Sha512 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(HashId::Sha256),
            2 => Some(HashId::Sha512),
            _ => None,
        }
    }

    /// Hashes `msg` and returns the leading `n` bits.
    fn digest_prefix(self, msg: &[u8], n: usize) -> Bits {
        let out = match self {
            HashId::Sha256 => Bits::prefix_of(&Sha256::digest(msg), n),
            HashId::Sha512 => Bits::prefix_of(&Sha512::digest(msg), n),
        };
        out.expect("n is validated against the hash output length")
    }
}

/// Public parameters of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    /// Password length in bits.
    pub n: usize,
    /// Salt length in bits.
    pub s: usize,
    /// Time tag length in bits.
    pub c: usize,
    /// Hash output length in bits.
    pub m: usize,
    /// Chain length in slots.
    pub k: u64,
    /// Slot duration in seconds.
    pub slot_seconds: u64,
    pub hash: HashId,
}

impl Default for Params {
    fn default() -> Self {
        Params { n: 130, s: 80, c: 32, m: 256, k: 2_000_000, slot_seconds: 30, hash: HashId::Sha256 }
    }
}

impl Params {
    /// Default parameters with a different chain length.
    pub fn with_chain_length(k: u64) -> Self {
        Params { k, ..Params::default() }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let bad = |msg: String| Err(ChainError::InvalidParams(msg));
        if self.n == 0 || self.n > MAX_BITS {
            return bad(format!("password length {} not in 1..={MAX_BITS}", self.n));
        }
        if self.s > MAX_BITS {
            return bad(format!("salt length {} exceeds {MAX_BITS}", self.s));
        }
        if self.c == 0 || self.c > 64 {
            return bad(format!("time tag length {} not in 1..=64", self.c));
        }
        if self.m != self.hash.output_bits() {
            return bad(format!("m = {} does not match {} output", self.m, self.hash.name()));
        }
        if self.n + self.s + self.c > self.m {
            return bad(format!("n + s + c = {} exceeds m = {}", self.n + self.s + self.c, self.m));
        }
        if self.k == 0 {
            return bad("chain length must be at least 1".into());
        }
        if self.c < 64 && self.k >= 1u64 << self.c {
            return bad(format!("chain length {} not representable in {} tag bits", self.k, self.c));
        }
        if self.slot_seconds == 0 {
            return bad("slot duration must be at least one second".into());
        }
        Ok(())
    }

    /// Bit length of every hashed message.
    pub fn message_bits(&self) -> usize {
        self.c + self.s + self.n
    }

    /// Whether `t` fits in the time tag.
    pub fn tag_fits(&self, t: u64) -> bool {
        self.c == 64 || t >> self.c == 0
    }

    /// The slot containing `unix_seconds`.
    pub fn slot_of(&self, unix_seconds: u64) -> SlotTime {
        SlotTime(unix_seconds / self.slot_seconds)
    }
}

/// A time index in units of the slot duration since the UNIX epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotTime(pub u64);

impl fmt::Display for SlotTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Per-chain salt (`id`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Salt(pub Bits);

/// The chain head.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SecretKey(pub Bits);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey(<{} bits>)", self.0.len())
    }
}

/// A chain node value together with its slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainValue {
    pub value: Bits,
    pub at: SlotTime,
}

/// Writes the step message `<tag>_c || salt || value` into `buf`, returning
/// its length in bytes. The final partial byte is zero-padded on the right.
pub fn step_message(params: &Params, salt: &Salt, value: &Bits, tag: u64, buf: &mut [u8]) -> usize {
    let mut w = BitWriter::new(buf);
    w.push_uint(tag, params.c);
    w.push(salt.0.as_bytes(), params.s);
    w.push(value.as_bytes(), params.n);
    byte_len(w.bit_len())
}

/// Hashing context for one chain, counting every hash it performs.
///
/// The counter belongs to the context, so every traversal that needs an
/// exact hash count simply owns its own `Chain`.
#[derive(Debug)]
pub struct Chain<'a> {
    params: &'a Params,
    salt: &'a Salt,
    tail: SlotTime,
    hashes: u64,
}

impl<'a> Chain<'a> {
    pub fn new(params: &'a Params, salt: &'a Salt, tail: SlotTime) -> Self {
        Chain { params, salt, tail, hashes: 0 }
    }

    /// Hash evaluations performed so far.
    pub fn hashes(&self) -> u64 {
        self.hashes
    }

    pub fn tail(&self) -> SlotTime {
        self.tail
    }

    /// The node one slot below `v`.
    pub fn step_down(&mut self, v: &ChainValue) -> Result<ChainValue, ChainError> {
        if v.at <= self.tail {
            return Err(ChainError::StepBelowTail { at: v.at.0 });
        }
        self.check_value(&v.value)?;
        let tag = v.at.0 - 1;
        if !self.params.tag_fits(tag) {
            return Err(ChainError::TagOverflow(tag));
        }
        Ok(ChainValue { value: self.hash_step(tag, &v.value), at: SlotTime(tag) })
    }

    /// The node at slot `target`, walking down from `v`.
    pub fn walk(&mut self, v: &ChainValue, target: SlotTime) -> Result<ChainValue, ChainError> {
        self.walk_collecting(v, target, &[]).map(|(end, _)| end)
    }

    /// Walks from `v` down to `target` and additionally returns the nodes at
    /// `capture` slots passed on the way (including the endpoints). `capture`
    /// must be sorted in descending order; slots outside the walked range are
    /// skipped.
    pub fn walk_collecting(
        &mut self,
        v: &ChainValue,
        target: SlotTime,
        capture: &[SlotTime],
    ) -> Result<(ChainValue, Vec<ChainValue>), ChainError> {
        if target < self.tail || target > v.at {
            return Err(ChainError::TargetOutOfRange { target: target.0, tail: self.tail.0, from: v.at.0 });
        }
        self.check_value(&v.value)?;
        if target < v.at && !self.params.tag_fits(v.at.0 - 1) {
            return Err(ChainError::TagOverflow(v.at.0 - 1));
        }
        debug_assert!(capture.windows(2).all(|w| w[0] > w[1]), "capture slots must be descending");
        let mut pending = capture.iter().copied().skip_while(|&s| s > v.at).peekable();
        let mut captured = Vec::new();
        let mut cur = *v;
        loop {
            if pending.peek() == Some(&cur.at) {
                captured.push(cur);
                pending.next();
            }
            if cur.at == target {
                return Ok((cur, captured));
            }
            let tag = cur.at.0 - 1;
            cur = ChainValue { value: self.hash_step(tag, &cur.value), at: SlotTime(tag) };
        }
    }

    fn hash_step(&mut self, tag: u64, value: &Bits) -> Bits {
        let mut buf = [0u8; MAX_MESSAGE_BYTES];
        let len = step_message(self.params, self.salt, value, tag, &mut buf);
        self.hashes += 1;
        self.params.hash.digest_prefix(&buf[..len], self.params.n)
    }

    fn check_value(&self, value: &Bits) -> Result<(), ChainError> {
        if value.len() != self.params.n {
            return Err(ChainError::BadLength { expected: self.params.n, got: value.len() });
        }
        if self.salt.0.len() != self.params.s {
            return Err(ChainError::BadLength { expected: self.params.s, got: self.salt.0.len() });
        }
        Ok(())
    }
}

/// One step down from `v` on the chain whose tail is at `tail`.
pub fn step_down(params: &Params, salt: &Salt, tail: SlotTime, v: &ChainValue) -> Result<ChainValue, ChainError> {
    Chain::new(params, salt, tail).step_down(v)
}

/// The node at `target`, walking down from `v`; returns the node and the
/// number of hashes spent (always `v.at - target`).
pub fn walk(
    params: &Params,
    salt: &Salt,
    tail: SlotTime,
    v: &ChainValue,
    target: SlotTime,
) -> Result<(ChainValue, u64), ChainError> {
    let mut chain = Chain::new(params, salt, tail);
    let out = chain.walk(v, target)?;
    Ok((out, chain.hashes()))
}

/// Draws a fresh secret key and salt.
pub fn keygen<R: RngCore + CryptoRng + ?Sized>(params: &Params, rng: &mut R) -> Result<(SecretKey, Salt), ChainError> {
    params.validate()?;
    let map = |e: BitsError| match e {
        BitsError::Rng => ChainError::RngFailure,
        other => ChainError::InvalidParams(other.to_string()),
    };
    let sk = Bits::random(rng, params.n).map_err(map)?;
    let salt = Bits::random(rng, params.s).map_err(map)?;
    Ok((SecretKey(sk), Salt(salt)))
}

/// The public chain tail `p_init`, computed with exactly `k` hashes.
pub fn chain_tail(params: &Params, salt: &Salt, sk: &SecretKey, t_init: SlotTime) -> Result<ChainValue, ChainError> {
    params.validate()?;
    let head = head_value(params, sk, t_init)?;
    Chain::new(params, salt, t_init).walk(&head, t_init)
}

/// The head node `(sk, t_init + k)`.
pub fn head_value(params: &Params, sk: &SecretKey, t_init: SlotTime) -> Result<ChainValue, ChainError> {
    let t_max = t_init.0.checked_add(params.k).ok_or(ChainError::TagOverflow(u64::MAX))?;
    if !params.tag_fits(t_max) {
        return Err(ChainError::TagOverflow(t_max));
    }
    Ok(ChainValue { value: sk.0, at: SlotTime(t_max) })
}
