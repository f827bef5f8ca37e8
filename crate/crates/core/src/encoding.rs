//! Text forms of passwords and enrollment payloads.
//!
//! Passwords and salts are written as unpadded lowercase base32 (RFC 4648
//! alphabet), or as a sequence of words from a 2^11 or 2^12 word list.
//! Enrollment travels as a `tkey://enroll?...` URI.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::bits::Bits;
use crate::chain::{ChainValue, HashId, Params, Salt, SlotTime};
use crate::prover::{Enrollment, ENROLLMENT_VERSION};

const ALPHABET: &[u8; 32] = b"abcdefghijklmnopqrstuvwxyz234567";

/// Bundled 2048-word list, one word per line.
pub const SKEY_2048: &str = include_str!("../data/skey2048.txt");
/// SHA-256 of [`SKEY_2048`].
pub const SKEY_2048_SHA256: &str = "57f52671ada3c689d145e18c74a64f296ea6cac2b98331e3860448ec02c89f11";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodingError {
    #[error("expected {expected} characters or words, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("character {0:?} is not in the base32 alphabet")]
    BadAlphabet(char),
    #[error("non-zero padding bits")]
    BadPadBits,
    #[error("unknown word {0:?}")]
    UnknownWord(String),
    #[error("expected {expected} words, got {got}")]
    BadCount { expected: usize, got: usize },
    #[error("invalid word list: {0}")]
    BadWordList(String),
    #[error("malformed enrollment URI: {0}")]
    Malformed(String),
    #[error("unsupported enrollment version {0}")]
    UnsupportedVersion(String),
    #[error("unsupported hash algorithm {0:?}")]
    UnsupportedAlg(String),
}

/// Number of base32 characters for `bits` bits.
pub const fn base32_len(bits: usize) -> usize {
    bits.div_ceil(5)
}

pub fn to_base32(b: &Bits) -> String {
    let len = b.len();
    let mut out = String::with_capacity(base32_len(len));
    for i in (0..len).step_by(5) {
        let width = 5.min(len - i);
        let sym = (b.read_uint(i, width) << (5 - width)) as usize;
        out.push(ALPHABET[sym] as char);
    }
    out
}

/// Decodes exactly `bits` bits. Case-insensitive; rejects non-zero pad bits.
pub fn from_base32(s: &str, bits: usize) -> Result<Bits, EncodingError> {
    let expected = base32_len(bits);
    let got = s.chars().count();
    if got != expected {
        return Err(EncodingError::BadLength { expected, got });
    }
    let mut out = Bits::zero(bits).map_err(|_| EncodingError::BadLength { expected, got })?;
    for (j, ch) in s.chars().enumerate() {
        let sym = match ch.to_ascii_lowercase() {
            c @ 'a'..='z' => c as u8 - b'a',
            c @ '2'..='7' => c as u8 - b'2' + 26,
            _ => return Err(EncodingError::BadAlphabet(ch)),
        };
        for k in 0..5 {
            let bit = sym >> (4 - k) & 1 == 1;
            let i = j * 5 + k;
            if i < bits {
                out.set_bit(i, bit);
            } else if bit {
                return Err(EncodingError::BadPadBits);
            }
        }
    }
    Ok(out)
}

pub fn password_to_base32(p: &Bits) -> String {
    to_base32(p)
}

pub fn base32_to_password(s: &str, n: usize) -> Result<Bits, EncodingError> {
    from_base32(s, n)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordList {
    bits: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordList {
    /// Parses one word per line (LF endings). The list must hold 2^11 or
    /// 2^12 distinct words matching `^[a-z]{1,6}$`.
    pub fn parse(text: &str) -> Result<Self, EncodingError> {
        let bad = |m: String| Err(EncodingError::BadWordList(m));
        let body = text.strip_suffix('\n').unwrap_or(text);
        let words: Vec<String> = body.split('\n').map(str::to_string).collect();
        let bits = match words.len() {
            2048 => 11,
            4096 => 12,
            n => return bad(format!("{n} words; need 2048 or 4096")),
        };
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.len() > 6 || !w.bytes().all(|c| c.is_ascii_lowercase()) {
                return bad(format!("line {}: {w:?} is not 1-6 lowercase letters", i + 1));
            }
            if index.insert(w.clone(), i).is_some() {
                return bad(format!("duplicate word {w:?}"));
            }
        }
        Ok(WordList { bits, words, index })
    }

    /// The bundled 2048-word list, checked against its recorded digest.
    pub fn skey() -> Result<Self, EncodingError> {
        let digest: String = Sha256::digest(SKEY_2048.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        if digest != SKEY_2048_SHA256 {
            return Err(EncodingError::BadWordList(format!("digest mismatch: {digest}")));
        }
        Self::parse(SKEY_2048)
    }

    /// Bits per word.
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Words needed for an `n`-bit value.
    pub fn words_for(&self, n: usize) -> usize {
        n.div_ceil(self.bits)
    }
}

/// Encodes `p` as words, most significant first, after prepending zero bits
/// up to a whole number of words.
pub fn password_to_words(p: &Bits, list: &WordList) -> Vec<String> {
    let b = list.bits();
    let count = list.words_for(p.len());
    let pad = count * b - p.len();
    (0..count)
        .map(|w| {
            let mut idx = 0usize;
            for j in w * b..(w + 1) * b {
                let bit = j >= pad && p.bit(j - pad);
                idx = idx << 1 | bit as usize;
            }
            list.word(idx).to_string()
        })
        .collect()
}

pub fn words_to_password<S: AsRef<str>>(words: &[S], list: &WordList, n: usize) -> Result<Bits, EncodingError> {
    let b = list.bits();
    let expected = list.words_for(n);
    if words.len() != expected {
        return Err(EncodingError::BadCount { expected, got: words.len() });
    }
    let pad = expected * b - n;
    let mut out = Bits::zero(n).map_err(|_| EncodingError::BadCount { expected, got: words.len() })?;
    for (w, word) in words.iter().enumerate() {
        let word = word.as_ref().trim().to_ascii_lowercase();
        let idx = list.index_of(&word).ok_or(EncodingError::UnknownWord(word))?;
        for k in 0..b {
            let bit = idx >> (b - 1 - k) & 1 == 1;
            let j = w * b + k;
            if j < pad {
                if bit {
                    return Err(EncodingError::BadPadBits);
                }
            } else {
                out.set_bit(j - pad, bit);
            }
        }
    }
    Ok(out)
}

/// Splits a phrase on whitespace and decodes it.
pub fn phrase_to_password(phrase: &str, list: &WordList, n: usize) -> Result<Bits, EncodingError> {
    let words: Vec<&str> = phrase.split_whitespace().collect();
    words_to_password(&words, list, n)
}

const URI_PREFIX: &str = "tkey://enroll?";
const URI_KEYS: [&str; 7] = ["v", "alg", "id", "p", "t0", "k", "i"];
/// Password, salt and time-tag lengths fixed by version 1 of the URI.
const URI_N: usize = 130;
const URI_S: usize = 80;
const URI_C: usize = 32;

/// `tkey://enroll?v=1&alg=sha256&id=<salt>&p=<tail>&t0=<slot>&k=<length>&i=<seconds>`
pub fn enrollment_to_uri(e: &Enrollment) -> Result<String, EncodingError> {
    let p = &e.params;
    if (p.n, p.s, p.c) != (URI_N, URI_S, URI_C) {
        return Err(EncodingError::Malformed(format!(
            "version 1 URIs carry n={URI_N}, s={URI_S}, c={URI_C}; got n={}, s={}, c={}",
            p.n, p.s, p.c
        )));
    }
    Ok(format!(
        "{URI_PREFIX}v={}&alg={}&id={}&p={}&t0={}&k={}&i={}",
        e.version,
        p.hash.name(),
        to_base32(&e.salt.0),
        to_base32(&e.p_init.value),
        e.p_init.at.0,
        p.k,
        p.slot_seconds
    ))
}

pub fn uri_to_enrollment(uri: &str) -> Result<Enrollment, EncodingError> {
    let malformed = |m: String| EncodingError::Malformed(m);
    let query = uri.strip_prefix(URI_PREFIX).ok_or_else(|| malformed(format!("must start with {URI_PREFIX}")))?;
    let mut fields: HashMap<&str, &str> = HashMap::new();
    for pair in query.split('&') {
        let (key, value) = pair.split_once('=').ok_or_else(|| malformed(format!("{pair:?} is not key=value")))?;
        if fields.insert(key, value).is_some() {
            return Err(malformed(format!("repeated key {key:?}")));
        }
    }
    let field = |key: &str| fields.get(key).copied().ok_or_else(|| malformed(format!("missing {key}")));
    let version = field("v")?;
    if version != "1" {
        return Err(EncodingError::UnsupportedVersion(version.to_string()));
    }
    if let Some(unknown) = fields.keys().find(|k| !URI_KEYS.contains(k)) {
        return Err(malformed(format!("unknown key {unknown:?}")));
    }
    let alg = field("alg")?;
    let hash = HashId::from_name(alg).ok_or_else(|| EncodingError::UnsupportedAlg(alg.to_string()))?;
    let number = |key: &str| -> Result<u64, EncodingError> {
        let raw = field(key)?;
        if raw.is_empty() || !raw.bytes().all(|c| c.is_ascii_digit()) || (raw.len() > 1 && raw.starts_with('0')) {
            return Err(malformed(format!("{key} must be a canonical decimal")));
        }
        raw.parse().map_err(|_| malformed(format!("{key} out of range")))
    };
    let t0 = number("t0")?;
    let k = number("k")?;
    let slot_seconds = number("i")?;
    let salt = from_base32(field("id")?, URI_S).map_err(|e| malformed(format!("id: {e}")))?;
    let tail = from_base32(field("p")?, URI_N).map_err(|e| malformed(format!("p: {e}")))?;
    let params = Params { n: URI_N, s: URI_S, c: URI_C, m: hash.output_bits(), k, slot_seconds, hash };
    params.validate().map_err(|e| malformed(e.to_string()))?;
    let end_fits = t0.checked_add(k).is_some_and(|t| params.tag_fits(t));
    if !end_fits {
        return Err(malformed("chain end does not fit the time tag".into()));
    }
    Ok(Enrollment {
        version: ENROLLMENT_VERSION,
        params,
        salt: Salt(salt),
        p_init: ChainValue { value: tail, at: SlotTime(t0) },
    })
}

/// Decimal form of a bit string, zero-padded to the width of its largest
/// value; suits QR numeric mode.
pub fn to_decimal(b: &Bits) -> String {
    let width = decimal_width(b.len());
    let mut digits = vec![0u8; width];
    for i in 0..b.len() {
        let mut carry = b.bit(i) as u8;
        for d in digits.iter_mut().rev() {
            let v = *d * 2 + carry;
            *d = v % 10;
            carry = v / 10;
        }
    }
    digits.iter().map(|d| (b'0' + d) as char).collect()
}

/// Digits needed for any `bits`-bit value.
pub fn decimal_width(bits: usize) -> usize {
    ((bits as f64) * std::f64::consts::LOG10_2).floor() as usize + 1
}

/// QR encoding modes relevant to password payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrMode {
    Numeric,
    Alphanumeric,
    Byte,
}

/// Data codewords at error-correction level L for versions 1 to 4.
const QR_DATA_CODEWORDS_L: [usize; 4] = [19, 34, 55, 80];

/// Bits of a single QR segment of `chars` characters, versions 1 to 9.
pub fn qr_segment_bits(mode: QrMode, chars: usize) -> usize {
    let (count_bits, body) = match mode {
        QrMode::Numeric => (10, 10 * (chars / 3) + [0, 4, 7][chars % 3]),
        QrMode::Alphanumeric => (9, 11 * (chars / 2) + 6 * (chars % 2)),
        QrMode::Byte => (8, 8 * chars),
    };
    4 + count_bits + body
}

/// Smallest QR version (1 to 4) holding the segment at level L.
pub fn qr_min_version(mode: QrMode, chars: usize) -> Option<u8> {
    let need = qr_segment_bits(mode, chars);
    QR_DATA_CODEWORDS_L.iter().position(|&cw| need <= cw * 8).map(|v| v as u8 + 1)
}
