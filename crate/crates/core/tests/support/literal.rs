// Compares the chain against a direct big-integer transcription of the
// function family
//
//   h_i(x) = H(<t_init + k - i>_c || id || x)|_n,  i = 1..k
//   p_init = h_k(... h_1(sk))
//   p_t    = h_{t_max - t}(... h_1(sk)),  p_{t_max} = sk

use num_bigint::BigUint;
use rand::{CryptoRng, Rng, RngCore};
use sha2::{Digest, Sha256};

use tkey_core::bits::Bits;
use tkey_core::chain::{HashId, Params, SlotTime};
use tkey_core::checkpoint::{PlanConfig, Scheme};
use tkey_core::prover::ProverState;
use tkey_core::verifier::{self, SkewPolicy};

/// `(n, s, c)` shapes cycled through by [`check_instance`].
pub const SHAPES: [(usize, usize, usize); 5] = [(130, 80, 32), (20, 16, 16), (64, 0, 24), (161, 13, 40), (8, 80, 32)];

pub struct Literal {
    pub n: usize,
    pub s: usize,
    pub c: usize,
    pub k: u64,
    pub t_init: u64,
    pub id: BigUint,
}

impl Literal {
    pub fn h(&self, i: u64, x: &BigUint) -> BigUint {
        let total = self.c + self.s + self.n;
        let nbytes = total.div_ceil(8);
        let tag = BigUint::from(self.t_init + self.k - i);
        let msg = ((tag << (self.s + self.n)) | (self.id.clone() << self.n) | x) << (nbytes * 8 - total);
        let mut bytes = msg.to_bytes_be();
        while bytes.len() < nbytes {
            bytes.insert(0, 0);
        }
        BigUint::from_bytes_be(&Sha256::digest(&bytes)) >> (256 - self.n)
    }

    /// `p_t` for every t in [t_init, t_max], indexed by t - t_init.
    pub fn passwords(&self, sk: &BigUint) -> Vec<BigUint> {
        let mut out = vec![sk.clone()];
        let mut x = sk.clone();
        for i in 1..=self.k {
            x = self.h(i, &x);
            out.push(x.clone());
        }
        out.reverse();
        out
    }
}

pub fn to_big(b: &Bits) -> BigUint {
    BigUint::from_bytes_be(b.as_bytes()) >> (b.as_bytes().len() * 8 - b.len())
}


/// Builds a random chain of the given shape and compares every password,
/// the tail and one server-side recomputation against the literal family.
pub fn check_instance<R: RngCore + CryptoRng>(rng: &mut R, shape: (usize, usize, usize)) -> Result<(), String> {
    let (n, s, c) = shape;
    let k = rng.gen_range(1..=64u64);
    let t_max_cap = if c == 64 { u64::MAX } else { (1u64 << c) - 1 };
    let t_init = rng.gen_range(0..=t_max_cap - k).min(60_000_000);
    let params = Params { n, s, c, m: 256, k, slot_seconds: 30, hash: HashId::Sha256 };
    let plan = PlanConfig { scheme: Scheme::Mixed, q_total: 4, q_worst: 1, ..PlanConfig::default() };
    let (state, enrollment) = ProverState::init(params, plan, rng, SlotTime(t_init)).map_err(|e| e.to_string())?;

    let literal = Literal { n, s, c, k, t_init, id: to_big(&enrollment.salt.0) };
    let expected = literal.passwords(&to_big(&state.head().value));
    if to_big(&enrollment.p_init.value) != expected[0] {
        return Err(format!("p_init differs for {shape:?}, k = {k}"));
    }
    for t in t_init + 1..=t_init + k {
        let p = state.password_at(SlotTime(t)).map_err(|e| e.to_string())?.password;
        if to_big(&p.value) != expected[(t - t_init) as usize] {
            return Err(format!("p_{t} differs for {shape:?}, k = {k}"));
        }
    }

    // The server's recomputation of p_prev from p_t, literally:
    // h_{t_max - t_prev}(... h_{t_max - t + 1}(p)).
    let cred = verifier::enroll("x", &enrollment).map_err(|e| e.to_string())?;
    let t = t_init + rng.gen_range(1..=k);
    let p = state.password_at(SlotTime(t)).map_err(|e| e.to_string())?.password.value;
    let mut x = to_big(&p);
    for i in (t_init + k - t + 1)..=k {
        x = literal.h(i, &x);
    }
    if x != to_big(&cred.p_prev.value) {
        return Err(format!("literal walk from p_{t} misses the tail"));
    }
    let policy = SkewPolicy { w_back: 0, ..SkewPolicy::default() };
    let hashes = verifier::verify(&cred, &p, SlotTime(t), &policy).map_err(|e| e.to_string())?.hashes;
    if hashes != t - t_init {
        return Err(format!("verification spent {hashes} hashes, expected {}", t - t_init));
    }
    Ok(())
}
