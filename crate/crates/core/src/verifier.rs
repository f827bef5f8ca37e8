//! Server side: credential state and password verification.
//!
//! A credential holds only public data: the salt, the parameters and the
//! most recently accepted chain node. A submitted password for slot `t` is
//! accepted when walking it down to the recorded slot reproduces the
//! recorded node, after which it replaces that node.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::chain::{Chain, ChainValue, Params, Salt, SlotTime};
use crate::prover::{Enrollment, ENROLLMENT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkewPolicy {
    /// Past slots tried besides the current one.
    pub w_back: u64,
    /// Accept the chain head for any time after expiry. Off by default: it
    /// keeps the last password of an expired chain usable indefinitely.
    pub accept_head_after_expiry: bool,
}

impl Default for SkewPolicy {
    fn default() -> Self {
        SkewPolicy { w_back: 2, accept_head_after_expiry: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierCredential {
    pub cred_id: String,
    pub salt: Salt,
    pub params: Params,
    pub t_init: SlotTime,
    pub t_max: SlotTime,
    pub p_prev: ChainValue,
    pub t_prev: SlotTime,
}

impl VerifierCredential {
    pub fn check_invariants(&self) -> Result<(), EnrollError> {
        let bad = |m: &str| Err(EnrollError::Malformed(m.to_string()));
        if self.t_max.0.checked_sub(self.t_init.0) != Some(self.params.k) {
            return bad("t_max - t_init differs from the chain length");
        }
        if !(self.t_init <= self.t_prev && self.t_prev < self.t_max) || self.p_prev.at != self.t_prev {
            return bad("recorded slot outside [t_init, t_max)");
        }
        if self.p_prev.value.len() != self.params.n || self.salt.0.len() != self.params.s {
            return bad("value or salt length mismatch");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnrollError {
    #[error("malformed enrollment: {0}")]
    Malformed(String),
    #[error("unsupported enrollment version {0}")]
    UnsupportedVersion(u8),
    #[error("credential {0} already exists")]
    DuplicateCredential(String),
    #[error(transparent)]
    Store(StoreError),
}

/// Builds the initial credential from an enrollment payload.
pub fn enroll(cred_id: &str, payload: &Enrollment) -> Result<VerifierCredential, EnrollError> {
    if payload.version != ENROLLMENT_VERSION {
        return Err(EnrollError::UnsupportedVersion(payload.version));
    }
    if cred_id.is_empty() {
        return Err(EnrollError::Malformed("empty credential id".into()));
    }
    payload.params.validate().map_err(|e| EnrollError::Malformed(e.to_string()))?;
    let t_init = payload.t_init();
    let t_max = t_init
        .0
        .checked_add(payload.params.k)
        .filter(|&t| payload.params.tag_fits(t))
        .ok_or_else(|| EnrollError::Malformed("chain end does not fit the time tag".into()))?;
    let cred = VerifierCredential {
        cred_id: cred_id.to_string(),
        salt: payload.salt,
        params: payload.params,
        t_init,
        t_max: SlotTime(t_max),
        p_prev: payload.p_init,
        t_prev: t_init,
    };
    cred.check_invariants()?;
    Ok(cred)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Rejection {
    #[error("chain expired")]
    Expired,
    #[error("password is a replay or older than the last accepted one")]
    ReplayOrStale,
    #[error("password does not verify")]
    BadPassword { hashes: u64 },
    #[error("password has the wrong length")]
    MalformedPassword,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accepted {
    pub credential: VerifierCredential,
    pub slot: SlotTime,
    pub hashes: u64,
}

enum Candidates {
    Slots { hi: u64, lo: u64 },
    Expired,
    Stale,
}

fn candidates(cred: &VerifierCredential, t_server: SlotTime, policy: &SkewPolicy) -> Candidates {
    let t_prev = cred.t_prev.0;
    let t_max = cred.t_max.0;
    if t_server.0 > t_max && policy.accept_head_after_expiry {
        return if t_prev < t_max { Candidates::Slots { hi: t_max, lo: t_max } } else { Candidates::Expired };
    }
    let hi = t_server.0.min(t_max);
    let lo = (t_prev + 1).max(t_server.0.saturating_sub(policy.w_back));
    if hi >= lo {
        Candidates::Slots { hi, lo }
    } else if t_server.0 > t_max {
        Candidates::Expired
    } else {
        Candidates::Stale
    }
}

/// Checks `p` against the credential at server time `t_server`. Candidate
/// slots are tried newest first; on success the returned credential records
/// the matching slot. The input credential is not modified.
pub fn verify(
    cred: &VerifierCredential,
    p: &Bits,
    t_server: SlotTime,
    policy: &SkewPolicy,
) -> Result<Accepted, Rejection> {
    if p.len() != cred.params.n {
        return Err(Rejection::MalformedPassword);
    }
    let (hi, lo) = match candidates(cred, t_server, policy) {
        Candidates::Slots { hi, lo } => (hi, lo),
        Candidates::Expired => return Err(Rejection::Expired),
        Candidates::Stale => return Err(Rejection::ReplayOrStale),
    };
    let mut chain = Chain::new(&cred.params, &cred.salt, cred.t_init);
    for t_c in (lo..=hi).rev() {
        let start = ChainValue { value: *p, at: SlotTime(t_c) };
        let end = chain.walk(&start, cred.t_prev).map_err(|_| Rejection::MalformedPassword)?;
        if end.value == cred.p_prev.value {
            let mut credential = cred.clone();
            credential.p_prev = start;
            credential.t_prev = start.at;
            return Ok(Accepted { credential, slot: start.at, hashes: chain.hashes() });
        }
    }
    Err(Rejection::BadPassword { hashes: chain.hashes() })
}

/// Hashes a rejected `verify` call spends at `t_server`.
pub fn verification_cost(cred: &VerifierCredential, t_server: SlotTime, policy: &SkewPolicy) -> u64 {
    match candidates(cred, t_server, policy) {
        Candidates::Slots { hi, lo } => (lo..=hi).map(|t| t - cred.t_prev.0).sum(),
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("credential {0} already exists")]
    Duplicate(String),
    #[error("unknown credential {0}")]
    Unknown(String),
    #[error("store failure: {0}")]
    Io(String),
}

/// Durable credential storage. `insert` and `update` return only once the
/// change is persisted.
pub trait CredentialStore: Send + Sync {
    fn get(&self, cred_id: &str) -> Result<Option<VerifierCredential>, StoreError>;
    fn insert(&self, cred: &VerifierCredential, replace: bool) -> Result<(), StoreError>;
    fn update(&self, cred: &VerifierCredential) -> Result<(), StoreError>;
    fn ids(&self) -> Result<Vec<String>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    map: Mutex<HashMap<String, VerifierCredential>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CredentialStore for MemoryStore {
    fn get(&self, cred_id: &str) -> Result<Option<VerifierCredential>, StoreError> {
        Ok(self.map.lock().expect("store lock poisoned").get(cred_id).cloned())
    }

    fn insert(&self, cred: &VerifierCredential, replace: bool) -> Result<(), StoreError> {
        let mut map = self.map.lock().expect("store lock poisoned");
        if !replace && map.contains_key(&cred.cred_id) {
            return Err(StoreError::Duplicate(cred.cred_id.clone()));
        }
        map.insert(cred.cred_id.clone(), cred.clone());
        Ok(())
    }

    fn update(&self, cred: &VerifierCredential) -> Result<(), StoreError> {
        let mut map = self.map.lock().expect("store lock poisoned");
        match map.get_mut(&cred.cred_id) {
            Some(slot) => {
                *slot = cred.clone();
                Ok(())
            }
            None => Err(StoreError::Unknown(cred.cred_id.clone())),
        }
    }

    fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = self.map.lock().expect("store lock poisoned").keys().cloned().collect();
        ids.sort();
        Ok(ids)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Rejected(#[from] Rejection),
    #[error("unknown credential {0}")]
    UnknownCredential(String),
    #[error(transparent)]
    Store(StoreError),
}

/// Verification over a store, one verification at a time per credential.
#[derive(Debug)]
pub struct Verifier<S> {
    store: S,
    policy: SkewPolicy,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl<S: CredentialStore> Verifier<S> {
    pub fn new(store: S, policy: SkewPolicy) -> Self {
        Verifier { store, policy, locks: Mutex::new(HashMap::new()) }
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn policy(&self) -> &SkewPolicy {
        &self.policy
    }

    fn lock_for(&self, cred_id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().expect("lock table poisoned").entry(cred_id.to_string()).or_default().clone()
    }

    pub fn enroll(&self, cred_id: &str, payload: &Enrollment, replace: bool) -> Result<VerifierCredential, EnrollError> {
        let cred = enroll(cred_id, payload)?;
        let lock = self.lock_for(cred_id);
        let _guard = lock.lock().expect("credential lock poisoned");
        self.store.insert(&cred, replace).map_err(|e| match e {
            StoreError::Duplicate(id) => EnrollError::DuplicateCredential(id),
            other => EnrollError::Store(other),
        })?;
        Ok(cred)
    }

    /// Verifies and, on success, persists the new state before returning.
    pub fn verify(&self, cred_id: &str, p: &Bits, t_server: SlotTime) -> Result<Accepted, VerifyError> {
        let lock = self.lock_for(cred_id);
        let _guard = lock.lock().expect("credential lock poisoned");
        let cred = self
            .store
            .get(cred_id)
            .map_err(VerifyError::Store)?
            .ok_or_else(|| VerifyError::UnknownCredential(cred_id.to_string()))?;
        let accepted = verify(&cred, p, t_server, &self.policy)?;
        self.store.update(&accepted.credential).map_err(VerifyError::Store)?;
        Ok(accepted)
    }
}
