//! Durable credential store: an append-only log of whole credential records.
//!
//! ```text
//! tkey-store 1
//! <checksum> {"seq":1,"cred":{...}}
//! <checksum> {"seq":2,"cred":{...}}
//! ```
//!
//! The checksum is the first eight bytes of the SHA-256 of the JSON, in
//! hex. The latest record for a credential wins. An append is fsynced before
//! the call returns. On open, a torn final line (no newline) is cut off; any
//! other damaged line is an error. Compaction writes the live records to a
//! sibling file, fsyncs it and renames it over the log.
//!
//! After any failed write the store refuses further writes, as a crashed
//! process would; reopen it to continue.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tkey_core::verifier::{CredentialStore, StoreError, VerifierCredential};

const HEADER: &str = "tkey-store 1";

/// Places where a write can be made to fail, simulating a crash there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultPoint {
    /// Nothing of the record reaches the file.
    BeforeWrite,
    /// Half of the record reaches the file.
    TornWrite,
    /// The whole record is written but lost with the page cache.
    LostBeforeSync,
    /// The whole record is written and survives, but was never synced.
    BeforeSync,
    /// The record is durable; the caller never hears back.
    AfterSync,
    CompactBeforeRename,
    CompactAfterRename,
}

impl FaultPoint {
    pub const ALL: [FaultPoint; 7] = [
        FaultPoint::BeforeWrite,
        FaultPoint::TornWrite,
        FaultPoint::LostBeforeSync,
        FaultPoint::BeforeSync,
        FaultPoint::AfterSync,
        FaultPoint::CompactBeforeRename,
        FaultPoint::CompactAfterRename,
    ];
}

/// Fires once, the `nth` time (from zero) execution reaches `point`.
#[derive(Debug, Default)]
pub struct Faults {
    armed: Mutex<Option<(FaultPoint, u64)>>,
    fired: Mutex<bool>,
}

impl Faults {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn at(point: FaultPoint, nth: u64) -> Self {
        Faults { armed: Mutex::new(Some((point, nth))), fired: Mutex::new(false) }
    }

    pub fn fired(&self) -> bool {
        *self.fired.lock().expect("fault lock poisoned")
    }

    fn check(&self, point: FaultPoint) -> io::Result<()> {
        let mut armed = self.armed.lock().expect("fault lock poisoned");
        match armed.as_mut() {
            Some((p, 0)) if *p == point => {
                *armed = None;
                *self.fired.lock().expect("fault lock poisoned") = true;
                Err(io::Error::other(format!("injected fault at {point:?}")))
            }
            Some((p, n)) if *p == point => {
                *n -= 1;
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a credential store: {0}")]
    BadHeader(String),
    #[error("corrupt record on line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

#[derive(Debug, Default)]
pub struct StoreOptions {
    /// Compact once the log holds this many records beyond the live ones.
    /// Zero disables automatic compaction.
    pub compact_slack: u64,
    pub faults: Faults,
}

#[derive(Serialize)]
struct RecordRef<'a> {
    seq: u64,
    cred: &'a VerifierCredential,
}

#[derive(Deserialize)]
struct Record {
    seq: u64,
    cred: VerifierCredential,
}

fn checksum(json: &[u8]) -> String {
    Sha256::digest(json)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn encode(seq: u64, cred: &VerifierCredential) -> Vec<u8> {
    let json = serde_json::to_vec(&RecordRef { seq, cred }).expect("credential serializes");
    let mut line = checksum(&json).into_bytes();
    line.push(b' ');
    line.extend_from_slice(&json);
    line.push(b'\n');
    line
}

fn decode(line: &[u8]) -> Result<Record, String> {
    let text = std::str::from_utf8(line).map_err(|_| "not UTF-8".to_string())?;
    let (sum, json) = text.split_once(' ').ok_or("missing checksum")?;
    if checksum(json.as_bytes()) != sum {
        return Err("checksum mismatch".into());
    }
    let record: Record = serde_json::from_str(json).map_err(|e| e.to_string())?;
    record.cred.check_invariants().map_err(|e| e.to_string())?;
    Ok(record)
}

fn sync_dir(path: &Path) -> io::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => File::open(dir)?.sync_all(),
        _ => File::open(".")?.sync_all(),
    }
}

#[derive(Debug)]
struct Inner {
    file: File,
    map: HashMap<String, VerifierCredential>,
    seq: u64,
    records: u64,
    len: u64,
    failed: Option<String>,
}

#[derive(Debug)]
pub struct LogStore {
    path: PathBuf,
    options: StoreOptions,
    inner: Mutex<Inner>,
}

impl LogStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, OpenError> {
        Self::open_with(path, StoreOptions { compact_slack: 4096, ..StoreOptions::default() })
    }

    pub fn open_with(path: impl AsRef<Path>, options: StoreOptions) -> Result<Self, OpenError> {
        let path = path.as_ref().to_path_buf();
        let tmp = tmp_path(&path);
        if tmp.exists() {
            // A compaction that never reached its rename; the log is intact.
            fs::remove_file(&tmp)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let header = format!("{HEADER}\n");
        if bytes.len() < header.len() && header.as_bytes().starts_with(&bytes) {
            file.set_len(0)?;
            file.write_all(header.as_bytes())?;
            file.sync_all()?;
            sync_dir(&path)?;
            bytes = header.clone().into_bytes();
        }
        if !bytes.starts_with(header.as_bytes()) {
            let first = String::from_utf8_lossy(bytes.split(|&b| b == b'\n').next().unwrap_or_default()).into_owned();
            return Err(OpenError::BadHeader(first));
        }

        let mut map = HashMap::new();
        let (mut seq, mut records) = (0, 0);
        let mut offset = header.len();
        let mut line_no = 1;
        while offset < bytes.len() {
            line_no += 1;
            let Some(end) = bytes[offset..].iter().position(|&b| b == b'\n') else {
                break;
            };
            let record = decode(&bytes[offset..offset + end]).map_err(|reason| OpenError::Corrupt { line: line_no, reason })?;
            if record.seq <= seq {
                return Err(OpenError::Corrupt { line: line_no, reason: format!("sequence {} after {seq}", record.seq) });
            }
            seq = record.seq;
            records += 1;
            map.insert(record.cred.cred_id.clone(), record.cred);
            offset += end + 1;
        }
        if offset < bytes.len() {
            file.set_len(offset as u64)?;
            file.sync_all()?;
        }
        let inner = Inner { file, map, seq, records, len: offset as u64, failed: None };
        Ok(LogStore { path, options, inner: Mutex::new(inner) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Records in the log file, including superseded ones.
    pub fn records(&self) -> u64 {
        self.lock().records
    }

    /// Whether an injected fault has fired.
    pub fn fault_fired(&self) -> bool {
        self.options.faults.fired()
    }

    pub fn compact(&self) -> Result<(), StoreError> {
        let mut inner = self.lock();
        Self::usable(&inner)?;
        self.compact_locked(&mut inner).map_err(|e| {
            inner.failed = Some(e.to_string());
            StoreError::Io(e.to_string())
        })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().expect("store lock poisoned")
    }

    fn usable(inner: &Inner) -> Result<(), StoreError> {
        match &inner.failed {
            Some(why) => Err(StoreError::Io(format!("store unusable after earlier failure ({why}); reopen it"))),
            None => Ok(()),
        }
    }

    fn put(&self, inner: &mut Inner, cred: &VerifierCredential) -> Result<(), StoreError> {
        let line = encode(inner.seq + 1, cred);
        if let Err(e) = self.append(inner, &line) {
            inner.failed = Some(e.to_string());
            return Err(StoreError::Io(e.to_string()));
        }
        inner.seq += 1;
        inner.records += 1;
        inner.map.insert(cred.cred_id.clone(), cred.clone());
        let slack = self.options.compact_slack;
        if slack > 0 && inner.records > inner.map.len() as u64 + slack {
            // The record is already durable in the old log or the new one,
            // so a failed compaction does not fail this write.
            if let Err(e) = self.compact_locked(inner) {
                inner.failed = Some(e.to_string());
            }
        }
        Ok(())
    }

    fn append(&self, inner: &mut Inner, line: &[u8]) -> io::Result<()> {
        let faults = &self.options.faults;
        faults.check(FaultPoint::BeforeWrite)?;
        if let Err(e) = faults.check(FaultPoint::TornWrite) {
            inner.file.write_all(&line[..line.len() / 2])?;
            return Err(e);
        }
        inner.file.write_all(line)?;
        if let Err(e) = faults.check(FaultPoint::LostBeforeSync) {
            inner.file.set_len(inner.len)?;
            return Err(e);
        }
        faults.check(FaultPoint::BeforeSync)?;
        inner.file.sync_data()?;
        inner.len += line.len() as u64;
        faults.check(FaultPoint::AfterSync)
    }

    fn compact_locked(&self, inner: &mut Inner) -> io::Result<()> {
        let faults = &self.options.faults;
        let tmp = tmp_path(&self.path);
        let mut out = File::create(&tmp)?;
        let mut buf = format!("{HEADER}\n").into_bytes();
        let mut ids: Vec<&String> = inner.map.keys().collect();
        ids.sort();
        let mut seq = inner.seq;
        for id in ids {
            seq += 1;
            buf.extend_from_slice(&encode(seq, &inner.map[id]));
        }
        out.write_all(&buf)?;
        out.sync_all()?;
        faults.check(FaultPoint::CompactBeforeRename)?;
        fs::rename(&tmp, &self.path)?;
        sync_dir(&self.path)?;
        faults.check(FaultPoint::CompactAfterRename)?;
        inner.file = OpenOptions::new().read(true).append(true).open(&self.path)?;
        inner.seq = seq;
        inner.records = inner.map.len() as u64;
        inner.len = buf.len() as u64;
        Ok(())
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".compact");
    path.with_file_name(name)
}

impl CredentialStore for LogStore {
    fn get(&self, cred_id: &str) -> Result<Option<VerifierCredential>, StoreError> {
        Ok(self.lock().map.get(cred_id).cloned())
    }

    fn insert(&self, cred: &VerifierCredential, replace: bool) -> Result<(), StoreError> {
        let mut inner = self.lock();
        Self::usable(&inner)?;
        if !replace && inner.map.contains_key(&cred.cred_id) {
            return Err(StoreError::Duplicate(cred.cred_id.clone()));
        }
        self.put(&mut inner, cred)
    }

    fn update(&self, cred: &VerifierCredential) -> Result<(), StoreError> {
        let mut inner = self.lock();
        Self::usable(&inner)?;
        if !inner.map.contains_key(&cred.cred_id) {
            return Err(StoreError::Unknown(cred.cred_id.clone()));
        }
        self.put(&mut inner, cred)
    }

    fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = self.lock().map.keys().cloned().collect();
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tkey_core::chain::{ChainValue, Params, Salt, SlotTime};
    use tkey_core::bits::Bits;

    fn cred(id: &str, t_prev: u64) -> VerifierCredential {
        let params = Params::with_chain_length(100);
        let value = Bits::from_hex("00000000000000000000000000000000c0", 130).unwrap();
        VerifierCredential {
            cred_id: id.into(),
            salt: Salt(Bits::from_hex("0123456789abcdef0123", 80).unwrap()),
            params,
            t_init: SlotTime(1000),
            t_max: SlotTime(1100),
            p_prev: ChainValue { value, at: SlotTime(t_prev) },
            t_prev: SlotTime(t_prev),
        }
    }

    #[test]
    fn records_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("creds.log");
        {
            let store = LogStore::open(&path).unwrap();
            store.insert(&cred("a", 1000), false).unwrap();
            store.insert(&cred("b", 1000), false).unwrap();
            store.update(&cred("a", 1005)).unwrap();
            assert_eq!(store.insert(&cred("a", 1000), false), Err(StoreError::Duplicate("a".into())));
            assert_eq!(store.update(&cred("zz", 1000)), Err(StoreError::Unknown("zz".into())));
        }
        let store = LogStore::open(&path).unwrap();
        assert_eq!(store.get("a").unwrap().unwrap().t_prev, SlotTime(1005));
        assert_eq!(store.ids().unwrap(), vec!["a", "b"]);
        assert_eq!(store.records(), 3);
    }

    #[test]
    fn torn_tail_is_dropped_but_damage_elsewhere_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("creds.log");
        {
            let store = LogStore::open(&path).unwrap();
            store.insert(&cred("a", 1000), false).unwrap();
            store.update(&cred("a", 1001)).unwrap();
        }
        let good = fs::read(&path).unwrap();
        let mut torn = good.clone();
        torn.extend_from_slice(b"0123 {\"seq\":3,");
        fs::write(&path, &torn).unwrap();
        let store = LogStore::open(&path).unwrap();
        assert_eq!(store.get("a").unwrap().unwrap().t_prev, SlotTime(1001));
        drop(store);
        assert_eq!(fs::read(&path).unwrap(), good);

        let mut flipped = good.clone();
        let at = good.len() - 10;
        flipped[at] ^= 1;
        fs::write(&path, &flipped).unwrap();
        assert!(matches!(LogStore::open(&path), Err(OpenError::Corrupt { line: 3, .. })));
        fs::write(&path, b"something else\n").unwrap();
        assert!(matches!(LogStore::open(&path), Err(OpenError::BadHeader(_))));
    }

    #[test]
    fn compaction_keeps_latest_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("creds.log");
        let store = LogStore::open_with(&path, StoreOptions { compact_slack: 3, ..Default::default() }).unwrap();
        store.insert(&cred("a", 1000), false).unwrap();
        store.insert(&cred("b", 1000), false).unwrap();
        for t in 1001..1010 {
            store.update(&cred("a", t)).unwrap();
            assert!(store.records() <= 2 + 3 + 1);
        }
        drop(store);
        let store = LogStore::open(&path).unwrap();
        assert_eq!(store.get("a").unwrap().unwrap().t_prev, SlotTime(1009));
        assert!(!tmp_path(&path).exists());
    }

    #[test]
    fn failed_store_refuses_writes_until_reopened() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("creds.log");
        let faults = Faults::at(FaultPoint::TornWrite, 1);
        let store = LogStore::open_with(&path, StoreOptions { compact_slack: 0, faults }).unwrap();
        store.insert(&cred("a", 1000), false).unwrap();
        assert!(store.update(&cred("a", 1001)).is_err());
        assert!(store.fault_fired());
        assert!(store.update(&cred("a", 1002)).is_err());
        drop(store);
        let store = LogStore::open(&path).unwrap();
        assert_eq!(store.get("a").unwrap().unwrap().t_prev, SlotTime(1000));
        store.update(&cred("a", 1002)).unwrap();
    }
}
