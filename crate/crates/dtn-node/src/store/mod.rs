//! File-backed bundle store with a central metadata index.
//!
//! Layout: one file per bundle under `bundles/`, named by a hash of the
//! rendered bundle id, plus an append-only index log (`index.log`) that is
//! compacted on open. Bundle files are written to a temp name, fsynced, and
//! renamed before the index entry is appended, so a crash at any point leaves
//! either an unindexed orphan (reaped on open and by `fsck`) or a fully
//! intact indexed bundle — never a torn read behind a live index entry.
//!
//! Expired or drained bundles leave a tombstone behind for the duplicate-
//! suppression horizon, so re-pushing a known id stays idempotent across
//! restarts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::os::fd::AsRawFd;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use bp7::{Bundle, BundleId};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const INDEX_MAGIC: &str = "dtn-store-index";
const INDEX_VERSION: u32 = 1;
const BUNDLE_SUBDIR: &str = "bundles";

/// Cap on how long a tombstone outlives its bundle.
pub const TOMBSTONE_CAP_MICROS: u64 = 24 * 3600 * 1_000_000;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store: io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("store: directory {0} is locked by another instance")]
    Locked(PathBuf),
    #[error("store: index log corrupt: {0}")]
    IndexCorrupt(String),
    #[error("store: bundle {key} is indexed but its file is missing or unreadable; descriptor quarantined")]
    Corrupt { key: String },
    #[error("store: bundle not found")]
    NotFound,
    #[error("store: encode failed: {0}")]
    Encode(#[from] bp7::EncodeError),
}

type Result<T> = std::result::Result<T, StoreError>;

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io { path: path.to_path_buf(), source }
}

/// Retention constraints a stored bundle can hold.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    DispatchPending,
    ForwardPending,
    LocalDelivery,
    Deleted,
}

/// Index entry: everything the node knows about a stored bundle without
/// touching its file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BundleDescriptor {
    /// Rendered bundle id; the index key.
    pub key: String,
    /// Rendered destination EID.
    pub destination: String,
    /// Rendered source EID.
    pub source: String,
    /// Absolute expiry instant, Unix microseconds. Fixed at insertion.
    pub expiry_unix_micros: u64,
    /// When this node took custody, Unix microseconds.
    pub receipt_unix_micros: u64,
    pub lifetime_micros: u64,
    pub constraints: BTreeSet<Constraint>,
    /// Peers this bundle was received from or sent to. Grows monotonically.
    pub sent_to: BTreeSet<String>,
    /// File name under `bundles/`.
    pub file: String,
    /// Insertion sequence for stable ordering.
    pub inserted: u64,
}

impl BundleDescriptor {
    pub fn is_expired(&self, now_unix_micros: u64) -> bool {
        now_unix_micros >= self.expiry_unix_micros
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum LogEntry {
    Insert { desc: BundleDescriptor },
    Update { key: String, constraints: BTreeSet<Constraint>, sent_to: BTreeSet<String> },
    Tombstone { key: String, until_unix_micros: u64 },
    Quarantine { key: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexHeader {
    magic: String,
    version: u32,
}

/// Why gc removed a bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcCause {
    Expired,
    Drained,
}

/// Result of a store integrity walk.
#[derive(Debug, Default)]
pub struct FsckReport {
    pub checked: u64,
    pub orphans_reaped: u64,
    pub corrupt: Vec<String>,
}

impl FsckReport {
    pub fn passed(&self) -> bool {
        self.corrupt.is_empty()
    }
}

struct StoreInner {
    index: BTreeMap<String, BundleDescriptor>,
    tombstones: BTreeMap<String, u64>,
    quarantined: BTreeSet<String>,
    log: BufWriter<File>,
    insert_seq: u64,
}

/// The bundle store. One instance owns its directory exclusively via a lock
/// file; push/query/pending/gc are linearizable with respect to each other.
pub struct BundleStore {
    dir: PathBuf,
    _lock: File,
    inner: Mutex<StoreInner>,
}

impl BundleStore {
    /// Open (or create) a store directory, compacting the index log.
    pub fn open(dir: &Path) -> Result<BundleStore> {
        fs::create_dir_all(dir.join(BUNDLE_SUBDIR)).map_err(|e| io_err(dir, e))?;
        let lock_path = dir.join("lock");
        let lock = OpenOptions::new()
            .create(true)
            .write(true)
            .open(&lock_path)
            .map_err(|e| io_err(&lock_path, e))?;
        // released automatically when the process dies, so stale locks from
        // crashed daemons never wedge a restart
        let rc = unsafe { libc::flock(lock.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) };
        if rc != 0 {
            return Err(StoreError::Locked(dir.to_path_buf()));
        }

        let (index, tombstones, quarantined) = Self::load_index(dir)?;
        let insert_seq = index.values().map(|d| d.inserted + 1).max().unwrap_or(0);
        Self::compact(dir, &index, &tombstones, &quarantined)?;
        let log_path = dir.join("index.log");
        let log_file = OpenOptions::new()
            .append(true)
            .open(&log_path)
            .map_err(|e| io_err(&log_path, e))?;
        let store = BundleStore {
            dir: dir.to_path_buf(),
            _lock: lock,
            inner: Mutex::new(StoreInner {
                index,
                tombstones,
                quarantined,
                log: BufWriter::new(log_file),
                insert_seq,
            }),
        };
        store.reap_orphans_and_temps()?;
        Ok(store)
    }

    fn load_index(
        dir: &Path,
    ) -> Result<(BTreeMap<String, BundleDescriptor>, BTreeMap<String, u64>, BTreeSet<String>)>
    {
        let log_path = dir.join("index.log");
        let mut index = BTreeMap::new();
        let mut tombstones = BTreeMap::new();
        let mut quarantined = BTreeSet::new();
        if !log_path.exists() {
            return Ok((index, tombstones, quarantined));
        }
        let file = File::open(&log_path).map_err(|e| io_err(&log_path, e))?;
        let mut lines = BufReader::new(file).lines();
        match lines.next() {
            None => return Ok((index, tombstones, quarantined)),
            Some(line) => {
                let line = line.map_err(|e| io_err(&log_path, e))?;
                let header: IndexHeader = serde_json::from_str(&line)
                    .map_err(|e| StoreError::IndexCorrupt(format!("bad header: {e}")))?;
                if header.magic != INDEX_MAGIC || header.version != INDEX_VERSION {
                    return Err(StoreError::IndexCorrupt(format!(
                        "unsupported index {}/{}",
                        header.magic, header.version
                    )));
                }
            }
        }
        for line in lines {
            let line = line.map_err(|e| io_err(&log_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            // a torn final line from a crash mid-append is dropped
            let Ok(entry) = serde_json::from_str::<LogEntry>(&line) else { break };
            match entry {
                LogEntry::Insert { desc } => {
                    index.insert(desc.key.clone(), desc);
                }
                LogEntry::Update { key, constraints, sent_to } => {
                    if let Some(desc) = index.get_mut(&key) {
                        desc.constraints = constraints;
                        desc.sent_to = sent_to;
                    }
                }
                LogEntry::Tombstone { key, until_unix_micros } => {
                    index.remove(&key);
                    tombstones.insert(key, until_unix_micros);
                }
                LogEntry::Quarantine { key } => {
                    index.remove(&key);
                    quarantined.insert(key);
                }
            }
        }
        Ok((index, tombstones, quarantined))
    }

    /// Rewrite the log as header + one insert per live descriptor + live
    /// tombstones, atomically.
    fn compact(
        dir: &Path,
        index: &BTreeMap<String, BundleDescriptor>,
        tombstones: &BTreeMap<String, u64>,
        quarantined: &BTreeSet<String>,
    ) -> Result<()> {
        let tmp_path = dir.join("index.log.tmp");
        let log_path = dir.join("index.log");
        {
            let file = File::create(&tmp_path).map_err(|e| io_err(&tmp_path, e))?;
            let mut w = BufWriter::new(file);
            let header =
                IndexHeader { magic: INDEX_MAGIC.into(), version: INDEX_VERSION };
            serde_json::to_writer(&mut w, &header).map_err(write_err(&tmp_path))?;
            w.write_all(b"\n").map_err(|e| io_err(&tmp_path, e))?;
            for desc in index.values() {
                serde_json::to_writer(&mut w, &LogEntry::Insert { desc: desc.clone() })
                    .map_err(write_err(&tmp_path))?;
                w.write_all(b"\n").map_err(|e| io_err(&tmp_path, e))?;
            }
            for (key, until) in tombstones {
                let entry =
                    LogEntry::Tombstone { key: key.clone(), until_unix_micros: *until };
                serde_json::to_writer(&mut w, &entry).map_err(write_err(&tmp_path))?;
                w.write_all(b"\n").map_err(|e| io_err(&tmp_path, e))?;
            }
            for key in quarantined {
                serde_json::to_writer(&mut w, &LogEntry::Quarantine { key: key.clone() })
                    .map_err(write_err(&tmp_path))?;
                w.write_all(b"\n").map_err(|e| io_err(&tmp_path, e))?;
            }
            w.flush().map_err(|e| io_err(&tmp_path, e))?;
            w.get_ref().sync_all().map_err(|e| io_err(&tmp_path, e))?;
        }
        fs::rename(&tmp_path, &log_path).map_err(|e| io_err(&log_path, e))?;
        sync_dir(dir)?;
        Ok(())
    }

    /// Delete temp files and bundle files nobody references.
    fn reap_orphans_and_temps(&self) -> Result<u64> {
        let inner = self.inner.lock().unwrap();
        let referenced: BTreeSet<&str> =
            inner.index.values().map(|d| d.file.as_str()).collect();
        let dir = self.dir.join(BUNDLE_SUBDIR);
        let mut reaped = 0;
        for entry in fs::read_dir(&dir).map_err(|e| io_err(&dir, e))? {
            let entry = entry.map_err(|e| io_err(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !referenced.contains(name.as_str()) {
                let _ = fs::remove_file(entry.path());
                reaped += 1;
            }
        }
        Ok(reaped)
    }

    fn append(inner: &mut StoreInner, dir: &Path, entry: &LogEntry, durable: bool) -> Result<()> {
        let log_path = dir.join("index.log");
        serde_json::to_writer(&mut inner.log, entry).map_err(write_err(&log_path))?;
        inner.log.write_all(b"\n").map_err(|e| io_err(&log_path, e))?;
        inner.log.flush().map_err(|e| io_err(&log_path, e))?;
        if durable {
            inner.log.get_ref().sync_all().map_err(|e| io_err(&log_path, e))?;
        }
        Ok(())
    }

    fn file_name_for(key: &str) -> String {
        let digest = Sha256::digest(key.as_bytes());
        format!("{}.bundle", hex::encode(&digest[..16]))
    }

    /// Persist a bundle. Returns the descriptor and whether the id was
    /// already known (live or tombstoned); pushing a known id changes
    /// nothing.
    pub fn push(
        &self,
        bundle: &Bundle,
        receipt_unix_micros: u64,
    ) -> Result<(BundleDescriptor, bool)> {
        let id = bundle.id();
        let key = id.to_string();
        let mut inner = self.inner.lock().unwrap();
        if let Some(desc) = inner.index.get(&key) {
            return Ok((desc.clone(), true));
        }
        if inner.tombstones.contains_key(&key) {
            // recently deleted: suppress reinfection, hand back a dead descriptor
            let desc = BundleDescriptor {
                key: key.clone(),
                destination: bundle.primary.destination().to_string(),
                source: bundle.primary.source().to_string(),
                expiry_unix_micros: 0,
                receipt_unix_micros,
                lifetime_micros: bundle.primary.lifetime_micros(),
                constraints: BTreeSet::from([Constraint::Deleted]),
                sent_to: BTreeSet::new(),
                file: String::new(),
                inserted: 0,
            };
            return Ok((desc, true));
        }

        let bytes = bundle.encode()?;
        let file_name = Self::file_name_for(&key);
        let final_path = self.dir.join(BUNDLE_SUBDIR).join(&file_name);
        let tmp_path = final_path.with_extension("tmp");
        {
            let mut f = File::create(&tmp_path).map_err(|e| io_err(&tmp_path, e))?;
            f.write_all(&bytes).map_err(|e| io_err(&tmp_path, e))?;
            f.sync_all().map_err(|e| io_err(&tmp_path, e))?;
        }
        fs::rename(&tmp_path, &final_path).map_err(|e| io_err(&final_path, e))?;
        sync_dir(&self.dir.join(BUNDLE_SUBDIR))?;

        let desc = BundleDescriptor {
            key: key.clone(),
            destination: bundle.primary.destination().to_string(),
            source: bundle.primary.source().to_string(),
            expiry_unix_micros: bundle.expiry_unix_micros(receipt_unix_micros),
            receipt_unix_micros,
            lifetime_micros: bundle.primary.lifetime_micros(),
            constraints: BTreeSet::from([Constraint::DispatchPending]),
            sent_to: BTreeSet::new(),
            file: file_name,
            inserted: inner.insert_seq,
        };
        inner.insert_seq += 1;
        Self::append(&mut inner, &self.dir, &LogEntry::Insert { desc: desc.clone() }, true)?;
        inner.index.insert(key, desc.clone());
        Ok((desc, false))
    }

    /// Load a bundle and its live metadata.
    pub fn query(&self, key: &str) -> Result<(Bundle, BundleDescriptor)> {
        let (path, desc) = {
            let inner = self.inner.lock().unwrap();
            let desc = inner.index.get(key).ok_or(StoreError::NotFound)?.clone();
            (self.dir.join(BUNDLE_SUBDIR).join(&desc.file), desc)
        };
        match fs::read(&path).ok().and_then(|bytes| Bundle::decode(&bytes).ok()) {
            Some(bundle) if bundle.id().to_string() == key => Ok((bundle, desc)),
            _ => {
                // never silently return a torn or mismatched file
                self.quarantine(key)?;
                Err(StoreError::Corrupt { key: key.into() })
            }
        }
    }

    fn quarantine(&self, key: &str) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        if inner.index.remove(key).is_some() {
            inner.quarantined.insert(key.to_string());
            Self::append(
                &mut inner,
                &self.dir,
                &LogEntry::Quarantine { key: key.into() },
                true,
            )?;
        }
        Ok(())
    }

    pub fn descriptor(&self, key: &str) -> Option<BundleDescriptor> {
        self.inner.lock().unwrap().index.get(key).cloned()
    }

    /// Is this id live or tombstoned?
    pub fn is_known(&self, key: &str) -> bool {
        let inner = self.inner.lock().unwrap();
        inner.index.contains_key(key) || inner.tombstones.contains_key(key)
    }

    /// Descriptors whose constraints intersect `filter`, in insertion order.
    pub fn pending(&self, filter: &[Constraint]) -> Vec<BundleDescriptor> {
        let inner = self.inner.lock().unwrap();
        let mut out: Vec<BundleDescriptor> = inner
            .index
            .values()
            .filter(|d| filter.iter().any(|c| d.constraints.contains(c)))
            .cloned()
            .collect();
        out.sort_by_key(|d| d.inserted);
        out
    }

    pub fn add_constraint(&self, key: &str, constraint: Constraint) -> Result<()> {
        self.update(key, |desc| {
            desc.constraints.insert(constraint);
        })
    }

    pub fn remove_constraint(&self, key: &str, constraint: Constraint) -> Result<()> {
        self.update(key, |desc| {
            desc.constraints.remove(&constraint);
        })
    }

    /// Record that `peer` already holds this bundle. Returns false if it was
    /// already recorded (or the bundle is unknown).
    pub fn add_sent_to(&self, key: &str, peer: &str) -> bool {
        let mut added = false;
        let _ = self.update(key, |desc| {
            added = desc.sent_to.insert(peer.to_string());
        });
        added
    }

    pub fn sent_to(&self, key: &str) -> Option<BTreeSet<String>> {
        self.inner.lock().unwrap().index.get(key).map(|d| d.sent_to.clone())
    }

    fn update(&self, key: &str, f: impl FnOnce(&mut BundleDescriptor)) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let Some(desc) = inner.index.get_mut(key) else {
            return Err(StoreError::NotFound);
        };
        // DELETED is terminal
        if desc.constraints.contains(&Constraint::Deleted) {
            return Ok(());
        }
        f(desc);
        let entry = LogEntry::Update {
            key: key.into(),
            constraints: desc.constraints.clone(),
            sent_to: desc.sent_to.clone(),
        };
        Self::append(&mut inner, &self.dir, &entry, false)
    }

    /// Physically delete a bundle now, leaving a tombstone. Used for
    /// hop-limit and expiry deletions.
    pub fn delete(&self, key: &str, now_unix_micros: u64) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        let Some(desc) = inner.index.remove(key) else {
            return Err(StoreError::NotFound);
        };
        let _ = fs::remove_file(self.dir.join(BUNDLE_SUBDIR).join(&desc.file));
        let horizon = tombstone_horizon(now_unix_micros, desc.lifetime_micros);
        inner.tombstones.insert(key.into(), horizon);
        Self::append(
            &mut inner,
            &self.dir,
            &LogEntry::Tombstone { key: key.into(), until_unix_micros: horizon },
            true,
        )
    }

    /// Keys of live bundles whose expiry instant has passed.
    pub fn expired_keys(&self, now_unix_micros: u64) -> Vec<String> {
        let inner = self.inner.lock().unwrap();
        inner
            .index
            .values()
            .filter(|d| d.is_expired(now_unix_micros))
            .map(|d| d.key.clone())
            .collect()
    }

    /// Remove expired bundles and descriptors whose constraints drained
    /// empty; purge tombstones past their horizon. Failures are reported per
    /// bundle, the sweep continues.
    pub fn gc(&self, now_unix_micros: u64) -> Vec<(BundleId, GcCause)> {
        let mut removed = Vec::new();
        let victims: Vec<(String, GcCause)> = {
            let inner = self.inner.lock().unwrap();
            inner
                .index
                .values()
                .filter_map(|d| {
                    if d.is_expired(now_unix_micros) {
                        Some((d.key.clone(), GcCause::Expired))
                    } else if d.constraints.is_empty() {
                        Some((d.key.clone(), GcCause::Drained))
                    } else {
                        None
                    }
                })
                .collect()
        };
        for (key, cause) in victims {
            let id = self
                .descriptor(&key)
                .and_then(|d| parse_key_id(&d))
                .unwrap_or_else(|| BundleId::new(bp7::EndpointId::Null, Default::default()));
            match self.delete(&key, now_unix_micros) {
                Ok(()) => removed.push((id, cause)),
                Err(e) => log::warn!("store: gc of {key} failed: {e}"),
            }
        }
        let mut inner = self.inner.lock().unwrap();
        inner.tombstones.retain(|_, until| *until > now_unix_micros);
        removed
    }

    /// Walk the whole store: every indexed bundle must decode to its id;
    /// unreferenced files are reaped.
    pub fn fsck(&self) -> Result<FsckReport> {
        let keys: Vec<String> = {
            let inner = self.inner.lock().unwrap();
            inner.index.keys().cloned().collect()
        };
        let mut report = FsckReport::default();
        for key in keys {
            report.checked += 1;
            if let Err(StoreError::Corrupt { key }) = self.query(&key) {
                report.corrupt.push(key);
            }
        }
        report.orphans_reaped = self.reap_orphans_and_temps()?;
        Ok(report)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

fn tombstone_horizon(now_unix_micros: u64, lifetime_micros: u64) -> u64 {
    now_unix_micros + lifetime_micros.saturating_mul(2).min(TOMBSTONE_CAP_MICROS)
}

fn parse_key_id(desc: &BundleDescriptor) -> Option<BundleId> {
    // key format: <source>-<dtn_time>-<sequence>[-<offset>]
    let source: bp7::EndpointId = desc.source.parse().ok()?;
    let rest = desc.key.strip_prefix(&format!("{}-", desc.source))?;
    let mut parts = rest.split('-');
    let dtn_time = parts.next()?.parse().ok()?;
    let sequence = parts.next()?.parse().ok()?;
    let fragment_offset = parts.next().and_then(|p| p.parse().ok());
    Some(BundleId {
        source,
        creation: bp7::CreationTimestamp::new(dtn_time, sequence),
        fragment_offset,
    })
}

fn sync_dir(dir: &Path) -> Result<()> {
    let f = File::open(dir).map_err(|e| io_err(dir, e))?;
    f.sync_all().map_err(|e| io_err(dir, e))?;
    Ok(())
}

fn write_err(path: &Path) -> impl Fn(serde_json::Error) -> StoreError + '_ {
    move |e| StoreError::Io { path: path.to_path_buf(), source: e.into() }
}

#[cfg(test)]
mod tests;
