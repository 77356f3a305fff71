//! `GZFS` feature store: one file per (session, view, frame) at
//! `<root>/<session>/<view>/<timestamp_ms>.gzfs`.
//!
//! File layout, little-endian:
//!
//! ```text
//! "GZFS" | u32 version | u32 session length | session bytes
//! u8 view (0 infant, 1 parent) | i64 timestamp_ms | u32 N | u32 D
//! N·D f32 values, row-major
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::TokenSequence;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::View;

pub const FEATURE_MAGIC: &[u8; 4] = b"GZFS";
pub const FEATURE_VERSION: u32 = 1;
const EXT: &str = "gzfs";

/// Address of one record.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub session: String,
    pub view: View,
    pub timestamp_ms: i64,
}

/// Outcome of [`FeatureStore::verify`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub records: usize,
    /// One line per unreadable file or header/path disagreement.
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct FeatureStore {
    root: PathBuf,
}

pub fn validate_session_id(session: &str) -> Result<()> {
    if session.is_empty() || session == "." || session == ".." || session.contains(['/', '\\', '\0']) {
        return Err(Error::Input(format!("`{session}` is not a valid session id")));
    }
    Ok(())
}

pub fn encode_record(seq: &TokenSequence) -> Result<Vec<u8>> {
    let &[n, d] = seq.tokens.shape() else {
        return Err(Error::Shape(format!("token sequence must be N×D, got {:?}", seq.tokens.shape())));
    };
    let too_big = |what: &str| Error::Input(format!("{what} does not fit the record header"));
    let mut out = Vec::with_capacity(32 + seq.session.len() + 4 * n * d);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&u32::try_from(seq.session.len()).map_err(|_| too_big("session id"))?.to_le_bytes());
    out.extend_from_slice(seq.session.as_bytes());
    out.push(seq.view.byte());
    out.extend_from_slice(&seq.timestamp_ms().to_le_bytes());
    out.extend_from_slice(&u32::try_from(n).map_err(|_| too_big("token count"))?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(d).map_err(|_| too_big("token width"))?.to_le_bytes());
    for v in seq.tokens.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes a record; `context` names the source in errors.
pub fn decode_record(bytes: &[u8], context: &str) -> Result<TokenSequence> {
    let bad = |reason: String| Error::format(context, reason);
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<&[u8]> {
        if bytes.len() - pos < n {
            return Err(bad(format!("truncated while reading {what}")));
        }
        pos += n;
        Ok(&bytes[pos - n..pos])
    };
    if take(4, "magic")? != FEATURE_MAGIC {
        return Err(bad("bad magic, not a GZFS record".into()));
    }
    let version = u32::from_le_bytes(take(4, "version")?.try_into().unwrap());
    if version != FEATURE_VERSION {
        return Err(Error::Version {
            what: "feature record",
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let len = u32::from_le_bytes(take(4, "session length")?.try_into().unwrap()) as usize;
    let session = std::str::from_utf8(take(len, "session")?)
        .map_err(|_| bad("session id is not UTF-8".into()))?
        .to_string();
    let view_byte = take(1, "view")?[0];
    let view = View::from_byte(view_byte).ok_or_else(|| bad(format!("unknown view byte {view_byte}")))?;
    let ts = i64::from_le_bytes(take(8, "timestamp")?.try_into().unwrap());
    let n = u32::from_le_bytes(take(4, "token count")?.try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(take(4, "token width")?.try_into().unwrap()) as usize;
    let payload = n.checked_mul(d).and_then(|x| x.checked_mul(4)).ok_or_else(|| bad("extents overflow".into()))?;
    let raw = take(payload, "payload")?;
    if pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - pos)));
    }
    let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let tokens = Tensor::new([n, d], data).map_err(|e| bad(e.to_string()))?;
    TokenSequence::new(session, view, ts as f64 / 1000.0, tokens).map_err(|e| bad(e.to_string()))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl FeatureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn record_path(&self, session: &str, view: View, timestamp_ms: i64) -> PathBuf {
        self.root.join(session).join(view.name()).join(format!("{timestamp_ms}.{EXT}"))
    }

    /// Writes one record atomically. Returns `true` if it replaced an
    /// existing record (last writer wins).
    pub fn write(&self, seq: &TokenSequence) -> Result<bool> {
        validate_session_id(&seq.session)?;
        let bytes = encode_record(seq)?;
        let path = self.record_path(&seq.session, seq.view, seq.timestamp_ms());
        let dir = path.parent().expect("record paths have a parent");
        fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        let replaced = path.exists();
        let tmp = dir.join(format!(
            ".{}.{}.{}.tmp",
            seq.timestamp_ms(),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, bytes).map_err(Error::io(format!("writing {}", tmp.display())))?;
        fs::rename(&tmp, &path).map_err(Error::io(format!("renaming into {}", path.display())))?;
        if replaced {
            log::warn!("feature record {} was overwritten", path.display());
        }
        Ok(replaced)
    }

    /// Reads the record at `timestamp_s` rounded to whole milliseconds.
    pub fn read(&self, session: &str, view: View, timestamp_s: f64) -> Result<TokenSequence> {
        self.read_ms(session, view, (timestamp_s * 1000.0).round() as i64)
    }

    pub fn read_ms(&self, session: &str, view: View, timestamp_ms: i64) -> Result<TokenSequence> {
        validate_session_id(session)?;
        let path = self.record_path(session, view, timestamp_ms);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::Lookup(format!("no features for session {session}, {view} view, {timestamp_ms} ms")));
            }
            Err(e) => return Err(Error::io(format!("reading {}", path.display()))(e)),
        };
        let seq = decode_record(&bytes, &path.display().to_string())?;
        check_key(&seq, session, view, timestamp_ms, &path)?;
        Ok(seq)
    }

    /// Every record key, sorted by session, view, then time.
    pub fn list(&self) -> Result<Vec<RecordKey>> {
        let mut keys = Vec::new();
        for (key, _) in self.files()? {
            keys.push(key);
        }
        keys.sort();
        Ok(keys)
    }

    /// Decodes every file and checks its header against its path.
    pub fn verify(&self) -> Result<VerifyReport> {
        let mut report = VerifyReport::default();
        for (key, path) in self.files()? {
            report.records += 1;
            let outcome = fs::read(&path)
                .map_err(Error::io(format!("reading {}", path.display())))
                .and_then(|b| decode_record(&b, &path.display().to_string()))
                .and_then(|seq| check_key(&seq, &key.session, key.view, key.timestamp_ms, &path));
            if let Err(e) = outcome {
                report.problems.push(e.to_string());
            }
        }
        report.problems.sort();
        Ok(report)
    }

    fn files(&self) -> Result<Vec<(RecordKey, PathBuf)>> {
        let mut out = Vec::new();
        if !self.root.exists() {
            return Ok(out);
        }
        let read_dir = |p: &Path| fs::read_dir(p).map_err(Error::io(format!("listing {}", p.display())));
        for session in read_dir(&self.root)? {
            let session = session.map_err(Error::io("listing feature store"))?;
            if !session.path().is_dir() {
                continue;
            }
            let name = session.file_name().to_string_lossy().into_owned();
            for view in View::BOTH {
                let dir = session.path().join(view.name());
                if !dir.is_dir() {
                    continue;
                }
                for f in read_dir(&dir)? {
                    let path = f.map_err(Error::io("listing feature store"))?.path();
                    if path.extension().and_then(|e| e.to_str()) != Some(EXT) {
                        continue;
                    }
                    let Some(ts) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<i64>().ok()) else {
                        continue;
                    };
                    out.push((
                        RecordKey {
                            session: name.clone(),
                            view,
                            timestamp_ms: ts,
                        },
                        path,
                    ));
                }
            }
        }
        Ok(out)
    }
}

fn check_key(seq: &TokenSequence, session: &str, view: View, timestamp_ms: i64, path: &Path) -> Result<()> {
    if seq.session != session || seq.view != view || seq.timestamp_ms() != timestamp_ms {
        return Err(Error::format(
            path.display().to_string(),
            format!(
                "header says {}/{}/{} ms but the file is stored as {session}/{view}/{timestamp_ms} ms",
                seq.session,
                seq.view,
                seq.timestamp_ms()
            ),
        ));
    }
    Ok(())
}
