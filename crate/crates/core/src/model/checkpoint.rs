//! `GFCK` checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "GFCK" | u32 version | u8 kind (0 fusion, 1 cnn)
//! u32 config length | config JSON
//! u8 task (0 MG, 1 JA) | u32 epoch | u64 seed | u8 has_f1 | f64 val_f1
//! u32 record count
//! per record: u32 name length | name | u32 rank | u64 extents… | f32 payload
//! ```

use std::fs;
use std::path::Path;

use super::{CnnBaseline, FusionModel, ModelSpec, Network, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Task;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Where a set of weights came from.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMeta {
    pub task: Task,
    pub epoch: u32,
    pub seed: u64,
    pub val_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub spec: ModelSpec,
    pub params: ParamSet,
    pub meta: TrainingMeta,
}

impl ModelCheckpoint {
    pub fn from_model<N: Network>(model: &N, meta: TrainingMeta) -> Self {
        Self {
            spec: model.spec(),
            params: model.params().clone(),
            meta,
        }
    }

    /// Rebuilds a fusion model; every weight shape is checked against the config.
    pub fn into_fusion(self) -> Result<FusionModel> {
        let ModelSpec::Fusion(cfg) = self.spec else {
            return Err(Error::ModelKindMismatch {
                expected: "fusion",
                found: self.spec.kind(),
            });
        };
        let mut m = FusionModel::new(cfg, 0)?;
        m.params_mut().load_from(&self.params)?;
        Ok(m)
    }

    pub fn into_cnn(self) -> Result<CnnBaseline> {
        let ModelSpec::Cnn(cfg) = self.spec else {
            return Err(Error::ModelKindMismatch {
                expected: "cnn",
                found: self.spec.kind(),
            });
        };
        let mut m = CnnBaseline::new(cfg, 0)?;
        m.params_mut().load_from(&self.params)?;
        Ok(m)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(kind_byte(&self.spec));
        let cfg = serde_json::to_vec(&self.spec)?;
        put_u32(&mut out, cfg.len())?;
        out.extend_from_slice(&cfg);

        out.push(match self.meta.task {
            Task::MutualGaze => 0,
            Task::JointAttention => 1,
        });
        out.extend_from_slice(&self.meta.epoch.to_le_bytes());
        out.extend_from_slice(&self.meta.seed.to_le_bytes());
        out.push(self.meta.val_f1.is_some() as u8);
        out.extend_from_slice(&self.meta.val_f1.unwrap_or(0.0).to_le_bytes());

        put_u32(&mut out, self.params.len())?;
        for (name, t) in self.params.iter() {
            put_u32(&mut out, name.len())?;
            out.extend_from_slice(name.as_bytes());
            put_u32(&mut out, t.rank())?;
            for &e in t.shape() {
                out.extend_from_slice(&(e as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic, not a GFCK file".into()));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                what: "checkpoint",
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let kind = r.u8("kind")?;
        let len = r.u32("config length")? as usize;
        let spec: ModelSpec = serde_json::from_slice(r.take(len, "config")?)
            .map_err(|e| Error::CorruptCheckpoint(format!("config block: {e}")))?;
        if kind != kind_byte(&spec) {
            return Err(Error::CorruptCheckpoint(format!("kind byte {kind} disagrees with {} config", spec.kind())));
        }
        match &spec {
            ModelSpec::Fusion(c) => c.validate(),
            ModelSpec::Cnn(c) => c.validate(),
        }
        .map_err(|e| Error::CorruptCheckpoint(format!("stored config is invalid: {e}")))?;

        let task = match r.u8("task")? {
            0 => Task::MutualGaze,
            1 => Task::JointAttention,
            t => return Err(Error::CorruptCheckpoint(format!("unknown task byte {t}"))),
        };
        let epoch = r.u32("epoch")?;
        let seed = r.u64("seed")?;
        let has_f1 = r.u8("f1 flag")?;
        let f1 = f64::from_le_bytes(r.take(8, "f1")?.try_into().unwrap());
        let meta = TrainingMeta {
            task,
            epoch,
            seed,
            val_f1: (has_f1 != 0).then_some(f1),
        };

        let count = r.u32("record count")? as usize;
        let mut params = ParamSet::default();
        for i in 0..count {
            let n = r.u32("name length")? as usize;
            let name = std::str::from_utf8(r.take(n, "name")?)
                .map_err(|_| Error::CorruptCheckpoint(format!("record {i}: name is not UTF-8")))?
                .to_string();
            if params.position(&name).is_some() {
                return Err(Error::CorruptCheckpoint(format!("duplicate record {name}")));
            }
            let rank = r.u32("rank")? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.u64("extent")? as usize);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .filter(|&n| n.checked_mul(4).is_some_and(|b| b <= r.remaining()))
                .ok_or_else(|| Error::CorruptCheckpoint(format!("{name}: payload {shape:?} exceeds file")))?;
            let data = r
                .take(numel * 4, "payload")?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::new(shape, data).map_err(|e| Error::CorruptCheckpoint(format!("{name}: {e}")))?;
            params.push(name, t);
        }
        if r.remaining() != 0 {
            return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { spec, params, meta })
    }
}

pub fn save_checkpoint(ckpt: &ModelCheckpoint, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))?;
    }
    fs::write(path, ckpt.to_bytes()?).map_err(Error::io(format!("writing {}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let bytes = fs::read(path).map_err(Error::io(format!("reading {}", path.display())))?;
    ModelCheckpoint::from_bytes(&bytes)
}

fn kind_byte(spec: &ModelSpec) -> u8 {
    match spec {
        ModelSpec::Fusion(_) => 0,
        ModelSpec::Cnn(_) => 1,
    }
}

fn put_u32(out: &mut Vec<u8>, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::Contract(format!("length {n} does not fit in u32")))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::CorruptCheckpoint(format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}
