use std::io::{Cursor, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use skid_autograd::{AutogradError, ParamStore};

use super::config::{DownstreamConfig, SkidConfig};
use super::heads::{DownstreamModel, PretextModel};
use crate::error::{Result, SkidError};
use crate::io_util::write_atomic;
use crate::plane::Plane;
use crate::rng::seeded;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SKIDCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Pretext,
    Geo,
    Downstream,
}

/// Echo of everything needed to rebuild the model that owns the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub encoder: SkidConfig,
    #[serde(default)]
    pub downstream: Option<DownstreamConfig>,
    #[serde(default)]
    pub plane: Option<Plane>,
    #[serde(default)]
    pub arrangement_seed: Option<u64>,
    #[serde(default)]
    pub note: Option<String>,
}

impl CheckpointMeta {
    pub fn new(kind: ModelKind, encoder: SkidConfig) -> Self {
        CheckpointMeta {
            kind,
            encoder,
            downstream: None,
            plane: None,
            arrangement_seed: None,
            note: None,
        }
    }
}

/// `SKIDCKPT`, u32 version, u64 JSON length, JSON metadata, parameter archive.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta, params: ParamStore) -> Self {
        Checkpoint { meta, params }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let json = serde_json::to_vec(&self.meta)?;
        let mut out = Vec::with_capacity(64 + json.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        self.params.write_to(&mut out)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fmt = |offset: usize, msg: &str| SkidError::Format {
            offset: offset as u64,
            msg: msg.to_string(),
        };
        if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(fmt(0, "bad checkpoint magic"));
        }
        if bytes.len() < 20 {
            return Err(fmt(bytes.len(), "truncated checkpoint header"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(fmt(8, &format!("unsupported checkpoint version {version}")));
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = 20usize;
        if bytes.len() - body < len {
            return Err(fmt(bytes.len(), "truncated checkpoint metadata"));
        }
        let meta: CheckpointMeta = serde_json::from_slice(&bytes[body..body + len])
            .map_err(|e| fmt(body, &format!("metadata: {e}")))?;
        let start = body + len;
        let mut cur = Cursor::new(&bytes[start..]);
        let params = ParamStore::read_from(&mut cur).map_err(|e| match e {
            AutogradError::Format { offset, msg } => fmt(start + offset as usize, &msg),
            other => other.into(),
        })?;
        if (cur.position() as usize) != bytes.len() - start {
            return Err(fmt(start + cur.position() as usize, "trailing bytes after parameters"));
        }
        Ok(Checkpoint { meta, params })
    }

    /// Written to a temp file and renamed into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

impl Checkpoint {
    /// Rebuilds a pretext or geometric model from the metadata and loads the
    /// stored parameters into it.
    pub fn pretext_model(&self) -> Result<(PretextModel, ParamStore)> {
        if self.meta.kind == ModelKind::Downstream {
            return Err(SkidError::InvalidArgument("checkpoint holds a downstream model".into()));
        }
        let mut store = ParamStore::new();
        let model = PretextModel::build(&self.meta.encoder, &mut store, &mut seeded(0))?;
        restore_params(&mut store, &self.params)?;
        Ok((model, store))
    }

    /// Rebuilds a downstream model (encoder plus temporal head).
    pub fn downstream_model(&self) -> Result<(DownstreamModel, ParamStore)> {
        let dcfg = match (&self.meta.kind, &self.meta.downstream) {
            (ModelKind::Downstream, Some(d)) => d,
            _ => return Err(SkidError::InvalidArgument("checkpoint does not hold a downstream model".into())),
        };
        let mut store = ParamStore::new();
        let model = DownstreamModel::build(&self.meta.encoder, dcfg, &mut store, &mut seeded(0))?;
        restore_params(&mut store, &self.params)?;
        Ok((model, store))
    }
}

/// Copies every parameter of `src` whose name starts with `prefix` into the
/// parameter of the same name in `dst`. Returns how many were copied.
pub fn copy_params(dst: &mut ParamStore, src: &ParamStore, prefix: &str) -> Result<usize> {
    let mut copied = 0;
    for (_, p) in src.iter().filter(|(_, p)| p.name.starts_with(prefix)) {
        let id = dst
            .find(&p.name)
            .ok_or_else(|| SkidError::Mismatch(format!("parameter {} missing from target model", p.name)))?;
        if dst.param(id).shape() != p.shape() {
            return Err(SkidError::Mismatch(format!(
                "parameter {}: shape {:?} vs {:?}",
                p.name,
                p.shape(),
                dst.param(id).shape()
            )));
        }
        dst.set_value(id, p.value().clone())?;
        copied += 1;
    }
    Ok(copied)
}

/// Copies all parameters and frozen flags; both stores must hold exactly the
/// same names and shapes.
pub fn restore_params(dst: &mut ParamStore, src: &ParamStore) -> Result<()> {
    if dst.len() != src.len() {
        return Err(SkidError::Mismatch(format!(
            "checkpoint has {} parameters, model has {}",
            src.len(),
            dst.len()
        )));
    }
    copy_params(dst, src, "")?;
    for (_, p) in src.iter() {
        let id = dst.find(&p.name).expect("checked by copy_params");
        dst.set_frozen(id, p.frozen);
    }
    Ok(())
}
