//! Versioned checkpoint files: a safetensors container holding the flat policy
//! parameters and normalizer statistics as little-endian f64 tensors, with the
//! trainer config, curriculum state and a payload digest in its metadata.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use safetensors::tensor::{Dtype, SafeTensors, TensorView};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::normalizer::RunningNorm;
use super::policy::{ActorCritic, PolicyLayout};
use super::TrainerConfig;
use crate::curriculum::CurriculumState;
use crate::env::EnvDims;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "strider-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

/// Architecture needed to rebuild the parameter layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub obs_dim: usize,
    pub privileged_dim: usize,
    pub action_dim: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl PolicyShape {
    pub fn layout(&self) -> PolicyLayout {
        PolicyLayout::new(self.obs_dim, self.privileged_dim, self.action_dim, &self.actor_hidden, &self.critic_hidden)
    }

    pub fn dims(&self) -> EnvDims {
        EnvDims { observation: self.obs_dim, privileged: self.privileged_dim, action: self.action_dim }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub shape: PolicyShape,
    pub policy: ActorCritic,
    pub obs_norm: Option<RunningNorm>,
    pub priv_norm: Option<RunningNorm>,
    pub curriculum: CurriculumState,
    pub config: TrainerConfig,
    pub iteration: u64,
    pub env_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NormMeta {
    count: f64,
    clip: f64,
}

impl Checkpoint {
    /// Errors unless the checkpoint was trained on an environment with `dims`.
    pub fn check_dims(&self, dims: &EnvDims) -> Result<()> {
        let have = self.shape.dims();
        for (what, expected, actual) in [
            ("observation", dims.observation, have.observation),
            ("privileged observation", dims.privileged, have.privileged),
            ("action", dims.action, have.action),
        ] {
            if expected != actual {
                return Err(Error::ShapeMismatch { what: format!("checkpoint {what} dimension"), expected, actual });
            }
        }
        Ok(())
    }
}

fn f64_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn bytes_f64(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
}

fn ck_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| ck_err(e.to_string()))
}

fn tensors(ck: &Checkpoint) -> Vec<(String, Vec<u8>, usize)> {
    let mut out = vec![("policy".to_string(), f64_bytes(&ck.policy.params), ck.policy.params.len())];
    for (prefix, norm) in [("obs_norm", &ck.obs_norm), ("priv_norm", &ck.priv_norm)] {
        if let Some(n) = norm {
            out.push((format!("{prefix}.mean"), f64_bytes(&n.mean), n.mean.len()));
            out.push((format!("{prefix}.var"), f64_bytes(&n.var), n.var.len()));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn digest<'a>(parts: impl Iterator<Item = (&'a str, &'a [u8])>) -> String {
    let mut h = Sha256::new();
    for (name, bytes) in parts {
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}

pub fn to_bytes(ck: &Checkpoint) -> Result<Vec<u8>> {
    let owned = tensors(ck);
    let sha = digest(owned.iter().map(|(n, b, _)| (n.as_str(), b.as_slice())));
    let mut meta = HashMap::new();
    meta.insert("format".to_string(), FORMAT_NAME.to_string());
    meta.insert("format_version".to_string(), FORMAT_VERSION.to_string());
    meta.insert("shape".to_string(), json(&ck.shape)?);
    meta.insert("config".to_string(), json(&ck.config)?);
    meta.insert("curriculum".to_string(), json(&ck.curriculum)?);
    meta.insert("iteration".to_string(), ck.iteration.to_string());
    meta.insert("env_steps".to_string(), ck.env_steps.to_string());
    meta.insert("sha256".to_string(), sha);
    for (prefix, norm) in [("obs_norm", &ck.obs_norm), ("priv_norm", &ck.priv_norm)] {
        if let Some(n) = norm {
            meta.insert(prefix.to_string(), json(&NormMeta { count: n.count, clip: n.clip })?);
        }
    }
    let views: Vec<(String, TensorView<'_>)> = owned
        .iter()
        .map(|(name, bytes, len)| {
            TensorView::new(Dtype::F64, vec![*len], bytes)
                .map(|v| (name.clone(), v))
                .map_err(|e| ck_err(format!("tensor `{name}`: {e}")))
        })
        .collect::<Result<_>>()?;
    let bytes = safetensors::serialize(views, &Some(meta)).map_err(|e| ck_err(e.to_string()))?;
    canonical_header(&bytes)
}

/// Rewrites the JSON header with sorted keys. The container library emits the
/// metadata map in hash order, which would make identical checkpoints differ
/// byte for byte.
fn canonical_header(bytes: &[u8]) -> Result<Vec<u8>> {
    let bad = || ck_err("malformed container header");
    let n = u64::from_le_bytes(bytes.get(..8).ok_or_else(bad)?.try_into().map_err(|_| bad())?) as usize;
    let header = bytes.get(8..8 + n).ok_or_else(bad)?;
    let mut parsed: BTreeMap<String, serde_json::Value> = serde_json::from_slice(header).map_err(|_| bad())?;
    if let Some(meta) = parsed.remove("__metadata__") {
        let sorted: BTreeMap<String, String> = serde_json::from_value(meta).map_err(|_| bad())?;
        parsed.insert("__metadata__".into(), serde_json::to_value(sorted).map_err(|_| bad())?);
    }
    let mut text = String::from("{");
    for (i, (k, v)) in parsed.iter().enumerate() {
        if i > 0 {
            text.push(',');
        }
        text.push_str(&json(k)?);
        text.push(':');
        text.push_str(&json(v)?);
    }
    text.push('}');
    while text.len() % 8 != 0 {
        text.push(' ');
    }
    let mut out = Vec::with_capacity(8 + text.len() + bytes.len() - 8 - n);
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&bytes[8 + n..]);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let (_, header) = SafeTensors::read_metadata(bytes).map_err(|e| ck_err(format!("unreadable container: {e}")))?;
    let st = SafeTensors::deserialize(bytes).map_err(|e| ck_err(format!("unreadable container: {e}")))?;
    let meta = header.metadata().as_ref().ok_or_else(|| ck_err("missing metadata"))?;
    let get = |k: &str| meta.get(k).ok_or_else(|| ck_err(format!("missing metadata key `{k}`")));
    if get("format")? != FORMAT_NAME {
        return Err(ck_err("not a strider checkpoint"));
    }
    let version: u32 = get("format_version")?.parse().map_err(|_| ck_err("bad format_version"))?;
    if version != FORMAT_VERSION {
        return Err(ck_err(format!("format version {version} is not supported (expected {FORMAT_VERSION})")));
    }
    fn parse<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<T> {
        serde_json::from_str(s).map_err(|e| ck_err(format!("metadata `{what}`: {e}")))
    }

    let mut names: Vec<String> = st.names().into_iter().cloned().collect();
    names.sort();
    let mut data: HashMap<String, Vec<u8>> = HashMap::new();
    for name in &names {
        let t = st.tensor(name).map_err(|e| ck_err(e.to_string()))?;
        if t.dtype() != Dtype::F64 || t.shape().len() != 1 {
            return Err(ck_err(format!("tensor `{name}` must be a 1-D f64 tensor")));
        }
        data.insert(name.clone(), t.data().to_vec());
    }
    let sha = digest(names.iter().map(|n| (n.as_str(), data[n].as_slice())));
    if &sha != get("sha256")? {
        return Err(ck_err("payload digest mismatch"));
    }

    let shape: PolicyShape = parse(get("shape")?, "shape")?;
    let layout = shape.layout();
    let params = bytes_f64(data.get("policy").ok_or_else(|| ck_err("missing tensor `policy`"))?);
    if params.len() != layout.num_params() {
        return Err(Error::ShapeMismatch {
            what: "checkpoint policy parameters".into(),
            expected: layout.num_params(),
            actual: params.len(),
        });
    }
    let policy = ActorCritic::from_params(layout, params)?;
    let norm = |prefix: &str, dim: usize| -> Result<Option<RunningNorm>> {
        let Some(m) = meta.get(prefix) else { return Ok(None) };
        let m: NormMeta = parse(m, prefix)?;
        let mean = bytes_f64(data.get(&format!("{prefix}.mean")).ok_or_else(|| ck_err(format!("missing `{prefix}.mean`")))?);
        let var = bytes_f64(data.get(&format!("{prefix}.var")).ok_or_else(|| ck_err(format!("missing `{prefix}.var`")))?);
        if mean.len() != dim || var.len() != dim {
            return Err(Error::ShapeMismatch { what: format!("{prefix} statistics"), expected: dim, actual: mean.len() });
        }
        Ok(Some(RunningNorm { mean, var, count: m.count, clip: m.clip }))
    };
    Ok(Checkpoint {
        obs_norm: norm("obs_norm", shape.obs_dim)?,
        priv_norm: norm("priv_norm", shape.privileged_dim)?,
        policy,
        curriculum: parse(get("curriculum")?, "curriculum")?,
        config: parse(get("config")?, "config")?,
        iteration: get("iteration")?.parse().map_err(|_| ck_err("bad iteration"))?,
        env_steps: get("env_steps")?.parse().map_err(|_| ck_err("bad env_steps"))?,
        shape,
    })
}

/// Writes to a temporary file in the target directory, then renames it into place.
pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = to_bytes(ck)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
