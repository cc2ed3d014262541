//! Single-file model archives.
//!
//! Layout: a header line `GROWNET-ARCHIVE <version>` followed by a JSON
//! document. Every model float is written as the 16-hex-digit image of its
//! IEEE-754 bits, so a save/load round trip is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Standardizer;
use crate::engine::{GrowNetModel, TrainConfig};
use crate::error::{Error, Result};
use crate::losses::TaskKind;
use crate::matrix::Matrix;
use crate::nn::{BatchNorm, Dense, HiddenLayer, LearnerArch, WeakLearner};

pub const MAGIC: &str = "GROWNET-ARCHIVE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArchiveBody {
    task: TaskKind,
    prior: String,
    feature_dim: usize,
    stacked: bool,
    alphas: Vec<String>,
    learners: Vec<LearnerRecord>,
    config_fingerprint: Option<String>,
    standardizer: Option<StandardizerRecord>,
}

#[derive(Serialize, Deserialize)]
struct StandardizerRecord {
    mean: Vec<String>,
    scale: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LearnerRecord {
    arch: LearnerArch,
    hidden: Vec<LayerRecord>,
    output: DenseRecord,
}

#[derive(Serialize, Deserialize)]
struct DenseRecord {
    rows: usize,
    cols: usize,
    weights: Vec<String>,
    bias: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NormRecord {
    gamma: Vec<String>,
    beta: Vec<String>,
    running_mean: Vec<String>,
    running_var: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    dense: DenseRecord,
    norm: Option<NormRecord>,
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn hexes(v: &[f64]) -> Vec<String> {
    v.iter().copied().map(hex).collect()
}

fn unhex(s: &str) -> Result<f64> {
    if s.len() != 16 {
        return Err(Error::Archive(format!("float word {s:?} is not 16 hex digits")));
    }
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Archive(format!("bad float word {s:?}")))
}

fn unhexes(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| unhex(s)).collect()
}

impl DenseRecord {
    fn from_dense(d: &Dense) -> Self {
        Self {
            rows: d.weights.rows(),
            cols: d.weights.cols(),
            weights: hexes(d.weights.as_slice()),
            bias: hexes(&d.bias),
        }
    }

    fn to_dense(&self) -> Result<Dense> {
        Ok(Dense {
            weights: Matrix::from_vec(self.rows, self.cols, unhexes(&self.weights)?)?,
            bias: unhexes(&self.bias)?,
        })
    }
}

/// Stable digest of a training configuration.
pub fn config_fingerprint(config: &TrainConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A model plus the feature scaling and training configuration it was built with.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub model: GrowNetModel,
    pub config_fingerprint: Option<String>,
    /// Feature scaling applied before the model saw the data.
    pub standardizer: Option<Standardizer>,
}

impl Archive {
    pub fn new(model: GrowNetModel) -> Self {
        Self {
            model,
            config_fingerprint: None,
            standardizer: None,
        }
    }

    pub fn with_config(mut self, config: &TrainConfig) -> Self {
        self.config_fingerprint = Some(config_fingerprint(config));
        self
    }

    pub fn with_standardizer(mut self, standardizer: Option<Standardizer>) -> Self {
        self.standardizer = standardizer;
        self
    }
}

pub fn save(model: &GrowNetModel, path: impl AsRef<Path>) -> Result<()> {
    save_archive(&Archive::new(model.clone()), path)
}

pub fn save_archive(archive: &Archive, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_string(archive)).map_err(|e| Error::io(path, e))
}

pub fn to_string(archive: &Archive) -> String {
    let model = &archive.model;
    let body = ArchiveBody {
        task: model.task(),
        prior: hex(model.prior()),
        feature_dim: model.feature_dim(),
        stacked: model.is_stacked(),
        alphas: hexes(model.alphas()),
        learners: model
            .learners()
            .iter()
            .map(|l| LearnerRecord {
                arch: l.arch().clone(),
                hidden: l
                    .hidden_layers()
                    .iter()
                    .map(|h| LayerRecord {
                        dense: DenseRecord::from_dense(&h.dense),
                        norm: h.norm.as_ref().map(|bn| NormRecord {
                            gamma: hexes(&bn.gamma),
                            beta: hexes(&bn.beta),
                            running_mean: hexes(&bn.running_mean),
                            running_var: hexes(&bn.running_var),
                        }),
                    })
                    .collect(),
                output: DenseRecord::from_dense(l.output_layer()),
            })
            .collect(),
        config_fingerprint: archive.config_fingerprint.clone(),
        standardizer: archive.standardizer.as_ref().map(|s| StandardizerRecord {
            mean: hexes(&s.mean),
            scale: hexes(&s.scale),
        }),
    };
    let json = serde_json::to_string_pretty(&body).expect("archive serializes");
    format!("{MAGIC} {FORMAT_VERSION}\n{json}\n")
}

pub fn load(path: impl AsRef<Path>) -> Result<GrowNetModel> {
    load_archive(path).map(|a| a.model)
}

pub fn load_archive(path: impl AsRef<Path>) -> Result<Archive> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

pub fn from_str(text: &str) -> Result<Archive> {
    let (header, json) = text.split_once('\n').unwrap_or((text, ""));
    let version = header
        .trim_end_matches('\r')
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.strip_prefix(' '))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| Error::Version(format!("missing {MAGIC} header")))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version(format!(
            "archive format {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let body: ArchiveBody = serde_json::from_str(json).map_err(|e| Error::Archive(e.to_string()))?;
    body.task.validate()?;
    let mut learners = Vec::with_capacity(body.learners.len());
    for (k, rec) in body.learners.iter().enumerate() {
        let hidden = rec
            .hidden
            .iter()
            .map(|h| {
                Ok(HiddenLayer {
                    dense: h.dense.to_dense()?,
                    norm: match &h.norm {
                        Some(n) => Some(BatchNorm {
                            gamma: unhexes(&n.gamma)?,
                            beta: unhexes(&n.beta)?,
                            running_mean: unhexes(&n.running_mean)?,
                            running_var: unhexes(&n.running_var)?,
                        }),
                        None => None,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let learner = WeakLearner::from_parts(rec.arch.clone(), hidden, rec.output.to_dense()?)
            .map_err(|e| Error::Archive(format!("learner {k}: {e}")))?;
        learners.push(learner);
    }
    let model = GrowNetModel::from_parts(
        body.task,
        unhex(&body.prior)?,
        body.feature_dim,
        body.stacked,
        learners,
        unhexes(&body.alphas)?,
    )
    .map_err(|e| Error::Archive(e.to_string()))?;
    let standardizer = match body.standardizer {
        Some(rec) => {
            let (mean, scale) = (unhexes(&rec.mean)?, unhexes(&rec.scale)?);
            if mean.len() != model.feature_dim() || scale.len() != model.feature_dim() {
                return Err(Error::Archive("standardizer width does not match the model".into()));
            }
            Some(Standardizer { mean, scale })
        }
        None => None,
    };
    Ok(Archive {
        model,
        config_fingerprint: body.config_fingerprint,
        standardizer,
    })
}
