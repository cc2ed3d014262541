//! Dataset loading and artifact writing shared by the subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use grownet::data::{load_delimited, load_svmlight, normalize_labels};
use grownet::{DataSet, Matrix, StageLogRecord, TaskKind};

use crate::config::Format;

/// How to read a data file.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DataFlags {
    /// Data format; inferred from the file extension when unset.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Delimited files start with a header row.
    #[arg(long)]
    pub header: Option<bool>,
    /// Zero-based target column of delimited files.
    #[arg(long)]
    pub target_column: Option<usize>,
    /// Raw label mapped to +1 for classification (others become -1).
    #[arg(long)]
    pub positive_label: Option<f64>,
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

impl DataFlags {
    fn format_for(&self, path: &Path) -> Format {
        self.format.unwrap_or_else(|| match extension(path).as_str() {
            "csv" | "tsv" | "txt" => Format::Csv,
            _ => Format::Svmlight,
        })
    }

    fn delimiter_for(&self, path: &Path) -> Result<u8> {
        let c = self
            .delimiter
            .unwrap_or(if extension(path) == "tsv" { '\t' } else { ',' });
        u8::try_from(c).ok().filter(u8::is_ascii).with_context(|| format!("delimiter {c:?} is not a single ASCII byte"))
    }

    /// Read `path` for `task`. With `with_groups`, ranking files must carry
    /// qids; without it rows keep their file order and qids are ignored.
    pub fn load(&self, path: &Path, task: TaskKind, with_groups: bool) -> Result<DataSet> {
        if !path.is_file() {
            bail!("data file {} does not exist", path.display());
        }
        let ds = match self.format_for(path) {
            Format::Svmlight => load_svmlight(path, with_groups && task.is_ranking(), None)?,
            Format::Csv => {
                if with_groups && task.is_ranking() {
                    bail!("ranking needs query ids; provide {} in svmlight format", path.display());
                }
                let delimiter = self.delimiter_for(path)?;
                load_delimited(path, self.target_column.unwrap_or(0), delimiter, self.header.unwrap_or(false))?
            }
        };
        let ds = match task {
            TaskKind::BinaryClassification => normalize_labels(ds, self.positive_label.unwrap_or(1.0))?,
            _ => ds,
        };
        Ok(ds)
    }
}

/// Bring `ds` to `dim` features. Sparse files may omit trailing all-zero
/// features, so narrower data is zero-padded; wider data is an error.
pub fn fit_width(mut ds: DataSet, dim: usize, path: &Path) -> Result<DataSet> {
    let have = ds.feature_dim();
    if have > dim {
        bail!(
            "{} has {have} features but the model expects {dim}",
            path.display()
        );
    }
    if have < dim {
        ds.features = ds.features.hconcat(&Matrix::zeros(ds.len(), dim - have))?;
    }
    Ok(ds)
}

/// Write through a sibling temporary file so a failed run never leaves a
/// truncated artifact behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path.file_name().with_context(|| format!("{} is not a file path", path.display()))?;
    tmp.set_file_name(format!(".{}.partial", name.to_string_lossy()));
    let mut file = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    file.write_all(contents)
        .and_then(|_| file.sync_all())
        .with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

/// Render the stage log. Every row has one alpha column per final learner;
/// learners that did not exist yet at a stage get 0.
pub fn render_log(records: &[StageLogRecord]) -> Result<Vec<u8>> {
    let width = records.iter().map(|r| r.alphas.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["stage".to_string(), "stage_loss".into(), "corrective_loss".into(), "val_metric".into()];
    header.extend((0..width).map(|k| format!("alpha_{k}")));
    header.push("seconds".into());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.stage.to_string(),
            r.stage_loss.to_string(),
            r.corrective_loss.to_string(),
            r.val_metric.to_string(),
        ];
        row.extend((0..width).map(|k| r.alphas.get(k).copied().unwrap_or(0.0).to_string()));
        row.push(r.seconds.to_string());
        w.write_record(&row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn render_predictions(scores: &[f64], probabilities: Option<&[f64]>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match probabilities {
        Some(p) => {
            w.write_record(["score", "probability"])?;
            for (s, p) in scores.iter().zip(p) {
                w.write_record([s.to_string(), p.to_string()])?;
            }
        }
        None => {
            w.write_record(["score"])?;
            for s in scores {
                w.write_record([s.to_string()])?;
            }
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}
