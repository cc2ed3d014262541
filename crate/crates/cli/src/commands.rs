use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use grownet::data::{holdout, SplitMode, Standardizer};
use grownet::engine::{evaluate, select_num_learners};
use grownet::store::{self, Archive};
use grownet::{fit, DataSet, Metric, RngState, TaskKind, TrainConfig};

use crate::config::RunConfig;
use crate::io::{fit_width, render_log, render_predictions, write_atomic, DataFlags};

/// Mixed into the seed so the validation holdout draws from its own stream.
const HOLDOUT_SALT: u64 = 0x006f_6c64_5f6f_7574;

pub const VARIANTS: [&str; 6] = ["full", "first_order", "constant_alpha", "simple", "no_cs", "cs_every_5"];

struct Prepared {
    config: TrainConfig,
    train: DataSet,
    val: DataSet,
    test: Option<DataSet>,
    standardizer: Option<Standardizer>,
}

impl RunConfig {
    fn data_flags(&self) -> DataFlags {
        DataFlags {
            format: self.format,
            delimiter: self.delimiter,
            header: self.header,
            target_column: self.target_column,
            positive_label: self.positive_label,
        }
    }
}

fn prepare(run: &RunConfig) -> Result<Prepared> {
    let config = run.train_config()?;
    let task = config.task;
    let flags = run.data_flags();
    let train_path = run.train.as_deref().context("no training data given (set `train` or pass --train)")?;
    for path in [run.val.as_deref(), run.test.as_deref()].into_iter().flatten() {
        if !path.is_file() {
            bail!("data file {} does not exist", path.display());
        }
    }

    let train = flags.load(train_path, task, true)?;
    let (train, val) = match &run.val {
        Some(path) => (train, flags.load(path, task, true)?),
        None => {
            let mode = match task {
                TaskKind::BinaryClassification => SplitMode::Stratified,
                TaskKind::PairwiseRanking { .. } => SplitMode::Queries,
                TaskKind::Regression => SplitMode::Rows,
            };
            let mut rng = RngState::new(config.seed ^ HOLDOUT_SALT);
            holdout(&train, run.val_fraction()?, mode, &mut rng)?
        }
    };
    let test = run.test.as_deref().map(|p| flags.load(p, task, true)).transpose()?;

    // Sparse files can disagree on width when trailing features are absent.
    let dim = [Some(&train), Some(&val), test.as_ref()]
        .into_iter()
        .flatten()
        .map(DataSet::feature_dim)
        .max()
        .unwrap_or(0);
    let mut train = fit_width(train, dim, train_path)?;
    let mut val = fit_width(val, dim, run.val.as_deref().unwrap_or(train_path))?;
    let mut test = match (test, run.test.as_deref()) {
        (Some(ds), Some(path)) => Some(fit_width(ds, dim, path)?),
        _ => None,
    };

    let standardizer = if run.standardize.unwrap_or(false) {
        let s = Standardizer::fit(&train.features)?;
        s.transform(&mut train.features)?;
        s.transform(&mut val.features)?;
        if let Some(t) = test.as_mut() {
            s.transform(&mut t.features)?;
        }
        Some(s)
    } else {
        None
    };
    log::info!(
        "{} task: {} train rows, {} validation rows, {dim} features",
        task.name(),
        train.len(),
        val.len()
    );
    Ok(Prepared {
        config,
        train,
        val,
        test,
        standardizer,
    })
}

/// Metrics reported for a task when none is requested.
fn report_metrics(task: TaskKind) -> Vec<Metric> {
    match task {
        TaskKind::Regression => vec![Metric::Rmse],
        TaskKind::BinaryClassification => vec![Metric::Auc],
        TaskKind::PairwiseRanking { .. } => vec![Metric::Ndcg { k: 5 }, Metric::Ndcg { k: 10 }],
    }
}

pub fn train(run: &RunConfig) -> Result<()> {
    let p = prepare(run)?;
    let (model, records) = fit(&p.train, &p.val, &p.config)?;
    let selected = select_num_learners(&model, &p.val, p.config.metric)?;

    let model_out = run.model_out.clone().unwrap_or_else(|| PathBuf::from("model.gnet"));
    let log_out = run.log_out.clone().unwrap_or_else(|| PathBuf::from("train_log.csv"));
    write_atomic(&log_out, &render_log(&records)?)?;
    let archive = Archive::new(model.clone())
        .with_config(&p.config)
        .with_standardizer(p.standardizer);
    write_atomic(&model_out, store::to_string(&archive).as_bytes())?;

    println!("learners: {}", model.num_learners());
    println!("selected prefix: {selected}");
    let best = evaluate(&model, &p.val, p.config.metric, Some(selected))?;
    println!("validation {}: {best}", p.config.metric);
    if let Some(test) = &p.test {
        for metric in report_metrics(p.config.task) {
            println!("test {metric}: {}", evaluate(&model, test, metric, Some(selected))?);
        }
    }
    println!("model: {}", model_out.display());
    println!("log: {}", log_out.display());
    Ok(())
}

fn load_for_model(archive: &Archive, data: &Path, flags: &DataFlags, with_groups: bool) -> Result<DataSet> {
    let model = &archive.model;
    let ds = flags.load(data, model.task(), with_groups)?;
    let mut ds = fit_width(ds, model.feature_dim(), data)?;
    if let Some(s) = &archive.standardizer {
        s.transform(&mut ds.features)?;
    }
    Ok(ds)
}

fn check_prefix(archive: &Archive, num_learners: Option<usize>) -> Result<()> {
    if let Some(k) = num_learners {
        let have = archive.model.num_learners();
        if k > have {
            bail!("--num-learners {k} exceeds the model's {have} learners");
        }
    }
    Ok(())
}

pub fn predict(
    model_path: &Path,
    data: &Path,
    output: Option<&Path>,
    num_learners: Option<usize>,
    flags: &DataFlags,
) -> Result<()> {
    let archive = store::load_archive(model_path)?;
    check_prefix(&archive, num_learners)?;
    let ds = load_for_model(&archive, data, flags, false)?;
    let model = &archive.model;
    let scores = model.predict(&ds.features, num_learners)?;
    let probabilities = match model.task() {
        TaskKind::BinaryClassification => Some(grownet::engine::probability(&scores)),
        _ => None,
    };
    let text = render_predictions(&scores, probabilities.as_deref())?;
    match output {
        Some(path) => write_atomic(path, &text)?,
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(&text)?;
        }
    }
    Ok(())
}

pub fn evaluate_cmd(
    model_path: &Path,
    data: &Path,
    metric: Option<&str>,
    num_learners: Option<usize>,
    flags: &DataFlags,
) -> Result<()> {
    let archive = store::load_archive(model_path)?;
    check_prefix(&archive, num_learners)?;
    let task = archive.model.task();
    let metrics = match metric {
        None => report_metrics(task),
        Some(name) if name.eq_ignore_ascii_case("ndcg") => vec![Metric::Ndcg { k: 5 }, Metric::Ndcg { k: 10 }],
        Some(name) => vec![Metric::parse(name)?],
    };
    for m in &metrics {
        if !m.fits(task) {
            bail!("metric {m} does not apply to a {} model", task.name());
        }
    }
    let ds = load_for_model(&archive, data, flags, true)?;
    for m in metrics {
        println!("{m}: {}", evaluate(&archive.model, &ds, m, num_learners)?);
    }
    Ok(())
}

fn variant_config(base: &TrainConfig, name: &str) -> Result<TrainConfig> {
    let mut c = base.clone();
    match name {
        "full" => {}
        "first_order" => c.use_second_order = false,
        "constant_alpha" => {
            c.alpha_init = 0.1;
            c.alpha_trainable = false;
        }
        "simple" => c.stacked = false,
        "no_cs" => c.cs_every = 0,
        "cs_every_5" => c.cs_every = 5,
        other => bail!("unknown variant {other:?}; valid variants: {}", VARIANTS.join(", ")),
    }
    Ok(c)
}

pub fn ablate(run: &RunConfig, variants: &[String], output: Option<&Path>) -> Result<()> {
    let mut names: Vec<&str> = variants.iter().map(String::as_str).collect();
    if names.is_empty() {
        names = VARIANTS.to_vec();
    } else if !names.contains(&"full") {
        names.insert(0, "full");
    }
    let p = prepare(run)?;
    // Validate every name before spending time on training.
    let configs = names
        .iter()
        .map(|n| variant_config(&p.config, n))
        .collect::<Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variant", "val_metric"])?;
    for (name, config) in names.iter().zip(&configs) {
        log::info!("ablation variant {name}");
        let (model, _) = fit(&p.train, &p.val, config)?;
        let value = evaluate(&model, &p.val, config.metric, None)?;
        w.write_record([name.to_string(), value.to_string()])?;
    }
    let table = w.into_inner().map_err(|e| e.into_error())?;
    if let Some(path) = output {
        write_atomic(path, &table)?;
    }
    print!("{}", String::from_utf8_lossy(&table));
    Ok(())
}
