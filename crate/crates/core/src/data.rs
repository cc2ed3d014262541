//! Datasets: SVMLight / delimited-text loading and writing, label
//! normalization, splitting and optional standardization.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::QueryGroups;
use crate::rng::RngState;

/// Dense in-memory dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub features: Matrix,
    /// Regression values, ±1 labels or relevance grades.
    pub targets: Vec<f64>,
    pub groups: Option<QueryGroups>,
    pub names: Option<Vec<String>>,
}

impl DataSet {
    pub fn new(features: Matrix, targets: Vec<f64>, groups: Option<QueryGroups>) -> Result<Self> {
        if features.rows() != targets.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} targets",
                features.rows(),
                targets.len()
            )));
        }
        if let Some(g) = &groups {
            if g.num_rows() != targets.len() {
                return Err(Error::Shape(format!(
                    "query groups cover {} rows, dataset has {}",
                    g.num_rows(),
                    targets.len()
                )));
            }
        }
        if !features.is_finite() || targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Input("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            targets,
            groups,
            names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows by index; query structure is dropped.
    pub fn subset_rows(&self, rows: &[usize]) -> DataSet {
        DataSet {
            features: self.features.select_rows(rows),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            groups: None,
            names: self.names.clone(),
        }
    }

    /// Whole queries by index, laid out in the given order.
    pub fn subset_queries(&self, queries: &[usize]) -> Result<DataSet> {
        let groups = self
            .groups
            .as_ref()
            .ok_or_else(|| Error::Input("dataset has no query groups".into()))?;
        let mut rows = Vec::new();
        let mut sizes = Vec::with_capacity(queries.len());
        let mut ids = Vec::with_capacity(queries.len());
        for &q in queries {
            let r = groups.range(q);
            sizes.push(r.len());
            ids.push(groups.ids()[q]);
            rows.extend(r);
        }
        let mut out = self.subset_rows(&rows);
        let offsets = QueryGroups::from_sizes(&sizes)?.offsets().to_vec();
        out.groups = Some(QueryGroups::from_offsets(offsets, Some(ids))?);
        Ok(out)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

struct SvmLine {
    target: f64,
    qid: Option<u64>,
    features: Vec<(usize, f64)>,
}

fn parse_svmlight_line(line: &str, location: &str) -> Result<Option<SvmLine>> {
    let body = line.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let mut tokens = body.split_whitespace();
    let target_tok = tokens.next().expect("non-empty line");
    let target: f64 = target_tok
        .parse()
        .map_err(|_| Error::parse(location, format!("bad target {target_tok:?}")))?;
    if !target.is_finite() {
        return Err(Error::parse(location, "non-finite target"));
    }
    let mut qid = None;
    let mut features: Vec<(usize, f64)> = Vec::new();
    for tok in tokens {
        let (key, value) = tok
            .split_once(':')
            .ok_or_else(|| Error::parse(location, format!("expected index:value, found {tok:?}")))?;
        if key == "qid" {
            if !features.is_empty() || qid.is_some() {
                return Err(Error::parse(location, "qid must come right after the target"));
            }
            qid = Some(
                value
                    .parse()
                    .map_err(|_| Error::parse(location, format!("bad qid {value:?}")))?,
            );
            continue;
        }
        let idx: usize = key
            .parse()
            .map_err(|_| Error::parse(location, format!("bad feature index {key:?}")))?;
        if idx == 0 {
            return Err(Error::parse(location, "feature indices are 1-based"));
        }
        if features.last().is_some_and(|&(prev, _)| prev >= idx) {
            return Err(Error::parse(location, format!("feature index {idx} is not ascending")));
        }
        let v: f64 = value
            .parse()
            .map_err(|_| Error::parse(location, format!("bad feature value {value:?}")))?;
        if !v.is_finite() {
            return Err(Error::parse(location, format!("non-finite value for feature {idx}")));
        }
        features.push((idx, v));
    }
    Ok(Some(SvmLine { target, qid, features }))
}

/// Load `<target> [qid:<int>] <idx>:<val> ...` lines into a dense dataset.
///
/// Absent features are zero. With `expect_qid`, every line must carry a qid
/// and queries become [`QueryGroups`]; rows of a query that is split across
/// the file are regrouped by a stable sort on qid.
pub fn load_svmlight(path: impl AsRef<Path>, expect_qid: bool, feature_dim: Option<usize>) -> Result<DataSet> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut lines = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let location = format!("{}:{}", path.display(), n + 1);
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(parsed) = parse_svmlight_line(&line, &location)? {
            if expect_qid && parsed.qid.is_none() {
                return Err(Error::parse(location, "missing qid"));
            }
            if let (Some(d), Some(&(idx, _))) = (feature_dim, parsed.features.last()) {
                if idx > d {
                    return Err(Error::parse(location, format!("feature index {idx} exceeds dimension {d}")));
                }
            }
            lines.push(parsed);
        }
    }
    let dim = feature_dim.unwrap_or_else(|| {
        lines
            .iter()
            .filter_map(|l| l.features.last().map(|&(i, _)| i))
            .max()
            .unwrap_or(0)
    });

    let mut order: Vec<usize> = (0..lines.len()).collect();
    let mut groups = None;
    if expect_qid {
        let qids: Vec<u64> = lines.iter().map(|l| l.qid.expect("checked above")).collect();
        let mut seen = std::collections::HashSet::new();
        let contiguous = qids
            .iter()
            .enumerate()
            .all(|(i, q)| (i > 0 && qids[i - 1] == *q) || seen.insert(*q));
        if !contiguous {
            log::warn!("{}: rows of some queries are not contiguous; regrouping by qid", path.display());
            order.sort_by_key(|&i| qids[i]);
        }
        let mut offsets = vec![0];
        let mut ids = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if pos == 0 || qids[order[pos - 1]] != qids[i] {
                if pos > 0 {
                    offsets.push(pos);
                }
                ids.push(qids[i]);
            }
        }
        if !order.is_empty() {
            offsets.push(order.len());
        }
        groups = Some(QueryGroups::from_offsets(offsets, Some(ids))?);
    }

    let mut features = Matrix::zeros(lines.len(), dim);
    let mut targets = Vec::with_capacity(lines.len());
    for (row, &i) in order.iter().enumerate() {
        for &(idx, v) in &lines[i].features {
            features.set(row, idx - 1, v);
        }
        targets.push(lines[i].target);
    }
    DataSet::new(features, targets, groups)
}

/// Write nonzero features in SVMLight format (with qids when grouped).
pub fn write_svmlight(ds: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let mut qid_of_row = vec![None; ds.len()];
    if let Some(groups) = &ds.groups {
        for (q, r) in groups.ranges().enumerate() {
            for i in r {
                qid_of_row[i] = Some(groups.ids()[q]);
            }
        }
    }
    for r in 0..ds.len() {
        let mut line = format!("{}", ds.targets[r]);
        if let Some(q) = qid_of_row[r] {
            line.push_str(&format!(" qid:{q}"));
        }
        for (c, &v) in ds.features.row(r).iter().enumerate() {
            if v != 0.0 {
                line.push_str(&format!(" {}:{}", c + 1, v));
            }
        }
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Load a rectangular numeric table; `target_column` becomes the target and
/// the remaining columns, in order, the features.
pub fn load_delimited(
    path: impl AsRef<Path>,
    target_column: usize,
    delimiter: u8,
    has_header: bool,
) -> Result<DataSet> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);

    let names = if has_header {
        let header = reader.headers().map_err(|e| csv_error(path, e))?;
        if target_column >= header.len() {
            return Err(Error::Input(format!(
                "target column {target_column} outside {} header columns",
                header.len()
            )));
        }
        Some(
            header
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != target_column)
                .map(|(_, name)| name.to_string())
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };

    let mut width = None;
    let mut values = Vec::new();
    let mut targets = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if target_column >= record.len() {
            return Err(Error::parse(
                format!("{}:{line}", path.display()),
                format!("target column {target_column} outside {} columns", record.len()),
            ));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::parse(
                    format!("{}:{line}", path.display()),
                    format!("expected {w} columns, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                Error::parse(
                    format!("{}:{line}:{}", path.display(), c + 1),
                    format!("not a finite number: {cell:?}"),
                )
            })?;
            if c == target_column {
                targets.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let cols = width.map_or(0, |w| w - 1);
    let features = Matrix::from_vec(targets.len(), cols, values)?;
    let mut ds = DataSet::new(features, targets, None)?;
    ds.names = names;
    Ok(ds)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let location = match e.position() {
        Some(p) => format!("{}:{}", path.display(), p.line()),
        None => path.display().to_string(),
    };
    Error::parse(location, e.to_string())
}

/// Write the target as the first column followed by the features.
pub fn write_delimited(ds: &DataSet, path: impl AsRef<Path>, delimiter: u8, header: bool) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(create(path)?);
    let err = |e: csv::Error| Error::parse(path.display().to_string(), e.to_string());
    if header {
        let mut names = vec!["target".to_string()];
        match &ds.names {
            Some(n) => names.extend(n.iter().cloned()),
            None => names.extend((0..ds.feature_dim()).map(|c| format!("f{}", c + 1))),
        }
        w.write_record(&names).map_err(err)?;
    }
    for r in 0..ds.len() {
        let mut rec = Vec::with_capacity(ds.feature_dim() + 1);
        rec.push(ds.targets[r].to_string());
        rec.extend(ds.features.row(r).iter().map(f64::to_string));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Map binary raw labels to ±1: `positive_value` becomes +1, the other −1.
pub fn normalize_labels(mut ds: DataSet, positive_value: f64) -> Result<DataSet> {
    let mut distinct: Vec<f64> = Vec::new();
    for &t in &ds.targets {
        if !distinct.contains(&t) {
            distinct.push(t);
            if distinct.len() > 2 {
                return Err(Error::Input(format!(
                    "binary labels expected, found at least {distinct:?}"
                )));
            }
        }
    }
    for t in &mut ds.targets {
        *t = if *t == positive_value { 1.0 } else { -1.0 };
    }
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Independent rows.
    Rows,
    /// Rows, preserving the label proportions in each part.
    Stratified,
    /// Whole queries; no query straddles two parts.
    Queries,
}

fn split_counts(n: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::Config(format!("split fractions must lie in (0, 1], got {fractions:?}")));
    }
    if fractions.iter().sum::<f64>() > 1.0 + 1e-9 {
        return Err(Error::Config(format!("split fractions sum above 1: {fractions:?}")));
    }
    // Round cumulative boundaries so fractions summing to 1 cover every row.
    let mut counts = Vec::with_capacity(fractions.len());
    let mut cumulative = 0.0;
    let mut start = 0;
    for f in fractions {
        cumulative += f;
        let end = ((cumulative * n as f64).round() as usize).min(n);
        counts.push(end - start);
        start = end;
    }
    Ok(counts)
}

fn cut(order: &[usize], counts: &[usize]) -> Vec<Vec<usize>> {
    let mut start = 0;
    counts
        .iter()
        .map(|&c| {
            let part = order[start..start + c].to_vec();
            start += c;
            part
        })
        .collect()
}

fn partition(ds: &DataSet, fractions: &[f64], mode: SplitMode, rng: &mut RngState) -> Result<Vec<DataSet>> {
    let mode = if ds.groups.is_some() { SplitMode::Queries } else { mode };
    let parts: Vec<Vec<usize>> = match mode {
        SplitMode::Rows => cut(&rng.permutation(ds.len()), &split_counts(ds.len(), fractions)?),
        SplitMode::Stratified => {
            let mut classes: Vec<f64> = ds.targets.clone();
            classes.sort_by(f64::total_cmp);
            classes.dedup();
            let mut parts = vec![Vec::new(); fractions.len()];
            for class in classes {
                let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.targets[i] == class).collect();
                rng.shuffle(&mut members);
                let counts = split_counts(members.len(), fractions)?;
                for (part, chunk) in parts.iter_mut().zip(cut(&members, &counts)) {
                    part.extend(chunk);
                }
            }
            parts
        }
        SplitMode::Queries => {
            let groups = ds
                .groups
                .as_ref()
                .ok_or_else(|| Error::Input("query-level split needs query groups".into()))?;
            let counts = split_counts(groups.num_queries(), fractions)?;
            cut(&rng.permutation(groups.num_queries()), &counts)
        }
    };
    parts
        .into_iter()
        .map(|mut idx| {
            if idx.is_empty() {
                return Err(Error::Input("split produced an empty part".into()));
            }
            idx.sort_unstable();
            match mode {
                SplitMode::Queries => ds.subset_queries(&idx),
                _ => Ok(ds.subset_rows(&idx)),
            }
        })
        .collect()
}

/// Split into (train, validation, test) by the given fractions.
///
/// Datasets with query groups are always split at query level. Each part's
/// rows keep their original relative order.
pub fn split(ds: &DataSet, fractions: [f64; 3], mode: SplitMode, rng: &mut RngState) -> Result<(DataSet, DataSet, DataSet)> {
    let mut parts = partition(ds, &fractions, mode, rng)?.into_iter();
    let mut next = || parts.next().expect("three parts");
    Ok((next(), next(), next()))
}

/// Hold out `fraction` of the data: returns (rest, held out).
pub fn holdout(ds: &DataSet, fraction: f64, mode: SplitMode, rng: &mut RngState) -> Result<(DataSet, DataSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("holdout fraction must lie in (0, 1), got {fraction}")));
    }
    let mut parts = partition(ds, &[1.0 - fraction, fraction], mode, rng)?.into_iter();
    let mut next = || parts.next().expect("two parts");
    Ok((next(), next()))
}

/// Per-feature standardization fitted on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &Matrix) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Input("cannot standardize zero rows".into()));
        }
        let n = features.rows() as f64;
        let mean: Vec<f64> = features.column_sums().iter().map(|s| s / n).collect();
        let mut var = vec![0.0; features.cols()];
        for r in 0..features.rows() {
            for (c, v) in features.row(r).iter().enumerate() {
                var[c] += (v - mean[c]).powi(2);
            }
        }
        // constant columns are centered but not scaled
        let scale = var.iter().map(|v| if *v > 0.0 { (v / n).sqrt() } else { 1.0 }).collect();
        Ok(Self { mean, scale })
    }

    pub fn transform(&self, features: &mut Matrix) -> Result<()> {
        if features.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} features, got {}",
                self.mean.len(),
                features.cols()
            )));
        }
        for r in 0..features.rows() {
            for (c, v) in features.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn svmlight_line_with_qid() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.txt", "1 qid:7 1:0.5 3:2.0\n");
        let ds = load_svmlight(&p, true, Some(3)).unwrap();
        assert_eq!(ds.features.row(0), &[0.5, 0.0, 2.0]);
        assert_eq!(ds.targets, vec![1.0]);
        assert_eq!(ds.groups.unwrap().ids(), &[7]);
    }

    #[test]
    fn svmlight_empty_feature_list_and_groups() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.txt", "2 qid:7\r\n0 qid:7 2:1 # c\n1 qid:9 1:3\n");
        let ds = load_svmlight(&p, true, None).unwrap();
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.features.row(0), &[0.0, 0.0]);
        assert_eq!(ds.groups.as_ref().unwrap().sizes(), vec![2, 1]);
    }

    #[test]
    fn svmlight_regroups_split_queries() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.txt", "1 qid:2 1:1\n2 qid:1 1:2\n3 qid:2 1:3\n");
        let ds = load_svmlight(&p, true, None).unwrap();
        let g = ds.groups.unwrap();
        assert_eq!(g.ids(), &[1, 2]);
        assert_eq!(g.sizes(), vec![1, 2]);
        assert_eq!(ds.targets, vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn svmlight_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.txt", "1 1:1\n1 2:x\n");
        match load_svmlight(&p, false, None) {
            Err(Error::Parse { location, .. }) => assert!(location.ends_with(":2"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
        let p = write_file(&dir, "b.txt", "1 3:1 2:1\n");
        assert!(load_svmlight(&p, false, None).is_err());
        let p = write_file(&dir, "c.txt", "1 1:1\n");
        assert!(load_svmlight(&p, true, None).is_err());
    }

    #[test]
    fn delimited_target_column_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "y,a,b\n1,2,3\n4,5,6\n");
        let ds = load_delimited(&p, 0, b',', true).unwrap();
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.targets, vec![1.0, 4.0]);
        assert_eq!(ds.features.row(1), &[5.0, 6.0]);
        assert_eq!(ds.names.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
    }

    #[test]
    fn delimited_rejects_ragged_and_non_numeric() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "a.csv", "1,2,3\n4,5\n");
        assert!(matches!(load_delimited(&p, 0, b',', false), Err(Error::Parse { .. })));
        let p = write_file(&dir, "b.csv", "1,2\n4,abc\n");
        match load_delimited(&p, 0, b',', false) {
            Err(Error::Parse { location, .. }) => assert!(location.ends_with(":2:2"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels() {
        let ds = DataSet::new(Matrix::zeros(3, 1), vec![0.0, 1.0, 1.0], None).unwrap();
        assert_eq!(normalize_labels(ds, 1.0).unwrap().targets, vec![-1.0, 1.0, 1.0]);
        let ds = DataSet::new(Matrix::zeros(2, 1), vec![-1.0, 1.0], None).unwrap();
        assert_eq!(normalize_labels(ds, 1.0).unwrap().targets, vec![-1.0, 1.0]);
        let ds = DataSet::new(Matrix::zeros(3, 1), vec![1.0, 2.0, 3.0], None).unwrap();
        assert!(normalize_labels(ds, 1.0).is_err());
    }

    #[test]
    fn row_split_sizes_and_determinism() {
        let ds = DataSet::new(Matrix::zeros(100, 1), (0..100).map(f64::from).collect(), None).unwrap();
        let (a, b, c) = split(&ds, [0.8, 0.1, 0.1], SplitMode::Rows, &mut RngState::new(1)).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (80, 10, 10));
        let (a2, _, _) = split(&ds, [0.8, 0.1, 0.1], SplitMode::Rows, &mut RngState::new(1)).unwrap();
        assert_eq!(a.targets, a2.targets);
        let mut all: Vec<f64> = a.targets.iter().chain(&b.targets).chain(&c.targets).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..100).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_split_keeps_proportions() {
        let targets: Vec<f64> = (0..100).map(|i| if i < 20 { 1.0 } else { -1.0 }).collect();
        let ds = DataSet::new(Matrix::zeros(100, 1), targets, None).unwrap();
        let (a, b, _) = split(&ds, [0.5, 0.25, 0.25], SplitMode::Stratified, &mut RngState::new(4)).unwrap();
        assert_eq!(a.targets.iter().filter(|&&t| t > 0.0).count(), 10);
        assert_eq!(b.targets.iter().filter(|&&t| t > 0.0).count(), 5);
    }

    #[test]
    fn query_split_keeps_queries_whole() {
        let groups = QueryGroups::from_offsets((0..=10).map(|q| q * 3).collect(), Some((100..110).collect())).unwrap();
        let targets: Vec<f64> = (0..30).map(|i| (i / 3) as f64).collect();
        let ds = DataSet::new(Matrix::zeros(30, 2), targets, Some(groups)).unwrap();
        let (a, b, c) = split(&ds, [0.6, 0.2, 0.2], SplitMode::Rows, &mut RngState::new(2)).unwrap();
        let mut ids: Vec<u64> = Vec::new();
        for part in [&a, &b, &c] {
            let g = part.groups.as_ref().unwrap();
            assert!(g.sizes().iter().all(|&s| s == 3));
            for (q, r) in g.ranges().enumerate() {
                // all rows of a query share its target
                assert!(part.targets[r].iter().all(|&t| t == (g.ids()[q] - 100) as f64));
            }
            ids.extend(g.ids());
        }
        ids.sort_unstable();
        assert_eq!(ids, (100..110).collect::<Vec<_>>());
    }

    #[test]
    fn empty_split_rejected() {
        let ds = DataSet::new(Matrix::zeros(3, 1), vec![0.0; 3], None).unwrap();
        assert!(split(&ds, [0.9, 0.05, 0.05], SplitMode::Rows, &mut RngState::new(0)).is_err());
    }

    #[test]
    fn holdout_covers_rows() {
        let ds = DataSet::new(Matrix::zeros(10, 1), (0..10).map(f64::from).collect(), None).unwrap();
        let (rest, held) = holdout(&ds, 0.2, SplitMode::Rows, &mut RngState::new(1)).unwrap();
        assert_eq!((rest.len(), held.len()), (8, 2));
        let mut all: Vec<f64> = rest.targets.iter().chain(&held.targets).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, ds.targets);
        assert!(holdout(&ds, 1.0, SplitMode::Rows, &mut RngState::new(1)).is_err());
    }

    #[test]
    fn standardizer_centers_and_scales() {
        let mut m = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&m).unwrap();
        s.transform(&mut m).unwrap();
        assert_eq!(m.column(0), vec![-1.0, 1.0]);
        assert_eq!(m.column(1), vec![0.0, 0.0]);
    }
}
