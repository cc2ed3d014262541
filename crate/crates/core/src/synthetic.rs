//! Seeded synthetic datasets used by tests, benchmarks and the demo CLI.

use std::f64::consts::PI;

use crate::data::DataSet;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::metrics::QueryGroups;
use crate::rng::RngState;

/// Friedman #1 regression: ten U(0,1) features, five of them informative,
/// plus N(0, noise^2) label noise.
pub fn friedman1(n: usize, noise: f64, rng: &mut RngState) -> Result<DataSet> {
    let d = 10;
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.uniform(0.0, 1.0)).collect();
        let f = 10.0 * (PI * row[0] * row[1]).sin()
            + 20.0 * (row[2] - 0.5).powi(2)
            + 10.0 * row[3]
            + 5.0 * row[4];
        y.push(f + noise * rng.normal());
        x.extend(row);
    }
    DataSet::new(Matrix::from_vec(n, d, x)?, y, None)
}

/// Four Gaussian blobs at (+-c, +-c); the label is the sign of x0 * x1.
pub fn xor_blobs(n: usize, center: f64, std: f64, rng: &mut RngState) -> Result<DataSet> {
    let mut x = Vec::with_capacity(n * 2);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let sx = if i % 2 == 0 { 1.0 } else { -1.0 };
        let sy = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
        x.push(sx * center + std * rng.normal());
        x.push(sy * center + std * rng.normal());
        y.push(sx * sy);
    }
    DataSet::new(Matrix::from_vec(n, 2, x)?, y, None)
}

/// Learning-to-rank data: `queries` groups of `docs_per_query` documents with
/// N(0,1) features and grades 0..=4 quantized from a nonlinear latent score.
pub fn ranking(queries: usize, docs_per_query: usize, dim: usize, rng: &mut RngState) -> Result<DataSet> {
    let n = queries * docs_per_query;
    let mut x = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let a = row[0];
        let b = row.get(1).copied().unwrap_or(0.0);
        let c = row.get(2).copied().unwrap_or(0.0);
        let latent = a + 0.8 * b * c + 0.5 * (2.0 * b).sin() + 0.3 * rng.normal();
        let grade = ((latent + 1.5) * 1.25).floor().clamp(0.0, 4.0);
        y.push(grade);
        x.extend(row);
    }
    let groups = QueryGroups::from_sizes(&vec![docs_per_query; queries])?;
    DataSet::new(Matrix::from_vec(n, dim, x)?, y, Some(groups))
}
