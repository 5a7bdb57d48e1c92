//! Fixed-rank tensor-ring completion by alternating least squares.
//!
//! Each mode update solves, slice by slice, the (ridge-regularized) normal
//! equations of the observed entries against the deterministic subchain rows.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::linalg::{Matrix, Vector};
use crate::ring::{all_slices, set_core_slice, subchain_row, tr_entry, TrCores};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlsConfig {
    pub max_iters: usize,
    /// Stop when the relative change of observed RMSE drops below this.
    pub tol: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            max_iters: 200,
            tol: 1e-10,
            ridge: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlsFit {
    pub cores: TrCores,
    pub iters: usize,
    /// Observed-entry RMSE after each sweep.
    pub rmse_trace: Vec<f64>,
}

/// Solves every slice of core `mode` with the other cores fixed.
pub fn tr_als_step_oracle(
    cores: &TrCores,
    t: &DenseTensor,
    mask: &IndexSet,
    mode: usize,
    ridge: f64,
) -> Result<DenseTensor> {
    let order = cores.order();
    if mode >= order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    let slices = all_slices(cores);
    let core = cores.core(mode);
    let (l, ext, r) = (core.dims()[0], core.dims()[1], core.dims()[2]);
    let d = l * r;
    let obs = t.data();
    let solved: Vec<Result<Matrix>> = (0..ext)
        .into_par_iter()
        .map(|i| {
            let bucket = mask.bucket(mode, i);
            let mut gram = Matrix::zeros(d, d);
            let mut rhs = Vector::zeros(d);
            for e in 0..bucket.len() {
                let row = Vector::from_vec(subchain_row(&slices, mode, bucket.comp(e)));
                gram.ger(1.0, &row, &row, 1.0);
                rhs.axpy(obs[bucket.entries()[e]], &row, 1.0);
            }
            for k in 0..d {
                gram[(k, k)] += ridge;
            }
            let chol = gram.cholesky().ok_or_else(|| {
                Error::Singular(format!(
                    "mode {mode} slice {i}: normal equations not positive definite (ridge {ridge:e})"
                ))
            })?;
            let g = chol.solve(&rhs);
            Ok(Matrix::from_column_slice(l, r, g.as_slice()))
        })
        .collect();
    let mut out = core.clone();
    for (i, s) in solved.into_iter().enumerate() {
        set_core_slice(&mut out, i, &s?);
    }
    Ok(out)
}

pub fn observed_rmse(cores: &TrCores, t: &DenseTensor, mask: &IndexSet) -> f64 {
    (observed_sse(cores, t, mask) / mask.len().max(1) as f64).sqrt()
}

pub fn observed_sse(cores: &TrCores, t: &DenseTensor, mask: &IndexSet) -> f64 {
    let slices = all_slices(cores);
    let shape = mask.shape();
    let obs = t.data();
    mask.linear()
        .par_iter()
        .map(|&lin| (obs[lin] - tr_entry(&slices, &shape.multi_index(lin))).powi(2))
        .sum()
}

/// Parses a rank list: a single integer is broadcast to every bond.
pub fn broadcast_ranks(ranks: &[usize], order: usize) -> Result<Vec<usize>> {
    match ranks.len() {
        1 => Ok(vec![ranks[0]; order]),
        n if n == order => Ok(ranks.to_vec()),
        n => Err(Error::RankMismatch(format!(
            "{n} ranks given for an order-{order} tensor"
        ))),
    }
}

/// Fits cores with bond ranks `ranks` (`R_0..R_{N-1}`, closure implied).
pub fn tr_als_fit(t: &DenseTensor, mask: &IndexSet, ranks: &[usize], config: &AlsConfig) -> Result<AlsFit> {
    if mask.is_empty() {
        return Err(Error::Unusable("no observed entries".into()));
    }
    let order = t.order();
    let ranks = broadcast_ranks(ranks, order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cores = TrCores::random(t.dims(), &ranks, &mut rng)?;
    let params_per_slice = (0..order)
        .map(|k| ranks[k] * ranks[(k + 1) % order])
        .max()
        .unwrap_or(1);
    let min_obs = (0..order)
        .flat_map(|k| mask.buckets(k).iter().map(|b| b.len()))
        .min()
        .unwrap_or(0);
    if min_obs < params_per_slice {
        warn!(
            "ranks {ranks:?} need {params_per_slice} unknowns per slice but some slice has only {min_obs} observations"
        );
    }
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..config.max_iters {
        for mode in 0..order {
            let core = tr_als_step_oracle(&cores, t, mask, mode, config.ridge)?;
            cores.set_core(mode, core)?;
        }
        let rmse = observed_rmse(&cores, t, mask);
        if !rmse.is_finite() {
            return Err(Error::NonFinite(format!("ALS observed RMSE is {rmse}")));
        }
        trace.push(rmse);
        let rel = if rmse > 0.0 { (prev - rmse).abs() / rmse } else { 0.0 };
        if rel < config.tol {
            break;
        }
        prev = rmse;
    }
    Ok(AlsFit {
        iters: trace.len(),
        cores,
        rmse_trace: trace,
    })
}
