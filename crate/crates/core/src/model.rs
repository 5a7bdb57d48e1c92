//! Random-variable state of the hierarchical Bayesian tensor-ring model.
//!
//! Observations are `T_i ~ N(TR(G)_i, τ⁻¹)` on the observed set. Each core
//! slice has a zero-mean Gaussian prior whose precision for entry `(a, b)` is
//! `λ_left[a] · λ_right[b]`, where `λ_left`/`λ_right` are the Gamma-distributed
//! precisions attached to the core's two bonds. `τ` is Gamma as well.
//!
//! Bond `k` sits between core `k` and core `k+1 (mod N)`; `lambdas[k]` has one
//! component per rank index of that bond.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtf::{load_dtf, save_dtf};
use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::linalg::{min_eigenvalue, Matrix};
use crate::ring::{core_slice, tr_reconstruct, TrCores};
use crate::tensor::{DenseTensor, Shape};

/// Gamma distribution in shape/rate form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub shape: f64,
    pub rate: f64,
}

impl Gamma {
    pub fn new(shape: f64, rate: f64) -> Self {
        Gamma { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

/// Scalar prior settings, broadcast to every component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            a: 1e-7,
            b: 1e-7,
            c: 1e-7,
            d: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperpriors {
    /// Shape of the noise-precision prior.
    pub a: f64,
    /// Rate of the noise-precision prior.
    pub b: f64,
    /// Per-bond, per-component shapes for `λ`.
    pub c: Vec<Vec<f64>>,
    /// Per-bond, per-component rates for `λ`.
    pub d: Vec<Vec<f64>>,
}

impl Hyperpriors {
    pub fn broadcast(cfg: &PriorConfig, bonds: &[usize]) -> Result<Self> {
        let h = Hyperpriors {
            a: cfg.a,
            b: cfg.b,
            c: bonds.iter().map(|&r| vec![cfg.c; r]).collect(),
            d: bonds.iter().map(|&r| vec![cfg.d; r]).collect(),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.a) || !positive(self.b) {
            return Err(Error::Config(format!(
                "noise prior parameters must be positive, got a={} b={}",
                self.a, self.b
            )));
        }
        if self.c.iter().chain(&self.d).flatten().any(|&v| !positive(v)) {
            return Err(Error::Config("rank prior parameters must be positive".into()));
        }
        Ok(())
    }
}

/// `q(G_n) = Π_i N(vec G_n(i) | mean, V_i^n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorePosterior {
    pub mean: TrCores,
    /// `cov[n][i]` is `V_i^n`, size `(R_left R_right)²` in `vec` order.
    pub cov: Vec<Vec<Matrix>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaPosterior {
    pub shape: Vec<Vec<f64>>,
    pub rate: Vec<Vec<f64>>,
}

impl LambdaPosterior {
    pub fn mean(&self, bond: usize) -> Vec<f64> {
        self.shape[bond]
            .iter()
            .zip(&self.rate[bond])
            .map(|(c, d)| c / d)
            .collect()
    }
}

pub type TauPosterior = Gamma;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub cores: CorePosterior,
    pub lambdas: LambdaPosterior,
    pub tau: TauPosterior,
    pub priors: Hyperpriors,
    pub mask: IndexSet,
    pub observations: DenseTensor,
    pub iteration: usize,
    pub seed: u64,
}

/// Core means i.i.d. standard normal, identity covariances, `E[λ] = c/d`,
/// `E[τ] = a/b`, every bond at rank `r_init`.
pub fn init_state(
    t: &DenseTensor,
    mask: &IndexSet,
    r_init: usize,
    priors: &PriorConfig,
    seed: u64,
) -> Result<ModelState> {
    if mask.is_empty() {
        return Err(Error::Unusable("no observed entries".into()));
    }
    if r_init == 0 {
        return Err(Error::Config("r_init must be at least 1".into()));
    }
    if mask.shape() != t.shape() {
        return Err(Error::ShapeMismatch(format!(
            "mask shape {} vs tensor shape {}",
            mask.shape(),
            t.shape()
        )));
    }
    let order = t.order();
    let bonds = vec![r_init; order];
    let hyper = Hyperpriors::broadcast(priors, &bonds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = TrCores::random(t.dims(), &bonds, &mut rng)?;
    let cov = (0..order)
        .map(|k| {
            let d = r_init * r_init;
            vec![Matrix::identity(d, d); t.dims()[k]]
        })
        .collect();
    Ok(ModelState {
        cores: CorePosterior { mean, cov },
        lambdas: LambdaPosterior {
            shape: hyper.c.clone(),
            rate: hyper.d.clone(),
        },
        tau: Gamma::new(hyper.a, hyper.b),
        priors: hyper,
        mask: mask.clone(),
        observations: t.clone(),
        iteration: 0,
        seed,
    })
}

impl ModelState {
    pub fn order(&self) -> usize {
        self.observations.order()
    }

    /// Right bond rank of every core, `R_1..R_N` (with `R_N = R_0`).
    pub fn bonds(&self) -> Vec<usize> {
        (0..self.order()).map(|k| self.cores.mean.bond(k)).collect()
    }

    pub fn left_bond(&self, mode: usize) -> usize {
        (mode + self.order() - 1) % self.order()
    }

    pub fn mean_slice(&self, mode: usize, slice: usize) -> Matrix {
        core_slice(self.cores.mean.core(mode), slice)
    }

    pub fn expected_tau(&self) -> f64 {
        self.tau.mean()
    }

    /// Checks rank bookkeeping, covariance SPD-ness and Gamma positivity.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.order();
        for k in 0..n {
            let bond = self.cores.mean.bond(k);
            let next_left = self.cores.mean.core((k + 1) % n).dims()[0];
            if bond != next_left
                || self.lambdas.shape[k].len() != bond
                || self.lambdas.rate[k].len() != bond
                || self.priors.c[k].len() != bond
                || self.priors.d[k].len() != bond
            {
                return Err(Error::RankMismatch(format!("bond {k} bookkeeping is inconsistent")));
            }
            let core = self.cores.mean.core(k);
            let d = core.dims()[0] * core.dims()[2];
            if self.cores.cov[k].len() != core.dims()[1] {
                return Err(Error::RankMismatch(format!("mode {k} covariance count")));
            }
            for (i, v) in self.cores.cov[k].iter().enumerate() {
                if v.shape() != (d, d) {
                    return Err(Error::RankMismatch(format!("covariance ({k},{i}) has wrong size")));
                }
                if (v - v.transpose()).amax() > 1e-12 * v.amax().max(1.0) {
                    return Err(Error::NotSpd(format!("covariance ({k},{i}) not symmetric")));
                }
                if min_eigenvalue(v) <= 0.0 {
                    return Err(Error::NotSpd(format!("covariance ({k},{i}) not positive definite")));
                }
            }
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.tau.shape) || !pos(self.tau.rate) {
            return Err(Error::NonFinite("tau posterior parameters not positive".into()));
        }
        if self.lambdas.shape.iter().chain(&self.lambdas.rate).flatten().any(|&v| !pos(v)) {
            return Err(Error::NonFinite("lambda posterior parameters not positive".into()));
        }
        Ok(())
    }
}

/// `E[vec G_n(i) vec G_n(i)ᵀ] = mean·meanᵀ + V`.
pub fn expected_slice_moment(state: &ModelState, mode: usize, slice: usize) -> Matrix {
    let g = state.mean_slice(mode, slice);
    let v = nalgebra::DVector::from_column_slice(g.as_slice());
    &v * v.transpose() + &state.cores.cov[mode][slice]
}

/// Reconstruction from the posterior means.
pub fn expected_reconstruction(state: &ModelState) -> DenseTensor {
    tr_reconstruct(&state.cores.mean).expect("state cores are ring-consistent")
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    dims: Vec<usize>,
    bonds: Vec<usize>,
    tau: Gamma,
    lambdas: LambdaPosterior,
    priors: Hyperpriors,
    iteration: usize,
    seed: u64,
}

/// Writes `core_<k>.dtf` (posterior means), `cov_<k>.dtf` (covariances as a
/// `(D, D, I_k)` tensor) and `state.json` into `dir`.
pub fn save_checkpoint(state: &ModelState, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for k in 0..state.order() {
        save_dtf(dir.join(format!("core_{k}.dtf")), state.cores.mean.core(k))?;
        let covs = &state.cores.cov[k];
        let d = covs[0].nrows();
        let mut data = Vec::with_capacity(d * d * covs.len());
        for v in covs {
            data.extend_from_slice(v.as_slice());
        }
        let t = DenseTensor::from_vec(Shape::new(vec![d, d, covs.len()])?, data)?;
        save_dtf(dir.join(format!("cov_{k}.dtf")), &t)?;
    }
    let meta = CheckpointMeta {
        dims: state.observations.dims().to_vec(),
        bonds: state.bonds(),
        tau: state.tau,
        lambdas: state.lambdas.clone(),
        priors: state.priors.clone(),
        iteration: state.iteration,
        seed: state.seed,
    };
    fs::write(dir.join("state.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Restores a checkpoint written by [`save_checkpoint`] for the given data.
pub fn load_checkpoint(dir: impl AsRef<Path>, t: &DenseTensor, mask: &IndexSet) -> Result<ModelState> {
    let dir = dir.as_ref();
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(dir.join("state.json"))?)?;
    if meta.dims != t.dims() {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint dims {:?} vs data {:?}",
            meta.dims,
            t.dims()
        )));
    }
    let mut cores = Vec::with_capacity(meta.dims.len());
    let mut covs = Vec::with_capacity(meta.dims.len());
    for k in 0..meta.dims.len() {
        cores.push(load_dtf(dir.join(format!("core_{k}.dtf")))?);
        let c = load_dtf(dir.join(format!("cov_{k}.dtf")))?;
        let (d, _, ext) = (c.dims()[0], c.dims()[1], c.dims()[2]);
        covs.push(
            c.data()
                .chunks_exact(d * d)
                .take(ext)
                .map(|chunk| Matrix::from_column_slice(d, d, chunk))
                .collect(),
        );
    }
    let state = ModelState {
        cores: CorePosterior {
            mean: TrCores::new(cores)?,
            cov: covs,
        },
        lambdas: meta.lambdas,
        tau: meta.tau,
        priors: meta.priors,
        mask: mask.clone(),
        observations: t.clone(),
        iteration: meta.iteration,
        seed: meta.seed,
    };
    state.check_invariants()?;
    Ok(state)
}
