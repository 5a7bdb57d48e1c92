//! Coordinate-ascent variational inference for the Bayesian tensor-ring model.
//!
//! One sweep updates every core posterior in mode order, then each bond's
//! `λ` posterior (pruning collapsed rank components right after), then the
//! noise precision `τ`.
//!
//! The expensive quantity is the expected Gram of the subchain design rows,
//! `E[Gᵀ G] = Σ_{observed j} E[vec(P_jᵀ) vec(P_jᵀ)ᵀ]` with `P_j` the product of
//! the other cores' slices. Mean-field independence across cores gives
//! `E[P ⊗ P] = Π_l E[G_l ⊗ G_l]`, and each factor is a fixed rearrangement of
//! the slice second moment (see [`crate::linalg::kron_moment`]). The sums over
//! observed entries are evaluated with [`crate::moments::chain_sum`].

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::linalg::{kron_moment, spd_inverse, Matrix, Vector};
use crate::model::{expected_reconstruction, expected_slice_moment, init_state, Gamma, ModelState, PriorConfig};
use crate::moments::chain_sum;
use crate::ring::{chain_modes, core_slice, set_core_slice, tr_entry};
use crate::tensor::{DenseTensor, Shape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneRule {
    /// Relative posterior-mean energy of the component's slices in both adjacent cores.
    Power,
    /// Relative size of `E[λ]`: a component is dropped when
    /// `min E[λ] / E[λ_r] < threshold`.
    Lambda,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VbiConfig {
    /// Starting rank on every bond; `None` picks `min(10, smallest extent)`.
    pub r_init: Option<usize>,
    pub max_iters: usize,
    /// Stop once `|ΔE[τ]| / E[τ] < tol` has held, with no rank change, for
    /// `patience` consecutive sweeps.
    pub tol: f64,
    pub patience: usize,
    pub prune_threshold: f64,
    pub prune_rule: PruneRule,
    /// Sweeps to run before pruning starts.
    pub burn_in: usize,
    pub seed: u64,
    pub priors: PriorConfig,
    /// Starts `E[τ]` at `init_snr / mean(y²)` over observed `y` instead of
    /// `a / b`. Only the first core sweep sees it.
    pub init_snr: Option<f64>,
    pub overwrite_observed: bool,
}

impl Default for VbiConfig {
    fn default() -> Self {
        VbiConfig {
            r_init: None,
            max_iters: 200,
            tol: 1e-5,
            patience: 5,
            prune_threshold: 1e-6,
            prune_rule: PruneRule::Power,
            burn_in: 2,
            seed: 0,
            priors: PriorConfig::default(),
            init_snr: None,
            overwrite_observed: true,
        }
    }
}

impl VbiConfig {
    pub fn resolved_r_init(&self, dims: &[usize]) -> usize {
        self.r_init
            .unwrap_or_else(|| dims.iter().copied().min().unwrap_or(1).min(10))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub e_tau: f64,
    pub ranks: Vec<usize>,
    pub obs_rmse: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub records: Vec<IterRecord>,
    pub converged: bool,
}

/// Per-mode slice statistics consumed by the chain sums.
struct ModeStats {
    /// `E[G(i) ⊗ G(i)]` per slice.
    kron: Vec<Matrix>,
    /// Posterior mean slice per slice.
    mean: Vec<Matrix>,
}

fn mode_stats(state: &ModelState, mode: usize) -> ModeStats {
    let core = state.cores.mean.core(mode);
    let (r0, ext, r1) = (core.dims()[0], core.dims()[1], core.dims()[2]);
    let (kron, mean) = (0..ext)
        .map(|i| {
            let s = expected_slice_moment(state, mode, i);
            (kron_moment(&s, r0, r1), core_slice(core, i))
        })
        .unzip();
    ModeStats { kron, mean }
}

/// Converts `Q = E[P ⊗ P]` (size `R_r² × R_l²`, `P` is `R_r × R_l`) into the
/// Gram of rows `vec(Pᵀ)`: `gram[a + l b, a' + l b'] = Q[b r + b', a l + a']`.
fn gram_from_chain(q: &Matrix, l: usize, r: usize) -> Matrix {
    let d = l * r;
    Matrix::from_fn(d, d, |row, col| {
        let (a, b) = (row % l, row / l);
        let (ap, bp) = (col % l, col / l);
        q[(b * r + bp, a * l + ap)]
    })
}

/// Computes the slice Gram and the data term `E[G]ᵀ t` for every slice of `mode`.
fn slice_systems(state: &ModelState, mode: usize, stats: &[Option<ModeStats>]) -> Vec<(Matrix, Vector)> {
    let order = state.order();
    let chain = chain_modes(order, mode);
    let width = chain.len();
    let core = state.cores.mean.core(mode);
    let (l, ext, r) = (core.dims()[0], core.dims()[1], core.dims()[2]);
    let kron_f: Vec<&[Matrix]> = chain
        .iter()
        .map(|&k| stats[k].as_ref().expect("chain stats").kron.as_slice())
        .collect();
    let mean_f: Vec<&[Matrix]> = chain
        .iter()
        .map(|&k| stats[k].as_ref().expect("chain stats").mean.as_slice())
        .collect();
    let obs = state.observations.data();
    (0..ext)
        .into_par_iter()
        .map(|i| {
            let bucket = state.mask.bucket(mode, i);
            let q = chain_sum(bucket.comp_flat(), width, None, &kron_f, r * r, l * l);
            let gram = gram_from_chain(&q, l, r);
            let values: Vec<f64> = bucket.entries().iter().map(|&e| obs[e]).collect();
            let w = chain_sum(bucket.comp_flat(), width, Some(&values), &mean_f, r, l);
            let h = Vector::from_column_slice(w.transpose().as_slice());
            (gram, h)
        })
        .collect()
}

fn stats_for_chain(state: &ModelState, mode: usize) -> Vec<Option<ModeStats>> {
    let order = state.order();
    (0..order)
        .into_par_iter()
        .map(|k| (k != mode).then(|| mode_stats(state, k)))
        .collect()
}

/// `E[(G^{≠n}_{O,i})ᵀ G^{≠n}_{O,i}]` for slice `slice` of `mode`, size
/// `(R_left R_right)²`. Zero when the slice has no observations.
pub fn expected_subchain_gram(state: &ModelState, mode: usize, slice: usize) -> Matrix {
    let stats = stats_for_chain(state, mode);
    let order = state.order();
    let chain = chain_modes(order, mode);
    let core = state.cores.mean.core(mode);
    let (l, r) = (core.dims()[0], core.dims()[2]);
    let kron_f: Vec<&[Matrix]> = chain
        .iter()
        .map(|&k| stats[k].as_ref().expect("chain stats").kron.as_slice())
        .collect();
    let bucket = state.mask.bucket(mode, slice);
    let q = chain_sum(bucket.comp_flat(), chain.len(), None, &kron_f, r * r, l * l);
    gram_from_chain(&q, l, r)
}

/// Prior precision `E[λ_left] ⊗ E[λ_right]` on `vec` of a slice of `mode`,
/// as a diagonal: entry `a + l b` is `E[λ_left[a]] · E[λ_right[b]]`.
pub fn prior_precision_diag(state: &ModelState, mode: usize) -> Vec<f64> {
    let left = state.lambdas.mean(state.left_bond(mode));
    let right = state.lambdas.mean(mode);
    let mut out = Vec::with_capacity(left.len() * right.len());
    for rb in &right {
        for la in &left {
            out.push(la * rb);
        }
    }
    out
}

/// Closed-form update of `q(G_mode)`:
/// `V = (E[τ] E[GᵀG] + E[Λ_left ⊗ Λ_right])⁻¹`, `mean = E[τ] V E[G]ᵀ t`.
pub fn update_core_factor(state: &mut ModelState, mode: usize) -> Result<()> {
    let order = state.order();
    if mode >= order {
        return Err(Error::ModeOutOfRange { mode, order });
    }
    let stats = stats_for_chain(state, mode);
    let systems = slice_systems(state, mode, &stats);
    let tau = state.expected_tau();
    let prior = prior_precision_diag(state, mode);
    let (l, r) = {
        let d = state.cores.mean.core(mode).dims();
        (d[0], d[2])
    };
    let solved: Vec<Result<(Matrix, Matrix)>> = systems
        .into_par_iter()
        .map(|(gram, h)| {
            let mut a = gram * tau;
            for (k, p) in prior.iter().enumerate() {
                a[(k, k)] += p;
            }
            let v = spd_inverse(&a)?;
            let g = &v * h * tau;
            Ok((Matrix::from_column_slice(l, r, g.as_slice()), v))
        })
        .collect();
    let mut core = state.cores.mean.core(mode).clone();
    for (i, res) in solved.into_iter().enumerate() {
        let (mean, cov) = res.map_err(|e| match e {
            Error::NotSpd(msg) => Error::NotSpd(format!("mode {mode} slice {i}: {msg}")),
            other => other,
        })?;
        set_core_slice(&mut core, i, &mean);
        state.cores.cov[mode][i] = cov;
    }
    state.cores.mean.set_core(mode, core)?;
    Ok(())
}

/// Squared entries of core `mode` as a `(R_left, I, R_right)` array; with
/// `variance`, the marginal posterior variances are added (`E[g²]`).
fn squares(state: &ModelState, mode: usize, variance: bool) -> DenseTensor {
    let core = state.cores.mean.core(mode);
    let (l, ext, r) = (core.dims()[0], core.dims()[1], core.dims()[2]);
    let mut out = core.clone();
    let data = out.data_mut();
    for b in 0..r {
        for i in 0..ext {
            let v = &state.cores.cov[mode][i];
            for a in 0..l {
                let k = a + l * (i + ext * b);
                data[k] *= data[k];
                if variance {
                    data[k] += v[(a + l * b, a + l * b)];
                }
            }
        }
    }
    out
}

/// Per-component `(energy in core k, energy in core k+1)` for bond `k`.
/// `expected` selects `E[g²]` rather than squared means; `weighted` applies
/// the `E[λ]` of the neighbouring bonds.
fn bond_energies(state: &ModelState, bond: usize, expected: bool, weighted: bool) -> Vec<(f64, f64)> {
    let order = state.order();
    let next = (bond + 1) % order;
    let left_w = state.lambdas.mean(state.left_bond(bond));
    let right_w = state.lambdas.mean(next);
    let sq_k = squares(state, bond, expected);
    let sq_n = squares(state, next, expected);
    let (l, ik, rk) = (sq_k.dims()[0], sq_k.dims()[1], sq_k.dims()[2]);
    let (i_next, r_next) = (sq_n.dims()[1], sq_n.dims()[2]);
    (0..rk)
        .map(|comp| {
            let mut e_k = 0.0;
            for i in 0..ik {
                for a in 0..l {
                    let w = if weighted { left_w[a] } else { 1.0 };
                    e_k += w * sq_k.data()[a + l * (i + ik * comp)];
                }
            }
            let mut e_n = 0.0;
            for b in 0..r_next {
                let w = if weighted { right_w[b] } else { 1.0 };
                for i in 0..i_next {
                    e_n += w * sq_n.data()[comp + rk * (i + i_next * b)];
                }
            }
            (e_k, e_n)
        })
        .collect()
}

/// Gamma update for `q(λ^{(bond)})`:
/// `c̃ = c + ½(I_k R_left + I_{k+1} R_{k+2})`,
/// `d̃ = d + ¼(Σ E[λ_left] E[G_k(·,·,r)²] + Σ E[λ_{k+2}] E[G_{k+1}(r,·,·)²])`.
pub fn update_lambda(state: &mut ModelState, bond: usize) -> Result<()> {
    let order = state.order();
    if bond >= order {
        return Err(Error::ModeOutOfRange { mode: bond, order });
    }
    let next = (bond + 1) % order;
    let core_k = state.cores.mean.core(bond).dims().to_vec();
    let core_n = state.cores.mean.core(next).dims().to_vec();
    let count = (core_k[1] * core_k[0] + core_n[1] * core_n[2]) as f64;
    let energies = bond_energies(state, bond, true, true);
    for (comp, (e_k, e_n)) in energies.into_iter().enumerate() {
        state.lambdas.shape[bond][comp] = state.priors.c[bond][comp] + 0.5 * count;
        state.lambdas.rate[bond][comp] = state.priors.d[bond][comp] + 0.25 * (e_k + e_n);
    }
    Ok(())
}

/// `E[x̂_i²]` at one multi-index: `Trace(Π_n E[G_n(i_n) ⊗ G_n(i_n)])`.
pub fn expected_entry_square(state: &ModelState, index: &[usize]) -> f64 {
    let order = state.order();
    let mut acc: Option<Matrix> = None;
    for (k, &i) in index.iter().enumerate().take(order) {
        let core = state.cores.mean.core(k);
        let m = kron_moment(&expected_slice_moment(state, k, i), core.dims()[0], core.dims()[2]);
        acc = Some(match acc {
            None => m,
            Some(a) => a * m,
        });
    }
    acc.expect("order >= 2").trace()
}

/// Posterior-mean reconstruction at every observed entry, in mask order.
pub fn observed_means(state: &ModelState) -> Vec<f64> {
    let slices: Vec<Vec<Matrix>> = (0..state.order()).map(|k| state.cores.mean.slices(k)).collect();
    let shape = state.mask.shape();
    state
        .mask
        .linear()
        .par_iter()
        .map(|&lin| tr_entry(&slices, &shape.multi_index(lin)))
        .collect()
}

/// `Σ_{i∈O} E[x̂_i²]`.
pub fn expected_square_sum(state: &ModelState) -> f64 {
    let order = state.order();
    let last = order - 1;
    let stats = stats_for_chain(state, last);
    let all_last = mode_stats(state, last);
    let chain = chain_modes(order, last);
    let kron_f: Vec<&[Matrix]> = chain
        .iter()
        .map(|&k| stats[k].as_ref().expect("chain stats").kron.as_slice())
        .collect();
    let core = state.cores.mean.core(last);
    let (l, ext, r) = (core.dims()[0], core.dims()[1], core.dims()[2]);
    let parts: Vec<f64> = (0..ext)
        .into_par_iter()
        .map(|i| {
            let bucket = state.mask.bucket(last, i);
            if bucket.is_empty() {
                return 0.0;
            }
            let q = chain_sum(bucket.comp_flat(), chain.len(), None, &kron_f, r * r, l * l);
            (q * &all_last.kron[i]).trace()
        })
        .collect();
    parts.iter().sum()
}

/// `E[‖O ⊙ (T − X̂)‖²]`, evaluated as `Σ (t − E x̂)² + Σ (E[x̂²] − (E x̂)²)`,
/// which equals `Σ t² − 2 Σ t E x̂ + Σ E[x̂²]` without the cancellation.
pub fn expected_sq_residual(state: &ModelState) -> f64 {
    let means = observed_means(state);
    let obs = state.observations.data();
    let mut fit = 0.0;
    let mut mean_sq = 0.0;
    for (&lin, &m) in state.mask.linear().iter().zip(&means) {
        let d = obs[lin] - m;
        fit += d * d;
        mean_sq += m * m;
    }
    let variance = (expected_square_sum(state) - mean_sq).max(0.0);
    fit + variance
}

/// `ã = a + |O|/2`, `b̃ = b + ½ E[‖O ⊙ (T − X̂)‖²]`.
pub fn update_tau(state: &mut ModelState) -> Result<()> {
    let resid = expected_sq_residual(state);
    if !resid.is_finite() {
        return Err(Error::NonFinite(format!("expected residual is {resid}")));
    }
    state.tau.shape = state.priors.a + 0.5 * state.mask.len() as f64;
    state.tau.rate = state.priors.b + 0.5 * resid;
    Ok(())
}

/// Group power of each component of `bond`: energy of the posterior means of
/// `G_k(:, :, r)` plus `G_{k+1}(r, :, :)` divided by their element count.
pub fn component_powers(state: &ModelState, bond: usize) -> Vec<f64> {
    let order = state.order();
    let next = (bond + 1) % order;
    let dk = state.cores.mean.core(bond).dims().to_vec();
    let dn = state.cores.mean.core(next).dims().to_vec();
    let count = (dk[0] * dk[1] + dn[1] * dn[2]) as f64;
    bond_energies(state, bond, false, false)
        .into_iter()
        .map(|(a, b)| (a + b) / count)
        .collect()
}

/// Removes collapsed components of one bond; returns how many were removed.
pub fn prune_bond(state: &mut ModelState, bond: usize, threshold: f64, rule: PruneRule) -> Result<usize> {
    let order = state.order();
    if bond >= order {
        return Err(Error::ModeOutOfRange { mode: bond, order });
    }
    let rank = state.cores.mean.bond(bond);
    if rank <= 1 {
        return Ok(0);
    }
    let keep: Vec<usize> = match rule {
        PruneRule::Power => {
            let p = component_powers(state, bond);
            let max = p.iter().copied().fold(0.0, f64::max);
            (0..rank).filter(|&r| p[r] > threshold * max).collect()
        }
        PruneRule::Lambda => {
            let lam = state.lambdas.mean(bond);
            let min = lam.iter().copied().fold(f64::INFINITY, f64::min);
            (0..rank).filter(|&r| min / lam[r] >= threshold).collect()
        }
    };
    let keep = if keep.is_empty() {
        // keep the strongest component so the bond never vanishes
        let p = component_powers(state, bond);
        let best = (0..rank)
            .max_by(|&a, &b| p[a].total_cmp(&p[b]))
            .expect("rank >= 1");
        vec![best]
    } else {
        keep
    };
    if keep.len() == rank {
        return Ok(0);
    }
    remove_components(state, bond, &keep)?;
    Ok(rank - keep.len())
}

fn remove_components(state: &mut ModelState, bond: usize, keep: &[usize]) -> Result<()> {
    let order = state.order();
    let next = (bond + 1) % order;
    let mut cores = state.cores.mean.cores().to_vec();

    let (l, _, r) = dims3(&cores[bond]);
    let all_l: Vec<usize> = (0..l).collect();
    cores[bond] = select_core(&cores[bond], &all_l, keep)?;
    for v in state.cores.cov[bond].iter_mut() {
        *v = select_cov(v, l, &all_l, keep);
    }

    let (_, _, rn) = dims3(&cores[next]);
    let all_rn: Vec<usize> = (0..rn).collect();
    cores[next] = select_core(&cores[next], keep, &all_rn)?;
    for v in state.cores.cov[next].iter_mut() {
        *v = select_cov(v, r, keep, &all_rn);
    }

    state.cores.mean.replace(cores)?;
    let pick = |v: &Vec<f64>| keep.iter().map(|&k| v[k]).collect::<Vec<f64>>();
    state.lambdas.shape[bond] = pick(&state.lambdas.shape[bond]);
    state.lambdas.rate[bond] = pick(&state.lambdas.rate[bond]);
    state.priors.c[bond] = pick(&state.priors.c[bond]);
    state.priors.d[bond] = pick(&state.priors.d[bond]);
    Ok(())
}

fn dims3(t: &DenseTensor) -> (usize, usize, usize) {
    (t.dims()[0], t.dims()[1], t.dims()[2])
}

fn select_core(core: &DenseTensor, keep_l: &[usize], keep_r: &[usize]) -> Result<DenseTensor> {
    let (_, ext, _) = dims3(core);
    let shape = Shape::new(vec![keep_l.len(), ext, keep_r.len()])?;
    Ok(DenseTensor::from_fn(shape, |ix| {
        core.get(&[keep_l[ix[0]], ix[1], keep_r[ix[2]]])
    }))
}

/// Restricts a covariance over `vec` index `a + l b` to the kept `a`/`b`.
fn select_cov(v: &Matrix, l: usize, keep_l: &[usize], keep_r: &[usize]) -> Matrix {
    let idx: Vec<usize> = keep_r
        .iter()
        .flat_map(|&b| keep_l.iter().map(move |&a| a + l * b))
        .collect();
    Matrix::from_fn(idx.len(), idx.len(), |i, j| v[(idx[i], idx[j])])
}

/// Prunes every bond once.
pub fn prune_ranks(state: &mut ModelState, threshold: f64, rule: PruneRule) -> Result<usize> {
    let mut removed = 0;
    for bond in 0..state.order() {
        removed += prune_bond(state, bond, threshold, rule)?;
    }
    Ok(removed)
}

pub fn observed_rmse(state: &ModelState) -> f64 {
    let means = observed_means(state);
    let obs = state.observations.data();
    let sse: f64 = state
        .mask
        .linear()
        .iter()
        .zip(&means)
        .map(|(&lin, &m)| (obs[lin] - m).powi(2))
        .sum();
    (sse / state.mask.len().max(1) as f64).sqrt()
}

/// One full sweep: all cores, then each `λ` (pruning if `prune`), then `τ`.
pub fn sweep(state: &mut ModelState, config: &VbiConfig, prune: bool) -> Result<()> {
    let order = state.order();
    for mode in 0..order {
        update_core_factor(state, mode)?;
    }
    for bond in 0..order {
        update_lambda(state, bond)?;
        if prune {
            let removed = prune_bond(state, bond, config.prune_threshold, config.prune_rule)?;
            if removed > 0 {
                debug!("pruned {removed} component(s) from bond {bond}");
            }
        }
    }
    update_tau(state)
}

fn check_finite(state: &ModelState) -> Result<()> {
    let bad_core = state
        .cores
        .mean
        .cores()
        .iter()
        .any(|c| c.data().iter().any(|v| !v.is_finite()));
    let bad_cov = state
        .cores
        .cov
        .iter()
        .flatten()
        .any(|v| v.iter().any(|x| !x.is_finite()));
    let tau = state.expected_tau();
    if bad_core || bad_cov || !tau.is_finite() {
        return Err(Error::NonFinite(format!(
            "iteration {}: ranks {:?}, E[tau] {tau}, non-finite cores: {bad_core}, non-finite covariances: {bad_cov}",
            state.iteration,
            state.bonds()
        )));
    }
    Ok(())
}

/// Continues inference from `state` for at most `config.max_iters` sweeps.
pub fn fit_from(state: ModelState, config: &VbiConfig) -> Result<(ModelState, FitTrace)> {
    fit_observed(state, config, |_, _| {})
}

/// [`fit_from`], calling `observe` after every sweep.
pub fn fit_observed(
    mut state: ModelState,
    config: &VbiConfig,
    mut observe: impl FnMut(&ModelState, &IterRecord),
) -> Result<(ModelState, FitTrace)> {
    let mut trace = FitTrace::default();
    let mut prev_tau = state.expected_tau();
    let mut prev_ranks = state.bonds();
    let mut calm = 0;
    for _ in 0..config.max_iters {
        let prune = state.iteration >= config.burn_in;
        sweep(&mut state, config, prune)?;
        state.iteration += 1;
        check_finite(&state)?;
        let e_tau = state.expected_tau();
        trace.records.push(IterRecord {
            iter: state.iteration,
            e_tau,
            ranks: state.bonds(),
            obs_rmse: observed_rmse(&state),
        });
        observe(&state, trace.records.last().expect("just pushed"));
        debug!(
            "iter {} E[tau]={e_tau:.6e} ranks={:?}",
            state.iteration,
            state.bonds()
        );
        let ranks = state.bonds();
        if ((e_tau - prev_tau) / e_tau).abs() < config.tol && ranks == prev_ranks {
            calm += 1;
        } else {
            calm = 0;
        }
        if calm >= config.patience.max(1) {
            trace.converged = true;
            break;
        }
        prev_tau = e_tau;
        prev_ranks = ranks;
    }
    Ok((state, trace))
}

/// Initial state for `config`: random cores at `r_init`, and `E[τ]` from
/// `init_snr` when set.
pub fn init_from_config(t: &DenseTensor, mask: &IndexSet, config: &VbiConfig) -> Result<ModelState> {
    let r_init = config.resolved_r_init(t.dims());
    let mut state = init_state(t, mask, r_init, &config.priors, config.seed)?;
    if let Some(snr) = config.init_snr {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::Config(format!("init_snr must be positive, got {snr}")));
        }
        let ms = mask.linear().iter().map(|&l| t.data()[l].powi(2)).sum::<f64>() / mask.len() as f64;
        if ms > 0.0 {
            state.tau = Gamma::new(state.priors.a, state.priors.a * ms / snr);
        }
    }
    Ok(state)
}

/// Initializes from `config` and runs inference.
pub fn fit(t: &DenseTensor, mask: &IndexSet, config: &VbiConfig) -> Result<(ModelState, FitTrace)> {
    fit_from(init_from_config(t, mask, config)?, config)
}

/// Posterior-mean reconstruction, optionally with observed entries restored.
pub fn complete(state: &ModelState, overwrite_observed: bool) -> DenseTensor {
    let mut x = expected_reconstruction(state);
    if overwrite_observed {
        let obs = state.observations.data();
        let data = x.data_mut();
        for &lin in state.mask.linear() {
            data[lin] = obs[lin];
        }
    }
    x
}
