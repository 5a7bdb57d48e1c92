//! Synthetic data, masking, recovery metrics and experiment sweeps.

use std::io::Write;
use std::time::Instant;

use log::warn;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::als::{broadcast_ranks, tr_als_fit, AlsConfig};
use crate::config::{apply_vbi_key, parse_kv, parse_list, parse_value};
use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::ring::{tr_reconstruct, TrCores};
use crate::tensor::{DenseTensor, Shape};
use crate::vbi::{self, VbiConfig};

/// Reported PSNR when the reconstruction is exact.
pub const PSNR_SENTINEL: f64 = 999.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub clean: DenseTensor,
    pub noisy: DenseTensor,
    pub cores: TrCores,
}

/// Exact TR tensor from standard-normal cores, plus Gaussian noise at
/// `snr_db = 10 log10(var(signal) / var(noise))`.
///
/// The noise draw is rescaled so that its empirical variance hits the target
/// ratio exactly.
pub fn gen_synthetic(dims: &[usize], ranks: &[usize], snr_db: Option<f64>, seed: u64) -> Result<Synthetic> {
    let ranks = broadcast_ranks(ranks, dims.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores = TrCores::random(dims, &ranks, &mut rng)?;
    let clean = tr_reconstruct(&cores)?;
    let noisy = match snr_db {
        None => clean.clone(),
        Some(snr) => {
            if !snr.is_finite() {
                return Err(Error::Config(format!("SNR must be finite, got {snr}")));
            }
            let noise: Vec<f64> = (0..clean.numel()).map(|_| rng.sample(StandardNormal)).collect();
            let target = variance(clean.data()) / 10f64.powf(snr / 10.0);
            let scale = (target / variance(&noise)).sqrt();
            let data = clean
                .data()
                .iter()
                .zip(&noise)
                .map(|(x, e)| x + scale * e)
                .collect();
            DenseTensor::from_vec(clean.shape().clone(), data)?
        }
    };
    Ok(Synthetic { clean, noisy, cores })
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Uniformly samples `round((1 - mr) · numel)` observed entries.
pub fn sample_mask(shape: &Shape, mr: f64, seed: u64) -> Result<IndexSet> {
    if !(0.0..1.0).contains(&mr) {
        return Err(Error::Config(format!("missing ratio must lie in [0, 1), got {mr}")));
    }
    let total = shape.numel();
    let count = ((1.0 - mr) * total as f64).round() as usize;
    if count == 0 {
        return Err(Error::Unusable(format!(
            "missing ratio {mr} leaves no observed entries out of {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let linear = sample(&mut rng, total, count).into_vec();
    IndexSet::from_linear(shape.clone(), linear)
}

pub fn rse(est: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    check_shapes(est, truth)?;
    let denom = truth.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::UndefinedMetric("RSE of an all-zero reference".into()));
    }
    let num: f64 = est
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

/// `10 log10(max_val² / MSE)`; [`PSNR_SENTINEL`] when `MSE = 0`.
pub fn psnr(est: &DenseTensor, truth: &DenseTensor, max_val: f64) -> Result<f64> {
    check_shapes(est, truth)?;
    let mse = est
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / est.numel() as f64;
    if mse == 0.0 {
        return Ok(PSNR_SENTINEL);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}

fn check_shapes(a: &DenseTensor, b: &DenseTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{} vs {}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `AIR` is the mean over runs of each run's mean rank; `Var` is the mean over
/// runs of each run's (sample) standard deviation.
pub fn air_var(rank_lists: &[Vec<usize>]) -> Result<(f64, f64)> {
    if rank_lists.is_empty() || rank_lists.iter().any(|r| r.is_empty()) {
        return Err(Error::UndefinedMetric("AIR needs at least one non-empty run".into()));
    }
    let runs = rank_lists.len() as f64;
    let mut air = 0.0;
    let mut var = 0.0;
    for ranks in rank_lists {
        let (m, s) = mean_std(ranks);
        air += m;
        var += s;
    }
    Ok((air / runs, var / runs))
}

fn mean_std(ranks: &[usize]) -> (f64, f64) {
    let n = ranks.len() as f64;
    let mean = ranks.iter().map(|&r| r as f64).sum::<f64>() / n;
    if ranks.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = ranks.iter().map(|&r| (r as f64 - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Rank determination succeeds when `R - 0.25 <= AIR <= R + 0.25`.
pub fn rank_success(air: f64, true_rank: f64) -> bool {
    (true_rank - 0.25..=true_rank + 0.25).contains(&air)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "tr-vbi")]
    TrVbi,
    #[serde(rename = "tr-als")]
    TrAls,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::TrVbi => "tr-vbi",
            Method::TrAls => "tr-als",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tr-vbi" => Ok(Method::TrVbi),
            "tr-als" => Ok(Method::TrAls),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: Method,
    pub dims: Vec<usize>,
    pub ranks_true: Vec<usize>,
    pub r_init: Option<usize>,
    pub mr: f64,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub ranks_inferred: Vec<usize>,
    pub rse: f64,
    pub psnr: f64,
    pub air: Option<f64>,
    pub var: Option<f64>,
    pub iterations: usize,
    pub wall_s: f64,
}

pub const CSV_HEADER: [&str; 14] = [
    "method",
    "dims",
    "ranks_true",
    "r_init",
    "mr",
    "snr_db",
    "seed",
    "ranks_inferred",
    "rse",
    "psnr",
    "air",
    "var",
    "iters",
    "wall_s",
];

fn join(v: &[usize], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

impl ExperimentRecord {
    /// Fields in [`CSV_HEADER`] order; lists are `x`-joined (dims) or
    /// `-`-joined (ranks), absent values are empty.
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.method.name().to_string(),
            join(&self.dims, "x"),
            join(&self.ranks_true, "-"),
            self.r_init.map(|r| r.to_string()).unwrap_or_default(),
            self.mr.to_string(),
            self.snr_db.map(|s| s.to_string()).unwrap_or_else(|| "none".into()),
            self.seed.to_string(),
            join(&self.ranks_inferred, "-"),
            self.rse.to_string(),
            self.psnr.to_string(),
            opt(self.air),
            opt(self.var),
            self.iterations.to_string(),
            format!("{:.6}", self.wall_s),
        ]
    }
}

pub fn write_csv<W: Write>(w: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for r in records {
        wtr.write_record(r.csv_fields())?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    pub ranks_true: Vec<usize>,
    pub mrs: Vec<f64>,
    pub snrs: Vec<Option<f64>>,
    pub reps: usize,
    pub seed: u64,
    /// Restore observed entries before scoring.
    pub overwrite_observed: bool,
    pub vbi: VbiConfig,
    pub als: AlsConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            methods: Vec::new(),
            dims: Vec::new(),
            ranks_true: Vec::new(),
            mrs: Vec::new(),
            snrs: vec![None],
            reps: 10,
            seed: 0,
            overwrite_observed: false,
            vbi: VbiConfig::default(),
            als: AlsConfig::default(),
        }
    }
}

impl SweepSpec {
    /// Keys: `methods`, `dims`, `ranks_true`, `mr`, `snr_db` (use `none` for
    /// noiseless), `reps`, `seed`, `overwrite_observed`, `ridge`,
    /// `als_max_iters`, `als_tol`, plus every VBI key (`r_init`, `max_iters`, ...).
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut spec = SweepSpec::default();
        for (k, v) in parse_kv(text)? {
            match k.as_str() {
                "methods" => spec.methods = parse_list(&k, &v)?,
                "dims" => spec.dims = parse_list(&k, &v)?,
                "ranks_true" => spec.ranks_true = parse_list(&k, &v)?,
                "mr" => spec.mrs = parse_list(&k, &v)?,
                "snr_db" => {
                    spec.snrs = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| if s == "none" { Ok(None) } else { parse_value(&k, s).map(Some) })
                        .collect::<Result<_>>()?
                }
                "reps" => spec.reps = parse_value(&k, &v)?,
                "seed" => spec.seed = parse_value(&k, &v)?,
                "overwrite_observed" => spec.overwrite_observed = crate::config::parse_bool(&k, &v)?,
                "ridge" => spec.als.ridge = parse_value(&k, &v)?,
                "als_max_iters" => spec.als.max_iters = parse_value(&k, &v)?,
                "als_tol" => spec.als.tol = parse_value(&k, &v)?,
                _ => {
                    if !apply_vbi_key(&mut spec.vbi, &k, &v)? {
                        return Err(Error::Config(format!("unknown sweep key {k}")));
                    }
                }
            }
        }
        Ok(spec)
    }

    /// `(method, mr, snr)` cells in a fixed order.
    pub fn cells(&self) -> Vec<(Method, f64, Option<f64>)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            for &mr in &self.mrs {
                for &snr in &self.snrs {
                    out.push((m, mr, snr));
                }
            }
        }
        out
    }
}

/// Seed for one repetition of one data condition. Methods share it so they
/// see identical data.
pub fn derive_seed(master: u64, condition: u64, rep: u64) -> u64 {
    // splitmix64 over the packed inputs
    let mut z = master
        .wrapping_add(condition.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(rep.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one method on one synthetic problem.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    method: Method,
    dims: &[usize],
    ranks_true: &[usize],
    mr: f64,
    snr_db: Option<f64>,
    seed: u64,
    vbi_cfg: &VbiConfig,
    als_cfg: &AlsConfig,
    overwrite_observed: bool,
) -> Result<ExperimentRecord> {
    let start = Instant::now();
    let ranks_true = broadcast_ranks(ranks_true, dims.len())?;
    let data = gen_synthetic(dims, &ranks_true, snr_db, seed)?;
    let shape = data.clean.shape().clone();
    let mask = sample_mask(&shape, mr, derive_seed(seed, 1, 0))?;
    let method_seed = derive_seed(seed, 2, 0);
    let (mut est, ranks_inferred, iterations, r_init) = match method {
        Method::TrVbi => {
            let cfg = VbiConfig {
                seed: method_seed,
                ..vbi_cfg.clone()
            };
            let r_init = cfg.resolved_r_init(dims);
            let (state, trace) = vbi::fit(&data.noisy, &mask, &cfg)?;
            let est = vbi::complete(&state, false);
            (est, state.bonds(), trace.records.len(), Some(r_init))
        }
        Method::TrAls => {
            let cfg = AlsConfig {
                seed: method_seed,
                ..als_cfg.clone()
            };
            let fit = tr_als_fit(&data.noisy, &mask, &ranks_true, &cfg)?;
            (tr_reconstruct(&fit.cores)?, ranks_true.clone(), fit.iters, None)
        }
    };
    if overwrite_observed {
        let noisy = data.noisy.data();
        let e = est.data_mut();
        for &lin in mask.linear() {
            e[lin] = noisy[lin];
        }
    }
    let peak = data.clean.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (air, var) = match method {
        Method::TrVbi => {
            let (a, v) = air_var(std::slice::from_ref(&ranks_inferred))?;
            (Some(a), Some(v))
        }
        Method::TrAls => (None, None),
    };
    Ok(ExperimentRecord {
        method,
        dims: dims.to_vec(),
        ranks_true,
        r_init,
        mr,
        snr_db,
        seed,
        ranks_inferred,
        rse: rse(&est, &data.clean)?,
        psnr: psnr(&est, &data.clean, peak)?,
        air,
        var,
        iterations,
        wall_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every cell `reps` times in a work pool. A failing run still yields a
/// row, with `NaN` metrics, and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Vec<ExperimentRecord> {
    let cells = spec.cells();
    let conditions: Vec<(f64, Option<f64>)> = spec
        .mrs
        .iter()
        .flat_map(|&mr| spec.snrs.iter().map(move |&s| (mr, s)))
        .collect();
    let jobs: Vec<(Method, f64, Option<f64>, u64)> = cells
        .iter()
        .flat_map(|&(m, mr, snr)| {
            let cond = conditions
                .iter()
                .position(|&(a, b)| a == mr && b == snr)
                .expect("condition of a cell") as u64;
            (0..spec.reps as u64).map(move |rep| (m, mr, snr, derive_seed(spec.seed, cond, rep)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(method, mr, snr, seed)| {
            run_cell(
                method,
                &spec.dims,
                &spec.ranks_true,
                mr,
                snr,
                seed,
                &spec.vbi,
                &spec.als,
                spec.overwrite_observed,
            )
            .unwrap_or_else(|e| {
                warn!("{} mr={mr} snr={snr:?} seed={seed} failed: {e}", method.name());
                ExperimentRecord {
                    method,
                    dims: spec.dims.clone(),
                    ranks_true: spec.ranks_true.clone(),
                    r_init: spec.vbi.r_init,
                    mr,
                    snr_db: snr,
                    seed,
                    ranks_inferred: Vec::new(),
                    rse: f64::NAN,
                    psnr: f64::NAN,
                    air: None,
                    var: None,
                    iterations: 0,
                    wall_s: 0.0,
                }
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub mr: f64,
    pub snr_db: Option<f64>,
    pub runs: usize,
    pub rse_mean: f64,
    pub rse_std: f64,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub air: Option<f64>,
    pub var: Option<f64>,
}

/// Mean ± std per `(method, mr, snr)`, skipping failed runs.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(Method, f64, Option<f64>)> = Vec::new();
    for r in records {
        let k = (r.method, r.mr, r.snr_db);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, mr, snr_db)| {
            let group: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.method == method && r.mr == mr && r.snr_db == snr_db && r.rse.is_finite())
                .collect();
            let stat = |f: &dyn Fn(&ExperimentRecord) -> f64| {
                let v: Vec<f64> = group.iter().map(|r| f(r)).collect();
                let n = v.len().max(1) as f64;
                let m = v.iter().sum::<f64>() / n;
                let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
                (m, s)
            };
            let (rse_mean, rse_std) = stat(&|r| r.rse);
            let (psnr_mean, psnr_std) = stat(&|r| r.psnr);
            let (air, var) = if method == Method::TrVbi && !group.is_empty() {
                let runs: Vec<Vec<usize>> = group.iter().map(|r| r.ranks_inferred.clone()).collect();
                air_var(&runs).map(|(a, v)| (Some(a), Some(v))).unwrap_or((None, None))
            } else {
                (None, None)
            };
            CellSummary {
                method,
                mr,
                snr_db,
                runs: group.len(),
                rse_mean,
                rse_std,
                psnr_mean,
                psnr_std,
                air,
                var,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_is_clean() {
        let s = gen_synthetic(&[3, 4, 5], &[2], None, 1).unwrap();
        assert_eq!(s.noisy, s.clean);
        assert_eq!(s.cores.ranks(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn zero_db_matches_variance() {
        let s = gen_synthetic(&[10, 10, 10, 10], &[3], Some(0.0), 2).unwrap();
        let noise: Vec<f64> = s.noisy.data().iter().zip(s.clean.data()).map(|(a, b)| a - b).collect();
        let ratio = variance(s.clean.data()) / variance(&noise);
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn mask_counts_and_replay() {
        let shape = Shape::new(vec![10, 10, 10, 10]).unwrap();
        assert_eq!(sample_mask(&shape, 0.0, 1).unwrap().len(), 10_000);
        let m = sample_mask(&shape, 0.9, 1).unwrap();
        assert_eq!(m.len(), 1000);
        assert_eq!(sample_mask(&shape, 0.9, 1).unwrap(), m);
        assert_ne!(sample_mask(&shape, 0.9, 2).unwrap(), m);
        let tiny = Shape::new(vec![2, 2]).unwrap();
        assert!(sample_mask(&tiny, 0.95, 1).is_err());
        assert!(sample_mask(&tiny, 1.0, 1).is_err());
    }

    #[test]
    fn metric_special_cases() {
        let shape = Shape::new(vec![2, 3]).unwrap();
        let x = DenseTensor::from_fn(shape.clone(), |i| 1.0 + (i[0] * 3 + i[1]) as f64);
        assert_eq!(rse(&x, &x).unwrap(), 0.0);
        assert_eq!(psnr(&x, &x, 1.0).unwrap(), PSNR_SENTINEL);
        assert!((rse(&x.scaled(2.0), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(rse(&x, &DenseTensor::zeros(shape)).is_err());
    }

    #[test]
    fn air_var_cases() {
        let (a, v) = air_var(&vec![vec![3, 3, 3, 3]; 10]).unwrap();
        assert_eq!((a, v), (3.0, 0.0));
        assert!(rank_success(a, 3.0));
        let runs: Vec<Vec<usize>> = (0..10).map(|k| vec![if k % 2 == 0 { 2 } else { 4 }; 4]).collect();
        assert_eq!(air_var(&runs).unwrap(), (3.0, 0.0));
        assert!(air_var(&[]).is_err());
    }

    #[test]
    fn empty_sweep_writes_header_only() {
        let spec = SweepSpec::from_kv("").unwrap();
        let recs = run_sweep(&spec);
        assert!(recs.is_empty());
        let mut buf = Vec::new();
        write_csv(&mut buf, &recs).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,dims,ranks_true,r_init,mr,snr_db,seed,ranks_inferred,rse,psnr,air,var,iters,wall_s\n"
        );
    }

    #[test]
    fn sweep_spec_parses() {
        let spec = SweepSpec::from_kv(
            "methods=tr-vbi,tr-als\ndims=4,4,4\nranks_true=2\nmr=0.1,0.3\nsnr_db=20,none\nreps=3\nr_init=4\nmax_iters=5\n",
        )
        .unwrap();
        assert_eq!(spec.cells().len(), 8);
        assert_eq!(spec.snrs, vec![Some(20.0), None]);
        assert_eq!(spec.vbi.r_init, Some(4));
        assert!(SweepSpec::from_kv("methods=svd").is_err());
    }
}
