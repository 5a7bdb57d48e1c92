//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and seeds are fixed below.

mod common;

use std::sync::Mutex;
use std::time::Instant;

use common::*;
use rand::Rng;
use trvbi::als::{tr_als_fit, tr_als_step_oracle, AlsConfig};
use trvbi::bench::{air_var, derive_seed, gen_synthetic, psnr, rse, sample_mask};
use trvbi::image_io::{detensorize, load_image, mean_fill, tensorize};
use trvbi::index::IndexSet;
use trvbi::linalg::{commutation_matrix, kron_moment, kron_moment_via_commutation, Matrix, Vector};
use trvbi::model::{init_state, save_checkpoint, Gamma, ModelState, PriorConfig};
use trvbi::ring::{all_slices, subchain_row, tcp, tr_entry, tr_reconstruct, TrCores};
use trvbi::tensor::{tensor_permute, ten, vec, DenseTensor, Shape};
use trvbi::vbi::{
    self, expected_entry_square, expected_subchain_gram, observed_rmse, update_core_factor, update_lambda,
    update_tau, FitTrace, VbiConfig,
};

const ALGEBRA_TRIALS: usize = 1000;
const ALGEBRA_TOL: f64 = 1e-12;
const ALGEBRA_SECS: f64 = 10.0;
const MC_DRAWS: usize = 100_000;
const MC_REL_TOL: f64 = 0.02;
const MC_SECS: f64 = 60.0;
const ORACLE_TOL: f64 = 1e-10;
const CLOSED_FORM_TOL: f64 = 1e-12;
const RANK_SEEDS: u64 = 10;
const RANK_BAND: f64 = 0.25;
const RANK_VAR_MAX: f64 = 0.5;
const RANK_SECS: f64 = 600.0;
const NOISELESS_RMSE: f64 = 1e-6;
const RSE_MARGIN: f64 = 0.02;
const IMAGE_GAIN_DB: f64 = 5.0;
const IMAGE_SECS: f64 = 900.0;
const STORAGE_FACTOR: f64 = 2.0;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Per-sweep invariant violations collected from every acceptance fit.
struct InvariantLog {
    runs: usize,
    sweeps: usize,
    violations: Vec<String>,
}

static LOG: Mutex<InvariantLog> = Mutex::new(InvariantLog {
    runs: 0,
    sweeps: 0,
    violations: Vec::new(),
});

fn sweep_violations(s: &ModelState, prev: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    let ranks = s.bonds();
    if ranks.iter().zip(prev).any(|(r, p)| r > p) {
        out.push(format!("iter {}: ranks grew {prev:?} -> {ranks:?}", s.iteration));
    }
    if let Err(e) = s.check_invariants() {
        out.push(format!("iter {}: {e}", s.iteration));
    }
    if s.tau.rate < s.priors.b {
        out.push(format!("iter {}: tau rate {} < b", s.iteration, s.tau.rate));
    }
    for b in 0..s.order() {
        if s.lambdas.rate[b].iter().zip(&s.priors.d[b]).any(|(r, d)| r < d) {
            out.push(format!("iter {}: lambda rate below prior on bond {b}", s.iteration));
        }
    }
    out
}

/// Fits with invariant checks after every sweep.
fn checked_fit(t: &DenseTensor, mask: &IndexSet, cfg: &VbiConfig) -> (ModelState, FitTrace) {
    let init = vbi::init_from_config(t, mask, cfg).expect("init");
    let mut prev = init.bonds();
    let mut bad = Vec::new();
    let mut sweeps = 0;
    let result = vbi::fit_observed(init, cfg, |s, _| {
        bad.extend(sweep_violations(s, &prev));
        prev = s.bonds();
        sweeps += 1;
    })
    .expect("fit");
    let mut log = LOG.lock().unwrap();
    log.runs += 1;
    log.sweeps += sweeps;
    log.violations.extend(bad);
    result
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn trace_entry(cores: &TrCores, idx: &[usize]) -> f64 {
    let mut acc = Matrix::identity(cores.core(0).dims()[0], cores.core(0).dims()[0]);
    for (k, &i) in idx.iter().enumerate() {
        let c = cores.core(k);
        let (r0, ext) = (c.dims()[0], c.dims()[1]);
        acc *= Matrix::from_fn(r0, c.dims()[2], |a, b| c.data()[a + r0 * i + r0 * ext * b]);
    }
    acc.trace()
}

fn algebra() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..ALGEBRA_TRIALS {
        let order = r.random_range(2..=5);
        let dims: Vec<usize> = (0..order).map(|_| r.random_range(1..=4)).collect();
        let ranks: Vec<usize> = (0..order).map(|_| r.random_range(1..=3)).collect();
        let cores = TrCores::random(&dims, &ranks, &mut r).unwrap();
        let x = tr_reconstruct(&cores).unwrap();
        let shape = x.shape().clone();
        for lin in 0..shape.numel() {
            worst = worst.max((x.data()[lin] - trace_entry(&cores, &shape.multi_index(lin))).abs());
        }
        let shift = r.random_range(0..order);
        let lhs = tensor_permute(&x, shift).unwrap();
        worst = worst.max(lhs.max_abs_diff(&tr_reconstruct(&cores.rotated(shift)).unwrap()).unwrap());
        if order >= 3 {
            let split = r.random_range(1..order);
            let cs = cores.cores();
            let joined = tcp(&[tcp(&cs[..split]).unwrap(), tcp(&cs[split..]).unwrap()]).unwrap();
            worst = worst.max(tcp(cs).unwrap().max_abs_diff(&joined).unwrap());
        }
        worst = worst.max(ten(&vec(&x), &shape).unwrap().max_abs_diff(&x).unwrap());
        let (m, n) = (dims[0] * ranks[0], dims[1]);
        let a = Matrix::from_fn(m, n, |_, _| r.random::<f64>() - 0.5);
        let ka = commutation_matrix(m, n) * Matrix::from_column_slice(m * n, 1, a.as_slice());
        worst = worst.max((ka - Matrix::from_column_slice(m * n, 1, a.transpose().as_slice())).amax());
        let (r0, r1) = (ranks[0], ranks[1 % order]);
        let s = random_spd(r0 * r1, 1.0, &mut r);
        worst = worst.max((kron_moment(&s, r0, r1) - kron_moment_via_commutation(&s, r0, r1)).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst < ALGEBRA_TOL && secs < ALGEBRA_SECS,
        detail: format!("{ALGEBRA_TRIALS} trials, max abs error {worst:.2e}, {secs:.2} s"),
    }
}

fn moments() -> Outcome {
    let start = Instant::now();
    let s = random_state(&[2, 2, 2], 2, 1.0, 11, 0.3);
    let mut r = rng(99);
    let shape = s.observations.shape().clone();
    let mut grams = vec![vec![Matrix::zeros(4, 4); 2]; 3];
    let mut squares = vec![0.0; shape.numel()];
    for _ in 0..MC_DRAWS {
        let slices = all_slices(&sample_cores(&s, &mut r));
        for (mode, g) in grams.iter_mut().enumerate() {
            for (slice, acc) in g.iter_mut().enumerate() {
                let bucket = s.mask.bucket(mode, slice);
                for e in 0..bucket.len() {
                    let row = Vector::from_vec(subchain_row(&slices, mode, bucket.comp(e)));
                    acc.ger(1.0, &row, &row, 1.0);
                }
            }
        }
        for (lin, sq) in squares.iter_mut().enumerate() {
            *sq += tr_entry(&slices, &shape.multi_index(lin)).powi(2);
        }
    }
    let mut worst_gram: f64 = 0.0;
    for mode in 0..3 {
        for slice in 0..2 {
            let mc = &grams[mode][slice] / MC_DRAWS as f64;
            let exact = expected_subchain_gram(&s, mode, slice);
            worst_gram = worst_gram.max((mc - &exact).norm() / exact.norm());
        }
    }
    let mut worst_sq: f64 = 0.0;
    for (lin, sq) in squares.iter().enumerate() {
        let exact = expected_entry_square(&s, &shape.multi_index(lin));
        worst_sq = worst_sq.max((sq / MC_DRAWS as f64 - exact).abs() / exact);
    }
    let mut z = s.clone();
    zero_covariances(&mut z);
    let slices = all_slices(&z.cores.mean);
    let mut worst_det: f64 = 0.0;
    for mode in 0..3 {
        for slice in 0..2 {
            let bucket = z.mask.bucket(mode, slice);
            let mut g = Matrix::zeros(4, 4);
            for e in 0..bucket.len() {
                let row = Vector::from_vec(subchain_row(&slices, mode, bucket.comp(e)));
                g.ger(1.0, &row, &row, 1.0);
            }
            worst_det = worst_det.max((expected_subchain_gram(&z, mode, slice) - g).amax());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst_gram < MC_REL_TOL && worst_sq < MC_REL_TOL && worst_det < 1e-12 && secs < MC_SECS,
        detail: format!(
            "gram rel {worst_gram:.4}, E[x^2] rel {worst_sq:.4}, zero-cov {worst_det:.1e}, {secs:.1} s"
        ),
    }
}

fn update_formulas() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let t = DenseTensor::zeros(Shape::new(vec![10, 10, 10]).unwrap());
    let mut s = init_state(&t, &IndexSet::full(t.shape().clone()), 3, &PriorConfig::default(), 0).unwrap();
    update_lambda(&mut s, 0).unwrap();
    let c_ok = s.lambdas.shape[0].iter().all(|&c| c == 1e-7 + 30.0);
    pass &= c_ok;
    notes.push(format!("c~ exact {c_ok}"));

    let t = DenseTensor::zeros(Shape::new(vec![10, 20]).unwrap());
    let mask = IndexSet::from_linear(t.shape().clone(), (0..100).map(|k| 2 * k).collect()).unwrap();
    let mut s = init_state(&t, &mask, 2, &PriorConfig::default(), 0).unwrap();
    update_tau(&mut s).unwrap();
    let a_ok = s.tau.shape == 50.0 + 1e-7;
    pass &= a_ok;
    notes.push(format!("a~ exact {a_ok}"));

    let mut worst_scalar: f64 = 0.0;
    for seed in 0..20 {
        let mut s = random_state(&[3, 4], 1, 1.0, seed, 0.5);
        let tau = s.expected_tau();
        let prior = s.lambdas.mean(0)[0] * s.lambdas.mean(1)[0];
        let h = s.cores.mean.core(1).data().to_vec();
        let hv: Vec<f64> = s.cores.cov[1].iter().map(|c| c[(0, 0)]).collect();
        let want: Vec<f64> = (0..3)
            .map(|i| {
                let num: f64 = (0..4).map(|j| s.observations.get(&[i, j]) * h[j]).sum();
                let den: f64 = (0..4).map(|j| h[j] * h[j] + hv[j]).sum();
                tau * num / (tau * den + prior)
            })
            .collect();
        update_core_factor(&mut s, 0).unwrap();
        for (g, w) in s.cores.mean.core(0).data().iter().zip(&want) {
            worst_scalar = worst_scalar.max((g - w).abs() / w.abs().max(1.0));
        }
    }
    pass &= worst_scalar < CLOSED_FORM_TOL;
    notes.push(format!("scalar ridge {worst_scalar:.1e}"));

    let mut worst_als: f64 = 0.0;
    let mut r = rng(7);
    for trial in 0..30 {
        let dims: Vec<usize> = (0..3).map(|_| r.random_range(1..=4)).collect();
        let rank = r.random_range(1..=2);
        let mut s = random_state(&dims, rank, 0.7, trial, 1.0);
        zero_covariances(&mut s);
        s.tau = Gamma::new(3.0, 3.0);
        let lam: f64 = r.random_range(0.1..2.0);
        for b in 0..3 {
            for c in 0..rank {
                s.lambdas.shape[b][c] = lam;
                s.lambdas.rate[b][c] = 1.0;
            }
        }
        for mode in 0..3 {
            let want = tr_als_step_oracle(&s.cores.mean, &s.observations, &s.mask, mode, lam * lam).unwrap();
            let mut u = s.clone();
            update_core_factor(&mut u, mode).unwrap();
            worst_als = worst_als.max(want.max_abs_diff(u.cores.mean.core(mode)).unwrap());
        }
    }
    pass &= worst_als < ORACLE_TOL;
    notes.push(format!("ALS oracle {worst_als:.1e}"));
    Outcome {
        pass,
        detail: notes.join(", "),
    }
}

fn rank_recovery() -> Outcome {
    let start = Instant::now();
    let mut runs = Vec::new();
    for seed in 0..RANK_SEEDS {
        let data = gen_synthetic(&[10, 10, 10, 10], &[3], Some(20.0), 100 + seed).unwrap();
        let mask = sample_mask(data.clean.shape(), 0.1, 200 + seed).unwrap();
        let cfg = VbiConfig {
            r_init: Some(8),
            max_iters: 400,
            tol: 0.0,
            seed,
            ..VbiConfig::default()
        };
        let (s, _) = checked_fit(&data.noisy, &mask, &cfg);
        runs.push(s.bonds());
    }
    let (air, var) = air_var(&runs).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: (air - 3.0).abs() <= RANK_BAND && var <= RANK_VAR_MAX && secs < RANK_SECS,
        detail: format!("AIR {air:.3}, Var {var:.3}, ranks {runs:?}, {secs:.0} s"),
    }
}

fn noiseless_run(data_seed: u64, method_seed: u64) -> (Vec<usize>, f64, usize) {
    let data = gen_synthetic(&[6, 6, 6], &[2], None, data_seed).unwrap();
    let mask = IndexSet::full(data.clean.shape().clone());
    let cfg = VbiConfig {
        r_init: Some(5),
        max_iters: 200,
        seed: method_seed,
        ..VbiConfig::default()
    };
    let (s, trace) = checked_fit(&data.noisy, &mask, &cfg);
    (s.bonds(), observed_rmse(&s), trace.records.len())
}

fn noiseless() -> Outcome {
    let (ranks, rmse, iters) = noiseless_run(0, 0);
    let pass = ranks == vec![2, 2, 2] && rmse < NOISELESS_RMSE && iters <= 200;
    let others = (1..10).filter(|&s| {
        let (r, e, _) = noiseless_run(s, s);
        r == vec![2, 2, 2] && e < NOISELESS_RMSE
    });
    Outcome {
        pass,
        detail: format!(
            "ranks {ranks:?}, RMSE {rmse:.2e}, {iters} sweeps (seeds 1-9 for reference: {}/9 recover)",
            others.count()
        ),
    }
}

fn completion_quality() -> Outcome {
    let mrs = [0.1, 0.3, 0.5];
    let mut vbi_med = Vec::new();
    let mut als_med = Vec::new();
    for (c, &mr) in mrs.iter().enumerate() {
        let (mut v, mut a) = (Vec::new(), Vec::new());
        for rep in 0..10 {
            let seed = derive_seed(600, c as u64, rep);
            let data = gen_synthetic(&[10, 10, 10, 10], &[3], Some(30.0), seed).unwrap();
            let mask = sample_mask(data.clean.shape(), mr, derive_seed(seed, 1, 0)).unwrap();
            let cfg = VbiConfig {
                r_init: Some(6),
                seed: rep,
                ..VbiConfig::default()
            };
            let (s, _) = checked_fit(&data.noisy, &mask, &cfg);
            v.push(rse(&vbi::complete(&s, false), &data.clean).unwrap());
            let als = AlsConfig {
                seed: rep,
                ..AlsConfig::default()
            };
            let fit = tr_als_fit(&data.noisy, &mask, &[3], &als).unwrap();
            a.push(rse(&tr_reconstruct(&fit.cores).unwrap(), &data.clean).unwrap());
        }
        vbi_med.push(median(v));
        als_med.push(median(a));
    }
    let close = vbi_med.iter().zip(&als_med).all(|(v, a)| *v <= a + RSE_MARGIN);
    let mono = |m: &[f64]| m.windows(2).all(|w| w[1] >= w[0]);
    Outcome {
        pass: close && mono(&vbi_med) && mono(&als_med),
        detail: format!("median RSE by MR {mrs:?}: TR-VBI {vbi_med:.4?}, TR-ALS {als_med:.4?}"),
    }
}

fn image_run(img: &DenseTensor, seed: u64) -> (f64, f64, ModelState, FitTrace) {
    let mask = sample_mask(img.shape(), 0.7, 500 + seed).unwrap();
    let target = [4, 4, 4, 4, 4, 4, 3];
    let t = tensorize(img, &target).unwrap();
    let tmask = IndexSet::from_linear(t.shape().clone(), mask.linear().to_vec()).unwrap();
    let cfg = VbiConfig {
        r_init: Some(6),
        init_snr: Some(1000.0),
        seed,
        ..VbiConfig::default()
    };
    let (s, trace) = checked_fit(&t, &tmask, &cfg);
    let est = detensorize(&vbi::complete(&s, cfg.overwrite_observed), img.dims()).unwrap();
    let fill = mean_fill(img, &mask).unwrap();
    (psnr(&est, img, 1.0).unwrap(), psnr(&fill, img, 1.0).unwrap(), s, trace)
}

fn image_path() -> String {
    format!("{}/tests/data/astronaut64.png", env!("CARGO_MANIFEST_DIR"))
}

fn image_completion() -> Outcome {
    let start = Instant::now();
    let img = load_image(image_path()).unwrap();
    let gains: Vec<f64> = (0..10)
        .map(|seed| {
            let (v, f, _, _) = image_run(&img, seed);
            v - f
        })
        .collect();
    let med = median(gains.clone());
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: med >= IMAGE_GAIN_DB && secs < IMAGE_SECS,
        detail: format!("median gain over mean-fill {med:.2} dB, per seed {gains:.2?}, {secs:.0} s"),
    }
}

fn invariants() -> Outcome {
    let img = load_image(image_path()).unwrap();
    let (_, _, s1, t1) = image_run(&img, 0);
    let (_, _, s2, t2) = image_run(&img, 0);
    let data = gen_synthetic(&[10, 10, 10, 10], &[3], Some(20.0), 100).unwrap();
    let mask = sample_mask(data.clean.shape(), 0.1, 200).unwrap();
    let cfg = VbiConfig {
        r_init: Some(8),
        max_iters: 30,
        ..VbiConfig::default()
    };
    let a = checked_fit(&data.noisy, &mask, &cfg);
    let b = checked_fit(&data.noisy, &mask, &cfg);
    let reproducible = s1 == s2 && t1 == t2 && a == b;
    let log = LOG.lock().unwrap();
    let shown: Vec<&String> = log.violations.iter().take(3).collect();
    Outcome {
        pass: log.violations.is_empty() && reproducible && log.runs > 0,
        detail: format!(
            "{} runs, {} sweeps checked, {} violations {shown:?}, bit-reproducible {reproducible}",
            log.runs,
            log.sweeps,
            log.violations.len()
        ),
    }
}

fn checkpoint_bytes(dir: &std::path::Path) -> u64 {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().metadata().unwrap().len())
        .sum()
}

fn storage() -> Outcome {
    let order = 3;
    let mut rows = Vec::new();
    for &i in &[8usize, 16] {
        for &r in &[2usize, 4] {
            let data = gen_synthetic(&vec![i; order], &[2], Some(20.0), 1).unwrap();
            let mask = sample_mask(data.clean.shape(), 0.5, 2).unwrap();
            let cfg = VbiConfig {
                r_init: Some(r),
                max_iters: 2,
                tol: 0.0,
                ..VbiConfig::default()
            };
            let (s, _) = checked_fit(&data.noisy, &mask, &cfg);
            assert_eq!(s.bonds(), vec![r; order], "burn-in keeps the initial rank");
            let dir = tempfile::tempdir().unwrap();
            save_checkpoint(&s, dir.path()).unwrap();
            let measured = checkpoint_bytes(dir.path()) as f64;
            let predicted = (order * i * r * r + order * i * r.pow(4)) as f64;
            rows.push((i, r, measured, predicted));
        }
    }
    let (m0, p0) = (rows[0].2, rows[0].3);
    let ratios: Vec<f64> = rows.iter().map(|&(_, _, m, p)| (m / m0) / (p / p0)).collect();
    let pass = ratios
        .iter()
        .all(|&q| (1.0 / STORAGE_FACTOR..=STORAGE_FACTOR).contains(&q));
    let table: Vec<String> = rows
        .iter()
        .zip(&ratios)
        .map(|(&(i, r, m, _), q)| format!("I={i} R={r}: {m:.0} B (x{q:.2})"))
        .collect();
    Outcome {
        pass,
        detail: table.join("; "),
    }
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("algebra exactness", algebra),
        ("moment-chain correctness", moments),
        ("update-formula fidelity", update_formulas),
        ("rank recovery", rank_recovery),
        ("noiseless recovery", noiseless),
        ("completion quality", completion_quality),
        ("image completion", image_completion),
        ("storage scaling", storage),
        ("engine invariants", invariants),
    ];
    // invariants summarize every earlier run, so they report last
    let order = [1, 2, 3, 4, 5, 6, 7, 9, 8];
    let mut failed = Vec::new();
    for ((name, run), id) in criteria.into_iter().zip(order) {
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {tag} {name}: {}", out.detail);
        if !out.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
