//! Command-line front end: `synth`, `complete`, `bench` and `info`.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 when the work itself fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use trvbi::als::{tr_als_fit, AlsConfig};
use trvbi::bench::{self, derive_seed, Method, SweepSpec};
use trvbi::config::{apply_als_key, apply_vbi_key, parse_kv};
use trvbi::dtf::{self, load_dtf, load_mask, save_dtf, save_mask};
use trvbi::image_io;
use trvbi::ring::tr_reconstruct;
use trvbi::vbi::{self, VbiConfig};
use trvbi::{DenseTensor, IndexSet};

#[derive(Parser, Debug)]
#[command(name = "trvbi", version, about = "Tensor-ring completion with automatic rank determination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic TR tensor with noise and a random mask.
    Synth(SynthArgs),
    /// Complete a partially observed tensor or image.
    Complete(CompleteArgs),
    /// Run a sweep spec and write one CSV row per run.
    Bench(BenchArgs),
    /// Print the header of DTF/MSK files or the size of images.
    Info(InfoArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Comma-separated extents, e.g. 10,10,10,10.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// One rank for every bond, or one per bond.
    #[arg(long, value_delimiter = ',', required = true)]
    rank: Vec<usize>,
    /// Signal-to-noise ratio in dB; omit for noiseless data.
    #[arg(long)]
    snr: Option<f64>,
    /// Fraction of entries to hide.
    #[arg(long, default_value_t = 0.0)]
    mr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for clean.dtf, data.dtf and mask.msk.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompleteArgs {
    /// Observed data: a DTF file or a PNG image.
    #[arg(long)]
    input: PathBuf,
    /// MSK file of observed entries. Without it, `--mr` hides a random
    /// subset, or everything counts as observed.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Hide this fraction of entries when no mask file is given.
    #[arg(long)]
    mr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    mask_seed: u64,
    /// Ground truth for RSE/PSNR. Images default to the input itself.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Peak value for PSNR; defaults to 1 for images and max |truth| otherwise.
    #[arg(long)]
    peak: Option<f64>,
    #[arg(long, default_value = "tr-vbi")]
    method: Method,
    /// Reshape preset for images (`lena`, `einstein`).
    #[arg(long, conflicts_with = "shape")]
    preset: Option<String>,
    /// Explicit target shape for tensorization.
    #[arg(long, value_delimiter = ',')]
    shape: Option<Vec<usize>>,
    /// key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fixed ranks for tr-als.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long)]
    r_init: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    init_snr: Option<f64>,
    /// Keep the model's values at observed entries instead of the data.
    #[arg(long)]
    no_overwrite: bool,
    /// Recovered tensor (.dtf) or image (.png).
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Sweep spec (key=value).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

/// Trace entry of the JSON report; ALS has no `e_tau`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub e_tau: Option<f64>,
    pub ranks: Vec<usize>,
    pub obs_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub method: Method,
    pub config: Value,
    pub ranks_inferred: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr: Option<f64>,
    pub iters: usize,
    pub wall_s: f64,
    pub trace: Vec<TraceEntry>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<trvbi::Error> for Failure {
    fn from(e: trvbi::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

pub fn cli_main(argv: Vec<String>) -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Complete(a) => complete(&a),
        Command::Bench(a) => run_bench(&a),
        Command::Info(a) => info(&a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}

fn synth(a: &SynthArgs) -> Outcome<()> {
    if !(0.0..1.0).contains(&a.mr) {
        return Err(Failure::Usage(format!("--mr must be in [0, 1), got {}", a.mr)));
    }
    let data = bench::gen_synthetic(&a.dims, &a.rank, a.snr, a.seed)?;
    let mask = bench::sample_mask(data.clean.shape(), a.mr, derive_seed(a.seed, 1, 0))?;
    fs::create_dir_all(&a.out)?;
    save_dtf(a.out.join("clean.dtf"), &data.clean)?;
    save_dtf(a.out.join("data.dtf"), &data.noisy)?;
    save_mask(a.out.join("mask.msk"), &mask)?;
    println!(
        "wrote {} ({} of {} entries observed)",
        a.out.display(),
        mask.len(),
        mask.shape().numel()
    );
    Ok(())
}

fn is_png(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn build_configs(a: &CompleteArgs) -> Outcome<(VbiConfig, AlsConfig, Option<Vec<usize>>)> {
    let mut v = VbiConfig::default();
    let mut l = AlsConfig::default();
    let mut ranks = None;
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path)?;
        let kv = parse_kv(&text).map_err(|e| Failure::Usage(e.to_string()))?;
        for (k, val) in kv {
            let bad = |e: trvbi::Error| Failure::Usage(e.to_string());
            if k == "ranks" {
                ranks = Some(trvbi::config::parse_list(&k, &val).map_err(bad)?);
                continue;
            }
            let hit_v = apply_vbi_key(&mut v, &k, &val).map_err(bad)?;
            let hit_l = apply_als_key(&mut l, &k, &val).map_err(bad)?;
            if !hit_v && !hit_l {
                return Err(Failure::Usage(format!("unknown config key {k}")));
            }
        }
    }
    if let Some(r) = a.r_init {
        v.r_init = Some(r);
    }
    if let Some(m) = a.max_iters {
        v.max_iters = m;
        l.max_iters = m;
    }
    if let Some(t) = a.tol {
        v.tol = t;
        l.tol = t;
    }
    if let Some(s) = a.seed {
        v.seed = s;
        l.seed = s;
    }
    if a.init_snr.is_some() {
        v.init_snr = a.init_snr;
    }
    if a.no_overwrite {
        v.overwrite_observed = false;
    }
    if a.ranks.is_some() {
        ranks = a.ranks.clone();
    }
    Ok((v, l, ranks))
}

/// Loads the input, returning `(original, tensorized)` tensors.
fn load_input(a: &CompleteArgs) -> Outcome<(DenseTensor, DenseTensor)> {
    let original = if is_png(&a.input) {
        image_io::load_image(&a.input)?
    } else {
        load_dtf(&a.input)?
    };
    let target = match (&a.preset, &a.shape) {
        (Some(name), _) => {
            let (src, dst) = image_io::preset(name)
                .ok_or_else(|| Failure::Usage(format!("unknown preset {name:?}")))?;
            if src != original.dims() {
                return Err(Failure::Usage(format!(
                    "preset {name} expects {:?}, input is {}",
                    src,
                    original.shape()
                )));
            }
            dst
        }
        (None, Some(s)) => s.clone(),
        (None, None) => original.dims().to_vec(),
    };
    let t = image_io::tensorize(&original, &target).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((original, t))
}

fn complete(a: &CompleteArgs) -> Outcome<()> {
    let (vbi_cfg, als_cfg, ranks) = build_configs(a)?;
    let (original, t) = load_input(a)?;
    let image = is_png(&a.input);
    let mask_orig = match (&a.mask, a.mr) {
        (Some(p), _) => load_mask(p)?,
        (None, Some(mr)) => bench::sample_mask(original.shape(), mr, a.mask_seed)?,
        (None, None) => IndexSet::full(original.shape().clone()),
    };
    if mask_orig.shape().numel() != original.numel() {
        return Err(Failure::Usage(format!(
            "mask {} does not match input {}",
            mask_orig.shape(),
            original.shape()
        )));
    }
    // Reshaping keeps linear positions, so the mask carries over unchanged.
    let mask = IndexSet::from_linear(t.shape().clone(), mask_orig.linear().to_vec())?;
    let truth = match &a.truth {
        Some(p) if is_png(p) => Some(image_io::load_image(p)?),
        Some(p) => Some(load_dtf(p)?),
        None if image => Some(original.clone()),
        None => None,
    };
    let start = Instant::now();
    let (est, config, ranks_inferred, trace) = match a.method {
        Method::TrVbi => {
            let (state, fit) = vbi::fit(&t, &mask, &vbi_cfg)?;
            let est = vbi::complete(&state, vbi_cfg.overwrite_observed);
            let trace: Vec<TraceEntry> = fit
                .records
                .iter()
                .map(|r| TraceEntry {
                    iter: r.iter,
                    e_tau: Some(r.e_tau),
                    ranks: r.ranks.clone(),
                    obs_rmse: r.obs_rmse,
                })
                .collect();
            (est, serde_json::to_value(&vbi_cfg)?, state.bonds(), trace)
        }
        Method::TrAls => {
            let ranks = ranks.ok_or_else(|| Failure::Usage("tr-als needs --ranks".into()))?;
            let fit = tr_als_fit(&t, &mask, &ranks, &als_cfg)?;
            let bonds: Vec<usize> = (0..t.order()).map(|k| fit.cores.bond(k)).collect();
            let trace = fit
                .rmse_trace
                .iter()
                .enumerate()
                .map(|(i, &r)| TraceEntry {
                    iter: i + 1,
                    e_tau: None,
                    ranks: bonds.clone(),
                    obs_rmse: r,
                })
                .collect();
            let mut cfg = serde_json::to_value(&als_cfg)?;
            cfg["ranks"] = serde_json::to_value(&ranks)?;
            (tr_reconstruct(&fit.cores)?, cfg, bonds, trace)
        }
    };
    let wall_s = start.elapsed().as_secs_f64();
    let est = image_io::detensorize(&est, original.dims())?;
    let (rse, psnr) = match &truth {
        Some(tr) => {
            let peak = a.peak.unwrap_or_else(|| {
                if image {
                    1.0
                } else {
                    tr.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
                }
            });
            let tr = image_io::detensorize(tr, original.dims())
                .map_err(|e| Failure::Usage(format!("truth: {e}")))?;
            (Some(bench::rse(&est, &tr)?), Some(bench::psnr(&est, &tr, peak)?))
        }
        None => (None, None),
    };
    if let Some(out) = &a.output {
        if is_png(out) {
            image_io::save_image(&est, out)?;
        } else {
            save_dtf(out, &est)?;
        }
    }
    let report = Report {
        method: a.method,
        config,
        ranks_inferred,
        rse,
        psnr,
        iters: trace.len(),
        wall_s,
        trace,
    };
    let json = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(p) => fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn run_bench(a: &BenchArgs) -> Outcome<()> {
    let text = fs::read_to_string(&a.spec)?;
    let spec = SweepSpec::from_kv(&text).map_err(|e| Failure::Usage(e.to_string()))?;
    let records = bench::run_sweep(&spec);
    bench::write_csv(fs::File::create(&a.out)?, &records)?;
    for s in bench::summarize(&records) {
        let snr = s.snr_db.map_or("none".to_string(), |v| v.to_string());
        let air = match (s.air, s.var) {
            (Some(a), Some(v)) => format!(" AIR {a:.3} Var {v:.3}"),
            _ => String::new(),
        };
        println!(
            "{} mr={} snr={} runs={} RSE {:.4}±{:.4} PSNR {:.2}±{:.2}{}",
            s.method.name(),
            s.mr,
            snr,
            s.runs,
            s.rse_mean,
            s.rse_std,
            s.psnr_mean,
            s.psnr_std,
            air
        );
    }
    Ok(())
}

fn info(a: &InfoArgs) -> Outcome<()> {
    for path in &a.files {
        if is_png(path) {
            let t = image_io::load_image(path)?;
            println!("{}: PNG {}", path.display(), t.shape());
            continue;
        }
        let (magic, shape) = dtf::peek_header(path)?;
        if magic == "MSK1" {
            let mask = load_mask(path)?;
            println!(
                "{}: {magic} order {} dims {} observed {}",
                path.display(),
                shape.order(),
                shape,
                mask.len()
            );
        } else {
            println!("{}: {magic} order {} dims {}", path.display(), shape.order(), shape);
        }
    }
    Ok(())
}
