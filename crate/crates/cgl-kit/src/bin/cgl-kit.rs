//! Command-line front end: dataset generation, graph construction, the two
//! simulation studies, and numerical bound verification, all reproducible
//! from an emitted config.json.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use cgl_kit::bounds::{concentration_diagnostic, random_instance, verify_lemma, LemmaVariant};
use cgl_kit::connection_graph::{assemble_symmetric, ConnectionBlocks};
use cgl_kit::error::CglError;
use cgl_kit::evaluation::{
    run_curve_experiment, run_image_experiment, write_curve_bundle, write_image_bundle,
    CurveConfig, ImageConfig,
};
use cgl_kit::io;
use cgl_kit::noise::NoiseSpec;
use cgl_kit::rid::{build_connection_graph, pairwise_rid};
use cgl_kit::spectral::{diffusion_map, eig_sym, vdm, DiffusionRule};
use cgl_kit::Result;

#[derive(Parser)]
#[command(name = "cgl-kit", version, about = "Connection graph Laplacian toolkit")]
struct Cli {
    /// JSON config file; explicit flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: machine parallelism; env CGLKIT_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Noisy closed-curve experiment: rank CDFs for four neighbor estimators.
    Curve(CurveArgs),
    /// Rotated-image alignment experiment over three operator variants.
    Images(ImagesArgs),
    /// Monte-Carlo verification sweep of the perturbation bounds.
    Bounds(BoundsArgs),
    /// Concentration diagnostic for the noise model.
    Concentration(ConcentrationArgs),
    /// Build a RID graph from an image CSV and export spectral embeddings.
    Embed(EmbedArgs),
    /// Pairwise RID table for an image CSV.
    Rid(RidArgs),
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bandwidth_quantile: Option<f64>,
    #[arg(long)]
    k_nn: Option<usize>,
    #[arg(long)]
    rank_eval: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImagesArgs {
    #[arg(long)]
    nk: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Noise scale c as a multiple of the template pixel std (c = mult·σ).
    #[arg(long)]
    c_sigma_mult: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bandwidth_quantile: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// additive | multiplicative | zerodiag
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConcentrationArgs {
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    /// Image-set CSV (rows of p samples, optional class/shift columns).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    bandwidth_quantile: Option<f64>,
    /// Threshold rule for the diffusion-map dimension.
    #[arg(long)]
    delta: Option<f64>,
    /// Fixed diffusion-map dimension (overrides --delta).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    t: Option<f64>,
    /// Retained eigenpairs for the vector diffusion distances; 0 disables.
    #[arg(long)]
    vdm_r: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RidArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<Value>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CglError::Parse(format!("--config {}: {e}", p.display())))?;
            Ok(Some(v))
        }
    }
}

fn cfg_get<T: DeserializeOwned>(cfg: &Option<Value>, key: &str) -> Result<Option<T>> {
    match cfg.as_ref().and_then(|v| v.get(key)) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| CglError::Parse(format!("config key '{key}': {e}"))),
    }
}

/// flag value > config file value > default.
fn resolve<T: DeserializeOwned>(flag: Option<T>, cfg: &Option<Value>, key: &str, default: T) -> Result<T> {
    Ok(match flag {
        Some(v) => v,
        None => cfg_get(cfg, key)?.unwrap_or(default),
    })
}

/// An omitted seed is drawn randomly and recorded in the outputs, never left
/// implicit.
fn resolve_seed(flag: Option<u64>, cfg: &Option<Value>) -> Result<u64> {
    Ok(match flag {
        Some(s) => s,
        None => match cfg_get::<u64>(cfg, "seed")? {
            Some(s) => s,
            None => {
                let s: u64 = rand::random();
                eprintln!("note: --seed not given; drew seed {s}");
                s
            }
        },
    })
}

fn emit<T: Serialize>(out: &Option<PathBuf>, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CglError::Parse(format!("json serialization: {e}")))?;
    println!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        io::write_json(&dir.join(name), value)?;
    }
    Ok(())
}

fn run_curve(args: CurveArgs, cfg: &Option<Value>) -> Result<()> {
    let d = CurveConfig::default();
    let config = CurveConfig {
        n: resolve(args.n, cfg, "n", d.n)?,
        p: resolve(args.p, cfg, "p", d.p)?,
        alpha: resolve(args.alpha, cfg, "alpha", d.alpha)?,
        c: resolve(args.c, cfg, "c", d.c)?,
        knn: resolve(args.knn, cfg, "knn", d.knn)?,
        delta: resolve(args.delta, cfg, "delta", d.delta)?,
        t: resolve(args.t, cfg, "t", d.t)?,
        seed: resolve_seed(args.seed, cfg)?,
        bandwidth_quantile: resolve(
            args.bandwidth_quantile,
            cfg,
            "bandwidth_quantile",
            d.bandwidth_quantile,
        )?,
        k_nn: resolve(args.k_nn, cfg, "k_nn", d.k_nn)?,
        rank_eval: resolve(args.rank_eval, cfg, "rank_eval", d.rank_eval)?,
    };
    let out = match args.out {
        Some(o) => o,
        None => cfg_get::<PathBuf>(cfg, "out")?
            .ok_or_else(|| CglError::InvalidSpec("curve requires --out".into()))?,
    };
    let artifacts = run_curve_experiment(&config)?;
    write_curve_bundle(&artifacts, &out)?;
    for m in &artifacts.methods {
        println!(
            "{}: cdf(rank {}) = {:.4}, cdf(rank {}) = {:.4}",
            m.method,
            config.rank_eval,
            m.cdf_at_eval,
            2 * config.k_nn,
            m.cdf_at_2knn
        );
    }
    println!("snrdb = {:.4}", artifacts.snrdb);
    Ok(())
}

fn run_images(args: ImagesArgs, cfg: &Option<Value>) -> Result<()> {
    let d = ImageConfig::default();
    let config = ImageConfig {
        n_k: resolve(args.nk, cfg, "nk", d.n_k)?,
        n_r: resolve(args.nr, cfg, "nr", d.n_r)?,
        p: resolve(args.p, cfg, "p", d.p)?,
        alpha: resolve(args.alpha, cfg, "alpha", d.alpha)?,
        c_sigma_mult: resolve(args.c_sigma_mult, cfg, "c_sigma_mult", d.c_sigma_mult)?,
        knn: resolve(args.knn, cfg, "knn", d.knn)?,
        seed: resolve_seed(args.seed, cfg)?,
        bandwidth_quantile: resolve(
            args.bandwidth_quantile,
            cfg,
            "bandwidth_quantile",
            d.bandwidth_quantile,
        )?,
    };
    let out = match args.out {
        Some(o) => o,
        None => cfg_get::<PathBuf>(cfg, "out")?
            .ok_or_else(|| CglError::InvalidSpec("images requires --out".into()))?,
    };
    let artifacts = run_image_experiment(&config)?;
    write_image_bundle(&artifacts, &out)?;
    for m in &artifacts.methods {
        println!(
            "{}: global consistency = {:.4}, max class spread = {:.3e}",
            m.method,
            m.summary.global_consistency,
            m.summary
                .per_class_spread
                .iter()
                .cloned()
                .fold(0.0, f64::max)
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct BoundsSweep {
    variant: LemmaVariant,
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
    holds_count: usize,
    max_gap_over_bound: f64,
    reports: Vec<cgl_kit::bounds::LemmaReport>,
}

fn run_bounds(args: BoundsArgs, cfg: &Option<Value>) -> Result<()> {
    let variant_s: String = resolve(args.variant, cfg, "variant", "additive".to_string())?;
    let variant = match variant_s.as_str() {
        "additive" => LemmaVariant::Additive,
        "multiplicative" => LemmaVariant::Multiplicative,
        "zerodiag" => LemmaVariant::ZeroDiag,
        other => {
            return Err(CglError::InvalidSpec(format!(
                "--variant must be additive|multiplicative|zerodiag, got '{other}'"
            )))
        }
    };
    let n = resolve(args.n, cfg, "n", 50)?;
    let k = resolve(args.k, cfg, "k", 2)?;
    let trials = resolve(args.trials, cfg, "trials", 100)?;
    let seed = resolve_seed(args.seed, cfg)?;
    if k != 1 && k != 2 {
        return Err(CglError::InvalidSpec(format!(
            "--k must be 1 or 2, got {k}"
        )));
    }
    if n < 2 {
        return Err(CglError::InvalidSpec(format!("--n must be >= 2, got {n}")));
    }
    let mut reports = Vec::with_capacity(trials);
    let mut holds_count = 0;
    let mut max_ratio = 0.0_f64;
    for trial in 0..trials {
        let inst = random_instance(n, k, seed.wrapping_add(trial as u64), variant);
        let report = verify_lemma(
            &inst.w,
            &inst.w_tilde,
            &inst.g,
            &inst.g_tilde,
            inst.f.as_deref(),
            variant,
        )?;
        holds_count += report.holds as usize;
        max_ratio = max_ratio.max(report.measured_gap / report.bound);
        reports.push(report);
    }
    let sweep = BoundsSweep {
        variant,
        n,
        k,
        trials,
        seed,
        holds_count,
        max_gap_over_bound: max_ratio,
        reports,
    };
    emit(&args.out, "bounds.json", &sweep)?;
    if let Some(dir) = &args.out {
        io::write_json(
            &dir.join("config.json"),
            &serde_json::json!({"variant": variant, "n": n, "k": k, "trials": trials, "seed": seed}),
        )?;
    }
    Ok(())
}

fn run_concentration(args: ConcentrationArgs, cfg: &Option<Value>) -> Result<()> {
    let p = resolve(args.p, cfg, "p", 500)?;
    let n = resolve(args.n, cfg, "n", 20)?;
    let trials = resolve(args.trials, cfg, "trials", 10)?;
    let alpha = resolve(args.alpha, cfg, "alpha", 0.25)?;
    let c = resolve(args.c, cfg, "c", 1.0)?;
    let seed = resolve_seed(args.seed, cfg)?;
    let spec = NoiseSpec::isotropic(alpha, c, seed);
    let report = concentration_diagnostic(&spec, p, n, trials)?;
    emit(&args.out, "concentration.json", &report)?;
    if let Some(dir) = &args.out {
        io::write_json(&dir.join("config.json"), &spec)?;
    }
    Ok(())
}

fn run_embed(args: EmbedArgs, cfg: &Option<Value>) -> Result<()> {
    let input: PathBuf = match args.input {
        Some(i) => i,
        None => cfg_get(cfg, "input")?
            .ok_or_else(|| CglError::InvalidSpec("embed requires --input".into()))?,
    };
    let out: PathBuf = match args.out {
        Some(o) => o,
        None => cfg_get(cfg, "out")?
            .ok_or_else(|| CglError::InvalidSpec("embed requires --out".into()))?,
    };
    let quantile = resolve(args.bandwidth_quantile, cfg, "bandwidth_quantile", 0.25)?;
    let t = resolve(args.t, cfg, "t", 1.0)?;
    let delta = resolve(args.delta, cfg, "delta", 0.2)?;
    let m: Option<usize> = match args.m {
        Some(m) => Some(m),
        None => cfg_get(cfg, "m")?,
    };
    let vdm_r = resolve(args.vdm_r, cfg, "vdm_r", 0)?;

    let images = io::read_images_csv(&input)?;
    let (w, g, bandwidth) = build_connection_graph(&images.images, quantile)?;
    std::fs::create_dir_all(&out)?;

    // Scalar diffusion map on the weights alone (trivial connection).
    let trivial = ConnectionBlocks::trivial(w.n());
    let dec_w = eig_sym(&assemble_symmetric(&w, &trivial)?)?;
    let rule = match m {
        Some(m) => DiffusionRule::FixedM(m),
        None => DiffusionRule::Threshold(delta),
    };
    let phi = diffusion_map(&dec_w, t, rule)?;
    io::write_embedding_csv(&out.join("embedding_dm.csv"), &phi.coords)?;

    // Spectrum of the k = 2 connection operator, and optional VDM distances.
    let dec_g = eig_sym(&assemble_symmetric(&w, &g)?)?;
    let eig_csv: String = std::iter::once("index,eigenvalue".to_string())
        .chain(
            dec_g
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(i, v)| format!("{i},{v:.17e}")),
        )
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    std::fs::write(out.join("eigenvalues.csv"), eig_csv)?;
    if vdm_r > 0 {
        let coords = vdm(&dec_g, t.round().max(1.0) as u32, vdm_r)?;
        let mut text = String::from("i,j,vdd_sq\n");
        for i in 0..w.n() {
            for j in i + 1..w.n() {
                use std::fmt::Write as _;
                writeln!(text, "{i},{j},{:.17e}", coords.distance_sq(i, j)?).unwrap();
            }
        }
        std::fs::write(out.join("vdd.csv"), text)?;
    }
    io::write_json(
        &out.join("config.json"),
        &serde_json::json!({
            "input": input, "bandwidth_quantile": quantile, "bandwidth": bandwidth,
            "delta": delta, "m": phi.m, "t": t, "vdm_r": vdm_r,
        }),
    )?;
    println!(
        "embedded {} images: bandwidth = {:.6e}, m = {}",
        w.n(),
        bandwidth,
        phi.m
    );
    Ok(())
}

fn run_rid(args: RidArgs, cfg: &Option<Value>) -> Result<()> {
    let input: PathBuf = match args.input {
        Some(i) => i,
        None => cfg_get(cfg, "input")?
            .ok_or_else(|| CglError::InvalidSpec("rid requires --input".into()))?,
    };
    let out: PathBuf = match args.out {
        Some(o) => o,
        None => cfg_get(cfg, "out")?
            .ok_or_else(|| CglError::InvalidSpec("rid requires --out".into()))?,
    };
    let images = io::read_images_csv(&input)?;
    let table = pairwise_rid(&images.images)?;
    std::fs::create_dir_all(&out)?;
    io::write_rid_csv(&out.join("rid.csv"), &table)?;
    io::write_json(
        &out.join("config.json"),
        &serde_json::json!({"input": input, "n": table.n, "p": table.p}),
    )?;
    println!("wrote pairwise RID table for {} images", table.n);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.config)?;
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => std::env::var("CGLKIT_THREADS")
            .ok()
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|e| CglError::InvalidSpec(format!("CGLKIT_THREADS: {e}")))
            })
            .transpose()?,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CglError::InvalidSpec("--threads must be >= 1".into()));
        }
        // Ignore the error if a global pool already exists (e.g. in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match cli.command {
        Command::Curve(a) => run_curve(a, &cfg),
        Command::Images(a) => run_images(a, &cfg),
        Command::Bounds(a) => run_bounds(a, &cfg),
        Command::Concentration(a) => run_concentration(a, &cfg),
        Command::Embed(a) => run_embed(a, &cfg),
        Command::Rid(a) => run_rid(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
