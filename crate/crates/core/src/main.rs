use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;
use serde_json::json;

use curveclust::bench::{run_starts, run_suite, Method, RunSettings, SUITES};
use curveclust::dataio::{
    generate, load_any_model, preset, read_csv, save_gaussian_mixture, save_model, write_csv,
    CurveSpec, ModelFile,
};
use curveclust::density::{CurveGaussianModel, DEFAULT_SEGMENTS};
use curveclust::fit::{cross_entropy, fit_component, init_curve_guess_with_floor, FitConfig};
use curveclust::mcec::{InitMethod, DEFAULT_EPS_FACTOR};
use curveclust::metrics::{score, score_gmm, Likelihood};
use curveclust::plot::{clusters_svg, density_grid, density_svg, BBox};
use curveclust::{Component, Dataset, Error, MixtureState};

const THREADS_ENV: &str = "CURVECLUST_THREADS";

#[derive(Parser)]
#[command(name = "curveclust", version, about = "Closed-curve Gaussian densities and MCEC clustering")]
struct Cli {
    /// Worker threads (overridden by CURVECLUST_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a labelled dataset from a preset or a curve model file.
    Generate(GenerateArgs),
    /// Fit a single curve component to a dataset.
    Fit(FitArgs),
    /// Multi-start clustering with MCEC or a Gaussian baseline.
    Cluster(ClusterArgs),
    /// Evaluate a model's density on a grid (SVG bands or CSV).
    Density(DensityArgs),
    /// Score a model against a dataset.
    Score(ScoreArgs),
    /// Run the synthetic benchmark suites.
    Bench(BenchArgs),
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["preset", "curve_file"])))]
struct GenerateArgs {
    #[arg(long)]
    preset: Option<String>,
    /// Curve mixture JSON; points are split by cluster weight.
    #[arg(long)]
    curve_file: Option<PathBuf>,
    /// Noise level; defaults to the preset's or the file's σ.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
    segments: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    grad_tol: f64,
    #[arg(long)]
    out_model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mcec,
    Cec,
    Gmm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mcec => Method::Mcec,
            MethodArg::Cec => Method::Cec,
            MethodArg::Gmm => Method::Gmm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Kmeans,
    Random,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "mcec")]
    method: MethodArg,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = DEFAULT_SEGMENTS)]
    segments: usize,
    #[arg(long, default_value_t = 1)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clusters under this percentage of the points are removed.
    #[arg(long, default_value_t = 5.0)]
    removal_pct: f64,
    /// Absolute stop threshold for MCEC (default: 1e-4 · |initial energy|).
    #[arg(long)]
    eps: Option<f64>,
    /// Lloyd iterations for MCEC/CEC, EM iterations for GMM.
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Initial MCEC partition.
    #[arg(long, value_enum, default_value = "kmeans")]
    init: InitArg,
    /// Score hard-assignment methods with the mixture likelihood.
    #[arg(long)]
    soft_likelihood: bool,
    #[arg(long)]
    out_model: PathBuf,
    #[arg(long)]
    out_report: PathBuf,
    /// Also draw points and curves (2D only).
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Include wall-clock times in the report.
    #[arg(long)]
    record_times: bool,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Cells as WxH.
    #[arg(long, default_value = "200x200")]
    grid: String,
    /// xmin,ymin,xmax,ymax; defaults to the model's extent padded by 6σ.
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<String>,
    /// Output file, `.svg` or `.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    soft_likelihood: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// order1 … order4, or all.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    starts: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

type CliResult = std::result::Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        },
        Err(_) => cli.threads,
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Density(a) => cmd_density(a),
        Command::Score(a) => cmd_score(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

macro_rules! outln {
    ($($arg:tt)*) => {
        emit(&format!("{}\n", format_args!($($arg)*)))
    };
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> std::result::Result<String, serde_json::Error> {
    serde_json::to_string_pretty(value).map(|s| s + "\n")
}

fn cmd_generate(a: GenerateArgs) -> CliResult {
    if a.count == 0 {
        return Err("--count must be at least 1".into());
    }
    let specs: Vec<CurveSpec> = if let Some(name) = &a.preset {
        let p = preset(name)?;
        p.specs(a.sigma.unwrap_or(p.sigma), a.count)
    } else {
        let path = a.curve_file.as_ref().expect("clap enforces one source");
        let state = match load_any_model(path)? {
            ModelFile::Curves(s) => s,
            ModelFile::Gaussians(_) => return Err("--curve-file must hold a curve mixture".into()),
        };
        let active: Vec<&Component<CurveGaussianModel>> =
            state.components.iter().filter(|c| c.active).collect();
        // largest-remainder split of `count` by weight
        let raw: Vec<f64> = active.iter().map(|c| c.weight * a.count as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&x, &y| (raw[y] - raw[y].floor()).total_cmp(&(raw[x] - raw[x].floor())).then(x.cmp(&y)));
        let missing = a.count - counts.iter().sum::<usize>();
        for &i in order.iter().take(missing) {
            counts[i] += 1;
        }
        active
            .iter()
            .zip(counts)
            .filter(|(_, n)| *n > 0)
            .map(|(c, count)| CurveSpec {
                curve: c.model.curve().clone(),
                sigma: a.sigma.unwrap_or(c.model.sigma()),
                count,
            })
            .collect()
    };
    let data = generate(&specs, a.seed)?;
    write_csv(&data, &a.out)?;
    let sizes: Vec<usize> = specs.iter().map(|s| s.count).collect();
    outln!(
        "{}",
        json!({"out": a.out, "points": data.len(), "dim": data.dim(), "curves": specs.len(), "per_curve": sizes, "seed": a.seed})
    );
    Ok(())
}

fn cmd_fit(a: FitArgs) -> CliResult {
    let data = read_csv(&a.input)?;
    let config = FitConfig {
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        ..FitConfig::default()
    };
    let init = init_curve_guess_with_floor(&data, a.order, a.segments, config.sigma_floor)?;
    let initial = cross_entropy(&init, &data)?;
    let fit = fit_component(&data, &init, &config)?;
    let state = MixtureState {
        components: vec![Component {
            model: fit.model.clone(),
            weight: 1.0,
            active: true,
        }],
        assignment: vec![0; data.len()],
        energy: fit.final_cross_entropy,
    };
    save_model(&state, &a.out_model)?;
    outln!(
        "{}",
        json!({
            "config": config,
            "order": a.order,
            "segments": a.segments,
            "initial_cross_entropy": initial,
            "final_cross_entropy": fit.final_cross_entropy,
            "sigma": fit.model.sigma(),
            "iters": fit.iters,
            "converged": fit.converged,
        })
    );
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> CliResult {
    let data = read_csv(&a.input)?;
    let settings = RunSettings {
        method: a.method.into(),
        k: a.k,
        order: a.order,
        segments_k: a.segments,
        starts: a.starts,
        seed: a.seed,
        removal_pct: a.removal_pct,
        eps: a.eps,
        max_iters: a.max_iters,
        likelihood: if a.soft_likelihood {
            Likelihood::Soft
        } else {
            Likelihood::Hard
        },
        init: match a.init {
            InitArg::Kmeans => InitMethod::Kmeans,
            InitArg::Random => InitMethod::Random,
        },
        fit: FitConfig::default(),
    };
    let t = Instant::now();
    let run = run_starts(&data, &settings)?;
    let elapsed = t.elapsed().as_secs_f64();
    match &run.model {
        ModelFile::Curves(state) => save_model(state, &a.out_model)?,
        ModelFile::Gaussians(mix) => save_gaussian_mixture(mix, &a.out_model)?,
    }
    let best = run.best_report();
    let failed = run.starts.iter().filter(|s| s.error.is_some()).count();
    let mut report = json!({
        "command": "cluster",
        "input": a.input,
        "n_points": data.len(),
        "dim": data.dim(),
        "config": settings,
        "eps_rule": match settings.eps {
            Some(_) => "absolute".to_string(),
            None => format!("{DEFAULT_EPS_FACTOR:e} * |initial energy|"),
        },
        "selection": {
            "criterion": settings.method.criterion(),
            "rule": "minimum over successful starts, first on ties",
        },
        "best_start": run.best,
        "best": {
            "score": best.score,
            "criterion": best.criterion,
            "rand": best.rand,
            "jaccard": best.jaccard,
            "active_clusters": best.active_clusters,
        },
        "failed_starts": failed,
        "starts": run.starts,
    });
    if a.record_times {
        report["times"] = json!({
            "total_seconds": elapsed,
            "per_start_seconds": run.starts.iter().map(|s| s.seconds).collect::<Vec<_>>(),
        });
    }
    write_text(&a.out_report, &to_json(&report)?)?;
    if let Some(svg) = &a.svg {
        write_text(svg, &cluster_picture(&data, &run.labels, &run.model)?)?;
    }
    info!("{} starts in {elapsed:.2}s", settings.starts);
    eprintln!(
        "best start {} of {}: {} = {:.6}, active clusters {}",
        run.best,
        settings.starts,
        settings.method.criterion(),
        best.criterion.unwrap_or(f64::NAN),
        best.active_clusters
    );
    Ok(())
}

fn curve_polylines(state: &MixtureState<CurveGaussianModel>) -> Vec<Vec<[f64; 2]>> {
    state
        .components
        .iter()
        .filter(|c| c.active && c.model.ambient_dim() == 2 && c.model.curve().intrinsic_dim() == 1)
        .map(|c| {
            (0..=256)
                .map(|i| {
                    let p = c.model.curve().eval(&[i as f64 / 256.0]);
                    [p[0], p[1]]
                })
                .collect()
        })
        .collect()
}

fn cluster_picture(data: &Dataset, labels: &[usize], model: &ModelFile) -> std::result::Result<String, Box<dyn std::error::Error>> {
    if data.dim() != 2 {
        return Err("--svg needs 2-dimensional data".into());
    }
    let pts: Vec<[f64; 2]> = data.iter().map(|p| [p[0], p[1]]).collect();
    let (lo, hi) = data.bounds();
    let pad = 0.05 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let bbox = [lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad];
    let curves = match model {
        ModelFile::Curves(s) => curve_polylines(s),
        ModelFile::Gaussians(_) => Vec::new(),
    };
    Ok(clusters_svg(&pts, labels, &curves, bbox))
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("grid {s:?} is not WxH"))?;
    let w = w.trim().parse().map_err(|_| format!("bad grid width {w:?}"))?;
    let h = h.trim().parse().map_err(|_| format!("bad grid height {h:?}"))?;
    Ok((w, h))
}

fn parse_bbox(s: &str) -> std::result::Result<BBox, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad bbox value {t:?}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into().map_err(|_| "bbox needs four values xmin,ymin,xmax,ymax".to_string())
}

/// Extent of a model padded by 6σ (or 6 standard deviations).
fn default_bbox(model: &ModelFile) -> BBox {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let mut grow = |x: f64, y: f64, pad: f64| {
        b[0] = b[0].min(x - pad);
        b[1] = b[1].min(y - pad);
        b[2] = b[2].max(x + pad);
        b[3] = b[3].max(y + pad);
    };
    match model {
        ModelFile::Curves(s) => {
            for c in s.components.iter().filter(|c| c.active) {
                let d = c.model.curve().intrinsic_dim();
                let steps: usize = if d == 1 { 512 } else { 64 };
                for i in 0..steps.pow(d as u32) {
                    let sv: Vec<f64> = (0..d)
                        .map(|m| ((i / steps.pow(m as u32)) % steps) as f64 / steps as f64)
                        .collect();
                    let p = c.model.curve().eval(&sv);
                    grow(p[0], p[1], 6.0 * c.model.sigma());
                }
            }
        }
        ModelFile::Gaussians(g) => {
            for c in &g.components {
                let pad = 6.0 * c.cov[(0, 0)].max(c.cov[(1, 1)]).sqrt();
                grow(c.mean[0], c.mean[1], pad);
            }
        }
    }
    b
}

fn cmd_density(a: DensityArgs) -> CliResult {
    let model = load_any_model(&a.model)?;
    if model.dim() != 2 {
        return Err(format!("density grids need a 2-dimensional model, got dimension {}", model.dim()).into());
    }
    let (nx, ny) = parse_grid(&a.grid)?;
    let bbox = match &a.bbox {
        Some(s) => parse_bbox(s)?,
        None => default_bbox(&model),
    };
    let grid = density_grid(|x| model.log_density(x), bbox, nx, ny)?;
    let ext = a.out.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "svg" => {
            let overlays = match &model {
                ModelFile::Curves(s) => curve_polylines(s),
                ModelFile::Gaussians(_) => Vec::new(),
            };
            write_text(&a.out, &density_svg(&grid, &overlays))?;
        }
        "csv" => write_text(&a.out, &grid.to_csv())?,
        _ => return Err(Error::InvalidArgument("--out must end in .svg or .csv".into()).into()),
    }
    let (ix, iy) = grid.argmax();
    outln!(
        "{}",
        json!({"out": a.out, "grid": [nx, ny], "bbox": bbox, "integral": grid.integral(), "argmax": grid.center(ix, iy)})
    );
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> CliResult {
    let data = read_csv(&a.input)?;
    let model = load_any_model(&a.model)?;
    if model.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: data.dim(),
        }
        .into());
    }
    let likelihood = if a.soft_likelihood { Likelihood::Soft } else { Likelihood::Hard };
    let (sc, labels, conv) = match &model {
        ModelFile::Curves(s) => {
            let mut state = s.clone();
            curveclust::assign(&mut state, &data)?;
            let sc = score(&state, &data, likelihood)?;
            (sc, state.assignment, likelihood)
        }
        ModelFile::Gaussians(g) => {
            let labels = data.iter().map(|x| g.predict(x)).collect::<Vec<_>>();
            (score_gmm(g, &data)?, labels, Likelihood::Soft)
        }
    };
    let mut out = json!({"score": sc, "likelihood": conv});
    if let Some(truth) = data.labels() {
        out["rand"] = json!(curveclust::rand_index(truth, &labels)?);
        out["jaccard"] = json!(curveclust::jaccard_index(truth, &labels)?);
    }
    outln!(
        "{}",
        to_json(&out)?.trim_end());
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let suites: Vec<&str> = if a.suite == "all" {
        SUITES.to_vec()
    } else {
        vec![a.suite.as_str()]
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| format!("cannot create {}: {e}", a.out_dir.display()))?;
    let mut tables = String::new();
    for suite in suites {
        let (data, report, _) = run_suite(suite, a.seed, a.starts)?;
        write_csv(&data, a.out_dir.join(format!("{suite}.csv")))?;
        write_text(&a.out_dir.join(format!("{suite}.json")), &to_json(&report)?)?;
        tables.push_str(&report.table());
        tables.push('\n');
    }
    write_text(&a.out_dir.join("tables.txt"), &tables)?;
    emit(&tables);
    Ok(())
}
