use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lsbw::cv::{select_cv, BandwidthGrid, CvConfig, MinimumStrategy, WeightFunction};
use lsbw::harness::config::{CvSpec, LepskiSpec};
use lsbw::harness::{emit_figures_data, load_result, run_experiment, ExperimentConfig, FigureId, SelectorSpec};
use lsbw::lepski::{select_local_curve, GeometricGrid, LrvParams};
use lsbw::moments::{midpoint_grid, Estimator, MomentFunctional, MomentSeries, Variant};
use lsbw::processes::{simulate_tvar, CoefficientCurve, StreamSeed, DEFAULT_BURN_IN};
use lsbw::{Error, Kernel, Result, TruncatedKernel};

#[derive(Parser)]
#[command(name = "lsbw", version, about = "Bandwidth selection for locally stationary time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Experiment config (JSON); its model, functional and selector fill unset flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory; single-path commands print to stdout without it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Coefficient curve: sin_full, sin_scaled, step, constant:<a>.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Moment functional: mean, cov:<k>, product:<i>:<j>, charcos:<θ>, indicator:<y>, corr.
    #[arg(long)]
    g: Option<String>,
    /// Replication stream of the path.
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one tvAR(1) path.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Kernel estimate on a `u`-grid for a fixed bandwidth.
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        h: f64,
        #[arg(long, default_value = "normalized")]
        variant: String,
        /// Leave-out cutoff (leaveout variant only).
        #[arg(long, default_value_t = 0.12)]
        cutoff: f64,
        #[arg(long, default_value_t = 201)]
        u_points: usize,
    },
    /// Cross-validation bandwidth for one path.
    SelectCv {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        alpha_cutoff: Option<f64>,
        /// Grid size `m` of `{k/m}`.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        weight_gamma: Option<f64>,
    },
    /// Local bandwidth curve for one path.
    SelectLepski {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        c_sharp: Option<f64>,
        #[arg(long)]
        grid_ratio: Option<f64>,
        #[arg(long)]
        h_lower: Option<f64>,
        #[arg(long)]
        lrv_eta: Option<f64>,
        #[arg(long)]
        lrv_rn: Option<usize>,
        #[arg(long, default_value_t = 199)]
        u_points: usize,
    },
    /// Replicated study from `--config`.
    Experiment,
    /// Figure data from a finished experiment directory (`--out-dir`).
    Figures {
        /// Figure ids; all that apply when omitted.
        #[arg(long = "figure")]
        figures: Vec<String>,
        /// Where to write the CSVs; defaults to `<out-dir>/figures`.
        #[arg(long)]
        dest: Option<PathBuf>,
    },
}

struct Resolved {
    curve: CoefficientCurve,
    n: usize,
    burn_in: usize,
    g: MomentFunctional,
    seed: StreamSeed,
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn load_config(global: &Global) -> Result<Option<ExperimentConfig>> {
    global.config.as_deref().map(ExperimentConfig::load).transpose()
}

fn resolve(model: &ModelArgs, global: &Global, cfg: Option<&ExperimentConfig>) -> Result<Resolved> {
    let curve = match (&model.model, cfg) {
        (Some(s), _) => s.parse().map_err(config_error)?,
        (None, Some(c)) => c.model.curve.clone(),
        (None, None) => return Err(Error::Config("--model or --config is required".into())),
    };
    let n = model
        .n
        .or(cfg.map(|c| c.model.n))
        .ok_or_else(|| Error::Config("--n or --config is required".into()))?;
    let g = match (&model.g, cfg) {
        (Some(s), _) => s.parse().map_err(config_error)?,
        (None, Some(c)) => c.functional()?,
        (None, None) => MomentFunctional::CovarianceLag(1),
    };
    let seed = global.seed.or(cfg.map(|c| c.base_seed)).unwrap_or(0);
    Ok(Resolved {
        curve,
        n,
        burn_in: cfg.map_or(DEFAULT_BURN_IN, |c| c.model.burn_in),
        g,
        seed: StreamSeed::new(seed, model.stream),
    })
}

fn sink(global: &Global, file: &str) -> Result<Box<dyn Write>> {
    Ok(match &global.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Box::new(BufWriter::new(File::create(dir.join(file))?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(r: &Resolved) -> Result<MomentSeries> {
    let path = simulate_tvar(&r.curve, r.n, r.seed, r.burn_in)?;
    Ok(MomentSeries::from_path(&path, &r.g))
}

fn run(cli: Cli) -> Result<()> {
    let global = &cli.global;
    let cfg = load_config(global)?;
    match cli.command {
        Command::Simulate { model } => {
            let r = resolve(&model, global, cfg.as_ref())?;
            let path = simulate_tvar(&r.curve, r.n, r.seed, r.burn_in)?;
            path.write_csv(sink(global, "path.csv")?)
        }
        Command::Estimate {
            model,
            h,
            variant,
            cutoff,
            u_points,
        } => {
            let r = resolve(&model, global, cfg.as_ref())?;
            let kernel = cfg.as_ref().map_or(Ok(Kernel::epanechnikov()), |c| c.kernel())?;
            let estimator = match variant.parse::<Variant>()? {
                Variant::Raw => Estimator::Raw(kernel),
                Variant::Normalized => Estimator::Normalized(kernel),
                Variant::LeaveOut => Estimator::LeaveOut(TruncatedKernel::hard(kernel, cutoff).map_err(config_error)?),
            };
            let series = simulate(&r)?;
            let curve = series.estimate_curve(&lsbw::cv::linspace(0.0, 1.0, u_points), h, &estimator)?;
            curve.write_csv(sink(global, "estimate.csv")?)
        }
        Command::SelectCv {
            model,
            alpha_cutoff,
            grid,
            strategy,
            weight_gamma,
        } => {
            let r = resolve(&model, global, cfg.as_ref())?;
            let spec = match cfg.as_ref().map(|c| &c.selector) {
                Some(SelectorSpec::Cv(s)) => s.clone(),
                _ => CvSpec {
                    grid_size: 50,
                    cutoff: 0.12,
                    epsilon: 0.0,
                    strategy: MinimumStrategy::default(),
                },
            };
            let gamma = weight_gamma.or(cfg.as_ref().map(|c| c.weight_gamma)).unwrap_or(0.05);
            let strategy = match strategy {
                Some(s) => s.parse()?,
                None => spec.strategy,
            };
            let mut cv = CvConfig::new(alpha_cutoff.unwrap_or(spec.cutoff))
                .map_err(config_error)?
                .with_grid(BandwidthGrid::uniform(grid.unwrap_or(spec.grid_size)).map_err(config_error)?)
                .with_strategy(strategy)
                .with_weight(WeightFunction::new(gamma).map_err(config_error)?);
            cv.epsilon = spec.epsilon;
            cv.truncated_kernel().map_err(config_error)?;
            let res = select_cv(&simulate(&r)?, &cv)?;
            res.write_csv(sink(global, "cv.csv")?)
        }
        Command::SelectLepski {
            model,
            c_sharp,
            grid_ratio,
            h_lower,
            lrv_eta,
            lrv_rn,
            u_points,
        } => {
            let r = resolve(&model, global, cfg.as_ref())?;
            let spec = match cfg.as_ref().map(|c| &c.selector) {
                Some(SelectorSpec::Lepski(s)) => s.clone(),
                _ => LepskiSpec::default(),
            };
            let grid = GeometricGrid::new(grid_ratio.unwrap_or(spec.ratio), h_lower.unwrap_or(spec.h_lower))
                .map_err(config_error)?;
            let lrv = LrvParams {
                eta: lrv_eta.unwrap_or(spec.eta),
                lag_window: lrv_rn.unwrap_or(spec.lag_window),
                centered: spec.centered,
            };
            let series = simulate(&r)?;
            let curve = select_local_curve(
                &series,
                &midpoint_grid(u_points),
                &grid,
                c_sharp.unwrap_or(spec.c_sharp),
                &Kernel::epanechnikov(),
                &lrv,
            )?;
            curve.write_csv(sink(global, "lepski.csv")?)
        }
        Command::Experiment => {
            let mut cfg = cfg.ok_or_else(|| Error::Config("experiment needs --config".into()))?;
            if let Some(seed) = global.seed {
                cfg.base_seed = seed;
            }
            if global.workers.is_some() {
                cfg.workers = global.workers;
            }
            cfg.validate()?;
            let dir = global
                .out_dir
                .clone()
                .or(cfg.out_dir.clone())
                .unwrap_or_else(|| PathBuf::from("results"));
            let result = run_experiment(&cfg, &dir)?;
            eprintln!(
                "{} replications ({} failed) written to {}",
                result.records.len(),
                result.failed(),
                dir.display()
            );
            Ok(())
        }
        Command::Figures { figures, dest } => {
            let dir = global
                .out_dir
                .clone()
                .ok_or_else(|| Error::Config("figures needs --out-dir of a finished run".into()))?;
            let result = load_result(&dir)?;
            let ids = if figures.is_empty() {
                FigureId::for_result(&result)
            } else {
                figures.iter().map(|s| s.parse()).collect::<Result<Vec<FigureId>>>()?
            };
            let dest = dest.unwrap_or_else(|| dir.join("figures"));
            for id in ids {
                let path = emit_figures_data(&result, id, &dest)?;
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::UnknownKernel(_) | Error::UnknownFigure(_) => 2,
                Error::FailureBudget { .. } => 3,
                _ => 1,
            })
        }
    }
}
