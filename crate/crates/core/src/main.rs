use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dynsync::estimators::Method;
use dynsync::experiment::{self, ExperimentConfig};
use dynsync::signal::{self as format, StackedSignal};
use dynsync::{metrics, selftest, C64};

#[derive(Parser)]
#[command(name = "dynsync", version, about = "Dynamic angular synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a ground truth and one measurement stack.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run one estimator on a measurement file.
    Estimate {
        /// Measurement stack to read.
        #[arg(long)]
        input: PathBuf,
        /// Ground truth, needed for oracle selection and for reporting RMSE.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Monte-Carlo sweep over T.
    SweepT {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Monte-Carlo sweep over the noise level at the first T.
    SweepNoise {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Power iterations seeded by each init estimator.
    PpmBench {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the invariant suite.
    Selftest,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Key/value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// One or more T values (comma separated or repeated).
    #[arg(long)]
    t: Vec<String>,
    /// A number, 1/T or T^1/4.
    #[arg(long)]
    st: Option<String>,
    #[arg(long)]
    sigma: Vec<String>,
    #[arg(long)]
    eta: Vec<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    estimators: Vec<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    lambda_scale: Option<String>,
    /// auto, fixed-tau=K, fixed-lambda=X or oracle.
    #[arg(long)]
    selection: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    ppm_iters: Option<String>,
    #[arg(long)]
    ppm_inits: Vec<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Add a wall_ms column (breaks byte-for-byte reproducibility).
    #[arg(long)]
    timings: bool,
    /// Output file; for `generate`, a directory.
    #[arg(long)]
    out: Option<String>,
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(String),
}

impl From<dynsync::Error> for Failure {
    fn from(e: dynsync::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else if matches!(e, dynsync::Error::Io(_)) {
            Failure::Other(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        }
        let single = [
            ("model", &self.model),
            ("n", &self.n),
            ("st", &self.st),
            ("p", &self.p),
            ("runs", &self.runs),
            ("seed", &self.seed),
            ("lambda-scale", &self.lambda_scale),
            ("selection", &self.selection),
            ("delta", &self.delta),
            ("mu", &self.mu),
            ("ppm-iters", &self.ppm_iters),
            ("threads", &self.threads),
            ("out", &self.out),
        ];
        for (key, value) in single {
            if let Some(v) = value {
                cfg.set(key, v, true).map_err(|e| Failure::Config(format!("--{key}: {e}")))?;
            }
        }
        let lists = [
            ("t", &self.t),
            ("sigma", &self.sigma),
            ("eta", &self.eta),
            ("estimators", &self.estimators),
            ("ppm-inits", &self.ppm_inits),
        ];
        for (key, values) in lists {
            for (i, v) in values.iter().enumerate() {
                cfg.set(key, v, i == 0).map_err(|e| Failure::Config(format!("--{key}: {e}")))?;
            }
        }
        if self.timings {
            cfg.timings = true;
        }
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Other(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn generate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let t = cfg.t[0];
    let gamma = cfg.noise_levels()[0];
    let (truth, a) = experiment::generate_instance(cfg, t, gamma, cfg.seed)?;
    let mut w = output(Some(&dir.join("truth.csv")))?;
    format::write_signal(&mut w, &truth)?;
    w.flush()?;
    let mut w = output(Some(&dir.join("measurements.csv")))?;
    format::write_measurements(&mut w, &a)?;
    w.flush()?;
    eprintln!("wrote {} and {}", dir.join("truth.csv").display(), dir.join("measurements.csv").display());
    Ok(())
}

fn estimate(cfg: &ExperimentConfig, input: &Path, truth_path: Option<&Path>) -> Result<(), Failure> {
    let [method] = cfg.estimators[..] else {
        return Err(Failure::Config("estimate takes exactly one estimator".into()));
    };
    let a = format::read_measurements(open(input)?)?;
    let truth = match truth_path {
        Some(p) => Some(format::read_signal(open(p)?)?),
        None => None,
    };
    if cfg.selection == experiment::Selection::OracleTau && truth.is_none() {
        return Err(Failure::Config("oracle selection needs --truth".into()));
    }
    let placeholder;
    let reference = match &truth {
        Some(g) => g,
        None => {
            placeholder = StackedSignal::from_tails(a.n(), &vec![C64::new(1.0, 0.0); (a.n() - 1) * a.t()])?;
            &placeholder
        }
    };
    let gamma = cfg.noise_levels()[0];
    let selected = if method == Method::Ppm {
        let init = experiment::select_and_estimate(cfg, &a, reference, gamma, cfg.ppm_inits[0])?;
        experiment::ppm_from_seed(cfg, &a, &init.estimate)?
    } else {
        experiment::select_and_estimate(cfg, &a, reference, gamma, method)?
    };
    let mut summary = format!("estimator={method}");
    let fields = [("beta", selected.beta), ("lambda", selected.lambda), ("tau", selected.tau.map(|t| t as f64))];
    for (name, v) in fields {
        if let Some(v) = v {
            summary.push_str(&format!(" {name}={v}"));
        }
    }
    if let Some(g) = &truth {
        summary.push_str(&format!(" rmse={}", metrics::rmse(&selected.estimate, g)?));
    }
    eprintln!("{summary}");
    let mut w = output(cfg.out.as_deref())?;
    format::write_signal(&mut w, &selected.estimate)?;
    w.flush()?;
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, kind: &str) -> Result<(), Failure> {
    let mut w = output(cfg.out.as_deref())?;
    match kind {
        "sweep-t" => experiment::write_sweep_csv(&mut w, cfg, kind, &experiment::run_sweep_t(cfg)?)?,
        "sweep-noise" => experiment::write_sweep_csv(&mut w, cfg, kind, &experiment::run_sweep_noise(cfg)?)?,
        _ => experiment::write_ppm_csv(&mut w, cfg, &experiment::run_ppm_experiment(cfg)?)?,
    }
    w.flush()?;
    Ok(())
}

fn run_selftest() -> Result<bool, Failure> {
    let mut failed = 0;
    let mut total = 0.0;
    for c in selftest::run_all() {
        total += c.seconds;
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:<45} {:>7.2}s  {}", c.name, c.seconds, c.detail);
        failed += usize::from(!c.passed);
    }
    println!("{} checks, {failed} failed, {total:.1}s", selftest::CHECKS.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { cfg } => cfg.resolve().and_then(|c| generate(&c)).map(|_| true),
        Command::Estimate { input, truth, cfg } => cfg.resolve().and_then(|c| estimate(&c, input, truth.as_deref())).map(|_| true),
        Command::SweepT { cfg } => cfg.resolve().and_then(|c| sweep(&c, "sweep-t")).map(|_| true),
        Command::SweepNoise { cfg } => cfg.resolve().and_then(|c| sweep(&c, "sweep-noise")).map(|_| true),
        Command::PpmBench { cfg } => cfg.resolve().and_then(|c| sweep(&c, "ppm-bench")).map(|_| true),
        Command::Selftest => run_selftest(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
