mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Parser, Subcommand};
use qwishart::state::FieldKind;

pub const OUT_DIR_ENV: &str = "QWISHART_OUT_DIR";

static VERSION: LazyLock<String> =
    LazyLock::new(|| format!("{} (rng: {})", env!("CARGO_PKG_VERSION"), qwishart::rng::RNG_ALGORITHM));

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Lib(qwishart::Error),
}

impl From<qwishart::Error> for CliError {
    fn from(e: qwishart::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(e) if e.is_numeric() => 3,
            CliError::Lib(_) => 2,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config(m) => serde_json::json!({"error": "Config", "message": m}),
            CliError::Lib(e) => serde_json::json!({"error": e.kind(), "message": e.to_string()}),
        }
    }
}

#[derive(Parser)]
#[command(name = "qwishart", version = VERSION.as_str(), about = "Quantum Wishart sampling and qubit posterior experiments")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for relative output paths (default: $QWISHART_OUT_DIR or ".").
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log density of an isotropic all-mu Wishart ensemble at a qubit state.
    Density {
        #[arg(long)]
        field: FieldKind,
        #[arg(long = "N")]
        columns: usize,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 0.0)]
        z: f64,
    },
    /// Draw Wishart states to CSV (Bloch vectors) or JSON lines (matrices).
    SampleWishart {
        #[arg(long)]
        field: FieldKind,
        #[arg(long = "N")]
        columns: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// `.csv` writes Bloch vectors (qubits only), anything else JSON lines.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean that puts the density peak at radius r, or a stationary point from a config.
    FitPeak {
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        phi: Option<f64>,
        #[arg(long = "N")]
        columns: Option<usize>,
        #[arg(long)]
        field: Option<FieldKind>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Constrained MLE for a built-in POM.
    Mle {
        #[arg(long)]
        pom: String,
        /// Comma-separated counts.
        #[arg(long, value_delimiter = ',')]
        clicks: Vec<u64>,
    },
    /// Rejection-sample a posterior; writes samples CSV and report JSON.
    PosteriorSample {
        #[arg(long)]
        config: PathBuf,
    },
    /// Size and credibility curves from uniform and posterior sample CSVs.
    Blr {
        #[arg(long)]
        config: PathBuf,
    },
    /// Acceptance rates over a knob grid, or a built-in preset table.
    BenchAcceptance {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// One of: near-pure-single, near-pure-mixture, boundary-sparse, boundary-dense, crosshair-real, crosshair-complex, trine.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-stage timing of the full posterior-sampling pipeline.
    BenchTime {
        #[arg(long)]
        config: PathBuf,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let ctx = commands::Context { out_dir: out_dir(cli.out_dir) };
    match cli.command {
        Command::Density { field, columns, mu, x, y, z } => commands::density(field, columns, mu, [x, y, z]),
        Command::SampleWishart { field, columns, dim, mu, n, seed, out } => {
            commands::sample_wishart(&ctx, field, columns, dim, mu, n, seed, &out)
        }
        Command::FitPeak { r, theta, phi, columns, field, config } => {
            commands::fit_peak(r, theta, phi, columns, field, config.as_deref())
        }
        Command::Mle { pom, clicks } => commands::mle(&pom, &clicks),
        Command::PosteriorSample { config } => commands::posterior_sample(&ctx, &config),
        Command::Blr { config } => commands::blr(&ctx, &config),
        Command::BenchAcceptance { config, preset, out } => {
            commands::bench_acceptance(&ctx, config.as_deref(), preset.as_deref(), out.as_deref())
        }
        Command::BenchTime { config } => commands::bench_time(&ctx, &config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            eprintln!("{}", serde_json::json!({"error": "Usage", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
