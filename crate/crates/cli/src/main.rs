//! `bfisense` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "bfisense", version, about = "BFI-based Wi-Fi sensing: transforms, CRB maps, feature selection")]
struct Cli {
    /// Run configuration (TOML, or JSON by `.json` extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "BFISENSE_OUT", default_value = "bfisense-out")]
    out: PathBuf,

    /// Worker threads for position/trial fan-out (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Master seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// SNR in dB (overrides `scenario.snr_db`).
    #[arg(long, global = true, allow_negative_numbers = true)]
    snr_db: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Noiseless (or noisy) CSI at one position.
    SimulateCsi(SimulateArgs),
    /// CSI JSON to BFI JSON.
    Csi2bfi(InputArgs),
    /// BFI JSON back to the steering matrix.
    Bfi2v(InputArgs),
    /// Quantize a BFI JSON and write the packed wire format.
    Quantize(QuantizeArgs),
    /// Per-position CRB and element scores over the ROI.
    CrbMap(RoiArgs),
    /// Greedy CRB-based feature selection.
    Select(SelectArgs),
    /// KS Gaussianity test of BFI noise at one position.
    KsTest(KsArgs),
    /// MUSIC AoD variance against the CRB over SNR.
    MusicMc(MusicArgs),
    /// Dataset generation and MLP positioning.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, allow_negative_numbers = true)]
    aod: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    aoa: Option<f64>,
    #[arg(long)]
    distance: Option<f64>,
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["aod", "aoa", "distance"])]
    x: Option<f64>,
    #[arg(long, allow_negative_numbers = true, requires = "x")]
    y: Option<f64>,
    /// Subcarrier index (1-based).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    noisy: bool,
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    b_psi: Option<u8>,
}

#[derive(Debug, Args)]
struct RoiArgs {
    /// location | aod | aoa | distance
    #[arg(long, value_parser = parse_named::<bfisense::select::Target>)]
    target: Option<bfisense::select::Target>,
    #[arg(long)]
    roi_count: Option<usize>,
    /// Monte-Carlo draws per position.
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    roi: RoiArgs,
    #[arg(long)]
    n_sel: Option<usize>,
    /// information | literal_min
    #[arg(long, value_parser = parse_named::<bfisense::SelectionMode>)]
    mode: Option<bfisense::SelectionMode>,
}

#[derive(Debug, Args)]
struct KsArgs {
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Args)]
struct MusicArgs {
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    select: SelectArgs,
    /// all | proposed | random
    #[arg(long, value_parser = parse_named::<config::FeatureChoice>)]
    features: Option<config::FeatureChoice>,
    #[arg(long)]
    samples_per_position: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Sets both `dataset.seed` and `mlp.seed`.
    #[arg(long)]
    train_seed: Option<u64>,
}

/// Parses a snake_case enum name through its serde representation.
fn parse_named<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Core(bfisense::Error),
    Io(String),
}

impl From<bfisense::Error> for CliError {
    fn from(e: bfisense::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Core(e) if e.is_degenerate() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) => 1,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let code = self.exit_code();
        match self {
            CliError::Schema(m) => json!({"error": "schema", "message": m, "exit_code": code}),
            CliError::Io(m) => json!({"error": "io", "message": m, "exit_code": code}),
            CliError::Core(bfisense::Error::DegeneratePosition { position, reason }) => json!({
                "error": "degenerate_position",
                "message": reason,
                "position": position,
                "exit_code": code,
            }),
            CliError::Core(e) => {
                let kind = match e {
                    bfisense::Error::InvalidInput(_) => "invalid_input",
                    bfisense::Error::Index(_) => "index",
                    bfisense::Error::Degenerate(_) => "degenerate",
                    bfisense::Error::Budget(..) => "budget",
                    bfisense::Error::DegeneratePosition { .. } => unreachable!(),
                };
                json!({"error": kind, "message": e.to_string(), "exit_code": code})
            }
        }
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(snr) = cli.snr_db {
        cfg.scenario.snr_db = Some(snr);
    }
    let roi = |cfg: &mut RunConfig, a: &RoiArgs| {
        if let Some(t) = a.target {
            cfg.roi.target = t;
        }
        if let Some(n) = a.roi_count {
            cfg.roi.count = n;
            cfg.roi.points = None;
        }
        if let Some(n) = a.n_mc {
            cfg.crb.n_mc = n;
        }
    };
    let select = |cfg: &mut RunConfig, a: &SelectArgs| {
        roi(cfg, &a.roi);
        if let Some(n) = a.n_sel {
            cfg.select.n_sel = n;
        }
        if let Some(m) = a.mode {
            cfg.select.mode = m;
        }
    };
    match &cli.command {
        Command::SimulateCsi(a) => {
            if let Some(k) = a.k {
                cfg.csi.k = k;
            }
            cfg.csi.noisy |= a.noisy;
        }
        Command::Quantize(a) => {
            if let Some(b) = a.b_psi {
                cfg.quantize.b_psi = b;
            }
        }
        Command::CrbMap(a) => roi(cfg, a),
        Command::Select(a) => select(cfg, a),
        Command::KsTest(a) => {
            if let Some(n) = a.samples {
                cfg.ks.samples = n;
            }
        }
        Command::MusicMc(a) => {
            if let Some(n) = a.trials {
                cfg.music.trials = n;
            }
        }
        Command::Evaluate(a) => {
            select(cfg, &a.select);
            if let Some(f) = a.features {
                cfg.evaluate.features = f;
            }
            if let Some(n) = a.samples_per_position {
                cfg.dataset.samples_per_position = n;
            }
            if let Some(n) = a.epochs {
                cfg.mlp.epochs = n;
            }
            if let Some(s) = a.train_seed {
                cfg.dataset.seed = s;
                cfg.mlp.seed = s;
            }
        }
        Command::Csi2bfi(_) | Command::Bfi2v(_) => {}
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    apply_overrides(cli, &mut cfg);
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Schema("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cli.out.display())))?;
    let out = commands::Output::new(cli.out.clone());
    let (name, files) = match &cli.command {
        Command::SimulateCsi(a) => ("simulate-csi", commands::simulate_csi(&cfg, &out, a)?),
        Command::Csi2bfi(a) => ("csi2bfi", commands::csi2bfi(&out, &a.input)?),
        Command::Bfi2v(a) => ("bfi2v", commands::bfi2v(&out, &a.input)?),
        Command::Quantize(a) => ("quantize", commands::quantize(&cfg, &out, &a.input)?),
        Command::CrbMap(_) => ("crb-map", commands::crb_map(&cfg, &out)?),
        Command::Select(_) => ("select", commands::select(&cfg, &out)?),
        Command::KsTest(_) => ("ks-test", commands::ks_test(&cfg, &out)?),
        Command::MusicMc(_) => ("music-mc", commands::music_mc(&cfg, &out)?),
        Command::Evaluate(_) => ("evaluate", commands::evaluate(&cfg, &out)?),
    };
    out.manifest(name, &cfg, &files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
