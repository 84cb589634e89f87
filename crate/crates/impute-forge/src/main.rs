use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use impute_forge::commands::{
    cmd_ablation, cmd_analyze, cmd_evaluate, cmd_impute, cmd_replay, impute_manifest, make_backend,
};
use impute_forge::config::PolicyKind;
use impute_forge::{CliError, RunConfig};
use impute_forge_core::backend::BackendKind;

#[derive(Parser)]
#[command(name = "impute-forge", version, about = "Correlation-pruned, group-wise LLM imputation for class-imbalanced tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Association profiles, elbows, thresholds and predictor sets.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Print the resolved thresholds as JSON on stdout.
        #[arg(long)]
        emit_thresholds: bool,
    },
    /// Impute every planned feature and write the completed tables.
    Impute {
        #[command(flatten)]
        common: Common,
    },
    /// Train on complete rows and score the imputed ones.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Imputed CSV files; defaults to the runs of the last impute.
        #[arg(long)]
        imputed: Vec<PathBuf>,
    },
    /// Compare grouped and ungrouped prompts.
    Ablation {
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Elbow,
    Fixed,
    GlobalMin,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Http,
    Mock,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Fixed threshold; repeat for several runs.
    #[arg(long = "threshold")]
    thresholds: Vec<f64>,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write every rendered prompt and its row manifest here.
    #[arg(long)]
    dump_prompts: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = self.dataset {
            cfg.dataset = p;
        }
        if let Some(p) = self.schema {
            cfg.schema = p;
        }
        if !self.thresholds.is_empty() {
            cfg.policy.thresholds = self.thresholds;
            cfg.policy.kind = PolicyKind::Fixed;
        }
        if let Some(p) = self.policy {
            cfg.policy.kind = match p {
                Policy::Elbow => PolicyKind::Elbow,
                Policy::Fixed => PolicyKind::Fixed,
                Policy::GlobalMin => PolicyKind::GlobalMin,
            };
        }
        if let Some(b) = self.backend {
            cfg.backend.kind = match b {
                Backend::Http => BackendKind::Http,
                Backend::Mock => BackendKind::Mock,
            };
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.dump_prompts {
            cfg.dump_prompts = Some(d);
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        Ok(cfg)
    }
}

fn dispatch(command: Command, cancel: &AtomicBool) -> Result<(), CliError> {
    match command {
        Command::Analyze { common, emit_thresholds } => {
            cmd_analyze(&common.resolve()?, emit_thresholds)?;
        }
        Command::Impute { common } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            let backend = make_backend(&cfg.backend)?;
            let m = cmd_impute(&cfg, backend.as_ref(), cancel)?;
            eprintln!("manifest: {}", impute_forge::manifest::Manifest::path(&m.config.out).display());
        }
        Command::Evaluate { common, imputed } => {
            let cfg = common.resolve()?;
            let source = impute_manifest(&cfg.out);
            cmd_evaluate(&cfg, &imputed, source.as_ref().map(|m| m.runs.as_slice()))?;
        }
        Command::Ablation { common } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            let backend = make_backend(&cfg.backend)?;
            cmd_ablation(&cfg, backend.as_ref(), cancel)?;
        }
        Command::Replay { manifest, out } => {
            let r = cmd_replay(&manifest, out.as_deref(), cancel)?;
            if r.differences.is_empty() {
                eprintln!("replay matches: {} outputs identical", r.manifest.outputs.len());
            } else {
                return Err(CliError::Data(format!("replay differs in: {}", r.differences.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    if let Err(e) = ctrlc::set_handler(move || {
        if flag.swap(true, Ordering::SeqCst) {
            std::process::exit(130);
        }
        eprintln!("interrupt: finishing the current batch, press Ctrl-C again to abort");
    }) {
        eprintln!("warning: cannot install the Ctrl-C handler: {e}");
    }
    match dispatch(cli.command, &cancel) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
