use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use patdiag_pipeline::{AnnotationSource, Pipeline, PipelineConfig, PipelineError, StageOutcome};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StageArg {
    Ingest,
    Synth,
    TrainNre,
    Extract,
    Refine,
    Fuse,
    Retrain,
    Eval,
    Report,
    Diagnose,
}

/// Diagnose and repair noisy distant-supervision labels.
#[derive(Debug, Parser)]
#[command(name = "patdiag", version)]
struct Cli {
    #[arg(value_enum)]
    stage: StageArg,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the `seed` key of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Replay annotations from a journal file (refine only).
    #[arg(long, conflicts_with_all = ["oracle", "serve"])]
    annotations: Option<PathBuf>,
    /// Label every sampled item with its gold label (refine only).
    #[arg(long, conflicts_with = "serve")]
    oracle: bool,
    /// Collect annotations through the HTTP service (refine only).
    #[arg(long)]
    serve: bool,
    #[arg(long, default_value_t = 8077, requires = "serve")]
    port: u16,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let refine_flag = cli.oracle || cli.serve || cli.annotations.is_some();
    if refine_flag && !matches!(cli.stage, StageArg::Refine) {
        return Err(PipelineError::Usage(
            "--oracle, --serve and --annotations apply to the refine stage only".into(),
        ));
    }
    let p = Pipeline::new(config)?;
    let outcome = match cli.stage {
        StageArg::Ingest => p.ingest()?,
        StageArg::Synth => p.synth()?,
        StageArg::TrainNre => p.train_nre()?,
        StageArg::Extract => p.extract()?,
        StageArg::Refine => {
            let source = if cli.oracle {
                AnnotationSource::Oracle
            } else if cli.serve {
                AnnotationSource::Serve { port: cli.port }
            } else if let Some(j) = cli.annotations {
                AnnotationSource::Journal(j)
            } else {
                AnnotationSource::None
            };
            p.refine(&source)?
        }
        StageArg::Fuse => p.fuse()?,
        StageArg::Retrain => p.retrain()?,
        StageArg::Eval => p.eval()?,
        StageArg::Report => {
            let o = p.report()?;
            print!("{}", p.read_report()?.render_text());
            o
        }
        StageArg::Diagnose => {
            print!("{}", p.diagnose()?.render_text());
            StageOutcome::Ran
        }
    };
    if outcome == StageOutcome::Pending {
        eprintln!("refine: waiting for annotations");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
