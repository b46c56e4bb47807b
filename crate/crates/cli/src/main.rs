use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grasp_cli::commands::{cmd_eval, cmd_generate, cmd_plan, cmd_render, cmd_train, Policy, DATASET_DIR};
use grasp_cli::objects::write_builtin_objects;
use grasp_cli::{CliResult, PipelineConfig};

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "grasp", version, about = "Grasp dataset generation, network training and depth-image grasp planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Label grasps on every mesh, render images and write the grasp-image dataset.
    Generate(Common),
    /// Train the grasp-quality network on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory; defaults to `<out>/dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the validation split of a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Render a scene and plan a grasp on its depth image.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Mesh index in name order; drawn from the seed when omitted.
        #[arg(long)]
        object: Option<usize>,
        #[arg(long, value_enum, default_value = "argmax")]
        policy: Policy,
    },
    /// Render a depth image of a sampled scene.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        object: Option<usize>,
        /// Render the table alone.
        #[arg(long)]
        empty: bool,
    },
    /// Write the built-in desk-scale object set as OBJ meshes.
    Objects {
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn load(common: &Common) -> CliResult<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = load(&c)?;
            cmd_generate(&cfg, &c.out)?;
        }
        Command::Train { common, dataset } => {
            let cfg = load(&common)?;
            let dataset = dataset.unwrap_or_else(|| common.out.join(DATASET_DIR));
            let (_, s) = cmd_train(&cfg, &dataset, &common.out)?;
            out!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Eval { common, checkpoint, dataset } => {
            cmd_eval(&checkpoint, &dataset, &common.out)?;
        }
        Command::Plan {
            common,
            checkpoint,
            object,
            policy,
        } => {
            let cfg = load(&common)?;
            let out = cmd_plan(&cfg, &checkpoint, cfg.seed, object, policy, &common.out)?;
            let g = out.result.grasp;
            out!(
                "q={:.4} row={:.2} col={:.2} angle={:.4} depth={:.4} seconds={:.2}",
                out.result.q, g.row, g.col, g.angle, g.depth, out.result.seconds
            );
        }
        Command::Render { common, object, empty } => {
            let cfg = load(&common)?;
            let p = cmd_render(&cfg, cfg.seed, object, empty, &common.out)?;
            out!("{}", p.display());
        }
        Command::Objects { out } => {
            for p in write_builtin_objects(&out)? {
                out!("{}", p.display());
            }
        }
        Command::DefaultConfig => {
            out!("{}", serde_json::to_string_pretty(&PipelineConfig::default())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| {
            writeln!(
                buf,
                "ts={} level={} target={} msg=\"{}\"",
                buf.timestamp_millis(),
                rec.level(),
                rec.target(),
                rec.args().to_string().replace('"', "'")
            )
        })
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
