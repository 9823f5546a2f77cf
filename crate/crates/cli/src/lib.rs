//! The `roadtwin` command line: each pipeline stage as a subcommand, plus
//! `run` for all of them in sequence.

pub mod args;
pub mod config;
pub mod error;
pub mod pipeline;

use std::ffi::OsString;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use clap::Parser;
use roadtwin_core::synth::SceneSpec;
use roadtwin_core::CloudFormat;

use args::{Cli, CloudFormatArg, Command, Preset};
use config::PipelineConfig;
use error::CliError;
use pipeline::Layout;

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 2 for config errors, 3 for data errors, 4 for internal ones.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logger(cli.verbose);
    match catch_unwind(AssertUnwindSafe(|| execute(&cli))) {
        Ok(Ok(summary)) => {
            print!("{summary}");
            0
        }
        Ok(Err(e)) => {
            eprintln!("roadtwin: {e}");
            e.exit_code()
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            eprintln!("roadtwin: internal error: {msg}");
            4
        }
    }
}

fn init_logger(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
}

/// The effective configuration: file (or defaults), then flags.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Segment(a) => {
            if let Some(s) = &a.segment {
                cfg.segment = s.clone();
            }
            a.cluster.apply(&mut cfg);
        }
        Command::Extract(a) => a.extract.apply(&mut cfg),
        Command::Build(a) => a.mesh.apply(&mut cfg),
        Command::Run(a) => {
            if let Some(s) = &a.segment {
                cfg.segment = s.clone();
            }
            a.cluster.apply(&mut cfg);
            a.extract.apply(&mut cfg);
            a.mesh.apply(&mut cfg);
            if let Some(g) = a.gt {
                cfg.evaluate.ground_truth = g;
            }
        }
        Command::Evaluate(a) => {
            if let Some(g) = a.gt {
                cfg.evaluate.ground_truth = g;
            }
        }
        Command::Synth(_) | Command::Report(_) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scene_spec(a: &args::SynthArgs) -> Result<SceneSpec, CliError> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read scene spec {}: {e}", path.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| {
                let at = e.path().to_string();
                CliError::Config(format!("{}: key `{at}`: {}", path.display(), e.into_inner()))
            })?
        }
        None => match a.preset {
            Preset::Road200m => SceneSpec::preset_200m(7),
            Preset::Undulating => SceneSpec::undulating_patch(40.0, 10.0, 0.2, 20.0, 7),
        },
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(s) = a.sigma {
        spec.sigma = s;
    }
    if let Some(d) = a.density {
        spec.density = d;
    }
    Ok(spec)
}

/// Runs one parsed command and returns a human-readable summary.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let cfg = resolve_config(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    pool.install(|| dispatch(cli, &cfg))
}

fn dispatch(cli: &Cli, cfg: &PipelineConfig) -> Result<String, CliError> {
    let layout = |dir: &Path| Layout::new(dir);
    Ok(match &cli.command {
        Command::Segment(a) => {
            let s = pipeline::segment(cfg, &a.input, &layout(&a.out.out_dir))?;
            let m = &s.manifest;
            format!(
                "segment: {} instances from {} points ({} kept)\n",
                m.instances.len(),
                m.points_in,
                m.points_kept
            )
        }
        Command::Extract(a) => {
            let s = pipeline::extract(cfg, &layout(&a.out.out_dir))?;
            format!("extract: {} records, {} warnings\n", s.records.len(), s.warnings.len())
        }
        Command::Build(a) => {
            let s = pipeline::build(cfg, &layout(&a.out.out_dir))?;
            format!("build: {} meshes, {} warnings\n", s.meshes.len(), s.warnings.len())
        }
        Command::Evaluate(a) => pipeline::evaluate(cfg, &layout(&a.out.out_dir))?.to_table(),
        Command::Synth(a) => {
            let spec = scene_spec(a)?;
            let format = match a.cloud_format {
                CloudFormatArg::Ply => CloudFormat::Ply,
                CloudFormatArg::Csv => CloudFormat::Csv,
            };
            let p = pipeline::synth(&spec, &layout(&a.out.out_dir), format)?;
            format!("synth: wrote {}\n", p.cloud.display())
        }
        Command::Run(a) => pipeline::run(cfg, &a.input, &layout(&a.out.out_dir))?.report.to_text(),
        Command::Report(a) => pipeline::report(&layout(&a.out_dir))?.to_text(),
    })
}
