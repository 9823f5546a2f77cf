//! Command-line flags. Every flag overrides the config key of the same name.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{value_parser, Arg, ArgAction, ArgMatches, Args, FromArgMatches, Parser, Subcommand, ValueEnum};
use roadtwin_core::mesh::MeshFormat;
use roadtwin_core::{ClusterParams, Semantic};

use crate::config::{GroundTruth, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "roadtwin", version, about = "Road point clouds to primitive geometric digital twins")]
pub struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Pipeline configuration file (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// More log output; repeat for debug messages.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a labeled cloud into instance files.
    Segment(SegmentArgs),
    /// Extract sectional polygons from every instance into JSON records.
    Extract(ExtractArgs),
    /// Build OBJ or PLY meshes from the JSON records.
    Build(BuildArgs),
    /// Distance from every ground-truth point to its mesh.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic labeled scene with ground truth.
    Synth(SynthArgs),
    /// Run segment, extract, build, evaluate and report in turn.
    Run(RunArgs),
    /// Timing, storage and instance tables.
    Report(OutArgs),
}

#[derive(Clone, Debug, Args)]
pub struct OutArgs {
    /// Output root; each stage writes to <out-dir>/<stage>/.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct SegmentArgs {
    /// Labeled cloud (.ply or .csv).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
    /// Segment name used in record metadata and file names.
    #[arg(long, value_name = "NAME")]
    pub segment: Option<String>,
    #[command(flatten)]
    pub cluster: ClusterOverrides,
}

#[derive(Clone, Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub extract: ExtractOverrides,
}

#[derive(Clone, Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[command(flatten)]
    pub mesh: MeshOverrides,
}

#[derive(Clone, Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Points to measure: preprocessed instances or the raw input cloud.
    #[arg(long, value_enum, value_name = "SET")]
    pub gt: Option<GroundTruth>,
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    /// Labeled cloud (.ply or .csv).
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
    /// Segment name used in record metadata and file names.
    #[arg(long, value_name = "NAME")]
    pub segment: Option<String>,
    #[command(flatten)]
    pub cluster: ClusterOverrides,
    #[command(flatten)]
    pub extract: ExtractOverrides,
    #[command(flatten)]
    pub mesh: MeshOverrides,
    /// Points to measure: preprocessed instances or the raw input cloud.
    #[arg(long, value_enum, value_name = "SET")]
    pub gt: Option<GroundTruth>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 200 m dual carriageway with every asset type.
    #[value(name = "200m")]
    Road200m,
    /// 40 m × 10 m surface with a 0.2 m, 20 m wavelength undulation.
    Undulating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CloudFormatArg {
    Ply,
    Csv,
}

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub out: OutArgs,
    #[arg(long, value_enum, default_value = "200m")]
    pub preset: Preset,
    /// Scene spec file (JSON); replaces the preset.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gaussian noise per coordinate, metres.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Points per square metre of visible surface.
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, value_enum, default_value = "ply")]
    pub cloud_format: CloudFormatArg,
}

#[derive(Clone, Debug, Default, Args)]
pub struct ExtractOverrides {
    /// Grid cell size (both sides) for plane-like assets, metres.
    #[arg(long, value_name = "M")]
    pub grid_size: Option<f64>,
    /// Slice height for pole-like assets, metres.
    #[arg(long, value_name = "M")]
    pub dh: Option<f64>,
    /// Slice length for guardrails, metres.
    #[arg(long, value_name = "M")]
    pub dl: Option<f64>,
    /// Rays per pole ring.
    #[arg(long, value_name = "N")]
    pub rays: Option<usize>,
    #[arg(long, value_name = "ALPHA")]
    pub alpha_fine: Option<f64>,
    #[arg(long, value_name = "ALPHA")]
    pub alpha_coarse: Option<f64>,
}

impl ExtractOverrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        let e = &mut cfg.extract;
        if let Some(g) = self.grid_size {
            *e = e.clone().with_grid(g);
        }
        if let Some(v) = self.dh {
            e.dh = v;
        }
        if let Some(v) = self.dl {
            e.dl = v;
        }
        if let Some(v) = self.rays {
            e.n_rays = v;
        }
        if let Some(v) = self.alpha_fine {
            e.alpha_fine = v;
        }
        if let Some(v) = self.alpha_coarse {
            e.alpha_coarse = v;
        }
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct MeshOverrides {
    /// Mesh file format.
    #[arg(long, value_name = "obj|ply")]
    pub format: Option<MeshFormat>,
    /// Extrude plane-like faces downwards by this many metres.
    #[arg(long, value_name = "M")]
    pub thickness: Option<f64>,
}

impl MeshOverrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(f) = self.format {
            cfg.mesh.format = f;
        }
        if self.thickness.is_some() {
            cfg.mesh.thickness = self.thickness;
        }
    }
}

// Flag names must be 'static; kept in step with `Semantic::flag_name`.
const EPS_FLAGS: [&str; 6] = [
    "eps.road-surface",
    "eps.road-side",
    "eps.road-lane",
    "eps.road-sign",
    "eps.road-light",
    "eps.guardrail",
];
const MIN_PTS_FLAGS: [&str; 6] = [
    "min-pts.road-surface",
    "min-pts.road-side",
    "min-pts.road-lane",
    "min-pts.road-sign",
    "min-pts.road-light",
    "min-pts.guardrail",
];

/// `--eps.<semantic>` and `--min-pts.<semantic>` for each asset type.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClusterOverrides {
    pub eps: BTreeMap<Semantic, f64>,
    pub min_pts: BTreeMap<Semantic, usize>,
}

impl ClusterOverrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        for s in Semantic::ALL {
            let p = cfg.cluster.semantic.entry(s).or_insert_with(|| ClusterParams::default_for(s));
            if let Some(&e) = self.eps.get(&s) {
                p.eps = e;
            }
            if let Some(&m) = self.min_pts.get(&s) {
                p.min_pts = m;
            }
        }
    }
}

impl FromArgMatches for ClusterOverrides {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = Self::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        for (i, s) in Semantic::ALL.into_iter().enumerate() {
            if let Some(&v) = m.get_one::<f64>(EPS_FLAGS[i]) {
                self.eps.insert(s, v);
            }
            if let Some(&v) = m.get_one::<usize>(MIN_PTS_FLAGS[i]) {
                self.min_pts.insert(s, v);
            }
        }
        Ok(())
    }
}

impl Args for ClusterOverrides {
    fn augment_args(mut cmd: clap::Command) -> clap::Command {
        for (i, s) in Semantic::ALL.into_iter().enumerate() {
            cmd = cmd
                .arg(
                    Arg::new(EPS_FLAGS[i])
                        .long(EPS_FLAGS[i])
                        .value_name("M")
                        .value_parser(value_parser!(f64))
                        .help(format!("DBSCAN radius for {} points", s.name())),
                )
                .arg(
                    Arg::new(MIN_PTS_FLAGS[i])
                        .long(MIN_PTS_FLAGS[i])
                        .value_name("N")
                        .value_parser(value_parser!(usize))
                        .help(format!("DBSCAN core size for {} points", s.name())),
                );
        }
        cmd
    }

    fn augment_args_for_update(cmd: clap::Command) -> clap::Command {
        Self::augment_args(cmd)
    }
}
