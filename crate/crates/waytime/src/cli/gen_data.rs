use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use waytime_core::dataprep::{synth_curves, LabelConfig, SynthConfig};

use super::{base_config, usage, write_manifest, CliResult, Common, GlobalArgs};
use crate::formats::{read_curves, write_curves, write_dataset};
use crate::label::build_dataset_par;

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Curves JSONL, one `{"id", "points"}` object per line.
    #[arg(long, conflicts_with = "synthetic")]
    pub input: Option<PathBuf>,
    /// Generate seeded synthetic curves instead of reading a file.
    #[arg(long)]
    pub synthetic: bool,
    /// Number of synthetic curves.
    #[arg(long)]
    pub curves: Option<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Speed limit of the trapezoidal initialization.
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Iteration cap of the descent refinement.
    #[arg(long)]
    pub bgd_max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenDataConfig {
    #[serde(flatten)]
    pub common: Common,
    pub input: Option<PathBuf>,
    pub synthetic: bool,
    pub curves: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub synth: SynthConfig,
    pub label: LabelConfig,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        Self {
            common: Common::default(),
            input: None,
            synthetic: false,
            curves: 100,
            n_min: 3,
            n_max: 12,
            synth: SynthConfig::default(),
            label: LabelConfig::default(),
        }
    }
}

impl GenDataConfig {
    pub fn resolve(g: &GlobalArgs, a: &GenDataArgs) -> CliResult<Self> {
        let mut c: Self = base_config(g, "gen-data")?;
        c.common.apply(g);
        if let Some(p) = &a.input {
            c.input = Some(p.clone());
            c.synthetic = false;
        }
        if a.synthetic {
            c.synthetic = true;
            c.input = None;
        }
        if let Some(v) = a.curves {
            c.curves = v;
        }
        if let Some(v) = a.n_min {
            c.n_min = v;
        }
        if let Some(v) = a.n_max {
            c.n_max = v;
        }
        if let Some(v) = a.v_max {
            c.label.tvp.v_max = v;
        }
        if let Some(v) = a.a_max {
            c.label.tvp.a_max = v;
        }
        if let Some(v) = a.bgd_max_iters {
            c.label.bgd.max_iters = v;
        }
        c.synth.seed = c.common.seed;
        if c.input.is_none() && !c.synthetic {
            return usage("give --input <curves.jsonl> or --synthetic");
        }
        if c.n_min < 2 || c.n_min > c.n_max {
            return usage(format!("bad waypoint range {}..={}", c.n_min, c.n_max));
        }
        Ok(c)
    }
}

pub fn run(g: &GlobalArgs, a: &GenDataArgs) -> CliResult<()> {
    let c = GenDataConfig::resolve(g, a)?;
    c.label.tvp.validate()?;
    c.label.bgd.validate()?;
    let curves = match &c.input {
        Some(p) => read_curves(p)?,
        None => synth_curves(&c.synth, c.curves)?,
    };
    if curves.is_empty() {
        return usage("no curves to label");
    }
    c.common.prepare_out_dir()?;
    let curves_path = c.common.out("curves.jsonl");
    write_curves(&curves_path, &curves)?;
    let build = build_dataset_par(&curves, c.n_min..=c.n_max, &c.label, c.common.threads)?;
    let dataset_path = c.common.out("dataset.jsonl");
    write_dataset(&dataset_path, &build.samples)?;
    let converged = build.samples.iter().filter(|s| s.converged).count();
    eprintln!(
        "{} samples from {} curves ({} converged, {} rejected) -> {}",
        build.samples.len(),
        curves.len(),
        converged,
        build.rejected.len(),
        dataset_path.display()
    );
    let inputs: Vec<&std::path::Path> = c.input.iter().map(|p| p.as_path()).collect();
    write_manifest(&c.common, "gen-data", &c, &inputs, &[&curves_path, &dataset_path])
}
