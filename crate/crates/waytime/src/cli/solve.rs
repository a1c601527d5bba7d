use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use waytime_core::dataprep::to_range_angle;
use waytime_core::evalkit::{normalized_cost, Allocator};
use waytime_core::timealloc::{refine_bgd, tvp_allocate, BgdConfig, TvpLimits};
use waytime_core::trajopt::{evaluate, sample_trajectory, solve_min_snap};
use waytime_core::{BoundaryConfig, Point2, TimeAllocation, WaypointPath};

use super::{base_config, usage, write_manifest, CliResult, Common, GlobalArgs};
use crate::checkpoint::load_transformer;
use crate::error::IoContext;
use crate::formats::csvout::{write_attention_record, write_bgd_log, write_trajectory};
use crate::formats::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Tvp,
    Bgd,
    Model,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Inline waypoints: `x,y;x,y;...`
    #[arg(long, allow_hyphen_values = true, conflicts_with = "input")]
    pub waypoints: Option<String>,
    /// JSON file with `[[x, y], ...]` or `{"points": [[x, y], ...]}`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<SolveMethod>,
    /// Transformer checkpoint for `--method model`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Trajectory samples per second.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Also write an SVG of the path and waypoints.
    #[arg(long)]
    pub plot: bool,
    /// Dump the model's cross-attention maps (method model).
    #[arg(long)]
    pub attention: bool,
    #[arg(long)]
    pub v_max: Option<f64>,
    #[arg(long)]
    pub a_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    #[serde(flatten)]
    pub common: Common,
    pub waypoints: Vec<[f64; 2]>,
    pub method: SolveMethod,
    pub checkpoint: Option<PathBuf>,
    pub rate: f64,
    pub plot: bool,
    pub attention: bool,
    pub tvp: TvpLimits,
    pub bgd: BgdConfig,
    pub boundary: BoundaryConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            common: Common::default(),
            waypoints: Vec::new(),
            method: SolveMethod::Tvp,
            checkpoint: None,
            rate: 100.0,
            plot: false,
            attention: false,
            tvp: TvpLimits::default(),
            bgd: BgdConfig::default(),
            boundary: BoundaryConfig::default(),
        }
    }
}

pub(super) fn parse_inline(s: &str) -> CliResult<Vec<[f64; 2]>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: Vec<&str> = p.split(',').map(str::trim).collect();
            match v.as_slice() {
                [x, y] => match (x.parse(), y.parse()) {
                    (Ok(x), Ok(y)) => Ok([x, y]),
                    _ => usage(format!("bad waypoint {p:?}")),
                },
                _ => usage(format!("bad waypoint {p:?}; expected x,y")),
            }
        })
        .collect()
}

fn read_points(path: &Path) -> CliResult<Vec<[f64; 2]>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Doc {
        Bare(Vec<[f64; 2]>),
        Curve { points: Vec<[f64; 2]> },
    }
    let text = fs::read_to_string(path).at(path)?;
    let doc: Doc = serde_json::from_str(&text).map_err(crate::Error::from)?;
    Ok(match doc {
        Doc::Bare(p) | Doc::Curve { points: p } => p,
    })
}

impl SolveConfig {
    pub fn resolve(g: &GlobalArgs, a: &SolveArgs) -> CliResult<Self> {
        let mut c: Self = base_config(g, "solve")?;
        c.common.apply(g);
        if let Some(s) = &a.waypoints {
            c.waypoints = parse_inline(s)?;
        }
        if let Some(p) = &a.input {
            c.waypoints = read_points(p)?;
        }
        if let Some(m) = a.method {
            c.method = m;
        }
        if let Some(p) = &a.checkpoint {
            c.checkpoint = Some(p.clone());
        }
        if let Some(r) = a.rate {
            c.rate = r;
        }
        c.plot |= a.plot;
        c.attention |= a.attention;
        if let Some(v) = a.v_max {
            c.tvp.v_max = v;
        }
        if let Some(v) = a.a_max {
            c.tvp.a_max = v;
        }
        if c.waypoints.len() < 2 {
            return usage("need at least two waypoints (--waypoints or --input)");
        }
        if c.method == SolveMethod::Model && c.checkpoint.is_none() {
            return usage("--method model needs --checkpoint");
        }
        if !(c.rate > 0.0 && c.rate.is_finite()) {
            return usage("--rate must be positive");
        }
        Ok(c)
    }
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    method: SolveMethod,
    total_time: f64,
    durations: Vec<f64>,
    fractions: Vec<f64>,
    cost: f64,
    normalized_cost: f64,
    max_waypoint_error: f64,
}

pub fn run(g: &GlobalArgs, a: &SolveArgs) -> CliResult<()> {
    let c = SolveConfig::resolve(g, a)?;
    let path = WaypointPath::from_xy(&c.waypoints)?;
    let tvp = tvp_allocate(&path, &c.tvp)?;
    let total = tvp.total();
    c.common.prepare_out_dir()?;
    let mut outputs = Vec::new();
    let mut inputs = Vec::new();
    let alloc = match c.method {
        SolveMethod::Tvp => tvp,
        SolveMethod::Bgd => {
            let out = refine_bgd(&path, &tvp, &c.bgd, &c.boundary)?;
            let log_path = c.common.out("bgd_log.csv");
            write_bgd_log(&log_path, &out.log)?;
            outputs.push(log_path);
            if !out.converged {
                log::warn!("descent stopped at the iteration cap");
            }
            out.allocation
        }
        SolveMethod::Model => {
            let ckpt = c.checkpoint.as_ref().expect("checked in resolve");
            let (model, _) = load_transformer(ckpt)?;
            inputs.push(ckpt.clone());
            let ra = to_range_angle(&path)?;
            let fractions = model.allocate(&ra)?;
            if c.attention {
                let dir = c.common.out("attention");
                write_attention_record(&dir, &model.decode(&ra)?.attention)?;
            }
            TimeAllocation::from_fractions(&fractions, total)?
        }
    };
    let (traj, cost) = solve_min_snap(&path, &alloc, &c.boundary)?;
    let mut t: f64 = 0.0;
    let mut max_err: f64 = 0.0;
    for (i, p) in path.points().iter().enumerate() {
        let q = evaluate(&traj, t.min(traj.total_time()), 0)?;
        max_err = max_err.max((q - *p).norm());
        if let Some(d) = alloc.durations().get(i) {
            t += d;
        }
    }
    let samples = sample_trajectory(&traj, c.rate)?;
    let traj_path = c.common.out("trajectory.csv");
    write_trajectory(&traj_path, &samples)?;
    outputs.push(traj_path);
    if c.plot {
        let svg_path = c.common.out("trajectory.svg");
        let pts: Vec<Point2> = samples.iter().map(|s| s.pos).collect();
        fs::write(&svg_path, svg::path(path.points(), &pts)).at(&svg_path)?;
        outputs.push(svg_path);
    }
    let summary = SolveSummary {
        method: c.method,
        total_time: alloc.total(),
        durations: alloc.durations().to_vec(),
        fractions: alloc.fractions(),
        cost: cost.value(),
        normalized_cost: normalized_cost(cost)?,
        max_waypoint_error: max_err,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(crate::Error::from)?;
    let summary_path = c.common.out("solve.json");
    fs::write(&summary_path, text.clone() + "\n").at(&summary_path)?;
    outputs.push(summary_path);
    println!("{text}");
    let ins: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let outs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_manifest(&c.common, "solve", &c, &ins, &outs)
}
