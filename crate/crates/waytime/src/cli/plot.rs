use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use waytime_core::evalkit::{Histogram, Method};
use waytime_core::Point2;

use super::{base_config, usage, write_manifest, CliResult, Common, GlobalArgs};
use crate::error::IoContext;
use crate::formats::csvout::read_attention_map;
use crate::formats::svg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Trajectory CSV (t, x, y, ...).
    Trajectory,
    /// Cost report CSV; error histogram per method.
    Histogram,
    /// Attention map CSV; heat map.
    Attention,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, value_enum)]
    pub kind: Option<PlotKind>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output SVG; defaults to the input path with an `.svg` extension in
    /// the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Waypoints to mark on a trajectory plot: `x,y;x,y;...`
    #[arg(long, allow_hyphen_values = true)]
    pub waypoints: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlotConfig {
    #[serde(flatten)]
    pub common: Common,
    pub kind: Option<PlotKind>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub bins: usize,
    pub waypoints: Vec<[f64; 2]>,
}

impl Default for PlotConfig {
    fn default() -> Self {
        Self { common: Common::default(), kind: None, input: None, output: None, bins: 20, waypoints: Vec::new() }
    }
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| crate::Error::Format(format!("{}: no column {name:?}", path.display())).into())
}

fn parse(s: &str, path: &Path) -> crate::Result<f64> {
    s.parse().map_err(|e| crate::Error::Format(format!("{}: {s:?}: {e}", path.display())))
}

fn trajectory_svg(input: &Path, waypoints: &[[f64; 2]]) -> CliResult<String> {
    let mut r = csv::Reader::from_path(input).map_err(crate::Error::from)?;
    let h = r.headers().map_err(crate::Error::from)?.clone();
    let (ix, iy) = (column(&h, "x", input)?, column(&h, "y", input)?);
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(crate::Error::from)?;
        pts.push(Point2::new(parse(&rec[ix], input)?, parse(&rec[iy], input)?));
    }
    let wps: Vec<Point2> = waypoints.iter().map(|&[x, y]| Point2::new(x, y)).collect();
    Ok(svg::path(&wps, &pts))
}

fn histogram_svg(input: &Path, bins: usize) -> CliResult<String> {
    let mut r = csv::Reader::from_path(input).map_err(crate::Error::from)?;
    let h = r.headers().map_err(crate::Error::from)?.clone();
    let cols = [
        (Method::Transformer, column(&h, "E_T", input)?),
        (Method::Mlp, column(&h, "E_MLP", input)?),
        (Method::Tvp, column(&h, "E_TVP", input)?),
    ];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for rec in r.records() {
        let rec = rec.map_err(crate::Error::from)?;
        for (k, (_, i)) in cols.iter().enumerate() {
            if !rec[*i].is_empty() {
                values[k].push(parse(&rec[*i], input)?);
            }
        }
    }
    let all: Vec<f64> = values.iter().flatten().copied().collect();
    if all.is_empty() {
        return usage(format!("{}: no error values", input.display()));
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut hists = Vec::new();
    for ((m, _), v) in cols.iter().zip(&values) {
        if !v.is_empty() {
            hists.push((*m, Histogram::with_range(v, lo, hi, bins)?));
        }
    }
    Ok(svg::histogram(&hists))
}

pub fn run(g: &GlobalArgs, a: &PlotArgs) -> CliResult<()> {
    let mut c: PlotConfig = base_config(g, "plot")?;
    c.common.apply(g);
    if a.kind.is_some() {
        c.kind = a.kind;
    }
    if let Some(p) = &a.input {
        c.input = Some(p.clone());
    }
    if let Some(p) = &a.output {
        c.output = Some(p.clone());
    }
    if let Some(b) = a.bins {
        c.bins = b;
    }
    if let Some(w) = &a.waypoints {
        c.waypoints = super::solve::parse_inline(w)?;
    }
    let (Some(kind), Some(input)) = (c.kind, c.input.clone()) else {
        return usage("--kind and --input are required");
    };
    if c.bins == 0 {
        return usage("--bins must be positive");
    }
    let text = match kind {
        PlotKind::Trajectory => trajectory_svg(&input, &c.waypoints)?,
        PlotKind::Histogram => histogram_svg(&input, c.bins)?,
        PlotKind::Attention => {
            let map = read_attention_map(&input)?;
            let title = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            svg::heatmap(&map, &title)
        }
    };
    c.common.prepare_out_dir()?;
    let output = c.output.clone().unwrap_or_else(|| {
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "plot".into());
        c.common.out(&format!("{stem}.svg"))
    });
    fs::write(&output, text).at(&output)?;
    write_manifest(&c.common, "plot", &c, &[&input], &[&output])
}
