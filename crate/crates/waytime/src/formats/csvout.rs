use std::fs;
use std::path::Path;

use waytime_core::evalkit::{AttentionSummary, CostReport, Histogram, Method, SweepReport};
use waytime_core::seqmodel::{AttentionMap, AttentionRecord, EpochRecord};
use waytime_core::timealloc::IterationRecord;
use waytime_core::trajopt::TrajectorySample;

use crate::error::{IoContext, Result};
use crate::formats::svg;

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_writer(fs::File::create(path).at(path)?))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub const COST_COLUMNS: [&str; 9] = ["sample_id", "n", "J_BGD", "J_T", "J_MLP", "J_TVP", "E_T", "E_MLP", "E_TVP"];

/// One row per sample; a method the report has no value for is left empty.
pub fn write_cost_report(path: &Path, report: &CostReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(COST_COLUMNS)?;
    for r in &report.records {
        let j = |m: Method| r.method(m).map(|x| x.j);
        let e = |m: Method| r.method(m).map(|x| x.e);
        w.write_record([
            r.id.clone(),
            r.n.to_string(),
            num(r.j_bgd),
            opt(j(Method::Transformer)),
            opt(j(Method::Mlp)),
            opt(j(Method::Tvp)),
            opt(e(Method::Transformer)),
            opt(e(Method::Mlp)),
            opt(e(Method::Tvp)),
        ])?;
    }
    w.flush().at(path)
}

/// Aggregates per method, with a published mean error alongside for
/// orientation (not comparable at this data scale).
pub fn write_cost_summary(path: &Path, report: &CostReport, reference: &[(Method, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["method", "count", "mean", "std", "frac_negative", "reference_mean"])?;
    for m in Method::ALL {
        let Some(s) = report.stats(m) else { continue };
        let refv = reference.iter().find(|(rm, _)| *rm == m).map(|(_, v)| *v);
        w.write_record([
            m.name().to_string(),
            s.count.to_string(),
            num(s.mean),
            num(s.std),
            num(s.frac_negative),
            opt(refv),
        ])?;
    }
    w.flush().at(path)
}

pub fn write_failures(path: &Path, failures: &[(String, waytime_core::Error)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sample_id", "error"])?;
    for (id, e) in failures {
        w.write_record([id.clone(), e.to_string()])?;
    }
    w.flush().at(path)
}

/// Learned allocations that could not be scored, one row per sample and method.
pub fn write_method_failures(path: &Path, report: &CostReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["sample_id", "method", "error"])?;
    for (id, m, e) in report.failures() {
        w.write_record([id, m.name(), &e.to_string()])?;
    }
    w.flush().at(path)
}

pub fn write_histograms(csv_path: &Path, svg_path: &Path, hists: &[(Method, Histogram)]) -> Result<()> {
    let mut w = writer(csv_path)?;
    w.write_record(["method", "bin", "lo", "hi", "count"])?;
    for (m, h) in hists {
        let edges = h.edges();
        for (i, c) in h.counts.iter().enumerate() {
            w.write_record([m.name().to_string(), i.to_string(), num(edges[i]), num(edges[i + 1]), c.to_string()])?;
        }
    }
    w.flush().at(csv_path)?;
    fs::write(svg_path, svg::histogram(hists)).at(svg_path)
}

pub fn write_trajectory(path: &Path, samples: &[TrajectorySample]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "x", "y", "vx", "vy", "ax", "ay"])?;
    for s in samples {
        w.write_record([s.t, s.pos.x, s.pos.y, s.vel.x, s.vel.y, s.acc.x, s.acc.y].map(num))?;
    }
    w.flush().at(path)
}

pub fn write_loss_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "train_loss", "val_loss", "lr"])?;
    for r in history {
        w.write_record([r.epoch.to_string(), num(r.train_loss), num(r.val_loss), num(r.lr)])?;
    }
    w.flush().at(path)
}

pub fn write_bgd_log(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iter", "cost", "step_size", "grad_norm"])?;
    for r in log {
        w.write_record([r.iter.to_string(), num(r.cost), num(r.step_size), num(r.grad_norm)])?;
    }
    w.flush().at(path)
}

pub fn write_sweep(path: &Path, sweep: &SweepReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["fraction", "curves", "samples", "mean_E_T"])?;
    for p in &sweep.points {
        w.write_record([num(p.fraction), p.curves.to_string(), p.samples.to_string(), num(p.mean_e_t)])?;
    }
    w.flush().at(path)
}

/// Rows are decoder steps, columns encoder positions.
pub fn write_attention_map(path: &Path, map: &AttentionMap) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("step".to_string()).chain((0..map.cols).map(|j| format!("pos{j}"))).collect();
    w.write_record(&header)?;
    for i in 0..map.rows {
        let row: Vec<String> = std::iter::once(i.to_string()).chain(map.row(i).iter().map(|&v| num(v))).collect();
        w.write_record(&row)?;
    }
    w.flush().at(path)
}

pub fn read_attention_map(path: &Path) -> Result<AttentionMap> {
    let mut r = csv::Reader::from_path(path)?;
    let mut data = Vec::new();
    let (mut rows, mut cols) = (0, 0);
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|e| crate::Error::Format(format!("{}: {e}", path.display()))))
            .collect::<Result<Vec<f64>>>()?;
        if rows > 0 && vals.len() != cols {
            return Err(crate::Error::Format(format!("{}: ragged rows", path.display())));
        }
        cols = vals.len();
        rows += 1;
        data.extend(vals);
    }
    Ok(AttentionMap { rows, cols, data })
}

/// Cross-attention of one decode: `layer{l}_head{h}.csv` per head and
/// `layer{l}_mean.csv` (+ heat map) for the head average.
pub fn write_attention_record(dir: &Path, record: &AttentionRecord) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    for (l, heads) in record.cross.iter().enumerate() {
        for (h, map) in heads.iter().enumerate() {
            write_attention_map(&dir.join(format!("layer{l}_head{h}.csv")), map)?;
        }
        if let Some(mean) = AttentionMap::mean(heads) {
            write_attention_map(&dir.join(format!("layer{l}_mean.csv")), &mean)?;
            let svg_path = dir.join(format!("layer{l}_mean.svg"));
            fs::write(&svg_path, svg::heatmap(&mean, &format!("layer {l}, head average"))).at(&svg_path)?;
        }
    }
    Ok(())
}

/// Head- and record-averaged maps per input shape and layer, and the
/// band-mass table.
pub fn write_attention_summary(dir: &Path, summary: &AttentionSummary) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    for (&(rows, cols), layers) in &summary.averaged {
        for (l, map) in layers.iter().enumerate() {
            let stem = format!("mean_{rows}x{cols}_layer{l}");
            write_attention_map(&dir.join(format!("{stem}.csv")), map)?;
            let svg_path = dir.join(format!("{stem}.svg"));
            fs::write(&svg_path, svg::heatmap(map, &format!("{rows} steps, layer {l}"))).at(&svg_path)?;
        }
    }
    let path = dir.join("band_mass.csv");
    let mut w = writer(&path)?;
    w.write_record(["layer", "k", "observed", "uniform"])?;
    for (l, bands) in summary.layers.iter().enumerate() {
        for b in bands {
            w.write_record([l.to_string(), b.k.to_string(), num(b.observed), num(b.uniform)])?;
        }
    }
    for b in &summary.overall {
        w.write_record(["all".to_string(), b.k.to_string(), num(b.observed), num(b.uniform)])?;
    }
    w.flush().at(&path)
}
