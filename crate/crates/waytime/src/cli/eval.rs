use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use waytime_core::dataprep::{collocate, LabelConfig, RawCurve};
use waytime_core::evalkit::{
    attention_summary, error_histograms, evaluate_methods, ood_eval, prepare_case, Allocator, EvalCase, Method,
    PreparedCase,
};

use super::{base_config, usage, write_manifest, CliError, CliResult, Common, GlobalArgs};
use crate::checkpoint::{load_mlp_bank, load_transformer};
use crate::formats::csvout::{
    write_attention_record, write_attention_summary, write_cost_report, write_cost_summary, write_failures, write_method_failures,
    write_histograms,
};
use crate::formats::{read_curves, read_dataset};

/// Published mean errors at full scale, stored next to our numbers.
pub const REFERENCE_MEANS: [(Method, f64); 3] = [(Method::Transformer, 15.7), (Method::Mlp, 21.4), (Method::Tvp, 50.7)];
pub const REFERENCE_OOD_MEAN: (Method, f64) = (Method::Transformer, 42.7);

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Transformer checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// MLP bank checkpoint.
    #[arg(long)]
    pub mlp: Option<PathBuf>,
    /// Held-out dataset JSONL; paths are rebuilt from the range-angle form.
    #[arg(long, conflicts_with = "test_curves")]
    pub test: Option<PathBuf>,
    /// Held-out curves JSONL, collocated to every count in --n-min..=--n-max.
    #[arg(long)]
    pub test_curves: Option<PathBuf>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Also evaluate the test curves at this unseen waypoint count.
    #[arg(long)]
    pub ood_n: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Write attention maps and band-mass statistics.
    #[arg(long)]
    pub attention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    #[serde(flatten)]
    pub common: Common,
    pub checkpoint: Option<PathBuf>,
    pub mlp: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub test_curves: Option<PathBuf>,
    pub n_min: usize,
    pub n_max: usize,
    pub ood_n: Option<usize>,
    pub bins: usize,
    pub attention: bool,
    pub band_ks: Vec<usize>,
    pub label: LabelConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            common: Common::default(),
            checkpoint: None,
            mlp: None,
            test: None,
            test_curves: None,
            n_min: 3,
            n_max: 12,
            ood_n: None,
            bins: 20,
            attention: false,
            band_ks: vec![1, 2, 3],
            label: LabelConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn resolve(g: &GlobalArgs, a: &EvalArgs) -> CliResult<Self> {
        let mut c: Self = base_config(g, "eval")?;
        c.common.apply(g);
        if let Some(p) = &a.checkpoint {
            c.checkpoint = Some(p.clone());
        }
        if let Some(p) = &a.mlp {
            c.mlp = Some(p.clone());
        }
        if let Some(p) = &a.test {
            c.test = Some(p.clone());
            c.test_curves = None;
        }
        if let Some(p) = &a.test_curves {
            c.test_curves = Some(p.clone());
            c.test = None;
        }
        if let Some(v) = a.n_min {
            c.n_min = v;
        }
        if let Some(v) = a.n_max {
            c.n_max = v;
        }
        if a.ood_n.is_some() {
            c.ood_n = a.ood_n;
        }
        if let Some(v) = a.bins {
            c.bins = v;
        }
        c.attention |= a.attention;
        if c.checkpoint.is_none() {
            return usage("--checkpoint is required");
        }
        if c.test.is_none() && c.test_curves.is_none() {
            return usage("give --test <dataset.jsonl> or --test-curves <curves.jsonl>");
        }
        if c.ood_n.is_some() && c.test_curves.is_none() {
            return usage("--ood-n needs --test-curves so the curves can be collocated again");
        }
        if c.n_min < 2 || c.n_min > c.n_max {
            return usage(format!("bad waypoint range {}..={}", c.n_min, c.n_max));
        }
        if c.bins == 0 {
            return usage("--bins must be positive");
        }
        Ok(c)
    }
}

fn curve_cases(curves: &[RawCurve], counts: impl Iterator<Item = usize> + Clone) -> CliResult<Vec<EvalCase>> {
    let mut out = Vec::new();
    for c in curves {
        for n in counts.clone() {
            out.push(EvalCase::new(format!("{}/{n}", c.id), collocate(&c.points, n)?));
        }
    }
    Ok(out)
}

fn prepare_all(pool: &rayon::ThreadPool, cases: &[EvalCase], cfg: &LabelConfig) -> CliResult<Vec<PreparedCase>> {
    let prepared: Vec<_> = pool.install(|| cases.par_iter().map(|c| prepare_case(c, cfg)).collect());
    Ok(prepared.into_iter().collect::<waytime_core::Result<Vec<_>>>()?)
}

pub fn run(g: &GlobalArgs, a: &EvalArgs) -> CliResult<()> {
    let c = EvalConfig::resolve(g, a)?;
    let ckpt = c.checkpoint.clone().expect("checked in resolve");
    let (model, manifest) = load_transformer(&ckpt)?;
    let bank = c.mlp.as_ref().map(|p| load_mlp_bank(p)).transpose()?.map(|(b, _)| b);
    let mut inputs: Vec<PathBuf> = vec![ckpt.clone()];
    inputs.extend(c.mlp.iter().cloned());

    let curves = match &c.test_curves {
        Some(p) => {
            inputs.push(p.clone());
            Some(read_curves(p)?)
        }
        None => None,
    };
    let cases = match (&curves, &c.test) {
        (Some(curves), _) => curve_cases(curves, c.n_min..=c.n_max)?,
        (None, Some(p)) => {
            inputs.push(p.clone());
            read_dataset(p)?.iter().map(EvalCase::from_sample).collect::<waytime_core::Result<Vec<_>>>()?
        }
        (None, None) => unreachable!("checked in resolve"),
    };
    if cases.is_empty() {
        return usage("the test set is empty");
    }
    let pool = c.common.pool()?;
    let prepared = prepare_all(&pool, &cases, &c.label)?;
    let mlp_ref = bank.as_ref().map(|b| b as &dyn Allocator);
    let report = evaluate_methods(&prepared, Some(&model as &dyn Allocator), mlp_ref, &c.label.bc)?;

    c.common.prepare_out_dir()?;
    let mut outputs = Vec::new();
    let report_path = c.common.out("cost_report.csv");
    write_cost_report(&report_path, &report)?;
    let summary_path = c.common.out("cost_summary.csv");
    write_cost_summary(&summary_path, &report, &REFERENCE_MEANS)?;
    let (hist_csv, hist_svg) = (c.common.out("histogram.csv"), c.common.out("histogram.svg"));
    write_histograms(&hist_csv, &hist_svg, &error_histograms(&report, c.bins)?)?;
    let fail_path = c.common.out("failures.csv");
    write_method_failures(&fail_path, &report)?;
    let n_failed = report.failures().count();
    if n_failed > 0 {
        log::warn!("{n_failed} learned allocations could not be scored; see {}", fail_path.display());
    }
    outputs.extend([report_path, summary_path, hist_csv, hist_svg, fail_path]);
    for m in Method::ALL {
        if let Some(s) = report.stats(m) {
            eprintln!(
                "E_{:<3} mean {:8.3}  std {:8.3}  E<0 {:5.1}%  ({} samples)",
                m.name(),
                s.mean,
                s.std,
                100.0 * s.frac_negative,
                s.count
            );
        }
    }

    if c.attention {
        let records = prepared
            .iter()
            .map(|p| Ok(model.decode(&p.range_angle)?.attention))
            .collect::<CliResult<Vec<_>>>()?;
        let summary = attention_summary(&records, &c.band_ks)?;
        let dir = c.common.out("attention");
        write_attention_summary(&dir, &summary)?;
        write_attention_record(&dir.join("sample0"), &records[0])?;
        for b in &summary.overall {
            eprintln!("band mass k={}: {:.4} (uniform {:.4})", b.k, b.observed, b.uniform);
        }
        outputs.push(dir.join("band_mass.csv"));
    }

    if let Some(n_big) = c.ood_n {
        let curves = curves.as_ref().expect("checked in resolve");
        let n_max_trained = manifest.training.as_ref().map_or(c.n_max, |t| t.n_range.1);
        if n_big <= n_max_trained {
            return usage(format!("--ood-n {n_big} is not beyond the trained maximum {n_max_trained}"));
        }
        let ood_cases = prepare_all(&pool, &curve_cases(curves, std::iter::once(n_big))?, &c.label)?;
        let ood = ood_eval(&model, &ood_cases, n_max_trained, &c.label.bc).map_err(CliError::from)?;
        let p = c.common.out("ood_report.csv");
        write_cost_report(&p, &ood.report)?;
        let s = c.common.out("ood_summary.csv");
        write_cost_summary(&s, &ood.report, &[REFERENCE_OOD_MEAN])?;
        let f = c.common.out("ood_failures.csv");
        write_failures(&f, &ood.failures)?;
        if let Some(st) = ood.report.stats(Method::Transformer) {
            eprintln!("OOD n={n_big}: E_T mean {:.3} over {} samples, {} failures", st.mean, st.count, ood.failures.len());
        }
        outputs.extend([p, s, f]);
    }
    let ins: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let outs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_manifest(&c.common, "eval", &c, &ins, &outs)
}
