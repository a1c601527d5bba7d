use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::metrics::{relative_error, MethodStats};
use crate::dataprep::{to_range_angle, LabelConfig, LabeledSample, RangeAngleSequence};
use crate::error::{Error, Result};
use crate::seqmodel::{Mlp, MlpBank, Real, Transformer};
use crate::timealloc::{refine_bgd, tvp_allocate};
use crate::trajopt::{
    evaluate, solve_min_snap_with, BoundaryConfig, Point2, SnapCost, TimeAllocation, WaypointPath,
    DEFAULT_ORDER,
};

/// Anything that maps a range-angle sequence to time fractions.
pub trait Allocator {
    fn allocate(&self, ra: &RangeAngleSequence) -> Result<Vec<f64>>;
}

impl<R: Real> Allocator for Transformer<R> {
    fn allocate(&self, ra: &RangeAngleSequence) -> Result<Vec<f64>> {
        self.predict(ra)
    }
}

impl<R: Real> Allocator for Mlp<R> {
    fn allocate(&self, ra: &RangeAngleSequence) -> Result<Vec<f64>> {
        self.predict(ra)
    }
}

impl<R: Real> Allocator for MlpBank<R> {
    fn allocate(&self, ra: &RangeAngleSequence) -> Result<Vec<f64>> {
        self.predict(ra)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Transformer,
    Mlp,
    Tvp,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Transformer, Method::Mlp, Method::Tvp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Transformer => "T",
            Method::Mlp => "MLP",
            Method::Tvp => "TVP",
        }
    }
}

/// A test path with its identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCase {
    pub id: String,
    pub path: WaypointPath,
}

impl EvalCase {
    pub fn new(id: impl Into<String>, path: WaypointPath) -> Self {
        Self { id: id.into(), path }
    }

    /// Rebuilds the waypoints at the origin, first segment along +x, at the
    /// recorded size.
    pub fn from_sample(s: &LabeledSample) -> Result<Self> {
        let path = s.range_angle.reconstruct(Point2::default(), 0.0)?;
        Ok(Self { id: format!("{}/{}", s.curve_id, s.n), path })
    }
}

/// A case with its total time, the trapezoidal split and the descent
/// baseline cost.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCase {
    pub id: String,
    pub path: WaypointPath,
    pub range_angle: RangeAngleSequence,
    /// Total time fixed by the trapezoidal allocation.
    pub total_time: f64,
    pub tvp_fractions: Vec<f64>,
    pub j_bgd: SnapCost,
    pub bgd_converged: bool,
}

impl PreparedCase {
    pub fn n(&self) -> usize {
        self.path.len()
    }
}

/// TVP allocation fixes `T`; descent from it gives the baseline.
pub fn prepare_case(case: &EvalCase, cfg: &LabelConfig) -> Result<PreparedCase> {
    let tvp = tvp_allocate(&case.path, &cfg.tvp)?;
    let bgd = refine_bgd(&case.path, &tvp, &cfg.bgd, &cfg.bc)?;
    Ok(PreparedCase {
        id: case.id.clone(),
        path: case.path.clone(),
        range_angle: to_range_angle(&case.path)?,
        total_time: tvp.total(),
        tvp_fractions: tvp.fractions(),
        j_bgd: bgd.cost,
        bgd_converged: bgd.converged,
    })
}

/// Cost of one method's allocation and how far its trajectory misses the
/// waypoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodResult {
    pub j: f64,
    pub e: f64,
    pub waypoint_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub id: String,
    pub n: usize,
    pub total_time: f64,
    pub j_bgd: f64,
    pub tvp: MethodResult,
    pub transformer: Option<MethodResult>,
    /// Absent when no fixed-size model matches `n`.
    pub mlp: Option<MethodResult>,
    /// Learned methods whose allocation could not be scored; their result
    /// is absent.
    pub failures: Vec<(Method, Error)>,
}

impl SampleRecord {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        match m {
            Method::Transformer => self.transformer.as_ref(),
            Method::Mlp => self.mlp.as_ref(),
            Method::Tvp => Some(&self.tvp),
        }
    }
}

fn check_simplex(f: &[f64], m: usize) -> Result<()> {
    let sum: f64 = f.iter().sum();
    if f.len() != m || f.iter().any(|&v| !(v > 0.0) || !v.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidAllocation(format!("not a simplex point over {m} segments: {f:?}")));
    }
    Ok(())
}

fn score(case: &PreparedCase, fractions: &[f64], bc: &BoundaryConfig) -> Result<MethodResult> {
    check_simplex(fractions, case.path.num_segments())?;
    let alloc = TimeAllocation::from_fractions(fractions, case.total_time)?;
    let (traj, cost, _) = solve_min_snap_with(&case.path, &alloc, bc, DEFAULT_ORDER)?;
    if (traj.total_time() - case.total_time).abs() > 1e-9 * case.total_time {
        return Err(Error::InvalidAllocation(format!(
            "total time {} drifted from {}",
            traj.total_time(),
            case.total_time
        )));
    }
    let mut t: f64 = 0.0;
    let mut waypoint_error: f64 = 0.0;
    for (k, w) in case.path.points().iter().enumerate() {
        let p = evaluate(&traj, t.min(case.total_time), 0)?;
        waypoint_error = waypoint_error.max((p - *w).norm());
        if let Some(d) = traj.durations().get(k) {
            t += d;
        }
    }
    Ok(MethodResult { j: cost.value(), e: relative_error(cost, case.j_bgd)?, waypoint_error })
}

/// All methods on one prepared case, each at the case's total time. A
/// fixed-size mismatch leaves that method absent; any other failure of a
/// learned method is recorded in the sample's `failures`. Only a failure of
/// the trapezoidal baseline is an error.
pub fn evaluate_case(
    case: &PreparedCase,
    transformer: Option<&dyn Allocator>,
    mlp: Option<&dyn Allocator>,
    bc: &BoundaryConfig,
) -> Result<SampleRecord> {
    let mut failures = Vec::new();
    let mut run = |m: Method, a: Option<&dyn Allocator>| -> Option<MethodResult> {
        let r = match a?.allocate(&case.range_angle) {
            Ok(f) => score(case, &f, bc),
            Err(Error::FixedSize { .. }) => return None,
            Err(e) => Err(e),
        };
        r.map_err(|e| failures.push((m, e))).ok()
    };
    let transformer = run(Method::Transformer, transformer);
    let mlp = run(Method::Mlp, mlp);
    Ok(SampleRecord {
        id: case.id.clone(),
        n: case.n(),
        total_time: case.total_time,
        j_bgd: case.j_bgd.value(),
        tvp: score(case, &case.tvp_fractions, bc)?,
        transformer,
        mlp,
        failures,
    })
}

/// Per-sample records plus summary statistics of `E` per method.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub records: Vec<SampleRecord>,
    pub transformer: Option<MethodStats>,
    pub mlp: Option<MethodStats>,
    pub tvp: MethodStats,
}

impl CostReport {
    pub fn from_records(records: Vec<SampleRecord>) -> Result<Self> {
        let col = |m: Method| -> Vec<f64> { records.iter().filter_map(|r| r.method(m)).map(|x| x.e).collect() };
        let tvp = MethodStats::from_values(&col(Method::Tvp)).ok_or(Error::Empty("no evaluated samples".into()))?;
        Ok(Self {
            transformer: MethodStats::from_values(&col(Method::Transformer)),
            mlp: MethodStats::from_values(&col(Method::Mlp)),
            tvp,
            records,
        })
    }

    pub fn stats(&self, m: Method) -> Option<&MethodStats> {
        match m {
            Method::Transformer => self.transformer.as_ref(),
            Method::Mlp => self.mlp.as_ref(),
            Method::Tvp => Some(&self.tvp),
        }
    }

    /// `(sample id, method, reason)` for every learned allocation that could
    /// not be scored.
    pub fn failures(&self) -> impl Iterator<Item = (&str, Method, &Error)> {
        self.records.iter().flat_map(|r| r.failures.iter().map(move |(m, e)| (r.id.as_str(), *m, e)))
    }

    /// `E` values of one method, in record order.
    pub fn errors(&self, m: Method) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.method(m)).map(|x| x.e).collect()
    }
}

/// [`evaluate_case`] over a prepared test set, in order.
pub fn evaluate_methods(
    cases: &[PreparedCase],
    transformer: Option<&dyn Allocator>,
    mlp: Option<&dyn Allocator>,
    bc: &BoundaryConfig,
) -> Result<CostReport> {
    let records = cases.iter().map(|c| evaluate_case(c, transformer, mlp, bc)).collect::<Result<Vec<_>>>()?;
    CostReport::from_records(records)
}

/// Evaluation at waypoint counts the model never saw in training.
#[derive(Debug, Clone, PartialEq)]
pub struct OodReport {
    pub n_max_trained: usize,
    pub report: CostReport,
    /// Cases whose allocation was not a simplex point or whose QP failed.
    pub failures: Vec<(String, Error)>,
}

pub fn ood_eval(
    model: &dyn Allocator,
    cases: &[PreparedCase],
    n_max_trained: usize,
    bc: &BoundaryConfig,
) -> Result<OodReport> {
    if let Some(c) = cases.iter().find(|c| c.n() <= n_max_trained) {
        return Err(Error::InvalidConfig(format!(
            "case {} has {} waypoints, within the trained range (max {n_max_trained})",
            c.id,
            c.n()
        )));
    }
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for c in cases {
        match evaluate_case(c, Some(model), None, bc) {
            Ok(r) if r.transformer.is_some() => records.push(r),
            Ok(mut r) => match r.failures.pop() {
                Some((_, e)) => failures.push((c.id.clone(), e)),
                None => failures.push((c.id.clone(), Error::Empty("model returned no allocation".into()))),
            },
            Err(e) => failures.push((c.id.clone(), e)),
        }
    }
    Ok(OodReport { n_max_trained, report: CostReport::from_records(records)?, failures })
}
