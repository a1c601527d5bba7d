mod common;

use common::{random_alloc, random_path, rng};
use rand::Rng;
use waytime_core::dataprep::{LabelConfig, LabeledSample, RangeAngleSequence, to_range_angle};
use waytime_core::evalkit::{
    attention_summary, band_mass, error_histograms, evaluate_methods, normalized_cost, ood_eval, prepare_case,
    relative_error, sample_efficiency_sweep, subset_by_curve, uniform_band_mass, Allocator, CostReport, EvalCase,
    Histogram, Method, MethodResult, PreparedCase, SampleRecord,
};
use waytime_core::seqmodel::{AttentionMap, AttentionRecord, Mlp, MlpBank, MlpConfig};
use waytime_core::trajopt::solve_min_snap;
use waytime_core::{BoundaryConfig, Error, SnapCost};

struct Equal;

impl Allocator for Equal {
    fn allocate(&self, ra: &RangeAngleSequence) -> waytime_core::Result<Vec<f64>> {
        Ok(vec![1.0 / ra.len() as f64; ra.len()])
    }
}

/// Time proportional to segment length.
struct ByLength;

impl Allocator for ByLength {
    fn allocate(&self, ra: &RangeAngleSequence) -> waytime_core::Result<Vec<f64>> {
        let s: f64 = ra.ranges.iter().sum();
        Ok(ra.ranges.iter().map(|d| d / s).collect())
    }
}

fn prepared(seed: u64, count: usize, sizes: std::ops::RangeInclusive<usize>) -> Vec<PreparedCase> {
    let mut r = rng(seed);
    let cfg = LabelConfig::default();
    (0..count)
        .map(|i| {
            let n = r.random_range(sizes.clone());
            let path = random_path(&mut r, n);
            prepare_case(&EvalCase::new(format!("c{i}"), path), &cfg).unwrap()
        })
        .collect()
}

#[test]
fn normalized_cost_examples() {
    assert_eq!(normalized_cost(SnapCost(0.0)).unwrap(), 0.0);
    assert!((normalized_cost(SnapCost(128.0)).unwrap() - 2.0).abs() < 1e-15);
    assert!(normalized_cost(SnapCost(-1.0)).is_err());
    assert!(normalized_cost(SnapCost(f64::NAN)).is_err());
}

#[test]
fn normalized_cost_halves_when_time_doubles() {
    let mut r = rng(3);
    let bc = BoundaryConfig::default();
    for _ in 0..10 {
        let n = r.random_range(3..=8);
        let path = random_path(&mut r, n);
        let alloc = random_alloc(&mut r, n - 1);
        let (_, j1) = solve_min_snap(&path, &alloc, &bc).unwrap();
        let (_, j2) = solve_min_snap(&path, &alloc.scaled(2.0).unwrap(), &bc).unwrap();
        let ratio = normalized_cost(j1).unwrap() / normalized_cost(j2).unwrap();
        assert!((ratio - 2.0).abs() < 1e-6, "{ratio}");
    }
}

#[test]
fn relative_error_examples() {
    assert_eq!(relative_error(SnapCost(3.5), SnapCost(3.5)).unwrap(), 0.0);
    let e = relative_error(SnapCost(128.0 * 0.7), SnapCost(0.7)).unwrap();
    assert!((e - 100.0).abs() < 1e-9, "{e}");
    assert!(relative_error(SnapCost(0.5), SnapCost(1.0)).unwrap() < 0.0);
    assert!(relative_error(SnapCost(1.0), SnapCost(0.0)).is_err());
}

fn record(i: usize, e_t: f64, e_mlp: Option<f64>, e_tvp: f64) -> SampleRecord {
    let res = |e: f64| MethodResult { j: 1.0, e, waypoint_error: 0.0 };
    SampleRecord {
        id: format!("r{i}"),
        n: 5,
        total_time: 10.0,
        j_bgd: 1.0,
        tvp: res(e_tvp),
        transformer: Some(res(e_t)),
        mlp: e_mlp.map(res),
        failures: Vec::new(),
    }
}

#[test]
fn report_statistics_match_hand_computation() {
    let e_t = [3.0, -1.0, 4.0, 1.5, -0.5, 9.0, 2.0, 6.0, -5.0, 3.0];
    let e_tvp = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];
    let e_mlp = [Some(1.0), None, Some(3.0), None, Some(-2.0), None, None, None, None, Some(6.0)];
    let records = (0..10).map(|i| record(i, e_t[i], e_mlp[i], e_tvp[i])).collect();
    let rep = CostReport::from_records(records).unwrap();

    // Sums done by hand: Σe_t = 22, Σe_t² = 183.5.
    let t = rep.transformer.unwrap();
    assert_eq!(t.count, 10);
    assert!((t.mean - 2.2).abs() < 1e-12);
    assert!((t.std - (183.5f64 / 10.0 - 2.2 * 2.2).sqrt()).abs() < 1e-12);
    assert_eq!(t.frac_negative, 0.3);

    assert!((rep.tvp.mean - 55.0).abs() < 1e-12);
    assert!((rep.tvp.std - 825.0f64.sqrt()).abs() < 1e-12);
    assert_eq!(rep.tvp.frac_negative, 0.0);

    // MLP present on 4 samples: 1, 3, -2, 6.
    let m = rep.mlp.unwrap();
    assert_eq!(m.count, 4);
    assert!((m.mean - 2.0).abs() < 1e-12);
    assert!((m.std - 8.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(m.frac_negative, 0.25);
    assert_eq!(rep.errors(Method::Mlp), vec![1.0, 3.0, -2.0, 6.0]);
}

#[test]
fn descent_baseline_never_loses_to_its_start() {
    let cases = prepared(11, 12, 3..=9);
    let rep = evaluate_methods(&cases, Some(&Equal), None, &BoundaryConfig::default()).unwrap();
    for (c, r) in cases.iter().zip(&rep.records) {
        assert!(r.tvp.e >= -1e-7, "{}: E_TVP {}", r.id, r.tvp.e);
        assert_eq!(r.total_time, c.total_time);
        assert_eq!(r.j_bgd, c.j_bgd.value());
        assert!(r.tvp.waypoint_error < 1e-6);
        assert!(r.transformer.unwrap().waypoint_error < 1e-6);
        // Equal split, recomputed outside the report at the same T.
        let m = c.path.num_segments();
        let alloc = waytime_core::TimeAllocation::new(vec![c.total_time / m as f64; m]).unwrap();
        let (_, j) = solve_min_snap(&c.path, &alloc, &BoundaryConfig::default()).unwrap();
        let t = r.transformer.unwrap();
        assert!((t.j - j.value()).abs() <= 1e-9 * j.value());
        let expect = 100.0 * (j.value().powf(1.0 / 7.0) / c.j_bgd.value().powf(1.0 / 7.0) - 1.0);
        assert!((t.e - expect).abs() < 1e-9, "{} vs {expect}", t.e);
        assert!(t.e >= -1e-7 || t.j < c.j_bgd.value());
    }
    assert!(rep.mlp.is_none());
    assert!(rep.records.iter().all(|r| r.mlp.is_none()));
}

#[test]
fn missing_fixed_size_model_is_absent_not_zero() {
    let cases = prepared(12, 10, 3..=6);
    let mut bank = MlpBank::<f64>::new();
    bank.insert(Mlp::new(MlpConfig { waypoints: 4, hidden: vec![8] }, 0).unwrap());
    let rep = evaluate_methods(&cases, Some(&ByLength), Some(&bank), &BoundaryConfig::default()).unwrap();
    for r in &rep.records {
        assert_eq!(r.mlp.is_some(), r.n == 4, "{} n={}", r.id, r.n);
    }
    let present = rep.records.iter().filter(|r| r.n == 4).count();
    assert!(present > 0);
    assert_eq!(rep.mlp.unwrap().count, present);
}

#[test]
fn cases_from_samples_keep_their_size() {
    let mut r = rng(13);
    let path = random_path(&mut r, 6);
    let ra = to_range_angle(&path).unwrap();
    let s = LabeledSample { curve_id: "x".into(), n: 6, range_angle: ra, fractions: vec![0.2; 5], converged: true };
    let case = EvalCase::from_sample(&s).unwrap();
    assert_eq!(case.id, "x/6");
    for (a, b) in case.path.segment_lengths().iter().zip(path.segment_lengths()) {
        assert!((a - b).abs() < 1e-9 * b);
    }
    let cfg = LabelConfig::default();
    let p1 = prepare_case(&case, &cfg).unwrap();
    let p2 = prepare_case(&EvalCase::new("y", path), &cfg).unwrap();
    assert!((p1.total_time - p2.total_time).abs() < 1e-9 * p2.total_time);
    assert!((p1.j_bgd.value() / p2.j_bgd.value() - 1.0).abs() < 1e-6);
}

#[test]
fn histogram_counts_are_conserved() {
    let cases = prepared(14, 15, 3..=8);
    let rep = evaluate_methods(&cases, Some(&Equal), None, &BoundaryConfig::default()).unwrap();
    let hs = error_histograms(&rep, 7).unwrap();
    assert_eq!(hs.len(), 2);
    for (m, h) in &hs {
        assert_eq!(h.total(), rep.errors(*m).len());
        assert_eq!(h.counts.len(), 7);
    }
    assert_eq!(hs[0].1.lo, hs[1].1.lo);
    assert_eq!(hs[0].1.hi, hs[1].1.hi);
}

#[test]
fn identical_values_fill_one_bin() {
    let h = Histogram::new(&[2.5; 9], 5).unwrap();
    assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
    assert_eq!(h.total(), 9);
    assert!(Histogram::new(&[], 5).is_err());
    assert!(Histogram::new(&[1.0, 2.0], 0).is_err());
}

#[test]
fn histogram_bins_match_recount() {
    let values: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64 * 0.25 - 7.0).collect();
    let h = Histogram::new(&values, 8).unwrap();
    assert_eq!((h.lo, h.hi), (-7.0, 17.75));
    let edges = h.edges();
    assert_eq!(edges.len(), 9);
    assert!((edges[1] - (-7.0 + 24.75 / 8.0)).abs() < 1e-12);
    assert_eq!(edges[8], 17.75);
    for b in 0..8 {
        let count = values
            .iter()
            .filter(|&&v| v >= edges[b] && (v < edges[b + 1] || (b == 7 && v <= edges[8])))
            .count();
        assert_eq!(h.counts[b], count, "bin {b}");
    }
}

fn uniform(rows: usize, cols: usize) -> AttentionMap {
    AttentionMap { rows, cols, data: vec![1.0 / cols as f64; rows * cols] }
}

fn diagonal(m: usize) -> AttentionMap {
    let mut data = vec![0.0; m * m];
    for i in 0..m {
        data[i * m + i] = 1.0;
    }
    AttentionMap { rows: m, cols: m, data }
}

#[test]
fn uniform_band_mass_is_band_area() {
    for m in 1..12 {
        for k in 0..4 {
            let cells = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).filter(|&(i, j): &(usize, usize)| i.abs_diff(j) <= k).count();
            let area = cells as f64 / (m * m) as f64;
            assert!((band_mass(&uniform(m, m), k) - area).abs() < 1e-12);
            assert!((uniform_band_mass(m, m, k) - area).abs() < 1e-12);
        }
    }
    assert_eq!(band_mass(&diagonal(6), 0), 1.0);
}

#[test]
fn attention_summary_averages_and_compares() {
    let rec = |m: usize, diag: bool| AttentionRecord {
        encoder: vec![],
        decoder_self: vec![],
        cross: vec![vec![if diag { diagonal(m) } else { uniform(m, m) }, uniform(m, m)]; 2],
    };
    let records = vec![rec(8, true), rec(8, false), rec(11, true)];
    let s = attention_summary(&records, &[1, 3]).unwrap();
    assert_eq!(s.records, 3);
    assert!(s.max_row_error < 1e-12);
    assert_eq!(s.averaged.len(), 2);
    let avg8 = &s.averaged[&(8, 8)][0];
    for i in 0..8 {
        assert!((avg8.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    // Diagonal head and uniform head averaged: half the mass on the diagonal
    // plus half the uniform band share.
    assert!((avg8.get(3, 3) - (0.5 * (0.5 + 0.5 / 8.0) + 0.5 / 8.0)).abs() < 1e-12);
    let k3 = s.overall[1];
    assert_eq!(k3.k, 3);
    assert!(k3.observed > k3.uniform);
    let expect_uniform = (2.0 * uniform_band_mass(8, 8, 3) + uniform_band_mass(11, 11, 3)) / 3.0;
    assert!((k3.uniform - expect_uniform).abs() < 1e-12);
    assert!(attention_summary(&[], &[1]).is_err());
}

fn samples_for(curves: usize) -> Vec<LabeledSample> {
    let mut r = rng(15);
    let mut out = vec![];
    for c in 0..curves {
        for n in 3..=5 {
            let ra = to_range_angle(&random_path(&mut r, n)).unwrap();
            out.push(LabeledSample {
                curve_id: format!("k{c:03}"),
                n,
                range_angle: ra,
                fractions: vec![1.0 / (n - 1) as f64; n - 1],
                converged: true,
            });
        }
    }
    out
}

#[test]
fn curve_subsets_are_seeded_nested_and_whole_at_one() {
    let samples = samples_for(40);
    let all = subset_by_curve(&samples, 1.0, 9).unwrap();
    assert_eq!(all, (0..samples.len()).collect::<Vec<_>>());
    let a = subset_by_curve(&samples, 0.1, 9).unwrap();
    assert_eq!(a, subset_by_curve(&samples, 0.1, 9).unwrap());
    assert_eq!(a.len(), 4 * 3);
    let b = subset_by_curve(&samples, 0.5, 9).unwrap();
    assert!(a.iter().all(|i| b.contains(i)));
    for &i in &a {
        let id = &samples[i].curve_id;
        assert_eq!(a.iter().filter(|&&j| &samples[j].curve_id == id).count(), 3);
    }
    assert_ne!(a, subset_by_curve(&samples, 0.1, 10).unwrap());
    assert!(subset_by_curve(&samples, 0.0, 9).is_err());
    assert!(subset_by_curve(&samples, 1.5, 9).is_err());
}

#[test]
fn sweep_trains_once_per_fraction() {
    let samples = samples_for(20);
    let test = prepared(16, 6, 3..=6);
    let bc = BoundaryConfig::default();
    let mut sizes = vec![];
    let (rep, models) = sample_efficiency_sweep(&samples, &[0.1, 0.5, 1.0], 4, &test, &bc, |s| {
        sizes.push(s.len());
        Ok(Equal)
    })
    .unwrap();
    assert_eq!(sizes, vec![6, 30, 60]);
    assert_eq!(models.len(), 3);
    assert_eq!(rep.seed, 4);
    let direct = evaluate_methods(&test, Some(&Equal), None, &bc).unwrap().transformer.unwrap().mean;
    for p in &rep.points {
        assert_eq!(p.mean_e_t, direct);
    }
    assert_eq!(rep.points[2].curves, 20);
    assert!(sample_efficiency_sweep(&samples, &[0.5, 1.0], 4, &test, &bc, |_| Ok(Equal)).is_err());
    assert!(sample_efficiency_sweep(&samples, &[0.5, 0.1, 1.0], 4, &test, &bc, |_| Ok(Equal)).is_err());
}

#[test]
fn ood_eval_requires_unseen_sizes() {
    let bc = BoundaryConfig::default();
    let big = prepared(17, 5, 14..=16);
    let out = ood_eval(&ByLength, &big, 12, &bc).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.report.records.len(), 5);
    assert!(out.report.records.iter().all(|r| r.transformer.is_some() && r.mlp.is_none()));
    let small = prepared(18, 3, 3..=5);
    assert!(matches!(ood_eval(&ByLength, &small, 12, &bc), Err(Error::InvalidConfig(_))));
}

#[test]
fn non_simplex_allocations_are_reported() {
    struct Bad;
    impl Allocator for Bad {
        fn allocate(&self, ra: &RangeAngleSequence) -> waytime_core::Result<Vec<f64>> {
            Ok(vec![0.5; ra.len()])
        }
    }
    let bc = BoundaryConfig::default();
    let big = prepared(19, 3, 14..=14);
    let out = ood_eval(&Bad, &big, 12, &bc);
    assert!(out.is_err() || !out.unwrap().failures.is_empty());
    let cases = prepared(20, 2, 4..=4);
    let rep = evaluate_methods(&cases, Some(&Bad), None, &bc).unwrap();
    assert!(rep.records.iter().all(|r| r.transformer.is_none() && r.tvp.e.is_finite()));
    let failed: Vec<_> = rep.failures().collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|(_, m, e)| *m == Method::Transformer && matches!(e, Error::InvalidAllocation(_))));
    assert!(rep.stats(Method::Transformer).is_none());
}
