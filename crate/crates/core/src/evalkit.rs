//! Evaluation metrics: relative RMSE for trend and forecast accuracy,
//! alarm-segment extraction and matching against labeled changes, and
//! precision-recall and error-rate curves over threshold grids.

use crate::error::{Error, Result};
use crate::persist::write_atomic;
use rayon::prelude::*;
use std::path::Path;

/// Relative error magnitude together with the number of reference
/// points excluded for sitting at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrmseValue {
    pub value: f64,
    pub excluded: usize,
}

/// Root-mean-square error of `predicted` against `actual`, normalized
/// by the root-mean-square of `actual`: `sqrt(sum (a-p)^2 / sum a^2)`.
/// Reference points with `|a| < 1e-12` are excluded from both sums and
/// counted, so a zero-crossing reference cannot blow up the ratio.
pub fn rrmse(actual: &[f64], predicted: &[f64]) -> Result<RrmseValue> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
            context: "rrmse inputs",
        });
    }
    let mut err_sq = 0.0;
    let mut ref_sq = 0.0;
    let mut excluded = 0usize;
    for (&a, &p) in actual.iter().zip(predicted) {
        if a.abs() < 1e-12 {
            excluded += 1;
            continue;
        }
        err_sq += (a - p) * (a - p);
        ref_sq += a * a;
    }
    if ref_sq == 0.0 {
        return Err(Error::Degenerate(
            "every reference value sits at zero, nothing to normalize by".into(),
        ));
    }
    Ok(RrmseValue {
        value: (err_sq / ref_sq).sqrt(),
        excluded,
    })
}

/// One maximal run of super-threshold statistic values, inclusive
/// index bounds, with the run's peak value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSegment {
    pub start: usize,
    pub end: usize,
    pub peak: f64,
}

impl DetectionSegment {
    /// The same segment in a shifted index space, for trajectories
    /// whose first entry sits at an offset into the full series.
    pub fn shifted(self, offset: usize) -> Self {
        Self {
            start: self.start + offset,
            end: self.end + offset,
            peak: self.peak,
        }
    }
}

/// Maximal runs with `statistic >= threshold`.
pub fn segments_from_statistic(statistic: &[f64], threshold: f64) -> Vec<DetectionSegment> {
    let mut segments = Vec::new();
    let mut current: Option<DetectionSegment> = None;
    for (t, &s) in statistic.iter().enumerate() {
        if s >= threshold {
            match current.as_mut() {
                Some(seg) => {
                    seg.end = t;
                    seg.peak = seg.peak.max(s);
                }
                None => {
                    current = Some(DetectionSegment {
                        start: t,
                        end: t,
                        peak: s,
                    });
                }
            }
        } else if let Some(seg) = current.take() {
            segments.push(seg);
        }
    }
    if let Some(seg) = current {
        segments.push(seg);
    }
    segments
}

/// Classification of one path's detections against its labeled change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    /// Whether any detection touched the labeled change.
    pub detected: bool,
}

/// Classifies every detection segment: a true positive intersects the
/// labeled change interval (inclusive bounds), a false positive does
/// not. Each segment lands in exactly one bucket.
pub fn match_detections(
    segments: &[DetectionSegment],
    change: (usize, usize),
) -> MatchCounts {
    let (lo, hi) = change;
    let mut counts = MatchCounts {
        true_positives: 0,
        false_positives: 0,
        detected: false,
    };
    for seg in segments {
        if seg.start <= hi && seg.end >= lo {
            counts.true_positives += 1;
            counts.detected = true;
        } else {
            counts.false_positives += 1;
        }
    }
    counts
}

/// One evaluated path: a statistic trajectory starting `offset` steps
/// into the series, plus the labeled change interval in full-series
/// indices.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticPath {
    pub offset: usize,
    pub values: Vec<f64>,
    pub change: (usize, usize),
}

/// A point of the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// A point of the error-rate curve: cost-weighted average false
/// positive rate against average false negative rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArerPoint {
    pub threshold: f64,
    pub afpr: f64,
    pub afnr: f64,
}

/// 101 equally spaced thresholds covering the observed statistic range.
pub fn observed_grid(paths: &[StatisticPath]) -> Result<Vec<f64>> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for path in paths {
        for &v in &path.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Degenerate(
            "no finite statistic values to span a threshold grid".into(),
        ));
    }
    Ok((0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect())
}

/// 101 equally spaced thresholds covering [0, 1], for alarm
/// trajectories that live in the unit interval.
pub fn unit_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Precision and recall at every grid threshold. Recall is the
/// fraction of paths whose change was detected; precision pools true
/// and false positive segments across paths. With no detections at
/// all, precision reads 1 (no claims, none wrong).
pub fn pr_curve(paths: &[StatisticPath], grid: &[f64]) -> Result<Vec<PrPoint>> {
    if paths.is_empty() {
        return Err(Error::Degenerate("no paths to evaluate".into()));
    }
    Ok(grid
        .par_iter()
        .map(|&threshold| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut detected = 0usize;
            for path in paths {
                let segments: Vec<DetectionSegment> =
                    segments_from_statistic(&path.values, threshold)
                        .into_iter()
                        .map(|s| s.shifted(path.offset))
                        .collect();
                let counts = match_detections(&segments, path.change);
                tp += counts.true_positives;
                fp += counts.false_positives;
                if counts.detected {
                    detected += 1;
                }
            }
            let precision = if tp + fp == 0 {
                1.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            PrPoint {
                threshold,
                precision,
                recall: detected as f64 / paths.len() as f64,
            }
        })
        .collect())
}

/// Area under the precision-recall curve by the trapezoid rule over
/// recall, walking the curve in sweep order (threshold descending, so
/// recall never decreases), with the left edge extended to recall 0 at
/// the strictest point's precision. A detector that never reaches full
/// recall keeps the missing area; thresholds that only shuffle
/// precision at constant recall span zero width and add nothing.
pub fn pr_auc(curve: &[PrPoint]) -> f64 {
    let mut points: Vec<&PrPoint> = curve.iter().collect();
    points.sort_by(|a, b| {
        b.threshold
            .partial_cmp(&a.threshold)
            .expect("finite curve thresholds")
    });
    let mut auc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for point in points {
        let (r, p) = (point.recall, point.precision);
        match prev {
            None => auc += r * p,
            Some((r0, p0)) => auc += (r - r0) * (p + p0) / 2.0,
        }
        prev = Some((r, p));
    }
    auc
}

/// One path of alarm values in [0, 1] with aligned ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct AlarmPath {
    pub alarm: Vec<f64>,
    pub labels: Vec<bool>,
}

impl AlarmPath {
    pub fn new(alarm: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if alarm.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: alarm.len(),
                right: labels.len(),
                context: "alarm trajectory vs labels",
            });
        }
        Ok(Self { alarm, labels })
    }
}

/// Cost-weighted error rates at every grid threshold: the false alarm
/// coordinate is `cost_false_alarm` times the average fraction of
/// normal time spent alarming, the false silence coordinate is
/// `cost_false_silence` times the average fraction of abnormal time
/// spent silent. Paths lacking normal or abnormal time are skipped.
pub fn arer_curve(
    paths: &[AlarmPath],
    cost_false_alarm: f64,
    cost_false_silence: f64,
    grid: &[f64],
) -> Result<Vec<ArerPoint>> {
    let usable: Vec<&AlarmPath> = paths
        .iter()
        .filter(|p| {
            let abnormal = p.labels.iter().filter(|&&b| b).count();
            abnormal > 0 && abnormal < p.labels.len()
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Degenerate(
            "no path has both normal and abnormal time".into(),
        ));
    }
    Ok(grid
        .par_iter()
        .map(|&threshold| {
            let mut afpr = 0.0;
            let mut afnr = 0.0;
            for path in &usable {
                let abnormal = path.labels.iter().filter(|&&b| b).count();
                let normal = path.labels.len() - abnormal;
                let mut false_alarm = 0usize;
                let mut false_silence = 0usize;
                for (&a, &label) in path.alarm.iter().zip(&path.labels) {
                    let alarming = a >= threshold;
                    if label && !alarming {
                        false_silence += 1;
                    } else if !label && alarming {
                        false_alarm += 1;
                    }
                }
                afpr += false_alarm as f64 / normal as f64;
                afnr += false_silence as f64 / abnormal as f64;
            }
            ArerPoint {
                threshold,
                afpr: cost_false_alarm * (afpr / usable.len() as f64),
                afnr: cost_false_silence * (afnr / usable.len() as f64),
            }
        })
        .collect())
}

/// Renders a precision-recall curve as CSV.
pub fn render_pr_csv(curve: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    out
}

/// Renders an error-rate curve as CSV.
pub fn render_arer_csv(curve: &[ArerPoint]) -> String {
    let mut out = String::from("threshold,afpr,afnr\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.afpr, p.afnr));
    }
    out
}

/// Renders summary metrics as a flat key=value file, keys in the order
/// given.
pub fn render_summary(entries: &[(String, String)]) -> String {
    let mut out = String::new();
    for (key, value) in entries {
        out.push_str(&format!("{key}={value}\n"));
    }
    out
}

pub fn write_pr_csv(path: &Path, curve: &[PrPoint]) -> Result<()> {
    write_atomic(path, &render_pr_csv(curve))
}

pub fn write_arer_csv(path: &Path, curve: &[ArerPoint]) -> Result<()> {
    write_atomic(path, &render_arer_csv(curve))
}

pub fn write_summary(path: &Path, entries: &[(String, String)]) -> Result<()> {
    write_atomic(path, &render_summary(entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rrmse_of_identical_series_is_zero() {
        let a = vec![3.0, -1.5, 2.0];
        let out = rrmse(&a, &a).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.excluded, 0);
    }

    #[test]
    fn rrmse_of_a_constant_ratio_is_the_ratio_error() {
        let actual = vec![2.0; 50];
        let predicted = vec![1.0; 50];
        let out = rrmse(&actual, &predicted).unwrap();
        assert!((out.value - 0.5).abs() < 1e-15, "got {}", out.value);
    }

    #[test]
    fn rrmse_excludes_zero_references_and_counts_them() {
        let actual = vec![2.0, 0.0, 2.0, 1e-13];
        let predicted = vec![1.0, 5.0, 1.0, 9.0];
        let out = rrmse(&actual, &predicted).unwrap();
        assert_eq!(out.excluded, 2);
        assert!((out.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rrmse_with_nothing_to_normalize_is_degenerate() {
        let err = rrmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "got {err:?}");
    }

    #[test]
    fn rrmse_checks_lengths() {
        let err = rrmse(&[1.0], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }), "got {err:?}");
    }

    proptest! {
        #[test]
        fn rrmse_is_scale_invariant(
            pairs in proptest::collection::vec((0.5f64..5.0, -5.0f64..5.0), 3..40),
            c in prop_oneof![0.01f64..100.0, -100.0f64..-0.01],
        ) {
            let actual: Vec<f64> = pairs.iter().map(|(a, _)| *a).collect();
            let predicted: Vec<f64> = pairs.iter().map(|(_, p)| *p).collect();
            let base = rrmse(&actual, &predicted).unwrap().value;
            let scaled_actual: Vec<f64> = actual.iter().map(|a| c * a).collect();
            let scaled_predicted: Vec<f64> = predicted.iter().map(|p| c * p).collect();
            let scaled = rrmse(&scaled_actual, &scaled_predicted).unwrap().value;
            prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn segments_pick_out_maximal_runs() {
        let segments = segments_from_statistic(&[0.0, 5.0, 5.0, 0.0, 5.0], 1.0);
        assert_eq!(
            segments,
            vec![
                DetectionSegment { start: 1, end: 2, peak: 5.0 },
                DetectionSegment { start: 4, end: 4, peak: 5.0 },
            ]
        );
    }

    #[test]
    fn sub_threshold_statistic_yields_no_segments() {
        assert!(segments_from_statistic(&[0.1, 0.9, 0.5], 1.0).is_empty());
    }

    #[test]
    fn segment_peak_is_the_run_maximum() {
        let segments = segments_from_statistic(&[2.0, 7.0, 3.0, 0.0], 1.0);
        assert_eq!(segments.len(), 1);
        assert_eq!(segments[0].peak, 7.0);
    }

    proptest! {
        #[test]
        fn lowering_the_threshold_never_shrinks_segments(
            statistic in proptest::collection::vec(0.0f64..10.0, 1..60),
            h in 1.0f64..9.0,
        ) {
            let high = segments_from_statistic(&statistic, h);
            let low = segments_from_statistic(&statistic, h - 0.5);
            for seg in &high {
                let container = low
                    .iter()
                    .find(|c| c.start <= seg.start && c.end >= seg.end);
                prop_assert!(
                    container.is_some(),
                    "segment [{}, {}] at {h} has no container at {}",
                    seg.start,
                    seg.end,
                    h - 0.5
                );
            }
        }

        #[test]
        fn every_segment_is_classified_exactly_once(
            statistic in proptest::collection::vec(0.0f64..10.0, 1..60),
            h in 0.5f64..9.5,
            lo in 0usize..50,
            span in 0usize..20,
        ) {
            let segments = segments_from_statistic(&statistic, h);
            let counts = match_detections(&segments, (lo, lo + span));
            prop_assert_eq!(
                counts.true_positives + counts.false_positives,
                segments.len()
            );
            prop_assert_eq!(counts.detected, counts.true_positives > 0);
        }
    }

    #[test]
    fn matching_classifies_by_intersection() {
        let change = (100, 120);
        let touching = vec![DetectionSegment { start: 99, end: 101, peak: 1.0 }];
        let counts = match_detections(&touching, change);
        assert_eq!((counts.true_positives, counts.false_positives), (1, 0));
        assert!(counts.detected);

        let before = vec![DetectionSegment { start: 10, end: 99, peak: 1.0 }];
        let counts = match_detections(&before, change);
        assert_eq!((counts.true_positives, counts.false_positives), (0, 1));
        assert!(!counts.detected);

        let counts = match_detections(&[], change);
        assert_eq!((counts.true_positives, counts.false_positives), (0, 0));
        assert!(!counts.detected);
    }

    fn indicator_paths() -> Vec<StatisticPath> {
        (0..4)
            .map(|i| {
                let change = (30 + i, 40 + i);
                let values: Vec<f64> = (0..100)
                    .map(|t| if t >= change.0 && t <= change.1 { 1.0 } else { 0.0 })
                    .collect();
                StatisticPath {
                    offset: 0,
                    values,
                    change,
                }
            })
            .collect()
    }

    #[test]
    fn perfect_detector_scores_ones_everywhere() {
        let paths = indicator_paths();
        let grid = observed_grid(&paths).unwrap();
        assert_eq!(grid.len(), 101);
        assert_eq!((grid[0], grid[100]), (0.0, 1.0));
        let curve = pr_curve(&paths, &grid).unwrap();
        for point in &curve {
            assert_eq!(
                (point.precision, point.recall),
                (1.0, 1.0),
                "at threshold {}",
                point.threshold
            );
        }
        assert!((pr_auc(&curve) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn always_alarming_keeps_full_recall() {
        let paths: Vec<StatisticPath> = indicator_paths()
            .into_iter()
            .map(|p| StatisticPath {
                values: vec![1.0; p.values.len()],
                ..p
            })
            .collect();
        let curve = pr_curve(&paths, &unit_grid()).unwrap();
        for point in &curve {
            assert_eq!(point.recall, 1.0, "at threshold {}", point.threshold);
            assert_eq!(
                point.precision, 1.0,
                "one all-covering segment per path touches the change"
            );
        }
    }

    #[test]
    fn noisy_detector_loses_precision_before_recall() {
        // Statistic fires at the change with height 2 and spuriously
        // elsewhere with height 1: a threshold between the two keeps
        // precision 1, a threshold below 1 admits the false alarms.
        let paths: Vec<StatisticPath> = (0..5)
            .map(|i| {
                let change = (50, 60);
                let mut values = vec![0.0; 100];
                for t in change.0..=change.1 {
                    values[t] = 2.0;
                }
                values[10 + i] = 1.0;
                StatisticPath {
                    offset: 0,
                    values,
                    change,
                }
            })
            .collect();
        let curve = pr_curve(&paths, &[0.5, 1.5]).unwrap();
        assert_eq!(curve[1].precision, 1.0);
        assert_eq!(curve[1].recall, 1.0);
        assert_eq!(curve[0].recall, 1.0);
        assert!((curve[0].precision - 0.5).abs() < 1e-12, "half the segments are spurious");
    }

    #[test]
    fn pr_auc_integrates_a_hand_built_curve() {
        let curve = vec![
            PrPoint { threshold: 2.0, precision: 1.0, recall: 0.5 },
            PrPoint { threshold: 1.0, precision: 0.5, recall: 1.0 },
        ];
        assert!((pr_auc(&curve) - 0.875).abs() < 1e-12);
    }

    #[test]
    fn pr_auc_anchors_tied_recalls_at_the_strictest_threshold() {
        let curve = vec![
            PrPoint { threshold: 3.0, precision: 0.9, recall: 1.0 },
            PrPoint { threshold: 2.0, precision: 0.3, recall: 1.0 },
            PrPoint { threshold: 1.0, precision: 1.0, recall: 1.0 },
        ];
        assert!(
            (pr_auc(&curve) - 0.9).abs() < 1e-12,
            "precision wiggles at constant recall must not move the area, got {}",
            pr_auc(&curve)
        );
    }

    #[test]
    fn offsets_shift_segments_into_series_indices() {
        let path = StatisticPath {
            offset: 90,
            values: vec![0.0, 3.0, 3.0, 0.0],
            change: (91, 92),
        };
        let curve = pr_curve(&[path], &[1.0]).unwrap();
        assert_eq!((curve[0].precision, curve[0].recall), (1.0, 1.0));
    }

    fn mixed_alarm_paths() -> Vec<AlarmPath> {
        (0..3)
            .map(|i| {
                let labels: Vec<bool> = (0..60).map(|t| (20 + i..30 + i).contains(&t)).collect();
                let alarm: Vec<f64> = labels
                    .iter()
                    .enumerate()
                    .map(|(t, &l)| if l { 0.9 } else { 0.1 + 0.001 * t as f64 })
                    .collect();
                AlarmPath::new(alarm, labels).unwrap()
            })
            .collect()
    }

    #[test]
    fn always_alarming_pays_exactly_the_false_alarm_cost() {
        let paths: Vec<AlarmPath> = mixed_alarm_paths()
            .into_iter()
            .map(|p| AlarmPath::new(vec![1.0; p.labels.len()], p.labels).unwrap())
            .collect();
        let curve = arer_curve(&paths, 0.7, 1.3, &unit_grid()).unwrap();
        for point in &curve {
            assert_eq!((point.afpr, point.afnr), (0.7, 0.0), "at {}", point.threshold);
        }
    }

    #[test]
    fn never_alarming_pays_exactly_the_false_silence_cost() {
        let paths: Vec<AlarmPath> = mixed_alarm_paths()
            .into_iter()
            .map(|p| AlarmPath::new(vec![0.0; p.labels.len()], p.labels).unwrap())
            .collect();
        let curve = arer_curve(&paths, 0.7, 1.3, &unit_grid()).unwrap();
        for point in curve.iter().skip(1) {
            assert_eq!((point.afpr, point.afnr), (0.0, 1.3), "at {}", point.threshold);
        }
        // At threshold zero the comparison is inclusive, so even a zero
        // alarm value alarms.
        assert_eq!((curve[0].afpr, curve[0].afnr), (0.7, 0.0));
    }

    #[test]
    fn error_rates_move_monotonically_with_the_threshold() {
        let curve = arer_curve(&mixed_alarm_paths(), 1.0, 1.0, &unit_grid()).unwrap();
        for pair in curve.windows(2) {
            assert!(
                pair[1].afpr <= pair[0].afpr,
                "false alarms cannot grow with the threshold: {:?}",
                pair
            );
            assert!(
                pair[1].afnr >= pair[0].afnr,
                "false silences cannot shrink with the threshold: {:?}",
                pair
            );
        }
    }

    #[test]
    fn curves_agree_on_degenerate_endpoints() {
        let alarm_paths = mixed_alarm_paths();
        let statistic_paths: Vec<StatisticPath> = alarm_paths
            .iter()
            .map(|p| {
                let first = p.labels.iter().position(|&l| l).unwrap();
                let last = p.labels.iter().rposition(|&l| l).unwrap();
                StatisticPath {
                    offset: 0,
                    values: p.alarm.clone(),
                    change: (first, last),
                }
            })
            .collect();
        let grid = unit_grid();
        let pr = pr_curve(&statistic_paths, &grid).unwrap();
        let arer = arer_curve(&alarm_paths, 1.0, 1.0, &grid).unwrap();
        assert_eq!(pr[0].recall, 1.0, "threshold 0 alarms everywhere");
        assert_eq!(arer[0].afnr, 0.0);
        assert!(arer[0].afpr > 0.0);
        let last = grid.len() - 1;
        assert_eq!(pr[last].recall, 0.0, "threshold 1 exceeds every alarm value");
        assert_eq!(pr[last].precision, 1.0, "no claims, none wrong");
        assert_eq!(arer[last].afpr, 0.0);
        assert_eq!(arer[last].afnr, 1.0);
    }

    #[test]
    fn skipped_paths_do_not_poison_the_curve() {
        let mut paths = mixed_alarm_paths();
        paths.push(AlarmPath::new(vec![0.5; 10], vec![false; 10]).unwrap());
        let curve = arer_curve(&paths, 1.0, 1.0, &unit_grid()).unwrap();
        assert!(curve.iter().all(|p| p.afpr.is_finite() && p.afnr.is_finite()));
        let only_degenerate = vec![AlarmPath::new(vec![0.5; 10], vec![true; 10]).unwrap()];
        let err = arer_curve(&only_degenerate, 1.0, 1.0, &unit_grid()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "got {err:?}");
    }

    #[test]
    fn curve_csv_headers_are_fixed() {
        let pr = render_pr_csv(&[PrPoint { threshold: 0.5, precision: 1.0, recall: 0.25 }]);
        assert_eq!(pr, "threshold,precision,recall\n0.5,1,0.25\n");
        let arer = render_arer_csv(&[ArerPoint { threshold: 0.5, afpr: 0.125, afnr: 1.0 }]);
        assert_eq!(arer, "threshold,afpr,afnr\n0.5,0.125,1\n");
    }

    #[test]
    fn summary_preserves_key_order() {
        let entries = vec![
            ("ours_trend_rrmse".to_string(), "5.72".to_string()),
            ("ewma_trend_rrmse".to_string(), "7.84".to_string()),
        ];
        assert_eq!(
            render_summary(&entries),
            "ours_trend_rrmse=5.72\newma_trend_rrmse=7.84\n"
        );
    }
}
