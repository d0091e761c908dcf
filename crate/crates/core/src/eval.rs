//! Trial lists, scoring, and equal-error-rate evaluation.
//!
//! A trial pairs an enrollment model (identified by speaker id) with a test
//! utterance; it is a target when the test utterance belongs to the enrolled
//! speaker. Acceptance is `score >= threshold`. Sweeping the threshold over
//! the distinct scores (ties processed atomically) traces the ROC staircase;
//! the EER is taken where the false-accept and false-reject rates cross,
//! linearly interpolated between the two adjacent operating points.
//!
//! Trial list file: one UTF-8 line per trial,
//! `<enroll-id> <test-id> target|nontarget [score]`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::backend::{BackendError, BackendScorer};
use crate::par::parallel_map;

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// Index into `TrialList::enroll_ids`.
    pub enroll: u32,
    /// Index into `TrialList::test_ids`.
    pub test: u32,
    pub is_target: bool,
    pub score: Option<f64>,
}

/// Interned trial list: ids stored once, trials as index pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialList {
    pub enroll_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub trials: Vec<Trial>,
}

#[derive(Debug)]
pub enum EvalError {
    /// Empty enrollment or test set, or no trials.
    Empty(String),
    /// Trial references an id with no vector.
    UnresolvedId { id: String },
    /// EER needs at least one target and one nontarget with scores.
    Precondition(String),
    Backend(BackendError),
    Io(std::io::Error),
    Parse { line: usize, message: String },
}

impl std::fmt::Display for EvalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvalError::Empty(what) => write!(f, "empty {what}"),
            EvalError::UnresolvedId { id } => write!(f, "no vector for id {id:?}"),
            EvalError::Precondition(m) => write!(f, "precondition violated: {m}"),
            EvalError::Backend(e) => write!(f, "{e}"),
            EvalError::Io(e) => write!(f, "i/o error: {e}"),
            EvalError::Parse { line, message } => {
                write!(f, "trial list parse error at line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for EvalError {}

impl From<BackendError> for EvalError {
    fn from(e: BackendError) -> Self {
        EvalError::Backend(e)
    }
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        EvalError::Io(e)
    }
}

/// Full cross-product trial list: every enrollment speaker against every
/// test utterance; a trial is a target when the speakers match.
pub fn make_trials(
    enroll_speakers: &[String],
    test_utts: &[(String, String)], // (utterance id, speaker id)
) -> Result<TrialList, EvalError> {
    if enroll_speakers.is_empty() {
        return Err(EvalError::Empty("enrollment set".into()));
    }
    if test_utts.is_empty() {
        return Err(EvalError::Empty("test set".into()));
    }
    let enroll_ids: Vec<String> = enroll_speakers.to_vec();
    let test_ids: Vec<String> = test_utts.iter().map(|(u, _)| u.clone()).collect();
    let mut trials = Vec::with_capacity(enroll_ids.len() * test_ids.len());
    for (ei, espk) in enroll_ids.iter().enumerate() {
        for (ti, (_, tspk)) in test_utts.iter().enumerate() {
            trials.push(Trial {
                enroll: ei as u32,
                test: ti as u32,
                is_target: espk == tspk,
                score: None,
            });
        }
    }
    Ok(TrialList {
        enroll_ids,
        test_ids,
        trials,
    })
}

impl TrialList {
    pub fn num_targets(&self) -> usize {
        self.trials.iter().filter(|t| t.is_target).count()
    }

    pub fn num_nontargets(&self) -> usize {
        self.trials.len() - self.num_targets()
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        let mut out = String::new();
        for t in &self.trials {
            out.push_str(&self.enroll_ids[t.enroll as usize]);
            out.push(' ');
            out.push_str(&self.test_ids[t.test as usize]);
            out.push(' ');
            out.push_str(if t.is_target { "target" } else { "nontarget" });
            if let Some(s) = t.score {
                out.push(' ');
                out.push_str(&format!("{s}"));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<TrialList, EvalError> {
        let text = std::fs::read_to_string(path)?;
        let mut enroll_index: BTreeMap<String, u32> = BTreeMap::new();
        let mut test_index: BTreeMap<String, u32> = BTreeMap::new();
        let mut enroll_ids = Vec::new();
        let mut test_ids = Vec::new();
        let mut trials = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 && fields.len() != 4 {
                return Err(EvalError::Parse {
                    line: i + 1,
                    message: format!("expected 3 or 4 fields, got {}", fields.len()),
                });
            }
            let is_target = match fields[2] {
                "target" => true,
                "nontarget" => false,
                other => {
                    return Err(EvalError::Parse {
                        line: i + 1,
                        message: format!("expected target|nontarget, got {other:?}"),
                    })
                }
            };
            let score = if fields.len() == 4 {
                Some(fields[3].parse::<f64>().map_err(|e| EvalError::Parse {
                    line: i + 1,
                    message: format!("bad score: {e}"),
                })?)
            } else {
                None
            };
            let enroll = *enroll_index.entry(fields[0].to_string()).or_insert_with(|| {
                enroll_ids.push(fields[0].to_string());
                (enroll_ids.len() - 1) as u32
            });
            let test = *test_index.entry(fields[1].to_string()).or_insert_with(|| {
                test_ids.push(fields[1].to_string());
                (test_ids.len() - 1) as u32
            });
            trials.push(Trial {
                enroll,
                test,
                is_target,
                score,
            });
        }
        Ok(TrialList {
            enroll_ids,
            test_ids,
            trials,
        })
    }
}

/// Score every trial with the given backend. Input order is preserved; every
/// id must resolve in the vector maps.
pub fn score_trials(
    trials: &mut TrialList,
    enroll_vectors: &BTreeMap<String, Vec<f64>>,
    test_vectors: &BTreeMap<String, Vec<f64>>,
    scorer: &BackendScorer<'_>,
    threads: usize,
) -> Result<(), EvalError> {
    // Resolve ids once, up front, so missing vectors fail by name.
    let mut enroll_refs: Vec<&Vec<f64>> = Vec::with_capacity(trials.enroll_ids.len());
    for id in &trials.enroll_ids {
        enroll_refs.push(enroll_vectors.get(id).ok_or_else(|| EvalError::UnresolvedId {
            id: id.clone(),
        })?);
    }
    let mut test_refs: Vec<&Vec<f64>> = Vec::with_capacity(trials.test_ids.len());
    for id in &trials.test_ids {
        test_refs.push(test_vectors.get(id).ok_or_else(|| EvalError::UnresolvedId {
            id: id.clone(),
        })?);
    }
    let scores = parallel_map(&trials.trials, threads, |_, t| {
        scorer.score(enroll_refs[t.enroll as usize], test_refs[t.test as usize])
    });
    for (t, s) in trials.trials.iter_mut().zip(scores) {
        t.score = Some(s?);
    }
    Ok(())
}

/// EER and the threshold it occurs at.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub num_target: usize,
    pub num_nontarget: usize,
}

/// One ROC operating point: accept iff score >= threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

fn collect_scores(trials: &TrialList) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let mut targets = Vec::new();
    let mut nontargets = Vec::new();
    for t in &trials.trials {
        let s = t.score.ok_or_else(|| {
            EvalError::Precondition("every trial needs a score before evaluation".into())
        })?;
        if !s.is_finite() {
            return Err(EvalError::Precondition("non-finite trial score".into()));
        }
        if t.is_target {
            targets.push(s);
        } else {
            nontargets.push(s);
        }
    }
    if targets.is_empty() || nontargets.is_empty() {
        return Err(EvalError::Precondition(format!(
            "need both classes: {} targets, {} nontargets",
            targets.len(),
            nontargets.len()
        )));
    }
    Ok((targets, nontargets))
}

/// The ROC staircase, one point per distinct threshold, descending. The
/// first point is a sentinel above the maximum score (accept nothing).
pub fn det_points_from_scores(targets: &[f64], nontargets: &[f64]) -> Vec<DetPoint> {
    let nt = targets.len() as f64;
    let nn = nontargets.len() as f64;
    // Merge all scores descending, tagging targets.
    let mut all: Vec<(f64, bool)> = targets
        .iter()
        .map(|&s| (s, true))
        .chain(nontargets.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let max_score = all[0].0;
    let mut points = vec![DetPoint {
        threshold: max_score + 1.0,
        far: 0.0,
        frr: 1.0,
    }];
    let mut accepted_targets = 0usize;
    let mut accepted_nontargets = 0usize;
    let mut i = 0;
    while i < all.len() {
        let threshold = all[i].0;
        // Process the whole tie group atomically.
        while i < all.len() && all[i].0 == threshold {
            if all[i].1 {
                accepted_targets += 1;
            } else {
                accepted_nontargets += 1;
            }
            i += 1;
        }
        points.push(DetPoint {
            threshold,
            far: accepted_nontargets as f64 / nn,
            frr: 1.0 - accepted_targets as f64 / nt,
        });
    }
    points
}

/// Interpolated FAR = FRR crossing of consecutive operating points.
pub fn eer_from_points(points: &[DetPoint]) -> (f64, f64) {
    for w in points.windows(2) {
        let d0 = w[0].frr - w[0].far;
        let d1 = w[1].frr - w[1].far;
        if d0 >= 0.0 && d1 <= 0.0 {
            if d0 == d1 {
                return (w[0].far, w[0].threshold);
            }
            let t = d0 / (d0 - d1);
            let eer = w[0].far + t * (w[1].far - w[0].far);
            let threshold = w[0].threshold + t * (w[1].threshold - w[0].threshold);
            return (eer, threshold);
        }
    }
    // FRR starts at 1 (accept nothing) and ends below FAR = 1, so a crossing
    // always exists; this is unreachable for valid inputs.
    unreachable!("no FAR/FRR crossing found");
}

/// Equal error rate of a scored trial list.
pub fn compute_eer(trials: &TrialList) -> Result<EerResult, EvalError> {
    let (targets, nontargets) = collect_scores(trials)?;
    let points = det_points_from_scores(&targets, &nontargets);
    let (eer, threshold) = eer_from_points(&points);
    Ok(EerResult {
        eer,
        threshold,
        num_target: targets.len(),
        num_nontarget: nontargets.len(),
    })
}

/// DET curve of a scored trial list.
pub fn det_points(trials: &TrialList) -> Result<Vec<DetPoint>, EvalError> {
    let (targets, nontargets) = collect_scores(trials)?;
    Ok(det_points_from_scores(&targets, &nontargets))
}

/// CSV rendering of a DET curve. The header documents the conventions.
pub fn det_to_csv(points: &[DetPoint]) -> String {
    let mut out = String::from(
        "# accept iff score >= threshold; EER by linear interpolation between adjacent points\nthreshold,far,frr\n",
    );
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.far, p.frr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn list_from_scores(targets: &[f64], nontargets: &[f64]) -> TrialList {
        let mut trials = Vec::new();
        let mut test_ids = Vec::new();
        for (i, &s) in targets.iter().chain(nontargets.iter()).enumerate() {
            test_ids.push(format!("t{i}"));
            trials.push(Trial {
                enroll: 0,
                test: i as u32,
                is_target: i < targets.len(),
                score: Some(s),
            });
        }
        TrialList {
            enroll_ids: vec!["e0".into()],
            test_ids,
            trials,
        }
    }

    #[test]
    fn cross_product_enumeration() {
        let enroll = vec!["s0".to_string(), "s1".to_string()];
        let tests = vec![
            ("u0".to_string(), "s0".to_string()),
            ("u1".to_string(), "s0".to_string()),
            ("u2".to_string(), "s1".to_string()),
            ("u3".to_string(), "s1".to_string()),
        ];
        let trials = make_trials(&enroll, &tests).unwrap();
        assert_eq!(trials.trials.len(), 8);
        assert_eq!(trials.num_targets(), 4);
        assert_eq!(trials.num_nontargets(), 4);
    }

    #[test]
    fn partition_identity_holds() {
        let enroll: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let tests: Vec<(String, String)> = (0..30)
            .map(|i| (format!("u{i}"), format!("s{}", i % 5)))
            .collect();
        let trials = make_trials(&enroll, &tests).unwrap();
        assert_eq!(
            trials.num_targets() + trials.num_nontargets(),
            enroll.len() * tests.len()
        );
    }

    #[test]
    fn large_cross_product_counts() {
        // 500 speakers x 10 test utts each: 5000 targets, 2,495,000 nontargets.
        let enroll: Vec<String> = (0..500).map(|i| format!("s{i:03}")).collect();
        let tests: Vec<(String, String)> = (0..5000)
            .map(|i| (format!("u{i}"), format!("s{:03}", i % 500)))
            .collect();
        let trials = make_trials(&enroll, &tests).unwrap();
        assert_eq!(trials.trials.len(), 2_500_000);
        assert_eq!(trials.num_targets(), 5_000);
        assert_eq!(trials.num_nontargets(), 2_495_000);
    }

    #[test]
    fn empty_sets_are_errors() {
        assert!(matches!(
            make_trials(&[], &[("u".into(), "s".into())]),
            Err(EvalError::Empty(_))
        ));
        assert!(matches!(
            make_trials(&["s".to_string()], &[]),
            Err(EvalError::Empty(_))
        ));
    }

    #[test]
    fn perfect_separation_has_zero_eer() {
        let trials = list_from_scores(&[0.9, 0.8], &[0.2, 0.1]);
        let r = compute_eer(&trials).unwrap();
        assert_eq!(r.eer, 0.0);
        assert_eq!(r.num_target, 2);
        assert_eq!(r.num_nontarget, 2);
    }

    #[test]
    fn identical_score_distributions_give_half() {
        let scores = [0.1, 0.4, 0.7, 0.9];
        let trials = list_from_scores(&scores, &scores);
        let r = compute_eer(&trials).unwrap();
        assert!((r.eer - 0.5).abs() < 1e-12, "eer {}", r.eer);
    }

    /// Brute-force oracle: rescan every score for every candidate threshold,
    /// then interpolate the crossing. Independent of the swept
    /// implementation.
    fn brute_force_eer(targets: &[f64], nontargets: &[f64]) -> f64 {
        let mut thresholds: Vec<f64> = targets.iter().chain(nontargets.iter()).copied().collect();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let mut points: Vec<(f64, f64)> = Vec::new();
        // Sentinel: accept nothing.
        points.push((0.0, 1.0));
        for &th in &thresholds {
            let fa = nontargets.iter().filter(|&&s| s >= th).count() as f64
                / nontargets.len() as f64;
            let fr = targets.iter().filter(|&&s| s < th).count() as f64 / targets.len() as f64;
            points.push((fa, fr));
        }
        for w in points.windows(2) {
            let (fa0, fr0) = w[0];
            let (fa1, fr1) = w[1];
            let d0 = fr0 - fa0;
            let d1 = fr1 - fa1;
            if d0 >= 0.0 && d1 <= 0.0 {
                if d0 == d1 {
                    return fa0;
                }
                let t = d0 / (d0 - d1);
                return fa0 + t * (fa1 - fa0);
            }
        }
        unreachable!()
    }

    #[test]
    fn matches_brute_force_oracle_on_random_instances() {
        let mut rng = Rng::new(1000);
        for case in 0..100 {
            let nt = 5 + rng.below(200);
            let nn = 5 + rng.below(400);
            // Overlapping distributions, target shifted up.
            let targets: Vec<f64> = (0..nt).map(|_| rng.normal() + 1.0).collect();
            let nontargets: Vec<f64> = (0..nn).map(|_| rng.normal()).collect();
            let trials = list_from_scores(&targets, &nontargets);
            let fast = compute_eer(&trials).unwrap().eer;
            let slow = brute_force_eer(&targets, &nontargets);
            assert!(
                (fast - slow).abs() < 1e-9,
                "case {case}: {fast} vs {slow} (nt={nt}, nn={nn})"
            );
            assert!((0.0..=0.5 + 1e-12).contains(&fast), "case {case}: eer {fast}");
        }
    }

    #[test]
    fn ties_are_processed_atomically() {
        // Many repeated scores; oracle agreement is the check.
        let mut rng = Rng::new(1001);
        for _ in 0..30 {
            let targets: Vec<f64> = (0..50).map(|_| (rng.below(6) as f64) / 2.0 + 0.5).collect();
            let nontargets: Vec<f64> = (0..80).map(|_| (rng.below(6) as f64) / 2.0).collect();
            let trials = list_from_scores(&targets, &nontargets);
            let fast = compute_eer(&trials).unwrap().eer;
            let slow = brute_force_eer(&targets, &nontargets);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        }
    }

    #[test]
    fn eer_is_invariant_under_monotone_transforms() {
        let mut rng = Rng::new(1002);
        let targets: Vec<f64> = (0..60).map(|_| rng.normal() + 0.8).collect();
        let nontargets: Vec<f64> = (0..90).map(|_| rng.normal()).collect();
        let base = compute_eer(&list_from_scores(&targets, &nontargets)).unwrap().eer;
        let transforms: [fn(f64) -> f64; 3] = [|s| 2.0 * s + 1.0, |s| s.exp(), |s| s.atan()];
        for transform in transforms {
            let t2: Vec<f64> = targets.iter().map(|&s| transform(s)).collect();
            let n2: Vec<f64> = nontargets.iter().map(|&s| transform(s)).collect();
            let eer = compute_eer(&list_from_scores(&t2, &n2)).unwrap().eer;
            assert!((eer - base).abs() < 1e-12, "{eer} vs {base}");
        }
    }

    #[test]
    fn label_swap_with_negated_scores_is_symmetric() {
        let mut rng = Rng::new(1003);
        let targets: Vec<f64> = (0..40).map(|_| rng.normal() + 0.5).collect();
        let nontargets: Vec<f64> = (0..70).map(|_| rng.normal()).collect();
        let base = compute_eer(&list_from_scores(&targets, &nontargets)).unwrap().eer;
        let neg_t: Vec<f64> = nontargets.iter().map(|&s| -s).collect();
        let neg_n: Vec<f64> = targets.iter().map(|&s| -s).collect();
        let swapped = compute_eer(&list_from_scores(&neg_t, &neg_n)).unwrap().eer;
        assert!((base - swapped).abs() < 1e-12, "{base} vs {swapped}");
    }

    #[test]
    fn single_class_is_a_precondition_error() {
        let mut trials = list_from_scores(&[0.5], &[0.1]);
        trials.trials[1].is_target = true;
        assert!(matches!(
            compute_eer(&trials),
            Err(EvalError::Precondition(_))
        ));
    }

    #[test]
    fn unscored_trials_are_rejected() {
        let mut trials = list_from_scores(&[0.5], &[0.1]);
        trials.trials[0].score = None;
        assert!(matches!(
            compute_eer(&trials),
            Err(EvalError::Precondition(_))
        ));
    }

    #[test]
    fn det_curve_is_monotone_and_perfect_separation_touches_origin() {
        let trials = list_from_scores(&[0.9, 0.8, 0.7], &[0.3, 0.2, 0.1]);
        let points = det_points(&trials).unwrap();
        assert!(points.iter().any(|p| p.far == 0.0 && p.frr == 0.0));
        for w in points.windows(2) {
            // Thresholds descend, FAR grows, FRR shrinks.
            assert!(w[1].threshold < w[0].threshold);
            assert!(w[1].far >= w[0].far);
            assert!(w[1].frr <= w[0].frr);
        }
    }

    #[test]
    fn eer_lies_on_a_det_segment() {
        let mut rng = Rng::new(1004);
        let targets: Vec<f64> = (0..50).map(|_| rng.normal() + 1.2).collect();
        let nontargets: Vec<f64> = (0..70).map(|_| rng.normal()).collect();
        let trials = list_from_scores(&targets, &nontargets);
        let points = det_points(&trials).unwrap();
        let r = compute_eer(&trials).unwrap();
        let mut found = false;
        for w in points.windows(2) {
            let (lo, hi) = (w[0].far.min(w[1].far), w[0].far.max(w[1].far));
            if r.eer >= lo - 1e-12 && r.eer <= hi + 1e-12 {
                let (flo, fhi) = (w[1].frr.min(w[0].frr), w[1].frr.max(w[0].frr));
                if r.eer >= flo - 1e-12 && r.eer <= fhi + 1e-12 {
                    found = true;
                    break;
                }
            }
        }
        assert!(found, "EER {} not on any DET segment", r.eer);
    }

    #[test]
    fn trial_list_file_round_trip() {
        let dir = std::env::temp_dir().join("voxvec-eval-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let mut rng = Rng::new(1005);
        let targets: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let nontargets: Vec<f64> = (0..7).map(|_| rng.normal()).collect();
        let trials = list_from_scores(&targets, &nontargets);
        let p = dir.join("trials.txt");
        trials.write(&p).unwrap();
        let back = TrialList::read(&p).unwrap();
        assert_eq!(back.trials.len(), trials.trials.len());
        for (a, b) in trials.trials.iter().zip(back.trials.iter()) {
            assert_eq!(a.is_target, b.is_target);
            assert_eq!(a.score, b.score, "score round trip must be lossless");
        }
    }

    #[test]
    fn scoring_resolves_ids_and_preserves_order() {
        use crate::backend::Backend;
        let enroll = vec!["s0".to_string(), "s1".to_string()];
        let tests = vec![
            ("u0".to_string(), "s0".to_string()),
            ("u1".to_string(), "s1".to_string()),
        ];
        let mut trials = make_trials(&enroll, &tests).unwrap();
        let mut evecs = BTreeMap::new();
        evecs.insert("s0".to_string(), vec![1.0, 0.0]);
        evecs.insert("s1".to_string(), vec![0.0, 1.0]);
        let mut tvecs = BTreeMap::new();
        tvecs.insert("u0".to_string(), vec![1.0, 0.0]);
        tvecs.insert("u1".to_string(), vec![1.0, 1.0]);
        let backend = Backend::Cosine;
        let scorer = backend.scorer().unwrap();
        score_trials(&mut trials, &evecs, &tvecs, &scorer, 1).unwrap();
        // (s0, u0) self-similarity = 1.
        assert!((trials.trials[0].score.unwrap() - 1.0).abs() < 1e-12);
        // Scoring twice is deterministic.
        let first: Vec<f64> = trials.trials.iter().map(|t| t.score.unwrap()).collect();
        score_trials(&mut trials, &evecs, &tvecs, &scorer, 2).unwrap();
        let second: Vec<f64> = trials.trials.iter().map(|t| t.score.unwrap()).collect();
        assert_eq!(first, second);
        // Unknown id fails by name.
        tvecs.remove("u1");
        match score_trials(&mut trials, &evecs, &tvecs, &scorer, 1) {
            Err(EvalError::UnresolvedId { id }) => assert_eq!(id, "u1"),
            other => panic!("expected unresolved id, got {other:?}"),
        }
    }
}
