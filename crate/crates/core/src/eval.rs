//! Scene Jaccard index and QA accuracy.
//!
//! Predicted objects are matched greedily, in prediction order, to the first
//! unmatched ground-truth object (in ground-truth order) whose attributes
//! agree, whose position lies strictly closer than `tau`, and which passes
//! the dataset's pose or dimension check. Per scene
//! `J = tp / (tp + fp + fn)`, with `J = 1` for two empty scenes.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{dist3, wrap_angle};
use crate::scene::{AnswerType, DatasetStyle, QaItem, Scene, SceneObject, Vec3};

pub const TAUS_DEFAULT: [f64; 5] = [0.05, 0.10, 0.15, 0.20, 0.25];
pub const TAUS_ARKITSCENES: [f64; 5] = [1.25, 1.50, 1.75, 2.00, 2.25];
pub const TAUS_SHAPES: [f64; 5] = [0.50, 0.75, 1.00, 1.25, 1.50];
pub const POSE_TOLERANCE: f64 = 0.15;
pub const OBJECTRON_DIMS_MAE: f64 = 0.05;
pub const ARKITSCENES_DIMS_MAE: f64 = 1.00;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Size,
    Color,
    Material,
    Shape,
    ShapeCodes,
    Category,
}

impl Attribute {
    fn equal(self, a: &SceneObject, b: &SceneObject) -> bool {
        let (x, y) = match self {
            Attribute::Size => (&a.size, &b.size),
            Attribute::Color => (&a.color, &b.color),
            Attribute::Material => (&a.material, &b.material),
            Attribute::Shape => (&a.shape, &b.shape),
            Attribute::Category => (&a.category, &b.category),
            Attribute::ShapeCodes => {
                return a.shape_codes.is_some() && a.shape_codes == b.shape_codes
            }
        };
        x.is_some() && x == y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceField {
    Location,
    CenterCam,
}

impl DistanceField {
    fn of(self, o: &SceneObject) -> Option<&Vec3> {
        match self {
            DistanceField::Location => o.location.as_ref(),
            DistanceField::CenterCam => o.center_cam.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCriteria {
    pub attributes: Vec<Attribute>,
    /// Maximum wrapped difference of the azimuth (third pose component).
    pub pose_tolerance: Option<f64>,
    /// Maximum mean absolute error over the three dimensions.
    pub dims_mae_max: Option<f64>,
    pub distance_field: DistanceField,
    /// Default threshold set for this dataset.
    pub taus: Vec<f64>,
}

impl MatchCriteria {
    pub fn preset(style: DatasetStyle) -> Self {
        use Attribute::*;
        match style {
            DatasetStyle::Clevr => MatchCriteria {
                attributes: vec![Shape, Size, Color, Material],
                pose_tolerance: None,
                dims_mae_max: None,
                distance_field: DistanceField::Location,
                taus: TAUS_DEFAULT.to_vec(),
            },
            DatasetStyle::Objaworld => MatchCriteria {
                attributes: vec![Shape],
                pose_tolerance: Some(POSE_TOLERANCE),
                dims_mae_max: None,
                distance_field: DistanceField::Location,
                taus: TAUS_DEFAULT.to_vec(),
            },
            DatasetStyle::ObjaworldShapes => MatchCriteria {
                attributes: vec![],
                pose_tolerance: Some(POSE_TOLERANCE),
                dims_mae_max: None,
                distance_field: DistanceField::Location,
                taus: TAUS_SHAPES.to_vec(),
            },
            DatasetStyle::Objectron => MatchCriteria {
                attributes: vec![Category],
                pose_tolerance: None,
                dims_mae_max: Some(OBJECTRON_DIMS_MAE),
                distance_field: DistanceField::CenterCam,
                taus: TAUS_DEFAULT.to_vec(),
            },
            DatasetStyle::Arkitscenes => MatchCriteria {
                attributes: vec![Category],
                pose_tolerance: None,
                dims_mae_max: Some(ARKITSCENES_DIMS_MAE),
                distance_field: DistanceField::CenterCam,
                taus: TAUS_ARKITSCENES.to_vec(),
            },
        }
    }

    pub fn attributes_match(&self, pred: &SceneObject, gt: &SceneObject) -> bool {
        self.attributes.iter().all(|a| a.equal(pred, gt))
    }

    /// Pose / dimension constraint, independent of `tau`.
    pub fn extra_match(&self, pred: &SceneObject, gt: &SceneObject) -> bool {
        if let Some(tol) = self.pose_tolerance {
            match (&pred.pose, &gt.pose) {
                (Some(p), Some(g)) if wrap_angle(p[2] - g[2]).abs() <= tol => {}
                _ => return false,
            }
        }
        if let Some(max) = self.dims_mae_max {
            match (&pred.dimensions, &gt.dimensions) {
                (Some(p), Some(g)) => {
                    let mae = p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>() / 3.0;
                    if mae > max {
                        return false;
                    }
                }
                _ => return false,
            }
        }
        true
    }

    pub fn distance(&self, pred: &SceneObject, gt: &SceneObject) -> Option<f64> {
        Some(dist3(self.distance_field.of(pred)?, self.distance_field.of(gt)?))
    }

    /// Full pairwise predicate used by the matcher.
    pub fn matches(&self, pred: &SceneObject, gt: &SceneObject, tau: f64) -> bool {
        self.attributes_match(pred, gt)
            && self.distance(pred, gt).is_some_and(|d| d < tau)
            && self.extra_match(pred, gt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub jaccard: f64,
}

impl SceneScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let denom = tp + fp + fn_;
        let jaccard = if denom == 0 { 1.0 } else { tp as f64 / denom as f64 };
        SceneScore { tp, fp, fn_, jaccard }
    }
}

/// Greedy first-fit matching of one predicted scene against its ground truth.
pub fn jaccard_scene(gt: &Scene, pred: &Scene, crit: &MatchCriteria, tau: f64) -> Result<SceneScore> {
    if gt.dataset_style != pred.dataset_style {
        return Err(Error::StyleMismatch {
            gt: gt.dataset_style.to_string(),
            pred: pred.dataset_style.to_string(),
        });
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let mut matched = vec![false; gt.len()];
    let (mut tp, mut fp) = (0, 0);
    for p in &pred.objects {
        let hit = gt
            .objects
            .iter()
            .enumerate()
            .position(|(j, g)| !matched[j] && crit.matches(p, g, tau));
        match hit {
            Some(j) => {
                matched[j] = true;
                tp += 1;
            }
            None => fp += 1,
        }
    }
    let fn_ = matched.iter().filter(|m| !**m).count();
    Ok(SceneScore::from_counts(tp, fp, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauScore {
    pub tau: f64,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_tau: Vec<TauScore>,
    pub mean_jaccard: f64,
    /// `per_scene[i][k]` scores scene `i` at `taus[k]`.
    pub per_scene: Vec<Vec<SceneScore>>,
}

/// Mean Jaccard index per threshold, then averaged over thresholds.
pub fn jaccard_dataset(
    gts: &[Scene],
    preds: &[Scene],
    crit: &MatchCriteria,
    taus: &[f64],
) -> Result<EvalReport> {
    if gts.len() != preds.len() {
        return Err(Error::LengthMismatch {
            expected: gts.len(),
            actual: preds.len(),
        });
    }
    if gts.is_empty() || taus.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_scene = gts
        .iter()
        .zip(preds)
        .map(|(g, p)| {
            taus.iter()
                .map(|&tau| jaccard_scene(g, p, crit, tau))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let per_tau: Vec<TauScore> = taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| TauScore {
            tau,
            jaccard: per_scene.iter().map(|s| s[k].jaccard).sum::<f64>() / gts.len() as f64,
        })
        .collect();
    let mean_jaccard = per_tau.iter().map(|t| t.jaccard).sum::<f64>() / taus.len() as f64;
    Ok(EvalReport {
        per_tau,
        mean_jaccard,
        per_scene,
    })
}

fn normalize(answer: &str) -> String {
    answer.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Exact-match accuracy after whitespace normalization; case-sensitive.
pub fn qa_accuracy<S: AsRef<str>, U: AsRef<str>>(pred: &[S], gt: &[U]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = pred
        .iter()
        .zip(gt)
        .filter(|(p, g)| normalize(p.as_ref()) == normalize(g.as_ref()))
        .count();
    Ok(hits as f64 / gt.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaBaselines {
    /// Expected accuracy of guessing uniformly within each answer type.
    pub random_expected: f64,
    /// Accuracy of always answering the training majority of the type.
    pub frequency: f64,
    pub majority: BTreeMap<AnswerType, String>,
}

/// Most frequent training answer per type; ties go to the smaller string.
pub fn majority_answers(train: &[QaItem]) -> BTreeMap<AnswerType, String> {
    let mut counts: BTreeMap<AnswerType, BTreeMap<String, usize>> = BTreeMap::new();
    for item in train {
        *counts
            .entry(item.answer_type)
            .or_default()
            .entry(normalize(&item.answer))
            .or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(ty, c)| {
            let best = c
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|(answer, _)| answer)
                .expect("non-empty group");
            (ty, best)
        })
        .collect()
}

pub fn qa_baselines(train: &[QaItem], test: &[QaItem]) -> Result<QaBaselines> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let majority = majority_answers(train);
    let mut random = 0.0;
    let mut hits = 0usize;
    for item in test {
        let space = item.answer_type.answer_space();
        let answer = normalize(&item.answer);
        if space.contains(&answer.as_str()) {
            random += 1.0 / space.len() as f64;
        }
        let guess = majority
            .get(&item.answer_type)
            .map(String::as_str)
            .unwrap_or(space[0]);
        if guess == answer {
            hits += 1;
        }
    }
    Ok(QaBaselines {
        random_expected: random / test.len() as f64,
        frequency: hits as f64 / test.len() as f64,
        majority,
    })
}

/// Runs the uniform-guessing baseline `runs` times and returns the mean and
/// population standard deviation of its accuracy.
pub fn simulate_random_baseline(test: &[QaItem], runs: usize, seed: u64) -> Result<(f64, f64)> {
    if test.is_empty() || runs == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let accs: Vec<f64> = (0..runs)
        .map(|_| {
            let hits = test
                .iter()
                .filter(|item| {
                    let guess = item
                        .answer_type
                        .answer_space()
                        .choose(&mut rng)
                        .expect("answer spaces are non-empty");
                    *guess == normalize(&item.answer)
                })
                .count();
            hits as f64 / test.len() as f64
        })
        .collect();
    let mean = accs.iter().sum::<f64>() / runs as f64;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / runs as f64;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clevr(objs: &[(&str, [f64; 3])]) -> Scene {
        Scene::new(
            DatasetStyle::Clevr,
            objs.iter()
                .map(|(shape, loc)| SceneObject::clevr("small", "red", "rubber", shape, *loc))
                .collect(),
        )
        .unwrap()
    }

    fn four() -> Scene {
        clevr(&[
            ("cube", [0.0, 0.0, 0.35]),
            ("sphere", [1.0, 0.0, 0.35]),
            ("cylinder", [0.0, 1.0, 0.35]),
            ("cube", [2.0, 2.0, 0.35]),
        ])
    }

    fn score(gt: &Scene, pred: &Scene, tau: f64) -> SceneScore {
        jaccard_scene(gt, pred, &MatchCriteria::preset(DatasetStyle::Clevr), tau).unwrap()
    }

    #[test]
    fn perfect_missing_and_extra() {
        let gt = four();
        assert_eq!(score(&gt, &gt, 0.05), SceneScore::from_counts(4, 0, 0));
        assert_eq!(score(&gt, &gt, 0.05).jaccard, 1.0);

        let mut missing = gt.clone();
        missing.objects.pop();
        let s = score(&gt, &missing, 0.05);
        assert_eq!((s.tp, s.fp, s.fn_, s.jaccard), (3, 0, 1, 0.75));

        let mut extra = gt.clone();
        extra
            .objects
            .push(SceneObject::clevr("large", "blue", "metal", "sphere", [3.0, 3.0, 0.7]));
        let s = score(&gt, &extra, 0.05);
        assert_eq!((s.tp, s.fp, s.fn_, s.jaccard), (4, 1, 0, 0.8));
    }

    #[test]
    fn displaced_object_counts_twice() {
        let gt = four();
        let mut pred = gt.clone();
        pred.objects[1].location = Some([1.06, 0.0, 0.35]);
        let s = score(&gt, &pred, 0.05);
        assert_eq!((s.tp, s.fp, s.fn_), (3, 1, 1));
        // the distance test is strict
        pred.objects[1].location = Some([1.05, 0.0, 0.35]);
        assert_eq!(score(&gt, &pred, 0.05).tp, 3);
        assert_eq!(score(&gt, &pred, 0.0501).tp, 4);
    }

    #[test]
    fn attribute_mismatch_blocks_match() {
        let gt = four();
        let mut pred = gt.clone();
        pred.objects[0].color = Some("blue".into());
        assert_eq!(score(&gt, &pred, 0.25).tp, 3);
    }

    #[test]
    fn empty_scenes() {
        let e = Scene::empty(DatasetStyle::Clevr);
        assert_eq!(score(&e, &e, 0.05).jaccard, 1.0);
        assert_eq!(score(&four(), &e, 0.05).jaccard, 0.0);
        assert_eq!(score(&e, &four(), 0.05).jaccard, 0.0);
    }

    #[test]
    fn style_and_tau_checked() {
        let crit = MatchCriteria::preset(DatasetStyle::Clevr);
        let other = Scene::empty(DatasetStyle::Objaworld);
        assert!(matches!(
            jaccard_scene(&four(), &other, &crit, 0.1),
            Err(Error::StyleMismatch { .. })
        ));
        assert!(jaccard_scene(&four(), &four(), &crit, 0.0).is_err());
    }

    #[test]
    fn duplicate_prediction_adds_one_fp() {
        let gt = four();
        let mut pred = gt.clone();
        pred.objects.push(gt.objects[2].clone());
        let s = score(&gt, &pred, 0.05);
        assert_eq!((s.tp, s.fp, s.fn_), (4, 1, 0));
    }

    #[test]
    fn pose_tolerance_wraps() {
        let crit = MatchCriteria::preset(DatasetStyle::Objaworld);
        let g = SceneObject::objaworld("person", [0.0; 3], [0.0, 0.0, 3.10]);
        let mut p = g.clone();
        p.pose = Some([0.0, 0.0, -3.10]);
        assert!(crit.matches(&p, &g, 0.05));
        p.pose = Some([0.0, 0.0, 3.10 - 0.16]);
        assert!(!crit.matches(&p, &g, 0.05));
        p.pose = Some([0.0, 0.0, 3.10 - 0.14]);
        assert!(crit.matches(&p, &g, 0.05));
    }

    #[test]
    fn dimension_mae() {
        let crit = MatchCriteria::preset(DatasetStyle::Objectron);
        let g = SceneObject::camera("cup", [0.0, 0.0, 1.0], [0.10, 0.10, 0.10]);
        let mut p = g.clone();
        p.dimensions = Some([0.16, 0.13, 0.10]);
        assert!(crit.matches(&p, &g, 0.05));
        p.dimensions = Some([0.20, 0.16, 0.10]);
        assert!(!crit.matches(&p, &g, 0.05));
        let loose = MatchCriteria::preset(DatasetStyle::Arkitscenes);
        assert!(loose.matches(&p, &g, 1.25));
    }

    #[test]
    fn greedy_is_not_tau_monotone_in_general() {
        // two identical GT objects; at a wide tau the first prediction grabs
        // the wrong one and strands the second prediction.
        let gt = clevr(&[("cube", [0.0, 0.0, 0.35]), ("cube", [0.2, 0.0, 0.35])]);
        let pred = clevr(&[("cube", [0.2, 0.0, 0.35]), ("cube", [-0.1, 0.0, 0.35])]);
        assert_eq!(score(&gt, &pred, 0.15).tp, 2);
        assert_eq!(score(&gt, &pred, 0.25).tp, 1);
    }

    #[test]
    fn dataset_report() {
        let gts = vec![four(), four()];
        let mut bad = four();
        bad.objects.truncate(2);
        let preds = vec![four(), bad];
        let r = jaccard_dataset(&gts, &preds, &MatchCriteria::preset(DatasetStyle::Clevr), &TAUS_DEFAULT).unwrap();
        assert_eq!(r.per_tau.len(), 5);
        assert!(r.per_tau.iter().all(|t| (t.jaccard - 0.75).abs() < 1e-12));
        assert!((r.mean_jaccard - 0.75).abs() < 1e-12);
        assert_eq!(r.per_scene[1][0].fn_, 2);
        assert!(matches!(
            jaccard_dataset(&gts, &preds[..1], &MatchCriteria::preset(DatasetStyle::Clevr), &TAUS_DEFAULT),
            Err(Error::LengthMismatch { .. })
        ));
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["per_scene"][1][0]["fn"], 2);
    }

    #[test]
    fn accuracy() {
        assert_eq!(qa_accuracy(&["a", "b"], &["a", "b"]).unwrap(), 1.0);
        assert_eq!(qa_accuracy(&["small", "Small"], &["small", "small"]).unwrap(), 0.5);
        assert_eq!(qa_accuracy(&[" two  words"], &["two words"]).unwrap(), 1.0);
        assert!(qa_accuracy(&["a"], &["a", "b"]).is_err());
    }

    fn item(answer: &str, ty: AnswerType) -> QaItem {
        QaItem::new("q?", answer, ty).unwrap()
    }

    #[test]
    fn baselines() {
        let train = vec![
            item("False", AnswerType::Bool),
            item("False", AnswerType::Bool),
            item("True", AnswerType::Bool),
            item("cube", AnswerType::Shape),
            item("sphere", AnswerType::Shape),
        ];
        let test = vec![item("True", AnswerType::Bool), item("False", AnswerType::Bool)];
        let b = qa_baselines(&train, &test).unwrap();
        assert_eq!(b.random_expected, 0.5);
        assert_eq!(b.frequency, 0.5);
        assert_eq!(b.majority[&AnswerType::Bool], "False");
        // tie between cube and sphere goes to the smaller string
        assert_eq!(b.majority[&AnswerType::Shape], "cube");
        assert!(qa_baselines(&[], &test).is_err());
    }

    #[test]
    fn mixed_type_random_expectation() {
        let test = vec![
            item("3", AnswerType::Number),
            item("cyan", AnswerType::Color),
            item("metal", AnswerType::Material),
            item("cube", AnswerType::Shape),
        ];
        let b = qa_baselines(&test, &test).unwrap();
        let expect = (1.0 / 11.0 + 1.0 / 8.0 + 0.5 + 1.0 / 3.0) / 4.0;
        assert!((b.random_expected - expect).abs() < 1e-15);
    }
}
