//! The three perceptual region transforms.
//!
//! Each action maps `(region, scored scene, params)` to either a new candidate
//! region or [`ActionOutcome::Unavailable`]. Unavailability is an ordinary
//! result: the planner uses it to prune a node's action set.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::geometry::{enclosing_box, Point, Rect};
use crate::perceptor::{ScoredElement, ScoredScene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Focus,
    Shift,
    Scatter,
}

impl ActionKind {
    /// Fixed ordinal order used for every tie-break.
    pub const ALL: [ActionKind; 3] = [ActionKind::Focus, ActionKind::Shift, ActionKind::Scatter];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Focus => "focus",
            ActionKind::Shift => "shift",
            ActionKind::Scatter => "scatter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "focus" | "f" => Some(ActionKind::Focus),
            "shift" | "sh" => Some(ActionKind::Shift),
            "scatter" | "sc" => Some(ActionKind::Scatter),
            _ => None,
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionParams {
    pub focus_top_fraction: f64,
    /// Focus keeps pruning until the new area is at most this fraction of the old.
    pub focus_shrink_ratio: f64,
    /// Outlier cut-off as a multiple of the median center distance.
    pub focus_outlier_k: f64,
    pub scatter_top_fraction: f64,
    pub scatter_max_expand: f64,
    pub shift_top_fraction: f64,
    pub shift_max_iou: f64,
    pub padding_px: f64,
}

impl Default for ActionParams {
    fn default() -> Self {
        Self {
            focus_top_fraction: 0.15,
            focus_shrink_ratio: 0.7,
            focus_outlier_k: 2.0,
            scatter_top_fraction: 0.10,
            scatter_max_expand: 1.5,
            shift_top_fraction: 0.15,
            shift_max_iou: 0.3,
            padding_px: 8.0,
        }
    }
}

impl ActionParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fraction = |field: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(ConfigError::new(field, format!("must be in (0, 1], got {v}")))
            }
        };
        fraction("focus_top_fraction", self.focus_top_fraction)?;
        fraction("scatter_top_fraction", self.scatter_top_fraction)?;
        fraction("shift_top_fraction", self.shift_top_fraction)?;
        if !(self.focus_shrink_ratio > 0.0 && self.focus_shrink_ratio < 1.0) {
            return Err(ConfigError::new(
                "focus_shrink_ratio",
                format!("must be in (0, 1), got {}", self.focus_shrink_ratio),
            ));
        }
        if !(self.focus_outlier_k > 0.0 && self.focus_outlier_k.is_finite()) {
            return Err(ConfigError::new("focus_outlier_k", format!("must be positive, got {}", self.focus_outlier_k)));
        }
        if !(self.scatter_max_expand > 1.0 && self.scatter_max_expand.is_finite()) {
            return Err(ConfigError::new(
                "scatter_max_expand",
                format!("must be greater than 1, got {}", self.scatter_max_expand),
            ));
        }
        if !(self.shift_max_iou >= 0.0 && self.shift_max_iou < 1.0) {
            return Err(ConfigError::new("shift_max_iou", format!("must be in [0, 1), got {}", self.shift_max_iou)));
        }
        if !(self.padding_px >= 0.0 && self.padding_px.is_finite()) {
            return Err(ConfigError::new("padding_px", format!("must be non-negative, got {}", self.padding_px)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unavailability {
    /// Focus found no element centers inside the region.
    NoElementsInRegion,
    /// Shift or Scatter found no element centers outside the region.
    NoExternalElements,
    /// The action reproduced the input region.
    NoOp,
    /// Excluded by the configured action set.
    Disabled,
}

/// A candidate region plus what it took to produce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub region: Rect,
    /// Focus: elements dropped by the shrink loop.
    pub prune_steps: usize,
    /// Focus: elements dropped as spatial outliers.
    pub outliers_removed: usize,
    /// Shift: 0.9× shrink iterations spent on the overlap constraint.
    pub shrink_steps: usize,
    /// Shift: overlap constraint still violated after the shrink budget.
    pub constraint_violated: bool,
    /// Scatter: the candidate was scaled down to the expansion cap.
    pub capped: bool,
}

impl Proposal {
    fn new(region: Rect) -> Self {
        Self { region, prune_steps: 0, outliers_removed: 0, shrink_steps: 0, constraint_violated: false, capped: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionOutcome {
    Proposed(Proposal),
    Unavailable(Unavailability),
}

impl ActionOutcome {
    pub fn region(&self) -> Option<Rect> {
        match self {
            ActionOutcome::Proposed(p) => Some(p.region),
            ActionOutcome::Unavailable(_) => None,
        }
    }

    pub fn is_unavailable(&self) -> bool {
        matches!(self, ActionOutcome::Unavailable(_))
    }
}

pub fn apply(kind: ActionKind, region: &Rect, scored: &ScoredScene, params: &ActionParams) -> ActionOutcome {
    match kind {
        ActionKind::Focus => focus(region, scored, params),
        ActionKind::Shift => shift(region, scored, params),
        ActionKind::Scatter => scatter(region, scored, params),
    }
}

/// `max(1, ⌈fraction · n⌉)`, capped at `n`. The small offset keeps products
/// such as `0.15 · 20` from rounding up past an exact integer.
pub(crate) fn top_count(fraction: f64, n: usize) -> usize {
    let k = (fraction * n as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(n)
}

fn centroid(elements: &[ScoredElement<'_>]) -> Point {
    let n = elements.len() as f64;
    let (sx, sy) = elements.iter().fold((0.0, 0.0), |(sx, sy), e| {
        let c = e.element.bbox.center();
        (sx + c.x, sy + c.y)
    });
    Point::new(sx / n, sy / n)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn enclose(elements: &[ScoredElement<'_>], padding: f64, bounds: &Rect) -> Rect {
    enclosing_box(elements.iter().map(|e| &e.element.bbox), padding, bounds)
        .expect("element boxes are non-empty and lie inside the image")
}

/// Drops elements farther than `k` median distances from the centroid,
/// keeping the nearest one if the rule would drop everything.
fn remove_outliers(kept: &mut Vec<ScoredElement<'_>>, k: f64) -> usize {
    if kept.len() < 2 {
        return 0;
    }
    let c = centroid(kept);
    let distances: Vec<f64> = kept.iter().map(|e| e.element.bbox.center().distance(&c)).collect();
    let threshold = k * median(&mut distances.clone());
    let before = kept.len();
    let nearest = distances.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("non-empty");
    let survivors: Vec<_> = kept.iter().zip(&distances).filter(|(_, d)| **d <= threshold).map(|(e, _)| *e).collect();
    *kept = if survivors.is_empty() { vec![kept[nearest]] } else { survivors };
    before - kept.len()
}

/// Contracts toward the most relevant cluster inside `region`.
pub fn focus(region: &Rect, scored: &ScoredScene, params: &ActionParams) -> ActionOutcome {
    let inside = scored.elements_in_region(region);
    if inside.is_empty() {
        return ActionOutcome::Unavailable(Unavailability::NoElementsInRegion);
    }
    let bounds = scored.bounds();
    let mut kept = inside[..top_count(params.focus_top_fraction, inside.len())].to_vec();
    let outliers_removed = remove_outliers(&mut kept, params.focus_outlier_k);

    let target = params.focus_shrink_ratio * region.area();
    let mut out = enclose(&kept, params.padding_px, &bounds);
    let mut prune_steps = 0;
    while out.area() > target && kept.len() > 1 {
        let c = centroid(&kept);
        // `kept` is ordered best-first, so `>=` resolves distance ties
        // toward the lower-scored element.
        let mut farthest = 0;
        let mut max_d = f64::NEG_INFINITY;
        for (i, e) in kept.iter().enumerate() {
            let d = e.element.bbox.center().distance(&c);
            if d >= max_d {
                max_d = d;
                farthest = i;
            }
        }
        kept.remove(farthest);
        out = enclose(&kept, params.padding_px, &bounds);
        prune_steps += 1;
    }

    ActionOutcome::Proposed(Proposal { prune_steps, outliers_removed, ..Proposal::new(out) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Left,
    Right,
    Up,
    Down,
}

fn direction(from: Point, to: Point) -> Direction {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    if dx.abs() >= dy.abs() {
        if dx < 0.0 {
            Direction::Left
        } else {
            Direction::Right
        }
    } else if dy < 0.0 {
        Direction::Up
    } else {
        Direction::Down
    }
}

const SHIFT_SHRINK_FACTOR: f64 = 0.9;
const SHIFT_MAX_SHRINK_STEPS: usize = 10;

/// Relocates to the strongest directional group of external anchors.
pub fn shift(region: &Rect, scored: &ScoredScene, params: &ActionParams) -> ActionOutcome {
    let outside = scored.elements_outside(region);
    if outside.is_empty() {
        return ActionOutcome::Unavailable(Unavailability::NoExternalElements);
    }
    let anchors = &outside[..top_count(params.shift_top_fraction, outside.len())];
    let origin = region.center();

    // left, right, up, down
    let mut groups: [Vec<ScoredElement<'_>>; 4] = Default::default();
    for anchor in anchors {
        let dir = direction(origin, anchor.element.bbox.center());
        groups[dir as usize].push(*anchor);
    }
    let mut winner: Option<(usize, f64)> = None;
    for (i, group) in groups.iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let sum: f64 = group.iter().map(|e| e.score).sum();
        if winner.is_none_or(|(_, best)| sum > best) {
            winner = Some((i, sum));
        }
    }
    let group = &groups[winner.expect("at least one anchor").0];

    let bounds = scored.bounds();
    let mut out = enclose(group, params.padding_px, &bounds);
    let mut proposal = Proposal::new(out);
    if out.iou(region) > params.shift_max_iou {
        let pivot = centroid(group);
        while proposal.shrink_steps < SHIFT_MAX_SHRINK_STEPS {
            out = out.scale_about(pivot, SHIFT_SHRINK_FACTOR).ok().and_then(|r| r.clamp_to(&bounds)).unwrap_or(out);
            proposal.shrink_steps += 1;
            if out.iou(region) <= params.shift_max_iou {
                break;
            }
        }
        proposal.region = out;
        proposal.constraint_violated = out.iou(region) > params.shift_max_iou;
    }
    ActionOutcome::Proposed(proposal)
}

/// Expands to take in the strongest external elements, capped in area.
pub fn scatter(region: &Rect, scored: &ScoredScene, params: &ActionParams) -> ActionOutcome {
    let outside = scored.elements_outside(region);
    if outside.is_empty() {
        return ActionOutcome::Unavailable(Unavailability::NoExternalElements);
    }
    let kept = &outside[..top_count(params.scatter_top_fraction, outside.len())];
    let bounds = scored.bounds();
    let boxes = std::iter::once(region).chain(kept.iter().map(|e| &e.element.bbox));
    let mut out =
        enclosing_box(boxes, params.padding_px, &bounds).expect("region and element boxes lie inside the image");

    let cap = params.scatter_max_expand * region.area();
    let mut capped = false;
    if out.area() > cap {
        let factor = (cap / out.area()).sqrt();
        out = out
            .scale_about(region.center(), factor)
            .ok()
            .and_then(|r| r.clamp_to(&bounds))
            .expect("scaling about an interior point keeps a positive area inside the image");
        capped = true;
    }
    ActionOutcome::Proposed(Proposal { capped, ..Proposal::new(out) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perceptor::{Instruction, PrefixTemplate, Scene, UiElement};

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect::new(x0, y0, x1, y1).unwrap()
    }

    /// Scene with hand-assigned scores; boxes are `[x0, y0, x1, y1]`.
    fn scored(w: u32, h: u32, items: &[([f64; 4], f64)]) -> ScoredScene {
        let elements = items
            .iter()
            .enumerate()
            .map(|(id, (b, _))| UiElement {
                id,
                bbox: rect(b[0], b[1], b[2], b[3]),
                description: format!("e{id}"),
                interactive: true,
            })
            .collect();
        let scene = Scene::new("t.png", w, h, "test", elements).unwrap();
        let instr = Instruction::new("q", "test", &PrefixTemplate::default()).unwrap();
        ScoredScene::from_raw(scene, instr, items.iter().map(|(_, s)| Some(*s)).collect())
    }

    fn params(padding: f64) -> ActionParams {
        ActionParams { padding_px: padding, ..ActionParams::default() }
    }

    fn proposal(outcome: ActionOutcome) -> Proposal {
        match outcome {
            ActionOutcome::Proposed(p) => p,
            other => panic!("expected a proposal, got {other:?}"),
        }
    }

    #[test]
    fn top_count_floors_and_ceils() {
        assert_eq!(top_count(0.15, 20), 3);
        assert_eq!(top_count(0.15, 21), 4);
        assert_eq!(top_count(0.10, 3), 1);
        assert_eq!(top_count(0.15, 1), 1);
        assert_eq!(top_count(1.0, 7), 7);
    }

    #[test]
    fn defaults_validate() {
        assert!(ActionParams::default().validate().is_ok());
        let bad = ActionParams { scatter_max_expand: 1.0, ..ActionParams::default() };
        assert_eq!(bad.validate().unwrap_err().field, "scatter_max_expand");
    }

    #[test]
    fn focus_single_element_is_padded_box() {
        let s = scored(1000, 1000, &[([100., 100., 200., 150.], 0.5)]);
        let p = proposal(focus(&s.bounds(), &s, &params(8.0)));
        assert_eq!(p.region, rect(92., 92., 208., 158.));
        assert_eq!(p.prune_steps, 0);
    }

    #[test]
    fn focus_padding_clamps_to_image() {
        let s = scored(300, 200, &[([0., 0., 50., 20.], 0.5)]);
        let p = proposal(focus(&s.bounds(), &s, &params(8.0)));
        assert_eq!(p.region, rect(0., 0., 58., 28.));
    }

    #[test]
    fn focus_drops_far_outlier() {
        // Centers (100,100), (150,100), (100,150) and (900,900): centroid
        // (312.5, 312.5), median distance 284, outlier at ~831 > 2 * 284.
        let s = scored(
            1000,
            1000,
            &[
                ([90., 90., 110., 110.], 0.9),
                ([140., 90., 160., 110.], 0.8),
                ([90., 140., 110., 160.], 0.7),
                ([890., 890., 910., 910.], 0.85),
            ],
        );
        let p = ActionParams { focus_top_fraction: 1.0, ..params(0.0) };
        let out = proposal(focus(&s.bounds(), &s, &p));
        assert_eq!(out.region, rect(90., 90., 160., 160.));
        assert_eq!(out.outliers_removed, 1);
        assert_eq!(out.prune_steps, 0);
    }

    #[test]
    fn focus_prunes_farthest_until_shrunk() {
        // Two elements at opposite corners of a 100x100 region: enclosing
        // them covers the region, so the farther (lower score on a tie) goes.
        let s = scored(100, 100, &[([0., 0., 10., 10.], 0.9), ([90., 90., 100., 100.], 0.8)]);
        let p = ActionParams { focus_top_fraction: 1.0, ..params(0.0) };
        let out = proposal(focus(&s.bounds(), &s, &p));
        assert_eq!(out.prune_steps, 1);
        assert_eq!(out.region, rect(0., 0., 10., 10.));
    }

    #[test]
    fn focus_without_elements_is_unavailable() {
        let s = scored(100, 100, &[([0., 0., 10., 10.], 0.9)]);
        let empty = rect(50., 50., 100., 100.);
        assert_eq!(focus(&empty, &s, &params(0.0)), ActionOutcome::Unavailable(Unavailability::NoElementsInRegion));
    }

    #[test]
    fn shift_unavailable_when_everything_inside() {
        let s = scored(100, 100, &[([0., 0., 10., 10.], 0.9)]);
        assert!(shift(&s.bounds(), &s, &params(0.0)).is_unavailable());
        assert!(scatter(&s.bounds(), &s, &params(0.0)).is_unavailable());
    }

    #[test]
    fn shift_moves_to_upper_anchors() {
        let s = scored(
            1000,
            1000,
            &[([100., 50., 200., 90.], 0.9), ([700., 40., 800., 80.], 0.8), ([400., 850., 500., 900.], 0.3)],
        );
        let current = rect(300., 800., 600., 950.);
        let p = ActionParams { shift_top_fraction: 1.0, ..params(0.0) };
        let out = proposal(shift(&current, &s, &p));
        assert_eq!(out.region, rect(100., 40., 800., 90.));
        assert_eq!(out.region.iou(&current), 0.0);
        assert!(!out.constraint_violated);
    }

    #[test]
    fn shift_direction_ties_prefer_left() {
        // One anchor straight left and one straight right with equal scores.
        let s = scored(1000, 100, &[([0., 40., 20., 60.], 0.5), ([980., 40., 1000., 60.], 0.5)]);
        let current = rect(400., 0., 600., 100.);
        let p = ActionParams { shift_top_fraction: 1.0, ..params(0.0) };
        let out = proposal(shift(&current, &s, &p));
        assert_eq!(out.region, rect(0., 40., 20., 60.));
    }

    #[test]
    fn scatter_below_cap_is_returned_as_is() {
        let s = scored(1000, 1000, &[([100., 0., 120., 100.], 0.5)]);
        let current = rect(0., 0., 100., 100.);
        let out = proposal(scatter(&current, &s, &params(0.0)));
        assert_eq!(out.region, rect(0., 0., 120., 100.));
        assert!((out.region.area() / current.area() - 1.2).abs() < 1e-12);
        assert!(!out.capped);
    }

    #[test]
    fn scatter_far_element_hits_cap_exactly() {
        let s = scored(1000, 1000, &[([800., 800., 850., 850.], 0.5)]);
        let current = rect(100., 100., 200., 200.);
        let out = proposal(scatter(&current, &s, &params(0.0)));
        assert!(out.capped);
        assert!((out.region.area() - 1.5 * current.area()).abs() < 1e-6);
        assert!(out.region.contains(current.center()));
    }
}
