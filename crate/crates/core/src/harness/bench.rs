//! Search-then-predict evaluation of samples under a region policy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataType, Grounder, GroundingRequest, HarnessError, Sample};
use crate::actions::{self, ActionKind, ActionOutcome, ActionParams};
use crate::geometry::{remap_point, Point, Rect};
use crate::perceptor::{score_scene, Instruction, PrefixTemplate, RelevanceProvider, ScoredScene};
use crate::planner::{run_search, ActionSet, SearchConfig, SearchTrace};
use crate::reward::{self, RewardBreakdown, RewardTerms};

/// How the region handed to the grounder is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    /// The whole screenshot.
    FullScreen,
    /// Focus repeatedly from the full image while it keeps shrinking, up to
    /// `max_depth` steps after the first.
    ForwardFocus,
    /// Tree search under its own configuration.
    Search(SearchConfig),
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::FullScreen => "full-screen".into(),
            Policy::ForwardFocus => "forward-focus".into(),
            Policy::Search(c) => format!("search[{}|{}]", c.actions.label(), c.reward_terms.label()),
        }
    }
}

/// Everything a sample evaluation needs besides the sample and the policy.
pub struct EvalContext<'a> {
    pub provider: &'a dyn RelevanceProvider,
    pub grounder: &'a dyn Grounder,
    pub template: &'a PrefixTemplate,
    /// Non-search policies take their settings from here, with reward weights
    /// never ablated.
    pub base: &'a SearchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub sample_id: usize,
    pub group: String,
    pub data_type: DataType,
    pub region: Option<Rect>,
    pub reward: Option<RewardBreakdown>,
    /// `1 - area(region) / area(image)`
    pub area_reduction: f64,
    /// `1 - elements in region / elements in scene`
    pub element_reduction: f64,
    /// Predicted point in image coordinates.
    pub point: Option<Point>,
    pub correct: bool,
    pub node_count: usize,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<SearchTrace>,
}

impl EvalRecord {
    fn failed(sample: &Sample, error: String) -> Self {
        Self {
            sample_id: sample.id,
            group: sample.group.clone(),
            data_type: sample.data_type,
            region: None,
            reward: None,
            area_reduction: 0.0,
            element_reduction: 0.0,
            point: None,
            correct: false,
            node_count: 0,
            error: Some(error),
            trace: None,
        }
    }
}

/// Regions visited by repeated Focus from the full image, starting with the
/// image itself. Stops at the first step that is unavailable or does not
/// strictly shrink the area.
pub fn forward_focus_chain(scored: &ScoredScene, params: &ActionParams, max_depth: usize) -> Vec<Rect> {
    let mut chain = vec![scored.bounds()];
    for _ in 0..=max_depth {
        let last = *chain.last().expect("chain starts non-empty");
        match actions::apply(ActionKind::Focus, &last, scored, params) {
            ActionOutcome::Proposed(p) if p.region.area() < last.area() => chain.push(p.region),
            _ => break,
        }
    }
    chain
}

struct Chosen {
    region: Rect,
    reward: RewardBreakdown,
    node_count: usize,
    trace: Option<SearchTrace>,
}

fn choose_region(
    scored: &ScoredScene,
    ctx: &EvalContext<'_>,
    policy: &Policy,
    keep_trace: bool,
) -> Result<Chosen, String> {
    let fixed = |region: Rect, node_count: usize| -> Result<Chosen, String> {
        Ok(Chosen {
            region,
            reward: reward::evaluate(&region, scored, &ctx.base.reward_weights),
            node_count,
            trace: None,
        })
    };
    match policy {
        Policy::FullScreen => fixed(scored.bounds(), 0),
        Policy::ForwardFocus => {
            let chain = forward_focus_chain(scored, &ctx.base.action_params, ctx.base.max_depth);
            fixed(*chain.last().expect("non-empty chain"), chain.len() - 1)
        }
        Policy::Search(config) => {
            let result = run_search(scored, config).map_err(|e| e.to_string())?;
            Ok(Chosen {
                region: result.best_region,
                reward: result.best_reward,
                node_count: result.node_count,
                trace: keep_trace.then_some(result.trace),
            })
        }
    }
}

/// Scores the scene, picks a region, asks the grounder and checks the point
/// against the ground-truth box. Failures become records, never panics or
/// early returns.
pub fn evaluate_sample(sample: &Sample, ctx: &EvalContext<'_>, policy: &Policy, keep_trace: bool) -> EvalRecord {
    let run = || -> Result<EvalRecord, String> {
        let scene = &sample.scene;
        let instruction =
            Instruction::new(&sample.instruction, scene.domain_tag(), ctx.template).map_err(|e| e.to_string())?;
        let scored = score_scene(scene, &instruction, ctx.template, ctx.provider).map_err(|e| e.to_string())?;
        let chosen = choose_region(&scored, ctx, policy, keep_trace)?;
        let local =
            ctx.grounder.ground(&GroundingRequest { sample, region: chosen.region }).map_err(|e| e.to_string())?;
        let point = remap_point(local, &chosen.region);
        let total = scene.elements().len();
        let element_reduction =
            if total == 0 { 0.0 } else { 1.0 - scene.count_in(&chosen.region) as f64 / total as f64 };
        Ok(EvalRecord {
            sample_id: sample.id,
            group: sample.group.clone(),
            data_type: sample.data_type,
            region: Some(chosen.region),
            reward: Some(chosen.reward),
            area_reduction: (1.0 - chosen.region.area() / scene.bounds().area()).clamp(0.0, 1.0),
            element_reduction,
            point: Some(point),
            correct: sample.gt_box.contains(point),
            node_count: chosen.node_count,
            error: None,
            trace: chosen.trace,
        })
    };
    run().unwrap_or_else(|e| EvalRecord::failed(sample, e))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
}

impl Accuracy {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
    }

    /// Zero when empty.
    pub fn value(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    fn cell(&self) -> String {
        if self.total == 0 {
            "-".into()
        } else {
            format!("{:.3} ({}/{})", self.value(), self.correct, self.total)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub text: Accuracy,
    pub icon: Accuracy,
    pub avg: Accuracy,
}

impl AccuracyRow {
    fn add(&mut self, data_type: DataType, correct: bool) {
        match data_type {
            DataType::Text => self.text.add(correct),
            DataType::Icon => self.icon.add(correct),
        }
        self.avg.add(correct);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub overall: AccuracyRow,
    pub groups: BTreeMap<String, AccuracyRow>,
    /// Means over samples that did not fail.
    pub mean_area_reduction: f64,
    pub mean_element_reduction: f64,
    pub failures: usize,
    pub records: Vec<EvalRecord>,
}

impl EvalReport {
    /// Aggregates records in the given order.
    pub fn from_records(policy: String, records: Vec<EvalRecord>) -> Self {
        let mut overall = AccuracyRow::default();
        let mut groups: BTreeMap<String, AccuracyRow> = BTreeMap::new();
        let (mut area, mut elements, mut ok) = (0.0, 0.0, 0usize);
        for r in &records {
            overall.add(r.data_type, r.correct);
            groups.entry(r.group.clone()).or_default().add(r.data_type, r.correct);
            if r.error.is_none() {
                area += r.area_reduction;
                elements += r.element_reduction;
                ok += 1;
            }
        }
        let mean = |sum: f64| if ok == 0 { 0.0 } else { sum / ok as f64 };
        Self {
            policy,
            overall,
            groups,
            mean_area_reduction: mean(area),
            mean_element_reduction: mean(elements),
            failures: records.len() - ok,
            records,
        }
    }

    pub fn accuracy(&self) -> f64 {
        self.overall.avg.value()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Rows per group plus an overall row; columns text / icon / avg.
    pub fn to_table(&self) -> String {
        let mut out = format!("policy: {}\n", self.policy);
        let _ = writeln!(out, "{:<12} {:<20} {:<20} avg", "group", "text", "icon");
        let rows = self.groups.iter().map(|(g, r)| (g.as_str(), r)).chain([("overall", &self.overall)]);
        for (name, row) in rows {
            let _ = writeln!(out, "{:<12} {:<20} {:<20} {}", name, row.text.cell(), row.icon.cell(), row.avg.cell());
        }
        let _ = writeln!(
            out,
            "area reduction {:.3}  element reduction {:.3}  failures {}",
            self.mean_area_reduction, self.mean_element_reduction, self.failures
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    pub parallelism: usize,
    pub keep_traces: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { parallelism: 1, keep_traces: false }
    }
}

/// Evaluates every sample on a pool of `parallelism` threads. Records keep
/// sample order, so the report does not depend on the thread count.
pub fn run_benchmark(
    samples: &[Sample],
    ctx: &EvalContext<'_>,
    policy: &Policy,
    options: BenchOptions,
) -> Result<EvalReport, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptyBenchmark);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    let records = pool.install(|| {
        samples.par_iter().map(|s| evaluate_sample(s, ctx, policy, options.keep_traces)).collect::<Vec<_>>()
    });
    Ok(EvalReport::from_records(policy.label(), records))
}

/// Four rows: no search, then Focus, Focus+Shift, Focus+Shift+Scatter.
pub fn action_lattice(base: &SearchConfig) -> Vec<(String, Policy)> {
    let mut rows = vec![("none".to_string(), Policy::FullScreen)];
    for n in 1..=ActionKind::ALL.len() {
        let actions = ActionSet::from_actions(&ActionKind::ALL[..n]);
        rows.push((actions.label(), Policy::Search(SearchConfig { actions, ..base.clone() })));
    }
    rows
}

/// Four rows: no search, then relevance, +coverage, +concentration.
pub fn reward_lattice(base: &SearchConfig) -> Vec<(String, Policy)> {
    let mut rows = vec![("none".to_string(), Policy::FullScreen)];
    let steps = [
        RewardTerms { relevance: true, coverage: false, concentration: false },
        RewardTerms { relevance: true, coverage: true, concentration: false },
        RewardTerms { relevance: true, coverage: true, concentration: true },
    ];
    for terms in steps {
        rows.push((terms.label(), Policy::Search(SearchConfig { reward_terms: terms, ..base.clone() })));
    }
    rows
}

/// Comparison policies: full screen, forward-only focus, and search with
/// each nested action subset.
pub fn baseline_policies(base: &SearchConfig) -> Vec<(String, Policy)> {
    let mut rows =
        vec![("full-screen".to_string(), Policy::FullScreen), ("forward-focus".to_string(), Policy::ForwardFocus)];
    rows.extend(action_lattice(base).into_iter().skip(1));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ScriptedGrounder;
    use crate::perceptor::{HashingEmbedder, Scene, UiElement};

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect::new(x0, y0, x1, y1).unwrap()
    }

    fn sample(id: usize, group: &str, data_type: DataType) -> Sample {
        let el = |i: usize, b: Rect, d: &str| UiElement { id: i, bbox: b, description: d.into(), interactive: true };
        let elements = vec![
            el(0, rect(100., 100., 200., 140.), "save file"),
            el(1, rect(1500., 100., 1600., 140.), "print chart"),
            el(2, rect(100., 900., 200., 940.), "zoom palette"),
            el(3, rect(1500., 900., 1600., 940.), "sort table"),
        ];
        Sample {
            id,
            scene: Scene::new("x.png", 1920, 1080, group, elements).unwrap(),
            instruction: "save file".into(),
            gt_box: rect(100., 100., 200., 140.),
            data_type,
            group: group.into(),
        }
    }

    fn perfect() -> ScriptedGrounder {
        ScriptedGrounder { base_success: 1.0, clutter_penalty: 0.0, resolution_penalty: 0.0, seed: 0 }
    }

    #[test]
    fn forced_success_is_correct() {
        let provider = HashingEmbedder::new(256);
        let grounder = perfect();
        let template = PrefixTemplate::default();
        let base = SearchConfig::default();
        let ctx = EvalContext { provider: &provider, grounder: &grounder, template: &template, base: &base };
        let s = sample(0, "web", DataType::Text);
        let r = evaluate_sample(&s, &ctx, &Policy::Search(base.clone()), false);
        assert!(r.correct, "{r:?}");
        assert!(r.region.unwrap().contains(s.gt_box.center()));
        let full = evaluate_sample(&s, &ctx, &Policy::FullScreen, false);
        assert_eq!(full.region, Some(s.scene.bounds()));
        assert_eq!((full.area_reduction, full.element_reduction), (0.0, 0.0));
    }

    #[test]
    fn forward_chain_areas_never_grow() {
        let provider = HashingEmbedder::new(256);
        let template = PrefixTemplate::default();
        let s = sample(0, "web", DataType::Text);
        let instr = Instruction::new(&s.instruction, "web", &template).unwrap();
        let scored = score_scene(&s.scene, &instr, &template, &provider).unwrap();
        let chain = forward_focus_chain(&scored, &ActionParams::default(), 3);
        assert!(chain.len() >= 2);
        for w in chain.windows(2) {
            assert!(w[1].area() < w[0].area());
        }
    }

    #[test]
    fn report_counts_by_group_and_type() {
        let mk = |id, group: &str, data_type, correct| EvalRecord {
            correct,
            ..EvalRecord::failed(&sample(id, group, data_type), String::new())
        };
        let mut records = vec![
            mk(0, "web", DataType::Text, true),
            mk(1, "web", DataType::Icon, false),
            mk(2, "mobile", DataType::Icon, false),
            mk(3, "mobile", DataType::Text, false),
        ];
        for r in &mut records {
            r.error = None;
        }
        let report = EvalReport::from_records("p".into(), records);
        assert_eq!(report.accuracy(), 0.25);
        assert_eq!(report.groups["web"].avg, Accuracy { correct: 1, total: 2 });
        assert_eq!(report.overall.text, Accuracy { correct: 1, total: 2 });
        assert_eq!(report.overall.icon.value(), 0.0);
        let table = report.to_table();
        assert!(table.contains("overall") && table.contains("0.250 (1/4)"), "{table}");
    }

    #[test]
    fn empty_benchmark_is_an_error() {
        let provider = HashingEmbedder::new(256);
        let grounder = perfect();
        let template = PrefixTemplate::default();
        let base = SearchConfig::default();
        let ctx = EvalContext { provider: &provider, grounder: &grounder, template: &template, base: &base };
        assert!(matches!(
            run_benchmark(&[], &ctx, &Policy::FullScreen, BenchOptions::default()),
            Err(HarnessError::EmptyBenchmark)
        ));
    }

    #[test]
    fn lattices_have_four_distinct_rows() {
        let base = SearchConfig::default();
        for lattice in [action_lattice(&base), reward_lattice(&base)] {
            assert_eq!(lattice.len(), 4);
            let labels: std::collections::BTreeSet<_> = lattice.iter().map(|(_, p)| p.label()).collect();
            assert_eq!(labels.len(), 4);
        }
        let full = &action_lattice(&base)[3].1;
        assert_eq!(full, &Policy::Search(base));
    }
}
