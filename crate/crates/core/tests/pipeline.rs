//! End-to-end evaluation: corpus generation, scoring, search, grounding and
//! reporting.

use region_search::geometry::{remap_point, Point, Rect};
use region_search::harness::{
    action_lattice, baseline_policies, evaluate_sample, generate_synthetic, load_samples, run_benchmark, BenchOptions,
    DataType, EvalContext, GeneratorSpec, Grounder, GrounderConfig, GrounderError, GroundingRequest, Policy, Sample,
    SampleSchema, ScriptedGrounder, SyntheticCorpus,
};
use region_search::perceptor::{
    score_scene, FileEmbeddings, HashingEmbedder, Instruction, PrefixTemplate, Scene, UiElement,
};
use region_search::planner::{run_search, SearchConfig};

fn corpus(scenes: usize, seed: u64) -> SyntheticCorpus {
    let spec = GeneratorSpec { scenes, ..GeneratorSpec::default() };
    generate_synthetic(&spec, seed, &PrefixTemplate::default()).unwrap()
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let c = corpus(40, 8);
    let provider = HashingEmbedder::new(256);
    let grounder = ScriptedGrounder::from_config(&GrounderConfig::default());
    let template = PrefixTemplate::default();
    let base = SearchConfig::default();
    let ctx = EvalContext { provider: &provider, grounder: &grounder, template: &template, base: &base };
    let policy = Policy::Search(base.clone());
    let run = |parallelism| {
        run_benchmark(&c.samples, &ctx, &policy, BenchOptions { parallelism, keep_traces: true }).unwrap().to_json()
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
}

#[test]
fn record_matches_hand_composed_pipeline() {
    let c = corpus(12, 2);
    let provider = HashingEmbedder::new(256);
    let grounder = ScriptedGrounder::from_config(&GrounderConfig::default());
    let template = PrefixTemplate::default();
    let base = SearchConfig::default();
    let ctx = EvalContext { provider: &provider, grounder: &grounder, template: &template, base: &base };
    for s in &c.samples {
        let record = evaluate_sample(s, &ctx, &Policy::Search(base.clone()), false);
        let instr = Instruction::new(&s.instruction, s.scene.domain_tag(), &template).unwrap();
        let scored = score_scene(&s.scene, &instr, &template, &provider).unwrap();
        let result = run_search(&scored, &base).unwrap();
        let local = grounder.ground(&GroundingRequest { sample: s, region: result.best_region }).unwrap();
        let point = remap_point(local, &result.best_region);
        assert_eq!(record.region, Some(result.best_region));
        assert_eq!(record.reward.as_ref(), Some(&result.best_reward));
        assert_eq!(record.point, Some(point));
        assert_eq!(record.correct, s.gt_box.contains(point));
        let full = s.scene.bounds().area();
        assert_eq!(record.area_reduction, 1.0 - result.best_region.area() / full);
        assert!((0.0..=1.0).contains(&record.element_reduction));
    }
}

#[test]
fn written_corpus_loads_back_and_file_provider_agrees() {
    let c = corpus(200, 4);
    let dir = tempfile::tempdir().unwrap();
    c.write(dir.path()).unwrap();
    let loaded = load_samples(dir.path().join(SyntheticCorpus::SAMPLES_FILE), SampleSchema::Native).unwrap();
    assert_eq!(loaded, c.samples);

    let file = FileEmbeddings::load(dir.path().join(SyntheticCorpus::EMBEDDINGS_FILE)).unwrap();
    let mock = HashingEmbedder::new(256);
    let template = PrefixTemplate::default();
    for s in loaded.iter().take(20) {
        let instr = Instruction::new(&s.instruction, s.scene.domain_tag(), &template).unwrap();
        let a = score_scene(&s.scene, &instr, &template, &file).unwrap();
        let b = score_scene(&s.scene, &instr, &template, &mock).unwrap();
        assert_eq!(a.scores(), b.scores());
    }

    let again = tempfile::tempdir().unwrap();
    corpus(200, 4).write(again.path()).unwrap();
    for name in [SyntheticCorpus::SAMPLES_FILE, SyntheticCorpus::EMBEDDINGS_FILE] {
        assert_eq!(std::fs::read(dir.path().join(name)).unwrap(), std::fs::read(again.path().join(name)).unwrap());
    }
}

#[test]
fn search_beats_full_screen_under_clutter() {
    let c = corpus(200, 21);
    let provider = HashingEmbedder::new(256);
    let config = GrounderConfig::default();
    assert!(config.clutter_penalty > 0.0);
    let grounder = ScriptedGrounder::from_config(&config);
    let template = PrefixTemplate::default();
    let base = SearchConfig::default();
    let ctx = EvalContext { provider: &provider, grounder: &grounder, template: &template, base: &base };
    let opts = BenchOptions { parallelism: 4, keep_traces: false };
    let full = run_benchmark(&c.samples, &ctx, &Policy::FullScreen, opts).unwrap();
    let search = run_benchmark(&c.samples, &ctx, &Policy::Search(base.clone()), opts).unwrap();
    assert!(search.accuracy() >= full.accuracy(), "{} < {}", search.accuracy(), full.accuracy());
    assert_eq!(full.mean_area_reduction, 0.0);
    for r in &search.records {
        assert!((0.0..=1.0).contains(&r.area_reduction) && (0.0..=1.0).contains(&r.element_reduction));
    }
}

#[test]
fn baseline_rows_behave() {
    let c = corpus(10, 6);
    let provider = HashingEmbedder::new(256);
    let grounder = ScriptedGrounder::from_config(&GrounderConfig::default());
    let template = PrefixTemplate::default();
    let base = SearchConfig::default();
    let ctx = EvalContext { provider: &provider, grounder: &grounder, template: &template, base: &base };
    let rows = baseline_policies(&base);
    assert_eq!(rows.len(), 5);
    for s in &c.samples {
        let full = evaluate_sample(s, &ctx, &rows[0].1, false);
        assert_eq!(full.region, Some(s.scene.bounds()));
        assert_eq!((full.area_reduction, full.element_reduction), (0.0, 0.0));
        let default = evaluate_sample(s, &ctx, &Policy::Search(base.clone()), false);
        assert_eq!(evaluate_sample(s, &ctx, &rows[4].1, false), default);
        assert_eq!(&rows[4].1, &action_lattice(&base)[3].1);
    }
}

/// Answers a fixed point per sample id, in image coordinates.
struct FixedPoints(Vec<Point>);

impl Grounder for FixedPoints {
    fn ground(&self, request: &GroundingRequest<'_>) -> Result<Point, GrounderError> {
        Ok(request.region.to_local(self.0[request.sample.id]))
    }
}

#[test]
fn failures_are_isolated() {
    let mut samples = corpus(3, 1).samples;
    let el =
        UiElement { id: 0, bbox: Rect::new(0.0, 0.0, 10.0, 10.0).unwrap(), description: "x".into(), interactive: true };
    samples[1] = Sample {
        id: 1,
        scene: Scene::new("a.png", 100, 100, "web", vec![el]).unwrap(),
        instruction: "zoom layer".into(),
        gt_box: Rect::new(0.0, 0.0, 10.0, 10.0).unwrap(),
        data_type: DataType::Icon,
        group: "web".into(),
    };
    // The file provider lacks this scene's texts, so only sample 1 fails.
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(3, 1);
    c.write(dir.path()).unwrap();
    let provider = FileEmbeddings::load(dir.path().join(SyntheticCorpus::EMBEDDINGS_FILE)).unwrap();
    let grounder = FixedPoints(vec![Point::new(0.0, 0.0); 3]);
    let template = PrefixTemplate::default();
    let base = SearchConfig::default();
    let ctx = EvalContext { provider: &provider, grounder: &grounder, template: &template, base: &base };
    let report = run_benchmark(&samples, &ctx, &Policy::Search(base.clone()), BenchOptions::default()).unwrap();
    assert_eq!(report.failures, 1);
    assert!(
        report.records[1].error.as_deref().unwrap().contains("no precomputed embedding"),
        "{:?}",
        report.records[1].error
    );
    assert!(report.records[0].error.is_none() && report.records[2].error.is_none());
}
