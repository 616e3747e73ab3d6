use std::path::Path;

use serde_json::{json, Value};

use region_search::config::Config;
use region_search::harness::{
    action_lattice, build_grounder, build_provider, generate_synthetic, load_samples, reward_lattice, run_benchmark,
    BenchOptions, EvalContext, EvalReport, GeneratorSpec, HarnessError, Policy, SampleSchema,
};
use region_search::perceptor::{score_scene, Instruction, Scene, UiElement};
use region_search::planner::{run_search, PlannerError, SearchTrace};

use crate::args::{BaselineArg, BenchArgs, Cli, Command, ExportDotArgs, GenArgs, LatticeArg, SchemaArg, SearchArgs};
use crate::CliError;

pub const EMBEDDER_URL: &str = "EMBEDDER_URL";
pub const GROUNDER_URL: &str = "GROUNDER_URL";

fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| CliError::Config(e.to_string()))?,
        None => Config::default(),
    };
    if let Ok(url) = std::env::var(EMBEDDER_URL) {
        config.provider.endpoint = Some(url);
    }
    if let Ok(url) = std::env::var(GROUNDER_URL) {
        config.grounder.endpoint = Some(url);
    }
    cli.overrides.apply(&mut config);
    config.validate().map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    Ok(config)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli)?;
    if cli.print_config {
        println!("{}", config.to_json());
        return Ok(());
    }
    match cli.command {
        Some(Command::Search(args)) => search(&config, &args),
        Some(Command::Bench(args)) => bench(&config, &args),
        Some(Command::Gen(args)) => gen(&config, &args),
        Some(Command::ExportDot(args)) => export_dot(&args),
        None => Err(CliError::Config("no subcommand given (search, bench, gen, export-dot)".into())),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Input(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// The scene part of a sample record; other fields are ignored.
#[derive(serde::Deserialize)]
struct SceneFile {
    image: String,
    width: u32,
    height: u32,
    domain_tag: String,
    elements: Vec<UiElement>,
    #[serde(default)]
    instruction: Option<String>,
}

fn load_scene(args: &SearchArgs) -> Result<(Scene, String), CliError> {
    let path = args.scene.display();
    let input = |m: String| CliError::Input(format!("{path}: {m}"));
    let value: Value = serde_json::from_str(&read(&args.scene)?).map_err(|e| input(e.to_string()))?;
    let entry = match value {
        Value::Array(mut items) => {
            if args.index >= items.len() {
                return Err(input(format!("no entry {} in an array of {}", args.index, items.len())));
            }
            items.swap_remove(args.index)
        }
        other => other,
    };
    let file: SceneFile = serde_json::from_value(entry).map_err(|e| input(e.to_string()))?;
    let instruction = args
        .instruction
        .clone()
        .or(file.instruction)
        .ok_or_else(|| input("no instruction given and none in the file".into()))?;
    let scene = Scene::new(file.image, file.width, file.height, file.domain_tag, file.elements)
        .map_err(|e| input(e.to_string()))?;
    Ok((scene, instruction))
}

fn planner_error(e: PlannerError) -> CliError {
    match e {
        PlannerError::EmptyScene => CliError::Input(e.to_string()),
        PlannerError::Config(_) => CliError::Config(e.to_string()),
        other => CliError::Engine(other.to_string()),
    }
}

fn search(config: &Config, args: &SearchArgs) -> Result<(), CliError> {
    let (scene, text) = load_scene(args)?;
    let instruction =
        Instruction::new(text, scene.domain_tag(), &config.template).map_err(|e| CliError::Input(e.to_string()))?;
    let provider = build_provider(&config.provider).map_err(|e| CliError::Engine(e.to_string()))?;
    let scored = score_scene(&scene, &instruction, &config.template, provider.as_ref())
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let result = run_search(&scored, &config.search).map_err(planner_error)?;

    if let Some(path) = &args.trace {
        write(path, &result.trace.to_json())?;
    }
    if let Some(path) = &args.dot {
        write(path, &result.trace.to_dot())?;
    }
    let r = &result.best_reward;
    if args.json {
        let summary = json!({
            "best_region": result.best_region,
            "best_node_id": result.best_node_id,
            "best_reward": r,
            "node_count": result.node_count,
        });
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    } else {
        let b = result.best_region.to_array();
        println!("best region: [{}, {}, {}, {}]", b[0], b[1], b[2], b[3]);
        println!("reward: total {:.6} (rel {:.6} cov {:.6} con {:.6})", r.total, r.r_rel, r.r_cov, r.r_con);
        println!("best node: {}", result.best_node_id);
        println!("nodes: {}", result.node_count);
    }
    Ok(())
}

fn harness_input(e: HarnessError) -> CliError {
    CliError::Input(e.to_string())
}

fn bench(config: &Config, args: &BenchArgs) -> Result<(), CliError> {
    let schema = match args.schema {
        SchemaArg::Native => SampleSchema::Native,
        SchemaArg::Screenspot => SampleSchema::ScreenSpot,
    };
    let samples = load_samples(&args.samples, schema).map_err(harness_input)?;
    if samples.is_empty() {
        return Err(CliError::Input(format!("{}: no samples", args.samples.display())));
    }
    let provider = build_provider(&config.provider).map_err(|e| CliError::Engine(e.to_string()))?;
    let grounder = build_grounder(&config.grounder);
    let ctx = EvalContext {
        provider: provider.as_ref(),
        grounder: grounder.as_ref(),
        template: &config.template,
        base: &config.search,
    };
    let options = BenchOptions { parallelism: config.parallelism, keep_traces: args.traces };

    let rows: Vec<(String, Policy)> = match (args.lattice, args.baseline) {
        (Some(LatticeArg::Actions), _) => action_lattice(&config.search),
        (Some(LatticeArg::Rewards), _) => reward_lattice(&config.search),
        (None, Some(BaselineArg::Full)) => vec![("full-screen".into(), Policy::FullScreen)],
        (None, Some(BaselineArg::Forward)) => vec![("forward-focus".into(), Policy::ForwardFocus)],
        (None, None) if config.search.actions.is_empty() || config.search.reward_terms.none_enabled() => {
            vec![("full-screen".into(), Policy::FullScreen)]
        }
        (None, None) => vec![("search".into(), Policy::Search(config.search.clone()))],
    };

    let mut reports = Vec::with_capacity(rows.len());
    for (row, policy) in &rows {
        let report = run_benchmark(&samples, &ctx, policy, options).map_err(|e| CliError::Engine(e.to_string()))?;
        reports.push((row.clone(), report));
    }

    let text = render_reports(&reports, args.lattice.is_some());
    print!("{text}");
    if let Some(dir) = &args.out {
        let stem = match args.lattice {
            Some(LatticeArg::Actions) => "lattice-actions",
            Some(LatticeArg::Rewards) => "lattice-rewards",
            None => "report",
        };
        let json_body = if args.lattice.is_some() {
            let rows: Vec<Value> =
                reports.iter().map(|(row, report)| json!({ "row": row, "report": report })).collect();
            serde_json::to_string_pretty(&rows).expect("reports serialize")
        } else {
            reports[0].1.to_json()
        };
        write(&dir.join(format!("{stem}.json")), &(json_body + "\n"))?;
        write(&dir.join(format!("{stem}.txt")), &text)?;
    }

    let failed: Vec<&EvalReport> = reports.iter().map(|(_, r)| r).filter(|r| r.failures == r.records.len()).collect();
    if let Some(report) = failed.first() {
        let first = report.records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(CliError::Engine(format!("every sample failed under {}: {first}", report.policy)));
    }
    Ok(())
}

fn render_reports(reports: &[(String, EvalReport)], lattice: bool) -> String {
    let mut out = String::new();
    if lattice {
        out.push_str(&format!(
            "{:<24} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "row", "text", "icon", "avg", "area-red", "elem-red"
        ));
        for (row, r) in reports {
            out.push_str(&format!(
                "{:<24} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}\n",
                row,
                r.overall.text.value(),
                r.overall.icon.value(),
                r.overall.avg.value(),
                r.mean_area_reduction,
                r.mean_element_reduction
            ));
        }
        out.push('\n');
    }
    for (_, r) in reports {
        out.push_str(&r.to_table());
        out.push('\n');
    }
    out
}

fn gen(config: &Config, args: &GenArgs) -> Result<(), CliError> {
    let mut spec = GeneratorSpec { mock_dimension: config.provider.mock_dimension, ..GeneratorSpec::default() };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field { spec.$field = v.into(); }
        )*};
    }
    set!(scenes, profile, min_elements, max_elements, width, height, grid_cols, grid_rows);
    set!(interactive_fraction, icon_fraction, margin);
    let corpus = generate_synthetic(&spec, args.seed, &config.template).map_err(harness_input)?;
    corpus.write(&args.out).map_err(harness_input)?;
    println!(
        "wrote {} samples and {} embeddings to {}",
        corpus.samples.len(),
        corpus.embeddings.len(),
        args.out.display()
    );
    Ok(())
}

fn export_dot(args: &ExportDotArgs) -> Result<(), CliError> {
    let trace = SearchTrace::from_json(&read(&args.trace)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.trace.display())))?;
    let dot = trace.to_dot();
    match &args.out {
        Some(path) => write(path, &dot),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}
