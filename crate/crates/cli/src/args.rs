use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use region_search::config::{Config, ProviderKind};
use region_search::harness::{GrounderKind, Profile};
use region_search::perceptor::PrefixTemplate;
use region_search::planner::ActionSet;

#[derive(Debug, Parser)]
#[command(name = "region-search", version, about = "Region search for GUI grounding")]
pub struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the fully resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search one scene for the best region.
    Search(SearchArgs),
    /// Evaluate a sample file end to end.
    Bench(BenchArgs),
    /// Write a seeded synthetic corpus.
    Gen(GenArgs),
    /// Render a saved trace as Graphviz DOT.
    ExportDot(ExportDotArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Scene JSON: one sample object or an array of them.
    #[arg(long, value_name = "FILE")]
    pub scene: PathBuf,
    /// Which entry of an array to use.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    /// Instruction text; required unless the scene file carries one.
    #[arg(long)]
    pub instruction: Option<String>,
    /// Write the full trace as JSON.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Write the search tree as DOT.
    #[arg(long, value_name = "FILE")]
    pub dot: Option<PathBuf>,
    /// Print the result as JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemaArg {
    Native,
    Screenspot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Full,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LatticeArg {
    Actions,
    Rewards,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    pub samples: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemaArg::Native)]
    pub schema: SchemaArg,
    /// Run a comparison policy instead of the search.
    #[arg(long, value_enum, conflicts_with = "lattice")]
    pub baseline: Option<BaselineArg>,
    /// Run the four-row action or reward-term ablation.
    #[arg(long, value_enum)]
    pub lattice: Option<LatticeArg>,
    /// Directory for report JSON and text files.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Keep full search traces in the JSON report.
    #[arg(long)]
    pub traces: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Easy,
    Hard,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Easy => Profile::Easy,
            ProfileArg::Hard => Profile::Hard,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub scenes: Option<usize>,
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    #[arg(long)]
    pub min_elements: Option<usize>,
    #[arg(long)]
    pub max_elements: Option<usize>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub grid_cols: Option<u32>,
    #[arg(long)]
    pub grid_rows: Option<u32>,
    #[arg(long)]
    pub interactive_fraction: Option<f64>,
    #[arg(long)]
    pub icon_fraction: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExportDotArgs {
    /// Trace JSON written by `search --trace`.
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Mock,
    File,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GrounderArg {
    Scripted,
    Remote,
}

/// Flags that override single configuration fields.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// search.rollout_budget
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// search.max_depth
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// search.uct_c
    #[arg(long, global = true)]
    pub uct_c: Option<f64>,
    /// search.exhaustive
    #[arg(long, global = true)]
    pub exhaustive: bool,
    /// search.rescore_per_region
    #[arg(long, global = true)]
    pub rescore: bool,
    /// search.seeded_tiebreak
    #[arg(long, global = true)]
    pub tiebreak_seed: Option<u64>,
    /// search.actions, e.g. `focus,shift`, `all` or `none`
    #[arg(long, global = true, value_parser = ActionSet::parse)]
    pub actions: Option<ActionSet>,
    /// search.reward_terms.relevance = false
    #[arg(long, global = true)]
    pub no_rel: bool,
    /// search.reward_terms.coverage = false
    #[arg(long, global = true)]
    pub no_cov: bool,
    /// search.reward_terms.concentration = false
    #[arg(long, global = true)]
    pub no_con: bool,
    /// search.reward_weights.alpha
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// search.reward_weights.beta
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// search.reward_weights.gamma
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// search.reward_weights.lambda_noninteractive
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// search.reward_weights.tau
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// search.action_params.focus_top_fraction
    #[arg(long, global = true)]
    pub focus_top: Option<f64>,
    /// search.action_params.focus_shrink_ratio
    #[arg(long, global = true)]
    pub focus_shrink: Option<f64>,
    /// search.action_params.focus_outlier_k
    #[arg(long, global = true)]
    pub outlier_k: Option<f64>,
    /// search.action_params.scatter_top_fraction
    #[arg(long, global = true)]
    pub scatter_top: Option<f64>,
    /// search.action_params.scatter_max_expand
    #[arg(long, global = true)]
    pub scatter_cap: Option<f64>,
    /// search.action_params.shift_top_fraction
    #[arg(long, global = true)]
    pub shift_top: Option<f64>,
    /// search.action_params.shift_max_iou
    #[arg(long, global = true)]
    pub shift_max_iou: Option<f64>,
    /// search.action_params.padding_px
    #[arg(long, global = true)]
    pub padding: Option<f64>,
    /// template, with `{domain}` and `{text}` placeholders
    #[arg(long, global = true, value_parser = parse_template)]
    pub template: Option<PrefixTemplate>,
    /// provider.kind
    #[arg(long, global = true, value_enum)]
    pub provider: Option<ProviderArg>,
    /// provider.embeddings_file
    #[arg(long, global = true, value_name = "FILE")]
    pub embeddings: Option<String>,
    /// provider.endpoint
    #[arg(long, global = true, value_name = "URL")]
    pub embedder_url: Option<String>,
    /// provider.mock_dimension
    #[arg(long, global = true)]
    pub mock_dimension: Option<usize>,
    /// grounder.kind
    #[arg(long, global = true, value_enum)]
    pub grounder: Option<GrounderArg>,
    /// grounder.endpoint
    #[arg(long, global = true, value_name = "URL")]
    pub grounder_url: Option<String>,
    /// grounder.base_success
    #[arg(long, global = true)]
    pub base_success: Option<f64>,
    /// grounder.clutter_penalty
    #[arg(long, global = true)]
    pub clutter_penalty: Option<f64>,
    /// grounder.resolution_penalty
    #[arg(long, global = true)]
    pub resolution_penalty: Option<f64>,
    /// grounder.seed
    #[arg(long, global = true)]
    pub grounder_seed: Option<u64>,
    /// parallelism
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
}

fn parse_template(s: &str) -> Result<PrefixTemplate, String> {
    PrefixTemplate::new(s).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Overrides {
    pub fn apply(&self, c: &mut Config) {
        let s = &mut c.search;
        set(&mut s.rollout_budget, self.budget);
        set(&mut s.max_depth, self.depth);
        set(&mut s.uct_c, self.uct_c);
        s.exhaustive |= self.exhaustive;
        s.rescore_per_region |= self.rescore;
        if self.tiebreak_seed.is_some() {
            s.seeded_tiebreak = self.tiebreak_seed;
        }
        set(&mut s.actions, self.actions);
        s.reward_terms.relevance &= !self.no_rel;
        s.reward_terms.coverage &= !self.no_cov;
        s.reward_terms.concentration &= !self.no_con;

        let w = &mut s.reward_weights;
        set(&mut w.alpha, self.alpha);
        set(&mut w.beta, self.beta);
        set(&mut w.gamma, self.gamma);
        set(&mut w.lambda_noninteractive, self.lambda);
        set(&mut w.tau, self.tau);

        let a = &mut s.action_params;
        set(&mut a.focus_top_fraction, self.focus_top);
        set(&mut a.focus_shrink_ratio, self.focus_shrink);
        set(&mut a.focus_outlier_k, self.outlier_k);
        set(&mut a.scatter_top_fraction, self.scatter_top);
        set(&mut a.scatter_max_expand, self.scatter_cap);
        set(&mut a.shift_top_fraction, self.shift_top);
        set(&mut a.shift_max_iou, self.shift_max_iou);
        set(&mut a.padding_px, self.padding);

        set(&mut c.template, self.template.clone());
        if let Some(p) = self.provider {
            c.provider.kind = match p {
                ProviderArg::Mock => ProviderKind::Mock,
                ProviderArg::File => ProviderKind::File,
                ProviderArg::Remote => ProviderKind::Remote,
            };
        }
        if self.embeddings.is_some() {
            c.provider.embeddings_file = self.embeddings.clone();
        }
        if self.embedder_url.is_some() {
            c.provider.endpoint = self.embedder_url.clone();
        }
        set(&mut c.provider.mock_dimension, self.mock_dimension);

        if let Some(g) = self.grounder {
            c.grounder.kind = match g {
                GrounderArg::Scripted => GrounderKind::Scripted,
                GrounderArg::Remote => GrounderKind::Remote,
            };
        }
        if self.grounder_url.is_some() {
            c.grounder.endpoint = self.grounder_url.clone();
        }
        set(&mut c.grounder.base_success, self.base_success);
        set(&mut c.grounder.clutter_penalty, self.clutter_penalty);
        set(&mut c.grounder.resolution_penalty, self.resolution_penalty);
        set(&mut c.grounder.seed, self.grounder_seed);
        set(&mut c.parallelism, self.parallelism);
    }
}
