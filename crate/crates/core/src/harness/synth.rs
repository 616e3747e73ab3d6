//! Seeded synthetic scenes: a jittered grid of labelled elements with one
//! target per scene.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{samples_to_json, DataType, HarnessError, Sample};
use crate::geometry::Rect;
use crate::perceptor::{cosine, write_embedding_file, HashingEmbedder, PrefixTemplate, Scene, UiElement};

const VERBS: &[&str] = &[
    "open", "close", "save", "delete", "search", "share", "edit", "print", "export", "import", "refresh", "download",
    "upload", "select", "copy", "paste", "undo", "redo", "rename", "filter", "sort", "zoom", "play", "pause", "send",
    "add", "remove", "toggle", "expand", "collapse",
];

const NOUNS: &[&str] = &[
    "file",
    "folder",
    "settings",
    "menu",
    "profile",
    "tab",
    "window",
    "image",
    "document",
    "project",
    "layer",
    "brush",
    "timeline",
    "chart",
    "table",
    "message",
    "contact",
    "calendar",
    "account",
    "password",
    "bookmark",
    "history",
    "toolbar",
    "panel",
    "palette",
    "terminal",
    "console",
    "notification",
    "cart",
    "playlist",
];

const GROUPS: &[&str] = &["desktop", "mobile", "web"];

/// Attempts per distractor before an easy-profile margin is declared
/// unreachable.
const MAX_RESAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Target description equals the instruction; distractors share no word
    /// with it.
    Easy,
    /// Target shares only the noun with the instruction; distractors may
    /// share either word.
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub scenes: usize,
    pub min_elements: usize,
    pub max_elements: usize,
    pub width: u32,
    pub height: u32,
    pub grid_cols: u32,
    pub grid_rows: u32,
    pub interactive_fraction: f64,
    pub icon_fraction: f64,
    pub profile: Profile,
    /// Easy profile: required lead of the target's mock score over every
    /// distractor.
    pub margin: f64,
    pub mock_dimension: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            scenes: 200,
            min_elements: 8,
            max_elements: 20,
            width: 1920,
            height: 1080,
            grid_cols: 8,
            grid_rows: 6,
            interactive_fraction: 0.7,
            icon_fraction: 0.5,
            profile: Profile::Easy,
            margin: 0.1,
            mock_dimension: HashingEmbedder::DEFAULT_DIMENSION,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let cells = self.grid_cols as usize * self.grid_rows as usize;
        let fail = |m: String| Err(HarnessError::Generator(m));
        if self.min_elements == 0 || self.min_elements > self.max_elements {
            return fail(format!(
                "element range {}..={} is empty or starts at zero",
                self.min_elements, self.max_elements
            ));
        }
        if self.max_elements > cells {
            return fail(format!(
                "{} elements do not fit a {}x{} grid of {cells} cells",
                self.max_elements, self.grid_cols, self.grid_rows
            ));
        }
        if self.width < 4 * self.grid_cols || self.height < 4 * self.grid_rows {
            return fail(format!(
                "{}x{} image is too small for a {}x{} grid",
                self.width, self.height, self.grid_cols, self.grid_rows
            ));
        }
        for (name, v) in [("interactive_fraction", self.interactive_fraction), ("icon_fraction", self.icon_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1]"));
            }
        }
        if self.mock_dimension == 0 {
            return fail("mock_dimension must be positive".into());
        }
        Ok(())
    }
}

/// Generated samples plus the embedding map that reproduces the mock
/// provider's vectors through the file-backed provider.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub samples: Vec<Sample>,
    pub embeddings: BTreeMap<String, Vec<f64>>,
}

impl SyntheticCorpus {
    pub const SAMPLES_FILE: &'static str = "samples.json";
    pub const EMBEDDINGS_FILE: &'static str = "embeddings.json";

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
        let dir = dir.as_ref();
        let io = |path: &Path, e: std::io::Error| HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let samples = dir.join(Self::SAMPLES_FILE);
        std::fs::write(&samples, samples_to_json(&self.samples)).map_err(|e| io(&samples, e))?;
        let embeddings = dir.join(Self::EMBEDDINGS_FILE);
        write_embedding_file(&embeddings, &self.embeddings).map_err(|e| io(&embeddings, e))
    }
}

fn scene_rng(seed: u64, scene: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(scene as u64).to_le_bytes());
    key[16] = 0x5c;
    ChaCha8Rng::from_seed(key)
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str], avoid: &[&str]) -> &'a str {
    loop {
        let w = words[rng.random_range(0..words.len())];
        if !avoid.contains(&w) {
            return w;
        }
    }
}

struct Labeller<'a> {
    template: &'a PrefixTemplate,
    embedder: HashingEmbedder,
    domain: &'a str,
}

impl Labeller<'_> {
    fn score(&self, instruction: &str, description: &str) -> f64 {
        let q = self.embedder.embed_text(&self.template.render(self.domain, instruction));
        let d = self.embedder.embed_text(&self.template.render(self.domain, description));
        cosine(&q, &d).expect("equal dimensions").clamp(0.0, 1.0)
    }
}

fn layout(spec: &GeneratorSpec, rng: &mut ChaCha8Rng, count: usize) -> Vec<Rect> {
    let cells = (spec.grid_cols * spec.grid_rows) as usize;
    let mut chosen = index::sample(rng, cells, count).into_vec();
    chosen.sort_unstable();
    let cw = spec.width as f64 / spec.grid_cols as f64;
    let ch = spec.height as f64 / spec.grid_rows as f64;
    chosen
        .into_iter()
        .map(|cell| {
            let (col, row) = ((cell % spec.grid_cols as usize) as f64, (cell / spec.grid_cols as usize) as f64);
            let w = (cw * rng.random_range(0.35..0.8)).round().max(2.0);
            let h = (ch * rng.random_range(0.25..0.55)).round().max(2.0);
            let x0 = (col * cw + rng.random_range(0.0..=(cw - w).max(0.0))).floor();
            let y0 = (row * ch + rng.random_range(0.0..=(ch - h).max(0.0))).floor();
            Rect::new(x0, y0, x0 + w, y0 + h).expect("positive size")
        })
        .collect()
}

fn generate_scene(
    spec: &GeneratorSpec,
    seed: u64,
    id: usize,
    template: &PrefixTemplate,
) -> Result<Sample, HarnessError> {
    let mut rng = scene_rng(seed, id);
    let group = GROUPS[rng.random_range(0..GROUPS.len())];
    let data_type = if rng.random_bool(spec.icon_fraction) { DataType::Icon } else { DataType::Text };
    let count = rng.random_range(spec.min_elements..=spec.max_elements);
    let boxes = layout(spec, &mut rng, count);
    let target = rng.random_range(0..count);

    let verb = pick(&mut rng, VERBS, &[]);
    let noun = pick(&mut rng, NOUNS, &[]);
    let instruction = format!("{verb} {noun}");
    let labeller = Labeller { template, embedder: HashingEmbedder::new(spec.mock_dimension), domain: group };

    let mut elements = Vec::with_capacity(count);
    for (i, bbox) in boxes.into_iter().enumerate() {
        let interactive = i == target || rng.random_bool(spec.interactive_fraction);
        let description = if i == target {
            match spec.profile {
                Profile::Easy => instruction.clone(),
                Profile::Hard => format!("{} {noun}", pick(&mut rng, VERBS, &[verb])),
            }
        } else {
            distractor(spec, &mut rng, &labeller, &instruction, verb, noun)
                .ok_or_else(|| HarnessError::Generator(format!("scene {id}: margin {} unreachable", spec.margin)))?
        };
        elements.push(UiElement { id: i, bbox, description, interactive });
    }

    let gt_box = elements[target].bbox;
    let scene = Scene::new(format!("synthetic/{id:05}.png"), spec.width, spec.height, group, elements)
        .map_err(|e| HarnessError::Generator(format!("scene {id}: {e}")))?;
    Ok(Sample { id, scene, instruction, gt_box, data_type, group: group.to_string() })
}

fn distractor(
    spec: &GeneratorSpec,
    rng: &mut ChaCha8Rng,
    labeller: &Labeller<'_>,
    instruction: &str,
    verb: &str,
    noun: &str,
) -> Option<String> {
    match spec.profile {
        Profile::Easy => (0..MAX_RESAMPLES).find_map(|_| {
            let d = format!("{} {}", pick(rng, VERBS, &[verb]), pick(rng, NOUNS, &[noun]));
            (1.0 - labeller.score(instruction, &d) >= spec.margin).then_some(d)
        }),
        Profile::Hard => Some(match rng.random_range(0..3) {
            0 => format!("{verb} {}", pick(rng, NOUNS, &[noun])),
            1 => format!("{} {noun}", pick(rng, VERBS, &[verb])),
            _ => format!("{} {}", pick(rng, VERBS, &[verb]), pick(rng, NOUNS, &[noun])),
        }),
    }
}

/// Deterministic in `(spec, seed, template)`.
pub fn generate_synthetic(
    spec: &GeneratorSpec,
    seed: u64,
    template: &PrefixTemplate,
) -> Result<SyntheticCorpus, HarnessError> {
    spec.validate()?;
    let samples = (0..spec.scenes).map(|id| generate_scene(spec, seed, id, template)).collect::<Result<Vec<_>, _>>()?;
    let embedder = HashingEmbedder::new(spec.mock_dimension);
    let mut embeddings = BTreeMap::new();
    for sample in &samples {
        let domain = sample.scene.domain_tag();
        let texts = std::iter::once(sample.instruction.as_str())
            .chain(sample.scene.elements().iter().map(|e| e.description.as_str()));
        for text in texts {
            let key = template.render(domain, text);
            if let Entry::Vacant(slot) = embeddings.entry(key) {
                let v = embedder.embed_text(slot.key()).values().to_vec();
                slot.insert(v);
            }
        }
    }
    Ok(SyntheticCorpus { samples, embeddings })
}
