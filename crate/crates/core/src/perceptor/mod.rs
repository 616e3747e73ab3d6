//! UI element model and instruction-conditioned relevance scoring.
//!
//! A [`Scene`] is a pre-parsed screenshot: a list of [`UiElement`]s with boxes,
//! text descriptions and interactivity flags. [`score_scene`] embeds the
//! instruction and every element description under a shared domain prefix and
//! assigns each element a relevance score in `[0, 1]`. The resulting
//! [`ScoredScene`] is immutable and is what the region actions, the reward and
//! the planner consume.

mod providers;
mod template;

pub use providers::{
    write_embedding_file, FileEmbeddings, HashingEmbedder, ProviderError, RelevanceProvider, RemoteEmbedder,
};
pub use template::{build_prefixed_text, PrefixTemplate, TemplateError, DEFAULT_TEMPLATE};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Rect};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("image size must be positive, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("element ids must be dense and ordered: position {position} has id {id}")]
    NonDenseIds { position: usize, id: usize },
    #[error("element {id} box {bbox:?} lies outside the {width}x{height} image")]
    OutOfBounds { id: usize, bbox: [f64; 4], width: u32, height: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error)]
pub enum PerceptorError {
    #[error("instruction text is empty")]
    EmptyInstruction,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("relevance provider failed for {}: {source}", describe_target(*.element))]
    Provider {
        element: Option<usize>,
        #[source]
        source: ProviderError,
    },
}

fn describe_target(element: Option<usize>) -> String {
    match element {
        Some(id) => format!("element {id}"),
        None => "the instruction".to_string(),
    }
}

/// One parsed interface element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiElement {
    pub id: usize,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub description: String,
    pub interactive: bool,
}

/// A screenshot's element set plus image metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    image_ref: String,
    width: u32,
    height: u32,
    domain_tag: String,
    elements: Vec<UiElement>,
}

impl Scene {
    pub fn new(
        image_ref: impl Into<String>,
        width: u32,
        height: u32,
        domain_tag: impl Into<String>,
        elements: Vec<UiElement>,
    ) -> Result<Self, SceneError> {
        if width == 0 || height == 0 {
            return Err(SceneError::EmptyImage { width, height });
        }
        let bounds = Rect::from_size(width as f64, height as f64)?;
        for (position, element) in elements.iter().enumerate() {
            if element.id != position {
                return Err(SceneError::NonDenseIds { position, id: element.id });
            }
            if !bounds.contains_rect(&element.bbox) {
                return Err(SceneError::OutOfBounds { id: element.id, bbox: element.bbox.to_array(), width, height });
            }
        }
        Ok(Self { image_ref: image_ref.into(), width, height, domain_tag: domain_tag.into(), elements })
    }

    pub fn image_ref(&self) -> &str {
        &self.image_ref
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn domain_tag(&self) -> &str {
        &self.domain_tag
    }

    pub fn elements(&self) -> &[UiElement] {
        &self.elements
    }

    /// The full-image rectangle.
    pub fn bounds(&self) -> Rect {
        Rect::from_size(self.width as f64, self.height as f64).expect("scene dimensions validated at construction")
    }

    /// Number of elements whose box center lies inside `region`.
    pub fn count_in(&self, region: &Rect) -> usize {
        self.elements.iter().filter(|e| region.contains(e.bbox.center())).count()
    }
}

/// A natural-language instruction and its prefixed form used for embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub prefixed_text: String,
}

impl Instruction {
    pub fn new(text: impl Into<String>, domain_tag: &str, template: &PrefixTemplate) -> Result<Self, PerceptorError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(PerceptorError::EmptyInstruction);
        }
        let prefixed_text = template.render(domain_tag, &text);
        Ok(Self { text, prefixed_text })
    }
}

/// A finite, non-zero embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, PerceptorError> {
        if values.is_empty() {
            return Err(PerceptorError::InvalidEmbedding("zero-length vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PerceptorError::InvalidEmbedding(format!("non-finite value at position {i}")));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(PerceptorError::InvalidEmbedding("all-zero vector".into()));
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = PerceptorError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Cosine similarity in `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, PerceptorError> {
    if a.dimension() != b.dimension() {
        return Err(PerceptorError::DimensionMismatch { left: a.dimension(), right: b.dimension() });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(PerceptorError::InvalidEmbedding("zero-norm vector".into()));
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): exact 1.0 for a == b.
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// An element paired with its relevance score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredElement<'a> {
    pub element: &'a UiElement,
    pub score: f64,
}

/// Descending score, ascending id on ties.
pub(crate) fn by_score_then_id(a: &ScoredElement<'_>, b: &ScoredElement<'_>) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.element.id.cmp(&b.element.id))
}

/// A scene with one cached relevance score per element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredScene {
    scene: Scene,
    instruction: Instruction,
    scores: Vec<f64>,
    /// Unclamped cosines; `None` for elements without a description.
    raw_cosines: Vec<Option<f64>>,
}

impl ScoredScene {
    /// Builds a scored scene from externally computed raw similarities.
    /// Scores are clamped to `[0, 1]`; `None` entries score 0.
    pub fn from_raw(scene: Scene, instruction: Instruction, raw_cosines: Vec<Option<f64>>) -> Self {
        assert_eq!(raw_cosines.len(), scene.elements.len(), "one raw score per element");
        let scores = raw_cosines.iter().map(|raw| clamp_score(*raw)).collect();
        Self { scene, instruction, scores, raw_cosines }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn instruction(&self) -> &Instruction {
        &self.instruction
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn bounds(&self) -> Rect {
        self.scene.bounds()
    }

    pub fn score(&self, id: usize) -> f64 {
        self.scores[id]
    }

    fn collect_sorted<F>(&self, keep: F, rescore: bool) -> Vec<ScoredElement<'_>>
    where
        F: Fn(&UiElement) -> bool,
    {
        let mut out: Vec<_> = self
            .scene
            .elements
            .iter()
            .filter(|e| keep(e))
            .map(|element| ScoredElement {
                element,
                score: if rescore { clamp_score(self.raw_cosines[element.id]) } else { self.scores[element.id] },
            })
            .collect();
        out.sort_by(by_score_then_id);
        out
    }

    /// Elements whose box center lies inside `region`, best first.
    pub fn elements_in_region(&self, region: &Rect) -> Vec<ScoredElement<'_>> {
        self.collect_sorted(|e| region.contains(e.bbox.center()), false)
    }

    /// Elements whose box center lies outside `region`, best first.
    pub fn elements_outside(&self, region: &Rect) -> Vec<ScoredElement<'_>> {
        self.collect_sorted(|e| !region.contains(e.bbox.center()), false)
    }

    /// Same membership as [`elements_in_region`](Self::elements_in_region),
    /// but re-derives each score from the cached raw cosine.
    pub fn rescored_in_region(&self, region: &Rect) -> Vec<ScoredElement<'_>> {
        self.collect_sorted(|e| region.contains(e.bbox.center()), true)
    }
}

fn clamp_score(raw: Option<f64>) -> f64 {
    raw.map_or(0.0, |c| c.clamp(0.0, 1.0))
}

/// Embeds the instruction and every non-empty description once and scores
/// each element by clamped cosine similarity.
pub fn score_scene(
    scene: &Scene,
    instruction: &Instruction,
    template: &PrefixTemplate,
    provider: &dyn RelevanceProvider,
) -> Result<ScoredScene, PerceptorError> {
    let described: Vec<&UiElement> = scene.elements.iter().filter(|e| !e.description.trim().is_empty()).collect();

    let mut texts = Vec::with_capacity(described.len() + 1);
    texts.push(instruction.prefixed_text.clone());
    texts.extend(described.iter().map(|e| template.render(&scene.domain_tag, &e.description)));

    let element_at = |index: usize| index.checked_sub(1).map(|i| described[i].id);
    let embeddings = provider
        .embed(&texts)
        .map_err(|source| PerceptorError::Provider { element: source.text_index().and_then(element_at), source })?;
    if embeddings.len() != texts.len() {
        return Err(PerceptorError::Provider {
            element: None,
            source: ProviderError::Count { expected: texts.len(), found: embeddings.len() },
        });
    }

    let query = &embeddings[0];
    let mut raw = vec![None; scene.elements.len()];
    for (element, embedding) in described.iter().zip(&embeddings[1..]) {
        let c = cosine(query, embedding).map_err(|e| PerceptorError::Provider {
            element: Some(element.id),
            source: ProviderError::Invalid(e.to_string()),
        })?;
        raw[element.id] = Some(c);
    }
    Ok(ScoredScene::from_raw(scene.clone(), instruction.clone(), raw))
}
