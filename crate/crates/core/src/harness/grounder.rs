//! Grounders map (image, region, instruction) to a point in region-local
//! pixels.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Sample;
use crate::config::ConfigError;
use crate::geometry::{Point, Rect};

#[derive(Debug, Error)]
pub enum GrounderError {
    #[error("grounder at {endpoint}: {message}")]
    Remote { endpoint: String, message: String },
    #[error("grounder returned a non-finite point ({x}, {y})")]
    InvalidPoint { x: f64, y: f64 },
}

pub struct GroundingRequest<'a> {
    pub sample: &'a Sample,
    pub region: Rect,
}

pub trait Grounder: Send + Sync {
    /// Returns a point relative to `request.region`'s top-left corner.
    fn ground(&self, request: &GroundingRequest<'_>) -> Result<Point, GrounderError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrounderKind {
    Scripted,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrounderConfig {
    pub kind: GrounderKind,
    /// Success probability with an empty, zero-area region.
    pub base_success: f64,
    /// Probability lost per element whose center lies in the region.
    pub clutter_penalty: f64,
    /// Probability lost per megapixel of region area.
    pub resolution_penalty: f64,
    pub seed: u64,
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
}

impl Default for GrounderConfig {
    fn default() -> Self {
        Self {
            kind: GrounderKind::Scripted,
            base_success: 0.95,
            clutter_penalty: 0.01,
            resolution_penalty: 0.05,
            seed: 0,
            endpoint: None,
            timeout_ms: 30_000,
            retries: 1,
        }
    }
}

impl GrounderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.base_success) {
            return Err(ConfigError::new("base_success", "must lie in [0, 1]"));
        }
        for (field, value) in
            [("clutter_penalty", self.clutter_penalty), ("resolution_penalty", self.resolution_penalty)]
        {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ConfigError::new(field, "must be non-negative"));
            }
        }
        if self.kind == GrounderKind::Remote && self.endpoint.is_none() {
            return Err(ConfigError::new("endpoint", "required when kind is \"remote\" (or set GROUNDER_URL)"));
        }
        Ok(())
    }
}

/// Deterministic stand-in for a grounding model whose accuracy drops with the
/// number of elements and the pixel area it is shown.
///
/// One uniform draw per sample, keyed by `(seed, sample id)`, decides
/// success, so every policy evaluated on a sample faces the same draw.
#[derive(Debug, Clone)]
pub struct ScriptedGrounder {
    pub base_success: f64,
    pub clutter_penalty: f64,
    pub resolution_penalty: f64,
    pub seed: u64,
}

impl ScriptedGrounder {
    pub fn from_config(config: &GrounderConfig) -> Self {
        Self {
            base_success: config.base_success,
            clutter_penalty: config.clutter_penalty,
            resolution_penalty: config.resolution_penalty,
            seed: config.seed,
        }
    }

    pub fn success_probability(&self, element_count: usize, region: &Rect) -> f64 {
        let megapixels = region.area() / 1e6;
        (self.base_success - self.clutter_penalty * element_count as f64 - self.resolution_penalty * megapixels)
            .clamp(0.0, 1.0)
    }

    pub fn draw(&self, sample_id: usize) -> f64 {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(sample_id as u64).to_le_bytes());
        ChaCha8Rng::from_seed(key).random::<f64>()
    }

    /// First candidate outside the ground-truth box: distractor centers in
    /// the region by id, then the region's corners, then its center. Falls
    /// back to the center when the region lies inside the box.
    fn wrong_point(sample: &Sample, region: &Rect) -> Point {
        let corners = [
            Point::new(region.x0(), region.y0()),
            Point::new(region.x1(), region.y0()),
            Point::new(region.x0(), region.y1()),
            Point::new(region.x1(), region.y1()),
        ];
        sample
            .scene
            .elements()
            .iter()
            .map(|e| e.bbox.center())
            .filter(|c| region.contains(*c))
            .chain(corners)
            .chain([region.center()])
            .find(|p| !sample.gt_box.contains(*p))
            .unwrap_or_else(|| region.center())
    }
}

impl Grounder for ScriptedGrounder {
    fn ground(&self, request: &GroundingRequest<'_>) -> Result<Point, GrounderError> {
        let sample = request.sample;
        let region = request.region;
        let target = sample.gt_box.center();
        let p = self.success_probability(sample.scene.count_in(&region), &region);
        let global = if region.contains(target) && self.draw(sample.id) < p {
            target
        } else {
            Self::wrong_point(sample, &region)
        };
        Ok(region.to_local(global))
    }
}

#[derive(Serialize)]
struct GroundRequestBody<'a> {
    image: &'a str,
    region: [f64; 4],
    instruction: &'a str,
}

#[derive(Deserialize)]
struct GroundResponseBody {
    point: [f64; 2],
}

/// HTTP grounder: POSTs `{image, region, instruction}`, expects `{point}`.
pub struct RemoteGrounder {
    endpoint: String,
    retries: u32,
    agent: ureq::Agent,
}

impl RemoteGrounder {
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retries: u32) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { endpoint: endpoint.into(), retries, agent }
    }

    fn call(&self, body: &GroundRequestBody<'_>) -> Result<[f64; 2], String> {
        let response: GroundResponseBody = self
            .agent
            .post(&self.endpoint)
            .send_json(body)
            .map_err(|e| e.to_string())?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())?;
        Ok(response.point)
    }
}

impl Grounder for RemoteGrounder {
    fn ground(&self, request: &GroundingRequest<'_>) -> Result<Point, GrounderError> {
        let body = GroundRequestBody {
            image: request.sample.scene.image_ref(),
            region: request.region.to_array(),
            instruction: &request.sample.instruction,
        };
        let mut last = String::new();
        for _ in 0..=self.retries {
            match self.call(&body) {
                Ok([x, y]) if x.is_finite() && y.is_finite() => return Ok(Point::new(x, y)),
                Ok([x, y]) => return Err(GrounderError::InvalidPoint { x, y }),
                Err(e) => last = e,
            }
        }
        Err(GrounderError::Remote { endpoint: self.endpoint.clone(), message: last })
    }
}
