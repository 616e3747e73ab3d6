//! Composite region-quality reward.
//!
//! `total = α·r_rel + β·min(r_cov, 1) + γ·r_con`, where
//!
//! * `r_rel` is the interaction-weighted mean relevance of the elements in the
//!   region (non-interactive elements count with weight `λ`),
//! * `r_cov` is the fraction of the region covered by element boxes, each box
//!   first intersected with the region,
//! * `r_con` is one minus the normalized entropy of the temperature softmax
//!   over the element scores.

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::geometry::Rect;
use crate::perceptor::{ScoredElement, ScoredScene, UiElement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_noninteractive: f64,
    pub tau: f64,
    pub epsilon: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { alpha: 0.4, beta: 0.4, gamma: 0.2, lambda_noninteractive: 0.5, tau: 0.1, epsilon: 1e-8 }
    }
}

/// Which reward terms participate in the total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardTerms {
    pub relevance: bool,
    pub coverage: bool,
    pub concentration: bool,
}

impl Default for RewardTerms {
    fn default() -> Self {
        Self { relevance: true, coverage: true, concentration: true }
    }
}

impl RewardTerms {
    pub fn none_enabled(&self) -> bool {
        !(self.relevance || self.coverage || self.concentration)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.relevance {
            parts.push("rel");
        }
        if self.coverage {
            parts.push("cov");
        }
        if self.concentration {
            parts.push("con");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::new(field, format!("must be non-negative, got {v}")));
            }
        }
        let sum = self.alpha + self.beta + self.gamma;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::new("alpha+beta+gamma", format!("weights must sum to 1, got {sum}")));
        }
        if !(self.lambda_noninteractive > 0.0 && self.lambda_noninteractive < 1.0) {
            return Err(ConfigError::new(
                "lambda_noninteractive",
                format!("must be in (0, 1), got {}", self.lambda_noninteractive),
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(ConfigError::new("tau", format!("must be positive, got {}", self.tau)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(ConfigError::new("epsilon", format!("must be non-negative, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Zeroes the disabled terms and rescales the rest back onto the simplex.
    pub fn with_terms(&self, terms: RewardTerms) -> Result<RewardWeights, ConfigError> {
        let alpha = if terms.relevance { self.alpha } else { 0.0 };
        let beta = if terms.coverage { self.beta } else { 0.0 };
        let gamma = if terms.concentration { self.gamma } else { 0.0 };
        let sum = alpha + beta + gamma;
        if sum <= 0.0 {
            return Err(ConfigError::new("reward_terms", "at least one enabled reward term needs a positive weight"));
        }
        Ok(RewardWeights { alpha: alpha / sum, beta: beta / sum, gamma: gamma / sum, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_rel: f64,
    /// Region-intersected coverage; may exceed 1 when boxes overlap.
    pub r_cov: f64,
    /// Coverage from unclipped box areas, for diagnostics only.
    pub r_cov_unclipped: f64,
    pub r_con: f64,
    pub total: f64,
    pub element_count: usize,
}

impl RewardBreakdown {
    pub fn empty() -> Self {
        Self { r_rel: 0.0, r_cov: 0.0, r_cov_unclipped: 0.0, r_con: 0.0, total: 0.0, element_count: 0 }
    }
}

/// `Σ wᵢ·sᵢ / (Σ wᵢ + ε)` with `wᵢ = 1` for interactive elements, `λ` otherwise.
pub fn relevance_reward(elements: &[ScoredElement<'_>], weights: &RewardWeights) -> f64 {
    if elements.is_empty() {
        return 0.0;
    }
    let (num, den) = elements.iter().fold((0.0, 0.0), |(num, den), e| {
        let w = if e.element.interactive { 1.0 } else { weights.lambda_noninteractive };
        (num + w * e.score, den + w)
    });
    num / (den + weights.epsilon)
}

/// Visible element area over region area.
pub fn coverage_reward<'a, I>(elements: I, region: &Rect) -> f64
where
    I: IntoIterator<Item = &'a UiElement>,
{
    let covered: f64 = elements.into_iter().map(|e| e.bbox.intersection_area(region)).sum();
    covered / region.area()
}

fn coverage_unclipped<'a, I>(elements: I, region: &Rect) -> f64
where
    I: IntoIterator<Item = &'a UiElement>,
{
    elements.into_iter().map(|e| e.bbox.area()).sum::<f64>() / region.area()
}

/// `1 − H(softmax(s/τ)) / ln(N + ε)`; 1 for a single element, 0 for none.
pub fn concentration_reward(scores: &[f64], weights: &RewardWeights) -> f64 {
    match scores.len() {
        0 => 0.0,
        1 => 1.0,
        n => {
            let logits: Vec<f64> = scores.iter().map(|s| s / weights.tau).collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let entropy: f64 = exps.iter().map(|e| e / z).filter(|p| *p > 0.0).map(|p| -p * p.ln()).sum();
            (1.0 - entropy / (n as f64 + weights.epsilon).ln()).clamp(0.0, 1.0)
        }
    }
}

/// Weighted total with coverage clamped to 1.
pub fn combine(weights: &RewardWeights, r_rel: f64, r_cov: f64, r_con: f64) -> f64 {
    (weights.alpha * r_rel + weights.beta * r_cov.min(1.0) + weights.gamma * r_con).clamp(0.0, 1.0)
}

/// Reward for `region` given the elements already gathered for it.
pub fn evaluate_elements(region: &Rect, elements: &[ScoredElement<'_>], weights: &RewardWeights) -> RewardBreakdown {
    if elements.is_empty() {
        return RewardBreakdown::empty();
    }
    let r_rel = relevance_reward(elements, weights);
    let r_cov = coverage_reward(elements.iter().map(|e| e.element), region);
    let r_cov_unclipped = coverage_unclipped(elements.iter().map(|e| e.element), region);
    let scores: Vec<f64> = elements.iter().map(|e| e.score).collect();
    let r_con = concentration_reward(&scores, weights);
    RewardBreakdown {
        r_rel,
        r_cov,
        r_cov_unclipped,
        r_con,
        total: combine(weights, r_rel, r_cov, r_con),
        element_count: elements.len(),
    }
}

pub fn evaluate(region: &Rect, scored: &ScoredScene, weights: &RewardWeights) -> RewardBreakdown {
    evaluate_elements(region, &scored.elements_in_region(region), weights)
}
