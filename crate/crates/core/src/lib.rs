//! Training-free region search for GUI grounding.
//!
//! Given a screenshot's parsed UI elements and an instruction, the planner
//! searches over crops of the screenshot with three actions (Focus, Shift,
//! Scatter) guided by a reward that prefers regions holding a few highly
//! relevant, interactive elements. The best region is handed to a grounding
//! model, whose point is mapped back to image coordinates.
//!
//! ```
//! use region_search::perceptor::{score_scene, HashingEmbedder, Instruction, PrefixTemplate, Scene, UiElement};
//! use region_search::geometry::Rect;
//! use region_search::planner::{run_search, SearchConfig};
//!
//! let elements = vec![
//!     UiElement { id: 0, bbox: Rect::new(40.0, 40.0, 160.0, 80.0)?, description: "save file".into(), interactive: true },
//!     UiElement { id: 1, bbox: Rect::new(700.0, 500.0, 820.0, 540.0)?, description: "open chart".into(), interactive: true },
//! ];
//! let scene = Scene::new("shot.png", 1024, 768, "desktop", elements)?;
//! let template = PrefixTemplate::default();
//! let instruction = Instruction::new("save file", "desktop", &template)?;
//! let scored = score_scene(&scene, &instruction, &template, &HashingEmbedder::new(256))?;
//! let result = run_search(&scored, &SearchConfig::default())?;
//! assert!(result.best_region.contains(scene.elements()[0].bbox.center()));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod actions;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod perceptor;
pub mod planner;
pub mod reward;

pub use actions::{ActionKind, ActionOutcome, ActionParams};
pub use config::{Config, ConfigError};
pub use geometry::{Point, Rect};
pub use planner::{run_search, SearchConfig, SearchResult};
pub use reward::{RewardBreakdown, RewardWeights};
