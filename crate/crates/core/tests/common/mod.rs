#![allow(dead_code)]

use proptest::prelude::*;
use region_search::geometry::Rect;
use region_search::perceptor::{Instruction, PrefixTemplate, Scene, ScoredScene, UiElement};

pub const WIDTH: u32 = 1920;
pub const HEIGHT: u32 = 1080;

#[derive(Debug, Clone)]
pub struct RawElement {
    pub bbox: [f64; 4],
    pub score: f64,
    pub interactive: bool,
}

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
    Rect::new(x0, y0, x1, y1).unwrap()
}

pub fn scored_scene(raw: &[RawElement]) -> ScoredScene {
    let elements = raw
        .iter()
        .enumerate()
        .map(|(id, r)| UiElement {
            id,
            bbox: rect(r.bbox[0], r.bbox[1], r.bbox[2], r.bbox[3]),
            description: format!("element {id}"),
            interactive: r.interactive,
        })
        .collect();
    let scene = Scene::new("fixture.png", WIDTH, HEIGHT, "test", elements).unwrap();
    let instruction = Instruction::new("target", "test", &PrefixTemplate::default()).unwrap();
    ScoredScene::from_raw(scene, instruction, raw.iter().map(|r| Some(r.score)).collect())
}

pub fn raw_element() -> impl Strategy<Value = RawElement> {
    (0.0..1800.0f64, 0.0..1000.0f64, 8.0..320.0f64, 8.0..160.0f64, 0.0..=1.0f64, any::<bool>()).prop_map(
        |(x, y, w, h, score, interactive)| {
            let x1 = (x + w).min(WIDTH as f64);
            let y1 = (y + h).min(HEIGHT as f64);
            RawElement {
                bbox: [x.floor(), y.floor(), x1.ceil().min(WIDTH as f64), y1.ceil().min(HEIGHT as f64)],
                score,
                interactive,
            }
        },
    )
}

pub fn scene_strategy(max: usize) -> impl Strategy<Value = ScoredScene> {
    prop::collection::vec(raw_element(), 1..=max).prop_map(|raw| scored_scene(&raw))
}

/// A region inside the image, snapped to whole pixels.
pub fn region_strategy() -> impl Strategy<Value = Rect> {
    (0.0..1900.0f64, 0.0..1060.0f64, 10.0..1920.0f64, 10.0..1080.0f64).prop_map(|(x, y, w, h)| {
        let x0 = x.floor();
        let y0 = y.floor();
        rect(
            x0,
            y0,
            (x0 + w.floor()).min(WIDTH as f64).max(x0 + 1.0),
            (y0 + h.floor()).min(HEIGHT as f64).max(y0 + 1.0),
        )
    })
}
