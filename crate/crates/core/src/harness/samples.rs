//! Annotation files: one JSON array of samples, each a scene plus an
//! instruction and its ground-truth box.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::Rect;
use crate::perceptor::{Scene, UiElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Text,
    Icon,
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Text => "text",
            DataType::Icon => "icon",
        })
    }
}

/// On-disk form of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub domain_tag: String,
    pub instruction: String,
    pub gt_box: Rect,
    pub data_type: DataType,
    pub group: String,
    pub elements: Vec<UiElement>,
}

/// Validated sample. `id` is the position in the source file.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub scene: Scene,
    pub instruction: String,
    pub gt_box: Rect,
    pub data_type: DataType,
    pub group: String,
}

impl Sample {
    pub fn from_record(id: usize, record: SampleRecord) -> Result<Self, HarnessError> {
        let invalid = |message: String| HarnessError::InvalidSample { id, message };
        if record.instruction.trim().is_empty() {
            return Err(invalid("instruction is empty".into()));
        }
        let scene = Scene::new(record.image, record.width, record.height, record.domain_tag, record.elements)
            .map_err(|e| invalid(e.to_string()))?;
        if !scene.bounds().contains_rect(&record.gt_box) {
            return Err(invalid(format!(
                "gt_box {:?} exceeds the {}x{} image",
                record.gt_box.to_array(),
                record.width,
                record.height
            )));
        }
        Ok(Self {
            id,
            scene,
            instruction: record.instruction,
            gt_box: record.gt_box,
            data_type: record.data_type,
            group: record.group,
        })
    }

    pub fn to_record(&self) -> SampleRecord {
        SampleRecord {
            image: self.scene.image_ref().to_string(),
            width: self.scene.width(),
            height: self.scene.height(),
            domain_tag: self.scene.domain_tag().to_string(),
            instruction: self.instruction.clone(),
            gt_box: self.gt_box,
            data_type: self.data_type,
            group: self.group.clone(),
            elements: self.scene.elements().to_vec(),
        }
    }
}

/// Record layout of the input file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SampleSchema {
    #[default]
    Native,
    /// Benchmark-style records (`img_filename`, `bbox`, `img_size`,
    /// `ui_type`, `group`) that additionally carry a parsed `elements` list.
    ScreenSpot,
}

#[derive(Debug, Deserialize)]
struct ScreenSpotRecord {
    img_filename: String,
    instruction: String,
    bbox: [f64; 4],
    img_size: [u32; 2],
    ui_type: DataType,
    #[serde(default)]
    group: Option<String>,
    #[serde(default)]
    platform: Option<String>,
    #[serde(default)]
    elements: Vec<UiElement>,
}

impl ScreenSpotRecord {
    fn into_native(self, id: usize) -> Result<SampleRecord, HarnessError> {
        if self.elements.is_empty() {
            return Err(HarnessError::InvalidSample { id, message: "record has no parsed element list".into() });
        }
        let [x0, y0, x1, y1] = self.bbox;
        let gt_box =
            Rect::new(x0, y0, x1, y1).map_err(|e| HarnessError::InvalidSample { id, message: format!("bbox: {e}") })?;
        let group = self.group.unwrap_or_else(|| "default".into());
        Ok(SampleRecord {
            image: self.img_filename,
            width: self.img_size[0],
            height: self.img_size[1],
            domain_tag: self.platform.unwrap_or_else(|| group.clone()),
            instruction: self.instruction,
            gt_box,
            data_type: self.ui_type,
            group,
            elements: self.elements,
        })
    }
}

/// Parses and validates every record of a JSON array, in file order.
pub fn parse_samples(text: &str, schema: SampleSchema) -> Result<Vec<Sample>, HarnessError> {
    let values: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    values
        .into_iter()
        .enumerate()
        .map(|(id, value)| {
            let bad = |e: serde_json::Error| HarnessError::InvalidSample { id, message: e.to_string() };
            let record = match schema {
                SampleSchema::Native => serde_json::from_value(value).map_err(bad)?,
                SampleSchema::ScreenSpot => {
                    serde_json::from_value::<ScreenSpotRecord>(value).map_err(bad)?.into_native(id)?
                }
            };
            Sample::from_record(id, record)
        })
        .collect()
}

pub fn load_samples(path: impl AsRef<Path>, schema: SampleSchema) -> Result<Vec<Sample>, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_samples(&text, schema).map_err(|e| e.in_file(path))
}

/// Pretty JSON with a trailing newline.
pub fn samples_to_json(samples: &[Sample]) -> String {
    let records: Vec<SampleRecord> = samples.iter().map(Sample::to_record).collect();
    let mut out = serde_json::to_string_pretty(&records).expect("records serialize");
    out.push('\n');
    out
}
