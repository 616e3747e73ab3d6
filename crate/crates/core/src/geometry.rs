//! Axis-aligned rectangle arithmetic in pixel space.
//!
//! Coordinates are `f64` with the origin at the top-left corner of the
//! screenshot. A [`Rect`] always has strictly positive width and height;
//! degenerate boxes are rejected when they are built, so every function in
//! this module can assume a valid input.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate rectangle [{x0}, {y0}, {x1}, {y1}]: need x0 < x1 and y0 < y1 with finite coordinates")]
    Degenerate { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("cannot enclose an empty set of rectangles")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A rectangle `[x0, x1) × [y0, y1)` for area purposes; point containment is
/// boundary-inclusive (see [`Rect::contains`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        let finite = x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite();
        if !finite || x0 >= x1 || y0 >= y1 {
            return Err(GeometryError::Degenerate { x0, y0, x1, y1 });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Rectangle spanning a full `width × height` image.
    pub fn from_size(width: f64, height: f64) -> Result<Self, GeometryError> {
        Self::new(0.0, 0.0, width, height)
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new((self.x0 + self.x1) * 0.5, (self.y0 + self.y1) * 0.5)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    /// Closed containment: points on the border count as inside.
    pub fn contains(&self, p: Point) -> bool {
        self.x0 <= p.x && p.x <= self.x1 && self.y0 <= p.y && p.y <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }

    /// Overlap with `other`, or `None` when the overlap has zero area.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        Rect::new(self.x0.max(other.x0), self.y0.max(other.y0), self.x1.min(other.x1), self.y1.min(other.y1)).ok()
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        if self == other {
            return 1.0;
        }
        let inter = self.intersection_area(other);
        if inter == 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Smallest rectangle containing both.
    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// Grows every side by `padding` pixels.
    pub fn expand(&self, padding: f64) -> Rect {
        Rect { x0: self.x0 - padding, y0: self.y0 - padding, x1: self.x1 + padding, y1: self.y1 + padding }
    }

    /// Restricts to `bounds`; `None` when nothing of positive area remains.
    pub fn clamp_to(&self, bounds: &Rect) -> Option<Rect> {
        self.intersection(bounds)
    }

    /// Scales the rectangle about `origin` by `factor` on both axes.
    pub fn scale_about(&self, origin: Point, factor: f64) -> Result<Rect, GeometryError> {
        Rect::new(
            origin.x + (self.x0 - origin.x) * factor,
            origin.y + (self.y0 - origin.y) * factor,
            origin.x + (self.x1 - origin.x) * factor,
            origin.y + (self.y1 - origin.y) * factor,
        )
    }

    /// Converts a full-image point into this region's local frame.
    pub fn to_local(&self, p: Point) -> Point {
        Point::new(p.x - self.x0, p.y - self.y0)
    }
}

/// Maps a point expressed relative to `region`'s top-left corner back into
/// full-image coordinates. Points outside the region are mapped verbatim.
pub fn remap_point(local: Point, region: &Rect) -> Point {
    Point::new(region.x0 + local.x, region.y0 + local.y)
}

/// Minimal box around `rects`, padded on every side and clamped to `bounds`.
pub fn enclosing_box<'a, I>(rects: I, padding: f64, bounds: &Rect) -> Result<Rect, GeometryError>
where
    I: IntoIterator<Item = &'a Rect>,
{
    let hull = rects.into_iter().copied().reduce(|acc, r| acc.union(&r)).ok_or(GeometryError::EmptyInput)?;
    let padded = hull.expand(padding.max(0.0));
    padded.clamp_to(bounds).ok_or(GeometryError::Degenerate {
        x0: padded.x0,
        y0: padded.y0,
        x1: padded.x1,
        y1: padded.y1,
    })
}

impl Serialize for Rect {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Rect {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x0, y0, x1, y1] = <[f64; 4]>::deserialize(deserializer)?;
        Rect::new(x0, y0, x1, y1).map_err(serde::de::Error::custom)
    }
}
