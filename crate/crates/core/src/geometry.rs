//! Axis-aligned box arithmetic.
//!
//! Boxes are `(left, top, width, height)` in continuous pixel coordinates.
//! The tracker works in the `(cx, cy, aspect, h)` measurement space, see
//! [`Measurement`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    /// Builds a validated box. Width and height must be positive and every
    /// value finite.
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Result<Self> {
        if !(left.is_finite() && top.is_finite() && width.is_finite() && height.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite box ({left}, {top}, {width}, {height})"
            )));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::DegenerateBox { width, height });
        }
        Ok(Self {
            left,
            top,
            width,
            height,
        })
    }

    pub fn from_center(cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    #[inline]
    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    #[inline]
    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        (self.left + self.width / 2.0, self.top + self.height / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            left: self.left + dx,
            top: self.top + dy,
            ..*self
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            left: self.left * factor,
            top: self.top * factor,
            width: self.width * factor,
            height: self.height * factor,
        }
    }

    pub fn to_measurement(&self) -> Measurement {
        let (cx, cy) = self.center();
        Measurement {
            cx,
            cy,
            aspect: self.width / self.height,
            h: self.height,
        }
    }

    pub fn from_measurement(m: &Measurement) -> Result<Self> {
        let width = m.aspect * m.h;
        Self::new(m.cx - width / 2.0, m.cy - m.h / 2.0, width, m.h)
    }
}

/// Box in filter measurement space: center, aspect ratio `width / height` and
/// height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub cx: f64,
    pub cy: f64,
    pub aspect: f64,
    pub h: f64,
}

impl Measurement {
    pub fn to_array(&self) -> [f64; 4] {
        [self.cx, self.cy, self.aspect, self.h]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self {
            cx: v[0],
            cy: v[1],
            aspect: v[2],
            h: v[3],
        }
    }
}

/// Area of the overlap rectangle, zero for disjoint boxes.
pub fn intersection_area(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.right().min(b.right()) - a.left.max(b.left);
    let h = a.bottom().min(b.bottom()) - a.top.max(b.top);
    if w <= 0.0 || h <= 0.0 {
        0.0
    } else {
        w * h
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Grows (or, with a negative margin, shrinks) a box by `margin` on every side.
pub fn expand(b: &BoundingBox, margin: f64) -> Result<BoundingBox> {
    let width = b.width + 2.0 * margin;
    let height = b.height + 2.0 * margin;
    if width <= 0.0 || height <= 0.0 {
        return Err(Error::DegenerateBox { width, height });
    }
    BoundingBox::new(b.left - margin, b.top - margin, width, height)
}

pub fn center_distance(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    (ax - bx).hypot(ay - by)
}
