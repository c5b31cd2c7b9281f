//! Axis-aligned boxes in center/size form and the two distance primitives
//! used throughout the tracker.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box width and height must be positive and finite (got w={w}, h={h})")]
    InvalidBox { w: f64, h: f64 },
    #[error("vector length mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Axis-aligned bounding box stored as center coordinates plus width and
/// height, in pixels. Corner form is derived on demand; keeping a single
/// canonical representation avoids conversion drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(GeometryError::InvalidBox { w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Corners as (left, top, right, bottom).
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.cx, self.cy)
    }
}

/// Intersection over union of two boxes. Symmetric, in [0, 1]; 1 exactly for
/// identical boxes and 0 for boxes with disjoint interiors.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (al, at, ar, ab) = a.corners();
    let (bl, bt, br, bb) = b.corners();

    let iw = (ar.min(br) - al.max(bl)).max(0.0);
    let ih = (ab.min(bb) - at.max(bt)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Euclidean distance between two equal-length vectors.
pub fn l2_distance(u: &[f64], v: &[f64]) -> Result<f64, GeometryError> {
    if u.len() != v.len() {
        return Err(GeometryError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let sq: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq.sqrt())
}
