//! Pinhole camera model, thin-lens depth-of-field limits and the three-term
//! pointwise imaging cost.
//!
//! All distances are millimetres. Depth is always measured along the viewing
//! direction, never as Euclidean range.
//!
//! Depth of field for a focus distance `s`, hyperfocal distance `H` and focal
//! length `F`:
//!
//! ```text
//! near(s) = H s / (H + s - F)
//! far(s)  = H s / (H - s + F)      (unbounded once s >= H + F)
//! ```
//!
//! Inverting both limits gives, for a point at depth `d`, the closed range of
//! focus distances that keep it sharp:
//!
//! ```text
//! [ d (H + F) / (H + d),  d (H - F) / (H - d) ]   (upper end unbounded when d >= H)
//! ```

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::SurfaceSample;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OpticsError {
    #[error("focus distance {s} mm must exceed the focal length {focal_length} mm")]
    InvalidFocus { s: f64, focal_length: f64 },
    #[error("depth {0} mm must be positive")]
    InvalidDepth(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid camera pose: {0}")]
    InvalidPose(String),
    #[error("invalid cost parameters: {0}")]
    InvalidParams(String),
    #[error("sample is back-facing for camera {camera} but marked visible")]
    BackFacingVisible { camera: u32 },
}

/// An upper limit that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FarLimit {
    Finite(f64),
    Infinite,
}

impl FarLimit {
    /// `x <= self`.
    pub fn admits(&self, x: f64) -> bool {
        match *self {
            FarLimit::Finite(v) => x <= v,
            FarLimit::Infinite => true,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            FarLimit::Finite(v) => Some(v),
            FarLimit::Infinite => None,
        }
    }
}

/// Near and far sharpness limits for one focus distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofLimits {
    pub near: f64,
    pub far: FarLimit,
}

impl DofLimits {
    pub fn contains(&self, depth: f64) -> bool {
        depth >= self.near && self.far.admits(depth)
    }
}

/// Closed set of focus distances `[lo, hi]` that keep one depth in focus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusInterval {
    pub lo: f64,
    pub hi: FarLimit,
}

impl FocusInterval {
    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && self.hi.admits(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraIntrinsics {
    /// Focal length F (mm).
    pub focal_length: f64,
    /// Hyperfocal distance H (mm).
    pub hyperfocal: f64,
    pub width: u32,
    pub height: u32,
    /// Principal point (pixels).
    pub cx: f64,
    pub cy: f64,
    /// Focal length expressed in pixels, per axis.
    pub fx: f64,
    pub fy: f64,
}

impl Default for CameraIntrinsics {
    /// 50 mm lens on a 22.3 mm wide APS-C sensor (6960 px), mounted portrait
    /// so the image is 2:3 (W/H), with a 10 m hyperfocal distance.
    fn default() -> Self {
        let pixels_per_mm = 6960.0 / 22.3;
        let focal_px = 50.0 * pixels_per_mm;
        Self {
            focal_length: 50.0,
            hyperfocal: 10_000.0,
            width: 4640,
            height: 6960,
            cx: 2320.0,
            cy: 3480.0,
            fx: focal_px,
            fy: focal_px,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), OpticsError> {
        let bad = |m: &str| Err(OpticsError::InvalidIntrinsics(m.to_string()));
        if !(self.focal_length > 0.0 && self.focal_length.is_finite()) {
            return bad("focal length must be positive");
        }
        if !(self.hyperfocal > self.focal_length && self.hyperfocal.is_finite()) {
            return bad("hyperfocal distance must exceed the focal length");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image bounds must be positive");
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("pixel focal lengths must be positive");
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return bad("principal point must be finite");
        }
        Ok(())
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.width as f64 / self.height as f64
    }

    /// `H + F`, the focus distance beyond which the far limit is unbounded.
    pub fn unbounded_focus(&self) -> f64 {
        self.hyperfocal + self.focal_length
    }
}

/// Camera pose and intrinsics. `id` is the camera's index in its rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub id: u32,
    pub position: Point3<f64>,
    /// Unit viewing direction.
    pub forward: Vector3<f64>,
    /// Unit up vector, orthogonal to `forward`.
    pub up: Vector3<f64>,
    pub intrinsics: CameraIntrinsics,
}

const POSE_TOL: f64 = 1e-9;

impl CameraView {
    pub fn new(
        id: u32,
        position: Point3<f64>,
        forward: Vector3<f64>,
        up: Vector3<f64>,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self, OpticsError> {
        let cam = Self {
            id,
            position,
            forward,
            up,
            intrinsics,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `position` looking at `target`; `up_hint` is orthogonalised.
    pub fn look_at(
        id: u32,
        position: Point3<f64>,
        target: Point3<f64>,
        up_hint: Vector3<f64>,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self, OpticsError> {
        let forward = (target - position)
            .try_normalize(1e-12)
            .ok_or_else(|| OpticsError::InvalidPose("target coincides with position".into()))?;
        let up = (up_hint - forward * up_hint.dot(&forward))
            .try_normalize(1e-12)
            .ok_or_else(|| OpticsError::InvalidPose("up hint parallel to view direction".into()))?;
        Self::new(id, position, forward, up, intrinsics)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        self.intrinsics.validate()?;
        if !self.position.iter().all(|c| c.is_finite()) {
            return Err(OpticsError::InvalidPose("non-finite position".into()));
        }
        if (self.forward.norm() - 1.0).abs() > POSE_TOL || (self.up.norm() - 1.0).abs() > POSE_TOL {
            return Err(OpticsError::InvalidPose("forward and up must be unit vectors".into()));
        }
        if self.forward.dot(&self.up).abs() > POSE_TOL {
            return Err(OpticsError::InvalidPose("forward and up must be orthogonal".into()));
        }
        Ok(())
    }

    pub fn right(&self) -> Vector3<f64> {
        self.forward.cross(&self.up)
    }

    /// Distance along the viewing direction.
    pub fn depth(&self, p: &Point3<f64>) -> f64 {
        (p - self.position).dot(&self.forward)
    }

    /// Distance from the optical axis, `‖(p - p_c) - depth·n_c‖`.
    pub fn axis_deviation(&self, p: &Point3<f64>) -> f64 {
        let v = p - self.position;
        (v - self.forward * v.dot(&self.forward)).norm()
    }

    /// Pixel coordinates `(u, v)`; `v` grows downward. `None` behind the camera.
    pub fn project(&self, p: &Point3<f64>) -> Option<(f64, f64)> {
        let v = p - self.position;
        let z = v.dot(&self.forward);
        if !(z > 0.0) {
            return None;
        }
        let x = v.dot(&self.right());
        let y = v.dot(&self.up);
        let k = &self.intrinsics;
        Some((k.cx + k.fx * x / z, k.cy - k.fy * y / z))
    }

    /// Closed image-bounds test.
    pub fn in_image(&self, p: &Point3<f64>) -> bool {
        match self.project(p) {
            Some((u, v)) => {
                (0.0..=self.intrinsics.width as f64).contains(&u)
                    && (0.0..=self.intrinsics.height as f64).contains(&v)
            }
            None => false,
        }
    }
}

/// Weights and thresholds of the pointwise cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// Projected-area weight.
    pub w_area: f64,
    /// Optical-axis deviation weight.
    pub w_deviation: f64,
    /// Out-of-focus weight.
    pub w_focus: f64,
    /// Projected-area coefficient, applied to depth² in mm².
    pub eps_area: f64,
    /// Deviation normaliser (mm).
    pub eps_deviation: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            w_area: 1.0 / 3.0,
            w_deviation: 1.0 / 3.0,
            w_focus: 1.0 / 3.0,
            eps_area: 1e-6,
            eps_deviation: 750.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), OpticsError> {
        let w = [self.w_area, self.w_deviation, self.w_focus];
        if w.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(OpticsError::InvalidParams("weights must be non-negative".into()));
        }
        // Costs must stay within [0, 1] so invisibility remains the maximum.
        if w.iter().sum::<f64>() > 1.0 + 1e-9 {
            return Err(OpticsError::InvalidParams("weights must sum to at most 1".into()));
        }
        if !(self.eps_area > 0.0 && self.eps_deviation > 0.0) {
            return Err(OpticsError::InvalidParams("thresholds must be positive".into()));
        }
        Ok(())
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            w_area: self.w_area * factor,
            w_deviation: self.w_deviation * factor,
            w_focus: self.w_focus * factor,
            ..*self
        }
    }
}

pub fn dof_limits(s: f64, intr: &CameraIntrinsics) -> Result<DofLimits, OpticsError> {
    let (h, f) = (intr.hyperfocal, intr.focal_length);
    if !(s > f) || s.is_nan() {
        return Err(OpticsError::InvalidFocus { s, focal_length: f });
    }
    let near = h * s / (h + s - f);
    let denom = h - s + f;
    let far = if denom > 0.0 {
        FarLimit::Finite(h * s / denom)
    } else {
        FarLimit::Infinite
    };
    Ok(DofLimits { near, far })
}

/// Focus distances `s` for which `near(s) <= d <= far(s)`.
pub fn focus_interval_for_depth(d: f64, intr: &CameraIntrinsics) -> Result<FocusInterval, OpticsError> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(OpticsError::InvalidDepth(d));
    }
    let (h, f) = (intr.hyperfocal, intr.focal_length);
    let lo = d * (h + f) / (h + d);
    let hi = if d < h {
        FarLimit::Finite(d * (h - f) / (h - d))
    } else {
        FarLimit::Infinite
    };
    Ok(FocusInterval { lo, hi })
}

/// Membership in the view frustum clipped at the depth-of-field limits.
pub fn in_frustum(point: &Point3<f64>, camera: &CameraView, s: f64) -> Result<bool, OpticsError> {
    let limits = dof_limits(s, &camera.intrinsics)?;
    Ok(camera.in_image(point) && limits.contains(camera.depth(point)))
}

/// Weighted projected-area and axis-deviation terms: the part of the cost
/// that does not depend on the focus distance. Requires a front-facing sample.
pub fn focus_independent_cost(
    sample: &SurfaceSample,
    camera: &CameraView,
    params: &CostParams,
) -> Result<f64, OpticsError> {
    let incidence = camera.forward.dot(&sample.normal);
    if !(incidence > 0.0) {
        return Err(OpticsError::BackFacingVisible { camera: camera.id });
    }
    let depth = camera.depth(&sample.position);
    let area = (params.eps_area * depth * depth / incidence).min(1.0);
    let deviation = (camera.axis_deviation(&sample.position) / params.eps_deviation).min(1.0);
    Ok(params.w_area * area + params.w_deviation * deviation)
}

/// Cost of imaging `sample` with `camera` focused at `s`; exactly 1 when not visible.
pub fn pointwise_cost(
    sample: &SurfaceSample,
    camera: &CameraView,
    s: f64,
    params: &CostParams,
    visible: bool,
) -> Result<f64, OpticsError> {
    if !visible {
        return Ok(1.0);
    }
    let base = focus_independent_cost(sample, camera, params)?;
    let sharp = in_frustum(&sample.position, camera, s)?;
    Ok(base + if sharp { 0.0 } else { params.w_focus })
}
