//! Monte-Carlo total cost, the greedy assignment step and the `w_focus = 0`
//! lower bound, all evaluated against a precomputed [`CostCache`].
//!
//! Cached costs are rounded to multiples of 2⁻³² so that any sum over up to
//! 2²⁰ samples is exact in `f64`. Totals are therefore independent of
//! summation order, and equal-cost candidates compare exactly equal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{SurfaceSample, VisibilityTable};
use crate::optics::{focus_independent_cost, focus_interval_for_depth, CameraView, CostParams, FocusInterval, OpticsError};

const QUANTUM_SCALE: f64 = 4_294_967_296.0; // 2^32

/// Rounds to the cost grid used by the cache.
pub fn quantize(x: f64) -> f64 {
    (x * QUANTUM_SCALE).round() / QUANTUM_SCALE
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AssignmentError {
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error("camera at index {index} has id {id}; ids must equal rig indices")]
    CameraIdMismatch { index: usize, id: u32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("sample {sample} is assigned to unknown camera {camera}")]
    UnknownCamera { sample: usize, camera: u32 },
    #[error("sample {sample} is assigned to camera {camera}, which cannot see it")]
    NotVisible { sample: usize, camera: u32 },
    #[error("camera {camera} has focus {s} mm, not beyond its focal length")]
    InvalidFocus { camera: usize, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    base: f64,
    depth: f64,
    interval: FocusInterval,
}

/// Per camera/sample focus-independent cost terms, depths and sharp-focus
/// intervals, plus the visibility relation in both directions.
#[derive(Debug, Clone)]
pub struct CostCache {
    cameras: Vec<CameraView>,
    samples: usize,
    weights: Vec<f64>,
    w_focus: f64,
    entries: Vec<Option<Entry>>,
    visible_by_camera: Vec<Vec<u32>>,
    cameras_by_sample: Vec<Vec<u32>>,
}

impl CostCache {
    pub fn build(
        samples: &[SurfaceSample],
        cameras: &[CameraView],
        visibility: &VisibilityTable,
        params: &CostParams,
    ) -> Result<Self, AssignmentError> {
        params.validate()?;
        if visibility.cameras() != cameras.len() || visibility.samples() != samples.len() {
            return Err(AssignmentError::Shape(format!(
                "visibility is {}x{}, scene has {} cameras and {} samples",
                visibility.cameras(),
                visibility.samples(),
                cameras.len(),
                samples.len()
            )));
        }
        for (index, cam) in cameras.iter().enumerate() {
            if cam.id as usize != index {
                return Err(AssignmentError::CameraIdMismatch { index, id: cam.id });
            }
        }

        let rows: Vec<Vec<Option<Entry>>> = cameras
            .par_iter()
            .enumerate()
            .map(|(c, cam)| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(p, sample)| {
                        if !visibility.get(c, p) {
                            return Ok(None);
                        }
                        let depth = cam.depth(&sample.position);
                        Ok(Some(Entry {
                            base: quantize(focus_independent_cost(sample, cam, params)?),
                            depth,
                            interval: focus_interval_for_depth(depth, &cam.intrinsics)?,
                        }))
                    })
                    .collect::<Result<Vec<_>, OpticsError>>()
            })
            .collect::<Result<_, _>>()?;

        let n = samples.len();
        let mut visible_by_camera = vec![Vec::new(); cameras.len()];
        let mut cameras_by_sample = vec![Vec::new(); n];
        for (c, row) in rows.iter().enumerate() {
            for (p, e) in row.iter().enumerate() {
                if e.is_some() {
                    visible_by_camera[c].push(p as u32);
                    cameras_by_sample[p].push(c as u32);
                }
            }
        }
        Ok(Self {
            cameras: cameras.to_vec(),
            samples: n,
            weights: samples.iter().map(|s| s.weight).collect(),
            w_focus: quantize(params.w_focus),
            entries: rows.into_iter().flatten().collect(),
            visible_by_camera,
            cameras_by_sample,
        })
    }

    pub fn num_cameras(&self) -> usize {
        self.cameras.len()
    }

    pub fn num_samples(&self) -> usize {
        self.samples
    }

    pub fn cameras(&self) -> &[CameraView] {
        &self.cameras
    }

    pub fn camera(&self, c: usize) -> &CameraView {
        &self.cameras[c]
    }

    pub fn sample_weight(&self, p: usize) -> f64 {
        self.weights[p]
    }

    /// Quantized out-of-focus penalty.
    pub fn w_focus(&self) -> f64 {
        self.w_focus
    }

    pub fn visible(&self, c: usize, p: usize) -> bool {
        self.entries[c * self.samples + p].is_some()
    }

    /// Samples visible to camera `c`, ascending.
    pub fn visible_samples(&self, c: usize) -> &[u32] {
        &self.visible_by_camera[c]
    }

    /// Cameras that see sample `p`, ascending.
    pub fn seeing_cameras(&self, p: usize) -> &[u32] {
        &self.cameras_by_sample[p]
    }

    fn entry(&self, c: usize, p: usize) -> Option<&Entry> {
        self.entries[c * self.samples + p].as_ref()
    }

    /// Focus-independent cost; `None` if not visible.
    pub fn base(&self, c: usize, p: usize) -> Option<f64> {
        self.entry(c, p).map(|e| e.base)
    }

    pub fn depth(&self, c: usize, p: usize) -> Option<f64> {
        self.entry(c, p).map(|e| e.depth)
    }

    pub fn interval(&self, c: usize, p: usize) -> Option<FocusInterval> {
        self.entry(c, p).map(|e| e.interval)
    }

    pub fn in_focus(&self, c: usize, p: usize, s: f64) -> bool {
        self.entry(c, p).is_some_and(|e| e.interval.contains(s))
    }

    /// Pointwise cost of camera `c` on sample `p`. An unset focus is never sharp.
    pub fn cost(&self, c: usize, p: usize, focus: Option<f64>) -> f64 {
        match self.entry(c, p) {
            None => 1.0,
            Some(e) => {
                if focus.is_some_and(|s| e.interval.contains(s)) {
                    e.base
                } else {
                    e.base + self.w_focus
                }
            }
        }
    }
}

/// Per-camera focus distances and the sample-to-camera assignment.
/// `None` marks an unset focus or an unassigned sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusPlan {
    pub focus: Vec<Option<f64>>,
    pub assignment: Vec<Option<u32>>,
}

impl FocusPlan {
    /// Plan whose assignment is the greedy argmin for `focus`.
    pub fn from_focus(focus: Vec<Option<f64>>, cache: &CostCache) -> Self {
        let assignment = assign_step(&focus, cache);
        Self { focus, assignment }
    }

    /// Samples assigned to each camera, ascending.
    pub fn members(&self, cameras: usize) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); cameras];
        for (p, a) in self.assignment.iter().enumerate() {
            if let Some(c) = a {
                out[*c as usize].push(p as u32);
            }
        }
        out
    }

    pub fn validate(&self, cache: &CostCache) -> Result<(), AssignmentError> {
        if self.focus.len() != cache.num_cameras() || self.assignment.len() != cache.num_samples() {
            return Err(AssignmentError::Shape(format!(
                "plan has {} foci and {} assignments for {} cameras and {} samples",
                self.focus.len(),
                self.assignment.len(),
                cache.num_cameras(),
                cache.num_samples()
            )));
        }
        for (c, s) in self.focus.iter().enumerate() {
            if let Some(s) = *s {
                if !(s > cache.camera(c).intrinsics.focal_length) {
                    return Err(AssignmentError::InvalidFocus { camera: c, s });
                }
            }
        }
        for (p, a) in self.assignment.iter().enumerate() {
            if let Some(c) = *a {
                if c as usize >= cache.num_cameras() {
                    return Err(AssignmentError::UnknownCamera { sample: p, camera: c });
                }
                if !cache.visible(c as usize, p) {
                    return Err(AssignmentError::NotVisible { sample: p, camera: c });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Sum of pointwise costs; at most the sample count.
    pub total: f64,
    pub mean: f64,
    pub per_camera: Vec<f64>,
    /// Contribution of unassigned samples (1 each).
    pub unassigned: f64,
    /// Area (mm²) of samples imaged in focus by their assigned camera.
    pub in_focus_area: f64,
    pub samples: usize,
    pub cameras: usize,
}

pub fn total_cost(plan: &FocusPlan, cache: &CostCache) -> Result<CostReport, AssignmentError> {
    plan.validate(cache)?;
    let mut per_camera = vec![0.0; cache.num_cameras()];
    let mut unassigned = 0.0;
    let mut in_focus_area = 0.0;
    for (p, a) in plan.assignment.iter().enumerate() {
        match *a {
            None => unassigned += 1.0,
            Some(c) => {
                let c = c as usize;
                let focus = plan.focus[c];
                per_camera[c] += cache.cost(c, p, focus);
                if focus.is_some_and(|s| cache.in_focus(c, p, s)) {
                    in_focus_area += cache.sample_weight(p);
                }
            }
        }
    }
    let total = per_camera.iter().sum::<f64>() + unassigned;
    let n = cache.num_samples();
    Ok(CostReport {
        total,
        mean: if n > 0 { total / n as f64 } else { 0.0 },
        per_camera,
        unassigned,
        in_focus_area,
        samples: n,
        cameras: cache.num_cameras(),
    })
}

/// Cost of sample `p` under its current assignment.
pub fn assigned_cost(plan: &FocusPlan, cache: &CostCache, p: usize) -> f64 {
    match plan.assignment[p] {
        None => 1.0,
        Some(c) => cache.cost(c as usize, p, plan.focus[c as usize]),
    }
}

/// Greedy argmin over the cameras that see each sample and have a focus set;
/// ties go to the lowest camera id. Samples with no such camera stay unassigned.
pub fn assign_step(focus: &[Option<f64>], cache: &CostCache) -> Vec<Option<u32>> {
    (0..cache.num_samples())
        .map(|p| {
            let mut best: Option<(u32, f64)> = None;
            for &c in cache.seeing_cameras(p) {
                let Some(s) = focus[c as usize] else { continue };
                let cost = cache.cost(c as usize, p, Some(s));
                if best.is_none_or(|(_, b)| cost < b) {
                    best = Some((c, cost));
                }
            }
            best.map(|(c, _)| c)
        })
        .collect()
}

/// Total cost with the focus term dropped: every visible sample is assumed
/// sharp in its best camera. Samples nobody sees still count 1.
pub fn lower_bound(cache: &CostCache) -> f64 {
    (0..cache.num_samples())
        .map(|p| {
            cache
                .seeing_cameras(p)
                .iter()
                .filter_map(|&c| cache.base(c as usize, p))
                .fold(1.0f64, f64::min)
        })
        .sum()
}
