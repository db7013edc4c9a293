use crate::assignment::CostCache;
use crate::optics::{CameraIntrinsics, FarLimit, FocusInterval};

/// Subdivision of the focus axis `(F, ∞)` into cells on which the number of
/// in-focus samples is constant.
///
/// Cell `0` is `(F, b₀)`, cell `i` is `(bᵢ₋₁, bᵢ)` and the last cell is
/// unbounded above.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointPartition {
    pub camera: u32,
    /// Left end of the first cell: the focal length.
    pub lower: f64,
    /// `H + F`; probes of the unbounded cell never exceed it unless the cell starts beyond it.
    pub unbounded_cap: f64,
    /// Strictly increasing.
    pub breakpoints: Vec<f64>,
    /// In-focus count per cell; `breakpoints.len() + 1` entries.
    pub counts: Vec<u32>,
}

/// Enter/leave events of focus intervals along the focus axis. Shared by the
/// single-camera partition and the multi-camera sweep.
#[derive(Debug, Clone)]
pub(crate) struct IntervalEvents {
    pub breakpoints: Vec<f64>,
    /// Local index and new sharp state, grouped by breakpoint; group `j`
    /// is `toggles[offsets[j]..offsets[j + 1]]`, entries before exits.
    pub toggles: Vec<(u32, bool)>,
    pub offsets: Vec<usize>,
    /// Sharp state inside the first cell.
    pub initially_sharp: Vec<bool>,
}

impl IntervalEvents {
    /// `intervals[i]` is `None` for entries that can never be sharp.
    pub fn new(intervals: &[Option<FocusInterval>], focal_length: f64) -> Self {
        let mut events: Vec<(f64, bool, u32)> = Vec::with_capacity(intervals.len() * 2);
        let mut initially_sharp = vec![false; intervals.len()];
        for (i, iv) in intervals.iter().enumerate() {
            let Some(iv) = iv else { continue };
            if let FarLimit::Finite(hi) = iv.hi {
                if hi <= focal_length {
                    continue;
                }
                events.push((hi, false, i as u32));
            }
            if iv.lo <= focal_length {
                initially_sharp[i] = true;
            } else {
                events.push((iv.lo, true, i as u32));
            }
        }
        // Same coordinate: entries (true) before exits (false).
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));

        let mut breakpoints = Vec::new();
        let mut offsets = vec![0];
        let mut toggles = Vec::with_capacity(events.len());
        for (x, enter, i) in events {
            if breakpoints.last() != Some(&x) {
                if !breakpoints.is_empty() {
                    offsets.push(toggles.len());
                }
                breakpoints.push(x);
            }
            toggles.push((i, enter));
        }
        offsets.push(toggles.len());
        Self {
            breakpoints,
            toggles,
            offsets,
            initially_sharp,
        }
    }

    pub fn crossing(&self, j: usize) -> &[(u32, bool)] {
        &self.toggles[self.offsets[j]..self.offsets[j + 1]]
    }

    pub fn num_cells(&self) -> usize {
        self.breakpoints.len() + 1
    }
}

/// A representable focus distance strictly inside cell `i`, if one exists.
/// Bounded cells use their midpoint; the unbounded cell uses twice its lower
/// end, capped at `H + F` when that still lies inside the cell.
pub(crate) fn cell_probe(breakpoints: &[f64], i: usize, focal_length: f64, cap: f64) -> Option<f64> {
    let lo = if i == 0 { focal_length } else { breakpoints[i - 1] };
    let probe = match breakpoints.get(i) {
        Some(&hi) => {
            let m = 0.5 * (lo + hi);
            (lo < m && m < hi).then_some(m)?
        }
        None => {
            let m = if lo < cap { (2.0 * lo).min(cap) } else { 2.0 * lo };
            (m > lo && m.is_finite()).then_some(m)?
        }
    };
    Some(probe)
}

impl BreakpointPartition {
    pub fn from_intervals(camera: u32, intervals: &[FocusInterval], intr: &CameraIntrinsics) -> Self {
        let wrapped: Vec<Option<FocusInterval>> = intervals.iter().copied().map(Some).collect();
        let events = IntervalEvents::new(&wrapped, intr.focal_length);
        let mut count = events.initially_sharp.iter().filter(|&&b| b).count() as i64;
        let mut counts = Vec::with_capacity(events.num_cells());
        counts.push(count as u32);
        for j in 0..events.breakpoints.len() {
            for &(_, enter) in events.crossing(j) {
                count += if enter { 1 } else { -1 };
            }
            counts.push(count as u32);
        }
        Self {
            camera,
            lower: intr.focal_length,
            unbounded_cap: intr.unbounded_focus(),
            breakpoints: events.breakpoints,
            counts,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.counts.len()
    }

    /// `(lower, upper)` of cell `i`, both open.
    pub fn cell_bounds(&self, i: usize) -> (f64, FarLimit) {
        let lo = if i == 0 { self.lower } else { self.breakpoints[i - 1] };
        let hi = self.breakpoints.get(i).map_or(FarLimit::Infinite, |&b| FarLimit::Finite(b));
        (lo, hi)
    }

    pub fn probe(&self, i: usize) -> Option<f64> {
        cell_probe(&self.breakpoints, i, self.lower, self.unbounded_cap)
    }

    /// Cell with the largest count; ties go to the cell nearest the camera.
    /// Cells containing no representable focus distance are skipped.
    pub fn best_cell(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.num_cells() {
            if self.probe(i).is_none() {
                continue;
            }
            if best.is_none_or(|b| self.counts[i] > self.counts[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Partition for camera `c` over `samples`; samples it cannot see are ignored.
pub fn build_partition(cache: &CostCache, camera: usize, samples: &[u32]) -> BreakpointPartition {
    let intervals: Vec<FocusInterval> = samples
        .iter()
        .filter_map(|&p| cache.interval(camera, p as usize))
        .collect();
    BreakpointPartition::from_intervals(camera as u32, &intervals, &cache.camera(camera).intrinsics)
}

/// Focus distance keeping the most of `samples` sharp: the probe of the
/// maximal-count cell. `None` when `samples` is empty.
pub fn optimal_focus_single(cache: &CostCache, camera: usize, samples: &[u32]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let partition = build_partition(cache, camera, samples);
    partition.best_cell().and_then(|i| partition.probe(i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{dof_limits, focus_interval_for_depth};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::default()
    }

    fn intervals(depths: &[f64]) -> Vec<FocusInterval> {
        depths.iter().map(|&d| focus_interval_for_depth(d, &k()).unwrap()).collect()
    }

    /// Independent count: depth-of-field limits evaluated directly.
    fn sharp_count(depths: &[f64], s: f64) -> u32 {
        let l = dof_limits(s, &k()).unwrap();
        depths.iter().filter(|&&d| l.contains(d)).count() as u32
    }

    #[test]
    fn single_depth_partition() {
        let p = BreakpointPartition::from_intervals(0, &intervals(&[750.0]), &k());
        assert_eq!(p.breakpoints.len(), 2);
        assert!((p.breakpoints[0] - 701.16).abs() < 0.01);
        assert!((p.breakpoints[1] - 806.76).abs() < 0.01);
        assert_eq!(p.counts, vec![0, 1, 0]);
        assert_eq!(p.cell_bounds(2).1, FarLimit::Infinite);
        let best = p.probe(p.best_cell().unwrap()).unwrap();
        assert!((best - 753.96).abs() < 0.01, "{best}");
    }

    #[test]
    fn disjoint_and_coincident_intervals() {
        let p = BreakpointPartition::from_intervals(0, &intervals(&[600.0, 1600.0]), &k());
        assert_eq!(*p.counts.iter().max().unwrap(), 1);
        let p = BreakpointPartition::from_intervals(0, &intervals(&[900.0; 7]), &k());
        assert_eq!(p.breakpoints.len(), 2);
        assert_eq!(p.counts, vec![0, 7, 0]);
    }

    #[test]
    fn unbounded_cell_probe_rules() {
        // cell starting below H + F: doubled, capped
        assert_eq!(cell_probe(&[1000.0], 1, 50.0, 10_050.0), Some(2000.0));
        assert_eq!(cell_probe(&[8000.0], 1, 50.0, 10_050.0), Some(10_050.0));
        // beyond the cap: doubled
        assert_eq!(cell_probe(&[20_000.0], 1, 50.0, 10_050.0), Some(40_000.0));
        // no breakpoints at all
        assert_eq!(cell_probe(&[], 0, 50.0, 10_050.0), Some(100.0));
        // adjacent doubles leave no room
        let a = 700.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(cell_probe(&[a, b], 1, 50.0, 10_050.0), None);
    }

    #[test]
    fn depths_near_hyperfocal_have_open_upper_end() {
        let p = BreakpointPartition::from_intervals(0, &intervals(&[12_000.0, 15_000.0]), &k());
        assert_eq!(p.breakpoints.len(), 2);
        assert_eq!(*p.counts.last().unwrap(), 2);
        let best = p.probe(p.best_cell().unwrap()).unwrap();
        assert_eq!(sharp_count(&[12_000.0, 15_000.0], best), 2);
    }

    #[test]
    fn cells_are_constant_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let depths: Vec<f64> = (0..60).map(|_| rng.random_range(400.0..3000.0)).collect();
        let p = BreakpointPartition::from_intervals(0, &intervals(&depths), &k());
        assert!(p.breakpoints.windows(2).all(|w| w[0] < w[1]));
        for i in 0..p.num_cells() {
            let (lo, hi) = p.cell_bounds(i);
            let hi = hi.finite().unwrap_or(lo * 3.0);
            for t in [0.25, 0.5, 0.75] {
                let s = lo + t * (hi - lo);
                assert_eq!(sharp_count(&depths, s), p.counts[i], "cell {i} at {s}");
            }
        }
    }

    /// Exhaustive check against a dense sweep of candidate distances.
    #[test]
    fn best_cell_beats_dense_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let depths: Vec<f64> = (0..200).map(|_| rng.random_range(500.0..2000.0)).collect();
            let p = BreakpointPartition::from_intervals(0, &intervals(&depths), &k());
            let s = p.probe(p.best_cell().unwrap()).unwrap();
            let got = sharp_count(&depths, s);
            let mut dense = 0;
            for j in 0..20_000 {
                let s = 400.0 + 1800.0 * j as f64 / 20_000.0;
                dense = dense.max(sharp_count(&depths, s));
            }
            assert!(got >= dense);
            assert_eq!(got, *p.counts.iter().max().unwrap());
        }
    }
}
