//! Time-varying observation sets on the torus and their thickness.
//!
//! A set is stored as a bitmask over grid cells. Cell `i` along an axis is
//! `[x_i, x_i + h)` with `x_i = -X + i h`, and measures are cell counts times
//! `h^d`. Boxes are snapped to cell boundaries, so box unions are represented
//! exactly whenever their edges sit on the lattice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::spectral::{Field, GridSpec, MAX_DIM};

/// Axis-aligned box `[lo, hi)` in `R^d`, wrapped onto the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    grid: GridSpec,
    mask: Vec<bool>,
}

impl ObservationSet {
    pub fn from_mask(grid: GridSpec, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return usage(format!("mask has {} cells, grid has {}", mask.len(), grid.len()));
        }
        Ok(Self { grid, mask })
    }

    pub fn full(grid: GridSpec) -> Self {
        Self { grid, mask: vec![true; grid.len()] }
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self { grid, mask: vec![false; grid.len()] }
    }

    pub fn from_predicate(grid: GridSpec, pred: impl Fn(&[f64]) -> bool) -> Self {
        let d = grid.dim();
        let mask = (0..grid.len()).map(|i| pred(&grid.point(i)[..d])).collect();
        Self { grid, mask }
    }

    pub fn from_boxes(grid: GridSpec, boxes: &[BoxRegion]) -> Result<Self> {
        let mut set = Self::empty(grid);
        for b in boxes {
            set.insert_box(b)?;
        }
        Ok(set)
    }

    /// Cell index ranges covered by a box along each axis, as half-open
    /// `[a, b)` with `b - a ≤ N` (indices taken mod N).
    fn snap(&self, b: &BoxRegion) -> Result<Vec<(i64, i64)>> {
        let g = &self.grid;
        let d = g.dim();
        if b.lo.len() != d || b.hi.len() != d {
            return usage(format!("box dimension differs from grid dimension {d}"));
        }
        let n = g.points() as i64;
        let h = g.spacing();
        let x = g.half_length();
        let mut ranges = Vec::with_capacity(d);
        for a in 0..d {
            let (lo, hi) = (b.lo[a], b.hi[a]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return usage(format!("box edge [{lo}, {hi}) is not an interval"));
            }
            let i0 = ((lo + x) / h).round() as i64;
            let i1 = ((hi + x) / h).round() as i64;
            ranges.push((i0, i1.min(i0 + n)));
        }
        Ok(ranges)
    }

    pub fn insert_box(&mut self, b: &BoxRegion) -> Result<()> {
        let ranges = self.snap(b)?;
        let g = self.grid;
        let n = g.points() as i64;
        let d = g.dim();
        if ranges.iter().any(|(a, b)| a == b) {
            return Ok(());
        }
        let mut idx = [0i64; MAX_DIM];
        for a in 0..d {
            idx[a] = ranges[a].0;
        }
        let mut cell = [0usize; MAX_DIM];
        loop {
            for a in 0..d {
                cell[a] = idx[a].rem_euclid(n) as usize;
            }
            let flat = g.ravel(&cell);
            self.mask[flat] = true;
            let mut a = d;
            loop {
                if a == 0 {
                    return Ok(());
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < ranges[a].1 {
                    break;
                }
                idx[a] = ranges[a].0;
            }
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.cell_count() as f64 * self.grid.cell_volume()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    /// Cyclic shift by whole cells along each axis.
    pub fn translate(&self, shift: &[i64]) -> Self {
        let g = self.grid;
        let n = g.points() as i64;
        let d = g.dim();
        let mut mask = vec![false; g.len()];
        for (i, &v) in self.mask.iter().enumerate() {
            if v {
                let idx = g.unravel(i);
                let mut j = [0usize; MAX_DIM];
                for a in 0..d {
                    j[a] = (idx[a] as i64 + shift[a]).rem_euclid(n) as usize;
                }
                mask[g.ravel(&j)] = true;
            }
        }
        Self { grid: g, mask }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| a || b).collect();
        Self { grid: self.grid, mask }
    }
}

/// `∪_k [k p + offset, k p + offset + width)` along `axis`, full in the other axes.
pub fn periodic_stripes(grid: GridSpec, axis: usize, period: f64, width: f64, offset: f64) -> Result<ObservationSet> {
    if axis >= grid.dim() {
        return usage(format!("axis {axis} out of range"));
    }
    if !(period > 0.0 && width >= 0.0 && width <= period) {
        return usage(format!("stripe width {width} must lie in [0, period = {period}]"));
    }
    let x = grid.half_length();
    let d = grid.dim();
    let kmin = ((-x - offset) / period).floor() as i64 - 1;
    let kmax = ((x - offset) / period).ceil() as i64 + 1;
    let mut boxes = Vec::new();
    for k in kmin..=kmax {
        let lo = k as f64 * period + offset;
        let mut b = BoxRegion { lo: vec![-x; d], hi: vec![x; d] };
        b.lo[axis] = lo.max(-x);
        b.hi[axis] = (lo + width).min(x);
        if b.lo[axis] < b.hi[axis] {
            boxes.push(b);
        }
    }
    ObservationSet::from_boxes(grid, &boxes)
}

/// Piecewise constant family: `Ω(t) = sets[j]` on `[t_j, t_{j+1})`, uniform partition of `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetFamily {
    horizon: f64,
    sets: Vec<ObservationSet>,
}

impl SetFamily {
    pub fn new(horizon: f64, sets: Vec<ObservationSet>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return usage(format!("horizon {horizon} must be positive"));
        }
        let Some(first) = sets.first() else {
            return usage("set family needs at least one sample");
        };
        if sets.iter().any(|s| s.grid != first.grid) {
            return usage("all samples of a set family must share one grid");
        }
        Ok(Self { horizon, sets })
    }

    pub fn constant(horizon: f64, set: ObservationSet) -> Result<Self> {
        Self::new(horizon, vec![set])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.sets[0].grid
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn samples(&self) -> &[ObservationSet] {
        &self.sets
    }

    pub fn duration(&self) -> f64 {
        self.horizon / self.sets.len() as f64
    }

    /// Start times `t_j` of every sample plus the horizon.
    pub fn breakpoints(&self) -> Vec<f64> {
        let n = self.sets.len();
        (0..=n).map(|j| self.horizon * j as f64 / n as f64).collect()
    }

    pub fn sample_index(&self, t: f64) -> usize {
        let n = self.sets.len();
        ((t / self.horizon * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    pub fn at(&self, t: f64) -> &ObservationSet {
        &self.sets[self.sample_index(t)]
    }
}

/// `Ω(t) = [0, X)` for `t < T/2` and `[-X, 0)` afterwards (first axis; full in the others).
pub fn halfline_family(grid: GridSpec, horizon: f64) -> Result<SetFamily> {
    let right = ObservationSet::from_predicate(grid, |x| x[0] >= 0.0);
    let left = ObservationSet::from_predicate(grid, |x| x[0] < 0.0);
    SetFamily::new(horizon, vec![right, left])
}

/// Window side lengths in cells, `round(L_i / h)`.
fn window_cells(grid: &GridSpec, sides: &[f64]) -> Result<Vec<usize>> {
    if sides.len() != grid.dim() {
        return usage(format!("window has {} sides, grid dimension is {}", sides.len(), grid.dim()));
    }
    let h = grid.spacing();
    let full = 2.0 * grid.half_length();
    sides
        .iter()
        .map(|&l| {
            if !(l > 0.0 && l <= full * (1.0 + 1e-12)) {
                return usage(format!("window side {l} must lie in (0, {full}]"));
            }
            Ok(((l / h).round() as usize).clamp(1, grid.points()))
        })
        .collect()
}

/// Cell counts of `Ω ∩ (anchor + window)` for every lattice anchor (windows wrap).
fn window_counts(set: &ObservationSet, cells: &[usize]) -> Vec<f64> {
    let g = set.grid;
    let n = g.points();
    let d = g.dim();
    let mut vals: Vec<f64> = set.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut line = vec![0.0; n];
    for axis in 0..d {
        let w = cells[axis];
        let stride = n.pow((d - 1 - axis) as u32);
        for l in 0..vals.len() / n {
            let base = (l / stride) * n * stride + l % stride;
            for j in 0..n {
                line[j] = vals[base + j * stride];
            }
            let mut acc: f64 = line[..w].iter().sum();
            for j in 0..n {
                vals[base + j * stride] = acc;
                acc += line[(j + w) % n] - line[j];
            }
        }
    }
    vals
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThicknessWitness {
    /// Sample index, absent for time-averaged checks.
    pub sample: Option<usize>,
    pub time: f64,
    /// Lower corner of the worst window.
    pub anchor: Vec<f64>,
    /// `|Ω ∩ window| / |window|` at the anchor.
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThicknessDecision {
    pub holds: bool,
    pub rho: f64,
    /// Snapped window side lengths actually used.
    pub window: Vec<f64>,
    pub min_fraction: f64,
    /// Worst window; present whenever the decision is false.
    pub witness: Option<ThicknessWitness>,
}

fn argmin(vals: &[f64]) -> (usize, f64) {
    vals.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) })
}

fn snapped(grid: &GridSpec, cells: &[usize]) -> Vec<f64> {
    cells.iter().map(|&c| c as f64 * grid.spacing()).collect()
}

/// `min_x |Ω ∩ (x + ∏(0, L_i))| / ∏ L_i` over lattice anchors, windows snapped to whole cells.
pub fn thickness_profile(set: &ObservationSet, sides: &[f64]) -> Result<f64> {
    let cells = window_cells(&set.grid, sides)?;
    let total: usize = cells.iter().product();
    let counts = window_counts(set, &cells);
    Ok(argmin(&counts).1 / total as f64)
}

/// Every sample is `(L, ρ)`-thick.
pub fn is_uniformly_thick(fam: &SetFamily, sides: &[f64], rho: f64) -> Result<ThicknessDecision> {
    let grid = *fam.grid();
    let cells = window_cells(&grid, sides)?;
    let total = cells.iter().product::<usize>() as f64;
    let per: Vec<(usize, f64)> = fam
        .sets
        .par_iter()
        .map(|s| {
            let (i, v) = argmin(&window_counts(s, &cells));
            (i, v / total)
        })
        .collect();
    let (j, &(anchor, frac)) = per
        .iter()
        .enumerate()
        .fold((0, &per[0]), |best, cur| if cur.1 .1 < best.1 .1 { cur } else { best });
    let holds = per.iter().all(|&(_, f)| f >= rho);
    let d = grid.dim();
    Ok(ThicknessDecision {
        holds,
        rho,
        window: snapped(&grid, &cells),
        min_fraction: frac,
        witness: (!holds).then(|| ThicknessWitness {
            sample: Some(j),
            time: fam.breakpoints()[j],
            anchor: grid.point(anchor)[..d].to_vec(),
            fraction: frac,
        }),
    })
}

/// Time average of window measures is at least `ρ ∏ L_i` at every anchor.
pub fn is_mean_thick(fam: &SetFamily, sides: &[f64], rho: f64) -> Result<ThicknessDecision> {
    let grid = *fam.grid();
    let cells = window_cells(&grid, sides)?;
    let total = cells.iter().product::<usize>() as f64;
    let n = fam.sets.len() as f64;
    let mut avg = vec![0.0; grid.len()];
    for s in &fam.sets {
        for (a, c) in avg.iter_mut().zip(window_counts(s, &cells)) {
            *a += c / n;
        }
    }
    let (anchor, v) = argmin(&avg);
    let frac = v / total;
    let holds = frac >= rho;
    let d = grid.dim();
    Ok(ThicknessDecision {
        holds,
        rho,
        window: snapped(&grid, &cells),
        min_fraction: frac,
        witness: (!holds).then(|| ThicknessWitness {
            sample: None,
            time: 0.0,
            anchor: grid.point(anchor)[..d].to_vec(),
            fraction: frac,
        }),
    })
}

/// `1_Ω f`.
pub fn restrict(f: &Field, set: &ObservationSet) -> Result<Field> {
    if f.grid() != set.grid() {
        return usage("field and observation set live on different grids");
    }
    let mut out = f.clone();
    for (v, &m) in out.values_mut().iter_mut().zip(&set.mask) {
        if !m {
            *v = num_complex::Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> GridSpec {
        GridSpec::new(1, 16.0, 512).unwrap()
    }

    #[test]
    fn stripes_have_half_density() {
        let set = periodic_stripes(line(), 0, 1.0, 0.5, 0.0).unwrap();
        assert_eq!(set.cell_count(), 256);
        assert_eq!(thickness_profile(&set, &[1.0]).unwrap(), 0.5);
        // Any window of length 1/2 can miss the set completely.
        assert_eq!(thickness_profile(&set, &[0.5]).unwrap(), 0.0);
    }

    #[test]
    fn full_and_empty() {
        let g = GridSpec::new(2, 4.0, 32).unwrap();
        for l in [0.25, 1.0, 8.0] {
            assert_eq!(thickness_profile(&ObservationSet::full(g), &[l, l]).unwrap(), 1.0);
            assert_eq!(thickness_profile(&ObservationSet::empty(g), &[l, l]).unwrap(), 0.0);
        }
    }

    #[test]
    fn oversized_window_is_rejected() {
        assert!(thickness_profile(&ObservationSet::full(line()), &[33.0]).is_err());
        assert!(thickness_profile(&ObservationSet::full(line()), &[0.0]).is_err());
    }

    #[test]
    fn wrapping_box() {
        let g = line();
        let set = ObservationSet::from_boxes(g, &[BoxRegion { lo: vec![15.0], hi: vec![17.0] }]).unwrap();
        assert_eq!(set.measure(), 2.0);
        assert!(set.contains(0) && set.contains(511));
    }

    #[test]
    fn halfline_family_is_mean_not_uniform() {
        let fam = halfline_family(line(), 1.0).unwrap();
        for s in fam.samples() {
            assert_eq!(s.measure(), 16.0);
        }
        for l in [0.5, 1.0, 4.0, 16.0] {
            assert!(is_mean_thick(&fam, &[l], 0.5).unwrap().holds);
            let u = is_uniformly_thick(&fam, &[l], 1e-9).unwrap();
            assert!(!u.holds);
            let w = u.witness.unwrap();
            let vacated_right = w.sample == Some(1) && w.anchor[0] >= 0.0;
            let vacated_left = w.sample == Some(0) && w.anchor[0] + l <= 0.0;
            assert!(vacated_right || vacated_left, "{w:?}");
        }
    }

    #[test]
    fn restriction_masks() {
        let g = line();
        let f = Field::from_real_fn(g, |x| (x[0] / 3.0).cos() + 2.0);
        let r = restrict(&f, &ObservationSet::full(g)).unwrap();
        assert_eq!(r, f);
        assert_eq!(restrict(&f, &ObservationSet::empty(g)).unwrap().max_abs(), 0.0);
    }
}
