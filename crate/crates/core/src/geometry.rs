//! Axis-aligned boxes, the overlapping Cartesian decomposition, and uniform
//! point grids.

use crate::calculus::MAX_DIM;
use crate::error::{Error, Result};

/// Closed axis-aligned box `[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > MAX_DIM {
            return Err(Error::InvalidGeometry(format!(
                "box bounds must have equal length in 1..={MAX_DIM}, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (axis, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidGeometry(format!(
                    "degenerate box on axis {axis}: [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 1]^dim`
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("unit box")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self, axis: usize) -> f64 {
        0.5 * (self.hi[axis] + self.lo[axis])
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&l, &h))| l <= xi && xi <= h)
    }

    /// Maps `x` affinely so the box becomes `[-1, 1]^d`; extrapolates outside.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (x[i] - self.center(i)) * self.normalization_scale(i))
            .collect()
    }

    /// Inverse of [`Aabb::normalize`].
    pub fn denormalize(&self, xhat: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.center(i) + xhat[i] / self.normalization_scale(i))
            .collect()
    }

    /// `d xhat_i / d x_i = 2 / w_i`, the chain-rule factor of the normalization.
    pub fn normalization_scale(&self, axis: usize) -> f64 {
        2.0 / self.width(axis)
    }

    /// True when the two boxes share a set of positive volume. Overlaps
    /// narrower than `1e-12` of the smaller width count as touching only.
    pub fn interiors_intersect(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|i| {
            let lo = self.lo[i].max(other.lo[i]);
            let hi = self.hi[i].min(other.hi[i]);
            let tol = 1e-12 * self.width(i).min(other.width(i));
            hi - lo > tol
        })
    }
}

/// Overlapping tensor-product decomposition of a box.
///
/// Subdomains are numbered lexicographically with the last axis varying
/// fastest. Boxes are not clipped to the domain.
#[derive(Debug, Clone)]
pub struct CartesianDecomposition {
    domain: Aabb,
    counts: Vec<usize>,
    overlap: f64,
    subdomains: Vec<Aabb>,
    centers: Vec<Vec<f64>>,
    half_widths: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
    // per axis: (centers, half-width) of the one-dimensional subdivision
    axis_layout: Vec<(Vec<f64>, f64)>,
}

impl CartesianDecomposition {
    /// Builds `prod(counts)` subdomains. Along an axis with `l >= 2` pieces the
    /// `k`-th interval is `[(k - overlap/2)/(l-1), (k + overlap/2)/(l-1)]` in
    /// unit coordinates, mapped affinely onto the domain; `l = 1` yields the
    /// whole axis.
    pub fn new(domain: Aabb, counts: &[usize], overlap: f64) -> Result<Self> {
        if counts.len() != domain.dim() {
            return Err(Error::InvalidGeometry(format!(
                "{} subdomain counts for a {}-dimensional domain",
                counts.len(),
                domain.dim()
            )));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidGeometry(
                "subdomain counts must be positive".into(),
            ));
        }
        if !(overlap > 1.0) || !overlap.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "overlap ratio must exceed 1, got {overlap}"
            )));
        }

        let axis_layout: Vec<(Vec<f64>, f64)> = counts
            .iter()
            .enumerate()
            .map(|(axis, &l)| {
                let lo = domain.lo()[axis];
                let w = domain.width(axis);
                if l == 1 {
                    (vec![domain.center(axis)], 0.5 * w)
                } else {
                    let step = 1.0 / (l - 1) as f64;
                    let centers = (0..l).map(|k| lo + w * (k as f64 * step)).collect();
                    (centers, w * 0.5 * overlap * step)
                }
            })
            .collect();

        let total: usize = counts.iter().product();
        let mut subdomains = Vec::with_capacity(total);
        let mut centers = Vec::with_capacity(total);
        let mut half_widths = Vec::with_capacity(total);
        for j in 0..total {
            let idx = multi_index(j, counts);
            let c: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(a, &k)| axis_layout[a].0[k])
                .collect();
            let hw: Vec<f64> = (0..counts.len()).map(|a| axis_layout[a].1).collect();
            let lo = c.iter().zip(&hw).map(|(c, h)| c - h).collect();
            let hi = c.iter().zip(&hw).map(|(c, h)| c + h).collect();
            subdomains.push(Aabb::new(lo, hi)?);
            centers.push(c);
            half_widths.push(hw);
        }

        let neighbors = (0..total)
            .map(|i| {
                (0..total)
                    .filter(|&j| subdomains[i].interiors_intersect(&subdomains[j]))
                    .collect()
            })
            .collect();

        Ok(Self {
            domain,
            counts: counts.to_vec(),
            overlap,
            subdomains,
            centers,
            half_widths,
            neighbors,
            axis_layout,
        })
    }

    pub fn domain(&self) -> &Aabb {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// Number of subdomains `J`.
    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn subdomain(&self, j: usize) -> &Aabb {
        &self.subdomains[j]
    }

    pub fn subdomains(&self) -> &[Aabb] {
        &self.subdomains
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j]
    }

    pub fn half_width(&self, j: usize) -> &[f64] {
        &self.half_widths[j]
    }

    /// Subdomains whose box interior meets box `j`, including `j` itself.
    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn neighbor_sets(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    /// Whether the window along `axis` is a genuine bump (more than one piece).
    pub fn axis_is_split(&self, axis: usize) -> bool {
        self.counts[axis] > 1
    }

    /// All subdomains whose closed box contains `x`, in increasing order.
    pub fn covering(&self, x: &[f64]) -> Vec<usize> {
        let d = self.dim();
        let mut per_axis: [Vec<usize>; MAX_DIM] = Default::default();
        for a in 0..d {
            let (centers, hw) = &self.axis_layout[a];
            per_axis[a] = centers
                .iter()
                .enumerate()
                .filter(|(_, &c)| c - hw <= x[a] && x[a] <= c + hw)
                .map(|(k, _)| k)
                .collect();
            if per_axis[a].is_empty() {
                return Vec::new();
            }
        }
        let mut out = vec![0usize];
        for a in 0..d {
            let mut next = Vec::with_capacity(out.len() * per_axis[a].len());
            for &base in &out {
                for &k in &per_axis[a] {
                    next.push(base * self.counts[a] + k);
                }
            }
            out = next;
        }
        out
    }
}

/// Lexicographic multi-index of subdomain `j` (last axis fastest).
pub fn multi_index(mut j: usize, counts: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; counts.len()];
    for a in (0..counts.len()).rev() {
        idx[a] = j % counts[a];
        j /= counts[a];
    }
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Collocation,
    Test,
}

/// A flat list of points in `R^d`.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    kind: PointKind,
}

impl PointSet {
    pub fn from_points(dim: usize, points: &[Vec<f64>], kind: PointKind) -> Self {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            assert_eq!(p.len(), dim);
            coords.extend_from_slice(p);
        }
        Self { dim, coords, kind }
    }

    /// Cell-centered tensor grid: along an axis of resolution `r` the
    /// coordinates are `lo + (k + 1/2) (hi - lo) / r`. Ordered lexicographically
    /// with the last axis fastest.
    pub fn uniform_grid(domain: &Aabb, resolutions: &[usize], kind: PointKind) -> Result<Self> {
        if resolutions.len() != domain.dim() || resolutions.contains(&0) {
            return Err(Error::InvalidGeometry(format!(
                "grid resolutions {resolutions:?} invalid for a {}-dimensional domain",
                domain.dim()
            )));
        }
        let d = domain.dim();
        let axes: Vec<Vec<f64>> = (0..d)
            .map(|a| {
                let r = resolutions[a];
                let h = domain.width(a) / r as f64;
                (0..r).map(|k| domain.lo()[a] + (k as f64 + 0.5) * h).collect()
            })
            .collect();
        let total: usize = resolutions.iter().product();
        let mut coords = Vec::with_capacity(total * d);
        for i in 0..total {
            let idx = multi_index(i, resolutions);
            for a in 0..d {
                coords.push(axes[a][idx[a]]);
            }
        }
        Ok(Self { dim: d, coords, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }
}
