//! PCA truncation of each subdomain's local basis.
//!
//! The sample matrix of subdomain `j` holds `w_j(x_i) phi_j^k(x_i)` for the
//! collocation points inside box `j`. Its right singular vectors with
//! `sigma > tau` span the reduced basis `(V^T phi_j)_k`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{ConstrainingOperator, RandomBasis, WindowSet};
use crate::calculus::Jet2;
use crate::error::{Error, Result};
use crate::geometry::PointSet;

#[derive(Debug, Clone)]
pub struct SampleMatrix {
    pub values: DMatrix<f64>,
    pub point_indices: Vec<usize>,
}

/// Indices of the points inside box `j`, in point-set order.
pub fn points_in_box(ws: &WindowSet, j: usize, points: &PointSet) -> Vec<usize> {
    let bx = ws.decomposition().subdomain(j);
    (0..points.len()).filter(|&i| bx.contains(points.point(i))).collect()
}

pub fn build_sample_matrix(
    ws: &WindowSet,
    j: usize,
    basis: &RandomBasis,
    collocation: &PointSet,
) -> Result<SampleMatrix> {
    let rows = points_in_box(ws, j, collocation);
    build_sample_matrix_on(ws, j, basis, collocation, rows)
}

fn build_sample_matrix_on(
    ws: &WindowSet,
    j: usize,
    basis: &RandomBasis,
    collocation: &PointSet,
    rows: Vec<usize>,
) -> Result<SampleMatrix> {
    if rows.is_empty() {
        return Err(Error::EmptySubdomain { subdomain: j });
    }
    let bx = ws.decomposition().subdomain(j);
    let m = basis.neurons();
    let mut values = DMatrix::zeros(rows.len(), m);
    let mut phi = Vec::with_capacity(m);
    for (r, &i) in rows.iter().enumerate() {
        let x = collocation.point(i);
        let w = ws
            .window_values_at(x)
            .into_iter()
            .find(|&(k, _)| k == j)
            .map_or(0.0, |(_, w)| w);
        basis.phi_values_into(bx, x, &mut phi);
        for (k, p) in phi.iter().enumerate() {
            let v = w * p;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    point: i,
                    subdomain: j,
                });
            }
            values[(r, k)] = v;
        }
    }
    Ok(SampleMatrix {
        values,
        point_indices: rows,
    })
}

/// Singular-value cutoff for the PCA step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Keep every neuron; no SVD is applied to the basis.
    #[default]
    Off,
    /// Keep `sigma > tau`.
    Absolute(f64),
    /// Keep `sigma > tau * sigma_max`.
    Relative(f64),
}

impl Threshold {
    pub fn label(&self) -> String {
        match self {
            Threshold::Off => "off".into(),
            Threshold::Absolute(t) => format!("{t:e}"),
            Threshold::Relative(t) => format!("rel{t:e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedLocalBasis {
    pub basis: RandomBasis,
    /// `m x p_j` with orthonormal columns; `None` is the identity.
    pub projection: Option<DMatrix<f64>>,
    /// All singular values of the sample matrix, nonincreasing.
    pub singular_values: Vec<f64>,
}

impl ReducedLocalBasis {
    pub fn identity(basis: RandomBasis) -> Self {
        Self {
            basis,
            projection: None,
            singular_values: Vec::new(),
        }
    }

    pub fn reduced_size(&self) -> usize {
        self.projection
            .as_ref()
            .map_or(self.basis.neurons(), |v| v.ncols())
    }

    /// `V^T a` for a vector of per-neuron values.
    pub fn project(&self, a: &[f64]) -> Vec<f64> {
        match &self.projection {
            None => a.to_vec(),
            Some(v) => v.tr_mul(&DVector::from_column_slice(a)).as_slice().to_vec(),
        }
    }

    /// `V c` for reduced coefficients, giving per-neuron weights.
    pub fn expand(&self, c: &[f64]) -> Vec<f64> {
        match &self.projection {
            None => c.to_vec(),
            Some(v) => (v * DVector::from_column_slice(c)).as_slice().to_vec(),
        }
    }
}

fn svd_parts(values: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = values.ncols();
    let svd = SVD::new(values.clone(), false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(m, order.len());
    for (c, &i) in order.iter().enumerate() {
        for r in 0..m {
            v[(r, c)] = vt[(i, r)];
        }
        let first = (0..m).map(|r| v[(r, c)]).find(|x| *x != 0.0).unwrap_or(0.0);
        if first < 0.0 {
            for r in 0..m {
                v[(r, c)] = -v[(r, c)];
            }
        }
    }
    (sigma, v)
}

/// Reduced SVD of the sample matrix and selection of the leading right
/// singular vectors. At least one column is always kept.
pub fn truncate(sample: &SampleMatrix, basis: RandomBasis, threshold: Threshold) -> Result<ReducedLocalBasis> {
    let cutoff = match threshold {
        Threshold::Off => return Ok(ReducedLocalBasis::identity(basis)),
        Threshold::Absolute(t) | Threshold::Relative(t) if !(t >= 0.0) || !t.is_finite() => {
            return Err(Error::InvalidArgument(format!("threshold must be a finite nonnegative number, got {t}")));
        }
        Threshold::Absolute(t) => t,
        Threshold::Relative(t) => t,
    };
    if sample.values.ncols() != basis.neurons() {
        return Err(Error::DimensionMismatch {
            expected: basis.neurons(),
            got: sample.values.ncols(),
        });
    }
    let (sigma, v) = svd_parts(&sample.values);
    let cutoff = match threshold {
        Threshold::Relative(_) => cutoff * sigma.first().copied().unwrap_or(0.0),
        _ => cutoff,
    };
    let keep = sigma.iter().filter(|&&s| s > cutoff).count().max(1);
    Ok(ReducedLocalBasis {
        basis,
        projection: Some(v.columns(0, keep).into_owned()),
        singular_values: sigma,
    })
}

/// Builds the sample matrices and truncations for every subdomain in
/// parallel. Each subdomain draws its own basis from `(seed, j)`.
pub fn reduce_all(
    ws: &WindowSet,
    bases: Vec<RandomBasis>,
    collocation: &PointSet,
    threshold: Threshold,
) -> Result<Vec<ReducedLocalBasis>> {
    bases
        .into_par_iter()
        .enumerate()
        .map(|(j, basis)| {
            let rows = points_in_box(ws, j, collocation);
            if rows.is_empty() {
                return Err(Error::EmptySubdomain { subdomain: j });
            }
            if threshold == Threshold::Off {
                return Ok(ReducedLocalBasis::identity(basis));
            }
            let sample = build_sample_matrix_on(ws, j, &basis, collocation, rows)?;
            truncate(&sample, basis, threshold)
        })
        .collect()
}

/// Jets of `L w_j (V^T phi_j)_k` for `k < p_j`.
pub fn reduced_localized_jets(
    ws: &WindowSet,
    j: usize,
    rlb: &ReducedLocalBasis,
    cop: &ConstrainingOperator,
    x: &[f64],
) -> Vec<Jet2> {
    let full = crate::basis::localized_basis_jets(ws, j, &rlb.basis, cop, x);
    match &rlb.projection {
        None => full,
        Some(v) => (0..v.ncols())
            .map(|c| {
                let mut acc = Jet2::zero(x.len());
                for (r, jet) in full.iter().enumerate() {
                    acc.add_scaled(v[(r, c)], jet);
                }
                acc
            })
            .collect(),
    }
}

/// Writes `subdomain,index,sigma` rows.
pub fn write_singular_values_csv(path: &Path, bases: &[ReducedLocalBasis]) -> Result<()> {
    let mut out = String::from("subdomain,index,sigma\n");
    for (j, b) in bases.iter().enumerate() {
        for (k, s) in b.singular_values.iter().enumerate() {
            out.push_str(&format!("{j},{k},{s:e}\n"));
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
