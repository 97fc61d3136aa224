//! One-level overlapping Schwarz preconditioners for `H^T H`.
//!
//! Subdomain `i` owns the columns generated by block `i`; its extended set
//! `S_i` adds the columns of every neighboring block. With `A_i` the
//! principal submatrix of `H^T H` on `S_i`:
//!
//! * AS:  `M^-1 = sum_i R_i^T A_i^+ R_i`
//! * SAS: `M^-1 = sum_i R_i^T D_i A_i^+ R_i`, `D_i = diag(1 / multiplicity)`
//! * RAS: as SAS with `D_i` selecting the columns owned by `i`
//!
//! `A_i^+` is formed from pivoted QR when `A_i` has full numerical rank and
//! from the truncated eigendecomposition otherwise. Both are stored as
//! symmetric matrices, so AS is symmetric to rounding.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::NormalBlocks;
use crate::error::{Error, Result};
use crate::geometry::CartesianDecomposition;
use crate::krylov::{Operator, PivotedQr, SymmetricPinv};

/// Relative pivot cutoff for a local factorization of order `n`:
/// `eps * n`, so a local matrix is inverted exactly unless it is singular to
/// working precision.
pub fn local_rcond(n: usize) -> f64 {
    f64::EPSILON * n.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreconditionerKind {
    None,
    #[default]
    As,
    Sas,
    Ras,
}

impl PreconditionerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::As => "as",
            Self::Sas => "sas",
            Self::Ras => "ras",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IndexSets {
    pub sets: Vec<Vec<usize>>,
    pub owner: Vec<usize>,
    pub multiplicity: Vec<usize>,
    /// Neighbor blocks making up each set, increasing.
    pub set_blocks: Vec<Vec<usize>>,
}

pub fn build_index_sets(dec: &CartesianDecomposition, column_offsets: &[usize]) -> Result<IndexSets> {
    let nblocks = dec.len();
    if column_offsets.len() != nblocks + 1 {
        return Err(Error::DimensionMismatch {
            expected: nblocks + 1,
            got: column_offsets.len(),
        });
    }
    let p = column_offsets[nblocks];
    let mut owner = vec![0; p];
    for j in 0..nblocks {
        owner[column_offsets[j]..column_offsets[j + 1]].fill(j);
    }
    let mut multiplicity = vec![0; p];
    let mut sets = Vec::with_capacity(nblocks);
    let mut set_blocks = Vec::with_capacity(nblocks);
    for i in 0..nblocks {
        let mut blocks = dec.neighbors(i).to_vec();
        blocks.sort_unstable();
        let set: Vec<usize> = blocks
            .iter()
            .flat_map(|&j| column_offsets[j]..column_offsets[j + 1])
            .collect();
        if set.is_empty() {
            return Err(Error::EmptyIndexSet { subdomain: i });
        }
        for &k in &set {
            multiplicity[k] += 1;
        }
        sets.push(set);
        set_blocks.push(blocks);
    }
    Ok(IndexSets {
        sets,
        owner,
        multiplicity,
        set_blocks,
    })
}

impl IndexSets {
    pub fn n_cols(&self) -> usize {
        self.owner.len()
    }

    /// Diagonal of `D_i` for each set.
    pub fn weights(&self, kind: PreconditionerKind) -> Vec<Vec<f64>> {
        self.sets
            .iter()
            .enumerate()
            .map(|(i, set)| {
                set.iter()
                    .map(|&k| match kind {
                        PreconditionerKind::None | PreconditionerKind::As => 1.0,
                        PreconditionerKind::Sas => 1.0 / self.multiplicity[k] as f64,
                        PreconditionerKind::Ras => {
                            if self.owner[k] == i {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Diagonal of `sum_i R_i^T D_i R_i`.
    pub fn weight_sum(&self, kind: PreconditionerKind) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols()];
        for (set, w) in self.sets.iter().zip(self.weights(kind)) {
            for (&k, wk) in set.iter().zip(w) {
                out[k] += wk;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct LocalSolver {
    set: Vec<usize>,
    weights: Vec<f64>,
    rank: usize,
    pivot_ratio: f64,
    rank_deficient: bool,
    /// `A_i^+`, stored explicitly and exactly symmetric.
    inverse: DMatrix<f64>,
}

impl LocalSolver {
    fn new(set: Vec<usize>, weights: Vec<f64>, a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let qr = PivotedQr::new(a, local_rcond(n))?;
        let inverse = if qr.is_full_rank() {
            // the exact inverse is symmetric; rounding in the solves is not
            let mut x = DMatrix::zeros(n, n);
            let mut e = vec![0.0; n];
            for k in 0..n {
                e[k] = 1.0;
                x.set_column(k, &DVector::from_vec(qr.solve(&e)));
                e[k] = 0.0;
            }
            (&x + x.transpose()) * 0.5
        } else {
            SymmetricPinv::new(a, qr.rank())?.to_matrix()
        };
        Ok(Self {
            set,
            weights,
            rank: qr.rank(),
            pivot_ratio: qr.pivot_ratio(),
            rank_deficient: !qr.is_full_rank(),
            inverse,
        })
    }

    fn solve(&self, v: &[f64]) -> Vec<f64> {
        (&self.inverse * DVector::from_column_slice(v)).as_slice().to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct SchwarzPreconditioner {
    kind: PreconditionerKind,
    index_sets: IndexSets,
    locals: Vec<LocalSolver>,
}

/// Gathers `(H^T H)[S_i, S_i]` from the stored neighbor blocks.
fn local_matrix(nb: &NormalBlocks, blocks: &[usize]) -> DMatrix<f64> {
    let offs = &nb.column_offsets;
    let sizes: Vec<usize> = blocks.iter().map(|&j| offs[j + 1] - offs[j]).collect();
    let n: usize = sizes.iter().sum();
    let mut a = DMatrix::zeros(n, n);
    let mut r0 = 0;
    for (bi, &j1) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (bj, &j2) in blocks.iter().enumerate() {
            if let Some(m) = nb.get(j1, j2) {
                a.view_mut((r0, c0), (sizes[bi], sizes[bj])).copy_from(&m);
            }
            c0 += sizes[bj];
        }
        r0 += sizes[bi];
    }
    a
}

impl SchwarzPreconditioner {
    pub fn build(kind: PreconditionerKind, nb: &NormalBlocks, index_sets: IndexSets) -> Result<Self> {
        if kind == PreconditionerKind::None {
            return Err(Error::InvalidArgument(
                "a Schwarz preconditioner needs kind as, sas or ras".into(),
            ));
        }
        if nb.n_cols() != index_sets.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: index_sets.n_cols(),
                got: nb.n_cols(),
            });
        }
        let weights = index_sets.weights(kind);
        let locals = index_sets
            .sets
            .par_iter()
            .zip(index_sets.set_blocks.par_iter())
            .zip(weights.into_par_iter())
            .map(|((set, blocks), weights)| {
                LocalSolver::new(set.clone(), weights, &local_matrix(nb, blocks))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            index_sets,
            locals,
        })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn index_sets(&self) -> &IndexSets {
        &self.index_sets
    }

    pub fn local_ranks(&self) -> Vec<usize> {
        self.locals.iter().map(|l| l.rank).collect()
    }

    /// Number of local matrices solved through the pseudo-inverse.
    pub fn rank_deficient_count(&self) -> usize {
        self.locals.iter().filter(|l| l.rank_deficient).count()
    }

    /// `M^-1 v`.
    pub fn apply_checked(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.index_sets.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.index_sets.n_cols(),
                got: v.len(),
            });
        }
        Ok(self.apply(v))
    }

    fn reduce(&self, parts: Vec<Vec<f64>>) -> Vec<f64> {
        let mut out = vec![0.0; self.index_sets.n_cols()];
        for (local, y) in self.locals.iter().zip(parts) {
            for (&k, v) in local.set.iter().zip(y) {
                out[k] += v;
            }
        }
        out
    }

    /// Writes `subdomain,size,rank,pivot_ratio` rows; the pivot ratio
    /// `|R_00| / |R_rr|` estimates the local condition number.
    pub fn write_diagnostics_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("subdomain,size,rank,pivot_ratio\n");
        for (i, l) in self.locals.iter().enumerate() {
            out.push_str(&format!("{i},{},{},{:e}\n", l.set.len(), l.rank, l.pivot_ratio));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

impl Operator for SchwarzPreconditioner {
    fn dim(&self) -> usize {
        self.index_sets.n_cols()
    }

    fn is_symmetric(&self) -> bool {
        self.kind == PreconditionerKind::As
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let parts = self
            .locals
            .par_iter()
            .map(|l| {
                let local: Vec<f64> = l.set.iter().map(|&k| v[k]).collect();
                let mut y = l.solve(&local);
                for (yi, w) in y.iter_mut().zip(&l.weights) {
                    *yi *= w;
                }
                y
            })
            .collect();
        self.reduce(parts)
    }

    fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let parts = self
            .locals
            .par_iter()
            .map(|l| {
                let local: Vec<f64> = l.set.iter().zip(&l.weights).map(|(&k, w)| w * v[k]).collect();
                l.solve(&local)
            })
            .collect();
        self.reduce(parts)
    }
}
