//! Block-sparse collocation matrix `H = [H_1 ... H_J]`, its right-hand
//! sides, and the neighbor blocks of `H^T H`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{ConstrainingOperator, WindowSet};
use crate::calculus::{Jet2, JetField};
use crate::error::{Error, Result};
use crate::geometry::{CartesianDecomposition, PointSet};
use crate::krylov::Operator;
use crate::reduction::{points_in_box, ReducedLocalBasis};

type CustomOperator = Arc<dyn Fn(&[f64], &Jet2) -> f64 + Send + Sync>;

/// A linear second-order differential operator acting on jets.
#[derive(Clone)]
pub enum LinearOperatorSpec {
    /// `-Laplacian`.
    MinusLaplacian,
    /// `-Laplacian + 1`.
    ReactionDiffusion,
    /// `d/dt + d/dx - kappa d2/dx2` with axis 0 = x and axis 1 = t.
    AdvectionDiffusion { kappa: f64 },
    Custom(CustomOperator),
}

impl fmt::Debug for LinearOperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MinusLaplacian => write!(f, "MinusLaplacian"),
            Self::ReactionDiffusion => write!(f, "ReactionDiffusion"),
            Self::AdvectionDiffusion { kappa } => write!(f, "AdvectionDiffusion {{ kappa: {kappa} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl LinearOperatorSpec {
    pub fn apply(&self, x: &[f64], u: &Jet2) -> f64 {
        match self {
            Self::MinusLaplacian => -u.laplacian(),
            Self::ReactionDiffusion => u.value() - u.laplacian(),
            Self::AdvectionDiffusion { kappa } => u.grad(1) + u.grad(0) - kappa * u.hessian(0, 0),
            Self::Custom(f) => f(x, u),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    /// Global collocation indices of the block's rows, increasing.
    pub rows: Vec<usize>,
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub blocks: Vec<Block>,
    /// One right-hand side per solution component.
    pub rhs: Vec<Vec<f64>>,
    /// `column_offsets[j]..column_offsets[j + 1]` are the columns of block `j`.
    pub column_offsets: Vec<usize>,
    pub n_rows: usize,
}

/// Builds `H` and `F`: `H_j[i, k] = A[L w_j (V^T phi_j)_k](x_i)` and
/// `F_i = f(x_i) - A[G](x_i)` per component.
pub fn assemble(
    op: &LinearOperatorSpec,
    ws: &WindowSet,
    reduced: &[ReducedLocalBasis],
    cop: &ConstrainingOperator,
    sources: &[JetField],
    collocation: &PointSet,
) -> Result<BlockSystem> {
    let dec = ws.decomposition();
    if reduced.len() != dec.len() {
        return Err(Error::DimensionMismatch {
            expected: dec.len(),
            got: reduced.len(),
        });
    }
    if sources.len() != cop.components() {
        return Err(Error::DimensionMismatch {
            expected: cop.components(),
            got: sources.len(),
        });
    }
    if collocation.dim() != dec.dim() {
        return Err(Error::DimensionMismatch {
            expected: dec.dim(),
            got: collocation.dim(),
        });
    }
    let blocks = reduced
        .par_iter()
        .enumerate()
        .map(|(j, rlb)| assemble_block(op, ws, j, rlb, cop, collocation))
        .collect::<Result<Vec<_>>>()?;

    let rhs = (0..cop.components())
        .map(|c| {
            (0..collocation.len())
                .into_par_iter()
                .map(|i| {
                    let x = collocation.point(i);
                    let g = cop.g[c].jet(x);
                    let v = sources[c].value(x) - op.apply(x, &g);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite {
                            point: i,
                            subdomain: usize::MAX,
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut column_offsets = vec![0];
    for b in &blocks {
        column_offsets.push(column_offsets.last().unwrap() + b.values.ncols());
    }
    Ok(BlockSystem {
        blocks,
        rhs,
        column_offsets,
        n_rows: collocation.len(),
    })
}

fn assemble_block(
    op: &LinearOperatorSpec,
    ws: &WindowSet,
    j: usize,
    rlb: &ReducedLocalBasis,
    cop: &ConstrainingOperator,
    collocation: &PointSet,
) -> Result<Block> {
    let rows = points_in_box(ws, j, collocation);
    if rows.is_empty() {
        return Err(Error::EmptySubdomain { subdomain: j });
    }
    let bx = ws.decomposition().subdomain(j);
    let m = rlb.basis.neurons();
    // A is linear, so apply it to L w_j phi_k and project afterwards
    let raw_rows = rows
        .par_iter()
        .map_init(
            || Vec::with_capacity(m),
            |phi, &i| {
                let x = collocation.point(i);
                let factor = cop.l.jet(x) * ws.window_jet(j, x);
                rlb.basis.phi_jets_into(bx, x, phi);
                let row: Vec<f64> = phi.iter().map(|p| op.apply(x, &(factor * *p))).collect();
                if row.iter().all(|v| v.is_finite()) {
                    Ok(row)
                } else {
                    Err(Error::NonFinite { point: i, subdomain: j })
                }
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let raw = DMatrix::from_fn(rows.len(), m, |r, k| raw_rows[r][k]);
    let values = match &rlb.projection {
        None => raw,
        Some(v) => raw * v,
    };
    Ok(Block { rows, values })
}

impl BlockSystem {
    pub fn n_cols(&self) -> usize {
        *self.column_offsets.last().unwrap_or(&0)
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn components(&self) -> usize {
        self.rhs.len()
    }

    pub fn block_columns(&self, j: usize) -> std::ops::Range<usize> {
        self.column_offsets[j]..self.column_offsets[j + 1]
    }

    /// `H w`.
    pub fn matvec(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                got: w.len(),
            });
        }
        Ok(self.matvec_unchecked(w))
    }

    fn matvec_unchecked(&self, w: &[f64]) -> Vec<f64> {
        let parts: Vec<DVector<f64>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(j, b)| &b.values * DVector::from_column_slice(&w[self.block_columns(j)]))
            .collect();
        let mut y = vec![0.0; self.n_rows];
        for (b, part) in self.blocks.iter().zip(&parts) {
            for (&i, v) in b.rows.iter().zip(part.iter()) {
                y[i] += v;
            }
        }
        y
    }

    /// `H^T r`.
    pub fn matvec_transpose(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                got: r.len(),
            });
        }
        Ok(self.matvec_transpose_unchecked(r))
    }

    fn matvec_transpose_unchecked(&self, r: &[f64]) -> Vec<f64> {
        let parts: Vec<DVector<f64>> = self
            .blocks
            .par_iter()
            .map(|b| {
                let local = DVector::from_iterator(b.rows.len(), b.rows.iter().map(|&i| r[i]));
                b.values.tr_mul(&local)
            })
            .collect();
        let mut out = Vec::with_capacity(self.n_cols());
        for p in parts {
            out.extend(p.iter());
        }
        out
    }

    /// `H^T F` for component `c`.
    pub fn normal_rhs(&self, c: usize) -> Vec<f64> {
        self.matvec_transpose_unchecked(&self.rhs[c])
    }

    pub fn densify(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n_rows, self.n_cols());
        for (j, b) in self.blocks.iter().enumerate() {
            let c0 = self.column_offsets[j];
            for (r, &i) in b.rows.iter().enumerate() {
                for k in 0..b.values.ncols() {
                    h[(i, c0 + k)] = b.values[(r, k)];
                }
            }
        }
        h
    }

    /// Writes `H` as a header line `rows cols entries` followed by one-based
    /// `row col value` triples of the stored entries.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        let nnz: usize = self.blocks.iter().map(|b| b.values.len()).sum();
        let mut out = format!("{} {} {}\n", self.n_rows, self.n_cols(), nnz);
        for (j, b) in self.blocks.iter().enumerate() {
            let c0 = self.column_offsets[j];
            for (r, &i) in b.rows.iter().enumerate() {
                for k in 0..b.values.ncols() {
                    out.push_str(&format!("{} {} {:e}\n", i + 1, c0 + k + 1, b.values[(r, k)]));
                }
            }
        }
        write_text(path, &out)
    }

    /// `H^T H` as a matrix-free operator applied as two block products.
    pub fn normal_operator(&self) -> NormalOperator<'_> {
        NormalOperator { h: self }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// `w -> H^T (H w)`.
#[derive(Debug, Clone, Copy)]
pub struct NormalOperator<'a> {
    h: &'a BlockSystem,
}

impl Operator for NormalOperator<'_> {
    fn dim(&self) -> usize {
        self.h.n_cols()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.h.matvec_transpose_unchecked(&self.h.matvec_unchecked(x))
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
}

/// Dense neighbor blocks of `H^T H`, stored for `j1 <= j2`.
#[derive(Debug, Clone)]
pub struct NormalBlocks {
    pub blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
    pub column_offsets: Vec<usize>,
}

fn row_intersection(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let (mut ia, mut ib) = (Vec::new(), Vec::new());
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                ia.push(p);
                ib.push(q);
                p += 1;
                q += 1;
            }
        }
    }
    (ia, ib)
}

/// Computes `H_j1^T H_j2` over shared rows for every neighbor pair.
pub fn normal_blocks(h: &BlockSystem, dec: &CartesianDecomposition) -> Result<NormalBlocks> {
    if dec.len() != h.n_blocks() {
        return Err(Error::DimensionMismatch {
            expected: dec.len(),
            got: h.n_blocks(),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..dec.len())
        .flat_map(|j1| dec.neighbors(j1).iter().filter(move |&&j2| j2 >= j1).map(move |&j2| (j1, j2)))
        .collect();
    let blocks = pairs
        .par_iter()
        .map(|&(j1, j2)| {
            let (b1, b2) = (&h.blocks[j1], &h.blocks[j2]);
            let m = if j1 == j2 {
                b1.values.tr_mul(&b1.values)
            } else {
                let (r1, r2) = row_intersection(&b1.rows, &b2.rows);
                let s1 = b1.values.select_rows(r1.iter());
                let s2 = b2.values.select_rows(r2.iter());
                s1.tr_mul(&s2)
            };
            ((j1, j2), m)
        })
        .collect();
    Ok(NormalBlocks {
        blocks,
        column_offsets: h.column_offsets.clone(),
    })
}

impl NormalBlocks {
    pub fn n_cols(&self) -> usize {
        *self.column_offsets.last().unwrap_or(&0)
    }

    /// Block `(j1, j2)`, or `None` if the two subdomains are not neighbors.
    pub fn get(&self, j1: usize, j2: usize) -> Option<DMatrix<f64>> {
        if j1 <= j2 {
            self.blocks.get(&(j1, j2)).cloned()
        } else {
            self.blocks.get(&(j2, j1)).map(|m| m.transpose())
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.n_cols();
        let mut a = DMatrix::zeros(p, p);
        for (&(j1, j2), m) in &self.blocks {
            let (r0, c0) = (self.column_offsets[j1], self.column_offsets[j2]);
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    a[(r0 + r, c0 + c)] = m[(r, c)];
                    a[(c0 + c, r0 + r)] = m[(r, c)];
                }
            }
        }
        a
    }

    /// Dense export in the same triplet format as [`BlockSystem::write_triplets`].
    pub fn write_dense(&self, path: &Path, limit: usize) -> Result<()> {
        let p = self.n_cols();
        if p > limit {
            return Err(Error::DenseLimit { size: p, limit });
        }
        let a = self.to_dense();
        let mut out = format!("{p} {p} {}\n", p * p);
        for r in 0..p {
            for c in 0..p {
                out.push_str(&format!("{} {} {:e}\n", r + 1, c + 1, a[(r, c)]));
            }
        }
        write_text(path, &out)
    }
}
