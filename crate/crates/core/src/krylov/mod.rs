//! Iterative solvers for the (preconditioned) normal equations, plus the
//! dense kernels they are checked against.
//!
//! Every solver stops on the left-preconditioned relative residual
//! `||M^-1 (b - A x)|| / ||M^-1 b||`. CG uses the standard preconditioned
//! recurrence; CGS and BiCG run unpreconditioned on `M^-1 A x = M^-1 b`;
//! GMRES is left-preconditioned with modified Gram-Schmidt and Givens
//! rotations.

pub mod dense;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dense::{
    condition_from_singular_values, condition_number, qr_least_squares, singular_values,
    spectrum, svd_right, PivotedQr, SymmetricPinv, DEFAULT_DENSE_LIMIT,
};

/// A linear map on `R^n` that can also apply its transpose.
pub trait Operator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64>;

    /// True when `apply` is known to be a symmetric map. Diagnostics use it
    /// to pick a symmetric eigensolver.
    fn is_symmetric(&self) -> bool {
        false
    }
}

/// `M^-1 = I`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl Operator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<f64>);

impl Operator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y = &self.0 * nalgebra::DVector::from_column_slice(x);
        y.as_slice().to_vec()
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let y = self.0.tr_mul(&nalgebra::DVector::from_column_slice(x));
        y.as_slice().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    QrDirect,
    Cg,
    Cgs,
    Bicg,
    #[default]
    Gmres,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::QrDirect => "qr_direct",
            SolverKind::Cg => "cg",
            SolverKind::Cgs => "cgs",
            SolverKind::Bicg => "bicg",
            SolverKind::Gmres => "gmres",
        }
    }
}

/// Default Krylov basis memory cap, in `f64` entries (1 GiB).
pub const DEFAULT_BASIS_CAP: usize = 1 << 27;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub rel_tol: f64,
    /// `None` means `10 * n`.
    pub max_iter: Option<usize>,
    /// GMRES restart length; `None` runs full GMRES.
    pub restart: Option<usize>,
    pub basis_cap: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-5,
            max_iter: None,
            restart: None,
            basis_cap: DEFAULT_BASIS_CAP,
        }
    }
}

impl SolveConfig {
    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_iter == Some(0) || self.restart == Some(0) {
            return Err(Error::InvalidArgument("max_iter and restart must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `||M^-1 r_k|| / ||M^-1 b||`, starting with `k = 0`.
    pub residual_history: Vec<f64>,
    /// `||r_k|| / ||b||`, same indexing.
    pub true_residual_history: Vec<f64>,
    pub converged: bool,
    pub breakdown: bool,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub final_preconditioned_residual: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_dims(a: &dyn Operator, m: &dyn Operator, b: &[f64]) -> Result<()> {
    if a.dim() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.len(),
        });
    }
    if m.dim() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: m.dim(),
        });
    }
    Ok(())
}

struct Tracker<'a> {
    a: &'a dyn Operator,
    b: &'a [f64],
    bnorm: f64,
    report: SolveReport,
}

impl<'a> Tracker<'a> {
    fn new(a: &'a dyn Operator, b: &'a [f64]) -> Self {
        let mut report = SolveReport::default();
        report.residual_history.push(1.0);
        report.true_residual_history.push(1.0);
        Self {
            a,
            b,
            bnorm: norm(b),
            report,
        }
    }

    fn true_residual(&self, x: &[f64]) -> f64 {
        let ax = self.a.apply(x);
        let r: f64 = ax
            .iter()
            .zip(self.b)
            .map(|(p, q)| (q - p) * (q - p))
            .sum::<f64>()
            .sqrt();
        r / self.bnorm
    }

    fn record(&mut self, rel: f64, x: &[f64]) {
        let t = self.true_residual(x);
        self.record_with(rel, t);
    }

    fn record_with(&mut self, rel: f64, true_rel: f64) {
        self.report.iterations += 1;
        self.report.residual_history.push(rel);
        self.report.true_residual_history.push(true_rel);
    }

    fn finish(mut self, x: Vec<f64>, converged: bool, started: Instant) -> SolveReport {
        self.report.final_preconditioned_residual =
            *self.report.residual_history.last().unwrap_or(&f64::NAN);
        self.report.converged = converged;
        self.report.solution = x;
        self.report.solve_seconds = started.elapsed().as_secs_f64();
        self.report
    }
}

fn zero_rhs(n: usize, started: Instant) -> SolveReport {
    SolveReport {
        solution: vec![0.0; n],
        residual_history: vec![0.0],
        true_residual_history: vec![0.0],
        converged: true,
        solve_seconds: started.elapsed().as_secs_f64(),
        ..Default::default()
    }
}

/// Preconditioned conjugate gradients; `m` should be symmetric positive
/// (semi)definite.
pub fn cg(a: &dyn Operator, m: &dyn Operator, b: &[f64], cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    check_dims(a, m, b)?;
    let started = Instant::now();
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = m.apply(&r);
    let z0 = norm(&z);
    if norm(b) == 0.0 || z0 == 0.0 {
        return Ok(zero_rhs(n, started));
    }
    let mut tr = Tracker::new(a, b);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let max_iter = cfg.max_iter_for(n);
    let mut converged = false;
    for _ in 0..max_iter {
        let q = a.apply(&p);
        let pq = dot(&p, &q);
        if pq == 0.0 || !pq.is_finite() || rz == 0.0 {
            tr.report.breakdown = true;
            break;
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        z = m.apply(&r);
        let rel = norm(&z) / z0;
        let true_rel = norm(&r) / tr.bnorm;
        tr.record_with(rel, true_rel);
        if rel <= cfg.rel_tol {
            converged = true;
            break;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(tr.finish(x, converged, started))
}

/// `M^-1 A` as a single operator.
struct LeftPreconditioned<'a> {
    a: &'a dyn Operator,
    m: &'a dyn Operator,
}

impl Operator for LeftPreconditioned<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.m.apply(&self.a.apply(x))
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        self.a.apply_transpose(&self.m.apply_transpose(x))
    }
}

/// Conjugate gradients squared on the left-preconditioned system.
pub fn cgs(a: &dyn Operator, m: &dyn Operator, b: &[f64], cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    check_dims(a, m, b)?;
    let started = Instant::now();
    let n = b.len();
    let op = LeftPreconditioned { a, m };
    let c = m.apply(b);
    let c0 = norm(&c);
    if norm(b) == 0.0 || c0 == 0.0 {
        return Ok(zero_rhs(n, started));
    }
    let mut tr = Tracker::new(a, b);
    let mut x = vec![0.0; n];
    let mut r = c.clone();
    let rhat = c.clone();
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut rho_prev = 1.0;
    let mut converged = false;
    for it in 0..cfg.max_iter_for(n) {
        let rho = dot(&rhat, &r);
        if rho == 0.0 || !rho.is_finite() {
            tr.report.breakdown = true;
            break;
        }
        if it == 0 {
            u.copy_from_slice(&r);
            p.copy_from_slice(&r);
        } else {
            let beta = rho / rho_prev;
            for i in 0..n {
                u[i] = r[i] + beta * q[i];
                p[i] = u[i] + beta * (q[i] + beta * p[i]);
            }
        }
        let vhat = op.apply(&p);
        let sigma = dot(&rhat, &vhat);
        if sigma == 0.0 || !sigma.is_finite() {
            tr.report.breakdown = true;
            break;
        }
        let alpha = rho / sigma;
        for i in 0..n {
            q[i] = u[i] - alpha * vhat[i];
        }
        let uq: Vec<f64> = u.iter().zip(&q).map(|(a, b)| a + b).collect();
        axpy(alpha, &uq, &mut x);
        let buq = op.apply(&uq);
        axpy(-alpha, &buq, &mut r);
        rho_prev = rho;
        let rel = norm(&r) / c0;
        tr.record(rel, &x);
        if rel <= cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(tr.finish(x, converged, started))
}

/// Biconjugate gradients on the left-preconditioned system; needs
/// transposed applications of both `A` and `M^-1`.
pub fn bicg(a: &dyn Operator, m: &dyn Operator, b: &[f64], cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    check_dims(a, m, b)?;
    let started = Instant::now();
    let n = b.len();
    let op = LeftPreconditioned { a, m };
    let c = m.apply(b);
    let c0 = norm(&c);
    if norm(b) == 0.0 || c0 == 0.0 {
        return Ok(zero_rhs(n, started));
    }
    let mut tr = Tracker::new(a, b);
    let mut x = vec![0.0; n];
    let mut r = c.clone();
    let mut rt = c.clone();
    let mut p = r.clone();
    let mut pt = rt.clone();
    let mut rho = dot(&rt, &r);
    let mut converged = false;
    for _ in 0..cfg.max_iter_for(n) {
        let q = op.apply(&p);
        let qt = op.apply_transpose(&pt);
        let denom = dot(&pt, &q);
        if denom == 0.0 || !denom.is_finite() || rho == 0.0 {
            tr.report.breakdown = true;
            break;
        }
        let alpha = rho / denom;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        axpy(-alpha, &qt, &mut rt);
        let rel = norm(&r) / c0;
        tr.record(rel, &x);
        if rel <= cfg.rel_tol {
            converged = true;
            break;
        }
        let rho_new = dot(&rt, &r);
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
            pt[i] = rt[i] + beta * pt[i];
        }
    }
    Ok(tr.finish(x, converged, started))
}

/// Left-preconditioned GMRES, full by default or restarted.
///
/// The products `A v_j` are kept next to the Arnoldi basis so the
/// unpreconditioned residual is available without extra operator calls.
pub fn gmres(a: &dyn Operator, m: &dyn Operator, b: &[f64], cfg: &SolveConfig) -> Result<SolveReport> {
    cfg.validate()?;
    check_dims(a, m, b)?;
    let started = Instant::now();
    let n = b.len();
    let max_iter = cfg.max_iter_for(n);
    let cycle = cfg.restart.unwrap_or(max_iter).min(max_iter);
    let needed = (2 * cycle + 1).saturating_mul(n);
    if needed > cfg.basis_cap {
        return Err(Error::KrylovMemory {
            needed,
            cap: cfg.basis_cap,
        });
    }
    let c = m.apply(b);
    let c0 = norm(&c);
    if norm(b) == 0.0 || c0 == 0.0 {
        return Ok(zero_rhs(n, started));
    }
    let mut tr = Tracker::new(a, b);
    let mut x = vec![0.0; n];
    let mut converged = false;
    let mut total = 0usize;

    'outer: while total < max_iter {
        let (r_true, r0) = if total == 0 {
            (b.to_vec(), c.clone())
        } else {
            let ax = a.apply(&x);
            let res: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
            let pre = m.apply(&res);
            (res, pre)
        };
        let beta = norm(&r0);
        if beta / c0 <= cfg.rel_tol {
            converged = true;
            break;
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cycle + 1);
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(cycle);
        basis.push(r0.iter().map(|v| v / beta).collect());
        // columns of the rotated Hessenberg matrix (upper triangular part)
        let mut rcols: Vec<Vec<f64>> = Vec::with_capacity(cycle);
        let mut cs: Vec<f64> = Vec::with_capacity(cycle);
        let mut sn: Vec<f64> = Vec::with_capacity(cycle);
        let mut g = vec![beta];

        for j in 0..cycle {
            let av = a.apply(&basis[j]);
            let mut w = m.apply(&av);
            images.push(av);
            let wnorm0 = norm(&w);
            let mut h = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let hnext = norm(&w);
            h[j + 1] = hnext;
            for i in 0..j {
                let (hi, hi1) = (h[i], h[i + 1]);
                h[i] = cs[i] * hi + sn[i] * hi1;
                h[i + 1] = -sn[i] * hi + cs[i] * hi1;
            }
            let denom = h[j].hypot(h[j + 1]);
            let (c_j, s_j) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (h[j] / denom, h[j + 1] / denom)
            };
            h[j] = denom;
            h[j + 1] = 0.0;
            cs.push(c_j);
            sn.push(s_j);
            let gj = g[j];
            g[j] = c_j * gj;
            g.push(-s_j * gj);
            h.truncate(j + 1);
            rcols.push(h);
            total += 1;

            let happy = hnext <= 1e-14 * wnorm0;
            if !happy {
                basis.push(w.iter().map(|v| v / hnext).collect());
            }
            let y = if denom == 0.0 {
                None
            } else {
                Some(back_substitute(&rcols, &g))
            };
            let rel = g[j + 1].abs() / c0;
            let true_rel = match &y {
                Some(y) => {
                    let mut r = r_true.clone();
                    for (yi, av) in y.iter().zip(&images) {
                        axpy(-yi, av, &mut r);
                    }
                    norm(&r) / tr.bnorm
                }
                None => *tr.report.true_residual_history.last().unwrap(),
            };
            tr.record_with(rel, true_rel);
            let done = rel <= cfg.rel_tol || happy || denom == 0.0;
            if done || j + 1 == cycle || total >= max_iter {
                match y {
                    Some(y) => {
                        for (yi, v) in y.iter().zip(&basis) {
                            axpy(*yi, v, &mut x);
                        }
                    }
                    None => tr.report.breakdown = true,
                }
                if done {
                    converged = rel <= cfg.rel_tol || (happy && denom != 0.0);
                    break 'outer;
                }
                break;
            }
        }
    }
    Ok(tr.finish(x, converged, started))
}

fn back_substitute(rcols: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let k = rcols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= rcols[j][i] * y[j];
        }
        y[i] = s / rcols[i][i];
    }
    y
}

/// Dispatches on `kind`; `QrDirect` is not an iterative method and is
/// rejected here.
pub fn solve(
    kind: SolverKind,
    a: &dyn Operator,
    m: &dyn Operator,
    b: &[f64],
    cfg: &SolveConfig,
) -> Result<SolveReport> {
    match kind {
        SolverKind::Cg => cg(a, m, b, cfg),
        SolverKind::Cgs => cgs(a, m, b, cfg),
        SolverKind::Bicg => bicg(a, m, b, cfg),
        SolverKind::Gmres => gmres(a, m, b, cfg),
        SolverKind::QrDirect => Err(Error::InvalidArgument(
            "qr_direct is a direct solver; use qr_least_squares".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
        a.clone()
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(b))
            .unwrap()
            .as_slice()
            .to_vec()
    }

    fn rel_err(x: &[f64], y: &[f64]) -> f64 {
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        d / norm(y)
    }

    fn tight() -> SolveConfig {
        SolveConfig {
            rel_tol: 1e-12,
            ..Default::default()
        }
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = [1.0, 2.0, -3.0];
        for kind in [SolverKind::Cg, SolverKind::Cgs, SolverKind::Bicg, SolverKind::Gmres] {
            let rep = solve(kind, &Identity(3), &Identity(3), &b, &SolveConfig::default()).unwrap();
            assert_eq!(rep.iterations, 1, "{kind:?}");
            assert!(rep.converged);
            assert!(rel_err(&rep.solution, &b) < 1e-14);
        }
    }

    #[test]
    fn spd_systems_match_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = spd(&mut rng, 4);
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = dense_solve(&a, &b);
        let op = DenseOperator(a);
        for kind in [SolverKind::Cg, SolverKind::Cgs, SolverKind::Bicg, SolverKind::Gmres] {
            let rep = solve(kind, &op, &Identity(4), &b, &tight()).unwrap();
            assert!(rep.converged, "{kind:?}");
            assert!(rel_err(&rep.solution, &exact) <= 1e-8, "{kind:?}");
            assert_eq!(rep.residual_history.len(), rep.iterations + 1);
        }
    }

    #[test]
    fn gmres_nonsymmetric_two_by_two() {
        let a = DenseOperator(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]));
        let rep = gmres(&a, &Identity(2), &[1.0, 1.0], &tight()).unwrap();
        assert!(rep.iterations <= 2);
        assert!((rep.solution[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((rep.solution[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_preconditioner_takes_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let a = spd(&mut rng, 6);
        let inv = a.clone().try_inverse().unwrap();
        let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        for kind in [SolverKind::Cg, SolverKind::Gmres] {
            let rep = solve(kind, &DenseOperator(a.clone()), &DenseOperator(inv.clone()), &b, &SolveConfig::default())
                .unwrap();
            assert_eq!(rep.iterations, 1, "{kind:?}");
        }
    }

    #[test]
    fn gmres_residuals_never_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 30;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j { 4.0 } else { rng.random_range(-0.3..0.3) }
        });
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for restart in [None, Some(5)] {
            let cfg = SolveConfig {
                rel_tol: 1e-10,
                restart,
                ..Default::default()
            };
            let rep = gmres(&DenseOperator(a.clone()), &Identity(n), &b, &cfg).unwrap();
            assert!(rep.converged);
            let ax = &a * nalgebra::DVector::from_column_slice(&rep.solution);
            let r: Vec<f64> = b.iter().zip(ax.iter()).map(|(p, q)| p - q).collect();
            let tracked = *rep.true_residual_history.last().unwrap();
            assert!((norm(&r) / norm(&b) - tracked).abs() <= 1e-12);
            for w in rep.residual_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn cg_energy_error_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let a = spd(&mut rng, 12);
        let b: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let exact = dense_solve(&a, &b);
        let mut last = f64::INFINITY;
        for k in 1..12 {
            let cfg = SolveConfig {
                rel_tol: 1e-300,
                max_iter: Some(k),
                ..Default::default()
            };
            let rep = cg(&DenseOperator(a.clone()), &Identity(12), &b, &cfg).unwrap();
            let e: Vec<f64> = rep.solution.iter().zip(&exact).map(|(p, q)| p - q).collect();
            let ae = &a * nalgebra::DVector::from_column_slice(&e);
            let energy = dot(&e, ae.as_slice());
            assert!(energy <= last * (1.0 + 1e-10) + 1e-20);
            last = energy;
        }
    }

    #[test]
    fn zero_rhs_and_errors() {
        let rep = gmres(&Identity(3), &Identity(3), &[0.0; 3], &SolveConfig::default()).unwrap();
        assert!(rep.converged && rep.solution == vec![0.0; 3]);
        assert!(gmres(&Identity(3), &Identity(3), &[1.0; 2], &SolveConfig::default()).is_err());
        let cfg = SolveConfig {
            basis_cap: 10,
            ..Default::default()
        };
        assert!(matches!(
            gmres(&Identity(3), &Identity(3), &[1.0; 3], &cfg),
            Err(Error::KrylovMemory { .. })
        ));
        assert!(solve(SolverKind::QrDirect, &Identity(1), &Identity(1), &[1.0], &SolveConfig::default()).is_err());
    }

    #[test]
    fn left_preconditioning_agrees_with_plain_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let a = spd(&mut rng, 10);
        let diag = DMatrix::from_diagonal(&a.diagonal().map(|d| 1.0 / d));
        let b: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = SolveConfig {
            rel_tol: 1e-10,
            ..Default::default()
        };
        let plain = gmres(&DenseOperator(a.clone()), &Identity(10), &b, &cfg).unwrap();
        let pre = gmres(&DenseOperator(a), &DenseOperator(diag), &b, &cfg).unwrap();
        assert!(rel_err(&pre.solution, &plain.solution) <= 1e-6);
    }
}
