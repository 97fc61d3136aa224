//! Dense kernels: Householder QR with column pivoting (with a complete
//! orthogonal decomposition for minimum-norm solves), singular values, and
//! eigenvalues (nonsymmetric ones through `faer`).

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default order limit for dense spectral diagnostics.
pub const DEFAULT_DENSE_LIMIT: usize = 4000;

/// `A P = Q R` by Householder reflections with column pivoting.
///
/// The reflectors are stored below the diagonal (LAPACK `geqp3` layout).
/// Diagonal entries of `R` below `rcond * |R_00|` mark the numerical rank;
/// the trailing block is then ignored. For rank-deficient factors a second
/// orthogonal factorization `[R11 R12]^T = Z [T; 0]` gives minimum-norm
/// solutions.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// column-major packed factor
    qr: Vec<f64>,
    tau: Vec<f64>,
    /// column `k` of `A P` is column `perm[k]` of `A`
    perm: Vec<usize>,
    rank: usize,
    cod: Option<Cod>,
}

#[derive(Debug, Clone)]
struct Cod {
    /// `cols x rank`, column-major: `[R11 R12]^T` after its own QR
    packed: Vec<f64>,
    tau: Vec<f64>,
}

#[inline]
fn householder(x: &mut [f64]) -> f64 {
    // x[0] is alpha; on exit x[0] = beta and x[1..] holds v[1..] (v[0] = 1)
    let alpha = x[0];
    let xnorm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if xnorm == 0.0 {
        return 0.0;
    }
    let beta = -alpha.signum() * alpha.hypot(xnorm);
    let beta = if beta == 0.0 { -xnorm } else { beta };
    let tau = (beta - alpha) / beta;
    let s = 1.0 / (alpha - beta);
    x[1..].iter_mut().for_each(|v| *v *= s);
    x[0] = beta;
    tau
}

/// Applies `I - tau v v^T` (with `v[0] = 1` implicit) to `y`.
#[inline]
fn reflect(v_tail: &[f64], tau: f64, y: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let mut s = y[0];
    for (a, b) in v_tail.iter().zip(&y[1..]) {
        s += a * b;
    }
    s *= tau;
    y[0] -= s;
    for (a, b) in v_tail.iter().zip(y[1..].iter_mut()) {
        *b -= s * a;
    }
}

impl PivotedQr {
    /// Factors `a` with relative pivot cutoff `rcond`.
    pub fn new(a: &DMatrix<f64>, rcond: f64) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("pivoted QR"));
        }
        let (m, n) = a.shape();
        let mut qr = a.as_slice().to_vec();
        let kmax = m.min(n);
        let mut tau = vec![0.0; kmax];
        let mut perm: Vec<usize> = (0..n).collect();
        let col_norm = |qr: &[f64], j: usize, from: usize| {
            qr[j * m + from..(j + 1) * m].iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let mut vn1: Vec<f64> = (0..n).map(|j| col_norm(&qr, j, 0)).collect();
        let mut vn2 = vn1.clone();
        let tol3z = f64::EPSILON.sqrt();

        for k in 0..kmax {
            let pvt = (k..n)
                .max_by(|&a, &b| vn1[a].total_cmp(&vn1[b]).then(b.cmp(&a)))
                .unwrap();
            if pvt != k {
                for i in 0..m {
                    qr.swap(pvt * m + i, k * m + i);
                }
                perm.swap(pvt, k);
                vn1[pvt] = vn1[k];
                vn2[pvt] = vn2[k];
            }
            let (head, tail) = qr.split_at_mut((k + 1) * m);
            let vk = &mut head[k * m + k..];
            tau[k] = householder(vk);
            let v_tail = &vk[1..];
            for j in 0..n - k - 1 {
                let col = &mut tail[j * m + k..(j + 1) * m];
                reflect(v_tail, tau[k], col);
            }
            for j in k + 1..n {
                if vn1[j] != 0.0 {
                    let r = qr[j * m + k].abs() / vn1[j];
                    let temp = (1.0 - r * r).max(0.0);
                    let temp2 = temp * (vn1[j] / vn2[j]).powi(2);
                    if temp2 <= tol3z {
                        vn1[j] = if k + 1 < m { col_norm(&qr, j, k + 1) } else { 0.0 };
                        vn2[j] = vn1[j];
                    } else {
                        vn1[j] *= temp.sqrt();
                    }
                }
            }
        }

        let lead = if kmax > 0 { qr[0].abs() } else { 0.0 };
        let rank = (0..kmax)
            .take_while(|&k| lead > 0.0 && qr[k * m + k].abs() > rcond * lead)
            .count();

        let mut out = Self {
            rows: m,
            cols: n,
            qr,
            tau,
            perm,
            rank,
            cod: None,
        };
        if rank > 0 && rank < n {
            out.cod = Some(out.build_cod());
        }
        Ok(out)
    }

    fn build_cod(&self) -> Cod {
        let (m, n, r) = (self.rows, self.cols, self.rank);
        // packed = [R11 R12]^T, n x r
        let mut packed = vec![0.0; n * r];
        for i in 0..r {
            for j in i..n {
                packed[i * n + j] = self.qr[j * m + i];
            }
        }
        let mut tau = vec![0.0; r];
        for k in 0..r {
            let (head, tail) = packed.split_at_mut((k + 1) * n);
            let vk = &mut head[k * n + k..];
            tau[k] = householder(vk);
            let v_tail = &vk[1..];
            for j in 0..r - k - 1 {
                reflect(v_tail, tau[k], &mut tail[j * n + k..(j + 1) * n]);
            }
        }
        Cod { packed, tau }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.cols.min(self.rows) && self.rank == self.cols
    }

    /// Absolute values of the diagonal of `R`.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|k| self.qr[k * self.rows + k].abs())
            .collect()
    }

    /// Ratio of the extreme retained pivots, a cheap condition estimate.
    pub fn pivot_ratio(&self) -> f64 {
        if self.rank == 0 {
            return f64::INFINITY;
        }
        let d = self.r_diagonal();
        d[0] / d[self.rank - 1]
    }

    #[inline]
    fn r(&self, i: usize, j: usize) -> f64 {
        self.qr[j * self.rows + i]
    }

    fn apply_qt(&self, b: &mut [f64]) {
        let m = self.rows;
        for k in 0..self.tau.len() {
            let v_tail = &self.qr[k * m + k + 1..(k + 1) * m];
            reflect(v_tail, self.tau[k], &mut b[k..]);
        }
    }

    fn apply_q(&self, b: &mut [f64]) {
        let m = self.rows;
        for k in (0..self.tau.len()).rev() {
            let v_tail = &self.qr[k * m + k + 1..(k + 1) * m];
            reflect(v_tail, self.tau[k], &mut b[k..]);
        }
    }

    /// Least-squares solution with the trailing (numerically zero) part of
    /// the permuted unknowns set to zero.
    pub fn solve_basic(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.rows);
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        let r = self.rank;
        let mut y = vec![0.0; self.cols];
        for i in (0..r).rev() {
            let mut s = c[i];
            for j in i + 1..r {
                s -= self.r(i, j) * y[j];
            }
            y[i] = s / self.r(i, i);
        }
        self.unpermute(&y)
    }

    /// Minimum-norm least-squares solution of the rank-`r` truncation.
    /// Coincides with [`PivotedQr::solve_basic`] at full column rank.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let Some(cod) = &self.cod else {
            return self.solve_basic(b);
        };
        assert_eq!(b.len(), self.rows);
        let (n, r) = (self.cols, self.rank);
        let mut c = b.to_vec();
        self.apply_qt(&mut c);
        // T^T u = c[..r], T upper triangular stored in packed (n x r)
        let t = |i: usize, j: usize| cod.packed[j * n + i];
        let mut y = vec![0.0; n];
        for i in 0..r {
            let mut s = c[i];
            for j in 0..i {
                s -= t(j, i) * y[j];
            }
            y[i] = s / t(i, i);
        }
        // y = Z [u; 0]
        for k in (0..r).rev() {
            let v_tail = &cod.packed[k * n + k + 1..(k + 1) * n];
            reflect(v_tail, cod.tau[k], &mut y[k..]);
        }
        self.unpermute(&y)
    }

    /// Applies the transpose of the operator realized by [`PivotedQr::solve`].
    pub fn solve_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let (m, n, r) = (self.rows, self.cols, self.rank);
        let mut y: Vec<f64> = self.perm.iter().map(|&p| v[p]).collect();
        let mut z = vec![0.0; m];
        match &self.cod {
            None => {
                // R11^T z = y[..r]
                for i in 0..r {
                    let mut s = y[i];
                    for j in 0..i {
                        s -= self.r(j, i) * z[j];
                    }
                    z[i] = s / self.r(i, i);
                }
            }
            Some(cod) => {
                for k in 0..r {
                    let v_tail = &cod.packed[k * n + k + 1..(k + 1) * n];
                    reflect(v_tail, cod.tau[k], &mut y[k..]);
                }
                let t = |i: usize, j: usize| cod.packed[j * n + i];
                for i in (0..r).rev() {
                    let mut s = y[i];
                    for j in i + 1..r {
                        s -= t(i, j) * z[j];
                    }
                    z[i] = s / t(i, i);
                }
            }
        }
        self.apply_q(&mut z);
        z
    }

    fn unpermute(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.cols];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

/// Relative rank cutoff for direct least squares: `eps * max(rows, cols)`.
pub fn least_squares_rcond(rows: usize, cols: usize) -> f64 {
    f64::EPSILON * rows.max(cols) as f64
}

/// Minimizes `||a x - b||_2` by pivoted QR; rank-deficient problems get
/// the pivoted basic solution.
pub fn qr_least_squares(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidArgument("empty least-squares system".into()));
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("least-squares right-hand side"));
    }
    let qr = PivotedQr::new(a, least_squares_rcond(a.nrows(), a.ncols()))?;
    Ok(qr.solve_basic(b))
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::DenseLimit { size: n, limit })
    } else {
        Ok(())
    }
}

/// All singular values, nonincreasing.
pub fn singular_values(a: &DMatrix<f64>, limit: usize) -> Result<Vec<f64>> {
    check_limit(a.nrows().min(a.ncols()), limit)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("singular values"));
    }
    let svd = SVD::new(a.clone(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Singular values, nonincreasing, with the matching right singular vectors
/// as the columns of the second matrix.
pub fn svd_right(a: &DMatrix<f64>, limit: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_limit(a.nrows().min(a.ncols()), limit)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("singular values"));
    }
    let svd = SVD::new(a.clone(), false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::InvalidArgument("SVD did not return right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = order.iter().map(|&k| svd.singular_values[k]).collect();
    let v = DMatrix::from_fn(a.ncols(), order.len(), |i, c| vt[(order[c], i)]);
    Ok((s, v))
}

/// `sigma_max / sigma_min` over the numerically positive singular values
/// (`sigma > eps * max(rows, cols) * sigma_max`).
pub fn condition_from_singular_values(s: &[f64], rows: usize, cols: usize) -> f64 {
    let Some(&max) = s.first() else {
        return f64::NAN;
    };
    if max == 0.0 {
        return f64::INFINITY;
    }
    let cutoff = f64::EPSILON * rows.max(cols) as f64 * max;
    let min = s.iter().copied().filter(|&v| v > cutoff).fold(max, f64::min);
    max / min
}

pub fn condition_number(a: &DMatrix<f64>, limit: usize) -> Result<f64> {
    let s = singular_values(a, limit)?;
    Ok(condition_from_singular_values(&s, a.nrows(), a.ncols()))
}

/// Eigenvalues of a square matrix, sorted by real part then imaginary part.
pub fn spectrum(a: &DMatrix<f64>, limit: usize) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("spectrum of a non-square matrix".into()));
    }
    check_limit(a.nrows(), limit)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("spectrum"));
    }
    let n = a.nrows();
    let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let mut ev: Vec<Complex64> = fm
        .eigenvalues()
        .map_err(|e| Error::InvalidArgument(format!("eigenvalue iteration failed: {e:?}")))?;
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

/// Eigenvalues of the symmetric part of `a`, nondecreasing.
pub fn symmetric_spectrum(a: &DMatrix<f64>, limit: usize) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidArgument("spectrum of a non-square matrix".into()));
    }
    check_limit(a.nrows(), limit)?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput("spectrum"));
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix restricted to
/// its `rank` leading eigenpairs. Kept as `B = U_r L_r^(-1/2)` and applied as
/// `B (B^T v)`, so the operator is symmetric by construction.
#[derive(Debug, Clone)]
pub struct SymmetricPinv {
    factor: DMatrix<f64>,
}

impl SymmetricPinv {
    pub fn new(a: &DMatrix<f64>, rank: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument("pseudo-inverse of a non-square matrix".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("symmetric pseudo-inverse"));
        }
        let n = a.nrows();
        let fm = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        let evd = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::InvalidArgument(format!("symmetric eigensolver failed: {e:?}")))?;
        let (u, lambda) = (evd.U(), evd.S().column_vector());
        // eigenvalues come nondecreasing; keep the positive ones among the top `rank`
        let keep: Vec<usize> = (n.saturating_sub(rank)..n).filter(|&k| lambda[k] > 0.0).collect();
        let factor = DMatrix::from_fn(n, keep.len(), |i, c| u[(i, keep[c])] / lambda[keep[c]].sqrt());
        Ok(Self { factor })
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    /// `B B^T` as a dense symmetric matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = &self.factor * self.factor.transpose();
        (&m + m.transpose()) * 0.5
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let t = self.factor.tr_mul(&DVector::from_column_slice(v));
        (&self.factor * t).as_slice().to_vec()
    }
}
