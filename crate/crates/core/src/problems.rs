//! Built-in benchmark problems, the ansatz evaluator, a Crank-Nicolson
//! reference for the advection-diffusion case, and error metrics.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::assembly::LinearOperatorSpec;
use crate::basis::{ConstrainingOperator, WindowSet};
use crate::calculus::{coordinates, Jet2, JetField};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, PointSet};
use crate::reduction::ReducedLocalBasis;

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: Aabb,
    pub operator: LinearOperatorSpec,
    /// Right-hand side `f`, one per component.
    pub sources: Vec<JetField>,
    pub constraint: ConstrainingOperator,
    pub exact: Option<Vec<JetField>>,
}

impl ProblemSpec {
    pub fn components(&self) -> usize {
        self.sources.len()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `max |A[u] - f|` over `points`, using jets of the exact solution.
    /// `None` when there is no closed form.
    pub fn consistency_residual(&self, points: &PointSet) -> Option<f64> {
        let exact = self.exact.as_ref()?;
        let mut worst = 0.0f64;
        for x in points.iter() {
            for (u, f) in exact.iter().zip(&self.sources) {
                let r = self.operator.apply(x, &u.jet(x)) - f.value(x);
                worst = worst.max(r.abs());
            }
        }
        Some(worst)
    }
}

/// `-Laplacian u = f` on `[0, 1]^2` with
/// `u = (1/n) sum_{i=1..n} sin(2^i pi x) sin(2^i pi y)`.
pub fn example1(n: u32) -> Result<ProblemSpec> {
    if !(1..=8).contains(&n) {
        return Err(Error::InvalidArgument(format!("example1 needs 1 <= n <= 8, got {n}")));
    }
    let rho = 0.5f64.powi(n as i32);
    let nf = n as f64;
    let exact = JetField::new(move |x: &[f64]| {
        let c = coordinates(x);
        let mut u = Jet2::zero(2);
        for i in 1..=n {
            let w = 2f64.powi(i as i32) * PI;
            u += (c[0] * w).sin() * (c[1] * w).sin();
        }
        u * (1.0 / nf)
    });
    let f = JetField::new(move |x: &[f64]| {
        let mut v = 0.0;
        for i in 1..=n {
            let w = 2f64.powi(i as i32) * PI;
            v += w * w * (w * x[0]).sin() * (w * x[1]).sin();
        }
        Jet2::constant(2, 2.0 * v / nf)
    });
    let l = JetField::new(move |x: &[f64]| {
        let c = coordinates(x);
        let one = Jet2::constant(2, 1.0);
        let s = 1.0 / rho;
        (c[0] * s).tanh() * ((one - c[0]) * s).tanh() * (c[1] * s).tanh() * ((one - c[1]) * s).tanh()
    });
    Ok(ProblemSpec {
        name: format!("example1_n{n}"),
        domain: Aabb::unit(2),
        operator: LinearOperatorSpec::MinusLaplacian,
        sources: vec![f],
        constraint: ConstrainingOperator::new(l, vec![JetField::constant(2, 0.0)]),
        exact: Some(vec![exact]),
    })
}

pub const EXAMPLE2_KAPPA: f64 = 0.1 / PI;

/// `u_t + u_x = kappa u_xx` on `(-1, 1) x (0, 1)` with `u(x, 0) = -sin(pi x)`
/// and homogeneous Dirichlet ends. Axis 0 is `x`, axis 1 is `t`.
pub fn example2() -> ProblemSpec {
    let l = JetField::new(|x: &[f64]| {
        let c = coordinates(x);
        let one = Jet2::constant(2, 1.0);
        (one + c[0]).tanh() * (one - c[0]).tanh() * c[1].tanh()
    });
    let g = JetField::new(|x: &[f64]| -(coordinates(x)[0] * PI).sin());
    ProblemSpec {
        name: "example2".into(),
        domain: Aabb::new(vec![-1.0, 0.0], vec![1.0, 1.0]).expect("valid box"),
        operator: LinearOperatorSpec::AdvectionDiffusion { kappa: EXAMPLE2_KAPPA },
        sources: vec![JetField::constant(2, 0.0)],
        constraint: ConstrainingOperator::new(l, vec![g]),
        exact: None,
    }
}

/// `-Laplacian u + u = f` on `(0, 1)^3` for a three-component field with
/// trigonometric exact solution.
pub fn example3() -> ProblemSpec {
    let w = 2.0 * PI;
    let exact: Vec<JetField> = (0..3)
        .map(|comp| {
            JetField::new(move |x: &[f64]| {
                let c = coordinates(x);
                let f = |a: usize| if a == comp { (c[a] * w).cos() } else { (c[a] * w).sin() };
                f(0) * f(1) * f(2)
            })
        })
        .collect();
    let sources: Vec<JetField> = (0..3)
        .map(|comp| {
            JetField::new(move |x: &[f64]| {
                let f = |a: usize| if a == comp { (x[a] * w).cos() } else { (x[a] * w).sin() };
                Jet2::constant(3, (3.0 * w * w + 1.0) * f(0) * f(1) * f(2))
            })
        })
        .collect();
    let l = JetField::new(|x: &[f64]| {
        let c = coordinates(x);
        let one = Jet2::constant(3, 1.0);
        let mut out = Jet2::constant(3, 1.0);
        for a in 0..3 {
            out = out * c[a].tanh() * (one - c[a]).tanh();
        }
        out
    });
    let g: Vec<JetField> = (0..3)
        .map(|comp| {
            JetField::new(move |x: &[f64]| {
                let c = coordinates(x);
                let mut out = Jet2::constant(3, 1.0);
                for a in (0..3).filter(|&a| a != comp) {
                    out = out * (c[a] * w).sin();
                }
                out
            })
        })
        .collect();
    ProblemSpec {
        name: "example3".into(),
        domain: Aabb::unit(3),
        operator: LinearOperatorSpec::ReactionDiffusion,
        sources,
        constraint: ConstrainingOperator::new(l, g),
        exact: Some(exact),
    }
}

/// The assembled ansatz `u_c(x) = L(x) sum_j w_j(x) phi_j(x) . (V_j W_j) + G_c(x)`.
pub struct Ansatz<'a> {
    ws: &'a WindowSet,
    reduced: &'a [ReducedLocalBasis],
    cop: &'a ConstrainingOperator,
    /// Per component, per subdomain: neuron coefficients `V_j W_j`.
    coefficients: Vec<Vec<Vec<f64>>>,
}

impl<'a> Ansatz<'a> {
    /// `weights[c]` is the solved coefficient vector of component `c`,
    /// laid out by `column_offsets`.
    pub fn new(
        ws: &'a WindowSet,
        reduced: &'a [ReducedLocalBasis],
        cop: &'a ConstrainingOperator,
        column_offsets: &[usize],
        weights: &[Vec<f64>],
    ) -> Result<Self> {
        if weights.len() != cop.components() {
            return Err(Error::DimensionMismatch {
                expected: cop.components(),
                got: weights.len(),
            });
        }
        let p = *column_offsets.last().unwrap_or(&0);
        let coefficients = weights
            .iter()
            .map(|w| {
                if w.len() != p {
                    return Err(Error::DimensionMismatch { expected: p, got: w.len() });
                }
                Ok(reduced
                    .iter()
                    .enumerate()
                    .map(|(j, r)| r.expand(&w[column_offsets[j]..column_offsets[j + 1]]))
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ws,
            reduced,
            cop,
            coefficients,
        })
    }

    pub fn value(&self, component: usize, x: &[f64]) -> f64 {
        let dec = self.ws.decomposition();
        let mut phi = Vec::new();
        let mut sum = 0.0;
        for (j, w) in self.ws.window_values_at(x) {
            if w == 0.0 {
                continue;
            }
            self.reduced[j].basis.phi_values_into(dec.subdomain(j), x, &mut phi);
            let dot: f64 = phi.iter().zip(&self.coefficients[component][j]).map(|(a, b)| a * b).sum();
            sum += w * dot;
        }
        self.cop.l.value(x) * sum + self.cop.g[component].value(x)
    }

    pub fn values(&self, component: usize, points: &PointSet) -> Vec<f64> {
        (0..points.len())
            .into_par_iter()
            .map(|i| self.value(component, points.point(i)))
            .collect()
    }
}

/// Crank-Nicolson solution of `u_t + u_x = kappa u_xx` on a uniform
/// space-time node grid, stored by time level.
#[derive(Debug, Clone)]
pub struct AdvectionDiffusionReference {
    nodes: usize,
    x_lo: f64,
    x_hi: f64,
    t_end: f64,
    /// `values[k * nodes + i]` at `x_i`, `t_k`.
    values: Vec<f64>,
}

impl AdvectionDiffusionReference {
    /// `resolution` nodes per axis (both ends included).
    pub fn example2(resolution: usize) -> Result<Self> {
        Self::solve(resolution, -1.0, 1.0, 1.0, EXAMPLE2_KAPPA, |x| -(PI * x).sin())
    }

    pub fn solve(
        resolution: usize,
        x_lo: f64,
        x_hi: f64,
        t_end: f64,
        kappa: f64,
        initial: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::InvalidArgument(format!("reference grid needs at least 3 nodes, got {resolution}")));
        }
        let n = resolution;
        let h = (x_hi - x_lo) / (n - 1) as f64;
        let dt = t_end / (n - 1) as f64;
        // D u_i = -(u_{i+1} - u_{i-1}) / 2h + kappa (u_{i+1} - 2 u_i + u_{i-1}) / h^2
        let lower = 1.0 / (2.0 * h) + kappa / (h * h);
        let diag = -2.0 * kappa / (h * h);
        let upper = -1.0 / (2.0 * h) + kappa / (h * h);
        let half = 0.5 * dt;
        let mut values = Vec::with_capacity(n * n);
        let mut u: Vec<f64> = (0..n).map(|i| initial(x_lo + i as f64 * h)).collect();
        u[0] = 0.0;
        u[n - 1] = 0.0;
        values.extend_from_slice(&u);
        let m = n - 2;
        let (a, b, c) = (-half * lower, 1.0 - half * diag, -half * upper);
        let mut cp = vec![0.0; m];
        let mut dp = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for _ in 1..n {
            for i in 1..n - 1 {
                rhs[i - 1] = u[i] + half * (lower * u[i - 1] + diag * u[i] + upper * u[i + 1]);
            }
            // Thomas algorithm with zero boundary values
            cp[0] = c / b;
            dp[0] = rhs[0] / b;
            for i in 1..m {
                let denom = b - a * cp[i - 1];
                cp[i] = c / denom;
                dp[i] = (rhs[i] - a * dp[i - 1]) / denom;
            }
            u[m] = dp[m - 1];
            for i in (0..m - 1).rev() {
                u[i + 1] = dp[i] - cp[i] * u[i + 2];
            }
            values.extend_from_slice(&u);
        }
        Ok(Self {
            nodes: n,
            x_lo,
            x_hi,
            t_end,
            values,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn node_value(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.nodes + i]
    }

    /// Bilinear interpolation at `(x, t)`, clamped to the grid.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let n = self.nodes;
        let sx = ((x - self.x_lo) / (self.x_hi - self.x_lo) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let st = (t / self.t_end * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (sx.floor() as usize).min(n - 2);
        let k = (st.floor() as usize).min(n - 2);
        let (fx, ft) = (sx - i as f64, st - k as f64);
        let v = |ii: usize, kk: usize| self.node_value(ii, kk);
        (1.0 - ft) * ((1.0 - fx) * v(i, k) + fx * v(i + 1, k)) + ft * ((1.0 - fx) * v(i, k + 1) + fx * v(i + 1, k + 1))
    }

    pub fn values_at(&self, points: &PointSet) -> Vec<f64> {
        points.iter().map(|p| self.value(p[0], p[1])).collect()
    }
}

/// `||approx - exact||_2 / ||exact||_2`.
pub fn rel_l2(approx: &[f64], exact: &[f64]) -> Result<f64> {
    check_lengths(approx, exact)?;
    let den = DVector::from_column_slice(exact).norm();
    if den == 0.0 {
        return Err(Error::InvalidArgument("relative L2 error of a zero reference".into()));
    }
    let num: f64 = approx.iter().zip(exact).map(|(a, e)| (a - e) * (a - e)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// `(1/M) sum |approx - exact| / gamma`, with `gamma` the population
/// standard deviation of `exact`.
pub fn normalized_l1(approx: &[f64], exact: &[f64]) -> Result<f64> {
    check_lengths(approx, exact)?;
    let m = exact.len() as f64;
    let mean = exact.iter().sum::<f64>() / m;
    let gamma = (exact.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / m).sqrt();
    if gamma == 0.0 {
        return Err(Error::InvalidArgument("normalized L1 error of a constant reference".into()));
    }
    let l1: f64 = approx.iter().zip(exact).map(|(a, e)| (a - e).abs()).sum();
    Ok(l1 / m / gamma)
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: a.len(),
        });
    }
    if b.is_empty() {
        return Err(Error::InvalidArgument("no test points".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rel_l2: f64,
    pub normalized_l1: f64,
    pub test_points: usize,
    /// `(rel_l2, normalized_l1)` per component.
    pub per_component: Vec<(f64, f64)>,
}

impl ErrorReport {
    /// Metrics of stacked components plus each component alone.
    pub fn from_components(approx: &[Vec<f64>], exact: &[Vec<f64>]) -> Result<Self> {
        if approx.len() != exact.len() || exact.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: exact.len(),
                got: approx.len(),
            });
        }
        let per_component = approx
            .iter()
            .zip(exact)
            .map(|(a, e)| Ok((rel_l2(a, e)?, normalized_l1(a, e)?)))
            .collect::<Result<Vec<_>>>()?;
        let sa: Vec<f64> = approx.concat();
        let se: Vec<f64> = exact.concat();
        Ok(Self {
            rel_l2: rel_l2(&sa, &se)?,
            normalized_l1: normalized_l1(&sa, &se)?,
            test_points: exact[0].len(),
            per_component,
        })
    }
}
