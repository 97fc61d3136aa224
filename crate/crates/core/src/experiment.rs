//! End-to-end runs: decompose, draw bases, truncate, assemble, build the
//! preconditioner, solve, evaluate, and write CSV reports.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{assemble, normal_blocks, BlockSystem};
use crate::basis::{RandomBasis, WindowSet};
use crate::config::{ProblemKind, RunConfig, SolverConfig, Tau, SCALING_LEVEL_CAP};
use crate::error::{Error, Result};
use crate::geometry::{CartesianDecomposition, PointKind, PointSet};
use crate::krylov::{self, dense, Identity, Operator, SolveReport, SolverKind};
use crate::problems::{example1, example2, example3, AdvectionDiffusionReference, Ansatz, ErrorReport, ProblemSpec};
use crate::reduction::{reduce_all, ReducedLocalBasis};
use crate::schwarz::{build_index_sets, PreconditionerKind, SchwarzPreconditioner};

pub const SUMMARY_HEADER: &str =
    "seed,problem,J,DoF,N,solver,precond,tau,iter,converged,e_l2,e_l1n,t_assemble,t_precond,t_solve";

pub fn problem_for(cfg: &RunConfig) -> Result<ProblemSpec> {
    match cfg.problem.kind {
        ProblemKind::Example1 => example1(cfg.problem.n.unwrap_or(2)),
        ProblemKind::Example2 => Ok(example2()),
        ProblemKind::Example3 => Ok(example3()),
    }
}

/// Everything up to and including the collocation system.
pub struct Instance {
    pub problem: ProblemSpec,
    pub windows: WindowSet,
    pub collocation: PointSet,
    pub reduced: Vec<ReducedLocalBasis>,
    pub system: BlockSystem,
    pub seed: u64,
    pub t_assemble: f64,
}

impl Instance {
    pub fn decomposition(&self) -> &CartesianDecomposition {
        self.windows.decomposition()
    }

    pub fn dof(&self) -> usize {
        self.system.n_cols()
    }
}

pub fn build_instance(cfg: &RunConfig, seed: u64) -> Result<Instance> {
    let problem = problem_for(cfg).map_err(|e| e.in_phase("problem"))?;
    let start = Instant::now();
    let dec = CartesianDecomposition::new(problem.domain.clone(), cfg.counts(), cfg.decomposition.overlap)
        .map_err(|e| e.in_phase("decompose"))?;
    let collocation = PointSet::uniform_grid(&problem.domain, cfg.collocation(), PointKind::Collocation)
        .map_err(|e| e.in_phase("decompose"))?;
    let windows = WindowSet::new(&dec);
    let bases = (0..dec.len())
        .map(|j| RandomBasis::for_subdomain(seed, j, cfg.basis.neurons, problem.dim(), cfg.basis.activation))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_phase("init"))?;
    let reduced = reduce_all(&windows, bases, &collocation, cfg.basis.threshold()).map_err(|e| e.in_phase("pca"))?;
    let system = assemble(
        &problem.operator,
        &windows,
        &reduced,
        &problem.constraint,
        &problem.sources,
        &collocation,
    )
    .map_err(|e| e.in_phase("assemble"))?;
    Ok(Instance {
        problem,
        windows,
        collocation,
        reduced,
        system,
        seed,
        t_assemble: start.elapsed().as_secs_f64(),
    })
}

/// Test points with exact (or reference) values per component.
pub struct Reference {
    pub points: PointSet,
    pub exact: Vec<Vec<f64>>,
}

impl Reference {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let problem = problem_for(cfg)?;
        let points = PointSet::uniform_grid(&problem.domain, cfg.test_grid(), PointKind::Test)?;
        let exact = match &problem.exact {
            Some(fields) => fields
                .iter()
                .map(|u| (0..points.len()).into_par_iter().map(|i| u.value(points.point(i))).collect())
                .collect(),
            None => {
                let reference = AdvectionDiffusionReference::example2(cfg.grids.reference_resolution)?;
                vec![reference.values_at(&points)]
            }
        };
        Ok(Self { points, exact })
    }
}

pub struct Solution {
    pub weights: Vec<Vec<f64>>,
    /// One per component; empty for the direct solver.
    pub reports: Vec<SolveReport>,
    pub preconditioner: Option<SchwarzPreconditioner>,
    pub t_precond: f64,
    pub t_solve: f64,
}

impl Solution {
    /// Largest iteration count over components.
    pub fn iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    /// Direct solves count as converged.
    pub fn converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

pub fn build_preconditioner(inst: &Instance, kind: PreconditionerKind) -> Result<Option<SchwarzPreconditioner>> {
    if kind == PreconditionerKind::None {
        return Ok(None);
    }
    let dec = inst.decomposition();
    let nb = normal_blocks(&inst.system, dec)?;
    let sets = build_index_sets(dec, &inst.system.column_offsets)?;
    Ok(Some(SchwarzPreconditioner::build(kind, &nb, sets)?))
}

/// Solves `H W = F` for every component: pivoted QR on `H` for the direct
/// solver, otherwise a Krylov method on `H^T H W = H^T F` sharing one
/// preconditioner across components.
pub fn solve_instance(inst: &Instance, solver: &SolverConfig, dense_limit: usize) -> Result<Solution> {
    let h = &inst.system;
    if solver.solver == SolverKind::QrDirect {
        if h.n_cols() > dense_limit {
            return Err(Error::DenseLimit {
                size: h.n_cols(),
                limit: dense_limit,
            }
            .in_phase("solve"));
        }
        let start = Instant::now();
        let dense_h = h.densify();
        let qr = dense::PivotedQr::new(&dense_h, dense::least_squares_rcond(h.n_rows, h.n_cols()))
            .map_err(|e| e.in_phase("solve"))?;
        let weights = h.rhs.iter().map(|f| qr.solve_basic(f)).collect();
        return Ok(Solution {
            weights,
            reports: Vec::new(),
            preconditioner: None,
            t_precond: 0.0,
            t_solve: start.elapsed().as_secs_f64(),
        });
    }

    let start = Instant::now();
    let preconditioner = build_preconditioner(inst, solver.preconditioner).map_err(|e| e.in_phase("precondition"))?;
    let t_precond = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let a = h.normal_operator();
    let identity = Identity(h.n_cols());
    let m: &dyn Operator = match &preconditioner {
        Some(p) => p,
        None => &identity,
    };
    let cfg = solver.solve_config();
    let mut reports = Vec::with_capacity(h.components());
    for c in 0..h.components() {
        let b = h.normal_rhs(c);
        let mut report = krylov::solve(solver.solver, &a, m, &b, &cfg).map_err(|e| e.in_phase("solve"))?;
        report.setup_seconds = t_precond;
        reports.push(report);
    }
    let weights = reports.iter().map(|r| r.solution.clone()).collect();
    Ok(Solution {
        weights,
        reports,
        preconditioner,
        t_precond,
        t_solve: start.elapsed().as_secs_f64(),
    })
}

pub fn evaluate(inst: &Instance, weights: &[Vec<f64>], reference: &Reference) -> Result<ErrorReport> {
    let ansatz = Ansatz::new(
        &inst.windows,
        &inst.reduced,
        &inst.problem.constraint,
        &inst.system.column_offsets,
        weights,
    )?;
    let approx: Vec<Vec<f64>> = (0..weights.len()).map(|c| ansatz.values(c, &reference.points)).collect();
    ErrorReport::from_components(&approx, &reference.exact)
}

/// Dense spectral diagnostics of `H^T H` and `M^-1 H^T H`.
#[derive(Debug, Clone)]
pub struct Conditioning {
    /// Numerical rank of `H` (`sigma > eps max(N, p) sigma_max`).
    pub rank: usize,
    /// `cond(H)^2`, from the singular values of `H`.
    pub cond_hth: f64,
    /// Eigenvalues of `H^T H`, sorted by real part.
    pub hth_spectrum: Vec<Complex64>,
    /// Eigenvalues of `M^-1 H^T H`, sorted by real part.
    pub precond_spectrum: Vec<Complex64>,
    /// `sigma_max / sigma_min` of `M^-1 H^T H` (numerically positive
    /// singular values), the same definition as for `H`.
    pub cond_precond: f64,
    /// Modulus ratio over the `rank` largest-modulus eigenvalues of
    /// `M^-1 H^T H`.
    pub cond_precond_eig: f64,
}

/// `M^-1 A` densely, one preconditioner apply per column of `A`.
pub fn preconditioned_dense(a: &DMatrix<f64>, m: &dyn Operator) -> DMatrix<f64> {
    let (rows, n) = a.shape();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| m.apply(a.column(k).as_slice()))
        .collect();
    DMatrix::from_fn(rows, n, |i, k| cols[k][i])
}

/// The `rank` eigenvalues of largest modulus, sorted by real part.
pub fn row_space_eigenvalues(eigs: &[Complex64], rank: usize) -> Vec<Complex64> {
    let mut by_modulus = eigs.to_vec();
    by_modulus.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    by_modulus.truncate(rank.min(eigs.len()));
    by_modulus.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    by_modulus
}

/// `max |lambda| / min |lambda|` over the row-space eigenvalues.
pub fn row_space_condition(eigs: &[Complex64], rank: usize) -> f64 {
    let rs = row_space_eigenvalues(eigs, rank);
    let max = rs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let min = rs.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if rs.is_empty() || min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn conditioning(inst: &Instance, m: Option<&dyn Operator>, limit: usize) -> Result<Conditioning> {
    let h = &inst.system;
    let p = h.n_cols();
    if p > limit {
        return Err(Error::DenseLimit { size: p, limit });
    }
    let dense_h = h.densify();
    let (s, v) = dense::svd_right(&dense_h, limit)?;
    let cutoff = f64::EPSILON * h.n_rows.max(p) as f64 * s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&v| v > cutoff).count();
    let cond_h = dense::condition_from_singular_values(&s, h.n_rows, p);
    let a = dense_h.transpose() * &dense_h;
    let hth_spectrum: Vec<Complex64> = dense::symmetric_spectrum(&a, limit)?
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    let (precond_spectrum, cond_precond) = match m {
        Some(m) if m.is_symmetric() => {
            // with M^-1 symmetric, the nonzero eigenvalues of M^-1 H^T H are
            // those of B^T M^-1 B, B = V_r S_r; this avoids the dense
            // nonsymmetric eigensolver on a strongly non-normal product
            let b = DMatrix::from_fn(p, rank, |i, c| v[(i, c)] * s[c]);
            let mb = preconditioned_dense(&b, m);
            let mut spectrum: Vec<Complex64> = dense::symmetric_spectrum(&(b.transpose() * mb), limit)?
                .into_iter()
                .map(|v| Complex64::new(v, 0.0))
                .collect();
            spectrum.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), p - rank));
            spectrum.sort_by(|a, b| a.re.total_cmp(&b.re));
            let sv = dense::singular_values(&preconditioned_dense(&a, m), limit)?;
            (spectrum, dense::condition_from_singular_values(&sv, p, p))
        }
        Some(m) => {
            let ma = preconditioned_dense(&a, m);
            let sv = dense::singular_values(&ma, limit)?;
            (dense::spectrum(&ma, limit)?, dense::condition_from_singular_values(&sv, p, p))
        }
        None => (hth_spectrum.clone(), cond_h * cond_h),
    };
    let cond_precond_eig = row_space_condition(&precond_spectrum, rank);
    Ok(Conditioning {
        rank,
        cond_hth: cond_h * cond_h,
        hth_spectrum,
        precond_spectrum,
        cond_precond,
        cond_precond_eig,
    })
}

/// One row of `summary.csv` plus diagnostics kept in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub problem: String,
    pub subdomains: usize,
    pub dof: usize,
    pub n_points: usize,
    pub solver: SolverKind,
    pub precond: PreconditionerKind,
    pub tau: String,
    pub iterations: usize,
    pub converged: bool,
    pub e_l2: f64,
    pub e_l1n: f64,
    pub t_assemble: f64,
    pub t_precond: f64,
    pub t_solve: f64,
    pub cond_hth: Option<f64>,
    pub cond_precond: Option<f64>,
    pub cond_precond_eig: Option<f64>,
    /// `(preconditioned, true)` relative residuals per component.
    pub residuals: Vec<Vec<(f64, f64)>>,
    pub component_errors: Vec<(f64, f64)>,
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:e},{:e},{:.6},{:.6},{:.6}",
            self.seed,
            self.problem,
            self.subdomains,
            self.dof,
            self.n_points,
            self.solver.name(),
            self.precond.name(),
            self.tau,
            self.iterations,
            self.converged,
            self.e_l2,
            self.e_l1n,
            self.t_assemble,
            self.t_precond,
            self.t_solve
        )
    }
}

fn tau_label(cfg: &RunConfig) -> String {
    match cfg.basis.tau {
        Tau::Off => "off".into(),
        Tau::Value(_) => cfg.basis.threshold().label(),
    }
}

/// Builds, solves and evaluates one seed.
pub fn run_seed(cfg: &RunConfig, seed: u64, reference: &Reference) -> Result<RunRecord> {
    let inst = build_instance(cfg, seed)?;
    let sol = solve_instance(&inst, &cfg.solver, cfg.run.dense_limit)?;
    let err = evaluate(&inst, &sol.weights, reference).map_err(|e| e.in_phase("evaluate"))?;
    let (cond_hth, cond_precond, cond_precond_eig) = if cfg.run.condition {
        let m: Option<&dyn Operator> = sol.preconditioner.as_ref().map(|p| p as &dyn Operator);
        let c = conditioning(&inst, m, cfg.run.dense_limit).map_err(|e| e.in_phase("condition"))?;
        (Some(c.cond_hth), Some(c.cond_precond), Some(c.cond_precond_eig))
    } else {
        (None, None, None)
    };
    Ok(RunRecord {
        seed,
        problem: inst.problem.name.clone(),
        subdomains: inst.decomposition().len(),
        dof: inst.dof(),
        n_points: inst.collocation.len(),
        solver: cfg.solver.solver,
        precond: if cfg.solver.solver == SolverKind::QrDirect {
            PreconditionerKind::None
        } else {
            cfg.solver.preconditioner
        },
        tau: tau_label(cfg),
        iterations: sol.iterations(),
        converged: sol.converged(),
        e_l2: err.rel_l2,
        e_l1n: err.normalized_l1,
        t_assemble: inst.t_assemble,
        t_precond: sol.t_precond,
        t_solve: sol.t_solve,
        cond_hth,
        cond_precond,
        cond_precond_eig,
        residuals: sol
            .reports
            .iter()
            .map(|r| {
                r.residual_history
                    .iter()
                    .copied()
                    .zip(r.true_residual_history.iter().copied())
                    .collect()
            })
            .collect(),
        component_errors: err.per_component,
    })
}

fn seeds(cfg: &RunConfig) -> impl Iterator<Item = u64> + '_ {
    (0..cfg.run.seeds as u64).map(move |r| cfg.basis.seed.wrapping_add(r))
}

pub fn run_records(cfg: &RunConfig, reference: &Reference) -> Result<Vec<RunRecord>> {
    seeds(cfg).map(|s| run_seed(cfg, s, reference)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_config_echo(cfg: &RunConfig, dir: &Path) -> Result<()> {
    write_file(&dir.join("config.toml"), &cfg.to_toml_string()?)
}

fn write_residuals(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let multi = records.iter().any(|r| r.residuals.len() > 1);
    let mut all = String::from("seed,component,iter,preconditioned_residual,true_residual\n");
    for r in records {
        for (c, hist) in r.residuals.iter().enumerate() {
            let mut one = String::from("iter,preconditioned_residual,true_residual\n");
            for (k, (pr, tr)) in hist.iter().enumerate() {
                let _ = writeln!(all, "{},{c},{k},{pr:e},{tr:e}", r.seed);
                let _ = writeln!(one, "{k},{pr:e},{tr:e}");
            }
            let name = if multi {
                format!("residuals_seed{}_u{c}.csv", r.seed)
            } else {
                format!("residuals_seed{}.csv", r.seed)
            };
            write_file(&dir.join(name), &one)?;
        }
    }
    write_file(&dir.join("residuals.csv"), &all)
}

fn aggregate_csv(records: &[RunRecord]) -> String {
    let col = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    let mut metrics: Vec<(&str, Vec<f64>)> = vec![
        ("DoF", col(&|r| r.dof as f64)),
        ("iter", col(&|r| r.iterations as f64)),
        ("converged", col(&|r| if r.converged { 1.0 } else { 0.0 })),
        ("e_l2", col(&|r| r.e_l2)),
        ("e_l1n", col(&|r| r.e_l1n)),
        ("t_assemble", col(&|r| r.t_assemble)),
        ("t_precond", col(&|r| r.t_precond)),
        ("t_solve", col(&|r| r.t_solve)),
    ];
    if records.iter().all(|r| r.cond_hth.is_some()) {
        metrics.push(("cond_hth", col(&|r| r.cond_hth.unwrap_or(f64::NAN))));
        metrics.push(("cond_precond", col(&|r| r.cond_precond.unwrap_or(f64::NAN))));
        metrics.push(("cond_precond_eig", col(&|r| r.cond_precond_eig.unwrap_or(f64::NAN))));
    }
    let mut out = String::from("metric,median,mean\n");
    for (name, v) in metrics {
        let _ = writeln!(out, "{name},{:e},{:e}", median(&v), mean(&v));
    }
    out
}

pub fn write_summary(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    write_file(&dir.join("summary.csv"), &text)?;
    write_file(&dir.join("aggregate.csv"), &aggregate_csv(records))?;
    if records.iter().any(|r| r.cond_hth.is_some()) {
        let mut cond = String::from("seed,cond_hth,cond_precond,cond_precond_eig\n");
        for r in records {
            let _ = writeln!(
                cond,
                "{},{:e},{:e},{:e}",
                r.seed,
                r.cond_hth.unwrap_or(f64::NAN),
                r.cond_precond.unwrap_or(f64::NAN),
                r.cond_precond_eig.unwrap_or(f64::NAN)
            );
        }
        write_file(&dir.join("condition.csv"), &cond)?;
    }
    Ok(())
}

/// The `run` command: every seed, then `summary.csv`, `aggregate.csv`,
/// residual histories and the config echo under `out` if given.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<RunRecord>> {
    let reference = Reference::build(cfg).map_err(|e| e.in_phase("reference"))?;
    let records = run_records(cfg, &reference)?;
    if let Some(dir) = out {
        prepare_dir(dir)?;
        write_config_echo(cfg, dir)?;
        write_summary(dir, &records)?;
        write_residuals(dir, &records)?;
    }
    Ok(records)
}

pub fn write_spectrum_csv(path: &Path, eigs: &[Complex64]) -> Result<()> {
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut text = String::from("index,real,imag\n");
    for (i, z) in sorted.iter().enumerate() {
        let _ = writeln!(text, "{i},{:e},{:e}", z.re, z.im);
    }
    write_file(path, &text)
}

/// The `spectrum` command on the first seed with the configured
/// preconditioner (`none` gives `M = I`).
pub fn spectrum(cfg: &RunConfig, out: Option<&Path>) -> Result<Conditioning> {
    let inst = build_instance(cfg, cfg.basis.seed)?;
    if inst.dof() > cfg.run.dense_limit {
        return Err(Error::DenseLimit {
            size: inst.dof(),
            limit: cfg.run.dense_limit,
        }
        .in_phase("spectrum"));
    }
    let kind = if cfg.solver.solver == SolverKind::QrDirect {
        PreconditionerKind::None
    } else {
        cfg.solver.preconditioner
    };
    let pre = build_preconditioner(&inst, kind).map_err(|e| e.in_phase("precondition"))?;
    let m: Option<&dyn Operator> = pre.as_ref().map(|p| p as &dyn Operator);
    let c = conditioning(&inst, m, cfg.run.dense_limit).map_err(|e| e.in_phase("spectrum"))?;
    if let Some(dir) = out {
        prepare_dir(dir)?;
        write_config_echo(cfg, dir)?;
        write_spectrum_csv(&dir.join("spectrum_hth.csv"), &c.hth_spectrum)?;
        write_spectrum_csv(&dir.join("spectrum_precond.csv"), &c.precond_spectrum)?;
        let rs = row_space_eigenvalues(&c.precond_spectrum, c.rank);
        let mut text = String::from("matrix,dof,rank,min_real,max_real,cond,cond_eig\n");
        let hs = row_space_eigenvalues(&c.hth_spectrum, c.rank);
        let min_re = |v: &[Complex64]| v.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let max_re = |v: &[Complex64]| v.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(
            text,
            "hth,{},{},{:e},{:e},{:e},{:e}",
            inst.dof(),
            c.rank,
            min_re(&hs),
            max_re(&hs),
            c.cond_hth,
            row_space_condition(&c.hth_spectrum, c.rank)
        );
        let _ = writeln!(
            text,
            "precond_{},{},{},{:e},{:e},{:e},{:e}",
            kind.name(),
            inst.dof(),
            c.rank,
            min_re(&rs),
            max_re(&rs),
            c.cond_precond,
            c.cond_precond_eig
        );
        write_file(&dir.join("spectrum_summary.csv"), &text)?;
        if let Some(p) = &pre {
            p.write_diagnostics_csv(&dir.join("preconditioner.csv"))?;
        }
    }
    Ok(c)
}

/// One row of the threshold sweep; medians over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub dof: f64,
    pub cond_hth: f64,
    pub cond_precond: f64,
    pub cond_precond_eig: f64,
    pub iterations: f64,
    pub e_l2: f64,
    pub converged: usize,
    pub seeds: usize,
}

/// The `sweep-tau` command: one run per threshold in `sweep.taus`, with
/// dense conditioning estimates switched on.
pub fn sweep_tau(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<SweepRow>> {
    let reference = Reference::build(cfg).map_err(|e| e.in_phase("reference"))?;
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &tau in &cfg.sweep.taus {
        let mut c = cfg.clone();
        c.basis.tau = Tau::Value(tau);
        c.run.condition = true;
        let records = run_records(&c, &reference)?;
        let med = |f: &dyn Fn(&RunRecord) -> f64| median(&records.iter().map(f).collect::<Vec<_>>());
        rows.push(SweepRow {
            tau,
            dof: med(&|r| r.dof as f64),
            cond_hth: med(&|r| r.cond_hth.unwrap_or(f64::NAN)),
            cond_precond: med(&|r| r.cond_precond.unwrap_or(f64::NAN)),
            cond_precond_eig: med(&|r| r.cond_precond_eig.unwrap_or(f64::NAN)),
            iterations: med(&|r| r.iterations as f64),
            e_l2: med(&|r| r.e_l2),
            converged: records.iter().filter(|r| r.converged).count(),
            seeds: records.len(),
        });
        all.extend(records);
    }
    if let Some(dir) = out {
        prepare_dir(dir)?;
        write_config_echo(cfg, dir)?;
        let mut text = String::from("tau,DoF,cond_hth,cond_precond,cond_precond_eig,iter,e_l2,converged,seeds\n");
        for r in &rows {
            let _ = writeln!(
                text,
                "{:e},{},{:e},{:e},{:e},{},{:e},{},{}",
                r.tau,
                r.dof,
                r.cond_hth,
                r.cond_precond,
                r.cond_precond_eig,
                r.iterations,
                r.e_l2,
                r.converged,
                r.seeds
            );
        }
        write_file(&dir.join("sweep_tau.csv"), &text)?;
        write_summary(dir, &all)?;
    }
    Ok(rows)
}

/// One row of the weak-scaling table; medians over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub level: u32,
    pub precond: PreconditionerKind,
    pub subdomains_per_axis: usize,
    pub points_per_axis: usize,
    pub dof: f64,
    pub iterations: f64,
    pub max_iter: usize,
    pub converged: usize,
    pub seeds: usize,
    pub e_l2: f64,
    pub e_l1n: f64,
    pub t_assemble: f64,
    pub t_precond: f64,
    pub t_solve: f64,
}

/// Config of level `n`: `2^(n-1)` subdomains and `5 * 2^n` collocation
/// points per axis on example 1 with `n` frequencies.
pub fn scaling_config(base: &RunConfig, level: u32, precond: PreconditionerKind) -> Result<RunConfig> {
    if level == 0 || level > 8 {
        return Err(Error::Config(format!("scaling level {level} outside 1..=8")));
    }
    let mut c = base.clone();
    c.problem.kind = ProblemKind::Example1;
    c.problem.n = Some(level);
    let per_axis = 1usize << (level - 1);
    let points = 5usize << level;
    c.decomposition.counts = Some(vec![per_axis, per_axis]);
    c.grids.collocation = Some(vec![points, points]);
    c.basis.neurons = base.scaling.neurons;
    c.basis.tau = Tau::Value(base.scaling.tau);
    c.basis.relative_tau = false;
    if c.solver.solver == SolverKind::QrDirect {
        c.solver.solver = SolverKind::Gmres;
    }
    c.solver.preconditioner = precond;
    if precond == PreconditionerKind::None {
        if let Some(r) = base.scaling.baseline_restart {
            c.solver.restart = Some(r);
        }
        if let Some(s) = base.scaling.baseline_seeds {
            c.run.seeds = s;
        }
    }
    c.resolve()
}

/// The `scaling` command. Levels above the desk cap need `override_caps`.
pub fn scaling(cfg: &RunConfig, out: Option<&Path>, override_caps: bool) -> Result<Vec<ScalingRow>> {
    if let Some(&n) = cfg.scaling.levels.iter().find(|&&n| n > SCALING_LEVEL_CAP) {
        if !override_caps {
            return Err(Error::Config(format!(
                "scaling level {n} exceeds the cap {SCALING_LEVEL_CAP}; pass --override-caps"
            )));
        }
    }
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &level in &cfg.scaling.levels {
        for &precond in &cfg.scaling.preconditioners {
            let c = scaling_config(cfg, level, precond)?;
            let reference = Reference::build(&c).map_err(|e| e.in_phase("reference"))?;
            let records = run_records(&c, &reference)?;
            let med = |f: &dyn Fn(&RunRecord) -> f64| median(&records.iter().map(f).collect::<Vec<_>>());
            let dof = med(&|r| r.dof as f64);
            rows.push(ScalingRow {
                level,
                precond,
                subdomains_per_axis: c.counts()[0],
                points_per_axis: c.collocation()[0],
                dof,
                iterations: med(&|r| r.iterations as f64),
                max_iter: c.solver.solve_config().max_iter_for(dof as usize),
                converged: records.iter().filter(|r| r.converged).count(),
                seeds: records.len(),
                e_l2: med(&|r| r.e_l2),
                e_l1n: med(&|r| r.e_l1n),
                t_assemble: med(&|r| r.t_assemble),
                t_precond: med(&|r| r.t_precond),
                t_solve: med(&|r| r.t_solve),
            });
            all.extend(records);
        }
    }
    if let Some(dir) = out {
        prepare_dir(dir)?;
        write_config_echo(cfg, dir)?;
        let mut text = String::from(
            "n,precond,J,N,DoF,iter,max_iter,converged,seeds,e_l2,e_l1n,t_assemble,t_precond,t_solve\n",
        );
        for r in &rows {
            let _ = writeln!(
                text,
                "{},{},{}x{},{}x{},{},{},{},{},{},{:e},{:e},{:.6},{:.6},{:.6}",
                r.level,
                r.precond.name(),
                r.subdomains_per_axis,
                r.subdomains_per_axis,
                r.points_per_axis,
                r.points_per_axis,
                r.dof,
                r.iterations,
                r.max_iter,
                r.converged,
                r.seeds,
                r.e_l2,
                r.e_l1n,
                r.t_assemble,
                r.t_precond,
                r.t_solve
            );
        }
        write_file(&dir.join("scaling.csv"), &text)?;
        write_summary(dir, &all)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemKind;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::for_problem(ProblemKind::Example1);
        cfg.decomposition.counts = Some(vec![2, 2]);
        cfg.grids.collocation = Some(vec![16, 16]);
        cfg.grids.test = Some(vec![30, 30]);
        cfg.basis.neurons = 12;
        cfg.run.seeds = 2;
        cfg
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    }

    #[test]
    fn row_space_selection() {
        let eigs = [
            Complex64::new(1e-17, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.5),
            Complex64::new(-3e-16, 0.0),
        ];
        let rs = row_space_eigenvalues(&eigs, 2);
        assert_eq!(rs, vec![Complex64::new(1.0, 0.5), Complex64::new(2.0, 0.0)]);
        assert!((row_space_condition(&eigs, 2) - 2.0 / 1.25f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn run_is_deterministic_and_writes_outputs() {
        let cfg = small();
        let dir = tempfile::tempdir().unwrap();
        let a = run(&cfg, Some(dir.path())).unwrap();
        let b = run(&cfg, None).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.dof, 4 * 12);
            assert_eq!(x.n_points, 256);
            assert_eq!(x.iterations, y.iterations);
            assert_eq!(x.e_l2.to_bits(), y.e_l2.to_bits());
            assert_eq!(x.residuals, y.residuals);
        }
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let mut lines = summary.lines();
        assert_eq!(lines.next(), Some(SUMMARY_HEADER));
        assert_eq!(lines.count(), 2);
        let first = std::fs::read_to_string(dir.path().join("residuals_seed0.csv")).unwrap();
        assert!(first.starts_with("iter,preconditioned_residual,true_residual\n0,1e0,1e0\n"));
        let echo = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
        assert_eq!(RunConfig::from_toml_str(&echo).unwrap(), cfg);
        assert!(dir.path().join("aggregate.csv").exists());
    }

    #[test]
    fn direct_and_iterative_agree_on_small_instance() {
        let mut cfg = small();
        cfg.run.seeds = 1;
        let reference = Reference::build(&cfg).unwrap();
        let it = run_seed(&cfg, 0, &reference).unwrap();
        cfg.solver.solver = SolverKind::QrDirect;
        let qr = run_seed(&cfg, 0, &reference).unwrap();
        assert!(it.converged && qr.converged);
        assert_eq!(qr.iterations, 0);
        let ratio = it.e_l2 / qr.e_l2;
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "{} vs {}", it.e_l2, qr.e_l2);
    }

    #[test]
    fn phase_tagged_errors() {
        let mut cfg = small();
        cfg.decomposition.counts = Some(vec![4, 4]);
        cfg.grids.collocation = Some(vec![1, 1]);
        let err = match build_instance(&cfg, 0) {
            Err(e) => e,
            Ok(_) => panic!("expected an empty-subdomain error"),
        };
        assert!(matches!(err, Error::Phase { phase: "pca", .. }) || matches!(err, Error::Phase { phase: "assemble", .. }), "{err}");
        let mut cfg = small();
        cfg.solver.solver = SolverKind::QrDirect;
        cfg.run.dense_limit = 10;
        let inst = build_instance(&cfg, 0).unwrap();
        assert!(matches!(
            solve_instance(&inst, &cfg.solver, 10),
            Err(Error::Phase { phase: "solve", .. })
        ));
    }

    #[test]
    fn scaling_schedule_and_cap() {
        let base = RunConfig::for_problem(ProblemKind::Example1);
        let c = scaling_config(&base, 3, PreconditionerKind::None).unwrap();
        assert_eq!(c.counts(), &[4, 4]);
        assert_eq!(c.collocation(), &[40, 40]);
        assert_eq!(c.basis.neurons, 32);
        assert_eq!(c.solver.restart, Some(20));
        assert_eq!(c.problem.n, Some(3));
        let c = scaling_config(&base, 2, PreconditionerKind::As).unwrap();
        assert_eq!(c.counts(), &[2, 2]);
        assert_eq!(c.collocation(), &[20, 20]);
        assert_eq!(c.solver.restart, None);
        let mut capped = base.clone();
        capped.scaling.levels = vec![5];
        assert!(matches!(scaling(&capped, None, false), Err(Error::Config(_))));
    }

    #[test]
    fn spectrum_of_exact_preconditioner() {
        let mut cfg = small();
        cfg.basis.tau = Tau::Value(1e-3);
        let dir = tempfile::tempdir().unwrap();
        cfg.solver.preconditioner = PreconditionerKind::Sas;
        let c = spectrum(&cfg, Some(dir.path())).unwrap();
        for z in row_space_eigenvalues(&c.precond_spectrum, c.rank) {
            assert!((z - 1.0).norm() < 1e-6, "{z}");
        }
        let text = std::fs::read_to_string(dir.path().join("spectrum_precond.csv")).unwrap();
        assert!(text.starts_with("index,real,imag\n0,"));
        assert_eq!(text.lines().count(), c.precond_spectrum.len() + 1);

        // weighted variants act as the identity on the row space
        let inst = build_instance(&cfg, 0).unwrap();
        let a = inst.system.normal_operator();
        let z: Vec<f64> = (0..inst.dof()).map(|i| (0.7 * i as f64).sin()).collect();
        let w = a.apply(&z);
        let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        for kind in [PreconditionerKind::Sas, PreconditionerKind::Ras] {
            let m = build_preconditioner(&inst, kind).unwrap().unwrap();
            let mw = m.apply(&a.apply(&w));
            let err = mw.iter().zip(&w).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * wn, "{kind:?}: {err:e}");
        }
    }
}
