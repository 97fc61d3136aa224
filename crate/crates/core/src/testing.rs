//! Central finite-difference oracle for unit tests.

use crate::calculus::Jet2;

pub struct FdJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

/// Central differences with one Richardson step, so the truncation error is
/// `O(h^4)`.
pub fn fd_jet(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> FdJet {
    let coarse = fd_jet_plain(&f, x, h);
    let fine = fd_jet_plain(&f, x, h / 2.0);
    let rx = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    FdJet {
        value: fine.value,
        grad: coarse.grad.iter().zip(&fine.grad).map(|(c, f)| rx(*c, *f)).collect(),
        hess: coarse
            .hess
            .iter()
            .zip(&fine.hess)
            .map(|(cr, fr)| cr.iter().zip(fr).map(|(c, f)| rx(*c, *f)).collect())
            .collect(),
    }
}

fn fd_jet_plain(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> FdJet {
    let d = x.len();
    let at = |shifts: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(a, s) in shifts {
            y[a] += s;
        }
        f(&y)
    };
    let f0 = f(x);
    let grad = (0..d)
        .map(|a| (at(&[(a, h)]) - at(&[(a, -h)])) / (2.0 * h))
        .collect();
    let mut hess = vec![vec![0.0; d]; d];
    for i in 0..d {
        hess[i][i] = (at(&[(i, h)]) - 2.0 * f0 + at(&[(i, -h)])) / (h * h);
        for j in i + 1..d {
            let v = (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)])
                + at(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    FdJet {
        value: f0,
        grad,
        hess,
    }
}

/// Max-norm relative comparison of gradient and Hessian, with the reference
/// magnitude floored at 1.
pub fn assert_jet_matches_fd(jet: &Jet2, fd: &FdJet, rel: f64) {
    let d = fd.grad.len();
    assert!((jet.value() - fd.value).abs() <= 1e-12 * fd.value.abs().max(1.0));
    let gscale = fd.grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
    for a in 0..d {
        assert!(
            (jet.grad(a) - fd.grad[a]).abs() <= rel * gscale,
            "gradient[{a}]: jet {} vs fd {}",
            jet.grad(a),
            fd.grad[a]
        );
    }
    let hscale = fd
        .hess
        .iter()
        .flatten()
        .fold(1.0f64, |m, h| m.max(h.abs()));
    for i in 0..d {
        for j in 0..d {
            assert!(
                (jet.hessian(i, j) - fd.hess[i][j]).abs() <= rel * hscale,
                "hessian[{i}][{j}]: jet {} vs fd {}",
                jet.hessian(i, j),
                fd.hess[i][j]
            );
        }
    }
}
