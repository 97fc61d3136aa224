//! Random single-hidden-layer bases, cosine partition-of-unity windows, and
//! the constraining operator that builds boundary data into the ansatz.
//!
//! On subdomain `j` the `k`-th local basis function is
//! `L(x) * w_j(x) * act(R_k . xhat + b_k)`, where `xhat` is `x` mapped onto
//! `[-1, 1]^d` by the subdomain box. The windows use raw coordinates.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::calculus::{Jet2, JetField, ScalarTriple, MAX_DIM};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, CartesianDecomposition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Sin,
}

impl Activation {
    #[inline]
    pub fn triple(self, s: f64) -> ScalarTriple {
        match self {
            Activation::Tanh => ScalarTriple::tanh(s),
            Activation::Sin => ScalarTriple::sin(s),
        }
    }

    #[inline]
    pub fn eval(self, s: f64) -> f64 {
        match self {
            Activation::Tanh => s.tanh(),
            Activation::Sin => s.sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sin => "sin",
        }
    }
}

/// Seed of subdomain `j`'s network, mixed from the user seed (splitmix64).
pub fn subdomain_seed(seed: u64, j: usize) -> u64 {
    let mut z = seed ^ (j as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Frozen hidden layer `act(R x + b)` with `R`, `b` drawn from `U(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomBasis {
    /// `m x d`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
    dim: usize,
    seed: u64,
}

impl RandomBasis {
    pub fn new(seed: u64, neurons: usize, dim: usize, activation: Activation) -> Result<Self> {
        if neurons == 0 {
            return Err(Error::InvalidArgument("hidden width must be at least 1".into()));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("input dimension {dim} unsupported")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
        let weights = (0..neurons * dim).map(|_| dist.sample(&mut rng)).collect();
        let bias = (0..neurons).map(|_| dist.sample(&mut rng)).collect();
        Ok(Self {
            weights,
            bias,
            activation,
            dim,
            seed,
        })
    }

    /// Basis of subdomain `j` under the global `seed`.
    pub fn for_subdomain(
        seed: u64,
        j: usize,
        neurons: usize,
        dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        Self::new(subdomain_seed(seed, j), neurons, dim, activation)
    }

    /// Builds a basis from explicit parameters (`weights` is `m x d` row-major).
    pub fn from_parts(weights: Vec<f64>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let m = bias.len();
        if m == 0 || !weights.len().is_multiple_of(m) {
            return Err(Error::InvalidArgument("weight/bias shapes disagree".into()));
        }
        let dim = weights.len() / m;
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("input dimension {dim} unsupported")));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            dim,
            seed: 0,
        })
    }

    pub fn neurons(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn preactivation(&self, k: usize, xhat: &[f64]) -> f64 {
        let row = &self.weights[k * self.dim..(k + 1) * self.dim];
        self.bias[k] + row.iter().zip(xhat).map(|(r, x)| r * x).sum::<f64>()
    }

    /// Jets of every neuron output at `x`, differentiated in original
    /// coordinates (the box normalization is folded into the seeds).
    pub fn phi_jets(&self, bx: &Aabb, x: &[f64]) -> Vec<Jet2> {
        let mut out = Vec::with_capacity(self.neurons());
        self.phi_jets_into(bx, x, &mut out);
        out
    }

    pub fn phi_jets_into(&self, bx: &Aabb, x: &[f64], out: &mut Vec<Jet2>) {
        out.clear();
        let d = self.dim;
        let xhat = bx.normalize(x);
        let mut slope = [0.0; MAX_DIM];
        for k in 0..self.neurons() {
            let row = &self.weights[k * d..(k + 1) * d];
            for a in 0..d {
                slope[a] = row[a] * bx.normalization_scale(a);
            }
            let z = Jet2::affine(self.preactivation(k, &xhat), &slope[..d]);
            out.push(z.compose(self.activation.triple(z.value())));
        }
    }

    /// Neuron outputs at `x` (values only).
    pub fn phi_values_into(&self, bx: &Aabb, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let xhat = bx.normalize(x);
        out.extend((0..self.neurons()).map(|k| self.activation.eval(self.preactivation(k, &xhat))));
    }
}

/// Cosine-bump partition of unity attached to a decomposition:
/// `what_j(x) = prod_i [1 + cos(pi (x_i - mu_ji) / sigma_ji)]^2` inside box `j`,
/// zero outside, and `w_j = what_j / sum_k what_k`.
///
/// Axes that are not split (one piece) contribute a constant factor.
#[derive(Debug, Clone)]
pub struct WindowSet {
    dec: CartesianDecomposition,
}

impl WindowSet {
    pub fn new(dec: &CartesianDecomposition) -> Self {
        Self { dec: dec.clone() }
    }

    pub fn decomposition(&self) -> &CartesianDecomposition {
        &self.dec
    }

    pub fn len(&self) -> usize {
        self.dec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec.is_empty()
    }

    fn axis_factor(&self, j: usize, axis: usize, xi: f64) -> ScalarTriple {
        if !self.dec.axis_is_split(axis) {
            return ScalarTriple::new(1.0, 0.0, 0.0);
        }
        let mu = self.dec.center(j)[axis];
        let sigma = self.dec.half_width(j)[axis];
        let a = PI / sigma;
        let (s, c) = (a * (xi - mu)).sin_cos();
        let g = 1.0 + c;
        ScalarTriple::new(g * g, -2.0 * a * g * s, 2.0 * a * a * (s * s - g * c))
    }

    /// Jet of the unnormalized bump of subdomain `j` (zero outside its box).
    pub fn bump_jet(&self, j: usize, x: &[f64]) -> Jet2 {
        let d = x.len();
        if !self.dec.subdomain(j).contains(x) {
            return Jet2::zero(d);
        }
        let mut out = Jet2::constant(d, 1.0);
        for (axis, &xi) in x.iter().enumerate() {
            let t = self.axis_factor(j, axis, xi);
            out = out * Jet2::variable(d, axis, xi, 1.0).compose(t);
        }
        out
    }

    pub fn bump_value(&self, j: usize, x: &[f64]) -> f64 {
        if !self.dec.subdomain(j).contains(x) {
            return 0.0;
        }
        x.iter()
            .enumerate()
            .map(|(axis, &xi)| self.axis_factor(j, axis, xi).f)
            .product()
    }

    /// Normalized window jets of every subdomain whose box contains `x`.
    pub fn windows_at(&self, x: &[f64]) -> Vec<(usize, Jet2)> {
        let cover = self.dec.covering(x);
        let bumps: Vec<Jet2> = cover.iter().map(|&k| self.bump_jet(k, x)).collect();
        let mut total = Jet2::zero(x.len());
        for b in &bumps {
            total += *b;
        }
        let inv = total.recip();
        cover.into_iter().zip(bumps).map(|(k, b)| (k, b * inv)).collect()
    }

    /// Normalized window values of every subdomain whose box contains `x`.
    pub fn window_values_at(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let cover = self.dec.covering(x);
        let bumps: Vec<f64> = cover.iter().map(|&k| self.bump_value(k, x)).collect();
        let total: f64 = bumps.iter().sum();
        cover.into_iter().zip(bumps).map(|(k, b)| (k, b / total)).collect()
    }

    /// Jet of the normalized window `w_j` at an in-domain point.
    pub fn window_jet(&self, j: usize, x: &[f64]) -> Jet2 {
        if !self.dec.subdomain(j).contains(x) {
            return Jet2::zero(x.len());
        }
        let own = self.bump_jet(j, x);
        if own.value() == 0.0 && own.gradient().iter().all(|&g| g == 0.0) {
            return Jet2::zero(x.len());
        }
        let mut total = Jet2::zero(x.len());
        for &k in self.dec.neighbors(j) {
            total += self.bump_jet(k, x);
        }
        own * total.recip()
    }
}

/// Ansatz transform `u -> L u + G`, with one `G` per solution component and
/// a shared `L`.
#[derive(Debug, Clone)]
pub struct ConstrainingOperator {
    pub l: JetField,
    pub g: Vec<JetField>,
}

impl ConstrainingOperator {
    pub fn new(l: JetField, g: Vec<JetField>) -> Self {
        assert!(!g.is_empty(), "at least one component");
        Self { l, g }
    }

    /// `L = 1`, `G = 0`: no constraint.
    pub fn identity(dim: usize, components: usize) -> Self {
        Self::new(
            JetField::constant(dim, 1.0),
            (0..components).map(|_| JetField::constant(dim, 0.0)).collect(),
        )
    }

    pub fn components(&self) -> usize {
        self.g.len()
    }

    /// Jets of `(L, G_component)` at `x`.
    pub fn jets(&self, component: usize, x: &[f64]) -> (Jet2, Jet2) {
        (self.l.jet(x), self.g[component].jet(x))
    }
}

/// Jets of `L w_j phi_j^k` for all `k` at `x`; zero outside box `j`.
pub fn localized_basis_jets(
    ws: &WindowSet,
    j: usize,
    basis: &RandomBasis,
    cop: &ConstrainingOperator,
    x: &[f64],
) -> Vec<Jet2> {
    let bx = ws.decomposition().subdomain(j);
    if !bx.contains(x) {
        return vec![Jet2::zero(x.len()); basis.neurons()];
    }
    let factor = cop.l.jet(x) * ws.window_jet(j, x);
    basis
        .phi_jets(bx, x)
        .into_iter()
        .map(|phi| factor * phi)
        .collect()
}
