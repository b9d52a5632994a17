//! Gauss–Hermite (standard Gaussian), Gauss–Legendre and Simpson rules.

use crate::error::{Error, Result};

/// Largest dimension the tensorized Gauss–Hermite rule accepts.
pub const MAX_TENSOR_DIM: usize = 4;

/// Default nodes per axis for Gaussian expectations.
pub const DEFAULT_ORDER: usize = 40;

/// Nodes and weights of the `n`-point rule for `∫ g(z) N(0,1)(dz)`.
///
/// Physicists' nodes are found by Newton iteration on the orthonormal
/// Hermite recurrence, then rescaled by `√2`; weights are renormalized so
/// that they sum to one.
pub fn gauss_hermite_standard(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Hermite order must be positive");
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    let mut z = 0.0_f64;
    for i in 1..=m {
        z = match i {
            1 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            2 => z - 1.14 * nf.powf(0.426) / z,
            3 => 1.86 * z - 0.86 * x[0],
            4 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 3],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i - 1] = z;
        x[n - i] = -z;
        w[i - 1] = 2.0 / (pp * pp);
        w[n - i] = w[i - 1];
    }
    let mut pairs: Vec<(f64, f64)> = x
        .into_iter()
        .zip(w)
        .map(|(xi, wi)| (xi * std::f64::consts::SQRT_2, wi))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let nodes = pairs.iter().map(|p| p.0).collect();
    let weights = pairs.iter().map(|p| p.1 / total).collect();
    (nodes, weights)
}

/// Tensorized Gauss–Hermite rule for the standard Gaussian on `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    order: usize,
    /// Flattened `len × dim` node coordinates.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_hermite(dim: usize, order: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_TENSOR_DIM {
            return Err(Error::Unsupported(format!(
                "tensor Gauss–Hermite rule in dimension {dim} (supported: 1..={MAX_TENSOR_DIM})"
            )));
        }
        if order == 0 {
            return Err(Error::InvalidInput("quadrature order must be positive".into()));
        }
        let (x1, w1) = gauss_hermite_standard(order);
        let len = order.pow(dim as u32);
        let mut nodes = Vec::with_capacity(len * dim);
        let mut weights = Vec::with_capacity(len);
        let mut idx = vec![0usize; dim];
        for _ in 0..len {
            let mut w = 1.0;
            for &k in &idx {
                nodes.push(x1[k]);
                w *= w1[k];
            }
            weights.push(w);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < order {
                    break;
                }
                *slot = 0;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            dim,
            order,
            nodes,
            weights,
        })
    }

    pub fn default_for(dim: usize) -> Result<Self> {
        Self::gauss_hermite(dim, DEFAULT_ORDER)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E g(Z)` for `Z ~ N(0, I_d)`.
    pub fn expect(&self, mut g: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len() {
            acc += self.weights[k] * g(self.node(k));
        }
        acc
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre integration of `g` over `[a, b]` with `panels`
/// panels of `order` points each.
pub fn composite_gauss_legendre(
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
    mut g: impl FnMut(f64) -> f64,
) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for k in 0..order {
            acc += 0.5 * h * w[k] * g(mid + 0.5 * h * x[k]);
        }
    }
    acc
}

/// Composite Simpson weights on `n` uniform intervals (`n` even).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even, positive interval count");
    let mut w = vec![0.0; n + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        g: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = g(lm);
        let frm = g(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = g(a);
    let fb = g(b);
    let fm = g(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(g, a, b, fa, fm, fb, whole, tol, 48)
}
