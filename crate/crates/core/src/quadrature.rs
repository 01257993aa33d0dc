//! Adaptive Gauss–Legendre quadrature.
//!
//! Every interval is integrated with a 10-point and a 20-point rule; the
//! difference is the local error estimate and the 20-point value is kept.
//! Intervals that miss their share of the tolerance are bisected. The
//! integrators are vector valued so that several functionals sharing one
//! expensive integrand evaluation can be integrated in a single pass.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Rule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn rules() -> &'static (Rule, Rule) {
    static RULES: OnceLock<(Rule, Rule)> = OnceLock::new();
    RULES.get_or_init(|| (Rule::new(10), Rule::new(20)))
}

/// Stopping criteria for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Absolute tolerance for the whole interval, shared out by length.
    pub abs: f64,
    /// Relative tolerance applied per subinterval.
    pub rel: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-13,
            rel: 1e-10,
            max_depth: 48,
        }
    }
}

impl Tolerance {
    pub fn tighter(self, factor: f64) -> Self {
        Tolerance {
            abs: self.abs / factor,
            rel: self.rel / factor,
            ..self
        }
    }
}

/// Result of a vector-valued integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<f64>,
    /// Sum over accepted subintervals of the largest component error.
    pub error: f64,
    pub evaluations: usize,
}

impl Estimate {
    fn zero(dim: usize) -> Self {
        Estimate {
            value: vec![0.0; dim],
            error: 0.0,
            evaluations: 0,
        }
    }

    pub fn accumulate(&mut self, other: &Estimate) {
        for (v, o) in self.value.iter_mut().zip(&other.value) {
            *v += o;
        }
        self.error += other.error;
        self.evaluations += other.evaluations;
    }
}

struct Panel {
    coarse: Vec<f64>,
    fine: Vec<f64>,
    magnitude: f64,
}

// With `floor`, the integrand writes one extra trailing value: the size of
// the terms that cancel inside it, used only to judge roundoff.
fn panel<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, dim: usize, floor: bool, buf: &mut [f64]) -> Panel {
    let (g10, g20) = rules();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut coarse = vec![0.0; dim];
    let mut fine = vec![0.0; dim];
    let mut magnitude = 0.0;
    for (x, w) in g10.nodes().iter().zip(g10.weights()) {
        f(mid + half * x, buf);
        for (c, v) in coarse.iter_mut().zip(buf.iter()) {
            *c += w * v;
        }
    }
    for (x, w) in g20.nodes().iter().zip(g20.weights()) {
        f(mid + half * x, buf);
        for (c, v) in fine.iter_mut().zip(buf.iter()) {
            *c += w * v;
        }
        magnitude += w * if floor { buf[dim].abs() } else { buf[..dim].iter().map(|v| v.abs()).sum() };
    }
    for c in coarse.iter_mut().chain(fine.iter_mut()) {
        *c *= half;
    }
    Panel {
        coarse,
        fine,
        magnitude: magnitude * half.abs(),
    }
}

/// Panels evaluated before an integration gives up.
pub const MAX_PANELS: usize = 2_000_000;

/// Integrate a vector-valued function over the finite interval `[a, b]`.
pub fn integrate_vec<F>(dim: usize, f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64, &mut [f64]),
{
    adapt(dim, false, f, a, b, tol)
}

/// Like [`integrate_vec`] for integrands that are small differences of
/// large terms. `f` fills `dim + 1` values; the last is the pointwise size
/// of the cancelling terms and only sets the roundoff floor.
pub fn integrate_cancelling<F>(dim: usize, f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64, &mut [f64]),
{
    adapt(dim, true, f, a, b, tol)
}

fn adapt<F>(dim: usize, floor: bool, mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut out = Estimate::zero(dim);
    if a == b {
        return Ok(out);
    }
    let total = (b - a).abs();
    let mut buf = vec![0.0; dim + floor as usize];
    let mut stack = vec![(a, b, 0u32)];
    let mut worst: Option<(f64, f64, f64)> = None;
    let mut panels = 0;
    while let Some((lo, hi, depth)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(Error::Quadrature { a: lo, b: hi, error: f64::NAN });
        }
        let p = panel(&mut f, lo, hi, dim, floor, &mut buf);
        out.evaluations += 30;
        let err = p
            .coarse
            .iter()
            .zip(&p.fine)
            .map(|(c, v)| (c - v).abs())
            .fold(0.0, f64::max);
        let scale = p.fine.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let share = tol.abs * (hi - lo).abs() / total;
        let roundoff = 64.0 * f64::EPSILON * p.magnitude;
        let ok = err <= share.max(tol.rel * scale) || err <= roundoff;
        if ok || depth >= tol.max_depth {
            if !ok && worst.is_none_or(|w| err > w.2) {
                worst = Some((lo, hi, err));
            }
            for (v, x) in out.value.iter_mut().zip(&p.fine) {
                *v += x;
            }
            out.error += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    match worst {
        Some((a, b, error)) => Err(Error::Quadrature { a, b, error }),
        None => Ok(out),
    }
}

/// Integrate a vector-valued function over `[a, ∞)`.
///
/// The substitution `u = exp(-rate·(t - a))` maps the ray onto `(0, 1]`;
/// the transformed integrand `f(a - ln(u)/rate) / (rate·u)` is taken to be
/// 0 at `u = 0`. Pick `rate` at most half the decay rate of `f` so that the
/// transformed integrand vanishes continuously there.
pub fn integrate_tail_vec<F>(dim: usize, mut f: F, a: f64, rate: f64, tol: Tolerance) -> Result<Estimate>
where
    F: FnMut(f64, &mut [f64]),
{
    assert!(rate > 0.0, "tail rate must be positive");
    let g = |u: f64, out: &mut [f64]| {
        if u <= 0.0 {
            out.fill(0.0);
            return;
        }
        f(a - u.ln() / rate, out);
        let jac = rate * u;
        for v in out.iter_mut() {
            *v /= jac;
        }
    };
    integrate_vec(dim, g, 0.0, 1.0, tol)
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<(f64, f64)> {
    let est = integrate_vec(1, |t, out| out[0] = f(t), a, b, tol)?;
    Ok((est.value[0], est.error))
}
