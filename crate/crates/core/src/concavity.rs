//! Local concavity of the buzzers cost under weak signals.
//!
//! A weak signal from player `s` splits `μ` into `μ⁰` and `μ¹` with
//! `μ = (μ⁰ + μ¹)/2`. With time anchored at `t_s = 0`, the protocol for
//! `μ⁰` starts player `s` at `-γ₀`, the one for `μ¹` at `γ₁`, and both keep
//! every other start time. The cost is locally concave when the concealed
//! information of `μ` is at least the average of the concealed information
//! of `μ⁰` and `μ¹`; the difference splits into integrals over
//! `(-∞, -γ₀]`, `[-γ₀, γ₁]` and `[γ₁, ∞)`.

use serde::{Deserialize, Serialize};

use crate::buzzers::{concealed_integrand, SegmentedDensity, StartTimes};
use crate::error::{Error, Result};
use crate::measures::{InputDistribution, Point, LN2, ZERO_MASS};
use crate::quadrature::{integrate_cancelling, Estimate, Tolerance};

/// Quadrature tolerance for deficit integrals, in nats.
pub fn deficit_tolerance() -> Tolerance {
    Tolerance {
        abs: 1e-15,
        rel: 1e-9,
        max_depth: 40,
    }
}

/// The reduced measure
/// `μ_{e_1} = .. = μ_{e_{s-1}} = β`, `μ_{e_s} = .. = μ_{e_k} = e^{γ₀} β`,
/// `μ_0 = 1 - (s-1)β - (k-s+1) e^{γ₀} β`, where `γ₀` itself depends on
/// `μ_{e_s}` and the signal weakness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalMeasure {
    pub k: usize,
    /// Sender, numbered from 1.
    pub s: usize,
    pub beta: f64,
}

impl CanonicalMeasure {
    pub fn new(k: usize, s: usize, beta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::OutOfRange(format!("need k >= 2, got {k}")));
        }
        if s == 0 || s > k {
            return Err(Error::OutOfRange(format!("sender {s} outside 1..={k}")));
        }
        if !(beta > 0.0 && beta < 1.0 / k as f64) {
            return Err(Error::OutOfRange(format!("beta {beta} outside (0, 1/{k})")));
        }
        Ok(CanonicalMeasure { k, s, beta })
    }

    pub fn sender(&self) -> usize {
        self.s - 1
    }

    /// `e^{γ₀}`, the positive root of `εβg² + (1 - ε - εβ)g - 1 = 0`.
    pub fn growth(&self, eps: f64) -> f64 {
        let b = 1.0 - eps - eps * self.beta;
        2.0 / (b + (b * b + 4.0 * eps * self.beta).sqrt())
    }

    pub fn measure(&self, eps: f64) -> Result<InputDistribution> {
        let (k, s) = (self.k, self.s);
        let g = self.growth(eps);
        let high = g * self.beta;
        let zero = 1.0 - (s - 1) as f64 * self.beta - (k - s + 1) as f64 * high;
        if zero < 0.0 {
            return Err(Error::OutOfRange(format!("eps {eps} leaves negative mass on 0..0")));
        }
        let mut mass = vec![0.0; k + 2];
        mass[0] = zero;
        for i in 0..k {
            mass[1 + i] = if i + 1 < s { self.beta } else { high };
        }
        InputDistribution::normalized(k, mass)
    }
}

/// The two posteriors of the unbiased weak signal from `sender` and the
/// start times of the three protocols, anchored at `t_s = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub sender: usize,
    pub eps: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub beta_s: f64,
    pub zeta_s: f64,
    pub mu: InputDistribution,
    pub mu0: InputDistribution,
    pub mu1: InputDistribution,
    pub starts: StartTimes,
    pub starts0: StartTimes,
    pub starts1: StartTimes,
}

pub fn gamma0(beta_s: f64, eps: f64) -> f64 {
    ((1.0 + eps * beta_s) / (1.0 - eps * (1.0 - beta_s))).ln()
}

pub fn gamma1(beta_s: f64, eps: f64) -> f64 {
    ((1.0 + eps * (1.0 - beta_s)) / (1.0 - eps * beta_s)).ln()
}

pub fn perturb(mu: &InputDistribution, sender: usize, eps: f64) -> Result<Perturbation> {
    let k = mu.k();
    if sender >= k {
        return Err(Error::OutOfRange(format!("sender {} for k = {k}", sender + 1)));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::OutOfRange(format!("eps {eps} outside [0, 1)")));
    }
    let units = mu.unit_masses();
    if let Some(i) = units.iter().position(|&m| m <= ZERO_MASS) {
        return Err(Error::TrivialInstance(format!("player {} never holds a lone 1", i + 1)));
    }
    let beta_s = mu.prob_bit_one(sender);
    let zeta_s = 1.0 - beta_s;
    let scale = |up: bool| {
        let factors = if up {
            (1.0 + eps * beta_s, 1.0 - eps * zeta_s)
        } else {
            (1.0 - eps * beta_s, 1.0 + eps * zeta_s)
        };
        let mass = mu
            .points()
            .map(|(x, m)| m * if x.bit(sender) { factors.1 } else { factors.0 })
            .collect();
        InputDistribution::normalized(k, mass)
    };
    let mu0 = scale(true)?;
    let mu1 = scale(false)?;
    let g0 = gamma0(beta_s, eps);
    let g1 = gamma1(beta_s, eps);
    let times: Vec<f64> = units.iter().map(|m| (m / units[sender]).ln()).collect();
    let starts = StartTimes::new(times)?;
    Ok(Perturbation {
        sender,
        eps,
        gamma0: g0,
        gamma1: g1,
        beta_s,
        zeta_s,
        mu: mu.clone(),
        mu0,
        mu1,
        starts0: starts.with_time(sender, -g0)?,
        starts1: starts.with_time(sender, g1)?,
        starts,
    })
}

impl Perturbation {
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = vec![a, b];
        for st in [&self.starts, &self.starts0, &self.starts1] {
            pts.extend(st.times().iter().copied().filter(|&t| t > a && t < b));
        }
        if a < 0.0 && b > 0.0 {
            pts.push(0.0);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Deficit integrals over `[a, b]` in nats: `[external, internal]`.
    pub fn deficit_between(&self, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
        let k = self.mu.k();
        let mut est = Estimate {
            value: vec![0.0; 2],
            error: 0.0,
            evaluations: 0,
        };
        if !(b > a) {
            return Ok(est);
        }
        let mut buf = vec![0.0; k + 1];
        let mut scratch = vec![0.0; k + 1];
        let sides = [
            (self.mu.masses(), &self.starts, 1.0),
            (self.mu0.masses(), &self.starts0, -0.5),
            (self.mu1.masses(), &self.starts1, -0.5),
        ];
        let mut f = |t: f64, out: &mut [f64]| {
            out.fill(0.0);
            for (mass, starts, w) in sides {
                concealed_integrand(mass, starts, t, &mut buf, &mut scratch);
                out[0] += w * buf[0];
                out[1] += w * buf[1..].iter().sum::<f64>();
                out[2] += buf.iter().map(|v| v.abs()).sum::<f64>();
            }
        };
        for w in self.breakpoints(a, b).windows(2) {
            est.accumulate(&integrate_cancelling(2, &mut f, w[0], w[1], tol)?);
        }
        Ok(est)
    }

    /// Deficit over the window `[-γ₀, γ₁]`.
    pub fn window_deficit(&self) -> Result<Deficit> {
        let est = self.deficit_between(-self.gamma0, self.gamma1, deficit_tolerance())?;
        Ok(Deficit::from_nats(&est))
    }

    /// Largest violation over support points of
    /// `μ_z P[buzz in window | z] = avg_b μ^b_z P^b[buzz in window | z]`.
    pub fn same_average_error(&self) -> Result<f64> {
        let (a, b) = (-self.gamma0, self.gamma1);
        let d = SegmentedDensity::new(&self.mu, &self.starts, &[a, b])?;
        let d0 = SegmentedDensity::new(&self.mu0, &self.starts0, &[a, b])?;
        let d1 = SegmentedDensity::new(&self.mu1, &self.starts1, &[a, b])?;
        let mut worst: f64 = 0.0;
        for (z, m) in self.mu.points() {
            let lhs = m * d.mass_between(z, a, b);
            let rhs = 0.5 * (self.mu0.mass(z) * d0.mass_between(z, a, b) + self.mu1.mass(z) * d1.mass_between(z, a, b));
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    }
}

/// Deficit integrals in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deficit {
    pub external: f64,
    pub internal: f64,
    pub error: f64,
}

impl Deficit {
    fn from_nats(est: &Estimate) -> Self {
        Deficit {
            external: est.value[0] / LN2,
            internal: est.value[1] / LN2,
            error: est.error / LN2,
        }
    }
}

/// Window deficit of `μ` under the weak signal from `sender`.
pub fn window_deficit(mu: &InputDistribution, sender: usize, eps: f64) -> Result<Deficit> {
    perturb(mu, sender, eps)?.window_deficit()
}

pub fn deficit_external(c: &CanonicalMeasure, eps: f64) -> Result<f64> {
    Ok(window_deficit(&c.measure(eps)?, c.sender(), eps)?.external)
}

pub fn deficit_internal(c: &CanonicalMeasure, eps: f64) -> Result<f64> {
    Ok(window_deficit(&c.measure(eps)?, c.sender(), eps)?.internal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    External,
    Internal,
}

/// Predicted `ε³` coefficient of the window deficit, in bits.
pub fn taylor_coefficient(c: &CanonicalMeasure, which: Which) -> Result<f64> {
    let (k, s, b) = (c.k as f64, c.s as f64, c.beta);
    if !(b > 0.0 && b < 1.0 / k) {
        return Err(Error::OutOfRange(format!("beta {b} outside (0, 1/{k})")));
    }
    let lead = (k + 5.0 * s - 6.0) * b;
    let ext = lead * (1.0 - 2.0 * b) / (12.0 * (1.0 - b) * LN2);
    Ok(match which {
        Which::External => ext,
        Which::Internal if c.k == 2 => ext,
        Which::Internal => {
            let poly = (3.0 * k - 2.0) * b * b - 4.0 * (k - 1.0) * b + k - 1.0;
            lead * poly / (12.0 * (1.0 - b) * (1.0 - 2.0 * b) * LN2)
        }
    })
}

/// `c · k^{-20} · min{β, 1 - kβ}³`.
pub fn weakness_budget(c: &CanonicalMeasure, constant: f64) -> f64 {
    let k = c.k as f64;
    constant * k.powi(-20) * c.beta.min(1.0 - k * c.beta).powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl Status {
    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub status: Status,
    /// Measured external and internal values, bits.
    pub value: [f64; 2],
    /// The bound they are compared with, bits.
    pub bound: [f64; 2],
    pub note: String,
}

impl Check {
    fn skipped(note: impl Into<String>) -> Self {
        Check {
            status: Status::Skipped,
            value: [0.0; 2],
            bound: [0.0; 2],
            note: note.into(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutsideChecks {
    /// Deficit over `(-∞, -γ₀]` is nonnegative.
    pub left_tail: Check,
    /// Deficit over `[γ₁, γ₁ + 5]` vanishes.
    pub right_tail: Check,
    /// Deficit over `[t_{s-1}, -γ₀]` is at least
    /// `(1 - e^{-(s-1)L/2}) μ_0 μ_{e_s} ε² / (2(s-1))` (times `k - 1`
    /// internally), where `L = |t_{s-1}|`.
    pub eps2_bound: Check,
}

impl OutsideChecks {
    pub fn passed(&self) -> bool {
        self.left_tail.passed() && self.right_tail.passed() && self.eps2_bound.passed()
    }
}

pub fn outside_window_checks(c: &CanonicalMeasure, eps: f64) -> Result<OutsideChecks> {
    perturb(&c.measure(eps)?, c.sender(), eps)?.outside_checks()
}

impl Perturbation {
    pub fn outside_checks(&self) -> Result<OutsideChecks> {
        let tol = deficit_tolerance();
        let bits = |e: &Estimate| [e.value[0] / LN2, e.value[1] / LN2];

        let earliest = [&self.starts, &self.starts0, &self.starts1]
            .iter()
            .map(|s| s.earliest())
            .fold(f64::INFINITY, f64::min);
        let left = bits(&self.deficit_between(earliest, -self.gamma0, tol)?);
        let left_tail = Check {
            status: Status::from(left.iter().all(|&v| v >= -1e-12)),
            value: left,
            bound: [0.0; 2],
            note: String::new(),
        };

        let right = bits(&self.deficit_between(self.gamma1, self.gamma1 + 5.0, tol)?);
        let right_tail = Check {
            status: Status::from(right.iter().all(|v| v.abs() <= 1e-12)),
            value: right,
            bound: [0.0; 2],
            note: String::new(),
        };

        Ok(OutsideChecks {
            left_tail,
            right_tail,
            eps2_bound: self.eps2_check(tol)?,
        })
    }

    fn eps2_check(&self, tol: Tolerance) -> Result<Check> {
        // rank of the sender among players sorted by start time
        let order = self.starts.order();
        let rank = order.iter().position(|&i| i == self.sender).unwrap_or(0);
        if rank == 0 {
            return Ok(Check::skipped("no player starts before the sender"));
        }
        let prev = self.starts.time(order[rank - 1]);
        let l = prev.abs();
        if l <= 0.0 || self.gamma0 > l / 2.0 {
            return Ok(Check::skipped(format!("needs gamma0 <= L/2, have gamma0 = {:e}, L = {l:e}", self.gamma0)));
        }
        let s = rank as f64;
        let k = self.mu.k() as f64;
        let base = (1.0 - (-s * l / 2.0).exp()) * self.mu.mass(Point::Zeros) * self.mu.unit_mass(self.sender)
            / (2.0 * s)
            * self.eps
            * self.eps;
        let bound = [base / LN2, (k - 1.0) * base / LN2];
        let est = self.deficit_between(prev, -self.gamma0, tol)?;
        let value = [est.value[0] / LN2, est.value[1] / LN2];
        let slack = 1e-10 / LN2;
        Ok(Check {
            status: Status::from(value[0] >= bound[0] - slack && value[1] >= bound[1] - slack),
            value,
            bound,
            note: format!("L = {l}"),
        })
    }
}

/// Closed forms of the mixture densities `f`, `f⁰`, `f¹` on the window
/// for the canonical measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowDensities {
    pub canonical: CanonicalMeasure,
    pub eps: f64,
    pub gamma0: f64,
    pub gamma1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Base,
    Zero,
    One,
}

pub fn perturbed_densities(p: &Perturbation, c: &CanonicalMeasure) -> Result<WindowDensities> {
    let expected = c.measure(p.eps)?;
    let off = p
        .mu
        .masses()
        .iter()
        .zip(expected.masses())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if p.sender != c.sender() || off > 1e-12 {
        return Err(Error::OutOfRange("perturbation is not of the canonical measure".into()));
    }
    Ok(WindowDensities {
        canonical: *c,
        eps: p.eps,
        gamma0: p.gamma0,
        gamma1: p.gamma1,
    })
}

impl WindowDensities {
    /// Mixture density of buzzer `m` (0-based) at time `t` in
    /// `[-γ₀, γ₁)`.
    pub fn eval(&self, which: Branch, m: usize, t: f64) -> Result<f64> {
        let CanonicalMeasure { k, s, beta: b } = self.canonical;
        if !(t >= -self.gamma0 && t < self.gamma1) {
            return Err(Error::OutOfRange(format!("t = {t} outside the window")));
        }
        let (kf, sf) = (k as f64, s as f64);
        let m = m + 1;
        let e = self.eps;
        let g = self.gamma0.exp();
        let zeta = 1.0 - g * b;
        let a = (sf - 1.0) * (t + self.gamma0);
        let big_b = kf * t + (sf - 1.0) * self.gamma0;
        let et = t.exp();
        let v = if t < 0.0 {
            match which {
                Branch::Base if m >= s => 0.0,
                Branch::Base => (1.0 - (sf - 1.0) * b + (sf - 2.0) * g * b * et) * (-a).exp(),
                Branch::Zero if m > s => 0.0,
                Branch::Zero => {
                    (1.0 - e * zeta) * ((1.0 - g * b - (sf - 1.0) * b) / et + (sf - 1.0) * g * b) * (-a).exp()
                }
                Branch::One if m >= s => 0.0,
                Branch::One => {
                    (1.0 + g * b * (1.0 - e * g * b) * ((sf - 2.0) * et - (sf - 1.0) / g)) * (-a).exp()
                }
            }
        } else {
            let base = (1.0 - (sf - 1.0) * b - (kf - sf + 1.0) * g * b + (kf - 1.0) * g * b * et) * (-big_b).exp();
            match which {
                Branch::Base => base,
                Branch::Zero => (1.0 - e * zeta) * base,
                Branch::One if m == s => 0.0,
                Branch::One => {
                    (1.0 + g * b * (1.0 - e * g * b) * ((kf - 2.0) * et - (sf - 1.0) / g - kf + sf))
                        * et
                        * (-big_b).exp()
                }
            }
        };
        Ok(v)
    }
}

/// The measure on `s + a` players obtained by folding every player that
/// starts after the window into the all-zero input.
pub fn merge_late_players(mu: &InputDistribution, keep: usize) -> Result<InputDistribution> {
    let k = mu.k();
    if keep < 2 || keep > k {
        return Err(Error::OutOfRange(format!("cannot keep {keep} of {k} players")));
    }
    let mut mass = vec![0.0; keep + 2];
    mass[0] = mu.mass(Point::Zeros) + mu.unit_masses()[keep..].iter().sum::<f64>();
    mass[1..=keep].copy_from_slice(&mu.unit_masses()[..keep]);
    mass[keep + 1] = mu.mass(Point::Ones);
    InputDistribution::normalized(keep, mass)
}

/// Everything measured for one canonical instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub k: usize,
    pub s: usize,
    pub beta: f64,
    pub eps: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub ext_deficit: f64,
    pub int_deficit: f64,
    /// Predicted `coefficient · ε³` terms.
    pub taylor_ext: f64,
    pub taylor_int: f64,
    pub residual_ext: f64,
    pub residual_int: f64,
    pub same_average_error: f64,
    pub quadrature_error: f64,
    pub outside: OutsideChecks,
}

pub fn concavity_report(c: &CanonicalMeasure, eps: f64) -> Result<ConcavityReport> {
    let p = perturb(&c.measure(eps)?, c.sender(), eps)?;
    let d = p.window_deficit()?;
    let e3 = eps.powi(3);
    let taylor_ext = taylor_coefficient(c, Which::External)? * e3;
    let taylor_int = taylor_coefficient(c, Which::Internal)? * e3;
    Ok(ConcavityReport {
        k: c.k,
        s: c.s,
        beta: c.beta,
        eps,
        gamma0: p.gamma0,
        gamma1: p.gamma1,
        ext_deficit: d.external,
        int_deficit: d.internal,
        taylor_ext,
        taylor_int,
        residual_ext: d.external - taylor_ext,
        residual_int: d.internal - taylor_int,
        same_average_error: p.same_average_error()?,
        quadrature_error: d.error,
        outside: p.outside_checks()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gamma_examples() {
        assert_abs_diff_eq!(gamma0(0.25, 0.1), (1.025f64 / 0.925).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(gamma0(0.25, 0.1), 0.102_654_154_1, epsilon = 1e-10);
        assert_eq!(gamma0(0.3, 0.0), 0.0);
        assert_eq!(gamma1(0.3, 0.0), 0.0);
    }

    #[test]
    fn zero_eps_changes_nothing() {
        let mu = CanonicalMeasure::new(3, 2, 0.1).unwrap().measure(0.0).unwrap();
        let p = perturb(&mu, 1, 0.0).unwrap();
        assert_eq!(p.mu0, mu);
        assert_eq!(p.mu1, mu);
        assert_eq!((p.gamma0, p.gamma1), (0.0, 0.0));
        let d = p.window_deficit().unwrap();
        assert_eq!((d.external, d.internal), (0.0, 0.0));
        assert!(p.outside_checks().unwrap().passed());
    }

    #[test]
    fn perturbed_measures_average_to_mu() {
        let mu = InputDistribution::new(4, vec![0.3, 0.05, 0.2, 0.1, 0.25, 0.1]).unwrap();
        let p = perturb(&mu, 2, 0.2).unwrap();
        for (i, &m) in mu.masses().iter().enumerate() {
            assert_abs_diff_eq!(0.5 * (p.mu0.masses()[i] + p.mu1.masses()[i]), m, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(p.starts0.time(2), -p.gamma0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.starts1.time(2), p.gamma1, epsilon = 1e-15);
        assert_eq!(p.starts0.time(0), p.starts.time(0));
        // the protocols tuned to μ⁰ and μ¹ are the shifted ones
        let st0 = crate::buzzers::start_times(&p.mu0).unwrap();
        let shift = p.starts0.time(0) - st0.time(0);
        for i in 0..4 {
            assert_abs_diff_eq!(st0.time(i) + shift, p.starts0.time(i), epsilon = 1e-12);
        }
    }

    #[test]
    fn canonical_measure_has_sender_mass_ratio() {
        for (k, s, beta, eps) in [(2, 1, 0.25, 0.01), (5, 3, 0.1, 0.05), (4, 4, 0.2, 0.003)] {
            let c = CanonicalMeasure::new(k, s, beta).unwrap();
            let mu = c.measure(eps).unwrap();
            let p = perturb(&mu, c.sender(), eps).unwrap();
            assert_abs_diff_eq!(p.gamma0.exp(), c.growth(eps), epsilon = 1e-14);
            assert_abs_diff_eq!(mu.unit_mass(c.sender()), c.growth(eps) * beta, epsilon = 1e-15);
        }
        assert!(CanonicalMeasure::new(3, 4, 0.1).is_err());
        assert!(CanonicalMeasure::new(3, 1, 0.34).is_err());
    }

    fn canonical_gammas(beta: f64, eps: f64) -> (f64, f64) {
        // canonical measure with k = 2, s = 1, so β_s = e^{γ₀} β
        let c = CanonicalMeasure { k: 2, s: 1, beta };
        let bs = c.growth(eps) * beta;
        (gamma0(bs, eps), gamma1(bs, eps))
    }

    #[test]
    fn gamma_derivatives_at_zero() {
        for beta in [0.05, 0.2, 0.4] {
            let h = 1e-3;
            let v: Vec<(f64, f64)> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|j| canonical_gammas(beta, j * h)).collect();
            let d1 = |f: &dyn Fn(usize) -> f64| (f(3) - f(1)) / (2.0 * h);
            let d2 = |f: &dyn Fn(usize) -> f64| (f(3) - 2.0 * f(2) + f(1)) / (h * h);
            let d3 = |f: &dyn Fn(usize) -> f64| (f(4) - 2.0 * f(3) + 2.0 * f(1) - f(0)) / (2.0 * h * h * h);
            let g0 = |i: usize| v[i].0;
            let g1 = |i: usize| v[i].1;
            assert_eq!(v[2], (0.0, 0.0));
            assert_abs_diff_eq!(d1(&g0), 1.0, epsilon = 1e-4);
            assert_abs_diff_eq!(d2(&g0), 1.0 - 2.0 * beta, epsilon = 1e-4);
            // 2 - 10β + 8β² is sometimes quoted; implicit differentiation gives this
            assert_abs_diff_eq!(d3(&g0), 2.0 - 12.0 * beta + 6.0 * beta * beta, epsilon = 1e-4);
            assert_abs_diff_eq!(d1(&g1), 1.0, epsilon = 1e-4);
            assert_abs_diff_eq!(d2(&g1), 2.0 * beta - 1.0, epsilon = 1e-4);
            assert_abs_diff_eq!(d3(&g1), 2.0 + 6.0 * beta * beta, epsilon = 1e-4);
        }
    }

    #[test]
    fn window_densities_match_generic_density() {
        for (k, s, beta, eps) in [(2, 1, 0.2, 0.01), (3, 2, 0.1, 0.01), (4, 3, 0.05, 0.02), (4, 1, 0.1, 0.01), (5, 4, 0.1, 0.05)] {
            let c = CanonicalMeasure::new(k, s, beta).unwrap();
            let p = perturb(&c.measure(eps).unwrap(), c.sender(), eps).unwrap();
            let w = perturbed_densities(&p, &c).unwrap();
            let dens = [
                (Branch::Base, SegmentedDensity::new(&p.mu, &p.starts, &[]).unwrap()),
                (Branch::Zero, SegmentedDensity::new(&p.mu0, &p.starts0, &[]).unwrap()),
                (Branch::One, SegmentedDensity::new(&p.mu1, &p.starts1, &[]).unwrap()),
            ];
            let n = 1000;
            for i in 0..n {
                let t = -p.gamma0 + (p.gamma0 + p.gamma1) * (i as f64 + 0.5) / n as f64;
                for (which, d) in &dens {
                    for m in 0..k {
                        let closed = w.eval(*which, m, t).unwrap();
                        let generic = d.mixture(m, t);
                        assert!((closed - generic).abs() <= 1e-12, "{k} {s} {which:?} m={m} t={t}: {closed} vs {generic}");
                    }
                }
            }
            // the sender cannot buzz first in the μ¹ protocol inside the window
            assert_eq!(w.eval(Branch::One, c.sender(), -p.gamma0 / 2.0).unwrap(), 0.0);
            assert!(w.eval(Branch::Base, 0, p.gamma1).is_err());
        }
        let c = CanonicalMeasure::new(3, 2, 0.1).unwrap();
        let other = perturb(&c.measure(0.01).unwrap(), 0, 0.01).unwrap();
        assert!(perturbed_densities(&other, &c).is_err());
    }

    #[test]
    fn spot_value_at_window_origin() {
        let c = CanonicalMeasure::new(3, 2, 0.1).unwrap();
        let p = perturb(&c.measure(0.01).unwrap(), 1, 0.01).unwrap();
        let w = perturbed_densities(&p, &c).unwrap();
        let d0 = SegmentedDensity::new(&p.mu0, &p.starts0, &[]).unwrap();
        for m in 0..3 {
            assert!((w.eval(Branch::Zero, m, 0.0).unwrap() - d0.mixture(m, 0.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn taylor_examples() {
        let c = CanonicalMeasure::new(3, 1, 0.2).unwrap();
        assert_abs_diff_eq!(taylor_coefficient(&c, Which::External).unwrap(), 0.036_067_376, epsilon = 1e-9);
        let c = CanonicalMeasure::new(2, 1, 0.25).unwrap();
        assert_abs_diff_eq!(taylor_coefficient(&c, Which::External).unwrap(), 0.020_037_431_1, epsilon = 1e-10);
        assert_eq!(
            taylor_coefficient(&c, Which::Internal).unwrap(),
            taylor_coefficient(&c, Which::External).unwrap()
        );
        let tiny = CanonicalMeasure::new(2, 1, 1e-12).unwrap();
        assert!(taylor_coefficient(&tiny, Which::External).unwrap() < 1e-12);
        let c = CanonicalMeasure::new(3, 2, 0.1).unwrap();
        assert_abs_diff_eq!(taylor_coefficient(&c, Which::Internal).unwrap(), 0.148_443_968_9, epsilon = 1e-10);
    }

    #[test]
    fn budget_examples() {
        let c = CanonicalMeasure::new(2, 1, 0.25).unwrap();
        assert_abs_diff_eq!(weakness_budget(&c, 1.0), 0.25f64.powi(3) / 1048576.0, epsilon = 1e-22);
        assert!(weakness_budget(&CanonicalMeasure::new(2, 1, 1e-9).unwrap(), 1.0) < 1e-30);
        let mut last = 0.0;
        for beta in [0.01, 0.05, 0.1, 0.2] {
            let b = weakness_budget(&CanonicalMeasure::new(4, 1, beta).unwrap(), 1.0);
            assert!(b > last);
            last = b;
        }
    }

    #[test]
    fn deficits_follow_cubic_law() {
        // ratios deficit/ε³ from an independent arbitrary-precision integration
        let cases = [
            (3, 2, 0.1, 1e-2, 0.074_969_214_3, 0.148_737_306_4),
            (4, 3, 0.05, 5e-3, 0.073_951_924_6, 0.221_394_566_8),
            (3, 1, 0.2, 2.5e-3, 0.036_034_056_2, 0.068_025_737_4),
        ];
        for (k, s, beta, eps, ext, int) in cases {
            let c = CanonicalMeasure::new(k, s, beta).unwrap();
            let d = window_deficit(&c.measure(eps).unwrap(), c.sender(), eps).unwrap();
            let e3 = eps * eps * eps;
            assert!((d.external / e3 - ext).abs() < 1e-6 * ext, "{k} {s} {beta}: {} vs {ext}", d.external / e3);
            assert!((d.internal / e3 - int).abs() < 1e-6 * int, "{k} {s} {beta}: {} vs {int}", d.internal / e3);
        }
    }

    #[test]
    fn outside_checks_on_canonical_and_staggered() {
        let c = CanonicalMeasure::new(3, 2, 0.1).unwrap();
        let o = outside_window_checks(&c, 0.01).unwrap();
        assert!(o.passed());
        assert_eq!(o.eps2_bound.status, Status::Skipped);
        let c1 = CanonicalMeasure::new(3, 1, 0.1).unwrap();
        assert_eq!(outside_window_checks(&c1, 0.01).unwrap().eps2_bound.status, Status::Skipped);

        let m = 0.1;
        let mu = InputDistribution::new(3, vec![1.0 - m * (2.0 + (-1.0f64).exp()), m * (-1.0f64).exp(), m, m, 0.0]).unwrap();
        let p = perturb(&mu, 1, 0.05).unwrap();
        let o = p.outside_checks().unwrap();
        assert_eq!(o.eps2_bound.status, Status::Pass, "{o:?}");
        assert!(o.eps2_bound.value[0] > o.eps2_bound.bound[0]);
        assert!(o.left_tail.passed() && o.right_tail.passed());
    }

    #[test]
    fn same_average_holds() {
        for mu in [
            CanonicalMeasure::new(4, 2, 0.1).unwrap().measure(0.05).unwrap(),
            InputDistribution::new(4, vec![0.3, 0.05, 0.2, 0.1, 0.25, 0.1]).unwrap(),
        ] {
            for s in 0..4 {
                assert!(perturb(&mu, s, 0.05).unwrap().same_average_error().unwrap() < 1e-11);
            }
        }
    }

    #[test]
    fn merging_late_players_keeps_external_deficit() {
        let mu = InputDistribution::new(4, vec![0.4, 0.05, 0.1, 0.2, 0.25, 0.0]).unwrap();
        let merged = merge_late_players(&mu, 2).unwrap();
        assert_abs_diff_eq!(merged.mass(Point::Zeros), 0.85, epsilon = 1e-15);
        let a = window_deficit(&mu, 1, 0.01).unwrap();
        let b = window_deficit(&merged, 1, 0.01).unwrap();
        assert_abs_diff_eq!(a.external, b.external, epsilon = 1e-11);
    }
}
