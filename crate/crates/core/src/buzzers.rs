//! The buzzers protocol for AND and its exact information cost.
//!
//! Player `i` holding a 0 switches on an exponential clock of rate 1 at its
//! start time `t_i = ln(μ_{e_i} / min_j μ_{e_j})`. The first clock to ring
//! ends the protocol with output 0; if no clock ever rings every player
//! holds a 1. The transcript is therefore the pair (first buzzer, time), or
//! the atom at infinity.
//!
//! With `Φ_x(t) = Σ_{i : x_i = 0} max(t - t_i, 0)`, the density of "player
//! `m` buzzes first at time `t`" given input `x` is `exp(-Φ_x(t))` when
//! `x_m = 0` and `t ≥ t_m`, and 0 otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{binary_entropy, statistical_distance, xlogx, InputDistribution, InputLabel, Point, LN2, ZERO_MASS};
use crate::quadrature::{integrate_vec, integrate_tail_vec, Estimate, Tolerance};

/// Start times of the buzzers, indexed by player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartTimes {
    times: Vec<f64>,
    /// Players sorted by start time, ties broken by index.
    order: Vec<usize>,
}

impl StartTimes {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::OutOfRange(format!("need at least two players, got {}", times.len())));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::OutOfRange(format!("start time of player {} is {}", i + 1, times[i])));
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
        Ok(StartTimes { times, order })
    }

    pub fn k(&self) -> usize {
        self.times.len()
    }

    /// Start time of player `i` (0-based).
    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Player indices in order of increasing start time.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn sorted(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.times[i]).collect()
    }

    pub fn earliest(&self) -> f64 {
        self.times[self.order[0]]
    }

    pub fn latest(&self) -> f64 {
        self.times[self.order[self.k() - 1]]
    }

    pub fn shifted(&self, by: f64) -> StartTimes {
        StartTimes {
            times: self.times.iter().map(|t| t + by).collect(),
            order: self.order.clone(),
        }
    }

    pub fn with_time(&self, player: usize, t: f64) -> Result<StartTimes> {
        let mut times = self.times.clone();
        times[player] = t;
        StartTimes::new(times)
    }

    /// Distinct start times in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.sorted();
        b.dedup();
        b
    }
}

/// Start times of the protocol tuned to `μ`, shifted so the earliest is 0.
pub fn start_times(mu: &InputDistribution) -> Result<StartTimes> {
    let units = mu.unit_masses();
    let min = units.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= ZERO_MASS {
        let zero = units.iter().position(|&m| m <= ZERO_MASS).unwrap_or(0);
        return Err(Error::TrivialInstance(format!("player {} never holds a lone 1", zero + 1)));
    }
    StartTimes::new(units.iter().map(|m| (m / min).ln()).collect())
}

/// Total active time `Φ_x(t)` accumulated before `t`.
pub fn phi(x: &InputLabel, t: f64, starts: &StartTimes) -> f64 {
    (0..x.k())
        .filter(|&i| !x.bit(i))
        .map(|i| (t - starts.time(i)).max(0.0))
        .sum()
}

pub fn phi_point(x: Point, t: f64, starts: &StartTimes) -> f64 {
    (0..starts.k())
        .filter(|&i| !x.bit(i))
        .map(|i| (t - starts.time(i)).max(0.0))
        .sum()
}

/// `f_x(π_t^m)` for a support point.
pub fn transcript_density(x: Point, m: usize, t: f64, starts: &StartTimes) -> f64 {
    if x.bit(m) || t < starts.time(m) {
        0.0
    } else {
        (-phi_point(x, t, starts)).exp()
    }
}

/// On one segment, `f_x(π_t^m) = exp(log_a - rate·t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub log_a: f64,
    pub rate: f64,
}

impl ExpTerm {
    pub fn eval(&self, t: f64) -> f64 {
        (self.log_a - self.rate * t).exp()
    }

    /// `∫_lo^hi exp(log_a - rate·t) dt`, with `hi` possibly infinite.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if self.rate == 0.0 {
            return self.log_a.exp() * (hi - lo);
        }
        let a = (self.log_a - self.rate * lo).exp();
        let b = if hi.is_finite() { (self.log_a - self.rate * hi).exp() } else { 0.0 };
        (a - b) / self.rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    /// Infinite for the last segment.
    pub hi: f64,
    /// `terms[p][m]`, with `p` the dense point index; `None` where the
    /// density vanishes on the whole segment.
    pub terms: Vec<Vec<Option<ExpTerm>>>,
}

/// Piecewise-exponential transcript densities for every support point and
/// buzzer, together with the input masses of the measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedDensity {
    pub k: usize,
    pub starts: StartTimes,
    pub mass: Vec<f64>,
    pub segments: Vec<Segment>,
    /// Probability of the silent transcript, per dense point index.
    pub atom: Vec<f64>,
}

impl SegmentedDensity {
    /// Density of the protocol with the given start times, segmented at
    /// the start times and at any extra breakpoints.
    pub fn new(mu: &InputDistribution, starts: &StartTimes, extra: &[f64]) -> Result<Self> {
        let k = mu.k();
        if starts.k() != k {
            return Err(Error::PlayerCountMismatch { left: k, right: starts.k() });
        }
        let mut breaks = starts.breakpoints();
        breaks.extend(extra.iter().copied().filter(|b| b.is_finite() && *b > starts.earliest()));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut segments = Vec::with_capacity(breaks.len());
        for (j, &lo) in breaks.iter().enumerate() {
            let hi = breaks.get(j + 1).copied().unwrap_or(f64::INFINITY);
            let active: Vec<bool> = (0..k).map(|i| starts.time(i) <= lo).collect();
            let terms = (0..k + 2)
                .map(|p| {
                    let x = Point::from_index(k, p);
                    let zeros: Vec<usize> = (0..k).filter(|&i| !x.bit(i) && active[i]).collect();
                    let term = ExpTerm {
                        log_a: zeros.iter().map(|&i| starts.time(i)).sum(),
                        rate: zeros.len() as f64,
                    };
                    (0..k).map(|m| (active[m] && !x.bit(m)).then_some(term)).collect()
                })
                .collect();
            segments.push(Segment { lo, hi, terms });
        }
        let mut atom = vec![0.0; k + 2];
        atom[k + 1] = 1.0;
        Ok(SegmentedDensity {
            k,
            starts: starts.clone(),
            mass: mu.masses().to_vec(),
            segments,
            atom,
        })
    }

    fn segment_at(&self, t: f64) -> Option<&Segment> {
        if self.segments.is_empty() || t < self.segments[0].lo {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.lo <= t);
        Some(&self.segments[idx - 1])
    }

    /// `f_x(π_t^m)`.
    pub fn eval(&self, x: Point, m: usize, t: f64) -> f64 {
        self.segment_at(t)
            .and_then(|s| s.terms[x.index(self.k)][m])
            .map_or(0.0, |term| term.eval(t))
    }

    /// The mixture `f(π_t^m) = Σ_x μ_x f_x(π_t^m)`.
    pub fn mixture(&self, m: usize, t: f64) -> f64 {
        (0..self.k + 2)
            .map(|p| self.mass[p] * self.eval(Point::from_index(self.k, p), m, t))
            .sum()
    }

    /// Total probability of all transcripts given `x`.
    pub fn total_mass(&self, x: Point) -> f64 {
        let p = x.index(self.k);
        let mut total = self.atom[p];
        for seg in &self.segments {
            for term in seg.terms[p].iter().flatten() {
                total += term.integral(seg.lo, seg.hi);
            }
        }
        total
    }

    /// Probability given `x` that some buzzer rings during `[a, b]`.
    pub fn mass_between(&self, x: Point, a: f64, b: f64) -> f64 {
        let p = x.index(self.k);
        let mut total = 0.0;
        for seg in &self.segments {
            let (lo, hi) = (seg.lo.max(a), seg.hi.min(b));
            if lo >= hi {
                continue;
            }
            for term in seg.terms[p].iter().flatten() {
                total += term.integral(lo, hi);
            }
        }
        total
    }
}

/// Transcript densities of the protocol tuned to `μ`.
pub fn density(mu: &InputDistribution) -> Result<SegmentedDensity> {
    SegmentedDensity::new(mu, &start_times(mu)?, &[])
}

/// Information cost of one protocol run under one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ICReport {
    pub external_bits: f64,
    pub internal_bits: f64,
    pub per_player_bits: Vec<f64>,
    /// `Σ_i H(X | Π, X_i)`.
    pub concealed_internal_bits: f64,
    /// `H(X | Π)`.
    pub concealed_external_bits: f64,
    pub quadrature_error_estimate: f64,
}

/// Information cost of the buzzers protocol tuned to `μ`.
///
/// A player whose lone-1 input has zero mass holds 0 whenever some other
/// player does, so its clock effectively starts at minus infinity: it
/// buzzes at once unless the input is all ones, and the transcript reveals
/// exactly whether `X = 1..1`.
pub fn information_cost(mu: &InputDistribution) -> Result<ICReport> {
    information_cost_tol(mu, Tolerance::default())
}

pub fn information_cost_tol(mu: &InputDistribution, tol: Tolerance) -> Result<ICReport> {
    if mu.unit_masses().iter().any(|&m| m <= ZERO_MASS) {
        return Ok(reveal_all_ones(mu));
    }
    information_cost_with_tol(mu, &start_times(mu)?, tol)
}

/// Cost of the protocol that only announces whether `X = 1..1`.
pub fn reveal_all_ones(mu: &InputDistribution) -> ICReport {
    let k = mu.k();
    let c = mu.mass(Point::Ones);
    let external = binary_entropy(c);
    let per_player: Vec<f64> = (0..k)
        .map(|i| {
            let p1 = mu.prob_bit_one(i);
            if p1 <= ZERO_MASS {
                0.0
            } else {
                p1 * binary_entropy(c / p1)
            }
        })
        .collect();
    report(mu, external_from(mu, external), per_player, 0.0)
}

fn external_from(mu: &InputDistribution, external: f64) -> f64 {
    // keeps H(X|Π) = H(X) - external consistent with the entropy rounding
    external.min(mu.entropy())
}

pub(crate) fn report(mu: &InputDistribution, external: f64, per_player: Vec<f64>, err: f64) -> ICReport {
    // adding 0.0 turns -0.0 into 0.0
    let external = external + 0.0;
    let per_player: Vec<f64> = per_player.into_iter().map(|b| b + 0.0).collect();
    let concealed_internal: f64 = (0..mu.k()).map(|i| mu.conditional_entropy_given(i)).sum::<f64>()
        - per_player.iter().sum::<f64>();
    ICReport {
        external_bits: external,
        internal_bits: per_player.iter().sum(),
        concealed_internal_bits: concealed_internal,
        concealed_external_bits: mu.entropy() - external,
        per_player_bits: per_player,
        quadrature_error_estimate: err,
    }
}

/// Cost under `μ` of the protocol with the given start times, which need
/// not be the ones tuned to `μ`.
pub fn information_cost_with(mu: &InputDistribution, starts: &StartTimes) -> Result<ICReport> {
    information_cost_with_tol(mu, starts, Tolerance::default())
}

pub fn information_cost_with_tol(mu: &InputDistribution, starts: &StartTimes, tol: Tolerance) -> Result<ICReport> {
    let k = mu.k();
    if starts.k() != k {
        return Err(Error::PlayerCountMismatch { left: k, right: starts.k() });
    }
    let est = concealed_nats(mu, starts, tol)?;
    let h_given_pi = est.value[0] / LN2;
    let external = (mu.entropy() - h_given_pi).max(0.0);
    let per_player = (0..k)
        .map(|i| (mu.conditional_entropy_given(i) - est.value[1 + i] / LN2).max(0.0))
        .collect();
    Ok(report(mu, external, per_player, est.error / LN2))
}

/// Integrates `H(X | Π)` and each `H(X | Π, X_i)` in nats.
///
/// Components: `[H(X|Π), H(X|Π,X_1), .., H(X|Π,X_k)]`. The all-ones input
/// only reaches the silent transcript, which it identifies exactly, so
/// only the finite-time transcripts contribute.
fn concealed_nats(mu: &InputDistribution, starts: &StartTimes, tol: Tolerance) -> Result<Estimate> {
    let k = mu.k();
    let dim = 1 + k;
    let mass = mu.masses().to_vec();
    let mut scratch = vec![0.0; k + 1];
    let integrand = |t: f64, out: &mut [f64]| concealed_integrand(&mass, starts, t, out, &mut scratch);
    let mut total = Estimate {
        value: vec![0.0; dim],
        error: 0.0,
        evaluations: 0,
    };
    let mut f = integrand;
    let breaks = starts.breakpoints();
    for w in breaks.windows(2) {
        total.accumulate(&integrate_vec(dim, &mut f, w[0], w[1], tol)?);
    }
    let rate = 0.5 * (k as f64 - 1.0);
    total.accumulate(&integrate_tail_vec(dim, &mut f, starts.latest(), rate, tol)?);
    Ok(total)
}

// Densities share the factor exp(-A(t)), A(t) = Σ_i max(t - t_i, 0). With
// w_0 = μ_0 and w_j = μ_{e_j} exp(max(t - t_j, 0)), the joint density of
// (X = x, buzzer m, time t) is exp(-A) w_x for every x with x_m = 0.
pub(crate) fn concealed_integrand(mass: &[f64], starts: &StartTimes, t: f64, out: &mut [f64], w: &mut [f64]) {
    let k = starts.k();
    out.fill(0.0);
    let mut a = 0.0;
    w[0] = mass[0];
    for j in 0..k {
        let lag = (t - starts.time(j)).max(0.0);
        a += lag;
        w[1 + j] = mass[1 + j] * lag.exp();
    }
    let scale = (-a).exp();
    if scale == 0.0 {
        return;
    }
    let total_w: f64 = w.iter().sum();
    let total_phi: f64 = w.iter().map(|&v| xlogx(v)).sum();
    for m in 0..k {
        if t < starts.time(m) {
            continue;
        }
        // m buzzing rules out e_m
        let wm = w[1 + m];
        let big = total_w - wm;
        let small = total_phi - xlogx(wm);
        out[0] += scale * (xlogx(big) - small);
        for i in 0..k {
            if i == m {
                out[1 + i] += scale * (xlogx(big) - small);
            } else {
                let wi = w[1 + i];
                out[1 + i] += scale * (xlogx(big - wi) - (small - xlogx(wi)));
            }
        }
    }
}

/// Cost of the protocol on the uniform distribution over `e_1, .., e_k`:
/// `log k - log(k-1)` external and `(k-2)(log(k-1) - log(k-2))` internal.
pub fn closed_form_uniform(k: usize) -> Result<(f64, f64)> {
    if k < 2 {
        return Err(Error::OutOfRange(format!("need k >= 2, got {k}")));
    }
    let kf = k as f64;
    let external = (kf / (kf - 1.0)).log2();
    let internal = if k == 2 { 0.0 } else { (kf - 2.0) * ((kf - 1.0) / (kf - 2.0)).log2() };
    Ok((external, internal))
}

/// One random pair of the continuity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub delta: f64,
    /// Cost differences between the two measures under the protocol tuned
    /// to the first one.
    pub external_gap: f64,
    pub internal_gap: f64,
    /// `2 k δ + 2 H(2δ)`, with `k = log₂` of the input space size.
    pub bound: f64,
    /// Weight of the full-revelation branch mixed into the protocol.
    pub mix_weight: f64,
    pub mix_increase_external: f64,
    pub mix_increase_internal: f64,
    /// `w · k`.
    pub mix_bound: f64,
    pub ok: bool,
}

fn random_measure<R: Rng>(rng: &mut R, k: usize, with_ones: bool) -> Result<InputDistribution> {
    let mut w: Vec<f64> = (0..k + 2).map(|_| rng.gen_range(0.05..1.0)).collect();
    if !with_ones {
        w[k + 1] = 0.0;
    }
    InputDistribution::normalized(k, w)
}

/// Random same-support pairs `μ₁, μ₂` with `|μ₁ - μ₂| ≤ max_delta`, both
/// priced under the protocol tuned to `μ₁`, plus a check that mixing in
/// full revelation with weight `w` costs at most `w k` extra bits.
pub fn continuity_sweep(k: usize, pairs: usize, max_delta: f64, seed: u64) -> Result<Vec<ContinuityRow>> {
    if k < 2 || !(max_delta > 0.0 && max_delta <= 0.25) {
        return Err(Error::OutOfRange(format!("need k >= 2 and 0 < max_delta <= 0.25, got {k}, {max_delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_size = k as f64;
    (0..pairs)
        .map(|j| {
            let with_ones = j % 2 == 1;
            let a = random_measure(&mut rng, k, with_ones)?;
            let nu = random_measure(&mut rng, k, with_ones)?;
            let lambda = rng.gen_range(0.0..max_delta);
            let mixed = a.masses().iter().zip(nu.masses()).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect();
            let b = InputDistribution::normalized(k, mixed)?;
            let delta = statistical_distance(&a, &b)?;
            let starts = start_times(&a)?;
            let ra = information_cost_with(&a, &starts)?;
            let rb = information_cost_with(&b, &starts)?;
            let bound = 2.0 * log_size * delta + 2.0 * binary_entropy((2.0 * delta).min(1.0));

            let w: f64 = rng.gen();
            let reveal_int: f64 = (0..k).map(|i| a.conditional_entropy_given(i)).sum();
            let inc_ext = w * (a.entropy() - ra.external_bits);
            let inc_int = w * (reveal_int - ra.internal_bits);
            let mix_bound = w * log_size;
            let ok = (ra.external_bits - rb.external_bits).abs() <= bound
                && (ra.internal_bits - rb.internal_bits).abs() <= bound
                && inc_ext <= mix_bound + 1e-12
                && inc_int <= mix_bound + 1e-12;
            Ok(ContinuityRow {
                delta,
                external_gap: ra.external_bits - rb.external_bits,
                internal_gap: ra.internal_bits - rb.internal_bits,
                bound,
                mix_weight: w,
                mix_increase_external: inc_ext,
                mix_increase_internal: inc_int,
                mix_bound,
                ok,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::statistical_distance;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn third() -> InputDistribution {
        let t = 1.0 / 3.0;
        InputDistribution::two_party(t, t, t, 0.0).unwrap()
    }

    #[test]
    fn start_time_examples() {
        let st = start_times(&InputDistribution::uniform_units(4).unwrap()).unwrap();
        assert!(st.times().iter().all(|&t| t == 0.0));
        let mu = InputDistribution::new(2, vec![0.7, 0.1, 0.2, 0.0]).unwrap();
        let st = start_times(&mu).unwrap();
        assert_eq!(st.time(0), 0.0);
        assert_abs_diff_eq!(st.time(1), std::f64::consts::LN_2, epsilon = 1e-15);
        let mu = InputDistribution::new(3, vec![0.4, 0.1, 0.1, 0.4, 0.0]).unwrap();
        let st = start_times(&mu).unwrap();
        assert_abs_diff_eq!(st.time(2), 4f64.ln(), epsilon = 1e-15);
        assert_eq!(st.order(), &[0, 1, 2]);
        let unsorted = InputDistribution::new(3, vec![0.4, 0.4, 0.1, 0.1, 0.0]).unwrap();
        assert_eq!(start_times(&unsorted).unwrap().order(), &[1, 2, 0]);
        let zero = InputDistribution::new(2, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        assert!(matches!(start_times(&zero), Err(Error::TrivialInstance(_))));
    }

    #[test]
    fn phi_examples() {
        let st = StartTimes::new(vec![0.0, 0.0, 4f64.ln()]).unwrap();
        let zeros: InputLabel = "000".parse().unwrap();
        let ones: InputLabel = "111".parse().unwrap();
        assert_eq!(phi(&zeros, -1.0, &st), 0.0);
        assert_eq!(phi(&zeros, 0.0, &st), 0.0);
        assert_eq!(phi(&ones, 7.0, &st), 0.0);
        assert_abs_diff_eq!(phi(&zeros, 1.0, &st), 2.0, epsilon = 1e-15);
        let e1: InputLabel = "100".parse().unwrap();
        assert_abs_diff_eq!(phi(&e1, 2.0, &st), 2.0 + 2.0 - 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn density_examples() {
        let mu = InputDistribution::uniform_units(2).unwrap();
        let d = density(&mu).unwrap();
        for t in [0.0, 0.3, 2.0] {
            assert_abs_diff_eq!(d.eval(Point::Unit(0), 1, t), (-t).exp(), epsilon = 1e-15);
            assert_eq!(d.eval(Point::Unit(0), 0, t), 0.0);
            assert_eq!(d.eval(Point::Ones, 0, t), 0.0);
        }
        assert_eq!(d.eval(Point::Zeros, 0, -0.1), 0.0);
        assert_abs_diff_eq!(d.total_mass(Point::Unit(0)), 1.0, epsilon = 1e-15);
        assert_eq!(d.total_mass(Point::Ones), 1.0);
    }

    #[test]
    fn segmented_density_matches_pointwise_formula() {
        let mu = InputDistribution::new(4, vec![0.3, 0.05, 0.2, 0.1, 0.25, 0.1]).unwrap();
        let st = start_times(&mu).unwrap();
        let d = SegmentedDensity::new(&mu, &st, &[0.4, 1.7]).unwrap();
        for step in 0..400 {
            let t = -0.5 + step as f64 * 0.01;
            for (p, _) in mu.points() {
                for m in 0..4 {
                    let a = d.eval(p, m, t);
                    let b = transcript_density(p, m, t, &st);
                    assert!((a - b).abs() <= 1e-14 * b.max(1.0), "{p:?} {m} {t}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn transcript_probabilities_normalize() {
        for k in 2..=6 {
            let mut mass: Vec<f64> = (0..k + 2).map(|i| 1.0 + (i * i % 5) as f64).collect();
            let s: f64 = mass.iter().sum();
            mass.iter_mut().for_each(|m| *m /= s);
            let mu = InputDistribution::new(k, mass).unwrap();
            let d = density(&mu).unwrap();
            for (p, _) in mu.points() {
                assert!((d.total_mass(p) - 1.0).abs() < 1e-10, "k={k} {p:?}");
            }
        }
    }

    #[test]
    fn uniform_units_match_closed_form() {
        for k in 2..=8 {
            let mu = InputDistribution::uniform_units(k).unwrap();
            let r = information_cost(&mu).unwrap();
            let (ext, int) = closed_form_uniform(k).unwrap();
            assert!((r.external_bits - ext).abs() < 1e-6, "k={k}: {} vs {ext}", r.external_bits);
            assert!((r.internal_bits - int).abs() < 1e-6, "k={k}: {} vs {int}", r.internal_bits);
            assert!(r.quadrature_error_estimate < 1e-8);
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_uniform(2).unwrap(), (1.0, 0.0));
        let (e, i) = closed_form_uniform(3).unwrap();
        assert_abs_diff_eq!(e, 0.584_962_500_721_156, epsilon = 1e-15);
        assert_abs_diff_eq!(i, 1.0, epsilon = 1e-15);
        let (e, i) = closed_form_uniform(5).unwrap();
        assert_abs_diff_eq!(e, 0.321_928_094_887_362, epsilon = 1e-14);
        assert_abs_diff_eq!(i, 1.245_112_497_836_531, epsilon = 1e-14);
        assert!(closed_form_uniform(1).is_err());
    }

    #[test]
    fn frozen_costs() {
        // values from an independent arbitrary-precision integration
        let cases: [(InputDistribution, f64, f64); 3] = [
            (third(), 0.732_527_514_350_811, 0.480_898_346_962_988),
            (
                InputDistribution::two_party(0.4, 0.35, 0.25, 0.0).unwrap(),
                0.656_544_537_704_383,
                0.470_070_206_315_119,
            ),
            (
                InputDistribution::new(3, vec![0.4, 0.1, 0.2, 0.3, 0.0]).unwrap(),
                0.302_087_829_094_365,
                0.575_374_614_179_305,
            ),
        ];
        for (mu, ext, int) in cases {
            let r = information_cost(&mu).unwrap();
            assert_abs_diff_eq!(r.external_bits, ext, epsilon = 1e-9);
            assert_abs_diff_eq!(r.internal_bits, int, epsilon = 1e-9);
            assert_abs_diff_eq!(r.concealed_external_bits, mu.entropy() - r.external_bits, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_measures() {
        let point = InputDistribution::point_mass(3, Point::Zeros).unwrap();
        let r = information_cost(&point).unwrap();
        assert_eq!((r.external_bits, r.internal_bits), (0.0, 0.0));
        // player 2 never holds a lone 1: only "X = 11" is revealed
        let mu = InputDistribution::two_party(0.5, 0.0, 0.25, 0.25).unwrap();
        let r = information_cost(&mu).unwrap();
        assert_abs_diff_eq!(r.external_bits, binary_entropy(0.25), epsilon = 1e-15);
        assert_eq!(r.per_player_bits[1], 0.0);
        assert_abs_diff_eq!(r.per_player_bits[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn all_ones_mass_is_revealed_by_silence() {
        // the silent transcript identifies 1..1, the buzzer identifies the rest
        let t = 1.0 / 3.0;
        let mu = InputDistribution::two_party(0.0, t, t, t).unwrap();
        let r = information_cost(&mu).unwrap();
        assert_abs_diff_eq!(r.external_bits, 3f64.log2(), epsilon = 1e-9);
        // identity: cost = h(c) + (1 - c) cost(μ') externally and
        // Σ_i H(B | X_i) + (1 - c) cost(μ') internally, B = [X = 1..1]
        for mu in [
            InputDistribution::two_party(0.2, 0.3, 0.1, 0.4).unwrap(),
            InputDistribution::new(3, vec![0.3, 0.1, 0.15, 0.2, 0.25]).unwrap(),
        ] {
            let (cond, c) = mu.without_ones().unwrap();
            let full = information_cost(&mu).unwrap();
            let base = information_cost(&cond).unwrap();
            let reveal = reveal_all_ones(&mu);
            assert_abs_diff_eq!(full.external_bits, reveal.external_bits + (1.0 - c) * base.external_bits, epsilon = 1e-9);
            assert_abs_diff_eq!(full.internal_bits, reveal.internal_bits + (1.0 - c) * base.internal_bits, epsilon = 1e-9);
        }
    }

    #[test]
    fn time_shift_invariance() {
        let mu = InputDistribution::new(3, vec![0.4, 0.1, 0.2, 0.3, 0.0]).unwrap();
        let st = start_times(&mu).unwrap();
        let a = information_cost_with(&mu, &st).unwrap();
        let b = information_cost_with(&mu, &st.shifted(-2.75)).unwrap();
        assert_abs_diff_eq!(a.external_bits, b.external_bits, epsilon = 1e-11);
        assert_abs_diff_eq!(a.internal_bits, b.internal_bits, epsilon = 1e-11);
    }

    #[test]
    fn relabeling_players_permutes_costs() {
        let mu = InputDistribution::new(3, vec![0.35, 0.1, 0.2, 0.3, 0.05]).unwrap();
        let swapped = InputDistribution::new(3, vec![0.35, 0.3, 0.2, 0.1, 0.05]).unwrap();
        let a = information_cost(&mu).unwrap();
        let b = information_cost(&swapped).unwrap();
        assert_abs_diff_eq!(a.external_bits, b.external_bits, epsilon = 1e-11);
        assert_abs_diff_eq!(a.per_player_bits[0], b.per_player_bits[2], epsilon = 1e-11);
        assert_abs_diff_eq!(a.per_player_bits[1], b.per_player_bits[1], epsilon = 1e-11);
    }

    #[test]
    fn continuity_sweep_is_deterministic_and_clean() {
        let a = continuity_sweep(3, 10, 0.1, 7).unwrap();
        let b = continuity_sweep(3, 10, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.ok && r.delta <= 0.1));
        assert!(continuity_sweep(3, 1, 0.0, 7).is_err());
    }

    fn measure(k: usize) -> impl Strategy<Value = InputDistribution> {
        proptest::collection::vec(0.05f64..1.0, k + 2).prop_map(move |mut w| {
            w[k + 1] = 0.0;
            let s: f64 = w.iter().sum();
            InputDistribution::new(k, w.iter().map(|x| x / s).collect()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn costs_are_bounded(mu in (2usize..6).prop_flat_map(measure)) {
            let r = information_cost(&mu).unwrap();
            prop_assert!(r.external_bits >= -1e-9);
            prop_assert!(r.internal_bits >= -1e-9);
            prop_assert!(r.external_bits <= mu.entropy() + 1e-9);
            prop_assert!(r.concealed_internal_bits >= -1e-9);
        }

        #[test]
        fn continuity_under_fixed_protocol(
            a in measure(3),
            b in measure(3),
            lambda in 0.0f64..0.3,
        ) {
            let mixed: Vec<f64> = a.masses().iter().zip(b.masses()).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect();
            let c = InputDistribution::normalized(3, mixed).unwrap();
            let delta = statistical_distance(&a, &c).unwrap();
            prop_assume!(delta <= 0.1);
            let st = start_times(&a).unwrap();
            let ra = information_cost_with(&a, &st).unwrap();
            let rc = information_cost_with(&c, &st).unwrap();
            let bound = 2.0 * 3.0 * delta + 2.0 * binary_entropy(2.0 * delta);
            prop_assert!((ra.internal_bits - rc.internal_bits).abs() <= bound);
            prop_assert!((ra.external_bits - rc.external_bits).abs() <= bound);
        }
    }
}
