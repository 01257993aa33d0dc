//! Single-bit signals, their information content, and the random walk that
//! replaces one strong signal by a sequence of weak ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{binary_entropy, statistical_distance, InputDistribution, Point, ZERO_MASS};

/// Tolerance for `Pr[B = 0] = 1/2`.
pub const UNBIASED_TOLERANCE: f64 = 1e-12;

/// Relative tolerance for ties and for order checks between masses.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Relative tolerance for membership in a segment of measures.
pub const SEGMENT_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_STEP_CAP: usize = 1_000_000;

// Keeps walk steps strictly inside the weakness budget despite rounding.
const WEAK_MARGIN: f64 = 1.0 - 1e-9;

/// A bit sent by player `sender` (0-based) whose law depends on its input
/// bit only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Signal {
    pub sender: usize,
    /// `Pr[B = 0 | x_s = 0]`.
    pub p0_given_0: f64,
    /// `Pr[B = 0 | x_s = 1]`.
    pub p0_given_1: f64,
}

impl Signal {
    pub fn new(sender: usize, p0_given_0: f64, p0_given_1: f64) -> Result<Self> {
        for p in [p0_given_0, p0_given_1] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::OutOfRange(format!("conditional probability {p}")));
            }
        }
        Ok(Signal {
            sender,
            p0_given_0,
            p0_given_1,
        })
    }

    /// The signal that always sends 0.
    pub fn constant(sender: usize) -> Self {
        Signal {
            sender,
            p0_given_0: 1.0,
            p0_given_1: 1.0,
        }
    }

    /// `Pr[B = b | x_s = bit]`.
    #[inline]
    pub fn pr_given(&self, b: u8, bit: bool) -> f64 {
        let p0 = if bit { self.p0_given_1 } else { self.p0_given_0 };
        if b == 0 {
            p0
        } else {
            1.0 - p0
        }
    }

    #[inline]
    pub fn pr_given_point(&self, b: u8, x: Point) -> f64 {
        self.pr_given(b, x.bit(self.sender))
    }

    /// `Pr[B = b]` under `μ`.
    pub fn pr(&self, mu: &InputDistribution, b: u8) -> f64 {
        let p1 = mu.prob_bit_one(self.sender);
        (1.0 - p1) * self.pr_given(b, false) + p1 * self.pr_given(b, true)
    }

    fn check_for(&self, mu: &InputDistribution) -> Result<()> {
        if self.sender >= mu.k() {
            return Err(Error::OutOfRange(format!("sender {} for k = {}", self.sender + 1, mu.k())));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SignalJson {
    sender: usize,
    p0_given_0: f64,
    p0_given_1: f64,
}

impl Serialize for Signal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SignalJson {
            sender: self.sender + 1,
            p0_given_0: self.p0_given_0,
            p0_given_1: self.p0_given_1,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = SignalJson::deserialize(d)?;
        if j.sender == 0 {
            return Err(serde::de::Error::custom("players are numbered from 1"));
        }
        Signal::new(j.sender - 1, j.p0_given_0, j.p0_given_1).map_err(serde::de::Error::custom)
    }
}

/// The signal `Pr[B=0 | x_s=0] = (1 + ε Pr[X_s=1])/2`,
/// `Pr[B=1 | x_s=1] = (1 + ε Pr[X_s=0])/2`, unbiased under the measure it
/// is built for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakSignal {
    pub sender: usize,
    pub eps: f64,
}

impl WeakSignal {
    pub fn new(sender: usize, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::OutOfRange(format!("weakness {eps} outside [0, 1)")));
        }
        Ok(WeakSignal { sender, eps })
    }

    pub fn signal(&self, mu: &InputDistribution) -> Result<Signal> {
        let beta = mu.prob_bit_one(self.sender);
        let zeta = 1.0 - beta;
        let s = Signal::new(self.sender, 0.5 * (1.0 + self.eps * beta), 0.5 * (1.0 - self.eps * zeta))?;
        s.check_for(mu)?;
        Ok(s)
    }
}

/// `μ` conditioned on `B = b`.
pub fn posterior(mu: &InputDistribution, signal: &Signal, b: u8) -> Result<InputDistribution> {
    signal.check_for(mu)?;
    let pb = signal.pr(mu, b);
    if pb <= ZERO_MASS {
        return Err(Error::ZeroProbabilityBranch { bit: b });
    }
    let mass = mu
        .points()
        .map(|(x, m)| m * signal.pr_given_point(b, x) / pb)
        .collect();
    InputDistribution::normalized(mu.k(), mass)
}

/// `I(B; X)` in bits.
pub fn signal_info_external(mu: &InputDistribution, signal: &Signal) -> Result<f64> {
    signal.check_for(mu)?;
    let h_b = binary_entropy(signal.pr(mu, 0));
    Ok((h_b - h_b_given_x(mu, signal)).max(0.0))
}

/// `Σ_i I(B; X | X_i)` in bits.
pub fn signal_info_internal(mu: &InputDistribution, signal: &Signal) -> Result<f64> {
    signal.check_for(mu)?;
    let h_bx = h_b_given_x(mu, signal);
    let mut total = 0.0;
    for i in 0..mu.k() {
        let mut h = 0.0;
        for bit in [false, true] {
            let (mut w, mut w0) = (0.0, 0.0);
            for (x, m) in mu.points() {
                if x.bit(i) == bit {
                    w += m;
                    w0 += m * signal.pr_given_point(0, x);
                }
            }
            if w > ZERO_MASS {
                h += w * binary_entropy(w0 / w);
            }
        }
        total += (h - h_bx).max(0.0);
    }
    Ok(total)
}

fn h_b_given_x(mu: &InputDistribution, signal: &Signal) -> f64 {
    let p1 = mu.prob_bit_one(signal.sender);
    (1.0 - p1) * binary_entropy(signal.p0_given_0) + p1 * binary_entropy(signal.p0_given_1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub unbiased: bool,
    pub noncrossing: bool,
    /// `max_x |Pr[B=0|x] - Pr[B=1|x]|` over the support.
    pub weakness: f64,
    pub pr_zero: f64,
}

impl Classification {
    pub fn admissible(&self, eps: f64) -> bool {
        self.unbiased && self.noncrossing && self.weakness <= eps * (1.0 + 1e-12)
    }
}

pub fn classify(mu: &InputDistribution, signal: &Signal) -> Classification {
    classify_masses(mu.masses(), mu.k(), signal.sender, signal.p0_given_0, signal.p0_given_1)
}

/// [`classify`] on dense masses, without allocating.
pub fn classify_masses(mass: &[f64], k: usize, sender: usize, p0_given_0: f64, p0_given_1: f64) -> Classification {
    let q = |x: Point, b: u8| {
        let p0 = if x.bit(sender) { p0_given_1 } else { p0_given_0 };
        if b == 0 {
            p0
        } else {
            1.0 - p0
        }
    };
    let mut weakness: f64 = 0.0;
    let mut pr_zero = 0.0;
    let mut scale: f64 = 0.0;
    for (p, &m) in mass.iter().enumerate() {
        if m <= ZERO_MASS {
            continue;
        }
        let x = Point::from_index(k, p);
        weakness = weakness.max((2.0 * q(x, 0) - 1.0).abs());
        pr_zero += m * q(x, 0);
        scale = scale.max(m);
    }
    let mut noncrossing = true;
    let tie = TIE_TOLERANCE * scale;
    'outer: for (p, &a) in mass.iter().enumerate() {
        if a <= ZERO_MASS {
            continue;
        }
        let x = Point::from_index(k, p);
        for (r, &b) in mass.iter().enumerate() {
            if !(b - a > tie) {
                continue;
            }
            let y = Point::from_index(k, r);
            if x.bit(sender) == y.bit(sender) {
                continue;
            }
            for bit in [0u8, 1] {
                // both posteriors share the normaliser Pr[B = bit]
                if a * q(x, bit) > b * q(y, bit) + tie {
                    noncrossing = false;
                    break 'outer;
                }
            }
        }
    }
    Classification {
        unbiased: (pr_zero - 0.5).abs() <= UNBIASED_TOLERANCE,
        noncrossing,
        weakness,
        pr_zero,
    }
}

fn max_abs_diff(a: &InputDistribution, b: &InputDistribution) -> f64 {
    a.masses().iter().zip(b.masses()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Position of `rho` on the segment `[from, to]`, if it lies on it.
fn segment_coordinate(rho: &InputDistribution, from: &InputDistribution, to: &InputDistribution) -> Option<f64> {
    let (num, den) = rho
        .masses()
        .iter()
        .zip(from.masses())
        .zip(to.masses())
        .fold((0.0, 0.0), |(n, d), ((r, f), t)| (n + (r - f) * (t - f), d + (t - f) * (t - f)));
    let theta = if den == 0.0 { 0.0 } else { num / den };
    let residual = rho
        .masses()
        .iter()
        .zip(from.masses())
        .zip(to.masses())
        .map(|((r, f), t)| (r - f - theta * (t - f)).abs())
        .fold(0.0, f64::max);
    let ok = residual <= SEGMENT_TOLERANCE * max_abs_diff(from, to).max(ZERO_MASS)
        && theta >= -SEGMENT_TOLERANCE
        && theta <= 1.0 + SEGMENT_TOLERANCE;
    ok.then_some(theta.clamp(0.0, 1.0))
}

/// A signal that player `signal.sender` can send from `ρ` so that the two
/// posteriors are `ρ0` and `ρ1`, where `ρ0, ρ, ρ1` lie in this order on the
/// segment between the posteriors of `signal` under `μ`.
pub fn split(
    mu: &InputDistribution,
    signal: &Signal,
    rho: &InputDistribution,
    rho0: &InputDistribution,
    rho1: &InputDistribution,
) -> Result<Signal> {
    signal.check_for(mu)?;
    let k = mu.k();
    for r in [rho, rho0, rho1] {
        if r.k() != k {
            return Err(Error::PlayerCountMismatch { left: k, right: r.k() });
        }
    }
    let (m0, m1) = endpoints(mu, signal);
    let infeasible = |what: &str| Err(Error::SplittingInfeasible(what.to_string()));
    let (Some(_), Some(_), Some(_)) = (
        segment_coordinate(rho, &m0, &m1),
        segment_coordinate(rho0, &m0, &m1),
        segment_coordinate(rho1, &m0, &m1),
    ) else {
        return infeasible("a measure is off the segment of posteriors");
    };
    let span = max_abs_diff(rho0, rho1);
    if span <= ZERO_MASS {
        if max_abs_diff(rho, rho0) <= SEGMENT_TOLERANCE {
            return Ok(Signal::constant(signal.sender));
        }
        return infeasible("ρ0 = ρ1 but ρ differs");
    }
    // ρ = p ρ0 + (1 - p) ρ1, p = Pr[B' = 0]
    let Some(theta) = segment_coordinate(rho, rho1, rho0) else {
        return infeasible("ρ is not between ρ0 and ρ1");
    };
    let p = theta;
    if p <= 0.0 || p >= 1.0 {
        return infeasible("ρ is an endpoint of [ρ0, ρ1]");
    }
    let mut cond = [None::<f64>; 2];
    let mut weight = [0.0f64; 2];
    for (x, m) in rho.points() {
        if m <= ZERO_MASS {
            continue;
        }
        let c = x.bit(signal.sender) as usize;
        if m > weight[c] {
            weight[c] = m;
            cond[c] = Some((p * rho0.mass(x) / m).clamp(0.0, 1.0));
        }
    }
    let out = Signal::new(signal.sender, cond[0].unwrap_or(0.5), cond[1].unwrap_or(0.5))?;
    // conditioning on a branch of probability p amplifies rounding by 1/p
    let tol = 1e-10f64.max(1e-14 / p.min(1.0 - p));
    for (b, target) in [(0u8, rho0), (1u8, rho1)] {
        let got = posterior(rho, &out, b)?;
        if max_abs_diff(&got, target) > tol {
            return infeasible("posteriors of the split signal miss their targets");
        }
    }
    Ok(out)
}

fn endpoints(mu: &InputDistribution, signal: &Signal) -> (InputDistribution, InputDistribution) {
    let m0 = posterior(mu, signal, 0).unwrap_or_else(|_| mu.clone());
    let m1 = posterior(mu, signal, 1).unwrap_or_else(|_| mu.clone());
    (m0, m1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub signal: Signal,
    pub bit: u8,
    pub posterior: InputDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub eps: f64,
    pub steps: Vec<TraceStep>,
    pub terminal: InputDistribution,
    /// Which posterior of the simulated signal was reached.
    pub outcome: u8,
}

/// Position `θ` on a segment, stored with `1 - θ` so that both endpoints
/// are approached without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub theta: f64,
    pub rest: f64,
}

impl Position {
    pub fn new(theta: f64) -> Self {
        Position { theta, rest: 1.0 - theta }
    }

    fn from_rest(rest: f64) -> Self {
        Position { theta: 1.0 - rest, rest }
    }

    /// Distance to the endpoint `target`.
    fn distance(&self, target: u8) -> f64 {
        if target == 0 {
            self.theta
        } else {
            self.rest
        }
    }

    fn at_distance(target: u8, d: f64) -> Self {
        let d = d.clamp(0.0, 1.0);
        if target == 0 {
            Position::new(d)
        } else {
            Position::from_rest(d)
        }
    }
}

/// The walk on the segment `μ_θ = (1 - θ) μ0 + θ μ1` between the two
/// posteriors of a signal.
#[derive(Debug, Clone)]
pub struct SignalWalk {
    k: usize,
    sender: usize,
    eps: f64,
    m0: Vec<f64>,
    m1: Vec<f64>,
    start: f64,
    cap: usize,
}

/// Outcome of one walk without the intermediate posteriors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkEnd {
    pub outcome: u8,
    pub steps: usize,
    /// Steps whose signal failed the ε-weak, unbiased, non-crossing test.
    pub violations: usize,
}

impl SignalWalk {
    /// `None` when the signal is uninformative under `μ`.
    pub fn new(mu: &InputDistribution, signal: &Signal, eps: f64) -> Result<Option<Self>> {
        signal.check_for(mu)?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::OutOfRange(format!("weakness {eps} outside (0, 1)")));
        }
        let p1 = signal.pr(mu, 1);
        if p1 <= ZERO_MASS || p1 >= 1.0 - ZERO_MASS {
            return Ok(None);
        }
        let (m0, m1) = endpoints(mu, signal);
        if statistical_distance(&m0, &m1)? <= ZERO_MASS {
            return Ok(None);
        }
        Ok(Some(SignalWalk {
            k: mu.k(),
            sender: signal.sender,
            eps,
            m0: m0.masses().to_vec(),
            m1: m1.masses().to_vec(),
            start: p1,
            cap: DEFAULT_STEP_CAP,
        }))
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    #[inline]
    fn fill(&self, at: Position, out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(&self.m0).zip(&self.m1) {
            *o = at.rest * a + at.theta * b;
        }
    }

    /// Largest admissible λ for a step of length `λ·dist` towards an
    /// endpoint at distance `dist`.
    fn lambda(&self, at: Position, target: u8, cur: &[f64]) -> f64 {
        let dist = at.distance(target);
        let other = at.distance(1 - target);
        let scale = cur.iter().copied().fold(0.0, f64::max);
        // the opposite branch moves λ·dist away and must stay on the segment
        let mut lambda: f64 = if dist > 0.0 { (other / dist).min(1.0) } else { 1.0 };
        for (p, &c) in cur.iter().enumerate() {
            if c <= ZERO_MASS {
                continue;
            }
            let d = dist * (self.m1[p] - self.m0[p]).abs();
            if d > 0.0 {
                lambda = lambda.min(WEAK_MARGIN * self.eps * c / d);
            }
        }
        let tie = TIE_TOLERANCE * scale;
        for (p, &a) in cur.iter().enumerate() {
            if a <= ZERO_MASS {
                continue;
            }
            for (r, &b) in cur.iter().enumerate() {
                let gap = b - a;
                if gap <= tie {
                    continue;
                }
                let dd = dist * ((self.m1[r] - self.m0[r]) - (self.m1[p] - self.m0[p])).abs();
                if dd > 0.0 {
                    lambda = lambda.min(gap / dd);
                }
            }
        }
        lambda.max(0.0)
    }

    /// Step conditionals `Pr[B_i = 0 | x_s]`; `next` holds the branch-0
    /// posterior.
    fn step_signal(&self, cur: &[f64], next: &[f64]) -> (f64, f64) {
        let mut cond = [0.5f64; 2];
        let mut weight = [0.0f64; 2];
        for p in 0..cur.len() {
            let c = cur[p];
            if c <= ZERO_MASS {
                continue;
            }
            let side = Point::from_index(self.k, p).bit(self.sender) as usize;
            if c > weight[side] {
                weight[side] = c;
                cond[side] = (0.5 * next[p] / c).clamp(0.0, 1.0);
            }
        }
        (cond[0], cond[1])
    }

    fn run<R, F>(&self, rng: &mut R, mut visit: F) -> Result<WalkEnd>
    where
        R: Rng + ?Sized,
        F: FnMut(&Signal, u8, Position),
    {
        let n = self.m0.len();
        let mut cur = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut at = Position::new(self.start);
        let mut violations = 0;
        for step in 0..self.cap {
            let target = if at.theta <= self.start { 0 } else { 1 };
            let dist = at.distance(target);
            if dist <= SEGMENT_TOLERANCE {
                return Ok(WalkEnd {
                    outcome: target,
                    steps: step,
                    violations,
                });
            }
            self.fill(at, &mut cur);
            let lambda = self.lambda(at, target, &cur);
            let toward = Position::at_distance(target, dist * (1.0 - lambda));
            let away = Position::at_distance(target, dist * (1.0 + lambda));
            self.fill(toward, &mut next);
            let (c0, c1) = self.step_signal(&cur, &next);
            let signal = Signal {
                sender: self.sender,
                p0_given_0: c0,
                p0_given_1: c1,
            };
            if !classify_masses(&cur, self.k, self.sender, c0, c1).admissible(self.eps) {
                violations += 1;
            }
            let bit = rng.gen_bool(0.5) as u8;
            at = if bit == 0 { toward } else { away };
            visit(&signal, bit, at);
        }
        Err(Error::NonTermination(self.cap))
    }

    /// Run the walk to an endpoint, checking every step.
    pub fn terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WalkEnd> {
        self.run(rng, |_, _, _| {})
    }

    pub fn measure_at(&self, at: Position) -> Result<InputDistribution> {
        let mut m = vec![0.0; self.m0.len()];
        self.fill(at, &mut m);
        InputDistribution::normalized(self.k, m)
    }
}

/// Simulate `signal` from `μ` by a sequence of unbiased, non-crossing,
/// `ε`-weak signals sent by the same player.
///
/// The walk moves along the segment between the two posteriors of the
/// signal. From `μ_c` it heads for the posterior on its side of `μ` (`μ`
/// itself heads for the 0-posterior) and sends a fair signal whose
/// posteriors are `(1 - λ) μ_c + λ μ_t` and `(1 + λ) μ_c - λ μ_t`, with `λ`
/// the largest value keeping the step ε-weak, non-crossing and on the
/// segment. A walk within relative distance 1e-9 of an endpoint stops there.
pub fn simulate_signal<R: Rng + ?Sized>(
    mu: &InputDistribution,
    signal: &Signal,
    eps: f64,
    rng: &mut R,
) -> Result<SimulationTrace> {
    simulate_signal_capped(mu, signal, eps, rng, DEFAULT_STEP_CAP)
}

pub fn simulate_signal_capped<R: Rng + ?Sized>(
    mu: &InputDistribution,
    signal: &Signal,
    eps: f64,
    rng: &mut R,
    cap: usize,
) -> Result<SimulationTrace> {
    let Some(walk) = SignalWalk::new(mu, signal, eps)? else {
        return Ok(SimulationTrace {
            eps,
            steps: Vec::new(),
            terminal: mu.clone(),
            outcome: (signal.pr(mu, 1) > 0.5) as u8,
        });
    };
    let class = classify(mu, signal);
    if class.admissible(eps) {
        let bit = (rng.gen::<f64>() >= class.pr_zero) as u8;
        let post = posterior(mu, signal, bit)?;
        return Ok(SimulationTrace {
            eps,
            steps: vec![TraceStep {
                signal: *signal,
                bit,
                posterior: post.clone(),
            }],
            terminal: post,
            outcome: bit,
        });
    }
    let walk = walk.with_cap(cap);
    let mut steps = Vec::new();
    let mut failed = None;
    let end = walk.run(rng, |s, bit, at| {
        match walk.measure_at(at) {
            Ok(post) => steps.push(TraceStep {
                signal: *s,
                bit,
                posterior: post,
            }),
            Err(e) => {
                failed.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(e);
    }
    let terminal = walk.measure_at(Position::new(end.outcome as f64))?;
    Ok(SimulationTrace {
        eps,
        steps,
        terminal,
        outcome: end.outcome,
    })
}

/// Empirical law of the walk's endpoint over many independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalLaw {
    pub traces: usize,
    /// Runs ending at the 0- and 1-posterior.
    pub counts: [usize; 2],
    /// `Pr[B = 1]` under `μ`.
    pub exact_one: f64,
    pub total_variation: f64,
    pub steps: usize,
    pub max_steps: usize,
    pub violations: usize,
}

/// Traces per independently seeded chunk; fixed so that results do not
/// depend on the number of workers.
pub const CHUNK: usize = 1000;

/// Runs `traces` walks from `μ` and compares where they end with the
/// two-point law of `signal`. Chunk `j` uses a generator seeded with
/// `seed + j`.
pub fn terminal_law(mu: &InputDistribution, signal: &Signal, eps: f64, traces: usize, seed: u64) -> Result<TerminalLaw> {
    let exact_one = signal.pr(mu, 1);
    let walk = SignalWalk::new(mu, signal, eps)?;
    let chunks = traces.div_ceil(CHUNK);
    let parts: Vec<(usize, usize, usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let n = CHUNK.min(traces - j * CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            let (mut ones, mut steps, mut longest, mut bad) = (0, 0, 0, 0);
            for _ in 0..n {
                let end = match &walk {
                    Some(w) => w.terminal(&mut rng)?,
                    None => WalkEnd {
                        outcome: (rng.gen::<f64>() < exact_one) as u8,
                        steps: 0,
                        violations: 0,
                    },
                };
                ones += end.outcome as usize;
                steps += end.steps;
                longest = longest.max(end.steps);
                bad += end.violations;
            }
            Ok((ones, steps, longest, bad))
        })
        .collect::<Result<_>>()?;
    let ones: usize = parts.iter().map(|p| p.0).sum();
    let freq = if traces == 0 { 0.0 } else { ones as f64 / traces as f64 };
    Ok(TerminalLaw {
        traces,
        counts: [traces - ones, ones],
        exact_one,
        total_variation: (freq - exact_one).abs(),
        steps: parts.iter().map(|p| p.1).sum(),
        max_steps: parts.iter().map(|p| p.2).max().unwrap_or(0),
        violations: parts.iter().map(|p| p.3).sum(),
    })
}
