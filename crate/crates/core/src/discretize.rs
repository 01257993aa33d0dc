//! A finite-round version of the buzzers protocol.
//!
//! Time is cut into slots of length `δ` counted from the earliest start.
//! In each slot the still-active players holding 0 speak in index order,
//! each saying 1 with probability `1 - e^{-overlap}` where `overlap` is how
//! long its clock has run inside the slot; the first 1 ends the protocol
//! with output 0. After the last whole slot before the horizon `T` every
//! player announces its input, so the protocol never errs.
//!
//! Transcripts are grouped by (slot, first speaker) or the final
//! revelation. The tree is a spine of silent nodes with leaves hanging off
//! it, stored in an arena so that deep spines need no recursion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buzzers::{report, ICReport};
use crate::error::{Error, Result};
use crate::measures::{InputDistribution, Point, LN2, ZERO_MASS};

pub const DEFAULT_NODE_CAP: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Nobody has spoken yet; the protocol continues.
    Running,
    /// A player said 1 during `slot`; the output is 0.
    Buzz { slot: usize, player: usize },
    /// Everyone revealed `input` at the horizon; the output is its AND.
    Reveal { input: Point },
}

impl Outcome {
    pub fn output(&self) -> Option<bool> {
        match self {
            Outcome::Running => None,
            Outcome::Buzz { .. } => Some(false),
            Outcome::Reveal { input } => Some(input.and()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolNode {
    pub outcome: Outcome,
    pub depth: usize,
    /// `Pr[X = x, reach this node]` for every support point.
    pub joint: Vec<f64>,
    /// `(child index, branch probability)`; probabilities sum to 1.
    pub children: Vec<(usize, f64)>,
}

impl ProtocolNode {
    pub fn probability(&self) -> f64 {
        self.joint.iter().sum()
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome != Outcome::Running
    }

    pub fn posterior(&self, k: usize) -> Result<InputDistribution> {
        let p = self.probability();
        if p <= 0.0 {
            return Err(Error::ZeroProbabilityBranch { bit: 0 });
        }
        InputDistribution::new(k, self.joint.iter().map(|q| q / p).collect())
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteProtocol {
    pub k: usize,
    pub delta: f64,
    pub horizon: f64,
    /// Start times relative to the earliest one; `None` for a player whose
    /// lone-1 input has no mass, which speaks at once.
    pub starts: Vec<Option<f64>>,
    pub slots: usize,
    pub mu: InputDistribution,
    nodes: Vec<ProtocolNode>,
}

fn start_offsets(mu: &InputDistribution) -> Vec<Option<f64>> {
    let units = mu.unit_masses();
    let raw: Vec<Option<f64>> = units
        .iter()
        .map(|&m| (m > ZERO_MASS).then(|| m.ln()))
        .collect();
    let earliest = raw.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    raw.into_iter().map(|t| t.map(|t| t - earliest)).collect()
}

/// Builds the protocol tree with the default node cap.
pub fn build(mu: &InputDistribution, delta: f64, horizon: f64) -> Result<DiscreteProtocol> {
    build_capped(mu, delta, horizon, DEFAULT_NODE_CAP)
}

pub fn build_capped(mu: &InputDistribution, delta: f64, horizon: f64, cap: usize) -> Result<DiscreteProtocol> {
    let k = mu.k();
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::OutOfRange(format!("time step {delta} must be positive")));
    }
    let starts = start_offsets(mu);
    let latest = starts.iter().flatten().copied().fold(0.0, f64::max);
    if !(horizon >= latest + 1.0) || !horizon.is_finite() {
        return Err(Error::OutOfRange(format!(
            "horizon {horizon} must be at least the latest start plus one ({})",
            latest + 1.0
        )));
    }
    let slots = (horizon / delta * (1.0 + 1e-12)).floor() as usize;
    let estimate = slots.saturating_mul(k + 1).saturating_add(k + 3);
    if estimate > cap {
        return Err(Error::Resolution { cap });
    }

    let mut nodes = Vec::with_capacity(estimate);
    nodes.push(ProtocolNode {
        outcome: Outcome::Running,
        depth: 0,
        joint: mu.masses().to_vec(),
        children: Vec::new(),
    });
    let points: Vec<Point> = (0..k + 2).map(|p| Point::from_index(k, p)).collect();
    let mut spine = 0;
    let mut fire = vec![0.0; k];
    for r in 0..slots {
        let (lo, hi) = (r as f64 * delta, (r + 1) as f64 * delta);
        for (i, f) in fire.iter_mut().enumerate() {
            *f = match starts[i] {
                None => 1.0,
                Some(t) => -(-(hi - lo.max(t)).max(0.0)).exp_m1(),
            };
        }
        let parent = nodes[spine].joint.clone();
        let total: f64 = parent.iter().sum();
        let mut silent = parent.clone();
        let mut kids = Vec::new();
        for m in 0..k {
            if fire[m] == 0.0 {
                continue;
            }
            let mut joint = vec![0.0; k + 2];
            for (p, x) in points.iter().enumerate() {
                if !x.bit(m) {
                    joint[p] = silent[p] * fire[m];
                    silent[p] -= joint[p];
                    if fire[m] == 1.0 {
                        silent[p] = 0.0;
                    }
                }
            }
            let prob: f64 = joint.iter().sum();
            if prob > 0.0 {
                nodes.push(ProtocolNode {
                    outcome: Outcome::Buzz { slot: r, player: m },
                    depth: r + 1,
                    joint,
                    children: Vec::new(),
                });
                kids.push((nodes.len() - 1, prob / total));
            }
        }
        let prob: f64 = silent.iter().sum();
        if prob <= 0.0 {
            nodes[spine].children = kids;
            spine = usize::MAX;
            break;
        }
        nodes.push(ProtocolNode {
            outcome: Outcome::Running,
            depth: r + 1,
            joint: silent,
            children: Vec::new(),
        });
        let next = nodes.len() - 1;
        kids.push((next, prob / total));
        nodes[spine].children = kids;
        spine = next;
    }
    if spine != usize::MAX {
        let parent = nodes[spine].joint.clone();
        let total: f64 = parent.iter().sum();
        let depth = nodes[spine].depth + 1;
        let mut kids = Vec::new();
        for (p, &q) in parent.iter().enumerate() {
            if q > 0.0 {
                let mut joint = vec![0.0; k + 2];
                joint[p] = q;
                nodes.push(ProtocolNode {
                    outcome: Outcome::Reveal { input: points[p] },
                    depth,
                    joint,
                    children: Vec::new(),
                });
                kids.push((nodes.len() - 1, q / total));
            }
        }
        nodes[spine].children = kids;
    }
    Ok(DiscreteProtocol {
        k,
        delta,
        horizon,
        starts,
        slots,
        mu: mu.clone(),
        nodes,
    })
}

// x ln x without the small-mass cutoff: leaf masses can be tiny but must
// cancel exactly against their sums.
fn phi(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

impl DiscreteProtocol {
    pub fn nodes(&self) -> &[ProtocolNode] {
        &self.nodes
    }

    pub fn root(&self) -> &ProtocolNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ProtocolNode> {
        self.nodes.iter().filter(|n| n.is_terminal())
    }

    /// Largest gap between a node's joint masses and the sum over its
    /// children, which is the martingale property of the posteriors
    /// weighted by reach probability.
    pub fn martingale_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for node in &self.nodes {
            if node.children.is_empty() {
                continue;
            }
            let total = node.probability();
            let branch_sum: f64 = node.children.iter().map(|c| c.1).sum();
            worst = worst.max((branch_sum - 1.0).abs());
            for p in 0..self.k + 2 {
                let kids: f64 = node.children.iter().map(|&(c, _)| self.nodes[c].joint[p]).sum();
                worst = worst.max((kids - node.joint[p]).abs() / total);
            }
        }
        worst
    }

    /// Leaves whose output is wrong for some input that reaches them.
    pub fn errors(&self) -> usize {
        let k = self.k;
        self.leaves()
            .filter(|leaf| {
                let out = leaf.outcome.output();
                leaf.joint
                    .iter()
                    .enumerate()
                    .any(|(p, &q)| q > 0.0 && Some(Point::from_index(k, p).and()) != out)
            })
            .count()
    }

    /// `Pr[the protocol has ended by time τ | X = x]`, counting the slots
    /// that finish by `τ`.
    pub fn termination_probability(&self, x: Point, tau: f64) -> f64 {
        let p = x.index(self.k);
        let mass = self.mu.masses()[p];
        if mass <= 0.0 {
            return 0.0;
        }
        let ended: f64 = self
            .leaves()
            .filter(|leaf| match leaf.outcome {
                Outcome::Buzz { slot, .. } => (slot + 1) as f64 * self.delta <= tau * (1.0 + 1e-12),
                _ => false,
            })
            .map(|leaf| leaf.joint[p])
            .sum();
        ended / mass
    }

    /// Exact costs by summing over the leaves.
    pub fn exact_ic(&self) -> ICReport {
        let k = self.k;
        let leaves: Vec<&ProtocolNode> = self.leaves().collect();
        let concealed = leaves
            .par_iter()
            .map(|leaf| {
                let q = &leaf.joint;
                let mut out = vec![0.0; k + 1];
                let own: f64 = q.iter().map(|&v| phi(v)).sum();
                out[0] = phi(q.iter().sum()) - own;
                for i in 0..k {
                    let mut split = [0.0; 2];
                    for (p, &v) in q.iter().enumerate() {
                        split[Point::from_index(k, p).bit(i) as usize] += v;
                    }
                    out[1 + i] = phi(split[0]) + phi(split[1]) - own;
                }
                out
            })
            .reduce(
                || vec![0.0; k + 1],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    a
                },
            );
        let mu = &self.mu;
        let external = (mu.entropy() - concealed[0] / LN2).max(0.0);
        let per_player = (0..k)
            .map(|i| (mu.conditional_entropy_given(i) - concealed[1 + i] / LN2).max(0.0))
            .collect();
        report(mu, external, per_player, 0.0)
    }
}

pub fn exact_ic(tree: &DiscreteProtocol) -> ICReport {
    tree.exact_ic()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub horizon: f64,
    pub nodes: usize,
    pub external_bits: f64,
    pub internal_bits: f64,
    /// Differences from the continuous-time costs.
    pub external_gap: f64,
    pub internal_gap: f64,
}

/// Costs of the discretized protocol for each step, against the
/// continuous-time reference.
pub fn convergence_table(
    mu: &InputDistribution,
    deltas: &[f64],
    horizon: f64,
    reference: &ICReport,
) -> Result<Vec<ConvergenceRow>> {
    deltas
        .iter()
        .map(|&delta| {
            let tree = build(mu, delta, horizon)?;
            let ic = tree.exact_ic();
            Ok(ConvergenceRow {
                delta,
                horizon,
                nodes: tree.nodes().len(),
                external_bits: ic.external_bits,
                internal_bits: ic.internal_bits,
                external_gap: ic.external_bits - reference.external_bits,
                internal_gap: ic.internal_bits - reference.internal_bits,
            })
        })
        .collect()
}
