//! Maximizing the buzzers cost over input distributions.
//!
//! The free masses of a support pattern live on a simplex. A grid with
//! step 0.02 locates the best cell, then a Nelder–Mead search refines it in
//! the coordinates of all but the last free mass. Points are clipped at
//! 1e-9 during the search and snapped to the boundary at the end.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buzzers::{information_cost_tol, ICReport};
use crate::error::{Error, Result};
use crate::measures::{InputDistribution, InputLabel, Point};
use crate::quadrature::Tolerance;

pub const CLIP: f64 = 1e-9;

/// Which support points are forced to zero mass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "PatternJson", try_from = "PatternJson")]
pub struct SupportPattern {
    pub k: usize,
    pub zeros: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct PatternJson {
    k: usize,
    zeros: Vec<String>,
}

impl From<SupportPattern> for PatternJson {
    fn from(p: SupportPattern) -> Self {
        let zeros = p.zeros.iter().map(|&z| InputLabel::from_point(p.k, z).to_string()).collect();
        PatternJson { k: p.k, zeros }
    }
}

impl TryFrom<PatternJson> for SupportPattern {
    type Error = Error;

    fn try_from(j: PatternJson) -> Result<Self> {
        SupportPattern::parse(Some(j.k), &j.zeros.join(","))
    }
}

impl SupportPattern {
    pub fn new(k: usize, zeros: Vec<Point>) -> Result<Self> {
        if k < 2 {
            return Err(Error::OutOfRange(format!("need k >= 2, got {k}")));
        }
        let mut zeros = zeros;
        zeros.sort();
        zeros.dedup();
        let pattern = SupportPattern { k, zeros };
        if pattern.free().is_empty() {
            return Err(Error::InvalidDistribution("every support point is frozen at zero".into()));
        }
        Ok(pattern)
    }

    /// Parses comma-separated labels such as `11` or `000,111`; `k` is
    /// taken from the label length when not given.
    pub fn parse(k: Option<usize>, zeros: &str) -> Result<Self> {
        let labels: Vec<InputLabel> = zeros
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        let k = match (k, labels.first()) {
            (Some(k), _) => k,
            (None, Some(l)) => l.k(),
            (None, None) => 2,
        };
        let mut points = Vec::new();
        for l in &labels {
            if l.k() != k {
                return Err(Error::PlayerCountMismatch { left: k, right: l.k() });
            }
            match l.point() {
                Some(p) => points.push(p),
                None => return Err(Error::SupportViolation(format!("{l} is outside the allowed support"))),
            }
        }
        SupportPattern::new(k, points)
    }

    pub fn free(&self) -> Vec<Point> {
        (0..self.k + 2)
            .map(|p| Point::from_index(self.k, p))
            .filter(|p| !self.zeros.contains(p))
            .collect()
    }

    pub fn measure(&self, free_masses: &[f64]) -> Result<InputDistribution> {
        let free = self.free();
        if free.len() != free_masses.len() {
            return Err(Error::InvalidDistribution(format!(
                "pattern has {} free points, got {} masses",
                free.len(),
                free_masses.len()
            )));
        }
        InputDistribution::from_points(self.k, free.into_iter().zip(free_masses.iter().copied()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Internal,
    External,
}

impl Objective {
    pub fn of(self, r: &ICReport) -> f64 {
        match self {
            Objective::Internal => r.internal_bits,
            Objective::External => r.external_bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    /// Objective evaluations allowed in the refinement phase.
    pub max_evaluations: usize,
    pub grid_step: f64,
    /// Simplex size at which refinement stops.
    pub xtol: f64,
    pub quadrature: Tolerance,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_evaluations: 4000,
            grid_step: 0.02,
            xtol: 1e-6,
            quadrature: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub evaluation: usize,
    pub phase: String,
    pub best: f64,
    pub simplex_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub objective: Objective,
    pub pattern: SupportPattern,
    pub argmax: InputDistribution,
    pub value: f64,
    /// Change in value when re-evaluated at 10x tighter quadrature.
    pub tight_change: f64,
    pub evaluations: usize,
    pub status: Status,
    pub trace: Vec<TraceRow>,
}

// compositions of n into `parts` nonnegative parts, in lexicographic order
fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

struct Problem<'a> {
    pattern: &'a SupportPattern,
    objective: Objective,
    tol: Tolerance,
}

impl Problem<'_> {
    fn value(&self, masses: &[f64]) -> Result<f64> {
        let mu = self.pattern.measure(masses)?;
        Ok(self.objective.of(&information_cost_tol(&mu, self.tol)?))
    }

    // all-but-last coordinates clipped into the open simplex
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut m: Vec<f64> = y.iter().map(|v| v.max(CLIP)).collect();
        let room = 1.0 - CLIP;
        let sum: f64 = m.iter().sum();
        if sum > room {
            for v in m.iter_mut() {
                *v *= room / sum;
            }
        }
        let last = 1.0 - m.iter().sum::<f64>();
        m.push(last.max(CLIP));
        m
    }
}

fn simplex_size(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .flat_map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Grid scan followed by Nelder–Mead refinement.
pub fn maximize(pattern: &SupportPattern, objective: Objective, budget: Budget) -> Result<OptResult> {
    let problem = Problem {
        pattern,
        objective,
        tol: budget.quadrature,
    };
    let n = pattern.free().len();
    let mut trace = Vec::new();
    if n == 1 {
        let value = problem.value(&[1.0])?;
        return Ok(OptResult {
            objective,
            pattern: pattern.clone(),
            argmax: pattern.measure(&[1.0])?,
            value,
            tight_change: 0.0,
            evaluations: 1,
            status: Status::Converged,
            trace,
        });
    }

    let steps = (1.0 / budget.grid_step).round().max(1.0) as usize;
    let grid = compositions(steps, n);
    let values: Vec<f64> = grid
        .par_iter()
        .map(|c| {
            let m: Vec<f64> = c.iter().map(|&v| v as f64 / steps as f64).collect();
            problem.value(&m)
        })
        .collect::<Result<_>>()?;
    // first maximum in grid order, independent of scheduling
    let (best_idx, best_val) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let mut evaluations = grid.len();
    trace.push(TraceRow {
        evaluation: evaluations,
        phase: "grid".into(),
        best: best_val,
        simplex_size: budget.grid_step,
    });

    // Nelder–Mead on -value in n-1 coordinates
    let start: Vec<f64> = grid[best_idx][..n - 1].iter().map(|&v| v as f64 / steps as f64).collect();
    let eval = |y: &[f64]| -> Result<(Vec<f64>, f64)> {
        let p = problem.project(y)[..n - 1].to_vec();
        let v = problem.value(&problem.project(&p))?;
        Ok((p, -v))
    };
    let mut simplex = vec![eval(&start)?];
    for j in 0..n - 1 {
        let mut y = start.clone();
        y[j] += if y[j] + budget.grid_step <= 1.0 - CLIP { budget.grid_step } else { -budget.grid_step };
        simplex.push(eval(&y)?);
    }
    let mut used = simplex.len();
    let by_value = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.total_cmp(&b.1);
    let mut status = Status::BudgetExhausted;
    while used < budget.max_evaluations {
        simplex.sort_by(by_value);
        let size = simplex_size(&simplex);
        if size <= budget.xtol {
            status = Status::Converged;
            break;
        }
        let worst = simplex.len() - 1;
        let centroid: Vec<f64> = (0..n - 1)
            .map(|d| simplex[..worst].iter().map(|(v, _)| v[d]).sum::<f64>() / worst as f64)
            .collect();
        let along = |c: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst].0)
                .map(|(m, w)| m + c * (m - w))
                .collect()
        };
        let reflected = eval(&along(1.0))?;
        used += 1;
        if reflected.1 < simplex[0].1 {
            let expanded = eval(&along(2.0))?;
            used += 1;
            simplex[worst] = if expanded.1 < reflected.1 { expanded } else { reflected };
        } else if reflected.1 < simplex[worst - 1].1 {
            simplex[worst] = reflected;
        } else {
            let c = if reflected.1 < simplex[worst].1 { 0.5 } else { -0.5 };
            let contracted = eval(&along(c))?;
            used += 1;
            if contracted.1 < simplex[worst].1.min(reflected.1) {
                simplex[worst] = contracted;
            } else {
                let best = simplex[0].0.clone();
                for point in simplex.iter_mut().skip(1) {
                    let y: Vec<f64> = point.0.iter().zip(&best).map(|(v, b)| b + 0.5 * (v - b)).collect();
                    *point = eval(&y)?;
                    used += 1;
                }
            }
        }
        simplex.sort_by(by_value);
        trace.push(TraceRow {
            evaluation: evaluations + used,
            phase: "refine".into(),
            best: -simplex[0].1,
            simplex_size: simplex_size(&simplex),
        });
    }
    evaluations += used;
    simplex.sort_by(by_value);
    let mut masses = problem.project(&simplex[0].0);
    let mut value = -simplex[0].1;

    // snap clipped coordinates to the boundary if that is no worse
    if masses.iter().any(|&m| m <= 10.0 * CLIP) {
        let snapped: Vec<f64> = masses.iter().map(|&m| if m <= 10.0 * CLIP { 0.0 } else { m }).collect();
        let total: f64 = snapped.iter().sum();
        let snapped: Vec<f64> = snapped.iter().map(|m| m / total).collect();
        let v = problem.value(&snapped)?;
        evaluations += 1;
        if v >= value - 1e-12 {
            masses = snapped;
            value = v;
        }
        trace.push(TraceRow {
            evaluation: evaluations,
            phase: "snap".into(),
            best: value,
            simplex_size: 0.0,
        });
    }

    let argmax = pattern.measure(&masses)?;
    let tight = objective.of(&information_cost_tol(&argmax, budget.quadrature.tighter(10.0))?);
    evaluations += 1;
    trace.push(TraceRow {
        evaluation: evaluations,
        phase: "tight".into(),
        best: tight,
        simplex_size: 0.0,
    });
    Ok(OptResult {
        objective,
        pattern: pattern.clone(),
        argmax,
        tight_change: tight - value,
        value: tight,
        evaluations,
        status,
        trace,
    })
}

pub fn maximize_internal(pattern: &SupportPattern, budget: Budget) -> Result<OptResult> {
    maximize(pattern, Objective::Internal, budget)
}

pub fn maximize_external(pattern: &SupportPattern, budget: Budget) -> Result<OptResult> {
    maximize(pattern, Objective::External, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pattern_parsing() {
        let p = SupportPattern::parse(None, "11").unwrap();
        assert_eq!((p.k, p.zeros.clone()), (2, vec![Point::Ones]));
        assert_eq!(p.free(), vec![Point::Zeros, Point::Unit(0), Point::Unit(1)]);
        let p = SupportPattern::parse(Some(3), "000, 111").unwrap();
        assert_eq!(p.free().len(), 3);
        assert!(SupportPattern::parse(None, "110").is_err());
        assert!(SupportPattern::parse(Some(3), "11").is_err());
        assert!(SupportPattern::parse(None, "00,10,01,11").is_err());
        assert!(SupportPattern::parse(None, "1x").is_err());
    }

    #[test]
    fn compositions_cover_the_simplex() {
        let c = compositions(50, 3);
        assert_eq!(c.len(), 52 * 51 / 2);
        assert!(c.iter().all(|v| v.iter().sum::<usize>() == 50));
    }

    #[test]
    fn single_point_support_is_zero() {
        let p = SupportPattern::parse(None, "00,01,10").unwrap();
        for obj in [Objective::Internal, Objective::External] {
            let r = maximize(&p, obj, Budget::default()).unwrap();
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn uniform_unit_face() {
        let budget = Budget {
            max_evaluations: 600,
            ..Budget::default()
        };
        let p = SupportPattern::parse(None, "000,111").unwrap();
        let r = maximize_internal(&p, budget).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-6);
        for i in 0..3 {
            assert_abs_diff_eq!(r.argmax.unit_mass(i), 1.0 / 3.0, epsilon = 1e-3);
        }
        let r = maximize_external(&p, budget).unwrap();
        assert!(r.value >= 1.5f64.log2() - 1e-9);
        let p = SupportPattern::parse(None, "00,11").unwrap();
        assert!(maximize_internal(&p, budget).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn two_party_maxima() {
        let p = SupportPattern::parse(None, "11").unwrap();
        let r = maximize_internal(&p, Budget::default()).unwrap();
        assert_abs_diff_eq!(r.value, 0.482_701_848, epsilon = 1e-6);
        // the problem is symmetric under swapping the players
        assert_abs_diff_eq!(r.argmax.unit_mass(0), r.argmax.unit_mass(1), epsilon = 1e-4);
        assert!(r.tight_change.abs() < 1e-9);

        let r = maximize_external(&p, Budget::default()).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.argmax.unit_mass(0), 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(r.argmax.unit_mass(1), 0.5, epsilon = 1e-4);
    }
}
