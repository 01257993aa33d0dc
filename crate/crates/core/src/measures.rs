//! Probability measures on the k-party input cube and the discrete
//! information functionals built on them.
//!
//! Measures are restricted to the support `{0..0, 1..1, e_1, .., e_k}` and
//! stored densely over those `k + 2` points. All functionals are evaluated
//! in nats and converted to bits before being returned.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LN2: f64 = std::f64::consts::LN_2;

/// Masses below this are exact zeros inside logarithms.
pub const ZERO_MASS: f64 = 1e-15;

/// Tolerance on the total mass of a distribution.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[inline]
pub(crate) fn xlogx(x: f64) -> f64 {
    if x <= ZERO_MASS {
        0.0
    } else {
        x * x.ln()
    }
}

/// A point of the k-bit input cube, player 1 leftmost.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputLabel {
    bits: Vec<bool>,
}

impl InputLabel {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.len() < 2 {
            return Err(Error::InvalidLabel(format!("{bits:?}: need at least two players")));
        }
        Ok(InputLabel { bits })
    }

    pub fn k(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, player: usize) -> bool {
        self.bits[player]
    }

    /// The support point this label corresponds to, if it is one of the
    /// `k + 2` points allowed by the support assumption.
    pub fn point(&self) -> Option<Point> {
        let ones: Vec<usize> = (0..self.k()).filter(|&i| self.bits[i]).collect();
        match ones.len() {
            0 => Some(Point::Zeros),
            1 => Some(Point::Unit(ones[0])),
            n if n == self.k() => Some(Point::Ones),
            _ => None,
        }
    }

    pub fn from_point(k: usize, point: Point) -> Self {
        let bits = (0..k).map(|i| point.bit(i)).collect();
        InputLabel { bits }
    }
}

impl FromStr for InputLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidLabel(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        InputLabel::new(bits)
    }
}

impl fmt::Display for InputLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// The points a measure may charge: the all-zero input, the unit vectors
/// (`Unit(i)` has player `i`'s bit set, 0-based) and the all-one input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Point {
    Zeros,
    Unit(usize),
    Ones,
}

impl Point {
    /// Player `i`'s bit at this point.
    #[inline]
    pub fn bit(self, i: usize) -> bool {
        match self {
            Point::Zeros => false,
            Point::Unit(j) => i == j,
            Point::Ones => true,
        }
    }

    /// Dense storage index for a k-player measure.
    #[inline]
    pub fn index(self, k: usize) -> usize {
        match self {
            Point::Zeros => 0,
            Point::Unit(i) => 1 + i,
            Point::Ones => k + 1,
        }
    }

    #[inline]
    pub fn from_index(k: usize, idx: usize) -> Point {
        match idx {
            0 => Point::Zeros,
            i if i <= k => Point::Unit(i - 1),
            _ => Point::Ones,
        }
    }

    pub fn and(self) -> bool {
        self == Point::Ones
    }
}

/// A probability measure on `{0,1}^k` supported on the `k + 2` points of
/// [`Point`]. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    k: usize,
    mass: Vec<f64>,
}

impl InputDistribution {
    /// Build from dense masses ordered `[0..0, e_1, .., e_k, 1..1]`.
    pub fn new(k: usize, mass: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidDistribution(format!("need k >= 2 players, got {k}")));
        }
        if mass.len() != k + 2 {
            return Err(Error::InvalidDistribution(format!(
                "expected {} masses for k = {k}, got {}",
                k + 2,
                mass.len()
            )));
        }
        check_probability_vector(&mass)?;
        Ok(InputDistribution { k, mass })
    }

    /// Build from dense masses and renormalise away rounding drift.
    pub(crate) fn normalized(k: usize, mut mass: Vec<f64>) -> Result<Self> {
        for m in mass.iter_mut() {
            if *m < 0.0 && *m > -1e-14 {
                *m = 0.0;
            }
        }
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || mass.iter().any(|m| *m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidDistribution(format!("cannot normalise {mass:?}")));
        }
        for m in mass.iter_mut() {
            *m /= total;
        }
        Ok(InputDistribution { k, mass })
    }

    pub fn from_points<I: IntoIterator<Item = (Point, f64)>>(k: usize, masses: I) -> Result<Self> {
        let mut mass = vec![0.0; k + 2];
        for (p, m) in masses {
            if let Point::Unit(i) = p {
                if i >= k {
                    return Err(Error::InvalidLabel(format!("unit vector e_{} for k = {k}", i + 1)));
                }
            }
            mass[p.index(k)] += m;
        }
        InputDistribution::new(k, mass)
    }

    /// Build from labelled masses; labels outside the allowed support must
    /// carry zero mass.
    pub fn from_labels<'a, I>(k: usize, masses: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a InputLabel, f64)>,
    {
        let mut mass = vec![0.0; k + 2];
        for (label, m) in masses {
            if label.k() != k {
                return Err(Error::PlayerCountMismatch { left: k, right: label.k() });
            }
            match label.point() {
                Some(p) => mass[p.index(k)] += m,
                None if m == 0.0 => {}
                None => {
                    return Err(Error::SupportViolation(format!("label {label} has mass {m}")));
                }
            }
        }
        InputDistribution::new(k, mass)
    }

    /// Two-party measure from `(μ00, μ01, μ10, μ11)`.
    pub fn two_party(m00: f64, m01: f64, m10: f64, m11: f64) -> Result<Self> {
        // 01 is e_2 and 10 is e_1
        InputDistribution::new(2, vec![m00, m10, m01, m11])
    }

    /// Uniform on the unit vectors.
    pub fn uniform_units(k: usize) -> Result<Self> {
        let mut mass = vec![1.0 / k as f64; k + 2];
        mass[0] = 0.0;
        mass[k + 1] = 0.0;
        InputDistribution::new(k, mass)
    }

    pub fn point_mass(k: usize, p: Point) -> Result<Self> {
        InputDistribution::from_points(k, [(p, 1.0)])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Dense masses ordered `[0..0, e_1, .., e_k, 1..1]`.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass(&self, p: Point) -> f64 {
        self.mass[p.index(self.k)]
    }

    pub fn unit_mass(&self, i: usize) -> f64 {
        self.mass[1 + i]
    }

    pub fn unit_masses(&self) -> &[f64] {
        &self.mass[1..=self.k]
    }

    pub fn points(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        let k = self.k;
        self.mass.iter().enumerate().map(move |(i, &m)| (Point::from_index(k, i), m))
    }

    pub fn support(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.points().filter(|(_, m)| *m > ZERO_MASS)
    }

    /// `Pr[X_i = 1]`.
    pub fn prob_bit_one(&self, i: usize) -> f64 {
        self.unit_mass(i) + self.mass(Point::Ones)
    }

    /// Shannon entropy of X in bits.
    pub fn entropy(&self) -> f64 {
        entropy_nats(&self.mass) / LN2
    }

    /// `H(X | X_i)` in bits.
    pub fn conditional_entropy_given(&self, i: usize) -> f64 {
        let p1 = self.prob_bit_one(i);
        (entropy_nats(&self.mass) - entropy_nats(&[p1, 1.0 - p1])).max(0.0) / LN2
    }

    /// The measure conditioned on `X != 1..1`, with the removed mass.
    pub fn without_ones(&self) -> Result<(InputDistribution, f64)> {
        let c = self.mass(Point::Ones);
        if c >= 1.0 - ZERO_MASS {
            return Err(Error::TrivialInstance("all mass on the all-one input".into()));
        }
        let mut mass = self.mass.clone();
        mass[self.k + 1] = 0.0;
        Ok((InputDistribution::normalized(self.k, mass)?, c))
    }

    pub fn to_json(&self) -> MeasureJson {
        let mass = self
            .points()
            .map(|(p, m)| (InputLabel::from_point(self.k, p).to_string(), m))
            .collect();
        MeasureJson { k: self.k, mass }
    }

    pub fn from_json(json: &MeasureJson) -> Result<Self> {
        let mut labelled = Vec::with_capacity(json.mass.len());
        for (s, &m) in &json.mass {
            let label: InputLabel = s.parse()?;
            labelled.push((label, m));
        }
        InputDistribution::from_labels(json.k, labelled.iter().map(|(l, m)| (l, *m)))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let json: MeasureJson = serde_json::from_str(s)?;
        InputDistribution::from_json(&json)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("measure serialises")
    }
}

/// Wire format: `{"k": 3, "mass": {"000": 0.4, "100": 0.2, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureJson {
    pub k: usize,
    pub mass: BTreeMap<String, f64>,
}

impl Serialize for InputDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for InputDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = MeasureJson::deserialize(d)?;
        InputDistribution::from_json(&json).map_err(serde::de::Error::custom)
    }
}

fn check_probability_vector(p: &[f64]) -> Result<()> {
    if let Some(i) = p.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidDistribution(format!("mass {} at index {i}", p[i])));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
    }
    Ok(())
}

pub(crate) fn entropy_nats(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    check_probability_vector(p)?;
    Ok((entropy_nats(p) / LN2).max(0.0))
}

/// Binary entropy `H(x)` in bits.
pub fn binary_entropy(x: f64) -> f64 {
    entropy_nats(&[x, 1.0 - x]) / LN2
}

/// Kullback–Leibler divergence `D(p || q)` in bits.
pub fn divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!(
            "length mismatch {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_probability_vector(p)?;
    check_probability_vector(q)?;
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a <= ZERO_MASS {
            continue;
        }
        if b <= ZERO_MASS {
            return Err(Error::AbsoluteContinuity { index: i });
        }
        d += a * (a / b).ln();
    }
    Ok((d / LN2).max(0.0))
}

/// Mutual information between the row and column variables of a joint
/// distribution given as rows.
pub fn mutual_information<R: AsRef<[f64]>>(joint: &[R]) -> Result<f64> {
    let rows: Vec<&[f64]> = joint.iter().map(|r| r.as_ref()).collect();
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidDistribution("ragged joint table".into()));
    }
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    check_probability_vector(&flat)?;
    let row_marginal: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let col_marginal: Vec<f64> = (0..cols).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let mi = entropy_nats(&row_marginal) + entropy_nats(&col_marginal) - entropy_nats(&flat);
    Ok((mi / LN2).max(0.0))
}

/// Half the L1 distance between two measures on the same cube.
pub fn statistical_distance(mu: &InputDistribution, nu: &InputDistribution) -> Result<f64> {
    if mu.k != nu.k {
        return Err(Error::PlayerCountMismatch { left: mu.k, right: nu.k });
    }
    Ok(0.5 * mu.mass.iter().zip(&nu.mass).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
