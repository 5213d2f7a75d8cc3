use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest power allowed per coordinate in the potential.
pub const MAX_DEGREE: usize = 6;

/// Point (q, p) of phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let s = Self { q, p };
        s.validate()?;
        Ok(s)
    }

    pub fn at_rest(q: Vec<f64>) -> Self {
        let p = vec![0.0; q.len()];
        Self { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() || self.q.len() != self.p.len() {
            return Err(Error::Precondition(format!(
                "phase state needs matching non-empty q and p (got {} and {})",
                self.q.len(),
                self.p.len()
            )));
        }
        if self.q.iter().chain(&self.p).any(|x| !x.is_finite()) {
            return Err(Error::Precondition(
                "phase state has non-finite entries".into(),
            ));
        }
        Ok(())
    }

    /// Flattened (q, p) coordinates.
    pub fn to_flat(&self) -> Vec<f64> {
        self.q.iter().chain(&self.p).copied().collect()
    }

    pub fn from_flat(x: &[f64]) -> Self {
        let n = x.len() / 2;
        Self {
            q: x[..n].to_vec(),
            p: x[n..].to_vec(),
        }
    }

    /// Same point with the momenta reversed.
    pub fn reversed(&self) -> Self {
        Self {
            q: self.q.clone(),
            p: self.p.iter().map(|x| -x).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.q
            .iter()
            .chain(&self.p)
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `strength * q_i * q_j`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

/// V(q) = sum_i sum_k coefficients[i][k] q_i^k + sum couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Potential {
    pub coefficients: Vec<Vec<f64>>,
    #[serde(default)]
    pub couplings: Vec<Coupling>,
}

/// Gaussian contribution to Im H. Positive weight marks a favoured region,
/// negative weight a penalized one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center_q: Vec<f64>,
    pub center_p: Vec<f64>,
    pub width: f64,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Bump {
    pub fn at(center_q: Vec<f64>, width: f64, weight: f64) -> Self {
        let center_p = vec![0.0; center_q.len()];
        Self {
            center_q,
            center_p,
            width,
            weight,
            label: None,
        }
    }

    fn dist2(&self, s: &PhaseState) -> f64 {
        let dq: f64 =
            s.q.iter()
                .zip(&self.center_q)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
        let dp: f64 =
            s.p.iter()
                .zip(&self.center_p)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
        dq + dp
    }

    pub fn value(&self, s: &PhaseState) -> f64 {
        self.weight * (-self.dist2(s) / (2.0 * self.width * self.width)).exp()
    }

    /// Inside the dwell region: within two widths of the centre.
    pub fn contains(&self, s: &PhaseState) -> bool {
        self.dist2(s) <= 4.0 * self.width * self.width
    }
}

/// H = p^T M^-1 p / 2 + V(q) + i Im H(q, p) with diagonal M.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexHamiltonianSpec {
    pub masses: Vec<f64>,
    pub potential: Potential,
    #[serde(default)]
    pub im_h: Vec<Bump>,
}

impl ComplexHamiltonianSpec {
    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::Precondition(
                "at least one coordinate is required".into(),
            ));
        }
        if self.masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Precondition(
                "masses must be finite and positive".into(),
            ));
        }
        if self.potential.coefficients.len() != n {
            return Err(Error::Precondition(format!(
                "potential has {} coefficient rows for {n} coordinates",
                self.potential.coefficients.len()
            )));
        }
        for row in &self.potential.coefficients {
            if row.len() > MAX_DEGREE + 1 {
                return Err(Error::Precondition(format!(
                    "potential degree exceeds {MAX_DEGREE}"
                )));
            }
            if row.iter().any(|c| !c.is_finite()) {
                return Err(Error::Precondition(
                    "potential coefficients must be finite".into(),
                ));
            }
        }
        for c in &self.potential.couplings {
            if c.i >= n || c.j >= n || !c.strength.is_finite() {
                return Err(Error::Precondition(format!(
                    "invalid coupling ({}, {})",
                    c.i, c.j
                )));
            }
        }
        for b in &self.im_h {
            if !(b.width.is_finite() && b.width > 0.0) || !b.weight.is_finite() {
                return Err(Error::Precondition(
                    "bump widths must be positive, weights finite".into(),
                ));
            }
            if b.center_q.len() != n || b.center_p.len() != n {
                return Err(Error::Precondition(
                    "bump centre has the wrong dimension".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn potential_energy(&self, q: &[f64]) -> f64 {
        let mut v = 0.0;
        for (row, &x) in self.potential.coefficients.iter().zip(q) {
            v += horner(row, x);
        }
        for c in &self.potential.couplings {
            v += c.strength * q[c.i] * q[c.j];
        }
        v
    }

    pub fn gradient(&self, q: &[f64], out: &mut [f64]) {
        for ((row, &x), g) in self
            .potential
            .coefficients
            .iter()
            .zip(q)
            .zip(out.iter_mut())
        {
            let mut acc = 0.0;
            for k in (1..row.len()).rev() {
                acc = acc * x + k as f64 * row[k];
            }
            *g = acc;
        }
        for c in &self.potential.couplings {
            out[c.i] += c.strength * q[c.j];
            out[c.j] += c.strength * q[c.i];
        }
    }

    pub fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for (i, (row, &x)) in self.potential.coefficients.iter().zip(q).enumerate() {
            let mut acc = 0.0;
            for k in (2..row.len()).rev() {
                acc = acc * x + (k * (k - 1)) as f64 * row[k];
            }
            h[(i, i)] = acc;
        }
        for c in &self.potential.couplings {
            h[(c.i, c.j)] += c.strength;
            h[(c.j, c.i)] += c.strength;
        }
        h
    }

    pub fn kinetic_energy(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.masses)
            .map(|(x, m)| 0.5 * x * x / m)
            .sum()
    }

    /// Re H
    pub fn energy(&self, s: &PhaseState) -> f64 {
        self.kinetic_energy(&s.p) + self.potential_energy(&s.q)
    }

    /// Im H
    pub fn im_h(&self, s: &PhaseState) -> f64 {
        self.im_h.iter().map(|b| b.value(s)).sum()
    }

    /// Same dynamics, different Im H.
    pub fn with_bumps(&self, bumps: Vec<Bump>) -> Self {
        Self {
            im_h: bumps,
            ..self.clone()
        }
    }

    /// One unit-mass coordinate with V = -kappa q^2/2 + q^4/4.
    pub fn double_well(kappa: f64) -> Self {
        Self::inflaton_modes(1, kappa)
    }

    /// `n` uncoupled unit-mass modes, each with V = -kappa q^2/2 + q^4/4.
    pub fn inflaton_modes(n: usize, kappa: f64) -> Self {
        Self {
            masses: vec![1.0; n],
            potential: Potential {
                coefficients: vec![vec![0.0, 0.0, -0.5 * kappa, 0.0, 0.25]; n],
                couplings: Vec::new(),
            },
            im_h: Vec::new(),
        }
    }

    /// One unit-mass coordinate with V = omega^2 q^2 / 2.
    pub fn harmonic(omega: f64) -> Self {
        Self {
            masses: vec![1.0],
            potential: Potential {
                coefficients: vec![vec![0.0, 0.0, 0.5 * omega * omega]],
                couplings: Vec::new(),
            },
            im_h: Vec::new(),
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}
