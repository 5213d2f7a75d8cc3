//! Time development of the future-included state pair |A(t)>, |B(t)> and the
//! quotients built from it: ordinary averages, weak values and Q-normalized
//! matrix elements.
//!
//! |A> is propagated forward from T_A by exp(-i H t). |B> is propagated from
//! T_B either by exp(-i H^H t) or by exp(-i H^{dag_Q} t), see [`AdjointMode`].

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_exp_prop, mat_exp_prop_shifted, CMatrix, CVector, SpectralDecomposition};
use crate::qmetric::{q_inner, q_norm, QMetric};

/// Default relative floor on |<b|a>| below which quotients are refused.
pub const DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    A,
    B,
}

/// Generator used for the bra-side state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointMode {
    /// d/dt |B> = -i H^H |B>
    #[default]
    PlainDagger,
    /// d/dt |B> = -i H^{dag_Q} |B>
    QDagger,
}

/// Finite, not identically zero amplitude vector tagged with its side.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: CVector,
    side: Side,
}

impl StateVector {
    pub fn new(amps: CVector, side: Side) -> Result<Self> {
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Precondition(
                "state has non-finite amplitudes".into(),
            ));
        }
        if amps.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { amps, side })
    }

    pub fn a(amps: CVector) -> Result<Self> {
        Self::new(amps, Side::A)
    }

    pub fn b(amps: CVector) -> Result<Self> {
        Self::new(amps, Side::B)
    }

    pub fn amps(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amps(self) -> CVector {
        self.amps
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn scaled(&self, c: C64) -> Result<Self> {
        Self::new(&self.amps * c, self.side)
    }

    /// Rescale to unit Q-norm.
    pub fn q_normalized(&self, q: &QMetric) -> Result<Self> {
        let n = q_norm(q, &self.amps)?;
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Self::new(self.amps.unscale(n), self.side)
    }

    fn with_amps(&self, amps: CVector) -> Result<Self> {
        Self::new(amps, self.side)
    }
}

/// Boundary data of the future-included theory.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvingPair {
    pub a0: StateVector,
    pub b0: StateVector,
    pub t_a: f64,
    pub t_b: f64,
    pub mode: AdjointMode,
    pub normalized: bool,
}

impl EvolvingPair {
    pub fn new(
        a0: StateVector,
        b0: StateVector,
        t_a: f64,
        t_b: f64,
        mode: AdjointMode,
    ) -> Result<Self> {
        if !(t_a < t_b) {
            return Err(Error::Precondition(format!(
                "need T_A < T_B, got {t_a} >= {t_b}"
            )));
        }
        if a0.dim() != b0.dim() {
            return Err(Error::DimMismatch {
                expected: a0.dim(),
                got: b0.dim(),
            });
        }
        Ok(Self {
            a0,
            b0,
            t_a,
            t_b,
            mode,
            normalized: false,
        })
    }

    /// Q-normalize both boundary states.
    pub fn normalize(mut self, q: &QMetric) -> Result<Self> {
        self.a0 = self.a0.q_normalized(q)?;
        self.b0 = self.b0.q_normalized(q)?;
        self.normalized = true;
        Ok(self)
    }

    /// (|B(t)>, |A(t)>)
    pub fn at(
        &self,
        dec: &SpectralDecomposition,
        q: &QMetric,
        t: f64,
    ) -> Result<(StateVector, StateVector)> {
        let a = evolve_a(dec, &self.a0, self.t_a, t)?;
        let b = evolve_b(dec, q, &self.b0, self.t_b, t, self.mode)?;
        Ok((b, a))
    }
}

fn check_dim(dec: &SpectralDecomposition, s: &StateVector) -> Result<()> {
    if s.dim() != dec.dim() {
        return Err(Error::DimMismatch {
            expected: dec.dim(),
            got: s.dim(),
        });
    }
    Ok(())
}

/// exp(-i H (t1 - t0)) a0
pub fn evolve_a(
    dec: &SpectralDecomposition,
    a0: &StateVector,
    t0: f64,
    t1: f64,
) -> Result<StateVector> {
    check_dim(dec, a0)?;
    if t1 == t0 {
        return Ok(a0.clone());
    }
    let u = mat_exp_prop(dec, t1 - t0)?;
    a0.with_amps(u * a0.amps())
}

/// Like [`evolve_a`] but with the dominant exponential growth divided out and
/// the result scaled to unit Euclidean norm. Quotients are unaffected.
pub fn evolve_a_renormalized(
    dec: &SpectralDecomposition,
    a0: &StateVector,
    t0: f64,
    t1: f64,
) -> Result<StateVector> {
    check_dim(dec, a0)?;
    let dt = t1 - t0;
    let shift = if dt >= 0.0 {
        dec.max_im()
    } else {
        dec.lambda
            .iter()
            .map(|l| l.im)
            .fold(f64::INFINITY, f64::min)
    };
    let u = mat_exp_prop_shifted(dec, dt, shift)?;
    let v = u * a0.amps();
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    a0.with_amps(v.unscale(n))
}

/// exp(-i H^H dt) = (exp(i H dt))^H
fn dagger_prop(dec: &SpectralDecomposition, dt: f64) -> Result<CMatrix> {
    Ok(mat_exp_prop(dec, -dt)?.adjoint())
}

/// Propagate a bra-side state from t0 to t1 with H^H or H^{dag_Q}.
pub fn evolve_b(
    dec: &SpectralDecomposition,
    q: &QMetric,
    b0: &StateVector,
    t0: f64,
    t1: f64,
    mode: AdjointMode,
) -> Result<StateVector> {
    check_dim(dec, b0)?;
    if t1 == t0 {
        return Ok(b0.clone());
    }
    let plain = dagger_prop(dec, t1 - t0)?;
    let u = match mode {
        AdjointMode::PlainDagger => plain,
        AdjointMode::QDagger => {
            if q.dim() != dec.dim() {
                return Err(Error::DimMismatch {
                    expected: dec.dim(),
                    got: q.dim(),
                });
            }
            &q.q_inv * plain * &q.q
        }
    };
    b0.with_amps(u * b0.amps())
}

fn check_op(o: &CMatrix, n: usize) -> Result<()> {
    if o.nrows() != n || o.ncols() != n {
        return Err(Error::DimMismatch {
            expected: n,
            got: o.nrows(),
        });
    }
    Ok(())
}

/// <a|O|a> / <a|a>
pub fn ordinary_average(o: &CMatrix, a: &StateVector) -> Result<C64> {
    check_op(o, a.dim())?;
    // same reduction as the numerator, so O = I gives exactly 1
    let den = a.amps().dotc(a.amps());
    if den.re == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(a.amps().dotc(&(o * a.amps())) / den)
}

/// <a|_Q O|a> / <a|_Q a>, the average in the Q inner product.
pub fn q_average(q: &QMetric, o: &CMatrix, a: &StateVector) -> Result<C64> {
    check_op(o, a.dim())?;
    let den = q_inner(q, a.amps(), a.amps())?;
    if den.re <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(q_inner(q, a.amps(), &(o * a.amps()))? / den)
}

fn guarded_quotient(num: C64, den: C64, scale: f64, floor: f64) -> Result<C64> {
    let limit = floor * scale;
    if !(den.norm() > limit) {
        return Err(Error::NearOrthogonal {
            overlap: den.norm(),
            floor: limit,
        });
    }
    Ok(num / den)
}

/// <b|O|a> / <b|a> with the default floor.
pub fn weak_value(o: &CMatrix, b: &StateVector, a: &StateVector) -> Result<C64> {
    weak_value_with_floor(o, b, a, DENOM_FLOOR)
}

pub fn weak_value_with_floor(
    o: &CMatrix,
    b: &StateVector,
    a: &StateVector,
    floor: f64,
) -> Result<C64> {
    check_op(o, a.dim())?;
    if b.dim() != a.dim() {
        return Err(Error::DimMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let num = b.amps().dotc(&(o * a.amps()));
    let den = b.amps().dotc(a.amps());
    guarded_quotient(num, den, b.amps().norm() * a.amps().norm(), floor)
}

/// Weak value at time t written with both boundary states held at their
/// boundary times:
///
/// <B(T_B)| U(T_B - t) O U(t - T_A) |A(T_A)> / <B(T_B)| U(T_B - T_A) |A(T_A)>
pub fn weak_value_propagated(
    dec: &SpectralDecomposition,
    o: &CMatrix,
    a_ta: &StateVector,
    b_tb: &StateVector,
    t: f64,
    t_a: f64,
    t_b: f64,
) -> Result<C64> {
    if !(t_a <= t && t <= t_b) {
        return Err(Error::Precondition(format!(
            "insertion time {t} outside [{t_a}, {t_b}]"
        )));
    }
    check_dim(dec, a_ta)?;
    check_dim(dec, b_tb)?;
    check_op(o, dec.dim())?;
    let late = mat_exp_prop(dec, t_b - t)?;
    let early = mat_exp_prop(dec, t - t_a)?;
    let full = mat_exp_prop(dec, t_b - t_a)?;
    let num = b_tb.amps().dotc(&(late * o * early * a_ta.amps()));
    let ua = full * a_ta.amps();
    let den = b_tb.amps().dotc(&ua);
    guarded_quotient(num, den, b_tb.amps().norm() * ua.norm(), DENOM_FLOOR)
}

/// <b|_Q O|a> / <b|_Q a>
pub fn q_matrix_element(q: &QMetric, o: &CMatrix, b: &StateVector, a: &StateVector) -> Result<C64> {
    q_matrix_element_with_floor(q, o, b, a, DENOM_FLOOR)
}

pub fn q_matrix_element_with_floor(
    q: &QMetric,
    o: &CMatrix,
    b: &StateVector,
    a: &StateVector,
    floor: f64,
) -> Result<C64> {
    check_op(o, a.dim())?;
    let num = q_inner(q, b.amps(), &(o * a.amps()))?;
    let den = q_inner(q, b.amps(), a.amps())?;
    let scale = q_norm(q, b.amps())? * q_norm(q, a.amps())?;
    guarded_quotient(num, den, scale, floor)
}
