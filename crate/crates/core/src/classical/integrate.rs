use serde::{Deserialize, Serialize};

use super::hamiltonian::{ComplexHamiltonianSpec, PhaseState};
use crate::error::{Error, Result};

/// Largest |q| or |p| tolerated before a run is declared escaped.
pub const DEFAULT_BLOWUP_BOUND: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<PhaseState>,
    /// Re H at every stored state.
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.states.len().saturating_sub(1) as f64
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy.iter().fold(0.0, |m, e| m.max((e - e0).abs()))
    }
}

/// Kick-drift-kick leapfrog. The force at the current position is cached so
/// each step costs one gradient evaluation.
pub(crate) struct Leapfrog<'a> {
    spec: &'a ComplexHamiltonianSpec,
    pub state: PhaseState,
    force: Vec<f64>,
    dt: f64,
    bound: f64,
    pub steps_taken: usize,
}

impl<'a> Leapfrog<'a> {
    pub fn new(
        spec: &'a ComplexHamiltonianSpec,
        s0: &PhaseState,
        dt: f64,
        bound: f64,
    ) -> Result<Self> {
        spec.validate()?;
        s0.validate()?;
        if s0.dim() != spec.dim() {
            return Err(Error::DimMismatch {
                expected: spec.dim(),
                got: s0.dim(),
            });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Precondition(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let mut force = vec![0.0; spec.dim()];
        spec.gradient(&s0.q, &mut force);
        Ok(Self {
            spec,
            state: s0.clone(),
            force,
            dt,
            bound,
            steps_taken: 0,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        let s = &mut self.state;
        for (p, g) in s.p.iter_mut().zip(&self.force) {
            *p -= h * g;
        }
        for ((q, p), m) in s.q.iter_mut().zip(&s.p).zip(&self.spec.masses) {
            *q += self.dt * p / m;
        }
        self.spec.gradient(&s.q, &mut self.force);
        for (p, g) in s.p.iter_mut().zip(&self.force) {
            *p -= h * g;
        }
        self.steps_taken += 1;
        let mag = s.max_abs();
        if !(mag <= self.bound) {
            return Err(Error::Blowup {
                step: self.steps_taken,
                magnitude: mag,
            });
        }
        Ok(())
    }
}

pub fn integrate(
    spec: &ComplexHamiltonianSpec,
    s0: &PhaseState,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    integrate_with_bound(spec, s0, dt, steps, DEFAULT_BLOWUP_BOUND)
}

pub fn integrate_with_bound(
    spec: &ComplexHamiltonianSpec,
    s0: &PhaseState,
    dt: f64,
    steps: usize,
    bound: f64,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::Precondition("at least one step is required".into()));
    }
    let mut lf = Leapfrog::new(spec, s0, dt, bound)?;
    let mut states = Vec::with_capacity(steps + 1);
    let mut energy = Vec::with_capacity(steps + 1);
    states.push(s0.clone());
    energy.push(spec.energy(s0));
    for _ in 0..steps {
        lf.step()?;
        energy.push(spec.energy(&lf.state));
        states.push(lf.state.clone());
    }
    Ok(Trajectory { dt, states, energy })
}

/// Number of whole steps in `horizon`, rejecting non-integer ratios.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0 && horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Precondition(format!(
            "horizon and dt must be positive (got {horizon}, {dt})"
        )));
    }
    let r = horizon / dt;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) || n < 1.0 {
        return Err(Error::Precondition(format!(
            "horizon/dt = {r} is not an integer"
        )));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDwell {
    pub label: String,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    /// Trapezoidal integral of Im H along the path.
    pub reward: f64,
    /// Time spent within two widths of each bump centre, in bump order.
    pub dwell: Vec<RegionDwell>,
    /// Phase-space distance from the start to the closest fixed point of the
    /// flow, when one was supplied.
    pub nearest_saddle_distance: Option<f64>,
}

/// Region label used in reports: the bump's own label or `bump<k>`.
pub fn region_label(spec: &ComplexHamiltonianSpec, k: usize) -> String {
    spec.im_h[k]
        .label
        .clone()
        .unwrap_or_else(|| format!("bump{k}"))
}

pub fn reward(traj: &Trajectory, spec: &ComplexHamiltonianSpec) -> Result<RewardReport> {
    reward_with_fixed_points(traj, spec, &[])
}

/// Like [`reward`], also reporting the distance of the initial state to the
/// nearest of `fixed_points` (configuration coordinates; momenta are zero).
pub fn reward_with_fixed_points(
    traj: &Trajectory,
    spec: &ComplexHamiltonianSpec,
    fixed_points: &[Vec<f64>],
) -> Result<RewardReport> {
    let s0 = traj
        .states
        .first()
        .ok_or_else(|| Error::Precondition("empty trajectory".into()))?;
    let values: Vec<f64> = traj.states.iter().map(|s| spec.im_h(s)).collect();
    let reward = trapezoid(&values, traj.dt);
    let dwell = spec
        .im_h
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let inside: Vec<f64> = traj
                .states
                .iter()
                .map(|s| if b.contains(s) { 1.0 } else { 0.0 })
                .collect();
            RegionDwell {
                label: region_label(spec, k),
                time: trapezoid(&inside, traj.dt),
            }
        })
        .collect();
    let nearest_saddle_distance = fixed_points
        .iter()
        .map(|q| {
            let dq: f64 = s0.q.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
            let dp: f64 = s0.p.iter().map(|p| p * p).sum();
            (dq + dp).sqrt()
        })
        .reduce(f64::min);
    Ok(RewardReport {
        reward,
        dwell,
        nearest_saddle_distance,
    })
}

/// Reward of the path starting at `s0`, without storing the trajectory.
pub fn reward_from(
    spec: &ComplexHamiltonianSpec,
    s0: &PhaseState,
    dt: f64,
    steps: usize,
) -> Result<f64> {
    reward_from_with_bound(spec, s0, dt, steps, DEFAULT_BLOWUP_BOUND)
}

pub fn reward_from_with_bound(
    spec: &ComplexHamiltonianSpec,
    s0: &PhaseState,
    dt: f64,
    steps: usize,
    bound: f64,
) -> Result<f64> {
    let mut lf = Leapfrog::new(spec, s0, dt, bound)?;
    let mut prev = spec.im_h(s0);
    let mut acc = 0.0;
    for _ in 0..steps {
        lf.step()?;
        let cur = spec.im_h(&lf.state);
        acc += 0.5 * (prev + cur);
        prev = cur;
    }
    Ok(acc * dt)
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * dt
}

#[cfg(test)]
mod tests {
    use super::super::hamiltonian::Bump;
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_period() {
        let spec = ComplexHamiltonianSpec::harmonic(1.0);
        // dt ~ 1e-3, adjusted so that a whole number of steps spans the period
        let steps = 6283;
        let dt = 2.0 * PI / steps as f64;
        let traj = integrate(&spec, &PhaseState::at_rest(vec![1.0]), dt, steps).unwrap();
        let last = traj.states.last().unwrap();
        assert!((last.q[0] - 1.0).abs() < 1e-4 && last.p[0].abs() < 1e-4);
    }

    #[test]
    fn fixed_point_is_constant() {
        let spec = ComplexHamiltonianSpec::double_well(1.0);
        for q in [-1.0, 0.0, 1.0] {
            let traj = integrate(&spec, &PhaseState::at_rest(vec![q]), 0.01, 500).unwrap();
            assert!(traj.states.iter().all(|s| s.q[0] == q && s.p[0] == 0.0));
        }
    }

    #[test]
    fn forward_backward_returns() {
        let spec = ComplexHamiltonianSpec::double_well(1.0);
        let s0 = PhaseState::new(vec![0.3], vec![0.4]).unwrap();
        let fwd = integrate(&spec, &s0, 1e-3, 5000).unwrap();
        let back = integrate(&spec, &fwd.states.last().unwrap().reversed(), 1e-3, 5000).unwrap();
        let end = back.states.last().unwrap().reversed();
        assert!((end.q[0] - s0.q[0]).abs() < 1e-9);
        assert!((end.p[0] - s0.p[0]).abs() < 1e-9);
    }

    #[test]
    fn energy_drift_long_horizon() {
        let spec = ComplexHamiltonianSpec::double_well(1.0);
        let s0 = PhaseState::new(vec![0.5], vec![0.0]).unwrap();
        let traj = integrate(&spec, &s0, 1e-3, 100_000).unwrap();
        let e0 = traj.energy[0];
        assert!(traj.max_energy_drift() <= 1e-6 * e0.abs().max(1.0));
    }

    #[test]
    fn im_h_does_not_touch_dynamics() {
        let a = ComplexHamiltonianSpec::double_well(1.0);
        let b = a.with_bumps(vec![
            Bump::at(vec![0.0], 0.3, 5.0),
            Bump::at(vec![1.0], 0.1, -2.0),
        ]);
        let s0 = PhaseState::new(vec![0.2], vec![0.7]).unwrap();
        let ta = integrate(&a, &s0, 1e-2, 2000).unwrap();
        let tb = integrate(&b, &s0, 1e-2, 2000).unwrap();
        for (x, y) in ta.states.iter().zip(&tb.states) {
            assert_eq!(x.q[0].to_bits(), y.q[0].to_bits());
            assert_eq!(x.p[0].to_bits(), y.p[0].to_bits());
        }
    }

    #[test]
    fn blowup_detected() {
        // inverted quadratic with no quartic term runs away
        let mut spec = ComplexHamiltonianSpec::harmonic(1.0);
        spec.potential.coefficients[0][2] = -0.5;
        let err = integrate(&spec, &PhaseState::at_rest(vec![1.0]), 0.01, 10_000).unwrap_err();
        assert!(matches!(err, Error::Blowup { .. }));
    }

    #[test]
    fn step_count_checks() {
        assert_eq!(step_count(10.0, 0.01).unwrap(), 1000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 0.0).is_err());
    }

    #[test]
    fn reward_trivial_cases() {
        let spec = ComplexHamiltonianSpec::double_well(1.0);
        let traj = integrate(
            &spec,
            &PhaseState::new(vec![0.5], vec![0.1]).unwrap(),
            0.01,
            100,
        )
        .unwrap();
        let r = reward(&traj, &spec).unwrap();
        assert_eq!(r.reward, 0.0);
        assert!(r.dwell.is_empty());

        let w = 1.7;
        let spec = spec.with_bumps(vec![Bump::at(vec![1.0], 0.2, w)]);
        let traj = integrate(&spec, &PhaseState::at_rest(vec![1.0]), 0.01, 500).unwrap();
        let r =
            reward_with_fixed_points(&traj, &spec, &[vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
        assert!((r.reward - w * 5.0).abs() < 1e-12);
        assert!((r.dwell[0].time - 5.0).abs() < 1e-12);
        assert_eq!(r.nearest_saddle_distance, Some(0.0));
        assert!(
            (reward_from(&spec, &PhaseState::at_rest(vec![1.0]), 0.01, 500).unwrap() - r.reward)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn reward_refinement() {
        // oscillator crossing a narrow bump sitting on its orbit at (0, 1)
        let w = 2.0;
        let mut bump = Bump::at(vec![0.0], 0.05, w);
        bump.center_p = vec![1.0];
        let spec = ComplexHamiltonianSpec::harmonic(1.0).with_bumps(vec![bump]);
        let s0 = PhaseState::new(vec![-1.0], vec![0.0]).unwrap();
        let coarse = reward_from(&spec, &s0, 1e-2, 314).unwrap();
        let fine = reward_from(&spec, &s0, 1e-3, 3140).unwrap();
        assert!((coarse - fine).abs() < 1e-3 * fine, "{coarse} {fine}");
        // near the centre the speed is ~1, so the Gaussian integral is w*sigma*sqrt(2 pi)
        let crossing = w * 0.05 * (2.0 * PI).sqrt();
        assert!((fine - crossing).abs() < 0.01 * crossing);
    }
}
