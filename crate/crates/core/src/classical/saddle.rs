use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hamiltonian::{ComplexHamiltonianSpec, PhaseState};
use super::integrate::{Leapfrog, DEFAULT_BLOWUP_BOUND};
use crate::error::{Error, Result};
use crate::random::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub q: Vec<f64>,
    /// Number of negative Hessian eigenvalues.
    pub index: usize,
    /// Hessian eigenvalues in increasing order.
    pub eigenvalues: Vec<f64>,
}

impl CriticalPoint {
    pub fn is_hyperbolic(&self) -> bool {
        self.index > 0
    }
}

/// Where Newton's method is started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleSearch {
    /// Starts are drawn from the cube `[-half_width, half_width]^N`.
    pub half_width: f64,
    /// Grid points per axis when the full grid has at most `max_starts` points.
    pub per_axis: usize,
    /// Otherwise this many seeded uniform starts are used.
    pub max_starts: usize,
    pub seed: u64,
    /// Roots closer than this in every coordinate are merged.
    #[serde(default = "default_dedup_tol")]
    pub dedup_tol: f64,
}

fn default_dedup_tol() -> f64 {
    1e-6
}

impl Default for SaddleSearch {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            per_axis: 9,
            max_starts: 4096,
            seed: 0,
            dedup_tol: default_dedup_tol(),
        }
    }
}

const NEWTON_ITERS: usize = 200;

pub fn saddle_points(spec: &ComplexHamiltonianSpec) -> Result<Vec<CriticalPoint>> {
    saddle_points_with(spec, &SaddleSearch::default())
}

/// Critical points of V from multi-start Newton iteration, deduplicated and
/// sorted by index, then by coordinates.
pub fn saddle_points_with(
    spec: &ComplexHamiltonianSpec,
    search: &SaddleSearch,
) -> Result<Vec<CriticalPoint>> {
    spec.validate()?;
    let n = spec.dim();
    let starts = newton_starts(n, search);
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for s in starts {
        if let Some(r) = newton(spec, s, 4.0 * search.half_width.max(1.0)) {
            let dup = roots.iter().any(|x| {
                x.iter()
                    .zip(&r)
                    .all(|(a, b)| (a - b).abs() <= search.dedup_tol)
            });
            if !dup {
                roots.push(r);
            }
        }
    }
    let mut points: Vec<CriticalPoint> = roots.into_iter().map(|q| classify(spec, q)).collect();
    points.sort_by(|a, b| {
        a.index.cmp(&b.index).then_with(|| {
            a.q.iter()
                .zip(&b.q)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    Ok(points)
}

fn newton_starts(n: usize, search: &SaddleSearch) -> Vec<Vec<f64>> {
    let w = search.half_width;
    let k = search.per_axis.max(2);
    match k.checked_pow(n as u32).filter(|t| *t <= search.max_starts) {
        Some(total) => (0..total)
            .map(|mut idx| {
                (0..n)
                    .map(|_| {
                        let j = idx % k;
                        idx /= k;
                        -w + 2.0 * w * j as f64 / (k - 1) as f64
                    })
                    .collect()
            })
            .collect(),
        None => {
            let mut g = rng(search.seed);
            let mut starts = vec![vec![0.0; n]];
            starts.extend(
                (1..search.max_starts).map(|_| (0..n).map(|_| g.random_range(-w..w)).collect()),
            );
            starts
        }
    }
}

fn newton(spec: &ComplexHamiltonianSpec, mut x: Vec<f64>, radius: f64) -> Option<Vec<f64>> {
    let n = x.len();
    let mut g = vec![0.0; n];
    for _ in 0..NEWTON_ITERS {
        spec.gradient(&x, &mut g);
        let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if g.iter().all(|v| v.abs() <= 1e-13 * scale) {
            return Some(
                x.into_iter()
                    .map(|v| if v.abs() < 1e-12 { 0.0 } else { v })
                    .collect(),
            );
        }
        let h = spec.hessian(&x);
        let step = h.lu().solve(&DVector::from_column_slice(&g))?;
        let norm = step.norm();
        if !norm.is_finite() {
            return None;
        }
        // cap wild steps from near-singular Hessians
        let damp = if norm > 1.0 { 1.0 / norm } else { 1.0 };
        for (v, s) in x.iter_mut().zip(step.iter()) {
            *v -= damp * s;
        }
        if x.iter().any(|v| v.abs() > radius) {
            return None;
        }
    }
    None
}

fn classify(spec: &ComplexHamiltonianSpec, q: Vec<f64>) -> CriticalPoint {
    let h = spec.hessian(&q);
    let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let index = eigenvalues.iter().filter(|&&e| e < -1e-10 * scale).count();
    CriticalPoint {
        q,
        index,
        eigenvalues,
    }
}

/// Largest linearized growth rate of the flow at a critical point, from the
/// mass-weighted Hessian M^{-1/2} H M^{-1/2}, together with the
/// configuration-space direction of the unstable mode (unit length).
pub fn unstable_mode(spec: &ComplexHamiltonianSpec, cp: &CriticalPoint) -> Option<(f64, Vec<f64>)> {
    let n = spec.dim();
    let h = spec.hessian(&cp.q);
    let w = DMatrix::from_fn(n, n, |i, j| {
        h[(i, j)] / (spec.masses[i] * spec.masses[j]).sqrt()
    });
    let eig = SymmetricEigen::new(w);
    let (k, min) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k, *v))?;
    if min >= 0.0 {
        return None;
    }
    let mut dir: Vec<f64> = (0..n)
        .map(|i| eig.eigenvectors[(i, k)] / spec.masses[i].sqrt())
        .collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = dir
        .iter()
        .find(|v| v.abs() > 1e-12)
        .map_or(1.0, |v| v.signum());
    for v in &mut dir {
        *v *= sign / norm;
    }
    Some(((-min).sqrt(), dir))
}

/// The hyperbolic critical point closest to the origin.
pub fn nearest_hyperbolic(spec: &ComplexHamiltonianSpec) -> Result<Option<CriticalPoint>> {
    Ok(saddle_points(spec)?
        .into_iter()
        .filter(CriticalPoint::is_hyperbolic)
        .fold(None, |best: Option<CriticalPoint>, cp| {
            let r = cp.q.iter().map(|v| v * v).sum::<f64>();
            match best {
                Some(b) if b.q.iter().map(|v| v * v).sum::<f64>() <= r => Some(b),
                _ => Some(cp),
            }
        }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellResult {
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwellConfig {
    pub dt: f64,
    /// Give up after this multiple of the predicted dwell (plus one unit).
    pub time_factor: f64,
    #[serde(default = "default_bound")]
    pub blowup_bound: f64,
}

fn default_bound() -> f64 {
    DEFAULT_BLOWUP_BOUND
}

impl Default for DwellConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            time_factor: 20.0,
            blowup_bound: DEFAULT_BLOWUP_BOUND,
        }
    }
}

pub fn dwell_time(
    spec: &ComplexHamiltonianSpec,
    delta: f64,
    big_delta: f64,
    lyapunov: f64,
) -> Result<DwellResult> {
    dwell_time_with(spec, delta, big_delta, lyapunov, &DwellConfig::default())
}

/// Exit time from the ball |q - q*| < `big_delta` for a start displaced by
/// `delta` along the unstable direction of the hyperbolic point nearest the
/// origin, at rest.
pub fn dwell_time_with(
    spec: &ComplexHamiltonianSpec,
    delta: f64,
    big_delta: f64,
    lyapunov: f64,
    cfg: &DwellConfig,
) -> Result<DwellResult> {
    if !(delta > 0.0 && delta <= big_delta && big_delta.is_finite()) {
        return Err(Error::Precondition(format!(
            "dwell needs 0 < delta <= Delta (got {delta}, {big_delta})"
        )));
    }
    if !(lyapunov.is_finite() && lyapunov > 0.0) {
        return Err(Error::Precondition(format!(
            "lyapunov must be positive, got {lyapunov}"
        )));
    }
    let cp = nearest_hyperbolic(spec)?
        .ok_or_else(|| Error::Precondition("potential has no hyperbolic critical point".into()))?;
    let (_, dir) = unstable_mode(spec, &cp).expect("hyperbolic point has an unstable mode");
    let q0: Vec<f64> = cp.q.iter().zip(&dir).map(|(c, d)| c + delta * d).collect();
    let predicted = (big_delta / delta).ln() / lyapunov;
    let max_time = cfg.time_factor * predicted + 1.0;
    let measured = exit_times(
        spec,
        &PhaseState::at_rest(q0),
        std::slice::from_ref(&cp.q),
        big_delta,
        cfg,
        max_time,
    )?[0]
        .ok_or(Error::NoConvergence {
            iterations: (max_time / cfg.dt) as usize,
        })?;
    Ok(DwellResult {
        measured,
        predicted,
    })
}

/// For each group of coordinates, the first time the group's distance from
/// its centre reaches `radius`, linearly interpolated between steps. Groups
/// are given by `centres`, which partition the coordinates in order.
pub(crate) fn exit_times(
    spec: &ComplexHamiltonianSpec,
    s0: &PhaseState,
    centres: &[Vec<f64>],
    radius: f64,
    cfg: &DwellConfig,
    max_time: f64,
) -> Result<Vec<Option<f64>>> {
    let dt = cfg.dt;
    let dist = |q: &[f64]| -> Vec<f64> {
        let mut off = 0;
        centres
            .iter()
            .map(|c| {
                let d = c
                    .iter()
                    .zip(&q[off..])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                off += c.len();
                d
            })
            .collect()
    };
    let mut prev = dist(&s0.q);
    let mut out: Vec<Option<f64>> = prev.iter().map(|d| (*d >= radius).then_some(0.0)).collect();
    let mut lf = Leapfrog::new(spec, s0, dt, cfg.blowup_bound)?;
    let max_steps = (max_time / dt).ceil() as usize;
    while out.iter().any(Option::is_none) && lf.steps_taken < max_steps {
        lf.step()?;
        let cur = dist(&lf.state.q);
        let k = lf.steps_taken as f64;
        for ((o, p), c) in out.iter_mut().zip(&prev).zip(&cur) {
            if o.is_none() && *c >= radius {
                *o = Some(dt * (k - 1.0 + (radius - p) / (c - p)));
            }
        }
        prev = cur;
    }
    Ok(out)
}
