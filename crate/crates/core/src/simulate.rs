//! Adaptive Dormand-Prince 5(4) integration of the physical flow, the scalar
//! collision equation `g'' = C g^(-(alpha+2)/2)` and the complex auxiliary flow,
//! plus homothetic cross-validation and Poincare sections.
//!
//! Complex states are stored as interleaved `[re, im]` pairs so one real
//! integrator serves all three flows.

use num_complex::Complex64;
use thiserror::Error;

use crate::exact::Rational;
use crate::homothetic::HomotheticData;
use crate::model::{aux_rhs, force, hamiltonian, potential, principal_pow, ComplexVector, Configuration, ModelError, PhaseState};

pub const DEFAULT_MIN_CENTER_DISTANCE: f64 = 1e-6;
pub const BRANCH_GUARD: f64 = 1e-8;
/// Crossing times are refined until the bracketing interval is this short.
pub const SECTION_TIME_TOL: f64 = 1e-10;
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("near collision with center {center} at t = {t}")]
    NearCollision { t: f64, center: usize },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("|g| fell below {BRANCH_GUARD:e} at t = {t}")]
    BranchApproach { t: f64 },
    #[error("initial condition has energy {got}, expected {expected}")]
    OffEnergyLevel { expected: f64, got: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `y' = f(t, y)` on a real state vector.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError>;
    /// Called on every accepted state; an error halts integration.
    fn check(&self, _t: f64, _y: &[f64]) -> Result<(), SimError> {
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step of size `h`; returns the fifth-order state and the
/// embedded error estimate.
pub fn dopri_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), SimError> {
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    for s in 0..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += h * A[s][j] * kj[i];
            }
            stage[i] = acc;
        }
        sys.rhs(t + C[s] * h, &stage, &mut k[s])?;
    }
    let mut y5 = vec![0.0; n];
    let mut err = vec![0.0; n];
    for i in 0..n {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for s in 0..7 {
            hi += B5[s] * k[s][i];
            lo += B4[s] * k[s][i];
        }
        y5[i] = y[i] + h * hi;
        err[i] = h * (hi - lo);
    }
    Ok((y5, err))
}

/// Step-by-step adaptive integrator.
pub struct Integrator<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    pub t: f64,
    pub y: Vec<f64>,
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
    steps: usize,
}

/// The accepted step just taken.
#[derive(Debug, Clone)]
pub struct Step {
    pub t_prev: f64,
    pub y_prev: Vec<f64>,
    pub h: f64,
}

impl<'a, S: OdeSystem + ?Sized> Integrator<'a, S> {
    /// Mixed error control: each component within `rel_tol * (1 + |y_i|)`.
    pub fn new(sys: &'a S, t0: f64, y0: Vec<f64>, rel_tol: f64) -> Result<Self, SimError> {
        if !(rel_tol > 0.0) {
            return Err(SimError::InvalidInput(format!("rel_tol must be positive, got {rel_tol}")));
        }
        if y0.len() != sys.dim() {
            return Err(SimError::InvalidInput("state dimension mismatch".into()));
        }
        sys.check(t0, &y0)?;
        let mut dy = vec![0.0; y0.len()];
        sys.rhs(t0, &y0, &mut dy)?;
        let ynorm = y0.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
        let dnorm = dy.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let h = if dnorm > 0.0 {
            (0.01 * ynorm / dnorm) * rel_tol.powf(0.2)
        } else {
            1e-3
        };
        Ok(Integrator {
            sys,
            t: t0,
            y: y0,
            h: h.max(1e-12),
            rel_tol,
            abs_tol: rel_tol,
            steps: 0,
        })
    }

    /// Takes one accepted step, never passing `t_limit`.
    pub fn advance(&mut self, t_limit: f64) -> Result<Step, SimError> {
        let remaining = t_limit - self.t;
        if remaining <= 0.0 {
            return Err(SimError::InvalidInput("already at the time limit".into()));
        }
        loop {
            self.steps += 1;
            if self.steps > MAX_STEPS {
                return Err(SimError::StepUnderflow { t: self.t, h: self.h });
            }
            let remaining = t_limit - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h < 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(SimError::StepUnderflow { t: self.t, h });
            }
            let attempt = dopri_step(self.sys, self.t, &self.y, h);
            let (y_new, err) = match attempt {
                Ok(v) => v,
                // A stage landed on a singular point: retry with a smaller step.
                Err(SimError::Model(_)) | Err(SimError::BranchApproach { .. }) => {
                    self.h = h * 0.25;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let err_norm = err
                .iter()
                .zip(self.y.iter().zip(&y_new))
                .map(|(e, (a, b))| e.abs() / (self.abs_tol + self.rel_tol * a.abs().max(b.abs())))
                .fold(0.0, f64::max);
            if !err_norm.is_finite() {
                self.h = h * 0.25;
                continue;
            }
            let factor = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err_norm <= 1.0 {
                let t_new = if last { t_limit } else { self.t + h };
                self.sys.check(t_new, &y_new)?;
                let step = Step {
                    t_prev: self.t,
                    y_prev: std::mem::replace(&mut self.y, y_new),
                    h,
                };
                self.t = t_new;
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                return Ok(step);
            }
            self.h = h * factor.min(1.0);
        }
    }

    /// Integrates to each requested time in order, returning the states there.
    pub fn sample(&mut self, times: &[f64]) -> Result<Vec<Vec<f64>>, SimError> {
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            while self.t < t {
                self.advance(t)?;
            }
            out.push(self.y.clone());
        }
        Ok(out)
    }
}

/// Canonical equations of the physical Hamiltonian, state `[q, p]`.
pub struct PhysicalFlow<'a> {
    pub config: &'a Configuration,
    pub min_center_distance: f64,
}

impl OdeSystem for PhysicalFlow<'_> {
    fn dim(&self) -> usize {
        2 * self.config.dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        let n = self.config.dim();
        dy[..n].copy_from_slice(&y[n..]);
        dy[n..].copy_from_slice(&force(self.config, &y[..n])?);
        Ok(())
    }

    fn check(&self, t: f64, y: &[f64]) -> Result<(), SimError> {
        let q = &y[..self.config.dim()];
        for (center, c) in self.config.centers().iter().enumerate() {
            let d = q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d < self.min_center_distance {
                return Err(SimError::NearCollision { t, center });
            }
        }
        Ok(())
    }
}

fn split_state(y: &[f64]) -> PhaseState {
    let n = y.len() / 2;
    PhaseState::new(y[..n].to_vec(), y[n..].to_vec())
}

fn join_state(s: &PhaseState) -> Vec<f64> {
    s.q.iter().chain(&s.p).copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// `max |H(t) - H(0)| / |H(0)|` (absolute when `H(0) = 0`).
    pub energy_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Integrates the physical flow from `state0` to `t_final`, recording every accepted step.
pub fn integrate_flow(
    config: &Configuration,
    state0: &PhaseState,
    t_final: f64,
    rel_tol: f64,
    min_center_distance: f64,
) -> Result<Trajectory, SimError> {
    if !(t_final > 0.0) {
        return Err(SimError::InvalidInput(format!("t_final must be positive, got {t_final}")));
    }
    if state0.q.len() != config.dim() || state0.p.len() != config.dim() {
        return Err(SimError::InvalidInput("initial state dimension mismatch".into()));
    }
    let h0 = hamiltonian(config, state0)?;
    let sys = PhysicalFlow {
        config,
        min_center_distance,
    };
    let mut integ = Integrator::new(&sys, 0.0, join_state(state0), rel_tol)?;
    let mut times = vec![0.0];
    let mut states = vec![state0.clone()];
    let mut drift: f64 = 0.0;
    let denom = if h0 != 0.0 { h0.abs() } else { 1.0 };
    while integ.t < t_final {
        integ.advance(t_final)?;
        let state = split_state(&integ.y);
        drift = drift.max((hamiltonian(config, &state)? - h0).abs() / denom);
        times.push(integ.t);
        states.push(state);
    }
    Ok(Trajectory {
        times,
        states,
        energy_drift: drift,
    })
}

/// `g'' = C g^(-(alpha+2)/2)` for complex `g`, state `[Re g, Im g, Re g', Im g']`.
pub struct KeplerScalar {
    pub c: Complex64,
    pub alpha: f64,
}

impl OdeSystem for KeplerScalar {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        let g = Complex64::new(y[0], y[1]);
        if g.norm() < BRANCH_GUARD {
            return Err(SimError::BranchApproach { t });
        }
        let acc = self.c * principal_pow(g, -(self.alpha + 2.0) / 2.0);
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = acc.re;
        dy[3] = acc.im;
        Ok(())
    }

    fn check(&self, t: f64, y: &[f64]) -> Result<(), SimError> {
        if Complex64::new(y[0], y[1]).norm() < BRANCH_GUARD {
            return Err(SimError::BranchApproach { t });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrajectory {
    pub times: Vec<f64>,
    pub g: Vec<Complex64>,
    pub dg: Vec<Complex64>,
}

/// `E = (g')^2 / 2 + (2C/alpha) g^(-alpha/2)`, conserved by the scalar equation.
pub fn kepler_energy(c: Complex64, alpha: f64, g: Complex64, dg: Complex64) -> Complex64 {
    dg * dg * 0.5 + c * (2.0 / alpha) * principal_pow(g, -alpha / 2.0)
}

impl ScalarTrajectory {
    pub fn energies(&self, c: Complex64, alpha: f64) -> Vec<Complex64> {
        self.g
            .iter()
            .zip(&self.dg)
            .map(|(&g, &dg)| kepler_energy(c, alpha, g, dg))
            .collect()
    }
}

pub fn integrate_kepler_scalar(
    c: Complex64,
    alpha: &Rational,
    g0: f64,
    dg0: f64,
    t_final: f64,
    rel_tol: f64,
) -> Result<ScalarTrajectory, SimError> {
    let sys = KeplerScalar {
        c,
        alpha: alpha.to_f64(),
    };
    let mut integ = Integrator::new(&sys, 0.0, vec![g0, 0.0, dg0, 0.0], rel_tol)?;
    let mut out = ScalarTrajectory {
        times: vec![0.0],
        g: vec![Complex64::new(g0, 0.0)],
        dg: vec![Complex64::new(dg0, 0.0)],
    };
    while integ.t < t_final {
        integ.advance(t_final)?;
        out.times.push(integ.t);
        out.g.push(Complex64::new(integ.y[0], integ.y[1]));
        out.dg.push(Complex64::new(integ.y[2], integ.y[3]));
    }
    Ok(out)
}

/// The auxiliary flow `q' = p`, `p' = aux_rhs(q)` on complex n-space,
/// state `[Re q, Im q, Re p, Im p]` component-interleaved.
pub struct AuxiliaryFlow<'a> {
    pub config: &'a Configuration,
    pub e: &'a ComplexVector,
    pub l: usize,
}

fn unpack(y: &[f64]) -> ComplexVector {
    ComplexVector(y.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

fn pack(v: &ComplexVector) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

impl OdeSystem for AuxiliaryFlow<'_> {
    fn dim(&self) -> usize {
        4 * self.config.dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), SimError> {
        let half = 2 * self.config.dim();
        dy[..half].copy_from_slice(&y[half..]);
        let q = unpack(&y[..half]);
        let acc = aux_rhs(self.config, self.e, self.l, &q).map_err(|_| SimError::BranchApproach { t })?;
        dy[half..].copy_from_slice(&pack(&acc));
        Ok(())
    }
}

/// Integrates the auxiliary flow from `(V, 0)` and the scalar equation from
/// `(1, 0)` with the same `C`, returning `max_t |q(t) - g(t) V| / |V|`.
pub fn cross_validate_homothetic(
    config: &Configuration,
    data: &HomotheticData,
    t_final: f64,
    rel_tol: f64,
) -> Result<f64, SimError> {
    if t_final <= 0.0 {
        return Ok(0.0);
    }
    const SAMPLES: usize = 64;
    let times: Vec<f64> = (1..=SAMPLES).map(|i| t_final * i as f64 / SAMPLES as f64).collect();

    let aux = AuxiliaryFlow {
        config,
        e: &data.e,
        l: data.l,
    };
    let mut y0 = pack(&data.v);
    y0.extend(std::iter::repeat_n(0.0, 2 * config.dim()));
    let aux_states = Integrator::new(&aux, 0.0, y0, rel_tol)?.sample(&times)?;

    let scalar = KeplerScalar {
        c: data.c,
        alpha: config.alpha_f64(),
    };
    let g_states = Integrator::new(&scalar, 0.0, vec![1.0, 0.0, 0.0, 0.0], rel_tol)?.sample(&times)?;

    let v_norm = data.v.norm();
    let half = 2 * config.dim();
    let worst = aux_states
        .iter()
        .zip(&g_states)
        .map(|(ya, yg)| {
            let q = unpack(&ya[..half]);
            let g = Complex64::new(yg[0], yg[1]);
            (&q - &data.v.scale(g)).norm() / v_norm
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionDirection {
    /// Momentum along the section axis positive at the crossing.
    Up,
    Down,
    Both,
}

/// The hyperplane `q[axis] = value` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub axis: usize,
    pub value: f64,
    pub direction: SectionDirection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    pub trajectory: usize,
    pub t: f64,
    /// The coordinate not fixed by the section.
    pub coordinate: f64,
    /// Its conjugate momentum.
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionRun {
    pub points: Vec<SectionPoint>,
    /// Trajectories that stopped early, with the reason; their points before the
    /// failure are dropped.
    pub failures: Vec<(usize, SimError)>,
    pub completed: usize,
}

/// Planar states on `section` at the given energy, from `(coordinate, momentum)`
/// pairs; the section-axis momentum is solved for with the sign of the section
/// direction (positive for `Both`).
pub fn section_initial_conditions(
    config: &Configuration,
    energy: f64,
    section: &Section,
    pairs: &[(f64, f64)],
) -> Vec<Result<PhaseState, SimError>> {
    let other = 1 - section.axis;
    pairs
        .iter()
        .map(|&(coordinate, momentum)| {
            let mut q = vec![0.0; 2];
            q[section.axis] = section.value;
            q[other] = coordinate;
            let v = potential(config, &q)?;
            let kinetic = 2.0 * (energy - v) - momentum * momentum;
            if kinetic < 0.0 {
                return Err(SimError::InvalidInput(format!(
                    "({coordinate}, {momentum}) is outside the energy surface"
                )));
            }
            let sign = if section.direction == SectionDirection::Down { -1.0 } else { 1.0 };
            let mut p = vec![0.0; 2];
            p[other] = momentum;
            p[section.axis] = sign * kinetic.sqrt();
            Ok(PhaseState::new(q, p))
        })
        .collect()
}

fn refine_crossing<S: OdeSystem>(
    sys: &S,
    step: &Step,
    axis: usize,
    value: f64,
) -> Result<(f64, Vec<f64>), SimError> {
    let s_prev = step.y_prev[axis] - value;
    let (mut lo, mut hi) = (0.0, step.h);
    let mut state = None;
    while hi - lo > SECTION_TIME_TOL {
        let mid = 0.5 * (lo + hi);
        let (y_mid, _) = dopri_step(sys, step.t_prev, &step.y_prev, mid)?;
        let s_mid = y_mid[axis] - value;
        if s_mid == 0.0 || (s_mid > 0.0) != (s_prev > 0.0) {
            hi = mid;
            state = Some(y_mid);
        } else {
            lo = mid;
        }
    }
    let y = match state {
        Some(y) if hi - lo <= SECTION_TIME_TOL => y,
        _ => dopri_step(sys, step.t_prev, &step.y_prev, hi)?.0,
    };
    Ok((step.t_prev + hi, y))
}

/// Transversal crossings of `section` for each planar initial condition.
///
/// Crossings are detected by a sign change of `q[axis] - value` across an
/// accepted step and located by bisection in time with single steps from the
/// step start. A trajectory that fails is recorded and the run continues.
pub fn poincare_section(
    config: &Configuration,
    energy: Option<f64>,
    section: &Section,
    initial_conditions: &[PhaseState],
    t_final: f64,
    rel_tol: f64,
    min_center_distance: f64,
) -> Result<SectionRun, SimError> {
    if config.dim() != 2 {
        return Err(SimError::InvalidInput("Poincare sections need a planar configuration".into()));
    }
    if section.axis > 1 {
        return Err(SimError::InvalidInput(format!("section axis must be 0 or 1, got {}", section.axis)));
    }
    let sys = PhysicalFlow {
        config,
        min_center_distance,
    };
    let other = 1 - section.axis;
    let mut run = SectionRun {
        points: Vec::new(),
        failures: Vec::new(),
        completed: 0,
    };
    for (index, ic) in initial_conditions.iter().enumerate() {
        let result = (|| -> Result<Vec<SectionPoint>, SimError> {
            if let Some(expected) = energy {
                let got = hamiltonian(config, ic)?;
                if (got - expected).abs() > 1e-9 * expected.abs().max(1.0) {
                    return Err(SimError::OffEnergyLevel { expected, got });
                }
            }
            let mut points = Vec::new();
            let mut integ = Integrator::new(&sys, 0.0, join_state(ic), rel_tol)?;
            while integ.t < t_final {
                let step = integ.advance(t_final)?;
                let s_prev = step.y_prev[section.axis] - section.value;
                let s_new = integ.y[section.axis] - section.value;
                let crossed = (s_prev < 0.0 && s_new >= 0.0) || (s_prev > 0.0 && s_new <= 0.0);
                if !crossed {
                    continue;
                }
                let (t, y) = refine_crossing(&sys, &step, section.axis, section.value)?;
                let p_axis = y[2 + section.axis];
                let keep = match section.direction {
                    SectionDirection::Up => p_axis > 0.0,
                    SectionDirection::Down => p_axis < 0.0,
                    SectionDirection::Both => true,
                };
                if keep {
                    points.push(SectionPoint {
                        trajectory: index,
                        t,
                        coordinate: y[other],
                        momentum: y[2 + other],
                    });
                }
            }
            Ok(points)
        })();
        match result {
            Ok(points) => {
                run.points.extend(points);
                run.completed += 1;
            }
            Err(e) => run.failures.push((index, e)),
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn kepler(alpha: &str) -> Configuration {
        Configuration::new(2, vec![vec![0.0, 0.0]], vec![1.0], alpha.parse().unwrap()).unwrap()
    }

    fn circular() -> PhaseState {
        PhaseState::new(vec![1.0, 0.0], vec![0.0, 1.0])
    }

    #[test]
    fn circular_orbit_closes() {
        let traj = integrate_flow(&kepler("1"), &circular(), 2.0 * PI, 1e-10, DEFAULT_MIN_CENTER_DISTANCE).unwrap();
        let end = traj.last();
        assert!((end.q[0] - 1.0).abs() < 1e-6 && end.q[1].abs() < 1e-6, "{end:?}");
        assert!(traj.energy_drift < 1e-8);
        assert_eq!(*traj.times.last().unwrap(), 2.0 * PI);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn collision_start_is_rejected() {
        let start = PhaseState::new(vec![0.0, 0.0], vec![0.0, 1.0]);
        assert!(integrate_flow(&kepler("1"), &start, 1.0, 1e-10, DEFAULT_MIN_CENTER_DISTANCE).is_err());
    }

    #[test]
    fn radial_fall_hits_near_collision() {
        let start = PhaseState::new(vec![1.0, 0.0], vec![0.0, 0.0]);
        let err = integrate_flow(&kepler("1"), &start, 10.0, 1e-10, 1e-3).unwrap_err();
        assert!(matches!(err, SimError::NearCollision { center: 0, .. }), "{err:?}");
    }

    #[test]
    fn kepler_scalar_is_convex_and_increasing() {
        let traj = integrate_kepler_scalar(Complex64::new(1.0, 0.0), &"1".parse().unwrap(), 1.0, 0.0, 5.0, 1e-10).unwrap();
        assert!(traj.g.windows(2).all(|w| w[1].re > w[0].re));
        assert!(traj.dg.windows(2).all(|w| w[1].re > w[0].re));
        assert!(traj.g.iter().all(|g| g.im.abs() < 1e-14));
    }

    #[test]
    fn kepler_scalar_energy_is_conserved() {
        for alpha in ["1", "1/2", "3/2", "4/5"] {
            let a: Rational = alpha.parse().unwrap();
            let c = Complex64::new(0.8, 0.0);
            let traj = integrate_kepler_scalar(c, &a, 1.0, -0.3, 10.0, 1e-10).unwrap();
            let e = traj.energies(c, a.to_f64());
            let worst = e.iter().map(|x| (x - e[0]).norm() / e[0].norm()).fold(0.0, f64::max);
            assert!(worst < 1e-8, "alpha={alpha} drift={worst}");
        }
    }

    #[test]
    fn kepler_scalar_branch_guard() {
        let err = integrate_kepler_scalar(Complex64::new(1.0, 0.0), &Rational::one(), 1e-9, 0.0, 1.0, 1e-10).unwrap_err();
        assert!(matches!(err, SimError::BranchApproach { .. }));
    }

    #[test]
    fn section_of_circular_orbit() {
        let section = Section {
            axis: 1,
            value: 0.0,
            direction: SectionDirection::Up,
        };
        let t_final = 10.5 * 2.0 * PI;
        let run = poincare_section(&kepler("1"), Some(-0.5), &section, &[circular()], t_final, 1e-10, DEFAULT_MIN_CENTER_DISTANCE)
            .unwrap();
        assert_eq!(run.points.len(), 10);
        for p in &run.points {
            assert!((p.coordinate - 1.0).abs() < 1e-6, "{p:?}");
            assert!(p.momentum.abs() < 1e-6);
        }
        for (i, p) in run.points.iter().enumerate() {
            assert!((p.t - 2.0 * PI * (i + 1) as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn section_without_crossings_is_empty() {
        let section = Section {
            axis: 1,
            value: 5.0,
            direction: SectionDirection::Both,
        };
        let run = poincare_section(&kepler("1"), None, &section, &[circular()], 20.0, 1e-9, DEFAULT_MIN_CENTER_DISTANCE)
            .unwrap();
        assert!(run.points.is_empty());
        assert_eq!(run.completed, 1);
    }

    #[test]
    fn off_energy_initial_condition_is_recorded() {
        let section = Section {
            axis: 1,
            value: 0.0,
            direction: SectionDirection::Up,
        };
        let run = poincare_section(&kepler("1"), Some(-0.4), &section, &[circular()], 1.0, 1e-9, DEFAULT_MIN_CENTER_DISTANCE)
            .unwrap();
        assert_eq!(run.completed, 0);
        assert!(matches!(run.failures[0].1, SimError::OffEnergyLevel { .. }));
    }

    #[test]
    fn section_initial_conditions_lie_on_the_energy_surface() {
        let cfg = Configuration::new(
            2,
            vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.2]],
            vec![1.0, 1.0, 1.0],
            "3/2".parse().unwrap(),
        )
        .unwrap();
        let section = Section {
            axis: 1,
            value: 0.0,
            direction: SectionDirection::Up,
        };
        let ics = section_initial_conditions(&cfg, -0.8, &section, &[(0.3, 0.1), (-0.5, 0.0), (0.0, 50.0)]);
        for ic in &ics[..2] {
            let ic = ic.as_ref().unwrap();
            assert!((hamiltonian(&cfg, ic).unwrap() + 0.8).abs() < 1e-12);
            assert!(ic.p[1] > 0.0);
        }
        assert!(ics[2].is_err());
    }

    fn two_center(alpha: &str) -> Configuration {
        Configuration::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0], alpha.parse().unwrap()).unwrap()
    }

    #[test]
    fn energy_is_conserved_over_long_runs() {
        let cfg = Configuration::new(
            2,
            vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            vec![1.0, 0.7],
            "1".parse().unwrap(),
        )
        .unwrap();
        let state = PhaseState::new(vec![0.0, 2.0], vec![0.6, 0.0]);
        let traj = integrate_flow(&cfg, &state, 100.0, 1e-10, DEFAULT_MIN_CENTER_DISTANCE).unwrap();
        assert!(traj.energy_drift <= 1e-6, "{}", traj.energy_drift);
        assert_eq!(*traj.times.last().unwrap(), 100.0);
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let cfg = two_center("3/2");
        let start = PhaseState::new(vec![0.4, 1.3], vec![0.5, -0.2]);
        let forward = integrate_flow(&cfg, &start, 5.0, 1e-12, DEFAULT_MIN_CENTER_DISTANCE).unwrap();
        let end = forward.last();
        let flipped = PhaseState::new(end.q.clone(), end.p.iter().map(|p| -p).collect());
        let back = integrate_flow(&cfg, &flipped, 5.0, 1e-12, DEFAULT_MIN_CENTER_DISTANCE).unwrap();
        let b = back.last();
        let dq = start.q.iter().zip(&b.q).map(|(x, y)| (x - y).abs());
        let dp = start.p.iter().zip(&b.p).map(|(x, y)| (x + y).abs());
        let err = dq.chain(dp).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn homothetic_solution_cross_validates() {
        for alpha in ["1", "3/2", "2/3"] {
            let cfg = two_center(alpha);
            let data = HomotheticData::build(&cfg, &crate::homothetic::HomotheticOptions::new(2)).unwrap();
            let err = cross_validate_homothetic(&cfg, &data, 1.0, 1e-11).unwrap();
            assert!(err <= 1e-6, "alpha {alpha}: {err}");
            let mut bad = data.clone();
            bad.v = ComplexVector(vec![bad.v[0] + bad.v.norm() * 0.05, bad.v[1]]);
            let err = cross_validate_homothetic(&cfg, &bad, 1.0, 1e-11).unwrap();
            assert!(err >= 1e-3, "alpha {alpha}: perturbed {err}");
        }
    }

    #[test]
    fn three_center_section_cloud() {
        let cfg = Configuration::new(
            2,
            vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.2]],
            vec![1.0, 1.0, 1.0],
            "3/2".parse().unwrap(),
        )
        .unwrap();
        let section = Section {
            axis: 1,
            value: 0.0,
            direction: SectionDirection::Up,
        };
        let energy = -0.5;
        let pairs: Vec<(f64, f64)> = (0..4).map(|i| (-0.6 + 0.4 * i as f64, 0.05)).collect();
        let ics: Vec<PhaseState> = section_initial_conditions(&cfg, energy, &section, &pairs)
            .into_iter()
            .map(Result::unwrap)
            .collect();
        let run = poincare_section(&cfg, Some(energy), &section, &ics, 40.0, 1e-10, 1e-4).unwrap();
        assert_eq!(run.completed + run.failures.len(), ics.len());
        assert!(run.completed > 0);
        assert!(!run.points.is_empty());
        for pt in &run.points {
            let q = vec![pt.coordinate, 0.0];
            // Every crossing sits on the energy shell with positive normal momentum.
            let v = potential(&cfg, &q).unwrap();
            assert!(2.0 * (energy - v) - pt.momentum * pt.momentum >= -1e-6);
        }
    }
}
