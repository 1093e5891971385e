//! Homothetic solutions of the auxiliary collision system.
//!
//! Given the first `l` centers, an isotropic point `e` satisfies
//! `(e - c_k).(e - c_k) = 0` for `k <= l`. A direction `V` with constant `C`
//! satisfying `C V = aux_rhs(V)` makes `q(t) = g(t) V` a solution whenever
//! `g'' = C g^(-(alpha+2)/2)`. Along it, the matrix
//! `A_ij = sum_k (alpha+2) m_k u_i u_j / [2 V.u]^E` with `u = e - c_k`
//! supplies the eigenvalues `a_k` that feed the integrability criteria.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix};
use crate::model::{
    aux_rhs, is_branch_point, isotropy_residuals, principal_pow, principal_sqrt, ComplexVector,
    Configuration, ModelError,
};

pub const NEWTON_RETRIES: usize = 64;
pub const NEWTON_MAX_ITERATIONS: usize = 200;
pub const ISOTROPY_NEWTON_TOL: f64 = 1e-13;
pub const DIRECTION_NEWTON_TOL: f64 = 1e-13;
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomotheticError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("l must satisfy 1 <= l <= N = {centers}, got {l}")]
    InvalidIndex { l: usize, centers: usize },
    #[error("no isotropic point found after {attempts} attempts (best residual {best_residual:e})")]
    NoIsotropicPoint { attempts: usize, best_residual: f64 },
    #[error("every isotropic point found also makes center {center} isotropic")]
    DegenerateConfiguration { center: usize },
    #[error("supplied point is not isotropic for the first {l} centers: {reason}")]
    InvalidIsotropicPoint { l: usize, reason: String },
    #[error(
        "no admissible direction after {attempts} Newton starts (best residual {best_residual:e}{})",
        if *isotropic_span { "; the active directions span a totally isotropic subspace" } else { "" }
    )]
    NoAdmissibleDirection {
        attempts: usize,
        best_residual: f64,
        isotropic_span: bool,
    },
    #[error("direction has vanishing bilinear norm V.V; unit normalization impossible")]
    GaugeDegenerate,
    #[error("characteristic polynomial roots did not converge after {iterations} iterations (residual {worst_residual:e})")]
    RootFindingFailed { iterations: usize, worst_residual: f64 },
    #[error("homothetic data failed validation: {0}")]
    InvariantViolated(String),
}

impl From<linalg::RootFindingFailed> for HomotheticError {
    fn from(e: linalg::RootFindingFailed) -> Self {
        HomotheticError::RootFindingFailed {
            iterations: e.iterations,
            worst_residual: e.worst_residual,
        }
    }
}

/// Normalization fixing the scaling freedom `(V, C) -> (s V, s^(-(alpha+4)/2) C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    #[default]
    CFixedToOne,
    UnitBilinearNorm,
}

/// Exponent of `[2 V.(e - c_k)]` in the denominator of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentConvention {
    /// `(alpha + 2) / 2`; `a_k / C` then scales linearly with the gauge factor.
    #[default]
    PaperLiteral,
    /// `(alpha + 4) / 2`, the Hessian of the auxiliary potential; makes `a_k / C` gauge invariant.
    HessianConsistent,
}

impl ExponentConvention {
    pub fn exponent(self, alpha: f64) -> f64 {
        match self {
            ExponentConvention::PaperLiteral => (alpha + 2.0) / 2.0,
            ExponentConvention::HessianConsistent => (alpha + 4.0) / 2.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            ExponentConvention::PaperLiteral => ExponentConvention::HessianConsistent,
            ExponentConvention::HessianConsistent => ExponentConvention::PaperLiteral,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ExponentConvention::PaperLiteral => "paper-literal",
            ExponentConvention::HessianConsistent => "hessian-consistent",
        }
    }
}

impl Gauge {
    pub fn label(self) -> &'static str {
        match self {
            Gauge::CFixedToOne => "c-fixed-to-one",
            Gauge::UnitBilinearNorm => "unit-bilinear-norm",
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for ExponentConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn check_index(config: &Configuration, l: usize) -> Result<(), HomotheticError> {
    if l == 0 || l > config.num_centers() {
        return Err(HomotheticError::InvalidIndex {
            l,
            centers: config.num_centers(),
        });
    }
    Ok(())
}

/// `e - c_k` for the first `l` centers.
fn active_directions(config: &Configuration, e: &ComplexVector, l: usize) -> Vec<ComplexVector> {
    config.centers()[..l].iter().map(|c| e.minus_real(c)).collect()
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_complex(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// An isotropic point with the attempt that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicPoint {
    pub e: ComplexVector,
    pub attempt: usize,
    pub max_residual: f64,
}

enum Screen {
    Accepted,
    Degenerate(usize),
}

/// Checks the `k > l` centers stay non-isotropic and `e` is off the first `l` centers.
fn screen_isotropic(config: &Configuration, e: &ComplexVector, l: usize) -> Screen {
    let scale = config.length_scale();
    for (k, c) in config.centers().iter().enumerate().take(l) {
        if e.minus_real(c).norm() < 1e-6 * scale {
            return Screen::Degenerate(k);
        }
    }
    let residuals = isotropy_residuals(config, e);
    for (k, r) in residuals.iter().enumerate().skip(l) {
        if r.norm() < 1e-6 {
            return Screen::Degenerate(k);
        }
    }
    Screen::Accepted
}

fn isotropy_ok(config: &Configuration, e: &ComplexVector, l: usize, tol: f64) -> bool {
    let bound = tol * (1.0 + e.dot(e).norm().max(e.norm().powi(2)));
    isotropy_residuals(config, e)
        .iter()
        .take(l)
        .all(|r| r.norm() <= bound)
}

/// Finds `e` with `(e - c_k)^2 = 0` for `k <= l` and `(e - c_k)^2 != 0` for `k > l`.
///
/// Planar problems with `l <= 2` use the closed form `e = c_1 + t (1, +-i)`;
/// everything else runs Gauss-Newton from seeded random complex starts.
pub fn find_isotropic_point(
    config: &Configuration,
    l: usize,
    seed: u64,
) -> Result<IsotropicPoint, HomotheticError> {
    check_index(config, l)?;
    if config.dim() == 2 && l <= 2 {
        return planar_isotropic_point(config, l, seed);
    }
    newton_isotropic_point(config, l, seed)
}

fn planar_isotropic_point(
    config: &Configuration,
    l: usize,
    seed: u64,
) -> Result<IsotropicPoint, HomotheticError> {
    let c1 = &config.centers()[0];
    let signs = if seed.is_multiple_of(2) { [1.0, -1.0] } else { [-1.0, 1.0] };
    let mut attempt = 0;
    let mut degenerate = None;
    for sign in signs {
        let w = ComplexVector(vec![ONE, Complex64::new(0.0, sign)]);
        let candidates: Vec<Complex64> = if l == 1 {
            // Any t != 0 works; step past the finitely many t making another center isotropic.
            (1..=config.num_centers() + 1)
                .map(|t| Complex64::new(t as f64, 0.0))
                .collect()
        } else {
            // (c1 - c2 + t w)^2 = |c1 - c2|^2 + 2 t (c1 - c2).w since w.w = 0.
            let d = ComplexVector::from_real(c1).minus_real(&config.centers()[1]);
            vec![-d.dot(&d) / (d.dot(&w) * 2.0)]
        };
        for t in candidates {
            attempt += 1;
            let e = ComplexVector(c1.iter().zip(w.iter()).map(|(c, wi)| t * wi + c).collect());
            let max_residual = max_norm(&isotropy_residuals(config, &e)[..l]);
            match screen_isotropic(config, &e, l) {
                Screen::Accepted => {
                    return Ok(IsotropicPoint {
                        e,
                        attempt,
                        max_residual,
                    })
                }
                Screen::Degenerate(k) => degenerate = Some(k),
            }
        }
    }
    Err(HomotheticError::DegenerateConfiguration {
        center: degenerate.unwrap_or(0),
    })
}

/// Gauss-Newton on `F_k(e) = (e - c_k)^2`, `k <= l`. Minimum-norm steps when
/// underdetermined, least squares when `l > n`. Returns the final point and its
/// residual.
pub fn isotropic_newton(
    config: &Configuration,
    l: usize,
    start: ComplexVector,
) -> (ComplexVector, f64) {
    let n = config.dim();
    let residual_of = |e: &ComplexVector| -> Vec<Complex64> {
        isotropy_residuals(config, e)[..l].to_vec()
    };
    let norm2 = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut e = start;
    let mut f = residual_of(&e);
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let fnorm = max_norm(&f);
        if fnorm <= ISOTROPY_NEWTON_TOL * (1.0 + e.norm().powi(2)) {
            break;
        }
        let jac = CMatrix::from_fn(l, n, |k, j| (e[j] - config.centers()[k][j]) * 2.0);
        let jh = jac.adjoint();
        let step: Vec<Complex64> = if l <= n {
            let Some(y) = linalg::solve(&jac * &jh, &f) else { break };
            let y = nalgebra::DVector::from_vec(y);
            (&jh * y).iter().map(|z| -z).collect()
        } else {
            let rhs = &jh * nalgebra::DVector::from_column_slice(&f);
            let Some(x) = linalg::solve(&jh * &jac, rhs.as_slice()) else { break };
            x.iter().map(|z| -z).collect()
        };
        let current = norm2(&f);
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = ComplexVector(
                e.iter().zip(&step).map(|(x, d)| x + d * lambda).collect(),
            );
            let ft = residual_of(&trial);
            if norm2(&ft) < current {
                e = trial;
                f = ft;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let residual = max_norm(&f);
    (e, residual)
}

fn newton_isotropic_point(
    config: &Configuration,
    l: usize,
    seed: u64,
) -> Result<IsotropicPoint, HomotheticError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroid = config.centroid();
    let scale = config.length_scale();
    let mut best_residual = f64::INFINITY;
    let mut degenerate = None;
    for attempt in 1..=NEWTON_RETRIES {
        let start = ComplexVector(
            centroid
                .iter()
                .map(|c| random_complex(&mut rng, 2.0 * scale) + c)
                .collect(),
        );
        let (e, residual) = isotropic_newton(config, l, start);
        best_residual = best_residual.min(residual);
        if !residual.is_finite() || !isotropy_ok(config, &e, l, ISOTROPY_NEWTON_TOL) {
            continue;
        }
        match screen_isotropic(config, &e, l) {
            Screen::Accepted => {
                return Ok(IsotropicPoint {
                    e,
                    attempt,
                    max_residual: residual,
                })
            }
            Screen::Degenerate(k) => degenerate = Some(k),
        }
    }
    match degenerate {
        Some(center) => Err(HomotheticError::DegenerateConfiguration { center }),
        None => Err(HomotheticError::NoIsotropicPoint {
            attempts: NEWTON_RETRIES,
            best_residual,
        }),
    }
}

/// Validates a caller-supplied isotropic point.
pub fn check_isotropic_point(
    config: &Configuration,
    e: &ComplexVector,
    l: usize,
) -> Result<IsotropicPoint, HomotheticError> {
    check_index(config, l)?;
    if e.len() != config.dim() {
        return Err(HomotheticError::InvalidIsotropicPoint {
            l,
            reason: format!("expected {} components, got {}", config.dim(), e.len()),
        });
    }
    if !isotropy_ok(config, e, l, 1e-10) {
        return Err(HomotheticError::InvalidIsotropicPoint {
            l,
            reason: "isotropy residual exceeds 1e-10 (1 + |e|^2)".into(),
        });
    }
    if let Screen::Degenerate(k) = screen_isotropic(config, e, l) {
        return Err(HomotheticError::InvalidIsotropicPoint {
            l,
            reason: format!("center {k} violates the isotropy pattern"),
        });
    }
    Ok(IsotropicPoint {
        e: e.clone(),
        attempt: 0,
        max_residual: max_norm(&isotropy_residuals(config, e)[..l]),
    })
}

/// Jacobian of [`aux_rhs`] with respect to `q`.
fn aux_jacobian(
    config: &Configuration,
    dirs: &[ComplexVector],
    q: &ComplexVector,
) -> Result<CMatrix, ModelError> {
    let n = config.dim();
    let a = config.alpha_f64();
    let exponent = (a + 2.0) / 2.0;
    let mut jac = CMatrix::zeros(n, n);
    for (k, (u, m)) in dirs.iter().zip(config.masses()).enumerate() {
        let s = q.dot(u) * 2.0;
        if is_branch_point(s, q, u) {
            return Err(ModelError::BranchPointHit { center: k });
        }
        // d/dq of (2m/a) u s^(-E) is (2m/a)(-E) s^(-E-1) 2 u u^T.
        let w = Complex64::new(-2.0 * m / a * exponent * 2.0, 0.0) * principal_pow(s, -exponent - 1.0);
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] += w * u[i] * u[j];
            }
        }
    }
    Ok(jac)
}

/// A solution `(V, C)` of `C V = aux_rhs(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub v: ComplexVector,
    pub c: Complex64,
    pub residual: f64,
    pub attempt: usize,
}

/// `|C V - aux_rhs(V)| / |C V|`.
pub fn direction_residual(
    config: &Configuration,
    e: &ComplexVector,
    l: usize,
    v: &ComplexVector,
    c: Complex64,
) -> Result<f64, ModelError> {
    let cv = v.scale(c);
    let rhs = aux_rhs(config, e, l, v)?;
    Ok((&cv - &rhs).norm() / cv.norm())
}

struct DirectionNewton<'a> {
    config: &'a Configuration,
    e: &'a ComplexVector,
    l: usize,
    dirs: Vec<ComplexVector>,
}

impl DirectionNewton<'_> {
    fn residual(&self, v: &ComplexVector, c: Complex64, unit: bool) -> Option<(Vec<Complex64>, f64)> {
        let rhs = aux_rhs(self.config, self.e, self.l, v).ok()?;
        let mut f: Vec<Complex64> = v.iter().zip(rhs.iter()).map(|(x, r)| c * x - r).collect();
        if unit {
            f.push(v.dot(v) - ONE);
        }
        let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        norm.is_finite().then_some((f, norm))
    }

    /// Damped Newton from `(v, c)`; `unit` adds the unknown `C` and the constraint `V.V = 1`.
    fn run(&self, mut v: ComplexVector, mut c: Complex64, unit: bool) -> (ComplexVector, Complex64, f64) {
        let n = self.config.dim();
        let Some((mut f, mut fnorm)) = self.residual(&v, c, unit) else {
            return (v, c, f64::INFINITY);
        };
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let scale = (v.norm() * c.norm()).max(f64::MIN_POSITIVE);
            if fnorm <= DIRECTION_NEWTON_TOL * scale {
                break;
            }
            let Ok(d) = aux_jacobian(self.config, &self.dirs, &v) else { break };
            let size = if unit { n + 1 } else { n };
            let mut jac = CMatrix::zeros(size, size);
            for i in 0..n {
                for j in 0..n {
                    jac[(i, j)] = -d[(i, j)];
                }
                jac[(i, i)] += c;
            }
            if unit {
                for i in 0..n {
                    jac[(i, n)] = v[i];
                    jac[(n, i)] = v[i] * 2.0;
                }
            }
            let rhs: Vec<Complex64> = f.iter().map(|z| -z).collect();
            let Some(step) = linalg::solve(jac, &rhs) else { break };
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let trial_v = ComplexVector(
                    v.iter().zip(&step).map(|(x, dx)| x + dx * lambda).collect(),
                );
                let trial_c = if unit { c + step[n] * lambda } else { c };
                if let Some((ft, nt)) = self.residual(&trial_v, trial_c, unit) {
                    if nt < fnorm {
                        v = trial_v;
                        c = trial_c;
                        f = ft;
                        fnorm = nt;
                        improved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let rel = direction_residual(self.config, self.e, self.l, &v, c).unwrap_or(f64::INFINITY);
        (v, c, rel)
    }
}

/// Whether all active `e - c_k` are mutually orthogonal under the bilinear form,
/// which forces every candidate direction onto a branch point.
fn isotropic_span(dirs: &[ComplexVector]) -> bool {
    let scale = dirs.iter().map(|u| u.norm()).fold(0.0, f64::max).powi(2);
    dirs.iter()
        .all(|u| dirs.iter().all(|w| u.dot(w).norm() <= 1e-12 * scale))
}

/// Solves `C V = aux_rhs(V)` under the chosen gauge.
///
/// `CFixedToOne` fixes `C = 1`; `UnitBilinearNorm` imposes `V.V = 1` and reports
/// the induced `C`. Starts are drawn from a ChaCha8 stream seeded by `seed`; the
/// first converging start wins.
pub fn solve_direction(
    config: &Configuration,
    e: &ComplexVector,
    l: usize,
    gauge: Gauge,
    seed: u64,
) -> Result<Direction, HomotheticError> {
    check_index(config, l)?;
    let solver = DirectionNewton {
        config,
        e,
        l,
        dirs: active_directions(config, e, l),
    };
    let a = config.alpha_f64();
    let exponent = (a + 2.0) / 2.0;
    let u_scale = solver.dirs.iter().map(|u| u.norm()).fold(0.0, f64::max);
    let mass: f64 = config.masses()[..l].iter().sum();
    // |V|^(E+1) ~ (2m/alpha) |u|^(1-E) balances V = aux_rhs(V) when C = 1.
    let v_scale = (2.0 * mass / a * u_scale.powf(1.0 - exponent)).powf(1.0 / (1.0 + exponent));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_residual = f64::INFINITY;
    let mut found = None;
    for attempt in 1..=NEWTON_RETRIES {
        let start = ComplexVector(
            (0..config.dim())
                .map(|_| random_complex(&mut rng, v_scale))
                .collect(),
        );
        let (v, c, residual) = solver.run(start, ONE, false);
        best_residual = best_residual.min(residual);
        if residual <= 1e-12 {
            found = Some(Direction {
                v,
                c,
                residual,
                attempt,
            });
            break;
        }
    }
    let Some(fixed) = found else {
        return Err(HomotheticError::NoAdmissibleDirection {
            attempts: NEWTON_RETRIES,
            best_residual,
            isotropic_span: isotropic_span(&solver.dirs),
        });
    };
    match gauge {
        Gauge::CFixedToOne => Ok(fixed),
        Gauge::UnitBilinearNorm => {
            let vv = fixed.v.dot(&fixed.v);
            if vv.norm() <= 1e-10 * fixed.v.norm().powi(2) {
                return Err(HomotheticError::GaugeDegenerate);
            }
            let v0 = fixed.v.scale(principal_sqrt(vv).inv());
            let c0 = v0.dot(&aux_rhs(config, e, l, &v0)?);
            let (v, c, residual) = solver.run(v0, c0, true);
            if residual <= 1e-12 && (v.dot(&v) - ONE).norm() <= 1e-12 {
                Ok(Direction {
                    v,
                    c,
                    residual,
                    attempt: fixed.attempt,
                })
            } else {
                Err(HomotheticError::GaugeDegenerate)
            }
        }
    }
}

/// `A_ij = sum_{k<=l} (alpha+2) m_k u_i u_j / [2 V.u]^E`, `u = e - c_k`.
pub fn variational_matrix(
    config: &Configuration,
    e: &ComplexVector,
    l: usize,
    v: &ComplexVector,
    convention: ExponentConvention,
) -> Result<CMatrix, ModelError> {
    let n = config.dim();
    let a = config.alpha_f64();
    let exponent = convention.exponent(a);
    let mut out = CMatrix::zeros(n, n);
    for (k, (c, m)) in config.centers().iter().zip(config.masses()).enumerate().take(l) {
        let u = e.minus_real(c);
        let s = v.dot(&u) * 2.0;
        if is_branch_point(s, v, &u) {
            return Err(ModelError::BranchPointHit { center: k });
        }
        let w = Complex64::new((a + 2.0) * m, 0.0) / principal_pow(s, exponent);
        for i in 0..n {
            for j in i..n {
                let entry = w * u[i] * u[j];
                out[(i, j)] += entry;
                if i != j {
                    out[(j, i)] += entry;
                }
            }
        }
    }
    Ok(out)
}

/// Spectrum of `a`, sorted by `(Re, Im)`.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>, HomotheticError> {
    Ok(linalg::eigenvalues(a)?)
}

/// `max_g |(C / g^((alpha+2)/2)) V - aux_rhs(g V)| / |C V|` over the sampled `g`.
pub fn homothetic_residual(
    config: &Configuration,
    e: &ComplexVector,
    l: usize,
    v: &ComplexVector,
    c: Complex64,
    g_samples: &[f64],
) -> Result<f64, ModelError> {
    let exponent = (config.alpha_f64() + 2.0) / 2.0;
    let denom = v.scale(c).norm();
    let mut worst: f64 = 0.0;
    for &g in g_samples {
        let expected = v.scale(c / g.powf(exponent));
        let got = aux_rhs(config, e, l, &v.scale(Complex64::new(g, 0.0)))?;
        worst = worst.max((&expected - &got).norm() / denom);
    }
    Ok(worst)
}

/// Options for [`HomotheticData::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct HomotheticOptions {
    pub l: usize,
    pub gauge: Gauge,
    pub convention: ExponentConvention,
    pub seed: u64,
    /// Use this isotropic point instead of searching for one.
    pub e: Option<ComplexVector>,
}

impl HomotheticOptions {
    pub fn new(l: usize) -> Self {
        HomotheticOptions {
            l,
            gauge: Gauge::default(),
            convention: ExponentConvention::default(),
            seed: 0,
            e: None,
        }
    }
}

/// Residuals recorded when the data was validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `max_{k<=l} |(e - c_k)^2|`.
    pub isotropy: f64,
    /// `min_{k>l} |(e - c_k)^2|`, infinite when `l = N`.
    pub inactive_isotropy_min: f64,
    pub direction: f64,
    /// `max_k |det(A - a_k I)| / |A|^n`.
    pub eigen: f64,
}

/// Everything the criterion needs, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotheticData {
    pub e: ComplexVector,
    pub l: usize,
    pub v: ComplexVector,
    pub c: Complex64,
    pub a: CMatrix,
    pub eigenvalues: Vec<Complex64>,
    pub gauge: Gauge,
    pub convention: ExponentConvention,
    pub seed: u64,
    pub isotropic_attempt: usize,
    pub direction_attempt: usize,
    pub residuals: Residuals,
}

impl HomotheticData {
    pub fn build(config: &Configuration, options: &HomotheticOptions) -> Result<Self, HomotheticError> {
        let point = match &options.e {
            Some(e) => check_isotropic_point(config, e, options.l)?,
            None => find_isotropic_point(config, options.l, options.seed)?,
        };
        let direction = solve_direction(config, &point.e, options.l, options.gauge, options.seed)?;
        Self::assemble(
            config,
            point.e,
            options.l,
            direction.v,
            direction.c,
            options.gauge,
            options.convention,
            options.seed,
            (point.attempt, direction.attempt),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        config: &Configuration,
        e: ComplexVector,
        l: usize,
        v: ComplexVector,
        c: Complex64,
        gauge: Gauge,
        convention: ExponentConvention,
        seed: u64,
        attempts: (usize, usize),
    ) -> Result<Self, HomotheticError> {
        let a = variational_matrix(config, &e, l, &v, convention)?;
        let eigenvalues = eigenvalues(&a)?;
        let isotropy = isotropy_residuals(config, &e);
        let residuals = Residuals {
            isotropy: max_norm(&isotropy[..l]),
            inactive_isotropy_min: isotropy[l..]
                .iter()
                .map(|z| z.norm())
                .fold(f64::INFINITY, f64::min),
            direction: direction_residual(config, &e, l, &v, c)?,
            eigen: eigen_residual(&a, &eigenvalues),
        };
        let data = HomotheticData {
            e,
            l,
            v,
            c,
            a,
            eigenvalues,
            gauge,
            convention,
            seed,
            isotropic_attempt: attempts.0,
            direction_attempt: attempts.1,
            residuals,
        };
        data.validate()?;
        Ok(data)
    }

    /// Checks every invariant of the type; called by the constructors.
    pub fn validate(&self) -> Result<(), HomotheticError> {
        let fail = |msg: String| Err(HomotheticError::InvariantViolated(msg));
        let r = &self.residuals;
        let e_scale = 1.0 + self.e.dot(&self.e).norm().max(self.e.norm().powi(2));
        if !(r.isotropy <= 1e-10 * e_scale) {
            return fail(format!("isotropy residual {:e}", r.isotropy));
        }
        if !(r.inactive_isotropy_min >= 1e-6) {
            return fail(format!("inactive center residual {:e} < 1e-6", r.inactive_isotropy_min));
        }
        if !(r.direction <= 1e-10) {
            return fail(format!("direction residual {:e}", r.direction));
        }
        if self.a != self.a.transpose() {
            return fail("A is not symmetric".into());
        }
        if !(r.eigen <= 1e-8) {
            return fail(format!("eigenvalue residual {:e}", r.eigen));
        }
        Ok(())
    }

    /// The same solution with `A` and its spectrum under another exponent convention.
    pub fn with_convention(
        &self,
        config: &Configuration,
        convention: ExponentConvention,
    ) -> Result<Self, HomotheticError> {
        Self::assemble(
            config,
            self.e.clone(),
            self.l,
            self.v.clone(),
            self.c,
            self.gauge,
            convention,
            self.seed,
            (self.isotropic_attempt, self.direction_attempt),
        )
    }

    /// Gauge transform `(V, C) -> (s V, s^(-(alpha+4)/2) C)` for real `s > 0`.
    pub fn rescaled(&self, config: &Configuration, s: f64) -> Result<Self, HomotheticError> {
        assert!(s > 0.0, "gauge scale must be positive");
        let power = -(config.alpha_f64() + 4.0) / 2.0;
        Self::assemble(
            config,
            self.e.clone(),
            self.l,
            self.v.scale(Complex64::new(s, 0.0)),
            self.c * s.powf(power),
            self.gauge,
            self.convention,
            self.seed,
            (self.isotropic_attempt, self.direction_attempt),
        )
    }

    /// `a_k / C` in eigenvalue order.
    pub fn ratios(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|a| a / self.c).collect()
    }

    pub fn homothetic_residual(&self, config: &Configuration, g_samples: &[f64]) -> Result<f64, ModelError> {
        homothetic_residual(config, &self.e, self.l, &self.v, self.c, g_samples)
    }
}

/// `max_k |det(A - a_k I)| / max(|A|_F, tiny)^n`.
pub fn eigen_residual(a: &CMatrix, eigenvalues: &[Complex64]) -> f64 {
    let n = a.nrows();
    let scale = linalg::frobenius_norm(a).max(f64::MIN_POSITIVE).powi(n as i32);
    eigenvalues
        .iter()
        .map(|&lambda| {
            let shifted = a - CMatrix::identity(n, n) * lambda;
            linalg::determinant(&shifted).norm() / scale
        })
        .fold(0.0, f64::max)
}

/// Newton's best residual from one start, exposed for solver diagnostics.
pub fn direction_newton_from(
    config: &Configuration,
    e: &ComplexVector,
    l: usize,
    start: ComplexVector,
) -> f64 {
    let solver = DirectionNewton {
        config,
        e,
        l,
        dirs: active_directions(config, e, l),
    };
    solver.run(start, ONE, false).2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn config(dim: usize, centers: Vec<Vec<f64>>, masses: Vec<f64>, alpha: &str) -> Configuration {
        Configuration::new(dim, centers, masses, alpha.parse().unwrap()).unwrap()
    }

    fn two_center(alpha: &str) -> Configuration {
        config(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0], alpha)
    }

    fn three_center_plane() -> Configuration {
        config(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0, 1.0],
            "1",
        )
    }

    fn spatial(alpha: &str) -> Configuration {
        config(
            3,
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.2, 0.9, -0.4], vec![-0.7, 0.3, 0.5]],
            vec![1.0, 0.8, 1.2, 0.5],
            alpha,
        )
    }

    #[test]
    fn single_center_isotropic_point() {
        let cfg = config(2, vec![vec![0.0, 0.0]], vec![1.0], "1");
        let p = find_isotropic_point(&cfg, 1, 0).unwrap();
        assert_eq!(p.e, ComplexVector(vec![c(1.0, 0.0), c(0.0, 1.0)]));
    }

    #[test]
    fn two_center_isotropic_point_closed_form() {
        let cfg = two_center("1");
        let p = find_isotropic_point(&cfg, 2, 0).unwrap();
        assert!((p.e[0] - c(0.5, 0.0)).norm() < 1e-15);
        assert!((p.e[1] - c(0.0, 0.5)).norm() < 1e-15);
        assert!(isotropy_residuals(&cfg, &p.e).iter().all(|r| r.norm() < 1e-15));
        // Newton from a nearby start lands on the same point.
        let start = ComplexVector(vec![c(0.4, 0.05), c(0.1, 0.6)]);
        let (e, residual) = isotropic_newton(&cfg, 2, start);
        assert!(residual < 1e-13);
        assert!((&e - &p.e).norm() < 1e-12);
        // Odd seeds take the conjugate branch first.
        let q = find_isotropic_point(&cfg, 2, 1).unwrap();
        assert!((q.e[1] - c(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn overdetermined_isotropy_fails() {
        let cfg = three_center_plane();
        assert!(matches!(
            find_isotropic_point(&cfg, 3, 0),
            Err(HomotheticError::NoIsotropicPoint { .. })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..64 {
            let start = ComplexVector((0..2).map(|_| random_complex(&mut rng, 2.0)).collect());
            let (_, residual) = isotropic_newton(&cfg, 3, start);
            assert!(residual >= 1e-3, "residual {residual}");
        }
    }

    #[test]
    fn invalid_index() {
        let cfg = two_center("1");
        assert!(matches!(
            find_isotropic_point(&cfg, 0, 0),
            Err(HomotheticError::InvalidIndex { .. })
        ));
        assert!(matches!(
            find_isotropic_point(&cfg, 3, 0),
            Err(HomotheticError::InvalidIndex { .. })
        ));
    }

    #[test]
    fn spatial_isotropic_points_by_newton() {
        let cfg = spatial("1");
        for l in 1..=3 {
            let p = find_isotropic_point(&cfg, l, 3).unwrap();
            let res = isotropy_residuals(&cfg, &p.e);
            let scale = 1.0 + p.e.norm().powi(2);
            assert!(res[..l].iter().all(|r| r.norm() <= 1e-12 * scale), "l={l} {res:?}");
            assert!(res[l..].iter().all(|r| r.norm() >= 1e-6));
        }
    }

    #[test]
    fn single_center_has_no_admissible_direction() {
        let cfg = config(2, vec![vec![0.0, 0.0]], vec![1.0], "1");
        let e = find_isotropic_point(&cfg, 1, 0).unwrap().e;
        let err = solve_direction(&cfg, &e, 1, Gauge::CFixedToOne, 0).unwrap_err();
        assert!(matches!(
            err,
            HomotheticError::NoAdmissibleDirection {
                attempts: 64,
                isotropic_span: true,
                ..
            }
        ));
        // Independent seeds: Newton never gets close.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..64 {
            let start = ComplexVector((0..2).map(|_| random_complex(&mut rng, 3.0)).collect());
            assert!(direction_newton_from(&cfg, &e, 1, start) >= 1e-3);
        }
    }

    #[test]
    fn two_center_direction() {
        let cfg = two_center("1");
        let e = ComplexVector(vec![c(0.5, 0.0), c(0.0, 0.5)]);
        let d = solve_direction(&cfg, &e, 2, Gauge::CFixedToOne, 0).unwrap();
        assert_eq!(d.c, c(1.0, 0.0));
        // Substitute back by hand: m u / ((alpha/2) (2 V.u)^(3/2)) summed over both centers.
        let mut rhs = ComplexVector::zeros(2);
        for center in cfg.centers() {
            let u = e.minus_real(center);
            let s = d.v.dot(&u) * 2.0;
            let w = c(2.0, 0.0) / principal_pow(s, 1.5);
            rhs = &rhs + &u.scale(w);
        }
        assert!((&rhs - &d.v).norm() <= 1e-10 * d.v.norm());
    }

    #[test]
    fn unit_bilinear_norm_gauge() {
        let cfg = two_center("3/2");
        let e = find_isotropic_point(&cfg, 2, 0).unwrap().e;
        let d = solve_direction(&cfg, &e, 2, Gauge::UnitBilinearNorm, 0).unwrap();
        assert!((d.v.dot(&d.v) - ONE).norm() < 1e-12);
        assert!(direction_residual(&cfg, &e, 2, &d.v, d.c).unwrap() <= 1e-10);
    }

    #[test]
    fn gauge_covariance_of_the_direction_relation() {
        for alpha in ["1", "4/3", "1/2"] {
            let cfg = two_center(alpha);
            let data = HomotheticData::build(&cfg, &HomotheticOptions::new(2)).unwrap();
            let s = 2.0;
            let v = data.v.scale(c(s, 0.0));
            let cc = data.c * s.powf(-(cfg.alpha_f64() + 4.0) / 2.0);
            assert!(direction_residual(&cfg, &data.e, 2, &v, cc).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn ratio_scaling_under_each_convention() {
        let cfg = spatial("4/5");
        for convention in [ExponentConvention::PaperLiteral, ExponentConvention::HessianConsistent] {
            let mut opts = HomotheticOptions::new(2);
            opts.convention = convention;
            opts.seed = 5;
            let data = HomotheticData::build(&cfg, &opts).unwrap();
            let scaled = data.rescaled(&cfg, 2.0).unwrap();
            let factor = match convention {
                ExponentConvention::PaperLiteral => 2.0,
                ExponentConvention::HessianConsistent => 1.0,
            };
            for (r0, r1) in data.ratios().iter().zip(scaled.ratios()) {
                let expected = r0 * factor;
                assert!((r1 - expected).norm() <= 1e-9 * expected.norm().max(1e-300) || expected.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn variational_matrix_structure() {
        let cfg = spatial("3/2");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = find_isotropic_point(&cfg, 3, 0).unwrap().e;
        let v = ComplexVector((0..3).map(|_| random_complex(&mut rng, 1.0)).collect());
        for conv in [ExponentConvention::PaperLiteral, ExponentConvention::HessianConsistent] {
            let a = variational_matrix(&cfg, &e, 3, &v, conv).unwrap();
            assert_eq!(a, a.transpose());
        }
        // One active center: rank one, spectrum {trace, 0, 0}; isotropic u makes the trace vanish.
        let e1 = find_isotropic_point(&cfg, 1, 0).unwrap().e;
        let a = variational_matrix(&cfg, &e1, 1, &v, ExponentConvention::PaperLiteral).unwrap();
        let eig = eigenvalues(&a).unwrap();
        assert!(a.trace().norm() < 1e-12 * linalg::frobenius_norm(&a));
        assert!(eig.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn newtonian_matrix_has_the_three_halves_form() {
        let cfg = two_center("1");
        let e = ComplexVector(vec![c(0.5, 0.0), c(0.0, 0.5)]);
        let v = ComplexVector(vec![c(0.3, -0.2), c(1.1, 0.4)]);
        let a = variational_matrix(&cfg, &e, 2, &v, ExponentConvention::PaperLiteral).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut expected = c(0.0, 0.0);
                for (center, m) in cfg.centers().iter().zip(cfg.masses()) {
                    let u = e.minus_real(center);
                    expected += u[i] * u[j] * (3.0 * m) / principal_pow(v.dot(&u) * 2.0, 1.5);
                }
                assert!((a[(i, j)] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn homothetic_residual_identity_and_sensitivity() {
        let cfg = two_center("1");
        let data = HomotheticData::build(&cfg, &HomotheticOptions::new(2)).unwrap();
        let samples = [0.5, 1.0, 2.0, 5.0];
        assert!(data.homothetic_residual(&cfg, &samples).unwrap() <= 1e-10);
        let at_one = data.homothetic_residual(&cfg, &[1.0]).unwrap();
        assert!((at_one - data.residuals.direction).abs() < 1e-15);
        let perturbed = ComplexVector(vec![data.v[0], data.v[1] * 1.01]);
        let r = homothetic_residual(&cfg, &data.e, 2, &perturbed, data.c, &samples).unwrap();
        assert!(r >= 1e-4, "{r}");
    }

    #[test]
    fn supplied_isotropic_point_is_validated() {
        let cfg = two_center("1");
        let mut opts = HomotheticOptions::new(2);
        opts.e = Some(ComplexVector(vec![c(0.5, 0.0), c(0.0, 0.4)]));
        assert!(matches!(
            HomotheticData::build(&cfg, &opts),
            Err(HomotheticError::InvalidIsotropicPoint { .. })
        ));
        opts.e = Some(ComplexVector(vec![c(0.5, 0.0), c(0.0, -0.5)]));
        let data = HomotheticData::build(&cfg, &opts).unwrap();
        assert_eq!(data.isotropic_attempt, 0);
    }

    #[test]
    fn direction_is_an_eigenvector_of_the_hessian_matrix() {
        // A V = (alpha + 2)/2 * sum m u w^(-(alpha+2)/2) = alpha (alpha + 2)/4 * C V.
        for (cfg, l) in [(two_center("1"), 2), (two_center("4/3"), 2), (spatial("1/2"), 2), (spatial("8/5"), 3)] {
            let mut opts = HomotheticOptions::new(l);
            opts.convention = ExponentConvention::HessianConsistent;
            let data = HomotheticData::build(&cfg, &opts).unwrap();
            let alpha = cfg.alpha_f64();
            let expected = data.c * (alpha * (alpha + 2.0) / 4.0);
            let av: Vec<Complex64> = (&data.a * nalgebra::DVector::from_column_slice(&data.v.0)).iter().copied().collect();
            let residual = (&ComplexVector(av) - &data.v.scale(expected)).norm();
            assert!(residual <= 1e-10 * data.v.norm() * expected.norm(), "{residual}");
            let trivial = alpha * (alpha + 2.0) / 4.0;
            assert!(data.ratios().iter().any(|r| (r - trivial).norm() < 1e-9));
        }
    }

    #[test]
    fn euler_problem_ratios() {
        // Symmetric two-center problem: trace A vanishes (isotropic u), so the
        // spectrum is the trivial 3/4 and its negative.
        let cfg = two_center("1");
        let mut opts = HomotheticOptions::new(2);
        opts.convention = ExponentConvention::HessianConsistent;
        let data = HomotheticData::build(&cfg, &opts).unwrap();
        let mut r = data.ratios();
        linalg::sort_lexicographic(&mut r);
        assert!((r[0] + 0.75).norm() < 1e-12 && (r[1] - 0.75).norm() < 1e-12, "{r:?}");
    }

    #[test]
    fn builds_are_deterministic() {
        let cfg = spatial("2/3");
        let mut opts = HomotheticOptions::new(2);
        opts.seed = 17;
        let a = HomotheticData::build(&cfg, &opts).unwrap();
        let b = HomotheticData::build(&cfg, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.eigenvalues.len(), 3);
    }
}
