//! Configurations of fixed centers and the two vector fields built on them:
//! the physical flow of `H = |p|^2/2 - sum m_i / |q - c_i|^alpha` and the
//! complexified auxiliary flow attached to an isotropic point `e`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("alpha must lie strictly between 0 and 2, got {0}")]
    AlphaOutOfRange(Rational),
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("at least one center is required")]
    NoCenters,
    #[error("{field}: expected {expected} components, got {got}")]
    DimensionMismatch {
        field: String,
        expected: usize,
        got: usize,
    },
    #[error("masses: mass {index} must be positive and finite, got {value}")]
    NonPositiveMass { index: usize, value: f64 },
    #[error("centers: centers {first} and {second} coincide")]
    CoincidentCenters { first: usize, second: usize },
    #[error("{field}: {message}")]
    InvalidField { field: String, message: String },
    #[error("position coincides with center {center}")]
    SingularPoint { center: usize },
    #[error("2 q.(e - c_{center}) vanishes: branch point of the auxiliary field")]
    BranchPointHit { center: usize },
}

/// Fixed centers `c_i` in real n-space with masses `m_i` and singularity degree `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    centers: Vec<Vec<f64>>,
    masses: Vec<f64>,
    alpha: Rational,
    alpha_f64: f64,
}

impl Configuration {
    pub fn new(
        dim: usize,
        centers: Vec<Vec<f64>>,
        masses: Vec<f64>,
        alpha: Rational,
    ) -> Result<Self, ModelError> {
        if !(alpha > 0 && alpha < 2) {
            return Err(ModelError::AlphaOutOfRange(alpha));
        }
        if dim < 2 {
            return Err(ModelError::DimensionTooSmall(dim));
        }
        if centers.is_empty() {
            return Err(ModelError::NoCenters);
        }
        if masses.len() != centers.len() {
            return Err(ModelError::DimensionMismatch {
                field: "masses".into(),
                expected: centers.len(),
                got: masses.len(),
            });
        }
        for (i, c) in centers.iter().enumerate() {
            if c.len() != dim {
                return Err(ModelError::DimensionMismatch {
                    field: format!("centers[{i}]"),
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::InvalidField {
                    field: format!("centers[{i}]"),
                    message: "components must be finite".into(),
                });
            }
        }
        for (index, &value) in masses.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::NonPositiveMass { index, value });
            }
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if centers[i] == centers[j] {
                    return Err(ModelError::CoincidentCenters { first: i, second: j });
                }
            }
        }
        let alpha_f64 = alpha.to_f64();
        Ok(Configuration {
            dim,
            centers,
            masses,
            alpha,
            alpha_f64,
        })
    }

    /// Builds a configuration from decimal text. Coincident centers are detected
    /// by exact comparison of the parsed decimals, not of their float images.
    pub fn from_text<S: AsRef<str>>(
        dim: usize,
        centers: &[Vec<S>],
        masses: &[S],
        alpha: &str,
    ) -> Result<Self, ModelError> {
        let alpha: Rational = alpha.parse().map_err(|e| ModelError::InvalidField {
            field: "alpha".into(),
            message: format!("{e}"),
        })?;
        let mut exact_centers = Vec::with_capacity(centers.len());
        for (i, c) in centers.iter().enumerate() {
            let parsed = c
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    Rational::parse_decimal(x.as_ref()).map_err(|e| ModelError::InvalidField {
                        field: format!("centers[{i}][{j}]"),
                        message: format!("{e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            exact_centers.push(parsed);
        }
        for i in 0..exact_centers.len() {
            for j in i + 1..exact_centers.len() {
                if exact_centers[i] == exact_centers[j] {
                    return Err(ModelError::CoincidentCenters { first: i, second: j });
                }
            }
        }
        let masses = masses
            .iter()
            .enumerate()
            .map(|(i, m)| {
                Rational::parse_decimal(m.as_ref())
                    .map(|r| r.to_f64())
                    .map_err(|e| ModelError::InvalidField {
                        field: format!("masses[{i}]"),
                        message: format!("{e}"),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let centers = exact_centers
            .iter()
            .map(|c| c.iter().map(Rational::to_f64).collect())
            .collect();
        Configuration::new(dim, centers, masses, alpha)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha_f64
    }

    /// Same configuration with every center shifted by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let centers = self
            .centers
            .iter()
            .map(|c| c.iter().zip(shift).map(|(x, s)| x + s).collect())
            .collect();
        Configuration {
            centers,
            ..self.clone()
        }
    }

    /// Largest distance of a center from the centroid, at least 1.
    pub fn length_scale(&self) -> f64 {
        let centroid = self.centroid();
        self.centers
            .iter()
            .map(|c| dist(c, &centroid))
            .fold(1.0, f64::max)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.centers.len() as f64;
        (0..self.dim)
            .map(|j| self.centers.iter().map(|c| c[j]).sum::<f64>() / n)
            .collect()
    }

    fn check_off_centers(&self, q: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.centers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let r = dist(q, c);
                let scale = 1.0 + c.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r <= f64::EPSILON * scale {
                    Err(ModelError::SingularPoint { center: i })
                } else {
                    Ok(r)
                }
            })
            .collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Position and momentum of the test particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "position and momentum dimensions differ");
        PhaseState { q, p }
    }
}

/// `-sum m_i |q - c_i|^(-alpha)`.
pub fn potential(config: &Configuration, q: &[f64]) -> Result<f64, ModelError> {
    let a = config.alpha_f64();
    let radii = config.check_off_centers(q)?;
    Ok(-radii
        .iter()
        .zip(config.masses())
        .map(|(r, m)| m * r.powf(-a))
        .sum::<f64>())
}

/// `-grad potential = -sum alpha m_i (q - c_i) |q - c_i|^(-alpha-2)`.
pub fn force(config: &Configuration, q: &[f64]) -> Result<Vec<f64>, ModelError> {
    let a = config.alpha_f64();
    let radii = config.check_off_centers(q)?;
    let mut out = vec![0.0; q.len()];
    for ((c, m), r) in config.centers().iter().zip(config.masses()).zip(&radii) {
        let w = a * m * r.powf(-a - 2.0);
        for (o, (qj, cj)) in out.iter_mut().zip(q.iter().zip(c)) {
            *o -= w * (qj - cj);
        }
    }
    Ok(out)
}

pub fn hamiltonian(config: &Configuration, state: &PhaseState) -> Result<f64, ModelError> {
    let kinetic = 0.5 * state.p.iter().map(|x| x * x).sum::<f64>();
    Ok(kinetic + potential(config, &state.q)?)
}

/// A vector in complex n-space with the bilinear (unconjugated) dot product.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexVector(pub Vec<Complex64>);

impl ComplexVector {
    pub fn zeros(n: usize) -> Self {
        ComplexVector(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_real(x: &[f64]) -> Self {
        ComplexVector(x.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Complex64> {
        self.0.iter()
    }

    /// `sum u_i v_i`, no conjugation.
    pub fn dot(&self, other: &ComplexVector) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Hermitian norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: Complex64) -> ComplexVector {
        ComplexVector(self.0.iter().map(|z| z * s).collect())
    }

    pub fn minus_real(&self, c: &[f64]) -> ComplexVector {
        ComplexVector(self.0.iter().zip(c).map(|(z, x)| z - x).collect())
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl Add for &ComplexVector {
    type Output = ComplexVector;
    fn add(self, rhs: &ComplexVector) -> ComplexVector {
        ComplexVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &ComplexVector {
    type Output = ComplexVector;
    fn sub(self, rhs: &ComplexVector) -> ComplexVector {
        ComplexVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<Complex64> for &ComplexVector {
    type Output = ComplexVector;
    fn mul(self, s: Complex64) -> ComplexVector {
        self.scale(s)
    }
}

impl fmt::Display for ComplexVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, z) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{z}")?;
        }
        write!(f, ")")
    }
}

/// Principal argument in `(-pi, pi]`; `atan2` alone returns `-pi` for `-x - 0i`.
pub fn principal_arg(z: Complex64) -> f64 {
    let theta = z.im.atan2(z.re);
    if theta <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        theta
    }
}

/// `z^p` on the principal branch, for real `p`.
pub fn principal_pow(z: Complex64, p: f64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return if p == 0.0 { Complex64::new(1.0, 0.0) } else { z };
    }
    Complex64::from_polar(z.norm().powf(p), p * principal_arg(z))
}

pub fn principal_sqrt(z: Complex64) -> Complex64 {
    principal_pow(z, 0.5)
}

/// `(e - c_k).(e - c_k)` for every center.
pub fn isotropy_residuals(config: &Configuration, e: &ComplexVector) -> Vec<Complex64> {
    config
        .centers()
        .iter()
        .map(|c| {
            let u = e.minus_real(c);
            u.dot(&u)
        })
        .collect()
}

/// Right-hand side of the auxiliary collision system
/// `p' = sum_{i<l} m_i (e - c_i) / ((alpha/2) [2 q.(e - c_i)]^((alpha+2)/2))`,
/// summed over the first `l` (isotropic) centers.
pub fn aux_rhs(
    config: &Configuration,
    e: &ComplexVector,
    l: usize,
    q: &ComplexVector,
) -> Result<ComplexVector, ModelError> {
    let a = config.alpha_f64();
    let exponent = (a + 2.0) / 2.0;
    let mut out = ComplexVector::zeros(config.dim());
    for (k, (c, m)) in config.centers().iter().zip(config.masses()).enumerate().take(l) {
        let u = e.minus_real(c);
        let s = q.dot(&u) * 2.0;
        if is_branch_point(s, q, &u) {
            return Err(ModelError::BranchPointHit { center: k });
        }
        let w = Complex64::new(m / (a / 2.0), 0.0) / principal_pow(s, exponent);
        for (o, ui) in out.0.iter_mut().zip(u.iter()) {
            *o += w * ui;
        }
    }
    Ok(out)
}

pub(crate) fn is_branch_point(s: Complex64, q: &ComplexVector, u: &ComplexVector) -> bool {
    !(s.norm() > 1e-14 * q.norm() * u.norm()) || !s.is_finite()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(alpha: &str) -> Configuration {
        Configuration::new(2, vec![vec![0.0, 0.0]], vec![1.0], alpha.parse().unwrap()).unwrap()
    }

    fn three_centers(alpha: &str) -> Configuration {
        Configuration::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.3, 0.8]],
            vec![1.0, 0.7, 1.3],
            alpha.parse().unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_configurations() {
        let one = || vec![vec![0.0, 0.0]];
        assert!(matches!(
            Configuration::new(2, one(), vec![1.0], "2".parse().unwrap()),
            Err(ModelError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            Configuration::new(2, one(), vec![1.0], "0".parse().unwrap()),
            Err(ModelError::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            Configuration::new(1, vec![vec![0.0]], vec![1.0], "1".parse().unwrap()),
            Err(ModelError::DimensionTooSmall(1))
        ));
        assert!(matches!(
            Configuration::new(2, vec![], vec![], "1".parse().unwrap()),
            Err(ModelError::NoCenters)
        ));
        assert!(matches!(
            Configuration::new(2, one(), vec![-1.0], "1".parse().unwrap()),
            Err(ModelError::NonPositiveMass { index: 0, .. })
        ));
        assert!(matches!(
            Configuration::new(2, vec![vec![1.0, 2.0], vec![1.0, 2.0]], vec![1.0, 1.0], "1".parse().unwrap()),
            Err(ModelError::CoincidentCenters { first: 0, second: 1 })
        ));
    }

    #[test]
    fn coincident_text_centers_compare_exactly() {
        let err = Configuration::from_text(2, &[vec!["0.5", "0"], vec!["1/2", "0.0"]], &["1", "1"], "1");
        assert!(matches!(err, Err(ModelError::CoincidentCenters { .. })));
        let ok = Configuration::from_text(2, &[vec!["0.5", "0"], vec!["0.25", "1e-1"]], &["1", "2.5"], "3/2");
        assert_eq!(ok.unwrap().centers()[1], vec![0.25, 0.1]);
        let bad = Configuration::from_text(2, &[vec!["x", "0"]], &["1"], "1");
        assert!(matches!(bad, Err(ModelError::InvalidField { ref field, .. }) if field == "centers[0][0]"));
        let bad_alpha = Configuration::from_text(2, &[vec!["0", "0"]], &["1"], "1/0");
        assert!(matches!(bad_alpha, Err(ModelError::InvalidField { ref field, .. }) if field == "alpha"));
    }

    #[test]
    fn potential_examples() {
        assert_relative_eq!(potential(&single("1"), &[2.0, 0.0]).unwrap(), -0.5);
        assert_relative_eq!(potential(&single("1/2"), &[4.0, 0.0]).unwrap(), -0.5);
        assert!(matches!(
            potential(&single("1"), &[0.0, 0.0]),
            Err(ModelError::SingularPoint { center: 0 })
        ));
    }

    #[test]
    fn force_examples() {
        let f = force(&single("1"), &[2.0, 0.0]).unwrap();
        assert_relative_eq!(f[0], -0.25);
        assert_relative_eq!(f[1], 0.0);
        let f = force(&single("1"), &[0.0, 3.0]).unwrap();
        assert_relative_eq!(f[0], 0.0);
        assert_relative_eq!(f[1], -1.0 / 9.0);
        assert!(force(&single("1"), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let cfg = single("1");
        let h = hamiltonian(&cfg, &PhaseState::new(vec![1.0, 0.0], vec![0.0, 1.0])).unwrap();
        assert_relative_eq!(h, -0.5);
        let h = hamiltonian(&cfg, &PhaseState::new(vec![2.0, 0.0], vec![0.0, 0.0])).unwrap();
        assert_relative_eq!(h, -0.5);
    }

    fn random_off_center_point(rng: &mut ChaCha8Rng, cfg: &Configuration) -> Vec<f64> {
        loop {
            let q: Vec<f64> = (0..cfg.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            if cfg.centers().iter().all(|c| dist(&q, c) > 0.2) {
                return q;
            }
        }
    }

    #[test]
    fn force_is_minus_gradient_of_potential() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for alpha in ["1", "1/2", "3/2", "4/5"] {
            let cfg = three_centers(alpha);
            for _ in 0..100 {
                let q = random_off_center_point(&mut rng, &cfg);
                let f = force(&cfg, &q).unwrap();
                let h = 1e-5;
                let scale = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
                for j in 0..2 {
                    let mut plus = q.clone();
                    let mut minus = q.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    let fd = -(potential(&cfg, &plus).unwrap() - potential(&cfg, &minus).unwrap())
                        / (2.0 * h);
                    assert!(
                        (fd - f[j]).abs() <= 1e-6 * scale.max(1.0),
                        "alpha={alpha} q={q:?} fd={fd} f={}",
                        f[j]
                    );
                }
            }
        }
    }

    #[test]
    fn potential_is_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = three_centers("3/2");
        for _ in 0..50 {
            let q = random_off_center_point(&mut rng, &cfg);
            let shift = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let moved = cfg.translated(&shift);
            let q2: Vec<f64> = q.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let p = vec![0.3, -0.2];
            let h1 = hamiltonian(&cfg, &PhaseState::new(q, p.clone())).unwrap();
            let h2 = hamiltonian(&moved, &PhaseState::new(q2, p)).unwrap();
            assert!((h1 - h2).abs() <= 1e-12 * h1.abs().max(1.0));
        }
    }

    #[test]
    fn isotropy_residual_examples() {
        let e = ComplexVector(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(isotropy_residuals(&single("1"), &e), vec![c(0.0, 0.0)]);
        let two = Configuration::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0], Rational::one())
            .unwrap();
        assert_eq!(isotropy_residuals(&two, &e), vec![c(0.0, 0.0), c(-1.0, 0.0)]);
        let real = ComplexVector::from_real(&[3.0, 1.0]);
        assert!(isotropy_residuals(&two, &real).iter().all(|r| r.re > 0.0 && r.im == 0.0));
    }

    #[test]
    fn aux_rhs_direct_evaluation() {
        let e = ComplexVector(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let q = ComplexVector(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let got = aux_rhs(&single("1"), &e, 1, &q).unwrap();
        let k = 2f64.powf(-0.5);
        assert_relative_eq!(got[0].re, k, epsilon = 1e-15);
        assert_relative_eq!(got[0].im, 0.0, epsilon = 1e-15);
        assert_relative_eq!(got[1].re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(got[1].im, k, epsilon = 1e-15);
    }

    #[test]
    fn aux_rhs_branch_point() {
        let e = ComplexVector(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        // q = e gives q.e = 1 + i^2 = 0
        assert!(matches!(
            aux_rhs(&single("1"), &e, 1, &e),
            Err(ModelError::BranchPointHit { center: 0 })
        ));
    }

    #[test]
    fn aux_rhs_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = three_centers("4/3");
        let e = ComplexVector(vec![c(0.5, 0.0), c(0.0, 0.5)]);
        let degree = -(cfg.alpha_f64() + 2.0) / 2.0;
        for _ in 0..50 {
            let q = ComplexVector(
                (0..2)
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect(),
            );
            let s: f64 = rng.random_range(0.1..10.0);
            let base = aux_rhs(&cfg, &e, 2, &q).unwrap();
            let scaled = aux_rhs(&cfg, &e, 2, &q.scale(c(s, 0.0))).unwrap();
            let expected = base.scale(c(s.powf(degree), 0.0));
            assert!((&scaled - &expected).norm() <= 1e-12 * expected.norm());
        }
    }

    #[test]
    fn principal_branch_on_negative_axis() {
        let minus_one_neg_zero = c(-1.0, -0.0);
        assert_relative_eq!(principal_arg(minus_one_neg_zero), std::f64::consts::PI);
        let r = principal_sqrt(minus_one_neg_zero);
        assert_relative_eq!(r.im, 1.0);
        let r = principal_pow(c(4.0, 0.0), 1.5);
        assert_relative_eq!(r.re, 8.0);
    }
}
