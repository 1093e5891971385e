//! Small dense complex linear algebra: the characteristic polynomial,
//! polynomial roots and the spectrum of a matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const MAX_ROOT_ITERATIONS: usize = 500;
pub const ROOT_STEP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootFindingFailed {
    pub iterations: usize,
    pub worst_residual: f64,
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `a x = b`; `None` when `a` is numerically singular.
pub fn solve(a: CMatrix, b: &[Complex64]) -> Option<Vec<Complex64>> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = a.lu().solve(&rhs)?;
    if x.iter().all(|z| z.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

/// Coefficients `c_0, ..., c_n` (ascending, `c_n = 1`) of `det(x I - A)` by the
/// Faddeev-LeVerrier recursion.
pub fn characteristic_polynomial(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[n] = ONE;
    let mut m = CMatrix::zeros(n, n);
    let identity = CMatrix::identity(n, n);
    for k in 1..=n {
        m = a * &m + &identity * coeffs[n - k + 1];
        let am = a * &m;
        coeffs[n - k] = -am.trace() / k as f64;
    }
    coeffs
}

/// Horner evaluation of an ascending-coefficient polynomial and its derivative.
pub fn eval_poly(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = ZERO;
    let mut dp = ZERO;
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

fn poly_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * r + c.norm())
}

/// All roots of a monic polynomial (ascending coefficients) by simultaneous
/// Weierstrass / Durand-Kerner iteration, then a Newton polish of each root.
pub fn durand_kerner(coeffs: &[Complex64]) -> Result<Vec<Complex64>, RootFindingFailed> {
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    if degree == 1 {
        return Ok(vec![-monic[0]]);
    }
    // Cauchy bound on root moduli.
    let radius = 1.0 + monic[..degree].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|j| seed.powu(j as u32 + 1) * (radius / seed.norm().powi(j as i32 + 1)) * 0.5)
        .collect();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ROOT_ITERATIONS {
        iterations += 1;
        let scale = roots.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let mut max_step: f64 = 0.0;
        for j in 0..degree {
            let zj = roots[j];
            let (p, _) = eval_poly(&monic, zj);
            let mut denom = ONE;
            for (i, zi) in roots.iter().enumerate() {
                if i != j {
                    denom *= zj - zi;
                }
            }
            if denom == ZERO {
                // Coincident iterates: nudge apart.
                roots[j] = zj + Complex64::new(scale * 1e-8, scale * 1e-8);
                max_step = f64::INFINITY;
                continue;
            }
            let step = p / denom;
            roots[j] = zj - step;
            max_step = max_step.max(step.norm());
        }
        if roots.iter().any(|z| !z.is_finite()) {
            break;
        }
        if max_step <= ROOT_STEP_TOL * scale {
            converged = true;
            break;
        }
    }
    for z in roots.iter_mut() {
        for _ in 0..5 {
            let (p, dp) = eval_poly(&monic, *z);
            if dp == ZERO {
                break;
            }
            let candidate = *z - p / dp;
            if eval_poly(&monic, candidate).0.norm() < p.norm() {
                *z = candidate;
            } else {
                break;
            }
        }
    }
    let worst_residual = roots
        .iter()
        .map(|&z| eval_poly(&monic, z).0.norm() / poly_scale(&monic, z))
        .fold(0.0, f64::max);
    // Multiple roots converge only linearly; accept them when the backward
    // error is at roundoff level even if the step criterion was not met.
    if roots.iter().all(|z| z.is_finite()) && (converged || worst_residual <= 1e-10) {
        Ok(roots)
    } else {
        Err(RootFindingFailed {
            iterations,
            worst_residual,
        })
    }
}

/// Eigenvalues of a square complex matrix, sorted by `(Re, Im)`.
///
/// Coefficients of the characteristic polynomial below the roundoff floor
/// `64 n eps |A|_F^k` are set to zero and the resulting zero roots are split off
/// exactly, so rank-deficient matrices report exact zero eigenvalues.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>, RootFindingFailed> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let norm = frobenius_norm(a);
    let mut coeffs = characteristic_polynomial(a);
    let floor = 64.0 * n as f64 * f64::EPSILON;
    for k in 1..=n {
        if coeffs[n - k].norm() <= floor * norm.powi(k as i32) {
            coeffs[n - k] = ZERO;
        }
    }
    let zero_roots = coeffs.iter().take_while(|c| **c == ZERO).count();
    let mut roots = vec![ZERO; zero_roots];
    roots.extend(durand_kerner(&coeffs[zero_roots..])?);
    sort_lexicographic(&mut roots);
    Ok(roots)
}

pub fn sort_lexicographic(values: &mut [Complex64]) {
    for z in values.iter_mut() {
        // -0.0 and 0.0 must sort identically.
        *z = Complex64::new(z.re + 0.0, z.im + 0.0);
    }
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Determinant via LU with partial pivoting.
pub fn determinant(a: &CMatrix) -> Complex64 {
    a.clone().lu().determinant()
}
