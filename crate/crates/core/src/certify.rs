//! Exponent differences and the seven-row criterion table.
//!
//! For ratio `r = a_k / C` the exponent differences are `lambda = -alpha - 1`,
//! `mu = 1 - alpha/2` and `nu = +-sqrt((3 alpha/2 + 1)^2 - 4 alpha r)`. Only seven
//! values of `alpha` admit a criterion; every other rational `alpha` in `(0, 2)` is
//! non-integrable outright. The criteria are necessary conditions, so a passing
//! check is reported as `Inconclusive`, never as integrable.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::exact::{ArithmeticSet, Progression, Rational};
use crate::homothetic::{
    ExponentConvention, Gauge, HomotheticData, HomotheticError, HomotheticOptions,
};
use crate::model::{principal_sqrt, ComplexVector, Configuration};

/// Default tolerance for numeric set membership.
pub const DEFAULT_TOL: f64 = 1e-9;
/// A float ratio within this distance of a small-denominator rational is checked exactly.
pub const RECONSTRUCTION_TOL: f64 = 1e-12;
pub const RECONSTRUCTION_MAX_DENOM: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("alpha = {0} has no row in the criterion table")]
    AlphaNotInTable(Rational),
    #[error("certification aborted: {0}")]
    Aborted(#[from] HomotheticError),
}

/// A ratio `a_k / C`, exact when known to be rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Ratio {
    Exact(Rational),
    Numeric(Complex64),
}

impl Ratio {
    pub fn to_complex(&self) -> Complex64 {
        match self {
            Ratio::Exact(r) => Complex64::new(r.to_f64(), 0.0),
            Ratio::Numeric(z) => *z,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Exact(r) => write!(f, "{r}"),
            Ratio::Numeric(z) => write!(f, "{z}"),
        }
    }
}

/// `(lambda, mu, nu)` for one ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentData {
    pub lambda: Rational,
    pub mu: Rational,
    pub ratio: Ratio,
    /// `(3 alpha/2 + 1)^2 - 4 alpha r`.
    pub radicand: Ratio,
    /// Principal square root of the radicand; exact when the radicand is a rational square.
    pub nu: Ratio,
}

pub fn exponent_differences(alpha: &Rational, ratio: &Ratio) -> ExponentData {
    let one = Rational::one();
    let lambda = -(alpha + &one);
    let mu = &one - &(alpha / &Rational::from_integer(2));
    let base = (&(alpha * &Rational::new(3, 2)) + &one).square();
    let four_alpha = alpha * &Rational::from_integer(4);
    let (radicand, nu) = match ratio {
        Ratio::Exact(r) => {
            let radicand = &base - &(&four_alpha * r);
            let nu = match radicand.sqrt() {
                Some(root) => Ratio::Exact(root),
                None => Ratio::Numeric(principal_sqrt(Complex64::new(radicand.to_f64(), 0.0))),
            };
            (Ratio::Exact(radicand), nu)
        }
        Ratio::Numeric(z) => {
            let radicand = Complex64::new(base.to_f64(), 0.0) - z * four_alpha.to_f64();
            (Ratio::Numeric(radicand), Ratio::Numeric(principal_sqrt(radicand)))
        }
    };
    ExponentData {
        lambda,
        mu,
        ratio: ratio.clone(),
        radicand,
        nu,
    }
}

/// One row: `prefactor * sqrt(constant - coefficient * a_k/C)` must lie in `set`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionRow {
    pub index: usize,
    pub alpha: Rational,
    pub prefactor: Rational,
    pub radical_constant: Rational,
    pub radical_coefficient: Rational,
    /// The row radical equals `nu_scale * nu` as an identity in the ratio.
    pub nu_scale: Rational,
    pub set: ArithmeticSet,
}

fn q(text: &str) -> Rational {
    text.parse().expect("static rational")
}

fn progression(offset: &str, period: &str) -> Progression {
    Progression::new(q(offset), q(period))
}

/// The seven rows in table order.
pub fn criterion_table() -> Vec<CriterionRow> {
    let row = |index, alpha, prefactor, constant, coefficient, nu_scale, set: Vec<Progression>| {
        CriterionRow {
            index,
            alpha: q(alpha),
            prefactor: q(prefactor),
            radical_constant: q(constant),
            radical_coefficient: q(coefficient),
            nu_scale: q(nu_scale),
            set: ArithmeticSet::new(set),
        }
    };
    vec![
        row(1, "1", "1", "25/4", "4", "1", vec![progression("1/2", "1")]),
        row(
            2,
            "4/3",
            "1",
            "9",
            "16/3",
            "1",
            vec![progression("1", "2"), progression("4/3", "2"), progression("6/5", "2")],
        ),
        row(
            3,
            "2/3",
            "1",
            "1",
            "2/3",
            "1/2",
            vec![progression("0", "1/2"), progression("1/3", "2"), progression("1/5", "2")],
        ),
        row(4, "1/2", "1", "49/16", "2", "1", vec![progression("1/2", "1")]),
        row(
            5,
            "3/2",
            "1",
            "169/16",
            "6",
            "1",
            vec![progression("1/3", "1"), progression("1/2", "1")],
        ),
        row(6, "4/5", "1/5", "121", "80", "1", vec![progression("1/3", "2")]),
        row(7, "8/5", "1", "289/25", "32/5", "1", vec![progression("3/2", "2")]),
    ]
}

pub fn table_row(alpha: &Rational) -> Option<CriterionRow> {
    criterion_table().into_iter().find(|row| &row.alpha == alpha)
}

impl CriterionRow {
    /// `constant - coefficient * ratio`.
    pub fn radicand(&self, ratio: &Rational) -> Rational {
        &self.radical_constant - &(&self.radical_coefficient * ratio)
    }

    /// Display form of the radical, e.g. `√(9 − 16a_k/(3C))` or `(1/5)√(121 − 80a_k/C)`.
    pub fn radical_text(&self) -> String {
        let coefficient = &self.radical_coefficient;
        let term = if coefficient.is_integer() {
            format!("{}a_k/C", coefficient.numer())
        } else {
            format!("{}a_k/({}C)", coefficient.numer(), coefficient.denom())
        };
        let prefix = if self.prefactor == Rational::one() {
            String::new()
        } else {
            format!("({})", self.prefactor)
        };
        format!("{prefix}√({} − {term})", self.radical_constant)
    }
}

impl fmt::Display for CriterionRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\tα = {}\t{} ∈ {}",
            self.index,
            self.alpha,
            self.radical_text(),
            self.set
        )
    }
}

/// How a single criterion check came out.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckDetail {
    /// The radicand is a rational square; `matched` is the signed root found in the set.
    ExactRoot {
        radicand: Rational,
        root: Rational,
        matched: Option<Rational>,
    },
    /// Negative or not a perfect square: the root cannot lie in a rational progression.
    IrrationalRoot { radicand: Rational },
    Numeric {
        radicand: Complex64,
        root: Complex64,
        matched: Option<Complex64>,
        /// Distance of the closer signed root to the set (`|Im|` included).
        distance: f64,
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub row: usize,
    pub satisfied: bool,
    pub detail: CheckDetail,
    pub set: ArithmeticSet,
    pub nu: Ratio,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.detail {
            CheckDetail::ExactRoot { matched: Some(m), .. } => {
                write!(f, "satisfied ({m} ∈ {})", self.set)
            }
            CheckDetail::ExactRoot { root, .. } => {
                write!(f, "violated (ν={}; ±{root} ∉ {})", self.nu, self.set)
            }
            CheckDetail::IrrationalRoot { radicand } => {
                if radicand.is_negative() {
                    write!(f, "violated (radicand {radicand} is negative; ν is imaginary)")
                } else {
                    write!(f, "violated (radicand {radicand} is not a rational square; ν is irrational)")
                }
            }
            CheckDetail::Numeric {
                matched: Some(m),
                tol,
                ..
            } => write!(f, "satisfied ({} ∈ {} within {tol:e})", fmt_complex(*m), self.set),
            CheckDetail::Numeric {
                root, distance, tol, ..
            } => write!(
                f,
                "violated (±{} ∉ {}: distance {distance:.3e} > {tol:e})",
                fmt_complex(*root),
                self.set
            ),
        }
    }
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{z}")
    }
}

fn row_or_error(alpha: &Rational) -> Result<CriterionRow, CertifyError> {
    table_row(alpha).ok_or_else(|| CertifyError::AlphaNotInTable(alpha.clone()))
}

/// Exact check: the row radicand must be a non-negative rational square whose
/// root, of either sign, lies in the row set.
pub fn check_criterion_exact(alpha: &Rational, ratio: &Rational) -> Result<CheckOutcome, CertifyError> {
    let row = row_or_error(alpha)?;
    let nu = exponent_differences(alpha, &Ratio::Exact(ratio.clone())).nu;
    let radicand = row.radicand(ratio);
    let (satisfied, detail) = match radicand.sqrt() {
        Some(sqrt) => {
            let root = &row.prefactor * &sqrt;
            let matched = [root.clone(), -&root]
                .into_iter()
                .find(|x| row.set.contains_exact(x));
            (
                matched.is_some(),
                CheckDetail::ExactRoot {
                    radicand,
                    root,
                    matched,
                },
            )
        }
        None => (false, CheckDetail::IrrationalRoot { radicand }),
    };
    Ok(CheckOutcome {
        row: row.index,
        satisfied,
        detail,
        set: row.set,
        nu,
    })
}

/// Numeric check on the principal branch: satisfied iff `+root` or `-root` is
/// within `tol` of the row set.
pub fn check_criterion_numeric(
    alpha: &Rational,
    ratio: Complex64,
    tol: f64,
) -> Result<CheckOutcome, CertifyError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let row = row_or_error(alpha)?;
    let nu = exponent_differences(alpha, &Ratio::Numeric(ratio)).nu;
    let radicand = Complex64::new(row.radical_constant.to_f64(), 0.0)
        - ratio * row.radical_coefficient.to_f64();
    let root = principal_sqrt(radicand) * row.prefactor.to_f64();
    let matched = [root, -root]
        .into_iter()
        .find(|z| row.set.contains_numeric(*z, tol));
    let distance = [root, -root]
        .iter()
        .map(|z| row.set.distance(z.re).max(z.im.abs()))
        .fold(f64::INFINITY, f64::min);
    Ok(CheckOutcome {
        row: row.index,
        satisfied: matched.is_some(),
        detail: CheckDetail::Numeric {
            radicand,
            root,
            matched,
            distance,
            tol,
        },
        set: row.set,
        nu,
    })
}

/// The rational that `z` rounds to, when one with denominator `<= 10^4` lies within `1e-12`.
pub fn rational_reconstruction(z: Complex64) -> Option<Rational> {
    if z.im.abs() > RECONSTRUCTION_TOL {
        return None;
    }
    Rational::reconstruct(z.re, RECONSTRUCTION_MAX_DENOM, RECONSTRUCTION_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    NonIntegrable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    /// `alpha` has no table row.
    AlphaExcluded,
    /// Some `k` fails its row criterion.
    CriterionViolated,
    /// Every `k` meets its row criterion.
    CriteriaSatisfied,
}

impl VerdictKind {
    pub fn label(self) -> &'static str {
        match self {
            VerdictKind::NonIntegrable => "NonIntegrable",
            VerdictKind::Inconclusive => "Inconclusive",
        }
    }
}

impl VerdictReason {
    pub fn label(self) -> &'static str {
        match self {
            VerdictReason::AlphaExcluded => "AlphaExcluded",
            VerdictReason::CriterionViolated => "CriterionViolated",
            VerdictReason::CriteriaSatisfied => "CriteriaSatisfied",
        }
    }
}

/// The evaluation for one eigenvalue index `k` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub k: usize,
    pub exponents: ExponentData,
    pub numeric: CheckOutcome,
    /// Present when the ratio reconstructs to a small-denominator rational.
    pub exact: Option<CheckOutcome>,
}

impl Witness {
    /// The exact outcome wins when available.
    pub fn outcome(&self) -> &CheckOutcome {
        self.exact.as_ref().unwrap_or(&self.numeric)
    }

    pub fn satisfied(&self) -> bool {
        self.outcome().satisfied
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub l: usize,
    pub gauge: Gauge,
    pub convention: ExponentConvention,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub reason: VerdictReason,
    pub alpha: Rational,
    pub row: Option<usize>,
    /// One entry per eigenvalue under the configured convention.
    pub witnesses: Vec<Witness>,
    /// The same evaluation under the other exponent convention.
    pub alternate: Option<(ExponentConvention, Vec<Witness>)>,
    pub homothetic: Option<HomotheticData>,
    pub provenance: Option<Provenance>,
}

impl Verdict {
    /// Indices `k` whose criterion fails.
    pub fn failing(&self) -> Vec<usize> {
        self.witnesses
            .iter()
            .filter(|w| !w.satisfied())
            .map(|w| w.k)
            .collect()
    }

    fn alpha_excluded(alpha: &Rational) -> Self {
        Verdict {
            kind: VerdictKind::NonIntegrable,
            reason: VerdictReason::AlphaExcluded,
            alpha: alpha.clone(),
            row: None,
            witnesses: Vec::new(),
            alternate: None,
            homothetic: None,
            provenance: None,
        }
    }

    /// Whether the headline outcome differs between the two conventions.
    pub fn conventions_disagree(&self) -> bool {
        match &self.alternate {
            Some((_, other)) => {
                let all = |ws: &[Witness]| ws.iter().all(Witness::satisfied);
                all(&self.witnesses) != all(other)
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub l: usize,
    pub gauge: Gauge,
    pub convention: ExponentConvention,
    pub tol: f64,
    pub seed: u64,
    pub e: Option<ComplexVector>,
}

impl CertifyOptions {
    pub fn new(l: usize) -> Self {
        CertifyOptions {
            l,
            gauge: Gauge::default(),
            convention: ExponentConvention::default(),
            tol: DEFAULT_TOL,
            seed: 0,
            e: None,
        }
    }
}

fn evaluate(alpha: &Rational, k: usize, ratio: Complex64, tol: f64) -> Witness {
    let numeric = check_criterion_numeric(alpha, ratio, tol).expect("row checked by caller");
    match rational_reconstruction(ratio) {
        Some(exact_ratio) => Witness {
            k,
            exponents: exponent_differences(alpha, &Ratio::Exact(exact_ratio.clone())),
            numeric,
            exact: Some(check_criterion_exact(alpha, &exact_ratio).expect("row checked by caller")),
        },
        None => Witness {
            k,
            exponents: exponent_differences(alpha, &Ratio::Numeric(ratio)),
            numeric,
            exact: None,
        },
    }
}

fn evaluate_ratio(alpha: &Rational, k: usize, ratio: &Ratio, tol: f64) -> Witness {
    match ratio {
        Ratio::Numeric(z) => evaluate(alpha, k, *z, tol),
        Ratio::Exact(r) => Witness {
            k,
            exponents: exponent_differences(alpha, ratio),
            numeric: check_criterion_numeric(alpha, Complex64::new(r.to_f64(), 0.0), tol)
                .expect("row checked by caller"),
            exact: Some(check_criterion_exact(alpha, r).expect("row checked by caller")),
        },
    }
}

fn reduce(alpha: &Rational, row: usize, witnesses: Vec<Witness>) -> Verdict {
    let all_hold = witnesses.iter().all(Witness::satisfied);
    Verdict {
        kind: if all_hold {
            VerdictKind::Inconclusive
        } else {
            VerdictKind::NonIntegrable
        },
        reason: if all_hold {
            VerdictReason::CriteriaSatisfied
        } else {
            VerdictReason::CriterionViolated
        },
        alpha: alpha.clone(),
        row: Some(row),
        witnesses,
        alternate: None,
        homothetic: None,
        provenance: None,
    }
}

/// Verdict for given ratios `a_k / C`, bypassing the homothetic solver.
pub fn certify_ratios(alpha: &Rational, ratios: &[Ratio], tol: f64) -> Verdict {
    let Some(row) = table_row(alpha) else {
        return Verdict::alpha_excluded(alpha);
    };
    let witnesses = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| evaluate_ratio(alpha, i + 1, r, tol))
        .collect();
    reduce(alpha, row.index, witnesses)
}

/// Applies the criterion table to a configuration.
///
/// Excluded `alpha` short-circuits to `NonIntegrable` without touching the
/// solver. Otherwise the homothetic data is built, every ratio `a_k / C` is
/// checked under the configured exponent convention (and, for the record,
/// under the other one), and the verdict is `NonIntegrable` if any `k` fails.
pub fn certify(config: &Configuration, options: &CertifyOptions) -> Result<Verdict, CertifyError> {
    let alpha = config.alpha();
    let Some(row) = table_row(alpha) else {
        return Ok(Verdict::alpha_excluded(alpha));
    };
    let data = HomotheticData::build(
        config,
        &HomotheticOptions {
            l: options.l,
            gauge: options.gauge,
            convention: options.convention,
            seed: options.seed,
            e: options.e.clone(),
        },
    )?;
    let witnesses_for = |d: &HomotheticData| -> Vec<Witness> {
        d.ratios()
            .into_iter()
            .enumerate()
            .map(|(i, r)| evaluate(alpha, i + 1, r, options.tol))
            .collect()
    };
    let mut verdict = reduce(alpha, row.index, witnesses_for(&data));
    let other = data.with_convention(config, options.convention.other())?;
    verdict.alternate = Some((other.convention, witnesses_for(&other)));
    verdict.provenance = Some(Provenance {
        l: options.l,
        gauge: options.gauge,
        convention: options.convention,
        seed: options.seed,
        tol: options.tol,
    });
    verdict.homothetic = Some(data);
    Ok(verdict)
}

/// Compares the general `alpha = 1` path with the Newtonian criterion
/// `sqrt(25/4 - 4 rho/C) in 1/2 + Z` on the given ratios.
pub fn newtonian_specialization_check(ratios: &[Rational]) -> bool {
    let one = Rational::one();
    let Some(row) = table_row(&one) else {
        return false;
    };
    let half_integers = ArithmeticSet::new(vec![Progression::new(q("1/2"), one.clone())]);
    ratios.iter().all(|r| {
        let newtonian_radicand = &q("25/4") - &(&Rational::from_integer(4) * r);
        let general = exponent_differences(&one, &Ratio::Exact(r.clone()));
        let radicands_agree = general.radicand == Ratio::Exact(newtonian_radicand.clone())
            && row.radicand(r) == newtonian_radicand;
        let newtonian_holds = newtonian_radicand
            .sqrt()
            .is_some_and(|root| half_integers.contains_exact(&root) || half_integers.contains_exact(&-root));
        let general_holds = check_criterion_exact(&one, r).map(|o| o.satisfied).unwrap_or(false);
        radicands_agree && newtonian_holds == general_holds
    })
}
