//! JSON report for `certify`. Floats are written with 17 significant digits,
//! rationals as `"p/q"` strings, complex numbers as `[re, im]`.

use ncenter::certify::{CheckDetail, ExponentData, Ratio, Witness};
use ncenter::homothetic::Residuals;
use ncenter::linalg::CMatrix;
use ncenter::{ComplexVector, ExponentConvention, HomotheticData, Verdict};
use num_complex::Complex64;
use serde_json::{json, Map, Number, Value};

use crate::config::RunConfig;

pub const SCHEMA: &str = "ncenter-report/1";

/// A float with 17 significant digits, or `null` when not finite.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let text = format!("{x:.16e}");
    Value::Number(text.parse::<Number>().expect("exponent notation is a JSON number"))
}

/// The same formatting for CSV fields.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn complex(z: Complex64) -> Value {
    json!([num(z.re), num(z.im)])
}

fn cvector(v: &ComplexVector) -> Value {
    Value::Array(v.iter().map(|z| complex(*z)).collect())
}

fn matrix(a: &CMatrix) -> Value {
    Value::Array(
        a.row_iter()
            .map(|row| Value::Array(row.iter().map(|z| complex(*z)).collect()))
            .collect(),
    )
}

fn ratio(r: &Ratio) -> Value {
    match r {
        Ratio::Exact(q) => Value::String(q.to_string()),
        Ratio::Numeric(z) => complex(*z),
    }
}

fn exponents(e: &ExponentData) -> Value {
    json!({
        "lambda": e.lambda.to_string(),
        "mu": e.mu.to_string(),
        "ratio": ratio(&e.ratio),
        "radicand": ratio(&e.radicand),
        "nu": ratio(&e.nu),
    })
}

fn detail(d: &CheckDetail) -> Value {
    match d {
        CheckDetail::ExactRoot {
            radicand,
            root,
            matched,
        } => json!({
            "path": "exact",
            "radicand": radicand.to_string(),
            "root": root.to_string(),
            "matched": matched.as_ref().map(|m| m.to_string()),
        }),
        CheckDetail::IrrationalRoot { radicand } => json!({
            "path": "exact",
            "radicand": radicand.to_string(),
            "root": Value::Null,
            "matched": Value::Null,
        }),
        CheckDetail::Numeric {
            radicand,
            root,
            matched,
            distance,
            tol,
        } => json!({
            "path": "numeric",
            "radicand": complex(*radicand),
            "root": complex(*root),
            "matched": matched.map(complex),
            "distance": num(*distance),
            "tol": num(*tol),
        }),
    }
}

fn witness(w: &Witness) -> Value {
    let outcome = w.outcome();
    json!({
        "k": w.k,
        "exponents": exponents(&w.exponents),
        "satisfied": w.satisfied(),
        "check": outcome.to_string(),
        "detail": detail(&outcome.detail),
        "numeric_check": outcome_numeric(w),
    })
}

// The numeric evaluation is kept even when the exact path decided.
fn outcome_numeric(w: &Witness) -> Value {
    json!({
        "satisfied": w.numeric.satisfied,
        "detail": detail(&w.numeric.detail),
    })
}

fn residuals(r: &Residuals) -> Value {
    json!({
        "isotropy": num(r.isotropy),
        "inactive_isotropy_min": num(r.inactive_isotropy_min),
        "direction": num(r.direction),
        "eigen": num(r.eigen),
    })
}

fn homothetic(h: &HomotheticData) -> Value {
    json!({
        "l": h.l,
        "e": cvector(&h.e),
        "v": cvector(&h.v),
        "c": complex(h.c),
        "matrix": matrix(&h.a),
        "eigenvalues": Value::Array(h.eigenvalues.iter().map(|z| complex(*z)).collect()),
        "gauge": h.gauge.label(),
        "exponent_convention": h.convention.label(),
        "seed": h.seed,
        "isotropic_attempt": h.isotropic_attempt,
        "direction_attempt": h.direction_attempt,
        "residuals": residuals(&h.residuals),
    })
}

fn convention_block(convention: ExponentConvention, witnesses: &[Witness], headline: bool) -> Value {
    json!({
        "exponent_convention": convention.label(),
        "headline": headline,
        "all_satisfied": witnesses.iter().all(Witness::satisfied),
        "witnesses": Value::Array(witnesses.iter().map(witness).collect()),
    })
}

pub fn certify_report(run: &RunConfig, verdict: &Verdict) -> Value {
    let mut report = Map::new();
    report.insert("schema".into(), json!(SCHEMA));
    report.insert(
        "tool".into(),
        json!({"name": "ncenter", "version": env!("CARGO_PKG_VERSION")}),
    );
    report.insert("config_digest".into(), json!(format!("sha256:{}", run.digest)));
    report.insert("config".into(), run.raw.clone());
    report.insert(
        "verdict".into(),
        json!({
            "kind": verdict.kind.label(),
            "reason": verdict.reason.label(),
            "alpha": verdict.alpha.to_string(),
            "row": verdict.row,
            "failing_k": verdict.failing(),
            "summary": summary(verdict),
        }),
    );
    let opts = &run.certify;
    report.insert(
        "provenance".into(),
        json!({
            "l": opts.l,
            "gauge": opts.gauge.label(),
            "exponent_convention": opts.convention.label(),
            "seed": opts.seed,
            "tol": num(opts.tol),
            "branch": "principal, arg in (-pi, pi]",
            "nu_sign": "a criterion holds if either sign of the root lies in the set",
        }),
    );
    let mut conventions = Vec::new();
    if verdict.row.is_some() {
        let convention = verdict
            .homothetic
            .as_ref()
            .map_or(opts.convention, |h| h.convention);
        conventions.push(convention_block(convention, &verdict.witnesses, true));
        if let Some((other, ws)) = &verdict.alternate {
            conventions.push(convention_block(*other, ws, false));
        }
    }
    report.insert("conventions".into(), Value::Array(conventions));
    report.insert("conventions_disagree".into(), json!(verdict.conventions_disagree()));
    report.insert(
        "homothetic".into(),
        verdict.homothetic.as_ref().map_or(Value::Null, homothetic),
    );
    Value::Object(report)
}

pub fn summary(verdict: &Verdict) -> String {
    use ncenter::certify::VerdictReason::*;
    match verdict.reason {
        AlphaExcluded => format!(
            "alpha = {} is not in the criterion table: non-integrable for every configuration",
            verdict.alpha
        ),
        CriterionViolated => format!(
            "alpha = {} (row {}): criterion violated for k = {:?}; not rationally integrable",
            verdict.alpha,
            verdict.row.unwrap_or(0),
            verdict.failing()
        ),
        CriteriaSatisfied => format!(
            "alpha = {} (row {}): all {} criteria hold; integrability neither established nor excluded",
            verdict.alpha,
            verdict.row.unwrap_or(0),
            verdict.witnesses.len()
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-0.5).to_string(), "-5.0000000000000000e-1");
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(fmt17(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
