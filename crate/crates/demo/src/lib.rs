//! Browser bindings: check a ratio against the criterion table, scan rational
//! exponents, and compute a Poincare section. Every entry point takes and
//! returns JSON text so the page needs no generated types.

use ncenter::certify::{check_criterion_exact, check_criterion_numeric, table_row, CheckDetail, DEFAULT_TOL};
use ncenter::simulate::{poincare_section, section_initial_conditions, Section, SectionDirection};
use ncenter::{Configuration, Rational};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn error(message: impl std::fmt::Display) -> Value {
    json!({ "error": message.to_string() })
}

fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// `ratio` is exact when it parses as a rational or decimal, otherwise `re,im`.
pub fn check(alpha: &str, ratio: &str, tol: f64) -> Value {
    let alpha: Rational = match alpha.trim().parse() {
        Ok(a) => a,
        Err(e) => return error(format!("alpha: {e}")),
    };
    let Some(row) = table_row(&alpha) else {
        return json!({
            "alpha": alpha.to_string(),
            "excluded": true,
            "message": "alpha excluded: non-integrable for all ratios",
        });
    };
    let tol = if tol > 0.0 { tol } else { DEFAULT_TOL };
    let outcome = match Rational::parse_decimal(ratio.trim()) {
        Ok(r) => check_criterion_exact(&alpha, &r),
        Err(_) => {
            let parts: Vec<f64> = ratio.split(',').filter_map(|x| x.trim().parse().ok()).collect();
            match parts.as_slice() {
                [re] => check_criterion_numeric(&alpha, Complex64::new(*re, 0.0), tol),
                [re, im] => check_criterion_numeric(&alpha, Complex64::new(*re, *im), tol),
                _ => return error(format!("ratio: cannot parse {ratio:?}")),
            }
        }
    }
    .expect("row exists");
    let (radicand, root) = match &outcome.detail {
        CheckDetail::ExactRoot { radicand, root, .. } => (json!(radicand.to_string()), json!(root.to_string())),
        CheckDetail::IrrationalRoot { radicand } => (json!(radicand.to_string()), Value::Null),
        CheckDetail::Numeric { radicand, root, .. } => (complex(*radicand), complex(*root)),
    };
    json!({
        "alpha": alpha.to_string(),
        "excluded": false,
        "row": row.index,
        "criterion": format!("{} ∈ {}", row.radical_text(), row.set),
        "radicand": radicand,
        "root": root,
        "satisfied": outcome.satisfied,
        "message": outcome.to_string(),
    })
}

/// Reduced `p/q` in `(0, 2)` with `q <= den_max`, in increasing order.
pub fn scan(den_max: u32) -> Value {
    if den_max == 0 || den_max > 500 {
        return error("den_max must be between 1 and 500");
    }
    let mut values = Vec::new();
    for q in 1..=den_max as i64 {
        for p in 1..2 * q {
            let r = Rational::new(p, q);
            if *r.denom() == q.into() {
                values.push((p as f64 / q as f64, r));
            }
        }
    }
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let entries: Vec<Value> = values
        .into_iter()
        .map(|(x, r)| {
            json!({
                "alpha": r.to_string(),
                "value": x,
                "criteria": table_row(&r).is_some(),
            })
        })
        .collect();
    json!({ "den_max": den_max, "entries": entries })
}

#[derive(Deserialize)]
pub struct SectionRequest {
    pub alpha: String,
    pub centers: Vec<[f64; 2]>,
    pub masses: Vec<f64>,
    pub energy: f64,
    /// `(coordinate, momentum)` seeds on the section.
    pub points: Vec<[f64; 2]>,
    pub t_final: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_axis")]
    pub axis: usize,
    #[serde(default)]
    pub value: f64,
}

fn default_rel_tol() -> f64 {
    1e-9
}

fn default_axis() -> usize {
    1
}

/// Upward crossings of `q[axis] = value` for each seed on the energy level.
pub fn section(request: &SectionRequest) -> Value {
    let alpha: Rational = match request.alpha.parse() {
        Ok(a) => a,
        Err(e) => return error(format!("alpha: {e}")),
    };
    let centers = request.centers.iter().map(|c| c.to_vec()).collect();
    let config = match Configuration::new(2, centers, request.masses.clone(), alpha) {
        Ok(c) => c,
        Err(e) => return error(e),
    };
    if !(request.t_final > 0.0 && request.t_final <= 2000.0) {
        return error("t_final must be in (0, 2000]");
    }
    let sec = Section {
        axis: request.axis.min(1),
        value: request.value,
        direction: SectionDirection::Up,
    };
    let seeds: Vec<(f64, f64)> = request.points.iter().map(|p| (p[0], p[1])).collect();
    let mut failures = Vec::new();
    let mut states = Vec::new();
    let mut index = Vec::new();
    for (i, ic) in section_initial_conditions(&config, request.energy, &sec, &seeds)
        .into_iter()
        .enumerate()
    {
        match ic {
            Ok(s) => {
                states.push(s);
                index.push(i);
            }
            Err(e) => failures.push(json!({ "seed": i, "reason": e.to_string() })),
        }
    }
    let run = match poincare_section(
        &config,
        Some(request.energy),
        &sec,
        &states,
        request.t_final,
        request.rel_tol,
        1e-6,
    ) {
        Ok(run) => run,
        Err(e) => return error(e),
    };
    for (i, e) in &run.failures {
        failures.push(json!({ "seed": index[*i], "reason": e.to_string() }));
    }
    let points: Vec<Value> = run
        .points
        .iter()
        .map(|p| json!([index[p.trajectory], p.coordinate, p.momentum]))
        .collect();
    json!({ "points": points, "completed": run.completed, "failures": failures })
}

#[wasm_bindgen(js_name = checkRatio)]
pub fn check_ratio_js(alpha: &str, ratio: &str, tol: f64) -> String {
    check(alpha, ratio, tol).to_string()
}

#[wasm_bindgen(js_name = scanAlphas)]
pub fn scan_js(den_max: u32) -> String {
    scan(den_max).to_string()
}

#[wasm_bindgen(js_name = poincareSection)]
pub fn section_js(request: &str) -> String {
    match serde_json::from_str::<SectionRequest>(request) {
        Ok(r) => section(&r).to_string(),
        Err(e) => error(format!("request: {e}")).to_string(),
    }
}
