//! Run configuration: JSON with rationals and reals as decimal strings, complex
//! numbers as `[re, im]` pairs of strings.

use std::path::Path;

use ncenter::certify::DEFAULT_TOL;
use ncenter::simulate::{Section, SectionDirection, DEFAULT_MIN_CENTER_DISTANCE};
use ncenter::{CertifyOptions, ComplexVector, Configuration, ExponentConvention, Gauge, PhaseState, Rational};
use num_complex::Complex64;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// A rejected input; the message names the offending field.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(field: &str, message: impl std::fmt::Display) -> InputError {
    InputError(format!("{field}: {message}"))
}

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub t_final: f64,
    pub rel_tol: f64,
    pub min_center_distance: f64,
    pub initial_states: Vec<PhaseState>,
    pub section: Option<SectionOptions>,
}

#[derive(Debug, Clone)]
pub struct SectionOptions {
    pub section: Section,
    pub energy: Option<f64>,
    /// `(coordinate, momentum)` seeds placed on the energy level.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub config: Configuration,
    pub certify: CertifyOptions,
    pub simulate: Option<SimulateOptions>,
    /// SHA-256 of the canonical (key-sorted, compact) JSON text.
    pub digest: String,
    pub raw: Value,
}

pub fn load(path: &Path) -> Result<RunConfig, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, InputError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| InputError(format!("config is not valid JSON: {e}")))?;
    let obj = raw
        .as_object()
        .ok_or_else(|| InputError("config must be a JSON object".into()))?;
    const KNOWN: [&str; 11] = [
        "alpha",
        "dimension",
        "centers",
        "masses",
        "l",
        "e",
        "gauge",
        "exponent_convention",
        "tol",
        "seed",
        "simulate",
    ];
    if let Some(key) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(bad(key, "unknown field"));
    }

    let alpha = string(obj, "alpha")?;
    let dimension = uint(obj, "dimension")? as usize;
    let centers: Vec<Vec<String>> = array(obj, "centers")?
        .iter()
        .enumerate()
        .map(|(i, c)| string_list(c, &format!("centers[{i}]")))
        .collect::<Result<_, _>>()?;
    let masses = string_list(required(obj, "masses")?, "masses")?;
    let config = Configuration::from_text(dimension, &centers, &masses, alpha).map_err(|e| InputError(e.to_string()))?;

    let l = match obj.get("l") {
        Some(_) => uint(obj, "l")? as usize,
        None => config.num_centers().min(config.dim()),
    };
    let e = match obj.get("e") {
        Some(v) => Some(complex_vector(v, "e", dimension)?),
        None => None,
    };
    let gauge = match obj.get("gauge") {
        None => Gauge::default(),
        Some(_) => match string(obj, "gauge")? {
            "c-fixed-to-one" => Gauge::CFixedToOne,
            "unit-bilinear-norm" => Gauge::UnitBilinearNorm,
            other => return Err(bad("gauge", format!("expected c-fixed-to-one or unit-bilinear-norm, got {other:?}"))),
        },
    };
    let convention = match obj.get("exponent_convention") {
        None => ExponentConvention::default(),
        Some(_) => match string(obj, "exponent_convention")? {
            "paper-literal" => ExponentConvention::PaperLiteral,
            "hessian-consistent" => ExponentConvention::HessianConsistent,
            other => {
                return Err(bad(
                    "exponent_convention",
                    format!("expected paper-literal or hessian-consistent, got {other:?}"),
                ))
            }
        },
    };
    let tol = match obj.get("tol") {
        None => DEFAULT_TOL,
        Some(_) => positive(obj, "tol")?,
    };
    let seed = match obj.get("seed") {
        None => 0,
        Some(_) => uint(obj, "seed")?,
    };
    let simulate = match obj.get("simulate") {
        None => None,
        Some(v) => Some(simulate_options(v, dimension)?),
    };

    let canonical = serde_json::to_vec(&raw).expect("a parsed value serializes");
    let digest = hex::encode(Sha256::digest(&canonical));
    Ok(RunConfig {
        config,
        certify: CertifyOptions {
            l,
            gauge,
            convention,
            tol,
            seed,
            e,
        },
        simulate,
        digest,
        raw,
    })
}

fn simulate_options(value: &Value, dim: usize) -> Result<SimulateOptions, InputError> {
    let obj = value.as_object().ok_or_else(|| bad("simulate", "expected an object"))?;
    const KNOWN: [&str; 5] = ["t_final", "rel_tol", "min_center_distance", "initial_states", "section"];
    if let Some(key) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(bad(&format!("simulate.{key}"), "unknown field"));
    }
    let get_real = |key: &str, default: f64| -> Result<f64, InputError> {
        match obj.get(key) {
            None => Ok(default),
            Some(v) => real(v, &format!("simulate.{key}")),
        }
    };
    let t_final = get_real("t_final", 10.0)?;
    let rel_tol = get_real("rel_tol", 1e-10)?;
    let min_center_distance = get_real("min_center_distance", DEFAULT_MIN_CENTER_DISTANCE)?;
    for (name, x) in [("rel_tol", rel_tol), ("min_center_distance", min_center_distance)] {
        if !(x > 0.0) {
            return Err(bad(&format!("simulate.{name}"), "must be positive"));
        }
    }
    let initial_states = match obj.get("initial_states") {
        None => Vec::new(),
        Some(Value::Array(states)) => states
            .iter()
            .enumerate()
            .map(|(i, s)| phase_state(s, &format!("simulate.initial_states[{i}]"), dim))
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(bad("simulate.initial_states", "expected an array")),
    };
    let section = match obj.get("section") {
        None => None,
        Some(v) => Some(section_options(v)?),
    };
    Ok(SimulateOptions {
        t_final,
        rel_tol,
        min_center_distance,
        initial_states,
        section,
    })
}

fn section_options(value: &Value) -> Result<SectionOptions, InputError> {
    let obj = value.as_object().ok_or_else(|| bad("simulate.section", "expected an object"))?;
    let axis = match obj.get("axis") {
        Some(Value::String(s)) => parse_axis(s).ok_or_else(|| bad("simulate.section.axis", "expected x, y, 0 or 1"))?,
        Some(Value::Number(n)) => match n.as_u64() {
            Some(a @ (0 | 1)) => a as usize,
            _ => return Err(bad("simulate.section.axis", "expected 0 or 1")),
        },
        _ => return Err(bad("simulate.section.axis", "missing or not a string")),
    };
    let value_field = match obj.get("value") {
        None => 0.0,
        Some(v) => real(v, "simulate.section.value")?,
    };
    let direction = match obj.get("direction") {
        None => SectionDirection::Up,
        Some(Value::String(s)) => {
            parse_direction(s).ok_or_else(|| bad("simulate.section.direction", "expected up, down or both"))?
        }
        Some(_) => return Err(bad("simulate.section.direction", "expected a string")),
    };
    let energy = match obj.get("energy") {
        None => None,
        Some(v) => Some(real(v, "simulate.section.energy")?),
    };
    let points = match obj.get("points") {
        None => Vec::new(),
        Some(Value::Array(points)) => points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let field = format!("simulate.section.points[{i}]");
                match p.as_array().map(Vec::as_slice) {
                    Some([a, b]) => Ok((real(a, &field)?, real(b, &field)?)),
                    _ => Err(bad(&field, "expected [coordinate, momentum]")),
                }
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(bad("simulate.section.points", "expected an array")),
    };
    if !points.is_empty() && energy.is_none() {
        return Err(bad("simulate.section.energy", "required when points are given"));
    }
    Ok(SectionOptions {
        section: Section {
            axis,
            value: value_field,
            direction,
        },
        energy,
        points,
    })
}

pub fn parse_axis(s: &str) -> Option<usize> {
    match s {
        "x" | "0" => Some(0),
        "y" | "1" => Some(1),
        _ => None,
    }
}

pub fn parse_direction(s: &str) -> Option<SectionDirection> {
    match s {
        "up" => Some(SectionDirection::Up),
        "down" => Some(SectionDirection::Down),
        "both" => Some(SectionDirection::Both),
        _ => None,
    }
}

fn phase_state(value: &Value, field: &str, dim: usize) -> Result<PhaseState, InputError> {
    let obj = value.as_object().ok_or_else(|| bad(field, "expected {\"q\": [...], \"p\": [...]}"))?;
    let vector = |key: &str| -> Result<Vec<f64>, InputError> {
        let name = format!("{field}.{key}");
        let items = obj.get(key).ok_or_else(|| bad(&name, "missing"))?;
        let list = string_list(items, &name)?;
        if list.len() != dim {
            return Err(bad(&name, format!("expected {dim} components, got {}", list.len())));
        }
        list.iter()
            .enumerate()
            .map(|(j, s)| decimal(s, &format!("{name}[{j}]")))
            .collect()
    };
    Ok(PhaseState::new(vector("q")?, vector("p")?))
}

fn complex_vector(value: &Value, field: &str, dim: usize) -> Result<ComplexVector, InputError> {
    let items = value.as_array().ok_or_else(|| bad(field, "expected an array of [re, im] pairs"))?;
    if items.len() != dim {
        return Err(bad(field, format!("expected {dim} components, got {}", items.len())));
    }
    items
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let name = format!("{field}[{i}]");
            let pair = string_list(z, &name)?;
            match pair.as_slice() {
                [re, im] => Ok(Complex64::new(decimal(re, &name)?, decimal(im, &name)?)),
                _ => Err(bad(&name, "expected [re, im]")),
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(ComplexVector)
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, InputError> {
    obj.get(key).ok_or_else(|| bad(key, "missing"))
}

fn string<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, InputError> {
    required(obj, key)?
        .as_str()
        .ok_or_else(|| bad(key, "expected a string"))
}

fn uint(obj: &Map<String, Value>, key: &str) -> Result<u64, InputError> {
    required(obj, key)?
        .as_u64()
        .ok_or_else(|| bad(key, "expected a non-negative integer"))
}

fn array<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Vec<Value>, InputError> {
    required(obj, key)?
        .as_array()
        .ok_or_else(|| bad(key, "expected an array"))
}

fn string_list(value: &Value, field: &str) -> Result<Vec<String>, InputError> {
    let items = value.as_array().ok_or_else(|| bad(field, "expected an array of strings"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x.as_str()
                .map(str::to_owned)
                .ok_or_else(|| bad(&format!("{field}[{i}]"), "expected a decimal string"))
        })
        .collect()
}

fn decimal(text: &str, field: &str) -> Result<f64, InputError> {
    Rational::parse_decimal(text).map(|r| r.to_f64()).map_err(|e| bad(field, e))
}

fn real(value: &Value, field: &str) -> Result<f64, InputError> {
    let text = value.as_str().ok_or_else(|| bad(field, "expected a decimal string"))?;
    decimal(text, field)
}

fn positive(obj: &Map<String, Value>, key: &str) -> Result<f64, InputError> {
    let x = real(required(obj, key)?, key)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(bad(key, "must be positive"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_CENTER: &str = r#"{
        "alpha": "1",
        "dimension": 2,
        "centers": [["0", "0"], ["1", "0"]],
        "masses": ["1", "1"],
        "l": 2,
        "e": [["0.5", "0"], ["0", "0.5"]]
    }"#;

    #[test]
    fn parses_a_full_config() {
        let run = parse(TWO_CENTER).unwrap();
        assert_eq!(run.config.num_centers(), 2);
        assert_eq!(run.certify.l, 2);
        assert_eq!(run.certify.e.as_ref().unwrap()[1], Complex64::new(0.0, 0.5));
        assert_eq!(run.certify.gauge, Gauge::CFixedToOne);
        assert_eq!(run.certify.tol, DEFAULT_TOL);
    }

    #[test]
    fn digest_ignores_whitespace_and_key_order() {
        let a = parse(TWO_CENTER).unwrap();
        let b = parse(r#"{"l":2,"e":[["0.5","0"],["0","0.5"]],"masses":["1","1"],"centers":[["0","0"],["1","0"]],"dimension":2,"alpha":"1"}"#).unwrap();
        assert_eq!(a.digest, b.digest);
        assert_eq!(a.digest.len(), 64);
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (TWO_CENTER.replace("\"alpha\": \"1\"", "\"alpha\": \"1/0\""), "alpha"),
            (TWO_CENTER.replace("[\"1\", \"0\"]]", "[\"1\", \"zero\"]]"), "centers[1][1]"),
            (TWO_CENTER.replace("\"masses\": [\"1\", \"1\"]", "\"masses\": [\"1\", 1]"), "masses[1]"),
            (TWO_CENTER.replace("\"l\": 2", "\"l\": -2"), "l"),
            (TWO_CENTER.replace("\"l\": 2", "\"gauge\": \"none\""), "gauge"),
            (TWO_CENTER.replace("\"l\": 2", "\"frobnicate\": 1"), "frobnicate"),
        ];
        for (text, field) in cases {
            let err = parse(&text).unwrap_err();
            assert!(err.0.starts_with(field), "{field}: {err}");
        }
    }

    #[test]
    fn simulate_block() {
        let text = r#"{
            "alpha": "1", "dimension": 2, "centers": [["0", "0"]], "masses": ["1"],
            "simulate": {
                "t_final": "6.283185307179586",
                "initial_states": [{"q": ["1", "0"], "p": ["0", "1"]}],
                "section": {"axis": "y", "value": "0", "direction": "up", "energy": "-0.5", "points": [["1", "0"]]}
            }
        }"#;
        let sim = parse(text).unwrap().simulate.unwrap();
        assert_eq!(sim.initial_states[0].p, vec![0.0, 1.0]);
        let section = sim.section.unwrap();
        assert_eq!(section.section.axis, 1);
        assert_eq!(section.points, vec![(1.0, 0.0)]);
        assert_eq!(sim.rel_tol, 1e-10);
    }
}
