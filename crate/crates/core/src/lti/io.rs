//! JSON system files.
//!
//! Two layouts are accepted:
//!
//! ```json
//! {"n": 2, "A": [[-1, 0], [0, -2]], "b": [1, 1], "c": [1, 1]}
//! {"poles": [-1, [-2, 0.5], [-2, -0.5]], "residues": [1, [0.5, 0], [0.5, 0]]}
//! ```
//!
//! Complex poles and residues are `[re, im]` pairs.

use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{PoleResidueForm, StateSpaceSystem};
use crate::error::{Error, Result};
use crate::serde_util::matrix_rows;

/// Which layout a file used.
#[derive(Debug, Clone)]
pub enum SystemFile {
    StateSpace(StateSpaceSystem),
    PoleResidue(PoleResidueForm),
}

impl SystemFile {
    pub fn into_system(self) -> Result<StateSpaceSystem> {
        match self {
            SystemFile::StateSpace(sys) => Ok(sys),
            SystemFile::PoleResidue(pr) => pr.realize(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Real(f64),
    Pair([f64; 2]),
}

impl From<Number> for Complex64 {
    fn from(n: Number) -> Self {
        match n {
            Number::Real(re) => Complex64::new(re, 0.0),
            Number::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

fn field<T: DeserializeOwned>(obj: &serde_json::Map<String, Value>, name: &str) -> Result<T> {
    let value = obj
        .get(name)
        .ok_or_else(|| Error::invalid(name, "missing field"))?;
    serde_json::from_value(value.clone()).map_err(|e| Error::invalid(name, e.to_string()))
}

/// Parses either file layout.
pub fn parse_system_file(text: &str) -> Result<SystemFile> {
    let value: Value = serde_json::from_str(text).map_err(|source| Error::Json {
        context: "system file is not valid JSON".into(),
        source,
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::invalid("<root>", "expected a JSON object"))?;
    const KNOWN: [&str; 6] = ["n", "A", "b", "c", "poles", "residues"];
    if let Some(key) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
        return Err(Error::invalid(key.clone(), "unknown field"));
    }
    if obj.contains_key("poles") || obj.contains_key("residues") {
        let poles: Vec<Number> = field(obj, "poles")?;
        let residues: Vec<Number> = field(obj, "residues")?;
        if poles.len() != residues.len() {
            return Err(Error::invalid(
                "residues",
                format!("{} residues for {} poles", residues.len(), poles.len()),
            ));
        }
        if poles.is_empty() {
            return Err(Error::invalid("poles", "at least one pole required"));
        }
        let pr = PoleResidueForm::new(
            poles.into_iter().map(Into::into).collect(),
            residues.into_iter().map(Into::into).collect(),
        )?;
        return Ok(SystemFile::PoleResidue(pr));
    }
    let n: usize = field(obj, "n")?;
    let a: Vec<Vec<f64>> = field(obj, "A")?;
    let b: Vec<f64> = field(obj, "b")?;
    let c: Vec<f64> = field(obj, "c")?;
    if n == 0 {
        return Err(Error::invalid("n", "order must be positive"));
    }
    if a.len() != n {
        return Err(Error::invalid("A", format!("has {} rows, expected n = {n}", a.len())));
    }
    if let Some((i, row)) = a.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::invalid(
            "A",
            format!("row {i} has {} entries, expected n = {n}", row.len()),
        ));
    }
    if b.len() != n {
        return Err(Error::invalid("b", format!("has length {}, expected n = {n}", b.len())));
    }
    if c.len() != n {
        return Err(Error::invalid("c", format!("has length {}, expected n = {n}", c.len())));
    }
    Ok(SystemFile::StateSpace(StateSpaceSystem::from_rows(&a, &b, &c)?))
}

pub fn system_from_json(text: &str) -> Result<StateSpaceSystem> {
    parse_system_file(text)?.into_system()
}

/// Reads a system file, returning the realization and the raw bytes (for digests).
pub fn read_system_file(path: &Path) -> Result<(StateSpaceSystem, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        context: format!("reading {}", path.display()),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::invalid("<file>", "system file is not UTF-8"))?;
    Ok((system_from_json(&text)?, bytes))
}

#[derive(Serialize)]
struct StateSpaceFile<'a> {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: &'a [f64],
    c: &'a [f64],
}

impl Serialize for StateSpaceSystem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateSpaceFile {
            n: self.order(),
            a: matrix_rows(self.a()),
            b: self.b().as_slice(),
            c: self.c().as_slice(),
        }
        .serialize(s)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OwnedStateSpaceFile {
    n: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl<'de> Deserialize<'de> for StateSpaceSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = OwnedStateSpaceFile::deserialize(d)?;
        if raw.a.len() != raw.n {
            return Err(D::Error::custom(format!("A has {} rows, expected n = {}", raw.a.len(), raw.n)));
        }
        StateSpaceSystem::from_rows(&raw.a, &raw.b, &raw.c).map_err(D::Error::custom)
    }
}

pub fn system_to_json(sys: &StateSpaceSystem) -> String {
    serde_json::to_string_pretty(sys).expect("system serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_space_round_trip() {
        let sys = StateSpaceSystem::from_rows(&[vec![-2.0, 1.0], vec![1.0, -2.0]], &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        let back = system_from_json(&system_to_json(&sys)).unwrap();
        assert_eq!(sys, back);
    }

    #[test]
    fn pole_residue_layout() {
        let sys = system_from_json(r#"{"poles": [-1, [-2, 1], [-2, -1]], "residues": [1, [0.5, 0.1], [0.5, -0.1]]}"#).unwrap();
        assert_eq!(sys.order(), 3);
    }

    #[test]
    fn dimension_errors_name_field() {
        let cases = [
            (r#"{"n": 2, "A": [[-1, 0]], "b": [1, 1], "c": [1, 1]}"#, "A"),
            (r#"{"n": 2, "A": [[-1, 0], [0]], "b": [1, 1], "c": [1, 1]}"#, "A"),
            (r#"{"n": 2, "A": [[-1, 0], [0, -2]], "b": [1], "c": [1, 1]}"#, "b"),
            (r#"{"n": 2, "A": [[-1, 0], [0, -2]], "b": [1, 1], "c": [1, 1, 3]}"#, "c"),
            (r#"{"n": 2, "A": [[-1, 0], [0, -2]], "b": [1, "x"], "c": [1, 1]}"#, "b"),
            (r#"{"n": 2, "A": [[-1, 0], [0, -2]], "c": [1, 1]}"#, "b"),
            (r#"{"poles": [-1, -2], "residues": [1]}"#, "residues"),
        ];
        for (text, name) in cases {
            match system_from_json(text) {
                Err(Error::InvalidInput { field, .. }) => assert_eq!(field, name, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = system_from_json(r#"{"n": 2, "A": [[-1, 0], [0, -2]"#).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
