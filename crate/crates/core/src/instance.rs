//! JSON instance files.
//!
//! ```json
//! {"alpha":[1,1,0],"convention":"full","homogeneous":false,"m":3,"matrices":[[1,0,0,0],[0,0,0,1],[0,0.5,0.5,0]],"n":2,"version":1}
//! ```
//!
//! Matrices are dense row-major `n²` arrays (nested rows are accepted on
//! input). The canonical form written by [`InstanceFile::to_canonical_json`]
//! has sorted keys, no whitespace, a trailing newline, and floats printed as
//! C's `%.17g`.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::symmat::SymMatrix;

pub const FORMAT_VERSION: u64 = 1;
const SYMMETRY_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `q(x) = ⟨Qx, x⟩`.
    Full,
    /// `q(x) = ½⟨Qx, x⟩`.
    Half,
}

impl Convention {
    fn as_str(self) -> &'static str {
        match self {
            Convention::Full => "full",
            Convention::Half => "half",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub n: usize,
    pub convention: Convention,
    /// Row-major entries exactly as read.
    pub matrices: Vec<Vec<f64>>,
    pub alpha: Option<Vec<f64>>,
    pub homogeneous: bool,
}

/// Forms normalized to the full convention.
#[derive(Debug, Clone)]
pub struct System {
    pub matrices: Vec<SymMatrix>,
    pub alpha: Vec<f64>,
    pub homogeneous: bool,
    /// `alpha` was absent and set to the traces.
    pub implied_alpha: bool,
}

impl InstanceFile {
    pub fn m(&self) -> usize {
        self.matrices.len()
    }

    pub fn from_system(
        matrices: &[SymMatrix],
        alpha: Option<Vec<f64>>,
        homogeneous: bool,
    ) -> Result<Self, InstanceError> {
        let n = matrices
            .first()
            .ok_or_else(|| field_err("matrices", "at least one matrix is required"))?
            .dim();
        let inst = Self {
            n,
            convention: Convention::Full,
            matrices: matrices.iter().map(SymMatrix::to_row_major).collect(),
            alpha,
            homogeneous,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| InstanceError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_canonical_json()).map_err(|e| InstanceError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, InstanceError> {
        let v: Value = serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        let obj = v
            .as_object()
            .ok_or_else(|| InstanceError::Json("top level must be an object".into()))?;

        let version = obj
            .get("version")
            .ok_or_else(|| field_err("version", "missing"))?
            .as_u64()
            .ok_or_else(|| field_err("version", "must be a non-negative integer"))?;
        if version != FORMAT_VERSION {
            return Err(field_err(
                "version",
                format!("unsupported version {version}, expected {FORMAT_VERSION}"),
            ));
        }
        let n = get_usize(obj, "n")?;
        if n == 0 {
            return Err(field_err("n", "must be at least 1"));
        }
        let m = get_usize(obj, "m")?;
        let convention = match obj.get("convention") {
            None => Convention::Full,
            Some(Value::String(s)) if s == "full" => Convention::Full,
            Some(Value::String(s)) if s == "half" => Convention::Half,
            Some(other) => {
                return Err(field_err(
                    "convention",
                    format!("expected \"full\" or \"half\", got {other}"),
                ))
            }
        };
        let homogeneous = match obj.get("homogeneous") {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(field_err("homogeneous", "must be a boolean")),
        };
        let raw = obj
            .get("matrices")
            .ok_or_else(|| field_err("matrices", "missing"))?
            .as_array()
            .ok_or_else(|| field_err("matrices", "must be an array"))?;
        let mut matrices = Vec::with_capacity(raw.len());
        for (k, mv) in raw.iter().enumerate() {
            matrices.push(parse_matrix(mv, n, &format!("matrices[{k}]"))?);
        }
        if matrices.len() != m {
            return Err(field_err(
                "matrices",
                format!("expected m = {m} matrices, found {}", matrices.len()),
            ));
        }
        let alpha = match obj.get("alpha") {
            None | Some(Value::Null) => None,
            Some(Value::Array(a)) => Some(
                a.iter()
                    .enumerate()
                    .map(|(i, x)| {
                        x.as_f64()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| field_err(format!("alpha[{i}]"), "must be a finite number"))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            Some(_) => return Err(field_err("alpha", "must be an array of numbers")),
        };
        let inst = Self {
            n,
            convention,
            matrices,
            alpha,
            homogeneous,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let n = self.n;
        if self.matrices.is_empty() {
            return Err(field_err("matrices", "at least one matrix is required"));
        }
        for (k, mat) in self.matrices.iter().enumerate() {
            let field = format!("matrices[{k}]");
            if mat.len() != n * n {
                return Err(field_err(field, format!("expected {} entries, found {}", n * n, mat.len())));
            }
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(field_err(field, "entries must be finite"));
            }
            let scale = mat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for i in 0..n {
                for j in 0..i {
                    let d = (mat[i * n + j] - mat[j * n + i]).abs();
                    if d > SYMMETRY_TOL * scale {
                        return Err(field_err(
                            field,
                            format!("not symmetric: entries ({i},{j}) and ({j},{i}) differ by {d:e}"),
                        ));
                    }
                }
            }
        }
        if let Some(a) = &self.alpha {
            if a.len() != self.m() {
                return Err(field_err(
                    "alpha",
                    format!("expected {} values, found {}", self.m(), a.len()),
                ));
            }
            if self.homogeneous && a.iter().any(|&v| v != 0.0) {
                return Err(field_err("alpha", "a homogeneous instance needs zero right-hand sides"));
            }
        }
        Ok(())
    }

    /// The system `⟨Q_i x, x⟩ = α_i` in the full convention. Half-convention
    /// matrices are halved; an absent `alpha` means `α_i = tr Q_i` of the
    /// normalized matrix (zero for homogeneous instances).
    pub fn system(&self) -> System {
        let factor = match self.convention {
            Convention::Full => 1.0,
            Convention::Half => 0.5,
        };
        let matrices: Vec<SymMatrix> = self
            .matrices
            .iter()
            .map(|m| {
                SymMatrix::from_row_major(self.n, m)
                    .expect("validated matrix")
                    .scale(factor)
            })
            .collect();
        let (alpha, implied_alpha) = match (&self.alpha, self.homogeneous) {
            (Some(a), _) => (a.clone(), false),
            (None, true) => (vec![0.0; matrices.len()], true),
            (None, false) => (matrices.iter().map(SymMatrix::trace).collect(), true),
        };
        System {
            matrices,
            alpha,
            homogeneous: self.homogeneous,
            implied_alpha,
        }
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = String::from("{");
        if let Some(a) = &self.alpha {
            s.push_str("\"alpha\":");
            push_array(&mut s, a);
            s.push(',');
        }
        let _ = write!(
            s,
            "\"convention\":\"{}\",\"homogeneous\":{},\"m\":{},\"matrices\":[",
            self.convention.as_str(),
            self.homogeneous,
            self.m()
        );
        for (k, mat) in self.matrices.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            push_array(&mut s, mat);
        }
        let _ = write!(s, "],\"n\":{},\"version\":{}}}", self.n, FORMAT_VERSION);
        s.push('\n');
        s
    }
}

fn get_usize(obj: &serde_json::Map<String, Value>, key: &str) -> Result<usize, InstanceError> {
    obj.get(key)
        .ok_or_else(|| field_err(key, "missing"))?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| field_err(key, "must be a non-negative integer"))
}

fn parse_matrix(v: &Value, n: usize, field: &str) -> Result<Vec<f64>, InstanceError> {
    let arr = v
        .as_array()
        .ok_or_else(|| field_err(field, "must be an array"))?;
    let number = |x: &Value, at: String| {
        x.as_f64()
            .ok_or_else(|| field_err(at, "must be a number"))
    };
    if arr.first().is_some_and(Value::is_array) {
        if arr.len() != n {
            return Err(field_err(field, format!("expected {n} rows, found {}", arr.len())));
        }
        let mut out = Vec::with_capacity(n * n);
        for (i, row) in arr.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| field_err(format!("{field}[{i}]"), "must be an array"))?;
            if row.len() != n {
                return Err(field_err(
                    format!("{field}[{i}]"),
                    format!("expected {n} entries, found {}", row.len()),
                ));
            }
            for (j, x) in row.iter().enumerate() {
                out.push(number(x, format!("{field}[{i}][{j}]"))?);
            }
        }
        Ok(out)
    } else {
        arr.iter()
            .enumerate()
            .map(|(i, x)| number(x, format!("{field}[{i}]")))
            .collect()
    }
}

fn push_array(s: &mut String, vals: &[f64]) {
    s.push('[');
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format_g17(*v));
    }
    s.push(']');
}

/// C `printf("%.17g", x)` for finite `x`; negative zero prints as `0`.
pub fn format_g17(x: f64) -> String {
    assert!(x.is_finite(), "cannot format non-finite value");
    if x == 0.0 {
        return "0".into();
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
