//! Parsers for grid, Schur parameter and interval arguments.

use std::path::Path;
use std::str::FromStr;

use hamburger::{CMatrix, Complex64, SchurParameter};
use serde_json::Value;

/// A comma- or semicolon-separated list of complex numbers (`2i,1+1i,-1+2i`),
/// or a rectangle `rect:RE0:RE1:IM0:IM1:STEP` sampled row by row.
pub fn grid(spec: &str) -> Result<Vec<Complex64>, String> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("rect:") {
        let parts: Vec<f64> = rest
            .split(':')
            .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad number {s:?} in rectangle")))
            .collect::<Result<_, _>>()?;
        let [re0, re1, im0, im1, step] = parts[..] else {
            return Err("rectangle needs RE0:RE1:IM0:IM1:STEP".into());
        };
        if !(step > 0.0) || re1 < re0 || im1 < im0 {
            return Err("rectangle needs RE0 ≤ RE1, IM0 ≤ IM1 and STEP > 0".into());
        }
        let nr = ((re1 - re0) / step + 1e-9).floor() as usize + 1;
        let ni = ((im1 - im0) / step + 1e-9).floor() as usize + 1;
        let mut out = Vec::with_capacity(nr * ni);
        for j in 0..ni {
            for k in 0..nr {
                out.push(Complex64::new(re0 + k as f64 * step, im0 + j as f64 * step));
            }
        }
        return Ok(out);
    }
    let out: Vec<Complex64> = spec
        .split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(complex)
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err("empty grid".into());
    }
    Ok(out)
}

pub fn complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    Complex64::from_str(&t).map_err(|_| format!("cannot parse complex number {s:?}"))
}

/// `zero`, `scalar:C`, `mobius:A:SCALE` or `file:PATH` (a JSON `ω̂×δ̂` matrix
/// of `[re, im]` pairs).
pub fn schur(spec: &str) -> Result<SchurParameter, String> {
    let spec = spec.trim();
    if spec == "zero" || spec == "0" {
        return Ok(SchurParameter::Zero);
    }
    if let Some(c) = spec.strip_prefix("scalar:") {
        return Ok(SchurParameter::Scalar(complex(c)?));
    }
    if let Some(rest) = spec.strip_prefix("mobius:") {
        let mut it = rest.splitn(2, ':');
        let a = complex(it.next().unwrap_or(""))?;
        let scale = match it.next() {
            Some(s) => complex(s)?,
            None => Complex64::new(1.0, 0.0),
        };
        return Ok(SchurParameter::Mobius { a, scale });
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return constant_matrix(Path::new(path)).map(SchurParameter::Constant);
    }
    Err(format!("unknown Schur parameter {spec:?}; use zero, scalar:C, mobius:A:SCALE or file:PATH"))
}

fn number(v: &Value) -> Result<f64, String> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| "number out of range".to_string()),
        Value::String(s) => s.trim().parse().map_err(|_| format!("bad number {s:?}")),
        _ => Err("expected a number".into()),
    }
}

fn constant_matrix(path: &Path) -> Result<CMatrix, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let rows = value.as_array().ok_or("matrix file must hold an array of rows")?;
    let mut entries = Vec::new();
    let mut cols = None;
    for row in rows {
        let row = row.as_array().ok_or("each row must be an array")?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err("rows differ in length".into());
        }
        for e in row {
            let pair = e.as_array().filter(|p| p.len() == 2).ok_or("entries must be [re, im] pairs")?;
            entries.push(Complex64::new(number(&pair[0])?, number(&pair[1])?));
        }
    }
    let cols = cols.unwrap_or(0);
    Ok(CMatrix::from_row_slice(rows.len(), cols, &entries))
}

/// `A,B` with `A < B`.
pub fn interval(spec: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let [a, b] = parts[..] else {
        return Err(format!("interval {spec:?} must be A,B"));
    };
    let a: f64 = a.parse().map_err(|_| format!("bad interval start {a:?}"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad interval end {b:?}"))?;
    if !(a < b) {
        return Err(format!("interval {spec:?} is empty"));
    }
    Ok((a, b))
}
