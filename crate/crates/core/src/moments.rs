//! Moment sequences, block Hankel matrices and the solvability test.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::mp::{self, hermitian_eigen, Complex, MpMatrix};
use crate::{Error, Result};

/// Prescribed moments `S_0, …, S_{L-1}`, each a Hermitian `N×N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSequence {
    block_size: usize,
    moments: Vec<MpMatrix>,
    precision: u32,
}

/// `Γ_n`, the block Hankel matrix of order `n`.
#[derive(Clone, Debug)]
pub struct BlockHankel {
    pub order: usize,
    pub block_size: usize,
    pub entries: MpMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SolvabilityVerdict {
    SolvableWithinTolerance,
    RejectedAtOrder { order: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolvabilityReport {
    pub checked_depth: usize,
    /// Smallest eigenvalue of each `Γ_n`, `n = 0..=checked_depth`.
    pub min_eigenvalue_per_order: Vec<f64>,
    /// Smallest eigenvalue divided by `max(λ_max, 1)`; stays finite even when
    /// the eigenvalues themselves overflow `f64`.
    pub relative_min_eigenvalue_per_order: Vec<f64>,
    pub epsilon_psd: f64,
    pub verdict: SolvabilityVerdict,
}

impl SolvabilityReport {
    pub fn is_solvable(&self) -> bool {
        self.verdict == SolvabilityVerdict::SolvableWithinTolerance
    }
}

impl MomentSequence {
    /// Validates shapes and Hermiticity. Moments whose Hermitian defect is
    /// below `2^(-p/2)·max(1, max|S_n|)` are symmetrized; larger defects are
    /// rejected.
    pub fn new(block_size: usize, moments: Vec<MpMatrix>, precision: u32) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidSequence("block size must be positive".into()));
        }
        if moments.len() < 2 {
            return Err(Error::InvalidSequence(format!(
                "need at least S_0 and S_1, got {} moment(s)",
                moments.len()
            )));
        }
        if precision < 2 {
            return Err(Error::InvalidSequence(format!("precision {precision} is too small")));
        }
        let tol = mp::precision_tolerance(precision, 2.0);
        let mut out = Vec::with_capacity(moments.len());
        for (index, m) in moments.into_iter().enumerate() {
            if m.rows() != block_size || m.cols() != block_size {
                return Err(Error::InvalidSequence(format!(
                    "S_{index} is {}x{}, expected {block_size}x{block_size}",
                    m.rows(),
                    m.cols()
                )));
            }
            let mut m = MpMatrix::from_fn(block_size, block_size, |r, c| m[(r, c)].with_prec(precision));
            let defect = m.hermitian_defect();
            let scale = m.max_abs().to_f64().max(1.0);
            let limit = Float::with_val(precision, tol) * scale;
            if defect > limit {
                return Err(Error::NonHermitian {
                    index,
                    defect: defect.to_f64(),
                });
            }
            m.symmetrize();
            out.push(m);
        }
        Ok(MomentSequence {
            block_size,
            moments: out,
            precision,
        })
    }

    /// Scalar (`N = 1`) sequence from real values.
    pub fn from_real_scalars(values: &[f64], precision: u32) -> Result<Self> {
        let moments = values
            .iter()
            .map(|&v| MpMatrix::from_fn(1, 1, |_, _| Complex::from_f64(precision, v, 0.0)))
            .collect();
        MomentSequence::new(1, moments, precision)
    }

    pub fn from_c64(block_size: usize, moments: &[DMatrix<Complex64>], precision: u32) -> Result<Self> {
        let moments = moments.iter().map(|m| MpMatrix::from_c64(precision, m)).collect();
        MomentSequence::new(block_size, moments, precision)
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Number of moments `L`.
    pub fn len(&self) -> usize {
        self.moments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moments.is_empty()
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn moment(&self, index: usize) -> Option<&MpMatrix> {
        self.moments.get(index)
    }

    pub fn moments(&self) -> &[MpMatrix] {
        &self.moments
    }

    /// `S_index` rounded to `f64`.
    pub fn moment_c64(&self, index: usize) -> Option<DMatrix<Complex64>> {
        self.moments.get(index).map(MpMatrix::to_c64)
    }

    /// Same moments re-rounded to another working precision.
    pub fn with_precision(&self, precision: u32) -> Self {
        let moments = self
            .moments
            .iter()
            .map(|m| MpMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].with_prec(precision)))
            .collect();
        MomentSequence {
            block_size: self.block_size,
            moments,
            precision,
        }
    }

    /// Keep only `S_0, …, S_{count-1}`.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count < 2 || count > self.len() {
            return Err(Error::InsufficientMoments(format!(
                "cannot truncate {} moments to {count}",
                self.len()
            )));
        }
        Ok(MomentSequence {
            block_size: self.block_size,
            moments: self.moments[..count].to_vec(),
            precision: self.precision,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.moments.iter().all(MpMatrix::is_zero)
    }

    /// Deepest order `n` with `Γ_n` available: `2n ≤ L-1`.
    pub fn max_depth(&self) -> usize {
        (self.len() - 1) / 2
    }

    /// Largest scalar section size `M` whose Hankel entries are all available.
    pub fn max_section(&self) -> usize {
        self.block_size * self.len().div_ceil(2)
    }

    /// `Γ_{row,col}` with `row = rN+j`, `col = tN+n`, i.e. entry `(j,n)` of `S_{r+t}`.
    pub fn hankel_entry(&self, row: usize, col: usize) -> Result<&Complex> {
        let n = self.block_size;
        let (r, j) = (row / n, row % n);
        let (t, k) = (col / n, col % n);
        self.moments
            .get(r + t)
            .map(|s| &s[(j, k)])
            .ok_or_else(|| {
                Error::IndexOutOfRange(format!(
                    "Γ[{row},{col}] needs S_{} but only {} moments are given",
                    r + t,
                    self.len()
                ))
            })
    }

    pub fn build_gamma(&self, order: usize) -> Result<BlockHankel> {
        if 2 * order > self.len() - 1 {
            return Err(Error::InsufficientMoments(format!(
                "Γ_{order} needs S_0..S_{} but only {} moments are given",
                2 * order,
                self.len()
            )));
        }
        let size = (order + 1) * self.block_size;
        Ok(BlockHankel {
            order,
            block_size: self.block_size,
            entries: self.gamma_section(size)?,
        })
    }

    /// Leading `M×M` scalar section of the infinite Hankel matrix `Γ`.
    pub fn gamma_section(&self, size: usize) -> Result<MpMatrix> {
        if size > self.max_section() {
            return Err(Error::InsufficientMoments(format!(
                "section of size {size} needs more than the {} moments given (max section {})",
                self.len(),
                self.max_section()
            )));
        }
        let mut out = MpMatrix::zeros(self.precision, size, size);
        for r in 0..size {
            for c in 0..size {
                out[(r, c)] = self.hankel_entry(r, c)?.clone();
            }
        }
        Ok(out)
    }

    /// Checks `Γ_n ≥ 0` for `n = 0..=depth`. `epsilon_psd` defaults to `2^(-p/2)`.
    pub fn validate_solvability(&self, depth: usize, epsilon_psd: Option<f64>) -> Result<SolvabilityReport> {
        let eps = epsilon_psd.unwrap_or_else(|| mp::precision_tolerance(self.precision, 2.0));
        // Γ_depth contains every smaller order, and Γ_n is its leading corner.
        let full = self.build_gamma(depth)?.entries;
        let n = self.block_size;
        let mut mins = Vec::with_capacity(depth + 1);
        let mut rel = Vec::with_capacity(depth + 1);
        let mut verdict = SolvabilityVerdict::SolvableWithinTolerance;
        for order in 0..=depth {
            let size = (order + 1) * n;
            let corner = MpMatrix::from_fn(size, size, |r, c| full[(r, c)].clone());
            let eig = hermitian_eigen(&corner, false)
                .map_err(|_| Error::Singular(format!("eigenvalues of Γ_{order} did not converge")))?;
            let lmax = eig.values.first().cloned().unwrap_or_else(|| Float::new(self.precision));
            let lmin = eig.values.last().cloned().unwrap_or_else(|| Float::new(self.precision));
            let scale = if lmax > 1 { lmax } else { Float::with_val(self.precision, 1) };
            let ratio = Float::with_val(self.precision, &lmin / &scale);
            mins.push(lmin.to_f64());
            rel.push(ratio.to_f64());
            if verdict == SolvabilityVerdict::SolvableWithinTolerance && ratio < -eps {
                verdict = SolvabilityVerdict::RejectedAtOrder { order };
            }
        }
        Ok(SolvabilityReport {
            checked_depth: depth,
            min_eigenvalue_per_order: mins,
            relative_min_eigenvalue_per_order: rel,
            epsilon_psd: eps,
            verdict,
        })
    }

    /// Parses the moment-file format. `precision` overrides `precision_bits`
    /// from the file; the default is 53.
    pub fn from_json_str(text: &str, precision: Option<u32>) -> Result<Self> {
        let root: Value = serde_json::from_str(text)?;
        let obj = root
            .as_object()
            .ok_or_else(|| Error::Format("top level must be an object".into()))?;
        let n = obj
            .get("N")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("missing positive integer field \"N\"".into()))? as usize;
        let file_prec = match obj.get("precision_bits") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .filter(|&p| p >= 2 && p <= u32::MAX as u64)
                    .ok_or_else(|| Error::Format("\"precision_bits\" must be a positive integer".into()))?
                    as u32,
            ),
        };
        let prec = precision.or(file_prec).unwrap_or(mp::DEFAULT_PRECISION);
        let list = obj
            .get("moments")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Format("missing array field \"moments\"".into()))?;
        let mut moments = Vec::with_capacity(list.len());
        for (i, m) in list.iter().enumerate() {
            moments.push(parse_matrix(m, n, prec).map_err(|e| Error::Format(format!("moment {i}: {e}")))?);
        }
        MomentSequence::new(n, moments, prec)
    }

    pub fn to_json_value(&self) -> Value {
        let moments: Vec<Value> = self
            .moments
            .iter()
            .map(|m| {
                Value::Array(
                    (0..m.rows())
                        .map(|r| {
                            Value::Array(
                                m.row(r)
                                    .iter()
                                    .map(|z| json!([mp::format_real(&z.re), mp::format_real(&z.im)]))
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        json!({
            "N": self.block_size,
            "precision_bits": self.precision,
            "moments": moments,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("json values always serialize");
        s.push('\n');
        s
    }

    pub fn read(path: impl AsRef<Path>, precision: Option<u32>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        MomentSequence::from_json_str(&text, precision)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

/// Accepts nested `N×N` rows or a flat row-major list of `N²` entries.
fn parse_matrix(value: &Value, n: usize, prec: u32) -> std::result::Result<MpMatrix, String> {
    let arr = value.as_array().ok_or("expected an array")?;
    let entries: Vec<&Value> = if arr.len() == n && arr.iter().all(|row| is_row(row, n)) {
        arr.iter().flat_map(|row| row.as_array().unwrap().iter()).collect()
    } else if arr.len() == n * n {
        arr.iter().collect()
    } else {
        return Err(format!("expected {n}x{n} entries"));
    };
    let mut parsed = Vec::with_capacity(n * n);
    for e in entries {
        parsed.push(parse_complex(e, prec)?);
    }
    let mut it = parsed.into_iter();
    Ok(MpMatrix::from_fn(n, n, |_, _| it.next().unwrap()))
}

fn is_row(v: &Value, n: usize) -> bool {
    match v.as_array() {
        // A row of complex pairs; `[re, im]` itself has scalar elements.
        Some(a) => a.len() == n && a.iter().all(|e| e.is_array()),
        None => false,
    }
}

fn parse_complex(v: &Value, prec: u32) -> std::result::Result<Complex, String> {
    match v {
        Value::Array(pair) if pair.len() == 2 => Ok(Complex {
            re: parse_number(&pair[0], prec)?,
            im: parse_number(&pair[1], prec)?,
        }),
        Value::Number(_) | Value::String(_) => Ok(Complex::from_real(parse_number(v, prec)?)),
        _ => Err(format!("cannot read complex number from {v}")),
    }
}

fn parse_number(v: &Value, prec: u32) -> std::result::Result<Float, String> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        _ => return Err(format!("expected a number, got {v}")),
    };
    mp::parse_real(prec, &text).ok_or_else(|| format!("cannot parse {text:?} as a real number"))
}
