//! Multiprecision complex scalars and dense matrices on top of MPFR.
//!
//! Every value carries its own significand precision; binary operations
//! produce a result at the larger of the two operand precisions. Exponent
//! range is effectively unbounded, which matters for fast-growing moment
//! sequences (the lognormal `S_n = e^{n²/2}` leaves `f64` range at `n ≈ 38`).

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use rug::float::{Constant, Round};
use rug::ops::NegAssign;
use rug::Float;

/// Default working precision in significand bits.
pub const DEFAULT_PRECISION: u32 = 53;

/// A real number at a fixed working precision.
pub type Real = Float;

/// Zero at precision `prec`.
pub fn real(prec: u32, value: f64) -> Real {
    Float::with_val(prec, value)
}

/// `2^exp` as an `f64`, used for precision-scaled tolerances.
pub fn pow2(exp: f64) -> f64 {
    exp.exp2()
}

/// Relative tolerance `2^(-precision / divisor)`.
pub fn precision_tolerance(precision: u32, divisor: f64) -> f64 {
    pow2(-(precision as f64) / divisor)
}

/// Complex number with MPFR real and imaginary parts.
#[derive(Clone, PartialEq)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl fmt::Debug for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e} {:+e}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl Complex {
    pub fn zero(prec: u32) -> Self {
        Complex {
            re: Float::new(prec),
            im: Float::new(prec),
        }
    }

    pub fn one(prec: u32) -> Self {
        Complex::from_f64(prec, 1.0, 0.0)
    }

    /// The imaginary unit.
    pub fn i(prec: u32) -> Self {
        Complex::from_f64(prec, 0.0, 1.0)
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        Complex {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_c64(prec: u32, z: Complex64) -> Self {
        Complex::from_f64(prec, z.re, z.im)
    }

    pub fn from_real(re: Real) -> Self {
        let im = Float::new(re.prec());
        Complex { re, im }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Complex {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// `|z|²`.
    pub fn norm_sqr(&self) -> Real {
        let prec = self.prec();
        let mut out = Float::with_val(prec, self.re.square_ref());
        out += Float::with_val(prec, self.im.square_ref());
        out
    }

    pub fn abs(&self) -> Real {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    /// Multiply by a real scalar.
    pub fn scale(&self, s: &Real) -> Self {
        let prec = self.prec().max(s.prec());
        Complex {
            re: Float::with_val(prec, &self.re * s),
            im: Float::with_val(prec, &self.im * s),
        }
    }

    /// Multiply by `i`.
    pub fn mul_i(&self) -> Self {
        Complex {
            re: -self.im.clone(),
            im: self.re.clone(),
        }
    }

    /// `self += a * b`.
    pub fn add_mul(&mut self, a: &Complex, b: &Complex) {
        self.re += &a.re * &b.re;
        self.re -= &a.im * &b.im;
        self.im += &a.re * &b.im;
        self.im += &a.im * &b.re;
    }

    /// `self -= a * b`.
    pub fn sub_mul(&mut self, a: &Complex, b: &Complex) {
        self.re -= &a.re * &b.re;
        self.re += &a.im * &b.im;
        self.im -= &a.re * &b.im;
        self.im -= &a.im * &b.re;
    }

    /// `self += conj(a) * b`.
    pub fn add_conj_mul(&mut self, a: &Complex, b: &Complex) {
        self.re += &a.re * &b.re;
        self.re += &a.im * &b.im;
        self.im += &a.re * &b.im;
        self.im -= &a.im * &b.re;
    }

    /// `self += a * conj(b)`.
    pub fn add_mul_conj(&mut self, a: &Complex, b: &Complex) {
        self.re += &a.re * &b.re;
        self.re += &a.im * &b.im;
        self.im += &a.im * &b.re;
        self.im -= &a.re * &b.im;
    }

    pub fn recip(&self) -> Self {
        let d = self.norm_sqr();
        Complex {
            re: Float::with_val(d.prec(), &self.re / &d),
            im: -Float::with_val(d.prec(), &self.im / &d),
        }
    }

    pub fn div(&self, other: &Complex) -> Self {
        self * &other.recip()
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        Complex {
            re: Float::with_val(prec, &self.re),
            im: Float::with_val(prec, &self.im),
        }
    }
}

impl Add for &Complex {
    type Output = Complex;
    fn add(self, rhs: &Complex) -> Complex {
        let prec = self.prec().max(rhs.prec());
        Complex {
            re: Float::with_val(prec, &self.re + &rhs.re),
            im: Float::with_val(prec, &self.im + &rhs.im),
        }
    }
}

impl Sub for &Complex {
    type Output = Complex;
    fn sub(self, rhs: &Complex) -> Complex {
        let prec = self.prec().max(rhs.prec());
        Complex {
            re: Float::with_val(prec, &self.re - &rhs.re),
            im: Float::with_val(prec, &self.im - &rhs.im),
        }
    }
}

impl Mul for &Complex {
    type Output = Complex;
    fn mul(self, rhs: &Complex) -> Complex {
        let mut out = Complex::zero(self.prec().max(rhs.prec()));
        out.add_mul(self, rhs);
        out
    }
}

impl Neg for Complex {
    type Output = Complex;
    fn neg(mut self) -> Complex {
        self.re.neg_assign();
        self.im.neg_assign();
        self
    }
}

impl AddAssign<&Complex> for Complex {
    fn add_assign(&mut self, rhs: &Complex) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl SubAssign<&Complex> for Complex {
    fn sub_assign(&mut self, rhs: &Complex) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

/// `⟨a, b⟩ = Σ a_i · conj(b_i)`: linear in the first slot.
pub fn inner(a: &[Complex], b: &[Complex]) -> Complex {
    debug_assert_eq!(a.len(), b.len());
    let prec = a.first().map_or(DEFAULT_PRECISION, Complex::prec);
    let mut acc = Complex::zero(prec);
    for (x, y) in a.iter().zip(b) {
        acc.add_mul_conj(x, y);
    }
    acc
}

pub fn norm_sqr(a: &[Complex]) -> Real {
    let prec = a.first().map_or(DEFAULT_PRECISION, Complex::prec);
    let mut acc = Float::new(prec);
    for x in a {
        acc += Float::with_val(prec, x.re.square_ref());
        acc += Float::with_val(prec, x.im.square_ref());
    }
    acc
}

pub fn norm(a: &[Complex]) -> Real {
    norm_sqr(a).sqrt()
}

/// `y += alpha · x`.
pub fn axpy(y: &mut [Complex], alpha: &Complex, x: &[Complex]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        yi.add_mul(alpha, xi);
    }
}

/// `y -= alpha · x`.
pub fn axmy(y: &mut [Complex], alpha: &Complex, x: &[Complex]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        yi.sub_mul(alpha, xi);
    }
}

pub fn scale_vec(v: &mut [Complex], s: &Real) {
    for x in v {
        x.re *= s;
        x.im *= s;
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct MpMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl fmt::Debug for MpMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MpMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<_> = (0..self.cols).map(|c| self[(r, c)].to_c64()).collect();
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for MpMatrix {
    type Output = Complex;
    fn index(&self, (r, c): (usize, usize)) -> &Complex {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for MpMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex {
        &mut self.data[r * self.cols + c]
    }
}

impl MpMatrix {
    pub fn zeros(prec: u32, rows: usize, cols: usize) -> Self {
        MpMatrix {
            rows,
            cols,
            data: vec![Complex::zero(prec); rows * cols],
        }
    }

    pub fn identity(prec: u32, n: usize) -> Self {
        let mut m = MpMatrix::zeros(prec, n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one(prec);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        MpMatrix { rows, cols, data }
    }

    pub fn from_c64(prec: u32, m: &nalgebra::DMatrix<Complex64>) -> Self {
        MpMatrix::from_fn(m.nrows(), m.ncols(), |r, c| Complex::from_c64(prec, m[(r, c)]))
    }

    pub fn to_c64(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)].to_c64())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn prec(&self) -> u32 {
        self.data.first().map_or(DEFAULT_PRECISION, Complex::prec)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, r: usize) -> &[Complex] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        MpMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        MpMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].clone())
    }

    pub fn matmul(&self, rhs: &MpMatrix) -> MpMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let prec = self.prec().max(rhs.prec());
        let mut out = MpMatrix::zeros(prec, self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let idx = r * rhs.cols + c;
                    out.data[idx].add_mul(a, &rhs[(k, c)]);
                }
            }
        }
        out
    }

    /// Largest entry modulus of `self - self*`.
    pub fn hermitian_defect(&self) -> Real {
        let mut worst = Float::new(self.prec());
        for r in 0..self.rows {
            for c in r..self.cols {
                let d = (&self[(r, c)] - &self[(c, r)].conj()).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> Real {
        let mut worst = Float::new(self.prec());
        for x in &self.data {
            let a = x.abs();
            if a > worst {
                worst = a;
            }
        }
        worst
    }

    /// Replace by `(self + self*) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for r in 0..n {
            let d = &mut self[(r, r)];
            d.im = Float::new(d.prec());
            for c in r + 1..n {
                let mut avg = &self[(r, c)] + &self[(c, r)].conj();
                avg.re /= 2u32;
                avg.im /= 2u32;
                self[(c, r)] = avg.conj();
                self[(r, c)] = avg;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Complex::is_zero)
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<Real>,
    /// Column `j` of `vectors` is the unit eigenvector for `values[j]`, stored
    /// as `vectors[j]`.
    pub vectors: Option<Vec<Vec<Complex>>>,
}

/// Error returned when the QL iteration fails to converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigenNoConvergence;

/// Hermitian eigensolver: Householder reduction to a real symmetric tridiagonal
/// matrix followed by implicit QL with Wilkinson shifts.
///
/// Only the lower triangle of `a` is trusted; the input is assumed Hermitian.
pub fn hermitian_eigen(a: &MpMatrix, want_vectors: bool) -> Result<HermitianEigen, EigenNoConvergence> {
    assert!(a.is_square());
    let n = a.rows();
    let prec = a.prec();
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: want_vectors.then(Vec::new),
        });
    }

    let (diag, offdiag, q) = tridiagonalize(a, want_vectors);

    // Rotate the complex sub-diagonal onto the non-negative reals with a
    // diagonal unitary, so that T = P T_r P*.
    let mut phases = vec![Complex::one(prec); n];
    let mut e = Vec::with_capacity(n);
    for (j, off) in offdiag.iter().enumerate() {
        let mag = off.abs();
        if mag.is_zero() {
            phases[j + 1] = phases[j].clone();
        } else {
            let unit = Complex {
                re: Float::with_val(prec, &off.re / &mag),
                im: Float::with_val(prec, &off.im / &mag),
            };
            phases[j + 1] = &phases[j] * &unit;
        }
        e.push(mag);
    }
    e.push(Float::new(prec));
    let mut d = diag;

    let mut z = if want_vectors {
        let mut cols = vec![vec![Float::new(prec); n]; n];
        for (i, col) in cols.iter_mut().enumerate() {
            col[i] = Float::with_val(prec, 1);
        }
        Some(cols)
    } else {
        None
    };
    tridiagonal_ql(&mut d, &mut e, z.as_mut(), prec)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<Real> = order.iter().map(|&i| d[i].clone()).collect();

    let vectors = match (z, q) {
        (Some(z), Some(q)) => {
            // Columns of Q P, then multiply by the real eigenvectors of T_r.
            let mut qp = q;
            for r in 0..n {
                for c in 0..n {
                    let v = &qp[(r, c)] * &phases[c];
                    qp[(r, c)] = v;
                }
            }
            let mut out = Vec::with_capacity(n);
            for &j in &order {
                let zc = &z[j];
                let mut v = vec![Complex::zero(prec); n];
                for (r, vr) in v.iter_mut().enumerate() {
                    for (c, zval) in zc.iter().enumerate() {
                        if zval.is_zero() {
                            continue;
                        }
                        let q = &qp[(r, c)];
                        vr.re += &q.re * zval;
                        vr.im += &q.im * zval;
                    }
                }
                out.push(v);
            }
            Some(out)
        }
        _ => None,
    };
    Ok(HermitianEigen { values, vectors })
}

/// Householder tridiagonalization `A = Q T Q*`. Returns the real diagonal of
/// `T`, its complex sub-diagonal `T[k+1][k]`, and `Q` when requested.
fn tridiagonalize(a: &MpMatrix, want_q: bool) -> (Vec<Real>, Vec<Complex>, Option<MpMatrix>) {
    let n = a.rows();
    let prec = a.prec();
    let mut m = a.clone();
    // Work from the lower triangle only.
    for r in 0..n {
        for c in r + 1..n {
            m[(r, c)] = m[(c, r)].conj();
        }
    }
    let mut q = want_q.then(|| MpMatrix::identity(prec, n));
    let two = Float::with_val(prec, 2);

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut v: Vec<Complex> = (k + 1..n).map(|i| m[(i, k)].clone()).collect();
        let alpha_norm = norm(&v);
        if alpha_norm.is_zero() {
            continue;
        }
        let x0_abs = v[0].abs();
        let phase = if x0_abs.is_zero() {
            Complex::one(prec)
        } else {
            Complex {
                re: Float::with_val(prec, &v[0].re / &x0_abs),
                im: Float::with_val(prec, &v[0].im / &x0_abs),
            }
        };
        // alpha = -phase * ‖x‖ keeps v[0] = x0 - alpha free of cancellation.
        let alpha = -phase.scale(&alpha_norm);
        v[0] -= &alpha;
        let vnorm2 = norm_sqr(&v);
        if vnorm2.is_zero() {
            continue;
        }
        let tau = Float::with_val(prec, &two / &vnorm2);

        // p = tau * A22 v
        let mut p = vec![Complex::zero(prec); len];
        for (i, pi) in p.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                pi.add_mul(&m[(k + 1 + i, k + 1 + j)], vj);
            }
            pi.re *= &tau;
            pi.im *= &tau;
        }
        // kk = tau/2 * v* p  (real for Hermitian A22)
        let vhp = inner(&p, &v);
        let mut kk = Float::with_val(prec, &vhp.re * &tau);
        kk /= 2u32;
        let kk = Complex::from_real(kk);
        let mut w = p;
        axmy(&mut w, &kk, &v);
        // A22 -= v w* + w v*
        for i in 0..len {
            for j in 0..=i {
                let mut entry = m[(k + 1 + i, k + 1 + j)].clone();
                let mut t = Complex::zero(prec);
                t.add_mul_conj(&v[i], &w[j]);
                t.add_mul_conj(&w[i], &v[j]);
                entry -= &t;
                if i == j {
                    entry.im = Float::new(prec);
                    m[(k + 1 + i, k + 1 + j)] = entry;
                } else {
                    m[(k + 1 + j, k + 1 + i)] = entry.conj();
                    m[(k + 1 + i, k + 1 + j)] = entry;
                }
            }
        }
        m[(k + 1, k)] = alpha.clone();
        m[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            m[(i, k)] = Complex::zero(prec);
            m[(k, i)] = Complex::zero(prec);
        }

        if let Some(q) = q.as_mut() {
            // Q <- Q (I - tau v v*) on columns k+1..n.
            for r in 0..n {
                let mut s = Complex::zero(prec);
                for (j, vj) in v.iter().enumerate() {
                    s.add_mul(&q[(r, k + 1 + j)], vj);
                }
                s.re *= &tau;
                s.im *= &tau;
                for (j, vj) in v.iter().enumerate() {
                    let cell = &mut q[(r, k + 1 + j)];
                    cell.sub_mul_conj_rhs(&s, vj);
                }
            }
        }
    }

    let diag = (0..n).map(|i| m[(i, i)].re.clone()).collect();
    let off = (0..n.saturating_sub(1)).map(|i| m[(i + 1, i)].clone()).collect();
    (diag, off, q)
}

impl Complex {
    /// `self -= a * conj(b)`.
    fn sub_mul_conj_rhs(&mut self, a: &Complex, b: &Complex) {
        self.re -= &a.re * &b.re;
        self.re -= &a.im * &b.im;
        self.im -= &a.im * &b.re;
        self.im += &a.re * &b.im;
    }
}

/// Implicit QL with Wilkinson shifts on a real symmetric tridiagonal matrix.
/// `e[i]` couples `d[i]` and `d[i+1]`; `e[n-1]` is ignored. Rotations are
/// accumulated into the columns `z[i]` when given.
fn tridiagonal_ql(
    d: &mut [Real],
    e: &mut [Real],
    mut z: Option<&mut Vec<Vec<Real>>>,
    prec: u32,
) -> Result<(), EigenNoConvergence> {
    let n = d.len();
    let eps = Float::with_val(prec, Float::u_exp(1, 1 - prec as i32));
    let one = Float::with_val(prec, 1);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = Float::with_val(prec, d[m].abs_ref()) + Float::with_val(prec, d[m + 1].abs_ref());
                let lim = Float::with_val(prec, &eps * &dd);
                if Float::with_val(prec, e[m].abs_ref()) <= lim {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 30 * (prec as usize / 53 + 1) + 30 {
                return Err(EigenNoConvergence);
            }
            let mut g = Float::with_val(prec, &d[l + 1] - &d[l]);
            g /= Float::with_val(prec, &e[l] * 2u32);
            let mut r = Float::with_val(prec, g.hypot_ref(&one));
            let signed_r = if g.is_sign_negative() { -r.clone() } else { r.clone() };
            g = Float::with_val(prec, &d[m] - &d[l]) + Float::with_val(prec, &e[l] / Float::with_val(prec, &g + &signed_r));
            let mut s = Float::with_val(prec, 1);
            let mut c = Float::with_val(prec, 1);
            let mut p = Float::new(prec);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = Float::with_val(prec, &s * &e[i]);
                let b = Float::with_val(prec, &c * &e[i]);
                r = Float::with_val(prec, f.hypot_ref(&g));
                e[i + 1] = r.clone();
                if r.is_zero() {
                    d[i + 1] -= &p;
                    e[m] = Float::new(prec);
                    underflow = true;
                    break;
                }
                s = Float::with_val(prec, &f / &r);
                c = Float::with_val(prec, &g / &r);
                g = Float::with_val(prec, &d[i + 1] - &p);
                r = Float::with_val(prec, &d[i] - &g) * &s + Float::with_val(prec, &c * &b) * 2u32;
                p = Float::with_val(prec, &s * &r);
                d[i + 1] = Float::with_val(prec, &g + &p);
                g = Float::with_val(prec, &c * &r) - &b;
                if let Some(z) = z.as_deref_mut() {
                    let (left, right) = z.split_at_mut(i + 1);
                    let zi = &mut left[i];
                    let zi1 = &mut right[0];
                    for k in 0..n {
                        let f = zi1[k].clone();
                        let mut new_i1 = Float::with_val(prec, &s * &zi[k]);
                        new_i1 += &c * &f;
                        let mut new_i = Float::with_val(prec, &c * &zi[k]);
                        new_i -= &s * &f;
                        zi1[k] = new_i1;
                        zi[k] = new_i;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= &p;
            e[l] = g;
            e[m] = Float::new(prec);
        }
    }
    Ok(())
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: MpMatrix,
    perm: Vec<usize>,
}

/// Raised when a pivot vanishes to working precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularMatrix;

impl Lu {
    pub fn new(a: &MpMatrix) -> Result<Self, SingularMatrix> {
        assert!(a.is_square());
        let n = a.rows();
        let prec = a.prec();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let tiny = Float::with_val(prec, &scale * Float::with_val(prec, Float::u_exp(1, -(prec as i32))));
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].norm_sqr();
            for r in k + 1..n {
                let v = lu[(r, k)].norm_sqr();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best.is_zero() || best.clone().sqrt() <= tiny {
                return Err(SingularMatrix);
            }
            if piv != k {
                for c in 0..n {
                    lu.data.swap(k * n + c, piv * n + c);
                }
                perm.swap(k, piv);
            }
            let inv = lu[(k, k)].recip();
            for r in k + 1..n {
                let factor = &lu[(r, k)] * &inv;
                for c in k + 1..n {
                    let upd = &factor * &lu[(k, c)];
                    lu[(r, c)] -= &upd;
                }
                lu[(r, k)] = factor;
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &MpMatrix) -> MpMatrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n);
        let mut x = MpMatrix::from_fn(n, b.cols(), |r, c| b[(self.perm[r], c)].clone());
        for c in 0..b.cols() {
            for r in 0..n {
                for k in 0..r {
                    let upd = &self.lu[(r, k)] * &x[(k, c)];
                    x[(r, c)] -= &upd;
                }
            }
            for r in (0..n).rev() {
                for k in r + 1..n {
                    let upd = &self.lu[(r, k)] * &x[(k, c)];
                    x[(r, c)] -= &upd;
                }
                x[(r, c)] = x[(r, c)].div(&self.lu[(r, r)]);
            }
        }
        x
    }

    pub fn inverse(&self) -> MpMatrix {
        let n = self.lu.rows();
        self.solve(&MpMatrix::identity(self.lu.prec(), n))
    }
}

/// `e^x` at precision `prec`.
pub fn exp(prec: u32, x: &Real) -> Real {
    Float::with_val(prec, x.exp_ref())
}

/// π at precision `prec`.
pub fn pi(prec: u32) -> Real {
    Float::with_val(prec, Constant::Pi)
}

/// Parse a decimal string into a real at precision `prec`.
pub fn parse_real(prec: u32, s: &str) -> Option<Real> {
    let parsed = Float::parse(s.trim()).ok()?;
    Some(Float::with_val_round(prec, parsed, Round::Nearest).0)
}

/// Decimal string that round-trips at the value's precision. Exact integers
/// below 2^64 in magnitude print without exponent.
pub fn format_real(x: &Real) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    if x.is_integer() {
        if let Some(i) = x.to_integer() {
            if i.significant_bits() <= 64 {
                return i.to_string();
            }
        }
    }
    let digits = (x.prec() as f64 * std::f64::consts::LOG10_2).ceil() as usize + 1;
    x.to_string_radix(10, Some(digits))
}
