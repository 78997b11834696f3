//! Independent references used to certify the pipeline: moment generators,
//! direct Stieltjes transforms, the lognormal indeterminacy witness and the
//! Carleman hint.
//!
//! Nothing here reuses the pipeline's linear algebra. Eigenvalues come from a
//! cyclic Jacobi method and integrals from adaptive Gauss–Kronrod quadrature,
//! both in `f64`.

use std::collections::BinaryHeap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::cayley::AtomicMeasure;
use crate::moments::MomentSequence;
use crate::mp::{Complex, MpMatrix};
use crate::{CMatrix, Error, Result};

type Density = dyn Fn(f64) -> CMatrix + Send + Sync;

/// Matrix density on `(lower, upper)`; either bound may be infinite.
#[derive(Clone)]
pub struct DensityMeasure {
    pub block_size: usize,
    pub lower: f64,
    pub upper: f64,
    /// Integrate in `u = ln x` (requires `lower = 0`).
    pub log_substitution: bool,
    density: Arc<Density>,
}

impl std::fmt::Debug for DensityMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityMeasure")
            .field("block_size", &self.block_size)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("log_substitution", &self.log_substitution)
            .finish()
    }
}

impl DensityMeasure {
    pub fn new(
        block_size: usize,
        lower: f64,
        upper: f64,
        log_substitution: bool,
        density: impl Fn(f64) -> CMatrix + Send + Sync + 'static,
    ) -> Self {
        DensityMeasure {
            block_size,
            lower,
            upper,
            log_substitution,
            density: Arc::new(density),
        }
    }

    pub fn at(&self, x: f64) -> CMatrix {
        (self.density)(x)
    }

    /// `∫ g(x) f(x) dx` with `g` scalar.
    pub fn integrate(&self, g: impl Fn(f64) -> Complex64, rel_tol: f64) -> Result<CMatrix> {
        let n = self.block_size;
        let integrand = |x: f64| -> CMatrix {
            let f = self.at(x);
            if f.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
                return CMatrix::zeros(n, n);
            }
            f * g(x)
        };
        if self.log_substitution {
            let lo = if self.lower > 0.0 { self.lower.ln() } else { f64::NEG_INFINITY };
            let hi = self.upper.ln();
            integrate(
                |u| {
                    let x = u.exp();
                    if x == 0.0 || !x.is_finite() {
                        return CMatrix::zeros(n, n);
                    }
                    let v = integrand(x) * Complex64::new(x, 0.0);
                    if v.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                        v
                    } else {
                        CMatrix::zeros(n, n)
                    }
                },
                lo,
                hi,
                rel_tol,
                n,
            )
        } else {
            integrate(integrand, self.lower, self.upper, rel_tol, n)
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

struct Piece {
    a: f64,
    b: f64,
    value: CMatrix,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod(f: &impl Fn(f64) -> CMatrix, a: f64, b: f64, dim: usize) -> (CMatrix, f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut k = CMatrix::zeros(dim, dim);
    let mut g = CMatrix::zeros(dim, dim);
    let mut abs_sum = 0.0;
    for i in 0..8 {
        let nodes: &[f64] = if i == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for s in nodes {
            let fx = f(centre + s * half * XGK[i]);
            abs_sum += WGK[i] * max_abs(&fx);
            k += &fx * Complex64::new(WGK[i], 0.0);
            if i % 2 == 1 {
                g += &fx * Complex64::new(WG[i / 2], 0.0);
            }
        }
    }
    let k = k * Complex64::new(half, 0.0);
    let g = g * Complex64::new(half, 0.0);
    let err = max_abs(&(&k - &g));
    (k, err, abs_sum * half.abs())
}

/// Adaptive G7/K15 quadrature of a matrix-valued integrand. Infinite bounds
/// are mapped to finite ones first.
pub fn integrate(f: impl Fn(f64) -> CMatrix, a: f64, b: f64, rel_tol: f64, dim: usize) -> Result<CMatrix> {
    if a == b {
        return Ok(CMatrix::zeros(dim, dim));
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_finite(&f, a, b, rel_tol, dim),
        (false, false) => integrate_finite(
            &|t: f64| {
                let d = 1.0 - t * t;
                f(t / d) * Complex64::new((1.0 + t * t) / (d * d), 0.0)
            },
            -1.0,
            1.0,
            rel_tol,
            dim,
        )
        .map_err(|_| Error::QuadratureNonconvergent { a, b }),
        (true, false) => integrate_finite(
            &|t: f64| {
                let d = 1.0 - t;
                f(a + t / d) * Complex64::new(1.0 / (d * d), 0.0)
            },
            0.0,
            1.0,
            rel_tol,
            dim,
        )
        .map_err(|_| Error::QuadratureNonconvergent { a, b }),
        (false, true) => integrate_finite(
            &|t: f64| {
                let d = 1.0 - t;
                f(b - t / d) * Complex64::new(1.0 / (d * d), 0.0)
            },
            0.0,
            1.0,
            rel_tol,
            dim,
        )
        .map_err(|_| Error::QuadratureNonconvergent { a, b }),
    }
}

fn integrate_finite(f: &impl Fn(f64) -> CMatrix, a: f64, b: f64, rel_tol: f64, dim: usize) -> Result<CMatrix> {
    const MAX_PIECES: usize = 4000;
    let mut heap = BinaryHeap::new();
    let (value, error, abs_int) = kronrod(f, a, b, dim);
    let mut total = value.clone();
    let mut total_err = error;
    let mut total_abs = abs_int;
    heap.push(Piece { a, b, value, error });
    while heap.len() < MAX_PIECES {
        let floor = 50.0 * f64::EPSILON * total_abs;
        if total_err <= (rel_tol * max_abs(&total)).max(floor) {
            return Ok(total);
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1, a1) = kronrod(f, worst.a, mid, dim);
        let (v2, e2, a2) = kronrod(f, mid, worst.b, dim);
        total = total - &worst.value + &v1 + &v2;
        total_err = total_err - worst.error + e1 + e2;
        total_abs += a1 + a2;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Recompute the error sum from scratch to shed accumulated cancellation.
    let err: f64 = heap.iter().map(|p| p.error).sum();
    let mut sum = CMatrix::zeros(dim, dim);
    for p in heap.iter() {
        sum += &p.value;
    }
    if err <= (rel_tol * max_abs(&sum)).max(1e3 * f64::EPSILON * total_abs) {
        Ok(sum)
    } else {
        Err(Error::QuadratureNonconvergent { a, b })
    }
}

/// Relative tolerance for a working precision; `f64` quadrature cannot go
/// below about `1e-14`.
pub fn quadrature_tolerance(precision: u32) -> f64 {
    2f64.powf(-(precision as f64) / 2.0).max(1e-14)
}

/// `S_n = Σ_s λ_s^n W_s`, evaluated in MPFR.
pub fn atomic_moments(m: &AtomicMeasure, count: usize, precision: u32) -> Result<MomentSequence> {
    let n = m.block_size;
    let mut out = vec![MpMatrix::zeros(precision, n, n); count];
    for (atom, w) in m.atoms.iter().zip(&m.weights) {
        let a = Float::with_val(precision, *atom);
        let mut power = Float::with_val(precision, 1);
        let wmp = MpMatrix::from_c64(precision, w);
        for s in out.iter_mut() {
            for r in 0..n {
                for c in 0..n {
                    let add = wmp[(r, c)].scale(&power);
                    s[(r, c)] += &add;
                }
            }
            power *= &a;
        }
    }
    MomentSequence::new(n, out, precision)
}

/// Closed-form lognormal(0,1) moments `S_n = e^{n²/2}`.
pub fn lognormal_moments(count: usize, precision: u32) -> Result<MomentSequence> {
    let moments = (0..count)
        .map(|n| {
            let e = Float::with_val(precision, (n * n) as f64 / 2.0);
            let v = Float::with_val(precision, e.exp_ref());
            MpMatrix::from_fn(1, 1, |_, _| Complex::from_real(v.clone()))
        })
        .collect();
    MomentSequence::new(1, moments, precision)
}

/// Standard Gaussian moments: `S_{2k} = (2k-1)!!`, odd moments zero.
pub fn gaussian_moments(count: usize, precision: u32) -> Result<MomentSequence> {
    let mut df = Float::with_val(precision, 1);
    let mut moments = Vec::with_capacity(count);
    for n in 0..count {
        let v = if n % 2 == 0 {
            let v = df.clone();
            df *= (n + 1) as u32;
            v
        } else {
            Float::new(precision)
        };
        moments.push(MpMatrix::from_fn(1, 1, |_, _| Complex::from_real(v.clone())));
    }
    MomentSequence::new(1, moments, precision)
}

/// Block-diagonal sequence `diag(a_n, b_n)` of two scalar sequences.
pub fn block_diagonal(a: &MomentSequence, b: &MomentSequence) -> Result<MomentSequence> {
    let count = a.len().min(b.len());
    let prec = a.precision().max(b.precision());
    let na = a.block_size();
    let nb = b.block_size();
    let moments = (0..count)
        .map(|i| {
            let (ma, mb) = (a.moment(i).unwrap(), b.moment(i).unwrap());
            MpMatrix::from_fn(na + nb, na + nb, |r, c| {
                if r < na && c < na {
                    ma[(r, c)].with_prec(prec)
                } else if r >= na && c >= na {
                    mb[(r - na, c - na)].with_prec(prec)
                } else {
                    Complex::zero(prec)
                }
            })
        })
        .collect();
    MomentSequence::new(na + nb, moments, prec)
}

/// Moments of a density by quadrature, to relative accuracy
/// [`quadrature_tolerance`].
pub fn quadrature_moments(d: &DensityMeasure, count: usize, precision: u32) -> Result<MomentSequence> {
    let tol = quadrature_tolerance(precision);
    let mut moments = Vec::with_capacity(count);
    for n in 0..count {
        let m = d.integrate(|x| Complex64::new(x.powi(n as i32), 0.0), tol)?;
        let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        moments.push(m);
    }
    MomentSequence::from_c64(d.block_size, &moments, precision)
}

fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn standard_gaussian() -> DensityMeasure {
    DensityMeasure::new(1, f64::NEG_INFINITY, f64::INFINITY, false, |x| {
        CMatrix::from_element(1, 1, Complex64::new(gaussian_pdf(x), 0.0))
    })
}

/// Lognormal(0,1) density times `1 + ε sin(2π ln x)`.
pub fn perturbed_lognormal(epsilon: f64) -> DensityMeasure {
    DensityMeasure::new(1, 0.0, f64::INFINITY, true, move |x| {
        if x <= 0.0 {
            return CMatrix::zeros(1, 1);
        }
        let u = x.ln();
        let base = gaussian_pdf(u) / x;
        let factor = 1.0 + epsilon * (2.0 * std::f64::consts::PI * u).sin();
        CMatrix::from_element(1, 1, Complex64::new(base * factor, 0.0))
    })
}

pub fn lognormal() -> DensityMeasure {
    perturbed_lognormal(0.0)
}

pub fn zero_density(block_size: usize) -> DensityMeasure {
    DensityMeasure::new(block_size, -1.0, 1.0, false, move |_| CMatrix::zeros(block_size, block_size))
}

/// The classical witness: `f(x)` and `f(x)(1 + ε sin(2π ln x))` with `f` the
/// lognormal density share every moment. `ε = 0` yields two identical densities.
pub fn lognormal_pair(epsilon: f64) -> Result<(DensityMeasure, DensityMeasure)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} must lie in [0, 1]")));
    }
    Ok((lognormal(), perturbed_lognormal(epsilon)))
}

/// `Σ_s W_s / (λ_s - z)`.
pub fn direct_transform_atomic(m: &AtomicMeasure, z: Complex64) -> Result<CMatrix> {
    let mut out = DMatrix::zeros(m.block_size, m.block_size);
    for (a, w) in m.atoms.iter().zip(&m.weights) {
        let d = Complex64::new(*a, 0.0) - z;
        if d.norm() == 0.0 {
            return Err(Error::PoleOnSupport(*a));
        }
        out += w / d;
    }
    Ok(out)
}

/// `∫ f(λ)/(λ - z) dλ` by quadrature.
pub fn direct_transform_density(d: &DensityMeasure, z: Complex64, rel_tol: f64) -> Result<CMatrix> {
    if z.im == 0.0 && z.re > d.lower && z.re < d.upper {
        return Err(Error::PoleOnSupport(z.re));
    }
    d.integrate(|x| 1.0 / (Complex64::new(x, 0.0) - z), rel_tol)
}

/// Random measure with `atoms` distinct points in `[-2, 2]` and PSD weights.
pub fn random_atomic_measure(rng: &mut impl Rng, block_size: usize, atoms: usize) -> AtomicMeasure {
    let mut points: Vec<f64> = Vec::with_capacity(atoms);
    while points.len() < atoms {
        let p: f64 = rng.random_range(-2.0..2.0);
        if points.iter().all(|q| (p - q).abs() > 0.1) {
            points.push(p);
        }
    }
    let weights = (0..atoms)
        .map(|_| {
            let b = CMatrix::from_fn(block_size, block_size, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let w = &b * b.adjoint() / Complex64::new(block_size as f64, 0.0)
                + CMatrix::identity(block_size, block_size) * Complex64::new(0.1, 0.0);
            (&w + w.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect();
    AtomicMeasure::new(block_size, points, weights).expect("generated measure is well formed")
}

/// [`random_atomic_measure`] driven by a ChaCha8 stream from `seed`.
pub fn seeded_atomic_measure(seed: u64, block_size: usize, atoms: usize) -> AtomicMeasure {
    use rand::SeedableRng;
    random_atomic_measure(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), block_size, atoms)
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.nrows();
    let mut a = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let b = a[(p, q)];
                let mag = b.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = b / mag;
                let (app, aqq) = (a[(p, p)].re, a[(q, q)].re);
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U = diag(1, conj(phase)) · [[c, s], [-s, c]]
                let u = [
                    [Complex64::new(c, 0.0), Complex64::new(s, 0.0)],
                    [-phase.conj() * s, phase.conj() * c],
                ];
                for r in 0..n {
                    let (x, y) = (a[(r, p)], a[(r, q)]);
                    a[(r, p)] = x * u[0][0] + y * u[1][0];
                    a[(r, q)] = x * u[0][1] + y * u[1][1];
                }
                for k in 0..n {
                    let (x, y) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = u[0][0].conj() * x + u[1][0].conj() * y;
                    a[(q, k)] = u[0][1].conj() * x + u[1][1].conj() * y;
                }
                a[(p, q)] = Complex64::new(0.0, 0.0);
                a[(q, p)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Number of eigenvalues above `rel_tol · λ_max`.
pub fn numerical_rank(h: &CMatrix, rel_tol: f64) -> usize {
    let vals = jacobi_eigenvalues(h);
    let top = vals.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    vals.iter().filter(|&&v| v > rel_tol * top).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CarlemanHint {
    SuggestsDeterminate,
    NoInformation,
}

/// Advisory Carleman test on the trace sequence: partial sums of
/// `(tr S_{2n})^{-1/(2n)}`. Geometrically decaying terms carry no information;
/// otherwise a partial sum of at least 2 is read as divergence. A vanishing
/// trace moment counts as an infinite term.
pub fn carleman_hint(seq: &MomentSequence) -> CarlemanHint {
    let mut terms = Vec::new();
    let mut n = 1;
    while 2 * n < seq.len() {
        let m = seq.moment(2 * n).unwrap();
        let mut tr = Float::new(seq.precision());
        for i in 0..seq.block_size() {
            tr += &m[(i, i)].re;
        }
        if tr <= 0 {
            return CarlemanHint::SuggestsDeterminate;
        }
        let exponent = -1.0 / (2 * n) as f64;
        let log = Float::with_val(seq.precision(), tr.ln_ref()).to_f64();
        terms.push((log * exponent).exp());
        n += 1;
    }
    if terms.len() < 2 {
        return CarlemanHint::NoInformation;
    }
    let k = terms.len();
    let half = k / 2;
    let ratio = (terms[k - 1] / terms[half.max(1) - 1]).powf(1.0 / (k - half.max(1)) as f64);
    if ratio <= 0.8 {
        return CarlemanHint::NoInformation;
    }
    if terms.iter().sum::<f64>() >= 2.0 {
        CarlemanHint::SuggestsDeterminate
    } else {
        CarlemanHint::NoInformation
    }
}
