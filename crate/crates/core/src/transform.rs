//! The linear fractional transformation onto Stieltjes transforms of
//! solutions, Herglotz checks, Stieltjes–Perron inversion and the
//! section-doubling driver.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cayley::orthogonalize;
use crate::coeffs::{self, coefficients_with_delta, structure_matrices, NevanlinnaCoefficients, StructureMatrices};
use crate::gram::{embed, EmbedOptions, GramModel};
use crate::moments::MomentSequence;
use crate::{CMatrix, CayleyBasis, Error, Result};

/// Slack allowed on `‖F(z)‖ ≤ 1`.
pub const CONTRACTION_EPSILON: f64 = 1e-12;

/// Singular values of `I + 𝐂F` below this fraction of the largest are treated
/// as singular.
const LFT_CONDITION_LIMIT: f64 = 1e13;

type Evaluator = dyn Fn(Complex64, usize, usize) -> CMatrix + Send + Sync;

/// Contraction-valued parameter `F(z)` with values of shape `ω̂×δ̂`.
///
/// `Evaluator` receives `(z, ω̂, δ̂)`. Analyticity of user evaluators cannot be
/// checked; only the contraction bound is validated on each call.
#[derive(Clone)]
pub enum SchurParameter {
    Zero,
    /// `c` times the rectangular identity.
    Scalar(Complex64),
    Constant(CMatrix),
    /// `scale · (ζ - a)/(1 - conj(a)ζ)` times the rectangular identity, with
    /// `ζ = (z - i)/(z + i)`, `|a| < 1`, `|scale| ≤ 1`.
    Mobius { a: Complex64, scale: Complex64 },
    Evaluator(Arc<Evaluator>),
}

impl fmt::Debug for SchurParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchurParameter::Zero => write!(f, "Zero"),
            SchurParameter::Scalar(c) => write!(f, "Scalar({c})"),
            SchurParameter::Constant(m) => write!(f, "Constant({}x{})", m.nrows(), m.ncols()),
            SchurParameter::Mobius { a, scale } => write!(f, "Mobius {{ a: {a}, scale: {scale} }}"),
            SchurParameter::Evaluator(_) => write!(f, "Evaluator"),
        }
    }
}

fn rect_identity(rows: usize, cols: usize, c: Complex64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |r, k| if r == k { c } else { Complex64::new(0.0, 0.0) })
}

fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

impl SchurParameter {
    pub fn evaluator(f: impl Fn(Complex64, usize, usize) -> CMatrix + Send + Sync + 'static) -> Self {
        SchurParameter::Evaluator(Arc::new(f))
    }

    /// `F(z)` as an `omega × delta` matrix, validated as a contraction.
    pub fn value(&self, z: Complex64, omega: usize, delta: usize) -> Result<CMatrix> {
        let value = match self {
            SchurParameter::Zero => CMatrix::zeros(omega, delta),
            SchurParameter::Scalar(c) => rect_identity(omega, delta, *c),
            SchurParameter::Constant(m) => m.clone(),
            SchurParameter::Mobius { a, scale } => {
                if a.norm() >= 1.0 {
                    return Err(Error::InvalidParameter(format!("Möbius centre |a| = {} must be below 1", a.norm())));
                }
                let zeta = (z - Complex64::i()) / (z + Complex64::i());
                let b = (zeta - a) / (Complex64::new(1.0, 0.0) - a.conj() * zeta);
                rect_identity(omega, delta, scale * b)
            }
            SchurParameter::Evaluator(f) => f(z, omega, delta),
        };
        if value.shape() != (omega, delta) {
            return Err(Error::InvalidParameter(format!(
                "Schur parameter is {}x{}, expected {omega}x{delta}",
                value.nrows(),
                value.ncols()
            )));
        }
        let norm = spectral_norm(&value);
        if !(norm <= 1.0 + CONTRACTION_EPSILON) {
            return Err(Error::ContractionViolated { norm });
        }
        Ok(value)
    }
}

/// `S(z) = ∫ dM(λ)/(λ - z)` for one solution at one point.
#[derive(Clone, Debug)]
pub struct TransformSample {
    pub z: Complex64,
    pub s: CMatrix,
    /// Smallest eigenvalue of `(S - S*)/(2i)`.
    pub herglotz_min: f64,
}

fn imaginary_part(s: &CMatrix) -> CMatrix {
    (s - s.adjoint()) / Complex64::new(0.0, 2.0)
}

fn min_hermitian_eigenvalue(h: &CMatrix) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    sym.symmetric_eigen().eigenvalues.min()
}

impl TransformSample {
    pub fn new(z: Complex64, s: CMatrix) -> Self {
        let herglotz_min = min_hermitian_eigenvalue(&imaginary_part(&s));
        TransformSample { z, s, herglotz_min }
    }
}

/// `S = Gᵀ` with `G = [𝐀 + 𝐁F(I + 𝐂F)^{-1}𝐃] / (z² + 1)²`.
pub fn evaluate_transform(coeffs: &NevanlinnaCoefficients, f: &SchurParameter) -> Result<TransformSample> {
    let z = coeffs.z;
    let fz = f.value(z, coeffs.omega(), coeffs.delta())?;
    let mut g = coeffs.a.clone();
    if fz.iter().any(|x| x.norm() != 0.0) {
        let delta = coeffs.delta();
        let lft = CMatrix::identity(delta, delta) + &coeffs.c * &fz;
        let sv = lft.clone().svd(false, false).singular_values;
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 0.0) || smax / smin > LFT_CONDITION_LIMIT {
            return Err(Error::LftSingular {
                condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
            });
        }
        let solved = lft.lu().solve(&coeffs.d).ok_or(Error::LftSingular {
            condition: f64::INFINITY,
        })?;
        g += &coeffs.b * &fz * solved;
    }
    let w = z * z + 1.0;
    let s = (g / (w * w)).transpose();
    Ok(TransformSample::new(z, s))
}

#[derive(Clone, Debug)]
pub struct HerglotzReport {
    pub min_imaginary_eigenvalue: f64,
    pub worst_z: Option<Complex64>,
    pub epsilon: f64,
    pub pass: bool,
}

/// Smallest `λ_min((S - S*)/(2i))` over the samples; passes iff `≥ -epsilon`.
pub fn herglotz_scan(samples: &[TransformSample], epsilon: f64) -> HerglotzReport {
    let mut worst = f64::INFINITY;
    let mut worst_z = None;
    for s in samples {
        if s.herglotz_min < worst {
            worst = s.herglotz_min;
            worst_z = Some(s.z);
        }
    }
    HerglotzReport {
        min_imaginary_eigenvalue: worst,
        worst_z,
        epsilon,
        pass: worst >= -epsilon,
    }
}

/// Density `(1/π) Im S(λ + iε)` on a grid and its trapezoid cumulative.
#[derive(Clone, Debug)]
pub struct Inversion {
    pub epsilon: f64,
    pub step: f64,
    pub lambdas: Vec<f64>,
    pub density: Vec<CMatrix>,
    pub cumulative: Vec<CMatrix>,
    /// Smallest eigenvalue over all cumulative increments.
    pub min_increment_eigenvalue: f64,
    pub monotone: bool,
}

impl Inversion {
    /// Cumulative mass at the grid point nearest to `lambda`.
    pub fn cumulative_at(&self, lambda: f64) -> &CMatrix {
        let i = ((lambda - self.lambdas[0]) / self.step).round().clamp(0.0, (self.lambdas.len() - 1) as f64);
        &self.cumulative[i as usize]
    }

    /// `∫ λ^n dM` over the grid, by the trapezoid rule on the density.
    pub fn moment(&self, n: i32) -> CMatrix {
        let dim = self.density[0].nrows();
        let mut out = CMatrix::zeros(dim, dim);
        let last = self.lambdas.len() - 1;
        for (i, (l, d)) in self.lambdas.iter().zip(&self.density).enumerate() {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            out += d * Complex64::new(w * self.step * l.powi(n), 0.0);
        }
        out
    }
}

/// Stieltjes–Perron inversion. `step` defaults to `1e-4·(b - a)` and
/// `epsilon` to `1e-3`.
pub fn stieltjes_invert<F>(sampler: F, a: f64, b: f64, step: Option<f64>, epsilon: Option<f64>) -> Result<Inversion>
where
    F: Fn(Complex64) -> Result<CMatrix> + Sync,
{
    let eps = epsilon.unwrap_or(1e-3);
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("inversion offset ε = {eps} must be positive")));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("interval [{a}, {b}] is empty")));
    }
    let h0 = step.unwrap_or(1e-4 * (b - a));
    if !(h0 > 0.0) {
        return Err(Error::InvalidParameter(format!("grid step {h0} must be positive")));
    }
    let count = ((b - a) / h0).ceil() as usize + 1;
    let h = (b - a) / (count - 1) as f64;
    let lambdas: Vec<f64> = (0..count).map(|i| a + h * i as f64).collect();
    let density: Vec<CMatrix> = lambdas
        .par_iter()
        .map(|&l| sampler(Complex64::new(l, eps)).map(|s| imaginary_part(&s) / Complex64::new(std::f64::consts::PI, 0.0)))
        .collect::<Result<_>>()?;
    let dim = density[0].nrows();
    let mut cumulative = Vec::with_capacity(count);
    cumulative.push(CMatrix::zeros(dim, dim));
    let mut min_inc = f64::INFINITY;
    for i in 1..count {
        let inc = (&density[i - 1] + &density[i]) * Complex64::new(0.5 * h, 0.0);
        min_inc = min_inc.min(min_hermitian_eigenvalue(&inc));
        let next = &cumulative[i - 1] + inc;
        cumulative.push(next);
    }
    Ok(Inversion {
        epsilon: eps,
        step: h,
        lambdas,
        density,
        cumulative,
        min_increment_eigenvalue: min_inc,
        monotone: min_inc >= -1e-8,
    })
}

#[derive(Clone, Debug, Default)]
pub struct SectionOptions {
    pub embed: EmbedOptions,
    pub deflate_tol: Option<f64>,
}

/// Everything needed to evaluate the transform on one finite section.
#[derive(Clone, Debug)]
pub struct NevanlinnaSection {
    pub model: GramModel,
    pub basis: CayleyBasis,
    pub structure: StructureMatrices,
    s0: CMatrix,
    s1: CMatrix,
    s2: CMatrix,
}

impl NevanlinnaSection {
    /// Fails with `determinate-input` when the section has no defect.
    pub fn build(seq: &MomentSequence, section_size: usize, opts: &SectionOptions) -> Result<Self> {
        if seq.len() < 3 {
            return Err(Error::InsufficientMoments("the transform needs S_0, S_1 and S_2".into()));
        }
        let model = embed(seq, section_size, &opts.embed)?;
        let basis = orthogonalize(&model, opts.deflate_tol)?;
        let structure = structure_matrices(&basis, &model)?;
        Ok(NevanlinnaSection {
            model,
            basis,
            structure,
            s0: seq.moment_c64(0).unwrap(),
            s1: seq.moment_c64(1).unwrap(),
            s2: seq.moment_c64(2).unwrap(),
        })
    }

    pub fn section_size(&self) -> usize {
        self.model.section_size()
    }

    pub fn coefficients(&self, z: Complex64) -> Result<NevanlinnaCoefficients> {
        coeffs::check_point(z)?;
        coefficients_with_delta(&self.structure, z, coeffs::delta_from(&self.s0, &self.s1, &self.s2, z))
    }

    pub fn transform(&self, z: Complex64, f: &SchurParameter) -> Result<TransformSample> {
        evaluate_transform(&self.coefficients(z)?, f)
    }

    /// Evaluates a grid in parallel; results keep the grid order.
    pub fn transform_grid(&self, grid: &[Complex64], f: &SchurParameter) -> Result<Vec<TransformSample>> {
        grid.par_iter().map(|&z| self.transform(z, f)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ConvergencePolicy {
    /// Default `16·N`.
    pub initial_section: Option<usize>,
    /// Default: all available moments.
    pub max_section: Option<usize>,
    /// Largest accepted `max_z ‖S_M(z) - S_2M(z)‖`; `∞` accepts the first section.
    pub tol: f64,
    pub section: SectionOptions,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        ConvergencePolicy {
            initial_section: None,
            max_section: None,
            tol: 1e-6,
            section: SectionOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvergedTransform {
    pub section: NevanlinnaSection,
    pub samples: Vec<TransformSample>,
    /// `(M, gap)`: Cauchy gap between sections `M/2` and `M`.
    pub gaps: Vec<(usize, f64)>,
}

impl ConvergedTransform {
    pub fn section_size(&self) -> usize {
        self.section.section_size()
    }

    pub fn achieved_gap(&self) -> Option<f64> {
        self.gaps.last().map(|g| g.1)
    }
}

/// Doubles the section until the transform on `grid` moves by at most `tol`
/// (spectral norm), or the moments run out.
pub fn convergence_driver(
    seq: &MomentSequence,
    grid: &[Complex64],
    f: &SchurParameter,
    policy: &ConvergencePolicy,
) -> Result<ConvergedTransform> {
    for &z in grid {
        coeffs::check_point(z)?;
    }
    let cap = policy.max_section.unwrap_or(usize::MAX).min(seq.max_section());
    let mut size = policy.initial_section.unwrap_or(16 * seq.block_size()).min(cap).max(1);
    let mut section = NevanlinnaSection::build(seq, size, &policy.section)?;
    let mut samples = section.transform_grid(grid, f)?;
    let mut gaps = Vec::new();
    if policy.tol.is_infinite() {
        return Ok(ConvergedTransform { section, samples, gaps });
    }
    loop {
        if size * 2 > cap {
            return Err(Error::NoConvergence { gaps });
        }
        size *= 2;
        let next = NevanlinnaSection::build(seq, size, &policy.section)?;
        let next_samples = next.transform_grid(grid, f)?;
        let gap = samples
            .iter()
            .zip(&next_samples)
            .map(|(a, b)| spectral_norm(&(&a.s - &b.s)))
            .fold(0.0, f64::max);
        gaps.push((size, gap));
        section = next;
        samples = next_samples;
        if gap <= policy.tol {
            return Ok(ConvergedTransform { section, samples, gaps });
        }
    }
}
