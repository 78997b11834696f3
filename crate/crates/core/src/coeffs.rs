//! Structure matrices `𝔙, W, T, K` and the coefficient matrices `𝐀, 𝐁, 𝐂, 𝐃`.

use num_complex::Complex64;

use crate::cayley::CayleyBasis;
use crate::gram::{GramModel, Sign};
use crate::moments::MomentSequence;
use crate::mp::{self, Complex};
use crate::{CMatrix, Error, Result};

/// Radius of the disc around `z = i` where coefficients are refused.
pub const DEFAULT_POLE_EPSILON: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Inner products of the Cayley bases, rounded to `f64`.
///
/// With the convention that entry `(j, k)` of an operator matrix is
/// `⟨O e_k, f_j⟩`:
/// `𝔙 = (⟨v_k, u_j⟩)`, `W = (⟨v′_l, u_j⟩)`, `T = (⟨v′_l, u′_j⟩)`,
/// `K = (⟨y_k^-, u_j⟩)_{j<ρ, k<N}` and `C₀-generator = (⟨v_k, u′_j⟩)`.
#[derive(Clone, Debug)]
pub struct StructureMatrices {
    pub section_size: usize,
    pub block_size: usize,
    pub rho: usize,
    pub vv: CMatrix,
    pub w: CMatrix,
    pub t: CMatrix,
    pub k: CMatrix,
    pub c0_generator: CMatrix,
}

impl StructureMatrices {
    pub fn tau(&self) -> usize {
        self.vv.nrows()
    }

    pub fn delta(&self) -> usize {
        self.t.nrows()
    }

    pub fn omega(&self) -> usize {
        self.t.ncols()
    }

    /// `A_{0,ζ} = I - ζ𝔙`.
    pub fn a0(&self, zeta: Complex64) -> CMatrix {
        CMatrix::identity(self.tau(), self.tau()) - &self.vv * zeta
    }

    /// `C_{0,ζ} = -ζ · C₀-generator`.
    pub fn c0(&self, zeta: Complex64) -> CMatrix {
        &self.c0_generator * (-zeta)
    }
}

/// `𝐀(z), 𝐁(z), 𝐂(z), 𝐃(z)` at one point.
#[derive(Clone, Debug)]
pub struct NevanlinnaCoefficients {
    pub z: Complex64,
    pub zeta: Complex64,
    /// `N×N`.
    pub a: CMatrix,
    /// `N×ω̂`.
    pub b: CMatrix,
    /// `δ̂×ω̂`.
    pub c: CMatrix,
    /// `δ̂×N`.
    pub d: CMatrix,
    pub section_size: usize,
    pub tau: usize,
}

impl NevanlinnaCoefficients {
    pub fn delta(&self) -> usize {
        self.c.nrows()
    }

    pub fn omega(&self) -> usize {
        self.c.ncols()
    }
}

fn gram(a: &[Vec<Complex>], b: &[Vec<Complex>]) -> CMatrix {
    // Entry (j, k) = ⟨b_k, a_j⟩.
    CMatrix::from_fn(a.len(), b.len(), |j, k| mp::inner(&b[k], &a[j]).to_c64())
}

pub fn structure_matrices(basis: &CayleyBasis, model: &GramModel) -> Result<StructureMatrices> {
    if basis.delta() == 0 || basis.omega() == 0 {
        return Err(Error::DeterminateInput {
            delta: basis.delta(),
            omega: basis.omega(),
        });
    }
    let nb = model.block_size();
    let rho = basis.rho();
    let u = basis.u();
    let ys: Vec<Vec<Complex>> = (0..nb)
        .map(|k| {
            if k + nb < model.section_size() {
                model.y_coords(k, Sign::Minus)
            } else {
                vec![Complex::zero(model.precision()); model.rank()]
            }
        })
        .collect();
    Ok(StructureMatrices {
        section_size: model.section_size(),
        block_size: nb,
        rho,
        vv: gram(u, basis.v()),
        w: gram(u, basis.v_prime()),
        t: gram(basis.u_prime(), basis.v_prime()),
        k: gram(&u[..rho], &ys),
        c0_generator: gram(basis.u_prime(), basis.v()),
    })
}

/// `(I - ζ𝔙)^{-1}` by direct solve.
pub fn resolvent_section(sm: &StructureMatrices, zeta: Complex64) -> Result<CMatrix> {
    if zeta.norm() >= 1.0 {
        return Err(Error::InvalidParameter(format!("|ζ| = {} is not below 1", zeta.norm())));
    }
    let tau = sm.tau();
    sm.a0(zeta)
        .lu()
        .solve(&CMatrix::identity(tau, tau))
        .ok_or_else(|| Error::Singular("I - ζ𝔙 is singular; the Cayley basis is corrupted".into()))
}

/// `Δ(z) = (φ_{j,k}(z))` with
/// `φ_{j,k}(z) = Γ_{k+N,j+N} - iΓ_{k,j+N} + zΓ_{k+N,j} + (z² - iz + 1)Γ_{k,j}`,
/// i.e. `Δ(z) = (S_2 + (z - i)S_1 + (z² - iz + 1)S_0)ᵀ`.
pub fn phi_delta(seq: &MomentSequence, z: Complex64) -> Result<CMatrix> {
    if seq.len() < 3 {
        return Err(Error::InsufficientMoments("Δ(z) needs S_0, S_1 and S_2".into()));
    }
    let s0 = seq.moment_c64(0).unwrap();
    let s1 = seq.moment_c64(1).unwrap();
    let s2 = seq.moment_c64(2).unwrap();
    Ok(delta_from(&s0, &s1, &s2, z))
}

pub(crate) fn delta_from(s0: &CMatrix, s1: &CMatrix, s2: &CMatrix, z: Complex64) -> CMatrix {
    (s2 + s1 * (z - I) + s0 * (z * z - I * z + 1.0)).transpose()
}

pub fn check_point(z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::LowerHalfPlane { re: z.re, im: z.im });
    }
    if (z - I).norm() < DEFAULT_POLE_EPSILON {
        return Err(Error::ExcludedPoint { re: z.re, im: z.im });
    }
    Ok((z - I) / (z + I))
}

pub fn coefficients(sm: &StructureMatrices, seq: &MomentSequence, z: Complex64) -> Result<NevanlinnaCoefficients> {
    check_point(z)?;
    let delta = phi_delta(seq, z)?;
    coefficients_with_delta(sm, z, delta)
}

pub(crate) fn coefficients_with_delta(sm: &StructureMatrices, z: Complex64, delta: CMatrix) -> Result<NevanlinnaCoefficients> {
    let zeta = check_point(z)?;
    let rho = sm.rho;
    let tau = sm.tau();
    let r = resolvent_section(sm, zeta)?;
    let a1 = r.view((0, 0), (rho, rho));
    let a2 = r.view((0, 0), (rho, tau));
    let a3 = r.view((0, 0), (tau, rho));
    let kh = sm.k.adjoint();
    let c0 = sm.c0(zeta);

    let a = (&kh * a1 * &sm.k) * (2.0 * I) - delta * (z + I);
    let b = (&kh * a2 * &sm.w) * (-2.0 * I * zeta);
    let c = (&c0 * &r * &sm.w - &sm.t) * zeta;
    let d = &c0 * a3 * &sm.k;
    Ok(NevanlinnaCoefficients {
        z,
        zeta,
        a,
        b,
        c,
        d,
        section_size: sm.section_size,
        tau,
    })
}
