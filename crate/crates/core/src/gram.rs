//! Finite-section Hilbert-space model: coordinates of `x_0, …, x_{M-1}` with
//! `⟨x_n, x_m⟩ = Γ_{n,m}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;

use crate::moments::MomentSequence;
use crate::mp::{self, hermitian_eigen, Complex, MpMatrix, Real};
use crate::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct EmbedOptions {
    /// Eigenvalues below `rank_tol · λ_max` are discarded. Default `2^(-p/2)`.
    pub rank_tol: Option<f64>,
    /// Tolerance for negative eigenvalues, relative to `max(λ_max, 1)`.
    /// Default `2^(-p/2)`.
    pub psd_tol: Option<f64>,
    /// When set, the eigenbasis is permuted and rotated by a seeded random
    /// unitary. Inner products are unchanged; useful to test that results do
    /// not depend on the embedding.
    pub basis_seed: Option<u64>,
}


/// Coordinates realizing the Gram matrix of an `M×M` section of `Γ`.
#[derive(Clone, Debug)]
pub struct GramModel {
    section_size: usize,
    block_size: usize,
    precision: u32,
    coords: Vec<Vec<Complex>>,
    gamma: MpMatrix,
    rank_gap: f64,
    rank_gap_clean: bool,
}

/// Which generator combination a [`ModelVector`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorTag {
    X(usize),
    Y(usize, Sign),
    Combination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct ModelVector {
    pub coefficients: Vec<Complex>,
    pub tag: VectorTag,
}

impl ModelVector {
    pub fn norm_sqr(&self) -> Real {
        mp::norm_sqr(&self.coefficients)
    }

    /// `⟨self, other⟩`, linear in `self`.
    pub fn inner(&self, other: &ModelVector) -> Complex {
        mp::inner(&self.coefficients, &other.coefficients)
    }
}

/// Factor the `M×M` section of `Γ` as `X* X`.
///
/// The section is first equilibrated by `D = diag(Γ_nn^{-1/2})`, which keeps
/// fast-growing sequences well scaled; the eigendecomposition of `DΓD` is then
/// truncated at `rank_tol · λ_max` and the scaling undone.
pub fn embed(seq: &MomentSequence, section_size: usize, opts: &EmbedOptions) -> Result<GramModel> {
    let prec = seq.precision();
    let gamma = seq.gamma_section(section_size)?;
    let m = section_size;
    let rank_tol = opts.rank_tol.unwrap_or_else(|| mp::precision_tolerance(prec, 2.0));
    let psd_tol = opts.psd_tol.unwrap_or_else(|| mp::precision_tolerance(prec, 2.0));

    let diag: Vec<Real> = (0..m).map(|n| gamma[(n, n)].re.clone()).collect();
    let max_diag = diag.iter().fold(Float::new(prec), |acc, d| if *d > acc { d.clone() } else { acc });
    for d in &diag {
        if d.is_sign_negative() && !d.is_zero() && Float::with_val(prec, -d) > Float::with_val(prec, &max_diag * psd_tol) {
            return Err(Error::IndefiniteSection {
                size: m,
                eigenvalue: d.to_f64(),
            });
        }
    }
    let active: Vec<usize> = (0..m).filter(|&n| diag[n].is_sign_positive() && !diag[n].is_zero()).collect();
    let roots: Vec<Real> = diag.iter().map(|d| if d.is_sign_positive() { d.clone().sqrt() } else { Float::new(prec) }).collect();

    let mut coords = vec![Vec::<Complex>::new(); m];
    let mut rank_gap = 0.0;
    let mut rank_gap_clean = true;
    if !active.is_empty() {
        let k = active.len();
        let scaled = MpMatrix::from_fn(k, k, |r, c| {
            let (a, b) = (active[r], active[c]);
            let denom = Float::with_val(prec, &roots[a] * &roots[b]);
            let z = &gamma[(a, b)];
            Complex {
                re: Float::with_val(prec, &z.re / &denom),
                im: Float::with_val(prec, &z.im / &denom),
            }
        });
        let eig = hermitian_eigen(&scaled, true)
            .map_err(|_| Error::Singular(format!("eigendecomposition of the {m}x{m} section did not converge")))?;
        let lmax = eig.values[0].clone();
        let lmin = eig.values[k - 1].clone();
        let floor = if lmax > 1 { lmax.clone() } else { Float::with_val(prec, 1) };
        if lmin < -Float::with_val(prec, &floor * psd_tol) {
            return Err(Error::IndefiniteSection {
                size: m,
                eigenvalue: lmin.to_f64(),
            });
        }
        let cut = Float::with_val(prec, &lmax * rank_tol);
        let rank = eig.values.iter().take_while(|v| **v > cut).count();
        if rank < k {
            let discarded = Float::with_val(prec, &eig.values[rank] / &lmax);
            rank_gap = discarded.to_f64().max(0.0);
            rank_gap_clean = rank_gap <= mp::precision_tolerance(prec, 4.0 / 3.0);
        }
        let vectors = eig.vectors.expect("vectors requested");
        let mut order: Vec<usize> = (0..rank).collect();
        let mut phases = vec![Complex::one(prec); rank];
        let mut reflector: Option<Vec<Complex>> = None;
        if let Some(seed) = opts.basis_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..rank).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            for p in phases.iter_mut() {
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let raw = Complex::from_f64(prec, theta.cos(), theta.sin());
                let inv = Float::with_val(prec, raw.abs().recip_ref());
                *p = raw.scale(&inv);
            }
            if rank > 1 {
                let v: Vec<Complex> = (0..rank)
                    .map(|_| Complex::from_f64(prec, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let nrm = mp::norm(&v);
                if !nrm.is_zero() {
                    let inv = Float::with_val(prec, nrm.recip_ref());
                    let mut v = v;
                    mp::scale_vec(&mut v, &inv);
                    reflector = Some(v);
                }
            }
        }
        let sqrt_l: Vec<Real> = eig.values[..rank].iter().map(|v| v.clone().sqrt()).collect();
        for (row, &n) in active.iter().enumerate() {
            let mut c: Vec<Complex> = order
                .iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let s = Float::with_val(prec, &sqrt_l[i] * &roots[n]);
                    (&vectors[i][row] * &phases[slot]).scale(&s)
                })
                .collect();
            if let Some(v) = &reflector {
                // Householder reflection c ← c - 2⟨c, v⟩ v.
                let mut ip = mp::inner(&c, v);
                ip.re *= 2u32;
                ip.im *= 2u32;
                mp::axmy(&mut c, &ip, v);
            }
            coords[n] = c;
        }
        for c in coords.iter_mut() {
            if c.is_empty() {
                *c = vec![Complex::zero(prec); rank];
            }
        }
    }

    Ok(GramModel {
        section_size: m,
        block_size: seq.block_size(),
        precision: prec,
        coords,
        gamma,
        rank_gap,
        rank_gap_clean,
    })
}

impl GramModel {
    pub fn section_size(&self) -> usize {
        self.section_size
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn rank(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.rank() == 0
    }

    pub fn coords(&self) -> &[Vec<Complex>] {
        &self.coords
    }

    /// The `M×M` section of `Γ` this model realizes.
    pub fn gamma(&self) -> &MpMatrix {
        &self.gamma
    }

    /// Largest discarded eigenvalue relative to `λ_max` (0 when nothing was cut).
    pub fn rank_gap(&self) -> f64 {
        self.rank_gap
    }

    /// Whether the rank cut fell in a clear spectral gap. A cut that is not
    /// clean means the rank was limited by working precision rather than by
    /// the data.
    pub fn rank_gap_clean(&self) -> bool {
        self.rank_gap_clean
    }

    pub fn x_vector(&self, n: usize) -> Result<ModelVector> {
        if self.is_empty() {
            return Err(Error::EmptyModel);
        }
        let c = self.coords.get(n).ok_or_else(|| {
            Error::IndexOutOfRange(format!("x_{n} is outside a section of size {}", self.section_size))
        })?;
        Ok(ModelVector {
            coefficients: c.clone(),
            tag: VectorTag::X(n),
        })
    }

    /// `y_k^± = x_{k+N} ± i x_k`.
    pub fn y_vector(&self, k: usize, sign: Sign) -> Result<ModelVector> {
        if self.is_empty() {
            return Err(Error::EmptyModel);
        }
        if k + self.block_size >= self.section_size {
            return Err(Error::IndexOutOfRange(format!(
                "y_{k} needs x_{} but the section has size {}",
                k + self.block_size,
                self.section_size
            )));
        }
        Ok(ModelVector {
            coefficients: self.y_coords(k, sign),
            tag: VectorTag::Y(k, sign),
        })
    }

    pub(crate) fn y_coords(&self, k: usize, sign: Sign) -> Vec<Complex> {
        let hi = &self.coords[k + self.block_size];
        let lo = &self.coords[k];
        hi.iter()
            .zip(lo)
            .map(|(a, b)| match sign {
                Sign::Plus => a + &b.mul_i(),
                Sign::Minus => a - &b.mul_i(),
            })
            .collect()
    }

    /// Largest `|⟨x_n, x_m⟩ - Γ_{n,m}|`, relative to `sqrt(Γ_nn Γ_mm)`.
    pub fn reconstruction_error(&self) -> f64 {
        let m = self.section_size;
        let mut worst = 0.0f64;
        for n in 0..m {
            for k in 0..m {
                let ip = mp::inner(&self.coords[n], &self.coords[k]);
                let diff = (&ip - &self.gamma[(n, k)]).abs();
                let scale = Float::with_val(self.precision, &self.gamma[(n, n)].re * &self.gamma[(k, k)].re);
                let scale = if scale.is_sign_positive() && !scale.is_zero() { scale.sqrt() } else { Float::with_val(self.precision, 1) };
                worst = worst.max(Float::with_val(self.precision, &diff / &scale).to_f64());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: &[f64], prec: u32) -> MomentSequence {
        MomentSequence::from_real_scalars(v, prec).unwrap()
    }

    fn two_atom() -> MomentSequence {
        scalar(&[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0], 53)
    }

    #[test]
    fn two_atom_has_rank_two() {
        let model = embed(&two_atom(), 4, &EmbedOptions::default()).unwrap();
        assert_eq!(model.rank(), 2);
        assert!(model.rank_gap_clean());
        assert!(model.reconstruction_error() < 1e-14);
        let x0 = model.x_vector(0).unwrap();
        assert!((x0.norm_sqr().to_f64() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_sequence_gives_empty_model() {
        let model = embed(&scalar(&[0.0; 6], 53), 3, &EmbedOptions::default()).unwrap();
        assert_eq!(model.rank(), 0);
        assert!(matches!(model.x_vector(0), Err(Error::EmptyModel)));
    }

    #[test]
    fn y_vectors() {
        let model = embed(&two_atom(), 4, &EmbedOptions::default()).unwrap();
        let y = model.y_vector(0, Sign::Minus).unwrap();
        assert!((y.norm_sqr().to_f64() - 2.0).abs() < 1e-14);
        let yp = model.y_vector(1, Sign::Plus).unwrap();
        let ym = model.y_vector(1, Sign::Minus).unwrap();
        let x1 = model.x_vector(1).unwrap();
        for ((p, m), x) in yp.coefficients.iter().zip(&ym.coefficients).zip(&x1.coefficients) {
            let d = (p - m).to_c64();
            let two_ix = x.mul_i().to_c64() * 2.0;
            assert!((d - two_ix).norm() < 1e-15);
        }
        assert!(matches!(model.y_vector(3, Sign::Minus), Err(Error::IndexOutOfRange(_))));

        let point = scalar(&[1.0, 0.0, 0.0, 0.0, 0.0], 53);
        let model = embed(&point, 3, &EmbedOptions::default()).unwrap();
        assert_eq!(model.rank(), 1);
        let y = model.y_vector(0, Sign::Minus).unwrap();
        assert!((y.norm_sqr().to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_is_nondegenerate() {
        let g = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0, 0.0, 945.0, 0.0];
        let model = embed(&scalar(&g, 128), 6, &EmbedOptions::default()).unwrap();
        assert_eq!(model.rank(), 6);
        let x2 = model.x_vector(2).unwrap();
        assert!((x2.norm_sqr().to_f64() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rotated_basis_preserves_gram() {
        let g = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0];
        let seq = scalar(&g, 128);
        let plain = embed(&seq, 5, &EmbedOptions::default()).unwrap();
        let rotated = embed(
            &seq,
            5,
            &EmbedOptions {
                basis_seed: Some(7),
                ..EmbedOptions::default()
            },
        )
        .unwrap();
        assert!(rotated.reconstruction_error() < 1e-30);
        assert_ne!(
            plain.coords()[1][0].to_c64(),
            rotated.coords()[1][0].to_c64()
        );
    }

    #[test]
    fn indefinite_section_is_rejected() {
        let err = embed(&scalar(&[1.0, 0.0, -1.0], 53), 2, &EmbedOptions::default()).unwrap_err();
        assert!(matches!(err, Error::IndefiniteSection { .. }));
        let err = embed(&scalar(&[1.0, 2.0, 1.0], 53), 2, &EmbedOptions::default()).unwrap_err();
        assert!(matches!(err, Error::IndefiniteSection { .. }));
    }
}
