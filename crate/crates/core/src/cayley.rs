//! Cayley-transform bases, defect numbers and the determinacy test.

use num_complex::Complex64;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::gram::{embed, EmbedOptions, GramModel, ModelVector, Sign, VectorTag};
use crate::moments::MomentSequence;
use crate::mp::{self, hermitian_eigen, Complex, Lu, MpMatrix, Real};
use crate::{CMatrix, Error, Result};

/// Orthonormal families built from `y_k^∓` on one finite section.
///
/// `u_k` spans `Ĥ^- = span{y_k^-}`, `v_k = V u_k` spans `Ĥ^+`, `u′` and `v′`
/// are orthonormal bases of the complements of `Ĥ^-` and `Ĥ^+`.
#[derive(Clone, Debug)]
pub struct CayleyBasis {
    section_size: usize,
    block_size: usize,
    deflate_tol: f64,
    u: Vec<Vec<Complex>>,
    v: Vec<Vec<Complex>>,
    u_source: Vec<usize>,
    xi: Vec<Vec<Complex>>,
    u_prime: Vec<Vec<Complex>>,
    v_prime: Vec<Vec<Complex>>,
    rho: usize,
}

impl CayleyBasis {
    /// `τ̂`, the number of retained `u_k`.
    pub fn tau(&self) -> usize {
        self.u.len()
    }

    /// `δ̂ = dim Ĥ ⊖ Ĥ^-`.
    pub fn delta(&self) -> usize {
        self.u_prime.len()
    }

    /// `ω̂ = dim Ĥ ⊖ Ĥ^+`.
    pub fn omega(&self) -> usize {
        self.v_prime.len()
    }

    /// Dimension of `span{y_0^-, …, y_{N-1}^-}`.
    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn section_size(&self) -> usize {
        self.section_size
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn deflate_tol(&self) -> f64 {
        self.deflate_tol
    }

    pub fn u(&self) -> &[Vec<Complex>] {
        &self.u
    }

    pub fn v(&self) -> &[Vec<Complex>] {
        &self.v
    }

    pub fn u_prime(&self) -> &[Vec<Complex>] {
        &self.u_prime
    }

    pub fn v_prime(&self) -> &[Vec<Complex>] {
        &self.v_prime
    }

    /// Index `j` of the `y_j^-` that produced `u_k`.
    pub fn u_source(&self) -> &[usize] {
        &self.u_source
    }

    /// Row `k` holds `ξ_{k;j}` with `u_k = Σ_j ξ_{k;j} y_j^-`; zero for `j`
    /// beyond `u_source()[k]`.
    pub fn xi(&self) -> &[Vec<Complex>] {
        &self.xi
    }

    pub fn u_vector(&self, k: usize) -> Option<ModelVector> {
        self.u.get(k).map(|c| ModelVector {
            coefficients: c.clone(),
            tag: VectorTag::Combination,
        })
    }

    pub fn v_vector(&self, k: usize) -> Option<ModelVector> {
        self.v.get(k).map(|c| ModelVector {
            coefficients: c.clone(),
            tag: VectorTag::Combination,
        })
    }
}

/// Gram–Schmidt with reorthogonalization on `y_0^-, y_1^-, …`.
///
/// Each step applied to `y_k^-` is mirrored on `y_k^+`; since `V y_k^- = y_k^+`
/// is isometric this produces `v_k = V u_k` directly, without re-expanding
/// `Σ ξ_{k;j} y_j^+` (which cancels catastrophically for fast-growing moments).
/// `deflate_tol` defaults to `2^(-p/3)`.
pub fn orthogonalize(model: &GramModel, deflate_tol: Option<f64>) -> Result<CayleyBasis> {
    if model.is_empty() {
        return Err(Error::EmptyModel);
    }
    let prec = model.precision();
    let n_block = model.block_size();
    let m = model.section_size();
    let tol = deflate_tol.unwrap_or_else(|| mp::precision_tolerance(prec, 3.0));
    let ny = m.saturating_sub(n_block);

    let mut u: Vec<Vec<Complex>> = Vec::new();
    let mut v: Vec<Vec<Complex>> = Vec::new();
    let mut xi: Vec<Vec<Complex>> = Vec::new();
    let mut u_source = Vec::new();
    for k in 0..ny {
        let mut w = model.y_coords(k, Sign::Minus);
        let mut wp = model.y_coords(k, Sign::Plus);
        let mut coef = vec![Complex::zero(prec); ny];
        coef[k] = Complex::one(prec);
        let start = mp::norm(&w);
        if start.is_zero() {
            continue;
        }
        for _pass in 0..2 {
            for j in 0..u.len() {
                let c = mp::inner(&w, &u[j]);
                mp::axmy(&mut w, &c, &u[j]);
                mp::axmy(&mut wp, &c, &v[j]);
                mp::axmy(&mut coef[..=k], &c, &xi[j][..=k]);
            }
        }
        let rest = mp::norm(&w);
        if rest <= Float::with_val(prec, &start * tol) {
            continue;
        }
        let inv = Float::with_val(prec, rest.recip_ref());
        mp::scale_vec(&mut w, &inv);
        mp::scale_vec(&mut wp, &inv);
        mp::scale_vec(&mut coef, &inv);
        u.push(w);
        v.push(wp);
        xi.push(coef);
        u_source.push(k);
    }
    let rho = u_source.iter().filter(|&&k| k < n_block).count();
    let u_prime = complement(model, &u, tol);
    let v_prime = complement(model, &v, tol);
    Ok(CayleyBasis {
        section_size: m,
        block_size: n_block,
        deflate_tol: tol,
        u,
        v,
        u_source,
        xi,
        u_prime,
        v_prime,
        rho,
    })
}

/// Orthonormal basis of `span{x_0..x_{N-1}}` modulo `span(basis)`.
fn complement(model: &GramModel, basis: &[Vec<Complex>], tol: f64) -> Vec<Vec<Complex>> {
    let prec = model.precision();
    let mut out: Vec<Vec<Complex>> = Vec::new();
    for n in 0..model.block_size().min(model.section_size()) {
        let mut w = model.coords()[n].clone();
        let start = mp::norm(&w);
        if start.is_zero() {
            continue;
        }
        for _pass in 0..2 {
            for b in basis.iter().chain(out.iter()) {
                let c = mp::inner(&w, b);
                mp::axmy(&mut w, &c, b);
            }
        }
        let rest = mp::norm(&w);
        if rest <= Float::with_val(prec, &start * tol) {
            continue;
        }
        let inv = Float::with_val(prec, rest.recip_ref());
        mp::scale_vec(&mut w, &inv);
        out.push(w);
    }
    out
}

/// Side (a) projects onto `Ĥ^- = span{u_k}`, side (b) onto `Ĥ^+ = span{v_k}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

/// `Γ_nn - Σ_k |⟨x_n, u_k⟩|²` (side a) or with `v_k` (side b), with the inner
/// products expanded from `Γ` and the coefficient table `ξ`:
/// `⟨x_n, u_k⟩ = Σ_j conj(ξ_{k;j}) (Γ_{n,j+N} + iΓ_{n,j})` and
/// `⟨x_n, v_k⟩ = Σ_j conj(ξ_{k;j}) (Γ_{n,j+N} - iΓ_{n,j})`.
pub fn determinacy_residual(basis: &CayleyBasis, model: &GramModel, side: Side, n: usize) -> Result<Real> {
    let nb = basis.block_size;
    if n >= nb || n >= model.section_size() {
        return Err(Error::IndexOutOfRange(format!(
            "residual index {n} must be below the block size {nb}"
        )));
    }
    let gamma = model.gamma();
    let prec = model.precision();
    let ny = basis.section_size.saturating_sub(nb);
    let g: Vec<Complex> = (0..ny)
        .map(|j| {
            let shift = &gamma[(n, j + nb)];
            let base = gamma[(n, j)].mul_i();
            match side {
                Side::A => shift + &base,
                Side::B => shift - &base,
            }
        })
        .collect();
    let mut total = Float::new(prec);
    for (k, row) in basis.xi.iter().enumerate() {
        let mut acc = Complex::zero(prec);
        for j in 0..=basis.u_source[k] {
            acc.add_conj_mul(&row[j], &g[j]);
        }
        total += acc.norm_sqr();
    }
    Ok(Float::with_val(prec, &gamma[(n, n)].re - &total))
}

/// Same quantity computed from the stored coordinates; used as a cross-check.
pub fn projection_residual(basis: &CayleyBasis, model: &GramModel, side: Side, n: usize) -> Result<Real> {
    let x = model.x_vector(n)?;
    let family = match side {
        Side::A => &basis.u,
        Side::B => &basis.v,
    };
    let mut total = Float::new(model.precision());
    for f in family {
        total += mp::inner(&x.coefficients, f).norm_sqr();
    }
    Ok(Float::with_val(model.precision(), &model.gamma()[(n, n)].re - &total))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Determinate,
    Indeterminate,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct DeterminacyPolicy {
    /// First section size; default `16·N`, capped by the available moments.
    pub initial_section: Option<usize>,
    /// Largest section size; default: all available moments.
    pub max_section: Option<usize>,
    /// `θ` relative to `Γ_nn`; default `max(1e-6, 2^(-p/4))`.
    pub threshold: Option<f64>,
    /// Largest relative change of a residual across one doubling that still
    /// counts as stabilized.
    pub stabilization: f64,
    /// A residual below `θ` must shrink at least by this factor per doubling
    /// unless it is already at the numerical floor.
    pub decay_factor: f64,
    pub rank_tol: Option<f64>,
    pub deflate_tol: Option<f64>,
    pub basis_seed: Option<u64>,
}

impl Default for DeterminacyPolicy {
    fn default() -> Self {
        DeterminacyPolicy {
            initial_section: None,
            max_section: None,
            threshold: None,
            stabilization: 0.02,
            decay_factor: 0.5,
            rank_tol: None,
            deflate_tol: None,
            basis_seed: None,
        }
    }
}

impl DeterminacyPolicy {
    /// Section sizes `M, 2M, 4M, …` within the available moments.
    pub fn section_sizes(&self, seq: &MomentSequence) -> Vec<usize> {
        let cap = self.max_section.unwrap_or(usize::MAX).min(seq.max_section());
        let start = self.initial_section.unwrap_or(16 * seq.block_size()).clamp(1, cap.max(1));
        let mut out = vec![start];
        while out.last().unwrap() * 2 <= cap {
            out.push(out.last().unwrap() * 2);
        }
        out
    }
}

/// Residuals and basis dimensions on one section.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionEvidence {
    pub section_size: usize,
    pub rank: usize,
    pub rank_gap: f64,
    pub rank_gap_clean: bool,
    pub tau: usize,
    pub delta: usize,
    pub omega: usize,
    pub rho: usize,
    pub side_a: Vec<f64>,
    pub side_b: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeterminacyVerdict {
    pub verdict: Verdict,
    /// Short machine-readable reason, e.g. `all-moments-zero`.
    pub reason: String,
    /// Residuals `Γ_nn - Σ|⟨x_n, ·⟩|²` at the deepest section.
    pub side_a_residuals: Vec<f64>,
    pub side_b_residuals: Vec<f64>,
    /// Per-`n` thresholds `θ·Γ_nn`.
    pub thresholds: Vec<f64>,
    pub threshold: f64,
    pub residual_history: Vec<SectionEvidence>,
    pub guidance: Option<String>,
}

/// Decides determinacy from Parseval residuals on growing sections.
///
/// Determinate when, on either side, every residual at the deepest section
/// is below `θ·Γ_nn` and still shrinking geometrically (or already at the
/// numerical floor), with a clean rank cut. Indeterminate when on both sides
/// some residual stays above the threshold and changes by less than
/// `stabilization` across the last two doublings, with stable defect numbers.
pub fn classify_determinacy(seq: &MomentSequence, policy: &DeterminacyPolicy) -> Result<DeterminacyVerdict> {
    let prec = seq.precision();
    let nb = seq.block_size();
    let theta = policy
        .threshold
        .unwrap_or_else(|| 1e-6f64.max(mp::precision_tolerance(prec, 4.0)));
    let s0 = seq.moment_c64(0).expect("sequence has S_0");
    let diag: Vec<f64> = (0..nb).map(|n| s0[(n, n)].re).collect();
    let thresholds: Vec<f64> = diag.iter().map(|d| theta * d).collect();

    if seq.is_zero() {
        return Ok(DeterminacyVerdict {
            verdict: Verdict::Determinate,
            reason: "all-moments-zero".into(),
            side_a_residuals: vec![0.0; nb],
            side_b_residuals: vec![0.0; nb],
            thresholds,
            threshold: theta,
            residual_history: Vec::new(),
            guidance: None,
        });
    }

    let opts = EmbedOptions {
        rank_tol: policy.rank_tol,
        psd_tol: None,
        basis_seed: policy.basis_seed,
    };
    let mut history = Vec::new();
    for size in policy.section_sizes(seq) {
        let model = embed(seq, size, &opts)?;
        let evidence = if model.is_empty() {
            SectionEvidence {
                section_size: size,
                rank: 0,
                rank_gap: model.rank_gap(),
                rank_gap_clean: model.rank_gap_clean(),
                tau: 0,
                delta: 0,
                omega: 0,
                rho: 0,
                side_a: vec![0.0; nb],
                side_b: vec![0.0; nb],
            }
        } else {
            let basis = orthogonalize(&model, policy.deflate_tol)?;
            let side = |s| -> Result<Vec<f64>> {
                (0..nb.min(size))
                    .map(|n| determinacy_residual(&basis, &model, s, n).map(|r| r.to_f64()))
                    .collect()
            };
            SectionEvidence {
                section_size: size,
                rank: model.rank(),
                rank_gap: model.rank_gap(),
                rank_gap_clean: model.rank_gap_clean(),
                tau: basis.tau(),
                delta: basis.delta(),
                omega: basis.omega(),
                rho: basis.rho(),
                side_a: side(Side::A)?,
                side_b: side(Side::B)?,
            }
        };
        history.push(evidence);
    }

    let last = history.last().expect("at least one section");
    let floor = mp::precision_tolerance(prec, 2.0);
    let clean = history.iter().all(|e| e.rank_gap_clean);

    let side_passes = |pick: &dyn Fn(&SectionEvidence) -> &Vec<f64>| -> bool {
        let cur = pick(last);
        let prev = history.len().checked_sub(2).map(|i| pick(&history[i]));
        cur.iter().enumerate().all(|(n, &r)| {
            if r >= thresholds[n] && diag[n] > 0.0 {
                return false;
            }
            let at_floor = r <= floor * diag[n];
            let decaying = prev.is_some_and(|p| r <= policy.decay_factor * p[n]);
            at_floor || decaying
        })
    };
    let side_stable = |pick: &dyn Fn(&SectionEvidence) -> &Vec<f64>| -> bool {
        if history.len() < 3 {
            return false;
        }
        let h = &history[history.len() - 3..];
        (0..nb).any(|n| {
            let r: Vec<f64> = h.iter().map(|e| pick(e)[n]).collect();
            let above = r.iter().all(|&x| x > thresholds[n]);
            let d1 = (r[1] - r[0]).abs();
            let d2 = (r[2] - r[1]).abs();
            above && d2 <= policy.stabilization * r[2] && d2 <= d1.max(policy.stabilization * r[2] * 0.5)
        })
    };
    let defects_stable = history.len() >= 2 && {
        let h = &history[history.len() - 2..];
        h[0].delta == h[1].delta && h[0].omega == h[1].omega && h[1].delta >= 1 && h[1].delta == h[1].omega
    };

    let a_pass = side_passes(&|e: &SectionEvidence| &e.side_a);
    let b_pass = side_passes(&|e: &SectionEvidence| &e.side_b);
    let (verdict, reason, guidance) = if (a_pass || b_pass) && clean {
        let which = if a_pass { "a" } else { "b" };
        (Verdict::Determinate, format!("parseval-side-{which}"), None)
    } else if side_stable(&|e: &SectionEvidence| &e.side_a)
        && side_stable(&|e: &SectionEvidence| &e.side_b)
        && defects_stable
    {
        (Verdict::Indeterminate, "residuals-stabilized".to_string(), None)
    } else if (a_pass || b_pass) && !clean {
        (
            Verdict::Inconclusive,
            "precision-limited-rank".to_string(),
            Some(format!(
                "the rank cut at {prec} bits was set by working precision, not by the data; \
                 raise --precision-bits"
            )),
        )
    } else {
        (
            Verdict::Inconclusive,
            "residuals-not-settled".to_string(),
            Some("residuals neither vanished nor stabilized; raise --precision-bits or supply more moments".into()),
        )
    };

    Ok(DeterminacyVerdict {
        verdict,
        reason,
        side_a_residuals: last.side_a.clone(),
        side_b_residuals: last.side_b.clone(),
        thresholds,
        threshold: theta,
        residual_history: history,
        guidance,
    })
}

/// Pure-point matrix measure `Σ_s W_s δ_{λ_s}` with strictly increasing atoms.
#[derive(Clone, Debug)]
pub struct AtomicMeasure {
    pub block_size: usize,
    pub atoms: Vec<f64>,
    pub weights: Vec<CMatrix>,
}

impl AtomicMeasure {
    /// Sorts atoms and merges coincident ones.
    pub fn new(block_size: usize, atoms: Vec<f64>, weights: Vec<CMatrix>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidSequence("atoms and weights differ in length".into()));
        }
        if weights.iter().any(|w| w.nrows() != block_size || w.ncols() != block_size) {
            return Err(Error::InvalidSequence(format!("weights must be {block_size}x{block_size}")));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidSequence("atoms must be finite".into()));
        }
        let mut pairs: Vec<(f64, CMatrix)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::new();
        let mut weights: Vec<CMatrix> = Vec::new();
        for (a, w) in pairs {
            if atoms.last() == Some(&a) {
                *weights.last_mut().unwrap() += w;
            } else {
                atoms.push(a);
                weights.push(w);
            }
        }
        Ok(AtomicMeasure {
            block_size,
            atoms,
            weights,
        })
    }

    /// `∫ dM(λ)/(λ - z)`.
    pub fn transform(&self, z: Complex64) -> CMatrix {
        let mut out = CMatrix::zeros(self.block_size, self.block_size);
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            out += w * (Complex64::new(1.0, 0.0) / (Complex64::new(*a, 0.0) - z));
        }
        out
    }
}

/// Spectral measure of the self-adjoint shift on a finite-rank determinate
/// model: atoms are the eigenvalues `λ_s` of `A = i(V - I)^{-1}(V + I)` and
/// weight `s` has entries `⟨P_s x_k, x_j⟩`.
pub fn unique_solution_atoms(model: &GramModel, basis: &CayleyBasis) -> Result<AtomicMeasure> {
    let nb = model.block_size();
    if basis.delta() != 0 || basis.omega() != 0 {
        return Err(Error::NotFiniteRank(format!(
            "defect numbers ({}, {}) are nonzero on this section",
            basis.delta(),
            basis.omega()
        )));
    }
    if !model.rank_gap_clean() {
        return Err(Error::NotFiniteRank(format!(
            "the rank cut (gap {:e}) is limited by working precision",
            model.rank_gap()
        )));
    }
    let r = model.rank();
    let prec = model.precision();
    if r == 0 {
        return AtomicMeasure::new(nb, Vec::new(), Vec::new());
    }
    // V = Σ_k v_k u_k* on coordinate columns.
    let mut vm = MpMatrix::zeros(prec, r, r);
    for (uk, vk) in basis.u.iter().zip(&basis.v) {
        for a in 0..r {
            for b in 0..r {
                let mut cell = vm[(a, b)].clone();
                cell.add_mul_conj(&vk[a], &uk[b]);
                vm[(a, b)] = cell;
            }
        }
    }
    let id = MpMatrix::identity(prec, r);
    let minus = MpMatrix::from_fn(r, r, |a, b| &vm[(a, b)] - &id[(a, b)]);
    let plus = MpMatrix::from_fn(r, r, |a, b| &vm[(a, b)] + &id[(a, b)]);
    let lu = Lu::new(&minus).map_err(|_| Error::Singular("1 is an eigenvalue of the Cayley transform".into()))?;
    let solved = lu.solve(&plus);
    let mut a = MpMatrix::from_fn(r, r, |x, y| solved[(x, y)].mul_i());
    a.symmetrize();
    let eig = hermitian_eigen(&a, true).map_err(|_| Error::Singular("shift eigendecomposition failed".into()))?;
    let vectors = eig.vectors.expect("vectors requested");

    // Ascending eigenvalues, clustered.
    let mut idx: Vec<usize> = (0..r).collect();
    idx.reverse();
    let values: Vec<f64> = eig.values.iter().map(|v| v.to_f64()).collect();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let gap = mp::precision_tolerance(prec, 3.0).max(1e-12) * scale;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in idx {
        match clusters.last_mut() {
            Some(c) if (values[i] - values[*c.last().unwrap()]).abs() <= gap => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }

    let mut atoms = Vec::with_capacity(clusters.len());
    let mut weights = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        // ⟨x_k, e_i⟩ for every generator k < N and eigenvector e_i in the cluster.
        let proj: Vec<Vec<Complex>> = cluster
            .iter()
            .map(|&i| (0..nb).map(|k| mp::inner(&model.coords()[k], &vectors[i])).collect())
            .collect();
        let w = CMatrix::from_fn(nb, nb, |k, j| {
            let mut acc = Complex::zero(prec);
            for p in &proj {
                acc.add_mul_conj(&p[k], &p[j]);
            }
            acc.to_c64()
        });
        let mean = cluster.iter().map(|&i| values[i]).sum::<f64>() / cluster.len() as f64;
        atoms.push(mean);
        weights.push(w);
    }
    AtomicMeasure::new(nb, atoms, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn scalar(v: &[f64], prec: u32) -> MomentSequence {
        MomentSequence::from_real_scalars(v, prec).unwrap()
    }

    fn two_atom(len: usize) -> MomentSequence {
        let v: Vec<f64> = (0..len).map(|n| if n % 2 == 0 { 1.0 } else { 0.0 }).collect();
        scalar(&v, 53)
    }

    fn check_orthonormal(family: &[Vec<Complex>], tol: f64) {
        for (i, a) in family.iter().enumerate() {
            for (j, b) in family.iter().enumerate() {
                let ip = mp::inner(a, b).to_c64();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - Complex64::new(expect, 0.0)).norm() < tol, "({i},{j}) -> {ip}");
            }
        }
    }

    #[test]
    fn two_atom_basis() {
        let model = embed(&two_atom(8), 4, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        assert_eq!(basis.tau(), 2);
        assert_eq!(basis.delta(), 0);
        assert_eq!(basis.omega(), 0);
        check_orthonormal(basis.u(), 1e-13);
        check_orthonormal(basis.v(), 1e-13);
        for side in [Side::A, Side::B] {
            let r = determinacy_residual(&basis, &model, side, 0).unwrap();
            assert!(r.to_f64().abs() < 1e-10);
        }
        assert!(determinacy_residual(&basis, &model, Side::A, 1).is_err());
    }

    #[test]
    fn residual_routes_agree() {
        // Gaussian moments: nondegenerate, residuals strictly positive.
        let mut g = vec![0.0; 16];
        let mut df = 1.0;
        for k in 0..8 {
            g[2 * k] = df;
            df *= (2 * k + 1) as f64;
        }
        let seq = scalar(&g, 200);
        let model = embed(&seq, 8, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        assert_eq!(basis.delta(), 1);
        assert_eq!(basis.omega(), 1);
        assert_eq!(basis.tau() + basis.delta(), model.rank());
        for side in [Side::A, Side::B] {
            let a = determinacy_residual(&basis, &model, side, 0).unwrap().to_f64();
            let b = projection_residual(&basis, &model, side, 0).unwrap().to_f64();
            assert!(a > 0.0 && (a - b).abs() < 1e-40, "{a} vs {b}");
        }
    }

    #[test]
    fn xi_reproduces_u_and_v() {
        let seq = scalar(&[1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0], 160);
        let model = embed(&seq, 5, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        for (k, row) in basis.xi().iter().enumerate() {
            for (sign, target) in [(Sign::Minus, &basis.u()[k]), (Sign::Plus, &basis.v()[k])] {
                let mut acc = vec![Complex::zero(160); model.rank()];
                for (j, c) in row.iter().enumerate() {
                    mp::axpy(&mut acc, c, &model.y_coords(j, sign));
                }
                for (a, b) in acc.iter().zip(target) {
                    assert!((a - b).abs().to_f64() < 1e-30);
                }
            }
        }
    }

    #[test]
    fn zero_sequence_is_determinate() {
        let v = classify_determinacy(&scalar(&[0.0; 9], 53), &DeterminacyPolicy::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Determinate);
        assert_eq!(v.reason, "all-moments-zero");
    }

    #[test]
    fn two_atom_is_determinate_with_atoms() {
        let seq = two_atom(9);
        let v = classify_determinacy(&seq, &DeterminacyPolicy::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Determinate);
        assert!(v.side_a_residuals[0].abs() < 1e-10);

        let model = embed(&seq, 4, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        let mu = unique_solution_atoms(&model, &basis).unwrap();
        assert_eq!(mu.atoms.len(), 2);
        assert!((mu.atoms[0] + 1.0).abs() < 1e-10 && (mu.atoms[1] - 1.0).abs() < 1e-10);
        for w in &mu.weights {
            assert!((w[(0, 0)].re - 0.5).abs() < 1e-10);
        }
        let s = mu.transform(Complex64::new(0.0, 1.0));
        assert!((s[(0, 0)] - Complex64::new(0.0, 0.5)).norm() < 1e-10);
    }

    #[test]
    fn point_mass_at_zero() {
        let seq = scalar(&[1.0, 0.0, 0.0, 0.0, 0.0], 53);
        let model = embed(&seq, 3, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        let mu = unique_solution_atoms(&model, &basis).unwrap();
        assert_eq!(mu.atoms.len(), 1);
        assert!(mu.atoms[0].abs() < 1e-12);
        assert!((mu.weights[0][(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_diagonal_atoms() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let moments: Vec<DMatrix<Complex64>> = (0..7)
            .map(|n| {
                let top = 2f64.powi(n);
                let bottom = if n == 0 { 1.0 } else { 0.0 };
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(top), c(bottom)]))
            })
            .collect();
        let seq = MomentSequence::from_c64(2, &moments, 64).unwrap();
        let model = embed(&seq, 6, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        let mu = unique_solution_atoms(&model, &basis).unwrap();
        assert_eq!(mu.atoms.len(), 2);
        assert!(mu.atoms[0].abs() < 1e-12 && (mu.atoms[1] - 2.0).abs() < 1e-12);
        assert!((mu.weights[0][(1, 1)].re - 1.0).abs() < 1e-12 && mu.weights[0][(0, 0)].norm() < 1e-12);
        assert!((mu.weights[1][(0, 0)].re - 1.0).abs() < 1e-12 && mu.weights[1][(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn infinite_rank_is_refused() {
        let mut g = vec![0.0; 12];
        let mut df = 1.0;
        for k in 0..6 {
            g[2 * k] = df;
            df *= (2 * k + 1) as f64;
        }
        let model = embed(&scalar(&g, 128), 6, &EmbedOptions::default()).unwrap();
        let basis = orthogonalize(&model, None).unwrap();
        assert!(matches!(unique_solution_atoms(&model, &basis), Err(Error::NotFiniteRank(_))));
    }

    #[test]
    fn section_schedule() {
        let seq = two_atom(9);
        assert_eq!(DeterminacyPolicy::default().section_sizes(&seq), vec![5]);
        let seq = two_atom(130);
        let p = DeterminacyPolicy {
            initial_section: Some(16),
            max_section: Some(64),
            ..Default::default()
        };
        assert_eq!(p.section_sizes(&seq), vec![16, 32, 64]);
    }
}
