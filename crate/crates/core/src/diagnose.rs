//! Structural conditions on a family design: geometric variance decay,
//! the difference-variance ratio γ, and the diagonal-comparability
//! constant 𝔰 of the covariance.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::family::{FamilyDesign, TruthProfile};
use crate::linalg;

/// Bounds `u₀ ≤ v_{k−1}/v_k ≤ u` on consecutive variance ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayConstants {
    pub u0: f64,
    pub u: f64,
    /// `u₀ > 1`.
    pub ok: bool,
}

pub fn md_constants(v: &[f64]) -> Result<DecayConstants> {
    if v.len() < 2 {
        return Err(Error::Domain("need at least two variances".into()));
    }
    if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::Domain(format!("variance {x} must be positive")));
    }
    let ratios = v.windows(2).map(|w| w[0] / w[1]);
    let (u0, u) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), q| (lo.min(q), hi.max(q)));
    Ok(DecayConstants {
        u0,
        u,
        ok: u0 > 1.0 + 1e-12,
    })
}

/// `γ = max_{l<k} Var(θ̃_l − θ̃_k) / v_l`.
pub fn gamma_of(design: &FamilyDesign) -> f64 {
    let v = design.variances();
    let mut gamma = 0.0f64;
    for k in 1..design.len() {
        for (l, vl) in v.iter().enumerate().take(k) {
            gamma = gamma.max(design.diff_variance(l, k) / vl);
        }
    }
    gamma
}

/// Correlation matrix `M_k` of the first `k` estimates.
pub fn correlation_block(design: &FamilyDesign, k: usize) -> DMatrix<f64> {
    let b = design.covariance();
    let v = design.variances();
    DMatrix::from_fn(k, k, |j, l| b[(j, l)] / (v[j] * v[l]).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagonalComparability {
    /// `𝔰 = max_k √λ_max(M_k⁻¹)`.
    pub s_frak: f64,
    /// `λ_max(M_k⁻¹)` for `k = 1..K`.
    pub lambda_max_inv: Vec<f64>,
}

pub fn dk_constant(design: &FamilyDesign) -> Result<DiagonalComparability> {
    let mut lambda_max_inv = Vec::with_capacity(design.len());
    for k in 1..=design.len() {
        let eig = linalg::symmetric_eigenvalues(&correlation_block(design, k));
        let smallest = eig[0];
        if !(smallest > 1e-10 * eig[k - 1]) {
            return Err(Error::NotPositiveDefinite(format!(
                "correlation block {k} has smallest eigenvalue {smallest}"
            )));
        }
        lambda_max_inv.push(1.0 / smallest);
    }
    let s_frak = lambda_max_inv.iter().copied().fold(0.0, f64::max).sqrt();
    Ok(DiagonalComparability {
        s_frak,
        lambda_max_inv,
    })
}

/// `(1 − 1/u₀)⁻³`, the bound on `λ_max(M_k⁻¹)` for sequence designs.
pub fn lemma32_bound(u0: f64) -> f64 {
    (1.0 - 1.0 / u0).powi(-3)
}

/// `(1 − u₀^{−1/2})⁻² (1 − 1/u₀)⁻¹`, a bound on `λ_max(M_k⁻¹)` for
/// sequence designs that holds for every `u₀ > 1`.
///
/// Writing `M_k = A⁻¹ Γ A⁻ᵀ` with `A` unit upper bidiagonal, the
/// superdiagonal of `A` is `−(v_{l+1}/v_l)^{1/2}`, so `‖I − A‖ ≤ u₀^{−1/2}`
/// rather than `1/u₀`. With that norm the argument behind
/// [`lemma32_bound`] gives this constant. `K = 2` shows the difference:
/// there `λ_max(M⁻¹) = (1 − u₀^{−1/2})⁻¹`, which exceeds `(1 − 1/u₀)⁻³`
/// once `u₀` is above about 6.6.
pub fn sequence_bound(u0: f64) -> f64 {
    (1.0 - u0.sqrt().recip()).powi(-2) / (1.0 - 1.0 / u0)
}

/// `C_{u₀} = (1 − 1/u₀)⁻¹`.
pub fn c_u0(u0: f64) -> f64 {
    1.0 / (1.0 - 1.0 / u0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub u0: f64,
    pub u: f64,
    pub md_ok: bool,
    pub gamma: f64,
    pub s_frak: f64,
    /// `(1 − 1/u₀)^{−3/2}`.
    pub lemma32_bound: f64,
    pub c_u0: f64,
    /// `𝔰 ≤ (1 − 1/u₀)^{−3/2}`; reported only, since it can fail for
    /// widely spaced ladders.
    pub lemma32_holds: bool,
    /// `√sequence_bound(u₀)`.
    pub sequence_bound: f64,
    /// `𝔰 ≤ √sequence_bound(u₀)`; asserted for sequence designs.
    pub sequence_bound_holds: bool,
    pub sequence: bool,
}

pub fn condition_report(design: &FamilyDesign) -> Result<ConditionReport> {
    let md = md_constants(design.variances())?;
    let dk = dk_constant(design)?;
    let (bound, seq_bound) = if md.ok {
        ((1.0 - 1.0 / md.u0).powf(-1.5), sequence_bound(md.u0).sqrt())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(ConditionReport {
        u0: md.u0,
        u: md.u,
        md_ok: md.ok,
        gamma: gamma_of(design),
        s_frak: dk.s_frak,
        lemma32_bound: bound,
        c_u0: if md.ok { c_u0(md.u0) } else { f64::INFINITY },
        lemma32_holds: dk.s_frak <= bound * (1.0 + 1e-8),
        sequence_bound: seq_bound,
        sequence_bound_holds: dk.s_frak <= seq_bound * (1.0 + 1e-8),
        sequence: design.is_sequence(),
    })
}

/// One row of the small-modeling-bias check via the diagonal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmbRow {
    /// `b_1²/v_1 + … + b_k²/v_k`.
    pub diagonal_sum: f64,
    /// `Δ / 𝔰²`.
    pub threshold: f64,
    pub smb_via_diagonal: bool,
    pub delta_k: f64,
    /// `Δ_k ≤ 𝔰²·diagonal_sum`.
    pub implication_holds: bool,
}

pub fn smb_via_dk(
    design: &FamilyDesign,
    truth: &TruthProfile,
    deltas: &[f64],
    s_frak: f64,
    budget: f64,
) -> Result<Vec<SmbRow>> {
    check_len("bias", design.len(), truth.bias.len())?;
    check_len("deltas", design.len(), deltas.len())?;
    let s2 = s_frak * s_frak;
    let threshold = budget / s2;
    let mut acc = 0.0;
    Ok(truth
        .bias
        .iter()
        .zip(design.variances())
        .zip(deltas)
        .map(|((b, v), &delta_k)| {
            acc += b * b / v;
            SmbRow {
                diagonal_sum: acc,
                threshold,
                smb_via_diagonal: acc <= threshold,
                delta_k,
                implication_holds: delta_k <= s2 * acc * (1.0 + 1e-10) + 1e-300,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{design_sequence, truth_deltas, SequenceModelSpec, SequenceShape};

    fn toy() -> (FamilyDesign, TruthProfile) {
        design_sequence(&SequenceModelSpec {
            sigma: vec![1.0; 3],
            mu: vec![1.0, 2.0, 4.0],
            delta: 1.0,
            cutoffs: vec![3, 2, 1],
        })
        .unwrap()
    }

    #[test]
    fn decay_constants() {
        let c = md_constants(&[4.0, 2.0, 1.0]).unwrap();
        assert_eq!((c.u0, c.u, c.ok), (2.0, 2.0, true));
        let c = md_constants(&[3.0, 2.0, 1.0]).unwrap();
        assert_eq!((c.u0, c.u, c.ok), (1.5, 2.0, true));
        let c = md_constants(&[1.0, 1.0]).unwrap();
        assert_eq!((c.u0, c.u, c.ok), (1.0, 1.0, false));
        assert!(md_constants(&[1.0]).is_err());
    }

    #[test]
    fn gamma_values() {
        let (design, _) = toy();
        assert!((gamma_of(&design) - 2.0 / 3.0).abs() < 1e-15);
        let indep =
            FamilyDesign::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]), "d").unwrap();
        assert_eq!(gamma_of(&indep), 1.5);
        let seq = SequenceShape::severely_ill_posed(50, 20).unwrap().design(1.0).unwrap();
        assert!(gamma_of(&seq) <= 1.0);
    }

    #[test]
    fn diagonal_design_has_unit_s() {
        let d = FamilyDesign::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0])), "diag").unwrap();
        let dk = dk_constant(&d).unwrap();
        assert!((dk.s_frak - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_sequence_obeys_lemma_bound() {
        let shape = SequenceShape {
            sigma: vec![1.0, 1.0, 2f64.sqrt()],
            cutoffs: vec![3, 2, 1],
        };
        let design = shape.design(1.0).unwrap();
        assert_eq!(design.variances(), &[4.0, 2.0, 1.0]);
        let dk = dk_constant(&design).unwrap();
        // brute-force inverse of M_3
        let inv = correlation_block(&design, 3).try_inverse().unwrap();
        let top = *linalg::symmetric_eigenvalues(&inv).last().unwrap();
        assert!((top - dk.lambda_max_inv[2]).abs() < 1e-10 * top);
        assert!(dk.lambda_max_inv.iter().all(|l| *l <= 8.0 + 1e-10));
        let report = condition_report(&design).unwrap();
        assert!(report.lemma32_holds);
        assert!(report.sequence_bound_holds);
        assert_eq!(report.c_u0, 2.0);
    }

    #[test]
    fn two_step_ladder_exact_eigenvalue() {
        for u0 in [1.5, 4.0, 10.0, 1e4] {
            let design = FamilyDesign::new(
                DMatrix::from_row_slice(2, 2, &[u0, 1.0, 1.0, 1.0]),
                "two-step",
            )
            .unwrap();
            let dk = dk_constant(&design).unwrap();
            let exact = 1.0 / (1.0 - u0.sqrt().recip());
            assert!((dk.lambda_max_inv[1] - exact).abs() < 1e-9 * exact);
            assert!(exact <= sequence_bound(u0));
            // the (1 − 1/u₀)⁻³ form fails once u₀ is large
            assert_eq!(exact <= lemma32_bound(u0), u0 < 7.0);
        }
    }

    #[test]
    fn smb_rows() {
        let (design, truth) = toy();
        let deltas = truth_deltas(&design, &truth).unwrap();
        let dk = dk_constant(&design).unwrap();
        let rows = smb_via_dk(&design, &truth, &deltas, dk.s_frak, 1.0).unwrap();
        assert_eq!(rows[1].diagonal_sum, 8.0);
        assert!(dk.s_frak * dk.s_frak >= 3.0);
        assert!(rows.iter().all(|r| r.implication_holds));

        let zero = TruthProfile::new(0.0, vec![0.0; 3]);
        let rows = smb_via_dk(&design, &zero, &[0.0; 3], dk.s_frak, 1.0).unwrap();
        assert!(rows.iter().all(|r| r.diagonal_sum == 0.0 && r.smb_via_diagonal));

        let ident = FamilyDesign::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0 + 2e-9, 1.0 + 1e-9, 1.0])),
            "near-identity",
        )
        .unwrap();
        let t = TruthProfile::new(0.0, vec![0.5, -1.0, 2.0]);
        let d = truth_deltas(&ident, &t).unwrap();
        let rows = smb_via_dk(&ident, &t, &d, 1.0, 1.0).unwrap();
        for (row, delta) in rows.iter().zip(&d) {
            assert!((row.diagonal_sum - delta).abs() < 1e-12);
        }
    }
}
