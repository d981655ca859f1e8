//! Oracle-side quantities: the oracle index, bias-variance balance, bound
//! templates for the thresholds, the right-hand sides of the oracle
//! inequality, the tail moment `Q_r(ρ, z)` and a Monte Carlo check of the
//! Kullback–Leibler identities for `Δ_k`.

use nalgebra::{Cholesky, DVector};
use serde::Serialize;

use crate::calibrate::gaussian_moment;
use crate::diagnose::c_u0;
use crate::error::{check_len, Error, Result};
use crate::family::{truth_deltas, FamilyDesign, TruthProfile};
use crate::linalg::leading_block;
use crate::numeric::{integrate, normal_pdf};
use crate::parallel::chunked_sums;
use crate::select::CriticalValues;

/// Largest (zero-based) `k` with `Δ_k ≤ budget`, or `Δ_k < budget` when
/// `strict`. Errors when the very first estimate already misses the budget.
pub fn oracle_index(deltas: &[f64], budget: f64, strict: bool) -> Result<usize> {
    let admits = |d: f64| if strict { d < budget } else { d <= budget };
    match deltas.first() {
        None => Err(Error::Domain("empty bias profile".into())),
        Some(&d1) if !admits(d1) => Err(Error::Precondition(format!(
            "first estimate has Δ_1 = {d1}, outside the budget {budget}"
        ))),
        Some(_) => Ok(deltas.iter().rposition(|d| admits(*d)).unwrap_or(0)),
    }
}

/// Right-hand sides of the oracle inequality at a given `z_{k*}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleRhs {
    /// `√(α c_r e^Δ) + (2 z_{k*})^{r/2}`.
    pub general: f64,
    /// `2√(e^Δ) + √(2 z_{k*})`, the `r = 1`, `α = 1` specialization.
    pub quadratic: f64,
    /// Whether `quadratic` applies (`r = 1`).
    pub quadratic_applies: bool,
}

pub fn oracle_rhs(r: f64, alpha: f64, budget: f64, z_kstar: f64) -> Result<OracleRhs> {
    let c_r = gaussian_moment(r)?;
    if !(alpha > 0.0 && budget >= 0.0 && z_kstar >= 0.0) {
        return Err(Error::Domain(format!(
            "need α > 0, Δ ≥ 0, z ≥ 0; got {alpha}, {budget}, {z_kstar}"
        )));
    }
    Ok(OracleRhs {
        general: (alpha * c_r * budget.exp()).sqrt() + (2.0 * z_kstar).powf(r / 2.0),
        quadratic: 2.0 * budget.exp().sqrt() + (2.0 * z_kstar).sqrt(),
        quadratic_applies: r == 1.0,
    })
}

/// `z_{k*}` for a zero-based oracle index. At the last estimate no later
/// step exists, so the stability term vanishes and 0 is returned.
pub fn z_at(z: &CriticalValues, k_star: usize) -> f64 {
    z.values().get(k_star).copied().unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub delta_k: Vec<f64>,
    /// Zero-based.
    pub k_star: usize,
    pub budget: f64,
    pub strict: bool,
    pub z_at_kstar: f64,
    pub rhs: OracleRhs,
}

pub fn oracle_report(
    design: &FamilyDesign,
    truth: &TruthProfile,
    z: &CriticalValues,
    r: f64,
    alpha: f64,
    budget: f64,
    strict: bool,
) -> Result<OracleReport> {
    check_len("critical values", design.len() - 1, z.values().len())?;
    let delta_k = truth_deltas(design, truth)?;
    let k_star = oracle_index(&delta_k, budget, strict)?;
    let z_at_kstar = z_at(z, k_star);
    Ok(OracleReport {
        rhs: oracle_rhs(r, alpha, budget, z_at_kstar)?,
        delta_k,
        k_star,
        budget,
        strict,
        z_at_kstar,
    })
}

/// Running maximum `b̄_k = max_{l≤k} |b_l|`.
pub fn bias_envelope(bias: &[f64]) -> Vec<f64> {
    let mut m = 0.0f64;
    bias.iter()
        .map(|b| {
            m = m.max(b.abs());
            m
        })
        .collect()
}

/// Largest zero-based `k` with `b̄_k ≤ C_b √v_k`.
pub fn balance_index(bias: &[f64], v: &[f64], c_b: f64) -> Result<usize> {
    check_len("variances", bias.len(), v.len())?;
    bias_envelope(bias)
        .iter()
        .zip(v)
        .rposition(|(b, v)| *b <= c_b * v.sqrt())
        .ok_or(Error::Balance)
}

/// Small-modeling-bias level `𝔰² C_{u₀} C_b²` implied by the balance relation.
pub fn balance_level(s_frak: f64, u0: f64, c_b: f64) -> f64 {
    s_frak * s_frak * c_u0(u0) * c_b * c_b
}

/// Constants of the threshold bound templates; the theory leaves them
/// unspecified, so they are always supplied by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    /// Hölder exponent, `> 1`.
    pub s: f64,
}

impl BoundConstants {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        Self::with_exponent(c1, c2, 2.0)
    }

    pub fn with_exponent(c1: f64, c2: f64, s: f64) -> Result<Self> {
        if !(c1 >= 0.0 && c2 >= 0.0 && c1.is_finite() && c2.is_finite() && s > 1.0) {
            return Err(Error::Domain(format!(
                "bound constants need C1, C2 >= 0 and s > 1; got {c1}, {c2}, {s}"
            )));
        }
        Ok(BoundConstants { c1, c2, s })
    }
}

/// `γ{log α⁻¹ + r log(v_k/v_K)} + C₁ log K` for every `k = 1..K`.
pub fn threshold_upper_bound(
    design: &FamilyDesign,
    r: f64,
    alpha: f64,
    gamma: f64,
    constants: &BoundConstants,
) -> Vec<f64> {
    let v = design.variances();
    let k = v.len();
    let vk = v[k - 1];
    v.iter()
        .map(|vi| gamma * ((1.0 / alpha).ln() + r * (vi / vk).ln()) + constants.c1 * (k as f64).ln())
        .collect()
}

/// Smallest `C₁` for which the upper template covers the given thresholds.
pub fn fit_upper_constant(design: &FamilyDesign, z: &[f64], r: f64, alpha: f64, gamma: f64) -> f64 {
    let v = design.variances();
    let k = v.len();
    let vk = v[k - 1];
    z.iter()
        .zip(v)
        .map(|(zi, vi)| (zi - gamma * ((1.0 / alpha).ln() + r * (vi / vk).ln())) / (k as f64).ln())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Lower template `(v_{k,k+1}/v_k){r log(v_{k,K}/v_K) + log α⁻¹ − C₂ log K}`
/// clamped at 0, for a zero-based `k < K − 1`.
pub fn threshold_lower_bound(
    design: &FamilyDesign,
    r: f64,
    alpha: f64,
    k: usize,
    constants: &BoundConstants,
) -> Result<f64> {
    let len = design.len();
    if k + 1 >= len {
        return Err(Error::Domain(format!("lower bound needs k < K − 1, got k = {k}")));
    }
    let v = design.variances();
    let inner = r * (design.diff_variance(k, len - 1) / v[len - 1]).ln() + (1.0 / alpha).ln()
        - constants.c2 * (len as f64).ln();
    Ok((design.diff_variance(k, k + 1) / v[k] * inner).max(0.0))
}

/// Smallest `C₂` for which every threshold lies above the lower template.
pub fn fit_lower_constant(design: &FamilyDesign, z: &[f64], r: f64, alpha: f64) -> f64 {
    let len = design.len();
    let v = design.variances();
    let log_k = (len as f64).ln();
    (0..len - 1)
        .zip(z)
        .map(|(k, zk)| {
            let ratio = design.diff_variance(k, k + 1) / v[k];
            let head = r * (design.diff_variance(k, len - 1) / v[len - 1]).ln() + (1.0 / alpha).ln();
            (head - zk / ratio) / log_k
        })
        .fold(0.0, f64::max)
}

/// `E|a + sY|^p` for standard normal `Y`.
fn shifted_abs_moment(a: f64, s: f64, p: f64, c: f64) -> f64 {
    if s == 0.0 {
        return a.abs().powf(p);
    }
    let w = a * a / (2.0 * s * s);
    if w <= 200.0 {
        // c e^{−w} ₁F₁((p+1)/2; 1/2; w), all terms positive
        let alpha = (p + 1.0) / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 0.0;
        loop {
            term *= (alpha + n) / ((0.5 + n) * (n + 1.0)) * w;
            sum += term;
            n += 1.0;
            if term <= 1e-17 * sum && n > w {
                break;
            }
        }
        s.powf(p) * c * (-w).exp() * sum
    } else {
        // expansion of E(1 + εY)^p; the sign change has mass below e^{−200}
        let eps2 = (s / a).powi(2);
        let mut coef = 1.0;
        let mut sum = 1.0;
        for j in 1..40 {
            let j = j as f64;
            // C(p, 2j)(2j−1)!! from C(p, 2j−2)(2j−3)!!
            coef *= (p - 2.0 * j + 2.0) * (p - 2.0 * j + 1.0) / (2.0 * j * (2.0 * j - 1.0))
                * (2.0 * j - 1.0)
                * eps2;
            sum += coef;
            if coef.abs() <= 1e-17 * sum {
                break;
            }
        }
        a.abs().powf(p) * sum
    }
}

/// `Q_r(ρ, z) = E[|ξ₁|^{2r} 1(ξ₂²/2 > z)]` for a standard bivariate normal
/// pair with correlation `ρ`.
pub fn q_r(rho: f64, z: f64, r: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0 && z >= 0.0 && z.is_finite() && r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "q_r needs |ρ| ≤ 1, z ≥ 0, r > 0; got ρ = {rho}, z = {z}, r = {r}"
        )));
    }
    let c = gaussian_moment(r)?;
    let p = 2.0 * r;
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let t = (2.0 * z).sqrt();
    let f = |x: f64| normal_pdf(x) * shifted_abs_moment(rho * x, s, p, c);
    Ok(2.0 * integrate(f, t, t + 12.0, 1e-13, 1e-11))
}

/// Grid summary of `z^{1/2} e^z Q_r(ρ, z)` over `ρ ∈ [−1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub r: f64,
    pub z: Vec<f64>,
    /// `z^{1/2} e^z sup_ρ Q_r(ρ, z)`.
    pub upper: Vec<f64>,
    /// `z^{1/2} e^z inf_ρ Q_r(ρ, z)`.
    pub lower: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub passed: bool,
}

pub const RHO_GRID: usize = 41;

pub fn q_r_envelope_check(r: f64, z_grid: &[f64]) -> Result<EnvelopeCheck> {
    if z_grid.is_empty() {
        return Err(Error::Domain("empty z grid".into()));
    }
    if let Some(z) = z_grid.iter().find(|z| !(**z >= 1.0)) {
        return Err(Error::Domain(format!("envelope grid needs z >= 1, got {z}")));
    }
    let rhos: Vec<f64> = (0..RHO_GRID)
        .map(|i| -1.0 + 2.0 * i as f64 / (RHO_GRID - 1) as f64)
        .collect();
    let mut upper = Vec::with_capacity(z_grid.len());
    let mut lower = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let scale = z.sqrt() * z.exp();
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for &rho in &rhos {
            let q = q_r(rho, z, r)?;
            hi = hi.max(q);
            lo = lo.min(q);
        }
        upper.push(scale * hi);
        lower.push(scale * lo);
    }

    // least squares in (1, z^r), slope clamped at 0, intercept raised to cover
    let x: Vec<f64> = z_grid.iter().map(|z| z.powf(r)).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = upper.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&upper).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let c2 = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let c1 = x
        .iter()
        .zip(&upper)
        .map(|(xi, yi)| yi - c2 * xi)
        .fold(0.0, f64::max);
    let c3 = lower.iter().copied().fold(f64::INFINITY, f64::min);
    let passed = upper.iter().chain(&lower).all(|v| v.is_finite())
        && c1.is_finite()
        && c2.is_finite()
        && c3 > 0.0;
    Ok(EnvelopeCheck {
        r,
        z: z_grid.to_vec(),
        upper,
        lower,
        c1,
        c2,
        c3,
        passed,
    })
}

/// Monte Carlo view of the two Kullback–Leibler identities at one `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlRow {
    pub delta: f64,
    /// Mean of `log Z_k` under the parametric law; target `Δ_k/2`.
    pub mean_log_z: f64,
    pub mean_se: f64,
    /// `(1/s) log E_θ Z_k^s`; target `Δ_k(s−1)/2`. `None` when `sΔ_k > 40`.
    pub log_moment: Option<f64>,
    pub log_moment_se: Option<f64>,
}

impl KlRow {
    pub fn mean_within(&self, n_se: f64) -> bool {
        (self.mean_log_z - self.delta / 2.0).abs() <= n_se * self.mean_se
    }

    /// `None` when the moment check was skipped.
    pub fn moment_within(&self, s: f64, n_se: f64) -> Option<bool> {
        let target = self.delta * (s - 1.0) / 2.0;
        Some((self.log_moment? - target).abs() <= n_se * self.log_moment_se?)
    }
}

pub const KL_EXPONENT_CAP: f64 = 40.0;

pub fn kl_identities_check(
    design: &FamilyDesign,
    truth: &TruthProfile,
    s: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<KlRow>> {
    check_len("bias", design.len(), truth.bias.len())?;
    if !(s > 1.0) || n < 2 {
        return Err(Error::Domain(format!("need s > 1 and N >= 2; got {s}, {n}")));
    }
    let len = design.len();
    let deltas = truth_deltas(design, truth)?;
    // w_k = B_k⁻¹ b(k) for every prefix
    let weights: Vec<Vec<f64>> = (1..=len)
        .map(|k| {
            let chol = Cholesky::new(leading_block(design.covariance(), k)).ok_or_else(|| {
                Error::NotPositiveDefinite(format!("leading block {k} of {}", design.label()))
            })?;
            Ok(chol.solve(&DVector::from_column_slice(&truth.bias[..k])).as_slice().to_vec())
        })
        .collect::<Result<_>>()?;
    let active: Vec<bool> = deltas.iter().map(|d| s * d <= KL_EXPONENT_CAP).collect();

    let sums = chunked_sums(n, 4 * len, |range, acc| {
        let mut xi = vec![0.0; len];
        for i in range {
            design.draw_null_into(seed, i as u64, &mut xi);
            for k in 0..len {
                let proj: f64 = weights[k].iter().zip(&xi).map(|(w, x)| w * x).sum();
                let x = -proj + deltas[k] / 2.0;
                acc[k] += x;
                acc[len + k] += x * x;
                if active[k] {
                    let e = (s * (-proj - deltas[k] / 2.0)).exp();
                    acc[2 * len + k] += e;
                    acc[3 * len + k] += e * e;
                }
            }
        }
    });

    let nf = n as f64;
    Ok((0..len)
        .map(|k| {
            let mean = sums[k] / nf;
            let var = (sums[len + k] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            let (log_moment, log_moment_se) = if active[k] {
                let m = sums[2 * len + k] / nf;
                let var_e = (sums[3 * len + k] / nf - m * m).max(0.0) * nf / (nf - 1.0);
                // delta method for (1/s) log m
                (Some(m.ln() / s), Some((var_e / nf).sqrt() / (m * s)))
            } else {
                (None, None)
            };
            KlRow {
                delta: deltas[k],
                mean_log_z: mean,
                mean_se: (var / nf).sqrt(),
                log_moment,
                log_moment_se,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{design_sequence, SequenceModelSpec};
    use crate::numeric::normal_sf;
    use nalgebra::DMatrix;

    fn toy() -> (FamilyDesign, TruthProfile) {
        design_sequence(&SequenceModelSpec {
            sigma: vec![1.0; 3],
            mu: vec![1.0, 2.0, 4.0],
            delta: 1.0,
            cutoffs: vec![3, 2, 1],
        })
        .unwrap()
    }

    fn diag(v: &[f64]) -> FamilyDesign {
        FamilyDesign::new(DMatrix::from_diagonal(&DVector::from_column_slice(v)), "diag").unwrap()
    }

    #[test]
    fn oracle_index_examples() {
        assert_eq!(oracle_index(&[0.0, 0.0, 0.0], 1.0, false).unwrap(), 2);
        assert_eq!(oracle_index(&[0.2, 0.8, 24.0], 1.0, false).unwrap(), 1);
        assert!(matches!(
            oracle_index(&[2.0, 3.0], 1.0, false),
            Err(Error::Precondition(_))
        ));
        assert_eq!(oracle_index(&[0.0, 1.0, 2.0], 1.0, false).unwrap(), 1);
        assert_eq!(oracle_index(&[0.0, 1.0, 2.0], 1.0, true).unwrap(), 0);
    }

    #[test]
    fn rhs_examples() {
        let a = oracle_rhs(1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!((a.general, a.quadratic), (1.0, 2.0));
        let e = 1f64.exp().sqrt();
        let b = oracle_rhs(1.0, 1.0, 1.0, 8.0).unwrap();
        assert!((b.general - (e + 4.0)).abs() < 1e-14);
        assert!((b.quadratic - (2.0 * e + 4.0)).abs() < 1e-14);
        let c = oracle_rhs(1.0, 0.25, 0.0, 2.0).unwrap();
        assert!((c.general - 2.5).abs() < 1e-15);
        assert!(!oracle_rhs(0.5, 1.0, 0.0, 1.0).unwrap().quadratic_applies);
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance_index(&[0.0; 3], &[9.0, 4.0, 1.0], 1.0).unwrap(), 2);
        assert_eq!(balance_index(&[0.0, 1.0, 3.0], &[9.0, 4.0, 1.0], 1.0).unwrap(), 1);
        assert_eq!(balance_index(&[0.0, -3.0, 0.0], &[9.0, 4.0, 1.0], 1.0).unwrap(), 0);
        assert!(matches!(balance_index(&[5.0], &[1.0], 1.0), Err(Error::Balance)));
        assert!((balance_level(8f64.sqrt(), 2.0, 1.0) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn upper_template() {
        let v: Vec<f64> = (1..=20).map(|k| 2f64.powi(20 - k)).collect();
        let d = diag(&v);
        let c = BoundConstants::new(1.0, 0.0).unwrap();
        let ub = threshold_upper_bound(&d, 0.5, 1.0, 1.0, &c);
        let expect = 0.5 * 19.0 * 2f64.ln() + 20f64.ln();
        assert!((ub[0] - expect).abs() < 1e-12);
        assert!((ub[0] - 9.58).abs() < 5e-3);
        assert_eq!(ub[19], 20f64.ln());
        let ub = threshold_upper_bound(&d, 0.5, 0.1, 0.7, &c);
        assert!((ub[19] - (20f64.ln() + 0.7 * 10f64.ln())).abs() < 1e-14);
        // fitted constant reproduces the binding threshold exactly
        let z: Vec<f64> = (0..19).map(|k| 1.0 + 0.3 * k as f64).collect();
        let c1 = fit_upper_constant(&d, &z, 0.5, 1.0, 1.0);
        let fitted = threshold_upper_bound(&d, 0.5, 1.0, 1.0, &BoundConstants::new(c1.max(0.0), 0.0).unwrap());
        assert!(z.iter().zip(&fitted).all(|(a, b)| a <= &(b + 1e-12)));
    }

    #[test]
    fn lower_template() {
        let seq = crate::family::SequenceShape {
            sigma: vec![1.0, 1.0, 2f64.sqrt()],
            cutoffs: vec![3, 2, 1],
        }
        .design(1.0)
        .unwrap();
        assert_eq!(seq.variances(), &[4.0, 2.0, 1.0]);
        let c = BoundConstants::new(0.0, 0.0).unwrap();
        let lb = threshold_lower_bound(&seq, 1.0, 1.0, 0, &c).unwrap();
        assert!((lb - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((lb - 0.549).abs() < 1e-3);
        let big = BoundConstants::new(0.0, 100.0).unwrap();
        assert_eq!(threshold_lower_bound(&seq, 1.0, 1.0, 0, &big).unwrap(), 0.0);
        let two = crate::family::SequenceShape {
            sigma: vec![1.0, 1.0],
            cutoffs: vec![2, 1],
        }
        .design(1.0)
        .unwrap();
        assert_eq!(threshold_lower_bound(&two, 0.7, 1.0, 0, &c).unwrap(), 0.0);
        assert!(threshold_lower_bound(&two, 0.7, 1.0, 1, &c).is_err());
        let c2 = fit_lower_constant(&seq, &[0.0, 0.0], 1.0, 1.0);
        assert!((c2 - 3f64.ln() / 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shifted_moment_matches_closed_forms() {
        // p = 2: a² + s²; p = 4: a⁴ + 6a²s² + 3s⁴
        for &(a, s) in &[(0.3, 1.0), (2.0, 0.5), (25.0, 1.0), (-40.0, 0.9), (0.0, 2.0)] {
            let g2 = shifted_abs_moment(a, s, 2.0, 1.0);
            assert!((g2 - (a * a + s * s)).abs() <= 1e-12 * (a * a + s * s));
            let g4 = shifted_abs_moment(a, s, 4.0, 3.0);
            let e4 = a.powi(4) + 6.0 * a * a * s * s + 3.0 * s.powi(4);
            assert!((g4 - e4).abs() <= 1e-12 * e4);
            // p = 1: E|a + sY| = a(1 − 2Φ(−a/s)) + 2sφ(a/s)
            let g1 = shifted_abs_moment(a, s, 1.0, (2.0 / std::f64::consts::PI).sqrt());
            let m = a.abs() / s;
            let e1 = a.abs() * (1.0 - 2.0 * normal_sf(m)) + 2.0 * s * normal_pdf(m);
            assert!((g1 - e1).abs() <= 1e-12 * e1, "{a} {s}: {g1} vs {e1}");
        }
    }

    #[test]
    fn q_r_examples() {
        for &r in &[0.5, 1.0, 1.7] {
            let c = gaussian_moment(r).unwrap();
            for &rho in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
                assert!((q_r(rho, 0.0, r).unwrap() - c).abs() < 1e-8);
            }
            for &z in &[0.3f64, 2.0, 7.5] {
                let expect = c * 2.0 * normal_sf((2.0 * z).sqrt());
                assert!((q_r(0.0, z, r).unwrap() - expect).abs() < 1e-10);
            }
        }
        for &z in &[0.0f64, 0.5, 1.0, 4.0, 10.0] {
            let t = (2.0 * z).sqrt();
            let expect = 2.0 * (t * normal_pdf(t) + normal_sf(t));
            assert!((q_r(1.0, z, 1.0).unwrap() - expect).abs() < 1e-10);
        }
        assert!(q_r(1.1, 1.0, 1.0).is_err());
        assert!(q_r(0.5, -1.0, 1.0).is_err());
        assert!(q_r(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn envelope_rejects_small_z() {
        assert!(q_r_envelope_check(1.0, &[0.5, 1.0]).is_err());
        let e = q_r_envelope_check(0.5, &[1.0]).unwrap();
        assert!(e.lower[0] > 0.0 && e.passed);
    }

    #[test]
    fn kl_zero_bias_is_exact() {
        let (design, _) = toy();
        let zero = TruthProfile::new(0.0, vec![0.0; 3]);
        let rows = kl_identities_check(&design, &zero, 2.0, 1000, 3).unwrap();
        for row in rows {
            assert_eq!(row.mean_log_z, 0.0);
            assert_eq!(row.log_moment, Some(0.0));
        }
    }

    #[test]
    fn kl_large_delta_mean_and_skip() {
        let (design, truth) = toy();
        let rows = kl_identities_check(&design, &truth, 2.0, 100_000, 11).unwrap();
        assert!((rows[1].delta - 24.0).abs() < 1e-12);
        assert!(rows[1].mean_within(3.0));
        assert!(rows[1].log_moment.is_none());
        assert!(rows[0].moment_within(2.0, 3.0).unwrap());
    }

    #[test]
    fn report_uses_zero_beyond_last_threshold() {
        let (design, _) = toy();
        let zero = TruthProfile::new(0.0, vec![0.0; 3]);
        let z = CriticalValues::manual(vec![3.0, 2.0]).unwrap();
        let rep = oracle_report(&design, &zero, &z, 1.0, 1.0, 1.0, false).unwrap();
        assert_eq!(rep.k_star, 2);
        assert_eq!(rep.z_at_kstar, 0.0);
        assert_eq!(rep.rhs.general, 1f64.exp().sqrt());
    }
}
