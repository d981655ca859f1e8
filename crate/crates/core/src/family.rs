//! Estimate families: exact covariance structure, truth profiles and
//! null-model samplers.
//!
//! A family is an ordered list of Gaussian estimates `θ̃_1, …, θ̃_K` of one
//! scalar target. Index 0 is the most variable estimate; variances must
//! strictly decrease along the ladder. Three generators are provided:
//! spectral cut-off sums in a sequence-space model, kernel averages with a
//! bandwidth ladder, and arbitrary linear functionals of a vector with
//! diagonal noise.

use std::borrow::Cow;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::rng::substream;

/// Relative tolerance for the strict-decrease check on variances.
pub const ORDER_TOL: f64 = 1e-12;

/// Known distributional structure of an estimate family.
#[derive(Clone, Debug)]
pub struct FamilyDesign {
    variances: Vec<f64>,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    label: String,
    structure: Structure,
}

#[derive(Clone, Debug, PartialEq)]
enum Structure {
    /// Spectral cut-off sums; `sigma` is at unit noise, `noise` is δ.
    Sequence {
        sigma: Vec<f64>,
        cutoffs: Vec<usize>,
        noise: f64,
    },
    Generic,
}

impl FamilyDesign {
    /// Validates `covariance` as the covariance of an ordered family.
    pub fn new(covariance: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        Self::build(covariance, label.into(), Structure::Generic)
    }

    fn build(covariance: DMatrix<f64>, label: String, structure: Structure) -> Result<Self> {
        let k = covariance.nrows();
        if k == 0 || covariance.ncols() != k {
            return Err(Error::Domain(format!(
                "covariance must be a non-empty square matrix, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let variances: Vec<f64> = (0..k).map(|i| covariance[(i, i)]).collect();
        for (i, &v) in variances.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("variance {i} is {v}")));
            }
        }
        for l in 0..k {
            for m in (l + 1)..k {
                let (a, b) = (covariance[(l, m)], covariance[(m, l)]);
                let scale = variances[l].max(variances[m]);
                if (a - b).abs() > 1e-12 * scale || !a.is_finite() {
                    return Err(Error::Domain(format!(
                        "covariance not symmetric at ({l}, {m}): {a} vs {b}"
                    )));
                }
            }
        }
        for i in 1..k {
            if variances[i] >= variances[i - 1] * (1.0 - ORDER_TOL) {
                return Err(Error::Ordering(format!(
                    "variance {} = {} does not strictly decrease from {}",
                    i,
                    variances[i],
                    variances[i - 1]
                )));
            }
        }
        for l in 0..k {
            for m in (l + 1)..k {
                let dv = variances[l] + variances[m] - 2.0 * covariance[(l, m)];
                if dv < -1e-12 * (variances[l] + variances[m]) {
                    return Err(Error::Domain(format!(
                        "difference variance v_({l},{m}) = {dv} is negative"
                    )));
                }
            }
        }
        let factor = linalg::cholesky_lower(&covariance, &label)?;
        Ok(FamilyDesign {
            variances,
            covariance,
            factor,
            label,
            structure,
        })
    }

    pub fn len(&self) -> usize {
        self.variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variances.is_empty()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Lower triangular factor `L` with `L Lᵀ = B`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `Var(θ̃_l − θ̃_k)`.
    pub fn diff_variance(&self, l: usize, k: usize) -> f64 {
        let v = self.variances[l] + self.variances[k] - 2.0 * self.covariance[(l, k)];
        v.max(0.0)
    }

    pub fn is_sequence(&self) -> bool {
        matches!(self.structure, Structure::Sequence { .. })
    }

    /// Noise scale δ of a sequence design, `None` for generic designs.
    pub fn noise_scale(&self) -> Option<f64> {
        match &self.structure {
            Structure::Sequence { noise, .. } => Some(*noise),
            Structure::Generic => None,
        }
    }

    /// The same design at unit noise scale. Standardized statistics do not
    /// depend on δ, so calibration always samples this version.
    pub fn unit_noise(&self) -> Result<Cow<'_, FamilyDesign>> {
        match &self.structure {
            Structure::Sequence {
                sigma,
                cutoffs,
                noise,
            } if *noise != 1.0 => {
                let shape = SequenceShape {
                    sigma: sigma.clone(),
                    cutoffs: cutoffs.clone(),
                };
                Ok(Cow::Owned(shape.design(1.0)?))
            }
            _ => Ok(Cow::Borrowed(self)),
        }
    }

    /// Short stable hash of the covariance and label.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        for x in self.covariance.iter() {
            hasher.update(x.to_bits().to_le_bytes());
        }
        hasher.update(self.label.as_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes one draw of `ξ ~ N(0, B)` for replication `rep` into `out`.
    pub fn draw_null_into(&self, seed: u64, rep: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let mut rng = substream(seed, rep);
        match &self.structure {
            Structure::Sequence {
                sigma,
                cutoffs,
                noise,
            } => {
                // ξ_k = Σ_{i ≤ m_k} δσ_i ε_i, filled from the last (shortest) sum
                let mut acc = 0.0;
                let mut k = cutoffs.len();
                for (i, &s) in sigma.iter().enumerate().take(cutoffs[0]) {
                    let eps: f64 = rng.sample(StandardNormal);
                    acc += noise * s * eps;
                    while k > 0 && cutoffs[k - 1] == i + 1 {
                        out[k - 1] = acc;
                        k -= 1;
                    }
                }
            }
            Structure::Generic => {
                let k = self.len();
                let mut z = vec![0.0; k];
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for i in 0..k {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += self.factor[(i, j)] * z[j];
                    }
                    out[i] = acc;
                }
            }
        }
    }

    /// `count` draws of the null errors, replication `i` from substream `i`.
    pub fn sample_null(&self, count: usize, seed: u64) -> NullDraws {
        let dim = self.len();
        let mut data = vec![0.0; count * dim];
        data.par_chunks_mut(dim)
            .enumerate()
            .for_each(|(i, row)| self.draw_null_into(seed, i as u64, row));
        NullDraws { dim, data }
    }
}

/// Row-major block of null draws, one row per replication.
#[derive(Clone, Debug)]
pub struct NullDraws {
    dim: usize,
    data: Vec<f64>,
}

impl NullDraws {
    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Simulation-side truth for one family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthProfile {
    pub theta: f64,
    pub theta_k: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TruthProfile {
    pub fn new(theta: f64, theta_k: Vec<f64>) -> Self {
        let bias = theta_k.iter().map(|t| t - theta).collect();
        TruthProfile {
            theta,
            theta_k,
            bias,
        }
    }

    /// Truth with the biases multiplied by `c` around the same target.
    pub fn scale_bias(&self, c: f64) -> Self {
        let theta_k = self.bias.iter().map(|b| self.theta + c * b).collect();
        TruthProfile::new(self.theta, theta_k)
    }
}

/// Modeling biases `Δ_k = b(k)ᵀ B_k⁻¹ b(k)` for every prefix length.
///
/// The leading `k × k` block of the Cholesky factor of `B` factors `B_k`, so
/// with `L y = b` every `Δ_k` is the partial sum `y_1² + … + y_k²`.
pub fn truth_deltas(design: &FamilyDesign, truth: &TruthProfile) -> Result<Vec<f64>> {
    check_len("bias vector", design.len(), truth.bias.len())?;
    let y = linalg::forward_substitute(design.factor(), &truth.bias);
    let mut acc = 0.0;
    Ok(y
        .iter()
        .map(|yi| {
            acc += yi * yi;
            acc
        })
        .collect())
}

/// Noise-free shape of a sequence-space family: `σ_i` at unit noise and
/// the cut-off ladder `m_1 > … > m_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceShape {
    pub sigma: Vec<f64>,
    pub cutoffs: Vec<usize>,
}

impl SequenceShape {
    fn validate(&self) -> Result<()> {
        let n = self.sigma.len();
        if n == 0 {
            return Err(Error::Domain("sequence model needs n >= 1".into()));
        }
        if let Some((i, s)) = self
            .sigma
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.is_finite() && **s > 0.0))
        {
            return Err(Error::Domain(format!("sigma[{i}] = {s} must be positive")));
        }
        let Some(&first) = self.cutoffs.first() else {
            return Err(Error::Domain("empty cutoff ladder".into()));
        };
        if first > n {
            return Err(Error::Domain(format!("cutoff m_1 = {first} exceeds n = {n}")));
        }
        if self.cutoffs.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Ordering(format!(
                "cutoffs must strictly decrease: {:?}",
                self.cutoffs
            )));
        }
        if *self.cutoffs.last().unwrap() < 1 {
            return Err(Error::Domain("cutoffs must be >= 1".into()));
        }
        Ok(())
    }

    /// Design at noise scale `delta`.
    pub fn design(&self, delta: f64) -> Result<FamilyDesign> {
        self.validate()?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Domain(format!("noise scale {delta} must be positive")));
        }
        let cum = cumulative(self.sigma.iter().map(|s| {
            let sd = delta * s;
            sd * sd
        }));
        let v: Vec<f64> = self.cutoffs.iter().map(|&m| cum[m - 1]).collect();
        let k = v.len();
        let b = DMatrix::from_fn(k, k, |l, m| v[l.max(m)]);
        let label = format!(
            "sequence(n={},K={},m_K={},delta={})",
            self.sigma.len(),
            k,
            self.cutoffs[k - 1],
            delta
        );
        FamilyDesign::build(
            b,
            label,
            Structure::Sequence {
                sigma: self.sigma.clone(),
                cutoffs: self.cutoffs.clone(),
                noise: delta,
            },
        )
    }

    /// Shape used in the first simulated example: `σ_i = a^i` with
    /// `a = n^{2/n}` and cutoffs `n, n−2, …` (K = 20 at n = 50).
    pub fn severely_ill_posed(n: usize, k: usize) -> Result<Self> {
        let a = (n as f64).powf(2.0 / n as f64);
        let sigma = (1..=n).map(|i| a.powi(i as i32)).collect();
        let cutoffs = (0..k)
            .map(|j| n.checked_sub(2 * j).filter(|m| *m >= 1))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Domain(format!("K = {k} too large for n = {n}")))?;
        Ok(SequenceShape { sigma, cutoffs })
    }

    /// Shape used in the second simulated example: `σ_i = i²` with
    /// cutoffs `⌊n / 2^{(k−1)/5}⌋` (K = 15 at n = 50).
    pub fn mildly_ill_posed(n: usize, k: usize) -> Result<Self> {
        let sigma = (1..=n).map(|i| (i * i) as f64).collect();
        let ratio = 2f64.powf(0.2);
        let cutoffs: Vec<usize> = (0..k)
            .map(|j| (n as f64 / ratio.powi(j as i32)).floor() as usize)
            .collect();
        let shape = SequenceShape { sigma, cutoffs };
        shape.validate()?;
        Ok(shape)
    }
}

fn cumulative(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Sequence-space model `y_i = μ_i + δσ_i ε_i`, estimates `y_1 + … + y_{m_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceModelSpec {
    pub sigma: Vec<f64>,
    pub mu: Vec<f64>,
    pub delta: f64,
    pub cutoffs: Vec<usize>,
}

impl SequenceModelSpec {
    pub fn shape(&self) -> SequenceShape {
        SequenceShape {
            sigma: self.sigma.clone(),
            cutoffs: self.cutoffs.clone(),
        }
    }
}

pub fn design_sequence(spec: &SequenceModelSpec) -> Result<(FamilyDesign, TruthProfile)> {
    check_len("mu", spec.sigma.len(), spec.mu.len())?;
    let design = spec.shape().design(spec.delta)?;
    let cum_mu = cumulative(spec.mu.iter().copied());
    let theta = *cum_mu.last().unwrap();
    let theta_k = spec.cutoffs.iter().map(|&m| cum_mu[m - 1]).collect();
    Ok((design, TruthProfile::new(theta, theta_k)))
}

/// Localizing kernel `ψ` on `[0, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `1(t ≤ 1)`
    Rectangular,
    Triangular,
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    pub fn weight(self, t: f64) -> f64 {
        match self {
            Kernel::Rectangular => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Triangular => (1.0 - t).max(0.0),
            Kernel::Epanechnikov => (1.0 - t * t).max(0.0),
            Kernel::Gaussian => (-0.5 * t * t).exp(),
        }
    }
}

/// Kernel regression `Y_i = f(X_i) + σε_i` estimated at one point with a
/// ladder of bandwidths (smallest first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelModelSpec {
    pub design_points: Vec<f64>,
    pub point: f64,
    pub bandwidths: Vec<f64>,
    pub kernel: Kernel,
    pub noise_sd: f64,
    pub f_values: Vec<f64>,
    /// `f(x)` at the estimation point.
    pub target: f64,
}

impl KernelModelSpec {
    /// Weight ladder `w_i^{(k)} = ψ(|X_i − x| / h_k)`.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.bandwidths
            .iter()
            .map(|h| {
                self.design_points
                    .iter()
                    .map(|x| self.kernel.weight((x - self.point).abs() / h))
                    .collect()
            })
            .collect()
    }
}

pub fn design_kernel(spec: &KernelModelSpec) -> Result<(FamilyDesign, TruthProfile)> {
    check_len("f_values", spec.design_points.len(), spec.f_values.len())?;
    if !(spec.noise_sd.is_finite() && spec.noise_sd > 0.0) {
        return Err(Error::Domain(format!("noise sd {} must be positive", spec.noise_sd)));
    }
    if spec.bandwidths.is_empty() || spec.bandwidths.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::Domain("bandwidths must be positive and non-empty".into()));
    }
    let weights = spec.weights();
    let mut totals = Vec::with_capacity(weights.len());
    for (k, w) in weights.iter().enumerate() {
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyWindow { index: k });
        }
        totals.push(total);
    }
    let k = weights.len();
    let var = spec.noise_sd * spec.noise_sd;
    let b = DMatrix::from_fn(k, k, |l, m| {
        let cross: f64 = weights[l].iter().zip(&weights[m]).map(|(a, b)| a * b).sum();
        var * cross / (totals[l] * totals[m])
    });
    let theta_k = weights
        .iter()
        .zip(&totals)
        .map(|(w, n)| w.iter().zip(&spec.f_values).map(|(a, f)| a * f).sum::<f64>() / n)
        .collect();
    let label = format!(
        "kernel({:?},n={},K={},x={})",
        spec.kernel,
        spec.design_points.len(),
        k,
        spec.point
    );
    let design = FamilyDesign::new(b, label)?;
    Ok((design, TruthProfile::new(spec.target, theta_k)))
}

/// Explicit linear functionals `θ̃_k = ⟨φ_k, Y⟩` of `Y ~ N(c, diag(Σ))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalModelSpec {
    pub phi: Vec<Vec<f64>>,
    pub noise_cov_diag: Vec<f64>,
    /// Mean vector `c = E Y`.
    pub target_coeffs: Vec<f64>,
    /// Target value; defaults to `Σ_i c_i`.
    #[serde(default)]
    pub theta: Option<f64>,
}

pub fn design_functional(spec: &FunctionalModelSpec) -> Result<(FamilyDesign, TruthProfile)> {
    let n = spec.noise_cov_diag.len();
    check_len("target_coeffs", n, spec.target_coeffs.len())?;
    if spec.phi.is_empty() {
        return Err(Error::Domain("no functionals given".into()));
    }
    for phi in &spec.phi {
        check_len("functional", n, phi.len())?;
    }
    if let Some(s) = spec.noise_cov_diag.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::Domain(format!("noise variance {s} must be positive")));
    }
    let k = spec.phi.len();
    let b = DMatrix::from_fn(k, k, |l, m| {
        let mut acc = 0.0;
        for i in 0..n {
            acc += spec.phi[l][i] * spec.phi[m][i] * spec.noise_cov_diag[i];
        }
        acc
    });
    let theta_k = spec
        .phi
        .iter()
        .map(|phi| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += phi[i] * spec.target_coeffs[i];
            }
            acc
        })
        .collect();
    let theta = spec.theta.unwrap_or_else(|| {
        let mut acc = 0.0;
        for c in &spec.target_coeffs {
            acc += c;
        }
        acc
    });
    let design = FamilyDesign::new(b, format!("functional(n={n},K={k})"))?;
    Ok((design, TruthProfile::new(theta, theta_k)))
}
