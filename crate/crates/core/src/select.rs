//! Pairwise test statistics and the sequential acceptance rule.
//!
//! Indices are zero-based throughout the library: estimate `0` is the most
//! variable one and threshold `z[l]` belongs to the comparison against
//! estimate `l`. Text outputs shift to one-based numbering.

use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// One realization of the family together with its variances.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateVector {
    values: Vec<f64>,
    variances: Vec<f64>,
}

impl EstimateVector {
    pub fn new(values: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        check_len("estimates", variances.len(), values.len())?;
        if values.is_empty() {
            return Err(Error::Domain("empty estimate vector".into()));
        }
        if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Domain(format!("variance {v} must be positive")));
        }
        Ok(EstimateVector { values, variances })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

/// Position of the pair `(l, k)`, `l < k`, in a packed upper triangle.
#[inline]
pub fn pair_index(l: usize, k: usize) -> usize {
    debug_assert!(l < k);
    k * (k - 1) / 2 + l
}

pub fn pair_count(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

/// `T_lk = (θ̃_l − θ̃_k)² / (2 v_l)`.
#[inline]
pub fn statistic(theta_l: f64, theta_k: f64, v_l: f64) -> f64 {
    let d = theta_l - theta_k;
    d * d / (2.0 * v_l)
}

/// Table of `T_lk` for all `l < k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairStats {
    k: usize,
    t: Vec<f64>,
}

impl PairStats {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.t[pair_index(l, k)]
    }

    pub fn packed(&self) -> &[f64] {
        &self.t
    }
}

pub fn pair_stats(est: &EstimateVector) -> PairStats {
    let k = est.len();
    let mut t = vec![0.0; pair_count(k)];
    for m in 1..k {
        for l in 0..m {
            t[pair_index(l, m)] = statistic(est.values[l], est.values[m], est.variances[l]);
        }
    }
    PairStats { k, t }
}

/// Where a set of thresholds came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Provenance {
    Manual,
    Calibrated {
        r: f64,
        alpha: f64,
        replications: usize,
        seed: u64,
        design_label: String,
        design_hash: String,
    },
}

/// Thresholds `z_1, …, z_{K−1}`; `+∞` disables a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalValues {
    z: Vec<f64>,
    pub provenance: Provenance,
}

impl CriticalValues {
    pub fn new(z: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if let Some(x) = z.iter().find(|x| x.is_nan() || **x < 0.0) {
            return Err(Error::Domain(format!("critical value {x} must be >= 0")));
        }
        Ok(CriticalValues { z, provenance })
    }

    pub fn manual(z: Vec<f64>) -> Result<Self> {
        Self::new(z, Provenance::Manual)
    }

    /// All thresholds infinite: the rule accepts every estimate.
    pub fn infinite(k: usize) -> Self {
        CriticalValues {
            z: vec![f64::INFINITY; k.saturating_sub(1)],
            provenance: Provenance::Manual,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    /// Family size these thresholds serve.
    pub fn family_len(&self) -> usize {
        self.z.len() + 1
    }
}

/// Outcome of the sequential rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Selection {
    /// Last accepted index `k̂`.
    pub index: usize,
    /// First pair `(l, k)` with `T_lk > z_l`, if any.
    pub first_rejection: Option<(usize, usize)>,
}

/// Runs the rule: step `k` is accepted iff step `k − 1` was and
/// `T_lk ≤ z_l` for every `l < k`. Equality accepts.
pub fn select(stats: &PairStats, z: &CriticalValues) -> Result<Selection> {
    check_len("critical values", stats.len().saturating_sub(1), z.values().len())?;
    let zs = z.values();
    for k in 1..stats.len() {
        for (l, &zl) in zs.iter().enumerate().take(k) {
            if stats.get(l, k) > zl {
                return Ok(Selection {
                    index: k - 1,
                    first_rejection: Some((l, k)),
                });
            }
        }
    }
    Ok(Selection {
        index: stats.len() - 1,
        first_rejection: None,
    })
}

pub fn select_index(stats: &PairStats, z: &CriticalValues) -> Result<usize> {
    select(stats, z).map(|s| s.index)
}

/// Index of `θ̂_k`, the latest accepted estimate after the first `k` steps.
pub fn stepwise_index(stats: &PairStats, z: &CriticalValues, k: usize) -> Result<usize> {
    if k >= stats.len() {
        return Err(Error::Domain(format!(
            "step {k} out of range for a family of {}",
            stats.len()
        )));
    }
    Ok(select_index(stats, z)?.min(k))
}

/// Checks `T[k][k̂] ≤ z_k` for every `k < k̂`, which holds by construction.
pub fn stability_holds(stats: &PairStats, z: &CriticalValues, selected: usize) -> bool {
    (0..selected).all(|k| stats.get(k, selected) <= z.values()[k])
}
