//! Monte Carlo calibration of the critical values under the null.
//!
//! Thresholds are fixed one after another. At stage `m` the earlier
//! thresholds are frozen, all later ones are infinite, and `z_m` is the
//! smallest value for which every later step keeps its false-alarm risk
//! `E_0 |v_k⁻¹(θ̂_k − θ̃_k)²|^r` below `(m / (K−1))·α·c_r`. One null sample
//! is drawn up front and reused for every stage and every bisection probe.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnose::gamma_of;
use crate::error::{Error, Result};
use crate::family::{FamilyDesign, NullDraws};
use crate::numeric::ln_gamma;
use crate::parallel::chunked_sums;
use crate::select::{pair_count, pair_index, statistic, CriticalValues, Provenance};

/// `c_r = E|ξ|^{2r} = 2^r Γ(r + 1/2) / Γ(1/2)` for standard normal `ξ`.
pub fn gaussian_moment(r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::Domain(format!("loss power r = {r} must be positive")));
    }
    Ok((r * 2f64.ln() + ln_gamma(r + 0.5) - 0.5 * PI.ln()).exp())
}

/// `x^r` with exact fast paths for the common powers.
#[inline]
pub fn loss_power(x: f64, r: f64) -> f64 {
    if r == 1.0 {
        x
    } else if r == 0.5 {
        x.sqrt()
    } else {
        x.powf(r)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Storage {
    /// Keep the full `T` and `d` tables (about `N·K²` reals).
    #[default]
    Tables,
    /// Keep only the draws and recompute table entries on access.
    Draws,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub r: f64,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub bisection_tol: f64,
    /// Ceiling for bracket doubling; `None` derives it from the sample.
    pub max_bracket: Option<f64>,
    pub storage: Storage,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            r: 0.5,
            alpha: 1.0,
            replications: 50_000,
            seed: 1,
            bisection_tol: 1e-3,
            max_bracket: None,
            storage: Storage::Tables,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::Domain(format!("r = {} must be positive", self.r)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Domain(format!("alpha = {} must be positive", self.alpha)));
        }
        if self.replications < 1000 {
            return Err(Error::Domain(format!(
                "{} replications is too few (need >= 1000)",
                self.replications
            )));
        }
        if !(self.bisection_tol > 0.0) {
            return Err(Error::Domain("bisection tolerance must be positive".into()));
        }
        if let Some(c) = self.max_bracket {
            if !(c > 0.0) {
                return Err(Error::Domain("max_bracket must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Null replications with the statistics every false-alarm loss needs:
/// `T[m][k]` and `d[m][k] = v_k⁻¹(θ̃_m − θ̃_k)²` for all `m < k`.
#[derive(Clone, Debug)]
pub struct NullSample {
    k: usize,
    seed: u64,
    label: String,
    hash: String,
    variances: Vec<f64>,
    draws: NullDraws,
    tables: Option<(Vec<f64>, Vec<f64>)>,
}

/// Borrowed view of one replication.
#[derive(Clone, Copy)]
pub enum Replication<'a> {
    Tables { t: &'a [f64], d: &'a [f64] },
    Draws { xi: &'a [f64], v: &'a [f64] },
}

impl Replication<'_> {
    #[inline]
    pub fn t(&self, l: usize, k: usize) -> f64 {
        match self {
            Replication::Tables { t, .. } => t[pair_index(l, k)],
            Replication::Draws { xi, v } => statistic(xi[l], xi[k], v[l]),
        }
    }

    #[inline]
    pub fn d(&self, m: usize, k: usize) -> f64 {
        match self {
            Replication::Tables { d, .. } => d[pair_index(m, k)],
            Replication::Draws { xi, v } => deviation(xi[m], xi[k], v[k]),
        }
    }
}

#[inline]
fn deviation(theta_m: f64, theta_k: f64, v_k: f64) -> f64 {
    let x = theta_m - theta_k;
    x * x / v_k
}

impl NullSample {
    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn replications(&self) -> usize {
        self.draws.count()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn design_hash(&self) -> &str {
        &self.hash
    }

    /// Variances of the (unit-noise) design the sample was drawn from.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn draws(&self) -> &NullDraws {
        &self.draws
    }

    pub fn replication(&self, i: usize) -> Replication<'_> {
        match &self.tables {
            Some((t, d)) => {
                let p = pair_count(self.k);
                Replication::Tables {
                    t: &t[i * p..(i + 1) * p],
                    d: &d[i * p..(i + 1) * p],
                }
            }
            None => Replication::Draws {
                xi: self.draws.row(i),
                v: &self.variances,
            },
        }
    }
}

/// Draws `replications` null vectors and tabulates their statistics.
pub fn build_null_sample(design: &FamilyDesign, config: &CalibrationConfig) -> Result<NullSample> {
    if config.replications == 0 {
        return Err(Error::Domain("need at least one replication".into()));
    }
    let unit = design.unit_noise()?;
    let k = unit.len();
    let variances = unit.variances().to_vec();
    let draws = unit.sample_null(config.replications, config.seed);
    let tables = match config.storage {
        Storage::Draws => None,
        Storage::Tables => {
            let p = pair_count(k);
            let mut t = vec![0.0; config.replications * p];
            let mut d = vec![0.0; config.replications * p];
            if p > 0 {
                t.par_chunks_mut(p)
                    .zip(d.par_chunks_mut(p))
                    .enumerate()
                    .for_each(|(i, (trow, drow))| {
                        let xi = draws.row(i);
                        for m in 1..k {
                            for l in 0..m {
                                trow[pair_index(l, m)] = statistic(xi[l], xi[m], variances[l]);
                                drow[pair_index(l, m)] = deviation(xi[l], xi[m], variances[m]);
                            }
                        }
                    });
            }
            Some((t, d))
        }
    };
    Ok(NullSample {
        k,
        seed: config.seed,
        label: unit.label().to_string(),
        hash: unit.fingerprint(),
        variances,
        draws,
        tables,
    })
}

/// First rejected step of `rep` under thresholds `z` (entries beyond
/// `z.len()` are infinite); `K` when every step is accepted.
fn first_failure(rep: &Replication<'_>, z: &[f64], k: usize) -> usize {
    for step in 1..k {
        for (l, &zl) in z.iter().enumerate().take(step) {
            if rep.t(l, step) > zl {
                return step;
            }
        }
    }
    k
}

/// Empirical false-alarm risks for every step under thresholds
/// `z_prefix` padded with `+∞`. Entry `k` is
/// `mean |v_k⁻¹(θ̂_k − θ̃_k)²|^r`; entry 0 is always 0.
pub fn risk_profile(sample: &NullSample, z_prefix: &[f64], r: f64) -> Result<Vec<f64>> {
    let k = sample.len();
    if z_prefix.len() >= k.max(1) {
        return Err(Error::Domain(format!(
            "{} thresholds for a family of {k}",
            z_prefix.len()
        )));
    }
    let n = sample.replications();
    let sums = chunked_sums(n, k, |range, acc| {
        for i in range {
            let rep = sample.replication(i);
            let fail = first_failure(&rep, z_prefix, k);
            if fail < k {
                for (step, a) in acc.iter_mut().enumerate().skip(fail) {
                    *a += loss_power(rep.d(fail - 1, step), r);
                }
            }
        }
    });
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// Risk at one step `k` (zero-based, `k ≥ z_prefix.len()`).
pub fn propagation_risk(sample: &NullSample, z_prefix: &[f64], k: usize, r: f64) -> Result<f64> {
    if k < z_prefix.len() || k >= sample.len() {
        return Err(Error::Domain(format!(
            "step {k} not in {}..{}",
            z_prefix.len(),
            sample.len()
        )));
    }
    Ok(risk_profile(sample, z_prefix, r)?[k])
}

/// Per-stage diagnostics of a calibration run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageSummary {
    pub z: f64,
    /// `(m / (K−1))·α·c_r`.
    pub target: f64,
    /// Risk at the last step with the thresholds fixed so far.
    pub achieved_risk_at_last: f64,
    /// Largest risk over the constrained steps.
    pub max_risk: f64,
    pub probes: usize,
}

#[derive(Clone, Debug)]
pub struct Calibration {
    pub values: CriticalValues,
    pub stages: Vec<StageSummary>,
    pub c_r: f64,
}

/// Calibrates thresholds for `design`; draws a fresh null sample.
pub fn calibrate(design: &FamilyDesign, config: &CalibrationConfig) -> Result<Calibration> {
    config.validate()?;
    if design.len() < 2 {
        return Err(Error::Domain("calibration needs K >= 2".into()));
    }
    let sample = build_null_sample(design, config)?;
    let gamma = gamma_of(design);
    calibrate_on(&sample, config, gamma)
}

/// Sequential calibration on an existing sample.
///
/// `gamma` (the uniform bound on `v_lk / v_l`) only seeds the bracket.
pub fn calibrate_on(
    sample: &NullSample,
    config: &CalibrationConfig,
    gamma: f64,
) -> Result<Calibration> {
    let k = sample.len();
    if k < 2 {
        return Err(Error::Domain("calibration needs K >= 2".into()));
    }
    let r = config.r;
    let c_r = gaussian_moment(r)?;
    let n = sample.replications();
    let v = sample.variances();
    let mut fail: Vec<usize> = vec![k; n];
    let mut z = Vec::with_capacity(k - 1);
    let mut stages = Vec::with_capacity(k - 1);

    for m in 0..k - 1 {
        let target = (m + 1) as f64 / (k - 1) as f64 * config.alpha * c_r;
        let fail_ref = &fail;
        // risks for steps m+1..K under threshold `zm` at stage m
        let eval = |zm: f64| -> Profile {
            let sums = chunked_sums(n, 2 * k, |range, acc| {
                for i in range {
                    let rep = sample.replication(i);
                    let prev = fail_ref[i];
                    let mut f = prev;
                    for step in (m + 1)..prev {
                        if rep.t(m, step) > zm {
                            f = step;
                            break;
                        }
                    }
                    if f < k {
                        let (first, second) = acc.split_at_mut(k);
                        for step in f.max(m + 1)..k {
                            let x = loss_power(rep.d(f - 1, step), r);
                            first[step] += x;
                            second[step] += x * x;
                        }
                    }
                }
            });
            Profile::from_sums(sums, n)
        };
        let feasible = |p: &Profile| p.mean[m + 1..].iter().all(|x| *x <= target);
        let mut probes = 1;

        let at_zero = eval(0.0);
        let (zm, risks) = if feasible(&at_zero) {
            (0.0, at_zero)
        } else {
            let ceiling = config.max_bracket.unwrap_or_else(|| {
                let max_t = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let rep = sample.replication(i);
                        ((m + 1)..k).map(|s| rep.t(m, s)).fold(0.0, f64::max)
                    })
                    .reduce(|| 0.0, f64::max);
                2.0 * max_t + 1.0
            });
            let start = 2.0 * gamma * ((1.0 / config.alpha).ln() + r * (v[m] / v[k - 1]).ln())
                + 4.0 * (k as f64).ln();
            let mut hi = start.max(1.0).min(ceiling);
            let (mut lo, mut lo_risks) = (0.0, at_zero);
            let mut hi_risks = eval(hi);
            probes += 1;
            while !feasible(&hi_risks) {
                check_monotone(&lo_risks, &hi_risks, m)?;
                if hi >= ceiling {
                    return Err(Error::Bracket { step: m, ceiling });
                }
                lo = hi;
                lo_risks = hi_risks;
                hi = (2.0 * hi).min(ceiling);
                hi_risks = eval(hi);
                probes += 1;
            }
            while hi - lo > config.bisection_tol {
                let mid = 0.5 * (lo + hi);
                let mid_risks = eval(mid);
                probes += 1;
                check_monotone(&lo_risks, &mid_risks, m)?;
                check_monotone(&mid_risks, &hi_risks, m)?;
                if feasible(&mid_risks) {
                    hi = mid;
                    hi_risks = mid_risks;
                } else {
                    lo = mid;
                    lo_risks = mid_risks;
                }
            }
            (hi, hi_risks)
        };

        // freeze z_m into the failure steps
        fail.par_iter_mut().enumerate().for_each(|(i, f)| {
            let rep = sample.replication(i);
            for step in (m + 1)..*f {
                if rep.t(m, step) > zm {
                    *f = step;
                    break;
                }
            }
        });
        z.push(zm);
        stages.push(StageSummary {
            z: zm,
            target,
            achieved_risk_at_last: risks.mean[k - 1],
            max_risk: risks.mean[m + 1..].iter().copied().fold(0.0, f64::max),
            probes,
        });
    }

    let values = CriticalValues::new(
        z,
        Provenance::Calibrated {
            r,
            alpha: config.alpha,
            replications: n,
            seed: sample.seed(),
            design_label: sample.label().to_string(),
            design_hash: sample.design_hash().to_string(),
        },
    )?;
    Ok(Calibration {
        values,
        stages,
        c_r,
    })
}

/// Per-step risk on the null sample with second moments for error bars.
struct Profile {
    mean: Vec<f64>,
    var: Vec<f64>,
    n: usize,
}

impl Profile {
    fn from_sums(sums: Vec<f64>, n: usize) -> Self {
        let k = sums.len() / 2;
        let mean: Vec<f64> = sums[..k].iter().map(|s| s / n as f64).collect();
        let var = sums[k..]
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n as f64 - m * m).max(0.0))
            .collect();
        Profile { mean, var, n }
    }
}

/// Raising a threshold cannot increase the expected risk. On a finite
/// sample the estimate may wobble, so only increases beyond four standard
/// errors of the difference count as violations.
fn check_monotone(lower_z: &Profile, higher_z: &Profile, step: usize) -> Result<()> {
    let n = lower_z.n as f64;
    let ok = lower_z
        .mean
        .iter()
        .zip(&higher_z.mean)
        .zip(lower_z.var.iter().zip(&higher_z.var))
        .all(|((a, b), (va, vb))| {
            let slack = 1e-12 * a.abs() + 4.0 * ((va + vb) / n).sqrt();
            b - a <= slack
        });
    if ok {
        Ok(())
    } else {
        Err(Error::NonMonotone { step })
    }
}

/// Out-of-sample check of the propagation condition.
#[derive(Clone, Debug, Serialize)]
pub struct PropagationCheck {
    /// Risk per step; entry 0 is step 1 (always 0).
    pub risks: Vec<f64>,
    /// `α·c_r`.
    pub bound: f64,
    /// `α·c_r·(1 + slack)`.
    pub limit: f64,
    pub passed: Vec<bool>,
}

impl PropagationCheck {
    pub fn all_passed(&self) -> bool {
        self.passed.iter().all(|p| *p)
    }
}

/// Re-estimates `E_0 |v_k⁻¹(θ̂_k − θ̃_k)²|^r` under the full threshold
/// vector on a sample drawn with `config.seed`.
pub fn verify_propagation(
    design: &FamilyDesign,
    z: &CriticalValues,
    config: &CalibrationConfig,
    slack: f64,
) -> Result<PropagationCheck> {
    config.validate()?;
    let sample = build_null_sample(design, config)?;
    let risks = risk_profile(&sample, z.values(), config.r)?;
    let bound = config.alpha * gaussian_moment(config.r)?;
    let limit = bound * (1.0 + slack);
    let passed = risks.iter().map(|x| *x <= limit).collect();
    Ok(PropagationCheck {
        risks,
        bound,
        limit,
        passed,
    })
}
