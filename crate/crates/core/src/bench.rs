//! Simulation harness for the two sequence-space examples: random target
//! models, one calibration per shape, repeated runs per noise level, and
//! risk / index summaries against the oracle.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::calibrate::{calibrate, Calibration, CalibrationConfig};
use crate::diagnose::{dk_constant, smb_via_dk};
use crate::error::{Error, Result};
use crate::family::{design_sequence, truth_deltas, SequenceModelSpec, SequenceShape};
use crate::io::{self, num};
use crate::oracle::{oracle_index, oracle_rhs, z_at};
use crate::rng::{derive_seed, substream};
use crate::select::{pair_stats, select, stability_holds, EstimateVector};

/// Published thresholds for the two examples at `α = 1`. The first
/// example's rows are on the scale of `v_l⁻¹(θ̃_l − θ̃_k)²`, twice the
/// statistic used here; the second example's rows match it directly.
pub mod published {
    pub const EXAMPLE1_R_HALF: [f64; 19] = [
        15.5, 13.0, 12.8, 12.2, 11.5, 11.3, 10.9, 9.8, 9.2, 8.6, 8.3, 7.6, 7.0, 6.6, 5.9, 5.2, 4.5,
        3.6, 2.5,
    ];
    pub const EXAMPLE1_R_ONE: [f64; 19] = [
        22.5, 19.0, 16.4, 17.2, 16.2, 15.6, 16.8, 14.4, 13.4, 13.2, 12.9, 11.9, 10.2, 9.3, 8.3, 7.3,
        5.8, 4.7, 3.4,
    ];
    pub const EXAMPLE2_R_HALF: [f64; 14] = [
        5.5, 5.0, 4.6, 4.3, 4.1, 3.9, 3.4, 3.1, 2.8, 2.6, 2.2, 1.7, 1.3, 0.9,
    ];
    pub const EXAMPLE2_R_ONE: [f64; 14] = [
        8.1, 7.9, 6.4, 6.6, 7.0, 5.8, 4.8, 4.3, 3.9, 3.6, 3.0, 2.0, 1.5, 1.0,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ModelFamily {
    /// `σ_i = (n^{2/n})^i`, cut-offs `n, n − 2, …`.
    Example1,
    /// `σ_i = i²`, cut-offs `⌊n / 2^{(k−1)/5}⌋`.
    Example2,
    Custom(SequenceShape),
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Example1 => "example1",
            ModelFamily::Example2 => "example2",
            ModelFamily::Custom(_) => "custom",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub family: ModelFamily,
    pub n: usize,
    /// Family size; ignored for custom shapes.
    pub k: usize,
    pub num_models: usize,
    pub num_runs: usize,
    pub deltas: Vec<f64>,
    pub calib: CalibrationConfig,
    pub oracle_budget: f64,
    /// `Δ_k < budget` for the reported oracle; the inequality check always
    /// uses `≤`.
    pub oracle_strict: bool,
    pub model_seed: u64,
    pub run_seed: u64,
}

impl ExperimentSpec {
    pub fn example1() -> Self {
        ExperimentSpec {
            family: ModelFamily::Example1,
            n: 50,
            k: 20,
            num_models: 10,
            num_runs: 500,
            deltas: vec![1e-4, 1e-5, 1e-6],
            calib: CalibrationConfig::default(),
            oracle_budget: 1.0,
            oracle_strict: true,
            model_seed: 1,
            run_seed: 2,
        }
    }

    pub fn example2() -> Self {
        ExperimentSpec {
            family: ModelFamily::Example2,
            k: 15,
            ..Self::example1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.num_models == 0 || self.num_runs == 0 {
            return Err(Error::Config("n, num_models and num_runs must be positive".into()));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("noise levels must be positive and non-empty".into()));
        }
        if !(self.oracle_budget >= 0.0) {
            return Err(Error::Config("oracle budget must be >= 0".into()));
        }
        self.calib.validate()
    }

    pub fn shape(&self) -> Result<SequenceShape> {
        match &self.family {
            ModelFamily::Example1 => SequenceShape::severely_ill_posed(self.n, self.k),
            ModelFamily::Example2 => SequenceShape::mildly_ill_posed(self.n, self.k),
            ModelFamily::Custom(shape) => Ok(shape.clone()),
        }
    }

    fn model_len(&self) -> Result<usize> {
        Ok(self.shape()?.sigma.len())
    }
}

/// Target coefficients `μ_i ~ N(0, i⁻³)`, one vector per model.
pub fn make_models(spec: &ExperimentSpec) -> Result<Vec<Vec<f64>>> {
    let n = spec.model_len()?;
    Ok((0..spec.num_models)
        .map(|m| {
            let mut rng = substream(spec.model_seed, m as u64);
            (1..=n)
                .map(|i| {
                    let e: f64 = rng.sample(StandardNormal);
                    e * (i as f64).powf(-1.5)
                })
                .collect()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    /// Linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let h = p * (s.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            s[lo] + (h - lo as f64) * (s[hi] - s[lo])
        };
        Some(Quartiles {
            min: s[0],
            q1: at(0.25),
            median: at(0.5),
            q3: at(0.75),
            max: s[s.len() - 1],
        })
    }
}

/// Results for one model at one noise level. Indices are zero-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseMetrics {
    pub model: usize,
    pub delta: f64,
    pub delta_k: Vec<f64>,
    pub k_star: usize,
    pub k_star_le: usize,
    /// `E|θ̂ − θ|`.
    pub adaptive_risk: f64,
    /// `E|θ̃_{k*} − θ|`.
    pub oracle_risk: f64,
    pub ratio: f64,
    pub khat: Quartiles,
    /// Fraction of runs with `k̂ < k*`.
    pub false_alarm: f64,
    /// `E|v_{k*}⁻¹(θ̃_{k*} − θ̂)²|^{r/2}` at the `≤` oracle.
    pub oracle_lhs: f64,
    pub oracle_rhs: f64,
    pub stability_violations: usize,
    /// `Δ_k ≤ 𝔰² Σ_{l≤k} b_l²/v_l` for every `k`.
    pub dk_implication: bool,
}

impl CaseMetrics {
    pub fn oracle_inequality_holds(&self) -> bool {
        self.oracle_lhs <= self.oracle_rhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhatSample {
    pub model: usize,
    pub delta: f64,
    pub run: usize,
    pub khat: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub family: String,
    pub n: usize,
    pub calibration: Calibration,
    pub cases: Vec<CaseMetrics>,
    pub khat: Vec<KhatSample>,
}

impl ExperimentReport {
    /// Invariants that hold by construction or by theorem.
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.cases {
            let tag = format!("model {} delta {}", c.model + 1, c.delta);
            if c.stability_violations > 0 {
                out.push(format!("{tag}: {} stability violations", c.stability_violations));
            }
            if !c.oracle_inequality_holds() {
                out.push(format!(
                    "{tag}: oracle inequality {} > {}",
                    c.oracle_lhs, c.oracle_rhs
                ));
            }
            if !c.dk_implication {
                out.push(format!("{tag}: diagonal comparability implication fails"));
            }
        }
        out
    }

    pub fn cases_at(&self, delta: f64) -> impl Iterator<Item = &CaseMetrics> {
        self.cases.iter().filter(move |c| c.delta == delta)
    }
}

struct RunOutcome {
    khat: usize,
    adaptive_err: f64,
    oracle_err: f64,
    lhs: f64,
    stable: bool,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let shape = spec.shape()?;
    let unit = shape.design(1.0)?;
    let calibration = calibrate(&unit, &spec.calib)?;
    let z = &calibration.values;
    let s_frak = dk_constant(&unit)?.s_frak;
    let r = spec.calib.r;
    let models = make_models(spec)?;

    let mut cases = Vec::new();
    let mut khat = Vec::new();
    for (mi, mu) in models.iter().enumerate() {
        let noise_seed = derive_seed(spec.run_seed, mi as u64);
        for &delta in &spec.deltas {
            let (design, truth) = design_sequence(&SequenceModelSpec {
                sigma: shape.sigma.clone(),
                mu: mu.clone(),
                delta,
                cutoffs: shape.cutoffs.clone(),
            })?;
            let deltas = truth_deltas(&design, &truth)?;
            let k_star = oracle_index(&deltas, spec.oracle_budget, spec.oracle_strict)?;
            let k_star_le = oracle_index(&deltas, spec.oracle_budget, false)?;
            let rhs = oracle_rhs(r, spec.calib.alpha, spec.oracle_budget, z_at(z, k_star_le))?;
            let dk_implication = smb_via_dk(&design, &truth, &deltas, s_frak, spec.oracle_budget)?
                .iter()
                .all(|row| row.implication_holds);
            let v = design.variances();
            let len = design.len();

            let outcomes: Vec<RunOutcome> = (0..spec.num_runs)
                .into_par_iter()
                .map(|run| -> Result<RunOutcome> {
                    let mut xi = vec![0.0; len];
                    design.draw_null_into(noise_seed, run as u64, &mut xi);
                    let values: Vec<f64> =
                        truth.theta_k.iter().zip(&xi).map(|(t, e)| t + e).collect();
                    let est = EstimateVector::new(values, v.to_vec())?;
                    let stats = pair_stats(&est);
                    let k = select(&stats, z)?.index;
                    let theta_hat = est.values()[k];
                    let dev = est.values()[k_star_le] - theta_hat;
                    Ok(RunOutcome {
                        khat: k,
                        adaptive_err: (theta_hat - truth.theta).abs(),
                        oracle_err: (est.values()[k_star] - truth.theta).abs(),
                        lhs: (dev * dev / v[k_star_le]).powf(r / 2.0),
                        stable: stability_holds(&stats, z, k),
                    })
                })
                .collect::<Result<_>>()?;

            let runs = outcomes.len() as f64;
            let mean = |f: fn(&RunOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / runs;
            let adaptive_risk = mean(|o| o.adaptive_err);
            let oracle_risk = mean(|o| o.oracle_err);
            let ks: Vec<f64> = outcomes.iter().map(|o| o.khat as f64).collect();
            cases.push(CaseMetrics {
                model: mi,
                delta,
                k_star,
                k_star_le,
                adaptive_risk,
                oracle_risk,
                ratio: adaptive_risk / oracle_risk,
                khat: Quartiles::of(&ks).expect("at least one run"),
                false_alarm: outcomes.iter().filter(|o| o.khat < k_star).count() as f64 / runs,
                oracle_lhs: mean(|o| o.lhs),
                oracle_rhs: rhs.general,
                stability_violations: outcomes.iter().filter(|o| !o.stable).count(),
                dk_implication,
                delta_k: deltas,
            });
            khat.extend(outcomes.iter().enumerate().map(|(run, o)| KhatSample {
                model: mi,
                delta,
                run,
                khat: o.khat,
            }));
        }
    }
    Ok(ExperimentReport {
        family: spec.family.name().to_string(),
        n: spec.n,
        calibration,
        cases,
        khat,
    })
}

pub const METRICS_HEADER: [&str; 17] = [
    "model",
    "delta",
    "k_star",
    "k_star_le",
    "adaptive_risk",
    "oracle_risk",
    "ratio",
    "khat_min",
    "khat_q1",
    "khat_median",
    "khat_q3",
    "khat_max",
    "false_alarm",
    "oracle_lhs",
    "oracle_rhs",
    "stability_violations",
    "dk_implication",
];

/// Writes `thresholds.csv`, `metrics.csv`, `khat.csv` and, when `plots`
/// is set, `risk_ratio.svg` and `khat_boxplot.svg`. Indices are one-based.
pub fn emit_report(report: &ExperimentReport, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut comments = io::provenance_comments(&report.calibration.values.provenance);
    comments.insert(0, format!("family={} n={}", report.family, report.n));
    let mut written = Vec::new();

    let path = dir.join("thresholds.csv");
    io::write_csv(
        &path,
        &comments,
        &io::CRITICAL_VALUE_HEADER,
        &io::critical_value_rows(&report.calibration),
    )?;
    written.push(path);

    let rows: Vec<Vec<String>> = report
        .cases
        .iter()
        .map(|c| {
            vec![
                (c.model + 1).to_string(),
                num(c.delta),
                (c.k_star + 1).to_string(),
                (c.k_star_le + 1).to_string(),
                num(c.adaptive_risk),
                num(c.oracle_risk),
                num(c.ratio),
                num(c.khat.min + 1.0),
                num(c.khat.q1 + 1.0),
                num(c.khat.median + 1.0),
                num(c.khat.q3 + 1.0),
                num(c.khat.max + 1.0),
                num(c.false_alarm),
                num(c.oracle_lhs),
                num(c.oracle_rhs),
                c.stability_violations.to_string(),
                c.dk_implication.to_string(),
            ]
        })
        .collect();
    let path = dir.join("metrics.csv");
    io::write_csv(&path, &comments, &METRICS_HEADER, &rows)?;
    written.push(path);

    let rows: Vec<Vec<String>> = report
        .khat
        .iter()
        .map(|s| {
            vec![
                (s.model + 1).to_string(),
                num(s.delta),
                (s.run + 1).to_string(),
                (s.khat + 1).to_string(),
            ]
        })
        .collect();
    let path = dir.join("khat.csv");
    io::write_csv(&path, &comments, &["model", "delta", "run", "khat"], &rows)?;
    written.push(path);

    if plots {
        for (name, svg) in [
            ("risk_ratio.svg", risk_ratio_svg(report)),
            ("khat_boxplot.svg", khat_boxplot_svg(report)),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn noise_levels(report: &ExperimentReport) -> Vec<f64> {
    let mut levels: Vec<f64> = Vec::new();
    for c in &report.cases {
        if !levels.contains(&c.delta) {
            levels.push(c.delta);
        }
    }
    levels
}

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 180.0;
const MARGIN: f64 = 50.0;

fn svg_open(rows: usize) -> String {
    let h = MARGIN + rows as f64 * (PANEL_H + MARGIN);
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
        w = PANEL_W + 2.0 * MARGIN,
    )
}

/// Axes for one panel; returns the `y → pixel` map.
fn panel(svg: &mut String, row: usize, title: &str, y_max: f64, models: usize) -> impl Fn(f64) -> f64 {
    let top = MARGIN + row as f64 * (PANEL_H + MARGIN);
    let bottom = top + PANEL_H;
    let _ = writeln!(
        svg,
        "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\">{title}</text>",
        x = MARGIN + PANEL_W / 2.0,
        y = top - 8.0
    );
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN}\" y=\"{top}\" width=\"{PANEL_W}\" height=\"{PANEL_H}\" fill=\"none\" stroke=\"black\"/>"
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = bottom - PANEL_H * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"end\">{v:.3}</text>",
            x = MARGIN - 4.0,
            y = y + 4.0,
        );
    }
    let slot = PANEL_W / models.max(1) as f64;
    for m in 0..models {
        let _ = writeln!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\">{label}</text>",
            x = MARGIN + slot * (m as f64 + 0.5),
            y = bottom + 14.0,
            label = m + 1
        );
    }
    move |value: f64| bottom - PANEL_H * (value / y_max).clamp(0.0, 1.0)
}

fn model_count(report: &ExperimentReport) -> usize {
    report.cases.iter().map(|c| c.model + 1).max().unwrap_or(0)
}

/// One panel per noise level, one bar per model.
pub fn risk_ratio_svg(report: &ExperimentReport) -> String {
    let levels = noise_levels(report);
    let models = model_count(report);
    let mut svg = svg_open(levels.len());
    let slot = PANEL_W / models.max(1) as f64;
    for (row, delta) in levels.iter().enumerate() {
        let cases: Vec<&CaseMetrics> = report.cases_at(*delta).collect();
        let y_max = cases
            .iter()
            .map(|c| c.ratio)
            .filter(|r| r.is_finite())
            .fold(1.0, f64::max)
            * 1.1;
        let y = panel(&mut svg, row, &format!("risk ratio, delta = {delta}"), y_max, models);
        let base = y(0.0);
        let one = y(1.0);
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN}\" x2=\"{x2}\" y1=\"{one}\" y2=\"{one}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
            x2 = MARGIN + PANEL_W
        );
        for c in cases {
            let top = y(c.ratio);
            let _ = writeln!(
                svg,
                "<rect class=\"bar\" x=\"{x}\" y=\"{top}\" width=\"{w}\" height=\"{h}\" fill=\"steelblue\"/>",
                x = MARGIN + slot * (c.model as f64 + 0.2),
                w = slot * 0.6,
                h = base - top
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// One panel per noise level: a box of `k̂` per model and a triangle at `k*`.
pub fn khat_boxplot_svg(report: &ExperimentReport) -> String {
    let levels = noise_levels(report);
    let models = model_count(report);
    let k_max = report.calibration.values.family_len() as f64;
    let mut svg = svg_open(levels.len());
    let slot = PANEL_W / models.max(1) as f64;
    for (row, delta) in levels.iter().enumerate() {
        let y = panel(&mut svg, row, &format!("selected index, delta = {delta}"), k_max, models);
        for c in report.cases_at(*delta) {
            let q = c.khat;
            let cx = MARGIN + slot * (c.model as f64 + 0.5);
            let half = slot * 0.25;
            let _ = writeln!(
                svg,
                "<line x1=\"{cx}\" x2=\"{cx}\" y1=\"{a}\" y2=\"{b}\" stroke=\"black\"/>",
                a = y(q.min + 1.0),
                b = y(q.max + 1.0)
            );
            let _ = writeln!(
                svg,
                "<rect class=\"box\" x=\"{x}\" y=\"{top}\" width=\"{w}\" height=\"{h}\" fill=\"lightgray\" stroke=\"black\"/>",
                x = cx - half,
                top = y(q.q3 + 1.0),
                w = 2.0 * half,
                h = y(q.q1 + 1.0) - y(q.q3 + 1.0)
            );
            let _ = writeln!(
                svg,
                "<line x1=\"{a}\" x2=\"{b}\" y1=\"{m}\" y2=\"{m}\" stroke=\"black\" stroke-width=\"2\"/>",
                a = cx - half,
                b = cx + half,
                m = y(q.median + 1.0)
            );
            let ty = y(c.k_star as f64 + 1.0);
            let tx = cx + half + 6.0;
            let _ = writeln!(
                svg,
                "<polygon class=\"oracle\" points=\"{x0},{y0} {x1},{y1} {x2},{y1}\" fill=\"firebrick\"/>",
                x0 = tx,
                y0 = ty - 5.0,
                x1 = tx - 5.0,
                x2 = tx + 5.0,
                y1 = ty + 4.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentSpec {
        ExperimentSpec {
            num_models: 2,
            num_runs: 20,
            deltas: vec![1e-4, 1e-6],
            calib: CalibrationConfig {
                replications: 2000,
                ..Default::default()
            },
            ..ExperimentSpec::example2()
        }
    }

    #[test]
    fn model_variances_follow_the_power_law() {
        let spec = ExperimentSpec {
            num_models: 4000,
            ..ExperimentSpec::example1()
        };
        let models = make_models(&spec).unwrap();
        assert_eq!(models[0].len(), 50);
        let var = |i: usize| models.iter().map(|m| m[i] * m[i]).sum::<f64>() / 4000.0;
        assert!((var(0) - 1.0).abs() < 0.08);
        assert!((var(49) / 8e-6 - 1.0).abs() < 0.08);
        // fixed per seed
        assert_eq!(make_models(&spec).unwrap()[7], models[7]);
    }

    #[test]
    fn quartiles_interpolate() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let q = Quartiles::of(&[0.0, 1.0]).unwrap();
        assert_eq!(q.median, 0.5);
        assert!(Quartiles::of(&[]).is_none());
    }

    #[test]
    fn small_experiment_is_consistent() {
        let report = run_experiment(&small()).unwrap();
        assert_eq!(report.cases.len(), 4);
        assert_eq!(report.khat.len(), 80);
        assert!(report.invariant_failures().is_empty());
        for c in &report.cases {
            assert!(c.adaptive_risk >= 0.0 && c.oracle_risk > 0.0);
            assert!(c.k_star <= c.k_star_le);
        }
        // smaller noise inflates Δ_k, so the oracle keeps more coefficients
        for m in 0..2 {
            let a = report.cases.iter().find(|c| c.model == m && c.delta == 1e-4).unwrap();
            let b = report.cases.iter().find(|c| c.model == m && c.delta == 1e-6).unwrap();
            assert!(b.k_star <= a.k_star);
        }
    }

    #[test]
    fn emitted_files() {
        let report = run_experiment(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report, dir.path(), true).unwrap();
        assert_eq!(files.len(), 5);
        let svg = std::fs::read_to_string(dir.path().join("khat_boxplot.svg")).unwrap();
        assert_eq!(svg.matches("class=\"box\"").count(), 4);
        assert_eq!(svg.matches("class=\"oracle\"").count(), 4);
        let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().filter(|l| !l.starts_with('#')).count(), 5);

        let empty = ExperimentReport {
            cases: vec![],
            khat: vec![],
            ..report
        };
        let dir = tempfile::tempdir().unwrap();
        emit_report(&empty, dir.path(), false).unwrap();
        let khat = std::fs::read_to_string(dir.path().join("khat.csv")).unwrap();
        assert_eq!(khat.lines().filter(|l| !l.starts_with('#')).count(), 1);
    }
}
