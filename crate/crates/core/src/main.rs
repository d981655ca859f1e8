use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use propcal::bench::{emit_report, published, run_experiment, ExperimentReport, ExperimentSpec};
use propcal::calibrate::{calibrate, CalibrationConfig};
use propcal::config::Config;
use propcal::diagnose::{condition_report, dk_constant, gamma_of, smb_via_dk};
use propcal::family::{FamilyDesign, SequenceShape};
use propcal::io::{self, num};
use propcal::oracle::{
    fit_lower_constant, fit_upper_constant, oracle_report, threshold_lower_bound,
    threshold_upper_bound, BoundConstants,
};
use propcal::select::{pair_stats, select, CriticalValues, EstimateVector};
use propcal::{parallel, Error, Result};

#[derive(Parser)]
#[command(name = "propcal", version, about = "Calibrated sequential selection among ordered Gaussian estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate critical values for the configured family.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the selection rule on one estimate vector.
    Select {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        critical_values: PathBuf,
    },
    /// Structural conditions and oracle quantities of the configured family.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        conditions: bool,
        #[arg(long)]
        oracle: bool,
        /// Thresholds for the oracle table; calibrated on the fly when absent.
        #[arg(long)]
        critical_values: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
        #[arg(long)]
        strict: bool,
        /// Constant of the upper template; fitted to the thresholds when absent.
        #[arg(long)]
        c1: Option<f64>,
        /// Constant of the lower template; fitted to the thresholds when absent.
        #[arg(long)]
        c2: Option<f64>,
    },
    /// Regenerate the simulation tables and figure data.
    Reproduce {
        target: Target,
        /// Monte Carlo replications for calibration.
        #[arg(long, default_value_t = 50_000)]
        n_reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 2009)]
        seed: u64,
    },
    /// Run the experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Table1,
    Table2,
    Figure1,
    Figure2,
}

/// Run outcome: `Ok(true)` when every checked invariant held.
type Outcome = Result<bool>;

fn main() -> ExitCode {
    parallel::init_from_env();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Calibrate { config, out } => cmd_calibrate(&config, &out),
        Command::Select {
            config,
            estimates,
            critical_values,
        } => cmd_select(&config, &estimates, &critical_values),
        Command::Diagnose {
            config,
            conditions,
            oracle,
            critical_values,
            budget,
            strict,
            c1,
            c2,
        } => cmd_diagnose(
            &config,
            conditions || !oracle,
            oracle,
            critical_values.as_deref(),
            budget,
            strict,
            (c1, c2),
        ),
        Command::Reproduce {
            target,
            n_reps,
            out,
            seed,
        } => cmd_reproduce(target, n_reps, out, seed),
        Command::Run { config, out } => cmd_run(&config, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("invariant check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn stdout_csv(comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    io::write_csv_to(std::io::stdout().lock(), comments, header, rows)
        .map_err(|e| Error::io("<stdout>", e))
}

fn cmd_calibrate(config: &Path, out: &Path) -> Outcome {
    let cfg = Config::load(config)?;
    let (design, _) = cfg.model()?;
    let start = Instant::now();
    let cal = calibrate(&design, &cfg.calibration)?;
    io::write_critical_values(out, &cal)?;
    eprintln!(
        "calibrated {} thresholds for {} in {:.1}s -> {}",
        cal.values.values().len(),
        design.label(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(true)
}

fn cmd_select(config: &Path, estimates: &Path, critical_values: &Path) -> Outcome {
    let cfg = Config::load(config)?;
    let (design, _) = cfg.model()?;
    let values = io::read_estimates(estimates)?;
    let z = io::read_critical_values(critical_values)?;
    let est = EstimateVector::new(values, design.variances().to_vec())?;
    let stats = pair_stats(&est);
    let sel = select(&stats, &z)?;
    let (l, k) = match sel.first_rejection {
        Some((l, k)) => ((l + 1).to_string(), (k + 1).to_string()),
        None => (String::new(), String::new()),
    };
    let t = sel
        .first_rejection
        .map(|(l, k)| num(stats.get(l, k)))
        .unwrap_or_default();
    stdout_csv(
        &[],
        &["k_hat", "theta_hat", "rejected_l", "rejected_k", "t_lk"],
        &[vec![
            (sel.index + 1).to_string(),
            num(est.values()[sel.index]),
            l,
            k,
            t,
        ]],
    )?;
    Ok(true)
}

fn thresholds_for(cfg: &Config, design: &FamilyDesign, path: Option<&Path>) -> Result<CriticalValues> {
    match path {
        Some(p) => io::read_critical_values(p),
        None => {
            eprintln!(
                "calibrating with {} replications",
                cfg.calibration.replications
            );
            Ok(calibrate(design, &cfg.calibration)?.values)
        }
    }
}

fn cmd_diagnose(
    config: &Path,
    conditions: bool,
    oracle: bool,
    critical_values: Option<&Path>,
    budget: f64,
    strict: bool,
    (c1, c2): (Option<f64>, Option<f64>),
) -> Outcome {
    let cfg = Config::load(config)?;
    let (design, truth) = cfg.model()?;
    let mut ok = true;

    if conditions {
        let rep = condition_report(&design)?;
        if rep.sequence && rep.md_ok && !rep.sequence_bound_holds {
            ok = false;
        }
        let rows = vec![
            vec!["u0".into(), num(rep.u0)],
            vec!["u".into(), num(rep.u)],
            vec!["md_ok".into(), rep.md_ok.to_string()],
            vec!["gamma".into(), num(rep.gamma)],
            vec!["s_frak".into(), num(rep.s_frak)],
            vec!["s_frak_bound".into(), num(rep.lemma32_bound)],
            vec!["s_frak_within_bound".into(), rep.lemma32_holds.to_string()],
            vec!["s_frak_sequence_bound".into(), num(rep.sequence_bound)],
            vec!["s_frak_within_sequence_bound".into(), rep.sequence_bound_holds.to_string()],
            vec!["c_u0".into(), num(rep.c_u0)],
            vec!["sequence_design".into(), rep.sequence.to_string()],
        ];
        stdout_csv(&[format!("design={}", design.label())], &["quantity", "value"], &rows)?;
    }

    if oracle {
        let z = thresholds_for(&cfg, &design, critical_values)?;
        let r = cfg.calibration.r;
        let alpha = cfg.calibration.alpha;
        let rep = oracle_report(&design, &truth, &z, r, alpha, budget, strict)?;
        let gamma = gamma_of(&design);
        let s_frak = dk_constant(&design)?.s_frak;
        let smb = smb_via_dk(&design, &truth, &rep.delta_k, s_frak, budget)?;
        ok &= smb.iter().all(|row| row.implication_holds);

        let c1 = c1.unwrap_or_else(|| fit_upper_constant(&design, z.values(), r, alpha, gamma).max(0.0));
        let c2 = c2.unwrap_or_else(|| fit_lower_constant(&design, z.values(), r, alpha));
        let constants = BoundConstants::new(c1, c2)?;
        let upper = threshold_upper_bound(&design, r, alpha, gamma, &constants);
        let len = design.len();
        let rows: Vec<Vec<String>> = (0..len)
            .map(|k| {
                let lower = if k + 1 < len {
                    num(threshold_lower_bound(&design, r, alpha, k, &constants)?)
                } else {
                    String::new()
                };
                Ok(vec![
                    (k + 1).to_string(),
                    num(design.variances()[k]),
                    num(truth.bias[k]),
                    num(rep.delta_k[k]),
                    num(smb[k].diagonal_sum),
                    z.values().get(k).map(|v| num(*v)).unwrap_or_default(),
                    num(upper[k]),
                    lower,
                ])
            })
            .collect::<Result<_>>()?;
        let comments = vec![
            format!("budget={budget} strict={strict}"),
            format!("k_star={}", rep.k_star + 1),
            format!("z_at_k_star={}", num(rep.z_at_kstar)),
            format!("rhs_general={}", num(rep.rhs.general)),
            format!(
                "rhs_quadratic={}{}",
                num(rep.rhs.quadratic),
                if rep.rhs.quadratic_applies { "" } else { " (r != 1, not applicable)" }
            ),
            format!("gamma={} c1={} c2={}", num(gamma), num(c1), num(c2)),
        ];
        stdout_csv(
            &comments,
            &["k", "v_k", "bias_k", "delta_k", "diagonal_sum", "z_k", "z_upper", "z_lower"],
            &rows,
        )?;
    }
    Ok(ok)
}

fn reproduce_table(
    shape: SequenceShape,
    rows_published: [&[f64]; 2],
    doubled: bool,
    n_reps: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> Outcome {
    let design = shape.design(1.0)?;
    let mut rows = Vec::new();
    let mut ok = true;
    for (r, published) in [0.5, 1.0].into_iter().zip(rows_published) {
        let cfg = CalibrationConfig {
            r,
            alpha: 1.0,
            replications: n_reps,
            seed,
            ..Default::default()
        };
        let start = Instant::now();
        let cal = calibrate(&design, &cfg)?;
        eprintln!("r = {r}: {:.1}s", start.elapsed().as_secs_f64());
        let z = cal.values.values();
        ok &= z[0] > z[z.len() - 1];
        for (k, (zk, p)) in z.iter().zip(published).enumerate() {
            let compared = if doubled { 2.0 * zk } else { *zk };
            rows.push(vec![
                num(r),
                (k + 1).to_string(),
                num(*zk),
                num(compared),
                num(*p),
                num(compared / p - 1.0),
            ]);
        }
    }
    let comments = vec![
        format!("design={} replications={n_reps} seed={seed} alpha=1", design.label()),
        if doubled {
            "published values use v_l^-1 (theta_l - theta_k)^2; compared = 2 z_k".into()
        } else {
            "compared = z_k".into()
        },
    ];
    let header = ["r", "k", "z_k", "compared", "published", "relative_error"];
    stdout_csv(&comments, &header, &rows)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let name = if doubled { "table1.csv" } else { "table2.csv" };
        io::write_csv(&dir.join(name), &comments, &header, &rows)?;
    }
    Ok(ok)
}

fn summarize(report: &ExperimentReport) -> bool {
    for c in &report.cases {
        eprintln!(
            "model {:>2} delta {:e}: k* {:>2} khat median {:>4} ratio {:.3} false alarm {:.3}",
            c.model + 1,
            c.delta,
            c.k_star + 1,
            c.khat.median + 1.0,
            c.ratio,
            c.false_alarm
        );
    }
    let failures = report.invariant_failures();
    for f in &failures {
        eprintln!("{f}");
    }
    failures.is_empty()
}

fn run_and_emit(spec: &ExperimentSpec, out: &Path) -> Outcome {
    let start = Instant::now();
    let report = run_experiment(spec)?;
    eprintln!("experiment finished in {:.1}s", start.elapsed().as_secs_f64());
    let files = emit_report(&report, out, true)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(summarize(&report))
}

fn cmd_reproduce(target: Target, n_reps: usize, out: Option<PathBuf>, seed: u64) -> Outcome {
    match target {
        Target::Table1 => reproduce_table(
            SequenceShape::severely_ill_posed(50, 20)?,
            [&published::EXAMPLE1_R_HALF, &published::EXAMPLE1_R_ONE],
            true,
            n_reps,
            seed,
            out,
        ),
        Target::Table2 => reproduce_table(
            SequenceShape::mildly_ill_posed(50, 15)?,
            [&published::EXAMPLE2_R_HALF, &published::EXAMPLE2_R_ONE],
            false,
            n_reps,
            seed,
            out,
        ),
        Target::Figure1 | Target::Figure2 => {
            let (mut spec, name) = match target {
                Target::Figure1 => (ExperimentSpec::example1(), "figure1"),
                _ => (ExperimentSpec::example2(), "figure2"),
            };
            spec.calib.replications = n_reps;
            spec.calib.seed = seed;
            run_and_emit(&spec, &out.unwrap_or_else(|| PathBuf::from(name)))
        }
    }
}

fn cmd_run(config: &Path, out: &Path) -> Outcome {
    let spec = Config::load(config)?.experiment()?;
    run_and_emit(&spec, out)
}
