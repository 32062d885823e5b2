//! Command-line driver: exact solving, factored planning, bound audits,
//! example-instance generation, and batch sweeps.
//!
//! Exit codes: 0 success, 2 validation or parse error, 3 non-contractive
//! model, 4 bound violation detected.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::json;

use flmdp::bounds::{self, AuditConfig, BoundReport};
use flmdp::counterexamples;
use flmdp::error::Error;
use flmdp::factored::FactoredLinearModel;
use flmdp::gen;
use flmdp::io;
use flmdp::mdp::{self, Mdp};
use flmdp::norms::{NormSpec, PExp};
use flmdp::planner;

const CSV_SCHEMA: &str = "# flmdp-sweep-csv v1";

#[derive(Parser)]
#[command(name = "flmdp", about = "Finite-MDP planning with factored linear models", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormKind {
    Sup,
    Wsup,
    Lp,
}

#[derive(Clone, Copy, ValueEnum)]
enum PFlag {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "inf")]
    Inf,
}

impl From<PFlag> for PExp {
    fn from(p: PFlag) -> PExp {
        match p {
            PFlag::One => PExp::One,
            PFlag::Two => PExp::Two,
            PFlag::Inf => PExp::Inf,
        }
    }
}

#[derive(Args)]
struct OutArg {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an MDP exactly and print optimal values and policy.
    Solve {
        mdp_file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Plan with a factored model: compressed fixed point, lifted values,
    /// lookahead policy.
    Plan {
        mdp_file: PathBuf,
        model_file: PathBuf,
        /// Norm on the compressed space for the stopping rule.
        #[arg(long, value_enum, default_value = "sup")]
        norm: NormKind,
        #[arg(long, value_enum, default_value = "1")]
        p: PFlag,
        /// Measure file (JSON array, compressed dimension) for --norm lp.
        #[arg(long)]
        mu: Option<PathBuf>,
        /// Weight file (JSON array, compressed dimension) for --norm wsup.
        #[arg(long)]
        eta: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Iterate even when the computed contraction modulus is >= 1.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Evaluate every applicable policy-error bound against the exact error.
    Audit {
        mdp_file: PathBuf,
        model_file: PathBuf,
        /// State weights for the weighted sup bound (JSON array).
        #[arg(long)]
        nu: Option<PathBuf>,
        /// Compressed weights (JSON array).
        #[arg(long)]
        eta: Option<PathBuf>,
        /// State measure enabling the L^p bounds (JSON array).
        #[arg(long)]
        mu: Option<PathBuf>,
        /// Residual measure for the concentrability term; defaults to --mu.
        #[arg(long)]
        xi: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "1")]
        p: PFlag,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Generate a named example instance, verify its closed forms, and write
    /// the MDP and model files.
    Example {
        /// One of: tightness, harsh, errorgaps.
        name: String,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
        /// Directory for the generated files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Batch audit of random instances; emits one CSV row per trial.
    Sweep {
        config_file: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::NotContractive { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn read_mdp(path: &PathBuf) -> Result<Mdp, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    let parsed: io::MdpJson = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    io::mdp_from_json(&parsed)
}

fn read_model(path: &PathBuf, mdp: &Mdp) -> Result<FactoredLinearModel, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    let parsed: io::ModelJson = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    io::model_from_json(&parsed, mdp)
}

fn read_vector(path: &PathBuf) -> Result<DVector<f64>, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    let values: Vec<f64> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    Ok(DVector::from_vec(values))
}

fn emit(out: &OutArg, text: &str) -> Result<(), Error> {
    match &out.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn vec_json(v: &DVector<f64>) -> serde_json::Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Solve { mdp_file, tol, out } => {
            let mdp = read_mdp(&mdp_file)?;
            let (v_star, pi_star) = mdp::solve_exact(&mdp, tol)?;
            let payload = json!({
                "gamma": mdp.gamma(),
                "v_star": vec_json(&v_star),
                "pi_star": pi_star.0,
            });
            emit(&out, &serde_json::to_string_pretty(&payload).unwrap())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Plan { mdp_file, model_file, norm, p, mu, eta, tol, force, out } => {
            let mdp = read_mdp(&mdp_file)?;
            let model = read_model(&model_file, &mdp)?;
            let w_spec = match norm {
                NormKind::Sup => NormSpec::Sup,
                NormKind::Wsup => {
                    let eta = eta.ok_or_else(|| {
                        Error::InvalidParameter("--norm wsup requires --eta".into())
                    })?;
                    NormSpec::WeightedSup(read_vector(&eta)?)
                }
                NormKind::Lp => {
                    let mu = mu.ok_or_else(|| {
                        Error::InvalidParameter("--norm lp requires --mu".into())
                    })?;
                    NormSpec::Lp { p: p.into(), mu: read_vector(&mu)? }
                }
            };
            let plan = planner::plan(&model, &w_spec, tol, mdp::DEFAULT_MAX_ITER, force)?;
            let payload = json!({
                "u_star": vec_json(&plan.u_star),
                "big_u_star": vec_json(&plan.big_u_star),
                "pi_hat": plan.pi_hat.0,
                "iterations": plan.iterations,
                "residual": plan.residual,
                "modulus": plan.modulus,
                "join_hom_gap": plan.join_hom_gap,
            });
            emit(&out, &serde_json::to_string_pretty(&payload).unwrap())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { mdp_file, model_file, nu, eta, mu, xi, p, tol, out } => {
            let mdp = read_mdp(&mdp_file)?;
            let model = read_model(&model_file, &mdp)?;
            let config = AuditConfig {
                nu: nu.as_ref().map(read_vector).transpose()?,
                eta: eta.as_ref().map(read_vector).transpose()?,
                mu: mu.as_ref().map(read_vector).transpose()?,
                xi: xi.as_ref().map(read_vector).transpose()?,
                p: p.into(),
                tol,
            };
            let report = bounds::audit(&mdp, &model, &config)?;
            let violated = !report.violations.is_empty();
            emit(&out, &serde_json::to_string_pretty(&report_json(&report)).unwrap())?;
            eprintln!(
                "sup error {:.6e}; {} bounds checked; {} violation(s)",
                report.sup_error,
                report.theorems.len() + 2 + report.baseline.is_some() as usize,
                report.violations.len()
            );
            Ok(if violated { ExitCode::from(4) } else { ExitCode::SUCCESS })
        }
        Command::Example { name, gamma, tau, eps, tau1, tau2, out, tol } => {
            let need = |value: Option<f64>, flag: &str| {
                value.ok_or_else(|| {
                    Error::InvalidParameter(format!("example '{name}' requires --{flag}"))
                })
            };
            let instance = match name.as_str() {
                "tightness" => counterexamples::tightness_mdp(
                    gamma,
                    need(tau, "tau")?,
                    need(eps, "eps")?,
                )?,
                "harsh" => counterexamples::harsh_mdp(gamma, need(tau, "tau")?)?,
                "errorgaps" => counterexamples::error_gaps_mdp(
                    gamma,
                    need(tau1, "tau1")?,
                    need(tau2, "tau2")?,
                )?,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown example '{other}'; use tightness, harsh or errorgaps"
                    )))
                }
            };
            let record = counterexamples::verify_example(&instance, tol)?;
            if let Some(dir) = &out {
                fs::create_dir_all(dir)
                    .map_err(|e| Error::InvalidParameter(format!("{}: {e}", dir.display())))?;
                let mdp_text =
                    serde_json::to_string_pretty(&io::mdp_to_json(&instance.mdp)).unwrap();
                let model_text =
                    serde_json::to_string_pretty(&io::model_to_json(&instance.model)).unwrap();
                fs::write(dir.join(format!("{}_mdp.json", instance.name)), mdp_text)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                fs::write(dir.join(format!("{}_model.json", instance.name)), model_text)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            }
            for check in &record.checks {
                println!(
                    "{} {}: expected {} actual {}",
                    if check.pass { "pass" } else { "FAIL" },
                    check.name,
                    check.expected,
                    check.actual
                );
            }
            Ok(if record.pass { ExitCode::SUCCESS } else { ExitCode::from(4) })
        }
        Command::Sweep { config_file, seed, jobs, out } => {
            let text = fs::read_to_string(&config_file)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", config_file.display())))?;
            let mut config: io::ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", config_file.display())))?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            config.validate()?;
            let (csv, violations) = run_sweep(&config, jobs)?;
            emit(&out, &csv)?;
            eprintln!("{} trials, {} violation(s)", config.trials, violations);
            Ok(if violations > 0 { ExitCode::from(4) } else { ExitCode::SUCCESS })
        }
    }
}

fn adp_json(rec: &bounds::AdpRecord) -> serde_json::Value {
    json!({ "bound": rec.bound, "actual_error": rec.actual_error, "holds": rec.holds })
}

fn report_json(report: &BoundReport) -> serde_json::Value {
    json!({
        "sup_error": report.sup_error,
        "theorems": report.theorems.iter().map(|t| json!({
            "name": t.name,
            "eps1_v_star": t.eps1_v_star,
            "eps1_v_pihat": t.eps1_v_pihat,
            "eps2": t.eps2,
            "total_bound": t.total_bound,
            "actual_error": t.actual_error,
            "holds": t.holds,
            "b": t.b,
            "note": t.note,
        })).collect::<Vec<_>>(),
        "adp_general": adp_json(&report.adp_general),
        "adp_specific": adp_json(&report.adp_specific),
        "baseline": report.baseline,
        "b_sup": report.b_sup,
        "concentrability": report.concentrability,
        "error_gap_triple": [
            report.error_gap_triple.0,
            report.error_gap_triple.1,
            report.error_gap_triple.2,
        ],
        "violations": report.violations,
    })
}

const SWEEP_THEOREMS: [&str; 5] = ["sup", "weighted_sup", "lp", "lp_linear_r", "lp_via_weighted_sup"];

fn csv_num(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

fn run_sweep(config: &io::ExperimentConfig, jobs: usize) -> Result<(String, usize), Error> {
    let p: PExp = io::p_from_json(&config.p)?;
    let trial = |index: usize| -> Result<(String, usize), Error> {
        let seed = gen::trial_seed(config.seed, index as u64);
        let inst = gen::random_instance(
            seed,
            (config.m_min, config.m_max),
            config.n_max,
            (config.k_min, config.k_max),
            (config.gamma_min, config.gamma_max),
            config.noise,
        )?;
        let mu = DVector::from_element(inst.m, 1.0 / inst.m as f64);
        let audit_config = AuditConfig { mu: Some(mu), p, ..AuditConfig::default() };
        let report = bounds::audit(&inst.mdp, &inst.model, &audit_config)?;
        let mut row = vec![
            index.to_string(),
            seed.to_string(),
            inst.m.to_string(),
            inst.n.to_string(),
            inst.k.to_string(),
            csv_num(inst.gamma),
            csv_num(report.sup_error),
        ];
        for name in SWEEP_THEOREMS {
            match report.theorems.iter().find(|t| t.name == name) {
                Some(t) => {
                    row.push(csv_num(t.total_bound));
                    row.push(t.holds.to_string());
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        row.push(csv_num(report.adp_general.bound));
        row.push(report.adp_general.holds.to_string());
        row.push(csv_num(report.adp_specific.bound));
        row.push(report.adp_specific.holds.to_string());
        row.push(report.baseline.map(csv_num).unwrap_or_default());
        row.push(report.concentrability.map(csv_num).unwrap_or_default());
        row.push(csv_num(report.b_sup));
        row.push(report.violations.len().to_string());
        Ok((row.join(","), report.violations.len()))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let results: Vec<Result<(String, usize), Error>> = pool.install(|| {
        use rayon::prelude::*;
        (0..config.trials).into_par_iter().map(trial).collect()
    });

    let mut lines = vec![CSV_SCHEMA.to_string()];
    let mut header = vec![
        "trial".into(),
        "seed".into(),
        "m".into(),
        "n".into(),
        "k".into(),
        "gamma".into(),
        "actual_sup".into(),
    ];
    for name in SWEEP_THEOREMS {
        header.push(format!("bound_{name}"));
        header.push(format!("holds_{name}"));
    }
    header.extend(
        [
            "bound_adp_general",
            "holds_adp_general",
            "bound_adp_specific",
            "holds_adp_specific",
            "baseline",
            "concentrability",
            "b_sup",
            "violations",
        ]
        .map(String::from),
    );
    lines.push(header.join(","));
    let mut violations = 0;
    for result in results {
        let (line, v) = result?;
        violations += v;
        lines.push(line);
    }
    lines.push(format!("# violations,{violations}"));
    lines.push(String::new());
    Ok((lines.join("\n"), violations))
}
