//! Command implementations.

use std::fs;
use std::path::{Path, PathBuf};

use mobj_lqr::benchmarks;
use mobj_lqr::ce::{
    ce_error_report, ce_front, identify_dynamics, perturb_dynamics, IdentifyOptions,
};
use mobj_lqr::error::Error as LibError;
use mobj_lqr::lqr::{problem_from_json, problem_to_json, MultiObjectiveProblem};
use mobj_lqr::pareto::{
    approximate_front, brute_force_front, dominance_filter, front_distance, scalar_gain_grid,
    verify_lifting, FrontOptions,
};
use mobj_lqr::random::rng_from_seed;
use mobj_lqr::scalarization::{solve_scalarized, WeightVector};
use mobj_lqr::sensitivity::sensitivity_report;
use mobj_lqr::solvers::DareOptions;
use rand::Rng;
use serde_json::Value;

use crate::report::{
    fmt_f64, front_csv, front_json, matrix_rows, num, num_opt, to_json_string, vec_nums,
};

/// CLI failure with its process exit code: 2 for configuration and parse
/// problems, 3 for solver failures, 1 for failed verification checks.
#[derive(Debug)]
pub struct CmdError {
    pub exit_code: u8,
    pub message: String,
}

impl CmdError {
    pub fn parse(message: impl Into<String>) -> Self {
        CmdError {
            exit_code: 2,
            message: message.into(),
        }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        CmdError {
            exit_code: 3,
            message: message.into(),
        }
    }
}

fn lib_error(err: LibError) -> CmdError {
    match err {
        LibError::ProblemFile(_)
        | LibError::BadInput(_)
        | LibError::DimensionMismatch(_)
        | LibError::TooFine { .. } => CmdError::parse(err.to_string()),
        _ => CmdError::solver(err.to_string()),
    }
}

pub type CmdResult = Result<(), CmdError>;

pub fn load_problem(path: &Path, normalize: bool) -> Result<MultiObjectiveProblem, CmdError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CmdError::parse(format!("cannot read {}: {e}", path.display())))?;
    problem_from_json(&text, normalize).map_err(lib_error)
}

fn write_output(path: &Path, contents: &str) -> CmdResult {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CmdError::parse(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| CmdError::parse(format!("cannot write {}: {e}", path.display())))
}

pub fn parse_weight(text: &str, m: usize) -> Result<WeightVector, CmdError> {
    let entries: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CmdError::parse(format!("bad --weight: {e}")))?;
    if entries.len() != m {
        return Err(CmdError::parse(format!(
            "--weight has {} entries, problem has {m} objectives",
            entries.len()
        )));
    }
    WeightVector::new(entries).map_err(lib_error)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

// ---------------------------------------------------------------------------

pub struct SolveArgs {
    pub problem: PathBuf,
    pub weight: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub normalize: bool,
}

pub fn cmd_solve(args: &SolveArgs) -> CmdResult {
    let problem = load_problem(&args.problem, args.normalize)?;
    let m = problem.num_objectives();
    let weight = match &args.weight {
        Some(text) => parse_weight(text, m)?,
        None if m == 1 => WeightVector::new(vec![1.0]).map_err(lib_error)?,
        None => {
            return Err(CmdError::parse(format!(
                "problem has {m} objectives; pass --weight w1,...,w{m}"
            )))
        }
    };
    let point = solve_scalarized(&problem, &weight, &DareOptions::default()).map_err(lib_error)?;
    println!("weight: {:?}", weight.as_slice());
    println!("gain K: {:?}", point.gain.as_slice());
    println!("losses: {:?}", point.losses);
    println!("scalarized loss: {}", point.scalarized_loss());
    println!("dare residual: {:.3e}", point.dare.residual_norm);
    if let Some(out) = &args.out {
        let contents = match args.format {
            Format::Json => {
                let json = serde_json::json!({
                    "schema": 1,
                    "command": "solve",
                    "problem_digest": problem.digest(),
                    "weight": vec_nums(weight.as_slice()),
                    "K": matrix_rows(&point.gain),
                    "P": matrix_rows(&point.dare.p),
                    "losses": vec_nums(&point.losses),
                    "scalarized_loss": num(point.scalarized_loss()),
                    "dare_residual": num(point.dare.residual_norm),
                    "iterations": point.dare.iterations,
                });
                to_json_string(&json)
            }
            Format::Csv => {
                let mut header: Vec<String> = (1..=m).map(|i| format!("w_{i}")).collect();
                let d = problem.dynamics.control_dim();
                let n = problem.dynamics.state_dim();
                header.extend((1..=d * n).map(|i| format!("k_{i}")));
                header.extend((1..=m).map(|i| format!("loss_{i}")));
                header.push("scalarized_loss".into());
                header.push("dare_residual".into());
                let mut row: Vec<String> = weight.as_slice().iter().map(|&x| fmt_f64(x)).collect();
                for i in 0..d {
                    for j in 0..n {
                        row.push(fmt_f64(point.gain[(i, j)]));
                    }
                }
                row.extend(point.losses.iter().map(|&x| fmt_f64(x)));
                row.push(fmt_f64(point.scalarized_loss()));
                row.push(fmt_f64(point.dare.residual_norm));
                format!("{}\n{}\n", header.join(","), row.join(","))
            }
        };
        write_output(out, &contents)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------

pub struct FrontArgs {
    pub problem: PathBuf,
    pub epsilon: f64,
    pub workers: usize,
    pub out: PathBuf,
    pub format: Format,
    pub normalize: bool,
}

pub fn cmd_front(args: &FrontArgs) -> CmdResult {
    let problem = load_problem(&args.problem, args.normalize)?;
    let opts = FrontOptions {
        workers: args.workers,
        ..Default::default()
    };
    let front = approximate_front(&problem, args.epsilon, &opts).map_err(lib_error)?;
    println!(
        "front: {} points (net resolution {}, {} weights)",
        front.points.len(),
        front.net.resolution,
        front.net.points.len()
    );
    if !front.is_complete() {
        eprintln!(
            "warning: {} of {} weights failed; front is partial",
            front.failures.len(),
            front.net.points.len()
        );
    }
    let contents = match args.format {
        Format::Csv => front_csv(&front, &problem),
        Format::Json => to_json_string(&front_json(&front, &problem)),
    };
    write_output(&args.out, &contents)
}

// ---------------------------------------------------------------------------

pub struct SensitivityArgs {
    pub problem: PathBuf,
    pub epsilon: f64,
    pub sweep: Vec<f64>,
    pub seed: u64,
    pub universal_c: f64,
    pub workers: usize,
    pub out: PathBuf,
    pub normalize: bool,
}

pub fn cmd_sensitivity(args: &SensitivityArgs) -> CmdResult {
    let problem = load_problem(&args.problem, args.normalize)?;
    let opts = FrontOptions {
        workers: args.workers,
        ..Default::default()
    };
    let front = approximate_front(&problem, args.epsilon, &opts).map_err(lib_error)?;
    let report = sensitivity_report(&problem, &front, &args.sweep, args.seed, args.universal_c)
        .map_err(lib_error)?;
    let json = serde_json::json!({
        "schema": 1,
        "command": "sensitivity",
        "problem_digest": problem.digest(),
        "net_epsilon": num(args.epsilon),
        "note": "bounds hold up to an unspecified universal constant; universal_c is the knob",
        "margins": {
            "gamma_bar": num(report.margins.gamma_bar),
            "tau_bar": num(report.margins.tau_bar),
            "sampled_weights": report.margins.sampled_weights,
            "certified": report.margins.certified,
        },
        "constants": {
            "p_max": num(report.constants.p_max),
            "k_max": num(report.constants.k_max),
            "gamma": num(report.constants.gamma_cap),
            "c1": num(report.constants.c1),
            "c2": num(report.constants.c2),
            "c3": num(report.constants.c3),
            "c4": num(report.constants.c4),
            "r_bar": num(report.constants.r_bar),
            "norm_a": num(report.constants.norm_a),
            "norm_b": num(report.constants.norm_b),
            "p_front": num(report.constants.p_front),
            "l_front": num(report.constants.l_front),
        },
        "epsilons": vec_nums(&report.perturbation.epsilons),
        "empirical_dP": Value::Array(
            report.perturbation.empirical_dp.iter().map(|&dp| num_opt(dp)).collect()
        ),
        "theoretical_bound": vec_nums(&report.perturbation.theoretical_bound),
        "slope": num(report.perturbation.slope_loglog),
        "universal_c": num(report.universal_c),
        "validity_threshold": num(report.validity_threshold),
        "inside_validity": report.inside_validity,
    });
    println!(
        "sensitivity: gamma_bar {:.6}, tau_bar {:.6}, Gamma {:.6}, slope {:.3}",
        report.margins.gamma_bar,
        report.margins.tau_bar,
        report.constants.gamma_cap,
        report.perturbation.slope_loglog
    );
    write_output(&args.out, &to_json_string(&json))
}

// ---------------------------------------------------------------------------

pub struct CeArgs {
    pub problem: PathBuf,
    pub epsilon: f64,
    pub dyn_epsilon: Option<f64>,
    pub identify: bool,
    pub seed: u64,
    pub excitation_std: f64,
    pub horizon: usize,
    pub rollouts: usize,
    pub noise_std: f64,
    pub workers: usize,
    pub out: PathBuf,
    pub normalize: bool,
}

pub fn cmd_ce(args: &CeArgs) -> CmdResult {
    let problem = load_problem(&args.problem, args.normalize)?;
    let estimates = match (args.dyn_epsilon, args.identify) {
        (Some(_), true) | (None, false) => {
            return Err(CmdError::parse(
                "pass exactly one of --dyn-epsilon or --identify",
            ))
        }
        (Some(eps), false) => {
            perturb_dynamics(&problem.dynamics, eps, args.seed).map_err(lib_error)?
        }
        (None, true) => {
            let opts = IdentifyOptions {
                excitation_std: args.excitation_std,
                horizon: args.horizon,
                rollouts: args.rollouts,
                noise_std: args.noise_std,
            };
            identify_dynamics(&problem.dynamics, &opts, args.seed).map_err(lib_error)?
        }
    };
    let opts = FrontOptions {
        workers: args.workers,
        ..Default::default()
    };
    let truth = approximate_front(&problem, args.epsilon, &opts).map_err(lib_error)?;
    let ce = ce_front(&problem, &estimates, args.epsilon, &opts).map_err(lib_error)?;
    let report = ce_error_report(&truth, &ce).map_err(lib_error)?;
    let per_weight: Vec<Value> = report
        .per_weight
        .iter()
        .map(|e| {
            serde_json::json!({
                "w": vec_nums(&e.weight),
                "stable_true": e.stable_true,
                "weighted_err": num_opt(e.weighted_err),
                "uniform_err": num_opt(e.uniform_err),
            })
        })
        .collect();
    let provenance = match estimates.provenance {
        mobj_lqr::ce::Provenance::Synthetic => "synthetic",
        mobj_lqr::ce::Provenance::Identified => "identified",
    };
    let json = serde_json::json!({
        "schema": 1,
        "command": "ce",
        "problem_digest": problem.digest(),
        "epsilon": num(args.epsilon),
        "epsilon_dyn": num_opt(args.dyn_epsilon),
        "provenance": provenance,
        "err_a": num(estimates.err_a),
        "err_b": num(estimates.err_b),
        "per_weight": per_weight,
        "sup_weighted": num(report.sup_weighted),
        "sup_uniform": num(report.sup_uniform),
        "stable_fraction": num(report.stable_fraction),
    });
    println!(
        "ce: provenance {provenance}, err_A {:.3e}, err_B {:.3e}, stable fraction {:.3}, sup weighted {:.3e}, sup uniform {:.3e}",
        estimates.err_a, estimates.err_b, report.stable_fraction, report.sup_weighted, report.sup_uniform
    );
    write_output(&args.out, &to_json_string(&json))
}

// ---------------------------------------------------------------------------

pub struct DemoArgs {
    pub out: PathBuf,
    pub epsilon: Option<f64>,
    pub workers: usize,
}

/// Inverted-pendulum demo: write the problem file, the raw front (CSV and
/// JSON), and plot data with per-objective losses affinely normalized to
/// [0, 1] over the front.
pub fn cmd_demo_pendulum(args: &DemoArgs) -> CmdResult {
    let problem = benchmarks::inverted_pendulum();
    let epsilon = args.epsilon.unwrap_or_else(|| 10f64.powf(-1.5));
    let opts = FrontOptions {
        workers: args.workers,
        ..Default::default()
    };
    let front = approximate_front(&problem, epsilon, &opts).map_err(lib_error)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CmdError::parse(format!("cannot create {}: {e}", args.out.display())))?;

    write_output(
        &args.out.join("pendulum_problem.json"),
        &problem_to_json(&problem),
    )?;
    write_output(
        &args.out.join("pendulum_front.csv"),
        &front_csv(&front, &problem),
    )?;
    write_output(
        &args.out.join("pendulum_front.json"),
        &to_json_string(&front_json(&front, &problem)),
    )?;

    let m = problem.num_objectives();
    let mut mins = vec![f64::INFINITY; m];
    let mut maxs = vec![f64::NEG_INFINITY; m];
    for point in &front.points {
        for (i, &l) in point.losses.iter().enumerate() {
            mins[i] = mins[i].min(l);
            maxs[i] = maxs[i].max(l);
        }
    }
    let mut plot = String::from("w_1,w_2,normalized_loss_1,normalized_loss_2\n");
    for point in &front.points {
        let normalized: Vec<f64> = point
            .losses
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if maxs[i] > mins[i] {
                    (l - mins[i]) / (maxs[i] - mins[i])
                } else {
                    0.0
                }
            })
            .collect();
        let w = point.weight.as_slice();
        plot.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(w[0]),
            fmt_f64(w[1]),
            fmt_f64(normalized[0]),
            fmt_f64(normalized[1])
        ));
    }
    write_output(&args.out.join("pendulum_plot.csv"), &plot)?;

    let losses: Vec<Vec<f64>> = front.points.iter().map(|p| p.losses.clone()).collect();
    let nondominated = dominance_filter(&losses, 1e-9).len();
    println!(
        "pendulum demo: {} points at epsilon {:.6} ({} nondominated), losses normalized over \
         [{:.4}, {:.4}] x [{:.4}, {:.4}]",
        front.points.len(),
        epsilon,
        nondominated,
        mins[0],
        maxs[0],
        mins[1],
        maxs[1]
    );
    println!(
        "wrote pendulum_problem.json, pendulum_front.{{csv,json}}, pendulum_plot.csv to {}",
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

pub struct VerifyArgs {
    pub problem: Option<PathBuf>,
    pub seed: u64,
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

/// Scalar sufficiency and identity suite: cost-difference identity, lifting
/// feasibility across a front, and brute-force dominance against the
/// scalarization sweep.
pub fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let problem = match &args.problem {
        Some(path) => load_problem(path, false)?,
        None => benchmarks::sys2(),
    };
    if problem.dynamics.state_dim() != 1 || problem.dynamics.control_dim() != 1 {
        return Err(CmdError::parse(
            "verify needs a scalar problem (n = d = 1) for the brute-force arm",
        ));
    }
    let mut checks: Vec<Check> = Vec::new();
    let front_opts = FrontOptions::default();

    // Cost-difference identity on sampled stabilizing pairs.
    {
        let (lo, hi) = scalar_gain_grid(&problem.dynamics, 0.05, 0.01)
            .map_err(lib_error)?
            .iter()
            .map(|k| k[(0, 0)])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
                (lo.min(k), hi.max(k))
            });
        let mut rng = rng_from_seed(args.seed);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let draw = |rng: &mut rand_chacha::ChaCha12Rng| {
                nalgebra::DMatrix::from_element(1, 1, lo + (hi - lo) * rng.random::<f64>())
            };
            let k = draw(&mut rng);
            let k_prime = draw(&mut rng);
            for obj in problem.objectives() {
                let identity = mobj_lqr::lqr::cost_difference_exact(
                    &problem.dynamics,
                    &k,
                    &k_prime,
                    obj.q(),
                    obj.r(),
                )
                .map_err(lib_error)?;
                let direct =
                    mobj_lqr::lqr::cost_via_value(&problem.dynamics, &k_prime, obj.q(), obj.r())
                        .map_err(lib_error)?
                        - mobj_lqr::lqr::cost_via_value(&problem.dynamics, &k, obj.q(), obj.r())
                            .map_err(lib_error)?;
                worst = worst.max((identity - direct).abs() / direct.abs().max(1.0));
            }
        }
        checks.push(Check {
            name: "cost-difference identity",
            passed: worst <= 1e-8,
            detail: format!("max relative residual {worst:.3e} (tolerance 1e-8)"),
        });
    }

    // Lifting feasibility across a front.
    {
        let front = approximate_front(&problem, 0.05, &front_opts).map_err(lib_error)?;
        let mut min_eig = f64::INFINITY;
        let mut max_gap: f64 = 0.0;
        let mut feasible = true;
        for point in &front.points {
            let cert = verify_lifting(&problem.dynamics, &point.gain, problem.objectives())
                .map_err(lib_error)?;
            min_eig = min_eig.min(cert.min_eig_schur);
            for (gap, loss) in cert.objective_gap.iter().zip(&point.losses) {
                max_gap = max_gap.max(gap.abs() / (1.0 + loss));
            }
            feasible &= cert.feasible;
        }
        checks.push(Check {
            name: "lifting feasibility",
            passed: feasible,
            detail: format!(
                "min schur eigenvalue {min_eig:.3e} (floor -1e-8), max relative gap {max_gap:.3e} (cap 1e-8)"
            ),
        });
    }

    // Brute-force sufficiency at desk scale.
    {
        let grid = scalar_gain_grid(&problem.dynamics, 0.002, 0.001).map_err(lib_error)?;
        let brute = brute_force_front(&problem, &grid).map_err(lib_error)?;
        let front = approximate_front(&problem, 0.01, &front_opts).map_err(lib_error)?;
        let m = problem.num_objectives();
        let ranges: Vec<f64> = (0..m)
            .map(|i| {
                let lo = brute
                    .iter()
                    .map(|(_, l)| l[i])
                    .fold(f64::INFINITY, f64::min);
                let hi = brute
                    .iter()
                    .map(|(_, l)| l[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                (hi - lo).max(f64::MIN_POSITIVE)
            })
            .collect();
        let mut worst: f64 = 0.0;
        for (_, losses) in &brute {
            let best = front
                .points
                .iter()
                .map(|p| {
                    losses
                        .iter()
                        .zip(&p.losses)
                        .zip(&ranges)
                        .map(|((a, b), r)| (a - b).abs() / r)
                        .fold(0.0_f64, f64::max)
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
        checks.push(Check {
            name: "brute-force sufficiency",
            passed: worst <= 0.05,
            detail: format!(
                "{} nondominated grid gains; worst range-normalized gap {worst:.4} (cap 0.05)",
                brute.len()
            ),
        });
    }

    // Scalarized optima are never beaten by grid gains.
    {
        let front = approximate_front(&problem, 0.05, &front_opts).map_err(lib_error)?;
        let grid = scalar_gain_grid(&problem.dynamics, 0.002, 0.001).map_err(lib_error)?;
        let mut worst: f64 = 0.0;
        for point in &front.points {
            let optimal = point.scalarized_loss();
            for k in &grid {
                let losses = mobj_lqr::lqr::cost_vector(&problem, k).map_err(lib_error)?;
                let value = point.weight.dot(&losses);
                worst = worst.max(optimal - value);
            }
        }
        checks.push(Check {
            name: "weighted optimality",
            passed: worst <= 1e-10,
            detail: format!("max scalarized-optimum excess {worst:.3e} (tolerance 1e-10)"),
        });
    }

    // Refinement shrinks the front distance.
    {
        let coarse = approximate_front(&problem, 0.2, &front_opts).map_err(lib_error)?;
        let fine = approximate_front(&problem, 0.05, &front_opts).map_err(lib_error)?;
        let finer = approximate_front(&problem, 0.0125, &front_opts).map_err(lib_error)?;
        let d1 = front_distance(&coarse, &fine).map_err(lib_error)?;
        let d2 = front_distance(&fine, &finer).map_err(lib_error)?;
        checks.push(Check {
            name: "refinement contraction",
            passed: d2.uniform_sup < d1.uniform_sup && d2.weighted_sup < d1.weighted_sup,
            detail: format!(
                "uniform {:.3e} -> {:.3e}, weighted {:.3e} -> {:.3e}",
                d1.uniform_sup, d2.uniform_sup, d1.weighted_sup, d2.weighted_sup
            ),
        });
    }

    let mut all_passed = true;
    for check in &checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {} - {}", check.name, check.detail);
        all_passed &= check.passed;
    }
    if all_passed {
        Ok(())
    } else {
        Err(CmdError {
            exit_code: 1,
            message: "one or more verification checks failed".into(),
        })
    }
}
