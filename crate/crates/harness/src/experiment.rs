//! Cold start, the optimizer and baseline runs, and per-seed traces.

use std::path::PathBuf;

use lcbo_core::benchmarks::{
    make_beam, make_synthetic, make_toy_circle, make_truss, noisy_observe, BeamParams, ProblemDef, TrussGeometry,
};
use lcbo_core::lcbo::{run_from, LcboConfig, LcboStart};
use lcbo_core::rng::{stream_rng, STREAM_BASELINE, STREAM_COLD_START, STREAM_NOISE};
use rand::Rng;

use crate::config::{ExperimentConfig, Judge, Method, ProblemKind};
use crate::error::HarnessError;
use crate::report::{aggregate, render_svg, write_aggregate, write_trace, TraceRow};

pub fn build_problem(cfg: &ExperimentConfig) -> Result<ProblemDef, HarnessError> {
    let p = match cfg.problem {
        ProblemKind::ToyCircle => make_toy_circle(),
        ProblemKind::Synthetic => make_synthetic(cfg.dim, cfg.problem_seed)?,
        ProblemKind::Truss => make_truss(TrussGeometry::standard_25_bar())?,
        ProblemKind::Beam => make_beam(BeamParams::default())?,
    };
    match cfg.noise_sd {
        Some(sd) => Ok(p.with_noise_sd(sd)?),
        None => Ok(p),
    }
}

/// One point evaluated at all outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub observed: Vec<f64>,
    pub rs_hat: f64,
    pub rf_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColdStart {
    pub points: Vec<Vec<f64>>,
    pub observations: Vec<Vec<f64>>,
    pub x1: Vec<f64>,
}

/// The feasible point with least objective, else the least-violating one; first wins ties.
pub fn select_start(
    problem: &ProblemDef,
    points: &[Vec<f64>],
    observations: &[Vec<f64>],
    judge: Judge,
    eq_tol: f64,
) -> Result<Vec<f64>, HarnessError> {
    let values: Vec<Vec<f64>> = match judge {
        Judge::Truth => points.iter().map(|x| problem.evaluate(x)).collect::<Result<_, _>>()?,
        Judge::Noisy => observations.to_vec(),
    };
    let mut best: Option<(bool, f64, usize)> = None;
    for (i, v) in values.iter().enumerate() {
        let feasible = problem.is_feasible(v, eq_tol);
        let score = if feasible { v[0] } else { problem.violation_norm(v) };
        let better = match best {
            None => true,
            Some((bf, bs, _)) => (feasible && !bf) || (feasible == bf && score < bs),
        };
        if better {
            best = Some((feasible, score, i));
        }
    }
    best.map(|(_, _, i)| points[i].clone())
        .ok_or_else(|| HarnessError::Runtime("cold start produced no points".into()))
}

/// `d` uniform points observed with noise, plus the starting candidate.
pub fn cold_start(problem: &ProblemDef, seed: u64, judge: Judge, eq_tol: f64) -> Result<ColdStart, HarnessError> {
    let mut rng = stream_rng(seed, STREAM_COLD_START);
    let dom = &problem.domain;
    let mut points = Vec::with_capacity(problem.dim());
    let mut observations = Vec::with_capacity(problem.dim());
    for _ in 0..problem.dim() {
        let x: Vec<f64> = (0..problem.dim()).map(|i| rng.gen_range(dom.lower()[i]..=dom.upper()[i])).collect();
        observations.push(noisy_observe(problem, &x, &mut rng)?);
        points.push(x);
    }
    let x1 = select_start(problem, &points, &observations, judge, eq_tol)?;
    Ok(ColdStart { points, observations, x1 })
}

/// Everything one repetition produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub seed: u64,
    pub evaluations: Vec<Evaluation>,
    pub rows: Vec<TraceRow>,
    pub oracle_calls: usize,
    pub iterations: usize,
}

/// Running best feasible objective per evaluation, padded to `budget` rows.
pub fn build_rows(
    problem: &ProblemDef,
    evaluations: &[Evaluation],
    budget: usize,
    seed: u64,
    judge: Judge,
    eq_tol: f64,
) -> Result<Vec<TraceRow>, HarnessError> {
    let mut rows = Vec::with_capacity(budget);
    let mut best = f64::INFINITY;
    let (mut rs, mut rf) = (f64::NAN, f64::NAN);
    for eval in 1..=budget {
        if let Some(e) = evaluations.get(eval - 1) {
            let v = match judge {
                Judge::Truth => problem.evaluate(&e.x)?,
                Judge::Noisy => e.observed.clone(),
            };
            if problem.is_feasible(&v, eq_tol) && v[0] < best {
                best = v[0];
            }
            rs = e.rs_hat;
            rf = e.rf_hat;
        }
        rows.push(TraceRow { eval, seed, best_feasible: best, rs_hat: rs, rf_hat: rf });
    }
    Ok(rows)
}

/// Cold start followed by the optimizer, within `budget` evaluations.
pub fn run_lcbo(
    problem: &ProblemDef,
    config: &LcboConfig,
    budget: usize,
    seed: u64,
    start_judge: Judge,
    judge: Judge,
    eq_tol: f64,
) -> Result<RunTrace, HarnessError> {
    let d = problem.dim();
    if budget < d {
        return Err(HarnessError::Config(format!("budget {budget} is smaller than the cold start of {d}")));
    }
    let outputs = problem.num_outputs();
    let cs = cold_start(problem, seed, start_judge, eq_tol)?;
    let mut evaluations: Vec<Evaluation> = cs
        .points
        .iter()
        .zip(&cs.observations)
        .map(|(x, y)| Evaluation { x: x.clone(), observed: y.clone(), rs_hat: f64::NAN, rf_hat: f64::NAN })
        .collect();
    let cfg = LcboConfig { budget: (budget - d) * outputs, ..config.clone() };
    let start = LcboStart { points: cs.points, observations: cs.observations, x1: cs.x1 };
    let records = run_from(problem, &cfg, &start, seed)?;
    for r in &records {
        for (x, y) in r.batch.iter().zip(&r.observations) {
            evaluations.push(Evaluation { x: x.clone(), observed: y.clone(), rs_hat: r.rs_hat, rf_hat: r.rf_hat });
        }
    }
    let oracle_calls = d * outputs + records.last().map_or(0, |r| r.oracle_calls);
    let rows = build_rows(problem, &evaluations, budget, seed, judge, eq_tol)?;
    Ok(RunTrace { seed, evaluations, rows, oracle_calls, iterations: records.len() })
}

/// Uniform sampling of the domain with the same accounting and trace format.
pub fn random_search_baseline(
    problem: &ProblemDef,
    budget: usize,
    seed: u64,
    judge: Judge,
    eq_tol: f64,
) -> Result<RunTrace, HarnessError> {
    let mut pos_rng = stream_rng(seed, STREAM_BASELINE);
    let mut noise_rng = stream_rng(seed, STREAM_NOISE);
    let dom = &problem.domain;
    let mut evaluations = Vec::with_capacity(budget);
    for _ in 0..budget {
        let x: Vec<f64> = (0..problem.dim()).map(|i| pos_rng.gen_range(dom.lower()[i]..=dom.upper()[i])).collect();
        let observed = noisy_observe(problem, &x, &mut noise_rng)?;
        evaluations.push(Evaluation { x, observed, rs_hat: f64::NAN, rf_hat: f64::NAN });
    }
    let rows = build_rows(problem, &evaluations, budget, seed, judge, eq_tol)?;
    Ok(RunTrace { seed, evaluations, rows, oracle_calls: budget * problem.num_outputs(), iterations: 0 })
}

/// One repetition of the configured method.
pub fn run_single(cfg: &ExperimentConfig, problem: &ProblemDef, seed: u64) -> Result<RunTrace, HarnessError> {
    match cfg.method {
        Method::Lcbo => run_lcbo(problem, &cfg.lcbo_config()?, cfg.budget, seed, cfg.start_judge, cfg.judge, cfg.eq_tol),
        Method::RandomSearch => random_search_baseline(problem, cfg.budget, seed, cfg.judge, cfg.eq_tol),
    }
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub runs: Vec<RunTrace>,
    pub trace_files: Vec<PathBuf>,
    pub aggregate_file: PathBuf,
    pub plot_file: Option<PathBuf>,
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

/// Runs every repetition (seed `base_seed + r`), then writes traces, the aggregate and optional plot.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let seeds: Vec<u64> = (0..cfg.repetitions as u64).map(|r| cfg.base_seed + r).collect();

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len());
    let mut results: Vec<Option<Result<RunTrace, HarnessError>>> = (0..seeds.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let (problem, seeds) = (&problem, &seeds);
                scope.spawn(move || {
                    (w..seeds.len())
                        .step_by(workers)
                        .map(|i| (i, run_single(cfg, problem, seeds[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let runs = results
        .into_iter()
        .map(|r| r.expect("every repetition ran"))
        .collect::<Result<Vec<_>, _>>()?;

    std::fs::create_dir_all(&cfg.out)?;
    let mut trace_files = Vec::with_capacity(runs.len());
    for run in &runs {
        let path = cfg.out.join(trace_file_name(run.seed));
        write_trace(&path, &run.rows)?;
        trace_files.push(path);
    }
    let traces: Vec<Vec<TraceRow>> = runs.iter().map(|r| r.rows.clone()).collect();
    let agg = aggregate(&traces)?;
    let aggregate_file = cfg.out.join("aggregate.csv");
    write_aggregate(&aggregate_file, &agg)?;
    let plot_file = if cfg.plots {
        let path = cfg.out.join("convergence.svg");
        std::fs::write(&path, render_svg(&agg, &problem.name))?;
        Some(path)
    } else {
        None
    };
    Ok(ExperimentOutput { runs, trace_files, aggregate_file, plot_file })
}
