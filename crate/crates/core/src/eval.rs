//! Side-by-side evaluation of allocation methods: per-instance objectives,
//! error rates against the exhaustive benchmark, empirical CDFs and runtime
//! tables.
//!
//! Every method is scored on one evaluation fading stream per instance,
//! drawn from the evaluation seed and the instance id with the reporting
//! sample count. The benchmark is re-solved on that stream, so it is the
//! exact maximum over the feasible grid allocations it is scored on.
//!
//! Scores are feasibility-gated: an allocation that violates a constraint
//! on the evaluation stream scores 0. The ungated objective is kept
//! alongside. The error rate is `η = (C_n − C_0)/C_0` with `C_0` the
//! benchmark score; it is undefined (NaN) when the benchmark scores 0.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::channel::ChannelGains;
use crate::neural::{Model, PowerDecoding};
use crate::par;
use crate::problem::{evaluate_on, Allocation, FadingStream, ProblemParams};
use crate::rng::{derive_seed, stream};
use crate::solvers::{exhaustive_solve, fixed_power_baseline, BaselineMode, PowerGrid, SolverSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Benchmark,
    Cnn,
    Dnn,
    MaxPower,
    MinPower,
    RandomPower,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Benchmark, Method::Cnn, Method::Dnn, Method::MaxPower, Method::MinPower, Method::RandomPower];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Benchmark => "Benchmark",
            Method::Cnn => "CNN",
            Method::Dnn => "DNN",
            Method::MaxPower => "MaxPower",
            Method::MinPower => "MinPower",
            Method::RandomPower => "RandomPower",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }

    fn baseline(&self) -> Option<BaselineMode> {
        match self {
            Method::MaxPower => Some(BaselineMode::Max),
            Method::MinPower => Some(BaselineMode::Min),
            Method::RandomPower => Some(BaselineMode::Random),
            _ => None,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.baseline().is_some()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no {0} model was provided")]
    MissingModel(&'static str),
    #[error("no test instances")]
    NoInstances,
}

/// Trained models available to the evaluator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Models<'a> {
    pub cnn: Option<&'a Model>,
    pub dnn: Option<&'a Model>,
}

impl<'a> Models<'a> {
    fn get(&self, method: Method) -> Result<Option<&'a Model>, EvalError> {
        match method {
            Method::Cnn => self.cnn.map(Some).ok_or(EvalError::MissingModel("CNN")),
            Method::Dnn => self.dnn.map(Some).ok_or(EvalError::MissingModel("DNN")),
            _ => Ok(None),
        }
    }
}

/// Everything shared by all methods and instances.
#[derive(Debug, Clone)]
pub struct EvalContext<'a> {
    pub params: ProblemParams,
    pub grid: PowerGrid,
    /// Settings for solver-based methods at solve time (runtime table).
    pub solver: SolverSettings,
    /// Monte-Carlo samples of the evaluation stream.
    pub mc_report: usize,
    pub seed: u64,
    pub models: Models<'a>,
    /// How learned power outputs become watts.
    pub decoding: PowerDecoding,
}

/// A test instance and its id (used to derive its evaluation stream).
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub id: usize,
    pub gains: &'a ChannelGains,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub instance: usize,
    pub method: Method,
    /// Feasibility-gated objective.
    pub objective: f64,
    pub raw_objective: f64,
    /// Signed η against the benchmark, NaN when undefined.
    pub error_rate: f64,
    pub feasible: bool,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

/// Empirical CDF with one step per value: `(x_i, i/n)` for sorted `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    pub points: Vec<(f64, f64)>,
}

impl Cdf {
    /// NaN values are skipped.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = values.into_iter().filter(|x| !x.is_nan()).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        Self { points: v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect() }
    }

    /// F(x) = share of values ≤ x.
    pub fn at(&self, x: f64) -> f64 {
        self.points.iter().rev().find(|(v, _)| *v <= x).map_or(0.0, |&(_, f)| f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub instances: usize,
    pub mean_objective: f64,
    pub mean_raw_objective: f64,
    pub feasible_fraction: f64,
    /// Mean |η| over instances where η is defined.
    pub mean_abs_error: f64,
    /// Share of instances (η undefined counts as a miss) with |η| ≤ 0.10.
    pub within_10pct: f64,
    pub within_15pct: f64,
    pub failures: usize,
    pub total_time_s: f64,
    pub objective_cdf: Cdf,
    pub abs_error_cdf: Cdf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub methods: Vec<Method>,
    pub rows: Vec<EvalRow>,
    pub summaries: Vec<MethodSummary>,
}

struct Outcome {
    objective: f64,
    raw: f64,
    feasible: bool,
    time: f64,
    error: Option<String>,
}

fn failed(e: impl ToString, time: f64) -> Outcome {
    Outcome { objective: 0.0, raw: f64::NAN, feasible: false, time, error: Some(e.to_string()) }
}

/// Seed of an instance's evaluation stream.
pub fn evaluation_seed(seed: u64, instance: usize) -> u64 {
    derive_seed(seed, stream::EVALUATION, instance as u64)
}

fn run_method(ctx: &EvalContext<'_>, method: Method, inst: &Instance<'_>, eval_stream: &FadingStream) -> Outcome {
    let alpha = &inst.gains.large_scale;
    let seed = evaluation_seed(ctx.seed, inst.id);
    let on_stream = SolverSettings { mc_samples: ctx.mc_report, ..ctx.solver };
    let start = Instant::now();
    let result = match method {
        Method::Benchmark => exhaustive_solve(alpha, &ctx.params, &ctx.grid, &on_stream, seed).map(|r| r.report),
        Method::Cnn | Method::Dnn => {
            let model = ctx.models.get(method).ok().flatten().expect("checked before the run");
            let alloc = match model.infer(inst.gains, &ctx.decoding) {
                Ok(a) => a,
                Err(e) => return failed(e, start.elapsed().as_secs_f64()),
            };
            let time = start.elapsed().as_secs_f64();
            return match evaluate_on(alpha, &alloc, &ctx.params, eval_stream) {
                Ok(r) => Outcome { objective: if r.feasible { r.objective } else { 0.0 }, raw: r.objective, feasible: r.feasible, time, error: None },
                Err(e) => failed(e, time),
            };
        }
        m => {
            let mode = m.baseline().expect("remaining methods are baselines");
            fixed_power_baseline(alpha, &ctx.params, &ctx.grid, mode, &on_stream, seed).map(|r| r.report)
        }
    };
    let time = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => Outcome { objective: if r.feasible { r.objective } else { 0.0 }, raw: r.objective, feasible: r.feasible, time, error: None },
        Err(e) => failed(e, time),
    }
}

/// Runs every method on every instance. Instances run in parallel; rows
/// come out ordered by instance, then by method as listed.
pub fn evaluate(methods: &[Method], instances: &[Instance<'_>], ctx: &EvalContext<'_>) -> Result<EvalReport, EvalError> {
    for &m in methods {
        ctx.models.get(m)?;
    }
    let mut with_bench: Vec<Method> = methods.to_vec();
    if !with_bench.contains(&Method::Benchmark) {
        with_bench.insert(0, Method::Benchmark);
    }
    let per_instance: Vec<Vec<EvalRow>> = par::map_slice(instances, |inst| {
        let seed = evaluation_seed(ctx.seed, inst.id);
        let learned = with_bench.iter().any(|m| matches!(m, Method::Cnn | Method::Dnn));
        let stream = if learned {
            FadingStream::generate(inst.gains.dims(), ctx.mc_report.max(1), seed)
        } else {
            FadingStream::generate(inst.gains.dims(), 0, seed)
        };
        let outcomes: Vec<(Method, Outcome)> = with_bench.iter().map(|&m| (m, run_method(ctx, m, inst, &stream))).collect();
        let c0 = outcomes.iter().find(|(m, _)| *m == Method::Benchmark).map(|(_, o)| o.objective).unwrap_or(0.0);
        outcomes
            .into_iter()
            .filter(|(m, _)| methods.contains(m))
            .map(|(method, o)| EvalRow {
                instance: inst.id,
                method,
                objective: o.objective,
                raw_objective: o.raw,
                error_rate: if c0 > 0.0 { (o.objective - c0) / c0 } else { f64::NAN },
                feasible: o.feasible,
                wall_time_s: o.time,
                error: o.error,
            })
            .collect()
    });
    let rows: Vec<EvalRow> = per_instance.into_iter().flatten().collect();
    let summaries = methods.iter().map(|&m| summarize(m, &rows)).collect();
    Ok(EvalReport { methods: methods.to_vec(), rows, summaries })
}

fn summarize(method: Method, rows: &[EvalRow]) -> MethodSummary {
    let mine: Vec<&EvalRow> = rows.iter().filter(|r| r.method == method).collect();
    let n = mine.len().max(1) as f64;
    let defined: Vec<f64> = mine.iter().map(|r| r.error_rate.abs()).filter(|e| !e.is_nan()).collect();
    let within = |tol: f64| defined.iter().filter(|&&e| e <= tol).count() as f64 / n;
    let raw: Vec<f64> = mine.iter().map(|r| r.raw_objective).filter(|x| !x.is_nan()).collect();
    MethodSummary {
        method,
        instances: mine.len(),
        mean_objective: mine.iter().map(|r| r.objective).sum::<f64>() / n,
        mean_raw_objective: raw.iter().sum::<f64>() / raw.len().max(1) as f64,
        feasible_fraction: mine.iter().filter(|r| r.feasible).count() as f64 / n,
        mean_abs_error: defined.iter().sum::<f64>() / defined.len().max(1) as f64,
        within_10pct: within(0.10),
        within_15pct: within(0.15),
        failures: mine.iter().filter(|r| r.error.is_some()).count(),
        total_time_s: mine.iter().map(|r| r.wall_time_s).sum(),
        objective_cdf: Cdf::from_values(mine.iter().map(|r| r.objective)),
        abs_error_cdf: Cdf::from_values(defined.iter().copied()),
    }
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

impl EvalReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &EvalRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Per-instance results without timing, so identical seeds and models
    /// give identical bytes.
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("instance,method,objective,raw_objective,error_rate,feasible,error\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.instance,
                r.method.name(),
                fmt_f(r.objective),
                fmt_f(r.raw_objective),
                fmt_f(r.error_rate),
                r.feasible,
                r.error.as_deref().unwrap_or("").replace(',', ";")
            );
        }
        s
    }

    /// Per-instance wall times.
    pub fn timing_csv(&self) -> String {
        let mut s = String::from("instance,method,wall_time_s\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.9}", r.instance, r.method.name(), r.wall_time_s);
        }
        s
    }

    /// Long-format CDFs: `method,quantity,x,F` with quantity `objective` or
    /// `abs_error_rate`.
    pub fn cdf_csv(&self) -> String {
        let mut s = String::from("method,quantity,x,F\n");
        for sm in &self.summaries {
            for (q, cdf) in [("objective", &sm.objective_cdf), ("abs_error_rate", &sm.abs_error_cdf)] {
                for (x, f) in &cdf.points {
                    let _ = writeln!(s, "{},{q},{},{}", sm.method.name(), fmt_f(*x), fmt_f(*f));
                }
            }
        }
        s
    }

    /// Plain-text table of the aggregates (no timing).
    pub fn summary_text(&self) -> String {
        let mut s = format!(
            "{:<12} {:>9} {:>12} {:>12} {:>9} {:>11} {:>9} {:>9} {:>8}\n",
            "method", "instances", "mean_obj", "mean_raw_obj", "feasible", "mean_|eta|", "|eta|<=.1", "|eta|<=.15", "failures"
        );
        for m in &self.summaries {
            let _ = writeln!(
                s,
                "{:<12} {:>9} {:>12.4} {:>12.4} {:>9.3} {:>11.4} {:>9.3} {:>9.3} {:>8}",
                m.method.name(),
                m.instances,
                m.mean_objective,
                m.mean_raw_objective,
                m.feasible_fraction,
                m.mean_abs_error,
                m.within_10pct,
                m.within_15pct,
                m.failures
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingMode {
    SingleThreaded,
    Parallel,
}

impl TimingMode {
    pub fn name(&self) -> &'static str {
        match self {
            TimingMode::SingleThreaded => "single-threaded",
            TimingMode::Parallel => "parallel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub method: Method,
    pub mode: TimingMode,
    pub instances: usize,
    pub total_s: f64,
    pub per_instance_s: f64,
    /// Total relative to the benchmark's total in the same mode.
    pub ratio_to_benchmark: Option<f64>,
}

/// Time taken by one method to produce allocations for all instances, at
/// solve-time settings (no evaluation stream).
fn time_method(ctx: &EvalContext<'_>, method: Method, instances: &[Instance<'_>], mode: TimingMode) -> f64 {
    let run = |inst: &Instance<'_>| -> Option<Allocation> {
        let alpha = &inst.gains.large_scale;
        let seed = evaluation_seed(ctx.seed, inst.id);
        match method {
            Method::Benchmark => exhaustive_solve(alpha, &ctx.params, &ctx.grid, &ctx.solver, seed).ok().map(|r| r.allocation),
            Method::Cnn | Method::Dnn => {
                ctx.models.get(method).ok().flatten().and_then(|m| m.infer(inst.gains, &ctx.decoding).ok())
            }
            m => fixed_power_baseline(alpha, &ctx.params, &ctx.grid, m.baseline().expect("baseline"), &ctx.solver, seed)
                .ok()
                .map(|r| r.allocation),
        }
    };
    let timed = || {
        let start = Instant::now();
        let out: Vec<Option<Allocation>> = par::map_slice(instances, run);
        let t = start.elapsed().as_secs_f64();
        std::hint::black_box(out);
        t
    };
    match mode {
        TimingMode::SingleThreaded => par::single_threaded(timed),
        TimingMode::Parallel => timed(),
    }
}

/// Wall-clock totals per method over the same instance list, in each
/// requested mode, with ratios to the benchmark.
pub fn runtime_table(
    methods: &[Method],
    instances: &[Instance<'_>],
    ctx: &EvalContext<'_>,
    modes: &[TimingMode],
) -> Result<Vec<RuntimeRow>, EvalError> {
    if methods.is_empty() {
        return Ok(Vec::new());
    }
    if instances.is_empty() {
        return Err(EvalError::NoInstances);
    }
    for &m in methods {
        ctx.models.get(m)?;
    }
    let mut rows = Vec::new();
    for &mode in modes {
        let totals: Vec<(Method, f64)> = methods.iter().map(|&m| (m, time_method(ctx, m, instances, mode))).collect();
        let bench = totals.iter().find(|(m, _)| *m == Method::Benchmark).map(|&(_, t)| t);
        for (method, total) in totals {
            rows.push(RuntimeRow {
                method,
                mode,
                instances: instances.len(),
                total_s: total,
                per_instance_s: total / instances.len() as f64,
                ratio_to_benchmark: bench.map(|b| total / b),
            });
        }
    }
    Ok(rows)
}

pub fn runtime_csv(rows: &[RuntimeRow]) -> String {
    let mut s = String::from("method,mode,instances,total_s,per_instance_s,ratio_to_benchmark\n");
    for r in rows {
        let ratio = r.ratio_to_benchmark.map_or(String::new(), |x| format!("{x:.6}"));
        let _ = writeln!(s, "{},{},{},{:.6},{:.9},{}", r.method.name(), r.mode.name(), r.instances, r.total_s, r.per_instance_s, ratio);
    }
    s
}
