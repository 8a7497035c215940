//! Experiment engine: phase-transition grids, convergence traces, timing
//! tables, and an SVG heatmap writer.
//!
//! Every trial derives its generator seed from the experiment base seed and
//! its grid position, so a run is reproducible bit for bit (wall-clock
//! columns aside) for any worker count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blockmat::{GroupKind, ObservationMatrix};
use crate::conditions::red_boundary_beta;
use crate::error::{invalid, Result};
use crate::gpm::{run as run_gpm, GpmConfig, GpmTrace};
use crate::metrics::estimation_error;
use crate::seeds::trial_seed;
use crate::sgbm::{generate, JointState, Rates, SgbmParams};
use crate::spectral::{identity_init, initialize, InitConfig};

/// Which start state a solve runs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Spectral,
    Identity,
}

/// Builds the requested start state for an observation.
pub fn build_init(
    a: &ObservationMatrix,
    k: usize,
    init: InitKind,
    pivot_seed: u64,
) -> Result<JointState> {
    match init {
        InitKind::Spectral => {
            let cfg = InitConfig { pivot_seed, ..InitConfig::default() };
            initialize(a, k, a.d(), &cfg)
        }
        InitKind::Identity => identity_init(a.n(), k, a.d()),
    }
}

/// A phase-transition experiment: a rectangular grid of logarithmic rate
/// pairs, a trial count per cell, and the success threshold on the final
/// estimation error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub kind: GroupKind,
    /// Same-cluster rates on the logarithmic scale, strictly ascending.
    pub alpha_values: Vec<f64>,
    /// Cross-cluster rates on the logarithmic scale, strictly ascending.
    pub beta_values: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// A trial succeeds when the final estimation error is at most this.
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_trials() -> usize {
    20
}

fn default_tau() -> f64 {
    1e-3
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.kind.dim() != self.d {
            return Err(invalid(format!(
                "block size {} disagrees with the group dimension {}",
                self.d,
                self.kind.dim()
            )));
        }
        if self.k == 0 || self.n == 0 || self.n % self.k != 0 {
            return Err(invalid(format!(
                "n={} must be a positive multiple of K={}",
                self.n, self.k
            )));
        }
        for (name, vals) in [("alpha", &self.alpha_values), ("beta", &self.beta_values)] {
            if vals.is_empty() {
                return Err(invalid(format!("{name}_values must be non-empty")));
            }
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(invalid(format!("{name}_values must be finite and non-negative")));
            }
            if vals.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(format!("{name}_values must be strictly ascending")));
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid(format!("tau must be a positive number, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn params_at(&self, alpha: f64, beta: f64) -> Result<SgbmParams> {
        SgbmParams::new(self.n, self.k, self.kind, Rates::Logarithmic { alpha, beta })
    }
}

/// A trial that returned an error instead of an estimate. It still counts
/// toward the cell's trial total, as a failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub alpha_index: usize,
    pub beta_index: usize,
    pub trial: usize,
    pub reason: String,
}

/// Aggregated outcome of one grid run. Matrices are row-major with the
/// alpha index as the row and the beta index as the column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub alpha_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    pub trials: usize,
    pub successes: Vec<usize>,
    pub success_rate: Vec<f64>,
    /// Mean iterate count over the trials that produced an estimate.
    pub mean_iters: Vec<f64>,
    /// Mean solve time (start state plus iteration, generation excluded)
    /// over the trials that produced an estimate.
    pub mean_seconds: Vec<f64>,
    pub failures: Vec<TrialFailure>,
}

impl GridResult {
    pub fn cell(&self, alpha_index: usize, beta_index: usize) -> usize {
        alpha_index * self.beta_values.len() + beta_index
    }
}

fn solve_once(
    params: &SgbmParams,
    tau: f64,
    seed: u64,
) -> std::result::Result<(bool, usize, f64), String> {
    let (truth, a) = generate(params, seed).map_err(|e| format!("generate: {e}"))?;
    let started = Instant::now();
    let v0 = build_init(&a, params.k, InitKind::Spectral, seed).map_err(|e| format!("init: {e}"))?;
    let (out, trace) = run_gpm(&a, &v0, params.kind, &GpmConfig::default())
        .map_err(|e| format!("solve: {e}"))?;
    let seconds = started.elapsed().as_secs_f64();
    let err = estimation_error(&out, &truth, params.kind).map_err(|e| format!("metric: {e}"))?;
    Ok((err <= tau, trace.iterates_used, seconds))
}

/// Runs every cell of the grid, `trials` independent trials per cell, in
/// parallel over trials. A trial that errors is recorded as a failure with
/// its reason and never aborts the rest of the grid.
pub fn run_phase(grid: &ExperimentGrid) -> Result<GridResult> {
    grid.validate()?;
    let na = grid.alpha_values.len();
    let nb = grid.beta_values.len();
    let cells = na * nb;
    let total = cells * grid.trials;

    let records: Vec<std::result::Result<(bool, usize, f64), String>> = (0..total)
        .into_par_iter()
        .map(|w| {
            let trial = w % grid.trials;
            let cell = w / grid.trials;
            let ai = cell / nb;
            let bi = cell % nb;
            let seed = trial_seed(grid.base_seed, ai, bi, trial);
            grid.params_at(grid.alpha_values[ai], grid.beta_values[bi])
                .map_err(|e| format!("params: {e}"))
                .and_then(|params| solve_once(&params, grid.tau, seed))
        })
        .collect();

    let mut successes = vec![0usize; cells];
    let mut iter_sum = vec![0.0f64; cells];
    let mut sec_sum = vec![0.0f64; cells];
    let mut completed = vec![0usize; cells];
    let mut failures = Vec::new();
    for (w, record) in records.into_iter().enumerate() {
        let trial = w % grid.trials;
        let cell = w / grid.trials;
        match record {
            Ok((success, iters, seconds)) => {
                completed[cell] += 1;
                iter_sum[cell] += iters as f64;
                sec_sum[cell] += seconds;
                if success {
                    successes[cell] += 1;
                }
            }
            Err(reason) => failures.push(TrialFailure {
                alpha_index: cell / nb,
                beta_index: cell % nb,
                trial,
                reason,
            }),
        }
    }

    let mean = |sums: &[f64]| -> Vec<f64> {
        sums.iter()
            .zip(&completed)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    };
    Ok(GridResult {
        alpha_values: grid.alpha_values.clone(),
        beta_values: grid.beta_values.clone(),
        trials: grid.trials,
        success_rate: successes.iter().map(|&s| s as f64 / grid.trials as f64).collect(),
        mean_iters: mean(&iter_sum),
        mean_seconds: mean(&sec_sum),
        successes,
        failures,
    })
}

/// One cell table per line, row-major, with a constant trailing solver
/// column reserved for comparing methods later.
pub fn phase_csv(result: &GridResult) -> String {
    let mut out = String::from("alpha,beta,trials,successes,rate,mean_iters,mean_seconds,solver\n");
    for ai in 0..result.alpha_values.len() {
        for bi in 0..result.beta_values.len() {
            let c = result.cell(ai, bi);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},gpm\n",
                result.alpha_values[ai],
                result.beta_values[bi],
                result.trials,
                result.successes[c],
                result.success_rate[c],
                result.mean_iters[c],
                result.mean_seconds[c],
            ));
        }
    }
    out
}

/// One full solve with per-iterate error tracking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub seed: u64,
    /// Estimation error of the rounded final state.
    pub final_error: f64,
    pub trace: GpmTrace,
}

/// Solves one instance per seed under fixed parameters, recording the
/// relaxed estimation error of every iterate.
pub fn run_convergence(params: &SgbmParams, seeds: &[u64]) -> Result<Vec<ConvergenceRun>> {
    params.validate()?;
    if seeds.is_empty() {
        return Err(invalid("at least one seed is required"));
    }
    seeds
        .par_iter()
        .map(|&seed| {
            let (truth, a) = generate(params, seed)?;
            let v0 = build_init(&a, params.k, InitKind::Spectral, seed)?;
            let cfg = GpmConfig { track_error: Some(&truth), ..GpmConfig::default() };
            let (out, trace) = run_gpm(&a, &v0, params.kind, &cfg)?;
            let final_error = estimation_error(&out, &truth, params.kind)?;
            Ok(ConvergenceRun { seed, final_error, trace })
        })
        .collect()
}

/// Per-iterate rows for one run. The change column is empty on the row for
/// the start state.
pub fn convergence_csv(run: &ConvergenceRun) -> String {
    let trace = &run.trace;
    let mut out = String::from("seed,iter,epsilon,objective,frob_change\n");
    for it in 0..=trace.iterates_used {
        let eps = trace
            .per_iter_error
            .as_ref()
            .map(|e| e[it].to_string())
            .unwrap_or_default();
        let change = if it == 0 { String::new() } else { trace.per_iter_change[it - 1].to_string() };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            run.seed, it, eps, trace.per_iter_objective[it], change
        ));
    }
    out
}

/// One timing measurement request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSize {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

/// A timing experiment: fixed cluster count and group, several sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingPlan {
    pub k: usize,
    pub d: usize,
    pub kind: GroupKind,
    pub sizes: Vec<TimingSize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_reps() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub reps: usize,
    pub median_seconds: f64,
}

/// Measures the median solve time per size. Instance generation runs before
/// the clock starts; repetitions run sequentially so they do not contend.
pub fn run_timing(plan: &TimingPlan) -> Result<Vec<TimingRow>> {
    plan.kind.validate()?;
    if plan.kind.dim() != plan.d {
        return Err(invalid(format!(
            "block size {} disagrees with the group dimension {}",
            plan.d,
            plan.kind.dim()
        )));
    }
    if plan.reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if plan.sizes.is_empty() {
        return Err(invalid("sizes must be non-empty"));
    }
    let mut rows = Vec::with_capacity(plan.sizes.len());
    for (si, size) in plan.sizes.iter().enumerate() {
        let params = SgbmParams::new(
            size.n,
            plan.k,
            plan.kind,
            Rates::Logarithmic { alpha: size.alpha, beta: size.beta },
        )?;
        let mut seconds = Vec::with_capacity(plan.reps);
        for rep in 0..plan.reps {
            let seed = trial_seed(plan.base_seed, si, 0, rep);
            let (_, a) = generate(&params, seed)?;
            let started = Instant::now();
            let v0 = build_init(&a, plan.k, InitKind::Spectral, seed)?;
            run_gpm(&a, &v0, plan.kind, &GpmConfig::default())?;
            seconds.push(started.elapsed().as_secs_f64());
        }
        seconds.sort_by(f64::total_cmp);
        let median = if plan.reps % 2 == 1 {
            seconds[plan.reps / 2]
        } else {
            0.5 * (seconds[plan.reps / 2 - 1] + seconds[plan.reps / 2])
        };
        rows.push(TimingRow {
            n: size.n,
            alpha: size.alpha,
            beta: size.beta,
            reps: plan.reps,
            median_seconds: median,
        });
    }
    Ok(rows)
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from("n,alpha,beta,reps,median_seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n, r.alpha, r.beta, r.reps, r.median_seconds
        ));
    }
    out
}

/// Exact recovery threshold for the rates, solved for beta: the curve
/// `sqrt(alpha) - sqrt(beta) = sqrt(K)`, defined for alpha >= K.
pub fn blue_boundary_beta(alpha: f64, k: usize) -> Option<f64> {
    let s = alpha.sqrt() - (k as f64).sqrt();
    if s >= 0.0 {
        Some(s * s)
    } else {
        None
    }
}

const CELL_PX: f64 = 28.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 18.0;
const MARGIN_TOP: f64 = 18.0;
const MARGIN_BOTTOM: f64 = 52.0;
const CURVE_SAMPLES: usize = 256;

/// Position of a value along an axis, in cell units from the axis start.
/// Cell `i` spans `[i, i + 1)` with its grid value at the center; between
/// centers the map is linear, and beyond the end centers it extends with
/// the slope of the nearest segment.
fn axis_units(vals: &[f64], v: f64) -> f64 {
    let last = vals.len() - 1;
    if vals.len() == 1 {
        return 0.5 + (v - vals[0]);
    }
    if v <= vals[0] {
        return 0.5 + (v - vals[0]) / (vals[1] - vals[0]);
    }
    if v >= vals[last] {
        return last as f64 + 0.5 + (v - vals[last]) / (vals[last] - vals[last - 1]);
    }
    let i = vals.partition_point(|&x| x <= v) - 1;
    i as f64 + 0.5 + (v - vals[i]) / (vals[i + 1] - vals[i])
}

/// Inverse of `axis_units`.
fn axis_value(vals: &[f64], u: f64) -> f64 {
    let last = vals.len() - 1;
    if vals.len() == 1 {
        return vals[0] + (u - 0.5);
    }
    if u <= 0.5 {
        return vals[0] + (u - 0.5) * (vals[1] - vals[0]);
    }
    if u >= last as f64 + 0.5 {
        return vals[last] + (u - last as f64 - 0.5) * (vals[last] - vals[last - 1]);
    }
    let i = ((u - 0.5).floor() as usize).min(last - 1);
    vals[i] + (u - 0.5 - i as f64) * (vals[i + 1] - vals[i])
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn curve_points(
    grid: &ExperimentGrid,
    plot_w: f64,
    plot_h: f64,
    beta_of_alpha: impl Fn(f64) -> Option<f64>,
) -> String {
    let na = grid.alpha_values.len() as f64;
    let nb = grid.beta_values.len() as f64;
    let mut points = String::new();
    for s in 0..=CURVE_SAMPLES {
        let ux = s as f64 / CURVE_SAMPLES as f64 * na;
        let alpha = axis_value(&grid.alpha_values, ux);
        let Some(beta) = beta_of_alpha(alpha) else { continue };
        if !beta.is_finite() {
            continue;
        }
        let uy = axis_units(&grid.beta_values, beta);
        if !(0.0..=nb).contains(&uy) {
            continue;
        }
        let x = MARGIN_LEFT + ux / na * plot_w;
        let y = MARGIN_TOP + plot_h - uy / nb * plot_h;
        if !points.is_empty() {
            points.push(' ');
        }
        points.push_str(&format!("{x:.2},{y:.2}"));
    }
    points
}

/// Renders the success-rate grid as a standalone SVG document: one gray
/// square per cell (white is rate 1), the exact recovery curve in blue, the
/// feasibility boundary of the convergence conditions in red, and labeled
/// axes. Alpha runs to the right, beta upward.
pub fn emit_heatmap(grid: &ExperimentGrid, result: &GridResult) -> Result<String> {
    grid.validate()?;
    let na = grid.alpha_values.len();
    let nb = grid.beta_values.len();
    if result.alpha_values != grid.alpha_values
        || result.beta_values != grid.beta_values
        || result.success_rate.len() != na * nb
    {
        return Err(invalid("result does not conform to the grid"));
    }

    let plot_w = na as f64 * CELL_PX;
    let plot_h = nb as f64 * CELL_PX;
    let width = MARGIN_LEFT + plot_w + MARGIN_RIGHT;
    let height = MARGIN_TOP + plot_h + MARGIN_BOTTOM;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n"
    ));

    for ai in 0..na {
        for bi in 0..nb {
            let rate = result.success_rate[result.cell(ai, bi)];
            let g = (255.0 * rate.clamp(0.0, 1.0)).round() as u8;
            let x = MARGIN_LEFT + ai as f64 * CELL_PX;
            let y = MARGIN_TOP + plot_h - (bi + 1) as f64 * CELL_PX;
            svg.push_str(&format!(
                "<rect class=\"cell\" x=\"{x:.2}\" y=\"{y:.2}\" width=\"{CELL_PX}\" \
                 height=\"{CELL_PX}\" fill=\"rgb({g},{g},{g})\"/>\n"
            ));
        }
    }
    svg.push_str(&format!(
        "<rect x=\"{MARGIN_LEFT:.2}\" y=\"{MARGIN_TOP:.2}\" width=\"{plot_w:.2}\" \
         height=\"{plot_h:.2}\" fill=\"none\" stroke=\"black\"/>\n"
    ));

    let x_step = na.div_ceil(12);
    for (ai, v) in grid.alpha_values.iter().enumerate().step_by(x_step) {
        let x = MARGIN_LEFT + (ai as f64 + 0.5) * CELL_PX;
        let y = MARGIN_TOP + plot_h + 14.0;
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"middle\">{}</text>\n",
            xml_escape(&v.to_string())
        ));
    }
    let y_step = nb.div_ceil(12);
    for (bi, v) in grid.beta_values.iter().enumerate().step_by(y_step) {
        let x = MARGIN_LEFT - 6.0;
        let y = MARGIN_TOP + plot_h - (bi as f64 + 0.5) * CELL_PX + 4.0;
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"end\">{}</text>\n",
            xml_escape(&v.to_string())
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">alpha</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        MARGIN_TOP + plot_h + 34.0
    ));
    svg.push_str(&format!(
        "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 {x:.2} {y:.2})\">beta</text>\n",
        x = 16.0,
        y = MARGIN_TOP + plot_h / 2.0
    ));

    let blue = curve_points(grid, plot_w, plot_h, |alpha| blue_boundary_beta(alpha, grid.k));
    if !blue.is_empty() {
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#1f4fd8\" stroke-width=\"2\" points=\"{blue}\"/>\n"
        ));
    }
    let red = curve_points(grid, plot_w, plot_h, |alpha| {
        red_boundary_beta(alpha, grid.k).ok().flatten()
    });
    if !red.is_empty() {
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#d81f1f\" stroke-width=\"2\" points=\"{red}\"/>\n"
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
