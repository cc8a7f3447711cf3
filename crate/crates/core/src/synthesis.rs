//! Capacity synthesis under a linear budget.
//!
//! The mean network delay is minimized over link capacities subject to
//! `Σ α_e c_e = budget` and `c_e ≥ λ_e (1 + ε)`. The budget is always active
//! at the optimum (delay strictly decreases in every capacity), so the search
//! runs on the budget hyperplane: the steepest-descent direction is the
//! gradient projected onto `{Σ α_e dc_e = 0}`, with edges pinned at their
//! stability floor removed from the projection while the gradient pushes them
//! further down.
//!
//! The classical square-root assignment, which spends the excess budget in
//! proportion to `sqrt(α λ)`, is provided as a baseline and as warm start.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::mlg::MultilayerGraph;
use crate::perf::{
    mean_network_delay, occupancy, occupancy_curvature, occupancy_slope, CapacityAssignment,
    DelayReport, PerfError,
};
use crate::traffic::{aggregate, Demand, LoadSet, TrafficError};
use crate::EdgeId;

/// Linear link cost: an edge of capacity `c` costs `α c`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostModel {
    /// α per edge, cost units per bit/s.
    pub unit_costs: BTreeMap<EdgeId, f64>,
    pub budget: f64,
}

impl CostModel {
    /// Total cost of an assignment. Edges without a unit cost are skipped.
    pub fn cost_of(&self, caps: &CapacityAssignment) -> f64 {
        caps.capacities
            .iter()
            .filter_map(|(e, c)| self.unit_costs.get(e).map(|a| a * c))
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Backtracking {
    /// Step shrink factor β in (0, 1).
    pub shrink: f64,
    /// Armijo constant σ in (0, 1).
    pub sufficient_decrease: f64,
}

impl Default for Backtracking {
    fn default() -> Self {
        Self {
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

/// Norm in which the descent direction is steepest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DescentMetric {
    /// Local curvature of the delay, refreshed every iteration. The delay is a
    /// sum of one-edge terms, so this metric is its exact Hessian and the unit
    /// step lands on the minimizer of the local quadratic model.
    #[default]
    Curvature,
    /// Euclidean norm in capacities divided by edge rates, with
    /// Barzilai-Borwein trial steps. Slow on instances that mix utilizations
    /// and Hurst parameters widely.
    RateScaled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisOptions {
    /// ε: every loaded edge keeps `c ≥ λ (1 + ε)`.
    pub stability_margin: f64,
    /// Relative threshold on the projected-gradient norm.
    pub grad_tolerance: f64,
    /// Relative objective change treated as no progress; the search stops
    /// after a run of such iterations.
    pub objective_tolerance: f64,
    pub max_iterations: usize,
    pub backtracking: Backtracking,
    pub metric: DescentMetric,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            stability_margin: 0.01,
            grad_tolerance: 1e-8,
            objective_tolerance: 1e-12,
            max_iterations: 10_000,
            backtracking: Backtracking::default(),
            metric: DescentMetric::Curvature,
        }
    }
}

impl SynthesisOptions {
    fn check(&self) -> Result<(), SynthesisError> {
        let bad = |what| Err(SynthesisError::InvalidOptions(what));
        if !(self.stability_margin >= 0.0 && self.stability_margin.is_finite()) {
            return bad("stability_margin must be >= 0");
        }
        if !(self.grad_tolerance > 0.0) {
            return bad("grad_tolerance must be > 0");
        }
        if !(self.objective_tolerance >= 0.0) {
            return bad("objective_tolerance must be >= 0");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        let b = self.backtracking;
        if !(b.shrink > 0.0 && b.shrink < 1.0) {
            return bad("backtracking shrink must lie in (0, 1)");
        }
        if !(b.sufficient_decrease > 0.0 && b.sufficient_decrease < 1.0) {
            return bad("backtracking sufficient_decrease must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One accepted iterate of the descent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    /// Mean network delay, seconds.
    pub objective: f64,
    /// Accepted step length (0 for the starting point).
    pub step: f64,
    /// Norm of the projected gradient at the point the step was taken from,
    /// in normalized units (capacities divided by their edge rates, delay by
    /// the starting objective).
    pub projected_gradient_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    pub capacities: CapacityAssignment,
    /// Mean network delay of `capacities`, seconds.
    pub objective: f64,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    /// Priced edges that carry no traffic; they get no capacity and no cost.
    pub unloaded_edges: Vec<EdgeId>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Perf(#[from] PerfError),
    #[error("no traffic: the network carries no demand")]
    NoTraffic,
    #[error("no unit cost for loaded edge {0}")]
    MissingCost(EdgeId),
    #[error("unit cost of edge {edge} must be positive, got {value}")]
    InvalidCost { edge: EdgeId, value: f64 },
    #[error("budget must be positive, got {0}")]
    InvalidBudget(f64),
    #[error("infeasible budget: {budget} does not exceed the minimum required cost {required}")]
    InfeasibleBudget { required: f64, budget: f64 },
    #[error("invalid options: {0}")]
    InvalidOptions(&'static str),
    #[error("line search found no acceptable step after {} iterations", .partial.iterations)]
    LineSearchFailed { partial: Box<SynthesisResult> },
}

impl SynthesisError {
    /// Partial result carried by a numeric failure.
    pub fn partial(&self) -> Option<&SynthesisResult> {
        match self {
            SynthesisError::LineSearchFailed { partial } => Some(partial),
            _ => None,
        }
    }
}

/// Consecutive iterations without progress before the search gives up. An
/// iteration makes progress when the relative objective change reaches
/// `objective_tolerance` or the projected gradient reaches a new minimum; the
/// gradient stays resolvable after the objective stops changing in its last
/// digits.
const STALL_WINDOW: usize = 10;

/// Loaded edges in key order with their parameters.
struct Problem {
    edges: Vec<EdgeId>,
    rates: Vec<f64>,
    hursts: Vec<f64>,
    alphas: Vec<f64>,
    packet_rate: f64,
    budget: f64,
    unloaded: Vec<EdgeId>,
}

impl Problem {
    fn new(loads: &LoadSet, cost: &CostModel) -> Result<Self, SynthesisError> {
        if !(cost.budget > 0.0 && cost.budget.is_finite()) {
            return Err(SynthesisError::InvalidBudget(cost.budget));
        }
        for (edge, &value) in &cost.unit_costs {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SynthesisError::InvalidCost {
                    edge: edge.clone(),
                    value,
                });
            }
        }
        if loads.is_empty() || !(loads.total_packet_rate > 0.0) {
            return Err(SynthesisError::NoTraffic);
        }
        let n = loads.loads.len();
        let mut p = Problem {
            edges: Vec::with_capacity(n),
            rates: Vec::with_capacity(n),
            hursts: Vec::with_capacity(n),
            alphas: Vec::with_capacity(n),
            packet_rate: loads.total_packet_rate,
            budget: cost.budget,
            unloaded: cost
                .unit_costs
                .keys()
                .filter(|e| !loads.loads.contains_key(*e))
                .cloned()
                .collect(),
        };
        for (edge, load) in &loads.loads {
            let alpha = *cost
                .unit_costs
                .get(edge)
                .ok_or_else(|| SynthesisError::MissingCost(edge.clone()))?;
            p.edges.push(edge.clone());
            p.rates.push(load.flow.rate);
            p.hursts.push(load.flow.hurst);
            p.alphas.push(alpha);
        }
        Ok(p)
    }

    /// Square-root rule over floors `floor_e`: spend the budget left after
    /// paying for the floors in proportion to `sqrt(α_e λ_e)`.
    fn square_root(&self, floors: &[f64]) -> Result<Vec<f64>, SynthesisError> {
        let required: f64 = self.alphas.iter().zip(floors).map(|(a, f)| a * f).sum();
        let excess = self.budget - required;
        if !(excess > 0.0) {
            return Err(SynthesisError::InfeasibleBudget {
                required,
                budget: self.budget,
            });
        }
        let weights: Vec<f64> = self
            .alphas
            .iter()
            .zip(&self.rates)
            .map(|(a, l)| libm::sqrt(a * l))
            .collect();
        let total: f64 = weights.iter().sum();
        Ok(floors
            .iter()
            .zip(&self.alphas)
            .zip(&weights)
            .map(|((f, a), w)| f + excess / a * (w / total))
            .collect())
    }

    fn floors(&self, margin: f64) -> Vec<f64> {
        self.rates.iter().map(|l| l * (1.0 + margin)).collect()
    }

    /// Mean network delay; `inf` outside the stable region.
    fn objective(&self, caps: &[f64]) -> f64 {
        let mut total = 0.0;
        for ((l, c), h) in self.rates.iter().zip(caps).zip(&self.hursts) {
            if !(l < c) {
                return f64::INFINITY;
            }
            total += occupancy(l / c, *h);
        }
        total / self.packet_rate
    }

    /// Gradient with respect to `c_e / scale_e`, divided by `f_ref`.
    fn gradient(&self, caps: &[f64], scale: &[f64], f_ref: f64, out: &mut [f64]) {
        for (i, g) in out.iter_mut().enumerate() {
            *g = occupancy_slope(self.rates[i], caps[i], self.hursts[i]) / self.packet_rate
                * scale[i]
                / f_ref;
        }
    }

    fn assignment(&self, caps: &[f64]) -> CapacityAssignment {
        self.edges
            .iter()
            .cloned()
            .zip(caps.iter().copied())
            .collect()
    }

    /// Second derivatives matching [`Problem::gradient`].
    fn curvature(&self, caps: &[f64], scale: &[f64], f_ref: f64, out: &mut [f64]) {
        for (i, d) in out.iter_mut().enumerate() {
            *d = occupancy_curvature(self.rates[i], caps[i], self.hursts[i]) / self.packet_rate
                * scale[i]
                * scale[i]
                / f_ref;
        }
    }

    fn cost(&self, caps: &[f64]) -> f64 {
        self.alphas.iter().zip(caps).map(|(a, c)| a * c).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Classical square-root capacity assignment over the loaded edges.
pub fn square_root_assignment(
    loads: &LoadSet,
    cost: &CostModel,
) -> Result<CapacityAssignment, SynthesisError> {
    let p = Problem::new(loads, cost)?;
    let caps = p.square_root(&p.rates)?;
    Ok(p.assignment(&caps))
}

/// Square-root assignment computed on rates inflated by the stability margin.
/// Strictly feasible and budget-tight.
pub fn initial_point(
    loads: &LoadSet,
    cost: &CostModel,
    opts: &SynthesisOptions,
) -> Result<CapacityAssignment, SynthesisError> {
    opts.check()?;
    let p = Problem::new(loads, cost)?;
    let caps = p.square_root(&p.floors(opts.stability_margin))?;
    Ok(p.assignment(&caps))
}

/// Aggregates demands onto the graph and synthesizes capacities.
pub fn synthesize(
    graph: &MultilayerGraph,
    demands: &[Demand],
    cost: &CostModel,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult, SynthesisError> {
    let loads = aggregate(graph, demands)?;
    synthesize_loads(&loads, cost, opts)
}

/// Minimizes the mean network delay for already aggregated loads.
pub fn synthesize_loads(
    loads: &LoadSet,
    cost: &CostModel,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult, SynthesisError> {
    opts.check()?;
    let p = Problem::new(loads, cost)?;
    let floors = p.floors(opts.stability_margin);

    let mut caps = p.square_root(&floors)?;
    let mut f = p.objective(&caps);
    // The plain square-root point is an equally valid start when it clears
    // the margin; starting from the better of the two makes the result never
    // worse than the baseline.
    if let Ok(plain) = p.square_root(&p.rates) {
        if plain.iter().zip(&floors).all(|(c, lo)| c >= lo) {
            let fp = p.objective(&plain);
            if fp < f {
                caps = plain;
                f = fp;
            }
        }
    }

    let n = caps.len();
    // Descent runs in x_e = c_e / λ_e (inverse utilization) with the delay
    // divided by its starting value. Each edge term then depends on x_e and H_e
    // alone, whatever the rate magnitudes; the budget normal becomes α_e λ_e.
    let scale = &p.rates;
    let f_start = f;
    let normal: Vec<f64> = p.alphas.iter().zip(scale).map(|(a, s)| a * s).collect();
    let normal_sq = dot(&normal, &normal);

    let mut grad = alloc::vec![0.0; n];
    let mut dir = alloc::vec![0.0; n];
    let mut free = alloc::vec![true; n];
    let mut next = alloc::vec![0.0; n];
    let mut next_grad = alloc::vec![0.0; n];
    let mut curv = alloc::vec![0.0; n];
    p.gradient(&caps, scale, f_start, &mut grad);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut bb_step: Option<f64> = None;
    let mut stalled = 0;
    let mut best_pg = f64::INFINITY;
    let bt = opts.backtracking;

    let pg0 = project(
        &normal, normal_sq, &caps, &floors, &grad, &mut free, &mut dir,
    );
    trace.push(TraceEntry {
        objective: f,
        step: 0.0,
        projected_gradient_norm: pg0,
    });

    loop {
        let pg = project(
            &normal, normal_sq, &caps, &floors, &grad, &mut free, &mut dir,
        );
        let gnorm = libm::sqrt(dot(&grad, &grad));
        if pg <= opts.grad_tolerance * gnorm.max(1.0) {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }

        let (trial, slope) = match opts.metric {
            DescentMetric::Curvature => {
                p.curvature(&caps, scale, f_start, &mut curv);
                let slope =
                    project_scaled(&normal, &curv, &caps, &floors, &grad, &mut free, &mut dir);
                (1.0, slope)
            }
            DescentMetric::RateScaled => (bb_step.unwrap_or(1.0 / pg), pg * pg),
        };
        // Longest step that keeps every capacity on or above its floor.
        let mut max_step = f64::INFINITY;
        for i in 0..n {
            if dir[i] < 0.0 {
                max_step = max_step.min((caps[i] - floors[i]) / (scale[i] * -dir[i]));
            }
        }
        let mut step = trial.min(max_step);
        let mut accepted = None;
        for _ in 0..200 {
            for i in 0..n {
                next[i] = (caps[i] + scale[i] * step * dir[i]).max(floors[i]);
            }
            let fn_ = p.objective(&next);
            let decrease = bt.sufficient_decrease * step * slope * f_start;
            let armijo = fn_ <= f - decrease;
            // Near the optimum the predicted decrease drops below the
            // resolution of f; a non-increasing step is then accepted.
            let rounding = decrease <= 4.0 * f64::EPSILON * f && fn_ <= f;
            if armijo || rounding {
                accepted = Some(fn_);
                break;
            }
            step *= bt.shrink;
        }
        let Some(f_next) = accepted else {
            let partial = SynthesisResult {
                capacities: p.assignment(&caps),
                objective: f,
                cost: p.cost(&caps),
                converged: false,
                iterations,
                trace,
                unloaded_edges: p.unloaded.clone(),
            };
            return Err(SynthesisError::LineSearchFailed {
                partial: Box::new(partial),
            });
        };

        iterations += 1;
        p.gradient(&next, scale, f_start, &mut next_grad);
        // Barzilai-Borwein length for the next trial step.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = (next[i] - caps[i]) / scale[i];
            ss += s * s;
            sy += s * (next_grad[i] - grad[i]);
        }
        bb_step = (sy > 0.0 && ss > 0.0).then(|| ss / sy);

        let moved = next != caps;
        let change = (f - f_next) / f;
        core::mem::swap(&mut caps, &mut next);
        core::mem::swap(&mut grad, &mut next_grad);
        f = f_next;
        trace.push(TraceEntry {
            objective: f,
            step,
            projected_gradient_norm: pg,
        });

        if change >= opts.objective_tolerance || pg < best_pg {
            stalled = 0;
        } else {
            stalled += 1;
        }
        best_pg = best_pg.min(pg);
        if !moved || stalled >= STALL_WINDOW {
            let pg = project(
                &normal, normal_sq, &caps, &floors, &grad, &mut free, &mut dir,
            );
            let gnorm = libm::sqrt(dot(&grad, &grad));
            converged = pg <= opts.grad_tolerance * gnorm.max(1.0);
            break;
        }
    }

    let capacities = p.assignment(&caps);
    let objective = mean_network_delay(loads, &capacities)?.mean_delay;
    Ok(SynthesisResult {
        cost: p.cost(&caps),
        capacities,
        objective,
        converged,
        iterations,
        trace,
        unloaded_edges: p.unloaded,
    })
}

/// Writes the negative gradient projected onto the budget hyperplane into
/// `dir`, with edges that sit on their floor and would be pushed below it held
/// fixed. Returns the norm of the projection.
fn project(
    normal: &[f64],
    normal_sq: f64,
    caps: &[f64],
    floors: &[f64],
    grad: &[f64],
    free: &mut [bool],
    dir: &mut [f64],
) -> f64 {
    free.iter_mut().for_each(|f| *f = true);
    let mut norm_sq = normal_sq;
    loop {
        let mut ag = 0.0;
        for i in 0..grad.len() {
            if free[i] {
                ag += normal[i] * grad[i];
            }
        }
        let mu = if norm_sq > 0.0 { ag / norm_sq } else { 0.0 };
        let mut changed = false;
        for i in 0..grad.len() {
            dir[i] = if free[i] {
                -(grad[i] - mu * normal[i])
            } else {
                0.0
            };
            if free[i] && dir[i] < 0.0 && caps[i] <= floors[i] * (1.0 + 1e-12) {
                free[i] = false;
                norm_sq -= normal[i] * normal[i];
                changed = true;
            }
        }
        if !changed {
            return libm::sqrt(dot(dir, dir));
        }
    }
}

/// Like [`project`], but steepest in the norm weighted by `curv`: the
/// direction minimizes the local quadratic model on the hyperplane. Returns
/// the predicted first-order decrease `−grad·dir`.
fn project_scaled(
    normal: &[f64],
    curv: &[f64],
    caps: &[f64],
    floors: &[f64],
    grad: &[f64],
    free: &mut [bool],
    dir: &mut [f64],
) -> f64 {
    free.iter_mut().for_each(|f| *f = true);
    loop {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..grad.len() {
            if free[i] {
                num += normal[i] * grad[i] / curv[i];
                den += normal[i] * normal[i] / curv[i];
            }
        }
        let mu = if den > 0.0 { num / den } else { 0.0 };
        let mut changed = false;
        for i in 0..grad.len() {
            dir[i] = if free[i] {
                -(grad[i] - mu * normal[i]) / curv[i]
            } else {
                0.0
            };
            if free[i] && dir[i] < 0.0 && caps[i] <= floors[i] * (1.0 + 1e-12) {
                free[i] = false;
                changed = true;
            }
        }
        if !changed {
            return -dot(grad, dir);
        }
    }
}

/// Gradient solution and square-root baseline evaluated on the same loads.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub gradient: SynthesisResult,
    pub gradient_report: DelayReport,
    pub square_root: CapacityAssignment,
    pub square_root_report: DelayReport,
    /// `(T_sqrt − T_gradient) / T_sqrt`.
    pub improvement: f64,
}

pub fn compare_methods(
    graph: &MultilayerGraph,
    demands: &[Demand],
    cost: &CostModel,
    opts: &SynthesisOptions,
) -> Result<Comparison, SynthesisError> {
    let loads = aggregate(graph, demands)?;
    compare_methods_on_loads(&loads, cost, opts)
}

pub fn compare_methods_on_loads(
    loads: &LoadSet,
    cost: &CostModel,
    opts: &SynthesisOptions,
) -> Result<Comparison, SynthesisError> {
    let gradient = synthesize_loads(loads, cost, opts)?;
    let square_root = square_root_assignment(loads, cost)?;
    let gradient_report = mean_network_delay(loads, &gradient.capacities)?;
    let square_root_report = mean_network_delay(loads, &square_root)?;
    let improvement = (square_root_report.mean_delay - gradient_report.mean_delay)
        / square_root_report.mean_delay;
    Ok(Comparison {
        gradient,
        gradient_report,
        square_root,
        square_root_report,
        improvement,
    })
}
