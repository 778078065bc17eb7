//! Exact solvers: LP-relaxation branch-and-bound over any formulation, the
//! two-stage (flows first, then delay) pipeline, and an exhaustive oracle for
//! desk-scale instances.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{PlannerError, Result};
use crate::heuristics::{greedy_commit, RankedMappings};
use crate::instance::{check_feasibility, evaluate_unchecked, Plan, ProblemInstance};
use crate::lp::{assemble_lp, Formulation, LpExtras, LpStatus, VarMap, WarmLp};
use crate::topology::{DistanceMatrix, FlowProfile};

/// Resource limits on one branch-and-bound run. `gap` is the relative
/// optimality gap below which the search stops early with status `Optimal`.
#[derive(Debug, Clone)]
pub struct Limits {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
    pub gap: f64,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            time: None,
            nodes: None,
            gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeLimit,
    Infeasible,
}

/// Everything a solve produced, maximization convention throughout (the
/// delay-minimizing stage reports the negated delay).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub best_plan: Plan,
    pub incumbent_value: f64,
    pub best_bound: f64,
    /// (best_bound - incumbent_value) / max(1, |incumbent_value|).
    pub gap: f64,
    pub nodes_explored: u64,
    pub lp_solves: u64,
    pub wall_time: Duration,
}

/// Objective value of an integer plan under a formulation.
fn plan_value(inst: &ProblemInstance, f: Formulation, plan: &Plan) -> f64 {
    let m = evaluate_unchecked(inst, plan);
    match f {
        Formulation::P1 | Formulation::P1Prime => m.flows as f64,
        Formulation::P2 { .. } => -m.sc_delay,
        Formulation::P | Formulation::PPrime => m.flows as f64 - inst.lambda * m.sc_delay,
    }
}

/// A plan is admissible as an incumbent when it is feasible and, for the
/// fixed-flow second stage, hits the flow target exactly.
fn admissible(inst: &ProblemInstance, f: Formulation, plan: &Plan) -> bool {
    match check_feasibility(inst, plan) {
        Ok(v) if v.is_empty() => {}
        _ => return false,
    }
    if let Formulation::P2 { target_flows } = f {
        let flows: u64 = plan.upgraded.iter().map(|&i| inst.flows.0[i]).sum();
        if flows != target_flows {
            return false;
        }
    }
    true
}

struct Node {
    /// Variable bound narrowings (var, lo, hi) accumulated along the path
    /// from the root; binaries are fixed with lo == hi, the aggregate totals
    /// are split into intervals.
    fixings: Vec<(usize, f64, f64)>,
    /// Parent LP bound, a valid upper bound for this node.
    bound: f64,
    id: u64,
}

/// Max-heap ordering: largest bound first, oldest node on ties.
struct OpenNode(Node);

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .bound
            .total_cmp(&other.0.bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

const INT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;

pub fn branch_and_bound(
    inst: &ProblemInstance,
    f: Formulation,
    limits: &Limits,
) -> Result<SolveReport> {
    branch_and_bound_seeded(inst, f, limits, None)
}

/// Branch-and-bound with an optional caller-supplied starting incumbent (the
/// two-stage pipeline hands stage one's plan to stage two).
pub fn branch_and_bound_seeded(
    inst: &ProblemInstance,
    f: Formulation,
    limits: &Limits,
    seed: Option<Plan>,
) -> Result<SolveReport> {
    let start = Instant::now();
    let vm = VarMap::new(inst.n);

    let mut incumbent: Option<(f64, Plan)> = None;
    if let Some(plan) = seed {
        if admissible(inst, f, &plan) {
            let v = plan_value(inst, f, &plan);
            incumbent = Some((v, plan));
        }
    }

    let mut heap: BinaryHeap<OpenNode> = BinaryHeap::new();
    let mut stack: Vec<Node> = Vec::new();
    let mut next_id: u64 = 1;
    let mut nodes_explored: u64 = 0;
    let mut lp_solves: u64 = 0;
    let mut hit_limit = false;

    // One persistent LP per solve: node relaxations differ from the base
    // only in variable bounds, so each node re-solves warm from the previous
    // node's basis.
    let base_lp = assemble_lp(inst, f, &LpExtras::default())?;
    let mut warm = WarmLp::new(&base_lp)?;
    let mut applied: Vec<usize> = Vec::new();

    stack.push(Node {
        fixings: Vec::new(),
        bound: f64::INFINITY,
        id: 0,
    });

    loop {
        let inc_value = incumbent.as_ref().map_or(f64::NEG_INFINITY, |&(v, _)| v);

        // Early stop on the relative gap against the best open bound.
        let open_bound = stack
            .iter()
            .map(|n| n.bound)
            .chain(heap.peek().map(|n| n.0.bound))
            .fold(f64::NEG_INFINITY, f64::max);
        if incumbent.is_some()
            && open_bound.is_finite()
            && (open_bound - inc_value) <= limits.gap * inc_value.abs().max(1.0)
        {
            break;
        }

        let node = match stack.pop().or_else(|| heap.pop().map(|n| n.0)) {
            Some(n) => n,
            None => break,
        };
        if node.bound <= inc_value + PRUNE_TOL {
            continue;
        }
        if let Some(t) = limits.time {
            if start.elapsed() >= t {
                hit_limit = true;
                break;
            }
        }
        if let Some(max) = limits.nodes {
            if nodes_explored >= max {
                hit_limit = true;
                break;
            }
        }

        for &v in &applied {
            let (lo, hi) = base_lp.bounds[v];
            warm.set_var_bounds(v, lo, hi);
        }
        applied.clear();
        for &(v, lo, hi) in &node.fixings {
            warm.set_var_bounds(v, lo, hi);
            applied.push(v);
        }
        let sol = warm.solve()?;
        nodes_explored += 1;
        lp_solves += 1;

        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                return Err(PlannerError::NumericalBreakdown(
                    "relaxation unbounded over the unit box".into(),
                ))
            }
            LpStatus::Optimal => {}
        }
        let bound = if matches!(f, Formulation::P1 | Formulation::P1Prime) {
            // Flow totals are integers, so the relaxation bound rounds down.
            (sol.objective_value + 1e-9).floor()
        } else {
            sol.objective_value
        };
        if bound <= inc_value + PRUNE_TOL {
            continue;
        }

        // Rounding pass on the node relaxation (the MapFirst commit loop
        // ranked by this node's z values).
        let ranked = RankedMappings::from_scores(inst, |i, j| sol.values[vm.z(i, j)]);
        let rounded = greedy_commit(inst, &ranked);
        if admissible(inst, f, &rounded) {
            let v = plan_value(inst, f, &rounded);
            if v > incumbent.as_ref().map_or(f64::NEG_INFINITY, |&(b, _)| b) {
                incumbent = Some((v, rounded));
            }
        }

        // Branch variable: most fractional y, then x, then z.
        let frac = |v: usize| {
            let x = sol.values[v];
            (x - x.round()).abs()
        };
        let pick = |range: std::ops::Range<usize>| {
            range
                .filter(|&v| frac(v) > INT_TOL)
                .max_by(|&a, &b| frac(a).total_cmp(&frac(b)).then_with(|| b.cmp(&a)))
        };
        // The aggregate totals go first: a fractional controller or upgrade
        // total spread over many coordinates is resolved by one split where
        // individual binaries would be branched symmetrically forever.
        let branch_var = pick(vm.num_vars()..vm.num_vars() + 2)
            .or_else(|| pick(inst.n..2 * inst.n))
            .or_else(|| pick(0..inst.n))
            .or_else(|| pick(2 * inst.n..vm.num_vars()));

        match branch_var {
            None => {
                // Integral relaxation: adopt as incumbent.
                let mut plan = Plan::empty();
                for i in 0..inst.n {
                    if sol.values[vm.x(i)] > 0.5 {
                        plan.upgraded.insert(i);
                    }
                    if sol.values[vm.y(i)] > 0.5 {
                        plan.controllers.insert(i);
                    }
                    for j in 0..inst.n {
                        if sol.values[vm.z(i, j)] > 0.5 {
                            plan.mappings.insert((i, j));
                        }
                    }
                }
                if admissible(inst, f, &plan) {
                    let v = plan_value(inst, f, &plan);
                    let cur = incumbent.as_ref().map_or(f64::NEG_INFINITY, |&(b, _)| b);
                    if v > cur {
                        incumbent = Some((v, plan));
                    }
                }
                continue;
            }
            Some(var) => {
                // Reduced-cost fixing: a nonbasic binary whose reduced cost
                // proves the opposite bound cannot beat the incumbent is
                // pinned at its bound in both children.
                let mut fixings = node.fixings;
                let inc_now = incumbent.as_ref().map_or(f64::NEG_INFINITY, |&(v, _)| v);
                let slack = bound - (inc_now + PRUNE_TOL);
                if slack.is_finite() && slack > 0.0 {
                    let mut pinned = vec![false; vm.num_vars()];
                    if var < vm.num_vars() {
                        pinned[var] = true;
                    }
                    for &(v, _, _) in &fixings {
                        if v < vm.num_vars() {
                            pinned[v] = true;
                        }
                    }
                    for v in 0..vm.num_vars() {
                        if pinned[v] {
                            continue;
                        }
                        let (x, d) = (sol.values[v], sol.reduced_costs[v]);
                        if x < INT_TOL && -d >= slack {
                            fixings.push((v, 0.0, 0.0));
                        } else if x > 1.0 - INT_TOL && d >= slack {
                            fixings.push((v, 1.0, 1.0));
                        }
                    }
                }
                let (down_bounds, up_bounds) = if var >= vm.num_vars() {
                    // Aggregate split around the fractional total, narrowed
                    // against any bounds already imposed on this path.
                    let (mut lo, mut hi) = (0.0, inst.n as f64);
                    for &(v, l, h) in &fixings {
                        if v == var {
                            lo = l;
                            hi = h;
                        }
                    }
                    let split = sol.values[var].floor();
                    ((lo, split.min(hi)), ((split + 1.0).max(lo), hi))
                } else {
                    ((0.0, 0.0), (1.0, 1.0))
                };
                let mut up = fixings.clone();
                up.push((var, up_bounds.0, up_bounds.1));
                let mut down = fixings;
                down.push((var, down_bounds.0, down_bounds.1));
                heap.push(OpenNode(Node {
                    fixings: down,
                    bound,
                    id: next_id,
                }));
                next_id += 1;
                // Plunge on the 1-branch.
                stack.push(Node {
                    fixings: up,
                    bound,
                    id: next_id,
                });
                next_id += 1;
            }
        }
    }

    let open_bound = stack
        .iter()
        .map(|n| n.bound)
        .chain(heap.iter().map(|n| n.0.bound))
        .fold(f64::NEG_INFINITY, f64::max);
    let (status, incumbent_value, best_plan) = match incumbent {
        Some((v, plan)) => {
            let status = if hit_limit && open_bound > v + PRUNE_TOL {
                SolveStatus::FeasibleTimeLimit
            } else {
                SolveStatus::Optimal
            };
            (status, v, plan)
        }
        None => (SolveStatus::Infeasible, f64::NEG_INFINITY, Plan::empty()),
    };
    let best_bound = if status == SolveStatus::Optimal {
        incumbent_value
    } else {
        open_bound.max(incumbent_value)
    };
    let gap = if incumbent_value.is_finite() {
        (best_bound - incumbent_value) / incumbent_value.abs().max(1.0)
    } else {
        f64::INFINITY
    };
    Ok(SolveReport {
        status,
        best_plan,
        incumbent_value,
        best_bound,
        gap,
        nodes_explored,
        lp_solves,
        wall_time: start.elapsed(),
    })
}

/// Output of the two-stage pipeline: the flow-maximizing first stage and the
/// delay-minimizing second stage at the fixed flow total.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoStageReport {
    pub stage1: SolveReport,
    pub stage2: SolveReport,
    pub target_flows: u64,
}

impl TwoStageReport {
    pub fn plan(&self) -> &Plan {
        &self.stage2.best_plan
    }

    pub fn flows(&self) -> u64 {
        self.target_flows
    }

    pub fn sc_delay(&self) -> f64 {
        -self.stage2.incumbent_value
    }
}

/// Maximizes flows, then minimizes delay with the flow total pinned by an
/// equality row. Stage one's plan seeds stage two's incumbent.
pub fn two_stage_solve(inst: &ProblemInstance, limits: &Limits) -> Result<TwoStageReport> {
    // The strengthened flow formulation shares P1's integer optimum with a
    // much tighter relaxation.
    let stage1 = branch_and_bound(inst, Formulation::P1Prime, limits)?;
    if stage1.status == SolveStatus::Infeasible {
        return Err(PlannerError::InfeasiblePlan(
            "first stage found no feasible plan".into(),
        ));
    }
    let target_flows = stage1.incumbent_value.round() as u64;
    let stage2 = branch_and_bound_seeded(
        inst,
        Formulation::P2 { target_flows },
        limits,
        Some(stage1.best_plan.clone()),
    )?;
    Ok(TwoStageReport {
        stage1,
        stage2,
        target_flows,
    })
}

/// Which ordering the brute-force oracle optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleObjective {
    /// Maximize flows.
    P1,
    /// Maximize flows - lambda * delay.
    P,
    /// Lexicographic: flows descending, then delay ascending.
    TwoStage,
}

const BRUTE_FORCE_MAX_N: usize = 8;

/// Best feasible (min-delay) assignment of the switch set `upgraded`, with
/// ties broken by the sorted plan encoding. `None` when no feasible
/// assignment exists under capacity and budget.
fn best_assignment(inst: &ProblemInstance, upgraded: &[usize]) -> Option<(f64, Plan)> {
    let n = inst.n;
    let switch_cost = inst.gamma * upgraded.len() as u64;
    if upgraded.is_empty() {
        return Some((0.0, Plan::empty()));
    }
    if switch_cost + 1 > inst.budget {
        return None;
    }

    struct Search<'a> {
        inst: &'a ProblemInstance,
        upgraded: &'a [usize],
        switch_cost: u64,
        load: Vec<u64>,
        used: Vec<bool>,
        used_count: u64,
        assigned: Vec<usize>,
        best: Option<(f64, Plan)>,
    }

    impl Search<'_> {
        fn recurse(&mut self, idx: usize, delay: f64) {
            if let Some((best_delay, _)) = &self.best {
                if delay > best_delay + 1e-12 {
                    return;
                }
            }
            if idx == self.upgraded.len() {
                let mut plan = Plan::empty();
                plan.upgraded = self.upgraded.iter().copied().collect();
                for (k, &i) in self.upgraded.iter().enumerate() {
                    let j = self.assigned[k];
                    plan.controllers.insert(j);
                    plan.mappings.insert((i, j));
                }
                let replace = match &self.best {
                    None => true,
                    Some((best_delay, best_plan)) => {
                        delay < best_delay - 1e-12
                            || ((delay - best_delay).abs() <= 1e-12
                                && (&plan.upgraded, &plan.controllers, &plan.mappings)
                                    < (&best_plan.upgraded, &best_plan.controllers, &best_plan.mappings))
                    }
                };
                if replace {
                    self.best = Some((delay, plan));
                }
                return;
            }
            let i = self.upgraded[idx];
            for j in 0..self.inst.n {
                let r = self.inst.flows.0[i];
                if self.load[j] + r > self.inst.capacity {
                    continue;
                }
                let newly_used = !self.used[j];
                if newly_used && self.switch_cost + self.used_count + 1 > self.inst.budget {
                    continue;
                }
                self.load[j] += r;
                if newly_used {
                    self.used[j] = true;
                    self.used_count += 1;
                }
                self.assigned[idx] = j;
                self.recurse(idx + 1, delay + self.inst.dist.get(i, j));
                self.load[j] -= r;
                if newly_used {
                    self.used[j] = false;
                    self.used_count -= 1;
                }
            }
        }
    }

    let mut search = Search {
        inst,
        upgraded,
        switch_cost,
        load: vec![0; n],
        used: vec![false; n],
        used_count: 0,
        assigned: vec![0; upgraded.len()],
        best: None,
    };
    search.recurse(0, 0.0);
    search.best
}

fn oracle_scan(
    inst: &ProblemInstance,
    mut visit: impl FnMut(u64, f64, &Plan),
) -> Result<()> {
    let n = inst.n;
    if n > BRUTE_FORCE_MAX_N {
        return Err(PlannerError::TooLarge(n));
    }
    for mask in 0u32..(1u32 << n) {
        let upgraded: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        if inst.gamma * upgraded.len() as u64 > inst.budget {
            continue;
        }
        if let Some((delay, plan)) = best_assignment(inst, &upgraded) {
            let flows: u64 = upgraded.iter().map(|&i| inst.flows.0[i]).sum();
            visit(flows, delay, &plan);
        }
    }
    Ok(())
}

/// Exhaustive oracle: exact optimum for N <= 8, with deterministic ties
/// (flows descending, delay ascending, then the sorted plan encoding).
pub fn brute_force(inst: &ProblemInstance, objective: OracleObjective) -> Result<Plan> {
    let mut best: Option<(u64, f64, Plan)> = None;
    oracle_scan(inst, |flows, delay, plan| {
        let replace = match &best {
            None => true,
            Some((bf, bd, bp)) => {
                let cmp = match objective {
                    OracleObjective::P1 => flows.cmp(bf),
                    OracleObjective::TwoStage => {
                        flows.cmp(bf).then_with(|| bd.total_cmp(&delay))
                    }
                    OracleObjective::P => {
                        let v = flows as f64 - inst.lambda * delay;
                        let bv = *bf as f64 - inst.lambda * bd;
                        if v > bv + 1e-12 {
                            Ordering::Greater
                        } else if v < bv - 1e-12 {
                            Ordering::Less
                        } else {
                            Ordering::Equal
                        }
                    }
                };
                match cmp {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => {
                        // Shared tie-break ladder.
                        flows > *bf
                            || (flows == *bf
                                && (delay < bd - 1e-12
                                    || ((delay - bd).abs() <= 1e-12
                                        && (&plan.upgraded, &plan.controllers, &plan.mappings)
                                            < (&bp.upgraded, &bp.controllers, &bp.mappings))))
                    }
                }
            }
        };
        if replace {
            best = Some((flows, delay, plan.clone()));
        }
    })?;
    Ok(best.map(|(_, _, p)| p).unwrap_or_else(Plan::empty))
}

/// Every switch set attaining the maximum flow total with some feasible
/// assignment, in ascending set order.
pub fn enumerate_optimal_upgrade_sets(inst: &ProblemInstance) -> Result<Vec<BTreeSet<usize>>> {
    let mut best_flows = 0u64;
    let mut sets: Vec<BTreeSet<usize>> = Vec::new();
    oracle_scan(inst, |flows, _, plan| {
        if flows > best_flows {
            best_flows = flows;
            sets.clear();
        }
        if flows == best_flows && !sets.contains(&plan.upgraded) {
            sets.push(plan.upgraded.clone());
        }
    })?;
    sets.sort();
    Ok(sets)
}

/// The hardness-reduction instance: N = 3m switches with flow counts `sizes`,
/// capacity B, budget 4m, unit switch cost, zero distances. The optimum fills
/// every controller exactly iff the sizes admit a 3-partition.
pub fn generate_3partition_instance(m: u64, sizes: &[u64], b: u64) -> Result<ProblemInstance> {
    if sizes.len() as u64 != 3 * m {
        return Err(PlannerError::InvalidPartitionData(format!(
            "expected {} sizes, got {}",
            3 * m,
            sizes.len()
        )));
    }
    for (i, &a) in sizes.iter().enumerate() {
        if !(4 * a > b && 2 * a < b) {
            return Err(PlannerError::InvalidPartitionData(format!(
                "size a_{i} = {a} outside the open interval ({}/4, {}/2)",
                b, b
            )));
        }
    }
    let total: u64 = sizes.iter().sum();
    if total != m * b {
        return Err(PlannerError::InvalidPartitionData(format!(
            "sizes sum to {total}, expected m*B = {}",
            m * b
        )));
    }
    ProblemInstance::new(
        FlowProfile(sizes.to_vec()),
        DistanceMatrix::zeros(sizes.len()),
        b,
        4 * m,
        1,
    )
}
