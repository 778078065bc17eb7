//! Problem instances, plans, feasibility checking and plan scoring.
//!
//! An instance carries the tuple (N, R, D, A, M, gamma, lambda, omega): flow
//! counts per switch, the propagation-delay matrix, the per-controller
//! processing capacity, the upgrade budget, the switch/controller cost ratio,
//! the scalarization weight combining the two objectives, and the per-mapping
//! weights omega[i][j] = R[i] - lambda * D[i][j].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{PlannerError, Result};
use crate::topology::{distance_matrix, estimate_flows, DistanceMatrix, FlowProfile, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub n: usize,
    pub flows: FlowProfile,
    pub dist: DistanceMatrix,
    /// A: processing capacity of one controller.
    pub capacity: u64,
    /// M: total upgrade budget in controller-cost units.
    pub budget: u64,
    /// gamma: cost of one switch upgrade in controller-cost units.
    pub gamma: u64,
    pub lambda: f64,
    /// omega[i * n + j] = flows[i] - lambda * dist[i][j].
    pub omega: Vec<f64>,
}

/// Scalarization weight: the midpoint factor 0.5 of the open interval
/// 0 < lambda < g / sum_i max_j d[i][j], where g is the gcd of the nonzero
/// flow counts. With every distance zero any positive lambda works and 1.0 is
/// returned.
pub fn compute_lambda(flows: &FlowProfile, dist: &DistanceMatrix) -> Result<f64> {
    let g = flows
        .0
        .iter()
        .copied()
        .filter(|&r| r > 0)
        .fold(0u64, gcd);
    if g == 0 {
        return Err(PlannerError::AllFlowsZero);
    }
    let denom = dist.sum_of_row_maxima();
    if denom == 0.0 {
        Ok(1.0)
    } else {
        Ok(0.5 * g as f64 / denom)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl ProblemInstance {
    /// Assembles an instance from raw parts, deriving lambda and omega.
    pub fn new(
        flows: FlowProfile,
        dist: DistanceMatrix,
        capacity: u64,
        budget: u64,
        gamma: u64,
    ) -> Result<ProblemInstance> {
        if flows.len() != dist.n() {
            return Err(PlannerError::MalformedInput(format!(
                "flow profile length {} does not match distance matrix size {}",
                flows.len(),
                dist.n()
            )));
        }
        if capacity == 0 {
            return Err(PlannerError::MalformedInput("capacity must be positive".into()));
        }
        if gamma == 0 {
            return Err(PlannerError::MalformedInput("gamma must be at least 1".into()));
        }
        let lambda = compute_lambda(&flows, &dist)?;
        let n = flows.len();
        let mut omega = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                omega[i * n + j] = flows.0[i] as f64 - lambda * dist.get(i, j);
            }
        }
        Ok(ProblemInstance {
            n,
            flows,
            dist,
            capacity,
            budget,
            gamma,
            lambda,
            omega,
        })
    }

    /// Builds an instance from a topology with the budget expressed as a
    /// fraction of the cost of upgrading every switch: M = floor(m_percent *
    /// gamma * N).
    pub fn from_topology(
        t: &Topology,
        m_percent: f64,
        capacity: u64,
        gamma: u64,
    ) -> Result<ProblemInstance> {
        let dist = distance_matrix(t)?;
        Self::from_topology_with_distances(t, dist, m_percent, capacity, gamma)
    }

    /// Same as [`ProblemInstance::from_topology`] but with a caller-supplied
    /// distance matrix (e.g. the hop-count fallback).
    pub fn from_topology_with_distances(
        t: &Topology,
        dist: DistanceMatrix,
        m_percent: f64,
        capacity: u64,
        gamma: u64,
    ) -> Result<ProblemInstance> {
        if !(m_percent > 0.0 && m_percent <= 1.0) {
            return Err(PlannerError::MalformedInput(format!(
                "m_percent must lie in (0, 1], got {m_percent}"
            )));
        }
        let flows = estimate_flows(t);
        let budget = (m_percent * gamma as f64 * t.num_nodes() as f64).floor() as u64;
        Self::new(flows, dist, capacity, budget, gamma)
    }

    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.omega[i * self.n + j]
    }
}

/// A binary decision triple: which switches to upgrade, where to deploy
/// controllers, and the switch-to-controller mappings. Sets are ordered so
/// serialization is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Plan {
    pub upgraded: BTreeSet<usize>,
    pub controllers: BTreeSet<usize>,
    pub mappings: BTreeSet<(usize, usize)>,
}

impl Plan {
    pub fn empty() -> Plan {
        Plan::default()
    }

    pub fn is_empty(&self) -> bool {
        self.upgraded.is_empty() && self.controllers.is_empty() && self.mappings.is_empty()
    }

    /// gamma * |upgraded| + |controllers|.
    pub fn cost(&self, gamma: u64) -> u64 {
        gamma * self.upgraded.len() as u64 + self.controllers.len() as u64
    }
}

/// One violated constraint of the formulation, identified by its constraint
/// number (1)-(6).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// (1) z_ij <= x_i: mapped switch not upgraded.
    MappingWithoutUpgrade { switch: usize, controller: usize },
    /// (2) z_ij <= y_j: mapping to an undeployed controller.
    MappingWithoutController { switch: usize, controller: usize },
    /// (3) x_i = sum_j z_ij: upgraded switch without exactly one mapping.
    MappingCountMismatch { switch: usize, mappings: usize },
    /// (4) y_j <= sum_i z_ij: deployed controller with no switch.
    IdleController { controller: usize },
    /// (5) sum_i R_i z_ij <= A: controller over capacity.
    CapacityExceeded { controller: usize, load: u64 },
    /// (6) gamma * |X| + |Y| <= M: budget exceeded.
    BudgetExceeded { cost: u64 },
}

impl Violation {
    pub fn constraint_id(&self) -> u8 {
        match self {
            Violation::MappingWithoutUpgrade { .. } => 1,
            Violation::MappingWithoutController { .. } => 2,
            Violation::MappingCountMismatch { .. } => 3,
            Violation::IdleController { .. } => 4,
            Violation::CapacityExceeded { .. } => 5,
            Violation::BudgetExceeded { .. } => 6,
        }
    }
}

/// Checks constraints (1)-(6) exactly (integer arithmetic, no tolerance) and
/// returns every violation. An empty list means feasible.
pub fn check_feasibility(inst: &ProblemInstance, plan: &Plan) -> Result<Vec<Violation>> {
    let n = inst.n;
    let in_range = |&i: &usize| i < n;
    for &i in plan.upgraded.iter().chain(plan.controllers.iter()) {
        if !in_range(&i) {
            return Err(PlannerError::IndexOutOfRange { index: i, n });
        }
    }
    for &(i, j) in &plan.mappings {
        if !in_range(&i) {
            return Err(PlannerError::IndexOutOfRange { index: i, n });
        }
        if !in_range(&j) {
            return Err(PlannerError::IndexOutOfRange { index: j, n });
        }
    }

    let mut violations = Vec::new();
    let mut mapping_count = vec![0usize; n];
    let mut load = vec![0u64; n];
    for &(i, j) in &plan.mappings {
        if !plan.upgraded.contains(&i) {
            violations.push(Violation::MappingWithoutUpgrade {
                switch: i,
                controller: j,
            });
        }
        if !plan.controllers.contains(&j) {
            violations.push(Violation::MappingWithoutController {
                switch: i,
                controller: j,
            });
        }
        mapping_count[i] += 1;
        load[j] += inst.flows.0[i];
    }
    for i in 0..n {
        let expected = usize::from(plan.upgraded.contains(&i));
        if mapping_count[i] != expected {
            violations.push(Violation::MappingCountMismatch {
                switch: i,
                mappings: mapping_count[i],
            });
        }
    }
    for &j in &plan.controllers {
        if !plan.mappings.iter().any(|&(_, c)| c == j) {
            violations.push(Violation::IdleController { controller: j });
        }
    }
    for (j, &l) in load.iter().enumerate() {
        if l > inst.capacity {
            violations.push(Violation::CapacityExceeded { controller: j, load: l });
        }
    }
    let cost = plan.cost(inst.gamma);
    if cost > inst.budget {
        violations.push(Violation::BudgetExceeded { cost });
    }
    Ok(violations)
}

/// All the quantities the evaluation figures are built from, recomputable
/// from (instance, plan).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    /// obj1 = sum_i R_i x_i.
    pub flows: u64,
    /// obj2 = sum_ij D_ij z_ij, kilometers.
    pub sc_delay: f64,
    /// Sum of pairwise distances among deployed controllers, kilometers.
    pub cc_delay: f64,
    pub n_switches: usize,
    pub n_controllers: usize,
    /// n_switches / n_controllers, 0 if no controllers.
    pub ratio: f64,
    pub cost: u64,
    /// obj1 - lambda * obj2.
    pub combined: f64,
}

/// Scores a feasible plan. Infeasible plans are rejected.
pub fn evaluate(inst: &ProblemInstance, plan: &Plan) -> Result<PlanMetrics> {
    let violations = check_feasibility(inst, plan)?;
    if !violations.is_empty() {
        return Err(PlannerError::InfeasiblePlan(format!(
            "{} violated constraint(s), first: {:?}",
            violations.len(),
            violations[0]
        )));
    }
    Ok(evaluate_unchecked(inst, plan))
}

/// Scores a plan without the feasibility gate; used on plans that are
/// feasible by construction.
pub fn evaluate_unchecked(inst: &ProblemInstance, plan: &Plan) -> PlanMetrics {
    let flows: u64 = plan.upgraded.iter().map(|&i| inst.flows.0[i]).sum();
    let sc_delay: f64 = plan.mappings.iter().map(|&(i, j)| inst.dist.get(i, j)).sum();
    let controllers: Vec<usize> = plan.controllers.iter().copied().collect();
    let mut cc_delay = 0.0;
    for (a, &j1) in controllers.iter().enumerate() {
        for &j2 in &controllers[a + 1..] {
            cc_delay += inst.dist.get(j1, j2);
        }
    }
    let n_switches = plan.upgraded.len();
    let n_controllers = plan.controllers.len();
    PlanMetrics {
        flows,
        sc_delay,
        cc_delay,
        n_switches,
        n_controllers,
        ratio: if n_controllers == 0 {
            0.0
        } else {
            n_switches as f64 / n_controllers as f64
        },
        cost: plan.cost(inst.gamma),
        combined: flows as f64 - inst.lambda * sc_delay,
    }
}
