//! Rounding heuristics: MapFirst (LP-relaxation-ranked mapping commit),
//! the WeightFirst greedy baseline, and the exact single-switch-per-controller
//! special case solved through the k-cardinality assignment relaxation.

use crate::error::{PlannerError, Result};
use crate::instance::{Plan, ProblemInstance};
use crate::lp::{assemble_lp, solve_lp, Formulation, LpExtras, LpProblem, LpRow, LpStatus, Relation, VarMap};

/// All N^2 switch-controller pairs ordered by descending score, ties broken
/// by descending omega weight, then ascending (i, j).
#[derive(Debug, Clone)]
pub struct RankedMappings {
    pub entries: Vec<(usize, usize, f64)>,
}

impl RankedMappings {
    /// Ranks every pair with an arbitrary score source.
    pub fn from_scores(inst: &ProblemInstance, score: impl Fn(usize, usize) -> f64) -> RankedMappings {
        let n = inst.n;
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push((i, j, score(i, j)));
            }
        }
        entries.sort_by(|a, b| {
            b.2.total_cmp(&a.2)
                .then_with(|| inst.omega(b.0, b.1).total_cmp(&inst.omega(a.0, a.1)))
                .then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
        });
        RankedMappings { entries }
    }
}

/// The scan-and-commit loop shared by MapFirst and WeightFirst: walk the
/// ranked pairs, skip already-upgraded switches, test capacity, then commit
/// when the remaining budget covers the switch (and the controller when it is
/// not deployed yet); stop once the remaining budget is below one switch.
pub fn greedy_commit(inst: &ProblemInstance, ranked: &RankedMappings) -> Plan {
    let mut plan = Plan::empty();
    let mut load = vec![0u64; inst.n];
    let gamma = inst.gamma;
    let budget = inst.budget;
    for &(i, j, _) in &ranked.entries {
        if !plan.upgraded.contains(&i) {
            let cost = plan.cost(gamma);
            if load[j] + inst.flows.0[i] <= inst.capacity {
                if plan.controllers.contains(&j) {
                    if cost + gamma <= budget {
                        plan.upgraded.insert(i);
                        plan.mappings.insert((i, j));
                        load[j] += inst.flows.0[i];
                    }
                } else if cost + gamma + 1 <= budget {
                    plan.controllers.insert(j);
                    plan.upgraded.insert(i);
                    plan.mappings.insert((i, j));
                    load[j] += inst.flows.0[i];
                }
            }
        }
        if budget < plan.cost(gamma) + gamma {
            break;
        }
    }
    plan
}

/// True when no controller can ever serve two switches (R_i + R_j > A for
/// all i != j) while each switch alone still fits (0 < R_i <= A).
fn single_switch_regime(inst: &ProblemInstance) -> bool {
    let r = &inst.flows.0;
    let fits = r.iter().all(|&ri| ri > 0 && ri <= inst.capacity);
    fits
        && (0..inst.n).all(|i| {
            (i + 1..inst.n).all(|j| r[i] + r[j] > inst.capacity)
        })
}

/// MapFirst: rank pairs by the LP-relaxation values of the strengthened
/// one-stage formulation, then commit greedily. Feasible by construction.
/// When every controller can serve at most one switch the mapping problem
/// collapses to a k-cardinality assignment whose relaxation is integral, so
/// the heuristic returns the exact optimum in that regime.
pub fn mapfirst(inst: &ProblemInstance) -> Result<Plan> {
    if single_switch_regime(inst) {
        return single_switch_exact(inst);
    }
    let lp = assemble_lp(inst, Formulation::PPrime, &LpExtras::default())?;
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(PlannerError::NumericalBreakdown(format!(
            "relaxation not optimal: {:?}",
            sol.status
        )));
    }
    let vm = VarMap::new(inst.n);
    let ranked = RankedMappings::from_scores(inst, |i, j| sol.values[vm.z(i, j)]);
    Ok(greedy_commit(inst, &ranked))
}

/// WeightFirst baseline: identical commit loop, but ranked directly by the
/// omega weights, with no LP solve.
pub fn weightfirst(inst: &ProblemInstance) -> Plan {
    let ranked = RankedMappings::from_scores(inst, |i, j| inst.omega(i, j));
    greedy_commit(inst, &ranked)
}

/// Exact solver for the special case where every controller can serve at
/// most one switch (R_i + R_j > A for all i != j, 0 < R_i <= A). Selects
/// k = min(floor(M / (gamma+1)), N) disjoint pairs maximizing total omega via
/// the assignment LP, whose basic optimum is integral.
pub fn single_switch_exact(inst: &ProblemInstance) -> Result<Plan> {
    let n = inst.n;
    for i in 0..n {
        let r = inst.flows.0[i];
        if r == 0 || r > inst.capacity {
            return Err(PlannerError::PreconditionViolated(format!(
                "switch {i} needs 0 < R_i <= A, got R_i = {r}"
            )));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if inst.flows.0[i] + inst.flows.0[j] <= inst.capacity {
                return Err(PlannerError::PreconditionViolated(format!(
                    "R_{i} + R_{j} = {} does not exceed A = {}",
                    inst.flows.0[i] + inst.flows.0[j],
                    inst.capacity
                )));
            }
        }
    }

    let k = (inst.budget / (inst.gamma + 1)).min(n as u64);
    if k == 0 {
        return Ok(Plan::empty());
    }

    let mut lp = LpProblem::new(n * n);
    let z = |i: usize, j: usize| i * n + j;
    for i in 0..n {
        for j in 0..n {
            lp.objective[z(i, j)] = inst.omega(i, j);
        }
    }
    for i in 0..n {
        lp.rows.push(LpRow {
            coeffs: (0..n).map(|j| (z(i, j), 1.0)).collect(),
            relation: Relation::Le,
            rhs: 1.0,
        });
    }
    for j in 0..n {
        lp.rows.push(LpRow {
            coeffs: (0..n).map(|i| (z(i, j), 1.0)).collect(),
            relation: Relation::Le,
            rhs: 1.0,
        });
    }
    lp.rows.push(LpRow {
        coeffs: (0..n * n).map(|v| (v, 1.0)).collect(),
        relation: Relation::Eq,
        rhs: k as f64,
    });

    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(PlannerError::NumericalBreakdown(format!(
            "assignment relaxation not optimal: {:?}",
            sol.status
        )));
    }
    let integral = sol.values.iter().all(|&v| v.abs().min((v - 1.0).abs()) < 1e-7);
    if !integral {
        // The assignment polytope is integral, so a basic optimum should
        // never land here; fall back to the exact search if it does.
        return crate::solver::branch_and_bound(inst, Formulation::PPrime, &Default::default())
            .map(|r| r.best_plan);
    }

    let mut plan = Plan::empty();
    for i in 0..n {
        for j in 0..n {
            if sol.values[z(i, j)] > 0.5 {
                plan.upgraded.insert(i);
                plan.controllers.insert(j);
                plan.mappings.insert((i, j));
            }
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{check_feasibility, evaluate, ProblemInstance};
    use crate::topology::{DistanceMatrix, FlowProfile};

    fn instance(flows: Vec<u64>, capacity: u64, budget: u64, gamma: u64) -> ProblemInstance {
        let n = flows.len();
        let dist = DistanceMatrix::from_upper_triangle(n, |i, j| ((i * 3 + j * 5) % 7) as f64 + 1.0);
        ProblemInstance::new(FlowProfile(flows), dist, capacity, budget, gamma).unwrap()
    }

    #[test]
    fn budget_below_one_pair_yields_empty_plan() {
        let inst = instance(vec![2, 3, 4], 6, 3, 3); // gamma + 1 = 4 > M = 3
        let plan = mapfirst(&inst).unwrap();
        assert!(plan.is_empty());
        assert!(weightfirst(&inst).is_empty());
    }

    #[test]
    fn commit_loop_respects_capacity_and_budget() {
        // Fig. 2 walkthrough shape: ranked z(s4,c4) > z(s5,c4) > z(s6,c6) >
        // z(s5,c6) with A=6 and the motivation-example flows. The capacity
        // test must reject (s5,c4) and accept the rest.
        let flows = vec![2, 3, 2, 5, 3, 3];
        let n = flows.len();
        let inst =
            ProblemInstance::new(FlowProfile(flows), DistanceMatrix::zeros(n), 6, 12, 3).unwrap();
        let order = [(3usize, 3usize), (4, 3), (5, 5), (4, 5)];
        let score = |i: usize, j: usize| {
            order
                .iter()
                .position(|&p| p == (i, j))
                .map(|pos| 10.0 - pos as f64)
                .unwrap_or(0.0)
        };
        let ranked = RankedMappings::from_scores(&inst, score);
        let plan = greedy_commit(&inst, &ranked);
        assert!(plan.mappings.contains(&(3, 3)));
        assert!(!plan.mappings.contains(&(4, 3)), "capacity must reject (s5,c4)");
        assert!(plan.mappings.contains(&(5, 5)));
        assert!(plan.mappings.contains(&(4, 5)));
        assert!(check_feasibility(&inst, &plan).unwrap().is_empty());
    }

    #[test]
    fn weightfirst_starts_at_the_largest_flow_colocated() {
        let inst = instance(vec![2, 3, 2, 5, 3, 3], 6, 12, 3);
        let ranked = RankedMappings::from_scores(&inst, |i, j| inst.omega(i, j));
        // Max omega is R_i at D_ij = 0, i.e. the co-located pair of the
        // largest-flow switch.
        assert_eq!(ranked.entries[0].0, 3);
        assert_eq!(ranked.entries[0].1, 3);
    }

    #[test]
    fn uniform_scores_fall_back_to_tie_break_order() {
        let n = 3;
        let inst = ProblemInstance::new(
            FlowProfile(vec![2, 2, 2]),
            DistanceMatrix::zeros(n),
            4,
            9,
            2,
        )
        .unwrap();
        let ranked = RankedMappings::from_scores(&inst, |_, _| 1.0);
        // Equal scores and equal omegas: ascending (i, j).
        let pairs: Vec<(usize, usize)> = ranked.entries.iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(pairs[0], (0, 0));
        assert_eq!(pairs.last().copied().unwrap(), (2, 2));
    }

    #[test]
    fn heuristic_plans_are_feasible() {
        for budget in 1..14 {
            let inst = instance(vec![4, 1, 3, 5, 2], 6, budget, 2);
            let mf = mapfirst(&inst).unwrap();
            assert!(check_feasibility(&inst, &mf).unwrap().is_empty());
            let wf = weightfirst(&inst);
            assert!(check_feasibility(&inst, &wf).unwrap().is_empty());
        }
    }

    #[test]
    fn single_switch_exact_rejects_bad_preconditions() {
        let inst = instance(vec![2, 3, 4], 6, 8, 1); // 2 + 3 <= 6
        assert!(matches!(
            single_switch_exact(&inst),
            Err(PlannerError::PreconditionViolated(_))
        ));
    }

    #[test]
    fn single_switch_exact_upgrades_everything_when_budget_allows() {
        // k >= N with zero distances: every switch upgraded, co-located
        // controllers optimal.
        let n = 3;
        let inst = ProblemInstance::new(
            FlowProfile(vec![4, 5, 6]),
            DistanceMatrix::zeros(n),
            6,
            12,
            1,
        )
        .unwrap();
        let plan = single_switch_exact(&inst).unwrap();
        assert_eq!(plan.upgraded.len(), 3);
        let metrics = evaluate(&inst, &plan).unwrap();
        assert_eq!(metrics.flows, 15);
    }
}
