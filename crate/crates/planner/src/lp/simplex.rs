//! Bounded-variable revised simplex with a dense LU basis, product-form eta
//! updates, two-phase start via artificial variables, Dantzig pricing and a
//! Bland's-rule fallback once stalling is detected.
//!
//! Identical inputs produce bitwise-identical outputs: every choice (pricing,
//! ratio-test tie-breaks, phase-1 pivot-outs) is resolved deterministically.

use super::lu::BasisLu;
use super::{LpProblem, Relation};
use crate::error::{PlannerError, Result};

const DUAL_TOL: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-7;
const RATIO_TOL: f64 = 1e-9;
const PIVOT_MIN: f64 = 1e-11;
const DEGENERATE_STEP: f64 = 1e-10;
const REFACTOR_EVERY: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// An optimal basic solution with its certificate (row duals and structural
/// reduced costs), or an infeasible/unbounded verdict.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
}

impl LpSolution {
    /// Re-checks the certificate against the problem: primal row feasibility
    /// within `FEAS_TOL` and weak duality. Returns the certified dual
    /// objective value.
    pub fn verify_certificate(&self, p: &LpProblem) -> std::result::Result<f64, String> {
        if self.status != LpStatus::Optimal {
            return Err("no certificate for a non-optimal solution".into());
        }
        for (r, row) in p.rows.iter().enumerate() {
            let lhs: f64 = row.coeffs.iter().map(|&(v, c)| c * self.values[v]).sum();
            let ok = match row.relation {
                Relation::Le => lhs <= row.rhs + FEAS_TOL,
                Relation::Ge => lhs >= row.rhs - FEAS_TOL,
                Relation::Eq => (lhs - row.rhs).abs() <= FEAS_TOL,
            };
            if !ok {
                return Err(format!("row {r} violated: lhs {lhs} vs rhs {}", row.rhs));
            }
        }
        for (v, &(lo, hi)) in p.bounds.iter().enumerate() {
            if self.values[v] < lo - FEAS_TOL || self.values[v] > hi + FEAS_TOL {
                return Err(format!("variable {v} out of bounds"));
            }
        }
        // Dual objective: sum_r y_r * rhs_r + contributions of bounds at
        // which reduced costs park the variables.
        let mut dual_obj: f64 = p
            .rows
            .iter()
            .zip(&self.duals)
            .map(|(row, y)| y * row.rhs)
            .sum();
        for (v, &(lo, hi)) in p.bounds.iter().enumerate() {
            let d = self.reduced_costs[v];
            if d > DUAL_TOL {
                dual_obj += d * hi;
            } else if d < -DUAL_TOL {
                dual_obj += d * lo;
            }
        }
        if dual_obj + 1e-6 < self.objective_value {
            return Err(format!(
                "weak duality violated: dual {dual_obj} < primal {}",
                self.objective_value
            ));
        }
        Ok(dual_obj)
    }
}

fn validate_problem(p: &LpProblem) -> Result<()> {
    for &c in &p.objective {
        if !c.is_finite() {
            return Err(PlannerError::InvalidFormulation(
                "non-finite objective coefficient".into(),
            ));
        }
    }
    for row in &p.rows {
        for &(v, c) in &row.coeffs {
            if v >= p.num_vars || !c.is_finite() {
                return Err(PlannerError::InvalidFormulation(
                    "bad constraint coefficient".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Solves a maximization LP. Deterministic for identical inputs.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let mut warm = WarmLp::new(p)?;
    warm.solve()
}

/// A reusable solver for a sequence of LPs sharing rows and objective and
/// differing only in variable bounds (branch-and-bound node relaxations).
///
/// The first solve runs the cold two-phase primal simplex; later solves keep
/// the previous optimal basis, restore primal feasibility with the dual
/// simplex after the bound changes, then polish with the primal — usually a
/// handful of pivots and no basis refactorization. Any numerical trouble
/// falls back to the cold path, so results match [`solve_lp`] verdicts.
pub struct WarmLp<'a> {
    s: Simplex<'a>,
    /// Whether the held basis is valid (artificial-free, factorized).
    clean: bool,
}

impl<'a> WarmLp<'a> {
    pub fn new(p: &'a LpProblem) -> Result<WarmLp<'a>> {
        validate_problem(p)?;
        Ok(WarmLp {
            s: Simplex::new(p),
            clean: false,
        })
    }

    /// Overrides one structural variable's bounds for subsequent solves.
    pub fn set_var_bounds(&mut self, v: usize, lo: f64, hi: f64) {
        assert!(v < self.s.n_struct);
        self.s.lo[v] = lo;
        self.s.hi[v] = hi;
        if self.s.var_row[v].is_none() {
            if self.s.at_upper[v] && !hi.is_finite() {
                self.s.at_upper[v] = false;
            }
            if !self.s.at_upper[v] && !lo.is_finite() {
                self.s.at_upper[v] = true;
            }
        }
    }

    pub fn solve(&mut self) -> Result<LpSolution> {
        self.s.iterations = 0;
        self.s.bland = false;
        self.s.stalled = 0;
        if self.clean {
            match self.try_warm() {
                Ok(Some(sol)) => return Ok(sol),
                // Dual gave up: resolve cold from a fresh basis.
                Ok(None) => self.clean = false,
                // Numerical trouble (singular refactorization, vanishing
                // pivot, stall guard): the held basis is suspect, so discard
                // it and resolve cold rather than surfacing the error.
                Err(PlannerError::NumericalBreakdown(_)) => self.clean = false,
                Err(e) => return Err(e),
            }
        }
        self.s.reset_for_cold();
        let sol = self.s.solve()?;
        if sol.status == LpStatus::Optimal {
            self.s.normalize_basis()?;
            self.clean = true;
        }
        Ok(sol)
    }

    /// Warm-start attempt from the held optimal basis. `Ok(None)` means the
    /// dual simplex gave up and the caller should resolve cold.
    fn try_warm(&mut self) -> Result<Option<LpSolution>> {
        self.s.cost = vec![0.0; self.s.num_vars()];
        self.s.cost[..self.s.n_struct].copy_from_slice(&self.s.p.objective);
        self.s.recompute_xb();
        match self.s.dual_optimize()? {
            DualResult::Feasible => {
                let status = match self.s.optimize()? {
                    LoopResult::Optimal => LpStatus::Optimal,
                    LoopResult::Unbounded => LpStatus::Unbounded,
                };
                if status != LpStatus::Optimal {
                    self.clean = false;
                }
                Ok(Some(self.s.finish(status)))
            }
            // The exit basis stays dual feasible, so keep it.
            DualResult::Infeasible => Ok(Some(self.s.infeasible_solution())),
            DualResult::GiveUp => Ok(None),
        }
    }
}

struct Eta {
    row: usize,
    pivot: f64,
    /// Off-pivot entries of the transformed entering column.
    entries: Vec<(usize, f64)>,
}

struct Simplex<'a> {
    p: &'a LpProblem,
    m: usize,
    n_struct: usize,
    /// Total variables: structural, then slacks, then phase-1 artificials.
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    var_row: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    xb: Vec<f64>,
    lu: Option<BasisLu>,
    etas: Vec<Eta>,
    artificial_start: usize,
    bland: bool,
    stalled: usize,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem) -> Simplex<'a> {
        let m = p.rows.len();
        let n_struct = p.num_vars;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct + m];
        for (r, row) in p.rows.iter().enumerate() {
            for &(v, c) in &row.coeffs {
                if c != 0.0 {
                    cols[v].push((r, c));
                }
            }
        }
        let mut lo = p.bounds.iter().map(|b| b.0).collect::<Vec<_>>();
        let mut hi = p.bounds.iter().map(|b| b.1).collect::<Vec<_>>();
        let mut rhs = Vec::with_capacity(m);
        for (r, row) in p.rows.iter().enumerate() {
            cols[n_struct + r].push((r, 1.0));
            let (sl, sh) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Eq => (0.0, 0.0),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lo.push(sl);
            hi.push(sh);
            rhs.push(row.rhs);
        }
        Simplex {
            p,
            m,
            n_struct,
            cols,
            lo,
            hi,
            cost: Vec::new(),
            rhs,
            basis: Vec::new(),
            var_row: Vec::new(),
            at_upper: Vec::new(),
            xb: Vec::new(),
            lu: None,
            etas: Vec::new(),
            artificial_start: n_struct + m,
            bland: false,
            stalled: 0,
            iterations: 0,
        }
    }

    fn num_vars(&self) -> usize {
        self.cols.len()
    }

    fn nonbasic_value(&self, v: usize) -> f64 {
        if self.at_upper[v] {
            self.hi[v]
        } else {
            self.lo[v]
        }
    }

    fn solve(&mut self) -> Result<LpSolution> {
        self.build_initial_basis();
        self.refactor()?;

        let had_artificials = self.num_vars() > self.artificial_start;
        if had_artificials {
            // Phase 1: maximize minus the sum of artificials.
            self.cost = vec![0.0; self.num_vars()];
            for v in self.artificial_start..self.num_vars() {
                self.cost[v] = -1.0;
            }
            match self.optimize()? {
                LoopResult::Optimal => {}
                LoopResult::Unbounded => {
                    return Err(PlannerError::NumericalBreakdown(
                        "phase 1 reported unbounded".into(),
                    ))
                }
            }
            let infeasibility: f64 = (self.artificial_start..self.num_vars())
                .map(|v| self.value_of(v))
                .sum();
            if infeasibility > FEAS_TOL * self.m.max(1) as f64 {
                return Ok(self.infeasible_solution());
            }
            self.pivot_out_artificials()?;
            for v in self.artificial_start..self.num_vars() {
                self.lo[v] = 0.0;
                self.hi[v] = 0.0;
            }
            self.bland = false;
            self.stalled = 0;
        }

        // Phase 2: the real objective.
        self.cost = vec![0.0; self.num_vars()];
        self.cost[..self.n_struct].copy_from_slice(&self.p.objective);
        let status = match self.optimize()? {
            LoopResult::Optimal => LpStatus::Optimal,
            LoopResult::Unbounded => LpStatus::Unbounded,
        };
        Ok(self.finish(status))
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        let values: Vec<f64> = (0..self.n_struct).map(|v| self.value_of(v)).collect();
        let objective_value = self
            .p
            .objective
            .iter()
            .zip(&values)
            .map(|(c, v)| c * v)
            .sum();
        let mut duals = self.cost_btran();
        duals.truncate(self.m);
        let reduced_costs: Vec<f64> = (0..self.n_struct)
            .map(|v| self.cost[v] - sparse_dot(&self.cols[v], &duals))
            .collect();
        LpSolution {
            values,
            objective_value,
            status,
            duals,
            reduced_costs,
        }
    }

    /// Drops artificial columns from any previous cold solve so a fresh one
    /// can append its own.
    fn reset_for_cold(&mut self) {
        let k = self.artificial_start;
        self.cols.truncate(k);
        self.lo.truncate(k);
        self.hi.truncate(k);
        if self.at_upper.len() > k {
            self.at_upper.truncate(k);
        }
        if self.var_row.len() > k {
            self.var_row.truncate(k);
        }
    }

    /// After a cold solve: replace any leftover basic artificial (possible
    /// only on a redundant row) by that row's slack, which spans the same
    /// unit direction, then drop the artificial columns and refactorize so
    /// the basis can seed warm solves.
    fn normalize_basis(&mut self) -> Result<()> {
        for r in 0..self.m {
            if self.basis[r] >= self.artificial_start {
                let art = self.basis[r];
                self.var_row[art] = None;
                let slack = self.n_struct + r;
                debug_assert!(self.var_row[slack].is_none());
                self.basis[r] = slack;
                self.var_row[slack] = Some(r);
                self.at_upper[slack] = false;
            }
        }
        self.reset_for_cold();
        self.refactor()
    }

    fn recompute_xb(&mut self) {
        let mut rhs_eff = self.rhs.clone();
        for v in 0..self.num_vars() {
            if self.var_row[v].is_none() {
                let val = self.nonbasic_value(v);
                if val != 0.0 {
                    for &(r, c) in &self.cols[v] {
                        rhs_eff[r] -= c * val;
                    }
                }
            }
        }
        self.lu.as_ref().unwrap().solve(&mut rhs_eff);
        // The factorization predates the eta updates; apply them like ftran.
        for eta in &self.etas {
            let t = rhs_eff[eta.row] / eta.pivot;
            if t != 0.0 {
                for &(i, w) in &eta.entries {
                    rhs_eff[i] -= w * t;
                }
            }
            rhs_eff[eta.row] = t;
        }
        self.xb = rhs_eff;
    }

    /// Bounded-variable dual simplex: drives basic variables back inside
    /// their bounds while keeping reduced-cost feasibility.
    fn dual_optimize(&mut self) -> Result<DualResult> {
        let max_iterations = 2_000 + 10 * self.m;
        // Duals are maintained across pivots (y += gamma * rho) and recomputed
        // from scratch at each refactorization to bound drift.
        let mut y = self.cost_btran();
        for _ in 0..max_iterations {
            self.iterations += 1;
            if self.etas.len() >= REFACTOR_EVERY {
                self.refactor()?;
                y = self.cost_btran();
            }

            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64, f64)> = None; // (row, violation, target)
            for r in 0..self.m {
                let vb = self.basis[r];
                let (lo, hi) = (self.lo[vb], self.hi[vb]);
                let x = self.xb[r];
                let (viol, target) = if x < lo - FEAS_TOL {
                    (lo - x, lo)
                } else if x > hi + FEAS_TOL {
                    (x - hi, hi)
                } else {
                    continue;
                };
                match leave {
                    Some((_, best, _)) if viol <= best => {}
                    _ => leave = Some((r, viol, target)),
                }
            }
            let Some((r_leave, _, target)) = leave else {
                return Ok(DualResult::Feasible);
            };

            let mut e_r = vec![0.0; self.m];
            e_r[r_leave] = 1.0;
            let rho = self.btran(e_r);

            // Direction the basic value must move.
            let delta_r: f64 = if self.xb[r_leave] < target { 1.0 } else { -1.0 };

            // Admissible entering candidates with their dual ratios.
            let mut candidates: Vec<(usize, f64, f64)> = Vec::new(); // (var, ratio, alpha_tilde)
            for v in 0..self.num_vars() {
                if self.var_row[v].is_some() || self.lo[v] == self.hi[v] {
                    continue;
                }
                let alpha = sparse_dot(&self.cols[v], &rho);
                let alpha_tilde = delta_r * alpha;
                let admissible = if self.at_upper[v] {
                    alpha_tilde > RATIO_TOL
                } else {
                    alpha_tilde < -RATIO_TOL
                };
                if !admissible {
                    continue;
                }
                let d = self.cost[v] - sparse_dot(&self.cols[v], &y);
                let ratio = (d / alpha_tilde).max(0.0);
                candidates.push((v, ratio, alpha_tilde));
            }
            if candidates.is_empty() {
                // No column can repair this row: primal infeasible.
                return Ok(DualResult::Infeasible);
            }
            candidates.sort_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then(b.2.abs().total_cmp(&a.2.abs()))
                    .then(a.0.cmp(&b.0))
            });

            // Bound-flipping ratio test: walk the breakpoints in dual-ratio
            // order; candidates whose full [lo, hi] range cannot absorb the
            // remaining row violation are flipped to their opposite bound
            // (their reduced cost changes sign at a smaller dual step), and
            // the first candidate that can absorb it enters the basis.
            let violation = (target - self.xb[r_leave]).abs();
            let mut slope = violation;
            let mut q = candidates[0].0;
            let mut flips: Vec<usize> = Vec::new();
            for (idx, &(v, _, alpha_tilde)) in candidates.iter().enumerate() {
                q = v;
                let range = self.hi[v] - self.lo[v];
                if !range.is_finite() || idx + 1 == candidates.len() {
                    break;
                }
                let absorbed = alpha_tilde.abs() * range;
                if slope - absorbed <= RATIO_TOL * violation.max(1.0) {
                    break;
                }
                slope -= absorbed;
                flips.push(v);
            }

            if !flips.is_empty() {
                // One batched ftran updates the basic values for all flips.
                let mut dense = vec![0.0; self.m];
                for &f in &flips {
                    let range = self.hi[f] - self.lo[f];
                    let step = if self.at_upper[f] { -range } else { range };
                    for &(r, c) in &self.cols[f] {
                        dense[r] += c * step;
                    }
                    self.at_upper[f] = !self.at_upper[f];
                }
                let acc: Vec<(usize, f64)> = dense
                    .iter()
                    .enumerate()
                    .filter(|&(_, &c)| c != 0.0)
                    .map(|(r, &c)| (r, c))
                    .collect();
                let dxb = self.ftran(&acc);
                for r in 0..self.m {
                    self.xb[r] -= dxb[r];
                }
            }

            let w = self.ftran(&self.cols[q]);
            let alpha = w[r_leave];
            if alpha.abs() < PIVOT_MIN {
                return Ok(DualResult::GiveUp);
            }
            let d_q = self.cost[q] - sparse_dot(&self.cols[q], &y);
            let sigma = if self.at_upper[q] { -1.0 } else { 1.0 };
            // xb[r] moves by -sigma * alpha * t; reach `target`.
            let t = (target - self.xb[r_leave]) / (-sigma * alpha);
            if !t.is_finite() || t < -FEAS_TOL {
                return Ok(DualResult::GiveUp);
            }
            let t = t.max(0.0);
            let entering_value = self.nonbasic_value(q) + sigma * t;
            for r in 0..self.m {
                self.xb[r] -= sigma * w[r] * t;
            }
            let leaving_var = self.basis[r_leave];
            self.var_row[leaving_var] = None;
            self.at_upper[leaving_var] = target == self.hi[leaving_var] && self.hi[leaving_var] != self.lo[leaving_var];
            self.basis[r_leave] = q;
            self.var_row[q] = Some(r_leave);
            self.xb[r_leave] = entering_value;
            self.push_eta(&w, r_leave);
            // Dual update: the entering variable's reduced cost becomes zero.
            let gamma = d_q / alpha;
            for i in 0..self.m {
                y[i] += gamma * rho[i];
            }
        }
        Ok(DualResult::GiveUp)
    }

    fn infeasible_solution(&self) -> LpSolution {
        LpSolution {
            values: vec![0.0; self.n_struct],
            objective_value: f64::NEG_INFINITY,
            status: LpStatus::Infeasible,
            duals: vec![0.0; self.m],
            reduced_costs: vec![0.0; self.n_struct],
        }
    }

    fn value_of(&self, v: usize) -> f64 {
        match self.var_row[v] {
            Some(r) => self.xb[r],
            None => self.nonbasic_value(v),
        }
    }

    /// Slack basis where feasible; rows whose slack cannot absorb the
    /// residual get an artificial variable instead.
    fn build_initial_basis(&mut self) {
        let nv = self.num_vars();
        self.at_upper = vec![false; nv];
        for v in 0..nv {
            if !self.lo[v].is_finite() {
                self.at_upper[v] = true;
            }
        }
        self.var_row = vec![None; nv];
        self.basis = Vec::with_capacity(self.m);
        self.xb = Vec::with_capacity(self.m);

        // Row residuals with every structural variable at its bound.
        let mut residual = self.rhs.clone();
        for v in 0..self.n_struct {
            let val = self.nonbasic_value(v);
            if val != 0.0 {
                for &(r, c) in &self.cols[v] {
                    residual[r] -= c * val;
                }
            }
        }
        for r in 0..self.m {
            let slack = self.n_struct + r;
            let (sl, sh) = (self.lo[slack], self.hi[slack]);
            let rho = residual[r];
            if rho >= sl - FEAS_TOL && rho <= sh + FEAS_TOL {
                self.basis.push(slack);
                self.var_row[slack] = Some(self.basis.len() - 1);
                self.xb.push(rho.clamp(sl.max(f64::NEG_INFINITY), sh.min(f64::INFINITY)));
            } else {
                // Park the slack at the nearest bound; an artificial with the
                // right sign carries the remaining residual.
                let parked = if rho < sl { sl } else { sh };
                self.at_upper[slack] = parked == sh && sh != sl;
                let remaining = rho - parked;
                let art = self.num_vars();
                self.cols.push(vec![(r, remaining.signum())]);
                self.lo.push(0.0);
                self.hi.push(f64::INFINITY);
                self.at_upper.push(false);
                self.var_row.push(Some(r));
                self.basis.push(art);
                self.xb.push(remaining.abs());
            }
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let lu = BasisLu::factor(
            self.m,
            self.basis.iter().map(|&v| self.cols[v].clone()),
        )
        .ok_or_else(|| PlannerError::NumericalBreakdown("singular basis".into()))?;
        self.lu = Some(lu);
        self.etas.clear();
        // Recompute basic values from scratch for accuracy.
        let mut rhs_eff = self.rhs.clone();
        for v in 0..self.num_vars() {
            if self.var_row[v].is_none() {
                let val = self.nonbasic_value(v);
                if val != 0.0 {
                    for &(r, c) in &self.cols[v] {
                        rhs_eff[r] -= c * val;
                    }
                }
            }
        }
        self.lu.as_ref().unwrap().solve(&mut rhs_eff);
        self.xb = rhs_eff;
        Ok(())
    }

    fn ftran(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let mut x = vec![0.0; self.m];
        for &(r, c) in col {
            x[r] = c;
        }
        self.lu.as_ref().unwrap().solve(&mut x);
        for eta in &self.etas {
            let t = x[eta.row] / eta.pivot;
            if t != 0.0 {
                for &(i, w) in &eta.entries {
                    x[i] -= w * t;
                }
            }
            x[eta.row] = t;
        }
        x
    }

    fn btran(&self, mut y: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut dot = 0.0;
            for &(i, w) in &eta.entries {
                dot += y[i] * w;
            }
            y[eta.row] = (y[eta.row] - dot) / eta.pivot;
        }
        self.lu.as_ref().unwrap().solve_transpose(&mut y);
        y
    }

    fn cost_btran(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&v| self.cost[v]).collect();
        self.btran(cb)
    }

    fn optimize(&mut self) -> Result<LoopResult> {
        let max_iterations = 20_000 + 50 * (self.m + self.num_vars());
        let stall_limit = 5 * (self.m + self.num_vars());
        loop {
            self.iterations += 1;
            if self.iterations > max_iterations {
                return Err(PlannerError::NumericalBreakdown(
                    "simplex iteration limit exceeded".into(),
                ));
            }
            if self.etas.len() >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.cost_btran();

            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            for v in 0..self.num_vars() {
                if self.var_row[v].is_some() || self.lo[v] == self.hi[v] {
                    continue;
                }
                let d = self.cost[v] - sparse_dot(&self.cols[v], &y);
                let eligible = if self.at_upper[v] { d < -DUAL_TOL } else { d > DUAL_TOL };
                if !eligible {
                    continue;
                }
                if self.bland {
                    entering = Some((v, d));
                    break;
                }
                match entering {
                    Some((_, best)) if d.abs() <= best.abs() => {}
                    _ => entering = Some((v, d)),
                }
            }
            let Some((q, _)) = entering else {
                return Ok(LoopResult::Optimal);
            };

            let w = self.ftran(&self.cols[q]);
            let sigma = if self.at_upper[q] { -1.0 } else { 1.0 };

            // Ratio test: smallest blocking step, ties to the largest pivot.
            let mut t_block = f64::INFINITY;
            let mut leaving: Option<(usize, bool)> = None; // (row, leaves at upper bound)
            for r in 0..self.m {
                let g = -sigma * w[r];
                if g.abs() <= RATIO_TOL {
                    continue;
                }
                let vb = self.basis[r];
                let (bound, to_upper) = if g < 0.0 {
                    (self.lo[vb], false)
                } else {
                    (self.hi[vb], true)
                };
                if !bound.is_finite() {
                    continue;
                }
                let t = ((bound - self.xb[r]) / g).max(0.0);
                let replace = match leaving {
                    None => true,
                    Some((r_best, _)) => {
                        t < t_block - 1e-12
                            || (t <= t_block + 1e-12 && w[r].abs() > w[r_best].abs())
                    }
                };
                if replace {
                    t_block = t.min(t_block);
                    leaving = Some((r, to_upper));
                }
            }
            let t_flip = self.hi[q] - self.lo[q]; // may be infinite

            if t_flip <= t_block {
                if !t_flip.is_finite() {
                    return Ok(LoopResult::Unbounded);
                }
                // Bound flip, basis unchanged.
                for r in 0..self.m {
                    self.xb[r] -= sigma * w[r] * t_flip;
                }
                self.at_upper[q] = !self.at_upper[q];
                continue;
            }
            let Some((r_leave, to_upper)) = leaving else {
                return Ok(LoopResult::Unbounded);
            };
            if w[r_leave].abs() < PIVOT_MIN {
                return Err(PlannerError::NumericalBreakdown(format!(
                    "pivot magnitude {} below threshold",
                    w[r_leave].abs()
                )));
            }

            let t = t_block;
            let entering_value = self.nonbasic_value(q) + sigma * t;
            for r in 0..self.m {
                self.xb[r] -= sigma * w[r] * t;
            }
            let leaving_var = self.basis[r_leave];
            self.var_row[leaving_var] = None;
            self.at_upper[leaving_var] = to_upper;
            self.basis[r_leave] = q;
            self.var_row[q] = Some(r_leave);
            self.xb[r_leave] = entering_value;
            self.push_eta(&w, r_leave);

            if t <= DEGENERATE_STEP {
                self.stalled += 1;
                if self.stalled > stall_limit {
                    self.bland = true;
                }
            } else {
                self.stalled = 0;
            }
        }
    }

    fn push_eta(&mut self, w: &[f64], row: usize) {
        let entries: Vec<(usize, f64)> = w
            .iter()
            .enumerate()
            .filter(|&(i, &v)| i != row && v.abs() > 1e-13)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            row,
            pivot: w[row],
            entries,
        });
    }

    /// Replaces basic artificials (all at value ~0 after phase 1) with
    /// eligible real columns via degenerate pivots; rows where no real column
    /// has a nonzero transformed entry are redundant and keep their
    /// artificial pinned at zero.
    fn pivot_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.m {
            if self.basis[r] < self.artificial_start {
                continue;
            }
            let mut e_r = vec![0.0; self.m];
            e_r[r] = 1.0;
            let row_vec = self.btran(e_r);
            let mut candidate = None;
            for v in 0..self.artificial_start {
                if self.var_row[v].is_some() {
                    continue;
                }
                let alpha = sparse_dot(&self.cols[v], &row_vec);
                if alpha.abs() > 1e-7 {
                    candidate = Some(v);
                    break;
                }
            }
            let Some(v) = candidate else { continue };
            let w = self.ftran(&self.cols[v]);
            if w[r].abs() < 1e-9 {
                continue;
            }
            let art = self.basis[r];
            self.var_row[art] = None;
            self.at_upper[art] = false;
            self.basis[r] = v;
            self.var_row[v] = Some(r);
            self.xb[r] = self.nonbasic_value(v);
            self.push_eta(&w, r);
        }
        Ok(())
    }
}

enum LoopResult {
    Optimal,
    Unbounded,
}

enum DualResult {
    /// Primal feasibility restored.
    Feasible,
    /// A row proves no feasible point exists.
    Infeasible,
    /// Numerical trouble or too many pivots; use the cold start.
    GiveUp,
}

fn sparse_dot(col: &[(usize, f64)], dense: &[f64]) -> f64 {
    col.iter().map(|&(r, c)| c * dense[r]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LpProblem, LpRow, Relation};
    use approx::assert_abs_diff_eq;

    fn row(coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> LpRow {
        LpRow {
            coeffs,
            relation,
            rhs,
        }
    }

    #[test]
    fn single_variable_capped_by_row() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.rows.push(row(vec![(0, 1.0)], Relation::Le, 0.5));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 0.5, epsilon = 1e-9);
        s.verify_certificate(&p).unwrap();
    }

    #[test]
    fn bound_constrained_optimum() {
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, 1.0];
        p.rows.push(row(vec![(0, 1.0), (1, 1.0)], Relation::Le, 3.0));
        let s = solve_lp(&p).unwrap();
        assert_abs_diff_eq!(s.objective_value, 2.0, epsilon = 1e-9);
        s.verify_certificate(&p).unwrap();
    }

    #[test]
    fn equality_row_forces_phase_one() {
        let mut p = LpProblem::new(2);
        p.objective = vec![3.0, 1.0];
        p.rows.push(row(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 1.2));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.values[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.values[1], 0.2, epsilon = 1e-9);
        s.verify_certificate(&p).unwrap();
    }

    #[test]
    fn infeasible_equality_detected() {
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, 0.0];
        p.rows.push(row(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 3.0));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn ge_rows_are_honored() {
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, -2.0];
        p.rows.push(row(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 1.0));
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.values[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn unbounded_detected() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.bounds[0] = (0.0, f64::INFINITY);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn determinism_bitwise() {
        let mut p = LpProblem::new(4);
        p.objective = vec![2.0, 1.0, 3.0, 1.5];
        p.rows.push(row(
            vec![(0, 1.0), (1, 2.0), (2, 1.0), (3, 1.0)],
            Relation::Le,
            2.5,
        ));
        p.rows.push(row(vec![(0, 1.0), (2, -1.0)], Relation::Ge, -0.5));
        p.rows.push(row(vec![(1, 1.0), (3, 1.0)], Relation::Eq, 0.75));
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.duals, b.duals);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    }
}
