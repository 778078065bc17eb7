//! Linear programming layer: formulation assembly and a self-contained
//! bounded-variable revised simplex solver with an optimality certificate.
//!
//! The same LP engine serves three callers: the relaxation ranking inside
//! MapFirst, the node bounds of branch-and-bound, and the k-cardinality
//! assignment special case.

mod lu;
mod simplex;

pub use simplex::{solve_lp, LpSolution, LpStatus, WarmLp};

use crate::error::{PlannerError, Result};
use crate::instance::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A maximization LP with per-variable bounds.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn new(num_vars: usize) -> LpProblem {
        LpProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            bounds: vec![(0.0, 1.0); num_vars],
        }
    }

    /// Narrows a variable's bounds, used for branch-and-bound fixings.
    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    /// Dump in the fixed-form LP text interchange format, for cross-checking
    /// against external solvers during development.
    pub fn write_lp_format(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "Maximize")?;
        write!(w, " obj:")?;
        for (v, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(w, " {} {} v{}", if c < 0.0 { "-" } else { "+" }, c.abs(), v)?;
            }
        }
        writeln!(w, "\nSubject To")?;
        for (r, row) in self.rows.iter().enumerate() {
            write!(w, " r{}:", r)?;
            for &(v, c) in &row.coeffs {
                write!(w, " {} {} v{}", if c < 0.0 { "-" } else { "+" }, c.abs(), v)?;
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            writeln!(w, " {} {}", rel, row.rhs)?;
        }
        writeln!(w, "Bounds")?;
        for (v, &(lo, hi)) in self.bounds.iter().enumerate() {
            writeln!(w, " {} <= v{} <= {}", lo, v, hi)?;
        }
        writeln!(w, "End")
    }
}

/// Which integer program to relax/solve.
///
/// `P1` maximizes programmable flows alone; `P2` minimizes delay at a fixed
/// flow total; `P` combines both objectives with lambda; `PPrime` is `P`
/// rewritten over the mapping weights with the strengthened capacity rows and
/// the two aggregated valid inequalities. `P1Prime` applies the same
/// strengthening to `P1` for faster two-stage solving.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Formulation {
    P1,
    P1Prime,
    P2 { target_flows: u64 },
    P,
    PPrime,
}

impl Formulation {
    pub fn strengthened(&self) -> bool {
        matches!(self, Formulation::P1Prime | Formulation::PPrime)
    }
}

/// Maps the decision variables x(i), y(j), z(i,j) onto a flat index space of
/// size N^2 + 2N.
#[derive(Debug, Clone, Copy)]
pub struct VarMap {
    pub n: usize,
}

impl VarMap {
    pub fn new(n: usize) -> VarMap {
        VarMap { n }
    }

    pub fn num_vars(&self) -> usize {
        self.n * self.n + 2 * self.n
    }

    pub fn x(&self, i: usize) -> usize {
        i
    }

    pub fn y(&self, j: usize) -> usize {
        self.n + j
    }

    pub fn z(&self, i: usize, j: usize) -> usize {
        2 * self.n + i * self.n + j
    }

    /// Inverse of [`VarMap::z`], valid for var >= 2n.
    pub fn z_pair(&self, var: usize) -> (usize, usize) {
        let off = var - 2 * self.n;
        (off / self.n, off % self.n)
    }

    /// Auxiliary total-upgrades variable (equal to sum_i x_i), appended
    /// after the binaries so the search can branch on the aggregate.
    pub fn sum_x(&self) -> usize {
        self.num_vars()
    }

    /// Auxiliary total-controllers variable (equal to sum_j y_j).
    pub fn sum_y(&self) -> usize {
        self.num_vars() + 1
    }
}

/// Extra restrictions layered onto a formulation: narrowed variable bounds
/// (branch-and-bound fixings) and additional rows.
#[derive(Debug, Clone, Default)]
pub struct LpExtras {
    pub bounds: Vec<(usize, f64, f64)>,
    pub rows: Vec<LpRow>,
}

/// Builds the LP relaxation of the chosen formulation over N^2 + 2N
/// variables, all bounded to [0,1].
pub fn assemble_lp(
    inst: &ProblemInstance,
    formulation: Formulation,
    extra: &LpExtras,
) -> Result<LpProblem> {
    let n = inst.n;
    if n == 0 {
        return Err(PlannerError::InvalidFormulation("empty instance".into()));
    }
    let vm = VarMap::new(n);
    // Two extra variables hold the upgrade and controller totals.
    let mut lp = LpProblem::new(vm.num_vars() + 2);

    // Objective.
    match formulation {
        Formulation::P1 | Formulation::P1Prime => {
            for i in 0..n {
                lp.objective[vm.x(i)] = inst.flows.0[i] as f64;
            }
        }
        Formulation::P2 { .. } => {
            for i in 0..n {
                for j in 0..n {
                    lp.objective[vm.z(i, j)] = -inst.dist.get(i, j);
                }
            }
        }
        Formulation::P => {
            for i in 0..n {
                lp.objective[vm.x(i)] = inst.flows.0[i] as f64;
                for j in 0..n {
                    lp.objective[vm.z(i, j)] = -inst.lambda * inst.dist.get(i, j);
                }
            }
        }
        Formulation::PPrime => {
            for i in 0..n {
                for j in 0..n {
                    lp.objective[vm.z(i, j)] = inst.omega(i, j);
                }
            }
        }
    }

    // (2) z_ij <= y_j.
    for i in 0..n {
        for j in 0..n {
            lp.rows.push(LpRow {
                coeffs: vec![(vm.z(i, j), 1.0), (vm.y(j), -1.0)],
                relation: Relation::Le,
                rhs: 0.0,
            });
        }
    }
    // (3) x_i = sum_j z_ij.
    for i in 0..n {
        let mut coeffs = vec![(vm.x(i), 1.0)];
        coeffs.extend((0..n).map(|j| (vm.z(i, j), -1.0)));
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Eq,
            rhs: 0.0,
        });
    }
    // (4) y_j <= sum_i z_ij.
    for j in 0..n {
        let mut coeffs = vec![(vm.y(j), 1.0)];
        coeffs.extend((0..n).map(|i| (vm.z(i, j), -1.0)));
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Le,
            rhs: 0.0,
        });
    }
    // Capacity: plain (5) or strengthened (11).
    for j in 0..n {
        let mut coeffs: Vec<(usize, f64)> = (0..n)
            .filter(|&i| inst.flows.0[i] > 0)
            .map(|i| (vm.z(i, j), inst.flows.0[i] as f64))
            .collect();
        let rhs = if formulation.strengthened() {
            coeffs.push((vm.y(j), -(inst.capacity as f64)));
            0.0
        } else {
            inst.capacity as f64
        };
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Le,
            rhs,
        });
    }
    // (6) gamma * sum x + sum y <= M.
    {
        let mut coeffs: Vec<(usize, f64)> = (0..n).map(|i| (vm.x(i), inst.gamma as f64)).collect();
        coeffs.extend((0..n).map(|j| (vm.y(j), 1.0)));
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Le,
            rhs: inst.budget as f64,
        });
    }
    if formulation.strengthened() {
        // (12) sum_i R_i x_i <= A * sum_j y_j.
        let mut coeffs: Vec<(usize, f64)> = (0..n)
            .filter(|&i| inst.flows.0[i] > 0)
            .map(|i| (vm.x(i), inst.flows.0[i] as f64))
            .collect();
        coeffs.extend((0..n).map(|j| (vm.y(j), -(inst.capacity as f64))));
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Le,
            rhs: 0.0,
        });
        // (13) sum_i (R_i + gamma * A) x_i <= A * M.
        let coeffs: Vec<(usize, f64)> = (0..n)
            .map(|i| {
                (
                    vm.x(i),
                    inst.flows.0[i] as f64 + (inst.gamma * inst.capacity) as f64,
                )
            })
            .collect();
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Le,
            rhs: (inst.capacity * inst.budget) as f64,
        });
        // (14) sum_i x_i <= floor((M - 1) / gamma): a nonempty upgrade set
        // pays for at least one controller, so rounding the remaining budget
        // bounds the upgrade count (Chvatal-Gomory cut of (6) with (4)).
        if inst.budget >= 1 {
            let coeffs: Vec<(usize, f64)> = (0..n).map(|i| (vm.x(i), 1.0)).collect();
            lp.rows.push(LpRow {
                coeffs,
                relation: Relation::Le,
                rhs: ((inst.budget - 1) / inst.gamma) as f64,
            });
        }
    }
    if let Formulation::P2 { target_flows } = formulation {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|i| (vm.x(i), inst.flows.0[i] as f64)).collect();
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Eq,
            rhs: target_flows as f64,
        });
    }

    // Aggregate links: sum_i x_i - X = 0 and sum_j y_j - Y = 0. The totals
    // are integral in any integer plan, and branching on them resolves the
    // fractional-controller-count symmetry that individual y_j branches
    // cannot (the relaxation just redistributes the same fractional mass).
    {
        let ax = vm.sum_x();
        let ay = vm.sum_y();
        lp.set_bounds(ax, 0.0, n as f64);
        lp.set_bounds(ay, 0.0, n as f64);
        let mut coeffs: Vec<(usize, f64)> = (0..n).map(|i| (vm.x(i), 1.0)).collect();
        coeffs.push((ax, -1.0));
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Eq,
            rhs: 0.0,
        });
        let mut coeffs: Vec<(usize, f64)> = (0..n).map(|j| (vm.y(j), 1.0)).collect();
        coeffs.push((ay, -1.0));
        lp.rows.push(LpRow {
            coeffs,
            relation: Relation::Eq,
            rhs: 0.0,
        });
    }

    for &(var, lo, hi) in &extra.bounds {
        lp.set_bounds(var, lo, hi);
    }
    lp.rows.extend(extra.rows.iter().cloned());
    Ok(lp)
}
