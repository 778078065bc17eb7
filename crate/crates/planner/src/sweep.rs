//! Benchmark harness: budget sweeps over (topology, algorithm, m_percent)
//! cells, long-format CSV plus a JSON bundle that embeds the full config and
//! every plan so results can be revalidated offline.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{PlannerError, Result};
use crate::heuristics::{mapfirst, weightfirst};
use crate::instance::{check_feasibility, evaluate, Plan, PlanMetrics, ProblemInstance};
use crate::lp::Formulation;
use crate::par::{map_collect, Parallelism};
use crate::solver::{branch_and_bound, Limits, SolveStatus};
use crate::topology::{distance_matrix, hop_distance_matrix, read_topology_file, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    /// Branch-and-bound on the strengthened one-stage formulation.
    #[serde(rename = "optimal")]
    Optimal,
    /// Branch-and-bound on the flow objective alone, delay ignored.
    #[serde(rename = "flowonly")]
    FlowOnly,
    #[serde(rename = "mapfirst")]
    MapFirst,
    #[serde(rename = "weightfirst")]
    WeightFirst,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Optimal,
        Algorithm::FlowOnly,
        Algorithm::MapFirst,
        Algorithm::WeightFirst,
    ];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Optimal => "optimal",
            Algorithm::FlowOnly => "flowonly",
            Algorithm::MapFirst => "mapfirst",
            Algorithm::WeightFirst => "weightfirst",
        };
        f.write_str(s)
    }
}

impl FromStr for Algorithm {
    type Err = PlannerError;
    fn from_str(s: &str) -> Result<Algorithm> {
        match s {
            "optimal" => Ok(Algorithm::Optimal),
            "flowonly" => Ok(Algorithm::FlowOnly),
            "mapfirst" => Ok(Algorithm::MapFirst),
            "weightfirst" => Ok(Algorithm::WeightFirst),
            other => Err(PlannerError::MalformedInput(format!(
                "unknown algorithm {other:?}; expected optimal|flowonly|mapfirst|weightfirst"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// Great-circle kilometers from node coordinates.
    #[default]
    Geodesic,
    /// BFS hop counts, for topologies without coordinates.
    Hops,
}

impl FromStr for DistanceMode {
    type Err = PlannerError;
    fn from_str(s: &str) -> Result<DistanceMode> {
        match s {
            "geodesic" => Ok(DistanceMode::Geodesic),
            "hops" => Ok(DistanceMode::Hops),
            other => Err(PlannerError::MalformedInput(format!(
                "unknown distance mode {other:?}; expected geodesic|hops"
            ))),
        }
    }
}

/// Default budget fractions: 5% to 50% in 5% steps.
pub fn default_m_percents() -> Vec<f64> {
    (1..=10).map(|k| k as f64 * 0.05).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub topologies: Vec<PathBuf>,
    pub m_percents: Vec<f64>,
    pub capacity: u64,
    pub gamma: u64,
    pub algorithms: Vec<Algorithm>,
    /// Per-solve time limit in milliseconds, unlimited when absent.
    pub time_limit_ms: Option<u64>,
    pub distance: DistanceMode,
    pub seed: u64,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl SweepConfig {
    pub fn new(topologies: Vec<PathBuf>) -> SweepConfig {
        SweepConfig {
            topologies,
            m_percents: default_m_percents(),
            capacity: 50,
            gamma: 4,
            algorithms: Algorithm::ALL.to_vec(),
            time_limit_ms: None,
            distance: DistanceMode::Geodesic,
            seed: 0,
            parallelism: Parallelism::Auto,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.topologies.is_empty() {
            return Err(PlannerError::MalformedInput("no topologies given".into()));
        }
        if self.algorithms.is_empty() {
            return Err(PlannerError::MalformedInput("empty algorithm set".into()));
        }
        for &m in &self.m_percents {
            if !(m > 0.0 && m <= 1.0) {
                return Err(PlannerError::MalformedInput(format!(
                    "m_percent {m} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    fn limits(&self) -> Limits {
        Limits {
            time: self.time_limit_ms.map(Duration::from_millis),
            ..Limits::default()
        }
    }
}

/// One sweep cell. Metric fields are zero when `error` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub topology: String,
    pub algorithm: Algorithm,
    pub m_percent: f64,
    pub flows: u64,
    pub n_controllers: usize,
    pub sc_delay: f64,
    pub cc_delay: f64,
    pub ratio: f64,
    pub wall_time_ms: f64,
    pub status: String,
    pub gap: f64,
    pub plan: Option<Plan>,
    pub error: Option<String>,
}

/// Config plus rows: everything needed to revalidate the results later.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepBundle {
    pub config: SweepConfig,
    pub rows: Vec<ResultRow>,
}

fn topology_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("topology")
        .to_string()
}

/// Loads a topology and builds the instance for one budget fraction.
pub fn load_instance(
    path: &Path,
    distance: DistanceMode,
    m_percent: f64,
    capacity: u64,
    gamma: u64,
) -> Result<ProblemInstance> {
    let t = read_topology_file(path, None)?;
    instance_from_topology(&t, distance, m_percent, capacity, gamma)
}

pub fn instance_from_topology(
    t: &Topology,
    distance: DistanceMode,
    m_percent: f64,
    capacity: u64,
    gamma: u64,
) -> Result<ProblemInstance> {
    let dist = match distance {
        DistanceMode::Geodesic => distance_matrix(t)?,
        DistanceMode::Hops => hop_distance_matrix(t),
    };
    ProblemInstance::from_topology_with_distances(t, dist, m_percent, capacity, gamma)
}

/// Runs one algorithm on one instance; the timing wraps the solve only.
pub fn run_algorithm(
    inst: &ProblemInstance,
    algo: Algorithm,
    limits: &Limits,
) -> Result<(Plan, PlanMetrics, String, f64, f64)> {
    let start = Instant::now();
    let (plan, status, gap) = match algo {
        Algorithm::Optimal => {
            let r = branch_and_bound(inst, Formulation::PPrime, limits)?;
            (r.best_plan, status_string(r.status), r.gap)
        }
        Algorithm::FlowOnly => {
            // The strengthened variant has the same integer optimum and a
            // far tighter relaxation.
            let r = branch_and_bound(inst, Formulation::P1Prime, limits)?;
            (r.best_plan, status_string(r.status), r.gap)
        }
        Algorithm::MapFirst => (mapfirst(inst)?, "heuristic".to_string(), 0.0),
        Algorithm::WeightFirst => (weightfirst(inst), "heuristic".to_string(), 0.0),
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let metrics = evaluate(inst, &plan)?;
    Ok((plan, metrics, status, gap, wall_time_ms))
}

fn status_string(s: SolveStatus) -> String {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::FeasibleTimeLimit => "feasible_time_limit",
        SolveStatus::Infeasible => "infeasible",
    }
    .to_string()
}

/// Runs the full cross product. Per-cell failures become error rows; the
/// sweep itself only fails on invalid configuration.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepBundle> {
    config.validate()?;
    let mut topologies = Vec::new();
    for path in &config.topologies {
        let name = topology_name(path);
        topologies.push((name, read_topology_file(path, None)));
    }

    let mut jobs = Vec::new();
    for (name, parsed) in &topologies {
        for &algo in &config.algorithms {
            for &m in &config.m_percents {
                jobs.push((name.clone(), parsed, algo, m));
            }
        }
    }

    let limits = config.limits();
    let rows = map_collect(config.parallelism, jobs, |(name, parsed, algo, m)| {
        let outcome = parsed.as_ref().map_err(clone_error).and_then(|t| {
            let inst = instance_from_topology(t, config.distance, m, config.capacity, config.gamma)?;
            run_algorithm(&inst, algo, &limits)
        });
        match outcome {
            Ok((plan, metrics, status, gap, wall_time_ms)) => ResultRow {
                topology: name,
                algorithm: algo,
                m_percent: m,
                flows: metrics.flows,
                n_controllers: metrics.n_controllers,
                sc_delay: metrics.sc_delay,
                cc_delay: metrics.cc_delay,
                ratio: metrics.ratio,
                wall_time_ms,
                status,
                gap,
                plan: Some(plan),
                error: None,
            },
            Err(e) => ResultRow {
                topology: name,
                algorithm: algo,
                m_percent: m,
                flows: 0,
                n_controllers: 0,
                sc_delay: 0.0,
                cc_delay: 0.0,
                ratio: 0.0,
                wall_time_ms: 0.0,
                status: "error".to_string(),
                gap: 0.0,
                plan: None,
                error: Some(e.to_string()),
            },
        }
    });

    let mut rows = rows;
    rows.sort_by(|a, b| {
        a.topology
            .cmp(&b.topology)
            .then_with(|| a.algorithm.to_string().cmp(&b.algorithm.to_string()))
            .then_with(|| a.m_percent.total_cmp(&b.m_percent))
    });
    Ok(SweepBundle {
        config: config.clone(),
        rows,
    })
}

// PlannerError is not Clone (it can wrap io::Error); error rows only need the
// message.
fn clone_error(e: &PlannerError) -> PlannerError {
    PlannerError::MalformedInput(e.to_string())
}

pub const CSV_COLUMNS: [&str; 11] = [
    "topology",
    "algorithm",
    "m_percent",
    "flows",
    "n_controllers",
    "sc_delay",
    "cc_delay",
    "ratio",
    "wall_time_ms",
    "status",
    "gap",
];

/// Long-format CSV, one row per sweep cell, plans omitted (use the JSON
/// bundle for those).
pub fn write_csv(bundle: &SweepBundle, w: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_COLUMNS)
        .map_err(|e| PlannerError::Io(std::io::Error::other(e)))?;
    for r in &bundle.rows {
        out.write_record([
            r.topology.clone(),
            r.algorithm.to_string(),
            format!("{}", r.m_percent),
            format!("{}", r.flows),
            format!("{}", r.n_controllers),
            format!("{}", r.sc_delay),
            format!("{}", r.cc_delay),
            format!("{}", r.ratio),
            format!("{}", r.wall_time_ms),
            r.status.clone(),
            format!("{}", r.gap),
        ])
        .map_err(|e| PlannerError::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bundle(bundle: &SweepBundle, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(bundle)
        .map_err(|e| PlannerError::Io(std::io::Error::other(e)))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn read_bundle(path: &Path) -> Result<SweepBundle> {
    let data = std::fs::read_to_string(path)?;
    serde_json::from_str(&data)
        .map_err(|e| PlannerError::MalformedInput(format!("bad results bundle: {e}")))
}

/// Replays every stored plan through the feasibility checker and the metric
/// evaluator and compares against the stored columns: integers exactly, reals
/// within 1e-9. Error rows are skipped.
pub fn validate_bundle(bundle: &SweepBundle) -> Result<()> {
    let mut problems: Vec<String> = Vec::new();
    let mut topologies: std::collections::BTreeMap<String, Topology> = Default::default();
    for path in &bundle.config.topologies {
        if let Ok(t) = read_topology_file(path, None) {
            topologies.insert(topology_name(path), t);
        }
    }

    for (idx, row) in bundle.rows.iter().enumerate() {
        let plan = match &row.plan {
            Some(p) => p,
            None => continue,
        };
        let cell = format!(
            "row {idx} ({}/{}/{})",
            row.topology, row.algorithm, row.m_percent
        );
        let Some(t) = topologies.get(&row.topology) else {
            problems.push(format!("{cell}: topology file not found"));
            continue;
        };
        let inst = match instance_from_topology(
            t,
            bundle.config.distance,
            row.m_percent,
            bundle.config.capacity,
            bundle.config.gamma,
        ) {
            Ok(i) => i,
            Err(e) => {
                problems.push(format!("{cell}: cannot rebuild instance: {e}"));
                continue;
            }
        };
        match check_feasibility(&inst, plan) {
            Ok(v) if v.is_empty() => {}
            Ok(v) => {
                problems.push(format!(
                    "{cell}: plan violates constraint ({})",
                    v[0].constraint_id()
                ));
                continue;
            }
            Err(e) => {
                problems.push(format!("{cell}: {e}"));
                continue;
            }
        }
        let m = evaluate(&inst, plan).expect("feasibility already checked");
        if m.flows != row.flows {
            problems.push(format!(
                "{cell}: flows {} recomputed as {}",
                row.flows, m.flows
            ));
        }
        if m.n_controllers != row.n_controllers {
            problems.push(format!(
                "{cell}: n_controllers {} recomputed as {}",
                row.n_controllers, m.n_controllers
            ));
        }
        for (field, stored, computed) in [
            ("sc_delay", row.sc_delay, m.sc_delay),
            ("cc_delay", row.cc_delay, m.cc_delay),
            ("ratio", row.ratio, m.ratio),
        ] {
            if (stored - computed).abs() > 1e-9 {
                problems.push(format!(
                    "{cell}: {field} {stored} recomputed as {computed}"
                ));
            }
        }
    }

    if problems.is_empty() {
        Ok(())
    } else {
        Err(PlannerError::ValidationFailure(problems.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn fig1_csv() -> &'static str {
        "src,dst\ns1,s4\ns2,s4\ns3,s4\ns5,s4\ns6,s4\ns1,s2\ns2,s5\ns3,s6\ns5,s6\n"
    }

    fn fig1_file(dir: &Path) -> PathBuf {
        let path = dir.join("fig1.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(fig1_csv().as_bytes()).unwrap();
        path
    }

    fn small_config(dir: &Path) -> SweepConfig {
        let mut config = SweepConfig::new(vec![fig1_file(dir)]);
        config.capacity = 6;
        config.gamma = 3;
        config.distance = DistanceMode::Hops;
        config.m_percents = vec![0.25, 0.5];
        config.algorithms = vec![Algorithm::Optimal, Algorithm::MapFirst];
        config
    }

    #[test]
    fn cross_product_cardinality() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = run_sweep(&small_config(dir.path())).unwrap();
        // 1 topology x 2 algorithms x 2 budgets.
        assert_eq!(bundle.rows.len(), 4);
        assert!(bundle.rows.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn sweeps_are_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let config = small_config(dir.path());
        let a = run_sweep(&config).unwrap();
        let b = run_sweep(&config).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.flows, rb.flows);
            assert_eq!(ra.n_controllers, rb.n_controllers);
            assert_eq!(ra.sc_delay, rb.sc_delay);
            assert_eq!(ra.plan, rb.plan);
        }
    }

    #[test]
    fn bundle_round_trips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = run_sweep(&small_config(dir.path())).unwrap();
        let path = dir.path().join("results.json");
        write_bundle(&bundle, &path).unwrap();
        let back = read_bundle(&path).unwrap();
        validate_bundle(&back).unwrap();
    }

    #[test]
    fn tampered_bundle_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = run_sweep(&small_config(dir.path())).unwrap();
        // Perturb a stored delay.
        let row = bundle
            .rows
            .iter_mut()
            .find(|r| r.plan.is_some())
            .unwrap();
        row.sc_delay += 1e-3;
        let err = validate_bundle(&bundle).unwrap_err();
        assert!(matches!(err, PlannerError::ValidationFailure(_)));
        assert!(err.to_string().contains("sc_delay"));
    }

    #[test]
    fn deleted_mapping_reports_constraint_three() {
        let dir = tempfile::tempdir().unwrap();
        let mut bundle = run_sweep(&small_config(dir.path())).unwrap();
        let row = bundle
            .rows
            .iter_mut()
            .find(|r| r.plan.as_ref().is_some_and(|p| !p.mappings.is_empty()))
            .unwrap();
        let plan = row.plan.as_mut().unwrap();
        let first = *plan.mappings.iter().next().unwrap();
        plan.mappings.remove(&first);
        let err = validate_bundle(&bundle).unwrap_err();
        assert!(err.to_string().contains("constraint (3)"));
    }

    #[test]
    fn missing_topology_becomes_error_row() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(dir.path());
        config.topologies.push(dir.path().join("absent.csv"));
        let bundle = run_sweep(&config).unwrap();
        let errors = bundle.rows.iter().filter(|r| r.error.is_some()).count();
        // 2 algorithms x 2 budgets on the missing file.
        assert_eq!(errors, 4);
    }

    #[test]
    fn csv_has_fixed_columns() {
        let dir = tempfile::tempdir().unwrap();
        let bundle = run_sweep(&small_config(dir.path())).unwrap();
        let mut buf = Vec::new();
        write_csv(&bundle, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, CSV_COLUMNS.join(","));
        assert_eq!(text.lines().count(), 1 + bundle.rows.len());
    }
}
