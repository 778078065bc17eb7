//! Command-line front end: one-shot planning, parameter sweeps, the
//! plain-vs-strengthened formulation comparison, and results revalidation.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use planner::error::{PlannerError, Result};
use planner::lp::{assemble_lp, solve_lp, Formulation, LpExtras};
use planner::solver::{branch_and_bound, Limits};
use planner::sweep::{
    default_m_percents, instance_from_topology, read_bundle, run_algorithm, run_sweep,
    validate_bundle, write_bundle, write_csv, Algorithm, DistanceMode, SweepConfig,
};
use planner::topology::{read_topology_file, TopologyFormat};

#[derive(Parser)]
#[command(
    name = "planner",
    about = "Joint switch-upgrade and controller-deployment planning for hybrid SDN",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InstanceArgs {
    /// Topology file (GraphML or edge CSV); repeatable where a sweep accepts
    /// several.
    #[arg(long, required = true)]
    topology: Vec<PathBuf>,

    /// Force the topology format instead of inferring it from the extension.
    #[arg(long)]
    format: Option<String>,

    /// Controller processing capacity A.
    #[arg(long, default_value_t = 50)]
    capacity: u64,

    /// Switch upgrade cost in controller-cost units.
    #[arg(long, default_value_t = 4)]
    gamma: u64,

    /// Distance source: geodesic (needs coordinates) or hops.
    #[arg(long, default_value = "geodesic")]
    distance: String,

    /// Per-solve time limit in milliseconds.
    #[arg(long)]
    time_limit: Option<u64>,

    /// Seed recorded in result bundles for provenance.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with one algorithm and print the plan as JSON.
    Plan {
        #[command(flatten)]
        common: InstanceArgs,

        /// Algorithm: optimal, flowonly, mapfirst or weightfirst.
        #[arg(long)]
        algo: String,

        /// Budget as a fraction of the cost of upgrading every switch.
        #[arg(long, default_value_t = 0.5)]
        m_percent: f64,
    },
    /// Run the full (topology, algorithm, m_percent) cross product and write
    /// CSV + JSON results. CSV columns: topology, algorithm, m_percent,
    /// flows, n_controllers, sc_delay, cc_delay, ratio, wall_time_ms,
    /// status, gap.
    Sweep {
        #[command(flatten)]
        common: InstanceArgs,

        /// Algorithms to run; defaults to all four.
        #[arg(long)]
        algo: Vec<String>,

        /// Budget fractions; defaults to 0.05..=0.50 step 0.05.
        #[arg(long)]
        m_percent: Vec<f64>,

        /// Output prefix; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve each instance with the plain and strengthened combined
    /// formulations and report root bounds, node counts and times.
    Compare {
        #[command(flatten)]
        common: InstanceArgs,

        /// Budget fraction for every comparison cell.
        #[arg(long, default_value_t = 0.5)]
        m_percent: f64,

        /// Optional JSON output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recheck every plan and metric stored in a sweep results bundle.
    Validate {
        /// Path to a results .json bundle written by `sweep`.
        results: PathBuf,
    },
}

#[derive(Serialize)]
struct PlanOutput {
    topology: String,
    algorithm: Algorithm,
    m_percent: f64,
    status: String,
    gap: f64,
    wall_time_ms: f64,
    plan: planner::Plan,
    metrics: planner::PlanMetrics,
}

#[derive(Serialize)]
struct CompareCell {
    topology: String,
    m_percent: f64,
    formulation: String,
    root_bound: f64,
    optimum: f64,
    nodes_explored: u64,
    lp_solves: u64,
    wall_time_ms: f64,
}

impl InstanceArgs {
    fn distance_mode(&self) -> Result<DistanceMode> {
        self.distance.parse()
    }

    fn forced_format(&self) -> Result<Option<TopologyFormat>> {
        self.format.as_deref().map(str::parse).transpose()
    }

    fn limits(&self) -> Limits {
        Limits {
            time: self.time_limit.map(Duration::from_millis),
            ..Limits::default()
        }
    }

    fn single_topology(&self) -> Result<&PathBuf> {
        match self.topology.as_slice() {
            [one] => Ok(one),
            many => Err(PlannerError::MalformedInput(format!(
                "expected exactly one --topology, got {}",
                many.len()
            ))),
        }
    }
}

fn topology_name(path: &std::path::Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("topology")
        .to_string()
}

fn cmd_plan(common: &InstanceArgs, algo: &str, m_percent: f64) -> Result<()> {
    let algo: Algorithm = algo.parse()?;
    let path = common.single_topology()?;
    let t = read_topology_file(path, common.forced_format()?)?;
    let inst = instance_from_topology(
        &t,
        common.distance_mode()?,
        m_percent,
        common.capacity,
        common.gamma,
    )?;
    let (plan, metrics, status, gap, wall_time_ms) = run_algorithm(&inst, algo, &common.limits())?;
    let out = PlanOutput {
        topology: topology_name(path),
        algorithm: algo,
        m_percent,
        status,
        gap,
        wall_time_ms,
        plan,
        metrics,
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
    Ok(())
}

fn cmd_sweep(
    common: &InstanceArgs,
    algos: &[String],
    m_percents: &[f64],
    out: &std::path::Path,
) -> Result<()> {
    let algorithms = if algos.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        algos
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>>>()?
    };
    let config = SweepConfig {
        topologies: common.topology.clone(),
        m_percents: if m_percents.is_empty() {
            default_m_percents()
        } else {
            m_percents.to_vec()
        },
        capacity: common.capacity,
        gamma: common.gamma,
        algorithms,
        time_limit_ms: common.time_limit,
        distance: common.distance_mode()?,
        seed: common.seed,
        parallelism: Default::default(),
    };
    let bundle = run_sweep(&config)?;

    let csv_path = out.with_extension("csv");
    let json_path = out.with_extension("json");
    let file = std::fs::File::create(&csv_path)?;
    write_csv(&bundle, file)?;
    write_bundle(&bundle, &json_path)?;

    let errors = bundle.rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "wrote {} rows ({} errors) to {} and {}",
        bundle.rows.len(),
        errors,
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

fn cmd_compare(common: &InstanceArgs, m_percent: f64, out: Option<&std::path::Path>) -> Result<()> {
    let limits = common.limits();
    let mut cells = Vec::new();
    for path in &common.topology {
        let t = read_topology_file(path, common.forced_format()?)?;
        let inst = instance_from_topology(
            &t,
            common.distance_mode()?,
            m_percent,
            common.capacity,
            common.gamma,
        )?;
        for (label, f) in [("plain", Formulation::P), ("strengthened", Formulation::PPrime)] {
            let root = solve_lp(&assemble_lp(&inst, f, &LpExtras::default())?)?;
            let report = branch_and_bound(&inst, f, &limits)?;
            cells.push(CompareCell {
                topology: topology_name(path),
                m_percent,
                formulation: label.to_string(),
                root_bound: root.objective_value,
                optimum: report.incumbent_value,
                nodes_explored: report.nodes_explored,
                lp_solves: report.lp_solves,
                wall_time_ms: report.wall_time.as_secs_f64() * 1e3,
            });
        }
    }
    let json = serde_json::to_string_pretty(&cells).expect("serializable");
    match out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_validate(results: &std::path::Path) -> Result<()> {
    let bundle = read_bundle(results)?;
    validate_bundle(&bundle)?;
    let checked = bundle.rows.iter().filter(|r| r.plan.is_some()).count();
    println!("ok: {checked} plans revalidated");
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Plan {
            common,
            algo,
            m_percent,
        } => cmd_plan(common, algo, *m_percent),
        Command::Sweep {
            common,
            algo,
            m_percent,
            out,
        } => cmd_sweep(common, algo, m_percent, out),
        Command::Compare {
            common,
            m_percent,
            out,
        } => cmd_compare(common, *m_percent, out.as_deref()),
        Command::Validate { results } => cmd_validate(results),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
