mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use netcoord::certify::{self, ProfileFile};
use netcoord::equilibrium;
use netcoord::graph::{self, Graph, Layout};
use netcoord::influence::{self, InputModel, LocalFunction};
use netcoord::partition::{self, PartitionCertificate};
use netcoord::rng::{self, Purpose};

use report::{Check, RunReport};

/// Standard errors of slack allowed on Monte Carlo bound checks.
const SIGMAS: f64 = 4.0;
const EXACT_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "netcoord", version, about = "Coordination games on networks: partitions, equilibria, influence and certificates")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Write a graph file
    Generate(GenerateArgs),
    /// Build and verify an amenability certificate
    Partition(PartitionArgs),
    /// Simulate a leader equilibrium
    Simulate(SimulateArgs),
    /// Shapley influence distributions and the contraction check
    Influence(InfluenceArgs),
    /// Turn a strategy profile into random certificates
    Certify(CertifyArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report format on stdout
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Append CSV rows to this file
    #[arg(long)]
    csv_append: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum Family {
    Cycle,
    Torus,
    Tree,
    Er,
}

#[derive(Args, Debug, Serialize)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Vertex count (cycle, er)
    #[arg(long)]
    n: Option<usize>,
    /// Torus width
    #[arg(long)]
    w: Option<usize>,
    /// Torus height
    #[arg(long)]
    h: Option<usize>,
    /// Tree depth
    #[arg(long)]
    depth: Option<usize>,
    /// Expected degree (er)
    #[arg(long)]
    d: Option<f64>,
    /// Output graph file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum Method {
    /// Tile cycles and tori, carve anything else
    Auto,
    Tile,
    Greedy,
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    /// Certificate output file
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Private,
    Public,
    Transitive,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Private)]
    mode: Mode,
    /// Certificate file; built with the default method when absent
    #[arg(long)]
    cert: Option<PathBuf>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Tile selection probability (transitive mode)
    #[arg(long)]
    p: Option<f64>,
    /// Write the stable partition here (public mode)
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Serialize)]
struct InfluenceArgs {
    /// Function file
    #[arg(long)]
    function: Option<PathBuf>,
    /// Second function file, for the contraction check
    #[arg(long)]
    other: Option<PathBuf>,
    /// Number of random pairs to sweep
    #[arg(long)]
    sweep: Option<usize>,
    /// Binary inputs available to the sweep
    #[arg(long, default_value_t = 8)]
    max_inputs: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum ProfileKind {
    Leader,
    Perturbed,
    Iid,
}

#[derive(Args, Debug, Serialize)]
struct CertifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    r: usize,
    /// Profile file
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Built-in profile, derived from --cert (leader, perturbed)
    #[arg(long, value_enum)]
    profile_kind: Option<ProfileKind>,
    #[arg(long)]
    cert: Option<PathBuf>,
    /// Deviation probability of the perturbed profile
    #[arg(long, default_value_t = 0.1)]
    flip: f64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Sample certificate output file
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let start = Instant::now();
    let config = serde_json::to_value(&cli.command)?;
    let (name, common, metrics, checks) = match &cli.command {
        Command::Generate(a) => ("generate", &a.common, generate(a)?, Vec::new()),
        Command::Partition(a) => {
            let (m, c) = cmd_partition(a)?;
            ("partition", &a.common, m, c)
        }
        Command::Simulate(a) => {
            let (m, c) = simulate(a)?;
            ("simulate", &a.common, m, c)
        }
        Command::Influence(a) => {
            let (m, c) = cmd_influence(a)?;
            ("influence", &a.common, m, c)
        }
        Command::Certify(a) => {
            let (m, c) = cmd_certify(a)?;
            ("certify", &a.common, m, c)
        }
    };
    let report = RunReport::new(name, Some(common.seed), config, metrics, checks, start);
    eprint!("{}", report.summary());
    match common.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Csv => {
            println!("{}", RunReport::CSV_HEADER);
            for row in report.csv_rows() {
                println!("{row}");
            }
        }
    }
    if let Some(path) = &common.csv_append {
        report.append_csv(path)?;
    }
    Ok(report.all_passed)
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("--{flag} is required"))
}

fn load_graph(path: &Path) -> Result<Graph> {
    Graph::load(path).with_context(|| format!("loading graph {}", path.display()))
}

fn graph_summary(g: &Graph) -> serde_json::Value {
    json!({
        "n": g.n(),
        "ordered_edges": g.ordered_edge_count(),
        "max_degree": g.max_degree(),
        "layout": g.layout(),
    })
}

fn generate(a: &GenerateArgs) -> Result<serde_json::Value> {
    let g = match a.family {
        Family::Cycle => graph::make_cycle(need(a.n, "n")?)?,
        Family::Torus => graph::make_torus(need(a.w, "w")?, need(a.h, "h")?)?,
        Family::Tree => graph::make_binary_tree(need(a.depth, "depth")?)?,
        Family::Er => graph::make_erdos_renyi(need(a.n, "n")?, need(a.d, "d")?, a.common.seed)?,
    };
    match &a.out {
        Some(path) => g.save(path)?,
        None if a.common.format == Format::Json => {}
        None => bail!("--out is required with --format csv"),
    }
    let mut m = graph_summary(&g);
    if a.out.is_none() {
        m["graph"] = serde_json::to_value(g.to_file())?;
    }
    Ok(m)
}

fn tile_hint(e: netcoord::Error) -> anyhow::Error {
    anyhow::anyhow!("{e}; the tiler does not apply here, try --method greedy")
}

fn build_certificate(g: &Graph, r: usize, method: Method, seed: u64) -> Result<PartitionCertificate> {
    let tile = |g: &Graph| match g.layout() {
        Layout::Cycle => partition::tile_cycle(g, r).map_err(tile_hint),
        Layout::Torus { .. } => partition::tile_torus(g, r).map_err(tile_hint),
        _ => bail!("no tiler for this graph family; try --method greedy"),
    };
    match method {
        Method::Tile => tile(g),
        Method::Greedy => Ok(partition::greedy_ball_carve(g, r, seed)),
        Method::Auto => match g.layout() {
            Layout::Cycle | Layout::Torus { .. } => tile(g),
            _ => Ok(partition::greedy_ball_carve(g, r, seed)),
        },
    }
}

fn cmd_partition(a: &PartitionArgs) -> Result<(serde_json::Value, Vec<Check>)> {
    let g = load_graph(&a.graph)?;
    let cert = build_certificate(&g, a.r, a.method, a.common.seed)?;
    let v = partition::verify_certificate(&g, &cert);
    if let Some(path) = &a.out {
        cert.save(path)?;
    }
    let epsilon = cert.epsilon_achieved;
    let metrics = json!({
        "graph": graph_summary(&g),
        "r": a.r,
        "epsilon": epsilon,
        "communities": cert.communities.len(),
        "cut_edges": cert.cut_edges.len(),
        "valid": v.valid,
        "violation": v.violation.map(|x| x.to_string()),
        "non_amenable_regime": epsilon > 0.5,
    });
    Ok((metrics, vec![Check::near("certificate_valid", v.valid as u8 as f64, 1.0, 0.0)]))
}

fn load_or_build_cert(g: &Graph, cert: &Option<PathBuf>, r: Option<usize>, seed: u64) -> Result<PartitionCertificate> {
    match cert {
        Some(path) => PartitionCertificate::load(path).with_context(|| format!("loading certificate {}", path.display())),
        None => build_certificate(g, need(r, "r")?, Method::Auto, seed),
    }
}

fn simulate(a: &SimulateArgs) -> Result<(serde_json::Value, Vec<Check>)> {
    let g = load_graph(&a.graph)?;
    let seed = a.common.seed;
    match a.mode {
        Mode::Private => {
            let cert = load_or_build_cert(&g, &a.cert, a.r, seed)?;
            let exact = equilibrium::exact_private_leader(&g, &cert)?;
            let mc = equilibrium::simulate_private_leader(&g, &cert, a.trials, seed)?;
            let eps = cert.epsilon_achieved;
            let metrics = json!({"epsilon": eps, "exact": exact, "inefficiency": mc});
            let checks = vec![
                Check::at_most("exact_inefficiency_le_epsilon", exact, eps, EXACT_TOL),
                Check::at_most("mean_inefficiency_le_epsilon", mc.mean, eps, SIGMAS * mc.std_error),
            ];
            Ok((metrics, checks))
        }
        Mode::Public => {
            let cert = load_or_build_cert(&g, &a.cert, a.r, seed)?;
            let sp = partition::peel_to_stable(&g, &cert)?;
            sp.validate(&g)?;
            if let Some(path) = &a.out {
                std::fs::write(path, serde_json::to_string(&sp)?)?;
            }
            let exact = equilibrium::exact_public_stable(&g, &sp)?;
            let mc = equilibrium::simulate_public_stable(&g, &sp, a.trials, seed)?;
            let bound = cert.epsilon_achieved * g.max_degree() as f64;
            let deleted = sp.deleted_edges.ordered_len() as f64;
            let cut_bound = (g.max_degree() * cert.cut_edges.ordered_len()) as f64;
            let metrics = json!({
                "epsilon": cert.epsilon_achieved,
                "max_degree": g.max_degree(),
                "stable_communities": sp.stable_communities.len(),
                "unassigned": sp.unassigned.len(),
                "deleted_ordered": deleted,
                "exact": exact,
                "inefficiency": mc,
            });
            let checks = vec![
                Check::at_most("deleted_le_dmax_cut", deleted, cut_bound, 0.0),
                Check::at_most("exact_inefficiency_le_epsilon_dmax", exact, bound, EXACT_TOL),
                Check::at_most("mean_inefficiency_le_epsilon_dmax", mc.mean, bound, SIGMAS * mc.std_error),
            ];
            Ok((metrics, checks))
        }
        Mode::Transitive => {
            let rep = equilibrium::simulate_local_transitive(&g, need(a.r, "r")?, a.trials, seed, a.p)?;
            let mut checks = vec![
                Check::at_most(
                    "deleted_fraction_le_bound",
                    rep.deleted_fraction.mean,
                    rep.deleted_bound,
                    SIGMAS * rep.deleted_fraction.std_error,
                ),
                Check::near(
                    "uncovered_rate",
                    rep.uncovered_fraction.mean,
                    rep.uncovered_expected,
                    SIGMAS * rep.uncovered_fraction.std_error,
                ),
            ];
            if let Some(b) = rep.inefficiency_bound {
                checks.push(Check::at_most(
                    "inefficiency_le_eps_log",
                    rep.inefficiency.mean,
                    b,
                    SIGMAS * rep.inefficiency.std_error,
                ));
            }
            Ok((serde_json::to_value(&rep)?, checks))
        }
    }
}

fn cmd_influence(a: &InfluenceArgs) -> Result<(serde_json::Value, Vec<Check>)> {
    if let Some(pairs) = a.sweep {
        return sweep(pairs, a.max_inputs, a.common.seed);
    }
    let path = a.function.as_ref().context("--function or --sweep is required")?;
    let f = LocalFunction::load(path).with_context(|| format!("loading {}", path.display()))?;
    let mu = influence::shapley_influence(&f)?;
    let mut checks = vec![Check::at_most(
        "distribution_error",
        mu.validate().is_err() as u8 as f64,
        0.0,
        0.0,
    )];
    let mut metrics = json!({"influence": mu.probabilities});
    if let Ok(w) = influence::fourier_weights(&influence::normalize(&f)?) {
        let d = influence::harsanyi_dividends(&influence::variance_game(&influence::normalize(&f)?)?);
        let dev = w.iter().zip(&d).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        metrics["fourier_mobius_max_deviation"] = json!(dev);
        checks.push(Check::at_most("fourier_mobius_max_deviation", dev, 1e-9, 0.0));
    }
    if let Some(other) = &a.other {
        let h = LocalFunction::load(other).with_context(|| format!("loading {}", other.display()))?;
        let c = influence::contraction_check(&f, &h)?;
        metrics["other_influence"] = json!(influence::shapley_influence(&h)?.probabilities);
        metrics["contraction"] = serde_json::to_value(c)?;
        checks.push(Check::at_most("tv_le_l2", c.tv, c.l2, 1e-9));
    }
    Ok((metrics, checks))
}

fn sweep(pairs: usize, max_inputs: usize, seed: u64) -> Result<(serde_json::Value, Vec<Check>)> {
    if max_inputs == 0 || max_inputs > influence::DEFAULT_SCOPE_CAP {
        bail!("--max-inputs must lie in 1..={}", influence::DEFAULT_SCOPE_CAP);
    }
    let model = Arc::new(InputModel::rademacher(max_inputs));
    let rows = rng::run_trials(pairs, seed, Purpose::Sweep, |_, rng| -> netcoord::Result<_> {
        let (f, h) = influence::random_pair(&model, max_inputs, rng)?;
        let x = influence::normalize(&f)?;
        let w = influence::fourier_weights(&x)?;
        let d = influence::harsanyi_dividends(&influence::variance_game(&x)?);
        let dev = w.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let bad_dist = influence::shapley_influence(&x)?.validate().is_err();
        Ok((influence::contraction_check(&f, &h)?, dev, bad_dist))
    })
    .into_iter()
    .collect::<netcoord::Result<Vec<_>>>()?;
    let violations = rows.iter().filter(|(c, _, _)| !c.holds).count();
    let max_dev = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let bad = rows.iter().filter(|r| r.2).count();
    let worst_ratio = rows
        .iter()
        .filter(|(c, _, _)| c.l2 > 1e-9)
        .map(|(c, _, _)| c.tv / c.l2)
        .fold(0.0, f64::max);
    let metrics = json!({
        "pairs": pairs,
        "max_inputs": max_inputs,
        "violations": violations,
        "invalid_distributions": bad,
        "fourier_mobius_max_deviation": max_dev,
        "max_tv_over_l2": worst_ratio,
    });
    let checks = vec![
        Check::at_most("contraction_violations", violations as f64, 0.0, 0.0),
        Check::at_most("invalid_distributions", bad as f64, 0.0, 0.0),
        Check::at_most("fourier_mobius_max_deviation", max_dev, 1e-9, 0.0),
    ];
    Ok((metrics, checks))
}

fn cmd_certify(a: &CertifyArgs) -> Result<(serde_json::Value, Vec<Check>)> {
    let g = load_graph(&a.graph)?;
    let seed = a.common.seed;
    let profile = match (&a.profile, a.profile_kind) {
        (Some(path), None) => ProfileFile::load(path)
            .with_context(|| format!("loading profile {}", path.display()))?
            .into_functions()?,
        (None, Some(ProfileKind::Iid)) => certify::iid_profile(&g)?,
        (None, Some(kind)) => {
            let cert = load_or_build_cert(&g, &a.cert, Some(a.r), seed)?;
            match kind {
                ProfileKind::Leader => certify::leader_profile(&g, &cert)?,
                _ => certify::perturbed_leader_profile(&g, &cert, a.flip)?,
            }
        }
        _ => bail!("exactly one of --profile and --profile-kind is required"),
    };
    let family = certify::profile_influences(&g, a.r, &profile)?;
    let epsilon = certify::profile_epsilon(&g, &profile)?;
    let est = certify::extract_certificate(&g, a.r, &family, epsilon, a.trials, seed)?;
    if let (Some(path), Some(c)) = (&a.out, est.sample_certificates.first()) {
        c.save(path)?;
    }
    let checks = vec![
        Check::at_most("mean_cut_fraction_le_sqrt_8eps", est.mean_cut_fraction, est.bound, SIGMAS * est.std_error),
        Check::at_most("leader_distance_le_r", est.max_leader_distance as f64, a.r as f64, 0.0),
    ];
    let metrics = json!({
        "profile_epsilon": epsilon,
        "margin": est.bound - est.mean_cut_fraction,
        "estimate": est,
    });
    Ok((metrics, checks))
}
