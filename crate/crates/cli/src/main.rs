use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dollarwalk::exact_dist::{
    model1_limit_f64, poisson_f64, rational_to_f64, DollarMarginal, NumericMode,
};
use dollarwalk::graph::Family;
use dollarwalk::oracle;
use dollarwalk::simulation::{simulate, Estimator, SimulationOutput, SimulationPlan};
use dollarwalk::state_space::{enumeration_cap, MoneyConfig};
use dollarwalk::stats::{figure_csv, histogram_csv, tv_distance, RunMetadata, VertexSelection};
use dollarwalk::{Graph, ModelKind, Vertex};

#[derive(Debug, Parser)]
#[command(
    name = "dollarwalk",
    version,
    about = "Money-exchange Markov chains on graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a graph and print it as JSON.
    GenerateGraph {
        /// Inline spec: complete:N, cycle:N, path:N, star:N, grid:WxH, er:N:P:SEED.
        #[arg(long)]
        graph: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the chain and write a histogram CSV plus JSON metadata.
    Simulate(RunArgs),
    /// Exact finite-N marginal and its large-population limit as CSV.
    Exact(ExactArgs),
    /// Brute-force verification of a small instance; prints a JSON report.
    OracleCheck {
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        graph: String,
        #[arg(long)]
        m: u64,
    },
    /// Simulation histogram overlaid with the exact marginal and limit curve.
    Figure {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = LimitCurve::Default)]
        limit: LimitCurve,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    model: ModelKind,
    /// Inline graph spec or path to a JSON graph file.
    #[arg(long)]
    graph: String,
    /// `equal:K`, `all-at:V` (with --total), `all-at:V:M`, or a JSON file of counts.
    #[arg(long, default_value = "equal:100")]
    init: String,
    /// Total money for `all-at:V`.
    #[arg(long)]
    total: Option<u64>,
    /// Post-burn-in steps.
    #[arg(long)]
    steps: u64,
    /// Defaults to 10 * N * M.
    #[arg(long)]
    burn_in: Option<u64>,
    /// Snapshot stride; defaults to N * M.
    #[arg(long)]
    sample_every: Option<u64>,
    #[arg(long, default_value_t = 1)]
    replicas: u64,
    /// Required when the CI environment variable is set.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "snapshot")]
    estimator: Estimator,
    /// Watch a single vertex instead of pooling.
    #[arg(long)]
    vertex: Option<Vertex>,
    /// Output prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExactArgs {
    #[arg(long)]
    model: ModelKind,
    /// Number of agents (model 1 only; the graph does not matter there).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    m: u64,
    /// Vertex index, or `center` for a star.
    #[arg(long, default_value = "0")]
    vertex: String,
    #[arg(long, default_value_t = 0)]
    d_min: u64,
    /// Defaults to M.
    #[arg(long)]
    d_max: Option<u64>,
    #[arg(long, value_enum, default_value_t = LimitCurve::Default)]
    limit: LimitCurve,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Which large-population curve to print next to the finite-N marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitCurve {
    /// Geometric for model 1, Poisson for model 2.
    Default,
    /// Exponential density `e^{-d/T}/T` (model 1 only).
    Exponential,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenerateGraph { graph, out } => {
            let g = Graph::load(&graph)?;
            emit(out.as_deref(), &format!("{}\n", g.to_json()))?;
        }
        Command::Simulate(args) => {
            let (_, output, meta) = run_simulation(&args)?;
            write_pair(
                &args.out,
                &histogram_csv(&output.histogram),
                &meta.to_json(),
            )?;
        }
        Command::Exact(args) => cmd_exact(&args)?,
        Command::OracleCheck { model, graph, m } => {
            let g = Graph::load(&graph)?;
            let report = oracle::verify(model, &g, &graph, m, enumeration_cap())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Figure { run, limit } => cmd_figure(&run, limit)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_pair(prefix: &Path, csv: &str, json: &str) -> Result<()> {
    let csv_path = prefix.with_extension("csv");
    let json_path = prefix.with_extension("json");
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    fs::write(&json_path, format!("{json}\n"))
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok(())
}

fn resolve_seed(seed: Option<u64>) -> Result<u64> {
    match seed {
        Some(s) => Ok(s),
        None if std::env::var_os("CI").is_some() => bail!("--seed is required when CI is set"),
        None => Ok(SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0)),
    }
}

fn parse_initial(spec: &str, n: usize, total: Option<u64>) -> Result<MoneyConfig> {
    let parts: Vec<&str> = spec.split(':').collect();
    let config = match parts.as_slice() {
        ["equal", k] => MoneyConfig::equal(n, k.parse().context("equal:K needs an integer")?)?,
        ["all-at", v] => {
            let m = total.ok_or_else(|| anyhow!("all-at:V needs --total"))?;
            MoneyConfig::all_at(n, v.parse()?, m)?
        }
        ["all-at", v, m] => MoneyConfig::all_at(n, v.parse()?, m.parse()?)?,
        _ => {
            let text = fs::read_to_string(spec).with_context(|| {
                format!("`{spec}` is neither an initial-condition spec nor a readable file")
            })?;
            MoneyConfig::from_json(&text)?
        }
    };
    if config.vertex_count() != n {
        bail!(
            "initial configuration has {} entries but the graph has {n} vertices",
            config.vertex_count()
        );
    }
    Ok(config)
}

fn run_simulation(args: &RunArgs) -> Result<(Graph, SimulationOutput, RunMetadata)> {
    let g = Graph::load(&args.graph)?;
    let initial = parse_initial(&args.init, g.vertex_count(), args.total)?;
    let seed = resolve_seed(args.seed)?;
    let plan = SimulationPlan {
        model: args.model,
        steps: args.steps,
        burn_in: args.burn_in,
        stride: args.sample_every,
        replicas: args.replicas,
        seed,
        estimator: args.estimator,
        vertices: args.vertex.map(VertexSelection::One),
    };
    let output = simulate(&g, &initial, &plan)?;
    let n = g.vertex_count();
    let m = initial.total();
    let meta = RunMetadata {
        model: args.model.number(),
        graph: args.graph.clone(),
        n,
        m,
        t: m as f64 / n as f64,
        initial: args.init.clone(),
        estimator: args.estimator.name().to_string(),
        steps: args.steps,
        burn_in: output.burn_in,
        stride: output.stride,
        replicas: args.replicas,
        seed,
        pooled: output.pooled(),
        vertex: match output.vertices {
            VertexSelection::All => None,
            VertexSelection::One(x) => Some(x),
        },
        samples: output.histogram.total(),
    };
    Ok((g, output, meta))
}

/// Exact marginal at `x` and the matching limit curve, both over `0..=m`
/// (limit curves are evaluated on the same range).
fn marginal_and_limit(
    model: ModelKind,
    g: Option<&Graph>,
    n: usize,
    x: Vertex,
    m: u64,
    limit: LimitCurve,
) -> Result<(DollarMarginal, Vec<f64>)> {
    let t = m as f64 / n as f64;
    Ok(match model {
        ModelKind::EdgeUniform => {
            let exact = DollarMarginal::model1(n, m, NumericMode::default());
            let curve = match limit {
                LimitCurve::Default => model1_limit_f64(t, m),
                LimitCurve::Exponential => (0..=m)
                    .map(|d| dollarwalk::exact_dist::exponential_density(t, d as f64))
                    .collect(),
            };
            (exact, curve)
        }
        ModelKind::DollarUniform => {
            if limit == LimitCurve::Exponential {
                bail!("the exponential curve applies to model 1 only");
            }
            let g = g.ok_or_else(|| anyhow!("model 2 needs --graph"))?;
            let exact = DollarMarginal::model2(g, x, m, NumericMode::default());
            // Poisson with the vertex's mean M * deg(x) / Σ deg; equals T on
            // regular graphs.
            let mean = m as f64 * rational_to_f64(&dollarwalk::exact_dist::bill_marginal(g, x));
            (exact, poisson_f64(mean, m))
        }
    })
}

fn parse_vertex(text: &str, g: Option<&Graph>) -> Result<Vertex> {
    if text == "center" {
        return match g {
            Some(g) if g.family() == Family::Star => Ok(0),
            _ => bail!("`center` is only defined for star graphs"),
        };
    }
    text.parse().map_err(|_| anyhow!("invalid vertex `{text}`"))
}

fn cmd_exact(args: &ExactArgs) -> Result<()> {
    let g = args.graph.as_deref().map(Graph::load).transpose()?;
    let n = match (&g, args.n) {
        (Some(g), None) => g.vertex_count(),
        (None, Some(n)) => n,
        (Some(g), Some(n)) if g.vertex_count() == n => n,
        (Some(_), Some(_)) => bail!("--n disagrees with the graph size"),
        (None, None) => bail!("give --n or --graph"),
    };
    if n < 2 {
        bail!("need at least two agents");
    }
    let x = parse_vertex(&args.vertex, g.as_ref())?;
    if x as usize >= n {
        bail!("vertex {x} out of range");
    }
    let d_max = args.d_max.unwrap_or(args.m);
    if args.d_min > d_max {
        bail!("empty d-range {}..={}", args.d_min, d_max);
    }
    let (exact, curve) = marginal_and_limit(args.model, g.as_ref(), n, x, args.m, args.limit)?;
    let t = args.m as f64 / n as f64;
    let mut csv = String::from("d,finite_N_marginal,limit_curve\n");
    for d in args.d_min..=d_max {
        let limit_value = if d as usize >= curve.len() {
            // Beyond M the finite law vanishes; the curves are still defined.
            match (args.model, args.limit) {
                (ModelKind::EdgeUniform, LimitCurve::Default) => {
                    dollarwalk::exact_dist::model1_marginal_limit(t, d)
                }
                (ModelKind::EdgeUniform, LimitCurve::Exponential) => {
                    dollarwalk::exact_dist::exponential_density(t, d as f64)
                }
                (ModelKind::DollarUniform, _) => 0.0,
            }
        } else {
            curve[d as usize]
        };
        csv.push_str(&format!(
            "{},{},{}\n",
            d,
            exact.get_f64(d as usize),
            limit_value
        ));
    }
    emit(args.out.as_deref(), &csv)
}

fn cmd_figure(args: &RunArgs, limit: LimitCurve) -> Result<()> {
    let (g, output, meta) = run_simulation(args)?;
    let x = match output.vertices {
        VertexSelection::All => 0,
        VertexSelection::One(x) => x,
    };
    let (exact, curve) = marginal_and_limit(args.model, Some(&g), meta.n, x, meta.m, limit)?;
    let exact = exact.to_f64_vec();
    // Cover the histogram and all but a 1e-12 tail of the exact law.
    let mut acc = 0.0;
    let body = exact
        .iter()
        .position(|p| {
            acc += p;
            acc >= 1.0 - 1e-12
        })
        .map_or(exact.len(), |d| d + 1);
    let rows = body.max(output.histogram.len());
    let csv = figure_csv(&output.histogram, &exact, &curve, rows);

    let mut report = serde_json::to_value(&meta)?;
    if !output.histogram.is_empty() {
        let empirical = output.histogram.probabilities();
        report["tv_to_exact"] = tv_distance(&empirical, &exact)?.into();
    }
    write_pair(&args.out, &csv, &serde_json::to_string_pretty(&report)?)
}
