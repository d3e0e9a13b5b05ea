//! `patchrank` command-line interface.
//!
//! Exit status: 0 on success, 1 when the model or a request about it is
//! invalid, 2 when files, the network or the configuration fail.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use patchrank::enrich::{self, FixtureTransport, LiveConfig, LiveTransport, Transport};
use patchrank::graph::{build_dependence_graph, centrality, GraphScope};
use patchrank::model::{load_system_model, summary, to_inventory_json, validate_params};
use patchrank::rank::{rank_with_context, what_if_with_context, RankScope};
use patchrank::report::{self, OutputFormat};
use patchrank::risk::{RiskContext, RiskReport, VulnReport};
use patchrank::{Error, RiskParams, SystemModel};

#[derive(Parser)]
#[command(
    name = "patchrank",
    version,
    about = "Multi-level vulnerability risk scoring and patch ranking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an inventory against the model invariants.
    Validate {
        #[arg(long)]
        inventory: PathBuf,
    },
    /// Score the inventory at every level.
    Risk {
        #[command(flatten)]
        run: RunArgs,
        /// system, network, host:<id>, asset:<id> or component:<asset>/<id>
        #[arg(long, default_value = "system")]
        scope: String,
    },
    /// Rank patches by the risk they remove.
    Rank {
        #[command(flatten)]
        run: RunArgs,
        /// system, host:<id>, asset:<id> or component:<asset>/<id>
        #[arg(long, default_value = "system")]
        scope: String,
        /// Keep only the first N entries.
        #[arg(long)]
        top: Option<usize>,
        /// Print the per-CVE explanation after the table.
        #[arg(long)]
        explain: bool,
    },
    /// Risk before and after applying a set of patches.
    Whatif {
        #[command(flatten)]
        run: RunArgs,
        /// A patch as <asset>:<cve>; repeatable.
        #[arg(long = "patch")]
        patches: Vec<String>,
        /// Patch every vulnerability in the inventory.
        #[arg(long, conflicts_with = "patches")]
        all: bool,
    },
    /// Fill in CPEs and vulnerabilities from NVD, EPSS and a flags file.
    Enrich {
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Fixture)]
        mode: Mode,
        /// Directory of recorded responses (fixture mode) or where to record
        /// responses (live mode).
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// CSV of cve_id,exploit_exists,ransomware.
        #[arg(long)]
        flags: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Export a dependence graph.
    Graph {
        #[command(flatten)]
        run: RunArgs,
        /// system, host:<id> or asset:<id>
        #[arg(long, default_value = "system")]
        scope: String,
        #[arg(long = "as", value_enum, default_value_t = GraphFormat::Edges)]
        as_: GraphFormat,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    inventory: PathBuf,
    /// JSON file of parameter overrides.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Count each asset once across attack paths.
    #[arg(long, value_enum)]
    dedup_paths: Option<Toggle>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Structured,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => OutputFormat::Table,
            Format::Csv => OutputFormat::Csv,
            Format::Structured => OutputFormat::Structured,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Fixture,
    Live,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Edges,
    Matrix,
    /// Per-node degree, betweenness, PageRank and normalised score.
    Centrality,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(inner) if inner.is_environmental() => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn load(run: &RunArgs) -> Result<(SystemModel, RiskParams)> {
    let model = load_system_model(&run.inventory)?;
    let mut params = model.params.clone();
    if let Some(path) = &run.params {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        let overrides: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        params = params.with_overrides(&overrides)?;
    }
    if let Some(t) = run.dedup_paths {
        params.dedup_paths = matches!(t, Toggle::On);
    }
    for w in validate_params(&params)? {
        log::warn!("{w}");
    }
    Ok((model, params))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { inventory } => cmd_validate(&inventory),
        Command::Risk { run, scope } => cmd_risk(&run, &scope),
        Command::Rank {
            run,
            scope,
            top,
            explain,
        } => cmd_rank(&run, &scope, top, explain),
        Command::Whatif { run, patches, all } => cmd_whatif(&run, &patches, all),
        Command::Enrich {
            inventory,
            mode,
            fixtures,
            flags,
            output,
        } => cmd_enrich(&inventory, mode, fixtures, flags, &output),
        Command::Graph { run, scope, as_ } => cmd_graph(&run, &scope, as_),
    }
}

fn cmd_validate(inventory: &Path) -> Result<()> {
    let model = load_system_model(inventory)?;
    for w in validate_params(&model.params)? {
        println!("warning: {w}");
    }
    let counts: Vec<String> = summary(&model)
        .into_iter()
        .map(|(k, v)| format!("{v} {k}"))
        .collect();
    println!("ok: {} ({})", model.name, counts.join(", "));
    Ok(())
}

type VulnFilter = Box<dyn Fn(&VulnReport) -> bool>;

#[derive(Serialize)]
struct ScopedRisk<'a> {
    scope: String,
    risk: f64,
    vulnerabilities: Vec<&'a VulnReport>,
}

fn cmd_risk(run: &RunArgs, scope: &str) -> Result<()> {
    let (model, params) = load(run)?;
    let format = OutputFormat::from(run.format);
    if scope == "network" && model.entry_points.is_empty() {
        return Err(Error::NoEntryPoints.into());
    }
    let ctx = RiskContext::with_params(&model, params)?;
    let report = ctx.report();
    if scope == "system" {
        print!("{}", report::render_risk(&report, format));
        return Ok(());
    }
    if scope == "network" {
        let mut r = report.clone();
        r.vulnerabilities.retain(|v| v.network_occurrences > 0);
        print!("{}", network_view(&r, format));
        return Ok(());
    }
    let rank_scope = RankScope::parse(&model, scope)?;
    let (risk, keep): (f64, VulnFilter) = match rank_scope {
        RankScope::Asset(a) => {
            let id = model.assets[a].id.clone();
            (report.assets[a].risk, Box::new(move |v| v.asset == id))
        }
        RankScope::Host(h) => {
            let members = model.hosts[h].assets.clone();
            (
                report.hosts[h].risk,
                Box::new(move |v| members.contains(&v.asset)),
            )
        }
        RankScope::Component { asset, component } => {
            let a = model.assets[asset].id.clone();
            let c = model.assets[asset].components[component].id.clone();
            let total = report
                .vulnerabilities
                .iter()
                .filter(|v| v.asset == a && v.component == c)
                .fold(0.0, |acc, v| acc + v.breakdown.total);
            (total, Box::new(move |v| v.asset == a && v.component == c))
        }
        RankScope::System => unreachable!("handled above"),
    };
    let scoped = ScopedRisk {
        scope: scope.to_string(),
        risk,
        vulnerabilities: report.vulnerabilities.iter().filter(|v| keep(v)).collect(),
    };
    match format {
        OutputFormat::Structured => print!("{}", report::to_structured(&scoped)),
        OutputFormat::Csv => {
            let mut r = report.clone();
            r.vulnerabilities.retain(|v| keep(v));
            print!("{}", report::risk_csv(&r));
        }
        OutputFormat::Table => {
            println!("{} risk {:.4}", scoped.scope, scoped.risk);
            for v in &scoped.vulnerabilities {
                let b = &v.breakdown;
                println!(
                    "  {:<32} {:<16} direct {:>8.4}  indirect {:>8.4}  total {:>8.4}",
                    format!("{}/{}", v.asset, v.component),
                    b.cve_id,
                    b.direct,
                    b.indirect,
                    b.total
                );
            }
        }
    }
    Ok(())
}

fn network_view(r: &RiskReport, format: OutputFormat) -> String {
    #[derive(Serialize)]
    struct NetworkView<'a> {
        network_risk: f64,
        attack_paths: &'a [patchrank::risk::ScoredPath],
    }
    match format {
        OutputFormat::Structured => report::to_structured(&NetworkView {
            network_risk: r.network_risk,
            attack_paths: &r.attack_paths,
        }),
        OutputFormat::Csv => report::risk_csv(r),
        OutputFormat::Table => {
            let mut out = format!("network risk {:.4}\n", r.network_risk);
            for p in &r.attack_paths {
                out.push_str(&format!(
                    "  {} (weight {}, risk {:.4})\n",
                    p.path.nodes.join(" -> "),
                    p.path.total_weight,
                    p.risk
                ));
            }
            out
        }
    }
}

fn cmd_rank(run: &RunArgs, scope: &str, top: Option<usize>, explain: bool) -> Result<()> {
    let (model, params) = load(run)?;
    let scope = RankScope::parse(&model, scope)?;
    let ctx = RiskContext::with_params(&model, params)?;
    let mut ranking = rank_with_context(&ctx, scope);
    if let Some(n) = top {
        ranking.truncate(n);
    }
    let format = OutputFormat::from(run.format);
    print!("{}", report::render_ranking(&ranking, format));
    if explain && format == OutputFormat::Table {
        println!();
        print!("{}", report::ranking_explanations(&ranking));
    }
    Ok(())
}

fn parse_patch(s: &str) -> Result<(String, String)> {
    let (asset, cve) = s
        .split_once(':')
        .with_context(|| format!("patch '{s}' is not <asset>:<cve>"))
        .map_err(|e| Error::Config(format!("{e:#}")))?;
    Ok((asset.to_string(), cve.to_string()))
}

fn cmd_whatif(run: &RunArgs, patches: &[String], all: bool) -> Result<()> {
    let (model, params) = load(run)?;
    let pairs: Vec<(String, String)> = if all {
        let mut v: Vec<(String, String)> = model
            .vuln_keys()
            .into_iter()
            .map(|k| {
                (
                    model.assets[k.asset].id.clone(),
                    model.vulnerability(k).cve_id.clone(),
                )
            })
            .collect();
        v.dedup();
        v
    } else {
        patches.iter().map(|p| parse_patch(p)).collect::<Result<_>>()?
    };
    let ctx = RiskContext::with_params(&model, params)?;
    let report = what_if_with_context(&ctx, &pairs)?;
    print!("{}", report::render_whatif(&report, run.format.into()));
    Ok(())
}

fn cmd_enrich(
    inventory: &Path,
    mode: Mode,
    fixtures: Option<PathBuf>,
    flags: Option<PathBuf>,
    output: &Path,
) -> Result<()> {
    let model = load_system_model(inventory)?;
    let transport: Box<dyn Transport> = match mode {
        Mode::Fixture => {
            let dir = fixtures.ok_or_else(|| Error::Config("fixture mode needs --fixtures".into()))?;
            Box::new(FixtureTransport::new(dir))
        }
        Mode::Live => {
            let mut config = LiveConfig::from_env()?;
            config.record_dir = fixtures;
            Box::new(LiveTransport::new(config)?)
        }
    };
    let flag_map = match flags {
        Some(path) => enrich::load_flags(&path)?,
        None => Default::default(),
    };
    let (enriched, log) = enrich::enrich_model(&model, transport.as_ref(), &flag_map)?;
    for w in &log.warnings {
        eprintln!("warning: {w}");
    }
    let mut text = to_inventory_json(&enriched);
    text.push('\n');
    std::fs::write(output, text).map_err(|source| Error::Io {
        path: output.to_path_buf(),
        source,
    })?;
    println!(
        "wrote {} ({} vulnerabilities)",
        output.display(),
        enriched.vuln_count()
    );
    Ok(())
}

fn cmd_graph(run: &RunArgs, scope: &str, format: GraphFormat) -> Result<()> {
    let (model, params) = load(run)?;
    let scope = GraphScope::parse(&model, scope)?;
    let g = build_dependence_graph(&model, scope, &params)?;
    match format {
        GraphFormat::Edges => print!("{}", g.edge_list_text()),
        GraphFormat::Matrix => print!("{}", g.matrix_text()),
        GraphFormat::Centrality => {
            let s = centrality(&g, params.pagerank_damping)?;
            println!("node degree betweenness pagerank normalized");
            for i in 0..g.node_count() {
                println!(
                    "{} {:.6} {:.6} {:.6} {:.6}",
                    g.label(i),
                    s.degree[i],
                    s.betweenness[i],
                    s.pagerank[i],
                    s.normalized[i]
                );
            }
        }
    }
    Ok(())
}
