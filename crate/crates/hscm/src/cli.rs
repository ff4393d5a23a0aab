//! Subcommands of the `hscm` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hscm_core::simgen::Standardize;
use hscm_core::{
    do_intervention, estimate, EstimateOptions, HscmModel, InterventionRequest, NodeId, NoiseFamily, OutcomeLevel,
    SimConfig,
};
use serde::Serialize;

use crate::bench;
use crate::config::{self, BenchmarkConfig};
use crate::csvio;
use crate::error::{AppError, Result};
use crate::formats;
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "hscm", version, about = "Hierarchical causal discovery for group/unit data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a hierarchical DAG and its structural equations from CSV data.
    Discover(DiscoverArgs),
    /// Generate a synthetic dataset with known structure.
    Simulate(SimulateArgs),
    /// Simulate a hard intervention from a fitted model.
    Intervene(InterveneArgs),
    /// Run the synthetic benchmark and write SHD/RMSE summaries.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub groups: PathBuf,
    #[arg(long)]
    pub units: PathBuf,
    /// Second grouping factor; enables W-level estimation.
    #[arg(long)]
    pub factor2: Option<PathBuf>,
    /// TOML file with estimation options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub skip_group_dag: bool,
    #[arg(long)]
    pub group_specific: bool,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_dot: Option<PathBuf>,
    /// Estimated DAG as a JSON edge list.
    #[arg(long)]
    pub out_graph: Option<PathBuf>,
    /// Defaults to `<out-model>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StandardizeArg {
    Global,
    WithinGroup,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML file with generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Units per group.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of groups.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[arg(long, value_enum)]
    pub standardize: Option<StandardizeArg>,
    #[arg(long)]
    pub group_specific: bool,
    #[arg(long)]
    pub second_factor: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SummaryArg {
    Group,
    Unit,
}

#[derive(Debug, Args)]
pub struct InterveneArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub groups: PathBuf,
    #[arg(long)]
    pub units: PathBuf,
    #[arg(long)]
    pub factor2: Option<PathBuf>,
    /// Variable to intervene on, e.g. Z1 or X2.
    #[arg(long)]
    pub target: String,
    #[arg(long, allow_hyphen_values = true)]
    pub value: f64,
    /// Simulated subgroups per group.
    #[arg(long = "M", default_value_t = 3)]
    pub subgroups: usize,
    /// Simulated units per subgroup.
    #[arg(long = "N", default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Level of the variables summarized in summary.json.
    #[arg(long, value_enum, default_value = "unit")]
    pub summary: SummaryArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// TOML file with `settings`, `replicates`, `seed` and `estimate`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Use the 32-setting standard grid instead of configured settings.
    #[arg(long)]
    pub paper_grid: bool,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Discover(a) => discover(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Intervene(a) => intervene(&a),
        Command::Benchmark(a) => benchmark(&a),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn check_overwrite(paths: &[PathBuf], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(AppError::Usage(format!(
            "{} already exists; pass --force to overwrite",
            p.display()
        ))),
        None => Ok(()),
    }
}

pub fn discover_options(a: &DiscoverArgs) -> Result<EstimateOptions> {
    let mut opts: EstimateOptions = config::load(a.config.as_deref())?;
    if let Some(alpha) = a.alpha {
        opts.alpha = alpha;
    }
    opts.skip_group_dag |= a.skip_group_dag;
    opts.group_specific_functions |= a.group_specific;
    opts.second_factor = a.factor2.is_some();
    opts.validate()?;
    Ok(opts)
}

pub fn model_json(model: &HscmModel) -> String {
    serde_json::to_string_pretty(model).expect("models serialize") + "\n"
}

pub fn read_model(path: &Path) -> Result<HscmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::schema(path, format!("invalid model JSON: {e}")))
}

fn discover(a: &DiscoverArgs) -> Result<()> {
    let start = Instant::now();
    let opts = discover_options(a)?;
    let data = csvio::read_dataset(&a.groups, &a.units, a.factor2.as_deref())?;
    let model = estimate(&data, &opts)?;
    for (node, w) in model.warnings() {
        eprintln!("warning: {node}: {w:?}");
    }
    let dag = model.full_dag();
    write(&a.out_model, &model_json(&model))?;
    let mut outputs = vec![a.out_model.as_path()];
    if let Some(p) = &a.out_dot {
        write(p, &formats::to_dot(&dag))?;
        outputs.push(p);
    }
    if let Some(p) = &a.out_graph {
        write(p, &formats::to_graph_json(&dag))?;
        outputs.push(p);
    }
    let mut inputs = vec![a.groups.as_path(), a.units.as_path()];
    inputs.extend(a.factor2.as_deref());
    let manifest = RunManifest::new("discover", &opts, None).finish(&inputs, &outputs, start.elapsed())?;
    manifest.write(
        &a.manifest
            .clone()
            .unwrap_or_else(|| sibling(&a.out_model, ".manifest.json")),
    )?;
    println!("{} edges; model written to {}", dag.edge_count(), a.out_model.display());
    Ok(())
}

pub fn simulate_config(a: &SimulateArgs) -> Result<SimConfig> {
    let mut c: SimConfig = config::load(a.config.as_deref())?;
    macro_rules! take {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { c.$f = v; } )* };
    }
    take!(n, m, p, q, r, seed);
    if let Some(noise) = a.noise {
        c.noise = match noise {
            NoiseArg::Gaussian => NoiseFamily::GaussianStd,
            NoiseArg::Uniform => NoiseFamily::UniformPm1,
        };
    }
    if let Some(s) = a.standardize {
        c.standardize = match s {
            StandardizeArg::Global => Standardize::Global,
            StandardizeArg::WithinGroup => Standardize::WithinGroup,
        };
    }
    c.group_specific |= a.group_specific;
    c.second_factor |= a.second_factor;
    c.validate()?;
    Ok(c)
}

/// Everything known about a simulated dataset except the data itself.
#[derive(Serialize)]
struct TruthRecord<'a> {
    config: &'a SimConfig,
    noise: &'static str,
    dag: &'a hscm_core::Dag,
    mechanisms: &'a [hscm_core::simgen::EdgeMechanism],
    latent: &'a [Vec<f64>],
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = simulate_config(a)?;
    let dir = &a.out_dir;
    let mut files = vec![dir.join("groups.csv"), dir.join("units.csv")];
    if cfg.second_factor {
        files.push(dir.join("factor2.csv"));
    }
    files.extend([dir.join("truth.json"), dir.join("truth.dot"), dir.join("manifest.json")]);
    check_overwrite(&files, a.force)?;

    let truth = hscm_core::generate(&cfg)?;
    write(&files[0], &csvio::groups_csv(&truth.data))?;
    write(&files[1], &csvio::units_csv(&truth.data))?;
    if let Some(text) = csvio::factor2_csv(&truth.data) {
        write(&files[2], &text)?;
    }
    let record = TruthRecord {
        config: &cfg,
        noise: cfg.noise.name(),
        dag: &truth.dag,
        mechanisms: &truth.mechanisms,
        latent: &truth.latent,
    };
    let n = files.len();
    write(
        &files[n - 3],
        &(serde_json::to_string_pretty(&record).expect("serializable") + "\n"),
    )?;
    write(&files[n - 2], &formats::to_dot(&truth.dag))?;
    let outputs: Vec<&Path> = files[..n - 1].iter().map(PathBuf::as_path).collect();
    RunManifest::new("simulate", &cfg, Some(cfg.seed))
        .finish(&[], &outputs, start.elapsed())?
        .write(&files[n - 1])?;
    println!(
        "{} groups, {} units written to {}",
        truth.data.m(),
        truth.data.n_units(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SummaryRecord {
    target: NodeId,
    value: f64,
    subgroups: usize,
    replicates: usize,
    seed: u64,
    level: OutcomeLevel,
    variables: Vec<hscm_core::intervene::VariableSummary>,
}

fn intervene(a: &InterveneArgs) -> Result<()> {
    let start = Instant::now();
    let model = read_model(&a.model)?;
    let data = csvio::read_dataset(&a.groups, &a.units, a.factor2.as_deref())?;
    let target: NodeId = a.target.parse().map_err(|_| {
        let names: Vec<String> = model.counts.nodes().iter().map(NodeId::to_string).collect();
        AppError::Usage(format!(
            "unknown target {:?}; valid variables: {}",
            a.target,
            names.join(", ")
        ))
    })?;
    let req = InterventionRequest {
        target,
        value: a.value,
        subgroups: a.subgroups,
        replicates: a.replicates,
        seed: a.seed,
    };
    let level = match a.summary {
        SummaryArg::Group => OutcomeLevel::Group,
        SummaryArg::Unit => OutcomeLevel::Unit,
    };
    let dir = &a.out_dir;
    let files = [
        dir.join("ztilde.csv"),
        dir.join("xtilde.csv"),
        dir.join("summary.json"),
        dir.join("manifest.json"),
    ];
    check_overwrite(&files, a.force)?;
    let res = do_intervention(&model, &data, &req)?;
    let summary = SummaryRecord {
        target,
        value: a.value,
        subgroups: a.subgroups,
        replicates: a.replicates,
        seed: a.seed,
        level,
        variables: res.summary(level)?,
    };
    write(&files[0], &csvio::ztilde_csv(&res, &data.group_labels))?;
    write(&files[1], &csvio::xtilde_csv(&res, &data.group_labels))?;
    write(
        &files[2],
        &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"),
    )?;
    let mut inputs = vec![a.model.as_path(), a.groups.as_path(), a.units.as_path()];
    inputs.extend(a.factor2.as_deref());
    let outputs: Vec<&Path> = files[..3].iter().map(PathBuf::as_path).collect();
    RunManifest::new("intervene", &req, Some(a.seed))
        .finish(&inputs, &outputs, start.elapsed())?
        .write(&files[3])?;
    println!(
        "do({target} = {}): {} group rows, {} unit rows written to {}",
        a.value,
        res.group_rows(),
        res.unit_rows(),
        dir.display()
    );
    Ok(())
}

pub fn benchmark_config(a: &BenchmarkArgs) -> Result<BenchmarkConfig> {
    let mut c: BenchmarkConfig = config::load(a.config.as_deref())?;
    if let Some(r) = a.replicates {
        c.replicates = r;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if a.paper_grid {
        c.settings = SimConfig::paper_grid(c.seed);
    } else {
        for s in &mut c.settings {
            s.seed = c.seed;
        }
    }
    if c.settings.is_empty() {
        return Err(AppError::Usage(
            "no benchmark settings; pass --config or --paper-grid".into(),
        ));
    }
    Ok(c)
}

fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = benchmark_config(a)?;
    let rows = bench::run(&cfg.settings, cfg.replicates, &cfg.estimate, a.jobs)?;
    write(&a.out, &bench::to_csv(&rows))?;
    let mut inputs = Vec::new();
    inputs.extend(a.config.as_deref());
    RunManifest::new("benchmark", &cfg, Some(cfg.seed))
        .finish(&inputs, &[a.out.as_path()], start.elapsed())?
        .write(&a.manifest.clone().unwrap_or_else(|| sibling(&a.out, ".manifest.json")))?;
    for row in &rows {
        let c = &row.config;
        println!(
            "n={} m={} p={} q={} r={}: SHD {:.2} ({:.2}), failures {}",
            c.n, c.m, c.p, c.q, c.r, row.shd_mean, row.shd_se, row.failures
        );
    }
    Ok(())
}
