//! Command-line driver: sampling, tree draws, recombination chains,
//! scaling benchmarks, oracle checks and SVG plots.
//!
//! Outputs are deterministic for a fixed config and seed — byte-identical
//! except for wall-time fields, which live in clearly marked columns —
//! and every file starts with the artifact version and a hash of the
//! config that produced it. `TREESPLIT_THREADS` caps the worker pool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use treesplit::chains::Method;
use treesplit::oracle::{split_distribution_by_trees, split_distribution_closed_form};
use treesplit::stats::{chi_square_gof, log_log_slope};
use treesplit::walks::dual_wilson_tree;
use treesplit::{
    build_grid_region, grid_block, run_batch, run_chain, run_experiment, sample_balanced,
    sample_q_balanced, sample_ust, ExperimentConfig, PlanarRegion, PolicyParams, SampleOutcome,
    SampleStats, SamplerConfig, WalkRng,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "treesplit",
    version,
    about = "Tree-weighted balanced partitions of grid regions: samplers, chains, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw seeded balanced (or q-balanced) 2-splits as JSONL
    Sample(SampleArgs),
    /// Draw seeded uniform spanning trees as JSONL
    Ust(UstArgs),
    /// Run ReCom / RevReCom chains, emitting per-trial and averaged CSV
    Chain(ChainArgs),
    /// Measure walk-step and wall-time scaling over square grids
    Bench(BenchArgs),
    /// Compare sampler frequencies against the exact distribution
    OracleCheck(OracleCheckArgs),
    /// Render bench CSVs or partition/plan JSON to SVG
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct RegionArgs {
    /// Rectangular grid, e.g. 10x10 (width x height)
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(i32, i32)>,
    /// Region JSON file: {"vertices": [[x,y], ...], "weights": [w, ...]?}
    #[arg(long, conflicts_with = "grid")]
    region: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PolicyArgs {
    /// Walk scheduling policy
    #[arg(long, value_enum, default_value_t = PolicyChoice::Calibrated)]
    policy: PolicyChoice,
    /// Stage budget multiplier
    #[arg(long)]
    t_mult: Option<f64>,
    /// Stage budget cap factor
    #[arg(long)]
    t_cap: Option<f64>,
    /// Force the separator arm's epsilon instead of the policy default
    #[arg(long)]
    epsilon_override: Option<f64>,
    /// Skip the boundary-window feasibility precheck
    #[arg(long)]
    no_precheck: bool,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq, Debug)]
enum PolicyChoice {
    Paper,
    Calibrated,
    Random,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Number of independent draws
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Balance slack around half the total weight
    #[arg(long, default_value_t = 0)]
    q: u64,
    /// Output JSONL path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UstArgs {
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Number of districts
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 0)]
    q: u64,
    #[arg(long, value_enum, default_value_t = MethodChoice::Recom)]
    method: MethodChoice,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write trial 0's plan every N steps to --snapshots
    #[arg(long)]
    snapshot_every: Option<u64>,
    /// Snapshot JSONL path
    #[arg(long, requires = "snapshot_every")]
    snapshots: Option<PathBuf>,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq, Debug)]
enum MethodChoice {
    Recom,
    Revrecom,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    policy: PolicyArgs,
    /// Square grid side lengths
    #[arg(long, value_delimiter = ',', default_values_t = vec![32u32, 64, 128, 256, 512])]
    sizes: Vec<u32>,
    /// Calls per size per method
    #[arg(long, default_value_t = 5)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the scaling plot here
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[command(flatten)]
    region: RegionArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 0)]
    q: u64,
    #[arg(long, default_value_t = 20000)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Bench CSV to render as a log-log scaling plot
    #[arg(long, conflicts_with_all = ["partition", "plan"])]
    bench: Option<PathBuf>,
    /// Sample JSONL whose first non-bot record becomes a two-color map
    #[arg(long, requires = "grid", conflicts_with = "plan")]
    partition: Option<PathBuf>,
    /// Snapshot JSONL whose last record becomes a k-color map
    #[arg(long, requires = "grid")]
    plan: Option<PathBuf>,
    /// Grid of the rendered region, e.g. 10x10
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(i32, i32)>,
    /// Output SVG path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Errors and provenance.

enum CliError {
    /// Bad flags, parameters or input files: exit 2.
    Config(String),
    /// Structurally unusable region: exit 3.
    Region(String),
}

impl CliError {
    fn report(&self) -> ExitCode {
        match self {
            CliError::Config(m) => {
                eprintln!("error: {m}");
                ExitCode::from(2)
            }
            CliError::Region(m) => {
                eprintln!("error: {m}");
                ExitCode::from(3)
            }
        }
    }
}

fn io_err(e: std::io::Error, path: &std::path::Path) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

/// Everything that determines an output, echoed into its header.
#[derive(Serialize, Clone, Default)]
#[serde(rename_all = "camelCase")]
struct RunConfig {
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<String>,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_mult: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon_override: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    precheck: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshot_every: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sizes: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<u64>,
}

fn config_hash(cfg: &RunConfig) -> String {
    let canon = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canon.as_bytes());
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn jsonl_header(cfg: &RunConfig) -> String {
    serde_json::to_string(&serde_json::json!({
        "version": VERSION,
        "configHash": config_hash(cfg),
        "config": cfg,
    }))
    .expect("header serializes")
}

fn csv_header(cfg: &RunConfig) -> String {
    format!(
        "# version: {VERSION}\n# config-hash: {}\n# config: {}\n",
        config_hash(cfg),
        serde_json::to_string(cfg).expect("config serializes")
    )
}

fn svg_comment(cfg: &RunConfig) -> String {
    format!("<!-- version {VERSION} config-hash {} -->", config_hash(cfg))
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| io_err(e, p)),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Region loading and policy wiring.

fn parse_grid(s: &str) -> Result<(i32, i32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: i32 = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: i32 = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w < 1 || h < 1 {
        return Err(format!("grid sides must be positive, got {s:?}"));
    }
    Ok((w, h))
}

#[derive(serde::Deserialize)]
struct RegionFile {
    vertices: Vec<(i32, i32)>,
    weights: Option<Vec<u64>>,
}

fn load_region(args: &RegionArgs) -> Result<(PlanarRegion, String), CliError> {
    match (args.grid, &args.region) {
        (Some((w, h)), None) => Ok((grid_block(w, h), format!("{w}x{h}"))),
        (None, Some(path)) => {
            let raw = fs::read_to_string(path).map_err(|e| io_err(e, path))?;
            let file: RegionFile = serde_json::from_str(&raw)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let weights = match &file.weights {
                None => None,
                Some(ws) => {
                    if ws.len() != file.vertices.len() {
                        return Err(CliError::Config(format!(
                            "{}: {} weights for {} vertices",
                            path.display(),
                            ws.len(),
                            file.vertices.len()
                        )));
                    }
                    Some(file.vertices.iter().copied().zip(ws.iter().copied()).collect())
                }
            };
            let region = build_grid_region(&file.vertices, weights.as_ref())
                .map_err(|e| CliError::Region(e.to_string()))?;
            Ok((region, path.display().to_string()))
        }
        _ => Err(CliError::Config("exactly one of --grid / --region is required".into())),
    }
}

fn sampler_config(p: &PolicyArgs) -> SamplerConfig {
    let mut params = match p.policy {
        PolicyChoice::Paper => PolicyParams::paper(),
        PolicyChoice::Calibrated => PolicyParams::calibrated(),
        PolicyChoice::Random => PolicyParams::uniform_random(),
    };
    if let Some(m) = p.t_mult {
        params.t_mult = m;
    }
    if let Some(c) = p.t_cap {
        params.t_cap_factor = c;
    }
    if p.epsilon_override.is_some() {
        params.epsilon_override = p.epsilon_override;
    }
    SamplerConfig { policy: params, use_precheck: !p.no_precheck }
}

fn policy_name(p: &PolicyArgs) -> String {
    match p.policy {
        PolicyChoice::Paper => "paper",
        PolicyChoice::Calibrated => "calibrated",
        PolicyChoice::Random => "random",
    }
    .to_string()
}

fn policy_fields(cfg: &mut RunConfig, p: &PolicyArgs) {
    cfg.policy = Some(policy_name(p));
    cfg.t_mult = p.t_mult;
    cfg.t_cap = p.t_cap;
    cfg.epsilon_override = p.epsilon_override;
    cfg.precheck = Some(!p.no_precheck);
}

fn require_simply_connected(region: &PlanarRegion) -> Result<(), CliError> {
    if region.is_simply_connected() {
        Ok(())
    } else {
        Err(CliError::Region("region must be connected and hole-free".into()))
    }
}

// ---------------------------------------------------------------------------
// sample / ust

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SampleRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    side_a: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    side_b: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<[u64; 2]>,
    q_count: u64,
    bot: bool,
    seed: u64,
    stats: SampleStats,
}

fn sample_record(stream: u64, out: SampleOutcome) -> SampleRecord {
    match out.partition {
        Some(p) => SampleRecord {
            side_a: Some(p.side_a),
            side_b: Some(p.side_b),
            weights: Some([p.weight_a, p.weight_b]),
            q_count: out.q_count,
            bot: false,
            seed: stream,
            stats: out.stats,
        },
        None => SampleRecord {
            side_a: None,
            side_b: None,
            weights: None,
            q_count: 0,
            bot: true,
            seed: stream,
            stats: out.stats,
        },
    }
}

fn cmd_sample(a: &SampleArgs) -> Result<(), CliError> {
    let (region, region_name) = load_region(&a.region)?;
    require_simply_connected(&region)?;
    if 2 * a.q > region.total_weight() {
        return Err(CliError::Config(format!(
            "slack q = {} exceeds half the total weight {}",
            a.q,
            region.total_weight()
        )));
    }
    let cfg = sampler_config(&a.policy);
    let mut rc = RunConfig {
        command: "sample".into(),
        region: Some(region_name),
        seed: a.seed,
        n: Some(a.n),
        q: Some(a.q),
        ..Default::default()
    };
    policy_fields(&mut rc, &a.policy);

    let records = run_batch(a.n, a.seed, |i, rng| {
        let out = if a.q == 0 {
            sample_balanced(&region, &cfg, rng)
        } else {
            sample_q_balanced(&region, a.q, &cfg, rng)
        }
        .expect("region validated above");
        sample_record(i, out)
    });

    let mut body = jsonl_header(&rc);
    body.push('\n');
    let mut bots = 0u64;
    let mut stages = 0u64;
    let mut steps = 0u64;
    for r in &records {
        bots += u64::from(r.bot);
        stages += r.stats.stages;
        steps += r.stats.walk_steps;
        body.push_str(&serde_json::to_string(r).expect("record serializes"));
        body.push('\n');
    }
    emit(&a.out, &body)?;
    eprintln!(
        "{} draws: bot rate {:.4}, mean stages {:.2}, mean walk steps {:.1}",
        a.n,
        bots as f64 / a.n as f64,
        stages as f64 / a.n as f64,
        steps as f64 / a.n as f64
    );
    Ok(())
}

fn cmd_ust(a: &UstArgs) -> Result<(), CliError> {
    let (region, region_name) = load_region(&a.region)?;
    require_simply_connected(&region)?;
    let cfg = sampler_config(&a.policy);
    let mut rc = RunConfig {
        command: "ust".into(),
        region: Some(region_name),
        seed: a.seed,
        n: Some(a.n),
        ..Default::default()
    };
    policy_fields(&mut rc, &a.policy);

    #[derive(Serialize)]
    struct TreeRecord {
        seed: u64,
        tree: Vec<u32>,
        stats: SampleStats,
    }
    let records = run_batch(a.n, a.seed, |i, rng| {
        let (tree, stats) = sample_ust(&region, &cfg, rng).expect("region validated above");
        TreeRecord { seed: i, tree, stats }
    });

    let mut body = jsonl_header(&rc);
    body.push('\n');
    for r in &records {
        body.push_str(&serde_json::to_string(r).expect("record serializes"));
        body.push('\n');
    }
    emit(&a.out, &body)
}

// ---------------------------------------------------------------------------
// chain

fn cmd_chain(a: &ChainArgs) -> Result<(), CliError> {
    let (region, region_name) = load_region(&a.region)?;
    require_simply_connected(&region)?;
    let cfg = sampler_config(&a.policy);
    let method = match a.method {
        MethodChoice::Recom => Method::Recom,
        MethodChoice::Revrecom => Method::RevRecom,
    };
    let mut rc = RunConfig {
        command: "chain".into(),
        region: Some(region_name),
        seed: a.seed,
        q: Some(a.q),
        method: Some(method.to_string()),
        k: Some(a.k),
        steps: Some(a.steps),
        trials: Some(a.trials),
        snapshot_every: a.snapshot_every,
        ..Default::default()
    };
    policy_fields(&mut rc, &a.policy);

    let xc = ExperimentConfig {
        k: a.k,
        q: a.q,
        method,
        steps: a.steps,
        trials: a.trials,
        seed: a.seed,
        sampler: cfg.clone(),
    };
    let rows = run_experiment(&region, &xc).map_err(|e| CliError::Config(e.to_string()))?;

    let mut body = csv_header(&rc);
    body.push_str("trial,method,k,q,steps,accepted,plansWithNonSCPair,nonSCRecombinations,wallTimeMs\n");
    for r in &rows {
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.method,
            r.k,
            r.q,
            r.steps,
            r.accepted,
            r.plans_with_non_sc_pair,
            r.non_sc_recombinations,
            r.wall_time_ms
        );
    }
    let t = rows.len() as f64;
    let mean = |f: fn(&treesplit::TrialRow) -> u64| rows.iter().map(|r| f(r) as f64).sum::<f64>() / t;
    let _ = writeln!(
        body,
        "avg,{},{},{},{},{},{},{},{}",
        method,
        a.k,
        a.q,
        a.steps,
        mean(|r| r.accepted),
        mean(|r| r.plans_with_non_sc_pair),
        mean(|r| r.non_sc_recombinations),
        mean(|r| r.wall_time_ms)
    );
    for r in &rows {
        let _ = writeln!(
            body,
            "# trial {}: init={} distinctNonSCPlans={}",
            r.trial, r.init, r.distinct_non_sc_plans
        );
    }
    emit(&a.out, &body)?;

    if let (Some(every), Some(path)) = (a.snapshot_every, &a.snapshots) {
        if every == 0 {
            return Err(CliError::Config("--snapshot-every must be positive".into()));
        }
        // Replay trial 0's stream; cheap next to the experiment itself.
        let mut rng = WalkRng::new(a.seed, 0);
        let mut snaps = jsonl_header(&rc);
        snaps.push('\n');
        run_chain(&region, a.k, a.q, method, a.steps, &cfg, &mut rng, |s, plan| {
            if s % every == 0 {
                let districts: Vec<u32> = plan.assignment().iter().map(|d| d + 1).collect();
                snaps.push_str(
                    &serde_json::to_string(&serde_json::json!({
                        "step": s,
                        "assignment": districts,
                    }))
                    .expect("snapshot serializes"),
                );
                snaps.push('\n');
            }
        })
        .map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(path, snaps).map_err(|e| io_err(e, path))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench

fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.sizes.is_empty() || a.reps == 0 {
        return Err(CliError::Config("need at least one size and one rep".into()));
    }
    let cfg = sampler_config(&a.policy);
    let mut rc = RunConfig {
        command: "bench".into(),
        seed: a.seed,
        sizes: Some(a.sizes.clone()),
        reps: Some(a.reps),
        ..Default::default()
    };
    policy_fields(&mut rc, &a.policy);

    let mut body = csv_header(&rc);
    body.push_str("size,cells,method,rep,walkSteps,wallNs,bot\n");
    let mut series: BTreeMap<&'static str, Vec<(f64, f64)>> = BTreeMap::new();
    for (si, &size) in a.sizes.iter().enumerate() {
        let region = grid_block(size as i32, size as i32);
        let cells = region.cell_count() as f64;
        let base = a.seed.wrapping_add(1000 * si as u64);
        let probes: [(&'static str, Vec<(u64, u64, bool)>); 3] = [
            (
                "balanced",
                run_batch(a.reps, base, |_, rng| {
                    let t = std::time::Instant::now();
                    let out = sample_balanced(&region, &cfg, rng).expect("square grids are valid");
                    (out.stats.walk_steps, t.elapsed().as_nanos() as u64, out.partition.is_none())
                }),
            ),
            (
                "ust",
                run_batch(a.reps, base.wrapping_add(1), |_, rng| {
                    let t = std::time::Instant::now();
                    let (_, stats) = sample_ust(&region, &cfg, rng).expect("square grids are valid");
                    (stats.walk_steps, t.elapsed().as_nanos() as u64, false)
                }),
            ),
            (
                "dualWilson",
                run_batch(a.reps, base.wrapping_add(2), |_, rng| {
                    let t = std::time::Instant::now();
                    let (_, steps) = dual_wilson_tree(&region, rng);
                    (steps, t.elapsed().as_nanos() as u64, false)
                }),
            ),
        ];
        for (name, rows) in probes {
            for (rep, &(steps, ns, bot)) in rows.iter().enumerate() {
                let _ = writeln!(body, "{size},{cells},{name},{rep},{steps},{ns},{bot}");
            }
            let mean = rows.iter().map(|r| r.0 as f64).sum::<f64>() / rows.len() as f64;
            series.entry(name).or_default().push((cells, mean));
        }
    }
    let mut slopes: Vec<(String, f64)> = Vec::new();
    for (name, pts) in &series {
        if pts.len() >= 2 {
            let slope = log_log_slope(pts);
            let _ = writeln!(body, "# slope {name} = {slope:.4}");
            slopes.push((name.to_string(), slope));
        }
    }
    emit(&a.out, &body)?;

    if let Some(svg_path) = &a.svg {
        let named: Vec<(String, Vec<(f64, f64)>)> =
            series.iter().map(|(n, p)| (n.to_string(), p.clone())).collect();
        let svg = scaling_svg(&rc, &named, &slopes);
        fs::write(svg_path, svg).map_err(|e| io_err(e, svg_path))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle-check

fn cmd_oracle_check(a: &OracleCheckArgs) -> Result<(), CliError> {
    let (region, region_name) = load_region(&a.region)?;
    require_simply_connected(&region)?;
    if 2 * a.q > region.total_weight() {
        return Err(CliError::Config("slack exceeds half the total weight".into()));
    }
    let cfg = sampler_config(&a.policy);
    let mut rc = RunConfig {
        command: "oracle-check".into(),
        region: Some(region_name),
        seed: a.seed,
        n: Some(a.n),
        q: Some(a.q),
        ..Default::default()
    };
    policy_fields(&mut rc, &a.policy);

    let exact = if a.q == 0 {
        split_distribution_closed_form(&region)
    } else {
        split_distribution_by_trees(&region, a.q)
    }
    .map_err(|e| CliError::Config(format!("region too large for the oracle: {e}")))?;
    let (cells_f64, bot_prob) = exact.as_f64_cells();
    let mut sides: Vec<Vec<u32>> = cells_f64.iter().map(|(k, _)| k.clone()).collect();
    let mut probs: Vec<f64> = cells_f64.iter().map(|&(_, p)| p).collect();
    sides.push(Vec::new()); // bot cell
    probs.push(bot_prob);

    let keys = run_batch(a.n, a.seed, |_, rng| {
        let out = if a.q == 0 {
            sample_balanced(&region, &cfg, rng)
        } else {
            sample_q_balanced(&region, a.q, &cfg, rng)
        }
        .expect("region validated above");
        out.partition.map(|p| p.side_a)
    });
    let mut counts = vec![0u64; sides.len()];
    for k in keys {
        match k {
            None => *counts.last_mut().expect("bot cell exists") += 1,
            Some(side) => {
                let i = sides[..sides.len() - 1]
                    .iter()
                    .position(|s| s == &side)
                    .expect("sampler outputs are exact-support partitions");
                counts[i] += 1;
            }
        }
    }
    let res = chi_square_gof(&counts, &probs);
    let pass = res.p_value > 1e-3;

    let cells: Vec<serde_json::Value> = sides
        .iter()
        .zip(&probs)
        .zip(&counts)
        .map(|((side, p), &c)| {
            serde_json::json!({
                "side": if side.is_empty() { serde_json::Value::Null } else { serde_json::json!(side) },
                "expectedCount": p * a.n as f64,
                "observedCount": c,
            })
        })
        .collect();
    let report = serde_json::json!({
        "version": VERSION,
        "configHash": config_hash(&rc),
        "config": rc,
        "pass": pass,
        "pValue": res.p_value,
        "statistic": res.statistic,
        "df": res.df,
        "n": a.n,
        "cells": cells,
    });
    let mut body = serde_json::to_string_pretty(&report).expect("report serializes");
    body.push('\n');
    emit(&a.out, &body)?;
    if !pass {
        eprintln!("oracle check FAILED: p = {}", res.p_value);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// plot

fn cmd_plot(a: &PlotArgs) -> Result<(), CliError> {
    let rc = RunConfig { command: "plot".into(), ..Default::default() };
    let svg = if let Some(csv) = &a.bench {
        let raw = fs::read_to_string(csv).map_err(|e| io_err(e, csv))?;
        let (series, slopes) = parse_bench_csv(&raw)?;
        scaling_svg(&rc, &series, &slopes)
    } else if let Some(path) = &a.partition {
        let (w, h) = a.grid.expect("clap enforces --grid");
        let raw = fs::read_to_string(path).map_err(|e| io_err(e, path))?;
        let side_a = first_partition_side(&raw)?;
        let region = grid_block(w, h);
        let classes: Vec<usize> = (0..region.vertex_count() as u32)
            .map(|v| usize::from(side_a.binary_search(&v).is_err()))
            .collect();
        cell_map_svg(&rc, &region, &classes)
    } else if let Some(path) = &a.plan {
        let (w, h) = a.grid.expect("clap enforces --grid");
        let raw = fs::read_to_string(path).map_err(|e| io_err(e, path))?;
        let assignment = last_plan_assignment(&raw)?;
        let region = grid_block(w, h);
        if assignment.len() != region.vertex_count() {
            return Err(CliError::Config(format!(
                "plan labels {} vertices, grid has {}",
                assignment.len(),
                region.vertex_count()
            )));
        }
        let classes: Vec<usize> = assignment.iter().map(|&d| d.saturating_sub(1) as usize).collect();
        cell_map_svg(&rc, &region, &classes)
    } else {
        return Err(CliError::Config("one of --bench / --partition / --plan is required".into()));
    };
    emit(&a.out, &svg)
}

fn first_partition_side(raw: &str) -> Result<Vec<u32>, CliError> {
    for line in raw.lines() {
        let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else { continue };
        if v.get("bot").and_then(|b| b.as_bool()) == Some(false) {
            let side: Vec<u32> = v["sideA"]
                .as_array()
                .ok_or_else(|| CliError::Config("record lacks sideA".into()))?
                .iter()
                .filter_map(|x| x.as_u64().map(|n| n as u32))
                .collect();
            return Ok(side);
        }
    }
    Err(CliError::Config("no non-bot partition record found".into()))
}

fn last_plan_assignment(raw: &str) -> Result<Vec<u32>, CliError> {
    let mut last = None;
    for line in raw.lines() {
        let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else { continue };
        if let Some(arr) = v.get("assignment").and_then(|x| x.as_array()) {
            last = Some(arr.iter().filter_map(|x| x.as_u64().map(|n| n as u32)).collect());
        }
    }
    last.ok_or_else(|| CliError::Config("no snapshot record with an assignment found".into()))
}

fn parse_bench_csv(raw: &str) -> Result<(Vec<(String, Vec<(f64, f64)>)>, Vec<(String, f64)>), CliError> {
    // Rows: size,cells,method,rep,walkSteps,wallNs,bot
    let mut acc: BTreeMap<String, BTreeMap<u64, (f64, u64)>> = BTreeMap::new();
    for line in raw.lines() {
        if line.starts_with('#') || line.starts_with("size,") || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(CliError::Config(format!("bad bench row: {line:?}")));
        }
        let cells: f64 = f[1].parse().map_err(|_| CliError::Config(format!("bad cells: {line:?}")))?;
        let steps: f64 = f[4].parse().map_err(|_| CliError::Config(format!("bad steps: {line:?}")))?;
        let per = acc.entry(f[2].to_string()).or_default().entry(cells as u64).or_insert((0.0, 0));
        per.0 += steps;
        per.1 += 1;
    }
    if acc.is_empty() {
        return Err(CliError::Config("no bench rows found".into()));
    }
    let mut series = Vec::new();
    let mut slopes = Vec::new();
    for (name, by_cells) in acc {
        let pts: Vec<(f64, f64)> = by_cells
            .iter()
            .map(|(&c, &(sum, cnt))| (c as f64, sum / cnt as f64))
            .collect();
        if pts.len() >= 2 {
            slopes.push((name.clone(), log_log_slope(&pts)));
        }
        series.push((name, pts));
    }
    Ok((series, slopes))
}

// ---------------------------------------------------------------------------
// SVG rendering. Hand-emitted: a couple of polylines or a cell map.

const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#edc948", "#76b7b2", "#ff9da7",
    "#9c755f", "#bab0ac",
];

fn scaling_svg(
    rc: &RunConfig,
    series: &[(String, Vec<(f64, f64)>)],
    slopes: &[(String, f64)],
) -> String {
    let (w, h, ml, mb, mt, mr) = (640.0, 420.0, 70.0, 50.0, 20.0, 20.0);
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x.ln());
        x1 = x1.max(x.ln());
        y0 = y0.min(y.ln());
        y1 = y1.max(y.ln());
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| ml + (x.ln() - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y.ln() - y0) / (y1 - y0) * (h - mb - mt);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n{}\n",
        svg_comment(rc)
    );
    let _ = writeln!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#333\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{0}\" stroke=\"#333\"/>",
        h - mb,
        w - mr
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">cells (log)</text>\n\
         <text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">walk steps (log)</text>",
        (ml + w - mr) / 2.0,
        h - 12.0,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                px(x),
                py(y)
            );
        }
        let slope = slopes.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
        let label = match slope {
            Some(v) => format!("{name} (slope {v:.3})"),
            None => name.clone(),
        };
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{label}</text>",
            ml + 10.0,
            mt + 16.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn cell_map_svg(rc: &RunConfig, region: &PlanarRegion, classes: &[usize]) -> String {
    let cell = 24.0;
    let verts = region.vertices();
    let (mut x0, mut x1, mut y0, mut y1) = (i32::MAX, i32::MIN, i32::MAX, i32::MIN);
    for &(x, y) in verts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let w = f64::from(x1 - x0 + 1) * cell;
    let h = f64::from(y1 - y0 + 1) * cell;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\">\n{}\n",
        svg_comment(rc)
    );
    for (i, &(x, y)) in verts.iter().enumerate() {
        let fill = PALETTE[classes[i] % PALETTE.len()];
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"{fill}\" stroke=\"white\" stroke-width=\"1\"/>",
            f64::from(x - x0) * cell,
            f64::from(y1 - y) * cell,
        );
    }
    s.push_str("</svg>\n");
    s
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Sample(a) => cmd_sample(a),
        Cmd::Ust(a) => cmd_ust(a),
        Cmd::Chain(a) => cmd_chain(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::OracleCheck(a) => cmd_oracle_check(a),
        Cmd::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    #[cfg(feature = "parallel")]
    if let Ok(v) = std::env::var("TREESPLIT_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: TREESPLIT_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
