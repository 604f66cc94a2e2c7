use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cdfield::latent::sample_dataset;
use cdfield::likelihood::{bidirected_width, min_fill_order, row_log_densities, EliminationPlan};
use cdfield::mcmc::{
    run_collapsed, run_continuous_latent, run_discrete_latent, summarize, RunError, SamplerConfig, SamplerKind, Trace,
};
use cdfield::{chain_model, cluster_pair_model};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Loaded, ModelConfig};
use crate::data::{model_rows, pseudo_observations, read_table, write_table};
use crate::error::{CliError, CliResult};

fn create(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> CliResult<()> {
    write_table(create(path)?, header, rows).map_err(|e| crate::data::csv_error(path, e))
}

fn load(model_path: &Path) -> CliResult<Loaded> {
    ModelConfig::read(model_path)?.load()
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

/// `path` with `suffix` appended to the file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn transform(input: &Path, out: &Path) -> CliResult<()> {
    let table = read_table(input)?;
    let pseudo = pseudo_observations(&table)?;
    write_csv(out, &pseudo.header, &pseudo.rows)
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    rows: usize,
    seed: u64,
    model_hash: &'a str,
}

pub fn simulate(model_path: &Path, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    let loaded = load(model_path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = sample_dataset(&loaded.model, n, &mut rng)?;
    write_csv(out, &loaded.variables, &rows)?;
    let hash = loaded.model.canonical_hash();
    let meta = SimulationMeta {
        rows: n,
        seed,
        model_hash: &hash,
    };
    let meta_path = sidecar(out, ".meta.json");
    let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    text.push('\n');
    std::fs::write(&meta_path, text).map_err(|e| CliError::io(&meta_path, e))
}

pub fn density<W: Write>(model_path: &Path, data_path: &Path, treewidth_cap: usize, mut stdout: W) -> CliResult<()> {
    let loaded = load(model_path)?;
    let table = read_table(data_path)?;
    let rows = model_rows(&table, &loaded.variables, data_path)?;
    let plan = EliminationPlan::new(&loaded.model, &min_fill_order(&loaded.model), treewidth_cap)?;
    let values = row_log_densities(&loaded.model, &plan, &rows)?;
    writeln!(stdout, "row,log_density").map_err(stdout_err)?;
    let mut total = 0.0;
    for (r, v) in values.iter().enumerate() {
        writeln!(stdout, "{},{v}", r + 1).map_err(stdout_err)?;
        total += v;
    }
    writeln!(stdout, "total,{total}").map_err(stdout_err)
}

pub fn graph<W: Write>(model_path: &Path, mut stdout: W) -> CliResult<()> {
    let loaded = load(model_path)?;
    let m = &loaded.model;
    let names = &loaded.variables;
    let edges: Vec<String> = m
        .bidirected_edges()
        .iter()
        .map(|&(a, b)| format!("{} -- {}", names[a], names[b]))
        .collect();
    let mut text = String::new();
    let listed = if edges.is_empty() {
        "(no edges)".to_string()
    } else {
        edges.join(", ")
    };
    writeln!(text, "{listed}; width {}", bidirected_width(m)).unwrap();
    writeln!(text, "factors: {}", m.num_factors()).unwrap();
    for (j, f) in m.factors().iter().enumerate() {
        let scope: Vec<&str> = f.scope().iter().map(|&i| names[i].as_str()).collect();
        let family = match f.copula().theta() {
            Some(t) => format!("clayton theta={t}"),
            None => "independence".to_string(),
        };
        writeln!(text, "  {}: {family} over {}", loaded.factor_names[j], scope.join(", ")).unwrap();
    }
    writeln!(text, "indicator domains:").unwrap();
    for (i, domain) in m.z_domains().iter().enumerate() {
        let ds: Vec<&str> = domain.iter().map(|&j| loaded.factor_names[j].as_str()).collect();
        writeln!(text, "  {}: {}", names[i], ds.join(", ")).unwrap();
    }
    let components = m.components();
    writeln!(text, "components: {}", components.len()).unwrap();
    for c in &components {
        let vs: Vec<&str> = c.iter().map(|&i| names[i].as_str()).collect();
        writeln!(text, "  {{{}}}", vs.join(", ")).unwrap();
    }
    writeln!(text, "summation width: {}", min_fill_order(m).width()).unwrap();
    stdout.write_all(text.as_bytes()).map_err(stdout_err)
}

pub enum Template {
    Chain { p: usize },
    ClusterPair { assignment: Vec<usize> },
}

pub fn template<W: Write>(structure: &Template, theta: f64, out: Option<&Path>, mut stdout: W) -> CliResult<()> {
    let model = match structure {
        Template::Chain { p } => chain_model(*p, &vec![theta; p.saturating_sub(1)])?,
        Template::ClusterPair { assignment } => {
            let c = assignment.iter().max().map_or(0, |m| m + 1);
            cluster_pair_model(assignment, &vec![theta; c + c * c.saturating_sub(1) / 2])?
        }
    };
    let names: Vec<String> = (1..=model.p()).map(|i| format!("U{i}")).collect();
    let mut json = ModelConfig::from_model(&model, &names, None).to_json();
    json.push('\n');
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| CliError::io(path, e)),
        None => stdout.write_all(json.as_bytes()).map_err(stdout_err),
    }
}

pub struct FitArgs {
    pub model: PathBuf,
    pub data: PathBuf,
    pub sampler: SamplerKind,
    pub config: SamplerConfig,
    pub out: PathBuf,
}

fn trace_rows(trace: &Trace) -> Vec<Vec<f64>> {
    trace
        .iterations
        .iter()
        .zip(&trace.thetas)
        .zip(&trace.log_post)
        .map(|((&it, th), &lp)| {
            let mut row = Vec::with_capacity(th.len() + 2);
            row.push(it as f64);
            row.extend_from_slice(th);
            row.push(lp);
            row
        })
        .collect()
}

fn write_trace(path: &Path, header: &[String], trace: &Trace, failure: Option<&RunError>) -> CliResult<()> {
    let mut buf = Vec::new();
    write_table(&mut buf, header, &trace_rows(trace)).expect("writing to memory");
    if let Some(e) = failure {
        writeln!(buf, "FAILED: {e}").expect("writing to memory");
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// Run summary. Everything here is reproducible from the seed.
fn summary_text(trace: &Trace, names: &[String]) -> CliResult<String> {
    let meta = &trace.meta;
    let c = &meta.config;
    let mut s = String::new();
    writeln!(s, "sampler: {} ({})", meta.sampler, meta.sampler.target()).unwrap();
    writeln!(s, "model hash: {}", meta.model_hash).unwrap();
    writeln!(s, "seed: {}", c.seed).unwrap();
    writeln!(
        s,
        "iterations: {}, burn-in: {}, thinning: {}",
        c.iterations, c.burn_in, c.thinning
    )
    .unwrap();
    writeln!(s, "rows: {}", trace.len()).unwrap();
    if trace.is_empty() {
        return Ok(s);
    }
    let summary = summarize(trace)?;
    writeln!(
        s,
        "{:<20} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "parameter", "mean", "sd", "q2.5", "q50", "q97.5", "ess"
    )
    .unwrap();
    for p in &summary.params {
        let ess = match p.ess {
            Some(e) if e.degenerate => format!("{:.1}*", e.value),
            Some(e) => format!("{:.1}", e.value),
            None => "-".to_string(),
        };
        writeln!(
            s,
            "{:<20} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10}",
            format!("theta_{}", names[p.factor]),
            p.mean,
            p.sd,
            p.q025,
            p.q50,
            p.q975,
            ess
        )
        .unwrap();
    }
    if summary.params.iter().any(|p| p.ess.is_some_and(|e| e.degenerate)) {
        writeln!(s, "* constant column").unwrap();
    }
    let acc = &summary.acceptance;
    let per_update = c.iterations.max(1) as f64;
    let evals: Vec<String> = acc
        .slice_evaluations
        .iter()
        .map(|&e| format!("{:.2}", e as f64 / per_update))
        .collect();
    writeln!(s, "slice evaluations per update: {}", evals.join(", ")).unwrap();
    writeln!(s, "slice collapses: {:?}", acc.slice_collapses).unwrap();
    if !acc.rw_proposed.is_empty() {
        let rates: Vec<String> = acc
            .rw_rates()
            .iter()
            .zip(names)
            .map(|(r, n)| format!("{n}={r:.3}"))
            .collect();
        writeln!(s, "latent acceptance: {}", rates.join(", ")).unwrap();
    }
    Ok(s)
}

pub fn fit<W: Write>(args: &FitArgs, mut stdout: W) -> CliResult<()> {
    let loaded = load(&args.model)?;
    let table = read_table(&args.data)?;
    let rows = model_rows(&table, &loaded.variables, &args.data)?;
    if args.sampler == SamplerKind::ContinuousLatent && !loaded.model.all_clayton() {
        return Err(CliError::Validation(
            "the continuous sampler needs every factor to be clayton".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.config.seed);
    let run = match args.sampler {
        SamplerKind::Collapsed => run_collapsed,
        SamplerKind::DiscreteLatent => run_discrete_latent,
        SamplerKind::ContinuousLatent => run_continuous_latent,
    };
    let start = Instant::now();
    let result = run(&loaded.model, &rows, &loaded.prior, &args.config, &mut rng);
    let elapsed = start.elapsed().as_secs_f64();

    let (trace, failure) = match result {
        Ok(t) => (t, None),
        Err(RunError {
            partial: None, error, ..
        }) => return Err(error.into()),
        Err(mut e) => (*e.partial.take().expect("partial trace"), Some(e)),
    };
    let mut header = vec!["iter".to_string()];
    header.extend(
        trace
            .meta
            .factors
            .iter()
            .map(|&j| format!("theta_{}", loaded.factor_names[j])),
    );
    header.push("log_post".into());
    write_trace(&args.out, &header, &trace, failure.as_ref())?;

    let mut text = summary_text(&trace, &loaded.factor_names)?;
    if let Some(e) = &failure {
        writeln!(text, "FAILED: {e}").unwrap();
    }
    let summary_path = sidecar(&args.out, ".summary.txt");
    std::fs::write(&summary_path, &text).map_err(|e| CliError::io(&summary_path, e))?;
    writeln!(stdout, "{text}wallclock: {elapsed:.3} s").map_err(stdout_err)?;

    match failure {
        None => Ok(()),
        Some(e) => Err(e.error.into()),
    }
}
