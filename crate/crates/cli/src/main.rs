//! `polaron`: command-line front end of the dispersion-bound pipeline.
//!
//! Subcommands solve the Pekar problem into a checksummed artifact and derive
//! traces, bound tables, weight integrals, invariant reports and oracle
//! comparisons from it. Every derived output embeds the checksum of the
//! artifact it came from, and every command writes `manifest_<command>.json`
//! listing the files it emitted.
//!
//! Exit codes: 0 success, 1 check or provenance failure, 2 usage error,
//! 3 numerical error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use polaron_core::artifact::{load_pekar, read_document, save_pekar, write_document, Manifest, PekarArtifact};
use polaron_core::bogoliubov::{
    assemble_hessians, build_model, spectra_csv, trace_correction, trace_csv, HessianModel, HessianSet, TraceReport,
};
use polaron_core::checks::{
    bogoliubov_suite, hessian_suite, oracle_rows, pekar_suite, spectrum_summary, weights_suite, Check, OracleRow,
};
use polaron_core::config::RunConfig;
use polaron_core::dispersion_bound::{assemble_bound, conjecture_envelope, BoundConstants};
use polaron_core::gaussian_weights::{
    displacement_norms, gaussian_ladder, minus_three_halves, norm_ladder, q_monotonicity, weight_function, GFunction,
    WeightKernel, YGrid,
};
use polaron_core::pekar_scf::{solve_pekar, PekarSolution};
use polaron_core::radial_core::build_grid;
use polaron_core::sector_operators::FieldGrid;
use polaron_core::Error;

/// Format tag of persisted trace reports.
const TRACES_FORMAT: &str = "polaron-traces";

#[derive(Parser, Debug)]
#[command(name = "polaron", version, about = "Strong-coupling polaron energy-momentum bound pipeline")]
struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Pekar artifact to read.
    #[arg(long, global = true)]
    artifact: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Comma-separated couplings.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Comma-separated momentum cutoffs (`inf` allowed).
    #[arg(long, global = true)]
    k_cutoff: Option<String>,
    /// Highest explicit angular-momentum sector.
    #[arg(long, global = true)]
    l_max: Option<usize>,
    /// Comma-separated total momenta.
    #[arg(long, global = true)]
    p_list: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the Pekar problem and persist the artifact.
    Solve,
    /// Run invariant suites against an artifact.
    Verify {
        /// Suite to run.
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Trace corrections over the cutoff ladder.
    Traces,
    /// Energy-momentum bound tables.
    Bound {
        /// Trace report written by `traces`; computed on the fly if absent.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Displacement norms, weight functions and leading-order integrals.
    Weights,
    /// Truncated-Fock oracle against the closed form and the real Hessian.
    Oracle {
        /// Number of random principal submatrices.
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Pekar,
    Hessian,
    Bogoliubov,
    Weights,
    All,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Checks(usize),
    Usage(anyhow::Error),
    Provenance(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::Io(_) => Failure::Usage(e.into()),
            Error::Provenance(_) | Error::Json(_) => Failure::Provenance(e.into()),
            _ => Failure::Numerical(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(inner) => inner.into(),
            Err(e) => Failure::Usage(e),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn config_from(cli: &Cli) -> Outcome<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading configuration {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.alpha {
        cfg.set("alpha_ladder", v)?;
    }
    if let Some(v) = &cli.k_cutoff {
        cfg.set("k_ladder", v)?;
    }
    if let Some(v) = cli.l_max {
        cfg.l_max = v;
    }
    if let Some(v) = &cli.p_list {
        cfg.set("p_list", v)?;
    }
    if let Some(v) = &cli.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = cli.workers {
        cfg.workers = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn artifact_from(cli: &Cli, cfg: &RunConfig) -> Outcome<PekarArtifact> {
    let path = cli.artifact.clone().unwrap_or_else(|| cfg.out_dir.join("pekar.json"));
    if !path.exists() {
        return Err(Failure::Usage(anyhow::anyhow!("artifact {} not found (run `polaron solve` first)", path.display())));
    }
    Ok(load_pekar(&path)?)
}

fn prepare_out(dir: &Path) -> Outcome<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(())
}

fn write_text(dir: &Path, name: &str, text: &str, manifest: &mut Manifest) -> Outcome<()> {
    std::fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    manifest.add(dir, name)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, manifest: &mut Manifest) -> Outcome<()> {
    let text = serde_json::to_string_pretty(value).context("serializing output")?;
    write_text(dir, name, &text, manifest)
}

fn print_json<T: Serialize>(value: &T) -> Outcome<()> {
    println!("{}", serde_json::to_string_pretty(value).context("serializing output")?);
    Ok(())
}

fn cutoff_label(k: Option<f64>) -> String {
    k.map_or_else(|| "inf".to_string(), |k| format!("{k}"))
}

fn hessian_set<'a>(sol: &'a PekarSolution, cfg: &RunConfig) -> Outcome<(FieldGrid, HessianSet<'a>)> {
    let field = FieldGrid::default_for(sol.units.choquard());
    let set = assemble_hessians(sol, &field, cfg.l_max)?;
    Ok((field, set))
}

fn model_at(set: &HessianSet, field: &FieldGrid, cutoff: Option<f64>) -> Outcome<HessianModel> {
    Ok(build_model(&set.blocks(cutoff)?, field)?)
}

fn report_at(set: &HessianSet, model: &HessianModel) -> Outcome<TraceReport> {
    Ok(trace_correction(model, &set.high_tail(model.cutoff)?)?)
}

fn cmd_solve(cfg: &RunConfig) -> Outcome<()> {
    let grid = build_grid(cfg.n, cfg.r_max, cfg.scheme)?;
    let scf = cfg.scf();
    let sol = solve_pekar(&grid, &scf)?;
    prepare_out(&cfg.out_dir)?;
    let checksum = save_pekar(&cfg.out_dir.join("pekar.json"), &sol, &scf)?;
    let mut manifest = Manifest::new("solve", &checksum);
    manifest.add(&cfg.out_dir, "pekar.json")?;
    write_text(&cfg.out_dir, "config.txt", &cfg.to_text(), &mut manifest)?;
    manifest.write(&cfg.out_dir)?;
    print_json(&json!({
        "artifact_checksum": checksum,
        "e_pek": sol.e_pek,
        "lambda_pek": sol.lambda_pek,
        "m_lp": sol.m_lp,
        "lambda_gauss": sol.lambda_gauss,
        "iterations": sol.iterations,
        "residual": sol.residual,
    }))
}

fn cmd_verify(cfg: &RunConfig, art: &PekarArtifact, suite: Suite) -> Outcome<()> {
    let sol = &art.solution;
    let mut checks: Vec<Check> = Vec::new();
    let mut oracle: Vec<OracleRow> = Vec::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;
    if wants(Suite::Pekar) {
        checks.extend(pekar_suite(sol)?);
    }
    if wants(Suite::Hessian) || wants(Suite::Bogoliubov) || wants(Suite::Weights) {
        let (field, set) = hessian_set(sol, cfg)?;
        if wants(Suite::Hessian) {
            checks.extend(hessian_suite(&spectrum_summary(&set)?));
        }
        if wants(Suite::Bogoliubov) || wants(Suite::Weights) {
            let model = model_at(&set, &field, None)?;
            if wants(Suite::Bogoliubov) {
                let report = report_at(&set, &model)?;
                let (c, rows) = bogoliubov_suite(&set, &model, &report, cfg.seed)?;
                checks.extend(c);
                oracle = rows;
            }
            if wants(Suite::Weights) {
                let kernel = WeightKernel::new(sol, &model, &field)?;
                checks.extend(weights_suite(&kernel, cfg.alpha_ladder[cfg.alpha_ladder.len() - 1])?);
            }
        }
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let report = json!({
        "source_checksum": art.checksum,
        "suite": format!("{suite:?}").to_lowercase(),
        "passed": failed == 0,
        "failed": failed,
        "checks": checks,
        "oracle_rows": oracle,
    });
    prepare_out(&cfg.out_dir)?;
    let mut manifest = Manifest::new("verify", &art.checksum);
    write_json(&cfg.out_dir, &format!("verify_{}.json", format!("{suite:?}").to_lowercase()), &report, &mut manifest)?;
    manifest.write(&cfg.out_dir)?;
    print_json(&report)?;
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}

/// Payload of a persisted trace document.
#[derive(Serialize, serde::Deserialize)]
struct TraceDocument {
    source_checksum: String,
    reports: Vec<TraceReport>,
}

fn cmd_traces(cfg: &RunConfig, art: &PekarArtifact) -> Outcome<()> {
    let sol = &art.solution;
    let (field, set) = hessian_set(sol, cfg)?;
    let mut models = Vec::new();
    let mut reports = Vec::new();
    for &k in &cfg.k_ladder {
        let model = model_at(&set, &field, k)?;
        reports.push(report_at(&set, &model)?);
        models.push(model);
    }
    let refs: Vec<&HessianModel> = models.iter().collect();
    prepare_out(&cfg.out_dir)?;
    let mut manifest = Manifest::new("traces", &art.checksum);
    let header = format!("# source_checksum = {}\n", art.checksum);
    write_text(&cfg.out_dir, "traces.csv", &(header.clone() + &trace_csv(&refs)), &mut manifest)?;
    write_text(&cfg.out_dir, "spectra.csv", &(header + &spectra_csv(&refs)), &mut manifest)?;
    let doc = TraceDocument { source_checksum: art.checksum.clone(), reports };
    write_document(&cfg.out_dir.join("traces.json"), TRACES_FORMAT, &doc)?;
    manifest.add(&cfg.out_dir, "traces.json")?;
    manifest.write(&cfg.out_dir)?;
    let summary: Vec<_> = doc
        .reports
        .iter()
        .map(|r| {
            json!({
                "K": cutoff_label(r.cutoff),
                "tr_one_minus_h": r.tr_one_minus_h.total,
                "tr_one_minus_sqrt_h": r.tr_one_minus_sqrt_h.total,
                "trace_sqrt_h_minus_one": r.trace_sqrt_h_minus_one,
                "bog_ground_energy": r.bog_ground_energy,
                "tail_fit_refused": r.tail_fit_refused,
            })
        })
        .collect();
    print_json(&json!({ "source_checksum": art.checksum, "traces": summary }))
}

fn cmd_bound(cfg: &RunConfig, art: &PekarArtifact, traces: Option<&Path>) -> Outcome<()> {
    let sol = &art.solution;
    let cutoff = *cfg.k_ladder.last().unwrap_or(&None);
    let (report, traces_checksum) = match traces {
        Some(path) => {
            let (doc, _): (TraceDocument, String) = read_document(path, TRACES_FORMAT)?;
            let report = doc
                .reports
                .into_iter()
                .find(|r| r.cutoff == cutoff)
                .ok_or_else(|| Failure::Usage(anyhow::anyhow!("no trace report at K = {}", cutoff_label(cutoff))))?;
            (report, doc.source_checksum)
        }
        None => {
            let (field, set) = hessian_set(sol, cfg)?;
            let model = model_at(&set, &field, cutoff)?;
            (report_at(&set, &model)?, art.checksum.clone())
        }
    };
    let constants = BoundConstants::new(sol, &art.checksum, &report, &traces_checksum)?;
    prepare_out(&cfg.out_dir)?;
    let mut manifest = Manifest::new("bound", &art.checksum);
    let mut tables = Vec::new();
    for &alpha in &cfg.alpha_ladder {
        let table = assemble_bound(&constants, alpha, &cfg.p_list, cfg.c_max)?;
        let header = format!("# source_checksum = {}\n", art.checksum);
        write_text(&cfg.out_dir, &format!("bound_alpha_{alpha}.csv"), &(header + &table.csv()), &mut manifest)?;
        tables.push(table);
    }
    let envelopes: Vec<_> = tables.iter().map(conjecture_envelope).collect();
    let meta = json!({
        "source_checksum": art.checksum,
        "units": "phonon energy = 1",
        "constants": constants,
        "c_max": cfg.c_max,
        "error_term": tables.first().map(|t| t.error_term.clone()),
        "crossing_momenta": cfg.alpha_ladder.iter().map(|&a| (a, constants.crossing_momentum(a))).collect::<Vec<_>>(),
        "envelopes": envelopes,
    });
    write_json(&cfg.out_dir, "bound_meta.json", &meta, &mut manifest)?;
    manifest.write(&cfg.out_dir)?;
    print_json(&meta)
}

fn cmd_weights(cfg: &RunConfig, art: &PekarArtifact) -> Outcome<()> {
    let sol = &art.solution;
    let field = FieldGrid::default_for(sol.units.choquard());
    let set = assemble_hessians(sol, &field, cfg.l_max)?;
    let cutoff = *cfg.k_ladder.last().unwrap_or(&None);
    let model = model_at(&set, &field, cutoff)?;
    let kernel = WeightKernel::new(sol, &model, &field)?;
    let radial = YGrid::standard(sol.grid.r_max, false)?;
    prepare_out(&cfg.out_dir)?;
    let mut manifest = Manifest::new("weights", &art.checksum);
    let header = format!("# source_checksum = {}\n", art.checksum);
    for &alpha in &cfg.alpha_ladder {
        for &p in &cfg.p_list {
            // At P = 0 the norms depend on |y| only.
            let grid = if p == 0.0 { radial.clone() } else { YGrid::standard(sol.grid.r_max, true)? };
            let profile = displacement_norms(&kernel, alpha, p, &grid)?;
            let w = weight_function(&profile, cfg.delta, cfg.eta)?;
            let name = format!("weights_alpha_{alpha}_P_{p}.csv");
            write_text(&cfg.out_dir, &name, &(header.clone() + &profile.csv(&w.values)), &mut manifest)?;
        }
    }
    let comparison =
        gaussian_ladder(&kernel, &radial, &cfg.alpha_ladder, 0.0, GFunction::Autocorrelation, 0, cfg.delta, cfg.eta)?;
    let norms = norm_ladder(&kernel, &radial, &cfg.alpha_ladder, 0.0)?;
    let three_halves = minus_three_halves(&kernel, &radial, &cfg.alpha_ladder)?;
    let q = q_monotonicity(&kernel, &radial.s)?;
    let summary = json!({
        "source_checksum": art.checksum,
        "k_cutoff": cutoff_label(cutoff),
        "gaussian_comparison": comparison,
        "norms": norms,
        "minus_three_halves": {
            "scaled": three_halves.scaled,
            "small_y": three_halves.small_y,
        },
        "q_certificate": { "max_decrease": q.max_decrease, "c0": q.c0, "limit_ratio": q.limit_ratio },
    });
    write_json(&cfg.out_dir, "weights.json", &summary, &mut manifest)?;
    manifest.write(&cfg.out_dir)?;
    print_json(&summary)
}

fn cmd_oracle(cfg: &RunConfig, art: &PekarArtifact, samples: usize) -> Outcome<()> {
    let sol = &art.solution;
    let (field, set) = hessian_set(sol, cfg)?;
    let model = model_at(&set, &field, None)?;
    let rows = oracle_rows(&model, samples, cfg.seed)?;
    let failed = rows.iter().filter(|r| !r.passed).count();
    let report = json!({ "source_checksum": art.checksum, "seed": cfg.seed, "rows": rows, "failed": failed });
    prepare_out(&cfg.out_dir)?;
    let mut manifest = Manifest::new("oracle", &art.checksum);
    write_json(&cfg.out_dir, "oracle.json", &report, &mut manifest)?;
    manifest.write(&cfg.out_dir)?;
    print_json(&report)?;
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome<()> {
    let cfg = config_from(cli)?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Verify { suite } => cmd_verify(&cfg, &artifact_from(cli, &cfg)?, *suite),
        Command::Traces => cmd_traces(&cfg, &artifact_from(cli, &cfg)?),
        Command::Bound { traces } => cmd_bound(&cfg, &artifact_from(cli, &cfg)?, traces.as_deref()),
        Command::Weights => cmd_weights(&cfg, &artifact_from(cli, &cfg)?),
        Command::Oracle { samples } => cmd_oracle(&cfg, &artifact_from(cli, &cfg)?, *samples),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(n)) => {
            eprintln!("error: {n} check(s) failed");
            ExitCode::from(1)
        }
        Err(Failure::Provenance(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
