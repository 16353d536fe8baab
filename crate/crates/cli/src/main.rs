mod compute;
mod manifest;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rmpu_core::io::parse_moments;
use rmpu_core::mcsim::{mc_otoc, EnsembleConfig};
use rmpu_core::predict::{haar_otoc_exact, rmpu_otoc_exact, RmpuGeometry};
use rmpu_core::scalar::Scalar;
use rmpu_core::weingarten::{weingarten, Mode};
use rmpu_core::Rational;

use compute::{Check, ObservableInput, OtocRequest, Placement, PredictionRow};
use output::{csv_string, emit, json_string, Provenance};

#[derive(Parser)]
#[command(name = "rmpu", version, about = "Weingarten tables, free-probability OTOC predictions and RMPU sampling")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Weingarten class values for S_k at dimension D (JSON).
    WgTable(WgArgs),
    /// Multichain counts in NC(k) for k = 1..=K (CSV).
    NcCount(NcArgs),
    /// Free cumulants of a moment sequence (CSV).
    Cumulants(CumulantArgs),
    /// Exact, leading and subleading OTOC predictions (CSV).
    OtocExact(OtocExactArgs),
    /// Monte Carlo OTOC estimate checked against the exact value (CSV).
    OtocMc(OtocMcArgs),
    /// Exact, asymptotic and sampled RMPU frame potentials (CSV).
    FramePotential(FrameArgs),
    /// Exhaustive Pauli check of the frame-potential/OTOC identity (JSON).
    VerifyIdentity(IdentityArgs),
    /// Reference-table reproduction report.
    TableReport(ReportArgs),
    /// Execute an experiment manifest.
    Run(RunArgs),
}

#[derive(Args, Serialize)]
struct WgArgs {
    #[arg(long)]
    k: usize,
    /// Hilbert-space dimension D.
    #[arg(long = "dim", alias = "D")]
    dim: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct NcArgs {
    /// Largest k.
    #[arg(long)]
    k: usize,
    /// Chain length (2 counts pairs π ≤ σ).
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Fill the wall_time_ms column (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CumulantArgs {
    /// Comma-separated moments m₁,m₂,… as rationals.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "moments_file")]
    moments: Vec<String>,
    /// JSON array of moments.
    #[arg(long)]
    moments_file: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Clone)]
struct GeometryArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    k: Vec<usize>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    r: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long = "chi-list", value_delimiter = ',')]
    chi_list: Vec<u64>,
}

impl GeometryArgs {
    fn geometries(&self) -> Result<Vec<RmpuGeometry>> {
        let d = self.d.ok_or_else(|| anyhow!("--d is required"))?;
        if self.n.is_empty() {
            bail!("--n is required");
        }
        let mut rs = self.r.clone();
        for &chi in &self.chi_list {
            rs.push(compute::r_for_chi(d, chi)?);
        }
        if rs.is_empty() {
            bail!("give --r or --chi-list");
        }
        rs.sort_unstable();
        rs.dedup();
        let g = compute::geometries(&[d], &rs, &self.n);
        for x in &g {
            x.validate()?;
        }
        Ok(g)
    }
}

#[derive(Args, Serialize)]
struct OtocExactArgs {
    #[command(flatten)]
    geom: GeometryArgs,
    /// Global Haar dimensions instead of an RMPU geometry.
    #[arg(long = "dim", alias = "D", value_delimiter = ',')]
    dim: Vec<u64>,
    /// Moments of A (comma-separated rationals); default is a half-rank projector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    moments_a: Vec<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    moments_b: Vec<String>,
    /// Site of B (1-based) for light-cone sweeps.
    #[arg(long = "site-m", value_delimiter = ',')]
    site_m: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct OtocMcArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    /// Global Haar dimension instead of an RMPU geometry.
    #[arg(long = "dim", alias = "D")]
    dim: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Observable JSON (matrix or generated kind); default half-rank projector.
    #[arg(long)]
    observable_a: Option<PathBuf>,
    #[arg(long)]
    observable_b: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct FrameArgs {
    #[command(flatten)]
    geom: GeometryArgs,
    /// Sampled pairs per geometry (0 disables sampling).
    #[arg(long, default_value_t = 0)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct IdentityArgs {
    #[arg(long = "dim", alias = "D", default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ReportArgs {
    #[arg(long, value_enum)]
    table: report::RefTable,
    /// Also write the rows as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output prefix; overrides the manifest's "output".
    #[arg(long)]
    out: Option<PathBuf>,
}

fn moments_input(list: &[String]) -> ObservableInput {
    if list.is_empty() {
        return ObservableInput::Moments { moments: vec![serde_json::Value::String("1/2".into()); 8] };
    }
    ObservableInput::Moments { moments: list.iter().map(|s| serde_json::Value::String(s.trim().into())).collect() }
}

fn read_observable(path: &Option<PathBuf>, site_dim: u64) -> Result<ObservableInput> {
    match path {
        None => Ok(compute::default_observable(site_dim)),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(serde_json::from_str(&text).with_context(|| format!("parsing observable {}", p.display()))?)
        }
    }
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        eprintln!("check {}: {}  {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    checks.iter().all(|c| c.pass)
}

fn hashed<T: Serialize>(command: &str, args: &T, seed: Option<u64>) -> Result<Provenance> {
    Provenance::of(&serde_json::json!({ "command": command, "args": args }), seed)
}

fn execute(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::WgTable(a) => {
            let prov = hashed("wg-table", &a, None)?;
            let table = weingarten(a.dim, a.k, Mode::Exact)?;
            emit(a.out.as_deref(), &json_string(&prov, &table.to_file()?)?)?;
            Ok(true)
        }
        Cmd::NcCount(a) => {
            let prov = hashed("nc-count", &a, None)?;
            let rows = compute::nc_counts(a.k, a.m, a.timing)?;
            emit(a.out.as_deref(), &csv_string(&prov, &rows)?)?;
            Ok(true)
        }
        Cmd::Cumulants(a) => {
            let prov = hashed("cumulants", &a, None)?;
            let m = match &a.moments_file {
                Some(p) => parse_moments(&std::fs::read_to_string(p)?)?,
                None if !a.moments.is_empty() => {
                    let json = serde_json::to_string(&a.moments.iter().map(|s| s.trim()).collect::<Vec<_>>())?;
                    parse_moments(&json)?
                }
                None => bail!("give --moments or --moments-file"),
            };
            let (rows, check) = compute::cumulant_rows(&m)?;
            emit(a.out.as_deref(), &csv_string(&prov, &rows)?)?;
            Ok(report_checks(&[check]))
        }
        Cmd::OtocExact(a) => {
            let prov = hashed("otoc-exact", &a, None)?;
            let (ia, ib) = (moments_input(&a.moments_a), moments_input(&a.moments_b));
            let req = OtocRequest { a: &ia, b: &ib, samples: 0, seed: 0 };
            let out = if a.dim.is_empty() {
                compute::otoc_rmpu(&a.geom.k, &a.geom.geometries()?, &a.site_m, &req)?
            } else {
                compute::otoc_haar(&a.geom.k, &a.dim, &req)?
            };
            emit(a.out.as_deref(), &csv_string(&prov, &out.predictions)?)?;
            Ok(report_checks(&out.checks))
        }
        Cmd::OtocMc(a) => otoc_mc(a),
        Cmd::FramePotential(a) => {
            let prov = hashed("frame-potential", &a, Some(a.seed))?;
            let out = compute::frame_potential(&a.geom.k, &a.geom.geometries()?, a.samples, a.seed)?;
            let mut rows = out.predictions;
            rows.extend(out.estimates.iter().map(|e| PredictionRow {
                quantity: "frame_potential".into(),
                k: e.k,
                d: e.d,
                r: e.r,
                n: e.n,
                chi: e.chi,
                dim: Some(e.dim),
                value: e.mean,
                order_tag: "mc".into(),
                residual_estimate: Some(e.stderr),
            }));
            emit(a.out.as_deref(), &csv_string(&prov, &rows)?)?;
            Ok(report_checks(&out.checks))
        }
        Cmd::VerifyIdentity(a) => {
            let prov = hashed("verify-identity", &a, None)?;
            let (rows, checks) = compute::identity_rows(&[a.dim as u64], &[a.k])?;
            emit(a.out.as_deref(), &json_string(&prov, &rows[0])?)?;
            Ok(report_checks(&checks))
        }
        Cmd::TableReport(a) => {
            let prov = hashed("table-report", &a, None)?;
            let rows = report::table_report(a.table)?;
            print!("{}", report::render(&rows));
            if let Some(p) = &a.out {
                emit(Some(p), &csv_string(&prov, &rows)?)?;
            }
            Ok(rows.iter().all(|r| r.pass))
        }
        Cmd::Run(a) => {
            let text = std::fs::read_to_string(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
            let m = manifest::Manifest::parse(&text).map_err(|e| anyhow!(InvalidManifest(format!("{e:#}"))))?;
            let outcome = manifest::run(&m, a.out.as_deref())?;
            eprintln!("summary: {}", outcome.summary_path.display());
            Ok(outcome.pass)
        }
    }
}

fn otoc_mc(a: OtocMcArgs) -> Result<bool> {
    let prov = hashed("otoc-mc", &a, Some(a.seed))?;
    let (cfg, geom, site_dim, sites, dim) = match (a.dim, a.d, a.r, a.n) {
        (Some(dim), None, None, None) => (EnsembleConfig::haar(dim as usize, a.seed, a.samples), None, dim, 1, dim),
        (None, Some(d), Some(r), Some(n)) => {
            let g = RmpuGeometry::staircase(d, r, n);
            g.validate()?;
            let dim = g.dim().ok_or_else(|| anyhow!("dimension overflows"))?;
            (EnsembleConfig::rmpu(g, a.seed, a.samples), Some(g), d, g.sites(), dim)
        }
        _ => bail!("give either --dim or all of --d --r --n"),
    };
    let ia = read_observable(&a.observable_a, site_dim)?;
    let ib = read_observable(&a.observable_b, site_dim)?;
    let sa = ia.materialize(site_dim as usize, sites, Placement::First)?.ok_or_else(|| anyhow!("observable a needs a matrix"))?;
    let sb = ib.materialize(site_dim as usize, sites, Placement::Last)?.ok_or_else(|| anyhow!("observable b needs a matrix"))?;
    let est = mc_otoc(&cfg, &sa, &sb, a.k)?;
    let ma = ia.moments(site_dim as usize, sites, a.k)?;
    let mb = ib.moments(site_dim as usize, sites, a.k)?;
    let exact: Rational = match &geom {
        None => haar_otoc_exact(&ma, &mb, dim, a.k)?,
        Some(g) => rmpu_otoc_exact(&ma, &mb, g, a.k)?,
    };
    let row = compute::EstimateRow {
        quantity: est.quantity.clone(),
        k: a.k,
        d: geom.map(|g| g.d),
        r: geom.map(|g| g.r),
        n: geom.map(|g| g.n),
        chi: geom.map(|g| g.chi()),
        dim,
        mean: est.mean,
        stderr: est.stderr,
        samples: est.samples,
        seed: est.seed,
    };
    emit(a.out.as_deref(), &csv_string(&prov, &[row])?)?;
    if let Some(g) = est.guidance() {
        eprintln!("{g}");
    }
    let pass = est.agrees_with(exact.as_f64(), compute::MC_SIGMA);
    Ok(report_checks(&[Check::new("mc_vs_exact", pass, format!("mc {} ± {} vs exact {}", est.mean, est.stderr, exact.as_f64()))]))
}

#[derive(Debug)]
struct InvalidManifest(String);

impl std::fmt::Display for InvalidManifest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidManifest {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let kind = if e.downcast_ref::<InvalidManifest>().is_some() { "invalid_manifest" } else { "error" };
            let body = serde_json::json!({ "error": { "kind": kind, "message": format!("{e:#}") } });
            println!("{body}");
            ExitCode::from(2)
        }
    }
}
