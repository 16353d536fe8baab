//! Experiment manifests (schema version 1) and the `run` driver.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use rmpu_core::predict::RmpuGeometry;

use crate::compute::{self, Check, ObservableInput, OtocRequest};
use crate::output::{csv_string, emit, json_string, with_ext, Provenance};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    OtocHaar,
    OtocRmpu,
    FramePotential,
    GenusCounts,
    Cumulants,
    IdentityChecks,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub d: Vec<u64>,
    #[serde(default)]
    pub r: Vec<u32>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub chi: Vec<u64>,
    #[serde(default, rename = "D")]
    pub dim: Vec<u64>,
    /// Site of `B` (1-based) for light-cone sweeps.
    #[serde(default, rename = "M")]
    pub m: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observables {
    pub a: ObservableInput,
    pub b: ObservableInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub quantity: Quantity,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub observables: Option<Observables>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub output: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub quantity: Quantity,
    pub schema_version: u32,
    pub csv: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text).context("manifest is not valid JSON for schema version 1")?;
        if m.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", m.schema_version);
        }
        m.validate()?;
        Ok(m)
    }

    fn need<T>(v: &[T], name: &str) -> Result<()> {
        if v.is_empty() {
            bail!("grid.{name} must be a non-empty list for this quantity");
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let g = &self.grid;
        match self.quantity {
            Quantity::OtocHaar => {
                Self::need(&g.k, "k")?;
                Self::need(&g.dim, "D")?;
                self.observables.as_ref().ok_or_else(|| anyhow!("otoc_haar needs observables a and b"))?;
            }
            Quantity::OtocRmpu => {
                Self::need(&g.k, "k")?;
                self.observables.as_ref().ok_or_else(|| anyhow!("otoc_rmpu needs observables a and b"))?;
                self.geometries()?;
            }
            Quantity::FramePotential => {
                Self::need(&g.k, "k")?;
                self.geometries()?;
            }
            Quantity::GenusCounts => Self::need(&g.k, "k")?,
            Quantity::Cumulants => {
                let obs = self.observables.as_ref().ok_or_else(|| anyhow!("cumulants needs observables (a is used)"))?;
                if obs.a.is_explicit() {
                    bail!("cumulants needs observable a as a moment list");
                }
            }
            Quantity::IdentityChecks => {
                Self::need(&g.k, "k")?;
                Self::need(&g.dim, "D")?;
            }
        }
        if g.k.iter().any(|&k| k == 0) {
            bail!("grid.k entries must be at least 1");
        }
        Ok(())
    }

    /// Geometries from `d × n × (r ∪ r(χ))`.
    pub fn geometries(&self) -> Result<Vec<RmpuGeometry>> {
        let g = &self.grid;
        Self::need(&g.d, "d")?;
        Self::need(&g.n, "n")?;
        if g.r.is_empty() && g.chi.is_empty() {
            bail!("grid needs r or chi");
        }
        let mut out = Vec::new();
        for &d in &g.d {
            let mut rs = g.r.clone();
            for &chi in &g.chi {
                rs.push(compute::r_for_chi(d, chi)?);
            }
            rs.sort_unstable();
            rs.dedup();
            out.extend(compute::geometries(&[d], &rs, &g.n));
        }
        for geo in &out {
            geo.validate()?;
        }
        Ok(out)
    }
}

pub struct RunOutcome {
    pub pass: bool,
    pub summary_path: PathBuf,
}

/// Execute a manifest; writes `<out>.csv` (plus `<out>.estimates.csv` when
/// sampling) and `<out>.json`.
pub fn run(m: &Manifest, out_override: Option<&Path>) -> Result<RunOutcome> {
    let prov = Provenance::of(m, Some(m.seed))?;
    let prefix: PathBuf = match (out_override, &m.output) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => bail!("no output path: set \"output\" in the manifest or pass --out"),
    };
    let g = &m.grid;
    let mut csvs = Vec::new();
    let mut write = |suffix: &str, text: String| -> Result<()> {
        let p = with_ext(&prefix, suffix);
        emit(Some(&p), &text)?;
        csvs.push(p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
        Ok(())
    };
    let checks = match m.quantity {
        Quantity::OtocHaar | Quantity::OtocRmpu => {
            let obs = m.observables.as_ref().expect("validated");
            let req = OtocRequest { a: &obs.a, b: &obs.b, samples: m.samples, seed: m.seed };
            let out = if m.quantity == Quantity::OtocHaar {
                compute::otoc_haar(&g.k, &g.dim, &req)?
            } else {
                compute::otoc_rmpu(&g.k, &m.geometries()?, &g.m, &req)?
            };
            write("csv", csv_string(&prov, &out.predictions)?)?;
            if !out.estimates.is_empty() {
                write("estimates.csv", csv_string(&prov, &out.estimates)?)?;
            }
            out.checks
        }
        Quantity::FramePotential => {
            let out = compute::frame_potential(&g.k, &m.geometries()?, m.samples, m.seed)?;
            write("csv", csv_string(&prov, &out.predictions)?)?;
            if !out.estimates.is_empty() {
                write("estimates.csv", csv_string(&prov, &out.estimates)?)?;
            }
            out.checks
        }
        Quantity::GenusCounts => {
            let (rows, checks) = compute::genus_counts(&g.k)?;
            write("csv", csv_string(&prov, &rows)?)?;
            checks
        }
        Quantity::Cumulants => {
            let obs = m.observables.as_ref().expect("validated");
            let moments = obs.a.moments(2, 1, 1)?;
            let (rows, check) = compute::cumulant_rows(&moments)?;
            write("csv", csv_string(&prov, &rows)?)?;
            vec![check]
        }
        Quantity::IdentityChecks => {
            let (rows, checks) = compute::identity_rows(&g.dim, &g.k)?;
            write("csv", csv_string(&prov, &rows)?)?;
            checks
        }
    };
    let pass = checks.iter().all(|c| c.pass);
    let summary = Summary { quantity: m.quantity, schema_version: m.schema_version, csv: csvs, checks, pass };
    let summary_path = with_ext(&prefix, "json");
    emit(Some(&summary_path), &json_string(&prov, &summary)?)?;
    Ok(RunOutcome { pass, summary_path })
}
