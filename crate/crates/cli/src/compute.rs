//! Row builders shared by the subcommands and manifest runs.

use anyhow::{anyhow, bail, Result};
use num::{BigInt, FromPrimitive, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rmpu_core::fit::power_law_fit;
use rmpu_core::freeprob::{cumulants_from_moments, free_otoc_prediction, moments_from_cumulants, MomentSequence};
use rmpu_core::io::{parse_moments, ObservableFile};
use rmpu_core::mcsim::{mc_frame_potential, mc_otoc, EnsembleConfig, EstimateRecord, DENSE_DIM_CAP};
use rmpu_core::ncposet::{count_genus_one_pairs, count_multichains};
use rmpu_core::observable::{make_observable, ObservableKind, ObservableSpec};
use rmpu_core::predict::*;
use rmpu_core::scalar::{format_rational, Scalar};
use rmpu_core::Rational;

/// Table II, columns 2 and 3, k = 1..=10.
pub const TABLE2: [(u64, u64); 10] = [
    (1, 0),
    (3, 1),
    (12, 21),
    (55, 270),
    (273, 2860),
    (1428, 27300),
    (7752, 244188),
    (43263, 2089164),
    (246675, 17305200),
    (1430715, 139864725),
];

pub const MC_SIGMA: f64 = 4.0;
pub const CHI_EXPONENT: f64 = -2.0;
pub const CHI_EXPONENT_TOL: f64 = 0.3;
pub const FRAME_RESIDUAL_EXPONENT: f64 = -3.0;

#[derive(Debug, Clone, Serialize)]
pub struct PredictionRow {
    pub quantity: String,
    pub k: usize,
    pub d: Option<u64>,
    pub r: Option<u32>,
    pub n: Option<usize>,
    pub chi: Option<u64>,
    #[serde(rename = "D")]
    pub dim: Option<u64>,
    pub value: f64,
    pub order_tag: String,
    pub residual_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub k: usize,
    pub d: Option<u64>,
    pub r: Option<u32>,
    pub n: Option<usize>,
    pub chi: Option<u64>,
    #[serde(rename = "D")]
    pub dim: u64,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CountRow {
    pub k: usize,
    pub m: usize,
    pub count: String,
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenusRow {
    pub k: usize,
    pub nc2_genus0: String,
    pub nc2_genus1: u64,
    pub all_pairs: String,
    pub table_genus0: Option<u64>,
    pub table_genus1: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CumulantRow {
    pub order: usize,
    pub moment: String,
    pub cumulant: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    #[serde(rename = "D")]
    pub dim: usize,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub terms: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

/// Observable given as moments, an explicit matrix, or a generated kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableInput {
    Moments { moments: Vec<serde_json::Value> },
    Matrix(ObservableFile),
    Generated {
        #[serde(flatten)]
        kind: ObservableKind,
        #[serde(default = "one")]
        num_sites: usize,
    },
}

fn one() -> usize {
    1
}

pub enum Placement {
    First,
    Last,
}

impl ObservableInput {
    /// Explicit operator on a chain of `sites` sites of dimension `site_dim`;
    /// `None` for moment-only input.
    pub fn materialize(&self, site_dim: usize, sites: usize, at: Placement) -> Result<Option<ObservableSpec>> {
        let place = |ns: usize| -> Result<usize> {
            if ns > sites {
                bail!("observable on {ns} sites does not fit a chain of {sites}");
            }
            Ok(match at {
                Placement::First => 0,
                Placement::Last => sites - ns,
            })
        };
        match self {
            ObservableInput::Moments { .. } => Ok(None),
            ObservableInput::Matrix(f) => {
                let mut f = f.clone();
                f.first_site = place(f.num_sites)?;
                if sites > 1 && f.site_dim != site_dim {
                    bail!("observable site_dim {} does not match d = {site_dim}", f.site_dim);
                }
                Ok(Some(f.to_spec()?))
            }
            ObservableInput::Generated { kind, num_sites } => {
                Ok(Some(make_observable(kind, site_dim, place(*num_sites)?, *num_sites)?))
            }
        }
    }

    /// Normalized moments up to `order`; explicit operators go through their
    /// spectrum and are converted to exact binary rationals.
    pub fn moments(&self, site_dim: usize, sites: usize, order: usize) -> Result<MomentSequence<Rational>> {
        if let ObservableInput::Moments { moments } = self {
            let m = parse_moments(&serde_json::to_string(moments)?)?;
            m.require(order)?;
            return Ok(m);
        }
        let spec = self.materialize(site_dim, sites, Placement::First)?.expect("explicit observable");
        let f = spec.moments(order);
        let exact = f
            .moments
            .iter()
            .map(|x| Rational::from_f64(*x).ok_or_else(|| anyhow!("non-finite moment {x}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(MomentSequence::new(exact))
    }

    pub fn is_explicit(&self) -> bool {
        !matches!(self, ObservableInput::Moments { .. })
    }
}

/// Half-rank projector on one site: a finite-trace default.
pub fn default_observable(site_dim: u64) -> ObservableInput {
    ObservableInput::Generated { kind: ObservableKind::Projector { rank: (site_dim as usize / 2).max(1) }, num_sites: 1 }
}

fn fit_exponent(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 3 || ys.iter().any(|y| *y == 0.0 || !y.is_finite()) {
        return None;
    }
    power_law_fit(xs, ys).ok().map(|f| (f.exponent, f.exponent_stderr))
}

// ---------------------------------------------------------------------------
// Haar OTOC

pub struct OtocRequest<'a> {
    pub a: &'a ObservableInput,
    pub b: &'a ObservableInput,
    pub samples: usize,
    pub seed: u64,
}

pub struct OtocOutput {
    pub predictions: Vec<PredictionRow>,
    pub estimates: Vec<EstimateRow>,
    pub checks: Vec<Check>,
}

pub fn otoc_haar(ks: &[usize], dims: &[u64], req: &OtocRequest) -> Result<OtocOutput> {
    let points: Vec<(usize, u64)> = ks.iter().flat_map(|&k| dims.iter().map(move |&d| (k, d))).collect();
    let per_point: Vec<Result<(Vec<PredictionRow>, Option<(EstimateRow, Check)>)>> = points
        .par_iter()
        .map(|&(k, dim)| {
            let ma = req.a.moments(dim as usize, 1, k)?;
            let mb = req.b.moments(dim as usize, 1, k)?;
            let exact: Rational = haar_otoc_exact(&ma, &mb, dim, k)?;
            let fp: Rational = free_otoc_prediction(&ma, &mb, k)?;
            let c: Rational = subleading_coeff_haar(&ma, &mb, k)?;
            let sub = fp.clone() + c / Rational::from_integer(BigInt::from(dim) * BigInt::from(dim));
            let row = |value: &Rational, tag: &str, res: Option<f64>| PredictionRow {
                quantity: "otoc_haar".into(),
                k,
                d: None,
                r: None,
                n: None,
                chi: None,
                dim: Some(dim),
                value: value.as_f64(),
                order_tag: tag.into(),
                residual_estimate: res,
            };
            let rows = vec![
                row(&exact, "exact", None),
                row(&fp, "leading", Some((exact.clone() - fp.clone()).as_f64().abs())),
                row(&sub, "subleading", Some((exact.clone() - sub.clone()).as_f64().abs())),
            ];
            let mc = if req.samples > 0 && dim as usize <= DENSE_DIM_CAP {
                let sa = req.a.materialize(dim as usize, 1, Placement::First)?;
                let sb = req.b.materialize(dim as usize, 1, Placement::First)?;
                match (sa, sb) {
                    (Some(sa), Some(sb)) => {
                        let cfg = EnsembleConfig::haar(dim as usize, req.seed, req.samples);
                        let est = mc_otoc(&cfg, &sa, &sb, k)?;
                        let check = mc_check(&format!("mc_otoc_haar[k={k},D={dim}]"), &est, exact.as_f64());
                        Some((estimate_row(&est, k, None, dim), check))
                    }
                    _ => None,
                }
            } else {
                None
            };
            Ok((rows, mc))
        })
        .collect();
    let mut out = OtocOutput { predictions: Vec::new(), estimates: Vec::new(), checks: Vec::new() };
    for p in per_point {
        let (rows, mc) = p?;
        out.predictions.extend(rows);
        if let Some((e, c)) = mc {
            out.estimates.push(e);
            out.checks.push(c);
        }
    }
    for &k in ks {
        let pts: Vec<&PredictionRow> = out.predictions.iter().filter(|r| r.k == k && r.order_tag == "leading").collect();
        let xs: Vec<f64> = pts.iter().map(|r| r.dim.unwrap() as f64).collect();
        let ys: Vec<f64> = pts.iter().map(|r| r.residual_estimate.unwrap()).collect();
        if let Some((e, se)) = fit_exponent(&xs, &ys) {
            out.predictions.push(fit_row("otoc_haar_dim_exponent", k, None, None, e, se));
            let pass = (e - CHI_EXPONENT).abs() <= CHI_EXPONENT_TOL;
            out.checks.push(Check::new(format!("haar_free_limit_exponent[k={k}]"), pass, format!("fitted exponent {e:.4}")));
        }
    }
    Ok(out)
}

fn fit_row(quantity: &str, k: usize, d: Option<u64>, n: Option<usize>, e: f64, se: f64) -> PredictionRow {
    PredictionRow {
        quantity: quantity.into(),
        k,
        d,
        r: None,
        n,
        chi: None,
        dim: None,
        value: e,
        order_tag: "fit".into(),
        residual_estimate: Some(se),
    }
}

fn mc_check(name: &str, est: &EstimateRecord, target: f64) -> Check {
    let pass = est.agrees_with(target, MC_SIGMA);
    let mut detail = format!("mc {} ± {} vs exact {target}", est.mean, est.stderr);
    if let Some(g) = est.guidance() {
        detail.push_str("; ");
        detail.push_str(&g);
    }
    Check::new(name, pass, detail)
}

fn estimate_row(est: &EstimateRecord, k: usize, geom: Option<&RmpuGeometry>, dim: u64) -> EstimateRow {
    EstimateRow {
        quantity: est.quantity.clone(),
        k,
        d: geom.map(|g| g.d),
        r: geom.map(|g| g.r),
        n: geom.map(|g| g.n),
        chi: geom.map(|g| g.chi()),
        dim,
        mean: est.mean,
        stderr: est.stderr,
        samples: est.samples,
        seed: est.seed,
    }
}

// ---------------------------------------------------------------------------
// RMPU OTOC

pub fn geometries(ds: &[u64], rs: &[u32], ns: &[usize]) -> Vec<RmpuGeometry> {
    let mut out = Vec::new();
    for &d in ds {
        for &n in ns {
            for &r in rs {
                out.push(RmpuGeometry::staircase(d, r, n));
            }
        }
    }
    out
}

/// `r` with `d^r = χ`.
pub fn r_for_chi(d: u64, chi: u64) -> Result<u32> {
    let mut p = 1u64;
    for r in 0..64 {
        if p == chi {
            if r == 0 {
                bail!("χ = 1 is not a valid bond dimension");
            }
            return Ok(r);
        }
        p = p.checked_mul(d).ok_or_else(|| anyhow!("χ = {chi} is not a power of d = {d}"))?;
    }
    bail!("χ = {chi} is not a power of d = {d}")
}

pub fn otoc_rmpu(ks: &[usize], geoms: &[RmpuGeometry], sites_m: &[usize], req: &OtocRequest) -> Result<OtocOutput> {
    for g in geoms {
        g.validate()?;
    }
    let points: Vec<(usize, RmpuGeometry, Option<usize>)> = ks
        .iter()
        .flat_map(|&k| {
            geoms.iter().flat_map(move |g| {
                let ms: Vec<Option<usize>> = if sites_m.is_empty() { vec![None] } else { sites_m.iter().map(|&m| Some(m)).collect() };
                ms.into_iter().map(move |m| (k, *g, m))
            })
        })
        .collect();
    let per_point: Vec<Result<(Vec<PredictionRow>, Vec<Check>, Option<(EstimateRow, Check)>)>> = points
        .par_iter()
        .map(|&(k, g, m)| {
            let sd = g.d as usize;
            let sites = g.sites();
            let ma = req.a.moments(sd, sites, k)?;
            let mb = req.b.moments(sd, sites, k)?;
            let dim = g.dim();
            let row = |q: &str, value: f64, tag: &str, res: Option<f64>| PredictionRow {
                quantity: q.into(),
                k,
                d: Some(g.d),
                r: Some(g.r),
                n: Some(g.n),
                chi: Some(g.chi()),
                dim,
                value,
                order_tag: tag.into(),
                residual_estimate: res,
            };
            let mut checks = Vec::new();
            if let Some(m) = m {
                let v: Rational = rmpu_otoc_exact_at_site(&ma, &mb, &g, k, m)?;
                let q = format!("otoc_rmpu_m{m}");
                let mut rows = vec![row(&q, v.as_f64(), "exact", None)];
                if m == 1 {
                    let h: Rational = haar_otoc_exact(&ma, &mb, g.gate_dim(), k)?;
                    rows.push(row("otoc_haar_gate", h.as_f64(), "exact", Some((v.clone() - h.clone()).as_f64().abs())));
                    checks.push(Check::new(
                        format!("light_cone[k={k},d={},r={},n={}]", g.d, g.r, g.n),
                        v == h,
                        "B on the first site equals Haar on one gate",
                    ));
                }
                return Ok((rows, checks, None));
            }
            let exact: Rational = rmpu_otoc_exact(&ma, &mb, &g, k)?;
            let fp: Rational = free_otoc_prediction(&ma, &mb, k)?;
            let lead: Rational = rmpu_otoc_leading(&ma, &mb, g.n, k)?;
            checks.push(Check::new(
                format!("leading_equals_free[k={k},n={},chi={}]", g.n, g.chi()),
                lead == fp,
                "multichain leading order vs free prediction",
            ));
            let c: Rational = subleading_coeff_rmpu(&ma, &mb, g.n, g.d, k)?;
            let chi2 = Rational::from_integer(BigInt::from(g.chi()).pow(2));
            let sub = fp.clone() + c / chi2;
            let rows = vec![
                row("otoc_rmpu", exact.as_f64(), "exact", None),
                row("otoc_rmpu", fp.as_f64(), "leading", Some((exact.clone() - fp.clone()).as_f64().abs())),
                row("otoc_rmpu", sub.as_f64(), "subleading", Some((exact.clone() - sub).as_f64().abs())),
            ];
            let mc = match dim {
                Some(dd) if req.samples > 0 && dd as usize <= DENSE_DIM_CAP => {
                    let sa = req.a.materialize(sd, sites, Placement::First)?;
                    let sb = req.b.materialize(sd, sites, Placement::Last)?;
                    match (sa, sb) {
                        (Some(sa), Some(sb)) => {
                            let est = mc_otoc(&EnsembleConfig::rmpu(g, req.seed, req.samples), &sa, &sb, k)?;
                            let name = format!("mc_otoc_rmpu[k={k},d={},r={},n={}]", g.d, g.r, g.n);
                            Some((estimate_row(&est, k, Some(&g), dd), mc_check(&name, &est, exact.as_f64())))
                        }
                        _ => None,
                    }
                }
                _ => None,
            };
            Ok((rows, checks, mc))
        })
        .collect();
    let mut out = OtocOutput { predictions: Vec::new(), estimates: Vec::new(), checks: Vec::new() };
    for p in per_point {
        let (rows, checks, mc) = p?;
        out.predictions.extend(rows);
        out.checks.extend(checks);
        if let Some((e, c)) = mc {
            out.estimates.push(e);
            out.checks.push(c);
        }
    }
    if sites_m.is_empty() {
        for &k in ks {
            for (d, n) in distinct_dn(geoms) {
                let pts: Vec<&PredictionRow> = out
                    .predictions
                    .iter()
                    .filter(|r| r.k == k && r.d == Some(d) && r.n == Some(n) && r.order_tag == "leading")
                    .collect();
                let xs: Vec<f64> = pts.iter().map(|r| r.chi.unwrap() as f64).collect();
                let ys: Vec<f64> = pts.iter().map(|r| r.residual_estimate.unwrap()).collect();
                if let Some((e, se)) = fit_exponent(&xs, &ys) {
                    out.predictions.push(fit_row("otoc_rmpu_chi_exponent", k, Some(d), Some(n), e, se));
                    let pass = (e - CHI_EXPONENT).abs() <= CHI_EXPONENT_TOL;
                    out.checks.push(Check::new(format!("rmpu_chi_exponent[k={k},d={d},n={n}]"), pass, format!("fitted exponent {e:.4}")));
                }
            }
        }
    }
    Ok(out)
}

fn distinct_dn(geoms: &[RmpuGeometry]) -> Vec<(u64, usize)> {
    let mut v: Vec<(u64, usize)> = geoms.iter().map(|g| (g.d, g.n)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

// ---------------------------------------------------------------------------
// frame potential

pub fn frame_potential(ks: &[usize], geoms: &[RmpuGeometry], samples: usize, seed: u64) -> Result<OtocOutput> {
    for g in geoms {
        g.validate()?;
    }
    let points: Vec<(usize, RmpuGeometry)> = ks.iter().flat_map(|&k| geoms.iter().map(move |g| (k, *g))).collect();
    let per_point: Vec<Result<(Vec<PredictionRow>, Vec<Check>, Option<(EstimateRow, Check)>)>> = points
        .par_iter()
        .map(|&(k, g)| {
            let exact: Rational = frame_potential_rmpu_exact(&g, k)?;
            let asym: Rational = frame_potential_rmpu_asymptotic(&g, k)?;
            let haar = Rational::from_integer(frame_potential_haar(k));
            let row = |value: f64, tag: &str, res: Option<f64>| PredictionRow {
                quantity: "frame_potential".into(),
                k,
                d: Some(g.d),
                r: Some(g.r),
                n: Some(g.n),
                chi: Some(g.chi()),
                dim: g.dim(),
                value,
                order_tag: tag.into(),
                residual_estimate: res,
            };
            let rows = vec![
                row(exact.as_f64(), "exact", None),
                row(asym.as_f64(), "asymptotic", Some((exact.clone() - asym).as_f64().abs())),
                row(haar.as_f64(), "haar", Some((exact.clone() - haar.clone()).as_f64().abs())),
            ];
            let mut checks = Vec::new();
            if g.n == 1 {
                checks.push(Check::new(
                    format!("haar_at_single_gate[k={k},d={},r={}]", g.d, g.r),
                    exact == haar,
                    format!("exact {} vs k! {}", format_rational(&exact), haar),
                ));
            }
            let mc = match g.dim() {
                Some(dd) if samples > 0 && dd as usize <= DENSE_DIM_CAP => {
                    let est = mc_frame_potential(&EnsembleConfig::rmpu(g, seed, samples), k)?;
                    let name = format!("mc_frame_potential[k={k},d={},r={},n={}]", g.d, g.r, g.n);
                    Some((estimate_row(&est, k, Some(&g), dd), mc_check(&name, &est, exact.as_f64())))
                }
                _ => None,
            };
            Ok((rows, checks, mc))
        })
        .collect();
    let mut out = OtocOutput { predictions: Vec::new(), estimates: Vec::new(), checks: Vec::new() };
    for p in per_point {
        let (rows, checks, mc) = p?;
        out.predictions.extend(rows);
        out.checks.extend(checks);
        if let Some((e, c)) = mc {
            out.estimates.push(e);
            out.checks.push(c);
        }
    }
    for &k in ks {
        for (d, n) in distinct_dn(geoms) {
            let pts: Vec<&PredictionRow> = out
                .predictions
                .iter()
                .filter(|r| r.k == k && r.d == Some(d) && r.n == Some(n) && r.order_tag == "asymptotic")
                .collect();
            if pts.len() < 4 || n == 1 {
                continue;
            }
            let xs: Vec<f64> = pts.iter().map(|r| r.chi.unwrap() as f64).collect();
            let ys: Vec<f64> = pts.iter().map(|r| r.residual_estimate.unwrap()).collect();
            if let Some((e, se)) = fit_exponent(&xs, &ys) {
                out.predictions.push(fit_row("frame_potential_residual_exponent", k, Some(d), Some(n), e, se));
                out.checks.push(Check::new(
                    format!("frame_residual_exponent[k={k},d={d},n={n}]"),
                    e <= FRAME_RESIDUAL_EXPONENT,
                    format!("fitted exponent {e:.4}"),
                ));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// counts, cumulants, identity

pub fn genus_counts(ks: &[usize]) -> Result<(Vec<GenusRow>, Vec<Check>)> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &k in ks {
        let g0 = count_multichains(k, 2)?;
        let g1 = count_genus_one_pairs(k)?;
        let kf = (1..=k).fold(BigInt::from(1), |a, i| a * BigInt::from(i));
        let table = TABLE2.get(k.wrapping_sub(1)).copied();
        if let Some((t0, t1)) = table {
            let pass = g0 == BigInt::from(t0) && g1 == t1;
            checks.push(Check::new(format!("table2[k={k}]"), pass, format!("computed ({g0}, {g1}) vs table ({t0}, {t1})")));
        }
        rows.push(GenusRow {
            k,
            nc2_genus0: g0.to_string(),
            nc2_genus1: g1,
            all_pairs: (&kf * &kf).to_string(),
            table_genus0: table.map(|t| t.0),
            table_genus1: table.map(|t| t.1),
        });
    }
    Ok((rows, checks))
}

pub fn nc_counts(max_k: usize, m: usize, timing: bool) -> Result<Vec<CountRow>> {
    (1..=max_k)
        .map(|k| {
            let t = std::time::Instant::now();
            let count = count_multichains(k, m)?;
            let ms = t.elapsed().as_secs_f64() * 1e3;
            Ok(CountRow { k, m, count: count.to_string(), wall_time_ms: timing.then_some(ms) })
        })
        .collect()
}

pub fn cumulant_rows(m: &MomentSequence<Rational>) -> Result<(Vec<CumulantRow>, Check)> {
    let c = cumulants_from_moments(m)?;
    let back = moments_from_cumulants(&c)?;
    let rows = m
        .moments
        .iter()
        .zip(&c.kappas)
        .enumerate()
        .map(|(i, (mm, kk))| CumulantRow { order: i + 1, moment: format_rational(mm), cumulant: format_rational(kk) })
        .collect();
    Ok((rows, Check::new("cumulant_round_trip", &back == m, "moments → cumulants → moments")))
}

pub fn identity_rows(dims: &[u64], ks: &[usize]) -> Result<(Vec<IdentityRow>, Vec<Check>)> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for &dim in dims {
        for &k in ks {
            let rep = verify_frame_otoc_identity(dim as usize, k)?;
            checks.push(Check::new(format!("frame_otoc_identity[D={dim},k={k}]"), rep.pass, format!("relative error {:e}", rep.rel_error)));
            rows.push(IdentityRow {
                dim: rep.dim,
                k: rep.k,
                lhs: rep.lhs,
                rhs: rep.rhs,
                rel_error: rep.rel_error,
                terms: rep.terms,
                pass: rep.pass,
            });
        }
    }
    Ok((rows, checks))
}

/// `k!` as f64, for report columns.
pub fn factorial_f64(k: usize) -> f64 {
    frame_potential_haar(k).to_f64().unwrap_or(f64::INFINITY)
}
