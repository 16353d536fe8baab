//! Browser bindings: each export takes plain arguments and returns a JSON
//! string, either the result rows or `{"error": message}`.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use rmpu_core::freeprob::free_otoc_prediction;
use rmpu_core::io::parse_moments;
use rmpu_core::ncposet::{count_genus_one_pairs, count_multichains};
use rmpu_core::predict::{
    frame_potential_haar, frame_potential_rmpu_asymptotic, frame_potential_rmpu_exact, haar_otoc_exact,
    rmpu_otoc_exact, RmpuGeometry,
};
use rmpu_core::Scalar;

type Res<T> = std::result::Result<T, String>;

#[derive(Serialize)]
struct OtocRow {
    chi: u64,
    dim: u64,
    rmpu: f64,
    haar: f64,
    free: f64,
}

#[derive(Serialize)]
struct FrameRow {
    chi: u64,
    dim: u64,
    exact: f64,
    asymptotic: f64,
    haar: f64,
}

#[derive(Serialize)]
struct CountRow {
    k: usize,
    genus0: String,
    genus1: u64,
    all_pairs: String,
}

fn respond<T: Serialize>(r: Res<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn parse_list(s: &str) -> Res<Vec<u64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse::<u64>().map_err(err)).collect()
}

fn geometry(d: u64, n: usize, chi: u64) -> Res<RmpuGeometry> {
    if d < 2 {
        return Err("d must be at least 2".into());
    }
    let mut r = 0u32;
    let mut p = 1u64;
    while p < chi {
        p = p.checked_mul(d).ok_or("chi overflows")?;
        r += 1;
    }
    if p != chi || r == 0 {
        return Err(format!("chi = {chi} is not a positive power of d = {d}"));
    }
    let g = RmpuGeometry::staircase(d, r, n);
    g.validate().map_err(err)?;
    Ok(g)
}

fn otoc_rows(k: usize, d: u64, n: usize, chi_list: &str, moments_a: &str, moments_b: &str) -> Res<Vec<OtocRow>> {
    let ma = parse_moments(moments_a).map_err(err)?;
    let mb = parse_moments(moments_b).map_err(err)?;
    let free = free_otoc_prediction(&ma, &mb, k).map_err(err)?.as_f64();
    parse_list(chi_list)?
        .into_iter()
        .map(|chi| {
            let g = geometry(d, n, chi)?;
            let dim = g.dim().ok_or("dimension overflows")?;
            Ok(OtocRow {
                chi,
                dim,
                rmpu: rmpu_otoc_exact(&ma, &mb, &g, k).map_err(err)?.as_f64(),
                haar: haar_otoc_exact(&ma, &mb, dim, k).map_err(err)?.as_f64(),
                free,
            })
        })
        .collect()
}

fn frame_rows(k: usize, d: u64, n: usize, chi_list: &str) -> Res<Vec<FrameRow>> {
    let haar = frame_potential_haar(k).to_string().parse::<f64>().map_err(err)?;
    parse_list(chi_list)?
        .into_iter()
        .map(|chi| {
            let g = geometry(d, n, chi)?;
            Ok(FrameRow {
                chi,
                dim: g.dim().ok_or("dimension overflows")?,
                exact: frame_potential_rmpu_exact::<rmpu_core::Rational>(&g, k).map_err(err)?.as_f64(),
                asymptotic: frame_potential_rmpu_asymptotic::<rmpu_core::Rational>(&g, k).map_err(err)?.as_f64(),
                haar,
            })
        })
        .collect()
}

fn count_rows(max_k: usize) -> Res<Vec<CountRow>> {
    (1..=max_k)
        .map(|k| {
            let kf = frame_potential_haar(k);
            Ok(CountRow {
                k,
                genus0: count_multichains(k, 2).map_err(err)?.to_string(),
                genus1: count_genus_one_pairs(k).map_err(err)?,
                all_pairs: (&kf * &kf).to_string(),
            })
        })
        .collect()
}

/// Exact RMPU, Haar and free OTOC for each `χ` in a comma list. Moments are
/// JSON arrays of rationals, e.g. `["1/2","1/2"]`.
#[wasm_bindgen]
pub fn otoc_vs_chi(k: usize, d: u64, n: usize, chi_list: &str, moments_a: &str, moments_b: &str) -> String {
    respond(otoc_rows(k, d, n, chi_list, moments_a, moments_b))
}

/// Exact and asymptotic RMPU frame potentials for each `χ` in a comma list.
#[wasm_bindgen]
pub fn frame_potential_vs_chi(k: usize, d: u64, n: usize, chi_list: &str) -> String {
    respond(frame_rows(k, d, n, chi_list))
}

/// Genus-0 and genus-1 pair counts in `S_k` for `k = 1..=max_k`.
#[wasm_bindgen]
pub fn nc_counts(max_k: usize) -> String {
    respond(count_rows(max_k))
}
