//! Dense Monte Carlo sampling of Haar and RMPU ensembles.
//!
//! Every sample `i` draws from its own ChaCha8 stream `(seed, i)`, and
//! per-sample values are reduced in index order, so estimates are
//! bit-reproducible regardless of the number of worker threads.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observable::{max_abs, ObservableSpec};
use crate::predict::{RmpuGeometry, Variant};

/// Largest dense dimension the simulator will build.
pub const DENSE_DIM_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Ensemble {
    GlobalHaar { dim: usize },
    Rmpu { geometry: RmpuGeometry },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub ensemble: Ensemble,
    pub seed: u64,
    pub samples: usize,
}

impl EnsembleConfig {
    pub fn haar(dim: usize, seed: u64, samples: usize) -> Self {
        EnsembleConfig { ensemble: Ensemble::GlobalHaar { dim }, seed, samples }
    }

    pub fn rmpu(geometry: RmpuGeometry, seed: u64, samples: usize) -> Self {
        EnsembleConfig { ensemble: Ensemble::Rmpu { geometry }, seed, samples }
    }

    pub fn dim(&self) -> Result<usize> {
        let dim = match self.ensemble {
            Ensemble::GlobalHaar { dim } => dim,
            Ensemble::Rmpu { geometry } => {
                geometry.validate()?;
                geometry
                    .dim()
                    .and_then(|d| usize::try_from(d).ok())
                    .ok_or_else(|| Error::CapExceeded("dimension overflow".into()))?
            }
        };
        if dim == 0 || dim > DENSE_DIM_CAP {
            return Err(Error::CapExceeded(format!("dense dimension {dim} (cap {DENSE_DIM_CAP})")));
        }
        Ok(dim)
    }

    /// Number of sites and local dimension used to embed observables.
    pub fn chain(&self) -> Result<(usize, usize)> {
        Ok(match self.ensemble {
            Ensemble::GlobalHaar { dim } => (1, dim),
            Ensemble::Rmpu { geometry } => (geometry.sites(), geometry.d as usize),
        })
    }

    fn validate(&self) -> Result<usize> {
        if self.samples < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        self.dim()
    }

    /// Independent unitary for sample `index`.
    pub fn sample(&self, index: u64) -> Result<DMatrix<Complex64>> {
        let mut rng = stream(self.seed, index);
        self.sample_with(&mut rng)
    }

    fn sample_with(&self, rng: &mut ChaCha8Rng) -> Result<DMatrix<Complex64>> {
        match self.ensemble {
            Ensemble::GlobalHaar { dim } => Ok(sample_haar_unitary(dim, rng)),
            Ensemble::Rmpu { geometry } => build_rmpu(&geometry, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub quantity: String,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

impl EstimateRecord {
    fn from_values(quantity: &str, values: &[f64], seed: u64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        EstimateRecord { quantity: quantity.to_string(), mean, stderr: (var / n).sqrt(), samples: values.len(), seed }
    }

    /// Relative standard error; large values flag heavy-tailed estimators.
    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.mean.abs().max(f64::MIN_POSITIVE)
    }

    /// Advice printed when the estimate is too noisy to be useful.
    pub fn guidance(&self) -> Option<String> {
        let rel = self.relative_stderr();
        (rel > 0.1).then(|| {
            let needed = (self.samples as f64 * (rel / 0.1).powi(2)).ceil() as u64;
            format!(
                "{}: relative stderr {:.1}% exceeds 10%; about {} samples would reach 10%",
                self.quantity,
                100.0 * rel,
                needed
            )
        })
    }

    /// `|mean − target| ≤ nsigma·stderr`, with an absolute floor for
    /// estimators whose per-sample values are constant.
    pub fn agrees_with(&self, target: f64, nsigma: f64) -> bool {
        (self.mean - target).abs() <= (nsigma * self.stderr).max(1e-10 * target.abs().max(1.0))
    }
}

/// ChaCha8 stream for sample `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Haar unitary from the QR decomposition of a complex Ginibre matrix, with
/// the phases of `R`'s diagonal moved into `Q`.
pub fn sample_haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `M ← (1_left ⊗ G ⊗ 1_right)·M` without materializing the Kronecker product.
pub fn apply_local_left(m: &mut DMatrix<Complex64>, g: &DMatrix<Complex64>, left: usize, right: usize) {
    let gd = g.nrows();
    let mut buf = vec![Complex64::new(0.0, 0.0); gd];
    for c in 0..m.ncols() {
        for l in 0..left {
            for rr in 0..right {
                let idx = |j: usize| (l * gd + j) * right + rr;
                for (i, slot) in buf.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..gd {
                        acc += g[(i, j)] * m[(idx(j), c)];
                    }
                    *slot = acc;
                }
                for (i, v) in buf.iter().enumerate() {
                    m[(idx(i), c)] = *v;
                }
            }
        }
    }
}

/// Dense RMPU with gates `i = 1..=n` on sites `i..=i+r`. Gates are drawn in
/// the order `U₁, …, U_n` (then `V₁, …, V_{n−1}` for two floors).
pub fn build_rmpu(geom: &RmpuGeometry, rng: &mut ChaCha8Rng) -> Result<DMatrix<Complex64>> {
    geom.validate()?;
    let dim = geom
        .dim()
        .and_then(|d| usize::try_from(d).ok())
        .filter(|&d| d <= DENSE_DIM_CAP)
        .ok_or_else(|| Error::CapExceeded(format!("RMPU dimension above {DENSE_DIM_CAP}")))?;
    let d = geom.d as usize;
    let gate_dim = geom.gate_dim() as usize;
    let sites = geom.sites();
    let n = geom.n;
    let upper: Vec<DMatrix<Complex64>> = (0..n).map(|_| sample_haar_unitary(gate_dim, rng)).collect();
    let lower: Vec<DMatrix<Complex64>> = if geom.variant == Variant::TwoFloor {
        (0..n - 1).map(|_| sample_haar_unitary(gate_dim, rng)).collect()
    } else {
        Vec::new()
    };
    // gate i (0-based) covers sites i..=i+r
    let span = |i: usize| (d.pow(i as u32), d.pow((sites - i - geom.r as usize - 1) as u32));
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    let mut left_mul = |g: &DMatrix<Complex64>, i: usize| {
        let (l, r) = span(i);
        apply_local_left(&mut u, g, l, r);
    };
    match geom.variant {
        Variant::Staircase => {
            for i in (0..n).rev() {
                left_mul(&upper[i], i);
            }
        }
        Variant::Mirrored => {
            for (i, g) in upper.iter().enumerate() {
                left_mul(g, i);
            }
        }
        Variant::TwoFloor => {
            for (i, g) in lower.iter().enumerate() {
                left_mul(g, i);
            }
            for i in (0..n).rev() {
                left_mul(&upper[i], i);
            }
        }
    }
    Ok(u)
}

fn map_samples<F>(count: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count as u64).map(f).collect()
    }
}

fn check_observable(spec: &ObservableSpec, config: &EnsembleConfig) -> Result<DMatrix<Complex64>> {
    let (sites, site_dim) = config.chain()?;
    if spec.site_dim != site_dim && !(sites == 1 && spec.first_site == 0) {
        return Err(Error::InvalidInput(format!(
            "observable site dimension {} does not match the ensemble's {site_dim}",
            spec.site_dim
        )));
    }
    let full = if sites == 1 {
        let dim = config.dim()?;
        let rest = dim / spec.local_dim();
        if rest * spec.local_dim() != dim {
            return Err(Error::InvalidInput("observable does not factor the Hilbert space".into()));
        }
        let left = spec.site_dim.pow(spec.first_site as u32);
        let right = rest / left.max(1);
        let id = |n: usize| DMatrix::<Complex64>::identity(n, n);
        id(left).kronecker(&spec.matrix).kronecker(&id(right))
    } else {
        spec.embed(sites)?
    };
    Ok(full)
}

/// `(1/D) tr[(U†AU·B)^k]` per sample, averaged.
pub fn mc_otoc(config: &EnsembleConfig, a: &ObservableSpec, b: &ObservableSpec, k: usize) -> Result<EstimateRecord> {
    let dim = config.validate()?;
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let a_full = check_observable(a, config)?;
    let b_full = check_observable(b, config)?;
    let values = map_samples(config.samples, |i| {
        let u = config.sample(i)?;
        let au = u.adjoint() * &a_full * &u;
        let x = au * &b_full;
        let mut p = x.clone();
        for _ in 1..k {
            p = &p * &x;
        }
        let tr = p.trace() / dim as f64;
        if tr.im.abs() > 1e-8 * tr.norm().max(1.0) {
            return Err(Error::Consistency(format!("OTOC sample has imaginary part {:e}", tr.im)));
        }
        Ok(tr.re)
    })?;
    Ok(EstimateRecord::from_values(&format!("otoc_k{k}"), &values, config.seed))
}

/// `|tr(UV†)|^{2k}` over independent pairs.
pub fn mc_frame_potential(config: &EnsembleConfig, k: usize) -> Result<EstimateRecord> {
    config.validate()?;
    let values = map_samples(config.samples, |i| {
        let mut rng = stream(config.seed, i);
        let u = config.sample_with(&mut rng)?;
        let v = config.sample_with(&mut rng)?;
        let t: Complex64 = u.iter().zip(v.iter()).map(|(x, y)| x * y.conj()).sum();
        Ok(t.norm_sqr().powi(k as i32))
    })?;
    Ok(EstimateRecord::from_values(&format!("frame_potential_k{k}"), &values, config.seed))
}

/// Any per-sample scalar statistic of the ensemble, e.g. `|tr U|²`.
pub fn mc_statistic<F>(config: &EnsembleConfig, name: &str, f: F) -> Result<(EstimateRecord, Vec<f64>)>
where
    F: Fn(&DMatrix<Complex64>) -> f64 + Sync + Send,
{
    config.validate()?;
    let values = map_samples(config.samples, |i| Ok(f(&config.sample(i)?)))?;
    Ok((EstimateRecord::from_values(name, &values, config.seed), values))
}

/// Number of singular values above `tol·σ_max` of `U` reshaped across the
/// cut after `cut_sites` sites (operator Schmidt rank).
pub fn operator_schmidt_rank(u: &DMatrix<Complex64>, site_dim: usize, cut_sites: usize, tol: f64) -> Result<usize> {
    let dim = u.nrows();
    let left = site_dim.pow(cut_sites as u32);
    if left == 0 || dim % left != 0 {
        return Err(Error::InvalidInput("cut does not factor the dimension".into()));
    }
    let right = dim / left;
    let m = DMatrix::from_fn(left * left, right * right, |row, col| {
        let (a, ap) = (row / left, row % left);
        let (b, bp) = (col / right, col % right);
        u[(a * right + b, ap * right + bp)]
    });
    let sv = m.singular_values();
    let max = sv.iter().fold(0.0f64, |x, &y| x.max(y));
    Ok(sv.iter().filter(|&&s| s > tol * max).count())
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    ys.sort_by(|a, b| a.total_cmp(b));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j, mut stat) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        stat = stat.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * stat;
    (stat, kolmogorov_q(lambda))
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Max-entry deviation of `U†U` from the identity.
pub fn unitarity_residual(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - DMatrix::<Complex64>::identity(n, n)))
}
