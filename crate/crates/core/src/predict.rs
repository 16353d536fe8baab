//! Analytic OTOC and frame-potential predictions for the global Haar ensemble
//! and for random matrix product unitaries (RMPUs).
//!
//! Conventions: `(a∘b)(i) = a(b(i))`, `T_π|x₁…x_k⟩ = |x_{π⁻¹(1)}…x_{π⁻¹(k)}⟩`,
//! so `T_π T_σ = T_{πσ}` and
//! `tr[A₁B₁A₂B₂⋯A_kB_k] = tr[(⊗A_i)(⊗B_i) T_{γ⁻¹}]`.
//!
//! RMPU geometry: sites `1..=N`, `N = r + n`; gate `i` acts on sites
//! `i..=i+r` and `U = U₁U₂⋯U_n`. The canonical OTOC has `A` on the block of
//! gate 1 and `B` on the block of gate `n`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num::bigint::BigInt;
use num::{One, ToPrimitive};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeprob::{free_otoc_prediction, CumulantSequence, MomentSequence};
use crate::ncposet::{mobius_of_type, nc_poset};
use crate::scalar::{rat, Rational, Scalar};
use crate::symgroup::{compose_unchecked, factorial, partitions, Permutation};
use crate::weingarten::{class_algebra, weingarten_cached, wg_coeff_classes, ClassAlgebra};

/// Dense pair tables are built up to this `k`.
pub const DENSE_CAP: usize = 6;
/// Class-triple histograms are built up to this `k`.
pub const HISTOGRAM_CAP: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `U = U₁U₂⋯U_n`.
    Staircase,
    /// `U = U_n⋯U₂U₁`.
    Mirrored,
    /// `U = (U₁⋯U_n)(V_{n−1}⋯V₁)`.
    TwoFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RmpuGeometry {
    pub d: u64,
    pub r: u32,
    pub n: usize,
    pub variant: Variant,
}

impl RmpuGeometry {
    pub fn staircase(d: u64, r: u32, n: usize) -> Self {
        RmpuGeometry { d, r, n, variant: Variant::Staircase }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || self.r < 1 || self.n < 1 {
            return Err(Error::InvalidInput(format!(
                "geometry needs d ≥ 2, r ≥ 1, n ≥ 1 (got d={}, r={}, n={})",
                self.d, self.r, self.n
            )));
        }
        if self.variant == Variant::TwoFloor && self.n < 2 {
            return Err(Error::InvalidInput("two-floor geometry needs n ≥ 2".into()));
        }
        Ok(())
    }

    pub fn chi(&self) -> u64 {
        self.d.pow(self.r)
    }

    pub fn sites(&self) -> usize {
        self.r as usize + self.n
    }

    /// `D = χ dⁿ`; `None` on overflow.
    pub fn dim(&self) -> Option<u64> {
        self.d.checked_pow(self.r + self.n as u32)
    }

    /// Local gate dimension `χd`.
    pub fn gate_dim(&self) -> u64 {
        self.chi() * self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderTag {
    Exact,
    Leading,
    Subleading,
}

impl OrderTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrderTag::Exact => "exact",
            OrderTag::Leading => "leading",
            OrderTag::Subleading => "subleading",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtocPrediction {
    pub value: f64,
    pub order_tag: OrderTag,
    /// Size of the neglected terms, e.g. `"chi^-2"`; empty for exact values.
    pub error_scale: String,
}

// ---------------------------------------------------------------------------
// shared tables

/// Dense S_k data for transfer-matrix contractions.
#[derive(Debug)]
pub struct ReplicaTables {
    pub alg: Arc<ClassAlgebra>,
    /// `quot[a·k! + b]` = class of `a⁻¹b`.
    quot: Vec<u8>,
    /// Class of `γ⁻¹π` for each `π`.
    pub gamma_class: Vec<usize>,
}

impl ReplicaTables {
    fn new(k: usize) -> Result<Self> {
        if k > DENSE_CAP {
            return Err(Error::CapExceeded(format!("dense replica tables for k = {k}")));
        }
        let alg = class_algebra(k)?;
        let t = &alg.table;
        let n = t.len();
        let lookup = class_lookup(k);
        let mut quot = vec![0u8; n * n];
        for a in 0..n {
            let ai = &t.perms[t.inv[a]];
            for b in 0..n {
                quot[a * n + b] = lookup[&compose_unchecked(ai, &t.perms[b]).cycle_type()] as u8;
            }
        }
        let gi = Permutation::long_cycle(k).inverse();
        let gamma_class = t.perms.iter().map(|p| lookup[&compose_unchecked(&gi, p).cycle_type()]).collect();
        Ok(ReplicaTables { alg, quot, gamma_class })
    }

    pub fn len(&self) -> usize {
        self.alg.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn quot(&self, a: usize, b: usize) -> usize {
        self.quot[a * self.len() + b] as usize
    }

    pub fn k(&self) -> usize {
        self.alg.table.k
    }

    #[inline]
    fn dist(&self, a: usize, b: usize) -> usize {
        self.k() - self.alg.table.class_ncycles(self.quot(a, b))
    }

    /// `dist(π, γ)`.
    #[inline]
    fn dist_top(&self, p: usize) -> usize {
        self.k() - self.alg.table.class_ncycles(self.gamma_class[p])
    }

    #[inline]
    fn level(&self, p: usize) -> usize {
        self.k() - self.alg.table.ncycles[p]
    }

    /// `y(π) = Σ_σ f[class(π⁻¹σ)] x(σ)`.
    fn class_matvec<T: Scalar>(&self, f: &[T], x: &[T]) -> Vec<T> {
        let n = self.len();
        let p = f.len();
        (0..n)
            .map(|a| {
                let mut bucket = vec![T::zero(); p];
                for (b, xb) in x.iter().enumerate() {
                    if !xb.is_zero() {
                        let c = self.quot(a, b);
                        bucket[c] = bucket[c].clone() + xb.clone();
                    }
                }
                bucket
                    .into_iter()
                    .zip(f)
                    .filter(|(s, _)| !s.is_zero())
                    .fold(T::zero(), |acc, (s, fv)| acc + s * fv.clone())
            })
            .collect()
    }

    /// Dense `M(a,b) = f[class(a⁻¹b)]`.
    fn class_matrix<T: Scalar>(&self, f: &[T]) -> Vec<Vec<T>> {
        let n = self.len();
        (0..n).map(|a| (0..n).map(|b| f[self.quot(a, b)].clone()).collect()).collect()
    }
}

fn class_lookup(k: usize) -> HashMap<Vec<usize>, usize> {
    partitions(k).into_iter().enumerate().map(|(i, c)| (c, i)).collect()
}

static REPLICA: OnceLock<Mutex<HashMap<usize, Arc<ReplicaTables>>>> = OnceLock::new();

pub fn replica_tables(k: usize) -> Result<Arc<ReplicaTables>> {
    let cache = REPLICA.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(&k) {
        return Ok(t.clone());
    }
    let built = Arc::new(ReplicaTables::new(k)?);
    let mut guard = cache.lock().expect("cache lock");
    Ok(guard.entry(k).or_insert(built).clone())
}

/// Counts of pairs `(π, σ) ∈ S_k²` by
/// `(excess/2, class(π), class(π⁻¹σ), class(σ⁻¹γ))`, where
/// `excess = dist(e,π) + dist(π,σ) + dist(σ,γ) − (k−1)`.
#[derive(Debug)]
pub struct PairHistogram {
    pub k: usize,
    pub p: usize,
    pub counts: Vec<u64>,
    pub max_genus: usize,
}

impl PairHistogram {
    fn new(k: usize) -> Result<Self> {
        if k == 0 || k > HISTOGRAM_CAP {
            return Err(Error::CapExceeded(format!("pair histogram for k = {k}")));
        }
        let parts = partitions(k);
        let p = parts.len();
        let lookup = class_lookup(k);
        let perms = crate::symgroup::enumerate_unchecked(k);
        let gi = Permutation::long_cycle(k).inverse();
        let cls: Vec<usize> = perms.iter().map(|q| lookup[&q.cycle_type()]).collect();
        let top: Vec<usize> = perms.iter().map(|q| lookup[&compose_unchecked(&gi, q).cycle_type()]).collect();
        let max_genus = k;
        let stride = p * p * p;
        let row = |a: usize| -> Vec<u64> {
            let mut local = vec![0u64; (max_genus + 1) * stride];
            let ai = perms[a].inverse();
            let la = k - parts[cls[a]].len();
            for b in 0..perms.len() {
                let tau = lookup[&compose_unchecked(&ai, &perms[b]).cycle_type()];
                let nu = top[b];
                let total = la + (k - parts[tau].len()) + (k - parts[nu].len());
                let ex = total - (k - 1);
                local[(ex / 2) * stride + (cls[a] * p + tau) * p + nu] += 1;
            }
            local
        };
        let n = perms.len();
        #[cfg(feature = "parallel")]
        let counts = {
            use rayon::prelude::*;
            (0..n)
                .into_par_iter()
                .map(row)
                .reduce(|| vec![0u64; (max_genus + 1) * stride], |mut x, y| {
                    x.iter_mut().zip(y).for_each(|(u, v)| *u += v);
                    x
                })
        };
        #[cfg(not(feature = "parallel"))]
        let counts = (0..n).map(row).fold(vec![0u64; (max_genus + 1) * stride], |mut x, y| {
            x.iter_mut().zip(y).for_each(|(u, v)| *u += v);
            x
        });
        Ok(PairHistogram { k, p, counts, max_genus })
    }

    #[inline]
    pub fn count(&self, genus: usize, lam: usize, tau: usize, nu: usize) -> u64 {
        if genus > self.max_genus {
            return 0;
        }
        self.counts[genus * self.p * self.p * self.p + (lam * self.p + tau) * self.p + nu]
    }

    /// Number of pairs at a given genus.
    pub fn genus_total(&self, genus: usize) -> u64 {
        let s = self.p * self.p * self.p;
        if genus > self.max_genus {
            return 0;
        }
        self.counts[genus * s..(genus + 1) * s].iter().sum()
    }

    /// `Σ count · f(τ) · a(λ) · b(ν)` over a set of genera.
    fn contract<T: Scalar>(&self, genera: &[usize], f: &[T], a: &[T], b: &[T]) -> T {
        let mut acc = T::zero();
        for &g in genera {
            for lam in 0..self.p {
                if a[lam].is_zero() {
                    continue;
                }
                for tau in 0..self.p {
                    if f[tau].is_zero() {
                        continue;
                    }
                    for nu in 0..self.p {
                        let c = self.count(g, lam, tau, nu);
                        if c != 0 && !b[nu].is_zero() {
                            acc = acc + T::from_i64(c as i64) * f[tau].clone() * a[lam].clone() * b[nu].clone();
                        }
                    }
                }
            }
        }
        acc
    }
}

static HISTOGRAMS: OnceLock<Mutex<HashMap<usize, Arc<PairHistogram>>>> = OnceLock::new();

pub fn pair_histogram(k: usize) -> Result<Arc<PairHistogram>> {
    let cache = HISTOGRAMS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(&k) {
        return Ok(t.clone());
    }
    let built = Arc::new(PairHistogram::new(k)?);
    let mut guard = cache.lock().expect("cache lock");
    Ok(guard.entry(k).or_insert(built).clone())
}

/// `base^{#(τ)}` per class, in the order of [`partitions`].
fn class_pow<T: Scalar>(base: u64, k: usize) -> Vec<T> {
    partitions(k).iter().map(|c| T::from_u64_pow(base, c.len())).collect()
}

fn moments_by_class<T: Scalar>(m: &MomentSequence<T>, k: usize) -> Result<Vec<T>> {
    partitions(k).iter().map(|c| m.partitioned_type(c)).collect()
}

fn mobius_by_class<T: Scalar>(k: usize) -> Vec<T> {
    partitions(k).iter().map(|c| T::from_i64(mobius_of_type(c))).collect()
}

fn wg_by_class<T: Scalar>(dim: u64, k: usize) -> Result<Vec<T>> {
    let table = weingarten_cached(dim, k)?;
    table.class_values::<T>()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Haar

/// Exact Haar-averaged OTOC
/// `(1/D) Σ_{π,σ} Wg(π,σ) D^{#π}⟨A⟩_π D^{#(σ⁻¹γ)}⟨B⟩_{σ⁻¹γ}`.
pub fn haar_otoc_exact<T: Scalar>(ma: &MomentSequence<T>, mb: &MomentSequence<T>, dim: u64, k: usize) -> Result<T> {
    check_k(k)?;
    ma.require(k)?;
    mb.require(k)?;
    if dim <= k as u64 {
        return Err(Error::DimensionTooSmall { dim, k });
    }
    let h = pair_histogram(k)?;
    let pw: Vec<T> = class_pow(dim, k);
    let a: Vec<T> = moments_by_class(ma, k)?.into_iter().zip(&pw).map(|(x, w)| x * w.clone()).collect();
    let b: Vec<T> = moments_by_class(mb, k)?.into_iter().zip(&pw).map(|(x, w)| x * w.clone()).collect();
    let wg = wg_by_class::<T>(dim, k)?;
    let genera: Vec<usize> = (0..=h.max_genus).collect();
    Ok(h.contract(&genera, &wg, &a, &b) / T::from_u64_pow(dim, 1))
}

/// Leading order `C_FP` recomputed from the histogram (genus 0, Möbius weights).
pub fn free_otoc_from_histogram<T: Scalar>(ma: &MomentSequence<T>, mb: &MomentSequence<T>, k: usize) -> Result<T> {
    let h = pair_histogram(k)?;
    let a = moments_by_class(ma, k)?;
    let b = moments_by_class(mb, k)?;
    Ok(h.contract(&[0], &mobius_by_class::<T>(k), &a, &b))
}

/// `tr[(X₁⊗⋯⊗X_k) T_τ] = ∏_{cycles} tr[X_i X_{τ⁻¹(i)} X_{τ⁻²(i)} ⋯]`.
pub fn replica_trace(ops: &[DMatrix<Complex64>], tau: &Permutation) -> Result<Complex64> {
    if ops.len() != tau.k() {
        return Err(Error::IncompatibleK(ops.len(), tau.k()));
    }
    let inv = tau.inverse();
    let mut seen = vec![false; ops.len()];
    let mut acc = Complex64::new(1.0, 0.0);
    for start in 0..ops.len() {
        if seen[start] {
            continue;
        }
        let mut prod = ops[start].clone();
        seen[start] = true;
        let mut j = inv.apply(start);
        while j != start {
            prod = &prod * &ops[j];
            seen[j] = true;
            j = inv.apply(j);
        }
        acc *= prod.trace();
    }
    Ok(acc)
}

fn check_square(ops: &[DMatrix<Complex64>], dim: usize) -> Result<()> {
    for m in ops {
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "expected {dim}×{dim} operators, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

/// Haar average of `(1/D) tr[A⁽¹⁾_U B⁽¹⁾ ⋯ A⁽ᵏ⁾_U B⁽ᵏ⁾]` for explicit operators.
pub fn haar_multi_otoc_exact(
    ops_a: &[DMatrix<Complex64>],
    ops_b: &[DMatrix<Complex64>],
    dim: usize,
) -> Result<Complex64> {
    let k = ops_a.len();
    if ops_b.len() != k {
        return Err(Error::IncompatibleK(k, ops_b.len()));
    }
    check_k(k)?;
    check_square(ops_a, dim)?;
    check_square(ops_b, dim)?;
    let ctx = MultiOtocContext::new(dim, k)?;
    let a = ctx.a_vector(ops_a)?;
    let b = ctx.b_vector(ops_b)?;
    Ok(ctx.contract(&a, &b))
}

/// Precomputed Weingarten matrix for repeated multi-operator OTOC evaluation.
struct MultiOtocContext {
    dim: usize,
    perms: Vec<Permutation>,
    wg: DMatrix<f64>,
    gamma_inv: Permutation,
}

impl MultiOtocContext {
    fn new(dim: usize, k: usize) -> Result<Self> {
        let table = weingarten_cached(dim as u64, k)?;
        let perms = crate::symgroup::enumerate(k)?;
        let wg = table.to_dense_f64()?;
        Ok(MultiOtocContext { dim, perms, wg, gamma_inv: Permutation::long_cycle(k).inverse() })
    }

    /// `a(σ) = tr[(⊗A) T_{σ⁻¹}]`.
    fn a_vector(&self, ops: &[DMatrix<Complex64>]) -> Result<Vec<Complex64>> {
        self.perms.iter().map(|s| replica_trace(ops, &s.inverse())).collect()
    }

    /// `b(π) = tr[(⊗B) T_{γ⁻¹π}]`.
    fn b_vector(&self, ops: &[DMatrix<Complex64>]) -> Result<Vec<Complex64>> {
        self.perms
            .iter()
            .map(|p| replica_trace(ops, &compose_unchecked(&self.gamma_inv, p)))
            .collect()
    }

    fn contract(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let n = self.perms.len();
        let mut acc = Complex64::new(0.0, 0.0);
        for pi in 0..n {
            for sigma in 0..n {
                acc += self.wg[(pi, sigma)] * a[sigma] * b[pi];
            }
        }
        acc / self.dim as f64
    }
}

// ---------------------------------------------------------------------------
// RMPU network

/// Observables of product form across the RMPU sites, given by their moments.
///
/// `a_block` is `A` restricted to the first gate's block (sites `1..=r+1`),
/// `a_tail[j]` the factor on site `r+2+j`; `b_head[j]` is the factor of `B` on
/// site `1+j` and `b_block` the factor on the last block (sites `n..=N`).
#[derive(Debug, Clone)]
pub struct NetworkObservables<T> {
    pub a_block: MomentSequence<T>,
    pub a_tail: Vec<MomentSequence<T>>,
    pub b_head: Vec<MomentSequence<T>>,
    pub b_block: MomentSequence<T>,
}

impl<T: Scalar> NetworkObservables<T> {
    /// `A` on the first block, `B` on the last block, identity elsewhere.
    pub fn canonical(ma: &MomentSequence<T>, mb: &MomentSequence<T>, n: usize, k: usize) -> Self {
        NetworkObservables {
            a_block: ma.clone(),
            a_tail: vec![MomentSequence::identity(k); n - 1],
            b_head: vec![MomentSequence::identity(k); n - 1],
            b_block: mb.clone(),
        }
    }

    /// `A` on the first block and `B` on the single site `m` (1-based).
    pub fn at_site(ma: &MomentSequence<T>, mb: &MomentSequence<T>, geom: &RmpuGeometry, k: usize, m: usize) -> Result<Self> {
        if m == 0 || m > geom.sites() {
            return Err(Error::InvalidInput(format!("site {m} outside 1..={}", geom.sites())));
        }
        let mut obs = NetworkObservables::canonical(ma, &MomentSequence::identity(k), geom.n, k);
        if m < geom.n {
            obs.b_head[m - 1] = mb.clone();
        } else {
            obs.b_block = mb.clone();
        }
        Ok(obs)
    }
}

/// Exact RMPU-averaged OTOC for product-structured observables, contracted
/// gate by gate as a chain of `k! × k!` transfer steps.
pub fn rmpu_otoc_network<T: Scalar>(obs: &NetworkObservables<T>, geom: &RmpuGeometry, k: usize) -> Result<T> {
    geom.validate()?;
    check_k(k)?;
    match geom.variant {
        Variant::Staircase => {}
        Variant::Mirrored | Variant::TwoFloor => {
            return Err(Error::Unsupported(format!("exact contraction for {:?} geometry", geom.variant)))
        }
    }
    let n = geom.n;
    if obs.a_tail.len() != n - 1 || obs.b_head.len() != n - 1 {
        return Err(Error::InvalidInput("observable layout does not match the number of gates".into()));
    }
    let (d, chi) = (geom.d, geom.chi());
    let gate = chi * d;
    if gate <= k as u64 {
        return Err(Error::DimensionTooSmall { dim: gate, k });
    }
    let dim = geom
        .dim()
        .ok_or_else(|| Error::CapExceeded("total dimension overflows u64".into()))?;
    let rt = replica_tables(k)?;
    let cls = &rt.alg.table.class;
    let wg = wg_by_class::<T>(gate, k)?;
    let pw_gate: Vec<T> = class_pow(gate, k);
    let pw_d: Vec<T> = class_pow(d, k);
    let pw_chi: Vec<T> = class_pow(chi, k);

    let a0 = moments_by_class(&obs.a_block, k)?;
    let start: Vec<T> = (0..rt.len()).map(|s| pw_gate[cls[s]].clone() * a0[cls[s]].clone()).collect();
    let mut v = rt.class_matvec(&wg, &start);
    for i in 1..n {
        let bh = moments_by_class(&obs.b_head[i - 1], k)?;
        let at = moments_by_class(&obs.a_tail[i - 1], k)?;
        let u: Vec<T> = v
            .iter()
            .enumerate()
            .map(|(p, x)| x.clone() * pw_d[rt.gamma_class[p]].clone() * bh[rt.gamma_class[p]].clone())
            .collect();
        let t = rt.class_matvec(&pw_chi, &u);
        let s: Vec<T> = t
            .into_iter()
            .enumerate()
            .map(|(q, x)| x * pw_d[cls[q]].clone() * at[cls[q]].clone())
            .collect();
        v = rt.class_matvec(&wg, &s);
    }
    let bb = moments_by_class(&obs.b_block, k)?;
    let total = v
        .into_iter()
        .enumerate()
        .fold(T::zero(), |acc, (p, x)| acc + x * pw_gate[rt.gamma_class[p]].clone() * bb[rt.gamma_class[p]].clone());
    Ok(total / T::from_rational(&Rational::from_integer(BigInt::from(dim))))
}

/// Exact RMPU OTOC with `A` on the first block and `B` on the last block.
pub fn rmpu_otoc_exact<T: Scalar>(
    ma: &MomentSequence<T>,
    mb: &MomentSequence<T>,
    geom: &RmpuGeometry,
    k: usize,
) -> Result<T> {
    ma.require(k)?;
    mb.require(k)?;
    rmpu_otoc_network(&NetworkObservables::canonical(ma, mb, geom.n, k), geom, k)
}

/// Exact RMPU OTOC with `B` on site `m` only.
pub fn rmpu_otoc_exact_at_site<T: Scalar>(
    ma: &MomentSequence<T>,
    mb: &MomentSequence<T>,
    geom: &RmpuGeometry,
    k: usize,
    m: usize,
) -> Result<T> {
    ma.require(k)?;
    mb.require(k)?;
    rmpu_otoc_network(&NetworkObservables::at_site(ma, mb, geom, k, m)?, geom, k)
}

/// Number of gates that can influence the OTOC when `B` sits on site `m`:
/// gates `j > m` act on sites beyond `B` and cancel.
pub fn light_cone_layers(geom: &RmpuGeometry, m: usize) -> usize {
    m.clamp(1, geom.n)
}

/// Leading-order multichain sum over `π₁ ≤ σ₁ ≤ ⋯ ≤ σ_n ≤ γ` with weights
/// `∏ μ(πᵢ,σᵢ)`; checked against `C_FP` before returning.
pub fn rmpu_otoc_leading<T: Scalar>(ma: &MomentSequence<T>, mb: &MomentSequence<T>, n: usize, k: usize) -> Result<T> {
    check_k(k)?;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    ma.require(k)?;
    mb.require(k)?;
    let layers_a: Vec<MomentSequence<T>> =
        std::iter::once(ma.clone()).chain(std::iter::repeat(MomentSequence::identity(k)).take(n - 1)).collect();
    let layers_b: Vec<MomentSequence<T>> =
        std::iter::repeat(MomentSequence::identity(k)).take(n - 1).chain(std::iter::once(mb.clone())).collect();
    let value = multichain_sum(&layers_a, &layers_b, k)?;
    let fp = free_otoc_prediction(ma, mb, k)?;
    let consistent = if T::is_exact() {
        value == fp
    } else {
        (value.as_f64() - fp.as_f64()).abs() <= 1e-9 * fp.as_f64().abs().max(1.0)
    };
    if !consistent {
        return Err(Error::Consistency(format!(
            "multichain sum {} differs from the free prediction {}",
            value.as_f64(),
            fp.as_f64()
        )));
    }
    Ok(value)
}

/// Leading-order OTOC for observables with a factor on every layer:
/// `Σ_{π₁≤σ₁≤⋯≤σ_n≤γ} ∏ᵢ μ(πᵢ,σᵢ)⟨Aᵢ⟩_{πᵢ}⟨Bᵢ⟩_{σᵢ⁻¹γ}`.
pub fn rmpu_otoc_nonlocal_leading<T: Scalar>(
    layers_a: &[MomentSequence<T>],
    layers_b: &[MomentSequence<T>],
    k: usize,
) -> Result<T> {
    if layers_a.len() != layers_b.len() || layers_a.is_empty() {
        return Err(Error::InvalidInput("need the same nonzero number of A and B layers".into()));
    }
    for m in layers_a.iter().chain(layers_b) {
        m.require(k)?;
    }
    multichain_sum(layers_a, layers_b, k)
}

fn multichain_sum<T: Scalar>(layers_a: &[MomentSequence<T>], layers_b: &[MomentSequence<T>], k: usize) -> Result<T> {
    check_k(k)?;
    let poset = nc_poset(k)?;
    let len = poset.len();
    let comp: Vec<Permutation> = (0..len).map(|s| poset.elems[poset.kreweras_index(s)].clone()).collect();
    // x(π) accumulates chains ending at πᵢ, y(σ) chains ending at σᵢ
    let mut x: Vec<T> = vec![T::one(); len];
    let mut y: Vec<T> = vec![T::zero(); len];
    for (i, (la, lb)) in layers_a.iter().zip(layers_b).enumerate() {
        if i > 0 {
            x = (0..len)
                .map(|p| poset.down[p].iter().fold(T::zero(), |acc, &s| acc + y[s].clone()))
                .collect();
        }
        for (p, xv) in x.iter_mut().enumerate() {
            *xv = xv.clone() * la.partitioned(&poset.elems[p])?;
        }
        y = (0..len)
            .map(|s| {
                poset.down[s].iter().fold(T::zero(), |acc, &p| {
                    if x[p].is_zero() {
                        acc
                    } else {
                        acc + T::from_i64(poset.mobius(p, s)) * x[p].clone()
                    }
                })
            })
            .collect::<Vec<T>>();
        for (s, yv) in y.iter_mut().enumerate() {
            *yv = yv.clone() * lb.partitioned(&comp[s])?;
        }
    }
    Ok(y.into_iter().fold(T::zero(), |a, b| a + b))
}

// ---------------------------------------------------------------------------
// subleading coefficients

/// `c_k(A,B)`: the `D⁻²` coefficient of the Haar OTOC,
/// `Σ_{genus 0} Wg⁽¹⁾ ⟨A⟩_π⟨B⟩_{σ⁻¹γ} + Σ_{genus 1} μ ⟨A⟩_π⟨B⟩_{σ⁻¹γ}`.
pub fn subleading_coeff_haar<T: Scalar>(ma: &MomentSequence<T>, mb: &MomentSequence<T>, k: usize) -> Result<T> {
    check_k(k)?;
    ma.require(k)?;
    mb.require(k)?;
    let h = pair_histogram(k)?;
    let a = moments_by_class(ma, k)?;
    let b = moments_by_class(mb, k)?;
    let w1 = wg1_by_class::<T>(k)?;
    Ok(h.contract(&[0], &w1, &a, &b) + h.contract(&[1], &mobius_by_class::<T>(k), &a, &b))
}

fn wg1_by_class<T: Scalar>(k: usize) -> Result<Vec<T>> {
    Ok(wg_coeff_classes(k, 1)?
        .iter()
        .map(|c| T::from_rational(&Rational::from_integer(c.clone())))
        .collect())
}

fn kap<T: Scalar>(c: &CumulantSequence<T>, j: usize) -> T {
    c.kappa(j).clone()
}

fn int<T: Scalar>(v: i64) -> T {
    T::from_i64(v)
}

/// Closed forms of `c_k` in terms of free cumulants, `k ≤ 4`.
pub fn subleading_coeff_haar_closed<T: Scalar>(ka: &CumulantSequence<T>, kb: &CumulantSequence<T>, k: usize) -> Result<T> {
    if k > 4 || k == 0 {
        return Err(Error::Unsupported(format!("closed form c_k for k = {k}")));
    }
    if ka.kappas.len() < k || kb.kappas.len() < k {
        return Err(Error::InsufficientMoments { needed: k, available: ka.kappas.len().min(kb.kappas.len()) });
    }
    let a = |j| kap(ka, j);
    let b = |j| kap(kb, j);
    Ok(match k {
        1 => T::zero(),
        2 => -(a(2) * b(2)),
        3 => {
            a(3) * (int::<T>(-3) * b(1) * b(2) + b(3))
                - int::<T>(3) * a(1) * a(2) * (int::<T>(2) * b(1) * b(2) + b(3))
        }
        _ => {
            a(4) * (int::<T>(-6) * b(1) * b(1) * b(2) + b(2) * b(2) + int::<T>(4) * b(1) * b(3))
                + a(2) * a(2) * (int::<T>(-10) * b(1) * b(1) * b(2) + b(4))
                + int::<T>(4) * a(1) * a(3) * (int::<T>(-5) * b(1) * b(1) * b(2) + b(4))
                - int::<T>(2)
                    * a(1)
                    * a(1)
                    * a(2)
                    * (int::<T>(5)
                        * (int::<T>(2) * b(1) * b(1) * b(2) + b(2) * b(2) + int::<T>(2) * b(1) * b(3))
                        + int::<T>(3) * b(4))
        }
    })
}

/// `χ⁻²` coefficient `c̃_{k,n}` of the staircase RMPU OTOC:
/// `(n/d²) Σ_{genus 0} Wg⁽¹⁾⟨A⟩⟨B⟩` plus the sum over chains
/// `π₁,σ₁,…,σ_n` whose total length exceeds the geodesic by 2, each weighted
/// by `∏ μ(πᵢ,σᵢ) d^{−(Sᵢ−(k−1))}`, `Sᵢ = dist(e,πᵢ)+dist(πᵢ,σᵢ)+dist(σᵢ,γ)`.
pub fn subleading_coeff_rmpu<T: Scalar>(
    ma: &MomentSequence<T>,
    mb: &MomentSequence<T>,
    n: usize,
    d: u64,
    k: usize,
) -> Result<T> {
    check_k(k)?;
    if n == 0 || d < 2 {
        return Err(Error::InvalidInput("need n ≥ 1 and d ≥ 2".into()));
    }
    ma.require(k)?;
    mb.require(k)?;
    let h = pair_histogram(k)?;
    let a_cls = moments_by_class(ma, k)?;
    let b_cls = moments_by_class(mb, k)?;
    let w1 = wg1_by_class::<T>(k)?;
    let d2 = T::from_u64_pow(d, 2);
    let first = T::from_i64(n as i64) * h.contract(&[0], &w1, &a_cls, &b_cls) / d2;
    Ok(first + broken_chain_sum(&a_cls, &b_cls, n, d, k)?)
}

/// Dynamic programme over chains with partial excess in `{0, 2}`.
fn broken_chain_sum<T: Scalar>(a_cls: &[T], b_cls: &[T], n: usize, d: u64, k: usize) -> Result<T> {
    let rt = replica_tables(k)?;
    let cls = &rt.alg.table.class;
    let size = rt.len();
    let mu = mobius_by_class::<T>(k);
    let dinv: Vec<T> = (0..=2).map(|j| T::one() / T::from_u64_pow(d, j)).collect();
    let top_len = k - 1;
    // state[x][e]: chains ending at x with partial excess 2e
    let mut state: Vec<[T; 2]> = (0..size).map(|p| [a_cls[cls[p]].clone(), T::zero()]).collect();
    for gate in 0..n {
        if gate > 0 {
            // σ_{i−1} → π_i
            let mut next: Vec<[T; 2]> = vec![[T::zero(), T::zero()]; size];
            for (x, sx) in state.iter().enumerate() {
                if sx[0].is_zero() && sx[1].is_zero() {
                    continue;
                }
                for (y, ny) in next.iter_mut().enumerate() {
                    let step = rt.dist(x, y) + rt.level(x) - rt.level(y);
                    match step {
                        0 => {
                            ny[0] = ny[0].clone() + sx[0].clone();
                            ny[1] = ny[1].clone() + sx[1].clone();
                        }
                        2 => ny[1] = ny[1].clone() + sx[0].clone(),
                        _ => {}
                    }
                }
            }
            state = next;
        }
        // π_i → σ_i with gate weight
        let mut next: Vec<[T; 2]> = vec![[T::zero(), T::zero()]; size];
        for (x, sx) in state.iter().enumerate() {
            if sx[0].is_zero() && sx[1].is_zero() {
                continue;
            }
            for (y, ny) in next.iter_mut().enumerate() {
                let dxy = rt.dist(x, y);
                let step = dxy + rt.level(x) - rt.level(y);
                if step > 2 {
                    continue;
                }
                let gate_excess = rt.level(x) + dxy + rt.dist_top(y) - top_len;
                if gate_excess > 2 {
                    continue;
                }
                let w = mu[rt.quot(x, y)].clone() * dinv[gate_excess].clone();
                if step == 0 {
                    ny[0] = ny[0].clone() + w.clone() * sx[0].clone();
                    ny[1] = ny[1].clone() + w * sx[1].clone();
                } else {
                    ny[1] = ny[1].clone() + w * sx[0].clone();
                }
            }
        }
        state = next;
    }
    let mut acc = T::zero();
    for (x, sx) in state.iter().enumerate() {
        let closing = rt.level(x) + rt.dist_top(x) - top_len;
        let bval = b_cls[rt.gamma_class[x]].clone();
        match closing {
            0 => acc = acc + sx[1].clone() * bval,
            2 => acc = acc + sx[0].clone() * bval,
            _ => {}
        }
    }
    Ok(acc)
}

/// Closed forms of `c̃_{k,n}` in terms of free cumulants, `k ≤ 4`.
pub fn subleading_coeff_rmpu_closed<T: Scalar>(
    ka: &CumulantSequence<T>,
    kb: &CumulantSequence<T>,
    n: usize,
    d: u64,
    k: usize,
) -> Result<T> {
    if k == 0 || k > 4 {
        return Err(Error::Unsupported(format!("closed form c̃ for k = {k}")));
    }
    if ka.kappas.len() < k || kb.kappas.len() < k {
        return Err(Error::InsufficientMoments { needed: k, available: ka.kappas.len().min(kb.kappas.len()) });
    }
    let a = |j| kap(ka, j);
    let b = |j| kap(kb, j);
    let nn = T::from_i64(n as i64);
    // −n/d² + (n − 1)
    let pref = (nn.clone() - T::one()) - nn / T::from_u64_pow(d, 2);
    let tail = T::one() / T::from_u64_pow(d, 2 * n);
    Ok(match k {
        1 => T::zero(),
        2 => pref * a(2) * b(2),
        3 => {
            pref * (int::<T>(3) * a(1) * a(2) * (int::<T>(2) * b(1) * b(2) + b(3))
                + int::<T>(3) * a(3) * b(1) * b(2))
                + tail * a(3) * b(3)
        }
        _ => {
            let bracket_a = int::<T>(6) * a(4) * b(1) * b(1) * b(2)
                + int::<T>(2) * a(2) * a(2) * b(1) * (int::<T>(5) * b(1) * b(2) + int::<T>(2) * b(3))
                + int::<T>(4)
                    * a(1)
                    * a(3)
                    * (b(2) * (int::<T>(5) * b(1) * b(1) + b(2)) + int::<T>(2) * b(1) * b(3))
                + int::<T>(2)
                    * a(1)
                    * a(1)
                    * a(2)
                    * (int::<T>(10) * b(1) * b(1) * b(2)
                        + int::<T>(5) * b(2) * b(2)
                        + int::<T>(10) * b(1) * b(3)
                        + int::<T>(3) * b(4));
            let bracket_b = a(4) * (b(2) * b(2) + int::<T>(4) * b(1) * b(3))
                + int::<T>(4) * a(1) * a(3) * (b(2) * b(2) + int::<T>(2) * b(1) * b(3) + b(4))
                + a(2) * a(2) * (int::<T>(4) * b(1) * b(3) + b(4));
            pref * bracket_a + tail * bracket_b
        }
    })
}

/// Fit `c̃_{k,n} = (n/d² − (n−1)) a_k + b_k/d^{2n}` from `n = 1, 2`.
pub fn rmpu_coeff_split<T: Scalar>(ma: &MomentSequence<T>, mb: &MomentSequence<T>, d: u64, k: usize) -> Result<(T, T)> {
    let c1 = subleading_coeff_rmpu(ma, mb, 1, d, k)?;
    let c2 = subleading_coeff_rmpu(ma, mb, 2, d, k)?;
    let d2 = T::from_u64_pow(d, 2);
    let d4 = T::from_u64_pow(d, 4);
    // n=1: (a + b)/d² ; n=2: (2/d² − 1) a + b/d⁴
    let s = c1 * d2.clone();
    let p2 = T::from_i64(2) / d2 - T::one();
    // c2 = p2 a + (s − a)/d⁴
    let a = (c2 - s.clone() / d4.clone()) / (p2 - T::one() / d4);
    let b = s - a.clone();
    Ok((a, b))
}

// ---------------------------------------------------------------------------
// frame potentials

/// `k!`.
pub fn frame_potential_haar(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, j| acc * BigInt::from(j))
}

fn matmul<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Vec<Vec<T>> {
    let n = x.len();
    let m = y.first().map(|r| r.len()).unwrap_or(0);
    let mut out = vec![vec![T::zero(); m]; n];
    for i in 0..n {
        for (l, ylrow) in y.iter().enumerate() {
            let xil = &x[i][l];
            if xil.is_zero() {
                continue;
            }
            for j in 0..m {
                if !ylrow[j].is_zero() {
                    out[i][j] = out[i][j].clone() + xil.clone() * ylrow[j].clone();
                }
            }
        }
    }
    out
}

fn hadamard<T: Scalar>(x: &[Vec<T>], y: &[Vec<T>]) -> Vec<Vec<T>> {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u.clone() * v.clone()).collect())
        .collect()
}

/// Exact staircase frame potential `tr[P₁P₂⋯P_n⋯P₂]` with one projector
/// `Pᵢ = Σ Wg(π,σ)|T_π⟩⟩⟨⟨T_σ|` per gate, contracted site by site.
pub fn frame_potential_rmpu_exact<T: Scalar>(geom: &RmpuGeometry, k: usize) -> Result<T> {
    geom.validate()?;
    check_k(k)?;
    if geom.variant == Variant::TwoFloor {
        return Err(Error::Unsupported("exact frame potential for the two-floor geometry".into()));
    }
    let (d, chi) = (geom.d, geom.chi());
    let gate = chi * d;
    if gate <= k as u64 {
        return Err(Error::DimensionTooSmall { dim: gate, k });
    }
    let rt = replica_tables(k)?;
    let w = rt.class_matrix(&wg_by_class::<T>(gate, k)?);
    let gd = rt.class_matrix(&class_pow::<T>(d, k));
    let gchi = rt.class_matrix(&class_pow::<T>(chi, k));
    let ggate = rt.class_matrix(&class_pow::<T>(gate, k));
    let mut z = w.clone();
    for _ in 1..geom.n {
        let inner = matmul(&matmul(&gchi, &hadamard(&z, &gd)), &gchi);
        z = matmul(&matmul(&w, &hadamard(&inner, &gd)), &w);
    }
    let size = rt.len();
    let mut acc = T::zero();
    for a in 0..size {
        for b in 0..size {
            acc = acc + z[a][b].clone() * ggate[b][a].clone();
        }
    }
    Ok(acc)
}

/// `k!·(1 + k(k−1)/(2χ²)·(n − 1 − n/d² + d^{−2n}))`.
pub fn frame_potential_rmpu_asymptotic<T: Scalar>(geom: &RmpuGeometry, k: usize) -> Result<T> {
    geom.validate()?;
    let chi = geom.chi();
    let n = geom.n as i64;
    let bracket = T::from_i64(n - 1) - T::from_i64(n) / T::from_u64_pow(geom.d, 2)
        + T::one() / T::from_u64_pow(geom.d, 2 * geom.n);
    let kk = (k * k.saturating_sub(1)) as i64;
    let fact = T::from_i64(factorial(k) as i64);
    Ok(fact * (T::one() + T::from_i64(kk) * bracket / (T::from_i64(2) * T::from_u64_pow(chi, 2))))
}

/// Relative deviation `F/k! − 1` in the asymptotic formula.
pub fn frame_potential_relative_deviation(geom: &RmpuGeometry, k: usize) -> Result<f64> {
    let f: Rational = frame_potential_rmpu_asymptotic(geom, k)?;
    Ok((f / rat(factorial(k) as i64, 1) - Rational::one()).as_f64())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub dim: usize,
    pub k: usize,
    /// `Σ |C/D^{2k}|²` over all Pauli assignments.
    pub lhs: f64,
    /// `F/D^{2(k+1)}`.
    pub rhs: f64,
    pub frame_potential: f64,
    pub rel_error: f64,
    pub terms: u64,
    pub pass: bool,
}

/// Tensor products of single-qubit Paulis on `log₂ dim` qubits.
pub fn pauli_basis(dim: usize) -> Result<Vec<DMatrix<Complex64>>> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidInput(format!("Pauli basis needs a power-of-two dimension, got {dim}")));
    }
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let single = [
        DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    ];
    let mut basis = vec![DMatrix::from_element(1, 1, o)];
    let mut size = 1;
    while size < dim {
        basis = basis.iter().flat_map(|b| single.iter().map(move |s| b.kronecker(s))).collect();
        size *= 2;
    }
    Ok(basis)
}

/// Exhaustive Pauli check of `Σ |C/D^{2k}|² = F/D^{2(k+1)}` for the Haar
/// ensemble, comparing against the supplied frame potential.
pub fn verify_frame_otoc_identity_with(dim: usize, k: usize, frame_potential: f64) -> Result<IdentityReport> {
    check_k(k)?;
    let basis = pauli_basis(dim)?;
    let assignments = (basis.len() as u64)
        .checked_pow(k as u32)
        .filter(|&t| t <= 1 << 16)
        .ok_or_else(|| Error::CapExceeded(format!("Pauli enumeration for D = {dim}, k = {k}")))?;
    let ctx = MultiOtocContext::new(dim, k)?;
    let tuples: Vec<Vec<usize>> = (0..assignments)
        .map(|mut t| {
            let mut idx = vec![0usize; k];
            for slot in idx.iter_mut().rev() {
                *slot = (t % basis.len() as u64) as usize;
                t /= basis.len() as u64;
            }
            idx
        })
        .collect();
    let pick = |idx: &[usize]| -> Vec<DMatrix<Complex64>> { idx.iter().map(|&j| basis[j].clone()).collect() };
    let a_vecs: Vec<Vec<Complex64>> = tuples.iter().map(|t| ctx.a_vector(&pick(t))).collect::<Result<_>>()?;
    let b_vecs: Vec<Vec<Complex64>> = tuples.iter().map(|t| ctx.b_vector(&pick(t))).collect::<Result<_>>()?;
    let norm = (dim as f64).powi(2 * k as i32);
    let mut lhs = 0.0;
    for a in &a_vecs {
        for b in &b_vecs {
            lhs += (ctx.contract(a, b) / norm).norm_sqr();
        }
    }
    let rhs = frame_potential / (dim as f64).powi(2 * (k as i32 + 1));
    let rel_error = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
    Ok(IdentityReport {
        dim,
        k,
        lhs,
        rhs,
        frame_potential,
        rel_error,
        terms: assignments * assignments,
        pass: rel_error <= 1e-10,
    })
}

/// [`verify_frame_otoc_identity_with`] using the Haar value `F = k!`.
pub fn verify_frame_otoc_identity(dim: usize, k: usize) -> Result<IdentityReport> {
    let f = frame_potential_haar(k).to_f64().unwrap_or(f64::INFINITY);
    verify_frame_otoc_identity_with(dim, k, f)
}

/// Prediction record for the canonical RMPU OTOC.
pub fn rmpu_otoc_prediction(
    ma: &MomentSequence<Rational>,
    mb: &MomentSequence<Rational>,
    geom: &RmpuGeometry,
    k: usize,
    tag: OrderTag,
) -> Result<OtocPrediction> {
    let (value, error_scale) = match tag {
        OrderTag::Exact => (rmpu_otoc_exact(ma, mb, geom, k)?.as_f64(), String::new()),
        OrderTag::Leading => (rmpu_otoc_leading(ma, mb, geom.n, k)?.as_f64(), "chi^-2".to_string()),
        OrderTag::Subleading => {
            let fp = free_otoc_prediction(ma, mb, k)?;
            let c = subleading_coeff_rmpu(ma, mb, geom.n, geom.d, k)?;
            let chi2 = Rational::from_integer(BigInt::from(geom.chi()).pow(2));
            ((fp + c / chi2).as_f64(), "chi^-4".to_string())
        }
    };
    Ok(OtocPrediction { value, order_tag: tag, error_scale })
}

/// `ℤ`-valued helper used by reports: `k!` as `u64` when it fits.
pub fn factorial_u64(k: usize) -> Option<u64> {
    frame_potential_haar(k).to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat_int;

    fn seq(v: &[(i64, i64)]) -> MomentSequence<Rational> {
        MomentSequence::new(v.iter().map(|&(p, q)| rat(p, q)).collect())
    }

    #[test]
    fn n1_network_is_haar() {
        let ma = seq(&[(1, 3), (1, 2), (2, 5)]);
        let mb = seq(&[(-1, 4), (3, 7), (1, 9)]);
        let g = RmpuGeometry::staircase(2, 1, 1);
        for k in 1..=3 {
            let net: Rational = rmpu_otoc_exact(&ma, &mb, &g, k).unwrap();
            let haar: Rational = haar_otoc_exact(&ma, &mb, 4, k).unwrap();
            assert_eq!(net, haar, "k = {k}");
        }
    }

    #[test]
    fn identity_a_gives_b_moment() {
        let mb = seq(&[(1, 3), (1, 2), (2, 5)]);
        let one = MomentSequence::identity(3);
        let v: Rational = haar_otoc_exact(&one, &mb, 5, 3).unwrap();
        assert_eq!(v, rat(2, 5));
        let _ = rat_int(0);
    }
}
