//! Gram and Weingarten matrices over S_k, their large-dimension series
//! coefficients, and the exact Haar twirl on replica space.
//!
//! Both matrices depend on `(π, σ)` only through the cycle type of `π⁻¹σ`, so
//! they are stored as one value per conjugacy class and expanded on demand.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num::bigint::BigInt;
use num::integer::Integer;
use num::{One, Signed, ToPrimitive, Zero};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{format_rational, parse_rational, Rational, Scalar};
use crate::symgroup::{Permutation, SymTable, ENUM_CAP};

/// Exact tables are built for k up to this value.
pub const EXACT_CAP: usize = 8;
/// Largest replica-space dimension `D^k` materialized by [`haar_twirl_exact`].
pub const TWIRL_CAP: usize = 4096;

/// Symmetric group data plus the class-algebra structure constants
/// `N[λ][μ][ν] = #{σ ∈ μ : σ⁻¹ τ_λ ∈ ν}` for a fixed representative `τ_λ`.
#[derive(Debug)]
pub struct ClassAlgebra {
    pub table: SymTable,
    structure: Vec<u64>,
    p: usize,
}

impl ClassAlgebra {
    fn new(k: usize) -> Result<Self> {
        let table = SymTable::new(k)?;
        let p = table.classes.len();
        let mut structure = vec![0u64; p * p * p];
        for lam in 0..p {
            let tau = table.class_rep[lam];
            for s in 0..table.len() {
                let mu = table.class[s];
                let nu = table.class[table.mul(table.inv[s], tau)];
                structure[(lam * p + mu) * p + nu] += 1;
            }
        }
        Ok(ClassAlgebra { table, structure, p })
    }

    pub fn num_classes(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn n(&self, lam: usize, mu: usize, nu: usize) -> u64 {
        self.structure[(lam * self.p + mu) * self.p + nu]
    }

    /// Group-algebra convolution of class functions: `(f*h)(τ) = Σ_σ f(σ) h(σ⁻¹τ)`.
    pub fn convolve<T: Scalar>(&self, f: &[T], h: &[T]) -> Vec<T> {
        (0..self.p)
            .map(|lam| {
                let mut acc = T::zero();
                for mu in 0..self.p {
                    if f[mu].is_zero() {
                        continue;
                    }
                    for nu in 0..self.p {
                        let c = self.n(lam, mu, nu);
                        if c != 0 && !h[nu].is_zero() {
                            acc = acc + T::from_i64(c as i64) * f[mu].clone() * h[nu].clone();
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// `dist(e, τ)` for class `c`.
    pub fn class_level(&self, c: usize) -> usize {
        self.table.k - self.table.class_ncycles(c)
    }
}

static ALGEBRAS: OnceLock<Mutex<HashMap<usize, Arc<ClassAlgebra>>>> = OnceLock::new();

/// Shared class algebra for S_k; built once per `k`.
pub fn class_algebra(k: usize) -> Result<Arc<ClassAlgebra>> {
    let cache = ALGEBRAS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(a) = cache.lock().expect("cache lock").get(&k) {
        return Ok(a.clone());
    }
    let built = Arc::new(ClassAlgebra::new(k)?);
    let mut guard = cache.lock().expect("cache lock");
    Ok(guard.entry(k).or_insert(built).clone())
}

/// `G(π,σ) = D^{k − dist(π,σ)}` stored per class.
#[derive(Debug, Clone)]
pub struct GramTable {
    pub k: usize,
    pub dim: u64,
    pub algebra: Arc<ClassAlgebra>,
    pub class_values: Vec<BigInt>,
}

impl GramTable {
    pub fn entry(&self, pi: usize, sigma: usize) -> BigInt {
        self.class_values[self.algebra.table.quotient_class(pi, sigma)].clone()
    }

    pub fn entry_perm(&self, pi: &Permutation, sigma: &Permutation) -> BigInt {
        self.entry(pi.rank(), sigma.rank())
    }

    pub fn to_dense(&self) -> Result<Vec<Vec<BigInt>>> {
        dense_guard(self.k)?;
        let n = self.algebra.table.len();
        Ok((0..n).map(|i| (0..n).map(|j| self.entry(i, j)).collect()).collect())
    }

    pub fn to_dense_f64(&self) -> Result<DMatrix<f64>> {
        dense_guard(self.k)?;
        let n = self.algebra.table.len();
        let cls: Vec<f64> = self.class_values.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        Ok(DMatrix::from_fn(n, n, |i, j| cls[self.algebra.table.quotient_class(i, j)]))
    }
}

fn dense_guard(k: usize) -> Result<()> {
    if k > 6 {
        return Err(Error::CapExceeded(format!("dense (k!)x(k!) table for k = {k}")));
    }
    Ok(())
}

pub fn gram(dim: u64, k: usize) -> Result<GramTable> {
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if k == 0 || k > ENUM_CAP {
        return Err(Error::CapExceeded(format!("gram for k = {k}")));
    }
    let algebra = class_algebra(k)?;
    let class_values = (0..algebra.num_classes())
        .map(|c| BigInt::from(dim).pow(algebra.table.class_ncycles(c) as u32))
        .collect();
    Ok(GramTable { k, dim, algebra, class_values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Debug, Clone)]
pub enum WgValues {
    Exact(Vec<Rational>),
    Float(Vec<f64>),
}

/// `Wg = G⁻¹` stored per class.
#[derive(Debug, Clone)]
pub struct WeingartenTable {
    pub k: usize,
    pub dim: u64,
    pub algebra: Arc<ClassAlgebra>,
    pub values: WgValues,
}

impl WeingartenTable {
    pub fn class_value<T: Scalar>(&self, class: usize) -> T {
        match &self.values {
            WgValues::Exact(v) => T::from_rational(&v[class]),
            WgValues::Float(v) => {
                if T::is_exact() {
                    panic!("exact value requested from a float Weingarten table");
                }
                T::from_rational(&Rational::from_float(v[class]).unwrap_or_else(Rational::zero))
            }
        }
    }

    pub fn class_value_f64(&self, class: usize) -> f64 {
        match &self.values {
            WgValues::Exact(v) => v[class].as_f64(),
            WgValues::Float(v) => v[class],
        }
    }

    /// All class values converted to `T`.
    pub fn class_values<T: Scalar>(&self) -> Result<Vec<T>> {
        match (&self.values, T::is_exact()) {
            (WgValues::Float(_), true) => {
                Err(Error::InvalidInput("exact arithmetic requested on a float table".into()))
            }
            (WgValues::Float(v), false) => Ok(v.iter().map(|&x| T::from_rational(&f64_as_rational(x))).collect()),
            (WgValues::Exact(v), _) => Ok(v.iter().map(T::from_rational).collect()),
        }
    }

    pub fn exact_class_values(&self) -> Option<&[Rational]> {
        match &self.values {
            WgValues::Exact(v) => Some(v),
            WgValues::Float(_) => None,
        }
    }

    pub fn entry_f64(&self, pi: usize, sigma: usize) -> f64 {
        self.class_value_f64(self.algebra.table.quotient_class(pi, sigma))
    }

    pub fn entry_exact(&self, pi: usize, sigma: usize) -> Option<Rational> {
        self.exact_class_values()
            .map(|v| v[self.algebra.table.quotient_class(pi, sigma)].clone())
    }

    pub fn entry_perm_exact(&self, pi: &Permutation, sigma: &Permutation) -> Option<Rational> {
        self.entry_exact(pi.rank(), sigma.rank())
    }

    pub fn to_dense_f64(&self) -> Result<DMatrix<f64>> {
        dense_guard(self.k)?;
        let n = self.algebra.table.len();
        Ok(DMatrix::from_fn(n, n, |i, j| self.entry_f64(i, j)))
    }

    /// Dense check of `Wg · G = I`. Exact tables use integer arithmetic over a
    /// common denominator and must match with zero residual; float tables
    /// return the max abs residual.
    pub fn inverse_residual(&self) -> Result<f64> {
        dense_guard(self.k)?;
        let g = gram(self.dim, self.k)?;
        let table = &self.algebra.table;
        let n = table.len();
        match &self.values {
            WgValues::Exact(vals) => {
                let lcm = vals.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
                let scaled: Vec<BigInt> =
                    vals.iter().map(|v| (v * Rational::from_integer(lcm.clone())).to_integer()).collect();
                let gv = &g.class_values;
                let mut worst = BigInt::zero();
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = BigInt::zero();
                        for m in 0..n {
                            acc += &scaled[table.quotient_class(i, m)] * &gv[table.quotient_class(m, j)];
                        }
                        if i == j {
                            acc -= &lcm;
                        }
                        let a = acc.abs();
                        if a > worst {
                            worst = a;
                        }
                    }
                }
                Ok(crate::scalar::rational_to_f64(&Rational::new(worst, lcm)))
            }
            WgValues::Float(_) => {
                let w = self.to_dense_f64()?;
                let gd = g.to_dense_f64()?;
                let prod = w * gd;
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let target = if i == j { 1.0 } else { 0.0 };
                        worst = worst.max((prod[(i, j)] - target).abs());
                    }
                }
                Ok(worst)
            }
        }
    }
}

fn f64_as_rational(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(Rational::zero)
}

static WG_CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<WeingartenTable>>>> = OnceLock::new();

/// Memoized exact table; concurrent first insertions race harmlessly and the
/// first stored value wins.
pub fn weingarten_cached(dim: u64, k: usize) -> Result<Arc<WeingartenTable>> {
    let cache = WG_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache lock").get(&(dim, k)) {
        return Ok(t.clone());
    }
    let built = Arc::new(weingarten(dim, k, Mode::Exact)?);
    let mut guard = cache.lock().expect("cache lock");
    Ok(guard.entry((dim, k)).or_insert(built).clone())
}

pub fn weingarten(dim: u64, k: usize, mode: Mode) -> Result<WeingartenTable> {
    if k == 0 || k > ENUM_CAP {
        return Err(Error::CapExceeded(format!("weingarten for k = {k}")));
    }
    if dim <= k as u64 {
        return Err(Error::DimensionTooSmall { dim, k });
    }
    if mode == Mode::Exact && k > EXACT_CAP {
        return Err(Error::CapExceeded(format!("exact weingarten for k = {k}")));
    }
    let algebra = class_algebra(k)?;
    let p = algebra.num_classes();
    let id = algebra.table.identity_class();
    // Σ_σ w(σ) g(σ⁻¹τ_λ) = δ_{λ,id}, unknowns w per class
    let values = match mode {
        Mode::Exact => {
            let powers: Vec<BigInt> =
                (0..=k).map(|c| BigInt::from(dim).pow(c as u32)).collect();
            let mut a: Vec<Vec<Rational>> = vec![vec![Rational::zero(); p]; p];
            for (lam, row) in a.iter_mut().enumerate() {
                for (mu, cell) in row.iter_mut().enumerate() {
                    let mut acc = BigInt::zero();
                    for nu in 0..p {
                        let c = algebra.n(lam, mu, nu);
                        if c != 0 {
                            acc += BigInt::from(c) * &powers[algebra.table.class_ncycles(nu)];
                        }
                    }
                    *cell = Rational::from_integer(acc);
                }
            }
            let mut rhs = vec![Rational::zero(); p];
            rhs[id] = Rational::one();
            WgValues::Exact(solve_rational(a, rhs)?)
        }
        Mode::Float => {
            let df = dim as f64;
            let a = DMatrix::from_fn(p, p, |lam, mu| {
                (0..p)
                    .map(|nu| algebra.n(lam, mu, nu) as f64 * df.powi(algebra.table.class_ncycles(nu) as i32))
                    .sum::<f64>()
            });
            let mut rhs = nalgebra::DVector::zeros(p);
            rhs[id] = 1.0;
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Consistency("singular class system".into()))?;
            WgValues::Float(sol.iter().copied().collect())
        }
    };
    Ok(WeingartenTable { k, dim, algebra, values })
}

/// Gaussian elimination with exact arithmetic.
pub fn solve_rational(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Result<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Domain("singular system".into()))?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = Rational::one() / a[col][col].clone();
        for j in col..n {
            a[col][j] = &a[col][j] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..n {
                    let t = &f * &a[col][j];
                    a[r][j] -= t;
                }
                let t = &f * &b[col];
                b[r] -= t;
            }
        }
    }
    Ok(b)
}

/// Coefficients of `D^k·Wg(τ; D) = Σ_j c_j(τ) D^{−j}` per class, for
/// `j = 0..=max_order`. Obtained by inverting `Σ_τ D^{−|τ|} τ` as a formal
/// power series in the centre of the group algebra; all `c_j` are integers.
pub fn wg_series(k: usize, max_order: usize) -> Result<Vec<Vec<BigInt>>> {
    if k == 0 || k > EXACT_CAP {
        return Err(Error::CapExceeded(format!("Weingarten series for k = {k}")));
    }
    let alg = class_algebra(k)?;
    let p = alg.num_classes();
    let id = alg.table.identity_class();
    let level: Vec<usize> = (0..p).map(|c| alg.class_level(c)).collect();
    // w_0 = δ_e ; w_j = −Σ_{i=1..j} S_i * w_{j−i}, S_i = indicator of |τ| = i
    let mut w: Vec<Vec<BigInt>> = Vec::with_capacity(max_order + 1);
    let mut w0 = vec![BigInt::zero(); p];
    w0[id] = BigInt::one();
    w.push(w0);
    for j in 1..=max_order {
        let mut acc = vec![BigInt::zero(); p];
        for i in 1..=j.min(k - 1) {
            let prev = &w[j - i];
            for (lam, out) in acc.iter_mut().enumerate() {
                let mut s = BigInt::zero();
                for mu in (0..p).filter(|&mu| level[mu] == i) {
                    for (nu, hv) in prev.iter().enumerate() {
                        let c = alg.n(lam, mu, nu);
                        if c != 0 && !hv.is_zero() {
                            s += BigInt::from(c) * hv;
                        }
                    }
                }
                *out += s;
            }
        }
        w.push(acc.into_iter().map(|v| -v).collect());
    }
    // transpose to per-class sequences
    Ok((0..p).map(|c| w.iter().map(|wj| wj[c].clone()).collect()).collect())
}

/// `Wg^{(g)}` per class: the coefficient of `D^{−(k + |τ| + 2g)}` in `Wg(τ)`.
pub fn wg_coeff_classes(k: usize, g: usize) -> Result<Vec<BigInt>> {
    if g > 1 {
        return Err(Error::Unsupported(format!("series order g = {g}; only g ∈ {{0, 1}}")));
    }
    let series = wg_series(k, k - 1 + 2 * g)?;
    let alg = class_algebra(k)?;
    Ok((0..alg.num_classes())
        .map(|c| series[c][alg.class_level(c) + 2 * g].clone())
        .collect())
}

/// `Wg^{(g)}(π, σ)`; `g = 0` is the Möbius value `μ(π⁻¹σ)`.
pub fn wg_asymptotic_coeff(pi: &Permutation, sigma: &Permutation, k: usize, g: usize) -> Result<Rational> {
    if pi.k() != k || sigma.k() != k {
        return Err(Error::IncompatibleK(pi.k(), sigma.k()));
    }
    let coeffs = wg_coeff_classes(k, g)?;
    let alg = class_algebra(k)?;
    let c = alg.table.quotient_class(pi.rank(), sigma.rank());
    Ok(Rational::from_integer(coeffs[c].clone()))
}

/// Replica-space index of `T_π |x⟩ = |x_{π⁻¹(1)} … x_{π⁻¹(k)}⟩`; digits are
/// base `dim` with replica 1 most significant.
pub(crate) fn permute_index(x: usize, pi_inv: &Permutation, dim: usize, k: usize, buf: &mut [usize]) -> usize {
    let mut rem = x;
    for i in (0..k).rev() {
        buf[i] = rem % dim;
        rem /= dim;
    }
    let mut y = 0;
    for i in 0..k {
        y = y * dim + buf[pi_inv.apply(i)];
    }
    y
}

/// Dense `T_π` on `(ℂ^dim)^{⊗k}`.
pub fn replica_permutation(pi: &Permutation, dim: usize) -> Result<DMatrix<Complex64>> {
    let k = pi.k();
    let n = checked_replica_dim(dim, k)?;
    let pinv = pi.inverse();
    let mut buf = vec![0; k];
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        let y = permute_index(x, &pinv, dim, k, &mut buf);
        m[(y, x)] = Complex64::new(1.0, 0.0);
    }
    Ok(m)
}

fn checked_replica_dim(dim: usize, k: usize) -> Result<usize> {
    let n = (dim as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if n > TWIRL_CAP as u128 {
        return Err(Error::CapExceeded(format!("replica dimension {dim}^{k} > {TWIRL_CAP}")));
    }
    Ok(n as usize)
}

/// `Φ(X) = Σ_{π,σ} Wg_{π,σ} tr[X T_{σ⁻¹}] T_π`, the k-fold Haar twirl.
pub fn haar_twirl_exact(x: &DMatrix<Complex64>, dim: usize, k: usize) -> Result<DMatrix<Complex64>> {
    let n = checked_replica_dim(dim, k)?;
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::InvalidInput(format!("operator must be {n}x{n}")));
    }
    let wg = weingarten(dim as u64, k, Mode::Float)?;
    let table = &wg.algebra.table;
    let np = table.len();
    let mut buf = vec![0; k];
    // tr[X T_{σ⁻¹}] = Σ_x X[x, T_{σ⁻¹} x]; T_{σ⁻¹} x permutes digits by σ
    let traces: Vec<Complex64> = (0..np)
        .map(|s| {
            let sigma = &table.perms[s];
            (0..n).map(|xi| x[(xi, permute_index(xi, sigma, dim, k, &mut buf))]).sum()
        })
        .collect();
    let coeff: Vec<Complex64> = (0..np)
        .map(|pi| (0..np).map(|s| traces[s] * wg.entry_f64(pi, s)).sum())
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for (pi, c) in coeff.iter().enumerate() {
        let pinv = &table.perms[table.inv[pi]];
        for xi in 0..n {
            let y = permute_index(xi, pinv, dim, k, &mut buf);
            out[(y, xi)] += *c;
        }
    }
    Ok(out)
}

/// On-disk layout of an exact table: one `[numerator, denominator]` pair of
/// decimal strings per conjugacy class, classes listed by cycle type.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WgTableFile {
    pub format: String,
    pub version: u32,
    pub dim: u64,
    pub k: usize,
    pub classes: Vec<WgClassEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WgClassEntry {
    pub cycle_type: Vec<usize>,
    pub value: [String; 2],
}

pub const WG_FILE_FORMAT: &str = "weingarten-class-table";

impl WeingartenTable {
    pub fn to_file(&self) -> Result<WgTableFile> {
        let vals = self
            .exact_class_values()
            .ok_or_else(|| Error::InvalidInput("only exact tables are serialized".into()))?;
        Ok(WgTableFile {
            format: WG_FILE_FORMAT.into(),
            version: 1,
            dim: self.dim,
            k: self.k,
            classes: self
                .algebra
                .table
                .classes
                .iter()
                .zip(vals)
                .map(|(ct, v)| WgClassEntry {
                    cycle_type: ct.clone(),
                    value: [v.numer().to_string(), v.denom().to_string()],
                })
                .collect(),
        })
    }

    pub fn from_file(file: &WgTableFile) -> Result<Self> {
        if file.format != WG_FILE_FORMAT || file.version != 1 {
            return Err(Error::Parse(format!("unknown table format {} v{}", file.format, file.version)));
        }
        let algebra = class_algebra(file.k)?;
        let mut vals = vec![None; algebra.num_classes()];
        for entry in &file.classes {
            let idx = algebra
                .table
                .classes
                .iter()
                .position(|c| c == &entry.cycle_type)
                .ok_or_else(|| Error::Parse(format!("unknown cycle type {:?}", entry.cycle_type)))?;
            let v = parse_rational(&format!("{}/{}", entry.value[0], entry.value[1]))
                .ok_or_else(|| Error::Parse("bad rational".into()))?;
            vals[idx] = Some(v);
        }
        let vals: Option<Vec<Rational>> = vals.into_iter().collect();
        let vals = vals.ok_or_else(|| Error::Parse("missing classes".into()))?;
        Ok(WeingartenTable { k: file.k, dim: file.dim, algebra, values: WgValues::Exact(vals) })
    }
}

/// Directory-backed cache: `wg_D{dim}_k{k}.json`.
pub fn load_or_build(dir: &std::path::Path, dim: u64, k: usize) -> Result<WeingartenTable> {
    let path = dir.join(format!("wg_D{dim}_k{k}.json"));
    if path.exists() {
        let file: WgTableFile = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        return WeingartenTable::from_file(&file);
    }
    let table = weingarten(dim, k, Mode::Exact)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(&path, serde_json::to_string_pretty(&table.to_file()?)?)?;
    Ok(table)
}

pub fn format_class_value(v: &Rational) -> String {
    format_rational(v)
}
