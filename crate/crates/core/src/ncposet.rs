//! Non-crossing partitions as the permutations lying on a geodesic from the
//! identity `e` to the long cycle `γ = (1 2 ... k)`.
//!
//! `π ≤ σ` means `dist(e,π) + dist(π,σ) + dist(σ,γ) = k − 1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num::bigint::BigInt;
use num::{One, Zero};

use crate::error::{Error, Result};
use crate::symgroup::{cayley_distance, compose_unchecked, cycles_of_quotient, Permutation, SymTable};

/// Largest `k` for which NC(k) is materialized.
pub const NC_CAP: usize = 12;
/// Largest `k` for which genus-one pairs are listed rather than only counted.
pub const GENUS_LIST_CAP: usize = 7;
/// Largest `k` for the streaming genus-one counter.
pub const GENUS_COUNT_CAP: usize = 8;

fn dist_unchecked(a: &Permutation, b: &Permutation) -> usize {
    a.k() - cycles_of_quotient(&a.inverse(), b)
}

pub fn is_noncrossing(p: &Permutation) -> bool {
    let k = p.k();
    if k == 0 {
        return true;
    }
    let e = Permutation::identity(k);
    let g = Permutation::long_cycle(k);
    dist_unchecked(&e, p) + dist_unchecked(p, &g) == k - 1
}

/// `a ≤ b` along the geodesic `e → γ`.
pub fn leq(a: &Permutation, b: &Permutation) -> Result<bool> {
    let k = a.k();
    let e = Permutation::identity(k);
    let g = Permutation::long_cycle(k);
    Ok(cayley_distance(&e, a)? + cayley_distance(a, b)? + cayley_distance(b, &g)? + 1 == k.max(1))
}

/// Sum of distances along `e → x₁ → ... → x_m → γ` minus `k − 1`; always even.
pub fn chain_excess(chain: &[Permutation]) -> Result<usize> {
    let k = chain.first().map(|p| p.k()).unwrap_or(0);
    let mut prev = Permutation::identity(k);
    let mut total = 0;
    for p in chain {
        total += cayley_distance(&prev, p)?;
        prev = p.clone();
    }
    total += cayley_distance(&prev, &Permutation::long_cycle(k))?;
    Ok(total + 1 - k.max(1))
}

/// Genus excess of the pair `(π, σ)`: `dist(e,π)+dist(π,σ)+dist(σ,γ) − (k−1)`.
pub fn genus_excess(pi: &Permutation, sigma: &Permutation) -> Result<usize> {
    chain_excess(&[pi.clone(), sigma.clone()])
}

/// Every non-crossing partition of `{1..k}`, as permutations whose cycles run
/// through each block in increasing order. Ordered by the lexicographic rank
/// of the image word.
pub fn enumerate_nc(k: usize) -> Result<Vec<Permutation>> {
    if k == 0 || k > NC_CAP {
        return Err(Error::CapExceeded(format!("NC({k}): supported range 1..={NC_CAP}")));
    }
    let mut out = Vec::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    gen_nc(0, k, &mut blocks, &mut open, &mut out);
    let mut perms: Vec<Permutation> = out.iter().map(|b| blocks_to_perm(k, b)).collect();
    perms.sort_by_key(|p| p.rank_big());
    Ok(perms)
}

fn gen_nc(
    i: usize,
    k: usize,
    blocks: &mut Vec<Vec<usize>>,
    open: &mut Vec<usize>,
    out: &mut Vec<Vec<Vec<usize>>>,
) {
    if i == k {
        out.push(blocks.clone());
        return;
    }
    // start a new block
    blocks.push(vec![i]);
    open.push(blocks.len() - 1);
    gen_nc(i + 1, k, blocks, open, out);
    open.pop();
    blocks.pop();
    // join an open block; everything opened after it is closed for good
    for pos in (0..open.len()).rev() {
        let b = open[pos];
        let saved: Vec<usize> = open.drain(pos + 1..).collect();
        blocks[b].push(i);
        gen_nc(i + 1, k, blocks, open, out);
        blocks[b].pop();
        open.extend(saved);
    }
}

fn blocks_to_perm(k: usize, blocks: &[Vec<usize>]) -> Permutation {
    let mut images = vec![0usize; k];
    for b in blocks {
        for (idx, &p) in b.iter().enumerate() {
            images[p] = b[(idx + 1) % b.len()];
        }
    }
    Permutation::from_images(images).expect("blocks form a set partition")
}

trait RankBig {
    fn rank_big(&self) -> u128;
}

impl RankBig for Permutation {
    fn rank_big(&self) -> u128 {
        let imgs = self.images();
        let k = imgs.len();
        let mut rank: u128 = 0;
        for i in 0..k {
            let smaller = imgs[i + 1..].iter().filter(|&&v| v < imgs[i]).count() as u128;
            rank = rank * (k - i) as u128 + smaller;
        }
        rank
    }
}

/// Kreweras complement `σ* = σ⁻¹γ`.
pub fn kreweras(s: &Permutation) -> Result<Permutation> {
    if !is_noncrossing(s) {
        return Err(Error::Domain(format!("{s} is crossing; its complement leaves NC")));
    }
    Ok(compose_unchecked(&s.inverse(), &Permutation::long_cycle(s.k())))
}

pub fn catalan(n: usize) -> BigInt {
    binomial(2 * n, n) / BigInt::from(n + 1)
}

/// `(2k+1)⁻¹ binom(3k, k)`: number of 2-chains in NC(k).
pub fn fuss_catalan(k: usize) -> BigInt {
    binomial(3 * k, k) / BigInt::from(2 * k + 1)
}

pub fn binomial(n: usize, r: usize) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Möbius value of a single cycle of length `len`: `(−1)^{len−1} C_{len−1}`.
pub fn mobius_cycle(len: usize) -> i64 {
    let c: i64 = catalan(len - 1).try_into().expect("Catalan number fits in i64");
    if len % 2 == 1 {
        c
    } else {
        -c
    }
}

/// `μ(p) = ∏_{cycles c} (−1)^{|c|−1} C_{|c|−1}`.
pub fn mobius_single(p: &Permutation) -> i64 {
    p.cycle_type().into_iter().map(mobius_cycle).product()
}

/// `μ(a, b) = μ(a⁻¹b)`.
pub fn mobius(a: &Permutation, b: &Permutation) -> Result<i64> {
    if a.k() != b.k() {
        return Err(Error::IncompatibleK(a.k(), b.k()));
    }
    Ok(mobius_single(&compose_unchecked(&a.inverse(), b)))
}

/// Möbius value for a cycle type.
pub fn mobius_of_type(cycle_type: &[usize]) -> i64 {
    cycle_type.iter().map(|&l| mobius_cycle(l)).product()
}

/// NC(k) with its order relation precomputed.
#[derive(Debug, Clone)]
pub struct NcPoset {
    pub k: usize,
    pub elems: Vec<Permutation>,
    /// `dist(e, x)` for each element.
    pub level: Vec<usize>,
    /// Indices of `y` with `x ≤ y`, including `x`.
    pub up: Vec<Vec<usize>>,
    /// Indices of `y` with `y ≤ x`, including `x`.
    pub down: Vec<Vec<usize>>,
    index: HashMap<Permutation, usize>,
}

impl NcPoset {
    pub fn new(k: usize) -> Result<Self> {
        let elems = enumerate_nc(k)?;
        let e = Permutation::identity(k);
        let g = Permutation::long_cycle(k);
        let level: Vec<usize> = elems.iter().map(|p| dist_unchecked(&e, p)).collect();
        let to_top: Vec<usize> = elems.iter().map(|p| dist_unchecked(p, &g)).collect();
        let inverses: Vec<Permutation> = elems.iter().map(|p| p.inverse()).collect();
        // distance pruning: only candidates on a higher level can lie above
        let up_of = |i: usize| -> Vec<usize> {
            (0..elems.len())
                .filter(|&j| {
                    level[j] >= level[i]
                        && level[j] - level[i] + to_top[j] == to_top[i]
                        && k - cycles_of_quotient(&inverses[i], &elems[j]) == level[j] - level[i]
                })
                .collect()
        };
        #[cfg(feature = "parallel")]
        let up: Vec<Vec<usize>> = {
            use rayon::prelude::*;
            (0..elems.len()).into_par_iter().map(up_of).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let up: Vec<Vec<usize>> = (0..elems.len()).map(up_of).collect();
        let mut down = vec![Vec::new(); elems.len()];
        for (i, ups) in up.iter().enumerate() {
            for &j in ups {
                down[j].push(i);
            }
        }
        let index = elems.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        Ok(NcPoset { k, elems, level, up, down, index })
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn index_of(&self, p: &Permutation) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn bottom(&self) -> usize {
        self.index[&Permutation::identity(self.k)]
    }

    pub fn top(&self) -> usize {
        self.index[&Permutation::long_cycle(self.k)]
    }

    /// `μ(x, y)` for element indices.
    pub fn mobius(&self, x: usize, y: usize) -> i64 {
        mobius_single(&compose_unchecked(&self.elems[x].inverse(), &self.elems[y]))
    }

    /// Index of the Kreweras complement of element `x`.
    pub fn kreweras_index(&self, x: usize) -> usize {
        let kc = compose_unchecked(&self.elems[x].inverse(), &Permutation::long_cycle(self.k));
        self.index[&kc]
    }

    /// Number of multichains `x₁ ≤ ... ≤ x_m` in NC(k).
    pub fn count_multichains(&self, m: usize) -> BigInt {
        if m == 0 {
            return BigInt::one();
        }
        let mut counts = vec![BigInt::one(); self.len()];
        for _ in 1..m {
            counts = (0..self.len())
                .map(|y| self.down[y].iter().map(|&x| counts[x].clone()).sum())
                .collect();
        }
        counts.into_iter().sum()
    }

    /// Multichains as index tuples, by depth-first extension along `up`.
    pub fn multichain_indices(&self, m: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(m);
        fn rec(p: &NcPoset, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == m {
                out.push(cur.clone());
                return;
            }
            let candidates: &[usize] = match cur.last() {
                Some(&x) => &p.up[x],
                None => &p.up[p.bottom()],
            };
            for &y in candidates {
                cur.push(y);
                rec(p, m, cur, out);
                cur.pop();
            }
        }
        if m > 0 {
            rec(self, m, &mut cur, &mut out);
        }
        out
    }
}

static POSETS: OnceLock<Mutex<HashMap<usize, Arc<NcPoset>>>> = OnceLock::new();

/// Shared NC(k) poset, built once per `k`.
pub fn nc_poset(k: usize) -> Result<Arc<NcPoset>> {
    let cache = POSETS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().expect("cache lock").get(&k) {
        return Ok(p.clone());
    }
    let built = Arc::new(NcPoset::new(k)?);
    let mut guard = cache.lock().expect("cache lock");
    Ok(guard.entry(k).or_insert(built).clone())
}

/// All multichains `π₁ ≤ ... ≤ π_m` in NC(k).
pub fn enumerate_multichains(k: usize, m: usize) -> Result<Vec<Vec<Permutation>>> {
    if m == 0 {
        return Err(Error::InvalidInput("multichain length must be at least 1".into()));
    }
    if k > 9 {
        return Err(Error::CapExceeded(format!("materializing multichains of NC({k})")));
    }
    let poset = NcPoset::new(k)?;
    let expected = poset.count_multichains(m);
    if expected > BigInt::from(20_000_000u64) {
        return Err(Error::CapExceeded(format!("{expected} multichains is too many to list")));
    }
    Ok(poset
        .multichain_indices(m)
        .into_iter()
        .map(|c| c.into_iter().map(|i| poset.elems[i].clone()).collect())
        .collect())
}

/// Count multichains of length `m` without listing them (k ≤ 10 practical).
pub fn count_multichains(k: usize, m: usize) -> Result<BigInt> {
    Ok(NcPoset::new(k)?.count_multichains(m))
}

/// A chain `(π₁, σ₁, …)` of permutations saturating the summed triangle
/// inequality between `e` and `γ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeodesicChain {
    pub k: usize,
    pub elements: Vec<Permutation>,
}

impl GeodesicChain {
    pub fn new(elements: Vec<Permutation>) -> Result<Self> {
        let k = elements
            .first()
            .map(|p| p.k())
            .ok_or_else(|| Error::InvalidInput("empty chain".into()))?;
        if elements.iter().any(|p| p.k() != k) {
            return Err(Error::InvalidInput("mixed k in chain".into()));
        }
        if chain_excess(&elements)? != 0 {
            return Err(Error::Domain("chain is not geodesic".into()));
        }
        Ok(GeodesicChain { k, elements })
    }
}

/// For each σ, the genus-one partners π, given the table of S_k.
fn genus_one_partners(table: &SymTable, sigma: usize, g_rank: usize) -> Vec<usize> {
    let k = table.k;
    let target = k + 1;
    let dg = table.dist(sigma, g_rank);
    let sig_p = &table.perms[sigma];
    (0..table.len())
        .filter(|&pi| {
            let de = k - table.ncycles[pi];
            if de + dg > target {
                return false;
            }
            let need = target - de - dg;
            // |level difference| bounds the distance from below
            let ds_lo = (k - table.ncycles[sigma]).abs_diff(de);
            if need < ds_lo {
                return false;
            }
            k - cycles_of_quotient(&table.perms[table.inv[pi]], sig_p) == need
        })
        .collect()
}

/// All pairs `(π, σ)` with `dist(e,π)+dist(π,σ)+dist(σ,γ) = k + 1`.
pub fn enumerate_genus_one_pairs(k: usize) -> Result<Vec<(Permutation, Permutation)>> {
    if k == 0 || k > GENUS_LIST_CAP {
        return Err(Error::CapExceeded(format!(
            "listing genus-one pairs for k = {k}; supported 1..={GENUS_LIST_CAP}"
        )));
    }
    let table = SymTable::new(k)?;
    let g = Permutation::long_cycle(k).rank();
    let per_sigma = |s: usize| -> Vec<(usize, usize)> {
        genus_one_partners(&table, s, g).into_iter().map(|p| (p, s)).collect()
    };
    #[cfg(feature = "parallel")]
    let pairs: Vec<(usize, usize)> = {
        use rayon::prelude::*;
        (0..table.len()).into_par_iter().flat_map_iter(per_sigma).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<(usize, usize)> = (0..table.len()).flat_map(per_sigma).collect();
    let mut pairs = pairs;
    pairs.sort_unstable();
    Ok(pairs
        .into_iter()
        .map(|(p, s)| (table.perms[p].clone(), table.perms[s].clone()))
        .collect())
}

/// Streaming count of genus-one pairs.
pub fn count_genus_one_pairs(k: usize) -> Result<u64> {
    if k == 0 || k > GENUS_COUNT_CAP {
        return Err(Error::CapExceeded(format!(
            "counting genus-one pairs for k = {k}; supported 1..={GENUS_COUNT_CAP}"
        )));
    }
    let table = SymTable::new(k)?;
    let g = Permutation::long_cycle(k).rank();
    let per_sigma = |s: usize| genus_one_partners(&table, s, g).len() as u64;
    #[cfg(feature = "parallel")]
    let total = {
        use rayon::prelude::*;
        (0..table.len()).into_par_iter().map(per_sigma).sum()
    };
    #[cfg(not(feature = "parallel"))]
    let total = (0..table.len()).map(per_sigma).sum();
    Ok(total)
}
