//! Permutations of `{1..k}` with Cayley distance, cycle structure and
//! lexicographic enumeration.
//!
//! Composition convention: `compose(a, b)(i) = a(b(i))`.
//!
//! Positions are 1-based at the API surface (cycle notation, `images_one_based`)
//! and 0-based internally.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest `k` for which the full list of `k!` permutations is materialized.
pub const ENUM_CAP: usize = 8;
/// Largest `k` accepted by counting-only operations.
pub const COUNT_CAP: usize = 10;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<u8>,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Permutation { images: (0..k as u8).collect() }
    }

    /// The canonical full cycle `γ = (1 2 ... k)`, i.e. `γ(i) = i + 1 mod k`.
    pub fn long_cycle(k: usize) -> Self {
        Permutation { images: (0..k).map(|i| ((i + 1) % k) as u8).collect() }
    }

    /// Build from 0-based images. Fails if `images` is not a bijection.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let k = images.len();
        if k > u8::MAX as usize {
            return Err(Error::CapExceeded(format!("k = {k} too large")));
        }
        let mut seen = vec![false; k];
        for &v in &images {
            if v >= k || seen[v] {
                return Err(Error::InvalidInput(format!("not a bijection: {images:?}")));
            }
            seen[v] = true;
        }
        Ok(Permutation { images: images.into_iter().map(|v| v as u8).collect() })
    }

    /// Build from 1-based images, e.g. `[2, 3, 1]` for `(123)`.
    pub fn from_images_one_based(images: &[usize]) -> Result<Self> {
        if images.iter().any(|&v| v == 0) {
            return Err(Error::InvalidInput("1-based images must be positive".into()));
        }
        Self::from_images(images.iter().map(|&v| v - 1).collect())
    }

    /// A single transposition of the 1-based points `i` and `j`.
    pub fn transposition(k: usize, i: usize, j: usize) -> Result<Self> {
        if i == 0 || j == 0 || i > k || j > k || i == j {
            return Err(Error::InvalidInput(format!("bad transposition ({i} {j}) in S_{k}")));
        }
        let mut p = Self::identity(k);
        p.images.swap(i - 1, j - 1);
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.images.len()
    }

    /// 0-based image of 0-based point `i`.
    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i] as usize
    }

    pub fn images(&self) -> Vec<usize> {
        self.images.iter().map(|&v| v as usize).collect()
    }

    pub fn images_one_based(&self) -> Vec<usize> {
        self.images.iter().map(|&v| v as usize + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| i == v as usize)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u8; self.k()];
        for (i, &v) in self.images.iter().enumerate() {
            inv[v as usize] = i as u8;
        }
        Permutation { images: inv }
    }

    /// Number of cycles, fixed points included.
    pub fn num_cycles(&self) -> usize {
        let k = self.k();
        let mut seen = [false; 256];
        let mut count = 0;
        for start in 0..k {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                j = self.images[j] as usize;
            }
        }
        count
    }

    /// Cycles as lists of 0-based points; each cycle starts at its smallest
    /// element and follows `i -> p(i)`. Cycles are ordered by their first point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let k = self.k();
        let mut seen = vec![false; k];
        let mut out = Vec::new();
        for start in 0..k {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut j = start;
            while !seen[j] {
                seen[j] = true;
                cyc.push(j);
                j = self.images[j] as usize;
            }
            out.push(cyc);
        }
        out
    }

    /// Cycle lengths sorted in non-increasing order.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycles().iter().map(|c| c.len()).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    /// Lexicographic rank of the image word, in `0..k!`.
    pub fn rank(&self) -> usize {
        let k = self.k();
        let mut rank = 0usize;
        for i in 0..k {
            let smaller_after = self.images[i + 1..]
                .iter()
                .filter(|&&v| v < self.images[i])
                .count();
            rank = rank * (k - i) + smaller_after;
        }
        rank
    }

    pub fn unrank(mut rank: usize, k: usize) -> Result<Self> {
        if k > COUNT_CAP + 2 {
            return Err(Error::CapExceeded(format!("unrank with k = {k}")));
        }
        let total = factorial(k);
        if rank >= total {
            return Err(Error::InvalidInput(format!("rank {rank} >= {k}!")));
        }
        let mut digits = vec![0usize; k];
        for i in (0..k).rev() {
            let base = k - i;
            digits[i] = rank % base;
            rank /= base;
        }
        let mut pool: Vec<u8> = (0..k as u8).collect();
        let images = digits.iter().map(|&d| pool.remove(d)).collect();
        Ok(Permutation { images })
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Cycle notation with fixed points, e.g. `(123)(4)`. For `k >= 10` the points
/// inside a cycle are separated by spaces: `(1 2 10)(3)...`.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.k() >= 10 { " " } else { "" };
        if self.k() == 0 {
            return write!(f, "()");
        }
        for cyc in self.cycles() {
            let parts: Vec<String> = cyc.iter().map(|&i| (i + 1).to_string()).collect();
            write!(f, "({})", parts.join(sep))?;
        }
        Ok(())
    }
}

/// Parse cycle notation. Omitted points are fixed. Without an explicit `k`
/// the largest mentioned point is used; see [`parse_cycles`].
impl FromStr for Permutation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_cycles(s, None)
    }
}

/// Parse cycle notation such as `"(123)(4)"`, `"(1 2 10)"` or `"(1,3)"`.
/// Single digits without separators are read one point per character.
pub fn parse_cycles(s: &str, k: Option<usize>) -> Result<Permutation> {
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let open = rest
            .strip_prefix('(')
            .ok_or_else(|| Error::Parse(format!("expected '(' in {s:?}")))?;
        let close = open
            .find(')')
            .ok_or_else(|| Error::Parse(format!("unclosed cycle in {s:?}")))?;
        let body = open[..close].trim();
        let points: Vec<usize> = if body.is_empty() {
            Vec::new()
        } else if body.contains(|c: char| c == ' ' || c == ',') {
            body.split(|c: char| c == ' ' || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?
        } else {
            body.chars()
                .map(|c| {
                    c.to_digit(10)
                        .map(|d| d as usize)
                        .ok_or_else(|| Error::Parse(format!("bad point {c:?} in {s:?}")))
                })
                .collect::<Result<_>>()?
        };
        cycles.push(points);
        rest = open[close + 1..].trim_start();
    }
    let max_point = cycles.iter().flatten().copied().max().unwrap_or(0);
    let k = k.unwrap_or(max_point);
    if max_point > k {
        return Err(Error::Parse(format!("point {max_point} exceeds k = {k}")));
    }
    let mut images: Vec<usize> = (0..k).collect();
    let mut used = vec![false; k];
    for cyc in &cycles {
        for (idx, &p) in cyc.iter().enumerate() {
            if p == 0 {
                return Err(Error::Parse("points are 1-based".into()));
            }
            if used[p - 1] {
                return Err(Error::Parse(format!("point {p} repeated in {s:?}")));
            }
            used[p - 1] = true;
            images[p - 1] = cyc[(idx + 1) % cyc.len()] - 1;
        }
    }
    Permutation::from_images(images)
}

fn check_same_k(a: &Permutation, b: &Permutation) -> Result<()> {
    if a.k() != b.k() {
        return Err(Error::IncompatibleK(a.k(), b.k()));
    }
    Ok(())
}

/// `(a∘b)(i) = a(b(i))`.
pub fn compose(a: &Permutation, b: &Permutation) -> Result<Permutation> {
    check_same_k(a, b)?;
    Ok(compose_unchecked(a, b))
}

#[inline]
pub(crate) fn compose_unchecked(a: &Permutation, b: &Permutation) -> Permutation {
    Permutation { images: b.images.iter().map(|&j| a.images[j as usize]).collect() }
}

/// `#(a⁻¹ b)` without allocating the product.
#[inline]
pub(crate) fn cycles_of_quotient(a_inv: &Permutation, b: &Permutation) -> usize {
    let k = b.k();
    let mut seen = [false; 256];
    let mut count = 0;
    for start in 0..k {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = a_inv.images[b.images[j] as usize] as usize;
        }
    }
    count
}

pub fn num_cycles(p: &Permutation) -> usize {
    p.num_cycles()
}

/// `dist(a, b) = k − #(a⁻¹ b)`, the minimal number of transpositions taking
/// `a` to `b`.
pub fn cayley_distance(a: &Permutation, b: &Permutation) -> Result<usize> {
    check_same_k(a, b)?;
    Ok(a.k() - cycles_of_quotient(&a.inverse(), b))
}

pub fn adjacency_indicator(a: &Permutation, b: &Permutation, alpha: usize) -> Result<u8> {
    Ok(u8::from(cayley_distance(a, b)? == alpha))
}

/// All `k!` permutations in lexicographic order of the image word.
pub fn enumerate(k: usize) -> Result<Vec<Permutation>> {
    if k == 0 || k > ENUM_CAP {
        return Err(Error::CapExceeded(format!("enumerate S_{k}: supported range 1..={ENUM_CAP}")));
    }
    Ok(enumerate_unchecked(k))
}

pub(crate) fn enumerate_unchecked(k: usize) -> Vec<Permutation> {
    let mut out = Vec::with_capacity(factorial(k));
    let mut cur: Vec<u8> = (0..k as u8).collect();
    loop {
        out.push(Permutation { images: cur.clone() });
        if !next_permutation(&mut cur) {
            break;
        }
    }
    out
}

/// Visit every permutation of S_k in lexicographic order without storing them.
pub fn for_each_permutation(k: usize, mut f: impl FnMut(&Permutation)) -> Result<()> {
    if k == 0 || k > COUNT_CAP {
        return Err(Error::CapExceeded(format!("iterate S_{k}: supported range 1..={COUNT_CAP}")));
    }
    let mut p = Permutation::identity(k);
    loop {
        f(&p);
        if !next_permutation(&mut p.images) {
            return Ok(());
        }
    }
}

fn next_permutation(v: &mut [u8]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

pub fn factorial(k: usize) -> usize {
    (1..=k).product()
}

/// Integer partitions of `k` in reverse lexicographic order, parts non-increasing.
pub fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=rem.min(max)).rev() {
            cur.push(part);
            rec(rem - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

/// Precomputed data for all of S_k: the permutations themselves, their
/// inverses, cycle counts and conjugacy-class labels.
#[derive(Debug, Clone)]
pub struct SymTable {
    pub k: usize,
    pub perms: Vec<Permutation>,
    pub inv: Vec<usize>,
    pub ncycles: Vec<usize>,
    /// Class index into `classes` for each permutation.
    pub class: Vec<usize>,
    /// Cycle types, in the order of [`partitions`].
    pub classes: Vec<Vec<usize>>,
    pub class_size: Vec<usize>,
    /// One representative (rank) per class.
    pub class_rep: Vec<usize>,
}

impl SymTable {
    pub fn new(k: usize) -> Result<Self> {
        let perms = enumerate(k)?;
        let classes = partitions(k);
        let class_lookup: std::collections::HashMap<Vec<usize>, usize> =
            classes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        let inv = perms.iter().map(|p| p.inverse().rank()).collect();
        let ncycles = perms.iter().map(|p| p.num_cycles()).collect();
        let class: Vec<usize> = perms.iter().map(|p| class_lookup[&p.cycle_type()]).collect();
        let mut class_size = vec![0; classes.len()];
        let mut class_rep = vec![usize::MAX; classes.len()];
        for (r, &c) in class.iter().enumerate() {
            class_size[c] += 1;
            if class_rep[c] == usize::MAX {
                class_rep[c] = r;
            }
        }
        Ok(SymTable { k, perms, inv, ncycles, class, classes, class_size, class_rep })
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    /// Rank of `a∘b` given ranks.
    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        compose_unchecked(&self.perms[a], &self.perms[b]).rank()
    }

    /// Class index of `a⁻¹ b` given ranks.
    #[inline]
    pub fn quotient_class(&self, a: usize, b: usize) -> usize {
        self.class[self.mul(self.inv[a], b)]
    }

    /// `dist(a, b)` given ranks.
    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> usize {
        self.k - cycles_of_quotient(&self.perms[self.inv[a]], &self.perms[b])
    }

    /// Class of the identity (all fixed points).
    pub fn identity_class(&self) -> usize {
        self.class[0]
    }

    /// Number of cycles of any member of class `c`.
    pub fn class_ncycles(&self, c: usize) -> usize {
        self.classes[c].len()
    }
}
