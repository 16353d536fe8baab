//! Normalized moments, free cumulants and the free mixed-moment formula.

use crate::error::{Error, Result};
use crate::ncposet::{mobius_of_type, nc_poset};
use crate::scalar::Scalar;
use crate::symgroup::{compose_unchecked, Permutation};

/// `m_j = ⟨A^j⟩ = tr[A^j]/D` for `j = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence<T> {
    pub moments: Vec<T>,
}

/// Free cumulants `κ_1..κ_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSequence<T> {
    pub kappas: Vec<T>,
}

impl<T: Scalar> MomentSequence<T> {
    pub fn new(moments: Vec<T>) -> Self {
        MomentSequence { moments }
    }

    /// Moments of the identity operator: all ones.
    pub fn identity(order: usize) -> Self {
        MomentSequence { moments: vec![T::one(); order] }
    }

    pub fn order(&self) -> usize {
        self.moments.len()
    }

    /// `m_j`, 1-based.
    pub fn m(&self, j: usize) -> &T {
        &self.moments[j - 1]
    }

    pub fn require(&self, needed: usize) -> Result<()> {
        if self.order() < needed {
            return Err(Error::InsufficientMoments { needed, available: self.order() });
        }
        Ok(())
    }

    /// `⟨A⟩_p = ∏_{cycles c of p} m_{|c|}`.
    pub fn partitioned(&self, p: &Permutation) -> Result<T> {
        self.partitioned_type(&p.cycle_type())
    }

    pub fn partitioned_type(&self, cycle_type: &[usize]) -> Result<T> {
        let mut acc = T::one();
        for &len in cycle_type {
            self.require(len)?;
            acc = acc * self.m(len).clone();
        }
        Ok(acc)
    }

    /// Entrywise product, i.e. moments of `A ⊗ A'`.
    pub fn tensor(&self, other: &Self) -> Self {
        MomentSequence {
            moments: self.moments.iter().zip(&other.moments).map(|(a, b)| a.clone() * b.clone()).collect(),
        }
    }

    pub fn to_f64(&self) -> MomentSequence<f64> {
        MomentSequence { moments: self.moments.iter().map(|v| v.as_f64()).collect() }
    }

    pub fn is_traceless(&self) -> bool {
        self.moments.first().map(|m| m.is_zero()).unwrap_or(true)
    }
}

pub fn partitioned_moment<T: Scalar>(m: &MomentSequence<T>, p: &Permutation) -> Result<T> {
    m.partitioned(p)
}

/// `κ_n = Σ_{σ ∈ NC(n)} ⟨m⟩_σ μ(σ, γ_n)`.
pub fn cumulants_from_moments<T: Scalar>(m: &MomentSequence<T>) -> Result<CumulantSequence<T>> {
    let mut kappas = Vec::with_capacity(m.order());
    for n in 1..=m.order() {
        let poset = nc_poset(n)?;
        let g = Permutation::long_cycle(n);
        let mut acc = T::zero();
        for s in &poset.elems {
            let mu = mobius_of_type(&compose_unchecked(&s.inverse(), &g).cycle_type());
            acc = acc + T::from_i64(mu) * m.partitioned(s)?;
        }
        kappas.push(acc);
    }
    Ok(CumulantSequence { kappas })
}

/// `m_n = Σ_{π ∈ NC(n)} ∏_{cycles c} κ_{|c|}`.
pub fn moments_from_cumulants<T: Scalar>(c: &CumulantSequence<T>) -> Result<MomentSequence<T>> {
    let as_seq = MomentSequence { moments: c.kappas.clone() };
    let mut moments = Vec::with_capacity(c.kappas.len());
    for n in 1..=c.kappas.len() {
        let poset = nc_poset(n)?;
        let mut acc = T::zero();
        for p in &poset.elems {
            acc = acc + as_seq.partitioned(p)?;
        }
        moments.push(acc);
    }
    Ok(MomentSequence { moments })
}

impl<T: Scalar> CumulantSequence<T> {
    pub fn kappa(&self, j: usize) -> &T {
        &self.kappas[j - 1]
    }
}

/// `C_FP = Σ_{π ≤ σ ≤ γ} μ(π,σ) ⟨A⟩_π ⟨B⟩_{σ⁻¹γ}`.
pub fn free_otoc_prediction<T: Scalar>(ma: &MomentSequence<T>, mb: &MomentSequence<T>, k: usize) -> Result<T> {
    ma.require(k)?;
    mb.require(k)?;
    let poset = nc_poset(k)?;
    let a: Vec<T> = poset.elems.iter().map(|p| ma.partitioned(p)).collect::<Result<_>>()?;
    let b: Vec<T> = (0..poset.len())
        .map(|s| mb.partitioned(&poset.elems[poset.kreweras_index(s)]))
        .collect::<Result<_>>()?;
    let mut acc = T::zero();
    for s in 0..poset.len() {
        if b[s].is_zero() {
            continue;
        }
        for &p in &poset.down[s] {
            if a[p].is_zero() {
                continue;
            }
            acc = acc + T::from_i64(poset.mobius(p, s)) * a[p].clone() * b[s].clone();
        }
    }
    Ok(acc)
}
