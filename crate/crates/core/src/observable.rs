//! Explicit local observables and their embedding into a chain of sites.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeprob::MomentSequence;

/// Hermitian matrix acting on sites `first_site .. first_site + num_sites`
/// (0-based) of a chain with local dimension `site_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    pub matrix: DMatrix<Complex64>,
    pub site_dim: usize,
    pub first_site: usize,
    pub num_sites: usize,
    pub traceless: bool,
    /// Upper bound on the operator norm.
    pub norm_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableKind {
    /// Letters from `IXYZ`, one per qubit; requires `site_dim = 2`.
    PauliString { paulis: String },
    /// GUE draw scaled to unit operator norm.
    RandomHermitian { seed: u64 },
    /// Diagonal projector of the given rank.
    Projector { rank: usize },
    /// Projector of the given rank minus `½·1`.
    ShiftedProjector { rank: usize },
}

const HERMITIAN_TOL: f64 = 1e-12;

impl ObservableSpec {
    pub fn new(matrix: DMatrix<Complex64>, site_dim: usize, first_site: usize, num_sites: usize) -> Result<Self> {
        let local = site_dim
            .checked_pow(num_sites as u32)
            .ok_or_else(|| Error::CapExceeded("observable support too large".into()))?;
        if matrix.nrows() != local || matrix.ncols() != local {
            return Err(Error::InvalidInput(format!(
                "matrix is {}×{}, support needs {local}×{local}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm_err = max_abs(&(&matrix - matrix.adjoint()));
        if herm_err > HERMITIAN_TOL * max_abs(&matrix).max(1.0) {
            return Err(Error::InvalidInput(format!("observable is not Hermitian (deviation {herm_err:e})")));
        }
        let traceless = matrix.trace().norm() <= HERMITIAN_TOL * local as f64;
        let norm_bound = spectral_norm(&matrix);
        Ok(ObservableSpec { matrix, site_dim, first_site, num_sites, traceless, norm_bound })
    }

    /// Dimension of the local support.
    pub fn local_dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `1_{before} ⊗ M ⊗ 1_{after}` on a chain of `total_sites` sites.
    pub fn embed(&self, total_sites: usize) -> Result<DMatrix<Complex64>> {
        if self.first_site + self.num_sites > total_sites {
            return Err(Error::InvalidInput(format!(
                "support {}..{} exceeds {total_sites} sites",
                self.first_site,
                self.first_site + self.num_sites
            )));
        }
        let left = self.site_dim.pow(self.first_site as u32);
        let right = self.site_dim.pow((total_sites - self.first_site - self.num_sites) as u32);
        let id = |n: usize| DMatrix::<Complex64>::identity(n, n);
        Ok(id(left).kronecker(&self.matrix).kronecker(&id(right)))
    }

    /// Normalized moments `⟨A^j⟩`, `j = 1..=order`, from the spectrum.
    pub fn moments(&self, order: usize) -> MomentSequence<f64> {
        let eig = self.matrix.clone().symmetric_eigen().eigenvalues;
        let n = eig.len() as f64;
        MomentSequence::new((1..=order).map(|j| eig.iter().map(|l| l.powi(j as i32)).sum::<f64>() / n).collect())
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()))
}

fn pauli(c: char) -> Result<DMatrix<Complex64>> {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    Ok(match c.to_ascii_uppercase() {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        other => return Err(Error::InvalidInput(format!("unknown Pauli letter {other:?}"))),
    })
}

fn diagonal(entries: impl Iterator<Item = f64>) -> DMatrix<Complex64> {
    let v: Vec<Complex64> = entries.map(|x| Complex64::new(x, 0.0)).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))
}

/// Build an observable of the requested kind on `num_sites` sites starting at
/// `first_site`.
pub fn make_observable(kind: &ObservableKind, site_dim: usize, first_site: usize, num_sites: usize) -> Result<ObservableSpec> {
    if site_dim < 2 || num_sites == 0 {
        return Err(Error::InvalidInput("observable needs site_dim ≥ 2 and at least one site".into()));
    }
    let local = site_dim
        .checked_pow(num_sites as u32)
        .ok_or_else(|| Error::CapExceeded("observable support too large".into()))?;
    let matrix = match kind {
        ObservableKind::PauliString { paulis } => {
            if site_dim != 2 || paulis.chars().count() != num_sites {
                return Err(Error::InvalidInput(format!(
                    "Pauli string {paulis:?} needs one letter per qubit site ({num_sites})"
                )));
            }
            paulis
                .chars()
                .try_fold(DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)), |acc, c| {
                    Ok::<_, Error>(acc.kronecker(&pauli(c)?))
                })?
        }
        ObservableKind::Projector { rank } | ObservableKind::ShiftedProjector { rank } => {
            if *rank > local {
                return Err(Error::InvalidInput(format!("rank {rank} exceeds support dimension {local}")));
            }
            let shift = if matches!(kind, ObservableKind::ShiftedProjector { .. }) { 0.5 } else { 0.0 };
            diagonal((0..local).map(|i| if i < *rank { 1.0 } else { 0.0 } - shift))
        }
        ObservableKind::RandomHermitian { seed } => random_hermitian(local, *seed)?,
    };
    ObservableSpec::new(matrix, site_dim, first_site, num_sites)
}

#[cfg(feature = "mc")]
fn random_hermitian(dim: usize, seed: u64) -> Result<DMatrix<Complex64>> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im)
    });
    let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    let norm = spectral_norm(&h);
    Ok(h / Complex64::new(norm, 0.0))
}

#[cfg(not(feature = "mc"))]
fn random_hermitian(_dim: usize, _seed: u64) -> Result<DMatrix<Complex64>> {
    Err(Error::Unsupported("random observables need the `mc` feature".into()))
}
