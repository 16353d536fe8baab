use num::Zero;
use rmpu_core::freeprob::*;
use rmpu_core::ncposet::{mobius, nc_poset};
use rmpu_core::scalar::{rat, rat_int};
use rmpu_core::symgroup::{cayley_distance, compose, enumerate, parse_cycles, Permutation};
use rmpu_core::Rational;

fn seq(v: &[(i64, i64)]) -> MomentSequence<Rational> {
    MomentSequence::new(v.iter().map(|&(p, q)| rat(p, q)).collect())
}

fn spectrum_moments(spec: &[Rational], order: usize) -> MomentSequence<Rational> {
    let n = rat_int(spec.len() as i64);
    MomentSequence::new(
        (1..=order)
            .map(|j| spec.iter().fold(Rational::zero(), |acc, x| acc + num::pow(x.clone(), j)) / n.clone())
            .collect(),
    )
}

/// `tr[A^{⊗k} T_p]/D^{#p}` straight from the spectrum: each cycle contributes a
/// normalized power trace.
fn partitioned_from_spectrum(spec: &[Rational], p: &Permutation) -> Rational {
    let n = rat_int(spec.len() as i64);
    p.cycles()
        .iter()
        .map(|c| spec.iter().fold(Rational::zero(), |acc, x| acc + num::pow(x.clone(), c.len())) / n.clone())
        .fold(rat_int(1), |a, b| a * b)
}

#[test]
fn partitioned_moment_examples() {
    let m = seq(&[(1, 2), (1, 2), (1, 2), (1, 2)]);
    for k in 1..=4 {
        assert_eq!(partitioned_moment(&m, &Permutation::identity(k)).unwrap(), num::pow(rat(1, 2), k));
        assert_eq!(partitioned_moment(&m, &Permutation::long_cycle(k)).unwrap(), rat(1, 2));
    }
    let p = parse_cycles("(12)(3)(4)", Some(4)).unwrap();
    assert_eq!(partitioned_moment(&m, &p).unwrap(), rat(1, 8));
    let short = seq(&[(1, 2), (1, 3)]);
    assert!(matches!(
        partitioned_moment(&short, &Permutation::long_cycle(3)),
        Err(rmpu_core::Error::InsufficientMoments { needed: 3, available: 2 })
    ));
}

#[test]
fn cumulant_examples() {
    let m = seq(&[(1, 3), (1, 2), (2, 5), (1, 7)]);
    let c = cumulants_from_moments(&m).unwrap();
    assert_eq!(c.kappa(1), &rat(1, 3));
    assert_eq!(c.kappa(2), &(rat(1, 2) - rat(1, 9)));
    // κ₃ = m₃ − 3m₂m₁ + 2m₁³
    assert_eq!(c.kappa(3), &(rat(2, 5) - rat(3, 1) * rat(1, 2) * rat(1, 3) + rat(2, 27)));
    assert_eq!(moments_from_cumulants(&c).unwrap(), m);
}

#[test]
fn moment_examples() {
    let point = CumulantSequence { kappas: vec![rat_int(1), rat_int(0), rat_int(0), rat_int(0), rat_int(0)] };
    assert!(moments_from_cumulants(&point).unwrap().moments.iter().all(|x| *x == rat_int(1)));
    let mut k = vec![rat_int(0); 8];
    k[1] = rat_int(1);
    let semi = moments_from_cumulants(&CumulantSequence { kappas: k }).unwrap();
    let expect: Vec<Rational> = [0, 1, 0, 2, 0, 5, 0, 14].iter().map(|&v| rat_int(v)).collect();
    assert_eq!(semi.moments, expect);
    let two = moments_from_cumulants(&CumulantSequence { kappas: vec![rat(2, 3), rat(1, 5)] }).unwrap();
    assert_eq!(two.moments, vec![rat(2, 3), rat(1, 5) + rat(4, 9)]);
}

#[test]
fn round_trip_up_to_eight() {
    let m = seq(&[(1, 3), (-1, 2), (2, 5), (1, 7), (-3, 11), (5, 13), (1, 17), (-2, 19)]);
    for order in 1..=8 {
        let mm = MomentSequence::new(m.moments[..order].to_vec());
        assert_eq!(moments_from_cumulants(&cumulants_from_moments(&mm).unwrap()).unwrap(), mm);
    }
}

#[test]
fn free_otoc_low_orders() {
    let ma = seq(&[(1, 3), (1, 2), (2, 5)]);
    let mb = seq(&[(-1, 4), (3, 7), (1, 9)]);
    let a = |j: usize| ma.m(j).clone();
    let b = |j: usize| mb.m(j).clone();
    assert_eq!(free_otoc_prediction(&ma, &mb, 1).unwrap(), a(1) * b(1));
    let k2 = a(2) * b(1) * b(1) + a(1) * a(1) * b(2) - a(1) * a(1) * b(1) * b(1);
    assert_eq!(free_otoc_prediction(&ma, &mb, 2).unwrap(), k2);
    let t = seq(&[(0, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6)]);
    let u = seq(&[(0, 1), (2, 3), (-1, 3), (3, 4), (1, 7), (1, 8)]);
    for k in 1..=6 {
        assert!(free_otoc_prediction(&t, &u, k).unwrap().is_zero());
        assert_eq!(free_otoc_prediction(&ma, &mb, 3).unwrap(), free_otoc_prediction(&mb, &ma, 3).unwrap());
    }
}

/// Definitional sum over pairs `π ≤ σ ≤ γ` of S_k, found by brute force over
/// all of S_k², with moments computed from explicit spectra of size 64.
#[test]
fn brute_force_oracle_with_explicit_spectra() {
    let spec_a: Vec<Rational> = (0..64).map(|i| rat((i % 7) as i64 - 2, 5)).collect();
    let spec_b: Vec<Rational> = (0..64).map(|i| rat(((i * 5) % 11) as i64 - 4, 9)).collect();
    let ma = spectrum_moments(&spec_a, 4);
    let mb = spectrum_moments(&spec_b, 4);
    for k in 1..=4 {
        let e = Permutation::identity(k);
        let g = Permutation::long_cycle(k);
        let all = enumerate(k).unwrap();
        let mut total = Rational::zero();
        for pi in &all {
            for sigma in &all {
                let s = cayley_distance(&e, pi).unwrap() + cayley_distance(pi, sigma).unwrap() + cayley_distance(sigma, &g).unwrap();
                if s != k - 1 {
                    continue;
                }
                let kr = compose(&sigma.inverse(), &g).unwrap();
                total += rat_int(mobius(pi, sigma).unwrap())
                    * partitioned_from_spectrum(&spec_a, pi)
                    * partitioned_from_spectrum(&spec_b, &kr);
            }
        }
        assert_eq!(free_otoc_prediction(&ma, &mb, k).unwrap(), total, "k={k}");
    }
}

#[test]
fn singleton_lemma_and_kreweras_counts() {
    for k in 1..=8 {
        let poset = nc_poset(k).unwrap();
        let g = Permutation::long_cycle(k);
        for (x, ups) in poset.up.iter().enumerate() {
            let pi = &poset.elems[x];
            let sx = compose(&pi.inverse(), &g).unwrap();
            assert_eq!(pi.num_cycles() + sx.num_cycles(), k + 1);
            for &y in ups {
                let kr = compose(&poset.elems[y].inverse(), &g).unwrap();
                let has_fixed = |p: &Permutation| p.cycle_type().contains(&1);
                assert!(has_fixed(pi) || has_fixed(&kr), "k={k}");
            }
        }
    }
}

#[test]
fn tensor_and_identity_helpers() {
    let m = seq(&[(1, 2), (1, 3)]);
    let id = MomentSequence::<Rational>::identity(2);
    assert_eq!(m.tensor(&id), m);
    assert_eq!(m.tensor(&m).moments, vec![rat(1, 4), rat(1, 9)]);
    assert!(seq(&[(0, 1), (1, 2)]).is_traceless());
    assert!(!m.is_traceless());
    let f = m.to_f64();
    assert!((f.moments[1] - 1.0 / 3.0).abs() < 1e-15);
}
