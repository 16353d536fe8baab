use nalgebra::DMatrix;
use num::bigint::BigInt;
use num::Zero;
use num_complex::Complex64;
use rmpu_core::fit::{inverse_power_fit, power_law_fit};
use rmpu_core::freeprob::*;
use rmpu_core::predict::*;
use rmpu_core::scalar::{rat, rat_int, Scalar};
use rmpu_core::symgroup::{compose, enumerate, Permutation};
use rmpu_core::weingarten::{haar_twirl_exact, replica_permutation};
use rmpu_core::Rational;

fn seq(v: &[(i64, i64)]) -> MomentSequence<Rational> {
    MomentSequence::new(v.iter().map(|&(p, q)| rat(p, q)).collect())
}

fn ma() -> MomentSequence<Rational> {
    seq(&[(1, 3), (1, 2), (2, 5), (1, 7)])
}

fn mb() -> MomentSequence<Rational> {
    seq(&[(-1, 4), (3, 7), (1, 9), (2, 3)])
}

fn traceless_a() -> MomentSequence<Rational> {
    seq(&[(0, 1), (1, 2), (1, 5), (3, 7)])
}

fn traceless_b() -> MomentSequence<Rational> {
    seq(&[(0, 1), (1, 3), (-1, 4), (1, 2)])
}

fn cmat(dim: usize, seed: u64) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        let t = (seed as f64 + 1.0) * 0.7548776662 + (i * dim + j) as f64 * 0.5698402910;
        Complex64::new((7.0 * t).sin(), (3.0 * t).cos())
    })
}

fn kron_all(ops: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    ops[1..].iter().fold(ops[0].clone(), |acc, m| acc.kronecker(m))
}

// ---------------------------------------------------------------------------
// conventions

#[test]
fn replica_trace_matches_dense_operators() {
    let dim = 2;
    for k in 2..=3 {
        let ops: Vec<DMatrix<Complex64>> = (0..k).map(|i| cmat(dim, i as u64)).collect();
        let big = kron_all(&ops);
        for tau in enumerate(k).unwrap() {
            let dense = (&big * replica_permutation(&tau, dim).unwrap()).trace();
            let fast = replica_trace(&ops, &tau).unwrap();
            assert!((dense - fast).norm() < 1e-10, "k={k} τ={tau}");
        }
    }
}

#[test]
fn alternating_trace_is_long_cycle_contraction() {
    let dim = 2;
    for k in 2..=3 {
        let a: Vec<DMatrix<Complex64>> = (0..k).map(|i| cmat(dim, i as u64)).collect();
        let b: Vec<DMatrix<Complex64>> = (0..k).map(|i| cmat(dim, 10 + i as u64)).collect();
        let mut prod = DMatrix::<Complex64>::identity(dim, dim);
        for i in 0..k {
            prod = prod * &a[i] * &b[i];
        }
        let gi = Permutation::long_cycle(k).inverse();
        let rep = (kron_all(&a) * kron_all(&b) * replica_permutation(&gi, dim).unwrap()).trace();
        assert!((prod.trace() - rep).norm() < 1e-10, "k={k}");
    }
}

// ---------------------------------------------------------------------------
// Haar

/// `[D²(a₁²b₂ − a₁²b₁² + a₂b₁²) − a₂b₂]/(D² − 1)`, from the 2×2 Weingarten matrix.
fn haar_k2_closed(a: &MomentSequence<Rational>, b: &MomentSequence<Rational>, dim: i64) -> Rational {
    let (a1, a2, b1, b2) = (a.m(1).clone(), a.m(2).clone(), b.m(1).clone(), b.m(2).clone());
    let d2 = rat_int(dim * dim);
    let inner = &a1 * &a1 * &b2 - &a1 * &a1 * &b1 * &b1 + &a2 * &b1 * &b1;
    (d2.clone() * inner - a2 * b2) / (d2 - rat_int(1))
}

#[test]
fn haar_otoc_exact_examples() {
    for dim in [3u64, 5, 8, 64] {
        let v: Rational = haar_otoc_exact(&ma(), &mb(), dim, 2).unwrap();
        assert_eq!(v, haar_k2_closed(&ma(), &mb(), dim as i64));
        let one: Rational = haar_otoc_exact(&ma(), &mb(), dim, 1).unwrap();
        assert_eq!(one, ma().m(1) * mb().m(1));
    }
    for k in 1..=4 {
        let id = MomentSequence::identity(4);
        let v: Rational = haar_otoc_exact(&id, &mb(), 9, k).unwrap();
        assert_eq!(&v, mb().m(k));
    }
    assert!(matches!(haar_otoc_exact::<Rational>(&ma(), &mb(), 2, 2), Err(rmpu_core::Error::DimensionTooSmall { .. })));
}

#[test]
fn haar_otoc_float_matches_exact() {
    let v: Rational = haar_otoc_exact(&ma(), &mb(), 12, 4).unwrap();
    let f: f64 = haar_otoc_exact(&ma().to_f64(), &mb().to_f64(), 12, 4).unwrap();
    assert!((v.as_f64() - f).abs() < 1e-13);
}

/// Independent oracle: `(1/D) tr[Φ(⊗Aᵢ)(⊗Bᵢ)T_{γ⁻¹}]` through the dense twirl.
#[test]
fn multi_otoc_matches_dense_twirl() {
    let dim = 4;
    for k in 2..=3 {
        let a: Vec<DMatrix<Complex64>> = (0..k).map(|i| cmat(dim, 20 + i as u64)).collect();
        let b: Vec<DMatrix<Complex64>> = (0..k).map(|i| cmat(dim, 30 + i as u64)).collect();
        let tw = haar_twirl_exact(&kron_all(&a), dim, k).unwrap();
        let gi = Permutation::long_cycle(k).inverse();
        let oracle = (tw * kron_all(&b) * replica_permutation(&gi, dim).unwrap()).trace() / dim as f64;
        let fast = haar_multi_otoc_exact(&a, &b, dim).unwrap();
        assert!((oracle - fast).norm() < 1e-10, "k={k}: {oracle} vs {fast}");
    }
}

#[test]
fn multi_otoc_specializations() {
    let dim = 4;
    let id = DMatrix::<Complex64>::identity(dim, dim);
    let v = haar_multi_otoc_exact(&[id.clone(), id.clone()], &[id.clone(), id.clone()], dim).unwrap();
    assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    // diagonal A, B with rational spectra
    let sa = [rat(1, 1), rat(1, 2), rat(0, 1), rat(-1, 2)];
    let sb = [rat(1, 3), rat(-1, 1), rat(1, 4), rat(0, 1)];
    let diag = |s: &[Rational]| {
        DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(dim, s.iter().map(|x| Complex64::new(x.as_f64(), 0.0))))
    };
    let moments = |s: &[Rational]| {
        MomentSequence::new((1..=3).map(|j| s.iter().fold(Rational::zero(), |a, x| a + num::pow(x.clone(), j)) / rat_int(4)).collect())
    };
    for k in 2..=3 {
        let a = vec![diag(&sa); k];
        let b = vec![diag(&sb); k];
        let multi = haar_multi_otoc_exact(&a, &b, dim).unwrap();
        let single: Rational = haar_otoc_exact(&moments(&sa), &moments(&sb), dim as u64, k).unwrap();
        assert!((multi.re - single.as_f64()).abs() < 1e-12 && multi.im.abs() < 1e-12);
    }
}

#[test]
fn histogram_genus_counts() {
    let expect = [(1u64, 0u64), (3, 1), (12, 21), (55, 270), (273, 2860), (1428, 27300)];
    for (i, &(g0, g1)) in expect.iter().enumerate() {
        let h = pair_histogram(i + 1).unwrap();
        assert_eq!((h.genus_total(0), h.genus_total(1)), (g0, g1));
        let total: u64 = (0..=h.max_genus).map(|g| h.genus_total(g)).sum();
        let kf = (1..=i as u64 + 1).product::<u64>();
        assert_eq!(total, kf * kf);
    }
    for k in 1..=6 {
        let fp: Rational = free_otoc_prediction(&ma(), &mb(), k.min(4)).unwrap();
        let hist: Rational = free_otoc_from_histogram(&ma(), &mb(), k.min(4)).unwrap();
        assert_eq!(fp, hist);
    }
}

#[test]
fn haar_converges_to_free_with_coefficient() {
    for k in 1..=4 {
        let fp: Rational = free_otoc_prediction(&ma(), &mb(), k).unwrap();
        let c: Rational = subleading_coeff_haar(&ma(), &mb(), k).unwrap();
        let dims = [64u64, 128, 256, 512];
        let diffs: Vec<f64> = dims
            .iter()
            .map(|&d| {
                let h: Rational = haar_otoc_exact(&ma(), &mb(), d, k).unwrap();
                (h - fp.clone()).as_f64()
            })
            .collect();
        if k == 1 {
            assert!(diffs.iter().all(|x| x.abs() < 1e-15));
            assert!(c.is_zero());
            continue;
        }
        let xs: Vec<f64> = dims.iter().map(|&d| d as f64).collect();
        let fit = power_law_fit(&xs, &diffs).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.1, "k={k}: {}", fit.exponent);
        let scaled = diffs[3] * 512.0 * 512.0;
        assert!((scaled - c.as_f64()).abs() < 0.01 * c.as_f64().abs(), "k={k}");
    }
}

#[test]
fn haar_coefficient_closed_forms() {
    let ka = cumulants_from_moments(&ma()).unwrap();
    let kb = cumulants_from_moments(&mb()).unwrap();
    for k in 1..=4 {
        let g: Rational = subleading_coeff_haar(&ma(), &mb(), k).unwrap();
        let c: Rational = subleading_coeff_haar_closed(&ka, &kb, k).unwrap();
        assert_eq!(g, c, "k={k}");
    }
    let c2: Rational = subleading_coeff_haar(&ma(), &mb(), 2).unwrap();
    assert_eq!(c2, -(ka.kappa(2) * kb.kappa(2)));
    let (ta, tb) = (traceless_a(), traceless_b());
    let (kta, ktb) = (cumulants_from_moments(&ta).unwrap(), cumulants_from_moments(&tb).unwrap());
    let c3: Rational = subleading_coeff_haar(&ta, &tb, 3).unwrap();
    assert_eq!(c3, kta.kappa(3) * ktb.kappa(3));
    let c4: Rational = subleading_coeff_haar(&ta, &tb, 4).unwrap();
    let k2a2 = kta.kappa(2) * kta.kappa(2);
    let k2b2 = ktb.kappa(2) * ktb.kappa(2);
    assert_eq!(c4, kta.kappa(4) * k2b2 + ktb.kappa(4) * k2a2);
}

// ---------------------------------------------------------------------------
// RMPU

#[test]
fn single_layer_is_haar_on_gate() {
    for (d, r) in [(2u64, 1u32), (2, 2), (3, 1)] {
        let g = RmpuGeometry::staircase(d, r, 1);
        for k in 1..(g.gate_dim() as usize).min(5) {
            let rm: Rational = rmpu_otoc_exact(&ma(), &mb(), &g, k).unwrap();
            let h: Rational = haar_otoc_exact(&ma(), &mb(), g.gate_dim(), k).unwrap();
            assert_eq!(rm, h);
        }
    }
}

#[test]
fn rmpu_leading_collapses_to_free() {
    for n in 1..=4 {
        for k in 1..=4 {
            let l: Rational = rmpu_otoc_leading(&ma(), &mb(), n, k).unwrap();
            assert_eq!(l, free_otoc_prediction(&ma(), &mb(), k).unwrap());
        }
    }
    let t: Rational = rmpu_otoc_leading(&traceless_a(), &traceless_b(), 3, 4).unwrap();
    assert!(t.is_zero());
}

#[test]
fn rmpu_coefficient_closed_forms_and_split() {
    let ka = cumulants_from_moments(&ma()).unwrap();
    let kb = cumulants_from_moments(&mb()).unwrap();
    for d in [2u64, 3] {
        for n in 1..=3 {
            for k in 1..=4 {
                let dp: Rational = subleading_coeff_rmpu(&ma(), &mb(), n, d, k).unwrap();
                let cl: Rational = subleading_coeff_rmpu_closed(&ka, &kb, n, d, k).unwrap();
                assert_eq!(dp, cl, "d={d} n={n} k={k}");
            }
        }
    }
    // k = 2: (n/d² − (n−1))·c₂
    let c2: Rational = subleading_coeff_haar(&ma(), &mb(), 2).unwrap();
    for n in 1..=4 {
        let v: Rational = subleading_coeff_rmpu(&ma(), &mb(), n, 2, 2).unwrap();
        assert_eq!(v, (rat(n as i64, 4) - rat_int(n as i64 - 1)) * c2.clone());
    }
    // n = 1: c_k/d²
    for k in 2..=4 {
        let c: Rational = subleading_coeff_haar(&ma(), &mb(), k).unwrap();
        let v: Rational = subleading_coeff_rmpu(&ma(), &mb(), 1, 3, k).unwrap();
        assert_eq!(v * rat_int(9), c);
    }
    // split c̃ = (n/d² − (n−1))a + b/d^{2n}, fitted at n = 1,2, checked at n = 3,4
    for k in 2..=4 {
        let (a, b): (Rational, Rational) = rmpu_coeff_split(&ma(), &mb(), 2, k).unwrap();
        let c: Rational = subleading_coeff_haar(&ma(), &mb(), k).unwrap();
        assert_eq!(a.clone() + b.clone(), c);
        for n in 3..=4i64 {
            let pred = (rat(n, 4) - rat_int(n - 1)) * a.clone() + b.clone() / rat_int(4i64.pow(n as u32));
            let v: Rational = subleading_coeff_rmpu(&ma(), &mb(), n as usize, 2, k).unwrap();
            assert_eq!(v, pred, "k={k} n={n}");
        }
    }
    // traceless k = 3: c₃/d^{2n}
    let c3: Rational = subleading_coeff_haar(&traceless_a(), &traceless_b(), 3).unwrap();
    for n in 1..=3 {
        let v: Rational = subleading_coeff_rmpu(&traceless_a(), &traceless_b(), n, 2, 3).unwrap();
        assert_eq!(v, c3.clone() / rat_int(4i64.pow(n as u32)));
    }
}

#[test]
fn rmpu_converges_to_free_at_inverse_chi_squared() {
    for k in [2usize, 3] {
        let fp: Rational = free_otoc_prediction(&ma(), &mb(), k).unwrap();
        let ct: Rational = subleading_coeff_rmpu(&ma(), &mb(), 2, 2, k).unwrap();
        let rs = [3u32, 4, 5, 6];
        let chis: Vec<f64> = rs.iter().map(|&r| 2f64.powi(r as i32)).collect();
        let diffs: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let v: Rational = rmpu_otoc_exact(&ma(), &mb(), &RmpuGeometry::staircase(2, r, 2), k).unwrap();
                (v - fp.clone()).as_f64()
            })
            .collect();
        let fit = power_law_fit(&chis, &diffs).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.05, "k={k}: {}", fit.exponent);
        let coeffs = inverse_power_fit(&chis, &diffs, &[2, 4]).unwrap();
        assert!((coeffs[0].value - ct.as_f64()).abs() < 1e-3 * ct.as_f64().abs(), "k={k}");
    }
}

#[test]
fn traceless_scaling() {
    let (ta, tb) = (traceless_a(), traceless_b());
    let ka = cumulants_from_moments(&ta).unwrap();
    let kb = cumulants_from_moments(&tb).unwrap();
    let target3 = (ka.kappa(3) * kb.kappa(3)).as_f64();
    let target2 = ((rat(2, 4) - rat_int(1)) * -(ka.kappa(2) * kb.kappa(2))).as_f64();
    for r in [5u32, 6, 7] {
        let g = RmpuGeometry::staircase(2, r, 2);
        let chi2 = (g.chi() as f64).powi(2);
        let v3: Rational = rmpu_otoc_exact(&ta, &tb, &g, 3).unwrap();
        let v2: Rational = rmpu_otoc_exact(&ta, &tb, &g, 2).unwrap();
        assert!((v3.as_f64() * 16.0 * chi2 - target3).abs() < 0.02 * target3.abs(), "r={r}");
        assert!((v2.as_f64() * chi2 - target2).abs() < 0.01 * target2.abs(), "r={r}");
    }
}

#[test]
fn light_cone_reduction() {
    let (a, b) = (ma(), mb());
    // B on the first site shares its only gate with A: Haar on the gate
    for k in 2..=3 {
        for n in 2..=3 {
            let g = RmpuGeometry::staircase(2, 1, n);
            let v: Rational = rmpu_otoc_exact_at_site(&a, &b, &g, k, 1).unwrap();
            let h: Rational = haar_otoc_exact(&a, &b, g.gate_dim(), k).unwrap();
            assert_eq!(v, h, "k={k} n={n}");
        }
    }
    // B on site m only sees the first min(m, n) gates
    let g3 = RmpuGeometry::staircase(2, 1, 3);
    let g2 = RmpuGeometry::staircase(2, 1, 2);
    let v: Rational = rmpu_otoc_exact_at_site(&a, &b, &g3, 2, 2).unwrap();
    let w: Rational = rmpu_otoc_exact_at_site(&a, &b, &g2, 2, 2).unwrap();
    assert_eq!(v, w);
    assert_eq!(light_cone_layers(&g3, 2), 2);
    // one gate beyond the shared block is already not Haar
    let h: Rational = haar_otoc_exact(&a, &b, 4, 2).unwrap();
    assert_ne!(w, h);
}

#[test]
fn nonlocal_observables_differ_from_free_at_order_one() {
    let a1 = seq(&[(1, 3), (1, 2), (2, 5)]);
    let a2 = seq(&[(1, 2), (1, 2), (1, 2)]);
    let b1 = seq(&[(-1, 4), (3, 7), (1, 9)]);
    let b2 = seq(&[(2, 3), (2, 3), (1, 5)]);
    for k in [2usize, 3] {
        let lead: Rational = rmpu_otoc_nonlocal_leading(&[a1.clone(), a2.clone()], &[b1.clone(), b2.clone()], k).unwrap();
        let fp: Rational = free_otoc_prediction(&a1.tensor(&a2), &b1.tensor(&b2), k).unwrap();
        let gap = (lead.clone() - fp).as_f64().abs();
        assert!(gap > 0.1 * lead.as_f64().abs(), "k={k}");
        // the exact network approaches the multichain sum, not C_FP
        let obs = NetworkObservables { a_block: a1.clone(), a_tail: vec![a2.clone()], b_head: vec![b1.clone()], b_block: b2.clone() };
        let ex: Rational = rmpu_otoc_network(&obs, &RmpuGeometry::staircase(2, 8, 2), k).unwrap();
        assert!((ex - lead).as_f64().abs() < 1e-3 * gap);
    }
    // k = 2 frozen values from the exact rational evaluation
    let lead: Rational = rmpu_otoc_nonlocal_leading(&[a1.clone(), a2.clone()], &[b1.clone(), b2.clone()], 2).unwrap();
    assert!((lead.as_f64() - 0.018628747795414).abs() < 1e-12);
}

#[test]
fn unsupported_geometries() {
    let mut g = RmpuGeometry::staircase(2, 1, 2);
    g.variant = Variant::TwoFloor;
    assert!(matches!(rmpu_otoc_exact::<Rational>(&ma(), &mb(), &g, 2), Err(rmpu_core::Error::Unsupported(_))));
    assert!(matches!(frame_potential_rmpu_exact::<Rational>(&g, 2), Err(rmpu_core::Error::Unsupported(_))));
    let bad = RmpuGeometry::staircase(1, 1, 2);
    assert!(bad.validate().is_err());
    let g = RmpuGeometry::staircase(2, 1, 3);
    assert_eq!((g.chi(), g.sites(), g.dim(), g.gate_dim()), (2, 4, Some(16), 4));
    assert!(matches!(rmpu_otoc_exact::<Rational>(&ma(), &mb(), &g, 4), Err(rmpu_core::Error::DimensionTooSmall { .. })));
}

#[test]
fn prediction_records() {
    let g = RmpuGeometry::staircase(2, 3, 2);
    let ex = rmpu_otoc_prediction(&ma(), &mb(), &g, 2, OrderTag::Exact).unwrap();
    let lo = rmpu_otoc_prediction(&ma(), &mb(), &g, 2, OrderTag::Leading).unwrap();
    let sub = rmpu_otoc_prediction(&ma(), &mb(), &g, 2, OrderTag::Subleading).unwrap();
    assert!(ex.error_scale.is_empty());
    assert!((sub.value - ex.value).abs() < (lo.value - ex.value).abs());
    assert_eq!(sub.order_tag.as_str(), "subleading");
}

// ---------------------------------------------------------------------------
// frame potentials

#[test]
fn frame_potential_values() {
    assert_eq!(frame_potential_haar(1), BigInt::from(1));
    assert_eq!(frame_potential_haar(3), BigInt::from(6));
    assert_eq!(frame_potential_haar(5), BigInt::from(120));
    for k in 1..=4 {
        let g = RmpuGeometry::staircase(2, 2, 1);
        let f: Rational = frame_potential_rmpu_exact(&g, k).unwrap();
        assert_eq!(f, rat_int(factorial_u64(k).unwrap() as i64));
        let a: Rational = frame_potential_rmpu_asymptotic(&g, k).unwrap();
        assert_eq!(a, f);
    }
    let a: Rational = frame_potential_rmpu_asymptotic(&RmpuGeometry::staircase(2, 2, 2), 2).unwrap();
    assert_eq!(a, rat(20703125, 10000000));
    let g = RmpuGeometry::staircase(2, 4, 2);
    let f: Rational = frame_potential_rmpu_exact(&g, 2).unwrap();
    let lead = 2.0 * (1.0 + 0.5625 / 256.0);
    assert!((f.as_f64() - lead).abs() < 0.01 * (lead - 2.0));
    // relative deviation vs Table I at large n, up to the d^{-2n} term
    let g = RmpuGeometry::staircase(2, 3, 6);
    let dev = frame_potential_relative_deviation(&g, 3).unwrap();
    let table = 3.0 * (6.0 * 0.75 - 1.0) / 64.0;
    assert!((dev - table).abs() <= 3.0 / 64.0 * 4f64.powi(-6) + 1e-15);
}

#[test]
fn frame_potential_residual_decays_fast() {
    for k in [2usize, 3] {
        let rs = [3u32, 4, 5, 6];
        let chis: Vec<f64> = rs.iter().map(|&r| 2f64.powi(r as i32)).collect();
        let res: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let g = RmpuGeometry::staircase(2, r, 3);
                let e: Rational = frame_potential_rmpu_exact(&g, k).unwrap();
                let a: Rational = frame_potential_rmpu_asymptotic(&g, k).unwrap();
                (e - a).as_f64()
            })
            .collect();
        let fit = power_law_fit(&chis, &res).unwrap();
        assert!(fit.exponent <= -3.0, "k={k}: {}", fit.exponent);
        // exact − k! has no χ⁻¹ term
        let devs: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let e: Rational = frame_potential_rmpu_exact(&RmpuGeometry::staircase(2, r, 3), k).unwrap();
                e.as_f64() - factorial_u64(k).unwrap() as f64
            })
            .collect();
        let c = inverse_power_fit(&chis, &devs, &[1, 2, 4]).unwrap();
        assert!(c[0].value.abs() <= 3.0 * c[0].stderr + 1e-9 * c[1].value.abs(), "k={k}: {:?}", c[0]);
    }
}

#[test]
fn frame_potential_otoc_identity() {
    let rep = verify_frame_otoc_identity(4, 2).unwrap();
    assert!(rep.pass && rep.rel_error < 1e-10, "{rep:?}");
    assert_eq!(rep.terms, 65536);
    let rep1 = verify_frame_otoc_identity(4, 1).unwrap();
    assert!(rep1.pass, "{rep1:?}");
    let bad = verify_frame_otoc_identity_with(4, 2, 2.0 * (1.0 + 1e-6)).unwrap();
    assert!(!bad.pass);
    assert_eq!(pauli_basis(4).unwrap().len(), 16);
    assert!(pauli_basis(3).is_err());
}

#[test]
fn long_cycle_convention_is_consistent() {
    // γ and γ⁻¹ give the same Haar OTOC by reversal symmetry
    let k = 3;
    let g = Permutation::long_cycle(k);
    let rev = Permutation::from_images((0..k).rev().collect()).unwrap();
    let conj = compose(&compose(&rev, &g).unwrap(), &rev).unwrap();
    assert_eq!(conj, g.inverse());
}
