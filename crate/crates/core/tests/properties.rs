//! Properties that cross module boundaries.

use lambda_forge::exact_arith::divisors;
use lambda_forge::lambda_poly::{chebyshev_psi, toric_periodic_locus, LaurentPoly};
use lambda_forge::model_checker::{analyze, free_set_as_id_set, minimal_cycle};
use lambda_forge::ray_class::{dr_monoid, ray_class_group, Cycle, FEquivalence, PrimeSupport, Rationals};
use lambda_forge::witt_periodic::{
    dwork_check, ghost_from_witt, ghost_shift, is_f_periodic, witt_add, witt_mul, CoeffRing, GhostVector,
    TruncationSet, WittCoords,
};
use lambda_forge::Bounds;
use num_bigint::BigInt;
use proptest::prelude::*;

fn witt_over_z(values: &[i64], trunc: &TruncationSet) -> WittCoords {
    let z = CoeffRing::integers();
    let coords = trunc.elems().iter().zip(values).map(|(&n, &v)| (n, z.from_int(v))).collect();
    WittCoords::new(z, trunc.clone(), coords).unwrap()
}

#[test]
fn free_dr_sets_have_their_own_cycle_as_minimal_cycle() {
    for n in 3..=20u64 {
        let f = Cycle::new(n, true);
        let dr = dr_monoid(&Rationals, &f, &PrimeSupport::all(), &Bounds::default()).unwrap();
        let s = free_set_as_id_set(&dr).unwrap();
        assert!(analyze(&s).unwrap().exists);
        let m = minimal_cycle(&s, &Bounds::default()).unwrap().unwrap();
        assert_eq!(m.cycle, f, "n = {n}");
        assert!(m.agrees);
    }
}

#[test]
fn units_of_dr_are_the_ray_class_group() {
    let all = PrimeSupport::all();
    for n in 1..=40u64 {
        for inf in [false, true] {
            let f = Cycle::new(n, inf);
            let dr = dr_monoid(&Rationals, &f, &all, &Bounds::default()).unwrap();
            let cl = ray_class_group(&Rationals, &f, &all, &Bounds::default()).unwrap();
            assert_eq!(dr.units().len(), cl.order(), "f = {f}");
            assert_eq!(dr.unit_embedding().len(), cl.order());
        }
    }
}

#[test]
fn toric_locus_is_read_off_from_dr() {
    // mu_m with m the gcd of differences of f-equivalent exponents; n itself for (n)inf
    for n in 1..=24u64 {
        let r = toric_periodic_locus(&Cycle::new(n, true), &PrimeSupport::all());
        assert_eq!(r.exponent, Some(n));
        let q = r.generator.unwrap();
        assert_eq!(q.coeffs()[0], BigInt::from(-1));
        assert_eq!(q.degree(), Some(n as usize));
    }
}

#[test]
fn teichmuller_ghosts_of_roots_of_unity_are_periodic() {
    // the ghost vector of [zeta_n] is (zeta_n^k)_k, periodic for n inf
    for n in 1..=8u64 {
        let ring = CoeffRing::cyclotomic(n);
        let t = TruncationSet::up_to(24);
        let x = ring.generator();
        let comps = t.elems().iter().map(|&k| (k, ring.pow(&x, k as u32))).collect();
        let g = GhostVector::new(ring.clone(), t, comps).unwrap();
        assert!(is_f_periodic(&g, &Cycle::new(n, true), &PrimeSupport::all()));
    }
}

#[test]
fn chebyshev_is_the_symmetrized_toric_structure() {
    for n in 0..=25u64 {
        let lhs = LaurentPoly::from_chebyshev(&chebyshev_psi(n));
        let rhs = LaurentPoly::monomial(1, n as i64).add(&LaurentPoly::monomial(1, -(n as i64)));
        assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn witt_ring_operations_stay_integral(a in prop::collection::vec(-4i64..=4, 6), b in prop::collection::vec(-4i64..=4, 6)) {
        let t = TruncationSet::divisors_of(12);
        let (wa, wb) = (witt_over_z(&a, &t), witt_over_z(&b, &t));
        let sum = witt_add(&wa, &wb);
        let prod = witt_mul(&wa, &wb);
        prop_assert!(sum.is_integral());
        prop_assert!(prod.is_integral());
        prop_assert_eq!(ghost_from_witt(&sum), ghost_from_witt(&wa).add(&ghost_from_witt(&wb)));
    }

    #[test]
    fn frobenius_shifts_preserve_dwork(a in prop::collection::vec(-5i64..=5, 8), p in prop::sample::select(vec![2u64, 3])) {
        let t = TruncationSet::divisors_of(24);
        let g = ghost_from_witt(&witt_over_z(&a, &t));
        prop_assert!(dwork_check(&g).unwrap());
        prop_assert!(dwork_check(&ghost_shift(&g, p)).unwrap());
    }

    #[test]
    fn equivalence_refines_along_divisibility(n in 1u64..=36, a in 1u64..=300, k in 0u64..10, inf in any::<bool>()) {
        // a and a + kn are equivalent for (n)inf, hence for every cycle dividing it
        let b = a + k * n;
        let big = Cycle::new(n, inf);
        prop_assert!(FEquivalence::new(&Rationals, &Cycle::new(n, true)).equivalent(&a, &b));
        if FEquivalence::new(&Rationals, &big).equivalent(&a, &b) {
            for d in divisors(n) {
                for small_inf in [false, inf] {
                    let small = Cycle::new(d, small_inf);
                    prop_assert!(FEquivalence::new(&Rationals, &small).equivalent(&a, &b), "{} | {}", small, big);
                }
            }
        }
    }
}
