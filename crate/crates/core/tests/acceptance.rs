//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails. Each criterion carries a pinned time budget in seconds; all checks
//! are exact, so there are no numeric tolerances besides the budgets.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use lambda_forge::exact_arith::{divisors, euler_phi, is_prime};
use lambda_forge::lambda_poly::{
    chebyshev_equalizer_check, chebyshev_image_lattice, chebyshev_periodic_generator, chebyshev_psi, chebyshev_sequence,
    chebyshev_identity_holds, cotangent_invariants, cyclotomic_cotangent_dim, frobenius_lift_check,
    gm_periodic_exponent, Family, IntPoly,
};
use lambda_forge::model_checker::{decide_model, minimal_cycle, random_id_set, FiniteIdSet};
use lambda_forge::quad_field::{reduced_form_count, QuadField};
use lambda_forge::ray_class::{
    dr_iso_residue, dr_monoid, dr_pushout_check, dr_unit_orbit_check, f_equiv_generator, ray_class_group,
    Arithmetic, Cycle, FEquivalence, ImagQuadratic, PrimeSupport, Rationals,
};
use lambda_forge::witt_periodic::{
    dwork_check, ghost_from_witt, periodic_witt_field_product_check, ray_class_algebra_witt_iso_check,
    witt_from_ghost, CoeffRing, GhostVector, TruncationSet, Verdict, WittCoords,
};
use lambda_forge::Bounds;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn bounds() -> Bounds {
    Bounds::default()
}

/// 1. `DR((n) inf) = (Z/n)°` over Q for n <= 500.
fn residue_iso() -> Check {
    let all = PrimeSupport::all();
    let mut pairs = 0usize;
    for n in 1..=500u64 {
        let dr = dr_monoid(&Rationals, &Cycle::new(n, true), &all, &bounds()).map_err(err)?;
        let sample = if n <= 100 { None } else { Some((10_000, n)) };
        let rep = dr_iso_residue(&dr, sample).map_err(err)?;
        ensure(rep.holds(), || format!("n = {n}: {rep:?}"))?;
        ensure(dr.size() as u64 == n, || format!("n = {n}: |DR| = {}", dr.size()))?;
        pairs += rep.pairs_checked;
        if n <= 100 {
            // oracle: a ~ b exactly when a = b mod n
            for a in 1..=2 * n {
                let ia = dr.locate(&a).map_err(err)?;
                for b in 1..=2 * n {
                    let same = ia == dr.locate(&b).map_err(err)?;
                    ensure(same == (a % n == b % n), || format!("n = {n}: a = {a}, b = {b}"))?;
                }
            }
        }
    }
    Ok(format!("n <= 500, {pairs} products checked"))
}

/// `|Cl((m) inf)| = phi(m)` and `|Cl((m))| = phi(m)/2` for m > 2.
fn cl_order_q(m: u64, infinite: bool) -> u64 {
    let phi = euler_phi(m);
    if infinite || m <= 2 {
        phi
    } else {
        phi / 2
    }
}

/// 2. Decomposition of `|DR_P(f)|` against the closed formula.
fn decomposition() -> Check {
    let mut cases = 0;
    for n in 1..=200u64 {
        for infinite in [true, false] {
            for (label, support, odd_only) in [
                ("all", PrimeSupport::all(), false),
                ("all-except:2", PrimeSupport::all_except(vec![2u64]), true),
            ] {
                let dr = dr_monoid(&Rationals, &Cycle::new(n, infinite), &support, &bounds()).map_err(err)?;
                let oracle: u64 = divisors(n)
                    .into_iter()
                    .filter(|d| !odd_only || d % 2 == 1)
                    .map(|d| cl_order_q(n / d, infinite))
                    .sum();
                ensure(dr.size() == dr.decomposition_sum() && dr.size() as u64 == oracle, || {
                    format!(
                        "n = {n}, inf = {infinite}, P = {label}: |DR| = {}, sum = {}, formula = {oracle}",
                        dr.size(),
                        dr.decomposition_sum()
                    )
                })?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} monoids"))
}

fn ideals_up_to<F: Arithmetic>(field: &F, bound: u64) -> Vec<F::Ideal> {
    (1..=bound).flat_map(|n| field.ideals_of_norm(n)).collect()
}

/// Compares the class invariant with the generator criterion on all unordered pairs.
fn equiv_agreement<F: Arithmetic>(field: &F, ideal_bound: u64, cycle_bound: u64) -> Result<usize, String> {
    let ideals = ideals_up_to(field, ideal_bound);
    let all = PrimeSupport::all();
    let mut checked = 0;
    let places: &[bool] = if field.has_real_place() { &[false, true] } else { &[false] };
    for f in ideals_up_to(field, cycle_bound) {
        for &inf in places {
            let cycle = Cycle::new(f.clone(), inf);
            let mut eq = FEquivalence::new(field, &cycle);
            let keys: Vec<_> = ideals.iter().map(|a| eq.class(a)).collect();
            for i in 0..ideals.len() {
                for j in i..ideals.len() {
                    let by_class = keys[i] == keys[j];
                    let by_gen = f_equiv_generator(field, &ideals[i], &ideals[j], &cycle, &all).map_err(err)?;
                    ensure(by_class == by_gen, || {
                        format!("{}: f = {cycle}, a = {}, b = {}", field.describe(), ideals[i], ideals[j])
                    })?;
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}

/// 3. f-equivalence by classes agrees with the generator criterion.
fn equivalence() -> Check {
    let mut total = equiv_agreement(&Rationals, 200, 48)?;
    for d in [-1, -5] {
        total += equiv_agreement(&ImagQuadratic::new(d).map_err(err)?, 200, 48)?;
    }
    Ok(format!("{total} pairs over Q, Q(i), Q(sqrt -5)"))
}

/// 4. Pushout description of DR, and the residue orbit description for class number one.
fn pushout() -> Check {
    let all = PrimeSupport::<u64>::all();
    let mut count = 0;
    for n in 1..=60u64 {
        for inf in [false, true] {
            let dr = dr_monoid(&Rationals, &Cycle::new(n, inf), &all, &bounds()).map_err(err)?;
            let rep = dr_pushout_check(&dr, &bounds()).map_err(err)?;
            ensure(rep.holds(), || format!("Q, n = {n}, inf = {inf}: {rep:?}"))?;
            count += 1;
        }
    }
    for d in [-1, -3, -5] {
        let k = ImagQuadratic::new(d).map_err(err)?;
        for f in ideals_up_to(&k, 50) {
            let dr = dr_monoid(&k, &Cycle::new(f, false), &PrimeSupport::all(), &bounds()).map_err(err)?;
            let rep = dr_pushout_check(&dr, &bounds()).map_err(err)?;
            ensure(rep.holds(), || format!("d = {d}, f = {f}: {rep:?}"))?;
            if k.class_count() == 1 {
                let ok = dr_unit_orbit_check(&dr, &bounds()).map_err(err)?;
                ensure(ok, || format!("d = {d}, f = {f}: orbit description fails"))?;
            }
            count += 1;
        }
    }
    let gauss = ImagQuadratic::new(-1).map_err(err)?;
    let f = gauss.parse_ideal("[5, 2+w, 1]").map_err(err)?;
    let dr = dr_monoid(&gauss, &Cycle::new(f, false), &PrimeSupport::all(), &bounds()).map_err(err)?;
    ensure(dr.size() == 2, || format!("|DR((2+i))| = {}", dr.size()))?;
    Ok(format!("{count} monoids, |DR_Q(i)((2+i))| = 2"))
}

/// 5. Class numbers from reduced forms, and a trivial ray class group.
fn class_groups() -> Check {
    for (d, h) in [(-1i64, 1usize), (-5, 2), (-23, 3)] {
        let k = QuadField::new(d).map_err(err)?;
        let got = k.class_group().order();
        let oracle = reduced_form_count(k.disc());
        ensure(got == h && oracle == h, || format!("d = {d}: |Cl| = {got}, reduced forms = {oracle}"))?;
    }
    let gauss = ImagQuadratic::new(-1).map_err(err)?;
    let f = gauss.parse_ideal("[5, 2+w, 1]").map_err(err)?;
    let cl = ray_class_group(&gauss, &Cycle::new(f, false), &PrimeSupport::all(), &bounds()).map_err(err)?;
    ensure(cl.order() == 1, || format!("|Cl((2+i))| = {}", cl.order()))?;
    Ok("|Cl| = 1, 2, 3; Cl_Q(i)((2+i)) trivial".into())
}

/// 6. Model decision on random sets, and minimal cycles of the standard examples.
fn model_decision() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut decisions = 0;
    let mut with_model = 0;
    for i in 0..500 {
        let s = random_id_set(&mut rng, 24, 12);
        let mut cycles: Vec<Cycle<u64>> = Vec::new();
        for d in divisors(2 * s.m) {
            cycles.push(Cycle::new(d, false));
            cycles.push(Cycle::new(d, true));
        }
        for f in &cycles {
            let dec = decide_model(&s, f, &bounds()).map_err(err)?;
            ensure(dec.agree(), || format!("set {i} (m = {}), f = {f}: {dec:?}", s.m))?;
            decisions += 1;
        }
        if minimal_cycle(&s, &bounds()).map_err(err)?.is_some() {
            with_model += 1;
        }
    }
    for n in 1..=30u64 {
        let m = minimal_cycle(&FiniteIdSet::mu(n), &bounds())
            .map_err(err)?
            .ok_or_else(|| format!("mu_{n} has no model"))?;
        // the real place is invisible when -1 = 1 mod n
        let want = Cycle::new(n, n >= 3);
        ensure(m.cycle == want && m.agrees, || format!("mu_{n}: {m:?}"))?;
    }
    for n in (1..=15u64).step_by(2) {
        let s = FiniteIdSet::mu_quotient(n, &[n - 1]);
        let m = minimal_cycle(&s, &bounds())
            .map_err(err)?
            .ok_or_else(|| format!("mu_{n}/+-1 has no model"))?;
        ensure(m.cycle == Cycle::new(n, false) && m.agrees, || format!("mu_{n}/+-1: {m:?}"))?;
    }
    Ok(format!(
        "{decisions} decisions on 500 sets ({with_model} with a model); mu_n and mu_n/+-1 minimal cycles"
    ))
}

/// 7. Chebyshev polynomials: Frobenius lifts, composition, printed forms.
fn chebyshev() -> Check {
    let mut primes = 0;
    for p in (2..=100u64).filter(|&p| is_prime(p)) {
        ensure(frobenius_lift_check(Family::Chebyshev, p).map_err(err)?, || format!("p = {p}"))?;
        primes += 1;
    }
    let psi = chebyshev_sequence(900);
    for n in 1..=100 {
        ensure(chebyshev_identity_holds(n), || format!("psi_{n}(x + 1/x) != x^n + x^-n"))?;
    }
    for a in 1..=30usize {
        for b in a..=30usize {
            let comp = psi[a].compose(&psi[b]);
            ensure(comp == psi[a * b], || format!("psi_{a} o psi_{b}"))?;
        }
    }
    for (n, printed) in [(2, "y^2 - 2"), (3, "y^3 - 3y"), (5, "y^5 - 5y^3 + 5y")] {
        let want: IntPoly = printed.parse().map_err(err)?;
        ensure(chebyshev_psi(n) == want, || format!("psi_{n} = {}", chebyshev_psi(n)))?;
    }
    Ok(format!("{primes} primes, 465 compositions, psi_2, psi_3, psi_5 as printed"))
}

/// 8. The Chebyshev periodic locus for n <= 40.
fn chebyshev_locus() -> Check {
    for n in 1..=40u64 {
        let q = chebyshev_periodic_generator(n).map_err(err)?;
        ensure(q.is_squarefree(), || format!("Q({n}) is not squarefree"))?;
        let rep = chebyshev_equalizer_check(n, (3 * n).max(2 * n + 2)).map_err(err)?;
        ensure(rep.holds(), || format!("n = {n}: {rep:?}"))?;
        let lat = chebyshev_image_lattice(n).map_err(err)?;
        let want = if n % 2 == 0 { 2 } else { 1 };
        ensure(lat.matches_stated_basis && lat.cokernel_order == want, || {
            format!("n = {n}: basis match {}, cokernel {}", lat.matches_stated_basis, lat.cokernel_order)
        })?;
    }
    Ok("n <= 40".into())
}

/// 9. Periodic exponents of the toric line.
fn toric() -> Check {
    let all = PrimeSupport::all();
    for n in 1..=100u64 {
        let e = gm_periodic_exponent(&Cycle::new(n, true), &all);
        ensure(e.m == n && e.stable, || format!("(n)inf, n = {n}: {e:?}"))?;
        let e = gm_periodic_exponent(&Cycle::new(n, false), &all);
        ensure(e.m == n.gcd(&2) && e.stable, || format!("(n), n = {n}: {e:?}"))?;
    }
    Ok("n <= 100".into())
}

fn random_witt(rng: &mut ChaCha8Rng, ring: &CoeffRing, trunc: &TruncationSet, spread: i64) -> WittCoords {
    let coords = trunc
        .elems()
        .iter()
        .map(|&n| {
            let c: Vec<BigInt> = (0..ring.rank()).map(|_| BigInt::from(rng.gen_range(-spread..=spread))).collect();
            (n, ring.from_coords(&c))
        })
        .collect();
    WittCoords::new(ring.clone(), trunc.clone(), coords).expect("integral coordinates")
}

/// Ghost vectors of integral Witt vectors, half of them disturbed at one component by a
/// small integer, so both outcomes of the integrality test are common.
fn dwork_agreement(rng: &mut ChaCha8Rng, ring: &CoeffRing, trunc: &TruncationSet, count: usize) -> Result<(usize, usize), String> {
    let mut integral = 0;
    for i in 0..count {
        let w = random_witt(rng, ring, trunc, 3);
        let mut g = ghost_from_witt(&w);
        if rng.gen_bool(0.5) {
            let n = trunc.elems()[rng.gen_range(0..trunc.elems().len())];
            // a multiple of n keeps the congruence at n itself, so either outcome is possible
            let k = rng.gen_range(1..=30i64) * n as i64;
            let bump = ring.from_int(k);
            let comp = g.comps.get_mut(&n).unwrap();
            *comp = ring.add(comp, &bump);
        }
        let g = GhostVector::new(ring.clone(), trunc.clone(), g.comps).map_err(err)?;
        let by_dwork = dwork_check(&g).map_err(err)?;
        let by_solve = witt_from_ghost(&g).all_integral();
        ensure(by_dwork == by_solve, || format!("{} case {i}: dwork {by_dwork}, solve {by_solve}", ring.describe()))?;
        integral += by_solve as usize;
    }
    Ok((count, integral))
}

/// 10. Ghost/Witt round trips and the Dwork criterion.
fn witt_transforms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(120);
    let t = TruncationSet::divisors_of(120);
    let z = CoeffRing::integers();
    for i in 0..1000 {
        let w = random_witt(&mut rng, &z, &t, 9);
        let back = witt_from_ghost(&ghost_from_witt(&w));
        ensure(back.all_integral() && back.coords == w, || format!("round trip {i}"))?;
    }
    let (_, int_z) = dwork_agreement(&mut rng, &z, &t, 1000)?;
    let h = IntPoly::parse("x^4 - 1", "x").map_err(err)?;
    let ring = CoeffRing::quotient(h, lambda_forge::witt_periodic::FrobeniusLifts::Power, 13).map_err(err)?;
    let (_, int_r) = dwork_agreement(&mut rng, &ring, &t, 1000)?;
    // a non-integral rational Witt vector must not round trip to an integral one
    let half = z.scale(&z.one(), &BigRational::new(1.into(), 2.into()));
    ensure(!z.is_integral(&half), || "1/2 reported integral".into())?;
    Ok(format!(
        "1000 round trips; Dwork agrees with integrality on 1000 + 1000 vectors ({int_z} and {int_r} integral)"
    ))
}

/// 11. Periodic Witt lattices against the ray class algebra.
fn periodic_witt() -> Check {
    let mut notes = Vec::new();
    for n in 1..=8u64 {
        let rep = ray_class_algebra_witt_iso_check(n, 64).map_err(err)?;
        ensure(rep.verdict() == Verdict::True && rep.stable, || format!("n = {n}: {rep:?}"))?;
        notes.push(rep.linear_index.map_or("inf".to_string(), |k| k.to_string()));
    }
    for n in 1..=12u64 {
        let rep = periodic_witt_field_product_check(n, 64).map_err(err)?;
        let d = divisors(n).len();
        ensure(
            rep.dimension == n as usize && rep.idempotents() == d && rep.matches_divisor_product(),
            || format!("n = {n}: {rep:?}"),
        )?;
    }
    Ok(format!(
        "iso for n <= 8 at B = 64, stable (linear-only indices {}); field products for n <= 12",
        notes.join(",")
    ))
}

/// 12. Cotangent spaces of the cyclotomic lambda-rings.
fn cotangent() -> Check {
    for a in 1..=30u64 {
        let inv = cotangent_invariants(a).map_err(err)?;
        let want: Vec<BigInt> = if a == 1 { vec![] } else { vec![BigInt::from(a)] };
        ensure(inv == want, || format!("a = {a}: invariants {inv:?}"))?;
        for q in (2..=13u64).filter(|&q| is_prime(q)) {
            let dim = cyclotomic_cotangent_dim(a, q).map_err(err)?;
            ensure(dim == (a % q == 0) as u32, || format!("a = {a}, q = {q}: dim {dim}"))?;
        }
    }
    Ok("a <= 30, q <= 13; I/I^2 = Z/a".into())
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget_secs: f64,
    run: fn() -> Check,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "DR over Q is (Z/n)°", budget_secs: 30.0, run: residue_iso },
    Criterion { id: 2, name: "decomposition of |DR_P(f)|", budget_secs: 30.0, run: decomposition },
    Criterion { id: 3, name: "f-equivalence = generator criterion", budget_secs: 60.0, run: equivalence },
    Criterion { id: 4, name: "pushout description of DR", budget_secs: 60.0, run: pushout },
    Criterion { id: 5, name: "class groups", budget_secs: 5.0, run: class_groups },
    Criterion { id: 6, name: "integral model decision", budget_secs: 120.0, run: model_decision },
    Criterion { id: 7, name: "Chebyshev suite", budget_secs: 10.0, run: chebyshev },
    Criterion { id: 8, name: "Chebyshev periodic locus", budget_secs: 60.0, run: chebyshev_locus },
    Criterion { id: 9, name: "toric periodic exponents", budget_secs: 10.0, run: toric },
    Criterion { id: 10, name: "Witt transforms", budget_secs: 60.0, run: witt_transforms },
    Criterion { id: 11, name: "periodic Witt vectors", budget_secs: 120.0, run: periodic_witt },
    Criterion { id: 12, name: "cyclotomic cotangent", budget_secs: 10.0, run: cotangent },
];

fn main() {
    let mut failed = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match outcome {
            Ok(_) if secs > c.budget_secs => ("FAIL", format!("over budget of {} s", c.budget_secs)),
            Ok(d) => ("PASS", d),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status} [{:.2} s / {} s] {}: {detail}", c.id, secs, c.budget_secs, c.name);
    }
    println!("acceptance: {} passed, {failed} failed", CRITERIA.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
