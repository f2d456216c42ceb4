//! Cycles, f-equivalence, ray class groups and Deligne-Ribet monoids `DR_P(f)`.
//!
//! Everything is generic over [`Arithmetic`], implemented for the rationals (ideals are
//! positive integers) and for imaginary quadratic fields. Ray classes are identified by a
//! [`RayKey`]: an ideal `a` coprime to `m` in ordinary class `k` satisfies
//! `a * adj(R_k) = (beta)` for a fixed representative `R_k`, and the key is `k` together with
//! the smallest residue code of `u * beta mod m` over the units `u` allowed by the real part
//! of `m`. Two ideals have the same key exactly when they lie in the same ray class.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use num_integer::Integer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exact_arith::{euler_phi, factor};
use crate::quad_field::{ClassGroup, QuadField, QuadIdeal, QuadInt};
use crate::{Bounds, Error, Result};

/// The ideal and element arithmetic a base field must provide.
pub trait Arithmetic: Clone + fmt::Debug + Send + Sync {
    type Ideal: Clone + Eq + Hash + Ord + fmt::Debug + fmt::Display + Send + Sync;
    type Elem: Clone + Eq + Hash + fmt::Debug + Send + Sync;

    fn describe(&self) -> String;
    fn has_real_place(&self) -> bool;
    fn unit_ideal(&self) -> Self::Ideal;
    fn norm(&self, a: &Self::Ideal) -> u64;
    fn mul(&self, a: &Self::Ideal, b: &Self::Ideal) -> Self::Ideal;
    fn gcd(&self, a: &Self::Ideal, b: &Self::Ideal) -> Self::Ideal;
    /// Whether `a` divides `b`.
    fn divides(&self, a: &Self::Ideal, b: &Self::Ideal) -> bool;
    /// `b / a`, assuming `a | b`.
    fn quotient(&self, b: &Self::Ideal, a: &Self::Ideal) -> Self::Ideal;
    /// `N(a) * a^-1`, so that `a * adjoint(a) = (N(a))`.
    fn adjoint(&self, a: &Self::Ideal) -> Self::Ideal;
    fn factor(&self, a: &Self::Ideal) -> Vec<(Self::Ideal, u32)>;
    fn primes_above(&self, p: u64) -> Vec<Self::Ideal>;
    fn ideals_of_norm(&self, n: u64) -> Vec<Self::Ideal>;
    fn class_count(&self) -> usize;
    fn class_index(&self, a: &Self::Ideal) -> usize;
    /// A generator if the ideal is principal; over Q the positive one.
    fn generator(&self, a: &Self::Ideal) -> Option<Self::Elem>;
    fn principal(&self, x: &Self::Elem) -> Self::Ideal;
    /// Units of O_K, only the totally positive ones if `positive`.
    fn units(&self, positive: bool) -> Vec<Self::Elem>;
    fn elem_mul(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn elem_add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn elem_sub(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem;
    fn elem_int(&self, k: i64) -> Self::Elem;
    fn is_zero_elem(&self, x: &Self::Elem) -> bool;
    /// Positive at every real place.
    fn is_positive(&self, x: &Self::Elem) -> bool;
    fn contains(&self, a: &Self::Ideal, x: &Self::Elem) -> bool;
    /// Canonical code in `[0, N(m))` of `x mod m`.
    fn residue_code(&self, m: &Self::Ideal, x: &Self::Elem) -> u64;
    fn residue_elem(&self, m: &Self::Ideal, code: u64) -> Self::Elem;
    fn parse_ideal(&self, s: &str) -> Result<Self::Ideal>;
}

/// The rational numbers; the ideal `(n)` is stored as `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Rationals;

impl Arithmetic for Rationals {
    type Ideal = u64;
    type Elem = i64;

    fn describe(&self) -> String {
        "Q".to_string()
    }

    fn has_real_place(&self) -> bool {
        true
    }

    fn unit_ideal(&self) -> u64 {
        1
    }

    fn norm(&self, a: &u64) -> u64 {
        *a
    }

    fn mul(&self, a: &u64, b: &u64) -> u64 {
        a * b
    }

    fn gcd(&self, a: &u64, b: &u64) -> u64 {
        a.gcd(b)
    }

    fn divides(&self, a: &u64, b: &u64) -> bool {
        b % a == 0
    }

    fn quotient(&self, b: &u64, a: &u64) -> u64 {
        b / a
    }

    fn adjoint(&self, _a: &u64) -> u64 {
        1
    }

    fn factor(&self, a: &u64) -> Vec<(u64, u32)> {
        factor(*a).expect("ideal is nonzero").factors
    }

    fn primes_above(&self, p: u64) -> Vec<u64> {
        vec![p]
    }

    fn ideals_of_norm(&self, n: u64) -> Vec<u64> {
        vec![n]
    }

    fn class_count(&self) -> usize {
        1
    }

    fn class_index(&self, _a: &u64) -> usize {
        0
    }

    fn generator(&self, a: &u64) -> Option<i64> {
        Some(*a as i64)
    }

    fn principal(&self, x: &i64) -> u64 {
        x.unsigned_abs()
    }

    fn units(&self, positive: bool) -> Vec<i64> {
        if positive {
            vec![1]
        } else {
            vec![-1, 1]
        }
    }

    fn elem_mul(&self, x: &i64, y: &i64) -> i64 {
        x * y
    }

    fn elem_add(&self, x: &i64, y: &i64) -> i64 {
        x + y
    }

    fn elem_sub(&self, x: &i64, y: &i64) -> i64 {
        x - y
    }

    fn elem_int(&self, k: i64) -> i64 {
        k
    }

    fn is_zero_elem(&self, x: &i64) -> bool {
        *x == 0
    }

    fn is_positive(&self, x: &i64) -> bool {
        *x > 0
    }

    fn contains(&self, a: &u64, x: &i64) -> bool {
        x.rem_euclid(*a as i64) == 0
    }

    fn residue_code(&self, m: &u64, x: &i64) -> u64 {
        x.rem_euclid(*m as i64) as u64
    }

    fn residue_elem(&self, _m: &u64, code: u64) -> i64 {
        code as i64
    }

    fn parse_ideal(&self, s: &str) -> Result<u64> {
        match s.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::invalid(format!(
                "expected a positive integer for an ideal of Z, got {s:?}"
            ))),
        }
    }
}

/// An imaginary quadratic field together with its precomputed class group.
#[derive(Debug, Clone)]
pub struct ImagQuadratic {
    field: QuadField,
    classes: Arc<ClassGroup>,
}

impl ImagQuadratic {
    pub fn new(d: i64) -> Result<Self> {
        let field = QuadField::new(d)?;
        Ok(ImagQuadratic {
            classes: Arc::new(field.class_group()),
            field,
        })
    }

    pub fn field(&self) -> &QuadField {
        &self.field
    }

    pub fn class_group(&self) -> &ClassGroup {
        &self.classes
    }
}

impl Arithmetic for ImagQuadratic {
    type Ideal = QuadIdeal;
    type Elem = QuadInt;

    fn describe(&self) -> String {
        format!("Q(sqrt({}))", self.field.d())
    }

    fn has_real_place(&self) -> bool {
        false
    }

    fn unit_ideal(&self) -> QuadIdeal {
        QuadIdeal::ONE
    }

    fn norm(&self, a: &QuadIdeal) -> u64 {
        a.norm()
    }

    fn mul(&self, a: &QuadIdeal, b: &QuadIdeal) -> QuadIdeal {
        self.field.ideal_mul(a, b)
    }

    fn gcd(&self, a: &QuadIdeal, b: &QuadIdeal) -> QuadIdeal {
        self.field.ideal_gcd(a, b)
    }

    fn divides(&self, a: &QuadIdeal, b: &QuadIdeal) -> bool {
        self.field.ideal_divides(a, b)
    }

    fn quotient(&self, b: &QuadIdeal, a: &QuadIdeal) -> QuadIdeal {
        self.field.ideal_quotient(b, a).expect("divisor")
    }

    fn adjoint(&self, a: &QuadIdeal) -> QuadIdeal {
        self.field.ideal_conj(a)
    }

    fn factor(&self, a: &QuadIdeal) -> Vec<(QuadIdeal, u32)> {
        self.field.ideal_factorization(a)
    }

    fn primes_above(&self, p: u64) -> Vec<QuadIdeal> {
        self.field.primes_above(p).into_iter().map(|pa| pa.ideal).collect()
    }

    fn ideals_of_norm(&self, n: u64) -> Vec<QuadIdeal> {
        self.field.ideals_of_norm(n)
    }

    fn class_count(&self) -> usize {
        self.classes.order()
    }

    fn class_index(&self, a: &QuadIdeal) -> usize {
        self.classes.class_of(a)
    }

    fn generator(&self, a: &QuadIdeal) -> Option<QuadInt> {
        self.field.is_principal(a)
    }

    fn principal(&self, x: &QuadInt) -> QuadIdeal {
        self.field.principal_ideal(x)
    }

    fn units(&self, _positive: bool) -> Vec<QuadInt> {
        self.field.unit_group()
    }

    fn elem_mul(&self, x: &QuadInt, y: &QuadInt) -> QuadInt {
        self.field.mul(x, y)
    }

    fn elem_add(&self, x: &QuadInt, y: &QuadInt) -> QuadInt {
        x.add(y)
    }

    fn elem_sub(&self, x: &QuadInt, y: &QuadInt) -> QuadInt {
        x.sub(y)
    }

    fn elem_int(&self, k: i64) -> QuadInt {
        QuadInt::int(k)
    }

    fn is_zero_elem(&self, x: &QuadInt) -> bool {
        x.is_zero()
    }

    fn is_positive(&self, _x: &QuadInt) -> bool {
        true
    }

    fn contains(&self, a: &QuadIdeal, x: &QuadInt) -> bool {
        self.field.ideal_contains(a, x)
    }

    fn residue_code(&self, m: &QuadIdeal, x: &QuadInt) -> u64 {
        self.field.residue_code(m, x)
    }

    fn residue_elem(&self, m: &QuadIdeal, code: u64) -> QuadInt {
        self.field.residue_elem(m, code)
    }

    fn parse_ideal(&self, s: &str) -> Result<QuadIdeal> {
        self.field.parse_ideal(s)
    }
}

// ---- generic ideal helpers ----

pub fn is_coprime<F: Arithmetic>(field: &F, a: &F::Ideal, b: &F::Ideal) -> bool {
    field.gcd(a, b) == field.unit_ideal()
}

pub fn ideal_pow<F: Arithmetic>(field: &F, a: &F::Ideal, e: u32) -> F::Ideal {
    (0..e).fold(field.unit_ideal(), |acc, _| field.mul(&acc, a))
}

/// `|(O/m)^*|`.
pub fn residue_unit_count<F: Arithmetic>(field: &F, m: &F::Ideal) -> u64 {
    field
        .factor(m)
        .iter()
        .map(|(p, e)| {
            let q = field.norm(p);
            q.pow(e - 1) * (q - 1)
        })
        .product()
}

/// Whether the residue of `x` is a unit modulo `m`.
pub fn is_unit_mod<F: Arithmetic>(field: &F, m: &F::Ideal, x: &F::Elem) -> bool {
    if field.is_zero_elem(x) {
        return *m == field.unit_ideal();
    }
    is_coprime(field, &field.principal(x), m)
}

/// Divisors of `a` whose prime factors pass `keep`, in canonical order.
pub fn divisors_of<F: Arithmetic>(
    field: &F,
    a: &F::Ideal,
    keep: impl Fn(&F::Ideal) -> bool,
) -> Vec<F::Ideal> {
    let mut out = vec![field.unit_ideal()];
    for (p, e) in field.factor(a) {
        if !keep(&p) {
            continue;
        }
        let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
        for d in &out {
            let mut x = d.clone();
            next.push(x.clone());
            for _ in 0..e {
                x = field.mul(&x, &p);
                next.push(x.clone());
            }
        }
        out = next;
    }
    out.sort();
    out
}

// ---- cycles and supports ----

/// A modulus: a finite ideal and, over Q, possibly the real place.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cycle<I> {
    pub finite: I,
    pub infinite: bool,
}

impl<I> Cycle<I> {
    pub fn new(finite: I, infinite: bool) -> Self {
        Cycle { finite, infinite }
    }
}

impl<I: fmt::Display> serde::Serialize for Cycle<I> {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<I: fmt::Display> fmt::Display for Cycle<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.infinite {
            write!(f, "{}*inf", self.finite)
        } else {
            write!(f, "{}", self.finite)
        }
    }
}

/// Builds a cycle, rejecting real places the field does not have.
pub fn make_cycle<F: Arithmetic>(field: &F, finite: F::Ideal, infinite: bool) -> Result<Cycle<F::Ideal>> {
    if infinite && !field.has_real_place() {
        return Err(Error::invalid(format!(
            "{} has no real place, so a cycle cannot contain inf",
            field.describe()
        )));
    }
    Ok(Cycle { finite, infinite })
}

/// Parses `"12"`, `"12*inf"`, `"inf"` or an ideal string such as `"[5, 2+w, 1]"`.
pub fn parse_cycle<F: Arithmetic>(field: &F, s: &str) -> Result<Cycle<F::Ideal>> {
    let s = s.trim();
    if s == "inf" {
        return make_cycle(field, field.unit_ideal(), true);
    }
    match s.strip_suffix("*inf") {
        Some(body) => make_cycle(field, field.parse_ideal(body)?, true),
        None => make_cycle(field, field.parse_ideal(s)?, false),
    }
}

/// Whether `small` divides `big` as cycles.
pub fn cycle_divides<F: Arithmetic>(field: &F, small: &Cycle<F::Ideal>, big: &Cycle<F::Ideal>) -> bool {
    field.divides(&small.finite, &big.finite) && (!small.infinite || big.infinite)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportMode<I> {
    All,
    AllExcept(Vec<I>),
    Explicit(Vec<I>),
}

/// The set P of maximal ideals an ideal may be supported at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeSupport<I> {
    pub mode: SupportMode<I>,
    /// Caller's assertion that an explicit finite set represents every ray class.
    pub dense_override: bool,
}

impl<I: Clone + PartialEq> PrimeSupport<I> {
    pub fn all() -> Self {
        PrimeSupport {
            mode: SupportMode::All,
            dense_override: false,
        }
    }

    pub fn all_except(primes: Vec<I>) -> Self {
        PrimeSupport {
            mode: SupportMode::AllExcept(primes),
            dense_override: false,
        }
    }

    pub fn explicit(primes: Vec<I>) -> Self {
        PrimeSupport {
            mode: SupportMode::Explicit(primes),
            dense_override: false,
        }
    }

    pub fn with_density_override(mut self) -> Self {
        self.dense_override = true;
        self
    }

    /// Cofinite supports are dense; explicit ones only by override.
    pub fn is_dense(&self) -> bool {
        match self.mode {
            SupportMode::All | SupportMode::AllExcept(_) => true,
            SupportMode::Explicit(_) => self.dense_override,
        }
    }

    pub fn allows(&self, p: &I) -> bool {
        match &self.mode {
            SupportMode::All => true,
            SupportMode::AllExcept(ex) => !ex.contains(p),
            SupportMode::Explicit(list) => list.contains(p),
        }
    }

    fn require_dense(&self, what: &str) -> Result<()> {
        if self.is_dense() {
            Ok(())
        } else {
            Err(Error::refused(format!(
                "{what} needs a Chebotarev dense support; pass an all/all-except support or \
                 override density explicitly"
            )))
        }
    }
}

impl<I: fmt::Display> fmt::Display for PrimeSupport<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[I]| v.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        match &self.mode {
            SupportMode::All => write!(f, "all"),
            SupportMode::AllExcept(v) => write!(f, "all-except:{}", list(v)),
            SupportMode::Explicit(v) if self.dense_override => write!(f, "explicit-dense:{}", list(v)),
            SupportMode::Explicit(v) => write!(f, "explicit:{}", list(v)),
        }
    }
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' | ';' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.into_iter().filter(|t| !t.is_empty()).collect()
}

/// Parses `all`, `all-except:<primes>`, `explicit:<primes>` or `explicit-dense:<primes>`.
pub fn parse_support<F: Arithmetic>(field: &F, s: &str) -> Result<PrimeSupport<F::Ideal>> {
    let s = s.trim();
    if s == "all" {
        return Ok(PrimeSupport::all());
    }
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("cannot parse support {s:?}")))?;
    let mut primes = Vec::new();
    for item in split_top_level(rest) {
        let p = field.parse_ideal(item)?;
        let fac = field.factor(&p);
        if fac.len() != 1 || fac[0].1 != 1 {
            return Err(Error::invalid(format!("{item} is not a prime ideal")));
        }
        primes.push(p);
    }
    match kind {
        "all-except" => Ok(PrimeSupport::all_except(primes)),
        "explicit" => Ok(PrimeSupport::explicit(primes)),
        "explicit-dense" => Ok(PrimeSupport::explicit(primes).with_density_override()),
        _ => Err(Error::invalid(format!("unknown support kind {kind:?}"))),
    }
}

/// Whether every prime factor of `a` lies in P.
pub fn is_supported<F: Arithmetic>(field: &F, support: &PrimeSupport<F::Ideal>, a: &F::Ideal) -> bool {
    matches!(support.mode, SupportMode::All) || field.factor(a).iter().all(|(p, _)| support.allows(p))
}

/// Splits `a` into its P-part and its prime-to-P part.
pub fn split_at_support<F: Arithmetic>(
    field: &F,
    support: &PrimeSupport<F::Ideal>,
    a: &F::Ideal,
) -> (F::Ideal, F::Ideal) {
    let mut inside = field.unit_ideal();
    let mut outside = field.unit_ideal();
    for (p, e) in field.factor(a) {
        let pe = ideal_pow(field, &p, e);
        if support.allows(&p) {
            inside = field.mul(&inside, &pe);
        } else {
            outside = field.mul(&outside, &pe);
        }
    }
    (inside, outside)
}

// ---- ray classes ----

/// Identifies a ray class: ordinary class index and the canonical residue code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RayKey {
    pub class: usize,
    pub code: u64,
}

/// Precomputed data for reading off ray classes modulo one cycle.
#[derive(Debug, Clone)]
pub struct RayContext<F: Arithmetic> {
    field: F,
    cycle: Cycle<F::Ideal>,
    adj_reps: Vec<F::Ideal>,
    units: Vec<F::Elem>,
}

impl<F: Arithmetic> RayContext<F> {
    pub fn new(field: &F, cycle: &Cycle<F::Ideal>) -> Self {
        let h = field.class_count();
        let nm = field.norm(&cycle.finite);
        let mut reps: Vec<Option<F::Ideal>> = vec![None; h];
        let mut found = 0;
        let mut n = 1u64;
        while found < h {
            if n.gcd(&nm) == 1 {
                for a in field.ideals_of_norm(n) {
                    let k = field.class_index(&a);
                    if reps[k].is_none() {
                        reps[k] = Some(a);
                        found += 1;
                    }
                }
            }
            n += 1;
        }
        RayContext {
            field: field.clone(),
            cycle: cycle.clone(),
            adj_reps: reps.into_iter().map(|r| field.adjoint(&r.unwrap())).collect(),
            units: field.units(cycle.infinite),
        }
    }

    pub fn cycle(&self) -> &Cycle<F::Ideal> {
        &self.cycle
    }

    /// Key of an ideal coprime to the cycle.
    pub fn key(&self, a: &F::Ideal) -> RayKey {
        let field = &self.field;
        let m = &self.cycle.finite;
        debug_assert!(is_coprime(field, a, m), "{a} is not coprime to {m}");
        let class = field.class_index(a);
        if *m == field.unit_ideal() {
            return RayKey { class, code: 0 };
        }
        let beta = field
            .generator(&field.mul(a, &self.adj_reps[class]))
            .expect("product with the adjoint representative is principal");
        let code = self
            .units
            .iter()
            .map(|u| field.residue_code(m, &field.elem_mul(u, &beta)))
            .min()
            .expect("at least one unit");
        RayKey { class, code }
    }

    /// Size of the image of the admissible units in `(O/m)^*`.
    pub fn unit_image(&self) -> usize {
        let codes: HashSet<u64> = self
            .units
            .iter()
            .map(|u| self.field.residue_code(&self.cycle.finite, u))
            .collect();
        codes.len()
    }

    /// `|Cl(m)| = h * |(O/m)^*| / |image of units|`.
    pub fn order(&self) -> u64 {
        self.field.class_count() as u64 * residue_unit_count(&self.field, &self.cycle.finite)
            / self.unit_image() as u64
    }
}

/// `Cl_P(f)`: the classes of `Cl(f)` represented by ideals supported at P.
#[derive(Debug, Clone)]
pub struct RayClassGroup<F: Arithmetic> {
    pub cycle: Cycle<F::Ideal>,
    pub support: PrimeSupport<F::Ideal>,
    /// Smallest representative of each class, in canonical ideal order; index 0 is `(1)`.
    pub reps: Vec<F::Ideal>,
    keys: HashMap<RayKey, usize>,
    full_order: u64,
    ctx: RayContext<F>,
    field: F,
}

/// Builds `Cl_P(f)` by enumerating ideals, never by formula.
pub fn ray_class_group<F: Arithmetic>(
    field: &F,
    cycle: &Cycle<F::Ideal>,
    support: &PrimeSupport<F::Ideal>,
    bounds: &Bounds,
) -> Result<RayClassGroup<F>> {
    let ctx = RayContext::new(field, cycle);
    let full_order = ctx.order();
    bounds.check_monoid("ray class group", full_order)?;
    let f = &cycle.finite;
    let mut reps = Vec::new();
    let mut keys = HashMap::new();

    if support.is_dense() {
        let mut n = 1u64;
        while (reps.len() as u64) < full_order {
            if n > bounds.residue_norm {
                return Err(Error::TooLarge {
                    what: format!("representative search for Cl_P({cycle})"),
                    needed: n,
                    limit: bounds.residue_norm,
                });
            }
            for a in field.ideals_of_norm(n) {
                if is_coprime(field, &a, f) && is_supported(field, support, &a) {
                    let k = ctx.key(&a);
                    if let std::collections::hash_map::Entry::Vacant(e) = keys.entry(k) {
                        e.insert(reps.len());
                        reps.push(a);
                    }
                }
            }
            n += 1;
        }
    } else {
        let SupportMode::Explicit(list) = &support.mode else {
            unreachable!("only explicit supports can be sparse")
        };
        let mut gens: Vec<F::Ideal> = list.iter().filter(|p| is_coprime(field, p, f)).cloned().collect();
        gens.sort();
        // size of the generated subgroup
        let one = field.unit_ideal();
        let mut seen = HashSet::from([ctx.key(&one)]);
        let mut queue = VecDeque::from([one.clone()]);
        while let Some(r) = queue.pop_front() {
            for g in &gens {
                let x = field.mul(&r, g);
                if seen.insert(ctx.key(&x)) {
                    queue.push_back(x);
                }
            }
        }
        // smallest representatives, by norm
        let mut heap = BinaryHeap::from([Reverse(one.clone())]);
        let mut visited = HashSet::from([one]);
        while reps.len() < seen.len() {
            let Reverse(x) = heap.pop().expect("all classes are reachable");
            let k = ctx.key(&x);
            if let std::collections::hash_map::Entry::Vacant(e) = keys.entry(k) {
                e.insert(reps.len());
                reps.push(x.clone());
            }
            for g in &gens {
                let y = field.mul(&x, g);
                if visited.insert(y.clone()) {
                    heap.push(Reverse(y));
                }
            }
        }
    }

    Ok(RayClassGroup {
        cycle: cycle.clone(),
        support: support.clone(),
        reps,
        keys,
        full_order,
        ctx,
        field: field.clone(),
    })
}

impl<F: Arithmetic> RayClassGroup<F> {
    pub fn order(&self) -> usize {
        self.reps.len()
    }

    /// `|Cl(f)|`, whatever the support.
    pub fn full_order(&self) -> u64 {
        self.full_order
    }

    /// Whether `Cl_P(f) = Cl(f)`.
    pub fn is_full(&self) -> bool {
        self.reps.len() as u64 == self.full_order
    }

    pub fn context(&self) -> &RayContext<F> {
        &self.ctx
    }

    /// Class index of an ideal coprime to the cycle, if the class lies in `Cl_P(f)`.
    pub fn class_of(&self, a: &F::Ideal) -> Option<usize> {
        if !is_coprime(&self.field, a, &self.cycle.finite) {
            return None;
        }
        self.keys.get(&self.ctx.key(a)).copied()
    }

    pub fn mul(&self, i: usize, j: usize) -> usize {
        let p = self.field.mul(&self.reps[i], &self.reps[j]);
        self.keys[&self.ctx.key(&p)]
    }

    pub fn inverse(&self, i: usize) -> usize {
        (0..self.order())
            .find(|&j| self.mul(i, j) == 0)
            .expect("finite group has inverses")
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        (0..self.order())
            .map(|i| (0..self.order()).map(|j| self.mul(i, j)).collect())
            .collect()
    }

    /// A small generating set, chosen greedily in index order.
    pub fn generators(&self) -> Vec<usize> {
        let mut gens = Vec::new();
        let mut span: HashSet<usize> = HashSet::from([0]);
        for x in 0..self.order() {
            if span.contains(&x) {
                continue;
            }
            gens.push(x);
            let mut queue: VecDeque<usize> = span.iter().copied().collect();
            while let Some(y) = queue.pop_front() {
                for &g in &gens {
                    let z = self.mul(y, g);
                    if span.insert(z) {
                        queue.push_back(z);
                    }
                }
            }
        }
        gens
    }
}

/// Plain view of a ray class group, ideals rendered as text.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RayClassView {
    pub cycle: String,
    pub support: String,
    pub order: usize,
    pub full_order: u64,
    pub reps: Vec<String>,
    pub generators: Vec<usize>,
    pub table: Vec<Vec<usize>>,
}

impl<F: Arithmetic> RayClassGroup<F> {
    pub fn view(&self) -> RayClassView {
        RayClassView {
            cycle: self.cycle.to_string(),
            support: self.support.to_string(),
            order: self.order(),
            full_order: self.full_order,
            reps: self.reps.iter().map(|r| r.to_string()).collect(),
            generators: self.generators(),
            table: self.table(),
        }
    }
}

// ---- f-equivalence ----

/// Decides f-equivalence by its definition: equal gcd `d` with `f_fin`, and equal ray
/// classes of `a/d`, `b/d` in `Cl(f/d)`. Caches one context per divisor.
#[derive(Debug, Clone)]
pub struct FEquivalence<F: Arithmetic> {
    field: F,
    cycle: Cycle<F::Ideal>,
    contexts: HashMap<F::Ideal, RayContext<F>>,
}

impl<F: Arithmetic> FEquivalence<F> {
    pub fn new(field: &F, cycle: &Cycle<F::Ideal>) -> Self {
        FEquivalence {
            field: field.clone(),
            cycle: cycle.clone(),
            contexts: HashMap::new(),
        }
    }

    /// The pair `(d, key of a/d in Cl(f/d))`, a complete invariant of the class of `a`.
    pub fn class(&mut self, a: &F::Ideal) -> (F::Ideal, RayKey) {
        let field = &self.field;
        let d = field.gcd(a, &self.cycle.finite);
        let ctx = self.contexts.entry(d.clone()).or_insert_with(|| {
            let sub = Cycle::new(field.quotient(&self.cycle.finite, &d), self.cycle.infinite);
            RayContext::new(field, &sub)
        });
        let key = ctx.key(&field.quotient(a, &d));
        (d, key)
    }

    pub fn equivalent(&mut self, a: &F::Ideal, b: &F::Ideal) -> bool {
        self.class(a) == self.class(b)
    }
}

fn require_supported<F: Arithmetic>(field: &F, support: &PrimeSupport<F::Ideal>, a: &F::Ideal) -> Result<()> {
    if is_supported(field, support, a) {
        Ok(())
    } else {
        Err(Error::invalid(format!("ideal {a} is not supported at P = {support}")))
    }
}

pub fn f_equiv<F: Arithmetic>(
    field: &F,
    a: &F::Ideal,
    b: &F::Ideal,
    cycle: &Cycle<F::Ideal>,
    support: &PrimeSupport<F::Ideal>,
) -> Result<bool> {
    require_supported(field, support, a)?;
    require_supported(field, support, b)?;
    Ok(FEquivalence::new(field, cycle).equivalent(a, b))
}

/// A generator `gamma` of `a * adj(b)`, so that `a = (gamma / N(b)) b`.
pub fn ratio_generator<F: Arithmetic>(field: &F, a: &F::Ideal, b: &F::Ideal) -> Option<F::Elem> {
    field.generator(&field.mul(a, &field.adjoint(b)))
}

/// Searches the unit multiples `x' = u * gamma` for one with `x = x'/N(b)` in
/// `1 + f_fin b^-1` and positive at the real places of `f`; returns `x'`.
pub fn generator_witness<F: Arithmetic>(
    field: &F,
    gamma: &F::Elem,
    b: &F::Ideal,
    cycle: &Cycle<F::Ideal>,
) -> Option<F::Elem> {
    let nb = field.elem_int(field.norm(b) as i64);
    // x - 1 in f b^-1  <=>  x' - N(b) in f * adj(b)
    let target = field.mul(&cycle.finite, &field.adjoint(b));
    field.units(false).into_iter().find_map(|u| {
        let x = field.elem_mul(&u, gamma);
        if cycle.infinite && !field.is_positive(&x) {
            return None;
        }
        field.contains(&target, &field.elem_sub(&x, &nb)).then_some(x)
    })
}

/// f-equivalence through the generator criterion: `a = x b` with `x in 1 + f_fin b^-1`
/// positive at the real places of `f`.
pub fn f_equiv_generator<F: Arithmetic>(
    field: &F,
    a: &F::Ideal,
    b: &F::Ideal,
    cycle: &Cycle<F::Ideal>,
    support: &PrimeSupport<F::Ideal>,
) -> Result<bool> {
    require_supported(field, support, a)?;
    require_supported(field, support, b)?;
    Ok(ratio_generator(field, a, b)
        .and_then(|g| generator_witness(field, &g, b, cycle))
        .is_some())
}

// ---- the monoid ----

/// An element `[d][a]` of `DR_P(f)`: a divisor `d | f_fin` in `Id_P` and a class of
/// `Cl_P(f/d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DRClass<I> {
    pub divisor: I,
    /// Index into `Cl_P(f/d)`.
    pub class: usize,
    /// Representative of `a` in `Cl_P(f/d)`.
    pub unit_rep: I,
    /// `d * unit_rep`, an ideal in this class.
    pub rep: I,
}

#[derive(Debug, Clone)]
pub struct DRMonoid<F: Arithmetic> {
    pub cycle: Cycle<F::Ideal>,
    pub support: PrimeSupport<F::Ideal>,
    field: F,
    divisors: Vec<F::Ideal>,
    div_index: HashMap<F::Ideal, usize>,
    groups: Vec<RayClassGroup<F>>,
    elements: Vec<DRClass<F::Ideal>>,
    index: HashMap<(usize, usize), usize>,
}

/// Builds `DR_P(f)` as the closure of the identity under multiplication by the primes of
/// `f_fin` in P and by generators of `Cl_P(f)`.
pub fn dr_monoid<F: Arithmetic>(
    field: &F,
    cycle: &Cycle<F::Ideal>,
    support: &PrimeSupport<F::Ideal>,
    bounds: &Bounds,
) -> Result<DRMonoid<F>> {
    let f = &cycle.finite;
    let divisors = divisors_of(field, f, |p| support.allows(p));
    let div_index: HashMap<F::Ideal, usize> =
        divisors.iter().cloned().enumerate().map(|(i, d)| (d, i)).collect();
    let mut groups = Vec::with_capacity(divisors.len());
    for d in &divisors {
        let sub = Cycle::new(field.quotient(f, d), cycle.infinite);
        groups.push(ray_class_group(field, &sub, support, bounds)?);
    }
    let total: u64 = groups.iter().map(|g| g.order() as u64).sum();
    bounds.check_monoid("DR monoid", total)?;

    let mut dr = DRMonoid {
        cycle: cycle.clone(),
        support: support.clone(),
        field: field.clone(),
        divisors,
        div_index,
        groups,
        elements: Vec::new(),
        index: HashMap::new(),
    };

    let mut gens: Vec<F::Ideal> = field
        .factor(f)
        .into_iter()
        .map(|(p, _)| p)
        .filter(|p| support.allows(p))
        .collect();
    gens.extend(dr.groups[0].generators().into_iter().map(|i| dr.groups[0].reps[i].clone()));

    let start = (0usize, 0usize);
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some((di, ci)) = queue.pop_front() {
        let rep = dr.pair_rep(di, ci);
        for g in &gens {
            let next = dr.locate_pair(&field.mul(&rep, g))?;
            if seen.insert(next) {
                bounds.check_monoid("DR monoid closure", seen.len() as u64)?;
                queue.push_back(next);
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = seen.into_iter().collect();
    pairs.sort();
    for (i, &(di, ci)) in pairs.iter().enumerate() {
        dr.index.insert((di, ci), i);
        let unit_rep = dr.groups[di].reps[ci].clone();
        dr.elements.push(DRClass {
            divisor: dr.divisors[di].clone(),
            class: ci,
            rep: field.mul(&dr.divisors[di], &unit_rep),
            unit_rep,
        });
    }
    Ok(dr)
}

impl<F: Arithmetic> DRMonoid<F> {
    fn pair_rep(&self, di: usize, ci: usize) -> F::Ideal {
        self.field.mul(&self.divisors[di], &self.groups[di].reps[ci])
    }

    fn locate_pair(&self, a: &F::Ideal) -> Result<(usize, usize)> {
        let d = self.field.gcd(a, &self.cycle.finite);
        let di = *self
            .div_index
            .get(&d)
            .ok_or_else(|| Error::invalid(format!("ideal {a} is not supported at P = {}", self.support)))?;
        let ci = self.groups[di]
            .class_of(&self.field.quotient(a, &d))
            .ok_or_else(|| Error::invalid(format!("class of {a} is not represented in Id_P")))?;
        Ok((di, ci))
    }

    pub fn field(&self) -> &F {
        &self.field
    }

    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[DRClass<F::Ideal>] {
        &self.elements
    }

    pub fn rep(&self, i: usize) -> &F::Ideal {
        &self.elements[i].rep
    }

    pub fn divisors(&self) -> &[F::Ideal] {
        &self.divisors
    }

    /// `Cl_P(f/d)` for the `i`-th divisor; index 0 is `Cl_P(f)`.
    pub fn group(&self, i: usize) -> &RayClassGroup<F> {
        &self.groups[i]
    }

    pub fn identity(&self) -> usize {
        0
    }

    /// Pairs `(d, |Cl_P(f/d)|)` over the divisors of `f_fin` in `Id_P`.
    pub fn decomposition(&self) -> Vec<(F::Ideal, usize)> {
        self.divisors
            .iter()
            .cloned()
            .zip(self.groups.iter().map(|g| g.order()))
            .collect()
    }

    pub fn decomposition_sum(&self) -> usize {
        self.groups.iter().map(|g| g.order()).sum()
    }

    /// The element containing an ideal of `Id_P`.
    pub fn locate(&self, a: &F::Ideal) -> Result<usize> {
        require_supported(&self.field, &self.support, a)?;
        let pair = self.locate_pair(a)?;
        self.index
            .get(&pair)
            .copied()
            .ok_or_else(|| Error::invalid(format!("ideal {a} lies outside the generated monoid")))
    }

    pub fn mul(&self, i: usize, j: usize) -> usize {
        let p = self.field.mul(self.rep(i), self.rep(j));
        self.locate(&p).expect("monoid is closed")
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        (0..self.size())
            .map(|i| (0..self.size()).map(|j| self.mul(i, j)).collect())
            .collect()
    }

    /// Elements with an inverse, found from the table.
    pub fn units(&self) -> Vec<usize> {
        (0..self.size())
            .filter(|&i| (0..self.size()).any(|j| self.mul(i, j) == 0))
            .collect()
    }

    /// The inclusion `Cl_P(f) -> DR_P(f)`.
    pub fn unit_embedding(&self) -> Vec<usize> {
        (0..self.groups[0].order()).map(|c| self.index[&(0, c)]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct DRElementView {
    pub d: String,
    pub unit_rep: String,
    pub rep: String,
}

/// Plain view of `DR_P(f)`: elements `[d][a]` in index order and the multiplication table.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct DRMonoidView {
    pub cycle: String,
    pub support: String,
    pub elements: Vec<DRElementView>,
    pub table: Vec<Vec<usize>>,
}

impl<F: Arithmetic> DRMonoid<F> {
    pub fn view(&self) -> DRMonoidView {
        DRMonoidView {
            cycle: self.cycle.to_string(),
            support: self.support.to_string(),
            elements: self
                .elements
                .iter()
                .map(|e| DRElementView {
                    d: e.divisor.to_string(),
                    unit_rep: e.unit_rep.to_string(),
                    rep: e.rep.to_string(),
                })
                .collect(),
            table: self.table(),
        }
    }

    /// Index of the class of `ab`.
    pub fn product(&self, a: &F::Ideal, b: &F::Ideal) -> Result<usize> {
        Ok(self.mul(self.locate(a)?, self.locate(b)?))
    }
}

// ---- structural checks ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueIsoReport {
    pub n: u64,
    /// The factor of `n` supported at P.
    pub n_p: u64,
    pub n_rest: u64,
    pub size: usize,
    /// `n_P * phi(n^P)`.
    pub target_size: u64,
    pub bijective: bool,
    pub pairs_checked: usize,
    pub multiplicative: bool,
}

impl ResidueIsoReport {
    pub fn holds(&self) -> bool {
        self.bijective && self.multiplicative
    }
}

/// Checks `a -> (a mod n_P, a mod n^P)` is an isomorphism `DR_P((n)inf) -> (Z/n_P)° x
/// (Z/n^P)^*`, on all pairs or on `sample = (count, seed)` random pairs.
pub fn dr_iso_residue(dr: &DRMonoid<Rationals>, sample: Option<(usize, u64)>) -> Result<ResidueIsoReport> {
    if !dr.cycle.infinite {
        return Err(Error::refused(
            "the residue description applies to cycles (n)*inf; this cycle has no real place",
        ));
    }
    dr.support.require_dense("the residue description of DR")?;
    let n = dr.cycle.finite;
    let (n_p, n_rest) = split_at_support(&Rationals, &dr.support, &n);
    let image = |i: usize| (dr.rep(i) % n_p, dr.rep(i) % n_rest);
    let images: Vec<(u64, u64)> = (0..dr.size()).map(image).collect();
    let distinct: HashSet<(u64, u64)> = images.iter().copied().collect();
    let target_size = n_p * euler_phi(n_rest);
    let bijective = distinct.len() == dr.size()
        && dr.size() as u64 == target_size
        && images.iter().all(|&(_, y)| y.gcd(&n_rest) == 1);

    let check = |i: usize, j: usize| {
        let (x1, y1) = images[i];
        let (x2, y2) = images[j];
        images[dr.mul(i, j)] == (x1 * x2 % n_p, y1 * y2 % n_rest)
    };
    let (pairs_checked, multiplicative) = match sample {
        None => {
            let s = dr.size();
            (s * s, (0..s).all(|i| (0..s).all(|j| check(i, j))))
        }
        Some((count, seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = dr.size();
            let ok = (0..count).all(|_| check(rng.gen_range(0..s), rng.gen_range(0..s)));
            (count, ok)
        }
    };
    Ok(ResidueIsoReport {
        n,
        n_p,
        n_rest,
        size: dr.size(),
        target_size,
        bijective,
        pairs_checked,
        multiplicative,
    })
}

/// Lifts a residue to an element congruent to it mod `f_P` and to 1 mod `f^P`, nonzero,
/// positive where required and generating an ideal of `Id_P`.
struct Lifter<'a, F: Arithmetic> {
    dr: &'a DRMonoid<F>,
    f_p: F::Ideal,
    crt: HashMap<(u64, u64), u64>,
    one_rest: u64,
}

impl<'a, F: Arithmetic> Lifter<'a, F> {
    fn new(dr: &'a DRMonoid<F>, bounds: &Bounds) -> Result<Self> {
        let field = &dr.field;
        let f = &dr.cycle.finite;
        let nf = field.norm(f);
        bounds.check_residue("residue ring O/f", nf)?;
        let (f_p, f_rest) = split_at_support(field, &dr.support, f);
        let crt = (0..nf)
            .map(|c| {
                let x = field.residue_elem(f, c);
                ((field.residue_code(&f_p, &x), field.residue_code(&f_rest, &x)), c)
            })
            .collect();
        let one_rest = field.residue_code(&f_rest, &field.elem_int(1));
        Ok(Lifter { dr, f_p, crt, one_rest })
    }

    fn lift(&self, code_p: u64) -> Result<F::Ideal> {
        let field = &self.dr.field;
        let f = &self.dr.cycle.finite;
        let step = field.elem_int(field.norm(f) as i64);
        let mut x = field.residue_elem(f, self.crt[&(code_p, self.one_rest)]);
        for _ in 0..100_000 {
            let ok = !field.is_zero_elem(&x)
                && (!self.dr.cycle.infinite || field.is_positive(&x))
                && is_supported(field, &self.dr.support, &field.principal(&x));
            if ok {
                return Ok(field.principal(&x));
            }
            x = field.elem_add(&x, &step);
        }
        Err(Error::TooLarge {
            what: "lift search".into(),
            needed: 100_001,
            limit: 100_000,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PushoutReport {
    /// `|(O/f_P)°|`.
    pub a_size: usize,
    /// `|(O/f_P)^*|`.
    pub g_size: usize,
    /// `|Cl(f)|`.
    pub cl_size: usize,
    pub orbits: usize,
    pub dr_size: usize,
    pub well_defined: bool,
    pub bijective: bool,
    pub homomorphism: bool,
}

impl PushoutReport {
    pub fn holds(&self) -> bool {
        self.well_defined && self.bijective && self.homomorphism
    }
}

fn uf_find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Builds `(O/f_P)° (+)_{(O/f_P)^*} Cl(f)` as the orbit set of `A x B` under
/// `g.(a, b) = (g a, g^-1 b)` and checks the natural map to `DR_P(f)` is an isomorphism.
pub fn dr_pushout_check<F: Arithmetic>(dr: &DRMonoid<F>, bounds: &Bounds) -> Result<PushoutReport> {
    dr.support.require_dense("the pushout description of DR")?;
    let field = &dr.field;
    let lifter = Lifter::new(dr, bounds)?;
    let f_p = lifter.f_p.clone();
    let na = field.norm(&f_p) as usize;
    let a_mul = |i: usize, j: usize| {
        let x = field.elem_mul(&field.residue_elem(&f_p, i as u64), &field.residue_elem(&f_p, j as u64));
        field.residue_code(&f_p, &x) as usize
    };
    let g: Vec<usize> = (0..na)
        .filter(|&c| is_unit_mod(field, &f_p, &field.residue_elem(&f_p, c as u64)))
        .collect();
    let cl = dr.group(0);
    if !cl.is_full() {
        return Err(Error::invalid("Cl_P(f) is smaller than Cl(f) for a dense support"));
    }
    let nb = cl.order();
    let mut g_inv_class = Vec::with_capacity(g.len());
    for &x in &g {
        let c = cl
            .class_of(&lifter.lift(x as u64)?)
            .ok_or_else(|| Error::invalid("unit lift is not coprime to f"))?;
        g_inv_class.push(cl.inverse(c));
    }

    let idx = |a: usize, b: usize| a * nb + b;
    let mut parent: Vec<usize> = (0..na * nb).collect();
    for a in 0..na {
        for b in 0..nb {
            for (gi, &gx) in g.iter().enumerate() {
                let other = idx(a_mul(gx, a), cl.mul(b, g_inv_class[gi]));
                let (r1, r2) = (uf_find(&mut parent, idx(a, b)), uf_find(&mut parent, other));
                if r1 != r2 {
                    parent[r1] = r2;
                }
            }
        }
    }

    let mut a_image = Vec::with_capacity(na);
    for a in 0..na {
        a_image.push(dr.locate(&lifter.lift(a as u64)?)?);
    }
    let mut b_image = Vec::with_capacity(nb);
    for b in 0..nb {
        b_image.push(dr.locate(&cl.reps[b])?);
    }
    let phi = |a: usize, b: usize| dr.mul(a_image[a], b_image[b]);

    let mut orbit_value: HashMap<usize, usize> = HashMap::new();
    let mut orbit_rep: Vec<(usize, usize)> = Vec::new();
    let mut well_defined = true;
    for a in 0..na {
        for b in 0..nb {
            let root = uf_find(&mut parent, idx(a, b));
            let v = phi(a, b);
            match orbit_value.get(&root) {
                Some(&w) => well_defined &= w == v,
                None => {
                    orbit_value.insert(root, v);
                    orbit_rep.push((a, b));
                }
            }
        }
    }
    let values: HashSet<usize> = orbit_value.values().copied().collect();
    let bijective = values.len() == orbit_rep.len() && values.len() == dr.size();
    let mut homomorphism = true;
    'outer: for &(a1, b1) in &orbit_rep {
        for &(a2, b2) in &orbit_rep {
            if phi(a_mul(a1, a2), cl.mul(b1, b2)) != dr.mul(phi(a1, b1), phi(a2, b2)) {
                homomorphism = false;
                break 'outer;
            }
        }
    }
    Ok(PushoutReport {
        a_size: na,
        g_size: g.len(),
        cl_size: nb,
        orbits: orbit_rep.len(),
        dr_size: dr.size(),
        well_defined,
        bijective,
        homomorphism,
    })
}

/// For class number one and full support: checks `DR(f) = (O/f_fin)° / O^*_f` by mapping
/// each residue orbit under admissible units to the class of a lift.
pub fn dr_unit_orbit_check<F: Arithmetic>(dr: &DRMonoid<F>, bounds: &Bounds) -> Result<bool> {
    let field = &dr.field;
    if field.class_count() != 1 || dr.support.mode != SupportMode::All {
        return Err(Error::refused(
            "the residue orbit description needs class number one and P = all primes",
        ));
    }
    let f = &dr.cycle.finite;
    let nf = field.norm(f);
    bounds.check_residue("residue ring O/f", nf)?;
    let units = field.units(dr.cycle.infinite);
    let lifter = Lifter::new(dr, bounds)?;
    let mut orbit_of = vec![usize::MAX; nf as usize];
    let mut orbit_value = Vec::new();
    for c in 0..nf {
        if orbit_of[c as usize] != usize::MAX {
            continue;
        }
        let x = field.residue_elem(f, c);
        let o = orbit_value.len();
        for u in &units {
            orbit_of[field.residue_code(f, &field.elem_mul(u, &x)) as usize] = o;
        }
        orbit_value.push(dr.locate(&lifter.lift(c)?)?);
    }
    // well defined: every member of an orbit maps to the same class
    for c in 0..nf {
        if dr.locate(&lifter.lift(c)?)? != orbit_value[orbit_of[c as usize]] {
            return Ok(false);
        }
    }
    let distinct: HashSet<usize> = orbit_value.iter().copied().collect();
    Ok(distinct.len() == orbit_value.len() && distinct.len() == dr.size())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalMap {
    pub map: Vec<usize>,
    pub homomorphism: bool,
    pub surjective: bool,
}

/// The canonical projection `DR_P(f) -> DR_P(f')` for `f' | f`.
pub fn dr_canonical_map<F: Arithmetic>(big: &DRMonoid<F>, small: &DRMonoid<F>) -> Result<CanonicalMap> {
    if !cycle_divides(&big.field, &small.cycle, &big.cycle) {
        return Err(Error::invalid(format!("{} does not divide {}", small.cycle, big.cycle)));
    }
    if big.support != small.support {
        return Err(Error::invalid("canonical map needs a common support"));
    }
    let map = (0..big.size())
        .map(|i| small.locate(big.rep(i)))
        .collect::<Result<Vec<_>>>()?;
    let homomorphism = map[big.identity()] == small.identity()
        && (0..big.size()).all(|i| (0..big.size()).all(|j| map[big.mul(i, j)] == small.mul(map[i], map[j])));
    let image: HashSet<usize> = map.iter().copied().collect();
    Ok(CanonicalMap {
        surjective: image.len() == small.size(),
        map,
        homomorphism,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftMap {
    pub map: Vec<usize>,
    pub injective: bool,
    /// `proj o shift` and `shift o proj` are multiplication by `[a]`.
    pub projection_is_multiplication: bool,
    /// `shift(proj(x) b) = x shift(b)` for `x` in `DR(f a)`.
    pub equivariant: bool,
}

/// The map `DR_P(f) -> DR_P(f a)`, `[b] -> [a b]`.
pub fn dr_shift_map<F: Arithmetic>(small: &DRMonoid<F>, big: &DRMonoid<F>, a: &F::Ideal) -> Result<ShiftMap> {
    let field = &small.field;
    require_supported(field, &small.support, a)?;
    if big.cycle.finite != field.mul(&small.cycle.finite, a) || big.cycle.infinite != small.cycle.infinite {
        return Err(Error::invalid(format!(
            "target cycle {} is not {} times {a}",
            big.cycle, small.cycle
        )));
    }
    let map = (0..small.size())
        .map(|b| big.locate(&field.mul(a, small.rep(b))))
        .collect::<Result<Vec<_>>>()?;
    let proj = dr_canonical_map(big, small)?.map;
    let a_small = small.locate(a)?;
    let a_big = big.locate(a)?;
    let image: HashSet<usize> = map.iter().copied().collect();
    let projection_is_multiplication = (0..small.size()).all(|b| proj[map[b]] == small.mul(a_small, b))
        && (0..big.size()).all(|x| map[proj[x]] == big.mul(a_big, x));
    let equivariant = (0..big.size())
        .all(|x| (0..small.size()).all(|b| map[small.mul(proj[x], b)] == big.mul(x, map[b])));
    Ok(ShiftMap {
        injective: image.len() == map.len(),
        map,
        projection_is_multiplication,
        equivariant,
    })
}

/// `DR_P(f)` acting on itself with the identity as base point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeDrSet {
    pub action: Vec<Vec<usize>>,
    pub point: usize,
}

impl FreeDrSet {
    /// Whether the base point generates the whole set.
    pub fn generated_by_point(&self) -> bool {
        let orbit: HashSet<usize> = self.action.iter().map(|row| row[self.point]).collect();
        orbit.len() == self.action.len()
    }
}

pub fn free_dr_set<F: Arithmetic>(dr: &DRMonoid<F>) -> FreeDrSet {
    FreeDrSet {
        action: dr.table(),
        point: dr.identity(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q_cycle(n: u64, inf: bool) -> Cycle<u64> {
        Cycle::new(n, inf)
    }

    fn all() -> PrimeSupport<u64> {
        PrimeSupport::all()
    }

    fn b() -> Bounds {
        Bounds::default()
    }

    #[test]
    fn cycle_parsing() {
        assert_eq!(parse_cycle(&Rationals, "12*inf").unwrap(), q_cycle(12, true));
        assert_eq!(parse_cycle(&Rationals, "7").unwrap(), q_cycle(7, false));
        assert_eq!(parse_cycle(&Rationals, "inf").unwrap(), q_cycle(1, true));
        assert!(parse_cycle(&Rationals, "0").is_err());
        let k = ImagQuadratic::new(-1).unwrap();
        let c = parse_cycle(&k, "[5, 2+w, 1]").unwrap();
        assert_eq!(c.finite.norm(), 5);
        assert!(parse_cycle(&k, "[5, 2+w, 1]*inf").is_err());
        assert_eq!(q_cycle(12, true).to_string(), "12*inf");
    }

    #[test]
    fn support_parsing() {
        let s = parse_support(&Rationals, "all-except:2,3").unwrap();
        assert!(s.is_dense() && !s.allows(&2) && s.allows(&5));
        let e = parse_support(&Rationals, "explicit:5").unwrap();
        assert!(!e.is_dense());
        assert!(parse_support(&Rationals, "explicit:4").is_err());
        let k = ImagQuadratic::new(-1).unwrap();
        let s = parse_support(&k, "all-except:[5, 2+w, 1],[2, 1+w, 1]").unwrap();
        assert_eq!(s.to_string(), "all-except:[5, 2+w, 1],[2, 1+w, 1]");
    }

    #[test]
    fn f_equiv_examples() {
        assert!(f_equiv(&Rationals, &7, &7, &q_cycle(5, true), &all()).unwrap());
        assert!(f_equiv(&Rationals, &2, &6, &q_cycle(4, true), &all()).unwrap());
        assert!(!f_equiv(&Rationals, &2, &3, &q_cycle(5, true), &all()).unwrap());
        assert!(f_equiv_generator(&Rationals, &2, &6, &q_cycle(4, true), &all()).unwrap());
        assert!(!f_equiv_generator(&Rationals, &1, &2, &q_cycle(2, true), &all()).unwrap());
        assert!(f_equiv_generator(&Rationals, &9, &9, &q_cycle(8, false), &all()).unwrap());
        let no2 = PrimeSupport::all_except(vec![2]);
        assert!(f_equiv(&Rationals, &2, &6, &q_cycle(4, true), &no2).is_err());
    }

    #[test]
    fn witness_over_q() {
        // (2) = x (6) with x = 1/3; the witness is x * N(b) = 2
        let g = ratio_generator(&Rationals, &2, &6).unwrap();
        assert_eq!(generator_witness(&Rationals, &g, &6, &q_cycle(4, true)), Some(2));
    }

    #[test]
    fn ray_class_group_examples() {
        assert_eq!(ray_class_group(&Rationals, &q_cycle(1, false), &all(), &b()).unwrap().order(), 1);
        let g = ray_class_group(&Rationals, &q_cycle(12, true), &all(), &b()).unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(g.reps, vec![1, 5, 7, 11]);
        let g = ray_class_group(&Rationals, &q_cycle(12, false), &all(), &b()).unwrap();
        assert_eq!(g.order(), 2);
        let k = ImagQuadratic::new(-1).unwrap();
        let f = k.field().principal_ideal(&QuadInt::new(2, 1));
        let g = ray_class_group(&k, &Cycle::new(f, false), &PrimeSupport::all(), &b()).unwrap();
        assert_eq!(g.order(), 1);
    }

    #[test]
    fn group_tables_are_groups() {
        let k = ImagQuadratic::new(-5).unwrap();
        for f in k.field().ideals_up_to(20) {
            let g = ray_class_group(&k, &Cycle::new(f, false), &PrimeSupport::all(), &b()).unwrap();
            let t = g.table();
            let n = g.order();
            assert!(g.is_full());
            for i in 0..n {
                assert_eq!(t[0][i], i);
                let mut row = t[i].clone();
                row.sort();
                assert_eq!(row, (0..n).collect::<Vec<_>>());
                for j in 0..n {
                    assert_eq!(t[i][j], t[j][i]);
                    for l in 0..n {
                        assert_eq!(t[t[i][j]][l], t[i][t[j][l]]);
                    }
                }
            }
        }
    }

    #[test]
    fn explicit_support_generates_subgroup() {
        // 3 generates {1, 3} inside (Z/8)^*
        let g = ray_class_group(&Rationals, &q_cycle(8, true), &PrimeSupport::explicit(vec![3]), &b()).unwrap();
        assert_eq!(g.order(), 2);
        assert!(!g.is_full());
        assert_eq!(g.reps, vec![1, 3]);
        let dense = ray_class_group(
            &Rationals,
            &q_cycle(8, true),
            &PrimeSupport::explicit(vec![3, 5, 7]).with_density_override(),
            &b(),
        )
        .unwrap();
        assert!(dense.is_full());
    }

    #[test]
    fn dr_examples() {
        let dr = dr_monoid(&Rationals, &q_cycle(6, true), &all(), &b()).unwrap();
        assert_eq!(dr.size(), 6);
        assert_eq!(dr.decomposition_sum(), 6);
        let dr4 = dr_monoid(&Rationals, &q_cycle(4, true), &all(), &b()).unwrap();
        let two = dr4.locate(&2).unwrap();
        assert_eq!(dr4.mul(two, two), dr4.locate(&4).unwrap());
        let triv = dr_monoid(&Rationals, &q_cycle(1, false), &all(), &b()).unwrap();
        assert_eq!(triv.size(), 1);
    }

    #[test]
    fn dr_units_are_ray_class_group() {
        for n in 1..40u64 {
            for inf in [false, true] {
                let dr = dr_monoid(&Rationals, &q_cycle(n, inf), &all(), &b()).unwrap();
                let mut units = dr.units();
                let mut emb = dr.unit_embedding();
                units.sort();
                emb.sort();
                assert_eq!(units, emb, "n={n}");
                let g = dr.group(0);
                for i in 0..g.order() {
                    for j in 0..g.order() {
                        assert_eq!(dr.mul(dr.unit_embedding()[i], dr.unit_embedding()[j]), dr.unit_embedding()[g.mul(i, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn iso_residue_examples() {
        let dr = dr_monoid(&Rationals, &q_cycle(6, true), &all(), &b()).unwrap();
        assert!(dr_iso_residue(&dr, None).unwrap().holds());
        let no2 = PrimeSupport::all_except(vec![2]);
        let dr = dr_monoid(&Rationals, &q_cycle(12, true), &no2, &b()).unwrap();
        let rep = dr_iso_residue(&dr, None).unwrap();
        assert!(rep.holds());
        assert_eq!((rep.n_p, rep.n_rest, rep.size), (3, 4, 6));
        let dr = dr_monoid(&Rationals, &q_cycle(1, true), &all(), &b()).unwrap();
        assert!(dr_iso_residue(&dr, None).unwrap().holds());
        let dr = dr_monoid(&Rationals, &q_cycle(6, false), &all(), &b()).unwrap();
        assert!(matches!(dr_iso_residue(&dr, None), Err(Error::Refused(_))));
    }

    #[test]
    fn pushout_examples() {
        let k = ImagQuadratic::new(-1).unwrap();
        let f = k.field().principal_ideal(&QuadInt::new(2, 1));
        let dr = dr_monoid(&k, &Cycle::new(f, false), &PrimeSupport::all(), &b()).unwrap();
        assert_eq!(dr.size(), 2);
        let rep = dr_pushout_check(&dr, &b()).unwrap();
        assert!(rep.holds());
        assert_eq!(rep.orbits, 2);
        let dr = dr_monoid(&Rationals, &q_cycle(6, true), &all(), &b()).unwrap();
        assert!(dr_pushout_check(&dr, &b()).unwrap().holds());
        let dr = dr_monoid(&Rationals, &q_cycle(1, false), &all(), &b()).unwrap();
        assert!(dr_pushout_check(&dr, &b()).unwrap().holds());
        let sparse = dr_monoid(&Rationals, &q_cycle(5, true), &PrimeSupport::explicit(vec![2]), &b()).unwrap();
        assert!(matches!(dr_pushout_check(&sparse, &b()), Err(Error::Refused(_))));
    }

    #[test]
    fn class_number_one_orbits() {
        for d in [-1, -3] {
            let k = ImagQuadratic::new(d).unwrap();
            for f in k.field().ideals_up_to(50) {
                let dr = dr_monoid(&k, &Cycle::new(f, false), &PrimeSupport::all(), &b()).unwrap();
                assert!(dr_unit_orbit_check(&dr, &b()).unwrap(), "d={d} f={f}");
            }
        }
        for n in 1..=50 {
            for inf in [false, true] {
                let dr = dr_monoid(&Rationals, &q_cycle(n, inf), &all(), &b()).unwrap();
                assert!(dr_unit_orbit_check(&dr, &b()).unwrap());
            }
        }
    }

    #[test]
    fn canonical_and_shift_maps() {
        let d4 = dr_monoid(&Rationals, &q_cycle(4, true), &all(), &b()).unwrap();
        let d2 = dr_monoid(&Rationals, &q_cycle(2, true), &all(), &b()).unwrap();
        let c = dr_canonical_map(&d4, &d2).unwrap();
        assert!(c.homomorphism && c.surjective);
        let id = dr_canonical_map(&d4, &d4).unwrap();
        assert_eq!(id.map, (0..d4.size()).collect::<Vec<_>>());
        let d6 = dr_monoid(&Rationals, &q_cycle(6, true), &all(), &b()).unwrap();
        let d3 = dr_monoid(&Rationals, &q_cycle(3, true), &all(), &b()).unwrap();
        let c = dr_canonical_map(&d6, &d3).unwrap();
        assert_eq!(c.map[d6.locate(&2).unwrap()], d3.locate(&2).unwrap());
        assert!(d3.group(0).class_of(&2).is_some());
        assert!(dr_canonical_map(&d2, &d4).is_err());

        let s = dr_shift_map(&d2, &d4, &2).unwrap();
        assert!(s.injective && s.projection_is_multiplication && s.equivariant);
        let image: Vec<u64> = s.map.iter().map(|&i| d4.rep(i) % 4).collect();
        assert!(image.iter().all(|r| r % 2 == 0));
        let s = dr_shift_map(&d2, &d2, &1).unwrap();
        assert_eq!(s.map, vec![0, 1]);
    }

    #[test]
    fn free_set() {
        let dr = dr_monoid(&Rationals, &q_cycle(2, true), &all(), &b()).unwrap();
        let s = free_dr_set(&dr);
        assert_eq!(s.action.len(), 2);
        assert!(s.generated_by_point());
        let one = free_dr_set(&dr_monoid(&Rationals, &q_cycle(1, false), &all(), &b()).unwrap());
        assert_eq!(one.action, vec![vec![0]]);
    }

    #[test]
    fn gaussian_dr_matches_residues() {
        let k = ImagQuadratic::new(-1).unwrap();
        let two = k.field().principal_ideal(&QuadInt::int(2));
        let dr = dr_monoid(&k, &Cycle::new(two, false), &PrimeSupport::all(), &b()).unwrap();
        // (Z[i]/2)° / <i> has orbits {0}, {1, i}, {1+i}
        assert_eq!(dr.size(), 3);
    }

    proptest! {
        #[test]
        fn f_equiv_is_a_congruence(n in 1u64..40, inf: bool, a in 1u64..80, bb in 1u64..80, c in 1u64..30) {
            let cyc = q_cycle(n, inf);
            let mut eq = FEquivalence::new(&Rationals, &cyc);
            let e = eq.equivalent(&a, &bb);
            prop_assert_eq!(e, eq.equivalent(&bb, &a));
            if e {
                prop_assert!(eq.equivalent(&(a * c), &(bb * c)));
                for m in crate::exact_arith::divisors(n) {
                    prop_assert!(FEquivalence::new(&Rationals, &q_cycle(m, inf)).equivalent(&a, &bb));
                    prop_assert!(FEquivalence::new(&Rationals, &q_cycle(m, false)).equivalent(&a, &bb));
                }
            }
            prop_assert_eq!(e, f_equiv_generator(&Rationals, &a, &bb, &cyc, &all()).unwrap());
        }

        #[test]
        fn quadratic_f_equiv_agrees(d in prop::sample::select(vec![-1i64, -5, -3]), i in 0usize..200, j in 0usize..200, fi in 0usize..30) {
            let k = ImagQuadratic::new(d).unwrap();
            let ideals = k.field().ideals_up_to(60);
            let a = ideals[i % ideals.len()];
            let bb = ideals[j % ideals.len()];
            let f = ideals[fi % 30];
            let cyc = Cycle::new(f, false);
            let e = f_equiv(&k, &a, &bb, &cyc, &PrimeSupport::all()).unwrap();
            prop_assert_eq!(e, f_equiv_generator(&k, &a, &bb, &cyc, &PrimeSupport::all()).unwrap());
        }
    }
}
