//! Deciding integral Lambda-models for finite sets with Frobenius and Galois data over Q,
//! and the local structure theory at one prime.
//!
//! A [`FiniteIdSet`] is the combinatorial shadow of a finite etale Q-algebra with
//! Lambda-structure: a finite set `S`, an action of `(Z/m)^*` standing in for the abelian
//! Galois action, and one self-map `psi_p` for each special prime. For any other prime the
//! map is by convention the Artin action of `p mod m`, which is forced whenever a model
//! exists.
//!
//! Maps on `S` are plain vectors: `f[s]` is the image of `s`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exact_arith::{divisors, factor, units_mod, valuation};
use crate::ray_class::{dr_monoid, Cycle, DRMonoid, PrimeSupport, Rationals};
use crate::{Bounds, Error, Result};

pub type Map = Vec<usize>;

fn compose(f: &[usize], g: &[usize]) -> Map {
    g.iter().map(|&x| f[x]).collect()
}

fn identity(n: usize) -> Map {
    (0..n).collect()
}

fn image_of(f: &[usize], set: &[usize]) -> Vec<usize> {
    let s: BTreeSet<usize> = set.iter().map(|&x| f[x]).collect();
    s.into_iter().collect()
}

fn check_map(f: &[usize], size: usize, what: &str) -> Result<()> {
    if f.len() != size || f.iter().any(|&x| x >= size) {
        return Err(Error::invalid(format!("{what} is not a self-map of a {size}-element set")));
    }
    Ok(())
}

/// Least common multiple of cycles over Q.
pub fn cycle_lcm(a: &Cycle<u64>, b: &Cycle<u64>) -> Cycle<u64> {
    Cycle::new(a.finite.lcm(&b.finite), a.infinite || b.infinite)
}

pub fn cycle_divides(a: &Cycle<u64>, b: &Cycle<u64>) -> bool {
    b.finite % a.finite == 0 && (!a.infinite || b.infinite)
}

/// A finite set with commuting prime-indexed maps and a `(Z/m)^*`-action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteIdSet {
    pub size: usize,
    pub m: u64,
    /// Action of each unit residue mod `m`.
    pub galois: BTreeMap<u64, Map>,
    /// `psi_p` for the special primes, which include every prime dividing `m`.
    pub special: BTreeMap<u64, Map>,
}

impl FiniteIdSet {
    pub fn new(size: usize, m: u64, galois: BTreeMap<u64, Map>, special: BTreeMap<u64, Map>) -> Result<Self> {
        let s = FiniteIdSet { size, m, galois, special };
        s.validate()?;
        Ok(s)
    }

    /// Checks the action axioms and the commutation relations.
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("modulus m must be positive"));
        }
        let units = units_mod(self.m);
        let keys: Vec<u64> = self.galois.keys().copied().collect();
        if keys != units {
            return Err(Error::invalid(format!(
                "galois must list exactly the units mod {}, got {keys:?}",
                self.m
            )));
        }
        for (u, f) in &self.galois {
            check_map(f, self.size, &format!("galois action of {u}"))?;
        }
        if self.galois[&(1 % self.m.max(2)).min(units[0])] != identity(self.size) && self.m > 1 {
            return Err(Error::invalid("1 mod m must act as the identity"));
        }
        for &u in &units {
            for &v in &units {
                let uv = u * v % self.m;
                if compose(&self.galois[&u], &self.galois[&v]) != self.galois[&uv] {
                    return Err(Error::invalid(format!("galois is not an action: {u} * {v}")));
                }
            }
        }
        for (p, f) in &self.special {
            if !crate::exact_arith::is_prime(*p) {
                return Err(Error::invalid(format!("special index {p} is not prime")));
            }
            check_map(f, self.size, &format!("psi_{p}"))?;
        }
        for p in factor(self.m)?.primes() {
            if !self.special.contains_key(&p) {
                return Err(Error::invalid(format!("prime {p} divides m but has no psi_{p}")));
            }
        }
        for (p, f) in &self.special {
            for (u, g) in &self.galois {
                if compose(f, g) != compose(g, f) {
                    return Err(Error::invalid(format!("psi_{p} does not commute with galois {u}")));
                }
            }
            for (q, g) in &self.special {
                if compose(f, g) != compose(g, f) {
                    return Err(Error::invalid(format!("psi_{p} and psi_{q} do not commute")));
                }
            }
        }
        Ok(())
    }

    pub fn special_primes(&self) -> Vec<u64> {
        self.special.keys().copied().collect()
    }

    /// Action of a residue coprime to `m`.
    pub fn galois_of(&self, u: u64) -> &Map {
        &self.galois[&(u % self.m)]
    }

    pub fn psi_prime(&self, p: u64) -> Map {
        match self.special.get(&p) {
            Some(f) => f.clone(),
            None => self.galois_of(p).clone(),
        }
    }

    /// `psi_a`, composed over the prime factors of `a`.
    pub fn psi(&self, a: u64) -> Map {
        let mut out = identity(self.size);
        for (p, e) in factor(a).expect("a >= 1").factors {
            let f = self.psi_prime(p);
            for _ in 0..e {
                out = compose(&f, &out);
            }
        }
        out
    }

    /// The subset `dS`.
    pub fn image(&self, d: u64) -> Vec<usize> {
        image_of(&self.psi(d), &identity(self.size))
    }

    /// The roots of unity `mu_n`, as exponents `Z/n` with every map multiplicative.
    pub fn mu(n: u64) -> Self {
        Self::mu_quotient(n, &[1])
    }

    /// `mu_n` modulo the multiplicative action of a subgroup `H` of `(Z/n)^*`.
    pub fn mu_quotient(n: u64, h: &[u64]) -> Self {
        let mut sub: BTreeSet<u64> = BTreeSet::from([1 % n]);
        loop {
            let grown: BTreeSet<u64> = sub
                .iter()
                .flat_map(|&a| h.iter().map(move |&b| a * b % n))
                .chain(sub.iter().copied())
                .collect();
            if grown == sub {
                break;
            }
            sub = grown;
        }
        let mut orbit_of = vec![usize::MAX; n as usize];
        let mut count = 0;
        for x in 0..n {
            if orbit_of[x as usize] == usize::MAX {
                for &u in &sub {
                    orbit_of[(x * u % n) as usize] = count;
                }
                count += 1;
            }
        }
        let rep_of: Vec<u64> = (0..count)
            .map(|o| (0..n).find(|&x| orbit_of[x as usize] == o).unwrap())
            .collect();
        let mult = |k: u64| -> Map { rep_of.iter().map(|&x| orbit_of[(x * k % n) as usize]).collect() };
        let galois = units_mod(n).into_iter().map(|u| (u, mult(u))).collect();
        let special = factor(n).unwrap().primes().map(|p| (p, mult(p))).collect();
        FiniteIdSet {
            size: count,
            m: n,
            galois,
            special,
        }
    }

    /// The one-point set.
    pub fn point() -> Self {
        Self::mu(1)
    }

    /// Disjoint union; the modulus becomes the lcm.
    pub fn union(&self, other: &FiniteIdSet) -> FiniteIdSet {
        let m = self.m.lcm(&other.m);
        let shift = self.size;
        let glue = |f: &Map, g: &Map| -> Map { f.iter().copied().chain(g.iter().map(|&x| x + shift)).collect() };
        let galois = units_mod(m)
            .into_iter()
            .map(|u| (u, glue(self.galois_of(u), other.galois_of(u))))
            .collect();
        let primes: BTreeSet<u64> = self.special.keys().chain(other.special.keys()).copied().collect();
        let special = primes
            .into_iter()
            .map(|p| (p, glue(&self.psi_prime(p), &other.psi_prime(p))))
            .collect();
        FiniteIdSet {
            size: self.size + other.size,
            m,
            galois,
            special,
        }
    }

    /// Replaces `psi_p` by `psi_p o galois(v)`, adding `p` to the special primes.
    pub fn twist(&self, p: u64, v: u64) -> FiniteIdSet {
        let mut out = self.clone();
        let f = compose(&self.psi_prime(p), self.galois_of(v));
        out.special.insert(p, f);
        out
    }
}

/// `ord_p(r)` for every special prime, and `r` itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ramification {
    pub r: u64,
    pub orders: BTreeMap<u64, u32>,
}

fn eventual_image(f: &[usize]) -> (Vec<usize>, u32) {
    let mut cur = identity(f.len());
    let mut steps = 0;
    loop {
        let next = image_of(f, &cur);
        if next == cur {
            return (cur, steps);
        }
        cur = next;
        steps += 1;
    }
}

/// `ord_p(r) = inf { i : p^(i+1) S = p^i S }`.
pub fn compute_r(s: &FiniteIdSet) -> Ramification {
    let mut orders = BTreeMap::new();
    let mut r = 1u64;
    for p in s.special_primes() {
        let (_, k) = eventual_image(&s.psi_prime(p));
        if k > 0 {
            orders.insert(p, k);
            r *= p.pow(k);
        }
    }
    Ramification { r, orders }
}

/// The conductor of a Galois-stable subset: least `n | m` through which the action
/// factors, with the real place when `-1 mod n` still acts nontrivially.
pub fn conductor(s: &FiniteIdSet, t: &[usize]) -> Result<Cycle<u64>> {
    let units = units_mod(s.m);
    for g in s.galois.values() {
        if image_of(g, t) != t {
            return Err(Error::invalid("subset is not stable under the Galois action"));
        }
    }
    let trivial_on = |u: u64| t.iter().all(|&x| s.galois_of(u)[x] == x);
    let valid: Vec<u64> = divisors(s.m)
        .into_iter()
        .filter(|&n| units.iter().filter(|&&u| u % n == 1 % n).all(|&u| trivial_on(u)))
        .collect();
    let n = valid[0];
    debug_assert!(valid.iter().all(|v| v % n == 0), "valid levels are closed under gcd");
    let infinite = units.iter().any(|&u| u % n == (n - 1) % n && !trivial_on(u));
    Ok(Cycle::new(n, infinite))
}

/// The local conditions at a special prime `p`: inertia `{u = 1 mod m'}` is trivial on the
/// eventual image of `psi_p`, and `psi_p` agrees there with Frobenius `u = p mod m'`,
/// `u = 1 mod p^k`.
pub fn local_conditions_hold(s: &FiniteIdSet, p: u64) -> bool {
    let k = valuation(s.m, p);
    let pk = p.pow(k);
    let m_rest = s.m / pk;
    let psi = s.psi_prime(p);
    let (core, _) = eventual_image(&psi);
    let units = units_mod(s.m);
    let inertia_trivial = units
        .iter()
        .filter(|&&u| u % m_rest == 1 % m_rest)
        .all(|&u| core.iter().all(|&x| s.galois_of(u)[x] == x));
    if !inertia_trivial {
        return false;
    }
    let frob = units
        .iter()
        .copied()
        .find(|&u| u % m_rest == p % m_rest && u % pk == 1 % pk)
        .expect("CRT residue exists");
    core.iter().all(|&x| s.galois_of(frob)[x] == psi[x])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelReport {
    /// Whether an integral model exists: the local conditions hold at every special prime.
    pub exists: bool,
    pub r: u64,
    /// `c(dS)` for each `d | r`.
    pub conductors: BTreeMap<u64, Cycle<u64>>,
    /// `lcm_{d | r} d c(dS)`.
    pub lcm_cycle: Cycle<u64>,
    pub local_failures: Vec<u64>,
}

pub fn analyze(s: &FiniteIdSet) -> Result<ModelReport> {
    s.validate()?;
    let ram = compute_r(s);
    let mut conductors = BTreeMap::new();
    let mut lcm = Cycle::new(1, false);
    for d in divisors(ram.r) {
        let c = conductor(s, &s.image(d))?;
        lcm = cycle_lcm(&lcm, &Cycle::new(d * c.finite, c.infinite));
        conductors.insert(d, c);
    }
    let local_failures: Vec<u64> = s
        .special_primes()
        .into_iter()
        .filter(|&p| !local_conditions_hold(s, p))
        .collect();
    Ok(ModelReport {
        exists: local_failures.is_empty(),
        r: ram.r,
        conductors,
        lcm_cycle: lcm,
        local_failures,
    })
}

/// Whether the action of `G x Id` factors through `DR(f)`, tested directly: with
/// `act([a]) = psi_a` on representatives, multiplication by every special prime, every prime
/// dividing `m f`, and every residue of `(Z/lcm(m, f))^*` must be compatible, and the Galois action must be
/// `act` of the Artin class.
pub fn factors_through_dr(s: &FiniteIdSet, f: &Cycle<u64>, bounds: &Bounds) -> Result<bool> {
    let dr = dr_monoid(&Rationals, f, &PrimeSupport::all(), bounds)?;
    Ok(dr_action_maps(s, &dr).is_some())
}

fn dr_action_maps(s: &FiniteIdSet, dr: &DRMonoid<Rationals>) -> Option<Vec<Map>> {
    let act: Vec<Map> = (0..dr.size()).map(|i| s.psi(*dr.rep(i))).collect();
    let n = dr.cycle.finite;
    let mut primes: BTreeSet<u64> = factor(s.m * n).unwrap().primes().collect();
    primes.extend(s.special.keys().copied());
    for &p in &primes {
        let fp = s.psi_prime(p);
        let cp = dr.locate(&p).ok()?;
        for x in 0..dr.size() {
            if compose(&fp, &act[x]) != act[dr.mul(x, cp)] {
                return None;
            }
        }
    }
    let l = s.m.lcm(&n);
    for w in units_mod(l) {
        let w = if w == 0 { 1 } else { w };
        let g = s.galois_of(w);
        let cw = dr.locate(&w).ok()?;
        if *g != act[cw] {
            return None;
        }
        for x in 0..dr.size() {
            if compose(g, &act[x]) != act[dr.mul(x, cw)] {
                return None;
            }
        }
    }
    Some(act)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Decision {
    /// Model exists and `lcm_{d | r} d c(dS)` divides `f`.
    pub verdict: bool,
    /// The direct factorization test through `DR(f)`.
    pub direct: bool,
}

impl Decision {
    pub fn agree(&self) -> bool {
        self.verdict == self.direct
    }
}

pub fn decide_model(s: &FiniteIdSet, f: &Cycle<u64>, bounds: &Bounds) -> Result<Decision> {
    let rep = analyze(s)?;
    Ok(Decision {
        verdict: rep.exists && cycle_divides(&rep.lcm_cycle, f),
        direct: factors_through_dr(s, f, bounds)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MinimalCycle {
    pub cycle: Cycle<u64>,
    /// The lcm formula agrees with exhaustive search over its divisor cycles.
    pub agrees: bool,
    pub candidates_checked: usize,
}

/// The least cycle through whose monoid the action factors, or `None` without a model.
pub fn minimal_cycle(s: &FiniteIdSet, bounds: &Bounds) -> Result<Option<MinimalCycle>> {
    let rep = analyze(s)?;
    if !rep.exists {
        return Ok(None);
    }
    let top = rep.lcm_cycle.clone();
    let mut candidates = Vec::new();
    for d in divisors(top.finite) {
        candidates.push(Cycle::new(d, false));
        if top.infinite {
            candidates.push(Cycle::new(d, true));
        }
    }
    let mut valid = Vec::new();
    let mut agrees = true;
    for c in &candidates {
        let ok = factors_through_dr(s, c, bounds)?;
        agrees &= ok == cycle_divides(&top, c);
        if ok {
            valid.push(c.clone());
        }
    }
    let minimal: Vec<&Cycle<u64>> = valid
        .iter()
        .filter(|c| !valid.iter().any(|o| o != *c && cycle_divides(o, c)))
        .collect();
    agrees &= minimal.len() == 1 && *minimal[0] == top;
    Ok(Some(MinimalCycle {
        cycle: top,
        agrees,
        candidates_checked: candidates.len(),
    }))
}

/// Everything `model-check` reports: the analysis, the least cycle, and optionally the
/// decision at a given cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelCheck {
    pub exists: bool,
    pub minimal_cycle: Option<Cycle<u64>>,
    pub r: u64,
    pub conductors: BTreeMap<u64, Cycle<u64>>,
    pub lcm_cycle: Cycle<u64>,
    pub local_failures: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
}

pub fn model_check(s: &FiniteIdSet, f: Option<&Cycle<u64>>, bounds: &Bounds) -> Result<ModelCheck> {
    let rep = analyze(s)?;
    let minimal = minimal_cycle(s, bounds)?.map(|m| m.cycle);
    let decision = f.map(|f| decide_model(s, f, bounds)).transpose()?;
    Ok(ModelCheck {
        exists: rep.exists,
        minimal_cycle: minimal,
        r: rep.r,
        conductors: rep.conductors,
        lcm_cycle: rep.lcm_cycle,
        local_failures: rep.local_failures,
        decision,
    })
}

/// Checks `dS = gcd(d, r) S` for `d <= dmax`.
pub fn gcd_lemma_holds(s: &FiniteIdSet, dmax: u64) -> bool {
    let r = compute_r(s).r;
    (1..=dmax).all(|d| s.image(d) == s.image(d.gcd(&r)))
}

#[derive(Debug, Clone)]
pub struct DrAction {
    pub monoid: DRMonoid<Rationals>,
    /// Map on `S` for each monoid element.
    pub maps: Vec<Map>,
}

pub fn dr_action(s: &FiniteIdSet, f: &Cycle<u64>, bounds: &Bounds) -> Result<DrAction> {
    s.validate()?;
    let dr = dr_monoid(&Rationals, f, &PrimeSupport::all(), bounds)?;
    match dr_action_maps(s, &dr) {
        Some(maps) => Ok(DrAction { monoid: dr, maps }),
        None => Err(Error::refused(format!("the action does not factor through DR({f})"))),
    }
}

/// Converts a DR monoid acting on itself into a `FiniteIdSet` of modulus `n`.
pub fn free_set_as_id_set(dr: &DRMonoid<Rationals>) -> Result<FiniteIdSet> {
    let n = dr.cycle.finite;
    let size = dr.size();
    let mult_by = |a: u64| -> Result<Map> {
        let c = dr.locate(&a)?;
        Ok((0..size).map(|x| dr.mul(c, x)).collect())
    };
    let mut galois = BTreeMap::new();
    for u in units_mod(n) {
        galois.insert(u, mult_by(if u == 0 { 1 } else { u })?);
    }
    let mut special = BTreeMap::new();
    for p in factor(n)?.primes() {
        special.insert(p, mult_by(p)?);
    }
    FiniteIdSet::new(size, n, galois, special)
}

/// A random union of `mu_k / H` components with `k | m`, sometimes twisted at a prime so that
/// no model exists.
pub fn random_id_set<R: Rng>(rng: &mut R, max_m: u64, max_size: usize) -> FiniteIdSet {
    loop {
        let m = rng.gen_range(1..=max_m);
        let mut acc: Option<FiniteIdSet> = None;
        let parts = rng.gen_range(1..=3);
        for _ in 0..parts {
            let ks = divisors(m);
            let k = *ks.choose(rng).unwrap();
            let units = units_mod(k);
            let h: Vec<u64> = units.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
            let comp = FiniteIdSet::mu_quotient(k, &h);
            acc = Some(match acc {
                None => comp,
                Some(a) => a.union(&comp),
            });
        }
        let mut s = acc.unwrap();
        // keep the modulus m even if every component has smaller level
        if s.m != m {
            s = s.union(&FiniteIdSet::mu(1)).lift_modulus(m);
        }
        if rng.gen_bool(0.35) {
            let primes = [2u64, 3, 5, 7, 11, 13];
            let p = *primes.choose(rng).unwrap();
            let units = units_mod(s.m);
            let v = *units.choose(rng).unwrap();
            s = s.twist(p, v);
        }
        if s.size <= max_size && s.validate().is_ok() {
            return s;
        }
    }
}

impl FiniteIdSet {
    /// The same data viewed at a multiple `m'` of the modulus.
    pub fn lift_modulus(&self, m2: u64) -> FiniteIdSet {
        assert_eq!(m2 % self.m, 0);
        let galois = units_mod(m2).into_iter().map(|u| (u, self.galois_of(u).clone())).collect();
        let mut special = self.special.clone();
        for p in factor(m2).unwrap().primes() {
            special.entry(p).or_insert_with(|| self.galois_of(p).clone());
        }
        FiniteIdSet {
            size: self.size,
            m: m2,
            galois,
            special,
        }
    }
}

// ---- local theory ----

/// A finite group given by its table; element 0 is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteGroup {
    pub table: Vec<Vec<usize>>,
}

impl FiniteGroup {
    pub fn new(table: Vec<Vec<usize>>) -> Result<Self> {
        let n = table.len();
        if n == 0 || table.iter().any(|r| r.len() != n || r.iter().any(|&x| x >= n)) {
            return Err(Error::invalid("group table must be square with entries in range"));
        }
        let g = FiniteGroup { table };
        for a in 0..n {
            if g.mul(0, a) != a || g.mul(a, 0) != a {
                return Err(Error::invalid("element 0 is not the identity"));
            }
            if !(0..n).any(|b| g.mul(a, b) == 0) {
                return Err(Error::invalid(format!("element {a} has no inverse")));
            }
            for b in 0..n {
                for c in 0..n {
                    if g.mul(g.mul(a, b), c) != g.mul(a, g.mul(b, c)) {
                        return Err(Error::invalid("group table is not associative"));
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn cyclic(n: usize) -> Self {
        FiniteGroup {
            table: (0..n).map(|i| (0..n).map(|j| (i + j) % n).collect()).collect(),
        }
    }

    /// The symmetric group on three letters.
    pub fn s3() -> Self {
        let perms: Vec<[usize; 3]> = vec![[0, 1, 2], [1, 2, 0], [2, 0, 1], [1, 0, 2], [0, 2, 1], [2, 1, 0]];
        let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap();
        let table = perms
            .iter()
            .map(|a| perms.iter().map(|b| idx([a[b[0]], a[b[1]], a[b[2]]])).collect())
            .collect();
        FiniteGroup { table }
    }

    pub fn order(&self) -> usize {
        self.table.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        (0..self.order()).find(|&b| self.mul(a, b) == 0).unwrap()
    }

    pub fn is_normal_subgroup(&self, h: &[usize]) -> bool {
        let hs: HashSet<usize> = h.iter().copied().collect();
        hs.contains(&0)
            && h.iter().all(|&a| h.iter().all(|&b| hs.contains(&self.mul(a, self.inverse(b)))))
            && (0..self.order()).all(|g| h.iter().all(|&x| hs.contains(&self.mul(self.mul(g, x), self.inverse(g)))))
    }

    /// Canonical representative (least element) of the coset `gH`.
    pub fn coset_rep(&self, g: usize, h: &[usize]) -> usize {
        h.iter().map(|&x| self.mul(g, x)).min().unwrap()
    }

    pub fn pow(&self, g: usize, e: usize) -> usize {
        (0..e).fold(0, |acc, _| self.mul(acc, g))
    }
}

/// Local data at one prime: a group with an inertia subgroup and a Frobenius coset acting on
/// `S`, and one map `psi` commuting with the action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalIdSet {
    pub size: usize,
    pub group: FiniteGroup,
    pub inertia: Vec<usize>,
    /// Any representative of the Frobenius coset.
    pub frobenius: usize,
    pub action: Vec<Map>,
    pub psi: Map,
}

impl LocalIdSet {
    pub fn new(
        size: usize,
        group: FiniteGroup,
        inertia: Vec<usize>,
        frobenius: usize,
        action: Vec<Map>,
        psi: Map,
    ) -> Result<Self> {
        let s = LocalIdSet {
            size,
            group,
            inertia,
            frobenius,
            action,
            psi,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.group;
        if !g.is_normal_subgroup(&self.inertia) {
            return Err(Error::invalid("inertia is not a normal subgroup"));
        }
        if self.frobenius >= g.order() || self.action.len() != g.order() {
            return Err(Error::invalid("frobenius or action does not match the group"));
        }
        check_map(&self.psi, self.size, "psi")?;
        for (i, f) in self.action.iter().enumerate() {
            check_map(f, self.size, &format!("action of {i}"))?;
            if compose(f, &self.psi) != compose(&self.psi, f) {
                return Err(Error::invalid(format!("psi does not commute with group element {i}")));
            }
        }
        if self.action[0] != identity(self.size) {
            return Err(Error::invalid("identity must act trivially"));
        }
        for a in 0..g.order() {
            for b in 0..g.order() {
                if compose(&self.action[a], &self.action[b]) != self.action[g.mul(a, b)] {
                    return Err(Error::invalid("group action is not a homomorphism"));
                }
            }
        }
        Ok(())
    }
}

/// `S = S_0 | S_1 | ... | S_n` with `S_0` the eventual image of `psi`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelDecomposition {
    /// `levels[0]` is the unramified core `S_0`.
    pub levels: Vec<Vec<usize>>,
}

impl LevelDecomposition {
    pub fn unramified(&self) -> &[usize] {
        &self.levels[0]
    }

    /// The levels partition `0..size`.
    pub fn is_partition(&self, size: usize) -> bool {
        let mut all: Vec<usize> = self.levels.iter().flatten().copied().collect();
        all.sort();
        all == identity(size)
    }
}

pub fn local_unramified_core(s: &LocalIdSet) -> LevelDecomposition {
    let (core, _) = eventual_image(&s.psi);
    let in_core: HashSet<usize> = core.iter().copied().collect();
    let mut level = vec![0usize; s.size];
    for (x, lv) in level.iter_mut().enumerate() {
        let mut y = x;
        while !in_core.contains(&y) {
            y = s.psi[y];
            *lv += 1;
        }
    }
    let top = level.iter().copied().max().unwrap_or(0);
    let levels = (0..=top)
        .map(|i| (0..s.size).filter(|&x| level[x] == i).collect())
        .collect();
    LevelDecomposition { levels }
}

/// `s in S_i` goes to the unique `s' in S_0` with `psi^i s' = psi^i s`.
pub fn local_retraction(s: &LocalIdSet) -> Result<Map> {
    let dec = local_unramified_core(s);
    let core = dec.unramified();
    let image = image_of(&s.psi, core);
    if image != core {
        return Err(Error::invalid("psi is not a bijection on the unramified core"));
    }
    let mut out = identity(s.size);
    for (i, lv) in dec.levels.iter().enumerate() {
        for &x in lv {
            let mut target = x;
            for _ in 0..i {
                target = s.psi[target];
            }
            let pre = core
                .iter()
                .copied()
                .filter(|&y| {
                    let mut z = y;
                    for _ in 0..i {
                        z = s.psi[z];
                    }
                    z == target
                })
                .collect::<Vec<_>>();
            if pre.len() != 1 {
                return Err(Error::invalid("retraction preimage is not unique"));
            }
            out[x] = pre[0];
        }
    }
    Ok(out)
}

/// Inertia acts trivially on `S_0`, and `psi` agrees with Frobenius there.
pub fn local_model_exists(s: &LocalIdSet) -> bool {
    let dec = local_unramified_core(s);
    let core = dec.unramified();
    let inertia_ok = s.inertia.iter().all(|&i| core.iter().all(|&x| s.action[i][x] == x));
    inertia_ok && core.iter().all(|&x| s.action[s.frobenius][x] == s.psi[x])
}

/// The quotient monoid `G_{N,n}`: pairs `(g, a)` with `a < n`, then one coset of `G/I` for
/// everything of degree at least `n`, where `(g, a)` is identified with `g F^a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientMonoid {
    pub n: usize,
    /// `(g, Some(a))` for the graded part, `(coset rep, None)` for the tail.
    pub labels: Vec<(usize, Option<usize>)>,
    pub table: Vec<Vec<usize>>,
}

impl QuotientMonoid {
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn is_monoid(&self) -> bool {
        let n = self.size();
        (0..n).all(|a| self.table[0][a] == a && self.table[a][0] == a)
            && (0..n).all(|a| {
                (0..n).all(|b| (0..n).all(|c| self.table[self.table[a][b]][c] == self.table[a][self.table[b][c]]))
            })
    }
}

pub fn local_quotient_monoid(group: &FiniteGroup, inertia: &[usize], frobenius: usize, n: usize) -> Result<QuotientMonoid> {
    if !group.is_normal_subgroup(inertia) {
        return Err(Error::invalid("inertia is not a normal subgroup"));
    }
    let order = group.order();
    let reps: BTreeSet<usize> = (0..order).map(|g| group.coset_rep(g, inertia)).collect();
    let reps: Vec<usize> = reps.into_iter().collect();
    for &a in &reps {
        for &b in &reps {
            let ab = group.coset_rep(group.mul(a, b), inertia);
            let ba = group.coset_rep(group.mul(b, a), inertia);
            if ab != ba {
                return Err(Error::invalid("G/I must be abelian for the Frobenius twist to be defined"));
            }
        }
    }
    let mut labels: Vec<(usize, Option<usize>)> = Vec::new();
    let mut index: HashMap<(usize, Option<usize>), usize> = HashMap::new();
    for a in 0..n {
        for g in 0..order {
            index.insert((g, Some(a)), labels.len());
            labels.push((g, Some(a)));
        }
    }
    for &c in &reps {
        index.insert((c, None), labels.len());
        labels.push((c, None));
    }
    let normalize = |g: usize, a: usize| -> usize {
        if a < n {
            index[&(g, Some(a))]
        } else {
            let twisted = group.mul(g, group.pow(frobenius, a));
            index[&(group.coset_rep(twisted, inertia), None)]
        }
    };
    // the tail coset c stands for c F^n
    let unpack = |i: usize| -> (usize, usize) {
        match labels[i] {
            (g, Some(a)) => (g, a),
            (c, None) => {
                let finv = group.inverse(group.pow(frobenius, n));
                (group.mul(c, finv), n)
            }
        }
    };
    let size = labels.len();
    let table = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    let (g, a) = unpack(i);
                    let (h, b) = unpack(j);
                    normalize(group.mul(g, h), a + b)
                })
                .collect()
        })
        .collect();
    Ok(QuotientMonoid { n, labels, table })
}

/// Whether `(g, a) -> g psi^a` is well defined on `G_{N,n}` for the given local set.
pub fn local_action_factors(s: &LocalIdSet, n: usize) -> bool {
    let g = &s.group;
    let mut psi_pow = vec![identity(s.size)];
    let horizon = n + s.size + g.order() + 1;
    for i in 0..horizon {
        psi_pow.push(compose(&s.psi, &psi_pow[i]));
    }
    let mut seen: HashMap<usize, Map> = HashMap::new();
    for (a, pa) in psi_pow.iter().enumerate().take(horizon).skip(n) {
        for x in 0..g.order() {
            let key = g.coset_rep(g.mul(x, g.pow(s.frobenius, a)), &s.inertia);
            let map = compose(&s.action[x], pa);
            match seen.get(&key) {
                Some(m) if *m != map => return false,
                Some(_) => {}
                None => {
                    seen.insert(key, map);
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn b() -> Bounds {
        Bounds::default()
    }

    fn mult_set(n: u64, psi: &[(u64, u64)]) -> FiniteIdSet {
        let mut s = FiniteIdSet::mu(n);
        for &(p, k) in psi {
            s.special.insert(p, (0..n).map(|x| (x * k % n) as usize).collect());
        }
        s
    }

    #[test]
    fn r_examples() {
        assert_eq!(compute_r(&FiniteIdSet::mu(1)).r, 1);
        let mu4 = FiniteIdSet::mu(4);
        assert_eq!(compute_r(&mu4).orders[&2], 2);
        let s6 = mult_set(6, &[(2, 2), (3, 3)]);
        assert_eq!(compute_r(&s6).r, 6);
        // all maps bijective
        let bij = FiniteIdSet::mu(5).twist(5, 2).twist(5, 1);
        let bij = FiniteIdSet {
            special: BTreeMap::from([(5, bij.galois_of(2).clone())]),
            ..bij
        };
        assert_eq!(compute_r(&bij).r, 1);
    }

    #[test]
    fn conductor_examples() {
        let p = FiniteIdSet::point();
        assert_eq!(conductor(&p, &[0]).unwrap(), Cycle::new(1, false));
        let mu5 = FiniteIdSet::mu(5);
        let units: Vec<usize> = (1..5).collect();
        assert_eq!(conductor(&mu5, &units).unwrap(), Cycle::new(5, true));
        let q = FiniteIdSet::mu_quotient(5, &[4]);
        let nonzero: Vec<usize> = (0..q.size).filter(|&x| !q.image(5).contains(&x)).collect();
        assert_eq!(conductor(&q, &nonzero).unwrap(), Cycle::new(5, false));
    }

    #[test]
    fn decide_examples() {
        let p = FiniteIdSet::point();
        for f in [Cycle::new(1, false), Cycle::new(6, true), Cycle::new(10, false)] {
            let d = decide_model(&p, &f, &b()).unwrap();
            assert!(d.verdict && d.agree());
        }
        let mu4 = FiniteIdSet::mu(4);
        let yes = decide_model(&mu4, &Cycle::new(4, true), &b()).unwrap();
        assert!(yes.verdict && yes.agree());
        for f in [Cycle::new(4, false), Cycle::new(2, true)] {
            let no = decide_model(&mu4, &f, &b()).unwrap();
            assert!(!no.verdict && no.agree(), "{f}");
        }
    }

    #[test]
    fn minimal_cycles() {
        for n in 3..=12 {
            let m = minimal_cycle(&FiniteIdSet::mu(n), &b()).unwrap().unwrap();
            assert_eq!(m.cycle, Cycle::new(n, true));
            assert!(m.agrees);
        }
        // -1 is 1 mod 1 and 2, so the real place imposes nothing
        assert_eq!(minimal_cycle(&FiniteIdSet::mu(2), &b()).unwrap().unwrap().cycle, Cycle::new(2, false));
        assert_eq!(minimal_cycle(&FiniteIdSet::point(), &b()).unwrap().unwrap().cycle, Cycle::new(1, false));
        let q7 = FiniteIdSet::mu_quotient(7, &[6]);
        let m = minimal_cycle(&q7, &b()).unwrap().unwrap();
        assert_eq!(m.cycle, Cycle::new(7, false));
        assert!(m.agrees);
    }

    #[test]
    fn twisted_sets_have_no_model() {
        // psi_3 = Frobenius times a nontrivial unit on mu_5
        let s = FiniteIdSet::mu(5).twist(3, 4);
        assert!(s.validate().is_ok());
        let rep = analyze(&s).unwrap();
        assert!(!rep.exists);
        assert_eq!(rep.local_failures, vec![3]);
        assert!(minimal_cycle(&s, &b()).unwrap().is_none());
        assert!(!factors_through_dr(&s, &Cycle::new(5, true), &b()).unwrap());
    }

    #[test]
    fn dr_action_examples() {
        let mu6 = FiniteIdSet::mu(6);
        let act = dr_action(&mu6, &Cycle::new(6, true), &b()).unwrap();
        assert_eq!(act.monoid.size(), 6);
        for (i, map) in act.maps.iter().enumerate() {
            let k = *act.monoid.rep(i);
            let expect: Map = (0..6).map(|x| (x * k % 6) as usize).collect();
            assert_eq!(*map, expect);
        }
        assert!(matches!(dr_action(&mu6, &Cycle::new(6, false), &b()), Err(Error::Refused(_))));
        let one = dr_action(&FiniteIdSet::point(), &Cycle::new(1, false), &b()).unwrap();
        assert_eq!(one.maps, vec![vec![0]]);
    }

    #[test]
    fn free_set_round_trip() {
        for n in [1u64, 2, 5, 6, 12] {
            let dr = dr_monoid(&Rationals, &Cycle::new(n, true), &PrimeSupport::all(), &b()).unwrap();
            let s = free_set_as_id_set(&dr).unwrap();
            let act = dr_action(&s, &Cycle::new(n, true), &b()).unwrap();
            for x in 0..dr.size() {
                let expect: Map = (0..dr.size()).map(|y| dr.mul(x, y)).collect();
                assert_eq!(act.maps[x], expect);
            }
        }
    }

    #[test]
    fn local_examples() {
        // S = Z/4, psi = 2*, trivial group
        let triv = FiniteGroup::cyclic(1);
        let s = LocalIdSet::new(4, triv.clone(), vec![0], 0, vec![identity(4)], vec![0, 2, 0, 2]).unwrap();
        let dec = local_unramified_core(&s);
        assert_eq!(dec.levels, vec![vec![0], vec![2], vec![1, 3]]);
        assert!(dec.is_partition(4));
        assert_eq!(local_retraction(&s).unwrap(), vec![0, 0, 0, 0]);

        let bij = LocalIdSet::new(2, triv.clone(), vec![0], 0, vec![identity(2)], vec![1, 0]).unwrap();
        assert_eq!(local_unramified_core(&bij).levels.len(), 1);
        assert_eq!(local_retraction(&bij).unwrap(), identity(2));
        // trivial group but psi a nontrivial bijection: Frobenius is trivial, so no model
        assert!(!local_model_exists(&bij));

        // inertia Z/2 swapping two points fixed by psi
        let c2 = FiniteGroup::cyclic(2);
        let bad = LocalIdSet::new(2, c2.clone(), vec![0, 1], 0, vec![identity(2), vec![1, 0]], identity(2)).unwrap();
        assert!(!local_model_exists(&bad));
        // unramified Z/2 with Frobenius the swap and psi the swap
        let good = LocalIdSet::new(2, c2.clone(), vec![0], 1, vec![identity(2), vec![1, 0]], vec![1, 0]).unwrap();
        assert!(local_model_exists(&good));
    }

    #[test]
    fn quotient_monoid_examples() {
        let c2 = FiniteGroup::cyclic(2);
        let g0 = local_quotient_monoid(&c2, &[0, 1], 0, 0).unwrap();
        assert_eq!(g0.size(), 1);
        let g1 = local_quotient_monoid(&c2, &[0], 0, 1).unwrap();
        assert_eq!(g1.size(), 4);
        assert!(g1.is_monoid());
        for order in 1..=6 {
            let g = FiniteGroup::cyclic(order);
            for n in 0..=3 {
                for f in 0..order {
                    let m = local_quotient_monoid(&g, &[0], f, n).unwrap();
                    assert!(m.is_monoid());
                    assert_eq!(m.size(), n * order + order);
                }
            }
        }
        let s3 = FiniteGroup::s3();
        let a3 = vec![0, 1, 2];
        for n in 0..=3 {
            let m = local_quotient_monoid(&s3, &a3, 3, n).unwrap();
            assert!(m.is_monoid());
            assert_eq!(m.size(), 6 * n + 2);
        }
        assert!(local_quotient_monoid(&s3, &[0], 3, 1).is_err());
    }

    #[test]
    fn model_iff_factors_through_quotient() {
        let c2 = FiniteGroup::cyclic(2);
        let good = LocalIdSet::new(4, c2.clone(), vec![0], 1, vec![identity(4), vec![1, 0, 3, 2]], vec![1, 0, 0, 1]).unwrap();
        let n = local_unramified_core(&good).levels.len() - 1;
        assert!(local_model_exists(&good));
        assert!(local_action_factors(&good, n));
        let bad = LocalIdSet::new(2, c2, vec![0, 1], 0, vec![identity(2), vec![1, 0]], identity(2)).unwrap();
        assert!(!local_action_factors(&bad, 4));
    }

    #[test]
    fn gcd_lemma_on_mu() {
        for n in 1..=24 {
            assert!(gcd_lemma_holds(&FiniteIdSet::mu(n), 60));
        }
    }

    #[test]
    fn randomized_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let s = random_id_set(&mut rng, 24, 12);
            let rep = analyze(&s).unwrap();
            for f in [Cycle::new(rep.lcm_cycle.finite, true), Cycle::new(rep.lcm_cycle.finite, false), Cycle::new(s.m, true)] {
                let d = decide_model(&s, &f, &b()).unwrap();
                assert!(d.agree(), "{s:?} {f} {d:?} {rep:?}");
            }
            if rep.exists {
                assert_eq!(rep.lcm_cycle.finite % rep.r, 0);
                assert!(gcd_lemma_holds(&s, 48));
            }
        }
    }

    proptest! {
        #[test]
        fn retraction_is_equivariant(k in 1usize..6, seed: u64) {
            // S = Z/k x Z/4 with psi = (rotate, double), group Z/k rotating
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rot = rng.gen_range(0..k);
            let size = 4 * k;
            let enc = |a: usize, b: usize| a * 4 + b;
            let psi: Map = (0..size).map(|x| enc((x / 4 + rot) % k, (x % 4) * 2 % 4)).collect();
            let g = FiniteGroup::cyclic(k);
            let action: Vec<Map> = (0..k).map(|t| (0..size).map(|x| enc((x / 4 + t) % k, x % 4)).collect()).collect();
            let s = LocalIdSet::new(size, g, vec![0], rot, action.clone(), psi.clone()).unwrap();
            let ret = local_retraction(&s).unwrap();
            let dec = local_unramified_core(&s);
            for &x in dec.unramified() {
                prop_assert_eq!(ret[x], x);
            }
            for x in 0..size {
                prop_assert_eq!(ret[psi[x]], psi[ret[x]]);
                for a in &action {
                    prop_assert_eq!(ret[a[x]], a[ret[x]]);
                }
            }
            prop_assert!(local_model_exists(&s));
        }
    }
}
