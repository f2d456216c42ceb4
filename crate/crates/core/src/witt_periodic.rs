//! Big Witt vectors over torsion-free rings `Z[x]/(h)` with declared commuting Frobenius
//! lifts, ghost components, Dwork congruences, and periodic Witt lattices over Q.
//!
//! Elements of the coefficient ring are coordinate vectors over the power basis
//! `1, x, ..., x^(d-1)`, with rational entries so that the inverse ghost map can be
//! computed before integrality is decided.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::exact_arith::{divisors, factor, is_prime, lattice_index, valuation, IntMatrix, LatticeIndex};
use crate::lambda_poly::IntPoly;
use crate::ray_class::{is_supported, Cycle, FEquivalence, PrimeSupport, Rationals};
use crate::{Error, Result};

pub type Elem = Vec<BigRational>;

fn rat(x: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(x.into())
}

/// How `phi_p` acts on the generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrobeniusLifts {
    /// `phi_p = id`, only meaningful for `Z`.
    Identity,
    /// `phi_p(x) = x^p` for every prime.
    Power,
    /// `phi_p(x) = x^p` for primes not dividing the given integer, none at the others.
    PowerCoprime(u64),
    /// Explicit images of the generator for finitely many primes.
    Explicit(BTreeMap<u64, IntPoly>),
}

impl FromStr for FrobeniusLifts {
    type Err = Error;

    /// `id`, `p:x^p`, `p:x^p/<n>` for primes prime to `n`, or `2=x^2,3=x^3+3x` explicitly.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "id" {
            return Ok(FrobeniusLifts::Identity);
        }
        if s == "p:x^p" {
            return Ok(FrobeniusLifts::Power);
        }
        if let Some(n) = s.strip_prefix("p:x^p/") {
            let n = n.parse().map_err(|_| Error::invalid(format!("bad modulus in {s:?}")))?;
            return Ok(FrobeniusLifts::PowerCoprime(n));
        }
        let mut m = BTreeMap::new();
        for item in s.split(',') {
            let (p, img) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("cannot parse Frobenius lifts {s:?}")))?;
            let p: u64 = p.trim().parse().map_err(|_| Error::invalid(format!("bad prime {p:?}")))?;
            m.insert(p, IntPoly::parse(img, "x")?);
        }
        Ok(FrobeniusLifts::Explicit(m))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RingKind {
    Integers,
    /// `Z[x]/(h)` with `h` monic.
    Quotient(IntPoly),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffRing {
    pub kind: RingKind,
    pub lifts: FrobeniusLifts,
    modulus: IntPoly,
}

/// `Phi_n` over Z.
pub fn cyclotomic_poly(n: u64) -> IntPoly {
    let mut p = IntPoly::monomial(1, n as usize).sub(&IntPoly::one());
    for d in divisors(n) {
        if d < n {
            p = p.div_exact(&cyclotomic_poly(d)).expect("cyclotomic factors divide");
        }
    }
    p
}

impl CoeffRing {
    pub fn integers() -> Self {
        CoeffRing {
            kind: RingKind::Integers,
            lifts: FrobeniusLifts::Identity,
            modulus: IntPoly::var(),
        }
    }

    /// `Z[x]/(h)`; the lifts are checked on the generator for primes up to `check_up_to`.
    pub fn quotient(h: IntPoly, lifts: FrobeniusLifts, check_up_to: u64) -> Result<Self> {
        if !h.is_monic() || h.degree().unwrap_or(0) == 0 {
            return Err(Error::invalid("modulus must be monic of positive degree"));
        }
        if lifts == FrobeniusLifts::Identity {
            return Err(Error::invalid("identity lifts are only declared for Z"));
        }
        let ring = CoeffRing {
            kind: RingKind::Quotient(h.clone()),
            lifts,
            modulus: h,
        };
        ring.validate_lifts(check_up_to)?;
        Ok(ring)
    }

    pub fn group_ring(n: u64) -> Self {
        let h = IntPoly::monomial(1, n as usize).sub(&IntPoly::one());
        Self::quotient(h, FrobeniusLifts::Power, 13).expect("x -> x^p is a lift on Z[C_n]")
    }

    /// `Z[zeta_n] = Z[x]/(Phi_n)`. Primes dividing `n` ramify and carry no Frobenius lift.
    pub fn cyclotomic(n: u64) -> Self {
        Self::quotient(cyclotomic_poly(n), FrobeniusLifts::PowerCoprime(n), 13)
            .expect("x -> x^p is a lift on Z[zeta_n] for p prime to n")
    }

    /// `Z`, `cyclotomic:<n>`, `group:<n>`, or a monic polynomial in `x` with the given lifts.
    pub fn parse(ring: &str, lifts: &str, check_up_to: u64) -> Result<Self> {
        let ring = ring.trim();
        let num = |t: &str| -> Result<u64> {
            match t.parse::<u64>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::invalid(format!("bad ring size {t:?}"))),
            }
        };
        if ring == "Z" {
            return Ok(Self::integers());
        }
        if let Some(n) = ring.strip_prefix("cyclotomic:") {
            return Ok(Self::cyclotomic(num(n)?));
        }
        if let Some(n) = ring.strip_prefix("group:") {
            return Ok(Self::group_ring(num(n)?));
        }
        Self::quotient(IntPoly::parse(ring, "x")?, lifts.parse()?, check_up_to)
    }

    /// An integral element written as a polynomial in `x`.
    pub fn parse_elem(&self, s: &str) -> Result<Elem> {
        let p = IntPoly::parse(s, "x")?;
        Ok(match self.kind {
            RingKind::Integers if p.degree().unwrap_or(0) > 0 => {
                return Err(Error::invalid(format!("{s:?} is not an integer")));
            }
            _ => self.from_poly(&p),
        })
    }

    pub fn has_lift(&self, p: u64) -> bool {
        match &self.lifts {
            FrobeniusLifts::Identity | FrobeniusLifts::Power => true,
            FrobeniusLifts::PowerCoprime(m) => m % p != 0,
            FrobeniusLifts::Explicit(m) => m.contains_key(&p),
        }
    }

    pub fn rank(&self) -> usize {
        self.modulus.degree().unwrap()
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            RingKind::Integers => "Z".into(),
            RingKind::Quotient(h) => format!("Z[x]/({})", h.render("x")),
        }
    }

    /// Checks `phi_p(x) = x^p mod p`, that `phi_p` preserves `(h)`, and commutation, for
    /// declared primes up to `bound`.
    pub fn validate_lifts(&self, bound: u64) -> Result<()> {
        let primes: Vec<u64> = match &self.lifts {
            FrobeniusLifts::Explicit(m) => m.keys().copied().collect(),
            _ => crate::exact_arith::primes_up_to(bound)
                .into_iter()
                .filter(|&p| self.has_lift(p))
                .collect(),
        };
        let x = self.generator();
        for &p in &primes {
            if !is_prime(p) {
                return Err(Error::invalid(format!("lift declared at non-prime {p}")));
            }
            let img = self.phi_generator(p)?;
            let diff = self.sub(&img, &self.pow(&x, p as u32));
            if !self.divisible(&diff, &BigInt::from(p)) {
                return Err(Error::invalid(format!("phi_{p}(x) is not x^{p} mod {p}")));
            }
            if let RingKind::Quotient(h) = &self.kind {
                let h_img = self.eval_poly(h, &img);
                if !self.is_zero(&h_img) {
                    return Err(Error::invalid(format!("phi_{p} does not preserve the modulus")));
                }
            }
        }
        for &p in &primes {
            for &q in &primes {
                let pq = self.phi(p, &self.phi_generator(q)?)?;
                let qp = self.phi(q, &self.phi_generator(p)?)?;
                if pq != qp {
                    return Err(Error::invalid(format!("phi_{p} and phi_{q} do not commute")));
                }
            }
        }
        Ok(())
    }

    pub fn zero(&self) -> Elem {
        vec![BigRational::zero(); self.rank()]
    }

    pub fn from_int(&self, k: impl Into<BigInt>) -> Elem {
        let mut z = self.zero();
        z[0] = rat(k);
        z
    }

    pub fn one(&self) -> Elem {
        self.from_int(1)
    }

    pub fn generator(&self) -> Elem {
        match self.kind {
            RingKind::Integers => self.zero(),
            _ => self.reduce(vec![BigRational::zero(), BigRational::one()]),
        }
    }

    /// Integer coordinates, padded or reduced to the ring.
    pub fn from_coords(&self, c: &[BigInt]) -> Elem {
        self.reduce(c.iter().map(|x| rat(x.clone())).collect())
    }

    pub fn from_poly(&self, p: &IntPoly) -> Elem {
        self.from_coords(p.coeffs())
    }

    /// Reduces a rational polynomial modulo the monic modulus.
    pub fn reduce(&self, mut c: Vec<BigRational>) -> Elem {
        let d = self.rank();
        let h = self.modulus.coeffs();
        while c.len() > d {
            let top = c.pop().unwrap();
            if top.is_zero() {
                continue;
            }
            let shift = c.len() - d;
            for (i, hi) in h.iter().enumerate().take(d) {
                c[shift + i] -= &top * rat(hi.clone());
            }
        }
        c.resize(d, BigRational::zero());
        c
    }

    pub fn add(&self, a: &Elem, b: &Elem) -> Elem {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    pub fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn scale(&self, a: &Elem, k: &BigRational) -> Elem {
        a.iter().map(|x| x * k).collect()
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        self.reduce(out)
    }

    pub fn pow(&self, a: &Elem, e: u32) -> Elem {
        let mut out = self.one();
        let mut base = a.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                out = self.mul(&out, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        out
    }

    pub fn is_zero(&self, a: &Elem) -> bool {
        a.iter().all(Zero::is_zero)
    }

    pub fn is_integral(&self, a: &Elem) -> bool {
        a.iter().all(|x| x.is_integer())
    }

    /// `a in kR`, for integral `a`.
    pub fn divisible(&self, a: &Elem, k: &BigInt) -> bool {
        a.iter().all(|x| x.is_integer() && x.to_integer().is_multiple_of(k))
    }

    fn eval_poly(&self, p: &IntPoly, at: &Elem) -> Elem {
        p.coeffs()
            .iter()
            .rev()
            .fold(self.zero(), |acc, c| self.add(&self.mul(&acc, at), &self.from_int(c.clone())))
    }

    pub fn phi_generator(&self, p: u64) -> Result<Elem> {
        match &self.lifts {
            FrobeniusLifts::Identity => Ok(self.generator()),
            FrobeniusLifts::Power => Ok(self.pow(&self.generator(), p as u32)),
            FrobeniusLifts::PowerCoprime(m) if m % p != 0 => Ok(self.pow(&self.generator(), p as u32)),
            FrobeniusLifts::PowerCoprime(_) => Err(Error::refused(format!("no Frobenius lift at the ramified prime {p}"))),
            FrobeniusLifts::Explicit(m) => m
                .get(&p)
                .map(|img| self.from_poly(img))
                .ok_or_else(|| Error::refused(format!("no Frobenius lift declared at {p}"))),
        }
    }

    /// `phi_p(a)`.
    pub fn phi(&self, p: u64, a: &Elem) -> Result<Elem> {
        if self.lifts == FrobeniusLifts::Identity {
            return Ok(a.clone());
        }
        let g = self.phi_generator(p)?;
        let mut acc = self.zero();
        let mut power = self.one();
        for c in a {
            acc = self.add(&acc, &self.scale(&power, c));
            power = self.mul(&power, &g);
        }
        Ok(acc)
    }

    /// Integer matrix of a ring endomorphism sending `x` to `img`, columns indexed by the
    /// source basis.
    fn endo_matrix(&self, img: &Elem) -> Vec<Vec<BigInt>> {
        let d = self.rank();
        let mut cols = Vec::with_capacity(d);
        let mut power = self.one();
        for _ in 0..d {
            cols.push(power.iter().map(|x| x.to_integer()).collect::<Vec<_>>());
            power = self.mul(&power, img);
        }
        (0..d).map(|j| (0..d).map(|i| cols[i][j].clone()).collect()).collect()
    }

    pub fn render(&self, a: &Elem) -> String {
        let mut terms = Vec::new();
        for (i, c) in a.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mono = match i {
                0 => String::new(),
                1 => "x".into(),
                _ => format!("x^{i}"),
            };
            let neg = c.is_negative();
            let mag = c.abs();
            let coef = if i > 0 && mag.is_one() { String::new() } else { mag.to_string() };
            let body = if coef.contains('/') && i > 0 {
                format!("({coef}){mono}")
            } else {
                format!("{coef}{mono}")
            };
            terms.push((neg, body));
        }
        if terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (k, (neg, body)) in terms.into_iter().enumerate() {
            if k == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            out.push_str(&body);
        }
        out
    }
}

/// A finite divisor-closed set of indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationSet {
    elems: Vec<u64>,
}

impl TruncationSet {
    pub fn new(elems: impl IntoIterator<Item = u64>) -> Result<Self> {
        let set: BTreeSet<u64> = elems.into_iter().collect();
        if set.contains(&0) {
            return Err(Error::invalid("truncation indices must be positive"));
        }
        for &n in &set {
            for d in divisors(n) {
                if !set.contains(&d) {
                    return Err(Error::invalid(format!("{d} divides {n} but is missing")));
                }
            }
        }
        Ok(TruncationSet {
            elems: set.into_iter().collect(),
        })
    }

    pub fn divisors_of(n: u64) -> Self {
        TruncationSet { elems: divisors(n) }
    }

    pub fn up_to(b: u64) -> Self {
        TruncationSet { elems: (1..=b).collect() }
    }

    pub fn elems(&self) -> &[u64] {
        &self.elems
    }

    pub fn contains(&self, n: u64) -> bool {
        self.elems.binary_search(&n).is_ok()
    }

    /// `{n : a n in T}`.
    pub fn shrink(&self, a: u64) -> Self {
        TruncationSet {
            elems: self.elems.iter().filter(|&&n| n % a == 0).map(|&n| n / a).collect(),
        }
    }
}

impl FromStr for TruncationSet {
    type Err = Error;

    /// `div:<n>` for the divisors of `n`, `up:<b>` for `1..b`, or an explicit list.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| -> Result<u64> {
            match t.trim().parse::<u64>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::invalid(format!("bad truncation index {t:?}"))),
            }
        };
        if let Some(n) = s.strip_prefix("div:") {
            return Ok(Self::divisors_of(num(n)?));
        }
        if let Some(b) = s.strip_prefix("up:") {
            return Ok(Self::up_to(num(b)?));
        }
        Self::new(s.split(',').map(num).collect::<Result<Vec<_>>>()?)
    }
}

impl fmt::Display for TruncationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.elems.iter().map(u64::to_string).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhostVector {
    pub ring: CoeffRing,
    pub trunc: TruncationSet,
    pub comps: BTreeMap<u64, Elem>,
}

impl GhostVector {
    pub fn new(ring: CoeffRing, trunc: TruncationSet, comps: BTreeMap<u64, Elem>) -> Result<Self> {
        let keys: Vec<u64> = comps.keys().copied().collect();
        if keys != trunc.elems() {
            return Err(Error::invalid("ghost components must match the truncation set"));
        }
        if comps.values().any(|e| e.len() != ring.rank() || !ring.is_integral(e)) {
            return Err(Error::invalid("ghost components must be integral ring elements"));
        }
        Ok(GhostVector { ring, trunc, comps })
    }

    /// Integer ghost vector over Z.
    pub fn over_integers(trunc: TruncationSet, values: &[i64]) -> Result<Self> {
        let ring = CoeffRing::integers();
        if values.len() != trunc.elems().len() {
            return Err(Error::invalid("one value per truncation index is required"));
        }
        let comps = trunc.elems().iter().zip(values).map(|(&n, &v)| (n, ring.from_int(v))).collect();
        Self::new(ring, trunc, comps)
    }

    pub fn get(&self, n: u64) -> &Elem {
        &self.comps[&n]
    }

    pub fn add(&self, o: &GhostVector) -> GhostVector {
        self.zip(o, |a, b| self.ring.add(a, b))
    }

    pub fn mul(&self, o: &GhostVector) -> GhostVector {
        self.zip(o, |a, b| self.ring.mul(a, b))
    }

    fn zip(&self, o: &GhostVector, f: impl Fn(&Elem, &Elem) -> Elem) -> GhostVector {
        GhostVector {
            ring: self.ring.clone(),
            trunc: self.trunc.clone(),
            comps: self.comps.iter().map(|(n, a)| (*n, f(a, &o.comps[n]))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WittCoords {
    pub ring: CoeffRing,
    pub trunc: TruncationSet,
    pub coords: BTreeMap<u64, Elem>,
}

impl WittCoords {
    pub fn new(ring: CoeffRing, trunc: TruncationSet, coords: BTreeMap<u64, Elem>) -> Result<Self> {
        let keys: Vec<u64> = coords.keys().copied().collect();
        if keys != trunc.elems() || coords.values().any(|e| e.len() != ring.rank()) {
            return Err(Error::invalid("Witt coordinates must match the truncation set"));
        }
        Ok(WittCoords { ring, trunc, coords })
    }

    pub fn is_integral(&self) -> bool {
        self.coords.values().all(|e| self.ring.is_integral(e))
    }
}

/// `g_n = sum_(d | n) d w_d^(n/d)`.
pub fn ghost_from_witt(w: &WittCoords) -> GhostVector {
    let r = &w.ring;
    let comps = w
        .trunc
        .elems()
        .iter()
        .map(|&n| {
            let g = divisors(n).into_iter().fold(r.zero(), |acc, d| {
                let term = r.scale(&r.pow(&w.coords[&d], (n / d) as u32), &rat(d));
                r.add(&acc, &term)
            });
            (n, g)
        })
        .collect();
    GhostVector {
        ring: w.ring.clone(),
        trunc: w.trunc.clone(),
        comps,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WittSolve {
    pub coords: WittCoords,
    pub integral: BTreeMap<u64, bool>,
}

impl WittSolve {
    pub fn all_integral(&self) -> bool {
        self.integral.values().all(|&b| b)
    }
}

/// Solves the ghost equations over the rationals and flags integral coordinates.
pub fn witt_from_ghost(g: &GhostVector) -> WittSolve {
    let r = &g.ring;
    let mut coords: BTreeMap<u64, Elem> = BTreeMap::new();
    for &n in g.trunc.elems() {
        let rest = divisors(n).into_iter().filter(|&d| d < n).fold(r.zero(), |acc, d| {
            r.add(&acc, &r.scale(&r.pow(&coords[&d], (n / d) as u32), &rat(d)))
        });
        let w = r.scale(&r.sub(&g.comps[&n], &rest), &BigRational::new(BigInt::one(), BigInt::from(n)));
        coords.insert(n, w);
    }
    let integral = coords.iter().map(|(n, e)| (*n, r.is_integral(e))).collect();
    WittSolve {
        coords: WittCoords {
            ring: g.ring.clone(),
            trunc: g.trunc.clone(),
            coords,
        },
        integral,
    }
}

/// `g_(pn) = phi_p(g_n) mod p^(v_p(n) + 1)` whenever `pn` is in the truncation set.
pub fn dwork_check(g: &GhostVector) -> Result<bool> {
    let r = &g.ring;
    for &m in g.trunc.elems() {
        for p in factor(m)?.primes() {
            let n = m / p;
            let q = BigInt::from(p).pow(valuation(n, p) + 1);
            let diff = r.sub(&g.comps[&m], &r.phi(p, &g.comps[&n])?);
            if !r.divisible(&diff, &q) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn teichmuller(ring: &CoeffRing, r: &Elem, trunc: &TruncationSet) -> WittCoords {
    let coords = trunc
        .elems()
        .iter()
        .map(|&n| (n, if n == 1 { r.clone() } else { ring.zero() }))
        .collect();
    WittCoords {
        ring: ring.clone(),
        trunc: trunc.clone(),
        coords,
    }
}

/// Witt sum, computed on the ghost side.
pub fn witt_add(a: &WittCoords, b: &WittCoords) -> WittCoords {
    witt_from_ghost(&ghost_from_witt(a).add(&ghost_from_witt(b))).coords
}

/// Witt product, computed on the ghost side.
pub fn witt_mul(a: &WittCoords, b: &WittCoords) -> WittCoords {
    witt_from_ghost(&ghost_from_witt(a).mul(&ghost_from_witt(b))).coords
}

/// `(psi_a g)_n = g_(an)` on the shrunken truncation set.
pub fn ghost_shift(g: &GhostVector, a: u64) -> GhostVector {
    let trunc = g.trunc.shrink(a);
    let comps = trunc.elems().iter().map(|&n| (n, g.comps[&(a * n)].clone())).collect();
    GhostVector {
        ring: g.ring.clone(),
        trunc,
        comps,
    }
}

/// Components agree on `f`-equivalent indices of the truncation set.
pub fn is_f_periodic(g: &GhostVector, f: &Cycle<u64>, support: &PrimeSupport<u64>) -> bool {
    let mut eq = FEquivalence::new(&Rationals, f);
    let mut seen: BTreeMap<(u64, u64, u64), &Elem> = BTreeMap::new();
    for &n in g.trunc.elems() {
        if !is_supported(&Rationals, support, &n) {
            continue;
        }
        let (d, key) = eq.class(&n);
        let k = (d, key.class as u64, key.code);
        match seen.get(&k) {
            Some(v) if **v != g.comps[&n] => return false,
            Some(_) => {}
            None => {
                seen.insert(k, &g.comps[&n]);
            }
        }
    }
    true
}

/// `psi_p(g) - g^p` is `p` times a Dwork-valid vector on the shrunken truncation set.
pub fn frobenius_congruence_check(g: &GhostVector, p: u64) -> Result<bool> {
    if !is_prime(p) {
        return Err(Error::invalid(format!("{p} is not prime")));
    }
    if !dwork_check(g)? {
        return Err(Error::refused("input does not satisfy the Dwork congruences"));
    }
    let r = &g.ring;
    let shifted = ghost_shift(g, p);
    let pb = BigInt::from(p);
    let mut comps = BTreeMap::new();
    for (&n, s) in &shifted.comps {
        let d = r.sub(s, &r.pow(&g.comps[&n], p as u32));
        if !r.divisible(&d, &pb) {
            return Ok(false);
        }
        comps.insert(n, r.scale(&d, &BigRational::new(BigInt::one(), pb.clone())));
    }
    let quotient = GhostVector {
        ring: g.ring.clone(),
        trunc: shifted.trunc,
        comps,
    };
    dwork_check(&quotient)
}

/// Periodic ghost tuples indexed by the classes `Z/n` of `DR(n inf)` over Q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicLattice {
    pub n: u64,
    pub bound: u64,
    /// Rows are ghost tuples, flattened class-major over the ring basis.
    pub basis: IntMatrix,
    /// The lattice at `bound / 2` is the same.
    pub stable: bool,
}

impl PeriodicLattice {
    pub fn rank(&self) -> usize {
        self.basis.rows()
    }
}

/// Linear constraint `x_a - phi(x_b) in q R` with `q = 0` meaning equality.
struct Constraint {
    a: usize,
    b: usize,
    phi: Vec<Vec<BigInt>>,
    q: BigInt,
}

fn lift_level(ring: &CoeffRing) -> Result<u64> {
    match (&ring.kind, &ring.lifts) {
        (RingKind::Integers, _) => Ok(1),
        (RingKind::Quotient(h), FrobeniusLifts::Power | FrobeniusLifts::PowerCoprime(_)) => {
            // x^N = 1 for the least such N, so x^p depends on p mod N
            let x = ring.generator();
            let mut power = x.clone();
            for k in 1..=4 * h.degree().unwrap() as u64 + 8 {
                if power == ring.one() {
                    return Ok(k);
                }
                power = ring.mul(&power, &x);
            }
            Err(Error::invalid("periodic lattices need x to be a root of unity in the ring"))
        }
        _ => Err(Error::invalid("periodic lattices need identity or power-map Frobenius lifts")),
    }
}

fn power_matrix(ring: &CoeffRing, e: u64) -> Vec<Vec<BigInt>> {
    let img = match ring.kind {
        RingKind::Integers => ring.generator(),
        _ => ring.pow(&ring.generator(), e as u32),
    };
    ring.endo_matrix(&img)
}

struct Constraints {
    equal: Vec<Constraint>,
    bounded: Vec<Constraint>,
    /// Primes dividing the level that have no Frobenius lift.
    unlifted: Vec<u64>,
}

fn constraints(n: u64, ring: &CoeffRing, bound: u64) -> Result<Constraints> {
    let level = lift_level(ring)?;
    let l = n.lcm(&level);
    let mut equal = Vec::new();
    // infinitely many primes in each unit class mod l give congruences mod arbitrarily large p
    for r in crate::exact_arith::units_mod(l.max(2)) {
        if l == 1 && r != 1 {
            continue;
        }
        let phi = power_matrix(ring, r);
        for c in 0..n {
            equal.push(Constraint {
                a: ((r * c) % n) as usize,
                b: c as usize,
                phi: phi.clone(),
                q: BigInt::zero(),
            });
        }
    }
    let unbounded = |p: u64, c: u64| c == 0 || valuation(c, p) >= valuation(n, p);
    let l_primes: Vec<u64> = factor(l)?.primes().collect();
    let unlifted: Vec<u64> = l_primes.iter().copied().filter(|&p| !ring.has_lift(p)).collect();
    for &p in l_primes.iter().filter(|&&p| ring.has_lift(p)) {
        let phi = power_matrix(ring, p);
        for c in 0..n {
            if unbounded(p, c) {
                // v_p(k) is unbounded on the class of c
                equal.push(Constraint {
                    a: ((p * c) % n) as usize,
                    b: c as usize,
                    phi: phi.clone(),
                    q: BigInt::zero(),
                });
            }
        }
    }
    let mut strongest: BTreeMap<(u64, u64), u32> = BTreeMap::new();
    for p in crate::exact_arith::primes_up_to(bound) {
        for k in 1..=bound / p {
            let c = k % n;
            if !l_primes.contains(&p) || unlifted.contains(&p) || unbounded(p, c) {
                continue;
            }
            let e = valuation(k, p) + 1;
            let slot = strongest.entry((p, c)).or_insert(0);
            *slot = (*slot).max(e);
        }
    }
    let bounded = strongest
        .into_iter()
        .map(|((p, c), e)| Constraint {
            a: ((p * c) % n) as usize,
            b: c as usize,
            phi: power_matrix(ring, p),
            q: BigInt::from(p).pow(e),
        })
        .collect();
    Ok(Constraints {
        equal,
        bounded,
        unlifted,
    })
}

/// Scalar linear forms of a constraint on the flattened unknowns.
fn forms(c: &Constraint, d: usize, total: usize) -> Vec<Vec<BigInt>> {
    (0..d)
        .map(|j| {
            let mut v = vec![BigInt::zero(); total];
            v[c.a * d + j] += 1;
            for i in 0..d {
                v[c.b * d + i] -= &c.phi[j][i];
            }
            v
        })
        .collect()
}

fn solve_lattice(n: u64, ring: &CoeffRing, bound: u64) -> Result<IntMatrix> {
    let (linear, unlifted) = solve_linear(n, ring, bound)?;
    if unlifted {
        refine_by_integrality(n, ring, bound, &linear)
    } else {
        Ok(linear)
    }
}

/// The lattice cut out by the equalities and by the congruences at primes with lifts only.
pub fn linear_witt_lattice(n: u64, ring: &CoeffRing, bound: u64) -> Result<IntMatrix> {
    Ok(solve_linear(n, ring, bound)?.0)
}

fn solve_linear(n: u64, ring: &CoeffRing, bound: u64) -> Result<(IntMatrix, bool)> {
    let d = ring.rank();
    let total = n as usize * d;
    let Constraints {
        equal,
        bounded,
        unlifted,
    } = constraints(n, ring, bound)?;
    let eq_forms: Vec<Vec<BigInt>> = equal.iter().flat_map(|c| forms(c, d, total)).collect();
    let eq_basis = if eq_forms.is_empty() {
        IntMatrix::identity(total)
    } else {
        IntMatrix::from_rows(total, &eq_forms).transpose().left_kernel()
    };
    let r = eq_basis.rows();
    let mut cols: Vec<(Vec<BigInt>, BigInt)> = Vec::new();
    for c in &bounded {
        for f in forms(c, d, total) {
            let vals: Vec<BigInt> = (0..r)
                .map(|i| eq_basis.row(i).iter().zip(&f).map(|(a, b)| a * b).sum())
                .collect();
            if vals.iter().all(|v| v.is_multiple_of(&c.q)) {
                continue;
            }
            cols.push((vals, c.q.clone()));
        }
    }
    let linear = if cols.is_empty() {
        eq_basis.hnf().nonzero_rows()
    } else {
        congruence_lattice(&eq_basis, &cols)?
    };
    Ok((linear, !unlifted.is_empty()))
}

fn congruence_lattice(eq_basis: &IntMatrix, cols: &[(Vec<BigInt>, BigInt)]) -> Result<IntMatrix> {
    let r = eq_basis.rows();
    let s = cols.len();
    let mut rows = vec![vec![BigInt::zero(); s]; r + s];
    for (j, (vals, q)) in cols.iter().enumerate() {
        for i in 0..r {
            rows[i][j] = vals[i].clone();
        }
        rows[r + j][j] = q.clone();
    }
    let kernel = IntMatrix::from_rows(s, &rows).left_kernel();
    let coeffs: Vec<Vec<BigInt>> = (0..kernel.rows()).map(|i| kernel.row(i)[..r].to_vec()).collect();
    let y = IntMatrix::from_rows(r, &coeffs);
    Ok(y.mul(eq_basis)?.hnf().nonzero_rows())
}

/// At ramified primes the congruences are not linear, so the Teichmuller image (known to be
/// integral) is used as a floor and each coset of it in the linear lattice is tested by
/// solving for Witt coordinates up to the bound. Passing cosets form a group.
fn refine_by_integrality(n: u64, ring: &CoeffRing, bound: u64, linear: &IntMatrix) -> Result<IntMatrix> {
    let seed = group_ring_image(n, ring).hnf().nonzero_rows();
    let coords = linear.coordinates_of(&seed)?.hnf().nonzero_rows();
    if coords.rows() != linear.rows() {
        return Err(Error::invalid("the Teichmuller image does not have full rank in the linear lattice"));
    }
    let k = coords.rows();
    let diag: Vec<u64> = (0..k)
        .map(|i| u64::try_from(coords.get(i, i).clone()).map_err(|_| Error::invalid("coset count overflow")))
        .collect::<Result<_>>()?;
    let count: u64 = diag.iter().product();
    if count > 1 << 16 {
        return Err(Error::TooLarge {
            what: "cosets of the Teichmuller image".into(),
            needed: count,
            limit: 1 << 16,
        });
    }
    let trunc = TruncationSet::up_to(bound);
    let d = ring.rank();
    let mut passing = seed.to_rows();
    let mut digits = vec![0u64; k];
    for _ in 1..count {
        // odometer over the box prod [0, d_i)
        for (i, digit) in digits.iter_mut().enumerate() {
            *digit += 1;
            if *digit < diag[i] {
                break;
            }
            *digit = 0;
        }
        let v: Vec<BigInt> = (0..linear.cols())
            .map(|j| (0..k).map(|i| BigInt::from(digits[i]) * linear.get(i, j)).sum())
            .collect();
        let comps = trunc
            .elems()
            .iter()
            .map(|&m| {
                let c = (m % n) as usize;
                (m, ring.from_coords(&v[c * d..(c + 1) * d]))
            })
            .collect();
        let g = GhostVector {
            ring: ring.clone(),
            trunc: trunc.clone(),
            comps,
        };
        if witt_integral(&g) {
            passing.push(v);
        }
    }
    Ok(IntMatrix::from_rows(linear.cols(), &passing).hnf().nonzero_rows())
}

/// Whether every Witt coordinate is integral, stopping at the first failure.
pub fn witt_integral(g: &GhostVector) -> bool {
    let r = &g.ring;
    let mut coords: BTreeMap<u64, Elem> = BTreeMap::new();
    for &n in g.trunc.elems() {
        let rest = divisors(n).into_iter().filter(|&d| d < n).fold(r.zero(), |acc, d| {
            r.add(&acc, &r.scale(&r.pow(&coords[&d], (n / d) as u32), &rat(d)))
        });
        let w = r.scale(&r.sub(&g.comps[&n], &rest), &BigRational::new(BigInt::one(), BigInt::from(n)));
        if !r.is_integral(&w) {
            return false;
        }
        coords.insert(n, w);
    }
    true
}

/// The lattice of `n inf`-periodic ghost tuples satisfying the Dwork congruences, with the
/// unbounded congruence families turned into equalities and the rest scanned up to `bound`.
pub fn periodic_witt_lattice(n: u64, ring: &CoeffRing, bound: u64) -> Result<PeriodicLattice> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let basis = solve_lattice(n, ring, bound)?;
    let half = solve_lattice(n, ring, bound / 2)?;
    Ok(PeriodicLattice {
        n,
        bound,
        stable: basis == half,
        basis,
    })
}

/// Ghost tuples of `x^i` under `x -> [x]`: class `c` gets `x^(i c)`.
pub fn group_ring_image(n: u64, ring: &CoeffRing) -> IntMatrix {
    let x = ring.generator();
    let rows: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            (0..n)
                .flat_map(|c| ring.pow(&x, (i * c) as u32).into_iter().map(|v| v.to_integer()))
                .collect()
        })
        .collect();
    IntMatrix::from_rows(n as usize * ring.rank(), &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IsoReport {
    pub n: u64,
    pub ring: String,
    pub injective: bool,
    pub lands_in: bool,
    /// Index of the image in the periodic lattice, if finite.
    #[serde(serialize_with = "crate::big_serde::opt_int")]
    pub index: Option<BigInt>,
    /// Index of the image in the lattice of the linear constraints alone.
    #[serde(serialize_with = "crate::big_serde::opt_int")]
    pub linear_index: Option<BigInt>,
    pub stable: bool,
}

impl IsoReport {
    pub fn verdict(&self) -> Verdict {
        if !self.injective || !self.lands_in {
            return Verdict::False;
        }
        if !self.stable {
            return Verdict::Inconclusive;
        }
        if self.index == Some(BigInt::one()) {
            Verdict::True
        } else {
            Verdict::False
        }
    }
}

/// Compares the image of `Z[x]/(x^n - 1)` with the periodic lattice over the given ring.
pub fn witt_image_report(n: u64, ring: &CoeffRing, bound: u64) -> Result<IsoReport> {
    let lattice = periodic_witt_lattice(n, ring, bound)?;
    let image = group_ring_image(n, ring);
    let injective = image.rank() == n as usize;
    let lands_in = (0..image.rows()).all(|i| lattice.basis.contains(image.row(i)));
    let finite = |sup: &IntMatrix| -> Result<Option<BigInt>> {
        Ok(match lattice_index(&image, sup)? {
            LatticeIndex::Finite(k) => Some(k),
            LatticeIndex::Infinite => None,
        })
    };
    let index = if lands_in { finite(&lattice.basis)? } else { None };
    let linear = linear_witt_lattice(n, ring, bound)?;
    let linear_index = if lands_in { finite(&linear)? } else { None };
    Ok(IsoReport {
        n,
        ring: ring.describe(),
        injective,
        lands_in,
        index,
        linear_index,
        stable: lattice.stable,
    })
}

/// `Z[x]/(x^n - 1)` against the `n inf`-periodic Witt lattice over `Z[zeta_n]`, the ring of
/// values of `[zeta_n]`.
pub fn ray_class_algebra_witt_iso_check(n: u64, bound: u64) -> Result<IsoReport> {
    witt_image_report(n, &CoeffRing::cyclotomic(n), bound)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldProductReport {
    pub n: u64,
    pub dimension: usize,
    /// Primitive idempotents with the classes they indicate and the factor dimension.
    pub factors: Vec<(Vec<u64>, usize)>,
}

impl FieldProductReport {
    pub fn idempotents(&self) -> usize {
        self.factors.len()
    }

    /// One factor per `d | n`, on the classes with `gcd(c, n) = d`, of dimension `phi(n/d)`.
    pub fn matches_divisor_product(&self) -> bool {
        let n = self.n;
        let mut expected: Vec<(Vec<u64>, usize)> = divisors(n)
            .into_iter()
            .map(|d| {
                let classes = (0..n).filter(|c| c.gcd(&n) == d).collect();
                (classes, crate::exact_arith::euler_phi(n / d) as usize)
            })
            .collect();
        expected.sort();
        let mut got = self.factors.clone();
        got.sort();
        self.dimension == n as usize && got == expected
    }
}

/// Primitive idempotents of the rational span of the periodic lattice over `Z[zeta_n]`, found
/// as the minimal class sets whose indicator lies in the span.
pub fn periodic_witt_field_product_check(n: u64, bound: u64) -> Result<FieldProductReport> {
    if n > 16 {
        return Err(Error::TooLarge {
            what: "subset search over classes".into(),
            needed: n,
            limit: 16,
        });
    }
    let ring = CoeffRing::cyclotomic(n);
    let d = ring.rank();
    let lattice = periodic_witt_lattice(n, &ring, bound)?;
    let dim = lattice.rank();
    let basis = lattice.basis.to_rows();
    let restrict = |row: &[BigInt], mask: u32| -> Vec<BigInt> {
        row.iter()
            .enumerate()
            .map(|(i, v)| if mask >> (i / d) & 1 == 1 { v.clone() } else { BigInt::zero() })
            .collect()
    };
    let indicator = |mask: u32| -> Vec<BigInt> {
        (0..n as usize * d)
            .map(|i| BigInt::from((i % d == 0 && mask >> (i / d) & 1 == 1) as i64))
            .collect()
    };
    let mut in_span: Vec<u32> = Vec::new();
    for mask in 1u32..(1 << n) {
        let mut rows = basis.clone();
        rows.push(indicator(mask));
        if IntMatrix::from_rows(n as usize * d, &rows).rank() == dim {
            in_span.push(mask);
        }
    }
    let minimal: Vec<u32> = in_span
        .iter()
        .copied()
        .filter(|&m| !in_span.iter().any(|&o| o != m && o & m == o))
        .collect();
    let factors = minimal
        .into_iter()
        .map(|mask| {
            let rows: Vec<Vec<BigInt>> = basis.iter().map(|r| restrict(r, mask)).collect();
            let classes = (0..n).filter(|&c| mask >> c & 1 == 1).collect();
            (classes, IntMatrix::from_rows(n as usize * d, &rows).rank())
        })
        .collect();
    Ok(FieldProductReport {
        n,
        dimension: dim,
        factors,
    })
}
