//! Lambda-structures on the toric line `Z[x, 1/x]` (`psi_a(x) = x^a`) and the Chebyshev line
//! `Z[y]` with `y = x + 1/x`, and their periodic and torsion loci.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::exact_arith::{is_prime, IntMatrix, LatticeIndex};
use crate::ray_class::{is_supported, Cycle, FEquivalence, PrimeSupport, Rationals};
use crate::{Error, Result};

/// Dense polynomial over Z, constant term first, no trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct IntPoly {
    #[serde(serialize_with = "crate::big_serde::vec")]
    coeffs: Vec<BigInt>,
}

impl fmt::Debug for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntPoly({})", self.render("y"))
    }
}

impl IntPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        IntPoly { coeffs }
    }

    pub fn from_i64(c: &[i64]) -> Self {
        Self::new(c.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn zero() -> Self {
        IntPoly { coeffs: vec![] }
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        Self::new(vec![c.into()])
    }

    pub fn one() -> Self {
        Self::constant(1)
    }

    /// The generator.
    pub fn var() -> Self {
        Self::monomial(1, 1)
    }

    pub fn monomial(c: impl Into<BigInt>, deg: usize) -> Self {
        let mut v = vec![BigInt::zero(); deg + 1];
        v[deg] = c.into();
        Self::new(v)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> BigInt {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> BigInt {
        self.coeffs.last().cloned().unwrap_or_default()
    }

    pub fn is_monic(&self) -> bool {
        self.leading().is_one()
    }

    pub fn add(&self, o: &IntPoly) -> IntPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &IntPoly) -> IntPoly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> IntPoly {
        IntPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, k: &BigInt) -> IntPoly {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn mul(&self, o: &IntPoly) -> IntPoly {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn pow(&self, e: u32) -> IntPoly {
        (0..e).fold(Self::one(), |acc, _| acc.mul(self))
    }

    /// `self(inner)`, by Horner.
    pub fn compose(&self, inner: &IntPoly) -> IntPoly {
        self.coeffs
            .iter()
            .rev()
            .fold(Self::zero(), |acc, c| acc.mul(inner).add(&Self::constant(c.clone())))
    }

    pub fn derivative(&self) -> IntPoly {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    pub fn eval(&self, y: &BigInt) -> BigInt {
        self.coeffs.iter().rev().fold(BigInt::zero(), |acc, c| acc * y + c)
    }

    pub fn eval_f64(&self, y: f64) -> f64 {
        use num_traits::ToPrimitive;
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * y + c.to_f64().unwrap_or(f64::NAN))
    }

    pub fn content(&self) -> BigInt {
        self.coeffs.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    /// Divides out the content and makes the leading coefficient positive.
    pub fn primitive_part(&self) -> IntPoly {
        if self.is_zero() {
            return Self::zero();
        }
        let mut c = self.content();
        if self.leading().is_negative() {
            c = -c;
        }
        Self::new(self.coeffs.iter().map(|x| x / &c).collect())
    }

    /// Pseudo-remainder `lc(d)^k self mod d`.
    fn pseudo_rem(&self, d: &IntPoly) -> IntPoly {
        let dd = d.degree().expect("nonzero divisor");
        let lc = d.leading();
        let mut r = self.clone();
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let t = IntPoly::monomial(r.leading(), rd - dd);
            r = r.scale(&lc).sub(&t.mul(d));
        }
        r
    }

    /// Quotient and remainder by a divisor with leading coefficient dividing every step;
    /// `None` when the division leaves Z.
    pub fn div_rem(&self, d: &IntPoly) -> Option<(IntPoly, IntPoly)> {
        let dd = d.degree()?;
        let lc = d.leading();
        let mut q = vec![BigInt::zero(); self.coeffs.len().saturating_sub(dd).max(1)];
        let mut r = self.clone();
        while let Some(rd) = r.degree() {
            if rd < dd {
                break;
            }
            let (k, rem) = r.leading().div_rem(&lc);
            if !rem.is_zero() {
                return None;
            }
            q[rd - dd] = k.clone();
            r = r.sub(&IntPoly::monomial(k, rd - dd).mul(d));
        }
        Some((IntPoly::new(q), r))
    }

    /// Exact quotient, if `d` divides `self` in Z[y].
    pub fn div_exact(&self, d: &IntPoly) -> Option<IntPoly> {
        match self.div_rem(d) {
            Some((q, r)) if r.is_zero() => Some(q),
            _ => None,
        }
    }

    pub fn divides(&self, other: &IntPoly) -> bool {
        other.div_exact(self).is_some()
    }

    /// Primitive gcd with positive leading coefficient (the gcd over Q, up to scaling).
    pub fn gcd(&self, o: &IntPoly) -> IntPoly {
        let (mut a, mut b) = (self.primitive_part(), o.primitive_part());
        if a.degree() < b.degree() {
            std::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.pseudo_rem(&b).primitive_part();
            a = b;
            b = r;
        }
        a
    }

    /// Squarefree over Q.
    pub fn is_squarefree(&self) -> bool {
        self.gcd(&self.derivative()).degree() == Some(0)
    }

    /// Coefficients reduced into `[0, p)`.
    pub fn reduce_mod(&self, p: &BigInt) -> IntPoly {
        Self::new(self.coeffs.iter().map(|c| c.mod_floor(p)).collect())
    }

    /// Human-readable form in the given variable, highest degree first.
    pub fn render(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = match i {
                0 => String::new(),
                1 => var.to_string(),
                _ => format!("{var}^{i}"),
            };
            if i == 0 || !mag.is_one() {
                out.push_str(&mag.to_string());
            }
            out.push_str(&mono);
        }
        out
    }

    /// Parses sums of terms like `3x^2`, `-x`, `2*x`, `7` in the variable `var`.
    pub fn parse(s: &str, var: &str) -> Result<IntPoly> {
        let bad = || Error::invalid(format!("cannot parse polynomial {s:?}"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(bad());
        }
        let mut terms = Vec::new();
        let mut cur = String::new();
        for ch in compact.chars() {
            if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with('^') {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        terms.push(cur);
        let mut out = IntPoly::zero();
        for t in terms {
            let (sign, body) = match t.strip_prefix('-') {
                Some(b) => (-1, b),
                None => (1, t.strip_prefix('+').unwrap_or(&t)),
            };
            let (coef, deg) = match body.find(var) {
                None => (body.parse::<BigInt>().map_err(|_| bad())?, 0usize),
                Some(pos) => {
                    let c = body[..pos].trim_end_matches('*');
                    let c = if c.is_empty() { BigInt::one() } else { c.parse().map_err(|_| bad())? };
                    let rest = &body[pos + var.len()..];
                    let d = if rest.is_empty() {
                        1
                    } else {
                        rest.strip_prefix('^').ok_or_else(bad)?.parse().map_err(|_| bad())?
                    };
                    (c, d)
                }
            };
            out = out.add(&IntPoly::monomial(coef * sign, deg));
        }
        Ok(out)
    }
}

impl fmt::Display for IntPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render("y"))
    }
}

impl FromStr for IntPoly {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        IntPoly::parse(s, "y")
    }
}

/// Laurent polynomial `sum c_i x^(low + i)`, trimmed at both ends.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LaurentPoly {
    low: i64,
    coeffs: Vec<BigInt>,
}

impl LaurentPoly {
    pub fn new(low: i64, coeffs: Vec<BigInt>) -> Self {
        let mut c = coeffs;
        while c.last().is_some_and(Zero::is_zero) {
            c.pop();
        }
        let lead = c.iter().take_while(|x| x.is_zero()).count();
        c.drain(..lead);
        if c.is_empty() {
            return LaurentPoly::default();
        }
        LaurentPoly {
            low: low + lead as i64,
            coeffs: c,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(c: impl Into<BigInt>, e: i64) -> Self {
        Self::new(e, vec![c.into()])
    }

    pub fn one() -> Self {
        Self::monomial(1, 0)
    }

    /// `x^e - 1`.
    pub fn binomial(e: i64) -> Self {
        Self::monomial(1, e).sub(&Self::one())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn low_degree(&self) -> i64 {
        self.low
    }

    pub fn high_degree(&self) -> i64 {
        self.low + self.coeffs.len() as i64 - 1
    }

    pub fn coeff(&self, e: i64) -> BigInt {
        if e < self.low {
            return BigInt::zero();
        }
        self.coeffs.get((e - self.low) as usize).cloned().unwrap_or_default()
    }

    /// `(exponent, coefficient)` pairs with nonzero coefficient.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigInt)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.low + i as i64, c))
    }

    pub fn add(&self, o: &LaurentPoly) -> LaurentPoly {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let low = self.low.min(o.low);
        let high = self.high_degree().max(o.high_degree());
        Self::new(low, (low..=high).map(|e| self.coeff(e) + o.coeff(e)).collect())
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly {
            low: self.low,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn sub(&self, o: &LaurentPoly) -> LaurentPoly {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &LaurentPoly) -> LaurentPoly {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut out = vec![BigInt::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(self.low + o.low, out)
    }

    /// Whether `self = +-x^k o` for some `k`.
    pub fn associate(&self, o: &LaurentPoly) -> bool {
        if self.coeffs.len() != o.coeffs.len() {
            return false;
        }
        self.coeffs == o.coeffs || self.coeffs.iter().zip(&o.coeffs).all(|(a, b)| *a == -b)
    }

    /// `y = x + 1/x` substituted into `p`.
    pub fn from_chebyshev(p: &IntPoly) -> LaurentPoly {
        let y = Self::new(-1, vec![BigInt::one(), BigInt::zero(), BigInt::one()]);
        p.coeffs()
            .iter()
            .rev()
            .fold(Self::zero(), |acc, c| acc.mul(&y).add(&Self::monomial(c.clone(), 0)))
    }
}

/// Element of `Z[x]/(x^n - 1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GroupRingElt {
    pub n: usize,
    #[serde(serialize_with = "crate::big_serde::vec")]
    pub coeffs: Vec<BigInt>,
}

impl GroupRingElt {
    pub fn zero(n: usize) -> Self {
        GroupRingElt {
            n,
            coeffs: vec![BigInt::zero(); n],
        }
    }

    pub fn basis(n: usize, i: i64) -> Self {
        let mut z = Self::zero(n);
        z.coeffs[i.rem_euclid(n as i64) as usize] = BigInt::one();
        z
    }

    pub fn from_laurent(n: usize, p: &LaurentPoly) -> Self {
        let mut z = Self::zero(n);
        for (e, c) in p.terms() {
            z.coeffs[e.rem_euclid(n as i64) as usize] += c;
        }
        z
    }

    pub fn add(&self, o: &GroupRingElt) -> GroupRingElt {
        GroupRingElt {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn mul(&self, o: &GroupRingElt) -> GroupRingElt {
        let mut z = Self::zero(self.n);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coeffs.iter().enumerate() {
                z.coeffs[(i + j) % self.n] += a * b;
            }
        }
        z
    }

    /// The involution `x -> 1/x`.
    pub fn sigma(&self) -> GroupRingElt {
        let mut z = Self::zero(self.n);
        for (i, c) in self.coeffs.iter().enumerate() {
            z.coeffs[(self.n - i) % self.n] = c.clone();
        }
        z
    }

    /// `psi_a(x) = x^a`.
    pub fn psi(&self, a: u64) -> GroupRingElt {
        self.map_exponents(self.n, |i| i as u64 * a)
    }

    fn map_exponents(&self, target: usize, f: impl Fn(usize) -> u64) -> GroupRingElt {
        let mut z = Self::zero(target);
        for (i, c) in self.coeffs.iter().enumerate() {
            z.coeffs[(f(i) % target as u64) as usize] += c;
        }
        z
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }
}

/// `psi_0, ..., psi_n` on the Chebyshev line, by `psi_(k+1) = y psi_k - psi_(k-1)`.
pub fn chebyshev_sequence(n: u64) -> Vec<IntPoly> {
    let mut out = vec![IntPoly::constant(2), IntPoly::var()];
    while (out.len() as u64) <= n {
        let k = out.len();
        let mut next = vec![BigInt::zero()];
        next.extend(out[k - 1].coeffs.iter().cloned());
        out.push(IntPoly::new(next).sub(&out[k - 2]));
    }
    out.truncate(n as usize + 1);
    out
}

pub fn chebyshev_psi(n: u64) -> IntPoly {
    chebyshev_sequence(n).pop().expect("sequence is nonempty")
}

/// Checks `psi_n(x + 1/x) = x^n + x^-n` in `Z[x, 1/x]`.
pub fn chebyshev_identity_holds(n: u64) -> bool {
    let lhs = LaurentPoly::from_chebyshev(&chebyshev_psi(n));
    let n = n as i64;
    let rhs = LaurentPoly::monomial(1, n).add(&LaurentPoly::monomial(1, -n));
    lhs == rhs
}

/// `x -> x^a`.
pub fn toric_psi(a: i64, p: &LaurentPoly) -> LaurentPoly {
    p.terms()
        .fold(LaurentPoly::zero(), |acc, (e, c)| acc.add(&LaurentPoly::monomial(c.clone(), e * a)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Toric,
    Chebyshev,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toric" => Ok(Family::Toric),
            "chebyshev" => Ok(Family::Chebyshev),
            _ => Err(Error::invalid(format!("unknown family {s:?}"))),
        }
    }
}

/// `psi_p(t) = t^p mod p` on the generator.
pub fn frobenius_lift_check(family: Family, p: u64) -> Result<bool> {
    if !is_prime(p) {
        return Err(Error::invalid(format!("{p} is not prime")));
    }
    let pb = BigInt::from(p);
    Ok(match family {
        Family::Toric => {
            let x = LaurentPoly::monomial(1, 1);
            let diff = toric_psi(p as i64, &x).sub(&LaurentPoly::monomial(1, p as i64));
            let ok = diff.terms().all(|(_, c)| c.is_multiple_of(&pb));
            ok
        }
        Family::Chebyshev => {
            let diff = chebyshev_psi(p).sub(&IntPoly::monomial(1, p as usize));
            diff.coeffs().iter().all(|c| c.is_multiple_of(&pb))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GmExponent {
    /// The periodic locus of the toric line is `mu_m`.
    pub m: u64,
    /// The scans to `4n` and `8n` agree.
    pub stable: bool,
}

fn gm_scan(f: &Cycle<u64>, support: &PrimeSupport<u64>, limit: u64) -> u64 {
    let mut eq = FEquivalence::new(&Rationals, f);
    let mut first: std::collections::HashMap<(u64, crate::ray_class::RayKey), u64> = Default::default();
    let mut g = 0u64;
    for a in 1..=limit {
        if !is_supported(&Rationals, support, &a) {
            continue;
        }
        let key = eq.class(&a);
        match first.get(&key) {
            Some(&b) => g = g.gcd(&(a - b)),
            None => {
                first.insert(key, a);
            }
        }
    }
    g
}

/// The gcd of `|a - b|` over `f`-equivalent exponents `a, b`.
pub fn gm_periodic_exponent(f: &Cycle<u64>, support: &PrimeSupport<u64>) -> GmExponent {
    let n = f.finite.max(1);
    let m4 = gm_scan(f, support, 4 * n);
    let m8 = gm_scan(f, support, 8 * n);
    GmExponent { m: m8, stable: m4 == m8 }
}

/// `psi_n` with coefficients reduced into `[0, p)`.
pub fn chebyshev_psi_mod(n: u64, p: u64) -> Result<IntPoly> {
    if p < 2 {
        return Err(Error::invalid("modulus must be at least 2"));
    }
    Ok(chebyshev_psi(n).reduce_mod(&BigInt::from(p)))
}

/// The periodic locus `mu_m = V(x^m - 1)` of the toric line; its coordinate ring is all of
/// `Z[x]/(x^m - 1)`, so the image basis is the standard one.
pub fn toric_periodic_locus(f: &Cycle<u64>, support: &PrimeSupport<u64>) -> PeriodicLocusReport {
    let gm = gm_periodic_exponent(f, support);
    let m = gm.m as usize;
    let image_basis = (0..m)
        .map(|i| (0..m).map(|j| BigInt::from((i == j) as i64)).collect())
        .collect();
    PeriodicLocusReport {
        cycle: f.to_string(),
        generator: Some(IntPoly::monomial(1, m).sub(&IntPoly::one())),
        exponent: Some(gm.m),
        image_basis,
        cokernel_order: 1,
        matches_stated_basis: gm.stable,
    }
}

/// The reduced periodic locus generator `prod_i (y - zeta^i - zeta^-i)`, as the squarefree
/// part of `psi_n - 2`.
pub fn chebyshev_periodic_generator(n: u64) -> Result<IntPoly> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let t = chebyshev_psi(n).sub(&IntPoly::constant(2));
    let g = t.gcd(&t.derivative());
    t.div_exact(&g).ok_or_else(|| Error::invalid("squarefree part is not integral"))
}

/// `(x^n - 1)(x - 1)` for odd `n`, `(x^n - 1)(x^2 - 1)` for even `n`.
pub fn periodic_binomial_product(n: u64) -> LaurentPoly {
    let g = if n % 2 == 0 { 2 } else { 1 };
    LaurentPoly::binomial(n as i64).mul(&LaurentPoly::binomial(g))
}

/// Laurent polynomials `A, B` with `A (x^a - 1) + B (x^b - 1) = x^gcd(a, b) - 1`.
pub fn binomial_bezout(a: u64, b: u64) -> (LaurentPoly, LaurentPoly, u64) {
    // (e, A, B) with x^e - 1 = A (x^a - 1) + B (x^b - 1)
    let mut u = (a, LaurentPoly::one(), LaurentPoly::zero());
    let mut v = (b, LaurentPoly::zero(), LaurentPoly::one());
    while v.0 != 0 {
        if u.0 < v.0 {
            std::mem::swap(&mut u, &mut v);
            continue;
        }
        // x^e - 1 - x^(e - f) (x^f - 1) = x^(e - f) - 1
        let shift = LaurentPoly::monomial(1, (u.0 - v.0) as i64);
        u = (u.0 - v.0, u.1.sub(&shift.mul(&v.1)), u.2.sub(&shift.mul(&v.2)));
        if u.0 < v.0 {
            std::mem::swap(&mut u, &mut v);
        }
    }
    (u.1, u.2, u.0)
}

/// `psi_a - psi_b`.
pub fn chebyshev_difference(a: u64, b: u64) -> IntPoly {
    chebyshev_psi(a).sub(&chebyshev_psi(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EqualizerReport {
    /// `Q | psi_a - psi_b` for all `a = +-b mod n` up to the bound.
    pub divides_all: bool,
    pub pairs_checked: usize,
    /// `Q(x + 1/x)` is an associate of the binomial product.
    pub binomial_identity: bool,
    /// A combination of `P_(n+1,1)` and `P_(n+2,2)` equals `Q(x + 1/x)` up to a unit.
    pub reverse_generation: bool,
}

impl EqualizerReport {
    pub fn holds(&self) -> bool {
        self.divides_all && self.binomial_identity && self.reverse_generation
    }
}

pub fn chebyshev_equalizer_check(n: u64, bound: u64) -> Result<EqualizerReport> {
    if bound < 2 * n + 2 {
        return Err(Error::invalid("bound must be at least 2n + 2"));
    }
    let q = chebyshev_periodic_generator(n)?;
    let psis: Vec<IntPoly> = (0..=bound).map(chebyshev_psi).collect();
    let mut divides_all = true;
    let mut pairs = 0;
    for a in 1..=bound {
        for b in 1..a {
            if (a - b) % n == 0 || (a + b) % n == 0 {
                pairs += 1;
                divides_all &= q.divides(&psis[a as usize].sub(&psis[b as usize]));
            }
        }
    }
    let q_lift = LaurentPoly::from_chebyshev(&q);
    let binomial_identity = q_lift.associate(&periodic_binomial_product(n));
    let p1 = LaurentPoly::from_chebyshev(&chebyshev_difference(n + 1, 1));
    let p2 = LaurentPoly::from_chebyshev(&chebyshev_difference(n + 2, 2));
    // P_(a,b)(x + 1/x) = x^-a (x^(a+b) - 1)(x^(a-b) - 1)
    let (ca, cb, g) = binomial_bezout(n + 2, n + 4);
    let comb = ca
        .mul(&LaurentPoly::monomial(1, n as i64 + 1))
        .mul(&p1)
        .add(&cb.mul(&LaurentPoly::monomial(1, n as i64 + 2)).mul(&p2));
    let reverse_generation = g == if n % 2 == 0 { 2 } else { 1 } && comb.associate(&q_lift);
    Ok(EqualizerReport {
        divides_all,
        pairs_checked: pairs,
        binomial_identity,
        reverse_generation,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PeriodicLocusReport {
    pub cycle: String,
    #[serde(rename = "Q")]
    pub generator: Option<IntPoly>,
    /// Toric case: the locus is `mu_m`, and `matches_stated_basis` records scan stability.
    pub exponent: Option<u64>,
    #[serde(serialize_with = "crate::big_serde::matrix")]
    pub image_basis: Vec<Vec<BigInt>>,
    pub cokernel_order: u64,
    pub matches_stated_basis: bool,
}

fn lattice_of(n: usize, elems: &[GroupRingElt]) -> IntMatrix {
    let rows: Vec<Vec<BigInt>> = elems.iter().map(|e| e.coeffs.clone()).collect();
    IntMatrix::from_rows(n, &rows).hnf().nonzero_rows()
}

/// `1, x^i + x^-i` for `0 < i < n/2`, and `x^(n/2)` for even `n`, with the last scaled by
/// `top_scale`.
fn symmetric_basis(n: usize, top_scale: i64) -> Vec<GroupRingElt> {
    let mut out = vec![GroupRingElt::basis(n, 0)];
    for i in 1..n.div_ceil(2) {
        if 2 * i == n {
            break;
        }
        out.push(GroupRingElt::basis(n, i as i64).add(&GroupRingElt::basis(n, -(i as i64))));
    }
    if n % 2 == 0 {
        let mut top = GroupRingElt::basis(n, (n / 2) as i64);
        top.coeffs[n / 2] = BigInt::from(top_scale);
        out.push(top);
    }
    out
}

/// The image of `Z[y]/(Q)` in `Z[x]/(x^n - 1)` under `y -> x + 1/x`.
pub fn chebyshev_image_lattice(n: u64) -> Result<PeriodicLocusReport> {
    let q = chebyshev_periodic_generator(n)?;
    let nn = n as usize;
    let y = GroupRingElt::basis(nn, 1).add(&GroupRingElt::basis(nn, -1));
    let deg = q.degree().unwrap();
    let mut powers = vec![GroupRingElt::basis(nn, 0)];
    for _ in 0..deg + 1 {
        let next = powers.last().unwrap().mul(&y);
        powers.push(next);
    }
    let image = lattice_of(nn, &powers[..deg]);
    // Q itself maps to zero, so higher powers add nothing
    let extended = lattice_of(nn, &powers);
    let q_image = q
        .coeffs()
        .iter()
        .zip(&powers)
        .fold(GroupRingElt::zero(nn), |acc, (c, p)| {
            acc.add(&GroupRingElt {
                n: nn,
                coeffs: p.coeffs.iter().map(|x| x * c).collect(),
            })
        });
    let stated = lattice_of(nn, &symmetric_basis(nn, 2.min(if n % 2 == 0 { 2 } else { 1 })));
    let invariants = lattice_of(nn, &symmetric_basis(nn, 1));
    let sigma_fixed = (0..image.rows()).all(|i| {
        let e = GroupRingElt {
            n: nn,
            coeffs: image.row(i).to_vec(),
        };
        e.sigma() == e
    });
    let index = match crate::exact_arith::lattice_index(&image, &invariants)? {
        LatticeIndex::Finite(k) => u64::try_from(k).map_err(|_| Error::invalid("index overflow"))?,
        LatticeIndex::Infinite => 0,
    };
    Ok(PeriodicLocusReport {
        cycle: n.to_string(),
        generator: Some(q),
        exponent: None,
        image_basis: image.to_rows(),
        cokernel_order: index,
        matches_stated_basis: image == stated && image == extended && q_image.is_zero() && sigma_fixed,
    })
}

/// `Q_n | psi_n - 2`, and `Q_(an) | Q_n(psi_a)` for `a <= bound`.
pub fn torsion_locus_contains_periodic(n: u64, bound: u64) -> Result<bool> {
    let q = chebyshev_periodic_generator(n)?;
    if !q.divides(&chebyshev_psi(n).sub(&IntPoly::constant(2))) {
        return Ok(false);
    }
    for a in 1..=bound {
        let big = chebyshev_periodic_generator(a * n)?;
        if !big.divides(&q.compose(&chebyshev_psi(a))) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Change-of-conductor maps `u: x -> x^(n'/n)` and `v: x -> x` between group rings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConductorMaps {
    pub n: usize,
    pub n_big: usize,
    /// `v u = psi_k` on the small ring.
    pub vu_is_psi: bool,
    /// `u v = psi_k` on the big ring.
    pub uv_is_psi: bool,
    pub u_injective: bool,
    pub v_surjective: bool,
    pub multiplicative: bool,
}

impl ConductorMaps {
    pub fn holds(&self) -> bool {
        self.vu_is_psi && self.uv_is_psi && self.u_injective && self.v_surjective && self.multiplicative
    }
}

pub fn conductor_u(n: usize, n_big: usize, a: &GroupRingElt) -> GroupRingElt {
    let k = (n_big / n) as u64;
    a.map_exponents(n_big, |i| i as u64 * k)
}

pub fn conductor_v(n: usize, a: &GroupRingElt) -> GroupRingElt {
    a.map_exponents(n, |i| i as u64)
}

pub fn ray_class_algebra_maps(n: usize, n_big: usize) -> Result<ConductorMaps> {
    if n == 0 || n_big % n != 0 {
        return Err(Error::invalid(format!("{n} does not divide {n_big}")));
    }
    let k = (n_big / n) as u64;
    let small: Vec<GroupRingElt> = (0..n).map(|i| GroupRingElt::basis(n, i as i64)).collect();
    let big: Vec<GroupRingElt> = (0..n_big).map(|i| GroupRingElt::basis(n_big, i as i64)).collect();
    let vu_is_psi = small.iter().all(|e| conductor_v(n, &conductor_u(n, n_big, e)) == e.psi(k));
    let uv_is_psi = big.iter().all(|e| conductor_u(n, n_big, &conductor_v(n, e)) == e.psi(k));
    let u_images: Vec<GroupRingElt> = small.iter().map(|e| conductor_u(n, n_big, e)).collect();
    let u_injective = lattice_of(n_big, &u_images).rows() == n;
    let v_images: Vec<GroupRingElt> = big.iter().map(|e| conductor_v(n, e)).collect();
    let v_surjective = lattice_of(n, &v_images) == IntMatrix::identity(n);
    let multiplicative = small.iter().all(|a| {
        small
            .iter()
            .all(|b| conductor_u(n, n_big, &a.mul(b)) == conductor_u(n, n_big, a).mul(&conductor_u(n, n_big, b)))
    }) && big
        .iter()
        .all(|a| big.iter().all(|b| conductor_v(n, &a.mul(b)) == conductor_v(n, a).mul(&conductor_v(n, b))));
    Ok(ConductorMaps {
        n,
        n_big,
        vu_is_psi,
        uv_is_psi,
        u_injective,
        v_surjective,
        multiplicative,
    })
}

/// Invariant factors of `I/I^2` for the augmentation ideal `I` of `Z[x]/(x^a - 1)`.
pub fn cotangent_invariants(a: u64) -> Result<Vec<BigInt>> {
    if a == 0 {
        return Err(Error::invalid("a must be positive"));
    }
    let r = (a - 1) as usize;
    if r == 0 {
        return Ok(vec![]);
    }
    // basis e_i = x^i - 1, i = 1..a-1; e_i e_j = e_(i+j) - e_i - e_j with e_0 = 0
    let mut rows = Vec::new();
    for i in 1..a {
        for j in i..a {
            let mut v = vec![BigInt::zero(); r];
            let s = (i + j) % a;
            if s != 0 {
                v[(s - 1) as usize] += 1;
            }
            v[(i - 1) as usize] -= 1;
            v[(j - 1) as usize] -= 1;
            rows.push(v);
        }
    }
    let inv = IntMatrix::from_rows(r, &rows).smith_invariants();
    Ok(inv.into_iter().filter(|d| !d.is_one()).collect())
}

/// `dim_k(k (x) I/I^2)` over `k = F_q`.
pub fn cyclotomic_cotangent_dim(a: u64, q: u64) -> Result<u32> {
    if !is_prime(q) {
        return Err(Error::invalid(format!("{q} is not prime")));
    }
    let qb = BigInt::from(q);
    Ok(cotangent_invariants(a)?.iter().filter(|d| d.is_multiple_of(&qb)).count() as u32)
}
