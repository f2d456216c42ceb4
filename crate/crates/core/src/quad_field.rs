//! Imaginary quadratic fields: elements, ideals in Hermite form, prime decomposition,
//! principality by lattice search, class groups via reduced binary quadratic forms, and
//! residue unit groups.
//!
//! Elements are `a + b*w` with `w = sqrt(d)` for `d = 2, 3 mod 4` and `w = (1 + sqrt(d))/2`
//! for `d = 1 mod 4`. Ideals are stored as `c * [a, b + w]`, the Z-span of `c*a` and
//! `c*(b + w)` with `0 <= b < a`, so equal ideals are equal structs.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_integer::{Integer, Roots};
use serde::{Deserialize, Serialize};

use crate::exact_arith::factor;
use crate::{Bounds, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadField {
    d: i64,
    #[serde(skip)]
    trace_w: i64,
    #[serde(skip)]
    norm_w: i64,
    #[serde(skip)]
    disc: i64,
}

/// The element `a + b*w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QuadInt {
    pub a: i64,
    pub b: i64,
}

impl QuadInt {
    pub const ZERO: QuadInt = QuadInt { a: 0, b: 0 };
    pub const ONE: QuadInt = QuadInt { a: 1, b: 0 };

    pub fn new(a: i64, b: i64) -> Self {
        QuadInt { a, b }
    }

    pub fn int(a: i64) -> Self {
        QuadInt { a, b: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    pub fn add(&self, o: &QuadInt) -> QuadInt {
        QuadInt::new(self.a + o.a, self.b + o.b)
    }

    pub fn sub(&self, o: &QuadInt) -> QuadInt {
        QuadInt::new(self.a - o.a, self.b - o.b)
    }

    pub fn neg(&self) -> QuadInt {
        QuadInt::new(-self.a, -self.b)
    }

    pub fn scale(&self, k: i64) -> QuadInt {
        QuadInt::new(self.a * k, self.b * k)
    }
}

impl fmt::Display for QuadInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (a, 0) => write!(f, "{a}"),
            (0, 1) => write!(f, "w"),
            (0, -1) => write!(f, "-w"),
            (0, b) => write!(f, "{b}*w"),
            (a, 1) => write!(f, "{a}+w"),
            (a, -1) => write!(f, "{a}-w"),
            (a, b) if b < 0 => write!(f, "{a}-{}*w", -b),
            (a, b) => write!(f, "{a}+{b}*w"),
        }
    }
}

/// The ideal `c * [a, b + w]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadIdeal {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl QuadIdeal {
    pub const ONE: QuadIdeal = QuadIdeal { a: 1, b: 0, c: 1 };

    pub fn norm(&self) -> u64 {
        (self.c * self.c * self.a) as u64
    }

    pub fn is_one(&self) -> bool {
        *self == Self::ONE
    }

    /// Z-basis `[c*a, c*(b + w)]`.
    pub fn basis(&self) -> [QuadInt; 2] {
        [
            QuadInt::new(self.c * self.a, 0),
            QuadInt::new(self.c * self.b, self.c),
        ]
    }

    pub fn triple(&self) -> [i64; 3] {
        [self.a, self.b, self.c]
    }
}

impl Ord for QuadIdeal {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.norm(), self.c, self.a, self.b).cmp(&(other.norm(), other.c, other.a, other.b))
    }
}

impl PartialOrd for QuadIdeal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for QuadIdeal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}+w, {}]", self.a, self.b, self.c)
    }
}

impl FromStr for QuadIdeal {
    type Err = Error;

    /// Parses `"[a, b+w, c]"`; the field check happens in [`QuadField::ideal`].
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse ideal {s:?}, expected \"[a, b+w, c]\""));
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(bad)?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let a: i64 = parts[0].parse().map_err(|_| bad())?;
        let mid = parts[1].replace(' ', "");
        let b: i64 = if mid == "w" {
            0
        } else {
            mid.strip_suffix("+w")
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?
        };
        let c: i64 = parts[2].parse().map_err(|_| bad())?;
        Ok(QuadIdeal { a, b, c })
    }
}

/// How a rational prime decomposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrimeAbove {
    pub ideal: QuadIdeal,
    pub splitting: Splitting,
    /// Ramification index.
    pub e: u32,
    /// Residue degree.
    pub f: u32,
}

/// A positive definite binary quadratic form `a x^2 + b xy + c y^2`.
pub type Form = (i64, i64, i64);

#[derive(Debug, Clone)]
pub struct ClassGroup {
    pub field: QuadField,
    /// One ideal per class, built from the reduced forms; index 0 is the trivial class.
    pub reps: Vec<QuadIdeal>,
    pub forms: Vec<Form>,
    pub table: Vec<Vec<usize>>,
    index: HashMap<Form, usize>,
}

impl ClassGroup {
    pub fn order(&self) -> usize {
        self.reps.len()
    }

    /// Index of the class of `ideal`.
    pub fn class_of(&self, ideal: &QuadIdeal) -> usize {
        let form = self.field.reduce_form(self.field.form_of_ideal(ideal));
        self.index[&form]
    }

    pub fn inverse(&self, i: usize) -> usize {
        (0..self.order())
            .find(|&j| self.table[i][j] == 0)
            .expect("group table has inverses")
    }
}

/// The unit group of a residue ring O/f, as an explicit list.
#[derive(Debug, Clone)]
pub struct ResidueUnits {
    pub modulus: QuadIdeal,
    /// Canonical representatives of the units.
    pub elements: Vec<QuadInt>,
    codes: HashMap<u64, usize>,
    field: QuadField,
}

impl ResidueUnits {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn mul(&self, i: usize, j: usize) -> usize {
        let p = self.field.mul(&self.elements[i], &self.elements[j]);
        self.codes[&self.field.residue_code(&self.modulus, &p)]
    }

    pub fn index_of(&self, x: &QuadInt) -> Option<usize> {
        self.codes
            .get(&self.field.residue_code(&self.modulus, x))
            .copied()
    }
}

fn is_squarefree(n: u64) -> bool {
    factor(n).map(|f| f.factors.iter().all(|&(_, e)| e == 1)).unwrap_or(false)
}

/// Hermite basis of a rank-2 sublattice of Z^2 given by generators, as `(h, x, g)` meaning
/// the basis `{(h, 0), (x, g)}` with `0 <= x < h`.
fn lattice2(gens: &[QuadInt]) -> Option<(i64, i64, i64)> {
    let mut pivot: Option<QuadInt> = None;
    let mut h = 0i64;
    for v in gens {
        if v.b == 0 {
            h = h.gcd(&v.a);
            continue;
        }
        match pivot {
            None => pivot = Some(*v),
            Some(p) => {
                let e = p.b.extended_gcd(&v.b);
                let np = p.scale(e.x).add(&v.scale(e.y));
                let w = p.scale(v.b / e.gcd).sub(&v.scale(p.b / e.gcd));
                debug_assert_eq!(w.b, 0);
                h = h.gcd(&w.a);
                pivot = Some(np);
            }
        }
    }
    let mut p = pivot?;
    if p.b < 0 {
        p = p.neg();
    }
    if h == 0 {
        return None;
    }
    Some((h, p.a.rem_euclid(h), p.b))
}

impl QuadField {
    /// The field Q(sqrt(d)) for squarefree `d < 0`.
    pub fn new(d: i64) -> Result<Self> {
        if d >= 0 {
            return Err(Error::invalid(format!(
                "d = {d}: only imaginary quadratic fields (d < 0) are supported"
            )));
        }
        if !is_squarefree(d.unsigned_abs()) {
            return Err(Error::invalid(format!("d = {d} is not squarefree")));
        }
        let (trace_w, norm_w, disc) = if d.rem_euclid(4) == 1 {
            (1, (1 - d) / 4, d)
        } else {
            (0, -d, 4 * d)
        };
        Ok(QuadField {
            d,
            trace_w,
            norm_w,
            disc,
        })
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn disc(&self) -> i64 {
        self.disc
    }

    pub fn trace_w(&self) -> i64 {
        self.trace_w
    }

    pub fn norm_w(&self) -> i64 {
        self.norm_w
    }

    pub fn omega_description(&self) -> &'static str {
        if self.trace_w == 1 {
            "(1+sqrt(d))/2"
        } else {
            "sqrt(d)"
        }
    }

    // ---- elements ----

    pub fn norm(&self, x: &QuadInt) -> i64 {
        x.a * x.a + self.trace_w * x.a * x.b + self.norm_w * x.b * x.b
    }

    pub fn mul(&self, x: &QuadInt, y: &QuadInt) -> QuadInt {
        let bb = x.b * y.b;
        QuadInt::new(
            x.a * y.a - self.norm_w * bb,
            x.a * y.b + x.b * y.a + self.trace_w * bb,
        )
    }

    pub fn conj(&self, x: &QuadInt) -> QuadInt {
        QuadInt::new(x.a + self.trace_w * x.b, -x.b)
    }

    /// All elements of norm `n`.
    pub fn elements_of_norm(&self, n: i64) -> Vec<QuadInt> {
        let mut out = Vec::new();
        if n < 0 {
            return out;
        }
        if n == 0 {
            return vec![QuadInt::ZERO];
        }
        // N(x + yw) = (x + t y / 2)^2 + |disc| y^2 / 4
        let ymax = (4 * n / self.disc.abs()).sqrt();
        for y in -ymax..=ymax {
            let delta = self.disc * y * y + 4 * n;
            if delta < 0 {
                continue;
            }
            let s = delta.sqrt();
            if s * s != delta {
                continue;
            }
            for sign in [-1, 1] {
                let num = -self.trace_w * y + sign * s;
                if num % 2 == 0 {
                    let x = QuadInt::new(num / 2, y);
                    if !out.contains(&x) {
                        out.push(x);
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// The roots of unity of O_K.
    pub fn unit_group(&self) -> Vec<QuadInt> {
        self.elements_of_norm(1)
    }

    // ---- ideals ----

    /// Validates a triple as an ideal of O_K.
    pub fn ideal(&self, a: i64, b: i64, c: i64) -> Result<QuadIdeal> {
        if a <= 0 || c <= 0 || b < 0 || b >= a {
            return Err(Error::invalid(format!(
                "ideal triple [{a}, {b}+w, {c}] needs a, c > 0 and 0 <= b < a"
            )));
        }
        if self.norm(&QuadInt::new(b, 1)) % a != 0 {
            return Err(Error::invalid(format!(
                "[{a}, {b}+w, {c}] is not closed under multiplication by w"
            )));
        }
        Ok(QuadIdeal { a, b, c })
    }

    pub fn parse_ideal(&self, s: &str) -> Result<QuadIdeal> {
        let raw: QuadIdeal = s.parse()?;
        self.ideal(raw.a, raw.b, raw.c)
    }

    fn ideal_from_lattice(&self, gens: &[QuadInt]) -> QuadIdeal {
        let (h, x, g) = lattice2(gens).expect("nonzero ideal has rank 2");
        debug_assert!(h % g == 0 && x % g == 0);
        let a = h / g;
        let b = (x / g).rem_euclid(a);
        QuadIdeal { a, b, c: g }
    }

    /// The ideal generated by the given elements (not all zero).
    pub fn ideal_generated_by(&self, gens: &[QuadInt]) -> QuadIdeal {
        let w = QuadInt::new(0, 1);
        let mut all = Vec::with_capacity(gens.len() * 2);
        for g in gens {
            all.push(*g);
            all.push(self.mul(g, &w));
        }
        self.ideal_from_lattice(&all)
    }

    pub fn principal_ideal(&self, x: &QuadInt) -> QuadIdeal {
        self.ideal_generated_by(&[*x])
    }

    pub fn ideal_mul(&self, x: &QuadIdeal, y: &QuadIdeal) -> QuadIdeal {
        let bx = x.basis();
        let by = y.basis();
        let gens: Vec<QuadInt> = bx
            .iter()
            .flat_map(|u| by.iter().map(move |v| (u, v)))
            .map(|(u, v)| self.mul(u, v))
            .collect();
        self.ideal_from_lattice(&gens)
    }

    /// The sum `x + y`, which is the gcd in the divisibility order.
    pub fn ideal_gcd(&self, x: &QuadIdeal, y: &QuadIdeal) -> QuadIdeal {
        let mut gens = x.basis().to_vec();
        gens.extend(y.basis());
        self.ideal_from_lattice(&gens)
    }

    pub fn ideal_contains(&self, i: &QuadIdeal, x: &QuadInt) -> bool {
        if x.b % i.c != 0 {
            return false;
        }
        let k = x.b / i.c;
        (x.a - k * i.c * i.b) % (i.c * i.a) == 0
    }

    /// Whether `x` divides `y`, i.e. `y` is contained in `x`.
    pub fn ideal_divides(&self, x: &QuadIdeal, y: &QuadIdeal) -> bool {
        y.basis().iter().all(|e| self.ideal_contains(x, e))
    }

    pub fn ideal_conj(&self, x: &QuadIdeal) -> QuadIdeal {
        QuadIdeal {
            a: x.a,
            b: (-x.b - self.trace_w).rem_euclid(x.a),
            c: x.c,
        }
    }

    /// `y / x` for `x | y`.
    pub fn ideal_quotient(&self, y: &QuadIdeal, x: &QuadIdeal) -> Result<QuadIdeal> {
        if !self.ideal_divides(x, y) {
            return Err(Error::invalid(format!("{x} does not divide {y}")));
        }
        let p = self.ideal_mul(y, &self.ideal_conj(x));
        let n = x.norm() as i64;
        debug_assert_eq!(p.c % n, 0);
        Ok(QuadIdeal {
            a: p.a,
            b: p.b,
            c: p.c / n,
        })
    }

    pub fn ideal_pow(&self, x: &QuadIdeal, e: u32) -> QuadIdeal {
        (0..e).fold(QuadIdeal::ONE, |acc, _| self.ideal_mul(&acc, x))
    }

    /// Decomposition of the rational prime `p`.
    pub fn primes_above(&self, p: u64) -> Vec<PrimeAbove> {
        let pi = p as i64;
        let roots: Vec<i64> = (0..pi)
            .filter(|&b| self.norm(&QuadInt::new(b, 1)).rem_euclid(pi) == 0)
            .collect();
        match roots.len() {
            0 => vec![PrimeAbove {
                ideal: QuadIdeal { a: 1, b: 0, c: pi },
                splitting: Splitting::Inert,
                e: 1,
                f: 2,
            }],
            1 => vec![PrimeAbove {
                ideal: QuadIdeal {
                    a: pi,
                    b: roots[0],
                    c: 1,
                },
                splitting: Splitting::Ramified,
                e: 2,
                f: 1,
            }],
            _ => roots
                .iter()
                .map(|&b| PrimeAbove {
                    ideal: QuadIdeal { a: pi, b, c: 1 },
                    splitting: Splitting::Split,
                    e: 1,
                    f: 1,
                })
                .collect(),
        }
    }

    /// Prime ideal factorization, primes sorted in the canonical ideal order.
    pub fn ideal_factorization(&self, x: &QuadIdeal) -> Vec<(QuadIdeal, u32)> {
        let mut out = Vec::new();
        let f = factor(x.norm()).expect("nonzero norm");
        let mut rest = *x;
        for (p, _) in f.factors {
            for pa in self.primes_above(p) {
                let mut e = 0;
                while self.ideal_divides(&pa.ideal, &rest) {
                    rest = self.ideal_quotient(&rest, &pa.ideal).expect("divides");
                    e += 1;
                }
                if e > 0 {
                    out.push((pa.ideal, e));
                }
            }
        }
        debug_assert!(rest.is_one());
        out.sort();
        out
    }

    /// All ideals of norm exactly `n`, in canonical order.
    pub fn ideals_of_norm(&self, n: u64) -> Vec<QuadIdeal> {
        let mut out = Vec::new();
        let n = n as i64;
        let mut c = 1i64;
        while c * c <= n {
            if n % (c * c) == 0 {
                let a = n / (c * c);
                for b in 0..a {
                    if self.norm(&QuadInt::new(b, 1)) % a == 0 {
                        out.push(QuadIdeal { a, b, c });
                    }
                }
            }
            c += 1;
        }
        out.sort();
        out
    }

    pub fn ideals_up_to(&self, bound: u64) -> Vec<QuadIdeal> {
        (1..=bound).flat_map(|n| self.ideals_of_norm(n)).collect()
    }

    /// A generator of `x` if it is principal. Searches the finitely many lattice elements
    /// of the right norm, so a `None` is a proof of non-principality.
    pub fn is_principal(&self, x: &QuadIdeal) -> Option<QuadInt> {
        let prim = QuadIdeal { c: 1, ..*x };
        self.elements_of_norm(prim.a)
            .into_iter()
            .find(|g| self.ideal_contains(&prim, g))
            .map(|g| g.scale(x.c))
    }

    // ---- forms and class group ----

    pub fn form_of_ideal(&self, x: &QuadIdeal) -> Form {
        let nb = self.norm(&QuadInt::new(x.b, 1));
        (x.a, 2 * x.b + self.trace_w, nb / x.a)
    }

    pub fn ideal_of_form(&self, f: Form) -> QuadIdeal {
        let (a, b, _) = f;
        QuadIdeal {
            a,
            b: ((b - self.trace_w) / 2).rem_euclid(a),
            c: 1,
        }
    }

    pub fn reduce_form(&self, f: Form) -> Form {
        let (mut a, mut b, mut c) = f;
        let disc = self.disc;
        loop {
            if b > a || b <= -a {
                let k = Integer::div_floor(&(a - b), &(2 * a));
                b += 2 * a * k;
                c = (b * b - disc) / (4 * a);
            }
            if a > c {
                std::mem::swap(&mut a, &mut c);
                b = -b;
                continue;
            }
            if a == c && b < 0 {
                b = -b;
            }
            return (a, b, c);
        }
    }

    /// Reduced positive definite forms of discriminant `disc`, sorted.
    pub fn reduced_forms(&self) -> Vec<Form> {
        let disc = self.disc;
        let mut out = Vec::new();
        let mut a = 1i64;
        while 3 * a * a <= -disc {
            for b in (-a + 1)..=a {
                if (b - disc).rem_euclid(2) != 0 {
                    continue;
                }
                let num = b * b - disc;
                if num % (4 * a) != 0 {
                    continue;
                }
                let c = num / (4 * a);
                if c < a || (c == a && b < 0) {
                    continue;
                }
                if a.gcd(&b).gcd(&c) != 1 {
                    continue;
                }
                out.push((a, b, c));
            }
            a += 1;
        }
        out.sort();
        out
    }

    pub fn class_group(&self) -> ClassGroup {
        let forms = self.reduced_forms();
        let reps: Vec<QuadIdeal> = forms.iter().map(|&f| self.ideal_of_form(f)).collect();
        let index: HashMap<Form, usize> = forms.iter().enumerate().map(|(i, &f)| (f, i)).collect();
        let class_of = |x: &QuadIdeal| index[&self.reduce_form(self.form_of_ideal(x))];
        let table = reps
            .iter()
            .map(|x| reps.iter().map(|y| class_of(&self.ideal_mul(x, y))).collect())
            .collect();
        ClassGroup {
            field: *self,
            reps,
            forms,
            table,
            index,
        }
    }

    // ---- residues ----

    /// Canonical code in `[0, N(m))` of the residue of `x` modulo `m`.
    pub fn residue_code(&self, m: &QuadIdeal, x: &QuadInt) -> u64 {
        let yr = x.b.rem_euclid(m.c);
        let k = (x.b - yr) / m.c;
        let xr = (x.a - k * m.c * m.b).rem_euclid(m.c * m.a);
        (xr * m.c + yr) as u64
    }

    /// Canonical representative of a residue code.
    pub fn residue_elem(&self, m: &QuadIdeal, code: u64) -> QuadInt {
        let code = code as i64;
        QuadInt::new(code / m.c, code % m.c)
    }

    pub fn is_coprime_elem(&self, m: &QuadIdeal, x: &QuadInt) -> bool {
        if x.is_zero() {
            return m.is_one();
        }
        self.ideal_gcd(&self.principal_ideal(x), m).is_one()
    }

    /// The group (O/f)^* by exhaustive enumeration of residues.
    pub fn residue_units(&self, f: &QuadIdeal, bounds: &Bounds) -> Result<ResidueUnits> {
        bounds.check_residue("residue ring O/f", f.norm())?;
        let mut elements = Vec::new();
        let mut codes = HashMap::new();
        for code in 0..f.norm() {
            let x = self.residue_elem(f, code);
            if self.is_coprime_elem(f, &x) {
                codes.insert(code, elements.len());
                elements.push(x);
            }
        }
        Ok(ResidueUnits {
            modulus: *f,
            elements,
            codes,
            field: *self,
        })
    }
}

/// Number of reduced forms of a negative discriminant, counted directly from the reduction
/// inequalities. Independent of [`QuadField`].
pub fn reduced_form_count(disc: i64) -> usize {
    let mut count = 0;
    let mut a = 1i64;
    while 3 * a * a <= -disc {
        for b in (-a + 1)..=a {
            let num = b * b - disc;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a || (c == a && b < 0) {
                continue;
            }
            if a.gcd(&b).gcd(&c) == 1 {
                count += 1;
            }
        }
        a += 1;
    }
    count
}
