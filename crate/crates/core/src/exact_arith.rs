//! Integer factorization, small modular helpers, and integer matrices with a row-style
//! Hermite normal form.

use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{Error, Result};

const SMALL_PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// A positive integer together with its prime factorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Factorization {
    pub value: u64,
    /// `(prime, exponent)` pairs with strictly increasing primes.
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn reconstruct(&self) -> u64 {
        self.factors.iter().map(|&(p, e)| p.pow(e)).product()
    }
}

/// Factorization of an arbitrary-precision positive integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigFactorization {
    pub value: BigUint,
    pub factors: Vec<(BigUint, u32)>,
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let e = (a as i128).extended_gcd(&(m as i128));
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m as i128) as u64)
}

/// Exponent of `p` in `n` (`n > 0`).
pub fn valuation(mut n: u64, p: u64) -> u32 {
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

fn miller_rabin_u64(n: u64, a: u64) -> bool {
    let mut d = n - 1;
    let s = d.trailing_zeros();
    d >>= s;
    let mut x = pow_mod(a % n, d, n);
    if x == 1 || x == n - 1 || x == 0 {
        return true;
    }
    for _ in 1..s {
        x = mul_mod(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

/// Deterministic primality test for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &SMALL_PRIMES {
        if n % p == 0 {
            return n == p;
        }
    }
    SMALL_PRIMES.iter().all(|&a| miller_rabin_u64(n, a))
}

/// Primality for arbitrary-precision integers: exact below 2^64, otherwise 40 Miller-Rabin
/// rounds with a fixed-seed generator so results are reproducible.
pub fn is_probable_prime(n: &BigUint) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime(small);
    }
    for &p in &SMALL_PRIMES {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let two = &one + &one;
    let n1 = n - &one;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_u64 ^ n.bits());
    'rounds: for _ in 0..40 {
        let a = rng.gen_biguint_range(&two, &n1);
        let mut x = a.modpow(&d, n);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n1 {
                continue 'rounds;
            }
        }
        return false;
    }
    true
}

fn pollard_rho_u64(n: u64) -> u64 {
    if n % 2 == 0 {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = x.abs_diff(y).gcd(&n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn factor_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho_u64(n);
    factor_into(d, out);
    factor_into(n / d, out);
}

fn collect(mut primes: Vec<u64>, value: u64) -> Factorization {
    primes.sort_unstable();
    let mut factors: Vec<(u64, u32)> = Vec::new();
    for p in primes {
        match factors.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => factors.push((p, 1)),
        }
    }
    Factorization { value, factors }
}

/// Prime factorization by trial division up to 1000 followed by Pollard rho.
pub fn factor(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::invalid("cannot factor 0"));
    }
    let mut primes = Vec::new();
    let mut m = n;
    let mut p = 2u64;
    while p < 1000 && p * p <= m {
        while m % p == 0 {
            primes.push(p);
            m /= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    factor_into(m, &mut primes);
    Ok(collect(primes, n))
}

fn pollard_rho_big(n: &BigUint) -> BigUint {
    let one = BigUint::one();
    let mut c = one.clone();
    loop {
        let f = |x: &BigUint| (x * x + &c) % n;
        let mut x = BigUint::from(2u32);
        let mut y = x.clone();
        let mut d = one.clone();
        while d == one {
            x = f(&x);
            y = f(&f(&y));
            let diff = if x > y { &x - &y } else { &y - &x };
            d = diff.gcd(n);
        }
        if &d != n {
            return d;
        }
        c += 1u32;
    }
}

fn factor_big_into(n: BigUint, out: &mut Vec<BigUint>) {
    if n.is_one() {
        return;
    }
    if let Some(small) = n.to_u64() {
        let f = factor(small).expect("nonzero");
        for (p, e) in f.factors {
            for _ in 0..e {
                out.push(BigUint::from(p));
            }
        }
        return;
    }
    if is_probable_prime(&n) {
        out.push(n);
        return;
    }
    let d = pollard_rho_big(&n);
    let rest = &n / &d;
    factor_big_into(d, out);
    factor_big_into(rest, out);
}

/// Factorization of an arbitrary-precision integer. Primality of large factors is
/// probabilistic (40 rounds).
pub fn factor_big(n: &BigUint) -> Result<BigFactorization> {
    if n.is_zero() {
        return Err(Error::invalid("cannot factor 0"));
    }
    let mut primes = Vec::new();
    let mut m = n.clone();
    for p in 2u32..1000 {
        while (&m % p).is_zero() {
            primes.push(BigUint::from(p));
            m /= p;
        }
    }
    factor_big_into(m, &mut primes);
    primes.sort();
    let mut factors: Vec<(BigUint, u32)> = Vec::new();
    for p in primes {
        match factors.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => factors.push((p, 1)),
        }
    }
    Ok(BigFactorization {
        value: n.clone(),
        factors,
    })
}

/// Sorted list of positive divisors.
pub fn divisors(n: u64) -> Vec<u64> {
    assert!(n > 0, "divisors of 0");
    let f = factor(n).expect("n > 0");
    let mut out = vec![1u64];
    for (p, e) in f.factors {
        let len = out.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                out.push(out[i] * pk);
            }
        }
    }
    out.sort_unstable();
    out
}

pub fn euler_phi(n: u64) -> u64 {
    let f = factor(n).expect("phi of 0");
    f.factors
        .iter()
        .map(|&(p, e)| (p - 1) * p.pow(e - 1))
        .product()
}

/// Primes `p <= n` by sieve.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (2..=n).filter(|&k| sieve[k]).map(|k| k as u64).collect()
}

/// Units of Z/m, ascending. `units_mod(1)` is `[0]`, the single residue.
pub fn units_mod(m: u64) -> Vec<u64> {
    if m == 1 {
        return vec![0];
    }
    (1..m).filter(|a| a.gcd(&m) == 1).collect()
}

/// Dense integer matrix, row-major, arbitrary precision.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix{:?}", self.to_rows())
    }
}

/// Result of comparing a sublattice with a superlattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LatticeIndex {
    Finite(BigInt),
    Infinite,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<BigInt>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix of shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(IntMatrix {
            rows,
            cols,
            entries,
        })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.entries[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from rows that all have length `cols`.
    pub fn from_rows<T: Clone + Into<BigInt>>(cols: usize, rows: &[Vec<T>]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            entries.extend(r.iter().cloned().map(Into::into));
        }
        IntMatrix {
            rows: rows.len(),
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.entries[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.rows {
            return Err(Error::invalid("matrix shapes do not compose"));
        }
        let mut out = Self::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let idx = i * other.cols + j;
                    out.entries[idx] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Stacks the rows of `self` on top of the rows of `other`.
    pub fn stack(&self, other: &IntMatrix) -> Result<IntMatrix> {
        if self.cols != other.cols {
            return Err(Error::invalid("cannot stack matrices of different widths"));
        }
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        Ok(IntMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            entries,
        })
    }

    /// Keeps only the nonzero rows.
    pub fn nonzero_rows(&self) -> IntMatrix {
        let kept: Vec<Vec<BigInt>> = self
            .to_rows()
            .into_iter()
            .filter(|r| r.iter().any(|x| !x.is_zero()))
            .collect();
        Self::from_rows(self.cols, &kept)
    }

    /// Row-style Hermite normal form of the row lattice. The output has the same shape;
    /// zero rows sit at the bottom, pivots are positive and entries above a pivot lie in
    /// `[0, pivot)`.
    pub fn hnf(&self) -> IntMatrix {
        hnf_impl(self, false).0
    }

    /// Hermite form `H` together with a unimodular `U` such that `U * self = H`.
    pub fn hnf_with_transform(&self) -> (IntMatrix, IntMatrix) {
        let (h, u) = hnf_impl(self, true);
        (h, u.expect("transform requested"))
    }

    pub fn rank(&self) -> usize {
        self.hnf().nonzero_rows().rows
    }

    /// Basis (in Hermite form) of the left kernel `{v : v * self = 0}`.
    pub fn left_kernel(&self) -> IntMatrix {
        let (h, u) = self.hnf_with_transform();
        let rank = h.nonzero_rows().rows;
        let rows: Vec<Vec<BigInt>> = (rank..self.rows).map(|i| u.row(i).to_vec()).collect();
        Self::from_rows(self.rows, &rows).hnf().nonzero_rows()
    }

    /// Coefficients `c` with `c * basis = v`, where `self` is in Hermite form.
    fn solve_in_hnf(&self, v: &[BigInt]) -> Option<Vec<BigInt>> {
        let mut rest = v.to_vec();
        let mut coeffs = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let row = self.row(i);
            let pivot = match row.iter().position(|x| !x.is_zero()) {
                Some(p) => p,
                None => break,
            };
            if rest[..pivot].iter().any(|x| !x.is_zero()) {
                return None;
            }
            let (q, r) = rest[pivot].div_rem(&row[pivot]);
            if !r.is_zero() {
                return None;
            }
            for (x, y) in rest.iter_mut().zip(row) {
                *x -= &q * y;
            }
            coeffs.push(q);
        }
        if rest.iter().all(Zero::is_zero) {
            Some(coeffs)
        } else {
            None
        }
    }

    /// Whether `v` lies in the row lattice.
    pub fn contains(&self, v: &[BigInt]) -> bool {
        self.hnf().nonzero_rows().solve_in_hnf(v).is_some()
    }

    /// Expresses every row of `sub` in the Hermite basis of `self`.
    pub fn coordinates_of(&self, sub: &IntMatrix) -> Result<IntMatrix> {
        let basis = self.hnf().nonzero_rows();
        let mut rows = Vec::with_capacity(sub.rows);
        for i in 0..sub.rows {
            match basis.solve_in_hnf(sub.row(i)) {
                Some(c) => rows.push(c),
                None => {
                    return Err(Error::invalid(format!(
                        "row {i} of the sublattice is not in the superlattice"
                    )))
                }
            }
        }
        Ok(Self::from_rows(basis.rows, &rows))
    }

    /// Invariant factors of the cokernel `Z^cols / rowspace`, including zeros for the free
    /// part, in divisibility order.
    pub fn smith_invariants(&self) -> Vec<BigInt> {
        let mut m = self.clone();
        loop {
            m = m.hnf().transpose().hnf().transpose();
            let diagonal = (0..m.rows).all(|i| {
                (0..m.cols).all(|j| i == j || m.get(i, j).is_zero())
            });
            if diagonal {
                break;
            }
        }
        let k = m.rows.min(m.cols);
        let mut d: Vec<BigInt> = (0..k).map(|i| m.get(i, i).abs()).collect();
        d.extend(std::iter::repeat_n(BigInt::zero(), self.cols - k));
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                let g = d[i].gcd(&d[j]);
                let l = if g.is_zero() {
                    BigInt::zero()
                } else {
                    (&d[i] * &d[j]).abs() / &g
                };
                d[i] = g;
                d[j] = l;
            }
        }
        d
    }
}

fn hnf_impl(m: &IntMatrix, track: bool) -> (IntMatrix, Option<IntMatrix>) {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.to_rows();
    let mut u = if track {
        Some(IntMatrix::identity(rows).to_rows())
    } else {
        None
    };
    let combine = |r1: &[BigInt], r2: &[BigInt], x: &BigInt, y: &BigInt| -> Vec<BigInt> {
        r1.iter().zip(r2).map(|(p, q)| x * p + y * q).collect()
    };
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        for i in r + 1..rows {
            if a[i][c].is_zero() {
                continue;
            }
            if a[r][c].is_zero() {
                a.swap(r, i);
                if let Some(u) = u.as_mut() {
                    u.swap(r, i);
                }
                continue;
            }
            let e = a[r][c].extended_gcd(&a[i][c]);
            let p = &a[r][c] / &e.gcd;
            let q = &a[i][c] / &e.gcd;
            let neg_q = -&q;
            let new_r = combine(&a[r], &a[i], &e.x, &e.y);
            let new_i = combine(&a[r], &a[i], &neg_q, &p);
            a[r] = new_r;
            a[i] = new_i;
            if let Some(u) = u.as_mut() {
                let ur = combine(&u[r], &u[i], &e.x, &e.y);
                let ui = combine(&u[r], &u[i], &neg_q, &p);
                u[r] = ur;
                u[i] = ui;
            }
        }
        if a[r][c].is_zero() {
            continue;
        }
        if a[r][c].is_negative() {
            for x in a[r].iter_mut() {
                *x = -&*x;
            }
            if let Some(u) = u.as_mut() {
                for x in u[r].iter_mut() {
                    *x = -&*x;
                }
            }
        }
        for i in 0..r {
            let k = a[i][c].div_floor(&a[r][c]);
            if k.is_zero() {
                continue;
            }
            let pivot_row = a[r].clone();
            for (x, y) in a[i].iter_mut().zip(&pivot_row) {
                *x -= &k * y;
            }
            if let Some(u) = u.as_mut() {
                let pivot_u = u[r].clone();
                for (x, y) in u[i].iter_mut().zip(&pivot_u) {
                    *x -= &k * y;
                }
            }
        }
        r += 1;
    }
    let h = IntMatrix::from_rows(cols, &a);
    let u = u.map(|u| IntMatrix::from_rows(rows, &u));
    (h, u)
}

/// Row-style Hermite normal form (free-function form of [`IntMatrix::hnf`]).
pub fn hnf(m: &IntMatrix) -> IntMatrix {
    m.hnf()
}

/// Index of the row lattice of `sub` inside that of `sup`.
pub fn lattice_index(sub: &IntMatrix, sup: &IntMatrix) -> Result<LatticeIndex> {
    if sub.cols != sup.cols {
        return Err(Error::invalid("lattices live in different ambient spaces"));
    }
    let coords = sup.coordinates_of(&sub.hnf().nonzero_rows())?;
    let sup_rank = sup.rank();
    let sub_rank = coords.rows;
    if sub_rank < sup_rank {
        return Ok(LatticeIndex::Infinite);
    }
    let h = coords.hnf();
    let mut det = BigInt::one();
    for i in 0..sup_rank {
        det *= h.get(i, i);
    }
    Ok(LatticeIndex::Finite(det.abs()))
}
