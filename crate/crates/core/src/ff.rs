//! Arithmetic in `F_{p^n}`, represented as `F_p[X]/(m(X))`.
//!
//! The modulus `m` is the smallest monic irreducible polynomial of degree `n`
//! when coefficient vectors are compared starting from the constant term.
//! Elements carry fully reduced coefficients and have a canonical integer
//! code `sum(c_i * p^i)`, constant term least significant.
//!
//! Two arithmetic routes exist. The [`Elem`] operations on [`FieldCtx`] are a
//! plain dense schoolbook implementation with `u128` intermediates. The
//! [`PowerMap`] kernel evaluates `x^k` and `(x+1)^k - x^k` directly on codes
//! with degree-specialised loops, Barrett reduction and a sparse modulus; it
//! is what the search uses. Tests pin one route against the other.

use std::fmt;

use rand::RngCore;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest supported extension degree (`3^40 > 2^63`).
pub const MAX_DEGREE: usize = 39;

/// Field orders must stay strictly below this bound so codes fit in one word.
pub const ORDER_BOUND: u64 = 1 << 63;

/// Characteristics below this use the specialised kernel; accumulators of
/// unreduced products then cannot overflow 64 bits for any supported degree.
const FAST_CHAR_LIMIT: u64 = 1 << 24;

/// Barrett reduction by a fixed odd modulus.
#[derive(Clone, Copy, Debug)]
struct Barrett {
    p: u64,
    m: u64,
}

impl Barrett {
    fn new(p: u64) -> Self {
        Barrett { p, m: u64::MAX / p }
    }

    #[inline(always)]
    fn divrem(&self, a: u64) -> (u64, u64) {
        let q = ((a as u128 * self.m as u128) >> 64) as u64;
        let r = a - q * self.p;
        if r >= self.p {
            (q + 1, r - self.p)
        } else {
            (q, r)
        }
    }

    #[inline(always)]
    fn reduce(&self, a: u64) -> u64 {
        self.divrem(a).1
    }
}

/// Immutable description of `F_{p^n}`.
#[derive(Clone)]
pub struct FieldCtx {
    p: u64,
    n: usize,
    q: u64,
    /// Monic, constant term first, length `n + 1`.
    modulus: Vec<u64>,
    /// Nonzero terms of `X^n mod m(X)`, as `(degree, coefficient)`.
    tail: Vec<(usize, u64)>,
    /// Whether high coefficients may be folded without intermediate reduction.
    lazy_fold: bool,
    /// Row-major `X^(n+i) mod m(X)` for `i < n - 1` when a dense unreduced
    /// fold is cheaper and cannot overflow; empty otherwise.
    dense_fold: Vec<u64>,
    barrett: Barrett,
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{}) mod {}", self.p, self.n, format_poly(&self.modulus))
    }
}

/// A field element: `n` coefficients in `[0, p)`, constant term first.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Elem(SmallVec<[u64; 8]>);

impl Elem {
    pub fn coeffs(&self) -> &[u64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

/// Deterministic Miller-Rabin, exact for every 64-bit input.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &s in &SMALL {
        if n % s == 0 {
            return n == s;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = powmod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[inline]
fn mulmod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod_u64(r, b, m);
        }
        b = mulmod_u64(b, b, m);
        e >>= 1;
    }
    r
}

/// `p^n`, or `None` if it does not fit below [`ORDER_BOUND`].
pub fn checked_order(p: u64, n: usize) -> Option<u64> {
    let mut q: u64 = 1;
    for _ in 0..n {
        q = q.checked_mul(p)?;
    }
    (q < ORDER_BOUND).then_some(q)
}

// ---------------------------------------------------------------------------
// Dense polynomials over F_p, used only for modulus selection.

fn poly_trim(a: &mut Vec<u64>) {
    while a.last() == Some(&0) {
        a.pop();
    }
}

fn poly_mulmod(a: &[u64], b: &[u64], f: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut t = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            t[i + j] = ((t[i + j] as u128 + x as u128 * y as u128) % p as u128) as u64;
        }
    }
    poly_rem_monic(t, f, p)
}

/// Remainder modulo a monic polynomial.
fn poly_rem_monic(mut t: Vec<u64>, f: &[u64], p: u64) -> Vec<u64> {
    let d = f.len() - 1;
    while t.len() > d {
        let c = t.pop().unwrap();
        if c != 0 {
            let base = t.len() - d;
            for j in 0..d {
                let sub = mulmod_u64(c, f[j], p);
                t[base + j] = (t[base + j] + p - sub) % p;
            }
        }
    }
    poly_trim(&mut t);
    t
}

fn poly_rem(mut a: Vec<u64>, b: &[u64], p: u64) -> Vec<u64> {
    let db = b.len() - 1;
    let inv = powmod_u64(b[db], p - 2, p);
    poly_trim(&mut a);
    while a.len() > db {
        let c = mulmod_u64(*a.last().unwrap(), inv, p);
        let base = a.len() - 1 - db;
        for j in 0..=db {
            let sub = mulmod_u64(c, b[j], p);
            a[base + j] = (a[base + j] + p - sub) % p;
        }
        poly_trim(&mut a);
    }
    a
}

fn poly_gcd(mut a: Vec<u64>, mut b: Vec<u64>, p: u64) -> Vec<u64> {
    poly_trim(&mut a);
    poly_trim(&mut b);
    while !b.is_empty() {
        let r = poly_rem(a, &b, p);
        a = b;
        b = r;
    }
    a
}

/// `base^(p^times)` modulo `f`, by repeated `p`-th powers.
fn poly_frobenius_iter(base: &[u64], times: usize, f: &[u64], p: u64) -> Vec<u64> {
    let mut cur = base.to_vec();
    for _ in 0..times {
        let mut acc = vec![1u64];
        let mut b = cur.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = poly_mulmod(&acc, &b, f, p);
            }
            e >>= 1;
            if e > 0 {
                b = poly_mulmod(&b, &b, f, p);
            }
        }
        cur = acc;
    }
    cur
}

fn prime_factors(mut d: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut r = 2;
    while r * r <= d {
        if d % r == 0 {
            out.push(r);
            while d % r == 0 {
                d /= r;
            }
        }
        r += 1;
    }
    if d > 1 {
        out.push(d);
    }
    out
}

/// Rabin's irreducibility test for a monic polynomial over `F_p`
/// (coefficients constant term first).
pub fn is_irreducible(poly: &[u64], p: u64) -> Result<bool> {
    if poly.len() < 2 || *poly.last().unwrap() != 1 || poly.iter().any(|&c| c >= p) {
        return Err(Error::MalformedPolynomial);
    }
    let d = poly.len() - 1;
    if d == 1 {
        return Ok(true);
    }
    if poly[0] == 0 {
        return Ok(false);
    }
    let x = vec![0, 1];
    let sub_x = |mut v: Vec<u64>| {
        v.resize(v.len().max(2), 0);
        v[1] = (v[1] + p - 1) % p;
        poly_trim(&mut v);
        v
    };
    if !sub_x(poly_frobenius_iter(&x, d, poly, p)).is_empty() {
        return Ok(false);
    }
    for r in prime_factors(d) {
        let h = sub_x(poly_frobenius_iter(&x, d / r, poly, p));
        if poly_gcd(poly.to_vec(), h, p).len() != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn format_poly(c: &[u64]) -> String {
    let mut terms = Vec::new();
    for (i, &v) in c.iter().enumerate().rev() {
        if v == 0 {
            continue;
        }
        let mono = match i {
            0 => String::new(),
            1 => "X".to_string(),
            _ => format!("X^{i}"),
        };
        terms.push(match (v, i) {
            (_, 0) => v.to_string(),
            (1, _) => mono,
            _ => format!("{v}{mono}"),
        });
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}

/// Worst-case coefficient growth when a full product is folded by the sparse
/// modulus with no reduction until the end; true if it stays within 64 bits.
fn lazy_fold_fits(p: u64, n: usize, tail: &[(usize, u64)]) -> bool {
    let start = n as u128 * (p as u128 - 1).pow(2);
    let mut lo = vec![start; n];
    let mut hi = vec![start; n];
    for i in (0..n.saturating_sub(1)).rev() {
        let c = hi[i];
        for &(j, t) in tail {
            let add = c.saturating_mul(t as u128);
            let slot = if i + j < n { &mut lo[i + j] } else { &mut hi[i + j - n] };
            *slot = slot.saturating_add(add);
        }
    }
    lo.iter().chain(&hi).all(|&v| v <= u64::MAX as u128)
}

const DENSE_FOLD_MAX_DEGREE: usize = 8;

fn dense_fold_fits(p: u64, n: usize) -> bool {
    let prod = n as u128 * (p as u128 - 1).pow(2);
    let total = prod + (n as u128 - 1) * prod * (p as u128 - 1);
    total <= u64::MAX as u128
}

fn dense_fold_rows(p: u64, n: usize, tail: &[(usize, u64)]) -> Vec<u64> {
    // row holds X^(n+i) mod m; multiplying by X shifts and folds the top.
    let mut row = vec![0u64; n];
    for &(j, t) in tail {
        row[j] = t;
    }
    let mut out = Vec::with_capacity(n * n);
    for _ in 0..n.saturating_sub(1) {
        out.extend_from_slice(&row);
        let top = row[n - 1];
        for j in (1..n).rev() {
            row[j] = row[j - 1];
        }
        row[0] = 0;
        for &(j, t) in tail {
            row[j] = (row[j] + top * t) % p;
        }
    }
    out
}

/// Smallest monic irreducible of degree `n`, comparing the constant term first.
fn smallest_irreducible(p: u64, n: usize) -> Vec<u64> {
    let mut poly = vec![0u64; n + 1];
    poly[n] = 1;
    if n == 1 {
        return poly;
    }
    // Odometer with the constant term as the most significant digit; a zero
    // constant term is never irreducible, so start at 1.
    poly[0] = 1;
    if is_irreducible(&poly, p).unwrap_or(false) {
        return poly;
    }
    loop {
        let mut i = n - 1;
        loop {
            poly[i] += 1;
            if poly[i] < p {
                break;
            }
            poly[i] = 0;
            if i == 0 {
                unreachable!("irreducible polynomials exist in every degree");
            }
            i -= 1;
        }
        if poly[0] != 0 && is_irreducible(&poly, p).unwrap_or(false) {
            return poly;
        }
    }
}

impl FieldCtx {
    /// Builds `F_{p^n}` with the deterministic modulus.
    pub fn new(p: u64, n: usize) -> Result<Self> {
        Self::with_bound(p, n, ORDER_BOUND)
    }

    /// As [`FieldCtx::new`], additionally rejecting orders above `max_order`.
    pub fn with_bound(p: u64, n: usize, max_order: u64) -> Result<Self> {
        if p == 2 {
            return Err(Error::CharacteristicTwo);
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 || n > MAX_DEGREE {
            return Err(Error::BadDegree(n));
        }
        let q = checked_order(p, n)
            .filter(|&q| q <= max_order)
            .ok_or(Error::FieldTooLarge { p, n })?;
        let modulus = smallest_irreducible(p, n);
        let tail: Vec<(usize, u64)> = (0..n)
            .filter(|&j| modulus[j] != 0)
            .map(|j| (j, (p - modulus[j]) % p))
            .collect();
        let lazy_fold = p < FAST_CHAR_LIMIT && lazy_fold_fits(p, n, &tail);
        let dense_fold = if lazy_fold && n <= DENSE_FOLD_MAX_DEGREE && dense_fold_fits(p, n) {
            dense_fold_rows(p, n, &tail)
        } else {
            Vec::new()
        };
        Ok(FieldCtx {
            p,
            n,
            q,
            modulus,
            tail,
            lazy_fold,
            dense_fold,
            barrett: Barrett::new(p),
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Modulus coefficients, constant term first, monic.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn modulus_string(&self) -> String {
        format_poly(&self.modulus)
    }

    pub fn zero(&self) -> Elem {
        Elem(SmallVec::from_elem(0, self.n))
    }

    pub fn one(&self) -> Elem {
        let mut e = self.zero();
        e.0[0] = 1;
        e
    }

    pub fn from_coeffs(&self, coeffs: &[u64]) -> Result<Elem> {
        if coeffs.len() != self.n || coeffs.iter().any(|&c| c >= self.p) {
            return Err(Error::BadElement);
        }
        Ok(Elem(SmallVec::from_slice(coeffs)))
    }

    pub fn element_from_code(&self, code: u64) -> Result<Elem> {
        if code >= self.q {
            return Err(Error::CodeOutOfRange { code, q: self.q });
        }
        let mut c = code;
        let mut e = self.zero();
        for slot in e.0.iter_mut() {
            *slot = c % self.p;
            c /= self.p;
        }
        Ok(e)
    }

    pub fn code_of(&self, e: &Elem) -> u64 {
        e.0.iter().rev().fold(0u64, |acc, &c| acc * self.p + c)
    }

    pub fn add(&self, a: &Elem, b: &Elem) -> Elem {
        Elem(a.0.iter().zip(&b.0).map(|(&x, &y)| (x + y) % self.p).collect())
    }

    pub fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        Elem(a.0.iter().zip(&b.0).map(|(&x, &y)| (x + self.p - y) % self.p).collect())
    }

    pub fn neg(&self, a: &Elem) -> Elem {
        Elem(a.0.iter().map(|&x| (self.p - x) % self.p).collect())
    }

    /// Dense schoolbook product reduced by the full modulus.
    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        let (p, n) = (self.p as u128, self.n);
        let mut t = vec![0u128; 2 * n - 1];
        for i in 0..n {
            for j in 0..n {
                t[i + j] = (t[i + j] + a.0[i] as u128 * b.0[j] as u128) % p;
            }
        }
        for i in (n..2 * n - 1).rev() {
            let c = t[i];
            if c == 0 {
                continue;
            }
            for j in 0..n {
                let neg = (p - self.modulus[j] as u128) % p;
                t[i - n + j] = (t[i - n + j] + c * neg) % p;
            }
        }
        Elem(t[..n].iter().map(|&v| v as u64).collect())
    }

    /// `x^k` by square-and-multiply; `x^0 = 1` for every `x`.
    pub fn pow(&self, x: &Elem, k: u64) -> Elem {
        let mut acc = self.one();
        let mut base = x.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    /// `(x+1)^k - x^k`, via the specialised kernel.
    pub fn delta(&self, k: u64, x: &Elem) -> Elem {
        let code = PowerMap::new(self, k).delta(self.code_of(x));
        self.element_from_code(code).expect("kernel returns in-range codes")
    }

    /// A uniform element: the 64-bit draw is scaled onto `[0, q)` by a
    /// widening multiply, so every draw yields an element.
    pub fn random_element<R: RngCore + ?Sized>(&self, rng: &mut R) -> Elem {
        self.element_from_code(self.random_code(rng))
            .expect("scaled draw is below q")
    }

    #[inline]
    pub fn random_code<R: RngCore + ?Sized>(&self, rng: &mut R) -> u64 {
        ((rng.next_u64() as u128 * self.q as u128) >> 64) as u64
    }
}

// ---------------------------------------------------------------------------
// Specialised kernel.

/// Precomputed evaluator of `x -> x^k` and `x -> (x+1)^k - x^k` on codes.
pub struct PowerMap<'a> {
    ctx: &'a FieldCtx,
    k: u64,
    /// Exponent bits below the leading one, most significant first.
    bits: Vec<bool>,
}

/// Degree-`N` arithmetic on coefficient arrays.
struct Kernel<'a, const N: usize> {
    p: u64,
    red: Barrett,
    tail: &'a [(usize, u64)],
    lazy: bool,
    dense: &'a [u64],
}

impl<const N: usize> Kernel<'_, N> {
    #[inline(always)]
    fn decode(&self, mut code: u64) -> [u64; N] {
        let mut out = [0u64; N];
        for slot in out.iter_mut() {
            let (q, r) = self.red.divrem(code);
            *slot = r;
            code = q;
        }
        out
    }

    #[inline(always)]
    fn encode(&self, a: &[u64; N]) -> u64 {
        a.iter().rev().fold(0u64, |acc, &c| acc * self.p + c)
    }

    #[inline(always)]
    fn reduce(&self, mut lo: [u64; N], mut hi: [u64; N]) -> [u64; N] {
        // hi[i] holds the coefficient of X^(N+i); hi[N-1] is unused.
        if N > 1 && self.dense.len() == N * (N - 1) {
            let rows = &self.dense[..N * (N - 1)];
            for i in 0..N - 1 {
                for t in 0..N {
                    lo[t] += hi[i] * rows[i * N + t];
                }
            }
            for v in lo.iter_mut() {
                *v = self.red.reduce(*v);
            }
            return lo;
        }
        for i in (0..N.saturating_sub(1)).rev() {
            let c = if self.lazy { hi[i] } else { self.red.reduce(hi[i]) };
            for &(j, t) in self.tail {
                let idx = i + j;
                if idx < N {
                    lo[idx] += c * t;
                } else {
                    hi[idx - N] += c * t;
                }
            }
        }
        for v in lo.iter_mut() {
            *v = self.red.reduce(*v);
        }
        lo
    }

    #[inline(always)]
    fn mul(&self, a: &[u64; N], b: &[u64; N]) -> [u64; N] {
        let mut lo = [0u64; N];
        let mut hi = [0u64; N];
        for i in 0..N {
            for j in 0..N {
                let v = a[i] * b[j];
                if i + j < N {
                    lo[i + j] += v;
                } else {
                    hi[i + j - N] += v;
                }
            }
        }
        self.reduce(lo, hi)
    }

    #[inline(always)]
    fn sqr(&self, a: &[u64; N]) -> [u64; N] {
        let mut lo = [0u64; N];
        let mut hi = [0u64; N];
        for i in 0..N {
            let d = a[i] * a[i];
            if 2 * i < N {
                lo[2 * i] += d;
            } else {
                hi[2 * i - N] += d;
            }
            let twice = 2 * a[i];
            for j in i + 1..N {
                let v = twice * a[j];
                if i + j < N {
                    lo[i + j] += v;
                } else {
                    hi[i + j - N] += v;
                }
            }
        }
        self.reduce(lo, hi)
    }

    #[inline(always)]
    fn pow(&self, x: &[u64; N], bits: &[bool]) -> [u64; N] {
        let mut r = *x;
        for &b in bits {
            r = self.sqr(&r);
            if b {
                r = self.mul(&r, x);
            }
        }
        r
    }

    /// Both powers advance in lockstep so the two chains overlap.
    #[inline(always)]
    fn pow_pair(&self, x: &[u64; N], y: &[u64; N], bits: &[bool]) -> ([u64; N], [u64; N]) {
        let mut rx = *x;
        let mut ry = *y;
        for &b in bits {
            rx = self.sqr(&rx);
            ry = self.sqr(&ry);
            if b {
                rx = self.mul(&rx, x);
                ry = self.mul(&ry, y);
            }
        }
        (rx, ry)
    }

    #[inline(always)]
    fn sub(&self, a: &[u64; N], b: &[u64; N]) -> [u64; N] {
        let mut out = [0u64; N];
        for i in 0..N {
            let v = a[i] + self.p - b[i];
            out[i] = if v >= self.p { v - self.p } else { v };
        }
        out
    }

    fn delta(&self, x: u64, bits: &[bool]) -> u64 {
        let a = self.decode(x);
        let mut b = a;
        b[0] = if b[0] + 1 == self.p { 0 } else { b[0] + 1 };
        let (ra, rb) = self.pow_pair(&a, &b, bits);
        self.encode(&self.sub(&rb, &ra))
    }

    fn power(&self, x: u64, bits: &[bool]) -> u64 {
        self.encode(&self.pow(&self.decode(x), bits))
    }

    /// Calls `f(x, delta(x))` for every code in `rows`, where each row is the
    /// `p` consecutive codes sharing all but the constant coefficient. Each
    /// power is computed once and shared between neighbouring differences.
    fn scan_rows<F>(&self, rows: std::ops::Range<u64>, bits: &[bool], buf: &mut Vec<[u64; N]>, mut f: F) -> bool
    where
        F: FnMut(u64, u64) -> bool,
    {
        let p = self.p;
        for row in rows {
            let base = row * p;
            let mut digits = self.decode(base);
            buf.clear();
            for j in 0..p {
                digits[0] = j;
                buf.push(self.pow(&digits, bits));
            }
            for j in 0..p {
                let next = if j + 1 == p { 0 } else { j + 1 };
                let d = self.encode(&self.sub(&buf[next as usize], &buf[j as usize]));
                if !f(base + j, d) {
                    return false;
                }
            }
        }
        true
    }
}

macro_rules! dispatch {
    ($self:ident, $n:expr, |$k:ident| $body:expr) => {
        dispatch!(@arms $self, $n, $k, $body;
            1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18 19 20
            21 22 23 24 25 26 27 28 29 30 31 32 33 34 35 36 37 38 39)
    };
    (@arms $self:ident, $n:expr, $k:ident, $body:expr; $($d:literal)*) => {
        match $n {
            $( $d => {
                let $k = Kernel::<$d> {
                    p: $self.ctx.p,
                    red: $self.ctx.barrett,
                    tail: &$self.ctx.tail,
                    lazy: $self.ctx.lazy_fold,
                    dense: &$self.ctx.dense_fold,
                };
                $body
            } )*
            _ => unreachable!("degree bounded by MAX_DEGREE"),
        }
    };
}

impl<'a> PowerMap<'a> {
    /// Evaluator for exponent `k >= 1`.
    pub fn new(ctx: &'a FieldCtx, k: u64) -> Self {
        assert!(k >= 1, "exponent must be positive");
        let top = 63 - k.leading_zeros();
        let bits = (0..top).rev().map(|i| (k >> i) & 1 == 1).collect();
        PowerMap { ctx, k, bits }
    }

    pub fn ctx(&self) -> &FieldCtx {
        self.ctx
    }

    pub fn exponent(&self) -> u64 {
        self.k
    }

    fn is_fast(&self) -> bool {
        self.ctx.p < FAST_CHAR_LIMIT
    }

    /// `x^k` on codes.
    pub fn power(&self, x: u64) -> u64 {
        if !self.is_fast() {
            let c = self.ctx;
            return c.code_of(&c.pow(&c.element_from_code(x).unwrap(), self.k));
        }
        let bits = &self.bits;
        dispatch!(self, self.ctx.n, |kern| kern.power(x, bits))
    }

    /// `(x+1)^k - x^k` on codes.
    pub fn delta(&self, x: u64) -> u64 {
        if !self.is_fast() {
            let c = self.ctx;
            let e = c.element_from_code(x).unwrap();
            let e1 = c.add(&e, &c.one());
            return c.code_of(&c.sub(&c.pow(&e1, self.k), &c.pow(&e, self.k)));
        }
        let bits = &self.bits;
        dispatch!(self, self.ctx.n, |kern| kern.delta(x, bits))
    }

    /// Visits `(x, delta(x))` for all codes `x` in `[row_start * p, row_end * p)`.
    /// Stops early and returns `false` as soon as `f` returns `false`.
    pub fn for_each_delta<F>(&self, rows: std::ops::Range<u64>, mut f: F) -> bool
    where
        F: FnMut(u64, u64) -> bool,
    {
        if !self.is_fast() {
            let p = self.ctx.p;
            for x in rows.start * p..rows.end * p {
                if !f(x, self.delta(x)) {
                    return false;
                }
            }
            return true;
        }
        let bits = &self.bits;
        dispatch!(self, self.ctx.n, |kern| {
            let mut buf = Vec::with_capacity(kern.p as usize);
            kern.scan_rows(rows.clone(), bits, &mut buf, &mut f)
        })
    }
}
