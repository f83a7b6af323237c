//! Necessary conditions that shrink the exponent range before any search.
//!
//! A planar `X^k` over `F_{p^n}` satisfies `gcd(k, q - 1) = 2`, stays planar
//! on every subfield `F_{p^d}` (`d | n`), and its whole orbit
//! `{p^a k mod q - 1}` is graph equivalent, so only the orbit minimum is
//! examined.

use crate::catalog::known_planar_exponents;
use crate::error::{Error, Result};
use crate::ff::checked_order;

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[inline]
fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    match a.checked_mul(b) {
        Some(v) => v % m,
        None => ((a as u128 * b as u128) % m as u128) as u64,
    }
}

/// True iff `gcd(k, q - 1) = 2`; false means `X^k` is certainly not planar.
pub fn gcd_filter(k: u64, q: u64) -> bool {
    gcd(k, q - 1) == 2
}

fn order_minus_one(p: u64, n: usize) -> u64 {
    checked_order(p, n).expect("field order validated by caller") - 1
}

/// Minimum of the orbit `{p^a k mod p^n - 1 : 0 <= a < n}`.
pub fn canonical_exponent(k: u64, p: u64, n: usize) -> u64 {
    let m = order_minus_one(p, n);
    let mut cur = k % m;
    let mut best = cur;
    for _ in 1..n {
        cur = mulmod(cur, p, m);
        best = best.min(cur);
    }
    best
}

/// True iff `k` is the minimum of its orbit. Exits on the first smaller member.
pub fn is_canonical(k: u64, p: u64, n: usize) -> bool {
    let m = order_minus_one(p, n);
    is_canonical_mod(k, p, n, m)
}

#[inline]
pub(crate) fn is_canonical_mod(k: u64, p: u64, n: usize, m: u64) -> bool {
    let mut cur = k;
    for _ in 1..n {
        cur = mulmod(cur, p, m);
        if cur < k {
            return false;
        }
    }
    true
}

/// Every residue `p^a k mod p^n - 1`, sorted and de-duplicated.
pub fn orbit(k: u64, p: u64, n: usize) -> Vec<u64> {
    let m = order_minus_one(p, n);
    let mut out = Vec::with_capacity(n);
    let mut cur = k % m;
    for _ in 0..n {
        out.push(cur);
        cur = mulmod(cur, p, m);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Whether the planar classification of `F_{p^d}` is known in closed form.
pub fn has_analytic_rule(p: u64, d: usize) -> bool {
    matches!(d, 1..=3) || (d == 4 && p >= 5)
}

/// Residues modulo `p^d - 1` of the exponents planar over `F_{p^d}`, for the
/// degrees classified in closed form:
///
/// * `d = 1`: `k = 2`
/// * `d = 2`: `k = 2` or `2p`
/// * `d = 3`: `k = p^i + p^j`
/// * `d = 4`, `p >= 5`: `k = 2p^j`
pub fn closed_form_residues(p: u64, d: usize) -> Result<Vec<u64>> {
    if !has_analytic_rule(p, d) {
        return Err(Error::NoAnalyticRule { p, d });
    }
    let m = order_minus_one(p, d);
    let pw = |i: u32| p.pow(i) % m;
    let mut out: Vec<u64> = match d {
        1 => vec![2 % m],
        2 => vec![2 % m, (2 * p) % m],
        3 => (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (pw(i) + pw(j)) % m)
            .collect(),
        _ => (0..4).map(|j| (2 * pw(j)) % m).collect(),
    };
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Closed-form planarity of `X^k` over `F_{p^d}`, `d <= 4`.
pub fn closed_form_allows(k: u64, p: u64, d: usize) -> Result<bool> {
    let m = order_minus_one(p, d);
    Ok(closed_form_residues(p, d)?.contains(&(k % m)))
}

/// Where a subfield's allowed residues came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleSource {
    Analytic,
    Cached,
}

#[derive(Clone, Debug)]
pub struct SubfieldRule {
    pub degree: usize,
    /// `p^degree - 1`.
    pub modulus: u64,
    pub source: RuleSource,
    /// Sorted residues modulo `modulus`.
    pub allowed: Vec<u64>,
}

impl SubfieldRule {
    #[inline]
    pub fn allows(&self, k: u64) -> bool {
        self.allowed.binary_search(&(k % self.modulus)).is_ok()
    }
}

/// Per proper divisor of `n`, the residues an exponent must hit to stay
/// planar on that subfield.
#[derive(Clone, Debug)]
pub struct SubfieldRuleSet {
    p: u64,
    n: usize,
    rules: Vec<SubfieldRule>,
}

/// Proper divisors of `n`, ascending.
pub fn proper_divisors(n: usize) -> Vec<usize> {
    (1..n).filter(|d| n % d == 0).collect()
}

/// Proper divisors of `n` whose classification has to come from a completed
/// run rather than a closed form.
pub fn divisors_needing_cache(p: u64, n: usize) -> Vec<usize> {
    proper_divisors(n)
        .into_iter()
        .filter(|&d| !has_analytic_rule(p, d))
        .collect()
}

impl SubfieldRuleSet {
    /// Builds the rule set. `cached(d)` must return the planar canonical
    /// exponents of `F_{p^d}` for every divisor listed by
    /// [`divisors_needing_cache`]; divisors it cannot supply are left out.
    pub fn build<F>(p: u64, n: usize, mut cached: F) -> Result<Self>
    where
        F: FnMut(usize) -> Option<Vec<u64>>,
    {
        let mut rules = Vec::new();
        for d in proper_divisors(n) {
            let modulus = order_minus_one(p, d);
            if has_analytic_rule(p, d) {
                rules.push(SubfieldRule {
                    degree: d,
                    modulus,
                    source: RuleSource::Analytic,
                    allowed: closed_form_residues(p, d)?,
                });
            } else if let Some(planar) = cached(d) {
                let mut allowed: Vec<u64> = planar.iter().flat_map(|&k| orbit(k, p, d)).collect();
                allowed.sort_unstable();
                allowed.dedup();
                rules.push(SubfieldRule {
                    degree: d,
                    modulus,
                    source: RuleSource::Cached,
                    allowed,
                });
            }
        }
        Ok(SubfieldRuleSet { p, n, rules })
    }

    /// Only the closed-form rules.
    pub fn analytic(p: u64, n: usize) -> Result<Self> {
        Self::build(p, n, |_| None)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rules(&self) -> &[SubfieldRule] {
        &self.rules
    }

    /// Divisors that should have a cached rule but do not.
    pub fn missing(&self) -> Vec<usize> {
        divisors_needing_cache(self.p, self.n)
            .into_iter()
            .filter(|d| !self.rules.iter().any(|r| r.degree == *d))
            .collect()
    }
}

/// True iff `k` survives every subfield rule.
pub fn subfield_filter(k: u64, rules: &SubfieldRuleSet) -> bool {
    rules.rules.iter().all(|r| r.allows(k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZieveVerdict {
    MustSearch,
    ProvablyNotPlanar,
    KnownFamily,
}

/// For `q >= (k-1)^4` and `p` not dividing `k`, only the known families are
/// planar, so anything else can be discarded without a search.
pub fn zieve_bound_filter(k: u64, p: u64, n: usize, known: &[u64]) -> ZieveVerdict {
    let canon = canonical_exponent(k, p, n);
    if known.contains(&canon) {
        return ZieveVerdict::KnownFamily;
    }
    if k % p == 0 {
        return ZieveVerdict::MustSearch;
    }
    let q = order_minus_one(p, n) as u128 + 1;
    let km1 = (k - 1) as u128;
    match km1.checked_pow(4) {
        Some(b) if q >= b => ZieveVerdict::ProvablyNotPlanar,
        _ => ZieveVerdict::MustSearch,
    }
}

/// Convenience wrapper computing the known set on the fly.
pub fn zieve_bound_filter_auto(k: u64, p: u64, n: usize) -> ZieveVerdict {
    zieve_bound_filter(k, p, n, &known_planar_exponents(p, n))
}

/// Graph equivalence of two monomials: `l = p^a k` or `k l = p^a`
/// modulo `p^n - 1` for some `0 <= a < n`.
pub fn are_graph_equivalent_monomials(k: u64, l: u64, p: u64, n: usize) -> bool {
    let m = order_minus_one(p, n);
    let (k, l) = (k % m, l % m);
    let kl = mulmod(k, l, m);
    let mut pa = 1 % m;
    let mut scaled = k;
    for _ in 0..n {
        if scaled == l || kl == pa {
            return true;
        }
        scaled = mulmod(scaled, p, m);
        pa = mulmod(pa, p, m);
    }
    false
}
