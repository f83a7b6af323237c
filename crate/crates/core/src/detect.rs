//! Planarity decisions for a single exponent.
//!
//! [`collision_search`] draws random points and looks for two distinct
//! preimages with the same `Δ_k` value. A collision certifies that `X^k` is
//! not planar; surviving `N` draws only makes `k` a candidate, which
//! [`exhaustive_verify`] then settles by scanning the whole field.
//! [`oracle_full_planarity`] is the definitional check used as ground truth.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ff::{FieldCtx, PowerMap};

/// Default field-order limit for the definitional oracle (`3^7`).
pub const DEFAULT_ORACLE_BOUND: u64 = 2187;

const RNG_DOMAIN: &[u8] = b"planar-monomials/collision-search/v1";

/// Per-exponent random stream, derived from the master seed and `(p, n, k)`.
#[derive(Clone)]
pub struct RngState {
    rng: ChaCha8Rng,
    tag: (u64, u64, usize, u64),
}

impl RngState {
    pub fn for_exponent(master_seed: u64, p: u64, n: usize, k: u64) -> Self {
        let mut h = Sha256::new();
        h.update(RNG_DOMAIN);
        h.update(master_seed.to_le_bytes());
        h.update(p.to_le_bytes());
        h.update((n as u64).to_le_bytes());
        h.update(k.to_le_bytes());
        let seed: [u8; 32] = h.finalize().into();
        RngState {
            rng: ChaCha8Rng::from_seed(seed),
            tag: (master_seed, p, n, k),
        }
    }

    /// `(master_seed, p, n, k)` this stream was derived from.
    pub fn tag(&self) -> (u64, u64, usize, u64) {
        self.tag
    }

    #[inline]
    pub fn next_code(&mut self, ctx: &FieldCtx) -> u64 {
        ctx.random_code(&mut self.rng)
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Two distinct points with equal `Δ_k`, as element codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Witness {
    pub x1: u64,
    pub x2: u64,
}

impl Witness {
    /// Recomputes both differences with the dense arithmetic route.
    pub fn validate(&self, ctx: &FieldCtx, k: u64) -> bool {
        if self.x1 == self.x2 || self.x1 >= ctx.q() || self.x2 >= ctx.q() {
            return false;
        }
        let d = |x: u64| {
            let e = ctx.element_from_code(x).unwrap();
            let e1 = ctx.add(&e, &ctx.one());
            ctx.sub(&ctx.pow(&e1, k), &ctx.pow(&e, k))
        };
        d(self.x1) == d(self.x2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    FilteredGcd,
    FilteredSubfield,
    NonCanonical,
    ProvablyNotPlanarBound,
    CollisionNotPlanar(Witness),
    VerifiedNotPlanar(Witness),
    VerifiedPlanar,
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::FilteredGcd => "filtered-gcd",
            Outcome::FilteredSubfield => "filtered-subfield",
            Outcome::NonCanonical => "non-canonical",
            Outcome::ProvablyNotPlanarBound => "bound-not-planar",
            Outcome::CollisionNotPlanar(_) => "collision",
            Outcome::VerifiedNotPlanar(_) => "verified-not-planar",
            Outcome::VerifiedPlanar => "verified-planar",
        }
    }

    pub fn witness(&self) -> Option<Witness> {
        match *self {
            Outcome::CollisionNotPlanar(w) | Outcome::VerifiedNotPlanar(w) => Some(w),
            _ => None,
        }
    }
}

/// Pipeline result for one exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExponentVerdict {
    pub k: u64,
    pub outcome: Outcome,
    pub draws_used: u64,
}

impl fmt::Display for ExponentVerdict {
    /// `k=<k> outcome=<label> draws=<n>[ x1=<code> x2=<code>]`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={} outcome={} draws={}", self.k, self.outcome.label(), self.draws_used)?;
        if let Some(w) = self.outcome.witness() {
            write!(f, " x1={} x2={}", w.x1, w.x2)?;
        }
        Ok(())
    }
}

impl FromStr for ExponentVerdict {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut k = None;
        let mut label = None;
        let mut draws = None;
        let mut x1 = None;
        let mut x2 = None;
        for field in s.split_whitespace() {
            let (key, val) = field.split_once('=').ok_or_else(|| format!("bad field {field:?}"))?;
            let num = || val.parse::<u64>().map_err(|e| format!("{key}: {e}"));
            match key {
                "k" => k = Some(num()?),
                "outcome" => label = Some(val),
                "draws" => draws = Some(num()?),
                "x1" => x1 = Some(num()?),
                "x2" => x2 = Some(num()?),
                _ => return Err(format!("unknown field {key:?}")),
            }
        }
        let witness = || match (x1, x2) {
            (Some(x1), Some(x2)) => Ok(Witness { x1, x2 }),
            _ => Err("missing witness".to_string()),
        };
        let outcome = match label.ok_or("missing outcome")? {
            "filtered-gcd" => Outcome::FilteredGcd,
            "filtered-subfield" => Outcome::FilteredSubfield,
            "non-canonical" => Outcome::NonCanonical,
            "bound-not-planar" => Outcome::ProvablyNotPlanarBound,
            "collision" => Outcome::CollisionNotPlanar(witness()?),
            "verified-not-planar" => Outcome::VerifiedNotPlanar(witness()?),
            "verified-planar" => Outcome::VerifiedPlanar,
            other => return Err(format!("unknown outcome {other:?}")),
        };
        Ok(ExponentVerdict {
            k: k.ok_or("missing k")?,
            outcome,
            draws_used: draws.ok_or("missing draws")?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchResult {
    /// No collision within the draw budget.
    Candidate { draws: u64 },
    NotPlanar { witness: Witness, draws: u64 },
}

/// Reusable membership sets for [`collision_search`].
#[derive(Default)]
pub struct CollisionScratch {
    sampled: FxHashSet<u64>,
    images: FxHashMap<u64, u64>,
}

impl CollisionScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

/// `ceil(multiplier * sqrt(q))`.
pub fn default_n(q: u64, multiplier: f64) -> Result<u64> {
    if !(multiplier > 0.0) || !multiplier.is_finite() {
        return Err(Error::Config(format!("N multiplier must be positive, got {multiplier}")));
    }
    Ok((multiplier * (q as f64).sqrt()).ceil() as u64)
}

/// Upper bound `exp(-N(N-1)/q)` on the chance that a random mapping shows no
/// collision in `N` draws.
pub fn false_positive_bound(n_draws: u64, q: u64) -> f64 {
    let n = n_draws as f64;
    (-n * (n - 1.0) / q as f64).exp()
}

/// Randomised collision search on `x -> Δ_k(x)`.
///
/// Runs `n_draws` iterations. Each draws `x` uniformly; a repeated `x` is
/// skipped, otherwise a repeated image ends the search with a witness.
pub fn collision_search(
    map: &PowerMap<'_>,
    n_draws: u64,
    rng: &mut RngState,
    scratch: &mut CollisionScratch,
) -> SearchResult {
    let ctx = map.ctx();
    scratch.sampled.clear();
    scratch.images.clear();
    let hint = n_draws.min(1 << 20) as usize;
    scratch.sampled.reserve(hint);
    scratch.images.reserve(hint);
    for i in 0..n_draws {
        let x = rng.next_code(ctx);
        if !scratch.sampled.insert(x) {
            continue;
        }
        let d = map.delta(x);
        if let Some(&prev) = scratch.images.get(&d) {
            return SearchResult::NotPlanar {
                witness: Witness { x1: prev, x2: x },
                draws: i + 1,
            };
        }
        scratch.images.insert(d, x);
    }
    SearchResult::Candidate { draws: n_draws }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verification {
    VerifiedPlanar,
    VerifiedNotPlanar(Witness),
}

/// Rows (of `p` consecutive codes) per parallel task.
const ROWS_PER_TASK: u64 = 1 << 12;

fn alloc_bits(q: u64) -> Result<Vec<AtomicU64>> {
    let words = q.div_ceil(64);
    let mut v = Vec::new();
    v.try_reserve_exact(words as usize)
        .map_err(|_| Error::Allocation { bytes: words * 8 })?;
    v.extend((0..words).map(|_| AtomicU64::new(0)));
    Ok(v)
}

/// Marks `d`; returns true if it was already marked.
#[inline]
fn test_and_set(bits: &[AtomicU64], d: u64) -> bool {
    let bit = 1u64 << (d % 64);
    bits[(d / 64) as usize].fetch_or(bit, Ordering::Relaxed) & bit != 0
}

/// Decides planarity by checking that `Δ_k` hits every element exactly once.
///
/// The scan runs in parallel; if any repeat shows up, a sequential pass finds
/// the first repeated image in code order, so the witness is deterministic.
pub fn exhaustive_verify(ctx: &FieldCtx, k: u64) -> Result<Verification> {
    let map = PowerMap::new(ctx, k);
    let q = ctx.q();
    let rows = q / ctx.p();
    let bits = alloc_bits(q)?;
    let repeat = AtomicBool::new(false);
    let tasks = rows.div_ceil(ROWS_PER_TASK);
    (0..tasks).into_par_iter().for_each(|t| {
        if repeat.load(Ordering::Relaxed) {
            return;
        }
        let range = t * ROWS_PER_TASK..((t + 1) * ROWS_PER_TASK).min(rows);
        map.for_each_delta(range, |_, d| {
            if test_and_set(&bits, d) {
                repeat.store(true, Ordering::Relaxed);
                return false;
            }
            true
        });
    });
    if !repeat.load(Ordering::Relaxed) {
        return Ok(Verification::VerifiedPlanar);
    }
    drop(bits);
    let bits = alloc_bits(q)?;
    let mut second = None;
    map.for_each_delta(0..rows, |x, d| {
        if test_and_set(&bits, d) {
            second = Some((x, d));
            return false;
        }
        true
    });
    let (x2, image) = second.expect("parallel pass saw a repeat");
    let mut first = None;
    map.for_each_delta(0..rows, |x, d| {
        if d == image {
            first = Some(x);
            return false;
        }
        true
    });
    let x1 = first.expect("image was marked by an earlier point");
    Ok(Verification::VerifiedNotPlanar(Witness { x1, x2 }))
}

/// Definitional planarity: for every `a != 0`, `x -> (x+a)^k - x^k` is a
/// bijection. Uses only the dense arithmetic route. Cost `O(q^2)`.
pub fn oracle_full_planarity(ctx: &FieldCtx, k: u64, bound: u64) -> Result<bool> {
    let q = ctx.q();
    if q > bound {
        return Err(Error::OracleBound { q, bound });
    }
    let (p, n) = (ctx.p(), ctx.n());
    let elems: Vec<_> = (0..q).map(|c| ctx.element_from_code(c).unwrap()).collect();
    let table: Vec<u64> = elems.iter().map(|e| ctx.code_of(&ctx.pow(e, k))).collect();
    let digits: Vec<u64> = elems.iter().flat_map(|e| e.coeffs().iter().copied()).collect();
    let pw: Vec<u64> = (0..n).map(|i| p.pow(i as u32)).collect();
    let add = |x: usize, a: usize| -> usize {
        let (dx, da) = (&digits[x * n..(x + 1) * n], &digits[a * n..(a + 1) * n]);
        (0..n).map(|i| ((dx[i] + da[i]) % p) * pw[i]).sum::<u64>() as usize
    };
    let sub = |u: u64, v: u64| -> usize {
        let (du, dv) = (&digits[u as usize * n..][..n], &digits[v as usize * n..][..n]);
        (0..n).map(|i| ((du[i] + p - dv[i]) % p) * pw[i]).sum::<u64>() as usize
    };
    let mut seen = vec![0u64; q as usize];
    for a in 1..q as usize {
        let stamp = a as u64;
        for x in 0..q as usize {
            let img = sub(table[add(x, a)], table[x]);
            if seen[img] == stamp {
                return Ok(false);
            }
            seen[img] = stamp;
        }
    }
    Ok(true)
}
