//! Known planar families, per-field classification records and the search
//! pipeline that produces them.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detect::{
    collision_search, default_n, exhaustive_verify, false_positive_bound, oracle_full_planarity,
    CollisionScratch, ExponentVerdict, Outcome, RngState, SearchResult, Verification,
};
use crate::error::{Error, Result};
use crate::ff::{checked_order, is_prime, FieldCtx, PowerMap};
use crate::sieve::{
    canonical_exponent, gcd, gcd_filter, has_analytic_rule, is_canonical_mod, subfield_filter,
    closed_form_residues, zieve_bound_filter, RuleSource, SubfieldRuleSet, ZieveVerdict,
};

/// Canonical exponents of the known planar monomials over `F_{p^n}`:
/// `X^(p^i + 1)` whenever `p * n / gcd(i, n)` is odd, and for `p = 3` the
/// Coulter-Matthews exponents `(3^i + 1) / 2` with `2 < i < n`,
/// `gcd(i, 2n) = 1`. Exponents are reduced modulo `q - 1` and kept only if
/// they land in `[2, q - 2]`.
pub fn known_planar_exponents(p: u64, n: usize) -> Vec<u64> {
    let q = checked_order(p, n).expect("supported field");
    let m = q - 1;
    let mut raw = Vec::new();
    for i in 0..n {
        if (p * (n / gcd(i as u64, n as u64) as usize) as u64) % 2 == 1 {
            raw.push(p.pow(i as u32) + 1);
        }
    }
    if p == 3 {
        for i in 3..n {
            if gcd(i as u64, 2 * n as u64) == 1 {
                raw.push((3u64.pow(i as u32) + 1) / 2);
            }
        }
    }
    let mut out: Vec<u64> = raw
        .into_iter()
        .map(|e| e % m)
        .filter(|&e| e >= 2 && e + 2 <= q)
        .map(|e| canonical_exponent(e, p, n))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn expected_known_class_count(p: u64, n: usize) -> usize {
    known_planar_exponents(p, n).len()
}

pub fn is_known_family(k: u64, p: u64, n: usize) -> bool {
    known_planar_exponents(p, n).contains(&canonical_exponent(k, p, n))
}

/// Published class counts for `n >= 5`, as `(n, p, classes)`.
pub const REFERENCE_VERSION: u32 = 1;

#[rustfmt::skip]
pub const REFERENCE_COUNTS: &[(usize, u64, usize)] = &[
    (5, 3, 4), (5, 5, 3), (5, 7, 3), (5, 11, 3), (5, 13, 3), (5, 17, 3), (5, 19, 3),
    (5, 23, 3), (5, 29, 3), (5, 31, 3), (5, 37, 3), (5, 41, 3), (5, 43, 3), (5, 47, 3),
    (5, 53, 3), (5, 59, 3), (5, 61, 3),
    (6, 3, 3), (6, 5, 2), (6, 7, 2), (6, 11, 2), (6, 13, 2), (6, 17, 2), (6, 19, 2),
    (6, 23, 2), (6, 29, 2), (6, 31, 2), (6, 37, 2),
    (7, 3, 6), (7, 5, 4), (7, 7, 4), (7, 11, 4), (7, 13, 4), (7, 17, 4), (7, 19, 4),
    (8, 3, 4), (8, 5, 1), (8, 7, 1), (8, 11, 1), (8, 13, 1), (8, 17, 1), (8, 19, 1),
    (9, 3, 7), (9, 5, 5), (9, 7, 5), (9, 11, 5),
    (10, 3, 6), (10, 5, 3), (10, 7, 3), (10, 11, 3),
    (11, 3, 10), (11, 5, 6),
    (12, 3, 5), (12, 5, 2),
    (13, 3, 12),
    (14, 3, 9),
    (15, 3, 11),
    (16, 3, 8),
    (17, 3, 16),
    (18, 3, 10),
];

pub fn reference_count(p: u64, n: usize) -> Option<usize> {
    REFERENCE_COUNTS
        .iter()
        .find(|&&(tn, tp, _)| tn == n && tp == p)
        .map(|&(_, _, c)| c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Match,
    Mismatch { expected: usize, got: usize },
    NotComparable,
}

pub fn compare_against_reference(rec: &FieldClassification) -> Comparison {
    match reference_count(rec.p, rec.n) {
        None => Comparison::NotComparable,
        Some(expected) if expected == rec.class_count => Comparison::Match,
        Some(expected) => Comparison::Mismatch {
            expected,
            got: rec.class_count,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Search,
    Oracle,
}

/// Search settings that influence verdicts and are embedded in each record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub master_seed: u64,
    pub n_multiplier: f64,
    pub zieve_filter: bool,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            master_seed: 0,
            n_multiplier: 20.0,
            zieve_filter: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub non_canonical: u64,
    pub filtered_gcd: u64,
    pub filtered_subfield: u64,
    pub bound_not_planar: u64,
    pub searched: u64,
    pub collisions: u64,
    pub candidates: u64,
    pub verified_planar: u64,
    pub verified_not_planar: u64,
    pub total_draws: u64,
}

/// Complete result for one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldClassification {
    pub p: u64,
    pub n: usize,
    pub q: u64,
    pub modulus: String,
    pub method: Method,
    pub complete: bool,
    pub planar_canonical: Vec<u64>,
    pub class_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SearchParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws_per_exponent: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_positive_bound: Option<f64>,
    /// Subfield rules applied, e.g. `"3:analytic"`, `"6:cached"`.
    #[serde(default)]
    pub subfield_rules: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<PipelineStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_digest: Option<String>,
    pub timestamp: u64,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl FieldClassification {
    fn new(ctx: &FieldCtx, method: Method, planar: Vec<u64>, complete: bool) -> Self {
        FieldClassification {
            p: ctx.p(),
            n: ctx.n(),
            q: ctx.q(),
            modulus: ctx.modulus_string(),
            method,
            complete,
            class_count: planar.len(),
            planar_canonical: planar,
            params: None,
            draws_per_exponent: None,
            false_positive_bound: None,
            subfield_rules: Vec::new(),
            stats: None,
            verdict_digest: None,
            timestamp: now(),
        }
    }

    /// Checks the structural invariants that can be verified cheaply.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.p == 2 || !is_prime(self.p) {
            return Err(format!("bad characteristic {}", self.p));
        }
        if checked_order(self.p, self.n) != Some(self.q) {
            return Err(format!("q = {} is not {}^{}", self.q, self.p, self.n));
        }
        if self.class_count != self.planar_canonical.len() {
            return Err(format!(
                "class_count {} != {} listed exponents",
                self.class_count,
                self.planar_canonical.len()
            ));
        }
        if self.planar_canonical.windows(2).any(|w| w[0] >= w[1]) {
            return Err("planar exponents not strictly ascending".into());
        }
        for &k in &self.planar_canonical {
            if k < 2 || k + 2 > self.q {
                return Err(format!("exponent {k} outside [2, q-2]"));
            }
            if canonical_exponent(k, self.p, self.n) != k {
                return Err(format!("exponent {k} is not canonical"));
            }
            if !gcd_filter(k, self.q) {
                return Err(format!("exponent {k} fails the gcd condition"));
            }
        }
        Ok(())
    }

    /// Verified planar exponents outside the known families.
    pub fn new_planar(&self) -> Vec<u64> {
        let known = known_planar_exponents(self.p, self.n);
        self.planar_canonical
            .iter()
            .copied()
            .filter(|k| !known.contains(k))
            .collect()
    }

    /// Known-family exponents missing from the verified set.
    pub fn missing_known(&self) -> Vec<u64> {
        known_planar_exponents(self.p, self.n)
            .into_iter()
            .filter(|k| !self.planar_canonical.contains(k))
            .collect()
    }

    /// SHA-256 of the record with the timestamp cleared.
    pub fn deterministic_digest(&self) -> String {
        let mut r = self.clone();
        r.timestamp = 0;
        let bytes = serde_json::to_vec(&r).expect("record serialises");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Record for `n <= 4` fields with a closed-form classification.
pub fn analytic_classification(p: u64, n: usize) -> Result<FieldClassification> {
    if !has_analytic_rule(p, n) {
        return Err(Error::NoAnalyticRule { p, d: n });
    }
    let ctx = FieldCtx::new(p, n)?;
    let q = ctx.q();
    let mut planar: Vec<u64> = closed_form_residues(p, n)?
        .into_iter()
        .filter(|&r| r >= 2 && r + 2 <= q)
        .map(|r| canonical_exponent(r, p, n))
        .collect();
    planar.sort_unstable();
    planar.dedup();
    Ok(FieldClassification::new(&ctx, Method::Analytic, planar, true))
}

/// Ground truth: every `k` in `[2, q-2]` through the definitional oracle.
pub fn oracle_classification(ctx: &FieldCtx, bound: u64) -> Result<FieldClassification> {
    let q = ctx.q();
    if q > bound {
        return Err(Error::OracleBound { q, bound });
    }
    let planar_all: Vec<u64> = (2..q.saturating_sub(1))
        .into_par_iter()
        .map(|k| oracle_full_planarity(ctx, k, bound).map(|ok| ok.then_some(k)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut planar: Vec<u64> = planar_all
        .into_iter()
        .map(|k| canonical_exponent(k, ctx.p(), ctx.n()))
        .collect();
    planar.sort_unstable();
    planar.dedup();
    Ok(FieldClassification::new(ctx, Method::Oracle, planar, true))
}

/// Survivors handed to the worker pool per batch.
pub const CHUNK: usize = 256;

/// Collision search, then exhaustive verification of candidates.
pub fn decide_exponent(
    ctx: &FieldCtx,
    k: u64,
    n_draws: u64,
    master_seed: u64,
    scratch: &mut CollisionScratch,
) -> Result<ExponentVerdict> {
    let map = PowerMap::new(ctx, k);
    let mut rng = RngState::for_exponent(master_seed, ctx.p(), ctx.n(), k);
    Ok(match collision_search(&map, n_draws, &mut rng, scratch) {
        SearchResult::NotPlanar { witness, draws } => ExponentVerdict {
            k,
            outcome: Outcome::CollisionNotPlanar(witness),
            draws_used: draws,
        },
        SearchResult::Candidate { draws } => {
            let outcome = match exhaustive_verify(ctx, k)? {
                Verification::VerifiedPlanar => Outcome::VerifiedPlanar,
                Verification::VerifiedNotPlanar(w) => Outcome::VerifiedNotPlanar(w),
            };
            ExponentVerdict {
                k,
                outcome,
                draws_used: draws,
            }
        }
    })
}

/// Hooks connecting the pipeline to persistent state.
pub struct PipelineIo<'a> {
    /// Verdicts already on record from an interrupted run, keyed by `k`.
    pub prior: &'a BTreeMap<u64, ExponentVerdict>,
    /// Receives freshly computed verdicts, ascending in `k`, once per batch.
    pub sink: &'a mut (dyn FnMut(&[ExponentVerdict]) -> Result<()> + Send),
    /// Polled between batches; `true` ends the run with `complete = false`.
    pub stop: &'a (dyn Fn() -> bool + Sync),
}

/// Classifies `F_{p^n}`: stream `k` over `[2, q-2]`, drop non-canonical
/// exponents and those failing the gcd, subfield and (optionally) bound
/// filters, then decide each survivor.
pub fn classify_field(
    ctx: &FieldCtx,
    rules: &SubfieldRuleSet,
    params: &SearchParams,
    io: PipelineIo<'_>,
) -> Result<FieldClassification> {
    let (p, n, q) = (ctx.p(), ctx.n(), ctx.q());
    let m = q - 1;
    let n_draws = default_n(q, params.n_multiplier)?;
    let known = if params.zieve_filter {
        known_planar_exponents(p, n)
    } else {
        Vec::new()
    };
    let mut stats = PipelineStats::default();
    let mut planar = Vec::new();
    let mut hasher = Sha256::new();
    let mut batch: Vec<u64> = Vec::with_capacity(CHUNK);

    let mut process = |batch: &mut Vec<u64>, stats: &mut PipelineStats| -> Result<()> {
        let fresh: Vec<u64> = batch.iter().copied().filter(|k| !io.prior.contains_key(k)).collect();
        let computed = fresh
            .par_iter()
            .map_init(CollisionScratch::new, |scratch, &k| {
                decide_exponent(ctx, k, n_draws, params.master_seed, scratch)
            })
            .collect::<Result<Vec<_>>>()?;
        if !computed.is_empty() {
            (io.sink)(&computed)?;
        }
        let mut fresh_iter = computed.iter();
        for &k in batch.iter() {
            let v = match io.prior.get(&k) {
                Some(v) => v,
                None => fresh_iter.next().expect("one verdict per fresh exponent"),
            };
            debug_assert_eq!(v.k, k);
            hasher.update(v.to_string().as_bytes());
            hasher.update(b"\n");
            stats.searched += 1;
            stats.total_draws += v.draws_used;
            match v.outcome {
                Outcome::CollisionNotPlanar(_) => stats.collisions += 1,
                Outcome::VerifiedPlanar => {
                    stats.candidates += 1;
                    stats.verified_planar += 1;
                    planar.push(k);
                }
                Outcome::VerifiedNotPlanar(_) => {
                    stats.candidates += 1;
                    stats.verified_not_planar += 1;
                }
                other => unreachable!("search produced {other:?}"),
            }
        }
        batch.clear();
        Ok(())
    };

    let mut complete = true;
    if q >= 4 {
        for k in 2..=q - 2 {
            if !is_canonical_mod(k, p, n, m) {
                stats.non_canonical += 1;
                continue;
            }
            if !gcd_filter(k, q) {
                stats.filtered_gcd += 1;
                continue;
            }
            if !subfield_filter(k, rules) {
                stats.filtered_subfield += 1;
                continue;
            }
            if params.zieve_filter
                && zieve_bound_filter(k, p, n, &known) == ZieveVerdict::ProvablyNotPlanar
            {
                stats.bound_not_planar += 1;
                continue;
            }
            batch.push(k);
            if batch.len() == CHUNK {
                process(&mut batch, &mut stats)?;
                if (io.stop)() {
                    complete = false;
                    break;
                }
            }
        }
    }
    if complete {
        process(&mut batch, &mut stats)?;
    }
    drop(process);

    let mut rec = FieldClassification::new(ctx, Method::Search, planar, complete);
    rec.params = Some(params.clone());
    rec.draws_per_exponent = Some(n_draws);
    rec.false_positive_bound = Some(false_positive_bound(n_draws, q));
    rec.subfield_rules = rules
        .rules()
        .iter()
        .map(|r| {
            let src = match r.source {
                RuleSource::Analytic => "analytic",
                RuleSource::Cached => "cached",
            };
            format!("{}:{src}", r.degree)
        })
        .collect();
    rec.stats = Some(stats);
    rec.verdict_digest = Some(hex::encode(hasher.finalize()));
    Ok(rec)
}

/// [`classify_field`] without persistence.
pub fn classify_field_in_memory(
    ctx: &FieldCtx,
    rules: &SubfieldRuleSet,
    params: &SearchParams,
) -> Result<(FieldClassification, Vec<ExponentVerdict>)> {
    let prior = BTreeMap::new();
    let mut log = Vec::new();
    let mut sink = |vs: &[ExponentVerdict]| {
        log.extend_from_slice(vs);
        Ok(())
    };
    let rec = classify_field(
        ctx,
        rules,
        params,
        PipelineIo {
            prior: &prior,
            sink: &mut sink,
            stop: &|| false,
        },
    )?;
    Ok((rec, log))
}
