//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs everything by default. `PLANAR_ACCEPTANCE_ONLY=1,5,10` restricts the
//! run to the listed criteria while iterating locally; criteria that depend on
//! skipped ones compute what they need themselves.

mod support;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use planar_core::catalog::{
    classify_field_in_memory, known_planar_exponents, reference_count, FieldClassification,
    SearchParams,
};
use planar_core::detect::{collision_search, default_n, oracle_full_planarity, CollisionScratch, RngState, SearchResult};
use planar_core::runner::{Runner, SearchConfig};
use planar_core::sieve::{canonical_exponent, closed_form_allows, orbit, SubfieldRuleSet};
use planar_core::{ExponentVerdict, FieldCtx, PowerMap};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

const TIER_A: &[(u64, usize, usize)] = &[(3, 5, 4), (3, 6, 3), (3, 7, 6), (5, 5, 3), (7, 5, 3)];
const TIER_B: &[(u64, usize, usize)] = &[
    (3, 8, 4),
    (3, 9, 7),
    (3, 10, 6),
    (5, 6, 2),
    (5, 7, 4),
    (7, 6, 2),
    (11, 5, 3),
    (13, 5, 3),
    (17, 5, 3),
    (19, 5, 3),
];
const TIER_C: &[(u64, usize, usize)] = &[
    (3, 11, 10),
    (3, 12, 5),
    (5, 8, 1),
    (7, 7, 4),
    (11, 6, 2),
    (13, 6, 2),
    (23, 5, 3),
    (29, 5, 3),
    (31, 5, 3),
];

const PROPERTY_CASES: u32 = 10_000;
const SEEDS: u64 = 100;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Tier {
    records: Vec<FieldClassification>,
    logs: Vec<PathBuf>,
}

struct Ctx {
    cache: TempDir,
    tiers: BTreeMap<char, Tier>,
    /// Per-field oracle planarity of every `k` in `[2, q-2]`.
    oracle: HashMap<(u64, usize), Vec<u64>>,
    /// Verdicts produced outside the cached tiers, with their fields.
    extra_verdicts: Vec<((u64, usize), Vec<ExponentVerdict>)>,
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn runner(dir: &std::path::Path, seed: u64) -> Runner {
    Runner::new(SearchConfig {
        params: SearchParams {
            master_seed: seed,
            ..SearchParams::default()
        },
        workers: workers(),
        cache_dir: dir.to_path_buf(),
        ..SearchConfig::default()
    })
    .expect("valid config")
}

impl Ctx {
    fn tier(&mut self, name: char) -> &Tier {
        if !self.tiers.contains_key(&name) {
            let fields = match name {
                'A' => TIER_A,
                'B' => TIER_B,
                _ => TIER_C,
            };
            let r = runner(self.cache.path(), 0);
            let mut records = Vec::new();
            let mut logs = Vec::new();
            for &(p, n, _) in fields {
                let t = Instant::now();
                let rep = r.classify(p, n).unwrap_or_else(|e| panic!("{p}^{n}: {e}"));
                eprintln!(
                    "    tier {name}: {p}^{n} -> {} classes in {:.1}s",
                    rep.record.class_count,
                    t.elapsed().as_secs_f64()
                );
                records.push(rep.record);
                logs.extend(rep.log_path);
            }
            self.tiers.insert(name, Tier { records, logs });
        }
        &self.tiers[&name]
    }

    fn oracle_set(&mut self, p: u64, n: usize) -> &Vec<u64> {
        self.oracle.entry((p, n)).or_insert_with(|| {
            let ctx = FieldCtx::new(p, n).unwrap();
            let q = ctx.q();
            if q < 4 {
                return Vec::new();
            }
            (2..=q - 2)
                .into_par_iter()
                .filter(|&k| oracle_full_planarity(&ctx, k, q).unwrap())
                .collect()
        })
    }
}

fn check_tier(ctx: &mut Ctx, name: char, expected: &[(u64, usize, usize)]) -> Verdict {
    let t = Instant::now();
    let tier = ctx.tier(name);
    let mut bad = Vec::new();
    let mut cells = Vec::new();
    for (rec, &(p, n, want)) in tier.records.iter().zip(expected) {
        cells.push(format!("({n},{p})={}", rec.class_count));
        if !rec.complete || rec.class_count != want || reference_count(p, n) != Some(want) {
            bad.push(format!("({n},{p}) got {} want {want}", rec.class_count));
        }
    }
    let summary = format!("{} in {:.0}s", cells.join(" "), t.elapsed().as_secs_f64());
    if bad.is_empty() {
        verdict(true, summary)
    } else {
        verdict(false, format!("{summary}; mismatches: {}", bad.join(", ")))
    }
}

fn criterion_4(ctx: &mut Ctx) -> Verdict {
    let mut fields = 0;
    let mut bad = Vec::new();
    for name in ['A', 'B', 'C'] {
        for rec in &ctx.tier(name).records {
            fields += 1;
            let known = known_planar_exponents(rec.p, rec.n);
            if rec.planar_canonical != known {
                bad.push(format!(
                    "{}^{}: found {:?} known {:?} (new {:?})",
                    rec.p,
                    rec.n,
                    rec.planar_canonical,
                    known,
                    rec.new_planar()
                ));
            }
        }
    }
    if bad.is_empty() {
        verdict(true, format!("{fields} fields, verified sets equal the known families"))
    } else {
        verdict(false, format!("PLANAR-NEW or missing: {}", bad.join("; ")))
    }
}

/// Odd prime powers up to 729, plus 3^7.
fn small_fields() -> Vec<(u64, usize)> {
    let mut out = Vec::new();
    for p in (3..=729u64).filter(|&p| (2..p).take_while(|d| d * d <= p).all(|d| p % d != 0)) {
        let mut q = p;
        let mut n = 1;
        while q <= 729 {
            out.push((p, n));
            q *= p;
            n += 1;
        }
    }
    out.push((3, 7));
    out
}

fn criterion_5(ctx: &mut Ctx) -> Verdict {
    let t = Instant::now();
    let fields = small_fields();
    let mut bad = Vec::new();
    let mut exponents = 0u64;
    for &(p, n) in &fields {
        let f = FieldCtx::new(p, n).unwrap();
        let mut subfield = HashMap::new();
        for d in 1..n {
            if n % d == 0 {
                let set: BTreeSet<u64> =
                    ctx.oracle_set(p, d).iter().map(|&k| canonical_exponent(k, p, d)).collect();
                subfield.insert(d, set.into_iter().collect::<Vec<_>>());
            }
        }
        let rules = SubfieldRuleSet::build(p, n, |d| subfield.get(&d).cloned()).unwrap();
        let (rec, verdicts) = classify_field_in_memory(&f, &rules, &SearchParams::default()).unwrap();
        let mut search: Vec<u64> = rec.planar_canonical.iter().flat_map(|&k| orbit(k, p, n)).collect();
        search.retain(|&k| k >= 2 && k + 2 <= f.q());
        search.sort_unstable();
        search.dedup();
        let oracle = ctx.oracle_set(p, n);
        exponents += f.q().saturating_sub(3);
        if !rec.complete || &search != oracle {
            bad.push(format!("{p}^{n}: search {search:?} oracle {oracle:?}"));
        }
        ctx.extra_verdicts.push(((p, n), verdicts));
    }
    let summary = format!(
        "{} fields, {exponents} exponents compared in {:.0}s",
        fields.len(),
        t.elapsed().as_secs_f64()
    );
    if bad.is_empty() {
        verdict(true, summary)
    } else {
        verdict(false, format!("{summary}; differ: {}", bad.join("; ")))
    }
}

fn criterion_6(ctx: &mut Ctx) -> Verdict {
    let mut cases = Vec::new();
    for p in [3u64, 5, 7] {
        for d in 1..=3 {
            cases.push((p, d));
        }
    }
    cases.push((5, 4));
    cases.push((7, 4));
    let mut bad = Vec::new();
    for &(p, d) in &cases {
        let q = p.pow(d as u32);
        let expected: Vec<u64> = (2..q.saturating_sub(1))
            .filter(|&k| closed_form_allows(k, p, d).unwrap())
            .collect();
        let got = ctx.oracle_set(p, d);
        if got != &expected {
            bad.push(format!("{p}^{d}: oracle {got:?} closed form {expected:?}"));
        }
    }
    if bad.is_empty() {
        verdict(true, format!("{} fields match the closed-form sets", cases.len()))
    } else {
        verdict(false, bad.join("; "))
    }
}

fn criterion_7() -> Verdict {
    let mut checks = 0u64;
    let mut bad = Vec::new();
    for (p, n) in [(3u64, 5usize), (5, 5)] {
        let f = FieldCtx::new(p, n).unwrap();
        let n_draws = default_n(f.q(), 20.0).unwrap();
        let exps: Vec<u64> = known_planar_exponents(p, n).into_iter().flat_map(|k| orbit(k, p, n)).collect();
        let mut scratch = CollisionScratch::new();
        for seed in 0..SEEDS {
            for &k in &exps {
                let map = PowerMap::new(&f, k);
                let mut rng = RngState::for_exponent(seed, p, n, k);
                checks += 1;
                if let SearchResult::NotPlanar { witness, .. } = collision_search(&map, n_draws, &mut rng, &mut scratch) {
                    bad.push(format!("{p}^{n} k={k} seed={seed} {witness:?}"));
                }
            }
        }
    }
    if bad.is_empty() {
        verdict(true, format!("{SEEDS} seeds, {checks} searches, all Candidate"))
    } else {
        verdict(false, format!("false negatives: {}", bad.join("; ")))
    }
}

fn read_log(path: &PathBuf) -> ((u64, usize), Vec<ExponentVerdict>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().expect("header");
    let field = |key: &str| -> u64 {
        header
            .split_whitespace()
            .find_map(|t| t.strip_prefix(key))
            .and_then(|v| v.parse().ok())
            .expect("header field")
    };
    let verdicts = lines.map(|l| l.parse::<ExponentVerdict>().expect("log line")).collect();
    ((field("p="), field("n=") as usize), verdicts)
}

fn criterion_8(ctx: &mut Ctx) -> Verdict {
    let mut runs: Vec<((u64, usize), Vec<ExponentVerdict>)> = Vec::new();
    for name in ['A', 'B', 'C'] {
        let logs = ctx.tier(name).logs.clone();
        runs.extend(logs.iter().map(read_log));
    }
    runs.append(&mut ctx.extra_verdicts);
    let mut witnesses = 0u64;
    let mut bad = Vec::new();
    for ((p, n), verdicts) in &runs {
        let f = FieldCtx::new(*p, *n).unwrap();
        let results: Vec<(u64, bool)> = verdicts
            .par_iter()
            .filter_map(|v| v.outcome.witness().map(|w| (v.k, w.validate(&f, v.k))))
            .collect();
        witnesses += results.len() as u64;
        bad.extend(results.iter().filter(|r| !r.1).map(|r| format!("{p}^{n} k={}", r.0)));
    }
    if bad.is_empty() && witnesses > 0 {
        verdict(true, format!("{witnesses} witnesses from {} runs re-validated", runs.len()))
    } else {
        verdict(false, format!("{witnesses} witnesses; invalid: {}", bad.join(", ")))
    }
}

fn criterion_9() -> Verdict {
    let digest_run = || -> Vec<String> {
        let dir = TempDir::new().unwrap();
        let r = runner(dir.path(), 20_260_101);
        TIER_A
            .iter()
            .map(|&(p, n, _)| {
                let rep = r.classify(p, n).unwrap();
                let log = fs::read(rep.log_path.unwrap()).unwrap();
                format!(
                    "{}:{}",
                    hex::encode(Sha256::digest(&log)),
                    rep.record.deterministic_digest()
                )
            })
            .collect()
    };
    let a = digest_run();
    let b = digest_run();
    if a == b {
        verdict(true, format!("{} verdict-log and record digests identical", a.len()))
    } else {
        verdict(false, format!("digests differ: {a:?} vs {b:?}"))
    }
}

fn criterion_10() -> Verdict {
    let mut bad = Vec::new();
    for (name, suite) in support::SUITES {
        if let Err(e) = suite(PROPERTY_CASES) {
            bad.push(format!("{name}: {e}"));
        }
    }
    if bad.is_empty() {
        verdict(
            true,
            format!("{} suites x {PROPERTY_CASES} cases, zero failures", support::SUITES.len()),
        )
    } else {
        verdict(false, bad.join("; "))
    }
}

fn main() {
    let only: Option<BTreeSet<u32>> = std::env::var("PLANAR_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut ctx = Ctx {
        cache: TempDir::new().expect("temp dir"),
        tiers: BTreeMap::new(),
        oracle: HashMap::new(),
        extra_verdicts: Vec::new(),
    };
    let criteria: Vec<(u32, &str, Box<dyn Fn(&mut Ctx) -> Verdict>)> = vec![
        (1, "reference counts, tier A", Box::new(|c| check_tier(c, 'A', TIER_A))),
        (2, "reference counts, tier B", Box::new(|c| check_tier(c, 'B', TIER_B))),
        (3, "reference counts, tier C", Box::new(|c| check_tier(c, 'C', TIER_C))),
        (4, "no new planar monomials in tiers A-C", Box::new(criterion_4)),
        (5, "search pipeline equals oracle for q <= 729 and 3^7", Box::new(criterion_5)),
        (6, "oracle equals closed-form classification for n <= 4", Box::new(criterion_6)),
        (7, "no false negatives on known exponents", Box::new(|_| criterion_7())),
        (8, "witness audit", Box::new(criterion_8)),
        (9, "determinism of tier A runs", Box::new(|_| criterion_9())),
        (10, "property suites", Box::new(|_| criterion_10())),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let v = check(&mut ctx);
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id}: {name}: {}", v.detail);
        std::io::stdout().flush().ok();
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
