//! Orchestration: classification cache, resumable verdict logs, prerequisite
//! scheduling and report formatting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::catalog::{
    analytic_classification, classify_field, compare_against_reference, oracle_classification,
    reference_count, Comparison, FieldClassification, Method, PipelineIo, SearchParams,
};
use crate::detect::{exhaustive_verify, ExponentVerdict, Verification, Witness, DEFAULT_ORACLE_BOUND};
use crate::error::{Error, Result};
use crate::ff::FieldCtx;
use crate::sieve::{gcd, has_analytic_rule, proper_divisors, SubfieldRuleSet};

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "PLANAR_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = "planar-cache";

/// Cache directory from the environment, or the default.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub params: SearchParams,
    pub workers: usize,
    pub oracle_bound: u64,
    pub cache_dir: PathBuf,
    /// Verdict log path; defaults to a per-configuration file in the cache.
    pub output: Option<PathBuf>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            params: SearchParams::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            oracle_bound: DEFAULT_ORACLE_BOUND,
            cache_dir: default_cache_dir(),
            output: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.params.n_multiplier;
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Config(format!("N multiplier must be positive, got {m}")));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Line-delimited store of [`FieldClassification`] records, one file per field.
#[derive(Clone, Debug)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    /// Directories are created on first store.
    pub fn open(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record_path(&self, p: u64, n: usize) -> PathBuf {
        self.dir.join("records").join(format!("p{p}_n{n}.jsonl"))
    }

    pub fn default_log_path(&self, p: u64, n: usize, params: &SearchParams) -> PathBuf {
        let z = if params.zieve_filter { "_z" } else { "" };
        self.dir.join("verdicts").join(format!(
            "p{p}_n{n}_s{}_m{}{z}.log",
            params.master_seed, params.n_multiplier
        ))
    }

    /// Appends a record. The file is rewritten to a temporary and renamed into
    /// place; an unterminated trailing line is dropped on the way.
    pub fn store(&self, rec: &FieldClassification) -> Result<()> {
        rec.validate().map_err(Error::Config)?;
        let path = self.record_path(rec.p, rec.n);
        let records = self.dir.join("records");
        fs::create_dir_all(&records).map_err(Error::io(&records))?;
        let mut bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(Error::io(&path)(e)),
        };
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if keep < bytes.len() {
            log::warn!("{}: dropping unterminated trailing line", path.display());
        }
        bytes.truncate(keep);
        serde_json::to_writer(&mut bytes, rec).expect("record serialises");
        bytes.push(b'\n');
        let tmp = path.with_extension(format!("jsonl.tmp{}", std::process::id()));
        fs::write(&tmp, &bytes).map_err(Error::io(&tmp))?;
        fs::rename(&tmp, &path).map_err(Error::io(&path))
    }

    /// Every valid record for a field, oldest first. Corrupt lines are skipped
    /// with a warning.
    pub fn load_history(&self, p: u64, n: usize) -> Result<Vec<FieldClassification>> {
        read_records(&self.record_path(p, n))
    }

    /// The latest complete record for a field, else the latest record.
    pub fn load(&self, p: u64, n: usize) -> Result<Option<FieldClassification>> {
        Ok(pick_latest(self.load_history(p, n)?))
    }

    /// The latest complete record for a field, if any.
    pub fn load_complete(&self, p: u64, n: usize) -> Result<Option<FieldClassification>> {
        Ok(self.load(p, n)?.filter(|r| r.complete))
    }

    /// One record per cached field (latest complete wins), ordered by `(q, p)`.
    pub fn load_all(&self) -> Result<Vec<FieldClassification>> {
        let dir = self.dir.join("records");
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&dir)(e)),
        };
        let mut out = Vec::new();
        for entry in entries {
            let path = entry.map_err(Error::io(&dir))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            if let Some(rec) = pick_latest(read_records(&path)?) {
                out.push(rec);
            }
        }
        out.sort_by_key(|r| (r.q, r.p));
        Ok(out)
    }
}

fn read_records(path: &Path) -> Result<Vec<FieldClassification>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<FieldClassification>(line)
            .map_err(|e| e.to_string())
            .and_then(|r| r.validate().map(|_| r));
        match parsed {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}:{}: skipping corrupt record: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn pick_latest(records: Vec<FieldClassification>) -> Option<FieldClassification> {
    let last_complete = records.iter().rposition(|r| r.complete);
    match last_complete {
        Some(i) => records.into_iter().nth(i),
        None => records.into_iter().last(),
    }
}

/// Append-only per-field verdict log. The first line identifies the
/// configuration; each further line is one [`ExponentVerdict`].
pub struct VerdictLog {
    path: PathBuf,
    out: BufWriter<File>,
}

pub fn log_header(p: u64, n: usize, params: &SearchParams) -> String {
    format!(
        "# planar-verdicts p={p} n={n} seed={} n_multiplier={} zieve={}",
        params.master_seed, params.n_multiplier, params.zieve_filter
    )
}

impl VerdictLog {
    /// Opens or creates a log, returning the verdicts already recorded. A
    /// truncated last line is discarded; a header for another configuration
    /// is an error.
    pub fn open(
        path: &Path,
        p: u64,
        n: usize,
        params: &SearchParams,
    ) -> Result<(Self, BTreeMap<u64, ExponentVerdict>)> {
        let header = log_header(p, n, params);
        if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(Error::io(parent))?;
        }
        let mut prior = BTreeMap::new();
        let existing = match fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(Error::io(path)(e)),
        };
        let file = match existing.filter(|t| !t.is_empty()) {
            None => {
                let mut f = File::create(path).map_err(Error::io(path))?;
                writeln!(f, "{header}").map_err(Error::io(path))?;
                f
            }
            Some(text) => {
                let mut valid = 0usize;
                let mut lines = text.split_inclusive('\n').enumerate().peekable();
                while let Some((i, line)) = lines.next() {
                    let last = lines.peek().is_none();
                    let terminated = line.ends_with('\n');
                    let body = line.trim_end_matches('\n');
                    if i == 0 {
                        if body != header {
                            return Err(Error::LogMismatch { path: path.to_path_buf() });
                        }
                        if !terminated {
                            break;
                        }
                    } else {
                        match body.parse::<ExponentVerdict>() {
                            Ok(v) if terminated => {
                                prior.insert(v.k, v);
                            }
                            Ok(_) => break,
                            Err(_) if last => break,
                            Err(reason) => return Err(Error::LogParse { line: i + 1, reason }),
                        }
                    }
                    valid += line.len();
                }
                if valid < text.len() {
                    log::warn!("{}: discarding truncated final line", path.display());
                }
                let f = OpenOptions::new().write(true).open(path).map_err(Error::io(path))?;
                if valid == 0 {
                    f.set_len(0).map_err(Error::io(path))?;
                    let mut f = f;
                    writeln!(f, "{header}").map_err(Error::io(path))?;
                    f
                } else {
                    f.set_len(valid as u64).map_err(Error::io(path))?;
                    OpenOptions::new().append(true).open(path).map_err(Error::io(path))?
                }
            }
        };
        Ok((
            VerdictLog {
                path: path.to_path_buf(),
                out: BufWriter::new(file),
            },
            prior,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends and flushes.
    pub fn append(&mut self, verdicts: &[ExponentVerdict]) -> Result<()> {
        for v in verdicts {
            writeln!(self.out, "{v}").map_err(Error::io(&self.path))?;
        }
        self.out.flush().map_err(Error::io(&self.path))
    }
}

/// Outcome of one `classify` run.
#[derive(Clone, Debug)]
pub struct ClassifyReport {
    pub record: FieldClassification,
    /// Verified planar exponents outside the known families.
    pub new_planar: Vec<u64>,
    pub missing_known: Vec<u64>,
    pub comparison: Comparison,
    pub log_path: Option<PathBuf>,
}

impl ClassifyReport {
    fn new(record: FieldClassification, log_path: Option<PathBuf>) -> Self {
        ClassifyReport {
            new_planar: record.new_planar(),
            missing_known: record.missing_known(),
            comparison: compare_against_reference(&record),
            record,
            log_path,
        }
    }
}

/// Result of checking a single exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyVerdict {
    /// `gcd(k, q - 1) != 2`, so `X^k` cannot be planar.
    GcdNotPlanar { gcd: u64 },
    VerifiedPlanar,
    VerifiedNotPlanar(Witness),
}

impl fmt::Display for VerifyVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyVerdict::GcdNotPlanar { gcd } => write!(f, "NotPlanar (gcd(k, q-1) = {gcd} != 2)"),
            VerifyVerdict::VerifiedPlanar => write!(f, "VerifiedPlanar"),
            VerifyVerdict::VerifiedNotPlanar(w) => {
                write!(f, "VerifiedNotPlanar x1={} x2={}", w.x1, w.x2)
            }
        }
    }
}

pub struct Runner {
    config: SearchConfig,
    cache: Cache,
    pool: rayon::ThreadPool,
}

impl Runner {
    pub fn new(config: SearchConfig) -> Result<Self> {
        config.validate()?;
        let cache = Cache::open(&config.cache_dir);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Runner { config, cache, pool })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    /// Classifies a field and stores the record. Degrees with a closed form
    /// are answered without searching.
    pub fn classify(&self, p: u64, n: usize) -> Result<ClassifyReport> {
        FieldCtx::new(p, n)?;
        if has_analytic_rule(p, n) {
            let rec = analytic_classification(p, n)?;
            self.cache.store(&rec)?;
            return Ok(ClassifyReport::new(rec, None));
        }
        self.search_with(p, n, &|| false)
    }

    /// Runs the search pipeline on a field, resuming from its verdict log.
    /// `stop` is polled between batches.
    pub fn search_with(&self, p: u64, n: usize, stop: &(dyn Fn() -> bool + Sync)) -> Result<ClassifyReport> {
        let ctx = FieldCtx::new(p, n)?;
        self.ensure_prerequisites(p, n)?;
        let mut lookup_err = None;
        let rules = SubfieldRuleSet::build(p, n, |d| match self.cache.load_complete(p, d) {
            Ok(r) => r.map(|r| r.planar_canonical),
            Err(e) => {
                lookup_err.get_or_insert(e);
                None
            }
        })?;
        if let Some(e) = lookup_err {
            return Err(e);
        }
        let missing = rules.missing();
        if !missing.is_empty() {
            return Err(Error::Config(format!("subfield classifications missing for degrees {missing:?}")));
        }
        let params = &self.config.params;
        let log_path = self
            .config
            .output
            .clone()
            .unwrap_or_else(|| self.cache.default_log_path(p, n, params));
        let (mut log, prior) = VerdictLog::open(&log_path, p, n, params)?;
        if !prior.is_empty() {
            log::info!("resuming {p}^{n} with {} recorded verdicts", prior.len());
        }
        let mut sink = |vs: &[ExponentVerdict]| log.append(vs);
        let rec = self.pool.install(|| {
            classify_field(
                &ctx,
                &rules,
                params,
                PipelineIo {
                    prior: &prior,
                    sink: &mut sink,
                    stop,
                },
            )
        })?;
        self.cache.store(&rec)?;
        Ok(ClassifyReport::new(rec, Some(log_path)))
    }

    /// Classifies every proper subfield lacking a complete cached record,
    /// ascending by degree.
    pub fn ensure_prerequisites(&self, p: u64, n: usize) -> Result<()> {
        for d in proper_divisors(n) {
            if self.cache.load_complete(p, d)?.is_some() {
                continue;
            }
            log::info!("classifying prerequisite subfield {p}^{d}");
            if has_analytic_rule(p, d) {
                self.cache.store(&analytic_classification(p, d)?)?;
            } else if d <= 4 {
                // Only 3^4 lands here; it is small enough for the oracle.
                self.oracle(p, d)?;
            } else {
                let rep = self.search_with(p, d, &|| false)?;
                if !rep.record.complete {
                    return Err(Error::Config(format!("prerequisite {p}^{d} incomplete")));
                }
            }
        }
        Ok(())
    }

    /// Definitional brute force over every exponent; stores a record with
    /// `method = oracle`.
    pub fn oracle(&self, p: u64, n: usize) -> Result<FieldClassification> {
        let ctx = FieldCtx::new(p, n)?;
        let bound = self.config.oracle_bound;
        if ctx.q() > bound {
            return Err(Error::OracleBound { q: ctx.q(), bound });
        }
        let rec = self.pool.install(|| oracle_classification(&ctx, bound))?;
        self.cache.store(&rec)?;
        Ok(rec)
    }

    /// Exhaustively decides a single exponent `k` in `[2, q-2]`.
    pub fn verify(&self, p: u64, n: usize, k: u64) -> Result<VerifyVerdict> {
        let ctx = FieldCtx::new(p, n)?;
        let q = ctx.q();
        if k < 2 || k + 2 > q {
            return Err(Error::Config(format!("k = {k} outside [2, {}]", q.saturating_sub(2))));
        }
        let g = gcd(k, q - 1);
        if g != 2 {
            return Ok(VerifyVerdict::GcdNotPlanar { gcd: g });
        }
        Ok(match self.pool.install(|| exhaustive_verify(&ctx, k))? {
            Verification::VerifiedPlanar => VerifyVerdict::VerifiedPlanar,
            Verification::VerifiedNotPlanar(w) => VerifyVerdict::VerifiedNotPlanar(w),
        })
    }
}

/// Grid of class counts (rows `n >= 5`, columns `p`) plus CSV with header
/// `n,p,classes,matches_paper`. Cells disagreeing with the embedded table
/// are marked `MISMATCH`. Incomplete records are left out.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableReport {
    pub grid: String,
    pub csv: String,
    pub mismatches: Vec<(usize, u64)>,
}

pub fn render_table(records: &[FieldClassification]) -> TableReport {
    let mut cells: BTreeMap<(usize, u64), (usize, Option<usize>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.complete && r.n >= 5 && r.method != Method::Analytic) {
        cells.insert((r.n, r.p), (r.class_count, reference_count(r.p, r.n)));
    }
    let mut report = TableReport {
        csv: "n,p,classes,matches_paper\n".to_string(),
        ..Default::default()
    };
    if cells.is_empty() {
        return report;
    }
    let ps: BTreeSet<u64> = cells.keys().map(|&(_, p)| p).collect();
    let ns: BTreeSet<usize> = cells.keys().map(|&(n, _)| n).collect();
    let text = |&(count, expected): &(usize, Option<usize>)| match expected {
        Some(e) if e != count => format!("{count} MISMATCH"),
        _ => count.to_string(),
    };
    let width = cells.values().map(|c| text(c).len()).chain(ps.iter().map(|p| p.to_string().len())).max().unwrap_or(1);
    let _ = write!(report.grid, "{:>4}", "n\\p");
    for p in &ps {
        let _ = write!(report.grid, " | {p:>width$}");
    }
    report.grid.push('\n');
    for &n in &ns {
        let _ = write!(report.grid, "{n:>4}");
        for &p in &ps {
            let cell = cells.get(&(n, p)).map(text).unwrap_or_default();
            let _ = write!(report.grid, " | {cell:>width$}");
        }
        report.grid.push('\n');
    }
    for (&(n, p), &(count, expected)) in &cells {
        let matches = match expected {
            Some(e) if e == count => "true",
            Some(_) => {
                report.mismatches.push((n, p));
                "false"
            }
            None => "n/a",
        };
        let _ = writeln!(report.csv, "{n},{p},{count},{matches}");
    }
    report
}
