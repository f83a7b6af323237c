use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use planar_core::catalog::{Comparison, SearchParams};
use planar_core::runner::{render_table, Cache, ClassifyReport, Runner, SearchConfig, CACHE_ENV, DEFAULT_CACHE_DIR};
use planar_core::FieldClassification;

/// Exit status for a verified planar exponent outside the known families.
const EXIT_PLANAR_NEW: u8 = 2;

#[derive(Parser)]
#[command(name = "planar", version, about = "Classify planar monomials X^k over F_{p^n}")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CacheArg {
    /// Classification cache directory.
    #[arg(long = "cache", env = CACHE_ENV, default_value = DEFAULT_CACHE_DIR)]
    dir: PathBuf,
}

#[derive(Args)]
struct Field {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    n: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Classify one field and append its record to the cache.
    Classify {
        #[command(flatten)]
        field: Field,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Collision-search budget is this multiple of sqrt(q).
        #[arg(long, default_value_t = 20.0)]
        n_multiplier: f64,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Also apply the Zieve degree bound.
        #[arg(long)]
        zieve: bool,
        #[command(flatten)]
        cache: CacheArg,
        /// Verdict log path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print class counts of cached fields as a grid and as CSV.
    Table {
        #[command(flatten)]
        cache: CacheArg,
        /// Write the CSV here instead of after the grid.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Exhaustively decide whether X^k is planar.
    Verify {
        #[command(flatten)]
        field: Field,
        #[arg(long)]
        k: u64,
    },
    /// Classify a small field by brute force over the definition.
    Oracle {
        #[command(flatten)]
        field: Field,
        #[command(flatten)]
        cache: CacheArg,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Classify {
            field,
            seed,
            n_multiplier,
            workers,
            zieve,
            cache,
            out,
        } => {
            let mut config = SearchConfig {
                params: SearchParams {
                    master_seed: seed,
                    n_multiplier,
                    zieve_filter: zieve,
                },
                cache_dir: cache.dir,
                output: out,
                ..SearchConfig::default()
            };
            if let Some(w) = workers {
                config.workers = w;
            }
            let runner = Runner::new(config)?;
            let report = runner.classify(field.p, field.n)?;
            Ok(print_classify(&report))
        }
        Cmd::Table { cache, csv } => {
            let records = Cache::open(cache.dir).load_all()?;
            let table = render_table(&records);
            print!("{}", table.grid);
            match csv {
                Some(path) => fs::write(&path, &table.csv)?,
                None => {
                    if !table.grid.is_empty() {
                        println!();
                    }
                    print!("{}", table.csv);
                }
            }
            for (n, p) in &table.mismatches {
                eprintln!("MISMATCH: n={n} p={p} disagrees with the reference table");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { field, k } => {
            let runner = Runner::new(SearchConfig::default())?;
            let verdict = runner.verify(field.p, field.n, k)?;
            println!("{}^{} k={k}: {verdict}", field.p, field.n);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Oracle { field, cache } => {
            let runner = Runner::new(SearchConfig {
                cache_dir: cache.dir,
                ..SearchConfig::default()
            })?;
            let rec = runner.oracle(field.p, field.n)?;
            print_record(&rec);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_record(rec: &FieldClassification) {
    println!(
        "field {}^{} (q = {}, modulus {}) method={}",
        rec.p,
        rec.n,
        rec.q,
        rec.modulus,
        format!("{:?}", rec.method).to_lowercase()
    );
    println!("classes: {}", rec.class_count);
    let ks: Vec<String> = rec.planar_canonical.iter().map(u64::to_string).collect();
    println!("planar: {}", ks.join(" "));
}

fn print_classify(report: &ClassifyReport) -> ExitCode {
    let rec = &report.record;
    print_record(rec);
    if let Some(path) = &report.log_path {
        println!("verdict log: {}", path.display());
    }
    if let (Some(n_draws), Some(fp)) = (rec.draws_per_exponent, rec.false_positive_bound) {
        println!("draws per exponent: {n_draws} (false-positive bound {fp:.3e})");
    }
    match report.comparison {
        Comparison::Match => println!("reference table: match"),
        Comparison::Mismatch { expected, got } => {
            println!("reference table: MISMATCH (expected {expected}, got {got})")
        }
        Comparison::NotComparable => println!("reference table: no entry"),
    }
    if !rec.complete {
        eprintln!("warning: run interrupted, record incomplete");
        return ExitCode::FAILURE;
    }
    if !report.missing_known.is_empty() {
        eprintln!("error: known planar exponents not found: {:?}", report.missing_known);
        return ExitCode::FAILURE;
    }
    if !report.new_planar.is_empty() {
        println!("PLANAR-NEW: {:?}", report.new_planar);
        return ExitCode::from(EXIT_PLANAR_NEW);
    }
    ExitCode::SUCCESS
}
