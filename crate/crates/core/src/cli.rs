//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hasse::{classify_pgl2, enumerate_subgroups, is_hasse, lemma31_check, pgl2, DEFAULT_ENUM_BOUND};
use crate::lmfdb::{default_bound, DataSource, Filters, Mode, DEFAULT_DELAY_MS};
use crate::matgrp::{GroupSpec, DEFAULT_CAP};
use crate::pipeline::{congruence_check, hasse_verdict, reduction_maps, scan, ScanRow};
use crate::to_canonical_json;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Table,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    Http,
    CacheOnly,
    Fixtures,
}

impl From<SourceMode> for Mode {
    fn from(m: SourceMode) -> Self {
        match m {
            SourceMode::Http => Mode::Http,
            SourceMode::CacheOnly => Mode::CacheOnly,
            SourceMode::Fixtures => Mode::Fixtures,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hasse", version, about = "Hasse subgroups and dihedral mod-lambda images of newforms")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,
    /// Newform data source.
    #[arg(long, global = true, value_enum, default_value = "fixtures")]
    pub source: SourceMode,
    /// Cache directory for http mode (default: HASSE_CACHE_DIR or ~/.cache/hasse).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Fixture directory (default: the bundled corpus).
    #[arg(long, global = true)]
    pub fixture_dir: Option<PathBuf>,
    /// Delay between http requests in milliseconds.
    #[arg(long, global = true, default_value_t = DEFAULT_DELAY_MS)]
    pub delay_ms: u64,
    /// Element cap for group closures.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Hasse test for the projectivization of a group given by generators.
    CheckGroup {
        #[arg(long)]
        file: PathBuf,
    },
    /// Subgroup classification of a subgroup of PGL_2(F_l).
    ClassifyPgl2 {
        #[arg(long)]
        file: PathBuf,
    },
    /// Block-diagonal Hasse check for a pair of 2-dimensional groups.
    VerifyLemma31 {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        g2: PathBuf,
    },
    /// All Hasse subgroups of PGL_2(F_l) up to conjugacy.
    EnumerateHasse {
        #[arg(long)]
        ell: u64,
        /// Largest ambient order handled.
        #[arg(long, default_value_t = DEFAULT_ENUM_BOUND)]
        bound: usize,
    },
    /// Verdict and image reports for one newform.
    Analyze {
        #[arg(long)]
        label: String,
        #[arg(long)]
        ell: u64,
        /// Prime bound (default: max(200, Sturm bound at lcm(N, q^2))).
        #[arg(long)]
        bound: Option<u64>,
    },
    /// Verdicts for all candidates up to a level.
    Scan {
        #[arg(long)]
        ell: u64,
        #[arg(long)]
        level_max: u64,
        #[arg(long)]
        bound: Option<u64>,
        #[command(flatten)]
        filters: FilterArgs,
        /// Worker threads (default: number of cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Candidate labels, or one record with --label.
    Fetch {
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        bound: Option<u64>,
        #[arg(long)]
        level_min: Option<u64>,
        #[arg(long)]
        level_max: Option<u64>,
        /// CM flag filter: true, false or any.
        #[arg(long, default_value = "false")]
        cm: String,
        /// Inner twist count filter, or any.
        #[arg(long, default_value = "1")]
        inner_twist_count: String,
    },
    /// Coefficient congruence between two newforms modulo primes above l.
    Congruence {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        ell: u64,
        /// Root of the field polynomial of f mod l selecting the prime (default: smaller root).
        #[arg(long)]
        root_f: Option<u64>,
        #[arg(long)]
        root_g: Option<u64>,
        #[arg(long)]
        bound: Option<u64>,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    /// CM flag filter: true, false or any.
    #[arg(long, default_value = "any")]
    pub cm: String,
    /// Inner twist count filter, or any.
    #[arg(long, default_value = "any")]
    pub inner_twist_count: String,
}

fn parse_opt<T: std::str::FromStr>(s: &str, what: &str) -> Result<Option<T>> {
    if s == "any" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Invalid(format!("bad {what} filter `{s}`")))
}

fn filters(cm: &str, itc: &str, range: Option<(u64, u64)>) -> Result<Filters> {
    Ok(Filters { dimension: 2, cm: parse_opt(cm, "cm")?, inner_twist_count: parse_opt(itc, "inner twist count")?, level_range: range })
}

fn read_spec(path: &PathBuf) -> Result<GroupSpec> {
    let s = std::fs::read_to_string(path)?;
    serde_json::from_str(&s).map_err(|e| Error::Parse { msg: format!("{}: {e}", path.display()), excerpt: s.chars().take(120).collect() })
}

/// Parses argv (including the program name), runs the command and writes the
/// report; returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let _ = out.write_all(report.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn source(g: &Global) -> DataSource {
    DataSource::from_env(g.source.into(), g.cache_dir.clone(), g.fixture_dir.clone(), g.delay_ms)
}

/// Effective configuration, with defaults resolved.
fn config(cli: &Cli, src: Option<&DataSource>) -> Value {
    let mut c = serde_json::to_value(&cli.command).unwrap_or(Value::Null);
    let g = &cli.global;
    if let Value::Object(m) = &mut c {
        m.insert("format".into(), json!(g.format));
        m.insert("cap".into(), json!(g.cap));
        if let Some(s) = src {
            m.insert("source".into(), json!(s.mode));
            m.insert("cache_dir".into(), json!(s.cache_dir.display().to_string()));
            m.insert("fixture_dir".into(), json!(s.fixture_dir.display().to_string()));
            m.insert("base_url".into(), json!(s.base_url));
            m.insert("delay_ms".into(), json!(g.delay_ms));
        }
        let level = match &cli.command {
            Command::Analyze { label, bound: None, .. } => label.split('.').next().and_then(|s| s.parse::<u64>().ok()),
            _ => None,
        };
        if let Some(n) = level {
            m.insert("bound".into(), json!(default_bound(n)));
        }
    }
    c
}

fn render(cli: &Cli, src: Option<&DataSource>, result: Value, table: String) -> Result<String> {
    let cfg = config(cli, src);
    match cli.global.format {
        Format::Json => Ok(to_canonical_json(&json!({"config": cfg, "result": result}))? + "\n"),
        Format::Table => {
            let mut s = String::new();
            if let Value::Object(m) = &cfg {
                for (k, v) in m {
                    s += &format!("# {k}: {}\n", match v {
                        Value::String(x) => x.clone(),
                        other => other.to_string(),
                    });
                }
            }
            Ok(s + &table)
        }
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let cap = cli.global.cap;
    match &cli.command {
        Command::CheckGroup { file } => {
            let h = read_spec(file)?.proj_group(cap)?;
            let r = is_hasse(&h);
            let mut t = format!("order: {}\nhasse: {}\n", h.order(), r.is_hasse);
            if let Some(m) = &r.violating_element {
                t += &format!("element without fixed point: {:?}\n", m.rows());
            }
            if let Some(p) = &r.global_fixed_point {
                t += &format!("global fixed point: {p}\n");
            }
            render(cli, None, serde_json::to_value(&r)?, t)
        }
        Command::ClassifyPgl2 { file } => {
            let h = read_spec(file)?.proj_group(cap)?;
            let c = classify_pgl2(&h)?;
            let s = &c.sutherland;
            let t = format!(
                "order: {}\nlabel: {}\nprojective determinant surjective: {}\ncond1 {} cond2 {} cond3 {} cond4 {}\npredicted hasse: {}\n",
                c.order, c.dickson_label, c.projective_det_surjective, s.cond1_dihedral_odd_n, s.cond2_ell_3mod4,
                s.cond3_split_cartan_normalizer, s.cond4_index2_fixes, s.predicted_hasse
            );
            render(cli, None, serde_json::to_value(&c)?, t)
        }
        Command::VerifyLemma31 { g, g2 } => {
            let a = read_spec(g)?.group(cap)?;
            let b = read_spec(g2)?.group(cap)?;
            let o = lemma31_check(&a, &b, cap)?;
            let t = format!("predicted: {}\nbrute force hasse: {}\n", o.predicted, o.brute_force.is_hasse);
            render(cli, None, serde_json::to_value(&o)?, t)
        }
        Command::EnumerateHasse { ell, bound } => {
            let amb = pgl2(*ell)?;
            let subs = enumerate_subgroups(&amb, *bound)?;
            let mut rows = Vec::new();
            let mut t = format!("subgroup classes: {}\n", subs.len());
            for h in subs.iter().filter(|h| is_hasse(h).is_hasse) {
                let c = classify_pgl2(h)?;
                t += &format!("order {} {} predicted {}\n", h.order(), c.dickson_label, c.sutherland.predicted_hasse);
                rows.push(json!({
                    "order": h.order(),
                    "generators": h.generators().iter().map(|m| m.rows()).collect::<Vec<_>>(),
                    "classification": c,
                }));
            }
            t += &format!("hasse classes: {}\n", rows.len());
            render(cli, None, json!({"subgroup_classes": subs.len(), "hasse": rows}), t)
        }
        Command::Analyze { label, ell, bound } => {
            let src = source(&cli.global);
            let f = src.fetch_form(label, *bound)?;
            let v = hasse_verdict(&f, *ell, *bound);
            let mut t = format!("{} at {}: {}\n", v.label, v.ell, serde_json::to_value(v.verdict)?.as_str().unwrap_or(""));
            for r in &v.reports {
                t += &format!(
                    "  root {} {}: {} alpha={} not-borel={}\n",
                    r.root,
                    r.ideal.clone().unwrap_or_default(),
                    r.image.clone().unwrap_or_else(|| status_name(&serde_json::to_value(&r.status).unwrap_or(Value::Null))),
                    r.alpha.as_ref().map_or("-".into(), |a| a.discriminant.to_string()),
                    match (r.not_borel_witness, r.certified_irreducible()) {
                        (Some(p), _) => format!("p={p}"),
                        (None, true) => "irreducible".into(),
                        (None, false) => "-".into(),
                    }
                );
            }
            render(cli, Some(&src), serde_json::to_value(&v)?, t)
        }
        Command::Scan { ell, level_max, bound, filters: fa, workers } => {
            let src = source(&cli.global);
            let flt = filters(&fa.cm, &fa.inner_twist_count, None)?;
            let rows = match workers {
                Some(w) => rayon::ThreadPoolBuilder::new()
                    .num_threads(*w)
                    .build()
                    .map_err(|e| Error::Invalid(e.to_string()))?
                    .install(|| scan(&src, *ell, *level_max, &flt, *bound))?,
                None => scan(&src, *ell, *level_max, &flt, *bound)?,
            };
            let t = scan_table(&rows);
            render(cli, Some(&src), serde_json::to_value(&rows)?, t)
        }
        Command::Fetch { label: Some(label), bound, .. } => {
            let src = source(&cli.global);
            let f = src.fetch_form(label, *bound)?;
            let j = f.to_json();
            let t = format!("{} level {} field {:?} a_p up to {}\n", j.label, j.level, j.field_poly, j.ap_max_prime);
            render(cli, Some(&src), serde_json::to_value(&j)?, t)
        }
        Command::Fetch { label: None, level_min, level_max, cm, inner_twist_count, .. } => {
            let src = source(&cli.global);
            let range = match (level_min, level_max) {
                (None, None) => None,
                (a, b) => Some((a.unwrap_or(1), b.unwrap_or(u64::MAX))),
            };
            let flt = filters(cm, inner_twist_count, range)?;
            let labels = src.query_candidates(&flt)?;
            let t = format!("candidates: {}\n{}", labels.len(), labels.iter().map(|l| format!("{l}\n")).collect::<String>());
            render(cli, Some(&src), json!({"filters": flt.canonical(), "labels": labels}), t)
        }
        Command::Congruence { f, g, ell, root_f, root_g, bound } => {
            let src = source(&cli.global);
            let a = src.fetch_form(f, *bound)?;
            let b = src.fetch_form(g, *bound)?;
            let pick = |rec: &crate::nfdata::NewformRecord, root: Option<u64>| -> Result<crate::nfdata::ReductionMap> {
                let maps = reduction_maps(rec, *ell)?;
                match root {
                    None => Ok(maps[0]),
                    Some(r) => maps
                        .into_iter()
                        .find(|m| m.root.value() == r % *ell)
                        .ok_or_else(|| Error::Invalid(format!("{r} is not a root for {}", rec.label))),
                }
            };
            let (ma, mb) = (pick(&a, *root_f)?, pick(&b, *root_g)?);
            let c = congruence_check(&a, &b, &ma, &mb, *bound)?;
            let t = format!(
                "{} (root {}) vs {} (root {}): {} up to {}{}\n",
                a.label,
                ma.root.value(),
                b.label,
                mb.root.value(),
                if c.congruent { "congruent" } else { "not congruent" },
                c.bound,
                c.first_violation.map_or(String::new(), |p| format!(", first violation at p = {p}"))
            );
            render(cli, Some(&src), serde_json::to_value(&c)?, t)
        }
    }
}

fn status_name(v: &Value) -> String {
    v.get("kind").and_then(Value::as_str).unwrap_or("?").to_string()
}

/// One line per form: verdict and the image at each prime above l.
pub fn scan_table(rows: &[ScanRow]) -> String {
    let mut t = String::new();
    for r in rows {
        match (&r.verdict, &r.error) {
            (Some(v), _) => {
                let imgs: Vec<String> = v
                    .reports
                    .iter()
                    .map(|x| x.image.clone().unwrap_or_else(|| status_name(&serde_json::to_value(&x.status).unwrap_or(Value::Null))))
                    .collect();
                t += &format!("{:<16} {:<12} {}\n", r.label, serde_json::to_value(v.verdict).ok().and_then(|x| x.as_str().map(String::from)).unwrap_or_default(), imgs.join(" "));
            }
            (None, e) => t += &format!("{:<16} error        {}\n", r.label, e.clone().unwrap_or_default()),
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("hasse").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run_str(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["analyze", "--label", "189.2.p.a"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn operational_errors_exit_2() {
        let (code, _, err) = run_str(&["analyze", "--label", "foo", "--ell", "7"]);
        assert_eq!(code, EXIT_ERROR);
        assert!(err.contains("invalid newform label"));
        assert_eq!(run_str(&["check-group", "--file", "/nonexistent.json"]).0, EXIT_ERROR);
    }

    #[test]
    fn check_group_trivial() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trivial.json");
        std::fs::write(&p, r#"{"modulus": 7, "dim": 2, "generators": [[[1, 0], [0, 1]]]}"#).unwrap();
        let (code, out, _) = run_str(&["check-group", "--file", p.to_str().unwrap(), "--format", "json"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["result"]["is_hasse"], false);
        assert_eq!(v["result"]["global_fixed_point"], json!([0, 1]));
        assert_eq!(v["config"]["command"], "check-group");
    }

    #[test]
    fn analyze_json_is_byte_stable() {
        let args = ["analyze", "--label", "189.2.p.a", "--ell", "7", "--source", "fixtures", "--format", "json"];
        let (code, a, _) = run_str(&args);
        assert_eq!(code, 0);
        let (_, b, _) = run_str(&args);
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["result"]["verdict"], "hasse");
        assert_eq!(v["config"]["bound"], 200);
        assert_eq!(v["config"]["source"], "fixtures");
    }

    #[test]
    fn table_header_echoes_config() {
        let (code, out, _) = run_str(&["enumerate-hasse", "--ell", "2"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("# "));
        assert!(out.contains("# ell: 2"));
        assert!(out.contains("hasse classes: 0"));
    }
}
