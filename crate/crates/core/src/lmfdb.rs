//! Newform data access: HTTP client for the upstream database, disk cache and
//! an offline fixture directory.

pub mod adapter;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::dchar::twist_modulus;
use crate::error::{Error, Result};
use crate::ffield::{is_prime, lcm};
use crate::nfdata::{sturm_bound, validate_label, NewformJson, NewformRecord};
use crate::to_canonical_json;

pub const DEFAULT_BASE_URL: &str = "https://www.lmfdb.org";
pub const DEFAULT_DELAY_MS: u64 = 500;

/// Prime bound for analyses at level n: max(200, B(lcm(n, q^2))) with q the twist modulus.
pub fn default_bound(n: u64) -> u64 {
    let q = twist_modulus(n);
    sturm_bound(lcm(n, q * q), 2).max(200)
}

pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<String>;
}

/// Blocking HTTP with a minimum delay between consecutive requests.
pub struct HttpTransport {
    agent: ureq::Agent,
    delay: Duration,
    last: Mutex<Option<Instant>>,
}

impl HttpTransport {
    pub fn new(delay: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
        Self { agent, delay, last: Mutex::new(None) }
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<String> {
        let mut last = self.last.lock().expect("rate limiter poisoned");
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.delay {
                std::thread::sleep(self.delay - elapsed);
            }
        }
        let res = self.agent.get(url).call();
        *last = Some(Instant::now());
        match res {
            Ok(r) => r.into_string().map_err(|e| Error::Transport(format!("{url}: {e}"))),
            Err(e) => Err(Error::Transport(format!("{url}: {e}"))),
        }
    }
}

/// Fails the calling test on any network access.
pub struct PanicTransport;

impl Transport for PanicTransport {
    fn get(&self, url: &str) -> Result<String> {
        panic!("network access attempted in offline mode: {url}");
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Http,
    CacheOnly,
    Fixtures,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "http" => Ok(Mode::Http),
            "cache_only" | "cache-only" | "cache" => Ok(Mode::CacheOnly),
            "fixtures" => Ok(Mode::Fixtures),
            _ => Err(Error::Invalid(format!("unknown source mode `{s}`"))),
        }
    }
}

/// Candidate filters; `None` leaves a flag unconstrained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Filters {
    pub dimension: u32,
    pub cm: Option<bool>,
    pub inner_twist_count: Option<u32>,
    pub level_range: Option<(u64, u64)>,
}

impl Default for Filters {
    fn default() -> Self {
        Self { dimension: 2, cm: Some(false), inner_twist_count: Some(1), level_range: None }
    }
}

impl Filters {
    pub fn any_dimension_two() -> Self {
        Self { dimension: 2, cm: None, inner_twist_count: None, level_range: None }
    }

    pub fn canonical(&self) -> String {
        let opt = |o: Option<String>| o.unwrap_or_else(|| "any".into());
        format!(
            "dim={};cm={};itc={};level={}",
            self.dimension,
            opt(self.cm.map(|b| b.to_string())),
            opt(self.inner_twist_count.map(|t| t.to_string())),
            opt(self.level_range.map(|(a, b)| format!("{a}-{b}")))
        )
    }

    fn level_ok(&self, n: u64) -> bool {
        self.level_range.map_or(true, |(a, b)| a <= n && n <= b)
    }

    pub fn matches(&self, j: &NewformJson) -> bool {
        let dim = if j.field_poly.len() == 3 { 2 } else { 1 };
        dim == self.dimension
            && self.cm.map_or(true, |c| c == j.cm)
            && self.inner_twist_count.map_or(true, |t| t == j.inner_twist_count)
            && self.level_ok(j.level)
    }
}

#[derive(Clone)]
pub struct DataSource {
    pub mode: Mode,
    pub base_url: String,
    pub cache_dir: PathBuf,
    pub fixture_dir: PathBuf,
    transport: Arc<dyn Transport>,
}

impl std::fmt::Debug for DataSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DataSource")
            .field("mode", &self.mode)
            .field("base_url", &self.base_url)
            .field("cache_dir", &self.cache_dir)
            .field("fixture_dir", &self.fixture_dir)
            .finish()
    }
}

/// The fixture corpus shipped with the crate.
pub fn bundled_fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("newforms")
}

pub fn default_cache_dir() -> PathBuf {
    std::env::var_os("HASSE_CACHE_DIR").map(PathBuf::from).unwrap_or_else(|| {
        std::env::var_os("HOME")
            .map(|h| PathBuf::from(h).join(".cache").join("hasse"))
            .unwrap_or_else(|| PathBuf::from(".hasse-cache"))
    })
}

impl DataSource {
    /// Offline source over a fixture directory; network access panics.
    pub fn fixtures(dir: impl Into<PathBuf>) -> Self {
        Self {
            mode: Mode::Fixtures,
            base_url: DEFAULT_BASE_URL.into(),
            cache_dir: default_cache_dir(),
            fixture_dir: dir.into(),
            transport: Arc::new(PanicTransport),
        }
    }

    /// Reads HASSE_LMFDB_BASE_URL, HASSE_CACHE_DIR and HASSE_OFFLINE; the
    /// latter forces cache_only over an http request.
    pub fn from_env(mode: Mode, cache_dir: Option<PathBuf>, fixture_dir: Option<PathBuf>, delay_ms: u64) -> Self {
        let offline = std::env::var("HASSE_OFFLINE").map_or(false, |v| v == "1");
        let mode = if offline && mode == Mode::Http { Mode::CacheOnly } else { mode };
        let transport: Arc<dyn Transport> = match mode {
            Mode::Http => Arc::new(HttpTransport::new(Duration::from_millis(delay_ms))),
            _ => Arc::new(PanicTransport),
        };
        Self {
            mode,
            base_url: std::env::var("HASSE_LMFDB_BASE_URL").unwrap_or_else(|_| DEFAULT_BASE_URL.into()),
            cache_dir: cache_dir.unwrap_or_else(default_cache_dir),
            fixture_dir: fixture_dir.unwrap_or_else(bundled_fixture_dir),
            transport,
        }
    }

    pub fn with_transport(mut self, t: Arc<dyn Transport>) -> Self {
        self.transport = t;
        self
    }

    fn form_cache_path(&self, label: &str) -> PathBuf {
        self.cache_dir.join("forms").join(format!("{label}.json"))
    }

    fn query_cache_path(&self, f: &Filters) -> PathBuf {
        let key: String = f.canonical().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect();
        self.cache_dir.join("queries").join(format!("{key}.json"))
    }

    /// Loads `label` with coefficients covering all primes up to `bound`
    /// (default [`default_bound`] of the level).
    pub fn fetch_form(&self, label: &str, bound: Option<u64>) -> Result<NewformRecord> {
        validate_label(label)?;
        let level: u64 = label.split('.').next().and_then(|s| s.parse().ok()).expect("validated");
        let bound = bound.unwrap_or_else(|| default_bound(level));
        let need = (2..=bound).rev().find(|&p| is_prime(p)).unwrap_or(0);
        let check = |j: NewformJson| -> Result<NewformRecord> {
            if j.ap_max_prime < need {
                return Err(Error::PartialData { label: label.into(), achieved: j.ap_max_prime, requested: bound });
            }
            NewformRecord::from_json(&j)
        };
        match self.mode {
            Mode::Fixtures => check(read_record(&self.fixture_dir.join(format!("{label}.json")), label)?),
            Mode::CacheOnly => check(read_record(&self.form_cache_path(label), label)?),
            Mode::Http => {
                let path = self.form_cache_path(label);
                if let Ok(j) = read_record(&path, label) {
                    if j.ap_max_prime >= need {
                        return NewformRecord::from_json(&j);
                    }
                }
                let j = self.download(label)?;
                write_once(&path, &(to_canonical_json(&j)? + "\n"))?;
                check(j)
            }
        }
    }

    fn download(&self, label: &str) -> Result<NewformJson> {
        let body = self.transport.get(&adapter::form_url(&self.base_url, label))?;
        let meta = adapter::parse_form(&body)?.ok_or_else(|| Error::NotFound(label.into()))?;
        if meta.label != label {
            return Err(Error::Parse { msg: format!("asked for {label}, received {}", meta.label), excerpt: String::new() });
        }
        let body = self.transport.get(&adapter::hecke_url(&self.base_url, meta.orbit_code))?;
        adapter::parse_hecke(&meta, &body)
    }

    /// Sorted candidate labels.
    pub fn query_candidates(&self, f: &Filters) -> Result<Vec<String>> {
        match self.mode {
            Mode::Fixtures => {
                let mut out = Vec::new();
                let rd = match fs::read_dir(&self.fixture_dir) {
                    Ok(rd) => rd,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
                    Err(e) => return Err(e.into()),
                };
                for entry in rd {
                    let path = entry?.path();
                    if path.extension().map_or(true, |e| e != "json") {
                        continue;
                    }
                    let j = read_record(&path, &path.display().to_string())?;
                    if f.matches(&j) {
                        out.push(j.label);
                    }
                }
                sort_labels(&mut out);
                Ok(out)
            }
            Mode::CacheOnly => {
                let path = self.query_cache_path(f);
                let s = fs::read_to_string(&path)
                    .map_err(|_| Error::Transport(format!("offline and no cached result for `{}`", f.canonical())))?;
                serde_json::from_str(&s).map_err(|e| Error::Parse { msg: e.to_string(), excerpt: s.chars().take(200).collect() })
            }
            Mode::Http => {
                let path = self.query_cache_path(f);
                if let Ok(s) = fs::read_to_string(&path) {
                    if let Ok(v) = serde_json::from_str::<Vec<String>>(&s) {
                        return Ok(v);
                    }
                }
                let mut out = Vec::new();
                let mut offset = 0;
                loop {
                    let body = self.transport.get(&adapter::candidates_url(&self.base_url, f, offset))?;
                    let page = adapter::parse_candidates(&body)?;
                    let n = page.len();
                    out.extend(page.into_iter().filter(|(_, lvl)| f.level_ok(*lvl)).map(|(l, _)| l));
                    if n < adapter::PAGE_SIZE {
                        break;
                    }
                    offset += n;
                }
                sort_labels(&mut out);
                out.dedup();
                write_once(&path, &(serde_json::to_string(&out)? + "\n"))?;
                Ok(out)
            }
        }
    }
}

fn read_record(path: &Path, label: &str) -> Result<NewformJson> {
    let s = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NotFound(label.into())),
        Err(e) => return Err(e.into()),
    };
    serde_json::from_str(&s).map_err(|e| Error::Parse { msg: format!("{}: {e}", path.display()), excerpt: s.chars().take(200).collect() })
}

fn write_once(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Orders labels by (level, weight, character letters, form letters), each
/// letter string compared by length first.
pub fn label_key(label: &str) -> (u64, u64, usize, String, usize, String) {
    let p: Vec<&str> = label.split('.').collect();
    let num = |i: usize| p.get(i).and_then(|s| s.parse().ok()).unwrap_or(u64::MAX);
    let s = |i: usize| p.get(i).map(|s| s.to_string()).unwrap_or_default();
    (num(0), num(1), s(2).len(), s(2), s(3).len(), s(3))
}

pub fn sort_labels(v: &mut [String]) {
    v.sort_by_cached_key(|l| label_key(l));
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Canned(Vec<(String, String)>);

    impl Transport for Canned {
        fn get(&self, url: &str) -> Result<String> {
            self.0
                .iter()
                .find(|(k, _)| url.contains(k.as_str()))
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::Transport(format!("no canned response for {url}")))
        }
    }

    #[test]
    fn fixture_fetch_examples() {
        let src = DataSource::fixtures(bundled_fixture_dir());
        let f = src.fetch_form("189.2.p.a", None).unwrap();
        assert_eq!(f.level, 189);
        assert_eq!(f.nebentypus.conductor(), 21);
        assert!(f.ap(2).unwrap().is_zero());
        let g = src.fetch_form("7938.2.a.bj", None).unwrap();
        assert!(g.nebentypus.is_trivial());
        assert_eq!(g.field.poly(), vec![-2, 0, 1]);
        assert!(matches!(src.fetch_form("foo", None), Err(Error::InvalidLabel(_))));
        assert!(matches!(src.fetch_form("11.2.a.zz", None), Err(Error::NotFound(_))));
        assert!(matches!(src.fetch_form("189.2.p.a", Some(5000)), Err(Error::PartialData { achieved: 997, .. })));
    }

    #[test]
    fn fixture_queries() {
        let src = DataSource::fixtures(bundled_fixture_dir());
        let f = Filters { level_range: Some((7938, 7938)), ..Filters::default() };
        let labels = src.query_candidates(&f).unwrap();
        assert!(labels.contains(&"7938.2.a.bj".to_string()));
        let empty = DataSource::fixtures(tempfile::tempdir().unwrap().path().join("none"));
        assert!(empty.query_candidates(&Filters::default()).unwrap().is_empty());
    }

    #[test]
    fn label_order() {
        let mut v: Vec<String> = ["189.2.p.a", "63.2.e.a", "7938.2.a.bj", "7938.2.a.z", "189.2.c.a"].map(String::from).to_vec();
        sort_labels(&mut v);
        assert_eq!(v, ["63.2.e.a", "189.2.c.a", "189.2.p.a", "7938.2.a.z", "7938.2.a.bj"]);
    }

    #[test]
    fn http_mode_caches_and_goes_offline() {
        let dir = tempfile::tempdir().unwrap();
        let fixture = fs::read_to_string(bundled_fixture_dir().join("189.2.p.a.json")).unwrap();
        let j: NewformJson = serde_json::from_str(&fixture).unwrap();
        let ap: Vec<Vec<i64>> = j.ap.iter().map(|e| e.coeffs.clone()).collect();
        let meta = serde_json::json!({"data": [{"label": "189.2.p.a", "level": 189, "weight": 2, "dim": 2, "is_cm": true,
            "cm_discs": [-3], "inner_twist_count": 4, "field_poly": [1, -1, 1], "hecke_orbit_code": 77}]});
        // the character sends 29 -> -1 and 136 -> g
        let hecke = serde_json::json!({"data": [{"ap": ap, "maxp": 997, "hecke_ring_power_basis": true,
            "hecke_ring_character_values": [[29, [-1, 0]], [136, [0, 1]]]}]});
        let canned = Canned(vec![
            ("mf_newforms/?label=189.2.p.a".into(), meta.to_string()),
            ("hecke_orbit_code=i77".into(), hecke.to_string()),
        ]);
        let src = DataSource {
            mode: Mode::Http,
            base_url: "http://example.invalid".into(),
            cache_dir: dir.path().to_path_buf(),
            fixture_dir: bundled_fixture_dir(),
            transport: Arc::new(canned),
        };
        let live = src.fetch_form("189.2.p.a", None).unwrap();
        let fixed = DataSource::fixtures(bundled_fixture_dir()).fetch_form("189.2.p.a", None).unwrap();
        assert_eq!(live.ap, fixed.ap);
        for p in [2u64, 5, 11, 13, 101] {
            assert_eq!(live.nebentypus_at(p).unwrap(), fixed.nebentypus_at(p).unwrap());
        }
        let offline = DataSource { mode: Mode::CacheOnly, transport: Arc::new(PanicTransport), ..src };
        let cached = offline.fetch_form("189.2.p.a", None).unwrap();
        assert_eq!(cached.ap, live.ap);
    }

    #[test]
    fn cache_only_without_cache_is_a_transport_error() {
        let dir = tempfile::tempdir().unwrap();
        let src = DataSource { mode: Mode::CacheOnly, cache_dir: dir.path().into(), ..DataSource::fixtures(bundled_fixture_dir()) };
        assert!(matches!(src.query_candidates(&Filters::default()), Err(Error::Transport(_))));
        assert!(matches!(src.fetch_form("189.2.p.a", None), Err(Error::NotFound(_))));
    }

    #[test]
    fn fixtures_round_trip_byte_stable() {
        for entry in fs::read_dir(bundled_fixture_dir()).unwrap() {
            let path = entry.unwrap().path();
            let s = fs::read_to_string(&path).unwrap();
            let rec = NewformRecord::from_str(&s).unwrap();
            assert_eq!(to_canonical_json(&rec.to_json()).unwrap() + "\n", s, "{}", path.display());
        }
    }
}
