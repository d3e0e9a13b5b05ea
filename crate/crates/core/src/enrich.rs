//! CPE generation and vulnerability enrichment from NVD, EPSS and a curated
//! threat-flags file.
//!
//! Every request goes through a [`Transport`]. [`FixtureTransport`] replays
//! recorded response bodies stored under the SHA-256 of the request URL and
//! has no network client at all; [`LiveTransport`] talks to the public APIs
//! with rate limiting and exponential-backoff retry, and can record what it
//! receives in the same layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{AttackVector, Component, SystemModel, Vulnerability};

pub const NVD_ENDPOINT: &str = "https://services.nvd.nist.gov/rest/json/cves/2.0";
pub const EPSS_ENDPOINT: &str = "https://api.first.org/data/v1/epss";
/// Environment variable holding the NVD API key for live mode.
pub const API_KEY_VAR: &str = "NVD_API_KEY";
const EPSS_BATCH: usize = 100;

/// A CPE 2.3 formatted-string name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CpeId {
    pub part: char,
    pub vendor: String,
    pub product: String,
    pub version: String,
}

impl CpeId {
    /// `cpe:2.3:<part>:<vendor>:<product>:<version>` without the trailing
    /// wildcard positions.
    pub fn prefix(&self) -> String {
        format!(
            "cpe:2.3:{}:{}:{}:{}",
            self.part, self.vendor, self.product, self.version
        )
    }
}

impl fmt::Display for CpeId {
    /// The full thirteen-field form; update, edition, language and the
    /// extended attributes are wildcards.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:*:*:*:*:*:*:*", self.prefix())
    }
}

fn cpe_field(value: &str) -> String {
    value.trim().to_lowercase().replace(' ', "_")
}

pub fn generate_cpe(c: &Component) -> Result<CpeId> {
    for (name, value) in [
        ("vendor", &c.vendor),
        ("product", &c.product),
        ("version", &c.version),
    ] {
        if value.trim().is_empty() {
            return Err(Error::MissingField(name));
        }
    }
    Ok(CpeId {
        part: c.part.cpe_code(),
        vendor: cpe_field(&c.vendor),
        product: cpe_field(&c.product),
        version: cpe_field(&c.version),
    })
}

/// Something that can answer an HTTP GET with a response body.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<String>;
    fn source(&self) -> RecordSource;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    Live,
    Fixture,
}

/// File name under which the response to `url` is recorded.
pub fn fixture_name(url: &str) -> String {
    format!("{}.json", hex::encode(Sha256::digest(url.as_bytes())))
}

/// Replays recorded responses from a directory.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    dir: PathBuf,
}

impl FixtureTransport {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureTransport { dir: dir.into() }
    }
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str) -> Result<String> {
        let path = self.dir.join(fixture_name(url));
        fs::read_to_string(&path).map_err(|_| Error::MissingFixture {
            url: url.to_string(),
            path,
        })
    }

    fn source(&self) -> RecordSource {
        RecordSource::Fixture
    }
}

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub api_key: String,
    /// Minimum spacing between consecutive requests.
    pub min_interval: Duration,
    pub max_retries: u32,
    /// Delay before the first retry; doubled on each further attempt.
    pub backoff: Duration,
    pub timeout: Duration,
    /// When set, every successful response is also written here.
    pub record_dir: Option<PathBuf>,
}

impl LiveConfig {
    /// Reads the API key from [`API_KEY_VAR`]. Fails before any request is
    /// made when the variable is absent or empty.
    pub fn from_env() -> Result<LiveConfig> {
        match std::env::var(API_KEY_VAR) {
            Ok(key) if !key.trim().is_empty() => Ok(LiveConfig::with_key(key)),
            _ => Err(Error::Config(format!(
                "live mode needs an NVD API key in ${API_KEY_VAR}"
            ))),
        }
    }

    pub fn with_key(api_key: String) -> LiveConfig {
        LiveConfig {
            api_key,
            // NVD allows 50 requests per rolling 30 s with a key.
            min_interval: Duration::from_millis(600),
            max_retries: 4,
            backoff: Duration::from_secs(2),
            timeout: Duration::from_secs(30),
            record_dir: None,
        }
    }
}

pub struct LiveTransport {
    client: reqwest::blocking::Client,
    config: LiveConfig,
    last: Mutex<Option<Instant>>,
}

impl LiveTransport {
    pub fn new(config: LiveConfig) -> Result<Self> {
        if config.api_key.trim().is_empty() {
            return Err(Error::Config("empty NVD API key".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .user_agent(concat!("patchrank/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(LiveTransport {
            client,
            config,
            last: Mutex::new(None),
        })
    }

    fn throttle(&self) {
        let mut last = self.last.lock().expect("throttle lock");
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.config.min_interval {
                thread::sleep(self.config.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }

    fn attempt(&self, url: &str) -> Result<String> {
        self.throttle();
        let mut req = self.client.get(url);
        if url.starts_with(NVD_ENDPOINT) {
            req = req.header("apiKey", &self.config.api_key);
        }
        let network = |message: String| Error::Network {
            url: url.to_string(),
            message,
        };
        let resp = req.send().map_err(|e| network(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(network(format!("HTTP {status}")));
        }
        resp.text().map_err(|e| network(e.to_string()))
    }
}

impl Transport for LiveTransport {
    fn get(&self, url: &str) -> Result<String> {
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        let body = loop {
            match self.attempt(url) {
                Ok(body) => break body,
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    log::warn!("{e}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        if let Some(dir) = &self.config.record_dir {
            let path = dir.join(fixture_name(url));
            fs::create_dir_all(dir)
                .and_then(|_| fs::write(&path, &body))
                .map_err(|source| Error::Io { path, source })?;
        }
        Ok(body)
    }

    fn source(&self) -> RecordSource {
        RecordSource::Live
    }
}

/// One enriched CVE with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub cve_id: String,
    pub cvss_vector: String,
    pub cvss_version: String,
    pub cvss_base: f64,
    pub likelihood_subscore: f64,
    pub impact_subscore: f64,
    pub attack_vector: AttackVector,
    pub scope_change: bool,
    pub epss: f64,
    pub exploit_exists: bool,
    pub ransomware: bool,
    pub source: RecordSource,
    pub fetched_at: DateTime<Utc>,
}

impl EnrichmentRecord {
    pub fn to_vulnerability(&self) -> Vulnerability {
        Vulnerability {
            cve_id: self.cve_id.clone(),
            cvss_base: self.cvss_base,
            likelihood_subscore: self.likelihood_subscore,
            impact_subscore: self.impact_subscore,
            epss: self.epss,
            exploit_exists: self.exploit_exists,
            scope_change: self.scope_change,
            ransomware: self.ransomware,
            attack_vector: self.attack_vector,
            cvss_version: self.cvss_version.clone(),
        }
    }
}

pub fn nvd_url(cpe: &CpeId, start_index: usize) -> String {
    let mut url = format!("{NVD_ENDPOINT}?cpeName={cpe}");
    if start_index > 0 {
        url.push_str(&format!("&startIndex={start_index}"));
    }
    url
}

pub fn epss_url(cves: &[String]) -> String {
    format!("{EPSS_ENDPOINT}?cve={}", cves.join(","))
}

fn unparseable(source: &str, message: impl Into<String>) -> Error {
    Error::UnparseableResponse {
        source_name: source.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NvdPage {
    #[serde(default)]
    total_results: usize,
    #[serde(default)]
    results_per_page: usize,
    #[serde(default)]
    timestamp: Option<String>,
    #[serde(default)]
    vulnerabilities: Vec<NvdItem>,
}

#[derive(Debug, Deserialize)]
struct NvdItem {
    cve: NvdCve,
}

#[derive(Debug, Deserialize)]
struct NvdCve {
    id: String,
    #[serde(default)]
    metrics: NvdMetrics,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NvdMetrics {
    #[serde(default)]
    cvss_metric_v31: Vec<NvdMetric>,
    #[serde(default)]
    cvss_metric_v30: Vec<NvdMetric>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NvdMetric {
    #[serde(default, rename = "type")]
    kind: String,
    cvss_data: CvssData,
    exploitability_score: f64,
    impact_score: f64,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CvssData {
    version: String,
    vector_string: String,
    base_score: f64,
    attack_vector: String,
    scope: String,
}

fn parse_attack_vector(s: &str) -> Option<AttackVector> {
    match s {
        "NETWORK" => Some(AttackVector::Network),
        "ADJACENT_NETWORK" | "ADJACENT" => Some(AttackVector::Adjacent),
        "LOCAL" => Some(AttackVector::Local),
        "PHYSICAL" => Some(AttackVector::Physical),
        _ => None,
    }
}

fn parse_timestamp(ts: Option<&str>) -> Option<DateTime<Utc>> {
    let ts = ts?;
    DateTime::parse_from_rfc3339(ts)
        .map(|t| t.with_timezone(&Utc))
        .ok()
        .or_else(|| {
            chrono::NaiveDateTime::parse_from_str(ts, "%Y-%m-%dT%H:%M:%S%.f")
                .ok()
                .map(|n| n.and_utc())
        })
}

/// CVEs affecting exactly `cpe`, sorted by CVE id. CVEs without CVSS v3
/// metrics are skipped with a warning.
pub fn fetch_vulnerabilities(cpe: &CpeId, transport: &dyn Transport) -> Result<Vec<EnrichmentRecord>> {
    let mut records = BTreeMap::new();
    let mut start = 0;
    loop {
        let url = nvd_url(cpe, start);
        let body = transport.get(&url)?;
        let page: NvdPage = serde_json::from_str(&body).map_err(|e| unparseable("NVD", e.to_string()))?;
        let fetched_at = match transport.source() {
            RecordSource::Fixture => parse_timestamp(page.timestamp.as_deref())
                .ok_or_else(|| unparseable("NVD", "recorded response lacks a timestamp"))?,
            RecordSource::Live => Utc::now(),
        };
        let count = page.vulnerabilities.len();
        for item in page.vulnerabilities {
            let cve = item.cve;
            let metrics = if cve.metrics.cvss_metric_v31.is_empty() {
                cve.metrics.cvss_metric_v30
            } else {
                cve.metrics.cvss_metric_v31
            };
            let Some(idx) = metrics
                .iter()
                .position(|m| m.kind == "Primary")
                .or(if metrics.is_empty() { None } else { Some(0) })
            else {
                log::warn!("{}: no CVSS v3 metrics, skipped", cve.id);
                continue;
            };
            let m = &metrics[idx];
            let av = parse_attack_vector(&m.cvss_data.attack_vector).ok_or_else(|| {
                unparseable(
                    "NVD",
                    format!("{}: attack vector {}", cve.id, m.cvss_data.attack_vector),
                )
            })?;
            records.insert(
                cve.id.clone(),
                EnrichmentRecord {
                    cve_id: cve.id,
                    cvss_vector: m.cvss_data.vector_string.clone(),
                    cvss_version: m.cvss_data.version.clone(),
                    cvss_base: m.cvss_data.base_score,
                    likelihood_subscore: m.exploitability_score,
                    impact_subscore: m.impact_score,
                    attack_vector: av,
                    scope_change: m.cvss_data.scope == "CHANGED",
                    epss: 0.0,
                    exploit_exists: false,
                    ransomware: false,
                    source: transport.source(),
                    fetched_at,
                },
            );
        }
        start += count;
        if count == 0 || page.results_per_page == 0 || start >= page.total_results {
            break;
        }
    }
    Ok(records.into_values().collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpssResult {
    pub scores: BTreeMap<String, f64>,
    /// Requested ids the service had no score for.
    pub misses: Vec<String>,
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

/// EPSS probabilities for `cve_ids`, requested in sorted batches.
pub fn fetch_epss(cve_ids: &[String], transport: &dyn Transport) -> Result<EpssResult> {
    let ids: Vec<String> = cve_ids
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut result = EpssResult::default();
    for batch in ids.chunks(EPSS_BATCH) {
        let body = transport.get(&epss_url(batch))?;
        let doc: Value = serde_json::from_str(&body).map_err(|e| unparseable("EPSS", e.to_string()))?;
        let data = doc
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| unparseable("EPSS", "missing data array"))?;
        for row in data {
            let cve = row.get("cve").and_then(Value::as_str);
            let score = row.get("epss").and_then(number);
            match (cve, score) {
                (Some(c), Some(s)) if (0.0..=1.0).contains(&s) => {
                    result.scores.insert(c.to_string(), s);
                }
                _ => return Err(unparseable("EPSS", format!("bad row {row}"))),
            }
        }
    }
    result.misses = ids
        .into_iter()
        .filter(|id| !result.scores.contains_key(id))
        .collect();
    Ok(result)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreatFlags {
    pub exploit_exists: bool,
    pub ransomware: bool,
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

/// Reads a `cve_id,exploit_exists,ransomware` table.
pub fn load_flags(path: &Path) -> Result<BTreeMap<String, ThreatFlags>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_flags(&text)
}

pub fn parse_flags(text: &str) -> Result<BTreeMap<String, ThreatFlags>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::FlagsFormat(e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::FlagsFormat(format!("missing column {name}")))
    };
    if headers.is_empty() {
        return Ok(BTreeMap::new());
    }
    let (c_id, c_exp, c_ran) = (col("cve_id")?, col("exploit_exists")?, col("ransomware")?);
    let mut flags = BTreeMap::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::FlagsFormat(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |what: &str| Error::FlagsFormat(format!("row {}: bad {what}", line + 2));
        let id = field(c_id);
        if id.is_empty() {
            return Err(bad("cve_id"));
        }
        flags.insert(
            id.to_string(),
            ThreatFlags {
                exploit_exists: parse_flag(field(c_exp)).ok_or_else(|| bad("exploit_exists"))?,
                ransomware: parse_flag(field(c_ran)).ok_or_else(|| bad("ransomware"))?,
            },
        );
    }
    Ok(flags)
}

/// Copies curated flags onto the records. Returns warnings for records
/// without an entry (left false) and entries matching no record.
pub fn annotate_threat_flags(
    records: &mut [EnrichmentRecord],
    flags: &BTreeMap<String, ThreatFlags>,
) -> Vec<String> {
    let mut warnings = Vec::new();
    let mut unflagged = BTreeSet::new();
    for r in records.iter_mut() {
        let f = match flags.get(&r.cve_id) {
            Some(f) => *f,
            None => {
                unflagged.insert(r.cve_id.clone());
                ThreatFlags::default()
            }
        };
        r.exploit_exists = f.exploit_exists;
        r.ransomware = f.ransomware;
    }
    if !unflagged.is_empty() {
        warnings.push(format!(
            "no threat flags for {}; assumed false",
            unflagged.into_iter().collect::<Vec<_>>().join(", ")
        ));
    }
    let known: BTreeSet<&str> = records.iter().map(|r| r.cve_id.as_str()).collect();
    let unknown: Vec<&str> = flags
        .keys()
        .map(String::as_str)
        .filter(|k| !known.contains(k))
        .collect();
    if !unknown.is_empty() {
        warnings.push(format!("flags for unknown CVEs ignored: {}", unknown.join(", ")));
    }
    warnings
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentLog {
    pub records: Vec<EnrichmentRecord>,
    pub warnings: Vec<String>,
}

/// Returns a copy of `model` whose components carry generated CPEs and
/// freshly fetched vulnerabilities. The input is left untouched.
pub fn enrich_model(
    model: &SystemModel,
    transport: &dyn Transport,
    flags: &BTreeMap<String, ThreatFlags>,
) -> Result<(SystemModel, EnrichmentLog)> {
    let mut out = model.clone();
    let mut per_component = Vec::new();
    let mut all = Vec::new();
    for (ai, asset) in model.assets.iter().enumerate() {
        for (ci, comp) in asset.components.iter().enumerate() {
            let cpe = generate_cpe(comp)?;
            let records = fetch_vulnerabilities(&cpe, transport)?;
            out.assets[ai].components[ci].cpe = Some(cpe.to_string());
            per_component.push((ai, ci, records.len()));
            all.extend(records);
        }
    }

    let ids: Vec<String> = all.iter().map(|r| r.cve_id.clone()).collect();
    let epss = fetch_epss(&ids, transport)?;
    let mut warnings = Vec::new();
    if !epss.misses.is_empty() {
        warnings.push(format!("no EPSS score for {}; using 0", epss.misses.join(", ")));
    }
    for r in &mut all {
        r.epss = epss.scores.get(&r.cve_id).copied().unwrap_or(0.0);
    }
    warnings.extend(annotate_threat_flags(&mut all, flags));

    let mut rest = all.as_slice();
    for (ai, ci, n) in per_component {
        let (mine, tail) = rest.split_at(n);
        out.assets[ai].components[ci].vulnerabilities =
            mine.iter().map(EnrichmentRecord::to_vulnerability).collect();
        rest = tail;
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((
        out,
        EnrichmentLog {
            records: all,
            warnings,
        },
    ))
}
