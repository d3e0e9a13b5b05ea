//! Domain model: hosts, assets, components, vulnerabilities and the edges
//! between them, plus the inventory document they are loaded from.
//!
//! An inventory is a single JSON document. It may name another inventory in
//! an `include` key; the included document is loaded first and the including
//! document is layered on top of it (arrays are appended, objects merged key
//! by key, scalars replaced). Scenario variants that differ by a handful of
//! edges share one base file this way.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// CVSS v3 attack vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackVector {
    Network,
    Adjacent,
    Local,
    Physical,
}

/// Whether a vulnerability can be reached across the network or only from
/// the host it lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exposure {
    HostBased,
    NetworkBased,
}

impl AttackVector {
    pub fn exposure(self) -> Exposure {
        match self {
            AttackVector::Network | AttackVector::Adjacent => Exposure::NetworkBased,
            AttackVector::Local | AttackVector::Physical => Exposure::HostBased,
        }
    }
}

impl fmt::Display for Exposure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exposure::HostBased => "host-based",
            Exposure::NetworkBased => "network-based",
        })
    }
}

/// CVSS v3 qualitative severity bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Critical,
    High,
    Medium,
    Low,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Critical,
        Severity::High,
        Severity::Medium,
        Severity::Low,
    ];

    /// CVSS v3 rating scale. A score of 0.0 ("none") lands in `Low`, where it
    /// adds nothing to any weighted sum.
    pub fn from_score(score: f64) -> Severity {
        if score >= 9.0 {
            Severity::Critical
        } else if score >= 7.0 {
            Severity::High
        } else if score >= 4.0 {
            Severity::Medium
        } else {
            Severity::Low
        }
    }
}

fn default_cvss_version() -> String {
    "3.1".to_string()
}

/// One CVE as it affects one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vulnerability {
    pub cve_id: String,
    pub cvss_base: f64,
    /// CVSS exploitability subscore.
    pub likelihood_subscore: f64,
    pub impact_subscore: f64,
    pub epss: f64,
    pub exploit_exists: bool,
    pub scope_change: bool,
    pub ransomware: bool,
    pub attack_vector: AttackVector,
    #[serde(default = "default_cvss_version")]
    pub cvss_version: String,
}

impl Vulnerability {
    pub fn severity(&self) -> Severity {
        Severity::from_score(self.cvss_base)
    }

    pub fn exposure(&self) -> Exposure {
        self.attack_vector.exposure()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentPart {
    Application,
    Os,
    Hardware,
}

impl ComponentPart {
    /// Single-letter CPE 2.3 part code.
    pub fn cpe_code(self) -> char {
        match self {
            ComponentPart::Application => 'a',
            ComponentPart::Os => 'o',
            ComponentPart::Hardware => 'h',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub vendor: String,
    pub product: String,
    pub version: String,
    pub part: ComponentPart,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpe: Option<String>,
    #[serde(default)]
    pub vulnerabilities: Vec<Vulnerability>,
}

/// Functional-dependency rule kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DependencyKind {
    /// Embedding.
    ER,
    /// Interaction (process/control data).
    IR,
    /// Data stream / listening.
    DR,
    /// Service.
    SR,
    /// Security controls.
    SCR,
    /// Network connectivity between assets.
    NR,
}

impl fmt::Display for DependencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// `from` depends on `to`.
///
/// Inside an asset both ends are component ids. Across assets they are
/// `asset/component` paths, except for `NR` edges whose ends are asset ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyEdge {
    pub from: String,
    pub to: String,
    pub kind: DependencyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunicationEdge {
    pub a: String,
    pub b: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asset {
    pub id: String,
    pub name: String,
    pub host_ref: String,
    #[serde(default)]
    pub ip: String,
    #[serde(default)]
    pub mac: String,
    #[serde(default)]
    pub subnet: String,
    pub business_criticality_level: u8,
    pub components: Vec<Component>,
    #[serde(default)]
    pub intra_edges: Vec<DependencyEdge>,
}

impl Asset {
    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    pub fn vulnerability_count(&self) -> usize {
        self.components.iter().map(|c| c.vulnerabilities.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Host {
    pub id: String,
    pub assets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityWeights {
    pub critical: f64,
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl SeverityWeights {
    pub fn weight(&self, s: Severity) -> f64 {
        match s {
            Severity::Critical => self.critical,
            Severity::High => self.high,
            Severity::Medium => self.medium,
            Severity::Low => self.low,
        }
    }

    pub fn total(&self) -> f64 {
        self.critical + self.high + self.medium + self.low
    }
}

impl Default for SeverityWeights {
    fn default() -> Self {
        Self {
            critical: 1.0,
            high: 0.75,
            medium: 0.5,
            low: 0.25,
        }
    }
}

/// Default edge weight for each dependency kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DependencyWeights {
    pub er: f64,
    pub ir: f64,
    pub dr: f64,
    pub sr: f64,
    pub scr: f64,
    pub nr: f64,
}

impl DependencyWeights {
    pub fn weight(&self, kind: DependencyKind) -> f64 {
        match kind {
            DependencyKind::ER => self.er,
            DependencyKind::IR => self.ir,
            DependencyKind::DR => self.dr,
            DependencyKind::SR => self.sr,
            DependencyKind::SCR => self.scr,
            DependencyKind::NR => self.nr,
        }
    }
}

impl Default for DependencyWeights {
    fn default() -> Self {
        Self {
            er: 2.0,
            ir: 1.0,
            dr: 1.0,
            sr: 1.0,
            scr: 1.0,
            nr: 2.0,
        }
    }
}

/// Every tunable weight and threshold of the scoring pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskParams {
    /// Weight of the normalised CVSS exploitability subscore in exploit likelihood.
    pub alpha: f64,
    /// Weight of EPSS in exploit likelihood.
    pub beta: f64,
    /// Weight of the exploit-exists indicator in exploit likelihood.
    pub gamma_exploit: f64,
    /// Weight of scope change in propagation likelihood.
    pub delta: f64,
    /// Weight of ransomware use in propagation likelihood.
    pub theta: f64,
    /// Propagation likelihood at or above which indirect risk is computed.
    pub sigma: f64,
    pub severity_weights: SeverityWeights,
    /// Weight of asset centrality in asset criticality.
    pub w1: f64,
    /// Weight of normalised business criticality in asset criticality.
    pub w2: f64,
    /// Assets whose criticality score exceeds this are attack-path targets.
    pub criticality_threshold: f64,
    pub pagerank_damping: f64,
    /// Normalised business criticality for levels 1 through 6.
    pub business_criticality: [f64; 6],
    pub dependency_weights: DependencyWeights,
    /// Count an asset once in network risk even if several attack paths cross it.
    pub dedup_paths: bool,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.4,
            gamma_exploit: 0.3,
            delta: 0.5,
            theta: 0.5,
            sigma: 0.5,
            severity_weights: SeverityWeights::default(),
            w1: 0.6,
            w2: 0.4,
            criticality_threshold: 0.4,
            pagerank_damping: 0.85,
            business_criticality: [0.15, 0.30, 0.45, 0.60, 0.75, 0.90],
            dependency_weights: DependencyWeights::default(),
            dedup_paths: false,
        }
    }
}

impl RiskParams {
    /// Normalised business criticality for a level in 1..=6.
    pub fn business_score(&self, level: u8) -> f64 {
        let idx = (level.clamp(1, 6) - 1) as usize;
        self.business_criticality[idx]
    }

    /// Layers a (possibly partial) JSON object of overrides on top of `self`.
    pub fn with_overrides(&self, overrides: &Value) -> Result<RiskParams> {
        let mut base = serde_json::to_value(self).expect("params serialize");
        merge_values(&mut base, overrides.clone(), false);
        serde_json::from_value(base)
            .map_err(|e| Error::InvalidParams(vec![format!("cannot apply overrides: {e}")]))
    }
}

/// Checks parameters. Hard violations become an error; soft findings are
/// returned as warnings.
pub fn validate_params(p: &RiskParams) -> Result<Vec<String>> {
    let mut errors = Vec::new();
    let mut nonneg = |name: &str, v: f64| {
        if !v.is_finite() || v < 0.0 {
            errors.push(format!("{name} must be a nonnegative number, got {v}"));
        }
    };
    nonneg("alpha", p.alpha);
    nonneg("beta", p.beta);
    nonneg("gamma_exploit", p.gamma_exploit);
    nonneg("delta", p.delta);
    nonneg("theta", p.theta);
    nonneg("w1", p.w1);
    nonneg("w2", p.w2);
    nonneg("criticality_threshold", p.criticality_threshold);
    nonneg("severity_weights.critical", p.severity_weights.critical);
    nonneg("severity_weights.high", p.severity_weights.high);
    nonneg("severity_weights.medium", p.severity_weights.medium);
    nonneg("severity_weights.low", p.severity_weights.low);
    for (i, b) in p.business_criticality.iter().enumerate() {
        nonneg(&format!("business_criticality[{}]", i + 1), *b);
    }
    let dw = &p.dependency_weights;
    for (name, w) in [
        ("ER", dw.er),
        ("IR", dw.ir),
        ("DR", dw.dr),
        ("SR", dw.sr),
        ("SCR", dw.scr),
        ("NR", dw.nr),
    ] {
        if !w.is_finite() || w <= 0.0 {
            errors.push(format!("dependency weight {name} must be positive, got {w}"));
        }
    }
    if !(0.0..=1.0).contains(&p.sigma) {
        errors.push(format!("sigma must lie in [0, 1], got {}", p.sigma));
    }
    if !(p.pagerank_damping > 0.0 && p.pagerank_damping < 1.0) {
        errors.push(format!(
            "pagerank_damping must lie in (0, 1), got {}",
            p.pagerank_damping
        ));
    }
    if p.severity_weights.total() <= 0.0 && errors.is_empty() {
        errors.push("severity weights must not all be zero".to_string());
    }
    if !errors.is_empty() {
        return Err(Error::InvalidParams(errors));
    }

    let mut warnings = Vec::new();
    let el_sum = p.alpha + p.beta + p.gamma_exploit;
    if (el_sum - 1.0).abs() > 1e-9 {
        warnings.push(format!("likelihood weights sum to {}", fmt_sum(el_sum)));
    }
    let pl_sum = p.delta + p.theta;
    if (pl_sum - 1.0).abs() > 1e-9 {
        warnings.push(format!("propagation weights sum to {}", fmt_sum(pl_sum)));
    }
    let mix = p.w1 + p.w2;
    if (mix - 1.0).abs() > 1e-9 {
        warnings.push(format!("criticality weights sum to {}", fmt_sum(mix)));
    }
    Ok(warnings)
}

fn fmt_sum(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}

/// The whole analysed system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub hosts: Vec<Host>,
    pub assets: Vec<Asset>,
    /// Communication-graph nodes that are not assets (the Internet, gateways).
    #[serde(default)]
    pub waypoints: Vec<String>,
    #[serde(default)]
    pub entry_points: Vec<String>,
    #[serde(default)]
    pub communication_edges: Vec<CommunicationEdge>,
    #[serde(default)]
    pub cross_asset_edges: Vec<DependencyEdge>,
    #[serde(default)]
    pub params: RiskParams,
}

/// Location of one vulnerability: asset, component and position indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VulnKey {
    pub asset: usize,
    pub component: usize,
    pub vuln: usize,
}

impl SystemModel {
    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.assets.iter().position(|a| a.id == id)
    }

    pub fn host_index(&self, id: &str) -> Option<usize> {
        self.hosts.iter().position(|h| h.id == id)
    }

    pub fn asset(&self, id: &str) -> Option<&Asset> {
        self.assets.iter().find(|a| a.id == id)
    }

    /// Resolves an `asset/component` path.
    pub fn component_path(&self, path: &str) -> Option<(usize, usize)> {
        let (asset, comp) = path.split_once('/')?;
        let ai = self.asset_index(asset)?;
        let ci = self.assets[ai].component_index(comp)?;
        Some((ai, ci))
    }

    pub fn vulnerability(&self, key: VulnKey) -> &Vulnerability {
        &self.assets[key.asset].components[key.component].vulnerabilities[key.vuln]
    }

    /// Every vulnerability in declaration order.
    pub fn vuln_keys(&self) -> Vec<VulnKey> {
        let mut keys = Vec::new();
        for (ai, a) in self.assets.iter().enumerate() {
            keys.extend(asset_vuln_keys(ai, a));
        }
        keys
    }

    pub fn asset_vuln_keys(&self, asset: usize) -> Vec<VulnKey> {
        asset_vuln_keys(asset, &self.assets[asset]).collect()
    }

    pub fn vuln_count(&self) -> usize {
        self.assets.iter().map(Asset::vulnerability_count).sum()
    }

    /// Host owning each asset, by index.
    pub fn host_of_assets(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.assets.len()];
        for (hi, h) in self.hosts.iter().enumerate() {
            for a in &h.assets {
                if let Some(ai) = self.asset_index(a) {
                    owner[ai] = hi;
                }
            }
        }
        owner
    }

    /// Finds every vulnerability with the given CVE id on the given asset.
    pub fn find_cve(&self, asset: &str, cve: &str) -> Vec<VulnKey> {
        let Some(ai) = self.asset_index(asset) else {
            return Vec::new();
        };
        self.asset_vuln_keys(ai)
            .into_iter()
            .filter(|k| self.vulnerability(*k).cve_id == cve)
            .collect()
    }

    /// Checks every structural invariant; the first violation is returned.
    pub fn validate(&self) -> Result<()> {
        if self.assets.is_empty() {
            return Err(Error::validation("no assets", "assets"));
        }
        validate_params(&self.params)?;

        let mut asset_ids = HashSet::new();
        for a in &self.assets {
            if a.id.is_empty() || a.id.contains('/') {
                return Err(Error::validation(
                    "asset id must be nonempty and contain no '/'",
                    &a.id,
                ));
            }
            if !asset_ids.insert(a.id.as_str()) {
                return Err(Error::validation("duplicate asset id", &a.id));
            }
        }

        let mut host_ids = HashSet::new();
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for h in &self.hosts {
            if !host_ids.insert(h.id.as_str()) {
                return Err(Error::validation("duplicate host id", &h.id));
            }
            for a in &h.assets {
                if !asset_ids.contains(a.as_str()) {
                    return Err(Error::validation(
                        format!("host '{}' references unknown asset", h.id),
                        a,
                    ));
                }
                if let Some(prev) = owner.insert(a.as_str(), h.id.as_str()) {
                    return Err(Error::validation(
                        format!("asset belongs to hosts '{prev}' and '{}'", h.id),
                        a,
                    ));
                }
            }
        }

        for a in &self.assets {
            match owner.get(a.id.as_str()) {
                None => return Err(Error::validation("asset is not listed by any host", &a.id)),
                Some(h) if *h != a.host_ref => {
                    return Err(Error::validation(
                        format!("host_ref '{}' disagrees with owning host '{h}'", a.host_ref),
                        &a.id,
                    ))
                }
                _ => {}
            }
            if !(1..=6).contains(&a.business_criticality_level) {
                return Err(Error::validation(
                    format!(
                        "business_criticality_level must be in 1..=6, got {}",
                        a.business_criticality_level
                    ),
                    &a.id,
                ));
            }
            validate_asset(a)?;
        }

        let mut comm_nodes: HashSet<&str> = asset_ids.clone();
        for w in &self.waypoints {
            if asset_ids.contains(w.as_str()) {
                return Err(Error::validation("waypoint id collides with an asset id", w));
            }
            if !comm_nodes.insert(w.as_str()) {
                return Err(Error::validation("duplicate waypoint id", w));
            }
        }
        for e in &self.communication_edges {
            let id = format!("{} -- {}", e.a, e.b);
            for end in [&e.a, &e.b] {
                if !comm_nodes.contains(end.as_str()) {
                    return Err(Error::validation(
                        format!("communication edge {id} references unknown node"),
                        end,
                    ));
                }
            }
            if e.a == e.b {
                return Err(Error::validation("communication edge is a self-loop", id));
            }
            if !e.weight.is_finite() || e.weight <= 0.0 {
                return Err(Error::validation(
                    "communication edge weight must be positive",
                    id,
                ));
            }
        }
        for ep in &self.entry_points {
            if !comm_nodes.contains(ep.as_str()) {
                return Err(Error::validation("entry point references unknown node", ep));
            }
        }

        for e in &self.cross_asset_edges {
            let id = format!("{} -> {} ({})", e.from, e.to, e.kind);
            check_weight(e, &id)?;
            if e.kind == DependencyKind::NR {
                for end in [&e.from, &e.to] {
                    if !asset_ids.contains(end.as_str()) {
                        return Err(Error::validation(
                            format!("NR edge {id} references unknown asset"),
                            end,
                        ));
                    }
                }
                if e.from == e.to {
                    return Err(Error::validation("dependency edge is a self-loop", id));
                }
            } else {
                for end in [&e.from, &e.to] {
                    if self.component_path(end).is_none() {
                        return Err(Error::validation(
                            format!("edge {id} references unknown component"),
                            end,
                        ));
                    }
                }
                if e.from == e.to {
                    return Err(Error::validation("dependency edge is a self-loop", id));
                }
            }
        }
        Ok(())
    }
}

fn asset_vuln_keys(ai: usize, a: &Asset) -> impl Iterator<Item = VulnKey> + '_ {
    a.components.iter().enumerate().flat_map(move |(ci, c)| {
        (0..c.vulnerabilities.len()).map(move |vi| VulnKey {
            asset: ai,
            component: ci,
            vuln: vi,
        })
    })
}

fn check_weight(e: &DependencyEdge, id: &str) -> Result<()> {
    if let Some(w) = e.weight {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::validation("dependency edge weight must be positive", id));
        }
    }
    Ok(())
}

fn validate_asset(a: &Asset) -> Result<()> {
    let mut comp_ids = HashSet::new();
    for c in &a.components {
        let path = format!("{}/{}", a.id, c.id);
        if c.id.is_empty() || c.id.contains('/') {
            return Err(Error::validation(
                "component id must be nonempty and contain no '/'",
                path,
            ));
        }
        if !comp_ids.insert(c.id.as_str()) {
            return Err(Error::validation("duplicate component id within asset", path));
        }
        let mut cves = HashSet::new();
        for v in &c.vulnerabilities {
            let vid = format!("{path}:{}", v.cve_id);
            if !cves.insert(v.cve_id.as_str()) {
                return Err(Error::validation("duplicate CVE on component", vid));
            }
            validate_vulnerability(v, &vid)?;
        }
    }
    for e in &a.intra_edges {
        let id = format!("{}: {} -> {} ({})", a.id, e.from, e.to, e.kind);
        if e.kind == DependencyKind::NR {
            return Err(Error::validation("NR edges must connect assets", id));
        }
        check_weight(e, &id)?;
        for end in [&e.from, &e.to] {
            if !comp_ids.contains(end.as_str()) {
                return Err(Error::validation(
                    format!("edge {id} references unknown component"),
                    format!("{}/{}", a.id, end),
                ));
            }
        }
        if e.from == e.to {
            return Err(Error::validation("dependency edge is a self-loop", id));
        }
    }
    Ok(())
}

fn validate_vulnerability(v: &Vulnerability, id: &str) -> Result<()> {
    if v.cvss_version.starts_with('2') {
        return Err(Error::validation(
            "CVSS v2-only records are not supported; supply v3 scores",
            id,
        ));
    }
    for (name, value) in [
        ("cvss_base", v.cvss_base),
        ("likelihood_subscore", v.likelihood_subscore),
        ("impact_subscore", v.impact_subscore),
    ] {
        if !(0.0..=10.0).contains(&value) {
            return Err(Error::validation(
                format!("{name} must lie in [0, 10], got {value}"),
                id,
            ));
        }
    }
    if !(0.0..=1.0).contains(&v.epss) {
        return Err(Error::validation(
            format!("epss must lie in [0, 1], got {}", v.epss),
            id,
        ));
    }
    Ok(())
}

/// Loads, resolves includes, and validates an inventory file.
pub fn load_system_model(path: impl AsRef<Path>) -> Result<SystemModel> {
    let path = path.as_ref();
    let doc = load_document(path, &mut Vec::new())?;
    let model: SystemModel = serde_json::from_value(doc).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    model.validate()?;
    Ok(model)
}

/// Parses and validates an inventory held in memory (no includes).
pub fn parse_system_model(text: &str) -> Result<SystemModel> {
    let model: SystemModel = serde_json::from_str(text).map_err(|source| Error::Parse {
        path: PathBuf::from("<memory>"),
        source,
    })?;
    model.validate()?;
    Ok(model)
}

/// Serialises a model back to inventory JSON.
pub fn to_inventory_json(model: &SystemModel) -> String {
    serde_json::to_string_pretty(model).expect("model serializes")
}

fn load_document(path: &Path, stack: &mut Vec<PathBuf>) -> Result<Value> {
    let canonical = path.canonicalize().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if stack.contains(&canonical) {
        return Err(Error::validation("include cycle", path.display().to_string()));
    }
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let include = match doc.as_object_mut() {
        Some(obj) => obj.remove("include"),
        None => None,
    };
    let Some(include) = include else {
        return Ok(doc);
    };
    let Some(rel) = include.as_str() else {
        return Err(Error::validation(
            "include must be a path string",
            path.display().to_string(),
        ));
    };
    let base_path = path.parent().unwrap_or(Path::new(".")).join(rel);
    stack.push(canonical);
    let mut base = load_document(&base_path, stack)?;
    stack.pop();
    merge_values(&mut base, doc, true);
    Ok(base)
}

/// Layers `overlay` on `base`: objects merge per key, arrays append when
/// `append` is set (and are replaced otherwise), other values replace.
fn merge_values(base: &mut Value, overlay: Value, append: bool) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) => merge_values(existing, v, append),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (Value::Array(b), Value::Array(o)) if append => b.extend(o),
        (b, o) => *b = o,
    }
}

/// Counts of each element kind; handy for summaries.
pub fn summary(model: &SystemModel) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    m.insert("hosts", model.hosts.len());
    m.insert("assets", model.assets.len());
    m.insert(
        "components",
        model.assets.iter().map(|a| a.components.len()).sum(),
    );
    m.insert("vulnerabilities", model.vuln_count());
    m.insert("communication_edges", model.communication_edges.len());
    m.insert(
        "dependency_edges",
        model.cross_asset_edges.len() + model.assets.iter().map(|a| a.intra_edges.len()).sum::<usize>(),
    );
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vuln(cve: &str) -> Vulnerability {
        Vulnerability {
            cve_id: cve.into(),
            cvss_base: 7.5,
            likelihood_subscore: 3.9,
            impact_subscore: 3.6,
            epss: 0.5,
            exploit_exists: false,
            scope_change: false,
            ransomware: false,
            attack_vector: AttackVector::Network,
            cvss_version: "3.1".into(),
        }
    }

    fn tiny() -> SystemModel {
        SystemModel {
            name: String::new(),
            hosts: vec![Host {
                id: "h".into(),
                assets: vec!["a".into()],
            }],
            assets: vec![Asset {
                id: "a".into(),
                name: "A".into(),
                host_ref: "h".into(),
                ip: String::new(),
                mac: String::new(),
                subnet: String::new(),
                business_criticality_level: 3,
                components: vec![
                    Component {
                        id: "os".into(),
                        vendor: "v".into(),
                        product: "p".into(),
                        version: "1".into(),
                        part: ComponentPart::Os,
                        cpe: None,
                        vulnerabilities: vec![vuln("CVE-1")],
                    },
                    Component {
                        id: "app".into(),
                        vendor: "v".into(),
                        product: "q".into(),
                        version: "2".into(),
                        part: ComponentPart::Application,
                        cpe: None,
                        vulnerabilities: vec![],
                    },
                ],
                intra_edges: vec![DependencyEdge {
                    from: "app".into(),
                    to: "os".into(),
                    kind: DependencyKind::ER,
                    weight: None,
                }],
            }],
            waypoints: vec!["internet".into()],
            entry_points: vec!["internet".into()],
            communication_edges: vec![CommunicationEdge {
                a: "internet".into(),
                b: "a".into(),
                weight: 1.0,
            }],
            cross_asset_edges: vec![],
            params: RiskParams::default(),
        }
    }

    #[test]
    fn attack_vector_partition() {
        assert_eq!(AttackVector::Network.exposure(), Exposure::NetworkBased);
        assert_eq!(AttackVector::Adjacent.exposure(), Exposure::NetworkBased);
        assert_eq!(AttackVector::Local.exposure(), Exposure::HostBased);
        assert_eq!(AttackVector::Physical.exposure(), Exposure::HostBased);
    }

    #[test]
    fn severity_buckets_follow_cvss_scale() {
        assert_eq!(Severity::from_score(9.0), Severity::Critical);
        assert_eq!(Severity::from_score(8.9), Severity::High);
        assert_eq!(Severity::from_score(7.0), Severity::High);
        assert_eq!(Severity::from_score(6.9), Severity::Medium);
        assert_eq!(Severity::from_score(4.0), Severity::Medium);
        assert_eq!(Severity::from_score(3.9), Severity::Low);
        assert_eq!(Severity::from_score(0.0), Severity::Low);
    }

    #[test]
    fn default_params_have_no_warnings() {
        assert!(validate_params(&RiskParams::default()).unwrap().is_empty());
    }

    #[test]
    fn unbalanced_likelihood_weights_warn() {
        let p = RiskParams {
            alpha: 0.5,
            beta: 0.5,
            gamma_exploit: 0.5,
            ..RiskParams::default()
        };
        let w = validate_params(&p).unwrap();
        assert_eq!(w, vec!["likelihood weights sum to 1.5".to_string()]);
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let p = RiskParams {
            sigma: -0.1,
            ..RiskParams::default()
        };
        match validate_params(&p) {
            Err(Error::InvalidParams(v)) => assert!(v[0].contains("sigma")),
            other => panic!("expected invalid params, got {other:?}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let p = RiskParams {
            alpha: -1.0,
            theta: -2.0,
            sigma: 3.0,
            ..RiskParams::default()
        };
        let Err(Error::InvalidParams(v)) = validate_params(&p) else {
            panic!("expected error")
        };
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn tiny_model_is_valid() {
        tiny().validate().unwrap();
    }

    #[test]
    fn no_assets_is_rejected() {
        let mut m = tiny();
        m.assets.clear();
        m.hosts[0].assets.clear();
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("no assets"), "{err}");
    }

    #[test]
    fn dangling_edge_names_the_id() {
        let mut m = tiny();
        m.assets[0].intra_edges[0].to = "kernel".into();
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("a/kernel"), "{err}");
    }

    #[test]
    fn dangling_cross_asset_edge_names_the_id() {
        let mut m = tiny();
        m.cross_asset_edges.push(DependencyEdge {
            from: "a/app".into(),
            to: "b/db".into(),
            kind: DependencyKind::SR,
            weight: None,
        });
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("b/db"), "{err}");
    }

    #[test]
    fn business_level_out_of_range() {
        let mut m = tiny();
        m.assets[0].business_criticality_level = 7;
        assert!(m.validate().is_err());
    }

    #[test]
    fn epss_out_of_range() {
        let mut m = tiny();
        m.assets[0].components[0].vulnerabilities[0].epss = 1.5;
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("CVE-1"), "{err}");
    }

    #[test]
    fn cvss_v2_records_are_rejected() {
        let mut m = tiny();
        m.assets[0].components[0].vulnerabilities[0].cvss_version = "2.0".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn self_loop_communication_edge() {
        let mut m = tiny();
        m.communication_edges[0].b = "internet".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn asset_must_belong_to_one_host() {
        let mut m = tiny();
        m.hosts.push(Host {
            id: "h2".into(),
            assets: vec!["a".into()],
        });
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = tiny();
        let text = to_inventory_json(&m);
        let back = parse_system_model(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn partial_param_overrides() {
        let p = RiskParams::default()
            .with_overrides(&serde_json::json!({"alpha": 0.2, "severity_weights": {"low": 0.0}}))
            .unwrap();
        assert_eq!(p.alpha, 0.2);
        assert_eq!(p.severity_weights.low, 0.0);
        assert_eq!(p.severity_weights.high, 0.75);
    }

    #[test]
    fn param_override_replaces_arrays() {
        let table = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let p = RiskParams::default()
            .with_overrides(&serde_json::json!({ "business_criticality": table }))
            .unwrap();
        assert_eq!(p.business_score(6), 0.6);
    }

    #[test]
    fn merge_appends_arrays_and_merges_objects() {
        let mut base = serde_json::json!({"a": [1], "o": {"x": 1, "y": 2}, "s": 1});
        merge_values(
            &mut base,
            serde_json::json!({"a": [2], "o": {"y": 3}, "s": 5}),
            true,
        );
        assert_eq!(
            base,
            serde_json::json!({"a": [1, 2], "o": {"x": 1, "y": 3}, "s": 5})
        );
    }
}
