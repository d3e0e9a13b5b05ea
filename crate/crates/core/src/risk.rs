//! Vulnerability, component, asset, host, network and system risk.
//!
//! [`RiskContext`] does the expensive, vulnerability-independent work once
//! (graphs, centralities, criticalities, attack paths) and tabulates each
//! vulnerability's contribution. Aggregates are then plain sums over those
//! tables in a fixed order, so recomputing with some vulnerabilities left
//! out reproduces exactly what a fresh run on the patched model yields.

use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    asset_centrality, asset_criticality, build_communication_graph, build_dependence_graph, centrality,
    AssetCriticality, CentralityScores, CommunicationGraph, DependenceGraph, GraphScope, WeightedPath,
};
use crate::model::{
    validate_params, Component, Exposure, RiskParams, Severity, SystemModel, VulnKey, Vulnerability,
};

/// Weighted blend of the normalised exploitability subscore, EPSS and the
/// exploit-exists indicator.
pub fn exploit_likelihood(v: &Vulnerability, p: &RiskParams) -> f64 {
    let exploit = if v.exploit_exists { 1.0 } else { 0.0 };
    p.alpha * (v.likelihood_subscore / 10.0) + p.beta * v.epss + p.gamma_exploit * exploit
}

/// Weighted blend of the scope-change and ransomware indicators.
pub fn propagation_likelihood(v: &Vulnerability, p: &RiskParams) -> f64 {
    let scope = if v.scope_change { 1.0 } else { 0.0 };
    let ransom = if v.ransomware { 1.0 } else { 0.0 };
    p.delta * scope + p.theta * ransom
}

pub fn direct_risk(v: &Vulnerability, component_centrality: f64, p: &RiskParams) -> f64 {
    exploit_likelihood(v, p) * v.impact_subscore * component_centrality
}

pub fn classify_vulnerability(v: &Vulnerability) -> Exposure {
    v.exposure()
}

/// A component reached while propagating an exploited vulnerability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationHit {
    pub component: String,
    /// Sum of edge weights along the first path that reached the component.
    pub path_weight: f64,
}

/// Indirect risk of `v` exploited at graph node `source`.
///
/// Zero unless the propagation likelihood reaches `sigma` and something
/// depends on `source`. Otherwise a breadth-first walk follows dependents
/// outward; every component reached contributes its cumulative path weight
/// times the impact subscore, and the sum is scaled by the propagation
/// likelihood. Each component counts once, at the weight of its first
/// discovery.
pub fn indirect_risk(
    v: &Vulnerability,
    source: usize,
    g: &DependenceGraph,
    p: &RiskParams,
) -> Result<(f64, Vec<PropagationHit>)> {
    if source >= g.node_count() {
        return Err(Error::UnknownComponent(format!("node #{source}")));
    }
    let pl = propagation_likelihood(v, p);
    if pl < p.sigma || g.in_degree(source) == 0 {
        return Ok((0.0, Vec::new()));
    }
    let mut seen = vec![false; g.node_count()];
    seen[source] = true;
    let mut queue = VecDeque::from([(source, 0.0)]);
    let mut sum = 0.0;
    let mut hits = Vec::new();
    while let Some((node, weight)) = queue.pop_front() {
        let mut next: Vec<(usize, f64)> = g.dependents(node).map(|e| (e.from, e.weight)).collect();
        next.sort_by_key(|&(n, _)| n);
        for (dep, w) in next {
            if seen[dep] {
                continue;
            }
            seen[dep] = true;
            let cumulative = weight + w;
            sum += cumulative * v.impact_subscore;
            hits.push(PropagationHit {
                component: g.label(dep).to_string(),
                path_weight: cumulative,
            });
            queue.push_back((dep, cumulative));
        }
    }
    Ok((pl * sum, hits))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnRiskBreakdown {
    pub cve_id: String,
    pub exploit_likelihood: f64,
    pub propagation_likelihood: f64,
    pub centrality: f64,
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
    pub propagation: Vec<PropagationHit>,
    pub explanation: Vec<String>,
}

/// Direct plus indirect risk of one vulnerability, scored on `g`.
pub fn vulnerability_risk(
    model: &SystemModel,
    key: VulnKey,
    g: &DependenceGraph,
    scores: &CentralityScores,
    p: &RiskParams,
) -> Result<VulnRiskBreakdown> {
    let v = model.vulnerability(key);
    let asset = &model.assets[key.asset];
    let comp = &asset.components[key.component];
    let node = g
        .component_node(key.asset, key.component)
        .ok_or_else(|| Error::UnknownComponent(format!("{}/{}", asset.id, comp.id)))?;
    let cent = scores.normalized[node];
    let el = exploit_likelihood(v, p);
    let pl = propagation_likelihood(v, p);
    let direct = el * v.impact_subscore * cent;
    let (indirect, propagation) = indirect_risk(v, node, g, p)?;
    let total = direct + indirect;

    let mut explanation = vec![
        format!(
            "EL = {}*({}/10) + {}*{} + {}*{} = {:.6}",
            p.alpha,
            v.likelihood_subscore,
            p.beta,
            v.epss,
            p.gamma_exploit,
            u8::from(v.exploit_exists),
            el
        ),
        format!("impact subscore {}", v.impact_subscore),
        format!("centrality of {}/{} = {:.4}", asset.id, comp.id, cent),
        format!(
            "PL = {}*{} + {}*{} = {}",
            p.delta,
            u8::from(v.scope_change),
            p.theta,
            u8::from(v.ransomware),
            pl
        ),
    ];
    if pl < p.sigma {
        explanation.push(format!("no propagation: PL below sigma {}", p.sigma));
    } else if g.in_degree(node) == 0 {
        explanation.push("no propagation: nothing depends on this component".to_string());
    } else {
        for h in &propagation {
            explanation.push(format!(
                "propagates to {} (path weight {})",
                h.component, h.path_weight
            ));
        }
    }
    Ok(VulnRiskBreakdown {
        cve_id: v.cve_id.clone(),
        exploit_likelihood: el,
        propagation_likelihood: pl,
        centrality: cent,
        direct,
        indirect,
        total,
        propagation,
        explanation,
    })
}

/// Severity-weighted sum of a component's CVSS base scores, divided by the
/// sum of the severity weights.
pub fn cvs(component: &Component, p: &RiskParams) -> f64 {
    let mut per_level = [0.0f64; 4];
    for v in &component.vulnerabilities {
        let idx = Severity::ALL
            .iter()
            .position(|s| *s == v.severity())
            .expect("severity bucket");
        per_level[idx] += v.cvss_base;
    }
    let weighted: f64 = Severity::ALL
        .iter()
        .zip(per_level)
        .map(|(s, sum)| p.severity_weights.weight(*s) * sum)
        .sum();
    let total = p.severity_weights.total();
    if total == 0.0 {
        0.0
    } else {
        weighted / total
    }
}

pub fn component_risk(component: &Component, component_centrality: f64, p: &RiskParams) -> f64 {
    cvs(component, p) * component_centrality
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackPath {
    pub source: String,
    pub target: String,
    pub nodes: Vec<String>,
    pub total_weight: f64,
}

/// Which sources to search attack paths from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathSources {
    /// The model's entry points only; these paths feed network risk.
    EntryPoints,
    /// Entry points plus every other asset.
    AllNodes,
}

/// Dijkstra shortest paths to every critical asset. Unreachable targets are
/// skipped and reported in the returned notices.
pub fn shortest_attack_paths(
    cg: &CommunicationGraph,
    model: &SystemModel,
    critical: &[usize],
    sources: PathSources,
    p: &RiskParams,
) -> Result<(Vec<AttackPath>, Vec<String>)> {
    if critical.is_empty() {
        return Err(Error::NoCriticalAssets(p.criticality_threshold));
    }
    let mut source_names: Vec<&str> = model.entry_points.iter().map(String::as_str).collect();
    if sources == PathSources::AllNodes {
        for a in &model.assets {
            if !source_names.contains(&a.id.as_str()) {
                source_names.push(&a.id);
            }
        }
    }
    let mut paths = Vec::new();
    let mut notices = Vec::new();
    let mut cache: HashMap<usize, Vec<Option<WeightedPath>>> = HashMap::new();
    for &target in critical {
        let target_id = &model.assets[target].id;
        let t = cg.node(target_id).expect("assets are communication nodes");
        for &src in &source_names {
            if sources == PathSources::AllNodes && src == target_id {
                continue;
            }
            let s = cg.node(src).expect("validated entry point");
            let table = cache.entry(s).or_insert_with(|| cg.shortest_paths_from(s));
            match &table[t] {
                Some((dist, nodes)) => paths.push(AttackPath {
                    source: src.to_string(),
                    target: target_id.clone(),
                    nodes: nodes.iter().map(|&n| cg.name(n).to_string()).collect(),
                    total_weight: *dist,
                }),
                None => notices.push(format!("{target_id} is unreachable from {src}")),
            }
        }
    }
    Ok((paths, notices))
}

/// Per-level totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    /// Asset risk (asset-local propagation), by asset index.
    pub assets: Vec<f64>,
    /// Criticality-weighted host risk, by host index.
    pub hosts: Vec<f64>,
    /// Network risk contributed by each retained attack path.
    pub paths: Vec<f64>,
    pub network: f64,
    pub host_total: f64,
    pub system: f64,
}

/// Everything about a model that does not change when vulnerabilities are
/// patched, plus per-vulnerability contribution tables.
pub struct RiskContext<'m> {
    pub model: &'m SystemModel,
    pub params: RiskParams,
    pub warnings: Vec<String>,
    pub local_graphs: Vec<DependenceGraph>,
    pub local_scores: Vec<CentralityScores>,
    pub host_graphs: Vec<DependenceGraph>,
    pub host_scores: Vec<CentralityScores>,
    pub system_graph: DependenceGraph,
    pub system_scores: CentralityScores,
    pub asset_centrality: Vec<f64>,
    pub criticality: Vec<AssetCriticality>,
    pub critical_assets: Vec<usize>,
    pub communication: CommunicationGraph,
    pub attack_paths: Vec<AttackPath>,
    pub notices: Vec<String>,
    /// Every vulnerability in declaration order.
    pub keys: Vec<VulnKey>,
    index: HashMap<VulnKey, usize>,
    /// First flat index of each asset's vulnerabilities.
    asset_start: Vec<usize>,
    pub local: Vec<VulnRiskBreakdown>,
    /// Total risk with propagation restricted to the host-internal graph.
    pub host_totals: Vec<f64>,
    /// EL x impact x system-wide centrality; `None` for host-based entries.
    pub network_units: Vec<Option<f64>>,
    /// Assets of each retained path, in order (waypoints dropped).
    path_assets: Vec<Vec<usize>>,
    host_of_asset: Vec<usize>,
    on_path: Vec<bool>,
    baseline: Aggregates,
}

impl<'m> RiskContext<'m> {
    /// Uses the parameters stored in the model.
    pub fn new(model: &'m SystemModel) -> Result<Self> {
        Self::with_params(model, model.params.clone())
    }

    pub fn with_params(model: &'m SystemModel, params: RiskParams) -> Result<Self> {
        let warnings = validate_params(&params)?;
        let p = &params;

        let locals: Vec<(DependenceGraph, CentralityScores)> = (0..model.assets.len())
            .into_par_iter()
            .map(|ai| {
                let g = build_dependence_graph(model, GraphScope::AssetLocal(ai), p)?;
                let s = centrality(&g, p.pagerank_damping)
                    .map_err(|_| Error::NoComponents(model.assets[ai].id.clone()))?;
                Ok((g, s))
            })
            .collect::<Result<_>>()?;
        let (local_graphs, local_scores): (Vec<_>, Vec<_>) = locals.into_iter().unzip();

        let hosts: Vec<(DependenceGraph, CentralityScores)> = (0..model.hosts.len())
            .into_par_iter()
            .map(|hi| {
                let g = build_dependence_graph(model, GraphScope::HostInternal(hi), p)?;
                let s = centrality(&g, p.pagerank_damping)
                    .map_err(|_| Error::NoComponents(model.hosts[hi].id.clone()))?;
                Ok((g, s))
            })
            .collect::<Result<_>>()?;
        let (host_graphs, host_scores): (Vec<_>, Vec<_>) = hosts.into_iter().unzip();

        let system_graph = build_dependence_graph(model, GraphScope::SystemWide, p)?;
        let system_scores = centrality(&system_graph, p.pagerank_damping)?;

        let asset_cent: Vec<f64> = (0..model.assets.len())
            .map(|ai| asset_centrality(model, ai, &system_graph, &system_scores))
            .collect::<Result<_>>()?;
        let criticality: Vec<AssetCriticality> = model
            .assets
            .iter()
            .zip(&asset_cent)
            .map(|(a, &c)| asset_criticality(c, a.business_criticality_level, p))
            .collect();
        let critical_assets: Vec<usize> = criticality
            .iter()
            .enumerate()
            .filter(|(_, c)| c.score > p.criticality_threshold)
            .map(|(i, _)| i)
            .collect();

        let communication = build_communication_graph(model);
        let mut notices = Vec::new();
        let attack_paths = if model.entry_points.is_empty() {
            notices.push("no entry points declared; network risk is zero".to_string());
            Vec::new()
        } else {
            let (paths, n) = shortest_attack_paths(
                &communication,
                model,
                &critical_assets,
                PathSources::EntryPoints,
                p,
            )?;
            notices.extend(n);
            paths
        };

        let keys = model.vuln_keys();
        let index: HashMap<VulnKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut asset_start = Vec::with_capacity(model.assets.len() + 1);
        let mut acc = 0;
        for a in &model.assets {
            asset_start.push(acc);
            acc += a.vulnerability_count();
        }
        asset_start.push(acc);

        let host_of_asset = model.host_of_assets();

        let rows: Vec<(VulnRiskBreakdown, f64, Option<f64>)> = keys
            .par_iter()
            .map(|&k| {
                let local = vulnerability_risk(model, k, &local_graphs[k.asset], &local_scores[k.asset], p)?;
                let h = host_of_asset[k.asset];
                let host_total = if host_graphs[h].node_count() == local_graphs[k.asset].node_count() {
                    // The host holds only this asset, so both graphs coincide.
                    local.total
                } else {
                    vulnerability_risk(model, k, &host_graphs[h], &host_scores[h], p)?.total
                };
                let v = model.vulnerability(k);
                let unit = match v.exposure() {
                    Exposure::NetworkBased => {
                        let node = system_graph
                            .component_node(k.asset, k.component)
                            .expect("system graph holds every component");
                        Some(exploit_likelihood(v, p) * v.impact_subscore * system_scores.normalized[node])
                    }
                    Exposure::HostBased => None,
                };
                Ok((local, host_total, unit))
            })
            .collect::<Result<_>>()?;
        let mut local = Vec::with_capacity(rows.len());
        let mut host_totals = Vec::with_capacity(rows.len());
        let mut network_units = Vec::with_capacity(rows.len());
        for (l, h, u) in rows {
            local.push(l);
            host_totals.push(h);
            network_units.push(u);
        }

        let path_assets: Vec<Vec<usize>> = attack_paths
            .iter()
            .map(|path| path.nodes.iter().filter_map(|n| model.asset_index(n)).collect())
            .collect();
        let mut on_path = vec![false; model.assets.len()];
        for pa in &path_assets {
            for &a in pa {
                on_path[a] = true;
            }
        }

        let mut ctx = RiskContext {
            model,
            params,
            warnings,
            local_graphs,
            local_scores,
            host_graphs,
            host_scores,
            system_graph,
            system_scores,
            asset_centrality: asset_cent,
            criticality,
            critical_assets,
            communication,
            attack_paths,
            notices,
            keys,
            index,
            asset_start,
            local,
            host_totals,
            network_units,
            path_assets,
            host_of_asset,
            on_path,
            baseline: Aggregates {
                assets: Vec::new(),
                hosts: Vec::new(),
                paths: Vec::new(),
                network: 0.0,
                host_total: 0.0,
                system: 0.0,
            },
        };
        ctx.baseline = ctx.aggregate(|_| false);
        Ok(ctx)
    }

    pub fn flat_index(&self, key: VulnKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn baseline(&self) -> &Aggregates {
        &self.baseline
    }

    pub fn asset_range(&self, asset: usize) -> std::ops::Range<usize> {
        self.asset_start[asset]..self.asset_start[asset + 1]
    }

    fn asset_local_sum(&self, asset: usize, excluded: &impl Fn(usize) -> bool) -> f64 {
        let mut s = 0.0;
        for i in self.asset_range(asset) {
            if !excluded(i) {
                s += self.local[i].total;
            }
        }
        s
    }

    fn host_sum(&self, host: usize, excluded: &impl Fn(usize) -> bool) -> f64 {
        let mut s = 0.0;
        for id in &self.model.hosts[host].assets {
            let Some(a) = self.model.asset_index(id) else {
                continue;
            };
            let mut inner = 0.0;
            for i in self.asset_range(a) {
                if !excluded(i) {
                    inner += self.host_totals[i];
                }
            }
            s += self.criticality[a].score * inner;
        }
        s
    }

    fn path_sums(&self, excluded: &impl Fn(usize) -> bool) -> Vec<f64> {
        let mut counted = vec![false; self.model.assets.len()];
        self.path_assets
            .iter()
            .map(|assets| {
                let mut s = 0.0;
                for &a in assets {
                    if self.params.dedup_paths {
                        if counted[a] {
                            continue;
                        }
                        counted[a] = true;
                    }
                    for i in self.asset_range(a) {
                        if excluded(i) {
                            continue;
                        }
                        if let Some(u) = self.network_units[i] {
                            s += u;
                        }
                    }
                }
                s
            })
            .collect()
    }

    fn finish(&self, assets: Vec<f64>, hosts: Vec<f64>, paths: Vec<f64>) -> Aggregates {
        let network: f64 = paths.iter().fold(0.0, |acc, x| acc + x);
        let host_total: f64 = hosts.iter().fold(0.0, |acc, x| acc + x);
        Aggregates {
            assets,
            hosts,
            paths,
            network,
            host_total,
            system: network + host_total,
        }
    }

    /// Recomputes every aggregate, skipping vulnerabilities (by flat index)
    /// for which `excluded` is true.
    pub fn aggregate(&self, excluded: impl Fn(usize) -> bool) -> Aggregates {
        let assets = (0..self.model.assets.len())
            .map(|a| self.asset_local_sum(a, &excluded))
            .collect();
        let hosts = (0..self.model.hosts.len())
            .map(|h| self.host_sum(h, &excluded))
            .collect();
        let paths = self.path_sums(&excluded);
        self.finish(assets, hosts, paths)
    }

    /// Same result as `aggregate(|i| i == flat)`, reusing the baseline for
    /// the parts a single vulnerability cannot touch.
    pub fn aggregate_without(&self, flat: usize) -> Aggregates {
        let excluded = |i: usize| i == flat;
        let asset = self.keys[flat].asset;
        let host = self.host_of_asset[asset];
        let mut assets = self.baseline.assets.clone();
        assets[asset] = self.asset_local_sum(asset, &excluded);
        let mut hosts = self.baseline.hosts.clone();
        hosts[host] = self.host_sum(host, &excluded);
        let paths = if self.on_path[asset] && self.network_units[flat].is_some() {
            self.path_sums(&excluded)
        } else {
            self.baseline.paths.clone()
        };
        self.finish(assets, hosts, paths)
    }

    /// How many times each vulnerability is counted in network risk.
    pub fn network_occurrences(&self) -> Vec<usize> {
        let mut count = vec![0usize; self.keys.len()];
        let mut counted = vec![false; self.model.assets.len()];
        for assets in &self.path_assets {
            for &a in assets {
                if self.params.dedup_paths {
                    if counted[a] {
                        continue;
                    }
                    counted[a] = true;
                }
                for i in self.asset_range(a) {
                    if self.network_units[i].is_some() {
                        count[i] += 1;
                    }
                }
            }
        }
        count
    }

    /// Assembles the full report.
    pub fn report(&self) -> RiskReport {
        let m = self.model;
        let agg = &self.baseline;
        let occurrences = self.network_occurrences();
        let vulnerabilities = self
            .keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let a = &m.assets[k.asset];
                VulnReport {
                    asset: a.id.clone(),
                    component: a.components[k.component].id.clone(),
                    exposure: m.vulnerability(*k).exposure(),
                    breakdown: self.local[i].clone(),
                    host_total: self.host_totals[i],
                    network_unit: self.network_units[i],
                    network_occurrences: occurrences[i],
                }
            })
            .collect();
        let mut components = Vec::new();
        for (ai, a) in m.assets.iter().enumerate() {
            for (ci, c) in a.components.iter().enumerate() {
                let node = self.local_graphs[ai]
                    .component_node(ai, ci)
                    .expect("local graph holds the asset's components");
                let cent = self.local_scores[ai].normalized[node];
                let cvs_value = cvs(c, &self.params);
                components.push(ComponentReport {
                    asset: a.id.clone(),
                    component: c.id.clone(),
                    cvs: cvs_value,
                    centrality: cent,
                    risk: cvs_value * cent,
                });
            }
        }
        let assets = m
            .assets
            .iter()
            .enumerate()
            .map(|(ai, a)| AssetReport {
                asset: a.id.clone(),
                host: a.host_ref.clone(),
                risk: agg.assets[ai],
                centrality: self.asset_centrality[ai],
                criticality: self.criticality[ai].score,
                criticality_level: self.criticality[ai].level,
                critical: self.critical_assets.contains(&ai),
            })
            .collect();
        let hosts = m
            .hosts
            .iter()
            .zip(&agg.hosts)
            .map(|(h, &r)| HostReport {
                host: h.id.clone(),
                risk: r,
            })
            .collect();
        let attack_paths = self
            .attack_paths
            .iter()
            .zip(&agg.paths)
            .map(|(p, &r)| ScoredPath {
                path: p.clone(),
                risk: r,
            })
            .collect();
        RiskReport {
            model: m.name.clone(),
            params: self.params.clone(),
            vulnerabilities,
            components,
            assets,
            hosts,
            attack_paths,
            network_risk: agg.network,
            host_risk: agg.host_total,
            system_risk: agg.system,
            warnings: self.warnings.clone(),
            notices: self.notices.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnReport {
    pub asset: String,
    pub component: String,
    pub exposure: Exposure,
    /// Scored on the asset-local dependence graph.
    pub breakdown: VulnRiskBreakdown,
    /// Total with propagation restricted to the host-internal graph.
    pub host_total: f64,
    pub network_unit: Option<f64>,
    pub network_occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub asset: String,
    pub component: String,
    pub cvs: f64,
    pub centrality: f64,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetReport {
    pub asset: String,
    pub host: String,
    pub risk: f64,
    pub centrality: f64,
    pub criticality: f64,
    pub criticality_level: u32,
    pub critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostReport {
    pub host: String,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPath {
    #[serde(flatten)]
    pub path: AttackPath,
    /// Network risk summed along this path.
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub model: String,
    pub params: RiskParams,
    pub vulnerabilities: Vec<VulnReport>,
    pub components: Vec<ComponentReport>,
    pub assets: Vec<AssetReport>,
    pub hosts: Vec<HostReport>,
    pub attack_paths: Vec<ScoredPath>,
    pub network_risk: f64,
    pub host_risk: f64,
    pub system_risk: f64,
    pub warnings: Vec<String>,
    pub notices: Vec<String>,
}

/// Asset risk with propagation inside the asset.
pub fn asset_risk(model: &SystemModel, asset: usize, p: &RiskParams) -> Result<f64> {
    let g = build_dependence_graph(model, GraphScope::AssetLocal(asset), p)?;
    let s = centrality(&g, p.pagerank_damping)
        .map_err(|_| Error::NoComponents(model.assets[asset].id.clone()))?;
    let mut sum = 0.0;
    for k in model.asset_vuln_keys(asset) {
        sum += vulnerability_risk(model, k, &g, &s, p)?.total;
    }
    Ok(sum)
}

/// Criticality-weighted risk of one host.
pub fn host_risk(model: &SystemModel, host: usize, p: &RiskParams) -> Result<f64> {
    let ctx = RiskContext::with_params(model, p.clone())?;
    Ok(ctx.baseline().hosts[host])
}

/// Network risk summed over the entry-point attack paths.
pub fn network_risk(model: &SystemModel, p: &RiskParams) -> Result<f64> {
    if model.entry_points.is_empty() {
        return Err(Error::NoEntryPoints);
    }
    let ctx = RiskContext::with_params(model, p.clone())?;
    Ok(ctx.baseline().network)
}

/// Full multi-level report with the model's own parameters.
pub fn system_risk(model: &SystemModel) -> Result<RiskReport> {
    Ok(RiskContext::new(model)?.report())
}

pub fn system_risk_with(model: &SystemModel, p: &RiskParams) -> Result<RiskReport> {
    Ok(RiskContext::with_params(model, p.clone())?.report())
}

/// Re-derives every aggregate in a report from its parts and lists each
/// identity that does not hold exactly.
pub fn audit(report: &RiskReport) -> Vec<String> {
    let mut problems = Vec::new();
    for v in &report.vulnerabilities {
        let b = &v.breakdown;
        if b.total != b.direct + b.indirect {
            problems.push(format!(
                "{}:{}: total {} != direct {} + indirect {}",
                v.asset, b.cve_id, b.total, b.direct, b.indirect
            ));
        }
        if b.total < 0.0 || b.direct < 0.0 || b.indirect < 0.0 {
            problems.push(format!("{}:{}: negative score", v.asset, b.cve_id));
        }
    }
    let mut by_asset: HashMap<&str, (f64, f64)> = HashMap::new();
    for v in &report.vulnerabilities {
        let e = by_asset.entry(v.asset.as_str()).or_insert((0.0, 0.0));
        e.0 += v.breakdown.total;
        e.1 += v.host_total;
    }
    let mut crit: HashMap<&str, f64> = HashMap::new();
    for a in &report.assets {
        let (local, _) = by_asset.get(a.asset.as_str()).copied().unwrap_or((0.0, 0.0));
        if a.risk != local {
            problems.push(format!("asset {}: risk {} != sum {}", a.asset, a.risk, local));
        }
        crit.insert(a.asset.as_str(), a.criticality);
    }
    let mut host_sum: HashMap<&str, f64> = HashMap::new();
    for a in &report.assets {
        let (_, host_local) = by_asset.get(a.asset.as_str()).copied().unwrap_or((0.0, 0.0));
        *host_sum.entry(a.host.as_str()).or_insert(0.0) += a.criticality * host_local;
    }
    let mut hosts_total = 0.0;
    for h in &report.hosts {
        let expected = host_sum.get(h.host.as_str()).copied().unwrap_or(0.0);
        if h.risk != expected {
            problems.push(format!("host {}: risk {} != {}", h.host, h.risk, expected));
        }
        hosts_total += h.risk;
    }
    if report.host_risk != hosts_total {
        problems.push(format!(
            "host risk {} != sum of hosts {}",
            report.host_risk, hosts_total
        ));
    }
    let paths_total = report.attack_paths.iter().fold(0.0, |acc, p| acc + p.risk);
    if report.network_risk != paths_total {
        problems.push(format!(
            "network risk {} != sum of paths {}",
            report.network_risk, paths_total
        ));
    }
    if report.system_risk != report.network_risk + report.host_risk {
        problems.push(format!(
            "system risk {} != network {} + hosts {}",
            report.system_risk, report.network_risk, report.host_risk
        ));
    }
    for p in &report.attack_paths {
        let mut seen = HashSet::new();
        for n in &p.path.nodes {
            if !seen.insert(n) {
                problems.push(format!("path to {} revisits {}", p.path.target, n));
            }
        }
    }
    problems
}
