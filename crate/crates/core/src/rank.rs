//! Patch prioritisation by risk reduction, what-if analysis and rank
//! comparison utilities.
//!
//! Removing a vulnerability never changes a component's centrality or an
//! asset's criticality, so every candidate is evaluated against the tables
//! of a single [`RiskContext`].

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RiskParams, SystemModel, VulnKey};
use crate::risk::{exploit_likelihood, propagation_likelihood, Aggregates, RiskContext};

/// The aggregate a ranking minimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankScope {
    Component { asset: usize, component: usize },
    Asset(usize),
    Host(usize),
    System,
}

impl RankScope {
    /// Parses `system`, `host:<id>`, `asset:<id>` or `component:<asset>/<id>`.
    pub fn parse(model: &SystemModel, spec: &str) -> Result<RankScope> {
        let unknown = || Error::UnknownScope(spec.to_string());
        if spec == "system" {
            return Ok(RankScope::System);
        }
        let (kind, id) = spec.split_once(':').ok_or_else(unknown)?;
        match kind {
            "asset" => model.asset_index(id).map(RankScope::Asset).ok_or_else(unknown),
            "host" => model.host_index(id).map(RankScope::Host).ok_or_else(unknown),
            "component" => model
                .component_path(id)
                .map(|(asset, component)| RankScope::Component { asset, component })
                .ok_or_else(unknown),
            _ => Err(unknown()),
        }
    }

    pub fn kind(&self) -> ScopeKind {
        match self {
            RankScope::Component { .. } => ScopeKind::Component,
            RankScope::Asset(_) => ScopeKind::Asset,
            RankScope::Host(_) => ScopeKind::Host,
            RankScope::System => ScopeKind::System,
        }
    }

    fn contains(&self, ctx: &RiskContext, key: VulnKey) -> bool {
        match *self {
            RankScope::Component { asset, component } => key.asset == asset && key.component == component,
            RankScope::Asset(a) => key.asset == a,
            RankScope::Host(h) => {
                let id = &ctx.model.assets[key.asset].id;
                ctx.model.hosts[h].assets.iter().any(|x| x == id)
            }
            RankScope::System => true,
        }
    }

    fn label(&self, model: &SystemModel) -> String {
        match *self {
            RankScope::Component { asset, component } => format!(
                "component:{}/{}",
                model.assets[asset].id, model.assets[asset].components[component].id
            ),
            RankScope::Asset(a) => format!("asset:{}", model.assets[a].id),
            RankScope::Host(h) => format!("host:{}", model.hosts[h].id),
            RankScope::System => "system".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeKind {
    Component,
    Asset,
    Host,
    System,
}

impl fmt::Display for ScopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScopeKind::Component => "component",
            ScopeKind::Asset => "asset",
            ScopeKind::Host => "host",
            ScopeKind::System => "system",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchEntry {
    pub rank: usize,
    pub cve_id: String,
    pub asset: String,
    pub component: String,
    pub cvss_base: f64,
    pub likelihood_subscore: f64,
    pub epss: f64,
    pub exploit_exists: bool,
    pub scope_change: bool,
    pub ransomware: bool,
    pub risk_before: f64,
    pub risk_after: f64,
    pub reduction: f64,
    pub exploit_likelihood: f64,
    pub impact: f64,
    pub propagation_likelihood: f64,
    pub explanation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRanking {
    pub scope: ScopeKind,
    pub target: String,
    pub entries: Vec<PatchEntry>,
}

impl PatchRanking {
    /// Rank of the first entry matching `cve` (and `asset`, when given).
    pub fn rank_of(&self, cve: &str, asset: Option<&str>) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.cve_id == cve && asset.is_none_or(|a| e.asset == a))
            .map(|e| e.rank)
    }

    pub fn truncate(&mut self, n: usize) {
        self.entries.truncate(n);
    }
}

fn scope_value(ctx: &RiskContext, scope: RankScope, agg: &Aggregates, excluded: Option<usize>) -> f64 {
    match scope {
        RankScope::System => agg.system,
        RankScope::Host(h) => agg.hosts[h],
        RankScope::Asset(a) => agg.assets[a],
        RankScope::Component { asset, component } => {
            let mut s = 0.0;
            for i in ctx.asset_range(asset) {
                if ctx.keys[i].component == component && Some(i) != excluded {
                    s += ctx.local[i].total;
                }
            }
            s
        }
    }
}

/// Ranks every vulnerability in `scope` by how much removing it alone lowers
/// the scope's aggregate risk.
pub fn rank_patches(model: &SystemModel, p: &RiskParams, scope: RankScope) -> Result<PatchRanking> {
    let ctx = RiskContext::with_params(model, p.clone())?;
    Ok(rank_with_context(&ctx, scope))
}

pub fn rank_with_context(ctx: &RiskContext, scope: RankScope) -> PatchRanking {
    let model = ctx.model;
    let p = &ctx.params;
    let before = scope_value(ctx, scope, ctx.baseline(), None);
    let occurrences = ctx.network_occurrences();
    let candidates: Vec<usize> = (0..ctx.keys.len())
        .filter(|&i| scope.contains(ctx, ctx.keys[i]))
        .collect();

    let mut entries: Vec<PatchEntry> = candidates
        .par_iter()
        .map(|&i| {
            let key = ctx.keys[i];
            let after = match scope {
                RankScope::Component { .. } => scope_value(ctx, scope, ctx.baseline(), Some(i)),
                _ => scope_value(ctx, scope, &ctx.aggregate_without(i), Some(i)),
            };
            let v = model.vulnerability(key);
            let asset = &model.assets[key.asset];
            let local = &ctx.local[i];
            let mut explanation = vec![
                format!(
                    "asset-local risk {:.4} (direct {:.4} + indirect {:.4})",
                    local.total, local.direct, local.indirect
                ),
                format!(
                    "asset criticality {:.4}, host-internal risk {:.4}",
                    ctx.criticality[key.asset].score, ctx.host_totals[i]
                ),
            ];
            match ctx.network_units[i] {
                Some(u) => explanation.push(format!(
                    "network-based: {:.4} per path visit, counted {} time(s)",
                    u, occurrences[i]
                )),
                None => explanation.push("host-based: no network contribution".to_string()),
            }
            explanation.extend(local.explanation.iter().cloned());
            PatchEntry {
                rank: 0,
                cve_id: v.cve_id.clone(),
                asset: asset.id.clone(),
                component: asset.components[key.component].id.clone(),
                cvss_base: v.cvss_base,
                likelihood_subscore: v.likelihood_subscore,
                epss: v.epss,
                exploit_exists: v.exploit_exists,
                scope_change: v.scope_change,
                ransomware: v.ransomware,
                risk_before: before,
                risk_after: after,
                reduction: before - after,
                exploit_likelihood: exploit_likelihood(v, p),
                impact: v.impact_subscore,
                propagation_likelihood: propagation_likelihood(v, p),
                explanation,
            }
        })
        .collect();

    entries.sort_by(compare_entries);
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    PatchRanking {
        scope: scope.kind(),
        target: scope.label(model),
        entries,
    }
}

fn desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Reduction, then likelihood, then impact (all descending), then CVE id,
/// asset and component so that the order is total.
fn compare_entries(a: &PatchEntry, b: &PatchEntry) -> Ordering {
    desc(a.reduction, b.reduction)
        .then_with(|| desc(a.exploit_likelihood, b.exploit_likelihood))
        .then_with(|| desc(a.impact, b.impact))
        .then_with(|| a.cve_id.cmp(&b.cve_id))
        .then_with(|| a.asset.cmp(&b.asset))
        .then_with(|| a.component.cmp(&b.component))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDelta {
    pub id: String,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfReport {
    pub patched: Vec<(String, String)>,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
    pub network: LevelDelta,
    pub hosts: Vec<LevelDelta>,
    pub assets: Vec<LevelDelta>,
}

/// System risk before and after removing every `(asset, cve)` pair at once.
pub fn what_if(model: &SystemModel, p: &RiskParams, patches: &[(String, String)]) -> Result<WhatIfReport> {
    let ctx = RiskContext::with_params(model, p.clone())?;
    what_if_with_context(&ctx, patches)
}

pub fn what_if_with_context(ctx: &RiskContext, patches: &[(String, String)]) -> Result<WhatIfReport> {
    let mut removed = BTreeSet::new();
    for (asset, cve) in patches {
        let keys = ctx.model.find_cve(asset, cve);
        if keys.is_empty() {
            return Err(Error::UnknownPatch {
                asset: asset.clone(),
                cve: cve.clone(),
            });
        }
        for k in keys {
            removed.insert(ctx.flat_index(k).expect("key from model"));
        }
    }
    let before = ctx.baseline();
    let after = ctx.aggregate(|i| removed.contains(&i));
    let level = |id: &str, b: f64, a: f64| LevelDelta {
        id: id.to_string(),
        before: b,
        after: a,
        delta: b - a,
    };
    Ok(WhatIfReport {
        patched: patches.to_vec(),
        before: before.system,
        after: after.system,
        delta: before.system - after.system,
        network: level("network", before.network, after.network),
        hosts: ctx
            .model
            .hosts
            .iter()
            .enumerate()
            .map(|(i, h)| level(&h.id, before.hosts[i], after.hosts[i]))
            .collect(),
        assets: ctx
            .model
            .assets
            .iter()
            .enumerate()
            .map(|(i, a)| level(&a.id, before.assets[i], after.assets[i]))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEntry {
    pub rank: usize,
    pub cve_id: String,
    pub exploit_likelihood: f64,
    pub impact: f64,
    pub propagation_likelihood: f64,
}

/// Orders one component's vulnerabilities by likelihood times impact, with
/// propagation likelihood and then CVE id breaking ties.
pub fn component_factor_rank(
    model: &SystemModel,
    asset: usize,
    component: usize,
    p: &RiskParams,
) -> Vec<FactorEntry> {
    let comp = &model.assets[asset].components[component];
    let mut entries: Vec<FactorEntry> = comp
        .vulnerabilities
        .iter()
        .map(|v| FactorEntry {
            rank: 0,
            cve_id: v.cve_id.clone(),
            exploit_likelihood: exploit_likelihood(v, p),
            impact: v.impact_subscore,
            propagation_likelihood: propagation_likelihood(v, p),
        })
        .collect();
    entries.sort_by(|a, b| {
        desc(a.exploit_likelihood * a.impact, b.exploit_likelihood * b.impact)
            .then_with(|| desc(a.propagation_likelihood, b.propagation_likelihood))
            .then_with(|| a.cve_id.cmp(&b.cve_id))
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}

/// Kendall's tau-b between two rankings of the same items. Ties in either
/// ranking are neither concordant nor discordant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "rankings must have equal length");
    let n = a.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_a, mut ties_b) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 && db == 0.0 {
                continue;
            } else if da == 0.0 {
                ties_a += 1;
            } else if db == 0.0 {
                ties_b += 1;
            } else if (da > 0.0) == (db > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let denom = (((concordant + discordant + ties_a) * (concordant + discordant + ties_b)) as f64).sqrt();
    if denom == 0.0 {
        1.0
    } else {
        (concordant - discordant) as f64 / denom
    }
}
