//! Rendering of risk reports, patch rankings and what-if results as plain
//! tables, CSV or JSON.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rank::{PatchRanking, WhatIfReport};
use crate::risk::RiskReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Structured,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "structured" | "json" => Ok(OutputFormat::Structured),
            other => Err(Error::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions, so identical input always gives identical bytes.
pub fn to_structured<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialise");
    s.push('\n');
    s
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn csv_finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

const RANK_HEADER: [&str; 16] = [
    "asset",
    "component",
    "cve",
    "cvss_v3_base",
    "likelihood_subscore",
    "impact_subscore",
    "epss",
    "exploit_exists",
    "scope_change",
    "ransomware_utilized",
    "patch_rank",
    "exploit_likelihood",
    "propagation_likelihood",
    "risk_before",
    "risk_after",
    "reduction",
];

pub fn ranking_csv(r: &PatchRanking) -> String {
    let mut w = csv_writer();
    w.write_record(RANK_HEADER).expect("csv write");
    for e in &r.entries {
        w.write_record([
            e.asset.clone(),
            e.component.clone(),
            e.cve_id.clone(),
            e.cvss_base.to_string(),
            e.likelihood_subscore.to_string(),
            e.impact.to_string(),
            e.epss.to_string(),
            flag(e.exploit_exists).to_string(),
            if e.scope_change { "True" } else { "False" }.to_string(),
            flag(e.ransomware).to_string(),
            e.rank.to_string(),
            format!("{:.6}", e.exploit_likelihood),
            e.propagation_likelihood.to_string(),
            format!("{:.6}", e.risk_before),
            format!("{:.6}", e.risk_after),
            format!("{:.6}", e.reduction),
        ])
        .expect("csv write");
    }
    csv_finish(w)
}

pub fn ranking_table(r: &PatchRanking) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Patch ranking ({})", r.target);
    let _ = writeln!(
        out,
        "{:>4}  {:<16} {:<18} {:<16} {:>5} {:>5} {:>5} {:>8} {:>3} {:>5} {:>3} {:>10}",
        "rank", "asset", "component", "cve", "base", "lik", "imp", "epss", "exp", "scope", "ran", "reduction"
    );
    for e in &r.entries {
        let _ = writeln!(
            out,
            "{:>4}  {:<16} {:<18} {:<16} {:>5.1} {:>5.1} {:>5.1} {:>8.5} {:>3} {:>5} {:>3} {:>10.4}",
            e.rank,
            e.asset,
            e.component,
            e.cve_id,
            e.cvss_base,
            e.likelihood_subscore,
            e.impact,
            e.epss,
            flag(e.exploit_exists),
            if e.scope_change { "True" } else { "False" },
            flag(e.ransomware),
            e.reduction
        );
    }
    out
}

pub fn render_ranking(r: &PatchRanking, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => ranking_table(r),
        OutputFormat::Csv => ranking_csv(r),
        OutputFormat::Structured => to_structured(r),
    }
}

/// One explanation block per ranked CVE.
pub fn ranking_explanations(r: &PatchRanking) -> String {
    let mut out = String::new();
    for e in &r.entries {
        let _ = writeln!(
            out,
            "#{} {} on {}/{}: reduction {:.4} ({:.4} -> {:.4})",
            e.rank, e.cve_id, e.asset, e.component, e.reduction, e.risk_before, e.risk_after
        );
        for line in &e.explanation {
            let _ = writeln!(out, "    {line}");
        }
    }
    out
}

pub fn risk_table(r: &RiskReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "System: {}", r.model);
    let _ = writeln!(out, "  system risk   {:.4}", r.system_risk);
    let _ = writeln!(out, "  network risk  {:.4}", r.network_risk);
    let _ = writeln!(out, "  host risk     {:.4}", r.host_risk);
    let _ = writeln!(out, "\nHosts");
    for h in &r.hosts {
        let _ = writeln!(out, "  {:<24} {:>10.4}", h.host, h.risk);
    }
    let _ = writeln!(out, "\nAssets");
    let _ = writeln!(
        out,
        "  {:<24} {:>10} {:>10} {:>11} {:>5} {:>8}",
        "asset", "risk", "centrality", "criticality", "level", "critical"
    );
    for a in &r.assets {
        let _ = writeln!(
            out,
            "  {:<24} {:>10.4} {:>10.4} {:>11.4} {:>5} {:>8}",
            a.asset,
            a.risk,
            a.centrality,
            a.criticality,
            a.criticality_level,
            if a.critical { "yes" } else { "no" }
        );
    }
    let _ = writeln!(out, "\nComponents");
    for c in &r.components {
        let _ = writeln!(
            out,
            "  {:<40} cvs {:>7.4}  centrality {:>6.4}  risk {:>7.4}",
            format!("{}/{}", c.asset, c.component),
            c.cvs,
            c.centrality,
            c.risk
        );
    }
    let _ = writeln!(out, "\nVulnerabilities");
    let _ = writeln!(
        out,
        "  {:<32} {:<16} {:>8} {:>8} {:>8} {:>8}",
        "component", "cve", "EL", "direct", "indirect", "total"
    );
    for v in &r.vulnerabilities {
        let b = &v.breakdown;
        let _ = writeln!(
            out,
            "  {:<32} {:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            format!("{}/{}", v.asset, v.component),
            b.cve_id,
            b.exploit_likelihood,
            b.direct,
            b.indirect,
            b.total
        );
    }
    if !r.attack_paths.is_empty() {
        let _ = writeln!(out, "\nAttack paths");
        for p in &r.attack_paths {
            let _ = writeln!(
                out,
                "  {} (weight {}, risk {:.4})",
                p.path.nodes.join(" -> "),
                p.path.total_weight,
                p.risk
            );
        }
    }
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    for n in &r.notices {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

/// One row per vulnerability with its asset-level context.
pub fn risk_csv(r: &RiskReport) -> String {
    let mut w = csv_writer();
    w.write_record([
        "asset",
        "component",
        "cve",
        "exposure",
        "exploit_likelihood",
        "propagation_likelihood",
        "centrality",
        "direct",
        "indirect",
        "total",
        "host_total",
        "network_occurrences",
    ])
    .expect("csv write");
    for v in &r.vulnerabilities {
        let b = &v.breakdown;
        w.write_record([
            v.asset.clone(),
            v.component.clone(),
            b.cve_id.clone(),
            v.exposure.to_string(),
            format!("{:.6}", b.exploit_likelihood),
            b.propagation_likelihood.to_string(),
            format!("{:.6}", b.centrality),
            format!("{:.6}", b.direct),
            format!("{:.6}", b.indirect),
            format!("{:.6}", b.total),
            format!("{:.6}", v.host_total),
            v.network_occurrences.to_string(),
        ])
        .expect("csv write");
    }
    csv_finish(w)
}

pub fn render_risk(r: &RiskReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => risk_table(r),
        OutputFormat::Csv => risk_csv(r),
        OutputFormat::Structured => to_structured(r),
    }
}

pub fn whatif_table(w: &WhatIfReport) -> String {
    let mut out = String::new();
    let patched: Vec<String> = w.patched.iter().map(|(a, c)| format!("{a}:{c}")).collect();
    let _ = writeln!(
        out,
        "Patched: {}",
        if patched.is_empty() {
            "(none)".to_string()
        } else {
            patched.join(", ")
        }
    );
    let _ = writeln!(
        out,
        "{:<24} {:>10} {:>10} {:>10}",
        "level", "before", "after", "delta"
    );
    let _ = writeln!(
        out,
        "{:<24} {:>10.4} {:>10.4} {:>10.4}",
        "system", w.before, w.after, w.delta
    );
    let n = &w.network;
    let _ = writeln!(
        out,
        "{:<24} {:>10.4} {:>10.4} {:>10.4}",
        "network", n.before, n.after, n.delta
    );
    for h in &w.hosts {
        let _ = writeln!(
            out,
            "{:<24} {:>10.4} {:>10.4} {:>10.4}",
            format!("host:{}", h.id),
            h.before,
            h.after,
            h.delta
        );
    }
    for a in &w.assets {
        let _ = writeln!(
            out,
            "{:<24} {:>10.4} {:>10.4} {:>10.4}",
            format!("asset:{}", a.id),
            a.before,
            a.after,
            a.delta
        );
    }
    out
}

pub fn whatif_csv(w: &WhatIfReport) -> String {
    let mut wr = csv_writer();
    wr.write_record(["level", "before", "after", "delta"])
        .expect("csv write");
    let mut row = |level: String, b: f64, a: f64, d: f64| {
        wr.write_record([level, format!("{b:.6}"), format!("{a:.6}"), format!("{d:.6}")])
            .expect("csv write");
    };
    row("system".into(), w.before, w.after, w.delta);
    row(
        "network".into(),
        w.network.before,
        w.network.after,
        w.network.delta,
    );
    for h in &w.hosts {
        row(format!("host:{}", h.id), h.before, h.after, h.delta);
    }
    for a in &w.assets {
        row(format!("asset:{}", a.id), a.before, a.after, a.delta);
    }
    csv_finish(wr)
}

pub fn render_whatif(w: &WhatIfReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Table => whatif_table(w),
        OutputFormat::Csv => whatif_csv(w),
        OutputFormat::Structured => to_structured(w),
    }
}
