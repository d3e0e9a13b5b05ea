//! Shared helpers for the integration tests: fixture loading and a seeded
//! generator of small random, valid inventories.

#![allow(dead_code)]

pub mod checks;

use std::path::PathBuf;

use patchrank::{parse_system_model, SystemModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> SystemModel {
    patchrank::load_system_model(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Every bundled inventory that is a complete model on its own.
pub const MODEL_FIXTURES: [&str; 6] = [
    "enterprise.json",
    "scenario1.json",
    "scenario2_np1.json",
    "scenario2_np2.json",
    "scenario3.json",
    "web_enriched.json",
];

const KINDS: [&str; 5] = ["ER", "IR", "DR", "SR", "SCR"];
const VECTORS: [&str; 4] = ["Network", "Adjacent", "Local", "Physical"];

pub struct ModelShape {
    pub max_assets: usize,
    pub max_components: usize,
    pub max_vulns: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            max_assets: 6,
            max_components: 4,
            max_vulns: 3,
        }
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn random_vuln(rng: &mut ChaCha8Rng, serial: &mut usize) -> Value {
    *serial += 1;
    json!({
        "cve_id": format!("CVE-2099-{:05}", *serial),
        "cvss_base": round1(rng.gen_range(0.1..10.0)),
        "likelihood_subscore": round1(rng.gen_range(0.1..3.9)),
        "impact_subscore": round1(rng.gen_range(0.0..6.0)),
        "epss": (rng.gen_range(0.0..1.0f64) * 1e5).round() / 1e5,
        "exploit_exists": rng.gen_bool(0.4),
        "scope_change": rng.gen_bool(0.4),
        "ransomware": rng.gen_bool(0.3),
        "attack_vector": *VECTORS.choose(rng).unwrap(),
    })
}

/// A random inventory with one entry point and a connected communication
/// graph. The criticality threshold is zero so every asset is a target.
pub fn random_model_json(seed: u64, shape: &ModelShape) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_assets = rng.gen_range(1..=shape.max_assets);
    let mut serial = 0;
    let mut assets = Vec::new();
    let mut comp_ids: Vec<Vec<String>> = Vec::new();
    for a in 0..n_assets {
        let n_comp = rng.gen_range(1..=shape.max_components);
        let ids: Vec<String> = (0..n_comp).map(|c| format!("c{c}")).collect();
        let components: Vec<Value> = ids
            .iter()
            .map(|id| {
                let n_v = rng.gen_range(0..=shape.max_vulns);
                let vulns: Vec<Value> = (0..n_v).map(|_| random_vuln(&mut rng, &mut serial)).collect();
                json!({"id": id, "vendor": "v", "product": "p", "version": "1",
                       "part": "application", "vulnerabilities": vulns})
            })
            .collect();
        let mut edges = Vec::new();
        for i in 0..n_comp {
            for j in 0..n_comp {
                if i != j && rng.gen_bool(0.3) {
                    edges.push(
                        json!({"from": ids[i], "to": ids[j], "kind": *KINDS.choose(&mut rng).unwrap()}),
                    );
                }
            }
        }
        assets.push(json!({
            "id": format!("a{a}"), "name": format!("Asset {a}"), "host_ref": "",
            "business_criticality_level": rng.gen_range(1..=6u8),
            "components": components, "intra_edges": edges,
        }));
        comp_ids.push(ids);
    }

    let n_hosts = rng.gen_range(1..=n_assets);
    let mut hosts: Vec<Vec<String>> = vec![Vec::new(); n_hosts];
    for (a, asset) in assets.iter_mut().enumerate() {
        let h = if a < n_hosts { a } else { rng.gen_range(0..n_hosts) };
        asset["host_ref"] = json!(format!("h{h}"));
        hosts[h].push(format!("a{a}"));
    }

    let mut cross = Vec::new();
    for _ in 0..rng.gen_range(0..=n_assets * 2) {
        let (a, b) = (rng.gen_range(0..n_assets), rng.gen_range(0..n_assets));
        if a == b {
            continue;
        }
        if rng.gen_bool(0.2) {
            cross.push(json!({"from": format!("a{a}"), "to": format!("a{b}"), "kind": "NR"}));
        } else {
            let ca = comp_ids[a].choose(&mut rng).unwrap();
            let cb = comp_ids[b].choose(&mut rng).unwrap();
            cross.push(json!({"from": format!("a{a}/{ca}"), "to": format!("a{b}/{cb}"),
                              "kind": *KINDS.choose(&mut rng).unwrap()}));
        }
    }

    let mut comm = vec![json!({"a": "internet", "b": "a0", "weight": 1.0})];
    for a in 1..n_assets {
        let b = rng.gen_range(0..a);
        comm.push(json!({"a": format!("a{b}"), "b": format!("a{a}"), "weight": rng.gen_range(1..=3) as f64}));
    }
    for _ in 0..rng.gen_range(0..=n_assets) {
        let (a, b) = (rng.gen_range(0..n_assets), rng.gen_range(0..n_assets));
        if a != b {
            comm.push(
                json!({"a": format!("a{a}"), "b": format!("a{b}"), "weight": rng.gen_range(1..=3) as f64}),
            );
        }
    }

    json!({
        "name": format!("random-{seed}"),
        "hosts": hosts.iter().enumerate().map(|(i, a)| json!({"id": format!("h{i}"), "assets": a})).collect::<Vec<_>>(),
        "assets": assets,
        "waypoints": ["internet"],
        "entry_points": ["internet"],
        "communication_edges": comm,
        "cross_asset_edges": cross,
        "params": {"criticality_threshold": 0.0},
    })
}

pub fn random_model(seed: u64, shape: &ModelShape) -> SystemModel {
    let doc = random_model_json(seed, shape);
    parse_system_model(&doc.to_string()).unwrap_or_else(|e| panic!("seed {seed}: {e}"))
}

/// A large inventory for timing: `assets` assets of five components each,
/// ten assets per host, and `vulns` vulnerabilities spread round-robin over
/// the components. The topology depends only on `assets` and `seed`, so two
/// calls differing in `vulns` share every graph.
pub fn scale_model_json(assets: usize, vulns: usize, seed: u64) -> Value {
    const COMPONENTS: usize = 5;
    let mut topo = ChaCha8Rng::seed_from_u64(seed);
    let mut vuln_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut per_component: Vec<Vec<Value>> = vec![Vec::new(); assets * COMPONENTS];
    let mut serial = 0;
    for j in 0..vulns {
        let slot = (j % assets) * COMPONENTS + (j / assets) % COMPONENTS;
        per_component[slot].push(random_vuln(&mut vuln_rng, &mut serial));
    }
    let mut per_component = per_component.into_iter();

    let mut asset_docs = Vec::with_capacity(assets);
    for a in 0..assets {
        let components: Vec<Value> = (0..COMPONENTS)
            .map(|c| {
                json!({"id": format!("c{c}"), "vendor": "v", "product": "p", "version": "1",
                       "part": if c == 0 { "os" } else { "application" },
                       "vulnerabilities": per_component.next().unwrap()})
            })
            .collect();
        let mut edges: Vec<Value> = (1..COMPONENTS)
            .map(|c| json!({"from": format!("c{c}"), "to": "c0", "kind": "ER"}))
            .collect();
        for _ in 0..3 {
            let (x, y) = (topo.gen_range(1..COMPONENTS), topo.gen_range(1..COMPONENTS));
            if x != y {
                edges.push(json!({"from": format!("c{x}"), "to": format!("c{y}"),
                                  "kind": *KINDS.choose(&mut topo).unwrap()}));
            }
        }
        asset_docs.push(json!({
            "id": format!("a{a}"), "name": format!("Asset {a}"), "host_ref": format!("h{}", a / 10),
            "business_criticality_level": topo.gen_range(1..=6u8),
            "components": components, "intra_edges": edges,
        }));
    }
    let hosts: Vec<Value> = (0..assets.div_ceil(10))
        .map(|h| {
            let members: Vec<String> = (h * 10..(h * 10 + 10).min(assets))
                .map(|a| format!("a{a}"))
                .collect();
            json!({"id": format!("h{h}"), "assets": members})
        })
        .collect();

    let mut cross = Vec::new();
    for a in 0..assets {
        for _ in 0..2 {
            let b = topo.gen_range(0..assets);
            if b == a {
                continue;
            }
            if topo.gen_bool(0.2) {
                cross.push(json!({"from": format!("a{a}"), "to": format!("a{b}"), "kind": "NR"}));
            } else {
                let (ca, cb) = (topo.gen_range(0..COMPONENTS), topo.gen_range(0..COMPONENTS));
                cross.push(json!({"from": format!("a{a}/c{ca}"), "to": format!("a{b}/c{cb}"),
                                  "kind": *KINDS.choose(&mut topo).unwrap()}));
            }
        }
    }

    let mut comm: Vec<Value> = (0..assets.min(5))
        .map(|a| json!({"a": "internet", "b": format!("a{a}")}))
        .collect();
    for a in 1..assets {
        let b = topo.gen_range(0..a);
        comm.push(
            json!({"a": format!("a{b}"), "b": format!("a{a}"), "weight": topo.gen_range(1..=3) as f64}),
        );
    }
    for _ in 0..assets / 2 {
        let (a, b) = (topo.gen_range(0..assets), topo.gen_range(0..assets));
        if a != b {
            comm.push(
                json!({"a": format!("a{a}"), "b": format!("a{b}"), "weight": topo.gen_range(1..=3) as f64}),
            );
        }
    }

    json!({
        "name": format!("scale-{assets}-{vulns}"),
        "hosts": hosts,
        "assets": asset_docs,
        "waypoints": ["internet"],
        "entry_points": ["internet"],
        "communication_edges": comm,
        "cross_asset_edges": cross,
    })
}
