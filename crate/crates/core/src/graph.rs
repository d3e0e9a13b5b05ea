//! Dependence and communication graphs, component centrality, asset
//! centrality and asset criticality.
//!
//! Dependence edges point from the dependent element to the element it
//! depends on, so in the adjacency matrix row `i` has a nonzero in column `j`
//! iff `i` depends on `j`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DependencyEdge, DependencyKind, RiskParams, SystemModel};

/// Which part of the model a dependence graph covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphScope {
    /// One asset's components and intra-asset edges.
    AssetLocal(usize),
    /// All components of one host's assets, with intra-asset edges and the
    /// cross-asset edges whose ends both sit on that host.
    HostInternal(usize),
    /// Every component, every dependence edge, and asset nodes for `NR` edges.
    SystemWide,
}

impl GraphScope {
    /// Parses `system`, `asset:<id>` or `host:<id>`.
    pub fn parse(model: &SystemModel, spec: &str) -> Result<GraphScope> {
        if spec == "system" {
            return Ok(GraphScope::SystemWide);
        }
        if let Some(id) = spec.strip_prefix("asset:") {
            return model
                .asset_index(id)
                .map(GraphScope::AssetLocal)
                .ok_or_else(|| Error::UnknownScope(spec.to_string()));
        }
        if let Some(id) = spec.strip_prefix("host:") {
            return model
                .host_index(id)
                .map(GraphScope::HostInternal)
                .ok_or_else(|| Error::UnknownScope(spec.to_string()));
        }
        Err(Error::UnknownScope(spec.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeRef {
    Component { asset: usize, component: usize },
    Asset(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    pub kind: DependencyKind,
}

#[derive(Debug, Clone)]
pub struct DependenceGraph {
    pub scope: GraphScope,
    nodes: Vec<NodeRef>,
    labels: Vec<String>,
    index: HashMap<NodeRef, usize>,
    edges: Vec<GraphEdge>,
    /// Edge indices leaving each node (towards what it depends on).
    out_edges: Vec<Vec<usize>>,
    /// Edge indices entering each node (from its dependents).
    in_edges: Vec<Vec<usize>>,
}

impl DependenceGraph {
    /// Builds a graph directly from nodes and `(from, to, weight, kind)`
    /// tuples. Duplicate `(from, to)` pairs keep the heavier edge.
    pub fn from_parts(
        scope: GraphScope,
        nodes: Vec<NodeRef>,
        labels: Vec<String>,
        raw_edges: impl IntoIterator<Item = GraphEdge>,
    ) -> DependenceGraph {
        assert_eq!(nodes.len(), labels.len());
        let index: HashMap<NodeRef, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut merged: BTreeMap<(usize, usize), GraphEdge> = BTreeMap::new();
        for e in raw_edges {
            merged
                .entry((e.from, e.to))
                .and_modify(|cur| {
                    if e.weight > cur.weight {
                        *cur = e;
                    }
                })
                .or_insert(e);
        }
        let edges: Vec<GraphEdge> = merged.into_values().collect();
        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.from].push(i);
            in_edges[e.to].push(i);
        }
        DependenceGraph {
            scope,
            nodes,
            labels,
            index,
            edges,
            out_edges,
            in_edges,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn label(&self, node: usize) -> &str {
        &self.labels[node]
    }

    pub fn node_index(&self, node: NodeRef) -> Option<usize> {
        self.index.get(&node).copied()
    }

    pub fn component_node(&self, asset: usize, component: usize) -> Option<usize> {
        self.node_index(NodeRef::Component { asset, component })
    }

    /// Edges from nodes that depend on `node`.
    pub fn dependents(&self, node: usize) -> impl Iterator<Item = &GraphEdge> + '_ {
        self.in_edges[node].iter().map(move |&e| &self.edges[e])
    }

    /// Edges to the nodes `node` depends on.
    pub fn dependencies(&self, node: usize) -> impl Iterator<Item = &GraphEdge> + '_ {
        self.out_edges[node].iter().map(move |&e| &self.edges[e])
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_edges[node].len()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_edges[node].len()
    }

    /// Dense weighted adjacency matrix; `m[i][j]` is the weight of `i -> j`.
    pub fn adjacency_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.nodes.len();
        let mut m = vec![vec![0.0; n]; n];
        for e in &self.edges {
            m[e.from][e.to] = e.weight;
        }
        m
    }

    /// `from to weight kind`, one edge per line.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                self.labels[e.from], self.labels[e.to], e.weight, e.kind
            );
        }
        out
    }

    /// Adjacency matrix with a header row of node labels.
    pub fn matrix_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.labels.join(" "));
        for row in self.adjacency_matrix() {
            let cells: Vec<String> = row.iter().map(|w| format!("{w}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        }
        out
    }
}

fn edge_weight(e: &DependencyEdge, p: &RiskParams) -> f64 {
    e.weight.unwrap_or_else(|| p.dependency_weights.weight(e.kind))
}

/// Builds the dependence graph for a scope. Edges without an explicit
/// weight take the default for their kind from `params`.
pub fn build_dependence_graph(
    model: &SystemModel,
    scope: GraphScope,
    params: &RiskParams,
) -> Result<DependenceGraph> {
    let assets: Vec<usize> = match scope {
        GraphScope::AssetLocal(a) => {
            if a >= model.assets.len() {
                return Err(Error::UnknownScope(format!("asset #{a}")));
            }
            vec![a]
        }
        GraphScope::HostInternal(h) => {
            let host = model
                .hosts
                .get(h)
                .ok_or_else(|| Error::UnknownScope(format!("host #{h}")))?;
            host.assets
                .iter()
                .filter_map(|id| model.asset_index(id))
                .collect()
        }
        GraphScope::SystemWide => (0..model.assets.len()).collect(),
    };

    let mut nodes = Vec::new();
    let mut labels = Vec::new();
    for &ai in &assets {
        let a = &model.assets[ai];
        for (ci, c) in a.components.iter().enumerate() {
            nodes.push(NodeRef::Component {
                asset: ai,
                component: ci,
            });
            labels.push(format!("{}/{}", a.id, c.id));
        }
    }
    let mut index: HashMap<NodeRef, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();

    let mut raw = Vec::new();
    for &ai in &assets {
        let a = &model.assets[ai];
        for e in &a.intra_edges {
            let (Some(f), Some(t)) = (a.component_index(&e.from), a.component_index(&e.to)) else {
                continue;
            };
            raw.push(GraphEdge {
                from: index[&NodeRef::Component {
                    asset: ai,
                    component: f,
                }],
                to: index[&NodeRef::Component {
                    asset: ai,
                    component: t,
                }],
                weight: edge_weight(e, params),
                kind: e.kind,
            });
        }
    }

    for e in &model.cross_asset_edges {
        if e.kind == DependencyKind::NR {
            if scope != GraphScope::SystemWide {
                continue;
            }
            let (Some(f), Some(t)) = (model.asset_index(&e.from), model.asset_index(&e.to)) else {
                continue;
            };
            let mut node_for = |ai: usize| {
                let key = NodeRef::Asset(ai);
                *index.entry(key).or_insert_with(|| {
                    nodes.push(key);
                    labels.push(model.assets[ai].id.clone());
                    nodes.len() - 1
                })
            };
            let from = node_for(f);
            let to = node_for(t);
            raw.push(GraphEdge {
                from,
                to,
                weight: edge_weight(e, params),
                kind: e.kind,
            });
        } else {
            let (Some((fa, fc)), Some((ta, tc))) =
                (model.component_path(&e.from), model.component_path(&e.to))
            else {
                continue;
            };
            let from = index.get(&NodeRef::Component {
                asset: fa,
                component: fc,
            });
            let to = index.get(&NodeRef::Component {
                asset: ta,
                component: tc,
            });
            if let (Some(&from), Some(&to)) = (from, to) {
                raw.push(GraphEdge {
                    from,
                    to,
                    weight: edge_weight(e, params),
                    kind: e.kind,
                });
            }
        }
    }

    Ok(DependenceGraph::from_parts(scope, nodes, labels, raw))
}

/// Per-node centrality measures, indexed like the graph's nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityScores {
    pub degree: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub pagerank: Vec<f64>,
    /// Mean of the three measures.
    pub combined: Vec<f64>,
    /// `combined` divided by its maximum over the graph.
    pub normalized: Vec<f64>,
}

const PAGERANK_TOLERANCE: f64 = 1e-9;
const PAGERANK_MAX_ITER: usize = 200;

/// Degree, betweenness and PageRank centrality combined by their mean and
/// max-normalised so the most central node scores exactly 1.0.
pub fn centrality(g: &DependenceGraph, damping: f64) -> Result<CentralityScores> {
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let degree = degree_centrality(g);
    let betweenness = betweenness_centrality(g);
    let pagerank = pagerank(g, damping);
    let combined: Vec<f64> = (0..n)
        .map(|i| (degree[i] + betweenness[i] + pagerank[i]) / 3.0)
        .collect();
    let max = combined.iter().copied().fold(f64::MIN, f64::max);
    let normalized = combined
        .iter()
        .map(|&c| if c == max { 1.0 } else { c / max })
        .collect();
    Ok(CentralityScores {
        degree,
        betweenness,
        pagerank,
        combined,
        normalized,
    })
}

/// `(in + out) / (n - 1)`, or 0 for a single node.
pub fn degree_centrality(g: &DependenceGraph) -> Vec<f64> {
    let n = g.node_count();
    if n <= 1 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| (g.in_degree(i) + g.out_degree(i)) as f64 / (n - 1) as f64)
        .collect()
}

/// Brandes betweenness over directed, unweighted shortest paths, normalised
/// by `(n - 1)(n - 2)`.
pub fn betweenness_centrality(g: &DependenceGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut bc = vec![0.0; n];
    if n <= 2 {
        return bc;
    }
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|i| g.dependencies(i).map(|e| e.to).collect())
        .collect();
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &succ[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    bc.iter_mut().for_each(|b| *b *= scale);
    bc
}

/// PageRank over depends-on edges, so rank flows from dependents to the
/// components they rely on. Dangling nodes spread their rank uniformly.
pub fn pagerank(g: &DependenceGraph, damping: f64) -> Vec<f64> {
    let n = g.node_count();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    let out_deg: Vec<usize> = (0..n).map(|i| g.out_degree(i)).collect();
    let mut rank = vec![1.0 / nf; n];
    for _ in 0..PAGERANK_MAX_ITER {
        let dangling: f64 = (0..n).filter(|&i| out_deg[i] == 0).map(|i| rank[i]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        let mut next = vec![base; n];
        for e in g.edges() {
            next[e.to] += damping * rank[e.from] / out_deg[e.from] as f64;
        }
        let err: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        rank = next;
        if err < PAGERANK_TOLERANCE {
            break;
        }
    }
    rank
}

/// Mean normalised centrality of an asset's components in a graph that
/// contains them (normally the system-wide graph).
pub fn asset_centrality(
    model: &SystemModel,
    asset: usize,
    g: &DependenceGraph,
    scores: &CentralityScores,
) -> Result<f64> {
    let a = &model.assets[asset];
    if a.components.is_empty() {
        return Err(Error::NoComponents(a.id.clone()));
    }
    let mut sum = 0.0;
    for ci in 0..a.components.len() {
        let node = g
            .component_node(asset, ci)
            .ok_or_else(|| Error::UnknownComponent(format!("{}/{}", a.id, a.components[ci].id)))?;
        sum += scores.normalized[node];
    }
    Ok(sum / a.components.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssetCriticality {
    pub score: f64,
    /// `floor(score * 10)`.
    pub level: u32,
}

/// Weighted mix of structural centrality and business criticality.
pub fn asset_criticality(centrality: f64, business_level: u8, p: &RiskParams) -> AssetCriticality {
    let score = p.w1 * centrality + p.w2 * p.business_score(business_level);
    // The epsilon keeps products like 0.3 * 10 from flooring to 2.
    let level = (score * 10.0 + 1e-9).floor().max(0.0) as u32;
    AssetCriticality { score, level }
}

/// Total weight and node sequence of one path.
pub type WeightedPath = (f64, Vec<usize>);

/// Undirected weighted graph over assets and topology waypoints.
#[derive(Debug, Clone)]
pub struct CommunicationGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// Position of each node when ids are sorted; used for path tie-breaks.
    name_rank: Vec<usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    edges: BTreeMap<(usize, usize), f64>,
    components: OnceLock<Vec<usize>>,
}

impl CommunicationGraph {
    pub fn new(node_names: Vec<String>, edges: impl IntoIterator<Item = (String, String, f64)>) -> Self {
        let index: HashMap<String, usize> = node_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut sorted: Vec<usize> = (0..node_names.len()).collect();
        sorted.sort_by(|&a, &b| node_names[a].cmp(&node_names[b]));
        let mut name_rank = vec![0; node_names.len()];
        for (r, &i) in sorted.iter().enumerate() {
            name_rank[i] = r;
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            let (Some(&a), Some(&b)) = (index.get(&a), index.get(&b)) else {
                continue;
            };
            if a == b {
                continue;
            }
            let key = (a.min(b), a.max(b));
            merged.entry(key).and_modify(|cur| *cur = cur.min(w)).or_insert(w);
        }
        let mut adjacency = vec![Vec::new(); node_names.len()];
        for (&(a, b), &w) in &merged {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(v, _)| v);
        }
        CommunicationGraph {
            names: node_names,
            index,
            name_rank,
            adjacency,
            edges: merged,
            components: OnceLock::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn node(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn edge_weight(&self, a: usize, b: usize) -> Option<f64> {
        self.edges.get(&(a.min(b), a.max(b))).copied()
    }

    /// `(a, b, weight)` for every undirected edge, `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    /// Connected-component label of each node, computed on first use.
    pub fn component_labels(&self) -> &[usize] {
        self.components.get_or_init(|| {
            let n = self.names.len();
            let mut label = vec![usize::MAX; n];
            let mut next = 0;
            for s in 0..n {
                if label[s] != usize::MAX {
                    continue;
                }
                let mut stack = vec![s];
                label[s] = next;
                while let Some(v) = stack.pop() {
                    for &(w, _) in &self.adjacency[v] {
                        if label[w] == usize::MAX {
                            label[w] = next;
                            stack.push(w);
                        }
                    }
                }
                next += 1;
            }
            label
        })
    }

    /// Dijkstra from `source` to every node. Among equal-weight paths the one
    /// whose node-id sequence is lexicographically smallest wins.
    pub fn shortest_paths_from(&self, source: usize) -> Vec<Option<WeightedPath>> {
        let n = self.names.len();
        let mut best: Vec<Option<Label>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        let start = Label {
            dist: 0.0,
            ranks: vec![self.name_rank[source]],
            path: vec![source],
        };
        best[source] = Some(start.clone());
        heap.push(std::cmp::Reverse(start));
        while let Some(std::cmp::Reverse(label)) = heap.pop() {
            let v = *label.path.last().expect("nonempty path");
            if done[v] {
                continue;
            }
            done[v] = true;
            for &(w, weight) in &self.adjacency[v] {
                if done[w] {
                    continue;
                }
                let mut cand = label.clone();
                cand.dist += weight;
                cand.ranks.push(self.name_rank[w]);
                cand.path.push(w);
                let better = match &best[w] {
                    None => true,
                    Some(cur) => cand < *cur,
                };
                if better {
                    best[w] = Some(cand.clone());
                    heap.push(std::cmp::Reverse(cand));
                }
            }
        }
        best.into_iter().map(|l| l.map(|l| (l.dist, l.path))).collect()
    }

    pub fn shortest_path(&self, source: usize, target: usize) -> Option<(f64, Vec<usize>)> {
        self.shortest_paths_from(source).swap_remove(target)
    }
}

#[derive(Debug, Clone)]
struct Label {
    dist: f64,
    ranks: Vec<usize>,
    path: Vec<usize>,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.ranks.cmp(&other.ranks))
    }
}

/// Nodes are the model's assets (in order) followed by its waypoints.
pub fn build_communication_graph(model: &SystemModel) -> CommunicationGraph {
    let mut names: Vec<String> = model.assets.iter().map(|a| a.id.clone()).collect();
    names.extend(model.waypoints.iter().cloned());
    CommunicationGraph::new(
        names,
        model
            .communication_edges
            .iter()
            .map(|e| (e.a.clone(), e.b.clone(), e.weight)),
    )
}
