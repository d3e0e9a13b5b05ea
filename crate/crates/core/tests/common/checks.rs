//! Brute-force and invariant checks shared by the property tests and the
//! acceptance report. Each returns the violations it found.

use patchrank::graph::{
    betweenness_centrality, CommunicationGraph, DependenceGraph, GraphEdge, GraphScope, NodeRef,
};
use patchrank::model::DependencyKind;
use patchrank::rank::{rank_with_context, RankScope};
use patchrank::report::to_structured;
use patchrank::risk::{audit, RiskContext};
use patchrank::{system_risk, SystemModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fixture, random_model, ModelShape, MODEL_FIXTURES};

// ---------------------------------------------------------------- paths

type Adjacency = [Vec<(usize, f64)>];

/// Minimum weight over all simple paths, and the lexicographically smallest
/// node-name sequence achieving it.
pub fn brute_force_path(adj: &Adjacency, names: &[String], s: usize, t: usize) -> Option<(f64, Vec<String>)> {
    struct Search<'a> {
        adj: &'a Adjacency,
        names: &'a [String],
        t: usize,
        seen: Vec<bool>,
        path: Vec<usize>,
        best: Option<(f64, Vec<String>)>,
    }
    impl Search<'_> {
        fn walk(&mut self, u: usize, w: f64) {
            if u == self.t {
                let seq: Vec<String> = self.path.iter().map(|&i| self.names[i].clone()).collect();
                let better = match &self.best {
                    None => true,
                    Some((bw, bs)) => w < *bw || (w == *bw && seq < *bs),
                };
                if better {
                    self.best = Some((w, seq));
                }
                return;
            }
            for &(v, ew) in &self.adj[u] {
                if !self.seen[v] {
                    self.seen[v] = true;
                    self.path.push(v);
                    self.walk(v, w + ew);
                    self.path.pop();
                    self.seen[v] = false;
                }
            }
        }
    }
    let mut search = Search {
        adj,
        names,
        t,
        seen: vec![false; adj.len()],
        path: vec![s],
        best: None,
    };
    search.seen[s] = true;
    search.walk(s, 0.0);
    search.best
}

/// Compares Dijkstra (weight and tie-broken node sequence) with exhaustive
/// simple-path enumeration on `graphs` random undirected graphs of 2..=8 nodes.
pub fn shortest_path_violations(graphs: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for graph in 0..graphs {
        let n = rng.gen_range(2..=8);
        // Shuffled names so index order and name order differ.
        let mut names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        names.shuffle(&mut rng);
        let mut edges = Vec::new();
        let mut adj = vec![Vec::new(); n];
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(0.4) {
                    let w = rng.gen_range(1..=4) as f64;
                    edges.push((names[a].clone(), names[b].clone(), w));
                    adj[a].push((b, w));
                    adj[b].push((a, w));
                }
            }
        }
        let cg = CommunicationGraph::new(names.clone(), edges);
        for s in 0..n {
            let table = cg.shortest_paths_from(s);
            for (t, entry) in table.iter().enumerate() {
                let expected = brute_force_path(&adj, &names, s, t);
                let got = entry
                    .as_ref()
                    .map(|(w, p)| (*w, p.iter().map(|&i| cg.name(i).to_string()).collect::<Vec<_>>()));
                if got != expected {
                    violations.push(format!(
                        "graph {graph} {s}->{t}: got {got:?}, expected {expected:?}"
                    ));
                }
            }
        }
    }
    violations
}

// ---------------------------------------------------------------- betweenness

fn digraph(n: usize, edges: &[(usize, usize)]) -> DependenceGraph {
    let nodes: Vec<NodeRef> = (0..n).map(NodeRef::Asset).collect();
    let labels = (0..n).map(|i| format!("v{i}")).collect();
    DependenceGraph::from_parts(
        GraphScope::SystemWide,
        nodes,
        labels,
        edges.iter().map(|&(from, to)| GraphEdge {
            from,
            to,
            weight: 1.0,
            kind: DependencyKind::DR,
        }),
    )
}

/// Betweenness from the definition: every shortest directed path between
/// every ordered pair is enumerated explicitly.
pub fn brute_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    fn walk(u: usize, adj: &[Vec<usize>], path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        for &v in &adj[u] {
            if !path.contains(&v) {
                path.push(v);
                walk(v, adj, path, out);
                path.pop();
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    let mut all_paths: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        walk(s, &adj, &mut vec![s], &mut all_paths);
    }
    let mut score = vec![0.0; n];
    if n <= 2 {
        return score;
    }
    for s in 0..n {
        for t in (0..n).filter(|&t| t != s) {
            let candidates: Vec<&Vec<usize>> = all_paths
                .iter()
                .filter(|p| p[0] == s && *p.last().unwrap() == t)
                .collect();
            let Some(min) = candidates.iter().map(|p| p.len()).min() else {
                continue;
            };
            let shortest: Vec<&&Vec<usize>> = candidates.iter().filter(|p| p.len() == min).collect();
            for v in (0..n).filter(|&v| v != s && v != t) {
                let through = shortest.iter().filter(|p| p.contains(&v)).count();
                score[v] += through as f64 / shortest.len() as f64;
            }
        }
    }
    let norm = ((n - 1) * (n - 2)) as f64;
    score.iter().map(|x| x / norm).collect()
}

fn betweenness_mismatches(n: usize, edges: &[(usize, usize)]) -> usize {
    let got = betweenness_centrality(&digraph(n, edges));
    let want = brute_betweenness(n, edges);
    got.iter()
        .zip(&want)
        .filter(|(g, w)| (*g - *w).abs() > 1e-12)
        .count()
}

/// Betweenness from pair counts: with `d` the hop distance and `c` the
/// number of shortest paths, `v` lies on `c(s,v) * c(v,t)` of the `c(s,t)`
/// shortest s-t paths exactly when `d(s,v) + d(v,t) = d(s,t)`.
pub fn counting_betweenness(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut dist = vec![vec![usize::MAX; n]; n];
    let mut count = vec![vec![0.0f64; n]; n];
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    for s in 0..n {
        dist[s][s] = 0;
        count[s][s] = 1.0;
        let mut frontier = vec![s];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in &adj[u] {
                    if dist[s][v] == usize::MAX {
                        dist[s][v] = depth;
                        next.push(v);
                    }
                    if dist[s][v] == depth {
                        count[s][v] += count[s][u];
                    }
                }
            }
            frontier = next;
        }
    }
    let mut score = vec![0.0; n];
    if n <= 2 {
        return score;
    }
    for s in 0..n {
        for t in (0..n).filter(|&t| t != s && dist[s][t] != usize::MAX) {
            for v in (0..n).filter(|&v| v != s && v != t) {
                if dist[s][v] != usize::MAX
                    && dist[v][t] != usize::MAX
                    && dist[s][v] + dist[v][t] == dist[s][t]
                {
                    score[v] += count[s][v] * count[v][t] / count[s][t];
                }
            }
        }
    }
    let norm = ((n - 1) * (n - 2)) as f64;
    score.iter().map(|x| x / norm).collect()
}

fn all_digraphs(n: usize) -> impl Iterator<Item = Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    (0u64..(1 << pairs.len())).map(move |mask| {
        pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, e)| *e)
            .collect()
    })
}

/// Every directed graph on five nodes against the counting oracle.
/// Returns (graphs checked, mismatching node scores).
pub fn betweenness_exhaustive_five() -> (usize, usize) {
    let mut graphs = 0;
    let mut violations = 0;
    for edges in all_digraphs(5) {
        let got = betweenness_centrality(&digraph(5, &edges));
        let want = counting_betweenness(5, &edges);
        violations += got
            .iter()
            .zip(&want)
            .filter(|(g, w)| (*g - *w).abs() > 1e-12)
            .count();
        graphs += 1;
    }
    (graphs, violations)
}

/// Every directed graph on 1..=4 nodes. Returns (graphs checked, mismatches).
pub fn betweenness_exhaustive() -> (usize, usize) {
    let mut violations = 0;
    let mut graphs = 0;
    for n in 1..=4usize {
        for edges in all_digraphs(n) {
            violations += betweenness_mismatches(n, &edges);
            graphs += 1;
        }
    }
    (graphs, violations)
}

/// Random directed graphs on five and six nodes.
pub fn betweenness_sampled(per_size: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for n in [5usize, 6] {
        for _ in 0..per_size {
            let p = rng.gen_range(0.1..0.6);
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .filter(|(a, b)| a != b)
                .filter(|_| rng.gen_bool(p))
                .collect();
            violations += betweenness_mismatches(n, &edges);
        }
    }
    violations
}

// ---------------------------------------------------------------- risk

pub fn patched(model: &SystemModel, flat: usize) -> SystemModel {
    let key = model.vuln_keys()[flat];
    let mut m = model.clone();
    m.assets[key.asset].components[key.component]
        .vulnerabilities
        .remove(key.vuln);
    m
}

/// Removes each vulnerability of each random model in turn and reports any
/// aggregate (asset, host, path, network, host total, system) that grew.
pub fn monotonicity_violations(models: u64) -> Vec<String> {
    let mut violations = Vec::new();
    for seed in 0..models {
        let model = random_model(seed, &ModelShape::default());
        let ctx = RiskContext::new(&model).unwrap();
        let base = ctx.baseline();
        for flat in 0..ctx.keys.len() {
            let after = ctx.aggregate_without(flat);
            let pairs = base
                .assets
                .iter()
                .zip(&after.assets)
                .chain(base.hosts.iter().zip(&after.hosts))
                .chain(base.paths.iter().zip(&after.paths))
                .chain([
                    (&base.network, &after.network),
                    (&base.host_total, &after.host_total),
                    (&base.system, &after.system),
                ]);
            for (b, a) in pairs {
                if a > b {
                    violations.push(format!("seed {seed} vuln {flat}: {b} -> {a}"));
                }
            }
        }
    }
    violations
}

/// Decomposition identities on every bundled fixture and `models` random ones.
pub fn decomposition_violations(models: u64) -> Vec<String> {
    let mut problems = Vec::new();
    for name in MODEL_FIXTURES {
        let report = system_risk(&fixture(name)).unwrap();
        problems.extend(audit(&report).into_iter().map(|p| format!("{name}: {p}")));
    }
    for seed in 0..models {
        let report = system_risk(&random_model(seed, &ModelShape::default())).unwrap();
        problems.extend(audit(&report).into_iter().map(|p| format!("seed {seed}: {p}")));
    }
    problems
}

/// Renders report plus ranking for every fixture `runs` times, each on a
/// thread pool of a different size, and lists any byte difference.
pub fn determinism_violations(runs: usize) -> Vec<String> {
    const THREADS: [usize; 10] = [1, 2, 3, 4, 8, 1, 2, 4, 8, 16];
    let mut violations = Vec::new();
    for name in MODEL_FIXTURES {
        let model = fixture(name);
        let render = || {
            let ctx = RiskContext::new(&model).unwrap();
            let ranking = rank_with_context(&ctx, RankScope::System);
            format!("{}{}", to_structured(&ctx.report()), to_structured(&ranking))
        };
        let first = render();
        for run in 0..runs {
            let threads = THREADS[run % THREADS.len()];
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            if pool.install(render) != first {
                violations.push(format!("{name}: run {run} on {threads} threads differs"));
            }
        }
    }
    violations
}
