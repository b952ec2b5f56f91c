//! Correlation networks: metric distances, minimal spanning trees, Louvain
//! communities and degree statistics.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corrmat::CorrMatrix;
use crate::diststats::{TailFit, TailKind};
use crate::error::{Error, Result};
use crate::linalg::{linear_fit, SymMatrix};

/// `d_ij = sqrt(2 (1 - ρ_ij))` over clamped correlations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub values: SymMatrix,
}

pub fn correlation_distance(rho: f64) -> f64 {
    (2.0 * (1.0 - rho.clamp(-1.0, 1.0))).max(0.0).sqrt()
}

pub fn distance_matrix(c: &CorrMatrix) -> DistanceMatrix {
    let n = c.dim();
    let clamped = c.clamped();
    DistanceMatrix {
        labels: c.labels.clone(),
        values: SymMatrix::from_fn(n, |i, j| {
            if i == j {
                0.0
            } else {
                correlation_distance(clamped.get(i, j))
            }
        }),
    }
}

impl DistanceMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Unlabeled distances, labels `0..n`.
    pub fn from_values(values: SymMatrix) -> Self {
        Self {
            labels: (0..values.dim()).map(|i| i.to_string()).collect(),
            values,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub distance: f64,
}

impl Edge {
    /// Louvain/rendering weight `2 - d`, monotone in correlation.
    pub fn weight(&self) -> f64 {
        2.0 - self.distance
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub labels: Vec<String>,
    /// `src < dst`, in Kruskal acceptance order.
    pub edges: Vec<Edge>,
    /// Node size attribute (capitalization or transaction count).
    pub sizes: Vec<f64>,
    pub communities: Option<Vec<usize>>,
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal's algorithm; ties are broken by `(d, i, j)` lexicographic order.
pub fn mst(d: &DistanceMatrix) -> Result<Tree> {
    let n = d.dim();
    if n < 2 {
        return Err(Error::InvalidInput(
            "a spanning tree needs at least two nodes".into(),
        ));
    }
    let mut pairs: Vec<Edge> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let distance = d.values.get(i, j);
            if distance.is_nan() {
                return Err(Error::InvalidInput(format!("distance ({i}, {j}) is NaN")));
            }
            pairs.push(Edge {
                src: i,
                dst: j,
                distance,
            });
        }
    }
    pairs.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.src.cmp(&b.src))
            .then(a.dst.cmp(&b.dst))
    });
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for e in pairs {
        if uf.union(e.src, e.dst) {
            edges.push(e);
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    Ok(Tree {
        labels: d.labels.clone(),
        edges,
        sizes: vec![1.0; n],
        communities: None,
    })
}

impl Tree {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).sum()
    }

    /// `I - 1` edges and no cycle.
    pub fn is_spanning_tree(&self) -> bool {
        let n = self.node_count();
        if self.edges.len() + 1 != n {
            return false;
        }
        let mut uf = UnionFind::new(n);
        self.edges.iter().all(|e| uf.union(e.src, e.dst))
    }

    pub fn with_sizes(mut self, sizes: Vec<f64>) -> Self {
        self.sizes = sizes;
        self
    }

    /// Sorted `(min, max)` endpoint pairs, for comparing edge sets.
    pub fn edge_set(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self
            .edges
            .iter()
            .map(|e| (e.src.min(e.dst), e.src.max(e.dst)))
            .collect();
        v.sort_unstable();
        v
    }

    /// Edge list CSV `src,dst,distance,weight` with node labels.
    pub fn write_edges_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["src", "dst", "distance", "weight"])?;
        for e in &self.edges {
            w.write_record([
                self.labels[e.src].clone(),
                self.labels[e.dst].clone(),
                e.distance.to_string(),
                e.weight().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Node CSV `id,size,community,degree`; community is empty when unset.
    pub fn write_nodes_csv<W: Write>(&self, writer: W) -> Result<()> {
        let deg = degrees(self);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "size", "community", "degree"])?;
        for (i, l) in self.labels.iter().enumerate() {
            let community = self
                .communities
                .as_ref()
                .map_or(String::new(), |c| c[i].to_string());
            w.write_record([
                l.clone(),
                self.sizes[i].to_string(),
                community,
                deg.degrees[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the pair of files written by the two `write_*_csv` methods.
    pub fn read_csv<R1: Read, R2: Read>(edges: R1, nodes: R2) -> Result<Self> {
        let mut labels = Vec::new();
        let mut sizes = Vec::new();
        let mut communities = Vec::new();
        let mut rdr = csv::Reader::from_reader(nodes);
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let bad = |r: &str| Error::Parse {
                line,
                reason: r.to_string(),
            };
            labels.push(row.get(0).ok_or_else(|| bad("missing id"))?.to_string());
            sizes.push(
                row.get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad size"))?,
            );
            communities.push(row.get(2).and_then(|s| s.parse::<usize>().ok()));
        }
        let index = |l: &str| labels.iter().position(|x| x == l);
        let mut list = Vec::new();
        let mut rdr = csv::Reader::from_reader(edges);
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let bad = || Error::Parse {
                line,
                reason: "malformed edge row".into(),
            };
            let a = row.get(0).and_then(index).ok_or_else(bad)?;
            let b = row.get(1).and_then(index).ok_or_else(bad)?;
            let distance = row.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            list.push(Edge {
                src: a.min(b),
                dst: a.max(b),
                distance,
            });
        }
        let communities = communities.iter().copied().collect::<Option<Vec<_>>>();
        Ok(Self {
            labels,
            edges: list,
            sizes,
            communities,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub degrees: Vec<usize>,
    /// `(δ, P(X >= δ))` over distinct degrees, ascending.
    pub ccdf: Vec<(usize, f64)>,
}

impl DegreeDistribution {
    pub fn from_degrees(degrees: Vec<usize>) -> Self {
        let mut sorted = degrees.clone();
        sorted.sort_unstable();
        let n = sorted.len() as f64;
        let mut ccdf = Vec::new();
        for (k, &d) in sorted.iter().enumerate() {
            if k == 0 || sorted[k - 1] != d {
                ccdf.push((d, (sorted.len() - k) as f64 / n));
            }
        }
        Self { degrees, ccdf }
    }

    pub fn total(&self) -> usize {
        self.degrees.iter().sum()
    }
}

pub fn degrees(t: &Tree) -> DegreeDistribution {
    let mut deg = vec![0usize; t.node_count()];
    for e in &t.edges {
        deg[e.src] += 1;
        deg[e.dst] += 1;
    }
    DegreeDistribution::from_degrees(deg)
}

/// Power-law fit of the degree CCDF by log-log least squares.
pub fn degree_tail_fit(dd: &DegreeDistribution) -> Result<TailFit> {
    let pts: Vec<&(usize, f64)> = dd.ccdf.iter().filter(|(d, _)| *d > 0).collect();
    if pts.len() < 4 {
        return Err(Error::Degenerate(format!(
            "{} distinct positive degrees, need 4",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|(d, _)| (*d as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, p)| p.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    Ok(TailFit {
        kind: TailKind::PowerLaw,
        exponent: -fit.slope,
        x_min: pts[0].0 as f64,
        n_tail: dd.degrees.len(),
        loglog_slope: fit.slope,
        loglog_r2: fit.r2,
        poor_fit: fit.r2 < crate::diststats::LINEARITY_R2,
    })
}

/// Undirected weighted graph as a dense-free adjacency list.
/// Self loops carry twice their weight in `adj` so that strengths are row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n],
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        if a == b {
            self.adj[a].push((a, 2.0 * w));
        } else {
            self.adj[a].push((b, w));
            self.adj[b].push((a, w));
        }
    }

    /// MST with weights `w = 2 - d`.
    pub fn from_tree(t: &Tree) -> Self {
        let mut g = Self::new(t.node_count());
        for e in &t.edges {
            g.add_edge(e.src, e.dst, e.weight());
        }
        g
    }

    /// Complete graph with weights `w = 2 - d`.
    pub fn from_distances(d: &DistanceMatrix) -> Self {
        let n = d.dim();
        let mut g = Self::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.add_edge(i, j, 2.0 - d.values.get(i, j));
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    fn strengths(&self) -> Vec<f64> {
        self.adj
            .iter()
            .map(|row| row.iter().map(|(_, w)| w).sum())
            .collect()
    }

    fn aggregate(&self, assign: &[usize], n_comm: usize) -> Self {
        let mut acc = vec![std::collections::BTreeMap::<usize, f64>::new(); n_comm];
        for (i, row) in self.adj.iter().enumerate() {
            for &(j, w) in row {
                *acc[assign[i]].entry(assign[j]).or_insert(0.0) += w;
            }
        }
        Self {
            adj: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }
}

/// Newman modularity of a partition (resolution 1).
pub fn modularity(g: &WeightedGraph, assign: &[usize]) -> f64 {
    let k = g.strengths();
    let two_m: f64 = k.iter().sum();
    if two_m <= 0.0 {
        return 0.0;
    }
    let n_comm = assign.iter().max().map_or(0, |m| m + 1);
    let mut inside = vec![0.0; n_comm];
    let mut tot = vec![0.0; n_comm];
    for (i, row) in g.adj.iter().enumerate() {
        tot[assign[i]] += k[i];
        for &(j, w) in row {
            if assign[i] == assign[j] {
                inside[assign[i]] += w;
            }
        }
    }
    inside
        .iter()
        .zip(&tot)
        .map(|(a, t)| a / two_m - (t / two_m).powi(2))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Communities {
    /// Community id per node, numbered by first appearance.
    pub assignment: Vec<usize>,
    pub modularity: f64,
}

impl Communities {
    pub fn count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }
}

fn renumber(assign: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for c in assign.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Local-moving phase starting from `comm` (ids below the node count).
/// Each node in turn takes the neighbouring or empty community with the best
/// gain. Returns whether any node moved.
fn local_moves(g: &WeightedGraph, comm: &mut [usize]) -> bool {
    const MAX_SWEEPS: usize = 1_000;
    let n = g.node_count();
    let k = g.strengths();
    let two_m: f64 = k.iter().sum();
    let mut tot = vec![0.0; n];
    let mut members = vec![0usize; n];
    for i in 0..n {
        tot[comm[i]] += k[i];
        members[comm[i]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).rev().filter(|&c| members[c] == 0).collect();
    let mut improved = false;
    let mut links = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for i in 0..n {
            let own = comm[i];
            for &(j, w) in &g.adj[i] {
                if j == i {
                    continue;
                }
                let c = comm[j];
                if links[c] == 0.0 && !touched.contains(&c) {
                    touched.push(c);
                }
                links[c] += w;
            }
            tot[own] -= k[i];
            members[own] -= 1;
            let gain = |c: usize, l: f64| l - tot[c] * k[i] / two_m;
            let eps = 1e-12 * k[i].max(1e-300);
            let mut best = own;
            let mut best_gain = gain(own, links[own]);
            touched.sort_unstable();
            for &c in &touched {
                let gc = gain(c, links[c]);
                if gc > best_gain + eps {
                    best = c;
                    best_gain = gc;
                }
            }
            // Splitting off alone has zero gain.
            if members[own] > 0 && best_gain < -eps {
                if let Some(&c) = empty.last() {
                    best = c;
                }
            }
            if members[best] == 0 && best != own {
                empty.pop();
            }
            if members[own] == 0 && best != own {
                empty.push(own);
            }
            tot[best] += k[i];
            members[best] += 1;
            if best != own {
                comm[i] = best;
                moved = true;
                improved = true;
            }
            for &c in &touched {
                links[c] = 0.0;
            }
            links[own] = 0.0;
            touched.clear();
        }
        if !moved {
            break;
        }
    }
    improved
}

/// Multi-level Louvain modularity optimization with a fixed node order.
///
/// After the last aggregation the partition is projected back level by level
/// and each level gets another local-moving pass, so nodes merged early can
/// still change community.
pub fn louvain(g: &WeightedGraph) -> Communities {
    let n = g.node_count();
    let mut levels = vec![g.clone()];
    // maps[l][i]: node of level l+1 containing node i of level l.
    let mut maps: Vec<Vec<usize>> = Vec::new();
    loop {
        let level = levels.last().expect("at least one level");
        let mut comm: Vec<usize> = (0..level.node_count()).collect();
        if !local_moves(level, &mut comm) {
            break;
        }
        let n_comm = renumber(&mut comm);
        if n_comm == level.node_count() {
            break;
        }
        let next = level.aggregate(&comm, n_comm);
        maps.push(comm);
        levels.push(next);
    }
    let top = levels.len() - 1;
    let mut comm: Vec<usize> = (0..levels[top].node_count()).collect();
    for l in (0..top).rev() {
        comm = maps[l].iter().map(|&c| comm[c]).collect();
        local_moves(&levels[l], &mut comm);
    }
    let mut assignment = if top == 0 {
        let mut c: Vec<usize> = (0..n).collect();
        local_moves(g, &mut c);
        c
    } else {
        comm
    };
    renumber(&mut assignment);
    Communities {
        modularity: modularity(g, &assignment),
        assignment,
    }
}

/// Louvain on the tree's own edges with weights `2 - d`.
pub fn louvain_tree(t: &Tree) -> Result<Communities> {
    if t.edges.iter().any(|e| !(e.weight() > 0.0)) {
        return Err(Error::InvalidInput("Louvain weights must be positive".into()));
    }
    Ok(louvain(&WeightedGraph::from_tree(t)))
}

/// Graph the community search runs on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommunityGraph {
    /// The spanning tree's own edges.
    #[default]
    Tree,
    /// Every pair, weighted `2 - d`.
    Full,
}

/// Louvain on the complete network with weights `2 - d`.
pub fn louvain_full(d: &DistanceMatrix) -> Communities {
    louvain(&WeightedGraph::from_distances(d))
}

pub fn detect_communities(tree: &Tree, d: &DistanceMatrix, graph: CommunityGraph) -> Result<Communities> {
    match graph {
        CommunityGraph::Tree => louvain_tree(tree),
        CommunityGraph::Full => Ok(louvain_full(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrmat::CorrKind;
    use crate::rng::CounterRng;
    use crate::series::Observable;

    fn dist(n: usize, f: impl FnMut(usize, usize) -> f64) -> DistanceMatrix {
        DistanceMatrix::from_values(SymMatrix::from_fn(n, f))
    }

    fn random_dist(n: usize, seed: u64) -> DistanceMatrix {
        let mut r = CounterRng::new(seed);
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                m.set_sym(i, j, 2.0 * r.next_f64());
            }
        }
        DistanceMatrix::from_values(m)
    }

    /// Minimum spanning-tree weight over all labeled trees via Prüfer codes.
    fn brute_force_min(d: &DistanceMatrix) -> f64 {
        let n = d.dim();
        if n == 2 {
            return d.values.get(0, 1);
        }
        let len = n - 2;
        let total = n.pow(len as u32);
        let mut best = f64::INFINITY;
        let mut code = vec![0usize; len];
        for idx in 0..total {
            let mut x = idx;
            for c in code.iter_mut() {
                *c = x % n;
                x /= n;
            }
            let mut deg = vec![1usize; n];
            code.iter().for_each(|&c| deg[c] += 1);
            let mut w = 0.0;
            for &c in &code {
                let leaf = (0..n).find(|&v| deg[v] == 1).unwrap();
                w += d.values.get(leaf, c);
                deg[leaf] -= 1;
                deg[c] -= 1;
            }
            let rest: Vec<usize> = (0..n).filter(|&v| deg[v] == 1).collect();
            w += d.values.get(rest[0], rest[1]);
            best = best.min(w);
        }
        best
    }

    #[test]
    fn distance_endpoints() {
        assert_eq!(correlation_distance(1.0), 0.0);
        assert_eq!(correlation_distance(0.0), 2f64.sqrt());
        assert_eq!(correlation_distance(-1.0), 2.0);
        assert_eq!(correlation_distance(1.7), 0.0);
    }

    #[test]
    fn distance_matrix_from_corr() {
        let c = CorrMatrix {
            labels: vec!["a".into(), "b".into(), "c".into()],
            values: SymMatrix::from_rows(&[vec![1.0, 1.3, 0.0], vec![1.3, 1.0, -1.0], vec![0.0, -1.0, 1.0]])
                .unwrap(),
            kind: CorrKind::Detrended { q: 4.0, s: 10 },
            observable: Observable::Other,
            dt: 1,
            t_pts: 10,
            flagged: vec![],
        };
        let d = distance_matrix(&c);
        assert_eq!(d.values.get(0, 1), 0.0);
        assert_eq!(d.values.get(1, 2), 2.0);
        assert_eq!(d.values.get(0, 0), 0.0);
        assert!(d.values.as_slice().iter().all(|&v| (0.0..=2.0).contains(&v)));
    }

    #[test]
    fn three_node_mst() {
        let d = dist(3, |i, j| match (i.min(j), i.max(j)) {
            (0, 1) => 0.1,
            (0, 2) => 0.2,
            (1, 2) => 0.9,
            _ => 0.0,
        });
        let t = mst(&d).unwrap();
        assert_eq!(t.edge_set(), vec![(0, 1), (0, 2)]);
        assert!(mst(&dist(1, |_, _| 0.0)).is_err());
    }

    #[test]
    fn star_correlation_gives_star_tree() {
        let rho = |i: usize, j: usize| {
            if i == j {
                1.0
            } else if i == 0 || j == 0 {
                0.9
            } else {
                0.1
            }
        };
        let d = dist(6, |i, j| {
            if i == j {
                0.0
            } else {
                correlation_distance(rho(i, j))
            }
        });
        let t = mst(&d).unwrap();
        assert!((t.total_weight() - brute_force_min(&d)).abs() < 1e-12);
        assert_eq!(degrees(&t).degrees[0], 5);
    }

    #[test]
    fn kruskal_matches_brute_force() {
        for seed in 0..20 {
            let n = 3 + (seed as usize % 6);
            let d = random_dist(n, seed);
            let t = mst(&d).unwrap();
            assert!(t.is_spanning_tree());
            assert!((t.total_weight() - brute_force_min(&d)).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_transform_keeps_edges() {
        let d = random_dist(12, 99);
        let sq = DistanceMatrix::from_values(d.values.map(|v| v * v));
        assert_eq!(mst(&d).unwrap().edge_set(), mst(&sq).unwrap().edge_set());
    }

    #[test]
    fn relabeling_permutes_tree() {
        let d = random_dist(10, 5);
        let perm = [3, 7, 0, 9, 1, 2, 8, 4, 6, 5];
        let pd = DistanceMatrix::from_values(d.values.permuted(&perm));
        let a = mst(&d).unwrap();
        let b = mst(&pd).unwrap();
        let mapped: Vec<(usize, usize)> = {
            let mut v: Vec<_> = b
                .edge_set()
                .iter()
                .map(|&(i, j)| (perm[i].min(perm[j]), perm[i].max(perm[j])))
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(mapped, a.edge_set());
    }

    fn path_tree(n: usize) -> Tree {
        Tree {
            labels: (0..n).map(|i| i.to_string()).collect(),
            edges: (0..n - 1)
                .map(|i| Edge {
                    src: i,
                    dst: i + 1,
                    distance: 1.0,
                })
                .collect(),
            sizes: vec![1.0; n],
            communities: None,
        }
    }

    #[test]
    fn degree_cases() {
        assert_eq!(degrees(&path_tree(5)).degrees, vec![1, 2, 2, 2, 1]);
        let star = Tree {
            edges: (1..5)
                .map(|i| Edge {
                    src: 0,
                    dst: i,
                    distance: 1.0,
                })
                .collect(),
            ..path_tree(5)
        };
        let dd = degrees(&star);
        assert_eq!(dd.degrees, vec![4, 1, 1, 1, 1]);
        assert_eq!(dd.ccdf, vec![(1, 1.0), (4, 0.2)]);
        assert!(degree_tail_fit(&dd).is_err());
    }

    #[test]
    fn degree_fit_exact_power() {
        let mut deg = vec![1; 48];
        deg.extend(vec![2; 12]);
        deg.extend(vec![4; 3]);
        deg.push(8);
        let fit = degree_tail_fit(&DegreeDistribution::from_degrees(deg)).unwrap();
        assert!((fit.loglog_slope + 2.0).abs() < 1e-9);
        assert!((fit.exponent - 2.0).abs() < 1e-9);
    }

    #[test]
    fn tree_csv_round_trip() {
        let mut t = mst(&random_dist(6, 3)).unwrap();
        t.communities = Some(vec![0, 0, 1, 1, 2, 2]);
        t.sizes = vec![1.5, 2.0, 3.0, 4.0, 5.0, 6.0];
        let (mut e, mut n) = (Vec::new(), Vec::new());
        t.write_edges_csv(&mut e).unwrap();
        t.write_nodes_csv(&mut n).unwrap();
        assert!(e.starts_with(b"src,dst,distance,weight\n"));
        assert!(n.starts_with(b"id,size,community,degree\n"));
        let back = Tree::read_csv(&e[..], &n[..]).unwrap();
        assert_eq!(back.labels, t.labels);
        assert_eq!(back.edge_set(), t.edge_set());
        assert_eq!(back.communities, t.communities);
    }

    /// All set partitions of `0..n` as restricted-growth strings.
    fn partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
            if i == n {
                out.push(cur.clone());
                return;
            }
            for c in 0..=max + 1 {
                cur.push(c);
                rec(i + 1, n, cur, max.max(c), out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        let mut cur = vec![0];
        rec(1, n, &mut cur, 0, &mut out);
        out
    }

    fn best_partition(g: &WeightedGraph) -> f64 {
        partitions(g.node_count())
            .iter()
            .map(|p| modularity(g, p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn partition_enumeration_counts() {
        assert_eq!(partitions(4).len(), 15);
        assert_eq!(partitions(6).len(), 203);
    }

    #[test]
    fn two_stars_split_at_bridge() {
        let mut edges = Vec::new();
        for (center, leaves) in [(0usize, 1..5), (5, 6..10)] {
            for l in leaves {
                edges.push(Edge {
                    src: center,
                    dst: l,
                    distance: 0.1,
                });
            }
        }
        edges.push(Edge {
            src: 0,
            dst: 5,
            distance: 1.9,
        });
        let t = Tree {
            edges,
            ..path_tree(10)
        };
        let c = louvain_tree(&t).unwrap();
        assert_eq!(c.assignment, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert!(c.modularity >= best_partition(&WeightedGraph::from_tree(&t)) - 1e-12);
    }

    #[test]
    fn path_of_four_is_optimal() {
        let g = WeightedGraph::from_tree(&path_tree(4));
        let c = louvain(&g);
        assert!(c.modularity >= best_partition(&g) - 1e-12);
        assert_eq!(c.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn star_is_deterministic() {
        let star = Tree {
            edges: (1..7)
                .map(|i| Edge {
                    src: 0,
                    dst: i,
                    distance: 1.0,
                })
                .collect(),
            ..path_tree(7)
        };
        let a = louvain_tree(&star).unwrap();
        let b = louvain_tree(&star).unwrap();
        assert_eq!(a, b);
        assert!(a.modularity >= -1e-12);
    }

    #[test]
    fn louvain_on_random_small_graphs_is_reasonable() {
        for seed in 0..10 {
            let d = random_dist(7, seed + 100);
            let g = WeightedGraph::from_tree(&mst(&d).unwrap());
            let c = louvain(&g);
            assert!((c.modularity - modularity(&g, &c.assignment)).abs() < 1e-12);
            assert!(c.modularity <= best_partition(&g) + 1e-12);
            assert!(c.modularity > 0.0);
        }
    }

    #[test]
    fn no_single_node_move_improves_result() {
        for seed in 0..40 {
            let n = 5 + seed as usize % 20;
            let g = WeightedGraph::from_tree(&mst(&random_dist(n, seed + 300)).unwrap());
            let c = louvain(&g);
            for i in 0..n {
                // Every existing community plus a fresh one.
                for target in 0..=c.count() {
                    let mut moved = c.assignment.clone();
                    moved[i] = target;
                    assert!(
                        modularity(&g, &moved) <= c.modularity + 1e-12,
                        "seed {seed}: moving node {i} to {target} improves"
                    );
                }
            }
        }
    }

    #[test]
    fn full_graph_mode_splits_two_blocks() {
        let d = dist(8, |i, j| {
            if i == j {
                0.0
            } else if (i < 4) == (j < 4) {
                0.3
            } else {
                1.8
            }
        });
        let t = mst(&d).unwrap();
        let full = detect_communities(&t, &d, CommunityGraph::Full).unwrap();
        assert_eq!(full.assignment, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert!(full.modularity > 0.0);
        let on_tree = detect_communities(&t, &d, CommunityGraph::Tree).unwrap();
        assert_eq!(on_tree, louvain_tree(&t).unwrap());
    }

    #[test]
    fn louvain_rejects_nonpositive_weights() {
        let t = Tree {
            edges: vec![Edge {
                src: 0,
                dst: 1,
                distance: 2.0,
            }],
            ..path_tree(2)
        };
        assert!(louvain_tree(&t).is_err());
    }
}
