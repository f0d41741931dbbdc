//! Undirected labeled graphs, the free-element index set of a graph and
//! vertex relabelings.
//!
//! Vertices are 0-based in the API; the text formats read and write 1-based
//! labels.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// An undirected graph on `p` labeled vertices without self-loops.
///
/// Edges are stored canonically as `(i, j)` with `i < j`, sorted
/// lexicographically. Equality and hashing are on the labeled edge set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    p: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<bool>,
}

impl Graph {
    pub fn empty(p: usize) -> Self {
        assert!(p >= 1, "a graph needs at least one vertex");
        Graph {
            p,
            edges: Vec::new(),
            adj: vec![false; p * p],
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut edges = Vec::with_capacity(p * (p - 1) / 2);
        for i in 0..p {
            for j in (i + 1)..p {
                edges.push((i, j));
            }
        }
        Self::from_edges(p, &edges).expect("complete graph is valid")
    }

    /// Cycle `0 - 1 - ... - (p-1) - 0`.
    pub fn cycle(p: usize) -> Self {
        assert!(p >= 3, "a cycle needs at least three vertices");
        let mut edges: Vec<_> = (0..p - 1).map(|i| (i, i + 1)).collect();
        edges.push((0, p - 1));
        Self::from_edges(p, &edges).expect("cycle is valid")
    }

    /// Builds a graph from 0-based vertex pairs in any orientation.
    /// Duplicate pairs are merged.
    pub fn from_edges(p: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidGraph("graph must have at least one vertex".into()));
        }
        let mut g = Graph::empty(p);
        for &(a, b) in pairs {
            if a >= p || b >= p {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) references a vertex outside 1..={p}",
                    a + 1,
                    b + 1
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {}", a + 1)));
            }
            g.adj[a * p + b] = true;
            g.adj[b * p + a] = true;
        }
        g.rebuild_edges();
        Ok(g)
    }

    fn rebuild_edges(&mut self) {
        self.edges.clear();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.adj[i * self.p + j] {
                    self.edges.push((i, j));
                }
            }
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Edges `(i, j)`, `i < j`, in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of vertex pairs, `p(p-1)/2`.
    pub fn n_pairs(&self) -> usize {
        self.p * (self.p - 1) / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adj[i * self.p + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.p).filter(|&j| self.has_edge(i, j)).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&j| self.has_edge(i, j))
    }

    /// Size of the free-element set: `p + |E|`.
    pub fn n_free(&self) -> usize {
        self.p + self.edges.len()
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n_pairs()
    }

    pub fn with_edge(&self, i: usize, j: usize) -> Graph {
        let mut g = self.clone();
        g.adj[i * self.p + j] = true;
        g.adj[j * self.p + i] = true;
        g.rebuild_edges();
        g
    }

    pub fn without_edge(&self, i: usize, j: usize) -> Graph {
        let mut g = self.clone();
        g.adj[i * self.p + j] = false;
        g.adj[j * self.p + i] = false;
        g.rebuild_edges();
        g
    }

    /// Vertex pairs `(i, j)`, `i < j`, that are not edges, in lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_pairs() - self.n_edges());
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if !self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Number of connected components.
    pub fn n_components(&self) -> usize {
        let mut seen = vec![false; self.p];
        let mut count = 0;
        for start in 0..self.p {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    /// Parses a 1-based whitespace-separated edge list. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse_edge_list(text: &str, p: usize) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    path: "<edge list>".into(),
                    line: lineno + 1,
                    msg: format!("expected two vertex labels, found {}", fields.len()),
                });
            }
            let mut ends = [0usize; 2];
            for (slot, f) in ends.iter_mut().zip(&fields) {
                let v: usize = f.parse().map_err(|_| Error::Parse {
                    path: "<edge list>".into(),
                    line: lineno + 1,
                    msg: format!("vertex label {f:?} is not a positive integer"),
                })?;
                if v == 0 || v > p {
                    return Err(Error::InvalidGraph(format!(
                        "line {}: vertex {v} outside 1..={p}",
                        lineno + 1
                    )));
                }
                *slot = v - 1;
            }
            pairs.push((ends[0], ends[1]));
        }
        Graph::from_edges(p, &pairs)
    }

    pub fn read_edge_list(path: &Path, p: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::parse_edge_list(&text, p).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                msg,
            },
            other => other,
        })
    }

    /// Largest vertex label mentioned in a 1-based edge list, used when the
    /// vertex count is not given explicitly.
    pub fn max_label_in_edge_list(text: &str) -> usize {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .flat_map(|l| l.split_whitespace().filter_map(|f| f.parse::<usize>().ok()))
            .max()
            .unwrap_or(0)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges
            .iter()
            .map(|(i, j)| format!("{} {}\n", i + 1, j + 1))
            .collect()
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(p={}, ", self.p)?;
        f.debug_list()
            .entries(self.edges.iter().map(|(i, j)| (i + 1, j + 1)))
            .finish()?;
        write!(f, ")")
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (i, j)) in self.edges.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}-{}", i + 1, j + 1)?;
        }
        write!(f, "}}")
    }
}

/// The free positions of the upper-triangular factor for a graph under its
/// current labeling: the diagonal plus every edge `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeIndexSet {
    /// Lexicographically ordered positions.
    pub pairs: Vec<(usize, usize)>,
    /// `v[i]`: neighbors of `i` with a larger label.
    pub v: Vec<usize>,
    /// `d[i]`: neighbors of `i` with a smaller label.
    pub d: Vec<usize>,
}

pub fn free_index_set(g: &Graph) -> FreeIndexSet {
    let p = g.p();
    let mut pairs = Vec::with_capacity(g.n_free());
    let mut v = vec![0; p];
    let mut d = vec![0; p];
    for i in 0..p {
        pairs.push((i, i));
        for j in (i + 1)..p {
            if g.has_edge(i, j) {
                pairs.push((i, j));
                v[i] += 1;
                d[j] += 1;
            }
        }
    }
    FreeIndexSet { pairs, v, d }
}

/// Candidate one-edge moves out of `g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    /// Absent pairs; adding one yields a graph in the add-neighborhood.
    pub add: Vec<(usize, usize)>,
    /// Present edges; removing one yields a graph in the delete-neighborhood.
    pub delete: Vec<(usize, usize)>,
}

pub fn neighborhoods(g: &Graph) -> Neighborhoods {
    Neighborhoods {
        add: g.non_edges(),
        delete: g.edges().to_vec(),
    }
}

/// A relabeling of the vertex set: vertex `i` becomes vertex `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexOrdering {
    perm: Vec<usize>,
}

impl VertexOrdering {
    pub fn identity(p: usize) -> Self {
        VertexOrdering { perm: (0..p).collect() }
    }

    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let p = perm.len();
        let mut seen = vec![false; p];
        for &x in &perm {
            if x >= p || seen[x] {
                return Err(Error::InvalidParameter(format!(
                    "{perm:?} is not a permutation of 0..{p}"
                )));
            }
            seen[x] = true;
        }
        Ok(VertexOrdering { perm })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// New label of old vertex `i`.
    pub fn map(&self, i: usize) -> usize {
        self.perm[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &j) in self.perm.iter().enumerate() {
            inv[j] = i;
        }
        VertexOrdering { perm: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &j)| i == j)
    }
}

/// Draws a uniform random relabeling. With `fix_first` the draw is uniform
/// over relabelings that keep vertex 0 in place.
pub fn random_ordering<R: Rng + ?Sized>(p: usize, fix_first: bool, rng: &mut R) -> VertexOrdering {
    let mut perm: Vec<usize> = (0..p).collect();
    if fix_first {
        if p > 1 {
            perm[1..].shuffle(rng);
        }
    } else {
        perm.shuffle(rng);
    }
    VertexOrdering { perm }
}

/// Maps every edge `(i, j)` to `(ord(i), ord(j))`.
pub fn relabel(g: &Graph, ord: &VertexOrdering) -> Result<Graph> {
    if ord.len() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            found: ord.len(),
        });
    }
    let pairs: Vec<_> = g.edges().iter().map(|&(i, j)| (ord.map(i), ord.map(j))).collect();
    Graph::from_edges(g.p(), &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c4() -> Graph {
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    #[test]
    fn free_index_set_of_four_cycle() {
        let f = free_index_set(&c4());
        assert_eq!(
            f.pairs,
            vec![(0, 0), (0, 1), (0, 3), (1, 1), (1, 2), (2, 2), (2, 3), (3, 3)]
        );
        assert_eq!(f.v, vec![2, 1, 1, 0]);
        assert_eq!(f.d, vec![0, 1, 1, 2]);
    }

    #[test]
    fn free_index_set_empty_and_complete() {
        let f = free_index_set(&Graph::empty(3));
        assert_eq!(f.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(f.v, vec![0, 0, 0]);
        assert_eq!(f.d, vec![0, 0, 0]);

        let f = free_index_set(&Graph::complete(3));
        assert_eq!(f.pairs.len(), 6);
        assert_eq!(f.v, vec![2, 1, 0]);
        assert_eq!(f.d, vec![0, 1, 2]);
    }

    #[test]
    fn neighborhood_sizes() {
        let n = neighborhoods(&c4());
        assert_eq!(n.add, vec![(0, 2), (1, 3)]);
        assert_eq!(n.delete.len(), 4);

        let n = neighborhoods(&Graph::complete(4));
        assert_eq!((n.add.len(), n.delete.len()), (0, 6));
        let n = neighborhoods(&Graph::empty(4));
        assert_eq!((n.add.len(), n.delete.len()), (6, 0));
    }

    #[test]
    fn single_vertex_ordering_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for fix in [false, true] {
            assert!(random_ordering(1, fix, &mut rng).is_identity());
        }
    }

    #[test]
    fn fixed_first_orderings_are_uniform_over_completions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000;
        let mut swapped = 0;
        for _ in 0..draws {
            let o = random_ordering(3, true, &mut rng);
            assert_eq!(o.map(0), 0);
            if o.map(1) == 2 {
                swapped += 1;
            }
        }
        let freq = swapped as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }

    #[test]
    fn orderings_are_uniform_over_all_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            let o = random_ordering(4, false, &mut rng);
            *counts.entry(o.as_slice().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = draws as f64 / 24.0;
        let mut chi2 = 0.0;
        for &c in counts.values() {
            let f = c as f64 / draws as f64;
            assert!((f - 1.0 / 24.0).abs() < 0.01);
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 23 degrees of freedom, 0.999 quantile is about 49.7.
        assert!(chi2 < 49.7, "chi2 {chi2}");
    }

    #[test]
    fn relabel_examples() {
        let id = VertexOrdering::identity(4);
        assert_eq!(relabel(&c4(), &id).unwrap(), c4());

        // 1->2, 2->3, 3->4, 4->1 keeps the cycle.
        let rot = VertexOrdering::from_perm(vec![1, 2, 3, 0]).unwrap();
        let g = relabel(&c4(), &rot).unwrap();
        assert_eq!(g.n_edges(), 4);
        assert!((0..4).all(|v| g.degree(v) == 2));

        // path 1-2-3 under (3,1,2): edge 12 -> 31, edge 23 -> 12.
        let path = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let ord = VertexOrdering::from_perm(vec![2, 0, 1]).unwrap();
        let g = relabel(&path, &ord).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn relabel_rejects_size_mismatch() {
        let ord = VertexOrdering::identity(3);
        assert!(matches!(relabel(&c4(), &ord), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn edge_list_parsing() {
        let text = "# a square\n1 2\n\n2 3\n3 4\n4 1\n";
        let g = Graph::parse_edge_list(text, 4).unwrap();
        assert_eq!(g, c4());
        assert_eq!(Graph::max_label_in_edge_list(text), 4);
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list(), 4).unwrap(), g);
        assert!(Graph::parse_edge_list("1 1\n", 3).is_err());
        assert!(Graph::parse_edge_list("1 5\n", 3).is_err());
        assert!(Graph::parse_edge_list("1 2 3\n", 3).is_err());
    }

    #[test]
    fn components() {
        assert_eq!(Graph::empty(3).n_components(), 3);
        assert_eq!(c4().n_components(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = Graph> {
            (1usize..9).prop_flat_map(|p| {
                proptest::collection::vec(any::<bool>(), p * (p - 1) / 2).prop_map(move |bits| {
                    let mut pairs = Vec::new();
                    let mut k = 0;
                    for i in 0..p {
                        for j in (i + 1)..p {
                            if bits[k] {
                                pairs.push((i, j));
                            }
                            k += 1;
                        }
                    }
                    Graph::from_edges(p, &pairs).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn counts_partition_degrees(g in arb_graph()) {
                let f = free_index_set(&g);
                prop_assert_eq!(f.pairs.len(), g.p() + g.n_edges());
                for i in 0..g.p() {
                    prop_assert_eq!(f.v[i] + f.d[i], g.degree(i));
                }
                prop_assert_eq!(f.v.iter().sum::<usize>(), g.n_edges());
                prop_assert_eq!(f.d.iter().sum::<usize>(), g.n_edges());
            }

            #[test]
            fn neighborhoods_partition_pairs(g in arb_graph()) {
                let n = neighborhoods(&g);
                prop_assert_eq!(n.add.len() + n.delete.len(), g.n_pairs());
                for &(i, j) in &n.add { prop_assert!(!g.has_edge(i, j)); }
                for &(i, j) in &n.delete { prop_assert!(g.has_edge(i, j)); }
            }

            #[test]
            fn relabel_round_trips(g in arb_graph(), seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ord = random_ordering(g.p(), false, &mut rng);
                let h = relabel(&g, &ord).unwrap();
                prop_assert_eq!(free_index_set(&h).pairs.len(), free_index_set(&g).pairs.len());
                prop_assert_eq!(relabel(&h, &ord.inverse()).unwrap(), g);
            }
        }
    }
}
