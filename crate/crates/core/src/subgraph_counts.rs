//! Exact subgraph counts on a graph snapshot, and the combinatorial
//! coefficients used by the cross-moment formulas.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Largest supported vertex count; each adjacency row is one `u64`.
pub const MAX_VERTICES: usize = 64;

/// A subgraph statistic tracked over time.
///
/// Serialized as `"edges"`, `"K<l>"` (complete graph on `l` vertices) or
/// `"S<l>"` (star with `l - 1` leaves).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SubgraphKind {
    Edges,
    Complete(usize),
    Stars(usize),
}

impl SubgraphKind {
    /// Number of vertices the pattern spans.
    pub fn order(&self) -> usize {
        match *self {
            SubgraphKind::Edges => 2,
            SubgraphKind::Complete(l) | SubgraphKind::Stars(l) => l,
        }
    }

    /// `K2` and `S2` are edges; this folds them onto [`SubgraphKind::Edges`].
    pub fn canonical(self) -> SubgraphKind {
        match self {
            SubgraphKind::Complete(2) | SubgraphKind::Stars(2) => SubgraphKind::Edges,
            k => k,
        }
    }

    pub fn count(&self, a: &AdjacencySnapshot) -> u64 {
        match *self {
            SubgraphKind::Edges => count_edges(a),
            SubgraphKind::Complete(l) => count_complete(a, l),
            SubgraphKind::Stars(l) => count_stars(a, l),
        }
    }
}

impl fmt::Display for SubgraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgraphKind::Edges => f.write_str("edges"),
            SubgraphKind::Complete(l) => write!(f, "K{l}"),
            SubgraphKind::Stars(l) => write!(f, "S{l}"),
        }
    }
}

impl FromStr for SubgraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("edges") || s.eq_ignore_ascii_case("A") {
            return Ok(SubgraphKind::Edges);
        }
        let (head, tail) = s.split_at(s.char_indices().nth(1).map_or(s.len(), |(i, _)| i));
        let l: usize = tail
            .parse()
            .map_err(|_| format!("unknown subgraph kind `{s}` (expected edges, K<l> or S<l>)"))?;
        if l < 2 {
            return Err(format!("subgraph `{s}` needs at least 2 vertices"));
        }
        match head {
            "K" | "k" => Ok(SubgraphKind::Complete(l)),
            "S" | "s" => Ok(SubgraphKind::Stars(l)),
            _ => Err(format!("unknown subgraph kind `{s}` (expected edges, K<l> or S<l>)")),
        }
    }
}

impl TryFrom<String> for SubgraphKind {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SubgraphKind> for String {
    fn from(k: SubgraphKind) -> String {
        k.to_string()
    }
}

/// Undirected simple graph on `n` vertices stored as adjacency bit rows.
///
/// The external edge order is lexicographic over pairs `(j1, j2)`, `j1 < j2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencySnapshot {
    n: usize,
    rows: Vec<u64>,
}

impl AdjacencySnapshot {
    pub fn empty(n: usize) -> Self {
        assert!(
            (1..=MAX_VERTICES).contains(&n),
            "vertex count {n} outside 1..={MAX_VERTICES}"
        );
        AdjacencySnapshot { n, rows: vec![0; n] }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        let all = a.vertex_mask();
        for (v, row) in a.rows.iter_mut().enumerate() {
            *row = all & !(1u64 << v);
        }
        a
    }

    /// Builds a snapshot from one flag per lexicographic pair.
    pub fn from_pair_bits(n: usize, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), pair_count(n), "expected C({n}, 2) pair flags");
        let mut a = Self::empty(n);
        for (e, &on) in bits.iter().enumerate() {
            if on {
                let (u, v) = pair_of_index(n, e);
                a.set(u, v, true);
            }
        }
        a
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    fn vertex_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.rows[u] >> v & 1 == 1
    }

    pub fn set(&mut self, u: usize, v: usize, on: bool) {
        assert!(u != v && u < self.n && v < self.n, "invalid pair ({u}, {v})");
        if on {
            self.rows[u] |= 1 << v;
            self.rows[v] |= 1 << u;
        } else {
            self.rows[u] &= !(1 << v);
            self.rows[v] &= !(1 << u);
        }
    }

    pub fn degree(&self, v: usize) -> u32 {
        self.rows[v].count_ones()
    }

    /// One flag per lexicographic pair.
    pub fn pair_bits(&self) -> Vec<bool> {
        (0..pair_count(self.n))
            .map(|e| {
                let (u, v) = pair_of_index(self.n, e);
                self.has_edge(u, v)
            })
            .collect()
    }
}

/// `C(n, 2)`.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Lexicographic index of the pair `(u, v)` with `u < v`.
pub fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

/// Inverse of [`pair_index`].
pub fn pair_of_index(n: usize, mut e: usize) -> (usize, usize) {
    for u in 0..n {
        let row = n - u - 1;
        if e < row {
            return (u, u + 1 + e);
        }
        e -= row;
    }
    panic!("pair index out of range for n = {n}");
}

/// All lexicographic pairs in order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |u| (u + 1..n).map(move |v| (u, v)))
}

pub fn count_edges(a: &AdjacencySnapshot) -> u64 {
    a.rows.iter().map(|r| u64::from(r.count_ones())).sum::<u64>() / 2
}

/// Number of vertex subsets of size `l` that induce a complete graph.
pub fn count_complete(a: &AdjacencySnapshot, l: usize) -> u64 {
    assert!(l >= 2, "complete subgraphs need at least 2 vertices");
    match l {
        2 => count_edges(a),
        3 => {
            let mut total = 0u64;
            for u in 0..a.n {
                let mut nbrs = a.rows[u] & above(u);
                while nbrs != 0 {
                    let v = nbrs.trailing_zeros() as usize;
                    nbrs &= nbrs - 1;
                    total += u64::from((a.rows[u] & a.rows[v] & above(v)).count_ones());
                }
            }
            total
        }
        _ if l > a.n => 0,
        _ => extend_cliques(&a.rows, a.vertex_mask(), l),
    }
}

fn above(v: usize) -> u64 {
    if v >= 63 {
        0
    } else {
        !0u64 << (v + 1)
    }
}

// Candidates are always vertices above the last chosen one and adjacent to all
// chosen ones, so every clique is generated once in increasing order.
fn extend_cliques(rows: &[u64], candidates: u64, remaining: usize) -> u64 {
    if remaining == 1 {
        return u64::from(candidates.count_ones());
    }
    if (candidates.count_ones() as usize) < remaining {
        return 0;
    }
    let mut total = 0u64;
    let mut c = candidates;
    while c != 0 {
        let v = c.trailing_zeros() as usize;
        c &= c - 1;
        total = total
            .checked_add(extend_cliques(rows, c & rows[v], remaining - 1))
            .expect("clique count overflows u64");
    }
    total
}

/// Number of `l`-stars, `sum_v C(deg v, l - 1)`. Two-stars are edges and are
/// counted once each, so `count_stars(a, 2) == count_edges(a)`.
pub fn count_stars(a: &AdjacencySnapshot, l: usize) -> u64 {
    assert!(l >= 2, "stars need at least 2 vertices");
    if l == 2 {
        return count_edges(a);
    }
    let total: u128 = (0..a.n)
        .map(|v| binomial(u64::from(a.degree(v)), (l - 1) as u64))
        .sum();
    u64::try_from(total).expect("star count overflows u64")
}

/// Exact binomial coefficient; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r
            .checked_mul(u128::from(n - i))
            .expect("binomial overflows u128")
            / u128::from(i + 1);
    }
    r
}

/// Number of ordered pairs of `l`-subsets of `{1..n}` sharing exactly `m`
/// vertices: `C(n, l) C(n - l, l - m) C(l, m)`.
pub fn a_coeff(n: u64, l: u64, m: u64) -> u128 {
    if m > l || l > n {
        return 0;
    }
    binomial(n, l)
        .checked_mul(binomial(n - l, l - m))
        .and_then(|x| x.checked_mul(binomial(l, m)))
        .expect("a-coefficient overflows u128")
}

/// Number of edges of a complete graph on `l` vertices, `C(l, 2)`; zero for
/// `l < 2`.
pub fn edges_in_clique(l: u64) -> u64 {
    l * l.saturating_sub(1) / 2
}

/// One line of the star overlap table: `cases` center choices (out of `l^2`)
/// for which two stars sharing `m` vertices have `common_edges` edges in
/// common.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub common_edges: u64,
    pub cases: u64,
}

/// Common-edge distribution over center choices for two `l`-stars on vertex
/// sets sharing `m` vertices. Rows with equal edge counts are merged, empty
/// rows dropped, sorted by `common_edges`.
pub fn star_overlap_table(l: u64, m: u64) -> Vec<OverlapRow> {
    assert!(m <= l, "shared vertices {m} exceed star order {l}");
    // neither center shared, or exactly one shared: no common edge
    let disjoint = (l + m) * (l - m);
    // both centers shared but distinct: the edge joining them
    let crossed = m * m.saturating_sub(1);
    // same center: edges from it to the other m - 1 shared vertices
    let same = m;
    let mut rows: Vec<OverlapRow> = Vec::new();
    for (edges, cases) in [(0, disjoint), (1, crossed), (m.saturating_sub(1), same)] {
        if cases == 0 {
            continue;
        }
        match rows.iter_mut().find(|r| r.common_edges == edges) {
            Some(r) => r.cases += cases,
            None => rows.push(OverlapRow {
                common_edges: edges,
                cases,
            }),
        }
    }
    rows.sort_by_key(|r| r.common_edges);
    rows
}
