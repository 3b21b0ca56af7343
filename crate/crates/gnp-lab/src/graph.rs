//! Ground-truth machinery: explicit G(n,p) sampling, union-find component
//! sizes, and exhaustive small-n distribution enumeration. The exploration
//! engine is validated against everything in here.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::GnpParams;
use crate::rng::RngStream;

/// Simple undirected graph as a validated edge list, vertices 1..=n,
/// each edge stored once as (u, v) with u < v.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeList {
    n: u64,
    edges: Vec<(u64, u64)>,
}

impl EdgeList {
    pub fn new(n: u64, edges: Vec<(u64, u64)>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidVertexCount(n));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a < 1 || a > n || b < 1 || b > n {
                return Err(Error::EndpointOutOfRange(a, b, n));
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        for w in normalized.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        Ok(Self {
            n,
            edges: normalized,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn edges(&self) -> &[(u64, u64)] {
        &self.edges
    }

    /// Text format: first line "n m", then one "u v" line per edge, 1-indexed.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for &(u, v) in &self.edges {
            s.push_str(&format!("{} {}\n", u, v));
        }
        s
    }

    /// Parse the text format produced by [`EdgeList::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::EdgeListFormat("empty input".into()))?;
        let mut it = header.split_whitespace();
        let n: u64 = parse_field(it.next(), "n")?;
        let m: u64 = parse_field(it.next(), "m")?;
        let mut edges = Vec::with_capacity(m as usize);
        for line in lines {
            let mut it = line.split_whitespace();
            let u: u64 = parse_field(it.next(), "u")?;
            let v: u64 = parse_field(it.next(), "v")?;
            edges.push((u, v));
        }
        if edges.len() as u64 != m {
            return Err(Error::EdgeListFormat(format!(
                "header declares {} edges, found {}",
                m,
                edges.len()
            )));
        }
        Self::new(n, edges)
    }
}

fn parse_field(tok: Option<&str>, name: &str) -> Result<u64> {
    tok.ok_or_else(|| Error::EdgeListFormat(format!("missing field {name}")))?
        .parse()
        .map_err(|e| Error::EdgeListFormat(format!("field {name}: {e}")))
}

/// Sample an explicit G(n,p) by geometric skips over the colexicographic
/// pair index, expected time O(1 + p n(n-1)/2).
pub fn sample_gnp_explicit(params: &GnpParams, stream: &mut RngStream) -> EdgeList {
    let n = params.n();
    let p = params.p();
    let total = n * (n - 1) / 2;
    let mut edges = Vec::new();
    if p > 0.0 {
        let ln_q = (-p).ln_1p();
        let mut cursor = 0u64;
        loop {
            let gap = if p >= 1.0 {
                0.0
            } else {
                (stream.next_open01().ln() / ln_q).floor()
            };
            if gap >= (total - cursor) as f64 {
                break;
            }
            cursor += gap as u64;
            edges.push(pair_from_index(cursor));
            cursor += 1;
            if cursor == total {
                break;
            }
        }
    }
    EdgeList { n, edges }
}

/// Decode a colex pair index: pairs (u,v), u < v, ordered (1,2),(1,3),(2,3),...
/// Index of (u,v) is C(v-1, 2) + u - 1.
fn pair_from_index(i: u64) -> (u64, u64) {
    // w = v - 1 is the largest w with w(w-1)/2 <= i
    let mut w = ((1.0 + ((1 + 8 * i) as f64).sqrt()) / 2.0).floor() as u64;
    while w * (w - 1) / 2 > i {
        w -= 1;
    }
    while (w + 1) * w / 2 <= i {
        w += 1;
    }
    let u = i - w * (w - 1) / 2 + 1;
    (u, w + 1)
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        Self {
            parent: (0..len as u32).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    // union by size, so component sizes stay directly available
    fn union(&mut self, a: u32, b: u32) {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
    }
}

/// Exact connected-component sizes, sorted descending.
pub fn components_union_find(graph: &EdgeList) -> Vec<u64> {
    let n = graph.n() as usize;
    let mut uf = UnionFind::new(n);
    for &(u, v) in graph.edges() {
        uf.union((u - 1) as u32, (v - 1) as u32);
    }
    let mut sizes = Vec::new();
    for v in 0..n as u32 {
        if uf.find(v) == v {
            sizes.push(uf.size[v as usize] as u64);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Largest n accepted by [`exact_size_distribution`] (2^C(5,2) = 1024 graphs).
pub const ENUMERATION_LIMIT: u64 = 5;

/// Exact probability of each component-size multiset under G(n,p),
/// by enumeration of all 2^C(n,2) graphs.
#[derive(Clone, Debug)]
pub struct SizeDistribution {
    /// Size multiset (sorted descending) -> probability.
    pub entries: BTreeMap<Vec<u64>, f64>,
}

impl SizeDistribution {
    pub fn probability(&self, multiset_desc: &[u64]) -> f64 {
        self.entries.get(multiset_desc).copied().unwrap_or(0.0)
    }
}

/// Enumerate G(n,p) exactly for n <= [`ENUMERATION_LIMIT`].
pub fn exact_size_distribution(n: u64, p: f64) -> Result<SizeDistribution> {
    if n < 1 {
        return Err(Error::InvalidVertexCount(n));
    }
    if n > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            n,
            limit: ENUMERATION_LIMIT,
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let m = (n * (n - 1) / 2) as u32;
    let pairs: Vec<(u64, u64)> = (0..m as u64).map(pair_from_index).collect();
    let mut entries: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for mask in 0u32..(1u32 << m) {
        let k = mask.count_ones();
        let weight = p.powi(k as i32) * (1.0 - p).powi((m - k) as i32);
        if weight == 0.0 {
            continue;
        }
        let mut uf = UnionFind::new(n as usize);
        for (bit, &(u, v)) in pairs.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                uf.union((u - 1) as u32, (v - 1) as u32);
            }
        }
        let mut sizes = Vec::new();
        for v in 0..n as u32 {
            if uf.find(v) == v {
                sizes.push(uf.size[v as usize] as u64);
            }
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        *entries.entry(sizes).or_insert(0.0) += weight;
    }
    Ok(SizeDistribution { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn degenerate_sampling() {
        let mut s = derive_stream(11, 0);
        let empty = sample_gnp_explicit(&GnpParams::new(5, 0.0).unwrap(), &mut s);
        assert!(empty.edges().is_empty());
        let full = sample_gnp_explicit(&GnpParams::new(5, 1.0).unwrap(), &mut s);
        assert_eq!(full.edges().len(), 10);
    }

    #[test]
    fn pair_index_round_trip() {
        // colex order starts (1,2), (1,3), (2,3), (1,4), ...
        assert_eq!(pair_from_index(0), (1, 2));
        assert_eq!(pair_from_index(1), (1, 3));
        assert_eq!(pair_from_index(2), (2, 3));
        assert_eq!(pair_from_index(3), (1, 4));
        let mut i = 0u64;
        for v in 2..=60u64 {
            for u in 1..v {
                assert_eq!(pair_from_index(i), (u, v));
                i += 1;
            }
        }
    }

    #[test]
    fn union_find_small_graphs() {
        let g = EdgeList::new(3, vec![(1, 2), (2, 3)]).unwrap();
        assert_eq!(components_union_find(&g), vec![3]);
        let g = EdgeList::new(4, vec![(1, 2)]).unwrap();
        assert_eq!(components_union_find(&g), vec![2, 1, 1]);
        let g = EdgeList::new(6, vec![(1, 2), (2, 3), (4, 5)]).unwrap();
        assert_eq!(components_union_find(&g), vec![3, 2, 1]);
    }

    #[test]
    fn edge_list_validation() {
        assert!(matches!(
            EdgeList::new(3, vec![(1, 1)]),
            Err(Error::SelfLoop(1))
        ));
        assert!(matches!(
            EdgeList::new(3, vec![(1, 2), (2, 1)]),
            Err(Error::DuplicateEdge(1, 2))
        ));
        assert!(matches!(
            EdgeList::new(3, vec![(0, 2)]),
            Err(Error::EndpointOutOfRange(0, 2, 3))
        ));
    }

    #[test]
    fn text_format_round_trip() {
        let g = EdgeList::new(4, vec![(3, 1), (2, 4)]).unwrap();
        let text = g.to_text();
        assert_eq!(text, "4 2\n1 3\n2 4\n");
        assert_eq!(EdgeList::from_text(&text).unwrap(), g);
        assert!(EdgeList::from_text("").is_err());
        assert!(EdgeList::from_text("3 2\n1 2\n").is_err());
    }

    #[test]
    fn exact_distribution_n2() {
        let d = exact_size_distribution(2, 0.5).unwrap();
        assert!((d.probability(&[2]) - 0.5).abs() < 1e-15);
        assert!((d.probability(&[1, 1]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_distribution_n3() {
        let d = exact_size_distribution(3, 0.5).unwrap();
        assert!((d.probability(&[1, 1, 1]) - 1.0 / 8.0).abs() < 1e-15);
        assert!((d.probability(&[2, 1]) - 3.0 / 8.0).abs() < 1e-15);
        assert!((d.probability(&[3]) - 4.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn exact_distribution_edge_cases() {
        let d = exact_size_distribution(3, 0.0).unwrap();
        assert!((d.probability(&[1, 1, 1]) - 1.0).abs() < 1e-15);
        assert!(exact_size_distribution(6, 0.5).is_err());
    }

    #[test]
    fn exact_distribution_sums_to_one() {
        for n in 1..=5u64 {
            for &p in &[0.0, 0.2, 0.5, 0.8, 1.0] {
                let d = exact_size_distribution(n, p).unwrap();
                let total: f64 = d.entries.values().sum();
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "n={n} p={p}: sum = {total}"
                );
                for sizes in d.entries.keys() {
                    assert_eq!(sizes.iter().sum::<u64>(), n);
                }
            }
        }
    }
}
