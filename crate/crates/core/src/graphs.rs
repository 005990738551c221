//! Finite graphs on integer intervals and the cut/corank combinatorics of
//! two-sided volumes.
//!
//! Vertices live on `[lo, hi)`; edges are unordered pairs stored normalised.
//! A two-sided graph splits into `G_plus` (both endpoints `>= 0`), `G_minus`
//! (both `< 0`) and the crossing set `H`.  The quotient statistics `R_n`
//! (corank of `H` after merging `[0, n)` together with the non-crossing
//! clusters), its limit `R`, and the frontier/stabilisation index `N` drive
//! the two-sided factorisation and its convergence rates.

use crate::{Error, Result};
use std::collections::HashMap;

/// Union-find over `0..n` with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    count: u32,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            count: n as u32,
        }
    }

    /// Reset to all-singletons without reallocating.
    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.fill(1);
        self.count = self.parent.len() as u32;
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    /// Returns true when the two elements were in different sets.
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        self.count -= 1;
        true
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn size_of(&mut self, x: u32) -> u32 {
        let r = self.find(x);
        self.size[r as usize]
    }
}

/// Simple graph on the vertex interval `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGraph {
    lo: i64,
    hi: i64,
    edges: Vec<(i64, i64)>,
}

impl FiniteGraph {
    pub fn new(lo: i64, hi: i64, edges: Vec<(i64, i64)>) -> Result<Self> {
        if lo > hi {
            return Err(Error::BadVolume(format!("[{lo}, {hi})")));
        }
        let mut norm = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::Invalid(format!("self-loop at {a}")));
            }
            for v in [a, b] {
                if v < lo || v >= hi {
                    return Err(Error::VertexOutsideVolume(v));
                }
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Self {
            lo,
            hi,
            edges: norm,
        })
    }

    pub fn empty(lo: i64, hi: i64) -> Result<Self> {
        Self::new(lo, hi, vec![])
    }

    /// Subgraph of `candidates` selected by the bits of `mask`.
    pub fn from_mask(lo: i64, hi: i64, candidates: &[(i64, i64)], mask: u64) -> Result<Self> {
        let edges = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, e)| *e)
            .collect();
        Self::new(lo, hi, edges)
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn num_vertices(&self) -> usize {
        (self.hi - self.lo) as usize
    }

    pub fn edges(&self) -> &[(i64, i64)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    fn offset(&self, v: i64) -> u32 {
        (v - self.lo) as u32
    }

    fn union_find(&self) -> UnionFind {
        let mut uf = UnionFind::new(self.num_vertices());
        for &(a, b) in &self.edges {
            uf.union(self.offset(a), self.offset(b));
        }
        uf
    }

    /// Cluster partition with deterministic labels (smallest member vertex).
    pub fn clusters(&self) -> ClusterPartition {
        let mut uf = self.union_find();
        let n = self.num_vertices();
        let mut label_of_root: Vec<i64> = vec![i64::MAX; n];
        let mut label = vec![0i64; n];
        let mut sizes: HashMap<i64, u32> = HashMap::new();
        for off in 0..n as u32 {
            let v = self.lo + off as i64;
            let root = uf.find(off) as usize;
            if label_of_root[root] == i64::MAX {
                label_of_root[root] = v;
            }
            label[off as usize] = label_of_root[root];
            *sizes.entry(label_of_root[root]).or_insert(0) += 1;
        }
        ClusterPartition {
            lo: self.lo,
            label,
            sizes,
        }
    }

    /// `(rank, corank) = (|V| - w, |E| - |V| + w)`.
    pub fn rank_corank(&self) -> (u32, u32) {
        let w = self.union_find().count();
        let v = self.num_vertices() as u32;
        let e = self.edges.len() as u32;
        (v - w, e + w - v)
    }

    /// Cluster count after merging every vertex outside `[lambda_lo,
    /// lambda_hi)` into a single boundary class.  With nothing outside this
    /// is the plain cluster count (contracting an empty set changes nothing).
    pub fn wired_cluster_count(&self, lambda_lo: i64, lambda_hi: i64) -> u32 {
        let mut uf = UnionFind::new(self.num_vertices());
        let mut boundary: Option<u32> = None;
        for off in 0..self.num_vertices() as u32 {
            let v = self.lo + off as i64;
            if v < lambda_lo || v >= lambda_hi {
                match boundary {
                    None => boundary = Some(off),
                    Some(b) => {
                        uf.union(b, off);
                    }
                }
            }
        }
        for &(a, b) in &self.edges {
            uf.union(self.offset(a), self.offset(b));
        }
        uf.count()
    }

    /// Number of clusters meeting the finite site set `F`.
    pub fn count_wf(&self, f: &[i64]) -> Result<u32> {
        let mut uf = self.union_find();
        let mut roots: Vec<u32> = Vec::with_capacity(f.len());
        for &v in f {
            if v < self.lo || v >= self.hi {
                return Err(Error::VertexOutsideVolume(v));
            }
            roots.push(uf.find(self.offset(v)));
        }
        roots.sort_unstable();
        roots.dedup();
        Ok(roots.len() as u32)
    }

    /// Compatibility indicator: true when no cluster carries two cylinder
    /// sites of opposite spin.  The cylinder is a list of `(site, spin)`.
    pub fn compatibility_b(&self, cylinder: &[(i64, i8)]) -> Result<bool> {
        let mut uf = self.union_find();
        let mut spin_of_root: HashMap<u32, i8> = HashMap::new();
        for &(v, s) in cylinder {
            if v < self.lo || v >= self.hi {
                return Err(Error::VertexOutsideVolume(v));
            }
            if s != 1 && s != -1 {
                return Err(Error::BadSymbol(s));
            }
            let root = uf.find(self.offset(v));
            match spin_of_root.entry(root) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    if *e.get() != s {
                        return Ok(false);
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(s);
                }
            }
        }
        Ok(true)
    }

    /// Contract the given disjoint vertex classes; unlisted vertices remain
    /// singleton classes.  Loops and multi-edges are kept.
    pub fn contract(&self, classes: &[Vec<i64>]) -> Result<ContractedGraph> {
        let n = self.num_vertices();
        let mut class_of: Vec<u32> = vec![u32::MAX; n];
        let mut next = 0u32;
        for class in classes {
            if class.is_empty() {
                continue;
            }
            for &v in class {
                if v < self.lo || v >= self.hi {
                    return Err(Error::VertexOutsideVolume(v));
                }
                let off = self.offset(v) as usize;
                if class_of[off] != u32::MAX {
                    return Err(Error::Invalid(format!("vertex {v} in two classes")));
                }
                class_of[off] = next;
            }
            next += 1;
        }
        for c in class_of.iter_mut() {
            if *c == u32::MAX {
                *c = next;
                next += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (ca, cb) = (
                    class_of[self.offset(a) as usize],
                    class_of[self.offset(b) as usize],
                );
                (ca.min(cb), ca.max(cb))
            })
            .collect();
        Ok(ContractedGraph {
            num_classes: next,
            edges,
        })
    }

    /// Edge-list serialisation: a `# vertices lo hi` header then `i,j` lines.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# vertices {} {}\n", self.lo, self.hi);
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a},{b}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Invalid("empty csv".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "#" || parts[1] != "vertices" {
            return Err(Error::Invalid(format!("bad header: {header}")));
        }
        let lo: i64 = parts[2]
            .parse()
            .map_err(|_| Error::Invalid(format!("bad lo: {}", parts[2])))?;
        let hi: i64 = parts[3]
            .parse()
            .map_err(|_| Error::Invalid(format!("bad hi: {}", parts[3])))?;
        let mut edges = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::Invalid(format!("bad edge line: {line}")))?;
            edges.push((
                a.trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad vertex: {a}")))?,
                b.trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad vertex: {b}")))?,
            ));
        }
        Self::new(lo, hi, edges)
    }
}

/// Cluster partition of a [`FiniteGraph`], labels being smallest members.
#[derive(Clone, Debug)]
pub struct ClusterPartition {
    lo: i64,
    label: Vec<i64>,
    sizes: HashMap<i64, u32>,
}

impl ClusterPartition {
    pub fn label_of(&self, v: i64) -> i64 {
        self.label[(v - self.lo) as usize]
    }

    pub fn size_of(&self, v: i64) -> u32 {
        self.sizes[&self.label_of(v)]
    }

    pub fn count(&self) -> u32 {
        self.sizes.len() as u32
    }

    pub fn largest(&self) -> u32 {
        self.sizes.values().copied().max().unwrap_or(0)
    }

    /// Sorted vertex list of the cluster containing `v`.
    pub fn members_of(&self, v: i64) -> Vec<i64> {
        let l = self.label_of(v);
        (0..self.label.len())
            .filter(|&off| self.label[off] == l)
            .map(|off| self.lo + off as i64)
            .collect()
    }

    /// Labels (smallest members) of all clusters, ascending.
    pub fn labels(&self) -> Vec<i64> {
        let mut ls: Vec<i64> = self.sizes.keys().copied().collect();
        ls.sort_unstable();
        ls
    }
}

/// Multigraph produced by [`FiniteGraph::contract`].
#[derive(Clone, Debug)]
pub struct ContractedGraph {
    num_classes: u32,
    edges: Vec<(u32, u32)>,
}

impl ContractedGraph {
    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn cluster_count(&self) -> u32 {
        let mut uf = UnionFind::new(self.num_classes as usize);
        for &(a, b) in &self.edges {
            if a != b {
                uf.union(a, b);
            }
        }
        uf.count()
    }

    /// `|E| - |V| + w`; loops and parallel edges each add one.
    pub fn corank(&self) -> u32 {
        self.edges.len() as u32 + self.cluster_count() - self.num_classes
    }
}

/// Two-sided split of a graph into its non-crossing parts and the cut `H`.
#[derive(Clone, Debug)]
pub struct CutDecomposition {
    lo: i64,
    hi: i64,
    g_plus: Vec<(i64, i64)>,
    g_minus: Vec<(i64, i64)>,
    h: Vec<(i64, i64)>,
}

impl CutDecomposition {
    /// Assemble a decomposition directly from its parts, validating that
    /// every edge sits on the claimed side of the cut.
    pub fn from_parts(
        lo: i64,
        hi: i64,
        g_plus: Vec<(i64, i64)>,
        g_minus: Vec<(i64, i64)>,
        h: Vec<(i64, i64)>,
    ) -> Result<Self> {
        if lo > hi {
            return Err(Error::BadVolume(format!("[{lo}, {hi})")));
        }
        let check = |v: i64| -> Result<()> {
            if v < lo || v >= hi {
                return Err(Error::VertexOutsideVolume(v));
            }
            Ok(())
        };
        let norm = |edges: Vec<(i64, i64)>| -> Result<Vec<(i64, i64)>> {
            let mut out = Vec::with_capacity(edges.len());
            for (a, b) in edges {
                check(a)?;
                check(b)?;
                if a == b {
                    return Err(Error::Invalid(format!("self-loop at {a}")));
                }
                out.push((a.min(b), a.max(b)));
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        };
        let g_plus = norm(g_plus)?;
        let g_minus = norm(g_minus)?;
        let h = norm(h)?;
        for &(a, _) in &g_plus {
            if a < 0 {
                return Err(Error::Invalid(format!("plus-side edge from {a}")));
            }
        }
        for &(_, b) in &g_minus {
            if b >= 0 {
                return Err(Error::Invalid(format!("minus-side edge to {b}")));
            }
        }
        for &(a, b) in &h {
            if a >= 0 || b < 0 {
                return Err(Error::Invalid(format!("non-crossing cut edge ({a}, {b})")));
            }
        }
        Ok(Self {
            lo,
            hi,
            g_plus,
            g_minus,
            h,
        })
    }

    /// Split at the origin: edges within `[0, hi)`, within `[lo, 0)`, and
    /// crossing pairs.
    pub fn split(g: &FiniteGraph) -> Self {
        let mut g_plus = Vec::new();
        let mut g_minus = Vec::new();
        let mut h = Vec::new();
        for &(a, b) in g.edges() {
            if a >= 0 {
                g_plus.push((a, b));
            } else if b < 0 {
                g_minus.push((a, b));
            } else {
                h.push((a, b));
            }
        }
        Self {
            lo: g.lo(),
            hi: g.hi(),
            g_plus,
            g_minus,
            h,
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn g_plus(&self) -> &[(i64, i64)] {
        &self.g_plus
    }

    pub fn g_minus(&self) -> &[(i64, i64)] {
        &self.g_minus
    }

    pub fn h(&self) -> &[(i64, i64)] {
        &self.h
    }

    pub fn h_size(&self) -> usize {
        self.h.len()
    }

    /// The full graph on `[lo, hi)` restricted to plus-side edges.
    pub fn plus_graph(&self) -> FiniteGraph {
        FiniteGraph::new(self.lo, self.hi, self.g_plus.clone()).expect("validated parts")
    }

    /// The graph `W = G_minus + H` (plus-side edges dropped).
    pub fn w_graph(&self) -> FiniteGraph {
        let mut edges = self.g_minus.clone();
        edges.extend_from_slice(&self.h);
        FiniteGraph::new(self.lo, self.hi, edges).expect("validated parts")
    }

    pub fn full_graph(&self) -> FiniteGraph {
        let mut edges = self.g_minus.clone();
        edges.extend_from_slice(&self.h);
        edges.extend_from_slice(&self.g_plus);
        FiniteGraph::new(self.lo, self.hi, edges).expect("validated parts")
    }

    #[inline]
    fn offset(&self, v: i64) -> u32 {
        (v - self.lo) as u32
    }

    /// Quotient classes used by `R_n`: the block `[0, n)` as one class plus
    /// all merges coming from non-crossing edges.
    fn rn_union_find(&self, n: i64) -> UnionFind {
        let mut uf = UnionFind::new((self.hi - self.lo) as usize);
        let top = n.min(self.hi);
        if top > 1 {
            let first = self.offset(0);
            for v in 1..top {
                uf.union(first, self.offset(v));
            }
        }
        for &(a, b) in self.g_plus.iter().chain(self.g_minus.iter()) {
            uf.union(self.offset(a), self.offset(b));
        }
        uf
    }

    /// Corank of `H` in the quotient by `[0, n)` and the non-crossing
    /// clusters: the number of independent cycles the cut edges acquire.
    pub fn corank_rn(&self, n: i64) -> u32 {
        let mut uf = self.rn_union_find(n);
        if self.h.is_empty() {
            return 0;
        }
        // Components among the quotient classes touched by H.
        let mut idx_of: HashMap<u32, u32> = HashMap::new();
        let mut endpoints = Vec::with_capacity(2 * self.h.len());
        for &(a, b) in &self.h {
            for v in [a, b] {
                let root = uf.find(self.offset(v));
                let next = idx_of.len() as u32;
                endpoints.push(*idx_of.entry(root).or_insert(next));
            }
        }
        let v_touched = idx_of.len() as u32;
        let mut huf = UnionFind::new(v_touched as usize);
        for pair in endpoints.chunks_exact(2) {
            if pair[0] != pair[1] {
                huf.union(pair[0], pair[1]);
            }
        }
        self.h.len() as u32 + huf.count() - v_touched
    }

    /// Union-find of the minus side under `G_minus` alone.
    fn minus_clusters(&self) -> UnionFind {
        let mut uf = UnionFind::new((self.hi - self.lo) as usize);
        for &(a, b) in &self.g_minus {
            uf.union(self.offset(a), self.offset(b));
        }
        uf
    }

    /// Limit value `R = sum over minus-side clusters of (deg_H - 1)_+`,
    /// a statistic of `W` alone.
    pub fn r_limit(&self) -> u32 {
        let mut uf = self.minus_clusters();
        let mut deg: HashMap<u32, u32> = HashMap::new();
        for &(a, _) in &self.h {
            *deg.entry(uf.find(self.offset(a))).or_insert(0) += 1;
        }
        deg.values().map(|&d| d.saturating_sub(1)).sum()
    }

    /// Frontier `F_R` (right endpoints of cut edges whose minus-side cluster
    /// carries at least two cut edges) and the stabilisation index
    /// `N = 1 + max F_R` (zero for an empty frontier).
    pub fn frontier_and_n(&self) -> (Vec<i64>, i64) {
        let mut uf = self.minus_clusters();
        let mut deg: HashMap<u32, u32> = HashMap::new();
        for &(a, _) in &self.h {
            *deg.entry(uf.find(self.offset(a))).or_insert(0) += 1;
        }
        let mut frontier: Vec<i64> = self
            .h
            .iter()
            .filter(|&&(a, _)| deg[&uf.find(self.offset(a))] >= 2)
            .map(|&(_, b)| b)
            .collect();
        frontier.sort_unstable();
        frontier.dedup();
        let n = frontier.last().map_or(0, |&m| m + 1);
        (frontier, n)
    }

    /// Exact factorisation indicator `A_n`: given plus-side compatibility,
    /// `x` induces one spin per plus-cluster meeting `[0, n)`, and `A_n`
    /// checks those spins agree across full-graph connections (the merged
    /// clusters).  When the plus side is already incompatible `A_n = 1` by
    /// convention.  Satisfies `B_n(x, G) = A_n(x, G) * B_n(x, G_plus)`.
    pub fn compatibility_a(&self, x: &[i8], n: i64) -> Result<bool> {
        let top = n.min(self.hi).max(0);
        if x.len() < top as usize {
            return Err(Error::LengthMismatch {
                expected: top as usize,
                got: x.len(),
            });
        }
        let mut plus_uf = UnionFind::new((self.hi - self.lo) as usize);
        for &(a, b) in &self.g_plus {
            plus_uf.union(self.offset(a), self.offset(b));
        }
        // Induced spin per plus-cluster meeting [0, n).
        let mut spin_of_plus: HashMap<u32, i8> = HashMap::new();
        for v in 0..top {
            let s = x[v as usize];
            if s != 1 && s != -1 {
                return Err(Error::BadSymbol(s));
            }
            let root = plus_uf.find(self.offset(v));
            match spin_of_plus.entry(root) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    if *e.get() != s {
                        return Ok(true); // plus side incompatible: A_n = 1
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(s);
                }
            }
        }
        // Spins must agree across full-graph connectivity.
        let full = self.full_graph();
        let mut full_uf = UnionFind::new((self.hi - self.lo) as usize);
        for &(a, b) in full.edges() {
            full_uf.union(self.offset(a), self.offset(b));
        }
        let mut spin_of_full: HashMap<u32, i8> = HashMap::new();
        for v in 0..top {
            let root = full_uf.find(self.offset(v));
            let s = x[v as usize];
            match spin_of_full.entry(root) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    if *e.get() != s {
                        return Ok(false);
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(s);
                }
            }
        }
        Ok(true)
    }
}
