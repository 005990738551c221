//! Random generation for long-range edge models: the independent Bernoulli
//! graph, the random-cluster model `RC_q` via single-edge heat-bath MCMC,
//! Edwards-Sokal spin assignment, exact enumeration at tiny volumes, and the
//! assembled product law used for cut statistics.
//!
//! Edge probabilities use the hazard `2 beta J(|i - j|)`, i.e.
//! `p = 1 - exp(-2 beta J)`.  With that scale the `q = 2` model couples
//! exactly to the spin Gibbs law with energy `sum beta J x_i x_j`: the
//! single-edge connection probability `p / (2 - p)` equals `tanh(beta J)`,
//! which the exact-enumeration cross checks require at machine precision.
//!
//! Every random draw is a pure function of `(seed, labels)` through the
//! counter-based generator, so chains replay bit-identically: activations
//! use one geometric-skip stream per (chain, sweep, distance), resolutions
//! one draw per (chain, sweep, slot), spins one draw per (chain, sweep,
//! cluster label).

use crate::couplings::CouplingFamily;
use crate::graphs::{ClusterPartition, CutDecomposition, FiniteGraph, UnionFind};
use crate::numeric::KahanSum;
use crate::rng::{self, domain, GeometricHits};
use crate::{Error, Result};
use std::collections::BTreeSet;

/// Present-probabilities are capped below one so heat-bath odds stay finite.
pub const P_CAP: f64 = 1.0 - 1e-15;

/// Largest candidate-edge count for exact enumeration (`2^n` subgraphs).
pub const MAX_EXACT_EDGES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Free,
    Wired,
}

/// Parameters of a random-cluster chain.
#[derive(Clone, Debug)]
pub struct RcConfig {
    pub lo: i64,
    pub hi: i64,
    pub q: f64,
    pub boundary: Boundary,
    pub fam: CouplingFamily,
}

impl RcConfig {
    pub fn new(lo: i64, hi: i64, q: f64, boundary: Boundary, fam: CouplingFamily) -> Result<Self> {
        if hi - lo < 2 {
            return Err(Error::BadVolume(format!("[{lo}, {hi})")));
        }
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::NonPositive {
                what: "q (must be >= 1)",
            });
        }
        Ok(Self {
            lo,
            hi,
            q,
            boundary,
            fam,
        })
    }
}

/// Present-probability and its single-edge connection value for one distance:
/// `p = 1 - e^{-2 beta J(d)}` (capped) and `p_check = p / (2 - p)`.
pub fn edge_probability(fam: &CouplingFamily, dist: u64) -> (f64, f64) {
    let hazard = 2.0 * fam.coupling_value(dist);
    let p = (-(-hazard).exp_m1()).min(P_CAP);
    (p, p / (2.0 - p))
}

/// Independent Bernoulli(`p(d)`) graph on `[lo, hi)`, drawn by geometric
/// skipping per distance class.  Slot order: distance `d = 1, 2, ...`, then
/// left endpoint ascending; the `k`-th slot of class `d` is
/// `(lo + k, lo + k + d)`.
pub fn bernoulli_graph(
    fam: &CouplingFamily,
    lo: i64,
    hi: i64,
    seed: u64,
    label: u64,
) -> Result<FiniteGraph> {
    if hi - lo < 1 {
        return Err(Error::BadVolume(format!("[{lo}, {hi})")));
    }
    let nv = (hi - lo) as u64;
    let mut edges = Vec::new();
    for d in 1..nv {
        let hazard = 2.0 * fam.coupling_value(d);
        if hazard == 0.0 {
            continue;
        }
        let log_q = (-hazard).max((1.0 - P_CAP).ln());
        for k in GeometricHits::with_log_q(seed, &[domain::BERNOULLI, label, d], nv - d, log_q) {
            let a = lo + k as i64;
            edges.push((a, a + d as i64));
        }
    }
    FiniteGraph::new(lo, hi, edges)
}

/// What a [`SweepRecord`] should carry beyond the scalar statistics.
#[derive(Clone, Debug, Default)]
pub struct RecordOptions {
    /// Emit cluster labels for the sites `[0, front_window)` (0 = none).
    pub front_window: u32,
    /// Emit an Edwards-Sokal spin word over the whole volume.
    pub keep_spins: bool,
    /// Spin forced on the boundary cluster under wired conditions.
    pub boundary_spin: i8,
    /// Emit per-record cosh-product observables (one-sided volumes only).
    pub cosh_observer: bool,
}

/// One observation of the chain (or of the assembled product law).
/// All mandatory fields are integers so serialised streams replay
/// byte-identically.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRecord {
    pub sweep: u64,
    pub chain: u64,
    /// Cluster count (wired: the boundary supervertex merges its clusters).
    pub clusters: u64,
    /// Most finite vertices in one cluster.
    pub largest_cluster: u64,
    /// Finite vertices in the cluster of the origin (0 when outside volume).
    pub origin_cluster: u64,
    /// Finite-volume edge count.
    pub edges: u64,
    /// Edges to the boundary supervertex (wired only).
    pub boundary_edges: u64,
    /// Crossing edges of the origin cut.
    pub h_edges: u64,
    pub r0: u32,
    pub r_limit: u32,
    pub n_stat: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub front_clusters: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spins: Option<Vec<i8>>,
    /// `sum_C log cosh(r(C))` over clusters (one-sided volumes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_cosh_product: Option<f64>,
    /// `sum_C r(label(C))^2` over clusters (one-sided volumes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_r2_labels: Option<f64>,
}

/// Single-edge heat-bath chain for `RC_q` with long-range couplings.
///
/// Per sweep, every candidate slot is resampled from its heat-bath
/// conditional in canonical order (ascending `(i, j)`, boundary slots after
/// the finite slots of the same `i`).  The implementation splits each
/// conditional into an activation Bernoulli(`p`) and, when activated and the
/// endpoints are not otherwise connected, an acceptance draw with odds
/// `1 / (p + q(1 - p))`; non-activated slots are absent regardless of
/// connectivity, so only activated slots and edges present at sweep start
/// need touching.  This sparse pass is exactly the dense kernel.
pub struct RcChain {
    cfg: RcConfig,
    seed: u64,
    chain: u64,
    sweep: u64,
    nv: usize,
    /// Boundary supervertex offset (== nv) under wired conditions.
    wired: bool,
    /// Per distance `d`: present-probability, `log(1-p)`, acceptance odds.
    p_dist: Vec<f64>,
    log1mp_dist: Vec<f64>,
    accept_dist: Vec<f64>,
    /// Per offset: boundary-slot probability and acceptance odds (wired).
    p_bnd: Vec<f64>,
    accept_bnd: Vec<f64>,
    edges: BTreeSet<(u32, u32)>,
    adj: Vec<Vec<u32>>,
    finite_edges: u64,
    boundary_edges: u64,
    // Reusable BFS state.
    va: Vec<u32>,
    vb: Vec<u32>,
    epoch: u32,
    qa: Vec<u32>,
    qb: Vec<u32>,
    qnext: Vec<u32>,
    work: Vec<(u32, u32)>,
    /// Tail values `r_i` per site, built on first use by the cosh observer.
    r_table: Option<Vec<f64>>,
}

impl RcChain {
    pub fn new(cfg: RcConfig, seed: u64, chain: u64) -> Result<Self> {
        let nv = (cfg.hi - cfg.lo) as usize;
        let q = cfg.q;
        let mut p_dist = vec![0.0; nv];
        let mut log1mp_dist = vec![0.0; nv];
        let mut accept_dist = vec![0.0; nv];
        for d in 1..nv {
            let hazard = 2.0 * cfg.fam.coupling_value(d as u64);
            let p = (-(-hazard).exp_m1()).min(P_CAP);
            p_dist[d] = p;
            log1mp_dist[d] = if p == 0.0 {
                0.0
            } else {
                (-hazard).max((1.0 - P_CAP).ln())
            };
            accept_dist[d] = 1.0 / (p + q * (1.0 - p));
        }
        let wired = cfg.boundary == Boundary::Wired;
        let (mut p_bnd, mut accept_bnd) = (Vec::new(), Vec::new());
        if wired {
            for off in 0..nv {
                let t_left = cfg.fam.tail_r(off as u64, 1e-13)?;
                let t_right = cfg.fam.tail_r((nv - 1 - off) as u64, 1e-13)?;
                let hazard = 2.0 * (t_left + t_right);
                let p = (-(-hazard).exp_m1()).min(P_CAP);
                p_bnd.push(p);
                accept_bnd.push(1.0 / (p + q * (1.0 - p)));
            }
        }
        let n_all = nv + usize::from(wired);
        Ok(Self {
            cfg,
            seed,
            chain,
            sweep: 0,
            nv,
            wired,
            p_dist,
            log1mp_dist,
            accept_dist,
            p_bnd,
            accept_bnd,
            edges: BTreeSet::new(),
            adj: vec![Vec::new(); n_all],
            finite_edges: 0,
            boundary_edges: 0,
            va: vec![0; n_all],
            vb: vec![0; n_all],
            epoch: 0,
            qa: Vec::new(),
            qb: Vec::new(),
            qnext: Vec::new(),
            work: Vec::new(),
            r_table: None,
        })
    }

    pub fn config(&self) -> &RcConfig {
        &self.cfg
    }

    pub fn sweep_index(&self) -> u64 {
        self.sweep
    }

    pub fn chain_id(&self) -> u64 {
        self.chain
    }

    /// Present-probability of finite slots at distance `d`.
    pub fn edge_p(&self, d: u64) -> f64 {
        self.p_dist[d as usize]
    }

    fn add_edge(&mut self, a: u32, b: u32) {
        if self.edges.insert((a, b)) {
            self.adj[a as usize].push(b);
            self.adj[b as usize].push(a);
            if (b as usize) < self.nv {
                self.finite_edges += 1;
            } else {
                self.boundary_edges += 1;
            }
        }
    }

    fn remove_edge(&mut self, a: u32, b: u32) {
        if self.edges.remove(&(a, b)) {
            let pos = self.adj[a as usize].iter().position(|&x| x == b).unwrap();
            self.adj[a as usize].swap_remove(pos);
            let pos = self.adj[b as usize].iter().position(|&x| x == a).unwrap();
            self.adj[b as usize].swap_remove(pos);
            if (b as usize) < self.nv {
                self.finite_edges -= 1;
            } else {
                self.boundary_edges -= 1;
            }
        }
    }

    /// Are `a` and `b` joined by a path avoiding the direct edge `{a, b}`?
    /// Bidirectional search expanding the smaller frontier, so the cost is
    /// bounded by the smaller cluster.
    fn connected_excluding(&mut self, a: u32, b: u32) -> bool {
        self.epoch += 1;
        let ep = self.epoch;
        self.va[a as usize] = ep;
        self.vb[b as usize] = ep;
        self.qa.clear();
        self.qa.push(a);
        self.qb.clear();
        self.qb.push(b);
        loop {
            if self.qa.is_empty() || self.qb.is_empty() {
                return false;
            }
            let from_a = self.qa.len() <= self.qb.len();
            self.qnext.clear();
            let frontier = if from_a { &self.qa } else { &self.qb };
            let (mine, theirs) = if from_a {
                (&mut self.va, &self.vb)
            } else {
                (&mut self.vb, &self.va)
            };
            for &u in frontier {
                for &w in &self.adj[u as usize] {
                    if (u == a && w == b) || (u == b && w == a) {
                        continue;
                    }
                    if theirs[w as usize] == ep {
                        return true;
                    }
                    if mine[w as usize] != ep {
                        mine[w as usize] = ep;
                        self.qnext.push(w);
                    }
                }
            }
            if from_a {
                std::mem::swap(&mut self.qa, &mut self.qnext);
            } else {
                std::mem::swap(&mut self.qb, &mut self.qnext);
            }
        }
    }

    /// One full heat-bath sweep over all candidate slots.
    pub fn sweep(&mut self) {
        let sweep_no = self.sweep;
        // Stage one: activation slots, per distance class.
        let mut work = std::mem::take(&mut self.work);
        work.clear();
        for d in 1..self.nv {
            let log_q = self.log1mp_dist[d];
            if log_q == 0.0 {
                continue;
            }
            let labels = [domain::ACTIVATION, self.chain, sweep_no, d as u64];
            for k in GeometricHits::with_log_q(self.seed, &labels, (self.nv - d) as u64, log_q) {
                work.push((k as u32, k as u32 + d as u32));
            }
        }
        if self.wired {
            for off in 0..self.nv {
                let p = self.p_bnd[off];
                if p == 0.0 {
                    continue;
                }
                let u = rng::unit_f64(rng::draw(
                    self.seed,
                    &[domain::BOUNDARY, self.chain, sweep_no, off as u64],
                ));
                if u < p {
                    work.push((off as u32, self.nv as u32));
                }
            }
        }
        work.sort_unstable();
        // Merge with the sweep-start edge set in canonical slot order.
        let snapshot: Vec<(u32, u32)> = self.edges.iter().copied().collect();
        let (mut wi, mut si) = (0, 0);
        loop {
            let (slot, activated) = match (work.get(wi), snapshot.get(si)) {
                (Some(&w), Some(&s)) => {
                    if w < s {
                        wi += 1;
                        (w, true)
                    } else if s < w {
                        si += 1;
                        (s, false)
                    } else {
                        wi += 1;
                        si += 1;
                        (w, true)
                    }
                }
                (Some(&w), None) => {
                    wi += 1;
                    (w, true)
                }
                (None, Some(&s)) => {
                    si += 1;
                    (s, false)
                }
                (None, None) => break,
            };
            let (a, b) = slot;
            if !activated {
                self.remove_edge(a, b);
                continue;
            }
            let keep = self.connected_excluding(a, b) || {
                let accept = if (b as usize) < self.nv {
                    self.accept_dist[(b - a) as usize]
                } else {
                    self.accept_bnd[a as usize]
                };
                let u = rng::unit_f64(rng::draw(
                    self.seed,
                    &[domain::RESOLVE, self.chain, sweep_no, a as u64, b as u64],
                ));
                u < accept
            };
            if keep {
                self.add_edge(a, b);
            } else {
                self.remove_edge(a, b);
            }
        }
        self.work = work;
        self.sweep += 1;
    }

    pub fn advance(&mut self, sweeps: u64) {
        for _ in 0..sweeps {
            self.sweep();
        }
    }

    /// Finite-volume part of the current state.
    pub fn graph(&self) -> FiniteGraph {
        let lo = self.cfg.lo;
        let edges = self
            .edges
            .iter()
            .filter(|&&(_, b)| (b as usize) < self.nv)
            .map(|&(a, b)| (lo + a as i64, lo + b as i64))
            .collect();
        FiniteGraph::new(lo, self.cfg.hi, edges).expect("state edges are in volume")
    }

    pub fn boundary_slots(&self) -> Vec<i64> {
        self.edges
            .iter()
            .filter(|&&(_, b)| b as usize == self.nv)
            .map(|&(a, _)| self.cfg.lo + a as i64)
            .collect()
    }

    /// Cheap per-sweep summary: cluster count, largest finite cluster, and
    /// the origin cluster's finite size (no cut statistics).
    pub fn cluster_summary(&self) -> (u64, u64, u64) {
        let n_all = self.nv + usize::from(self.wired);
        let mut uf = UnionFind::new(n_all);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        let mut size_of_root = vec![0u64; n_all];
        for off in 0..self.nv {
            size_of_root[uf.find(off as u32) as usize] += 1;
        }
        let largest = size_of_root.iter().copied().max().unwrap_or(0);
        let origin = if self.cfg.lo <= 0 && 0 < self.cfg.hi {
            size_of_root[uf.find((-self.cfg.lo) as u32) as usize]
        } else {
            0
        };
        (u64::from(uf.count()), largest, origin)
    }

    fn ensure_r_table(&mut self) -> Result<()> {
        if self.r_table.is_none() {
            let mut table = Vec::with_capacity(self.nv);
            for i in 0..self.nv {
                table.push(self.cfg.fam.tail_r(i as u64, 1e-12)?);
            }
            self.r_table = Some(table);
        }
        Ok(())
    }

    /// Summarise the current state.  Statistics honour the boundary
    /// condition (wired states count connectivity through the supervertex);
    /// cut statistics always refer to the finite part split at the origin.
    pub fn record(&mut self, opts: &RecordOptions) -> Result<SweepRecord> {
        if opts.cosh_observer && self.cfg.lo >= 0 {
            self.ensure_r_table()?;
        }
        let lo = self.cfg.lo;
        let nv = self.nv;
        let n_all = nv + usize::from(self.wired);
        let mut uf = UnionFind::new(n_all);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        // Finite-vertex sizes and deterministic labels (min vertex).
        let mut size_of_root = vec![0u64; n_all];
        let mut label_of_root = vec![i64::MAX; n_all];
        for off in 0..nv {
            let root = uf.find(off as u32) as usize;
            size_of_root[root] += 1;
            if label_of_root[root] == i64::MAX {
                label_of_root[root] = lo + off as i64;
            }
        }
        let largest = size_of_root.iter().copied().max().unwrap_or(0);
        let origin_cluster = if lo <= 0 && 0 < self.cfg.hi {
            size_of_root[uf.find((-lo) as u32) as usize]
        } else {
            0
        };
        // Cut statistics of the finite part.
        let (mut g_plus, mut g_minus, mut h) = (Vec::new(), Vec::new(), Vec::new());
        for &(a, b) in &self.edges {
            if (b as usize) >= nv {
                continue;
            }
            let (i, j) = (lo + a as i64, lo + b as i64);
            if i >= 0 {
                g_plus.push((i, j));
            } else if j < 0 {
                g_minus.push((i, j));
            } else {
                h.push((i, j));
            }
        }
        let h_edges = h.len() as u64;
        let cut = CutDecomposition::from_parts(lo, self.cfg.hi, g_plus, g_minus, h)?;
        let (_, n_stat) = cut.frontier_and_n();
        let front_clusters = (opts.front_window > 0).then(|| {
            let top = (opts.front_window as i64).min(self.cfg.hi);
            (0..top.max(0))
                .map(|v| label_of_root[uf.find((v - lo) as u32) as usize])
                .collect()
        });
        let spins = opts.keep_spins.then(|| {
            let boundary_root = self.wired.then(|| uf.find(nv as u32) as usize);
            let mut spin_of_root = vec![0i8; n_all];
            (0..nv)
                .map(|off| {
                    let root = uf.find(off as u32) as usize;
                    if spin_of_root[root] == 0 {
                        spin_of_root[root] = if Some(root) == boundary_root {
                            if opts.boundary_spin == 0 {
                                1
                            } else {
                                opts.boundary_spin
                            }
                        } else {
                            let u = rng::draw(
                                self.seed,
                                &[
                                    domain::SPIN,
                                    self.chain,
                                    self.sweep,
                                    rng::label_i64(label_of_root[root]),
                                ],
                            );
                            if u & 1 == 1 {
                                1
                            } else {
                                -1
                            }
                        };
                    }
                    spin_of_root[root]
                })
                .collect()
        });
        let (mut log_cosh_product, mut sum_r2_labels) = (None, None);
        if opts.cosh_observer && lo >= 0 {
            let table = self.r_table.as_ref().expect("built above");
            let mut r_of_root = vec![KahanSum::new(); n_all];
            for off in 0..nv {
                let root = uf.find(off as u32) as usize;
                r_of_root[root].add(table[off]);
            }
            let mut lcp = KahanSum::new();
            let mut r2 = KahanSum::new();
            for root in 0..n_all {
                if size_of_root[root] == 0 {
                    continue;
                }
                lcp.add(crate::numeric::log_cosh(r_of_root[root].value()));
                let rl = table[(label_of_root[root] - lo) as usize];
                r2.add(rl * rl);
            }
            log_cosh_product = Some(lcp.value());
            sum_r2_labels = Some(r2.value());
        }
        Ok(SweepRecord {
            sweep: self.sweep,
            chain: self.chain,
            clusters: uf.count() as u64,
            largest_cluster: largest,
            origin_cluster,
            edges: self.finite_edges,
            boundary_edges: self.boundary_edges,
            h_edges,
            r0: cut.corank_rn(0),
            r_limit: cut.r_limit(),
            n_stat,
            front_clusters,
            spins,
            log_cosh_product,
            sum_r2_labels,
        })
    }
}

/// One uniform spin per cluster (the Edwards-Sokal conditional), keyed by
/// the cluster label so the word is reproducible; `forced` pins one
/// cluster's spin (wired boundary).
pub fn spin_assignment(
    partition: &ClusterPartition,
    lo: i64,
    hi: i64,
    seed: u64,
    stream: &[u64],
    forced: Option<(i64, i8)>,
) -> Vec<i8> {
    (lo..hi)
        .map(|v| {
            let label = partition.label_of(v);
            if let Some((flabel, fspin)) = forced {
                if label == flabel {
                    return fspin;
                }
            }
            let mut labels = Vec::with_capacity(stream.len() + 2);
            labels.push(domain::SPIN);
            labels.extend_from_slice(stream);
            labels.push(rng::label_i64(label));
            if rng::draw(seed, &labels) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Exact `RC_q` law over the subgraphs of an explicit candidate-slot list.
/// Wired conditions are modelled by including a supervertex as the last
/// vertex of the volume with its own slots.
pub struct ExactRandomCluster {
    lo: i64,
    hi: i64,
    slots: Vec<(i64, i64)>,
    p: Vec<f64>,
    q: f64,
    log_weight: Vec<f64>,
    log_z: f64,
}

impl ExactRandomCluster {
    pub fn new(lo: i64, hi: i64, slots: Vec<((i64, i64), f64)>, q: f64) -> Result<Self> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::NonPositive {
                what: "q (must be >= 1)",
            });
        }
        if slots.len() > MAX_EXACT_EDGES {
            return Err(Error::EnumerationTooLarge {
                what: "candidate edges",
                count: slots.len(),
                cap: MAX_EXACT_EDGES,
            });
        }
        let mut pairs = Vec::with_capacity(slots.len());
        let mut p = Vec::with_capacity(slots.len());
        for ((a, b), pe) in slots {
            if a == b || a < lo || a >= hi || b < lo || b >= hi {
                return Err(Error::Invalid(format!("bad slot ({a}, {b})")));
            }
            if !(0.0..=P_CAP).contains(&pe) {
                return Err(Error::Invalid(format!("slot probability {pe}")));
            }
            pairs.push((a.min(b), a.max(b)));
            p.push(pe);
        }
        let n = pairs.len();
        let nv = (hi - lo) as usize;
        let log_p: Vec<f64> = p.iter().map(|&x| x.ln()).collect();
        let log_1mp: Vec<f64> = p.iter().map(|&x| (-x).ln_1p()).collect();
        let log_q = q.ln();
        let mut uf = UnionFind::new(nv);
        let mut log_weight = Vec::with_capacity(1usize << n);
        for mask in 0u64..(1 << n) {
            uf.reset();
            let mut lw = KahanSum::new();
            for (k, &(a, b)) in pairs.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    uf.union((a - lo) as u32, (b - lo) as u32);
                    lw.add(log_p[k]);
                } else {
                    lw.add(log_1mp[k]);
                }
            }
            lw.add(f64::from(uf.count()) * log_q);
            log_weight.push(lw.value());
        }
        let max = log_weight.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = KahanSum::new();
        for &lw in &log_weight {
            z.add((lw - max).exp());
        }
        let log_z = max + z.value().ln();
        Ok(Self {
            lo,
            hi,
            slots: pairs,
            p,
            q,
            log_weight,
            log_z,
        })
    }

    /// All pair slots within an interaction-range cutoff, with their
    /// present-probabilities from the family.
    pub fn from_family(
        fam: &CouplingFamily,
        lo: i64,
        hi: i64,
        q: f64,
        range_cutoff: Option<u64>,
    ) -> Result<Self> {
        let mut slots = Vec::new();
        for a in lo..hi {
            for b in (a + 1)..hi {
                let d = (b - a) as u64;
                if let Some(cut) = range_cutoff {
                    if d > cut {
                        continue;
                    }
                }
                let (p, _) = edge_probability(fam, d);
                if p > 0.0 {
                    slots.push(((a, b), p));
                }
            }
        }
        Self::new(lo, hi, slots, q)
    }

    /// Wired variant: volume extended by a supervertex at `hi` carrying one
    /// slot per finite vertex with the aggregated exterior hazard.
    pub fn from_family_wired(
        fam: &CouplingFamily,
        lo: i64,
        hi: i64,
        q: f64,
        range_cutoff: Option<u64>,
    ) -> Result<Self> {
        let free = Self::from_family(fam, lo, hi, q, range_cutoff)?;
        let mut slots: Vec<((i64, i64), f64)> = free
            .slots
            .iter()
            .zip(&free.p)
            .map(|(&s, &p)| (s, p))
            .collect();
        for v in lo..hi {
            let t_left = fam.tail_r((v - lo) as u64, 1e-13)?;
            let t_right = fam.tail_r((hi - 1 - v) as u64, 1e-13)?;
            let hazard = 2.0 * (t_left + t_right);
            let p = (-(-hazard).exp_m1()).min(P_CAP);
            if p > 0.0 {
                slots.push(((v, hi), p));
            }
        }
        Self::new(lo, hi + 1, slots, q)
    }

    pub fn slots(&self) -> &[(i64, i64)] {
        &self.slots
    }

    pub fn slot_p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn prob(&self, mask: u64) -> f64 {
        (self.log_weight[mask as usize] - self.log_z).exp()
    }

    pub fn graph(&self, mask: u64) -> FiniteGraph {
        FiniteGraph::from_mask(self.lo, self.hi, &self.slots, mask).expect("validated slots")
    }

    /// Expectation of an arbitrary functional of the subgraph mask.
    pub fn expect(&self, f: impl Fn(u64) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for mask in 0..self.log_weight.len() as u64 {
            acc.add(self.prob(mask) * f(mask));
        }
        acc.value()
    }

    pub fn edge_marginal(&self, k: usize) -> f64 {
        self.expect(|mask| f64::from(mask >> k & 1 == 1))
    }

    /// Probability that `i` and `j` lie in one cluster.
    pub fn connected_prob(&self, i: i64, j: i64) -> f64 {
        self.expect(|mask| {
            let g = self.graph(mask);
            f64::from(g.clusters().label_of(i) == g.clusters().label_of(j))
        })
    }

    /// Full normalised distribution over masks (small systems only).
    pub fn distribution(&self) -> Vec<f64> {
        (0..self.log_weight.len() as u64)
            .map(|m| self.prob(m))
            .collect()
    }
}

/// Worst violation of stochastic domination `lower <= upper` between two
/// laws over the same slot list: the largest excess `P_lower(A) - P_upper(A)`
/// over every increasing edge-event `A` (up-closed set of masks), clamped at
/// zero.  Feasible for up to 4 slots; `n_slots` larger returns an error.
pub fn domination_gap(lower: &[f64], upper: &[f64], n_slots: usize) -> Result<f64> {
    if n_slots > 4 {
        return Err(Error::EnumerationTooLarge {
            what: "slots for upset enumeration",
            count: n_slots,
            cap: 4,
        });
    }
    let n_masks = 1usize << n_slots;
    if lower.len() != n_masks || upper.len() != n_masks {
        return Err(Error::LengthMismatch {
            expected: n_masks,
            got: lower.len().min(upper.len()),
        });
    }
    let mut worst = 0.0f64;
    // A subset S of masks is an upset iff mask in S implies mask|bit in S.
    'sets: for set in 0u32..(1u32 << n_masks) {
        for mask in 0..n_masks {
            if set >> mask & 1 == 1 {
                for bit in 0..n_slots {
                    let bigger = mask | (1 << bit);
                    if set >> bigger & 1 == 0 {
                        continue 'sets;
                    }
                }
            }
        }
        let mut p_lo = 0.0;
        let mut p_hi = 0.0;
        for mask in 0..n_masks {
            if set >> mask & 1 == 1 {
                p_lo += lower[mask];
                p_hi += upper[mask];
            }
        }
        worst = worst.max(p_lo - p_hi);
    }
    Ok(worst)
}

/// Does `lower <= upper` hold over every increasing edge-event, within
/// `tol`?  See [`domination_gap`].
pub fn dominates(lower: &[f64], upper: &[f64], n_slots: usize, tol: f64) -> Result<bool> {
    Ok(domination_gap(lower, upper, n_slots)? <= tol)
}

/// Independent Bernoulli law over a slot list as a mask distribution
/// (for exact domination checks).
pub fn bernoulli_law(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..1u64 << n)
        .map(|mask| {
            (0..n)
                .map(|k| if mask >> k & 1 == 1 { p[k] } else { 1.0 - p[k] })
                .product()
        })
        .collect()
}

/// Sampler for the assembled product law on a symmetric two-sided volume
/// `[-L, L)`: two independent one-sided chains provide the plus- and
/// (mirrored) minus-side graphs, and the crossing edges are drawn fresh per
/// record as independent Bernoulli at the single-edge connection
/// probabilities `p_check`.
pub struct XiSampler {
    plus: RcChain,
    minus: RcChain,
    l: i64,
    seed: u64,
    chain: u64,
    record_idx: u64,
    /// `log(1 - p_check)` per crossing distance `1..=2L-1`.
    log1mp_check: Vec<f64>,
}

impl XiSampler {
    pub fn new(fam: &CouplingFamily, l: i64, q: f64, seed: u64, chain: u64) -> Result<Self> {
        if l < 1 {
            return Err(Error::BadVolume(format!("[-{l}, {l})")));
        }
        let side = RcConfig::new(0, l, q, Boundary::Free, fam.clone())?;
        let plus = RcChain::new(side.clone(), seed, 2 * chain)?;
        let minus = RcChain::new(side, seed, 2 * chain + 1)?;
        let mut log1mp_check = vec![0.0; (2 * l) as usize];
        for d in 1..2 * l {
            let (_, pc) = edge_probability(fam, d as u64);
            log1mp_check[d as usize] = (-pc).ln_1p();
        }
        Ok(Self {
            plus,
            minus,
            l,
            seed,
            chain,
            record_idx: 0,
            log1mp_check,
        })
    }

    pub fn advance(&mut self, sweeps: u64) {
        self.plus.advance(sweeps);
        self.minus.advance(sweeps);
    }

    pub fn record_index(&self) -> u64 {
        self.record_idx
    }

    /// Assemble one product-law observation and summarise it.
    pub fn record(&mut self, front_window: u32) -> Result<SweepRecord> {
        let l = self.l;
        let g_plus: Vec<(i64, i64)> = self.plus.graph().edges().to_vec();
        // Mirror i -> -1-i turns the one-sided law into the minus side.
        let g_minus: Vec<(i64, i64)> = self
            .minus
            .graph()
            .edges()
            .iter()
            .map(|&(a, b)| (-1 - b, -1 - a))
            .collect();
        let mut h = Vec::new();
        for d in 1..2 * l {
            let log_q = self.log1mp_check[d as usize];
            if log_q == 0.0 {
                continue;
            }
            let count = d.min(2 * l - d) as u64;
            let base = (-d).max(-l);
            let labels = [domain::HCUT, self.chain, self.record_idx, d as u64];
            for k in GeometricHits::with_log_q(self.seed, &labels, count, log_q) {
                let i = base + k as i64;
                h.push((i, i + d));
            }
        }
        let h_edges = h.len() as u64;
        let edges = (g_plus.len() + g_minus.len()) as u64 + h_edges;
        let cut = CutDecomposition::from_parts(-l, l, g_plus, g_minus, h)?;
        let full = cut.full_graph();
        let cp = full.clusters();
        let (_, n_stat) = cut.frontier_and_n();
        let front_clusters = (front_window > 0).then(|| {
            let top = (front_window as i64).min(l);
            (0..top).map(|v| cp.label_of(v)).collect()
        });
        let rec = SweepRecord {
            sweep: self.record_idx,
            chain: self.chain,
            clusters: cp.count() as u64,
            largest_cluster: cp.largest() as u64,
            origin_cluster: cp.size_of(0) as u64,
            edges,
            boundary_edges: 0,
            h_edges,
            r0: cut.corank_rn(0),
            r_limit: cut.r_limit(),
            n_stat,
            front_clusters,
            spins: None,
            log_cosh_product: None,
            sum_r2_labels: None,
        };
        self.record_idx += 1;
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyson(beta: f64) -> CouplingFamily {
        CouplingFamily::dyson(2.0, beta).unwrap()
    }

    #[test]
    fn edge_probability_frozen_values() {
        // Hazard 2*beta*J = ln 2 gives p = 1/2, p_check = 1/3.
        let fam = CouplingFamily::finite_range(vec![0.0, std::f64::consts::LN_2], 0.5).unwrap();
        let (p, pc) = edge_probability(&fam, 1);
        assert!((p - 0.5).abs() < 1e-15);
        assert!((pc - 1.0 / 3.0).abs() < 1e-15);
        let (p0, pc0) = edge_probability(&fam, 5);
        assert_eq!(p0, 0.0);
        assert_eq!(pc0, 0.0);
        // p_check = tanh(beta J): the bridge to the spin two-point value.
        let fam = dyson(0.3);
        for d in 1..6u64 {
            let (_, pc) = edge_probability(&fam, d);
            assert!((pc - (fam.coupling_value(d)).tanh()).abs() < 1e-15, "d={d}");
        }
    }

    #[test]
    fn bernoulli_graph_determinism_and_zero_beta() {
        let fam = dyson(0.4);
        let g1 = bernoulli_graph(&fam, -8, 8, 7, 0).unwrap();
        let g2 = bernoulli_graph(&fam, -8, 8, 7, 0).unwrap();
        assert_eq!(g1, g2);
        let g3 = bernoulli_graph(&fam, -8, 8, 7, 1).unwrap();
        assert_ne!(g1, g3);
        let empty = bernoulli_graph(&dyson(0.0), -8, 8, 7, 0).unwrap();
        assert_eq!(empty.num_edges(), 0);
    }

    #[test]
    fn bernoulli_graph_frequencies() {
        let fam = dyson(0.5);
        let (p1, _) = edge_probability(&fam, 1);
        let n = 40_000;
        let mut hits = 0;
        for rep in 0..n {
            let g = bernoulli_graph(&fam, 0, 2, 99, rep).unwrap();
            hits += g.num_edges();
        }
        let freq = hits as f64 / n as f64;
        let sigma = (p1 * (1.0 - p1) / n as f64).sqrt();
        assert!(
            (freq - p1).abs() < 5.0 * sigma,
            "freq {freq} vs p {p1} (sigma {sigma})"
        );
    }

    #[test]
    fn q_one_chain_state_equals_activation_set() {
        // With q = 1 acceptance is certain, so after each sweep the state
        // must equal that sweep's activation set exactly.
        let cfg = RcConfig::new(0, 32, 1.0, Boundary::Free, dyson(0.4)).unwrap();
        let mut chain = RcChain::new(cfg, 42, 0).unwrap();
        for sweep in 0..50u64 {
            chain.sweep();
            let mut expected = Vec::new();
            for d in 1..32u64 {
                let hazard = 2.0 * chain.config().fam.coupling_value(d);
                if hazard == 0.0 {
                    continue;
                }
                let labels = [domain::ACTIVATION, 0, sweep, d];
                for k in GeometricHits::with_log_q(42, &labels, 32 - d, -hazard) {
                    expected.push((k as i64, (k + d) as i64));
                }
            }
            expected.sort_unstable();
            assert_eq!(chain.graph().edges(), &expected[..], "sweep {sweep}");
        }
    }

    #[test]
    fn single_edge_chain_matches_p_check() {
        // Volume of two vertices: the q = 2 stationary presence is p/(2-p).
        let fam = CouplingFamily::finite_range(vec![0.0, std::f64::consts::LN_2], 0.5).unwrap();
        let cfg = RcConfig::new(0, 2, 2.0, Boundary::Free, fam).unwrap();
        let mut chain = RcChain::new(cfg, 5, 0).unwrap();
        let n = 20_000;
        let mut hits = 0u64;
        for _ in 0..n {
            chain.sweep();
            hits += chain.graph().num_edges() as u64;
        }
        // The single-slot chain refreshes independently each sweep.
        let freq = hits as f64 / n as f64;
        let pc = 1.0 / 3.0;
        let sigma = (pc * (1.0 - pc) / n as f64).sqrt();
        assert!((freq - pc).abs() < 5.0 * sigma, "freq {freq}");
    }

    #[test]
    fn chain_determinism_and_stream_separation() {
        let fam = dyson(0.5);
        let cfg = RcConfig::new(-16, 16, 2.0, Boundary::Free, fam).unwrap();
        let opts = RecordOptions {
            front_window: 8,
            keep_spins: true,
            ..Default::default()
        };
        let run = |seed: u64, chain_id: u64| {
            let mut c = RcChain::new(cfg.clone(), seed, chain_id).unwrap();
            let mut records = Vec::new();
            for _ in 0..20 {
                c.advance(5);
                records.push(c.record(&opts).unwrap());
            }
            records
        };
        assert_eq!(run(9, 0), run(9, 0));
        assert_ne!(run(9, 0), run(9, 1));
        assert_ne!(run(9, 0), run(10, 0));
    }

    #[test]
    fn exact_rc_q_one_is_product_measure() {
        let slots = vec![((0, 1), 0.3), ((1, 2), 0.6), ((0, 2), 0.11)];
        let exact = ExactRandomCluster::new(0, 3, slots.clone(), 1.0).unwrap();
        let product = bernoulli_law(&[0.3, 0.6, 0.11]);
        for mask in 0..8u64 {
            assert!((exact.prob(mask) - product[mask as usize]).abs() < 1e-14);
        }
        let total: f64 = exact.distribution().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_rc_single_edge_marginal_is_p_check() {
        let exact = ExactRandomCluster::new(0, 2, vec![((0, 1), 0.5)], 2.0).unwrap();
        assert!((exact.edge_marginal(0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((exact.connected_prob(0, 1) - 1.0 / 3.0).abs() < 1e-14);
        // Rejects oversized enumerations.
        let many = (0..25).map(|k| ((k, k + 25), 0.1)).collect();
        assert!(matches!(
            ExactRandomCluster::new(0, 64, many, 2.0),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn domination_sandwich_exact_small_volume() {
        // eta(p_check) <= RC_2(p) <= eta(p) over every increasing event.
        let fam = dyson(0.45);
        let slots: Vec<((i64, i64), f64)> = vec![
            ((0, 1), edge_probability(&fam, 1).0),
            ((1, 2), edge_probability(&fam, 1).0),
            ((2, 3), edge_probability(&fam, 1).0),
            ((0, 3), edge_probability(&fam, 3).0),
        ];
        let rc = ExactRandomCluster::new(0, 4, slots.clone(), 2.0).unwrap();
        let p: Vec<f64> = slots.iter().map(|&(_, p)| p).collect();
        let pc: Vec<f64> = p.iter().map(|&p| p / (2.0 - p)).collect();
        let eta_hi = bernoulli_law(&p);
        let eta_lo = bernoulli_law(&pc);
        let rc_law = rc.distribution();
        assert!(dominates(&eta_lo, &rc_law, 4, 1e-12).unwrap());
        assert!(dominates(&rc_law, &eta_hi, 4, 1e-12).unwrap());
        // And the sandwich is strict somewhere: eta(p) is not below RC_2.
        assert!(!dominates(&eta_hi, &rc_law, 4, 1e-9).unwrap());
    }

    #[test]
    fn wired_dominates_free_on_shared_slots() {
        let fam = dyson(0.5);
        let free = ExactRandomCluster::from_family(&fam, 0, 3, 2.0, Some(3)).unwrap();
        let wired = ExactRandomCluster::from_family_wired(&fam, 0, 3, 2.0, Some(3)).unwrap();
        assert_eq!(free.num_slots(), 3);
        assert_eq!(wired.num_slots(), 6);
        // Project the wired law onto the shared finite slots.
        let mut projected = vec![0.0; 8];
        for mask in 0..(1u64 << 6) {
            projected[(mask & 0b111) as usize] += wired.prob(mask);
        }
        assert!(dominates(&free.distribution(), &projected, 3, 1e-12).unwrap());
    }

    #[test]
    fn chain_marginals_match_exact_at_small_volume() {
        let fam = dyson(0.5);
        let exact = ExactRandomCluster::from_family(&fam, 0, 4, 2.0, None).unwrap();
        let cfg = RcConfig::new(0, 4, 2.0, Boundary::Free, fam).unwrap();
        let mut chain = RcChain::new(cfg, 11, 0).unwrap();
        chain.advance(500);
        let sweeps = 30_000;
        let mut freq = vec![0u64; exact.num_slots()];
        for _ in 0..sweeps {
            chain.sweep();
            let g = chain.graph();
            for (k, slot) in exact.slots().iter().enumerate() {
                if g.edges().contains(slot) {
                    freq[k] += 1;
                }
            }
        }
        for (k, &hits) in freq.iter().enumerate() {
            let expect = exact.edge_marginal(k);
            let got = hits as f64 / sweeps as f64;
            // Generous allowance for autocorrelation at this tiny volume.
            let sigma = (expect * (1.0 - expect) / sweeps as f64).sqrt();
            assert!(
                (got - expect).abs() < 8.0 * sigma,
                "slot {k}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn wired_chain_counts_boundary_connectivity() {
        let fam = dyson(0.6);
        let cfg = RcConfig::new(0, 16, 2.0, Boundary::Wired, fam).unwrap();
        let mut chain = RcChain::new(cfg, 3, 0).unwrap();
        chain.advance(50);
        let opts = RecordOptions {
            keep_spins: true,
            boundary_spin: 1,
            ..Default::default()
        };
        let mut saw_boundary_edge = false;
        for _ in 0..50 {
            chain.sweep();
            let rec = chain.record(&opts).unwrap();
            assert!(rec.clusters >= 1);
            assert!(rec.largest_cluster <= 16);
            assert_eq!(rec.spins.as_ref().unwrap().len(), 16);
            if rec.boundary_edges > 0 {
                saw_boundary_edge = true;
                // Vertices joined to the supervertex carry the forced spin.
                let slots = chain.boundary_slots();
                let spins = rec.spins.as_ref().unwrap();
                for v in slots {
                    assert_eq!(spins[v as usize], 1);
                }
            }
        }
        assert!(saw_boundary_edge, "wired boundary never connected");
    }

    #[test]
    fn spin_assignment_is_constant_per_cluster() {
        let g = FiniteGraph::new(0, 6, vec![(0, 3), (3, 5), (1, 2)]).unwrap();
        let cp = g.clusters();
        let spins = spin_assignment(&cp, 0, 6, 77, &[1, 2], None);
        assert_eq!(spins.len(), 6);
        assert_eq!(spins[0], spins[3]);
        assert_eq!(spins[0], spins[5]);
        assert_eq!(spins[1], spins[2]);
        for s in &spins {
            assert!(*s == 1 || *s == -1);
        }
        let forced = spin_assignment(&cp, 0, 6, 77, &[1, 2], Some((0, -1)));
        assert_eq!(forced[0], -1);
        assert_eq!(forced[3], -1);
        assert_eq!(forced[5], -1);
        // Unforced clusters keep their draw.
        assert_eq!(forced[1], spins[1]);
    }

    #[test]
    fn spin_frequency_is_balanced() {
        let g = FiniteGraph::empty(0, 1).unwrap();
        let cp = g.clusters();
        let n = 20_000;
        let mut plus = 0;
        for rep in 0..n {
            if spin_assignment(&cp, 0, 1, 123, &[rep], None)[0] == 1 {
                plus += 1;
            }
        }
        let freq = plus as f64 / n as f64;
        assert!(
            (freq - 0.5).abs() < 5.0 * (0.25 / n as f64).sqrt(),
            "{freq}"
        );
    }

    #[test]
    fn xi_sampler_records_are_deterministic_and_consistent() {
        let fam = dyson(0.3);
        let run = || {
            let mut xi = XiSampler::new(&fam, 32, 2.0, 17, 0).unwrap();
            xi.advance(50);
            let mut recs = Vec::new();
            for _ in 0..30 {
                xi.advance(2);
                recs.push(xi.record(8).unwrap());
            }
            recs
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        for rec in &a {
            assert!(rec.r0 <= rec.r_limit);
            assert!(rec.n_stat >= 0);
            assert_eq!(rec.front_clusters.as_ref().unwrap().len(), 8);
            if rec.h_edges == 0 {
                assert_eq!(rec.r_limit, 0);
                assert_eq!(rec.n_stat, 0);
            }
        }
        // Crossing edges do appear at this coupling strength.
        assert!(a.iter().any(|r| r.h_edges > 0));
    }

    #[test]
    fn two_sided_chain_cut_statistics_stabilise() {
        let fam = dyson(0.5);
        let cfg = RcConfig::new(-12, 12, 2.0, Boundary::Free, fam).unwrap();
        let mut chain = RcChain::new(cfg, 21, 0).unwrap();
        chain.advance(100);
        let opts = RecordOptions::default();
        for _ in 0..40 {
            chain.sweep();
            let rec = chain.record(&opts).unwrap();
            // Cross-check the recorded cut statistics against the graph.
            let cut = CutDecomposition::split(&chain.graph());
            assert_eq!(rec.h_edges, cut.h_size() as u64);
            assert_eq!(rec.r0, cut.corank_rn(0));
            assert_eq!(rec.r_limit, cut.r_limit());
            let (_, n) = cut.frontier_and_n();
            assert_eq!(rec.n_stat, n);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let fam = dyson(0.5);
        assert!(RcConfig::new(0, 1, 2.0, Boundary::Free, fam.clone()).is_err());
        assert!(RcConfig::new(0, 8, 0.5, Boundary::Free, fam.clone()).is_err());
        assert!(ExactRandomCluster::new(0, 2, vec![((0, 0), 0.5)], 2.0).is_err());
        assert!(ExactRandomCluster::new(0, 2, vec![((0, 1), 1.5)], 2.0).is_err());
        assert!(dominates(&[0.5, 0.5], &[1.0], 1, 1e-12).is_err());
    }
}
