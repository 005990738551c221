//! Exact brute-force enumeration at tiny volumes: spin Gibbs laws, the
//! joint FK law over (spin word, subgraph) pairs, and machine-precision
//! verification of the structural identities the larger-scale estimators
//! rely on.
//!
//! An optional interaction-range cutoff (couplings treated as zero beyond
//! it) keeps candidate-edge counts enumerable while still exercising
//! genuinely long edges; the cutoff defines the model and is applied
//! identically to both sides of every identity.  All accumulation uses
//! compensated summation; identity thresholds are 1e-10 to absorb
//! normaliser roundoff (observed discrepancies sit near 1e-15).

use crate::couplings::CouplingFamily;
use crate::graphs::{CutDecomposition, FiniteGraph};
use crate::numeric::KahanSum;
use crate::sampler::{bernoulli_law, domination_gap, edge_probability, ExactRandomCluster};
use crate::{Error, Result};
use std::fmt;

/// Largest spin volume for exact enumeration (`2^n` words).
pub const MAX_SPIN_VOLUME: usize = 20;
/// Largest candidate-edge count for the joint law and identity checks.
pub const MAX_JOINT_EDGES: usize = 20;

/// All interacting pair slots inside `[lo, hi)` (optionally within a range
/// cutoff) with their present-probabilities.
pub fn slot_list(
    fam: &CouplingFamily,
    lo: i64,
    hi: i64,
    range_cutoff: Option<u64>,
) -> Vec<((i64, i64), f64)> {
    let mut slots = Vec::new();
    for a in lo..hi {
        for b in (a + 1)..hi {
            let d = (b - a) as u64;
            if range_cutoff.is_some_and(|cut| d > cut) {
                continue;
            }
            let (p, _) = edge_probability(fam, d);
            if p > 0.0 {
                slots.push(((a, b), p));
            }
        }
    }
    slots
}

/// Exact Gibbs law over spin words on `[lo, hi)` with energy
/// `sum_{i<j} beta J(j-i) x_i x_j` plus optional fixed spins outside the
/// volume contributing `sum beta J(|i-j|) x_i b_j`.
///
/// Word encoding: bit `k` is the spin at site `lo + k`, set bit = `+1`.
pub struct ExactSpinGibbs {
    lo: i64,
    hi: i64,
    log_weight: Vec<f64>,
    log_z: f64,
}

impl ExactSpinGibbs {
    pub fn new(
        fam: &CouplingFamily,
        lo: i64,
        hi: i64,
        boundary: &[(i64, i8)],
        range_cutoff: Option<u64>,
    ) -> Result<Self> {
        if hi <= lo {
            return Err(Error::BadVolume(format!("[{lo}, {hi})")));
        }
        let nv = (hi - lo) as usize;
        if nv > MAX_SPIN_VOLUME {
            return Err(Error::EnumerationTooLarge {
                what: "spin volume",
                count: nv,
                cap: MAX_SPIN_VOLUME,
            });
        }
        for &(site, spin) in boundary {
            if (lo..hi).contains(&site) {
                return Err(Error::Invalid(format!(
                    "boundary site {site} inside volume"
                )));
            }
            if spin != 1 && spin != -1 {
                return Err(Error::BadSymbol(spin));
            }
        }
        // Interior pair couplings and the per-site boundary field.
        let mut pairs = Vec::new();
        for a in lo..hi {
            for b in (a + 1)..hi {
                let d = (b - a) as u64;
                if range_cutoff.is_some_and(|cut| d > cut) {
                    continue;
                }
                let j = fam.coupling_value(d);
                if j != 0.0 {
                    pairs.push(((a - lo) as usize, (b - lo) as usize, j));
                }
            }
        }
        let mut field = vec![KahanSum::new(); nv];
        for &(site, spin) in boundary {
            for off in 0..nv {
                let d = (lo + off as i64 - site).unsigned_abs();
                if range_cutoff.is_some_and(|cut| d > cut) {
                    continue;
                }
                field[off].add(fam.coupling_value(d) * f64::from(spin));
            }
        }
        let field: Vec<f64> = field.iter().map(KahanSum::value).collect();
        let mut log_weight = Vec::with_capacity(1usize << nv);
        for word in 0u64..(1 << nv) {
            let spin = |k: usize| if word >> k & 1 == 1 { 1.0 } else { -1.0 };
            let mut energy = KahanSum::new();
            for &(a, b, j) in &pairs {
                energy.add(j * spin(a) * spin(b));
            }
            for (off, &f) in field.iter().enumerate() {
                energy.add(f * spin(off));
            }
            log_weight.push(energy.value());
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
            log_weight,
            log_z,
        })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn num_atoms(&self) -> usize {
        self.log_weight.len()
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn prob(&self, word: u64) -> f64 {
        (self.log_weight[word as usize] - self.log_z).exp()
    }

    /// Spin at `site` under the word encoding.
    pub fn spin_of(&self, word: u64, site: i64) -> i8 {
        if word >> (site - self.lo) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    pub fn expect(&self, f: impl Fn(u64) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for word in 0..self.log_weight.len() as u64 {
            acc.add(self.prob(word) * f(word));
        }
        acc.value()
    }

    /// Probability of the cylinder fixing the given site spins.
    pub fn cylinder_prob(&self, fixed: &[(i64, i8)]) -> Result<f64> {
        let mut mask = 0u64;
        let mut want = 0u64;
        for &(site, spin) in fixed {
            if !(self.lo..self.hi).contains(&site) {
                return Err(Error::VertexOutsideVolume(site));
            }
            if spin != 1 && spin != -1 {
                return Err(Error::BadSymbol(spin));
            }
            let bit = 1u64 << (site - self.lo);
            mask |= bit;
            if spin == 1 {
                want |= bit;
            }
        }
        Ok(self.expect(|word| f64::from(word & mask == want)))
    }

    pub fn two_point(&self, i: i64, j: i64) -> f64 {
        self.expect(|word| f64::from(self.spin_of(word, i)) * f64::from(self.spin_of(word, j)))
    }

    pub fn magnetisation(&self, i: i64) -> f64 {
        self.expect(|word| f64::from(self.spin_of(word, i)))
    }

    pub fn distribution(&self) -> Vec<f64> {
        (0..self.log_weight.len() as u64)
            .map(|w| self.prob(w))
            .collect()
    }
}

/// Exact joint FK law over compatible (spin word, subgraph) pairs:
/// weight `prod_{e in G} p_e prod_{e not in G} (1 - p_e)` restricted to
/// pairs where every present edge joins equal spins.  Its graph marginal is
/// the `q = 2` random-cluster law and its spin marginal the free-boundary
/// Gibbs law over the same slot model; both are recomputed independently
/// and checked at construction.
pub struct ExactFkJoint {
    lo: i64,
    hi: i64,
    slots: Vec<(i64, i64)>,
    /// Per graph mask: log of the pure edge weight (no cluster factor).
    log_edge_weight: Vec<f64>,
    /// Per graph mask: cluster count.
    wf: Vec<u32>,
    log_z: f64,
    graph_marginal_gap: f64,
    spin_marginal_gap: f64,
}

impl ExactFkJoint {
    pub fn new(fam: &CouplingFamily, lo: i64, hi: i64, range_cutoff: Option<u64>) -> Result<Self> {
        let slots_p = slot_list(fam, lo, hi, range_cutoff);
        if slots_p.len() > MAX_JOINT_EDGES {
            return Err(Error::EnumerationTooLarge {
                what: "joint candidate edges",
                count: slots_p.len(),
                cap: MAX_JOINT_EDGES,
            });
        }
        let nv = (hi - lo) as usize;
        if nv > MAX_SPIN_VOLUME {
            return Err(Error::EnumerationTooLarge {
                what: "spin volume",
                count: nv,
                cap: MAX_SPIN_VOLUME,
            });
        }
        let slots: Vec<(i64, i64)> = slots_p.iter().map(|&(s, _)| s).collect();
        let log_p: Vec<f64> = slots_p.iter().map(|&(_, p)| p.ln()).collect();
        let log_1mp: Vec<f64> = slots_p.iter().map(|&(_, p)| (-p).ln_1p()).collect();
        let n = slots.len();
        let mut log_edge_weight = Vec::with_capacity(1usize << n);
        let mut wf = Vec::with_capacity(1usize << n);
        for mask in 0u64..(1 << n) {
            let mut lw = KahanSum::new();
            for k in 0..n {
                lw.add(if mask >> k & 1 == 1 {
                    log_p[k]
                } else {
                    log_1mp[k]
                });
            }
            log_edge_weight.push(lw.value());
            let g = FiniteGraph::from_mask(lo, hi, &slots, mask)?;
            wf.push(g.clusters().count());
        }
        // Joint normaliser: sum over masks of edge weight * 2^{w} (each
        // mask admits 2^{w} compatible words).
        let max = log_edge_weight
            .iter()
            .zip(&wf)
            .map(|(&lw, &w)| lw + f64::from(w) * std::f64::consts::LN_2)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = KahanSum::new();
        for (lw, &w) in log_edge_weight.iter().zip(&wf) {
            z.add((lw + f64::from(w) * std::f64::consts::LN_2 - max).exp());
        }
        let log_z = max + z.value().ln();
        let mut joint = Self {
            lo,
            hi,
            slots,
            log_edge_weight,
            wf,
            log_z,
            graph_marginal_gap: 0.0,
            spin_marginal_gap: 0.0,
        };
        // Internal consistency: graph marginal against an independently
        // enumerated random-cluster law, spin marginal against the Gibbs law.
        let rc = ExactRandomCluster::new(lo, hi, slots_p, 2.0)?;
        let mut ggap: f64 = 0.0;
        for mask in 0..joint.num_masks() {
            ggap = ggap.max((joint.graph_marginal(mask) - rc.prob(mask)).abs());
        }
        let gibbs = ExactSpinGibbs::new(fam, lo, hi, &[], range_cutoff)?;
        let mut sgap: f64 = 0.0;
        for word in 0..(1u64 << nv) {
            sgap = sgap.max((joint.spin_marginal(word) - gibbs.prob(word)).abs());
        }
        if ggap > 1e-12 || sgap > 1e-12 {
            return Err(Error::Invalid(format!(
                "joint marginal consistency failed: graph {ggap:.3e}, spin {sgap:.3e}"
            )));
        }
        joint.graph_marginal_gap = ggap;
        joint.spin_marginal_gap = sgap;
        Ok(joint)
    }

    pub fn slots(&self) -> &[(i64, i64)] {
        &self.slots
    }

    pub fn num_masks(&self) -> u64 {
        self.log_edge_weight.len() as u64
    }

    pub fn num_words(&self) -> u64 {
        1u64 << (self.hi - self.lo)
    }

    /// Largest deviations found by the construction-time marginal checks.
    pub fn marginal_gaps(&self) -> (f64, f64) {
        (self.graph_marginal_gap, self.spin_marginal_gap)
    }

    /// Does every present edge of `mask` join equal spins of `word`?
    pub fn compatible(&self, mask: u64, word: u64) -> bool {
        self.slots.iter().enumerate().all(|(k, &(a, b))| {
            mask >> k & 1 == 0 || (word >> (a - self.lo) & 1) == (word >> (b - self.lo) & 1)
        })
    }

    pub fn joint_prob(&self, mask: u64, word: u64) -> f64 {
        if self.compatible(mask, word) {
            (self.log_edge_weight[mask as usize] - self.log_z).exp()
        } else {
            0.0
        }
    }

    pub fn graph_marginal(&self, mask: u64) -> f64 {
        let m = mask as usize;
        (self.log_edge_weight[m] + f64::from(self.wf[m]) * std::f64::consts::LN_2 - self.log_z)
            .exp()
    }

    pub fn spin_marginal(&self, word: u64) -> f64 {
        let mut acc = KahanSum::new();
        for mask in 0..self.num_masks() {
            acc.add(self.joint_prob(mask, word));
        }
        acc.value()
    }

    /// Cluster count of the subgraph selected by `mask` (over this law's
    /// own slot ordering).
    pub fn cluster_count(&self, mask: u64) -> u32 {
        self.wf[mask as usize]
    }

    /// Conditional spin law given the graph: uniform over the `2^{w}`
    /// compatible words.
    pub fn conditional_spin(&self, mask: u64, word: u64) -> f64 {
        if self.compatible(mask, word) {
            0.5f64.powi(self.wf[mask as usize] as i32)
        } else {
            0.0
        }
    }
}

/// One verified identity: its worst-case deviation over all enumerated
/// atoms against the declared threshold.
#[derive(Clone, Debug)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub cases: u64,
    pub max_discrepancy: f64,
    pub tol: f64,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        self.max_discrepancy <= self.tol
    }
}

/// Discrepancy table produced by [`verify_identities`].
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub l: i64,
    pub range_cutoff: u64,
    pub num_slots: usize,
    /// Normaliser of the assembled product law.
    pub k0: f64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(IdentityCheck::pass)
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.max_discrepancy)
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "identity checks on [-{l}, {l}), range cutoff {cut}, {n} slots, K0 = {k0:.12}",
            l = self.l,
            cut = self.range_cutoff,
            n = self.num_slots,
            k0 = self.k0
        )?;
        writeln!(
            f,
            "{:<28} {:>9} {:>14} {:>9} {:>6}",
            "identity", "cases", "max|disc|", "tol", "status"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<28} {:>9} {:>14.3e} {:>9.0e} {:>6}",
                c.name,
                c.cases,
                c.max_discrepancy,
                c.tol,
                if c.pass() { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Evaluates every structural identity exactly on the two-sided volume
/// `[-L, L)` under the given range cutoff: the joint-law marginal pair, the
/// cylinder formula, the whole-graph and window cluster-count identities,
/// the two-sided factorisation of the `q = 2` law through the origin cut,
/// the per-graph uniformity of the conditional spin law, and the edge
/// domination sandwich.
pub fn verify_identities(
    fam: &CouplingFamily,
    l: i64,
    range_cutoff: u64,
) -> Result<IdentityReport> {
    if l < 1 {
        return Err(Error::BadVolume(format!("[-{l}, {l})")));
    }
    let (lo, hi) = (-l, l);
    let nv = (hi - lo) as usize;
    // Slot list ordered plus, minus, crossing so masks split by bit range.
    let plus = slot_list(fam, 0, hi, Some(range_cutoff));
    let minus = slot_list(fam, lo, 0, Some(range_cutoff));
    let crossing: Vec<((i64, i64), f64)> = slot_list(fam, lo, hi, Some(range_cutoff))
        .into_iter()
        .filter(|&((a, b), _)| a < 0 && b >= 0)
        .collect();
    let (np, nm, nh) = (plus.len(), minus.len(), crossing.len());
    let n_slots = np + nm + nh;
    if n_slots > MAX_JOINT_EDGES {
        return Err(Error::EnumerationTooLarge {
            what: "two-sided candidate edges",
            count: n_slots,
            cap: MAX_JOINT_EDGES,
        });
    }
    let mut all_slots = plus.clone();
    all_slots.extend_from_slice(&minus);
    all_slots.extend_from_slice(&crossing);
    let slots: Vec<(i64, i64)> = all_slots.iter().map(|&(s, _)| s).collect();
    let mu = ExactRandomCluster::new(lo, hi, all_slots.clone(), 2.0)?;
    let n_masks = 1u64 << n_slots;
    let mut checks = Vec::new();

    // Per-mask structure: cluster labels, cut decomposition, counts.
    let mut labels_by_mask: Vec<Vec<i64>> = Vec::with_capacity(n_masks as usize);
    let mut cuts: Vec<CutDecomposition> = Vec::with_capacity(n_masks as usize);
    let mut w_by_mask: Vec<u32> = Vec::with_capacity(n_masks as usize);
    for mask in 0..n_masks {
        let g = FiniteGraph::from_mask(lo, hi, &slots, mask)?;
        let cp = g.clusters();
        labels_by_mask.push((lo..hi).map(|v| cp.label_of(v)).collect());
        w_by_mask.push(cp.count());
        cuts.push(CutDecomposition::split(&g));
    }

    // Joint-law marginal consistency (graph against an independent
    // enumeration, spins against the Gibbs law).
    let joint = ExactFkJoint::new(fam, lo, hi, Some(range_cutoff))?;
    let (ggap, sgap) = joint.marginal_gaps();
    checks.push(IdentityCheck {
        name: "fk graph marginal",
        cases: n_masks,
        max_discrepancy: ggap,
        tol: 1e-12,
    });
    checks.push(IdentityCheck {
        name: "fk spin marginal",
        cases: 1 << nv,
        max_discrepancy: sgap,
        tol: 1e-12,
    });

    // Cylinder formula: P_spin([x_F]) = E_mu[2^{-w_F} B_F] for every F and
    // every assignment on F.
    let gibbs = ExactSpinGibbs::new(fam, lo, hi, &[], Some(range_cutoff))?;
    let mu_probs = mu.distribution();
    let mut cyl_gap: f64 = 0.0;
    let mut cyl_cases = 0u64;
    for f_mask in 0u64..(1 << nv) {
        let sites: Vec<usize> = (0..nv).filter(|&k| f_mask >> k & 1 == 1).collect();
        for assign in 0u64..(1 << sites.len()) {
            let fixed: Vec<(i64, i8)> = sites
                .iter()
                .enumerate()
                .map(|(idx, &k)| (lo + k as i64, if assign >> idx & 1 == 1 { 1 } else { -1 }))
                .collect();
            let lhs = gibbs.cylinder_prob(&fixed)?;
            let mut rhs = KahanSum::new();
            for mask in 0..n_masks {
                let labels = &labels_by_mask[mask as usize];
                // Distinct clusters meeting F, and spin constancy per label.
                let mut seen: Vec<(i64, i8)> = Vec::with_capacity(sites.len());
                let mut compatible = true;
                let mut w_f = 0u32;
                'sites: for (idx, &k) in sites.iter().enumerate() {
                    let label = labels[k];
                    let spin = if assign >> idx & 1 == 1 { 1i8 } else { -1 };
                    for &(sl, ss) in &seen {
                        if sl == label {
                            if ss != spin {
                                compatible = false;
                                break 'sites;
                            }
                            continue 'sites;
                        }
                    }
                    seen.push((label, spin));
                    w_f += 1;
                }
                if compatible {
                    rhs.add(mu_probs[mask as usize] * 0.5f64.powi(w_f as i32));
                }
            }
            cyl_gap = cyl_gap.max((lhs - rhs.value()).abs());
            cyl_cases += 1;
        }
    }
    checks.push(IdentityCheck {
        name: "cylinder probabilities",
        cases: cyl_cases,
        max_discrepancy: cyl_gap,
        tol: 1e-12,
    });

    // Whole-graph cluster-count identity, atom by atom over integers:
    // w(G) = w(G+) + w(G-) - |H| + R_0.
    let mut mat_gap = 0i64;
    for mask in 0..n_masks {
        let cut = &cuts[mask as usize];
        // Counts on the one-sided graphs without the opposite side's
        // isolated vertices.
        let wp = cut.plus_graph().clusters().count() as i64 - l;
        let wm = FiniteGraph::new(lo, hi, cut.g_minus().to_vec())?
            .clusters()
            .count() as i64
            - l;
        let lhs = i64::from(w_by_mask[mask as usize]);
        let rhs = wp + wm - cut.h_size() as i64 + i64::from(cut.corank_rn(0));
        mat_gap = mat_gap.max((lhs - rhs).abs());
    }
    checks.push(IdentityCheck {
        name: "whole-graph cluster count",
        cases: n_masks,
        max_discrepancy: mat_gap as f64,
        tol: 0.0,
    });

    // Window cluster-count identity: w_n(G+) - w_n(G) = R_n - R_0.
    let mut wr_gap = 0i64;
    let mut wr_cases = 0u64;
    for mask in 0..n_masks {
        let cut = &cuts[mask as usize];
        let g = FiniteGraph::from_mask(lo, hi, &slots, mask)?;
        let plus_graph = cut.plus_graph();
        let r0 = i64::from(cut.corank_rn(0));
        for n in 1..=l {
            let f: Vec<i64> = (0..n).collect();
            let lhs = plus_graph.count_wf(&f)? as i64 - g.count_wf(&f)? as i64;
            let rhs = i64::from(cut.corank_rn(n)) - r0;
            wr_gap = wr_gap.max((lhs - rhs).abs());
            wr_cases += 1;
        }
    }
    checks.push(IdentityCheck {
        name: "window cluster counts",
        cases: wr_cases,
        max_discrepancy: wr_gap as f64,
        tol: 0.0,
    });

    // Two-sided factorisation: mu(G) = (1/K0) 2^{R_0} nu(G+) nu(G-) eta(H)
    // with eta the independent law at the single-edge connection values.
    let nu_plus = ExactRandomCluster::new(0, hi, plus.clone(), 2.0)?;
    let nu_minus = ExactRandomCluster::new(lo, 0, minus.clone(), 2.0)?;
    let eta_check = bernoulli_law(
        &crossing
            .iter()
            .map(|&(_, p)| p / (2.0 - p))
            .collect::<Vec<f64>>(),
    );
    let split_mask = |mask: u64| {
        let mp = mask & ((1u64 << np) - 1);
        let mm = (mask >> np) & ((1u64 << nm) - 1);
        let mh = mask >> (np + nm);
        (mp, mm, mh)
    };
    let mut k0_acc = KahanSum::new();
    for mask in 0..n_masks {
        let (mp, mm, mh) = split_mask(mask);
        let r0 = cuts[mask as usize].corank_rn(0);
        k0_acc.add(
            2.0f64.powi(r0 as i32) * nu_plus.prob(mp) * nu_minus.prob(mm) * eta_check[mh as usize],
        );
    }
    let k0 = k0_acc.value();
    let mut rep_gap: f64 = 0.0;
    for mask in 0..n_masks {
        let (mp, mm, mh) = split_mask(mask);
        let r0 = cuts[mask as usize].corank_rn(0);
        let rhs =
            2.0f64.powi(r0 as i32) * nu_plus.prob(mp) * nu_minus.prob(mm) * eta_check[mh as usize]
                / k0;
        rep_gap = rep_gap.max((mu_probs[mask as usize] - rhs).abs());
    }
    checks.push(IdentityCheck {
        name: "two-sided factorisation",
        cases: n_masks,
        max_discrepancy: rep_gap,
        tol: 1e-10,
    });

    // Conditional spin law per graph: uniform over compatible words.  The
    // joint law orders slots (a, b)-ascending, so use its own cluster count.
    let mut cond_gap: f64 = 0.0;
    for mask in 0..joint.num_masks() {
        let mut total = KahanSum::new();
        let uniform = 0.5f64.powi(joint.cluster_count(mask) as i32);
        for word in 0..joint.num_words() {
            let c = joint.conditional_spin(mask, word);
            total.add(c);
            if c != 0.0 {
                cond_gap = cond_gap.max((c - uniform).abs());
            }
        }
        cond_gap = cond_gap.max((total.value() - 1.0).abs());
    }
    checks.push(IdentityCheck {
        name: "conditional spin law",
        cases: joint.num_masks() * joint.num_words(),
        max_discrepancy: cond_gap,
        tol: 1e-12,
    });

    // Domination sandwich over every increasing event, on the first up to
    // four slots taken as a model of their own.
    let dom_slots: Vec<((i64, i64), f64)> = all_slots.iter().copied().take(4).collect();
    let dn = dom_slots.len();
    let rc_dom = ExactRandomCluster::new(lo, hi, dom_slots.clone(), 2.0)?;
    let p_dom: Vec<f64> = dom_slots.iter().map(|&(_, p)| p).collect();
    let pc_dom: Vec<f64> = p_dom.iter().map(|&p| p / (2.0 - p)).collect();
    let rc_law = rc_dom.distribution();
    let gap_lower = domination_gap(&bernoulli_law(&pc_dom), &rc_law, dn)?;
    let gap_upper = domination_gap(&rc_law, &bernoulli_law(&p_dom), dn)?;
    checks.push(IdentityCheck {
        name: "edge domination sandwich",
        cases: 1u64 << (1u64 << dn),
        max_discrepancy: gap_lower.max(gap_upper),
        tol: 1e-12,
    });

    Ok(IdentityReport {
        l,
        range_cutoff,
        num_slots: n_slots,
        k0,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_gibbs_uniform_at_zero_coupling() {
        let fam = CouplingFamily::dyson(2.0, 0.0).unwrap();
        let law = ExactSpinGibbs::new(&fam, 0, 4, &[], None).unwrap();
        for word in 0..16 {
            assert!((law.prob(word) - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn spin_gibbs_two_sites_closed_form() {
        // P(++) = e^beta / (2 e^beta + 2 e^{-beta}) when J(1) = beta.
        let beta = 0.7;
        let fam = CouplingFamily::finite_range(vec![0.0, 1.0], beta).unwrap();
        let law = ExactSpinGibbs::new(&fam, 0, 2, &[], None).unwrap();
        let expect = beta.exp() / (2.0 * beta.exp() + 2.0 * (-beta).exp());
        assert!((law.prob(0b11) - expect).abs() < 1e-15);
        assert!((law.prob(0b00) - expect).abs() < 1e-15);
        // Two-point value is tanh(beta), the single-edge bridge value.
        assert!((law.two_point(0, 1) - beta.tanh()).abs() < 1e-14);
        let total: f64 = law.distribution().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_gibbs_flip_symmetry_free_boundary() {
        let fam = CouplingFamily::dyson(1.7, 0.6).unwrap();
        let law = ExactSpinGibbs::new(&fam, -3, 3, &[], None).unwrap();
        let full = (1u64 << 6) - 1;
        for word in 0..1u64 << 6 {
            assert!((law.prob(word) - law.prob(word ^ full)).abs() < 1e-14);
        }
        assert!(law.magnetisation(0).abs() < 1e-12);
    }

    #[test]
    fn spin_gibbs_boundary_field_breaks_symmetry() {
        // Single site with a plus neighbour outside: P(+) = e^J/(2 cosh J).
        let fam = CouplingFamily::finite_range(vec![0.0, 1.0], 0.5).unwrap();
        let law = ExactSpinGibbs::new(&fam, 0, 1, &[(-1, 1)], None).unwrap();
        let j = 0.5f64;
        let expect = j.exp() / (2.0 * j.cosh());
        assert!((law.prob(0b1) - expect).abs() < 1e-15);
        assert!(law.magnetisation(0) > 0.0);
        // Boundary sites inside the volume are rejected.
        assert!(ExactSpinGibbs::new(&fam, 0, 2, &[(1, 1)], None).is_err());
    }

    #[test]
    fn spin_gibbs_cylinder_marginalises() {
        let fam = CouplingFamily::dyson(2.0, 0.4).unwrap();
        let law = ExactSpinGibbs::new(&fam, 0, 4, &[], None).unwrap();
        // Fixing every site recovers the atom; fixing none gives 1.
        assert!((law.cylinder_prob(&[]).unwrap() - 1.0).abs() < 1e-12);
        let fixed = [(0, 1i8), (1, -1), (2, -1), (3, 1)];
        assert!((law.cylinder_prob(&fixed).unwrap() - law.prob(0b1001)).abs() < 1e-15);
        // Single-site marginal by symmetry.
        assert!((law.cylinder_prob(&[(2, 1)]).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn fk_joint_zero_coupling_is_uniform_empty() {
        let fam = CouplingFamily::dyson(2.0, 0.0).unwrap();
        let joint = ExactFkJoint::new(&fam, 0, 3, None).unwrap();
        assert_eq!(joint.num_masks(), 1);
        for word in 0..8 {
            assert!((joint.joint_prob(0, word) - 1.0 / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fk_joint_single_edge_eight_atoms() {
        // Hand enumeration: masks {0,1} x words {--, -+, +-, ++}; the edge
        // requires equal spins, so Z = 2p + 4(1-p).
        let fam = CouplingFamily::finite_range(vec![0.0, std::f64::consts::LN_2], 0.5).unwrap();
        let joint = ExactFkJoint::new(&fam, 0, 2, None).unwrap();
        let p = 0.5;
        let z = 2.0 * p + 4.0 * (1.0 - p);
        for (mask, word, expect) in [
            (1u64, 0b11u64, p / z),
            (1, 0b00, p / z),
            (1, 0b01, 0.0),
            (1, 0b10, 0.0),
            (0, 0b11, (1.0 - p) / z),
            (0, 0b01, (1.0 - p) / z),
        ] {
            assert!(
                (joint.joint_prob(mask, word) - expect).abs() < 1e-14,
                "mask {mask} word {word}"
            );
        }
        // P(edge present) = p / (p + 2(1-p)) = p_check.
        let present: f64 = (0..4).map(|w| joint.joint_prob(1, w)).sum();
        assert!((present - p / (p + 2.0 * (1.0 - p))).abs() < 1e-14);
    }

    #[test]
    fn fk_joint_marginal_gaps_at_machine_precision() {
        let fam = CouplingFamily::dyson(2.0, 0.45).unwrap();
        let joint = ExactFkJoint::new(&fam, -2, 2, Some(3)).unwrap();
        let (g, s) = joint.marginal_gaps();
        assert!(g < 1e-13, "graph marginal gap {g}");
        assert!(s < 1e-13, "spin marginal gap {s}");
        // The joint law itself sums to one.
        let mut total = 0.0;
        for mask in 0..joint.num_masks() {
            for word in 0..joint.num_words() {
                total += joint.joint_prob(mask, word);
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn verify_identities_passes_at_l2() {
        let fam = CouplingFamily::dyson(2.0, 0.4).unwrap();
        let report = verify_identities(&fam, 2, 3).unwrap();
        assert_eq!(report.num_slots, 6);
        assert!(report.all_pass(), "{report}");
        assert!(report.max_discrepancy() < 1e-12, "{report}");
        let shown = report.to_string();
        assert!(shown.contains("two-sided factorisation"));
        assert!(shown.contains("pass"));
    }

    #[test]
    fn verify_identities_degenerates_at_zero_coupling() {
        let fam = CouplingFamily::dyson(2.0, 0.0).unwrap();
        let report = verify_identities(&fam, 2, 3).unwrap();
        assert_eq!(report.num_slots, 0);
        assert!((report.k0 - 1.0).abs() < 1e-14);
        assert!(report.all_pass());
    }

    #[test]
    fn verify_identities_passes_at_l3() {
        let fam = CouplingFamily::dyson(1.8, 0.5).unwrap();
        let report = verify_identities(&fam, 3, 3).unwrap();
        assert_eq!(report.num_slots, 12);
        assert!(report.all_pass(), "{report}");
        assert!(report.max_discrepancy() < 1e-11, "{report}");
    }

    #[test]
    fn verify_identities_rejects_oversized_models() {
        let fam = CouplingFamily::dyson(2.0, 0.4).unwrap();
        assert!(matches!(
            verify_identities(&fam, 4, 4),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(verify_identities(&fam, 0, 3).is_err());
    }
}
