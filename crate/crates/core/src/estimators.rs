//! Monte Carlo estimators over sweep-record streams: cylinder
//! probabilities, likelihood ratios, cosh-product functionals, cut
//! statistics with the uniform convergence bound, cluster-size tails with
//! exponential fits, moment bounds, and coupling-strength scans.
//!
//! Standard errors over MCMC streams use batch means with a documented
//! batch count of 32, which absorbs autocorrelation without spectral
//! estimation.  Products of cosh values and powers of two accumulate in log
//! domain throughout.

use crate::couplings::{CouplingFamily, SpinWord};
use crate::graphs::FiniteGraph;
use crate::numeric::{log_cosh, log_sum_exp, KahanSum};
use crate::rng::{self, domain};
use crate::sampler::{Boundary, RcChain, RcConfig, SweepRecord};
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Batch count for batch-means standard errors.
pub const BATCH_COUNT: usize = 32;

/// A Monte Carlo point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    /// When set, `mean` is the logarithm of the estimated quantity and
    /// `std_error` applies on the log scale.
    pub log_domain: bool,
}

impl Estimate {
    pub fn ci_half_width(&self) -> f64 {
        1.96 * self.std_error
    }

    /// |mean - reference| measured in standard errors.
    pub fn sigmas_from(&self, reference: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == reference {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - reference).abs() / self.std_error
        }
    }
}

/// Mean and batch-means standard error of a value stream.  Short streams
/// (fewer than two values per batch) fall back to the iid standard error.
pub fn batch_means(values: &[f64]) -> Result<Estimate> {
    if values.is_empty() {
        return Err(Error::EmptyStream);
    }
    let n = values.len();
    let mut total = KahanSum::new();
    for &v in values {
        total.add(v);
    }
    let mean = total.value() / n as f64;
    let std_error = if n >= 2 * BATCH_COUNT {
        let base = n / BATCH_COUNT;
        let extra = n % BATCH_COUNT;
        let mut start = 0;
        let mut batch_var = KahanSum::new();
        for b in 0..BATCH_COUNT {
            let len = base + usize::from(b < extra);
            let mut bm = KahanSum::new();
            for &v in &values[start..start + len] {
                bm.add(v);
            }
            let d = bm.value() / len as f64 - mean;
            batch_var.add(d * d);
            start += len;
        }
        (batch_var.value() / (BATCH_COUNT as f64 - 1.0) / BATCH_COUNT as f64).sqrt()
    } else if n >= 2 {
        let mut var = KahanSum::new();
        for &v in values {
            var.add((v - mean) * (v - mean));
        }
        (var.value() / (n as f64 - 1.0) / n as f64).sqrt()
    } else {
        0.0
    };
    Ok(Estimate {
        mean,
        std_error,
        n_samples: n as u64,
        log_domain: false,
    })
}

fn front_labels(rec: &SweepRecord) -> Result<&[i64]> {
    rec.front_clusters
        .as_deref()
        .ok_or_else(|| Error::Invalid("record stream lacks front cluster labels".into()))
}

/// Per-record value of the cylinder functional `2^{-w_F} B_F(x_F, G)`.
fn cylinder_value(x_f: &[(i64, i8)], labels: &[i64]) -> Result<f64> {
    let mut seen: Vec<(i64, i8)> = Vec::with_capacity(x_f.len());
    let mut w_f = 0u32;
    for &(site, spin) in x_f {
        if spin != 1 && spin != -1 {
            return Err(Error::BadSymbol(spin));
        }
        if site < 0 || site as usize >= labels.len() {
            return Err(Error::VertexOutsideVolume(site));
        }
        let label = labels[site as usize];
        match seen.iter().find(|&&(l, _)| l == label) {
            Some(&(_, s)) if s != spin => return Ok(0.0),
            Some(_) => {}
            None => {
                seen.push((label, spin));
                w_f += 1;
            }
        }
    }
    Ok(0.5f64.powi(w_f as i32))
}

/// Per-record stream of the cylinder functional `2^{-w_F} B_F`.  Sites are
/// addressed relative to the recorded front window (site `k` is the `k`-th
/// labelled site).
pub fn cylinder_values(x_f: &[(i64, i8)], records: &[SweepRecord]) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut values = Vec::with_capacity(records.len());
    for rec in records {
        values.push(cylinder_value(x_f, front_labels(rec)?)?);
    }
    Ok(values)
}

/// Monte Carlo estimate of the cylinder probability `alpha([x]_F)` as the
/// stream mean of `2^{-w_F} B_F`.
pub fn cylinder_probability(x_f: &[(i64, i8)], records: &[SweepRecord]) -> Result<Estimate> {
    batch_means(&cylinder_values(x_f, records)?)
}

/// Likelihood-ratio estimate `h_n(x) = mu([x]_n) / nu([x]_n)` from two
/// independent record streams.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct HnEstimate {
    pub numerator: Estimate,
    pub denominator: Estimate,
    /// Ratio with delta-method standard error; absent when either cylinder
    /// estimate vanishes (the ratio is then not estimable from this stream).
    pub ratio: Option<Estimate>,
    /// Records contributing a nonzero cylinder value to each side.
    pub numerator_hits: u64,
    pub denominator_hits: u64,
}

impl HnEstimate {
    pub fn estimable(&self) -> bool {
        self.ratio.is_some()
    }
}

pub fn likelihood_ratio_hn(
    x: &SpinWord,
    n: usize,
    two_sided: &[SweepRecord],
    one_sided: &[SweepRecord],
) -> Result<HnEstimate> {
    if n > x.len() {
        return Err(Error::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let x_f: Vec<(i64, i8)> = (0..n).map(|k| (k as i64, x.symbols()[k])).collect();
    let numerator = cylinder_probability(&x_f, two_sided)?;
    let denominator = cylinder_probability(&x_f, one_sided)?;
    let hits = |records: &[SweepRecord]| -> Result<u64> {
        let mut h = 0;
        for rec in records {
            if cylinder_value(&x_f, front_labels(rec)?)? > 0.0 {
                h += 1;
            }
        }
        Ok(h)
    };
    let numerator_hits = hits(two_sided)?;
    let denominator_hits = hits(one_sided)?;
    let ratio = (numerator.mean > 0.0 && denominator.mean > 0.0).then(|| {
        let mean = numerator.mean / denominator.mean;
        let rel =
            (numerator.std_error / numerator.mean).hypot(denominator.std_error / denominator.mean);
        Estimate {
            mean,
            std_error: mean * rel,
            n_samples: numerator.n_samples.min(denominator.n_samples),
            log_domain: false,
        }
    });
    Ok(HnEstimate {
        numerator,
        denominator,
        ratio,
        numerator_hits,
        denominator_hits,
    })
}

/// Refinement gap `|ln h_deep(x) - ln h_shallow(x)|` between two cylinder
/// depths of the same word.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct GapEstimate {
    /// Signed `ln h_deep - ln h_shallow`.
    pub log_gap: f64,
    pub std_error: f64,
}

/// Batched log-ratio `ln(mean deep / mean shallow)` over one record stream:
/// per contiguous batch the ratio of batch means, then mean and standard
/// error across batches.  Pairing the depths inside each batch cancels the
/// shared record-to-record fluctuation that dominates independent ratio
/// errors at large depth.  `None` when some batch mean vanishes (the gap is
/// then not resolvable from this stream).
fn batched_log_ratio(shallow: &[f64], deep: &[f64]) -> Result<Option<(f64, f64)>> {
    let m = shallow.len();
    if m < 2 * BATCH_COUNT {
        return Err(Error::Invalid(format!(
            "paired gap needs at least {} records, got {m}",
            2 * BATCH_COUNT
        )));
    }
    let base = m / BATCH_COUNT;
    let extra = m % BATCH_COUNT;
    let mut logs = Vec::with_capacity(BATCH_COUNT);
    let mut start = 0;
    for b in 0..BATCH_COUNT {
        let len = base + usize::from(b < extra);
        let s_shallow: f64 = shallow[start..start + len].iter().sum();
        let s_deep: f64 = deep[start..start + len].iter().sum();
        start += len;
        if s_shallow <= 0.0 || s_deep <= 0.0 {
            return Ok(None);
        }
        logs.push((s_deep / s_shallow).ln());
    }
    let k = BATCH_COUNT as f64;
    let mean = logs.iter().sum::<f64>() / k;
    let var = logs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0) / k;
    Ok(Some((mean, var.sqrt())))
}

/// Depth-paired refinement gap of the likelihood ratio:
/// `ln h_deep(x) - ln h_shallow(x)` estimated as the difference of the two
/// streams' paired log-ratios, with the errors combined in quadrature.
/// `None` when either stream cannot resolve the pair.
pub fn paired_depth_gap(
    x: &SpinWord,
    n_shallow: usize,
    n_deep: usize,
    two_sided: &[SweepRecord],
    one_sided: &[SweepRecord],
) -> Result<Option<GapEstimate>> {
    if n_shallow >= n_deep || n_deep > x.len() {
        return Err(Error::LengthMismatch {
            expected: n_deep,
            got: x.len(),
        });
    }
    let word_slice =
        |n: usize| -> Vec<(i64, i8)> { (0..n).map(|k| (k as i64, x.symbols()[k])).collect() };
    let shallow_f = word_slice(n_shallow);
    let deep_f = word_slice(n_deep);
    let mu = batched_log_ratio(
        &cylinder_values(&shallow_f, two_sided)?,
        &cylinder_values(&deep_f, two_sided)?,
    )?;
    let nu = batched_log_ratio(
        &cylinder_values(&shallow_f, one_sided)?,
        &cylinder_values(&deep_f, one_sided)?,
    )?;
    Ok(match (mu, nu) {
        (Some((gm, sm)), Some((gn, sn))) => Some(GapEstimate {
            log_gap: gm - gn,
            std_error: sm.hypot(sn),
        }),
        _ => None,
    })
}

/// `sum_C log cosh(r(C))` over the clusters of a one-sided graph, with
/// `r(C) = sum_{i in C} r_i` from the coupling tails.  Returned in log
/// domain; exponentiation is the caller's choice.
pub fn cosh_product(g: &FiniteGraph, fam: &CouplingFamily) -> Result<f64> {
    if g.lo() < 0 {
        return Err(Error::BadVolume(format!(
            "[{}, {}) not one-sided",
            g.lo(),
            g.hi()
        )));
    }
    let cp = g.clusters();
    let mut acc = KahanSum::new();
    for label in cp.labels() {
        let members: Vec<u64> = cp.members_of(label).iter().map(|&v| v as u64).collect();
        let r = fam.r_of_set(&members, 1e-12)?;
        acc.add(log_cosh(r));
    }
    Ok(acc.value())
}

/// Truncated series for `E[2^{(X-1)+}]` with `X` Poisson(`lambda`):
/// `e^{-lambda} + (1/2) sum_{k=1}^{terms} 2^k e^{-lambda} lambda^k / k!`,
/// which converges to `cosh(lambda)`.
pub fn poisson_cosh_check(lambda: f64, terms: u32) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::NonPositive { what: "lambda" });
    }
    if terms < 1 {
        return Err(Error::NonPositive { what: "terms" });
    }
    // Accumulate e^{-lambda} (2 lambda)^k / k! iteratively in log-safe form:
    // for the checked parameter range the direct product is exact enough,
    // seeded by exp(-lambda).
    let mut term = (-lambda).exp();
    let mut acc = KahanSum::new();
    acc.add(term);
    for k in 1..=terms {
        term *= 2.0 * lambda / f64::from(k);
        acc.add(0.5 * term);
    }
    Ok(acc.value())
}

/// One point of the empirical survival curve of the origin-cluster size.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct TailPoint {
    pub n: u64,
    /// Records with `|C_0| > n`.
    pub count: u64,
    pub survival: f64,
}

/// Least-squares fit of `log P(|C_0| > n) = log K - c n`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct TailFit {
    pub log_k: f64,
    pub c: f64,
    pub c_std_error: f64,
    pub points: usize,
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct TailReport {
    pub curve: Vec<TailPoint>,
    /// Absent when the fit window holds fewer than three points.
    pub fit: Option<TailFit>,
    pub degenerate: bool,
}

/// Empirical tail of the origin-cluster size with an exponential fit over
/// the window where each point still has at least 30 supporting records.
pub fn cluster_tail(records: &[SweepRecord]) -> Result<TailReport> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let m = records.len() as u64;
    let max_size = records.iter().map(|r| r.origin_cluster).max().unwrap_or(0);
    // survival[n] = #records with size > n, n = 0..max_size.
    let mut exceed = vec![0u64; max_size as usize + 1];
    for rec in records {
        for n in 0..rec.origin_cluster.min(max_size + 1) {
            exceed[n as usize] += 1;
        }
    }
    let curve: Vec<TailPoint> = exceed
        .iter()
        .enumerate()
        .map(|(n, &count)| TailPoint {
            n: n as u64,
            count,
            survival: count as f64 / m as f64,
        })
        .collect();
    // Fit window: truncate at the first point with fewer than 30 records.
    let window: Vec<&TailPoint> = curve.iter().take_while(|p| p.count >= 30).collect();
    let fit = if window.len() >= 3 {
        let k = window.len() as f64;
        let xs: Vec<f64> = window.iter().map(|p| p.n as f64).collect();
        let ys: Vec<f64> = window.iter().map(|p| p.survival.ln()).collect();
        let xbar = xs.iter().sum::<f64>() / k;
        let ybar = ys.iter().sum::<f64>() / k;
        let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        let sxy: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - xbar) * (y - ybar))
            .sum();
        let slope = sxy / sxx;
        let intercept = ybar - slope * xbar;
        let sse: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - (intercept + slope * x);
                e * e
            })
            .sum();
        let slope_se = (sse / (k - 2.0) / sxx).sqrt();
        Some(TailFit {
            log_k: intercept,
            c: -slope,
            c_std_error: slope_se,
            points: window.len(),
        })
    } else {
        None
    };
    Ok(TailReport {
        degenerate: fit.is_none(),
        curve,
        fit,
    })
}

/// One checked moment: empirical `E|C_0|^n` against `K n! / c^n`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct MomentRow {
    pub n: u32,
    pub empirical: Estimate,
    pub bound: f64,
    /// One-sided test: the moment does not exceed the bound beyond CI.
    pub pass: bool,
}

pub fn moment_check(records: &[SweepRecord], n_max: u32, k: f64, c: f64) -> Result<Vec<MomentRow>> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    if c <= 0.0 {
        return Err(Error::NonPositive {
            what: "fitted decay rate c",
        });
    }
    let mut rows = Vec::with_capacity(n_max as usize);
    let mut factorial = 1.0f64;
    for n in 1..=n_max {
        factorial *= f64::from(n);
        let values: Vec<f64> = records
            .iter()
            .map(|r| (r.origin_cluster as f64).powi(n as i32))
            .collect();
        let empirical = batch_means(&values)?;
        let bound = k * factorial / c.powi(n as i32);
        let pass = empirical.mean - empirical.ci_half_width() <= bound;
        rows.push(MomentRow {
            n,
            empirical,
            bound,
            pass,
        });
    }
    Ok(rows)
}

/// Empirical distributions of the origin-cut statistics together with the
/// ingredients of the uniform convergence bound.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct CutReport {
    pub n_records: u64,
    /// Mean of `2^{R_0}` (the normaliser when fed by product-law records).
    pub k0: Estimate,
    /// Mean of `2^{R}` at the stabilised corank, accumulated in log domain.
    pub mean_2r: Estimate,
    pub log_mean_2r: f64,
    pub r0_hist: Vec<(u32, u64)>,
    pub r_limit_hist: Vec<(u32, u64)>,
    pub n_hist: Vec<(i64, u64)>,
    /// Survival `xi(N > n)` for `n = 0, 1, ...` up to the largest observed.
    pub xi_survival: Vec<(i64, f64)>,
}

impl CutReport {
    /// `xi(N > n)`, zero beyond the observed range.
    pub fn survival_at(&self, n: i64) -> f64 {
        match self.xi_survival.iter().find(|&&(m, _)| m == n) {
            Some(&(_, p)) => p,
            None if self.xi_survival.last().is_some_and(|&(m, _)| n > m) => 0.0,
            None => 1.0,
        }
    }

    /// Uniform convergence bound `(1/K0) xi(N > n) E[2^R]` at depth `n`.
    pub fn h_bound(&self, n: i64) -> f64 {
        self.survival_at(n) * self.mean_2r.mean / self.k0.mean
    }

    pub fn bound_curve(&self) -> Vec<(i64, f64)> {
        self.xi_survival
            .iter()
            .map(|&(n, _)| (n, self.h_bound(n)))
            .collect()
    }
}

pub fn cut_statistics(records: &[SweepRecord]) -> Result<CutReport> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let m = records.len();
    let mut r0_hist = BTreeMap::new();
    let mut r_limit_hist = BTreeMap::new();
    let mut n_hist = BTreeMap::new();
    let mut k0_values = Vec::with_capacity(m);
    let mut log_2r = Vec::with_capacity(m);
    for rec in records {
        *r0_hist.entry(rec.r0).or_insert(0u64) += 1;
        *r_limit_hist.entry(rec.r_limit).or_insert(0u64) += 1;
        *n_hist.entry(rec.n_stat).or_insert(0u64) += 1;
        k0_values.push(2.0f64.powi(rec.r0 as i32));
        log_2r.push(f64::from(rec.r_limit) * std::f64::consts::LN_2);
    }
    let k0 = batch_means(&k0_values)?;
    let log_mean_2r = log_sum_exp(&log_2r) - (m as f64).ln();
    // Batch standard error in the linear domain (2^R stays in f64 range for
    // the coranks this toolkit produces).
    let linear_2r: Vec<f64> = log_2r.iter().map(|&l| l.exp()).collect();
    let mut mean_2r = batch_means(&linear_2r)?;
    mean_2r.mean = log_mean_2r.exp();
    let max_n = records.iter().map(|r| r.n_stat).max().unwrap_or(0);
    let mut xi_survival = Vec::new();
    for n in 0..=max_n {
        let count = records.iter().filter(|r| r.n_stat > n).count();
        xi_survival.push((n, count as f64 / m as f64));
    }
    Ok(CutReport {
        n_records: m as u64,
        k0,
        mean_2r,
        log_mean_2r,
        r0_hist: r0_hist.into_iter().collect(),
        r_limit_hist: r_limit_hist.into_iter().collect(),
        n_hist: n_hist.into_iter().collect(),
        xi_survival,
    })
}

/// Percolation diagnostics at one coupling strength.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct BetaScanPoint {
    pub beta: f64,
    pub volume: u64,
    /// Largest cluster size divided by volume.
    pub largest_fraction: Estimate,
    /// Probability that the origin cluster spans at least sqrt(volume).
    pub origin_spanning: Estimate,
}

/// Sweeps a grid of coupling strengths at one volume, recording per-sweep
/// percolation diagnostics after burn-in.  Finite-volume estimates only;
/// localising a transition needs the crossing of curves from two volumes.
pub fn beta_scan(
    family_at: impl Fn(f64) -> Result<CouplingFamily>,
    beta_grid: &[f64],
    volume: u64,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<Vec<BetaScanPoint>> {
    if beta_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(
            "beta grid must be strictly ascending".into(),
        ));
    }
    if sweeps == 0 {
        return Err(Error::EmptyStream);
    }
    let threshold = (volume as f64).sqrt();
    let mut points = Vec::with_capacity(beta_grid.len());
    for (bi, &beta) in beta_grid.iter().enumerate() {
        let fam = family_at(beta)?;
        let cfg = RcConfig::new(0, volume as i64, 2.0, Boundary::Free, fam)?;
        let mut chain = RcChain::new(cfg, seed, bi as u64)?;
        chain.advance(burn_in);
        let mut fractions = Vec::with_capacity(sweeps as usize);
        let mut spanning = Vec::with_capacity(sweeps as usize);
        for _ in 0..sweeps {
            chain.sweep();
            let (_, largest, origin) = chain.cluster_summary();
            fractions.push(largest as f64 / volume as f64);
            spanning.push(f64::from(origin as f64 >= threshold));
        }
        points.push(BetaScanPoint {
            beta,
            volume,
            largest_fraction: batch_means(&fractions)?,
            origin_spanning: batch_means(&spanning)?,
        });
    }
    Ok(points)
}

/// First grid bracket where the largest-cluster fraction crosses `level`.
pub fn spanning_bracket(points: &[BetaScanPoint], level: f64) -> Option<(f64, f64)> {
    points
        .windows(2)
        .find(|w| w[0].largest_fraction.mean < level && w[1].largest_fraction.mean >= level)
        .map(|w| (w[0].beta, w[1].beta))
}

/// The documented likelihood-ratio panel: `count` seeded uniform words plus
/// the two constant words, all of length `len`.
pub fn panel_words(count: usize, len: usize, seed: u64) -> Vec<SpinWord> {
    let mut words = Vec::with_capacity(count + 2);
    for i in 0..count {
        let symbols: Vec<i8> = (0..len)
            .map(|k| {
                let block = rng::draw(seed, &[domain::PANEL, i as u64, (k / 64) as u64]);
                if block >> (k % 64) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        words.push(SpinWord::new(symbols).expect("panel symbols are valid"));
    }
    words.push(SpinWord::all_plus(len));
    words.push(SpinWord::all_minus(len));
    words
}

/// Largest violation of `r(C)^2 <= |C| * sum_{i in C} r_i^2` over the
/// clusters of a one-sided graph (nonpositive up to certified tail error).
pub fn cauchy_schwarz_check(g: &FiniteGraph, fam: &CouplingFamily) -> Result<f64> {
    if g.lo() < 0 {
        return Err(Error::BadVolume(format!(
            "[{}, {}) not one-sided",
            g.lo(),
            g.hi()
        )));
    }
    let cp = g.clusters();
    let mut worst = f64::NEG_INFINITY;
    for label in cp.labels() {
        let members = cp.members_of(label);
        let mut r_sum = KahanSum::new();
        let mut r_sq = KahanSum::new();
        for &v in &members {
            let r = fam.tail_r(v as u64, 1e-12)?;
            r_sum.add(r);
            r_sq.add(r * r);
        }
        let lhs = r_sum.value() * r_sum.value();
        let rhs = members.len() as f64 * r_sq.value();
        worst = worst.max(lhs - rhs);
    }
    Ok(worst)
}

/// Certified partial evaluation of the moment-bound series
/// `sum_{n >= 1} K R^{n-1} (n+1)! c^{-(n+1)} / (2n)!`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MBound {
    pub partial: f64,
    /// Geometric bound on the truncated remainder.
    pub remainder: f64,
    /// Certified upper value `partial + remainder`.
    pub value: f64,
    pub ratio_at_cutoff: f64,
    pub terms: u32,
}

pub fn m_bound_series(k: f64, c: f64, r_sq: f64, terms: u32) -> Result<MBound> {
    if c <= 0.0 {
        return Err(Error::NonPositive {
            what: "decay rate c",
        });
    }
    if k < 0.0 || r_sq < 0.0 {
        return Err(Error::NonPositive {
            what: "series constants",
        });
    }
    if terms < 1 {
        return Err(Error::NonPositive { what: "terms" });
    }
    // a_1 = K 2!/c^2/2! = K/c^2; a_{n+1}/a_n = R (n+2) / (c (2n+1)(2n+2)),
    // monotone decreasing in n, so a geometric bound certifies the tail.
    let ratio = |n: f64| r_sq * (n + 2.0) / (c * (2.0 * n + 1.0) * (2.0 * n + 2.0));
    let mut term = k / (c * c);
    let mut acc = KahanSum::new();
    acc.add(term);
    for n in 1..terms {
        term *= ratio(f64::from(n));
        acc.add(term);
    }
    let rho = ratio(f64::from(terms));
    if rho >= 1.0 {
        return Err(Error::ToleranceUnachievable { tol: rho });
    }
    let next = term * rho;
    let remainder = next / (1.0 - rho);
    let partial = acc.value();
    Ok(MBound {
        partial,
        remainder,
        value: partial + remainder,
        ratio_at_cutoff: rho,
        terms,
    })
}

/// Empirical check of `E[prod_C cosh(r(C))] <= exp(M * sum_i r_i^2)` on a
/// record stream carrying the cosh observer.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ProductBoundReport {
    /// Log of the empirical mean of the cosh product, with log-scale error.
    pub lhs: Estimate,
    /// `M * sum r_i^2` (log of the claimed bound).
    pub rhs: f64,
    pub pass: bool,
}

pub fn product_conditionals_check(
    records: &[SweepRecord],
    m_value: f64,
    r_sq: f64,
) -> Result<ProductBoundReport> {
    if records.is_empty() {
        return Err(Error::EmptyStream);
    }
    let logs: Vec<f64> = records
        .iter()
        .map(|r| {
            r.log_cosh_product
                .ok_or_else(|| Error::Invalid("records lack the cosh observer".into()))
        })
        .collect::<Result<_>>()?;
    let m = logs.len();
    let log_mean = log_sum_exp(&logs) - (m as f64).ln();
    // Log-scale standard error by the delta method on the linear mean.
    let linear: Vec<f64> = logs.iter().map(|&l| l.exp()).collect();
    let lin = batch_means(&linear)?;
    let std_error = if lin.mean > 0.0 {
        lin.std_error / lin.mean
    } else {
        0.0
    };
    let lhs = Estimate {
        mean: log_mean,
        std_error,
        n_samples: m as u64,
        log_domain: true,
    };
    let rhs = m_value * r_sq;
    let pass = lhs.mean - lhs.ci_half_width() <= rhs;
    Ok(ProductBoundReport { lhs, rhs, pass })
}
