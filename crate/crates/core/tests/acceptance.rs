//! Acceptance gate: one test per criterion, each printing a single
//! `ACCEPTANCE criterion N (<label>): PASS|FAIL` line (run with
//! `--nocapture` to see the lines and the supporting detail).
//!
//! Every tolerance, seed, sample size, and runtime budget is pinned here.

use dysonfk::couplings::CouplingFamily;
use dysonfk::estimators::{beta_scan, cosh_product};
use dysonfk::estimators::{
    cluster_tail, cut_statistics, cylinder_probability, likelihood_ratio_hn, moment_check,
    paired_depth_gap, panel_words, poisson_cosh_check, spanning_bracket,
};
use dysonfk::graphs::{CutDecomposition, FiniteGraph};
use dysonfk::oracle::{verify_identities, ExactSpinGibbs};
use dysonfk::rng;
use dysonfk::sampler::{
    bernoulli_graph, edge_probability, Boundary, ExactRandomCluster, RcChain, RcConfig,
    RecordOptions, SweepRecord, XiSampler,
};
use dysonfk::transfer::{lambda_gap_bound, TransferMatrix};
use std::time::Instant;

fn criterion(n: u32, label: &str, body: impl FnOnce(&mut Vec<String>) -> Result<(), String>) {
    let mut detail = Vec::new();
    let outcome = body(&mut detail);
    for line in &detail {
        println!("  {line}");
    }
    match outcome {
        Ok(()) => println!("ACCEPTANCE criterion {n} ({label}): PASS"),
        Err(msg) => {
            println!("ACCEPTANCE criterion {n} ({label}): FAIL — {msg}");
            panic!("criterion {n} ({label}) failed: {msg}");
        }
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dyson(beta: f64) -> CouplingFamily {
    CouplingFamily::dyson(2.0, beta).expect("valid family")
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_oracle_identity_suite() {
    criterion(1, "oracle identity suite", |detail| {
        const TOL: f64 = 1e-10;
        const BUDGET_SECS: f64 = 60.0;
        let start = Instant::now();
        let fam = dyson(0.5);
        for l in [2i64, 3] {
            let report = verify_identities(&fam, l, 3).map_err(|e| e.to_string())?;
            detail.push(format!(
                "L={l}: {} slots, {} checks, max discrepancy {:.3e}",
                report.num_slots,
                report.checks.len(),
                report.max_discrepancy()
            ));
            for check in &report.checks {
                detail.push(format!(
                    "  {}: {} cases, discrepancy {:.3e} (tol {:.1e})",
                    check.name, check.cases, check.max_discrepancy, check.tol
                ));
            }
            ensure(report.all_pass(), format!("L={l}: identity check failed"))?;
            ensure(
                report.max_discrepancy() < TOL,
                format!(
                    "L={l}: max discrepancy {:.3e} not below {TOL:.1e}",
                    report.max_discrepancy()
                ),
            )?;
        }
        let secs = start.elapsed().as_secs_f64();
        detail.push(format!("runtime {secs:.1} s (budget {BUDGET_SECS} s)"));
        ensure(
            secs < BUDGET_SECS,
            format!("runtime {secs:.1} s over budget"),
        )
    });
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_2_cosh_identity_suite() {
    criterion(2, "cosh identity suite", |detail| {
        const TOL: f64 = 1e-10;
        let fam = dyson(0.5);
        for vol in 2i64..=5 {
            let gibbs = ExactSpinGibbs::new(&fam, 0, vol, &[], None).map_err(|e| e.to_string())?;
            let r: Vec<f64> = (0..vol)
                .map(|n| fam.tail_r(n as u64, 1e-12))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let lhs = gibbs.expect(|word| {
                let mut s = 0.0;
                for (k, rk) in r.iter().enumerate() {
                    s += rk * f64::from(gibbs.spin_of(word, k as i64));
                }
                s.exp()
            });
            let rc = ExactRandomCluster::from_family(&fam, 0, vol, 2.0, None)
                .map_err(|e| e.to_string())?;
            let rhs = rc.expect(|mask| {
                cosh_product(&rc.graph(mask), &fam)
                    .expect("tails available")
                    .exp()
            });
            let rel = (lhs - rhs).abs() / rhs;
            detail.push(format!(
                "volume {vol}: spin side {lhs:.12}, graph side {rhs:.12}, rel diff {rel:.3e}"
            ));
            ensure(
                rel < TOL,
                format!("volume {vol}: sides differ by {rel:.3e} (tol {TOL:.1e})"),
            )?;
        }
        for lambda in [0.0f64, 0.5, 1.0, 2.0] {
            let got = poisson_cosh_check(lambda, 80).map_err(|e| e.to_string())?;
            let want = lambda.cosh();
            detail.push(format!(
                "poisson cosh lambda={lambda}: {got:.12} vs cosh {want:.12}"
            ));
            ensure(
                (got - want).abs() < TOL,
                format!("lambda={lambda}: series off by {:.3e}", (got - want).abs()),
            )?;
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_transfer_suite() {
    criterion(3, "transfer suite", |detail| {
        const TOL: f64 = 1e-10;
        const EIGEN_TOL: f64 = 1e-13;

        // Zero couplings: the operator doubles constants exactly.
        let zero = dyson(0.0);
        let tm = TransferMatrix::new(&zero, 3).map_err(|e| e.to_string())?;
        let pair = tm
            .leading_eigenpair(EIGEN_TOL, 10_000)
            .map_err(|e| e.to_string())?;
        ensure(
            pair.lambda == 2.0,
            format!("zero couplings: lambda {}", pair.lambda),
        )?;
        ensure(
            pair.h.iter().all(|&x| x == 1.0),
            "zero couplings: eigenfunction not exactly constant one",
        )?;
        detail.push("zero couplings: lambda = 2 and h = 1 exactly".into());

        // Nearest neighbour at three temperatures.
        for beta in [0.2f64, 0.5, 1.0] {
            let nn =
                CouplingFamily::finite_range(vec![0.0, 1.0], beta).map_err(|e| e.to_string())?;
            let tm = TransferMatrix::new(&nn, 3).map_err(|e| e.to_string())?;
            let pair = tm
                .leading_eigenpair(EIGEN_TOL, 100_000)
                .map_err(|e| e.to_string())?;
            let want = 2.0 * beta.cosh();
            let diff = (pair.lambda - want).abs();
            let spread = pair
                .h
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                });
            detail.push(format!(
                "nearest neighbour beta={beta}: lambda {:.12} vs 2cosh {want:.12} (diff {diff:.2e}), h spread {:.2e}",
                pair.lambda,
                spread.1 - spread.0
            ));
            ensure(diff < TOL, format!("beta={beta}: lambda off by {diff:.3e}"))?;
            ensure(
                spread.1 - spread.0 < TOL,
                format!("beta={beta}: eigenfunction not constant"),
            )?;
        }

        // Doeblin rows sum to one when the range fits inside the memory.
        for fam in [
            CouplingFamily::finite_range(vec![0.0, 1.0], 0.5).map_err(|e| e.to_string())?,
            CouplingFamily::finite_range(vec![0.0, 1.0, 0.3], 0.4).map_err(|e| e.to_string())?,
        ] {
            let tm = TransferMatrix::new(&fam, 3).map_err(|e| e.to_string())?;
            let pair = tm
                .leading_eigenpair(EIGEN_TOL, 100_000)
                .map_err(|e| e.to_string())?;
            let g = tm
                .conditional_kernel(&pair.h, pair.lambda)
                .map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for u in 0..tm.num_states() {
                let row = g[2 * u] + g[2 * u + 1];
                worst = worst.max((row - 1.0).abs());
            }
            detail.push(format!("doeblin rows: worst |sum - 1| = {worst:.3e}"));
            ensure(worst < TOL, format!("doeblin row sum off by {worst:.3e}"))?;
        }

        // Dyson eigenvalue increments: decreasing and within the tail bound.
        let fam = dyson(0.5);
        let mut lambdas = Vec::new();
        for m in 4u32..=17 {
            let tm = TransferMatrix::new(&fam, m).map_err(|e| e.to_string())?;
            let pair = tm
                .leading_eigenpair(1e-12, 100_000)
                .map_err(|e| e.to_string())?;
            ensure(
                pair.converged,
                format!("memory {m}: power iteration stalled"),
            )?;
            lambdas.push((m, pair.lambda, pair.residual));
        }
        let mut prev_inc = f64::INFINITY;
        for w in lambdas.windows(2) {
            let (m, l1, res1) = w[0];
            let (_, l2, res2) = w[1];
            let inc = (l2 - l1).abs();
            let gap = lambda_gap_bound(&fam, m, 1e-12).map_err(|e| e.to_string())?;
            let bound = l2 * gap + 4.0 * (res1 + res2);
            detail.push(format!(
                "m={m}: |lambda_{}-lambda_{m}| = {inc:.6e}, tail bound {bound:.6e}",
                m + 1
            ));
            ensure(
                inc < prev_inc,
                format!("increment at m={m} did not decrease"),
            )?;
            ensure(
                inc <= bound,
                format!("increment at m={m} exceeds the tail bound"),
            )?;
            prev_inc = inc;
        }
        Ok(())
    });
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_4_combinatorial_property_suite() {
    criterion(4, "combinatorial property suite", |detail| {
        const CASES: u64 = 100_000;
        const SEED: u64 = 0xB4;
        const BUDGET_SECS: f64 = 30.0;
        let start = Instant::now();
        let fam = dyson(0.7);
        let mut with_h = 0u64;
        for case in 0..CASES {
            let g = bernoulli_graph(&fam, -8, 8, SEED, case).map_err(|e| e.to_string())?;
            let cut = CutDecomposition::split(&g);
            if cut.h_size() > 0 {
                with_h += 1;
            }

            // Cluster-count matching: w(G) = w(G+) + w(G-) - |H| + R_0.
            let w = i64::from(g.clusters().count());
            let wp = i64::from(cut.plus_graph().clusters().count()) - 8;
            let wm = i64::from(
                FiniteGraph::new(-8, 8, cut.g_minus().to_vec())
                    .map_err(|e| e.to_string())?
                    .clusters()
                    .count(),
            ) - 8;
            ensure(
                w == wp + wm - cut.h_size() as i64 + i64::from(cut.corank_rn(0)),
                format!("case {case}: cluster-count identity failed"),
            )?;

            // Corank increments match window cluster-count differences, and
            // the sequence is monotone.
            let plus = cut.plus_graph();
            let r0 = i64::from(cut.corank_rn(0));
            let r_lim = cut.r_limit();
            let mut prev = cut.corank_rn(0);
            for n in 1..=8i64 {
                let rn = cut.corank_rn(n);
                ensure(rn >= prev, format!("case {case}: R_n decreased at n={n}"))?;
                ensure(
                    rn <= r_lim,
                    format!("case {case}: R_n above limit at n={n}"),
                )?;
                prev = rn;
                let f: Vec<i64> = (0..n).collect();
                let lhs = i64::from(plus.count_wf(&f).map_err(|e| e.to_string())?)
                    - i64::from(g.count_wf(&f).map_err(|e| e.to_string())?);
                ensure(
                    lhs == i64::from(rn) - r0,
                    format!("case {case}: window-count identity failed at n={n}"),
                )?;
            }

            // Stabilisation on the bridging part alone.
            let mut w_edges = cut.g_minus().to_vec();
            w_edges.extend_from_slice(cut.h());
            let gw = FiniteGraph::new(-8, 8, w_edges).map_err(|e| e.to_string())?;
            let cut_w = CutDecomposition::split(&gw);
            let (_, n_w) = cut_w.frontier_and_n();
            let lim_w = cut_w.r_limit();
            for n in n_w..=8 {
                ensure(
                    cut_w.corank_rn(n) == lim_w,
                    format!("case {case}: R_n not stabilised at n={n} >= N={n_w}"),
                )?;
            }

            // Contraction can only create surplus edges.
            let contracted = g
                .contract(&[vec![-4, -1, 3], vec![0, 2]])
                .map_err(|e| e.to_string())?;
            ensure(
                contracted.corank() >= g.rank_corank().1,
                format!("case {case}: contraction decreased corank"),
            )?;

            // Compatibility factorisation as a boolean identity.
            let bits = rng::draw(SEED, &[0xF0, case]);
            let x: Vec<i8> = (0..8)
                .map(|k| if bits >> k & 1 == 1 { 1 } else { -1 })
                .collect();
            for n in 1..=8i64 {
                let cyl: Vec<(i64, i8)> = (0..n).map(|v| (v, x[v as usize])).collect();
                let b_full = g.compatibility_b(&cyl).map_err(|e| e.to_string())?;
                let b_plus = plus.compatibility_b(&cyl).map_err(|e| e.to_string())?;
                let a = cut.compatibility_a(&x, n).map_err(|e| e.to_string())?;
                ensure(
                    b_full == (a && b_plus),
                    format!("case {case}: factorisation mismatch at n={n}"),
                )?;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        detail.push(format!(
            "{CASES} graphs on [-8, 8), {with_h} with crossing edges, runtime {secs:.1} s (budget {BUDGET_SECS} s)"
        ));
        ensure(
            secs < BUDGET_SECS,
            format!("runtime {secs:.1} s over budget"),
        )
    });
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_mcmc_validation() {
    criterion(5, "mcmc validation", |detail| {
        const SWEEPS: usize = 100_000;
        const BURN_IN: u64 = 2_000;
        const SIGMAS: f64 = 4.0;
        const SEED: u64 = 0xD5;
        let fam = dyson(0.5);

        // q = 2 free chain against the exact measures.
        let rc =
            ExactRandomCluster::from_family(&fam, 0, 5, 2.0, None).map_err(|e| e.to_string())?;
        let gibbs = ExactSpinGibbs::new(&fam, 0, 5, &[], None).map_err(|e| e.to_string())?;
        let cfg =
            RcConfig::new(0, 5, 2.0, Boundary::Free, fam.clone()).map_err(|e| e.to_string())?;
        let mut chain = RcChain::new(cfg, SEED, 0).map_err(|e| e.to_string())?;
        chain.advance(BURN_IN);
        let opts = RecordOptions {
            front_window: 5,
            ..Default::default()
        };
        let n_slots = rc.num_slots();
        let mut indicators = vec![Vec::with_capacity(SWEEPS); n_slots];
        let mut records: Vec<SweepRecord> = Vec::with_capacity(SWEEPS);
        for _ in 0..SWEEPS {
            chain.sweep();
            let g = chain.graph();
            for (k, &slot) in rc.slots().iter().enumerate() {
                indicators[k].push(f64::from(g.edges().binary_search(&slot).is_ok()));
            }
            records.push(chain.record(&opts).map_err(|e| e.to_string())?);
        }
        let mut worst_sigma = 0.0f64;
        for (k, series) in indicators.iter().enumerate() {
            let est = dysonfk::estimators::batch_means(series).map_err(|e| e.to_string())?;
            let exact = rc.edge_marginal(k);
            let sigmas = est.sigmas_from(exact);
            worst_sigma = worst_sigma.max(sigmas);
            ensure(
                sigmas <= SIGMAS,
                format!(
                    "edge {:?}: empirical {:.5} vs exact {:.5} is {sigmas:.1} sigma",
                    rc.slots()[k],
                    est.mean,
                    exact
                ),
            )?;
        }
        detail.push(format!(
            "q=2 edge marginals: {n_slots} slots within {SIGMAS} sigma (worst {worst_sigma:.2})"
        ));
        let cylinders: [&[(i64, i8)]; 3] = [
            &[(0, 1), (1, 1), (2, 1)],
            &[(0, 1), (2, -1), (4, 1)],
            &[(1, -1), (3, -1)],
        ];
        for x_f in cylinders {
            let est = cylinder_probability(x_f, &records).map_err(|e| e.to_string())?;
            let exact = gibbs.cylinder_prob(x_f).map_err(|e| e.to_string())?;
            let sigmas = est.sigmas_from(exact);
            detail.push(format!(
                "cylinder {x_f:?}: empirical {:.5} (se {:.1e}) vs exact {:.5} ({sigmas:.2} sigma)",
                est.mean, est.std_error, exact
            ));
            ensure(
                sigmas <= SIGMAS,
                format!("cylinder {x_f:?} off by {sigmas:.1} sigma"),
            )?;
        }

        // q = 1 chain marginals against independent Bernoulli.
        let cfg =
            RcConfig::new(0, 5, 1.0, Boundary::Free, fam.clone()).map_err(|e| e.to_string())?;
        let mut chain = RcChain::new(cfg, SEED + 1, 0).map_err(|e| e.to_string())?;
        chain.advance(100);
        let mut indicators = vec![Vec::with_capacity(SWEEPS); rc.slots().len()];
        for _ in 0..SWEEPS {
            chain.sweep();
            let g = chain.graph();
            for (k, &slot) in rc.slots().iter().enumerate() {
                indicators[k].push(f64::from(g.edges().binary_search(&slot).is_ok()));
            }
        }
        let mut worst_sigma = 0.0f64;
        for (k, series) in indicators.iter().enumerate() {
            let est = dysonfk::estimators::batch_means(series).map_err(|e| e.to_string())?;
            let (a, b) = rc.slots()[k];
            let (p, _) = edge_probability(&fam, (b - a) as u64);
            let sigmas = est.sigmas_from(p);
            worst_sigma = worst_sigma.max(sigmas);
            ensure(
                sigmas <= SIGMAS,
                format!(
                    "q=1 edge ({a},{b}): {:.5} vs p {p:.5} is {sigmas:.1} sigma",
                    est.mean
                ),
            )?;
        }
        detail.push(format!(
            "q=1 edge marginals: independent Bernoulli within {SIGMAS} sigma (worst {worst_sigma:.2})"
        ));
        Ok(())
    });
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_subcritical_tails() {
    criterion(6, "subcritical tail behaviour", |detail| {
        const BETA: f64 = 0.3;
        const VOLUME: i64 = 1 << 12;
        const SWEEPS: usize = 100_000;
        const BURN_IN: u64 = 500;
        const BUDGET_SECS: f64 = 600.0;
        const SEED: u64 = 0xD6;
        let start = Instant::now();

        // Scan two volumes to confirm the working point sits below the
        // empirical crossing of the largest-cluster fraction.
        let grid = [0.3, 0.6, 0.9, 1.2, 1.5];
        for volume in [512u64, 1024] {
            let points = beta_scan(
                |b| CouplingFamily::dyson(2.0, b),
                &grid,
                volume,
                300,
                100,
                SEED,
            )
            .map_err(|e| e.to_string())?;
            let curve: Vec<String> = points
                .iter()
                .map(|p| format!("{:.1}:{:.3}", p.beta, p.largest_fraction.mean))
                .collect();
            detail.push(format!("scan at volume {volume}: {}", curve.join(" ")));
            let bracket = spanning_bracket(&points, 0.5)
                .ok_or(format!("no crossing bracket at volume {volume}"))?;
            detail.push(format!(
                "volume {volume}: crossing bracket ({:.1}, {:.1})",
                bracket.0, bracket.1
            ));
            ensure(
                bracket.0 >= BETA,
                format!("volume {volume}: crossing below the working point"),
            )?;
            ensure(
                points[0].largest_fraction.mean < 0.25,
                format!("volume {volume}: working point not clearly subcritical"),
            )?;
        }

        // Main run.
        let fam = dyson(BETA);
        let cfg = RcConfig::new(0, VOLUME, 2.0, Boundary::Free, fam).map_err(|e| e.to_string())?;
        let mut chain = RcChain::new(cfg, SEED, 0).map_err(|e| e.to_string())?;
        chain.advance(BURN_IN);
        let opts = RecordOptions::default();
        let mut records = Vec::with_capacity(SWEEPS);
        for _ in 0..SWEEPS {
            chain.sweep();
            records.push(chain.record(&opts).map_err(|e| e.to_string())?);
        }
        let report = cluster_tail(&records).map_err(|e| e.to_string())?;
        let fit = report.fit.ok_or("tail fit window too short")?;
        detail.push(format!(
            "tail fit over {} points: c = {:.4} (se {:.4}), log K = {:.4}",
            fit.points, fit.c, fit.c_std_error, fit.log_k
        ));
        ensure(fit.c > 0.0, "fitted decay rate not positive")?;
        ensure(
            fit.c - 1.96 * fit.c_std_error > 0.0,
            "95% CI of the decay rate does not exclude zero",
        )?;

        // Envelope constant over the fit window: the smallest K with
        // P(|C_0| > n) <= K e^{-cn} across the statistically supported
        // range (the least-squares intercept is a regression line, not an
        // envelope, and provably undershoots at n = 0 where survival is 1).
        let k_env = report
            .curve
            .iter()
            .take_while(|p| p.count >= 30)
            .map(|p| p.survival * (fit.c * p.n as f64).exp())
            .fold(0.0f64, f64::max);
        detail.push(format!("envelope constant K = {k_env:.4}"));
        let rows = moment_check(&records, 4, k_env, fit.c).map_err(|e| e.to_string())?;
        for row in &rows {
            detail.push(format!(
                "moment n={}: empirical {:.3} (se {:.3}) vs K n!/c^n = {:.3} -> {}",
                row.n,
                row.empirical.mean,
                row.empirical.std_error,
                row.bound,
                if row.pass { "ok" } else { "violated" }
            ));
        }
        ensure(
            rows.iter().all(|r| r.pass),
            "a factorial moment bound failed",
        )?;
        let secs = start.elapsed().as_secs_f64();
        detail.push(format!("runtime {secs:.1} s (budget {BUDGET_SECS} s)"));
        ensure(
            secs < BUDGET_SECS,
            format!("runtime {secs:.1} s over budget"),
        )
    });
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_h_convergence() {
    criterion(7, "likelihood-ratio convergence", |detail| {
        const BETA: f64 = 0.3;
        const L: i64 = 1 << 11;
        const RECORDS: usize = 10_000;
        const THIN: u64 = 6;
        const XI_THIN: u64 = 3;
        const BURN_IN: u64 = 500;
        const SEED: u64 = 0xD7;
        const PANEL_SEED: u64 = 777;
        const DEPTHS: [usize; 4] = [4, 8, 16, 32];
        const BOUND_TARGET: f64 = 0.05;
        let fam = dyson(BETA);
        let opts = RecordOptions {
            front_window: 32,
            ..Default::default()
        };

        let collect = |cfg: RcConfig, chain_seed: u64| -> Result<Vec<SweepRecord>, String> {
            let mut chain = RcChain::new(cfg, chain_seed, 0).map_err(|e| e.to_string())?;
            chain.advance(BURN_IN);
            let mut records = Vec::with_capacity(RECORDS);
            for _ in 0..RECORDS {
                chain.advance(THIN);
                records.push(chain.record(&opts).map_err(|e| e.to_string())?);
            }
            Ok(records)
        };
        let mu_records = collect(
            RcConfig::new(-L, L, 2.0, Boundary::Free, fam.clone()).map_err(|e| e.to_string())?,
            SEED,
        )?;
        let nu_records = collect(
            RcConfig::new(0, L, 2.0, Boundary::Free, fam.clone()).map_err(|e| e.to_string())?,
            SEED + 1,
        )?;

        // Product-law stream for the uniform bound ingredients.
        let mut xi = XiSampler::new(&fam, L, 2.0, SEED + 2, 0).map_err(|e| e.to_string())?;
        xi.advance(BURN_IN);
        let mut xi_records = Vec::with_capacity(RECORDS);
        for _ in 0..RECORDS {
            xi.advance(XI_THIN);
            xi_records.push(xi.record(0).map_err(|e| e.to_string())?);
        }
        let cut = cut_statistics(&xi_records).map_err(|e| e.to_string())?;
        detail.push(format!(
            "xi stream: K0 = {:.4} (se {:.4}), E[2^R] = {:.4}",
            cut.k0.mean, cut.k0.std_error, cut.mean_2r.mean
        ));
        let mut prev_bound = f64::INFINITY;
        for n in DEPTHS {
            let bound = cut.h_bound(n as i64);
            detail.push(format!(
                "bound at n={n}: xi(N>{n}) = {:.4}, (1/K0) xi(N>n) E[2^R] = {:.4}",
                cut.survival_at(n as i64),
                bound
            ));
            ensure(
                bound < prev_bound,
                format!("uniform bound did not decrease at n={n}"),
            )?;
            prev_bound = bound;
        }
        ensure(
            cut.h_bound(32) < BOUND_TARGET,
            format!(
                "bound at n=32 is {:.4}, not below {BOUND_TARGET}",
                cut.h_bound(32)
            ),
        )?;

        // Panel ratios: estimability, positivity, and refinement gaps.
        let panel = panel_words(100, 32, PANEL_SEED);
        let mut inf_ratio = f64::INFINITY;
        for (di, &n) in DEPTHS.iter().enumerate() {
            let mut estimable = 0usize;
            for word in &panel {
                let hn = likelihood_ratio_hn(word, n, &mu_records, &nu_records)
                    .map_err(|e| e.to_string())?;
                if let Some(r) = &hn.ratio {
                    estimable += 1;
                    ensure(r.mean > 0.0, format!("nonpositive ratio at depth {n}"))?;
                    if di == DEPTHS.len() - 1 {
                        inf_ratio = inf_ratio.min(r.mean);
                    }
                }
            }
            detail.push(format!(
                "depth {n}: {estimable} of {} panel entries estimable",
                panel.len()
            ));
            ensure(estimable > 0, format!("no estimable entries at depth {n}"))?;
        }
        detail.push(format!("inf estimable ratio at depth 32: {inf_ratio:.4}"));
        ensure(
            inf_ratio > 0.0 && inf_ratio.is_finite(),
            "panel infimum at depth 32 not strictly positive",
        )?;
        // The constant words stay significantly positive at every depth.
        for word in &panel[100..] {
            for &n in &DEPTHS {
                let hn = likelihood_ratio_hn(word, n, &mu_records, &nu_records)
                    .map_err(|e| e.to_string())?;
                let r = hn
                    .ratio
                    .ok_or(format!("constant word not estimable at depth {n}"))?;
                ensure(
                    r.mean - 1.96 * r.std_error > 0.0,
                    format!("constant word not significantly positive at depth {n}"),
                )?;
            }
        }

        // Depth-paired refinement gaps: the panel maximum must not increase
        // beyond the pooled confidence width of adjacent estimates.
        let mut gaps: Vec<(usize, usize, f64, f64, usize)> = Vec::new();
        for pair in DEPTHS.windows(2) {
            let (n1, n2) = (pair[0], pair[1]);
            let mut qualifying = 0usize;
            let mut max_gap = f64::NEG_INFINITY;
            let mut max_se = 0.0;
            for word in &panel {
                if let Some(gap) = paired_depth_gap(word, n1, n2, &mu_records, &nu_records)
                    .map_err(|e| e.to_string())?
                {
                    qualifying += 1;
                    if gap.log_gap.abs() > max_gap {
                        max_gap = gap.log_gap.abs();
                        max_se = gap.std_error;
                    }
                }
            }
            ensure(
                qualifying > 0,
                format!("no panel entry resolves the ({n1}, {n2}) gap"),
            )?;
            detail.push(format!(
                "gap ({n1} -> {n2}): D = {max_gap:.4} (se {max_se:.4}) over {qualifying} entries"
            ));
            gaps.push((n1, n2, max_gap, max_se, qualifying));
        }
        for w in gaps.windows(2) {
            let (_, _, d1, s1, _) = w[0];
            let (n1, n2, d2, s2, _) = w[1];
            ensure(
                d2 <= d1 + 1.96 * s1.hypot(s2),
                format!("gap ({n1} -> {n2}) increased beyond pooled CI"),
            )?;
        }
        Ok(())
    });
}
