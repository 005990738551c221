//! Counter-based randomness.
//!
//! All stochastic components of the crate draw from a SplitMix64-style keyed
//! mixer instead of a stateful generator.  A draw is a pure function of the
//! master seed plus a list of integer labels (domain tag, chain, sweep, edge
//! endpoints, counter...).  Consequences:
//!
//! * identical `(config, seed)` give bit-identical output streams no matter
//!   how work is scheduled across threads;
//! * sparse algorithms may skip evaluating decisions that cannot matter
//!   without disturbing any other decision;
//! * independent streams are obtained by changing any label.
//!
//! Label conventions used by the sampler are documented on the `domain`
//! constants below: activation draws are keyed per `(chain, sweep, distance
//! class, counter)`, heat-bath resolutions per `(chain, sweep, i, j)`, cluster
//! spins per `(chain, sweep, cluster representative)`.

/// Domain separation tags for the label streams.
pub mod domain {
    /// Edge-activation draws of the heat-bath sweep (geometric skipping).
    pub const ACTIVATION: u64 = 0x41;
    /// Heat-bath resolution draw for an activated edge slot.
    pub const RESOLVE: u64 = 0x52;
    /// Per-cluster spin assignment.
    pub const SPIN: u64 = 0x53;
    /// Independent Bernoulli graph draws.
    pub const BERNOULLI: u64 = 0x42;
    /// Crossing-edge (`H`) draws of the factorised two-sided sampler.
    pub const HCUT: u64 = 0x48;
    /// Panel-word generation for likelihood-ratio estimation.
    pub const PANEL: u64 = 0x50;
    /// Boundary-edge activation draws (wired boundary supervertex).
    pub const BOUNDARY: u64 = 0x44;
}

/// SplitMix64 output function (Steele, Lea, Flood 2014 finaliser).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Keyed counter draw: fold the labels into the seed one mixing round each.
#[inline]
pub fn draw(seed: u64, labels: &[u64]) -> u64 {
    let mut h = mix64(seed ^ 0x6c62272e07bb0142);
    for &l in labels {
        h = mix64(h ^ l);
    }
    h
}

/// Uniform f64 in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform f64 in `(0, 1]`, safe as a `ln` argument.
#[inline]
pub fn unit_f64_open(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Signed-label convenience: maps an `i64` label into the `u64` label space.
#[inline]
pub fn label_i64(v: i64) -> u64 {
    v as u64 ^ 0x8000_0000_0000_0000
}

/// Iterator over the hit indices of `count` independent Bernoulli(`p`) slots,
/// visited in index order with geometric skipping.  The `k`-th random draw of
/// the stream is `draw(seed, [labels..., k])`; a slot is never examined
/// individually, so the cost is proportional to the number of hits plus one.
pub struct GeometricHits {
    seed: u64,
    labels: Vec<u64>,
    counter: u64,
    /// log(1 - p); 0 when p == 0 (stream is then empty).
    log_q: f64,
    next: i64,
    count: i64,
}

impl GeometricHits {
    pub fn new(seed: u64, labels: &[u64], count: u64, p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
        let log_q = if p < 1.0 {
            (1.0 - p).ln()
        } else {
            f64::NEG_INFINITY
        };
        Self::with_log_q(seed, labels, count, log_q)
    }

    /// As [`GeometricHits::new`] but with `log(1 - p)` given directly; when
    /// the hit probability comes from a hazard (`p = 1 - e^{-h}`), passing
    /// `-h` avoids the round trip through `p`.
    pub fn with_log_q(seed: u64, labels: &[u64], count: u64, log_q: f64) -> Self {
        assert!(log_q <= 0.0, "log(1 - p) must be nonpositive: {log_q}");
        let mut s = Self {
            seed,
            labels: labels.to_vec(),
            counter: 0,
            log_q,
            next: -1,
            count: count as i64,
        };
        if log_q == 0.0 {
            s.next = s.count; // p == 0: exhausted immediately
        } else {
            s.advance();
        }
        s
    }

    fn advance(&mut self) {
        let u = unit_f64_open(draw(self.seed, &{
            let mut l = self.labels.clone();
            l.push(self.counter);
            l
        }));
        self.counter += 1;
        // Geometric(p) on {1, 2, ...} by inversion; p == 1 gives jump 1.
        let jump = if self.log_q == f64::NEG_INFINITY {
            1
        } else {
            let j = (u.ln() / self.log_q).floor();
            if j >= (i64::MAX / 2) as f64 {
                i64::MAX / 2
            } else {
                j as i64 + 1
            }
        };
        self.next = self.next.saturating_add(jump);
    }
}

impl Iterator for GeometricHits {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.next >= self.count {
            return None;
        }
        let hit = self.next as u64;
        self.advance();
        Some(hit)
    }
}
