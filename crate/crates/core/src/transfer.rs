//! Finite-memory transfer matrices for one-sided spin chains.
//!
//! A state is a word of `m` spins packed into the low bits of a `u64`, bit
//! `i` holding the spin at depth `i + 1` from the present (`1` encodes `+1`,
//! `0` encodes `-1`).  The matrix entry from state `w` under new symbol `a`
//! is `exp(a * S(w))` with `S(w) = sum_{k=1..m} J(k) * spin(bit_{k-1}(w))`,
//! the one-point potential truncated at depth `m`.  Applying the operator
//! prepends the new symbol: the successor state is `bit(a) | (w << 1)`
//! truncated back to `m` bits.
//!
//! The leading eigenpair is computed by power iteration with a
//! Collatz-Wielandt enclosure, so the returned `lambda` comes with a
//! certified interval for the finite matrix (truncation in `m` is bounded
//! separately via the coupling tails).

use crate::couplings::CouplingFamily;
use crate::numeric::KahanSum;
use crate::{Error, Result};

/// Hard cap on the memory depth (state space `2^m`).
pub const MAX_MEMORY: u32 = 24;

/// Dense transfer matrix at memory depth `m`, stored through the per-state
/// truncated potential `S(w)`.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    m: u32,
    s: Vec<f64>,
    j: Vec<f64>,
}

impl TransferMatrix {
    /// Tabulate `S(w)` for all `2^m` states.  Each state is summed
    /// independently with compensated addition, so the table is exactly
    /// antisymmetric under spin flip: `S(!w) == -S(w)` bit for bit.
    pub fn new(fam: &CouplingFamily, m: u32) -> Result<Self> {
        if m < 1 || m > MAX_MEMORY {
            return Err(Error::MemoryOutOfRange { m, max: MAX_MEMORY });
        }
        let j: Vec<f64> = (1..=m as u64).map(|k| fam.coupling_value(k)).collect();
        let n_states = 1usize << m;
        let mut s = vec![0.0; n_states];
        for (w, slot) in s.iter_mut().enumerate() {
            let mut acc = KahanSum::new();
            for (k, &jk) in j.iter().enumerate() {
                let term = if w >> k & 1 == 1 { jk } else { -jk };
                acc.add(term);
            }
            *slot = acc.value();
        }
        Ok(Self { m, s, j })
    }

    pub fn memory(&self) -> u32 {
        self.m
    }

    pub fn num_states(&self) -> usize {
        self.s.len()
    }

    /// Truncated one-point potential `S(w)` of the packed state.
    pub fn potential(&self, w: u64) -> f64 {
        self.s[w as usize]
    }

    /// Coupling values `J(1), ..., J(m)` used by this matrix.
    pub fn couplings(&self) -> &[f64] {
        &self.j
    }

    /// Matrix entry `exp(a * S(w))` for the move from `w` under symbol `a`.
    pub fn entry(&self, w: u64, a: i8) -> Result<f64> {
        if a != 1 && a != -1 {
            return Err(Error::BadSymbol(a));
        }
        Ok((f64::from(a) * self.s[w as usize]).exp())
    }

    /// Pack a spin word (most recent first) into a state index.
    pub fn pack(&self, word: &[i8]) -> Result<u64> {
        if word.len() != self.m as usize {
            return Err(Error::LengthMismatch {
                expected: self.m as usize,
                got: word.len(),
            });
        }
        let mut w = 0u64;
        for (i, &x) in word.iter().enumerate() {
            match x {
                1 => w |= 1 << i,
                -1 => {}
                bad => return Err(Error::BadSymbol(bad)),
            }
        }
        Ok(w)
    }

    /// One application of the operator: `out[w] = sum_a e^{a S(w)} f[next]`
    /// with `next = bit(a) | ((w & (2^{m-1} - 1)) << 1)`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.s.len() {
            return Err(Error::LengthMismatch {
                expected: self.s.len(),
                got: f.len(),
            });
        }
        let keep = (1u64 << (self.m - 1)) - 1;
        let out = self
            .s
            .iter()
            .enumerate()
            .map(|(w, &sw)| {
                let shifted = ((w as u64 & keep) << 1) as usize;
                sw.exp() * f[shifted | 1] + (-sw).exp() * f[shifted]
            })
            .collect();
        Ok(out)
    }

    /// Leading eigenpair by power iteration.  Stops when the
    /// Collatz-Wielandt ratio spread `max_w (Lv/v) - min_w (Lv/v)` drops
    /// below `tol * lambda`; the spread certifies the returned interval
    /// `[lambda_lower, lambda_upper]` for this finite matrix.
    pub fn leading_eigenpair(&self, tol: f64, max_iters: u64) -> Result<EigenPair> {
        if !(tol > 0.0) {
            return Err(Error::NonPositive { what: "tolerance" });
        }
        let mut v = vec![1.0f64; self.s.len()];
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iters {
            let out = self.apply(&v)?;
            iterations += 1;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (o, x) in out.iter().zip(&v) {
                let r = o / x;
                lo = lo.min(r);
                hi = hi.max(r);
            }
            // Ratio bounds bracket the leading eigenvalue of a positive
            // matrix; they tighten monotonically along the iteration.
            lower = lower.max(lo);
            upper = upper.min(hi);
            let sup = out.iter().fold(0.0f64, |m, &x| m.max(x));
            v = out;
            for x in v.iter_mut() {
                *x /= sup;
            }
            if upper - lower <= tol * lower {
                converged = true;
                break;
            }
        }
        let lambda = 0.5 * (lower + upper);
        Ok(EigenPair {
            m: self.m,
            lambda,
            lambda_lower: lower,
            lambda_upper: upper,
            residual: 0.5 * (upper - lower),
            iterations,
            converged,
            h: v,
        })
    }

    /// Variation profile of a state function: entry `n` is the largest
    /// difference over pairs of states sharing their first `n` spins
    /// (`n = 0..=m`; the final entry is exactly zero).
    pub fn variation_profile(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.s.len() {
            return Err(Error::LengthMismatch {
                expected: self.s.len(),
                got: h.len(),
            });
        }
        let mut profile = Vec::with_capacity(self.m as usize + 1);
        for n in 0..=self.m {
            let groups = 1usize << n;
            let mut min = vec![f64::INFINITY; groups];
            let mut max = vec![f64::NEG_INFINITY; groups];
            for (w, &x) in h.iter().enumerate() {
                let g = w & (groups - 1);
                min[g] = min[g].min(x);
                max[g] = max[g].max(x);
            }
            let var = min
                .iter()
                .zip(&max)
                .fold(0.0f64, |acc, (lo, hi)| acc.max(hi - lo));
            profile.push(var);
        }
        Ok(profile)
    }

    /// Conditional two-point kernel on words of `m + 1` spins: with
    /// `u = v >> 1` the past state and `a` the spin in bit 0,
    /// `g[v] = e^{a S(u)} h[v & (2^m - 1)] / (lambda h[u])`.
    /// Rows `v = 2u` and `v = 2u + 1` sum to one up to the eigen residual.
    pub fn conditional_kernel(&self, h: &[f64], lambda: f64) -> Result<Vec<f64>> {
        if h.len() != self.s.len() {
            return Err(Error::LengthMismatch {
                expected: self.s.len(),
                got: h.len(),
            });
        }
        if !(lambda > 0.0) {
            return Err(Error::NonPositive { what: "lambda" });
        }
        let mask = (1u64 << self.m) - 1;
        let mut g = vec![0.0; self.s.len() * 2];
        for (slot, gv) in g.iter_mut().enumerate() {
            let v = slot as u64;
            let u = (v >> 1) as usize;
            let a = if v & 1 == 1 { 1.0 } else { -1.0 };
            *gv = (a * self.s[u]).exp() * h[(v & mask) as usize] / (lambda * h[u]);
        }
        Ok(g)
    }

    /// Uniform minorisation mass of a conditional kernel: the sum over the
    /// two symbols of the worst-case conditional weight.  Strictly positive
    /// kernels give a strictly positive constant.
    pub fn doeblin_constant(g: &[f64]) -> f64 {
        let mut min_plus = f64::INFINITY;
        let mut min_minus = f64::INFINITY;
        for (v, &x) in g.iter().enumerate() {
            if v & 1 == 1 {
                min_plus = min_plus.min(x);
            } else {
                min_minus = min_minus.min(x);
            }
        }
        min_plus + min_minus
    }
}

/// Relative drift bound for the leading eigenvalue past memory `m`: any
/// deeper truncation (or the full-memory limit) satisfies
/// `|lambda' - lambda_m| <= lambda' * (e^{2 r_m} - 1)` where `r_m` is the
/// certified coupling tail.
pub fn lambda_gap_bound(fam: &CouplingFamily, m: u32, tol: f64) -> Result<f64> {
    let r = fam.tail_r(m as u64, tol)?;
    Ok((2.0 * r).exp_m1())
}

/// Result of the power iteration on a [`TransferMatrix`].
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub m: u32,
    /// Midpoint of the certified bracket.
    pub lambda: f64,
    pub lambda_lower: f64,
    pub lambda_upper: f64,
    /// Half-width of the bracket.
    pub residual: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Eigenfunction normalised to sup-norm one, indexed by packed state.
    pub h: Vec<f64>,
}
