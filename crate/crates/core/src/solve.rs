//! Solvers over [`QuboInstance`]s: exhaustive enumeration, single-flip
//! simulated annealing and uniform random sampling.
//!
//! Ties are broken toward the lexicographically smallest bit vector
//! (bit 0 most significant), so results never depend on visiting order.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::encode::{decode, EncodeError};
use crate::qubo::{QuboError, QuboInstance};
use crate::scalar::Real;

/// Largest instance `brute_force` will enumerate.
pub const BRUTE_FORCE_MAX_BITS: usize = 26;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("instance has {bits} bits; exhaustive search is capped at {cap}")]
    TooLarge { bits: usize, cap: usize },
    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid solver argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

pub type Result<T> = std::result::Result<T, SolveError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    BruteForce,
    Anneal,
    Random,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BruteForce => "bruteforce",
            Self::Anneal => "anneal",
            Self::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub best_bits: Vec<bool>,
    pub best_energy: T,
    pub best_units: Vec<i64>,
    /// `−best_energy`, the portfolio objective at `best_units`.
    pub objective_value: T,
    pub evaluations: u64,
    pub wall_time: Duration,
    pub solver: SolverKind,
    pub seed: u64,
}

impl<T: Real> SolveResult<T> {
    fn finish(
        qi: &QuboInstance<T>,
        bits: Vec<bool>,
        evaluations: u64,
        started: Instant,
        solver: SolverKind,
        seed: u64,
    ) -> Result<Self> {
        let best_energy = qi.energy(&bits)?;
        let best_units = decode(qi.encoding(), &bits)?;
        Ok(Self {
            best_bits: bits,
            best_energy,
            objective_value: -best_energy,
            best_units,
            evaluations,
            wall_time: started.elapsed(),
            solver,
            seed,
        })
    }
}

fn lex_cmp(a: &[bool], b: &[bool]) -> Ordering {
    a.cmp(b)
}

/// Relative tolerance under which two energies count as tied.
fn tie_tol<T: Real>(qi: &QuboInstance<T>) -> T {
    T::rel_tol(1e-12) * (T::one() + qi.max_abs_coefficient() * T::lit(qi.bits().max(1) as f64) + qi.offset().abs())
}

/// Bit state with cached local fields, giving O(1) flip deltas and O(n)
/// updates. `field[j] = Σ_{i≠j} Q_ij·bᵢ` over the symmetric couplings.
#[derive(Debug, Clone)]
pub struct AnnealState<'a, T> {
    couplings: &'a [T],
    n: usize,
    bits: Vec<bool>,
    field: Vec<T>,
    energy: T,
}

impl<'a, T: Real> AnnealState<'a, T> {
    /// `couplings` comes from [`QuboInstance::dense_couplings`].
    pub fn new(qi: &QuboInstance<T>, couplings: &'a [T], bits: Vec<bool>) -> Result<Self> {
        let n = qi.bits();
        if bits.len() != n {
            return Err(QuboError::LengthMismatch { expected: n, found: bits.len() }.into());
        }
        let mut field = vec![T::zero(); n];
        for i in (0..n).filter(|&i| bits[i]) {
            for (j, f) in field.iter_mut().enumerate() {
                if j != i {
                    *f = *f + couplings[i * n + j];
                }
            }
        }
        let energy = qi.energy(&bits)?;
        Ok(Self { couplings, n, bits, field, energy })
    }

    pub fn energy(&self) -> T {
        self.energy
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Energy change from flipping bit `j`.
    #[inline]
    pub fn delta(&self, j: usize) -> T {
        let base = self.couplings[j * self.n + j] + self.field[j];
        if self.bits[j] {
            -base
        } else {
            base
        }
    }

    pub fn flip(&mut self, j: usize) {
        let d = self.delta(j);
        let row = &self.couplings[j * self.n..(j + 1) * self.n];
        let sign = if self.bits[j] { -T::one() } else { T::one() };
        for (i, f) in self.field.iter_mut().enumerate() {
            if i != j {
                *f = *f + sign * row[i];
            }
        }
        self.bits[j] = !self.bits[j];
        self.energy = self.energy + d;
    }
}

/// Exact global minimum by Gray-code enumeration of all `2^bits` states.
pub fn brute_force<T: Real>(qi: &QuboInstance<T>) -> Result<SolveResult<T>> {
    let started = Instant::now();
    let n = qi.bits();
    if n > BRUTE_FORCE_MAX_BITS {
        return Err(SolveError::TooLarge { bits: n, cap: BRUTE_FORCE_MAX_BITS });
    }
    let couplings = qi.dense_couplings();
    let mut state = AnnealState::new(qi, &couplings, vec![false; n])?;
    let tol = tie_tol(qi);
    let mut best_e = state.energy();
    let mut best_bits = state.bits().to_vec();
    let total: u64 = 1 << n;
    for k in 1..total {
        let j = k.trailing_zeros() as usize;
        state.flip(j);
        if k & 0xffff == 0 {
            // resynchronize the running sum against drift
            state.energy = qi.energy(&state.bits)?;
        }
        let e = state.energy();
        if e < best_e - tol {
            best_e = e;
            best_bits.copy_from_slice(state.bits());
        } else if e <= best_e + tol && lex_cmp(state.bits(), &best_bits) == Ordering::Less {
            best_e = best_e.min(e);
            best_bits.copy_from_slice(state.bits());
        }
    }
    SolveResult::finish(qi, best_bits, total, started, SolverKind::BruteForce, 0)
}

/// Annealing schedule: `sweeps` passes over all bits per restart with the
/// inverse temperature ramped geometrically from `beta_start` to
/// `beta_end` (both in units of `1 / max|Q|`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub sweeps: u32,
    pub beta_start: f64,
    pub beta_end: f64,
    pub restarts: u32,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { sweeps: 2000, beta_start: 0.1, beta_end: 50.0, restarts: 8, seed: 0 }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SolveError::InvalidSchedule(m.to_owned()));
        if self.sweeps < 1 {
            return bad("sweeps must be at least 1");
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if !(self.beta_start > 0.0 && self.beta_start.is_finite()) {
            return bad("beta_start must be positive");
        }
        if !(self.beta_end >= self.beta_start && self.beta_end.is_finite()) {
            return bad("beta_end must be at least beta_start");
        }
        Ok(())
    }

    fn beta(&self, sweep: u32) -> f64 {
        if self.sweeps == 1 {
            return self.beta_start;
        }
        let t = sweep as f64 / (self.sweeps - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(t)
    }
}

/// RNG stream for one restart, independent of scheduling order.
fn restart_rng(seed: u64, restart: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

pub fn simulated_annealing<T: Real>(qi: &QuboInstance<T>, sched: &AnnealSchedule) -> Result<SolveResult<T>> {
    simulated_annealing_from(qi, sched, None, true)
}

/// Annealing with an optional warm start shared by all restarts. With
/// `parallel` the restarts run on the rayon pool; the result is the same
/// either way.
pub fn simulated_annealing_from<T: Real>(
    qi: &QuboInstance<T>,
    sched: &AnnealSchedule,
    warm_start: Option<&[bool]>,
    parallel: bool,
) -> Result<SolveResult<T>> {
    let started = Instant::now();
    sched.validate()?;
    let n = qi.bits();
    if n == 0 {
        return Err(SolveError::InvalidArgument("annealing needs at least one bit".into()));
    }
    if let Some(w) = warm_start {
        if w.len() != n {
            return Err(QuboError::LengthMismatch { expected: n, found: w.len() }.into());
        }
    }
    let couplings = qi.dense_couplings();
    let scale = qi.max_abs_coefficient().as_f64();
    let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };

    let run = |restart: u32| -> Result<(T, Vec<bool>)> {
        let mut rng = restart_rng(sched.seed, restart);
        let init = match warm_start {
            Some(w) => w.to_vec(),
            None => (0..n).map(|_| rng.random::<bool>()).collect(),
        };
        let mut state = AnnealState::new(qi, &couplings, init)?;
        let mut best_e = state.energy();
        let mut best = state.bits().to_vec();
        let mut order: Vec<usize> = (0..n).collect();
        for sweep in 0..sched.sweeps {
            let beta = T::lit(sched.beta(sweep) * scale);
            order.shuffle(&mut rng);
            for &j in &order {
                let d = state.delta(j);
                let u: f64 = rng.random();
                if d <= T::zero() || T::lit(u) < (-beta * d).exp() {
                    state.flip(j);
                    if state.energy() < best_e {
                        best_e = state.energy();
                        best.copy_from_slice(state.bits());
                    }
                }
            }
        }
        Ok((qi.energy(&best)?, best))
    };

    let per_restart: Vec<(T, Vec<bool>)> = if parallel {
        (0..sched.restarts).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..sched.restarts).map(run).collect::<Result<_>>()?
    };
    let tol = tie_tol(qi);
    let mut it = per_restart.into_iter();
    let (mut best_e, mut best) = it.next().expect("at least one restart");
    for (e, bits) in it {
        if e < best_e - tol || (e <= best_e + tol && lex_cmp(&bits, &best) == Ordering::Less) {
            best_e = best_e.min(e);
            best = bits;
        }
    }
    let evaluations = sched.restarts as u64 * (1 + sched.sweeps as u64 * n as u64);
    SolveResult::finish(qi, best, evaluations, started, SolverKind::Anneal, sched.seed)
}

/// Best of `samples` uniformly random bit vectors.
pub fn random_search<T: Real>(qi: &QuboInstance<T>, samples: u64, seed: u64) -> Result<SolveResult<T>> {
    let started = Instant::now();
    if samples < 1 {
        return Err(SolveError::InvalidArgument("random search needs at least one sample".into()));
    }
    let n = qi.bits();
    let tol = tie_tol(qi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = vec![false; n];
    let mut best: Option<(T, Vec<bool>)> = None;
    for _ in 0..samples {
        bits.iter_mut().for_each(|b| *b = rng.random());
        let e = qi.energy(&bits)?;
        let better = match &best {
            None => true,
            Some((be, bb)) => e < *be - tol || (e <= *be + tol && lex_cmp(&bits, bb) == Ordering::Less),
        };
        if better {
            let floor = best.as_ref().map_or(e, |(be, _)| be.min(e));
            best = Some((floor, bits.clone()));
        }
    }
    let (_, best) = best.expect("samples >= 1");
    SolveResult::finish(qi, best, samples, started, SolverKind::Random, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::Encoding;
    use crate::model::QuadraticModel;
    use crate::numerics::{SymMatrix, Vector};
    use crate::qubo::build_qubo;

    /// QUBO over `n` independent one-bit variables from a random model.
    fn random_instance(n: usize, seed: u64) -> QuboInstance<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = SymMatrix::zeros(n);
        let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..n).map(|k| a[k][i] * a[k][j]).sum();
                b.set(i, j, s + if i == j { 0.1 } else { 0.0 });
            }
        }
        let lin: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = QuadraticModel::new(Vector::new(lin).unwrap(), b, 0.0).unwrap();
        let e = Encoding::new((0..n).map(|i| format!("v{i}")).collect(), vec![0; n], vec![vec![1]; n]).unwrap();
        build_qubo(&m, &e).unwrap()
    }

    fn empty_instance() -> QuboInstance<f64> {
        let m = QuadraticModel::new(Vector::from_f64(&[1.0]).unwrap(), SymMatrix::identity(1), 2.0).unwrap();
        let e = Encoding::new(vec!["a".into()], vec![3], vec![vec![]]).unwrap();
        build_qubo(&m, &e).unwrap()
    }

    #[test]
    fn brute_force_empty() {
        let q = empty_instance();
        let r = brute_force(&q).unwrap();
        assert_eq!(r.best_energy, q.offset());
        assert_eq!(r.best_units, vec![3]);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn brute_force_single_negative_bit() {
        let q: QuboInstance<f64> = QuboInstance::from_text(
            "HOTQUBO v1\nbits 1 offset 5.0000000000000000e-1\nvar a offset 0 weights 1\n0 0 -1.0000000000000000e0\n",
        )
        .unwrap();
        let r = brute_force(&q).unwrap();
        assert_eq!(r.best_bits, vec![true]);
        assert_eq!(r.best_energy, -0.5);
        assert_eq!(r.objective_value, 0.5);
    }

    #[test]
    fn brute_force_cap() {
        let e = Encoding::new(vec!["a".into()], vec![0], vec![vec![1; 27]]).unwrap();
        let m = QuadraticModel::new(Vector::from_f64(&[1.0]).unwrap(), SymMatrix::identity(1), 0.0).unwrap();
        let q = build_qubo(&m, &e).unwrap();
        assert!(matches!(brute_force(&q), Err(SolveError::TooLarge { bits: 27, cap: 26 })));
    }

    #[test]
    fn brute_force_prefers_lexicographically_smallest_tie() {
        // x = b0 + b1 with weights (1,1): (1,0) and (0,1) both decode to 1
        let m = QuadraticModel::new(Vector::from_f64(&[1.0]).unwrap(), SymMatrix::identity(1), 0.0).unwrap();
        let e = Encoding::new(vec!["a".into()], vec![0], vec![vec![1, 1]]).unwrap();
        let q = build_qubo(&m, &e).unwrap();
        let r = brute_force(&q).unwrap();
        assert_eq!(r.best_units, vec![1]);
        assert_eq!(r.best_bits, vec![false, true]);
    }

    #[test]
    fn brute_force_matches_plain_enumeration() {
        for seed in 0..10 {
            let q = random_instance(9, seed);
            let r = brute_force(&q).unwrap();
            let mut best = f64::INFINITY;
            for m in 0..1u32 << 9 {
                let bits: Vec<bool> = (0..9).map(|j| m >> j & 1 == 1).collect();
                best = best.min(q.energy(&bits).unwrap());
            }
            assert!((r.best_energy - best).abs() <= 1e-12 * (1.0 + best.abs()));
            assert_eq!(r.best_energy, q.energy(&r.best_bits).unwrap());
        }
    }

    #[test]
    fn incremental_deltas_match_full_evaluation() {
        for seed in 0..20 {
            let q = random_instance(10, seed);
            let c = q.dense_couplings();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let init: Vec<bool> = (0..10).map(|_| rng.random()).collect();
            let mut s = AnnealState::new(&q, &c, init).unwrap();
            for _ in 0..200 {
                let j = rng.random_range(0..10);
                let before = q.energy(s.bits()).unwrap();
                let d = s.delta(j);
                s.flip(j);
                let after = q.energy(s.bits()).unwrap();
                assert!((after - before - d).abs() <= 1e-9 * (1.0 + before.abs()));
                assert!((s.energy() - after).abs() <= 1e-9 * (1.0 + after.abs()));
            }
        }
    }

    #[test]
    fn anneal_never_beats_exact() {
        for seed in 0..5 {
            let q = random_instance(8, seed);
            let exact = brute_force(&q).unwrap();
            let sched = AnnealSchedule { sweeps: 50, restarts: 2, seed, ..Default::default() };
            let r = simulated_annealing(&q, &sched).unwrap();
            assert!(r.best_energy >= exact.best_energy - 1e-12);
            assert_eq!(r.best_energy, q.energy(&r.best_bits).unwrap());
            assert_eq!(r.evaluations, 2 * (1 + 50 * 8));
        }
    }

    #[test]
    fn anneal_parallel_equals_serial() {
        let q = random_instance(12, 7);
        let sched = AnnealSchedule { sweeps: 100, restarts: 6, seed: 99, ..Default::default() };
        let a = simulated_annealing_from(&q, &sched, None, true).unwrap();
        let b = simulated_annealing_from(&q, &sched, None, false).unwrap();
        assert_eq!(a.best_bits, b.best_bits);
        assert_eq!(a.best_energy.to_bits(), b.best_energy.to_bits());
    }

    #[test]
    fn anneal_rejects_bad_input() {
        let q = random_instance(3, 1);
        let bad = AnnealSchedule { beta_end: 0.01, ..Default::default() };
        assert!(matches!(simulated_annealing(&q, &bad), Err(SolveError::InvalidSchedule(_))));
        let bad = AnnealSchedule { restarts: 0, ..Default::default() };
        assert!(simulated_annealing(&q, &bad).is_err());
        assert!(simulated_annealing(&empty_instance(), &AnnealSchedule::default()).is_err());
        assert!(simulated_annealing_from(&q, &AnnealSchedule::default(), Some(&[true]), false).is_err());
    }

    #[test]
    fn random_search_cases() {
        let q = empty_instance();
        assert_eq!(random_search(&q, 3, 0).unwrap().best_energy, q.offset());
        assert!(random_search(&q, 0, 0).is_err());

        let q = random_instance(8, 3);
        let exact = brute_force(&q).unwrap();
        let r = random_search(&q, 256, 5).unwrap();
        assert!(r.best_energy >= exact.best_energy - 1e-12);
        let again = random_search(&q, 256, 5).unwrap();
        assert_eq!(r.best_bits, again.best_bits);
        assert_eq!(r.best_energy.to_bits(), again.best_energy.to_bits());
        assert_eq!(r.evaluations, 256);
    }

    #[test]
    fn schedule_ramp() {
        let s = AnnealSchedule { sweeps: 3, beta_start: 0.1, beta_end: 10.0, restarts: 1, seed: 0 };
        assert!((s.beta(0) - 0.1).abs() < 1e-15);
        assert!((s.beta(1) - 1.0).abs() < 1e-12);
        assert!((s.beta(2) - 10.0).abs() < 1e-12);
    }
}
