//! Trajectory sampling and empirical statistics.
//!
//! A trajectory over horizon t keeps the jump chain X_0..X_{N_t+1},
//! waits τ_1..τ_{N_t+1} and jump times S_0..S_{N_t+1}, where N_t is the
//! last index with S_{N_t} <= t. The overshoot wait τ_{N_t+1} and the
//! pending landing state X_{N_t+1} are sampled and stored: the
//! empirical measure's residual term and the change-of-measure
//! martingales both need them.
//!
//! Empirical statistics:
//!
//! ```text
//!   μ_t:   weights τ_k/t on (X_{k-1}, τ_k), k <= N_t,
//!          plus (t - S_{N_t})/t on (X_{N_t}, τ_{N_t+1})
//!   Q_t(x,y) = (1/t) #{k <= N_t+1 : (X_{k-1}, X_k) = (x,y)}
//!   ⟨μ̂_t, f⟩ = (1/t) Σ_{k<=N_t+1} τ_k f(X_{k-1}, τ_k)
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{EdgeTarget, SemiMarkovModel};

/// Explosion guard: a single trajectory may not exceed this many jumps.
pub const MAX_JUMPS: u64 = 100_000_000;

/// Initial condition for sampling.
#[derive(Debug, Clone)]
pub enum Start {
    State(usize),
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// X_0 .. X_{N_t+1}.
    pub states: Vec<usize>,
    /// τ_1 .. τ_{N_t+1}.
    pub waits: Vec<f64>,
    /// S_0 = 0 .. S_{N_t+1}.
    pub jump_times: Vec<f64>,
    pub horizon: f64,
}

impl Trajectory {
    /// N_t: number of completed jumps within the horizon.
    pub fn n_t(&self) -> usize {
        self.waits.len() - 1
    }

    /// State occupied at the horizon, X_{N_t}.
    pub fn state_at_horizon(&self) -> usize {
        self.states[self.n_t()]
    }

    /// In-progress wait τ_{N_t+1}.
    pub fn overshoot_wait(&self) -> f64 {
        *self.waits.last().unwrap()
    }

    /// One line per jump k = 1..N_t+1: k, X_{k-1}, X_k, τ_k, S_k.
    pub fn write_dump(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "k,from,to,wait,jump_time")?;
        for k in 1..self.states.len() {
            writeln!(
                w,
                "{},{},{},{:.11e},{:.11e}",
                k,
                self.states[k - 1],
                self.states[k],
                self.waits[k - 1],
                self.jump_times[k]
            )?;
        }
        Ok(())
    }
}

/// Samples one trajectory. The generator is keyed by (seed, replicate):
/// replicas are reproducible independently of scheduling.
pub fn sample_trajectory_keyed(
    model: &SemiMarkovModel,
    start: &Start,
    horizon: f64,
    seed: u64,
    replicate: u64,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::Precondition(format!("horizon must be > 0, got {horizon}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    let mut x = match start {
        Start::State(x) => {
            if *x >= model.n_states() {
                return Err(Error::Precondition(format!("start state {x} outside truncation")));
            }
            *x
        }
        Start::Distribution(w) => {
            if w.len() != model.n_states() || w.iter().any(|&p| p < 0.0) {
                return Err(Error::Precondition("bad start distribution".into()));
            }
            let total: f64 = w.iter().sum();
            let u = rand::Rng::random::<f64>(&mut rng) * total;
            let mut acc = 0.0;
            let mut chosen = w.len() - 1;
            for (i, &p) in w.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        }
    };

    let mut states = vec![x];
    let mut waits = Vec::new();
    let mut jump_times = vec![0.0];
    let mut s = 0.0f64;
    let mut jumps: u64 = 0;
    loop {
        jumps += 1;
        if jumps > MAX_JUMPS {
            return Err(Error::PossibleExplosion { jumps });
        }
        let tau = model.law(x).sample(&mut rng)?;
        let edges = model.out_edges(x);
        if edges.is_empty() {
            return Err(Error::NoOutgoingEdge { state: x });
        }
        let u = rand::Rng::random::<f64>(&mut rng);
        let mut acc = 0.0;
        let mut chosen = edges.len() - 1;
        for (i, e) in edges.iter().enumerate() {
            acc += e.prob;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let y = match edges[chosen].target {
            EdgeTarget::State(y) => y,
            EdgeTarget::Boundary => {
                return Err(Error::TruncationEscape { state: x, radius: model.radius() })
            }
        };
        s += tau;
        states.push(y);
        waits.push(tau);
        jump_times.push(s);
        if s > horizon {
            return Ok(Trajectory { states, waits, jump_times, horizon });
        }
        x = y;
    }
}

/// Single-replica convenience wrapper (replicate key 0).
pub fn sample_trajectory(
    model: &SemiMarkovModel,
    start: &Start,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    sample_trajectory_keyed(model, start, horizon, seed, 0)
}

/// Maps `f` over `n` replicas in parallel. Replica i uses the (seed, i)
/// key, and results come back in replica order, so the outcome is
/// identical to sequential execution.
pub fn map_replicas<T: Send>(
    model: &SemiMarkovModel,
    start: &Start,
    horizon: f64,
    seed: u64,
    n: u64,
    f: impl Fn(u64, Trajectory) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let traj = sample_trajectory_keyed(model, start, horizon, seed, i)?;
            f(i, traj)
        })
        .collect()
}

/// Sparse nonnegative edge flow (events per unit time).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flow {
    entries: BTreeMap<(usize, usize), f64>,
}

impl Flow {
    pub fn from_entries(entries: impl IntoIterator<Item = ((usize, usize), f64)>) -> Result<Flow> {
        let mut map = BTreeMap::new();
        for ((x, y), v) in entries {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Precondition(format!(
                    "flow entry ({x},{y}) = {v} must be finite and >= 0"
                )));
            }
            if v > 0.0 {
                *map.entry((x, y)).or_insert(0.0) += v;
            }
        }
        Ok(Flow { entries: map })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries.get(&(x, y)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    /// L¹ norm ‖Q‖ = Σ entries.
    pub fn norm(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Exit current Q⁺(x) = Σ_y Q(x,y).
    pub fn current_out(&self, x: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(&(a, _), _)| a == x)
            .map(|(_, &v)| v)
            .sum()
    }

    /// Entrance current Q⁻(x) = Σ_y Q(y,x).
    pub fn current_in(&self, x: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(&(_, b), _)| b == x)
            .map(|(_, &v)| v)
            .sum()
    }

    /// States touched by the flow (source or target of a positive entry).
    pub fn touched_states(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .entries
            .keys()
            .flat_map(|&(x, y)| [x, y])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// max_x |Q⁺(x) - Q⁻(x)|.
    pub fn max_divergence(&self) -> f64 {
        self.touched_states()
            .into_iter()
            .map(|x| (self.current_out(x) - self.current_in(x)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_divergence_free(&self, tol: f64) -> bool {
        self.max_divergence() <= tol
    }
}

/// Q_t from a trajectory; the count runs to N_t + 1, so
/// ‖Q_t‖ = (N_t+1)/t exactly.
pub fn empirical_flow(traj: &Trajectory) -> Flow {
    let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let w = 1.0 / traj.horizon;
    for k in 1..traj.states.len() {
        *map.entry((traj.states[k - 1], traj.states[k])).or_insert(0.0) += w;
    }
    Flow { entries: map }
}

/// Weighted-sample representation of μ_t.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    /// Per state: (duration, weight) samples, residual included.
    samples: BTreeMap<usize, Vec<(f64, f64)>>,
}

impl EmpiricalMeasure {
    pub fn mass(&self) -> f64 {
        self.samples.values().flatten().map(|&(_, w)| w).sum()
    }

    /// π_t(x) = μ_t(x, (0,∞]).
    pub fn pi(&self, x: usize) -> f64 {
        self.samples
            .get(&x)
            .map_or(0.0, |v| v.iter().map(|&(_, w)| w).sum())
    }

    pub fn pi_vec(&self, n: usize) -> Vec<f64> {
        (0..n).map(|x| self.pi(x)).collect()
    }

    /// ⟨μ_t, f⟩ for f on V×(0,∞).
    pub fn integrate(&self, f: impl Fn(usize, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (&x, v) in &self.samples {
            for &(s, w) in v {
                acc += w * f(x, s);
            }
        }
        acc
    }
}

/// μ_t from a trajectory.
pub fn empirical_measure(traj: &Trajectory) -> EmpiricalMeasure {
    let t = traj.horizon;
    let n = traj.n_t();
    let mut samples: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for k in 1..=n {
        samples
            .entry(traj.states[k - 1])
            .or_default()
            .push((traj.waits[k - 1], traj.waits[k - 1] / t));
    }
    let residual = (t - traj.jump_times[n]) / t;
    samples
        .entry(traj.states[n])
        .or_default()
        .push((traj.waits[n], residual));
    EmpiricalMeasure { samples }
}

/// ⟨μ̂_t, f⟩ = (1/t) Σ_{k=1}^{N_t+1} τ_k f(X_{k-1}, τ_k).
pub fn corrected_average(traj: &Trajectory, f: impl Fn(usize, f64) -> f64) -> f64 {
    let t = traj.horizon;
    let mut acc = 0.0;
    for k in 1..traj.states.len() {
        acc += traj.waits[k - 1] * f(traj.states[k - 1], traj.waits[k - 1]);
    }
    acc / t
}

/// Law-of-large-numbers targets for an irreducible finite model with no
/// boundary leakage: embedded invariant ν, mean cycle time E_ν[τ],
/// limiting flow ν_x p_xy / E_ν[τ] and occupation ν_x E_x[τ] / E_ν[τ].
#[derive(Debug, Clone)]
pub struct StationaryTargets {
    pub nu: Vec<f64>,
    pub mean_cycle: f64,
    pub flow: Flow,
    pub pi: Vec<f64>,
}

pub fn stationary_targets(model: &SemiMarkovModel) -> Result<StationaryTargets> {
    let nu = model.embedded_stationary()?;
    let means: Vec<f64> = (0..model.n_states()).map(|x| model.law(x).mean()).collect();
    let mean_cycle: f64 = nu.iter().zip(&means).map(|(n, m)| n * m).sum();
    let mut entries = Vec::new();
    for x in 0..model.n_states() {
        for e in model.out_edges(x) {
            if let EdgeTarget::State(y) = e.target {
                entries.push(((x, y), nu[x] * e.prob / mean_cycle));
            }
        }
    }
    let flow = Flow::from_entries(entries)?;
    let pi = nu
        .iter()
        .zip(&means)
        .map(|(n, m)| n * m / mean_cycle)
        .collect();
    Ok(StationaryTargets { nu, mean_cycle, flow, pi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::WaitingLaw;
    use approx::assert_abs_diff_eq;

    fn unit_loop() -> SemiMarkovModel {
        SemiMarkovModel::explicit(
            1,
            &[(0, 0, 1.0)],
            vec![WaitingLaw::dirac(1.0).unwrap()],
        )
        .unwrap()
    }

    fn alternator(q0: f64, q1: f64) -> SemiMarkovModel {
        SemiMarkovModel::explicit(
            2,
            &[(0, 1, 1.0), (1, 0, 1.0)],
            vec![
                WaitingLaw::exponential(q0).unwrap(),
                WaitingLaw::exponential(q1).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn deterministic_unit_loop() {
        let traj = sample_trajectory(&unit_loop(), &Start::State(0), 10.5, 7).unwrap();
        assert_eq!(traj.n_t(), 10);
        for (k, &s) in traj.jump_times.iter().enumerate() {
            assert_abs_diff_eq!(s, k as f64, epsilon = 1e-12);
        }
        // Q(0,0) = (N_t+1)/t = 11/10.5.
        let q = empirical_flow(&traj);
        assert_abs_diff_eq!(q.get(0, 0), 11.0 / 10.5, epsilon = 1e-12);
        // μ_t: ten full unit weights plus residual 0.5/10.5.
        let mu = empirical_measure(&traj);
        assert_abs_diff_eq!(mu.mass(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu.pi(0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn same_seed_identical() {
        let m = alternator(1.0, 2.0);
        let a = sample_trajectory(&m, &Start::State(0), 50.0, 42).unwrap();
        let b = sample_trajectory(&m, &Start::State(0), 50.0, 42).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.waits, b.waits);
    }

    #[test]
    fn distinct_replicates_differ() {
        let m = alternator(1.0, 2.0);
        let a = sample_trajectory_keyed(&m, &Start::State(0), 50.0, 42, 0).unwrap();
        let b = sample_trajectory_keyed(&m, &Start::State(0), 50.0, 42, 1).unwrap();
        assert_ne!(a.waits, b.waits);
    }

    #[test]
    fn trajectory_invariants() {
        let m = alternator(1.0, 2.0);
        let traj = sample_trajectory(&m, &Start::State(0), 100.0, 3).unwrap();
        let n = traj.n_t();
        assert!(traj.jump_times[n] <= traj.horizon && traj.horizon < traj.jump_times[n + 1]);
        let mut s = 0.0;
        for (k, &tau) in traj.waits.iter().enumerate() {
            assert!(tau > 0.0);
            s += tau;
            assert_abs_diff_eq!(traj.jump_times[k + 1], s, epsilon = 1e-9);
        }
    }

    #[test]
    fn flow_norm_identity() {
        let m = alternator(1.0, 2.0);
        for seed in 0..5 {
            let traj = sample_trajectory(&m, &Start::State(0), 37.0, seed).unwrap();
            let q = empirical_flow(&traj);
            assert_abs_diff_eq!(
                q.norm(),
                (traj.n_t() as f64 + 1.0) / traj.horizon,
                epsilon = 1e-12
            );
            assert!(q.max_divergence() <= 1.0 / traj.horizon + 1e-12);
        }
    }

    #[test]
    fn measure_mass_and_flow_bound() {
        let m = alternator(1.0, 2.0);
        let traj = sample_trajectory(&m, &Start::State(0), 83.0, 11).unwrap();
        let mu = empirical_measure(&traj);
        assert_abs_diff_eq!(mu.mass(), 1.0, epsilon = 1e-12);
        // ⟨μ_t, 1/s⟩ <= ‖Q_t‖.
        let q = empirical_flow(&traj);
        assert!(mu.integrate(|_, s| 1.0 / s) <= q.norm() + 1e-12);
    }

    #[test]
    fn corrected_average_identities() {
        let m = alternator(1.0, 2.0);
        let traj = sample_trajectory(&m, &Start::State(0), 53.0, 5).unwrap();
        let n = traj.n_t();
        assert_abs_diff_eq!(
            corrected_average(&traj, |_, _| 1.0),
            traj.jump_times[n + 1] / traj.horizon,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            corrected_average(&traj, |_, s| 1.0 / s),
            (n as f64 + 1.0) / traj.horizon,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(corrected_average(&traj, |_, _| 0.0), 0.0);
        // ⟨μ̂_t,f⟩ = ⟨μ_t,f⟩ + (S_{N+1}-t)/t · f(X_N, τ_{N+1}).
        let f = |x: usize, s: f64| (x as f64 + 1.0) * s.ln();
        let mu = empirical_measure(&traj);
        let lhs = corrected_average(&traj, f);
        let rhs = mu.integrate(f)
            + (traj.jump_times[n + 1] - traj.horizon) / traj.horizon
                * f(traj.state_at_horizon(), traj.overshoot_wait());
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn renewal_lln() {
        let m = alternator(1.0, 1.0);
        let traj = sample_trajectory(&m, &Start::State(0), 1e4, 1).unwrap();
        let rate = traj.n_t() as f64 / traj.horizon;
        // E[τ]=1; N_t/t ≈ 1 within ~3 stderr (σ/√t = 0.01).
        assert!((rate - 1.0).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn boundary_escape_reported() {
        let m = SemiMarkovModel::birth_death(3, |_| 0.9, |_| WaitingLaw::exponential(1.0)).unwrap();
        let mut escaped = false;
        for seed in 0..20 {
            match sample_trajectory(&m, &Start::State(0), 100.0, seed) {
                Err(Error::TruncationEscape { radius: 3, .. }) => {
                    escaped = true;
                    break;
                }
                Ok(_) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(escaped);
    }

    #[test]
    fn stationary_targets_alternator() {
        let m = alternator(1.0, 2.0);
        let st = stationary_targets(&m).unwrap();
        // ν = (1/2,1/2), E_ν[τ] = (1 + 1/2)/2 = 3/4.
        assert_abs_diff_eq!(st.mean_cycle, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(st.flow.get(0, 1), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.pi[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(st.pi[1], 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn dump_format() {
        let traj = sample_trajectory(&unit_loop(), &Start::State(0), 2.5, 0).unwrap();
        let mut buf = Vec::new();
        traj.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,from,to,wait,jump_time");
        assert_eq!(lines.count(), traj.n_t() + 1);
    }
}
