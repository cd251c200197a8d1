//! Monte-Carlo oracle for the analytic results: Lindley recursion for the
//! waiting time, time-average workload occupancy, random-walk maxima for the
//! ordinary and stationary (delayed) ruin probabilities, and a
//! common-random-numbers check of the convex ordering of the increments.
//!
//! All samplers are deterministic given (seed, stream).

use crate::models::{DependenceModel, PairSampler};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    pub seed: u64,
    /// customers for steady-state runs, replications for ruin runs
    pub n: usize,
    pub batches: usize,
    /// discarded warm-up customers (steady-state runs only)
    pub burn_in: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0x5eed,
            n: 1_000_000,
            batches: 20,
            burn_in: 50_000,
        }
    }
}

impl SimConfig {
    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self.burn_in = (n / 10).max(1000);
        self
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SimEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl SimEstimate {
    /// |value - reference| <= k standard errors (plus a small absolute floor
    /// so exact zeros do not fail spuriously).
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.std_error + 1e-9
    }
}

/// Mean and standard error of the mean from batch means.
fn batch_estimate(batch_means: &[f64]) -> SimEstimate {
    let b = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / b;
    let var = batch_means
        .iter()
        .map(|&m| (m - mean).powi(2))
        .sum::<f64>()
        / (b - 1.0);
    SimEstimate {
        value: mean,
        std_error: (var / b).sqrt(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadyStateSim {
    pub mean: SimEstimate,
    pub atom: SimEstimate,
    pub grid: Vec<f64>,
    pub tail: Vec<SimEstimate>,
}

/// Lindley recursion for the stationary waiting time W.
pub fn simulate_waiting(model: &DependenceModel, cfg: &SimConfig, grid: &[f64]) -> SteadyStateSim {
    let sampler = PairSampler::new(model);
    let mut rng = cfg.rng(1);
    let c = model.c;
    let mut w = 0.0f64;
    for _ in 0..cfg.burn_in {
        let p = sampler.sample_pair(&mut rng);
        w = (w + p.b / c - p.a).max(0.0);
    }
    let per_batch = cfg.n / cfg.batches;
    let mut mean_b = Vec::with_capacity(cfg.batches);
    let mut atom_b = Vec::with_capacity(cfg.batches);
    let mut tail_b = vec![Vec::with_capacity(cfg.batches); grid.len()];
    for _ in 0..cfg.batches {
        let mut sum = 0.0;
        let mut zeros = 0usize;
        let mut above = vec![0usize; grid.len()];
        for _ in 0..per_batch {
            let p = sampler.sample_pair(&mut rng);
            w = (w + p.b / c - p.a).max(0.0);
            sum += w;
            if w == 0.0 {
                zeros += 1;
            }
            for (k, &u) in grid.iter().enumerate() {
                if w > u {
                    above[k] += 1;
                }
            }
        }
        mean_b.push(sum / per_batch as f64);
        atom_b.push(zeros as f64 / per_batch as f64);
        for (k, cnt) in above.iter().enumerate() {
            tail_b[k].push(*cnt as f64 / per_batch as f64);
        }
    }
    SteadyStateSim {
        mean: batch_estimate(&mean_b),
        atom: batch_estimate(&atom_b),
        grid: grid.to_vec(),
        tail: tail_b.iter().map(|b| batch_estimate(b)).collect(),
    }
}

/// Time-average workload: fraction of time the unfinished work exceeds each
/// grid level, the idle fraction (atom at zero), and the mean workload.
pub fn simulate_workload(model: &DependenceModel, cfg: &SimConfig, grid: &[f64]) -> SteadyStateSim {
    let sampler = PairSampler::new(model);
    let mut rng = cfg.rng(2);
    let c = model.c;
    let mut w = 0.0f64; // scaled waiting time cW of the current customer
    let mut a_prev;
    {
        // burn in the embedded chain
        for _ in 0..cfg.burn_in {
            let p = sampler.sample_pair(&mut rng);
            w = (w + p.b - c * p.a).max(0.0);
        }
    }
    let per_batch = cfg.n / cfg.batches;
    let mut mean_b = Vec::with_capacity(cfg.batches);
    let mut atom_b = Vec::with_capacity(cfg.batches);
    let mut tail_b = vec![Vec::with_capacity(cfg.batches); grid.len()];
    for _ in 0..cfg.batches {
        let mut time = 0.0;
        let mut area = 0.0;
        let mut idle = 0.0;
        let mut above = vec![0.0f64; grid.len()];
        for _ in 0..per_batch {
            let p = sampler.sample_pair(&mut rng);
            // workload right after this arrival, draining at rate c for a_next
            let x = w + p.b;
            a_prev = p.a;
            let drained = (x - c * a_prev).max(0.0);
            // integral of the workload over the interval
            area += (x * x - drained * drained) / (2.0 * c);
            idle += (a_prev - x / c).max(0.0);
            for (k, &v) in grid.iter().enumerate() {
                above[k] += a_prev.min(((x - v) / c).max(0.0));
            }
            time += a_prev;
            w = drained;
        }
        mean_b.push(area / time);
        atom_b.push(idle / time);
        for (k, occ) in above.iter().enumerate() {
            tail_b[k].push(occ / time);
        }
    }
    SteadyStateSim {
        mean: batch_estimate(&mean_b),
        atom: batch_estimate(&atom_b),
        grid: grid.to_vec(),
        tail: tail_b.iter().map(|b| batch_estimate(b)).collect(),
    }
}

/// Maximum-of-random-walk estimator for P(sup_n sum_{i<=n} (B_i - c A_i) > u).
///
/// A replication stops once the walk has fallen `slack` below its running
/// maximum; with negative drift the probability of a later record beyond that
/// point is exponentially small in `slack`.
fn simulate_ruin_walk(
    model: &DependenceModel,
    cfg: &SimConfig,
    u_grid: &[f64],
    stream: u64,
    delayed: bool,
) -> Vec<SimEstimate> {
    let sampler = PairSampler::new(model);
    let mut rng = cfg.rng(stream);
    let c = model.c;
    let mom = model.moments();
    let u_max = u_grid.iter().cloned().fold(0.0, f64::max);
    let slack = 40.0 * (mom.eb + c * mom.ea) + u_max;
    let per_batch = (cfg.n / cfg.batches).max(1);
    let mut batches = vec![vec![0.0f64; cfg.batches]; u_grid.len()];
    for b in 0..cfg.batches {
        let mut hits = vec![0usize; u_grid.len()];
        for _ in 0..per_batch {
            let mut s = 0.0f64;
            let mut runmax = 0.0f64;
            let mut first = true;
            loop {
                let p = if delayed && first {
                    sampler.sample_residual_pair(&mut rng)
                } else {
                    sampler.sample_pair(&mut rng)
                };
                first = false;
                s += p.b - c * p.a;
                if s > runmax {
                    runmax = s;
                }
                if runmax - s > slack {
                    break;
                }
            }
            for (k, &u) in u_grid.iter().enumerate() {
                if runmax > u {
                    hits[k] += 1;
                }
            }
        }
        for (k, h) in hits.iter().enumerate() {
            batches[k][b] = *h as f64 / per_batch as f64;
        }
    }
    batches.iter().map(|b| batch_estimate(b)).collect()
}

/// Ruin probabilities with an ordinary first inter-claim interval;
/// the oracle partner of the analytic P(cW > u).
pub fn simulate_ordinary_ruin(
    model: &DependenceModel,
    cfg: &SimConfig,
    u_grid: &[f64],
) -> Vec<SimEstimate> {
    simulate_ruin_walk(model, cfg, u_grid, 3, false)
}

/// Ruin probabilities under the stationary claim arrival process: the first
/// interval is the stationary residual and the first claim keeps the joint
/// coupling; the oracle partner of the analytic P(V > u).
pub fn simulate_delayed_ruin(
    model: &DependenceModel,
    cfg: &SimConfig,
    u_grid: &[f64],
) -> Vec<SimEstimate> {
    simulate_ruin_walk(model, cfg, u_grid, 4, true)
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderingSim {
    pub grid: Vec<f64>,
    /// E(D_ind - t)_+ - E(D_pos - t)_+ under common random numbers
    pub ind_minus_pos: Vec<SimEstimate>,
    /// E(D_neg - t)_+ - E(D_ind - t)_+ under common random numbers
    pub neg_minus_ind: Vec<SimEstimate>,
}

impl OrderingSim {
    /// Grid points where an ordering difference is negative beyond k standard
    /// errors.
    pub fn violations(&self, k: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for (i, &t) in self.grid.iter().enumerate() {
            for d in [&self.ind_minus_pos[i], &self.neg_minus_ind[i]] {
                if d.value < -(k * d.std_error + 1e-9) {
                    out.push((t, d.value));
                }
            }
        }
        out
    }
}

/// Simulated convex-order comparison of the increments D = B/c - A across
/// the three scenarios, sharing one ladder of exponentials per replication
/// so the scenario differences are positively correlated.
pub fn simulate_increment_ordering(
    weights: &[f64],
    lambda: f64,
    mu: f64,
    c: f64,
    cfg: &SimConfig,
    grid: &[f64],
) -> OrderingSim {
    let k = weights.len();
    let mut rng = cfg.rng(5);
    let cum: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let pick = |u: f64| -> usize {
        match cum.binary_search_by(|x| x.partial_cmp(&u).unwrap()) {
            Ok(i) => (i + 1).min(k - 1),
            Err(i) => i.min(k - 1),
        }
    };
    let per_batch = (cfg.n / cfg.batches).max(1);
    let mut d_ip = vec![vec![0.0f64; cfg.batches]; grid.len()];
    let mut d_ni = vec![vec![0.0f64; cfg.batches]; grid.len()];
    let mut ea = vec![0.0f64; k + 1];
    let mut eb = vec![0.0f64; k + 1];
    for b in 0..cfg.batches {
        let mut acc_ip = vec![0.0f64; grid.len()];
        let mut acc_ni = vec![0.0f64; grid.len()];
        for _ in 0..per_batch {
            // shared Erlang ladders: partial sums of the same exponentials
            for j in 1..=k {
                ea[j] = ea[j - 1] - rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / lambda;
                eb[j] = eb[j - 1] - rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / mu;
            }
            let i = pick(rng.gen()) + 1;
            let j = pick(rng.gen()) + 1;
            let d_pos = eb[i] / c - ea[i];
            let d_ind = eb[j] / c - ea[i];
            let d_neg = eb[k + 1 - i] / c - ea[i];
            for (g, &t) in grid.iter().enumerate() {
                acc_ip[g] += (d_ind - t).max(0.0) - (d_pos - t).max(0.0);
                acc_ni[g] += (d_neg - t).max(0.0) - (d_ind - t).max(0.0);
            }
        }
        for g in 0..grid.len() {
            d_ip[g][b] = acc_ip[g] / per_batch as f64;
            d_ni[g][b] = acc_ni[g] / per_batch as f64;
        }
    }
    OrderingSim {
        grid: grid.to_vec(),
        ind_minus_pos: d_ip.iter().map(|b| batch_estimate(b)).collect(),
        neg_minus_ind: d_ni.iter().map(|b| batch_estimate(b)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ScenarioKind;
    use crate::queuerisk::analyze;

    fn cfg_small() -> SimConfig {
        SimConfig::default().with_n(200_000)
    }

    #[test]
    fn simulation_is_deterministic_for_a_fixed_seed() {
        let m = DependenceModel::mm1(1.0, 2.0, 1.0);
        let a = simulate_waiting(&m, &cfg_small(), &[1.0]);
        let b = simulate_waiting(&m, &cfg_small(), &[1.0]);
        assert_eq!(a.mean.value, b.mean.value);
        assert_eq!(a.tail[0].value, b.tail[0].value);
    }

    #[test]
    fn mm1_waiting_simulation_matches_theory() {
        let m = DependenceModel::mm1(1.0, 2.0, 1.0);
        let sim = simulate_waiting(&m, &cfg_small(), &[0.5, 2.0]);
        assert!(sim.mean.agrees_with(0.5, 4.0), "{:?}", sim.mean);
        assert!(sim.atom.agrees_with(0.5, 4.0), "{:?}", sim.atom);
        assert!(sim.tail[0].agrees_with(0.5 * (-0.5f64).exp(), 4.0));
        assert!(sim.tail[1].agrees_with(0.5 * (-2.0f64).exp(), 4.0));
    }

    #[test]
    fn workload_simulation_matches_analysis() {
        let m =
            DependenceModel::build_scenario(ScenarioKind::Negative, &[0.5, 0.5], 0.5, 1.0, 1.0)
                .unwrap();
        let a = analyze(&m).unwrap();
        let grid = [0.5, 1.5, 4.0];
        let sim = simulate_workload(&m, &cfg_small(), &grid);
        assert!(sim.atom.agrees_with(a.workload_atom(), 4.0), "{:?}", sim.atom);
        assert!(
            sim.mean.agrees_with(a.mean_workload(), 4.0),
            "{:?} vs {}",
            sim.mean,
            a.mean_workload()
        );
        for (k, &v) in grid.iter().enumerate() {
            assert!(
                sim.tail[k].agrees_with(a.workload_tail(v), 4.0),
                "level {v}: {:?} vs {}",
                sim.tail[k],
                a.workload_tail(v)
            );
        }
    }

    #[test]
    fn ruin_walks_match_duality() {
        let m =
            DependenceModel::build_scenario(ScenarioKind::Positive, &[0.5, 0.5], 0.5, 1.0, 1.0)
                .unwrap();
        let a = analyze(&m).unwrap();
        let grid = [0.0, 1.0, 3.0];
        let cfg = SimConfig::default().with_n(100_000);
        let ord = simulate_ordinary_ruin(&m, &cfg, &grid);
        let del = simulate_delayed_ruin(&m, &cfg, &grid);
        for (k, &u) in grid.iter().enumerate() {
            assert!(
                ord[k].agrees_with(a.ordinary_ruin(u), 4.0),
                "ordinary at {u}: {:?} vs {}",
                ord[k],
                a.ordinary_ruin(u)
            );
            assert!(
                del[k].agrees_with(a.delayed_ruin(u), 4.0),
                "delayed at {u}: {:?} vs {}",
                del[k],
                a.delayed_ruin(u)
            );
        }
    }

    #[test]
    fn simulated_ordering_has_no_violations_for_uniform_mixing() {
        let cfg = SimConfig::default().with_n(100_000);
        let grid: Vec<f64> = (-5..=10).map(|k| k as f64 * 0.4).collect();
        let sim = simulate_increment_ordering(&[0.2; 5], 0.5, 1.0, 1.0, &cfg, &grid);
        assert!(sim.violations(4.0).is_empty(), "{:?}", sim.violations(4.0));
    }
}
