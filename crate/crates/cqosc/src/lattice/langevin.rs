//! Stochastic oracle for the diffusive classical sector: an ensemble
//! integrator for `q'' + wc^2 q + a Qbar(t) = xi(t)` with white noise of
//! strength D2 (`<xi(t) xi(s)> = D2 delta(t-s)`).
//!
//! Derived before implementation and frozen here: with `E = p^2/2 +
//! wc^2 q^2/2`, Ito's rule gives `dE = p dp + (dp)^2/2 + wc^2 q dq`, and the
//! noise term contributes `(dp)^2/2 = D2 dt / 2`, so the ensemble mean
//! energy grows at `d<E>/dt = D2/2` for the free (`a = 0`) oscillator. For
//! `q(0) = p(0) = 0` the covariance is the Green-function integral
//! `<q(t)q(s)> = D2 int_0^min(t,s) sin(wc (t-u)) sin(wc (s-u)) / wc^2 du`.
//!
//! Randomness is a counter-based stream: one ChaCha8 cipher per trajectory,
//! keyed by `(seed, trajectory index)`, with the cipher's block counter
//! advancing one fixed-size draw per time step. Ensembles are therefore
//! reproducible and bit-identical under any scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{OscillatorConfig, Path, TimeGrid};
use crate::parallel;

/// Default guard on `dt * omega_c` above which the explicit step is refused.
pub const DEFAULT_STABILITY_LIMIT: f64 = 0.1;

/// Trajectories per accumulation block. Fixed so that partial sums do not
/// depend on the number of worker threads.
const BLOCK: usize = 256;

fn trajectory_rng(seed: u64, traj: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&traj.to_le_bytes());
    key[16..24].copy_from_slice(&0x71a9_5f03_c4e2_88d1u64.to_le_bytes());
    key[24..32].copy_from_slice(&0x3c6e_f372_fe94_f82bu64.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[inline]
fn unit_open(x: u64) -> f64 {
    ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// One standard normal per step via Box-Muller; exactly two words of the
/// stream per draw.
#[inline]
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = unit_open(rng.next_u64());
    let u2 = unit_open(rng.next_u64());
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn check_inputs(
    cfg: &OscillatorConfig,
    grid: TimeGrid,
    forcing: Option<&Path>,
    stability_limit: f64,
) -> Result<()> {
    cfg.validate()?;
    let dt_omega = grid.dt() * cfg.omega_c;
    if dt_omega > stability_limit {
        return Err(Error::UnstableStep {
            dt_omega,
            limit: stability_limit,
        });
    }
    if let Some(f) = forcing {
        if f.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    Ok(())
}

/// Integrate one trajectory with the explicit first-order (Euler-Maruyama)
/// step on `(q, p)`. Deterministic in `(seed, traj)`.
pub fn langevin_trajectory(
    cfg: &OscillatorConfig,
    grid: TimeGrid,
    q0: f64,
    p0: f64,
    forcing: Option<&Path>,
    seed: u64,
    traj: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_inputs(cfg, grid, forcing, DEFAULT_STABILITY_LIMIT)?;
    Ok(integrate(cfg, grid, q0, p0, forcing, seed, traj))
}

fn integrate(
    cfg: &OscillatorConfig,
    grid: TimeGrid,
    q0: f64,
    p0: f64,
    forcing: Option<&Path>,
    seed: u64,
    traj: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n();
    let dt = grid.dt();
    let omega2 = cfg.omega_c * cfg.omega_c;
    let noise_scale = (cfg.d2 * dt).sqrt();
    let mut rng = trajectory_rng(seed, traj);
    let mut q = vec![0.0; n];
    let mut p = vec![0.0; n];
    q[0] = q0;
    p[0] = p0;
    for k in 0..n - 1 {
        let z = standard_normal(&mut rng);
        let drive = forcing.map_or(0.0, |f| cfg.alpha * f.get(k));
        q[k + 1] = q[k] + dt * p[k];
        p[k + 1] = p[k] + dt * (-omega2 * q[k] - drive) + noise_scale * z;
    }
    (q, p)
}

/// Sample an ensemble of position trajectories. Uses the default stability
/// guard; see [`langevin_sample_with_limit`] for a configurable one.
pub fn langevin_sample(
    cfg: &OscillatorConfig,
    grid: TimeGrid,
    q0: f64,
    p0: f64,
    forcing: Option<&Path>,
    seed: u64,
    n_traj: usize,
) -> Result<Vec<Path>> {
    langevin_sample_with_limit(cfg, grid, q0, p0, forcing, seed, n_traj, DEFAULT_STABILITY_LIMIT)
}

#[allow(clippy::too_many_arguments)]
pub fn langevin_sample_with_limit(
    cfg: &OscillatorConfig,
    grid: TimeGrid,
    q0: f64,
    p0: f64,
    forcing: Option<&Path>,
    seed: u64,
    n_traj: usize,
    stability_limit: f64,
) -> Result<Vec<Path>> {
    if n_traj == 0 {
        return Err(Error::InvalidConfig {
            reason: "n_traj must be at least 1".into(),
        });
    }
    check_inputs(cfg, grid, forcing, stability_limit)?;
    let cfg = *cfg;
    let forcing_owned = forcing.cloned();
    let paths = parallel::par_map(n_traj, move |i| {
        let (q, _) = integrate(&cfg, grid, q0, p0, forcing_owned.as_ref(), seed, i as u64);
        Path::new(grid, q).expect("finite trajectory")
    });
    Ok(paths)
}

/// Covariance of the positions at a node pair, with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct PairStat {
    pub node_a: usize,
    pub node_b: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Streaming ensemble statistics. Trajectories are never stored; partial
/// sums are accumulated per fixed-size block and reduced in block order.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub grid: TimeGrid,
    pub n_traj: usize,
    pub mean_q: Vec<f64>,
    pub var_q: Vec<f64>,
    pub mean_energy: Vec<f64>,
    pub pairs: Vec<PairStat>,
}

impl EnsembleStats {
    /// Least-squares slope of mean energy versus time, with the standard
    /// error of the fit.
    pub fn energy_slope(&self) -> (f64, f64) {
        fit_line(&self.grid.times(), &self.mean_energy)
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, se_b)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let x_bar = x.iter().sum::<f64>() / m;
    let y_bar = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|&v| (v - x_bar) * (v - x_bar)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(&u, &v)| (u - x_bar) * (v - y_bar))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&u, &v)| {
            let r = v - intercept - slope * u;
            r * r
        })
        .sum();
    let se = (ss_res / (m - 2.0) / sxx).sqrt();
    (slope, se)
}

struct BlockAcc {
    sum_q: Vec<f64>,
    sum_q2: Vec<f64>,
    sum_e: Vec<f64>,
    sum_pair: Vec<f64>,
    sum_pair2: Vec<f64>,
}

/// Accumulate ensemble statistics over `n_traj` trajectories.
/// `pairs` lists node pairs whose position covariance is wanted.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_stats(
    cfg: &OscillatorConfig,
    grid: TimeGrid,
    q0: f64,
    p0: f64,
    forcing: Option<&Path>,
    seed: u64,
    n_traj: usize,
    pairs: &[(usize, usize)],
    stability_limit: f64,
) -> Result<EnsembleStats> {
    if n_traj == 0 {
        return Err(Error::InvalidConfig {
            reason: "n_traj must be at least 1".into(),
        });
    }
    check_inputs(cfg, grid, forcing, stability_limit)?;
    let n = grid.n();
    let omega2 = cfg.omega_c * cfg.omega_c;
    let n_blocks = n_traj.div_ceil(BLOCK);
    let cfg = *cfg;
    let forcing_owned = forcing.cloned();
    let pair_list: Vec<(usize, usize)> = pairs.to_vec();

    let blocks = parallel::par_map(n_blocks, move |b| {
        let lo = b * BLOCK;
        let hi = ((b + 1) * BLOCK).min(n_traj);
        let mut acc = BlockAcc {
            sum_q: vec![0.0; n],
            sum_q2: vec![0.0; n],
            sum_e: vec![0.0; n],
            sum_pair: vec![0.0; pair_list.len()],
            sum_pair2: vec![0.0; pair_list.len()],
        };
        for traj in lo..hi {
            let (q, p) = integrate(&cfg, grid, q0, p0, forcing_owned.as_ref(), seed, traj as u64);
            for k in 0..n {
                acc.sum_q[k] += q[k];
                acc.sum_q2[k] += q[k] * q[k];
                acc.sum_e[k] += 0.5 * p[k] * p[k] + 0.5 * omega2 * q[k] * q[k];
            }
            for (idx, &(a, b)) in pair_list.iter().enumerate() {
                let prod = q[a] * q[b];
                acc.sum_pair[idx] += prod;
                acc.sum_pair2[idx] += prod * prod;
            }
        }
        acc
    });

    let mut sum_q = vec![0.0; n];
    let mut sum_q2 = vec![0.0; n];
    let mut sum_e = vec![0.0; n];
    let mut sum_pair = vec![0.0; pairs.len()];
    let mut sum_pair2 = vec![0.0; pairs.len()];
    for acc in blocks {
        for k in 0..n {
            sum_q[k] += acc.sum_q[k];
            sum_q2[k] += acc.sum_q2[k];
            sum_e[k] += acc.sum_e[k];
        }
        for idx in 0..pairs.len() {
            sum_pair[idx] += acc.sum_pair[idx];
            sum_pair2[idx] += acc.sum_pair2[idx];
        }
    }

    let m = n_traj as f64;
    let mean_q: Vec<f64> = sum_q.iter().map(|s| s / m).collect();
    let var_q: Vec<f64> = sum_q2
        .iter()
        .zip(&mean_q)
        .map(|(s2, mu)| ((s2 - m * mu * mu) / (m - 1.0).max(1.0)).max(0.0))
        .collect();
    let mean_energy: Vec<f64> = sum_e.iter().map(|s| s / m).collect();
    let pair_stats: Vec<PairStat> = pairs
        .iter()
        .enumerate()
        .map(|(idx, &(a, b))| {
            let mean = sum_pair[idx] / m;
            let var = ((sum_pair2[idx] - m * mean * mean) / (m - 1.0).max(1.0)).max(0.0);
            PairStat {
                node_a: a,
                node_b: b,
                mean,
                std_error: (var / m).sqrt(),
            }
        })
        .collect();

    Ok(EnsembleStats {
        grid,
        n_traj,
        mean_q,
        var_q,
        mean_energy,
        pairs: pair_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActionConvention;

    fn cfg(alpha: f64, d2: f64) -> OscillatorConfig {
        OscillatorConfig::new(1.0, 2.0, alpha, d2, ActionConvention::Saturated).unwrap()
    }

    #[test]
    fn deterministic_sho_without_noise() {
        // d2 -> 0 is disallowed by config validation, so take it tiny and
        // zero out the noise by comparing against the same draw scale; a
        // d2 = 1e-30 run is numerically noise-free at this tolerance.
        let c = cfg(0.0, 1e-30);
        let grid = TimeGrid::new(0.0, 2.0, 2001).unwrap();
        let (q, _) = langevin_trajectory(&c, grid, 1.0, 0.0, None, 7, 0).unwrap();
        let mut max_err = 0.0_f64;
        for k in 0..grid.n() {
            max_err = max_err.max((q[k] - (grid.node(k)).cos()).abs());
        }
        // First-order integrator: O(dt) global error.
        assert!(max_err < 5e-3, "max error {max_err}");
    }

    #[test]
    fn unstable_step_guard() {
        let c = cfg(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 10.0, 10).unwrap(); // dt > 1
        assert!(matches!(
            langevin_trajectory(&c, grid, 0.0, 0.0, None, 1, 0),
            Err(Error::UnstableStep { .. })
        ));
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let c = cfg(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 1.0, 101).unwrap();
        let a = langevin_sample(&c, grid, 0.0, 0.0, None, 42, 8).unwrap();
        let b = langevin_sample(&c, grid, 0.0, 0.0, None, 42, 8).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.values(), pb.values());
        }
        let other = langevin_sample(&c, grid, 0.0, 0.0, None, 43, 8).unwrap();
        assert_ne!(a[0].values(), other[0].values());
    }

    #[test]
    fn trajectories_are_independent_of_batch_layout() {
        let c = cfg(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 1.0, 51).unwrap();
        let all = langevin_sample(&c, grid, 0.0, 0.0, None, 9, 5).unwrap();
        let (q3, _) = langevin_trajectory(&c, grid, 0.0, 0.0, None, 9, 3).unwrap();
        assert_eq!(all[3].values(), q3.as_slice());
    }

    #[test]
    fn mean_energy_growth_rate() {
        let c = cfg(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 2.0, 501).unwrap();
        let stats = ensemble_stats(
            &c,
            grid,
            0.0,
            0.0,
            None,
            11,
            20_000,
            &[],
            DEFAULT_STABILITY_LIMIT,
        )
        .unwrap();
        let (slope, _) = stats.energy_slope();
        let expect = c.d2 / 2.0;
        assert!(
            (slope - expect).abs() < 0.05 * expect,
            "slope {slope}, expect {expect}"
        );
    }

    #[test]
    fn position_covariance_matches_green_function() {
        let c = cfg(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 2.0, 501).unwrap();
        let (ka, kb) = (250, 500);
        let stats = ensemble_stats(
            &c,
            grid,
            0.0,
            0.0,
            None,
            13,
            20_000,
            &[(ka, kb), (kb, kb)],
            DEFAULT_STABILITY_LIMIT,
        )
        .unwrap();
        // Oracle: D2 int_0^min(t,s) sin(w(t-u)) sin(w(s-u))/w^2 du by fine
        // Simpson quadrature.
        let oracle = |t: f64, s: f64| -> f64 {
            let upper = t.min(s);
            let m = 20_000usize;
            let h = upper / m as f64;
            let f = |u: f64| (c.omega_c * (t - u)).sin() * (c.omega_c * (s - u)).sin();
            let mut acc = f(0.0) + f(upper);
            for j in 1..m {
                acc += f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            c.d2 * acc * h / 3.0 / (c.omega_c * c.omega_c)
        };
        for stat in &stats.pairs {
            let t = grid.node(stat.node_a);
            let s = grid.node(stat.node_b);
            let expect = oracle(t, s);
            assert!(
                (stat.mean - expect).abs() < 3.0 * stat.std_error + 0.01 * expect.abs(),
                "cov({t},{s}) = {} vs {expect} (se {})",
                stat.mean,
                stat.std_error
            );
        }
    }

    #[test]
    fn seed_change_stays_within_statistics() {
        // Welch statistic on the final mean energy across two seeds.
        let c = cfg(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 2.0, 201).unwrap();
        let run = |seed: u64| {
            let n_traj = 4000;
            let stats = ensemble_stats(
                &c,
                grid,
                0.0,
                0.0,
                None,
                seed,
                n_traj,
                &[],
                DEFAULT_STABILITY_LIMIT,
            )
            .unwrap();
            // Rebuild a rough SE for the final-time energy from the spread of
            // per-node energies near the end; cheap but adequate for a 3-sigma
            // band with fixed seeds.
            let e_f = *stats.mean_energy.last().unwrap();
            (e_f, stats.n_traj as f64)
        };
        let (e1, n1) = run(101);
        let (e2, n2) = run(202);
        // Var(E) for a near-Gaussian (q,p): roughly E^2; conservative bound.
        let se = ((e1 * e1) / n1 + (e2 * e2) / n2).sqrt();
        assert!(
            (e1 - e2).abs() < 3.0 * se,
            "seed sensitivity: {e1} vs {e2}, se {se}"
        );
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn stats_are_thread_count_invariant() {
        let c = cfg(0.0, 1.0);
        let grid = TimeGrid::new(0.0, 1.0, 101).unwrap();
        let run = || {
            ensemble_stats(
                &c,
                grid,
                0.1,
                0.0,
                None,
                5,
                1000,
                &[(10, 90)],
                DEFAULT_STABILITY_LIMIT,
            )
            .unwrap()
        };
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let s1 = pool1.install(run);
        let s4 = pool4.install(run);
        assert_eq!(s1.mean_q, s4.mean_q);
        assert_eq!(s1.mean_energy, s4.mean_energy);
        assert_eq!(s1.pairs[0].mean, s4.pairs[0].mean);
    }
}
