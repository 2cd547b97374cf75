//! Two independent estimators of the critical level `c` of
//! `H(x, ∂_x u) = c`, the smallest level at which the stationary equation
//! admits a global (weak) solution.
//!
//! * **long-time**: evolve zero data and read the asymptotic drift rate of
//!   the mean, `c = −lim u(·, t)/t`, from two late snapshots;
//! * **inf-max**: minimize `max_x H_R(x, Du(x))` over grid functions with
//!   centered-difference gradients, by descent on a softmax smoothing with
//!   temperature continuation and an exact-max final stage.
//!
//! The two routes share no numerical machinery, so their agreement is a
//! meaningful cross-check; disagreement beyond tolerance should fail a run
//! loudly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Coord, TorusGrid, ValueFunction, MAX_DIM};
use crate::hamiltonian::{HamiltonianModel, ModifiedHamiltonian};
use crate::lax_oleinik::StepKernel;
use crate::legendre::LagrangianEvaluator;

/// Which estimator produced a critical-value estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CMethod {
    Longtime,
    InfMax,
}

/// Residual and iteration metadata attached to an estimate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CriticalDiagnostics {
    /// `max_x u − min_x u` of the final long-time snapshot.
    pub oscillation: Option<f64>,
    /// The evolution hit the velocity window boundary; the long-time
    /// estimate is unreliable.
    pub boundary_flagged: bool,
    /// Accepted descent iterations (inf-max).
    pub iterations: usize,
    /// Relative improvement fell below 1e-8 over the stall window.
    pub stalled: bool,
    /// Exact objective after each accepted descent step (nonincreasing).
    pub accepted_objective: Vec<f64>,
}

/// A critical-value estimate with its method tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalValueEstimate {
    pub c_est: f64,
    pub method: CMethod,
    pub diagnostics: CriticalDiagnostics,
}

/// Default velocity window for evolutions: 1.5 × the sampled slope bound
/// over the sublevel set `{H ≤ c_ref + 2}`.
pub fn default_velocity_window(model: &HamiltonianModel, c_ref: f64) -> f64 {
    1.5 * model.velocity_bound(c_ref + 2.0, 64)
}

/// Certificate upper bound `c ≤ max_x H(x, 0)` evaluated on grid nodes
/// (take `u ≡ 0` in the variational formula).
pub fn certificate_upper_bound(model: &HamiltonianModel, grid: &TorusGrid) -> f64 {
    (0..grid.num_nodes())
        .map(|i| model.value(&grid.node_point(i), &[0.0; MAX_DIM]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Long-time drift estimator: evolve `φ ≡ 0` to `t_final` and difference
/// the mean of the solution between `t_final/2` and `t_final`.
pub fn estimate_c_longtime(
    le: &LagrangianEvaluator,
    grid: &TorusGrid,
    tau: f64,
    t_final: f64,
    v_max: Option<f64>,
) -> Result<CriticalValueEstimate> {
    let v_max = v_max.unwrap_or_else(|| {
        let c_up = certificate_upper_bound(&le.hr.base, grid);
        default_velocity_window(&le.hr.base, c_up)
    });
    let kernel = StepKernel::new(le, *grid, tau, v_max)?;
    let steps = (t_final / tau).round() as usize;
    let half = steps / 2;
    let mut current = ValueFunction::constant(*grid, 0.0, 0.0)?;
    let mut half_mean = 0.0;
    let mut half_time = 0.0;
    let mut boundary_flagged = false;
    for k in 1..=steps {
        let (next, _, hit) = kernel.apply(&current)?;
        boundary_flagged |= hit;
        current = next;
        if k == half {
            half_mean = current.mean();
            half_time = current.time;
        }
    }
    let c_est = -(current.mean() - half_mean) / (current.time - half_time);
    Ok(CriticalValueEstimate {
        c_est,
        method: CMethod::Longtime,
        diagnostics: CriticalDiagnostics {
            oscillation: Some(current.oscillation()),
            boundary_flagged,
            ..CriticalDiagnostics::default()
        },
    })
}

/// Options for the inf-max descent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfMaxOptions {
    /// Smoothing continuation stages; the softmax temperature halves per
    /// stage and the final stage works on the exact max.
    pub stages: usize,
    pub iters_per_stage: usize,
    /// Initial step size, rescaled adaptively.
    pub step0: f64,
    /// Stall rule: relative best-value improvement below `stall_rel` over
    /// `stall_window` consecutive iterations stops the descent.
    pub stall_window: usize,
    pub stall_rel: f64,
    /// Optional starting grid function (defaults to zero).
    pub init: Option<Vec<f64>>,
}

impl Default for InfMaxOptions {
    fn default() -> Self {
        InfMaxOptions {
            stages: 8,
            iters_per_stage: 150,
            step0: 0.05,
            stall_window: 100,
            stall_rel: 1e-8,
            init: None,
        }
    }
}

struct InfMaxState<'a> {
    hr: &'a ModifiedHamiltonian,
    grid: &'a TorusGrid,
    xs: Vec<Coord>,
}

impl<'a> InfMaxState<'a> {
    /// Centered-difference momentum field of `u`.
    fn momenta(&self, u: &[f64]) -> Vec<Coord> {
        let grid = self.grid;
        let h = grid.spacing();
        let dim = grid.dim();
        (0..grid.num_nodes())
            .into_par_iter()
            .map(|i| {
                let mut p = [0.0; MAX_DIM];
                for d in 0..dim {
                    let mut e = [0i64; MAX_DIM];
                    e[d] = 1;
                    let up = u[grid.shift(i, e)];
                    e[d] = -1;
                    let dn = u[grid.shift(i, e)];
                    p[d] = (up - dn) / (2.0 * h);
                }
                p
            })
            .collect()
    }

    fn energies(&self, momenta: &[Coord]) -> Vec<f64> {
        momenta
            .par_iter()
            .zip(&self.xs)
            .map(|(p, x)| self.hr.value(x, p))
            .collect()
    }

    fn exact_max(&self, u: &[f64]) -> f64 {
        self.energies(&self.momenta(u))
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Gradient of the softmax-smoothed max with inverse temperature `beta`;
    /// `beta = None` takes the subgradient at the argmax node.
    fn smoothed_gradient(&self, u: &[f64], beta: Option<f64>) -> Vec<f64> {
        let grid = self.grid;
        let h = grid.spacing();
        let dim = grid.dim();
        let momenta = self.momenta(u);
        let energies = self.energies(&momenta);
        let m = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = match beta {
            Some(b) => {
                let raw: Vec<f64> = energies.iter().map(|e| ((e - m) * b).exp()).collect();
                let sum: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / sum).collect()
            }
            None => {
                let argmax = energies
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap();
                let mut w = vec![0.0; energies.len()];
                w[argmax] = 1.0;
                w
            }
        };
        let mut grad = vec![0.0; u.len()];
        for i in 0..u.len() {
            if weights[i] == 0.0 {
                continue;
            }
            let gh = self.hr.grad_p(&self.xs[i], &momenta[i]);
            for d in 0..dim {
                let mut e = [0i64; MAX_DIM];
                e[d] = 1;
                grad[grid.shift(i, e)] += weights[i] * gh[d] / (2.0 * h);
                e[d] = -1;
                grad[grid.shift(i, e)] -= weights[i] * gh[d] / (2.0 * h);
            }
        }
        grad
    }
}

/// Inf-max estimator: minimize `max_x H_R(x, Du)` over grid functions.
///
/// Steps follow the smoothed-max gradient but are accepted only when the
/// exact max does not increase, so the reported objective sequence is
/// nonincreasing by construction of the accept rule, not by bookkeeping.
pub fn estimate_c_infmax(
    hr: &ModifiedHamiltonian,
    grid: &TorusGrid,
    opts: &InfMaxOptions,
) -> CriticalValueEstimate {
    let state = InfMaxState {
        hr,
        grid,
        xs: (0..grid.num_nodes()).map(|i| grid.node_point(i)).collect(),
    };
    let mut u = opts
        .init
        .clone()
        .unwrap_or_else(|| vec![0.0; grid.num_nodes()]);
    let mut cur_max = state.exact_max(&u);
    let mut accepted = vec![cur_max];
    let mut stalled = false;
    let mut since_improvement = 0usize;
    let mut best = cur_max;

    // initial inverse temperature from the energy spread at the start
    let spread = {
        let momenta = state.momenta(&u);
        let en = state.energies(&momenta);
        let lo = en.iter().copied().fold(f64::INFINITY, f64::min);
        (cur_max - lo).max(1e-3)
    };
    let beta0 = (grid.num_nodes() as f64).ln().max(1.0) / spread;

    let mut step = opts.step0;
    'stages: for stage in 0..=opts.stages {
        let beta = if stage < opts.stages {
            Some(beta0 * (1 << stage) as f64)
        } else {
            None // exact-max subgradient polish
        };
        let mut rejections = 0usize;
        for _ in 0..opts.iters_per_stage {
            let grad = state.smoothed_gradient(&u, beta);
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm == 0.0 {
                break;
            }
            let mut t = step / gnorm.max(1e-12);
            let mut taken = false;
            for _ in 0..30 {
                let cand: Vec<f64> =
                    u.iter().zip(&grad).map(|(a, g)| a - t * g).collect();
                let cand_max = state.exact_max(&cand);
                if cand_max < cur_max {
                    u = cand;
                    cur_max = cand_max;
                    accepted.push(cur_max);
                    step = (step * 1.5).min(1.0);
                    taken = true;
                    break;
                }
                t *= 0.5;
            }
            if taken {
                if best - cur_max > opts.stall_rel * (1.0 + best.abs()) {
                    best = cur_max;
                    since_improvement = 0;
                } else {
                    since_improvement += 1;
                }
            } else {
                step = (step * 0.5).max(1e-12);
                rejections += 1;
                since_improvement += 1;
                if rejections >= 3 {
                    break;
                }
            }
            if since_improvement >= opts.stall_window {
                stalled = true;
                break 'stages;
            }
        }
    }

    CriticalValueEstimate {
        c_est: cur_max,
        method: CMethod::InfMax,
        diagnostics: CriticalDiagnostics {
            iterations: accepted.len() - 1,
            stalled,
            accepted_objective: accepted,
            ..CriticalDiagnostics::default()
        },
    }
}

/// `c_R` versus `R` table with a stability verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RStabilityReport {
    /// `(R, c_R)` pairs, ascending in `R`.
    pub entries: Vec<(f64, f64)>,
    /// Smallest scheduled `R` from which consecutive gaps stay below
    /// tolerance.
    pub r0_est: Option<f64>,
    /// Max pairwise gap among entries with `R ≥ r0_est`.
    pub max_gap_stable: f64,
    pub tol: f64,
    pub pass: bool,
    pub note: Option<String>,
}

/// Estimate `c_R` (inf-max) across an ascending cutoff schedule and flag
/// whether the values are eventually `R`-independent within `tol`.
pub fn check_cr_stability(
    model: HamiltonianModel,
    r_list: &[f64],
    grid: &TorusGrid,
    tol: f64,
) -> Result<RStabilityReport> {
    if r_list.is_empty() {
        return Err(crate::error::CoreError::invalid(
            "empty R list".to_string(),
        ));
    }
    if r_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::error::CoreError::invalid(
            "R list must be strictly ascending".to_string(),
        ));
    }
    let mut entries = Vec::with_capacity(r_list.len());
    for &r in r_list {
        let hr = crate::hamiltonian::build_modified(model, r)?;
        let est = estimate_c_infmax(&hr, grid, &InfMaxOptions::default());
        entries.push((r, est.c_est));
    }
    if entries.len() == 1 {
        return Ok(RStabilityReport {
            entries,
            r0_est: Some(r_list[0]),
            max_gap_stable: 0.0,
            tol,
            pass: true,
            note: Some("single-entry schedule: stability vacuously holds".to_string()),
        });
    }
    let r0_est = entries
        .windows(2)
        .find(|w| (w[0].1 - w[1].1).abs() <= tol)
        .map(|w| w[0].0);
    let (max_gap_stable, pass) = match r0_est {
        Some(r0) => {
            let stable: Vec<f64> = entries
                .iter()
                .filter(|(r, _)| *r >= r0)
                .map(|(_, c)| *c)
                .collect();
            let mut gap: f64 = 0.0;
            for i in 0..stable.len() {
                for j in i + 1..stable.len() {
                    gap = gap.max((stable[i] - stable[j]).abs());
                }
            }
            (gap, gap <= tol)
        }
        None => (f64::INFINITY, false),
    };
    Ok(RStabilityReport {
        entries,
        r0_est,
        max_gap_stable,
        tol,
        pass,
        note: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_modified, PotentialKind, Preset};

    fn model(pot: PotentialKind) -> HamiltonianModel {
        HamiltonianModel::new(Preset::Mechanical, pot, 1).unwrap()
    }

    #[test]
    fn free_hamiltonian_has_zero_critical_value_both_methods() {
        let m = model(PotentialKind::Zero);
        let grid = TorusGrid::new(1, 64).unwrap();
        let hr = build_modified(m, 4.0).unwrap();
        let le = LagrangianEvaluator::new(hr);
        let lt = estimate_c_longtime(&le, &grid, 0.05, 10.0, None).unwrap();
        assert!(lt.c_est.abs() < 1e-3, "longtime {}", lt.c_est);
        let im = estimate_c_infmax(&hr, &grid, &InfMaxOptions::default());
        assert!(im.c_est.abs() < 1e-6, "infmax {}", im.c_est);
    }

    #[test]
    fn pendulum_infmax_bracketed_by_sublevel_emptiness_oracle() {
        // oracle bounds: for c < max_x V(x) the p-sublevel {H(x*, p) ≤ c}
        // at the potential argmax is empty, so c ≥ max_i V(x_i); the zero
        // certificate gives c ≤ max_i H(x_i, 0) = max_i V(x_i).
        let m = model(PotentialKind::Cosine);
        let grid = TorusGrid::new(1, 256).unwrap();
        let lower = (0..grid.num_nodes())
            .map(|i| m.potential.value(&grid.node_point(i)))
            .fold(f64::NEG_INFINITY, f64::max);
        let upper = certificate_upper_bound(&m, &grid);
        assert_eq!(lower, upper);
        let hr = build_modified(m, 4.0).unwrap();
        let est = estimate_c_infmax(&hr, &grid, &InfMaxOptions::default());
        assert!(est.c_est >= lower - 1e-12);
        assert!(est.c_est <= upper + 1e-9);
        assert!((est.c_est - 1.0).abs() < 1e-2);
    }

    #[test]
    fn pendulum_longtime_agrees_with_infmax() {
        let m = model(PotentialKind::Cosine);
        let grid = TorusGrid::new(1, 128).unwrap();
        let hr = build_modified(m, 4.0).unwrap();
        let le = LagrangianEvaluator::new(hr);
        let lt = estimate_c_longtime(&le, &grid, 0.01, 20.0, None).unwrap();
        assert!((lt.c_est - 1.0).abs() < 5e-2, "longtime {}", lt.c_est);
        assert!(!lt.diagnostics.boundary_flagged);
        let im = estimate_c_infmax(&hr, &grid, &InfMaxOptions::default());
        assert!((lt.c_est - im.c_est).abs() < 5e-2);
    }

    #[test]
    fn relativistic_pendulum_longtime_near_one() {
        let m =
            HamiltonianModel::new(Preset::CoerciveNonsuperlinear, PotentialKind::Cosine, 1)
                .unwrap();
        let grid = TorusGrid::new(1, 128).unwrap();
        let hr = build_modified(m, 4.0).unwrap();
        let le = LagrangianEvaluator::new(hr);
        let lt = estimate_c_longtime(&le, &grid, 0.01, 20.0, None).unwrap();
        assert!((lt.c_est - 1.0).abs() < 2e-2, "longtime {}", lt.c_est);
    }

    #[test]
    fn descent_recovers_flatness_from_perturbed_start() {
        use rand::{Rng, SeedableRng};
        let m = model(PotentialKind::Cosine);
        let grid = TorusGrid::new(1, 64).unwrap();
        let hr = build_modified(m, 4.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let init: Vec<f64> = (0..64).map(|_| rng.gen_range(-0.05..0.05)).collect();
        let est = estimate_c_infmax(
            &hr,
            &grid,
            &InfMaxOptions {
                init: Some(init),
                ..InfMaxOptions::default()
            },
        );
        // accepted objective sequence is nonincreasing and the descent
        // recovers a value close to the flat optimum
        let obj = &est.diagnostics.accepted_objective;
        assert!(obj.len() > 1, "descent made no progress");
        for w in obj.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!((est.c_est - 1.0).abs() < 1e-2, "{}", est.c_est);
    }

    #[test]
    fn certificate_bounds_every_estimate() {
        for pot in [PotentialKind::Zero, PotentialKind::Cosine] {
            let m = model(pot);
            let grid = TorusGrid::new(1, 64).unwrap();
            let hr = build_modified(m, 3.0).unwrap();
            let est = estimate_c_infmax(&hr, &grid, &InfMaxOptions::default());
            assert!(est.c_est <= certificate_upper_bound(&m, &grid) + 1e-9);
        }
    }

    #[test]
    fn cr_stability_pendulum_schedule() {
        let grid = TorusGrid::new(1, 128).unwrap();
        let report =
            check_cr_stability(model(PotentialKind::Cosine), &[2.0, 4.0, 8.0, 16.0], &grid, 1e-2)
                .unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_gap_stable <= 1e-2);
        let report =
            check_cr_stability(model(PotentialKind::Zero), &[2.0, 4.0], &grid, 1e-6).unwrap();
        for (_, c) in &report.entries {
            assert!(c.abs() < 1e-6);
        }
    }

    #[test]
    fn cr_stability_single_entry_is_vacuous_pass() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let report =
            check_cr_stability(model(PotentialKind::Cosine), &[3.0], &grid, 1e-2).unwrap();
        assert!(report.pass);
        assert!(report.note.is_some());
    }
}
