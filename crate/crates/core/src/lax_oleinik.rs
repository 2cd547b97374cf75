//! Discrete Lax-Oleinik evolution on the torus grid.
//!
//! One step of the variational solution operator is the semi-Lagrangian
//! Bellman update
//!
//! ```text
//! (T_τ φ)(x) = min_{d(x,y) ≤ v_max·τ} [ φ(y) + τ · L_R(x, (x − y)/τ) ]
//! ```
//!
//! with the Lagrangian evaluated at the arrival node and the minimal
//! periodic displacement. The window offsets and per-node step costs are
//! precomputed once per evolution; each step is then a parallel map over
//! destination nodes with a sequential window reduction, so results are
//! identical for any worker count. Ties break to the smallest flat index of
//! the predecessor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{norm, Coord, TorusGrid, ValueFunction, MAX_DIM};
use crate::hamiltonian::HamiltonianModel;
use crate::legendre::LagrangianEvaluator;

/// One window offset of the semi-Lagrangian stencil.
#[derive(Debug, Clone, Copy)]
struct WindowOffset {
    /// Integer displacement `k` with `x − y = k·h`.
    shift: [i64; MAX_DIM],
    /// Segment velocity `(x − y)/τ = k·h/τ`.
    velocity: Coord,
    /// Offset lies within one spacing of the window radius.
    boundary: bool,
}

/// Precomputed one-step Bellman operator for a fixed grid, `τ` and window.
pub struct StepKernel {
    grid: TorusGrid,
    tau: f64,
    v_max: f64,
    offsets: Vec<WindowOffset>,
    /// `τ · L_R(x, v_o)`, laid out `[node * offsets.len() + o]`.
    cost: Vec<f64>,
    /// Offset index of `shift + e_d` per offset and axis (`usize::MAX` when
    /// the neighbor leaves the window); drives the parabolic refinement.
    neighbor_up: Vec<[usize; MAX_DIM]>,
    neighbor_dn: Vec<[usize; MAX_DIM]>,
    refine: bool,
}

impl StepKernel {
    pub fn new(le: &LagrangianEvaluator, grid: TorusGrid, tau: f64, v_max: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(CoreError::invalid(format!("tau must be positive, got {tau}")));
        }
        if le.dim() != grid.dim() {
            return Err(CoreError::invalid(
                "grid and Hamiltonian dimension mismatch".to_string(),
            ));
        }
        let offsets = window_offsets(&grid, tau, v_max)?;
        let n_off = offsets.len();
        let nodes = grid.num_nodes();
        let mut cost = vec![0.0; nodes * n_off];
        let errors: Vec<CoreError> = cost
            .par_chunks_mut(n_off)
            .enumerate()
            .filter_map(|(node, row)| {
                let x = grid.node_point(node);
                for (o, off) in offsets.iter().enumerate() {
                    match le.legendre(&x, &off.velocity) {
                        Ok((l, _)) => row[o] = tau * l,
                        Err(e) => return Some(e),
                    }
                }
                None
            })
            .collect();
        if let Some(e) = errors.into_iter().next() {
            return Err(e);
        }
        let index_of = |shift: [i64; MAX_DIM]| -> usize {
            offsets
                .iter()
                .position(|o| o.shift == shift)
                .unwrap_or(usize::MAX)
        };
        let dim = grid.dim();
        let mut neighbor_up = Vec::with_capacity(n_off);
        let mut neighbor_dn = Vec::with_capacity(n_off);
        for off in &offsets {
            let mut up = [usize::MAX; MAX_DIM];
            let mut dn = [usize::MAX; MAX_DIM];
            for d in 0..dim {
                let mut s = off.shift;
                s[d] += 1;
                up[d] = index_of(s);
                s[d] -= 2;
                dn[d] = index_of(s);
            }
            neighbor_up.push(up);
            neighbor_dn.push(dn);
        }
        Ok(StepKernel {
            grid,
            tau,
            v_max,
            offsets,
            cost,
            neighbor_up,
            neighbor_dn,
            refine: false,
        })
    }

    /// Enable 3-point parabolic refinement of the argmin value. The value
    /// at a node becomes the vertex of the parabola through the discrete
    /// minimum and its window neighbors, per axis; backpointers keep the
    /// discrete argmin. Off by default: refinement trades the exact
    /// semigroup laws for a smoother stationary profile.
    pub fn with_parabolic_refinement(mut self, on: bool) -> Self {
        self.refine = on;
        self
    }

    #[inline]
    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// Step cost row `τ·L_R(x, ·)` over the window offsets of one node.
    pub fn cost_row(&self, node: usize) -> &[f64] {
        let n = self.offsets.len();
        &self.cost[node * n..(node + 1) * n]
    }

    /// Apply one Bellman step. Returns the updated values, the argmin
    /// predecessor per node, and whether any argmin sat on the window
    /// boundary.
    pub fn apply(&self, phi: &ValueFunction) -> Result<(ValueFunction, Vec<u32>, bool)> {
        if phi.grid != self.grid {
            return Err(CoreError::invalid("grid mismatch in one_step".to_string()));
        }
        let n_off = self.offsets.len();
        let n1 = self.grid.n_per_dim() as i64;
        let dim = self.grid.dim();
        let results: Vec<(f64, u32, bool)> = (0..self.grid.num_nodes())
            .into_par_iter()
            .map(|x_flat| {
                let row = &self.cost[x_flat * n_off..(x_flat + 1) * n_off];
                let xi = self.grid.multi_index(x_flat);
                // y = x − k, wrapped per axis
                let total = |o: usize| -> (f64, usize) {
                    let off = &self.offsets[o];
                    let mut y0 = xi[0] as i64 - off.shift[0];
                    if y0 < 0 {
                        y0 += n1;
                    } else if y0 >= n1 {
                        y0 -= n1;
                    }
                    let y_flat = if dim == 1 {
                        y0 as usize
                    } else {
                        let mut y1 = xi[1] as i64 - off.shift[1];
                        if y1 < 0 {
                            y1 += n1;
                        } else if y1 >= n1 {
                            y1 -= n1;
                        }
                        y0 as usize + self.grid.n_per_dim() * y1 as usize
                    };
                    (phi.values[y_flat] + row[o], y_flat)
                };
                let mut best_val = f64::INFINITY;
                let mut best_y = u32::MAX;
                let mut best_o = 0usize;
                let mut best_boundary = false;
                for o in 0..n_off {
                    let (val, y_flat) = total(o);
                    let y32 = y_flat as u32;
                    if val < best_val || (val == best_val && y32 < best_y) {
                        best_val = val;
                        best_y = y32;
                        best_o = o;
                        best_boundary = self.offsets[o].boundary;
                    }
                }
                let mut out_val = best_val;
                if self.refine {
                    for d in 0..dim {
                        let up = self.neighbor_up[best_o][d];
                        let dn = self.neighbor_dn[best_o][d];
                        if up == usize::MAX || dn == usize::MAX {
                            continue;
                        }
                        let a = total(dn).0;
                        let c = total(up).0;
                        let denom = a - 2.0 * best_val + c;
                        if denom > 0.0 && a >= best_val && c >= best_val {
                            let vertex = best_val - (a - c) * (a - c) / (8.0 * denom);
                            out_val = out_val.min(vertex);
                        }
                    }
                }
                (out_val, best_y, best_boundary)
            })
            .collect();
        let mut values = Vec::with_capacity(results.len());
        let mut backptr = Vec::with_capacity(results.len());
        let mut hit = false;
        for (v, y, b) in results {
            values.push(v);
            backptr.push(y);
            hit |= b;
        }
        let out = ValueFunction::new(self.grid, values, phi.time + self.tau)?;
        Ok((out, backptr, hit))
    }
}

/// Enumerate integer offsets with `|k·h| ≤ v_max·τ`, one representative per
/// antipodal pair on even grids (the positive one).
fn window_offsets(grid: &TorusGrid, tau: f64, v_max: f64) -> Result<Vec<WindowOffset>> {
    let h = grid.spacing();
    let radius = v_max * tau;
    let k_max = (radius / h).floor() as i64;
    if k_max < 1 {
        return Err(CoreError::invalid(format!(
            "empty window: v_max·tau = {radius:.3e} < h = {h:.3e}"
        )));
    }
    let n = grid.n_per_dim() as i64;
    let half = n / 2;
    let clamped = k_max >= half;
    let k_lim = k_max.min(half);
    let lo = |_d: usize| -> i64 {
        // on even grids the antipodal offset −N/2 duplicates +N/2
        if clamped && n % 2 == 0 {
            -(k_lim - 1)
        } else {
            -k_lim
        }
    };
    // with |k| ≤ N/2 the shift is already the minimal periodic displacement
    let full_cover = radius >= 0.5 * (grid.dim() as f64).sqrt();
    let mut offsets = Vec::new();
    let dim = grid.dim();
    match dim {
        1 => {
            for k in lo(0)..=k_lim {
                offsets.push(make_offset([k, 0], h, tau, radius, full_cover, dim));
            }
        }
        _ => {
            for k1 in lo(1)..=k_lim {
                for k0 in lo(0)..=k_lim {
                    let dist = norm(&[k0 as f64 * h, k1 as f64 * h], 2);
                    if dist <= radius {
                        offsets.push(make_offset([k0, k1], h, tau, radius, full_cover, dim));
                    }
                }
            }
        }
    }
    Ok(offsets)
}

fn make_offset(
    shift: [i64; MAX_DIM],
    h: f64,
    tau: f64,
    radius: f64,
    full_cover: bool,
    dim: usize,
) -> WindowOffset {
    let velocity = [
        shift[0] as f64 * h / tau,
        shift[1] as f64 * h / tau,
    ];
    let dist = norm(&[shift[0] as f64 * h, shift[1] as f64 * h], dim);
    WindowOffset {
        shift,
        velocity,
        // a window covering the whole torus cannot be enlarged, so nothing
        // counts as its boundary
        boundary: !full_cover && dist > radius - h,
    }
}

/// One discrete Lax-Oleinik step (fresh kernel per call; use [`evolve`] or
/// [`StepKernel`] directly for repeated stepping).
pub fn one_step(
    phi: &ValueFunction,
    le: &LagrangianEvaluator,
    tau: f64,
    v_max: f64,
) -> Result<(ValueFunction, Vec<u32>)> {
    let kernel = StepKernel::new(le, phi.grid, tau, v_max)?;
    let (out, backptr, _) = kernel.apply(phi)?;
    Ok((out, backptr))
}

/// Full evolution record: every snapshot, the backpointers of every step,
/// and the per-step window-boundary flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub snapshots: Vec<ValueFunction>,
    pub backpointers: Vec<Vec<u32>>,
    pub boundary_hits: Vec<bool>,
    pub tau: f64,
    pub v_max: f64,
    pub hr: crate::hamiltonian::ModifiedHamiltonian,
}

impl EvolutionTrace {
    pub fn steps(&self) -> usize {
        self.backpointers.len()
    }

    pub fn grid(&self) -> TorusGrid {
        self.snapshots[0].grid
    }

    pub fn final_snapshot(&self) -> &ValueFunction {
        self.snapshots.last().expect("trace holds at least one snapshot")
    }

    /// Snapshot index whose time matches `t` (within half a step).
    pub fn snapshot_index_at(&self, t: f64) -> Result<usize> {
        let k = (t / self.tau).round() as i64;
        if k < 0 || k as usize >= self.snapshots.len() {
            return Err(CoreError::invalid(format!(
                "no snapshot at time {t}; trace covers [0, {}]",
                self.tau * (self.snapshots.len() - 1) as f64
            )));
        }
        let k = k as usize;
        if ((k as f64) * self.tau - t).abs() > 0.5 * self.tau {
            return Err(CoreError::invalid(format!("time {t} is not a snapshot time")));
        }
        Ok(k)
    }

    /// True if any argmin hit the window boundary at step `from_step` or
    /// later (steps are 1-based in time: step k produces snapshot k).
    pub fn boundary_hit_after(&self, from_step: usize) -> bool {
        self.boundary_hits
            .iter()
            .skip(from_step)
            .any(|&b| b)
    }
}

/// Evolve initial data to `t_final = k·τ` (rounded, with a warning when the
/// requested horizon is not a step multiple), recording every snapshot and
/// backpointer.
pub fn evolve(
    phi: &ValueFunction,
    le: &LagrangianEvaluator,
    tau: f64,
    t_final: f64,
    v_max: f64,
) -> Result<EvolutionTrace> {
    if !(t_final >= 0.0) {
        return Err(CoreError::invalid(format!(
            "t_final must be nonnegative, got {t_final}"
        )));
    }
    let steps = (t_final / tau).round() as usize;
    if ((steps as f64) * tau - t_final).abs() > 1e-9 * tau.max(1.0) {
        log::warn!(
            "t_final = {t_final} is not a multiple of tau = {tau}; evolving {steps} steps"
        );
    }
    let kernel = StepKernel::new(le, phi.grid, tau, v_max)?;
    let mut snapshots = Vec::with_capacity(steps + 1);
    let mut backpointers = Vec::with_capacity(steps);
    let mut boundary_hits = Vec::with_capacity(steps);
    let mut current = phi.clone();
    current.time = 0.0;
    snapshots.push(current.clone());
    for _ in 0..steps {
        let (next, backptr, hit) = kernel.apply(&current)?;
        backpointers.push(backptr);
        boundary_hits.push(hit);
        snapshots.push(next.clone());
        current = next;
    }
    Ok(EvolutionTrace {
        snapshots,
        backpointers,
        boundary_hits,
        tau,
        v_max,
        hr: le.hr,
    })
}

/// A discrete action-minimizing chain recovered from backpointers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitSample {
    /// Node positions `γ(s_k)`, `k = 0..=m`.
    pub positions: Vec<Coord>,
    /// Segment velocities `(γ(s_{k+1}) − γ(s_k))/τ` (minimal representative).
    pub velocities: Vec<Coord>,
    /// Maximizing momenta of the conjugate at `(γ(s_k), v_k)`.
    pub momenta: Vec<Coord>,
    /// Base-Hamiltonian energies `H(γ(s_k), p_k)`.
    pub energies: Vec<f64>,
    /// `Σ_k τ · L_R(γ(s_{k+1}), v_k)` accumulated in chain order.
    pub action: f64,
    /// `φ(γ(0))`.
    pub initial_value: f64,
    /// `u(x, t)` at the queried endpoint.
    pub endpoint_value: f64,
    pub tau: f64,
    pub dim: usize,
}

/// Follow backpointers from `(x, t)` down to time zero and dress the chain
/// with velocities, momenta and energies.
pub fn reconstruct_orbit(trace: &EvolutionTrace, x: usize, t: f64) -> Result<OrbitSample> {
    let grid = trace.grid();
    if x >= grid.num_nodes() {
        return Err(CoreError::invalid(format!("node {x} out of range")));
    }
    let k_end = trace.snapshot_index_at(t)?;
    let mut nodes = vec![0usize; k_end + 1];
    nodes[k_end] = x;
    for k in (0..k_end).rev() {
        nodes[k] = trace.backpointers[k][nodes[k + 1]] as usize;
    }
    let le = LagrangianEvaluator::new(trace.hr);
    let dim = grid.dim();
    let tau = trace.tau;
    let positions: Vec<Coord> = nodes.iter().map(|&n| grid.node_point(n)).collect();
    let mut velocities = Vec::with_capacity(k_end);
    let mut momenta = Vec::with_capacity(k_end);
    let mut energies = Vec::with_capacity(k_end);
    let mut acc = trace.snapshots[0].values[nodes[0]];
    let initial_value = acc;
    for k in 0..k_end {
        let disp = grid.node_displacement(nodes[k], nodes[k + 1]);
        let mut v = [0.0; MAX_DIM];
        for d in 0..dim {
            v[d] = disp[d] / tau;
        }
        let (_, p) = le.legendre(&positions[k], &v)?;
        let energy = trace.hr.base.value(&positions[k], &p);
        // cost at the arrival node, exactly as the stepping kernel priced it
        let (l_arrival, _) = le.legendre(&positions[k + 1], &v)?;
        acc += tau * l_arrival;
        velocities.push(v);
        momenta.push(p);
        energies.push(energy);
    }
    Ok(OrbitSample {
        positions,
        velocities,
        momenta,
        energies,
        action: acc - initial_value,
        initial_value,
        endpoint_value: trace.snapshots[k_end].values[x],
        tau,
        dim,
    })
}

/// Outcome of the orbit energy localization check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `max_k [H(γ(s_k), p_k) − c_est]`.
    pub max_normalized_energy: f64,
    pub at_step: usize,
    pub level: f64,
    pub tol: f64,
    pub pass: bool,
    pub segments: usize,
}

/// Check that the orbit stays in the normalized energy sublevel
/// `{H − c_est ≤ level}` up to `tol`. Energies are recomputed from the
/// stored positions and momenta.
pub fn orbit_energy_check(
    orbit: &OrbitSample,
    model: &HamiltonianModel,
    c_est: f64,
    level: f64,
    tol: f64,
) -> EnergyReport {
    let mut max_norm = f64::NEG_INFINITY;
    let mut at_step = 0;
    for (k, p) in orbit.momenta.iter().enumerate() {
        let e = model.value(&orbit.positions[k], p) - c_est;
        if e > max_norm {
            max_norm = e;
            at_step = k;
        }
    }
    if orbit.momenta.is_empty() {
        max_norm = f64::NEG_INFINITY;
    }
    EnergyReport {
        max_normalized_energy: max_norm,
        at_step,
        level,
        tol,
        pass: max_norm <= level + tol,
        segments: orbit.momenta.len(),
    }
}

/// Options for the calibration slack check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Velocity sampling range per axis, `[−v_range, v_range]`.
    pub v_range: f64,
    /// Samples per axis.
    pub v_count: usize,
    /// Nodes with a centered second difference above this bound (in absolute
    /// value, per axis, divided by h²) are treated as non-differentiable.
    pub second_diff_bound: f64,
    /// Exclusion mask dilation radius in nodes.
    pub mask_dilation: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            v_range: 4.0,
            v_count: 81,
            second_diff_bound: 200.0,
            mask_dilation: 2,
        }
    }
}

/// Outcome of the calibration slack check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// `min_{x,v} [L_R(x, v) − ⟨Dū(x), v⟩ + c_est]` over admissible nodes.
    pub min_slack: f64,
    pub min_at_node: usize,
    pub min_at_v: Vec<f64>,
    /// Largest `|slack|` at the stationarity candidate
    /// `v = ∂H_R/∂p(x, Dū(x))`.
    pub max_equality_residual: f64,
    pub nodes_used: usize,
    pub nodes_total: usize,
}

/// At interior-differentiable nodes of a stationary candidate `ū`, check the
/// Fenchel slack `L_R(x, v) − ⟨Dū(x), v⟩ + c_est ≥ 0` over a velocity grid,
/// and its vanishing at the calibrated velocity.
pub fn calibration_check(
    u_bar: &ValueFunction,
    le: &LagrangianEvaluator,
    c_est: f64,
    opts: &CalibrationOptions,
) -> Result<CalibrationReport> {
    let grid = u_bar.grid;
    let dim = grid.dim();
    let h = grid.spacing();
    let nodes = grid.num_nodes();

    // mark kinks by the centered second difference, then dilate
    let mut bad = vec![false; nodes];
    for i in 0..nodes {
        for d in 0..dim {
            let mut e = [0i64; MAX_DIM];
            e[d] = 1;
            let up = u_bar.values[grid.shift(i, e)];
            e[d] = -1;
            let dn = u_bar.values[grid.shift(i, e)];
            let dd = (up + dn - 2.0 * u_bar.values[i]) / (h * h);
            if dd.abs() > opts.second_diff_bound {
                bad[i] = true;
            }
        }
    }
    for _ in 0..opts.mask_dilation {
        let prev = bad.clone();
        for i in 0..nodes {
            if prev[i] {
                continue;
            }
            'outer: for d in 0..dim {
                for s in [-1i64, 1] {
                    let mut e = [0i64; MAX_DIM];
                    e[d] = s;
                    if prev[grid.shift(i, e)] {
                        bad[i] = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    let v_samples: Vec<Coord> = {
        let m = opts.v_count.max(3);
        let axis: Vec<f64> = (0..m)
            .map(|k| -opts.v_range + 2.0 * opts.v_range * k as f64 / (m - 1) as f64)
            .collect();
        match dim {
            1 => axis.iter().map(|&v| [v, 0.0]).collect(),
            _ => {
                let coarse: Vec<f64> = axis.iter().copied().step_by(4).collect();
                let mut out = Vec::new();
                for &a in &coarse {
                    for &b in &coarse {
                        out.push([a, b]);
                    }
                }
                out
            }
        }
    };

    let mut report = CalibrationReport {
        min_slack: f64::INFINITY,
        min_at_node: 0,
        min_at_v: vec![0.0; dim],
        max_equality_residual: 0.0,
        nodes_used: 0,
        nodes_total: nodes,
    };
    for i in 0..nodes {
        if bad[i] {
            continue;
        }
        report.nodes_used += 1;
        let x = grid.node_point(i);
        let mut du = [0.0; MAX_DIM];
        for d in 0..dim {
            let mut e = [0i64; MAX_DIM];
            e[d] = 1;
            let up = u_bar.values[grid.shift(i, e)];
            e[d] = -1;
            let dn = u_bar.values[grid.shift(i, e)];
            du[d] = (up - dn) / (2.0 * h);
        }
        for v in &v_samples {
            let (l, _) = le.legendre(&x, v)?;
            let slack = l - crate::grid::dot(&du, v, dim) + c_est;
            if slack < report.min_slack {
                report.min_slack = slack;
                report.min_at_node = i;
                report.min_at_v = v[..dim].to_vec();
            }
        }
        // equality case at the calibrated velocity
        let v_star = le.hr.grad_p(&x, &du);
        let (l, _) = le.legendre(&x, &v_star)?;
        let residual = (l - crate::grid::dot(&du, &v_star, dim) + c_est).abs();
        report.max_equality_residual = report.max_equality_residual.max(residual);
    }
    Ok(report)
}
