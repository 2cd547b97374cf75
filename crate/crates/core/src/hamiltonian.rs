//! Hamiltonian presets and the superlinear modification `H_R`.
//!
//! Base Hamiltonians have the form `H(x, p) = K(|p|) + V(x)` with a smooth,
//! strictly convex, coercive kinetic profile `K` and a periodic potential
//! `V`. The modification
//!
//! ```text
//! H_R(x, p) = α_R(p) · H(x, p) + μ_R · β(|p|² − R²)
//! ```
//!
//! leaves `H` untouched on `|p| ≤ R`, interpolates through a radial C²
//! cutoff `α_R` (value 1 on `|p| ≤ R+1`, 0 from `|p| ≥ R+2`), and grows like
//! `μ_R (|p|² − R²)⁴` outside, which restores superlinearity while keeping
//! strict convexity in `p` for `μ_R` large enough. The constant `μ_R` is
//! produced from sampled bounds and then certified by a sampled Hessian
//! eigenvalue check with a doubling retry.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{norm, Coord, MAX_DIM};

/// Kinetic part of a base Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `H = |p|²/2 + V(x)`; strictly convex and superlinear.
    Mechanical,
    /// `H = sqrt(1 + |p|²) − 1 + V(x)`; strictly convex, coercive but with
    /// bounded slope `|∂H/∂p| < 1`, hence not superlinear.
    CoerciveNonsuperlinear,
}

/// Named periodic potential on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    /// `V(x) = cos(2π x₁)` (the pendulum potential).
    Cosine,
    /// `V(x) = cos(2π x₁) + 0.5 cos(4π x₂)`; requires `dim = 2`.
    CosineMix,
}

impl PotentialKind {
    pub fn value(&self, x: &Coord) -> f64 {
        match self {
            PotentialKind::Zero => 0.0,
            PotentialKind::Cosine => (TAU * x[0].rem_euclid(1.0)).cos(),
            PotentialKind::CosineMix => {
                (TAU * x[0].rem_euclid(1.0)).cos()
                    + 0.5 * (2.0 * TAU * x[1].rem_euclid(1.0)).cos()
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            PotentialKind::Zero => 0.0,
            PotentialKind::Cosine => -1.0,
            PotentialKind::CosineMix => -1.5,
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            PotentialKind::Zero => 0.0,
            PotentialKind::Cosine => 1.0,
            PotentialKind::CosineMix => 1.5,
        }
    }
}

/// A base Hamiltonian `H(x,p) = K(|p|) + V(x)` on `T^n × R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianModel {
    pub preset: Preset,
    pub potential: PotentialKind,
    pub dim: usize,
}

impl HamiltonianModel {
    pub fn new(preset: Preset, potential: PotentialKind, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(CoreError::invalid(format!("dim must be 1 or 2, got {dim}")));
        }
        if potential == PotentialKind::CosineMix && dim != 2 {
            return Err(CoreError::invalid(
                "cosine-mix potential requires dim = 2".to_string(),
            ));
        }
        Ok(HamiltonianModel {
            preset,
            potential,
            dim,
        })
    }

    /// Kinetic profile `K(r)` at radius `r = |p|`.
    #[inline]
    pub fn kinetic(&self, r: f64) -> f64 {
        match self.preset {
            Preset::Mechanical => 0.5 * r * r,
            Preset::CoerciveNonsuperlinear => (1.0 + r * r).sqrt() - 1.0,
        }
    }

    /// `K'(r)`.
    #[inline]
    pub fn kinetic_d1(&self, r: f64) -> f64 {
        match self.preset {
            Preset::Mechanical => r,
            Preset::CoerciveNonsuperlinear => r / (1.0 + r * r).sqrt(),
        }
    }

    /// `K''(r)`.
    #[inline]
    pub fn kinetic_d2(&self, r: f64) -> f64 {
        match self.preset {
            Preset::Mechanical => 1.0,
            Preset::CoerciveNonsuperlinear => (1.0 + r * r).powf(-1.5),
        }
    }

    /// Inverse of the kinetic profile: largest `r` with `K(r) = s`, `s ≥ 0`.
    #[inline]
    pub fn kinetic_inv(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match self.preset {
            Preset::Mechanical => (2.0 * s).sqrt(),
            Preset::CoerciveNonsuperlinear => ((s + 1.0) * (s + 1.0) - 1.0).max(0.0).sqrt(),
        }
    }

    /// `H(x, p)` without argument validation.
    #[inline]
    pub fn value(&self, x: &Coord, p: &Coord) -> f64 {
        self.kinetic(norm(p, self.dim)) + self.potential.value(x)
    }

    /// `H(x, p)`; rejects non-finite inputs.
    pub fn eval(&self, x: &Coord, p: &Coord) -> Result<f64> {
        for d in 0..self.dim {
            if !x[d].is_finite() || !p[d].is_finite() {
                return Err(CoreError::invalid(format!(
                    "non-finite input x = {x:?}, p = {p:?}"
                )));
            }
        }
        Ok(self.value(x, p))
    }

    /// `∂H/∂p (x, p)`.
    #[inline]
    pub fn grad_p(&self, _x: &Coord, p: &Coord) -> Coord {
        let r = norm(p, self.dim);
        let mut g = [0.0; MAX_DIM];
        if r == 0.0 {
            return g;
        }
        let scale = self.kinetic_d1(r) / r;
        for d in 0..self.dim {
            g[d] = scale * p[d];
        }
        g
    }

    /// `∂²H/∂p² (x, p)` as a symmetric `dim × dim` matrix.
    pub fn hess_p(&self, _x: &Coord, p: &Coord) -> [[f64; MAX_DIM]; MAX_DIM] {
        let r = norm(p, self.dim);
        radial_hessian(
            p,
            r,
            self.dim,
            self.kinetic_d2(r),
            if r > 1e-12 {
                self.kinetic_d1(r) / r
            } else {
                self.kinetic_d2(0.0)
            },
        )
    }

    /// Radius bound for the sublevel set `{H ≤ level}`: `H(x,p) ≤ level`
    /// implies `|p| ≤ coercivity_radius(level)`. `None` if the set is empty.
    pub fn coercivity_radius(&self, level: f64) -> Option<f64> {
        let s = level - self.potential.min();
        if s < 0.0 {
            None
        } else {
            Some(self.kinetic_inv(s))
        }
    }

    /// Sampled bound on `|∂H/∂p|` over the sublevel set `{H ≤ level}`.
    ///
    /// Per node of a coarse x-grid the sublevel slice is the ball of radius
    /// `K⁻¹(level − V(x))`, where the slope `K'` is maximal; 0 if empty.
    pub fn velocity_bound(&self, level: f64, x_per_dim: usize) -> f64 {
        let mut bound: f64 = 0.0;
        let m = x_per_dim.max(2);
        let total = m.pow(self.dim as u32);
        for flat in 0..total {
            let x = coarse_point(flat, m, self.dim);
            let s = level - self.potential.value(&x);
            if s >= 0.0 {
                bound = bound.max(self.kinetic_d1(self.kinetic_inv(s)));
            }
        }
        bound
    }
}

/// Assemble `d2·uuᵀ + t·(E − uuᵀ)` for the unit radial direction `u = p/r`.
fn radial_hessian(
    p: &Coord,
    r: f64,
    dim: usize,
    d2: f64,
    tangent: f64,
) -> [[f64; MAX_DIM]; MAX_DIM] {
    let mut h = [[0.0; MAX_DIM]; MAX_DIM];
    if dim == 1 {
        h[0][0] = d2;
        return h;
    }
    if r <= 1e-12 {
        h[0][0] = d2;
        h[1][1] = d2;
        return h;
    }
    let u = [p[0] / r, p[1] / r];
    for i in 0..2 {
        for j in 0..2 {
            let uu = u[i] * u[j];
            let id = if i == j { 1.0 } else { 0.0 };
            h[i][j] = d2 * uu + tangent * (id - uu);
        }
    }
    h
}

/// Quartic penalty: `β(z) = z⁴` for `z > 0`, zero otherwise. C³ at `z = 0`.
#[inline]
pub fn beta(z: f64) -> f64 {
    if z > 0.0 {
        z * z * z * z
    } else {
        0.0
    }
}

/// `β'(z) = 4z³` on `z > 0`.
#[inline]
pub fn beta_d1(z: f64) -> f64 {
    if z > 0.0 {
        4.0 * z * z * z
    } else {
        0.0
    }
}

/// `β''(z) = 12z²` on `z > 0`.
#[inline]
pub fn beta_d2(z: f64) -> f64 {
    if z > 0.0 {
        12.0 * z * z
    } else {
        0.0
    }
}

/// `β'''(z) = 24z` on `z > 0`.
#[inline]
pub fn beta_d3(z: f64) -> f64 {
    if z > 0.0 {
        24.0 * z
    } else {
        0.0
    }
}

/// Radial C² cutoff: 1 on `|p| ≤ R+1`, 0 from `|p| ≥ R+2`, quintic
/// smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub r_cut: f64,
}

impl Cutoff {
    /// `(α, α', α'')` of the radial profile at radius `r`.
    #[inline]
    pub fn profile(&self, r: f64) -> (f64, f64, f64) {
        let t = r - (self.r_cut + 1.0);
        if t <= 0.0 {
            (1.0, 0.0, 0.0)
        } else if t >= 1.0 {
            (0.0, 0.0, 0.0)
        } else {
            let t2 = t * t;
            let s = t2 * t * (6.0 * t2 - 15.0 * t + 10.0);
            let s1 = 30.0 * t2 * (t - 1.0) * (t - 1.0);
            let s2 = 60.0 * t * (2.0 * t - 1.0) * (t - 1.0);
            (1.0 - s, -s1, -s2)
        }
    }

    /// Cutoff value at a momentum vector.
    #[inline]
    pub fn alpha(&self, p: &Coord, dim: usize) -> f64 {
        self.profile(norm(p, dim)).0
    }
}

/// Value of the radial cutoff `α_R` together with first and second radial
/// derivatives. Exposed standalone for direct checks.
pub fn alpha_r(r_cut: f64, p: &Coord, dim: usize) -> (f64, f64, f64) {
    Cutoff { r_cut }.profile(norm(p, dim))
}

/// Recorded maxima of the cutoff derivatives actually used by the build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBounds {
    /// `max_r |α'_R(r)|` (15/8 for the quintic smoothstep).
    pub max_abs_grad: f64,
    /// Max column-sum norm of the momentum Hessian of `α_R`.
    pub max_hess_l1: f64,
}

/// Sampling density for build-time and verification sweeps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub x_per_dim: usize,
    pub p_radial: usize,
    pub p_directions: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            x_per_dim: 64,
            p_radial: 64,
            p_directions: 16,
        }
    }
}

impl SamplingSpec {
    fn x_points(&self, dim: usize) -> Vec<Coord> {
        let m = self.x_per_dim.max(1);
        let total = m.pow(dim as u32);
        (0..total).map(|f| coarse_point(f, m, dim)).collect()
    }

    fn directions(&self, dim: usize) -> Vec<Coord> {
        if dim == 1 {
            vec![[1.0, 0.0], [-1.0, 0.0]]
        } else {
            let m = self.p_directions.max(4);
            (0..m)
                .map(|k| {
                    let th = TAU * (k as f64 + 0.5) / m as f64;
                    [th.cos(), th.sin()]
                })
                .collect()
        }
    }

    fn radii(&self, r_max: f64) -> Vec<f64> {
        let m = self.p_radial.max(2);
        (0..=m).map(|k| r_max * k as f64 / m as f64).collect()
    }
}

fn coarse_point(flat: usize, m: usize, dim: usize) -> Coord {
    let h = 1.0 / m as f64;
    match dim {
        1 => [flat as f64 * h, 0.0],
        _ => [(flat % m) as f64 * h, (flat / m) as f64 * h],
    }
}

/// The modified Hamiltonian `H_R` with its certified convexity constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModifiedHamiltonian {
    pub base: HamiltonianModel,
    /// Cutoff radius `R`.
    pub r_cut: f64,
    /// Penalty weight `μ_R`; always `> max{γ_R, 1}`.
    pub mu: f64,
    /// The sampled constant `γ_R = 2 max|H| + (n−1) max ‖W‖₁` over the
    /// transition box.
    pub gamma: f64,
    pub alpha_bounds: AlphaBounds,
}

impl ModifiedHamiltonian {
    #[inline]
    fn cutoff(&self) -> Cutoff {
        Cutoff { r_cut: self.r_cut }
    }

    /// `H_R(x, p)`. Identical code path to the base Hamiltonian on
    /// `|p| ≤ R`.
    pub fn value(&self, x: &Coord, p: &Coord) -> f64 {
        let dim = self.base.dim;
        let r = norm(p, dim);
        if r <= self.r_cut {
            return self.base.value(x, p);
        }
        let z = r * r - self.r_cut * self.r_cut;
        let pen = self.mu * beta(z);
        if r <= self.r_cut + 1.0 {
            self.base.value(x, p) + pen
        } else if r < self.r_cut + 2.0 {
            let (a, _, _) = self.cutoff().profile(r);
            a * self.base.value(x, p) + pen
        } else {
            pen
        }
    }

    /// `∂H_R/∂p (x, p)`.
    pub fn grad_p(&self, x: &Coord, p: &Coord) -> Coord {
        let dim = self.base.dim;
        let r = norm(p, dim);
        if r <= self.r_cut {
            return self.base.grad_p(x, p);
        }
        let z = r * r - self.r_cut * self.r_cut;
        let pen_scale = self.mu * beta_d1(z) * 2.0;
        let mut g = [0.0; MAX_DIM];
        if r <= self.r_cut + 1.0 {
            let gh = self.base.grad_p(x, p);
            for d in 0..dim {
                g[d] = gh[d] + pen_scale * p[d];
            }
        } else if r < self.r_cut + 2.0 {
            let (a, a1, _) = self.cutoff().profile(r);
            let gh = self.base.grad_p(x, p);
            let hval = self.base.value(x, p);
            for d in 0..dim {
                let u = p[d] / r;
                g[d] = a * gh[d] + a1 * u * hval + pen_scale * p[d];
            }
        } else {
            for d in 0..dim {
                g[d] = pen_scale * p[d];
            }
        }
        g
    }

    /// `∂²H_R/∂p² (x, p)`.
    pub fn hess_p(&self, x: &Coord, p: &Coord) -> [[f64; MAX_DIM]; MAX_DIM] {
        let dim = self.base.dim;
        let r = norm(p, dim);
        if r <= self.r_cut {
            return self.base.hess_p(x, p);
        }
        let z = r * r - self.r_cut * self.r_cut;
        let b1 = beta_d1(z);
        let b2 = beta_d2(z);
        let mut h = [[0.0; MAX_DIM]; MAX_DIM]; // 2 μ (2 β'' Z + β' E)
        for i in 0..dim {
            for j in 0..dim {
                let id = if i == j { 1.0 } else { 0.0 };
                h[i][j] = 2.0 * self.mu * (2.0 * b2 * p[i] * p[j] + b1 * id);
            }
        }
        if r > self.r_cut + 1.0 && r < self.r_cut + 2.0 {
            let (a, a1, a2) = self.cutoff().profile(r);
            let hess_alpha = radial_hessian(p, r, dim, a2, a1 / r);
            let gh = self.base.grad_p(x, p);
            let hb = self.base.hess_p(x, p);
            let hval = self.base.value(x, p);
            let mut u = [0.0; MAX_DIM];
            for d in 0..dim {
                u[d] = p[d] / r;
            }
            for i in 0..dim {
                for j in 0..dim {
                    h[i][j] += hval * hess_alpha[i][j]
                        + a1 * (u[i] * gh[j] + gh[i] * u[j]) // W(x, p)
                        + a * hb[i][j];
                }
            }
        } else if r <= self.r_cut + 1.0 {
            let hb = self.base.hess_p(x, p);
            for i in 0..dim {
                for j in 0..dim {
                    h[i][j] += hb[i][j];
                }
            }
        }
        h
    }

    /// Radial profile `F(x, r) = H_R(x, r·û)`; `H_R` depends on `p` only
    /// through `|p|` for the built-in presets.
    pub fn radial(&self, x: &Coord, r: f64) -> f64 {
        let p = [r, 0.0];
        self.value(x, &p)
    }

    /// Radial slope `∂F/∂r (x, r)`; nondecreasing in `r` by convexity.
    pub fn radial_d1(&self, x: &Coord, r: f64) -> f64 {
        if r <= self.r_cut {
            return self.base.kinetic_d1(r);
        }
        let z = r * r - self.r_cut * self.r_cut;
        let pen = self.mu * beta_d1(z) * 2.0 * r;
        if r <= self.r_cut + 1.0 {
            self.base.kinetic_d1(r) + pen
        } else if r < self.r_cut + 2.0 {
            let (a, a1, _) = self.cutoff().profile(r);
            let hval = self.base.kinetic(r) + self.base.potential.value(x);
            a * self.base.kinetic_d1(r) + a1 * hval + pen
        } else {
            pen
        }
    }

    /// Smallest eigenvalue of the momentum Hessian at `(x, p)`.
    pub fn min_hessian_eig(&self, x: &Coord, p: &Coord) -> f64 {
        let h = self.hess_p(x, p);
        min_eig_sym(&h, self.base.dim)
    }
}

/// Smallest eigenvalue of a symmetric `dim × dim` matrix (dim ≤ 2).
pub fn min_eig_sym(h: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> f64 {
    if dim == 1 {
        h[0][0]
    } else {
        let half_tr = 0.5 * (h[0][0] + h[1][1]);
        let det_part = (0.5 * (h[0][0] - h[1][1])).hypot(h[0][1]);
        half_tr - det_part
    }
}

const MU_RETRIES: usize = 8;

/// Construct `H_R` with sampled `γ_R`, `μ_R = max{γ_R, 1} + 1`, and a
/// sampled positive-definiteness certificate (doubling `μ_R` on failure).
pub fn build_modified(model: HamiltonianModel, r_cut: f64) -> Result<ModifiedHamiltonian> {
    build_modified_with(model, r_cut, &SamplingSpec::default())
}

pub fn build_modified_with(
    model: HamiltonianModel,
    r_cut: f64,
    sampling: &SamplingSpec,
) -> Result<ModifiedHamiltonian> {
    if !(r_cut > 1.0) {
        return Err(CoreError::invalid(format!(
            "cutoff radius must exceed 1, got {r_cut}"
        )));
    }
    let dim = model.dim;
    let cutoff = Cutoff { r_cut };

    // γ_R = 2 max |H| + (n−1) max ‖W‖₁ sampled over x ∈ T^n and momentum
    // components in [R+1, R+2].
    let xs = sampling.x_points(dim);
    let p_box: usize = 16;
    let mut max_abs_h: f64 = 0.0;
    let mut max_w_l1: f64 = 0.0;
    let box_total = p_box.pow(dim as u32);
    for x in &xs {
        for flat in 0..box_total {
            let mut p = [0.0; MAX_DIM];
            let mut rem = flat;
            for d in 0..dim {
                let k = rem % p_box;
                rem /= p_box;
                p[d] = r_cut + 1.0 + k as f64 / (p_box - 1) as f64;
            }
            max_abs_h = max_abs_h.max(model.value(x, &p).abs());
            if dim > 1 {
                let r = norm(&p, dim);
                let (_, a1, _) = cutoff.profile(r);
                let gh = model.grad_p(x, &p);
                // W = ∇α · ∇Hᵀ + ∇H · ∇αᵀ with ∇α = α'(r) p/r
                let mut w = [[0.0; MAX_DIM]; MAX_DIM];
                for i in 0..dim {
                    for j in 0..dim {
                        w[i][j] = a1 * (p[i] / r) * gh[j] + gh[i] * a1 * (p[j] / r);
                    }
                }
                let l1 = (0..dim)
                    .map(|j| (0..dim).map(|i| w[i][j].abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                max_w_l1 = max_w_l1.max(l1);
            }
        }
    }
    let gamma = 2.0 * max_abs_h + (dim as f64 - 1.0) * max_w_l1;

    let alpha_bounds = sample_alpha_bounds(r_cut, dim);

    let mut mu = gamma.max(1.0) + 1.0;
    for retry in 0..=MU_RETRIES {
        let hr = ModifiedHamiltonian {
            base: model,
            r_cut,
            mu,
            gamma,
            alpha_bounds,
        };
        let (min_eig, at_x, at_p) = sampled_min_hessian_eig(&hr, sampling, r_cut + 4.0);
        if min_eig > 0.0 {
            return Ok(hr);
        }
        if retry == MU_RETRIES {
            return Err(CoreError::ConstructionFailure {
                worst_eigenvalue: min_eig,
                x: at_x[..dim].to_vec(),
                p: at_p[..dim].to_vec(),
                retries: retry,
                mu,
            });
        }
        mu *= 2.0;
    }
    unreachable!()
}

fn sample_alpha_bounds(r_cut: f64, dim: usize) -> AlphaBounds {
    let cutoff = Cutoff { r_cut };
    let mut max_abs_grad: f64 = 0.0;
    let mut max_hess_l1: f64 = 0.0;
    let m = 2048;
    for k in 0..=m {
        let r = r_cut + 1.0 + k as f64 / m as f64;
        let (_, a1, a2) = cutoff.profile(r);
        max_abs_grad = max_abs_grad.max(a1.abs());
        if dim == 1 {
            max_hess_l1 = max_hess_l1.max(a2.abs());
        } else {
            // ‖α''‖₁ maximized over ray directions
            for j in 0..32 {
                let th = TAU * j as f64 / 64.0;
                let u = [th.cos(), th.sin()];
                let p = [u[0] * r, u[1] * r];
                let h = radial_hessian(&p, r, dim, a2, a1 / r);
                let l1 = (0..dim)
                    .map(|c| (0..dim).map(|rr| h[rr][c].abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                max_hess_l1 = max_hess_l1.max(l1);
            }
        }
    }
    AlphaBounds {
        max_abs_grad,
        max_hess_l1,
    }
}

/// Minimum sampled Hessian eigenvalue of `H_R` over `|p| ≤ r_max`.
fn sampled_min_hessian_eig(
    hr: &ModifiedHamiltonian,
    sampling: &SamplingSpec,
    r_max: f64,
) -> (f64, Coord, Coord) {
    let dim = hr.base.dim;
    let xs = sampling.x_points(dim);
    let dirs = sampling.directions(dim);
    let radii = sampling.radii(r_max);
    let best = xs
        .par_iter()
        .map(|x| {
            let mut worst = (f64::INFINITY, *x, [0.0; MAX_DIM]);
            for dir in &dirs {
                for &r in &radii {
                    let p = [dir[0] * r, dir[1] * r];
                    let eig = hr.min_hessian_eig(x, &p);
                    if eig < worst.0 {
                        worst = (eig, *x, p);
                    }
                }
            }
            worst
        })
        .reduce(
            || (f64::INFINITY, [0.0; MAX_DIM], [0.0; MAX_DIM]),
            |a, b| if a.0 <= b.0 { a } else { b },
        );
    best
}

/// Verification report for the modified Hamiltonian's structural claims.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClaimsReport {
    /// Max relative gap between finite-difference and analytic p-derivatives
    /// (gradient and Hessian), `|fd − exact| / (1 + |exact|)`.
    pub max_derivative_gap: f64,
    /// Min sampled eigenvalue of `∂²H_R/∂p²` over `|p| ≤ R+4`.
    pub min_hessian_eig: f64,
    pub min_hessian_at_x: Vec<f64>,
    pub min_hessian_at_p: Vec<f64>,
    /// `min H_R(x,p) − |p|²` over sampled `|p| ∈ [R+2.5, R+6]`.
    pub superlinearity_margin: f64,
    /// `max |H_R − H|` over sampled `|p| ≤ R`.
    pub max_restriction_gap: f64,
    pub smoothness_ok: bool,
    pub convexity_ok: bool,
    pub superlinearity_ok: bool,
    pub restriction_ok: bool,
}

impl ClaimsReport {
    pub fn all_ok(&self) -> bool {
        self.smoothness_ok && self.convexity_ok && self.superlinearity_ok && self.restriction_ok
    }
}

const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-3;
const RESTRICTION_TOL: f64 = 1e-12;

/// Sample the four structural checks of the modification: C² consistency,
/// convexity, superlinearity and the `|p| ≤ R` identity. Failures are
/// recorded in the report, never thrown.
pub fn verify_claims(hr: &ModifiedHamiltonian, sampling: &SamplingSpec) -> ClaimsReport {
    let dim = hr.base.dim;
    let r = hr.r_cut;
    let xs = sampling.x_points(dim);
    let dirs = sampling.directions(dim);

    let (min_hessian_eig, eig_x, eig_p) = sampled_min_hessian_eig(hr, sampling, r + 4.0);

    // C² check on a thinned sample (finite differences are 9 evaluations per
    // point and direction).
    let mut max_derivative_gap: f64 = 0.0;
    let fd_radii: Vec<f64> = sampling
        .radii(r + 4.0)
        .into_iter()
        .step_by(4)
        .collect();
    let fd_xs: Vec<Coord> = xs.iter().copied().step_by(4).collect();
    for x in &fd_xs {
        for dir in &dirs {
            for &rad in &fd_radii {
                let p = [dir[0] * rad, dir[1] * rad];
                max_derivative_gap = max_derivative_gap.max(fd_gap(hr, x, &p));
            }
        }
    }

    // Superlinearity margin on the outer shell.
    let mut superlinearity_margin = f64::INFINITY;
    let shell: Vec<f64> = (0..=sampling.p_radial)
        .map(|k| r + 2.5 + 3.5 * k as f64 / sampling.p_radial as f64)
        .collect();
    for x in &xs {
        for dir in &dirs {
            for &rad in &shell {
                let p = [dir[0] * rad, dir[1] * rad];
                let margin = hr.value(x, &p) - rad * rad;
                superlinearity_margin = superlinearity_margin.min(margin);
            }
        }
    }

    // Identity on |p| ≤ R.
    let mut max_restriction_gap: f64 = 0.0;
    for x in &xs {
        for dir in &dirs {
            for &rad in &sampling.radii(r) {
                let p = [dir[0] * rad, dir[1] * rad];
                let gap = (hr.value(x, &p) - hr.base.value(x, &p)).abs();
                max_restriction_gap = max_restriction_gap.max(gap);
            }
        }
    }

    ClaimsReport {
        max_derivative_gap,
        min_hessian_eig,
        min_hessian_at_x: eig_x[..dim].to_vec(),
        min_hessian_at_p: eig_p[..dim].to_vec(),
        superlinearity_margin,
        max_restriction_gap,
        smoothness_ok: max_derivative_gap < FD_REL_TOL,
        convexity_ok: min_hessian_eig > 0.0,
        superlinearity_ok: superlinearity_margin >= 0.0,
        restriction_ok: max_restriction_gap < RESTRICTION_TOL,
    }
}

/// Relative FD-vs-analytic gap for gradient and Hessian at one point.
fn fd_gap(hr: &ModifiedHamiltonian, x: &Coord, p: &Coord) -> f64 {
    let dim = hr.base.dim;
    let g = hr.grad_p(x, p);
    let h = hr.hess_p(x, p);
    let mut worst: f64 = 0.0;
    for d in 0..dim {
        let mut pp = *p;
        pp[d] = p[d] + FD_STEP;
        let vp = hr.value(x, &pp);
        let gp = hr.grad_p(x, &pp);
        pp[d] = p[d] - FD_STEP;
        let vm = hr.value(x, &pp);
        let gm = hr.grad_p(x, &pp);
        let fd_grad = (vp - vm) / (2.0 * FD_STEP);
        worst = worst.max((fd_grad - g[d]).abs() / (1.0 + g[d].abs()));
        for e in 0..dim {
            let fd_hess = (gp[e] - gm[e]) / (2.0 * FD_STEP);
            worst = worst.max((fd_hess - h[e][d]).abs() / (1.0 + h[e][d].abs()));
        }
    }
    worst
}
