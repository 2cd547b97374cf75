//! The Lagrangian `L_R` as the convex conjugate of `H_R`.
//!
//! ```text
//! L_R(x, v) = sup_p [ ⟨p, v⟩ − H_R(x, p) ]
//! ```
//!
//! For the built-in presets `H_R(x, ·)` is radial, so the supremum is
//! attained on the ray through `v` and the stationarity condition reduces to
//! the scalar equation `∂_r H_R(x, r) = |v|` with a nondecreasing left-hand
//! side. The solver is a bracketed Newton/bisection hybrid on that equation;
//! the bracket starts at radius `R + 3` and doubles into the quartic tail
//! when `|v|` exceeds the slope attained at `|p| = R + 2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::{dot, norm, Coord, MAX_DIM};
use crate::hamiltonian::{ModifiedHamiltonian, SamplingSpec};

/// Conjugate-search parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConjugateSearch {
    /// Initial bracket radius offset: the first bracket is `[0, R + pad]`.
    pub bracket_pad: f64,
    /// Stationarity tolerance on `|∂_r H_R − |v||`, relative to `1 + |v|`.
    pub grad_tol: f64,
    /// Velocity-map residual accepted for the returned maximizer.
    pub velocity_tol: f64,
    pub max_iter: usize,
}

impl Default for ConjugateSearch {
    fn default() -> Self {
        ConjugateSearch {
            bracket_pad: 3.0,
            grad_tol: 1e-10,
            velocity_tol: 1e-6,
            max_iter: 128,
        }
    }
}

/// Evaluates `L_R(x, v)` together with the maximizing momentum.
#[derive(Debug, Clone)]
pub struct LagrangianEvaluator {
    pub hr: ModifiedHamiltonian,
    pub search: ConjugateSearch,
}

impl LagrangianEvaluator {
    pub fn new(hr: ModifiedHamiltonian) -> Self {
        LagrangianEvaluator {
            hr,
            search: ConjugateSearch::default(),
        }
    }

    pub fn with_search(hr: ModifiedHamiltonian, search: ConjugateSearch) -> Self {
        LagrangianEvaluator { hr, search }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.hr.base.dim
    }

    /// `(L_R(x, v), p*)` with `p*` the maximizer of `⟨p, v⟩ − H_R(x, p)`.
    pub fn legendre(&self, x: &Coord, v: &Coord) -> Result<(f64, Coord)> {
        let dim = self.dim();
        let speed = norm(v, dim);
        if !speed.is_finite() {
            return Err(CoreError::invalid(format!("non-finite velocity {v:?}")));
        }
        if speed == 0.0 {
            // ∂_r H_R ≥ 0 everywhere, so the radial minimum sits at p = 0.
            let p = [0.0; MAX_DIM];
            return Ok((-self.hr.value(x, &p), p));
        }
        let r_star = self.solve_radius(x, speed)?;
        let mut p = [0.0; MAX_DIM];
        for d in 0..dim {
            p[d] = r_star * v[d] / speed;
        }
        let value = dot(&p, v, dim) - self.hr.value(x, &p);
        let residual = norm_diff(&self.hr.grad_p(x, &p), v, dim);
        if residual > self.search.velocity_tol * (1.0 + speed) {
            return Err(CoreError::ConjugateFailure {
                x: x[..dim].to_vec(),
                v: v[..dim].to_vec(),
                bracket_lo: r_star,
                bracket_hi: r_star,
                residual,
            });
        }
        Ok((value, p))
    }

    /// Solve `∂_r H_R(x, r) = w` on `r ≥ 0` by safeguarded Newton.
    fn solve_radius(&self, x: &Coord, w: f64) -> Result<f64> {
        let hr = &self.hr;
        let mut lo = 0.0_f64; // ∂_r H_R(x, 0) = 0 ≤ w
        let mut hi = hr.r_cut + self.search.bracket_pad;
        let mut grow = 0;
        while hr.radial_d1(x, hi) < w {
            hi *= 2.0;
            grow += 1;
            if grow > 200 {
                return Err(CoreError::ConjugateFailure {
                    x: x[..self.dim()].to_vec(),
                    v: vec![w],
                    bracket_lo: lo,
                    bracket_hi: hi,
                    residual: w - hr.radial_d1(x, hi),
                });
            }
        }
        let tol = self.search.grad_tol * (1.0 + w);
        let mut r = 0.5 * (lo + hi);
        for _ in 0..self.search.max_iter {
            let g = hr.radial_d1(x, r) - w;
            if g.abs() <= tol {
                return Ok(r);
            }
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            // Newton step with radial curvature, safeguarded by the bracket.
            let curv = self.radial_d2(x, r);
            let newton = if curv > 0.0 { r - g / curv } else { f64::NAN };
            r = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 * (1.0 + hi) {
                return Ok(r);
            }
        }
        let residual = hr.radial_d1(x, r) - w;
        if residual.abs() <= self.search.velocity_tol * (1.0 + w) {
            return Ok(r);
        }
        Err(CoreError::ConjugateFailure {
            x: x[..self.dim()].to_vec(),
            v: vec![w],
            bracket_lo: lo,
            bracket_hi: hi,
            residual,
        })
    }

    /// Second radial derivative of `H_R` along the first axis direction.
    fn radial_d2(&self, x: &Coord, r: f64) -> f64 {
        let p = [r, 0.0];
        self.hr.hess_p(x, &p)[0][0]
    }
}

/// The velocity map `v = ∂H_R/∂p (x, p)`.
pub fn velocity_map(hr: &ModifiedHamiltonian, x: &Coord, p: &Coord) -> Coord {
    hr.grad_p(x, p)
}

fn norm_diff(a: &Coord, b: &Coord, dim: usize) -> f64 {
    let mut d = [0.0; MAX_DIM];
    for i in 0..dim {
        d[i] = a[i] - b[i];
    }
    norm(&d, dim)
}

/// Round-trip report: how well `sup_v [⟨p,v⟩ − L_R(x,v)]` reproduces `H_R`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiconjugateReport {
    pub max_abs_error: f64,
    pub worst_x: Vec<f64>,
    pub worst_p: Vec<f64>,
    pub samples: usize,
}

/// Sample `|p| ≤ R+2` and compare the double conjugate against `H_R`.
///
/// The inner supremum over `v` is computed by golden-section search on the
/// concave radial profile `w ↦ |p| w − L_R(x, w·v̂)`, independently of the
/// stationarity route used by the forward conjugate.
pub fn biconjugate_check(le: &LagrangianEvaluator, sampling: &SamplingSpec) -> BiconjugateReport {
    let dim = le.dim();
    let r_cut = le.hr.r_cut;
    let xs: Vec<Coord> = {
        let m = sampling.x_per_dim.max(1);
        let total = m.pow(dim as u32);
        (0..total)
            .map(|f| {
                let h = 1.0 / m as f64;
                match dim {
                    1 => [f as f64 * h, 0.0],
                    _ => [(f % m) as f64 * h, (f / m) as f64 * h],
                }
            })
            .collect()
    };
    let radii: Vec<f64> = (0..=sampling.p_radial)
        .map(|k| (r_cut + 2.0) * k as f64 / sampling.p_radial as f64)
        .collect();

    let results: Vec<(f64, Coord, Coord)> = xs
        .par_iter()
        .map(|x| {
            let mut worst = (0.0_f64, *x, [0.0; MAX_DIM]);
            // Velocities need to range over the image of the sampled p-ball.
            let w_hi = 1.1 * le.hr.radial_d1(x, r_cut + 2.0) + 1.0;
            for &rad in &radii {
                let p = [rad, 0.0];
                let direct = le.hr.value(x, &p);
                let double = golden_max(0.0, w_hi, 1e-11, |w| {
                    let v = [w, 0.0];
                    let (l, _) = le.legendre(x, &v).expect("conjugate solve");
                    rad * w - l
                });
                let err = (double - direct).abs();
                if err > worst.0 {
                    worst = (err, *x, p);
                }
            }
            worst
        })
        .collect();

    let mut report = BiconjugateReport {
        max_abs_error: 0.0,
        worst_x: vec![0.0; dim],
        worst_p: vec![0.0; dim],
        samples: xs.len() * radii.len(),
    };
    for (err, x, p) in results {
        if err > report.max_abs_error {
            report.max_abs_error = err;
            report.worst_x = x[..dim].to_vec();
            report.worst_p = p[..dim].to_vec();
        }
    }
    report
}

/// Golden-section maximization of a concave function on `[a, b]`.
///
/// The stopping width is floored at a few ulps of the bracket magnitude so
/// wide brackets cannot stall below floating-point resolution.
fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let width_floor = tol.max(8.0 * f64::EPSILON * (a.abs() + b.abs()));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > width_floor {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_modified, HamiltonianModel, PotentialKind, Preset};

    fn evaluator(preset: Preset, potential: PotentialKind, r_cut: f64) -> LagrangianEvaluator {
        let model = HamiltonianModel::new(preset, potential, 1).unwrap();
        LagrangianEvaluator::new(build_modified(model, r_cut).unwrap())
    }

    #[test]
    fn quadratic_conjugate_is_half_v_squared() {
        let le = evaluator(Preset::Mechanical, PotentialKind::Zero, 8.0);
        let (l, p) = le.legendre(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((l - 0.5).abs() < 1e-9);
        assert!((p[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_velocity_gives_minus_min_hamiltonian() {
        let le = evaluator(Preset::Mechanical, PotentialKind::Cosine, 4.0);
        let (l, p) = le.legendre(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, -1.0); // L(x, 0) = −min_p H(x, p) = −V(x)
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn relativistic_conjugate_matches_analytic_and_grid_oracle() {
        let le = evaluator(Preset::CoerciveNonsuperlinear, PotentialKind::Zero, 8.0);
        let v: f64 = 0.6;
        let analytic = 1.0 - (1.0 - v * v).sqrt();
        assert!((analytic - 0.2).abs() < 1e-15);

        // independent dense-grid oracle over p
        let mut best = f64::NEG_INFINITY;
        for k in 0..200_000 {
            let p = -10.0 + 20.0 * k as f64 / 199_999.0;
            best = best.max(p * v - ((1.0 + p * p).sqrt() - 1.0));
        }
        assert!((best - analytic).abs() < 1e-8);

        let (l, _) = le.legendre(&[0.3, 0.0], &[v, 0.0]).unwrap();
        assert!((l - analytic).abs() < 1e-8);
    }

    #[test]
    fn velocity_map_matches_kinetic_slope() {
        let le = evaluator(Preset::Mechanical, PotentialKind::Zero, 8.0);
        let v = velocity_map(&le.hr, &[0.0, 0.0], &[2.0, 0.0]);
        assert_eq!(v[0], 2.0);
        let rel = evaluator(Preset::CoerciveNonsuperlinear, PotentialKind::Zero, 4.0);
        let v = velocity_map(&rel.hr, &[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn velocity_map_in_penalty_band_uses_chain_rule() {
        // R < |p| ≤ R+1: v = K'(p) + μ β'(|p|²−R²)·2p
        let le = evaluator(Preset::Mechanical, PotentialKind::Zero, 1.5);
        let p = 2.0;
        let z = p * p - 1.5 * 1.5;
        let expect = p + le.hr.mu * crate::hamiltonian::beta_d1(z) * 2.0 * p;
        let v = velocity_map(&le.hr, &[0.0, 0.0], &[p, 0.0]);
        assert!((v[0] - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn quartic_tail_maximizer_found_for_huge_velocity() {
        let le = evaluator(Preset::Mechanical, PotentialKind::Zero, 1.5);
        // the slope attained at the end of the transition zone
        let tail_slope = le.hr.radial_d1(&[0.0, 0.0], 3.5);
        let v = [4.0 * tail_slope, 0.0];
        let (_, p) = le.legendre(&[0.0, 0.0], &v).unwrap();
        assert!(p[0] > 1.5 + 2.0, "maximizer should lie in the tail");
        let back = velocity_map(&le.hr, &[0.0, 0.0], &p);
        assert!((back[0] - v[0]).abs() <= 1e-6 * (1.0 + v[0]));
    }

    #[test]
    fn fenchel_young_and_roundtrip_sampled() {
        for (preset, pot) in [
            (Preset::Mechanical, PotentialKind::Cosine),
            (Preset::CoerciveNonsuperlinear, PotentialKind::Cosine),
        ] {
            let le = evaluator(preset, pot, 4.0);
            for xi in 0..7 {
                let x = [xi as f64 / 7.0, 0.0];
                for vi in -12..=12 {
                    let v = [vi as f64 * 0.3, 0.0];
                    let (l, p_star) = le.legendre(&x, &v).unwrap();
                    // equality at the returned pair
                    let gap = l + le.hr.value(&x, &p_star) - dot(&p_star, &v, 1);
                    assert!(gap.abs() < 1e-8, "Fenchel equality gap {gap}");
                    // inequality for other momenta
                    for pi in -10..=10 {
                        let p = [pi as f64 * 0.6, 0.0];
                        assert!(l + le.hr.value(&x, &p) >= dot(&p, &v, 1) - 1e-9);
                    }
                    // L(x, v) ≥ −H_R(x, 0)
                    assert!(l >= -le.hr.value(&x, &[0.0, 0.0]) - 1e-12);
                    // velocity map inverts the conjugate
                    let back = velocity_map(&le.hr, &x, &p_star);
                    assert!((back[0] - v[0]).abs() <= 1e-6 * (1.0 + v[0].abs()));
                }
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn fenchel_young_holds_for_arbitrary_triples(
            x in 0.0..1.0f64,
            v in -5.0..5.0f64,
            p in -6.0..6.0f64,
        ) {
            let le = evaluator(Preset::Mechanical, PotentialKind::Cosine, 4.0);
            let (l, p_star) = le.legendre(&[x, 0.0], &[v, 0.0]).unwrap();
            // L(x,v) + H_R(x,p) ≥ ⟨p, v⟩ for every probed momentum
            proptest::prop_assert!(l + le.hr.value(&[x, 0.0], &[p, 0.0]) >= p * v - 1e-9);
            // with equality at the returned maximizer
            let gap = l + le.hr.value(&[x, 0.0], &p_star) - p_star[0] * v;
            proptest::prop_assert!(gap.abs() < 1e-8);
        }
    }

    #[test]
    fn lagrangian_is_midpoint_convex_in_v() {
        let le = evaluator(Preset::CoerciveNonsuperlinear, PotentialKind::Cosine, 3.0);
        let x = [0.21, 0.0];
        let l = |v: f64| le.legendre(&x, &[v, 0.0]).unwrap().0;
        for i in -8..8 {
            let a = i as f64 * 0.25;
            let b = a + 1.0;
            assert!(l(0.5 * (a + b)) <= 0.5 * (l(a) + l(b)) + 1e-10);
        }
    }

    #[test]
    fn biconjugate_error_small_both_presets() {
        let spec = SamplingSpec {
            x_per_dim: 16,
            p_radial: 32,
            p_directions: 2,
        };
        let le = evaluator(Preset::Mechanical, PotentialKind::Zero, 4.0);
        let rep = biconjugate_check(&le, &spec);
        assert!(rep.max_abs_error < 1e-6, "{rep:?}");
        let le = evaluator(Preset::CoerciveNonsuperlinear, PotentialKind::Cosine, 4.0);
        let rep = biconjugate_check(&le, &spec);
        assert!(rep.max_abs_error < 1e-5, "{rep:?}");
    }

    #[test]
    fn two_dimensional_conjugate_aligns_with_velocity() {
        let model = HamiltonianModel::new(Preset::Mechanical, PotentialKind::CosineMix, 2).unwrap();
        let le = LagrangianEvaluator::new(build_modified(model, 4.0).unwrap());
        let x = [0.3, 0.7];
        let v = [0.8, -0.6];
        let (l, p) = le.legendre(&x, &v).unwrap();
        // mechanical inside the cutoff: p* = v and L = |v|²/2 − V(x)
        assert!((p[0] - v[0]).abs() < 1e-8);
        assert!((p[1] - v[1]).abs() < 1e-8);
        let expect = 0.5 - le.hr.base.potential.value(&x);
        assert!((l - expect).abs() < 1e-8);
    }
}
