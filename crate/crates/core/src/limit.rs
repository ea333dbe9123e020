//! The critical limit problem on the whole space: the explicit radial profile
//! `U(r) = (n(n-2) / (n(n-2) + r^2))^{(n-2)/2}` solving `-Δu = u^{p_S}` with
//! `u(0) = 1`, the Sobolev level `S^{n/2}` it carries, the Rayleigh form of
//! the linearized operator `L* = -Δ - p_S U^{p_S-1}`, and the first eigenpair
//! `(λ1*, φ1*)` of `L*` on large truncated balls.

use std::sync::Arc;

use crate::error::CoreError;
use crate::grid::{integrate_radial, sphere_area, RadialGrid, RadialProfile};
use crate::operator::{EigenOptions, RadialOperator};
use crate::Result;

/// Critical Sobolev exponent `p_S = (n+2)/(n-2)` for `n > 2`.
pub fn critical_exponent(dim: usize) -> f64 {
    (dim as f64 + 2.0) / (dim as f64 - 2.0)
}

/// Truncation radius used for whole-space quadratures unless overridden.
pub const DEFAULT_TRUNC_RADIUS: f64 = 50.0;
/// Node count for whole-space quadratures.
pub const DEFAULT_TRUNC_NODES: usize = 32_769;

fn require_supercritical_dim(dim: usize) -> Result<()> {
    if dim <= 2 {
        return Err(CoreError::invalid(format!("dimension {dim} must exceed 2")));
    }
    Ok(())
}

/// The explicit positive radial solution of the critical problem, `U(0) = 1`.
#[derive(Debug, Clone, Copy)]
pub struct LimitBubble {
    dim: usize,
}

impl LimitBubble {
    pub fn new(dim: usize) -> Result<Self> {
        require_supercritical_dim(dim)?;
        Ok(LimitBubble { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `a = n(n-2)`, the square of the intrinsic length of the profile.
    pub fn length_sq(&self) -> f64 {
        (self.dim * (self.dim - 2)) as f64
    }

    pub fn value(&self, r: f64) -> f64 {
        let a = self.length_sq();
        (a / (a + r * r)).powf((self.dim as f64 - 2.0) / 2.0)
    }

    pub fn deriv(&self, r: f64) -> f64 {
        let a = self.length_sq();
        let nm2 = self.dim as f64 - 2.0;
        -nm2 * r * a.powf(nm2 / 2.0) * (a + r * r).powf(-(self.dim as f64) / 2.0)
    }

    /// Samples of `U` on a grid.
    pub fn profile(&self, grid: &Arc<RadialGrid>) -> RadialProfile {
        RadialProfile {
            grid: Arc::clone(grid),
            values: grid.nodes().iter().map(|&r| self.value(r)).collect(),
        }
    }

    /// Potential `p_S U^{p_S - 1}` of the linearized critical operator.
    pub fn linearized_potential(&self, grid: &Arc<RadialGrid>) -> RadialProfile {
        let p_s = critical_exponent(self.dim);
        RadialProfile {
            grid: Arc::clone(grid),
            values: grid.nodes().iter().map(|&r| p_s * self.value(r).powf(p_s - 1.0)).collect(),
        }
    }
}

/// `U(r)` for the limit profile in dimension `n > 2`.
pub fn bubble_value(dim: usize, r: f64) -> Result<f64> {
    Ok(LimitBubble::new(dim)?.value(r))
}

/// Closed-form best Sobolev constant `S = π n(n-2) (Γ(n/2)/Γ(n))^{2/n}`.
pub fn sobolev_constant_closed_form(dim: usize) -> Result<f64> {
    require_supercritical_dim(dim)?;
    let n = dim as f64;
    let g_half = crate::grid::gamma_half(dim);
    let g_full = crate::grid::gamma_half(2 * dim);
    Ok(std::f64::consts::PI * n * (n - 2.0) * (g_half / g_full).powf(2.0 / n))
}

/// `S^{n/2}` from the closed form; equals `∫|∇U|² = ∫U^{2n/(n-2)}`.
pub fn sobolev_level_closed_form(dim: usize) -> Result<f64> {
    Ok(sobolev_constant_closed_form(dim)?.powf(dim as f64 / 2.0))
}

/// Quadrature routes to `S^{n/2}` with their asymptotic tail corrections.
#[derive(Debug, Clone, Copy)]
pub struct SobolevLevels {
    /// `∫ U^{2n/(n-2)} dx` over the truncated ball plus tail.
    pub mass_route: f64,
    /// `∫ |∇U|² dx` over the truncated ball plus tail.
    pub gradient_route: f64,
    /// Γ-formula value.
    pub closed_form: f64,
}

impl SobolevLevels {
    /// Largest pairwise relative deviation among the three routes.
    pub fn max_relative_deviation(&self) -> f64 {
        let vals = [self.mass_route, self.gradient_route, self.closed_form];
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in i + 1..3 {
                worst = worst.max((vals[i] - vals[j]).abs() / vals[j].abs());
            }
        }
        worst
    }
}

/// `S^{n/2}` by quadrature of the critical mass of `U` over `[0, R]` with a
/// two-term closed-form tail from `U ~ (n(n-2))^{(n-2)/2} r^{2-n}`, plus the
/// independent gradient route and the Γ closed form.
pub fn sobolev_level(dim: usize, trunc_radius: f64, n_nodes: usize) -> Result<SobolevLevels> {
    let bubble = LimitBubble::new(dim)?;
    let grid = Arc::new(RadialGrid::build_graded_mesh(n_nodes, trunc_radius, dim, 1.0)?);
    let n = dim as f64;
    let a = bubble.length_sq();
    let omega = sphere_area(dim);
    let r = trunc_radius;

    let p_crit_mass = 2.0 * n / (n - 2.0);
    let mass_profile = RadialProfile {
        grid: Arc::clone(&grid),
        values: grid.nodes().iter().map(|&x| bubble.value(x).powf(p_crit_mass)).collect(),
    };
    // U^{2n/(n-2)} r^{n-1} = a^n r^{-n-1} (1 + a/r²)^{-n}
    let mass_tail = omega
        * a.powf(n)
        * (r.powf(-n) / n - n * a * r.powf(-n - 2.0) / (n + 2.0));
    let mass_route = integrate_radial(&mass_profile) + mass_tail;

    let grad_profile = RadialProfile {
        grid: Arc::clone(&grid),
        values: grid.nodes().iter().map(|&x| bubble.deriv(x).powi(2)).collect(),
    };
    // U'(r)² r^{n-1} = (n-2)² a^{n-2} r^{1-n} (1 + a/r²)^{-n}
    let grad_tail = omega
        * (n - 2.0).powi(2)
        * a.powf(n - 2.0)
        * (r.powf(2.0 - n) / (n - 2.0) - a * r.powf(-n));
    let gradient_route = integrate_radial(&grad_profile) + grad_tail;

    Ok(SobolevLevels { mass_route, gradient_route, closed_form: sobolev_level_closed_form(dim)? })
}

/// Discrete Rayleigh value `∫ |∇v|² - p_S U^{p_S-1} v² dx` of the linearized
/// critical operator at `v` (no normalization).
pub fn rayleigh(v: &RadialProfile) -> Result<f64> {
    let bubble = LimitBubble::new(v.grid.dim())?;
    let potential = bubble.linearized_potential(&v.grid);
    Ok(RadialOperator::new(&potential).quadratic_form(v))
}

/// First eigenpair of the truncated linearized critical operator.
#[derive(Debug, Clone)]
pub struct LimitEigenpair {
    pub lambda_star: f64,
    pub phi_star: RadialProfile,
    pub trunc_radius: f64,
    pub extrapolated: bool,
}

impl LimitEigenpair {
    /// `∫ U^{p_S} φ1* dx`, the strictly positive overlap the rescaled
    /// criterion integral converges to.
    pub fn bubble_overlap(&self) -> f64 {
        let bubble = LimitBubble::new(self.phi_star.grid.dim()).expect("dim checked at build");
        let p_s = critical_exponent(self.phi_star.grid.dim());
        let overlap = RadialProfile {
            grid: Arc::clone(&self.phi_star.grid),
            values: self
                .phi_star
                .grid
                .nodes()
                .iter()
                .zip(self.phi_star.values.iter())
                .map(|(&r, &phi)| bubble.value(r).powf(p_s) * phi)
                .collect(),
        };
        integrate_radial(&overlap)
    }
}

/// Smallest eigenpair of `L* = -Δ - p_S U^{p_S-1}` on `[0, trunc_radius]`
/// with a Dirichlet condition at the truncation radius.
pub fn limit_eigenpair(dim: usize, trunc_radius: f64, n_nodes: usize) -> Result<LimitEigenpair> {
    require_supercritical_dim(dim)?;
    if trunc_radius < 20.0 {
        return Err(CoreError::invalid(format!(
            "trunc_radius = {trunc_radius} must be at least 20"
        )));
    }
    let bubble = LimitBubble::new(dim)?;
    let grid = Arc::new(RadialGrid::build_graded_mesh(n_nodes, trunc_radius, dim, 1.0)?);
    let op = RadialOperator::new(&bubble.linearized_potential(&grid));
    let eig = op.smallest_eigenpair(EigenOptions::default())?;
    Ok(LimitEigenpair {
        lambda_star: eig.lambda,
        phi_star: eig.phi,
        trunc_radius,
        extrapolated: false,
    })
}

/// Reference eigenpair with Aitken extrapolation over the truncation radii
/// `{R, 1.5R, 2R}` (node counts scaled to keep the near-origin spacing
/// fixed, so the radius sequence isolates the truncation error).
pub fn limit_eigenpair_extrapolated(
    dim: usize,
    base_radius: f64,
    n_nodes: usize,
) -> Result<LimitEigenpair> {
    let radii = [base_radius, 1.5 * base_radius, 2.0 * base_radius];
    let mut lambdas = [0.0; 3];
    let mut last = None;
    for (k, &radius) in radii.iter().enumerate() {
        let scaled_nodes =
            ((n_nodes as f64) * (radius / base_radius).sqrt()).round() as usize | 1;
        let eig = limit_eigenpair(dim, radius, scaled_nodes)?;
        lambdas[k] = eig.lambda_star;
        last = Some(eig);
    }
    let mut eig = last.unwrap();
    let d1 = lambdas[1] - lambdas[0];
    let d2 = lambdas[2] - lambdas[1];
    let denom = d2 - d1;
    if denom.abs() > 1e3 * f64::EPSILON * lambdas[2].abs() {
        let aitken = lambdas[2] - d2 * d2 / denom;
        // truncation converges super-geometrically; accept only a contraction
        if (aitken - lambdas[2]).abs() <= d2.abs() {
            eig.lambda_star = aitken;
        }
    }
    eig.extrapolated = true;
    Ok(eig)
}

/// Rayleigh value of a compactly truncated, L²-normalized copy of `U`
/// (cutoff at `cut`, sampled on the grid of radius `2 cut`); strictly
/// negative for large enough `cut`, which realizes the sign of `λ1*`
/// inside the admissible class even when `U` itself is not square-integrable.
pub fn rayleigh_of_truncated_bubble(dim: usize, cut: f64, n_nodes: usize) -> Result<f64> {
    let bubble = LimitBubble::new(dim)?;
    let grid = Arc::new(RadialGrid::build_graded_mesh(n_nodes, 2.0 * cut, dim, 0.0)?);
    // C¹ cutoff: 1 on [0, cut/2], smooth fall to 0 at cut
    let cutoff = |r: f64| -> f64 {
        if r <= 0.5 * cut {
            1.0
        } else if r >= cut {
            0.0
        } else {
            let s = (r - 0.5 * cut) / (0.5 * cut);
            0.5 * (1.0 + (std::f64::consts::PI * s).cos())
        }
    };
    let v = RadialProfile {
        grid: Arc::clone(&grid),
        values: grid.nodes().iter().map(|&r| bubble.value(r) * cutoff(r)).collect(),
    };
    let norm2 = integrate_radial(&RadialProfile {
        grid: Arc::clone(&grid),
        values: v.values.iter().map(|x| x * x).collect(),
    });
    let val = rayleigh(&v)?;
    Ok(val / norm2)
}

/// Per-dimension summary emitted by the `limit` CLI subcommand.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LimitSummary {
    pub dim: usize,
    pub trunc_radius: f64,
    pub n_nodes: usize,
    pub lambda_star: f64,
    pub sobolev_level: f64,
    pub derrick_residual: f64,
}

/// Compute the `limit` summary row for one dimension.
pub fn limit_summary(dim: usize, trunc_radius: f64, n_nodes: usize) -> Result<LimitSummary> {
    let eig = limit_eigenpair(dim, trunc_radius, n_nodes)?;
    let levels = sobolev_level(dim, trunc_radius.max(DEFAULT_TRUNC_RADIUS), DEFAULT_TRUNC_NODES)?;
    Ok(LimitSummary {
        dim,
        trunc_radius,
        n_nodes,
        lambda_star: eig.lambda_star,
        sobolev_level: levels.mass_route,
        derrick_residual: levels.max_relative_deviation(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::dirichlet_energy;
    use approx::assert_relative_eq;

    #[test]
    fn bubble_point_values() {
        for n in 3..=6 {
            assert_eq!(bubble_value(n, 0.0).unwrap(), 1.0);
        }
        assert_relative_eq!(bubble_value(4, 8.0_f64.sqrt()).unwrap(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(
            bubble_value(3, 3.0_f64.sqrt()).unwrap(),
            0.5_f64.sqrt(),
            epsilon = 1e-14
        );
        assert!(bubble_value(2, 1.0).is_err());
        assert!(bubble_value(1, 1.0).is_err());
    }

    /// High-order finite-difference oracle for `ΔU + U^{p_S}`: fourth-order
    /// central stencils, independent of the closed-form derivative.
    fn ode_residual_fd(n: usize, r: f64) -> f64 {
        let b = LimitBubble::new(n).unwrap();
        let p_s = critical_exponent(n);
        let h = 1e-2 * (1.0 + r / 10.0);
        let u = |x: f64| b.value(x.abs()); // even extension through 0
        let d1 = (u(r - 2.0 * h) - 8.0 * u(r - h) + 8.0 * u(r + h) - u(r + 2.0 * h)) / (12.0 * h);
        let d2 = (-u(r - 2.0 * h) + 16.0 * u(r - h) - 30.0 * u(r)
            + 16.0 * u(r + h)
            - u(r + 2.0 * h))
            / (12.0 * h * h);
        let lap = if r == 0.0 { n as f64 * d2 } else { d2 + (n as f64 - 1.0) / r * d1 };
        lap + u(r).powf(p_s)
    }

    #[test]
    fn bubble_satisfies_critical_equation() {
        for n in 3..=6 {
            let mut worst = 0.0_f64;
            for k in 0..=500 {
                let r = 50.0 * k as f64 / 500.0;
                worst = worst.max(ode_residual_fd(n, r).abs());
            }
            assert!(worst < 1e-8, "n={n}: residual {worst}");
        }
    }

    #[test]
    fn closed_form_derivative_matches_fd() {
        let b = LimitBubble::new(5).unwrap();
        for k in 1..40 {
            let r = k as f64 * 0.5;
            let h = 1e-3;
            let fd = (b.value(r - 2.0 * h) - 8.0 * b.value(r - h) + 8.0 * b.value(r + h)
                - b.value(r + 2.0 * h))
                / (12.0 * h);
            assert_relative_eq!(b.deriv(r), fd, max_relative = 1e-9);
        }
    }

    #[test]
    fn sobolev_levels_agree_with_gamma_formula() {
        for n in 3..=5 {
            let levels = sobolev_level(n, DEFAULT_TRUNC_RADIUS, DEFAULT_TRUNC_NODES).unwrap();
            assert!(
                levels.max_relative_deviation() < 1e-5,
                "n={n}: {:?} deviation {}",
                levels,
                levels.max_relative_deviation()
            );
        }
        // spot value: S(4) = 8π/√6
        let s4 = sobolev_constant_closed_form(4).unwrap();
        assert_relative_eq!(
            s4,
            8.0 * std::f64::consts::PI / 6.0_f64.sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn rayleigh_zero_on_zero_function() {
        let grid = Arc::new(RadialGrid::build_graded_mesh(257, 30.0, 5, 1.0).unwrap());
        let z = RadialProfile::zeros(grid);
        assert_eq!(rayleigh(&z).unwrap(), 0.0);
    }

    #[test]
    fn rayleigh_of_bubble_matches_two_quadrature_route() {
        // n = 5 so that U ∈ L²; ℛ(U) = (1 - p_S) ∫|∇U|² modulo truncation.
        // The cross-check integrates |∇U|² and p_S U^{p_S+1} independently
        // (closed-form integrands, not the discrete difference form) over
        // the same truncated ball.
        let grid = Arc::new(RadialGrid::build_graded_mesh(32_769, 100.0, 5, 1.0).unwrap());
        let b = LimitBubble::new(5).unwrap();
        let p_s = critical_exponent(5);
        let u = b.profile(&grid);
        let val = rayleigh(&u).unwrap();
        let grad_quad = integrate_radial(
            &RadialProfile::from_fn(Arc::clone(&grid), |r| b.deriv(r).powi(2)).unwrap(),
        );
        let mass_quad = integrate_radial(
            &RadialProfile::from_fn(Arc::clone(&grid), |r| b.value(r).powf(p_s + 1.0)).unwrap(),
        );
        let expected = grad_quad - p_s * mass_quad;
        assert!(val < 0.0);
        assert_relative_eq!(val, expected, max_relative = 1e-4);
        // and the Derrick identity makes that (1 - p_S)∫|∇U|² up to tails
        let levels = sobolev_level(5, DEFAULT_TRUNC_RADIUS, DEFAULT_TRUNC_NODES).unwrap();
        assert_relative_eq!(val, (1.0 - p_s) * levels.gradient_route, max_relative = 3e-3);
    }

    #[test]
    fn rayleigh_positive_without_potential() {
        let grid = Arc::new(RadialGrid::build_graded_mesh(257, 20.0, 3, 0.0).unwrap());
        let v = RadialProfile::from_fn(Arc::clone(&grid), |r| {
            let x = std::f64::consts::PI * r / 20.0;
            if r == 0.0 {
                1.0
            } else {
                x.sin() / x
            }
        })
        .unwrap();
        assert!(dirichlet_energy(&v) > 0.0);
    }

    #[test]
    fn truncated_normalized_bubbles_witness_negativity() {
        for n in 3..=4 {
            let val = rayleigh_of_truncated_bubble(n, 20.0, 4097).unwrap();
            assert!(val < 0.0, "n={n}: {val}");
        }
    }

    #[test]
    fn limit_eigenpair_negative_monotone_and_consistent() {
        let mut prev = f64::INFINITY;
        for radius in [20.0, 50.0, 100.0] {
            let eig = limit_eigenpair(3, radius, 4097).unwrap();
            assert!(eig.lambda_star < 0.0);
            assert!(eig.lambda_star <= prev + 1e-10, "not monotone at R={radius}");
            prev = eig.lambda_star;
            // Rayleigh functional evaluated on φ* reproduces λ*
            let r_val = rayleigh(&eig.phi_star).unwrap();
            assert_relative_eq!(r_val, eig.lambda_star, max_relative = 1e-8);
        }
    }

    #[test]
    fn limit_eigenfunction_radially_nonincreasing() {
        let eig = limit_eigenpair(4, 50.0, 4097).unwrap();
        let v = &eig.phi_star.values;
        for i in 0..v.len() - 1 {
            assert!(v[i + 1] <= v[i] + 1e-12 * v[0], "increase at node {i}");
        }
        assert!(v[0] > 0.0);
    }

    #[test]
    fn two_radius_report_is_tight() {
        let a = limit_eigenpair(3, 50.0, 2049).unwrap();
        let b = limit_eigenpair(3, 100.0, 2899).unwrap();
        assert!(a.lambda_star < 0.0 && b.lambda_star < 0.0);
        assert!((a.lambda_star - b.lambda_star).abs() < 5e-3 * a.lambda_star.abs());
        let ext = limit_eigenpair_extrapolated(3, 50.0, 2049).unwrap();
        assert!(ext.extrapolated);
        assert!((ext.lambda_star - b.lambda_star).abs() < 5e-3 * b.lambda_star.abs());
    }

    #[test]
    fn rejects_small_truncation_radius() {
        assert!(limit_eigenpair(3, 10.0, 2049).is_err());
    }
}
