//! Radial meshes, quadrature for n-dimensional radial integrals,
//! differentiation stencils and interpolation shared by all solvers.
//!
//! A profile `f` on the grid represents the radial function `f(|x|)` on the
//! ball of radius `r_max` in `R^n`. Integrals are taken with the volume
//! element `ω_{n-1} r^{n-1} dr`; the quadrature assigns every node the exact
//! volume of its dual cell (bounded by interval midpoints), which makes the
//! rule exact for constants and keeps the flux-form Laplacian symmetric with
//! respect to the induced inner product.

use std::sync::Arc;

use crate::error::CoreError;
use crate::Result;

/// Minimum node count accepted for solver-facing grids.
pub const MIN_NODES: usize = 65;

/// Surface area of the unit sphere `S^{n-1}`, i.e. `2 π^{n/2} / Γ(n/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma_half(dim)
}

/// `Γ(k/2)` for integer `k >= 1`, by the half-integer closed forms.
pub fn gamma_half(k: usize) -> f64 {
    assert!(k >= 1, "gamma_half needs k >= 1");
    if k % 2 == 0 {
        // Γ(m) = (m-1)! with m = k/2
        (1..k / 2).map(|j| j as f64).product()
    } else {
        // Γ(1/2) = sqrt(pi), then Γ(x+1) = x Γ(x)
        let mut g = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        while x + 1.0 <= k as f64 / 2.0 + 1e-12 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Graded 1-D mesh on `[0, r_max]` carrying the spatial dimension and the
/// dual-cell quadrature data.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    dim: usize,
    cluster_strength: f64,
    /// Interval midpoints `r_{i+1/2}`, length `N-1`.
    edge_mid: Vec<f64>,
    /// Interval lengths `h_i`, length `N-1`.
    spacing: Vec<f64>,
    /// Flux areas `ω r_{i+1/2}^{n-1}` at interval midpoints, length `N-1`.
    edge_area: Vec<f64>,
    /// Dual-cell volumes (with the `ω` factor), length `N`.
    cell_volume: Vec<f64>,
}

impl RadialGrid {
    /// Graded mesh `r_i = r_max (i/N)^{1+cluster_strength}`.
    ///
    /// `cluster_strength = 0` is uniform; larger values concentrate nodes near
    /// the origin, where the solutions of interest concentrate.
    pub fn build_graded_mesh(
        n_nodes: usize,
        r_max: f64,
        dim: usize,
        cluster_strength: f64,
    ) -> Result<Self> {
        if n_nodes < MIN_NODES {
            return Err(CoreError::invalid(format!(
                "n_nodes = {n_nodes} below minimum {MIN_NODES}"
            )));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(CoreError::invalid(format!("r_max = {r_max} must be positive")));
        }
        if !(cluster_strength >= 0.0) {
            return Err(CoreError::invalid("cluster_strength must be >= 0"));
        }
        if dim == 0 {
            return Err(CoreError::invalid("dim must be >= 1"));
        }
        let big_n = (n_nodes - 1) as f64;
        let expo = 1.0 + cluster_strength;
        let mut nodes: Vec<f64> = (0..n_nodes)
            .map(|i| r_max * (i as f64 / big_n).powf(expo))
            .collect();
        nodes[0] = 0.0;
        *nodes.last_mut().unwrap() = r_max;
        Self::from_nodes(nodes, dim, cluster_strength)
    }

    /// Build a grid from explicit nodes (strictly increasing, starting at 0).
    pub fn from_nodes(nodes: Vec<f64>, dim: usize, cluster_strength: f64) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(CoreError::invalid("grid needs at least 3 nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(CoreError::invalid("first node must be 0"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CoreError::invalid("nodes must be strictly increasing"));
        }
        if nodes.iter().any(|r| !r.is_finite()) {
            return Err(CoreError::NonFinite("grid nodes"));
        }
        let n = nodes.len();
        let omega = sphere_area(dim);
        let nd = dim as f64;
        let edge_mid: Vec<f64> = (0..n - 1).map(|i| 0.5 * (nodes[i] + nodes[i + 1])).collect();
        let spacing: Vec<f64> = (0..n - 1).map(|i| nodes[i + 1] - nodes[i]).collect();
        let edge_area: Vec<f64> =
            edge_mid.iter().map(|&m| omega * m.powi(dim as i32 - 1)).collect();
        let mut cell_volume = Vec::with_capacity(n);
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { edge_mid[i - 1] };
            let right = if i == n - 1 { nodes[n - 1] } else { edge_mid[i] };
            cell_volume.push(omega * (right.powf(nd) - left.powf(nd)) / nd);
        }
        Ok(RadialGrid { nodes, dim, cluster_strength, edge_mid, spacing, edge_area, cell_volume })
    }

    /// Same grading with every interval split into `factor` equal pieces.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        assert!(factor >= 2);
        let mut nodes = Vec::with_capacity((self.nodes.len() - 1) * factor + 1);
        for i in 0..self.nodes.len() - 1 {
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            for j in 0..factor {
                nodes.push(a + (b - a) * j as f64 / factor as f64);
            }
        }
        nodes.push(*self.nodes.last().unwrap());
        Self::from_nodes(nodes, self.dim, self.cluster_strength)
    }

    /// Every other node (last node kept); used for Richardson error estimates.
    pub fn coarsened_by_two(&self) -> Result<Self> {
        let n = self.nodes.len();
        let mut nodes: Vec<f64> = self.nodes.iter().copied().step_by(2).collect();
        if (n - 1) % 2 != 0 {
            nodes.push(self.nodes[n - 1]);
        }
        Self::from_nodes(nodes, self.dim, self.cluster_strength)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn cluster_strength(&self) -> f64 {
        self.cluster_strength
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn edge_area(&self) -> &[f64] {
        &self.edge_area
    }

    pub fn cell_volume(&self) -> &[f64] {
        &self.cell_volume
    }

    /// Index of the last node `<= r` (clamped to a valid interval start).
    fn interval_of(&self, r: f64) -> usize {
        match self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(self.nodes.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.nodes.len() - 2),
        }
    }
}

/// Node samples of a radial function on a shared grid.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::invalid(format!(
                "profile has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("profile values"));
        }
        Ok(RadialProfile { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialProfile { grid, values: vec![0.0; n] }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// `ω_{n-1} ∫_0^{r_max} f(r) r^{n-1} dr` by the dual-cell rule.
///
/// Exact for constants; second order for smooth integrands on smoothly
/// graded meshes.
pub fn integrate_radial(f: &RadialProfile) -> f64 {
    f.values.iter().zip(f.grid.cell_volume().iter()).map(|(v, w)| v * w).sum()
}

/// Weighted inner product `ω ∫ f g r^{n-1} dr` of two profiles on one grid.
pub fn inner_product(f: &RadialProfile, g: &RadialProfile) -> f64 {
    assert_eq!(f.grid.len(), g.grid.len(), "profiles on different grids");
    f.values
        .iter()
        .zip(g.values.iter())
        .zip(f.grid.cell_volume().iter())
        .map(|((a, b), w)| a * b * w)
        .sum()
}

/// Restriction of [`integrate_radial`] to the radial window `[a, b]`,
/// integrating the same piecewise-constant dual-cell reconstruction.
pub fn integrate_radial_between(f: &RadialProfile, a: f64, b: f64) -> Result<f64> {
    let grid = &f.grid;
    let r_max = grid.r_max();
    if !(0.0..=r_max).contains(&a) || !(0.0..=r_max).contains(&b) || a > b {
        return Err(CoreError::invalid(format!("bad window [{a}, {b}] on [0, {r_max}]")));
    }
    let omega = sphere_area(grid.dim());
    let nd = grid.dim() as f64;
    let n = grid.len();
    let mut total = 0.0;
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { grid.edge_mid[i - 1] };
        let right = if i == n - 1 { r_max } else { grid.edge_mid[i] };
        let lo = left.max(a);
        let hi = right.min(b);
        if hi > lo {
            total += f.values[i] * omega * (hi.powf(nd) - lo.powf(nd)) / nd;
        }
    }
    Ok(total)
}

/// Discrete Dirichlet energy `ω ∫ f'(r)^2 r^{n-1} dr` in the flux form
/// matching [`radial_laplacian_apply`].
pub fn dirichlet_energy(f: &RadialProfile) -> f64 {
    let grid = &f.grid;
    let mut e = 0.0;
    for i in 0..grid.len() - 1 {
        let df = (f.values[i + 1] - f.values[i]) / grid.spacing[i];
        e += grid.edge_area[i] * df * df * grid.spacing[i];
    }
    e
}

/// Second-order discretization of `Δf = f'' + (n-1)/r f'` for radial `f`.
///
/// Interior nodes use the conservative flux form; the coordinate singularity
/// at `r = 0` reduces to the symmetric limit `n f''(0)`. The outer node is a
/// one-sided quadratic stencil so the result is defined at every node.
pub fn radial_laplacian_apply(f: &RadialProfile) -> RadialProfile {
    let grid = &f.grid;
    let n = grid.len();
    let v = &f.values;
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let flux_r = grid.edge_area[i] * (v[i + 1] - v[i]) / grid.spacing[i];
        let flux_l = if i == 0 {
            0.0
        } else {
            grid.edge_area[i - 1] * (v[i] - v[i - 1]) / grid.spacing[i - 1]
        };
        out[i] = (flux_r - flux_l) / grid.cell_volume[i];
    }
    // One-sided cubic at the boundary node, second order there too.
    let t = grid.nodes[n - 1];
    let xs = [grid.nodes[n - 4], grid.nodes[n - 3], grid.nodes[n - 2], t];
    let mut fp = 0.0;
    let mut fpp = 0.0;
    for k in 0..4 {
        let others: Vec<f64> = (0..4).filter(|&j| j != k).map(|j| xs[j]).collect();
        let denom: f64 = others.iter().map(|&o| xs[k] - o).product();
        let (o1, o2, o3) = (others[0], others[1], others[2]);
        let d1 = ((t - o2) * (t - o3) + (t - o1) * (t - o3) + (t - o1) * (t - o2)) / denom;
        let d2 = 2.0 * ((t - o1) + (t - o2) + (t - o3)) / denom;
        fp += d1 * v[n - 4 + k];
        fpp += d2 * v[n - 4 + k];
    }
    out[n - 1] = fpp + (grid.dim() as f64 - 1.0) / t * fp;
    RadialProfile { grid: Arc::clone(&f.grid), values: out }
}

/// Piecewise-cubic Lagrange interpolation (4-point sliding window), exact at
/// nodes and for polynomials up to degree 3.
pub fn interpolate(f: &RadialProfile, r: f64) -> Result<f64> {
    let grid = &f.grid;
    let r_max = grid.r_max();
    if !r.is_finite() || r < 0.0 || r > r_max {
        return Err(CoreError::OutOfDomain { point: r, r_max });
    }
    let n = grid.len();
    let i = grid.interval_of(r);
    let j = i.saturating_sub(1).min(n - 4);
    let xs = &grid.nodes[j..j + 4];
    let ys = &f.values[j..j + 4];
    // Second barycentric form; robust on strongly graded windows.
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..4 {
        let d = r - xs[k];
        if d == 0.0 {
            return Ok(ys[k]);
        }
        let mut w = 1.0;
        for l in 0..4 {
            if l != k {
                w /= xs[k] - xs[l];
            }
        }
        num += w * ys[k] / d;
        den += w / d;
    }
    Ok(num / den)
}

/// Resample a profile onto another grid with the same dimension.
pub fn resample(f: &RadialProfile, target: &Arc<RadialGrid>) -> Result<RadialProfile> {
    let r_max = f.grid.r_max();
    let values: Result<Vec<f64>> = target
        .nodes()
        .iter()
        .map(|&r| if r > r_max { Ok(0.0) } else { interpolate(f, r) })
        .collect();
    RadialProfile::new(Arc::clone(target), values?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize, r_max: f64, dim: usize, gamma: f64) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::build_graded_mesh(n, r_max, dim, gamma).unwrap())
    }

    #[test]
    fn uniform_mesh_spacing() {
        let g = grid(65, 1.0, 3, 0.0);
        for h in g.spacing() {
            assert_relative_eq!(*h, 1.0 / 64.0, max_relative = 1e-13);
        }
        let g = grid(65, 50.0, 3, 0.0);
        assert_relative_eq!(g.nodes()[32], 25.0, epsilon = 1e-12);
    }

    #[test]
    fn clustered_mesh_concentrates_at_origin() {
        let g = grid(129, 1.0, 4, 2.0);
        assert!(g.spacing()[0] < 1.0 / 128.0);
        assert!(g.spacing()[0] < g.spacing()[127]);
    }

    #[test]
    fn rejects_bad_mesh_parameters() {
        assert!(RadialGrid::build_graded_mesh(64, 1.0, 3, 0.0).is_err());
        assert!(RadialGrid::build_graded_mesh(65, 0.0, 3, 0.0).is_err());
        assert!(RadialGrid::build_graded_mesh(65, -1.0, 3, 0.0).is_err());
    }

    #[test]
    fn ball_volume_exact() {
        let g = grid(65, 1.0, 3, 0.0);
        let one = RadialProfile::from_fn(Arc::clone(&g), |_| 1.0).unwrap();
        assert_relative_eq!(integrate_radial(&one), 4.0 * PI / 3.0, epsilon = 1e-10);
        let zero = RadialProfile::zeros(g);
        assert_eq!(integrate_radial(&zero), 0.0);
    }

    #[test]
    fn quadratic_moment_converges() {
        // ∫_B r^2 dx = 4π/5 in n = 3.
        let exact = 4.0 * PI / 5.0;
        let mut errs = Vec::new();
        for n in [129usize, 257, 513] {
            let g = grid(n, 1.0, 3, 0.0);
            let f = RadialProfile::from_fn(g, |r| r * r).unwrap();
            errs.push((integrate_radial(&f) - exact).abs());
        }
        assert!(errs[2] < 1e-5);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
    }

    #[test]
    fn quadrature_order_on_gaussian() {
        let exact_f = |n: usize, g: &Arc<RadialGrid>| {
            // reference by very fine Simpson on f r^{n-1}
            let m = 400_000;
            let h = g.r_max() / m as f64;
            let integrand = |r: f64| (-r * r).exp() * r.powi(n as i32 - 1);
            let mut s = integrand(0.0) + integrand(g.r_max());
            for j in 1..m {
                s += integrand(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            sphere_area(n) * s * h / 3.0
        };
        for gamma in [0.0, 1.0] {
            let mut errs = Vec::new();
            for n_nodes in [129usize, 257, 513] {
                let g = grid(n_nodes, 3.0, 3, gamma);
                let f = RadialProfile::from_fn(Arc::clone(&g), |r| (-r * r).exp()).unwrap();
                errs.push((integrate_radial(&f) - exact_f(3, &g)).abs());
            }
            assert!(errs[0] / errs[1] >= 3.5, "gamma={gamma}: {errs:?}");
            assert!(errs[1] / errs[2] >= 3.5, "gamma={gamma}: {errs:?}");
        }
    }

    #[test]
    fn between_windows_add_up() {
        let g = grid(257, 1.0, 4, 1.0);
        let f = RadialProfile::from_fn(g, |r| (3.0 * r).cos()).unwrap();
        let whole = integrate_radial(&f);
        let a = integrate_radial_between(&f, 0.0, 0.37).unwrap();
        let b = integrate_radial_between(&f, 0.37, 1.0).unwrap();
        assert_relative_eq!(a + b, whole, max_relative = 1e-13);
        assert!(integrate_radial_between(&f, 0.5, 0.2).is_err());
        assert!(integrate_radial_between(&f, -0.1, 0.2).is_err());
    }

    #[test]
    fn laplacian_exact_on_parabola() {
        for gamma in [0.0, 1.0, 2.0] {
            let g = grid(129, 1.0, 3, gamma);
            let f = RadialProfile::from_fn(Arc::clone(&g), |r| 1.0 - r * r).unwrap();
            let lap = radial_laplacian_apply(&f);
            for v in &lap.values {
                assert_relative_eq!(*v, -6.0, epsilon = 1e-8);
            }
            let c = RadialProfile::from_fn(g, |_| 4.2).unwrap();
            let lap = radial_laplacian_apply(&c);
            for v in &lap.values {
                assert!(v.abs() < 1e-9, "constant not harmonic: {v}");
            }
        }
    }

    #[test]
    fn laplacian_eigenfunction_of_ball() {
        // Δ (sin(πr)/r) = -π² sin(πr)/r in n = 3.
        let mut errs = Vec::new();
        for n_nodes in [257usize, 513, 1025] {
            let g = grid(n_nodes, 1.0, 3, 0.0);
            let f = RadialProfile::from_fn(Arc::clone(&g), |r| {
                if r == 0.0 {
                    PI
                } else {
                    (PI * r).sin() / r
                }
            })
            .unwrap();
            let lap = radial_laplacian_apply(&f);
            let err = lap
                .values
                .iter()
                .zip(f.values.iter())
                .map(|(l, v)| (l + PI * PI * v).abs())
                .fold(0.0_f64, f64::max);
            errs.push(err);
        }
        assert!(errs[2] < 2e-3);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5);
    }

    #[test]
    fn laplacian_symmetric_in_quadrature_inner_product() {
        let g = grid(301, 1.0, 3, 1.0);
        let f = RadialProfile::from_fn(Arc::clone(&g), |r| (1.0 - r) * (2.0 * r).cos()).unwrap();
        let h = RadialProfile::from_fn(Arc::clone(&g), |r| (1.0 - r * r) * (1.3 * r).sin_cos().0)
            .unwrap();
        // both vanish at r_max = 1 by construction
        let lf = radial_laplacian_apply(&f);
        let lh = radial_laplacian_apply(&h);
        let a = inner_product(&lf, &h);
        let b = inner_product(&f, &lh);
        let scale = a.abs().max(b.abs());
        assert!((a - b).abs() <= 1e-10 * scale, "asymmetry {} vs {}", a, b);
    }

    #[test]
    fn interpolation_polynomial_reproduction() {
        let g = grid(129, 2.0, 3, 1.0);
        let f = RadialProfile::from_fn(Arc::clone(&g), |r| {
            0.5 - 1.3 * r + 0.25 * r * r + 2.0 * r * r * r
        })
        .unwrap();
        for k in 0..400 {
            let r = 2.0 * k as f64 / 399.0;
            let exact = 0.5 - 1.3 * r + 0.25 * r * r + 2.0 * r * r * r;
            let got = interpolate(&f, r).unwrap();
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "r={r}");
        }
        // nodal exactness
        for (i, &r) in g.nodes().iter().enumerate() {
            assert_eq!(interpolate(&f, r).unwrap(), f.values[i]);
        }
        assert!(interpolate(&f, -0.01).is_err());
        assert!(interpolate(&f, 2.01).is_err());
    }

    #[test]
    fn cubic_error_small_on_fine_mesh() {
        let g = grid(1025, 1.0, 3, 0.0);
        let f = RadialProfile::from_fn(Arc::clone(&g), |r| r.powi(3)).unwrap();
        let mut worst = 0.0_f64;
        for k in 0..2000 {
            let r = k as f64 / 1999.0;
            worst = worst.max((interpolate(&f, r).unwrap() - r.powi(3)).abs());
        }
        assert!(worst < 1e-6, "max err {worst}");
    }

    #[test]
    fn sphere_areas_match_known_values() {
        assert_relative_eq!(sphere_area(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(sphere_area(2), 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, epsilon = 1e-13);
        assert_relative_eq!(sphere_area(6), PI.powi(3), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn quadrature_is_monotone_and_linear(
            gamma in 0.0f64..2.5,
            scale in 0.1f64..5.0,
        ) {
            let g = grid(129, scale, 3, gamma);
            let f = RadialProfile::from_fn(Arc::clone(&g), |r| 1.0 + (2.0 * r).sin().abs()).unwrap();
            let k = 1.7;
            let kf = RadialProfile::new(
                Arc::clone(&g),
                f.values.iter().map(|v| k * v).collect(),
            ).unwrap();
            let a = integrate_radial(&f);
            let b = integrate_radial(&kf);
            prop_assert!(a > 0.0);
            prop_assert!((b - k * a).abs() <= 1e-12 * b.abs());
        }

        #[test]
        fn interval_lookup_brackets_point(r in 0.0f64..1.0) {
            let g = grid(97, 1.0, 3, 1.3);
            let i = g.interval_of(r);
            prop_assert!(g.nodes()[i] <= r + 1e-15);
            prop_assert!(r <= g.nodes()[i + 1] + 1e-15);
        }
    }
}
