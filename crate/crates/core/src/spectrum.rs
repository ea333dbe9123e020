//! First eigenpair of the linearized operator `L_p = -Δ - p|u_p|^{p-1}` at a
//! stationary solution, the blow-up rescaling of the eigenpair, and the
//! convergence study of the rescaled spectrum toward the limit eigenpair.

use std::sync::Arc;

use crate::error::CoreError;
use crate::grid::{
    dirichlet_energy, integrate_radial, integrate_radial_between, resample, RadialGrid,
    RadialProfile,
};
use crate::limit::{limit_eigenpair_extrapolated, LimitEigenpair};
use crate::operator::{EigenOptions, RadialOperator};
use crate::stationary::{knodal_solution, ProblemParams, StationarySolution};
use crate::Result;

/// First eigenpair `(λ_{1,p}, φ_{1,p})` of the linearized operator.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Positive eigenfunction, zero at `r = 1`, `∫ φ² dx = 1`.
    pub phi: RadialProfile,
    pub iterations: usize,
    /// Weighted-norm operator residual relative to `max(1, |λ|)`.
    pub residual: f64,
}

/// Potential and flux discretization of `L_p` on the solution's grid,
/// symmetric with respect to the quadrature inner product.
pub fn assemble_linearized(sol: &StationarySolution) -> RadialOperator {
    let p = sol.params.p;
    let potential = RadialProfile {
        grid: Arc::clone(&sol.profile.grid),
        values: sol.profile.values.iter().map(|u| p * u.abs().powf(p - 1.0)).collect(),
    };
    RadialOperator::new(&potential)
}

/// Smallest eigenvalue and positive normalized eigenfunction of `L_p`,
/// by Sturm bisection bracketing plus inverse iteration.
pub fn first_eigenpair(sol: &StationarySolution) -> Result<EigenPair> {
    let op = assemble_linearized(sol);
    let eig = op.smallest_eigenpair(EigenOptions::default())?;
    Ok(EigenPair {
        lambda: eig.lambda,
        phi: eig.phi,
        iterations: eig.iterations,
        residual: eig.residual,
    })
}

/// The blow-up zoom of a solution/eigenpair: `ũ(x) = u(x/q)/M_p`,
/// `φ̃(x) = q^{-n/2} φ(x/q)` with `q = M_p^{(p-1)/2}`.
#[derive(Debug, Clone)]
pub struct RescaledFrame {
    /// `M_p^{(p-1)/2}`, the zoom factor.
    pub scale: f64,
    /// `ũ_p` on the rescaled grid of radius `scale`; `ũ(0) = 1`.
    pub u_tilde: RadialProfile,
    /// `φ̃_{1,p}`, L²-normalized by the exact Jacobian factor.
    pub phi_tilde: RadialProfile,
    /// `λ̃_{1,p} = λ_{1,p} / M_p^{p-1}`.
    pub lambda_tilde: f64,
    /// `V_p = p |ũ_p|^{p-1}`, bounded by `p` with the max at the origin.
    pub potential: RadialProfile,
}

/// Perform the change of variables exactly: the rescaled grid is the image
/// of the solution grid under `x = q r`, so cell volumes pick up the factor
/// `q^n` exactly and the rescaling is an L² isometry to roundoff.
pub fn rescale_frame(sol: &StationarySolution, eig: &EigenPair) -> Result<RescaledFrame> {
    let tol = 1.0 + 1e-12;
    if sol.profile.values.iter().any(|v| v.abs() > sol.m_p * tol) {
        return Err(CoreError::invalid(
            "rescale_frame needs the maximum of |u| at the origin (central concentration)",
        ));
    }
    let p = sol.params.p;
    let n = sol.params.dim;
    let q = sol.concentration_scale();
    let m = sol.m_p;
    let grid = &sol.profile.grid;
    let scaled_nodes: Vec<f64> = grid.nodes().iter().map(|&r| q * r).collect();
    let tilde_grid =
        Arc::new(RadialGrid::from_nodes(scaled_nodes, n, grid.cluster_strength())?);
    let u_tilde = RadialProfile {
        grid: Arc::clone(&tilde_grid),
        values: sol.profile.values.iter().map(|u| u / m).collect(),
    };
    let jac = q.powf(-(n as f64) / 2.0);
    let phi_tilde = RadialProfile {
        grid: Arc::clone(&tilde_grid),
        values: eig.phi.values.iter().map(|v| v * jac).collect(),
    };
    let potential = RadialProfile {
        grid: Arc::clone(&tilde_grid),
        values: u_tilde.values.iter().map(|u| p * u.abs().powf(p - 1.0)).collect(),
    };
    Ok(RescaledFrame {
        scale: q,
        u_tilde,
        phi_tilde,
        lambda_tilde: eig.lambda / m.powf(p - 1.0),
        potential,
    })
}

/// One row of the spectral convergence study.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StudyRow {
    pub p: f64,
    pub lambda: f64,
    pub lambda_tilde: f64,
    /// `|λ̃_{1,p} - λ1*|` against the extrapolated reference.
    pub lambda_gap: f64,
    /// `‖φ̃_{1,p} - φ1*‖_{L²}` on the common window `[0, r_compare]`.
    pub l2_gap_phi: f64,
    /// Discrete Dirichlet energy of `φ̃`; stays below `p_S`.
    pub h1_energy_phi_tilde: f64,
    /// L² mass of `φ̃` beyond the comparison window.
    pub tail_mass_phi_tilde: f64,
}

/// Study output: per-p rows, the reference value, and tail-trend verdicts.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectralStudy {
    pub rows: Vec<StudyRow>,
    /// Rows that failed, with diagnostics, by `p`.
    pub failures: Vec<(f64, String)>,
    pub lambda_star_ref: f64,
    pub reference_radius: f64,
    pub r_compare: f64,
    /// L² mass of the reference eigenfunction beyond the window.
    pub tail_mass_phi_star: f64,
    /// `|λ̃ - λ1*|` strictly decreasing over the last three rows.
    pub lambda_gap_shrinks: bool,
    /// `‖φ̃ - φ1*‖` strictly decreasing over the last three rows.
    pub l2_gap_shrinks: bool,
}

/// Comparison window for the L² gap; the tails beyond it are reported
/// separately.
pub const DEFAULT_COMPARE_RADIUS: f64 = 20.0;

/// Run the convergence study of the rescaled first eigenpair toward the
/// limit eigenpair over a strictly increasing list of exponents.
pub fn spectral_convergence_study(
    dim: usize,
    nodal_regions: usize,
    p_list: &[f64],
) -> Result<SpectralStudy> {
    if p_list.len() < 3 {
        return Err(CoreError::invalid("study needs at least 3 exponents"));
    }
    if p_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CoreError::invalid("p_list must be strictly increasing"));
    }
    let mut sols: Vec<(f64, StationarySolution)> = Vec::new();
    let mut failures: Vec<(f64, String)> = Vec::new();
    for &p in p_list {
        match ProblemParams::new(dim, p, nodal_regions).and_then(|prm| knodal_solution(&prm)) {
            Ok(sol) => sols.push((p, sol)),
            Err(e) => failures.push((p, e.to_string())),
        }
    }
    if sols.len() < 3 {
        return Err(CoreError::no_convergence(
            "spectral_convergence_study",
            format!("only {} of {} rows solvable", sols.len(), p_list.len()),
        ));
    }
    // reference eigenpair, truncation radius covering twice the largest zoom
    let max_scale = sols.iter().map(|(_, s)| s.concentration_scale()).fold(0.0, f64::max);
    let reference_radius = 50.0_f64.max(2.0 * max_scale);
    let ref_nodes = (8193.0 * (reference_radius / 50.0).sqrt()).ceil() as usize | 1;
    let reference = limit_eigenpair_extrapolated(dim, reference_radius, ref_nodes)?;

    let r_compare = DEFAULT_COMPARE_RADIUS;
    let cmp_grid = Arc::new(RadialGrid::build_graded_mesh(4097, r_compare, dim, 0.0)?);
    let phi_star_cmp = resample(&reference.phi_star, &cmp_grid)?;
    let star_sq = RadialProfile {
        grid: Arc::clone(&reference.phi_star.grid),
        values: reference.phi_star.values.iter().map(|v| v * v).collect(),
    };
    let tail_mass_phi_star =
        integrate_radial_between(&star_sq, r_compare, reference.phi_star.grid.r_max())?;

    let mut rows = Vec::new();
    for (p, sol) in &sols {
        match study_row(sol, &reference, &cmp_grid, &phi_star_cmp, r_compare) {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((*p, e.to_string())),
        }
    }
    if rows.len() < 3 {
        return Err(CoreError::no_convergence(
            "spectral_convergence_study",
            "fewer than 3 rows completed",
        ));
    }
    let tail = &rows[rows.len() - 3..];
    let lambda_gap_shrinks =
        tail[0].lambda_gap > tail[1].lambda_gap && tail[1].lambda_gap > tail[2].lambda_gap;
    let l2_gap_shrinks =
        tail[0].l2_gap_phi > tail[1].l2_gap_phi && tail[1].l2_gap_phi > tail[2].l2_gap_phi;
    Ok(SpectralStudy {
        rows,
        failures,
        lambda_star_ref: reference.lambda_star,
        reference_radius,
        r_compare,
        tail_mass_phi_star,
        lambda_gap_shrinks,
        l2_gap_shrinks,
    })
}

fn study_row(
    sol: &StationarySolution,
    reference: &LimitEigenpair,
    cmp_grid: &Arc<RadialGrid>,
    phi_star_cmp: &RadialProfile,
    r_compare: f64,
) -> Result<StudyRow> {
    let eig = first_eigenpair(sol)?;
    let frame = rescale_frame(sol, &eig)?;
    let phi_tilde_cmp = resample(&frame.phi_tilde, cmp_grid)?;
    let diff_sq = RadialProfile {
        grid: Arc::clone(cmp_grid),
        values: phi_tilde_cmp
            .values
            .iter()
            .zip(phi_star_cmp.values.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .collect(),
    };
    let l2_gap_phi = integrate_radial(&diff_sq).sqrt();
    let tilde_sq = RadialProfile {
        grid: Arc::clone(&frame.phi_tilde.grid),
        values: frame.phi_tilde.values.iter().map(|v| v * v).collect(),
    };
    let tail_mass_phi_tilde = if frame.scale > r_compare {
        integrate_radial_between(&tilde_sq, r_compare, frame.scale)?
    } else {
        0.0
    };
    Ok(StudyRow {
        p: sol.params.p,
        lambda: eig.lambda,
        lambda_tilde: frame.lambda_tilde,
        lambda_gap: (frame.lambda_tilde - reference.lambda_star).abs(),
        l2_gap_phi,
        h1_energy_phi_tilde: dirichlet_energy(&frame.phi_tilde),
        tail_mass_phi_tilde,
    })
}
