//! The criterion integral `∫ u_p φ_{1,p} dx`, the integral identity tying
//! the stationary and spectral solvers together, the rescaled limit of the
//! weighted integral, and the resulting blow-up prediction for initial data
//! `θ u_p` near `θ = 1`.
//!
//! Testing the eigenfunction against the stationary equation and the
//! solution against the eigenvalue equation gives the exact relation
//! `-(p-1)/λ_{1,p} ∫ |u|^{p-1}u φ = ∫ u φ`; its discrete defect is the
//! cross-solver consistency certificate carried by every report.

use std::sync::Arc;

use crate::error::CoreError;
use crate::grid::{inner_product, RadialProfile};
use crate::limit::{limit_eigenpair, LimitEigenpair, DEFAULT_TRUNC_RADIUS};
use crate::spectrum::{first_eigenpair, EigenPair};
use crate::stationary::{knodal_solution, ProblemParams, StationarySolution};
use crate::Result;

/// Sign verdict for the criterion integral, with an explicit indeterminate
/// state when the value sits below the quadrature noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum IntegralSign {
    Positive,
    Negative,
    Indeterminate,
}

impl std::fmt::Display for IntegralSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegralSign::Positive => write!(f, "positive"),
            IntegralSign::Negative => write!(f, "negative"),
            IntegralSign::Indeterminate => write!(f, "indeterminate"),
        }
    }
}

/// Criterion integrals with their identity certificate and sign verdict.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionReport {
    pub params: ProblemParams,
    /// `i_p = ∫ u_p φ_{1,p} dx`.
    pub i_p: f64,
    /// `j_p = ∫ |u_p|^{p-1} u_p φ_{1,p} dx`.
    pub j_p: f64,
    /// `|λ i_p - (1-p) j_p| / |λ i_p|`.
    pub identity_residual: f64,
    /// `M_p^{((p-1)/2)(n/2) - p} j_p`, the zoom-invariant form of `j_p`.
    pub rescaled_j: f64,
    /// `∫ U^{p_S} φ1* dx`, the strictly positive limit of `rescaled_j`.
    pub limit_target: f64,
    pub sign: IntegralSign,
    /// `10 x` the Richardson estimate of the quadrature error of `i_p`.
    pub noise_floor: f64,
    pub lambda: f64,
}

/// Compute the criterion report for a solution/eigenpair on one grid.
pub fn criterion_integral(
    sol: &StationarySolution,
    eig: &EigenPair,
    limit: &LimitEigenpair,
) -> Result<CriterionReport> {
    if sol.profile.grid.len() != eig.phi.grid.len()
        || sol.profile.grid.r_max() != eig.phi.grid.r_max()
    {
        return Err(CoreError::invalid("solution and eigenpair live on different grids"));
    }
    if !(eig.lambda < 0.0) {
        return Err(CoreError::invalid(format!(
            "criterion needs λ_{{1,p}} < 0, got {}",
            eig.lambda
        )));
    }
    let p = sol.params.p;
    let n = sol.params.dim as f64;
    let i_p = inner_product(&sol.profile, &eig.phi);
    let weighted = RadialProfile {
        grid: Arc::clone(&sol.profile.grid),
        values: sol.profile.values.iter().map(|u| u.abs().powf(p - 1.0) * u).collect(),
    };
    let j_p = inner_product(&weighted, &eig.phi);
    let identity_residual = (eig.lambda * i_p - (1.0 - p) * j_p).abs() / (eig.lambda * i_p).abs();
    if identity_residual >= 1e-6 {
        return Err(CoreError::no_convergence(
            "criterion_integral",
            format!("identity residual {identity_residual:.3e} at p = {p} (mesh too coarse)"),
        ));
    }

    // Richardson noise floor: redo i_p on the 2x-coarsened grid.
    let coarse_grid = Arc::new(sol.profile.grid.coarsened_by_two()?);
    let pick = |v: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().copied().step_by(2).collect();
        if (v.len() - 1) % 2 != 0 {
            out.push(v[v.len() - 1]);
        }
        out
    };
    let u_coarse = RadialProfile::new(Arc::clone(&coarse_grid), pick(&sol.profile.values))?;
    let phi_coarse = RadialProfile::new(Arc::clone(&coarse_grid), pick(&eig.phi.values))?;
    let i_coarse = inner_product(&u_coarse, &phi_coarse);
    let noise_floor = 10.0 * (i_p - i_coarse).abs() / 3.0;
    let sign = if i_p > noise_floor {
        IntegralSign::Positive
    } else if i_p < -noise_floor {
        IntegralSign::Negative
    } else {
        IntegralSign::Indeterminate
    };

    let rescaled_j = sol.m_p.powf((p - 1.0) / 2.0 * (n / 2.0) - p) * j_p;
    Ok(CriterionReport {
        params: sol.params,
        i_p,
        j_p,
        identity_residual,
        rescaled_j,
        limit_target: limit.bubble_overlap(),
        sign,
        noise_floor,
        lambda: eig.lambda,
    })
}

/// Prediction drawn from a criterion report via the nonvanishing test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BlowupPrediction {
    /// `∫ u φ ≠ 0`: initial data `θ u_p` blows up in finite time for
    /// `0 < |1-θ| < ε` on both sides of 1; `ε` itself is not predicted.
    BothSidedBlowupNearOne,
    /// Sign below the noise floor: no prediction.
    Inconclusive,
}

impl std::fmt::Display for BlowupPrediction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlowupPrediction::BothSidedBlowupNearOne => write!(f, "both-sided-blowup"),
            BlowupPrediction::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

pub fn blowup_prediction(report: &CriterionReport) -> BlowupPrediction {
    match report.sign {
        IntegralSign::Positive | IntegralSign::Negative => {
            BlowupPrediction::BothSidedBlowupNearOne
        }
        IntegralSign::Indeterminate => BlowupPrediction::Inconclusive,
    }
}

/// Sweep output: per-p reports (or failures) plus the empirical onset of
/// stable positivity.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionSweep {
    pub reports: Vec<CriterionReport>,
    pub failures: Vec<(f64, String)>,
    /// Smallest tested `p` from which the sign stays strictly positive to
    /// the end of the list (an empirical lower bound for the onset; the
    /// true threshold is existential and not decidable here).
    pub positivity_onset: Option<f64>,
}

/// Run the criterion over a p-list, reusing one limit eigenpair per
/// dimension (the target is p-independent).
pub fn criterion_sweep(dim: usize, nodal_regions: usize, p_list: &[f64]) -> Result<CriterionSweep> {
    if p_list.is_empty() {
        return Err(CoreError::invalid("empty p_list"));
    }
    let limit = limit_eigenpair(dim, DEFAULT_TRUNC_RADIUS, 8193)?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for &p in p_list {
        let row = ProblemParams::new(dim, p, nodal_regions)
            .and_then(|prm| knodal_solution(&prm))
            .and_then(|sol| {
                let eig = first_eigenpair(&sol)?;
                criterion_integral(&sol, &eig, &limit)
            });
        match row {
            Ok(r) => reports.push(r),
            Err(e) => failures.push((p, e.to_string())),
        }
    }
    let mut onset = None;
    for r in reports.iter().rev() {
        if r.sign == IntegralSign::Positive {
            onset = Some(r.params.p);
        } else {
            break;
        }
    }
    Ok(CriterionSweep { reports, failures, positivity_onset: onset })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary::knodal_from_trajectory;
    use approx::assert_relative_eq;

    fn pipeline(n: usize, p: f64, k: usize) -> (StationarySolution, EigenPair, LimitEigenpair) {
        let sol = knodal_solution(&ProblemParams::new(n, p, k).unwrap()).unwrap();
        let eig = first_eigenpair(&sol).unwrap();
        let limit = limit_eigenpair(n, DEFAULT_TRUNC_RADIUS, 8193).unwrap();
        (sol, eig, limit)
    }

    #[test]
    fn identity_residual_small_and_sign_positive() {
        let (sol, eig, limit) = pipeline(4, 2.5, 2);
        let report = criterion_integral(&sol, &eig, &limit).unwrap();
        assert!(report.identity_residual < 1e-6);
        assert_eq!(report.sign, IntegralSign::Positive);
        assert!(report.i_p > 0.0 && report.j_p > 0.0);
        assert!(report.limit_target > 0.0);
        // i_p = -(p-1)/λ j_p chains the positivity through λ < 0
        assert_relative_eq!(
            report.i_p,
            -(sol.params.p - 1.0) / report.lambda * report.j_p,
            max_relative = 1e-6
        );
        assert_eq!(blowup_prediction(&report), BlowupPrediction::BothSidedBlowupNearOne);
    }

    #[test]
    fn rescaled_j_matches_rescaled_frame_quadrature() {
        // scaling covariance: recomputing j in the zoomed frame reproduces
        // the rescaled value
        let (sol, eig, _limit) = pipeline(4, 2.7, 2);
        let frame = crate::spectrum::rescale_frame(&sol, &eig).unwrap();
        let p = sol.params.p;
        let weighted = RadialProfile {
            grid: Arc::clone(&frame.u_tilde.grid),
            values: frame
                .u_tilde
                .values
                .iter()
                .map(|u| u.abs().powf(p - 1.0) * u)
                .collect(),
        };
        let j_tilde = inner_product(&weighted, &frame.phi_tilde);
        let limit = limit_eigenpair(4, DEFAULT_TRUNC_RADIUS, 8193).unwrap();
        let report = criterion_integral(&sol, &eig, &limit).unwrap();
        assert_relative_eq!(j_tilde, report.rescaled_j, max_relative = 2e-4);
    }

    #[test]
    fn sign_stable_under_mesh_refinement() {
        let params = ProblemParams::new(4, 2.5, 2).unwrap();
        let traj = crate::stationary::shoot_unit(&params, 80.0).unwrap();
        let limit = limit_eigenpair(4, DEFAULT_TRUNC_RADIUS, 8193).unwrap();
        let mut signs = Vec::new();
        for n_nodes in [16_385usize, 32_769] {
            let sol = knodal_from_trajectory(&params, &traj, Some(n_nodes)).unwrap();
            let eig = first_eigenpair(&sol).unwrap();
            let rep = criterion_integral(&sol, &eig, &limit).unwrap();
            assert_ne!(rep.sign, IntegralSign::Indeterminate);
            signs.push(rep.sign);
        }
        assert_eq!(signs[0], signs[1]);
    }

    #[test]
    fn sweep_records_rows_and_onset() {
        let sweep = criterion_sweep(4, 2, &[2.3, 2.5]).unwrap();
        assert_eq!(sweep.reports.len(), 2);
        assert!(sweep.failures.is_empty());
        assert_eq!(sweep.positivity_onset, Some(2.3));
        assert!(criterion_sweep(4, 2, &[]).is_err());
    }

    #[test]
    fn rejects_mismatched_grids_and_positive_lambda() {
        let (sol, mut eig, limit) = pipeline(3, 3.0, 2);
        let bad = eig.clone();
        eig.lambda = 1.0;
        assert!(criterion_integral(&sol, &eig, &limit).is_err());
        let other = knodal_solution(&ProblemParams::new(3, 2.5, 2).unwrap()).unwrap();
        assert!(criterion_integral(&other, &bad, &limit).is_err());
    }
}
