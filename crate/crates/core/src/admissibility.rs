//! The complete admissibility verdict: boundary compatibility, the ruling
//! conditions, and finite reduced energy, aggregated into one
//! machine-readable report with the tolerances embedded.

use serde::{Deserialize, Serialize};

use crate::energy::{direct_energy_oracle, reduced_energy, EnergyOptions, EnergyReport};
use crate::framed::{validate_framed_with, FramedCurve, ValidationReport};
use crate::geom::plane_normal;
use crate::region::BoundaryRegion;
use crate::rulings::{m2_sweep, RulingField};
use crate::tol::Tolerances;

/// Options for a full admissibility check.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmissibilityOptions {
    pub n_alpha: usize,
    /// None picks analytic or sampled defaults from the input flavor.
    pub tolerances: Option<Tolerances>,
    pub energy: EnergyOptions,
    /// Pair budget for the decimated non-crossing sweep.
    pub m2_max_pairs: usize,
    pub m2_exhaustive: bool,
    /// Also run the direct area-quadrature oracle and embed it.
    pub with_oracle: bool,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        Self {
            n_alpha: 4096,
            tolerances: None,
            energy: EnergyOptions::default(),
            m2_max_pairs: 1_000_000,
            m2_exhaustive: false,
            with_oracle: false,
        }
    }
}

/// One clause outcome: worst residual against its tolerance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Clause {
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Clause {
    fn new(residual: f64, tolerance: f64) -> Self {
        Self { residual, tolerance, pass: residual.is_finite() && residual < tolerance }
    }
}

/// Aggregated verdict for one framed curve against one region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub schema_version: u32,
    /// Geodesic-curvature match along smooth boundary points.
    pub compatibility_kappa: Clause,
    /// Exterior-angle match at corners.
    pub compatibility_angles: Clause,
    /// |n'| where kappa_n vanishes.
    pub flatness: Clause,
    /// Worst image-ruling endpoint residual over the ruled set.
    pub m1: Clause,
    /// Pairwise non-crossing sweep.
    pub m2_pass: bool,
    pub m2_checked_pairs: usize,
    pub m2_violations: usize,
    pub m2_worst: Option<(f64, f64, f64)>,
    /// Finite reduced energy with a positive ruling-jacobian margin.
    pub finite_energy_pass: bool,
    pub e_reduced: f64,
    pub e_direct: Option<f64>,
    /// min over the fully ruled set of g_m - beta_hat G (strictly positive
    /// for admissible data).
    pub margin_hat: f64,
    /// min over the ruled set of the same quantity (weakly nonnegative).
    pub margin_tilde: f64,
    /// Framed-curve regularity residuals (prerequisite diagnostics).
    pub validation: ValidationReport,
    pub pass: bool,
    pub n_alpha: usize,
    pub tolerances: Tolerances,
    pub infinite_phi_count: usize,
    pub flat_length: f64,
}

/// Worst residuals of the boundary-compatibility clauses:
/// (kappa match, corner-angle match, flatness).
pub fn check_compatibility(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    n_alpha: usize,
    tol: &Tolerances,
) -> (f64, f64, f64) {
    let len = fc.len();
    let h = len / n_alpha as f64;
    let guard = 2.0 * h;

    let mut kappa_res: f64 = 0.0;
    let mut flat_res: f64 = 0.0;
    for i in 0..n_alpha {
        let alpha = (i as f64 + 0.5) * h;
        if fc.curve.corner_distance(alpha) < guard {
            continue;
        }
        let (Ok(rf), Ok(im)) = (
            crate::geom::darboux_reference(region.boundary(), alpha),
            fc.image_frame(alpha),
        ) else {
            continue;
        };
        kappa_res = kappa_res.max((im.kappa_g - rf.kappa_c).abs());
        if im.kappa_n.abs() < tol.eps_kappa {
            flat_res = flat_res.max(fc.normal.deriv(alpha).norm());
        }
    }

    let mut angle_res: f64 = 0.0;
    let n_plane = plane_normal();
    for &c in region.corners() {
        let ref_angle =
            crate::geom::exterior_angle(region.boundary(), |_| n_plane, c);
        let img_angle = fc.exterior_angle(c);
        angle_res = angle_res.max((ref_angle - img_angle).abs());
    }

    (kappa_res, angle_res, flat_res)
}

/// Run every admissibility clause and aggregate the verdict.
pub fn check_admissible(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    opts: &AdmissibilityOptions,
) -> AdmissibilityReport {
    let tol = opts
        .tolerances
        .clone()
        .unwrap_or_else(|| Tolerances::for_flavor(fc.is_sampled()));
    let n_alpha = opts.n_alpha;
    let len = fc.len();

    let validation = validate_framed_with(fc, region, n_alpha, &tol);
    let (kappa_res, angle_res, flat_res) = check_compatibility(fc, region, n_alpha, &tol);

    let field = RulingField::compute(fc, region, n_alpha, &tol);

    // worst image-ruling endpoint residual over ruled samples
    let mut m1_res: f64 = 0.0;
    let mut margin_tilde = f64::INFINITY;
    let mut margin_hat = f64::INFINITY;
    for s in &field.samples {
        let Some(d) = &s.data else { continue };
        let Some((beta, mu_val)) = d.exit else { continue };
        let lhs = fc.curve.point(mu_val);
        let rhs = fc.curve.point(s.alpha) + d.g * beta;
        m1_res = m1_res.max((lhs - rhs).norm());
        let margin = d.g_m - beta * d.spread;
        if s.in_tilde {
            margin_tilde = margin_tilde.min(margin);
        }
        if s.in_hat {
            margin_hat = margin_hat.min(margin);
        }
    }
    if !margin_tilde.is_finite() {
        margin_tilde = f64::INFINITY; // empty ruled set
    }

    let sweep = m2_sweep(fc, region, &field, opts.m2_max_pairs, opts.m2_exhaustive);

    let energy: Option<EnergyReport> =
        reduced_energy(fc, region, &field, &opts.energy).ok();
    let e_direct = if opts.with_oracle {
        direct_energy_oracle(fc, region, &field, &opts.energy).ok()
    } else {
        None
    };

    let compatibility_kappa = Clause::new(kappa_res, tol.kappa_match);
    let compatibility_angles = Clause::new(angle_res, tol.angle_match);
    let flatness = Clause::new(flat_res, tol.flatness);
    let m1 = Clause::new(m1_res, tol.m1_rel * len);
    let m2_pass = sweep.violations == 0;

    let has_rulings = !field.intervals.is_empty();
    let margin_ok = !has_rulings
        || (margin_hat > 0.0 && margin_tilde >= -tol.aecond_margin);
    let (e_reduced, infinite_phi_count, flat_length) = match &energy {
        Some(rep) => (rep.e_reduced, rep.infinite_phi_count, rep.flat_length),
        None => (f64::INFINITY, 0, 0.0),
    };
    let finite_energy_pass = e_reduced.is_finite() && margin_ok;

    let pass = compatibility_kappa.pass
        && compatibility_angles.pass
        && flatness.pass
        && m1.pass
        && m2_pass
        && finite_energy_pass;

    AdmissibilityReport {
        schema_version: 1,
        compatibility_kappa,
        compatibility_angles,
        flatness,
        m1,
        m2_pass,
        m2_checked_pairs: sweep.checked_pairs,
        m2_violations: sweep.violations,
        m2_worst: sweep.worst,
        finite_energy_pass,
        e_reduced,
        e_direct,
        margin_hat: if margin_hat.is_finite() { margin_hat } else { 0.0 },
        margin_tilde: if margin_tilde.is_finite() { margin_tilde } else { 0.0 },
        validation,
        pass,
        n_alpha,
        tolerances: tol,
        infinite_phi_count,
        flat_length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{self, DefectClause};

    fn opts(n: usize) -> AdmissibilityOptions {
        AdmissibilityOptions {
            n_alpha: n,
            m2_max_pairs: 50_000,
            ..AdmissibilityOptions::default()
        }
    }

    #[test]
    fn admissible_presets_pass() {
        for p in presets::all_admissible() {
            let report = check_admissible(&p.framed, &p.region, &opts(512));
            assert!(report.pass, "{}: {report:#?}", p.name);
            assert!(report.validation.pass, "{}", p.name);
        }
    }

    #[test]
    fn compatibility_residuals_small_on_cylinder() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let (k, a, f) = check_compatibility(&p.framed, &p.region, 1024, &Tolerances::analytic());
        assert!(k < 1e-9, "kappa {k}");
        assert!(a < 1e-9, "angles {a}");
        assert!(f < 1e-9, "flatness {f}");
    }

    #[test]
    fn defects_fail_their_clause() {
        for p in presets::all_defects() {
            let report = check_admissible(&p.framed, &p.region, &opts(512));
            assert!(!report.pass, "{} must fail", p.name);
            match p.defect.unwrap() {
                DefectClause::KappaMatch => {
                    assert!(!report.compatibility_kappa.pass, "{}: {report:#?}", p.name)
                }
                DefectClause::AngleMatch => {
                    assert!(!report.compatibility_angles.pass, "{}: {report:#?}", p.name)
                }
                DefectClause::M1 => assert!(!report.m1.pass, "{}: {report:#?}", p.name),
                DefectClause::M2 => assert!(!report.m2_pass, "{}: {report:#?}", p.name),
            }
        }
    }

    #[test]
    fn single_clause_defects_fail_only_their_clause() {
        // the parallelogram and oval defects are engineered to trip exactly
        // one compatibility clause
        let p = presets::angle_perturb(0.01);
        let report = check_admissible(&p.framed, &p.region, &opts(512));
        assert!(!report.compatibility_angles.pass);
        assert!(report.compatibility_kappa.pass, "{report:#?}");
        assert!(report.flatness.pass);
        assert!(report.m1.pass);
        assert!(report.m2_pass);
        assert!(report.finite_energy_pass);
        assert!((report.compatibility_angles.residual - 0.01).abs() < 1e-6);

        let p = presets::curvature_mismatch(0.05);
        let report = check_admissible(&p.framed, &p.region, &opts(512));
        assert!(!report.compatibility_kappa.pass);
        assert!(report.compatibility_angles.pass, "{report:#?}");
        assert!(report.m1.pass);
        assert!(report.m2_pass);
        assert!(report.finite_energy_pass);
        assert!((report.compatibility_kappa.residual - 0.05).abs() < 1e-3);
    }

    #[test]
    fn reports_are_deterministic() {
        let p = presets::two_cylinder(1.0, 1.0, 0.5, 0.25);
        let r1 = check_admissible(&p.framed, &p.region, &opts(256));
        let r2 = check_admissible(&p.framed, &p.region, &opts(256));
        let s1 = serde_json::to_string(&r1).unwrap();
        let s2 = serde_json::to_string(&r2).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn passing_presets_stay_passing_at_double_resolution() {
        for p in presets::all_admissible() {
            let lo = check_admissible(&p.framed, &p.region, &opts(256));
            let hi = check_admissible(&p.framed, &p.region, &opts(512));
            assert!(lo.pass && hi.pass, "{}: lo {} hi {}", p.name, lo.pass, hi.pass);
        }
    }

    #[test]
    fn report_serializes_with_schema_version() {
        let p = presets::plane_identity();
        let report = check_admissible(&p.framed, &p.region, &opts(128));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert!(json["tolerances"]["eps_kappa"].is_number());
    }
}
