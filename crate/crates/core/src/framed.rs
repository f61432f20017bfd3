//! The framed boundary curve (d, n), its validation, and the per-parameter
//! derived fields: the ruling directions g and f, their components g_t and
//! g_m, and the spread G that measures how fast the ruling direction turns.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, ArcCurve, ImageFrame, ReferenceFrame, Vec3};
use crate::region::BoundaryRegion;
use crate::stencil;
use crate::tol::Tolerances;

type FieldFn = Arc<dyn Fn(f64) -> Vec3 + Send + Sync>;

#[derive(Clone)]
enum NormalKind {
    Analytic { n: FieldFn, n1: FieldFn },
    Sampled(Arc<geom::SampledData>),
}

/// A continuous unit-vector field on the periodic parameter interval,
/// C1 away from the corner set.
#[derive(Clone)]
pub struct NormalField {
    length: f64,
    kind: NormalKind,
}

impl fmt::Debug for NormalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormalField")
            .field("length", &self.length)
            .field("sampled", &self.is_sampled())
            .finish()
    }
}

impl NormalField {
    pub fn analytic<N, N1>(length: f64, n: N, n1: N1) -> Self
    where
        N: Fn(f64) -> Vec3 + Send + Sync + 'static,
        N1: Fn(f64) -> Vec3 + Send + Sync + 'static,
    {
        Self {
            length,
            kind: NormalKind::Analytic { n: Arc::new(n), n1: Arc::new(n1) },
        }
    }

    /// Uniform samples of the field; corners must land on sample nodes.
    pub fn sampled(length: f64, corners: Vec<f64>, values: Vec<Vec3>) -> Result<Self> {
        let data = geom::SampledData::build(length, &corners, values)?;
        Ok(Self { length, kind: NormalKind::Sampled(Arc::new(data)) })
    }

    /// Constant field (flat immersions).
    pub fn constant(length: f64, value: Vec3) -> Self {
        Self::analytic(length, move |_| value, |_| Vec3::zeros())
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.kind, NormalKind::Sampled(_))
    }

    fn wrap(&self, alpha: f64) -> f64 {
        alpha.rem_euclid(self.length)
    }

    pub fn value(&self, alpha: f64) -> Vec3 {
        let a = self.wrap(alpha);
        match &self.kind {
            NormalKind::Analytic { n, .. } => n(a),
            NormalKind::Sampled(s) => s.eval(a, geom::Field::Pos),
        }
    }

    /// Two-sided derivative; only valid off the corner set.
    pub fn deriv(&self, alpha: f64) -> Vec3 {
        let a = self.wrap(alpha);
        match &self.kind {
            NormalKind::Analytic { n1, .. } => n1(a),
            NormalKind::Sampled(s) => s.eval(a, geom::Field::D1),
        }
    }

    /// One-sided derivative limit at a corner (side < 0 from below).
    pub fn deriv_one_sided(&self, alpha: f64, side: f64) -> Vec3 {
        let a = self.wrap(alpha);
        match &self.kind {
            NormalKind::Analytic { n1, .. } => {
                let h = 1e-5 * self.length;
                let len = self.length;
                stencil::extrapolate_vec3(|x| n1(x.rem_euclid(len)), a, h, side)
            }
            NormalKind::Sampled(s) => s.one_sided_tangent(a, side),
        }
    }

    /// One-sided value limit at a corner via quadratic extrapolation.
    pub fn value_one_sided(&self, alpha: f64, side: f64) -> Vec3 {
        let a = self.wrap(alpha);
        let h = match &self.kind {
            NormalKind::Analytic { .. } => 1e-5 * self.length,
            NormalKind::Sampled(s) => s.spacing(),
        };
        stencil::extrapolate_vec3(|x| self.value(x), a, h, side)
    }

    /// The field with reversed orientation.
    pub fn flipped(&self) -> Self {
        let this = self.clone();
        let that = self.clone();
        Self::analytic(self.length, move |a| -this.value(a), move |a| -that.deriv(a))
    }
}

/// The pair (d, n): a closed arclength space curve and a unit normal field,
/// sharing one singular set with the reference boundary.
#[derive(Debug, Clone)]
pub struct FramedCurve {
    pub curve: ArcCurve,
    pub normal: NormalField,
}

impl FramedCurve {
    pub fn new(curve: ArcCurve, normal: NormalField) -> Self {
        Self { curve, normal }
    }

    pub fn len(&self) -> f64 {
        self.curve.len()
    }

    pub fn corners(&self) -> &[f64] {
        self.curve.corners()
    }

    pub fn is_sampled(&self) -> bool {
        self.curve.is_sampled() || self.normal.is_sampled()
    }

    /// Default |n'| threshold for flat classification (1/length units).
    pub fn default_eps_n(&self) -> f64 {
        if self.is_sampled() {
            1e-4
        } else {
            1e-8 / self.len()
        }
    }

    /// Image Darboux frame at a smooth parameter.
    pub fn image_frame(&self, alpha: f64) -> Result<ImageFrame> {
        let d1 = self.curve.deriv(alpha)?;
        let d2 = self.curve.deriv2(alpha)?;
        let n = self.normal.value(alpha);
        let n1 = self.normal.deriv(alpha);
        Ok(ImageFrame::from_derivatives(d1, d2, n, n1))
    }

    /// One-sided image frame at a corner.
    pub fn image_frame_one_sided(&self, alpha: f64, side: f64) -> ImageFrame {
        let d1 = if side < 0.0 {
            self.curve.tangent_before(alpha)
        } else {
            self.curve.tangent_after(alpha)
        };
        let n = self.normal.value_one_sided(alpha, side);
        let n1 = self.normal.deriv_one_sided(alpha, side);
        // second derivative limit via the structure equations is not needed
        // for angle checks; reconstruct curvatures from n' instead
        let m = n.cross(&d1);
        ImageFrame {
            t: d1,
            m,
            n,
            kappa_g: f64::NAN,
            kappa_n: -n1.dot(&d1),
            tau_g: -n1.dot(&m),
        }
    }

    /// Exterior angle of the image curve at `alpha` relative to n.
    pub fn exterior_angle(&self, alpha: f64) -> f64 {
        let nf = &self.normal;
        geom::exterior_angle(&self.curve, |a| nf.value(a), alpha)
    }

    /// Image ruling direction g = sgn(kappa_n) (n' x n)/|n'| on the ruled set.
    pub fn image_ruling_direction(&self, alpha: f64) -> Result<Vec3> {
        self.image_ruling_direction_eps(alpha, self.default_eps_n())
    }

    pub fn image_ruling_direction_eps(&self, alpha: f64, eps_n: f64) -> Result<Vec3> {
        let frame = self.image_frame(alpha)?;
        let n1 = self.normal.deriv(alpha);
        let norm = n1.norm();
        if norm < eps_n {
            return Err(Error::ZeroNormalDerivative(self.curve.wrap(alpha)));
        }
        Ok(n1.cross(&frame.n) * (frame.kappa_n.signum() / norm))
    }

    /// Reference ruling direction f = g_t T + g_m M_in; never tangent to the
    /// boundary and pointing into the region.
    pub fn reference_ruling_direction(
        &self,
        region: &BoundaryRegion,
        alpha: f64,
    ) -> Result<Vec3> {
        let data = FrameData::at(self, region, alpha)?;
        Ok(data.f)
    }

    /// Spread G = kappa_g - g_m g_t' + g_t g_m' on the ruled set.
    pub fn spread(&self, region: &BoundaryRegion, alpha: f64) -> Result<f64> {
        Ok(FrameData::at(self, region, alpha)?.spread)
    }
}

/// Everything the kernel derives per parameter on the ruled set.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub alpha: f64,
    pub reference: ReferenceFrame,
    pub image: ImageFrame,
    /// Image ruling direction.
    pub g: Vec3,
    /// Reference ruling direction.
    pub f: Vec3,
    pub g_t: f64,
    pub g_m: f64,
    /// Turning rate G of the ruling direction along the boundary.
    pub spread: f64,
    /// Disagreement between the two available routes to G (diagnostic).
    pub spread_disagreement: f64,
    /// |n'| at alpha.
    pub n1_norm: f64,
}

impl FrameData {
    pub fn at(fc: &FramedCurve, region: &BoundaryRegion, alpha: f64) -> Result<Self> {
        let eps_n = fc.default_eps_n();
        Self::at_eps(fc, region, alpha, eps_n)
    }

    pub fn at_eps(
        fc: &FramedCurve,
        region: &BoundaryRegion,
        alpha: f64,
        eps_n: f64,
    ) -> Result<Self> {
        let reference = geom::darboux_reference(region.boundary(), alpha)?;
        let image = fc.image_frame(alpha)?;
        let n1 = fc.normal.deriv(alpha);
        let n1_norm = n1.norm();
        if n1_norm < eps_n {
            return Err(Error::ZeroNormalDerivative(fc.curve.wrap(alpha)));
        }
        let g = n1.cross(&image.n) * (image.kappa_n.signum() / n1_norm);
        let g_t = g.dot(&image.t);
        let g_m = (1.0 - g_t * g_t).max(0.0).sqrt();
        let f = reference.tangent * g_t + reference.inward * g_m;

        // g_t' and g_m' from the projections, same stencil family as n'
        let h = spread_step(fc, alpha);
        let gt_of = |a: f64| -> f64 {
            let fr = match fc.image_frame(a) {
                Ok(fr) => fr,
                Err(_) => return f64::NAN,
            };
            let nd = fc.normal.deriv(a);
            let nn = nd.norm();
            if nn < eps_n {
                return f64::NAN;
            }
            (nd.cross(&fr.n) * (fr.kappa_n.signum() / nn)).dot(&fr.t)
        };
        let gm_of = |a: f64| -> f64 {
            let fr = match fc.image_frame(a) {
                Ok(fr) => fr,
                Err(_) => return f64::NAN,
            };
            let nd = fc.normal.deriv(a);
            let nn = nd.norm();
            if nn < eps_n {
                return f64::NAN;
            }
            (nd.cross(&fr.n) * (fr.kappa_n.signum() / nn)).dot(&fr.m)
        };
        let g_t1 = stencil::deriv_scalar_robust(gt_of, alpha, h);
        let g_m1 = stencil::deriv_scalar_robust(gm_of, alpha, h);
        let spread = image.kappa_g - g_m * g_t1 + g_t * g_m1;

        // redundant route through f' = -G (g_m T - g_t M_in)
        let f_of = |a: f64| -> Vec3 {
            let Ok(rf) = geom::darboux_reference(region.boundary(), a) else {
                return Vec3::from_element(f64::NAN);
            };
            let fr = match fc.image_frame(a) {
                Ok(fr) => fr,
                Err(_) => return Vec3::from_element(f64::NAN),
            };
            let nd = fc.normal.deriv(a);
            let nn = nd.norm();
            if nn < eps_n {
                return Vec3::from_element(f64::NAN);
            }
            let gv = nd.cross(&fr.n) * (fr.kappa_n.signum() / nn);
            let gt = gv.dot(&fr.t);
            let gm = (1.0 - gt * gt).max(0.0).sqrt();
            rf.tangent * gt + rf.inward * gm
        };
        let f1 = stencil::deriv_vec3_robust(f_of, alpha, h);
        let f_perp = reference.tangent * g_m - reference.inward * g_t;
        let spread_alt = -f1.dot(&f_perp);
        let spread_disagreement = if spread_alt.is_finite() {
            (spread - spread_alt).abs()
        } else {
            f64::NAN
        };

        Ok(Self {
            alpha: fc.curve.wrap(alpha),
            reference,
            image,
            g,
            f,
            g_t,
            g_m,
            spread,
            spread_disagreement,
            n1_norm,
        })
    }

    /// In-plane direction orthogonal to the ruling: f_perp = g_m T - g_t M_in.
    pub fn f_perp(&self) -> Vec3 {
        self.reference.tangent * self.g_m - self.reference.inward * self.g_t
    }
}

/// Differentiation step for the spread: stay well inside the smooth piece.
fn spread_step(fc: &FramedCurve, alpha: f64) -> f64 {
    let base = fc
        .curve
        .sample_spacing()
        .or(fc.normal_spacing())
        .unwrap_or(stencil::analytic_step(fc.len() / 16.0));
    let gap = fc.curve.corner_distance(alpha);
    base.min(gap / 2.5).max(1e-12 * fc.len())
}

impl FramedCurve {
    fn normal_spacing(&self) -> Option<f64> {
        match &self.normal.kind {
            NormalKind::Analytic { .. } => None,
            NormalKind::Sampled(s) => Some(s.spacing()),
        }
    }
}

/// Residuals of each framed-curve regularity clause.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub unit_speed: f64,
    pub perp: f64,
    pub unit_normal: f64,
    pub normal_continuity: f64,
    pub position_continuity: f64,
    pub smoothness_quotient: f64,
    pub n_alpha: usize,
    pub pass: bool,
}

/// Check the framed-curve regularity clauses on a uniform grid.
pub fn validate_framed(fc: &FramedCurve, region: &BoundaryRegion) -> ValidationReport {
    validate_framed_with(fc, region, 4096, &Tolerances::for_flavor(fc.is_sampled()))
}

pub fn validate_framed_with(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    n_alpha: usize,
    tol: &Tolerances,
) -> ValidationReport {
    let len = fc.len();
    let guard = 4.0 * len / n_alpha as f64;
    let eps_n = tol.eps_n / if fc.is_sampled() { 1.0 } else { len };

    let mut unit_speed: f64 = 0.0;
    let mut perp: f64 = 0.0;
    let mut unit_normal: f64 = 0.0;
    let mut smooth_q: f64 = 0.0;
    let mut prev_u: Option<(f64, Vec3)> = None;

    let h = len / n_alpha as f64;
    for i in 0..n_alpha {
        let alpha = (i as f64 + 0.5) * h;
        let n = fc.normal.value(alpha);
        unit_normal = unit_normal.max((n.norm() - 1.0).abs());
        if fc.curve.corner_distance(alpha) < guard {
            prev_u = None;
            continue;
        }
        let d1 = fc.curve.deriv_unchecked(alpha);
        unit_speed = unit_speed.max((d1.norm() - 1.0).abs());
        perp = perp.max(d1.dot(&n).abs());

        let n1 = fc.normal.deriv(alpha);
        if n1.norm() > eps_n {
            let u = n1 / n1.norm();
            if let Some((pa, pu)) = prev_u {
                if alpha - pa < 1.5 * h {
                    smooth_q = smooth_q.max((u - pu).norm() / (alpha - pa));
                }
            }
            prev_u = Some((alpha, u));
        } else {
            prev_u = None;
        }
    }

    let mut normal_continuity: f64 = 0.0;
    let mut position_continuity: f64 = 0.0;
    for &c in fc.corners() {
        let n_minus = fc.normal.value_one_sided(c, -1.0);
        let n_plus = fc.normal.value_one_sided(c, 1.0);
        normal_continuity = normal_continuity.max((n_minus - n_plus).norm());
        let step = if fc.is_sampled() {
            fc.curve.sample_spacing().unwrap_or(1e-5 * len)
        } else {
            1e-5 * len
        };
        let p_minus = stencil::extrapolate_vec3(|x| fc.curve.point(x), c, step, -1.0);
        let p_plus = stencil::extrapolate_vec3(|x| fc.curve.point(x), c, step, 1.0);
        position_continuity = position_continuity.max((p_minus - p_plus).norm());
    }

    let _ = region;
    let pass = unit_speed < tol.unit_speed
        && perp < tol.perp
        && unit_normal < tol.unit_normal
        && normal_continuity < tol.continuity
        && position_continuity < tol.continuity * region.diameter().max(1.0)
        && smooth_q < tol.smoothness;

    ValidationReport {
        unit_speed,
        perp,
        unit_normal,
        normal_continuity,
        position_continuity,
        smoothness_quotient: smooth_q,
        n_alpha,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn cylinder_preset_validates() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let report = validate_framed(&p.framed, &p.region);
        assert!(report.pass, "{report:?}");
        assert!(report.unit_speed < 1e-10);
        assert!(report.perp < 1e-10);
    }

    #[test]
    fn tilted_normal_fails_perp() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let base = p.framed.clone();
        let curve = base.curve.clone();
        let tilt = 1e-3_f64;
        let normal = NormalField::analytic(
            base.len(),
            {
                let b = base.clone();
                move |a| {
                    let n = b.normal.value(a);
                    let t = b.curve.deriv_unchecked(a);
                    (n * tilt.cos() + t * tilt.sin()).normalize()
                }
            },
            {
                let b = base.clone();
                move |a| b.normal.deriv(a)
            },
        );
        let fc = FramedCurve::new(curve, normal);
        let report = validate_framed(&fc, &p.region);
        assert!(!report.pass);
        assert!((report.perp - tilt.sin()).abs() < 1e-4, "perp = {}", report.perp);
    }

    #[test]
    fn planar_identity_validates_cleanly() {
        let p = presets::plane_identity();
        let report = validate_framed(&p.framed, &p.region);
        assert!(report.pass, "{report:?}");
        assert!(report.unit_speed < 1e-14);
        assert!(report.perp < 1e-14);
        assert!(report.normal_continuity < 1e-14);
    }

    #[test]
    fn image_frame_of_circular_arc() {
        // d runs along a circle of radius R in a plane with n the plane
        // normal: kappa_g = 1/R (counterclockwise), kappa_n = 0, tau_g = 0
        let r = 0.7_f64;
        let curve = ArcCurve::analytic(
            std::f64::consts::TAU * r,
            vec![],
            move |a| Vec3::new(r * (a / r).cos(), r * (a / r).sin(), 0.3),
            move |a| Vec3::new(-(a / r).sin(), (a / r).cos(), 0.0),
            move |a| Vec3::new(-(a / r).cos() / r, -(a / r).sin() / r, 0.0),
        );
        let normal = NormalField::constant(std::f64::consts::TAU * r, Vec3::new(0.0, 0.0, 1.0));
        let fc = FramedCurve::new(curve, normal);
        let frame = fc.image_frame(1.0).unwrap();
        assert_relative_eq!(frame.kappa_g, 1.0 / r, epsilon = 1e-12);
        assert!(frame.kappa_n.abs() < 1e-12);
        assert!(frame.tau_g.abs() < 1e-12);

        // finite-difference check of the third structure equation:
        // n' = -kappa_n t - tau_g m (trivially zero here)
        let h = 1e-5;
        let n1 = (fc.normal.value(1.0 + h) - fc.normal.value(1.0 - h)) / (2.0 * h);
        let predicted = frame.t * (-frame.kappa_n) + frame.m * (-frame.tau_g);
        assert!((n1 - predicted).norm() < 1e-9);
    }

    #[test]
    fn cylinder_rim_frame() {
        // rim of a cylinder of radius R: kappa_n = 1/R, kappa_g = 0, tau_g = 0
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let frame = p.framed.image_frame(0.8).unwrap();
        assert_relative_eq!(frame.kappa_n, 2.0, epsilon = 1e-10);
        assert!(frame.kappa_g.abs() < 1e-10);
        assert!(frame.tau_g.abs() < 1e-10);

        let n1 = p.framed.normal.deriv(0.8);
        let predicted = frame.t * (-frame.kappa_n) + frame.m * (-frame.tau_g);
        assert!((n1 - predicted).norm() < 1e-10);
    }

    #[test]
    fn cylinder_ruling_directions() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let g = p.framed.image_ruling_direction(0.6).unwrap();
        assert!((g - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12, "g = {g:?}");
        let f = p.framed.reference_ruling_direction(&p.region, 0.6).unwrap();
        assert!((f - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12, "f = {f:?}");
    }

    #[test]
    fn flat_edge_has_no_ruling() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        // alpha = 2.5 lies on the right (straight) edge where n' = 0
        let err = p.framed.image_ruling_direction(2.5).unwrap_err();
        assert!(matches!(err, Error::ZeroNormalDerivative(_)));
    }

    #[test]
    fn cone_ruling_points_at_apex() {
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        let alpha = 0.9;
        let g = p.framed.image_ruling_direction(alpha).unwrap();
        let d = p.framed.curve.point(alpha);
        // the apex sits at the origin; g must point along -d (toward it)
        let toward_apex = -d.normalize();
        assert!((g - toward_apex).norm() < 1e-9, "g = {g:?}");
        let f = p.framed.reference_ruling_direction(&p.region, alpha).unwrap();
        let c = p.region.boundary().point(alpha);
        let inward_radial = -c.normalize();
        assert!((f - inward_radial).norm() < 1e-9);
    }

    #[test]
    fn spread_values_on_presets() {
        let cyl = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let g_spread = cyl.framed.spread(&cyl.region, 0.7).unwrap();
        assert!(g_spread.abs() < 1e-9, "cylinder spread = {g_spread}");

        let cone = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        // outer arc: G = +1/rho1, so g_m - beta_hat G = rho0/rho1
        let data = FrameData::at(&cone.framed, &cone.region, 0.8).unwrap();
        assert_relative_eq!(data.spread, 0.5, epsilon = 1e-8);
        assert_relative_eq!(data.g_m - 1.0 * data.spread, 0.5, epsilon = 1e-8);
        assert!(data.spread_disagreement < 1e-7);
    }

    #[test]
    fn frame_data_identities() {
        // g'  = -G (g_m t - g_t m), tau_g = -kappa_n g_t / g_m, g.n = 0
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        for &alpha in &[0.3, 0.9, 1.7] {
            let data = FrameData::at(&p.framed, &p.region, alpha).unwrap();
            assert!(data.g.dot(&data.image.n).abs() < 1e-10);
            assert!(
                (data.image.tau_g + data.image.kappa_n * data.g_t / data.g_m).abs() < 1e-9
            );
            let h = 1e-6;
            let gp = (p.framed.image_ruling_direction(alpha + h).unwrap()
                - p.framed.image_ruling_direction(alpha - h).unwrap())
                / (2.0 * h);
            let predicted = (data.image.t * data.g_m - data.image.m * data.g_t) * -data.spread;
            assert!((gp - predicted).norm() < 1e-6, "alpha={alpha}");
            assert!(gp.dot(&data.image.n).abs() < 1e-6);
        }
    }

    #[test]
    fn flipping_normal_preserves_ruling_lines() {
        // negating n negates kappa_n and tau_g and reverses g along the same
        // ruling line; with the rulings orthogonal to the boundary (g_t = 0)
        // the inward direction f is untouched
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        let flipped = FramedCurve::new(p.framed.curve.clone(), p.framed.normal.flipped());
        for &alpha in &[0.4, 1.1, 1.9] {
            let frame = p.framed.image_frame(alpha).unwrap();
            let frame_f = flipped.image_frame(alpha).unwrap();
            assert_relative_eq!(frame_f.kappa_n, -frame.kappa_n, epsilon = 1e-12);
            assert_relative_eq!(frame_f.tau_g, -frame.tau_g, epsilon = 1e-12);
            let g = p.framed.image_ruling_direction(alpha).unwrap();
            let g_f = flipped.image_ruling_direction(alpha).unwrap();
            assert!(g.cross(&g_f).norm() < 1e-12, "ruling line must not move");
            let f = p.framed.reference_ruling_direction(&p.region, alpha).unwrap();
            let f_f = flipped.reference_ruling_direction(&p.region, alpha).unwrap();
            assert!((f - f_f).norm() < 1e-12);
        }
    }

    #[test]
    fn flat_boundary_pieces_have_constant_normal() {
        // wherever |kappa_n| is tiny off the corners, |n'| must be tiny too
        let p = presets::stadium_roll(2.0, 1.0, 1.0);
        let len = p.framed.len();
        for i in 0..512 {
            let alpha = (i as f64 + 0.5) * len / 512.0;
            if p.framed.curve.corner_distance(alpha) < 1e-2 {
                continue;
            }
            let frame = p.framed.image_frame(alpha).unwrap();
            if frame.kappa_n.abs() < 1e-8 {
                assert!(p.framed.normal.deriv(alpha).norm() < 1e-7, "alpha={alpha}");
            }
        }
    }
}
