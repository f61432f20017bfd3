//! Arclength curves, Darboux frames, and exterior angles.
//!
//! Curves come in two flavors behind one type: analytic presets carry exact
//! closures for the point and its first two derivatives, while sampled curves
//! hold dense uniform samples and differentiate them with fixed stencils
//! (4th-order central in the interior of each smooth piece, 2nd-order
//! one-sided next to corners). The ambient space is R^3 with the reference
//! plane embedded at z = 0, the plane normal is +e_z, and boundaries are
//! traversed counterclockwise so the inward conormal is N x T.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::stencil;

pub type Vec3 = Vector3<f64>;

/// Plane normal of the reference configuration.
pub fn plane_normal() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// z-component of the planar cross product of two in-plane vectors.
pub fn cross2(a: &Vec3, b: &Vec3) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed periodic difference in (-period/2, period/2].
pub fn wrap_signed(d: f64, period: f64) -> f64 {
    let mut d = d.rem_euclid(period);
    if d > 0.5 * period {
        d -= period;
    }
    d
}

type CurveFn = Arc<dyn Fn(f64) -> Vec3 + Send + Sync>;

#[derive(Clone)]
enum CurveKind {
    Analytic {
        point: CurveFn,
        d1: CurveFn,
        d2: CurveFn,
    },
    Sampled(Arc<SampledData>),
}

/// A closed curve parameterized by arclength on [0, length) with periodic
/// topology and a finite sorted corner set.
#[derive(Clone)]
pub struct ArcCurve {
    length: f64,
    corners: Vec<f64>,
    kind: CurveKind,
}

impl fmt::Debug for ArcCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ArcCurve")
            .field("length", &self.length)
            .field("corners", &self.corners)
            .field("sampled", &self.is_sampled())
            .finish()
    }
}

impl ArcCurve {
    /// Curve from exact closures. Corners must be sorted and lie in [0, length).
    pub fn analytic<P, D, D2>(length: f64, corners: Vec<f64>, point: P, d1: D, d2: D2) -> Self
    where
        P: Fn(f64) -> Vec3 + Send + Sync + 'static,
        D: Fn(f64) -> Vec3 + Send + Sync + 'static,
        D2: Fn(f64) -> Vec3 + Send + Sync + 'static,
    {
        assert!(length > 0.0, "curve length must be positive");
        let mut corners = corners;
        corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self {
            length,
            corners,
            kind: CurveKind::Analytic {
                point: Arc::new(point),
                d1: Arc::new(d1),
                d2: Arc::new(d2),
            },
        }
    }

    /// Curve from dense uniform samples.
    ///
    /// `points[i]` is the position at `alpha = i * length / points.len()`;
    /// the closing sample at `alpha = length` is implicit. Every corner must
    /// coincide with a sample node to within 1e-6 of the spacing.
    pub fn sampled(length: f64, corners: Vec<f64>, points: Vec<Vec3>) -> Result<Self> {
        let data = SampledData::build(length, &corners, points)?;
        let mut corners = corners;
        corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            length,
            corners,
            kind: CurveKind::Sampled(Arc::new(data)),
        })
    }

    pub fn len(&self) -> f64 {
        self.length
    }

    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.kind, CurveKind::Sampled(_))
    }

    /// Sample spacing for the sampled flavor; None for analytic curves.
    pub fn sample_spacing(&self) -> Option<f64> {
        match &self.kind {
            CurveKind::Analytic { .. } => None,
            CurveKind::Sampled(s) => Some(s.spacing()),
        }
    }

    /// Canonical representative of `alpha` in [0, length).
    pub fn wrap(&self, alpha: f64) -> f64 {
        let a = alpha.rem_euclid(self.length);
        if a == self.length {
            0.0
        } else {
            a
        }
    }

    /// Periodic arclength distance to the nearest corner.
    pub fn corner_distance(&self, alpha: f64) -> f64 {
        let a = self.wrap(alpha);
        self.corners
            .iter()
            .map(|&c| {
                let d = (a - c).abs();
                d.min(self.length - d)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_corner(&self, alpha: f64) -> bool {
        self.corner_distance(alpha) < 1e-9 * self.length
    }

    /// The corner nearest to `alpha`, with its periodic distance.
    pub fn nearest_corner(&self, alpha: f64) -> Option<(f64, f64)> {
        let a = self.wrap(alpha);
        self.corners
            .iter()
            .map(|&c| {
                let d = (a - c).abs();
                (c, d.min(self.length - d))
            })
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
    }

    pub fn point(&self, alpha: f64) -> Vec3 {
        let a = self.wrap(alpha);
        match &self.kind {
            CurveKind::Analytic { point, .. } => point(a),
            CurveKind::Sampled(s) => s.eval(a, Field::Pos),
        }
    }

    /// First derivative; fails on corners where only one-sided limits exist.
    pub fn deriv(&self, alpha: f64) -> Result<Vec3> {
        if self.is_corner(alpha) {
            return Err(Error::CornerPoint(self.wrap(alpha)));
        }
        Ok(self.deriv_unchecked(alpha))
    }

    pub fn deriv2(&self, alpha: f64) -> Result<Vec3> {
        if self.is_corner(alpha) {
            return Err(Error::CornerPoint(self.wrap(alpha)));
        }
        let a = self.wrap(alpha);
        Ok(match &self.kind {
            CurveKind::Analytic { d2, .. } => d2(a),
            CurveKind::Sampled(s) => s.eval(a, Field::D2),
        })
    }

    pub(crate) fn deriv_unchecked(&self, alpha: f64) -> Vec3 {
        let a = self.wrap(alpha);
        match &self.kind {
            CurveKind::Analytic { d1, .. } => d1(a),
            CurveKind::Sampled(s) => s.eval(a, Field::D1),
        }
    }

    /// One-sided tangent approaching `alpha` from below.
    pub fn tangent_before(&self, alpha: f64) -> Vec3 {
        self.one_sided(alpha, -1.0)
    }

    /// One-sided tangent approaching `alpha` from above.
    pub fn tangent_after(&self, alpha: f64) -> Vec3 {
        self.one_sided(alpha, 1.0)
    }

    fn one_sided(&self, alpha: f64, side: f64) -> Vec3 {
        let a = self.wrap(alpha);
        if !self.is_corner(a) {
            return self.deriv_unchecked(a);
        }
        match &self.kind {
            CurveKind::Analytic { d1, .. } => {
                let h = 1e-5 * self.length;
                let len = self.length;
                stencil::extrapolate_vec3(|x| d1(x.rem_euclid(len)), a, h, side)
            }
            CurveKind::Sampled(s) => s.one_sided_tangent(a, side),
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Field {
    Pos,
    D1,
    D2,
}

/// Dense uniform samples split into smooth pieces at the corners.
pub(crate) struct SampledData {
    h: f64,
    n: usize,
    length: f64,
    pieces: Vec<Piece>,
}

/// One smooth piece: node range [start, start + count - 1] (indices mod n)
/// with per-node positions and stencil derivatives. A corner node belongs to
/// both adjacent pieces and carries one-sided values in each.
struct Piece {
    start: usize,
    count: usize,
    closed: bool,
    pos: Vec<Vec3>,
    d1: Vec<Vec3>,
    d2: Vec<Vec3>,
}

impl SampledData {
    pub(crate) fn build(length: f64, corners: &[f64], points: Vec<Vec3>) -> Result<Self> {
        let n = points.len();
        if n < 16 {
            return Err(Error::InvalidSamples(format!(
                "need at least 16 samples, got {n}"
            )));
        }
        let h = length / n as f64;

        let mut corner_nodes: Vec<usize> = Vec::new();
        for &c in corners {
            let idx = c / h;
            let node = idx.round();
            if (idx - node).abs() > 1e-6 * n as f64 * 1e0_f64.max(1.0) && (idx - node).abs() > 1e-6
            {
                return Err(Error::InvalidSamples(format!(
                    "corner at {c} does not coincide with a sample node (spacing {h})"
                )));
            }
            corner_nodes.push((node as usize) % n);
        }
        corner_nodes.sort_unstable();
        corner_nodes.dedup();

        let mut pieces = Vec::new();
        if corner_nodes.is_empty() {
            pieces.push(Piece::build(&points, 0, n + 1, true, h));
        } else {
            let k = corner_nodes.len();
            for i in 0..k {
                let a = corner_nodes[i];
                let b = corner_nodes[(i + 1) % k];
                let count = if k == 1 {
                    n + 1
                } else {
                    ((b + n - a) % n) + 1
                };
                if count < 5 {
                    return Err(Error::InvalidSamples(format!(
                        "smooth piece starting at node {a} has only {count} samples"
                    )));
                }
                pieces.push(Piece::build(&points, a, count, false, h));
            }
        }

        Ok(Self { h, n, length, pieces })
    }

    fn piece_for(&self, alpha: f64) -> (&Piece, f64) {
        for p in &self.pieces {
            let start = p.start as f64 * self.h;
            let local = (alpha - start).rem_euclid(self.length);
            if local <= (p.count - 1) as f64 * self.h + 1e-12 * self.length {
                return (p, local);
            }
        }
        // alpha sits exactly on the first piece's start after wrapping
        let p = &self.pieces[0];
        let start = p.start as f64 * self.h;
        (p, (alpha - start).rem_euclid(self.length))
    }

    pub(crate) fn eval(&self, alpha: f64, field: Field) -> Vec3 {
        let (piece, local) = self.piece_for(alpha);
        piece.interpolate(local, self.h, field)
    }

    pub(crate) fn spacing(&self) -> f64 {
        self.h
    }

    pub(crate) fn one_sided_tangent(&self, alpha: f64, side: f64) -> Vec3 {
        // at a corner node, pick the piece that ends (side < 0) or starts
        // (side > 0) there and return its stored one-sided derivative
        let node = (alpha / self.h).round() as usize % self.n;
        for p in &self.pieces {
            let last = (p.start + p.count - 1) % self.n;
            if side < 0.0 && last == node && !p.closed {
                return p.d1[p.count - 1];
            }
            if side > 0.0 && p.start == node && !p.closed {
                return p.d1[0];
            }
        }
        self.eval(alpha, Field::D1)
    }
}

impl Piece {
    fn build(points: &[Vec3], start: usize, count: usize, closed: bool, h: f64) -> Self {
        let n = points.len();
        let pos: Vec<Vec3> = (0..count).map(|i| points[(start + i) % n]).collect();
        let mut d1 = vec![Vec3::zeros(); count];
        let mut d2 = vec![Vec3::zeros(); count];

        let get = |i: isize| -> Vec3 {
            if closed {
                points[((start as isize + i).rem_euclid(n as isize)) as usize]
            } else {
                pos[i as usize]
            }
        };

        for i in 0..count {
            let ii = i as isize;
            let last = count as isize - 1;
            let (left, right) = if closed {
                (2, 2)
            } else {
                (ii.min(2), (last - ii).min(2))
            };
            if left >= 2 && right >= 2 {
                let (m2, m1, p1, p2) = (get(ii - 2), get(ii - 1), get(ii + 1), get(ii + 2));
                d1[i] = (m2 - m1 * 8.0 + p1 * 8.0 - p2) / (12.0 * h);
                d2[i] = (-m2 + m1 * 16.0 - get(ii) * 30.0 + p1 * 16.0 - p2) / (12.0 * h * h);
            } else if left < right {
                let (f0, f1, f2) = (get(ii), get(ii + 1), get(ii + 2));
                d1[i] = (-f0 * 3.0 + f1 * 4.0 - f2) / (2.0 * h);
                d2[i] = (f0 - f1 * 2.0 + f2) / (h * h);
            } else {
                let (f0, f1, f2) = (get(ii), get(ii - 1), get(ii - 2));
                d1[i] = (f0 * 3.0 - f1 * 4.0 + f2) / (2.0 * h);
                d2[i] = (f0 - f1 * 2.0 + f2) / (h * h);
            }
        }

        Self { start, count, closed, pos, d1, d2 }
    }

    /// Cubic Lagrange interpolation at arclength `local` past the piece start.
    fn interpolate(&self, local: f64, h: f64, field: Field) -> Vec3 {
        let values = match field {
            Field::Pos => &self.pos,
            Field::D1 => &self.d1,
            Field::D2 => &self.d2,
        };
        let count = self.count;
        let x = (local / h).clamp(0.0, (count - 1) as f64);
        let i = (x.floor() as usize).min(count - 2);
        let j0 = if self.closed {
            i as isize - 1
        } else {
            (i as isize - 1).clamp(0, count as isize - 4)
        };
        let xi = x - j0 as f64;
        let mut out = Vec3::zeros();
        for k in 0..4usize {
            let mut w = 1.0;
            for m in 0..4usize {
                if m != k {
                    w *= (xi - m as f64) / (k as f64 - m as f64);
                }
            }
            let idx = if self.closed {
                (j0 + k as isize).rem_euclid(count as isize - 1) as usize
            } else {
                (j0 + k as isize) as usize
            };
            out += values[idx] * w;
        }
        out
    }
}

/// Darboux frame of the planar reference boundary: T = c', N = +e_z,
/// M_in = N x T, and T' = kappa_c * M_in.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceFrame {
    pub tangent: Vec3,
    pub inward: Vec3,
    pub normal: Vec3,
    pub kappa_c: f64,
}

/// Reference Darboux frame at a smooth boundary point.
pub fn darboux_reference(curve: &ArcCurve, alpha: f64) -> Result<ReferenceFrame> {
    let tangent = curve.deriv(alpha)?;
    let normal = plane_normal();
    let inward = normal.cross(&tangent);
    let kappa_c = curve.deriv2(alpha)?.dot(&inward);
    Ok(ReferenceFrame { tangent, inward, normal, kappa_c })
}

/// One-sided reference frame at a corner (side < 0 approaches from below).
pub fn darboux_reference_one_sided(curve: &ArcCurve, alpha: f64, side: f64) -> ReferenceFrame {
    let tangent = if side < 0.0 {
        curve.tangent_before(alpha)
    } else {
        curve.tangent_after(alpha)
    };
    let normal = plane_normal();
    let inward = normal.cross(&tangent);
    ReferenceFrame { tangent, inward, normal, kappa_c: f64::NAN }
}

/// Darboux frame of the image boundary: t = d', m = n x t, with
/// t' = kappa_g m + kappa_n n, m' = -kappa_g t + tau_g n,
/// n' = -kappa_n t - tau_g m.
#[derive(Debug, Clone, Copy)]
pub struct ImageFrame {
    pub t: Vec3,
    pub m: Vec3,
    pub n: Vec3,
    pub kappa_g: f64,
    pub kappa_n: f64,
    pub tau_g: f64,
}

impl ImageFrame {
    /// Assemble from the curve derivatives and the normal field values.
    pub fn from_derivatives(d1: Vec3, d2: Vec3, n: Vec3, n1: Vec3) -> Self {
        let t = d1;
        let m = n.cross(&t);
        let kappa_g = d1.cross(&d2).dot(&n);
        let kappa_n = d2.dot(&n);
        let tau_g = -n1.dot(&m);
        Self { t, m, n, kappa_g, kappa_n, tau_g }
    }

    /// Frobenius deviation of [t m n] from an orthonormal frame.
    pub fn orthonormality_residual(&self) -> f64 {
        let dots = [
            self.t.dot(&self.t) - 1.0,
            self.m.dot(&self.m) - 1.0,
            self.n.dot(&self.n) - 1.0,
            self.t.dot(&self.m),
            self.t.dot(&self.n),
            self.m.dot(&self.n),
        ];
        dots.iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

/// Signed rotation angle about `normal` carrying `before` to `after`.
///
/// This is the exterior angle of a curve at a corner when the one-sided
/// tangents are supplied; it vanishes at smooth points.
pub fn turning_angle(before: &Vec3, after: &Vec3, normal: &Vec3) -> f64 {
    let s = before.cross(after).dot(normal);
    let c = before.dot(after);
    s.atan2(c)
}

/// Exterior angle of `curve` at `alpha` relative to the given normal field.
pub fn exterior_angle<NF: Fn(f64) -> Vec3>(curve: &ArcCurve, normal: NF, alpha: f64) -> f64 {
    if !curve.is_corner(alpha) {
        return 0.0;
    }
    let before = curve.tangent_before(alpha);
    let after = curve.tangent_after(alpha);
    turning_angle(&before, &after, &normal(curve.wrap(alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_circle() -> ArcCurve {
        ArcCurve::analytic(
            std::f64::consts::TAU,
            vec![],
            |a| Vec3::new(a.cos(), a.sin(), 0.0),
            |a| Vec3::new(-a.sin(), a.cos(), 0.0),
            |a| Vec3::new(-a.cos(), -a.sin(), 0.0),
        )
    }

    fn unit_square() -> ArcCurve {
        square(1.0)
    }

    fn square(s: f64) -> ArcCurve {
        let point = move |a: f64| -> Vec3 {
            let a = a.rem_euclid(4.0 * s);
            if a < s {
                Vec3::new(a, 0.0, 0.0)
            } else if a < 2.0 * s {
                Vec3::new(s, a - s, 0.0)
            } else if a < 3.0 * s {
                Vec3::new(3.0 * s - a, s, 0.0)
            } else {
                Vec3::new(0.0, 4.0 * s - a, 0.0)
            }
        };
        let d1 = move |a: f64| -> Vec3 {
            let a = a.rem_euclid(4.0 * s);
            if a < s {
                Vec3::new(1.0, 0.0, 0.0)
            } else if a < 2.0 * s {
                Vec3::new(0.0, 1.0, 0.0)
            } else if a < 3.0 * s {
                Vec3::new(-1.0, 0.0, 0.0)
            } else {
                Vec3::new(0.0, -1.0, 0.0)
            }
        };
        ArcCurve::analytic(
            4.0 * s,
            vec![0.0, s, 2.0 * s, 3.0 * s],
            point,
            d1,
            |_| Vec3::zeros(),
        )
    }

    #[test]
    fn circle_reference_frame() {
        // counterclockwise unit circle: convex boundary, kappa_c = +1 under
        // the M_in = N x T inward convention
        let c = unit_circle();
        for &a in &[0.0, 1.0, 2.5, 6.0] {
            let f = darboux_reference(&c, a).unwrap();
            assert_relative_eq!(f.kappa_c, 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.tangent.norm(), 1.0, epsilon = 1e-12);
            // inward conormal points to the center
            let inward_expected = -c.point(a);
            assert_relative_eq!((f.inward - inward_expected).norm(), 0.0, epsilon = 1e-12);
        }
        let f0 = darboux_reference(&c, 0.0).unwrap();
        assert_relative_eq!((f0.tangent - Vec3::new(0.0, 1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((f0.inward - Vec3::new(-1.0, 0.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((f0.normal - Vec3::new(0.0, 0.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn square_edge_is_straight() {
        let c = unit_square();
        let f = darboux_reference(&c, 0.5).unwrap();
        assert_eq!(f.kappa_c, 0.0);
        assert!(darboux_reference(&c, 1.0).is_err());
    }

    #[test]
    fn square_exterior_angles() {
        let c = unit_square();
        let n = |_: f64| plane_normal();
        assert_relative_eq!(
            exterior_angle(&c, n, 1.0),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-9
        );
        assert_eq!(exterior_angle(&c, n, 0.5), 0.0);
    }

    #[test]
    fn obtuse_corner_angle() {
        // wedge with interior angle 3pi/4 gives exterior angle pi/4
        let t0 = Vec3::new(1.0, 0.0, 0.0);
        let angle = std::f64::consts::FRAC_PI_4;
        let t1 = Vec3::new(angle.cos(), angle.sin(), 0.0);
        assert_relative_eq!(
            turning_angle(&t0, &t1, &plane_normal()),
            angle,
            epsilon = 1e-14
        );
    }

    #[test]
    fn structure_equation_residual_is_second_order() {
        // |T(a+h) - T(a) - h kappa_c M_in| = O(h^2) on the circle
        let c = unit_circle();
        let a = 0.9;
        let f = darboux_reference(&c, a).unwrap();
        for &h in &[1e-2, 1e-3] {
            let t1 = c.deriv(a + h).unwrap();
            let res = (t1 - f.tangent - f.inward * (h * f.kappa_c)).norm();
            assert!(res < h * h, "h={h} res={res}");
        }
    }

    #[test]
    fn sampled_circle_matches_analytic() {
        let n = 4096;
        let tau = std::f64::consts::TAU;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let a = tau * i as f64 / n as f64;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        let c = ArcCurve::sampled(tau, vec![], pts).unwrap();
        for &a in &[0.1, 1.0, 3.33, 6.2] {
            let d1 = c.deriv(a).unwrap();
            let exact = Vec3::new(-a.sin(), a.cos(), 0.0);
            assert!((d1 - exact).norm() < 1e-8, "a={a}");
            let d2 = c.deriv2(a).unwrap();
            let exact2 = Vec3::new(-a.cos(), -a.sin(), 0.0);
            assert!((d2 - exact2).norm() < 1e-4, "a={a}");
            let f = darboux_reference(&c, a).unwrap();
            assert!((f.kappa_c - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn sampled_square_one_sided_tangents() {
        let n = 4000;
        let analytic = unit_square();
        let pts: Vec<Vec3> = (0..n).map(|i| analytic.point(4.0 * i as f64 / n as f64)).collect();
        let c = ArcCurve::sampled(4.0, vec![0.0, 1.0, 2.0, 3.0], pts).unwrap();
        let before = c.tangent_before(1.0);
        let after = c.tangent_after(1.0);
        assert!((before - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-6);
        assert!((after - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-6);
        let f = darboux_reference(&c, 0.5).unwrap();
        assert!(f.kappa_c.abs() < 1e-6);
    }

    #[test]
    fn frame_orthonormality_on_presets() {
        let c = unit_circle();
        for i in 0..64 {
            let a = std::f64::consts::TAU * (i as f64 + 0.5) / 64.0;
            let f = darboux_reference(&c, a).unwrap();
            let im = ImageFrame::from_derivatives(
                f.tangent,
                c.deriv2(a).unwrap(),
                f.normal,
                Vec3::zeros(),
            );
            assert!(im.orthonormality_residual() < 1e-10);
        }
    }
}
