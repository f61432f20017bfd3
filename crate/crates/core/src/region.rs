//! The planar reference region: membership queries, ray-boundary exits, and
//! flat-interval and corner inventories.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geom::{darboux_reference, ArcCurve, Vec3};

/// Result of a point-membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Membership {
    Interior,
    /// On the boundary, with the nearest boundary parameter.
    Boundary(f64),
    Exterior,
}

#[derive(Debug, Clone, Copy)]
struct Seg {
    alpha0: f64,
    alpha1: f64,
    p0: Vector2<f64>,
    p1: Vector2<f64>,
}

/// A simply connected planar region bounded by a closed, counterclockwise,
/// piecewise-C2 arclength curve in the z = 0 plane.
#[derive(Debug, Clone)]
pub struct BoundaryRegion {
    boundary: ArcCurve,
    segs: Vec<Seg>,
    bbox_min: Vector2<f64>,
    bbox_max: Vector2<f64>,
    diameter: f64,
    flat_intervals: Vec<(f64, f64)>,
    eps_boundary: f64,
}

impl BoundaryRegion {
    /// Build the region with the default sampling resolution.
    pub fn new(boundary: ArcCurve) -> Result<Self> {
        Self::with_resolution(boundary, 4096)
    }

    pub fn with_resolution(boundary: ArcCurve, n_samples: usize) -> Result<Self> {
        let segs = sample_segments(&boundary, n_samples);

        let mut lo = Vector2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &segs {
            lo = lo.inf(&s.p0);
            hi = hi.sup(&s.p0);
        }
        let diameter = (hi - lo).norm();
        if !(diameter > 0.0) {
            return Err(Error::InvalidSamples("degenerate boundary".into()));
        }

        // counterclockwise orientation check via the shoelace area
        let area: f64 = segs.iter().map(|s| cross2d(&s.p0, &s.p1)).sum::<f64>() * 0.5;
        if area <= 0.0 {
            return Err(Error::InvalidSamples(
                "boundary must be traversed counterclockwise".into(),
            ));
        }

        let region = Self {
            eps_boundary: 1e-9 * diameter,
            flat_intervals: flat_intervals_of(&boundary, diameter),
            boundary,
            segs,
            bbox_min: lo,
            bbox_max: hi,
            diameter,
        };
        region.check_simple()?;
        Ok(region)
    }

    pub fn boundary(&self) -> &ArcCurve {
        &self.boundary
    }

    pub fn corners(&self) -> &[f64] {
        self.boundary.corners()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn bounding_box(&self) -> (Vector2<f64>, Vector2<f64>) {
        (self.bbox_min, self.bbox_max)
    }

    /// Maximal arclength intervals on which the boundary curvature vanishes.
    pub fn flat_intervals(&self) -> &[(f64, f64)] {
        &self.flat_intervals
    }

    /// Cheap pairwise non-adjacent segment intersection test at reduced
    /// resolution; rejects self-intersecting boundary data early.
    fn check_simple(&self) -> Result<()> {
        let stride = (self.segs.len() / 256).max(1);
        let coarse: Vec<&Seg> = self.segs.iter().step_by(stride).collect();
        let k = coarse.len();
        for i in 0..k {
            for j in (i + 2)..k {
                if i == 0 && j == k - 1 {
                    continue;
                }
                if segments_cross(coarse[i], coarse[j]) {
                    return Err(Error::InvalidSamples(format!(
                        "boundary self-intersects near alpha = {:.4}",
                        coarse[i].alpha0
                    )));
                }
            }
        }
        Ok(())
    }

    /// Classify a plane point against the closed region.
    pub fn contains(&self, x: &Vec3) -> Membership {
        let p = Vector2::new(x.x, x.y);
        let (dist, alpha) = self.nearest_boundary(&p);
        if dist < self.eps_boundary {
            return Membership::Boundary(alpha);
        }
        if p.x < self.bbox_min.x || p.y < self.bbox_min.y || p.x > self.bbox_max.x
            || p.y > self.bbox_max.y
        {
            return Membership::Exterior;
        }
        if self.winding_inside(&p) {
            Membership::Interior
        } else {
            Membership::Exterior
        }
    }

    /// Nearest boundary point: (distance, arclength parameter).
    pub fn nearest_boundary(&self, p: &Vector2<f64>) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for s in &self.segs {
            let e = s.p1 - s.p0;
            let len2 = e.norm_squared();
            let t = if len2 > 0.0 {
                ((p - s.p0).dot(&e) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = s.p0 + e * t;
            let d = (p - q).norm();
            if d < best.0 {
                best = (d, s.alpha0 + t * (s.alpha1 - s.alpha0));
            }
        }
        best
    }

    fn winding_inside(&self, p: &Vector2<f64>) -> bool {
        // crossing number against the cached polyline
        let mut crossings = 0u32;
        for s in &self.segs {
            let (a, b) = (s.p0, s.p1);
            if (a.y > p.y) != (b.y > p.y) {
                let xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if xi > p.x {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    }

    /// Shoot a ray from the boundary point `c(alpha0)` in direction `dir`
    /// (unit, in-plane, pointing strictly into the region) and return the
    /// exit distance and exit parameter.
    pub fn ray_exit(&self, alpha0: f64, dir: &Vec3) -> Result<(f64, f64)> {
        let eps_tangent = 1e-8;
        let transversality = if self.boundary.is_corner(alpha0) {
            let n = crate::geom::plane_normal();
            let before = self.boundary.tangent_before(alpha0);
            let after = self.boundary.tangent_after(alpha0);
            let m0 = n.cross(&before);
            let m1 = n.cross(&after);
            dir.dot(&m0).min(dir.dot(&m1))
        } else {
            let frame = darboux_reference(&self.boundary, alpha0)?;
            dir.dot(&frame.inward)
        };
        if transversality <= eps_tangent {
            return Err(Error::TangentRay { alpha: alpha0, dot: transversality });
        }

        let origin3 = self.boundary.point(alpha0);
        let o = Vector2::new(origin3.x, origin3.y);
        let d = Vector2::new(dir.x, dir.y);
        let eps_start = 1e-9 * self.diameter;

        // coarse scan over the cached segments for ray-segment hits
        let mut candidates: Vec<(f64, usize, f64)> = Vec::new();
        for (idx, s) in self.segs.iter().enumerate() {
            let e = s.p1 - s.p0;
            let denom = cross2d_v(&d, &e);
            if denom.abs() < 1e-300 {
                continue;
            }
            let w = s.p0 - o;
            let t = cross2d_v(&w, &e) / denom;
            let u = cross2d_v(&w, &d) / denom;
            if t > eps_start && (-1e-12..=1.0 + 1e-12).contains(&u) {
                candidates.push((t, idx, u));
            }
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        for &(_, idx, _) in &candidates {
            if let Some((beta, alpha)) = self.polish_exit(&o, &d, idx, eps_start) {
                return Ok((beta, alpha));
            }
        }
        Err(Error::NoExit(alpha0))
    }

    /// Bisection plus Newton polish of the lateral-offset root inside the
    /// bracketing segment, to |offset| < 1e-12 * diam.
    fn polish_exit(
        &self,
        o: &Vector2<f64>,
        d: &Vector2<f64>,
        seg_idx: usize,
        eps_start: f64,
    ) -> Option<(f64, f64)> {
        let lateral = |alpha: f64| -> f64 {
            let p = self.boundary.point(alpha);
            cross2d_v(&(Vector2::new(p.x, p.y) - o), d)
        };
        let forward = |alpha: f64| -> f64 {
            let p = self.boundary.point(alpha);
            (Vector2::new(p.x, p.y) - o).dot(d)
        };

        let seg = &self.segs[seg_idx];
        let (mut a, mut b) = (seg.alpha0, seg.alpha1);
        let (mut fa, mut fb) = (lateral(a), lateral(b));
        if fa == 0.0 && forward(a) > eps_start {
            return Some((forward(a), self.boundary.wrap(a)));
        }
        if fa * fb > 0.0 {
            // chord/curve mismatch: widen by one segment on each side
            let n = self.segs.len();
            let prev = &self.segs[(seg_idx + n - 1) % n];
            let next = &self.segs[(seg_idx + 1) % n];
            a = prev.alpha0;
            b = next.alpha1;
            fa = lateral(a);
            fb = lateral(b);
            if fa * fb > 0.0 {
                return None;
            }
        }

        let tol = 1e-12 * self.diameter;
        let mut mid = 0.5 * (a + b);
        for _ in 0..200 {
            mid = 0.5 * (a + b);
            let fm = lateral(mid);
            if fm.abs() < tol || (b - a).abs() < 1e-16 * self.boundary.len() {
                break;
            }
            if fa * fm <= 0.0 {
                b = mid;
                fb = fm;
            } else {
                a = mid;
                fa = fm;
            }
            let _ = fb;
        }
        // Newton refinement where the curve is smooth
        let mut alpha = mid;
        for _ in 0..4 {
            if self.boundary.is_corner(alpha) {
                break;
            }
            let f = lateral(alpha);
            let t = self.boundary.deriv_unchecked(alpha);
            let fp = cross2d_v(&Vector2::new(t.x, t.y), d);
            if fp.abs() < 1e-14 {
                break;
            }
            let step = f / fp;
            let next = alpha - step;
            if next <= a - (b - a) || next >= b + (b - a) {
                break;
            }
            alpha = next;
            if f.abs() < tol {
                break;
            }
        }

        let beta = forward(alpha);
        if beta > eps_start && lateral(alpha).abs() < 1e3 * tol {
            Some((beta, self.boundary.wrap(alpha)))
        } else {
            None
        }
    }
}

fn cross2d(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn cross2d_v(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

fn segments_cross(s1: &Seg, s2: &Seg) -> bool {
    let d1 = s1.p1 - s1.p0;
    let d2 = s2.p1 - s2.p0;
    let denom = cross2d_v(&d1, &d2);
    if denom.abs() < 1e-300 {
        return false;
    }
    let w = s2.p0 - s1.p0;
    let t = cross2d_v(&w, &d2) / denom;
    let u = cross2d_v(&w, &d1) / denom;
    let eps = 1e-9;
    t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps
}

/// Sample boundary segments piece-aware so no segment spans a corner.
fn sample_segments(boundary: &ArcCurve, n_samples: usize) -> Vec<Seg> {
    let len = boundary.len();
    let mut breaks: Vec<f64> = boundary.corners().to_vec();
    if breaks.is_empty() {
        breaks.push(0.0);
    }
    let mut segs = Vec::with_capacity(n_samples + breaks.len());
    let k = breaks.len();
    for i in 0..k {
        let a = breaks[i];
        let b = if i + 1 < k { breaks[i + 1] } else { breaks[0] + len };
        let span = b - a;
        let m = ((span / len * n_samples as f64).ceil() as usize).max(4);
        let mut prev_alpha = a;
        let p = boundary.point(a);
        let mut prev_p = Vector2::new(p.x, p.y);
        for j in 1..=m {
            let alpha = a + span * j as f64 / m as f64;
            let q = boundary.point(alpha);
            let q2 = Vector2::new(q.x, q.y);
            segs.push(Seg { alpha0: prev_alpha, alpha1: alpha, p0: prev_p, p1: q2 });
            prev_alpha = alpha;
            prev_p = q2;
        }
    }
    segs
}

/// Maximal intervals where |kappa_c| stays below the flatness threshold.
fn flat_intervals_of(boundary: &ArcCurve, diameter: f64) -> Vec<(f64, f64)> {
    let eps_flat = if boundary.is_sampled() { 1e-4 } else { 1e-8 / diameter };
    let len = boundary.len();
    let mut breaks: Vec<f64> = boundary.corners().to_vec();
    if breaks.is_empty() {
        breaks.push(0.0);
    }
    let mut out = Vec::new();
    let k = breaks.len();
    for i in 0..k {
        let a = breaks[i];
        let b = if i + 1 < k { breaks[i + 1] } else { breaks[0] + len };
        let span = b - a;
        let m = ((span / len * 4096.0).ceil() as usize).max(8);
        let h = span / m as f64;
        let mut run_start: Option<f64> = None;
        for j in 0..m {
            let alpha = a + (j as f64 + 0.5) * h;
            let flat = match darboux_reference(boundary, alpha) {
                Ok(f) => f.kappa_c.abs() < eps_flat,
                Err(_) => false,
            };
            match (flat, run_start) {
                (true, None) => run_start = Some(alpha - 0.5 * h),
                (false, Some(s)) => {
                    out.push((s, alpha - 0.5 * h));
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            out.push((s, b));
        }
    }
    // drop slivers shorter than the scan resolution
    out.retain(|(s, e)| e - s > 1e-3 * len / 4096.0 * 8.0);
    out
}
