//! The ruling field over the boundary parameter: ruling lengths and opposite
//! feet, the ruled sets, the pairwise non-crossing check, and extraction of
//! the junction rulings that bound the ruled part of the region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::framed::{FrameData, FramedCurve};
use crate::geom::{cross2, plane_normal, Vec3};
use crate::region::BoundaryRegion;
use crate::error::Result;
use crate::tol::Tolerances;

/// Ruling length from the foot at `alpha`: the exit distance of the ray
/// along the reference ruling direction.
pub fn beta_hat(fc: &FramedCurve, region: &BoundaryRegion, alpha: f64) -> Result<f64> {
    let data = FrameData::at(fc, region, alpha)?;
    let (beta, _) = region.ray_exit(alpha, &data.f)?;
    Ok(beta)
}

/// Opposite ruling foot: the boundary parameter where the ruling from
/// `alpha` exits, satisfying c(mu) = c(alpha) + beta_hat * f.
pub fn mu(fc: &FramedCurve, region: &BoundaryRegion, alpha: f64) -> Result<f64> {
    let data = FrameData::at(fc, region, alpha)?;
    let (_, exit) = region.ray_exit(alpha, &data.f)?;
    Ok(exit)
}

/// Residual of the image-side ruling condition:
/// |d(mu(alpha)) - d(alpha) - beta_hat(alpha) g(alpha)|.
pub fn check_m1(fc: &FramedCurve, region: &BoundaryRegion, alpha: f64) -> Result<f64> {
    let data = FrameData::at(fc, region, alpha)?;
    let (beta, exit) = region.ray_exit(alpha, &data.f)?;
    let lhs = fc.curve.point(exit);
    let rhs = fc.curve.point(alpha) + data.g * beta;
    Ok((lhs - rhs).norm())
}

/// Outcome of the pairwise non-crossing test for two ruling feet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M2Pair {
    pub ok: bool,
    /// Scalar witness M1*M2*M3 built from |f x f'|^2 and the two projected
    /// intersection functionals; reported for diagnostics.
    pub witness: f64,
    /// Parameters of the supporting-line intersection along each ruling,
    /// when the rulings are not parallel.
    pub intersection: Option<(f64, f64)>,
}

/// Check that the rulings footed at `alpha` and `alpha_p` coincide, share an
/// endpoint, or are disjoint. The verdict is the segment-intersection test;
/// the scalar witness is reported alongside.
pub fn check_m2_pair(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    alpha: f64,
    alpha_p: f64,
) -> Result<M2Pair> {
    let da = FrameData::at(fc, region, alpha)?;
    let db = FrameData::at(fc, region, alpha_p)?;
    let (beta_a, _) = region.ray_exit(alpha, &da.f)?;
    let (beta_b, _) = region.ray_exit(alpha_p, &db.f)?;
    let ca = region.boundary().point(alpha);
    let cb = region.boundary().point(alpha_p);

    // f' at alpha_p from the spread representation
    let f1_b = (db.reference.tangent * db.g_m - db.reference.inward * db.g_t) * -db.spread;
    let normal = plane_normal();
    let m1 = {
        let c = da.f.cross(&db.f).norm();
        c * c
    };
    let m3 = f1_b.dot(&(cb - ca));
    let m2 = m3 - beta_a * db.f.cross(&normal).dot(&da.f);
    let witness = m1 * m2 * m3;

    let denom = cross2(&da.f, &db.f);
    let parallel_tol = 1e-12;
    let margin = 1e-9 * beta_a.min(beta_b);
    let (ok, intersection) = if denom.abs() <= parallel_tol {
        (true, None)
    } else {
        // ca + ta * fa = cb + tb * fb
        let w = cb - ca;
        let ta = cross2(&w, &db.f) / denom;
        let tb = cross2(&w, &da.f) / denom;
        let interior_a = ta > margin && ta < beta_a - margin;
        let interior_b = tb > margin && tb < beta_b - margin;
        (!(interior_a && interior_b), Some((ta, tb)))
    };

    Ok(M2Pair { ok, witness, intersection })
}

/// Category of a junction (boundary) ruling, by endpoint behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RulingCategory {
    /// Some endpoint is a smooth, transversal, curved boundary point.
    L1,
    /// Some endpoint is a smooth, transversal boundary point with n' = 0.
    L2,
    /// Every endpoint is a corner or a tangency.
    L3,
}

/// A limiting ruling bounding the ruled region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryRuling {
    /// Foot parameter on the side the limit was taken from.
    pub foot: f64,
    /// Opposite foot (limit of mu).
    pub opposite: f64,
    /// Ruling length (may be zero).
    pub length: f64,
    /// In-plane ruling direction at the foot.
    #[serde(skip)]
    pub dir: Vec3,
    /// Image ruling direction at the foot.
    #[serde(skip)]
    pub image_dir: Vec3,
    pub category: RulingCategory,
    /// Index of the gap this ruling borders.
    pub gap: usize,
    /// -1.0 if the limit was taken from below the foot, +1.0 from above.
    pub side: f64,
}

/// Per-sample ruling data on the uniform grid.
#[derive(Debug, Clone)]
pub struct Sample {
    pub alpha: f64,
    pub in_corner_set: bool,
    /// kappa_n above threshold away from corners.
    pub in_tilde: bool,
    /// Additionally the opposite foot is regular.
    pub in_hat: bool,
    pub kappa_n: f64,
    pub n1_norm: f64,
    pub data: Option<SampleRuling>,
}

#[derive(Debug, Clone)]
pub struct SampleRuling {
    pub f: Vec3,
    pub g: Vec3,
    pub g_t: f64,
    pub g_m: f64,
    pub spread: f64,
    pub normal: Vec3,
    /// (beta_hat, mu) when the ray exits transversally.
    pub exit: Option<(f64, f64)>,
}

/// One maximal interval of the fully ruled set, with one-sided limits of the
/// ruling data extrapolated to its endpoints.
#[derive(Debug, Clone)]
pub struct HatInterval {
    pub a: f64,
    pub b: f64,
    /// Grid sample index range (inclusive); `last` may exceed n_alpha when
    /// the run wraps the periodic seam.
    pub first: usize,
    pub last: usize,
    /// Covers the whole parameter circle.
    pub full_circle: bool,
    pub limit_a: Option<EndLimit>,
    pub limit_b: Option<EndLimit>,
}

/// One maximal interval of the complement of the ruled set.
#[derive(Debug, Clone)]
pub struct Gap {
    pub a: f64,
    pub b: f64,
    pub len: f64,
    pub zero_length: bool,
}

/// Extrapolated one-sided limits of the ruling data at an interval endpoint.
#[derive(Debug, Clone)]
pub struct EndLimit {
    pub f: Vec3,
    pub g: Vec3,
    pub beta: f64,
    pub mu: f64,
    /// Disagreement between two extrapolation steps (divergence signal).
    pub stability: f64,
}

/// The assembled ruling field on a uniform midpoint grid.
#[derive(Debug, Clone)]
pub struct RulingField {
    pub n_alpha: usize,
    pub length: f64,
    pub samples: Vec<Sample>,
    pub intervals: Vec<HatInterval>,
    pub gaps: Vec<Gap>,
    pub boundary_rulings: Vec<BoundaryRuling>,
    pub tol: Tolerances,
}

impl RulingField {
    pub fn compute(
        fc: &FramedCurve,
        region: &BoundaryRegion,
        n_alpha: usize,
        tol: &Tolerances,
    ) -> Self {
        let len = fc.len();
        let h = len / n_alpha as f64;
        let eps_kappa = tol.eps_kappa;

        let samples: Vec<Sample> = (0..n_alpha)
            .into_par_iter()
            .map(|i| {
                let alpha = (i as f64 + 0.5) * h;
                sample_at(fc, region, alpha, eps_kappa)
            })
            .collect();

        let (intervals, gaps) = build_intervals(fc, region, &samples, h, eps_kappa);
        let boundary_rulings = classify_boundary_rulings(fc, region, &intervals, &gaps, tol);

        Self {
            n_alpha,
            length: len,
            samples,
            intervals,
            gaps,
            boundary_rulings,
            tol: tol.clone(),
        }
    }

    /// Interval lists for the two ruled sets (kappa_n != 0; both feet regular).
    pub fn admissible_sets(&self) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let h = self.length / self.n_alpha as f64;
        let tilde = runs_of(&self.samples, h, |s| s.in_tilde);
        let hat = self.intervals.iter().map(|iv| (iv.a, iv.b)).collect();
        (tilde, hat)
    }

    /// Signed periodic difference in (-len/2, len/2].
    pub fn wrap_signed(&self, d: f64) -> f64 {
        let mut d = d.rem_euclid(self.length);
        if d > 0.5 * self.length {
            d -= self.length;
        }
        d
    }

    /// Count of grid samples where g_m falls below the tangency scale
    /// (diagnostic; finite for admissible data).
    pub fn near_tangent_count(&self, eps: f64) -> usize {
        self.samples
            .iter()
            .filter(|s| s.data.as_ref().is_some_and(|d| d.g_m < eps))
            .count()
    }
}

fn sample_at(fc: &FramedCurve, region: &BoundaryRegion, alpha: f64, eps_kappa: f64) -> Sample {
    let in_corner_set = fc.curve.is_corner(alpha);
    let (kappa_n, n1_norm) = if in_corner_set {
        (f64::NAN, f64::NAN)
    } else {
        match fc.image_frame(alpha) {
            Ok(frame) => (frame.kappa_n, fc.normal.deriv(alpha).norm()),
            Err(_) => (f64::NAN, f64::NAN),
        }
    };
    let in_tilde = !in_corner_set && kappa_n.is_finite() && kappa_n.abs() >= eps_kappa;
    if !in_tilde {
        return Sample {
            alpha,
            in_corner_set,
            in_tilde,
            in_hat: false,
            kappa_n,
            n1_norm,
            data: None,
        };
    }

    let data = FrameData::at(fc, region, alpha).ok();
    let (exit, in_hat) = match &data {
        Some(d) => match region.ray_exit(alpha, &d.f) {
            Ok((beta, mu_val)) => {
                let opposite_ok = !fc.curve.is_corner(mu_val)
                    && fc
                        .image_frame(mu_val)
                        .map(|fr| fr.kappa_n.abs() >= eps_kappa)
                        .unwrap_or(false);
                (Some((beta, mu_val)), opposite_ok)
            }
            Err(_) => (None, false),
        },
        None => (None, false),
    };

    Sample {
        alpha,
        in_corner_set,
        in_tilde,
        in_hat,
        kappa_n,
        n1_norm,
        data: data.map(|d| SampleRuling {
            f: d.f,
            g: d.g,
            g_t: d.g_t,
            g_m: d.g_m,
            spread: d.spread,
            normal: d.image.n,
            exit,
        }),
    }
}

/// Pointwise membership predicate used for endpoint refinement.
pub fn in_hat_at(fc: &FramedCurve, region: &BoundaryRegion, alpha: f64, eps_kappa: f64) -> bool {
    if fc.curve.is_corner(alpha) {
        return false;
    }
    let Ok(frame) = fc.image_frame(alpha) else {
        return false;
    };
    if !frame.kappa_n.is_finite() || frame.kappa_n.abs() < eps_kappa {
        return false;
    }
    let Ok(data) = FrameData::at(fc, region, alpha) else {
        return false;
    };
    let Ok((_, mu_val)) = region.ray_exit(alpha, &data.f) else {
        return false;
    };
    !fc.curve.is_corner(mu_val)
        && fc
            .image_frame(mu_val)
            .map(|fr| fr.kappa_n.abs() >= eps_kappa)
            .unwrap_or(false)
}

fn runs_of(samples: &[Sample], h: f64, pred: impl Fn(&Sample) -> bool) -> Vec<(f64, f64)> {
    let n = samples.len();
    let len = n as f64 * h;
    let mut runs = Vec::new();
    let mut start: Option<f64> = None;
    for s in samples {
        match (pred(s), start) {
            (true, None) => start = Some(s.alpha - 0.5 * h),
            (false, Some(a)) => {
                runs.push((a, s.alpha - 0.5 * h));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        if pred(&samples[0]) && !runs.is_empty() && runs[0].0 <= 1e-12 * len {
            let first = runs.remove(0);
            runs.push((a, first.1 + len));
        } else {
            runs.push((a, len));
        }
    }
    runs
}

fn build_intervals(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    samples: &[Sample],
    h: f64,
    eps_kappa: f64,
) -> (Vec<HatInterval>, Vec<Gap>) {
    let n = samples.len();
    let len = n as f64 * h;
    let all_in = samples.iter().all(|s| s.in_hat);
    if all_in && fc.corners().is_empty() {
        let iv = HatInterval {
            a: 0.0,
            b: len,
            first: 0,
            last: n - 1,
            full_circle: true,
            limit_a: None,
            limit_b: None,
        };
        return (vec![iv], Vec::new());
    }
    if samples.iter().all(|s| !s.in_hat) {
        let gap = Gap { a: 0.0, b: len, len, zero_length: false };
        return (Vec::new(), vec![gap]);
    }

    // corner parameters are excluded from the ruled set by definition but
    // can be invisible to the midpoint grid; runs get split at any corner
    // they span, leaving a zero-length gap whose one-sided limits carry the
    // junction ruling
    let mut split_runs: Vec<(f64, f64)> = Vec::new();
    let split_at_corners = |a: f64, b: f64, out: &mut Vec<(f64, f64)>| {
        let mut cuts: Vec<f64> = Vec::new();
        for &c in fc.corners() {
            for lift in [c, c + len] {
                if lift > a + 1e-12 * len && lift < b - 1e-12 * len {
                    cuts.push(lift);
                }
            }
        }
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut lo = a;
        for cut in cuts {
            out.push((lo, cut));
            lo = cut;
        }
        out.push((lo, b));
    };

    if all_in {
        // fully ruled but with declared corners: one periodic run anchored
        // at the first corner
        let c0 = fc.corners()[0];
        split_at_corners(c0, c0 + len, &mut split_runs);
    } else {
        // index runs of in_hat samples, merged across the periodic seam
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut start: Option<usize> = None;
        for (i, s) in samples.iter().enumerate() {
            match (s.in_hat, start) {
                (true, None) => start = Some(i),
                (false, Some(a)) => {
                    runs.push((a, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(a) = start {
            if samples[0].in_hat && !runs.is_empty() && runs[0].0 == 0 {
                let first = runs.remove(0);
                runs.push((a, first.1 + n));
            } else {
                runs.push((a, n - 1));
            }
        }
        for &(i0, i1) in &runs {
            let a = samples[i0 % n].alpha + if i0 >= n { len } else { 0.0 };
            let b = samples[i1 % n].alpha + if i1 >= n { len } else { 0.0 };
            split_at_corners(a, b, &mut split_runs);
        }
    }

    let refine = |lo: f64, hi: f64, lo_in: bool| -> f64 {
        let mut lo = lo;
        let mut hi = hi;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if in_hat_at(fc, region, mid, eps_kappa) == lo_in {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-14 * len {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    // transitions that bisect into a corner's exclusion band snap onto the
    // corner itself so gap arcs start exactly at the singular parameter
    let snap = |x: f64| -> f64 {
        match fc.curve.nearest_corner(x) {
            Some((c, d)) if d < 1e-7 * len => {
                // keep the periodic lift of x
                x + crate::geom::wrap_signed(c - x, len)
            }
            _ => x,
        }
    };
    let mut intervals: Vec<HatInterval> = split_runs
        .iter()
        .map(|&(a_in, b_in)| {
            // endpoints landing on a declared corner are already exact
            let corner_snap = |x: f64| fc.curve.corner_distance(x) < 1e-12 * len;
            let a = if corner_snap(a_in) { a_in } else { snap(refine(a_in - h, a_in, false)) };
            let b = if corner_snap(b_in) { b_in } else { snap(refine(b_in, b_in + h, true)) };
            let first = ((a / h - 0.5).ceil().max(0.0)) as usize;
            let last = ((b / h - 0.5).floor().max(0.0)) as usize;
            HatInterval {
                a,
                b,
                first,
                last,
                full_circle: false,
                limit_a: None,
                limit_b: None,
            }
        })
        .collect();
    intervals.sort_by(|x, y| x.a.partial_cmp(&y.a).unwrap());

    for iv in &mut intervals {
        let span = iv.b - iv.a;
        let he = h.min(span / 8.0).max(1e-9 * len);
        iv.limit_a = end_limit(fc, region, iv.a, 1.0, he, eps_kappa);
        iv.limit_b = end_limit(fc, region, iv.b, -1.0, he, eps_kappa);
    }

    let mut gaps = Vec::new();
    for i in 0..intervals.len() {
        let b = intervals[i].b;
        let a_next = if i + 1 < intervals.len() {
            intervals[i + 1].a
        } else {
            intervals[0].a + len
        };
        let gap_len = (a_next - b).max(0.0);
        gaps.push(Gap {
            a: b.rem_euclid(len),
            b: a_next.rem_euclid(len),
            len: gap_len,
            zero_length: gap_len < 1e-7 * len,
        });
    }

    (intervals, gaps)
}

fn end_limit(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    at: f64,
    side_into: f64,
    h: f64,
    eps_kappa: f64,
) -> Option<EndLimit> {
    let probe = |x: f64| -> Option<(Vec3, Vec3, f64, f64)> {
        if !in_hat_at(fc, region, x, eps_kappa) {
            return None;
        }
        let d = FrameData::at(fc, region, x).ok()?;
        let (beta, mu_val) = region.ray_exit(x, &d.f).ok()?;
        Some((d.f, d.g, beta, mu_val))
    };

    let len = fc.len();
    let extrap = |h: f64| -> Option<(Vec3, Vec3, f64, f64)> {
        let p1 = probe(at + side_into * h)?;
        let p2 = probe(at + side_into * 2.0 * h)?;
        let p3 = probe(at + side_into * 3.0 * h)?;
        let v = |a: Vec3, b: Vec3, c: Vec3| a * 3.0 - b * 3.0 + c;
        let s = |a: f64, b: f64, c: f64| 3.0 * a - 3.0 * b + c;
        // mu may wrap the seam; extrapolate an unwrapped lift
        let lift = |base: f64, x: f64| base + (x - base + 0.5 * len).rem_euclid(len) - 0.5 * len;
        let m1 = p1.3;
        let m2 = lift(m1, p2.3);
        let m3 = lift(m1, p3.3);
        Some((
            v(p1.0, p2.0, p3.0),
            v(p1.1, p2.1, p3.1),
            s(p1.2, p2.2, p3.2),
            s(m1, m2, m3).rem_euclid(len),
        ))
    };

    let fine = extrap(h)?;
    let coarse = extrap(1.5 * h);
    let stability = coarse
        .map(|c| (fine.0 - c.0).norm().max((fine.1 - c.1).norm()))
        .unwrap_or(f64::INFINITY);
    let fnorm = fine.0.norm();
    if fnorm < 0.5 {
        return None;
    }
    Some(EndLimit {
        f: fine.0 / fnorm,
        g: fine.1.normalize(),
        beta: fine.2,
        mu: fine.3,
        stability,
    })
}

fn classify_boundary_rulings(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    intervals: &[HatInterval],
    gaps: &[Gap],
    tol: &Tolerances,
) -> Vec<BoundaryRuling> {
    if intervals.is_empty() || intervals[0].full_circle {
        return Vec::new();
    }
    let len = fc.len();
    let mut out = Vec::new();
    for gi in 0..gaps.len() {
        let left_iv = &intervals[gi];
        let right_iv = &intervals[(gi + 1) % intervals.len()];
        if let Some(lim) = &left_iv.limit_b {
            out.push(make_ruling(fc, region, left_iv.b.rem_euclid(len), lim, gi, -1.0, tol));
        }
        if let Some(lim) = &right_iv.limit_a {
            out.push(make_ruling(fc, region, right_iv.a.rem_euclid(len), lim, gi, 1.0, tol));
        }
    }
    out
}

fn make_ruling(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    foot: f64,
    lim: &EndLimit,
    gap: usize,
    side: f64,
    tol: &Tolerances,
) -> BoundaryRuling {
    let eps_n = if fc.is_sampled() { tol.eps_n } else { tol.eps_n / fc.len() };
    // interval endpoints sit where |kappa_n| crosses eps_kappa, so |n'| there
    // is of that order; the flat test must dominate it
    let eps_flat = eps_n.max(10.0 * tol.eps_kappa);
    let corner_tie = 1e-7 * fc.len();

    // endpoint properties: (corner, tangent, n' = 0)
    let endpoint_class = |alpha: f64, dir: &Vec3| -> (bool, bool, bool) {
        let corner = fc.curve.corner_distance(alpha) < corner_tie;
        if corner {
            return (true, false, false);
        }
        let t = region.boundary().deriv_unchecked(alpha);
        let inward = plane_normal().cross(&t);
        let tangent = dir.dot(&inward).abs() < 1e-6;
        let flat = fc.normal.deriv(alpha).norm() < eps_flat;
        (false, tangent, flat)
    };

    let (c_a, t_a, f_a) = endpoint_class(foot, &lim.f);
    let neg = -lim.f;
    let (c_b, t_b, f_b) = endpoint_class(lim.mu, &neg);

    let l1 = |c: bool, t: bool, f: bool| !c && !t && !f;
    let l2 = |c: bool, t: bool, f: bool| !c && !t && f;
    let category = if l1(c_a, t_a, f_a) || l1(c_b, t_b, f_b) {
        RulingCategory::L1
    } else if l2(c_a, t_a, f_a) || l2(c_b, t_b, f_b) {
        RulingCategory::L2
    } else {
        RulingCategory::L3
    };

    BoundaryRuling {
        foot,
        opposite: lim.mu,
        length: lim.beta,
        dir: lim.f,
        image_dir: lim.g,
        category,
        gap,
        side,
    }
}

/// Result of the pairwise non-crossing sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M2Sweep {
    pub checked_pairs: usize,
    pub violations: usize,
    /// Worst offending pair (alpha, alpha', witness), if any.
    pub worst: Option<(f64, f64, f64)>,
}

/// Pairwise check over a decimated grid of ruled samples plus every sample
/// adjacent to a junction ruling.
pub fn m2_sweep(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    field: &RulingField,
    max_pairs: usize,
    exhaustive: bool,
) -> M2Sweep {
    let feet: Vec<f64> = field
        .samples
        .iter()
        .filter(|s| s.in_tilde && s.data.as_ref().is_some_and(|d| d.exit.is_some()))
        .map(|s| s.alpha)
        .collect();
    let n = feet.len();
    if n < 2 {
        return M2Sweep { checked_pairs: 0, violations: 0, worst: None };
    }
    let stride = if exhaustive {
        1
    } else {
        let mut k = 1usize;
        while (n / k).saturating_mul(n / k) / 2 > max_pairs {
            k += 1;
        }
        k
    };
    let mut picked: Vec<f64> = feet.iter().copied().step_by(stride).collect();
    let band = 4.0 * field.length / field.n_alpha as f64;
    for br in &field.boundary_rulings {
        for &alpha in &feet {
            if (alpha - br.foot).abs() < band {
                picked.push(alpha);
            }
        }
    }
    picked.sort_by(|a, b| a.partial_cmp(b).unwrap());
    picked.dedup();

    let results: Vec<(f64, f64, bool, f64)> = picked
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, &a)| {
            let picked = &picked;
            (i + 1..picked.len()).filter_map(move |j| {
                let b = picked[j];
                check_m2_pair(fc, region, a, b)
                    .ok()
                    .map(|pair| (a, b, pair.ok, pair.witness))
            })
        })
        .collect();

    let checked_pairs = results.len();
    let mut violations = 0;
    let mut worst: Option<(f64, f64, f64)> = None;
    for (a, b, ok, witness) in results {
        if !ok {
            violations += 1;
            if worst.map(|w| witness < w.2).unwrap_or(true) {
                worst = Some((a, b, witness));
            }
        }
    }
    M2Sweep { checked_pairs, violations, worst }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    fn tol() -> Tolerances {
        Tolerances::analytic()
    }

    #[test]
    fn rectangle_mu_arithmetic() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        for &alpha in &[0.25, 1.0, 1.75] {
            let b = beta_hat(&p.framed, &p.region, alpha).unwrap();
            assert_relative_eq!(b, 1.0, epsilon = 1e-10);
            let m = mu(&p.framed, &p.region, alpha).unwrap();
            // mu(alpha) = 2L + W - alpha on the bottom edge
            assert_relative_eq!(m, 5.0 - alpha, epsilon = 1e-9);
            let mm = mu(&p.framed, &p.region, m).unwrap();
            assert_relative_eq!(mm, alpha, epsilon = 1e-8);
        }
    }

    #[test]
    fn cone_mu_preserves_polar_angle() {
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        for &alpha in &[0.3, 1.0, 1.7] {
            let b = beta_hat(&p.framed, &p.region, alpha).unwrap();
            assert_relative_eq!(b, 1.0, epsilon = 1e-9);
            let m = mu(&p.framed, &p.region, alpha).unwrap();
            let outer = p.region.boundary().point(alpha);
            let inner = p.region.boundary().point(m);
            assert_relative_eq!(
                outer.y.atan2(outer.x),
                inner.y.atan2(inner.x),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn diametral_rulings_on_disk() {
        // constant tilt of the normal over a flat disk image gives radial
        // rulings: beta_hat = 2R and mu antipodal
        let region = presets::unit_disk_region();
        let tau = std::f64::consts::TAU;
        let curve = crate::geom::ArcCurve::analytic(
            tau,
            vec![],
            |a| Vec3::new(a.cos(), a.sin(), 0.0),
            |a| Vec3::new(-a.sin(), a.cos(), 0.0),
            |a| Vec3::new(-a.cos(), -a.sin(), 0.0),
        );
        let zeta = 0.3_f64;
        let normal = crate::framed::NormalField::analytic(
            tau,
            move |a: f64| {
                Vec3::new(0.0, 0.0, zeta.cos()) - Vec3::new(a.cos(), a.sin(), 0.0) * zeta.sin()
            },
            move |a: f64| Vec3::new(a.sin(), -a.cos(), 0.0) * zeta.sin(),
        );
        let fc = crate::framed::FramedCurve::new(curve, normal);
        let b = beta_hat(&fc, &region, 1.0).unwrap();
        assert_relative_eq!(b, 2.0, epsilon = 1e-9);
        let m = mu(&fc, &region, 1.0).unwrap();
        assert_relative_eq!(m, 1.0 + std::f64::consts::PI, epsilon = 1e-7);
    }

    #[test]
    fn m1_residuals() {
        let cyl = presets::cylinder_wrap(2.0, 1.0, 0.5);
        assert!(check_m1(&cyl.framed, &cyl.region, 0.5).unwrap() < 1e-10);
        let cone = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        assert!(check_m1(&cone.framed, &cone.region, 1.2).unwrap() < 1e-9);

        let stretched = presets::rim_stretch(2.0, 1.0, 0.5, 0.01);
        let r = check_m1(&stretched.framed, &stretched.region, 1.0).unwrap();
        assert_relative_eq!(r, 0.01, epsilon = 1e-6);
    }

    #[test]
    fn m2_pairs_on_presets() {
        let cyl = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let pair = check_m2_pair(&cyl.framed, &cyl.region, 0.4, 1.3).unwrap();
        assert!(pair.ok);
        assert!(pair.witness.abs() < 1e-12, "parallel rulings: witness 0");

        let cone = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        let pair = check_m2_pair(&cone.framed, &cone.region, 0.5, 1.4).unwrap();
        assert!(pair.ok);
        // radial rulings meet at the flat center, beyond the inner arc
        let (ta, _) = pair.intersection.unwrap();
        assert!(ta > 1.5, "intersection beyond the ruling: {ta}");
    }

    #[test]
    fn crossing_defect_fails_m2() {
        let p = presets::crossing_twist(0.5);
        let field = RulingField::compute(&p.framed, &p.region, 512, &tol());
        let sweep = m2_sweep(&p.framed, &p.region, &field, 100_000, false);
        assert!(sweep.violations > 0, "expected crossings, got none");
    }

    #[test]
    fn admissible_presets_pass_m2_sweep() {
        for p in presets::all_admissible() {
            let field = RulingField::compute(&p.framed, &p.region, 512, &tol());
            let sweep = m2_sweep(&p.framed, &p.region, &field, 50_000, false);
            assert_eq!(sweep.violations, 0, "{}: {:?}", p.name, sweep.worst);
        }
    }

    #[test]
    fn admissible_sets_of_presets() {
        let tol = tol();
        let plane = presets::plane_identity();
        let field = RulingField::compute(&plane.framed, &plane.region, 256, &tol);
        let (tilde, hat) = field.admissible_sets();
        assert!(tilde.is_empty());
        assert!(hat.is_empty());

        let cyl = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let field = RulingField::compute(&cyl.framed, &cyl.region, 1024, &tol);
        let (_, hat) = field.admissible_sets();
        assert_eq!(hat.len(), 2, "two curved edges: {hat:?}");
        let total: f64 = hat.iter().map(|(a, b)| b - a).sum();
        assert!((total - 4.0).abs() < 0.02, "curved length ~ 2L, got {total}");
    }

    #[test]
    fn involution_and_monotonicity_on_grid() {
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        let field = RulingField::compute(&p.framed, &p.region, 1024, &tol());
        let h = field.length / field.n_alpha as f64;
        let mut checked = 0;
        for s in &field.samples {
            if !s.in_hat {
                continue;
            }
            let Some((_, m)) = s.data.as_ref().and_then(|d| d.exit) else { continue };
            let mm = mu(&p.framed, &p.region, m).unwrap();
            assert!(
                field.wrap_signed(mm - s.alpha).abs() < 1e-7 * field.length,
                "involution at {}",
                s.alpha
            );
            if in_hat_at(&p.framed, &p.region, s.alpha + h, tol().eps_kappa) {
                let m2 = mu(&p.framed, &p.region, s.alpha + h).unwrap();
                assert!(field.wrap_signed(m2 - m) < 0.0, "mu not decreasing at {}", s.alpha);
            }
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn antisymmetry_and_normal_match() {
        let p = presets::two_cylinder(1.0, 1.0, 0.5, 0.25);
        let field = RulingField::compute(&p.framed, &p.region, 512, &tol());
        for s in field.samples.iter().filter(|s| s.in_hat) {
            let d = s.data.as_ref().unwrap();
            let (_, m) = d.exit.unwrap();
            let dm = FrameData::at(&p.framed, &p.region, m).unwrap();
            assert!((dm.f + d.f).norm() < 1e-7, "f antisymmetry at {}", s.alpha);
            assert!((dm.g + d.g).norm() < 1e-7, "g antisymmetry at {}", s.alpha);
            assert!(
                (dm.image.n - d.normal).norm() < 1e-7,
                "normal match at {}",
                s.alpha
            );
        }
    }

    #[test]
    fn mu_derivative_identity() {
        // |mu'| |d'(mu) x g| = |g_m - beta_hat G|
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        for &alpha in &[0.4, 0.9, 1.6] {
            let d = FrameData::at(&p.framed, &p.region, alpha).unwrap();
            let (beta, m) = p.region.ray_exit(alpha, &d.f).unwrap();
            let h = 1e-6;
            let m_p = mu(&p.framed, &p.region, alpha + h).unwrap();
            let m_m = mu(&p.framed, &p.region, alpha - h).unwrap();
            let mu1 = (m_p - m_m) / (2.0 * h);
            assert!(mu1 < 0.0);
            let dmu = p.framed.curve.deriv(m).unwrap();
            let lhs = mu1.abs() * dmu.cross(&d.g).norm();
            let rhs = (d.g_m - beta * d.spread).abs();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-6);
        }
    }

    #[test]
    fn junction_ruling_of_composite_is_l3() {
        let p = presets::two_cylinder(1.0, 1.0, 0.5, 0.25);
        let field = RulingField::compute(&p.framed, &p.region, 1024, &tol());
        let l3: Vec<_> = field
            .boundary_rulings
            .iter()
            .filter(|r| r.category == RulingCategory::L3 && r.length > 0.5)
            .collect();
        assert!(!l3.is_empty(), "junction chord must be L3: {:?}", field.boundary_rulings);
        let junction = l3
            .iter()
            .find(|r| (r.foot - 1.0).abs() < 1e-3 || (r.foot - 4.0).abs() < 1e-3)
            .expect("junction at alpha = 1 or 4");
        assert_relative_eq!(junction.length, 1.0, epsilon = 1e-3);
    }

    #[test]
    fn stadium_junction_rulings_are_l2() {
        let p = presets::stadium_roll(2.0, 1.0, 1.0);
        let field = RulingField::compute(&p.framed, &p.region, 1024, &tol());
        assert!(!field.boundary_rulings.is_empty());
        for r in &field.boundary_rulings {
            assert_eq!(r.category, RulingCategory::L2, "{r:?}");
            assert_relative_eq!(r.length, 1.0, epsilon = 1e-2);
        }
    }

    #[test]
    fn cylinder_edge_rulings_land_on_corners() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let field = RulingField::compute(&p.framed, &p.region, 1024, &tol());
        assert_eq!(field.gaps.len(), 2);
        for r in &field.boundary_rulings {
            assert_eq!(r.category, RulingCategory::L3, "{r:?}");
        }
    }

    #[test]
    fn margin_inequalities_hold() {
        for p in presets::all_admissible() {
            let field = RulingField::compute(&p.framed, &p.region, 512, &tol());
            for s in field.samples.iter() {
                let Some(d) = &s.data else { continue };
                let Some((beta, _)) = d.exit else { continue };
                let margin = d.g_m - beta * d.spread;
                if s.in_hat {
                    assert!(margin > 0.0, "{}: strict margin at {}", p.name, s.alpha);
                }
                if s.in_tilde {
                    assert!(margin >= -1e-10, "{}: weak margin at {}", p.name, s.alpha);
                }
            }
        }
    }
}
