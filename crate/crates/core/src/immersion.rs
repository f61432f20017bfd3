//! Reconstruction of the isometric immersion from an admissible framed
//! curve: ruled patches over the fully ruled set, rigid placement of the
//! planar gaps, pointwise evaluation with its gradient field, and the
//! regularity verification suite.

use nalgebra::{Matrix3, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framed::{FrameData, FramedCurve};
use crate::geom::{cross2, plane_normal, Vec3};
use crate::region::{BoundaryRegion, Membership};
use crate::rulings::{RulingCategory, RulingField};

pub type Mat3 = Matrix3<f64>;

/// Light-weight ruling directions at a parameter: (f, g) without the spread.
///
/// Unlike the frame accessors this does not refuse parameters inside the
/// corner guard band: point location legitimately converges onto junction
/// feet, where the piecewise evaluators still pick a deterministic side.
fn ruling_dirs(fc: &FramedCurve, region: &BoundaryRegion, alpha: f64) -> Result<(Vec3, Vec3)> {
    let t = fc.curve.deriv_unchecked(alpha);
    let n = fc.normal.value(alpha);
    let n1 = fc.normal.deriv(alpha);
    let norm = n1.norm();
    let eps_n = fc.default_eps_n();
    if norm < eps_n {
        return Err(Error::ZeroNormalDerivative(alpha));
    }
    let kappa_n = -n1.dot(&t);
    let g = n1.cross(&n) * (kappa_n.signum() / norm);
    let g_t = g.dot(&t);
    let g_m = (1.0 - g_t * g_t).max(0.0).sqrt();
    let t_ref = region.boundary().deriv_unchecked(alpha);
    let inward = plane_normal().cross(&t_ref);
    Ok((t_ref * g_t + inward * g_m, g))
}

/// One ruled fan: a maximal ruled interval together with a dense table of
/// feet used to bracket point-location queries.
#[derive(Debug, Clone)]
struct RuledCell {
    table: Vec<(f64, Vec3, Vec3, f64)>,
    a: f64,
    b: f64,
}

/// A connected flat piece of the region, mapped by one rigid motion.
#[derive(Debug, Clone)]
pub struct PlanarComponent {
    /// Gap indices (arcs of the boundary) bounding the component.
    pub gaps: Vec<usize>,
    pub rotation: Mat3,
    pub translation: Vec3,
    /// Constant image normal over the component.
    pub normal: Vec3,
    /// Worst rigid-fit residual over the component's boundary arcs.
    pub fit_residual: f64,
    /// Sampled closed outline in the reference plane.
    outline: Vec<Vector2<f64>>,
}

/// Where a point was located.
#[derive(Debug, Clone, Copy)]
pub enum Location {
    /// Ruled fan: foot parameter and distance along the ruling.
    Ruled { alpha: f64, beta: f64 },
    /// Planar component index.
    Planar(usize),
    /// On the boundary curve at the given parameter.
    Boundary(f64),
}

/// An evaluable C1 isometric immersion of the closed region.
pub struct Immersion {
    pub fc: FramedCurve,
    pub region: BoundaryRegion,
    pub field: RulingField,
    cells: Vec<RuledCell>,
    pub planar: Vec<PlanarComponent>,
}

impl Immersion {
    pub fn cells_len(&self) -> usize {
        self.cells.len()
    }
}

/// Assemble the immersion from a computed ruling field.
pub fn build_immersion(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    field: &RulingField,
) -> Result<Immersion> {
    let len = fc.len();
    let h = len / field.n_alpha as f64;

    // ruled fans: one per maximal interval (both halves of a physical fan
    // are kept; deterministic ordering resolves the double coverage)
    let mut cells = Vec::new();
    for iv in field.intervals.iter() {
        let mut table: Vec<(f64, Vec3, Vec3, f64)> = Vec::new();
        if let Some(lim) = &iv.limit_a {
            table.push((iv.a, region.boundary().point(iv.a), lim.f, lim.beta));
        }
        for s in &field.samples {
            for lift in [s.alpha, s.alpha + len] {
                if lift >= iv.a && lift <= iv.b {
                    if let Some(d) = &s.data {
                        if let Some((beta, _)) = d.exit {
                            table.push((lift, region.boundary().point(lift), d.f, beta));
                        }
                    }
                }
            }
        }
        if let Some(lim) = &iv.limit_b {
            table.push((iv.b, region.boundary().point(iv.b), lim.f, lim.beta));
        }
        table.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        if table.len() >= 2 {
            cells.push(RuledCell { table, a: iv.a, b: iv.b });
        }
    }

    // group gaps into connected flat components through the junction chords
    let n_gaps = field.gaps.len();
    let mut parent: Vec<usize> = (0..n_gaps).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    let gap_of_param = |alpha: f64| -> Option<usize> {
        let a = alpha.rem_euclid(len);
        let tol_match = 1e-3 * len;
        field.gaps.iter().position(|g| {
            let span = if g.b >= g.a { g.b - g.a } else { g.b + len - g.a };
            let local = (a - g.a).rem_euclid(len);
            local <= span + tol_match || (local - len).abs() <= tol_match
        })
    };
    for r in &field.boundary_rulings {
        if let Some(other) = gap_of_param(r.opposite) {
            let (a, b) = (find(&mut parent, r.gap), find(&mut parent, other));
            if a != b {
                parent[a] = b;
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for gi in 0..n_gaps {
        let root = find(&mut parent, gi);
        groups.entry(root).or_default().push(gi);
    }

    let mut planar = Vec::new();
    for (_, gap_ids) in groups {
        let total: f64 = gap_ids.iter().map(|&g| field.gaps[g].len).sum();
        if total < 1e-6 * len {
            // junction-only group (zero-length gaps); nothing flat to place
            continue;
        }
        planar.push(build_component(fc, region, field, &gap_ids, h)?);
    }

    Ok(Immersion {
        fc: fc.clone(),
        region: region.clone(),
        field: field.clone(),
        cells,
        planar,
    })
}

fn build_component(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    field: &RulingField,
    gap_ids: &[usize],
    h: f64,
) -> Result<PlanarComponent> {
    let len = fc.len();
    let eps_n = fc.default_eps_n();

    // the longest smooth sub-arc of the component anchors the rigid motion
    let mut anchor: Option<(f64, f64)> = None;
    for &gi in gap_ids {
        let g = &field.gaps[gi];
        let span = if g.b >= g.a { g.b - g.a } else { g.b + len - g.a };
        let mut cuts = vec![0.0, span];
        for &c in fc.corners() {
            let local = (c - g.a).rem_euclid(len);
            if local > 1e-9 * len && local < span - 1e-9 * len {
                cuts.push(local);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in cuts.windows(2) {
            let piece = w[1] - w[0];
            if anchor.map(|(_, best)| piece > best).unwrap_or(true) {
                anchor = Some((g.a + 0.5 * (w[0] + w[1]), piece));
            }
        }
    }
    let (anchor_alpha, _) = anchor.ok_or(Error::GapMismatch { residual: f64::NAN, tol: 0.0 })?;

    // constant normal across the whole component
    let n0 = fc.normal.value(anchor_alpha);
    let mut normal_var: f64 = 0.0;
    for &gi in gap_ids {
        let g = &field.gaps[gi];
        let span = if g.b >= g.a { g.b - g.a } else { g.b + len - g.a };
        let m = ((span / h).ceil() as usize).max(2);
        for k in 0..=m {
            let alpha = g.a + span * k as f64 / m as f64;
            normal_var = normal_var.max((fc.normal.value(alpha) - n0).norm());
            if fc.curve.corner_distance(alpha) > 1e-6 * len {
                let n1 = fc.normal.deriv(alpha).norm();
                if n1 > 100.0 * eps_n {
                    return Err(Error::NonPlanarGap(n1));
                }
            }
        }
    }
    if normal_var > 1e-6 {
        return Err(Error::NonPlanarGap(normal_var));
    }

    // frame-anchored rigid motion, then validated on the full loop
    let t_img = fc.curve.deriv(anchor_alpha)?;
    let m_img = n0.cross(&t_img);
    let rf = crate::geom::darboux_reference(region.boundary(), anchor_alpha)?;
    let rotation = t_img * rf.tangent.transpose()
        + m_img * rf.inward.transpose()
        + n0 * rf.normal.transpose();
    let translation =
        fc.curve.point(anchor_alpha) - rotation * region.boundary().point(anchor_alpha);

    let mut fit_residual: f64 = 0.0;
    for &gi in gap_ids {
        let g = &field.gaps[gi];
        let span = if g.b >= g.a { g.b - g.a } else { g.b + len - g.a };
        let m = ((span / h).ceil() as usize).max(2);
        for k in 0..=m {
            let alpha = g.a + span * k as f64 / m as f64;
            let mapped = rotation * region.boundary().point(alpha) + translation;
            fit_residual = fit_residual.max((fc.curve.point(alpha) - mapped).norm());
        }
    }
    let tol_fit = field.tol.fit_rel * region.diameter();
    if fit_residual > tol_fit {
        return Err(Error::GapMismatch { residual: fit_residual, tol: tol_fit });
    }

    let outline = walk_outline(region, field, gap_ids, h)?;

    Ok(PlanarComponent {
        gaps: gap_ids.to_vec(),
        rotation,
        translation,
        normal: n0,
        fit_residual,
        outline,
    })
}

/// Walk the closed outline of a flat component: boundary arcs alternate with
/// junction chords.
fn walk_outline(
    region: &BoundaryRegion,
    field: &RulingField,
    gap_ids: &[usize],
    h: f64,
) -> Result<Vec<Vector2<f64>>> {
    let len = region.boundary().len();
    let tol_match = 1e-3 * len;
    let near = |x: f64, y: f64| -> bool {
        let d = (x - y).rem_euclid(len);
        d < tol_match || d > len - tol_match
    };

    // a component bounded by the whole boundary (no rulings to follow)
    let total: f64 = gap_ids.iter().map(|&g| field.gaps[g].len).sum();
    if field.boundary_rulings.is_empty() || total >= len * (1.0 - 1e-9) {
        let m = ((len / h).ceil() as usize).max(16);
        return Ok((0..m)
            .map(|k| {
                let p = region.boundary().point(len * k as f64 / m as f64);
                Vector2::new(p.x, p.y)
            })
            .collect());
    }

    let mut outline: Vec<Vector2<f64>> = Vec::new();
    let mut visited = vec![false; gap_ids.len()];
    let start_gap = gap_ids[0];
    let mut current = start_gap;
    let mut entry = field.gaps[start_gap].a;

    for _ in 0..gap_ids.len() + 1 {
        let pos = gap_ids.iter().position(|&g| g == current).ok_or(Error::GapMismatch {
            residual: f64::NAN,
            tol: 0.0,
        })?;
        if visited[pos] {
            break;
        }
        visited[pos] = true;
        let g = &field.gaps[current];
        let span = if g.b >= g.a { g.b - g.a } else { g.b + len - g.a };
        let forward = near(entry, g.a);
        let exit = if forward { g.b } else { g.a };
        let m = ((span / h).ceil() as usize).max(2);
        for k in 0..=m {
            let t = k as f64 / m as f64;
            let alpha = if forward { g.a + span * t } else { g.a + span * (1.0 - t) };
            let p = region.boundary().point(alpha);
            outline.push(Vector2::new(p.x, p.y));
        }
        // follow the chord rooted at the exit end
        let chord = field
            .boundary_rulings
            .iter()
            .find(|r| near(r.foot, exit))
            .ok_or(Error::GapMismatch { residual: f64::NAN, tol: 0.0 })?;
        let next = field
            .gaps
            .iter()
            .position(|gg| near(chord.opposite, gg.a) || near(chord.opposite, gg.b))
            .ok_or(Error::GapMismatch { residual: f64::NAN, tol: 0.0 })?;
        let p = region.boundary().point(chord.opposite);
        outline.push(Vector2::new(p.x, p.y));
        if next == start_gap {
            break;
        }
        current = next;
        entry = chord.opposite;
    }
    Ok(outline)
}

fn point_in_outline(outline: &[Vector2<f64>], p: &Vector2<f64>) -> bool {
    let mut crossings = 0u32;
    let n = outline.len();
    for i in 0..n {
        let a = outline[i];
        let b = outline[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if xi > p.x {
                crossings += 1;
            }
        }
    }
    crossings % 2 == 1
}

impl Immersion {
    /// Locate a point of the closed region in the chord decomposition.
    pub fn locate(&self, x: &Vec3) -> Result<Location> {
        let diam = self.region.diameter();
        match self.region.contains(x) {
            Membership::Exterior => {
                // tolerate float dust just outside the boundary
                let p = Vector2::new(x.x, x.y);
                let (dist, alpha) = self.region.nearest_boundary(&p);
                if dist < 1e-7 * diam {
                    return Ok(Location::Boundary(alpha));
                }
                return Err(Error::OutsideRegion(x.x, x.y));
            }
            Membership::Boundary(alpha) => return Ok(Location::Boundary(alpha)),
            Membership::Interior => {}
        }

        // ruled fans in deterministic order; the first match wins, so points
        // on shared chords evaluate from the lower-parameter cell
        for cell in &self.cells {
            if let Some(hit) = self.locate_in_cell(cell, x) {
                return Ok(Location::Ruled { alpha: hit.0, beta: hit.1 });
            }
        }

        let p = Vector2::new(x.x, x.y);
        for (ci, comp) in self.planar.iter().enumerate() {
            if point_in_outline(&comp.outline, &p) {
                return Ok(Location::Planar(ci));
            }
        }

        // fallback: attribute by the nearest boundary parameter
        let (_, alpha) = self.region.nearest_boundary(&p);
        for (ci, comp) in self.planar.iter().enumerate() {
            for &gi in &comp.gaps {
                let g = &self.field.gaps[gi];
                let len = self.fc.len();
                let span = if g.b >= g.a { g.b - g.a } else { g.b + len - g.a };
                let local = (alpha - g.a).rem_euclid(len);
                if local <= span {
                    return Ok(Location::Planar(ci));
                }
            }
        }
        Err(Error::LocationFailure(x.x, x.y))
    }

    fn locate_in_cell(&self, cell: &RuledCell, x: &Vec3) -> Option<(f64, f64)> {
        let diam = self.region.diameter();
        let lateral = |entry: &(f64, Vec3, Vec3, f64)| -> f64 { cross2(&(x - entry.1), &entry.2) };
        let mut bracket: Option<(f64, f64)> = None;
        let mut prev = cell.table.first()?;
        let mut prev_val = lateral(prev);
        if prev_val == 0.0 {
            bracket = Some((prev.0, prev.0));
        }
        if bracket.is_none() {
            for entry in cell.table.iter().skip(1) {
                let val = lateral(entry);
                if prev_val * val <= 0.0 && prev_val.is_finite() && val.is_finite() {
                    bracket = Some((prev.0, entry.0));
                    break;
                }
                prev_val = val;
                prev = entry;
            }
        }
        let (mut lo, mut hi) = bracket?;

        // bisection on the exact lateral offset
        let psi = |alpha: f64| -> f64 {
            match ruling_dirs(&self.fc, &self.region, alpha) {
                Ok((f, _)) => cross2(&(x - self.region.boundary().point(alpha)), &f),
                Err(_) => f64::NAN,
            }
        };
        let mut flo = psi(lo);
        if !flo.is_finite() {
            flo = lateral(&cell.table[0]);
        }
        let mut alpha = if lo == hi { lo } else { 0.5 * (lo + hi) };
        if lo != hi {
            for _ in 0..80 {
                alpha = 0.5 * (lo + hi);
                let fm = psi(alpha);
                if !fm.is_finite() {
                    break;
                }
                if fm.abs() < 1e-13 * diam || hi - lo < 1e-15 * self.fc.len() {
                    break;
                }
                if flo * fm <= 0.0 {
                    hi = alpha;
                } else {
                    lo = alpha;
                    flo = fm;
                }
            }
        }

        // clamp into the interval and read off the ruling coordinate
        let alpha = alpha.clamp(cell.a, cell.b);
        let (f, beta_max) = match ruling_dirs(&self.fc, &self.region, alpha) {
            Ok((f, _)) => {
                let beta_max = self
                    .region
                    .ray_exit(alpha, &f)
                    .map(|(b, _)| b)
                    .unwrap_or(f64::INFINITY);
                (f, beta_max)
            }
            Err(_) => {
                // interval endpoint: use the tabulated limit
                let entry = if (alpha - cell.a).abs() < (alpha - cell.b).abs() {
                    cell.table.first()?
                } else {
                    cell.table.last()?
                };
                (entry.2, entry.3)
            }
        };
        let rel = x - self.region.boundary().point(alpha);
        let beta = rel.dot(&f);
        let tol = 1e-7 * diam;
        if beta < -tol || beta > beta_max + tol {
            return None;
        }
        if (rel - f * beta).norm() > 1e-6 * diam {
            return None;
        }
        Some((self.fc.curve.wrap(alpha), beta.max(0.0)))
    }

    /// Evaluate the immersion at a point of the closed region.
    pub fn evaluate(&self, x: &Vec3) -> Result<Vec3> {
        match self.locate(x)? {
            Location::Boundary(alpha) => Ok(self.fc.curve.point(alpha)),
            Location::Ruled { alpha, beta } => {
                let (_, g) = ruling_dirs(&self.fc, &self.region, alpha)?;
                Ok(self.fc.curve.point(alpha) + g * beta)
            }
            Location::Planar(ci) => {
                let comp = &self.planar[ci];
                Ok(comp.rotation * x + comp.translation)
            }
        }
    }

    /// The rotation field Q = t (x) T + m (x) M_in at a boundary parameter.
    pub fn rotation_at(&self, alpha: f64) -> Result<Mat3> {
        let rf = crate::geom::darboux_reference(self.region.boundary(), alpha)?;
        let frame = self.fc.image_frame(alpha)?;
        Ok(frame.t * rf.tangent.transpose() + frame.m * rf.inward.transpose())
    }

    /// Gradient of the immersion at a point: the in-plane rotation pair.
    pub fn gradient(&self, x: &Vec3) -> Result<Mat3> {
        let n_plane = plane_normal();
        match self.locate(x)? {
            Location::Boundary(alpha) | Location::Ruled { alpha, .. } => self.rotation_at(alpha),
            Location::Planar(ci) => {
                let comp = &self.planar[ci];
                Ok(comp.rotation * (Mat3::identity() - n_plane * n_plane.transpose()))
            }
        }
    }

    /// Pulled-back surface normal at a point.
    pub fn surface_normal(&self, x: &Vec3) -> Result<Vec3> {
        match self.locate(x)? {
            Location::Boundary(alpha) | Location::Ruled { alpha, .. } => {
                Ok(self.fc.normal.value(alpha))
            }
            Location::Planar(ci) => Ok(self.planar[ci].normal),
        }
    }

    /// Gradient of the pulled-back normal:
    /// n'(alpha) (x) f_perp(alpha) / (g_m - beta G) on ruled points, zero on
    /// flat pieces and their junction chords.
    pub fn pulled_normal_gradient(&self, x: &Vec3) -> Result<Mat3> {
        // junction chords where second derivatives jump admit no gradient
        let diam = self.region.diameter();
        for r in &self.field.boundary_rulings {
            if r.category != RulingCategory::L3 || r.length < 1e-9 * diam {
                continue;
            }
            let p0 = self.region.boundary().point(r.foot);
            let p1 = self.region.boundary().point(r.opposite);
            let e = p1 - p0;
            let t = ((x - p0).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            if (x - (p0 + e * t)).norm() < 1e-9 * diam {
                return Err(Error::UndefinedOnL3(x.x, x.y));
            }
        }
        match self.locate(x)? {
            Location::Planar(_) => Ok(Mat3::zeros()),
            Location::Boundary(alpha) | Location::Ruled { alpha, .. } => {
                let data = match FrameData::at(&self.fc, &self.region, alpha) {
                    Ok(d) => d,
                    Err(Error::ZeroNormalDerivative(_)) => return Ok(Mat3::zeros()),
                    Err(e) => return Err(e),
                };
                let rel = x - self.region.boundary().point(alpha);
                let beta = rel.dot(&data.f);
                let jac = data.g_m - beta * data.spread;
                if jac <= 1e-12 {
                    return Err(Error::SingularRuling { alpha, beta, jacobian: jac });
                }
                let n1 = self.fc.normal.deriv(alpha);
                Ok(n1 * data.f_perp().transpose() / jac)
            }
        }
    }
}

/// Sampling density for the verification suite.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerifySpec {
    pub nu: usize,
    pub nv: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { nu: 200, nv: 50 }
    }
}

/// Mean-curvature jump measured across one junction ruling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JunctionJump {
    pub foot: f64,
    pub category: RulingCategory,
    pub h_jump: f64,
    pub normal_jump: f64,
}

/// Findings of the isometry / regularity verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub schema_version: u32,
    /// max |  |chi(a)-chi(b)| - |a-b|  | over sampled edges.
    pub max_edge_distortion: f64,
    /// max normal discontinuity across sampled junction rulings.
    pub max_normal_jump: f64,
    /// max fitted |K| over interior vertices away from junction chords.
    pub max_abs_gaussian: f64,
    /// max |H| observed during the curvature fit.
    pub max_abs_mean: f64,
    /// per-junction mean-curvature jumps.
    pub junction_jumps: Vec<JunctionJump>,
    /// true when every jump above tolerance sits on an L3 ruling.
    pub c2_failures_only_on_l3: bool,
    /// max residual of Q' + n (x) (Q^T n') on the ruled grid.
    pub q_field_residual: f64,
    /// max midpoint deviation of image rulings, relative to beta_hat.
    pub ruling_collinearity: f64,
    /// max |analytic gradient - central differences of evaluate|.
    pub gradient_fd_deviation: f64,
    pub vertices: usize,
    pub edges: usize,
}

/// Run the verification suite over a sampled grid of the region.
pub fn verify_isometry(imm: &Immersion, spec: &VerifySpec) -> Result<RegularityReport> {
    let (lo, hi) = imm.region.bounding_box();
    let ext = hi - lo;
    let diam = imm.region.diameter();
    // lay the fine axis along the wider extent
    let (nu, nv) = if ext.x >= ext.y { (spec.nu, spec.nv) } else { (spec.nv, spec.nu) };
    let du = ext.x / (nu.max(2) - 1) as f64;
    let dv = ext.y / (nv.max(2) - 1) as f64;

    // vertex grid restricted to the closed region
    let mut index = vec![vec![None::<usize>; nv]; nu];
    let mut verts: Vec<(usize, usize, Vec3)> = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            let p = Vec3::new(lo.x + i as f64 * du, lo.y + j as f64 * dv, 0.0);
            if imm.region.contains(&p) != Membership::Exterior {
                index[i][j] = Some(verts.len());
                verts.push((i, j, p));
            }
        }
    }
    let images: Vec<Option<Vec3>> = verts
        .par_iter()
        .map(|(_, _, p)| imm.evaluate(p).ok())
        .collect();

    // edge-length distortion over grid edges fully inside the region
    let mut edges = 0usize;
    let mut max_edge: f64 = 0.0;
    for (vi, &(i, j, p)) in verts.iter().enumerate() {
        let Some(q_img) = images[vi] else { continue };
        for (ni, nj) in [(i + 1, j), (i, j + 1), (i + 1, j + 1)] {
            if ni >= nu || nj >= nv {
                continue;
            }
            let Some(wi) = index[ni][nj] else { continue };
            let Some(w_img) = images[wi] else { continue };
            let w = verts[wi].2;
            let mid = (p + w) * 0.5;
            if imm.region.contains(&mid) == Membership::Exterior {
                continue;
            }
            edges += 1;
            let d_ref = (w - p).norm();
            let d_img = (w_img - q_img).norm();
            max_edge = max_edge.max((d_img - d_ref).abs());
        }
    }

    // second-fundamental-form fit on interior vertices away from junctions
    let junction_chords: Vec<(Vec3, Vec3, RulingCategory)> = imm
        .field
        .boundary_rulings
        .iter()
        .filter(|r| r.length > 1e-6 * diam)
        .map(|r| {
            (
                imm.region.boundary().point(r.foot),
                imm.region.boundary().point(r.opposite),
                r.category,
            )
        })
        .collect();
    let chord_distance = |p: &Vec3| -> f64 {
        junction_chords
            .iter()
            .map(|(a, b, _)| {
                let e = b - a;
                let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                (p - (a + e * t)).norm()
            })
            .fold(f64::INFINITY, f64::min)
    };

    let guard = 2.5 * du.max(dv);
    let fit_results: Vec<(f64, f64)> = verts
        .par_iter()
        .enumerate()
        .filter_map(|(vi, &(i, j, p))| {
            images[vi]?;
            if chord_distance(&p) < guard {
                return None;
            }
            let (bdist, _) = imm.region.nearest_boundary(&Vector2::new(p.x, p.y));
            if bdist < guard {
                return None;
            }
            let nu_hat = imm.surface_normal(&p).ok()?;
            let img_p = images[vi]?;
            // orthonormal tangent frame at the image point
            let e1 = {
                let cand = if nu_hat.x.abs() < 0.8 {
                    Vec3::new(1.0, 0.0, 0.0)
                } else {
                    Vec3::new(0.0, 1.0, 0.0)
                };
                (cand - nu_hat * cand.dot(&nu_hat)).normalize()
            };
            let e2 = nu_hat.cross(&e1);
            // the 12 nearest usable grid neighbors
            let mut neighbors: Vec<(f64, Vec3)> = Vec::new();
            for di in -2i64..=2 {
                for dj in -2i64..=2 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= nu as i64 || nj >= nv as i64 {
                        continue;
                    }
                    let Some(wi) = index[ni as usize][nj as usize] else { continue };
                    let q = verts[wi].2;
                    if chord_distance(&q) < 0.5 * guard {
                        continue;
                    }
                    let Some(img_q) = images[wi] else { continue };
                    neighbors.push(((q - p).norm(), img_q));
                }
            }
            if neighbors.len() < 12 {
                return None;
            }
            neighbors.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            neighbors.truncate(12);
            let mut rows: Vec<[f64; 6]> = Vec::new();
            let mut rhs: Vec<f64> = Vec::new();
            for (_, img_q) in &neighbors {
                let d = img_q - img_p;
                let (u, v, w) = (d.dot(&e1), d.dot(&e2), d.dot(&nu_hat));
                rows.push([1.0, u, v, 0.5 * u * u, u * v, 0.5 * v * v]);
                rhs.push(w);
            }
            let coef = least_squares_6(&rows, &rhs)?;
            let (a, b, c) = (coef[3], coef[4], coef[5]);
            Some(((a * c - b * b).abs(), (0.5 * (a + c)).abs()))
        })
        .collect();
    let max_abs_gaussian = fit_results.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let max_abs_mean = fit_results.iter().map(|r| r.1).fold(0.0f64, f64::max);

    // normal continuity and mean-curvature jumps across junction rulings
    let mut junction_jumps = Vec::new();
    let mut max_normal_jump: f64 = 0.0;
    for r in &imm.field.boundary_rulings {
        if r.length < 1e-6 * diam || r.side > 0.0 {
            continue;
        }
        let p0 = imm.region.boundary().point(r.foot);
        let p1 = imm.region.boundary().point(r.opposite);
        let e = p1 - p0;
        let perp = plane_normal().cross(&e.normalize());
        let off = 1e-6 * diam;
        let mut h_jump: f64 = 0.0;
        let mut n_jump: f64 = 0.0;
        let mut seen = false;
        let h_at = |x: &Vec3| -> Option<f64> {
            match imm.locate(x).ok()? {
                Location::Planar(_) => Some(0.0),
                Location::Ruled { alpha, .. } | Location::Boundary(alpha) => {
                    let d = FrameData::at(&imm.fc, &imm.region, alpha).ok()?;
                    let beta = (x - imm.region.boundary().point(alpha)).dot(&d.f);
                    let jac = d.g_m - beta * d.spread;
                    Some(d.image.kappa_n / (2.0 * d.g_m * jac))
                }
            }
        };
        for k in 1..8 {
            let t = k as f64 / 8.0;
            let base = p0 + e * t;
            // one-sided limits onto the chord by linear extrapolation from
            // two probe offsets, cancelling the O(off) smooth variation
            let probes = [
                (base + perp * off, base + perp * (2.0 * off)),
                (base - perp * off, base - perp * (2.0 * off)),
            ];
            if probes.iter().any(|(x1, x2)| {
                imm.region.contains(x1) != Membership::Interior
                    || imm.region.contains(x2) != Membership::Interior
            }) {
                continue;
            }
            let side = |x1: &Vec3, x2: &Vec3| -> Option<(f64, Vec3)> {
                let (h1, h2) = (h_at(x1)?, h_at(x2)?);
                let (n1, n2) = (
                    imm.surface_normal(x1).ok()?,
                    imm.surface_normal(x2).ok()?,
                );
                Some((2.0 * h1 - h2, n1 * 2.0 - n2))
            };
            let (Some((hp, np)), Some((hm, nm))) = (
                side(&probes[0].0, &probes[0].1),
                side(&probes[1].0, &probes[1].1),
            ) else {
                continue;
            };
            h_jump = h_jump.max((hp - hm).abs());
            n_jump = n_jump.max((np - nm).norm());
            seen = true;
        }
        if seen {
            max_normal_jump = max_normal_jump.max(n_jump);
            junction_jumps.push(JunctionJump {
                foot: r.foot,
                category: r.category,
                h_jump,
                normal_jump: n_jump,
            });
        }
    }
    let h_jump_tol = 0.05 * max_abs_mean.max(1e-9);
    let c2_failures_only_on_l3 = junction_jumps
        .iter()
        .all(|j| j.h_jump <= h_jump_tol || j.category == RulingCategory::L3);

    // Q-field consistency: Q' = -n (x) (Q^T n') via a 4th-order stencil
    let len = imm.fc.len();
    let hq = len / imm.field.n_alpha as f64;
    let mut q_field_residual: f64 = 0.0;
    for s in &imm.field.samples {
        if !s.in_hat || imm.fc.curve.corner_distance(s.alpha) < 3.0 * hq {
            continue;
        }
        let q_at = |a: f64| imm.rotation_at(a);
        let (Ok(qm2), Ok(qm1), Ok(q0), Ok(qp1), Ok(qp2)) = (
            q_at(s.alpha - 2.0 * hq),
            q_at(s.alpha - hq),
            q_at(s.alpha),
            q_at(s.alpha + hq),
            q_at(s.alpha + 2.0 * hq),
        ) else {
            continue;
        };
        let q1 = (qm2 - qm1 * 8.0 + qp1 * 8.0 - qp2) / (12.0 * hq);
        let n = imm.fc.normal.value(s.alpha);
        let n1 = imm.fc.normal.deriv(s.alpha);
        let predicted = -n * (q0.transpose() * n1).transpose();
        q_field_residual = q_field_residual.max((q1 - predicted).norm());
    }

    // image rulings stay straight: evaluate at three stations per ruling
    let mut ruling_collinearity: f64 = 0.0;
    let stride = (imm.field.n_alpha / 256).max(1);
    for s in imm.field.samples.iter().step_by(stride) {
        if !s.in_hat {
            continue;
        }
        let Some(d) = &s.data else { continue };
        let Some((beta, _)) = d.exit else { continue };
        let c0 = imm.region.boundary().point(s.alpha);
        let stations = [0.0, 0.5 * beta, beta];
        let mut pts = Vec::new();
        for &b in &stations {
            let x = c0 + d.f * b;
            if let Ok(y) = imm.evaluate(&x) {
                pts.push(y);
            }
        }
        if pts.len() == 3 {
            let chord = pts[2] - pts[0];
            let dev = (pts[1] - pts[0]).cross(&chord).norm() / chord.norm();
            ruling_collinearity = ruling_collinearity.max(dev / beta);
        }
    }

    // analytic gradient against central differences of evaluate
    let hg = 1e-5 * diam;
    let grad_devs: Vec<f64> = verts
        .par_iter()
        .enumerate()
        .filter_map(|(vi, &(_, _, p))| {
            images[vi]?;
            let (dist, _) = imm.region.nearest_boundary(&Vector2::new(p.x, p.y));
            if dist < 3.0 * hg || chord_distance(&p) < 3.0 * hg {
                return None;
            }
            let q = imm.gradient(&p).ok()?;
            let mut dev: f64 = 0.0;
            for e in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)] {
                let plus = imm.evaluate(&(p + e * hg)).ok()?;
                let minus = imm.evaluate(&(p - e * hg)).ok()?;
                let fd = (plus - minus) / (2.0 * hg);
                dev = dev.max((fd - q * e).norm());
            }
            Some(dev)
        })
        .collect();
    let gradient_fd_deviation = grad_devs.into_iter().fold(0.0f64, f64::max);

    Ok(RegularityReport {
        schema_version: 1,
        max_edge_distortion: max_edge,
        max_normal_jump,
        max_abs_gaussian,
        max_abs_mean,
        junction_jumps,
        c2_failures_only_on_l3,
        q_field_residual,
        ruling_collinearity,
        gradient_fd_deviation,
        vertices: verts.len(),
        edges,
    })
}

/// Solve a small dense least-squares system with 6 unknowns by normal
/// equations; returns None when the neighborhood is degenerate.
fn least_squares_6(rows: &[[f64; 6]], rhs: &[f64]) -> Option<[f64; 6]> {
    let mut ata = [[0.0f64; 6]; 6];
    let mut atb = [0.0f64; 6];
    for (r, &b) in rows.iter().zip(rhs) {
        for i in 0..6 {
            atb[i] += r[i] * b;
            for j in 0..6 {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    let mut a = ata;
    let mut x = atb;
    for col in 0..6 {
        let mut piv = col;
        for r in col + 1..6 {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        x.swap(col, piv);
        for r in col + 1..6 {
            let f = a[r][col] / a[col][col];
            for c in col..6 {
                a[r][c] -= f * a[col][c];
            }
            x[r] -= f * x[col];
        }
    }
    let mut out = [0.0f64; 6];
    for col in (0..6).rev() {
        let mut s = x[col];
        for c in col + 1..6 {
            s -= a[col][c] * out[c];
        }
        out[col] = s / a[col][col];
    }
    Some(out)
}

/// Write the immersed verification mesh as an OBJ file with per-vertex
/// normals; floats carry 17 significant digits.
pub fn export_obj<W: std::io::Write>(
    imm: &Immersion,
    nu: usize,
    nv: usize,
    out: &mut W,
) -> std::io::Result<usize> {
    let (lo, hi) = imm.region.bounding_box();
    let ext = hi - lo;
    let du = ext.x / (nu.max(2) - 1) as f64;
    let dv = ext.y / (nv.max(2) - 1) as f64;

    let mut index = vec![vec![0usize; nv]; nu];
    let mut count = 0usize;
    let mut vlines = String::new();
    let mut nlines = String::new();
    for i in 0..nu {
        for j in 0..nv {
            let p = Vec3::new(lo.x + i as f64 * du, lo.y + j as f64 * dv, 0.0);
            if imm.region.contains(&p) == Membership::Exterior {
                continue;
            }
            let (Ok(y), Ok(n)) = (imm.evaluate(&p), imm.surface_normal(&p)) else {
                continue;
            };
            count += 1;
            index[i][j] = count;
            vlines.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", y.x, y.y, y.z));
            nlines.push_str(&format!("vn {:.16e} {:.16e} {:.16e}\n", n.x, n.y, n.z));
        }
    }
    let mut flines = String::new();
    let mut faces = 0usize;
    for i in 0..nu - 1 {
        for j in 0..nv - 1 {
            let (a, b, c, d) =
                (index[i][j], index[i + 1][j], index[i + 1][j + 1], index[i][j + 1]);
            if a > 0 && b > 0 && c > 0 {
                flines.push_str(&format!("f {a}//{a} {b}//{b} {c}//{c}\n"));
                faces += 1;
            }
            if a > 0 && c > 0 && d > 0 {
                flines.push_str(&format!("f {a}//{a} {c}//{c} {d}//{d}\n"));
                faces += 1;
            }
        }
    }
    writeln!(out, "# developable immersion mesh: {count} vertices, {faces} faces")?;
    out.write_all(vlines.as_bytes())?;
    out.write_all(nlines.as_bytes())?;
    out.write_all(flines.as_bytes())?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{self, Preset};
    use crate::tol::Tolerances;
    use approx::assert_relative_eq;

    fn immersion_of(p: &Preset, n: usize) -> Immersion {
        let field = RulingField::compute(&p.framed, &p.region, n, &Tolerances::analytic());
        build_immersion(&p.framed, &p.region, &field).unwrap()
    }

    #[test]
    fn identity_preset_is_identity_map() {
        let p = presets::plane_identity();
        let imm = immersion_of(&p, 256);
        assert_eq!(imm.cells_len(), 0);
        assert_eq!(imm.planar.len(), 1);
        for &(x, y) in &[(0.2, 0.3), (0.9, 0.9), (0.5, 0.01)] {
            let q = Vec3::new(x, y, 0.0);
            let img = imm.evaluate(&q).unwrap();
            assert!((img - q).norm() < 1e-12);
            let grad = imm.gradient(&q).unwrap();
            let expected = Mat3::identity() - plane_normal() * plane_normal().transpose();
            assert!((grad - expected).norm() < 1e-12);
            let nhat = imm.pulled_normal_gradient(&q).unwrap();
            assert!(nhat.norm() < 1e-12);
        }
    }

    #[test]
    fn cylinder_matches_closed_form() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let chi = p.chi.clone().unwrap();
        let imm = immersion_of(&p, 1024);
        for &(x, y) in &[(0.3, 0.4), (1.0, 0.5), (1.9, 0.05), (0.01, 0.99)] {
            let q = Vec3::new(x, y, 0.0);
            let img = imm.evaluate(&q).unwrap();
            let expect = chi(x, y);
            assert!((img - expect).norm() < 1e-9, "at ({x},{y}): {img:?} vs {expect:?}");
        }
        for &alpha in &[0.5, 2.5, 4.0] {
            let c = p.region.boundary().point(alpha);
            let img = imm.evaluate(&c).unwrap();
            assert!((img - p.framed.curve.point(alpha)).norm() < 1e-10);
        }
    }

    #[test]
    fn cylinder_has_one_fan_and_flat_slivers() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let imm = immersion_of(&p, 512);
        assert_eq!(imm.cells_len(), 2, "two halves of the single ruled fan");
        assert_eq!(imm.planar.len(), 2, "zero-area remainders at the straight edges");
        for comp in &imm.planar {
            assert!(comp.fit_residual < 1e-8);
        }
    }

    #[test]
    fn stadium_has_two_planar_caps_with_nontrivial_motion() {
        let p = presets::stadium_roll(2.0, 1.0, 1.0);
        let chi = p.chi.clone().unwrap();
        let imm = immersion_of(&p, 1024);
        assert_eq!(imm.planar.len(), 2);
        for &(x, y) in &[(1.8, 0.5), (2.3, 0.5), (0.2, 0.2), (-0.3, 0.5), (1.0, 0.7)] {
            let q = Vec3::new(x, y, 0.0);
            if p.region.contains(&q) == Membership::Exterior {
                continue;
            }
            let img = imm.evaluate(&q).unwrap();
            let expect = chi(x, y);
            assert!(
                (img - expect).norm() < 1e-8,
                "at ({x},{y}): {img:?} vs {expect:?}"
            );
        }
    }

    #[test]
    fn two_cylinder_junction_is_continuous() {
        let p = presets::two_cylinder(1.0, 1.0, 0.5, 0.25);
        let chi = p.chi.clone().unwrap();
        let imm = immersion_of(&p, 1024);
        assert_eq!(imm.planar.len(), 2, "side edges leave two flat slivers");
        for &y in &[0.2, 0.5, 0.8] {
            let left = imm.evaluate(&Vec3::new(1.0 - 1e-9, y, 0.0)).unwrap();
            let right = imm.evaluate(&Vec3::new(1.0 + 1e-9, y, 0.0)).unwrap();
            assert!((left - right).norm() < 1e-7);
            let expect = chi(1.0, y);
            assert!((left - expect).norm() < 1e-7);
        }
    }

    #[test]
    fn cone_matches_closed_form() {
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        let chi = p.chi.clone().unwrap();
        let imm = immersion_of(&p, 1024);
        for &(rho, th) in &[(1.2, 0.2), (1.8, 0.5), (1.05, 0.9), (1.5, 0.5)] {
            let q = Vec3::new(rho * f64::cos(th), rho * f64::sin(th), 0.0);
            let img = imm.evaluate(&q).unwrap();
            let expect = chi(q.x, q.y);
            assert!(
                (img - expect).norm() < 1e-8,
                "at rho={rho}, th={th}: {img:?} vs {expect:?}"
            );
        }
    }

    #[test]
    fn two_to_one_covering() {
        let p = presets::cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0);
        let imm = immersion_of(&p, 512);
        for s in imm.field.samples.iter().step_by(64) {
            if !s.in_hat {
                continue;
            }
            let d = s.data.as_ref().unwrap();
            let Some((beta, mu_val)) = d.exit else { continue };
            let dm = FrameData::at(&p.framed, &p.region, mu_val).unwrap();
            for t in [0.25, 0.5, 0.75] {
                let x1 = p.region.boundary().point(s.alpha) + d.f * (beta * t);
                let x2 = p.region.boundary().point(mu_val) + dm.f * (beta * (1.0 - t));
                assert!((x1 - x2).norm() < 1e-8, "same reference point");
                let y1 = imm.evaluate(&x1).unwrap();
                let y2 = imm.evaluate(&x2).unwrap();
                assert!((y1 - y2).norm() < 1e-8, "two-to-one covering at {}", s.alpha);
            }
        }
    }

    #[test]
    fn gradient_is_orthogonal_and_matches_fd() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let imm = immersion_of(&p, 512);
        let h = 1e-5 * imm.region.diameter();
        for &(x, y) in &[(0.5, 0.5), (1.3, 0.2), (1.0, 0.8)] {
            let q = Vec3::new(x, y, 0.0);
            let grad = imm.gradient(&q).unwrap();
            let gtg = grad.transpose() * grad;
            let expected = Mat3::identity() - plane_normal() * plane_normal().transpose();
            assert!((gtg - expected).norm() < 1e-10);
            for e in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)] {
                let fd = (imm.evaluate(&(q + e * h)).unwrap()
                    - imm.evaluate(&(q - e * h)).unwrap())
                    / (2.0 * h);
                assert!((fd - grad * e).norm() < 1e-8, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn cylinder_normal_gradient_magnitude() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let imm = immersion_of(&p, 512);
        for &(x, y) in &[(0.5, 0.5), (1.5, 0.3)] {
            let grad = imm.pulled_normal_gradient(&Vec3::new(x, y, 0.0)).unwrap();
            // shape operator of a cylinder of radius R has norm 1/R
            assert_relative_eq!(grad.norm(), 2.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn normal_gradient_vanishes_toward_flat_junction() {
        let p = presets::stadium_roll(2.0, 1.0, 1.0);
        let imm = immersion_of(&p, 1024);
        let mut last = f64::INFINITY;
        for &dx in &[0.2, 0.1, 0.05, 0.02, 0.01] {
            let grad = imm
                .pulled_normal_gradient(&Vec3::new(0.5 + dx, 0.5, 0.0))
                .unwrap();
            let norm = grad.norm();
            assert!(norm < last + 1e-12, "must decrease: {norm} vs {last}");
            last = norm;
        }
        assert!(last < 2e-3, "near-zero at the junction, got {last}");
        let flat = imm.pulled_normal_gradient(&Vec3::new(0.3, 0.5, 0.0)).unwrap();
        assert!(flat.norm() == 0.0);
    }

    #[test]
    fn l3_chord_has_no_normal_gradient() {
        let p = presets::two_cylinder(1.0, 1.0, 0.5, 0.25);
        let imm = immersion_of(&p, 512);
        let err = imm
            .pulled_normal_gradient(&Vec3::new(1.0, 0.5, 0.0))
            .unwrap_err();
        assert!(matches!(err, Error::UndefinedOnL3(_, _)));
    }

    #[test]
    fn verify_identity_preset_is_clean() {
        let p = presets::plane_identity();
        let imm = immersion_of(&p, 256);
        let report = verify_isometry(&imm, &VerifySpec { nu: 60, nv: 60 }).unwrap();
        assert!(report.max_edge_distortion < 1e-12, "{report:?}");
        assert!(report.max_abs_gaussian < 1e-12);
        assert!(report.q_field_residual < 1e-12);
        assert!(report.gradient_fd_deviation < 1e-10);
    }

    #[test]
    fn verify_two_cylinder_flags_l3_jump() {
        let p = presets::two_cylinder(1.0, 1.0, 0.5, 0.25);
        let imm = immersion_of(&p, 1024);
        let report = verify_isometry(&imm, &VerifySpec { nu: 120, nv: 40 }).unwrap();
        assert!(report.max_normal_jump < 1e-8, "{report:?}");
        let junction = report
            .junction_jumps
            .iter()
            .find(|j| j.h_jump > 0.5)
            .expect("junction jump present");
        assert_eq!(junction.category, RulingCategory::L3);
        // |H| jumps by |1/(2 R1) - 1/(2 R2)| = 1
        assert_relative_eq!(junction.h_jump, 1.0, max_relative = 0.05);
        assert!(report.c2_failures_only_on_l3);
    }

    #[test]
    fn obj_export_roundtrip() {
        let p = presets::cylinder_wrap(2.0, 1.0, 0.5);
        let imm = immersion_of(&p, 256);
        let mut buf = Vec::new();
        let count = export_obj(&imm, 24, 12, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(count > 200);
        let vlines: Vec<&str> = text.lines().filter(|l| l.starts_with("v ")).collect();
        assert_eq!(vlines.len(), count);
        // parse one vertex back: the profile satisfies x^2 + (z-R)^2 = R^2
        let first: Vec<f64> = vlines[0]
            .trim_start_matches("v ")
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        let (x, z) = (first[0], first[2]);
        assert_relative_eq!(x * x + (z - 0.5) * (z - 0.5), 0.25, epsilon = 1e-10);
        assert!(text.lines().any(|l| l.starts_with("vn ")));
        assert!(text.lines().any(|l| l.starts_with("f ")));
    }
}
