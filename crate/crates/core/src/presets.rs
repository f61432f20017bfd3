//! Built-in (region, framed curve) pairs with analytic evaluators.
//!
//! The admissible presets come with closed-form reduced energies and exact
//! immersions; the defect-injected variants each break one admissibility
//! clause on purpose and record which clause a checker must flag.

use std::sync::Arc;

use crate::framed::{FramedCurve, NormalField};
use crate::geom::{ArcCurve, Vec3};
use crate::region::BoundaryRegion;

/// Which admissibility clause a defect preset is built to violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectClause {
    KappaMatch,
    AngleMatch,
    M1,
    M2,
}

#[derive(Clone)]
pub struct Preset {
    pub name: String,
    pub region: BoundaryRegion,
    pub framed: FramedCurve,
    /// Closed-form reduced bending energy, when one exists.
    pub energy: Option<f64>,
    /// Maximum |H| over the image, when known.
    pub max_mean_curvature: Option<f64>,
    pub admissible: bool,
    pub defect: Option<DefectClause>,
    /// Exact immersion of the flat region, for oracle comparisons.
    pub chi: Option<Arc<dyn Fn(f64, f64) -> Vec3 + Send + Sync>>,
}

impl std::fmt::Debug for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Preset")
            .field("name", &self.name)
            .field("admissible", &self.admissible)
            .field("defect", &self.defect)
            .finish()
    }
}

impl Preset {
    fn new(name: &str, region: BoundaryRegion, framed: FramedCurve) -> Self {
        Self {
            name: name.into(),
            region,
            framed,
            energy: None,
            max_mean_curvature: None,
            admissible: true,
            defect: None,
            chi: None,
        }
    }
}

// ---------------------------------------------------------------------------
// boundary builders
// ---------------------------------------------------------------------------

/// Counterclockwise rectangle boundary [0,w] x [0,h] starting at the origin,
/// with optional extra declared corners at given bottom-edge abscissae (and
/// their top-edge mirrors). Extra corners mark parameters where the *image*
/// curve loses C2 smoothness even though the flat boundary is straight there.
fn rectangle_boundary(w: f64, h: f64, extra_x: &[f64]) -> ArcCurve {
    let len = 2.0 * (w + h);
    let mut corners = vec![0.0, w, w + h, 2.0 * w + h];
    for &x in extra_x {
        corners.push(x);
        corners.push(2.0 * w + h - x);
    }
    corners.sort_by(|a, b| a.partial_cmp(b).unwrap());
    corners.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * len);

    let point = move |a: f64| -> Vec3 {
        let a = a.rem_euclid(len);
        if a < w {
            Vec3::new(a, 0.0, 0.0)
        } else if a < w + h {
            Vec3::new(w, a - w, 0.0)
        } else if a < 2.0 * w + h {
            Vec3::new(2.0 * w + h - a, h, 0.0)
        } else {
            Vec3::new(0.0, len - a, 0.0)
        }
    };
    let d1 = move |a: f64| -> Vec3 {
        let a = a.rem_euclid(len);
        if a < w {
            Vec3::new(1.0, 0.0, 0.0)
        } else if a < w + h {
            Vec3::new(0.0, 1.0, 0.0)
        } else if a < 2.0 * w + h {
            Vec3::new(-1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, -1.0, 0.0)
        }
    };
    ArcCurve::analytic(len, corners, point, d1, |_| Vec3::zeros())
}

/// Counterclockwise unit-disk boundary (no corners).
pub fn unit_disk_region() -> BoundaryRegion {
    let c = ArcCurve::analytic(
        std::f64::consts::TAU,
        vec![],
        |a| Vec3::new(a.cos(), a.sin(), 0.0),
        |a| Vec3::new(-a.sin(), a.cos(), 0.0),
        |a| Vec3::new(-a.cos(), -a.sin(), 0.0),
    );
    BoundaryRegion::new(c).expect("disk boundary")
}

// ---------------------------------------------------------------------------
// profile rolls: chi(x, y) = (xi(x), y, zeta(x)) with (xi', zeta') =
// (cos psi, sin psi); rulings run along y and the surface normal is
// (-sin psi, 0, cos psi)
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Profile {
    psi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    curvature: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pos: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
}

impl Profile {
    fn chi(&self, x: f64, y: f64) -> Vec3 {
        let (xi, zeta) = (self.pos)(x);
        Vec3::new(xi, y, zeta)
    }

    fn normal(&self, x: f64) -> Vec3 {
        let p = (self.psi)(x);
        Vec3::new(-p.sin(), 0.0, p.cos())
    }

    fn slope(&self, x: f64) -> Vec3 {
        let p = (self.psi)(x);
        Vec3::new(p.cos(), 0.0, p.sin())
    }
}

/// Build the boundary framed curve of a profile roll over the given planar
/// boundary (whose x-coordinate drives the profile).
fn roll_framed(boundary: &ArcCurve, profile: &Profile) -> FramedCurve {
    let len = boundary.len();
    let corners = boundary.corners().to_vec();

    let b = boundary.clone();
    let pr = profile.clone();
    let point = move |a: f64| -> Vec3 {
        let c = b.point(a);
        pr.chi(c.x, c.y)
    };
    let b = boundary.clone();
    let pr = profile.clone();
    let d1 = move |a: f64| -> Vec3 {
        let c = b.point(a);
        let c1 = b.deriv_unchecked(a);
        pr.slope(c.x) * c1.x + Vec3::new(0.0, c1.y, 0.0)
    };
    let b = boundary.clone();
    let pr = profile.clone();
    let d2 = move |a: f64| -> Vec3 {
        let c = b.point(a);
        let c1 = b.deriv_unchecked(a);
        let c2 = b.deriv2(a).unwrap_or_else(|_| Vec3::zeros());
        let k = (pr.curvature)(c.x);
        pr.normal(c.x) * (k * c1.x * c1.x) + pr.slope(c.x) * c2.x + Vec3::new(0.0, c2.y, 0.0)
    };
    let curve = ArcCurve::analytic(len, corners, point, d1, d2);

    let b = boundary.clone();
    let pr = profile.clone();
    let n = move |a: f64| -> Vec3 {
        let c = b.point(a);
        pr.normal(c.x)
    };
    let b = boundary.clone();
    let pr = profile.clone();
    let n1 = move |a: f64| -> Vec3 {
        let c = b.point(a);
        let c1 = b.deriv_unchecked(a);
        let k = (pr.curvature)(c.x);
        pr.slope(c.x) * (-k * c1.x)
    };
    let normal = NormalField::analytic(len, n, n1);

    FramedCurve::new(curve, normal)
}

/// Flat region mapped to itself: d = c, n = +e_z.
pub fn plane_identity() -> Preset {
    let boundary = rectangle_boundary(1.0, 1.0, &[]);
    let region = BoundaryRegion::new(boundary.clone()).expect("square boundary");
    let profile = Profile {
        psi: Arc::new(|_| 0.0),
        curvature: Arc::new(|_| 0.0),
        pos: Arc::new(|x| (x, 0.0)),
    };
    let framed = roll_framed(&boundary, &profile);
    let mut p = Preset::new("plane_identity", region, framed);
    p.energy = Some(0.0);
    p.max_mean_curvature = Some(0.0);
    let pr = profile;
    p.chi = Some(Arc::new(move |x, y| pr.chi(x, y)));
    p
}

/// Rectangle [0,l] x [0,w] wrapped on a cylinder of radius r along x.
pub fn cylinder_wrap(l: f64, w: f64, r: f64) -> Preset {
    let boundary = rectangle_boundary(l, w, &[]);
    let region = BoundaryRegion::new(boundary.clone()).expect("rectangle boundary");
    let profile = Profile {
        psi: Arc::new(move |x| x / r),
        curvature: Arc::new(move |_| 1.0 / r),
        pos: Arc::new(move |x| (r * (x / r).sin(), r * (1.0 - (x / r).cos()))),
    };
    let framed = roll_framed(&boundary, &profile);
    let mut p = Preset::new("cylinder_wrap", region, framed);
    p.energy = Some(l * w / (2.0 * r * r));
    p.max_mean_curvature = Some(1.0 / (2.0 * r));
    let pr = profile;
    p.chi = Some(Arc::new(move |x, y| pr.chi(x, y)));
    p
}

/// Two abutting squares of sides a and b (band height min(a,b)) wrapped on
/// cylinders of radii r1 and r2; the junction chord is a genuine C2 failure
/// line of the image, so its feet are declared singular parameters.
pub fn two_cylinder(a: f64, b: f64, r1: f64, r2: f64) -> Preset {
    let h = a.min(b);
    let boundary = rectangle_boundary(a + b, h, &[a]);
    let region = BoundaryRegion::new(boundary.clone()).expect("rectangle boundary");
    let psi_a = a / r1;
    let profile = Profile {
        psi: Arc::new(move |x| if x <= a { x / r1 } else { psi_a + (x - a) / r2 }),
        curvature: Arc::new(move |x| if x <= a { 1.0 / r1 } else { 1.0 / r2 }),
        pos: Arc::new(move |x| {
            if x <= a {
                (r1 * (x / r1).sin(), r1 * (1.0 - (x / r1).cos()))
            } else {
                let base = (r1 * psi_a.sin(), r1 * (1.0 - psi_a.cos()));
                let p = psi_a + (x - a) / r2;
                (
                    base.0 + r2 * (p.sin() - psi_a.sin()),
                    base.1 - r2 * (p.cos() - psi_a.cos()),
                )
            }
        }),
    };
    let framed = roll_framed(&boundary, &profile);
    let mut p = Preset::new("two_cylinder", region, framed);
    p.energy = Some(a * h / (2.0 * r1 * r1) + b * h / (2.0 * r2 * r2));
    p.max_mean_curvature = Some(1.0 / (2.0 * r1.min(r2)));
    let pr = profile;
    p.chi = Some(Arc::new(move |x, y| pr.chi(x, y)));
    p
}

/// Cumulative arc integration of (cos psi, sin psi) for profiles without an
/// elementary antiderivative; panel-wise 12-point Gauss-Legendre.
#[derive(Clone)]
struct CumulativeArc {
    x0: f64,
    panel: f64,
    starts: Vec<(f64, f64)>,
    psi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

const GL12_NODES: [f64; 6] = [
    0.125_233_408_511_468_9,
    0.367_831_498_998_180_2,
    0.587_317_954_286_617_5,
    0.769_902_674_194_304_7,
    0.904_117_256_370_474_9,
    0.981_560_634_246_719_2,
];
const GL12_WEIGHTS: [f64; 6] = [
    0.249_147_045_813_402_8,
    0.233_492_536_538_354_8,
    0.203_167_426_723_065_9,
    0.160_078_328_543_346_2,
    0.106_939_325_995_318_4,
    0.047_175_336_386_511_8,
];

fn gl12<F: Fn(f64) -> (f64, f64)>(f: F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = (0.0, 0.0);
    for i in 0..6 {
        let (p0, p1) = (f(mid - half * GL12_NODES[i]), f(mid + half * GL12_NODES[i]));
        acc.0 += GL12_WEIGHTS[i] * (p0.0 + p1.0);
        acc.1 += GL12_WEIGHTS[i] * (p0.1 + p1.1);
    }
    (acc.0 * half, acc.1 * half)
}

impl CumulativeArc {
    fn build(x0: f64, x1: f64, psi: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        let n = 64;
        let panel = (x1 - x0) / n as f64;
        let mut starts = Vec::with_capacity(n + 1);
        let mut acc = (0.0, 0.0);
        starts.push(acc);
        for i in 0..n {
            let a = x0 + i as f64 * panel;
            let step = gl12(|x| { let p = psi(x); (p.cos(), p.sin()) }, a, a + panel);
            acc = (acc.0 + step.0, acc.1 + step.1);
            starts.push(acc);
        }
        Self { x0, panel, starts, psi }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let t = ((x - self.x0) / self.panel).clamp(0.0, (self.starts.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.starts.len() - 2);
        let a = self.x0 + i as f64 * self.panel;
        let psi = self.psi.clone();
        let partial = gl12(move |u| { let p = psi(u); (p.cos(), p.sin()) }, a, x);
        (self.starts[i].0 + partial.0, self.starts[i].1 + partial.1)
    }
}

/// Stadium (two straight edges of length l, semicircular caps of radius w/2)
/// rolled over a C1 curvature bump supported on [l/4, 3l/4]. The bump ends
/// are junction rulings bordering genuinely planar caps.
pub fn stadium_roll(l: f64, w: f64, k0: f64) -> Preset {
    let r = 0.5 * w;
    let len = 2.0 * l + std::f64::consts::TAU * r;
    let cap = std::f64::consts::PI * r;
    let corners = vec![0.0, l, l + cap, 2.0 * l + cap];

    let point = move |a: f64| -> Vec3 {
        let a = a.rem_euclid(len);
        if a < l {
            Vec3::new(a, 0.0, 0.0)
        } else if a < l + cap {
            let phi = -std::f64::consts::FRAC_PI_2 + (a - l) / r;
            Vec3::new(l + r * phi.cos(), r + r * phi.sin(), 0.0)
        } else if a < 2.0 * l + cap {
            Vec3::new(l - (a - l - cap), w, 0.0)
        } else {
            let phi = std::f64::consts::FRAC_PI_2 + (a - 2.0 * l - cap) / r;
            Vec3::new(r * phi.cos(), r + r * phi.sin(), 0.0)
        }
    };
    let d1 = move |a: f64| -> Vec3 {
        let a = a.rem_euclid(len);
        if a < l {
            Vec3::new(1.0, 0.0, 0.0)
        } else if a < l + cap {
            let phi = -std::f64::consts::FRAC_PI_2 + (a - l) / r;
            Vec3::new(-phi.sin(), phi.cos(), 0.0)
        } else if a < 2.0 * l + cap {
            Vec3::new(-1.0, 0.0, 0.0)
        } else {
            let phi = std::f64::consts::FRAC_PI_2 + (a - 2.0 * l - cap) / r;
            Vec3::new(-phi.sin(), phi.cos(), 0.0)
        }
    };
    let d2 = move |a: f64| -> Vec3 {
        let a = a.rem_euclid(len);
        if a < l || (a >= l + cap && a < 2.0 * l + cap) {
            Vec3::zeros()
        } else if a < l + cap {
            let phi = -std::f64::consts::FRAC_PI_2 + (a - l) / r;
            Vec3::new(-phi.cos() / r, -phi.sin() / r, 0.0)
        } else {
            let phi = std::f64::consts::FRAC_PI_2 + (a - 2.0 * l - cap) / r;
            Vec3::new(-phi.cos() / r, -phi.sin() / r, 0.0)
        }
    };
    let boundary = ArcCurve::analytic(len, corners, point, d1, d2);
    let region = BoundaryRegion::new(boundary.clone()).expect("stadium boundary");

    let (x1, x2) = (0.25 * l, 0.75 * l);
    let span = x2 - x1;
    let curvature = move |x: f64| -> f64 {
        if x <= x1 || x >= x2 {
            0.0
        } else {
            let s = (std::f64::consts::PI * (x - x1) / span).sin();
            k0 * s * s
        }
    };
    let psi_fn = move |x: f64| -> f64 {
        if x <= x1 {
            0.0
        } else {
            let u = x.min(x2) - x1;
            k0 * (0.5 * u
                - span / (4.0 * std::f64::consts::PI)
                    * (2.0 * std::f64::consts::PI * u / span).sin())
        }
    };
    let psi_total = psi_fn(x2);
    let psi: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(psi_fn);
    let arc = CumulativeArc::build(x1, x2, psi.clone());
    let (xi2, zeta2) = arc.eval(x2);
    let pos = move |x: f64| -> (f64, f64) {
        if x <= x1 {
            (x, 0.0)
        } else if x < x2 {
            let (xi, zeta) = arc.eval(x);
            (x1 + xi, zeta)
        } else {
            (
                x1 + xi2 + psi_total.cos() * (x - x2),
                zeta2 + psi_total.sin() * (x - x2),
            )
        }
    };
    let profile = Profile {
        psi,
        curvature: Arc::new(curvature),
        pos: Arc::new(pos),
    };
    let framed = roll_framed(&boundary, &profile);
    let mut p = Preset::new("stadium_roll", region, framed);
    p.energy = Some(3.0 * w * k0 * k0 * span / 16.0);
    p.max_mean_curvature = Some(0.5 * k0);
    let pr = profile;
    p.chi = Some(Arc::new(move |x, y| pr.chi(x, y)));
    p
}

// ---------------------------------------------------------------------------
// cone sector
// ---------------------------------------------------------------------------

/// Annular sector (radii rho0 < rho1, opening angle theta) rolled onto a
/// cone of half-angle gamma with apex at the origin.
pub fn cone_sector(gamma: f64, rho0: f64, rho1: f64, theta: f64) -> Preset {
    assert!(rho0 > 0.0 && rho1 > rho0 && theta > 0.0);
    let s = gamma.sin();
    let cg = gamma.cos();
    let dr = rho1 - rho0;
    let l_outer = rho1 * theta;
    let l_inner = rho0 * theta;
    let len = l_outer + l_inner + 2.0 * dr;
    let corners = vec![0.0, l_outer, l_outer + dr, l_outer + dr + l_inner];

    // flat polar coordinates (rho, th) along the boundary
    let polar = move |a: f64| -> (f64, f64, f64, f64) {
        // returns (rho, th, drho/da, dth/da)
        let a = a.rem_euclid(len);
        if a < l_outer {
            (rho1, a / rho1, 0.0, 1.0 / rho1)
        } else if a < l_outer + dr {
            (rho1 - (a - l_outer), theta, -1.0, 0.0)
        } else if a < l_outer + dr + l_inner {
            (rho0, theta - (a - l_outer - dr) / rho0, 0.0, -1.0 / rho0)
        } else {
            (rho0 + (a - l_outer - dr - l_inner), 0.0, 1.0, 0.0)
        }
    };

    let point = move |a: f64| -> Vec3 {
        let (rho, th, _, _) = polar(a);
        Vec3::new(rho * th.cos(), rho * th.sin(), 0.0)
    };
    let d1 = move |a: f64| -> Vec3 {
        let (rho, th, dr_, dth) = polar(a);
        Vec3::new(
            dr_ * th.cos() - rho * th.sin() * dth,
            dr_ * th.sin() + rho * th.cos() * dth,
            0.0,
        )
    };
    let d2 = move |a: f64| -> Vec3 {
        let (rho, th, dr_, dth) = polar(a);
        // with |c'| = 1 on each piece, either dr_ = 0 or dth = 0
        Vec3::new(
            -2.0 * dr_ * th.sin() * dth - rho * th.cos() * dth * dth,
            2.0 * dr_ * th.cos() * dth - rho * th.sin() * dth * dth,
            0.0,
        )
    };
    let boundary = ArcCurve::analytic(len, corners.clone(), point, d1, d2);
    let region = BoundaryRegion::new(boundary.clone()).expect("sector boundary");

    // cone immersion: slant distance rho, azimuth phi = th / sin(gamma);
    // the orientation-consistent normal is (-cos g cos phi, -cos g sin phi, sin g)
    let chi = move |rho: f64, th: f64| -> Vec3 {
        let phi = th / s;
        Vec3::new(rho * s * phi.cos(), rho * s * phi.sin(), rho * cg)
    };
    let point_d = move |a: f64| -> Vec3 {
        let (rho, th, _, _) = polar(a);
        chi(rho, th)
    };
    let slant = move |phi: f64| Vec3::new(s * phi.cos(), s * phi.sin(), cg);
    let d1_d = move |a: f64| -> Vec3 {
        let (rho, th, dr_, dth) = polar(a);
        let phi = th / s;
        let dphi = dth / s;
        slant(phi) * dr_ + Vec3::new(-phi.sin(), phi.cos(), 0.0) * (rho * s * dphi)
    };
    let d2_d = move |a: f64| -> Vec3 {
        let (rho, th, dr_, dth) = polar(a);
        let phi = th / s;
        let dphi = dth / s;
        let radial = Vec3::new(phi.cos(), phi.sin(), 0.0);
        let azim = Vec3::new(-phi.sin(), phi.cos(), 0.0);
        azim * (2.0 * dr_ * s * dphi) - radial * (rho * s * dphi * dphi)
    };
    let curve = ArcCurve::analytic(len, corners, point_d, d1_d, d2_d);

    let n = move |a: f64| -> Vec3 {
        let (_, th, _, _) = polar(a);
        let phi = th / s;
        Vec3::new(-cg * phi.cos(), -cg * phi.sin(), s)
    };
    let n1 = move |a: f64| -> Vec3 {
        let (_, th, _, dth) = polar(a);
        let phi = th / s;
        let dphi = dth / s;
        Vec3::new(cg * phi.sin() * dphi, -cg * phi.cos() * dphi, 0.0)
    };
    let normal = NormalField::analytic(len, n, n1);
    let framed = FramedCurve::new(curve, normal);

    let mut p = Preset::new("cone_sector", region, framed);
    let cot = cg / s;
    p.energy = Some(0.5 * theta * cot * cot * (rho1 / rho0).ln());
    p.max_mean_curvature = Some(cot / (2.0 * rho0));
    p.chi = Some(Arc::new(move |x, y| {
        let rho = (x * x + y * y).sqrt();
        let th = y.atan2(x);
        chi(rho, th)
    }));
    p
}

// ---------------------------------------------------------------------------
// defect-injected variants
// ---------------------------------------------------------------------------

/// Cylinder wrap whose image top rim is pushed along the rulings by a bump
/// of amplitude `delta * w`; the opposite ruling feet no longer land on the
/// image curve, so the M1 clause fails with residual ~ delta * beta_hat.
pub fn rim_stretch(l: f64, w: f64, r: f64, delta: f64) -> Preset {
    let base = cylinder_wrap(l, w, r);
    let len = base.framed.len();
    let corners = base.framed.corners().to_vec();

    let bump = move |x: f64| {
        let s = (std::f64::consts::PI * x / l).sin();
        delta * w * s * s
    };
    let bump1 = move |x: f64| {
        let c = std::f64::consts::PI / l;
        delta * w * 2.0 * c * (c * x).sin() * (c * x).cos()
    };
    let bump2 = move |x: f64| {
        let c = std::f64::consts::PI / l;
        delta * w * 2.0 * c * c * (2.0 * c * x).cos()
    };

    let on_top = move |a: f64| -> Option<f64> {
        let a = a.rem_euclid(2.0 * (l + w));
        if a > l + w && a < 2.0 * l + w {
            Some(2.0 * l + w - a)
        } else {
            None
        }
    };

    let b = base.framed.curve.clone();
    let point = move |a: f64| -> Vec3 {
        let mut p = b.point(a);
        if let Some(x) = on_top(a) {
            p.y += bump(x);
        }
        p
    };
    let b = base.framed.curve.clone();
    let d1 = move |a: f64| -> Vec3 {
        let mut p = b.deriv_unchecked(a);
        if let Some(x) = on_top(a) {
            p.y += -bump1(x);
        }
        p
    };
    let b = base.framed.curve.clone();
    let d2 = move |a: f64| -> Vec3 {
        let mut p = b.deriv2(a).unwrap_or_else(|_| Vec3::zeros());
        if let Some(x) = on_top(a) {
            p.y += bump2(x);
        }
        p
    };
    let curve = ArcCurve::analytic(len, corners, point, d1, d2);
    let framed = FramedCurve::new(curve, base.framed.normal.clone());

    let mut p = Preset::new("rim_stretch", base.region.clone(), framed);
    p.admissible = false;
    p.defect = Some(DefectClause::M1);
    p
}

/// Unit disk with the planar unit circle as image but the normal field
/// tilted toward the inward radial direction by a parameter-dependent angle.
/// The induced rulings sweep a converging fan that crosses inside the disk,
/// so the non-crossing clause M2 fails.
pub fn crossing_twist(zeta0: f64) -> Preset {
    let region = unit_disk_region();
    let tau = std::f64::consts::TAU;
    let curve = ArcCurve::analytic(
        tau,
        vec![],
        |a| Vec3::new(a.cos(), a.sin(), 0.0),
        |a| Vec3::new(-a.sin(), a.cos(), 0.0),
        |a| Vec3::new(-a.cos(), -a.sin(), 0.0),
    );
    let zeta = move |a: f64| zeta0 * (1.0 + 0.6 * (2.0 * a).sin());
    let zeta1 = move |a: f64| zeta0 * 1.2 * (2.0 * a).cos();
    let n = move |a: f64| -> Vec3 {
        let z = zeta(a);
        let radial = Vec3::new(a.cos(), a.sin(), 0.0);
        Vec3::new(0.0, 0.0, z.cos()) - radial * z.sin()
    };
    let n1 = move |a: f64| -> Vec3 {
        let z = zeta(a);
        let z1 = zeta1(a);
        let radial = Vec3::new(a.cos(), a.sin(), 0.0);
        let azim = Vec3::new(-a.sin(), a.cos(), 0.0);
        Vec3::new(0.0, 0.0, -z.sin() * z1) - radial * (z.cos() * z1) - azim * z.sin()
    };
    let normal = NormalField::analytic(tau, n, n1);
    let framed = FramedCurve::new(curve, normal);

    let mut p = Preset::new("crossing_twist", region, framed);
    p.admissible = false;
    p.defect = Some(DefectClause::M2);
    p
}

/// Unit square region paired with a flat unit-side parallelogram image whose
/// corner angles are pi/2 +- eps: only the corner-angle clause fails.
pub fn angle_perturb(eps: f64) -> Preset {
    let boundary = rectangle_boundary(1.0, 1.0, &[]);
    let region = BoundaryRegion::new(boundary).expect("square boundary");

    let headings = [
        0.0,
        std::f64::consts::FRAC_PI_2 + eps,
        std::f64::consts::PI,
        1.5 * std::f64::consts::PI + eps,
    ];
    let verts = {
        let mut v = [Vec3::zeros(); 5];
        for i in 0..4 {
            v[i + 1] = v[i] + Vec3::new(headings[i].cos(), headings[i].sin(), 0.0);
        }
        v
    };
    let point = move |a: f64| -> Vec3 {
        let a = a.rem_euclid(4.0);
        let i = (a.floor() as usize).min(3);
        let t = a - i as f64;
        verts[i] + Vec3::new(headings[i].cos(), headings[i].sin(), 0.0) * t
    };
    let d1 = move |a: f64| -> Vec3 {
        let a = a.rem_euclid(4.0);
        let i = (a.floor() as usize).min(3);
        Vec3::new(headings[i].cos(), headings[i].sin(), 0.0)
    };
    let curve = ArcCurve::analytic(4.0, vec![0.0, 1.0, 2.0, 3.0], point, d1, |_| Vec3::zeros());
    let normal = NormalField::constant(4.0, Vec3::new(0.0, 0.0, 1.0));
    let framed = FramedCurve::new(curve, normal);

    let mut p = Preset::new("angle_perturb", region, framed);
    p.admissible = false;
    p.defect = Some(DefectClause::AngleMatch);
    p
}

/// Unit disk region paired with a flat oval of curvature 1 + eps cos(2s)
/// (which closes exactly for any eps): only the curvature clause fails.
/// The oval is delivered as a sampled curve to exercise the stencil path.
pub fn curvature_mismatch(eps: f64) -> Preset {
    let region = unit_disk_region();
    let tau = std::f64::consts::TAU;
    let n = 16384usize;
    let h = tau / n as f64;

    let heading = move |s: f64| s + 0.5 * eps * (2.0 * s).sin();
    let mut pts = Vec::with_capacity(n);
    let mut pos = Vec3::zeros();
    pts.push(pos);
    for i in 0..n - 1 {
        let a = i as f64 * h;
        let (dx, dy) = gl12(
            move |s| {
                let t = heading(s);
                (t.cos(), t.sin())
            },
            a,
            a + h,
        );
        pos += Vec3::new(dx, dy, 0.0);
        pts.push(pos);
    }
    let curve = ArcCurve::sampled(tau, vec![], pts).expect("oval samples");
    let normal = NormalField::constant(tau, Vec3::new(0.0, 0.0, 1.0));
    let framed = FramedCurve::new(curve, normal);

    let mut p = Preset::new("curvature_mismatch", region, framed);
    p.admissible = false;
    p.defect = Some(DefectClause::KappaMatch);
    p
}

/// All admissible presets at their acceptance-scale parameters.
pub fn all_admissible() -> Vec<Preset> {
    vec![
        plane_identity(),
        cylinder_wrap(2.0, 1.0, 0.5),
        cone_sector(std::f64::consts::FRAC_PI_6, 1.0, 2.0, 1.0),
        two_cylinder(1.0, 1.0, 0.5, 0.25),
        stadium_roll(2.0, 1.0, 1.0),
    ]
}

/// All defect-injected presets at their default magnitudes.
pub fn all_defects() -> Vec<Preset> {
    vec![
        rim_stretch(2.0, 1.0, 0.5, 0.01),
        crossing_twist(0.5),
        angle_perturb(0.01),
        curvature_mismatch(0.05),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framed::validate_framed;
    use approx::assert_relative_eq;

    #[test]
    fn admissible_presets_are_valid_framed_curves() {
        for p in all_admissible() {
            let report = validate_framed(&p.framed, &p.region);
            assert!(report.pass, "{}: {report:?}", p.name);
        }
    }

    #[test]
    fn preset_images_start_on_boundary_curve() {
        for p in all_admissible() {
            let chi = p.chi.as_ref().expect("admissible presets carry chi");
            for i in 0..64 {
                let a = p.framed.len() * (i as f64 + 0.5) / 64.0;
                let c = p.region.boundary().point(a);
                let d = p.framed.curve.point(a);
                let expect = chi(c.x, c.y);
                assert!(
                    (d - expect).norm() < 1e-9,
                    "{}: boundary trace mismatch at alpha={a}",
                    p.name
                );
            }
        }
    }

    #[test]
    fn two_cylinder_declares_junction_corners() {
        let p = two_cylinder(1.0, 1.0, 0.5, 0.25);
        let corners = p.framed.corners();
        assert!(corners.iter().any(|&c| (c - 1.0).abs() < 1e-12));
        // top junction at alpha = a + 2b + h = 4
        assert!(corners.iter().any(|&c| (c - 4.0).abs() < 1e-12));
    }

    #[test]
    fn stadium_profile_position_is_accurate() {
        // compare the quadrature-backed profile against brute-force Simpson
        let p = stadium_roll(2.0, 1.0, 1.0);
        let chi = p.chi.as_ref().unwrap();
        let k0 = 1.0;
        let (x1, x2) = (0.5, 1.5);
        let span = x2 - x1;
        let psi = |x: f64| -> f64 {
            if x <= x1 {
                0.0
            } else {
                let u = x.min(x2) - x1;
                k0 * (0.5 * u
                    - span / (4.0 * std::f64::consts::PI)
                        * (2.0 * std::f64::consts::PI * u / span).sin())
            }
        };
        let brute = |x: f64| -> (f64, f64) {
            let m = 20000;
            let h = (x - x1) / m as f64;
            let mut acc = (0.0, 0.0);
            for i in 0..m {
                let u0 = x1 + i as f64 * h;
                let (a, b, c) = (psi(u0), psi(u0 + 0.5 * h), psi(u0 + h));
                acc.0 += h / 6.0 * (a.cos() + 4.0 * b.cos() + c.cos());
                acc.1 += h / 6.0 * (a.sin() + 4.0 * b.sin() + c.sin());
            }
            (x1 + acc.0, acc.1)
        };
        for &x in &[0.7, 1.0, 1.3, 1.5] {
            let got = chi(x, 0.0);
            let (bx, bz) = brute(x);
            assert!((got.x - bx).abs() < 1e-10, "x={x}: {} vs {bx}", got.x);
            assert!((got.z - bz).abs() < 1e-10, "x={x}: {} vs {bz}", got.z);
        }
    }

    #[test]
    fn defect_presets_differ_from_their_bases() {
        let rs = rim_stretch(2.0, 1.0, 0.5, 0.01);
        let base = cylinder_wrap(2.0, 1.0, 0.5);
        // top-rim midpoint displaced along the axis by delta * w
        let alpha_mid = 2.0 + 1.0 + 1.0; // x = 1 on the top edge
        let d_def = rs.framed.curve.point(alpha_mid);
        let d_base = base.framed.curve.point(alpha_mid);
        assert_relative_eq!((d_def - d_base).norm(), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn oval_defect_closes_and_has_mismatched_curvature() {
        let p = curvature_mismatch(0.05);
        let report = validate_framed(&p.framed, &p.region);
        assert!(report.unit_speed < 1e-6, "{report:?}");
        let frame = p.framed.image_frame(1.3).unwrap();
        let expected = 1.0 + 0.05 * (2.0 * 1.3_f64).cos();
        assert!((frame.kappa_g - expected).abs() < 1e-4);
    }
}
