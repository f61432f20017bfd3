//! Mean curvature along rulings, the reduced bending-energy density, the
//! line-integral energy, and an independent area-quadrature oracle.
//!
//! The reduced energy integrates phi over the boundary parameter, where on
//! the fully ruled set
//!
//!   phi = omega kappa_n^2 / (4 G g_m^2) * ln(g_m / (g_m - beta_hat G)),
//!
//! with the continuous limit omega beta_hat kappa_n^2 / (4 g_m^3) as G -> 0.
//! The oracle integrates 2 H^2 over the ruled strip in (alpha, beta)
//! coordinates with the beta integral done numerically, never through the
//! closed form, and halves the double covering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framed::{FrameData, FramedCurve};
use crate::region::BoundaryRegion;
use crate::rulings::RulingField;
use crate::tol::Tolerances;

/// Quadrature and branching options for the energy evaluation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyOptions {
    /// Bending modulus prefactor (dimensionless convention: omega = 1).
    pub omega: f64,
    /// |beta_hat G / g_m| below which the G -> 0 limit replaces the log form.
    pub delta_g: f64,
    /// |beta_hat G / g_m| below which a short series replaces the raw log.
    pub series_cut: f64,
    /// Absolute quadrature tolerance.
    pub quad_abs: f64,
    /// Relative quadrature tolerance.
    pub quad_rel: f64,
    /// Maximum bisection depth before declaring the integrand divergent.
    pub max_depth: usize,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        Self {
            omega: 1.0,
            delta_g: 1e-6,
            series_cut: 1e-3,
            quad_abs: 1e-10,
            quad_rel: 1e-8,
            max_depth: 40,
        }
    }
}

/// Which formula produced a finite phi value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiBranch {
    /// Raw logarithmic form (G != 0).
    Log,
    /// Series form near G = 0.
    Series,
    /// Exact G -> 0 limit.
    Limit,
}

/// Value of the reduced energy density at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiValue {
    Finite(f64, PhiBranch),
    Zero,
    Infinite,
}

impl PhiValue {
    pub fn value(&self) -> f64 {
        match self {
            PhiValue::Finite(v, _) => *v,
            PhiValue::Zero => 0.0,
            PhiValue::Infinite => f64::INFINITY,
        }
    }
}

/// phi from its scalar ingredients; pure so the branch switchovers can be
/// checked in isolation.
pub fn phi_from_parts(
    kappa_n: f64,
    g_m: f64,
    beta_hat: f64,
    spread: f64,
    opts: &EnergyOptions,
) -> PhiValue {
    let x = beta_hat * spread / g_m;
    if x >= 1.0 {
        // jacobian reaches zero inside the ruling: divergent density
        return PhiValue::Infinite;
    }
    let base = opts.omega * beta_hat * kappa_n * kappa_n / (4.0 * g_m * g_m * g_m);
    let ax = x.abs();
    if ax < opts.delta_g {
        PhiValue::Finite(base, PhiBranch::Limit)
    } else if ax < opts.series_cut {
        let series = 1.0 + x / 2.0 + x * x / 3.0;
        PhiValue::Finite(base * series, PhiBranch::Series)
    } else {
        // ln(g_m/(g_m - beta G)) / (beta G / g_m) = -ln(1 - x)/x
        PhiValue::Finite(base * (-(-x).ln_1p() / x), PhiBranch::Log)
    }
}

/// Reduced energy density at a boundary parameter.
pub fn phi(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    alpha: f64,
    tol: &Tolerances,
    opts: &EnergyOptions,
) -> PhiValue {
    let eps_n = if fc.is_sampled() { tol.eps_n } else { tol.eps_n / fc.len() };
    if crate::rulings::in_hat_at(fc, region, alpha, tol.eps_kappa) {
        let Ok(data) = FrameData::at(fc, region, alpha) else {
            return PhiValue::Infinite;
        };
        let Ok((beta, _)) = region.ray_exit(alpha, &data.f) else {
            return PhiValue::Infinite;
        };
        phi_from_parts(data.image.kappa_n, data.g_m, beta, data.spread, opts)
    } else {
        let n1 = if fc.curve.is_corner(alpha) {
            fc.normal
                .deriv_one_sided(alpha, -1.0)
                .norm()
                .max(fc.normal.deriv_one_sided(alpha, 1.0).norm())
        } else {
            fc.normal.deriv(alpha).norm()
        };
        if n1 < eps_n {
            PhiValue::Zero
        } else {
            PhiValue::Infinite
        }
    }
}

/// Mean curvature of the image at ruling coordinates (alpha, beta):
/// H = kappa_n / (2 g_m (g_m - beta G)).
pub fn mean_curvature(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let data = FrameData::at(fc, region, alpha)?;
    let jac = data.g_m - beta * data.spread;
    if jac <= 1e-12 {
        return Err(Error::SingularRuling { alpha, beta, jacobian: jac });
    }
    Ok(data.image.kappa_n / (2.0 * data.g_m * jac))
}

/// Energy evaluation summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_reduced: f64,
    pub e_direct: Option<f64>,
    /// Estimated quadrature error of the reduced integral.
    pub quad_error: f64,
    /// Total parameter measure with phi = 0.
    pub flat_length: f64,
    /// Isolated parameters with phi = infinity (excluded from integration).
    pub infinite_phi_count: usize,
    /// Grid samples per finite branch over the ruled set.
    pub branch_log: usize,
    pub branch_series: usize,
    pub branch_limit: usize,
    pub omega: f64,
    pub n_alpha: usize,
    /// (alpha, phi) at the grid samples, for CSV export.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub phi_samples: Vec<(f64, f64)>,
}

/// Integrate phi over the ruled intervals of the field.
pub fn reduced_energy(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    field: &RulingField,
    opts: &EnergyOptions,
) -> Result<EnergyReport> {
    let tol = &field.tol;
    let eps_n_abs = if fc.is_sampled() { tol.eps_n } else { tol.eps_n / fc.len() };

    // per-interval adaptive quadrature, in parallel, summed in fixed order
    let pieces: Vec<Result<(f64, f64)>> = field
        .intervals
        .par_iter()
        .map(|iv| {
            let f = |a: f64| phi(fc, region, a, tol, opts).value();
            let (v, e, _deep) =
                adaptive_gk(&f, iv.a, iv.b, opts.quad_abs, opts.quad_rel, opts.max_depth);
            if !v.is_finite() {
                Err(Error::DivergentEnergy(iv.a, iv.b))
            } else {
                Ok((v, e))
            }
        })
        .collect();

    let mut sum = Neumaier::new();
    let mut err = 0.0;
    for piece in pieces {
        let (v, e) = piece?;
        sum.add(v);
        err += e;
    }

    // grid bookkeeping: flat measure, infinities, branch counts
    let h = field.length / field.n_alpha as f64;
    let mut flat_length = 0.0;
    let mut infinite = 0usize;
    let (mut b_log, mut b_series, mut b_limit) = (0usize, 0usize, 0usize);
    let mut phi_samples = Vec::with_capacity(field.n_alpha);
    for s in &field.samples {
        let value = if s.in_hat {
            match s.data.as_ref().and_then(|d| d.exit.map(|(b, _)| (d, b))) {
                Some((d, beta)) => match phi_from_parts(s.kappa_n, d.g_m, beta, d.spread, opts) {
                    PhiValue::Finite(v, PhiBranch::Log) => {
                        b_log += 1;
                        v
                    }
                    PhiValue::Finite(v, PhiBranch::Series) => {
                        b_series += 1;
                        v
                    }
                    PhiValue::Finite(v, PhiBranch::Limit) => {
                        b_limit += 1;
                        v
                    }
                    PhiValue::Zero => 0.0,
                    PhiValue::Infinite => {
                        infinite += 1;
                        f64::INFINITY
                    }
                },
                None => f64::NAN,
            }
        } else if s.n1_norm.is_nan() || s.n1_norm < eps_n_abs {
            flat_length += h;
            0.0
        } else {
            infinite += 1;
            f64::INFINITY
        };
        phi_samples.push((s.alpha, value));
    }
    // corner parameters with curved flanks carry phi = infinity pointwise
    for &c in fc.corners() {
        let n1 = fc
            .normal
            .deriv_one_sided(c, -1.0)
            .norm()
            .max(fc.normal.deriv_one_sided(c, 1.0).norm());
        if n1 >= eps_n_abs {
            infinite += 1;
        }
    }

    Ok(EnergyReport {
        e_reduced: sum.total(),
        e_direct: None,
        quad_error: err,
        flat_length,
        infinite_phi_count: infinite,
        branch_log: b_log,
        branch_series: b_series,
        branch_limit: b_limit,
        omega: opts.omega,
        n_alpha: field.n_alpha,
        phi_samples,
    })
}

/// Bending energy by direct quadrature of 2 H^2 over the ruled strip in
/// (alpha, beta) coordinates, halving the two-to-one covering. The inner
/// beta integral uses fixed Gauss-Legendre nodes, independent of the
/// closed-form reduction.
pub fn direct_energy_oracle(
    fc: &FramedCurve,
    region: &BoundaryRegion,
    field: &RulingField,
    opts: &EnergyOptions,
) -> Result<f64> {
    let tol = &field.tol;
    let integrand = |alpha: f64| -> f64 {
        if !crate::rulings::in_hat_at(fc, region, alpha, tol.eps_kappa) {
            return 0.0;
        }
        let Ok(data) = FrameData::at(fc, region, alpha) else {
            return f64::NAN;
        };
        let Ok((beta_hat, _)) = region.ray_exit(alpha, &data.f) else {
            return f64::NAN;
        };
        // inner: int_0^beta_hat 2 H^2 (g_m - beta G) dbeta, halved for the
        // double covering
        let half = 0.5 * beta_hat;
        let mut acc = 0.0;
        for i in 0..GL16_NODES.len() {
            for sign in [-1.0, 1.0] {
                let beta = half + sign * half * GL16_NODES[i];
                let jac = data.g_m - beta * data.spread;
                if jac <= 0.0 {
                    return f64::INFINITY;
                }
                let h_mean = data.image.kappa_n / (2.0 * data.g_m * jac);
                acc += GL16_WEIGHTS[i] * 2.0 * h_mean * h_mean * jac;
            }
        }
        opts.omega * 0.5 * acc * half
    };

    let pieces: Vec<Result<f64>> = field
        .intervals
        .par_iter()
        .map(|iv| {
            let (v, _, _) =
                adaptive_gk(&integrand, iv.a, iv.b, opts.quad_abs, opts.quad_rel, opts.max_depth);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::DivergentEnergy(iv.a, iv.b))
            }
        })
        .collect();

    let mut sum = Neumaier::new();
    for p in pieces {
        sum.add(p?);
    }
    Ok(sum.total())
}

/// Compensated (Neumaier) accumulator: panel sums stay order-deterministic.
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod panel: (kronrod, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let v1 = f(mid - half * XGK[i]);
        let v2 = f(mid + half * XGK[i]);
        kronrod += WGK[i] * (v1 + v2);
        if i % 2 == 1 {
            gauss += WG[i / 2] * (v1 + v2);
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

/// Adaptive bisection on the G7/K15 pair.
///
/// Returns (value, error estimate, depth-limit hit). Endpoint grading falls
/// out of the bisection: panels shrink geometrically toward any endpoint
/// where the integrand steepens.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: usize,
) -> (f64, f64, bool) {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        abs_tol: f64,
        rel_tol: f64,
        depth: usize,
        deep: &mut bool,
    ) -> (f64, f64) {
        let (v, e) = gk15(f, a, b);
        if !v.is_finite() {
            return (v, e);
        }
        // stop at machine-scale panels: nodes would round onto the endpoints
        let width_floor = (b - a) < 1e-12 * a.abs().max(b.abs()).max(1.0);
        if e <= abs_tol.max(rel_tol * v.abs()) || depth == 0 || width_floor {
            if depth == 0 && e > abs_tol.max(rel_tol * v.abs()) {
                *deep = true;
            }
            return (v, e);
        }
        let mid = 0.5 * (a + b);
        let (v1, e1) = rec(f, a, mid, 0.5 * abs_tol, rel_tol, depth - 1, deep);
        let (v2, e2) = rec(f, mid, b, 0.5 * abs_tol, rel_tol, depth - 1, deep);
        (v1 + v2, e1 + e2)
    }
    let mut deep = false;
    let (v, e) = rec(f, a, b, abs_tol, rel_tol, max_depth, &mut deep);
    (v, e, deep)
}

const GL16_NODES: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003_0,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_WEIGHTS: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_8,
    0.062_253_523_938_647_9,
    0.027_152_459_411_754_1,
];
