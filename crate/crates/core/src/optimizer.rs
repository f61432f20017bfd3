//! Penalty-based descent on finite-dimensional families of framed curves:
//! reduced energy plus squared admissibility residuals, minimized by
//! projected gradient descent with a backtracking line search.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::check_compatibility;
use crate::energy::{reduced_energy, EnergyOptions};
use crate::error::{Error, Result};
use crate::framed::FramedCurve;
use crate::region::BoundaryRegion;
use crate::rulings::{m2_sweep, RulingField};
use crate::tol::Tolerances;

/// A parameterized family of framed curves over a fixed region.
#[derive(Clone)]
pub struct CurveFamily {
    pub description: String,
    pub region: BoundaryRegion,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    generator: Arc<dyn Fn(&[f64]) -> Result<FramedCurve> + Send + Sync>,
    regularizer: Option<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>>,
}

impl CurveFamily {
    pub fn new<G>(
        description: &str,
        region: BoundaryRegion,
        lower: Vec<f64>,
        upper: Vec<f64>,
        generator: G,
    ) -> Self
    where
        G: Fn(&[f64]) -> Result<FramedCurve> + Send + Sync + 'static,
    {
        assert_eq!(lower.len(), upper.len());
        Self {
            description: description.into(),
            region,
            lower,
            upper,
            generator: Arc::new(generator),
            regularizer: None,
        }
    }

    /// Attach an extra smooth term to the objective (e.g. a spring tether).
    pub fn with_regularizer<R>(mut self, reg: R) -> Self
    where
        R: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.regularizer = Some(Arc::new(reg));
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn generate(&self, p: &[f64]) -> Result<FramedCurve> {
        (self.generator)(p)
    }

    fn project(&self, p: &mut [f64]) {
        for i in 0..p.len() {
            p[i] = p[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

/// Squared-residual weights for each penalized clause.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyWeights {
    pub compatibility: f64,
    pub m1: f64,
    pub m2: f64,
    pub margin: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        Self { compatibility: 1e2, m1: 1e2, m2: 1e2, margin: 1e2 }
    }
}

/// Grid and quadrature sizes used inside objective evaluations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveOptions {
    pub n_alpha: usize,
    pub energy: EnergyOptions,
    pub m2_max_pairs: usize,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        Self { n_alpha: 256, energy: EnergyOptions::default(), m2_max_pairs: 4_000 }
    }
}

/// Value of the penalized objective, split into its parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveParts {
    pub energy: f64,
    pub penalty: f64,
    pub regularizer: f64,
    pub total: f64,
    pub m1_residual: f64,
    pub compat_residual: f64,
}

/// Reduced energy plus weighted squared admissibility residuals. Generator
/// failures and divergent energies surface as an infinite objective.
pub fn penalty_objective(
    family: &CurveFamily,
    p: &[f64],
    weights: &PenaltyWeights,
    opts: &ObjectiveOptions,
) -> ObjectiveParts {
    let infinite = |m1: f64| ObjectiveParts {
        energy: f64::INFINITY,
        penalty: 0.0,
        regularizer: 0.0,
        total: f64::INFINITY,
        m1_residual: m1,
        compat_residual: f64::NAN,
    };

    let fc = match family.generate(p) {
        Ok(fc) => fc,
        Err(_) => return infinite(f64::NAN),
    };
    let tol = Tolerances::for_flavor(fc.is_sampled());
    let field = RulingField::compute(&fc, &family.region, opts.n_alpha, &tol);

    let (kappa_res, angle_res, flat_res) =
        check_compatibility(&fc, &family.region, opts.n_alpha, &tol);
    let compat = kappa_res.max(angle_res).max(flat_res);

    let mut m1_res: f64 = 0.0;
    let mut margin_violation: f64 = 0.0;
    for s in &field.samples {
        let Some(d) = &s.data else { continue };
        let Some((beta, mu_val)) = d.exit else { continue };
        let lhs = fc.curve.point(mu_val);
        let rhs = fc.curve.point(s.alpha) + d.g * beta;
        m1_res = m1_res.max((lhs - rhs).norm());
        let margin = d.g_m - beta * d.spread;
        if s.in_tilde && margin < 0.0 {
            margin_violation = margin_violation.max(-margin);
        }
    }

    let sweep = m2_sweep(&fc, &family.region, &field, opts.m2_max_pairs, false);
    let m2_res = sweep.violations as f64 / sweep.checked_pairs.max(1) as f64;

    let energy = match reduced_energy(&fc, &family.region, &field, &opts.energy) {
        Ok(report) => report.e_reduced,
        Err(_) => return infinite(m1_res),
    };
    if !energy.is_finite() {
        return infinite(m1_res);
    }

    let penalty = weights.compatibility * compat * compat
        + weights.m1 * m1_res * m1_res
        + weights.m2 * m2_res * m2_res
        + weights.margin * margin_violation * margin_violation;
    let reg = family.regularizer.as_ref().map(|r| r(p)).unwrap_or(0.0);

    ObjectiveParts {
        energy,
        penalty,
        regularizer: reg,
        total: energy + penalty + reg,
        m1_residual: m1_res,
        compat_residual: compat,
    }
}

/// Termination conditions for the descent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentOptions {
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iters: usize,
    pub initial_step: f64,
    pub weights: PenaltyWeights,
    pub objective: ObjectiveOptions,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-7,
            step_tol: 1e-12,
            max_iters: 100,
            initial_step: 0.5,
            weights: PenaltyWeights::default(),
            objective: ObjectiveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEntry {
    pub p: Vec<f64>,
    pub objective: f64,
    pub energy: f64,
    pub penalty: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradientBelowTolerance,
    StepBelowTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescentTrace {
    pub iterates: Vec<TraceEntry>,
    pub termination: Termination,
    pub objective_evaluations: usize,
}

/// Projected gradient descent with central-difference gradients and a
/// backtracking line search; the objective never increases across accepted
/// steps.
pub fn descend(
    family: &CurveFamily,
    p0: &[f64],
    opts: &DescentOptions,
) -> (Vec<f64>, DescentTrace) {
    let evals = AtomicUsize::new(0);
    let eval = |p: &[f64]| -> ObjectiveParts {
        evals.fetch_add(1, Ordering::Relaxed);
        penalty_objective(family, p, &opts.weights, &opts.objective)
    };

    let mut p = p0.to_vec();
    family.project(&mut p);
    let mut current = eval(&p);
    let mut trace = vec![TraceEntry {
        p: p.clone(),
        objective: current.total,
        energy: current.energy,
        penalty: current.penalty,
        step: 0.0,
    }];
    let mut termination = Termination::MaxIterations;
    let mut step = opts.initial_step;

    for _ in 0..opts.max_iters {
        // central-difference gradient, components in parallel
        let grads: Vec<f64> = (0..p.len())
            .into_par_iter()
            .map(|i| {
                let h = 1e-6 * (1.0 + p[i].abs());
                let mut pp = p.clone();
                pp[i] += h;
                family.project(&mut pp);
                let fp = eval(&pp).total;
                let mut pm = p.clone();
                pm[i] -= h;
                family.project(&mut pm);
                let fm = eval(&pm).total;
                (fp - fm) / (pp[i] - pm[i])
            })
            .collect();
        let gnorm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < opts.grad_tol {
            termination = Termination::GradientBelowTolerance;
            break;
        }

        // backtracking line search with a mild expansion on success
        let mut accepted = false;
        let mut s = step;
        for _ in 0..30 {
            let mut cand: Vec<f64> = p.iter().zip(&grads).map(|(x, g)| x - s * g).collect();
            family.project(&mut cand);
            let trial = eval(&cand);
            let decrease = current.total - trial.total;
            let armijo = 1e-4 * s * gnorm * gnorm;
            if trial.total.is_finite() && decrease >= armijo {
                p = cand;
                current = trial;
                trace.push(TraceEntry {
                    p: p.clone(),
                    objective: current.total,
                    energy: current.energy,
                    penalty: current.penalty,
                    step: s,
                });
                accepted = true;
                step = (s * 2.0).min(opts.initial_step * 8.0);
                break;
            }
            s *= 0.5;
            if s < opts.step_tol {
                break;
            }
        }
        if !accepted {
            termination = Termination::StepBelowTolerance;
            break;
        }
    }

    let trace = DescentTrace {
        iterates: trace,
        termination,
        objective_evaluations: evals.load(Ordering::Relaxed),
    };
    (p, trace)
}

/// The cylinder-radius family used by the sanity checks: a fixed rectangle
/// wrapped at radius p[0].
pub fn cylinder_radius_family(l: f64, w: f64, r_min: f64, r_max: f64) -> CurveFamily {
    let preset = crate::presets::cylinder_wrap(l, w, (r_min + r_max) / 2.0);
    let region = preset.region.clone();
    CurveFamily::new(
        "cylinder wrap with free radius",
        region,
        vec![r_min],
        vec![r_max],
        move |p: &[f64]| {
            let r = p[0];
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::GeneratorFailure(format!("bad radius {r}")));
            }
            Ok(crate::presets::cylinder_wrap(l, w, r).framed)
        },
    )
}
