//! The single options record carrying every tolerance the kernel uses.
//!
//! Admissibility at desk scale is tolerance-relative, so the thresholds
//! travel with every report. Analytic presets get tight defaults; sampled
//! input gets defaults matched to the accuracy of the fixed difference
//! stencils.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// |d'| = 1 residual bound.
    pub unit_speed: f64,
    /// |d'.n| bound.
    pub perp: f64,
    /// ||n| - 1| bound.
    pub unit_normal: f64,
    /// One-sided continuity bound for d and n across corners.
    pub continuity: f64,
    /// Difference-quotient bound for n'/|n'| where it is defined (1/length).
    pub smoothness: f64,
    /// Threshold on |n'| deciding membership of flat pieces (1/length).
    pub eps_n: f64,
    /// Threshold on |kappa_n| defining the ruled set (1/length).
    pub eps_kappa: f64,
    /// |kappa_g - kappa_c| bound (1/length).
    pub kappa_match: f64,
    /// Corner-angle match bound (radians).
    pub angle_match: f64,
    /// Flatness clause bound: |n'| where kappa_n vanishes (1/length).
    pub flatness: f64,
    /// M1 residual bound, relative to the boundary length.
    pub m1_rel: f64,
    /// Margin below which a pairwise ruling intersection counts as crossing,
    /// relative to the ruling length.
    pub m2_margin_rel: f64,
    /// Required sign margin on g_m - beta_hat * G over the ruled set.
    pub aecond_margin: f64,
    /// Involution residual bound, relative to the boundary length.
    pub involution_rel: f64,
    /// Rigid-fit residual bound for planar gaps, relative to the diameter.
    pub fit_rel: f64,
    /// Agreement bound for double evaluation on shared cell boundaries,
    /// relative to the diameter.
    pub eval_rel: f64,
}

impl Tolerances {
    /// Defaults for curves with exact derivative closures.
    pub fn analytic() -> Self {
        Self {
            unit_speed: 1e-10,
            perp: 1e-8,
            unit_normal: 1e-10,
            continuity: 1e-8,
            smoothness: 1e4,
            eps_n: 1e-8,
            eps_kappa: 1e-8,
            kappa_match: 1e-6,
            angle_match: 1e-8,
            flatness: 1e-6,
            m1_rel: 1e-7,
            m2_margin_rel: 1e-9,
            aecond_margin: 1e-10,
            involution_rel: 1e-7,
            fit_rel: 1e-8,
            eval_rel: 1e-8,
        }
    }

    /// Defaults for densely sampled curves differentiated by stencils.
    pub fn sampled() -> Self {
        Self {
            unit_speed: 1e-6,
            perp: 1e-6,
            unit_normal: 1e-8,
            continuity: 1e-6,
            smoothness: 1e4,
            eps_n: 1e-4,
            eps_kappa: 1e-4,
            kappa_match: 1e-3,
            angle_match: 1e-4,
            flatness: 1e-3,
            m1_rel: 1e-5,
            m2_margin_rel: 1e-7,
            aecond_margin: 1e-8,
            involution_rel: 1e-5,
            fit_rel: 1e-5,
            eval_rel: 1e-5,
        }
    }

    /// Pick defaults matching the data flavor.
    pub fn for_flavor(sampled: bool) -> Self {
        if sampled {
            Self::sampled()
        } else {
            Self::analytic()
        }
    }

    /// Override a named tolerance; returns false for unknown names.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        match key {
            "unit_speed" => self.unit_speed = value,
            "perp" => self.perp = value,
            "unit_normal" => self.unit_normal = value,
            "continuity" => self.continuity = value,
            "smoothness" => self.smoothness = value,
            "eps_n" => self.eps_n = value,
            "eps_kappa" => self.eps_kappa = value,
            "kappa_match" => self.kappa_match = value,
            "angle_match" => self.angle_match = value,
            "flatness" => self.flatness = value,
            "m1_rel" => self.m1_rel = value,
            "m2_margin_rel" => self.m2_margin_rel = value,
            "aecond_margin" => self.aecond_margin = value,
            "involution_rel" => self.involution_rel = value,
            "fit_rel" => self.fit_rel = value,
            "eval_rel" => self.eval_rel = value,
            _ => return false,
        }
        true
    }
}
