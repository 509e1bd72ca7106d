//! Prefactor-free predictions of the minimal excess energy, the phase that
//! attains it and the slope blow-up rates.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::grid::ModelParams;
use crate::pattern::{nl_mandrel_excess, Family};

/// Relative slack used when comparing closed-form expressions, so that
/// exact boundary cases are not split by rounding.
const REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Branch {
    Unbuckled,
    Many,
    One,
    Flat,
    #[cfg_attr(feature = "serde", serde(rename = "FS_12_11"))]
    Fs12_11,
    #[cfg_attr(feature = "serde", serde(rename = "FS_3_2"))]
    Fs3_2,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Unbuckled => "UNBUCKLED",
            Branch::Many => "MANY",
            Branch::One => "ONE",
            Branch::Flat => "FLAT",
            Branch::Fs12_11 => "FS_12_11",
            Branch::Fs3_2 => "FS_3_2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingPrediction {
    pub model: Family,
    pub branch: Branch,
    /// Upper-bound scaling min{λ², max{…}}; equals the minimum up to
    /// constants when `hypothesis_ok`.
    pub value: f64,
    /// Matching lower-bound scaling where one is known.
    pub lower_bound: Option<f64>,
    pub hypothesis_ok: bool,
    pub active_inequalities: Vec<String>,
}

/// min{λ^{1/2}h^{1/4}, m^{1/2}h^{1/2}}.
pub fn c0(lambda: f64, h: f64, m: f64) -> f64 {
    let a = libm::sqrt(lambda) * libm::pow(h, 0.25);
    if m.is_finite() {
        a.min(libm::sqrt(m * h))
    } else {
        a
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + REL_TOL * b.abs()
}

/// Candidate branch values of the axisymmetric upper bound, with
/// `excess` the effective mandrel excess (ϱ−1 or (ϱ²−1)∨h²).
fn axisym_terms(h: f64, lambda: f64, excess: f64, m: f64, with_many: bool) -> Vec<(Branch, f64)> {
    let mut v = alloc::vec![
        (Branch::Flat, lambda * h),
        (Branch::One, libm::pow(excess, 4.0 / 7.0) * libm::pow(h, 6.0 / 7.0) * libm::pow(lambda, 5.0 / 7.0)),
    ];
    if with_many {
        let mfac = if m.is_finite() { libm::pow(m, -1.0 / 3.0) } else { 1.0 };
        v.push((Branch::Many, mfac * libm::pow(excess, 2.0 / 3.0) * libm::pow(h, 2.0 / 3.0) * lambda));
    }
    v
}

fn neutral_lower(h: f64, lambda: f64, m: f64) -> f64 {
    let mut top = libm::pow(h * lambda, 12.0 / 11.0);
    if m.is_finite() {
        top = top.max(h * libm::pow(lambda, 1.5));
    }
    top.min(lambda * lambda)
}

fn resolve(terms: &[(Branch, f64)], lambda: f64, notes: &mut Vec<String>) -> (Branch, f64) {
    let (mut best, mut top) = (terms[0].0, terms[0].1);
    for &(b, v) in &terms[1..] {
        if v > top {
            best = b;
            top = v;
        }
    }
    for &(b, v) in terms {
        if b != best {
            notes.push(format!("{}={:.6e} >= {}={:.6e}", best.name(), top, b.name(), v));
        }
    }
    let l2 = lambda * lambda;
    if le(l2, top) {
        notes.push(format!("lambda^2={l2:.6e} <= {}={top:.6e}", best.name()));
        (Branch::Unbuckled, l2)
    } else {
        notes.push(format!("lambda^2={l2:.6e} > {}={top:.6e}", best.name()));
        (best, top)
    }
}

/// The predicted excess-energy scaling and the phase that attains it.
pub fn predict(model: Family, mp: &ModelParams) -> ScalingPrediction {
    let (h, lambda, m) = (mp.h, mp.lambda, mp.m);
    let mut notes = Vec::new();
    match model {
        Family::Vkd => {
            let excess = mp.rho - 1.0;
            let terms = axisym_terms(h, lambda, excess, m, m.is_finite());
            let (branch, value) = resolve(&terms, lambda, &mut notes);
            let threshold = c0(lambda, h, m);
            let large = excess > 0.0 && le(threshold, excess);
            notes.push(format!("rho-1={excess:.6e} {} c0={threshold:.6e}", if large { ">=" } else { "<" }));
            let neutral_match = excess == 0.0 && le(libm::pow(lambda, 5.0 / 6.0), h);
            if excess == 0.0 {
                notes.push(format!("h={h:.6e} {} lambda^(5/6)", if neutral_match { ">=" } else { "<" }));
            }
            let lower = if large {
                Some(value)
            } else if excess == 0.0 {
                Some(neutral_lower(h, lambda, m))
            } else {
                None
            };
            ScalingPrediction {
                model,
                branch,
                value,
                lower_bound: lower,
                hypothesis_ok: large || neutral_match,
                active_inequalities: notes,
            }
        }
        Family::Nl => {
            let x = nl_mandrel_excess(mp);
            let terms = axisym_terms(h, lambda, x, 1.0, true);
            let (branch, value) = resolve(&terms, lambda, &mut notes);
            let threshold = c0(lambda, h, 1.0);
            let large = le(threshold, x) && m.is_finite();
            notes.push(format!(
                "(rho^2-1)vh^2={x:.6e} {} c0={threshold:.6e}",
                if le(threshold, x) { ">=" } else { "<" }
            ));
            if !m.is_finite() {
                notes.push("m=inf: lower bound not available".into());
            }
            let neutral = mp.rho == 1.0;
            let neutral_match = neutral && m.is_finite() && le(libm::pow(lambda, 5.0 / 6.0), h);
            let lower = if large {
                Some(value)
            } else if neutral && m.is_finite() {
                Some(neutral_lower(h, lambda, m))
            } else {
                None
            };
            ScalingPrediction {
                model,
                branch,
                value,
                lower_bound: lower,
                hypothesis_ok: large || neutral_match,
                active_inequalities: notes,
            }
        }
        Family::Fs => {
            let mut terms = alloc::vec![(Branch::Fs12_11, libm::pow(h * lambda, 12.0 / 11.0))];
            if m.is_finite() {
                terms.push((Branch::Fs3_2, h * libm::pow(lambda, 1.5)));
            }
            let (branch, value) = resolve(&terms, lambda, &mut notes);
            ScalingPrediction {
                model,
                branch,
                value,
                lower_bound: Some(value),
                hypothesis_ok: true,
                active_inequalities: notes,
            }
        }
    }
}

/// Which blow-up estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BlowupModel {
    VkdLarge,
    Fs,
}

/// Predicted lower-bound rate for ‖Dφ_ρ‖∞ of minimizers without a slope bound.
pub fn blowup_rate(model: BlowupModel, mp: &ModelParams) -> f64 {
    match model {
        BlowupModel::VkdLarge => {
            libm::pow(mp.rho - 1.0, 1.0 / 7.0) * libm::pow(mp.h, -2.0 / 7.0) * libm::pow(mp.lambda, 3.0 / 7.0)
        }
        BlowupModel::Fs => libm::pow(mp.h, -1.0 / 11.0) * libm::pow(mp.lambda, 9.0 / 22.0),
    }
}

/// Whether the blow-up estimate's asymptotic hypothesis is comfortably met
/// (the small parameter is at least a decade below its threshold).
pub fn blowup_hypothesis(model: BlowupModel, mp: &ModelParams) -> bool {
    match model {
        BlowupModel::VkdLarge => {
            mp.rho > 1.0 && mp.h * 10.0 <= libm::pow(mp.rho - 1.0, -2.0 / 3.0) * libm::pow(mp.lambda, 1.5)
        }
        BlowupModel::Fs => mp.h * 10.0 <= libm::pow(mp.lambda, 5.0 / 6.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Equivalence {
    pub name: String,
    pub lhs: bool,
    pub rhs: bool,
    pub agree: bool,
}

/// Evaluates both sides of the algebraic equivalences that turn the
/// upper-bound maximum into the mandrel threshold.
pub fn regime_boundary(model: Family, mp: &ModelParams) -> Vec<Equivalence> {
    let (h, lambda, m) = (mp.h, mp.lambda, mp.m);
    let mut out = Vec::new();
    let mut push = |name: &str, lhs: bool, rhs: bool| {
        out.push(Equivalence { name: name.into(), lhs, rhs, agree: lhs == rhs });
    };
    match model {
        Family::Vkd => {
            let excess = mp.rho - 1.0;
            let top = axisym_terms(h, lambda, excess, m, m.is_finite())
                .iter()
                .filter(|t| t.0 != Branch::Flat)
                .fold(0.0f64, |a, t| a.max(t.1));
            push("lambda*h <= max(one, many) <=> c0 <= rho-1", le(lambda * h, top), le(c0(lambda, h, m), excess));
        }
        Family::Nl => {
            let x = nl_mandrel_excess(mp);
            let top = axisym_terms(h, lambda, x, 1.0, true)
                .iter()
                .filter(|t| t.0 != Branch::Flat)
                .fold(0.0f64, |a, t| a.max(t.1));
            push(
                "lambda*h <= max(one, many) <=> c0(.,.,1) <= (rho^2-1)vh^2",
                le(lambda * h, top),
                le(c0(lambda, h, 1.0), x),
            );
        }
        Family::Fs => {}
    }
    let fs_top = libm::pow(h * lambda, 12.0 / 11.0).max(h * libm::pow(lambda, 1.5));
    push(
        "h >= lambda^(5/6) <=> max(h lambda^(3/2), (h lambda)^(12/11)) >= lambda^2",
        le(libm::pow(lambda, 5.0 / 6.0), h),
        le(lambda * lambda, fs_top),
    );
    out
}
