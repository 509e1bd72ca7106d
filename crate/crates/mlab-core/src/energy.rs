//! The geometrically linear (vKD), nonlinear (NL) and free-shear (FS)
//! energies, their bulk values and the admissibility checks.
//!
//! Configurations hold periodic parts only. For vKD the axial displacement
//! is `φ_z = −λz + p`; for NL the deformation is
//! `Φ = (Φ_ρ, θ + q, (1−λ)z + r)`. The affine parts are added back
//! analytically, so the axial confinement can never be violated.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{spectral_tail, Domain, GridField, ModelParams, Spectral};

/// Relative tolerance used when flagging pointwise constraint violations.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// Fluctuation power allowed above a quarter of the resolvable band before
/// an energy evaluation is refused as under-resolved.
pub const SPECTRAL_TAIL_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Model {
    Vkd,
    Nl,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Vkd => "VKD",
            Model::Nl => "NL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Configuration {
    pub model: Model,
    pub comp_rho: GridField,
    pub comp_theta: GridField,
    pub comp_z: GridField,
    pub params: ModelParams,
}

impl Configuration {
    pub fn new(
        model: Model,
        comp_rho: GridField,
        comp_theta: GridField,
        comp_z: GridField,
        params: ModelParams,
    ) -> Result<Self> {
        let d = comp_rho.domain;
        if comp_theta.domain != d || comp_z.domain != d {
            return Err(Error::InvalidGrid("components live on different domains".into()));
        }
        for f in [&comp_rho, &comp_theta, &comp_z] {
            if !f.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { model, comp_rho, comp_theta, comp_z, params })
    }

    /// vKD state resting on the mandrel with uniform axial shortening:
    /// φ = (ϱ−1, 0, −λz).
    pub fn unbuckled_vkd(dom: Domain, params: ModelParams) -> Self {
        Self {
            model: Model::Vkd,
            comp_rho: GridField::constant(dom, params.rho - 1.0),
            comp_theta: GridField::zeros(dom),
            comp_z: GridField::zeros(dom),
            params,
        }
    }

    /// NL state Φ = (ϱ, θ, (1−λ)z).
    pub fn uniform_nl(dom: Domain, params: ModelParams) -> Self {
        Self {
            model: Model::Nl,
            comp_rho: GridField::constant(dom, params.rho),
            comp_theta: GridField::zeros(dom),
            comp_z: GridField::zeros(dom),
            params,
        }
    }

    pub fn domain(&self) -> Domain {
        self.comp_rho.domain
    }

    fn expect(&self, model: Model) -> Result<()> {
        if self.model != model {
            return Err(Error::ModelMismatch { expected: model.name(), found: self.model.name() });
        }
        Ok(())
    }

    /// Same configuration translated by `shift` grid nodes in θ.
    pub fn roll_theta(&self, shift: usize) -> Self {
        Self {
            model: self.model,
            comp_rho: self.comp_rho.roll_theta(shift),
            comp_theta: self.comp_theta.roll_theta(shift),
            comp_z: self.comp_z.roll_theta(shift),
            params: self.params,
        }
    }

    /// Flat copy of the stored components, ρ block first.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.domain().len());
        v.extend_from_slice(&self.comp_rho.values);
        v.extend_from_slice(&self.comp_theta.values);
        v.extend_from_slice(&self.comp_z.values);
        v
    }

    pub fn from_vector(&self, v: &[f64]) -> Self {
        let n = self.domain().len();
        let d = self.domain();
        Self {
            model: self.model,
            comp_rho: GridField { domain: d, values: v[..n].to_vec() },
            comp_theta: GridField { domain: d, values: v[n..2 * n].to_vec() },
            comp_z: GridField { domain: d, values: v[2 * n..].to_vec() },
            params: self.params,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    pub eps_tt: GridField,
    pub eps_zz: GridField,
    pub eps_tz: GridField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    pub g_tt: GridField,
    pub g_zz: GridField,
    pub g_tz: GridField,
}

/// A vector field written in the cylindrical frame (E_ρ, E_θ, E_z) of the
/// deformed point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameVector {
    pub rho: GridField,
    pub theta: GridField,
    pub z: GridField,
}

impl FrameVector {
    pub fn norm_sqr(&self) -> GridField {
        let mut out = self.rho.map(|v| v * v);
        for (o, (t, z)) in out.values.iter_mut().zip(self.theta.values.iter().zip(&self.z.values)) {
            *o += t * t + z * z;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    pub tt: FrameVector,
    pub tz: FrameVector,
    pub zz: FrameVector,
}

impl SecondDerivatives {
    /// |∂²_θΦ|² + 2|∂_θzΦ|² + |∂²_zΦ|².
    pub fn norm_sqr(&self) -> GridField {
        let a = self.tt.norm_sqr();
        let b = self.tz.norm_sqr();
        let c = self.zz.norm_sqr();
        let mut out = a;
        for (o, (x, y)) in out.values.iter_mut().zip(b.values.iter().zip(&c.values)) {
            *o += 2.0 * x + y;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ViolationKind {
    /// Radial component below the mandrel.
    Obstacle,
    /// Some first derivative exceeds the slope bound.
    Slope,
    /// ∂_zΦ_z < 0 (axial fold).
    AxialOrientation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub kind: ViolationKind,
    /// Largest pointwise violation.
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyReport {
    pub membrane_tt: f64,
    pub membrane_zz: f64,
    pub membrane_tz: f64,
    pub bending: f64,
    pub total: f64,
    pub bulk: f64,
    pub excess: f64,
    pub slope_linf: f64,
    pub admissible: bool,
    pub violations: Vec<Violation>,
}

impl EnergyReport {
    fn assemble(tt: f64, zz: f64, tz: f64, bending: f64, bulk: f64, slope: f64, violations: Vec<Violation>) -> Self {
        let total = tt + zz + 2.0 * tz + bending;
        Self {
            membrane_tt: tt,
            membrane_zz: zz,
            membrane_tz: tz,
            bending,
            total,
            bulk,
            excess: total - bulk,
            slope_linf: slope,
            admissible: violations.is_empty(),
            violations,
        }
    }
}

/// vKD bulk energy |Ω|(ϱ−1)².
pub fn vkd_bulk(p: &ModelParams) -> f64 {
    2.0 * PI * (p.rho - 1.0) * (p.rho - 1.0)
}

/// NL bulk energy |Ω|(ϱ²−1)² + |Ω|ϱ²h².
pub fn nl_bulk(p: &ModelParams) -> f64 {
    let r2 = p.rho * p.rho;
    2.0 * PI * ((r2 - 1.0) * (r2 - 1.0) + r2 * p.h * p.h)
}

/// First and second derivatives of a configuration, with affine parts added.
pub(crate) struct Derivs {
    /// ∂_θ, ∂_z of the radial component.
    pub r_t: Vec<f64>,
    pub r_z: Vec<f64>,
    pub r_tt: Vec<f64>,
    pub r_zz: Vec<f64>,
    pub r_tz: Vec<f64>,
    /// ∂_θ, ∂_z of the full angular component (identity included for NL).
    pub a_t: Vec<f64>,
    pub a_z: Vec<f64>,
    /// ∂_θ, ∂_z of the full axial component (affine slope included).
    pub x_t: Vec<f64>,
    pub x_z: Vec<f64>,
    /// Second derivatives of the angular and axial periodic parts (NL only).
    pub second: Option<[Vec<f64>; 6]>,
}

fn d(sp: &Spectral, v: &[f64], a: u32, b: u32) -> Vec<f64> {
    let mut out = v.to_vec();
    sp.derivative_in_place(&mut out, a, b);
    out
}

impl Derivs {
    pub(crate) fn compute(sp: &Spectral, c: &Configuration, need_second: bool) -> Self {
        let p = &c.params;
        let r = &c.comp_rho.values;
        let t = &c.comp_theta.values;
        let z = &c.comp_z.values;
        let r_t = d(sp, r, 1, 0);
        let r_z = d(sp, r, 0, 1);
        let r_tt = d(sp, &r_t, 1, 0);
        let r_zz = d(sp, &r_z, 0, 1);
        let r_tz = d(sp, &r_z, 1, 0);
        let (angular_affine, axial_affine) = match c.model {
            Model::Vkd => (0.0, -p.lambda),
            Model::Nl => (1.0, 1.0 - p.lambda),
        };
        let mut a_t = d(sp, t, 1, 0);
        let a_z = d(sp, t, 0, 1);
        let x_t = d(sp, z, 1, 0);
        let mut x_z = d(sp, z, 0, 1);
        let second = if need_second {
            let q_tt = d(sp, &a_t, 1, 0);
            let q_zz = d(sp, &a_z, 0, 1);
            let q_tz = d(sp, &a_z, 1, 0);
            let s_tt = d(sp, &x_t, 1, 0);
            let s_zz = d(sp, &x_z, 0, 1);
            let s_tz = d(sp, &x_z, 1, 0);
            Some([q_tt, q_zz, q_tz, s_tt, s_zz, s_tz])
        } else {
            None
        };
        a_t.iter_mut().for_each(|v| *v += angular_affine);
        x_z.iter_mut().for_each(|v| *v += axial_affine);
        Self { r_t, r_z, r_tt, r_zz, r_tz, a_t, a_z, x_t, x_z, second }
    }

    pub(crate) fn slope_linf(&self) -> f64 {
        [&self.r_t, &self.r_z, &self.a_t, &self.a_z, &self.x_t, &self.x_z]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

fn field(dom: Domain, values: Vec<f64>) -> GridField {
    GridField { domain: dom, values }
}

fn check_resolved(c: &Configuration) -> Result<()> {
    for f in [&c.comp_rho, &c.comp_theta, &c.comp_z] {
        let tail = spectral_tail(f);
        if tail > SPECTRAL_TAIL_LIMIT {
            return Err(Error::UnderResolvedSpectrum { tail });
        }
    }
    Ok(())
}

/// ε = e(φ_θ, φ_z) + ½Dφ_ρ⊗Dφ_ρ + φ_ρ e_θ⊗e_θ.
pub fn vkd_strain(c: &Configuration) -> Result<StrainField> {
    c.expect(Model::Vkd)?;
    let sp = Spectral::new(&c.domain());
    let dv = Derivs::compute(&sp, c, false);
    Ok(strain_from(&c.domain(), &c.comp_rho.values, &dv))
}

fn strain_from(dom: &Domain, r: &[f64], dv: &Derivs) -> StrainField {
    let n = r.len();
    let mut tt = vec![0.0; n];
    let mut zz = vec![0.0; n];
    let mut tz = vec![0.0; n];
    for i in 0..n {
        tt[i] = dv.a_t[i] + 0.5 * dv.r_t[i] * dv.r_t[i] + r[i];
        zz[i] = dv.x_z[i] + 0.5 * dv.r_z[i] * dv.r_z[i];
        tz[i] = 0.5 * (dv.x_t[i] + dv.a_z[i]) + 0.5 * dv.r_t[i] * dv.r_z[i];
    }
    StrainField { eps_tt: field(*dom, tt), eps_zz: field(*dom, zz), eps_tz: field(*dom, tz) }
}

fn violations(c: &Configuration, dv: &Derivs) -> Vec<Violation> {
    let p = &c.params;
    let tol = ADMISSIBILITY_TOL;
    let mut out = Vec::new();
    let floor = match c.model {
        Model::Vkd => p.rho - 1.0,
        Model::Nl => p.rho,
    };
    let below = floor - c.comp_rho.min();
    if below > tol * floor.abs().max(1.0) {
        out.push(Violation { kind: ViolationKind::Obstacle, amount: below });
    }
    let slope = dv.slope_linf();
    if p.m.is_finite() && slope - p.m > tol * p.m.max(1.0) {
        out.push(Violation { kind: ViolationKind::Slope, amount: slope - p.m });
    }
    if c.model == Model::Nl {
        let worst = dv.x_z.iter().copied().fold(f64::INFINITY, f64::min);
        if worst < -tol {
            out.push(Violation { kind: ViolationKind::AxialOrientation, amount: -worst });
        }
    }
    out
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn bending_sum(dv: &Derivs) -> f64 {
    let mut s = 0.0;
    for i in 0..dv.r_tt.len() {
        s += dv.r_tt[i] * dv.r_tt[i] + 2.0 * dv.r_tz[i] * dv.r_tz[i] + dv.r_zz[i] * dv.r_zz[i];
    }
    s
}

fn vkd_like(c: &Configuration, free_shear: bool) -> Result<EnergyReport> {
    c.expect(Model::Vkd)?;
    check_resolved(c)?;
    Ok(vkd_like_unchecked(c, free_shear))
}

pub(crate) fn vkd_like_unchecked(c: &Configuration, free_shear: bool) -> EnergyReport {
    let dom = c.domain();
    let w = dom.node_weight();
    let sp = Spectral::new(&dom);
    let dv = Derivs::compute(&sp, c, false);
    let eps = strain_from(&dom, &c.comp_rho.values, &dv);
    let tt = sum_sq(&eps.eps_tt.values) * w;
    let zz = sum_sq(&eps.eps_zz.values) * w;
    let tz = if free_shear { 0.0 } else { sum_sq(&eps.eps_tz.values) * w };
    let h2 = c.params.h * c.params.h;
    let bending = h2 * bending_sum(&dv) * w;
    EnergyReport::assemble(tt, zz, tz, bending, vkd_bulk(&c.params), dv.slope_linf(), violations(c, &dv))
}

/// ∫|ε|² + h²|D²φ_ρ|², with the shear strain counted twice.
pub fn vkd_energy(c: &Configuration) -> Result<EnergyReport> {
    vkd_like(c, false)
}

/// vKD energy without the shear membrane term.
pub fn fs_energy(c: &Configuration) -> Result<EnergyReport> {
    vkd_like(c, true)
}

/// Metric g = DΦᵀDΦ in (θ, z) coordinates.
pub fn nl_metric(c: &Configuration) -> Result<MetricField> {
    c.expect(Model::Nl)?;
    let sp = Spectral::new(&c.domain());
    let dv = Derivs::compute(&sp, c, false);
    Ok(metric_from(&c.domain(), &c.comp_rho.values, &dv))
}

fn metric_from(dom: &Domain, r: &[f64], dv: &Derivs) -> MetricField {
    let n = r.len();
    let mut gtt = vec![0.0; n];
    let mut gzz = vec![0.0; n];
    let mut gtz = vec![0.0; n];
    for i in 0..n {
        let r2 = r[i] * r[i];
        gtt[i] = dv.r_t[i] * dv.r_t[i] + r2 * dv.a_t[i] * dv.a_t[i] + dv.x_t[i] * dv.x_t[i];
        gzz[i] = dv.r_z[i] * dv.r_z[i] + r2 * dv.a_z[i] * dv.a_z[i] + dv.x_z[i] * dv.x_z[i];
        gtz[i] = dv.r_t[i] * dv.r_z[i] + r2 * dv.a_t[i] * dv.a_z[i] + dv.x_t[i] * dv.x_z[i];
    }
    MetricField { g_tt: field(*dom, gtt), g_zz: field(*dom, gzz), g_tz: field(*dom, gtz) }
}

/// ∂²_θΦ, ∂_θzΦ, ∂²_zΦ in the frame (E_ρ(Φ), E_θ(Φ), E_z).
pub fn nl_second_derivatives(c: &Configuration) -> Result<SecondDerivatives> {
    c.expect(Model::Nl)?;
    let sp = Spectral::new(&c.domain());
    let dv = Derivs::compute(&sp, c, true);
    Ok(second_from(&c.domain(), &c.comp_rho.values, &dv))
}

fn second_from(dom: &Domain, r: &[f64], dv: &Derivs) -> SecondDerivatives {
    let n = r.len();
    let [q_tt, q_zz, q_tz, s_tt, s_zz, s_tz] = dv.second.as_ref().expect("second derivatives");
    let mut out: [Vec<f64>; 6] = Default::default();
    for v in out.iter_mut() {
        *v = vec![0.0; n];
    }
    for i in 0..n {
        let (a, b, t, s) = (dv.r_t[i], dv.r_z[i], dv.a_t[i], dv.a_z[i]);
        out[0][i] = dv.r_tt[i] - r[i] * t * t;
        out[1][i] = 2.0 * a * t + r[i] * q_tt[i];
        out[2][i] = dv.r_tz[i] - r[i] * t * s;
        out[3][i] = a * s + t * b + r[i] * q_tz[i];
        out[4][i] = dv.r_zz[i] - r[i] * s * s;
        out[5][i] = 2.0 * b * s + r[i] * q_zz[i];
    }
    let [tt_r, tt_t, tz_r, tz_t, zz_r, zz_t] = out;
    SecondDerivatives {
        tt: FrameVector { rho: field(*dom, tt_r), theta: field(*dom, tt_t), z: field(*dom, s_tt.clone()) },
        tz: FrameVector { rho: field(*dom, tz_r), theta: field(*dom, tz_t), z: field(*dom, s_tz.clone()) },
        zz: FrameVector { rho: field(*dom, zz_r), theta: field(*dom, zz_t), z: field(*dom, s_zz.clone()) },
    }
}

/// ∫|g − id|² + h²|D²Φ|².
pub fn nl_energy(c: &Configuration) -> Result<EnergyReport> {
    c.expect(Model::Nl)?;
    check_resolved(c)?;
    Ok(nl_energy_unchecked(c))
}

pub(crate) fn nl_energy_unchecked(c: &Configuration) -> EnergyReport {
    let dom = c.domain();
    let w = dom.node_weight();
    let sp = Spectral::new(&dom);
    let dv = Derivs::compute(&sp, c, true);
    let g = metric_from(&dom, &c.comp_rho.values, &dv);
    let tt: f64 = g.g_tt.values.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() * w;
    let zz: f64 = g.g_zz.values.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() * w;
    let tz = sum_sq(&g.g_tz.values) * w;
    let dd = second_from(&dom, &c.comp_rho.values, &dv);
    let h2 = c.params.h * c.params.h;
    let bending = h2 * dd.norm_sqr().values.iter().sum::<f64>() * w;
    EnergyReport::assemble(tt, zz, tz, bending, nl_bulk(&c.params), dv.slope_linf(), violations(c, &dv))
}

/// Energy of the model a configuration belongs to; `free_shear` selects FS
/// for vKD configurations.
pub fn energy(c: &Configuration, free_shear: bool) -> Result<EnergyReport> {
    match c.model {
        Model::Vkd => vkd_like(c, free_shear),
        Model::Nl => nl_energy(c),
    }
}

/// Nodal energy without the resolution guard; used where the discrete
/// functional itself is the object of interest.
pub(crate) fn energy_unchecked(c: &Configuration, free_shear: bool) -> EnergyReport {
    match c.model {
        Model::Vkd => vkd_like_unchecked(c, free_shear),
        Model::Nl => nl_energy_unchecked(c),
    }
}

/// Pointwise constraint check without computing an energy.
pub fn admissibility(c: &Configuration) -> Vec<Violation> {
    let sp = Spectral::new(&c.domain());
    let dv = Derivs::compute(&sp, c, false);
    violations(c, &dv)
}

/// (σ₁²−1)₊² + (σ₂²−1)₊² for the singular values σ of a 3×2 matrix.
pub fn relaxed_density(f: &[[f64; 2]; 3]) -> f64 {
    let (mut c11, mut c12, mut c22) = (0.0, 0.0, 0.0);
    for row in f {
        c11 += row[0] * row[0];
        c12 += row[0] * row[1];
        c22 += row[1] * row[1];
    }
    let tr = c11 + c22;
    let disc = libm::sqrt(((c11 - c22) * (c11 - c22) + 4.0 * c12 * c12).max(0.0));
    let s1 = 0.5 * (tr + disc);
    let s2 = 0.5 * (tr - disc);
    let pos = |x: f64| if x > 0.0 { x * x } else { 0.0 };
    pos(s1 - 1.0) + pos(s2 - 1.0)
}

/// |FᵀF − id|² with the off-diagonal counted twice.
pub fn metric_density(f: &[[f64; 2]; 3]) -> f64 {
    let (mut c11, mut c12, mut c22) = (0.0, 0.0, 0.0);
    for row in f {
        c11 += row[0] * row[0];
        c12 += row[0] * row[1];
        c22 += row[1] * row[1];
    }
    (c11 - 1.0) * (c11 - 1.0) + 2.0 * c12 * c12 + (c22 - 1.0) * (c22 - 1.0)
}

/// Constraint penalties added to the discrete energy during minimization.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Penalty {
    /// Weight of ∫Σ(|∂_iΦ_j| − m)₊²; zero disables it.
    pub slope_weight: f64,
    /// Weight of ∫(−∂_zΦ_z)₊² (NL only).
    pub zsign_weight: f64,
}

/// Discrete energy plus penalties and the exact gradient with respect to
/// the stored nodal values (ρ block, θ block, z block).
#[derive(Debug, Clone)]
pub struct Objective {
    pub energy: f64,
    pub penalty: f64,
    pub gradient: Vec<f64>,
}

fn add_slope_penalty(vals: &[f64], m: f64, weight: f64, grad: &mut [f64]) -> f64 {
    let mut s = 0.0;
    for (v, g) in vals.iter().zip(grad.iter_mut()) {
        let e = v.abs() - m;
        if e > 0.0 {
            s += e * e;
            *g += 2.0 * weight * e * v.signum();
        }
    }
    weight * s
}

fn add_into(dst: &mut [f64], src: &[f64], s: f64) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += s * b);
}

/// Objective and gradient for vKD (or FS when `free_shear`).
pub fn vkd_objective(sp: &Spectral, c: &Configuration, free_shear: bool, pen: &Penalty) -> Objective {
    let dom = *sp.domain();
    let n = dom.len();
    let w = dom.node_weight();
    let p = c.params;
    let h2 = p.h * p.h;
    let r = &c.comp_rho.values;
    let dv = Derivs::compute(sp, c, false);
    let eps = strain_from(&dom, r, &dv);
    let (ett, ezz, etz) = (&eps.eps_tt.values, &eps.eps_zz.values, &eps.eps_tz.values);
    let shear = if free_shear { 0.0 } else { 1.0 };

    let mut energy = 0.0;
    let mut f_r = vec![0.0; n];
    let mut f_rt = vec![0.0; n];
    let mut f_rz = vec![0.0; n];
    let mut f_tt = vec![0.0; n];
    let mut f_tz = vec![0.0; n];
    let mut f_pt = vec![0.0; n];
    let mut f_pz = vec![0.0; n];
    let mut f_rtt = vec![0.0; n];
    let mut f_rtz = vec![0.0; n];
    let mut f_rzz = vec![0.0; n];
    for i in 0..n {
        let (a, b, s) = (ett[i], ezz[i], shear * etz[i]);
        energy += a * a
            + b * b
            + 2.0 * s * s
            + h2 * (dv.r_tt[i] * dv.r_tt[i] + 2.0 * dv.r_tz[i] * dv.r_tz[i] + dv.r_zz[i] * dv.r_zz[i]);
        f_r[i] = 2.0 * a;
        f_rt[i] = 2.0 * a * dv.r_t[i] + 2.0 * s * dv.r_z[i];
        f_rz[i] = 2.0 * b * dv.r_z[i] + 2.0 * s * dv.r_t[i];
        f_tt[i] = 2.0 * a;
        f_tz[i] = 2.0 * s;
        f_pt[i] = 2.0 * s;
        f_pz[i] = 2.0 * b;
        f_rtt[i] = 2.0 * h2 * dv.r_tt[i];
        f_rtz[i] = 4.0 * h2 * dv.r_tz[i];
        f_rzz[i] = 2.0 * h2 * dv.r_zz[i];
    }
    let mut penalty = 0.0;
    if pen.slope_weight > 0.0 && p.m.is_finite() {
        let sw = pen.slope_weight;
        penalty += add_slope_penalty(&dv.r_t, p.m, sw, &mut f_rt);
        penalty += add_slope_penalty(&dv.r_z, p.m, sw, &mut f_rz);
        penalty += add_slope_penalty(&dv.a_t, p.m, sw, &mut f_tt);
        penalty += add_slope_penalty(&dv.a_z, p.m, sw, &mut f_tz);
        penalty += add_slope_penalty(&dv.x_t, p.m, sw, &mut f_pt);
        penalty += add_slope_penalty(&dv.x_z, p.m, sw, &mut f_pz);
    }

    let mut grad = vec![0.0; 3 * n];
    {
        let g = &mut grad[..n];
        add_into(g, &f_r, 1.0);
        add_into(g, &d(sp, &f_rt, 1, 0), -1.0);
        add_into(g, &d(sp, &f_rz, 0, 1), -1.0);
        add_into(g, &d(sp, &f_rtt, 2, 0), 1.0);
        add_into(g, &d(sp, &d(sp, &f_rtz, 0, 1), 1, 0), 1.0);
        add_into(g, &d(sp, &f_rzz, 0, 2), 1.0);
    }
    {
        let g = &mut grad[n..2 * n];
        add_into(g, &d(sp, &f_tt, 1, 0), -1.0);
        add_into(g, &d(sp, &f_tz, 0, 1), -1.0);
    }
    {
        let g = &mut grad[2 * n..];
        add_into(g, &d(sp, &f_pt, 1, 0), -1.0);
        add_into(g, &d(sp, &f_pz, 0, 1), -1.0);
    }
    grad.iter_mut().for_each(|v| *v *= w);
    Objective { energy: energy * w, penalty: penalty * w, gradient: grad }
}

/// Objective and gradient for the nonlinear energy.
pub fn nl_objective(sp: &Spectral, c: &Configuration, pen: &Penalty) -> Objective {
    let dom = *sp.domain();
    let n = dom.len();
    let w = dom.node_weight();
    let p = c.params;
    let h2 = p.h * p.h;
    let r = &c.comp_rho.values;
    let dv = Derivs::compute(sp, c, true);
    let [q_tt, q_zz, q_tz, s_tt, s_zz, s_tz] = dv.second.as_ref().expect("second derivatives");

    let mut energy = 0.0;
    let mut f_r = vec![0.0; n];
    let mut f_a = vec![0.0; n];
    let mut f_b = vec![0.0; n];
    let mut f_t = vec![0.0; n];
    let mut f_s = vec![0.0; n];
    let mut f_p = vec![0.0; n];
    let mut f_q = vec![0.0; n];
    let mut f_a2 = vec![0.0; n];
    let mut f_b2 = vec![0.0; n];
    let mut f_c2 = vec![0.0; n];
    let mut f_qtt = vec![0.0; n];
    let mut f_qzz = vec![0.0; n];
    let mut f_qtz = vec![0.0; n];
    let mut f_stt = vec![0.0; n];
    let mut f_szz = vec![0.0; n];
    let mut f_stz = vec![0.0; n];
    for i in 0..n {
        let rr = r[i];
        let (a, b) = (dv.r_t[i], dv.r_z[i]);
        let (t, s) = (dv.a_t[i], dv.a_z[i]);
        let (pp, qq) = (dv.x_t[i], dv.x_z[i]);
        let r2 = rr * rr;
        let mt = a * a + r2 * t * t + pp * pp - 1.0;
        let mz = b * b + r2 * s * s + qq * qq - 1.0;
        let mx = a * b + r2 * t * s + pp * qq;
        let a1 = dv.r_tt[i] - rr * t * t;
        let b1 = 2.0 * a * t + rr * q_tt[i];
        let c1 = s_tt[i];
        let a2 = dv.r_tz[i] - rr * t * s;
        let b2 = a * s + t * b + rr * q_tz[i];
        let c2 = s_tz[i];
        let a3 = dv.r_zz[i] - rr * s * s;
        let b3 = 2.0 * b * s + rr * q_zz[i];
        let c3 = s_zz[i];
        energy += mt * mt
            + mz * mz
            + 2.0 * mx * mx
            + h2 * (a1 * a1 + b1 * b1 + c1 * c1 + 2.0 * (a2 * a2 + b2 * b2 + c2 * c2) + a3 * a3 + b3 * b3 + c3 * c3);
        let hh = 2.0 * h2;
        f_r[i] = 4.0 * rr * (mt * t * t + mz * s * s + 2.0 * mx * t * s)
            + hh * (-a1 * t * t + b1 * q_tt[i] - 2.0 * a2 * t * s + 2.0 * b2 * q_tz[i] - a3 * s * s + b3 * q_zz[i]);
        f_a[i] = 4.0 * mt * a + 4.0 * mx * b + hh * (2.0 * b1 * t + 2.0 * b2 * s);
        f_b[i] = 4.0 * mz * b + 4.0 * mx * a + hh * (2.0 * b2 * t + 2.0 * b3 * s);
        f_t[i] =
            4.0 * r2 * (mt * t + mx * s) + hh * (-2.0 * a1 * rr * t + 2.0 * b1 * a - 2.0 * a2 * rr * s + 2.0 * b2 * b);
        f_s[i] =
            4.0 * r2 * (mz * s + mx * t) + hh * (-2.0 * a2 * rr * t + 2.0 * b2 * a - 2.0 * a3 * rr * s + 2.0 * b3 * b);
        f_p[i] = 4.0 * mt * pp + 4.0 * mx * qq;
        f_q[i] = 4.0 * mz * qq + 4.0 * mx * pp;
        f_a2[i] = hh * a1;
        f_c2[i] = 2.0 * hh * a2;
        f_b2[i] = hh * a3;
        f_qtt[i] = hh * b1 * rr;
        f_qtz[i] = 2.0 * hh * b2 * rr;
        f_qzz[i] = hh * b3 * rr;
        f_stt[i] = hh * c1;
        f_stz[i] = 2.0 * hh * c2;
        f_szz[i] = hh * c3;
    }
    let mut penalty = 0.0;
    if pen.slope_weight > 0.0 && p.m.is_finite() {
        let sw = pen.slope_weight;
        penalty += add_slope_penalty(&dv.r_t, p.m, sw, &mut f_a);
        penalty += add_slope_penalty(&dv.r_z, p.m, sw, &mut f_b);
        penalty += add_slope_penalty(&dv.a_t, p.m, sw, &mut f_t);
        penalty += add_slope_penalty(&dv.a_z, p.m, sw, &mut f_s);
        penalty += add_slope_penalty(&dv.x_t, p.m, sw, &mut f_p);
        penalty += add_slope_penalty(&dv.x_z, p.m, sw, &mut f_q);
    }
    if pen.zsign_weight > 0.0 {
        let zw = pen.zsign_weight;
        for i in 0..n {
            let v = dv.x_z[i];
            if v < 0.0 {
                penalty += zw * v * v;
                f_q[i] += 2.0 * zw * v;
            }
        }
    }

    let mut grad = vec![0.0; 3 * n];
    {
        let g = &mut grad[..n];
        add_into(g, &f_r, 1.0);
        add_into(g, &d(sp, &f_a, 1, 0), -1.0);
        add_into(g, &d(sp, &f_b, 0, 1), -1.0);
        add_into(g, &d(sp, &f_a2, 2, 0), 1.0);
        add_into(g, &d(sp, &d(sp, &f_c2, 0, 1), 1, 0), 1.0);
        add_into(g, &d(sp, &f_b2, 0, 2), 1.0);
    }
    {
        let g = &mut grad[n..2 * n];
        add_into(g, &d(sp, &f_t, 1, 0), -1.0);
        add_into(g, &d(sp, &f_s, 0, 1), -1.0);
        add_into(g, &d(sp, &f_qtt, 2, 0), 1.0);
        add_into(g, &d(sp, &d(sp, &f_qtz, 0, 1), 1, 0), 1.0);
        add_into(g, &d(sp, &f_qzz, 0, 2), 1.0);
    }
    {
        let g = &mut grad[2 * n..];
        add_into(g, &d(sp, &f_p, 1, 0), -1.0);
        add_into(g, &d(sp, &f_q, 0, 1), -1.0);
        add_into(g, &d(sp, &f_stt, 2, 0), 1.0);
        add_into(g, &d(sp, &d(sp, &f_stz, 0, 1), 1, 0), 1.0);
        add_into(g, &d(sp, &f_szz, 0, 2), 1.0);
    }
    grad.iter_mut().for_each(|v| *v *= w);
    Objective { energy: energy * w, penalty: penalty * w, gradient: grad }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(h: f64, lambda: f64, rho: f64, m: f64) -> ModelParams {
        ModelParams::new(h, lambda, rho, m).unwrap()
    }

    #[test]
    fn unbuckled_vkd_strain_is_uniform() {
        let dom = Domain::new(16, 16).unwrap();
        let c = Configuration::unbuckled_vkd(dom, params(0.01, 0.25, 1.5, f64::INFINITY));
        let e = vkd_strain(&c).unwrap();
        assert!(e.eps_tt.values.iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!(e.eps_zz.values.iter().all(|v| (v + 0.25).abs() < 1e-14));
        assert!(e.eps_tz.max_abs() < 1e-14);
    }

    #[test]
    fn unbuckled_vkd_energy_closed_form() {
        let dom = Domain::new(16, 16).unwrap();
        let c = Configuration::unbuckled_vkd(dom, params(0.01, 0.25, 1.5, 4.0));
        let r = vkd_energy(&c).unwrap();
        assert_relative_eq!(r.total, 2.0 * PI * 0.3125, max_relative = 1e-12);
        assert_relative_eq!(r.excess, 2.0 * PI * 0.0625, max_relative = 1e-12);
        assert!(r.admissible);
        let fs = fs_energy(&c).unwrap();
        assert_relative_eq!(fs.total, r.total, max_relative = 1e-14);
    }

    #[test]
    fn zero_displacement_on_neutral_mandrel_costs_only_confinement() {
        let dom = Domain::new(8, 8).unwrap();
        let c = Configuration::unbuckled_vkd(dom, params(0.3, 0.1, 1.0, f64::INFINITY));
        let r = fs_energy(&c).unwrap();
        assert_relative_eq!(r.total, 2.0 * PI * 0.01, max_relative = 1e-12);
    }

    #[test]
    fn model_mismatch_is_rejected() {
        let dom = Domain::new(8, 8).unwrap();
        let c = Configuration::uniform_nl(dom, params(0.1, 0.2, 1.0, 1.0));
        assert!(matches!(vkd_strain(&c), Err(Error::ModelMismatch { .. })));
        let v = Configuration::unbuckled_vkd(dom, params(0.1, 0.2, 1.0, 1.0));
        assert!(nl_metric(&v).is_err());
        assert!(nl_second_derivatives(&v).is_err());
    }

    #[test]
    fn uniform_nl_metric_and_bending() {
        let dom = Domain::new(8, 8).unwrap();
        let c = Configuration::uniform_nl(dom, params(0.1, 0.25, 1.3, f64::INFINITY));
        let g = nl_metric(&c).unwrap();
        assert!(g.g_tt.values.iter().all(|v| (v - 1.69).abs() < 1e-13));
        assert!(g.g_zz.values.iter().all(|v| (v - 0.5625).abs() < 1e-13));
        assert!(g.g_tz.max_abs() < 1e-14);
        let dd = nl_second_derivatives(&c).unwrap();
        assert!(dd.tt.norm_sqr().values.iter().all(|v| (v - 1.69).abs() < 1e-13));
        assert!(dd.tz.norm_sqr().max_abs() < 1e-20);
        assert!(dd.zz.norm_sqr().max_abs() < 1e-20);
    }

    #[test]
    fn uniform_nl_energy_closed_form() {
        let dom = Domain::new(8, 8).unwrap();
        let c = Configuration::uniform_nl(dom, params(0.1, 0.25, 1.0, f64::INFINITY));
        let r = nl_energy(&c).unwrap();
        let membrane = r.membrane_tt + r.membrane_zz + 2.0 * r.membrane_tz;
        assert_relative_eq!(membrane, 2.0 * PI * 0.19140625, max_relative = 1e-12);
    }

    #[test]
    fn nearly_identity_has_no_excess() {
        let dom = Domain::new(8, 8).unwrap();
        let c = Configuration::uniform_nl(dom, params(0.05, 1e-12, 1.0, f64::INFINITY));
        let r = nl_energy(&c).unwrap();
        assert_relative_eq!(r.total, 2.0 * PI * 0.0025, max_relative = 1e-10);
        assert!(r.excess.abs() < 1e-12);
    }

    #[test]
    fn relaxed_density_examples() {
        let id = [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        assert_eq!(relaxed_density(&id), 0.0);
        let stretched = [[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(relaxed_density(&stretched), 9.0, max_relative = 1e-14);
        let compressed = [[0.5, 0.0], [0.0, 0.0], [0.0, 0.9]];
        assert_eq!(relaxed_density(&compressed), 0.0);
    }

    #[test]
    fn admissibility_flags_each_constraint() {
        let dom = Domain::new(8, 16).unwrap();
        let p = params(0.1, 0.25, 1.5, 2.0);
        let mut c = Configuration::unbuckled_vkd(dom, p);
        c.comp_rho.values[5] -= 0.1;
        let v = admissibility(&c);
        assert!(v.iter().any(|x| x.kind == ViolationKind::Obstacle));

        let mut c = Configuration::unbuckled_vkd(dom, p);
        c.comp_theta = GridField::from_fn(dom, |t, _| libm::sin(3.0 * t));
        assert!(admissibility(&c).iter().any(|x| x.kind == ViolationKind::Slope));

        let mut c = Configuration::uniform_nl(dom, params(0.1, 0.25, 1.0, f64::INFINITY));
        c.comp_z = GridField::from_fn(dom, |_, z| 0.2 * libm::sin(2.0 * PI * z));
        assert!(admissibility(&c).iter().any(|x| x.kind == ViolationKind::AxialOrientation));
    }

    fn smooth_config(model: Model, p: ModelParams) -> Configuration {
        let dom = Domain::new(16, 16).unwrap();
        let base = if model == Model::Vkd { p.rho - 1.0 } else { p.rho };
        let r = GridField::from_fn(dom, |t, z| {
            base + 0.05 * (1.0 + libm::cos(t + 2.0 * PI * z)) + 0.02 * libm::sin(2.0 * t)
        });
        let a = GridField::from_fn(dom, |t, z| 0.03 * libm::sin(t - 4.0 * PI * z));
        let x = GridField::from_fn(dom, |t, z| 0.04 * libm::cos(2.0 * PI * z + 2.0 * t));
        Configuration::new(model, r, a, x, p).unwrap()
    }

    fn check_gradient(c: &Configuration, obj: impl Fn(&Configuration) -> Objective) {
        let base = obj(c);
        let v = c.to_vector();
        let step = 1e-6;
        for k in (0..v.len()).step_by(37) {
            let mut up = v.clone();
            up[k] += step;
            let mut dn = v.clone();
            dn[k] -= step;
            let fu = obj(&c.from_vector(&up));
            let fd = obj(&c.from_vector(&dn));
            let num = ((fu.energy + fu.penalty) - (fd.energy + fd.penalty)) / (2.0 * step);
            let ana = base.gradient[k];
            assert!((num - ana).abs() < 1e-6 * (1.0 + ana.abs()), "k={k} num={num} ana={ana}");
        }
    }

    #[test]
    fn vkd_gradient_matches_finite_differences() {
        let p = params(0.1, 0.2, 1.2, 0.1);
        let c = smooth_config(Model::Vkd, p);
        let sp = Spectral::new(&c.domain());
        let pen = Penalty { slope_weight: 3.0, zsign_weight: 0.0 };
        for fs in [false, true] {
            let o = vkd_objective(&sp, &c, fs, &pen);
            let r = vkd_like_unchecked(&c, fs);
            assert_relative_eq!(o.energy, r.total, max_relative = 1e-12);
            assert!(o.penalty > 0.0);
            check_gradient(&c, |c| vkd_objective(&sp, c, fs, &pen));
        }
    }

    #[test]
    fn nl_gradient_matches_finite_differences() {
        let p = params(0.2, 0.3, 1.1, 0.1);
        let c = smooth_config(Model::Nl, p);
        let sp = Spectral::new(&c.domain());
        let pen = Penalty { slope_weight: 2.0, zsign_weight: 5.0 };
        let o = nl_objective(&sp, &c, &pen);
        assert_relative_eq!(o.energy, nl_energy_unchecked(&c).total, max_relative = 1e-12);
        check_gradient(&c, |c| nl_objective(&sp, c, &pen));
    }

    #[test]
    fn under_resolved_field_is_refused() {
        let dom = Domain::new(16, 16).unwrap();
        let p = params(0.1, 0.2, 1.0, f64::INFINITY);
        let mut c = Configuration::unbuckled_vkd(dom, p);
        c.comp_rho = GridField::from_fn(dom, |t, _| 0.1 * libm::cos(7.0 * t));
        assert!(matches!(vkd_energy(&c), Err(Error::UnderResolvedSpectrum { .. })));
    }
}
