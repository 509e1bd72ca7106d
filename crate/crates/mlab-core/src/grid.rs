//! Periodic scalar fields on the reference cylinder Ω = I_θ × I_z.
//!
//! Values are stored θ-major (`values[i * n_z + j]` is the node
//! `(θ_i, z_j)`). Derivatives are Fourier-spectral, quadrature is the
//! rectangle rule. A domain may store only one of `z_cells` identical axial
//! cells; every integral and norm is still taken over the whole of Ω.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Domain {
    pub theta_extent: f64,
    pub z_extent: f64,
    pub n_theta: usize,
    pub n_z: usize,
    /// Number of identical axial cells the stored grid stands for.
    pub z_cells: usize,
}

impl Domain {
    /// The standard cylinder `[0, 2π) × [−½, ½)`.
    pub fn new(n_theta: usize, n_z: usize) -> Result<Self> {
        Self::build(2.0 * PI, 1.0, n_theta, n_z, 1)
    }

    /// Grid over one of `cells` axial periods of the standard cylinder.
    pub fn with_cells(n_theta: usize, n_z: usize, cells: usize) -> Result<Self> {
        Self::build(2.0 * PI, 1.0, n_theta, n_z, cells)
    }

    /// Arbitrary rectangle, used for the interpolation checks on the unit square.
    pub fn with_extents(theta_extent: f64, z_extent: f64, n_theta: usize, n_z: usize) -> Result<Self> {
        Self::build(theta_extent, z_extent, n_theta, n_z, 1)
    }

    fn build(theta_extent: f64, z_extent: f64, n_theta: usize, n_z: usize, z_cells: usize) -> Result<Self> {
        for (name, n) in [("n_theta", n_theta), ("n_z", n_z)] {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be even and at least 8")));
            }
        }
        if z_cells == 0 {
            return Err(Error::InvalidGrid("z_cells must be positive".into()));
        }
        if !(theta_extent > 0.0 && z_extent > 0.0 && theta_extent.is_finite() && z_extent.is_finite()) {
            return Err(Error::InvalidGrid("extents must be positive and finite".into()));
        }
        Ok(Self { theta_extent, z_extent, n_theta, n_z, z_cells })
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_theta(&self) -> f64 {
        self.theta_extent / self.n_theta as f64
    }

    /// Axial spacing of the stored grid.
    pub fn d_z(&self) -> f64 {
        self.cell_length() / self.n_z as f64
    }

    pub fn cell_length(&self) -> f64 {
        self.z_extent / self.z_cells as f64
    }

    pub fn area(&self) -> f64 {
        self.theta_extent * self.z_extent
    }

    /// Quadrature weight per node, already accounting for the replicated cells.
    pub fn node_weight(&self) -> f64 {
        self.area() / self.len() as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.d_theta()
    }

    pub fn z(&self, j: usize) -> f64 {
        -0.5 * self.z_extent + j as f64 * self.d_z()
    }

    /// Total number of axial samples over the whole of I_z.
    pub fn effective_n_z(&self) -> usize {
        self.n_z * self.z_cells
    }

    /// Angular wavenumber of FFT bin `k` along θ.
    fn kappa_theta(&self, k: usize) -> f64 {
        signed_mode(k, self.n_theta) * 2.0 * PI / self.theta_extent
    }

    fn kappa_z(&self, k: usize) -> f64 {
        signed_mode(k, self.n_z) * 2.0 * PI / self.cell_length()
    }
}

fn signed_mode(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Rejects a pattern/grid pairing that puts fewer than 32 samples on a
/// wrinkle. `n` wrinkles of width δ/n wrap `k` times along the axis; tilted
/// patterns also vary along θ.
pub fn check_resolution(dom: &Domain, n: u32, k: u32, delta: f64, tilted: bool) -> Result<()> {
    const PER_WRINKLE: f64 = 32.0;
    let need_z = libm::ceil(PER_WRINKLE * n as f64 * k as f64 / delta) as usize;
    if dom.effective_n_z() < need_z {
        return Err(Error::UnderResolved { axis: "z", required: need_z, available: dom.effective_n_z() });
    }
    if tilted {
        let need_t = libm::ceil(PER_WRINKLE * n as f64 / delta) as usize;
        if dom.n_theta < need_t {
            return Err(Error::UnderResolved { axis: "theta", required: need_t, available: dom.n_theta });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridField {
    pub domain: Domain,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidGrid(format!("expected {} values, got {}", domain.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: Domain, c: f64) -> Self {
        Self { domain, values: vec![c; domain.len()] }
    }

    pub fn zeros(domain: Domain) -> Self {
        Self::constant(domain, 0.0)
    }

    pub fn from_fn(domain: Domain, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(domain.len());
        for i in 0..domain.n_theta {
            let t = domain.theta(i);
            for j in 0..domain.n_z {
                values.push(f(t, domain.z(j)));
            }
        }
        Self { domain, values }
    }

    /// Field depending on z only, given one value per axial node.
    pub fn from_z_profile(domain: Domain, profile: &[f64]) -> Self {
        assert_eq!(profile.len(), domain.n_z);
        let mut values = Vec::with_capacity(domain.len());
        for _ in 0..domain.n_theta {
            values.extend_from_slice(profile);
        }
        Self { domain, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.domain.n_z + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { domain: self.domain, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.domain, other.domain);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { domain: self.domain, values }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Shift every θ-row by `shift` nodes (exact θ-translation on the grid).
    pub fn roll_theta(&self, shift: usize) -> Self {
        let (nt, nz) = (self.domain.n_theta, self.domain.n_z);
        let mut values = vec![0.0; self.values.len()];
        for i in 0..nt {
            let src = (i + shift) % nt;
            values[i * nz..(i + 1) * nz].copy_from_slice(&self.values[src * nz..(src + 1) * nz]);
        }
        Self { domain: self.domain, values }
    }
}

/// ∫_Ω f by the rectangle rule.
pub fn integrate(f: &GridField) -> f64 {
    f.values.iter().sum::<f64>() * f.domain.node_weight()
}

/// Integral of the product of two fields.
pub fn integrate_product(a: &GridField, b: &GridField) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum::<f64>() * a.domain.node_weight()
}

/// Mixed partial ∂_θ^a ∂_z^b f by Fourier differentiation.
pub fn derivative(f: &GridField, order_theta: u32, order_z: u32) -> Result<GridField> {
    let total = order_theta + order_z;
    if order_theta > 2 || order_z > 2 || !(1..=2).contains(&total) {
        return Err(Error::DerivativeOrder(order_theta, order_z));
    }
    if !f.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(Spectral::new(&f.domain).derivative(f, order_theta, order_z))
}

/// Reusable FFT plans for one domain. Building one is cheap; keeping it
/// around avoids recomputing twiddles inside tight loops.
#[derive(Debug, Clone)]
pub struct Spectral {
    dom: Domain,
    plan_t: Fft,
    plan_z: Fft,
}

impl Spectral {
    pub fn new(dom: &Domain) -> Self {
        Self { dom: *dom, plan_t: Fft::new(dom.n_theta), plan_z: Fft::new(dom.n_z) }
    }

    pub fn domain(&self) -> &Domain {
        &self.dom
    }

    /// Unchecked derivative; orders are trusted.
    pub fn derivative(&self, f: &GridField, a: u32, b: u32) -> GridField {
        let mut values = f.values.clone();
        self.derivative_in_place(&mut values, a, b);
        GridField { domain: self.dom, values }
    }

    pub fn derivative_in_place(&self, values: &mut [f64], a: u32, b: u32) {
        if b > 0 {
            let sym = self.symbol_z(b);
            self.apply_z(values, &sym);
        }
        if a > 0 {
            let sym = self.symbol_t(a);
            self.apply_t(values, &sym);
        }
    }

    fn symbol(n: usize, order: u32, kappa: impl Fn(usize) -> f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                let x = kappa(k);
                match order {
                    1 if k == n / 2 => Complex64::new(0.0, 0.0),
                    1 => Complex64::new(0.0, x),
                    2 => Complex64::new(-x * x, 0.0),
                    _ => unreachable!(),
                }
            })
            .collect()
    }

    fn symbol_z(&self, order: u32) -> Vec<Complex64> {
        Self::symbol(self.dom.n_z, order, |k| self.dom.kappa_z(k))
    }

    fn symbol_t(&self, order: u32) -> Vec<Complex64> {
        Self::symbol(self.dom.n_theta, order, |k| self.dom.kappa_theta(k))
    }

    /// Symbol of the zero-mean antiderivative (Nyquist dropped).
    fn integral_symbol(n: usize, kappa: impl Fn(usize) -> f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| if k == 0 || k == n / 2 { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, -1.0 / kappa(k)) })
            .collect()
    }

    /// Periodic antiderivative along z of the zero-mean part of each θ-row,
    /// shifted so it vanishes at the first axial node.
    pub fn antiderivative_z(&self, f: &GridField) -> GridField {
        let sym = Self::integral_symbol(self.dom.n_z, |k| self.dom.kappa_z(k));
        let mut values = f.values.clone();
        self.apply_z(&mut values, &sym);
        let nz = self.dom.n_z;
        for row in values.chunks_mut(nz) {
            let c = row[0];
            row.iter_mut().for_each(|v| *v -= c);
        }
        GridField { domain: self.dom, values }
    }

    /// Periodic antiderivative along θ of the zero-mean part of each column,
    /// vanishing at θ = 0.
    pub fn antiderivative_theta(&self, f: &GridField) -> GridField {
        let sym = Self::integral_symbol(self.dom.n_theta, |k| self.dom.kappa_theta(k));
        let mut values = f.values.clone();
        self.apply_t(&mut values, &sym);
        let nz = self.dom.n_z;
        let first: Vec<f64> = values[..nz].to_vec();
        for row in values.chunks_mut(nz) {
            row.iter_mut().zip(&first).for_each(|(v, c)| *v -= c);
        }
        GridField { domain: self.dom, values }
    }

    /// Multiply every θ-row by a real-operator symbol along z. Rows are
    /// packed in pairs as real and imaginary parts of one complex transform.
    fn apply_z(&self, values: &mut [f64], sym: &[Complex64]) {
        let nz = self.dom.n_z;
        let nt = self.dom.n_theta;
        let mut buf = vec![Complex64::new(0.0, 0.0); nz];
        let mut i = 0;
        while i < nt {
            let pair = i + 1 < nt;
            for j in 0..nz {
                let im = if pair { values[(i + 1) * nz + j] } else { 0.0 };
                buf[j] = Complex64::new(values[i * nz + j], im);
            }
            self.plan_z.forward(&mut buf);
            for (b, s) in buf.iter_mut().zip(sym) {
                *b *= s;
            }
            self.plan_z.inverse(&mut buf);
            for j in 0..nz {
                values[i * nz + j] = buf[j].re;
                if pair {
                    values[(i + 1) * nz + j] = buf[j].im;
                }
            }
            i += 2;
        }
    }

    fn apply_t(&self, values: &mut [f64], sym: &[Complex64]) {
        let nz = self.dom.n_z;
        let nt = self.dom.n_theta;
        let mut buf = vec![Complex64::new(0.0, 0.0); nt];
        let mut j = 0;
        while j < nz {
            let pair = j + 1 < nz;
            for i in 0..nt {
                let im = if pair { values[i * nz + j + 1] } else { 0.0 };
                buf[i] = Complex64::new(values[i * nz + j], im);
            }
            self.plan_t.forward(&mut buf);
            for (b, s) in buf.iter_mut().zip(sym) {
                *b *= s;
            }
            self.plan_t.inverse(&mut buf);
            for i in 0..nt {
                values[i * nz + j] = buf[i].re;
                if pair {
                    values[i * nz + j + 1] = buf[i].im;
                }
            }
            j += 2;
        }
    }

    /// Full 2D spectrum, normalized so that coefficient (0,0) is the mean.
    pub fn spectrum(&self, f: &GridField) -> Vec<Complex64> {
        let (nt, nz) = (self.dom.n_theta, self.dom.n_z);
        let mut data: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in data.chunks_mut(nz) {
            self.plan_z.forward(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); nt];
        for j in 0..nz {
            for i in 0..nt {
                col[i] = data[i * nz + j];
            }
            self.plan_t.forward(&mut col);
            for i in 0..nt {
                data[i * nz + j] = col[i];
            }
        }
        let s = 1.0 / (nt * nz) as f64;
        data.iter_mut().for_each(|c| *c *= s);
        data
    }
}

/// Fraction of the fluctuation power carried by modes above a quarter of
/// the resolvable band in either direction. Large values mean the grid is
/// too coarse for the field.
pub fn spectral_tail(f: &GridField) -> f64 {
    let dom = f.domain;
    let spec = Spectral::new(&dom).spectrum(f);
    let (nt, nz) = (dom.n_theta, dom.n_z);
    let (mut total, mut tail) = (0.0, 0.0);
    for i in 0..nt {
        let ki = signed_mode(i, nt).abs();
        for j in 0..nz {
            if i == 0 && j == 0 {
                continue;
            }
            let kj = signed_mode(j, nz).abs();
            let p = spec[i * nz + j].norm_sqr();
            total += p;
            if ki > (nt / 4) as f64 || kj > (nz / 4) as f64 {
                tail += p;
            }
        }
    }
    let mean = spec[0].norm_sqr();
    // Pure roundoff on a flat field says nothing about resolution.
    if total <= 1e-24 * (1.0 + mean) {
        0.0
    } else {
        tail / total
    }
}

/// Random real field whose Fourier modes satisfy |a| ≤ `max_theta`,
/// |b| ≤ `max_z` (in grid-period units), with standard normal cosine and
/// sine coefficients.
pub fn random_band_limited<R: rand::Rng + ?Sized>(
    dom: Domain,
    rng: &mut R,
    max_theta: usize,
    max_z: usize,
) -> GridField {
    let (nt, nz) = (dom.n_theta, dom.n_z);
    let mut values = vec![0.0; dom.len()];
    let zb = max_z as i64;
    for a in 0..=max_theta as i64 {
        // f = Σ_a cos(αi)·C_a(j) + sin(αi)·S_a(j)
        let mut ca = vec![0.0; nz];
        let mut sa = vec![0.0; nz];
        for b in (if a == 0 { 0 } else { -zb })..=zb {
            let c: f64 = rng.sample(rand_distr::StandardNormal);
            let s: f64 = rng.sample(rand_distr::StandardNormal);
            for j in 0..nz {
                let (sb, cb) = libm::sincos(2.0 * PI * (b * j as i64) as f64 / nz as f64);
                ca[j] += c * cb + s * sb;
                sa[j] += s * cb - c * sb;
            }
        }
        for i in 0..nt {
            let (si, ci) = libm::sincos(2.0 * PI * (a * i as i64) as f64 / nt as f64);
            let row = &mut values[i * nz..(i + 1) * nz];
            for j in 0..nz {
                row[j] += ci * ca[j] + si * sa[j];
            }
        }
    }
    GridField { domain: dom, values }
}

/// Norm exponents supported by [`mixed_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Exponent {
    One,
    Two,
    Four,
    Inf,
}

impl Exponent {
    pub fn from_f64(p: f64) -> Result<Self> {
        match p {
            p if p == 1.0 => Ok(Self::One),
            p if p == 2.0 => Ok(Self::Two),
            p if p == 4.0 => Ok(Self::Four),
            p if p == f64::INFINITY => Ok(Self::Inf),
            _ => Err(Error::UnsupportedExponent(format!("{p}"))),
        }
    }

    fn value(self) -> f64 {
        match self {
            Self::One => 1.0,
            Self::Two => 2.0,
            Self::Four => 4.0,
            Self::Inf => f64::INFINITY,
        }
    }
}

/// ‖f‖_{L^p_z L^q_θ}: the L^q_θ norm of each axial slice, then the L^p norm
/// of that slice function over I_z.
pub fn mixed_norm(f: &GridField, p_outer_z: Exponent, p_inner_theta: Exponent) -> f64 {
    let dom = f.domain;
    let (nt, nz) = (dom.n_theta, dom.n_z);
    let slices: Vec<f64> = (0..nz)
        .map(|j| {
            let col = (0..nt).map(|i| f.values[i * nz + j].abs());
            pnorm_sum(col, p_inner_theta.value(), dom.d_theta())
        })
        .collect();
    // the stored cell stands for z_cells copies, so average then rescale
    let dz_full = dom.z_extent / nz as f64;
    pnorm_sum(slices.into_iter(), p_outer_z.value(), dz_full)
}

/// Plain L^p norm over Ω for any real p ≥ 1.
pub fn lp_norm(f: &GridField, p: f64) -> f64 {
    pnorm_sum(f.values.iter().map(|v| v.abs()), p, f.domain.node_weight())
}

fn pnorm_sum(vals: impl Iterator<Item = f64>, p: f64, weight: f64) -> f64 {
    if p.is_infinite() {
        return vals.fold(0.0, f64::max);
    }
    let s: f64 = if p == 1.0 {
        vals.sum()
    } else if p == 2.0 {
        vals.map(|v| v * v).sum()
    } else {
        vals.map(|v| libm::pow(v, p)).sum()
    };
    let s = s * weight;
    if p == 1.0 {
        s
    } else if p == 2.0 {
        libm::sqrt(s)
    } else {
        libm::pow(s, 1.0 / p)
    }
}

/// A function of z alone, sampled at the axial nodes of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ZProfile {
    pub domain: Domain,
    pub values: Vec<f64>,
}

/// (1/|I_θ|) ∫ f dθ for every axial node.
pub fn theta_average(f: &GridField) -> ZProfile {
    let dom = f.domain;
    let (nt, nz) = (dom.n_theta, dom.n_z);
    let mut values = vec![0.0; nz];
    for row in f.values.chunks(nz) {
        values.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    values.iter_mut().for_each(|a| *a /= nt as f64);
    ZProfile { domain: dom, values }
}

/// Thickness `h`, axial confinement `lambda`, mandrel radius `rho` and
/// slope bound `m` (`f64::INFINITY` for no bound).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    pub h: f64,
    pub lambda: f64,
    pub rho: f64,
    #[cfg_attr(feature = "serde", serde(with = "slope_serde"))]
    pub m: f64,
}

impl ModelParams {
    pub fn new(h: f64, lambda: f64, rho: f64, m: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::InvalidParams(format!("h = {h} must lie in (0, 1/2]")));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidParams(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        if !(rho >= 1.0 && rho.is_finite()) {
            return Err(Error::InvalidParams(format!("rho = {rho} must be finite and at least 1")));
        }
        if !(m > 0.0) || m.is_nan() {
            return Err(Error::InvalidParams(format!("m = {m} must lie in (0, inf]")));
        }
        Ok(Self { h, lambda, rho, m })
    }

    pub fn slope_bounded(&self) -> bool {
        self.m.is_finite()
    }
}

#[cfg(feature = "serde")]
mod slope_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    // JSON has no infinity; the unbounded slope is written as the string "inf".
    pub fn serialize<S: Serializer>(m: &f64, s: S) -> Result<S::Ok, S::Error> {
        if m.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*m)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr<'a> {
        Num(f64),
        Str(&'a str),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str("inf") | Repr::Str("infinity") => Ok(f64::INFINITY),
            Repr::Str(other) => Err(serde::de::Error::custom(alloc::format!("bad slope bound {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dom(nt: usize, nz: usize) -> Domain {
        Domain::new(nt, nz).unwrap()
    }

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(Domain::new(6, 16).is_err());
        assert!(Domain::new(16, 15).is_err());
        assert!(Domain::with_cells(16, 16, 0).is_err());
    }

    #[test]
    fn sine_derivative_is_exact() {
        let d = dom(32, 16);
        let f = GridField::from_fn(d, |t, _| libm::sin(3.0 * t));
        let df = derivative(&f, 1, 0).unwrap();
        for i in 0..32 {
            for j in 0..16 {
                assert_abs_diff_eq!(df.get(i, j), 3.0 * libm::cos(3.0 * d.theta(i)), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_has_zero_derivative() {
        let f = GridField::constant(dom(16, 16), 4.2);
        assert!(derivative(&f, 0, 1).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn mixed_derivative_matches_closed_form() {
        let d = dom(64, 64);
        let tp = 2.0 * PI;
        let f = GridField::from_fn(d, |t, z| libm::cos(tp * z) * libm::sin(t));
        let df = derivative(&f, 1, 1).unwrap();
        let exact = GridField::from_fn(d, |t, z| -tp * libm::sin(tp * z) * libm::cos(t));
        let err = df.zip_map(&exact, |a, b| a - b).max_abs();
        assert!(err <= 1e-10, "err {err}");
    }

    #[test]
    fn second_derivatives_on_cells() {
        // cos(2π·3z) has period 1/3 and is stored on one of three cells
        let d = Domain::with_cells(8, 32, 3).unwrap();
        let w = 6.0 * PI;
        let f = GridField::from_fn(d, |_, z| libm::cos(w * z));
        let d2 = derivative(&f, 0, 2).unwrap();
        let exact = GridField::from_fn(d, |_, z| -w * w * libm::cos(w * z));
        assert!(d2.zip_map(&exact, |a, b| a - b).max_abs() < 1e-9);
        assert_abs_diff_eq!(integrate(&f.map(|v| v * v)), PI, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_orders() {
        let f = GridField::zeros(dom(8, 8));
        assert!(derivative(&f, 0, 0).is_err());
        assert!(derivative(&f, 3, 0).is_err());
        assert!(derivative(&f, 2, 1).is_err());
        let mut g = f.clone();
        g.values[3] = f64::NAN;
        assert_eq!(derivative(&g, 1, 0), Err(Error::NonFinite));
    }

    #[test]
    fn quadrature_examples() {
        let d = dom(16, 32);
        assert_abs_diff_eq!(integrate(&GridField::constant(d, 1.0)), 2.0 * PI, epsilon = 1e-14);
        assert!(integrate(&GridField::from_fn(d, |t, _| libm::sin(t))).abs() < 1e-14);
        let c2 = GridField::from_fn(d, |_, z| libm::cos(2.0 * PI * z).powi(2));
        assert_abs_diff_eq!(integrate(&c2), PI, epsilon = 1e-13);
    }

    #[test]
    fn norm_examples() {
        let d = dom(16, 64);
        let one = GridField::constant(d, 1.0);
        assert_abs_diff_eq!(mixed_norm(&one, Exponent::Two, Exponent::One), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(mixed_norm(&one, Exponent::Inf, Exponent::Inf), 1.0);
        let f = GridField::from_fn(d, |_, z| libm::cos(2.0 * PI * z).abs());
        assert_abs_diff_eq!(mixed_norm(&f, Exponent::Two, Exponent::One), PI * libm::sqrt(2.0), epsilon = 1e-6);
        assert!(Exponent::from_f64(3.0).is_err());
    }

    #[test]
    fn theta_average_examples() {
        let d = dom(16, 16);
        let f = GridField::from_fn(d, |t, z| libm::sin(t) + z);
        let avg = theta_average(&f);
        for j in 0..16 {
            assert_abs_diff_eq!(avg.values[j], d.z(j), epsilon = 1e-12);
        }
        let c = theta_average(&GridField::from_fn(d, |t, _| libm::cos(t).powi(2)));
        assert!(c.values.iter().all(|v| (v - 0.5).abs() < 1e-14));
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let d = dom(16, 64);
        let f = GridField::from_fn(d, |t, z| libm::sin(2.0 * PI * z) * (1.0 + libm::cos(t)));
        let g = Spectral::new(&d).antiderivative_z(&f);
        let back = derivative(&g, 0, 1).unwrap();
        assert!(back.zip_map(&f, |a, b| a - b).max_abs() < 1e-12);
        // the θ-mean sin(2πz) is not periodic-integrable and is dropped
        let h = Spectral::new(&d).antiderivative_theta(&f);
        let back = derivative(&h, 1, 0).unwrap();
        let fluct = GridField::from_fn(d, |t, z| libm::sin(2.0 * PI * z) * libm::cos(t));
        assert!(back.zip_map(&fluct, |a, b| a - b).max_abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1e-3, 0.25, 1.5, f64::INFINITY).is_ok());
        assert!(ModelParams::new(1e-3, 0.25, 0.9, 4.0).is_err());
        assert!(ModelParams::new(0.0, 0.25, 1.0, 4.0).is_err());
        assert!(ModelParams::new(1e-3, 1.0, 1.0, 4.0).is_err());
        assert!(ModelParams::new(1e-3, 0.2, 1.0, 0.0).is_err());
        let a = ModelParams::new(1e-3, 0.2, 1.0, f64::INFINITY).unwrap();
        assert!(!a.slope_bounded());
        assert!(ModelParams::new(1e-3, 0.2, 1.0, 1e300).unwrap().slope_bounded());
    }

    #[test]
    fn resolution_policy() {
        let d = dom(8, 256);
        assert!(check_resolution(&d, 2, 1, 0.25, false).is_ok());
        assert!(check_resolution(&d, 3, 1, 0.25, false).is_err());
        assert!(check_resolution(&d, 1, 1, 0.5, true).is_err());
    }
}
