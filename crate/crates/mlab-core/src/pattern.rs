//! Explicit wrinkling patterns and the parameter choices that make them
//! optimal in each scaling regime.
//!
//! Axisymmetric patterns put `n` bumps of total axial extent `δ` on the
//! mandrel and pull the axial displacement in so that the axial strain
//! vanishes (linear model) or the axial metric is exactly one (nonlinear
//! model). Tilted patterns run the same bump train along θ/2π + kz, which
//! wraps `k` times around the cylinder, and absorb the hoop strain
//! fluctuation into the angular displacement.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::energy::{Configuration, Model};
use crate::error::{Error, Result};
use crate::grid::{check_resolution, Domain, GridField, ModelParams, Spectral};
use crate::profile::{ProfileFunction, ProfileVariant, Rescaled, SProfile};

/// Default profile half-width.
pub const DEFAULT_HALF_WIDTH: f64 = 0.45;

/// Which energy a pattern or prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum Family {
    Vkd,
    Nl,
    Fs,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Vkd => "VKD",
            Family::Nl => "NL",
            Family::Fs => "FS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Regime {
    Unbuckled,
    Many,
    One,
    Flat,
    FsManyTilted,
    FsFewTiltedLong,
    FsFewTilted,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Unbuckled => "UNBUCKLED",
            Regime::Many => "MANY",
            Regime::One => "ONE",
            Regime::Flat => "FLAT",
            Regime::FsManyTilted => "FS_MANY_TILTED",
            Regime::FsFewTiltedLong => "FS_FEW_TILTED_LONG",
            Regime::FsFewTilted => "FS_FEW_TILTED",
        }
    }

    pub fn is_tilted(self) -> bool {
        matches!(self, Regime::FsManyTilted | Regime::FsFewTiltedLong | Regime::FsFewTilted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PatternParams {
    /// Number of wrinkles.
    pub n: u32,
    /// Number of wraps around the cylinder; 1 for axisymmetric patterns.
    pub k: u32,
    /// Fraction of the axial period covered by wrinkles.
    pub delta: f64,
    pub regime: Regime,
}

impl PatternParams {
    pub fn new(n: u32, k: u32, delta: f64, regime: Regime) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidParams("n and k must be positive".into()));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParams(format!("delta = {delta} must lie in (0, 1]")));
        }
        Ok(Self { n, k, delta, regime })
    }

    pub fn unbuckled() -> Self {
        Self { n: 1, k: 1, delta: 1.0, regime: Regime::Unbuckled }
    }
}

/// Slope bound met by the axisymmetric linear pattern.
pub fn m1(lambda: f64, delta: f64) -> f64 {
    2.0 * libm::sqrt(2.0 * lambda / delta).max(2.0 * lambda / delta)
}

/// Slope bound met by the tilted pattern.
pub fn m2(delta: f64, n: u32, k: u32, lambda: f64) -> f64 {
    let a = libm::sqrt(2.0 * lambda / delta);
    let b = 2.0 * lambda / delta;
    let c = 2.0 * lambda / (PI * k as f64 * delta) + 2.0 * PI * libm::sqrt(2.0 * lambda * delta) / n as f64;
    2.0 * a.max(b).max(c)
}

/// Normalized profiles shared by all constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternBuilder {
    pub linear: ProfileFunction,
    pub nonlinear: ProfileFunction,
    pub s_map: SProfile,
}

impl PatternBuilder {
    pub fn new(half_width: f64) -> Result<Self> {
        let linear = ProfileFunction::new(ProfileVariant::Vkd, half_width)?;
        let nonlinear = ProfileFunction::new(ProfileVariant::Nl, half_width)?;
        let s_map = SProfile::new(nonlinear.clone())?;
        Ok(Self { linear, nonlinear, s_map })
    }

    fn linear_train(&self, pp: &PatternParams) -> Result<Rescaled> {
        Rescaled::new(self.linear.clone(), pp.delta, pp.n)
    }

    fn nl_train(&self, mp: &ModelParams, pp: &PatternParams) -> Result<(Rescaled, f64)> {
        if pp.delta < 2.0 * mp.lambda * (1.0 - 1e-12) {
            return Err(Error::InvalidParams(format!(
                "delta = {} is below 2λ = {}; the axial length cannot be recovered",
                pp.delta,
                2.0 * mp.lambda
            )));
        }
        let q = self.s_map.inverse((mp.lambda / pp.delta).min(0.5))?;
        Ok((Rescaled::new(self.nonlinear.clone(), pp.delta, pp.n)?, q))
    }

    /// Axisymmetric linear pattern φ = (w + ϱ − 1, 0, −λz + u).
    pub fn build_vkd(&self, mp: &ModelParams, pp: &PatternParams, dom: Domain) -> Result<Configuration> {
        if pp.regime == Regime::Unbuckled {
            return Ok(Configuration::unbuckled_vkd(dom, *mp));
        }
        require_single_cell(&dom)?;
        check_resolution(&dom, pp.n, 1, pp.delta, false)?;
        let train = self.linear_train(pp)?;
        let amp = libm::sqrt(2.0 * mp.lambda);
        let w: Vec<f64> = (0..dom.n_z).map(|j| amp * train.eval(dom.z(j)).0).collect();
        let sp = Spectral::new(&dom);
        let w_field = GridField::from_z_profile(dom, &w);
        let wz = sp.derivative(&w_field, 0, 1);
        let integrand = wz.map(|v| mp.lambda - 0.5 * v * v);
        let p = sp.antiderivative_z(&integrand);
        let rho = w_field.map(|v| v + mp.rho - 1.0);
        Configuration::new(Model::Vkd, rho, GridField::zeros(dom), p, *mp)
    }

    /// Axisymmetric nonlinear pattern Φ = (w + ϱ, θ, (1−λ)z + u).
    pub fn build_nl(&self, mp: &ModelParams, pp: &PatternParams, dom: Domain) -> Result<Configuration> {
        if pp.regime == Regime::Unbuckled {
            return Ok(Configuration::uniform_nl(dom, *mp));
        }
        require_single_cell(&dom)?;
        check_resolution(&dom, pp.n, 1, pp.delta, false)?;
        let (train, q) = self.nl_train(mp, pp)?;
        let w: Vec<f64> = (0..dom.n_z).map(|j| q * train.eval(dom.z(j)).0).collect();
        let sp = Spectral::new(&dom);
        let w_field = GridField::from_z_profile(dom, &w);
        let wz = sp.derivative(&w_field, 0, 1);
        let integrand = wz.map(|v| libm::sqrt((1.0 - v * v).max(0.0)) - (1.0 - mp.lambda));
        let r = sp.antiderivative_z(&integrand);
        let rho = w_field.map(|v| v + mp.rho);
        Configuration::new(Model::Nl, rho, GridField::zeros(dom), r, *mp)
    }

    /// Tilted pattern with bumps along θ/2π + kz, offset onto the mandrel.
    /// The grid may store one of `z_cells` axial cells when `z_cells`
    /// divides k.
    pub fn build_fs(&self, mp: &ModelParams, pp: &PatternParams, dom: Domain) -> Result<Configuration> {
        if pp.regime == Regime::Unbuckled {
            return Ok(Configuration::unbuckled_vkd(dom, *mp));
        }
        if pp.k as usize % dom.z_cells != 0 {
            return Err(Error::InvalidGrid(format!(
                "z_cells = {} does not divide the wrap count k = {}",
                dom.z_cells, pp.k
            )));
        }
        check_resolution(&dom, pp.n, pp.k, pp.delta, true)?;
        let train = self.linear_train(pp)?;
        let k = pp.k as f64;
        let amp = libm::sqrt(2.0 * mp.lambda) / k;
        let w = GridField::from_fn(dom, |t, z| amp * train.eval(t / (2.0 * PI) + k * z).0);
        let sp = Spectral::new(&dom);
        let wz = sp.derivative(&w, 0, 1);
        let wt = sp.derivative(&w, 1, 0);
        let uz = sp.antiderivative_z(&wz.map(|v| mp.lambda - 0.5 * v * v));
        let hoop = wt.zip_map(&w, |a, b| 0.5 * a * a + b);
        let ut = sp.antiderivative_theta(&hoop).scale(-1.0);
        let rho = w.map(|v| v + mp.rho - 1.0);
        Configuration::new(Model::Vkd, rho, ut, uz, *mp)
    }

    pub fn build(&self, family: Family, mp: &ModelParams, pp: &PatternParams, dom: Domain) -> Result<Configuration> {
        match family {
            Family::Vkd => self.build_vkd(mp, pp, dom),
            Family::Nl => self.build_nl(mp, pp, dom),
            Family::Fs => self.build_fs(mp, pp, dom),
        }
    }

    /// Excess energy of a constructed pattern from one-dimensional
    /// integrals of the profile. Equals the grid evaluation of the built
    /// configuration on any resolving grid, at a tiny fraction of the cost.
    pub fn reduced_excess(&self, family: Family, mp: &ModelParams, pp: &PatternParams) -> Result<f64> {
        let (h2, lambda, rho) = (mp.h * mp.h, mp.lambda, mp.rho);
        let two_pi = 2.0 * PI;
        if pp.regime == Regime::Unbuckled {
            return Ok(two_pi * lambda * lambda);
        }
        match family {
            Family::Vkd => {
                let train = self.linear_train(pp)?;
                let a = libm::sqrt(2.0 * lambda);
                let (r1, amp) = (rho - 1.0, a);
                let e = train.integrate(|f, _, f2| {
                    let w = amp * f;
                    2.0 * r1 * w + w * w + h2 * amp * amp * f2 * f2
                });
                Ok(two_pi * e)
            }
            Family::Fs => {
                let train = self.linear_train(pp)?;
                let k = pp.k as f64;
                let mean_f = train.integrate(|f, _, _| f);
                let slope2 = train.integrate(|_, f1, _| f1 * f1);
                let curv2 = train.integrate(|_, _, f2| f2 * f2);
                let amp = libm::sqrt(2.0 * lambda) / k;
                let c = lambda / (4.0 * PI * PI * k * k) * slope2 + amp * mean_f;
                let hoop = c + rho - 1.0;
                let kk = k * k + 1.0 / (4.0 * PI * PI);
                let bending = h2 * amp * amp * kk * kk * curv2;
                Ok(two_pi * (hoop * hoop + bending) - two_pi * (rho - 1.0) * (rho - 1.0))
            }
            Family::Nl => {
                let (train, q) = self.nl_train(mp, pp)?;
                let e = train.integrate(|f, f1, f2| {
                    let (w, w1, w2) = (q * f, q * f1, q * f2);
                    let r = rho + w;
                    let hoop = r * r - 1.0;
                    let u2 = -w1 * w2 / libm::sqrt(1.0 - w1 * w1);
                    hoop * hoop + h2 * (r * r + w2 * w2 + 2.0 * w1 * w1 + u2 * u2)
                });
                let r2 = rho * rho;
                Ok(two_pi * e - two_pi * ((r2 - 1.0) * (r2 - 1.0) + r2 * h2))
            }
        }
    }

    /// Smallest even grid sizes that put `samples` nodes on each wrinkle.
    pub fn resolving_domain(&self, family: Family, pp: &PatternParams, samples: usize) -> Result<Domain> {
        let pow2 = |x: f64| (libm::ceil(x).max(8.0) as usize).next_power_of_two();
        match (family, pp.regime) {
            (_, Regime::Unbuckled) => Domain::new(8, 8),
            (Family::Fs, _) => {
                let per_cell = pow2(samples as f64 * pp.n as f64 / pp.delta);
                Domain::with_cells(per_cell, per_cell, pp.k as usize)
            }
            _ => Domain::new(8, pow2(samples as f64 * pp.n as f64 / pp.delta)),
        }
    }
}

impl Default for PatternBuilder {
    fn default() -> Self {
        Self::new(DEFAULT_HALF_WIDTH).expect("default profiles are feasible")
    }
}

fn require_single_cell(dom: &Domain) -> Result<()> {
    if dom.z_cells != 1 {
        return Err(Error::InvalidGrid("axisymmetric patterns need the full axial period".into()));
    }
    Ok(())
}

/// Per-θ-slice axial arc length ∫√(1 − (∂_zΦ_ρ)²) dz of an NL configuration.
pub fn axial_arc_lengths(c: &Configuration) -> Vec<f64> {
    let dom = c.domain();
    let wz = Spectral::new(&dom).derivative(&c.comp_rho, 0, 1);
    wz.values
        .chunks(dom.n_z)
        .map(|row| row.iter().map(|v| libm::sqrt((1.0 - v * v).max(0.0))).sum::<f64>() * dom.d_z() * dom.z_cells as f64)
        .collect()
}

/// One candidate branch with its prefactor-free value.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Branch {
    regime: Regime,
    value: f64,
}

fn pick(branches: &[Branch], lambda: f64) -> Regime {
    let best = branches.iter().fold(None::<Branch>, |acc, b| match acc {
        Some(a) if a.value >= b.value => Some(a),
        _ => Some(*b),
    });
    match best {
        Some(b) if b.value < lambda * lambda => b.regime,
        _ => Regime::Unbuckled,
    }
}

/// (ϱ²−1) ∨ h², the effective mandrel excess of the nonlinear model.
pub fn nl_mandrel_excess(mp: &ModelParams) -> f64 {
    (mp.rho * mp.rho - 1.0).max(mp.h * mp.h)
}

fn smallest_in(lo: f64, hi: f64, what: &str) -> Result<u32> {
    let n = libm::ceil(lo - 1e-9 * lo).max(1.0);
    if n > hi * (1.0 + 1e-12) {
        return Err(Error::NoRegime(format!("no integer {what} in [{lo}, {hi}]")));
    }
    Ok(n as u32)
}

fn check_delta(delta: f64, regime: Regime, fails: &mut Vec<String>) -> Option<f64> {
    if delta > 1.0 + 1e-12 {
        fails.push(format!("{}: delta = {delta:.4} > 1 (thickness too large for this branch)", regime.name()));
        None
    } else {
        Some(delta.min(1.0))
    }
}

/// The regime and (n, k, δ) of the construction that realizes the
/// predicted scaling for these parameters.
pub fn select_regime_params(family: Family, mp: &ModelParams) -> Result<PatternParams> {
    let (h, lambda, m) = (mp.h, mp.lambda, mp.m);
    let mut fails = Vec::new();
    let out = match family {
        Family::Vkd => {
            let r1 = mp.rho - 1.0;
            let mut branches = alloc::vec![
                Branch { regime: Regime::Flat, value: lambda * h },
                Branch {
                    regime: Regime::One,
                    value: libm::pow(h, 6.0 / 7.0) * libm::pow(lambda, 5.0 / 7.0) * libm::pow(r1, 4.0 / 7.0)
                },
            ];
            if m.is_finite() {
                branches.push(Branch {
                    regime: Regime::Many,
                    value: libm::pow(m, -1.0 / 3.0) * libm::pow(r1, 2.0 / 3.0) * lambda * libm::pow(h, 2.0 / 3.0),
                });
            }
            match pick(&branches, lambda) {
                Regime::Unbuckled => Some(PatternParams::unbuckled()),
                Regime::Many => {
                    let lo = libm::cbrt(r1) * lambda * libm::pow(h, -2.0 / 3.0) * libm::pow(m, -7.0 / 6.0);
                    let n = smallest_in(lo, 2.0 * lo, "n")?;
                    check_delta(4.0 * lambda / m, Regime::Many, &mut fails).map(|d| PatternParams {
                        n,
                        k: 1,
                        delta: d,
                        regime: Regime::Many,
                    })
                }
                Regime::One => {
                    let d = 4.0 * libm::pow(lambda, 1.0 / 7.0) * libm::pow(r1, -2.0 / 7.0) * libm::pow(h, 4.0 / 7.0);
                    check_delta(d, Regime::One, &mut fails).map(|d| PatternParams {
                        n: 1,
                        k: 1,
                        delta: d,
                        regime: Regime::One,
                    })
                }
                _ => {
                    if lambda <= m * libm::sqrt(h) {
                        check_delta(4.0 * libm::sqrt(h), Regime::Flat, &mut fails).map(|d| PatternParams {
                            n: 1,
                            k: 1,
                            delta: d,
                            regime: Regime::Flat,
                        })
                    } else {
                        let lo = lambda / (libm::sqrt(h) * m);
                        let n = smallest_in(lo, 2.0 * lo, "n")?;
                        check_delta(4.0 * lambda / m, Regime::Flat, &mut fails).map(|d| PatternParams {
                            n,
                            k: 1,
                            delta: d,
                            regime: Regime::Flat,
                        })
                    }
                }
            }
        }
        Family::Nl => {
            if m < 1.0 {
                return Err(Error::NoRegime(format!("slope bound m = {m} < 1 excludes every axisymmetric pattern")));
            }
            let x = nl_mandrel_excess(mp);
            let branches = [
                Branch { regime: Regime::Flat, value: lambda * h },
                Branch {
                    regime: Regime::One,
                    value: libm::pow(h, 6.0 / 7.0) * libm::pow(lambda, 5.0 / 7.0) * libm::pow(x, 4.0 / 7.0),
                },
                Branch { regime: Regime::Many, value: libm::pow(x, 2.0 / 3.0) * lambda * libm::pow(h, 2.0 / 3.0) },
            ];
            let floor = 2.0 * lambda;
            match pick(&branches, lambda) {
                Regime::Unbuckled => Some(PatternParams::unbuckled()),
                Regime::Many => {
                    let lo = libm::cbrt(x) * lambda * libm::pow(h, -2.0 / 3.0);
                    let n = smallest_in(lo, 2.0 * lo, "n")?;
                    check_delta(floor, Regime::Many, &mut fails).map(|d| PatternParams {
                        n,
                        k: 1,
                        delta: d,
                        regime: Regime::Many,
                    })
                }
                Regime::One => {
                    let d = 2.0 * libm::pow(lambda, 1.0 / 7.0) * libm::pow(x, -2.0 / 7.0) * libm::pow(h, 4.0 / 7.0);
                    check_delta(d.max(floor), Regime::One, &mut fails).map(|d| PatternParams {
                        n: 1,
                        k: 1,
                        delta: d,
                        regime: Regime::One,
                    })
                }
                _ => {
                    if lambda <= libm::sqrt(h) {
                        check_delta((2.0 * libm::sqrt(h)).max(floor), Regime::Flat, &mut fails).map(|d| PatternParams {
                            n: 1,
                            k: 1,
                            delta: d,
                            regime: Regime::Flat,
                        })
                    } else {
                        let lo = lambda / libm::sqrt(h);
                        let n = smallest_in(lo, 2.0 * lo, "n")?;
                        check_delta(floor, Regime::Flat, &mut fails).map(|d| PatternParams {
                            n,
                            k: 1,
                            delta: d,
                            regime: Regime::Flat,
                        })
                    }
                }
            }
        }
        Family::Fs => {
            let mut branches = alloc::vec![
                Branch { regime: Regime::FsFewTilted, value: libm::pow(h, 6.0 / 5.0) * lambda },
                Branch { regime: Regime::FsFewTiltedLong, value: libm::pow(h * lambda, 12.0 / 11.0) },
            ];
            if m.is_finite() {
                branches
                    .push(Branch { regime: Regime::FsManyTilted, value: h * libm::pow(lambda, 1.5) / libm::sqrt(m) });
            }
            match pick(&branches, lambda) {
                Regime::Unbuckled => Some(PatternParams::unbuckled()),
                Regime::FsManyTilted => {
                    let nlo = 7.0 * libm::pow(lambda, 9.0 / 8.0) * libm::pow(h, -0.25) * libm::pow(m, -11.0 / 8.0);
                    let klo = 7.0 * libm::pow(h, -0.25) * libm::pow(lambda, 0.125) * libm::pow(m, 0.125);
                    let n = smallest_in(nlo, nlo * 8.0 / 7.0, "n")?;
                    let k = smallest_in(klo, klo * 8.0 / 7.0, "k")?;
                    check_delta(4.0 * lambda / m, Regime::FsManyTilted, &mut fails).map(|d| PatternParams {
                        n,
                        k,
                        delta: d,
                        regime: Regime::FsManyTilted,
                    })
                }
                Regime::FsFewTiltedLong => {
                    let klo = 12.0 * libm::pow(h, -3.0 / 11.0) * libm::pow(lambda, 5.0 / 22.0);
                    let k = smallest_in(klo, klo * 13.0 / 12.0, "k")?;
                    check_delta(4.0 * libm::pow(h * lambda, 2.0 / 11.0), Regime::FsFewTiltedLong, &mut fails)
                        .map(|d| PatternParams { n: 12, k, delta: d, regime: Regime::FsFewTiltedLong })
                }
                _ => check_delta(4.0 * libm::pow(h, 0.4), Regime::FsFewTilted, &mut fails).map(|d| PatternParams {
                    n: 2,
                    k: 2,
                    delta: d,
                    regime: Regime::FsFewTilted,
                }),
            }
        }
    };
    out.ok_or_else(|| Error::NoRegime(fails.join("; ")))
}

/// Every branch construction whose volume fraction is admissible, used to
/// find the cheapest constructed pattern regardless of which hypothesis
/// holds.
pub fn candidate_params(family: Family, mp: &ModelParams) -> Vec<PatternParams> {
    let (h, lambda, m) = (mp.h, mp.lambda, mp.m);
    let mut out = alloc::vec![PatternParams::unbuckled()];
    let mut push = |n: f64, k: f64, delta: f64, regime: Regime| {
        let n = libm::ceil(n).max(1.0) as u32;
        let k = libm::ceil(k).max(1.0) as u32;
        if delta > 0.0 && delta <= 1.0 {
            out.push(PatternParams { n, k, delta, regime });
        }
    };
    match family {
        Family::Vkd => {
            let r1 = mp.rho - 1.0;
            if m.is_finite() && r1 > 0.0 {
                push(
                    libm::cbrt(r1) * lambda * libm::pow(h, -2.0 / 3.0) * libm::pow(m, -7.0 / 6.0),
                    1.0,
                    4.0 * lambda / m,
                    Regime::Many,
                );
            }
            if r1 > 0.0 {
                push(
                    1.0,
                    1.0,
                    4.0 * libm::pow(lambda, 1.0 / 7.0) * libm::pow(r1, -2.0 / 7.0) * libm::pow(h, 4.0 / 7.0),
                    Regime::One,
                );
            }
            if lambda <= m * libm::sqrt(h) {
                push(1.0, 1.0, 4.0 * libm::sqrt(h), Regime::Flat);
            } else {
                push(lambda / (libm::sqrt(h) * m), 1.0, 4.0 * lambda / m, Regime::Flat);
            }
        }
        Family::Nl => {
            let x = nl_mandrel_excess(mp);
            let floor = 2.0 * lambda;
            push(libm::cbrt(x) * lambda * libm::pow(h, -2.0 / 3.0), 1.0, floor, Regime::Many);
            push(
                1.0,
                1.0,
                (2.0 * libm::pow(lambda, 1.0 / 7.0) * libm::pow(x, -2.0 / 7.0) * libm::pow(h, 4.0 / 7.0)).max(floor),
                Regime::One,
            );
            if lambda <= libm::sqrt(h) {
                push(1.0, 1.0, (2.0 * libm::sqrt(h)).max(floor), Regime::Flat);
            } else {
                push(lambda / libm::sqrt(h), 1.0, floor, Regime::Flat);
            }
        }
        Family::Fs => {
            if m.is_finite() {
                push(
                    7.0 * libm::pow(lambda, 9.0 / 8.0) * libm::pow(h, -0.25) * libm::pow(m, -11.0 / 8.0),
                    7.0 * libm::pow(h, -0.25) * libm::pow(lambda, 0.125) * libm::pow(m, 0.125),
                    4.0 * lambda / m,
                    Regime::FsManyTilted,
                );
            }
            push(
                12.0,
                12.0 * libm::pow(h, -3.0 / 11.0) * libm::pow(lambda, 5.0 / 22.0),
                4.0 * libm::pow(h * lambda, 2.0 / 11.0),
                Regime::FsFewTiltedLong,
            );
            push(2.0, 2.0, 4.0 * libm::pow(h, 0.4), Regime::FsFewTilted);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{fs_energy, nl_metric, vkd_energy, vkd_strain};
    use crate::grid::theta_average;
    use approx::assert_relative_eq;

    fn mp(h: f64, lambda: f64, rho: f64, m: f64) -> ModelParams {
        ModelParams::new(h, lambda, rho, m).unwrap()
    }

    #[test]
    fn slope_bounds_match_pattern_parameters() {
        // δ = 4λ/m gives m₁ = m for m ≥ 2
        for m in [2.0, 4.0, 10.0] {
            assert_relative_eq!(m1(0.25, 4.0 * 0.25 / m), m, max_relative = 1e-14);
        }
        assert!(m2(0.5, 12, 40, 0.25) >= m1(0.25, 0.5));
    }

    #[test]
    fn vkd_one_wrinkle_selection() {
        let p = select_regime_params(Family::Vkd, &mp(1e-4, 0.25, 2.0, f64::INFINITY)).unwrap();
        assert_eq!(p.regime, Regime::One);
        assert_eq!(p.n, 1);
        let want = 4.0 * 0.25f64.powf(1.0 / 7.0) * 1e-4f64.powf(4.0 / 7.0);
        assert_relative_eq!(p.delta, want, max_relative = 1e-12);
        assert_relative_eq!(p.delta, 0.016994, max_relative = 1e-4);
    }

    #[test]
    fn vkd_flat_selection_with_slope_bound() {
        let p = select_regime_params(Family::Vkd, &mp(1e-4, 0.25, 1.0, 4.0)).unwrap();
        assert_eq!(p.regime, Regime::Flat);
        assert_eq!(p.n, 7);
        assert_relative_eq!(p.delta, 0.25, max_relative = 1e-14);
    }

    #[test]
    fn fs_long_tilted_selection() {
        let p = select_regime_params(Family::Fs, &mp(1e-3, 0.25, 1.0, f64::INFINITY)).unwrap();
        assert_eq!(p.regime, Regime::FsFewTiltedLong);
        assert_eq!(p.n, 12);
        let klo = 12.0 * 1e-3f64.powf(-3.0 / 11.0) * 0.25f64.powf(5.0 / 22.0);
        assert!(p.k as f64 >= klo && p.k as f64 <= klo * 13.0 / 12.0);
    }

    #[test]
    fn thick_sheet_is_unbuckled() {
        for fam in [Family::Vkd, Family::Nl, Family::Fs] {
            let p = select_regime_params(fam, &mp(0.2, 0.1, 1.0, f64::INFINITY)).unwrap();
            assert_eq!(p.regime, Regime::Unbuckled, "{fam:?}");
        }
    }

    #[test]
    fn vkd_pattern_identities_and_reduced_energy() {
        let b = PatternBuilder::default();
        let params = mp(1e-3, 0.25, 1.5, f64::INFINITY);
        let pp = PatternParams::new(1, 1, 0.25, Regime::One).unwrap();
        let dom = Domain::new(8, 4096).unwrap();
        let c = b.build_vkd(&params, &pp, dom).unwrap();
        let e = vkd_strain(&c).unwrap();
        assert!(e.eps_zz.max_abs() < 1e-8, "eps_zz {}", e.eps_zz.max_abs());
        assert!(e.eps_tz.max_abs() < 1e-8);
        let r = vkd_energy(&c).unwrap();
        assert!(r.admissible, "{:?}", r.violations);
        assert!(r.slope_linf <= m1(0.25, 0.25) + 1e-9);
        let red = b.reduced_excess(Family::Vkd, &params, &pp).unwrap();
        assert!((r.excess - red).abs() < 1e-8 * red.max(1.0), "{} vs {red}", r.excess);
    }

    #[test]
    fn nl_pattern_identities() {
        let b = PatternBuilder::default();
        let params = mp(1e-2, 0.25, 1.2, 1.0);
        let pp = PatternParams::new(2, 1, 0.5, Regime::Many).unwrap();
        let dom = Domain::new(8, 4096).unwrap();
        let c = b.build_nl(&params, &pp, dom).unwrap();
        let g = nl_metric(&c).unwrap();
        assert!(g.g_zz.values.iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!(g.g_tz.max_abs() < 1e-8);
        for len in axial_arc_lengths(&c) {
            assert!((len - 0.75).abs() < 1e-9, "{len}");
        }
        let r = crate::energy::nl_energy(&c).unwrap();
        assert!(r.admissible, "{:?}", r.violations);
        assert!(r.slope_linf <= 1.0 + 1e-9);
        let red = b.reduced_excess(Family::Nl, &params, &pp).unwrap();
        assert!((r.excess - red).abs() < 1e-8 * red.abs().max(1.0), "{} vs {red}", r.excess);
        let bad = PatternParams::new(2, 1, 0.4, Regime::Many).unwrap();
        assert!(b.build_nl(&params, &bad, dom).is_err());
    }

    #[test]
    fn fs_pattern_identities() {
        let b = PatternBuilder::default();
        let params = mp(1e-3, 0.25, 1.0, f64::INFINITY);
        let pp = PatternParams::new(2, 2, 1.0, Regime::FsFewTilted).unwrap();
        let dom = Domain::with_cells(1024, 1024, 2).unwrap();
        let c = b.build_fs(&params, &pp, dom).unwrap();
        let e = vkd_strain(&c).unwrap();
        assert!(e.eps_zz.max_abs() < 1e-8);
        let avg = theta_average(&e.eps_tt);
        let dev =
            e.eps_tt.values.iter().enumerate().map(|(i, v)| (v - avg.values[i % dom.n_z]).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-8, "hoop deviation {dev}");
        let r = fs_energy(&c).unwrap();
        assert!(r.admissible, "{:?}", r.violations);
        assert!(r.slope_linf <= m2(1.0, 2, 2, 0.25));
        let red = b.reduced_excess(Family::Fs, &params, &pp).unwrap();
        assert!((r.excess - red).abs() < 1e-8 * red.max(1e-3), "{} vs {red}", r.excess);
    }

    #[test]
    fn fs_axial_shear_closed_form() {
        let b = PatternBuilder::default();
        let params = mp(1e-3, 0.25, 1.0, f64::INFINITY);
        let pp = PatternParams::new(2, 2, 1.0, Regime::FsFewTilted).unwrap();
        let dom = Domain::with_cells(1024, 1024, 2).unwrap();
        let c = b.build_fs(&params, &pp, dom).unwrap();
        let sp = Spectral::new(&dom);
        let dtz = sp.derivative(&c.comp_z, 1, 0);
        let train = Rescaled::new(b.linear.clone(), 1.0, 2).unwrap();
        let k = 2.0;
        let mut worst: f64 = 0.0;
        for i in 0..dom.n_theta {
            for j in 0..dom.n_z {
                let (t, z) = (dom.theta(i), dom.z(j));
                let f1 = |s: f64| train.eval(s).1;
                let want =
                    0.25 / (2.0 * PI * k) * (f1(t / (2.0 * PI) - k / 2.0).powi(2) - f1(t / (2.0 * PI) + k * z).powi(2));
                worst = worst.max((dtz.get(i, j) - want).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn wrong_cell_count_is_rejected() {
        let b = PatternBuilder::default();
        let params = mp(1e-3, 0.25, 1.0, f64::INFINITY);
        let pp = PatternParams::new(2, 3, 1.0, Regime::FsFewTilted).unwrap();
        let dom = Domain::with_cells(128, 128, 2).unwrap();
        assert!(matches!(b.build_fs(&params, &pp, dom), Err(Error::InvalidGrid(_))));
        let coarse = Domain::new(8, 16).unwrap();
        let pp = PatternParams::new(3, 1, 0.5, Regime::Many).unwrap();
        assert!(matches!(b.build_vkd(&params, &pp, coarse), Err(Error::UnderResolved { .. })));
    }
}
