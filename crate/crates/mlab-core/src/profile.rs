//! Single-bump profiles and their rescalings.
//!
//! Two shapes are provided. The linear-model profile is a scaled
//! Friedrichs mollifier with unit Dirichlet energy. The nonlinear-model
//! profile must satisfy ∫√(1−f′²) = ½ with ‖f′‖∞ < 1, which no mollifier
//! bump can; it is a smoothed tent whose slope is a C∞ square wave built
//! from the standard smooth step.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::quad;

/// Width of each smooth transition of the tent slope.
pub const TENT_SMOOTHING: f64 = 0.1;

const PIECE_PANELS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProfileVariant {
    /// ‖f′‖₂ = 1 on one period, ‖f′‖∞ ≤ 2.
    Vkd,
    /// ∫√(1−f′²) = ½ on one period, ‖f′‖∞ < 1.
    Nl,
}

/// A non-negative, one-periodic bump supported in (−w₀, w₀) + ℤ.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileFunction {
    pub variant: ProfileVariant,
    pub half_width: f64,
    pub amplitude: f64,
    /// Transition width of the tent slope; unused by the mollifier shape.
    pub smoothing: f64,
}

fn centered(t: f64) -> f64 {
    t - libm::floor(t + 0.5)
}

/// exp(−1/x) for x > 0, else 0.
fn e(x: f64) -> f64 {
    if x > 0.0 {
        libm::exp(-1.0 / x)
    } else {
        0.0
    }
}

fn de(x: f64) -> f64 {
    if x > 0.0 {
        e(x) / (x * x)
    } else {
        0.0
    }
}

/// Smooth step: 0 for x ≤ 0, 1 for x ≥ 1, C∞ in between.
fn step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let (a, b) = (e(x), e(1.0 - x));
        a / (a + b)
    }
}

fn step_d1(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let (a, b) = (e(x), e(1.0 - x));
    let (da, db) = (de(x), de(1.0 - x));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// ∫₀ˣ step.
fn step_integral(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        0.5 + (x - 1.0)
    } else {
        quad::integrate(0.0, x, 6, step)
    }
}

impl ProfileFunction {
    /// Builds and normalizes a profile of the given half-width.
    pub fn new(variant: ProfileVariant, half_width: f64) -> Result<Self> {
        if !(half_width > 0.1 && half_width < 0.49) {
            return Err(Error::InvalidParams("profile half-width must lie in (0.1, 0.49)".to_string()));
        }
        match variant {
            ProfileVariant::Vkd => {
                let unit = Self { variant, half_width, amplitude: 1.0, smoothing: 0.0 };
                let energy = unit.integrate(|_, d1, _| d1 * d1);
                let amplitude = 1.0 / libm::sqrt(energy);
                let p = Self { amplitude, ..unit };
                let slope = p.max_slope();
                if slope > 2.0 {
                    return Err(Error::Infeasible(alloc::format!(
                        "unit Dirichlet energy needs slope {slope:.4} > 2 at half-width {half_width}"
                    )));
                }
                Ok(p)
            }
            ProfileVariant::Nl => {
                let eta = TENT_SMOOTHING;
                if 2.0 * eta >= half_width - eta {
                    return Err(Error::Infeasible("half-width too small for the tent transitions".to_string()));
                }
                let unit = Self { variant, half_width, amplitude: 1.0, smoothing: eta };
                let loss = |a: f64| unit.integrate(|_, d1, _| 1.0 - libm::sqrt(1.0 - a * a * d1 * d1));
                if loss(1.0) < 0.5 {
                    return Err(Error::Infeasible(alloc::format!(
                        "arc-length loss {:.4} < 1/2 even at unit slope; widen the half-width",
                        loss(1.0)
                    )));
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if loss(mid) < 0.5 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-16 {
                        break;
                    }
                }
                let amplitude = 0.5 * (lo + hi);
                if amplitude >= 1.0 {
                    return Err(Error::Infeasible("normalization requires slope 1".to_string()));
                }
                Ok(Self { amplitude, ..unit })
            }
        }
    }

    /// Points where the shape changes smoothness class, for quadrature.
    fn breakpoints(&self) -> Vec<f64> {
        let w = self.half_width;
        match self.variant {
            ProfileVariant::Vkd => alloc::vec![-w, -0.5 * w, 0.0, 0.5 * w, w],
            ProfileVariant::Nl => {
                let eta = self.smoothing;
                alloc::vec![-w, -w + eta, -eta, eta, w - eta, w]
            }
        }
    }

    /// (f, f′, f″) at t, one-periodic.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let t = centered(t);
        let w = self.half_width;
        if t.abs() >= w {
            return (0.0, 0.0, 0.0);
        }
        let a = self.amplitude;
        match self.variant {
            ProfileVariant::Vkd => {
                let s = t / w;
                let q = 1.0 - s * s;
                let f = libm::exp(1.0 - 1.0 / q);
                let g1 = -2.0 * s / (q * q);
                let g2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
                (a * f, a * f * g1 / w, a * f * (g1 * g1 + g2) / (w * w))
            }
            ProfileVariant::Nl => {
                let eta = self.smoothing;
                let (x1, x2, x3) = ((t + w) / eta, (t + eta) / (2.0 * eta), (t - w + eta) / eta);
                let g = step(x1) - 2.0 * step(x2) + step(x3);
                let dg = step_d1(x1) / eta - step_d1(x2) / eta + step_d1(x3) / eta;
                let big_g = eta * step_integral(x1) - 4.0 * eta * step_integral(x2) + eta * step_integral(x3);
                (a * big_g.max(0.0), a * g, a * dg)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn d1(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.eval(t).2
    }

    /// ∫_{−½}^{½} G(f, f′, f″) dt.
    pub fn integrate(&self, mut g: impl FnMut(f64, f64, f64) -> f64) -> f64 {
        let outside = g(0.0, 0.0, 0.0) * (1.0 - 2.0 * self.half_width);
        let breaks = self.breakpoints();
        outside
            + quad::integrate_pieces(&breaks, PIECE_PANELS, |t| {
                let (f, d1, d2) = self.eval(t);
                g(f, d1, d2)
            })
    }

    /// sup |f′|, located by dense sampling and golden-section refinement.
    pub fn max_slope(&self) -> f64 {
        if self.variant == ProfileVariant::Nl {
            return self.amplitude;
        }
        let w = self.half_width;
        let samples = 4000;
        let mut best = (0.0, 0.0);
        for i in 0..=samples {
            let t = -w + 2.0 * w * i as f64 / samples as f64;
            let v = self.d1(t).abs();
            if v > best.1 {
                best = (t, v);
            }
        }
        let h = 2.0 * w / samples as f64;
        let (mut lo, mut hi) = (best.0 - h, best.0 + h);
        let r = 0.5 * (libm::sqrt(5.0) - 1.0);
        for _ in 0..80 {
            let m1 = hi - r * (hi - lo);
            let m2 = lo + r * (hi - lo);
            if self.d1(m1).abs() < self.d1(m2).abs() {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        self.d1(0.5 * (lo + hi)).abs().max(best.1)
    }
}

/// f_{δ,n}: n copies of the profile packed into the window |{t}| < δ/2,
/// with amplitude √δ/n (linear variant) or δ/n (nonlinear variant).
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub profile: ProfileFunction,
    pub delta: f64,
    pub n: u32,
}

impl Rescaled {
    pub fn new(profile: ProfileFunction, delta: f64, n: u32) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParams("volume fraction must lie in (0, 1]".to_string()));
        }
        if n == 0 {
            return Err(Error::InvalidParams("wrinkle count must be positive".to_string()));
        }
        Ok(Self { profile, delta, n })
    }

    pub fn amplitude(&self) -> f64 {
        let n = self.n as f64;
        match self.profile.variant {
            ProfileVariant::Vkd => libm::sqrt(self.delta) / n,
            ProfileVariant::Nl => self.delta / n,
        }
    }

    /// Inner frequency n/δ.
    pub fn frequency(&self) -> f64 {
        self.n as f64 / self.delta
    }

    /// (F, F′, F″) at t. Bumps sit at the centres of n equal sub-windows,
    /// so the window edges always fall where the profile vanishes.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let t = centered(t);
        if t.abs() >= 0.5 * self.delta {
            return (0.0, 0.0, 0.0);
        }
        let k = self.frequency();
        let x = k * t + 0.5 * self.n as f64 + 0.5;
        let (f, d1, d2) = self.profile.eval(x);
        let a = self.amplitude();
        (a * f, a * k * d1, a * k * k * d2)
    }

    /// ∫_{−½}^{½} G(F, F′, F″) dt, exact up to the profile quadrature.
    pub fn integrate(&self, mut g: impl FnMut(f64, f64, f64) -> f64) -> f64 {
        let a = self.amplitude();
        let k = self.frequency();
        let zero = g(0.0, 0.0, 0.0);
        (1.0 - self.delta) * zero
            + self.delta * self.profile.integrate(|f, d1, d2| g(a * f, a * k * d1, a * k * k * d2))
    }
}

/// Convenience evaluator for a single value of f_{δ,n}.
pub fn rescale_profile(p: &ProfileFunction, delta: f64, n: u32, t: f64) -> Result<f64> {
    Ok(Rescaled::new(p.clone(), delta, n)?.eval(t).0)
}

/// S(q) = 1 − ∫√(1−q²f′²) for the nonlinear profile, with a table used
/// to bracket inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct SProfile {
    pub profile: ProfileFunction,
    pub q: Vec<f64>,
    pub s: Vec<f64>,
}

impl SProfile {
    pub const TABLE_SIZE: usize = 129;

    pub fn new(profile: ProfileFunction) -> Result<Self> {
        if profile.variant != ProfileVariant::Nl {
            return Err(Error::InvalidParams("S map needs the nonlinear profile".to_string()));
        }
        let n = Self::TABLE_SIZE;
        let q: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let s = q.iter().map(|&qi| s_exact(&profile, qi)).collect();
        Ok(Self { profile, q, s })
    }

    pub fn eval(&self, q: f64) -> f64 {
        s_exact(&self.profile, q)
    }

    /// Inverse on [0, ½].
    pub fn inverse(&self, s: f64) -> Result<f64> {
        let top = *self.s.last().unwrap_or(&0.5);
        if !(0.0..=top + 1e-12).contains(&s) {
            return Err(Error::InvalidParams(alloc::format!("S inverse argument {s} outside [0, 1/2]")));
        }
        let s = s.min(top);
        let i = self.s.partition_point(|&v| v < s).clamp(1, self.s.len() - 1);
        let (mut lo, mut hi) = (self.q[i - 1], self.q[i]);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < s {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn s_exact(p: &ProfileFunction, q: f64) -> f64 {
    p.integrate(|_, d1, _| {
        let x = q * d1;
        // 1 − √(1−x²) without cancellation
        x * x / (1.0 + libm::sqrt(1.0 - x * x))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson on a uniform grid: independent of the
    /// Gauss–Legendre machinery used by the profiles themselves.
    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + h * i as f64);
        }
        s * h / 3.0
    }

    #[test]
    fn linear_profile_normalization() {
        let p = ProfileFunction::new(ProfileVariant::Vkd, 0.45).unwrap();
        let e = simpson(-0.5, 0.5, 20000, |t| p.d1(t).powi(2));
        assert_relative_eq!(e, 1.0, max_relative = 1e-10);
        assert!(p.max_slope() <= 2.0);
        assert_relative_eq!(p.max_slope(), 1.8597618748, max_relative = 1e-8);
    }

    #[test]
    fn nonlinear_profile_normalization() {
        let p = ProfileFunction::new(ProfileVariant::Nl, 0.45).unwrap();
        let arc = simpson(-0.5, 0.5, 40000, |t| libm::sqrt(1.0 - p.d1(t).powi(2)));
        assert!((arc - 0.5).abs() < 1e-10, "arc {arc}");
        assert!(p.max_slope() < 1.0);
    }

    #[test]
    fn derivatives_are_consistent() {
        for v in [ProfileVariant::Vkd, ProfileVariant::Nl] {
            let p = ProfileFunction::new(v, 0.45).unwrap();
            for &t in &[-0.41, -0.3, -0.05, 0.02, 0.2, 0.37] {
                let h = 1e-5;
                let num1 = (p.value(t + h) - p.value(t - h)) / (2.0 * h);
                let num2 = (p.d1(t + h) - p.d1(t - h)) / (2.0 * h);
                assert!((num1 - p.d1(t)).abs() < 1e-7, "{v:?} f' at {t}");
                assert!((num2 - p.d2(t)).abs() < 1e-5 * (1.0 + p.d2(t).abs()), "{v:?} f'' at {t}");
            }
        }
    }

    #[test]
    fn compact_support_and_periodicity() {
        for v in [ProfileVariant::Vkd, ProfileVariant::Nl] {
            let p = ProfileFunction::new(v, 0.45).unwrap();
            assert_eq!(p.eval(0.5), (0.0, 0.0, 0.0));
            assert_eq!(p.eval(-0.5), (0.0, 0.0, 0.0));
            assert_relative_eq!(p.value(0.1), p.value(3.1), max_relative = 1e-12);
            assert!(p.value(0.0) > 0.0);
            let w = 0.45;
            assert!(p.value(w - 1e-4).abs() < 1e-6);
        }
    }

    #[test]
    fn infeasible_and_invalid_widths() {
        assert!(matches!(ProfileFunction::new(ProfileVariant::Vkd, 0.05), Err(Error::InvalidParams(_))));
        assert!(matches!(ProfileFunction::new(ProfileVariant::Nl, 0.2), Err(Error::Infeasible(_))));
    }

    #[test]
    fn rescaled_profile_window_and_energy() {
        let p = ProfileFunction::new(ProfileVariant::Vkd, 0.45).unwrap();
        let r = Rescaled::new(p.clone(), 0.5, 2).unwrap();
        assert_eq!(r.eval(0.3).0, 0.0);
        assert_eq!(rescale_profile(&p, 0.5, 2, -0.26).unwrap(), 0.0);
        // two bumps centred at ±δ/4
        assert!(r.eval(0.125).0 > 0.0 && r.eval(-0.125).0 > 0.0);
        assert!(r.eval(0.0).0.abs() < 1e-12);
        let e = simpson(-0.5, 0.5, 40000, |t| r.eval(t).1.powi(2));
        assert_relative_eq!(e, 1.0, max_relative = 1e-9);
        assert_relative_eq!(r.integrate(|_, d1, _| d1 * d1), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn odd_counts_match_the_plain_formula() {
        let p = ProfileFunction::new(ProfileVariant::Vkd, 0.45).unwrap();
        let r = Rescaled::new(p.clone(), 0.6, 3).unwrap();
        for &t in &[-0.2, -0.07, 0.0, 0.11, 0.29] {
            let plain = libm::sqrt(0.6) / 3.0 * p.value(3.0 / 0.6 * t);
            assert_relative_eq!(r.eval(t).0, plain, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    #[test]
    fn s_map_endpoints_and_inverse() {
        let p = ProfileFunction::new(ProfileVariant::Nl, 0.45).unwrap();
        let s = SProfile::new(p).unwrap();
        assert_eq!(s.eval(0.0), 0.0);
        assert!((s.eval(1.0) - 0.5).abs() < 1e-10);
        assert!(s.s.windows(2).all(|w| w[1] > w[0]));
        for &y in &[0.0, 0.01, 0.1, 0.25, 0.4, 0.5] {
            let q = s.inverse(y).unwrap();
            assert!((s.eval(q) - y).abs() < 1e-12, "y={y}");
        }
        assert!(s.inverse(0.6).is_err());
    }
}
