//! Complex FFT for arbitrary lengths.
//!
//! Powers of two use an iterative radix-2 kernel; every other length goes
//! through Bluestein's chirp-z reduction onto a power-of-two transform.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Radix2 { twiddles: Vec<Complex64>, rev: Vec<u32> },
    Bluestein { chirp: Vec<Complex64>, kernel_hat: Vec<Complex64>, inner: Radix2Plan },
}

#[derive(Debug, Clone)]
struct Radix2Plan {
    n: usize,
    twiddles: Vec<Complex64>,
    rev: Vec<u32>,
}

impl Radix2Plan {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let bits = n.trailing_zeros();
        let rev = (0..n as u32).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) }).collect();
        Self { n, twiddles, rev }
    }

    /// Forward transform in place (sign −1 in the exponent).
    fn forward(&self, x: &mut [Complex64]) {
        radix2(x, &self.twiddles, &self.rev, false);
    }

    fn inverse_unscaled(&self, x: &mut [Complex64]) {
        radix2(x, &self.twiddles, &self.rev, true);
    }
}

fn radix2(x: &mut [Complex64], tw: &[Complex64], rev: &[u32], conj: bool) {
    let n = x.len();
    for i in 0..n {
        let j = rev[i] as usize;
        if j > i {
            x.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let mut w = tw[k * step];
                if conj {
                    w = w.conj();
                }
                let a = x[start + k];
                let b = x[start + k + half] * w;
                x[start + k] = a + b;
                x[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "fft length must be positive");
        if n.is_power_of_two() {
            let p = Radix2Plan::new(n);
            return Self { n, kind: Kind::Radix2 { twiddles: p.twiddles, rev: p.rev } };
        }
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2Plan::new(m);
        // chirp_k = exp(-i pi k^2 / n); k^2 reduced mod 2n to keep the angle small
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let kk = (k as u128 * k as u128 % (2 * n as u128)) as f64;
                let a = -PI * kk / n as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self { n, kind: Kind::Bluestein { chirp, kernel_hat: kernel, inner } }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward DFT: X_k = Σ x_j e^{-2πi jk/n}.
    pub fn forward(&self, x: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        match &self.kind {
            Kind::Radix2 { twiddles, rev } => radix2(x, twiddles, rev, false),
            Kind::Bluestein { chirp, kernel_hat, inner } => bluestein(x, chirp, kernel_hat, inner),
        }
    }

    /// Inverse DFT including the 1/n factor.
    pub fn inverse(&self, x: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        match &self.kind {
            Kind::Radix2 { twiddles, rev } => radix2(x, twiddles, rev, true),
            Kind::Bluestein { chirp, kernel_hat, inner } => {
                for v in x.iter_mut() {
                    *v = v.conj();
                }
                bluestein(x, chirp, kernel_hat, inner);
                for v in x.iter_mut() {
                    *v = v.conj();
                }
            }
        }
        let s = 1.0 / self.n as f64;
        for v in x.iter_mut() {
            *v *= s;
        }
    }
}

fn bluestein(x: &mut [Complex64], chirp: &[Complex64], kernel_hat: &[Complex64], inner: &Radix2Plan) {
    let n = x.len();
    let m = inner.n;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        buf[k] = x[k] * chirp[k];
    }
    inner.forward(&mut buf);
    for (b, k) in buf.iter_mut().zip(kernel_hat) {
        *b *= k;
    }
    inner.inverse_unscaled(&mut buf);
    let s = 1.0 / m as f64;
    for k in 0..n {
        x[k] = buf[k] * chirp[k] * s;
    }
}
