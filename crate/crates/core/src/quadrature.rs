//! Quadrature on periodic grids.
//!
//! Every integrand handled by the averaging engine is periodic in the
//! integration variable, so the workhorse is the uniform trapezoid rule,
//! which converges spectrally for smooth periodic functions. Partial-period
//! integrals (`∫₀^τ`) are taken either spectrally from grid samples
//! ([`SpectralAntiderivative`]) or pointwise with composite Gauss–Legendre
//! panels ([`GaussLegendre`]).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("frequency {0}/{1} is not a positive rational")]
    NonpositiveFrequency(u64, u64),
    #[error("no frequencies given")]
    Empty,
}

/// A positive rational frequency `num/den`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u64, u64)", into = "(u64, u64)")]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Result<Self, QuadratureError> {
        if num == 0 || den == 0 {
            return Err(QuadratureError::NonpositiveFrequency(num, den));
        }
        let g = num.gcd(&den);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn integer(n: u64) -> Self {
        Self::new(n, 1).expect("integer frequency must be positive")
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl TryFrom<(u64, u64)> for Rational {
    type Error = QuadratureError;
    fn try_from((n, d): (u64, u64)) -> Result<Self, Self::Error> {
        Rational::new(n, d)
    }
}

impl From<Rational> for (u64, u64) {
    fn from(r: Rational) -> Self {
        (r.num, r.den)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Least common period of `cos(w_i·τ)` over all frequencies:
/// `2π·lcm(denominators)/gcd(numerators)`.
pub fn common_period(freqs: &[Rational]) -> Result<f64, QuadratureError> {
    let first = freqs.first().ok_or(QuadratureError::Empty)?;
    let (mut l, mut g) = (first.den, first.num);
    for w in &freqs[1..] {
        l = l.lcm(&w.den);
        g = g.gcd(&w.num);
    }
    Ok(2.0 * PI * l as f64 / g as f64)
}

/// Uniform periodic nodes `k·period/n`, `k = 0..n`.
pub fn uniform_nodes(n: usize, period: f64) -> Vec<f64> {
    (0..n).map(|k| k as f64 * period / n as f64).collect()
}

/// Trapezoid mean of one period of samples taken on [`uniform_nodes`].
pub fn periodic_mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Trapezoid integral over one period of length `period`.
pub fn periodic_integral<F: FnMut(f64) -> f64>(mut f: F, period: f64, n: usize) -> f64 {
    let h = period / n as f64;
    (0..n).map(|k| f(k as f64 * h)).sum::<f64>() * h
}

/// Spectral antiderivative on a uniform periodic grid.
///
/// Given samples `f(τ_m)`, `τ_m = m·T/n`, returns `F(τ_m) = ∫₀^{τ_m} f`
/// computed by integrating the trigonometric interpolant of `f` exactly.
/// The mean mode contributes `c₀·τ`; the Nyquist mode integrates to zero at
/// grid points and is dropped.
#[derive(Clone)]
pub struct SpectralAntiderivative {
    n: usize,
    period: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralAntiderivative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralAntiderivative")
            .field("n", &self.n)
            .field("period", &self.period)
            .finish()
    }
}

impl SpectralAntiderivative {
    pub fn new(n: usize, period: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            period,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nodes(&self) -> Vec<f64> {
        uniform_nodes(self.n, self.period)
    }

    /// Writes `∫₀^{τ_m} f` into `out` for every grid node.
    pub fn apply(&self, samples: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(samples.len(), n);
        assert_eq!(out.len(), n);
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        let omega = 2.0 * PI / self.period;
        let mean = buf[0].re * scale;
        let mut offset = Complex::new(0.0, 0.0);
        buf[0] = Complex::new(0.0, 0.0);
        for (k, c) in buf.iter_mut().enumerate().skip(1) {
            let signed = if 2 * k < n {
                k as f64
            } else if 2 * k > n {
                k as f64 - n as f64
            } else {
                *c = Complex::new(0.0, 0.0);
                continue;
            };
            let g = *c * scale / Complex::new(0.0, signed * omega);
            offset += g;
            *c = g;
        }
        self.inverse.process(&mut buf);
        let h = self.period / n as f64;
        for (m, o) in out.iter_mut().enumerate() {
            *o = mean * (m as f64 * h) + buf[m].re - offset.re;
        }
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds an `order`-point rule by Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Composite rule over `[a, b]` with `panels` equal panels.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += w * f(mid + 0.5 * h * x);
            }
        }
        acc * 0.5 * h
    }

    /// Vector-valued composite rule; `f` writes the integrand into its buffer.
    pub fn integrate_vec<F: FnMut(f64, &mut [f64])>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        panels: usize,
        out: &mut [f64],
    ) {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; out.len()];
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                f(mid + 0.5 * h * x, &mut buf);
                for (o, v) in out.iter_mut().zip(&buf) {
                    *o += w * v;
                }
            }
        }
        out.iter_mut().for_each(|o| *o *= 0.5 * h);
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
