//! Rational transfer functions in the backward-shift operator z⁻¹.

use std::f64::consts::PI;

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial `c[0] + c[1] z⁻¹ + c[2] z⁻² + …`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(Vec<f64>);

impl Poly {
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut p = Poly(coeffs.into());
        p.trim();
        p
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// `z^{-k}`.
    pub fn shift(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Poly(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    /// Highest power of z⁻¹ with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    fn trim(&mut self) {
        while self.0.len() > 1 && *self.0.last().unwrap() == 0.0 {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(0.0);
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let out: Vec<f64> = (0..n)
            .map(|i| self.0.get(i).copied().unwrap_or(0.0) + other.0.get(i).copied().unwrap_or(0.0))
            .collect();
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly::new(self.0.iter().map(|c| c * k).collect::<Vec<_>>())
    }

    /// Multiplies by `z^{-k}`.
    pub fn delayed(&self, k: usize) -> Poly {
        let mut c = vec![0.0; k];
        c.extend_from_slice(&self.0);
        Poly::new(c)
    }

    /// Number of leading coefficients with magnitude at most `tol` times the
    /// largest coefficient.
    pub fn leading_zeros(&self, tol: f64) -> usize {
        let scale = self.max_abs();
        if scale == 0.0 {
            return self.0.len();
        }
        self.0.iter().take_while(|c| c.abs() <= tol * scale).count()
    }

    /// Drops the first `k` coefficients (divides by `z^{-k}`).
    pub fn advanced(&self, k: usize) -> Poly {
        Poly::new(self.0[k.min(self.0.len())..].to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Evaluates at a point `z` (not `z⁻¹`).
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let w = z.inv();
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
    }

    /// Quotient and remainder of division as polynomials in z⁻¹.
    pub fn div_rem(&self, divisor: &Poly) -> Result<(Poly, Poly)> {
        if divisor.is_zero() {
            return Err(Error::DegenerateTransferFunction("division by zero polynomial".into()));
        }
        let d = &divisor.0;
        let lead = d[d.len() - 1];
        let mut rem = self.0.clone();
        if rem.len() < d.len() {
            return Ok((Poly::constant(0.0), self.clone()));
        }
        let mut quot = vec![0.0; rem.len() - d.len() + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + d.len() - 1] / lead;
            quot[k] = q;
            for (j, &dj) in d.iter().enumerate() {
                rem[k + j] -= q * dj;
            }
        }
        rem.truncate(d.len() - 1);
        Ok((Poly::new(quot), Poly::new(rem)))
    }

    pub fn eval_at_one(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Roots in z of `zⁿ p(z⁻¹)`, excluding the roots at the origin that
    /// correspond to trailing zero coefficients; leading zero coefficients are
    /// delays and contribute no finite roots.
    pub fn roots(&self) -> Vec<Complex64> {
        let c = &self.0;
        let first = match c.iter().position(|&v| v != 0.0) {
            Some(i) => i,
            None => return Vec::new(),
        };
        let c = &c[first..];
        let n = c.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        // Companion matrix of the monic polynomial z^n + (c1/c0) z^{n-1} + ...
        let mut m = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            m[(0, j)] = -c[j + 1] / c[0];
        }
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        eigenvalues(&m).unwrap_or_else(|| aberth_roots(c))
    }
}

const MAX_SCHUR_ITERATIONS: usize = 10_000;

/// Eigenvalues from a real Schur decomposition with a bounded iteration
/// count; `None` if the QR iteration does not converge.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    Schur::try_new(m.clone(), f64::EPSILON, MAX_SCHUR_ITERATIONS)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
}

/// Aberth-Ehrlich simultaneous root iteration for `c[0] zⁿ + … + c[n]`.
fn aberth_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    let monic: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v / c[0], 0.0)).collect();
    let radius = 1.0 + monic[1..].iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * (k as f64 + 0.25) / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (mut p, mut dp) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for &a in &monic {
                dp = dp * z[i] + p;
                p = p * z[i] + a;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| (z[i] - z[j]).inv()).sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm());
            }
        }
        if moved < 1e-15 * radius {
            break;
        }
    }
    z
}

/// `num(z⁻¹) / den(z⁻¹)`, normalized so that `den[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTf {
    num: Poly,
    den: Poly,
}

impl DiscreteTf {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DegenerateTransferFunction("zero denominator".into()));
        }
        let common = num
            .coeffs()
            .iter()
            .take_while(|&&c| c == 0.0)
            .count()
            .min(den.coeffs().iter().take_while(|&&c| c == 0.0).count());
        let (num, den) = (num.advanced(common), den.advanced(common));
        let a0 = den.coeffs()[0];
        if a0 == 0.0 {
            return Err(Error::DegenerateTransferFunction(
                "denominator has more delay than numerator (non-causal)".into(),
            ));
        }
        Ok(Self {
            num: num.scale(1.0 / a0),
            den: den.scale(1.0 / a0),
        })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Poly::new(num.to_vec()), Poly::new(den.to_vec()))
    }

    pub fn gain(k: f64) -> Self {
        Self {
            num: Poly::constant(k),
            den: Poly::constant(1.0),
        }
    }

    /// Pure delay `z^{-k}`.
    pub fn delay(k: usize) -> Self {
        Self {
            num: Poly::shift(k),
            den: Poly::constant(1.0),
        }
    }

    /// Forward-Euler integrator `Ts z⁻¹ / (1 - z⁻¹)`.
    pub fn integrator(ts: f64) -> Self {
        Self {
            num: Poly::new(vec![0.0, ts]),
            den: Poly::new(vec![1.0, -1.0]),
        }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn series(&self, other: &DiscreteTf) -> DiscreteTf {
        DiscreteTf::new(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("product of causal transfer functions is causal")
    }

    pub fn parallel(&self, other: &DiscreteTf) -> DiscreteTf {
        let num = self.num.mul(&other.den).add(&other.num.mul(&self.den));
        DiscreteTf::new(num, self.den.mul(&other.den)).expect("sum of causal transfer functions is causal")
    }

    pub fn scaled(&self, k: f64) -> DiscreteTf {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn delayed(&self, k: usize) -> DiscreteTf {
        Self {
            num: self.num.delayed(k),
            den: self.den.clone(),
        }
    }

    /// Negative feedback `F / (1 + F G)`.
    pub fn feedback(&self, g: &DiscreteTf) -> Result<DiscreteTf> {
        let num = self.num.mul(&g.den);
        let den = self.den.mul(&g.den).add(&self.num.mul(&g.num));
        if den.is_zero() {
            return Err(Error::DegenerateTransferFunction("1 + F G is identically zero".into()));
        }
        DiscreteTf::new(num, den)
    }

    /// `1 / F`. Requires `F` to be biproper.
    pub fn inverse(&self) -> Result<DiscreteTf> {
        if self.num.is_zero() {
            return Err(Error::DegenerateTransferFunction("inverse of zero".into()));
        }
        DiscreteTf::new(self.den.clone(), self.num.clone())
    }

    pub fn evaluate(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    pub fn dc_gain(&self) -> f64 {
        self.num.eval_at_one() / self.den.eval_at_one()
    }

    /// Delay of the numerator in samples.
    pub fn delay_steps(&self, tol: f64) -> usize {
        self.num.leading_zeros(tol)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        let mut p = self.den.roots();
        // Excess numerator degree adds poles at the origin.
        let excess = self.num.degree().saturating_sub(self.den.degree());
        p.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), excess));
        p
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        self.num.roots()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles().iter().fold(0.0, |m, p| m.max(p.norm()))
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_radius() < 1.0
    }

    /// Bode data `(omega rad/s, magnitude dB, phase deg)` with the phase
    /// unwrapped along the grid.
    pub fn frequency_response(&self, omegas: &[f64], ts: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(omegas.len());
        let mut prev: Option<f64> = None;
        for &w in omegas {
            let h = self.evaluate(Complex64::from_polar(1.0, w * ts));
            let mut phase = h.arg().to_degrees();
            if let Some(p) = prev {
                while phase - p > 180.0 {
                    phase -= 360.0;
                }
                while phase - p < -180.0 {
                    phase += 360.0;
                }
            }
            prev = Some(phase);
            out.push((w, 20.0 * h.norm().log10(), phase));
        }
        out
    }

    pub fn simulate(&self, input: &[f64]) -> Vec<f64> {
        let mut f = IirFilter::new(self);
        input.iter().map(|&u| f.process(u)).collect()
    }

    pub fn step_response(&self, n_steps: usize) -> Vec<f64> {
        self.simulate(&vec![1.0; n_steps])
    }
}

/// Log-spaced frequency grid from `lo` to `hi` rad/s.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Nyquist frequency for sample time `ts`, rad/s.
pub fn nyquist(ts: f64) -> f64 {
    PI / ts
}

/// Transposed direct-form II realization of a [`DiscreteTf`].
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    state: Vec<f64>,
}

impl IirFilter {
    pub fn new(tf: &DiscreteTf) -> Self {
        let n = tf.num.coeffs().len().max(tf.den.coeffs().len());
        let mut b = tf.num.coeffs().to_vec();
        let mut a = tf.den.coeffs().to_vec();
        b.resize(n, 0.0);
        a.resize(n, 0.0);
        Self {
            b,
            a,
            state: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn process(&mut self, u: f64) -> f64 {
        let y = self.b[0] * u + self.state.first().copied().unwrap_or(0.0);
        let n = self.state.len();
        for i in 0..n {
            let next = if i + 1 < n { self.state[i + 1] } else { 0.0 };
            self.state[i] = next + self.b[i + 1] * u - self.a[i + 1] * y;
        }
        y
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|s| *s = 0.0);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, s: &[f64]) {
        self.state.copy_from_slice(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_series() {
        let z1 = DiscreteTf::delay(1);
        let z2 = z1.series(&z1);
        assert_eq!(z2.num().coeffs(), &[0.0, 0.0, 1.0]);
        assert_eq!(z2.den().coeffs(), &[1.0]);
    }

    #[test]
    fn division_recovers_factors() {
        let a = Poly::new(vec![1.0, -0.5, 0.25]);
        let b = Poly::new(vec![2.0, 3.0]);
        let r = Poly::new(vec![0.125]);
        let (q, rem) = a.mul(&b).add(&r).div_rem(&a).unwrap();
        for (x, y) in q.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((rem.coeffs()[0] - 0.125).abs() < 1e-14);
    }

    #[test]
    fn integrator_step_is_ramp() {
        let ts = 0.02;
        let y = DiscreteTf::integrator(ts).step_response(50);
        for (n, v) in y.iter().enumerate() {
            assert!((v - ts * n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_and_common_delay() {
        let tf = DiscreteTf::from_coeffs(&[0.0, 2.0, 4.0], &[0.0, 2.0, 1.0]).unwrap();
        assert_eq!(tf.num().coeffs(), &[1.0, 2.0]);
        assert_eq!(tf.den().coeffs(), &[1.0, 0.5]);
        assert!(DiscreteTf::from_coeffs(&[1.0], &[0.0, 1.0]).is_err());
        assert!(DiscreteTf::from_coeffs(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn poles_and_stability() {
        let tf = DiscreteTf::from_coeffs(&[1.0], &[1.0, -1.5, 0.56]).unwrap();
        let mut r: Vec<f64> = tf.poles().iter().map(|p| p.re).collect();
        r.sort_by(f64::total_cmp);
        assert!((r[0] - 0.7).abs() < 1e-12 && (r[1] - 0.8).abs() < 1e-12);
        assert!(tf.is_stable());
        assert!(!DiscreteTf::integrator(0.1).is_stable());
    }

    #[test]
    fn feedback_of_integrator() {
        // k Ts z^-1/(1 - z^-1) in unity feedback: pole at 1 - k Ts.
        let cl = DiscreteTf::integrator(0.1).scaled(2.0).feedback(&DiscreteTf::gain(1.0)).unwrap();
        let p = cl.poles();
        assert_eq!(p.len(), 1);
        assert!((p[0].re - 0.8).abs() < 1e-12);
        assert!((cl.dc_gain() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_matches_difference_equation() {
        let tf = DiscreteTf::from_coeffs(&[0.5, 0.2, -0.1], &[1.0, -0.3, 0.1]).unwrap();
        let u: Vec<f64> = (0..20).map(|k| ((k * 7) % 5) as f64 - 2.0).collect();
        let y = tf.simulate(&u);
        let mut yd = vec![0.0; u.len()];
        for k in 0..u.len() {
            let g = |v: &[f64], i: isize| if i >= 0 { v[i as usize] } else { 0.0 };
            let k_ = k as isize;
            yd[k] = 0.5 * u[k] + 0.2 * g(&u, k_ - 1) - 0.1 * g(&u, k_ - 2) + 0.3 * g(&yd, k_ - 1)
                - 0.1 * g(&yd, k_ - 2);
        }
        for (a, b) in y.iter().zip(&yd) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_response_of_delay() {
        let ts = 0.02;
        let r = DiscreteTf::delay(1).frequency_response(&[1.0, 10.0], ts);
        for (w, mag, ph) in r {
            assert!(mag.abs() < 1e-12);
            assert!((ph + (w * ts).to_degrees()).abs() < 1e-9);
        }
    }
}
