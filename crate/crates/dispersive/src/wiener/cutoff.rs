//! The smooth cutoff used by the constructive inversion: a C^2 bump built
//! from the quintic smoothstep, its translated partition-of-unity profile,
//! and FFT tabulation of mollifier kernels on a circular lattice.

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::C64;

/// Quintic smoothstep: 0 -> 1 over [0, 1] with vanishing first and second
/// derivatives at both ends.
pub fn smoothstep5(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// Even C^2 bump: 1 on [-1/2, 1/2], 0 outside [-1, 1].
pub fn eta(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        1.0 - smoothstep5(2.0 * a - 1.0)
    }
}

/// Partition profile: beta(x) = smoothstep5(x + 1) - smoothstep5(x),
/// supported on [-1, 1], with sum_j beta(x - j) = 1 identically.
pub fn beta(x: f64) -> f64 {
    smoothstep5(x + 1.0) - smoothstep5(x)
}

/// Cutoff configuration plus tabulated kernel values at one mollifier scale.
///
/// `eta_values` samples eta(lambda / l_scale) on the frequency lattice of an
/// N-point circular rho-lattice of spacing h; `eta_check_values` is its
/// inverse DFT, the sampled kernel of the mollifier L eta_check(L rho).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub l_scale: f64,
    pub eta_values: Vec<f64>,
    pub eta_check_values: Vec<f64>,
}

impl CutoffProfile {
    /// Tabulate by FFT on the size-`n` circular lattice of spacing `h`.
    pub fn tabulate(l_scale: f64, n: usize, h: f64) -> Self {
        let freqs = freq_lattice(n, h);
        let eta_values: Vec<f64> = freqs.iter().map(|l| eta(l / l_scale)).collect();
        // Kernel samples m[k] with h * DFT(m) = eta(lambda/L): m = IDFT / h
        // (inverse_fft already carries the 1/N factor).
        let mut buf: Vec<C64> = eta_values.iter().map(|e| C64::new(*e, 0.0)).collect();
        inverse_fft(&mut buf);
        let eta_check_values: Vec<f64> = buf.iter().map(|z| z.re / h).collect();
        CutoffProfile { l_scale, eta_values, eta_check_values }
    }
}

/// Frequencies lambda_m = 2 pi m / (N h) in FFT index order (wrapped).
pub fn freq_lattice(n: usize, h: f64) -> Vec<f64> {
    let dl = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n)
        .map(|m| {
            let m_signed = if m <= n / 2 { m as i64 } else { m as i64 - n as i64 };
            dl * m_signed as f64
        })
        .collect()
}

pub fn forward_fft(buf: &mut [C64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

pub fn inverse_fft(buf: &mut [C64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
    let n = buf.len() as f64;
    for z in buf.iter_mut() {
        *z /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eta_shape() {
        assert_eq!(eta(0.0), 1.0);
        assert_eq!(eta(0.5), 1.0);
        assert_eq!(eta(-0.3), 1.0);
        assert_eq!(eta(1.0), 0.0);
        assert_eq!(eta(-1.4), 0.0);
        for i in 0..=100 {
            let x = -1.5 + 3.0 * i as f64 / 100.0;
            let v = eta(x);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, eta(-x));
        }
        // C^2: second finite differences stay bounded through the joints.
        let d = 1e-5;
        for x0 in [0.5, 1.0, -0.5, -1.0, 0.75] {
            let dd = (eta(x0 + d) - 2.0 * eta(x0) + eta(x0 - d)) / (d * d);
            assert!(dd.abs() < 30.0, "second difference at {x0}: {dd}");
        }
    }

    #[test]
    fn beta_telescopes_to_one() {
        for i in 0..=50 {
            let x = -2.0 + 4.0 * i as f64 / 50.0;
            let s: f64 = (-6..=6).map(|j| beta(x - j as f64)).sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-14);
        }
        assert_eq!(beta(1.0), 0.0);
        assert_eq!(beta(-1.0), 0.0);
    }

    /// Oscillatory quadrature oracle for the kernel of the mollifier:
    /// (1/2 pi) * int eta(lambda/L) e^{i lambda rho} d lambda.
    fn eta_check_quadrature(l_scale: f64, rho: f64) -> f64 {
        // Integrand supported on [-L, L]; resolve the oscillation.
        let panels = 200 + (4.0 * l_scale * rho.abs()) as usize;
        let a = -l_scale;
        let b = l_scale;
        let hstep = (b - a) / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            // 4-point Gauss-Legendre per panel.
            let x0 = a + i as f64 * hstep;
            let nodes = [0.06943184420297371, 0.33000947820757187, 0.6699905217924281, 0.9305681557970262];
            let wts = [0.1739274225687269, 0.32607257743127305, 0.32607257743127305, 0.1739274225687269];
            for (t, w) in nodes.iter().zip(wts.iter()) {
                let lam = x0 + t * hstep;
                acc += w * hstep * eta(lam / l_scale) * (lam * rho).cos();
            }
        }
        acc / (2.0 * std::f64::consts::PI)
    }

    #[test]
    fn fft_tabulation_matches_quadrature() {
        let n = 4096;
        let h = 0.05;
        let l = 4.0;
        let prof = CutoffProfile::tabulate(l, n, h);
        // Mass: h * sum of kernel samples = eta(0) = 1.
        let mass: f64 = prof.eta_check_values.iter().map(|v| v * h).sum();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-12);
        for k in [0usize, 3, 17, 40, 200] {
            let rho = k as f64 * h;
            let spectral = prof.eta_check_values[k];
            let direct = eta_check_quadrature(l, rho);
            assert!(
                (spectral - direct).abs() < 2e-4,
                "rho {rho}: fft {spectral} vs quadrature {direct}"
            );
        }
    }
}
