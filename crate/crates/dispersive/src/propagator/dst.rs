//! Type-I discrete sine transforms on N^3 Dirichlet boxes, via odd-extended
//! FFTs. The transform matrix S satisfies S^2 = (N+1)/2 * I, so the inverse
//! is S scaled by 2/(N+1) per axis.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::C64;

pub struct Dst3 {
    pub n: usize,
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst3 {
    pub fn new(n: usize) -> Self {
        let m = 2 * (n + 1);
        let fft = FftPlanner::new().plan_fft_forward(m);
        Dst3 { n, m, fft }
    }

    /// DST-I applied along the innermost (contiguous) axis of every line.
    fn dst_lines(&self, field: &mut [C64]) {
        let n = self.n;
        let m = self.m;
        let fft = &self.fft;
        let scratch_len = fft.get_inplace_scratch_len();
        field
            .par_chunks_mut(n)
            .for_each_init(
                || (vec![C64::new(0.0, 0.0); m], vec![C64::new(0.0, 0.0); scratch_len]),
                |(buf, scratch), line| {
                    buf[0] = C64::new(0.0, 0.0);
                    buf[n + 1] = C64::new(0.0, 0.0);
                    for j in 0..n {
                        buf[j + 1] = line[j];
                        buf[m - 1 - j] = -line[j];
                    }
                    fft.process_with_scratch(buf, scratch);
                    for k in 0..n {
                        line[k] = buf[k + 1] * C64::new(0.0, 0.5);
                    }
                },
            );
    }

    /// Axis rotation (x, y, z) -> (z, x, y).
    fn rotate(&self, src: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); src.len()];
        out.par_chunks_mut(n * n).enumerate().for_each(|(z, plane)| {
            for x in 0..n {
                for y in 0..n {
                    plane[x * n + y] = src[(x * n + y) * n + z];
                }
            }
        });
        out
    }

    /// Unnormalized 3-D DST-I (apply twice and scale by (2/(N+1))^3 for the
    /// identity).
    pub fn forward(&self, mut field: Vec<C64>) -> Vec<C64> {
        for _ in 0..3 {
            self.dst_lines(&mut field);
            field = self.rotate(&field);
        }
        field
    }

    pub fn inverse(&self, field: Vec<C64>) -> Vec<C64> {
        let scale = (2.0 / (self.n as f64 + 1.0)).powi(3);
        let mut out = self.forward(field);
        for v in &mut out {
            *v *= scale;
        }
        out
    }

    /// Dirichlet Laplacian eigenvalue factors per 1-D mode index (0-based
    /// mode k corresponds to sin(pi (k+1) j / (N+1))).
    pub fn omega_axis(&self, h: f64) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                let s = (std::f64::consts::PI * (k + 1) as f64 / (2.0 * (self.n as f64 + 1.0))).sin();
                4.0 * s * s / (h * h)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dst_roundtrip_and_eigenmode() {
        let n = 10;
        let dst = Dst3::new(n);
        let len = n * n * n;
        let field: Vec<C64> = (0..len)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let back = dst.inverse(dst.forward(field.clone()));
        for (a, b) in field.iter().zip(&back) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
        // A pure sine mode diagonalizes: forward transform concentrates on
        // one coefficient.
        let (kx, ky, kz) = (2usize, 0usize, 4usize);
        let mode: Vec<C64> = (0..len)
            .map(|idx| {
                let x = idx / (n * n);
                let y = (idx / n) % n;
                let z = idx % n;
                let s = |k: usize, j: usize| {
                    (std::f64::consts::PI * (k + 1) as f64 * (j + 1) as f64 / (n as f64 + 1.0)).sin()
                };
                C64::new(s(kx, x) * s(ky, y) * s(kz, z), 0.0)
            })
            .collect();
        let hat = dst.forward(mode);
        let expect = ((n as f64 + 1.0) / 2.0).powi(3);
        let mut max_off = 0.0f64;
        for (idx, v) in hat.iter().enumerate() {
            let x = idx / (n * n);
            let y = (idx / n) % n;
            let z = idx % n;
            if (x, y, z) == (kx, ky, kz) {
                assert_relative_eq!(v.re, expect, max_relative = 1e-11);
            } else {
                max_off = max_off.max(v.norm());
            }
        }
        assert!(max_off < 1e-9 * expect);
    }
}
