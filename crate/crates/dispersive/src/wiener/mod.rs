//! Matrix-valued convolution algebra on a uniform rho-lattice.
//!
//! An element is z * 1 + T where 1 is the adjoined identity and T a finitely
//! supported matrix-valued lattice function; the product is the h-scaled
//! convolution-composition and the norm is |z| plus the maximal column mass
//! max_j sum_rho h sum_i |T_ij(rho)|. On the lattice the algebra identities
//! (submultiplicativity, Fourier intertwining, the symbol bound) hold
//! exactly, so tolerance terms in the checks only absorb roundoff.

pub mod cutoff;
mod invert;

pub use cutoff::{beta, eta, smoothstep5, CutoffProfile};
pub use invert::{invert, InvertLog, WindowLog};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::C64;
use cutoff::{forward_fft, inverse_fft};

#[derive(Debug, Clone)]
pub struct WienerElement {
    /// Coefficient of the adjoined identity.
    pub ident: C64,
    /// Lattice spacing in rho.
    pub h: f64,
    /// Sample k sits at rho = (start + k) * h.
    pub start: i64,
    /// d x d matrices per lattice site.
    pub mats: Vec<DMatrix<C64>>,
    pub d: usize,
}

impl WienerElement {
    pub fn zero(d: usize, h: f64) -> Self {
        WienerElement { ident: C64::new(0.0, 0.0), h, start: 0, mats: Vec::new(), d }
    }

    pub fn identity(z: C64, d: usize, h: f64) -> Self {
        WienerElement { ident: z, h, start: 0, mats: Vec::new(), d }
    }

    /// Element from matrix samples starting at lattice index `start`.
    pub fn from_samples(d: usize, h: f64, start: i64, mats: Vec<DMatrix<C64>>) -> Result<Self> {
        if h <= 0.0 {
            return Err(Error::InvalidInput("lattice spacing must be positive".into()));
        }
        if mats.iter().any(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::InvalidInput("sample dimension mismatch".into()));
        }
        Ok(WienerElement { ident: C64::new(0.0, 0.0), h, start, mats, d })
    }

    /// Scalar-profile element g(rho) * I for d = 1.
    pub fn scalar_profile(h: f64, start: i64, values: &[C64]) -> Self {
        let mats = values.iter().map(|v| DMatrix::from_element(1, 1, *v)).collect();
        WienerElement { ident: C64::new(0.0, 0.0), h, start, mats, d: 1 }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn rho_at(&self, k: usize) -> f64 {
        (self.start + k as i64) as f64 * self.h
    }

    pub fn rho_values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.rho_at(k)).collect()
    }

    /// Sample-part norm: max over columns j of sum_rho h sum_i |T_ij(rho)|.
    pub fn w_norm(&self) -> f64 {
        if self.mats.is_empty() {
            return 0.0;
        }
        let mut col = vec![0.0f64; self.d];
        for m in &self.mats {
            for j in 0..self.d {
                for i in 0..self.d {
                    col[j] += m[(i, j)].norm();
                }
            }
        }
        col.iter().fold(0.0f64, |a, c| a.max(c * self.h))
    }

    /// Full algebra norm |z| + W-norm(T).
    pub fn norm_total(&self) -> f64 {
        self.ident.norm() + self.w_norm()
    }

    /// Drop negligible leading/trailing samples.
    pub fn trimmed(&self, floor: f64) -> WienerElement {
        let size = |m: &DMatrix<C64>| m.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        let first = self.mats.iter().position(|m| size(m) > floor);
        let last = self.mats.iter().rposition(|m| size(m) > floor);
        match (first, last) {
            (Some(a), Some(b)) => WienerElement {
                ident: self.ident,
                h: self.h,
                start: self.start + a as i64,
                mats: self.mats[a..=b].to_vec(),
                d: self.d,
            },
            _ => WienerElement { ident: self.ident, h: self.h, start: 0, mats: Vec::new(), d: self.d },
        }
    }

    /// Fourier symbol z I + h sum_rho e^{-i lambda rho} T(rho); Nyquist guard
    /// |lambda| h < pi.
    pub fn fourier(&self, lambda: f64) -> Result<DMatrix<C64>> {
        if lambda.abs() * self.h >= std::f64::consts::PI {
            return Err(Error::Resolution(format!(
                "fourier at lambda {lambda} violates the Nyquist guard for h = {}",
                self.h
            )));
        }
        let mut acc = DMatrix::from_diagonal_element(self.d, self.d, self.ident);
        for (k, m) in self.mats.iter().enumerate() {
            let rho = self.rho_at(k);
            let ph = -lambda * rho;
            let w = C64::new(ph.cos(), ph.sin()) * self.h;
            acc += m * w;
        }
        Ok(acc)
    }

    /// Translation-continuity profile: W-norm of T - T(. - delta) for each
    /// delta, which must be a nonnegative lattice multiple of h.
    pub fn check_c1(&self, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(deltas.len());
        for &delta in deltas {
            let steps = delta / self.h;
            let m = steps.round();
            if (steps - m).abs() > 1e-9 || delta < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "delta {delta} is not a lattice multiple of h = {}",
                    self.h
                )));
            }
            let shifted = WienerElement {
                ident: self.ident,
                h: self.h,
                start: self.start + m as i64,
                mats: self.mats.clone(),
                d: self.d,
            };
            out.push((delta, self.sub(&shifted)?.w_norm()));
        }
        Ok(out)
    }

    /// Locality profile: W-norm of T restricted to |rho| >= R, per R.
    pub fn check_c2(&self, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(radii.len());
        for &r in radii {
            if r < 0.0 {
                return Err(Error::InvalidInput("truncation radius must be nonnegative".into()));
            }
            let tail = WienerElement {
                ident: C64::new(0.0, 0.0),
                h: self.h,
                start: self.start,
                mats: self
                    .mats
                    .iter()
                    .enumerate()
                    .map(|(k, m)| {
                        if self.rho_at(k).abs() >= r {
                            m.clone()
                        } else {
                            DMatrix::zeros(self.d, self.d)
                        }
                    })
                    .collect(),
                d: self.d,
            };
            out.push((r, tail.w_norm()));
        }
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> WienerElement {
        WienerElement {
            ident: self.ident * c,
            h: self.h,
            start: self.start,
            mats: self.mats.iter().map(|m| m * c).collect(),
            d: self.d,
        }
    }

    pub fn sub(&self, other: &WienerElement) -> Result<WienerElement> {
        self.add_scaled(other, C64::new(-1.0, 0.0))
    }

    pub fn add_scaled(&self, other: &WienerElement, c: C64) -> Result<WienerElement> {
        if self.d != other.d || (self.h - other.h).abs() > 1e-14 * self.h.max(other.h) {
            return Err(Error::InvalidInput("element dimension or spacing mismatch".into()));
        }
        if other.mats.is_empty() {
            let mut out = self.clone();
            out.ident += c * other.ident;
            return Ok(out);
        }
        if self.mats.is_empty() {
            let mut out = other.scale(c);
            out.ident += self.ident;
            return Ok(out);
        }
        let start = self.start.min(other.start);
        let end = (self.start + self.len() as i64).max(other.start + other.len() as i64);
        let mut mats = vec![DMatrix::zeros(self.d, self.d); (end - start) as usize];
        for (k, m) in self.mats.iter().enumerate() {
            mats[(self.start - start) as usize + k] += m;
        }
        for (k, m) in other.mats.iter().enumerate() {
            mats[(other.start - start) as usize + k] += m * c;
        }
        Ok(WienerElement { ident: self.ident + c * other.ident, h: self.h, start, mats, d: self.d })
    }

    /// Left-multiply every sample by a constant matrix (the identity part is
    /// untouched; callers manage it explicitly).
    pub fn map_left(&self, b: &DMatrix<C64>) -> WienerElement {
        WienerElement {
            ident: self.ident,
            h: self.h,
            start: self.start,
            mats: self.mats.iter().map(|m| b * m).collect(),
            d: self.d,
        }
    }

    pub fn map_right(&self, b: &DMatrix<C64>) -> WienerElement {
        WienerElement {
            ident: self.ident,
            h: self.h,
            start: self.start,
            mats: self.mats.iter().map(|m| m * b).collect(),
            d: self.d,
        }
    }

    /// JSON form {d, h_rho, rho_values, matrices} with matrices as per-site
    /// row-major [re, im] pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let matrices: Vec<Vec<[f64; 2]>> = self
            .mats
            .iter()
            .map(|m| {
                let mut row = Vec::with_capacity(self.d * self.d);
                for i in 0..self.d {
                    for j in 0..self.d {
                        row.push([m[(i, j)].re, m[(i, j)].im]);
                    }
                }
                row
            })
            .collect();
        serde_json::json!({
            "d": self.d,
            "h_rho": self.h,
            "identity_coeff": [self.ident.re, self.ident.im],
            "rho_values": self.rho_values(),
            "matrices": matrices,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("wiener element json: {m}"));
        let d = v["d"].as_u64().ok_or_else(|| bad("missing d"))? as usize;
        let h = v["h_rho"].as_f64().ok_or_else(|| bad("missing h_rho"))?;
        let ident = match v.get("identity_coeff") {
            Some(z) => C64::new(
                z[0].as_f64().ok_or_else(|| bad("identity_coeff"))?,
                z[1].as_f64().ok_or_else(|| bad("identity_coeff"))?,
            ),
            None => C64::new(0.0, 0.0),
        };
        let rho: Vec<f64> = serde_json::from_value(v["rho_values"].clone()).map_err(|e| bad(&e.to_string()))?;
        let raw: Vec<Vec<[f64; 2]>> = serde_json::from_value(v["matrices"].clone()).map_err(|e| bad(&e.to_string()))?;
        if rho.len() != raw.len() {
            return Err(bad("rho_values and matrices lengths differ"));
        }
        if h <= 0.0 {
            return Err(bad("h_rho must be positive"));
        }
        let start = if rho.is_empty() { 0 } else { (rho[0] / h).round() as i64 };
        for (k, r) in rho.iter().enumerate() {
            if ((start + k as i64) as f64 * h - r).abs() > 1e-9 * h {
                return Err(bad("rho_values are not a uniform lattice"));
            }
        }
        let mats: Vec<DMatrix<C64>> = raw
            .iter()
            .map(|row| {
                if row.len() != d * d {
                    return Err(bad("matrix entry count != d^2"));
                }
                Ok(DMatrix::from_fn(d, d, |i, j| {
                    let e = row[i * d + j];
                    C64::new(e[0], e[1])
                }))
            })
            .collect::<Result<_>>()?;
        let mut el = WienerElement::from_samples(d, h, start, mats)?;
        el.ident = ident;
        Ok(el)
    }
}

/// Convolution-composition product with identity coefficients multiplying
/// through: (z1 1 + S)(z2 1 + T) = z1 z2 1 + z1 T + z2 S + S conv T.
/// The sample convolution runs through zero-padded FFTs.
pub fn convolve(s: &WienerElement, t: &WienerElement) -> Result<WienerElement> {
    if s.d != t.d {
        return Err(Error::InvalidInput("element dimension mismatch".into()));
    }
    if (s.h - t.h).abs() > 1e-14 * s.h.max(t.h) {
        return Err(Error::InvalidInput("element spacing mismatch".into()));
    }
    let mut out = if s.mats.is_empty() || t.mats.is_empty() {
        WienerElement::zero(s.d, s.h)
    } else {
        let n = s.len() + t.len() - 1;
        let size = n.next_power_of_two();
        let d = s.d;
        // Entrywise FFTs.
        let mut s_hat = vec![vec![C64::new(0.0, 0.0); size]; d * d];
        let mut t_hat = vec![vec![C64::new(0.0, 0.0); size]; d * d];
        for i in 0..d {
            for j in 0..d {
                for (k, m) in s.mats.iter().enumerate() {
                    s_hat[i * d + j][k] = m[(i, j)];
                }
                for (k, m) in t.mats.iter().enumerate() {
                    t_hat[i * d + j][k] = m[(i, j)];
                }
                forward_fft(&mut s_hat[i * d + j]);
                forward_fft(&mut t_hat[i * d + j]);
            }
        }
        // Pointwise matrix products; composition order is S on the left.
        let mut prod = vec![vec![C64::new(0.0, 0.0); size]; d * d];
        for w in 0..size {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..d {
                        acc += s_hat[i * d + l][w] * t_hat[l * d + j][w];
                    }
                    prod[i * d + j][w] = acc;
                }
            }
        }
        let mut mats = vec![DMatrix::zeros(d, d); n];
        for i in 0..d {
            for j in 0..d {
                inverse_fft(&mut prod[i * d + j]);
                for (k, mat) in mats.iter_mut().enumerate() {
                    mat[(i, j)] = prod[i * d + j][k] * s.h;
                }
            }
        }
        WienerElement { ident: C64::new(0.0, 0.0), h: s.h, start: s.start + t.start, mats, d }
    };
    // Identity cross terms.
    out = out.add_scaled(t, s.ident)?;
    out = out.add_scaled(s, t.ident)?;
    out.ident = s.ident * t.ident;
    Ok(out)
}

/// Reference O(n^2) convolution used as an independent oracle in tests.
pub fn convolve_direct(s: &WienerElement, t: &WienerElement) -> Result<WienerElement> {
    if s.d != t.d {
        return Err(Error::InvalidInput("element dimension mismatch".into()));
    }
    let mut out = if s.mats.is_empty() || t.mats.is_empty() {
        WienerElement::zero(s.d, s.h)
    } else {
        let n = s.len() + t.len() - 1;
        let mut mats = vec![DMatrix::zeros(s.d, s.d); n];
        for (a, ms) in s.mats.iter().enumerate() {
            for (b, mt) in t.mats.iter().enumerate() {
                mats[a + b] += ms * mt * C64::new(s.h, 0.0);
            }
        }
        WienerElement { ident: C64::new(0.0, 0.0), h: s.h, start: s.start + t.start, mats, d: s.d }
    };
    out = out.add_scaled(t, s.ident)?;
    out = out.add_scaled(s, t.ident)?;
    out.ident = s.ident * t.ident;
    Ok(out)
}

/// N-fold convolution power of the sample part.
pub fn power(t: &WienerElement, n: usize) -> Result<WienerElement> {
    if n == 0 {
        return Err(Error::InvalidInput("power requires N >= 1".into()));
    }
    let mut acc = t.clone();
    for _ in 1..n {
        acc = convolve(&acc, t)?;
    }
    Ok(acc)
}

/// Deterministic random element for self-tests: `nnz` sparse sites on
/// [-extent, extent] with entries of unit scale.
pub fn random_element(seed: u64, d: usize, h: f64, extent: f64, nnz: usize) -> WienerElement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = (extent / h).floor() as i64;
    let len = (2 * half + 1) as usize;
    let mut mats = vec![DMatrix::zeros(d, d); len];
    for _ in 0..nnz {
        let k = rng.random_range(0..len);
        let i = rng.random_range(0..d);
        let j = rng.random_range(0..d);
        mats[k][(i, j)] += C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    WienerElement { ident: C64::new(0.0, 0.0), h, start: -half, mats, d }
}

/// Gaussian scalar profile with unit-lattice mass `mass` and width sigma.
pub fn gaussian_profile(h: f64, sigma: f64, mass: f64, extent: f64) -> WienerElement {
    let half = (extent / h).ceil() as i64;
    let mut vals: Vec<C64> = Vec::with_capacity((2 * half + 1) as usize);
    for k in -half..=half {
        let rho = k as f64 * h;
        vals.push(C64::new((-rho * rho / (2.0 * sigma * sigma)).exp(), 0.0));
    }
    let raw: f64 = vals.iter().map(|v| v.re * h).sum();
    let c = mass / raw;
    for v in &mut vals {
        *v *= c;
    }
    WienerElement::scalar_profile(h, -half, &vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ghat(sigma: f64, mass: f64, lambda: f64) -> f64 {
        // Continuum transform of the unit-mass Gaussian profile.
        mass * (-sigma * sigma * lambda * lambda / 2.0).exp()
    }

    #[test]
    fn identity_is_neutral() {
        let t = random_element(7, 2, 0.1, 3.0, 40);
        let one = WienerElement::identity(C64::new(1.0, 0.0), 2, 0.1);
        let p = convolve(&one, &t).unwrap();
        assert_eq!(p.ident, t.ident);
        let diff = p.sub(&t).unwrap();
        assert!(diff.norm_total() < 1e-14);
        let q = convolve(&t, &one).unwrap();
        assert!(q.sub(&t).unwrap().norm_total() < 1e-14);
    }

    #[test]
    fn gaussian_pair_fourier_squares() {
        let h = 0.05;
        let g = gaussian_profile(h, 1.0, 1.0, 10.0);
        let gg = convolve(&g, &g).unwrap();
        for lambda in [0.0, 0.5, 1.3, 2.0] {
            let got = gg.fourier(lambda).unwrap()[(0, 0)];
            let want = ghat(1.0, 1.0, lambda).powi(2);
            assert!((got.re - want).abs() < 1e-6, "lambda {lambda}: {got} vs {want}");
            assert!(got.im.abs() < 1e-9);
        }
    }

    #[test]
    fn fft_convolution_matches_direct_oracle() {
        let s = random_element(11, 2, 0.25, 2.0, 25);
        let t = random_element(12, 2, 0.25, 3.0, 30);
        let fast = convolve(&s, &t).unwrap();
        let slow = convolve_direct(&s, &t).unwrap();
        let diff = fast.sub(&slow).unwrap();
        assert!(diff.w_norm() < 1e-12 * (1.0 + slow.w_norm()));
        assert_eq!(fast.start, slow.start);
    }

    #[test]
    fn fourier_trivial_and_guard() {
        let z = WienerElement::zero(3, 0.1);
        let m = z.fourier(2.0).unwrap();
        assert!(m.iter().all(|v| v.norm() == 0.0));
        let t = random_element(3, 1, 0.5, 2.0, 5);
        assert!(t.fourier(7.0).is_err(), "Nyquist guard");
    }

    #[test]
    fn symbol_bound_on_many_elements() {
        // sup over lambda of the symbol's column-sum norm never exceeds the
        // W-norm: 100 seeded elements, 64 lambda samples each.
        for seed in 0..100u64 {
            let t = random_element(seed, 2, 0.25, 2.0, 8);
            let wn = t.w_norm();
            for k in 0..64 {
                let lam = -12.0 + 24.0 * k as f64 / 63.0;
                let sym = t.fourier(lam).unwrap();
                let mut colmax = 0.0f64;
                for j in 0..2 {
                    colmax = colmax.max((0..2).map(|i| sym[(i, j)].norm()).sum());
                }
                assert!(colmax <= wn + 1e-10, "seed {seed} lambda {lam}: {colmax} vs {wn}");
            }
        }
    }

    #[test]
    fn riemann_lebesgue_for_smooth_profiles() {
        let h = 0.1;
        let g = gaussian_profile(h, 1.0, 1.0, 8.0);
        let at0 = g.fourier(0.0).unwrap().norm();
        let lam_max = 0.9 * std::f64::consts::PI / h;
        let hi = g.fourier(lam_max).unwrap().norm();
        assert!(hi < 0.1 * at0, "large-lambda decay: {hi} vs {at0}");
    }

    #[test]
    fn c1_profiles() {
        let h = 0.05;
        let g = gaussian_profile(h, 1.0, 1.0, 8.0);
        let prof = g.check_c1(&[0.0, h, 4.0 * h, 16.0 * h]).unwrap();
        assert_eq!(prof[0].1, 0.0);
        // Mean-value oracle: modulus(delta) <= delta * total variation.
        let tv: f64 = g
            .mats
            .windows(2)
            .map(|w| (w[1][(0, 0)] - w[0][(0, 0)]).norm())
            .sum::<f64>()
            + g.mats[0][(0, 0)].norm()
            + g.mats[g.len() - 1][(0, 0)].norm();
        for (delta, v) in &prof[1..] {
            assert!(*v <= delta * tv * (1.0 + 1e-12), "delta {delta}: {v} vs {}", delta * tv);
        }
        // Single-cell spike: no continuity, modulus(h) = 2 * W-norm exactly.
        let spike = WienerElement::scalar_profile(h, 0, &[C64::new(3.0, 0.0)]);
        let sp = spike.check_c1(&[h]).unwrap();
        assert_relative_eq!(sp[0].1, 2.0 * spike.w_norm(), epsilon = 1e-14);
        // Non-lattice delta refused.
        assert!(g.check_c1(&[0.5 * h]).is_err());
    }

    #[test]
    fn c2_profiles() {
        let h = 0.05;
        let g = gaussian_profile(h, 1.0, 1.0, 12.0);
        let prof = g.check_c2(&[1.0, 2.0]).unwrap();
        assert!(prof[1].1 < 0.3 * prof[0].1, "gaussian tail ratio: {:?}", prof);
        // Compact support: tail beyond the support is exactly zero.
        let spike = WienerElement::scalar_profile(h, 4, &[C64::new(1.0, 0.0)]);
        let sp = spike.check_c2(&[1.0]).unwrap();
        assert_eq!(sp[0].1, 0.0);
        let zero = WienerElement::zero(1, h);
        assert_eq!(zero.check_c2(&[0.5]).unwrap()[0].1, 0.0);
    }

    #[test]
    fn power_basics_and_smoothing() {
        let h = 0.05;
        let g = gaussian_profile(h, 0.8, 1.0, 8.0);
        let p1 = power(&g, 1).unwrap();
        assert!(p1.sub(&g).unwrap().norm_total() == 0.0);
        let p2 = power(&g, 2).unwrap();
        let direct = convolve(&g, &g).unwrap();
        assert!(p2.sub(&direct).unwrap().w_norm() < 1e-14);
        assert!(power(&g, 0).is_err());

        // Spike family: entry (1,2) a lattice delta (no translation
        // continuity), entry (2,1) smooth. The fourth power is smooth and
        // its C1 modulus decays linearly in delta.
        let d = 2;
        let half = (6.0 / h) as i64;
        let mut mats = vec![DMatrix::zeros(d, d); (2 * half + 1) as usize];
        let gg = gaussian_profile(h, 1.0, 1.0, 6.0);
        for (k, m) in gg.mats.iter().enumerate() {
            let idx = (gg.start + k as i64 + half) as usize;
            mats[idx][(1, 0)] = m[(0, 0)];
        }
        mats[half as usize][(0, 1)] = C64::new(1.0 / h, 0.0); // unit-mass lattice delta
        let t = WienerElement::from_samples(d, h, -half, mats).unwrap();
        // C1 fails for T itself: modulus at delta = h stays at full scale.
        let raw = t.check_c1(&[h]).unwrap()[0].1;
        assert!(raw > t.w_norm(), "spike keeps full modulus: {raw}");
        let t4 = power(&t, 4).unwrap();
        let m4 = t4.check_c1(&[h, 2.0 * h, 4.0 * h]).unwrap();
        let rate = m4[0].1 / h;
        for (delta, v) in &m4 {
            assert!(*v <= 1.6 * rate * delta, "linear modulus: {delta} -> {v}");
        }
    }

    #[test]
    fn json_roundtrip() {
        let t = random_element(5, 2, 0.125, 2.0, 20);
        let j = t.to_json();
        let r = WienerElement::from_json(&j).unwrap();
        assert_eq!(t.start, r.start);
        assert!(t.sub(&r).unwrap().norm_total() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn submultiplicative(seed1 in 0u64..1000, seed2 in 0u64..1000) {
            let s = random_element(seed1, 2, 0.2, 2.0, 15);
            let t = random_element(seed2, 2, 0.2, 2.0, 15);
            let p = convolve(&s, &t).unwrap();
            prop_assert!(p.w_norm() <= s.w_norm() * t.w_norm() * (1.0 + 1e-3) + 1e-12);
        }

        #[test]
        fn norm_axioms(seed1 in 0u64..1000, seed2 in 0u64..1000, a in -2.0f64..2.0) {
            let s = random_element(seed1, 2, 0.2, 2.0, 12);
            let t = random_element(seed2, 2, 0.2, 2.0, 12);
            let sum = s.add_scaled(&t, C64::new(1.0, 0.0)).unwrap();
            prop_assert!(sum.w_norm() <= s.w_norm() + t.w_norm() + 1e-12);
            let scaled = s.scale(C64::new(a, 0.0));
            prop_assert!((scaled.w_norm() - a.abs() * s.w_norm()).abs() <= 1e-12 * (1.0 + s.w_norm()));
        }

        #[test]
        fn symbol_bound_and_intertwining(seed1 in 0u64..500, seed2 in 0u64..500, lam in -10.0f64..10.0) {
            let s = random_element(seed1, 2, 0.2, 2.0, 10);
            let t = random_element(seed2, 2, 0.2, 2.0, 10);
            // sup_lambda column-sum norm of the symbol <= W-norm.
            let sym = t.fourier(lam).unwrap();
            let mut colmax = 0.0f64;
            for j in 0..2 {
                let c: f64 = (0..2).map(|i| sym[(i, j)].norm()).sum();
                colmax = colmax.max(c);
            }
            prop_assert!(colmax <= t.w_norm() + 1e-10);
            // fourier(convolve) = product of symbols.
            let p = convolve(&s, &t).unwrap();
            let lhs = p.fourier(lam).unwrap();
            let rhs = s.fourier(lam).unwrap() * t.fourier(lam).unwrap();
            let err = (lhs - rhs).iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            prop_assert!(err <= 1e-6 * (1.0 + s.w_norm() * t.w_norm()));
        }
    }
}
