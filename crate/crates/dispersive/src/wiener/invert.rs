//! Constructive inversion of 1 + T in the lattice algebra.
//!
//! The construction follows the two-stage route: a high-frequency Neumann
//! series in the mollified remainder S_L (with L found by doubling until
//! W-norm(S_L) < 1/2, falling back to a finite power T^N when T itself has
//! no translation continuity), plus per-window Neumann series around the
//! frozen symbol A = I + T^(c) on a partition of unity covering
//! [-2 L1, 2 L1]. Pieces are assembled on a padded circular lattice whose
//! wrap-around error is absorbed into the measured residual; the returned
//! log carries the achieved two-sided residual.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

use super::cutoff::{beta, eta, forward_fft, freq_lattice, inverse_fft};
use super::{convolve, CutoffProfile, WienerElement};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowLog {
    pub center: f64,
    pub width: f64,
    pub neumann_terms: usize,
    pub a0_cond: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertLog {
    pub l1: f64,
    /// Power N used by the high-frequency stage (1 when T itself suffices).
    pub power_n: usize,
    pub windows: Vec<WindowLog>,
    pub residual: f64,
    pub lattice_size: usize,
}

impl InvertLog {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "L1": self.l1,
            "power_n": self.power_n,
            "windows": self.windows.iter().map(|w| serde_json::json!({
                "center": w.center,
                "width": w.width,
                "neumann_terms": w.neumann_terms,
                "a0_cond": w.a0_cond,
            })).collect::<Vec<_>>(),
            "residual": self.residual,
            "lattice_size": self.lattice_size,
        })
    }
}

/// Circular-lattice symbol workspace.
struct Torus {
    n: usize,
    h: f64,
    d: usize,
    freqs: Vec<f64>,
}

impl Torus {
    fn new(n: usize, h: f64, d: usize) -> Self {
        Torus { n, h, d, freqs: freq_lattice(n, h) }
    }

    /// Symbol of an element on the torus frequencies: h * DFT of wrapped
    /// samples (plus the identity coefficient).
    fn symbol(&self, t: &WienerElement) -> Vec<DMatrix<C64>> {
        let d = self.d;
        let mut entry = vec![vec![C64::new(0.0, 0.0); self.n]; d * d];
        for (k, m) in t.mats.iter().enumerate() {
            let idx = (t.start + k as i64).rem_euclid(self.n as i64) as usize;
            for i in 0..d {
                for j in 0..d {
                    entry[i * d + j][idx] += m[(i, j)];
                }
            }
        }
        for e in entry.iter_mut() {
            forward_fft(e);
        }
        (0..self.n)
            .map(|m| {
                DMatrix::from_fn(d, d, |i, j| {
                    entry[i * d + j][m] * self.h
                        + if i == j { t.ident } else { C64::new(0.0, 0.0) }
                })
            })
            .collect()
    }

    /// Samples (in wrap order) of the element with the given sample-part
    /// symbol.
    fn samples(&self, symbol: &[DMatrix<C64>]) -> Vec<DMatrix<C64>> {
        let d = self.d;
        let mut entry = vec![vec![C64::new(0.0, 0.0); self.n]; d * d];
        for (m, mat) in symbol.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    entry[i * d + j][m] = mat[(i, j)];
                }
            }
        }
        for e in entry.iter_mut() {
            inverse_fft(e);
        }
        (0..self.n)
            .map(|k| DMatrix::from_fn(d, d, |i, j| entry[i * d + j][k] / self.h))
            .collect()
    }

    fn w_norm_of_symbol(&self, symbol: &[DMatrix<C64>]) -> f64 {
        let samples = self.samples(symbol);
        let mut col = vec![0.0f64; self.d];
        for m in &samples {
            for j in 0..self.d {
                for i in 0..self.d {
                    col[j] += m[(i, j)].norm();
                }
            }
        }
        col.iter().fold(0.0f64, |a, c| a.max(c * self.h))
    }

    /// Linear-lattice element covering [-n/2, n/2) from wrap-ordered samples.
    fn element(&self, symbol: &[DMatrix<C64>]) -> WienerElement {
        let samples = self.samples(symbol);
        let half = self.n / 2;
        let mut mats = Vec::with_capacity(self.n);
        for k in 0..self.n {
            let idx = (k as i64 - half as i64).rem_euclid(self.n as i64) as usize;
            mats.push(samples[idx].clone());
        }
        WienerElement {
            ident: C64::new(0.0, 0.0),
            h: self.h,
            start: -(half as i64),
            mats,
            d: self.d,
        }
    }
}

fn col_norm(m: &DMatrix<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        let c: f64 = (0..m.nrows()).map(|i| m[(i, j)].norm()).sum();
        best = best.max(c);
    }
    best
}

fn min_singular(m: &DMatrix<C64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, s| a.min(*s))
}

/// Invert 1 + T constructively. `lambda_grid` is checked for symbol
/// invertibility (min singular value >= tol) in addition to the full
/// lattice frequency grid; `eps_target` is the required two-sided residual
/// W-norm((1+S)*(1+T) - 1).
pub fn invert(
    t: &WienerElement,
    cutoff: &CutoffProfile,
    lambda_grid: &[f64],
    tol: f64,
    eps_target: f64,
) -> Result<(WienerElement, InvertLog)> {
    if tol <= 0.0 || eps_target <= 0.0 {
        return Err(Error::InvalidInput("tol and eps_target must be positive".into()));
    }
    if t.w_norm() == 0.0 && t.ident.norm() == 0.0 {
        return Ok((
            WienerElement::zero(t.d, t.h),
            InvertLog { l1: 0.0, power_n: 1, windows: vec![], residual: 0.0, lattice_size: 0 },
        ));
    }
    if t.ident.norm() != 0.0 {
        return Err(Error::InvalidInput(
            "invert expects a pure sample element T; the identity is adjoined internally".into(),
        ));
    }
    // User-supplied frequency checks.
    for &lam in lambda_grid {
        let sym = t.fourier(lam)?;
        let a = DMatrix::identity(t.d, t.d) + sym;
        let s = min_singular(&a);
        if s < tol {
            return Err(Error::SpectralObstruction {
                lambda: lam,
                detail: format!("min singular value {s:.3e} below tol {tol:.3e}"),
            });
        }
    }

    let ext = t
        .rho_values()
        .iter()
        .fold(t.h, |a, r| a.max(r.abs()))
        .max(t.h);
    let mut n = ((8.0 * ext / t.h).ceil() as usize).next_power_of_two().max(512);
    let mut best: Option<InvertLog> = None;
    let mut last_err: Option<Error> = None;
    while n <= (1 << 20) {
        match invert_on_torus(t, cutoff, tol, eps_target, ext, n) {
            Ok((s, log)) => {
                if log.residual <= eps_target {
                    return Ok((s, log));
                }
                if best.as_ref().map(|bl| log.residual < bl.residual).unwrap_or(true) {
                    best = Some(log);
                }
            }
            Err(e @ Error::Resolution(_)) | Err(e @ Error::Divergence(_)) => {
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
        n *= 2;
    }
    match (best, last_err) {
        (Some(log), _) => Err(Error::Resolution(format!(
            "inversion residual {:.3e} did not reach eps_target {:.3e}",
            log.residual, eps_target
        ))),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::Divergence("inversion failed on all lattice sizes".into())),
    }
}

fn invert_on_torus(
    t: &WienerElement,
    cutoff: &CutoffProfile,
    tol: f64,
    eps_target: f64,
    ext: f64,
    n: usize,
) -> Result<(WienerElement, InvertLog)> {
    let d = t.d;
    let h = t.h;
    let torus = Torus::new(n, h, d);
    let t_hat = torus.symbol(t);
    let eye = DMatrix::<C64>::identity(d, d);

    // Symbol invertibility across the whole lattice frequency grid.
    let sing: Vec<f64> = t_hat.par_iter().map(|s| min_singular(&(&eye + s))).collect();
    if let Some((m, s)) = sing
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
    {
        if *s < tol {
            return Err(Error::SpectralObstruction {
                lambda: torus.freqs[m],
                detail: format!("min singular value {s:.3e} below tol {tol:.3e}"),
            });
        }
    }

    // Stage 1: find a power N and scale L1 with W-norm(S_L) < 1/2.
    // The fallback factorization is
    //   (I + T^)^-1 = (I - (-T^)^N)^-1 sum_{k<N} (-T^)^k,
    // so the mollified stage runs on the element with symbol -(-T^)^N.
    // Search floor per the ledger: 1/rho_max, or the profile's scale if the
    // caller tabulated one coarser than that.
    let l_cap = (65536.0 / ext).min(std::f64::consts::PI / (4.0 * h));
    let l_floor = (1.0 / ext).max(cutoff.l_scale.min(1.0 / t.h)).min(l_cap);
    let mut chosen: Option<(usize, f64, Vec<DMatrix<C64>>)> = None;
    'power: for n_pow in 1..=8usize {
        // base_hat = -(-T^)^N per frequency.
        let base_hat: Vec<DMatrix<C64>> = t_hat
            .par_iter()
            .map(|s| {
                let neg = s * C64::new(-1.0, 0.0);
                let mut p = neg.clone();
                for _ in 1..n_pow {
                    p = &p * &neg;
                }
                p * C64::new(-1.0, 0.0)
            })
            .collect();
        if n_pow > 1 {
            // The factorization needs I + base invertible too.
            let ok = base_hat
                .par_iter()
                .all(|b| min_singular(&(&eye + b)) >= 0.5 * tol);
            if !ok {
                continue 'power;
            }
        }
        let mut l = l_floor;
        while l <= l_cap {
            let masked: Vec<DMatrix<C64>> = base_hat
                .iter()
                .zip(&torus.freqs)
                .map(|(b, lam)| b * C64::new(1.0 - eta(lam / l), 0.0))
                .collect();
            if torus.w_norm_of_symbol(&masked) < 0.45 {
                chosen = Some((n_pow, l, base_hat));
                break 'power;
            }
            l *= 2.0;
        }
    }
    let (power_n, l1, base_hat) = chosen.ok_or_else(|| {
        Error::Divergence(
            "stage 1 mollification never reached W-norm < 1/2 for T^N, N <= 8".into(),
        )
    })?;
    // Windows must stay inside the lattice Nyquist range.
    if 2.0 * l1 >= 0.9 * std::f64::consts::PI / h {
        return Err(Error::Resolution(
            "spectral extent of T exceeds the lattice Nyquist budget".into(),
        ));
    }

    // High-frequency Neumann series in S_L1.
    let s_l1_hat: Vec<DMatrix<C64>> = base_hat
        .iter()
        .zip(&torus.freqs)
        .map(|(b, lam)| b * C64::new(1.0 - eta(lam / l1), 0.0))
        .collect();
    let tau_hf = eps_target / 20.0;
    let mut cur = s_l1_hat.clone();
    let mut acc: Vec<DMatrix<C64>> = vec![DMatrix::zeros(d, d); n];
    let mut sign = -1.0;
    let mut hf_terms = 0usize;
    loop {
        hf_terms += 1;
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += c * C64::new(sign, 0.0);
        }
        let nrm = torus.w_norm_of_symbol(&cur);
        if nrm < tau_hf {
            break;
        }
        if hf_terms >= 200 {
            return Err(Error::Divergence("high-frequency Neumann series exceeded 200 terms".into()));
        }
        cur = cur
            .par_iter()
            .zip(&s_l1_hat)
            .map(|(c, s)| c * s)
            .collect();
        sign = -sign;
    }
    // hf symbol: (1 - eta(lambda / 2 L1)) (I + acc) [* sum_{k<N} (-T^)^k].
    let mut hf_hat: Vec<DMatrix<C64>> = acc
        .par_iter()
        .zip(&torus.freqs)
        .map(|(a, lam)| (&eye + a) * C64::new(1.0 - eta(lam / (2.0 * l1)), 0.0))
        .collect();
    if power_n > 1 {
        hf_hat = hf_hat
            .par_iter()
            .zip(&t_hat)
            .map(|(hf, s)| {
                let neg = s * C64::new(-1.0, 0.0);
                let mut sum = eye.clone();
                let mut p = eye.clone();
                for _ in 1..power_n {
                    p = &p * &neg;
                    sum += &p;
                }
                hf * sum
            })
            .collect();
    }

    // Stage 2: windows on a partition of unity covering [-2 L1, 2 L1].
    let dl = 2.0 * std::f64::consts::PI / (n as f64 * h);
    let mut l_loc = l1;
    let mut windows_final: Option<(f64, f64, Vec<(i64, DMatrix<C64>, f64)>)> = None;
    'lsearch: for _ in 0..40 {
        let s_steps = (l_loc / 2.0 / dl).floor().max(1.0);
        let s_width = s_steps * dl;
        if s_steps < 4.0 {
            return Err(Error::Resolution(format!(
                "window width underflow: {s_width:.3e} below 4 lattice frequency bins"
            )));
        }
        let j_max = (2.0 * l1 / s_width).ceil() as i64 + 1;
        // Per-window contraction test.
        let mut wins = Vec::new();
        for j in -j_max..=j_max {
            let center = j as f64 * s_width;
            let m_c = (j * s_steps as i64).rem_euclid(n as i64) as usize;
            let a = &eye + &t_hat[m_c];
            let a_inv = a.clone().try_inverse().ok_or_else(|| Error::ConditionFailure(
                format!("window symbol at lambda = {center} not invertible"),
            ))?;
            let gain = col_norm(&a_inv);
            wins.push((j, center, a_inv, gain));
        }
        let checks: Vec<bool> = wins
            .par_iter()
            .map(|(_, center, _, gain)| {
                let s_hat: Vec<DMatrix<C64>> = t_hat
                    .iter()
                    .zip(&torus.freqs)
                    .map(|(s, lam)| {
                        let w = eta((lam - center) / l_loc);
                        if w == 0.0 {
                            DMatrix::zeros(d, d)
                        } else {
                            (s - &t_hat[((center / dl).round() as i64).rem_euclid(n as i64) as usize])
                                * C64::new(w, 0.0)
                        }
                    })
                    .collect();
                torus.w_norm_of_symbol(&s_hat) * gain < 0.5
            })
            .collect();
        if checks.iter().all(|ok| *ok) {
            windows_final = Some((
                l_loc,
                s_width,
                wins.into_iter().map(|(j, _, ai, g)| (j, ai, g)).collect(),
            ));
            break 'lsearch;
        }
        l_loc /= 2.0;
    }
    let (l_loc, s_width, wins) = windows_final.ok_or_else(|| {
        Error::Resolution("window contraction not reached before width underflow".into())
    })?;
    let s_steps = (s_width / dl).round() as i64;

    let tau_w = eps_target / (20.0 * ((wins.len() + 1) as f64).sqrt());
    let window_results: Vec<Result<(Vec<(usize, DMatrix<C64>)>, WindowLog)>> = wins
        .par_iter()
        .map(|(j, a_inv, gain)| {
            let center = *j as f64 * s_width;
            let m_c = (j * s_steps).rem_euclid(n as i64) as usize;
            // Mollified local remainder symbol.
            let s_hat: Vec<DMatrix<C64>> = t_hat
                .iter()
                .zip(&torus.freqs)
                .map(|(s, lam)| {
                    let w = eta((lam - center) / l_loc);
                    if w == 0.0 {
                        DMatrix::zeros(d, d)
                    } else {
                        (s - &t_hat[m_c]) * C64::new(w, 0.0)
                    }
                })
                .collect();
            // Neumann series sum_k (-1)^k (S A^-1)^k, k >= 1.
            let mut cur: Vec<DMatrix<C64>> = s_hat.iter().map(|s| s * a_inv).collect();
            let mut acc: Vec<DMatrix<C64>> = vec![DMatrix::zeros(d, d); n];
            let mut sign = -1.0;
            let mut terms = 0usize;
            loop {
                terms += 1;
                for (a, c) in acc.iter_mut().zip(&cur) {
                    *a += c * C64::new(sign, 0.0);
                }
                if torus.w_norm_of_symbol(&cur) < tau_w {
                    break;
                }
                if terms >= 200 {
                    return Err(Error::Divergence(format!(
                        "window at lambda = {center}: Neumann series exceeded 200 terms"
                    )));
                }
                cur = cur.iter().zip(&s_hat).map(|(c, s)| c * s * a_inv).collect();
                sign = -sign;
            }
            // phi_j(lambda) (A^-1 + A^-1 acc): collect only touched bins.
            let mut bins = Vec::new();
            for (m, lam) in torus.freqs.iter().enumerate() {
                let phi = eta(lam / (2.0 * l1)) * beta((lam - center) / s_width);
                if phi == 0.0 {
                    continue;
                }
                let val = (a_inv + a_inv * &acc[m]) * C64::new(phi, 0.0);
                bins.push((m, val));
            }
            Ok((
                bins,
                WindowLog {
                    center,
                    width: s_width,
                    neumann_terms: terms,
                    a0_cond: gain * col_norm(&(&eye + &t_hat[m_c])),
                },
            ))
        })
        .collect();

    let mut total_hat = hf_hat;
    let mut window_logs = Vec::new();
    for r in window_results {
        let (bins, log) = r?;
        for (m, val) in bins {
            total_hat[m] += val;
        }
        window_logs.push(log);
    }

    // S symbol = total - I; back to a linear-lattice element.
    let s_sym: Vec<DMatrix<C64>> = total_hat.par_iter().map(|m| m - &eye).collect();
    let s_el = torus.element(&s_sym).trimmed(1e-300);

    // Two-sided residual through the genuine (non-circular) product.
    let one = WienerElement::identity(C64::new(1.0, 0.0), d, h);
    let one_plus_s = s_el.add_scaled(&one, C64::new(1.0, 0.0))?;
    let one_plus_t = t.add_scaled(&one, C64::new(1.0, 0.0))?;
    let right = convolve(&one_plus_s, &one_plus_t)?.sub(&one)?;
    let left = convolve(&one_plus_t, &one_plus_s)?.sub(&one)?;
    let residual = right.norm_total().max(left.norm_total());

    Ok((
        s_el.trimmed(1e-18),
        InvertLog {
            l1,
            power_n,
            windows: window_logs,
            residual,
            lattice_size: n,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wiener::{convolve_direct, gaussian_profile, random_element};

    fn cutoff() -> CutoffProfile {
        CutoffProfile::tabulate(1.0, 64, 0.1)
    }

    #[test]
    fn zero_inverts_to_zero() {
        let t = WienerElement::zero(2, 0.1);
        let (s, log) = invert(&t, &cutoff(), &[0.0], 1e-3, 1e-9).unwrap();
        assert_eq!(s.norm_total(), 0.0);
        assert_eq!(log.residual, 0.0);
    }

    #[test]
    fn contractive_gaussian_matches_neumann_oracle() {
        // d = 1 Gaussian with mass 0.5: plain Neumann conveges; the staged
        // construction must agree entrywise.
        let h = 0.125;
        let t = gaussian_profile(h, 1.0, 0.5, 8.0);
        let lambda_grid: Vec<f64> = (-40..=40).map(|k| k as f64 * 0.2).collect();
        let (s, log) = invert(&t, &cutoff(), &lambda_grid, 1e-2, 1e-6).unwrap();
        assert!(log.residual < 1e-6, "residual {}", log.residual);

        // Truncated Neumann oracle sum_{k=1..30} (-T)^k via the direct
        // O(n^2) convolution path.
        let mut oracle = t.scale(C64::new(-1.0, 0.0));
        let mut term = t.scale(C64::new(-1.0, 0.0));
        for _ in 1..30 {
            term = convolve_direct(&term, &t.scale(C64::new(-1.0, 0.0))).unwrap();
            oracle = oracle.add_scaled(&term, C64::new(1.0, 0.0)).unwrap();
        }
        let diff = s.sub(&oracle).unwrap();
        let mut max_entry = 0.0f64;
        for m in &diff.mats {
            max_entry = max_entry.max(m[(0, 0)].norm());
        }
        assert!(max_entry < 1e-6, "entrywise gap {max_entry}");

        // Pointwise symbol check: fourier(S) = (1 + T^)^-1 - 1.
        for lam in [0.0, 0.7, 2.0, 5.0] {
            let th = t.fourier(lam).unwrap()[(0, 0)];
            let sh = s.fourier(lam).unwrap()[(0, 0)];
            let want = (C64::new(1.0, 0.0) + th).inv() - 1.0;
            assert!((sh - want).norm() < 1e-6, "lambda {lam}: {sh} vs {want}");
        }
    }

    #[test]
    fn spectral_obstruction_is_reported() {
        // T with symbol hitting -1 at lambda = 0: ghat(0) = -1.
        let h = 0.1;
        let t = gaussian_profile(h, 1.0, -1.0, 8.0);
        let err = invert(&t, &cutoff(), &[0.0], 1e-3, 1e-6).unwrap_err();
        match err {
            Error::SpectralObstruction { lambda, .. } => assert!(lambda.abs() < 1e-9),
            e => panic!("expected spectral obstruction, got {e}"),
        }
    }

    #[test]
    fn power_fallback_handles_spike_elements() {
        // Entry (0,1) is a lattice delta (no C1 at N = 1), entry (1,0)
        // a smooth profile with mass 0.4; T^2 is smooth so stage 1 engages
        // through the factorization with N > 1.
        let h = 0.1;
        let g = gaussian_profile(h, 0.7, 0.4, 5.0);
        let half = (5.0 / h) as i64;
        let mut mats = vec![DMatrix::zeros(2, 2); (2 * half + 1) as usize];
        for (k, m) in g.mats.iter().enumerate() {
            mats[(g.start + k as i64 + half) as usize][(1, 0)] = m[(0, 0)];
        }
        mats[half as usize][(0, 1)] = C64::new(1.0 / h, 0.0);
        let t = WienerElement::from_samples(2, h, -half, mats).unwrap();
        let (s, log) = invert(&t, &cutoff(), &[0.0, 1.0, 5.0], 1e-2, 1e-4).unwrap();
        assert!(log.power_n > 1, "expected the power fallback, got N = {}", log.power_n);
        assert!(log.residual < 1e-4, "residual {}", log.residual);
        // Symbol consistency.
        for lam in [0.0, 1.0, 3.0] {
            let th = t.fourier(lam).unwrap();
            let sh = s.fourier(lam).unwrap();
            let eye = DMatrix::<C64>::identity(2, 2);
            let err = ((&eye + &th) * (&eye + &sh) - &eye)
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(err < 1e-3, "lambda {lam}: symbol residual {err}");
        }
    }

    #[test]
    fn random_contractive_elements_invert_two_sided() {
        for seed in [3u64, 17, 91] {
            let raw = random_element(seed, 2, 0.2, 2.0, 12);
            let t = raw.scale(C64::new(0.4 / raw.w_norm().max(1e-9), 0.0));
            let lambda_grid: Vec<f64> = (-10..=10).map(|k| k as f64 * 0.5).collect();
            let (s, log) = invert(&t, &cutoff(), &lambda_grid, 1e-3, 1e-5).unwrap();
            assert!(log.residual < 1e-5, "seed {seed}: residual {}", log.residual);
            let one = WienerElement::identity(C64::new(1.0, 0.0), 2, 0.2);
            let lhs = convolve(
                &s.add_scaled(&one, C64::new(1.0, 0.0)).unwrap(),
                &t.add_scaled(&one, C64::new(1.0, 0.0)).unwrap(),
            )
            .unwrap()
            .sub(&one)
            .unwrap();
            assert!(lhs.norm_total() < 1e-5);
        }
    }
}
