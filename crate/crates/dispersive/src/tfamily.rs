//! The spherical-means operator family T^-(rho):
//! T^-(rho) f(x) = V(x) / (4 pi rho) * integral of f over the sphere
//! |x - y| = rho, realized on a Cartesian box grid with trilinear
//! interpolation and a product sphere rule whose order grows linearly in
//! rho / h. rho-integrated quantities (the empirical W-norm, locality
//! tails, and the lambda-Fourier sums) are the certified outputs; single
//! slices are only building blocks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, QuadratureGrid, SphereRule};
use crate::potential::Potential;
use crate::resolvent::{birman_schwinger_apply, Sign};
use crate::C64;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RhoGrid {
    /// Uniform spacing; first node at h/2, so rho = 0 is excluded.
    pub h: f64,
    pub n: usize,
}

impl RhoGrid {
    pub fn new(h: f64, rho_max: f64) -> Result<Self> {
        if h <= 0.0 || rho_max <= h {
            return Err(Error::InvalidInput("rho grid needs h > 0 and rho_max > h".into()));
        }
        Ok(RhoGrid { h, n: (rho_max / h).ceil() as usize })
    }

    pub fn rho_max(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn node(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.node(k)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TSlice {
    pub rho: f64,
    pub image: Vec<f64>,
}

impl TSlice {
    pub fn l1_norm(&self, grid: &QuadratureGrid) -> f64 {
        self.image
            .iter()
            .zip(&grid.weights)
            .map(|(v, w)| v.abs() * w)
            .sum()
    }
}

/// Radius containing the numerically relevant part of a field.
fn field_reach(grid: &QuadratureGrid, f: &[f64]) -> f64 {
    let peak = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let mut reach = 0.0f64;
    for (p, v) in grid.nodes.iter().zip(f) {
        if v.abs() > 1e-13 * peak {
            reach = reach.max(p.norm());
        }
    }
    reach
}

/// Sphere-rule polar order for radius rho on spacing h: linear in rho / h,
/// with node spacing on the sphere staying near one grid cell.
fn sphere_order(rho: f64, h: f64, boost: usize) -> usize {
    (((3.0 * rho / h).ceil() as usize).clamp(6, 128)) * boost
}

/// One slice of the family: integrate f over spheres of radius rho around
/// every node where V is non-negligible, scale by V(x) / (4 pi rho).
pub fn apply_t(
    v: &Potential,
    grid: &QuadratureGrid,
    rho: f64,
    f: &[f64],
) -> Result<TSlice> {
    apply_t_with_boost(v, grid, rho, f, 1)
}

/// Same as `apply_t` with the sphere order multiplied by `boost`; boost > 1
/// serves as the independent higher-resolution oracle in tests.
pub fn apply_t_with_boost(
    v: &Potential,
    grid: &QuadratureGrid,
    rho: f64,
    f: &[f64],
    boost: usize,
) -> Result<TSlice> {
    if rho <= 0.0 {
        return Err(Error::InvalidInput("rho must be positive".into()));
    }
    if f.len() != grid.len() {
        return Err(Error::InvalidInput("field length differs from grid".into()));
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite field sample".into()));
    }
    let h = grid
        .box_spacing()
        .ok_or_else(|| Error::InvalidInput("spherical means need a Cartesian box grid".into()))?;
    let reach = field_reach(grid, f);
    let vmax = grid.nodes.iter().map(|p| v.eval(p).abs()).fold(0.0f64, f64::max);
    let p_order = sphere_order(rho, h, boost);
    let sphere = SphereRule::product(p_order, 2 * p_order);
    let scale = rho / (4.0 * std::f64::consts::PI);
    let image: Vec<f64> = grid
        .nodes
        .par_iter()
        .map(|x| {
            let vx = v.eval(x);
            if vx.abs() <= 1e-14 * vmax {
                return 0.0;
            }
            // The sphere around x misses the support of f entirely when
            // | |x| - rho | > reach.
            let r = x.norm();
            if (r - rho).abs() > reach {
                return 0.0;
            }
            let mut acc = 0.0;
            for (dir, w) in sphere.dirs.iter().zip(&sphere.weights) {
                acc += w * grid.trilinear(f, &x.add_scaled(dir, rho));
            }
            vx * scale * acc
        })
        .collect();
    Ok(TSlice { rho, image })
}

/// All slices of the family over the rho grid.
pub fn t_slices(
    v: &Potential,
    grid: &QuadratureGrid,
    rho_grid: &RhoGrid,
    f: &[f64],
) -> Result<Vec<TSlice>> {
    (0..rho_grid.n)
        .into_par_iter()
        .map(|k| apply_t(v, grid, rho_grid.node(k), f))
        .collect()
}

/// Empirical W-norm lower bound: max over probes of
/// sum_rho h * ||T(rho) f||_L1. Probes must be unit-L1 fields.
pub fn wiener_norm(
    v: &Potential,
    grid: &QuadratureGrid,
    rho_grid: &RhoGrid,
    probes: &[Vec<f64>],
) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("empty probe set".into()));
    }
    let mut best = 0.0f64;
    for f in probes {
        let slices = t_slices(v, grid, rho_grid, f)?;
        let total: f64 = slices.iter().map(|s| s.l1_norm(grid) * rho_grid.h).sum();
        best = best.max(total);
    }
    Ok(best)
}

/// Tail mass beyond R: max over probes of sum_{rho > R} h * ||T(rho) f||_L1.
pub fn locality_tail(
    v: &Potential,
    grid: &QuadratureGrid,
    rho_grid: &RhoGrid,
    r: f64,
    probes: &[Vec<f64>],
) -> Result<f64> {
    if r >= rho_grid.rho_max() {
        return Err(Error::InvalidInput("R must lie below rho_max".into()));
    }
    if probes.is_empty() {
        return Err(Error::InvalidInput("empty probe set".into()));
    }
    let mut best = 0.0f64;
    for f in probes {
        let slices = t_slices(v, grid, rho_grid, f)?;
        let total: f64 = slices
            .iter()
            .filter(|s| s.rho > r)
            .map(|s| s.l1_norm(grid) * rho_grid.h)
            .sum();
        best = best.max(total);
    }
    Ok(best)
}

/// Interaction reach of V and f on this grid: the largest |x - y| with
/// x in supp V and y in supp f.
pub fn interaction_reach(v: &Potential, grid: &QuadratureGrid, f: &[f64]) -> f64 {
    v.support_radius().min(grid.support_radius) + field_reach(grid, f)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub lambda: f64,
    pub residual: f64,
    pub h_rho: f64,
    pub rho_max: f64,
}

/// Relative L1 residual between the lambda-Fourier sum of the slices and
/// the direct Nystrom application of V R0^-(lambda^2) to f.
pub fn fourier_consistency(
    v: &Potential,
    grid: &QuadratureGrid,
    rho_grid: &RhoGrid,
    lambda: f64,
    f: &[f64],
) -> Result<ConsistencyReport> {
    // Beyond the interaction reach the slices vanish identically (compact
    // supports), so the wavelength guard only needs a capped margin.
    let reach = interaction_reach(v, grid, f);
    let guard = if lambda == 0.0 {
        0.0
    } else {
        (2.0 * std::f64::consts::PI / lambda.abs()).min(0.25 * reach)
    } + 2.0 * rho_grid.h;
    if rho_grid.rho_max() < reach + guard {
        return Err(Error::Resolution(format!(
            "rho_max {} below interaction reach {} plus guard {}",
            rho_grid.rho_max(),
            reach,
            guard
        )));
    }
    if lambda.abs() * rho_grid.h >= 0.25 {
        return Err(Error::Resolution(format!(
            "|lambda| h_rho = {} violates the 1/4 sampling guard",
            lambda.abs() * rho_grid.h
        )));
    }
    let slices = t_slices(v, grid, rho_grid, f)?;
    let n = grid.len();
    let mut lhs = vec![C64::new(0.0, 0.0); n];
    for s in &slices {
        let ph = -lambda * s.rho;
        let w = C64::new(ph.cos(), ph.sin()) * rho_grid.h;
        for (acc, val) in lhs.iter_mut().zip(&s.image) {
            *acc += w * val;
        }
    }
    let fc: Vec<C64> = f.iter().map(|x| C64::new(*x, 0.0)).collect();
    let rhs = birman_schwinger_apply(v, grid, lambda, Sign::Minus, &fc)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        num += (lhs[i] - rhs[i]).norm() * grid.weights[i];
        den += f[i].abs() * grid.weights[i];
    }
    if den == 0.0 {
        return Err(Error::InvalidInput("zero probe".into()));
    }
    Ok(ConsistencyReport {
        lambda,
        residual: num / den,
        h_rho: rho_grid.h,
        rho_max: rho_grid.rho_max(),
    })
}

/// Narrow L1-normalized bump on the grid, hard-truncated at 1e-8 of its
/// peak so the support metadata stays tight.
pub fn near_delta_probe(grid: &QuadratureGrid, center: &Point3, sigma: f64) -> Vec<f64> {
    let mut f: Vec<f64> = grid
        .nodes
        .iter()
        .map(|p| {
            let g = (-p.dist(center).powi(2) / (2.0 * sigma * sigma)).exp();
            if g < 1e-8 {
                0.0
            } else {
                g
            }
        })
        .collect();
    let mass: f64 = f.iter().zip(&grid.weights).map(|(v, w)| v * w).sum();
    for v in &mut f {
        *v /= mass;
    }
    f
}

/// Probe corpus: near-delta bumps at the Kato argmax center and six lattice
/// centers, plus one smooth global bump.
pub fn default_probes(
    v: &Potential,
    grid: &QuadratureGrid,
    argmax_center: &Point3,
) -> Vec<Vec<f64>> {
    let h = grid.box_spacing().unwrap_or(grid.support_radius / 16.0);
    let sigma = 0.7 * h;
    let s = 0.5 * v.support_radius();
    let mut probes = vec![near_delta_probe(grid, argmax_center, sigma)];
    for axis in [
        Point3::new(s, 0.0, 0.0),
        Point3::new(-s, 0.0, 0.0),
        Point3::new(0.0, s, 0.0),
        Point3::new(0.0, -s, 0.0),
        Point3::new(0.0, 0.0, s),
        Point3::new(0.0, 0.0, -s),
    ] {
        probes.push(near_delta_probe(grid, &axis, sigma));
    }
    probes.push(near_delta_probe(grid, &Point3::ZERO, 0.5 * v.support_radius().max(h)));
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{default_centers, kato_norm};

    fn unit_well() -> Potential {
        Potential::SquareWell { depth: 1.0, radius: 1.0 }
    }

    fn test_box() -> QuadratureGrid {
        QuadratureGrid::cartesian_box(2.0, 16)
    }

    #[test]
    fn zero_field_gives_zero_slice() {
        let v = unit_well();
        let grid = test_box();
        let f = vec![0.0; grid.len()];
        let s = apply_t(&v, &grid, 0.8, &f).unwrap();
        assert!(s.image.iter().all(|x| *x == 0.0));
        assert!(apply_t(&v, &grid, 0.0, &f).is_err());
    }

    #[test]
    fn slice_matches_higher_resolution_oracle() {
        let v = unit_well();
        let grid = test_box();
        let f = near_delta_probe(&grid, &Point3::ZERO, 0.2);
        let rho = 0.7;
        let base = apply_t(&v, &grid, rho, &f).unwrap();
        let oracle = apply_t_with_boost(&v, &grid, rho, &f, 4).unwrap();
        // Compare at nodes with |x| ~ rho where the sphere sees the bump.
        let mut checked = 0;
        for (i, p) in grid.nodes.iter().enumerate() {
            if (p.norm() - rho).abs() < 0.1 && oracle.image[i].abs() > 1e-3 {
                let rel = (base.image[i] - oracle.image[i]).abs() / oracle.image[i].abs();
                assert!(rel < 0.08, "node {i}: {} vs {}", base.image[i], oracle.image[i]);
                checked += 1;
            }
        }
        assert!(checked > 10, "oracle comparison exercised {checked} nodes");
    }

    #[test]
    fn mass_bound_and_wiener_norm() {
        let v = unit_well();
        let grid = test_box();
        let rho_grid = RhoGrid::new(0.1, 4.5).unwrap();
        let probe = near_delta_probe(&grid, &Point3::ZERO, 0.12);
        // Total mass bound with Kato norm 2 pi.
        let total = wiener_norm(&v, &grid, &rho_grid, &[probe.clone()]).unwrap();
        let bound = 2.0 * std::f64::consts::PI / (4.0 * std::f64::consts::PI);
        assert!(total <= bound * 1.02, "mass {total} vs bound {bound}");
        // Near-delta at the argmax saturates: within [0.9, 1.0] x bound.
        assert!(total >= 0.9 * bound, "saturation {total} vs {bound}");
        // Empty probe set refused.
        assert!(wiener_norm(&v, &grid, &rho_grid, &[]).is_err());
    }

    #[test]
    fn wiener_norm_bound_all_probes() {
        let v = unit_well();
        let grid = test_box();
        let kgrid = v.default_grid(128, 17);
        let centers = default_centers(&v, &kgrid);
        let kato = kato_norm(&v, &kgrid, &centers).unwrap();
        let rho_grid = RhoGrid::new(0.1, 4.5).unwrap();
        let probes = default_probes(&v, &grid, &Point3::ZERO);
        let wn = wiener_norm(&v, &grid, &rho_grid, &probes).unwrap();
        assert!(
            wn <= kato / (4.0 * std::f64::consts::PI) * 1.02,
            "wiener norm {wn} vs kato/4pi {}",
            kato / (4.0 * std::f64::consts::PI)
        );
    }

    #[test]
    fn scaling_transports_wiener_norm() {
        let v = unit_well();
        let grid = test_box();
        let rho_grid = RhoGrid::new(0.1, 4.5).unwrap();
        let probe = near_delta_probe(&grid, &Point3::ZERO, 0.12);
        let base = wiener_norm(&v, &grid, &rho_grid, &[probe]).unwrap();
        // r = 2: half the lengths, same node count, transported probe.
        let r = 2.0;
        let vr = v.scaled(r);
        let grid_r = QuadratureGrid::cartesian_box(2.0 / r, 16);
        let rho_r = RhoGrid::new(0.1 / r, 4.5 / r).unwrap();
        let probe_r = near_delta_probe(&grid_r, &Point3::ZERO, 0.12 / r);
        let scaled = wiener_norm(&vr, &grid_r, &rho_r, &[probe_r]).unwrap();
        assert!(
            (scaled - base).abs() / base < 0.02,
            "scaled {scaled} vs base {base}"
        );
    }

    #[test]
    fn linearity_is_exact() {
        let v = unit_well();
        let grid = test_box();
        let f = near_delta_probe(&grid, &Point3::new(0.3, 0.0, 0.0), 0.2);
        let g = near_delta_probe(&grid, &Point3::new(0.0, -0.4, 0.2), 0.25);
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let sa = apply_t(&v, &grid, 0.9, &combo).unwrap();
        let sf = apply_t(&v, &grid, 0.9, &f).unwrap();
        let sg = apply_t(&v, &grid, 0.9, &g).unwrap();
        for i in 0..grid.len() {
            let want = 2.0 * sf.image[i] - 0.5 * sg.image[i];
            assert!((sa.image[i] - want).abs() <= 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn locality_tails() {
        let v = unit_well();
        let grid = test_box();
        let rho_grid = RhoGrid::new(0.1, 4.5).unwrap();
        let probe = near_delta_probe(&grid, &Point3::new(0.5, 0.0, 0.0), 0.15);
        // Probe inside |y| <= 1, R = 3: spheres of radius > 3 from
        // supp V cannot meet it.
        let tail = locality_tail(&v, &grid, &rho_grid, 3.0, &[probe.clone()]).unwrap();
        assert_eq!(tail, 0.0);
        // Zero potential.
        let v0 = Potential::SquareWell { depth: 0.0, radius: 1.0 };
        assert_eq!(locality_tail(&v0, &grid, &rho_grid, 1.0, &[probe]).unwrap(), 0.0);
        // Gaussian tail halves (at least) from R = 5 to R = 10.
        let g = Potential::Gaussian { amplitude: 1.0, width: 1.5 };
        let ggrid = QuadratureGrid::cartesian_box(6.0, 24);
        let grho = RhoGrid::new(0.25, 14.0).unwrap();
        let gp = near_delta_probe(&ggrid, &Point3::ZERO, 0.4);
        let t5 = locality_tail(&g, &ggrid, &grho, 5.0, &[gp.clone()]).unwrap();
        let t10 = locality_tail(&g, &ggrid, &grho, 10.0, &[gp]).unwrap();
        assert!(t10 <= t5 / 2.0 + 1e-12, "tails {t5} -> {t10}");
    }

    #[test]
    fn fourier_consistency_small_residual_and_stability() {
        let v = unit_well();
        let grid = test_box();
        let f = near_delta_probe(&grid, &Point3::ZERO, 0.35);
        let coarse = RhoGrid::new(0.125, 5.2).unwrap();
        let fine = RhoGrid::new(0.0625, 5.2).unwrap();
        for lambda in [0.0, 1.0] {
            let rc = fourier_consistency(&v, &grid, &coarse, lambda, &f).unwrap();
            assert!(rc.residual < 0.03, "lambda {lambda}: residual {}", rc.residual);
            // The rho sum is already converged at this spacing: halving
            // moves the residual by less than the residual itself.
            let rf = fourier_consistency(&v, &grid, &fine, lambda, &f).unwrap();
            assert!(
                (rf.residual - rc.residual).abs() <= rc.residual,
                "lambda {lambda}: refinement instability {} -> {}",
                rc.residual,
                rf.residual
            );
        }
        // Preconditions refused.
        let tiny = RhoGrid::new(0.125, 1.0).unwrap();
        assert!(matches!(
            fourier_consistency(&v, &grid, &tiny, 1.0, &f),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            fourier_consistency(&v, &grid, &coarse, 3.0, &f),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn fourier_sums_conjugate_under_sign_flip() {
        let v = unit_well();
        let grid = test_box();
        let rho_grid = RhoGrid::new(0.125, 5.0).unwrap();
        let f = near_delta_probe(&grid, &Point3::ZERO, 0.3);
        let slices = t_slices(&v, &grid, &rho_grid, &f).unwrap();
        let sum_at = |lambda: f64| -> Vec<C64> {
            let mut acc = vec![C64::new(0.0, 0.0); grid.len()];
            for s in &slices {
                let ph = -lambda * s.rho;
                let w = C64::new(ph.cos(), ph.sin()) * rho_grid.h;
                for (a, v) in acc.iter_mut().zip(&s.image) {
                    *a += w * v;
                }
            }
            acc
        };
        let plus = sum_at(1.3);
        let minus = sum_at(-1.3);
        for (p, m) in plus.iter().zip(&minus) {
            assert_eq!(p.re, m.re);
            assert_eq!(p.im, -m.im);
        }
    }
}
