//! Potential presets and the global/local/distal Kato functionals.
//!
//! The Kato integral of |V| against 1/|x - y| is the size measure used by
//! every operator bound in the crate. The sup over centers y is evaluated
//! on a finite lattice (grid nodes plus the origin by default), so computed
//! values are lower bounds that converge under center refinement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, QuadratureGrid};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    SquareWell { depth: f64, radius: f64 },
    Gaussian { amplitude: f64, width: f64 },
    /// Piecewise-linear radial profile; radii strictly increasing.
    RadialTable { samples: Vec<(f64, f64)> },
    Sum { terms: Vec<Potential> },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::SquareWell { depth, radius } => {
                if !depth.is_finite() || !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::InvalidInput("square well needs finite depth, radius > 0".into()));
                }
            }
            Potential::Gaussian { amplitude, width } => {
                if !amplitude.is_finite() || !width.is_finite() || *width <= 0.0 {
                    return Err(Error::InvalidInput("gaussian needs finite amplitude, width > 0".into()));
                }
            }
            Potential::RadialTable { samples } => {
                if samples.is_empty() {
                    return Err(Error::InvalidInput("radial table is empty".into()));
                }
                for w in samples.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidInput("radial table radii must be strictly increasing".into()));
                    }
                }
                if samples.iter().any(|(r, v)| !r.is_finite() || !v.is_finite()) {
                    return Err(Error::InvalidInput("radial table contains non-finite sample".into()));
                }
            }
            Potential::Sum { terms } => {
                for t in terms {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn eval_radial(&self, r: f64) -> f64 {
        match self {
            Potential::SquareWell { depth, radius } => {
                if r <= *radius {
                    *depth
                } else {
                    0.0
                }
            }
            Potential::Gaussian { amplitude, width } => {
                amplitude * (-r * r / (2.0 * width * width)).exp()
            }
            Potential::RadialTable { samples } => {
                if r <= samples[0].0 {
                    return samples[0].1;
                }
                if r >= samples[samples.len() - 1].0 {
                    return 0.0;
                }
                let idx = samples.partition_point(|(rr, _)| *rr <= r);
                let (r0, v0) = samples[idx - 1];
                let (r1, v1) = samples[idx];
                v0 + (v1 - v0) * (r - r0) / (r1 - r0)
            }
            Potential::Sum { terms } => terms.iter().map(|t| t.eval_radial(r)).sum(),
        }
    }

    pub fn eval(&self, p: &Point3) -> f64 {
        self.eval_radial(p.norm())
    }

    /// Radius beyond which the preset is numerically negligible.
    pub fn support_radius(&self) -> f64 {
        match self {
            Potential::SquareWell { radius, .. } => *radius,
            Potential::Gaussian { width, .. } => 6.5 * width,
            Potential::RadialTable { samples } => samples.last().map(|s| s.0).unwrap_or(0.0),
            Potential::Sum { terms } => terms
                .iter()
                .map(|t| t.support_radius())
                .fold(0.0, f64::max),
        }
    }

    /// Radii where the radial profile is non-smooth; grids snap shell
    /// boundaries onto these.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Potential::SquareWell { radius, .. } => vec![*radius],
            Potential::Gaussian { .. } => vec![],
            Potential::RadialTable { samples } => samples.iter().map(|s| s.0).collect(),
            Potential::Sum { terms } => {
                let mut out: Vec<f64> = terms.iter().flat_map(|t| t.breakpoints()).collect();
                out.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out.dedup();
                out
            }
        }
    }

    /// The rescaled potential r^2 V(r x). All presets are closed under this
    /// transformation.
    pub fn scaled(&self, r: f64) -> Potential {
        assert!(r > 0.0);
        match self {
            Potential::SquareWell { depth, radius } => Potential::SquareWell {
                depth: depth * r * r,
                radius: radius / r,
            },
            Potential::Gaussian { amplitude, width } => Potential::Gaussian {
                amplitude: amplitude * r * r,
                width: width / r,
            },
            Potential::RadialTable { samples } => Potential::RadialTable {
                samples: samples.iter().map(|(rr, v)| (rr / r, v * r * r)).collect(),
            },
            Potential::Sum { terms } => Potential::Sum {
                terms: terms.iter().map(|t| t.scaled(r)).collect(),
            },
        }
    }

    /// Default quadrature grid for this preset: geometric shells to
    /// 1.5x the support radius with boundaries snapped to breakpoints.
    pub fn default_grid(&self, shells: usize, sphere_degree: usize) -> QuadratureGrid {
        let r = self.support_radius().max(1e-6);
        QuadratureGrid::radial_shells(1.5 * r, shells, sphere_degree, &self.breakpoints())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KatoReport {
    pub global_norm: f64,
    /// (delta, sup over centers of the Kato integral restricted to |x-y| < delta)
    pub local_profile: Vec<(f64, f64)>,
    /// (R, sup over centers of the Kato integral restricted to |x-y| > R)
    pub distal_profile: Vec<(f64, f64)>,
    pub argmax_center: Point3,
}

impl KatoReport {
    /// CSV with header `delta_or_R,sup_value`: local rows then distal rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta_or_R,sup_value\n");
        for (d, v) in &self.local_profile {
            s.push_str(&format!("{:.12e},{:.12e}\n", d, v));
        }
        for (r, v) in &self.distal_profile {
            s.push_str(&format!("{:.12e},{:.12e}\n", r, v));
        }
        s
    }
}

/// 1/|x - y| with the singular cell replaced by its exact ball average
/// 3 / (2 r_cell).
#[inline]
pub(crate) fn newton_kernel(node: &Point3, cell_radius: f64, center: &Point3) -> f64 {
    let d = node.dist(center);
    if d < cell_radius {
        1.5 / cell_radius
    } else {
        1.0 / d
    }
}

fn check_inputs(v: &Potential, grid: &QuadratureGrid, centers: &[Point3]) -> Result<Vec<f64>> {
    v.validate()?;
    grid.validate()?;
    if centers.is_empty() {
        return Err(Error::InvalidInput("empty center lattice".into()));
    }
    let samples: Vec<f64> = grid.nodes.iter().map(|p| v.eval(p)).collect();
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite potential sample on grid".into()));
    }
    Ok(samples)
}

/// Restriction of the Kato integral to a ball or its complement around the
/// center.
#[derive(Debug, Clone, Copy)]
enum Cut {
    All,
    Inside(f64),
    Outside(f64),
}

impl Cut {
    /// Coverage factor for node i. Concentric cuts on radial grids use the
    /// exact shell-volume fraction; otherwise the cut is sharp.
    fn factor(&self, grid: &QuadratureGrid, i: usize, center: &Point3, concentric: bool) -> f64 {
        match *self {
            Cut::All => 1.0,
            Cut::Inside(delta) => {
                if concentric {
                    let (lo, hi) = (grid.shell_lo[i], grid.shell_hi[i]);
                    let c = delta.clamp(lo, hi);
                    (c.powi(3) - lo.powi(3)) / (hi.powi(3) - lo.powi(3))
                } else if grid.nodes[i].dist(center) < delta {
                    1.0
                } else {
                    0.0
                }
            }
            Cut::Outside(r) => 1.0 - Cut::Inside(r).factor(grid, i, center, concentric),
        }
    }
}

fn kato_sum(grid: &QuadratureGrid, samples: &[f64], center: &Point3, cut: Cut) -> f64 {
    let concentric = !grid.shell_lo.is_empty() && center.norm() < 1e-12 * grid.support_radius;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let f = cut.factor(grid, i, center, concentric);
        if f == 0.0 {
            continue;
        }
        acc += f
            * grid.weights[i]
            * samples[i].abs()
            * newton_kernel(&grid.nodes[i], grid.cell_radius[i], center);
    }
    acc
}

fn sup_over_centers(
    grid: &QuadratureGrid,
    samples: &[f64],
    centers: &[Point3],
    cut: Cut,
) -> (f64, Point3) {
    let vals: Vec<f64> = centers
        .par_iter()
        .map(|c| kato_sum(grid, samples, c, cut))
        .collect();
    // Max reduced in fixed index order.
    let mut best = 0.0;
    let mut arg = centers[0];
    for (c, v) in centers.iter().zip(vals.iter()) {
        if *v > best {
            best = *v;
            arg = *c;
        }
    }
    (best, arg)
}

/// Global Kato norm: sup over the center lattice of the quadrature of
/// |V(x)| / |x - y|.
pub fn kato_norm(v: &Potential, grid: &QuadratureGrid, centers: &[Point3]) -> Result<f64> {
    let samples = check_inputs(v, grid, centers)?;
    Ok(sup_over_centers(grid, &samples, centers, Cut::All).0)
}

/// Kato integrals restricted to |x - y| < delta. `deltas` must be positive
/// and sorted descending.
pub fn local_kato_profile(
    v: &Potential,
    grid: &QuadratureGrid,
    centers: &[Point3],
    deltas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if deltas.is_empty() || deltas.iter().any(|d| *d <= 0.0) {
        return Err(Error::InvalidInput("deltas must be positive".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("deltas must be sorted descending".into()));
    }
    let samples = check_inputs(v, grid, centers)?;
    Ok(deltas
        .iter()
        .map(|&d| (d, sup_over_centers(grid, &samples, centers, Cut::Inside(d)).0))
        .collect())
}

/// Tail Kato integrals over |x - y| > R. `radii` must be positive ascending.
pub fn distal_kato_profile(
    v: &Potential,
    grid: &QuadratureGrid,
    centers: &[Point3],
    radii: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if radii.is_empty() || radii.iter().any(|r| *r <= 0.0) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("radii must be sorted ascending".into()));
    }
    let samples = check_inputs(v, grid, centers)?;
    Ok(radii
        .iter()
        .map(|&r| (r, sup_over_centers(grid, &samples, centers, Cut::Outside(r)).0))
        .collect())
}

pub fn kato_report(
    v: &Potential,
    grid: &QuadratureGrid,
    centers: &[Point3],
    deltas: &[f64],
    radii: &[f64],
) -> Result<KatoReport> {
    let samples = check_inputs(v, grid, centers)?;
    let (global, argmax) = sup_over_centers(grid, &samples, centers, Cut::All);
    Ok(KatoReport {
        global_norm: global,
        local_profile: local_kato_profile(v, grid, centers, deltas)?,
        distal_profile: distal_kato_profile(v, grid, centers, radii)?,
        argmax_center: argmax,
    })
}

/// Radius of the region where |V| stays above 1% of its peak; centers are
/// only useful inside it.
pub fn core_radius(v: &Potential) -> f64 {
    let support = v.support_radius();
    let n = 512;
    let mut peak = 0.0f64;
    for i in 0..=n {
        peak = peak.max(v.eval_radial(support * i as f64 / n as f64).abs());
    }
    if peak == 0.0 {
        return support;
    }
    let mut core = 0.0f64;
    for i in 0..=n {
        let r = support * i as f64 / n as f64;
        if v.eval_radial(r).abs() >= 1e-2 * peak {
            core = r;
        }
    }
    core.max(1e-3 * support)
}

/// Default center lattice: the origin plus a coarse subsample of grid nodes
/// spanning the core of the potential.
pub fn default_centers(v: &Potential, grid: &QuadratureGrid) -> Vec<Point3> {
    let cap = 512usize;
    let reach = 1.05 * core_radius(v);
    let inside: Vec<Point3> = grid
        .nodes
        .iter()
        .copied()
        .filter(|p| p.norm() <= reach)
        .collect();
    let stride = (inside.len() / cap).max(1);
    let mut centers = vec![Point3::ZERO];
    centers.extend(inside.iter().copied().step_by(stride));
    centers
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent radial oracle: 4 pi * integral of |V(r)| r dr by composite
    /// midpoint at high resolution, splitting panels at breakpoints so no
    /// evaluation lands on a jump.
    pub fn radial_kato_oracle(v: &Potential, r_max: f64) -> f64 {
        let mut cuts = vec![0.0];
        cuts.extend(v.breakpoints().into_iter().filter(|b| *b < r_max));
        cuts.push(r_max);
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = 20000;
            let h = (b - a) / n as f64;
            for i in 0..n {
                let r = a + (i as f64 + 0.5) * h;
                acc += v.eval_radial(r).abs() * r * h;
            }
        }
        4.0 * std::f64::consts::PI * acc
    }

    fn unit_well() -> Potential {
        Potential::SquareWell { depth: 1.0, radius: 1.0 }
    }

    #[test]
    fn zero_potential_has_zero_norm() {
        let v = Potential::SquareWell { depth: 0.0, radius: 1.0 };
        let grid = v.default_grid(64, 17);
        let centers = default_centers(&v, &grid);
        assert_eq!(kato_norm(&v, &grid, &centers).unwrap(), 0.0);
    }

    #[test]
    fn unit_well_norm_is_two_pi() {
        let v = unit_well();
        let oracle = radial_kato_oracle(&v, 1.5);
        assert_relative_eq!(oracle, 2.0 * std::f64::consts::PI, max_relative = 1e-9);
        let grid = v.default_grid(256, 17);
        let centers = default_centers(&v, &grid);
        let got = kato_norm(&v, &grid, &centers).unwrap();
        assert!((got - 2.0 * std::f64::consts::PI).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn scaled_well_norm_is_invariant() {
        let v = unit_well();
        for r in [0.5, 2.0, 4.0] {
            let vr = v.scaled(r);
            let grid = vr.default_grid(256, 17);
            let centers = default_centers(&vr, &grid);
            let got = kato_norm(&vr, &grid, &centers).unwrap();
            assert!((got - 2.0 * std::f64::consts::PI).abs() < 1e-3, "r={r} got {got}");
        }
    }

    #[test]
    fn local_profile_recovers_norm_and_small_delta_rate() {
        let v = unit_well();
        let grid = v.default_grid(256, 17);
        let centers = default_centers(&v, &grid);
        let prof = local_kato_profile(&v, &grid, &centers, &[2.0, 0.1]).unwrap();
        assert!((prof[0].1 - 2.0 * std::f64::consts::PI).abs() < 1e-3);
        // Center y = 0 branch: 4 pi * int_0^0.1 r dr = 0.02 pi.
        let at_origin: f64 = {
            let samples: Vec<f64> = grid.nodes.iter().map(|p| v.eval(p)).collect();
            super::kato_sum(&grid, &samples, &Point3::ZERO, Cut::Inside(0.1))
        };
        assert!((at_origin - 0.02 * std::f64::consts::PI).abs() < 1e-4, "got {at_origin}");
        // Profile values nonincreasing as delta decreases.
        assert!(prof[1].1 <= prof[0].1 + 1e-12);
    }

    #[test]
    fn distal_profile_vanishes_beyond_support() {
        let v = unit_well();
        let grid = v.default_grid(128, 17);
        let centers: Vec<Point3> = default_centers(&v, &grid)
            .into_iter()
            .filter(|c| c.norm() <= 1.0)
            .collect();
        let prof = distal_kato_profile(&v, &grid, &centers, &[3.0]).unwrap();
        assert_eq!(prof[0].1, 0.0);

        // Gaussian tail around near-origin centers; radial tail oracle at
        // 10x resolution confirms the scale.
        let g = Potential::Gaussian { amplitude: 1.0, width: 1.0 };
        let ggrid = g.default_grid(256, 17);
        let gcenters: Vec<Point3> = default_centers(&g, &ggrid)
            .into_iter()
            .filter(|c| c.norm() <= 1.0)
            .collect();
        let gprof = distal_kato_profile(&g, &ggrid, &gcenters, &[5.0]).unwrap();
        assert!(gprof[0].1 < 1e-3, "gaussian tail {}", gprof[0].1);
        let oracle_tail = radial_kato_oracle(&g, 9.75) - radial_kato_oracle(&g, 5.0);
        assert!(oracle_tail < 1e-3);
    }

    #[test]
    fn distal_plus_local_branch_reconstructs_global() {
        let v = Potential::Gaussian { amplitude: 2.0, width: 0.8 };
        let grid = v.default_grid(128, 17);
        let centers = default_centers(&v, &grid);
        let samples: Vec<f64> = grid.nodes.iter().map(|p| v.eval(p)).collect();
        let (global, argmax) = super::sup_over_centers(&grid, &samples, &centers, Cut::All);
        let r = 1.3;
        let near = super::kato_sum(&grid, &samples, &argmax, Cut::Inside(r));
        let far = super::kato_sum(&grid, &samples, &argmax, Cut::Outside(r));
        assert_relative_eq!(near + far, global, max_relative = 1e-12);
    }

    #[test]
    fn error_paths() {
        let v = unit_well();
        let grid = v.default_grid(16, 5);
        assert!(kato_norm(&v, &grid, &[]).is_err());
        let bad_table = Potential::RadialTable { samples: vec![(0.5, 1.0), (0.4, 2.0)] };
        assert!(kato_norm(&bad_table, &grid, &[Point3::ZERO]).is_err());
        assert!(local_kato_profile(&v, &grid, &[Point3::ZERO], &[0.1, 2.0]).is_err());
        assert!(distal_kato_profile(&v, &grid, &[Point3::ZERO], &[2.0, 0.1]).is_err());
    }

    #[test]
    fn radial_table_matches_well() {
        // A table tracing the unit well reproduces its Kato norm.
        let table = Potential::RadialTable {
            samples: vec![(0.0, 1.0), (1.0 - 1e-9, 1.0), (1.0, 0.0)],
        };
        let grid = table.default_grid(256, 17);
        let centers = default_centers(&table, &grid);
        let got = kato_norm(&table, &grid, &centers).unwrap();
        assert!((got - 2.0 * std::f64::consts::PI).abs() < 2e-3, "got {got}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn homogeneity(c in -4.0f64..4.0) {
            let v = Potential::Gaussian { amplitude: 1.0, width: 0.7 };
            let cv = Potential::Gaussian { amplitude: c, width: 0.7 };
            let grid = v.default_grid(48, 9);
            let centers = default_centers(&v, &grid);
            let base = kato_norm(&v, &grid, &centers).unwrap();
            let scaled = kato_norm(&cv, &grid, &centers).unwrap();
            prop_assert!((scaled - c.abs() * base).abs() <= 1e-10 * base.max(1.0));
        }

        #[test]
        fn triangle_inequality(d1 in 0.1f64..3.0, d2 in 0.1f64..3.0) {
            let v1 = Potential::SquareWell { depth: d1, radius: 0.8 };
            let v2 = Potential::Gaussian { amplitude: d2, width: 0.5 };
            let sum = Potential::Sum { terms: vec![v1.clone(), v2.clone()] };
            let grid = sum.default_grid(48, 9);
            let centers = default_centers(&sum, &grid);
            let n_sum = kato_norm(&sum, &grid, &centers).unwrap();
            let n1 = kato_norm(&v1, &grid, &centers).unwrap();
            let n2 = kato_norm(&v2, &grid, &centers).unwrap();
            prop_assert!(n_sum <= n1 + n2 + 1e-10);
        }
    }
}
