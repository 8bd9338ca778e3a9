//! Spatial grids and quadrature rules.
//!
//! Two grid families cover every integral operator in the crate: radial
//! shells crossed with a sphere rule (for radial or near-radial potentials)
//! and uniform Cartesian boxes (for field interpolation). Each node carries
//! a volume weight and a volume-equivalent cell radius used by the singular
//! cell-average rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn add_scaled(&self, dir: &Point3, s: f64) -> Point3 {
        Point3::new(self.x + s * dir.x, self.y + s * dir.y, self.z + s * dir.z)
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(s * self.x, s * self.y, s * self.z)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; nodes are symmetric and
/// accurate to machine precision for the orders used here (n <= 128).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Unit-sphere quadrature: product Gauss-Legendre in the polar cosine and a
/// uniform azimuthal rule. `product(p, q)` integrates spherical harmonics
/// exactly up to degree min(2p - 1, q - 1); weights sum to 4 pi.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dirs: Vec<Point3>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn product(polar: usize, azimuth: usize) -> Self {
        let (cts, cws) = gauss_legendre(polar);
        let mut dirs = Vec::with_capacity(polar * azimuth);
        let mut weights = Vec::with_capacity(polar * azimuth);
        let dphi = 2.0 * std::f64::consts::PI / azimuth as f64;
        for (ct, cw) in cts.iter().zip(cws.iter()) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for k in 0..azimuth {
                let phi = dphi * (k as f64 + 0.5);
                dirs.push(Point3::new(st * phi.cos(), st * phi.sin(), *ct));
                weights.push(cw * dphi);
            }
        }
        SphereRule { dirs, weights }
    }

    /// Rule exact for spherical harmonics up to `degree`.
    pub fn with_degree(degree: usize) -> Self {
        let polar = degree / 2 + 1;
        let azimuth = degree + 1;
        SphereRule::product(polar, azimuth)
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GridKind {
    /// Geometric radial shells times a sphere rule.
    RadialShells { shells: usize, sphere_degree: usize },
    /// Uniform Cartesian box of cell centers, side 2 * half_side.
    CartesianBox { n_per_axis: usize, half_side: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<Point3>,
    pub weights: Vec<f64>,
    /// Radius of the ball (or half-diagonal of the box) the grid covers.
    pub support_radius: f64,
    /// Volume-equivalent cell radius per node, for the singular-cell rule.
    pub cell_radius: Vec<f64>,
    /// Per-node radial shell bounds (radial grids only; empty for boxes).
    /// Concentric radius cuts use these for exact fractional coverage.
    #[serde(default)]
    pub shell_lo: Vec<f64>,
    #[serde(default)]
    pub shell_hi: Vec<f64>,
    pub kind: GridKind,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        if self.nodes.len() != self.weights.len() || self.nodes.len() != self.cell_radius.len() {
            return Err(Error::InvalidInput("grid field lengths differ".into()));
        }
        if !self.shell_lo.is_empty()
            && (self.shell_lo.len() != self.nodes.len() || self.shell_hi.len() != self.nodes.len())
        {
            return Err(Error::InvalidInput("shell bound lengths differ from node count".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidInput("non-positive grid weight".into()));
        }
        Ok(())
    }

    /// Geometric radial shells out to `outer_radius`, with shell boundaries
    /// snapped onto the supplied breakpoints (potential discontinuities).
    /// Snapping keeps piecewise-smooth radial integrands midpoint-exact
    /// across jumps.
    pub fn radial_shells(
        outer_radius: f64,
        shells: usize,
        sphere_degree: usize,
        breakpoints: &[f64],
    ) -> Self {
        assert!(outer_radius > 0.0 && shells >= 2);
        let n = shells;
        // b_k = R * gamma^(n-k) for k = 1..n, b_0 = 0; innermost shell ~ R/300.
        let gamma = (1.0f64 / 300.0).powf(1.0 / (n as f64 - 1.0));
        let mut bounds = Vec::with_capacity(n + 1);
        bounds.push(0.0);
        for k in 1..=n {
            bounds.push(outer_radius * gamma.powi((n - k) as i32));
        }
        for &bp in breakpoints {
            if bp <= 0.0 || bp >= outer_radius {
                continue;
            }
            // Snap the nearest interior boundary onto the breakpoint.
            let mut best = 1;
            let mut bestd = f64::INFINITY;
            for (k, b) in bounds.iter().enumerate().take(n).skip(1) {
                let d = (b - bp).abs();
                if d < bestd {
                    bestd = d;
                    best = k;
                }
            }
            bounds[best] = bp;
        }
        bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-14 * outer_radius);

        let sphere = SphereRule::with_degree(sphere_degree);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut cell_radius = Vec::new();
        let mut shell_lo = Vec::new();
        let mut shell_hi = Vec::new();
        let four_pi = 4.0 * std::f64::consts::PI;
        for w in bounds.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let r_mid = 0.5 * (lo + hi);
            if r_mid <= 0.0 {
                continue;
            }
            let vol = four_pi / 3.0 * (hi.powi(3) - lo.powi(3));
            for (dir, sw) in sphere.dirs.iter().zip(sphere.weights.iter()) {
                let wt = vol * sw / four_pi;
                nodes.push(dir.scale(r_mid));
                weights.push(wt);
                cell_radius.push((3.0 * wt / four_pi).cbrt());
                shell_lo.push(lo);
                shell_hi.push(hi);
            }
        }
        QuadratureGrid {
            nodes,
            weights,
            support_radius: outer_radius,
            cell_radius,
            shell_lo,
            shell_hi,
            kind: GridKind::RadialShells { shells: n, sphere_degree },
        }
    }

    /// Uniform box of cell centers on (-half_side, half_side)^3.
    pub fn cartesian_box(half_side: f64, n_per_axis: usize) -> Self {
        assert!(half_side > 0.0 && n_per_axis >= 2);
        let h = 2.0 * half_side / n_per_axis as f64;
        let w = h * h * h;
        let cr = (3.0 * w / (4.0 * std::f64::consts::PI)).cbrt();
        let mut nodes = Vec::with_capacity(n_per_axis.pow(3));
        for i in 0..n_per_axis {
            for j in 0..n_per_axis {
                for k in 0..n_per_axis {
                    nodes.push(Point3::new(
                        -half_side + h * (i as f64 + 0.5),
                        -half_side + h * (j as f64 + 0.5),
                        -half_side + h * (k as f64 + 0.5),
                    ));
                }
            }
        }
        let n = nodes.len();
        QuadratureGrid {
            nodes,
            weights: vec![w; n],
            support_radius: half_side * 3.0f64.sqrt(),
            cell_radius: vec![cr; n],
            shell_lo: Vec::new(),
            shell_hi: Vec::new(),
            kind: GridKind::CartesianBox { n_per_axis, half_side },
        }
    }

    pub fn box_spacing(&self) -> Option<f64> {
        match self.kind {
            GridKind::CartesianBox { n_per_axis, half_side } => {
                Some(2.0 * half_side / n_per_axis as f64)
            }
            _ => None,
        }
    }

    /// Trilinear interpolation of a real field sampled on this box grid.
    /// Points outside the box evaluate to zero.
    pub fn trilinear(&self, field: &[f64], p: &Point3) -> f64 {
        let (n, half) = match self.kind {
            GridKind::CartesianBox { n_per_axis, half_side } => (n_per_axis, half_side),
            _ => panic!("trilinear interpolation requires a Cartesian box grid"),
        };
        let h = 2.0 * half / n as f64;
        // Cell-center coordinates: x_i = -half + (i + 0.5) h.
        let fx = (p.x + half) / h - 0.5;
        let fy = (p.y + half) / h - 0.5;
        let fz = (p.z + half) / h - 0.5;
        let ix = fx.floor();
        let iy = fy.floor();
        let iz = fz.floor();
        let (tx, ty, tz) = (fx - ix, fy - iy, fz - iz);
        let mut acc = 0.0;
        for (dx, wx) in [(0i64, 1.0 - tx), (1, tx)] {
            let gx = ix as i64 + dx;
            if gx < 0 || gx >= n as i64 || wx == 0.0 {
                continue;
            }
            for (dy, wy) in [(0i64, 1.0 - ty), (1, ty)] {
                let gy = iy as i64 + dy;
                if gy < 0 || gy >= n as i64 || wy == 0.0 {
                    continue;
                }
                for (dz, wz) in [(0i64, 1.0 - tz), (1, tz)] {
                    let gz = iz as i64 + dz;
                    if gz < 0 || gz >= n as i64 || wz == 0.0 {
                        continue;
                    }
                    let idx = ((gx as usize) * n + gy as usize) * n + gz as usize;
                    acc += wx * wy * wz * field[idx];
                }
            }
        }
        acc
    }

    /// Persist as a JSON array of `[x, y, z, weight, cell_radius]` rows.
    pub fn to_json_rows(&self) -> serde_json::Value {
        let rows: Vec<[f64; 5]> = self
            .nodes
            .iter()
            .zip(self.weights.iter().zip(self.cell_radius.iter()))
            .map(|(p, (w, c))| [p.x, p.y, p.z, *w, *c])
            .collect();
        serde_json::json!(rows)
    }

    pub fn from_json_rows(v: &serde_json::Value, support_radius: f64) -> Result<Self> {
        let rows: Vec<[f64; 5]> = serde_json::from_value(v.clone())
            .map_err(|e| Error::InvalidInput(format!("grid rows: {e}")))?;
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty grid".into()));
        }
        let mut g = QuadratureGrid {
            nodes: Vec::with_capacity(rows.len()),
            weights: Vec::with_capacity(rows.len()),
            support_radius,
            cell_radius: Vec::with_capacity(rows.len()),
            shell_lo: Vec::new(),
            shell_hi: Vec::new(),
            kind: GridKind::RadialShells { shells: 0, sphere_degree: 0 },
        };
        for r in rows {
            g.nodes.push(Point3::new(r[0], r[1], r[2]));
            g.weights.push(r[3]);
            g.cell_radius.push(r[4]);
        }
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // Exact for degree <= 15: check x^14 whose integral is 2/15.
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_relative_eq!(s, 2.0 / 15.0, max_relative = 1e-13);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn sphere_rule_degree_17_exactness() {
        let rule = SphereRule::with_degree(17);
        let total: f64 = rule.weights.iter().sum();
        assert_relative_eq!(total, 4.0 * std::f64::consts::PI, max_relative = 1e-13);
        // Solid harmonics integrate to zero; test a few up to degree 17.
        for (l, f) in [
            (3usize, Box::new(|p: &Point3| p.z * (5.0 * p.z * p.z - 3.0) / 2.0) as Box<dyn Fn(&Point3) -> f64>),
            (5, Box::new(|p: &Point3| p.x * p.y * p.z * (p.x * p.x - p.y * p.y))),
            (17, Box::new(|p: &Point3| {
                // Re Y_17^17 direction dependence ~ (x + i y)^17 real part.
                let mut re = 1.0f64;
                let mut im = 0.0f64;
                for _ in 0..17 {
                    let nr = re * p.x - im * p.y;
                    im = re * p.y + im * p.x;
                    re = nr;
                }
                re
            })),
        ] {
            let s: f64 = rule
                .dirs
                .iter()
                .zip(&rule.weights)
                .map(|(d, w)| w * f(d))
                .sum();
            assert!(s.abs() < 1e-10, "degree {l} harmonic not annihilated: {s}");
        }
    }

    #[test]
    fn radial_grid_weights_sum_to_volume() {
        let g = QuadratureGrid::radial_shells(1.5, 64, 17, &[1.0]);
        let vol: f64 = g.weights.iter().sum();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 1.5f64.powi(3);
        assert_relative_eq!(vol, exact, max_relative = 1e-10);
        g.validate().unwrap();
        // Breakpoint snapped: some boundary lands exactly on r = 1.
        let near: usize = g
            .nodes
            .iter()
            .filter(|p| (p.norm() - 1.0).abs() < 1e-12)
            .count();
        assert_eq!(near, 0, "nodes sit at shell midpoints, never on boundaries");
    }

    #[test]
    fn box_grid_covers_volume_and_interpolates() {
        let g = QuadratureGrid::cartesian_box(2.0, 8);
        let vol: f64 = g.weights.iter().sum();
        assert_relative_eq!(vol, 64.0, max_relative = 1e-12);
        // Trilinear interpolation reproduces a linear field exactly inside.
        let field: Vec<f64> = g.nodes.iter().map(|p| 1.0 + 2.0 * p.x - p.y + 0.5 * p.z).collect();
        let q = Point3::new(0.3, -0.7, 1.1);
        let got = g.trilinear(&field, &q);
        assert_relative_eq!(got, 1.0 + 2.0 * 0.3 + 0.7 + 0.55, max_relative = 1e-12);
        // Outside the box: zero.
        assert_eq!(g.trilinear(&field, &Point3::new(10.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn grid_json_roundtrip() {
        let g = QuadratureGrid::radial_shells(1.0, 8, 5, &[]);
        let v = g.to_json_rows();
        let g2 = QuadratureGrid::from_json_rows(&v, 1.0).unwrap();
        assert_eq!(g.len(), g2.len());
        assert_eq!(g.nodes[3], g2.nodes[3]);
    }
}
