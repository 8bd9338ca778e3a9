//! Desk-scale operator machinery for Schrodinger dispersive analysis:
//! Kato-norm functionals for potentials, discretized free resolvents and
//! Birman-Schwinger families with resonance scans, the spherical-means
//! operator family and its Fourier consistency checks, a constructive
//! operator-valued Wiener inversion, and spectral time evolution with
//! dispersive decay fits.

pub mod acceptance;
pub mod error;
pub mod geom;
pub mod potential;
pub mod propagator;
pub mod resolvent;
pub mod tfamily;
pub mod wiener;

pub use error::{Error, Result};
pub use geom::{Point3, QuadratureGrid, SphereRule};
pub use potential::{kato_norm, kato_report, KatoReport, Potential};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
