//! Numerical and symbolic toolkit for the cubic Szegő equation and its
//! dispersive perturbations on the circle.

pub mod birkhoff;
pub mod dynamics;
pub mod error;
pub mod oracle;
pub mod poly;
pub mod spectral;

pub use error::{Result, SzegoError};
pub use spectral::{
    conserved_quantities, conserved_with_dispersion, cubic_nonlinearity, hankel_nuclear_norm,
    hs_dot_norm, project_szego, sobolev_norm, BilateralSeries, Conserved, CubicEngine,
    HankelMatrix, NonlinearityMethod, SzegoField,
};
