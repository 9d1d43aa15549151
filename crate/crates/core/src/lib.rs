pub mod adjoint;
pub mod analytic;
pub mod error;
pub mod fpe;
pub mod galerkin;
pub mod measure;
pub mod model;
pub mod noise;
pub mod particles;
pub mod reduce;
