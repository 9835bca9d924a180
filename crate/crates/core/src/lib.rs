pub mod error;
pub mod params;
pub mod ewald;
pub mod harness;
pub mod pswf;
pub mod quadrature;
pub mod split;
pub mod window;
