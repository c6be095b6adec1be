//! Numerical study of blowup for equivariant Yang-Mills fields in `d >= 4`
//! space dimensions: the reduced field equation, adaptive evolution,
//! self-similar profiles and the scaling experiments built on top of them.

pub mod evolve;
pub mod experiments;
pub mod fit;
pub mod mesh;
pub mod selfsimilar;
pub mod model;
