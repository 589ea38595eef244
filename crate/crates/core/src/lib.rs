//! Joint estimation of one-parameter division-model undistortion and the
//! affine-rectifying vanishing line of a scene plane from corresponded
//! coplanar repeated regions.

pub mod bench;
pub mod constraints;
pub mod geometry;
pub mod io;
pub mod poly;
pub mod polysolve;
pub mod robust;
pub mod synth;
