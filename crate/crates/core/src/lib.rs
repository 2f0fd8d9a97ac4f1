pub mod compose;
pub mod crpgen;
pub mod delay;
pub mod error;
pub mod par;
pub mod preselect;
pub mod rng;
pub mod metrics;
pub mod hwcost;
pub mod attacks;
