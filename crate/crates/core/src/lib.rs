pub mod auth;
pub mod bits;
pub mod cli;
pub mod entropy;
pub mod ini;
pub mod net;
pub mod privamp;
pub mod qchan;
pub mod recon;
pub mod rng;
pub mod sift;
