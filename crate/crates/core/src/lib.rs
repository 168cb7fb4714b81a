pub mod matcore;
pub mod sampling;
pub mod quad;
pub mod upath;
pub mod rdet;
pub mod sflow;
pub mod cayley;
pub mod scatter;
