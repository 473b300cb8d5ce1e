//! Private information retrieval over graph-based replicated and coded
//! storage.

pub mod field;
pub mod graphs;
pub mod linalg;
pub mod pir2;
pub mod storage;
pub mod pir_r;
pub mod reduction;
pub mod coded;
pub mod analysis;
pub mod bounds;
pub mod net;
