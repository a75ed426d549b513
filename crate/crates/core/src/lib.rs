pub mod dataparallel;
pub mod error;
pub mod filtration;
pub mod io;
pub mod pipeline;
pub mod postprocess;
pub mod qgroup;
pub mod reference;
pub mod sam;
pub mod seq;
pub mod simulate;
pub mod validation;

pub use error::{Error, Result};
