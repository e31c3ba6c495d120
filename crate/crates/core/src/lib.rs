pub mod cgp;
pub mod data;
pub mod distance;
pub mod kriging;
pub mod smbne;
pub mod error;
pub mod evolution;
pub mod experiment;

pub use error::{Error, Result};
