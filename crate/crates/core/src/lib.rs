pub mod error;
pub mod fockspace;
pub mod lindblad;
mod linalg;
pub mod model;
pub mod params;

pub use error::{Error, Result};
pub use params::{ModelParams, Tau};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/units.md")]
    mod units {}
    #[doc = include_str!("../../../book/src/closed-form.md")]
    mod closed_form {}
    #[doc = include_str!("../../../book/src/fock-space.md")]
    mod fock_space {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
