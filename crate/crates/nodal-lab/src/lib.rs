pub mod asympt;
pub mod chaos_poly;
pub mod diagram;
pub mod error;
pub mod exact;
pub mod fieldsim;
pub mod mc;
pub mod meridian;
pub mod quad;
pub mod specfun;
pub mod variance;

pub use error::{Error, Result};

/// Library version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Guide chapters, compiled here so their snippets run as doctests.
pub mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}
    #[doc = include_str!("../../../book/src/special_functions.md")]
    pub mod special_functions {}
    #[doc = include_str!("../../../book/src/chaos.md")]
    pub mod chaos {}
    #[doc = include_str!("../../../book/src/variance.md")]
    pub mod variance {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    pub mod asymptotics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
