//! Long short-term intention modeling for household activity logs.

pub mod agents;
pub mod autodiff;
pub mod conflict;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod persona;
pub mod pipeline;
pub mod session;
pub mod world;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/world.md")]
    mod world {}
    #[doc = include_str!("../../../book/src/personas.md")]
    mod personas {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/autodiff.md")]
    mod autodiff {}
    #[doc = include_str!("../../../book/src/agents.md")]
    mod agents {}
    #[doc = include_str!("../../../book/src/conflicts.md")]
    mod conflicts {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
