//! The guide in `book/`, compiled so that `cargo test` runs every snippet.
//! One module per chapter keeps a failing snippet traceable to its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/terrain.md")]
pub mod terrain {}
#[doc = include_str!("../../../book/src/biped.md")]
pub mod biped {}
#[doc = include_str!("../../../book/src/controller.md")]
pub mod controller {}
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}
#[doc = include_str!("../../../book/src/protocol.md")]
pub mod protocol {}
#[doc = include_str!("../../../book/src/behavior.md")]
pub mod behavior {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../book/src/results.md")]
pub mod results {}
