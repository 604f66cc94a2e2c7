//! Runs the guide's code listings as doc-tests. One module per chapter, so a
//! failing listing points at its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/density.md")]
pub mod density {}

#[doc = include_str!("../../../book/src/latent.md")]
pub mod latent {}

#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
