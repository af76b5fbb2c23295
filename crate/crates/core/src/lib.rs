//! Definite determinantal representations of hyperbolic plane curves.
//!
//! Given a real ternary form `p(t, x, y)` of degree `d`, hyperbolic with
//! respect to `(1, 0, 0)`, [`pipeline::solve`] finds a real diagonal `D` and
//! a real symmetric `R` with `p = det(t I + x D + y R)` by tracking a pair
//! along a Nuij family that joins `p` to a fixed strictly hyperbolic form.
//!
//! ```
//! use hyperdet::parse::parse_polynomial_text;
//! use hyperdet::pipeline::{solve, SolveOptions};
//!
//! let p = parse_polynomial_text("t^2 - x^2 - y^2 + x y").unwrap();
//! let rep = solve(&p, &SolveOptions::default()).unwrap();
//! assert!(rep.is_real && rep.residual < 1e-10);
//! ```
//!
//! The guide in `book/` walks through each stage.

pub mod detmap;
pub mod error;
pub mod homotopy;
pub mod hyperbolic;
pub mod io;
pub mod linalg;
pub mod nuij;
pub mod oracle;
pub mod parse;
pub mod pipeline;
pub mod roots;
pub mod ternary;

pub use error::{Error, Result};

/// 64-bit FNV-1a over a byte stream; stable across platforms and releases.
pub(crate) fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

// Every chapter of the guide is compiled and run by `cargo test --doc`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/forms.md")]
    mod forms {}
    #[doc = include_str!("../../../book/src/determinantal-map.md")]
    mod determinantal_map {}
    #[doc = include_str!("../../../book/src/nuij-paths.md")]
    mod nuij_paths {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod tracking {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
