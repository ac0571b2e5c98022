//! The guide under `book/`, compiled so that its snippets run as doc-tests.

#[doc = include_str!("../../../book/src/intro.md")]
mod ch01 {}
#[doc = include_str!("../../../book/src/potentials.md")]
mod ch02 {}
#[doc = include_str!("../../../book/src/actions.md")]
mod ch03 {}
#[doc = include_str!("../../../book/src/inversion.md")]
mod ch04 {}
#[doc = include_str!("../../../book/src/standard_form.md")]
mod ch05 {}
#[doc = include_str!("../../../book/src/singularities.md")]
mod ch06 {}
#[doc = include_str!("../../../book/src/cosine.md")]
mod ch07 {}
#[doc = include_str!("../../../book/src/cli.md")]
mod ch08 {}
