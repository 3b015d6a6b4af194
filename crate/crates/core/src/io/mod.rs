//! File formats: the GHM1 binary container plus small CSV helpers.

pub mod ghm1;

pub use ghm1::{Ghm1File, Section, SectionData};
