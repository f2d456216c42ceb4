//! Exact arithmetic for ray class monoids, integral lambda-models, periodic loci of the
//! toric and Chebyshev lines, and periodic big Witt vectors.
//!
//! Everything here is brute force at desk scale. Tables are built by enumeration and the
//! closed formulas only appear in tests, as oracles.

// `%` stays: `u64::is_multiple_of` clashes with `num_integer::Integer` where both are in scope.
#![allow(clippy::manual_is_multiple_of)]

pub mod exact_arith;
pub mod lambda_poly;
pub mod model_checker;
pub mod quad_field;
pub mod ray_class;
pub mod witt_periodic;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Input that does not describe a valid object.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A well-formed request the library declines to answer, e.g. because the result would
    /// depend on a density hypothesis that the caller has not granted.
    #[error("refused: {0}")]
    Refused(String),
    /// A configured size bound was exceeded.
    #[error("bound exceeded: {what} needs {needed}, limit is {limit}")]
    TooLarge {
        what: String,
        needed: u64,
        limit: u64,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn refused(msg: impl Into<String>) -> Self {
        Error::Refused(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Size limits shared by the enumeration routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    /// Largest residue ring O/f that will be enumerated.
    pub residue_norm: u64,
    /// Largest monoid or group that will be tabulated.
    pub monoid_size: u64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            residue_norm: 1_000_000,
            monoid_size: 10_000,
        }
    }
}

impl Bounds {
    pub(crate) fn check_residue(&self, what: &str, needed: u64) -> Result<()> {
        if needed > self.residue_norm {
            return Err(Error::TooLarge {
                what: what.to_string(),
                needed,
                limit: self.residue_norm,
            });
        }
        Ok(())
    }

    pub(crate) fn check_monoid(&self, what: &str, needed: u64) -> Result<()> {
        if needed > self.monoid_size {
            return Err(Error::TooLarge {
                what: what.to_string(),
                needed,
                limit: self.monoid_size,
            });
        }
        Ok(())
    }
}

/// Serializes big integers as plain numbers when they fit in `i64`, else as decimal strings.
pub mod big_serde {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use serde::ser::{SerializeSeq, Serializer};

    pub fn int<S: Serializer>(x: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x.to_i64() {
            Some(v) => s.serialize_i64(v),
            None => s.collect_str(x),
        }
    }

    struct One<'a>(&'a BigInt);

    impl serde::Serialize for One<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            int(self.0, s)
        }
    }

    pub fn vec<S: Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&One(x))?;
        }
        seq.end()
    }

    struct Row<'a>(&'a [BigInt]);

    impl serde::Serialize for Row<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            vec(self.0, s)
        }
    }

    pub fn matrix<S: Serializer>(m: &[Vec<BigInt>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.len()))?;
        for r in m {
            seq.serialize_element(&Row(r))?;
        }
        seq.end()
    }

    pub fn opt_int<S: Serializer>(x: &Option<BigInt>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(v) => int(v, s),
            None => s.serialize_none(),
        }
    }
}
