//! Design and verification of distributed views over multi-source
//! relational schemas.
//!
//! The crate computes minimally informative useful views for a conjunctive
//! utility query, decides determinacy with a chase-based procedure, and
//! decides or refutes non-disclosure of secret queries.

pub mod canonical;
pub mod chase;
pub mod determinacy;
pub mod disclosure;
pub mod fixtures;
pub mod homomorphism;
pub mod minimize;
pub mod model;
pub mod oracle;
pub mod ra;
pub mod random;
pub mod replication;
pub mod shuffle;

use serde::Serialize;

/// Three-valued answer of semi-decision procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

impl Tri {
    pub fn and(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::No, _) | (_, Tri::No) => Tri::No,
            (Tri::Yes, Tri::Yes) => Tri::Yes,
            _ => Tri::Unknown,
        }
    }

    pub fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::Yes, _) | (_, Tri::Yes) => Tri::Yes,
            (Tri::No, Tri::No) => Tri::No,
            _ => Tri::Unknown,
        }
    }
}

impl From<bool> for Tri {
    fn from(b: bool) -> Tri {
        if b {
            Tri::Yes
        } else {
            Tri::No
        }
    }
}
