//! Complex structures on `ξ`, stored through their action on one section.
//!
//! A structure is a pair `(E, JE)` of sections of `ξ` with `dα(E, JE) > 0`; this fixes
//! `J` on `ξ`, and `J(X) = 0` on the Reeb direction.

use std::fmt;

use super::data::ContactData;
use crate::chart::linalg::{add, scale};
use crate::chart::{Backend, JetVec, SharedScalar, SharedVector};
use crate::{Error, Point, Result};

pub trait ComplexStructure: Send + Sync {
    /// Jets of `(E, JE)` at `p`.
    fn pair(&self, p: &Point, order: usize) -> Result<(JetVec, JetVec)>;

    fn backend(&self) -> Backend;

    fn describe(&self) -> String;
}

/// `J` given directly by two vector fields with `J(e) = je`.
#[derive(Clone)]
pub struct FramePair {
    pub e: SharedVector,
    pub je: SharedVector,
}

impl ComplexStructure for FramePair {
    fn pair(&self, p: &Point, order: usize) -> Result<(JetVec, JetVec)> {
        Ok((self.e.taylor(p, order)?, self.je.taylor(p, order)?))
    }

    fn backend(&self) -> Backend {
        self.e.backend().combine(self.je.backend())
    }

    fn describe(&self) -> String {
        "frame pair".into()
    }
}

/// `J_*: e ↦ η²Je + λe` on the unit section `e` of a base structure.
///
/// With `J_*(e) = η²Je + λe` the requirement `J_*² = −id` forces
/// `J_*(Je) = −((1+λ²)/η²)e − λJe`, so the pair `(e, η²Je + λe)` describes `J_*`.
#[derive(Clone)]
pub struct Perturbed {
    pub base: ContactData,
    pub lambda: SharedScalar,
    pub eta: SharedScalar,
}

impl ComplexStructure for Perturbed {
    fn pair(&self, p: &Point, order: usize) -> Result<(JetVec, JetVec)> {
        let (e, je) = self.base.unit_section(p, order)?;
        let lambda = self.lambda.taylor(p, order)?;
        let eta = self.eta.taylor(p, order)?;
        if !(eta.value() > 0.0) {
            return Err(Error::InvalidParams(format!(
                "eta = {} is not positive at {p:?}",
                eta.value()
            )));
        }
        let eta2 = eta * eta;
        Ok((e, add(&scale(eta2, &je), &scale(lambda, &e))))
    }

    fn backend(&self) -> Backend {
        self.base
            .backend()
            .combine(self.lambda.backend())
            .combine(self.eta.backend())
    }

    fn describe(&self) -> String {
        format!("perturbation of ({})", self.base.structure.describe())
    }
}

impl fmt::Debug for dyn ComplexStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}
