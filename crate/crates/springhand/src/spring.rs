//! Machined-spring elements and serial/parallel composition.
//!
//! Joint compliances are given as angular deflection per unit torque
//! (deg/Nm). Springs connected in series add compliances (each member
//! deflects under the full torque); springs in parallel share the
//! deflection, so their stiffnesses add.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::units::stiffness_from_compliance_deg;

/// A single machined-spring bending stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringElement {
    /// Angular compliance in deg/Nm, as tabulated.
    pub compliance_deg_per_nm: f64,
}

impl SpringElement {
    pub fn new(compliance_deg_per_nm: f64) -> Result<Self, ModelError> {
        if !(compliance_deg_per_nm > 0.0) || !compliance_deg_per_nm.is_finite() {
            return Err(ModelError::InvalidModel(format!(
                "spring compliance must be positive and finite, got {compliance_deg_per_nm} deg/Nm"
            )));
        }
        Ok(Self {
            compliance_deg_per_nm,
        })
    }

    /// Stiffness in Nm/rad.
    pub fn stiffness(&self) -> f64 {
        stiffness_from_compliance_deg(self.compliance_deg_per_nm)
    }
}

/// Composition tree of machined springs forming one bending DOF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpringArrangement {
    Single(SpringElement),
    Series(Vec<SpringArrangement>),
    Parallel(Vec<SpringArrangement>),
}

impl SpringArrangement {
    pub fn single(compliance_deg_per_nm: f64) -> Result<Self, ModelError> {
        Ok(SpringArrangement::Single(SpringElement::new(
            compliance_deg_per_nm,
        )?))
    }

    /// Composite compliance of the tree in deg/Nm.
    ///
    /// series(c1..cn) -> sum(ci); parallel(c1..cn) -> 1 / sum(1/ci).
    pub fn composite_compliance(&self) -> Result<f64, ModelError> {
        match self {
            SpringArrangement::Single(s) => {
                // Re-validate: deserialized trees bypass the constructor.
                if !(s.compliance_deg_per_nm > 0.0) || !s.compliance_deg_per_nm.is_finite() {
                    return Err(ModelError::InvalidModel(format!(
                        "spring compliance must be positive and finite, got {} deg/Nm",
                        s.compliance_deg_per_nm
                    )));
                }
                Ok(s.compliance_deg_per_nm)
            }
            SpringArrangement::Series(members) => {
                if members.is_empty() {
                    return Err(ModelError::InvalidModel(
                        "series spring group is empty".into(),
                    ));
                }
                let mut total = 0.0;
                for m in members {
                    total += m.composite_compliance()?;
                }
                Ok(total)
            }
            SpringArrangement::Parallel(members) => {
                if members.is_empty() {
                    return Err(ModelError::InvalidModel(
                        "parallel spring group is empty".into(),
                    ));
                }
                let mut inv_sum = 0.0;
                for m in members {
                    inv_sum += 1.0 / m.composite_compliance()?;
                }
                Ok(1.0 / inv_sum)
            }
        }
    }

    /// Composite stiffness in Nm/rad derived from the composite compliance.
    pub fn composite_stiffness(&self) -> Result<f64, ModelError> {
        Ok(stiffness_from_compliance_deg(self.composite_compliance()?))
    }
}

/// Standalone form of the composition operation.
pub fn composite_compliance(arrangement: &SpringArrangement) -> Result<f64, ModelError> {
    arrangement.composite_compliance()
}
