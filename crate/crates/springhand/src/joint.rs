//! Elastic joint specifications.
//!
//! A joint owns one or two bending DOFs. Each DOF carries a spring
//! composition tree, a rest angle, a range of motion and a rotation axis
//! expressed in the local frame of the chain at that joint.

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::spring::SpringArrangement;

/// What a bending DOF does, anatomically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisLabel {
    Flexion,
    Opposition,
    Abduction,
}

impl AxisLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisLabel::Flexion => "flexion",
            AxisLabel::Opposition => "opposition",
            AxisLabel::Abduction => "abduction",
        }
    }
}

/// One bending DOF of a joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofSpec {
    pub axis_label: AxisLabel,
    /// Spring composition realizing this DOF.
    pub arrangement: SpringArrangement,
    /// Rest angle in rad; the spring torque is zero here.
    pub rest_angle: f64,
    /// Range of motion [min, max] in rad.
    pub rom: [f64; 2],
    /// Rotation axis in the local chain frame at this joint.
    pub axis: Unit<Vector3<f64>>,
    /// Stiffness in Nm/rad derived from `arrangement` at construction.
    base_stiffness: f64,
}

impl DofSpec {
    pub fn new(
        axis_label: AxisLabel,
        arrangement: SpringArrangement,
        rest_angle: f64,
        rom: [f64; 2],
        axis: Vector3<f64>,
    ) -> Result<Self, ModelError> {
        let base_stiffness = arrangement.composite_stiffness()?;
        if !(rom[0] <= rest_angle && rest_angle <= rom[1]) {
            return Err(ModelError::InvalidModel(format!(
                "rest angle {rest_angle} rad outside rom [{}, {}] rad",
                rom[0], rom[1]
            )));
        }
        if axis.norm() == 0.0 {
            return Err(ModelError::InvalidModel("dof axis is zero".into()));
        }
        Ok(Self {
            axis_label,
            arrangement,
            rest_angle,
            rom,
            axis: Unit::new_normalize(axis),
            base_stiffness,
        })
    }

    /// Stiffness in Nm/rad of the composed spring tree.
    pub fn base_stiffness(&self) -> f64 {
        self.base_stiffness
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.rom[0] <= angle && angle <= self.rom[1]
    }
}

/// A joint: a named position along a finger chain holding 1 or 2 DOFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub dofs: Vec<DofSpec>,
}

impl JointSpec {
    pub fn new(name: impl Into<String>, dofs: Vec<DofSpec>) -> Result<Self, ModelError> {
        let name = name.into();
        if dofs.is_empty() || dofs.len() > 2 {
            return Err(ModelError::InvalidModel(format!(
                "joint `{name}` must have 1 or 2 dofs, got {}",
                dofs.len()
            )));
        }
        Ok(Self { name, dofs })
    }

    /// Restoring spring torque at one DOF: tau = -K (angle - rest).
    ///
    /// Angles outside the range of motion are rejected rather than
    /// clamped.
    pub fn torque(&self, dof: usize, angle: f64) -> Result<f64, ModelError> {
        let spec = self.dofs.get(dof).ok_or_else(|| {
            ModelError::InvalidModel(format!(
                "joint `{}` has no dof index {dof}",
                self.name
            ))
        })?;
        if !spec.contains(angle) {
            return Err(ModelError::RomViolation {
                dof: format!("{}/{}", self.name, spec.axis_label.as_str()),
                angle,
                min: spec.rom[0],
                max: spec.rom[1],
            });
        }
        Ok(-spec.base_stiffness * (angle - spec.rest_angle))
    }
}

/// Standalone form of the per-DOF torque operation.
pub fn joint_torque(joint: &JointSpec, dof: usize, angle: f64) -> Result<f64, ModelError> {
    joint.torque(dof, angle)
}
