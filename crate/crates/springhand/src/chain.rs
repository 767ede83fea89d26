//! Finger chains: rigid links joined by elastic spring joints.

use nalgebra::{Isometry3, Point3};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::joint::{AxisLabel, JointSpec};

/// The five fingers, in configuration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerName {
    Thumb,
    Index,
    Middle,
    Ring,
    Little,
}

impl FingerName {
    pub const ALL: [FingerName; 5] = [
        FingerName::Thumb,
        FingerName::Index,
        FingerName::Middle,
        FingerName::Ring,
        FingerName::Little,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FingerName::Thumb => "thumb",
            FingerName::Index => "index",
            FingerName::Middle => "middle",
            FingerName::Ring => "ring",
            FingerName::Little => "little",
        }
    }
}

impl std::fmt::Display for FingerName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A rigid phalanx. Its local frame sits at the proximal joint with +Y
/// running along the bone; the next joint is at (0, length, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    /// Joint-to-joint length in meters.
    pub length: f64,
    /// Surface sample points in the link frame, used for contact detection.
    pub surface_samples: Vec<Point3<f64>>,
}

impl Link {
    pub fn new(length: f64, surface_samples: Vec<Point3<f64>>) -> Result<Self, ModelError> {
        if !(length > 0.0) {
            return Err(ModelError::InvalidModel(format!(
                "link length must be positive, got {length} m"
            )));
        }
        Ok(Self {
            length,
            surface_samples,
        })
    }
}

/// One finger: a base pose on the palm plus alternating joints and links.
///
/// `joints[i]` connects the chain to `links[i]`; both lists have the same
/// length (three for every finger of this hand).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerChain {
    pub name: FingerName,
    /// Pose of the first joint in the palm frame.
    pub base: Isometry3<f64>,
    pub joints: Vec<JointSpec>,
    pub links: Vec<Link>,
}

impl FingerChain {
    pub fn new(
        name: FingerName,
        base: Isometry3<f64>,
        joints: Vec<JointSpec>,
        links: Vec<Link>,
    ) -> Result<Self, ModelError> {
        if joints.len() != links.len() {
            return Err(ModelError::InvalidModel(format!(
                "finger `{name}`: {} joints but {} links",
                joints.len(),
                links.len()
            )));
        }
        if joints.len() != 3 {
            return Err(ModelError::InvalidModel(format!(
                "finger `{name}` must have 3 joints, got {}",
                joints.len()
            )));
        }
        let chain = Self {
            name,
            base,
            joints,
            links,
        };
        chain.check_dof_census()?;
        Ok(chain)
    }

    /// Joint census of the hand: thumb CM carries opposition + abduction,
    /// four-finger MP carries flexion + abduction, every remaining joint
    /// is a single flexion DOF.
    fn check_dof_census(&self) -> Result<(), ModelError> {
        let labels: Vec<Vec<AxisLabel>> = self
            .joints
            .iter()
            .map(|j| j.dofs.iter().map(|d| d.axis_label).collect())
            .collect();
        let expect: Vec<Vec<AxisLabel>> = if self.name == FingerName::Thumb {
            vec![
                vec![AxisLabel::Opposition, AxisLabel::Abduction],
                vec![AxisLabel::Flexion],
                vec![AxisLabel::Flexion],
            ]
        } else {
            vec![
                vec![AxisLabel::Flexion, AxisLabel::Abduction],
                vec![AxisLabel::Flexion],
                vec![AxisLabel::Flexion],
            ]
        };
        if labels != expect {
            return Err(ModelError::InvalidModel(format!(
                "finger `{}` dof layout {labels:?} does not match the hand census",
                self.name
            )));
        }
        Ok(())
    }

    pub fn dof_count(&self) -> usize {
        self.joints.iter().map(|j| j.dofs.len()).sum()
    }
}
