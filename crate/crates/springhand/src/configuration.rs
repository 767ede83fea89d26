//! Joint-angle vectors.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::hand::HandModel;

/// The full joint-angle vector of the hand, radians, ordered by
/// (finger, joint, dof) as listed in [`HandModel::dofs`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub angles: DVector<f64>,
}

impl Configuration {
    pub fn new(angles: Vec<f64>) -> Self {
        Self {
            angles: DVector::from_vec(angles),
        }
    }

    /// Every DOF at its rest angle.
    pub fn rest(hand: &HandModel) -> Self {
        Self {
            angles: DVector::from_iterator(
                hand.dof_count(),
                hand.dofs().iter().map(|d| d.rest_angle),
            ),
        }
    }

    pub fn zeros(hand: &HandModel) -> Self {
        Self {
            angles: DVector::zeros(hand.dof_count()),
        }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn check_shape(&self, hand: &HandModel) -> Result<(), ModelError> {
        if self.len() != hand.dof_count() {
            return Err(ModelError::ConfigurationShape {
                expected: hand.dof_count(),
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Clamp every angle into its DOF's range of motion.
    pub fn clamped_to_rom(&self, hand: &HandModel) -> Self {
        let mut out = self.clone();
        for (i, d) in hand.dofs().iter().enumerate() {
            out.angles[i] = out.angles[i].clamp(d.rom[0], d.rom[1]);
        }
        out
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.angles[i]
    }
}

impl std::ops::IndexMut<usize> for Configuration {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.angles[i]
    }
}
