//! Angle and compliance unit conversions.
//!
//! Description files carry angles in degrees and joint compliances in
//! deg/Nm; everything internal is radians and Nm/rad.

use serde::{Deserialize, Serialize};

pub const DEG_PER_RAD: f64 = 180.0 / std::f64::consts::PI;
pub const RAD_PER_DEG: f64 = std::f64::consts::PI / 180.0;

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * RAD_PER_DEG
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad * DEG_PER_RAD
}

/// Stiffness in Nm/rad equivalent to a compliance given in deg/Nm.
pub fn stiffness_from_compliance_deg(compliance_deg_per_nm: f64) -> f64 {
    1.0 / (compliance_deg_per_nm * RAD_PER_DEG)
}

/// Compliance in deg/Nm equivalent to a stiffness given in Nm/rad.
pub fn compliance_deg_from_stiffness(stiffness_nm_per_rad: f64) -> f64 {
    1.0 / (stiffness_nm_per_rad * RAD_PER_DEG)
}

/// How the numeric spring constants in a hand-description file are read.
///
/// The machined-spring constants are written as deg/Nm compliances by
/// default; `StiffnessNmPerDeg` reads the same numbers as Nm/deg
/// stiffnesses instead (the alternative interpretation of the table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitsMode {
    #[default]
    ComplianceDegPerNm,
    StiffnessNmPerDeg,
}

impl UnitsMode {
    /// Convert a raw table value into a compliance in deg/Nm.
    pub fn to_compliance_deg(self, raw: f64) -> f64 {
        match self {
            UnitsMode::ComplianceDegPerNm => raw,
            UnitsMode::StiffnessNmPerDeg => 1.0 / raw,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stiffness_of_443_deg_per_nm() {
        // 1/(443 * pi/180) Nm/rad = 180/(443 pi)
        let k = stiffness_from_compliance_deg(443.0);
        assert_relative_eq!(k, 180.0 / (443.0 * std::f64::consts::PI), max_relative = 1e-15);
        assert_relative_eq!(k, 0.1293, epsilon = 5e-5);
    }

    #[test]
    fn compliance_stiffness_round_trip() {
        let c = 903.0;
        let k = stiffness_from_compliance_deg(c);
        assert_relative_eq!(compliance_deg_from_stiffness(k), c, epsilon = 1e-12);
    }

    #[test]
    fn units_mode_alternative_reading() {
        // Read as Nm/deg: compliance is the reciprocal.
        let c = UnitsMode::StiffnessNmPerDeg.to_compliance_deg(0.01);
        assert_relative_eq!(c, 100.0, epsilon = 1e-12);
    }
}
