//! Maximum supported load: ramp and bisection over an external pull.

use nalgebra::Vector3;
use std::collections::BTreeMap;

use crate::error::SolveError;

use super::{EquilibriumResult, EquilibriumSession, FailureMode, FrictionMode};

#[derive(Debug, Clone)]
pub struct LoadRampOptions {
    /// Unit direction of the external pull on the object.
    pub direction: Vector3<f64>,
    /// Scene index of the loaded object.
    pub object: usize,
    /// First probed level and geometric ramp seed, N.
    pub initial_step: f64,
    /// Ramp ceiling, N.
    pub max_load: f64,
    /// Bisection resolution, N.
    pub resolution: f64,
}

impl Default for LoadRampOptions {
    fn default() -> Self {
        Self {
            direction: Vector3::new(0.0, 0.0, 1.0),
            object: 0,
            initial_step: 50.0,
            max_load: 3000.0,
            resolution: 1.0,
        }
    }
}

/// One probed load level.
#[derive(Debug, Clone)]
pub struct LoadProbe {
    pub level: f64,
    pub sustained: bool,
    pub failure_mode: FailureMode,
    /// Present when the probe solve converged (a failed probe may still
    /// converge and fail its checks).
    pub result: Option<EquilibriumResult>,
}

#[derive(Debug, Clone)]
pub struct LoadTestOutcome {
    /// Largest sustained load, N.
    pub max_load: f64,
    /// First violated constraint at the failing level (None if the ramp
    /// ceiling was reached without failure).
    pub failure_mode: FailureMode,
    pub probes: Vec<LoadProbe>,
}

/// Ramp the external load on a grasped object until a constraint breaks,
/// then bisect to `resolution`.
///
/// The session must hold a converged grasp. Probes run in sticking mode:
/// a contact leaving its friction cone is a slip failure, a branch over
/// its actuator's capacity is a tension failure, and a diverged or
/// escaped equilibrium counts as slip (the object was lost). Sustained
/// probes advance the warm-start state; failed probes are discarded.
pub fn max_supported_load(
    session: &mut EquilibriumSession,
    commands: &BTreeMap<String, f64>,
    ramp: &LoadRampOptions,
) -> Result<LoadTestOutcome, SolveError> {
    let mut base = session.clone();
    base.options.friction_mode = FrictionMode::Sticking;
    base.relax_friction();
    let dir = ramp.direction.normalize();
    let mut probes: Vec<LoadProbe> = Vec::new();

    let mut probe = |base: &mut EquilibriumSession,
                     level: f64,
                     probes: &mut Vec<LoadProbe>|
     -> Result<bool, SolveError> {
        let mut trial = base.clone();
        trial.set_external_force(ramp.object, dir * level);
        let (sustained, mode, result) = match trial.solve(commands) {
            Ok(res) => {
                if !res.converged {
                    (false, FailureMode::Slip, Some(res))
                } else if !res.capacity_violations.is_empty() {
                    (false, FailureMode::TensionCapacity, Some(res))
                } else if !res.cone_violations.is_empty() {
                    (false, FailureMode::Slip, Some(res))
                } else {
                    (true, FailureMode::None, Some(res))
                }
            }
            Err(SolveError::Diverged { .. }) | Err(SolveError::ContactInfeasible(_)) => {
                (false, FailureMode::Slip, None)
            }
            Err(e) => return Err(e),
        };
        probes.push(LoadProbe {
            level,
            sustained,
            failure_mode: mode,
            result,
        });
        if sustained {
            *base = trial;
        }
        Ok(sustained)
    };

    // The unloaded grasp must hold before ramping.
    if !probe(&mut base, 0.0, &mut probes)? {
        let mode = probes.last().unwrap().failure_mode;
        return Ok(LoadTestOutcome {
            max_load: 0.0,
            failure_mode: mode,
            probes,
        });
    }

    let mut lo = 0.0f64;
    let mut hi: Option<f64> = None;
    let mut level = ramp.initial_step.max(ramp.resolution);
    while level <= ramp.max_load {
        if probe(&mut base, level, &mut probes)? {
            lo = level;
            level *= 2.0;
        } else {
            hi = Some(level);
            break;
        }
    }

    let Some(mut hi) = hi else {
        // Nothing broke up to the ceiling.
        return Ok(LoadTestOutcome {
            max_load: lo,
            failure_mode: FailureMode::None,
            probes,
        });
    };
    let mut fail_mode = probes.last().unwrap().failure_mode;

    while hi - lo > ramp.resolution {
        let mid = 0.5 * (lo + hi);
        if probe(&mut base, mid, &mut probes)? {
            lo = mid;
        } else {
            hi = mid;
            fail_mode = probes.last().unwrap().failure_mode;
        }
    }

    *session = base;
    Ok(LoadTestOutcome {
        max_load: lo,
        failure_mode: fail_mode,
        probes,
    })
}
