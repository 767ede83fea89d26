//! Network data resolved against a hand model for the solver hot path.

use nalgebra::DVector;

use crate::error::ModelError;
use crate::hand::HandModel;
use crate::joint::AxisLabel;
use crate::tendon::{Actuator, PathTerminal, TendonNetwork};

#[derive(Debug, Clone)]
pub(crate) struct CompiledPath {
    pub id: String,
    pub actuator: usize,
    /// Tension carried by this path per unit actuator tension.
    pub factor: f64,
    /// (global dof id, moment arm).
    pub segments: Vec<(usize, f64)>,
}

/// Tendon network with DOF names resolved and junction shares folded in.
#[derive(Debug, Clone)]
pub(crate) struct CompiledNetwork {
    pub actuators: Vec<Actuator>,
    pub paths: Vec<CompiledPath>,
    /// Reel-in gearing per actuator: u_a(q) = g_a . (q - rest).
    pub gearing: Vec<DVector<f64>>,
    /// Abduction stiffening: (dof id, coefficient); the added stiffness is
    /// coefficient * rigidity actuator tension.
    pub stiffening: Vec<(usize, f64)>,
    pub rigidity_actuator: usize,
    pub actuator_stiffness: f64,
}

impl CompiledNetwork {
    pub fn build(network: &TendonNetwork, hand: &HandModel) -> Result<Self, ModelError> {
        let factors = network.tension_factors()?;
        let n = hand.dof_count();

        let actuators = network.actuators.clone();
        let actuator_index = |id: &str| actuators.iter().position(|a| a.id == id);

        let rigidity_actuator = actuator_index(&network.rigidity_actuator).ok_or_else(|| {
            ModelError::NetworkConsistency(format!(
                "rigidity actuator `{}` not declared",
                network.rigidity_actuator
            ))
        })?;

        let mut paths = Vec::with_capacity(network.paths.len());
        for p in &network.paths {
            let actuator = actuator_index(&p.actuator).ok_or_else(|| {
                ModelError::NetworkConsistency(format!(
                    "path `{}` references unknown actuator `{}`",
                    p.id, p.actuator
                ))
            })?;
            let mut segments = Vec::with_capacity(p.segments.len());
            for s in &p.segments {
                let gid = hand.dof_id_by_name(&s.dof).ok_or_else(|| {
                    ModelError::NetworkConsistency(format!(
                        "path `{}` references unknown dof `{}`",
                        p.id, s.dof
                    ))
                })?;
                segments.push((gid, s.moment_arm));
            }
            paths.push(CompiledPath {
                id: p.id.clone(),
                actuator,
                factor: factors[&p.id],
                segments,
            });
        }

        let mut gearing = vec![DVector::zeros(n); actuators.len()];
        for p in &paths {
            for (gid, arm) in &p.segments {
                gearing[p.actuator][*gid] += p.factor * arm;
            }
        }

        // Antagonist interossei pairs: leaf paths of the rigidity actuator
        // with a single abduction segment, grouped per DOF.
        let geom = network.rigidity_geometry;
        let mut stiffening: Vec<(usize, f64)> = Vec::new();
        for (p, raw) in paths.iter().zip(&network.paths) {
            if p.actuator != rigidity_actuator
                || !matches!(raw.terminal, PathTerminal::Anchor(_))
                || p.segments.len() != 1
            {
                continue;
            }
            let (gid, _) = p.segments[0];
            if hand.dofs()[gid].axis_label != AxisLabel::Abduction {
                continue;
            }
            // Each antagonist wire at tension f*T adds f*T*r^2/L of lateral
            // stiffness; the pair entry accumulates both.
            let coeff = p.factor * geom.moment_arm * geom.moment_arm / geom.free_span;
            match stiffening.iter_mut().find(|(g, _)| *g == gid) {
                Some((_, c)) => *c += coeff,
                None => stiffening.push((gid, coeff)),
            }
        }

        Ok(Self {
            actuators,
            paths,
            gearing,
            stiffening,
            rigidity_actuator,
            actuator_stiffness: network.actuator_stiffness,
        })
    }
}
