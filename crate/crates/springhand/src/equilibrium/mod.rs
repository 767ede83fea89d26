//! Quasi-static equilibrium of the hand under actuator commands and
//! contacts.

mod compiled;
mod grasp;
mod load;
mod solver;

pub use grasp::{grasp_quality, GraspQuality};
pub use load::{max_supported_load, LoadRampOptions, LoadTestOutcome};

use nalgebra::{DVector, Isometry3, Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::configuration::Configuration;
use crate::contact::{ContactPoint, ContactSet};
use crate::error::{ModelError, SolveError};
use crate::hand::{BodyRef, HandModel};
use crate::object::ObjectSet;
use crate::tendon::{ActuatorMode, TendonNetwork};

use compiled::CompiledNetwork;
use solver::SolveCtx;

/// How tangential contact forces are treated between solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionMode {
    /// Anchors stay where they were set; friction-cone violations are
    /// reported, not resolved. Used for load ramps where slipping is a
    /// failure.
    #[default]
    Sticking,
    /// Anchors are dragged back to the cone surface until consistent;
    /// contacts may slide quasi-statically (wiping, sweeping).
    Sliding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquilibriumOptions {
    /// Joint torque residual tolerance, Nm.
    pub tolerance: f64,
    /// Object force residual tolerance, N.
    pub object_tolerance: f64,
    /// Total inner-iteration budget for one solve.
    pub max_iter: usize,
    /// Backtracking factor of the line search.
    pub damping: f64,
    /// Friction cone discretization for closure tests.
    pub cone_edges: usize,
    /// Contact activation distance, m.
    pub penetration_tol: f64,
    /// Normal contact penalty stiffness, N/m.
    pub contact_stiffness: f64,
    /// Tangential (sticking) stiffness, N/m.
    pub tangent_stiffness: f64,
    /// Weak tether on free objects, N/m.
    pub object_regularization: f64,
    /// Free-object displacement treated as escape, m.
    pub escape_radius: f64,
    /// Interpenetration at convergence treated as infeasible, m.
    pub infeasible_penetration: f64,
    pub friction_mode: FrictionMode,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            object_tolerance: 1e-7,
            max_iter: 5000,
            damping: 0.5,
            cone_edges: 8,
            penetration_tol: 1e-5,
            contact_stiffness: 1e7,
            tangent_stiffness: 2e5,
            object_regularization: 1e-5,
            escape_radius: 0.3,
            infeasible_penetration: 1e-3,
            friction_mode: FrictionMode::Sticking,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    #[default]
    None,
    TensionCapacity,
    Slip,
    RomLimit,
}

impl FailureMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailureMode::None => "none",
            FailureMode::TensionCapacity => "tension_capacity",
            FailureMode::Slip => "slip",
            FailureMode::RomLimit => "rom_limit",
        }
    }
}

/// Converged quasi-static state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub q: Configuration,
    /// Actuator tensions in declaration order.
    pub actuator_tensions: Vec<(String, f64)>,
    /// Per-path branch tensions in declaration order.
    pub branch_tensions: Vec<(String, f64)>,
    pub contacts: ContactSet,
    /// Torque residual over unconstrained DOFs, Nm.
    pub residual: f64,
    /// Force residual over free objects, N.
    pub object_residual: f64,
    pub converged: bool,
    pub failure_mode: FailureMode,
    pub object_offsets: Vec<Vector3<f64>>,
    /// DOF names held at a ROM bound by the solution.
    pub rom_pinned: Vec<String>,
    /// Paths whose tension exceeds their actuator's capacity.
    pub capacity_violations: Vec<String>,
    /// Indices into `contacts` outside their friction cone.
    pub cone_violations: Vec<usize>,
    pub iterations: usize,
    pub energy: f64,
}

impl EquilibriumResult {
    /// Largest interpenetration across reported contacts, m.
    pub fn max_penetration(&self, options: &EquilibriumOptions) -> f64 {
        self.contacts
            .contacts
            .iter()
            .map(|c| c.normal_force / options.contact_stiffness)
            .fold(0.0, f64::max)
    }
}

/// A hand-surface sample participating in contact.
#[derive(Debug, Clone)]
pub(crate) struct SampleDef {
    pub body: BodyRef,
    pub sample: usize,
    pub local: Point3<f64>,
}

/// Persistent friction anchor of one (sample, object) pair.
#[derive(Debug, Clone)]
pub(crate) struct Anchor {
    pub sample: usize,
    pub object: usize,
    /// World anchor position at zero object offset.
    pub base: Point3<f64>,
    /// Frozen contact normal (refreshed between inner solves).
    pub normal: Unit<Vector3<f64>>,
}

/// A reusable solver: owns the warm-start state (configuration, object
/// offsets, friction anchors) across schedule steps.
#[derive(Debug, Clone)]
pub struct EquilibriumSession {
    hand: HandModel,
    network: TendonNetwork,
    net: CompiledNetwork,
    pub options: EquilibriumOptions,
    objects: ObjectSet,
    q: Configuration,
    offsets: Vec<Vector3<f64>>,
    anchors: Vec<Anchor>,
    sample_defs: Vec<SampleDef>,
}

impl EquilibriumSession {
    pub fn new(
        hand: &HandModel,
        network: &TendonNetwork,
        objects: ObjectSet,
        options: EquilibriumOptions,
    ) -> Result<Self, ModelError> {
        for scene in &objects {
            scene.object.shape.validate()?;
            if scene.object.friction < 0.0 {
                return Err(ModelError::InvalidModel(format!(
                    "object `{}` has negative friction",
                    scene.object.id
                )));
            }
        }
        let net = CompiledNetwork::build(network, hand)?;
        let mut sample_defs = Vec::new();
        for (ci, chain) in hand.chains.iter().enumerate() {
            for (li, link) in chain.links.iter().enumerate() {
                for (si, p) in link.surface_samples.iter().enumerate() {
                    sample_defs.push(SampleDef {
                        body: BodyRef::Link {
                            chain: ci,
                            link: li,
                        },
                        sample: si,
                        local: *p,
                    });
                }
            }
        }
        for (si, p) in hand.palm.surface_samples.iter().enumerate() {
            sample_defs.push(SampleDef {
                body: BodyRef::Palm,
                sample: si,
                local: *p,
            });
        }
        let q = Configuration::rest(hand);
        let offsets = vec![Vector3::zeros(); objects.len()];
        Ok(Self {
            hand: hand.clone(),
            network: network.clone(),
            net,
            options,
            objects,
            q,
            offsets,
            anchors: Vec::new(),
            sample_defs,
        })
    }

    pub fn hand(&self) -> &HandModel {
        &self.hand
    }

    pub fn network(&self) -> &TendonNetwork {
        &self.network
    }

    pub fn objects(&self) -> &ObjectSet {
        &self.objects
    }

    pub fn q(&self) -> &Configuration {
        &self.q
    }

    pub fn object_offset(&self, object: usize) -> Vector3<f64> {
        self.offsets[object]
    }

    /// Move the palm frame (wrist motion is a kinematic input).
    pub fn set_palm_pose(&mut self, pose: Isometry3<f64>) {
        self.hand.palm_pose = pose;
    }

    pub fn palm_pose(&self) -> Isometry3<f64> {
        self.hand.palm_pose
    }

    pub fn set_external_force(&mut self, object: usize, force: Vector3<f64>) {
        self.objects[object].external_force = force;
    }

    /// Forget all friction history (fresh grip).
    pub fn reset_friction(&mut self) {
        self.anchors.clear();
    }

    /// Zero the tangential stretch of every anchor, keeping contacts.
    /// Used between grasp acquisition and a load ramp: the settled grip
    /// starts the ramp with no friction pre-load.
    pub fn relax_friction(&mut self) {
        if self.anchors.is_empty() {
            return;
        }
        let commands = BTreeMap::new();
        let ctx = match self.build_ctx(&commands) {
            Ok(c) => c,
            Err(_) => return,
        };
        let x = self.pack(&ctx);
        let fk = ctx.fk(&x);
        let samples = ctx.world_samples(&fk);
        let new_bases: Vec<Point3<f64>> = self
            .anchors
            .iter()
            .map(|a| {
                let t = ctx.offset_of(&x, a.object);
                let p = samples[a.sample];
                let (d, n) = self.objects[a.object].object.signed_distance(&p, &t);
                (p - n.into_inner() * d) - t
            })
            .collect();
        drop(ctx);
        for (a, base) in self.anchors.iter_mut().zip(new_bases) {
            a.base = base;
        }
    }

    fn free_object_indices(&self) -> Vec<usize> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, s)| s.free)
            .map(|(i, _)| i)
            .collect()
    }

    fn build_ctx(&self, commands: &BTreeMap<String, f64>) -> Result<SolveCtx<'_>, SolveError> {
        let mut cmd = vec![0.0; self.net.actuators.len()];
        for (id, value) in commands {
            let a = self
                .net
                .actuators
                .iter()
                .position(|a| &a.id == id)
                .ok_or_else(|| {
                    SolveError::Model(ModelError::NetworkConsistency(format!(
                        "command for unknown actuator `{id}`"
                    )))
                })?;
            let act = &self.net.actuators[a];
            match act.mode {
                ActuatorMode::TensionCommanded => {
                    if *value < 0.0 {
                        return Err(SolveError::Model(ModelError::SlackViolation(*value)));
                    }
                    if *value > act.tension_capacity {
                        return Err(SolveError::Model(ModelError::InvalidModel(format!(
                            "tension command {value} N exceeds capacity {} N of `{id}`",
                            act.tension_capacity
                        ))));
                    }
                }
                ActuatorMode::LengthCommanded => {
                    if *value < act.excursion_limits[0] || *value > act.excursion_limits[1] {
                        return Err(SolveError::Model(ModelError::InvalidModel(format!(
                            "length command {value} m outside excursion limits of `{id}`"
                        ))));
                    }
                }
            }
            cmd[a] = *value;
        }
        let mut ctx = SolveCtx {
            hand: &self.hand,
            net: &self.net,
            opts: &self.options,
            objects: &self.objects,
            sample_defs: &self.sample_defs,
            commands: cmd,
            free_objects: self.free_object_indices(),
            rigidity_tension: 0.0,
            n_q: self.hand.dof_count(),
        };
        // Freeze the stiffening tension from the current state; exact for
        // tension-commanded rigidity actuators.
        let x = pack_state(&ctx, &self.q, &self.offsets);
        ctx.rigidity_tension = ctx.actuator_tension(self.net.rigidity_actuator, &x);
        Ok(ctx)
    }

    fn pack(&self, ctx: &SolveCtx) -> DVector<f64> {
        pack_state(ctx, &self.q, &self.offsets)
    }

    /// Solve the quasi-static equilibrium for one set of actuator
    /// commands, warm-starting from the session state. On error the
    /// session is left unchanged.
    pub fn solve(
        &mut self,
        commands: &BTreeMap<String, f64>,
    ) -> Result<EquilibriumResult, SolveError> {
        let saved_anchors = self.anchors.clone();
        let mut anchors = std::mem::take(&mut self.anchors);

        let outcome = {
            let ctx = match self.build_ctx(commands) {
                Ok(c) => c,
                Err(e) => {
                    self.anchors = saved_anchors;
                    return Err(e);
                }
            };
            let x0 = self.pack(&ctx);
            run_outer(&ctx, x0, &mut anchors)
        };

        match outcome {
            Ok(outer) => {
                let ctx = self.build_ctx(commands)?;
                let result = assemble_result(&ctx, &anchors, &outer);
                drop(ctx);
                if let Err(e) = &result {
                    let _ = e;
                }
                match result {
                    Ok(res) => {
                        // Adopt the converged state.
                        let n_q = self.hand.dof_count();
                        self.q = Configuration::new(outer.x.as_slice()[..n_q].to_vec());
                        for (k, oi) in self.free_object_indices().iter().enumerate() {
                            self.offsets[*oi] = Vector3::new(
                                outer.x[n_q + 3 * k],
                                outer.x[n_q + 3 * k + 1],
                                outer.x[n_q + 3 * k + 2],
                            );
                        }
                        self.anchors = anchors;
                        Ok(res)
                    }
                    Err(e) => {
                        self.anchors = saved_anchors;
                        Err(e)
                    }
                }
            }
            Err(e) => {
                self.anchors = saved_anchors;
                Err(e)
            }
        }
    }
}

fn pack_state(ctx: &SolveCtx, q: &Configuration, offsets: &[Vector3<f64>]) -> DVector<f64> {
    let mut x = DVector::zeros(ctx.dim());
    for i in 0..ctx.n_q {
        x[i] = q[i];
    }
    for (k, &oi) in ctx.free_objects.iter().enumerate() {
        for c in 0..3 {
            x[ctx.n_q + 3 * k + c] = offsets[oi][c];
        }
    }
    x
}

struct OuterOutcome {
    x: DVector<f64>,
    residual: f64,
    object_residual: f64,
    iterations: usize,
    converged: bool,
}

/// Outer fixed-point loop: maintain anchors, run the inner Newton, drag
/// sliding anchors, repeat until the contact state is stationary.
fn run_outer(
    ctx: &SolveCtx,
    x0: DVector<f64>,
    anchors: &mut Vec<Anchor>,
) -> Result<OuterOutcome, SolveError> {
    let mut x = x0;
    let mut total_iterations = 0usize;
    for _outer in 0..120 {
        sync_anchors(ctx, anchors, &x);
        let budget = ctx
            .opts
            .max_iter
            .saturating_sub(total_iterations)
            .min(600);
        if budget == 0 {
            return Err(SolveError::Diverged {
                iterations: total_iterations,
                residual: f64::NAN,
            });
        }
        let out = ctx.newton(x, anchors, budget)?;
        total_iterations += out.iterations.max(1);
        x = out.x;

        let drags = if ctx.opts.friction_mode == FrictionMode::Sliding {
            drag_anchors(ctx, anchors, &x)
        } else {
            0
        };
        let changes = sync_anchors(ctx, anchors, &x);

        if out.converged && drags == 0 && changes == 0 {
            return Ok(OuterOutcome {
                x,
                residual: out.residual,
                object_residual: out.object_residual,
                iterations: total_iterations,
                converged: true,
            });
        }
        if !out.converged && total_iterations >= ctx.opts.max_iter {
            return Err(SolveError::Diverged {
                iterations: total_iterations,
                residual: out.residual,
            });
        }
    }
    Err(SolveError::Diverged {
        iterations: total_iterations,
        residual: f64::NAN,
    })
}

/// Create anchors for touching pairs, release separated ones, refresh
/// normals. Returns the number of set changes.
fn sync_anchors(ctx: &SolveCtx, anchors: &mut Vec<Anchor>, x: &DVector<f64>) -> usize {
    let fk = ctx.fk(x);
    let samples = ctx.world_samples(&fk);
    let act_tol = ctx.opts.penetration_tol;
    let release_tol = 10.0 * act_tol;
    let mut changes = 0;

    anchors.retain(|a| {
        let t = ctx.offset_of(x, a.object);
        let (d, _) = ctx.objects[a.object]
            .object
            .signed_distance(&samples[a.sample], &t);
        if d > release_tol {
            changes += 1;
            false
        } else {
            true
        }
    });

    for (si, p) in samples.iter().enumerate() {
        for (oi, scene) in ctx.objects.iter().enumerate() {
            let t = ctx.offset_of(x, oi);
            let (d, n) = scene.object.signed_distance(p, &t);
            match anchors
                .iter_mut()
                .find(|a| a.sample == si && a.object == oi)
            {
                Some(a) => {
                    if a.normal.dot(&n) < 1.0 - 1e-8 {
                        changes += 1;
                    }
                    a.normal = n;
                }
                None => {
                    if d <= act_tol {
                        let surface = p - n.into_inner() * d;
                        anchors.push(Anchor {
                            sample: si,
                            object: oi,
                            base: surface - t,
                            normal: n,
                        });
                        changes += 1;
                    }
                }
            }
        }
    }
    anchors.sort_by_key(|a| (a.sample, a.object));
    changes
}

/// Drag anchors whose tangential force exceeds the cone back onto the
/// cone surface. Returns the number of drags.
fn drag_anchors(ctx: &SolveCtx, anchors: &mut [Anchor], x: &DVector<f64>) -> usize {
    let fk = ctx.fk(x);
    let samples = ctx.world_samples(&fk);
    let kn = ctx.opts.contact_stiffness;
    let mut drags = 0;
    for a in anchors.iter_mut() {
        let kt = ctx.anchor_stiffness(a);
        if kt == 0.0 {
            continue;
        }
        let t = ctx.offset_of(x, a.object);
        let p = samples[a.sample];
        let (d, _) = ctx.objects[a.object].object.signed_distance(&p, &t);
        let pen = (-d).max(0.0);
        let cap = ctx.objects[a.object].object.friction * kn * pen;
        let nrm = a.normal.into_inner();
        let delta = p - (a.base + t);
        let dt = delta - nrm * nrm.dot(&delta);
        let ft = kt * dt.norm();
        if ft > cap * (1.0 + 1e-9) + 1e-12 {
            let dir = dt / dt.norm();
            let excess = (ft - cap) / kt;
            a.base += dir * excess;
            drags += 1;
        }
    }
    drags
}

/// Build the reported result for a converged state.
fn assemble_result(
    ctx: &SolveCtx,
    anchors: &[Anchor],
    outer: &OuterOutcome,
) -> Result<EquilibriumResult, SolveError> {
    let x = &outer.x;
    let contacts = assemble_contacts(ctx, anchors, x);

    let max_pen = contacts
        .contacts
        .iter()
        .map(|c| c.normal_force / ctx.opts.contact_stiffness)
        .fold(0.0, f64::max);
    if outer.converged && max_pen > ctx.opts.infeasible_penetration {
        return Err(SolveError::ContactInfeasible(format!(
            "{max_pen:.6} m of interpenetration remains at equilibrium"
        )));
    }

    let actuator_tensions: Vec<(String, f64)> = ctx
        .net
        .actuators
        .iter()
        .enumerate()
        .map(|(a, act)| (act.id.clone(), ctx.actuator_tension(a, x)))
        .collect();
    let branch_tensions: Vec<(String, f64)> = ctx
        .net
        .paths
        .iter()
        .map(|p| (p.id.clone(), actuator_tensions[p.actuator].1 * p.factor))
        .collect();

    let mut capacity_violations = Vec::new();
    for p in &ctx.net.paths {
        let tension = actuator_tensions[p.actuator].1 * p.factor;
        if tension > ctx.net.actuators[p.actuator].tension_capacity + 1e-9 {
            capacity_violations.push(p.id.clone());
        }
    }

    let cone_violations: Vec<usize> = contacts
        .contacts
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.within_friction_cone(1e-9))
        .map(|(i, _)| i)
        .collect();

    // Final gradient for ROM pin reporting.
    let (energy, g, _) = ctx.grad_hess(x, anchors);
    let mut rom_pinned = Vec::new();
    for (i, d) in ctx.hand.dofs().iter().enumerate() {
        let at_lo = x[i] <= d.rom[0] + 1e-12;
        let at_hi = x[i] >= d.rom[1] - 1e-12;
        if (at_lo && g[i] > ctx.opts.tolerance) || (at_hi && g[i] < -ctx.opts.tolerance) {
            rom_pinned.push(d.name.clone());
        }
    }

    let failure_mode = if !capacity_violations.is_empty() {
        FailureMode::TensionCapacity
    } else if ctx.opts.friction_mode == FrictionMode::Sticking && !cone_violations.is_empty() {
        FailureMode::Slip
    } else {
        FailureMode::None
    };

    let object_offsets: Vec<Vector3<f64>> = (0..ctx.objects.len())
        .map(|oi| ctx.offset_of(x, oi))
        .collect();

    Ok(EquilibriumResult {
        q: ctx.q_of(x),
        actuator_tensions,
        branch_tensions,
        contacts,
        residual: outer.residual,
        object_residual: outer.object_residual,
        converged: outer.converged,
        failure_mode,
        object_offsets,
        rom_pinned,
        capacity_violations,
        cone_violations,
        iterations: outer.iterations,
        energy,
    })
}

/// Build the reported contact set for a state.
fn assemble_contacts(ctx: &SolveCtx, anchors: &[Anchor], x: &DVector<f64>) -> ContactSet {
    let fk = ctx.fk(x);
    let samples = ctx.world_samples(&fk);
    let kn = ctx.opts.contact_stiffness;
    let mut contacts = Vec::new();
    for a in anchors {
        let t = ctx.offset_of(x, a.object);
        let p = samples[a.sample];
        let scene = &ctx.objects[a.object];
        let (d, n) = scene.object.signed_distance(&p, &t);
        let pen = (-d).max(0.0);
        let fnormal = kn * pen;
        let kt = ctx.anchor_stiffness(a);
        let nrm = a.normal.into_inner();
        let delta = p - (a.base + t);
        let dt = delta - nrm * nrm.dot(&delta);
        let ft_hand = -dt * kt;
        if fnormal <= 0.0 && ft_hand.norm() < 1e-15 {
            continue;
        }
        contacts.push(ContactPoint {
            position: p - n.into_inner() * d,
            normal: n,
            normal_force: fnormal,
            tangential_force: ft_hand,
            owner: ctx.sample_defs[a.sample].body,
            sample: ctx.sample_defs[a.sample].sample,
            object: a.object,
            separation: d.max(0.0),
            friction: scene.object.friction,
        });
    }
    ContactSet { contacts }
}

/// One-shot equilibrium solve from the rest pose.
pub fn solve_equilibrium(
    hand: &HandModel,
    network: &TendonNetwork,
    commands: &BTreeMap<String, f64>,
    objects: ObjectSet,
    options: EquilibriumOptions,
) -> Result<EquilibriumResult, SolveError> {
    let mut session =
        EquilibriumSession::new(hand, network, objects, options).map_err(SolveError::Model)?;
    session.solve(commands)
}
