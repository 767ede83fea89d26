//! Damped projected-Newton descent on the quasi-static energy.
//!
//! The state vector is the joint-angle vector plus a translation for
//! every free object. Energy terms: joint springs (with interossei
//! stiffening), tendon work (tension-commanded) or series-elastic
//! stretch (length-commanded), one-sided contact penalties, anchored
//! tangential friction springs, external object forces and a weak
//! object tether that keeps the Hessian definite before contact.

use nalgebra::{DMatrix, DVector, Matrix3xX, Point3, Unit, Vector3};

use crate::configuration::Configuration;
use crate::error::SolveError;
use crate::hand::{BodyRef, HandModel};
use crate::kinematics::{forward_kinematics, FkResult};
use crate::object::SceneObject;
use crate::tendon::ActuatorMode;

use super::compiled::CompiledNetwork;
use super::{Anchor, EquilibriumOptions, SampleDef};

pub(crate) struct SolveCtx<'a> {
    pub hand: &'a HandModel,
    pub net: &'a CompiledNetwork,
    pub opts: &'a EquilibriumOptions,
    pub objects: &'a [SceneObject],
    pub sample_defs: &'a [SampleDef],
    /// Per-actuator command (N or m depending on mode).
    pub commands: Vec<f64>,
    /// Scene indices of free objects, in order.
    pub free_objects: Vec<usize>,
    /// Rigidity-actuator tension frozen for this solve.
    pub rigidity_tension: f64,
    pub n_q: usize,
}

pub(crate) struct NewtonOutcome {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub object_residual: f64,
    pub converged: bool,
}

impl<'a> SolveCtx<'a> {
    pub fn dim(&self) -> usize {
        self.n_q + 3 * self.free_objects.len()
    }

    pub fn q_of(&self, x: &DVector<f64>) -> Configuration {
        Configuration::new(x.as_slice()[..self.n_q].to_vec())
    }

    /// Offset of scene object `oi` under state `x` (zero when fixed).
    pub fn offset_of(&self, x: &DVector<f64>, oi: usize) -> Vector3<f64> {
        match self.free_objects.iter().position(|&f| f == oi) {
            Some(k) => {
                let base = self.n_q + 3 * k;
                Vector3::new(x[base], x[base + 1], x[base + 2])
            }
            None => Vector3::zeros(),
        }
    }

    pub fn fk(&self, x: &DVector<f64>) -> FkResult {
        let q = self.q_of(x);
        forward_kinematics(self.hand, &q).expect("state dimension is fixed by the session")
    }

    pub fn world_samples(&self, fk: &FkResult) -> Vec<Point3<f64>> {
        self.sample_defs
            .iter()
            .map(|s| fk.body_point(self.hand, s.body, &s.local))
            .collect()
    }

    /// Current tension of actuator `a` given the hand part of `x`.
    pub fn actuator_tension(&self, a: usize, x: &DVector<f64>) -> f64 {
        match self.net.actuators[a].mode {
            ActuatorMode::TensionCommanded => self.commands[a],
            ActuatorMode::LengthCommanded => {
                let deficit = self.commands[a] - self.reel_in(a, x);
                if deficit > 0.0 {
                    self.net.actuator_stiffness * deficit
                } else {
                    0.0
                }
            }
        }
    }

    /// Virtual-work reel-in of actuator `a`: g_a . (q - rest).
    pub fn reel_in(&self, a: usize, x: &DVector<f64>) -> f64 {
        let g = &self.net.gearing[a];
        let mut u = 0.0;
        for i in 0..self.n_q {
            u += g[i] * (x[i] - self.hand.dofs()[i].rest_angle);
        }
        u
    }

    /// Effective per-DOF spring stiffness including interossei stiffening.
    fn dof_stiffness(&self, gid: usize) -> f64 {
        let base = self.hand.dofs()[gid].stiffness;
        for (g, coeff) in &self.net.stiffening {
            if *g == gid {
                return base + coeff * self.rigidity_tension;
            }
        }
        base
    }

    pub fn energy(&self, x: &DVector<f64>, anchors: &[Anchor]) -> f64 {
        let fk = self.fk(x);
        let samples = self.world_samples(&fk);
        let mut e = 0.0;

        for i in 0..self.n_q {
            let d = &self.hand.dofs()[i];
            let k = self.dof_stiffness(i);
            let dq = x[i] - d.rest_angle;
            e += 0.5 * k * dq * dq;
        }

        for a in 0..self.net.actuators.len() {
            match self.net.actuators[a].mode {
                ActuatorMode::TensionCommanded => {
                    e -= self.commands[a] * self.reel_in(a, x);
                }
                ActuatorMode::LengthCommanded => {
                    let deficit = self.commands[a] - self.reel_in(a, x);
                    if deficit > 0.0 {
                        e += 0.5 * self.net.actuator_stiffness * deficit * deficit;
                    }
                }
            }
        }

        let kn = self.opts.contact_stiffness;
        for (oi, scene) in self.objects.iter().enumerate() {
            let t = self.offset_of(x, oi);
            for p in &samples {
                let (d, _) = scene.object.signed_distance(p, &t);
                if d < 0.0 {
                    e += 0.5 * kn * d * d;
                }
            }
        }

        for anchor in anchors {
            let kt = self.anchor_stiffness(anchor);
            if kt == 0.0 {
                continue;
            }
            let t = self.offset_of(x, anchor.object);
            let p = samples[anchor.sample];
            let delta = p - (anchor.base + t);
            let dt = delta - anchor.normal.into_inner() * anchor.normal.dot(&delta);
            e += 0.5 * kt * dt.norm_squared();
        }

        for (k, &oi) in self.free_objects.iter().enumerate() {
            let base = self.n_q + 3 * k;
            let t = Vector3::new(x[base], x[base + 1], x[base + 2]);
            e += -self.objects[oi].external_force.dot(&t)
                + 0.5 * self.opts.object_regularization * t.norm_squared();
        }

        e
    }

    pub fn anchor_stiffness(&self, anchor: &Anchor) -> f64 {
        if self.objects[anchor.object].object.friction > 0.0 {
            self.opts.tangent_stiffness
        } else {
            0.0
        }
    }

    /// Energy gradient and Gauss-Newton Hessian.
    pub fn grad_hess(
        &self,
        x: &DVector<f64>,
        anchors: &[Anchor],
    ) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        let fk = self.fk(x);
        let samples = self.world_samples(&fk);
        let mut e = 0.0;

        for i in 0..self.n_q {
            let d = &self.hand.dofs()[i];
            let k = self.dof_stiffness(i);
            let dq = x[i] - d.rest_angle;
            e += 0.5 * k * dq * dq;
            g[i] += k * dq;
            h[(i, i)] += k;
        }

        for a in 0..self.net.actuators.len() {
            let tension = self.actuator_tension(a, x);
            let gear = &self.net.gearing[a];
            match self.net.actuators[a].mode {
                ActuatorMode::TensionCommanded => {
                    e -= tension * self.reel_in(a, x);
                }
                ActuatorMode::LengthCommanded => {
                    let deficit = self.commands[a] - self.reel_in(a, x);
                    if deficit > 0.0 {
                        e += 0.5 * self.net.actuator_stiffness * deficit * deficit;
                        for i in 0..self.n_q {
                            for j in 0..self.n_q {
                                h[(i, j)] += self.net.actuator_stiffness * gear[i] * gear[j];
                            }
                        }
                    }
                }
            }
            if tension > 0.0 {
                for i in 0..self.n_q {
                    g[i] -= tension * gear[i];
                }
            }
        }

        // Jacobians are needed for every loaded sample; cache per sample.
        let mut jac_cache: Vec<Option<Matrix3xX<f64>>> = vec![None; samples.len()];
        let mut jac =
            |si: usize, body: BodyRef, p: &Point3<f64>, cache: &mut Vec<Option<Matrix3xX<f64>>>| {
                if cache[si].is_none() {
                    cache[si] = Some(fk.point_jacobian(self.hand, body, p));
                }
                cache[si].clone().unwrap()
            };

        let kn = self.opts.contact_stiffness;
        for (oi, scene) in self.objects.iter().enumerate() {
            let t = self.offset_of(x, oi);
            let free_base = self
                .free_objects
                .iter()
                .position(|&f| f == oi)
                .map(|k| self.n_q + 3 * k);
            for (si, p) in samples.iter().enumerate() {
                let (d, normal) = scene.object.signed_distance(p, &t);
                if d >= 0.0 {
                    continue;
                }
                let pen = -d;
                let fnormal = kn * pen;
                e += 0.5 * kn * pen * pen;
                let j = jac(si, self.sample_defs[si].body, p, &mut jac_cache);
                let a_vec = j.tr_mul(&normal.into_inner()); // n_q x 1
                for i in 0..self.n_q {
                    g[i] -= fnormal * a_vec[i];
                    for k2 in 0..self.n_q {
                        h[(i, k2)] += kn * a_vec[i] * a_vec[k2];
                    }
                }
                if let Some(ob) = free_base {
                    let nv = normal.into_inner();
                    for c in 0..3 {
                        g[ob + c] += fnormal * nv[c];
                        for c2 in 0..3 {
                            h[(ob + c, ob + c2)] += kn * nv[c] * nv[c2];
                        }
                        for i in 0..self.n_q {
                            let v = -kn * a_vec[i] * nv[c];
                            h[(i, ob + c)] += v;
                            h[(ob + c, i)] += v;
                        }
                    }
                }
            }
        }

        let kt_all = anchors
            .iter()
            .map(|an| self.anchor_stiffness(an))
            .collect::<Vec<_>>();
        for (ai, anchor) in anchors.iter().enumerate() {
            let kt = kt_all[ai];
            if kt == 0.0 {
                continue;
            }
            let t = self.offset_of(x, anchor.object);
            let p = samples[anchor.sample];
            let nrm = anchor.normal.into_inner();
            let delta = p - (anchor.base + t);
            let dt = delta - nrm * nrm.dot(&delta);
            e += 0.5 * kt * dt.norm_squared();
            let j = jac(
                anchor.sample,
                self.sample_defs[anchor.sample].body,
                &p,
                &mut jac_cache,
            );
            // Projector P = I - n n^T applied to the columns of J.
            let pj = {
                let mut pj = j.clone();
                for c in 0..pj.ncols() {
                    let col = pj.column(c).clone_owned();
                    let proj = col - nrm * nrm.dot(&col);
                    pj.set_column(c, &proj);
                }
                pj
            };
            let gq = pj.tr_mul(&dt); // k_t factored in below
            for i in 0..self.n_q {
                g[i] += kt * gq[i];
                for k2 in 0..self.n_q {
                    let mut acc = 0.0;
                    for r in 0..3 {
                        acc += pj[(r, i)] * pj[(r, k2)];
                    }
                    h[(i, k2)] += kt * acc;
                }
            }
            if let Some(kfree) = self.free_objects.iter().position(|&f| f == anchor.object) {
                let ob = self.n_q + 3 * kfree;
                // P as a matrix for the object block.
                let mut pmat = [[0.0; 3]; 3];
                for r in 0..3 {
                    for c in 0..3 {
                        pmat[r][c] = if r == c { 1.0 } else { 0.0 } - nrm[r] * nrm[c];
                    }
                }
                for c in 0..3 {
                    g[ob + c] -= kt * dt[c];
                    for c2 in 0..3 {
                        h[(ob + c, ob + c2)] += kt * pmat[c][c2];
                    }
                    for i in 0..self.n_q {
                        let v = -kt * pj[(c, i)];
                        h[(i, ob + c)] += v;
                        h[(ob + c, i)] += v;
                    }
                }
            }
        }

        for (k, &oi) in self.free_objects.iter().enumerate() {
            let base = self.n_q + 3 * k;
            let t = Vector3::new(x[base], x[base + 1], x[base + 2]);
            let kreg = self.opts.object_regularization;
            e += -self.objects[oi].external_force.dot(&t) + 0.5 * kreg * t.norm_squared();
            for c in 0..3 {
                g[base + c] += -self.objects[oi].external_force[c] + kreg * t[c];
                h[(base + c, base + c)] += kreg;
            }
        }

        (e, g, h)
    }

    /// DOFs pinned at a ROM bound against their gradient.
    fn pinned_set(&self, x: &DVector<f64>, g: &DVector<f64>) -> Vec<bool> {
        let mut pinned = vec![false; self.dim()];
        for (i, d) in self.hand.dofs().iter().enumerate() {
            let at_lo = x[i] <= d.rom[0] + 1e-12;
            let at_hi = x[i] >= d.rom[1] - 1e-12;
            if (at_lo && g[i] > 0.0) || (at_hi && g[i] < 0.0) {
                pinned[i] = true;
            }
        }
        pinned
    }

    fn clamp(&self, x: &mut DVector<f64>) {
        for (i, d) in self.hand.dofs().iter().enumerate() {
            x[i] = x[i].clamp(d.rom[0], d.rom[1]);
        }
    }

    fn check_escape(&self, x: &DVector<f64>) -> Result<(), SolveError> {
        for (k, _) in self.free_objects.iter().enumerate() {
            let base = self.n_q + 3 * k;
            let t = Vector3::new(x[base], x[base + 1], x[base + 2]);
            if t.norm() > self.opts.escape_radius {
                return Err(SolveError::Diverged {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
        }
        Ok(())
    }

    /// Inner minimization with the anchor set frozen.
    pub fn newton(
        &self,
        x0: DVector<f64>,
        anchors: &[Anchor],
        budget: usize,
    ) -> Result<NewtonOutcome, SolveError> {
        let mut x = x0;
        self.clamp(&mut x);
        let mut lambda = 0.0f64;
        let mut iterations = 0;

        loop {
            let (e, g, h) = self.grad_hess(&x, anchors);
            if !e.is_finite() {
                return Err(SolveError::Diverged {
                    iterations,
                    residual: f64::INFINITY,
                });
            }
            let pinned = self.pinned_set(&x, &g);
            let mut residual = 0.0f64;
            for i in 0..self.n_q {
                if !pinned[i] {
                    residual = residual.max(g[i].abs());
                }
            }
            let mut object_residual = 0.0f64;
            for i in self.n_q..self.dim() {
                object_residual = object_residual.max(g[i].abs());
            }
            if residual <= self.opts.tolerance && object_residual <= self.opts.object_tolerance {
                return Ok(NewtonOutcome {
                    x,
                    iterations,
                    residual,
                    object_residual,
                    converged: true,
                });
            }
            if iterations >= budget {
                return Ok(NewtonOutcome {
                    x,
                    iterations,
                    residual,
                    object_residual,
                    converged: false,
                });
            }

            // Reduced system: pinned DOFs get identity rows.
            let mut hr = h.clone();
            let mut gr = g.clone();
            for i in 0..self.dim() {
                if i < self.n_q && pinned[i] {
                    for k2 in 0..self.dim() {
                        hr[(i, k2)] = 0.0;
                        hr[(k2, i)] = 0.0;
                    }
                    hr[(i, i)] = 1.0;
                    gr[i] = 0.0;
                }
            }

            // Levenberg step with escalation on factorization failure or
            // line-search stall.
            let mut step_ok = false;
            let mut tries = 0;
            while !step_ok {
                let mut hl = hr.clone();
                for i in 0..self.dim() {
                    hl[(i, i)] += lambda;
                }
                let dir = match hl.cholesky() {
                    Some(ch) => ch.solve(&(-&gr)),
                    None => {
                        lambda = (lambda * 10.0).max(1e-8);
                        tries += 1;
                        if tries > 60 {
                            return Err(SolveError::Diverged {
                                iterations,
                                residual,
                            });
                        }
                        continue;
                    }
                };

                // Backtracking line search on the clamped step.
                let mut alpha = 1.0;
                let mut accepted = false;
                for _ in 0..45 {
                    let mut xn = &x + &dir * alpha;
                    self.clamp(&mut xn);
                    let delta = &xn - &x;
                    let slope = g.dot(&delta);
                    let en = self.energy(&xn, anchors);
                    if en.is_finite() && en <= e + 1e-4 * slope.min(0.0) && delta.norm() > 0.0 {
                        x = xn;
                        accepted = true;
                        break;
                    }
                    alpha *= self.opts.damping;
                }
                if accepted {
                    step_ok = true;
                    lambda = if lambda > 1e-10 { lambda / 3.0 } else { 0.0 };
                } else {
                    lambda = (lambda * 10.0).max(1e-8);
                    tries += 1;
                    if tries > 60 {
                        // No descent available: report the stall as
                        // non-convergence at the current residual.
                        return Ok(NewtonOutcome {
                            x,
                            iterations,
                            residual,
                            object_residual,
                            converged: false,
                        });
                    }
                }
            }

            self.check_escape(&x).map_err(|_| SolveError::Diverged {
                iterations,
                residual,
            })?;
            iterations += 1;
        }
    }
}
