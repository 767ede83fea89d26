//! Force-closure evaluation over discretized friction-cone wrenches.
//!
//! Each contact contributes `cone_edges` unit primitive forces on the
//! cone boundary; wrenches pair the force with the torque about the
//! contact centroid, scaled by the grasp radius. Closure holds when the
//! origin lies strictly inside the convex hull of the wrenches within
//! their span; the margin is the distance from the origin to the hull
//! boundary (negative when the origin is outside the hull).

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::contact::ContactSet;
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspQuality {
    pub force_closure: bool,
    /// Distance from the origin to the wrench-hull boundary within the
    /// wrench span; negative if the origin falls outside the hull.
    pub margin: f64,
    /// Dimension spanned by the primitive wrenches (max 6).
    pub wrench_rank: usize,
    /// Whether the given external wrench can be balanced by non-negative
    /// cone combinations; `None` when no external wrench was supplied.
    pub resists_external: Option<bool>,
}

/// Evaluate force closure and margin of a contact set.
pub fn grasp_quality(
    contacts: &ContactSet,
    external_wrench: Option<Vector6<f64>>,
    cone_edges: usize,
) -> Result<GraspQuality, ModelError> {
    if contacts.is_empty() {
        return Err(ModelError::InvalidModel(
            "grasp quality needs at least one contact".into(),
        ));
    }
    let wrenches = primitive_wrenches(contacts, cone_edges);

    // Span reduction: work in the subspace the wrenches actually reach.
    let m = wrenches.len();
    let mut w_mat = DMatrix::zeros(6, m);
    for (j, w) in wrenches.iter().enumerate() {
        w_mat.set_column(j, w);
    }
    let svd = w_mat.clone().svd(true, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-9 * sigma_max.max(1e-300))
        .count();
    if rank == 0 {
        return Ok(GraspQuality {
            force_closure: false,
            margin: -1.0,
            wrench_rank: 0,
            resists_external: external_wrench.map(|w| w.norm() < 1e-12),
        });
    }
    let u = svd.u.as_ref().expect("u requested");
    let basis = u.columns(0, rank).clone_owned();
    let reduced: Vec<DVector<f64>> = wrenches.iter().map(|w| basis.tr_mul(w)).collect();

    let margin = hull_margin(&reduced);
    let force_closure = margin > 1e-9;

    let resists_external = external_wrench.map(|w_ext| {
        let w6 = DVector::from_column_slice(w_ext.as_slice());
        let in_span = (&w6 - &basis * basis.tr_mul(&w6)).norm() <= 1e-9 * w6.norm().max(1.0);
        if !in_span {
            return false;
        }
        if w6.norm() < 1e-12 || force_closure {
            return true;
        }
        let target = -basis.tr_mul(&w6);
        let residual = nnls_residual(&reduced, &target);
        residual <= 1e-6 * target.norm().max(1.0)
    });

    Ok(GraspQuality {
        force_closure,
        margin,
        wrench_rank: rank,
        resists_external,
    })
}

/// Unit cone-edge forces paired with centroid-scaled torques.
fn primitive_wrenches(contacts: &ContactSet, cone_edges: usize) -> Vec<DVector<f64>> {
    let m = cone_edges.max(3);
    let n_c = contacts.len() as f64;
    let centroid = contacts
        .contacts
        .iter()
        .fold(Vector3::zeros(), |acc, c| acc + c.position.coords)
        / n_c;
    let rho = contacts
        .contacts
        .iter()
        .map(|c| (c.position.coords - centroid).norm())
        .fold(0.0, f64::max)
        .max(1e-9);

    let mut wrenches = Vec::new();
    for c in &contacts.contacts {
        let n_in = -c.normal.into_inner();
        let pick = if n_in.x.abs() <= n_in.y.abs() && n_in.x.abs() <= n_in.z.abs() {
            Vector3::x()
        } else if n_in.y.abs() <= n_in.z.abs() {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let t1 = n_in.cross(&pick).normalize();
        let t2 = n_in.cross(&t1);
        let arm = c.position.coords - centroid;
        let edges = if c.friction > 0.0 { m } else { 1 };
        for j in 0..edges {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let f = (n_in + (t1 * theta.cos() + t2 * theta.sin()) * c.friction).normalize();
            let tau = arm.cross(&f) / rho;
            let mut w = DVector::zeros(6);
            for k in 0..3 {
                w[k] = f[k];
                w[3 + k] = tau[k];
            }
            wrenches.push(w);
        }
    }
    wrenches
}

/// Distance from the origin to the hull boundary of `points`
/// (any dimension): negative outside, positive inside.
fn hull_margin(points: &[DVector<f64>]) -> f64 {
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let mn = min_norm_point(points);
    if mn.norm() > 1e-10 * scale {
        return -mn.norm();
    }

    // Origin inside (or on the boundary): minimize the support function
    // h(d) = max_i p_i . d over unit directions. The minimum sits on a
    // facet normal, a fixed point of d -> minnorm(active face of d).
    // Coarse deterministic sampling localizes candidates, projected
    // subgradient descent refines them, and the fixed-point polish makes
    // the final value the exact facet distance.
    let dim = points[0].len();
    let support = |d: &DVector<f64>| {
        points
            .iter()
            .map(|p| p.dot(d))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let mut starts: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        starts.push(e.clone());
        starts.push(-e);
    }
    for p in points {
        if p.norm() > 1e-12 * scale {
            starts.push(-p / p.norm());
        }
    }
    let mut state = 0x9e3779b97f4a7c15u64;
    let n_random = if dim >= 4 { 2048 } else { 512 };
    for _ in 0..n_random {
        let mut d = DVector::zeros(dim);
        for k in 0..dim {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            d[k] = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
        }
        if d.norm() > 1e-9 {
            starts.push(d.normalize());
        }
    }

    // Keep the most promising starts for the expensive refinement.
    let mut ranked: Vec<(f64, DVector<f64>)> =
        starts.into_iter().map(|d| (support(&d), d)).collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    ranked.truncate(24);

    let mut best = f64::INFINITY;
    for (h0, start) in ranked {
        best = best.min(h0);
        let mut d = start;

        // Projected subgradient descent with a diminishing step.
        for k in 0..140 {
            let h = support(&d);
            best = best.min(h);
            let g = points
                .iter()
                .max_by(|a, b| a.dot(&d).partial_cmp(&b.dot(&d)).unwrap())
                .unwrap();
            let gt = g - &d * g.dot(&d);
            if gt.norm() < 1e-14 * scale {
                break;
            }
            let step = 0.4 / (1.0 + 0.25 * k as f64);
            let dn = (&d - gt * (step / scale)).normalize();
            d = dn;
        }

        // Fixed-point polish on the active facet.
        for _ in 0..60 {
            let h = support(&d);
            best = best.min(h);
            best = best.min(facet_snap(points, &d, scale));
            let active: Vec<DVector<f64>> = points
                .iter()
                .filter(|p| p.dot(&d) >= h - 1e-9 * scale)
                .cloned()
                .collect();
            let m = min_norm_point(&active);
            if m.norm() <= 1e-12 * scale {
                best = best.min(h.max(0.0));
                break;
            }
            let d_new = m.normalize();
            if (d_new.clone() - &d).norm() < 1e-13 {
                best = best.min(support(&d_new));
                break;
            }
            d = d_new;
        }
    }
    best
}

/// Exact facet distances near a direction: for each prefix of the points
/// ranked by support along `d`, the affine minimum-norm point defines a
/// candidate supporting plane; planes that no point crosses are true
/// facets and their distance is exact.
fn facet_snap(points: &[DVector<f64>], d: &DVector<f64>, scale: f64) -> f64 {
    let dim = points[0].len();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|a, b| points[*b].dot(d).partial_cmp(&points[*a].dot(d)).unwrap());
    let mut best = f64::INFINITY;
    for k in 1..=(dim + 1).min(points.len()) {
        let subset: Vec<usize> = order[..k].to_vec();
        let (m, _) = affine_min_norm(points, &subset, dim);
        let mn = m.norm();
        if mn <= 1e-12 * scale {
            continue;
        }
        let dk = m / mn;
        let h = points
            .iter()
            .map(|p| p.dot(&dk))
            .fold(f64::NEG_INFINITY, f64::max);
        if h <= mn * (1.0 + 1e-9) + 1e-12 * scale {
            best = best.min(h);
        }
    }
    best
}

/// Wolfe's minimum-norm-point algorithm over the convex hull of `points`.
fn min_norm_point(points: &[DVector<f64>]) -> DVector<f64> {
    let dim = points[0].len();
    let scale2 = points
        .iter()
        .map(|p| p.norm_squared())
        .fold(0.0, f64::max)
        .max(1e-300);
    let eps = 1e-14 * scale2;

    // Start from the shortest point.
    let start = (0..points.len())
        .min_by(|a, b| {
            points[*a]
                .norm_squared()
                .partial_cmp(&points[*b].norm_squared())
                .unwrap()
        })
        .unwrap();
    let mut corral: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = points[start].clone();

    for _major in 0..(2 * points.len() + 40) {
        // Most violating vertex.
        let (j, d_min) = (0..points.len())
            .map(|i| (i, x.dot(&points[i])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if x.norm_squared() - d_min <= eps || x.norm_squared() <= eps {
            break;
        }
        if corral.contains(&j) {
            break;
        }
        corral.push(j);
        weights.push(0.0);

        for _minor in 0..(2 * points.len() + 40) {
            let (y, mu) = affine_min_norm(points, &corral, dim);
            if mu.iter().all(|m| *m > -1e-12) {
                weights = mu;
                x = y;
                break;
            }
            // Walk towards y until a weight hits zero; drop those points.
            let mut t = 1.0f64;
            for (k, (&w, &m)) in weights.iter().zip(mu.iter()).enumerate() {
                let _ = k;
                if m < w {
                    let tk = w / (w - m);
                    if tk < t {
                        t = tk;
                    }
                }
            }
            for k in 0..weights.len() {
                weights[k] += t * (mu[k] - weights[k]);
            }
            let keep: Vec<bool> = weights.iter().map(|w| *w > 1e-12).collect();
            let mut new_corral = Vec::new();
            let mut new_weights = Vec::new();
            for (k, keep_k) in keep.iter().enumerate() {
                if *keep_k {
                    new_corral.push(corral[k]);
                    new_weights.push(weights[k]);
                }
            }
            if new_corral.is_empty() {
                new_corral.push(corral[0]);
                new_weights.push(1.0);
            }
            corral = new_corral;
            weights = new_weights;
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            x = combine(points, &corral, &weights, dim);
        }
    }
    x
}

fn combine(points: &[DVector<f64>], idx: &[usize], w: &[f64], dim: usize) -> DVector<f64> {
    let mut x = DVector::zeros(dim);
    for (i, wi) in idx.iter().zip(w) {
        x += &points[*i] * *wi;
    }
    x
}

/// Minimum-norm point of the affine hull of the selected points, with its
/// barycentric coordinates.
fn affine_min_norm(
    points: &[DVector<f64>],
    idx: &[usize],
    dim: usize,
) -> (DVector<f64>, Vec<f64>) {
    let k = idx.len();
    // KKT system: [G 1; 1^T 0] [lambda; nu] = [0; 1], G = P^T P.
    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    for a in 0..k {
        for b in 0..k {
            kkt[(a, b)] = points[idx[a]].dot(&points[idx[b]]);
        }
        kkt[(a, k)] = 1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| kkt.svd(true, true).solve(&rhs, 1e-14).unwrap());
    let lambda: Vec<f64> = (0..k).map(|i| sol[i]).collect();
    (combine(points, idx, &lambda, dim), lambda)
}

/// Residual of the non-negative least squares fit `min |A lambda - b|`,
/// columns of `A` given as points. Lawson-Hanson active set.
fn nnls_residual(columns: &[DVector<f64>], b: &DVector<f64>) -> f64 {
    let n = columns.len();
    let dim = b.len();
    let mut lambda = vec![0.0f64; n];
    let mut passive: Vec<usize> = Vec::new();
    let residual = |lam: &[f64]| {
        let mut r = b.clone();
        for (j, c) in columns.iter().enumerate() {
            r -= c * lam[j];
        }
        r
    };
    for _ in 0..(4 * n + 20) {
        let r = residual(&lambda);
        // Gradient of 1/2|r|^2 wrt lambda_j is -c_j . r.
        let (j_best, w_best) = (0..n)
            .filter(|j| !passive.contains(j))
            .map(|j| (j, columns[j].dot(&r)))
            .fold((usize::MAX, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if j_best == usize::MAX || w_best <= 1e-12 * b.norm().max(1.0) {
            break;
        }
        passive.push(j_best);
        loop {
            // Least squares over the passive set.
            let k = passive.len();
            let mut a = DMatrix::zeros(dim, k);
            for (col, j) in passive.iter().enumerate() {
                a.set_column(col, &columns[*j]);
            }
            let sol = a.clone().svd(true, true).solve(b, 1e-12).unwrap();
            if (0..k).all(|i| sol[i] > 0.0) {
                for (col, j) in passive.iter().enumerate() {
                    lambda[*j] = sol[col];
                }
                break;
            }
            // Step back to the feasible boundary and drop a variable.
            let mut alpha = 1.0f64;
            let mut drop_idx = None;
            for (col, j) in passive.iter().enumerate() {
                if sol[col] <= 0.0 {
                    let a_j = lambda[*j] / (lambda[*j] - sol[col]);
                    if a_j < alpha {
                        alpha = a_j;
                        drop_idx = Some(col);
                    }
                }
            }
            for (col, j) in passive.iter().enumerate() {
                lambda[*j] += alpha * (sol[col] - lambda[*j]);
            }
            match drop_idx {
                Some(col) => {
                    let j = passive.remove(col);
                    lambda[j] = 0.0;
                }
                None => break,
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    residual(&lambda).norm()
}
