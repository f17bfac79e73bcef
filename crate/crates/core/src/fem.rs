//! P1 finite-element Newton/continuation solver for the Lane-Emden system on
//! polygonal domains, plus the mesh-free test-function energy evaluator.
//!
//! Lumped mass keeps the nonlinear term diagonal, so the coupled Jacobian
//!
//! ```text
//!   [ A            -p M diag(v₊^{p-1}) ]
//!   [ -q M diag(u₊^{q-1})           A  ]
//! ```
//!
//! has the stiffness sparsity in each block; it is factorized by sparse LU
//! with the symbolic analysis shared across Newton iterations.

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::mesh::{generate_mesh, Grading, Mesh};
use crate::quad::{adaptive_simpson, adaptive_simpson_split};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use std::sync::Arc;

/// Stiffness/mass data with Dirichlet elimination bookkeeping.
pub struct Assembled {
    /// Interior-interior stiffness block.
    pub a_int: SparseColMat<usize, f64>,
    /// Interior-boundary stiffness block (for harmonic lifts of boundary data).
    pub a_ib: SparseColMat<usize, f64>,
    /// Lumped (row-sum) mass diagonal over all nodes.
    pub mass: Vec<f64>,
    /// Interior node ids in ascending order.
    pub interior: Vec<usize>,
    /// Boundary node ids in ascending order.
    pub boundary_nodes: Vec<usize>,
    /// node id -> interior index.
    pub int_of: Vec<Option<usize>>,
    /// node id -> boundary index.
    pub bnd_of: Vec<Option<usize>>,
    /// Per-triangle local stiffness, cached for bilinear forms and matvecs.
    elem_k: Vec<[[f64; 3]; 3]>,
    /// Point-location accelerator.
    locator: Locator,
    /// Cached Cholesky of `a_int` (built on first harmonic solve).
    chol: std::sync::OnceLock<std::result::Result<Llt<usize, f64>, String>>,
}

/// P1 stiffness with Dirichlet rows eliminated plus the lumped mass diagonal.
pub fn assemble(mesh: &Mesh) -> Result<Assembled> {
    let n = mesh.nodes.len();
    let mut int_of = vec![None; n];
    let mut bnd_of = vec![None; n];
    let mut interior = Vec::new();
    let mut boundary_nodes = Vec::new();
    for i in 0..n {
        if mesh.boundary[i] {
            bnd_of[i] = Some(boundary_nodes.len());
            boundary_nodes.push(i);
        } else {
            int_of[i] = Some(interior.len());
            interior.push(i);
        }
    }

    let mut mass = vec![0.0; n];
    let mut t_ii = Vec::new();
    let mut t_ib = Vec::new();
    let mut elem_k = Vec::with_capacity(mesh.triangles.len());
    for t in &mesh.triangles {
        let [pa, pb, pc] = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
        let det = (pb - pa).cross(pc - pa);
        let area = 0.5 * det;
        if !(area > 0.0) {
            return Err(Error::MeshFailure(format!(
                "non-positive element area {area} in assembly"
            )));
        }
        // gradients of barycentric coordinates
        let b = [pb.y - pc.y, pc.y - pa.y, pa.y - pb.y];
        let c = [pc.x - pb.x, pa.x - pc.x, pb.x - pa.x];
        let mut ke = [[0.0; 3]; 3];
        for i in 0..3 {
            mass[t[i]] += area / 3.0;
            for j in 0..3 {
                ke[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
            }
        }
        elem_k.push(ke);
        for i in 0..3 {
            let Some(ri) = int_of[t[i]] else { continue };
            for j in 0..3 {
                if let Some(cj) = int_of[t[j]] {
                    t_ii.push(Triplet::new(ri, cj, ke[i][j]));
                } else if let Some(cb) = bnd_of[t[j]] {
                    t_ib.push(Triplet::new(ri, cb, ke[i][j]));
                }
            }
        }
    }
    let ni = interior.len();
    let nb = boundary_nodes.len();
    let a_int = SparseColMat::try_new_from_triplets(ni, ni, &t_ii)
        .map_err(|e| Error::LinearSolve(format!("stiffness assembly: {e:?}")))?;
    let a_ib = SparseColMat::try_new_from_triplets(ni, nb, &t_ib)
        .map_err(|e| Error::LinearSolve(format!("stiffness assembly: {e:?}")))?;
    let locator = Locator::new(mesh);
    Ok(Assembled {
        a_int,
        a_ib,
        mass,
        interior,
        boundary_nodes,
        int_of,
        bnd_of,
        elem_k,
        locator,
        chol: std::sync::OnceLock::new(),
    })
}

impl Assembled {
    /// Bilinear form u'·A·v over the full node set, evaluated element-wise.
    pub fn stiffness_bilinear(&self, mesh: &Mesh, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for (t, ke) in mesh.triangles.iter().zip(&self.elem_k) {
            for i in 0..3 {
                for j in 0..3 {
                    s += u[t[i]] * ke[i][j] * v[t[j]];
                }
            }
        }
        s
    }

    /// Full stiffness matvec y = A·x, element-wise.
    pub fn stiffness_apply(&self, mesh: &Mesh, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for (t, ke) in mesh.triangles.iter().zip(&self.elem_k) {
            for i in 0..3 {
                let mut s = 0.0;
                for j in 0..3 {
                    s += ke[i][j] * x[t[j]];
                }
                y[t[i]] += s;
            }
        }
        y
    }

    /// Solve the interior Laplace system A_int x = rhs with the cached
    /// Cholesky factorization.
    pub fn laplace_solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let chol = self
            .chol
            .get_or_init(|| {
                SymbolicLlt::try_new(self.a_int.symbolic(), Side::Lower)
                    .map_err(|e| format!("{e:?}"))
                    .and_then(|sym| {
                        Llt::try_new_with_symbolic(sym, self.a_int.as_ref(), Side::Lower)
                            .map_err(|e| format!("{e:?}"))
                    })
            })
            .as_ref()
            .map_err(|e| Error::LinearSolve(format!("Cholesky of stiffness failed: {e}")))?;
        let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = chol.solve(&b);
        Ok((0..rhs.len()).map(|i| x[(i, 0)]).collect())
    }

    /// Discrete harmonic extension of boundary nodal data; returns the full
    /// nodal vector equal to `g` on the boundary.
    pub fn harmonic_extension(&self, g_boundary: &[f64]) -> Result<Vec<f64>> {
        let ni = self.interior.len();
        let mut rhs = vec![0.0; ni];
        // rhs = -A_ib g
        for j in 0..self.boundary_nodes.len() {
            let g = g_boundary[j];
            if g == 0.0 {
                continue;
            }
            let col = self.a_ib.val_of_col(j);
            let rows = self.a_ib.row_idx_of_col_raw(j);
            for (r, v) in rows.iter().zip(col) {
                rhs[*r] -= v * g;
            }
        }
        let x = self.laplace_solve(&rhs)?;
        let mut full = vec![0.0; self.int_of.len()];
        for (k, &node) in self.interior.iter().enumerate() {
            full[node] = x[k];
        }
        for (k, &node) in self.boundary_nodes.iter().enumerate() {
            full[node] = g_boundary[k];
        }
        Ok(full)
    }
}

// ---------------------------------------------------------------------------
// point location + interpolation
// ---------------------------------------------------------------------------

struct Locator {
    cell: f64,
    nx: usize,
    ny: usize,
    x0: f64,
    y0: f64,
    cells: Vec<Vec<u32>>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Self {
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &mesh.nodes {
            xmin = xmin.min(p.x);
            xmax = xmax.max(p.x);
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let cell = (mesh.h_max * 1.5).max(1e-12);
        let nx = (((xmax - xmin) / cell).ceil() as usize + 1).max(1);
        let ny = (((ymax - ymin) / cell).ceil() as usize + 1).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let [a, b, c] = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
            let txmin = a.x.min(b.x).min(c.x);
            let txmax = a.x.max(b.x).max(c.x);
            let tymin = a.y.min(b.y).min(c.y);
            let tymax = a.y.max(b.y).max(c.y);
            let i0 = (((txmin - xmin) / cell).floor() as usize).min(nx - 1);
            let i1 = (((txmax - xmin) / cell).floor() as usize).min(nx - 1);
            let j0 = (((tymin - ymin) / cell).floor() as usize).min(ny - 1);
            let j1 = (((tymax - ymin) / cell).floor() as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    cells[j * nx + i].push(ti as u32);
                }
            }
        }
        Locator {
            cell,
            nx,
            ny,
            x0: xmin,
            y0: ymin,
            cells,
        }
    }

    /// Containing triangle and barycentric coordinates.
    fn locate(&self, mesh: &Mesh, x: Point) -> Option<(usize, [f64; 3])> {
        let i = ((x.x - self.x0) / self.cell).floor();
        let j = ((x.y - self.y0) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let idx = j as usize * self.nx + i as usize;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &ti in &self.cells[idx] {
            let t = &mesh.triangles[ti as usize];
            let [a, b, c] = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
            let det = (b - a).cross(c - a);
            let l1 = (x - a).cross(c - a) / det;
            let l2 = (b - a).cross(x - a) / det;
            let l0 = 1.0 - l1 - l2;
            let worst = l0.min(l1).min(l2);
            if worst >= -1e-12 {
                return Some((ti as usize, [l0, l1, l2]));
            }
            if best.is_none() || worst > best.as_ref().unwrap().2 {
                best = Some((ti as usize, [l0, l1, l2], worst));
            }
        }
        // tolerate roundoff at cell borders
        match best {
            Some((ti, l, worst)) if worst >= -1e-9 => Some((ti, l)),
            _ => None,
        }
    }
}

/// A (candidate or converged) nodal solution pair on a mesh.
#[derive(Clone)]
pub struct SolutionPair {
    pub mesh: Arc<Mesh>,
    pub assembled: Arc<Assembled>,
    pub p: f64,
    pub theta: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub newton_residual: f64,
    pub iterations: usize,
}

/// Discrete energy functionals of a solution pair (not p-scaled).
#[derive(Clone, Copy, Debug)]
pub struct DiscreteEnergies {
    /// u'·A·v = ∫∇u·∇v
    pub grad_uv: f64,
    /// ∫|∇u|²
    pub grad_uu: f64,
    /// ∫|∇v|²
    pub grad_vv: f64,
    /// Σ M v₊^{p+1}
    pub pow_v: f64,
    /// Σ M u₊^{q+1}
    pub pow_u: f64,
    /// Σ M v₊^p
    pub mass_v: f64,
    /// Σ M u₊^q
    pub mass_u: f64,
}

impl SolutionPair {
    pub fn q(&self) -> f64 {
        self.p + self.theta
    }

    /// P1 interpolation of (u, v) and their piecewise-constant gradients.
    pub fn interpolate(&self, x: Point) -> Result<(f64, f64, Point, Point)> {
        let (ti, l) = self
            .assembled
            .locator
            .locate(&self.mesh, x)
            .ok_or_else(|| Error::Geometry(format!("point {x:?} outside the mesh")))?;
        let t = &self.mesh.triangles[ti];
        let u = l[0] * self.u[t[0]] + l[1] * self.u[t[1]] + l[2] * self.u[t[2]];
        let v = l[0] * self.v[t[0]] + l[1] * self.v[t[1]] + l[2] * self.v[t[2]];
        let gu = element_gradient(&self.mesh, ti, &self.u);
        let gv = element_gradient(&self.mesh, ti, &self.v);
        Ok((u, v, gu, gv))
    }

    pub fn energies(&self) -> DiscreteEnergies {
        let asm = &self.assembled;
        let mesh = &self.mesh;
        let q = self.q();
        let mut pow_v = 0.0;
        let mut pow_u = 0.0;
        let mut mass_v = 0.0;
        let mut mass_u = 0.0;
        for i in 0..self.u.len() {
            let m = asm.mass[i];
            pow_v += m * powp(self.v[i], self.p + 1.0);
            pow_u += m * powp(self.u[i], q + 1.0);
            mass_v += m * powp(self.v[i], self.p);
            mass_u += m * powp(self.u[i], q);
        }
        DiscreteEnergies {
            grad_uv: asm.stiffness_bilinear(mesh, &self.u, &self.v),
            grad_uu: asm.stiffness_bilinear(mesh, &self.u, &self.u),
            grad_vv: asm.stiffness_bilinear(mesh, &self.v, &self.v),
            pow_v,
            pow_u,
            mass_v,
            mass_u,
        }
    }
}

/// Gradient of a P1 field on one triangle.
pub fn element_gradient(mesh: &Mesh, tri: usize, field: &[f64]) -> Point {
    let t = &mesh.triangles[tri];
    let [a, b, c] = [mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]];
    let det = (b - a).cross(c - a);
    let gx = (field[t[0]] * (b.y - c.y) + field[t[1]] * (c.y - a.y) + field[t[2]] * (a.y - b.y))
        / det;
    let gy = (field[t[0]] * (c.x - b.x) + field[t[1]] * (a.x - c.x) + field[t[2]] * (b.x - a.x))
        / det;
    Point::new(gx, gy)
}

#[inline]
fn powp(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}

/// Damped Newton on the coupled residual
/// `(A u - M (v₊)^p - M f_u, A v - M (u₊)^q - M f_v)`; the forcing terms
/// support manufactured problems and default to zero.
#[allow(clippy::too_many_arguments)]
pub fn newton_solve_forced(
    mesh: &Arc<Mesh>,
    assembled: &Arc<Assembled>,
    p: f64,
    theta: f64,
    init_u: &[f64],
    init_v: &[f64],
    forcing: Option<(&[f64], &[f64])>,
    tol: f64,
) -> Result<SolutionPair> {
    let q = p + theta;
    let n = mesh.nodes.len();
    if init_u.len() != n || init_v.len() != n {
        return Err(Error::InvalidInput(format!(
            "init field length {} vs {} nodes",
            init_u.len(),
            n
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    for &i in &assembled.boundary_nodes {
        if init_u[i] != 0.0 || init_v[i] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "init fields must vanish on the boundary (node {i})"
            )));
        }
    }

    let asm = assembled.as_ref();
    let ni = asm.interior.len();
    let residual = |u: &[f64], v: &[f64]| -> (Vec<f64>, f64) {
        let au = asm.stiffness_apply(mesh, u);
        let av = asm.stiffness_apply(mesh, v);
        let mut r = vec![0.0; 2 * ni];
        let mut norm: f64 = 0.0;
        for (k, &node) in asm.interior.iter().enumerate() {
            let m = asm.mass[node];
            let (fu, fv) = match forcing {
                Some((fu, fv)) => (fu[node], fv[node]),
                None => (0.0, 0.0),
            };
            r[k] = au[node] - m * (powp(v[node], p) + fu);
            r[ni + k] = av[node] - m * (powp(u[node], q) + fv);
            norm = norm.max(r[k].abs()).max(r[ni + k].abs());
        }
        (r, norm)
    };

    let mut u = init_u.to_vec();
    let mut v = init_v.to_vec();
    let (mut r, mut res) = residual(&u, &v);
    let mut history = vec![res];
    let mut symbolic: Option<SymbolicLu<usize>> = None;

    for iter in 0..50 {
        if res <= tol {
            let sol = SolutionPair {
                mesh: Arc::clone(mesh),
                assembled: Arc::clone(assembled),
                p,
                theta,
                u,
                v,
                newton_residual: res,
                iterations: iter,
            };
            check_positivity(&sol)?;
            return Ok(sol);
        }

        // coupled Jacobian in [u_int; v_int] ordering
        let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::new();
        for j in 0..ni {
            let col_v = asm.a_int.val_of_col(j);
            let rows = asm.a_int.row_idx_of_col_raw(j);
            for (rr, val) in rows.iter().zip(col_v) {
                trips.push(Triplet::new(*rr, j, *val));
                trips.push(Triplet::new(ni + *rr, ni + j, *val));
            }
            let node = asm.interior[j];
            let m = asm.mass[node];
            trips.push(Triplet::new(j, ni + j, -p * m * powp(v[node], p - 1.0)));
            trips.push(Triplet::new(ni + j, j, -q * m * powp(u[node], q - 1.0)));
        }
        let jac = SparseColMat::try_new_from_triplets(2 * ni, 2 * ni, &trips)
            .map_err(|e| Error::LinearSolve(format!("jacobian assembly: {e:?}")))?;
        if symbolic.is_none() {
            symbolic = Some(
                SymbolicLu::try_new(jac.symbolic())
                    .map_err(|e| Error::LinearSolve(format!("symbolic LU: {e:?}")))?,
            );
        }
        let lu = Lu::try_new_with_symbolic(symbolic.clone().unwrap(), jac.as_ref())
            .map_err(|e| Error::LinearSolve(format!("LU factorization: {e:?}")))?;
        let mut rhs = Mat::from_fn(2 * ni, 1, |i, _| -r[i]);
        let mut delta = lu.solve(&rhs);
        // linear accuracy contract: relative residual <= 1e-10, one refinement pass
        for _ in 0..2 {
            let lin_res = jac_apply(&trips, 2 * ni, &delta) // J δ + r
                .iter()
                .zip(&r)
                .map(|(jd, ri)| (jd + ri).abs())
                .fold(0.0f64, f64::max);
            if lin_res <= 1e-10 * res {
                break;
            }
            let jd = jac_apply(&trips, 2 * ni, &delta);
            for i in 0..2 * ni {
                rhs[(i, 0)] = -r[i] - jd[i];
            }
            let corr = lu.solve(&rhs);
            for i in 0..2 * ni {
                delta[(i, 0)] += corr[(i, 0)];
            }
        }

        // damped line search on the residual max-norm
        let mut lam = 1.0;
        let mut advanced = false;
        for _ in 0..30 {
            let mut ut = u.clone();
            let mut vt = v.clone();
            for (k, &node) in asm.interior.iter().enumerate() {
                ut[node] += lam * delta[(k, 0)];
                vt[node] += lam * delta[(ni + k, 0)];
            }
            let (rt, rest) = residual(&ut, &vt);
            if rest < res && rest.is_finite() {
                u = ut;
                v = vt;
                r = rt;
                res = rest;
                history.push(res);
                advanced = true;
                break;
            }
            lam *= 0.5;
        }
        if !advanced {
            return Err(Error::Divergence {
                message: format!("Newton stalled at residual {res:.3e} (p = {p})"),
                history,
            });
        }
    }
    Err(Error::Divergence {
        message: format!("no convergence after 50 Newton iterations (p = {p})"),
        history,
    })
}

fn jac_apply(trips: &[Triplet<usize, usize, f64>], n: usize, x: &Mat<f64>) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for t in trips {
        y[t.row] += t.val * x[(t.col, 0)];
    }
    y
}

fn check_positivity(sol: &SolutionPair) -> Result<()> {
    for i in 0..sol.u.len() {
        if sol.u[i] < -1e-12 || sol.v[i] < -1e-12 {
            return Err(Error::Divergence {
                message: format!(
                    "converged to a sign-changing pair (node {i}: u = {}, v = {})",
                    sol.u[i], sol.v[i]
                ),
                history: vec![sol.newton_residual],
            });
        }
    }
    Ok(())
}

/// Convenience wrapper: assemble + Newton.
pub fn newton_solve(
    mesh: &Arc<Mesh>,
    p: f64,
    theta: f64,
    init_u: &[f64],
    init_v: &[f64],
    tol: f64,
) -> Result<SolutionPair> {
    let asm = Arc::new(assemble(mesh)?);
    newton_solve_forced(mesh, &asm, p, theta, init_u, init_v, None, tol)
}

// ---------------------------------------------------------------------------
// cutoff bubbles: initial guesses and the test-function energy
// ---------------------------------------------------------------------------

/// C² quintic smoothstep cutoff: 1 for |x| <= r, 0 for |x| >= 2r.
/// Returns (η, η', η'') as functions of the radius `d = |x|`.
pub fn cutoff(d: f64, r: f64) -> (f64, f64, f64) {
    let t = (d - r) / r;
    if t <= 0.0 {
        (1.0, 0.0, 0.0)
    } else if t >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let s = 10.0 * t.powi(3) - 15.0 * t.powi(4) + 6.0 * t.powi(5);
        let ds = (30.0 * t.powi(2) - 60.0 * t.powi(3) + 30.0 * t.powi(4)) / r;
        let dds = (60.0 * t - 180.0 * t.powi(2) + 120.0 * t.powi(3)) / (r * r);
        (1.0 - s, -ds, -dds)
    }
}

/// Bubble scale ε_p with ε_p^{-2} = p e^{(p-1)/2}.
pub fn bubble_eps_sq(p: f64) -> f64 {
    1.0 / (p * ((p - 1.0) / 2.0).exp())
}

/// The rescaled profile z(y) = -2 log(1 + (1/8) e^{θ/2} |y|²) and its radial
/// derivative.
fn profile_z(theta: f64, y: f64) -> (f64, f64) {
    let c = (theta / 2.0).exp() / 8.0;
    let z = -2.0 * (c * y * y).ln_1p();
    let dz = -4.0 * c * y / (1.0 + c * y * y);
    (z, dz)
}

/// Superposition of cut-off bubbles `η((x-x₀)/r₀) √e (1 + z((x-x₀)/ε_p)/p)`
/// over the seed points, clipped to be nonnegative and zero on the boundary.
pub fn bubble_initial_guess(
    mesh: &Mesh,
    p: f64,
    theta: f64,
    seeds: &[Point],
    r0: f64,
) -> (Vec<f64>, Vec<f64>) {
    let eps = bubble_eps_sq(p).sqrt();
    let mut u = vec![0.0; mesh.nodes.len()];
    for (i, &x) in mesh.nodes.iter().enumerate() {
        if mesh.boundary[i] {
            continue;
        }
        let mut s = 0.0;
        for &x0 in seeds {
            let d = x.dist(x0);
            let (eta, _, _) = cutoff(d, r0);
            if eta == 0.0 {
                continue;
            }
            let (z, _) = profile_z(theta, d / eps);
            s += eta * crate::SQRT_E * (1.0 + z / p);
        }
        u[i] = s.max(0.0);
    }
    (u.clone(), u)
}

/// Output of [`test_function_energy`].
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TestFunctionEnergy {
    /// ∫ |Δψ_p|^{1+1/p}
    pub int_lap: f64,
    /// ∫ |ψ_p|^{q+1}
    pub int_power: f64,
    /// Normalization placing t_p ψ_p on the constraint
    /// ∫|Δu|^{1+1/p} = ∫u^{q+1}.
    pub t_p: f64,
    /// p t_p^{1+1/p} ∫|Δψ_p|^{1+1/p}
    pub scaled_energy: f64,
}

/// Mesh-free quadrature of the cut-off bubble energy: ψ_p = η φ_p with
/// φ_p = √e (1 + z(x/ε_p)/p), η the quintic cutoff on [r, 2r].
pub fn test_function_energy(
    p: f64,
    theta: f64,
    domain: &DomainSpec,
    center: Point,
    r: f64,
) -> Result<TestFunctionEnergy> {
    if p < 2.0 {
        return Err(Error::InvalidParameter(format!("need p >= 2, got {p}")));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("need r > 0, got {r}")));
    }
    if !domain.contains(center)? || domain.boundary_distance(center)? < 2.0 * r {
        return Err(Error::Geometry(format!(
            "ball B_{{2r}}({center:?}) with r = {r} is not contained in the domain"
        )));
    }
    let q = p + theta;
    let eps2 = bubble_eps_sq(p);
    let eps = eps2.sqrt();
    let se = crate::SQRT_E;
    let one_p = 1.0 + 1.0 / p;

    // core |x| <= r in the rescaled variable y = x/ε, integrated in log y:
    // ∫ |Δφ|^{1+1/p} dx = 2π ε² amp ∫ e^{(z+θ/2)(1+1/p)} y² d(log y)
    let amp = (se / (p * eps2)).powf(one_p);
    let c = (theta / 2.0).exp() / 8.0;
    let l_upper = (r / eps).ln();
    let l_scale = (1.0 / c.sqrt()).ln();
    let tau = 2.0 * std::f64::consts::PI;
    let f_lap = |ly: f64| {
        let y = ly.exp();
        let (z, _) = profile_z(theta, y);
        amp * ((z + theta / 2.0) * one_p).exp() * y * y
    };
    let core_lap = tau
        * eps2
        * adaptive_simpson_split(
            &f_lap,
            -30.0,
            l_upper,
            &[l_scale - 3.0, l_scale, l_scale + 4.0, l_scale + 12.0],
            1e-14 * amp.max(1.0),
        );

    // annulus r <= |x| <= 2r: Δψ = ηΔφ + 2η'φ' + (η'' + η'/x)φ
    let phi = |x: f64| se * (1.0 + profile_z(theta, x / eps).0 / p);
    let dphi = |x: f64| se * profile_z(theta, x / eps).1 / (p * eps);
    let lap_phi = |x: f64| {
        let (z, _) = profile_z(theta, x / eps);
        -(se / (p * eps2)) * (z + theta / 2.0).exp()
    };
    let f_ann = |x: f64| {
        let (eta, deta, ddeta) = cutoff(x, r);
        let lp = eta * lap_phi(x) + 2.0 * deta * dphi(x) + (ddeta + deta / x) * phi(x);
        lp.abs().powf(one_p) * x
    };
    let ann_lap = tau * adaptive_simpson(&f_ann, r, 2.0 * r, 1e-15);
    let int_lap = core_lap + ann_lap;

    // ∫ |ψ|^{q+1}: core in log y plus annulus
    let g_core = |ly: f64| {
        let y = ly.exp();
        let (z, _) = profile_z(theta, y);
        let base = (1.0 + z / p).abs();
        if base == 0.0 {
            return 0.0;
        }
        ((q + 1.0) * base.ln()).exp() * y * y
    };
    let core_pow = tau
        * eps2
        * ((q + 1.0) / 2.0).exp()
        * adaptive_simpson_split(
            &g_core,
            -30.0,
            l_upper,
            &[l_scale - 3.0, l_scale, l_scale + 4.0, l_scale + 12.0],
            1e-15,
        );
    let g_ann = |x: f64| {
        let (eta, _, _) = cutoff(x, r);
        let base = (eta * phi(x)).abs();
        if base == 0.0 {
            return 0.0;
        }
        ((q + 1.0) * base.ln()).exp() * x
    };
    let ann_pow = tau * adaptive_simpson(&g_ann, r, 2.0 * r, 1e-18);
    let int_power = core_pow + ann_pow;

    // t^{1+1/p} L = t^{q+1} P  =>  t = (L/P)^{p/(pq-1)}
    let t_p = (int_lap / int_power).powf(p / (p * q - 1.0));
    let scaled_energy = p * t_p.powf(one_p) * int_lap;
    Ok(TestFunctionEnergy {
        int_lap,
        int_power,
        t_p,
        scaled_energy,
    })
}

// ---------------------------------------------------------------------------
// continuation
// ---------------------------------------------------------------------------

/// Parameters of the 2D continuation driver.
#[derive(Clone, Debug)]
pub struct ContinuationParams {
    pub h_target: f64,
    pub grading_ratio: f64,
    pub newton_tol: f64,
    /// Re-grade the mesh around the current peaks every this many steps.
    pub regrade_every: usize,
}

impl Default for ContinuationParams {
    fn default() -> Self {
        ContinuationParams {
            h_target: 0.05,
            grading_ratio: 0.1,
            newton_tol: 1e-9,
            regrade_every: 3,
        }
    }
}

/// Continuation in p on a general domain: the first solve starts from a
/// superposition of cut-off bubbles at the seed points, later solves
/// warm-start from the previous solution (interpolated after re-grading).
pub fn continuation_2d(
    domain: &DomainSpec,
    p_grid: &[f64],
    theta: f64,
    seed_points: &[Point],
    params: &ContinuationParams,
) -> Result<Vec<SolutionPair>> {
    if p_grid.is_empty() || p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("p grid must be nonempty and increasing".into()));
    }
    if seed_points.is_empty() {
        return Err(Error::InvalidInput("need at least one seed point".into()));
    }
    for &s in seed_points {
        if !domain.contains(s)? {
            return Err(Error::Geometry(format!("seed {s:?} outside the domain")));
        }
    }
    // cutoff radius: half the clearance to boundary and other seeds
    let mut r0 = f64::INFINITY;
    for (i, &s) in seed_points.iter().enumerate() {
        r0 = r0.min(domain.boundary_distance(s)?);
        for &t in &seed_points[i + 1..] {
            r0 = r0.min(0.5 * s.dist(t));
        }
    }
    let r0 = 0.45 * r0;

    let grading = Grading {
        centers: seed_points.to_vec(),
        ratio: params.grading_ratio,
    };
    let mut mesh = Arc::new(generate_mesh(domain, params.h_target, Some(&grading))?);
    let mut asm = Arc::new(assemble(&mesh)?);

    let mut out: Vec<SolutionPair> = Vec::new();
    for (step, &p) in p_grid.iter().enumerate() {
        if step > 0 && params.regrade_every > 0 && step % params.regrade_every == 0 {
            // re-grade around the current peaks and transfer the solution
            let prev = out.last().unwrap();
            let peaks = nodal_peaks(prev, seed_points.len());
            let grading = Grading {
                centers: peaks,
                ratio: params.grading_ratio,
            };
            let new_mesh = Arc::new(generate_mesh(domain, params.h_target, Some(&grading))?);
            let new_asm = Arc::new(assemble(&new_mesh)?);
            let mut u = vec![0.0; new_mesh.nodes.len()];
            let mut v = vec![0.0; new_mesh.nodes.len()];
            for (i, &x) in new_mesh.nodes.iter().enumerate() {
                if new_mesh.boundary[i] {
                    continue;
                }
                if let Ok((ui, vi, _, _)) = prev.interpolate(x) {
                    u[i] = ui.max(0.0);
                    v[i] = vi.max(0.0);
                }
            }
            mesh = new_mesh;
            asm = new_asm;
            let sol = newton_solve_forced(&mesh, &asm, p, theta, &u, &v, None, params.newton_tol)?;
            out.push(sol);
            continue;
        }

        let (u0, v0) = match out.last() {
            None => bubble_initial_guess(&mesh, p, theta, seed_points, r0),
            Some(prev) => (prev.u.clone(), prev.v.clone()),
        };
        match newton_solve_forced(&mesh, &asm, p, theta, &u0, &v0, None, params.newton_tol) {
            Ok(sol) => out.push(sol),
            Err(e) => {
                // halve the p-step once before giving up
                if let Some(prev) = out.last() {
                    let mid = 0.5 * (prev.p + p);
                    let sol_mid = newton_solve_forced(
                        &mesh,
                        &asm,
                        mid,
                        theta,
                        &prev.u.clone(),
                        &prev.v.clone(),
                        None,
                        params.newton_tol,
                    )?;
                    let sol = newton_solve_forced(
                        &mesh,
                        &asm,
                        p,
                        theta,
                        &sol_mid.u.clone(),
                        &sol_mid.v.clone(),
                        None,
                        params.newton_tol,
                    )?;
                    out.push(sol);
                } else {
                    return Err(e);
                }
            }
        }
    }
    Ok(out)
}

/// Nodal argmax of u within the Voronoi cell of each seed.
fn nodal_peaks(sol: &SolutionPair, k: usize) -> Vec<Point> {
    let mut peaks: Vec<(f64, Point)> = Vec::new();
    // the k highest strict local maxima, well separated
    let mesh = &sol.mesh;
    let mut order: Vec<usize> = (0..mesh.nodes.len()).collect();
    order.sort_by(|&a, &b| sol.u[b].partial_cmp(&sol.u[a]).unwrap());
    let sep = 10.0 * mesh.h_max;
    for &i in &order {
        if peaks.len() >= k {
            break;
        }
        let x = mesh.nodes[i];
        if peaks.iter().all(|(_, p)| p.dist(x) > sep) {
            peaks.push((sol.u[i], x));
        }
    }
    peaks.into_iter().map(|(_, p)| p).collect()
}
