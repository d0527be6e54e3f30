//! Five-point stencil operator and a Jacobi-preconditioned conjugate
//! gradient solver.
//!
//! Each Picard step freezes the effective density field, which turns the
//! stream-function equation into a linear, symmetric positive definite
//! problem: a divergence-form operator with one conductance per grid face.
//! This module stores those face conductances, applies the operator
//! matrix-free, and solves the system with preconditioned CG.
//!
//! Vectors live on the full node grid (length `(nx+1)*(nr+1)`) so that flat
//! indexing matches the rest of the crate; entries at Dirichlet and masked
//! nodes are held at zero. Boundary data enters through the right-hand
//! side, assembled by the caller.
//!
//! All reductions go through [`crate::parallel`], so the iteration history
//! is bitwise reproducible for any thread count.

use crate::error::{Error, Result};
use crate::geometry::DomainGrid;
use crate::parallel;

/// How often the residual is recomputed from scratch instead of updated
/// recursively. Guards against floating-point drift in long CG runs at the
/// cost of one extra operator application per interval.
const RESIDUAL_REFRESH: usize = 64;

/// Symmetric five-point operator in conductance form.
///
/// The action on a vector `x` at an unknown node `p` is
/// `(A x)_p = d_p x_p - sum_faces c_face x_neighbour`, where `d_p` is the
/// sum of the four adjacent face conductances. Rows at Dirichlet or masked
/// nodes are identity-free: the operator returns zero there and expects
/// zero input (their data is folded into the right-hand side).
#[derive(Debug)]
pub struct StencilMatrix {
    nx: usize,
    nr: usize,
    /// Conductance of the face between `(i, j)` and `(i + 1, j)`, stored at
    /// `j * nx + i`; geometric factors (area over leg) are already folded
    /// in, so a flux is conductance times value difference.
    cx: Vec<f64>,
    /// Conductance of the face between `(i, j)` and `(i, j + 1)`, stored at
    /// `j * (nx + 1) + i`; geometric factors folded in as for `cx`.
    cr: Vec<f64>,
    /// Row sums of the face conductances at unknown nodes, zero elsewhere.
    diag: Vec<f64>,
    /// `1 / diag` at unknown nodes, zero elsewhere (Jacobi preconditioner).
    inv_diag: Vec<f64>,
    /// True exactly at interior (unknown) nodes.
    unknown: Vec<bool>,
}

/// Convergence record returned by [`pcg`].
#[derive(Debug, Clone, Copy)]
pub struct PcgStats {
    /// Number of CG iterations performed.
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side norm.
    pub rel_residual: f64,
}

impl StencilMatrix {
    /// Builds the operator from per-face conductances.
    ///
    /// `cx` has one entry per x-face (`nx * (nr + 1)`), `cr` one per r-face
    /// (`(nx + 1) * nr`); see the field docs for the layout. Conductances
    /// must be nonnegative and finite; faces between two masked nodes
    /// should carry zero.
    pub fn new(grid: &DomainGrid, cx: Vec<f64>, cr: Vec<f64>) -> Result<Self> {
        let (nx, nr) = (grid.nx, grid.nr);
        if cx.len() != nx * (nr + 1) || cr.len() != (nx + 1) * nr {
            return Err(Error::Numerics(format!(
                "stencil face arrays have lengths {}/{}, expected {}/{}",
                cx.len(),
                cr.len(),
                nx * (nr + 1),
                (nx + 1) * nr
            )));
        }
        let n = grid.n_nodes();
        let row = nx + 1;
        let mut diag = vec![0.0; n];
        let mut inv_diag = vec![0.0; n];
        let mut unknown = vec![false; n];
        for p in 0..n {
            if !grid.is_unknown_at(p) {
                continue;
            }
            let (i, j) = (p % row, p / row);
            // Interior nodes never sit on the outermost grid lines, so all
            // four adjacent faces exist.
            let d = cx[j * nx + i - 1]
                + cx[j * nx + i]
                + cr[(j - 1) * row + i]
                + cr[j * row + i];
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Numerics(format!(
                    "degenerate stencil row at node ({i}, {j}): diagonal {d:e}"
                )));
            }
            diag[p] = d;
            inv_diag[p] = 1.0 / d;
            unknown[p] = true;
        }
        Ok(StencilMatrix {
            nx,
            nr,
            cx,
            cr,
            diag,
            inv_diag,
            unknown,
        })
    }

    /// Number of grid nodes (vector length for [`Self::apply`]).
    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.nr + 1)
    }

    /// The x-face conductances (layout as in the constructor).
    pub fn cx_faces(&self) -> &[f64] {
        &self.cx
    }

    /// The r-face conductances (layout as in the constructor).
    pub fn cr_faces(&self) -> &[f64] {
        &self.cr
    }

    /// `y = A x`. Entries of `x` at non-unknown nodes must be zero; the
    /// output is zero there.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_nodes());
        debug_assert_eq!(y.len(), self.n_nodes());
        let row = self.nx + 1;
        let nx = self.nx;
        let (cx, cr, diag, unknown) = (&self.cx, &self.cr, &self.diag, &self.unknown);
        parallel::map_into(y, |p| {
            if !unknown[p] {
                return 0.0;
            }
            let (i, j) = (p % row, p / row);
            diag[p] * x[p]
                - cx[j * nx + i - 1] * x[p - 1]
                - cx[j * nx + i] * x[p + 1]
                - cr[(j - 1) * row + i] * x[p - row]
                - cr[j * row + i] * x[p + row]
        });
    }

    /// Residual `b - A x` written into `r`.
    pub fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        parallel::map_into(r, |p| if self.unknown[p] { b[p] - ax[p] } else { 0.0 });
    }

    /// Zeroes the entries of `v` at Dirichlet and masked nodes, restoring
    /// the invariant expected by [`Self::apply`].
    pub fn project(&self, v: &mut [f64]) {
        for (vi, &u) in v.iter_mut().zip(&self.unknown) {
            if !u {
                *vi = 0.0;
            }
        }
    }
}

/// Solves `A x = b` by conjugate gradients with Jacobi preconditioning,
/// starting from the value of `x` on entry (its non-unknown entries are
/// zeroed first).
///
/// Convergence is declared when the residual 2-norm drops below
/// `tol * ||b||`. Returns a [`crate::Error::Numerics`] when the iteration
/// exceeds `max_iter` or the operator turns out not to be positive
/// definite, including the achieved relative residual in the message.
pub fn pcg(
    a: &StencilMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<PcgStats> {
    let n = a.n_nodes();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(x.len(), n);
    a.project(x);

    let norm_b = parallel::norm2(b);
    if norm_b == 0.0 {
        x.fill(0.0);
        return Ok(PcgStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }

    let mut r = vec![0.0; n];
    a.residual(b, x, &mut r);
    let mut z = vec![0.0; n];
    parallel::map_into(&mut z, |p| a.inv_diag[p] * r[p]);
    let mut dir = z.clone();
    let mut adir = vec![0.0; n];
    let mut rz = parallel::dot(&r, &z);

    let mut rel = parallel::norm2(&r) / norm_b;
    if rel <= tol {
        return Ok(PcgStats {
            iterations: 0,
            rel_residual: rel,
        });
    }

    for k in 1..=max_iter {
        a.apply(&dir, &mut adir);
        let dad = parallel::dot(&dir, &adir);
        if !(dad > 0.0) {
            return Err(Error::Numerics(format!(
                "conjugate gradient breakdown at iteration {k}: \
                 direction energy {dad:e} (operator not positive definite)"
            )));
        }
        let alpha = rz / dad;
        parallel::axpy(x, alpha, &dir);
        if k % RESIDUAL_REFRESH == 0 {
            a.residual(b, x, &mut r);
        } else {
            parallel::axpy(&mut r, -alpha, &adir);
        }
        rel = parallel::norm2(&r) / norm_b;
        if rel <= tol {
            return Ok(PcgStats {
                iterations: k,
                rel_residual: rel,
            });
        }
        parallel::map_into(&mut z, |p| a.inv_diag[p] * r[p]);
        let rz_next = parallel::dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        parallel::xpby(&mut dir, &z, beta);
    }
    Err(Error::Numerics(format!(
        "conjugate gradient stalled after {max_iter} iterations \
         (relative residual {rel:.3e}, target {tol:.3e})"
    )))
}
