//! Streamline tracing and the transported-invariant drift checks.
//!
//! Steady flow transports the Bernoulli function and the vorticity ratio
//! `omega / (r rho)` along streamlines; both are known functions of the
//! stream value carried by the line (from the upstream data), so tracing
//! lines through the reconstructed velocity field and watching those two
//! quantities is an end-to-end consistency check of the whole pipeline:
//! discretisation, nonlinear solve and reconstruction together. Drifts
//! shrink like `O(h)` for converged fields.
//!
//! Lines are integrated with classical RK4 over the bilinearly
//! interpolated `(u, v)` field, seeded on the inflow boundary at stream
//! values equispaced in `(0, m_L)` — equal mass-flux spacing, so the
//! bundle samples the whole flow. Tracing presupposes forward flow
//! (`u > 0`, the certified regime); a line leaving through the obstacle
//! or the axis is a structural failure and reported as an error.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::gas::GasModel;
use crate::geometry::{DomainGrid, NodeClass};
use crate::numerics::solve_bracketed;
use crate::profile::TruncatedProfile;
use crate::solver::StreamField;

/// Worst-case drifts of the two transported invariants over a bundle of
/// streamlines.
#[derive(Debug, Clone, Copy)]
pub struct DriftReport {
    /// `max |B(point) - B(psi_seed)|` over all lines and sample points.
    pub bernoulli_drift: f64,
    /// `max |omega/(r rho) - omega_ref(psi_seed)|` likewise.
    pub vorticity_drift: f64,
    /// Lines traced.
    pub n_traced: usize,
}

/// Node value for interpolation; below the surface the column's boundary
/// value extends downward so that cut cells interpolate physical data
/// instead of zeros.
#[inline]
fn corner(grid: &DomainGrid, f: &[f64], i: usize, j: usize) -> f64 {
    if grid.class(i, j) == NodeClass::Masked {
        f[grid.idx(i, grid.first_fluid_row(i))]
    } else {
        f[grid.idx(i, j)]
    }
}

/// Bilinear interpolation of a nodal field at `(x, r)`, clamped to the
/// domain box.
pub fn bilinear(grid: &DomainGrid, f: &[f64], x: f64, r: f64) -> f64 {
    let tx = ((x - grid.xs[0]) / grid.hx).clamp(0.0, grid.nx as f64 * (1.0 - 1e-15));
    let tr = (r / grid.hr).clamp(0.0, grid.nr as f64 * (1.0 - 1e-15));
    let i = (tx.floor() as usize).min(grid.nx - 1);
    let j = (tr.floor() as usize).min(grid.nr - 1);
    let ax = tx - i as f64;
    let ar = tr - j as f64;
    let v00 = corner(grid, f, i, j);
    let v10 = corner(grid, f, i + 1, j);
    let v01 = corner(grid, f, i, j + 1);
    let v11 = corner(grid, f, i + 1, j + 1);
    (1.0 - ax) * (1.0 - ar) * v00 + ax * (1.0 - ar) * v10 + (1.0 - ax) * ar * v01 + ax * ar * v11
}

/// Traces one streamline from `seed` to the outflow boundary by RK4 with
/// roughly two steps per grid cell, returning the sample points.
///
/// Errors ([`Error::Numerics`]) when the line leaves the flow region
/// through the obstacle surface or the axis — certified flows cannot do
/// either (Bernoulli/rest-point structure), so this signals a defective
/// field — or when it stalls (no forward progress within the step
/// budget, which `u > 0` rules out for genuine flows).
pub fn trace_streamline(flow: &FlowField, seed: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let grid = &flow.grid;
    let obstacle = grid.obstacle();
    let (mut x, mut r) = seed;
    let x_end = grid.xs[grid.nx];
    let h_min = grid.hx.min(grid.hr);
    let max_steps = 400 * grid.nx.max(grid.nr);
    let vel = |x: f64, r: f64| -> (f64, f64) {
        (
            bilinear(grid, &flow.u, x, r),
            bilinear(grid, &flow.v, x, r),
        )
    };
    let mut points = Vec::with_capacity(2 * grid.nx);
    points.push((x, r));
    for _ in 0..max_steps {
        let (u0, v0) = vel(x, r);
        let speed = u0.hypot(v0);
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(Error::Numerics(format!(
                "streamline stagnated at (x, r) = ({x:.6}, {r:.6}) \
                 with speed {speed:e}"
            )));
        }
        let dt = 0.45 * h_min / speed;
        let (k1u, k1v) = (u0, v0);
        let (k2u, k2v) = vel(x + 0.5 * dt * k1u, r + 0.5 * dt * k1v);
        let (k3u, k3v) = vel(x + 0.5 * dt * k2u, r + 0.5 * dt * k2v);
        let (k4u, k4v) = vel(x + dt * k3u, r + dt * k3v);
        x += dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        r += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if r <= 0.0 {
            return Err(Error::Numerics(format!(
                "streamline crossed the symmetry axis at x = {x:.6}"
            )));
        }
        if r <= obstacle.height_at(x) {
            return Err(Error::Numerics(format!(
                "streamline exited through the obstacle surface at \
                 (x, r) = ({x:.6}, {r:.6})"
            )));
        }
        r = r.min(grid.l);
        if x >= x_end {
            points.push((x_end, r));
            return Ok(points);
        }
        points.push((x, r));
    }
    Err(Error::Numerics(format!(
        "streamline did not reach the outflow within {max_steps} steps \
         (stalled near x = {x:.6})"
    )))
}

/// Traces `n_lines` streamlines seeded at stream values `m_L * s /
/// (n_lines + 1)` on the inflow boundary and reports the worst drift of
/// the Bernoulli function and of the transported vorticity ratio against
/// their upstream references.
pub fn streamline_invariants(
    flow: &FlowField,
    field: &StreamField,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    n_lines: usize,
) -> Result<DriftReport> {
    if n_lines == 0 {
        return Err(Error::Config("n_lines must be positive".into()));
    }
    let grid = &flow.grid;
    let m_l = field.m_l;
    let rho_inf = trunc.rho_inf();
    let mut bernoulli_drift = 0.0f64;
    let mut vorticity_drift = 0.0f64;
    for s in 1..=n_lines {
        let psi_seed = m_l * s as f64 / (n_lines + 1) as f64;
        let r_seed = solve_bracketed(
            |r| (trunc.stream(r) - psi_seed, (r * rho_inf) * trunc.u(r)),
            0.0,
            grid.l,
            1e-12,
            200,
            "streamline seed radius",
        )?;
        let b_ref = trunc.extended_bernoulli(psi_seed, gas);
        let w_ref = trunc.vorticity_ratio(psi_seed);
        for (x, r) in trace_streamline(flow, (grid.xs[0], r_seed))? {
            let u = bilinear(grid, &flow.u, x, r);
            let v = bilinear(grid, &flow.v, x, r);
            let rho = bilinear(grid, &flow.rho, x, r);
            let w = bilinear(grid, &flow.omega, x, r);
            let b = 0.5 * (u * u + v * v) + gas.enthalpy(rho)?;
            bernoulli_drift = bernoulli_drift.max((b - b_ref).abs());
            vorticity_drift = vorticity_drift.max((w / (r * rho) - w_ref).abs());
        }
    }
    Ok(DriftReport {
        bernoulli_drift,
        vorticity_drift,
        n_traced: n_lines,
    })
}
