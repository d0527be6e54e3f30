//! Damped Picard solver for the stream-function equation.
//!
//! The equation is quasilinear: the effective density `H` depends on the
//! stream function through both the Bernoulli datum `B(psi)` and the
//! momentum density `|grad psi|^2 / (r + k)^2`. Each Picard sweep freezes
//! `H` and the transport source at the current iterate, solves the
//! resulting linear divergence-form problem ([`crate::linear`]), and takes
//! a damped step toward the solution. The `1/r` axis singularity is
//! handled by a continuation in the offset `k`: the equation is first
//! solved with `r + k` in place of `r` for a decreasing schedule of
//! offsets, each stage warm-starting the next, ending at the physical
//! `k = 0`.
//!
//! Subsonicity enters through the velocity-ratio truncation `chi0`: the
//! local Mach ratio is capped at `1 - 1.5 eps0` inside the Bernoulli
//! relation, which keeps the frozen operator uniformly elliptic for *any*
//! data. A solution whose raw (uncapped) ratio stays below `1 - 2 eps0`
//! everywhere never activates the cap, so it solves the genuine Euler
//! system — that is the certified outcome reported by [`StreamField`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gas::GasModel;
use crate::geometry::{side_boundary_values, DomainGrid, NodeClass};
use crate::linear::{pcg, StencilMatrix};
use crate::numerics::solve_bracketed;
use crate::parallel;
use crate::profile::TruncatedProfile;

/// Velocity-ratio truncation: identity up to `1 - 2 eps0`, constant
/// `1 - 1.5 eps0` from `1 - eps0` on, joined by a quintic blend with two
/// continuous derivatives.
///
/// The blend is `chi0(s) = a + eps0 * g(t)` with `a = 1 - 2 eps0`,
/// `t = (s - a)/eps0` and `g(t) = t - t^3 + t^4/2`, which matches value,
/// slope and curvature at both ends and has `g' in [0, 1]`, so `chi0` is
/// nondecreasing and 1-Lipschitz.
pub fn chi0(eps0: f64, s: f64) -> f64 {
    let a = 1.0 - 2.0 * eps0;
    if s <= a {
        s
    } else if s >= 1.0 - eps0 {
        1.0 - 1.5 * eps0
    } else {
        let t = (s - a) / eps0;
        a + eps0 * (t - t * t * t + 0.5 * t * t * t * t)
    }
}

/// Derivative of [`chi0`] with respect to the ratio `s`.
pub fn chi0_prime(eps0: f64, s: f64) -> f64 {
    let a = 1.0 - 2.0 * eps0;
    if s <= a {
        1.0
    } else if s >= 1.0 - eps0 {
        0.0
    } else {
        let t = (s - a) / eps0;
        1.0 - 3.0 * t * t + 2.0 * t * t * t
    }
}

fn validate_eps0(eps0: f64) -> Result<()> {
    if !(eps0 > 0.0 && eps0 < 0.25) || !eps0.is_finite() {
        return Err(Error::Config(format!(
            "eps0 must lie in (0, 0.25), got {eps0}"
        )));
    }
    Ok(())
}

/// Density returned by the truncated Bernoulli relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDensity {
    /// The effective density `H`.
    pub rho: f64,
    /// Capped Mach ratio `chi0(raw_ratio)` actually entering the balance.
    pub ratio: f64,
    /// Uncapped Mach ratio `sqrt(M) / rho^((gamma+1)/2)` at `rho`. Values
    /// above `1 - 2 eps0` mean the truncation is active at this datum.
    pub raw_ratio: f64,
    /// Whether the cap modified the relation.
    pub truncated: bool,
}

/// Solves the truncated Bernoulli relation
///
/// ```text
/// 1/2 chi0(s)^2 c(rho)^2 + h(rho) = b ,   s = sqrt(m) / rho^((gamma+1)/2)
/// ```
///
/// for the density, where `m` is the momentum density
/// `|grad psi|^2 / (r + k)^2` and `b` the Bernoulli datum. When the datum
/// is subsonic and the resulting ratio stays at or below `1 - 2 eps0`, the
/// result is bitwise identical to the untruncated subsonic branch
/// [`GasModel::subsonic_density`]. Otherwise the truncated relation is
/// solved on `[rho_floor, rho_upper]` by a safeguarded Newton iteration;
/// a root exists there for every `m >= 0`, which is the point of the
/// truncation.
pub fn effective_density(
    gas: &GasModel,
    eps0: f64,
    m: f64,
    b: f64,
) -> Result<EffectiveDensity> {
    validate_eps0(eps0)?;
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::Numerics(format!(
            "momentum density must be finite and nonnegative, got {m}"
        )));
    }
    let sd = gas.sonic_data(b)?;
    let gm = gas.gamma();
    if m <= sd.sigma {
        let rho = gas.subsonic_density_with(&sd, m, b)?;
        let s = m.sqrt() / gas.pow_gp1_half(rho);
        if s <= 1.0 - 2.0 * eps0 {
            return Ok(EffectiveDensity {
                rho,
                ratio: s,
                raw_ratio: s,
                truncated: false,
            });
        }
    }
    // Truncated branch. With the ratio capped at `cap`, the flow energy
    // term is at most `cap^2 c^2 / 2`, which pins the density above
    let cap = 1.0 - 1.5 * eps0;
    let rho_floor = gas.pow_inv_gm1(b / (0.5 * cap * cap + 1.0 / (gm - 1.0)));
    let sqrt_m = m.sqrt();
    let phi = |rho: f64| -> (f64, f64) {
        let cg2 = gas.pow_gm1(rho); // c(rho)^2
        let s = sqrt_m / gas.pow_gp1_half(rho);
        let x = chi0(eps0, s);
        let dx = chi0_prime(eps0, s);
        let value = 0.5 * x * x * cg2 + cg2 / (gm - 1.0) - b;
        let slope = cg2 / rho
            * (1.0 + 0.5 * (gm - 1.0) * x * x - 0.5 * (gm + 1.0) * x * dx * s);
        (value, slope)
    };
    // On the plateau the relation no longer depends on m and the root sits
    // exactly at the floor; catch that case (and roundoff around it)
    // before asking the bracketed solver for a sign change.
    let (phi_floor, _) = phi(rho_floor);
    if phi_floor >= 0.0 {
        let s = sqrt_m / gas.pow_gp1_half(rho_floor);
        return Ok(EffectiveDensity {
            rho: rho_floor,
            ratio: chi0(eps0, s),
            raw_ratio: s,
            truncated: true,
        });
    }
    let rho = solve_bracketed(
        phi,
        rho_floor,
        sd.rho_upper,
        1e-15,
        120,
        "truncated Bernoulli density",
    )?;
    let s = sqrt_m / gas.pow_gp1_half(rho);
    Ok(EffectiveDensity {
        rho,
        ratio: chi0(eps0, s),
        raw_ratio: s,
        truncated: true,
    })
}

/// Tuning knobs of [`solve`]. [`Default`] gives the standard production
/// settings; [`SolverConfig::validate`] enforces the domains below.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Truncation margin, in `(0, 0.25)`. Certification requires the raw
    /// Mach ratio to stay below `1 - 2 eps0`.
    pub eps0: f64,
    /// Axis-regularisation offsets, nonincreasing and ending at `0`.
    pub k_schedule: Vec<f64>,
    /// Underrelaxation factor applied to each Picard update, in `(0, 1]`.
    pub picard_damping: f64,
    /// Stop when the maximal update falls below this fraction of the total
    /// mass flux `m_L`.
    pub picard_tol_rel: f64,
    /// Maximal Picard sweeps per `k` stage.
    pub picard_max_iters: usize,
    /// Relative residual target of the inner conjugate-gradient solve.
    pub linear_tol: f64,
    /// Iteration cap of the inner conjugate-gradient solve.
    pub linear_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps0: 0.05,
            k_schedule: vec![0.1, 0.03, 0.01, 0.0],
            picard_damping: 0.7,
            picard_tol_rel: 1e-9,
            picard_max_iters: 200,
            linear_tol: 1e-10,
            linear_max_iters: 20_000,
        }
    }
}

impl SolverConfig {
    /// Checks every knob against its admissible domain.
    pub fn validate(&self) -> Result<()> {
        validate_eps0(self.eps0)?;
        if self.k_schedule.is_empty() {
            return Err(Error::Config("k_schedule must be nonempty".into()));
        }
        if self
            .k_schedule
            .iter()
            .any(|k| !k.is_finite() || *k < 0.0)
        {
            return Err(Error::Config(
                "k_schedule entries must be finite and nonnegative".into(),
            ));
        }
        if self.k_schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config(
                "k_schedule must be nonincreasing".into(),
            ));
        }
        if *self.k_schedule.last().unwrap() != 0.0 {
            return Err(Error::Config(
                "k_schedule must end at 0 (the physical operator)".into(),
            ));
        }
        if !(self.picard_damping > 0.0 && self.picard_damping <= 1.0) {
            return Err(Error::Config(format!(
                "picard_damping must lie in (0, 1], got {}",
                self.picard_damping
            )));
        }
        if !(self.picard_tol_rel > 0.0 && self.picard_tol_rel < 1.0) {
            return Err(Error::Config(format!(
                "picard_tol_rel must lie in (0, 1), got {}",
                self.picard_tol_rel
            )));
        }
        if self.picard_max_iters == 0 {
            return Err(Error::Config("picard_max_iters must be positive".into()));
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return Err(Error::Config(format!(
                "linear_tol must lie in (0, 1), got {}",
                self.linear_tol
            )));
        }
        if self.linear_max_iters == 0 {
            return Err(Error::Config("linear_max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Initial iterate for [`solve`].
#[derive(Debug, Clone)]
pub enum SolveStart {
    /// Extend the inflow boundary profile across the domain.
    Default,
    /// Start from a caller-supplied field (full node vector; boundary
    /// entries are overwritten by the stage's boundary data).
    Guess(Vec<f64>),
    /// Resume a checkpointed run at schedule stage `stage`.
    Resume {
        /// Checkpointed stream function (full node vector).
        psi: Vec<f64>,
        /// Index into the `k` schedule at which to resume.
        stage: usize,
    },
}

/// Certification outcome of a converged solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// The raw Mach ratio stays below `1 - 2 eps0`: the truncation never
    /// acts and the field solves the genuine Euler system.
    Certified,
    /// The truncation is active somewhere; the field solves the modified
    /// system only.
    TruncationActive,
}

/// Convergence record of one `k` stage.
#[derive(Debug, Clone, Copy)]
pub struct StageStats {
    /// Axis offset of this stage.
    pub k: f64,
    /// Picard sweeps used.
    pub picard_iterations: usize,
    /// Last relative update `max |dpsi| / m_L`.
    pub final_delta: f64,
    /// Conjugate-gradient iterations summed over the stage.
    pub linear_iterations: usize,
    /// Relative residual of the last linear solve.
    pub final_linear_residual: f64,
    /// Maximal raw Mach ratio at the stage's converged field.
    pub q: f64,
}

/// A converged stream-function field with its certification data.
#[derive(Debug, Clone)]
pub struct StreamField {
    /// Grid the field lives on.
    pub grid: Arc<DomainGrid>,
    /// Stream function, one value per grid node (zero at masked nodes).
    pub psi: Vec<f64>,
    /// Total mass flux `m_L` (the lid value of `psi`).
    pub m_l: f64,
    /// Maximal raw Mach ratio over the domain at `k = 0`.
    pub q: f64,
    /// Truncation margin the field was computed with.
    pub eps0: f64,
    /// Whether the truncation stayed inactive.
    pub status: SolveStatus,
    /// Per-stage convergence records, in schedule order.
    pub stages: Vec<StageStats>,
}

impl StreamField {
    /// True when the field is a certified genuine Euler solution.
    pub fn is_certified(&self) -> bool {
        self.status == SolveStatus::Certified
    }

    /// The certification threshold `1 - 2 eps0` the ratio is held against.
    pub fn certification_threshold(&self) -> f64 {
        1.0 - 2.0 * self.eps0
    }
}

/// Checkpoint sink invoked after every Picard sweep with
/// `(stage index, sweep index, current field)`.
pub type CheckpointSink<'a> = Box<dyn FnMut(usize, usize, &[f64]) + 'a>;

/// Momentum density and Bernoulli datum at node `(i, j)` for offset `k`.
///
/// At ordinary nodes this is `|grad psi|^2 / (r + k)^2` with the grid's
/// cut-aware gradients. At the column floors — axis nodes and snapped
/// obstacle-boundary nodes — the raw quotient is ill-conditioned: the
/// numerator and the denominator vanish together (literally `0/0` on the
/// axis at `k = 0`), and dividing an O(h^2)-accurate difference by a small
/// `r + k` amplifies iteration noise without bound. The floor value is
/// therefore taken from the column's quadratic model fit
/// ([`DomainGrid::boundary_quadratic_coeff`]): `d_r psi / (r + k) -> 2a`
/// at the floor, and since `psi` is constant along the boundary curve the
/// tangential derivative vanishes there, so
///
/// ```text
/// M_floor = (1 + f'(x)^2) * (2a)^2 ,
/// ```
///
/// with `f' = 0` on the axis. The fit is exact for uniform flow at every
/// `k`, O(h) at the surface in general, and uniformly conditioned no
/// matter how small the floor radius is.
pub(crate) fn momentum_datum(
    grid: &DomainGrid,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    k: f64,
    psi: &[f64],
    i: usize,
    j: usize,
) -> (f64, f64) {
    let p = grid.idx(i, j);
    let b = trunc.extended_bernoulli(psi[p], gas);
    // Column floors: axis and snapped obstacle-boundary nodes, including
    // the axis corners of the inflow/outflow columns.
    let m = if j == grid.first_fluid_row(i) {
        let two_a = 2.0 * grid.boundary_quadratic_coeff(psi, i, k);
        let fp = grid.surface_slope(i);
        (1.0 + fp * fp) * two_a * two_a
    } else {
        let px = grid.ddx(psi, i, j);
        let pr = grid.ddr(psi, i, j);
        let denom = grid.rs[j] + k;
        (px * px + pr * pr) / (denom * denom)
    };
    (m, b)
}

/// Frozen-coefficient system of one Picard sweep.
struct Assembly {
    matrix: StencilMatrix,
    rhs: Vec<f64>,
    /// Raw Mach ratio per node (zero at masked nodes).
    ratio: Vec<f64>,
}

/// Nodal sweep: inverse effective density, transport source and raw ratio
/// at every node. Failures inside the parallel map are poisoned to NaN and
/// re-diagnosed serially so the error can name the offending node.
fn nodal_fields(
    grid: &DomainGrid,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    eps0: f64,
    k: f64,
    psi: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = grid.n_nodes();
    let row = grid.nx + 1;
    let mut inv_h = vec![0.0; n];
    let mut source = vec![0.0; n];
    let mut ratio = vec![0.0; n];
    parallel::map3_into(&mut inv_h, &mut source, &mut ratio, |p| {
        if !grid.is_fluid_at(p) {
            return (0.0, 0.0, 0.0);
        }
        let (i, j) = (p % row, p / row);
        let (m, b) = momentum_datum(grid, trunc, gas, k, psi, i, j);
        match effective_density(gas, eps0, m, b) {
            Ok(ed) => {
                let (f, df) = trunc.extended_pair(psi[p]);
                let src = (grid.r_node(i, j) + k) * f * df * ed.rho;
                (1.0 / ed.rho, src, ed.raw_ratio)
            }
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        }
    });
    for p in 0..n {
        if grid.is_fluid_at(p)
            && !(inv_h[p].is_finite() && source[p].is_finite() && ratio[p].is_finite())
        {
            let (i, j) = (p % row, p / row);
            let (m, b) = momentum_datum(grid, trunc, gas, k, psi, i, j);
            let detail = match effective_density(gas, eps0, m, b) {
                Err(e) => e.to_string(),
                Ok(_) => format!("non-finite source from datum (m={m:e}, b={b:e})"),
            };
            return Err(Error::Numerics(format!(
                "density update failed at node ({i}, {j}) \
                 (x = {:.6}, r = {:.6}): {detail}",
                grid.xs[i],
                grid.r_node(i, j)
            )));
        }
    }
    Ok((inv_h, source, ratio))
}

/// Builds the frozen linear system at the current iterate.
fn assemble(
    grid: &DomainGrid,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    eps0: f64,
    k: f64,
    psi: &[f64],
) -> Result<Assembly> {
    let (inv_h, source, ratio) = nodal_fields(grid, trunc, gas, eps0, k, psi)?;
    let (matrix, rhs) = flux_system(grid, k, &inv_h, &source, psi)?;
    Ok(Assembly { matrix, rhs, ratio })
}

/// Builds the flux-form linear system from nodal inverse densities and
/// source values; Dirichlet data is read from `psi` at non-unknown nodes.
fn flux_system(
    grid: &DomainGrid,
    k: f64,
    inv_h: &[f64],
    source: &[f64],
    psi: &[f64],
) -> Result<(StencilMatrix, Vec<f64>)> {
    let (nx, nr) = (grid.nx, grid.nr);
    let row = nx + 1;

    // Flux (finite-volume) form: each face carries
    // `mean inverse density / (face radius + k) * face area / leg length`,
    // and each node equation balances the four face fluxes against the
    // source times the node's dual-cell volume. On uniform cells this is
    // the per-volume five-point scheme scaled by `hx * hr`; on cut cells
    // the true legs and areas keep the balance consistent, which matters
    // at nodes squeezed close above the snapped boundary (their radial
    // Dirichlet coupling must not be diluted by a uniform-cell volume).
    //
    // Horizontal faces: the shared area is the overlap of the two dual
    // cells (half the smaller leg on each side), so a face grazing the
    // obstacle floor is automatically shortened to its fluid part. A
    // row-solid neighbour (masked, or a boundary node whose true radius
    // pokes above this row) acts as a zero-Dirichlet wall seen through
    // the fluid side's density and area, at the true crossing distance of
    // the profile along the row.
    let mut cx = vec![0.0; nx * (nr + 1)];
    parallel::map_into(&mut cx, |f| {
        let (i, j) = (f % nx, f / nx);
        let a = j * row + i;
        let b = a + 1;
        let (fa, fb) = (grid.row_fluid(i, j), grid.row_fluid(i + 1, j));
        let (mean, area, leg) = match (fa, fb) {
            (true, true) => {
                let (aw, bw) = grid.cell_legs(i, j);
                let (ae, be) = grid.cell_legs(i + 1, j);
                (
                    0.5 * (inv_h[a] + inv_h[b]),
                    0.5 * (aw.min(ae) + bw.min(be)),
                    grid.hx,
                )
            }
            (true, false) => {
                (inv_h[a], grid.cell_height(i, j), grid.x_leg(i, j, true))
            }
            (false, true) => {
                (inv_h[b], grid.cell_height(i + 1, j), grid.x_leg(i + 1, j, false))
            }
            (false, false) => return 0.0,
        };
        mean / (grid.rs[j] + k) * area / leg
    });
    // Vertical faces honour the snapped boundary radius: the leg between a
    // boundary node and the interior node above it has its true (cut)
    // length and its midpoint radius, so the flux through the cut is
    // consistent with the node positions. A vertical face with a masked
    // side never touches an unknown (masking is a lower set per column and
    // the node above it is the Dirichlet floor), so it carries no
    // conductance.
    let mut cr = vec![0.0; row * nr];
    parallel::map_into(&mut cr, |f| {
        let (i, j) = (f % row, f / row);
        let a = j * row + i;
        let b = a + row;
        if !grid.is_fluid_at(a) || !grid.is_fluid_at(b) {
            return 0.0;
        }
        let mean = 0.5 * (inv_h[a] + inv_h[b]);
        let ra = grid.r_node(i, j);
        let rb = grid.r_node(i, j + 1);
        let r_face = 0.5 * (ra + rb);
        mean / (r_face + k) * grid.hx / (rb - ra)
    });

    let matrix = StencilMatrix::new(grid, cx, cr)?;
    // Right-hand side: negated source times the dual-cell volume, plus the
    // Dirichlet lift through the faces that touch boundary (or masked,
    // value zero) nodes.
    let mut rhs = vec![0.0; grid.n_nodes()];
    {
        let cx = matrix_cx(&matrix);
        let cr = matrix_cr(&matrix);
        parallel::map_into(&mut rhs, |p| {
            if !grid.is_unknown_at(p) {
                return 0.0;
            }
            let (i, j) = (p % row, p / row);
            let mut b = -source[p] * grid.hx * grid.cell_height(i, j);
            let mut lift = |q: usize, c: f64| {
                if !grid.is_unknown_at(q) {
                    b += c * psi[q];
                }
            };
            lift(p - 1, cx[j * nx + i - 1]);
            lift(p + 1, cx[j * nx + i]);
            lift(p - row, cr[(j - 1) * row + i]);
            lift(p + row, cr[j * row + i]);
            b
        });
    }
    Ok((matrix, rhs))
}

// The matrix owns the face arrays; the rhs assembly above still needs to
// read them. Narrow internal accessors keep the borrow local.
fn matrix_cx(m: &StencilMatrix) -> &[f64] {
    m.cx_faces()
}
fn matrix_cr(m: &StencilMatrix) -> &[f64] {
    m.cr_faces()
}

/// Writes the stage's Dirichlet data into `psi`: zero on the axis and the
/// obstacle, `m_L` on the lid, the `k`-weighted upstream stream function on
/// the inflow/outflow sides, zero at masked nodes.
fn impose_boundaries(grid: &DomainGrid, psi: &mut [f64], side: &[f64], m_l: f64) {
    let row = grid.nx + 1;
    for p in 0..grid.n_nodes() {
        let (_, j) = (p % row, p / row);
        match grid.class_at(p) {
            NodeClass::Interior => {}
            NodeClass::Axis | NodeClass::ObstacleBoundary => psi[p] = 0.0,
            NodeClass::Top => psi[p] = m_l,
            NodeClass::Inflow | NodeClass::Outflow => psi[p] = side[j],
            NodeClass::Masked => psi[p] = 0.0,
        }
    }
}

/// Maximal raw Mach ratio over the fluid nodes.
fn max_ratio(grid: &DomainGrid, ratio: &[f64]) -> f64 {
    parallel::max_indexed(ratio.len(), |p| {
        if grid.is_fluid_at(p) {
            ratio[p]
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Runs the damped Picard iteration of one `k` stage in place.
#[allow(clippy::too_many_arguments)]
fn picard_stage(
    grid: &DomainGrid,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    cfg: &SolverConfig,
    k: f64,
    stage: usize,
    psi: &mut Vec<f64>,
    checkpoint: &mut Option<CheckpointSink<'_>>,
) -> Result<StageStats> {
    let m_l = trunc.m_l();
    let mut linear_total = 0;
    let mut last_residual = 0.0;
    let mut history: Vec<f64> = Vec::new();
    // Stall control: near the truncation blend the frozen-coefficient map
    // can lose contractivity and the damped iteration settles into a limit
    // cycle. When the update stops decreasing, halve the damping — enough
    // of that stabilises any bounded cycle.
    let mut damping = cfg.picard_damping;
    let mut best_delta = f64::INFINITY;
    let mut since_improvement = 0usize;
    for sweep in 1..=cfg.picard_max_iters {
        let asm = assemble(grid, trunc, gas, cfg.eps0, k, psi)?;
        let mut w = psi.clone();
        asm.matrix.project(&mut w);
        let prev = w.clone();
        let stats = match pcg(
            &asm.matrix,
            &asm.rhs,
            &mut w,
            cfg.linear_tol,
            cfg.linear_max_iters,
        ) {
            Ok(s) => s,
            Err(Error::Numerics(msg)) => {
                return Err(Error::Numerics(format!(
                    "linear solve failed at k = {k}, Picard sweep {sweep}: {msg}"
                )))
            }
            Err(e) => return Err(e),
        };
        linear_total += stats.iterations;
        last_residual = stats.rel_residual;
        let delta = parallel::max_abs_diff(&w, &prev) / m_l;
        history.push(delta);
        if delta < 0.97 * best_delta {
            best_delta = delta;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= 8 && damping > 0.05 {
                damping *= 0.5;
                since_improvement = 0;
            }
        }
        if std::env::var_os("AXIFLOW_TRACE").is_some() {
            let row = grid.nx + 1;
            let (mut arg, mut best) = (0, -1.0);
            for p in 0..w.len() {
                let d = (w[p] - prev[p]).abs();
                if d > best {
                    best = d;
                    arg = p;
                }
            }
            eprintln!(
                "k={k} sweep={sweep} delta={delta:.3e} argmax=({}, {}) lin={} damping={damping}",
                arg % row,
                arg / row,
                stats.iterations
            );
        }
        for p in 0..psi.len() {
            if grid.is_unknown_at(p) {
                psi[p] = prev[p] + damping * (w[p] - prev[p]);
            }
        }
        if let Some(cb) = checkpoint.as_mut() {
            cb(stage, sweep, psi);
        }
        if !delta.is_finite() || delta > 1e6 {
            return Err(Error::Numerics(format!(
                "Picard iteration diverged at k = {k}, sweep {sweep} \
                 (relative update {delta:e}); no certified subsonic solution \
                 was found at this upstream density"
            )));
        }
        if delta <= cfg.picard_tol_rel {
            let (_, _, ratio) = nodal_fields(grid, trunc, gas, cfg.eps0, k, psi)?;
            if std::env::var_os("AXIFLOW_TRACE").is_some() {
                let row = grid.nx + 1;
                let (mut arg, mut best) = (0, f64::NEG_INFINITY);
                for p in 0..ratio.len() {
                    if grid.is_fluid_at(p) && ratio[p] > best {
                        best = ratio[p];
                        arg = p;
                    }
                }
                eprintln!(
                    "k={k} converged: q={best:.6} at ({}, {})",
                    arg % row,
                    arg / row
                );
            }
            return Ok(StageStats {
                k,
                picard_iterations: sweep,
                final_delta: delta,
                linear_iterations: linear_total,
                final_linear_residual: last_residual,
                q: max_ratio(grid, &ratio),
            });
        }
    }
    let tail: Vec<String> = history
        .iter()
        .rev()
        .take(5)
        .rev()
        .map(|d| format!("{d:.3e}"))
        .collect();
    Err(Error::Numerics(format!(
        "Picard iteration did not converge within {} sweeps at k = {k} \
         (tolerance {:.1e}, last updates [{}]); the flow may lie outside \
         the certified subsonic regime",
        cfg.picard_max_iters,
        cfg.picard_tol_rel,
        tail.join(", ")
    )))
}

/// Solves the stream-function problem on `grid` for the truncated upstream
/// data `trunc`.
///
/// Walks the `k` schedule of `cfg`, re-imposing the stage's boundary data
/// and running the damped Picard iteration at each offset; the converged
/// `k = 0` field is returned together with its maximal raw Mach ratio `Q`
/// and the certification verdict `Q < 1 - 2 eps0`. The optional
/// `checkpoint` sink is called after every sweep.
///
/// Errors are [`Error::Numerics`] when the iteration diverges or stalls
/// (no certified subsonic solution can be produced at this data) and
/// [`Error::Hypothesis`]/[`Error::Config`] for inconsistent inputs.
pub fn solve(
    grid: &Arc<DomainGrid>,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    cfg: &SolverConfig,
    start: SolveStart,
    checkpoint: &mut Option<CheckpointSink<'_>>,
) -> Result<StreamField> {
    cfg.validate()?;
    if (grid.l - trunc.l()).abs() > 1e-9 * trunc.l() {
        return Err(Error::Hypothesis(format!(
            "grid height L = {} does not match the profile truncation length L = {}",
            grid.l,
            trunc.l()
        )));
    }
    let n = grid.n_nodes();
    let m_l = trunc.m_l();

    let needs_default_fill = matches!(start, SolveStart::Default);
    let (mut psi, first_stage) = match start {
        SolveStart::Default => (vec![0.0; n], 0),
        SolveStart::Guess(v) => {
            if v.len() != n {
                return Err(Error::Hypothesis(format!(
                    "initial guess has {} entries, grid has {} nodes",
                    v.len(),
                    n
                )));
            }
            (v, 0)
        }
        SolveStart::Resume { psi, stage } => {
            if psi.len() != n {
                return Err(Error::Hypothesis(format!(
                    "checkpoint field has {} entries, grid has {} nodes",
                    psi.len(),
                    n
                )));
            }
            if stage >= cfg.k_schedule.len() {
                return Err(Error::Config(format!(
                    "resume stage {stage} is out of range for a schedule of {} offsets",
                    cfg.k_schedule.len()
                )));
            }
            (psi, stage)
        }
    };

    let mut stages = Vec::with_capacity(cfg.k_schedule.len());
    let mut fill_pending = needs_default_fill;
    for (si, &k) in cfg.k_schedule.iter().enumerate().skip(first_stage) {
        let side = side_boundary_values(trunc, grid, k)?;
        if fill_pending {
            // Default start: extend the side profile across the domain.
            let row = grid.nx + 1;
            for p in 0..n {
                psi[p] = side[p / row];
            }
            fill_pending = false;
        }
        impose_boundaries(grid, &mut psi, &side, m_l);
        let stats = picard_stage(grid, trunc, gas, cfg, k, si, &mut psi, checkpoint)?;
        stages.push(stats);
    }

    // The certification ratio is read off the converged physical field.
    let last = stages
        .last()
        .expect("schedule validated nonempty");
    let q = last.q;
    let status = if q < 1.0 - 2.0 * cfg.eps0 {
        SolveStatus::Certified
    } else {
        SolveStatus::TruncationActive
    };
    Ok(StreamField {
        grid: Arc::clone(grid),
        psi,
        m_l,
        q,
        eps0: cfg.eps0,
        status,
        stages,
    })
}
