//! Matched one-dimensional downstream state over the annulus `[J, L]`.
//!
//! Far downstream of the obstacle the flow relaxes to a swirl-free state
//! that depends on the radius alone: a constant matched density `rho1`, a
//! velocity `u1(r)` on the annulus `J <= r <= L` (with `J = sup f` the
//! obstacle height), and a streamline map `chi : [0, L] -> [J, L]` pairing
//! each upstream radius `s` with the downstream radius of the same
//! streamline. The triple is pinned down by three requirements:
//!
//! * Bernoulli matching along streamlines,
//!   `u_L(s)^2/2 + h(rho_inf) = u1(chi(s))^2/2 + h(rho1)`,
//!   which forces `u1(chi(s)) = sqrt(D(s; rho1))` with
//!   `D(s; rho) = 2 (h(rho_inf) - h(rho)) + u_L(s)^2`;
//! * mass matching streamline by streamline,
//!   `rho_inf int_0^s u_L t dt = rho1 int_J^chi(s) u1 t dt`, whose
//!   differentiated form is the ODE
//!   `d(chi^2)/ds = 2 rho_inf u_L(s) s / (rho1 sqrt(D(s; rho1)))` with
//!   `chi(0)^2 = J^2`;
//! * total flux matching, `chi(L) = L`, which is one scalar equation
//!   `G(rho1) = (L^2 - J^2)/2` for the matched density, where
//!   `G(rho) = int_0^L rho_inf u_L(s) s / (rho sqrt(D(s; rho))) ds`
//!   is strictly increasing on the admissible density bracket.
//!
//! The comparison stream function `hat_psi(r) = rho1 int_J^r u1 t dt` is a
//! lower bound for the solved stream function on `r > J`; by mass matching
//! it satisfies `hat_psi(chi(s)) = psi_bar_L(s)` exactly, so its table
//! costs nothing beyond the `chi` integration. The departure
//! `psi_bar - hat_psi` stays between `0` and a constant multiple of
//! `rho_inf` determined by `J` and `max u_L`.

use crate::error::{Error, Result};
use crate::gas::GasModel;
use crate::numerics::{integrate, solve_bracketed};
use crate::profile::TruncatedProfile;
use crate::solver::StreamField;

/// Fixed RK4 step count for the `chi^2` integration; the right-hand side
/// is a smooth function of `s` alone, so 4096 steps leave the endpoint
/// error far below the 1e-6 endpoint demand.
pub const CHI_STEPS: usize = 4096;

/// Relative weight of the absolute quadrature tolerance used for `G`.
const G_QUAD_TOL: f64 = 1e-13;

/// Relative root tolerance for the matched density.
const RHO1_TOL: f64 = 1e-13;

/// `D(s; rho) = 2 (h(rho_inf) - h(rho)) + u_L(s)^2`, given the enthalpy
/// drop `dh2 = 2 (h(rho_inf) - h(rho))` precomputed by the caller.
#[inline]
fn d_of(dh2: f64, u: f64) -> f64 {
    dh2 + u * u
}

/// Twice the enthalpy drop `2 (h(rho_inf) - h(rho))`; errors on
/// non-physical densities.
fn enthalpy_drop2(rho: f64, trunc: &TruncatedProfile, gas: &GasModel) -> Result<f64> {
    Ok(2.0 * (gas.enthalpy(trunc.rho_inf())? - gas.enthalpy(rho)?))
}

/// Admissible density bracket `(rho_lower, rho_upper)` for the matched
/// density.
///
/// The endpoints solve the sonic-matching relations
///
/// ```text
/// 1/2 rho_lower^(gamma-1) + h(rho_lower) = 1/2 max u_L^2 + h(rho_inf) ,
/// h(rho_upper)                           = 1/2 min u_L^2 + h(rho_inf) ,
/// ```
///
/// both of which reduce to closed forms for the gamma-law enthalpy. The
/// bracket straddles the upstream density, `rho_lower < rho_inf <
/// rho_upper`, exactly when the upstream state is strictly subsonic
/// (`rho_inf^(gamma-1) > max u_L^2`); otherwise the construction has no
/// admissible densities and a hypothesis error is returned.
pub fn bracket(trunc: &TruncatedProfile, gas: &GasModel) -> Result<(f64, f64)> {
    let (u_min, u_max) = trunc.u_range();
    let rho_inf = trunc.rho_inf();
    let gamma = gas.gamma();
    let rho_pow = rho_inf.powf(gamma - 1.0);
    if !(rho_pow > u_max * u_max) {
        return Err(Error::Hypothesis(format!(
            "upstream density {rho_inf} is at or below the critical \
             threshold (max u_L^2)^(1/(gamma-1)) = {}; no matched annulus \
             state exists",
            (u_max * u_max).powf(1.0 / (gamma - 1.0))
        )));
    }
    let h_inf = gas.enthalpy(rho_inf)?;
    // 1/2 rho^(g-1) + rho^(g-1)/(g-1) = rho^(g-1) (g+1) / (2 (g-1)).
    let lower_pow =
        2.0 * (gamma - 1.0) / (gamma + 1.0) * (0.5 * u_max * u_max + h_inf);
    let upper_pow = rho_pow + (gamma - 1.0) * 0.5 * u_min * u_min;
    let lower = lower_pow.powf(1.0 / (gamma - 1.0));
    let upper = upper_pow.powf(1.0 / (gamma - 1.0));
    debug_assert!(lower < rho_inf && rho_inf < upper);
    Ok((lower, upper))
}

/// The mass-flux integral
///
/// ```text
/// G(rho) = int_0^L rho_inf u_L(s) s / (rho sqrt(D(s; rho))) ds ,
/// ```
///
/// by adaptive quadrature. `G` is strictly increasing on the admissible
/// bracket and satisfies `G(rho_inf) = L^2 / 2` for every profile (there
/// `D = u_L^2` and the integrand collapses to `s`).
///
/// Densities at which `D` loses positivity somewhere on `[0, L]` (i.e.
/// `rho >= rho_upper`) violate the bracket and produce an error.
pub fn mass_flux_g(rho: f64, trunc: &TruncatedProfile, gas: &GasModel) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Config(format!(
            "matched density must be positive and finite, got {rho}"
        )));
    }
    let dh2 = enthalpy_drop2(rho, trunc, gas)?;
    let (u_min, _) = trunc.u_range();
    if !(d_of(dh2, u_min) > 0.0) {
        return Err(Error::Numerics(format!(
            "bracket violation: D(s; rho = {rho}) <= 0 at min u_L; the \
             density lies at or above the upper bracket endpoint"
        )));
    }
    let l = trunc.l();
    Ok(g_quadrature(rho, dh2, trunc, l))
}

/// Quadrature core of [`mass_flux_g`]; positivity of `D` must already
/// hold.
fn g_quadrature(rho: f64, dh2: f64, trunc: &TruncatedProfile, l: f64) -> f64 {
    let rho_inf = trunc.rho_inf();
    integrate(
        |s| {
            let u = trunc.u(s);
            rho_inf * u * s / (rho * d_of(dh2, u).sqrt())
        },
        0.0,
        l,
        G_QUAD_TOL * (1.0 + l * l),
    )
}

/// Derivative of the mass-flux integral,
///
/// ```text
/// G'(rho) = int_0^L rho_inf u_L(s) s (rho^(gamma-1) - D(s; rho))
///           / (rho^2 D(s; rho)^(3/2)) ds ,
/// ```
///
/// positive on the admissible bracket (there `D < rho^(gamma-1)`).
fn g_prime_quadrature(
    rho: f64,
    dh2: f64,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    l: f64,
) -> f64 {
    let rho_inf = trunc.rho_inf();
    let rho_pow = rho.powf(gas.gamma() - 1.0);
    integrate(
        |s| {
            let u = trunc.u(s);
            let d = d_of(dh2, u);
            rho_inf * u * s * (rho_pow - d) / (rho * rho * d * d.sqrt())
        },
        0.0,
        l,
        G_QUAD_TOL * (1.0 + l * l),
    )
}

/// Solves `G(rho1) = (L^2 - J^2)/2` for the matched density by
/// safeguarded Newton iteration (bisection fallback) on the bracket
/// `[rho_lower, rho_inf]`.
///
/// The upper half of the admissible bracket never contains the root:
/// `G(rho_inf) = L^2/2` already overshoots the target, and `G` keeps
/// increasing beyond it. Restricting to `[rho_lower, rho_inf]` also keeps
/// the quadrature clear of the `D -> 0` degeneracy at the upper endpoint.
/// For `J = 0` the target equals `G(rho_inf)` identically and the upstream
/// density is returned exactly.
///
/// A missing sign change (`G(rho_lower) >= target`) means the cap radius
/// is too small for the annulus construction at this upstream state and
/// raises a hypothesis error.
pub fn solve_rho1(trunc: &TruncatedProfile, gas: &GasModel, j: f64) -> Result<f64> {
    let l = trunc.l();
    if !(j >= 0.0) || !j.is_finite() || j >= l {
        return Err(Error::Config(format!(
            "annulus inner radius J must lie in [0, L = {l}), got {j}"
        )));
    }
    if j == 0.0 {
        return Ok(trunc.rho_inf());
    }
    let (rho_lower, _) = bracket(trunc, gas)?;
    let target = 0.5 * (l * l - j * j);
    let g_lower = mass_flux_g(rho_lower, trunc, gas)?;
    if g_lower >= target {
        return Err(Error::Hypothesis(format!(
            "cap radius L = {l} is too small for the annulus matching: \
             G(rho_lower = {rho_lower}) = {g_lower} >= target {target}"
        )));
    }
    let rho_inf = trunc.rho_inf();
    let rho1 = solve_bracketed(
        |rho| {
            let dh2 = enthalpy_drop2(rho, trunc, gas)
                .expect("bracket densities are physical");
            (
                g_quadrature(rho, dh2, trunc, l) - target,
                g_prime_quadrature(rho, dh2, trunc, gas, l),
            )
        },
        rho_lower,
        rho_inf,
        RHO1_TOL,
        200,
        "matched annulus density rho1",
    )?;
    let residual = (mass_flux_g(rho1, trunc, gas)? - target).abs();
    if residual > 1e-10 * l * l {
        return Err(Error::Numerics(format!(
            "matched-density root residual {residual} exceeds 1e-10 L^2"
        )));
    }
    Ok(rho1)
}

/// The matched downstream state: density, streamline map, velocity and
/// comparison stream function, tabulated on a uniform `s`-grid over
/// `[0, L]`.
#[derive(Debug, Clone)]
pub struct AnnulusState {
    /// Matched density `rho1`.
    pub rho1: f64,
    /// Annulus inner radius `J` (obstacle height).
    pub j: f64,
    /// Cap radius `L`.
    pub l: f64,
    /// Sonic bound `rho1^((gamma-1)/2)` for the matched velocity.
    sonic1: f64,
    /// Uniform abscissae `s_i` on `[0, L]`.
    s: Vec<f64>,
    /// Streamline map values `chi(s_i)`, strictly increasing from `J`.
    chi: Vec<f64>,
    /// Matched velocity `u1(chi(s_i)) = sqrt(D(s_i; rho1))`.
    u1: Vec<f64>,
    /// Upstream stream function `psi_bar_L(s_i)`; by mass matching these
    /// are also the comparison values `hat_psi(chi(s_i))`.
    psi_bar: Vec<f64>,
    /// Largest tabulated `u1`.
    max_u1: f64,
}

/// Builds the matched state for a given density (normally the root from
/// [`solve_rho1`]) by integrating the `chi^2` equation with fixed-step
/// RK4 ([`CHI_STEPS`] steps), squaring away the root singularity of `chi`
/// itself at `s = 0`.
///
/// Fails when the density leaves the admissible range (non-positive `D`,
/// not strictly below the upstream density paired with `J > 0`, or a
/// supersonic matched velocity) and when the integrated map loses strict
/// monotonicity, which would indicate an inadequate step size.
pub fn build_state(
    rho1: f64,
    trunc: &TruncatedProfile,
    gas: &GasModel,
    j: f64,
) -> Result<AnnulusState> {
    let l = trunc.l();
    if !(j >= 0.0) || !j.is_finite() || j >= l {
        return Err(Error::Config(format!(
            "annulus inner radius J must lie in [0, L = {l}), got {j}"
        )));
    }
    let rho_inf = trunc.rho_inf();
    if !(rho1 > 0.0 && rho1 <= rho_inf) || (rho1 == rho_inf && j > 0.0) {
        return Err(Error::Numerics(format!(
            "matched density {rho1} outside (0, rho_inf = {rho_inf}]; the \
             state exists only below the upstream density (equality only \
             in the degenerate J = 0 case)"
        )));
    }
    let dh2 = enthalpy_drop2(rho1, trunc, gas)?;
    let (u_min, u_max) = trunc.u_range();
    if !(d_of(dh2, u_min) > 0.0) {
        return Err(Error::Numerics(format!(
            "bracket violation: D(s; rho1 = {rho1}) <= 0 at min u_L"
        )));
    }
    let sonic1 = rho1.powf(0.5 * (gas.gamma() - 1.0));
    let u1_sup = d_of(dh2, u_max).sqrt();
    if !(u1_sup < sonic1) {
        return Err(Error::Numerics(format!(
            "matched state is not subsonic: max u1 = {u1_sup} >= \
             rho1^((gamma-1)/2) = {sonic1}"
        )));
    }

    let n = CHI_STEPS;
    let h = l / n as f64;
    // d(chi^2)/ds = rhs(s), independent of chi^2 itself.
    let rhs = |s: f64| {
        let u = trunc.u(s);
        2.0 * rho_inf * u * s / (rho1 * d_of(dh2, u).sqrt())
    };
    let mut s_grid = Vec::with_capacity(n + 1);
    let mut chi = Vec::with_capacity(n + 1);
    let mut u1 = Vec::with_capacity(n + 1);
    let mut psi_bar = Vec::with_capacity(n + 1);
    let mut y = j * j;
    for i in 0..=n {
        let s = if i == n { l } else { i as f64 * h };
        s_grid.push(s);
        chi.push(y.sqrt());
        u1.push(d_of(dh2, trunc.u(s)).sqrt());
        psi_bar.push(trunc.stream(s));
        if i < n {
            let k1 = rhs(s);
            let k23 = rhs(s + 0.5 * h);
            let k4 = rhs(s + h);
            let y_next = y + h / 6.0 * (k1 + 4.0 * k23 + k4);
            if !(y_next > y) && s > 0.0 {
                return Err(Error::Numerics(format!(
                    "streamline map chi lost strict monotonicity at s = {s} \
                     (chi^2 step {} -> {}); the RK4 step size is inadequate",
                    y, y_next
                )));
            }
            y = y_next;
        }
    }
    let max_u1 = u1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(AnnulusState {
        rho1,
        j,
        l,
        sonic1,
        s: s_grid,
        chi,
        u1,
        psi_bar,
        max_u1,
    })
}

/// Piecewise-linear interpolation on strictly increasing abscissae,
/// clamped to the table range.
fn lin_interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

impl AnnulusState {
    /// Uniform `s`-abscissae of the tables.
    pub fn s_grid(&self) -> &[f64] {
        &self.s
    }

    /// Tabulated streamline map `chi(s_i)`.
    pub fn chi_table(&self) -> &[f64] {
        &self.chi
    }

    /// Tabulated matched velocity `u1(chi(s_i))`.
    pub fn u1_table(&self) -> &[f64] {
        &self.u1
    }

    /// Streamline map `chi(s)` by table interpolation.
    pub fn chi_at(&self, s: f64) -> f64 {
        lin_interp(&self.s, &self.chi, s)
    }

    /// Matched velocity as a function of the downstream radius
    /// `r` in `[J, L]`.
    pub fn u1_at(&self, r: f64) -> f64 {
        lin_interp(&self.chi, &self.u1, r)
    }

    /// Comparison stream function `hat_psi(r) = rho1 int_J^r u1 t dt`,
    /// via the mass-matching identity `hat_psi(chi(s)) = psi_bar_L(s)`.
    /// Zero for `r <= J`.
    pub fn hat_psi(&self, r: f64) -> f64 {
        lin_interp(&self.chi, &self.psi_bar, r)
    }

    /// Upstream stream function `psi_bar_L(s)` from the same table.
    pub fn psi_bar_at(&self, s: f64) -> f64 {
        lin_interp(&self.s, &self.psi_bar, s)
    }

    /// Largest tabulated matched velocity.
    pub fn max_u1(&self) -> f64 {
        self.max_u1
    }

    /// Subsonic certificate margin `rho1^((gamma-1)/2) - max u1`
    /// (positive for every state this module constructs).
    pub fn subsonic_margin(&self) -> f64 {
        self.sonic1 - self.max_u1
    }

    /// Largest Bernoulli-matching defect
    /// `|u1^2/2 + h(rho1) - u_L^2/2 - h(rho_inf)|` over the table; zero
    /// up to rounding by the construction of `u1`.
    pub fn bernoulli_defect(&self, trunc: &TruncatedProfile, gas: &GasModel) -> Result<f64> {
        let h1 = gas.enthalpy(self.rho1)?;
        let h_inf = gas.enthalpy(trunc.rho_inf())?;
        let mut worst = 0.0f64;
        for (s, u1) in self.s.iter().zip(&self.u1) {
            let u = trunc.u(*s);
            worst = worst
                .max((0.5 * u1 * u1 + h1 - 0.5 * u * u - h_inf).abs());
        }
        Ok(worst)
    }

    /// Three-column CSV table `s,chi,u1` with full-precision values.
    pub fn to_table(&self) -> String {
        let mut out = String::with_capacity(72 * (self.s.len() + 1));
        out.push_str("s,chi,u1\n");
        for i in 0..self.s.len() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e}\n",
                self.s[i], self.chi[i], self.u1[i]
            ));
        }
        out
    }
}

/// Result of [`compare_with_solution`].
#[derive(Debug, Clone, Copy)]
pub struct CompareReport {
    /// Tolerance `1e-6 m_L` used for both inequalities.
    pub tol: f64,
    /// `min (psi - hat_psi)` over fluid nodes with `r > J` (`+inf` when
    /// the set is empty).
    pub lower_margin: f64,
    /// Node attaining `lower_margin`.
    pub lower_argmin: (usize, usize),
    /// Number of nodes entering the lower bound.
    pub lower_nodes: usize,
    /// `min (psi_bar - psi)` over all fluid nodes.
    pub upper_margin: f64,
    /// Node attaining `upper_margin`.
    pub upper_argmin: (usize, usize),
    /// Both margins at or above `-tol`.
    pub pass: bool,
}

/// Checks the two-sided comparison `hat_psi(r) - tol <= psi <=
/// psi_bar(r) + tol` against a converged field: the matched state bounds
/// the solution from below on the annulus `r > J` and the upstream stream
/// function bounds it from above everywhere.
///
/// The state must have been built for the same cap radius as the field's
/// grid.
pub fn compare_with_solution(
    state: &AnnulusState,
    field: &StreamField,
) -> Result<CompareReport> {
    let grid = &field.grid;
    if (grid.l - state.l).abs() > 1e-9 * state.l.max(1.0) {
        return Err(Error::Config(format!(
            "annulus state was built for L = {} but the field's grid has \
             L = {}",
            state.l, grid.l
        )));
    }
    let tol = 1e-6 * field.m_l;
    let row = grid.nx + 1;
    let mut lower_margin = f64::INFINITY;
    let mut lower_argmin = (0usize, 0usize);
    let mut lower_nodes = 0usize;
    let mut upper_margin = f64::INFINITY;
    let mut upper_argmin = (0usize, 0usize);
    for p in 0..grid.n_nodes() {
        if !grid.is_fluid_at(p) {
            continue;
        }
        let (i, j) = (p % row, p / row);
        let r = grid.r_node(i, j);
        let psi = field.psi[p];
        let upper = state.psi_bar_at(r) - psi;
        if upper < upper_margin {
            upper_margin = upper;
            upper_argmin = (i, j);
        }
        if r > state.j {
            lower_nodes += 1;
            let lower = psi - state.hat_psi(r);
            if lower < lower_margin {
                lower_margin = lower;
                lower_argmin = (i, j);
            }
        }
    }
    Ok(CompareReport {
        tol,
        lower_margin,
        lower_argmin,
        lower_nodes,
        upper_margin,
        upper_argmin,
        pass: lower_margin >= -tol && upper_margin >= -tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainGrid, GridSpec, Obstacle};
    use crate::profile::UpstreamProfile;
    use crate::solver::{solve, SolveStart, SolverConfig};
    use std::sync::Arc;

    fn gas2() -> GasModel {
        GasModel::new(2.0).unwrap()
    }

    fn uniform_l10() -> TruncatedProfile {
        UpstreamProfile::uniform(1.0, 4.0)
            .unwrap()
            .truncate(10.0)
            .unwrap()
    }

    /// Independent bisection oracle for the uniform closed form
    /// `rho sqrt(9 - 2 rho) = 400/99`.
    fn uniform_rho1_oracle() -> f64 {
        let f = |rho: f64| rho * (9.0 - 2.0 * rho).sqrt() - 400.0 / 99.0;
        let (mut lo, mut hi) = (3.0, 4.0);
        // f is decreasing out at rho -> 4.5; near the root above rho_inf
        // side f(4) = 4 - 4.0404 < 0, f(3) = 3 sqrt(3) - 4.04 > 0.
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn bracket_uniform_closed_form() {
        let (lo, hi) = bracket(&uniform_l10(), &gas2()).unwrap();
        assert!((lo - 3.0).abs() < 1e-12, "lower {lo}");
        assert!((hi - 4.5).abs() < 1e-12, "upper {hi}");
    }

    #[test]
    fn bracket_exp_vortical_closed_form() {
        let trunc = UpstreamProfile::exp_vortical(1.0, 2.0, 16.0)
            .unwrap()
            .truncate(10.0)
            .unwrap();
        let (lo, hi) = bracket(&trunc, &gas2()).unwrap();
        let (u_min, u_max) = trunc.u_range();
        assert!((u_max - 3.0).abs() < 1e-12);
        // gamma = 2: lower = (max^2/2 + rho_inf) * 2/3, upper = min^2/2 +
        // rho_inf.
        assert!((lo - (0.5 * 9.0 + 16.0) * 2.0 / 3.0).abs() < 1e-10);
        assert!((hi - (0.5 * u_min * u_min + 16.0)).abs() < 1e-10);
        assert!(lo < 16.0 && 16.0 < hi);
    }

    #[test]
    fn bracket_rejects_critical_upstream() {
        // exp_vortical max u = 3 => critical density 9 at gamma = 2.
        let trunc = UpstreamProfile::exp_vortical(1.0, 2.0, 8.9)
            .unwrap()
            .truncate(10.0)
            .unwrap();
        let err = bracket(&trunc, &gas2()).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)), "{err}");
    }

    #[test]
    fn g_at_rho_inf_is_half_l_squared() {
        let gas = gas2();
        let cases: [(TruncatedProfile, f64); 3] = [
            (uniform_l10(), 10.0),
            (
                UpstreamProfile::exp_vortical(1.0, 2.0, 16.0)
                    .unwrap()
                    .truncate(10.0)
                    .unwrap(),
                10.0,
            ),
            (
                UpstreamProfile::exp_vortical(1.0, 0.5, 4.0)
                    .unwrap()
                    .truncate(7.0)
                    .unwrap(),
                7.0,
            ),
        ];
        for (trunc, l) in cases {
            let g = mass_flux_g(trunc.rho_inf(), &trunc, &gas).unwrap();
            assert!(
                (g - 0.5 * l * l).abs() < 1e-10,
                "G(rho_inf) = {g} vs {}",
                0.5 * l * l
            );
        }
    }

    #[test]
    fn g_matches_uniform_closed_form() {
        let gas = gas2();
        let trunc = uniform_l10();
        for rho in [3.2, 3.7, 4.2] {
            let g = mass_flux_g(rho, &trunc, &gas).unwrap();
            let exact = 200.0 / (rho * (9.0 - 2.0 * rho).sqrt());
            assert!((g - exact).abs() < 1e-9, "rho {rho}: {g} vs {exact}");
        }
    }

    #[test]
    fn g_monotone_on_bracket_sample() {
        let gas = gas2();
        let trunc = uniform_l10();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=9 {
            let rho = 3.5 + 0.1 * k as f64;
            let g = mass_flux_g(rho, &trunc, &gas).unwrap();
            assert!(g > prev, "G not increasing at rho = {rho}");
            prev = g;
        }
    }

    #[test]
    fn g_rejects_density_beyond_upper_endpoint() {
        let err = mass_flux_g(4.6, &uniform_l10(), &gas2()).unwrap_err();
        assert!(matches!(err, Error::Numerics(_)), "{err}");
    }

    #[test]
    fn rho1_uniform_matches_oracle() {
        let gas = gas2();
        let trunc = uniform_l10();
        let rho1 = solve_rho1(&trunc, &gas, 1.0).unwrap();
        let oracle = uniform_rho1_oracle();
        assert!((rho1 - oracle).abs() < 1e-9, "{rho1} vs oracle {oracle}");
        assert!((rho1 - 3.9864).abs() < 1e-3);
        let g = mass_flux_g(rho1, &trunc, &gas).unwrap();
        assert!((g - 49.5).abs() <= 1e-10 * 100.0);
    }

    #[test]
    fn rho1_degenerate_inner_radius_returns_rho_inf() {
        let rho1 = solve_rho1(&uniform_l10(), &gas2(), 0.0).unwrap();
        assert_eq!(rho1, 4.0);
    }

    #[test]
    fn rho1_exp_vortical_l20_inside_bracket() {
        let gas = gas2();
        let trunc = UpstreamProfile::exp_vortical(1.0, 2.0, 16.0)
            .unwrap()
            .truncate(20.0)
            .unwrap();
        let (lo, hi) = bracket(&trunc, &gas).unwrap();
        let rho1 = solve_rho1(&trunc, &gas, 0.3).unwrap();
        assert!(lo < rho1 && rho1 < hi, "rho1 {rho1} vs ({lo}, {hi})");
        assert!(rho1 < 16.0);
        // Monotone increase across the root's neighbourhood.
        let below = mass_flux_g(rho1 - 0.05, &trunc, &gas).unwrap();
        let above = mass_flux_g(rho1 + 0.05, &trunc, &gas).unwrap();
        let at = mass_flux_g(rho1, &trunc, &gas).unwrap();
        assert!(below < at && at < above);
    }

    #[test]
    fn rho1_errors_when_cap_radius_too_small() {
        let gas = gas2();
        let trunc = UpstreamProfile::uniform(1.0, 4.0)
            .unwrap()
            .truncate(2.05)
            .unwrap();
        let err = solve_rho1(&trunc, &gas, 1.0).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(_)), "{err}");
        assert!(err.to_string().contains("too small"), "{err}");
    }

    #[test]
    fn state_uniform_matches_closed_form_map() {
        let gas = gas2();
        let trunc = uniform_l10();
        let rho1 = solve_rho1(&trunc, &gas, 1.0).unwrap();
        let state = build_state(rho1, &trunc, &gas, 1.0).unwrap();
        // c = rho_inf u_bar / (rho1 u1) = 0.99 exactly at the exact root
        // (rho1 u1 = 400/99 there), as the flux identity dictates.
        let c = 4.0 / (rho1 * (9.0 - 2.0 * rho1).sqrt());
        assert!((c - 0.99).abs() < 1e-10, "c = {c}");
        for (s, chi) in state.s_grid().iter().zip(state.chi_table()) {
            let exact = (1.0 + c * s * s).sqrt();
            assert!(
                (chi - exact).abs() < 1e-7,
                "chi({s}) = {chi} vs {exact}"
            );
        }
        assert!((state.chi_at(5.0) - 25.75f64.sqrt()).abs() < 1e-7);
        assert!((state.chi_at(5.0) - 5.0744).abs() < 1e-4);
        // Endpoint consistency: chi(L) = L.
        let chi_l = *state.chi_table().last().unwrap();
        assert!((chi_l - 10.0).abs() < 1e-6, "chi(L) = {chi_l}");
    }

    #[test]
    fn state_invariants_hold() {
        let gas = gas2();
        for (trunc, j) in [
            (uniform_l10(), 1.0),
            (
                UpstreamProfile::exp_vortical(1.0, 2.0, 16.0)
                    .unwrap()
                    .truncate(20.0)
                    .unwrap(),
                0.3,
            ),
        ] {
            let rho1 = solve_rho1(&trunc, &gas, j).unwrap();
            assert!(0.0 < rho1 && rho1 < trunc.rho_inf());
            let state = build_state(rho1, &trunc, &gas, j).unwrap();
            let l = trunc.l();
            // chi strictly increasing from J to ~L.
            assert_eq!(state.chi_table()[0], j);
            for w in state.chi_table().windows(2) {
                assert!(w[1] > w[0]);
            }
            let chi_l = *state.chi_table().last().unwrap();
            assert!((chi_l - l).abs() < 1e-6 * l, "chi(L) = {chi_l}");
            // xi = chi^2 - s^2 nonincreasing within [0, J^2], ending at 0.
            let mut prev = f64::INFINITY;
            for (s, chi) in state.s_grid().iter().zip(state.chi_table()) {
                let xi = chi * chi - s * s;
                assert!(xi >= -1e-8 * l * l && xi <= j * j + 1e-12);
                assert!(xi <= prev + 1e-12 * l * l, "xi rising at s = {s}");
                prev = xi;
            }
            let xi_end = chi_l * chi_l - l * l;
            assert!(xi_end.abs() < 1e-8 * l * l, "xi(L) = {xi_end}");
            // Subsonic matched state with exact Bernoulli matching.
            assert!(state.subsonic_margin() > 0.0);
            assert!(state.max_u1() > 0.0);
            assert!(state.bernoulli_defect(&trunc, &gas).unwrap() <= 1e-10);
            // 0 <= psi_bar - hat_psi <= rho_inf max_u J^2 / 2 on [J, L].
            let (_, u_max) = trunc.u_range();
            let cap = 0.5 * trunc.rho_inf() * u_max * j * j;
            for k in 0..=100 {
                let r = j + (l - j) * k as f64 / 100.0;
                let gap = trunc.stream(r) - state.hat_psi(r);
                assert!(
                    gap >= -1e-10 && gap <= cap + 1e-8,
                    "gap {gap} at r = {r}"
                );
            }
        }
    }

    #[test]
    fn hat_psi_reproduces_mass_matching_identity() {
        let gas = gas2();
        let trunc = uniform_l10();
        let rho1 = solve_rho1(&trunc, &gas, 1.0).unwrap();
        let state = build_state(rho1, &trunc, &gas, 1.0).unwrap();
        // hat_psi(chi(s_i)) = psi_bar(s_i) holds exactly at table nodes.
        for k in (0..=CHI_STEPS).step_by(97) {
            let chi = state.chi_table()[k];
            let bar = trunc.stream(state.s_grid()[k]);
            assert!((state.hat_psi(chi) - bar).abs() < 1e-12);
        }
        assert_eq!(state.hat_psi(state.j), 0.0);
        assert_eq!(state.hat_psi(0.5), 0.0); // r below J.
        // Independent quadrature of rho1 int_J^r u1 t dt.
        for r in [2.0, 5.0, 9.0] {
            let direct = rho1
                * integrate(|t| state.u1_at(t) * t, state.j, r, 1e-11);
            assert!(
                (state.hat_psi(r) - direct).abs() < 1e-5,
                "hat_psi({r}) = {} vs {direct}",
                state.hat_psi(r)
            );
        }
    }

    #[test]
    fn state_rejects_bad_densities() {
        let gas = gas2();
        let trunc = uniform_l10();
        assert!(build_state(4.0, &trunc, &gas, 1.0).is_err()); // rho_inf, J>0
        assert!(build_state(4.6, &trunc, &gas, 1.0).is_err()); // beyond upper
        assert!(build_state(-1.0, &trunc, &gas, 1.0).is_err());
        assert!(build_state(3.99, &trunc, &gas, 10.0).is_err()); // J >= L
    }

    #[test]
    fn table_dump_is_three_column_csv() {
        let gas = gas2();
        let trunc = uniform_l10();
        let rho1 = solve_rho1(&trunc, &gas, 1.0).unwrap();
        let state = build_state(rho1, &trunc, &gas, 1.0).unwrap();
        let table = state.to_table();
        let mut lines = table.lines();
        assert_eq!(lines.next(), Some("s,chi,u1"));
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(first[0], 0.0);
        assert_eq!(first[1], 1.0);
        assert!(first[2] > 0.0);
        assert_eq!(table.lines().count(), CHI_STEPS + 2);
    }

    #[test]
    fn compare_equality_without_obstacle() {
        let gas = gas2();
        let profile = UpstreamProfile::uniform(1.0, 4.0).unwrap();
        let trunc = profile.truncate(4.0).unwrap();
        let grid = Arc::new(
            DomainGrid::build(
                Obstacle::none(),
                GridSpec {
                    x_half: 2.0,
                    l: 4.0,
                    nx: 24,
                    nr: 24,
                },
            )
            .unwrap(),
        );
        let cfg = SolverConfig {
            k_schedule: vec![0.0],
            ..SolverConfig::default()
        };
        let field =
            solve(&grid, &trunc, &gas, &cfg, SolveStart::Default, &mut None).unwrap();
        let rho1 = solve_rho1(&trunc, &gas, 0.0).unwrap();
        let state = build_state(rho1, &trunc, &gas, 0.0).unwrap();
        let rep = compare_with_solution(&state, &field).unwrap();
        assert!(rep.pass, "{rep:?}");
        // Degenerate J = 0: hat_psi = psi_bar, so both margins measure the
        // same equality within interpolation noise.
        assert!(rep.lower_margin.abs() < 1e-5, "{rep:?}");
        assert!(rep.upper_margin.abs() < 1e-5, "{rep:?}");
        assert!(rep.lower_nodes > 0);
    }

    #[test]
    fn compare_bounds_obstacle_run() {
        let gas = gas2();
        let profile = UpstreamProfile::uniform(1.0, 16.0).unwrap();
        let trunc = profile.truncate(3.0).unwrap();
        let grid = Arc::new(
            DomainGrid::build(
                Obstacle::bump(0.3).unwrap(),
                GridSpec {
                    x_half: 2.0,
                    l: 3.0,
                    nx: 48,
                    nr: 36,
                },
            )
            .unwrap(),
        );
        let field = solve(
            &grid,
            &trunc,
            &gas,
            &SolverConfig::default(),
            SolveStart::Default,
            &mut None,
        )
        .unwrap();
        let rho1 = solve_rho1(&trunc, &gas, 0.3).unwrap();
        let state = build_state(rho1, &trunc, &gas, 0.3).unwrap();
        let rep = compare_with_solution(&state, &field).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.lower_nodes > 0);

        // A corrupted field (halved psi) must fail the lower bound.
        let mut bad = field.clone();
        for v in &mut bad.psi {
            *v *= 0.5;
        }
        let rep_bad = compare_with_solution(&state, &bad).unwrap();
        assert!(!rep_bad.pass, "{rep_bad:?}");
        assert!(rep_bad.lower_margin < -rep_bad.tol);
    }

    #[test]
    fn compare_rejects_mismatched_cap_radius() {
        let gas = gas2();
        let trunc = uniform_l10();
        let rho1 = solve_rho1(&trunc, &gas, 1.0).unwrap();
        let state = build_state(rho1, &trunc, &gas, 1.0).unwrap();
        let profile = UpstreamProfile::uniform(1.0, 4.0).unwrap();
        let trunc4 = profile.truncate(4.0).unwrap();
        let grid = Arc::new(
            DomainGrid::build(
                Obstacle::none(),
                GridSpec {
                    x_half: 2.0,
                    l: 4.0,
                    nx: 16,
                    nr: 16,
                },
            )
            .unwrap(),
        );
        let cfg = SolverConfig {
            k_schedule: vec![0.0],
            ..SolverConfig::default()
        };
        let field =
            solve(&grid, &trunc4, &gas, &cfg, SolveStart::Default, &mut None)
                .unwrap();
        let err = compare_with_solution(&state, &field).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }
}
