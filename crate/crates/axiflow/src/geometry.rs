//! Obstacle geometry and the masked Cartesian grid.
//!
//! The meridian computational domain is the rectangle
//! `[-X, X] x [0, L]` in `(x, r)`, discretised by a uniform tensor grid of
//! `nx + 1` by `nr + 1` nodes. A smooth compactly supported obstacle
//! profile `f(x) >= 0` (support inside `(0, 1)`) masks the nodes strictly
//! below the profile. In each obstructed column the *highest masked slot*
//! is repurposed as the obstacle-boundary node: it keeps its lattice slot
//! `(i, j)` but is snapped up onto the profile, living at radius
//! `r = f(x_i)`, and carries the homogeneous Dirichlet value of the stream
//! function, exactly like the axis. When the profile passes through a
//! lattice node (to within a small fraction of the cell), that node itself
//! becomes the boundary node.
//!
//! Snapping makes the discrete Dirichlet boundary sample the smooth curve
//! instead of a staircase of lattice nodes. A staircase boundary has
//! reentrant corners at every step whose local gradient grows without
//! bound under refinement, which wrecks one-sided surface gradients (and
//! with them the subsonicity certificate); on the snapped boundary the
//! surface gradient converges. Snapping *up from the solid side* matters:
//! it keeps every fluid lattice point as a genuine unknown. (Snapping the
//! first fluid node down would delete fluid nodes along rows that graze
//! the profile near its crest, and their neighbours would read the
//! boundary zero in place of an interior value — an O(1) gradient error
//! that refinement never cures.) The vertical leg from the boundary node
//! to the fluid node above it has length `rs[j+1] - f` in `(0, hr]`; a
//! short leg only strengthens the Dirichlet coupling of that one fluid
//! node, which is harmless to the solver. Horizontal legs are left on the
//! lattice (first-order boundary fitting, consistent with the
//! second-order interior scheme's observed behaviour).
//!
//! Every node gets exactly one class; the precedence is masked first, then
//! the side boundaries, then obstacle/axis, then the top lid. Interior
//! nodes are the unknowns of the discrete problem.

use crate::error::{Error, Result};
use crate::numerics::integrate;
use crate::profile::TruncatedProfile;

/// Snapping tolerance when comparing node radii against the obstacle
/// profile, relative to the cap radius.
const SNAP_REL: f64 = 1e-12;

/// Fraction of the radial spacing below which the profile is treated as
/// passing through a lattice node; that node then becomes the boundary
/// node itself, keeping the vertical cut leg away from zero.
const NODE_SNAP_REL: f64 = 1e-6;

/// Axisymmetric obstacle profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    /// Unobstructed flow (profile identically zero).
    None,
    /// Compact smooth bump `f(x) = height * exp(4 - 1/(x(1-x)))` on
    /// `(0, 1)`, zero elsewhere; the peak value is exactly `height` at
    /// `x = 1/2`.
    Bump { height: f64 },
}

/// The bump profile function itself (exposed for tests and tabulation).
pub fn bump_profile(height: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    height * (4.0 - 1.0 / (x * (1.0 - x))).exp()
}

impl Obstacle {
    /// No obstacle.
    pub fn none() -> Self {
        Obstacle::None
    }

    /// Bump of peak height `height >= 0`.
    pub fn bump(height: f64) -> Result<Self> {
        if !(height >= 0.0) || !height.is_finite() {
            return Err(Error::Hypothesis(format!(
                "bump height must be nonnegative and finite, got {height}"
            )));
        }
        Ok(Obstacle::Bump { height })
    }

    /// Profile value `f(x)`.
    pub fn height_at(&self, x: f64) -> f64 {
        match self {
            Obstacle::None => 0.0,
            Obstacle::Bump { height } => bump_profile(*height, x),
        }
    }

    /// Profile slope `f'(x)`. For the bump, `f' = f * (1 - 2x) / (x(1-x))^2`
    /// on the support, zero elsewhere (the profile is flat to all orders at
    /// the support edges).
    pub fn slope_at(&self, x: f64) -> f64 {
        match self {
            Obstacle::None => 0.0,
            Obstacle::Bump { height } => {
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    let w = x * (1.0 - x);
                    bump_profile(*height, x) * (1.0 - 2.0 * x) / (w * w)
                }
            }
        }
    }

    /// `J = sup f` (peak height).
    pub fn max_height(&self) -> f64 {
        match self {
            Obstacle::None => 0.0,
            Obstacle::Bump { height } => *height,
        }
    }

    /// True when the profile is identically zero.
    pub fn is_none(&self) -> bool {
        self.max_height() == 0.0
    }
}

/// Node classification on the masked grid. Classes are disjoint and
/// exhaustive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum NodeClass {
    /// PDE unknown.
    Interior,
    /// Lowest fluid node of an obstructed column (Dirichlet 0).
    ObstacleBoundary,
    /// Symmetry axis node outside the obstacle footprint (Dirichlet 0).
    Axis,
    /// Top lid `r = L` (Dirichlet `m_L`).
    Top,
    /// Inflow side `x = -X` (Dirichlet side profile).
    Inflow,
    /// Outflow side `x = +X` (Dirichlet side profile).
    Outflow,
    /// Node strictly inside the obstacle; not part of the flow domain.
    Masked,
}

impl NodeClass {
    /// Single-character tag used in the grid raster dump.
    pub fn tag(self) -> char {
        match self {
            NodeClass::Interior => '.',
            NodeClass::ObstacleBoundary => 'B',
            NodeClass::Axis => 'A',
            NodeClass::Top => 'T',
            NodeClass::Inflow => 'I',
            NodeClass::Outflow => 'O',
            NodeClass::Masked => '#',
        }
    }
}

/// Grid resolution request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Half-width `X` of the domain in the flow direction.
    pub x_half: f64,
    /// Cap radius `L`.
    pub l: f64,
    /// Number of cells in `x` (nodes: `nx + 1`).
    pub nx: usize,
    /// Number of cells in `r` (nodes: `nr + 1`).
    pub nr: usize,
}

/// Uniform tensor grid on `[-X, X] x [0, L]` with obstacle masking.
#[derive(Debug, Clone)]
pub struct DomainGrid {
    /// Domain half-width `X`.
    pub x_half: f64,
    /// Cap radius `L`.
    pub l: f64,
    /// Cells in `x`.
    pub nx: usize,
    /// Cells in `r`.
    pub nr: usize,
    /// Cell size in `x`.
    pub hx: f64,
    /// Cell size in `r`.
    pub hr: f64,
    /// Node abscissae, `xs[0] = -X`, `xs[nx] = X` exactly.
    pub xs: Vec<f64>,
    /// Node radii, `rs[0] = 0`, `rs[nr] = L` exactly.
    pub rs: Vec<f64>,
    class: Vec<NodeClass>,
    /// Lowest fluid row index per column.
    first_fluid: Vec<usize>,
    /// Radius of the column's Dirichlet floor: `f(x_i)` under obstructed
    /// columns (the snapped position of the boundary node), `0` elsewhere.
    surface_r: Vec<f64>,
    /// Profile slope `f'(x_i)` per column.
    surface_slope: Vec<f64>,
    /// Horizontal cut legs, one per x-face (`j * nx + i` for the face
    /// between `(i, j)` and `(i + 1, j)`): where an interior node meets a
    /// row-solid neighbour, the distance from that node to the profile
    /// crossing `f(x) = rs[j]` along the row; `hx` everywhere else.
    x_wall: Vec<f64>,
    obstacle: Obstacle,
    masked_count: usize,
}

impl DomainGrid {
    /// Builds and classifies the grid.
    ///
    /// Requirements: `nx, nr >= 16`; `x_half >= 2` (so the obstacle support
    /// `(0,1)` is strictly interior); `l > max_height` (obstacle below the
    /// lid).
    pub fn build(obstacle: Obstacle, spec: GridSpec) -> Result<Self> {
        let GridSpec { x_half, l, nx, nr } = spec;
        if nx < 16 || nr < 16 {
            return Err(Error::Hypothesis(format!(
                "grid must have at least 16 cells per direction, got {nx} x {nr}"
            )));
        }
        if !(x_half >= 2.0) || !x_half.is_finite() {
            return Err(Error::Hypothesis(format!(
                "domain half-width X must be at least 2, got {x_half}"
            )));
        }
        if !(l > obstacle.max_height()) || !l.is_finite() || !(l > 0.0) {
            return Err(Error::Hypothesis(format!(
                "cap radius L = {l} must exceed the obstacle height {}",
                obstacle.max_height()
            )));
        }
        let hx = 2.0 * x_half / nx as f64;
        let hr = l / nr as f64;
        let mut xs: Vec<f64> = (0..=nx).map(|i| -x_half + i as f64 * hx).collect();
        xs[nx] = x_half;
        let mut rs: Vec<f64> = (0..=nr).map(|j| j as f64 * hr).collect();
        rs[nr] = l;

        let snap = SNAP_REL * l;
        let mut class = vec![NodeClass::Interior; (nx + 1) * (nr + 1)];
        let mut first_fluid = vec![0usize; nx + 1];
        let mut surface_r = vec![0.0f64; nx + 1];
        let mut surface_slope = vec![0.0f64; nx + 1];
        let mut masked_count = 0usize;
        for i in 0..=nx {
            let f = obstacle.height_at(xs[i]);
            let snapped = f > snap;
            // First lattice row at or (within snap) above the profile. The
            // boundary node takes the highest sub-surface slot, snapped up
            // onto the profile, so every fluid lattice point keeps its
            // unknown; when the profile passes through row `j_surf` itself
            // that node is the boundary node.
            let j_surf = rs.partition_point(|&r| r < f - snap);
            let b_row = if !snapped {
                0
            } else if rs[j_surf] - f <= NODE_SNAP_REL * hr {
                j_surf
            } else {
                j_surf - 1
            };
            if b_row + 2 > nr {
                return Err(Error::Hypothesis(format!(
                    "obstacle must clear the lid by at least two grid rows \
                     (column x = {} reaches row {b_row} of {nr})",
                    xs[i]
                )));
            }
            first_fluid[i] = b_row;
            if snapped {
                surface_r[i] = f;
                surface_slope[i] = obstacle.slope_at(xs[i]);
            }
            for j in 0..=nr {
                let n = j * (nx + 1) + i;
                class[n] = if j < b_row {
                    masked_count += 1;
                    NodeClass::Masked
                } else if i == 0 {
                    NodeClass::Inflow
                } else if i == nx {
                    NodeClass::Outflow
                } else if j == b_row {
                    if snapped {
                        NodeClass::ObstacleBoundary
                    } else {
                        NodeClass::Axis
                    }
                } else if j == nr {
                    NodeClass::Top
                } else {
                    NodeClass::Interior
                };
            }
        }
        let mut grid = DomainGrid {
            x_half,
            l,
            nx,
            nr,
            hx,
            hr,
            xs,
            rs,
            class,
            first_fluid,
            surface_r,
            surface_slope,
            x_wall: vec![hx; nx * (nr + 1)],
            obstacle,
            masked_count,
        };
        grid.compute_x_walls()?;
        Ok(grid)
    }

    /// Flat node index; `x` varies fastest (row-major in `j`).
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Class of node `(i, j)`.
    #[inline]
    pub fn class(&self, i: usize, j: usize) -> NodeClass {
        self.class[self.idx(i, j)]
    }

    /// Class by flat index.
    #[inline]
    pub fn class_at(&self, n: usize) -> NodeClass {
        self.class[n]
    }

    /// Total node count `(nx+1)(nr+1)`.
    #[inline]
    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.nr + 1)
    }

    /// True when the node belongs to the flow domain (not masked).
    #[inline]
    pub fn is_fluid(&self, i: usize, j: usize) -> bool {
        self.class[self.idx(i, j)] != NodeClass::Masked
    }

    /// [`Self::is_fluid`] by flat index.
    #[inline]
    pub fn is_fluid_at(&self, n: usize) -> bool {
        self.class[n] != NodeClass::Masked
    }

    /// True when the node is a PDE unknown.
    #[inline]
    pub fn is_unknown_at(&self, n: usize) -> bool {
        self.class[n] == NodeClass::Interior
    }

    /// Lowest fluid row of column `i` (0 for unobstructed columns).
    #[inline]
    pub fn first_fluid_row(&self, i: usize) -> usize {
        self.first_fluid[i]
    }

    /// Physical radius of node `(i, j)`: the snapped position `f(x_i)` for
    /// obstacle-boundary nodes, the lattice radius otherwise.
    #[inline]
    pub fn r_node(&self, i: usize, j: usize) -> f64 {
        if self.class[self.idx(i, j)] == NodeClass::ObstacleBoundary {
            self.surface_r[i]
        } else {
            self.rs[j]
        }
    }

    /// Radial legs from fluid node `(i, j)` to the fluid nodes below and
    /// above it, using true (snapped) radii; a leg on the solid or outside
    /// side (column floor, lid) is zero. The pair defines the node's dual
    /// cell `[r - a/2, r + b/2]`.
    #[inline]
    pub fn cell_legs(&self, i: usize, j: usize) -> (f64, f64) {
        let r = self.r_node(i, j);
        let a = if j > self.first_fluid[i] {
            r - self.r_node(i, j - 1)
        } else {
            0.0
        };
        let b = if j < self.nr {
            self.r_node(i, j + 1) - r
        } else {
            0.0
        };
        (a, b)
    }

    /// Height of the dual cell of fluid node `(i, j)`: half a radial leg on
    /// each side, zero legs on the solid/outside sides.
    #[inline]
    pub fn cell_height(&self, i: usize, j: usize) -> f64 {
        let (a, b) = self.cell_legs(i, j);
        0.5 * (a + b)
    }

    /// Whether node `(i, j)` is a valid sample of a nodal field *along row
    /// `j`*, i.e. a value living at radius `rs[j]`. Masked nodes are not;
    /// neither is a snapped boundary node whose true radius pokes above
    /// the row's lattice radius (its slot's lattice point is inside the
    /// obstacle). A boundary node that sits on the lattice radius itself
    /// is a valid row sample (its value, zero, holds at that point).
    #[inline]
    pub fn row_fluid(&self, i: usize, j: usize) -> bool {
        match self.class[self.idx(i, j)] {
            NodeClass::Masked => false,
            NodeClass::ObstacleBoundary => {
                self.surface_r[i] <= self.rs[j] + 1e-5 * self.hr
            }
            _ => true,
        }
    }

    /// Horizontal leg from fluid node `(i, j)` toward its row-solid
    /// neighbour in direction `east` (`true` for `i + 1`): the distance to
    /// the profile crossing `f(x) = rs[j]` where that has been computed
    /// (interior nodes against row-solid neighbours), `hx` otherwise.
    #[inline]
    pub fn x_leg(&self, i: usize, j: usize, east: bool) -> f64 {
        let face = if east { j * self.nx + i } else { j * self.nx + i - 1 };
        self.x_wall[face]
    }

    /// Fills `x_wall` with the profile-crossing legs of every horizontal
    /// face that joins an interior node to a row-solid neighbour. The
    /// profile is continuous and brackets the row radius across such a
    /// face, so the crossing is found by safeguarded Newton.
    fn compute_x_walls(&mut self) -> Result<()> {
        for j in 0..=self.nr {
            let r = self.rs[j];
            for i in 0..self.nx {
                let (fa, fb) = (self.row_fluid(i, j), self.row_fluid(i + 1, j));
                if fa == fb {
                    continue;
                }
                // Only legs seen from an unknown matter; skip walls whose
                // fluid side is itself prescribed.
                let (i_fluid, i_solid) = if fa { (i, i + 1) } else { (i + 1, i) };
                if self.class[self.idx(i_fluid, j)] != NodeClass::Interior {
                    continue;
                }
                let (lo, hi) = if fa {
                    (self.xs[i_fluid], self.xs[i_solid])
                } else {
                    (self.xs[i_solid], self.xs[i_fluid])
                };
                let obstacle = self.obstacle;
                let x_star = crate::numerics::solve_bracketed(
                    |x| (obstacle.height_at(x) - r, obstacle.slope_at(x)),
                    lo,
                    hi,
                    1e-13,
                    200,
                    "obstacle crossing of a grid row",
                )?;
                self.x_wall[j * self.nx + i] = (self.xs[i_fluid] - x_star).abs();
            }
        }
        Ok(())
    }

    /// Radius of the column's Dirichlet floor (`f(x_i)` under the obstacle,
    /// `0` elsewhere).
    #[inline]
    pub fn surface_r(&self, i: usize) -> f64 {
        self.surface_r[i]
    }

    /// Obstacle slope `f'(x_i)` at column `i` (`0` outside the support).
    #[inline]
    pub fn surface_slope(&self, i: usize) -> f64 {
        self.surface_slope[i]
    }

    /// Number of masked nodes.
    pub fn masked_count(&self) -> usize {
        self.masked_count
    }

    /// The obstacle this grid was cut against.
    pub fn obstacle(&self) -> Obstacle {
        self.obstacle
    }

    /// d/dx of a nodal field at `(i, j)`: second-order centered where both
    /// x-neighbours are row samples, second-order one-sided at boundaries
    /// (first order if only one neighbour exists, zero if none). The
    /// stencil is cut-aware: a row-solid neighbour of an interior node is
    /// read as the Dirichlet zero at the profile crossing of the row, with
    /// the nonuniform-leg formula; a leg squeezed far below `hx` falls
    /// back to the one-sided stencil away from the wall.
    pub fn ddx(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let h = self.hx;
        let c = self.idx(i, j);
        // (leg, value) toward each side; `None` past the domain edge.
        let west = if i == 0 {
            None
        } else if self.row_fluid(i - 1, j) {
            Some((h, v[c - 1]))
        } else {
            Some((self.x_leg(i, j, false), 0.0))
        };
        let east = if i == self.nx {
            None
        } else if self.row_fluid(i + 1, j) {
            Some((h, v[c + 1]))
        } else {
            Some((self.x_leg(i, j, true), 0.0))
        };
        let one_sided_east = |c: usize| {
            if i + 2 <= self.nx && self.row_fluid(i + 2, j) {
                Some((-3.0 * v[c] + 4.0 * v[c + 1] - v[c + 2]) / (2.0 * h))
            } else {
                None
            }
        };
        let one_sided_west = |c: usize| {
            if i >= 2 && self.row_fluid(i - 2, j) {
                Some((3.0 * v[c] - 4.0 * v[c - 1] + v[c - 2]) / (2.0 * h))
            } else {
                None
            }
        };
        match (west, east) {
            (Some((a, vw)), Some((b, ve))) => {
                // Guard against a cut leg in the denominator: a node
                // laterally squeezed against the wall uses the conditioned
                // one-sided stencil into the fluid when one is available.
                if a < 0.5 * h && self.row_fluid(i + 1, j) {
                    if let Some(d) = one_sided_east(c) {
                        return d;
                    }
                }
                if b < 0.5 * h && self.row_fluid(i - 1, j) {
                    if let Some(d) = one_sided_west(c) {
                        return d;
                    }
                }
                (a * a * ve - b * b * vw + (b * b - a * a) * v[c]) / (a * b * (a + b))
            }
            (None, Some((b, ve))) => {
                if self.row_fluid(i + 1, j) {
                    one_sided_east(c).unwrap_or((ve - v[c]) / b)
                } else {
                    (ve - v[c]) / b
                }
            }
            (Some((a, vw)), None) => {
                if self.row_fluid(i - 1, j) {
                    one_sided_west(c).unwrap_or((v[c] - vw) / a)
                } else {
                    (v[c] - vw) / a
                }
            }
            (None, None) => 0.0,
        }
    }

    /// d/dr of a nodal field at `(i, j)`; same stencil policy as
    /// [`Self::ddx`], but cut-aware: legs that touch a snapped obstacle
    /// boundary node use its true radius, so the three-point formulas are
    /// the nonuniform ones (still exact on radial quadratics).
    pub fn ddr(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let w = self.nx + 1;
        let down = j > 0 && self.is_fluid(i, j - 1);
        let up = j < self.nr && self.is_fluid(i, j + 1);
        let c = self.idx(i, j);
        let rc = self.r_node(i, j);
        match (down, up) {
            (true, true) => {
                let a = rc - self.r_node(i, j - 1);
                let b = self.r_node(i, j + 1) - rc;
                // A node squeezed close above the snapped floor would put
                // the leg `a` in the denominator, amplifying any error in
                // the nodal values by `1/a`; fall back to the one-sided
                // upward stencil, which is consistent and conditioned.
                if a < 0.5 * self.hr && j + 2 <= self.nr && self.is_fluid(i, j + 2) {
                    let b2 = self.r_node(i, j + 2) - rc;
                    return ((v[c + w] - v[c]) * b2 * b2
                        - (v[c + 2 * w] - v[c]) * b * b)
                        / (b * b2 * (b2 - b));
                }
                (a * a * v[c + w] - b * b * v[c - w] + (b * b - a * a) * v[c])
                    / (a * b * (a + b))
            }
            (false, true) => {
                let b1 = self.r_node(i, j + 1) - rc;
                // Same guard as above: a squeezed first row would sit in
                // the denominator, so step over it when farther rows exist.
                if b1 < 0.5 * self.hr && j + 3 <= self.nr && self.is_fluid(i, j + 3) {
                    let b2 = self.r_node(i, j + 2) - rc;
                    let b3 = self.r_node(i, j + 3) - rc;
                    return ((v[c + 2 * w] - v[c]) * b3 * b3
                        - (v[c + 3 * w] - v[c]) * b2 * b2)
                        / (b2 * b3 * (b3 - b2));
                }
                if j + 2 <= self.nr && self.is_fluid(i, j + 2) {
                    let b2 = self.r_node(i, j + 2) - rc;
                    ((v[c + w] - v[c]) * b2 * b2 - (v[c + 2 * w] - v[c]) * b1 * b1)
                        / (b1 * b2 * (b2 - b1))
                } else {
                    (v[c + w] - v[c]) / b1
                }
            }
            (true, false) => {
                let a1 = rc - self.r_node(i, j - 1);
                if j >= 2 && self.is_fluid(i, j - 2) {
                    let a2 = rc - self.r_node(i, j - 2);
                    ((v[c] - v[c - w]) * a2 * a2 - (v[c] - v[c - 2 * w]) * a1 * a1)
                        / (a1 * a2 * (a2 - a1))
                } else {
                    (v[c] - v[c - w]) / a1
                }
            }
            (false, false) => 0.0,
        }
    }

    /// Quadratic coefficient `a` of the column's near-floor model
    ///
    /// ```text
    /// psi ≈ a * ((r + k)^2 - (r0 + k)^2) ,
    /// ```
    ///
    /// least-squares fitted over the first two fluid rows above the
    /// column's Dirichlet floor node (radius `r0`: `0` on the axis,
    /// `f(x_i)` at a snapped obstacle-boundary node). The model is the
    /// local shape of any stream function with a bounded velocity ratio
    /// that vanishes at the floor, so `2a` is the floor limit of
    /// `d_r psi / (r + k)` — it drives the floor momentum density
    /// `M = (2a)^2` and the floor velocity `u = 2a/rho`, both exact when
    /// `psi` is of the model form. Unlike a difference quotient divided by
    /// `r0 + k`, the fit stays conditioned as `r0 + k -> 0`, because the
    /// basis values are bounded below by `hr * (2 r0 + hr)`.
    pub fn boundary_quadratic_coeff(&self, v: &[f64], i: usize, k: f64) -> f64 {
        let w = self.nx + 1;
        let j0 = self.first_fluid[i];
        let c = self.idx(i, j0);
        let r0k = self.r_node(i, j0) + k;
        let t1 = self.rs[j0 + 1] + k;
        let t2 = self.rs[j0 + 2] + k;
        let phi1 = t1 * t1 - r0k * r0k;
        let phi2 = t2 * t2 - r0k * r0k;
        let (p1, p2) = (v[c + w], v[c + 2 * w]);
        // Minimise (a phi1 - p1)^2 + (a phi2 - p2)^2.
        (p1 * phi1 + p2 * phi2) / (phi1 * phi1 + phi2 * phi2)
    }

    /// Writes the header + node-class raster (top row first) used for grid
    /// inspection dumps.
    pub fn write_raster<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "# X={} L={} nx={} nr={} J={}",
            self.x_half,
            self.l,
            self.nx,
            self.nr,
            self.obstacle.max_height()
        )?;
        for j in (0..=self.nr).rev() {
            let mut line = String::with_capacity(self.nx + 1);
            for i in 0..=self.nx {
                line.push(self.class(i, j).tag());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Dirichlet values for the inflow/outflow sides of the `k`-regularised
/// problem:
///
/// ```text
/// s_k(r) = m_L * I_k(r) / I_k(L),   I_k(r) = ∫_0^r (s + k) u_L(s) ds .
/// ```
///
/// At `k = 0` this is exactly the truncated upstream stream function
/// `psi_bar_L`. Returns one value per grid row; `0` at the axis and `m_L`
/// at the lid exactly.
pub fn side_boundary_values(
    trunc: &TruncatedProfile,
    grid: &DomainGrid,
    k: f64,
) -> Result<Vec<f64>> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::Hypothesis(format!(
            "regularisation offset k must be nonnegative, got {k}"
        )));
    }
    let nr = grid.nr;
    let (_, u_max) = trunc.u_range();
    let tol = 1e-13 * (u_max * (grid.l + k) * grid.l + 1.0) / nr as f64;
    let mut cumulative = Vec::with_capacity(nr + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for j in 0..nr {
        acc += integrate(
            |s| (s + k) * trunc.u(s),
            grid.rs[j],
            grid.rs[j + 1],
            tol,
        );
        cumulative.push(acc);
    }
    let total = acc;
    let m_l = trunc.m_l();
    Ok(cumulative
        .into_iter()
        .map(|v| m_l * (v / total))
        .collect())
}
