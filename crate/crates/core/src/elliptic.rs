//! Elliptic problems on the fixed reference strip.
//!
//! The map `(x', y') ↦ (x', y' ρ(x'))` pulls the tumor region back to
//! `Ω = 𝕊 × (0, 1)`. There the Laplacian becomes the operator `𝒜(ρ)`; in
//! divergence form
//!
//! ```text
//! ρ 𝒜(ρ) v = ∂x' F1 + ∂y' F2,
//! F1 = ρ v_x' - y' ρ_x' v_y',
//! F2 = -y' ρ_x' v_x' + (1 + y'² ρ_x'²) / ρ · v_y',
//! ```
//!
//! and the boundary operator is `ℬ(ρ) v = F2 |_{y' = 1}`, the normal
//! derivative along the non-normalized normal `(-ρ_x, 1)`.
//!
//! `x'` is discretized spectrally and `y'` by a vertex-centred finite-volume
//! scheme: `F2` lives on the half levels, `F1` on the nodes, and the row of
//! node `m` is the flux balance of its dual cell. The substrate row uses a
//! half cell with zero flux through `y' = 0`, which is the Neumann
//! condition. Because the scheme is conservative, the discrete boundary flux
//! obtained from the top half cell integrates exactly to the trapezoidal
//! integral of the source, the discrete form of the volume law.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, Dyn, LU};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::StripField;
use crate::fourier::{BoundaryProfile, DerivativeOrder, SpectralOps};
use crate::grid::{PeriodicGrid, VerticalGrid};
use crate::krylov::{gmres, GmresSettings};
use crate::tridiag::TridiagonalLu;

/// Profiles with `min ρ` below this fraction of the mean are rejected.
pub const PINCH_OFF_RATIO: f64 = 1e-6;

/// Linear solver used by [`TransformedOperator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    /// Block-tridiagonal LU of the assembled system, factored once per
    /// problem and reused for every right-hand side.
    Direct,
    /// Matrix-free GMRES preconditioned by the exact inverse of the operator
    /// of the flat profile at the mean height. Falls back to `Direct` if it
    /// does not converge.
    #[default]
    Krylov,
}

/// Grid data shared by every operator on the same strip.
pub struct Discretization {
    grid_x: PeriodicGrid,
    grid_y: Arc<VerticalGrid>,
    spectral: SpectralOps,
    d1: DMatrix<f64>,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("nx", &self.grid_x.nx())
            .field("ny", &self.grid_y.ny())
            .field("stretch", &self.grid_y.stretch())
            .finish()
    }
}

impl Discretization {
    pub fn new(grid_x: PeriodicGrid, grid_y: VerticalGrid) -> Arc<Self> {
        let spectral = SpectralOps::new(grid_x);
        let d1 = spectral.matrix(DerivativeOrder::First);
        Arc::new(Self {
            grid_x,
            grid_y: Arc::new(grid_y),
            spectral,
            d1,
        })
    }

    pub fn grid_x(&self) -> PeriodicGrid {
        self.grid_x
    }

    pub fn grid_y(&self) -> &Arc<VerticalGrid> {
        &self.grid_y
    }

    pub fn spectral(&self) -> &SpectralOps {
        &self.spectral
    }

    pub fn zeros(&self) -> StripField {
        StripField::zeros(self.grid_x, self.grid_y.clone())
    }

    pub fn field_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> StripField {
        StripField::from_fn(self.grid_x, self.grid_y.clone(), f)
    }

    /// `D1 · V` for the `levels` consecutive levels stored in `v`.
    fn dx_levels(&self, v: &[f64]) -> DMatrix<f64> {
        let nx = self.grid_x.nx();
        let levels = v.len() / nx;
        &self.d1 * DMatrix::from_column_slice(nx, levels, v)
    }
}

/// `κ = -ρ_xx (1 + ρ_x²)^{-3/2}`, positive where the surface is convex
/// towards the outward normal (a crest of the profile).
pub fn curvature(profile: &BoundaryProfile) -> Vec<f64> {
    let ops = SpectralOps::new(profile.grid());
    curvature_with(&ops, profile.values())
}

fn curvature_with(ops: &SpectralOps, rho: &[f64]) -> Vec<f64> {
    let rx = ops.derivative(rho, DerivativeOrder::First);
    let rxx = ops.derivative(rho, DerivativeOrder::Second);
    rx.iter()
        .zip(&rxx)
        .map(|(d, dd)| -dd * (1.0 + d * d).powf(-1.5))
        .collect()
}

/// Which boundary-value problem a solve refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Problem {
    /// `(𝒜 - 1) τ = 0`, Dirichlet data on both boundaries.
    Nutrient,
    /// `𝒜 q = f`, zero normal derivative at `y' = 0`, Dirichlet at `y' = 1`.
    Pressure,
}

impl Problem {
    fn first_active(self) -> usize {
        match self {
            Problem::Nutrient => 1,
            Problem::Pressure => 0,
        }
    }

    fn shift(self) -> f64 {
        match self {
            Problem::Nutrient => -1.0,
            Problem::Pressure => 0.0,
        }
    }

    fn index(self) -> usize {
        match self {
            Problem::Nutrient => 0,
            Problem::Pressure => 1,
        }
    }
}

/// Discretization of `𝒜(ρ)` and `ℬ(ρ)` for one boundary profile.
///
/// Factorizations and preconditioners are built on first use and cached;
/// the operator is immutable afterwards and can serve concurrent solves.
pub struct TransformedOperator {
    disc: Arc<Discretization>,
    profile: BoundaryProfile,
    solver: SolverKind,
    rho_x: Vec<f64>,
    rho_xx: Vec<f64>,
    inv_rho: Vec<f64>,
    /// `-y'_{m+½} ρ_x / 2`, multiplies `D1 (v_m + v_{m+1})`.
    half_mixed: Vec<Vec<f64>>,
    /// `(1 + y'²_{m+½} ρ_x²) / (ρ Δ_m)`, multiplies `v_{m+1} - v_m`.
    half_normal: Vec<Vec<f64>>,
    /// `-y'_m ρ_x`, multiplies the three-point estimate of `v_y'` in `F1`.
    node_mixed: Vec<Vec<f64>>,
    direct: [OnceLock<std::result::Result<BlockLu, Error>>; 2],
    flat: [OnceLock<std::result::Result<FlatPreconditioner, Error>>; 2],
}

impl std::fmt::Debug for TransformedOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TransformedOperator")
            .field("disc", &self.disc)
            .field("solver", &self.solver)
            .finish()
    }
}

impl TransformedOperator {
    pub fn new(disc: &Arc<Discretization>, profile: &BoundaryProfile) -> Result<Self> {
        Self::with_solver(disc, profile, SolverKind::default())
    }

    pub fn with_solver(disc: &Arc<Discretization>, profile: &BoundaryProfile, solver: SolverKind) -> Result<Self> {
        if profile.grid() != disc.grid_x {
            return Err(Error::GridMismatch(format!(
                "profile has nx = {}, strip has nx = {}",
                profile.grid().nx(),
                disc.grid_x.nx()
            )));
        }
        let (min, mean) = (profile.min(), profile.mean());
        if min < PINCH_OFF_RATIO * mean {
            return Err(Error::PinchOff { min, mean });
        }
        let rho = profile.values();
        let rho_x = disc.spectral.derivative(rho, DerivativeOrder::First);
        let rho_xx = disc.spectral.derivative(rho, DerivativeOrder::Second);
        let gy = &disc.grid_y;
        let ny = gy.ny();
        let half_mixed = (0..ny)
            .map(|m| rho_x.iter().map(|rx| -0.5 * gy.midpoint(m) * rx).collect())
            .collect();
        let half_normal = (0..ny)
            .map(|m| {
                let (yh, gap) = (gy.midpoint(m), gy.gap(m));
                rho.iter()
                    .zip(&rho_x)
                    .map(|(r, rx)| (1.0 + yh * yh * rx * rx) / (r * gap))
                    .collect()
            })
            .collect();
        let node_mixed = (0..=ny)
            .map(|m| rho_x.iter().map(|rx| -gy.y(m) * rx).collect())
            .collect();
        Ok(Self {
            disc: disc.clone(),
            profile: profile.clone(),
            solver,
            inv_rho: rho.iter().map(|r| 1.0 / r).collect(),
            rho_x,
            rho_xx,
            half_mixed,
            half_normal,
            node_mixed,
            direct: [OnceLock::new(), OnceLock::new()],
            flat: [OnceLock::new(), OnceLock::new()],
        })
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn profile(&self) -> &BoundaryProfile {
        &self.profile
    }

    pub fn rho_x(&self) -> &[f64] {
        &self.rho_x
    }

    pub fn rho_xx(&self) -> &[f64] {
        &self.rho_xx
    }

    /// `κ` of the profile, the operator `𝒫(ρ)ρ`.
    pub fn curvature(&self) -> Vec<f64> {
        self.rho_x
            .iter()
            .zip(&self.rho_xx)
            .map(|(d, dd)| -dd * (1.0 + d * d).powf(-1.5))
            .collect()
    }

    fn nx(&self) -> usize {
        self.disc.grid_x.nx()
    }

    fn ny(&self) -> usize {
        self.disc.grid_y.ny()
    }

    /// Flux-balance rows `m = 0..ny` (exclusive) of `𝒜(ρ) v`, and the
    /// node fluxes needed for the top boundary.
    fn balance(&self, v: &[f64]) -> Balance {
        let (nx, ny) = (self.nx(), self.ny());
        let gy = &self.disc.grid_y;
        let rho = self.profile.values();
        let dv = self.disc.dx_levels(v);
        let lvl = |m: usize| &v[m * nx..(m + 1) * nx];

        let mut f2 = vec![0.0; nx * ny];
        for m in 0..ny {
            let (a, b) = (&self.half_mixed[m], &self.half_normal[m]);
            let (d0, d1) = (dv.column(m), dv.column(m + 1));
            let (v0, v1) = (lvl(m), lvl(m + 1));
            for j in 0..nx {
                f2[m * nx + j] = a[j] * (d0[j] + d1[j]) + b[j] * (v1[j] - v0[j]);
            }
        }

        let mut f1 = vec![0.0; nx * (ny + 1)];
        for m in 0..=ny {
            let col = dv.column(m);
            let out = &mut f1[m * nx..(m + 1) * nx];
            for j in 0..nx {
                out[j] = rho[j] * col[j];
            }
            if m > 0 {
                let e = &self.node_mixed[m];
                for (l, w) in gy.first_derivative_stencil(m) {
                    let vl = lvl(l);
                    for j in 0..nx {
                        out[j] += e[j] * w * vl[j];
                    }
                }
            }
        }
        let df1 = self.disc.dx_levels(&f1);

        let mut rows = vec![0.0; nx * ny];
        for m in 0..ny {
            let w = gy.cell_width(m);
            let col = df1.column(m);
            for j in 0..nx {
                let below = if m > 0 { f2[(m - 1) * nx + j] } else { 0.0 };
                rows[m * nx + j] = self.inv_rho[j] * (col[j] + (f2[m * nx + j] - below) / w);
            }
        }
        Balance { rows, f2, df1 }
    }

    /// `𝒜(ρ) v` at the interior levels `0 < m < ny`; the boundary levels of
    /// the result are zero.
    pub fn apply_a(&self, v: &StripField) -> Result<StripField> {
        v.same_grid(self.disc.grid_x, &self.disc.grid_y)?;
        let nx = self.nx();
        let bal = self.balance(v.values());
        let mut out = self.disc.zeros();
        for m in 1..self.ny() {
            out.level_mut(m).copy_from_slice(&bal.rows[m * nx..(m + 1) * nx]);
        }
        Ok(out)
    }

    /// The boundary functional `ℬ(ρ)` on `y' = 1`.
    pub fn boundary(&self) -> BoundaryFunctional<'_> {
        BoundaryFunctional { op: self }
    }

    /// Solution of `𝒜(ρ) τ = τ` with `τ = sigma_bar_1` on `y' = 0` and
    /// `τ = sigma_bar_2` on `y' = 1`.
    pub fn solve_r(&self, sigma_bar_1: f64, sigma_bar_2: f64) -> Result<StripField> {
        let mut fixed = self.disc.zeros();
        fixed.level_mut(0).fill(sigma_bar_1);
        fixed.level_mut(self.ny()).fill(sigma_bar_2);
        let rhs = vec![0.0; self.nx() * (self.ny() + 1)];
        self.solve(Problem::Nutrient, &rhs, fixed)
    }

    /// Solution of `𝒜(ρ) q = f` with `q_y' = 0` on `y' = 0` and `q = k_bc`
    /// on `y' = 1`, i.e. `𝒮(ρ) f + 𝒯(ρ) k_bc`. Values of `f` on the top
    /// level are not used.
    pub fn solve_st(&self, f: &StripField, k_bc: &[f64]) -> Result<StripField> {
        f.same_grid(self.disc.grid_x, &self.disc.grid_y)?;
        if k_bc.len() != self.nx() {
            return Err(Error::GridMismatch(format!(
                "{} boundary values for nx = {}",
                k_bc.len(),
                self.nx()
            )));
        }
        let mut fixed = self.disc.zeros();
        fixed.level_mut(self.ny()).copy_from_slice(k_bc);
        self.solve(Problem::Pressure, f.values(), fixed)
    }

    /// `∬ v ρ dy' dx'` over one period: trapezoidal in `y'`, exact for
    /// trigonometric polynomials in `x'`. This is the integral of `v` over
    /// the physical domain.
    pub fn integrate_physical(&self, v: &StripField) -> f64 {
        let gy = &self.disc.grid_y;
        let rho = self.profile.values();
        let dx = self.disc.grid_x.spacing();
        (0..=gy.ny())
            .map(|m| gy.cell_width(m) * v.level(m).iter().zip(rho).map(|(a, r)| a * r).sum::<f64>())
            .sum::<f64>()
            * dx
    }

    fn solve(&self, problem: Problem, rhs: &[f64], mut fixed: StripField) -> Result<StripField> {
        let (nx, ny) = (self.nx(), self.ny());
        let first = problem.first_active();
        let bal = self.balance(fixed.values());
        let b: Vec<f64> = (first * nx..ny * nx).map(|i| rhs[i] - bal.rows[i]).collect();
        let mut delta = vec![0.0; b.len()];
        match self.solver {
            SolverKind::Direct => self.solve_direct(problem, &b, &mut delta)?,
            SolverKind::Krylov => {
                if !self.solve_krylov(problem, &b, &mut delta)? {
                    delta.fill(0.0);
                    self.solve_direct(problem, &b, &mut delta)?;
                }
            }
        }
        let vals = fixed.values_mut();
        for (i, d) in delta.iter().enumerate() {
            vals[first * nx + i] += d;
        }
        Ok(fixed)
    }

    /// The operator restricted to the active levels of `problem`.
    fn apply_active(&self, problem: Problem, delta: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.nx(), self.ny());
        let first = problem.first_active();
        let mut full = vec![0.0; nx * (ny + 1)];
        full[first * nx..ny * nx].copy_from_slice(delta);
        let bal = self.balance(&full);
        let shift = problem.shift();
        for (i, o) in out.iter_mut().enumerate() {
            *o = bal.rows[first * nx + i] + shift * delta[i];
        }
    }

    fn solve_direct(&self, problem: Problem, b: &[f64], x: &mut [f64]) -> Result<()> {
        let lu = self.direct[problem.index()]
            .get_or_init(|| BlockLu::factor(self.assemble(problem)))
            .as_ref()
            .map_err(|e| e.clone())?;
        x.copy_from_slice(b);
        lu.solve_in_place(x)
    }

    fn solve_krylov(&self, problem: Problem, b: &[f64], x: &mut [f64]) -> Result<bool> {
        let pre = self.flat[problem.index()]
            .get_or_init(|| FlatPreconditioner::new(&self.disc, self.profile.mean(), problem))
            .as_ref()
            .map_err(|e| e.clone())?;
        let settings = GmresSettings {
            tol: 1e-12,
            restart: 40,
            max_iter: 400,
        };
        let result = gmres(
            |v, out| self.apply_active(problem, v, out),
            |r, z| pre.apply(r, z),
            b,
            x,
            &settings,
        );
        Ok(result.is_some())
    }

    /// Dense blocks of the active rows: `(lower, diagonal, upper)` couplings
    /// of each active level to its neighbours.
    fn assemble(&self, problem: Problem) -> Vec<[Option<DMatrix<f64>>; 3]> {
        let (nx, ny) = (self.nx(), self.ny());
        let gy = &self.disc.grid_y;
        let rho = self.profile.values();
        let d1 = &self.disc.d1;
        let first = problem.first_active();

        // D1 diag(ρ) D1
        let mut scaled = d1.clone();
        for i in 0..nx {
            scaled.row_mut(i).scale_mut(rho[i]);
        }
        let dd = d1 * scaled;
        let diag_d1 = |coef: &[f64]| {
            let mut m = d1.clone();
            for i in 0..nx {
                m.row_mut(i).scale_mut(coef[i]);
            }
            m
        };

        (first..ny)
            .map(|r| {
                let mut blocks: [DMatrix<f64>; 3] = [
                    DMatrix::zeros(nx, nx),
                    DMatrix::zeros(nx, nx),
                    DMatrix::zeros(nx, nx),
                ];
                let slot = |level: usize| level + 1 - r;
                blocks[1] += &dd;
                if r > 0 {
                    let e = &self.node_mixed[r];
                    for (l, w) in gy.first_derivative_stencil(r) {
                        let mut m = d1.clone();
                        for j in 0..nx {
                            m.column_mut(j).scale_mut(w * e[j]);
                        }
                        blocks[slot(l)] += m;
                    }
                }
                let w = gy.cell_width(r);
                let up_mixed = diag_d1(&self.half_mixed[r]) / w;
                let up_normal = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.half_normal[r])) / w;
                blocks[1] += &up_mixed - &up_normal;
                blocks[2] += &up_mixed + &up_normal;
                if r > 0 {
                    let lo_mixed = diag_d1(&self.half_mixed[r - 1]) / w;
                    let lo_normal =
                        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.half_normal[r - 1])) / w;
                    blocks[0] -= &lo_mixed - &lo_normal;
                    blocks[1] -= &lo_mixed + &lo_normal;
                }
                for b in blocks.iter_mut() {
                    for i in 0..nx {
                        b.row_mut(i).scale_mut(self.inv_rho[i]);
                    }
                }
                for i in 0..nx {
                    blocks[1][(i, i)] += problem.shift();
                }
                let [lower, diag, upper] = blocks;
                [
                    (r > first).then_some(lower),
                    Some(diag),
                    (r + 1 < ny).then_some(upper),
                ]
            })
            .collect()
    }
}

struct Balance {
    /// Flux-balance rows for levels `0..ny`.
    rows: Vec<f64>,
    /// `F2` on the half levels `m + ½`, `m = 0..ny`.
    f2: Vec<f64>,
    /// `D1 F1` on the levels `0..=ny`.
    df1: DMatrix<f64>,
}

/// Evaluation of `ℬ(ρ)` on `y' = 1`.
pub struct BoundaryFunctional<'a> {
    op: &'a TransformedOperator,
}

impl BoundaryFunctional<'_> {
    /// `-ρ_x v_x + (1 + ρ_x²)/ρ · v_y` at `y' = 1`, with a one-sided
    /// second-order `v_y`.
    pub fn apply(&self, v: &StripField) -> Result<Vec<f64>> {
        let op = self.op;
        v.same_grid(op.disc.grid_x, &op.disc.grid_y)?;
        let ny = op.ny();
        let dv = op.disc.spectral.derivative(v.level(ny), DerivativeOrder::First);
        let mut vy = vec![0.0; op.nx()];
        for (l, w) in op.disc.grid_y.first_derivative_stencil(ny) {
            vy.iter_mut().zip(v.level(l)).for_each(|(a, b)| *a += w * b);
        }
        let rho = op.profile.values();
        Ok((0..op.nx())
            .map(|j| {
                let rx = op.rho_x[j];
                -rx * dv[j] + (1.0 + rx * rx) / rho[j] * vy[j]
            })
            .collect())
    }

    /// `ℬ(ρ) q` for a solution of `𝒜(ρ) q = f`, taken from the flux
    /// balance of the top half cell:
    /// `F2(1) = F2_{ny-½} + W_ny (ρ f_ny - ∂x' F1_ny)`.
    ///
    /// Summed over `x'`, these fluxes equal the trapezoidal integral of
    /// `ρ f` exactly, whatever the profile.
    pub fn conservative(&self, q: &StripField, f: &StripField) -> Result<Vec<f64>> {
        let op = self.op;
        q.same_grid(op.disc.grid_x, &op.disc.grid_y)?;
        f.same_grid(op.disc.grid_x, &op.disc.grid_y)?;
        let (nx, ny) = (op.nx(), op.ny());
        let bal = op.balance(q.values());
        let w = op.disc.grid_y.cell_width(ny);
        let rho = op.profile.values();
        let top_f = f.level(ny);
        let df1 = bal.df1.column(ny);
        Ok((0..nx)
            .map(|j| bal.f2[(ny - 1) * nx + j] + w * (rho[j] * top_f[j] - df1[j]))
            .collect())
    }
}

/// Block-tridiagonal LU without inter-block pivoting.
struct BlockLu {
    lus: Vec<LU<f64, Dyn, Dyn>>,
    /// `D'_i^{-1} U_i`.
    coupling: Vec<Option<DMatrix<f64>>>,
    lower: Vec<Option<DMatrix<f64>>>,
    nx: usize,
}

impl BlockLu {
    fn factor(blocks: Vec<[Option<DMatrix<f64>>; 3]>) -> std::result::Result<Self, Error> {
        let n = blocks.len();
        let nx = blocks[0][1].as_ref().map_or(0, |d| d.nrows());
        let mut lus = Vec::with_capacity(n);
        let mut coupling: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n);
        for (i, [lo, diag, up]) in blocks.into_iter().enumerate() {
            let mut d = diag.expect("every active row has a diagonal block");
            if let (Some(l), Some(Some(g))) = (&lo, i.checked_sub(1).map(|p| &coupling[p])) {
                d -= l * g;
            }
            let lu = d.lu();
            if !lu.is_invertible() {
                return Err(Error::SingularSystem(format!("diagonal block {i} is singular")));
            }
            let g = match up {
                Some(u) => Some(
                    lu.solve(&u)
                        .ok_or_else(|| Error::SingularSystem(format!("block {i}")))?,
                ),
                None => None,
            };
            lus.push(lu);
            coupling.push(g);
            lower.push(lo);
        }
        Ok(Self {
            lus,
            coupling,
            lower,
            nx,
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        let nx = self.nx;
        let n = self.lus.len();
        let mut prev: Option<nalgebra::DVector<f64>> = None;
        let mut ys = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = nalgebra::DVector::from_column_slice(&x[i * nx..(i + 1) * nx]);
            if let (Some(l), Some(p)) = (&self.lower[i], &prev) {
                r -= l * p;
            }
            let y = self.lus[i]
                .solve(&r)
                .ok_or_else(|| Error::SingularSystem(format!("block {i}")))?;
            prev = Some(y.clone());
            ys.push(y);
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                if let Some(g) = &self.coupling[i] {
                    let next = ys[i + 1].clone();
                    ys[i] -= g * next;
                }
            }
            x[i * nx..(i + 1) * nx].copy_from_slice(ys[i].as_slice());
        }
        Ok(())
    }
}

/// Inverse of the operator of the flat profile at height `ρ̄`: in Fourier
/// space it decouples into one tridiagonal system in `y'` per wavenumber.
struct FlatPreconditioner {
    spectral: SpectralOps,
    /// Factorizations indexed by `|k|`, `k = 0..=nx/2`.
    lus: Vec<TridiagonalLu>,
    levels: usize,
}

impl FlatPreconditioner {
    fn new(disc: &Discretization, height: f64, problem: Problem) -> std::result::Result<Self, Error> {
        let nx = disc.grid_x.nx();
        let gy = &disc.grid_y;
        let ny = gy.ny();
        let first = problem.first_active();
        let levels = ny - first;
        let c = 1.0 / (height * height);
        let lus = (0..=nx / 2)
            .map(|k| {
                // The symbol of D1·D1: the first derivative drops the Nyquist mode.
                let symbol = if k == nx / 2 { 0.0 } else { -((k * k) as f64) };
                let mut lower = vec![0.0; levels];
                let mut diag = vec![0.0; levels];
                let mut upper = vec![0.0; levels];
                for i in 0..levels {
                    let r = first + i;
                    let w = gy.cell_width(r);
                    let up = c / (gy.gap(r) * w);
                    let down = if r > 0 { c / (gy.gap(r - 1) * w) } else { 0.0 };
                    diag[i] = symbol + problem.shift() - up - down;
                    upper[i] = up;
                    lower[i] = down;
                }
                TridiagonalLu::new(lower, diag, upper)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spectral: disc.spectral.clone(),
            lus,
            levels,
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let nx = self.spectral.grid().nx();
        let n = self.levels;
        debug_assert_eq!(self.lus[0].len(), n);
        let spectra: Vec<Vec<Complex64>> = (0..n).map(|i| self.spectral.forward(&r[i * nx..(i + 1) * nx])).collect();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); nx]; n];
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for bin in 0..nx {
            let lu = &self.lus[bin.min(nx - bin)];
            for i in 0..n {
                re[i] = spectra[i][bin].re;
                im[i] = spectra[i][bin].im;
            }
            lu.solve_in_place(&mut re);
            lu.solve_in_place(&mut im);
            for i in 0..n {
                out[i][bin] = Complex64::new(re[i], im[i]);
            }
        }
        for (i, c) in out.into_iter().enumerate() {
            z[i * nx..(i + 1) * nx].copy_from_slice(&self.spectral.inverse(c));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(nx: usize, ny: usize, stretch: f64) -> Arc<Discretization> {
        Discretization::new(PeriodicGrid::new(nx).unwrap(), VerticalGrid::new(ny, stretch).unwrap())
    }

    fn wavy(d: &Discretization) -> BoundaryProfile {
        BoundaryProfile::from_fn(d.grid_x(), |x| 2.0 + 0.3 * x.sin() + 0.1 * (2.0 * x).cos()).unwrap()
    }

    #[test]
    fn assembled_blocks_match_matrix_free_rows() {
        let d = disc(16, 12, 0.5);
        let op = TransformedOperator::new(&d, &wavy(&d)).unwrap();
        for problem in [Problem::Nutrient, Problem::Pressure] {
            let first = problem.first_active();
            let n = (12 - first) * 16;
            let delta: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5).collect();
            let mut free = vec![0.0; n];
            op.apply_active(problem, &delta, &mut free);
            let blocks = op.assemble(problem);
            for (i, row) in blocks.iter().enumerate() {
                let mut acc = nalgebra::DVector::zeros(16);
                for (s, b) in row.iter().enumerate() {
                    if let Some(b) = b {
                        let lvl = i + s - 1;
                        acc += b * nalgebra::DVector::from_column_slice(&delta[lvl * 16..(lvl + 1) * 16]);
                    }
                }
                for j in 0..16 {
                    assert!((acc[j] - free[i * 16 + j]).abs() < 1e-10, "{problem:?} row {i}");
                }
            }
        }
    }

    #[test]
    fn direct_and_krylov_agree() {
        let d = disc(16, 16, 0.5);
        let p = wavy(&d);
        let direct = TransformedOperator::with_solver(&d, &p, SolverKind::Direct).unwrap();
        let krylov = TransformedOperator::with_solver(&d, &p, SolverKind::Krylov).unwrap();
        let a = direct.solve_r(2.0, 3.0).unwrap();
        let b = krylov.solve_r(2.0, 3.0).unwrap();
        assert!(a.max_diff(&b) < 1e-10);
        let f = d.field_from_fn(|x, y| x.cos() * y);
        let k: Vec<f64> = d.grid_x().nodes().iter().map(|x| (2.0 * x).sin()).collect();
        let a = direct.solve_st(&f, &k).unwrap();
        let b = krylov.solve_st(&f, &k).unwrap();
        assert!(a.max_diff(&b) < 1e-10);
    }

    #[test]
    fn pinch_off_is_rejected() {
        let d = disc(16, 8, 0.0);
        let p = BoundaryProfile::from_fn(d.grid_x(), |x| if x == 0.0 { 1e-9 } else { 1.0 }).unwrap();
        assert!(matches!(TransformedOperator::new(&d, &p), Err(Error::PinchOff { .. })));
    }
}
