//! Penalized score matching on a grid.
//!
//! The log-marginal is parameterized by its values at the grid nodes.
//! Second-order difference stencils realize s = l' and s' = l'' as linear
//! maps of the node values, so the empirical objective
//!
//!   (1/n) sum_i [ s(y_i)^2 + 2 s'(y_i) ]  +  rho * int (l'')^2 dy
//!
//! is a convex quadratic, optionally under the linear constraints
//! 1 + l''(g_j) >= 0 at every node (convexity of y^2/2 + l). The
//! constrained curvature is the one the returned grid model actually
//! evaluates: the C^2 interpolating spline's node curvatures, which are a
//! (tridiagonal-solve) linear map of the node values. Between nodes the
//! spline curvature interpolates linearly, so node feasibility is global
//! feasibility. The affine part of l is invisible to the objective, so it
//! is pinned by fixing the two endpoint values to a kernel density
//! estimate's log density there.

use nalgebra::{DMatrix, DVector};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus,
};

use crate::data::ObservationSet;
use crate::error::{Error, Result};
use crate::fit::kde::fit_kde;
use crate::fit::FitReport;
use crate::grid::EvaluationGrid;
use crate::model::{LogMarginalModel, ModelSource};

/// Configuration for [`fit_scorematch`].
#[derive(Debug, Clone, Copy)]
pub struct ScoreMatchConfig {
    pub grid: EvaluationGrid,
    /// Smoothness penalty weight rho >= 0.
    pub rho: f64,
    /// Enforce 1 + l''(g_j) >= 0 at every node.
    pub enforce_convexity: bool,
    /// KKT residual tolerance for declaring convergence.
    pub kkt_tol: f64,
}

impl ScoreMatchConfig {
    pub fn new(grid: EvaluationGrid) -> Self {
        Self { grid, rho: 1e-2, enforce_convexity: false, kkt_tol: 1e-6 }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_convexity(mut self, on: bool) -> Self {
        self.enforce_convexity = on;
        self
    }
}

/// Sparse stencil row: (node index, coefficient) pairs.
type Stencil = Vec<(usize, f64)>;

/// Second-order first-derivative stencils at every node (one-sided at the
/// ends).
fn d1_stencils(m: usize, h: f64) -> Vec<Stencil> {
    let mut rows = Vec::with_capacity(m);
    rows.push(vec![(0, -1.5 / h), (1, 2.0 / h), (2, -0.5 / h)]);
    for j in 1..m - 1 {
        rows.push(vec![(j - 1, -0.5 / h), (j + 1, 0.5 / h)]);
    }
    rows.push(vec![
        (m - 3, 0.5 / h),
        (m - 2, -2.0 / h),
        (m - 1, 1.5 / h),
    ]);
    rows
}

/// Second-order second-derivative stencils at every node (one-sided at
/// the ends).
fn d2_stencils(m: usize, h: f64) -> Vec<Stencil> {
    let h2 = h * h;
    let mut rows = Vec::with_capacity(m);
    rows.push(vec![
        (0, 2.0 / h2),
        (1, -5.0 / h2),
        (2, 4.0 / h2),
        (3, -1.0 / h2),
    ]);
    for j in 1..m - 1 {
        rows.push(vec![(j - 1, 1.0 / h2), (j, -2.0 / h2), (j + 1, 1.0 / h2)]);
    }
    rows.push(vec![
        (m - 4, -1.0 / h2),
        (m - 3, 4.0 / h2),
        (m - 2, -5.0 / h2),
        (m - 1, 2.0 / h2),
    ]);
    rows
}

fn lerp_stencil(a: &Stencil, b: &Stencil, theta: f64) -> Stencil {
    let mut row = Vec::with_capacity(a.len() + b.len());
    for (j, v) in a {
        row.push((*j, (1.0 - theta) * v));
    }
    for (j, v) in b {
        match row.iter_mut().find(|(k, _)| k == j) {
            Some((_, acc)) => *acc += theta * v,
            None => row.push((*j, theta * v)),
        }
    }
    row
}

fn apply(stencil: &Stencil, x: &[f64]) -> f64 {
    stencil.iter().map(|(j, v)| v * x[*j]).sum()
}

/// Dense map from node values to the natural cubic spline's interior node
/// curvatures M_1..M_{m-2}: rows of 6/h^2 T^{-1} D with T = tridiag(1,4,1)
/// and D the interior second-difference matrix. This is exactly what
/// `CubicSpline::deriv2` returns at the nodes (M_0 = M_{m-1} = 0 under the
/// natural boundary).
fn spline_curvature_map(m: usize, h: f64) -> DMatrix<f64> {
    let k = m - 2;
    let mut rhs = DMatrix::zeros(k, m);
    let scale = 6.0 / (h * h);
    for j in 0..k {
        rhs[(j, j)] = scale;
        rhs[(j, j + 1)] = -2.0 * scale;
        rhs[(j, j + 2)] = scale;
    }
    // Thomas algorithm on T X = rhs.
    let mut diag = vec![4.0f64; k];
    for j in 1..k {
        let w = 1.0 / diag[j - 1];
        diag[j] -= w;
        for c in 0..m {
            let prev = rhs[(j - 1, c)];
            rhs[(j, c)] -= w * prev;
        }
    }
    for c in 0..m {
        rhs[(k - 1, c)] /= diag[k - 1];
    }
    for j in (0..k - 1).rev() {
        for c in 0..m {
            let below = rhs[(j + 1, c)];
            rhs[(j, c)] = (rhs[(j, c)] - below) / diag[j];
        }
    }
    rhs
}

struct Assembled {
    /// Full-node quadratic: J(l) = l^T M l + q^T l.
    m_mat: DMatrix<f64>,
    q: DVector<f64>,
    /// Per-observation score rows and their derivative rows.
    s_rows: Vec<Stencil>,
    t_rows: Vec<Stencil>,
    d2: Vec<Stencil>,
}

fn assemble(obs: &ObservationSet, config: &ScoreMatchConfig) -> Assembled {
    let grid = &config.grid;
    let m = grid.n_nodes();
    let h = grid.spacing();
    let n = obs.len() as f64;
    let d1 = d1_stencils(m, h);
    let d2 = d2_stencils(m, h);

    let mut m_mat = DMatrix::zeros(m, m);
    let mut q = DVector::zeros(m);
    let mut s_rows = Vec::with_capacity(obs.len());
    let mut t_rows = Vec::with_capacity(obs.len());
    for &y in obs.values() {
        let pos = (y - grid.lo()) / h;
        let k = (pos.floor() as usize).min(m - 2);
        let theta = pos - k as f64;
        let s = lerp_stencil(&d1[k], &d1[k + 1], theta);
        let t = lerp_stencil(&d2[k], &d2[k + 1], theta);
        for (a, va) in &s {
            for (b, vb) in &s {
                m_mat[(*a, *b)] += va * vb / n;
            }
        }
        for (j, v) in &t {
            q[*j] += 2.0 * v / n;
        }
        s_rows.push(s);
        t_rows.push(t);
    }
    // Trapezoid quadrature of the penalty rho * int (l'')^2.
    for (j, row) in d2.iter().enumerate() {
        let w = if j == 0 || j == m - 1 { 0.5 * h } else { h };
        for (a, va) in row {
            for (b, vb) in row {
                m_mat[(*a, *b)] += config.rho * w * va * vb;
            }
        }
    }
    Assembled { m_mat, q, s_rows, t_rows, d2 }
}

fn objective(asm: &Assembled, rho: f64, grid: &EvaluationGrid, l: &[f64]) -> f64 {
    let n = asm.s_rows.len() as f64;
    let data: f64 = asm
        .s_rows
        .iter()
        .zip(&asm.t_rows)
        .map(|(s, t)| {
            let sv = apply(s, l);
            sv * sv + 2.0 * apply(t, l)
        })
        .sum::<f64>()
        / n;
    let h = grid.spacing();
    let m = grid.n_nodes();
    let pen: f64 = asm
        .d2
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let w = if j == 0 || j == m - 1 { 0.5 * h } else { h };
            let v = apply(row, l);
            w * v * v
        })
        .sum();
    data + rho * pen
}

/// Unpenalized part of the objective; 1 + this is the model's SURE on the
/// fitting data.
fn data_objective(asm: &Assembled, l: &[f64]) -> f64 {
    let n = asm.s_rows.len() as f64;
    asm.s_rows
        .iter()
        .zip(&asm.t_rows)
        .map(|(s, t)| {
            let sv = apply(s, l);
            sv * sv + 2.0 * apply(t, l)
        })
        .sum::<f64>()
        / n
}

fn dense_to_csc_triu(p: &DMatrix<f64>) -> CscMatrix<f64> {
    let n = p.ncols();
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for c in 0..n {
        for r in 0..=c {
            let v = p[(r, c)];
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(p.nrows(), n, colptr, rowval, nzval)
}

fn dense_to_csc(g: &DMatrix<f64>) -> CscMatrix<f64> {
    let n = g.ncols();
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for c in 0..n {
        for r in 0..g.nrows() {
            let v = g[(r, c)];
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(g.nrows(), n, colptr, rowval, nzval)
}

/// KKT residual of min 1/2 x'Px + c'x st Gx <= hvec at (x, z):
/// max of scaled stationarity, primal feasibility and complementarity.
fn kkt_residual(
    p: &DMatrix<f64>,
    c: &DVector<f64>,
    g: Option<&DMatrix<f64>>,
    hvec: Option<&DVector<f64>>,
    x: &DVector<f64>,
    z: Option<&DVector<f64>>,
) -> f64 {
    let mut grad = p * x + c;
    if let (Some(g), Some(z)) = (g, z) {
        grad += g.transpose() * z;
    }
    let cscale = 1.0 + c.amax();
    let mut res: f64 = grad.amax() / cscale;
    if let (Some(g), Some(hvec), Some(z)) = (g, hvec, z) {
        let slack = hvec - g * x;
        let hscale = 1.0 + hvec.amax();
        for i in 0..slack.len() {
            res = res.max(-slack[i] / hscale); // primal violation
            res = res.max((z[i] * slack[i]).abs() / hscale); // complementarity
            res = res.max(-z[i]); // dual feasibility
        }
    }
    res
}

/// Fit the penalized score-matching log-marginal.
///
/// Infeasibility cannot happen: any sufficiently concave quadratic
/// satisfies the convexity constraints, so a stalled solver is reported
/// as non-converged rather than an error.
pub fn fit_scorematch(
    obs: &ObservationSet,
    config: &ScoreMatchConfig,
) -> Result<(LogMarginalModel, FitReport)> {
    if config.rho < 0.0 {
        return Err(Error::InvalidInput(format!("rho {} must be >= 0", config.rho)));
    }
    if obs.max() == obs.min() {
        return Err(Error::DegenerateRange);
    }
    let grid = &config.grid;
    for &y in obs.values() {
        if !grid.contains(y) {
            return Err(Error::DomainError { y, lo: grid.lo(), hi: grid.hi() });
        }
    }
    let m = grid.n_nodes();
    if m < 8 {
        return Err(Error::InvalidGrid("score matching needs >= 8 grid nodes".into()));
    }

    // Gauge: pin the endpoint values to a consistent estimator so the
    // renormalized density stays honest.
    let kde = fit_kde(obs, None)?;
    let v_lo = kde.eval(grid.lo(), 0)?;
    let v_hi = kde.eval(grid.hi(), 0)?;

    let asm = assemble(obs, config);

    // Reduce to the interior unknowns x: l = E x + f.
    let nin = m - 2;
    let mut f = DVector::zeros(m);
    f[0] = v_lo;
    f[m - 1] = v_hi;
    let mmat = &asm.m_mat;
    let mut p = DMatrix::zeros(nin, nin);
    for i in 0..nin {
        for j in 0..nin {
            p[(i, j)] = 2.0 * mmat[(i + 1, j + 1)];
        }
    }
    // Symmetrize against accumulation round-off.
    for i in 0..nin {
        for j in 0..i {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
    let full_c = 2.0 * (mmat * &f) + &asm.q;
    let c = DVector::from_fn(nin, |i, _| full_c[i + 1]);

    // Convexity constraints 1 + M_j >= 0 on the spline's node curvatures
    // (the endpoint curvatures are pinned to 0 by the natural boundary,
    // so they hold automatically). With l = E x + f this is
    // -(C E) x <= 1 + C f, one row per interior node.
    let (gmat, hvec) = if config.enforce_convexity {
        let cmap = spline_curvature_map(m, grid.spacing());
        let mut g = DMatrix::zeros(m - 2, nin);
        let mut hv = DVector::from_element(m - 2, 1.0);
        for r in 0..m - 2 {
            for j in 0..m {
                if j == 0 || j == m - 1 {
                    hv[r] += cmap[(r, j)] * f[j];
                } else {
                    g[(r, j - 1)] = -cmap[(r, j)];
                }
            }
        }
        (Some(g), Some(hv))
    } else {
        (None, None)
    };

    let (x, z, iterations, solver_ok) = match (&gmat, &hvec) {
        (Some(g), Some(hv)) => solve_constrained(&p, &c, g, hv)?,
        _ => {
            let x = solve_unconstrained(&p, &c)?;
            (x, None, 1, true)
        }
    };

    let residual = kkt_residual(&p, &c, gmat.as_ref(), hvec.as_ref(), &x, z.as_ref());

    let mut values = vec![0.0; m];
    values[0] = v_lo;
    values[m - 1] = v_hi;
    for i in 0..nin {
        values[i + 1] = x[i];
    }
    let obj = objective(&asm, config.rho, grid, &values);

    let model = LogMarginalModel::from_grid(*grid, values, ModelSource::ScoreMatch)?;
    let report = FitReport {
        iterations,
        final_objective: obj,
        converged: solver_ok && residual <= config.kkt_tol,
        constraint_violation: residual,
    };
    Ok((model, report))
}

fn solve_unconstrained(p: &DMatrix<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = p.clone().cholesky() {
        return Ok(ch.solve(&(-c)));
    }
    // Semidefinite (e.g. rho = 0 with untouched nodes): minimum-norm
    // stationary point via SVD.
    let svd = p.clone().svd(true, true);
    svd.solve(&(-c), 1e-10 * p.amax())
        .map_err(|e| Error::NumericalFailure {
            context: "score-matching linear solve".into(),
            detail: e.to_string(),
        })
}

type ConstrainedSolution = (DVector<f64>, Option<DVector<f64>>, usize, bool);

fn solve_constrained(
    p: &DMatrix<f64>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
) -> Result<ConstrainedSolution> {
    let p_csc = dense_to_csc_triu(p);
    let g_csc = dense_to_csc(g);
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(200)
        .tol_gap_abs(1e-10)
        .tol_gap_rel(1e-10)
        .tol_feas(1e-10)
        .build()
        .map_err(|e| Error::NumericalFailure {
            context: "qp settings".into(),
            detail: e.to_string(),
        })?;
    let cones = [NonnegativeConeT(hv.len())];
    let q: Vec<f64> = c.iter().cloned().collect();
    let b: Vec<f64> = hv.iter().cloned().collect();
    let mut solver = DefaultSolver::new(&p_csc, &q, &g_csc, &b, &cones, settings);
    solver.solve();
    let ok = matches!(
        solver.solution.status,
        SolverStatus::Solved | SolverStatus::AlmostSolved
    );
    let x = DVector::from_vec(solver.solution.x.clone());
    let z = DVector::from_vec(solver.solution.z.clone());
    let iters = solver.solution.iterations as usize;

    // Active-set polish: resolve the equality-constrained KKT system on
    // the near-active set to drive the residual toward machine precision.
    let (x, z) = polish(p, c, g, hv, x, z);
    Ok((x, Some(z), iters.max(1), ok))
}

fn polish(
    p: &DMatrix<f64>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
    x0: DVector<f64>,
    z0: DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let slack = hv - g * &x0;
    let hscale = 1.0 + hv.amax();
    let active: Vec<usize> = (0..slack.len())
        .filter(|&i| slack[i] <= 1e-7 * hscale || z0[i] > 1e-7)
        .collect();
    let n = x0.len();
    let k = active.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(p);
    for (r, &i) in active.iter().enumerate() {
        for j in 0..n {
            kkt[(n + r, j)] = g[(i, j)];
            kkt[(j, n + r)] = g[(i, j)];
        }
    }
    let mut rhs = DVector::zeros(n + k);
    for j in 0..n {
        rhs[j] = -c[j];
    }
    for (r, &i) in active.iter().enumerate() {
        rhs[n + r] = hv[i];
    }
    let Some(sol) = kkt.lu().solve(&rhs) else {
        return (x0, z0);
    };
    let x = DVector::from_fn(n, |i, _| sol[i]);
    let mut z = DVector::zeros(hv.len());
    for (r, &i) in active.iter().enumerate() {
        z[i] = sol[n + r];
    }
    // Keep the polished point only if it is feasible, has valid duals,
    // and does not worsen the residual.
    let feasible = {
        let s = hv - g * &x;
        s.iter().all(|v| *v >= -1e-9 * hscale) && z.iter().all(|v| *v >= -1e-9)
    };
    if !feasible {
        return (x0, z0);
    }
    let before = kkt_residual(p, c, Some(g), Some(hv), &x0, Some(&z0));
    let after = kkt_residual(p, c, Some(g), Some(hv), &x, Some(&z));
    if after <= before {
        (x, z)
    } else {
        (x0, z0)
    }
}

/// SURE of a score-matching fit on its own data: 1 + the unpenalized
/// objective at the solution.
pub fn scorematch_sure(obs: &ObservationSet, config: &ScoreMatchConfig, model: &LogMarginalModel) -> Result<f64> {
    let asm = assemble(obs, config);
    let values = match model.representation() {
        crate::model::Representation::Grid { values, .. } => values.clone(),
        _ => {
            return Err(Error::InvalidInput(
                "scorematch_sure expects a grid-backed model".into(),
            ))
        }
    };
    Ok(1.0 + data_objective(&asm, &values))
}

/// Default log-spaced penalty grid, 1e-4 through 1e1.
pub fn default_rho_grid() -> Vec<f64> {
    (0..=10).map(|k| 10f64.powf(-4.0 + 0.5 * k as f64)).collect()
}

/// Pick rho from `candidates` (or the default grid) by minimizing the
/// fit's SURE on the data. Returns the winning rho with the per-candidate
/// (rho, SURE) table.
pub fn tune_rho_by_sure(
    obs: &ObservationSet,
    config: &ScoreMatchConfig,
    candidates: Option<&[f64]>,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let rhos = candidates.map(|c| c.to_vec()).unwrap_or_else(default_rho_grid);
    if rhos.is_empty() {
        return Err(Error::InvalidInput("empty rho grid".into()));
    }
    let mut table = Vec::with_capacity(rhos.len());
    for &rho in &rhos {
        let cfg = ScoreMatchConfig { rho, ..*config };
        let (model, _) = fit_scorematch(obs, &cfg)?;
        let sure = scorematch_sure(obs, &cfg, &model)?;
        table.push((rho, sure));
    }
    let best = table
        .iter()
        .cloned()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0;
    Ok((best, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{make_prior, PriorSpec};
    use crate::simulate::sample_compound;
    use crate::Family;
    use rand::Rng;
    use rand::SeedableRng;

    fn n02_data(n: usize, seed: u64) -> ObservationSet {
        let prior = make_prior(&PriorSpec::Gaussian { mean: 0.0, sd: 1.0, n_atoms: 201 }).unwrap();
        sample_compound(&prior, n, seed, Family::GaussianLocation, 1.0)
            .unwrap()
            .1
    }

    fn grid_for(obs: &ObservationSet) -> EvaluationGrid {
        EvaluationGrid::default_for(obs).unwrap()
    }

    #[test]
    fn unconstrained_solution_is_stationary() {
        let obs = n02_data(500, 3);
        let config = ScoreMatchConfig::new(grid_for(&obs));
        let (_, report) = fit_scorematch(&obs, &config).unwrap();
        assert!(report.converged, "residual {}", report.constraint_violation);
        assert!(report.constraint_violation <= config.kkt_tol);
    }

    #[test]
    fn huge_penalty_degenerates_to_constant_curvature() {
        let obs = n02_data(800, 5);
        let config = ScoreMatchConfig::new(grid_for(&obs)).with_rho(1e6);
        let (model, report) = fit_scorematch(&obs, &config).unwrap();
        assert!(report.converged);
        let grid = config.grid;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        // Compare curvature at the nodes, away from the one-sided end
        // stencils' own nodes.
        for j in 1..grid.n_nodes() - 1 {
            let c = model.eval(grid.node(j), 2).unwrap();
            lo = lo.min(c);
            hi = hi.max(c);
        }
        assert!(hi - lo < 1e-3, "curvature spread {}", hi - lo);
    }

    #[test]
    fn convexity_constraint_is_honored() {
        // A narrow-variance input (sub-unit marginal spread) drives the
        // unconstrained fit's 1 + l'' negative; the constraint must hold.
        let prior = make_prior(&PriorSpec::Point { u: 0.0 }).unwrap();
        let (_, obs) = sample_compound(&prior, 300, 11, Family::GaussianLocation, 1.0).unwrap();
        // Shrink the data toward zero to mimic an unrealizable marginal.
        let squeezed: Vec<f64> = obs.values().iter().map(|y| 0.6 * y).collect();
        let obs = ObservationSet::gaussian(squeezed).unwrap();
        let config = ScoreMatchConfig::new(grid_for(&obs))
            .with_rho(1e-3)
            .with_convexity(true);
        let (model, report) = fit_scorematch(&obs, &config).unwrap();
        assert!(report.converged, "residual {}", report.constraint_violation);
        let grid = config.grid;
        let min_pv = (0..grid.n_nodes())
            .map(|j| 1.0 + model.eval(grid.node(j), 2).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(min_pv >= -config.kkt_tol, "min 1 + l'' = {min_pv}");

        // Without the constraint the same data violate convexity, so the
        // constraint is genuinely active.
        let unconstrained = ScoreMatchConfig { enforce_convexity: false, ..config };
        let (free_model, _) = fit_scorematch(&obs, &unconstrained).unwrap();
        let free_min = (0..grid.n_nodes())
            .map(|j| 1.0 + free_model.eval(grid.node(j), 2).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(free_min < -1e-3, "expected an active constraint, free min {free_min}");
    }

    #[test]
    fn solution_beats_random_feasible_perturbations() {
        let obs = n02_data(400, 17);
        let config = ScoreMatchConfig::new(grid_for(&obs)).with_convexity(true);
        let (model, report) = fit_scorematch(&obs, &config).unwrap();
        assert!(report.converged);
        let values = match model.representation() {
            crate::model::Representation::Grid { values, .. } => values.clone(),
            _ => unreachable!(),
        };
        let asm = assemble(&obs, &config);
        let base = objective(&asm, config.rho, &config.grid, &values);
        let m = config.grid.n_nodes();
        let cmap = spline_curvature_map(m, config.grid.spacing());
        let feasible = |c: &[f64]| {
            let v = nalgebra::DVector::from_column_slice(c);
            let curv = &cmap * v;
            curv.iter().all(|mj| 1.0 + mj >= -1e-9)
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            // Random interior perturbation, scaled back until feasible.
            let mut cand = values.clone();
            for v in cand.iter_mut().take(m - 1).skip(1) {
                *v += 0.05 * (rng.gen::<f64>() - 0.5);
            }
            let mut scale = 1.0;
            for _ in 0..40 {
                if feasible(&cand) {
                    break;
                }
                scale *= 0.5;
                for (j, v) in cand.iter_mut().enumerate() {
                    *v = values[j] + scale * (*v - values[j]);
                }
            }
            if !feasible(&cand) {
                continue;
            }
            let pert = objective(&asm, config.rho, &config.grid, &cand);
            assert!(pert >= base - 1e-9, "perturbation beat the optimum: {pert} < {base}");
        }
    }

    #[test]
    fn observations_must_lie_inside_the_grid() {
        let obs = ObservationSet::gaussian(vec![-1.0, 0.0, 5.0]).unwrap();
        let grid = EvaluationGrid::new(-2.0, 2.0, 64).unwrap();
        let config = ScoreMatchConfig::new(grid);
        assert!(matches!(
            fit_scorematch(&obs, &config),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn degenerate_data_is_refused() {
        let obs = ObservationSet::gaussian(vec![1.0, 1.0, 1.0]).unwrap();
        let grid = EvaluationGrid::new(0.0, 2.0, 64).unwrap();
        assert!(matches!(
            fit_scorematch(&obs, &ScoreMatchConfig::new(grid)),
            Err(Error::DegenerateRange)
        ));
    }

    #[test]
    fn rho_tuning_returns_a_candidate_with_its_table() {
        let obs = n02_data(300, 23);
        let config = ScoreMatchConfig::new(grid_for(&obs));
        let rhos = [1e-3, 1e-2, 1e-1];
        let (best, table) = tune_rho_by_sure(&obs, &config, Some(&rhos)).unwrap();
        assert!(rhos.contains(&best));
        assert_eq!(table.len(), 3);
        let best_sure = table.iter().find(|(r, _)| *r == best).unwrap().1;
        assert!(table.iter().all(|(_, s)| *s >= best_sure));
    }
}
