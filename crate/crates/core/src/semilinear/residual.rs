//! Classical-solution residual `|D_t u − A_h(t)u − ψ(t,u)|` of a grid mild
//! solution.

use super::{continue_solution, Backend, MildSolution, PicardConfig};
use crate::error::{Error, Result};
use crate::grid::operator::apply_operator;
use crate::grid::Grid;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub worst: f64,
    pub worst_t: f64,
    pub worst_x: Vec<f64>,
    /// `(t_k, max residual over the points at t_k)`.
    pub per_time: Vec<(f64, f64)>,
    pub samples: usize,
}

/// Residual at the stored levels nearest `times` and the grid nodes nearest
/// `points`. Needs a neighbouring level on both sides and points at least one
/// node away from the boundary.
pub fn residual_classical(
    spec: &ProblemSpec,
    sol: &MildSolution,
    times: &[f64],
    points: &[Vec<f64>],
) -> Result<ResidualReport> {
    let grid = *sol
        .grid()
        .ok_or_else(|| Error::Unsupported("residuals need a grid mild solution".into()))?;
    if sol.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "residual needs at least 3 stored levels, have {}",
            sol.len()
        )));
    }
    let nodes = points
        .iter()
        .map(|p| nearest_interior_node(&grid, p))
        .collect::<Result<Vec<_>>>()?;
    let ts = sol.times();
    let mut per_time = Vec::new();
    let (mut worst, mut worst_t, mut worst_x) = (0.0, f64::NAN, Vec::new());
    let mut samples = 0;
    for &t in times {
        let k = sol.nearest_level(t);
        if k == 0 || k + 1 >= sol.len() {
            return Err(Error::InvalidInput(format!(
                "time {t} has no stored levels on both sides (range [{}, {}])",
                ts[0],
                sol.final_time()
            )));
        }
        let (h1, h2) = (ts[k] - ts[k - 1], ts[k + 1] - ts[k]);
        let (um, u0, up) = (sol.level(k - 1), sol.level(k), sol.level(k + 1));
        let au = apply_operator(spec, &grid, ts[k], u0)?;
        let mut here: f64 = 0.0;
        for &p in &nodes {
            let dt = -h2 / (h1 * (h1 + h2)) * um[p] + (h2 - h1) / (h1 * h2) * u0[p] + h1 / (h2 * (h1 + h2)) * up[p];
            let r = (dt - au[p] - spec.nonlinearity.eval(ts[k], u0[p])).abs();
            samples += 1;
            here = here.max(r);
            if r > worst || worst_x.is_empty() {
                worst = r;
                worst_t = ts[k];
                worst_x = grid.point_vec(p);
            }
        }
        per_time.push((ts[k], here));
    }
    Ok(ResidualReport {
        worst,
        worst_t,
        worst_x,
        per_time,
        samples,
    })
}

fn nearest_interior_node(grid: &Grid, p: &[f64]) -> Result<usize> {
    if p.len() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: p.len(),
        });
    }
    let n = grid.n();
    let mut idx = 0;
    let mut stride = 1;
    for &x in p {
        let i = ((x + grid.radius()) / grid.h()).round();
        if !(i >= 2.0 && i <= (n - 3) as f64) {
            return Err(Error::InvalidInput(format!(
                "point {p:?} is not strictly inside the grid interior"
            )));
        }
        idx += i as usize * stride;
        stride *= n;
    }
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub coarse: ResidualReport,
    pub fine: ResidualReport,
    /// `coarse.worst / fine.worst`.
    pub ratio: f64,
}

/// Residuals from `cfg` and from the jointly refined run (grid spacing and
/// `dt` halved).
pub fn residual_refinement(
    spec: &ProblemSpec,
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    tau: f64,
    cfg: &PicardConfig,
    times: &[f64],
    points: &[Vec<f64>],
) -> Result<RefinementReport> {
    let Backend::Grid { grid, scheme } = cfg.backend else {
        return Err(Error::Unsupported("refinement study needs the grid backend".into()));
    };
    let coarse_sol = continue_solution(spec, f, s, tau, cfg)?;
    let coarse = residual_classical(spec, &coarse_sol, times, points)?;
    let fine_grid = Grid::new(grid.dim(), grid.radius(), 2 * grid.n() - 1)?;
    let fine_cfg = PicardConfig {
        backend: Backend::Grid {
            grid: fine_grid,
            scheme: scheme.with_dt(scheme.dt / 2.0),
        },
        dt: cfg.dt / 2.0,
        ..cfg.clone()
    };
    let fine_sol = continue_solution(spec, f, s, tau, &fine_cfg)?;
    let fine = residual_classical(spec, &fine_sol, times, points)?;
    let ratio = coarse.worst / fine.worst;
    Ok(RefinementReport { coarse, fine, ratio })
}
