//! Brute-force verification of an ASE against eigendecompositions of K(ε) on an ε grid.
//!
//! Eigenvalues are computed with cyclic Jacobi, which keeps relative accuracy on graded
//! matrices. Smooth kernels and exact generalized kernel forms are evaluated in the
//! orthonormal basis Q of the block QR, as G(ε) = (R E) W (R E)ᵀ with E = diag(ε^{deg}),
//! so that entries never lose their small scale to cancellation. A point is certified when
//! a relative perturbation bound for the scaled matrix is small; otherwise eigenvalues below
//! 1e-13‖K(ε)‖ are treated as noise.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ase::{eigen_readout, Ase};
use crate::error::{AseError, Result};
use crate::exponent::{min_exp, Exponent};
use crate::gkf::{block_rrqr, GkfForm};
use crate::kernels::{
    kernel_matrix, normalised, unisolvent_degree, vandermonde, wronskian, KernelModel, NodeSet, Regularity,
    DEFAULT_VANDERMONDE_TOL,
};
use crate::linalg;
use crate::scaling::auto_scale;
use crate::series::{MatrixSeries, ValuationMatrix};

/// Relative bound below which a point's eigenvalues are trusted to full relative accuracy.
const CERTIFY_BOUND: f64 = 1e-4;
/// Noise floor for uncertified points, relative to ‖K(ε)‖.
const NOISE_FLOOR: f64 = 1e-13;
/// Leading coefficients whose ε^α-scaled size drops below this are beyond the precision ceiling.
const CEILING: f64 = 1e-12;
/// Fits with R² below this, and a visible log residual, are reported as unreliable.
const MIN_R2: f64 = 0.999;
const SLOPE_TOL: f64 = 0.1;

/// Logarithmic grid between `start` and `stop`, returned in decreasing order.
pub fn log_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > 0.0) || points < 2 || !start.is_finite() || !stop.is_finite() {
        return Err(AseError::InvalidGrid(format!("need positive bounds and at least 2 points ({start}:{stop}:{points})")));
    }
    let (a, b) = (start.ln(), stop.ln());
    let mut g: Vec<f64> = (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect();
    g[0] = start;
    g[points - 1] = stop;
    g.sort_by(|x, y| y.total_cmp(x));
    g.dedup();
    Ok(g)
}

/// 12 points per decade over [1e-4, 1e-1].
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-4, 1e-1, 37).expect("valid default grid")
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(AseError::InvalidGrid("an ε grid needs at least 4 points".into()));
    }
    if grid.iter().any(|e| !e.is_finite() || *e <= 0.0) {
        return Err(AseError::InvalidGrid("ε values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(AseError::InvalidGrid("ε grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// Graded representation K(ε) = Q G(ε) Qᵀ with G(ε) = (R E) W (R E)ᵀ and E = diag((ρε)^{e_j}).
#[derive(Clone, Debug)]
struct Structured {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    col_exps: Vec<Exponent>,
    w: DMatrix<f64>,
    /// Exponent of each Q column's scaling block, for certification.
    row_exps: Vec<Exponent>,
    rho: f64,
}

impl Structured {
    fn from_gkf(form: &GkfForm, rank_tol: f64) -> Result<Self> {
        let qr = block_rrqr(&form.v, &form.widths(), rank_tol)?;
        let q = qr.q();
        let r = qr.r.clone();
        let row_exps = qr.ranks.iter().enumerate().flat_map(|(i, &b)| std::iter::repeat_n(form.scaling.nu(i), b)).collect();
        Ok(Structured { q, r, col_exps: form.scaling.expand(), w: form.w.clone(), row_exps, rho: 1.0 })
    }

    fn g(&self, eps: f64) -> DMatrix<f64> {
        let d: Vec<f64> = self.col_exps.iter().map(|e| e.pow(self.rho * eps)).collect();
        let re = DMatrix::from_fn(self.r.nrows(), self.r.ncols(), |i, j| self.r[(i, j)] * d[j]);
        linalg::sym_part(&(&re * &self.w * re.transpose()))
    }
}

/// Q and block structure for a smooth kernel, with the Taylor order picked per ε.
#[derive(Clone, Debug)]
struct KernelStructure {
    kernel: KernelModel,
    nodes: NodeSet,
    rho: f64,
    q: DMatrix<f64>,
    row_exps: Vec<Exponent>,
    degree: usize,
}

impl KernelStructure {
    fn new(kernel: &KernelModel, nodes: &NodeSet) -> Result<Option<Self>> {
        if !matches!(kernel.regularity, Regularity::Infinite { .. }) {
            return Ok(None);
        }
        let (c, rho) = normalised(nodes);
        let Some(degree) = unisolvent_degree(&c, c.n() - 1, DEFAULT_VANDERMONDE_TOL) else {
            return Ok(None);
        };
        let (v, widths) = vandermonde(&c, degree);
        let qr = block_rrqr(&v, &widths, DEFAULT_VANDERMONDE_TOL)?;
        let row_exps = qr.ranks.iter().enumerate().flat_map(|(i, &b)| std::iter::repeat_n(Exponent::int(i as i64), b)).collect();
        Ok(Some(KernelStructure { kernel: kernel.clone(), nodes: c, rho, q: qr.q(), row_exps, degree }))
    }

    /// Taylor truncation degree M with (2ρε)^{M−D} ≤ 1e-17, when the series converges fast enough.
    fn order(&self, eps: f64) -> Option<usize> {
        let x = 2.0 * self.rho * eps;
        if x > 0.5 {
            return None;
        }
        let extra = if x <= 0.0 { 0 } else { (1e-17f64.ln() / x.ln()).ceil().max(1.0) as usize };
        let m = self.degree + extra;
        (2 * m <= self.kernel.horizon()).then_some(m)
    }

    fn structured(&self, m: usize) -> Result<Structured> {
        let (v, widths) = vandermonde(&self.nodes, m);
        let mut r = self.q.transpose() * &v;
        let mut col = 0;
        let mut col_exps = Vec::with_capacity(v.ncols());
        for (deg, &w) in widths.iter().enumerate() {
            for _ in 0..w {
                for (i, re) in self.row_exps.iter().enumerate() {
                    if Exponent::int(deg as i64) < *re {
                        r[(i, col)] = 0.0;
                    }
                }
                col_exps.push(Exponent::int(deg as i64));
                col += 1;
            }
        }
        let w = wronskian(&self.kernel, self.nodes.d(), m)?;
        Ok(Structured { q: self.q.clone(), r, col_exps, w, row_exps: self.row_exps.clone(), rho: self.rho })
    }
}

pub enum SweepSource<'a> {
    Series(&'a MatrixSeries),
    Gkf(&'a GkfForm),
    Kernel { kernel: &'a KernelModel, nodes: &'a NodeSet },
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    /// Per ε, eigenvalues sorted by decreasing magnitude.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Per ε, orthonormal eigenvectors in the same order as `eigenvalues`.
    #[serde(skip)]
    pub eigenvectors: Vec<DMatrix<f64>>,
    /// Per ε, eigenvalues with magnitude at or below this are noise (0 when certified).
    pub floors: Vec<f64>,
    pub certified: Vec<bool>,
}

impl SweepResult {
    pub fn n(&self) -> usize {
        self.eigenvalues.first().map(|v| v.len()).unwrap_or(0)
    }

    /// `eps,lambda_1..lambda_n` at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut s = String::from("eps");
        for k in 1..=n {
            s.push_str(&format!(",lambda_{k}"));
        }
        s.push('\n');
        for (e, vals) in self.eps.iter().zip(&self.eigenvalues) {
            s.push_str(&format!("{e:.16e}"));
            for v in vals {
                s.push_str(&format!(",{v:.16e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Smallest of the relative perturbation bounds under two diagonal scalings of `g`:
/// the valuation scaling ε^{-ν} and the unit-diagonal equilibration.
fn relative_bound(g: &DMatrix<f64>, row_exps: Option<&[Exponent]>, eps: f64) -> f64 {
    let n = g.nrows();
    let unit = 32.0 * n as f64 * f64::EPSILON;
    let kappa = |d: &[f64]| {
        let s = DMatrix::from_fn(n, n, |i, j| g[(i, j)] * d[i] * d[j]);
        let sv = linalg::singular_values(&s);
        match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 && hi.is_finite() => hi / lo,
            _ => f64::INFINITY,
        }
    };
    let mut best = f64::INFINITY;
    if let Some(ex) = row_exps {
        let d: Vec<f64> = ex.iter().map(|e| 1.0 / e.pow(eps)).collect();
        if d.iter().all(|x| x.is_finite()) {
            best = best.min(kappa(&d));
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| g[(i, i)].abs()).collect();
    if diag.iter().all(|x| *x > 0.0) {
        best = best.min(kappa(&diag.iter().map(|x| 1.0 / x.sqrt()).collect::<Vec<_>>()));
    }
    unit * best
}

fn series_exponents(k: &MatrixSeries) -> Option<Vec<Exponent>> {
    let t = k.trunc_order();
    let rows: Vec<Vec<Exponent>> =
        k.valuation_matrix().to_rows().into_iter().map(|r| r.into_iter().map(|v| min_exp(v, t)).collect()).collect();
    let om = ValuationMatrix::from_rows(rows).ok()?;
    auto_scale(&om).ok().map(|a| a.nu)
}

struct Point {
    vals: Vec<f64>,
    vecs: DMatrix<f64>,
    floor: f64,
    certified: bool,
}

fn decompose(g: &DMatrix<f64>, q: Option<&DMatrix<f64>>, row_exps: Option<&[Exponent]>, eps: f64) -> Point {
    let (vals, z) = linalg::jacobi_eigen_by_magnitude(g);
    let mut vecs = match q {
        Some(q) => q * z,
        None => z,
    };
    linalg::fix_signs(&mut vecs);
    let certified = relative_bound(g, row_exps, eps) <= CERTIFY_BOUND;
    let norm = vals.first().map(|v| v.abs()).unwrap_or(0.0);
    Point { vals, vecs, floor: if certified { 0.0 } else { NOISE_FLOOR * norm }, certified }
}

/// Eigendecompositions of K(ε) over a strictly decreasing grid of at least 4 points.
pub fn eigen_sweep(source: &SweepSource, grid: &[f64]) -> Result<SweepResult> {
    check_grid(grid)?;
    let mut points = Vec::with_capacity(grid.len());
    match source {
        SweepSource::Series(k) => {
            let ex = series_exponents(k);
            for &e in grid {
                points.push(decompose(&k.evaluate(e), None, ex.as_deref(), e));
            }
        }
        SweepSource::Gkf(f) => {
            let s = Structured::from_gkf(f, DEFAULT_VANDERMONDE_TOL)?;
            for &e in grid {
                points.push(decompose(&s.g(e), Some(&s.q), Some(&s.row_exps), e));
            }
        }
        SweepSource::Kernel { kernel, nodes } => {
            let ks = KernelStructure::new(kernel, nodes)?;
            let mut cache: Option<(usize, Structured)> = None;
            for &e in grid {
                match ks.as_ref().and_then(|k| k.order(e).map(|m| (k, m))) {
                    Some((k, m)) => {
                        if cache.as_ref().map(|c| c.0) != Some(m) {
                            cache = Some((m, k.structured(m)?));
                        }
                        let s = &cache.as_ref().unwrap().1;
                        points.push(decompose(&s.g(e), Some(&s.q), Some(&s.row_exps), k.rho * e));
                    }
                    None => points.push(decompose(&kernel_matrix(kernel, nodes, e), None, None, e)),
                }
            }
        }
    }
    Ok(SweepResult {
        eps: grid.to_vec(),
        eigenvalues: points.iter().map(|p| p.vals.clone()).collect(),
        floors: points.iter().map(|p| p.floor).collect(),
        certified: points.iter().map(|p| p.certified).collect(),
        eigenvectors: points.into_iter().map(|p| p.vecs).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub r2: f64,
    pub points: usize,
    pub reliable: bool,
}

/// Least-squares slope of ln|y| against ln x, over the smallest-x decade (at least 4 points).
pub fn fit_slope(samples: &[(f64, f64)]) -> Option<SlopeFit> {
    let mut s: Vec<(f64, f64)> = samples.iter().copied().filter(|(x, y)| *x > 0.0 && *y != 0.0).collect();
    if s.len() < 2 {
        return None;
    }
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xmin = s[0].0;
    let mut chosen: Vec<(f64, f64)> = s.iter().copied().filter(|(x, _)| *x <= 10.0 * xmin * (1.0 + 1e-12)).collect();
    if chosen.len() < 4 {
        chosen = s.iter().copied().take(4).collect();
    }
    let pts: Vec<(f64, f64)> = chosen.iter().map(|(x, y)| (x.ln(), y.abs().ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let rms = (ss_res / m).sqrt();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let reliable = pts.len() >= 4 && (r2 >= MIN_R2 || rms <= 1e-3);
    Some(SlopeFit { slope, r2, points: pts.len(), reliable })
}

/// Fitted slope of each magnitude-ordered eigenvalue curve over its usable points.
pub fn estimate_valuations(sweep: &SweepResult) -> Vec<Option<SlopeFit>> {
    (0..sweep.n())
        .map(|k| {
            let samples: Vec<(f64, f64)> = sweep
                .eps
                .iter()
                .enumerate()
                .filter(|(i, _)| sweep.eigenvalues[*i][k].abs() > sweep.floors[*i])
                .map(|(i, e)| (*e, sweep.eigenvalues[i][k]))
                .collect();
            fit_slope(&samples)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupStatus {
    Pass,
    Fail,
    Unverifiable,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupMatch {
    pub valuation: Exponent,
    pub count: usize,
    pub status: GroupStatus,
    pub slopes: Vec<Option<f64>>,
    pub slope_ok: bool,
    /// Numeric λ(ε)/ε^α at `eps_checked`, sorted decreasing like `predicted`.
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub coeff_rel_err: f64,
    pub coeff_ok: bool,
    pub angle: f64,
    pub angle_ok: bool,
    pub eps_checked: Option<f64>,
    pub verifiable_points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchReport {
    pub groups: Vec<GroupMatch>,
    /// Largest valuation among verifiable groups.
    pub precision_ceiling: Option<Exponent>,
    pub truncated_at: Option<Exponent>,
    pub pass: bool,
}

/// Compares each ASE group with the matching numeric curves (magnitude order, offsets by valuation).
pub fn match_ase(ase: &Ase, sweep: &SweepResult, tol_coeff: f64, tol_angle: f64) -> Result<MatchReport> {
    if sweep.n() != ase.n {
        return Err(AseError::DimensionMismatch { expected: format!("sweep of size {}", ase.n), found: format!("{}", sweep.n()) });
    }
    let mut groups = Vec::new();
    let mut off = 0;
    for g in eigen_readout(ase) {
        let c = g.count();
        let idx: Vec<usize> = (off..off + c).collect();
        off += c;
        let alpha = g.valuation;
        let min_pred = g.leading_values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        let usable: Vec<usize> = (0..sweep.eps.len())
            .filter(|&i| {
                let e = sweep.eps[i];
                let ceiling = if sweep.certified[i] { 0.0 } else { CEILING };
                min_pred * alpha.pow(e) > ceiling && idx.iter().all(|&k| sweep.eigenvalues[i][k].abs() > sweep.floors[i])
            })
            .collect();
        let mut gm = GroupMatch {
            valuation: alpha,
            count: c,
            status: GroupStatus::Unverifiable,
            slopes: vec![None; c],
            slope_ok: false,
            observed: vec![],
            predicted: g.leading_values.clone(),
            coeff_rel_err: f64::NAN,
            coeff_ok: false,
            angle: f64::NAN,
            angle_ok: false,
            eps_checked: None,
            verifiable_points: usable.len(),
        };
        if usable.len() < 4 {
            groups.push(gm);
            continue;
        }
        let a = alpha.to_f64();
        gm.slopes = idx
            .iter()
            .map(|&k| fit_slope(&usable.iter().map(|&i| (sweep.eps[i], sweep.eigenvalues[i][k])).collect::<Vec<_>>()).map(|f| f.slope))
            .collect();
        gm.slope_ok = gm.slopes.iter().filter(|s| s.is_some_and(|s| (s - a).abs() <= SLOPE_TOL)).count() == c;

        let i = *usable.iter().max_by(|&&x, &&y| sweep.eps[y].total_cmp(&sweep.eps[x])).unwrap();
        let e = sweep.eps[i];
        let scale = alpha.pow(e);
        let mut obs: Vec<f64> = idx.iter().map(|&k| sweep.eigenvalues[i][k] / scale).collect();
        obs.sort_by(|x, y| y.total_cmp(x));
        gm.coeff_rel_err = obs.iter().zip(&g.leading_values).map(|(o, p)| (o - p).abs() / p.abs()).fold(0.0, f64::max);
        gm.coeff_ok = gm.coeff_rel_err <= tol_coeff;
        gm.observed = obs;

        let u = DMatrix::from_fn(ase.n, c, |r, col| sweep.eigenvectors[i][(r, idx[col])]);
        gm.angle = linalg::max_principal_angle(&u, &g.vectors);
        gm.angle_ok = gm.angle <= tol_angle;
        gm.eps_checked = Some(e);
        gm.status = if gm.slope_ok && gm.coeff_ok && gm.angle_ok { GroupStatus::Pass } else { GroupStatus::Fail };
        groups.push(gm);
    }
    let precision_ceiling = groups.iter().filter(|g| g.status != GroupStatus::Unverifiable).map(|g| g.valuation).max();
    let pass = groups.iter().all(|g| g.status != GroupStatus::Fail);
    Ok(MatchReport { groups, precision_ceiling, truncated_at: ase.truncated_at, pass })
}

/// Predicted limit of the k-th (1-based, magnitude order) eigenvector, if its group is
/// resolved and not ambiguous.
pub fn predicted_vector(ase: &Ase, k: usize) -> Option<nalgebra::DVector<f64>> {
    let mut seen = 0;
    for g in eigen_readout(ase) {
        if k <= seen + g.count() {
            if g.ambiguous {
                return None;
            }
            return Some(g.vectors.column(k - seen - 1).into_owned());
        }
        seen += g.count();
    }
    None
}

/// `eps,angle,u_1..u_n` rows for the k-th eigenvector, oriented towards `limit`, then a
/// `limit` row when a prediction is available.
pub fn vector_trace_csv(sweep: &SweepResult, k: usize, limit: Option<&nalgebra::DVector<f64>>) -> Result<String> {
    let n = sweep.n();
    if k == 0 || k > n {
        return Err(AseError::InvalidInput(format!("track index {k} outside 1..={n}")));
    }
    let mut s = String::from("eps,angle");
    for j in 1..=n {
        s.push_str(&format!(",u_{j}"));
    }
    s.push('\n');
    for (i, e) in sweep.eps.iter().enumerate() {
        let mut u = sweep.eigenvectors[i].column(k - 1).into_owned();
        let angle = match limit {
            Some(v) => {
                if u.dot(v) < 0.0 {
                    u = -u;
                }
                let lim = DMatrix::from_column_slice(n, 1, v.as_slice());
                linalg::max_principal_angle(&DMatrix::from_column_slice(n, 1, u.as_slice()), &lim)
            }
            None => f64::NAN,
        };
        s.push_str(&format!("{e:.16e},{angle:.16e}"));
        for x in u.iter() {
            s.push_str(&format!(",{x:.16e}"));
        }
        s.push('\n');
    }
    if let Some(v) = limit {
        s.push_str("limit,0");
        for x in v.iter() {
            s.push_str(&format!(",{x:.16e}"));
        }
        s.push('\n');
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn two_by_two() -> MatrixSeries {
        let e = Exponent::int;
        MatrixSeries::from_terms(
            2,
            vec![
                (e(0), dmatrix![1.0, 0.0; 0.0, 0.0]),
                (e(1), dmatrix![0.0, 1.0; 1.0, 0.0]),
                (e(2), dmatrix![0.0, 0.0; 0.0, 2.0]),
                (e(3), dmatrix![0.0, 0.0; 0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 37);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[36] - 1e-4).abs() < 1e-18);
        assert!(check_grid(&[1.0, 0.5, 0.5, 0.1]).is_err());
    }

    #[test]
    fn two_by_two_curves() {
        let k = two_by_two();
        let sweep = eigen_sweep(&SweepSource::Series(&k), &default_grid()).unwrap();
        let last = sweep.eigenvalues.last().unwrap();
        assert!((last[0] - 1.0).abs() < 1e-3);
        assert!((last[1] / 1e-8 - 1.0).abs() < 1e-3);
        let fits = estimate_valuations(&sweep);
        assert!((fits[0].as_ref().unwrap().slope).abs() < 0.01);
        assert!((fits[1].as_ref().unwrap().slope - 2.0).abs() < 0.01);
    }

    #[test]
    fn identity_sweep() {
        let k = MatrixSeries::identity(3);
        let sweep = eigen_sweep(&SweepSource::Series(&k), &default_grid()).unwrap();
        assert!(sweep.eigenvalues.iter().flatten().all(|v| *v == 1.0));
    }

    #[test]
    fn csv_header_and_precision() {
        let k = two_by_two();
        let sweep = eigen_sweep(&SweepSource::Series(&k), &log_grid(1e-4, 1e-1, 4).unwrap()).unwrap();
        let csv = sweep.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "eps,lambda_1,lambda_2");
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(row[0], 0.1);
        assert_eq!(row[1], sweep.eigenvalues[0][0]);
    }
}
