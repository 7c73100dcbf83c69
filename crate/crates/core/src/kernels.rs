//! Radial kernels k(x, y) = ψ(‖x − y‖) in the flat limit.
//!
//! Smooth kernels give K(ε) = V_{≤D} Δ W_{≤D} Δ V_{≤D}ᵀ + o(·) with D the smallest degree at
//! which the Vandermonde matrix reaches rank n. Kernels of finite regularity r add a final
//! block of width n − rank V_{≤r−1} at ν = r − 1/2, carried by the distance matrix.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ase::{Ase, DEFAULT_RANK_TOL};
use crate::error::{AseError, Result};
use crate::exponent::Exponent;
use crate::gkf::{ase_from_gkf_with, block_rrqr_partial, BlockQr, GkfForm};
use crate::linalg;
use crate::scaling::DiagonalScaling;
use crate::series::ScalarSeries;

/// Default relative tolerance for Vandermonde ranks.
pub const DEFAULT_VANDERMONDE_TOL: f64 = 1e-11;
/// Number of ψ coefficients stored for the named kernels.
const NAMED_HORIZON: usize = 160;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Gaussian,
    Exponential,
    Matern2,
    Custom,
}

impl std::str::FromStr for KernelName {
    type Err = AseError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelName::Gaussian),
            "exponential" => Ok(KernelName::Exponential),
            "matern2" => Ok(KernelName::Matern2),
            "custom" => Ok(KernelName::Custom),
            _ => Err(AseError::InvalidInput(format!("unknown kernel {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    Finite(usize),
    /// No odd coefficient up to `horizon`; for custom kernels only a lower bound.
    Infinite { horizon: usize },
}

impl Regularity {
    pub fn finite(&self) -> Option<usize> {
        match self {
            Regularity::Finite(r) => Some(*r),
            Regularity::Infinite { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    pub name: KernelName,
    /// ψ_0, ψ_1, … up to the horizon.
    coeffs: Vec<f64>,
    pub regularity: Regularity,
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |a, i| a * i as f64)
}

impl KernelModel {
    pub fn named(name: KernelName) -> Result<Self> {
        let coeffs: Vec<f64> = (0..=NAMED_HORIZON)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                match name {
                    KernelName::Gaussian if k % 2 == 0 => {
                        let l = k / 2;
                        (if l % 2 == 0 { 1.0 } else { -1.0 }) / factorial(l)
                    }
                    KernelName::Gaussian => 0.0,
                    KernelName::Exponential => sign / factorial(k),
                    KernelName::Matern2 => sign * (1.0 - k as f64) / factorial(k),
                    KernelName::Custom => f64::NAN,
                }
            })
            .collect();
        if name == KernelName::Custom {
            return Err(AseError::InvalidInput("custom kernels need explicit ψ coefficients".into()));
        }
        Ok(Self::from_coeffs(name, coeffs))
    }

    pub fn gaussian() -> Self {
        Self::named(KernelName::Gaussian).expect("named kernel")
    }

    pub fn exponential() -> Self {
        Self::named(KernelName::Exponential).expect("named kernel")
    }

    pub fn matern2() -> Self {
        Self::named(KernelName::Matern2).expect("named kernel")
    }

    /// ψ given by its Taylor coefficients at 0; ψ_0 must be nonzero.
    pub fn custom(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(AseError::InvalidInput("ψ coefficients must be finite and non-empty".into()));
        }
        Ok(Self::from_coeffs(KernelName::Custom, coeffs))
    }

    fn from_coeffs(name: KernelName, coeffs: Vec<f64>) -> Self {
        let horizon = coeffs.len() - 1;
        let psi = ScalarSeries::new(
            coeffs.iter().enumerate().map(|(k, c)| (Exponent::int(k as i64), *c)),
            Exponent::int(horizon as i64 + 1),
        )
        .expect("integer exponents below the horizon");
        let regularity = regularity_index(&psi, horizon);
        KernelModel { name, coeffs, regularity }
    }

    pub fn horizon(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn psi(&self) -> ScalarSeries {
        ScalarSeries::new(
            self.coeffs.iter().enumerate().map(|(k, c)| (Exponent::int(k as i64), *c)),
            Exponent::int(self.horizon() as i64 + 1),
        )
        .expect("integer exponents below the horizon")
    }

    pub fn coeff(&self, k: usize) -> Result<f64> {
        self.coeffs.get(k).copied().ok_or_else(|| {
            AseError::InsufficientSmoothness(format!("ψ_{k} is beyond the stored horizon {}", self.horizon()))
        })
    }

    /// ψ(s) in closed form for named kernels, as a truncated series otherwise.
    pub fn eval(&self, s: f64) -> f64 {
        match self.name {
            KernelName::Gaussian => (-s * s).exp(),
            KernelName::Exponential => (-s).exp(),
            KernelName::Matern2 => (1.0 + s) * (-s).exp(),
            KernelName::Custom => self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
        }
    }
}

/// Smallest r with ψ_{2r−1} ≠ 0 among the first `horizon` coefficients.
pub fn regularity_index(psi: &ScalarSeries, horizon: usize) -> Regularity {
    (1..)
        .take_while(|r| 2 * r - 1 <= horizon)
        .find(|r| psi.coeff(Exponent::int(2 * *r as i64 - 1)) != 0.0)
        .map(Regularity::Finite)
        .unwrap_or(Regularity::Infinite { horizon })
}

fn binom(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Multi-indices of total degree ≤ s, graded, descending lexicographic within a degree.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    pub d: usize,
    pub max_degree: usize,
    pub by_degree: Vec<Vec<Vec<u32>>>,
}

fn monomials_of_degree(d: usize, t: usize) -> Vec<Vec<u32>> {
    if d == 1 {
        return vec![vec![t as u32]];
    }
    let mut out = Vec::new();
    for a in (0..=t).rev() {
        for mut rest in monomials_of_degree(d - 1, t - a) {
            rest.insert(0, a as u32);
            out.push(rest);
        }
    }
    out
}

impl MonomialBasis {
    pub fn new(d: usize, max_degree: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        let by_degree = (0..=max_degree).map(|t| monomials_of_degree(d, t)).collect();
        MonomialBasis { d, max_degree, by_degree }
    }

    /// ℍ_{t,d}, the number of monomials of degree exactly t.
    pub fn count_degree(t: usize, d: usize) -> usize {
        binom(t + d - 1, d - 1) as usize
    }

    /// ℙ_{s,d}, the number of monomials of degree at most s.
    pub fn count_total(s: usize, d: usize) -> usize {
        binom(s + d, d) as usize
    }

    pub fn widths(&self) -> Vec<usize> {
        self.by_degree.iter().map(|b| b.len()).collect()
    }

    pub fn all(&self) -> impl Iterator<Item = &Vec<u32>> {
        self.by_degree.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.by_degree.iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Pairwise distinct points in R^d, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    points: DMatrix<f64>,
}

impl NodeSet {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.ncols() == 0 || points.nrows() == 0 {
            return Err(AseError::InvalidInput("node set must have at least one point and dimension".into()));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(AseError::InvalidInput("node coordinates must be finite".into()));
        }
        for i in 0..points.nrows() {
            for j in 0..i {
                if points.row(i) == points.row(j) {
                    return Err(AseError::DuplicateNode(j, i));
                }
            }
        }
        Ok(NodeSet { points })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = linalg::from_rows(rows).ok_or_else(|| AseError::InvalidInput("rows differ in length".into()))?;
        Self::new(m)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// Translated so that the centroid is at the origin; radial kernels do not notice.
    pub fn centered(&self) -> NodeSet {
        let mean = self.points.row_mean();
        let mut p = self.points.clone();
        for mut r in p.row_iter_mut() {
            r -= &mean;
        }
        NodeSet { points: p }
    }

    /// Largest distance from the origin.
    pub fn radius(&self) -> f64 {
        self.points.row_iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    /// One node per line of comma-separated coordinates; `#` lines are comments,
    /// except an optional `# d=<int>` header that fixes the dimension.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut d: Option<usize> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("d=") {
                    d = Some(v.trim().parse().map_err(|_| AseError::InvalidInput(format!("line {}: bad header", ln + 1)))?);
                }
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|x| x.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| AseError::InvalidInput(format!("line {}: {e}", ln + 1)))?;
            if let Some(dd) = d {
                if row.len() != dd {
                    return Err(AseError::InvalidInput(format!("line {}: expected {dd} coordinates, found {}", ln + 1, row.len())));
                }
            }
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(AseError::InvalidInput(format!("line {}: inconsistent dimension", ln + 1)));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(AseError::InvalidInput("node file has no points".into()));
        }
        Self::from_rows(&rows)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# d={}\n", self.d());
        for r in self.points.row_iter() {
            let items: Vec<String> = r.iter().map(|x| format!("{x:.17e}")).collect();
            s.push_str(&items.join(","));
            s.push('\n');
        }
        s
    }

    /// n equispaced points in [0, 1].
    pub fn equispaced(n: usize) -> Result<Self> {
        let denom = (n.max(2) - 1) as f64;
        Self::new(DMatrix::from_fn(n, 1, |i, _| i as f64 / denom))
    }

    /// n uniform points in [0, 1]^d.
    pub fn uniform_cube(n: usize, d: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(DMatrix::from_fn(n, d, |_, _| rng.gen::<f64>()))
    }

    /// n points on the unit circle at uniform random angles.
    pub fn circle(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect();
        Self::new(DMatrix::from_fn(n, 2, |i, k| if k == 0 { t[i].cos() } else { t[i].sin() }))
    }

    /// n points on the cubic x₂² = x₁³ − x₁, on both real branches.
    pub fn cubic_curve(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = if rng.gen_bool(0.5) { -rng.gen::<f64>() } else { 1.0 + 0.5 * rng.gen::<f64>() };
            let y = (x * x * x - x).max(0.0).sqrt();
            rows.push(vec![x, if rng.gen_bool(0.5) { y } else { -y }]);
        }
        Self::from_rows(&rows)
    }
}

/// V_{≤s} with degree blocks V_0..V_s; returns the matrix and the block widths.
pub fn vandermonde(nodes: &NodeSet, s: usize) -> (DMatrix<f64>, Vec<usize>) {
    let basis = MonomialBasis::new(nodes.d(), s);
    let cols: Vec<&Vec<u32>> = basis.all().collect();
    let v = DMatrix::from_fn(nodes.n(), cols.len(), |i, c| {
        cols[c].iter().enumerate().map(|(k, &a)| nodes.points[(i, k)].powi(a as i32)).product()
    });
    (v, basis.widths())
}

/// W_{αβ} = coefficient of x^α y^β in Σ_l ψ_{2l} ‖x − y‖^{2l}, for |α|, |β| ≤ max_deg.
///
/// Only the even coefficients enter, so this is the Taylor block of the kernel as long as
/// max_deg ≤ r − 1 for a kernel of regularity r.
pub fn wronskian(kernel: &KernelModel, d: usize, max_deg: usize) -> Result<DMatrix<f64>> {
    if let Regularity::Finite(r) = kernel.regularity {
        if max_deg + 1 > r {
            return Err(AseError::InsufficientSmoothness(format!(
                "Wronskian to degree {max_deg} needs regularity > {max_deg}, kernel has r = {r}"
            )));
        }
    }
    kernel.coeff(2 * max_deg)?;
    let basis = MonomialBasis::new(d, max_deg);
    let idx: Vec<&Vec<u32>> = basis.all().collect();
    let m = idx.len();
    let mut w = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..=a {
            let (al, be) = (idx[a], idx[b]);
            if al.iter().zip(be).any(|(x, y)| (x + y) % 2 == 1) {
                continue;
            }
            let lk: Vec<usize> = al.iter().zip(be).map(|(x, y)| ((x + y) / 2) as usize).collect();
            let l: usize = lk.iter().sum();
            let mut multinomial = 1.0;
            let mut left = l;
            for &x in &lk {
                multinomial *= binom(left, x) as f64;
                left -= x;
            }
            let mut val = kernel.coeff(2 * l)? * multinomial;
            for (x, y) in al.iter().zip(be) {
                val *= binom((x + y) as usize, *x as usize) as f64;
                if y % 2 == 1 {
                    val = -val;
                }
            }
            w[(a, b)] = val;
            w[(b, a)] = val;
        }
    }
    Ok(w)
}

/// D^{(q)}_{ij} = ‖x_i − x_j‖^q.
pub fn distance_matrix(nodes: &NodeSet, q: u32) -> DMatrix<f64> {
    let n = nodes.n();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (nodes.points.row(i) - nodes.points.row(j)).norm().powi(q as i32)
        }
    })
}

/// [ψ(ε‖x_i − x_j‖)].
pub fn kernel_matrix(kernel: &KernelModel, nodes: &NodeSet, eps: f64) -> DMatrix<f64> {
    let n = nodes.n();
    DMatrix::from_fn(n, n, |i, j| kernel.eval(eps * (nodes.points.row(i) - nodes.points.row(j)).norm()))
}

fn vandermonde_rank(v: &DMatrix<f64>, rank_tol: f64) -> usize {
    linalg::rank(v, rank_tol)
}

/// Centred nodes scaled to unit radius, and the radius ρ.
///
/// Monomials of high degree on a small cloud lose their rank signal to rounding, so the
/// Vandermonde matrices are built on this copy. Since K(ε) on the original nodes equals
/// K(ρε) on the copy, W absorbs the factors ρ^{ν_i+ν_j} and the form stays exact.
pub fn normalised(nodes: &NodeSet) -> (NodeSet, f64) {
    let c = nodes.centered();
    let rho = c.radius();
    if rho == 0.0 {
        return (c, 1.0);
    }
    (NodeSet { points: c.points / rho }, rho)
}

fn absorb_radius(w: &mut DMatrix<f64>, scaling: &DiagonalScaling, rho: f64) {
    let nu: Vec<f64> = scaling.expand().iter().map(|e| rho.powf(e.to_f64())).collect();
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            w[(i, j)] *= nu[i] * nu[j];
        }
    }
}

/// Block QR of V_{≤s}. Degree and rank decisions all read from it, so that they agree
/// with the QR used to build H.
fn staged_qr(nodes: &NodeSet, s: usize, rank_tol: f64) -> Result<BlockQr> {
    let (v, widths) = vandermonde(nodes, s);
    block_rrqr_partial(&v, &widths, rank_tol)
}

fn staged_rank(nodes: &NodeSet, s: usize, rank_tol: f64) -> usize {
    staged_qr(nodes, s, rank_tol).map(|q| q.ranks.iter().sum()).unwrap_or(0)
}

/// Smallest D with rank V_{≤D} = n, if it exists within `limit`.
pub fn unisolvent_degree(nodes: &NodeSet, limit: usize, rank_tol: f64) -> Option<usize> {
    (0..=limit).find(|&s| staged_rank(nodes, s, rank_tol) == nodes.n())
}

/// rank V_{≤s} for s = 0..=max_s.
pub fn vandermonde_ranks(nodes: &NodeSet, max_s: usize, rank_tol: f64) -> Vec<usize> {
    (0..=max_s).map(|s| vandermonde_rank(&vandermonde(nodes, s).0, rank_tol)).collect()
}

fn degree_scaling(widths: &[usize]) -> Vec<(Exponent, usize)> {
    widths.iter().enumerate().map(|(j, &a)| (Exponent::int(j as i64), a)).collect()
}

/// K(ε) = V_{≤D} Δ W_{≤D} Δ V_{≤D}ᵀ + o(·) with D minimal, V on normalised nodes.
pub fn smooth_flat_limit(kernel: &KernelModel, nodes: &NodeSet, rank_tol: f64) -> Result<GkfForm> {
    let (c, rho) = normalised(nodes);
    let limit = match kernel.regularity {
        Regularity::Finite(r) => r - 1,
        Regularity::Infinite { .. } => c.n() - 1,
    };
    let deg = unisolvent_degree(&c, limit, rank_tol).ok_or_else(|| {
        AseError::InsufficientSmoothness(format!(
            "rank V_(<= {limit}) < n; the finitely smooth construction applies"
        ))
    })?;
    let (v, widths) = vandermonde(&c, deg);
    let mut w = wronskian(kernel, c.d(), deg)?;
    let scaling = DiagonalScaling::new(degree_scaling(&widths))?;
    absorb_radius(&mut w, &scaling, rho);
    GkfForm::new(v, scaling, w)
}

/// Adds the block A (orthonormal complement of range V_{≤r−1}) at ν = r − 1/2 with
/// W block ψ_{2r−1} Aᵀ D^{(2r−1)} A.
pub fn finite_smooth_flat_limit(kernel: &KernelModel, nodes: &NodeSet, rank_tol: f64) -> Result<GkfForm> {
    let r = kernel
        .regularity
        .finite()
        .ok_or_else(|| AseError::InvalidInput("finite-smoothness construction needs a finite regularity".into()))?;
    let (c, rho) = normalised(nodes);
    let n = c.n();
    let (vp, widths) = vandermonde(&c, r - 1);
    let qr = block_rrqr_partial(&vp, &widths, rank_tol)?;
    if qr.ranks.iter().sum::<usize>() == n {
        return Err(AseError::SmoothBranchApplies { degree: r - 1, n });
    }
    let a = linalg::complement_basis(&qr.q(), 0.5);
    let q = (2 * r - 1) as u32;
    let wa = (a.transpose() * distance_matrix(&c, q) * &a) * kernel.coeff(2 * r - 1)?;
    let wp = wronskian(kernel, c.d(), r - 1)?;
    let m = vp.ncols() + a.ncols();
    let mut v = DMatrix::zeros(n, m);
    v.columns_mut(0, vp.ncols()).copy_from(&vp);
    v.columns_mut(vp.ncols(), a.ncols()).copy_from(&a);
    let mut w = DMatrix::zeros(m, m);
    w.view_mut((0, 0), (wp.nrows(), wp.ncols())).copy_from(&wp);
    w.view_mut((vp.ncols(), vp.ncols()), (a.ncols(), a.ncols())).copy_from(&linalg::sym_part(&wa));
    let mut blocks = degree_scaling(&widths);
    blocks.push((Exponent::frac(2 * r as i64 - 1, 2), a.ncols()));
    let scaling = DiagonalScaling::new(blocks)?;
    absorb_radius(&mut w, &scaling, rho);
    GkfForm::new(v, scaling, w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelBranch {
    Smooth,
    FinitelySmooth,
}

#[derive(Clone, Debug)]
pub struct KernelAse {
    pub ase: Ase,
    pub form: GkfForm,
    pub branch: KernelBranch,
    /// b_j from the block QR, one per scaling block.
    pub block_ranks: Vec<usize>,
}

impl KernelAse {
    /// (valuation, size) per group of the ASE.
    pub fn group_sizes(&self) -> Vec<(Exponent, usize)> {
        self.ase.valuations().into_iter().zip(self.ase.group_ranks()).collect()
    }
}

/// Dispatches between the smooth and finitely smooth constructions and runs the GKF pipeline.
pub fn kernel_ase(kernel: &KernelModel, nodes: &NodeSet, rank_tol: f64) -> Result<KernelAse> {
    let smooth = match kernel.regularity {
        Regularity::Infinite { .. } => true,
        Regularity::Finite(r) => {
            staged_rank(&normalised(nodes).0, r - 1, rank_tol) == nodes.n()
        }
    };
    let (form, branch) = if smooth {
        (smooth_flat_limit(kernel, nodes, rank_tol)?, KernelBranch::Smooth)
    } else {
        (finite_smooth_flat_limit(kernel, nodes, rank_tol)?, KernelBranch::FinitelySmooth)
    };
    let (ase, qr, _) = ase_from_gkf_with(&form, rank_tol, DEFAULT_RANK_TOL)?;
    Ok(KernelAse { ase, form, branch, block_ranks: qr.ranks })
}
