//! Generalized kernel form K(ε) = VΔ(W + o(1))ΔVᵀ.
//!
//! A block QR of V turns the form into a diagonally scaled one whose H is
//! blockdiag(R_ii) W blockdiag(R_ii)ᵀ; the chain on H then gives the ASE.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::ase::{schur_chain, Ase, AseGroup, SchurChain};
use crate::error::{AseError, Result};
use crate::linalg;
use crate::scaling::{DiagonalScaling, ScalingBlock};
use crate::series::MatrixSeries;

#[derive(Clone, Debug, PartialEq)]
pub struct GkfForm {
    pub v: DMatrix<f64>,
    pub scaling: DiagonalScaling,
    pub w: DMatrix<f64>,
}

impl GkfForm {
    pub fn new(v: DMatrix<f64>, scaling: DiagonalScaling, w: DMatrix<f64>) -> Result<Self> {
        let m = scaling.dim();
        if v.ncols() != m || w.nrows() != m || w.ncols() != m {
            return Err(AseError::DimensionMismatch {
                expected: format!("V with {m} columns and W {m}x{m}"),
                found: format!("V {}x{}, W {}x{}", v.nrows(), v.ncols(), w.nrows(), w.ncols()),
            });
        }
        if (&w - w.transpose()).amax() > 1e-12 * w.amax() {
            return Err(AseError::InvalidInput("W is not symmetric".into()));
        }
        let w = linalg::sym_part(&w);
        Ok(GkfForm { v, scaling, w })
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.scaling.block_sizes()
    }

    /// VΔWΔVᵀ as an exact (polynomial) series.
    pub fn to_series(&self) -> Result<MatrixSeries> {
        let widths = self.widths();
        let off = offsets(&widths);
        let n = self.n();
        let mut terms = Vec::new();
        for i in 0..widths.len() {
            for j in 0..widths.len() {
                let vi = self.v.columns(off[i], widths[i]);
                let vj = self.v.columns(off[j], widths[j]);
                let wij = self.w.view((off[i], off[j]), (widths[i], widths[j]));
                let m = vi * wij * vj.transpose();
                terms.push((self.scaling.nu(i) + self.scaling.nu(j), m));
            }
        }
        let mut acc: std::collections::BTreeMap<_, DMatrix<f64>> = Default::default();
        for (e, m) in terms {
            *acc.entry(e).or_insert_with(|| DMatrix::zeros(n, n)) += m;
        }
        let terms = acc.into_iter().map(|(e, m)| (e, linalg::sym_part(&m)));
        MatrixSeries::new(n, n, terms, crate::Exponent::PLUS_INFINITY, true)
    }

    /// VΔ(ε)WΔ(ε)Vᵀ at a numeric ε.
    pub fn evaluate(&self, eps: f64) -> DMatrix<f64> {
        let d: Vec<f64> = self.scaling.expand().iter().map(|e| e.pow(eps)).collect();
        let vd = DMatrix::from_fn(self.v.nrows(), self.v.ncols(), |i, j| self.v[(i, j)] * d[j]);
        linalg::sym_part(&(&vd * &self.w * vd.transpose()))
    }

    /// Parses `{"V":[[..]],"W":[[..]],"valuations":[{"nu":..,"mult":..}]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(rename = "V")]
            v: Vec<Vec<f64>>,
            #[serde(rename = "W")]
            w: Vec<Vec<f64>>,
            valuations: Vec<ScalingBlock>,
        }
        let raw: Raw = serde_json::from_str(s).map_err(|e| AseError::InvalidInput(format!("GKF JSON: {e}")))?;
        let v = linalg::from_rows(&raw.v).ok_or_else(|| AseError::InvalidInput("GKF JSON: V rows differ in length".into()))?;
        let w = linalg::from_rows(&raw.w).ok_or_else(|| AseError::InvalidInput("GKF JSON: W rows differ in length".into()))?;
        let scaling = DiagonalScaling::new(raw.valuations.into_iter().map(|b| (b.nu, b.mult)).collect())?;
        GkfForm::new(v, scaling, w)
    }
}

/// W counts as singular when σ_min/σ_max, with or without equilibration, is at rounding level.
pub const W_SINGULAR_TOL: f64 = 1e-14;

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut o = vec![0];
    for s in sizes {
        o.push(o.last().unwrap() + s);
    }
    o
}

/// V = QR with Q = [Q_0 … Q_p] orthonormal and R block upper triangular.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockQr {
    pub q_blocks: Vec<DMatrix<f64>>,
    /// n×m, rows grouped by `ranks`, columns by `widths`.
    pub r: DMatrix<f64>,
    pub ranks: Vec<usize>,
    pub widths: Vec<usize>,
}

impl BlockQr {
    pub fn q(&self) -> DMatrix<f64> {
        let n = self.q_blocks.first().map(|q| q.nrows()).unwrap_or(0);
        let cols: usize = self.ranks.iter().sum();
        let mut out = DMatrix::zeros(n, cols);
        let mut c = 0;
        for qb in &self.q_blocks {
            out.columns_mut(c, qb.ncols()).copy_from(qb);
            c += qb.ncols();
        }
        out
    }

    /// R_{i,j}, of size b_i × a_j.
    pub fn r_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let ro = offsets(&self.ranks);
        let co = offsets(&self.widths);
        self.r.view((ro[i], co[j]), (self.ranks[i], self.widths[j])).into_owned()
    }

    /// blockdiag(R_00, …, R_pp), of size n × m.
    pub fn diag_r(&self) -> DMatrix<f64> {
        let ro = offsets(&self.ranks);
        let co = offsets(&self.widths);
        let mut out = DMatrix::zeros(self.r.nrows(), self.r.ncols());
        for i in 0..self.ranks.len() {
            out.view_mut((ro[i], co[i]), (self.ranks[i], self.widths[i])).copy_from(&self.r_block(i, i));
        }
        out
    }
}

/// Block rank-revealing QR: each block is orthogonalised (twice) against the previous
/// ones, and the residual's rank is read from singular values above rank_tol·σ_max(V).
pub fn block_rrqr(v: &DMatrix<f64>, widths: &[usize], rank_tol: f64) -> Result<BlockQr> {
    let qr = block_rrqr_partial(v, widths, rank_tol)?;
    let total: usize = qr.ranks.iter().sum();
    if total < v.nrows() {
        return Err(AseError::RankDeficient { rank: total, n: v.nrows() });
    }
    Ok(qr)
}

/// As [`block_rrqr`], but a total rank below n is allowed; Q then spans range(V) only.
pub fn block_rrqr_partial(v: &DMatrix<f64>, widths: &[usize], rank_tol: f64) -> Result<BlockQr> {
    let n = v.nrows();
    if widths.iter().sum::<usize>() != v.ncols() {
        return Err(AseError::DimensionMismatch {
            expected: format!("widths summing to {}", v.ncols()),
            found: format!("{:?}", widths),
        });
    }
    let smax = linalg::singular_values(v).first().copied().unwrap_or(0.0);
    let thr = rank_tol * smax;
    let co = offsets(widths);
    let mut q = DMatrix::<f64>::zeros(n, 0);
    let mut q_blocks = Vec::new();
    let mut ranks = Vec::new();
    for (i, &a) in widths.iter().enumerate() {
        let mut x = v.columns(co[i], a).into_owned();
        for _ in 0..2 {
            x -= &q * (q.transpose() * &x);
        }
        let b = if x.ncols() == 0 || q.ncols() == n {
            0
        } else {
            let svd = x.clone().svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            let mut idx: Vec<usize> = (0..svd.singular_values.len()).filter(|&k| svd.singular_values[k] > thr).collect();
            idx.sort_by(|&p, &r| svd.singular_values[r].total_cmp(&svd.singular_values[p]));
            idx.truncate(n - q.ncols());
            let mut qi = DMatrix::from_fn(n, idx.len(), |r, c| u[(r, idx[c])]);
            linalg::fix_signs(&mut qi);
            let b = qi.ncols();
            q = DMatrix::from_fn(n, q.ncols() + b, |r, c| if c < q.ncols() { q[(r, c)] } else { qi[(r, c - q.ncols())] });
            q_blocks.push(qi);
            b
        };
        if b == 0 {
            return Err(AseError::ZeroRankBlock { block: i });
        }
        ranks.push(b);
    }
    let mut r = q.transpose() * v;
    let ro = offsets(&ranks);
    for i in 0..ranks.len() {
        for j in 0..i {
            r.view_mut((ro[i], co[j]), (ranks[i], widths[j])).fill(0.0);
        }
    }
    Ok(BlockQr { q_blocks, r, ranks, widths: widths.to_vec() })
}

/// H = blockdiag(R_ii) W blockdiag(R_ii)ᵀ, with row blocks b_i.
pub fn build_h(qr: &BlockQr, w: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let d = qr.diag_r();
    (linalg::sym_part(&(&d * w * d.transpose())), qr.ranks.clone())
}

/// ASE Σ ε^{2ν_i} Q_i S_i Q_iᵀ; `qr_tol` drives the block ranks, `chain_tol` the chain.
pub fn ase_from_gkf_with(form: &GkfForm, qr_tol: f64, chain_tol: f64) -> Result<(Ase, BlockQr, SchurChain)> {
    let ratio = linalg::cond_ratio(&form.w).max(linalg::equilibrated_cond_ratio(&form.w));
    if ratio <= W_SINGULAR_TOL {
        return Err(AseError::SingularW { ratio });
    }
    let qr = block_rrqr(&form.v, &form.widths(), qr_tol)?;
    let (h, sizes) = build_h(&qr, &form.w);
    let chain = schur_chain(&h, &sizes, chain_tol)?;
    let n = form.n();
    let h_scale = h.amax();
    let last = chain.complements.len() - 1;
    let mut groups = Vec::new();
    for (i, s) in chain.complements.iter().enumerate() {
        let s = if chain.stopped_early && i == last { crate::ase::nonzero_part(s, h_scale, chain_tol) } else { s.clone() };
        let qi = &qr.q_blocks[i];
        groups.push(AseGroup { valuation: form.scaling.nu(i).times(2), term: qi * s * qi.transpose() });
    }
    let truncated_at = chain.stopped_early.then(|| form.scaling.nu(last).times(2));
    let ase = Ase::new(n, groups, truncated_at)?;
    Ok((ase, qr, chain))
}

pub fn ase_from_gkf(form: &GkfForm, rank_tol: f64) -> Result<Ase> {
    ase_from_gkf_with(form, rank_tol, rank_tol).map(|r| r.0)
}

/// R_jj (W_jj − W_{j,<j} W_{<j,<j}⁻¹ W_{<j,j}) R_jjᵀ, valid when every R_ii with i < j is square.
pub fn simplified_schur(w: &DMatrix<f64>, qr: &BlockQr, j: usize) -> Result<DMatrix<f64>> {
    if j >= qr.ranks.len() {
        return Err(AseError::InvalidInput(format!("block {j} out of range")));
    }
    if let Some(i) = (0..j).find(|&i| qr.ranks[i] != qr.widths[i]) {
        return Err(AseError::SimplifiedSchurPrecondition { block: i });
    }
    let co = offsets(&qr.widths);
    let p = co[j];
    let a = qr.widths[j];
    let wjj = w.view((p, p), (a, a)).into_owned();
    let s = if p == 0 {
        wjj
    } else {
        let w11 = w.view((0, 0), (p, p)).into_owned();
        let w12 = w.view((0, p), (p, a)).into_owned();
        let x = w11.lu().solve(&w12).ok_or(AseError::SingularW { ratio: 0.0 })?;
        wjj - w12.transpose() * x
    };
    let rjj = qr.r_block(j, j);
    Ok(linalg::sym_part(&(&rjj * s * rjj.transpose())))
}
