//! Iterative ASE extraction for matrices without a usable generalized kernel form.
//!
//! Each step either resolves the leading blocks of a maximal scaling and pushes the Schur
//! complement of the rest, or rotates the leading coefficient to diagonal form and splits
//! off its range. Pieces carry an orthonormal frame so that terms are reported in the
//! original coordinates.

use nalgebra::DMatrix;

use crate::ase::{ase_from_scaled, schur_chain, Ase, AseGroup};
use crate::error::{AseError, Result};
use crate::exponent::{min_exp, Exponent};
use crate::linalg;
use crate::scaling::{auto_scale, extract_h, DiagonalScaling};
use crate::series::{MatrixSeries, ValuationMatrix};

/// K(ε) = Δ H(ε) Δ with Δ = diag(ε^{γ_1}, …, ε^{γ_m}, ε^s I_{n−m}) and γ_m < s.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedScaledSeries {
    pub top: Vec<Exponent>,
    pub s: Exponent,
    pub h: MatrixSeries,
}

impl PartitionedScaledSeries {
    pub fn new(top: Vec<Exponent>, s: Exponent, h: MatrixSeries) -> Result<Self> {
        let m = top.len();
        if !h.is_symmetric() || h.nrows() < m {
            return Err(AseError::InvalidInput("H must be symmetric with at least m rows".into()));
        }
        if top.iter().any(|g| *g >= s) || !s.is_finite() {
            return Err(AseError::InvalidScaling("top exponents must lie strictly below s".into()));
        }
        let h11 = h.block(0, m, 0, m).coeff(Exponent::ZERO);
        if m > 0 && linalg::equilibrated_cond_ratio(&h11) <= crate::ase::DEFAULT_RANK_TOL {
            return Err(AseError::LeadingTermSingular { ratio: linalg::cond_ratio(&h11) });
        }
        Ok(PartitionedScaledSeries { top, s, h })
    }

    pub fn m(&self) -> usize {
        self.top.len()
    }

    /// The represented K(ε) = Δ H Δ.
    pub fn matrix(&self) -> Result<MatrixSeries> {
        let d = self.exponents();
        self.h.scale_entries(&d, &d)
    }

    fn exponents(&self) -> Vec<Exponent> {
        let mut d = self.top.clone();
        d.resize(self.h.nrows(), self.s);
        d
    }
}

/// ε^{2s}(H22 − H21 H11⁻¹ H12); entries cancelling to within `tol` are flushed.
fn schur_bottom(h: &MatrixSeries, m: usize, s: Exponent, tol: f64) -> Result<MatrixSeries> {
    let n = h.nrows();
    let h11 = h.block(0, m, 0, m);
    let h12 = h.block(0, m, m, n - m);
    let h21 = h.block(m, n - m, 0, m);
    let h22 = h.block(m, n - m, m, n - m);
    let inv = h11.inverse(h.trunc_order())?;
    let t = h21.mul(&inv)?.mul(&h12)?;
    Ok(h22.sub_cancelling(&t, tol)?.symmetrize()?.shift(s.times(2)))
}

/// A22 − A21 A11⁻¹ A12 for A11 = Δ_t H11 Δ_t, inverting only the unscaled H11 so that
/// the horizon of every block survives.
fn schur_direct(a: &MatrixSeries, top: &[Exponent], tol: f64) -> Result<MatrixSeries> {
    let n = a.nrows();
    let m = top.len();
    let zeros = vec![Exponent::ZERO; n - m];
    let neg: Vec<Exponent> = top.iter().map(|x| -*x).collect();
    let h11 = a.block(0, m, 0, m).scale_entries(&neg, &neg)?;
    let x = a.block(m, n - m, 0, m).scale_entries(&zeros, &neg)?;
    let inv = h11.inverse(h11.trunc_order())?;
    let t = x.mul(&inv)?.mul(&x.transpose())?;
    a.block(m, n - m, m, n - m).sub_cancelling(&t, tol)?.symmetrize()
}

/// blockdiag(Δ_m H11 Δ_m, ε^{2s}(H22 − H21 H11⁻¹ H12)), truncated at `order`.
pub fn schur_reduce(p: &PartitionedScaledSeries, order: Exponent) -> Result<MatrixSeries> {
    let m = p.m();
    let h11 = p.h.block(0, m, 0, m);
    let top = h11.scale_entries(&p.top, &p.top)?;
    let bottom = schur_bottom(&p.h, m, p.s, 0.0)?;
    Ok(MatrixSeries::block_diag(&top, &bottom).truncate(order))
}

struct Piece {
    a: MatrixSeries,
    frame: DMatrix<f64>,
    depth: usize,
}

#[derive(Default)]
struct Collected {
    groups: Vec<AseGroup>,
    truncated_at: Option<Exponent>,
}

impl Collected {
    fn truncate(&mut self, t: Exponent) {
        self.truncated_at = Some(self.truncated_at.map_or(t, |x| min_exp(x, t)));
    }

    fn emit(&mut self, valuation: Exponent, frame: &DMatrix<f64>, term: &DMatrix<f64>) {
        self.groups.push(AseGroup { valuation, term: frame * term * frame.transpose() });
    }
}

fn columns(frame: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(frame.nrows(), idx.len(), |r, c| frame[(r, idx[c])])
}

/// Valuation matrix with entries unknown beyond the horizon capped at it.
fn capped_valuations(a: &MatrixSeries) -> Result<ValuationMatrix> {
    let t = a.trunc_order();
    let rows = a.valuation_matrix().to_rows().into_iter().map(|r| r.into_iter().map(|v| min_exp(v, t)).collect()).collect();
    ValuationMatrix::from_rows(rows)
}

/// One-shot ASE from a maximally tight scaling, rows permuted into valuation order and back.
/// Truncated when the Schur chain meets a singular complement.
pub fn auto_scaled_ase(k: &MatrixSeries, rank_tol: f64) -> Result<Ase> {
    if !k.is_symmetric() {
        return Err(AseError::InvalidInput("a symmetric series is required".into()));
    }
    let auto = auto_scale(&capped_valuations(k)?)?;
    let form = extract_h(&k.select(&auto.order), &auto.scaling)?;
    let n = k.nrows();
    ase_from_scaled(&form, rank_tol)?.embed(&columns(&DMatrix::identity(n, n), &auto.order))
}

/// Iterative Schur-complement reduction with rotations; never returns a silently wrong
/// answer: whatever cannot be resolved within the horizon or depth sets `truncated_at`.
pub fn iterative_ase(k: &MatrixSeries, rank_tol: f64, max_depth: usize) -> Result<Ase> {
    if !k.is_symmetric() {
        return Err(AseError::InvalidInput("iterative_ase needs a symmetric series".into()));
    }
    let n = k.nrows();
    let mut out = Collected::default();
    let mut stack = vec![Piece { a: practical_horizon(k), frame: DMatrix::identity(n, n), depth: 0 }];
    while let Some(piece) = stack.pop() {
        step(piece, rank_tol, max_depth, &mut out, &mut stack)?;
    }
    Ase::new(n, out.groups, out.truncated_at)
}

/// An exact non-constant series cannot be inverted to infinite order. Eigenvalue valuations of
/// a nonsingular polynomial matrix are at most n·p, so truncating at 2(n·p + 1) loses nothing
/// the reduction can resolve.
fn practical_horizon(k: &MatrixSeries) -> MatrixSeries {
    let top = k.terms().keys().filter(|e| e.is_finite()).max().copied().unwrap_or(Exponent::int(0));
    if k.trunc_order().is_finite() || top.is_zero() {
        return k.clone();
    }
    k.truncate((top.times(k.nrows() as i64) + Exponent::int(1)).times(2))
}

fn step(piece: Piece, rank_tol: f64, max_depth: usize, out: &mut Collected, stack: &mut Vec<Piece>) -> Result<()> {
    let Piece { a, frame, depth } = piece;
    let m = a.nrows();
    if m == 0 {
        return Ok(());
    }
    if a.is_zero() {
        out.truncate(a.trunc_order());
        return Ok(());
    }
    if depth >= max_depth {
        out.truncate(a.valuation());
        return Ok(());
    }
    let omega = a.valuation_matrix();
    let (zero, live): (Vec<usize>, Vec<usize>) =
        (0..m).partition(|&i| omega.row(i).iter().all(|v| !v.is_finite()));
    if !zero.is_empty() {
        out.truncate(a.trunc_order());
        stack.push(Piece { a: a.select(&live), frame: columns(&frame, &live), depth });
        return Ok(());
    }
    if let Some(()) = try_scaled(&a, &frame, depth, rank_tol, out, stack)? {
        return Ok(());
    }
    rotate(&a, &frame, depth, rank_tol, out, stack)
}

/// Maximal scaling, chain, and Schur complement of the unresolved blocks.
/// Returns `None` when the rotation step should handle this piece instead.
fn try_scaled(
    a: &MatrixSeries,
    frame: &DMatrix<f64>,
    depth: usize,
    rank_tol: f64,
    out: &mut Collected,
    stack: &mut Vec<Piece>,
) -> Result<Option<()>> {
    let Ok(auto) = capped_valuations(a).and_then(|om| auto_scale(&om)) else {
        return Ok(None);
    };
    let ap = a.select(&auto.order);
    let fp = columns(frame, &auto.order);
    let Ok(form) = extract_h(&ap, &auto.scaling) else {
        return Ok(None);
    };
    let chain = schur_chain(&form.h, &form.block_sizes, rank_tol)?;
    let sizes = &form.block_sizes;
    let j = chain.complements.len() - 1;
    if chain.stopped_early && j == 0 {
        return Ok(None);
    }
    let resolved = if chain.stopped_early { j } else { j + 1 };
    let mut off = 0;
    let mut emitted = Vec::new();
    for (i, s) in chain.complements.iter().take(resolved).enumerate() {
        let idx: Vec<usize> = (off..off + sizes[i]).collect();
        emitted.push((auto.scaling.nu(i).times(2), columns(&fp, &idx), s.clone()));
        off += sizes[i];
    }
    if chain.stopped_early {
        let mtop = off;
        let top: Vec<Exponent> = auto.scaling.expand().into_iter().take(mtop).collect();
        let Ok(bottom) = schur_direct(&ap, &top, rank_tol) else {
            return Ok(None);
        };
        let idx: Vec<usize> = (mtop..ap.nrows()).collect();
        stack.push(Piece { a: bottom, frame: columns(&fp, &idx), depth: depth + 1 });
    }
    for (v, f, s) in emitted {
        out.emit(v, &f, &s);
    }
    Ok(Some(()))
}

/// Diagonalises the leading coefficient ε^γ L, resolves range(L) at valuation γ, and
/// pushes the Schur complement of the null-space part.
fn rotate(
    a: &MatrixSeries,
    frame: &DMatrix<f64>,
    depth: usize,
    rank_tol: f64,
    out: &mut Collected,
    stack: &mut Vec<Piece>,
) -> Result<()> {
    let m = a.nrows();
    let gamma = a.valuation();
    let l = a.coeff(gamma);
    let (vals, vecs) = linalg::sym_eigen_desc(&l);
    let top = vals.iter().fold(0.0f64, |x, v| x.max(v.abs()));
    let mut order: Vec<usize> = (0..m).filter(|&i| vals[i].abs() > rank_tol * top).collect();
    let k = order.len();
    order.extend((0..m).filter(|&i| vals[i].abs() <= rank_tol * top));
    let q = columns(&vecs, &order);
    let mu: Vec<f64> = order.iter().take(k).map(|&i| vals[i]).collect();
    let q_top = q.columns(0, k).into_owned();
    out.emit(gamma, &(frame * &q_top), &DMatrix::from_diagonal(&nalgebra::DVector::from_vec(mu.clone())));
    if k == m {
        return Ok(());
    }

    let rotated = a.congruence(&q)?;
    let trunc = rotated.trunc_order();
    let mut terms = Vec::new();
    for (e, c) in rotated.terms() {
        let scale = a.coeff(*e).amax();
        let mut c = linalg::sym_part(c);
        c.iter_mut().filter(|x| x.abs() <= rank_tol * scale).for_each(|x| *x = 0.0);
        if *e == gamma {
            c = DMatrix::zeros(m, m);
            for (i, v) in mu.iter().enumerate() {
                c[(i, i)] = *v;
            }
        }
        terms.push((*e, c));
    }
    let rotated = MatrixSeries::new(m, m, terms, trunc, true)?;
    let frame_q = frame * &q;
    let bot: Vec<usize> = (k..m).collect();

    match schur_direct(&rotated, &vec![gamma.half(); k], rank_tol) {
        Ok(b) => stack.push(Piece { a: b, frame: columns(&frame_q, &bot), depth: depth + 1 }),
        Err(_) => out.truncate(gamma),
    }
    Ok(())
}

/// Scaling used by `iterative_ase` on a piece, exposed for diagnostics.
pub fn leading_scaling(a: &MatrixSeries) -> Result<DiagonalScaling> {
    let om = capped_valuations(a)?;
    auto_scale(&om).map(|s| s.scaling)
}
