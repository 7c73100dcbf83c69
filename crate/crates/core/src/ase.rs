//! The asymptotic spectral equivalent K̄(ε) = Σ ε^{α_i} K̄_i and the ways to obtain
//! and read it: Schur complement chains on a scaled form, eigen readout, and
//! regularised-inverse probes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AseError, Result};
use crate::exponent::Exponent;
use crate::linalg;
use crate::scaling::ScaledForm;
use crate::series::MatrixSeries;

/// Default invertibility tolerance for Schur chains.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Relative gap below which two leading coefficients count as tied.
pub const TIE_TOL: f64 = 1e-9;
/// Eigenvalues of an ASE term below this fraction of its largest are treated as zero.
const TERM_RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AseGroup {
    pub valuation: Exponent,
    pub term: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ase {
    pub n: usize,
    pub groups: Vec<AseGroup>,
    /// Present iff some eigenvalues were not identified; they are o(ε^{truncated_at}).
    pub truncated_at: Option<Exponent>,
}

impl Ase {
    /// Sorts groups, merges equal valuations, symmetrises terms and drops zero ones.
    pub fn new(n: usize, groups: Vec<AseGroup>, truncated_at: Option<Exponent>) -> Result<Self> {
        let mut merged: Vec<AseGroup> = Vec::new();
        let mut groups = groups;
        groups.sort_by_key(|g| g.valuation);
        for g in groups {
            if g.term.nrows() != n || g.term.ncols() != n {
                return Err(AseError::DimensionMismatch {
                    expected: format!("{n}x{n} term"),
                    found: format!("{}x{}", g.term.nrows(), g.term.ncols()),
                });
            }
            if !g.valuation.is_finite() {
                return Err(AseError::InvalidExponent("group valuation must be finite".into()));
            }
            match merged.last_mut() {
                Some(last) if last.valuation == g.valuation => last.term += g.term,
                _ => merged.push(g),
            }
        }
        for g in &mut merged {
            g.term = linalg::sym_part(&g.term);
        }
        merged.retain(|g| !linalg::is_zero(&g.term));
        Ok(Ase { n, groups: merged, truncated_at })
    }

    pub fn is_complete(&self) -> bool {
        self.truncated_at.is_none()
    }

    pub fn valuations(&self) -> Vec<Exponent> {
        self.groups.iter().map(|g| g.valuation).collect()
    }

    /// Numerical rank of each group term.
    pub fn group_ranks(&self) -> Vec<usize> {
        self.groups.iter().map(|g| term_rank(&g.term)).collect()
    }

    pub fn rank_sum(&self) -> usize {
        self.group_ranks().iter().sum()
    }

    /// Σ ε^{α_i} K̄_i at a numeric ε.
    pub fn evaluate(&self, eps: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for g in &self.groups {
            out += &g.term * g.valuation.pow(eps);
        }
        out
    }

    /// Checks symmetry, nonzero terms, pairwise orthogonality and rank accounting.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for w in self.groups.windows(2) {
            if w[0].valuation >= w[1].valuation {
                return Err("valuations are not strictly increasing".into());
            }
        }
        for (i, g) in self.groups.iter().enumerate() {
            if (&g.term - g.term.transpose()).norm() > 1e-12 * g.term.norm().max(1.0) {
                return Err(format!("term {i} is not symmetric"));
            }
            if linalg::is_zero(&g.term) {
                return Err(format!("term {i} is zero"));
            }
        }
        for i in 0..self.groups.len() {
            for j in (i + 1)..self.groups.len() {
                let a = &self.groups[i].term;
                let b = &self.groups[j].term;
                let cross = (a.transpose() * b).norm();
                if cross > 1e-10 * a.norm() * b.norm() {
                    return Err(format!("terms {i} and {j} are not orthogonal ({cross:e})"));
                }
            }
        }
        let r = self.rank_sum();
        match (self.truncated_at, r.cmp(&self.n)) {
            (None, std::cmp::Ordering::Equal) => Ok(()),
            (Some(_), std::cmp::Ordering::Less) => Ok(()),
            (None, _) => Err(format!("complete ASE has rank sum {r} != n = {}", self.n)),
            (Some(_), _) => Err(format!("truncated ASE has rank sum {r} >= n = {}", self.n)),
        }
    }

    /// Terms expressed in a new basis: K̄_i ↦ B K̄_i Bᵀ, with B of shape N×n.
    pub fn embed(&self, frame: &DMatrix<f64>) -> Result<Ase> {
        if frame.ncols() != self.n {
            return Err(AseError::DimensionMismatch {
                expected: format!("{} frame columns", self.n),
                found: format!("{}", frame.ncols()),
            });
        }
        let groups = self
            .groups
            .iter()
            .map(|g| AseGroup { valuation: g.valuation, term: frame * &g.term * frame.transpose() })
            .collect();
        Ase::new(frame.nrows(), groups, self.truncated_at)
    }
}

fn term_rank(term: &DMatrix<f64>) -> usize {
    linalg::nonzero_eigenpairs(term, TERM_RANK_TOL).0.len()
}

/// Leading eigen-data of one group: λ_{i,k}(ε) = ε^{α_i}(λ̃_{i,k} + o(1)).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralGroup {
    pub valuation: Exponent,
    /// λ̃ in decreasing order.
    pub leading_values: Vec<f64>,
    /// n×c orthonormal columns; individual eigenvectors only when `ambiguous` is false.
    pub vectors: DMatrix<f64>,
    pub ambiguous: bool,
    pub projector: DMatrix<f64>,
}

impl SpectralGroup {
    pub fn count(&self) -> usize {
        self.leading_values.len()
    }
}

/// Eigendecomposition of each ASE term restricted to its range.
pub fn eigen_readout(ase: &Ase) -> Vec<SpectralGroup> {
    ase.groups
        .iter()
        .map(|g| {
            let (vals, vecs) = linalg::nonzero_eigenpairs(&g.term, TERM_RANK_TOL);
            let ambiguous = vals.windows(2).any(|w| (w[0] - w[1]).abs() <= TIE_TOL * w[0].abs().max(w[1].abs()));
            let projector = &vecs * vecs.transpose();
            SpectralGroup { valuation: g.valuation, leading_values: vals, vectors: vecs, ambiguous, projector }
        })
        .collect()
}

/// Schur complements S_i = H_ii − H_{i,<i} H_{<i,<i}⁻¹ H_{<i,i} along a block partition.
#[derive(Clone, Debug, PartialEq)]
pub struct SchurChain {
    pub complements: Vec<DMatrix<f64>>,
    /// The last leading block H_{≤j} failed the invertibility test; S_j is still reported.
    pub stopped_early: bool,
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut o = vec![0];
    for s in sizes {
        o.push(o.last().unwrap() + s);
    }
    o
}

/// Incremental block elimination. The invertibility test uses σ_min/σ_max of the
/// row-equilibrated leading block H_{≤i}, so that graded magnitudes alone never stop it.
pub fn schur_chain(h: &DMatrix<f64>, block_sizes: &[usize], rank_tol: f64) -> Result<SchurChain> {
    let n = h.nrows();
    if h.ncols() != n || block_sizes.iter().sum::<usize>() != n {
        return Err(AseError::DimensionMismatch {
            expected: format!("block sizes summing to {n}"),
            found: format!("{:?}", block_sizes),
        });
    }
    if block_sizes.contains(&0) {
        return Err(AseError::InvalidInput("block sizes must be positive".into()));
    }
    let off = offsets(block_sizes);
    let mut trailing = linalg::sym_part(h);
    let mut complements = Vec::new();
    for (i, &b) in block_sizes.iter().enumerate() {
        let s = linalg::sym_part(&trailing.view((0, 0), (b, b)).into_owned());
        complements.push(s.clone());
        let lead = h.view((0, 0), (off[i + 1], off[i + 1])).into_owned();
        if linalg::equilibrated_cond_ratio(&lead) <= rank_tol {
            return Ok(SchurChain { complements, stopped_early: true });
        }
        let rest = trailing.nrows() - b;
        if rest == 0 {
            break;
        }
        let s_inv = s.clone().try_inverse().ok_or_else(|| {
            AseError::Decomposition("Schur complement passed the rank test but could not be inverted".into())
        })?;
        let t_ri = trailing.view((b, 0), (rest, b)).into_owned();
        let t_rr = trailing.view((b, b), (rest, rest)).into_owned();
        trailing = linalg::sym_part(&(t_rr - &t_ri * s_inv * t_ri.transpose()));
    }
    Ok(SchurChain { complements, stopped_early: false })
}

fn embed_block(n: usize, offset: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((offset, offset), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Part of a singular final complement that survives the zero threshold.
pub(crate) fn nonzero_part(s: &DMatrix<f64>, h_scale: f64, rank_tol: f64) -> DMatrix<f64> {
    let (vals, vecs) = linalg::sym_eigen_desc(s);
    let top = vals.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let thr = (1e-8 * top).max(rank_tol * h_scale);
    let mut out = DMatrix::zeros(s.nrows(), s.ncols());
    for (k, mu) in vals.iter().enumerate() {
        if mu.abs() > thr {
            let v = vecs.column(k);
            out += v * v.transpose() * *mu;
        }
    }
    out
}

/// ASE of K = Δ(H + o(1))Δ: groups at 2ν_i with terms Z_i S_i Z_iᵀ.
pub fn ase_from_scaled(form: &ScaledForm, rank_tol: f64) -> Result<Ase> {
    let n = form.h.nrows();
    if form.block_sizes != form.scaling.block_sizes() || form.scaling.dim() != n {
        return Err(AseError::InvalidScaling("form blocks do not match its scaling".into()));
    }
    let chain = schur_chain(&form.h, &form.block_sizes, rank_tol)?;
    let off = offsets(&form.block_sizes);
    let h_scale = form.h.amax();
    let mut groups = Vec::new();
    let last = chain.complements.len() - 1;
    for (i, s) in chain.complements.iter().enumerate() {
        let alpha = form.scaling.nu(i).times(2);
        let term = if chain.stopped_early && i == last { nonzero_part(s, h_scale, rank_tol) } else { s.clone() };
        groups.push(AseGroup { valuation: alpha, term: embed_block(n, off[i], &term) });
    }
    let truncated_at = chain.stopped_early.then(|| form.scaling.nu(last).times(2));
    Ase::new(n, groups, truncated_at)
}

/// M = K(ε)(K(ε) + τε^s I)⁻¹ at a numeric ε.
pub fn regularized_inverse_probe(k: &MatrixSeries, s: Exponent, tau: f64, eps: f64) -> Result<DMatrix<f64>> {
    let km = k.evaluate(eps);
    let n = km.nrows();
    let z = tau * s.pow(eps);
    let shifted = &km + DMatrix::<f64>::identity(n, n) * z;
    if linalg::cond_ratio(&shifted) < 1e-15 {
        return Err(AseError::SingularShift);
    }
    shifted.lu().solve(&km).ok_or(AseError::SingularShift)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProbe {
    pub s: Exponent,
    /// Numeric rank at the smallest usable ε; `None` when no ε was usable.
    pub rank: Option<usize>,
    /// The two smallest usable ε gave the same rank.
    pub stable: bool,
    pub eps_used: Vec<f64>,
}

/// Numeric limit rank of the probe for each s, which counts eigenvalues of valuation ≤ s.
///
/// An ε is usable only when the shift τε^s stays above 1e-12‖K(ε)‖, so that the
/// eigenvalues it is meant to resolve are not lost to rounding.
pub fn rank_probe_curve(
    k: &MatrixSeries,
    s_grid: &[Exponent],
    tau: f64,
    eps_seq: &[f64],
    rank_tol: f64,
) -> Result<Vec<RankProbe>> {
    let mut eps: Vec<f64> = eps_seq.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let mut out = Vec::new();
    for &s in s_grid {
        let mut ranks: Vec<(f64, usize)> = Vec::new();
        for &e in &eps {
            let norm = linalg::singular_values(&k.evaluate(e)).first().copied().unwrap_or(0.0);
            if tau * s.pow(e) < 1e-12 * norm {
                continue;
            }
            let m = regularized_inverse_probe(k, s, tau, e)?;
            let (vals, _) = linalg::sym_eigen_desc(&linalg::sym_part(&m));
            ranks.push((e, vals.iter().filter(|v| v.abs() > rank_tol).count()));
        }
        let probe = match ranks.len() {
            0 => RankProbe { s, rank: None, stable: false, eps_used: vec![] },
            len => {
                let r = ranks[len - 1].1;
                let stable = len >= 2 && ranks[len - 2].1 == r;
                RankProbe { s, rank: Some(r), stable, eps_used: ranks.iter().map(|x| x.0).collect() }
            }
        };
        out.push(probe);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct GroupJson {
    valuation: Exponent,
    lambda: Vec<f64>,
    ambiguous: bool,
    vectors: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct AseJson {
    n: usize,
    truncated_at: Option<Exponent>,
    groups: Vec<GroupJson>,
}

impl Ase {
    /// Output format: per group the leading values and one length-n array per eigenvector.
    pub fn to_json_value(&self) -> serde_json::Value {
        let groups = eigen_readout(self)
            .into_iter()
            .map(|g| GroupJson {
                valuation: g.valuation,
                lambda: g.leading_values.clone(),
                ambiguous: g.ambiguous,
                vectors: Some((0..g.vectors.ncols()).map(|c| g.vectors.column(c).iter().copied().collect()).collect()),
            })
            .collect();
        serde_json::to_value(AseJson { n: self.n, truncated_at: self.truncated_at, groups }).expect("ASE serialises")
    }

    /// Rebuilds terms Σ λ_k v_k v_kᵀ from the output format.
    pub fn from_json_str(s: &str) -> Result<Ase> {
        let raw: AseJson = serde_json::from_str(s).map_err(|e| AseError::InvalidInput(format!("ASE JSON: {e}")))?;
        let mut groups = Vec::new();
        for (gi, g) in raw.groups.into_iter().enumerate() {
            let vecs = g
                .vectors
                .ok_or_else(|| AseError::InvalidInput(format!("groups[{gi}].vectors is required to rebuild the term")))?;
            if vecs.len() != g.lambda.len() || vecs.iter().any(|v| v.len() != raw.n) {
                return Err(AseError::InvalidInput(format!(
                    "groups[{gi}]: need {} vectors of length {}",
                    g.lambda.len(),
                    raw.n
                )));
            }
            let mut term = DMatrix::zeros(raw.n, raw.n);
            for (lam, v) in g.lambda.iter().zip(&vecs) {
                let v = nalgebra::DVector::from_column_slice(v);
                term += &v * v.transpose() * *lam;
            }
            groups.push(AseGroup { valuation: g.valuation, term });
        }
        Ase::new(raw.n, groups, raw.truncated_at)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::{extract_h, DiagonalScaling};
    use nalgebra::dmatrix;

    fn e(k: i64) -> Exponent {
        Exponent::int(k)
    }

    #[test]
    fn chain_two_by_two() {
        let c = schur_chain(&dmatrix![1.0, 1.0; 1.0, 2.0], &[1, 1], DEFAULT_RANK_TOL).unwrap();
        assert!(!c.stopped_early);
        assert_eq!(c.complements, vec![dmatrix![1.0], dmatrix![1.0]]);
    }

    #[test]
    fn chain_three_by_three_stops() {
        let h = dmatrix![1.0, 1.0, 1.0; 1.0, 0.0, 0.0; 1.0, 0.0, 0.0];
        let c = schur_chain(&h, &[1, 2], DEFAULT_RANK_TOL).unwrap();
        assert!(c.stopped_early);
        assert_eq!(c.complements[1], -dmatrix![1.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn ase_two_by_two() {
        let k = MatrixSeries::from_terms(
            2,
            vec![
                (e(0), dmatrix![1.0, 0.0; 0.0, 0.0]),
                (e(1), dmatrix![0.0, 1.0; 1.0, 0.0]),
                (e(2), dmatrix![0.0, 0.0; 0.0, 2.0]),
                (e(3), dmatrix![0.0, 0.0; 0.0, 1.0]),
            ],
        )
        .unwrap();
        let s = DiagonalScaling::new(vec![(e(0), 1), (e(1), 1)]).unwrap();
        let ase = ase_from_scaled(&extract_h(&k, &s).unwrap(), DEFAULT_RANK_TOL).unwrap();
        assert!(ase.is_complete());
        assert_eq!(ase.valuations(), vec![e(0), e(2)]);
        assert_eq!(ase.groups[0].term, dmatrix![1.0, 0.0; 0.0, 0.0]);
        assert_eq!(ase.groups[1].term, dmatrix![0.0, 0.0; 0.0, 1.0]);
        ase.check_invariants().unwrap();
    }

    #[test]
    fn readout_ties_are_flagged() {
        let ase = Ase::new(
            3,
            vec![
                AseGroup { valuation: e(0), term: dmatrix![1.0, 0.0, 0.0; 0.0, 0.0, 0.0; 0.0, 0.0, 0.0] },
                AseGroup { valuation: e(1), term: dmatrix![0.0, 0.0, 0.0; 0.0, 1.0, 0.0; 0.0, 0.0, 1.0] },
            ],
            None,
        )
        .unwrap();
        let r = eigen_readout(&ase);
        assert!(!r[0].ambiguous);
        assert!(r[1].ambiguous);
        assert_eq!(r[1].count(), 2);
        let p = &r[1].projector;
        assert!((p * p - p).norm() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let ase = Ase::new(
            2,
            vec![
                AseGroup { valuation: e(0), term: dmatrix![1.0, 0.0; 0.0, 0.0] },
                AseGroup { valuation: Exponent::frac(3, 2), term: dmatrix![0.0, 0.0; 0.0, -2.0] },
            ],
            Some(e(4)),
        )
        .unwrap();
        let text = ase.to_json_value().to_string();
        let back = Ase::from_json_str(&text).unwrap();
        assert_eq!(back.truncated_at, Some(e(4)));
        for (a, b) in ase.groups.iter().zip(&back.groups) {
            assert_eq!(a.valuation, b.valuation);
            assert!((&a.term - &b.term).norm() < 1e-15);
        }
    }
}
