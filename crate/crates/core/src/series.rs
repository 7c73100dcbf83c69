//! Truncated power series in ε with rational exponents.
//!
//! A series stores only the coefficients strictly below its `trunc_order`;
//! everything at or beyond that order is unknown. Arithmetic shrinks the
//! horizon conservatively so that no stored coefficient is ever a guess.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AseError, Result};
use crate::exponent::{min_exp, Exponent};
use crate::linalg;

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSeries {
    terms: BTreeMap<Exponent, f64>,
    trunc: Exponent,
}

impl ScalarSeries {
    /// Builds a series, summing repeated exponents and dropping exact zeros.
    pub fn new(terms: impl IntoIterator<Item = (Exponent, f64)>, trunc: Exponent) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            if !e.is_finite() {
                return Err(AseError::InvalidExponent("term exponent must be finite".into()));
            }
            if e >= trunc {
                return Err(AseError::BeyondTruncation { exponent: e, trunc });
            }
            if !c.is_finite() {
                return Err(AseError::InvalidInput(format!("non-finite coefficient at exponent {e}")));
            }
            *map.entry(e).or_insert(0.0) += c;
        }
        map.retain(|_, c| *c != 0.0);
        Ok(ScalarSeries { terms: map, trunc })
    }

    /// Truncation order defaults to the largest supplied exponent plus one.
    pub fn from_terms(terms: impl IntoIterator<Item = (Exponent, f64)>) -> Result<Self> {
        let terms: Vec<_> = terms.into_iter().collect();
        let trunc = default_trunc(terms.iter().map(|t| t.0));
        Self::new(terms, trunc)
    }

    pub fn zero(trunc: Exponent) -> Self {
        ScalarSeries { terms: BTreeMap::new(), trunc }
    }

    fn from_map(mut terms: BTreeMap<Exponent, f64>, trunc: Exponent) -> Self {
        terms.retain(|e, c| *c != 0.0 && *e < trunc);
        ScalarSeries { terms, trunc }
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, f64> {
        &self.terms
    }

    pub fn trunc_order(&self) -> Exponent {
        self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn valuation(&self) -> Exponent {
        self.terms.keys().next().copied().unwrap_or(Exponent::PLUS_INFINITY)
    }

    /// `(val, lc)`, or `(+∞, 0)` for the zero series.
    pub fn leading(&self) -> (Exponent, f64) {
        self.terms
            .iter()
            .next()
            .map(|(e, c)| (*e, *c))
            .unwrap_or((Exponent::PLUS_INFINITY, 0.0))
    }

    pub fn coeff(&self, e: Exponent) -> f64 {
        self.terms.get(&e).copied().unwrap_or(0.0)
    }

    pub fn add(&self, other: &ScalarSeries) -> ScalarSeries {
        let trunc = min_exp(self.trunc, other.trunc);
        let mut map = self.terms.clone();
        for (e, c) in &other.terms {
            *map.entry(*e).or_insert(0.0) += c;
        }
        Self::from_map(map, trunc)
    }

    pub fn neg(&self) -> ScalarSeries {
        Self::from_map(self.terms.iter().map(|(e, c)| (*e, -c)).collect(), self.trunc)
    }

    pub fn sub(&self, other: &ScalarSeries) -> ScalarSeries {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &ScalarSeries) -> ScalarSeries {
        let trunc = product_trunc(
            effective_val(self.valuation(), self.trunc),
            self.trunc,
            effective_val(other.valuation(), other.trunc),
            other.trunc,
        );
        let mut map = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = *ea + *eb;
                if e < trunc {
                    *map.entry(e).or_insert(0.0) += ca * cb;
                }
            }
        }
        Self::from_map(map, trunc)
    }

    /// Multiplies by ε^e.
    pub fn shift(&self, e: Exponent) -> ScalarSeries {
        let map = self.terms.iter().map(|(k, c)| (*k + e, *c)).collect();
        Self::from_map(map, self.trunc + e)
    }

    pub fn truncate(&self, order: Exponent) -> ScalarSeries {
        Self::from_map(self.terms.clone(), min_exp(order, self.trunc))
    }

    pub fn evaluate(&self, eps: f64) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.pow(eps)).sum()
    }
}

/// For an empty series the valuation is only known to be at least the horizon.
fn effective_val(val: Exponent, trunc: Exponent) -> Exponent {
    min_exp(val, trunc)
}

fn product_trunc(va: Exponent, ta: Exponent, vb: Exponent, tb: Exponent) -> Exponent {
    min_exp(va + tb, vb + ta)
}

fn default_trunc(exps: impl Iterator<Item = Exponent>) -> Exponent {
    exps.max().map(|m| m + Exponent::ONE).unwrap_or(Exponent::ONE)
}

/// Element-wise valuations; `PLUS_INFINITY` marks entries that vanish within the horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValuationMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Exponent>,
}

impl ValuationMatrix {
    pub fn from_rows(rows: Vec<Vec<Exponent>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(AseError::DimensionMismatch {
                expected: format!("{c} columns in every row"),
                found: "ragged rows".into(),
            });
        }
        Ok(ValuationMatrix { rows: r, cols: c, entries: rows.into_iter().flatten().collect() })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Exponent {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Exponent] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<Exponent>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSeries {
    rows: usize,
    cols: usize,
    terms: BTreeMap<Exponent, DMatrix<f64>>,
    trunc: Exponent,
    symmetric: bool,
}

impl MatrixSeries {
    /// Validating constructor. Symmetric series must have exactly symmetric coefficients.
    pub fn new(
        rows: usize,
        cols: usize,
        terms: impl IntoIterator<Item = (Exponent, DMatrix<f64>)>,
        trunc: Exponent,
        symmetric: bool,
    ) -> Result<Self> {
        if symmetric && rows != cols {
            return Err(AseError::DimensionMismatch {
                expected: "square matrix for a symmetric series".into(),
                found: format!("{rows}x{cols}"),
            });
        }
        let mut map: BTreeMap<Exponent, DMatrix<f64>> = BTreeMap::new();
        for (e, m) in terms {
            if !e.is_finite() {
                return Err(AseError::InvalidExponent("term exponent must be finite".into()));
            }
            if e >= trunc {
                return Err(AseError::BeyondTruncation { exponent: e, trunc });
            }
            if m.nrows() != rows || m.ncols() != cols {
                return Err(AseError::DimensionMismatch {
                    expected: format!("{rows}x{cols}"),
                    found: format!("{}x{} at exponent {e}", m.nrows(), m.ncols()),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(AseError::InvalidInput(format!("non-finite entry at exponent {e}")));
            }
            if symmetric {
                for i in 0..rows {
                    for j in 0..i {
                        if m[(i, j)] != m[(j, i)] {
                            return Err(AseError::NotSymmetric { exponent: e, row: i, col: j });
                        }
                    }
                }
            }
            match map.get_mut(&e) {
                Some(acc) => *acc += m,
                None => {
                    map.insert(e, m);
                }
            }
        }
        map.retain(|_, m| !linalg::is_zero(m));
        Ok(MatrixSeries { rows, cols, terms: map, trunc, symmetric })
    }

    /// Square symmetric series with the default horizon (largest exponent plus one).
    pub fn from_terms(n: usize, terms: Vec<(Exponent, DMatrix<f64>)>) -> Result<Self> {
        let trunc = default_trunc(terms.iter().map(|t| t.0));
        Self::new(n, n, terms, trunc, true)
    }

    /// A constant matrix known exactly (infinite horizon).
    pub fn constant(m: DMatrix<f64>) -> Self {
        let symmetric = m.is_square() && m == m.transpose();
        Self::from_map(m.nrows(), m.ncols(), [(Exponent::ZERO, m)].into_iter().collect(), Exponent::PLUS_INFINITY, symmetric)
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize, trunc: Exponent) -> Self {
        MatrixSeries { rows, cols, terms: BTreeMap::new(), trunc, symmetric: rows == cols }
    }

    /// Internal builder: drops terms at or beyond the horizon and exact zeros.
    fn from_map(
        rows: usize,
        cols: usize,
        mut terms: BTreeMap<Exponent, DMatrix<f64>>,
        trunc: Exponent,
        symmetric: bool,
    ) -> Self {
        terms.retain(|e, m| *e < trunc && !linalg::is_zero(m));
        MatrixSeries { rows, cols, terms, trunc, symmetric }
    }

    /// Assembles a series from row-major entry series; the horizon is the smallest entry horizon.
    pub fn from_entries(rows: usize, cols: usize, entries: &[ScalarSeries]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(AseError::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{}", entries.len()),
            });
        }
        let trunc = entries.iter().map(|s| s.trunc).min().unwrap_or(Exponent::PLUS_INFINITY);
        let mut map: BTreeMap<Exponent, DMatrix<f64>> = BTreeMap::new();
        for (k, s) in entries.iter().enumerate() {
            let (i, j) = (k / cols, k % cols);
            for (e, c) in &s.terms {
                if *e < trunc {
                    map.entry(*e).or_insert_with(|| DMatrix::zeros(rows, cols))[(i, j)] += c;
                }
            }
        }
        let symmetric = rows == cols
            && map.values().all(|m| (0..rows).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)])));
        Ok(Self::from_map(rows, cols, map, trunc, symmetric))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Dimension of a square series.
    pub fn n(&self) -> usize {
        self.rows
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn trunc_order(&self) -> Exponent {
        self.trunc
    }

    pub fn terms(&self) -> &BTreeMap<Exponent, DMatrix<f64>> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn valuation(&self) -> Exponent {
        self.terms.keys().next().copied().unwrap_or(Exponent::PLUS_INFINITY)
    }

    /// `(val, leading coefficient matrix)`; the zero series gives `(+∞, 0)`.
    pub fn leading(&self) -> (Exponent, DMatrix<f64>) {
        self.terms
            .iter()
            .next()
            .map(|(e, m)| (*e, m.clone()))
            .unwrap_or((Exponent::PLUS_INFINITY, DMatrix::zeros(self.rows, self.cols)))
    }

    pub fn coeff(&self, e: Exponent) -> DMatrix<f64> {
        self.terms.get(&e).cloned().unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols))
    }

    pub fn entry(&self, i: usize, j: usize) -> ScalarSeries {
        let map = self.terms.iter().map(|(e, m)| (*e, m[(i, j)])).collect();
        ScalarSeries::from_map(map, self.trunc)
    }

    pub fn valuation_matrix(&self) -> ValuationMatrix {
        let mut entries = vec![Exponent::PLUS_INFINITY; self.rows * self.cols];
        // Terms are visited in increasing exponent order, so the first hit is the valuation.
        for (e, m) in &self.terms {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    let slot = &mut entries[i * self.cols + j];
                    if m[(i, j)] != 0.0 && !slot.is_finite() {
                        *slot = *e;
                    }
                }
            }
        }
        ValuationMatrix { rows: self.rows, cols: self.cols, entries }
    }

    pub fn evaluate(&self, eps: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (e, m) in &self.terms {
            out += m * e.pow(eps);
        }
        out
    }

    fn check_same_shape(&self, other: &MatrixSeries) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(AseError::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                found: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &MatrixSeries) -> Result<MatrixSeries> {
        self.check_same_shape(other)?;
        let trunc = min_exp(self.trunc, other.trunc);
        let mut map = self.terms.clone();
        for (e, m) in &other.terms {
            match map.get_mut(e) {
                Some(acc) => *acc += m,
                None => {
                    map.insert(*e, m.clone());
                }
            }
        }
        Ok(Self::from_map(self.rows, self.cols, map, trunc, self.symmetric && other.symmetric))
    }

    pub fn neg(&self) -> MatrixSeries {
        let map = self.terms.iter().map(|(e, m)| (*e, -m)).collect();
        Self::from_map(self.rows, self.cols, map, self.trunc, self.symmetric)
    }

    pub fn sub(&self, other: &MatrixSeries) -> Result<MatrixSeries> {
        self.add(&other.neg())
    }

    /// `self - other`, flushing entries that cancel to within `tol` relative to the operands.
    pub fn sub_cancelling(&self, other: &MatrixSeries, tol: f64) -> Result<MatrixSeries> {
        self.check_same_shape(other)?;
        let trunc = min_exp(self.trunc, other.trunc);
        let mut exps: Vec<Exponent> = self.terms.keys().chain(other.terms.keys()).copied().collect();
        exps.sort();
        exps.dedup();
        let zero = DMatrix::zeros(self.rows, self.cols);
        let mut map = BTreeMap::new();
        for e in exps.into_iter().filter(|e| *e < trunc) {
            let a = self.terms.get(&e).unwrap_or(&zero);
            let b = other.terms.get(&e).unwrap_or(&zero);
            let mut d = a - b;
            for k in 0..d.len() {
                if d[k].abs() <= tol * a[k].abs().max(b[k].abs()) {
                    d[k] = 0.0;
                }
            }
            map.insert(e, d);
        }
        Ok(Self::from_map(self.rows, self.cols, map, trunc, self.symmetric && other.symmetric))
    }

    pub fn scale(&self, c: f64) -> MatrixSeries {
        let map = self.terms.iter().map(|(e, m)| (*e, m * c)).collect();
        Self::from_map(self.rows, self.cols, map, self.trunc, self.symmetric)
    }

    /// Cauchy product, truncated at `min(val(a)+trunc(b), val(b)+trunc(a))`.
    pub fn mul(&self, other: &MatrixSeries) -> Result<MatrixSeries> {
        if self.cols != other.rows {
            return Err(AseError::DimensionMismatch {
                expected: format!("{} rows on the right factor", self.cols),
                found: format!("{}", other.rows),
            });
        }
        let trunc = product_trunc(
            effective_val(self.valuation(), self.trunc),
            self.trunc,
            effective_val(other.valuation(), other.trunc),
            other.trunc,
        );
        let mut map: BTreeMap<Exponent, DMatrix<f64>> = BTreeMap::new();
        for (ea, a) in &self.terms {
            for (eb, b) in &other.terms {
                let e = *ea + *eb;
                if e >= trunc {
                    continue;
                }
                let p = a * b;
                match map.get_mut(&e) {
                    Some(acc) => *acc += p,
                    None => {
                        map.insert(e, p);
                    }
                }
            }
        }
        Ok(Self::from_map(self.rows, other.cols, map, trunc, false))
    }

    pub fn transpose(&self) -> MatrixSeries {
        let map = self.terms.iter().map(|(e, m)| (*e, m.transpose())).collect();
        Self::from_map(self.cols, self.rows, map, self.trunc, self.symmetric)
    }

    /// Replaces each coefficient by its symmetric part and sets the flag.
    pub fn symmetrize(&self) -> Result<MatrixSeries> {
        if self.rows != self.cols {
            return Err(AseError::DimensionMismatch {
                expected: "square".into(),
                found: format!("{}x{}", self.rows, self.cols),
            });
        }
        let map = self.terms.iter().map(|(e, m)| (*e, linalg::sym_part(m))).collect();
        Ok(Self::from_map(self.rows, self.cols, map, self.trunc, true))
    }

    pub fn truncate(&self, order: Exponent) -> MatrixSeries {
        Self::from_map(self.rows, self.cols, self.terms.clone(), min_exp(order, self.trunc), self.symmetric)
    }

    /// Multiplies the whole series by ε^e.
    pub fn shift(&self, e: Exponent) -> MatrixSeries {
        let map = self.terms.iter().map(|(k, m)| (*k + e, m.clone())).collect();
        Self::from_map(self.rows, self.cols, map, self.trunc + e, self.symmetric)
    }

    /// Entry (i, j) multiplied by ε^{left[i] + right[j]}. The horizon shrinks to the worst entry.
    pub fn scale_entries(&self, left: &[Exponent], right: &[Exponent]) -> Result<MatrixSeries> {
        if left.len() != self.rows || right.len() != self.cols {
            return Err(AseError::DimensionMismatch {
                expected: format!("{} and {} scaling exponents", self.rows, self.cols),
                found: format!("{} and {}", left.len(), right.len()),
            });
        }
        let lmin = left.iter().copied().min().unwrap_or(Exponent::ZERO);
        let rmin = right.iter().copied().min().unwrap_or(Exponent::ZERO);
        let trunc = self.trunc + lmin + rmin;
        let mut map: BTreeMap<Exponent, DMatrix<f64>> = BTreeMap::new();
        for (e, m) in &self.terms {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    let c = m[(i, j)];
                    if c == 0.0 {
                        continue;
                    }
                    let k = *e + left[i] + right[j];
                    if k < trunc {
                        map.entry(k).or_insert_with(|| DMatrix::zeros(self.rows, self.cols))[(i, j)] += c;
                    }
                }
            }
        }
        let symmetric = self.symmetric && left == right;
        Ok(Self::from_map(self.rows, self.cols, map, trunc, symmetric))
    }

    /// `Pᵀ · self · P` for a constant matrix `P` with `self.n()` rows.
    pub fn congruence(&self, p: &DMatrix<f64>) -> Result<MatrixSeries> {
        if p.nrows() != self.rows || self.rows != self.cols {
            return Err(AseError::DimensionMismatch {
                expected: format!("{} rows in the congruence matrix", self.rows),
                found: format!("{}", p.nrows()),
            });
        }
        let map = self.terms.iter().map(|(e, m)| (*e, p.transpose() * m * p)).collect();
        let k = p.ncols();
        Ok(Self::from_map(k, k, map, self.trunc, false))
    }

    pub fn block(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> MatrixSeries {
        let map = self
            .terms
            .iter()
            .map(|(e, m)| (*e, m.view((r0, c0), (nr, nc)).into_owned()))
            .collect();
        let symmetric = self.symmetric && r0 == c0 && nr == nc;
        Self::from_map(nr, nc, map, self.trunc, symmetric)
    }

    /// Rows and columns selected by an index list (a symmetric permutation or restriction).
    pub fn select(&self, idx: &[usize]) -> MatrixSeries {
        let k = idx.len();
        let map = self
            .terms
            .iter()
            .map(|(e, m)| (*e, DMatrix::from_fn(k, k, |i, j| m[(idx[i], idx[j])])))
            .collect();
        Self::from_map(k, k, map, self.trunc, self.symmetric)
    }

    pub fn block_diag(a: &MatrixSeries, b: &MatrixSeries) -> MatrixSeries {
        let (r, c) = (a.rows + b.rows, a.cols + b.cols);
        let trunc = min_exp(a.trunc, b.trunc);
        let mut map: BTreeMap<Exponent, DMatrix<f64>> = BTreeMap::new();
        for (e, m) in &a.terms {
            map.entry(*e).or_insert_with(|| DMatrix::zeros(r, c)).view_mut((0, 0), (a.rows, a.cols)).copy_from(m);
        }
        for (e, m) in &b.terms {
            map.entry(*e)
                .or_insert_with(|| DMatrix::zeros(r, c))
                .view_mut((a.rows, a.cols), (b.rows, b.cols))
                .copy_from(m);
        }
        Self::from_map(r, c, map, trunc, a.symmetric && b.symmetric)
    }

    /// Neumann-series inverse `H(0)⁻¹ Σ_k (−(H−H(0))H(0)⁻¹)^k`, truncated at `order`.
    pub fn inverse(&self, order: Exponent) -> Result<MatrixSeries> {
        if self.rows != self.cols {
            return Err(AseError::DimensionMismatch {
                expected: "square".into(),
                found: format!("{}x{}", self.rows, self.cols),
            });
        }
        let val = self.valuation();
        if val.is_negative() {
            return Err(AseError::InvalidInput("series inverse needs a nonnegative valuation".into()));
        }
        let h0 = self.coeff(Exponent::ZERO);
        let ratio = linalg::cond_ratio(&h0);
        if ratio.is_nan() || ratio <= LEADING_SINGULAR_TOL {
            return Err(AseError::LeadingTermSingular { ratio });
        }
        let h0_inv = h0.clone().try_inverse().ok_or(AseError::LeadingTermSingular { ratio })?;
        let t = min_exp(order, self.trunc);
        let n = self.rows;

        let mut rest = self.terms.clone();
        rest.remove(&Exponent::ZERO);
        let e = Self::from_map(n, n, rest, self.trunc, false);
        let step = Self::constant(-&h0_inv).mul(&e)?;
        let h0_inv_s = Self::constant(h0_inv);

        if !t.is_finite() && !e.is_zero() {
            return Err(AseError::HorizonExhausted("an infinite-order inverse of a non-constant series does not terminate".into()));
        }
        let mut result = h0_inv_s.clone();
        let mut power = Self::identity(n);
        loop {
            power = power.mul(&step)?;
            if power.is_zero() || power.valuation() >= t {
                break;
            }
            result = result.add(&power.mul(&h0_inv_s)?)?;
        }
        let out = result.truncate(t);
        let out = Self::from_map(n, n, out.terms, t, false);
        if self.symmetric {
            out.symmetrize()
        } else {
            Ok(out)
        }
    }
}

/// Smallest acceptable σ_min/σ_max of `H(0)` for the Neumann inverse.
const LEADING_SINGULAR_TOL: f64 = 1e-13;

#[derive(Serialize, Deserialize)]
struct TermJson {
    exponent: Exponent,
    matrix: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixSeriesJson {
    n: usize,
    #[serde(default = "default_true")]
    symmetric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trunc_order: Option<Exponent>,
    terms: Vec<TermJson>,
}

fn default_true() -> bool {
    true
}

impl MatrixSeries {
    /// Parses the JSON wire format, reporting the offending field on failure.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: MatrixSeriesJson =
            serde_json::from_str(s).map_err(|e| AseError::InvalidInput(format!("series JSON: {e}")))?;
        let n = raw.n;
        let mut terms = Vec::with_capacity(raw.terms.len());
        for (k, t) in raw.terms.into_iter().enumerate() {
            if t.matrix.len() != n {
                return Err(AseError::InvalidInput(format!(
                    "terms[{k}].matrix has {} rows, expected n = {n}",
                    t.matrix.len()
                )));
            }
            for (r, row) in t.matrix.iter().enumerate() {
                if row.len() != n {
                    return Err(AseError::InvalidInput(format!(
                        "terms[{k}].matrix[{r}] has {} entries, expected n = {n}",
                        row.len()
                    )));
                }
            }
            let m = DMatrix::from_fn(n, n, |i, j| t.matrix[i][j]);
            terms.push((t.exponent, m));
        }
        let trunc = raw.trunc_order.unwrap_or_else(|| default_trunc(terms.iter().map(|t| t.0)));
        Self::new(n, n, terms, trunc, raw.symmetric).map_err(|e| AseError::InvalidInput(format!("series JSON: {e}")))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let raw = MatrixSeriesJson {
            n: self.rows,
            symmetric: self.symmetric,
            trunc_order: Some(self.trunc),
            terms: self
                .terms
                .iter()
                .map(|(e, m)| TermJson { exponent: *e, matrix: linalg::to_rows(m) })
                .collect(),
        };
        serde_json::to_value(raw).expect("series serialises")
    }
}
