//! Diagonal scalings Δ(ε) = diag(ε^{ν_i}): validity, tightness, the leading matrix H,
//! and maximal symmetric scalings computed from the valuation matrix.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::DMatrix;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{AseError, Result};
use crate::exponent::{lcm_denominators, Exponent};
use crate::series::{MatrixSeries, ValuationMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalingBlock {
    pub nu: Exponent,
    pub mult: usize,
}

/// Valuation profile ν_0 < … < ν_p with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagonalScaling {
    valuations: Vec<ScalingBlock>,
}

impl DiagonalScaling {
    pub fn new(blocks: Vec<(Exponent, usize)>) -> Result<Self> {
        for w in blocks.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(AseError::InvalidScaling(format!(
                    "valuations must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((nu, _)) = blocks.iter().find(|b| b.1 == 0) {
            return Err(AseError::InvalidScaling(format!("block at ν = {nu} has multiplicity 0")));
        }
        if blocks.iter().any(|b| !b.0.is_finite()) {
            return Err(AseError::InvalidScaling("valuations must be finite".into()));
        }
        Ok(DiagonalScaling {
            valuations: blocks.into_iter().map(|(nu, mult)| ScalingBlock { nu, mult }).collect(),
        })
    }

    /// Groups a nondecreasing per-row exponent list into blocks.
    pub fn from_diagonal(nu: &[Exponent]) -> Result<Self> {
        let mut blocks: Vec<(Exponent, usize)> = Vec::new();
        for &v in nu {
            match blocks.last_mut() {
                Some((last, m)) if *last == v => *m += 1,
                Some((last, _)) if *last > v => {
                    return Err(AseError::InvalidScaling("diagonal exponents must be nondecreasing".into()))
                }
                _ => blocks.push((v, 1)),
            }
        }
        Self::new(blocks)
    }

    /// Validates the JSON block list after deserialisation.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.valuations.into_iter().map(|b| (b.nu, b.mult)).collect())
    }

    pub fn blocks(&self) -> &[ScalingBlock] {
        &self.valuations
    }

    pub fn num_blocks(&self) -> usize {
        self.valuations.len()
    }

    pub fn nu(&self, block: usize) -> Exponent {
        self.valuations[block].nu
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.valuations.iter().map(|b| b.mult).collect()
    }

    pub fn dim(&self) -> usize {
        self.valuations.iter().map(|b| b.mult).sum()
    }

    /// Length-n list of diagonal exponents, in block order.
    pub fn expand(&self) -> Vec<Exponent> {
        self.valuations.iter().flat_map(|b| std::iter::repeat_n(b.nu, b.mult)).collect()
    }
}

/// Residual Ω_ij − (ν_i + ν_j); infinite where Ω_ij is.
pub type ResidualGrid = Vec<Vec<Option<Ratio<i64>>>>;

fn check_size(omega: &ValuationMatrix, n: usize) -> Result<()> {
    if omega.nrows() != n || omega.ncols() != n {
        return Err(AseError::DimensionMismatch {
            expected: format!("{n}x{n} valuation matrix"),
            found: format!("{}x{}", omega.nrows(), omega.ncols()),
        });
    }
    Ok(())
}

/// Validity of a scaling: every residual is nonnegative. `None` entries stand for +∞.
pub fn check_valid(omega: &ValuationMatrix, scaling: &DiagonalScaling) -> Result<(bool, ResidualGrid)> {
    let n = scaling.dim();
    check_size(omega, n)?;
    let nu = scaling.expand();
    let mut valid = true;
    let grid = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let r = omega.get(i, j).checked_sub(&(nu[i] + nu[j])).and_then(|x| x.ratio());
                    if let Some(r) = r {
                        if r < Ratio::from_integer(0) {
                            valid = false;
                        }
                    }
                    r
                })
                .collect()
        })
        .collect();
    Ok((valid, grid))
}

/// Index pairs where the scaling is tight (residual exactly zero).
pub fn tight_entries(omega: &ValuationMatrix, scaling: &DiagonalScaling) -> Result<BTreeSet<(usize, usize)>> {
    let (valid, grid) = check_valid(omega, scaling)?;
    if !valid {
        return Err(AseError::InvalidScaling("scaling is not valid for this valuation matrix".into()));
    }
    let mut out = BTreeSet::new();
    for (i, row) in grid.iter().enumerate() {
        for (j, r) in row.iter().enumerate() {
            if *r == Some(Ratio::from_integer(0)) {
                out.insert((i, j));
            }
        }
    }
    Ok(out)
}

/// `K(ε) = Δ(ε)(H + o(1))Δ(ε)` with its block partition.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledForm {
    pub scaling: DiagonalScaling,
    pub h: DMatrix<f64>,
    pub block_sizes: Vec<usize>,
}

/// H_ij is the coefficient of ε^{ν_i+ν_j} in K_ij, which is the leading one exactly at tight entries.
pub fn extract_h(k: &MatrixSeries, scaling: &DiagonalScaling) -> Result<ScaledForm> {
    if !k.is_symmetric() {
        return Err(AseError::InvalidInput("extract_H needs a symmetric series".into()));
    }
    let omega = k.valuation_matrix();
    let (valid, _) = check_valid(&omega, scaling)?;
    if !valid {
        return Err(AseError::InvalidScaling("scaling is not valid for this valuation matrix".into()));
    }
    let nu = scaling.expand();
    let n = nu.len();
    let top = nu[n - 1] + nu[n - 1];
    if top >= k.trunc_order() {
        return Err(AseError::HorizonExhausted(format!(
            "H needs coefficients up to ε^{top} but the series is known only below ε^{}",
            k.trunc_order()
        )));
    }
    let h = DMatrix::from_fn(n, n, |i, j| k.terms().get(&(nu[i] + nu[j])).map(|m| m[(i, j)]).unwrap_or(0.0));
    Ok(ScaledForm { scaling: scaling.clone(), h, block_sizes: scaling.block_sizes() })
}

/// A maximal scaling in the original row order, plus the stable sort that groups it into blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoScaling {
    /// Per-row exponent ν_i, in the input order.
    pub nu: Vec<Exponent>,
    /// `order[k]` is the input row placed at position k after sorting by ν.
    pub order: Vec<usize>,
    /// Block form of the sorted exponents.
    pub scaling: DiagonalScaling,
}

impl AutoScaling {
    pub fn is_identity_order(&self) -> bool {
        self.order.iter().enumerate().all(|(k, &i)| k == i)
    }
}

/// Maximises Σν subject to ν_i + ν_j ≤ Ω_ij and ν ≥ 0.
///
/// The bipartite relaxation (independent row and column potentials u, v ≥ 0) is the dual
/// of a min-cost edge cover, solved here as an uncapacitated min-cost flow by successive
/// shortest paths. Averaging ν = (u+v)/2 is feasible by symmetry of Ω and attains the
/// relaxation bound, hence is optimal.
pub fn auto_scale(omega: &ValuationMatrix) -> Result<AutoScaling> {
    let n = omega.nrows();
    check_size(omega, n)?;
    if !omega.is_symmetric() {
        return Err(AseError::InvalidInput("auto_scale needs a symmetric valuation matrix".into()));
    }
    for i in 0..n {
        if omega.row(i).iter().all(|e| !e.is_finite()) {
            return Err(AseError::StructurallyZeroRow(i));
        }
        for j in 0..n {
            if omega.get(i, j).is_negative() {
                return Err(AseError::NegativeValuation(i, j));
            }
        }
    }
    let scale = lcm_denominators((0..n).flat_map(|i| omega.row(i).iter()));
    let cost = |i: usize, j: usize| -> Option<i64> {
        omega.get(i, j).ratio().map(|r| {
            let v = r * scale;
            debug_assert!(v.is_integer());
            v.to_integer()
        })
    };
    let (u, v) = edge_cover_potentials(n, &cost);
    let nu: Vec<Exponent> = (0..n).map(|i| Exponent::Finite(Ratio::new(u[i] + v[i], 2 * scale))).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (nu[i], i));
    let sorted: Vec<Exponent> = order.iter().map(|&i| nu[i]).collect();
    let scaling = DiagonalScaling::from_diagonal(&sorted)?;
    Ok(AutoScaling { nu, order, scaling })
}

struct Arc {
    to: usize,
    cost: i64,
    flow: i64,
}

/// Optimal dual potentials (u, v) of min Σ w_ij x_ij over edge covers of the complete
/// bipartite graph on finite entries. Returns u_i, v_j ≥ 0 with u_i + v_j ≤ w_ij.
fn edge_cover_potentials(n: usize, cost: &dyn Fn(usize, usize) -> Option<i64>) -> (Vec<i64>, Vec<i64>) {
    // Nodes: hub 0, rows 1..=n, columns n+1..=2n.
    let hub = 0;
    let row = |i: usize| 1 + i;
    let col = |j: usize| 1 + n + j;
    let nodes = 2 * n + 1;
    let mut arcs: Vec<Arc> = Vec::new();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut inc: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |from: usize, to: usize, c: i64, arcs: &mut Vec<Arc>| {
        out[from].push(arcs.len());
        inc[to].push(arcs.len());
        arcs.push(Arc { to, cost: c, flow: 0 });
    };
    let mut tails: Vec<usize> = Vec::new();
    for i in 0..n {
        add(hub, row(i), 0, &mut arcs);
        tails.push(hub);
    }
    for i in 0..n {
        for j in 0..n {
            if let Some(c) = cost(i, j) {
                add(row(i), col(j), c, &mut arcs);
                tails.push(row(i));
            }
        }
    }
    for j in 0..n {
        add(col(j), hub, 0, &mut arcs);
        tails.push(col(j));
    }

    // Successive shortest paths: each row ships one unit to some column.
    // Arc costs are nonnegative, so zero potentials start Dijkstra correctly.
    let mut pot = vec![0i64; nodes];
    let mut supply: Vec<i64> = (0..nodes).map(|v| if (1..=n).contains(&v) { 1 } else { 0 }).collect();
    let mut demand: Vec<i64> = (0..nodes).map(|v| if v > n { 1 } else { 0 }).collect();
    for _ in 0..n {
        let src = (0..nodes).find(|&v| supply[v] > 0).expect("remaining supply");
        let mut dist = vec![i64::MAX; nodes];
        let mut prev: Vec<Option<(usize, bool)>> = vec![None; nodes];
        dist[src] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i64, src)));
        while let Some(Reverse((d, x))) = heap.pop() {
            if d > dist[x] {
                continue;
            }
            // Forward residual arcs (uncapacitated).
            for &a in &out[x] {
                let y = arcs[a].to;
                let rc = arcs[a].cost + pot[x] - pot[y];
                debug_assert!(rc >= 0);
                if d + rc < dist[y] {
                    dist[y] = d + rc;
                    prev[y] = Some((a, true));
                    heap.push(Reverse((dist[y], y)));
                }
            }
            // Backward residual arcs on positive flow.
            for &a in &inc[x] {
                if arcs[a].flow > 0 {
                    let y = tails[a];
                    let rc = -arcs[a].cost + pot[x] - pot[y];
                    if d + rc < dist[y] {
                        dist[y] = d + rc;
                        prev[y] = Some((a, false));
                        heap.push(Reverse((dist[y], y)));
                    }
                }
            }
        }
        let sink = (0..nodes)
            .filter(|&v| demand[v] > 0 && dist[v] < i64::MAX)
            .min_by_key(|&v| (dist[v], v))
            .expect("every row has a finite entry, so some column is reachable");
        let mut y = sink;
        while y != src {
            let (a, fwd) = prev[y].expect("path");
            if fwd {
                arcs[a].flow += 1;
                y = tails[a];
            } else {
                arcs[a].flow -= 1;
                y = arcs[a].to;
            }
        }
        supply[src] -= 1;
        demand[sink] -= 1;
        for v in 0..nodes {
            pot[v] += dist[v].min(dist[sink]);
        }
    }

    // Optimal potentials from shortest distances in the final residual graph (virtual root
    // joined to every node at cost 0). No negative cycles exist because the flow is optimal.
    let mut h = vec![0i64; nodes];
    for _ in 0..nodes {
        let mut changed = false;
        for (a, arc) in arcs.iter().enumerate() {
            let (x, y) = (tails[a], arc.to);
            if h[x] + arc.cost < h[y] {
                h[y] = h[x] + arc.cost;
                changed = true;
            }
            if arc.flow > 0 && h[y] - arc.cost < h[x] {
                h[x] = h[y] - arc.cost;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let u = (0..n).map(|i| h[hub] - h[row(i)]).collect();
    let v = (0..n).map(|j| h[col(j)] - h[hub]).collect();
    (u, v)
}
