//! Semi-Markov model: an embedded transition matrix over a finite
//! truncation of a countable state space, plus a waiting law per state.
//!
//! Countable spaces (birth-death chains, lattice walks) are realized by
//! enumerating states up to a truncation radius. Transitions that would
//! leave the truncation are kept as explicit boundary edges so that row
//! stochasticity is preserved and a simulated trajectory that tries to
//! cross the boundary fails loudly instead of silently reflecting.

use crate::error::{Error, Result};
use crate::law::WaitingLaw;

/// Row-stochasticity tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTarget {
    State(usize),
    /// Probability mass leading out of the truncation.
    Boundary,
}

#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub target: EdgeTarget,
    pub prob: f64,
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    Explicit,
    /// Nearest-neighbor chain on 0..=radius with up-probabilities
    /// `up[x]` (up[0] = 1).
    BirthDeath { up: Vec<f64> },
    /// Nearest-neighbor walk on the d-dimensional integer lattice,
    /// enumerated on the sup-norm ball of the truncation radius.
    LatticeRw { dim: usize, points: Vec<Vec<i64>> },
}

#[derive(Debug, Clone)]
pub struct SemiMarkovModel {
    out: Vec<Vec<Edge>>,
    laws: Vec<WaitingLaw>,
    radius: usize,
    policy: &'static str,
    kind: ModelKind,
}

/// One validation line: check name, verdict (`None` = not checked),
/// and a human-readable detail.
#[derive(Debug, Clone)]
pub struct CheckItem {
    pub name: &'static str,
    pub passed: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub radius: usize,
    pub policy: &'static str,
    pub items: Vec<CheckItem>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|c| c.passed != Some(false))
    }
}

impl SemiMarkovModel {
    /// Finite explicit model: `edges` as (from, to, probability), one
    /// waiting law per state.
    pub fn explicit(n: usize, edges: &[(usize, usize, f64)], laws: Vec<WaitingLaw>) -> Result<Self> {
        if laws.len() != n {
            return Err(Error::Validation(format!(
                "{} waiting laws for {} states",
                laws.len(),
                n
            )));
        }
        let mut out = vec![Vec::new(); n];
        for &(x, y, p) in edges {
            if x >= n || y >= n {
                return Err(Error::Validation(format!("edge ({x},{y}) outside 0..{n}")));
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({x},{y}) has non-positive probability {p}"
                )));
            }
            if out[x].iter().any(|e: &Edge| e.target == EdgeTarget::State(y)) {
                return Err(Error::Validation(format!("duplicate edge ({x},{y})")));
            }
            out[x].push(Edge { target: EdgeTarget::State(y), prob: p });
        }
        let model = SemiMarkovModel {
            out,
            laws,
            radius: n.saturating_sub(1),
            policy: "explicit",
            kind: ModelKind::Explicit,
        };
        model.check_rows()?;
        Ok(model)
    }

    /// Birth-death chain on 0..=radius: p(0,1)=1, p(x,x+1)=up(x),
    /// p(x,x-1)=1-up(x); the up-edge of the top state is a boundary
    /// edge.
    pub fn birth_death(
        radius: usize,
        up: impl Fn(usize) -> f64,
        law: impl Fn(usize) -> Result<WaitingLaw>,
    ) -> Result<Self> {
        if radius < 1 {
            return Err(Error::Validation("birth-death radius must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(radius + 1);
        let mut laws = Vec::with_capacity(radius + 1);
        let mut ups = Vec::with_capacity(radius + 1);
        for x in 0..=radius {
            let p = if x == 0 { 1.0 } else { up(x) };
            if !(p.is_finite() && p > 0.0 && p < 1.0) && x != 0 {
                return Err(Error::Validation(format!(
                    "up-probability {p} at state {x} outside (0,1)"
                )));
            }
            ups.push(p);
            let mut row = Vec::new();
            if x > 0 {
                row.push(Edge { target: EdgeTarget::State(x - 1), prob: 1.0 - p });
            }
            let target = if x == radius { EdgeTarget::Boundary } else { EdgeTarget::State(x + 1) };
            row.push(Edge { target, prob: p });
            out.push(row);
            laws.push(law(x)?);
        }
        Ok(SemiMarkovModel {
            out,
            laws,
            radius,
            policy: "birth-death truncation",
            kind: ModelKind::BirthDeath { up: ups },
        })
    }

    /// Nearest-neighbor lattice walk with transition weights
    /// exp{-(U(y)-U(x))/2 + F(x,y)/2}, enumerated on the sup-norm ball
    /// of `radius`; steps leaving the ball become boundary edges.
    pub fn lattice_rw(
        dim: usize,
        radius: usize,
        potential: impl Fn(&[i64]) -> f64,
        force: impl Fn(&[i64], &[i64]) -> f64,
        law: impl Fn(&[i64]) -> Result<WaitingLaw>,
    ) -> Result<Self> {
        if dim == 0 || radius == 0 {
            return Err(Error::Validation("lattice walk needs dim >= 1, radius >= 1".into()));
        }
        let mut points: Vec<Vec<i64>> = Vec::new();
        let r = radius as i64;
        enumerate_ball(dim, r, &mut vec![0; dim], 0, &mut points);
        points.sort();
        let index = |p: &[i64]| points.binary_search_by(|q| q.as_slice().cmp(p)).ok();
        let mut out = Vec::with_capacity(points.len());
        let mut laws = Vec::with_capacity(points.len());
        for p in &points {
            let mut weights = Vec::new();
            let mut total = 0.0;
            for axis in 0..dim {
                for step in [-1i64, 1] {
                    let mut q = p.clone();
                    q[axis] += step;
                    let w = (-(potential(&q) - potential(p)) / 2.0 + force(p, &q) / 2.0).exp();
                    if !(w.is_finite() && w > 0.0) {
                        return Err(Error::Validation(format!(
                            "non-positive transition weight at {p:?} -> {q:?}"
                        )));
                    }
                    total += w;
                    weights.push((q, w));
                }
            }
            let row = weights
                .into_iter()
                .map(|(q, w)| {
                    let target = match index(&q) {
                        Some(i) => EdgeTarget::State(i),
                        None => EdgeTarget::Boundary,
                    };
                    Edge { target, prob: w / total }
                })
                .collect();
            out.push(row);
            laws.push(law(p)?);
        }
        Ok(SemiMarkovModel {
            out,
            laws,
            radius,
            policy: "lattice sup-norm ball",
            kind: ModelKind::LatticeRw { dim, points },
        })
    }

    pub fn n_states(&self) -> usize {
        self.out.len()
    }

    pub fn out_edges(&self, x: usize) -> &[Edge] {
        &self.out[x]
    }

    /// Transition probability p(x,y) (0 off the edge set).
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.out[x]
            .iter()
            .find(|e| e.target == EdgeTarget::State(y))
            .map_or(0.0, |e| e.prob)
    }

    /// Probability mass escaping the truncation from x.
    pub fn boundary_mass(&self, x: usize) -> f64 {
        self.out[x]
            .iter()
            .filter(|e| e.target == EdgeTarget::Boundary)
            .map(|e| e.prob)
            .sum()
    }

    /// States whose whole row stays inside the truncation.
    pub fn interior_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_states()).filter(|&x| self.boundary_mass(x) == 0.0)
    }

    pub fn law(&self, x: usize) -> &WaitingLaw {
        &self.laws[x]
    }

    pub fn zeta(&self, x: usize) -> f64 {
        self.laws[x].zeta()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn in_edges(&self, y: usize) -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        for x in 0..self.n_states() {
            let p = self.prob(x, y);
            if p > 0.0 {
                v.push((x, p));
            }
        }
        v
    }

    fn check_rows(&self) -> Result<()> {
        for x in 0..self.n_states() {
            if self.out[x].is_empty() {
                return Err(Error::NoOutgoingEdge { state: x });
            }
            let sum: f64 = self.out[x].iter().map(|e| e.prob).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Validation(format!(
                    "row {x} sums to {sum}, not 1 within {ROW_SUM_TOL}"
                )));
            }
        }
        Ok(())
    }

    /// Per-assumption validation on the truncation: row stochasticity,
    /// strong connectivity of the interior edge set, local finiteness,
    /// state-only waiting laws, and (birth-death only) the recurrence
    /// series heuristic.
    pub fn validate(&self) -> ValidationReport {
        let mut items = Vec::new();

        let mut row_ok = true;
        let mut row_detail = String::from("all rows stochastic");
        for x in 0..self.n_states() {
            let sum: f64 = self.out[x].iter().map(|e| e.prob).sum();
            if self.out[x].is_empty() || (sum - 1.0).abs() > ROW_SUM_TOL {
                row_ok = false;
                row_detail = format!("row {x} sums to {sum}");
                break;
            }
        }
        items.push(CheckItem {
            name: "row-stochastic",
            passed: Some(row_ok),
            detail: row_detail,
        });

        let connected = self.strongly_connected();
        items.push(CheckItem {
            name: "irreducible (truncation interior)",
            passed: Some(connected),
            detail: if connected {
                "interior edge set strongly connected".into()
            } else {
                "interior edge set not strongly connected".into()
            },
        });

        let max_out = self.out.iter().map(Vec::len).max().unwrap_or(0);
        let max_in = (0..self.n_states())
            .map(|y| self.in_edges(y).len())
            .max()
            .unwrap_or(0);
        items.push(CheckItem {
            name: "locally finite",
            passed: Some(true),
            detail: format!("max out-degree {max_out}, max in-degree {max_in}"),
        });

        items.push(CheckItem {
            name: "state-only waiting laws",
            passed: Some(true),
            detail: "one law per state by construction".into(),
        });

        match &self.kind {
            ModelKind::BirthDeath { up } => {
                let (verdict, detail) = birth_death_recurrence(up);
                items.push(CheckItem {
                    name: "recurrence (series heuristic)",
                    passed: verdict,
                    detail,
                });
            }
            _ => items.push(CheckItem {
                name: "recurrence",
                passed: None,
                detail: "not checked (no decidable criterion for this family); assumed".into(),
            }),
        }

        ValidationReport {
            radius: self.radius,
            policy: self.policy,
            items,
        }
    }

    /// Strong connectivity of the graph restricted to interior edges:
    /// every state reachable from 0 and 0 reachable from every state.
    fn strongly_connected(&self) -> bool {
        let n = self.n_states();
        let forward = |x: usize| -> Vec<usize> {
            self.out[x]
                .iter()
                .filter_map(|e| match e.target {
                    EdgeTarget::State(y) => Some(y),
                    EdgeTarget::Boundary => None,
                })
                .collect()
        };
        let reach_fwd = bfs(n, 0, &forward);
        let backward = |y: usize| -> Vec<usize> { self.in_edges(y).into_iter().map(|(x, _)| x).collect() };
        let reach_bwd = bfs(n, 0, &backward);
        reach_fwd.iter().all(|&r| r) && reach_bwd.iter().all(|&r| r)
    }

    /// Invariant distribution of the embedded chain on the truncation,
    /// by direct linear solve of νP = ν. Errors when boundary mass is
    /// present (the truncated matrix would be strictly substochastic).
    pub fn embedded_stationary(&self) -> Result<Vec<f64>> {
        let n = self.n_states();
        for x in 0..n {
            if self.boundary_mass(x) > 0.0 {
                return Err(Error::Precondition(format!(
                    "state {x} leaks probability through the truncation boundary"
                )));
            }
        }
        // (P^T - I) ν = 0 with the last equation replaced by Σν = 1.
        let mut a = vec![vec![0.0; n]; n];
        for x in 0..n {
            for e in &self.out[x] {
                if let EdgeTarget::State(y) = e.target {
                    a[y][x] += e.prob;
                }
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] -= 1.0;
        }
        for v in a[n - 1].iter_mut() {
            *v = 1.0;
        }
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let nu = solve_dense(a, b)?;
        if nu.iter().any(|&v| v < -1e-9) {
            return Err(Error::Precondition("stationary solve produced negative mass".into()));
        }
        let total: f64 = nu.iter().sum();
        Ok(nu.into_iter().map(|v| (v / total).max(0.0)).collect())
    }
}

fn bfs(n: usize, start: usize, next: &dyn Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(x) = stack.pop() {
        for y in next(x) {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen
}

fn enumerate_ball(dim: usize, r: i64, current: &mut Vec<i64>, axis: usize, out: &mut Vec<Vec<i64>>) {
    if axis == dim {
        out.push(current.clone());
        return;
    }
    for v in -r..=r {
        current[axis] = v;
        enumerate_ball(dim, r, current, axis + 1, out);
    }
}

/// Partial sums of the series Σ_k Π_{i<=k} q_i/p_i deciding recurrence
/// of the untruncated birth-death chain; growth over the last window is
/// the heuristic verdict.
fn birth_death_recurrence(up: &[f64]) -> (Option<bool>, String) {
    let k_max = up.len().saturating_sub(1).min(50);
    if k_max < 5 {
        return (None, "truncation too small for the series heuristic".into());
    }
    let mut prod = 1.0f64;
    let mut partial = 0.0f64;
    let mut window: Vec<f64> = Vec::new();
    for (_k, &p) in up.iter().enumerate().take(k_max + 1).skip(1) {
        prod *= (1.0 - p) / p;
        partial += prod;
        window.push(partial);
    }
    let n = window.len();
    let late_growth = window[n - 1] - window[n - 6];
    let early_growth = window[5.min(n - 1)];
    if late_growth >= 0.5 * early_growth && late_growth > 1e-12 {
        (
            Some(true),
            format!("recurrent (heuristic): partial sums grow, S_{k_max} = {:.6e}", partial),
        )
    } else {
        (
            Some(false),
            format!(
                "transient (heuristic): series flattens, S_{k_max} = {:.6e}, late growth {:.3e}",
                partial, late_growth
            ),
        )
    }
}

/// Dense linear solve with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() < 1e-14 {
            return Err(Error::Precondition("singular linear system".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}
