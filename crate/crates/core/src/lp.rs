//! Dense two-phase tableau simplex with dual extraction.
//!
//! Solves `min c·x` subject to `A x {≤,≥,=} b`, `x ≥ 0`. The optimum comes back
//! with a dual vector and a certificate: the duality gap `|c·x − b·y|` and the
//! worst dual-feasibility violation, both measured against the original data.

use serde::{Deserialize, Serialize};

use crate::error::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    costs: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    /// Reduced costs above `-optimality_tol` count as non-negative.
    pub optimality_tol: f64,
    /// Smallest pivot-column entry accepted in the ratio test.
    pub pivot_tol: f64,
    /// Bound on the certified gap, relative to `max(1, |objective|)`.
    pub certificate_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_pivots: 200_000,
            optimality_tol: 1e-11,
            pivot_tol: 1e-10,
            certificate_tol: 1e-9,
            degenerate_switch: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LpStats {
    pub iterations: usize,
    pub phase_one_iterations: usize,
    pub duality_gap: f64,
    pub dual_infeasibility: f64,
    pub primal_infeasibility: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint, in the sign convention of the
    /// minimisation dual: `y ≤ 0` for `≤` rows, `y ≥ 0` for `≥` rows.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub stats: LpStats,
}

impl LinearProgram {
    pub fn minimize(costs: Vec<f64>) -> Self {
        Self {
            costs,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.costs.len(), "constraint width");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    /// Adds a constraint given as sparse `(column, coefficient)` pairs.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.costs.len()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add(coeffs, relation, rhs)
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_with(&SimplexOptions::default())
    }

    pub fn solve_with(&self, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
        let mut tab = Tableau::build(self);
        tab.run_phase_one(opts)?;
        tab.run_phase_two(&self.costs, opts)?;
        let sol = tab.extract(self);
        let scale = sol.objective.abs().max(1.0);
        if sol.stats.duality_gap > opts.certificate_tol * scale
            || sol.stats.dual_infeasibility > opts.certificate_tol * scale
        {
            return Err(LpError::Certificate {
                gap: sol.stats.duality_gap,
                dual_infeasibility: sol.stats.dual_infeasibility,
            });
        }
        Ok(sol)
    }
}

struct Tableau {
    rows: usize,
    /// Structural + slack + surplus + artificial columns (rhs excluded).
    cols: usize,
    n: usize,
    /// Row-major, `cols + 1` entries per row; the last one is the rhs.
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Column holding `+e_i` for row `i` (slack or artificial).
    unit_col: Vec<usize>,
    flipped: Vec<bool>,
    is_artificial: Vec<bool>,
    /// Reduced costs for the current phase.
    d: Vec<f64>,
    iterations: usize,
    phase_one_iterations: usize,
}

enum Phase {
    One,
    Two,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.costs.len();
        let m = lp.constraints.len();
        let mut flipped = vec![false; m];
        let mut rel = Vec::with_capacity(m);
        for (i, c) in lp.constraints.iter().enumerate() {
            let r = if c.rhs < 0.0 {
                flipped[i] = true;
                match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                }
            } else {
                c.relation
            };
            rel.push(r);
        }
        let extra: usize = rel
            .iter()
            .map(|r| if *r == Relation::Ge { 2 } else { 1 })
            .sum();
        let cols = n + extra;
        let w = cols + 1;
        let mut a = vec![0.0; m * w];
        let mut is_artificial = vec![false; cols];
        let mut unit_col = vec![0; m];
        let mut next = n;
        for (i, c) in lp.constraints.iter().enumerate() {
            let sign = if flipped[i] { -1.0 } else { 1.0 };
            let row = &mut a[i * w..(i + 1) * w];
            for (dst, &src) in row[..n].iter_mut().zip(&c.coeffs) {
                *dst = sign * src;
            }
            row[cols] = sign * c.rhs;
            match rel[i] {
                Relation::Le => {
                    row[next] = 1.0;
                    unit_col[i] = next;
                    next += 1;
                }
                Relation::Ge => {
                    row[next] = -1.0;
                    row[next + 1] = 1.0;
                    is_artificial[next + 1] = true;
                    unit_col[i] = next + 1;
                    next += 2;
                }
                Relation::Eq => {
                    row[next] = 1.0;
                    is_artificial[next] = true;
                    unit_col[i] = next;
                    next += 1;
                }
            }
        }
        Self {
            rows: m,
            cols,
            n,
            a,
            basis: unit_col.clone(),
            unit_col,
            flipped,
            is_artificial,
            d: vec![0.0; cols],
            iterations: 0,
            phase_one_iterations: 0,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn price(&mut self, cost: &dyn Fn(usize) -> f64) {
        let w = self.width();
        for j in 0..self.cols {
            self.d[j] = cost(j);
        }
        for i in 0..self.rows {
            let cb = cost(self.basis[i]);
            if cb != 0.0 {
                let row = &self.a[i * w..i * w + self.cols];
                for (dj, &aij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * aij;
                }
            }
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let piv = self.a[pr * w + pc];
        {
            let row = &mut self.a[pr * w..(pr + 1) * w];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[pc] = 1.0;
        }
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        let f = self.d[pc];
        if f != 0.0 {
            for (dj, &p) in self.d.iter_mut().zip(prow.iter()) {
                *dj -= f * p;
            }
            self.d[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    fn iterate(&mut self, phase: Phase, opts: &SimplexOptions) -> Result<(), LpError> {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= opts.max_pivots {
                return Err(LpError::IterationLimit(self.iterations));
            }
            let bland = degenerate_run >= opts.degenerate_switch;
            let allowed = |j: usize| match phase {
                Phase::One => true,
                Phase::Two => !self.is_artificial[j],
            };
            let mut enter = None;
            let mut best = -opts.optimality_tol;
            for j in 0..self.cols {
                if self.d[j] < best && allowed(j) {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = self.d[j];
                }
            }
            let Some(pc) = enter else {
                return Ok(());
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                let aij = self.at(i, pc);
                if aij > opts.pivot_tol {
                    let ratio = self.rhs(i).max(0.0) / aij;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-12 {
                                true
                            } else if ratio <= best_ratio + 1e-12 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    aij > self.at(l, pc)
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = best_ratio.min(ratio);
                    }
                }
            }
            let Some(pr) = leave else {
                return Err(LpError::Unbounded);
            };
            if best_ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(pr, pc);
        }
    }

    fn run_phase_one(&mut self, opts: &SimplexOptions) -> Result<(), LpError> {
        if !self.is_artificial.iter().any(|&b| b) {
            return Ok(());
        }
        let art = self.is_artificial.clone();
        self.price(&|j| if art[j] { 1.0 } else { 0.0 });
        self.iterate(Phase::One, opts)?;
        self.phase_one_iterations = self.iterations;
        let residual: f64 = (0..self.rows)
            .filter(|&i| art[self.basis[i]])
            .map(|i| self.rhs(i).abs())
            .sum();
        let scale = (0..self.rows)
            .map(|i| self.rhs(i).abs())
            .fold(1.0, f64::max);
        if residual > 1e-9 * scale {
            return Err(LpError::Infeasible(residual));
        }
        // Drive zero-level artificials out of the basis where possible; rows
        // with no structural entry are redundant and keep their artificial.
        for i in 0..self.rows {
            if art[self.basis[i]] {
                let pick = (0..self.cols)
                    .filter(|&j| !art[j])
                    .max_by(|&p, &q| self.at(i, p).abs().total_cmp(&self.at(i, q).abs()));
                if let Some(j) = pick {
                    if self.at(i, j).abs() > 1e-9 {
                        self.pivot(i, j);
                    }
                }
            }
        }
        Ok(())
    }

    fn run_phase_two(&mut self, costs: &[f64], opts: &SimplexOptions) -> Result<(), LpError> {
        let n = self.n;
        self.price(&|j| if j < n { costs[j] } else { 0.0 });
        self.iterate(Phase::Two, opts)
    }

    fn extract(&self, lp: &LinearProgram) -> LpSolution {
        let mut x = vec![0.0; self.n];
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < self.n {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let duals: Vec<f64> = (0..self.rows)
            .map(|i| {
                let y = -self.d[self.unit_col[i]];
                if self.flipped[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();

        let objective: f64 = lp.costs.iter().zip(&x).map(|(c, v)| c * v).sum();
        let dual_objective: f64 = lp
            .constraints
            .iter()
            .zip(&duals)
            .map(|(c, y)| c.rhs * y)
            .sum();

        let mut dual_inf: f64 = 0.0;
        for j in 0..self.n {
            let aty: f64 = lp
                .constraints
                .iter()
                .zip(&duals)
                .map(|(c, y)| c.coeffs[j] * y)
                .sum();
            dual_inf = dual_inf.max(aty - lp.costs[j]);
        }
        let mut primal_inf: f64 = 0.0;
        for (c, y) in lp.constraints.iter().zip(&duals) {
            let ax: f64 = c.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
            let (viol, sign_viol) = match c.relation {
                Relation::Le => (ax - c.rhs, *y),
                Relation::Ge => (c.rhs - ax, -*y),
                Relation::Eq => ((ax - c.rhs).abs(), 0.0),
            };
            primal_inf = primal_inf.max(viol);
            dual_inf = dual_inf.max(sign_viol);
        }

        LpSolution {
            x,
            duals,
            objective,
            stats: LpStats {
                iterations: self.iterations,
                phase_one_iterations: self.phase_one_iterations,
                duality_gap: (objective - dual_objective).abs(),
                dual_infeasibility: dual_inf.max(0.0),
                primal_infeasibility: primal_inf.max(0.0),
            },
        }
    }
}
