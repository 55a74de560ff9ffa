//! Independent reference implementations used only by tests.
#![allow(dead_code)]

use calib_core::Transcript;

/// Distinct predictions in increasing order with their accumulated bias.
pub fn profile(tr: &Transcript) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut order: Vec<usize> = (0..tr.len()).collect();
    order.sort_by(|&a, &b| tr.predictions()[a].total_cmp(&tr.predictions()[b]));
    for t in order {
        let p = tr.predictions()[t];
        let bias = f64::from(tr.outcomes()[t]) - p;
        match pairs.last_mut() {
            Some(last) if last.0 == p => last.1 += bias,
            _ => pairs.push((p, bias)),
        }
    }
    pairs
}

/// Smooth calibration error by vertex enumeration.
///
/// The feasible set is `{f ∈ [-1,1]^n : |f_i − f_{i+1}| ≤ α_{i+1} − α_i}`.
/// The linear objective attains its maximum at a vertex, i.e. at a point
/// where `n` linearly independent constraints are tight. Every `n`-subset of
/// constraints is solved by Gaussian elimination and the feasible solutions
/// are scored. Exponential in `n`; intended for `n ≤ 5`.
pub fn smce_vertex_oracle(tr: &Transcript) -> f64 {
    let prof = profile(tr);
    let n = prof.len();
    assert!(n <= 6, "vertex oracle is exponential in the number of values");
    // constraint rows a·f ≤ b
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..n {
        let mut up = vec![0.0; n];
        up[i] = 1.0;
        cons.push((up.clone(), 1.0));
        up[i] = -1.0;
        cons.push((up, 1.0));
    }
    for i in 0..n.saturating_sub(1) {
        let gap = prof[i + 1].0 - prof[i].0;
        let mut a = vec![0.0; n];
        a[i] = 1.0;
        a[i + 1] = -1.0;
        cons.push((a.clone(), gap));
        a[i] = -1.0;
        a[i + 1] = 1.0;
        cons.push((a, gap));
    }
    let mut best = f64::NEG_INFINITY;
    let m = cons.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        if let Some(f) = solve_square(&pick.iter().map(|&j| cons[j].clone()).collect::<Vec<_>>()) {
            let feasible = cons
                .iter()
                .all(|(a, b)| a.iter().zip(&f).map(|(x, y)| x * y).sum::<f64>() <= b + 1e-9);
            if feasible {
                let v: f64 = f.iter().zip(&prof).map(|(fi, (_, d))| fi * d).sum();
                best = best.max(v);
            }
        }
        // next n-combination of 0..m
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < m - n + i {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(rows: &[(Vec<f64>, f64)]) -> Option<Vec<f64>> {
    let n = rows.len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|(r, b)| {
            let mut v = r.clone();
            v.push(*b);
            v
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let factor = a[r][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (dst, src) in a[r][col..=n].iter_mut().zip(&pivot_row[col..=n]) {
                    *dst -= factor * src;
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Calibration distance by trying every labelling `t ↦ label ∈ 0..T`
/// (`T^T` of them); each labelling induces a partition whose blocks take
/// their outcome mean.
pub fn caldist_brute_force(tr: &Transcript) -> f64 {
    let n = tr.len();
    assert!(n <= 7, "brute force is T^T");
    let x = tr.outcomes();
    let p = tr.predictions();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut ones = vec![0.0; n];
        let mut count = vec![0.0; n];
        for t in 0..n {
            ones[labels[t]] += f64::from(x[t]);
            count[labels[t]] += 1.0;
        }
        let cost: f64 = (0..n)
            .map(|t| (p[t] - ones[labels[t]] / count[labels[t]]).abs())
            .sum();
        best = best.min(cost);
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < n {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// Expected calibration error straight from the definition: for every
/// distinct value, the absolute sum of `x_t − p_t` over the steps that
/// predicted it.
pub fn ece_oracle(tr: &Transcript) -> f64 {
    profile(tr).iter().map(|(_, d)| d.abs()).sum()
}

pub fn transcript(x: &[u8], p: &[f64]) -> Transcript {
    Transcript::new(x.to_vec(), p.to_vec()).expect("valid transcript")
}
