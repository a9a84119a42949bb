//! Dense linear-algebra oracles over column lists (`Vec<Vec<f64>>`, one
//! inner vector per column).

/// Modified Gram-Schmidt factorization of the given columns.
///
/// Returns `(q_columns, r)` where `r` is `ncols x ncols` row-major. Columns
/// that are numerically dependent get a zero `q` column and `r[j][j] = 0`.
pub fn gram_schmidt_qr(columns: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = columns.len();
    let m = columns.first().map_or(0, Vec::len);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    let scale = columns
        .iter()
        .map(|c| norm(c))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for j in 0..k {
        let mut v = columns[j].clone();
        // Two passes of re-orthogonalization.
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &v);
                r[i][j] += c;
                for t in 0..m {
                    v[t] -= c * qi[t];
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-13 * scale {
            r[j][j] = nv;
            q.push(v.iter().map(|x| x / nv).collect());
        } else {
            r[j][j] = 0.0;
            q.push(vec![0.0; m]);
        }
    }
    (q, r)
}

/// Largest absolute entry of `A - Q R` where `A` is given by columns, `q` is a
/// list of columns and `r` is a row-major upper triangle.
pub fn max_reconstruction_error(columns: &[Vec<f64>], q: &[Vec<f64>], r: &[Vec<f64>]) -> f64 {
    let m = columns.first().map_or(0, Vec::len);
    let mut worst = 0.0_f64;
    for (j, col) in columns.iter().enumerate() {
        for t in 0..m {
            let mut acc = 0.0;
            for (i, qi) in q.iter().enumerate() {
                acc += qi[t] * r[i][j];
            }
            worst = worst.max((col[t] - acc).abs());
        }
    }
    worst
}

/// Numerical rank by Gaussian elimination with full pivoting. An entry is
/// treated as zero when it falls below `rel_tol` times the largest entry.
pub fn numerical_rank(columns: &[Vec<f64>], rel_tol: f64) -> usize {
    let ncols = columns.len();
    if ncols == 0 {
        return 0;
    }
    let nrows = columns[0].len();
    let mut a: Vec<Vec<f64>> = (0..nrows)
        .map(|i| (0..ncols).map(|j| columns[j][i]).collect())
        .collect();
    let biggest = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if biggest == 0.0 {
        return 0;
    }
    let mut rank = 0;
    let mut row = 0;
    let mut used_cols = vec![false; ncols];
    while row < nrows {
        let mut best = (0.0, 0, 0);
        for (i, arow) in a.iter().enumerate().skip(row) {
            for (j, &x) in arow.iter().enumerate() {
                if !used_cols[j] && x.abs() > best.0 {
                    best = (x.abs(), i, j);
                }
            }
        }
        if best.0 <= rel_tol * biggest {
            break;
        }
        let (_, pi, pj) = best;
        a.swap(row, pi);
        used_cols[pj] = true;
        let pivot = a[row][pj];
        for i in row + 1..nrows {
            let f = a[i][pj] / pivot;
            if f != 0.0 {
                for j in 0..ncols {
                    a[i][j] -= f * a[row][j];
                }
            }
        }
        rank += 1;
        row += 1;
    }
    rank
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
