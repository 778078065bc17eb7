//! Dense LU factorization with partial pivoting, the basis kernel of the
//! revised simplex. Sizes stay modest (a few thousand rows at most), so a
//! dense factorization is simpler and predictable.

/// PA = LU with L unit lower triangular, stored packed in one square matrix.
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    /// Transposed copy of `lu`, so the transpose solve walks rows contiguously.
    lut: Vec<f64>,
    /// perm[i] = original row now living in position i.
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factorizes the matrix given column by column. Returns `None` when the
    /// matrix is numerically singular.
    pub fn factor(n: usize, columns: impl Iterator<Item = Vec<(usize, f64)>>) -> Option<DenseLu> {
        let mut a = vec![0.0f64; n * n];
        for (c, col) in columns.enumerate() {
            for (r, v) in col {
                a[r * n + c] = v;
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Partial pivot: largest magnitude in column k at or below the diagonal.
            let mut pivot_row = k;
            let mut pivot_val = a[k * n + k].abs();
            for r in (k + 1)..n {
                let v = a[r * n + k].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = r;
                }
            }
            if pivot_val < 1e-12 {
                return None;
            }
            if pivot_row != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = a[k * n + k];
            for r in (k + 1)..n {
                let factor = a[r * n + k] / pivot;
                a[r * n + k] = factor;
                if factor != 0.0 {
                    for c in (k + 1)..n {
                        a[r * n + c] -= factor * a[k * n + c];
                    }
                }
            }
        }
        let mut lut = vec![0.0f64; n * n];
        for r in 0..n {
            for c in 0..n {
                lut[c * n + r] = a[r * n + c];
            }
        }
        Some(DenseLu {
            n,
            lu: a,
            lut,
            perm,
        })
    }

    /// Solves B x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        // L y = Pb (unit diagonal).
        for i in 1..n {
            let mut sum = x[i];
            let row = &self.lu[i * n..i * n + i];
            for (k, &l) in row.iter().enumerate() {
                sum -= l * x[k];
            }
            x[i] = sum;
        }
        // U x = y.
        for i in (0..n).rev() {
            let mut sum = x[i];
            let row = &self.lu[i * n..(i + 1) * n];
            for k in (i + 1)..n {
                sum -= row[k] * x[k];
            }
            x[i] = sum / row[i];
        }
        b.copy_from_slice(&x);
    }

    /// Solves B^T y = c in place.
    pub fn solve_transpose(&self, c: &mut [f64]) {
        let n = self.n;
        let mut z = c.to_vec();
        // U^T z = c (forward). Row i of `lut` is column i of `lu`.
        for i in 0..n {
            let mut sum = z[i];
            let col = &self.lut[i * n..i * n + i];
            for (k, &u) in col.iter().enumerate() {
                sum -= u * z[k];
            }
            z[i] = sum / self.lut[i * n + i];
        }
        // L^T w = z (backward, unit diagonal).
        for i in (0..n).rev() {
            let mut sum = z[i];
            let col = &self.lut[i * n..(i + 1) * n];
            for k in (i + 1)..n {
                sum -= col[k] * z[k];
            }
            z[i] = sum;
        }
        // y = P^T w.
        for i in 0..n {
            c[self.perm[i]] = z[i];
        }
    }
}

/// Sparse basis factorization specialized for simplex bases.
///
/// Repeatedly peels row and column singletons — column singletons are ordered
/// at the front, row singletons at the back — which permutes the basis to an
/// upper-triangular matrix except for one dense "bump" block in the middle.
/// Simplex bases are dominated by slack and near-unit columns, so the bump is
/// typically a small fraction of the dimension; only it pays the cubic dense
/// factorization cost, and the triangular frame is solved by sparse
/// substitution.
pub struct BasisLu {
    m: usize,
    /// Bump block spans permuted positions [s, e).
    s: usize,
    e: usize,
    /// Dense factorization of the bump block (absent when the bump is empty).
    bump: Option<DenseLu>,
    /// Diagonal pivot values for non-bump positions.
    diag: Vec<f64>,
    /// Off-diagonal row entries by position: (column position, value) with
    /// column position > own position (bump rows keep only columns >= e).
    rows_off: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal column entries by position: (row position, value) with
    /// row position < own position (bump columns keep only rows < s).
    cols_off: Vec<Vec<(usize, f64)>>,
    /// row_of_pos[i] = original row index at permuted position i.
    row_of_pos: Vec<usize>,
    /// col_of_pos[j] = original column index at permuted position j.
    col_of_pos: Vec<usize>,
}

const SINGULAR_TOL: f64 = 1e-12;

impl BasisLu {
    pub fn factor(m: usize, columns: impl Iterator<Item = Vec<(usize, f64)>>) -> Option<BasisLu> {
        // Sparse row- and column-major copies with exact zeros dropped.
        let mut col_list: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut row_list: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (c, col) in columns.enumerate() {
            let col: Vec<(usize, f64)> = col.into_iter().filter(|&(_, v)| v != 0.0).collect();
            for &(r, v) in &col {
                row_list[r].push((c, v));
            }
            col_list.push(col);
        }
        if col_list.len() != m {
            return None;
        }

        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut row_cnt: Vec<usize> = row_list.iter().map(|l| l.len()).collect();
        let mut col_cnt: Vec<usize> = col_list.iter().map(|l| l.len()).collect();

        use std::collections::VecDeque;
        let mut col_q: VecDeque<usize> = (0..m).filter(|&c| col_cnt[c] == 1).collect();
        let mut row_q: VecDeque<usize> = (0..m).filter(|&r| row_cnt[r] == 1).collect();

        let mut row_of_pos = vec![usize::MAX; m];
        let mut col_of_pos = vec![usize::MAX; m];
        let mut front = 0usize; // next front position
        let mut back = m; // one past the last unassigned back position

        // Deactivates a pivot pair and updates neighbor counts.
        let eliminate = |r: usize,
                             c: usize,
                             row_active: &mut Vec<bool>,
                             col_active: &mut Vec<bool>,
                             row_cnt: &mut Vec<usize>,
                             col_cnt: &mut Vec<usize>,
                             col_q: &mut VecDeque<usize>,
                             row_q: &mut VecDeque<usize>| {
            row_active[r] = false;
            col_active[c] = false;
            for &(c2, _) in &row_list[r] {
                if col_active[c2] {
                    col_cnt[c2] -= 1;
                    if col_cnt[c2] == 1 {
                        col_q.push_back(c2);
                    }
                }
            }
            for &(r2, _) in &col_list[c] {
                if row_active[r2] {
                    row_cnt[r2] -= 1;
                    if row_cnt[r2] == 1 {
                        row_q.push_back(r2);
                    }
                }
            }
        };

        loop {
            if let Some(c) = col_q.pop_front() {
                if !col_active[c] || col_cnt[c] != 1 {
                    continue;
                }
                let &(r, v) = col_list[c]
                    .iter()
                    .find(|&&(r, _)| row_active[r])
                    .expect("count said one active entry");
                if v.abs() < SINGULAR_TOL {
                    return None;
                }
                row_of_pos[front] = r;
                col_of_pos[front] = c;
                front += 1;
                eliminate(
                    r,
                    c,
                    &mut row_active,
                    &mut col_active,
                    &mut row_cnt,
                    &mut col_cnt,
                    &mut col_q,
                    &mut row_q,
                );
            } else if let Some(r) = row_q.pop_front() {
                if !row_active[r] || row_cnt[r] != 1 {
                    continue;
                }
                let &(c, v) = row_list[r]
                    .iter()
                    .find(|&&(c, _)| col_active[c])
                    .expect("count said one active entry");
                if v.abs() < SINGULAR_TOL {
                    return None;
                }
                back -= 1;
                row_of_pos[back] = r;
                col_of_pos[back] = c;
                eliminate(
                    r,
                    c,
                    &mut row_active,
                    &mut col_active,
                    &mut row_cnt,
                    &mut col_cnt,
                    &mut col_q,
                    &mut row_q,
                );
            } else {
                break;
            }
        }
        // A row or column with no remaining entries means a singular basis.
        if (0..m).any(|r| row_active[r] && row_cnt[r] == 0)
            || (0..m).any(|c| col_active[c] && col_cnt[c] == 0)
        {
            return None;
        }

        // Remaining rows/columns form the bump, ordered by original index.
        let s = front;
        let e = back;
        let bump_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
        let bump_cols: Vec<usize> = (0..m).filter(|&c| col_active[c]).collect();
        debug_assert_eq!(bump_rows.len(), e - s);
        debug_assert_eq!(bump_cols.len(), e - s);
        for (k, (&r, &c)) in bump_rows.iter().zip(&bump_cols).enumerate() {
            row_of_pos[s + k] = r;
            col_of_pos[s + k] = c;
        }

        let mut pos_of_row = vec![0usize; m];
        let mut pos_of_col = vec![0usize; m];
        for i in 0..m {
            pos_of_row[row_of_pos[i]] = i;
            pos_of_col[col_of_pos[i]] = i;
        }

        // Permuted views for the substitution phases.
        let mut diag = vec![0.0f64; m];
        let mut rows_off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols_off: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let bump_n = e - s;
        let mut bump_dense = vec![0.0f64; bump_n * bump_n];
        for (c, col) in col_list.iter().enumerate() {
            let j = pos_of_col[c];
            for &(r, v) in col {
                let i = pos_of_row[r];
                let in_bump = i >= s && i < e && j >= s && j < e;
                if in_bump {
                    bump_dense[(i - s) * bump_n + (j - s)] = v;
                } else if i == j {
                    diag[i] = v;
                } else {
                    debug_assert!(i < j, "frame entry below the diagonal");
                    rows_off[i].push((j, v));
                    cols_off[j].push((i, v));
                }
            }
        }
        // Bump rows only need their tail (>= e) entries for substitution;
        // bump columns only their front (< s) entries. Others keep all.
        for i in s..e {
            rows_off[i].retain(|&(j, _)| j >= e);
            cols_off[i].retain(|&(j, _)| j < s);
        }
        for l in rows_off.iter_mut().chain(cols_off.iter_mut()) {
            l.sort_unstable_by_key(|&(p, _)| p);
        }

        let bump = if bump_n == 0 {
            None
        } else {
            let cols = (0..bump_n).map(|q| {
                (0..bump_n)
                    .filter(|&p| bump_dense[p * bump_n + q] != 0.0)
                    .map(|p| (p, bump_dense[p * bump_n + q]))
                    .collect::<Vec<_>>()
            });
            // Collect first: DenseLu::factor takes the columns eagerly.
            let cols: Vec<Vec<(usize, f64)>> = cols.collect();
            Some(DenseLu::factor(bump_n, cols.into_iter())?)
        };

        Some(BasisLu {
            m,
            s,
            e,
            bump,
            diag,
            rows_off,
            cols_off,
            row_of_pos,
            col_of_pos,
        })
    }

    /// Size of the dense bump block (diagnostics).
    #[cfg(test)]
    pub fn bump_size(&self) -> usize {
        self.e - self.s
    }

    /// Solves B x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (m, s, e) = (self.m, self.s, self.e);
        let mut x = vec![0.0f64; m];
        let bhat: Vec<f64> = (0..m).map(|i| b[self.row_of_pos[i]]).collect();
        // Tail rows: plain back substitution.
        for i in (e..m).rev() {
            let mut sum = bhat[i];
            for &(j, v) in &self.rows_off[i] {
                sum -= v * x[j];
            }
            x[i] = sum / self.diag[i];
        }
        // Bump rows: subtract tail contributions, then dense solve.
        if let Some(bump) = &self.bump {
            let mut rhs: Vec<f64> = (s..e)
                .map(|i| {
                    let mut sum = bhat[i];
                    for &(j, v) in &self.rows_off[i] {
                        sum -= v * x[j];
                    }
                    sum
                })
                .collect();
            bump.solve(&mut rhs);
            x[s..e].copy_from_slice(&rhs);
        }
        // Front rows.
        for i in (0..s).rev() {
            let mut sum = bhat[i];
            for &(j, v) in &self.rows_off[i] {
                sum -= v * x[j];
            }
            x[i] = sum / self.diag[i];
        }
        for j in 0..m {
            b[self.col_of_pos[j]] = x[j];
        }
    }

    /// Solves B^T y = c in place.
    pub fn solve_transpose(&self, c: &mut [f64]) {
        let (m, s, e) = (self.m, self.s, self.e);
        let mut y = vec![0.0f64; m];
        let chat: Vec<f64> = (0..m).map(|j| c[self.col_of_pos[j]]).collect();
        // Front columns: forward substitution on the transpose.
        for i in 0..s {
            let mut sum = chat[i];
            for &(j, v) in &self.cols_off[i] {
                sum -= v * y[j];
            }
            y[i] = sum / self.diag[i];
        }
        // Bump columns: subtract front contributions, dense transpose solve.
        if let Some(bump) = &self.bump {
            let mut rhs: Vec<f64> = (s..e)
                .map(|i| {
                    let mut sum = chat[i];
                    for &(j, v) in &self.cols_off[i] {
                        sum -= v * y[j];
                    }
                    sum
                })
                .collect();
            bump.solve_transpose(&mut rhs);
            y[s..e].copy_from_slice(&rhs);
        }
        // Tail columns.
        for i in e..m {
            let mut sum = chat[i];
            for &(j, v) in &self.cols_off[i] {
                sum -= v * y[j];
            }
            y[i] = sum / self.diag[i];
        }
        for i in 0..m {
            c[self.row_of_pos[i]] = y[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dense_columns(m: &[&[f64]]) -> Vec<Vec<(usize, f64)>> {
        let n = m.len();
        (0..n)
            .map(|c| (0..n).map(|r| (r, m[r][c])).collect())
            .collect()
    }

    #[test]
    fn solves_small_system() {
        let a: &[&[f64]] = &[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 4.0]];
        let lu = DenseLu::factor(3, dense_columns(a).into_iter()).unwrap();
        let mut b = vec![3.0, 5.0, 5.0];
        lu.solve(&mut b);
        // Verify A x = rhs.
        let rhs = [3.0, 5.0, 5.0];
        for r in 0..3 {
            let got: f64 = (0..3).map(|c| a[r][c] * b[c]).sum();
            assert_abs_diff_eq!(got, rhs[r], epsilon = 1e-12);
        }
    }

    #[test]
    fn transpose_solve_matches() {
        let a: &[&[f64]] = &[&[0.0, 2.0, 1.0], &[1.0, 0.0, 3.0], &[2.0, 1.0, 0.0]];
        let lu = DenseLu::factor(3, dense_columns(a).into_iter()).unwrap();
        let mut c = vec![1.0, 2.0, 3.0];
        lu.solve_transpose(&mut c);
        let rhs = [1.0, 2.0, 3.0];
        for col in 0..3 {
            let got: f64 = (0..3).map(|r| a[r][col] * c[r]).sum();
            assert_abs_diff_eq!(got, rhs[col], epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a: &[&[f64]] = &[&[1.0, 2.0], &[2.0, 4.0]];
        assert!(DenseLu::factor(2, dense_columns(a).into_iter()).is_none());
    }

    fn check_basis_lu(n: usize, cols: Vec<Vec<(usize, f64)>>) -> BasisLu {
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|r| {
                (0..n)
                    .map(|c| {
                        cols[c]
                            .iter()
                            .find(|&&(rr, _)| rr == r)
                            .map_or(0.0, |&(_, v)| v)
                    })
                    .collect()
            })
            .collect();
        let lu = BasisLu::factor(n, cols.into_iter()).expect("nonsingular");
        let b: Vec<f64> = (0..n).map(|i| (i as f64) * 0.7 - 1.3).collect();
        let mut x = b.clone();
        lu.solve(&mut x);
        for r in 0..n {
            let got: f64 = (0..n).map(|c| dense[r][c] * x[c]).sum();
            assert_abs_diff_eq!(got, b[r], epsilon = 1e-9);
        }
        let mut y = b.clone();
        lu.solve_transpose(&mut y);
        for c in 0..n {
            let got: f64 = (0..n).map(|r| dense[r][c] * y[r]).sum();
            assert_abs_diff_eq!(got, b[c], epsilon = 1e-9);
        }
        lu
    }

    #[test]
    fn basis_lu_peels_a_permutation_completely() {
        // A permutation matrix is all singletons: no bump at all.
        let cols: Vec<Vec<(usize, f64)>> = [2usize, 0, 3, 1]
            .iter()
            .map(|&r| vec![(r, 1.0)])
            .collect();
        let lu = check_basis_lu(4, cols);
        assert_eq!(lu.bump_size(), 0);
    }

    #[test]
    fn basis_lu_handles_a_fully_dense_bump() {
        // No singletons anywhere: the whole matrix is the bump.
        let cols = vec![
            vec![(0, 2.0), (1, 1.0), (2, 1.0)],
            vec![(0, 1.0), (1, 3.0), (2, 1.0)],
            vec![(0, 1.0), (1, 1.0), (2, 4.0)],
        ];
        let lu = check_basis_lu(3, cols);
        assert_eq!(lu.bump_size(), 3);
    }

    #[test]
    fn basis_lu_matches_on_random_sparse_bases() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let n = 3 + (trial % 20);
            // Diagonal plus a sprinkling of off-diagonal entries, mimicking a
            // simplex basis (slack unit columns plus a few structural ones).
            let mut cols: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|c| vec![(c, 1.0 + rng.gen::<f64>())])
                .collect();
            for _ in 0..(2 * n) {
                let c = rng.gen_range(0..n);
                let r = rng.gen_range(0..n);
                if cols[c].iter().all(|&(rr, _)| rr != r) {
                    cols[c].push((r, rng.gen_range(-2.0..2.0)));
                }
            }
            check_basis_lu(n, cols);
        }
    }

    #[test]
    fn basis_lu_rejects_singular_input() {
        // Two identical columns.
        let col = vec![(0, 1.0), (1, 2.0)];
        assert!(BasisLu::factor(2, vec![col.clone(), col].into_iter()).is_none());
    }
}
