//! Sparse LU factorization of simplex bases plus a product-form eta file.
//!
//! Factorization is left-looking (Gilbert–Peierls): each basis column is
//! solved against the columns of `L` built so far, then a pivot is chosen
//! among the rows not yet pivoted using threshold partial pivoting with a
//! static row-count tie breaker. Columns that turn out dependent are
//! reported back so the caller can swap in logical columns.

/// Compressed sparse column storage.
#[derive(Clone, Debug, Default)]
pub(crate) struct CscMatrix {
    pub start: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl CscMatrix {
    pub fn ncols(&self) -> usize {
        self.start.len() - 1
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.start[j], self.start[j + 1]);
        (&self.idx[s..e], &self.val[s..e])
    }
}

/// One basis column handed to the factorization.
#[derive(Clone, Copy)]
pub(crate) enum BasisColumn<'a> {
    Sparse(&'a [usize], &'a [f64]),
    /// Logical column `-e_row`.
    NegUnit(usize),
}

impl BasisColumn<'_> {
    fn nnz(&self) -> usize {
        match self {
            BasisColumn::Sparse(i, _) => i.len(),
            BasisColumn::NegUnit(_) => 1,
        }
    }
}

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Clone, Debug, Default)]
pub(crate) struct LuFactors {
    m: usize,
    /// Factor position -> pivot row.
    pivot_row: Vec<usize>,
    /// Factor position -> basis position.
    col_of: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    /// Factor positions (< own position).
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
}

/// Outcome of a factorization that hit dependent columns: basis position
/// `pos` must be replaced by the logical of `row`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Replacement {
    pub pos: usize,
    pub row: usize,
}

impl LuFactors {
    pub fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Factorizes the `m x m` matrix whose columns are `cols` (indexed by
    /// basis position). Dependent columns are dropped and replaced by
    /// logicals; the replacements are returned.
    pub fn factorize(m: usize, cols: &[BasisColumn<'_>]) -> (LuFactors, Vec<Replacement>) {
        debug_assert_eq!(cols.len(), m);
        let mut row_count = vec![0usize; m];
        for c in cols {
            match c {
                BasisColumn::Sparse(idx, _) => idx.iter().for_each(|&i| row_count[i] += 1),
                BasisColumn::NegUnit(i) => row_count[*i] += 1,
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (cols[p].nnz(), p));

        let mut f = LuFactors {
            m,
            pivot_row: Vec::with_capacity(m),
            col_of: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
        };
        // row -> factor position, usize::MAX while unpivoted
        let mut row_pos = vec![usize::MAX; m];
        let mut work = vec![0.0f64; m];
        let mut in_pattern = vec![false; m];
        let mut pattern: Vec<usize> = Vec::new();
        let mut topo: Vec<usize> = Vec::new();
        let mut visited = vec![false; m];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut dropped: Vec<usize> = Vec::new();

        for &pos in &order {
            pattern.clear();
            match cols[pos] {
                BasisColumn::Sparse(idx, val) => {
                    for (&i, &v) in idx.iter().zip(val) {
                        if v != 0.0 {
                            if !in_pattern[i] {
                                in_pattern[i] = true;
                                pattern.push(i);
                            }
                            work[i] += v;
                        }
                    }
                }
                BasisColumn::NegUnit(i) => {
                    in_pattern[i] = true;
                    pattern.push(i);
                    work[i] = -1.0;
                }
            }

            // Topological order of pivoted rows reachable from the pattern.
            topo.clear();
            for s in 0..pattern.len() {
                let r = pattern[s];
                if row_pos[r] == usize::MAX || visited[r] {
                    continue;
                }
                visited[r] = true;
                stack.push((r, f.l_start[row_pos[r]]));
                while let Some(&(node, next)) = stack.last() {
                    let end = f.l_start[row_pos[node] + 1];
                    let mut t = next;
                    let mut child = None;
                    while t < end {
                        let c = f.l_idx[t];
                        t += 1;
                        if row_pos[c] != usize::MAX && !visited[c] {
                            child = Some(c);
                            break;
                        }
                    }
                    if let Some(top) = stack.last_mut() {
                        top.1 = t;
                    }
                    match child {
                        Some(c) => {
                            visited[c] = true;
                            stack.push((c, f.l_start[row_pos[c]]));
                        }
                        None => {
                            topo.push(node);
                            stack.pop();
                        }
                    }
                }
            }
            for &r in &topo {
                visited[r] = false;
            }

            // Sparse forward solve with L in topological order.
            for &r in topo.iter().rev() {
                let k = row_pos[r];
                let xr = work[r];
                if xr == 0.0 {
                    continue;
                }
                for t in f.l_start[k]..f.l_start[k + 1] {
                    let i = f.l_idx[t];
                    if !in_pattern[i] {
                        in_pattern[i] = true;
                        pattern.push(i);
                    }
                    work[i] -= f.l_val[t] * xr;
                }
            }

            // Pivot choice among unpivoted rows.
            let mut amax = 0.0f64;
            for &i in &pattern {
                if row_pos[i] == usize::MAX {
                    amax = amax.max(work[i].abs());
                }
            }
            if amax <= SINGULAR_TOL {
                dropped.push(pos);
                for &i in &pattern {
                    work[i] = 0.0;
                    in_pattern[i] = false;
                }
                continue;
            }
            let mut piv_row = usize::MAX;
            let mut best = (usize::MAX, 0.0f64);
            for &i in &pattern {
                if row_pos[i] != usize::MAX {
                    continue;
                }
                let a = work[i].abs();
                if a >= PIVOT_THRESHOLD * amax {
                    let key = row_count[i];
                    if key < best.0 || (key == best.0 && a > best.1) {
                        best = (key, a);
                        piv_row = i;
                    }
                }
            }
            let k = f.pivot_row.len();
            let piv = work[piv_row];
            for &i in &pattern {
                let v = work[i];
                if i == piv_row || v == 0.0 {
                    continue;
                }
                if row_pos[i] != usize::MAX {
                    f.u_idx.push(row_pos[i]);
                    f.u_val.push(v);
                } else {
                    f.l_idx.push(i);
                    f.l_val.push(v / piv);
                }
            }
            for &i in &pattern {
                work[i] = 0.0;
                in_pattern[i] = false;
            }
            f.u_diag.push(piv);
            f.u_start.push(f.u_idx.len());
            f.l_start.push(f.l_idx.len());
            f.pivot_row.push(piv_row);
            f.col_of.push(pos);
            row_pos[piv_row] = k;
        }

        // Fill dropped positions with logicals of the rows left unpivoted.
        let mut replacements = Vec::new();
        if !dropped.is_empty() {
            let free_rows: Vec<usize> = (0..m).filter(|&r| row_pos[r] == usize::MAX).collect();
            debug_assert_eq!(free_rows.len(), dropped.len());
            for (&pos, &row) in dropped.iter().zip(&free_rows) {
                let k = f.pivot_row.len();
                f.u_diag.push(-1.0);
                f.u_start.push(f.u_idx.len());
                f.l_start.push(f.l_idx.len());
                f.pivot_row.push(row);
                f.col_of.push(pos);
                row_pos[row] = k;
                replacements.push(Replacement { pos, row });
            }
        }
        (f, replacements)
    }

    /// Solves `B x = rhs`. `rhs` is indexed by row on entry; the result is
    /// written to `out` indexed by basis position. `rhs` is clobbered.
    pub fn solve(&self, rhs: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let z = rhs[self.pivot_row[k]];
            if z == 0.0 {
                continue;
            }
            for t in self.l_start[k]..self.l_start[k + 1] {
                rhs[self.l_idx[t]] -= self.l_val[t] * z;
            }
        }
        for k in (0..self.m).rev() {
            let r = self.pivot_row[k];
            let v = rhs[r] / self.u_diag[k];
            rhs[r] = 0.0;
            out[self.col_of[k]] = v;
            if v == 0.0 {
                continue;
            }
            for t in self.u_start[k]..self.u_start[k + 1] {
                rhs[self.pivot_row[self.u_idx[t]]] -= self.u_val[t] * v;
            }
        }
    }

    /// Solves `B^T y = c`. `c` is indexed by basis position on entry; the
    /// result is written to `y` indexed by row. `h` is scratch (len m).
    pub fn solve_transpose(&self, c: &[f64], h: &mut [f64], y: &mut [f64]) {
        for k in 0..self.m {
            let mut acc = c[self.col_of[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                acc -= self.u_val[t] * h[self.u_idx[t]];
            }
            h[k] = acc / self.u_diag[k];
        }
        for k in (0..self.m).rev() {
            let mut acc = h[k];
            for t in self.l_start[k]..self.l_start[k + 1] {
                acc -= self.l_val[t] * y[self.l_idx[t]];
            }
            y[self.pivot_row[k]] = acc;
        }
    }
}

/// Product-form update `B_new^{-1} = E B^{-1}` for one basis change.
#[derive(Clone, Debug)]
pub(crate) struct Eta {
    pos: usize,
    pivot_inv: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Eta {
    /// `alpha = B^{-1} a_q` (by basis position), leaving position `pos`.
    pub fn new(alpha: &[f64], pos: usize) -> Eta {
        let piv = alpha[pos];
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a != 0.0 {
                idx.push(i);
                val.push(-a / piv);
            }
        }
        Eta {
            pos,
            pivot_inv: 1.0 / piv,
            idx,
            val,
        }
    }

    pub fn nnz(&self) -> usize {
        self.idx.len() + 1
    }

    pub fn apply(&self, x: &mut [f64]) {
        let xr = x[self.pos];
        if xr == 0.0 {
            return;
        }
        x[self.pos] = xr * self.pivot_inv;
        for (&i, &e) in self.idx.iter().zip(&self.val) {
            x[i] += e * xr;
        }
    }

    pub fn apply_transpose(&self, c: &mut [f64]) {
        let mut acc = c[self.pos] * self.pivot_inv;
        for (&i, &e) in self.idx.iter().zip(&self.val) {
            acc += e * c[i];
        }
        c[self.pos] = acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
        let m = a.len();
        let mut idx = vec![Vec::new(); m];
        let mut val = vec![Vec::new(); m];
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    idx[j].push(i);
                    val[j].push(v);
                }
            }
        }
        (idx, val)
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn solves_small_system_both_ways() {
        let a = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 4.0, 1.0],
            vec![0.0, 0.0, 1.0, 5.0],
        ];
        let (idx, val) = dense_cols(&a);
        let cols: Vec<_> = (0..4)
            .map(|j| BasisColumn::Sparse(&idx[j], &val[j]))
            .collect();
        let (lu, rep) = LuFactors::factorize(4, &cols);
        assert!(rep.is_empty());
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut rhs = matvec(&a, &x_true);
        let mut x = vec![0.0; 4];
        lu.solve(&mut rhs, &mut x);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12);
        }
        // B^T y = c
        let y_true = [0.3, 1.0, -1.0, 2.0];
        let at: Vec<Vec<f64>> = (0..4).map(|j| (0..4).map(|i| a[i][j]).collect()).collect();
        let c = matvec(&at, &y_true);
        let mut h = vec![0.0; 4];
        let mut y = vec![0.0; 4];
        lu.solve_transpose(&c, &mut h, &mut y);
        for (u, v) in y.iter().zip(&y_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn dependent_column_is_replaced() {
        // third column duplicates the first
        let a = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0]];
        let (idx, val) = dense_cols(&a);
        let cols: Vec<_> = (0..3)
            .map(|j| BasisColumn::Sparse(&idx[j], &val[j]))
            .collect();
        let (_, rep) = LuFactors::factorize(3, &cols);
        assert_eq!(rep.len(), 1);
    }

    #[test]
    fn eta_update_matches_refactor() {
        let a = vec![vec![2.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 3.0]];
        let (idx, val) = dense_cols(&a);
        let cols: Vec<_> = (0..3)
            .map(|j| BasisColumn::Sparse(&idx[j], &val[j]))
            .collect();
        let (lu, _) = LuFactors::factorize(3, &cols);
        // replace column 1 by q = (1, 1, 1)
        let q = [1.0, 1.0, 1.0];
        let mut rhs = q.to_vec();
        let mut alpha = vec![0.0; 3];
        lu.solve(&mut rhs, &mut alpha);
        let eta = Eta::new(&alpha, 1);
        let mut b2 = a.clone();
        for i in 0..3 {
            b2[i][1] = q[i];
        }
        let x_true = [0.5, -1.0, 2.0];
        let mut rhs = matvec(&b2, &x_true);
        let mut x = vec![0.0; 3];
        lu.solve(&mut rhs, &mut x);
        eta.apply(&mut x);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-12, "{x:?}");
        }
        let y_true = [1.0, 2.0, -0.5];
        let c: Vec<f64> = (0..3).map(|j| (0..3).map(|i| b2[i][j] * y_true[i]).sum()).collect();
        let mut c2 = c.clone();
        eta.apply_transpose(&mut c2);
        let mut h = vec![0.0; 3];
        let mut y = vec![0.0; 3];
        lu.solve_transpose(&c2, &mut h, &mut y);
        for (u, v) in y.iter().zip(&y_true) {
            assert!((u - v).abs() < 1e-12, "{y:?}");
        }
    }
}
