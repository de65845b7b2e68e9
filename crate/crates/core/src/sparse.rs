//! Symmetric sparse matrices and an envelope Cholesky factorization.

use crate::error::{Error, Result};

/// Symmetric matrix in compressed-row form with both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped. Each off-diagonal pair must be supplied in both
    /// orientations; use [`SparseSymMatrix::from_lower_triplets`] otherwise.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let j = r[k].0;
                let mut s = 0.0;
                while k < r.len() && r[k].0 == j {
                    s += r[k].1;
                    k += 1;
                }
                if s != 0.0 {
                    cols.push(j);
                    vals.push(s);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseSymMatrix {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Builds from triplets with `row >= col`, mirroring the strict lower part.
    pub fn from_lower_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut all = Vec::new();
        for (i, j, v) in triplets {
            all.push((i, j, v));
            if i != j {
                all.push((j, i, v));
            }
        }
        Self::from_triplets(n, all)
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self> {
        let n = a.len();
        let mut t = Vec::new();
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid("dense matrix is not square"));
            }
            for (j, &v) in row.iter().enumerate() {
                t.push((i, j, v));
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, 1.0))).expect("indices in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column indices and values of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "vector length must match matrix size");
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &SparseSymMatrix, b: f64) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::invalid("matrix sizes differ"));
        }
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        Self::from_triplets(self.n, t)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut m = self.clone();
        for v in &mut m.vals {
            *v *= a;
        }
        m
    }

    /// Principal submatrix on the given (ascending) index list.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            map[i] = k;
        }
        let mut t = Vec::new();
        for (k, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    t.push((k, map[j], v));
                }
            }
        }
        Self::from_triplets(idx.len(), t).expect("indices in range")
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn total_sum(&self) -> f64 {
        self.vals.iter().sum()
    }
}

/// Reverse Cuthill-McKee ordering. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSymMatrix) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        // Start each component from an unvisited node of minimum degree.
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i));
        let Some(start) = start else { break };
        let start = pseudo_peripheral(&adj, start);
        visited[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                order.push(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    level[start] = 0;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &j in &adj[v] {
            if level[j] == usize::MAX {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    level
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut node = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(adj, node);
        let far = level.iter().copied().filter(|&l| l != usize::MAX).max().unwrap_or(0);
        if far <= ecc && node != start {
            break;
        }
        ecc = far;
        let cand = (0..adj.len())
            .filter(|&i| level[i] == far)
            .min_by_key(|&i| (adj[i].len(), i))
            .unwrap_or(node);
        if cand == node {
            break;
        }
        node = cand;
    }
    node
}

/// Ordering and envelope of a symmetric matrix, reusable across numeric
/// factorizations with the same sparsity pattern.
#[derive(Clone, Debug)]
pub struct SkylineSymbolic {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
}

impl SkylineSymbolic {
    pub fn new(a: &SparseSymMatrix) -> Self {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = iperm[old];
            for (j_old, _) in a.row(old) {
                let j = iperm[j_old];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        SkylineSymbolic {
            n,
            perm,
            iperm,
            first,
            start,
        }
    }

    pub fn envelope_size(&self) -> usize {
        self.start[self.n]
    }

    /// Factorizes `a`, whose pattern must be contained in the one used to
    /// build `self`. Rows and columns with `mask[i] == true` are replaced by
    /// the identity.
    pub fn factor(&self, a: &SparseSymMatrix, mask: Option<&[bool]>) -> Result<SkylineCholesky> {
        let n = self.n;
        if a.n() != n {
            return Err(Error::invalid("matrix size differs from symbolic factorization"));
        }
        let masked = |old: usize| mask.is_some_and(|m| m[old]);
        let mut data = vec![0.0; self.start[n]];
        for old in 0..n {
            let i = self.iperm[old];
            let base = self.start[i] - self.first[i];
            if masked(old) {
                data[base + i] = 1.0;
                continue;
            }
            for (j_old, v) in a.row(old) {
                let j = self.iperm[j_old];
                if j <= i && !masked(j_old) {
                    if j < self.first[i] {
                        return Err(Error::invalid("matrix pattern exceeds the symbolic envelope"));
                    }
                    data[base + j] = v;
                }
            }
        }
        for i in 0..n {
            let fi = self.first[i];
            let bi = self.start[i] - fi;
            for j in fi..i {
                let fj = self.first[j];
                let bj = self.start[j] - fj;
                let k0 = fi.max(fj);
                let mut s = data[bi + j];
                for k in k0..j {
                    s -= data[bi + k] * data[bj + k];
                }
                data[bi + j] = s / data[bj + j];
            }
            let mut d = data[bi + i];
            for k in fi..i {
                d -= data[bi + k] * data[bi + k];
            }
            if !(d > 0.0) {
                return Err(Error::NotSpd {
                    pivot: self.perm[i],
                    value: d,
                });
            }
            data[bi + i] = d.sqrt();
        }
        Ok(SkylineCholesky {
            symbolic: self.clone(),
            data,
        })
    }
}

/// Envelope Cholesky factor `P A P^T = L L^T`.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    symbolic: SkylineSymbolic,
    data: Vec<f64>,
}

impl SkylineCholesky {
    pub fn new(a: &SparseSymMatrix) -> Result<Self> {
        SkylineSymbolic::new(a).factor(a, None)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &self.symbolic;
        let n = s.n;
        assert_eq!(b.len(), n, "right-hand side length must match matrix size");
        let mut y: Vec<f64> = s.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let bi = s.start[i] - s.first[i];
            let mut v = y[i];
            for k in s.first[i]..i {
                v -= self.data[bi + k] * y[k];
            }
            y[i] = v / self.data[bi + i];
        }
        for i in (0..n).rev() {
            let bi = s.start[i] - s.first[i];
            y[i] /= self.data[bi + i];
            let yi = y[i];
            for k in s.first[i]..i {
                y[k] -= self.data[bi + k] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in s.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &SparseSymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(SkylineCholesky::new(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn laplacian_2d(m: usize) -> SparseSymMatrix {
        let id = |i: usize, j: usize| j * m + i;
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                t.push((id(i, j), id(i, j), 4.0));
                if i + 1 < m {
                    t.push((id(i + 1, j), id(i, j), -1.0));
                }
                if j + 1 < m {
                    t.push((id(i, j + 1), id(i, j), -1.0));
                }
            }
        }
        SparseSymMatrix::from_lower_triplets(m * m, t).unwrap()
    }

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let a = SparseSymMatrix::from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0), (0, 1, 1.0), (0, 1, -1.0), (1, 1, 5.0)]).unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 2);
        assert!(SparseSymMatrix::from_triplets(2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn cholesky_matches_dense() {
        let a = laplacian_2d(7);
        let b: Vec<f64> = (0..49).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = solve_spd(&a, &b).unwrap();
        let dense = DMatrix::from_fn(49, 49, |i, j| a.get(i, j));
        let xd = dense.lu().solve(&DVector::from_vec(b)).unwrap();
        for i in 0..49 {
            assert!((x[i] - xd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rcm_reduces_envelope() {
        // A grid numbered column-major has the same bandwidth; a random
        // shuffle has a much larger one that RCM should recover.
        let a = laplacian_2d(10);
        let n = a.n();
        let shuffle: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            for (j, v) in a.row(i) {
                t.push((shuffle[i], shuffle[j], v));
            }
        }
        let b = SparseSymMatrix::from_triplets(n, t).unwrap();
        let s = SkylineSymbolic::new(&b);
        assert!(s.envelope_size() <= 12 * n);
        let mut p = reverse_cuthill_mckee(&b);
        p.sort();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn masked_factor_solves_free_block() {
        let a = laplacian_2d(4);
        let mask: Vec<bool> = (0..16).map(|i| i % 3 == 0).collect();
        let sym = SkylineSymbolic::new(&a);
        let f = sym.factor(&a, Some(&mask)).unwrap();
        let free: Vec<usize> = (0..16).filter(|&i| !mask[i]).collect();
        let sub = a.submatrix(&free);
        let b: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let x = f.solve(&b);
        let bf: Vec<f64> = free.iter().map(|&i| b[i]).collect();
        let xf = solve_spd(&sub, &bf).unwrap();
        for (k, &i) in free.iter().enumerate() {
            assert!((x[i] - xf[k]).abs() < 1e-12);
        }
        for i in (0..16).filter(|&i| mask[i]) {
            assert_eq!(x[i], b[i]);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let a = SparseSymMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(SkylineCholesky::new(&a), Err(Error::NotSpd { .. })));
    }

    proptest! {
        #[test]
        fn random_spd_solve(n in 1usize..12, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let g = DMatrix::from_fn(n, n, |_, _| if rng.gen_bool(0.4) { rng.gen_range(-1.0..1.0) } else { 0.0 });
            let a = &g * g.transpose() + DMatrix::identity(n, n);
            let s = SparseSymMatrix::from_dense(&(0..n).map(|i| (0..n).map(|j| a[(i, j)]).collect()).collect::<Vec<_>>()).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_spd(&s, &b).unwrap();
            let r = s.mul_vec(&x);
            for i in 0..n {
                prop_assert!((r[i] - b[i]).abs() < 1e-10);
            }
        }
    }
}
