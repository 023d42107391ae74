//! Banded storage and a banded LU factorization with partial pivoting.
//!
//! Every matrix in the solver couples only neighbouring mesh nodes, so after a
//! suitable node ordering (see [`DofMap`]) all operators are banded. The
//! bordered saddle-point systems are indefinite, hence LU with row pivoting
//! rather than a Cholesky factor.

use crate::error::{Result, RodError};
use crate::scalar::Real;

/// Assigns storage positions to nodal degrees of freedom.
///
/// Natural index of `(node, local)` is `node * per_node + local`. The storage
/// position replaces `node` by its slot. Periodic meshes use the interleaved
/// slot order `0, 1, n-1, 2, n-2, ...` so that the wrap-around element stays
/// within a bandwidth of two slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    per_node: usize,
    slot_of_node: Vec<usize>,
    node_of_slot: Vec<usize>,
    slot_span: usize,
}

impl DofMap {
    pub fn sequential(n_nodes: usize, per_node: usize) -> Self {
        let order: Vec<usize> = (0..n_nodes).collect();
        Self::from_order(order, per_node, 1)
    }

    pub fn interleaved(n_nodes: usize, per_node: usize) -> Self {
        let mut order = Vec::with_capacity(n_nodes);
        if n_nodes > 0 {
            order.push(0);
        }
        let (mut lo, mut hi) = (1usize, n_nodes.saturating_sub(1));
        while lo <= hi && order.len() < n_nodes {
            order.push(lo);
            if hi != lo {
                order.push(hi);
            }
            lo += 1;
            hi = hi.saturating_sub(1);
        }
        Self::from_order(order, per_node, 2)
    }

    fn from_order(node_of_slot: Vec<usize>, per_node: usize, slot_span: usize) -> Self {
        let mut slot_of_node = vec![0; node_of_slot.len()];
        for (slot, &node) in node_of_slot.iter().enumerate() {
            slot_of_node[node] = slot;
        }
        DofMap {
            per_node,
            slot_of_node,
            node_of_slot,
            slot_span,
        }
    }

    pub fn per_node(&self) -> usize {
        self.per_node
    }

    pub fn n_nodes(&self) -> usize {
        self.slot_of_node.len()
    }

    pub fn len(&self) -> usize {
        self.per_node * self.n_nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Half bandwidth of any operator coupling only adjacent nodes.
    pub fn half_bandwidth(&self) -> usize {
        (self.slot_span + 1) * self.per_node - 1
    }

    #[inline]
    pub fn position(&self, natural: usize) -> usize {
        let node = natural / self.per_node;
        self.slot_of_node[node] * self.per_node + natural % self.per_node
    }

    #[inline]
    pub fn natural(&self, position: usize) -> usize {
        let slot = position / self.per_node;
        self.node_of_slot[slot] * self.per_node + position % self.per_node
    }

    pub fn to_positions<T: Copy + Default>(&self, natural: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); natural.len()];
        for (i, v) in natural.iter().enumerate() {
            out[self.position(i)] = *v;
        }
        out
    }

    pub fn to_natural<T: Copy + Default>(&self, positions: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); positions.len()];
        for (p, v) in positions.iter().enumerate() {
            out[self.natural(p)] = *v;
        }
        out
    }
}

/// Symmetric band matrix storing the lower band row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBand<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Real> SymBand<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand {
            n,
            bw,
            data: vec![T::zero(); n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        (r - c <= self.bw).then(|| r * (self.bw + 1) + (r - c))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)` (once on the diagonal).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside bandwidth {}", self.bw));
        self.data[s] = self.data[s] + v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for i in 0..self.n {
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            y[i] = y[i] + row[0] * x[i];
            for d in 1..=self.bw.min(i) {
                let a = row[d];
                if a != T::zero() {
                    y[i] = y[i] + a * x[i - d];
                    y[i - d] = y[i - d] + a * x[i];
                }
            }
        }
        y
    }

    /// `self += s * other`; both must share dimension and bandwidth.
    pub fn axpy(&mut self, s: T, other: &SymBand<T>) {
        assert_eq!((self.n, self.bw), (other.n, other.bw));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * *b;
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        SymBand {
            n: self.n,
            bw: self.bw,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, a| m.max(a.abs()))
    }
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals, factored in place.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` columns hold
/// fill-in created by row interchanges.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
    mult: Vec<T>,
    piv: Vec<usize>,
    factored: bool,
}

impl<T: Real> BandLu<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandLu {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
            mult: vec![T::zero(); n * kl.max(1)],
            piv: (0..n).collect(),
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band ({}, {})",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    /// LU factorization with partial pivoting. A pivot below
    /// `rel_tol * max|A|` is reported as singular.
    pub fn factor(&mut self, rel_tol: T, stage: &str) -> Result<()> {
        let n = self.n;
        let scale = self.data.iter().fold(T::zero(), |m, a| m.max(a.abs()));
        let tiny = rel_tol * scale;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let a = self.data[self.idx(i, k)].abs();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(RodError::SingularSystem {
                    stage: stage.to_string(),
                    row: k,
                    pivot: best.as_f64(),
                });
            }
            self.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.mult[k * self.kl.max(1) + (i - k - 1)] = l;
                self.data[ik] = T::zero();
                if l != T::zero() {
                    let row_k = k * self.width + self.kl;
                    let row_i = i * self.width + (k + self.kl - i);
                    for j in k + 1..=last_col {
                        let akj = self.data[row_k + (j - k)];
                        let s = row_i + (j - k);
                        self.data[s] = self.data[s] - l * akj;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        assert!(self.factored, "solve before factor");
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != T::zero() {
                for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    x[i] = x[i] - self.mult[k * self.kl.max(1) + (i - k - 1)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut s = x[k];
            let row = k * self.width + self.kl;
            for j in k + 1..=last_col {
                s = s - self.data[row + (j - k)] * x[j];
            }
            x[k] = s / self.data[row];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interleaved_order_keeps_ring_neighbours_close() {
        for n in [3usize, 4, 7, 10] {
            let map = DofMap::interleaved(n, 1);
            for i in 0..n {
                let a = map.position(i) as isize;
                let b = map.position((i + 1) % n) as isize;
                assert!((a - b).abs() <= 2, "n={n} i={i}");
            }
            let mut seen: Vec<usize> = (0..n).map(|i| map.position(i)).collect();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn band_lu_solves_tridiagonal_with_zero_diagonal() {
        // [[0,1,0],[1,0,1],[0,1,1]] forces row interchanges.
        let mut a = BandLu::<f64>::zeros(3, 1, 1);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 2, 1.0);
        a.add(2, 1, 1.0);
        a.add(2, 2, 1.0);
        a.factor(1e-14, "test").unwrap();
        let x = a.solve(&[1.0, 2.0, 3.0]);
        // x1 = 1, x0 + x2 = 2, x1 + x2 = 3 → x2 = 2, x0 = 0
        assert!((x[0] - 0.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
        assert!((x[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_band_matrix_is_reported() {
        let mut a = BandLu::<f64>::zeros(2, 1, 1);
        a.add(0, 0, 1.0);
        a.add(0, 1, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 1, 1.0);
        let err = a.factor(1e-12, "unit").unwrap_err();
        assert!(matches!(err, RodError::SingularSystem { row: 1, .. }));
    }

    #[test]
    fn sym_band_matvec_matches_dense() {
        let mut m = SymBand::<f64>::zeros(4, 1);
        m.add(0, 0, 2.0);
        m.add(1, 0, -1.0);
        m.add(1, 1, 2.0);
        m.add(2, 1, -1.0);
        m.add(2, 2, 2.0);
        m.add(3, 2, -1.0);
        m.add(3, 3, 2.0);
        let y = m.matvec(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(y, vec![0.0, 0.0, 0.0, 5.0]);
    }
}
