use nalgebra::DMatrix;

/// Which loadings of an `n × m` matrix `Z` are allowed to be nonzero.
///
/// Exported indicators follow the usual convention for this problem:
/// `0` marks an active loading and `1` a loading forced to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    m: usize,
    // column-major
    active: Vec<bool>,
}

impl SparsityPattern {
    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut active = Vec::with_capacity(n * m);
        for j in 0..m {
            for i in 0..n {
                active.push(f(i, j));
            }
        }
        SparsityPattern { n, m, active }
    }

    pub fn all_active(n: usize, m: usize) -> Self {
        Self::from_fn(n, m, |_, _| true)
    }

    pub fn none_active(n: usize, m: usize) -> Self {
        Self::from_fn(n, m, |_, _| false)
    }

    /// From a single-column activity mask.
    pub fn from_mask(mask: &[bool]) -> Self {
        SparsityPattern {
            n: mask.len(),
            m: 1,
            active: mask.to_vec(),
        }
    }

    /// From indicators (`0` = active), column-major.
    pub fn from_indicators(n: usize, m: usize, ind: &[u8]) -> Self {
        assert_eq!(ind.len(), n * m);
        SparsityPattern {
            n,
            m,
            active: ind.iter().map(|&v| v == 0).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.active[j * self.n + i]
    }

    /// `0` if active, `1` if suppressed.
    pub fn indicator(&self, i: usize, j: usize) -> u8 {
        u8::from(!self.is_active(i, j))
    }

    pub fn indicator_matrix(&self) -> DMatrix<u8> {
        DMatrix::from_fn(self.n, self.m, |i, j| self.indicator(i, j))
    }

    pub fn active_indices(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.is_active(i, j)).collect()
    }

    pub fn column_cardinality(&self, j: usize) -> usize {
        self.active[j * self.n..(j + 1) * self.n]
            .iter()
            .filter(|&&a| a)
            .count()
    }

    pub fn cardinality(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality() == 0
    }
}
