use serde::{Deserialize, Serialize};

/// Dense row-major `n x n` matrix indexed by node pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Square<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> Square<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Self { n, data: vec![value; n * n] }
    }
}

impl<T> Square<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_vec(n: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == n * n).then_some(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.n + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Square<U> {
        Square { n: self.n, data: self.data.iter().map(f).collect() }
    }

    /// Ordered off-diagonal pairs `(i, j)`, `i != j`, row-major.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        off_diagonal_pairs(self.n)
    }
}

impl<T: Copy> Square<T> {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn off_diagonal_values(&self) -> Vec<T> {
        off_diagonal_pairs(self.n).map(|(i, j)| self.at(i, j)).collect()
    }
}

/// All ordered pairs `(i, j)` with `i != j` in row-major order.
pub fn off_diagonal_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
}
