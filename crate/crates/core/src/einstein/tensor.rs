use std::ops::{Index, IndexMut};

use crate::scalar::{Scalar, C};

/// Complex D x D matrix holding a (1,1) tensor A_i^j at `[(i, j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<S: Scalar> {
    pub dim: usize,
    pub data: Vec<C<S>>,
}

impl<S: Scalar> CMat<S> {
    pub fn zeros(dim: usize) -> Self {
        CMat { dim, data: vec![C::new(S::zero(), S::zero()); dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C<S>) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn scaled_identity(dim: usize, c: C<S>) -> Self {
        Self::from_fn(dim, |i, j| if i == j { c } else { C::new(S::zero(), S::zero()) })
    }

    pub fn from_slice(dim: usize, v: &[C<S>]) -> Self {
        CMat { dim, data: v.to_vec() }
    }

    pub fn trace(&self) -> C<S> {
        (0..self.dim).fold(C::new(S::zero(), S::zero()), |acc, i| acc + self[(i, i)])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn scale(&self, c: C<S>) -> Self {
        Self::from_fn(self.dim, |i, j| self[(i, j)] * c)
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, z| m.max(z.norm()))
    }

    pub fn norm_sqr(&self) -> S {
        self.data.iter().fold(S::zero(), |m, z| m + z.norm_sqr())
    }

    pub fn conj(&self) -> Self {
        CMat { dim: self.dim, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<S: Scalar> Index<(usize, usize)> for CMat<S> {
    type Output = C<S>;
    fn index(&self, (i, j): (usize, usize)) -> &C<S> {
        &self.data[i * self.dim + j]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for CMat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<S> {
        &mut self.data[i * self.dim + j]
    }
}

pub(crate) fn pack<S: Scalar>(parts: &[&[C<S>]]) -> Vec<S> {
    let mut out = Vec::with_capacity(parts.iter().map(|p| 2 * p.len()).sum());
    for p in parts {
        for z in *p {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

pub(crate) fn unpack<S: Scalar>(y: &[S], offset: usize, n: usize) -> Vec<C<S>> {
    (0..n).map(|k| C::new(y[2 * (offset + k)], y[2 * (offset + k) + 1])).collect()
}
