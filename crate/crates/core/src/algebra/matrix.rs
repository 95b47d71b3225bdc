use std::ops::{Index, IndexMut};

use super::field::{Fp, PrimeField};

/// Dense row-major matrix over `GF(p)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    entries: Vec<Fp>,
}

impl Matrix {
    pub fn new(field: PrimeField, rows: usize, cols: usize, entries: Vec<Fp>) -> Self {
        assert_eq!(entries.len(), rows * cols, "entries length must be rows * cols");
        Self {
            field,
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self::new(field, rows, cols, vec![field.zero(); rows * cols])
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m[(i, i)] = field.one();
        }
        m
    }

    pub fn from_rows(field: PrimeField, cols: usize, rows: &[Vec<Fp>]) -> Self {
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            entries.extend_from_slice(r);
        }
        Self::new(field, rows.len(), cols, entries)
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Fp] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(field: PrimeField, cols: usize, parts: &[&Matrix]) -> Matrix {
        let mut entries = Vec::new();
        let mut rows = 0;
        for p in parts {
            assert_eq!(p.cols, cols);
            entries.extend_from_slice(&p.entries);
            rows += p.rows;
        }
        Matrix::new(field, rows, cols, entries)
    }

    /// Keeps the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut entries = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            entries.extend(cols.iter().map(|&j| self[(i, j)]));
        }
        Matrix::new(self.field, self.rows, cols.len(), entries)
    }

    pub fn mul_vec(&self, x: &[Fp]) -> Vec<Fp> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(self.field.zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.clone().reduce().len()
    }

    /// Basis of `{x : self * x = 0}`, one vector per free column of the
    /// reduced row echelon form.
    pub fn nullspace_basis(&self) -> Vec<Vec<Fp>> {
        let mut m = self.clone();
        let pivots = m.reduce();
        let zero = self.field.zero();
        let one = self.field.one();
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let basis: Vec<Vec<Fp>> = (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut v = vec![zero; self.cols];
                v[free] = one;
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = -m[(r, free)];
                }
                v
            })
            .collect();
        debug_assert!(basis.iter().all(|v| self.mul_vec(v).iter().all(Fp::is_zero)));
        basis
    }

    /// A particular solution of `self * x = b` (free variables set to zero),
    /// or `None` if the system is inconsistent.
    pub fn solve(&self, b: &[Fp]) -> Option<Vec<Fp>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Matrix::zeros(self.field, self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)];
            }
            aug[(i, self.cols)] = b[i];
        }
        let pivots = aug.reduce();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![self.field.zero(); self.cols];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = aug[(r, self.cols)];
        }
        Some(x)
    }

    /// In-place Gauss–Jordan elimination to reduced row echelon form.
    /// Returns the pivot column of each nonzero row.
    fn reduce(&mut self) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self[(i, c)].is_zero()) else {
                continue;
            };
            self.swap_rows(r, p);
            let inv = self[(r, c)].inv().expect("pivot is nonzero");
            for j in c..self.cols {
                self[(r, j)] *= inv;
            }
            for i in 0..self.rows {
                if i == r {
                    continue;
                }
                let factor = self[(i, c)];
                if factor.is_zero() {
                    continue;
                }
                for j in c..self.cols {
                    let sub = factor * self[(r, j)];
                    self[(i, j)] -= sub;
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = Fp;
    fn index(&self, (i, j): (usize, usize)) -> &Fp {
        assert!(i < self.rows && j < self.cols);
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Fp {
        assert!(i < self.rows && j < self.cols);
        &mut self.entries[i * self.cols + j]
    }
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "Matrix {}x{} over GF({})",
            self.rows,
            self.cols,
            self.field.modulus()
        )?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        Ok(())
    }
}

/// `|xs| x (degree + 1)` Vandermonde matrix with rows
/// `(x^degree, x^(degree-1), ..., x, 1)`.
pub fn vandermonde(field: PrimeField, xs: &[Fp], degree: usize) -> Matrix {
    let cols = degree + 1;
    let mut entries = Vec::with_capacity(xs.len() * cols);
    for &x in xs {
        let mut row = vec![field.one(); cols];
        for j in (0..degree).rev() {
            row[j] = row[j + 1] * x;
        }
        entries.extend(row);
    }
    Matrix::new(field, xs.len(), cols, entries)
}
