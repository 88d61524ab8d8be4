//! Dense LU factorisation with partial pivoting.
//!
//! The nodal systems assembled by [`crate::network`] have a handful of
//! unknowns, so a row-major dense matrix is all that is needed.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.n + col] = self.data[row * self.n + col] + v;
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row * self.n + col] = v;
    }

    /// Solves `self · x = rhs` in place, consuming the matrix.
    ///
    /// Returns the original index of the first row that has no usable pivot
    /// when the matrix is singular. A pivot counts as zero when it falls below
    /// `n · ε` times the largest entry of the matrix.
    pub fn solve(mut self, rhs: &mut [T]) -> Result<(), usize> {
        let n = self.n;
        debug_assert_eq!(rhs.len(), n);
        let scale = self
            .data
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()))
            .max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::lit(n.max(1) as f64);
        // perm[i] = original row now stored at position i
        let mut perm: Vec<usize> = (0..n).collect();

        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, self.get(r, col).abs()))
                .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= tiny {
                return Err(perm[col]);
            }
            if pivot_row != col {
                for c in 0..n {
                    self.data.swap(col * n + c, pivot_row * n + c);
                }
                rhs.swap(col, pivot_row);
                perm.swap(col, pivot_row);
            }
            let pivot = self.get(col, col);
            for r in (col + 1)..n {
                let factor = self.get(r, col) / pivot;
                if factor == T::zero() {
                    continue;
                }
                self.set(r, col, T::zero());
                for c in (col + 1)..n {
                    let v = self.get(r, c) - factor * self.get(col, c);
                    self.set(r, c, v);
                }
                rhs[r] = rhs[r] - factor * rhs[col];
            }
        }

        for row in (0..n).rev() {
            let mut acc = rhs[row];
            #[allow(clippy::needless_range_loop)]
            for c in (row + 1)..n {
                acc = acc - self.get(row, c) * rhs[c];
            }
            rhs[row] = acc / self.get(row, row);
        }
        Ok(())
    }
}

/// Least-squares solution of an overdetermined system by Householder QR
/// with column pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares<T> {
    pub coefficients: Vec<T>,
    pub residuals: Vec<T>,
}

/// Numerical rank fell short; `dependent` lists the columns that add nothing
/// beyond the others.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankDeficient {
    pub rank: usize,
    pub dependent: Vec<usize>,
}

/// Minimises `‖X b − y‖₂`. `rows` holds `X` row by row, every row of length
/// `k`.
pub fn least_squares<T: Scalar>(rows: &[Vec<T>], y: &[T]) -> Result<LeastSquares<T>, RankDeficient> {
    let m = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    assert_eq!(m, y.len(), "one observation per row");
    if m < k {
        return Err(RankDeficient {
            rank: m,
            dependent: (m..k).collect(),
        });
    }
    // column-major copy
    let mut a: Vec<Vec<T>> = (0..k).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    let mut b = y.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let norm = |v: &[T]| v.iter().fold(T::zero(), |acc, x| acc + *x * *x).sqrt();
    let max_norm = a.iter().map(|c| norm(c)).fold(T::zero(), T::max);
    let tol = max_norm * T::epsilon() * T::lit((m.max(k) * 10) as f64);
    let mut diag = vec![T::zero(); k];

    for j in 0..k {
        // pivot: largest remaining column norm below row j
        let (p, pn) = (j..k)
            .map(|c| (c, norm(&a[c][j..])))
            .fold((j, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pn <= tol {
            return Err(RankDeficient {
                rank: j,
                dependent: perm[j..].to_vec(),
            });
        }
        a.swap(j, p);
        perm.swap(j, p);

        let alpha = if a[j][j] > T::zero() { -pn } else { pn };
        let mut v: Vec<T> = a[j][j..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |acc, x| acc + *x * *x);
        diag[j] = alpha;
        if vnorm2 > T::zero() {
            for col in a.iter_mut().skip(j + 1) {
                let dot = v.iter().zip(&col[j..]).fold(T::zero(), |acc, (vi, ci)| acc + *vi * *ci);
                let f = (dot + dot) / vnorm2;
                for (ci, vi) in col[j..].iter_mut().zip(&v) {
                    *ci = *ci - f * *vi;
                }
            }
            let dot = v.iter().zip(&b[j..]).fold(T::zero(), |acc, (vi, bi)| acc + *vi * *bi);
            let f = (dot + dot) / vnorm2;
            for (bi, vi) in b[j..].iter_mut().zip(&v) {
                *bi = *bi - f * *vi;
            }
        }
    }

    // back substitution on R (diag holds R_jj, a[c][r] for r < c holds R_rc)
    let mut z = vec![T::zero(); k];
    for r in (0..k).rev() {
        let mut acc = b[r];
        for c in (r + 1)..k {
            acc = acc - a[c][r] * z[c];
        }
        z[r] = acc / diag[r];
    }
    let mut coefficients = vec![T::zero(); k];
    for (slot, &orig) in perm.iter().enumerate() {
        coefficients[orig] = z[slot];
    }
    let residuals = rows
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(&coefficients).fold(T::zero(), |acc, (x, c)| acc + *x * *c))
        .collect();
    Ok(LeastSquares {
        coefficients,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let mut m = DenseMatrix::<f64>::zeros(3);
        let rows = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        let mut b = vec![8.0, -11.0, -3.0];
        m.solve(&mut b).unwrap();
        for (got, want) in b.iter().zip([2.0, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_pivoting() {
        let mut m = DenseMatrix::<f32>::zeros(2);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        let mut b = vec![3.0, 4.0];
        m.solve(&mut b).unwrap();
        assert_eq!(b, vec![4.0, 3.0]);
    }

    #[test]
    fn least_squares_line_fit() {
        // y = 2 a + 3 b exactly
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64 + 1.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + 3.0 * r[1]).collect();
        let fit = least_squares(&rows, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn least_squares_names_dependent_columns() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![0.0, i as f64 + 1.0, 0.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let err = least_squares(&rows, &y).unwrap_err();
        assert_eq!(err.rank, 1);
        let mut dep = err.dependent.clone();
        dep.sort();
        assert_eq!(dep, vec![0, 2]);
    }

    #[test]
    fn reports_singular_row() {
        let mut m = DenseMatrix::<f64>::zeros(2);
        m.set(0, 0, 1.0);
        let mut b = vec![1.0, 0.0];
        assert_eq!(m.solve(&mut b), Err(1));
    }
}
