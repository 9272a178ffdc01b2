//! Dense LU factorisation with partial pivoting and row equilibration.
//!
//! The circuits simulated here have a few tens of unknowns at most, and each
//! switch/diode topology is factored once and reused for every step spent in
//! it, so a dense factorisation is the right tool.

/// Pivots below this magnitude (after row equilibration) mark the matrix as
/// singular, e.g. a loop of ideal voltage-defined branches.
const PIVOT_EPS: f64 = 1e-13;

#[derive(Debug, Clone)]
pub(crate) struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    row_scale: Vec<f64>,
}

impl Lu {
    /// Factors the row-major `n x n` matrix `a`. Returns `None` when singular.
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Option<Lu> {
        debug_assert_eq!(a.len(), n * n);
        let mut row_scale = vec![1.0; n];
        for (i, scale) in row_scale.iter_mut().enumerate() {
            let row = &mut a[i * n..(i + 1) * n];
            let max = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max == 0.0 {
                return None;
            }
            *scale = 1.0 / max;
            row.iter_mut().for_each(|v| *v *= *scale);
        }

        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_abs) =
                (k..n)
                    .map(|r| (r, a[r * n + k].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_abs < PIVOT_EPS {
                return None;
            }
            if pivot_row != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let factor = a[r * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                a[r * n + k] = factor;
                for c in k + 1..n {
                    a[r * n + c] -= factor * a[k * n + c];
                }
            }
        }
        Some(Lu {
            n,
            lu: a,
            perm,
            row_scale,
        })
    }

    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve(&self, rhs: &[f64], x: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let src = self.perm[i];
            x[i] = rhs[src] * self.row_scale[src];
        }
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let sum: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= sum;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let sum: f64 = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - sum) / self.lu[i * n + i];
        }
    }
}
