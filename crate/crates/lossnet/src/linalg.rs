//! Small dense and banded direct solvers used by the stationary-distribution
//! computations. Problem sizes are desk scale, so everything here favours
//! determinism and simplicity over asymptotic cleverness.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular at elimination step {step}")]
    Singular { step: usize },
    #[error("balance equations solved with residual {residual:.3e}, above {tolerance:.3e}")]
    PoorResidual { residual: f64, tolerance: f64 },
}

/// Solves `a x = b` in place by LU with partial pivoting; `b` becomes `x`.
pub fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<(), LinalgError> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for k in 0..n {
        let pivot_row = (k..n)
            .max_by(|&p, &q| a[p][k].abs().total_cmp(&a[q][k].abs()))
            .unwrap();
        if a[pivot_row][k] == 0.0 {
            return Err(LinalgError::Singular { step: k });
        }
        a.swap(k, pivot_row);
        b.swap(k, pivot_row);
        let pivot = a[k][k];
        for i in k + 1..n {
            let factor = a[i][k] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a[i][j] -= factor * a[k][j];
            }
            b[i] -= factor * b[k];
            a[i][k] = 0.0;
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k][j] * b[j];
        }
        b[k] = acc / a[k][k];
    }
    Ok(())
}

/// Banded matrix in LAPACK-style storage with room for pivoting fill:
/// `kl` subdiagonals, effective `kl + ku` superdiagonals after factorization.
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku_work: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zero(n: usize, kl: usize, ku: usize) -> Self {
        let ku_work = (kl + ku).min(n.saturating_sub(1));
        let kl = kl.min(n.saturating_sub(1));
        let rows = kl + ku_work + 1;
        BandedMatrix {
            n,
            kl,
            ku_work,
            data: vec![0.0; rows * n],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku_work >= j && j + self.kl >= i, "({i},{j}) outside band");
        (i + self.ku_work - j) * self.n + j
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.data[s] += value;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.data[s] = value;
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandedLu, LinalgError> {
        let n = self.n;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let row_end = (k + self.kl).min(n.saturating_sub(1));
            let mut pivot_row = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=row_end {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    pivot_row = i;
                }
            }
            if best == 0.0 {
                return Err(LinalgError::Singular { step: k });
            }
            pivots[k] = pivot_row;
            let col_end = (k + self.ku_work).min(n - 1);
            if pivot_row != k {
                for j in k..=col_end {
                    let a = self.get(k, j);
                    let b = self.get(pivot_row, j);
                    self.set(k, j, b);
                    self.set(pivot_row, j, a);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=row_end {
                let factor = self.get(i, k) / pivot;
                self.set(i, k, factor);
                if factor == 0.0 {
                    continue;
                }
                for j in k + 1..=col_end {
                    let v = self.get(i, j) - factor * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(BandedLu {
            matrix: self,
            pivots,
        })
    }
}

pub struct BandedLu {
    matrix: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Solves the factored system; `b` becomes the solution.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.matrix.n;
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let row_end = (k + self.matrix.kl).min(n.saturating_sub(1));
            for i in k + 1..=row_end {
                b[i] -= self.matrix.get(i, k) * b[k];
            }
        }
        for k in (0..n).rev() {
            let col_end = (k + self.matrix.ku_work).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=col_end {
                acc -= self.matrix.get(k, j) * b[j];
            }
            b[k] = acc / self.matrix.get(k, k);
        }
    }
}

/// Stationary distribution of a finite CTMC given by `(from, to, rate)`
/// transitions over states `0..n`, pinned at `pin` (which must carry
/// positive stationary mass, e.g. any state of the closed class).
///
/// Solves the global balance equations with `x[pin] = 1`, dropping the
/// (redundant) balance equation of the pinned state, then normalizes. Uses
/// a banded factorization when the transition structure is narrow, a dense
/// one otherwise. Returns the distribution and the residual
/// `max_i |sum_f pi(f) q(f, i)|` of the full balance equations.
pub fn stationary_distribution(
    n: usize,
    transitions: &[(usize, usize, f64)],
    pin: usize,
) -> Result<(Vec<f64>, f64), LinalgError> {
    assert!(pin < n);
    if n == 1 {
        return Ok((vec![1.0], 0.0));
    }

    // Reduced index: states except `pin`, order preserved.
    let reduced = |s: usize| if s < pin { s } else { s - 1 };
    let m = n - 1;

    let mut bandwidth = 0usize;
    for &(from, to, rate) in transitions {
        if rate == 0.0 || from == to {
            continue;
        }
        if from != pin && to != pin {
            bandwidth = bandwidth.max(reduced(from).abs_diff(reduced(to)));
        }
    }
    // Diagonal entries always present; bandwidth 0 is fine.

    let use_banded = 2 * bandwidth + 1 < m;
    let mut rhs = vec![0.0; m];
    let solve = |rhs: &mut Vec<f64>| -> Result<(), LinalgError> {
        if use_banded {
            let mut mat = BandedMatrix::zero(m, bandwidth, bandwidth);
            accumulate(transitions, pin, |row, col, v| mat.add(row, col, v), rhs);
            let lu = mat.factor()?;
            lu.solve(rhs);
            Ok(())
        } else {
            let mut mat = vec![vec![0.0; m]; m];
            accumulate(transitions, pin, |row, col, v| mat[row][col] += v, rhs);
            solve_dense(&mut mat, rhs)
        }
    };
    solve(&mut rhs)?;

    let mut pi = vec![0.0; n];
    pi[pin] = 1.0;
    for s in 0..n {
        if s != pin {
            pi[s] = rhs[reduced(s)];
        }
    }
    let total: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= total;
    }

    let mut residual = vec![0.0; n];
    for &(from, to, rate) in transitions {
        if from == to || rate == 0.0 {
            continue;
        }
        let flow = pi[from] * rate;
        residual[to] += flow;
        residual[from] -= flow;
    }
    let max_residual = residual.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    Ok((pi, max_residual))
}

/// Assembles the reduced balance system: equations are balance of each state
/// `i != pin` (column `i` of the generator), unknowns are `x[s]`, `s != pin`,
/// with the pinned state's contribution moved to the right-hand side.
fn accumulate(
    transitions: &[(usize, usize, f64)],
    pin: usize,
    mut add: impl FnMut(usize, usize, f64),
    rhs: &mut [f64],
) {
    let reduced = |s: usize| if s < pin { s } else { s - 1 };
    for &(from, to, rate) in transitions {
        if from == to || rate == 0.0 {
            continue;
        }
        // q[from][to] = rate contributes to balance equation of `to`;
        // q[from][from] -= rate contributes to balance equation of `from`.
        if to != pin {
            if from != pin {
                add(reduced(to), reduced(from), rate);
            } else {
                rhs[reduced(to)] -= rate;
            }
        }
        if from != pin {
            add(reduced(from), reduced(from), -rate);
        }
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
