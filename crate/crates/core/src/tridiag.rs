use crate::error::{Error, Result};

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`
/// solved by the Thomas algorithm. `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    scratch: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Solves in place: `x` holds the right-hand side on entry.
    pub fn solve_in_place(&mut self, x: &mut [f64]) -> Result<()> {
        let n = self.diag.len();
        debug_assert_eq!(x.len(), n);
        if n == 0 {
            return Ok(());
        }
        let c = &mut self.scratch;
        let mut denom = self.diag[0];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::SingularMatrix { row: 0 });
        }
        c[0] = self.upper[0] / denom;
        x[0] /= denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::SingularMatrix { row: i });
            }
            c[i] = if i + 1 < n { self.upper[i] / denom } else { 0.0 };
            x[i] = (x[i] - self.lower[i] * x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3, 5, 3] -> x = [1, 1, 1]
        let mut t = Tridiagonal::new(3);
        t.diag.copy_from_slice(&[2.0, 3.0, 2.0]);
        t.lower.copy_from_slice(&[0.0, 1.0, 1.0]);
        t.upper.copy_from_slice(&[1.0, 1.0, 0.0]);
        let mut x = vec![3.0, 5.0, 3.0];
        t.solve_in_place(&mut x).unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut t = Tridiagonal::new(2);
        t.diag.copy_from_slice(&[1.0, 1.0]);
        t.lower.copy_from_slice(&[0.0, 1.0]);
        t.upper.copy_from_slice(&[1.0, 0.0]);
        let mut x = vec![1.0, 1.0];
        assert_eq!(t.solve_in_place(&mut x), Err(Error::SingularMatrix { row: 1 }));
    }
}
