//! Scalar root finding shared by the window and Che solvers.

/// A located root and the work spent finding it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub iterations: usize,
}

/// Why a Newton iteration stopped without a root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NewtonFailure {
    ZeroDerivative { at: f64 },
    NotFinite { at: f64 },
    MaxIterations { last: f64 },
}

/// Newton–Raphson on `f`, which returns `(value, derivative)`.
///
/// Stops once a step is no larger than `step_tol`.
pub fn newton<F>(x0: f64, step_tol: f64, max_iter: usize, mut f: F) -> Result<Root, NewtonFailure>
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut x = x0;
    for i in 1..=max_iter {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(Root {
                x,
                iterations: i - 1,
            });
        }
        if dfx == 0.0 {
            return Err(NewtonFailure::ZeroDerivative { at: x });
        }
        let step = fx / dfx;
        let next = x - step;
        if !next.is_finite() {
            return Err(NewtonFailure::NotFinite { at: x });
        }
        x = next;
        if step.abs() <= step_tol {
            return Ok(Root { x, iterations: i });
        }
    }
    Err(NewtonFailure::MaxIterations { last: x })
}

/// Bisection on `[lo, hi]`; `f(lo)` and `f(hi)` must differ in sign.
///
/// Returns `None` when the interval does not bracket a sign change.
pub fn bisect<F>(mut lo: f64, mut hi: f64, x_tol: f64, max_iter: usize, mut f: F) -> Option<Root>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(Root {
            x: lo,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Some(Root {
            x: hi,
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for i in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 || (hi - lo) <= x_tol || mid == lo || mid == hi {
            return Some(Root {
                x: mid,
                iterations: i,
            });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(Root {
        x: 0.5 * (lo + hi),
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_square_root() {
        let r = newton(3.0, 1e-14, 50, |x| (x * x - 2.0, 2.0 * x)).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn newton_linear_one_step() {
        let r = newton(10.0, 0.5, 100, |x| (3.0 * x - 6.0, 3.0)).unwrap();
        assert_eq!(r.x, 2.0);
        // The first step lands on the root; the second observes f == 0.
        assert!(r.iterations <= 2);
    }

    #[test]
    fn newton_zero_derivative() {
        assert!(matches!(
            newton(0.0, 1e-9, 10, |x| (x * x + 1.0, 2.0 * x)),
            Err(NewtonFailure::ZeroDerivative { .. })
        ));
    }

    #[test]
    fn bisect_finds_bracketed_root() {
        let r = bisect(0.0, 2.0, 1e-13, 200, |x| x * x - 2.0).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect(2.0, 3.0, 1e-12, 100, |x| x * x - 2.0).is_none());
    }
}
