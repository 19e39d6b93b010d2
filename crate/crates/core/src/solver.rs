use crate::error::{Error, Result};

pub(crate) const MAX_DOUBLINGS: usize = 200;
pub(crate) const MAX_BISECTIONS: usize = 200;

/// Root of `f(x) = target` for a continuous nondecreasing `f` with
/// `f(0) < target`. The upper end of the bracket starts at 1 and is doubled
/// until `f` reaches the target; the bracket is then bisected until the
/// relative residual drops to `tol` or the bracket stops shrinking.
pub(crate) fn bisect_increasing<F>(f: F, target: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while f(hi) < target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::BracketFailure(MAX_DOUBLINGS));
        }
    }
    let residual = |x: f64| (f(x) - target).abs() / target;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let val = f(mid);
        if (val - target).abs() <= tol * target {
            return Ok(mid);
        }
        if val < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (residual(lo), residual(hi));
    let (best, res) = if rl <= rh { (lo, rl) } else { (hi, rh) };
    if res <= tol {
        Ok(best)
    } else {
        Err(Error::NoConvergence(res))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_square_root() {
        let r = bisect_increasing(|x| x * x, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn finds_large_and_tiny_roots() {
        let r = bisect_increasing(|x| x, 1e12, 1e-12).unwrap();
        assert!((r / 1e12 - 1.0).abs() < 1e-12);
        let r = bisect_increasing(|x| x, 1e-40, 1e-12).unwrap();
        assert!((r / 1e-40 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_with_kinks() {
        let f = |x: f64| (x - 1.0).max(0.0) + 2.0 * (x - 3.0).max(0.0);
        let r = bisect_increasing(f, 4.0, 1e-13).unwrap();
        assert!((f(r) - 4.0).abs() < 4e-13);
    }

    #[test]
    fn bounded_function_fails_to_bracket() {
        let err = bisect_increasing(|x| x / (1.0 + x), 2.0, 1e-12).unwrap_err();
        assert_eq!(err, Error::BracketFailure(MAX_DOUBLINGS));
    }

    #[test]
    fn jump_reports_no_convergence() {
        let err = bisect_increasing(|x| if x < 0.5 { 0.0 } else { 1.0 }, 0.5, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NoConvergence(_)));
    }
}
