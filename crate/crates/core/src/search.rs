//! Bounded derivative-free scalar minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` or after `max_iter`
/// shrinkages. Returns `(x_min, f_min)`.
pub fn golden_section_minimize<F>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);

    for _ in 0..max_iter {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }

    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let (x, fx) = golden_section_minimize(|x| (x - 0.3).powi(2) + 2.0, 0.0, 1.0, 1e-10, 200);
        // Function values near a quadratic minimum only resolve x to about sqrt(eps).
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_objective_hits_the_edge() {
        let (x, _) = golden_section_minimize(|x| x, 0.25, 0.75, 1e-9, 200);
        assert!((x - 0.25).abs() < 1e-8);
    }

    #[test]
    fn respects_iteration_cap() {
        let (x, _) = golden_section_minimize(|x| (x - 0.9).abs(), 0.0, 1.0, 0.0, 3);
        assert!((0.0..=1.0).contains(&x));
    }
}
