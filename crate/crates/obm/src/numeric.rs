//! Scalar maximization and quadrature helpers shared by the ratio engine.

/// Inverse golden ratio, `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximize `f` on `[a, b]` by golden-section search.
///
/// Returns `(argmax, max)`. `xtol` bounds the final bracket width; the
/// function is assumed unimodal on the bracket (callers seed the bracket
/// from a grid scan, so a locally quadratic maximum is enough).
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        if f1 > f2 {
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
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    if f1 >= f2 && f1 >= fm {
        (x1, f1)
    } else if f2 >= fm {
        (x2, f2)
    } else {
        (mid, fm)
    }
}

/// Maximize `f` on `[a, b]`: uniform scan on `points` samples, then
/// golden-section refinement around the best grid cell.
pub fn grid_then_golden_max<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    points: usize,
    xtol: f64,
) -> (f64, f64) {
    assert!(points >= 2 && b > a);
    let step = (b - a) / (points - 1) as f64;
    let mut best_i = 0usize;
    let mut best = f64::NEG_INFINITY;
    for i in 0..points {
        let x = a + step * i as f64;
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let lo = a + step * best_i.saturating_sub(1) as f64;
    let hi = (a + step * (best_i + 1) as f64).min(b);
    let (x, v) = golden_section_max(&f, lo, hi, xtol);
    if v > best {
        (x, v)
    } else {
        (a + step * best_i as f64, best)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. Serves as the numeric fallback for integrands without a stored
/// antiderivative and as an independent oracle in tests.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 48)
}

/// Cauchy bound on the magnitude of real roots of the polynomial with
/// coefficients `coeffs` (index = power). Trailing zero coefficients are
/// ignored; a constant polynomial yields 1.0.
pub fn cauchy_root_bound(coeffs: &[f64]) -> f64 {
    let deg = match coeffs.iter().rposition(|c| *c != 0.0) {
        Some(d) if d > 0 => d,
        _ => return 1.0,
    };
    let lead = coeffs[deg].abs();
    let max_ratio = coeffs[..deg]
        .iter()
        .map(|c| c.abs() / lead)
        .fold(0.0_f64, f64::max);
    1.0 + max_ratio
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn grid_then_golden_handles_boundary_max() {
        let (x, v) = grid_then_golden_max(|x| x, 0.0, 1.0, 101, 1e-12);
        assert!((x - 1.0).abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn simpson_matches_closed_form() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn root_bound_contains_roots() {
        // y^2 - 3y + 2 has roots 1 and 2.
        assert!(cauchy_root_bound(&[2.0, -3.0, 1.0]) >= 2.0);
    }
}
