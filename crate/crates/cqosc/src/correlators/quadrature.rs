//! Adaptive Simpson quadrature for complex integrands. The base interval is
//! pre-split into uniform panels (so narrow resonance peaks are found) and
//! each panel refines recursively with the usual |S2 - S1|/15 estimate.

use num_complex::Complex64;

pub struct QuadResult {
    pub value: Complex64,
    pub error_estimate: f64,
}

fn simpson(f: &impl Fn(f64) -> Complex64, a: f64, fa: Complex64, b: f64, fb: Complex64) -> (Complex64, Complex64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> Complex64,
    a: f64,
    fa: Complex64,
    b: f64,
    fb: Complex64,
    whole: Complex64,
    fm: Complex64,
    abs_tol: f64,
    depth: usize,
    err_acc: &mut f64,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let (left, flm) = simpson(f, a, fa, m, fm);
    let (right, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * abs_tol {
        *err_acc += delta.norm() / 15.0;
        return left + right + delta / 15.0;
    }
    refine(f, a, fa, m, fm, left, flm, 0.5 * abs_tol, depth - 1, err_acc)
        + refine(f, m, fm, b, fb, right, frm, 0.5 * abs_tol, depth - 1, err_acc)
}

/// Integrate `f` over `[a, b]` with `base_panels` initial panels and a total
/// absolute tolerance `abs_tol`.
pub fn adaptive_simpson(
    f: impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    abs_tol: f64,
    base_panels: usize,
    max_depth: usize,
) -> QuadResult {
    let panels = base_panels.max(4);
    let h = (b - a) / panels as f64;
    let panel_tol = abs_tol / panels as f64;
    let mut value = Complex64::ZERO;
    let mut err = 0.0;
    let mut x0 = a;
    let mut f0 = f(a);
    for p in 0..panels {
        let x1 = if p + 1 == panels { b } else { a + (p + 1) as f64 * h };
        let f1 = f(x1);
        let (whole, fm) = simpson(&f, x0, f0, x1, f1);
        value += refine(&f, x0, f0, x1, f1, whole, fm, panel_tol, max_depth, &mut err);
        x0 = x1;
        f0 = f1;
    }
    QuadResult {
        value,
        error_estimate: err,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = adaptive_simpson(
            |x| Complex64::new(x * x * x - 2.0 * x, 1.0),
            0.0,
            2.0,
            1e-12,
            8,
            20,
        );
        // int x^3 - 2x = 4 - 4 = 0; imaginary part integrates to 2.
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn narrow_peak_is_resolved() {
        // Lorentzian of width 1e-3 at x = 1: integral over [0, 2] close to pi*width.
        let w = 1e-3;
        let r = adaptive_simpson(
            |x| Complex64::new(w / ((x - 1.0) * (x - 1.0) + w * w), 0.0),
            0.0,
            2.0,
            1e-10,
            16,
            40,
        );
        let exact = 2.0 * (1.0 / w).atan();
        assert!(
            (r.value.re - exact).abs() < 1e-8,
            "{} vs {exact}",
            r.value.re
        );
    }

    #[test]
    fn oscillatory_integrand() {
        let r = adaptive_simpson(
            |x| Complex64::new((10.0 * x).cos(), 0.0),
            0.0,
            3.0,
            1e-12,
            16,
            30,
        );
        let exact = (30.0_f64).sin() / 10.0;
        assert!((r.value.re - exact).abs() < 1e-10);
    }
}
