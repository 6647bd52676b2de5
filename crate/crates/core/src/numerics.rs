//! Small numeric kernels shared by the waveform and receiver modules.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Normalized sinc: `sin(πx)/(πx)`, continuous at 0.
pub(crate) fn sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-6 {
        // Two-term Taylor keeps full f64 accuracy below the branch point.
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

/// Dirichlet kernel ratio `sin(πMx)/sin(πx)`, continuous at integers where
/// it takes the value `±M` (sign `(−1)^{j(M−1)}` at integer `j`).
pub(crate) fn dirichlet_ratio(x: f64, m: usize) -> f64 {
    let mf = m as f64;
    let j = x.round();
    let frac = x - j;
    // sin(πM(j+frac)) = (−1)^{Mj}·sin(πM·frac); sin(π(j+frac)) = (−1)^j·sin(π·frac).
    let sign = if (j as i64 * (m as i64 - 1)) % 2 == 0 { 1.0 } else { -1.0 };
    if frac.abs() < 1e-9 {
        let pf = PI * frac;
        sign * mf * (1.0 - pf * pf * (mf * mf - 1.0) / 6.0)
    } else {
        sign * (PI * mf * frac).sin() / (PI * frac).sin()
    }
}

/// `∫_a^b e^{j2παt} dt = (b−a)·e^{jπα(a+b)}·sinc(α(b−a))`, stable as α → 0.
pub(crate) fn oscillatory_segment_integral(alpha: f64, a: f64, b: f64) -> Complex64 {
    let width = b - a;
    let phase = Complex64::from_polar(1.0, PI * alpha * (a + b));
    width * phase * sinc(alpha * width)
}

/// Adaptive Simpson result; `converged` is false if any subinterval hit the
/// recursion depth limit before meeting its error share.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadResult {
    pub value: Complex64,
    pub converged: bool,
}

/// Adaptive Simpson integration of a complex-valued integrand to absolute
/// tolerance `tol` on `[a, b]`.
///
/// `seed_panels` must be large enough that each panel sees at most a couple
/// of oscillation lobes, otherwise the error estimate can alias to zero.
pub(crate) fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, seed_panels: usize) -> QuadResult
where
    F: Fn(f64) -> Complex64,
{
    fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
        (fa + 4.0 * fm + fb) * (h / 6.0)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> Complex64>(
        f: &F,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        tol: f64,
        depth: u32,
        ok: &mut bool,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.norm() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        if depth == 0 {
            *ok = false;
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok)
    }

    if a == b {
        return QuadResult { value: Complex64::new(0.0, 0.0), converged: true };
    }
    let panels = seed_panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut converged = true;
    for i in 0..panels {
        let (pa, pb) = (a + i as f64 * h, a + (i + 1) as f64 * h);
        let (fa, fm, fb) = (f(pa), f(0.5 * (pa + pb)), f(pb));
        let whole = simpson(fa, fm, fb, pb - pa);
        total += recurse(f, pa, pb, fa, fm, fb, whole, tol / panels as f64, 40, &mut converged);
    }
    QuadResult { value: total, converged }
}

/// Nodes and weights of 5-point Gauss-Legendre quadrature on `[-1, 1]`.
pub(crate) const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (-0.538_469_310_105_683, 0.478_628_670_499_366_47),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683, 0.478_628_670_499_366_47),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Composite 5-point Gauss-Legendre quadrature of a real integrand.
pub(crate) fn composite_gauss<F>(f: &F, a: f64, b: f64, panels: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        for (node, weight) in GAUSS5 {
            sum += weight * f(mid + 0.5 * h * node);
        }
    }
    sum * 0.5 * h
}
