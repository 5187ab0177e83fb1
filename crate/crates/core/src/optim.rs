//! One-dimensional bounded minimization.

/// Result of a scalar minimization.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Brent's method (golden section with parabolic steps) on `[a, b]`.
pub fn brent_bounded<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Minimum {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut evals = 1;
    let (mut d, mut e) = (0.0_f64, 0.0_f64);

    for _ in 0..500 {
        let mid = 0.5 * (a + b);
        let tol1 = 1e-10 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Minimum { x, value: fx, evaluations: evals }
}

/// Minimizes `f` over `[lo, hi]`, searching first in a window of half-width
/// `radius` around `start` and widening it while the optimum sits on an
/// interior window edge.
pub fn minimize_from<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    lo: f64,
    hi: f64,
    radius: f64,
    xtol: f64,
) -> Minimum {
    let start = start.clamp(lo, hi);
    let mut radius = radius;
    let mut evaluations = 0;
    loop {
        let a = (start - radius).max(lo);
        let b = (start + radius).min(hi);
        let mut m = brent_bounded(&mut f, a, b, xtol);
        evaluations += m.evaluations;
        let at_a = (m.x - a).abs() < 10.0 * xtol;
        let at_b = (b - m.x).abs() < 10.0 * xtol;
        let window_edge = (at_a && a > lo) || (at_b && b < hi);
        if !window_edge {
            // Brent never evaluates the endpoints themselves.
            for edge in [(at_a, a), (at_b, b)] {
                if edge.0 {
                    let fe = f(edge.1);
                    evaluations += 1;
                    if fe <= m.value {
                        m.x = edge.1;
                        m.value = fe;
                    }
                }
            }
            m.evaluations = evaluations;
            return m;
        }
        radius *= 3.0;
    }
}
