//! Derivative-free bounded scalar minimisation and safeguarded root finding.

/// Result of a bounded scalar minimisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

fn finite_or_inf(y: f64) -> f64 {
    if y.is_nan() {
        f64::INFINITY
    } else {
        y
    }
}

/// Brent's method on `[lo, hi]`: golden-section steps with parabolic
/// interpolation when the parabola is well behaved. `tol` is absolute in `x`.
pub fn minimize_bounded<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = finite_or_inf(f(x));
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for iter in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            return Minimum {
                x,
                fx,
                iterations: iter,
                converged: true,
            };
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let mut r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            r = e;
            e = d;
            if p.abs() < (0.5 * q * r).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d >= 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = finite_or_inf(f(u));
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
    Minimum {
        x,
        fx,
        iterations: max_iter,
        converged: false,
    }
}

/// Scans `grid_points` equally spaced points on `[lo, hi]` and refines the
/// best one with Brent's method inside its neighbouring cell pair. Guards
/// against the local search locking onto a poor basin.
pub fn minimize_scan<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    grid_points: usize,
    tol: f64,
    max_iter: usize,
) -> Minimum {
    let n = grid_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..n {
        let y = finite_or_inf(f(lo + step * i as f64));
        if y < best.1 {
            best = (i, y);
        }
    }
    let left = lo + step * best.0.saturating_sub(1) as f64;
    let right = (lo + step * (best.0 + 1) as f64).min(hi);
    let mut m = minimize_bounded(&mut f, left, right, tol, max_iter);
    let grid_x = lo + step * best.0 as f64;
    if best.1 < m.fx {
        m.x = grid_x;
        m.fx = best.1;
    }
    m
}

/// Safeguarded Newton iteration for an increasing function on a bracket
/// `[lo, hi]` with `f(lo) <= 0 <= f(hi)`. `fdf` returns `(f(x), f'(x))`.
/// Falls back to bisection whenever a Newton step leaves the bracket or
/// stalls.
pub fn solve_increasing<F: FnMut(f64) -> (f64, f64)>(
    mut fdf: F,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    for _ in 0..max_iter {
        let (fx, dfx) = fdf(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton_ok = dfx.is_finite()
            && dfx > 0.0
            && fx.is_finite()
            && {
                let cand = x - fx / dfx;
                cand > lo && cand < hi
            }
            && (2.0 * fx).abs() <= (dx_old * dfx).abs();
        dx_old = dx;
        if newton_ok {
            dx = fx / dfx;
            x -= dx;
        } else {
            dx = 0.5 * (hi - lo);
            x = lo + dx;
        }
        if dx.abs() < tol || hi - lo < tol {
            return x;
        }
    }
    x
}
