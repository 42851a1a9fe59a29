//! Quadrature rules and scalar search helpers shared by the solvers.

use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on [0, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = nf * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussRule { nodes, weights }
    }

    #[inline]
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let h = b - a;
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(a + h * x);
        }
        s * h
    }
}

pub fn gauss8() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(8))
}

pub fn gauss4() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(4))
}

pub fn gauss16() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(16))
}

/// 16-point rule composed with the quintic smoothstep v ↦ v³(10 − 15v + 6v²),
/// which flattens both endpoints so power-type singularities there integrate
/// to near machine precision.
pub fn graded16() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| {
        let g = GaussRule::new(16);
        let mut nodes = Vec::with_capacity(16);
        let mut weights = Vec::with_capacity(16);
        for (v, w) in g.nodes.iter().zip(&g.weights) {
            let s = v * v * v * (10.0 - 15.0 * v + 6.0 * v * v);
            let ds = 30.0 * v * v * (1.0 - v) * (1.0 - v);
            nodes.push(s);
            weights.push(w * ds);
        }
        GaussRule { nodes, weights }
    })
}

/// Integrate over [a, b] where the integrand may be singular at either end.
/// The interval is split geometrically toward both ends before grading.
pub fn integrate_singular<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let g = graded16();
    let len = b - a;
    let mut total = g.integrate(&f, a + 0.25 * len, b - 0.25 * len);
    // panels [a + len·4^{-k-1}, a + len·4^{-k}] and mirror, stopping once the
    // inner end can no longer be told apart from the endpoint
    let mut hi = 0.25;
    let (mut left, mut right) = (true, true);
    for _ in 0..40 {
        let lo = hi * 0.25;
        left &= a + lo * len * 1e-3 > a;
        right &= b - lo * len * 1e-3 < b;
        if left {
            total += g.integrate(&f, a + lo * len, a + hi * len);
        }
        if right {
            total += g.integrate(&f, b - hi * len, b - lo * len);
        }
        hi = lo;
    }
    total
}

/// ∫ of f over [lo, lo + len] where f may be singular at 0 ≤ lo. The rule is
/// picked from the distance to the singularity relative to the cell length.
#[inline]
pub fn near_singular_cell<F: Fn(f64) -> f64>(f: F, lo: f64, len: f64) -> f64 {
    let rho = lo / len;
    let rule = if rho < 2.0 {
        graded16()
    } else if rho < 8.0 {
        gauss8()
    } else {
        gauss4()
    };
    rule.integrate(f, lo, lo + len)
}

/// Adaptive Simpson with an absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximisation on [lo, hi]; returns (argmax, max).
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    // the bracket midpoint can be marginally worse than a probe
    if f1 > fx && f1 >= f2 {
        (x1, f1)
    } else if f2 > fx {
        (x2, f2)
    } else {
        (x, fx)
    }
}

/// Coarse scan with `n` cells followed by golden section around the best cell.
pub fn scan_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let step = (hi - lo) / n as f64;
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let x = if i == n { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let a = (best.0 - step).max(lo);
    let b = (best.0 + step).min(hi);
    let refined = golden_max(&f, a, b, tol);
    if refined.1 >= best.1 {
        refined
    } else {
        best
    }
}

/// Bisection for a sign change of `f` on [lo, hi].
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pairwise summation; fixed association order regardless of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Fixed decimal notation with 10 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x.is_finite() { 0.0 } else { x });
    }
    // the exponent after rounding to 10 digits fixes the decimal count
    let sci = format!("{x:.9e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    format!("{:.*}", (9 - exp).max(0) as usize, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exact_for_polynomials() {
        let g = gauss8();
        let v = g.integrate(|x| x.powi(15), 0.0, 2.0);
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-10);
        let w: f64 = gauss16().weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_endpoints() {
        let v = integrate_singular(|x| x.powf(-0.5) + (1.0 - x).powf(-0.3), 0.0, 1.0);
        assert!((v - (2.0 + 1.0 / 0.7)).abs() < 1e-8, "{v}");
    }

    #[test]
    fn golden_finds_quadratic_peak() {
        let (x, _) = scan_then_golden(|x| -(x - 0.3).powi(2), 0.0, 1.0, 50, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn simpson_smooth() {
        let v = adaptive_simpson(&|x: f64| x.exp(), 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.5), "0.5000000000");
        assert_eq!(fmt_sig(12.25), "12.25000000");
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.999_999_999_99), "1.000000000");
        assert_eq!(fmt_sig(1234567.891234), "1234567.891");
    }
}
