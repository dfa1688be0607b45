//! Adaptive Gauss–Kronrod quadrature on finite and half-infinite intervals.
//!
//! Every integral in the crate that is not a finite sum goes through
//! [`integrate`]. Callers pass the known non-smooth points of the integrand as
//! breakpoints; the rule never evaluates an interval endpoint, so integrable
//! endpoint singularities are tolerated.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    pub const fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-13, 1e-11)
    }
}

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = WGK[7] * fc;
    let mut res_g = WG[3] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for i in 0..7 {
        let dx = half * XGK[i];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[i] = f1;
        fv2[i] = f2;
        res_k += WGK[i] * (f1 + f2);
        res_abs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            res_g += WG[i / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for i in 0..7 {
        res_asc += WGK[i] * ((fv1[i] - mean).abs() + (fv2[i] - mean).abs());
    }
    let value = res_k * half;
    let error = rescale_error(
        (res_k - res_g) * half,
        res_abs * half.abs(),
        res_asc * half.abs(),
    );
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Integral {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Integrates `f` over `[a, b]` with interior breakpoints. Breakpoints outside
/// `(a, b)` are ignored; duplicates are merged.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = Vec::with_capacity(breaks.len() + 2);
    pts.push(lo);
    pts.extend(breaks.iter().copied().filter(|&p| p > lo && p < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut out = integrate_pieces(&f, &pts, tol);
    out.value *= sign;
    out
}

/// Splits `[a, b]` into `panels` equal pieces before adapting.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    panels: usize,
    tol: Tolerance,
) -> Integral {
    let panels = panels.max(1);
    let mut pts: Vec<f64> = (1..panels)
        .map(|k| a + (b - a) * k as f64 / panels as f64)
        .collect();
    pts.extend_from_slice(breaks);
    integrate_with_breaks(f, a, b, &pts, tol)
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + t / (1 - t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Integral {
    let mapped: Vec<f64> = breaks
        .iter()
        .filter(|&&p| p > a && p.is_finite())
        .map(|&p| (p - a) / (1.0 + p - a))
        .collect();
    let g = |t: f64| {
        let u = 1.0 - t;
        let x = a + t / u;
        if x.is_finite() {
            f(x) / (u * u)
        } else {
            0.0
        }
    };
    integrate_with_breaks(g, 0.0, 1.0, &mapped, tol)
}

fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, pts: &[f64], tol: Tolerance) -> Integral {
    let mut heap = BinaryHeap::with_capacity(64);
    for w in pts.windows(2) {
        if w[1] > w[0] {
            heap.push(gauss_kronrod_15(f, w[0], w[1]));
        }
    }
    let mut value: f64 = heap.iter().map(|p| p.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.error).sum();
    let mut converged = true;
    while error > tol.abs.max(tol.rel * value.abs()) {
        if !error.is_finite() || heap.len() >= tol.max_intervals {
            converged = false;
            break;
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval is at machine resolution
            heap.push(Panel {
                error: 0.0,
                ..worst
            });
            converged = false;
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
            continue;
        }
        let left = gauss_kronrod_15(f, worst.a, mid);
        let right = gauss_kronrod_15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // resum to stop drift from the running updates
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    Integral {
        value: panels.iter().map(|p| p.value).sum(),
        error: panels.iter().map(|p| p.error).sum(),
        converged,
    }
}

const CHEB_DEGREE: usize = 16;
const CHEB_MAX_PIECES: usize = 4000;

/// Piecewise Chebyshev interpolant on `[a, b]`. Each piece interpolates at
/// 17 Lobatto nodes and is accepted once it matches the function within
/// `tol` at 16 further nodes; otherwise it is halved.
#[derive(Clone, Debug)]
pub struct Chebyshev {
    /// `(left end, right end, values at the Lobatto nodes)`, sorted.
    pieces: Vec<(f64, f64, [f64; CHEB_DEGREE + 1])>,
    /// Largest residual seen at the check nodes of accepted pieces.
    pub max_residual: f64,
}

fn lobatto(a: f64, b: f64, k: usize) -> f64 {
    let t = (std::f64::consts::PI * k as f64 / CHEB_DEGREE as f64).cos();
    0.5 * (a + b) + 0.5 * (b - a) * t
}

fn barycentric(a: f64, b: f64, values: &[f64; CHEB_DEGREE + 1], x: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &v) in values.iter().enumerate() {
        let d = x - lobatto(a, b, k);
        if d == 0.0 {
            return v;
        }
        let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
        if k == 0 || k == CHEB_DEGREE {
            w *= 0.5;
        }
        num += w * v / d;
        den += w / d;
    }
    num / den
}

impl Chebyshev {
    /// `breaks` inside `(a, b)` start new pieces, so jumps in a derivative
    /// there cost nothing.
    pub fn build<F: Fn(f64) -> f64 + Sync>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> Self {
        use rayon::prelude::*;
        let mut ends = vec![a];
        ends.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
        ends.push(b);
        ends.sort_by(f64::total_cmp);
        ends.dedup();
        let mut todo: Vec<(f64, f64)> = ends.windows(2).map(|w| (w[0], w[1])).collect();
        let mut pieces = Vec::new();
        let mut max_residual = 0.0f64;
        while let Some((lo, hi)) = todo.pop() {
            let nodes: Vec<f64> = (0..=CHEB_DEGREE).map(|k| lobatto(lo, hi, k)).collect();
            let checks: Vec<f64> = (0..CHEB_DEGREE)
                .map(|k| {
                    let t = (std::f64::consts::PI * (k as f64 + 0.5) / CHEB_DEGREE as f64).cos();
                    0.5 * (lo + hi) + 0.5 * (hi - lo) * t
                })
                .collect();
            let fx: Vec<f64> = nodes.iter().chain(&checks).copied().collect::<Vec<_>>().par_iter().map(|&x| f(x)).collect();
            let mut values = [0.0; CHEB_DEGREE + 1];
            values.copy_from_slice(&fx[..=CHEB_DEGREE]);
            let residual = checks
                .iter()
                .zip(&fx[CHEB_DEGREE + 1..])
                .map(|(&x, &v)| (barycentric(lo, hi, &values, x) - v).abs())
                .fold(0.0, f64::max);
            let narrow = hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            if residual <= tol || narrow || pieces.len() + todo.len() >= CHEB_MAX_PIECES {
                max_residual = max_residual.max(residual);
                pieces.push((lo, hi, values));
            } else {
                let mid = 0.5 * (lo + hi);
                todo.push((lo, mid));
                todo.push((mid, hi));
            }
        }
        pieces.sort_by(|p, q| p.0.total_cmp(&q.0));
        Self { pieces, max_residual }
    }

    /// Value at `x`, clamped to the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|p| p.1 < x).min(self.pieces.len() - 1);
        let (a, b, v) = &self.pieces[i];
        barycentric(*a, *b, v, x.clamp(*a, *b))
    }

    pub fn pieces(&self) -> usize {
        self.pieces.len()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            let pm1 = if order <= 1 { 1.0 } else { p0 };
            dp = order as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, Tolerance::default());
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn endpoint_singularity_converges() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-10, 1e-10));
        assert!((r.value - 2.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn breakpoints_resolve_jumps() {
        let step = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let r = integrate_with_breaks(step, 0.0, 1.0, &[0.3], Tolerance::default());
        assert!((r.value - (0.3 + 1.4)).abs() < 1e-14);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(|x| x, 1.0, 0.0, Tolerance::default());
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn half_line() {
        let r = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, &[], Tolerance::default());
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate_to_infinity(|x: f64| (1.0 + x).powi(-3), 0.0, &[], Tolerance::default());
        assert!((r.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_interpolant_tracks_a_kinked_function() {
        let f = |x: f64| if x < 0.3 { x.sin() } else { 0.3f64.sin() + (x - 0.3).powi(2) };
        let c = Chebyshev::build(f, -2.0, 4.0, &[0.3], 1e-13);
        assert!(c.max_residual <= 1e-13);
        for k in 0..=600 {
            let x = -2.0 + 6.0 * k as f64 / 600.0;
            assert!((c.eval(x) - f(x)).abs() < 1e-12, "x={x}");
        }
        let unbroken = Chebyshev::build(f, -2.0, 4.0, &[], 1e-10);
        assert!(unbroken.pieces() > c.pieces());
        assert!((unbroken.eval(0.31) - f(0.31)).abs() < 1e-9);
    }

    #[test]
    fn legendre_rule() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m - 2.0 / 9.0).abs() < 1e-14);
    }
}
