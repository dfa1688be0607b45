//! Grid functions and the mollification `K_j * f`.
//!
//! A grid function is the piecewise constant reconstruction of its cell
//! samples, zero outside the box. Every path computes `∫ K(x − z) f(z) dz`
//! for that reconstruction at cell centers, so the paths differ only by
//! their own discretization and sampling error.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::kernels::{translation_only_apply, AveragedKernel};
use crate::mc::{stream_rng, unit_direction, Estimate, MeanAccumulator};
use crate::profiles::{sphere_area, ProfileFlags};
use crate::quad::{gauss_legendre, integrate_with_breaks, Tolerance};
use crate::randomness::{JointForm, MeanLaw};

/// Real samples at the cell centers of a uniform grid on a box in one or
/// two dimensions. Flat index `i * N₁ + k` for the cell `(i, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    dimension: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(
        dimension: usize,
        lower: &[f64],
        upper: &[f64],
        resolution: &[usize],
        samples: Vec<f64>,
    ) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(invalid("grid functions live in dimension 1 or 2"));
        }
        if lower.len() != dimension || upper.len() != dimension || resolution.len() != dimension {
            return Err(invalid("box and resolution must match the dimension"));
        }
        if lower.iter().zip(upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(invalid("box must have finite, increasing bounds"));
        }
        if resolution.contains(&0) {
            return Err(invalid("resolution must be positive"));
        }
        if samples.len() != resolution.iter().product::<usize>() {
            return Err(invalid("sample count does not match the resolution"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid samples must be finite"));
        }
        Ok(Self {
            dimension,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            resolution: resolution.to_vec(),
            samples,
        })
    }

    /// Samples `f` at cell centers.
    pub fn from_fn(
        dimension: usize,
        lower: &[f64],
        upper: &[f64],
        resolution: &[usize],
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut g = Self::new(
            dimension,
            lower,
            upper,
            resolution,
            vec![0.0; resolution.iter().product()],
        )?;
        for i in 0..g.len() {
            g.samples[i] = f(&g.center(i));
        }
        if g.samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid samples must be finite"));
        }
        Ok(g)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pitch(&self) -> Vec<f64> {
        (0..self.dimension)
            .map(|a| (self.upper[a] - self.lower[a]) / self.resolution[a] as f64)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.pitch().iter().product()
    }

    /// Multi-index of a flat index.
    pub fn cell(&self, flat: usize) -> Vec<usize> {
        if self.dimension == 1 {
            vec![flat]
        } else {
            vec![flat / self.resolution[1], flat % self.resolution[1]]
        }
    }

    pub fn center(&self, flat: usize) -> Vec<f64> {
        let h = self.pitch();
        self.cell(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lower[a] + (i as f64 + 0.5) * h[a])
            .collect()
    }

    /// True when `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(a, &v)| v >= self.lower[a] && v <= self.upper[a])
    }

    /// Flat index of the cell containing `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let h = self.pitch();
        let mut flat = 0;
        for a in 0..self.dimension {
            let i = (((x[a] - self.lower[a]) / h[a]).floor() as usize).min(self.resolution[a] - 1);
            flat = flat * self.resolution[a] + i;
        }
        Some(flat)
    }

    /// Value of the piecewise constant reconstruction, zero outside the box.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.locate(x).map_or(0.0, |i| self.samples[i])
    }

    /// Midpoint-rule `‖f‖_p`; `p = ∞` gives the largest magnitude.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.sup_norm();
        }
        let s: f64 = self.samples.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.cell_volume()).powf(1.0 / p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut g = self.clone();
        g.samples.iter_mut().for_each(|v| *v = f(*v));
        g
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    /// `a f + b g` on a common grid.
    pub fn combine(a: f64, f: &Self, b: f64, g: &Self) -> Result<Self> {
        if !f.same_grid(g) {
            return Err(invalid("grids differ"));
        }
        let mut out = f.clone();
        for (o, v) in out.samples.iter_mut().zip(&g.samples) {
            *o = a * *o + b * v;
        }
        Ok(out)
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.lower == other.lower
            && self.upper == other.upper
            && self.resolution == other.resolution
    }

    /// `f(· − k h)` for a whole number of cells per axis, zero filled.
    pub fn shift_cells(&self, shift: &[i64]) -> Self {
        let mut out = self.map(|_| 0.0);
        for flat in 0..self.len() {
            let cell = self.cell(flat);
            let mut dst = 0usize;
            let mut inside = true;
            for a in 0..self.dimension {
                let t = cell[a] as i64 + shift[a];
                if t < 0 || t >= self.resolution[a] as i64 {
                    inside = false;
                    break;
                }
                dst = dst * self.resolution[a] + t as usize;
            }
            if inside {
                out.samples[dst] = self.samples[flat];
            }
        }
        out
    }

    /// Distance from `x` to the complement of the box (zero outside).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dimension)
            .map(|a| (x[a] - self.lower[a]).min(self.upper[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Header lines `n,…`, `box,…`, `resolution,…`, `samples`, then one
    /// sample per row with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n,{}", self.dimension);
        s.push_str("box");
        for a in 0..self.dimension {
            let _ = write!(s, ",{:.16e},{:.16e}", self.lower[a], self.upper[a]);
        }
        s.push_str("\nresolution");
        for r in &self.resolution {
            let _ = write!(s, ",{r}");
        }
        s.push_str("\nsamples\n");
        for v in &self.samples {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }
}

impl FromStr for GridFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::Format(m.to_string());
        let mut lines = s.lines();
        let mut field = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let mut parts = line.split(',').map(str::trim);
            if parts.next() != Some(key) {
                return Err(bad(&format!("expected `{key}` header line")));
            }
            Ok(parts.map(String::from).collect())
        };
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("bad number `{v}`")));
        let n: usize = field("n")?
            .first()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad dimension"))?;
        let bx = field("box")?;
        let res = field("resolution")?;
        if bx.len() != 2 * n || res.len() != n {
            return Err(bad("box or resolution has the wrong arity"));
        }
        field("samples")?;
        let lower = (0..n).map(|a| num(&bx[2 * a])).collect::<Result<Vec<_>>>()?;
        let upper = (0..n).map(|a| num(&bx[2 * a + 1])).collect::<Result<Vec<_>>>()?;
        let resolution = res
            .iter()
            .map(|v| v.parse::<usize>().map_err(|_| bad("bad resolution")))
            .collect::<Result<Vec<_>>>()?;
        let samples = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| num(l.trim()))
            .collect::<Result<Vec<_>>>()?;
        GridFunction::new(n, &lower, &upper, &resolution, samples)
    }
}

/// Named test functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Catalog {
    /// `1_{|z| ≤ 1}`.
    BallIndicator,
    /// `max(0, 1 − |z|)`.
    Tent,
    /// `e^{−|z|²/2} cos(3 z₁)`.
    CosinePacket,
    /// `|z|^{−1/2} 1_{|z| < 1}`, sampled by cell averages.
    Spike,
    /// 1 on `[−1, 0)`, 1/2 on `[0, 1)` in `z₁`.
    Step,
    Constant,
}

impl Catalog {
    pub const ALL: [Catalog; 6] = [
        Catalog::BallIndicator,
        Catalog::Tent,
        Catalog::CosinePacket,
        Catalog::Spike,
        Catalog::Step,
        Catalog::Constant,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Catalog::BallIndicator => "ball-indicator",
            Catalog::Tent => "tent",
            Catalog::CosinePacket => "cosine-packet",
            Catalog::Spike => "spike",
            Catalog::Step => "step",
            Catalog::Constant => "constant",
        }
    }

    /// Pointwise value; `+∞` at the spike's center.
    pub fn value(&self, z: &[f64]) -> f64 {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            Catalog::BallIndicator => f64::from(r <= 1.0),
            Catalog::Tent => (1.0 - r).max(0.0),
            Catalog::CosinePacket => (-0.5 * r * r).exp() * (3.0 * z[0]).cos(),
            Catalog::Spike => {
                if r < 1.0 {
                    r.powf(-0.5)
                } else {
                    0.0
                }
            }
            Catalog::Step => {
                if (-1.0..0.0).contains(&z[0]) {
                    1.0
                } else if (0.0..1.0).contains(&z[0]) {
                    0.5
                } else {
                    0.0
                }
            }
            Catalog::Constant => 1.0,
        }
    }

    /// Distance from `z` to the set where the function is discontinuous
    /// or unbounded; infinite for continuous functions.
    pub fn singular_distance(&self, z: &[f64]) -> f64 {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            Catalog::BallIndicator => (r - 1.0).abs(),
            Catalog::Spike => r.min((r - 1.0).abs()),
            Catalog::Step => [-1.0, 0.0, 1.0]
                .iter()
                .map(|c| (z[0] - c).abs())
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }

    /// Continuous and bounded on all of `ℝⁿ`.
    pub fn continuous(&self) -> bool {
        matches!(self, Catalog::Tent | Catalog::CosinePacket | Catalog::Constant)
    }

    pub fn grid(&self, n: usize, lower: &[f64], upper: &[f64], resolution: &[usize]) -> Result<GridFunction> {
        if *self != Catalog::Spike {
            return GridFunction::from_fn(n, lower, upper, resolution, |z| self.value(z));
        }
        let mut g = GridFunction::new(n, lower, upper, resolution, vec![0.0; resolution.iter().product()])?;
        let h = g.pitch();
        if n == 1 {
            // exact cell averages from the antiderivative 2 sgn(z) √|z|
            let prim = |z: f64| 2.0 * z.signum() * z.abs().min(1.0).sqrt();
            for i in 0..g.len() {
                let a = lower[0] + i as f64 * h[0];
                g.samples[i] = (prim(a + h[0]) - prim(a)) / h[0];
            }
        } else {
            let (x, w) = gauss_legendre(8);
            for flat in 0..g.len() {
                let c = g.center(flat);
                let mut acc = 0.0;
                for (xa, wa) in x.iter().zip(&w) {
                    for (xb, wb) in x.iter().zip(&w) {
                        acc += wa * wb * self.value(&[c[0] + 0.5 * h[0] * xa, c[1] + 0.5 * h[1] * xb]);
                    }
                }
                g.samples[flat] = acc / 4.0;
            }
        }
        Ok(g)
    }
}

impl FromStr for Catalog {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Catalog::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownFunction(s.to_string()))
    }
}

/// Catalog function `name` on a grid.
pub fn test_function_catalog(name: &str, n: usize, lower: &[f64], upper: &[f64], resolution: &[usize]) -> Result<GridFunction> {
    name.parse::<Catalog>()?.grid(n, lower, upper, resolution)
}

/// How [`mollify`] applies the kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MollifyPath {
    /// Cell masses of `K`, summed explicitly.
    Direct,
    /// The same cell masses, applied by zero-padded FFT convolution.
    FastConvolution,
    /// Mean of `f(x − y − s z)` with `(s, y)` from Π and `z` from the
    /// normalized profile density.
    MonteCarlo { samples: usize, seed: u64 },
}

impl MollifyPath {
    pub fn name(&self) -> &'static str {
        match self {
            MollifyPath::Direct => "direct",
            MollifyPath::FastConvolution => "fft",
            MollifyPath::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

/// `K_j * f` on the grid of `f`.
#[derive(Clone, Debug)]
pub struct MollifyResult {
    pub values: GridFunction,
    pub path: MollifyPath,
    /// Per-point standard errors, Monte Carlo only; never below `‖f‖_∞ / N`.
    pub std_errors: Option<Vec<f64>>,
    pub index: u32,
    /// Radius containing `1 − 1e−6` of the kernel mass.
    pub support_radius: f64,
    /// Cells farther than `support_radius` from the box boundary.
    pub trusted: Vec<bool>,
}

impl MollifyResult {
    pub fn trusted_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.trusted.iter().enumerate().filter(|p| *p.1).map(|p| p.0)
    }
}

/// Radius of a ball about the origin holding `1 − 1e−6` of the kernel mass.
///
/// Every component `s^{-n} φ(|· − y|/s)` holds that fraction inside
/// `|y| + s ρ*`, where `ρ*` is the profile's own `1 − 1e−6` radius, so the
/// bound holds for the average as well.
pub fn effective_support_radius(k: &AveragedKernel) -> f64 {
    let (s_max, y_max) = k.spec().support_bounds();
    if s_max == 0.0 {
        return y_max;
    }
    y_max + s_max * profile_mass_radius(k, 1e-6)
}

fn profile_mass_radius(k: &AveragedKernel, miss: f64) -> f64 {
    let p = k.profile();
    if let Some(r) = p.support_radius() {
        return r;
    }
    let n = p.dimension();
    let partial = |t: f64| -> f64 {
        if n == 1 {
            2.0 * p.radial_primitive(t)
        } else {
            let br: Vec<f64> = p.breakpoints().into_iter().filter(|b| *b < t).collect();
            sphere_area(n)
                * integrate_with_breaks(
                    |r| r.powi(n as i32 - 1) * p.evaluate(r),
                    0.0,
                    t,
                    &br,
                    Tolerance::new(1e-15, 1e-12),
                )
                .value
        }
    };
    let reach = k.profile_reach();
    let total = partial(reach);
    let target = (1.0 - miss) * total;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while partial(hi) < target && hi < reach {
        lo = hi;
        hi = (2.0 * hi).min(reach);
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if partial(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Kernel cell masses `c_d = ∫_{cell at offset d} K` for offsets up to `w`
/// cells per axis; flat layout with stride `2w₁ + 1`.
struct CellTable {
    half: Vec<usize>,
    masses: Vec<f64>,
}

impl CellTable {
    fn width(&self, a: usize) -> usize {
        2 * self.half[a] + 1
    }

    fn get(&self, d: &[i64]) -> f64 {
        let mut flat = 0usize;
        for (a, &v) in d.iter().enumerate() {
            let u = v + self.half[a] as i64;
            if u < 0 || u >= self.width(a) as i64 {
                return 0.0;
            }
            flat = flat * self.width(a) + u as usize;
        }
        self.masses[flat]
    }
}

fn build_table(k: &AveragedKernel, f: &GridFunction, radius: f64) -> Result<CellTable> {
    let h = f.pitch();
    let half: Vec<usize> = (0..f.dimension())
        .map(|a| (((radius / h[a]).ceil() as usize) + 1).min(f.resolution()[a]))
        .collect();
    if f.dimension() == 1 {
        let w = half[0] as i64;
        let edges: Vec<f64> = (-w..=w + 1)
            .into_par_iter()
            .map(|d| k.cumulative_1d((d as f64 - 0.5) * h[0]))
            .collect::<Result<_>>()?;
        let masses = edges.windows(2).map(|e| (e[1] - e[0]).max(0.0)).collect();
        return Ok(CellTable { half, masses });
    }
    let (wx, wy) = (half[0] as i64, half[1] as i64);
    let offsets: Vec<(i64, i64)> = (-wx..=wx).flat_map(|i| (-wy..=wy).map(move |j| (i, j))).collect();
    let masses = if k.spec().is_pure_translation() {
        offsets
            .par_iter()
            .map(|&(i, j)| translation_cell_mass(k, [i as f64 * h[0], j as f64 * h[1]], &h))
            .collect::<Result<Vec<_>>>()?
    } else if k.has_cumulative_2d() {
        k.prepare_planar()?;
        let corners: Vec<f64> = (-wx..=wx + 1)
            .flat_map(|i| (-wy..=wy + 1).map(move |j| (i, j)))
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&(i, j)| k.cumulative_2d([(i as f64 - 0.5) * h[0], (j as f64 - 0.5) * h[1]]))
            .collect::<Result<_>>()?;
        let stride = (2 * wy + 2) as usize;
        let at = |i: i64, j: i64| corners[(i + wx) as usize * stride + (j + wy) as usize];
        offsets
            .iter()
            .map(|&(i, j)| (at(i + 1, j + 1) - at(i, j + 1) - at(i + 1, j) + at(i, j)).max(0.0))
            .collect()
    } else {
        let (x4, w4) = gauss_legendre(4);
        let (x12, w12) = gauss_legendre(12);
        offsets
            .par_iter()
            .map(|&(i, j)| -> Result<f64> {
                let (x, w) = if i.abs().max(j.abs()) <= 2 { (&x12, &w12) } else { (&x4, &w4) };
                let mut acc = 0.0;
                for (xa, wa) in x.iter().zip(w) {
                    for (xb, wb) in x.iter().zip(w) {
                        let p = [(i as f64 + 0.5 * xa) * h[0], (j as f64 + 0.5 * xb) * h[1]];
                        acc += wa * wb * k.eval(&p)?;
                    }
                }
                Ok(acc * 0.25 * h[0] * h[1])
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(CellTable { half, masses })
}

/// `μ(cell)` for the cell centered at `c` with pitch `h`, pure translations
/// in the plane.
fn translation_cell_mass(k: &AveragedKernel, c: [f64; 2], h: &[f64]) -> Result<f64> {
    // μ(B) = ∫ 1_{−B}(0 − y) dμ(y)
    let reflected = GridFunction::new(
        2,
        &[-c[0] - 0.5 * h[0], -c[1] - 0.5 * h[1]],
        &[-c[0] + 0.5 * h[0], -c[1] + 0.5 * h[1]],
        &[1, 1],
        vec![1.0],
    )?;
    Ok(translation_only_apply(k.spec(), &reflected, &[0.0, 0.0])?.value)
}

fn convolve_direct(table: &CellTable, f: &GridFunction) -> Vec<f64> {
    let res = f.resolution().to_vec();
    (0..f.len())
        .into_par_iter()
        .map(|flat| {
            let ci = f.cell(flat);
            let mut acc = 0.0;
            if f.dimension() == 1 {
                let i = ci[0] as i64;
                let w = table.half[0] as i64;
                let lo = (i - w).max(0);
                let hi = (i + w).min(res[0] as i64 - 1);
                for k in lo..=hi {
                    acc += f.samples()[k as usize] * table.get(&[i - k]);
                }
            } else {
                let (i, j) = (ci[0] as i64, ci[1] as i64);
                let (wx, wy) = (table.half[0] as i64, table.half[1] as i64);
                for k in (i - wx).max(0)..=(i + wx).min(res[0] as i64 - 1) {
                    for l in (j - wy).max(0)..=(j + wy).min(res[1] as i64 - 1) {
                        acc += f.samples()[k as usize * res[1] + l as usize] * table.get(&[i - k, j - l]);
                    }
                }
            }
            acc
        })
        .collect()
}

fn fft_nd(data: &mut [Complex<f64>], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    let last = *shape.last().expect("nonempty shape");
    let plan = if inverse { planner.plan_fft_inverse(last) } else { planner.plan_fft_forward(last) };
    for row in data.chunks_mut(last) {
        plan.process(row);
    }
    if shape.len() == 2 {
        let (rows, cols) = (shape[0], shape[1]);
        let plan = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
        let mut col = vec![Complex::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                col[r] = data[r * cols + c];
            }
            plan.process(&mut col);
            for r in 0..rows {
                data[r * cols + c] = col[r];
            }
        }
    }
}

fn convolve_fft(table: &CellTable, f: &GridFunction) -> Vec<f64> {
    let n = f.dimension();
    let res = f.resolution();
    let shape: Vec<usize> = (0..n).map(|a| (res[a] + table.width(a) - 1).next_power_of_two()).collect();
    let total: usize = shape.iter().product();
    let flat_of = |idx: &[usize]| if n == 1 { idx[0] } else { idx[0] * shape[1] + idx[1] };
    let mut a = vec![Complex::new(0.0, 0.0); total];
    for flat in 0..f.len() {
        a[flat_of(&f.cell(flat))] = Complex::new(f.samples()[flat], 0.0);
    }
    let mut b = vec![Complex::new(0.0, 0.0); total];
    for (flat, &m) in table.masses.iter().enumerate() {
        let idx: Vec<usize> = if n == 1 {
            vec![flat]
        } else {
            vec![flat / table.width(1), flat % table.width(1)]
        };
        b[flat_of(&idx)] = Complex::new(m, 0.0);
    }
    fft_nd(&mut a, &shape, false);
    fft_nd(&mut b, &shape, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft_nd(&mut a, &shape, true);
    let scale = 1.0 / total as f64;
    (0..f.len())
        .map(|flat| {
            let cell = f.cell(flat);
            let idx: Vec<usize> = (0..n).map(|d| cell[d] + table.half[d]).collect();
            a[flat_of(&idx)].re * scale
        })
        .collect()
}

fn mollify_mc(k: &AveragedKernel, f: &GridFunction, samples: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = k.profile();
    let pure = k.spec().is_pure_translation();
    if !pure && !p.declares(ProfileFlags::NORMALIZED) {
        return Err(Error::InvalidParameter(
            "Monte Carlo mollification needs a normalized profile".into(),
        ));
    }
    let law = if pure { None } else { Some(p.radial_law()?) };
    let draws = k.spec().sample(samples, seed)?;
    let n = f.dimension();
    // the sample standard error vanishes when no draw reaches the support of
    // f, so it is floored at the size of a single hit
    let floor = f.sup_norm() / draws.len() as f64;
    let out: Vec<(f64, f64)> = (0..f.len())
        .into_par_iter()
        .map(|flat| {
            let x = f.center(flat);
            let mut rng = stream_rng(seed ^ 0x6d6f_6c6c, flat as u64);
            let mut dir = vec![0.0; n];
            let mut z = vec![0.0; n];
            let mut acc = MeanAccumulator::default();
            for i in 0..draws.len() {
                let (s, y) = draws.get(i);
                let rho = match &law {
                    Some(l) => l.quantile(rand::Rng::random::<f64>(&mut rng)),
                    None => 0.0,
                };
                unit_direction(&mut rng, &mut dir);
                for a in 0..n {
                    z[a] = x[a] - y[a] - s * rho * dir[a];
                }
                acc.push(f.value_at(&z));
            }
            let e = acc.estimate();
            (e.value, e.std_error.max(floor))
        })
        .collect();
    Ok(out.into_iter().unzip())
}

/// `K_j * f` at every cell center of `f`.
pub fn mollify(k: &AveragedKernel, f: &GridFunction, path: MollifyPath) -> Result<MollifyResult> {
    if k.dimension() != f.dimension() {
        return Err(invalid("kernel and function dimensions differ"));
    }
    let radius = effective_support_radius(k);
    let (values, std_errors) = match path {
        MollifyPath::Direct => (convolve_direct(&build_table(k, f, radius)?, f), None),
        MollifyPath::FastConvolution => (convolve_fft(&build_table(k, f, radius)?, f), None),
        MollifyPath::MonteCarlo { samples, seed } => {
            let (v, e) = mollify_mc(k, f, samples, seed)?;
            (v, Some(e))
        }
    };
    let trusted = (0..f.len())
        .map(|i| f.boundary_distance(&f.center(i)) > radius)
        .collect();
    let mut grid = f.clone();
    grid.samples = values;
    Ok(MollifyResult {
        values: grid,
        path,
        std_errors,
        index: k.index(),
        support_radius: radius,
        trusted,
    })
}

/// `∫ K(x − z) f(z) dz` at a single point, integrating each cell of `f`
/// separately: cumulative increments in one dimension and for the planar
/// laws [`AveragedKernel::cumulative_2d`] covers, an 8×8 Gauss–Legendre rule
/// per cell for the other planar laws, exact laws for pure translations.
pub fn mollify_at(k: &AveragedKernel, f: &GridFunction, x: &[f64]) -> Result<Estimate> {
    if k.spec().is_pure_translation() {
        return Ok(Estimate::exact(translation_only_apply(k.spec(), f, x)?.value));
    }
    let radius = effective_support_radius(k);
    let h = f.pitch();
    let range = |a: usize| {
        let lo = ((x[a] - radius - f.lower()[a]) / h[a]).floor().max(0.0) as usize;
        let hi = (((x[a] + radius - f.lower()[a]) / h[a]).ceil().max(0.0) as usize).min(f.resolution()[a]);
        lo.min(hi)..hi
    };
    if f.dimension() == 1 {
        let r = range(0);
        if r.is_empty() {
            return Ok(Estimate::exact(0.0));
        }
        let edge = |i: usize| k.cumulative_1d(x[0] - (f.lower()[0] + i as f64 * h[0]));
        let g: Vec<f64> = (r.start..=r.end).map(edge).collect::<Result<_>>()?;
        let v = r.clone().zip(g.windows(2)).map(|(i, w)| f.samples()[i] * (w[0] - w[1])).sum();
        return Ok(Estimate::exact(v));
    }
    if k.has_cumulative_2d() {
        k.prepare_planar()?;
        let (rx, ry) = (range(0), range(1));
        if rx.is_empty() || ry.is_empty() {
            return Ok(Estimate::exact(0.0));
        }
        let edge = |a: usize, i: usize| x[a] - (f.lower()[a] + i as f64 * h[a]);
        let stride = ry.len() + 1;
        let g: Vec<f64> = (rx.start..=rx.end)
            .flat_map(|i| (ry.start..=ry.end).map(move |l| (i, l)))
            .map(|(i, l)| k.cumulative_2d([edge(0, i), edge(1, l)]))
            .collect::<Result<_>>()?;
        let at = |i: usize, l: usize| g[(i - rx.start) * stride + (l - ry.start)];
        let mut v = 0.0;
        for i in rx.clone() {
            for l in ry.clone() {
                let fv = f.samples()[i * f.resolution()[1] + l];
                if fv != 0.0 {
                    v += fv * (at(i, l) - at(i + 1, l) - at(i, l + 1) + at(i + 1, l + 1));
                }
            }
        }
        return Ok(Estimate::exact(v));
    }
    let (gx, gw) = gauss_legendre(8);
    let mut v = 0.0;
    for i in range(0) {
        for l in range(1) {
            let fv = f.samples()[i * f.resolution()[1] + l];
            if fv == 0.0 {
                continue;
            }
            let c = [f.lower()[0] + (i as f64 + 0.5) * h[0], f.lower()[1] + (l as f64 + 0.5) * h[1]];
            let mut acc = 0.0;
            for (xa, wa) in gx.iter().zip(&gw) {
                for (xb, wb) in gx.iter().zip(&gw) {
                    let p = [x[0] - c[0] - 0.5 * h[0] * xa, x[1] - c[1] - 0.5 * h[1] * xb];
                    acc += wa * wb * k.eval(&p)?;
                }
            }
            v += fv * acc * 0.25 * h[0] * h[1];
        }
    }
    Ok(Estimate::exact(v))
}

/// Whether the law's shift is a single atom (used for grid-exact commutation).
pub fn shift_is_atomic(k: &AveragedKernel) -> bool {
    matches!(
        k.spec().form(),
        JointForm::Atoms(_) | JointForm::Product { mean: MeanLaw::Dirac(_), .. }
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{Profile, ProfileKind};
    use crate::randomness::{
        Atom, Coupling, DensityKind, DensitySpec, JointDistributionSpec, ScalarLaw,
    };
    use proptest::prelude::*;
    use rand::Rng;

    fn atom_kernel(s: f64, y: f64, kind: ProfileKind) -> AveragedKernel {
        let p = Profile::normalized(kind, 1).unwrap();
        AveragedKernel::auto(p, JointDistributionSpec::point(s, vec![y]).unwrap()).unwrap()
    }

    #[test]
    fn catalog_norms() {
        let tent = test_function_catalog("tent", 1, &[-2.0], &[2.0], &[4000]).unwrap();
        assert!((tent.lp_norm(1.0) - 1.0).abs() < 1e-6);
        let spike = test_function_catalog("spike", 1, &[-2.0], &[2.0], &[1 << 14]).unwrap();
        assert!((spike.lp_norm(1.0) - 4.0).abs() < 0.02 * 4.0);
        let ball = test_function_catalog("ball-indicator", 2, &[-2.0, -2.0], &[2.0, 2.0], &[400, 400]).unwrap();
        assert!((ball.lp_norm(1.0) - std::f64::consts::PI).abs() < 0.01 * std::f64::consts::PI);
        assert!(matches!(
            test_function_catalog("nope", 1, &[0.0], &[1.0], &[4]),
            Err(Error::UnknownFunction(_))
        ));
    }

    #[test]
    fn l1_norms_stable_under_refinement() {
        for c in Catalog::ALL {
            for n in [1, 2] {
                let res = if n == 1 { 2048 } else { 128 };
                let coarse = c.grid(n, &vec![-2.0; n], &vec![2.0; n], &vec![res; n]).unwrap().lp_norm(1.0);
                let fine = c.grid(n, &vec![-2.0; n], &vec![2.0; n], &vec![2 * res; n]).unwrap().lp_norm(1.0);
                assert!((fine - coarse).abs() <= 0.01 * fine, "{} n={n}: {coarse} vs {fine}", c.name());
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = Catalog::CosinePacket.grid(2, &[-1.0, -2.0], &[1.5, 2.0], &[7, 5]).unwrap();
        let back: GridFunction = g.to_csv().parse().unwrap();
        assert_eq!(g, back);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        g.write_csv(&path).unwrap();
        assert_eq!(GridFunction::read_csv(&path).unwrap(), g);
    }

    #[test]
    fn interval_overlap_example() {
        // f = 1_[0,1], Π = δ_(1,0), φ = ½ 1_(0,1)
        let f = GridFunction::from_fn(1, &[-3.0], &[3.0], &[600], |z| f64::from((0.0..=1.0).contains(&z[0]))).unwrap();
        let k = atom_kernel(1.0, 0.0, ProfileKind::Indicator);
        for x in [0.0, 0.5, 1.0] {
            assert!((mollify_at(&k, &f, &[x]).unwrap().value - 0.5).abs() < 1e-12);
        }
        let m = mollify(&k, &f, MollifyPath::Direct).unwrap();
        let mid = m.values.value_at(&[0.505]);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_is_preserved_in_the_interior() {
        let f = Catalog::Constant.grid(1, &[-4.0], &[4.0], &[512]).unwrap();
        let k = atom_kernel(0.3, 0.1, ProfileKind::Gaussian);
        for path in [MollifyPath::Direct, MollifyPath::FastConvolution] {
            let m = mollify(&k, &f, path).unwrap();
            for i in m.trusted_indices() {
                assert!((m.values.samples()[i] - 1.0).abs() < 1.01e-6);
            }
            assert!(m.trusted.iter().any(|t| *t));
        }
    }

    #[test]
    fn paths_agree_on_the_plane() {
        let p = Profile::normalized(ProfileKind::Gaussian, 2).unwrap();
        let spec = JointDistributionSpec::new(
            JointForm::Atoms(vec![
                Atom { s: 0.2, y: vec![0.0, 0.0], weight: 0.5 },
                Atom { s: 0.3, y: vec![0.1, -0.1], weight: 0.5 },
            ]),
            2,
        )
        .unwrap();
        let k = AveragedKernel::auto(p, spec).unwrap();
        let f = Catalog::Tent.grid(2, &[-2.0, -2.0], &[2.0, 2.0], &[48, 48]).unwrap();
        let d = mollify(&k, &f, MollifyPath::Direct).unwrap();
        let q = mollify(&k, &f, MollifyPath::FastConvolution).unwrap();
        let mc = mollify(&k, &f, MollifyPath::MonteCarlo { samples: 20_000, seed: 1 }).unwrap();
        let se = mc.std_errors.as_ref().unwrap();
        let mut rng = stream_rng(4, 0);
        for _ in 0..30 {
            let i = rng.random_range(0..f.len());
            let a = d.values.samples()[i];
            assert!((a - q.values.samples()[i]).abs() < 1e-12);
            assert!((a - mc.values.samples()[i]).abs() <= 3.5 * se[i] + 1e-3, "{a} vs {}", mc.values.samples()[i]);
            let at = mollify_at(&k, &f, &f.center(i)).unwrap().value;
            assert!((a - at).abs() < 1e-6, "{a} vs {at}");
        }
    }

    #[test]
    fn translation_on_the_plane() {
        let spec = JointDistributionSpec::new(
            JointForm::Product { variance: ScalarLaw::Dirac(0.0), mean: MeanLaw::Dirac(vec![0.25, 0.0]) },
            2,
        )
        .unwrap();
        let p = Profile::normalized(ProfileKind::Indicator, 2).unwrap();
        let k = AveragedKernel::auto(p, spec).unwrap();
        let f = Catalog::Tent.grid(2, &[-2.0, -2.0], &[2.0, 2.0], &[32, 32]).unwrap();
        let m = mollify(&k, &f, MollifyPath::Direct).unwrap();
        let shifted = f.shift_cells(&[2, 0]);
        for i in 0..f.len() {
            assert!((m.values.samples()[i] - shifted.samples()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn monte_carlo_needs_normalized_profile() {
        let p = Profile::new(ProfileKind::Indicator, 1).unwrap();
        let k = AveragedKernel::auto(p, JointDistributionSpec::point(1.0, vec![0.0]).unwrap()).unwrap();
        let f = Catalog::Tent.grid(1, &[-2.0], &[2.0], &[32]).unwrap();
        assert!(mollify(&k, &f, MollifyPath::MonteCarlo { samples: 100, seed: 0 }).is_err());
    }

    #[test]
    fn coupled_kernel_commutes_with_whole_cell_shifts() {
        let p = Profile::normalized(ProfileKind::Exponential, 1).unwrap();
        let spec = JointDistributionSpec::new(
            JointForm::Coupled { variance: ScalarLaw::Uniform { lo: 0.0, hi: 0.2 }, coupling: Coupling::Ball { c: 1.0 } },
            1,
        )
        .unwrap();
        let k = AveragedKernel::auto(p, spec).unwrap();
        let f = Catalog::Step.grid(1, &[-3.0], &[3.0], &[600]).unwrap();
        let g = f.shift_cells(&[7]);
        let mf = mollify(&k, &f, MollifyPath::FastConvolution).unwrap().values;
        let mg = mollify(&k, &g, MollifyPath::FastConvolution).unwrap().values;
        let shifted = mf.shift_cells(&[7]);
        for i in 200..400 {
            assert!((mg.samples()[i] - shifted.samples()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn density_kernel_preserves_linearity() {
        let p = Profile::normalized(ProfileKind::Indicator, 1).unwrap();
        let spec = JointDistributionSpec::new(
            JointForm::Density(DensitySpec::new(DensityKind::Tent { alpha: 0.25, beta: 0.25 })),
            1,
        )
        .unwrap();
        let k = AveragedKernel::auto(p, spec).unwrap();
        let f = Catalog::Spike.grid(1, &[-2.0], &[2.0], &[400]).unwrap();
        let g = Catalog::CosinePacket.grid(1, &[-2.0], &[2.0], &[400]).unwrap();
        let fg = GridFunction::combine(2.0, &f, -3.0, &g).unwrap();
        let m = |h: &GridFunction| mollify(&k, h, MollifyPath::Direct).unwrap().values;
        let lhs = m(&fg);
        let rhs = GridFunction::combine(2.0, &m(&f), -3.0, &m(&g)).unwrap();
        for (a, b) in lhs.samples().iter().zip(rhs.samples()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn contraction_and_positivity(s in 0.05f64..0.5, y in -0.5f64..0.5, which in 0usize..5) {
            let c = [Catalog::BallIndicator, Catalog::Tent, Catalog::Spike, Catalog::Step, Catalog::CosinePacket][which];
            let f = c.grid(1, &[-2.0], &[2.0], &[256]).unwrap().abs();
            let k = atom_kernel(s, y, ProfileKind::PowerTail { delta: 1.0 });
            let m = mollify(&k, &f, MollifyPath::FastConvolution).unwrap();
            let sup = f.sup_norm();
            for v in m.values.samples() {
                prop_assert!(*v <= sup + 1e-9);
                prop_assert!(*v >= -1e-12);
            }
        }
    }
}
