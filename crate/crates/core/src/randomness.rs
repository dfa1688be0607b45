//! Joint laws Π_j of the dilation `s` and the shift `y`, families `j ↦ Π_j`,
//! samplers, and diagnostics for the conditions imposed on them.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::mc::{open_unit, stream_rng, unit_ball_point, unit_direction, Estimate, MeanAccumulator};
use crate::profiles::{ball_volume, sphere_area};
use crate::quad::{integrate_with_breaks, Tolerance};
use crate::report::{ConditionReport, Evidence, Verdict};

const MASS_TOL: f64 = 1e-9;

/// A law on `[0, ∞)` for the dilation.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarLaw {
    Dirac(f64),
    /// Uniform on `(lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// `(value, weight)` pairs.
    Discrete(Vec<(f64, f64)>),
}

impl ScalarLaw {
    fn validate(&self) -> Result<()> {
        match self {
            ScalarLaw::Dirac(v) if !(v.is_finite() && *v >= 0.0) => {
                Err(invalid(format!("dilation must be >= 0, got {v}")))
            }
            ScalarLaw::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && hi > lo) => {
                Err(invalid(format!("uniform dilation law needs 0 <= lo < hi, got ({lo}, {hi}]")))
            }
            ScalarLaw::Discrete(pts) => {
                if pts.is_empty() {
                    return Err(invalid("discrete dilation law has no atoms"));
                }
                if pts.iter().any(|&(v, w)| !(v.is_finite() && v >= 0.0 && w >= 0.0)) {
                    return Err(invalid("discrete dilation atoms need value >= 0 and weight >= 0"));
                }
                let total: f64 = pts.iter().map(|p| p.1).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::MassMismatch(total));
                }
                let zero = pts.iter().filter(|p| p.1 > 0.0).any(|p| p.0 == 0.0);
                let positive = pts.iter().filter(|p| p.1 > 0.0).any(|p| p.0 > 0.0);
                if zero && positive {
                    return Err(invalid("atoms with s = 0 are only allowed in pure translations"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScalarLaw::Dirac(v) => *v == 0.0,
            ScalarLaw::Uniform { .. } => false,
            ScalarLaw::Discrete(pts) => pts.iter().all(|p| p.0 == 0.0 || p.1 == 0.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarLaw::Dirac(v) => *v,
            ScalarLaw::Uniform { lo, hi } => hi - (hi - lo) * rng.random::<f64>(),
            ScalarLaw::Discrete(pts) => pick(pts.iter().map(|p| p.1), rng.random::<f64>())
                .map_or(pts[pts.len() - 1].0, |k| pts[k].0),
        }
    }

    /// `P(s ≤ t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            ScalarLaw::Dirac(v) => f64::from(t >= *v),
            ScalarLaw::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            ScalarLaw::Discrete(pts) => pts.iter().filter(|p| p.0 <= t).map(|p| p.1).sum(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarLaw::Dirac(v) => *v,
            ScalarLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            ScalarLaw::Discrete(pts) => pts.iter().map(|p| p.0 * p.1).sum(),
        }
    }

    pub fn support_max(&self) -> f64 {
        match self {
            ScalarLaw::Dirac(v) => *v,
            ScalarLaw::Uniform { hi, .. } => *hi,
            ScalarLaw::Discrete(pts) => pts.iter().filter(|p| p.1 > 0.0).map(|p| p.0).fold(0.0, f64::max),
        }
    }

    /// Law of `s / j`.
    pub fn shrink(&self, j: f64) -> Self {
        match self {
            ScalarLaw::Dirac(v) => ScalarLaw::Dirac(v / j),
            ScalarLaw::Uniform { lo, hi } => ScalarLaw::Uniform { lo: lo / j, hi: hi / j },
            ScalarLaw::Discrete(pts) => ScalarLaw::Discrete(pts.iter().map(|&(v, w)| (v / j, w)).collect()),
        }
    }
}

/// Index of the first cumulative weight exceeding `u`.
fn pick(weights: impl Iterator<Item = f64>, u: f64) -> Option<usize> {
    let mut run = 0.0;
    for (k, w) in weights.enumerate() {
        run += w;
        if u < run {
            return Some(k);
        }
    }
    None
}

/// A law on ℝⁿ for the shift.
#[derive(Clone, Debug, PartialEq)]
pub enum MeanLaw {
    Dirac(Vec<f64>),
    /// Uniform on the closed ball `B(0, radius)`.
    UniformBall { radius: f64 },
    /// One-dimensional density `(1-p)/L · (1 - y/L)^{-p}` on `(0, L)`,
    /// unbounded and nondecreasing when `p > 0`, uniform when `p = 0`.
    PowerSingular { exponent: f64, length: f64 },
    Discrete(Vec<(Vec<f64>, f64)>),
}

impl MeanLaw {
    pub fn zero(n: usize) -> Self {
        MeanLaw::Dirac(vec![0.0; n])
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            MeanLaw::Dirac(y) if y.len() != n => Err(invalid("shift atom has wrong dimension")),
            MeanLaw::UniformBall { radius } if !(radius.is_finite() && *radius > 0.0) => {
                Err(invalid(format!("ball radius must be positive, got {radius}")))
            }
            MeanLaw::PowerSingular { exponent, length } => {
                if n != 1 {
                    return Err(invalid("power-singular shift law is one-dimensional"));
                }
                if !(exponent.is_finite() && (0.0..1.0).contains(exponent)) {
                    return Err(invalid(format!("power-singular exponent must lie in [0, 1), got {exponent}")));
                }
                if !(length.is_finite() && *length > 0.0) {
                    return Err(invalid("power-singular length must be positive"));
                }
                Ok(())
            }
            MeanLaw::Discrete(pts) => {
                if pts.is_empty() || pts.iter().any(|(y, w)| y.len() != n || *w < 0.0) {
                    return Err(invalid("discrete shift law needs atoms of dimension n with weight >= 0"));
                }
                let total: f64 = pts.iter().map(|p| p.1).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::MassMismatch(total));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            MeanLaw::Dirac(y) => y.iter().all(|&v| v == 0.0),
            MeanLaw::Discrete(pts) => pts.iter().all(|(y, w)| *w == 0.0 || y.iter().all(|&v| v == 0.0)),
            _ => false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            MeanLaw::Dirac(y) => out.copy_from_slice(y),
            MeanLaw::UniformBall { radius } => {
                unit_ball_point(rng, out);
                out.iter_mut().for_each(|v| *v *= radius);
            }
            MeanLaw::PowerSingular { .. } => out[0] = self.quantile_1d(rng.random::<f64>()),
            MeanLaw::Discrete(pts) => {
                let k = pick(pts.iter().map(|p| p.1), rng.random::<f64>()).unwrap_or(pts.len() - 1);
                out.copy_from_slice(&pts[k].0);
            }
        }
    }

    /// Quantile of a one-dimensional power-singular law at `q ∈ [0, 1)`.
    pub fn quantile_1d(&self, q: f64) -> f64 {
        match self {
            MeanLaw::PowerSingular { exponent, length } => {
                length * -((-q).ln_1p() / (1.0 - exponent)).exp_m1()
            }
            _ => panic!("quantile_1d is only defined for the power-singular law"),
        }
    }

    /// `P(y ≤ t)` in one dimension.
    pub fn cdf_1d(&self, t: f64) -> f64 {
        match self {
            MeanLaw::Dirac(y) => f64::from(t >= y[0]),
            MeanLaw::UniformBall { radius } => ((t + radius) / (2.0 * radius)).clamp(0.0, 1.0),
            MeanLaw::PowerSingular { exponent, length } => {
                if t <= 0.0 {
                    0.0
                } else if t >= *length {
                    1.0
                } else {
                    -((1.0 - exponent) * (-t / length).ln_1p()).exp_m1()
                }
            }
            MeanLaw::Discrete(pts) => pts.iter().filter(|p| p.0[0] <= t).map(|p| p.1).sum(),
        }
    }

    /// Density in one dimension for the continuous laws.
    pub fn density_1d(&self, t: f64) -> Option<f64> {
        match self {
            MeanLaw::UniformBall { radius } => Some(if t.abs() <= *radius { 0.5 / radius } else { 0.0 }),
            MeanLaw::PowerSingular { exponent, length } => Some(if t > 0.0 && t < *length {
                (1.0 - exponent) / length * (1.0 - t / length).powf(-exponent)
            } else {
                0.0
            }),
            _ => None,
        }
    }

    pub fn support_radius(&self) -> f64 {
        let norm = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>().sqrt();
        match self {
            MeanLaw::Dirac(y) => norm(y),
            MeanLaw::UniformBall { radius } => *radius,
            MeanLaw::PowerSingular { length, .. } => *length,
            MeanLaw::Discrete(pts) => pts.iter().filter(|p| p.1 > 0.0).map(|p| norm(&p.0)).fold(0.0, f64::max),
        }
    }

    /// Law of `y / j`.
    pub fn shrink(&self, j: f64) -> Self {
        match self {
            MeanLaw::Dirac(y) => MeanLaw::Dirac(y.iter().map(|v| v / j).collect()),
            MeanLaw::UniformBall { radius } => MeanLaw::UniformBall { radius: radius / j },
            MeanLaw::PowerSingular { exponent, length } => MeanLaw::PowerSingular {
                exponent: *exponent,
                length: length / j,
            },
            MeanLaw::Discrete(pts) => MeanLaw::Discrete(
                pts.iter()
                    .map(|(y, w)| (y.iter().map(|v| v / j).collect(), *w))
                    .collect(),
            ),
        }
    }
}

/// Shift tied to the dilation: `y = c · s · u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    /// `u` uniform on the unit sphere, so `|y| = c s`.
    Sphere { c: f64 },
    /// `u` uniform in the unit ball, so `|y| ≤ c s`.
    Ball { c: f64 },
}

impl Coupling {
    pub fn constant(&self) -> f64 {
        match *self {
            Coupling::Sphere { c } | Coupling::Ball { c } => c,
        }
    }
}

pub type DensityFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum DensityKind {
    /// Constant on `[0, s_max] × B̄(0, y_radius)`.
    UniformBox { s_max: f64, y_radius: f64 },
    /// `(2s/α²) · (1 - |y|/β) · n(n+1)/(ω_n βⁿ)` on `[0, α] × B̄(0, β)`.
    Tent { alpha: f64, beta: f64 },
    Custom {
        name: String,
        density: DensityFn,
        s_max: f64,
        y_radius: f64,
        declared_max: Option<f64>,
        /// `γ(s, y)` depends on `y` only through `|y|`.
        radial_in_mean: bool,
    },
}

impl fmt::Debug for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityKind::UniformBox { s_max, y_radius } => f
                .debug_struct("UniformBox")
                .field("s_max", s_max)
                .field("y_radius", y_radius)
                .finish(),
            DensityKind::Tent { alpha, beta } => {
                f.debug_struct("Tent").field("alpha", alpha).field("beta", beta).finish()
            }
            DensityKind::Custom { name, s_max, y_radius, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("s_max", s_max)
                .field("y_radius", y_radius)
                .finish(),
        }
    }
}

/// `γ_d(s, y) = d^{n+1} γ(d s, d y)` for a base density `γ`.
#[derive(Clone, Debug)]
pub struct DensitySpec {
    pub kind: DensityKind,
    pub dilation: f64,
}

impl DensitySpec {
    pub fn new(kind: DensityKind) -> Self {
        Self { kind, dilation: 1.0 }
    }

    fn base_support(&self) -> (f64, f64) {
        match &self.kind {
            DensityKind::UniformBox { s_max, y_radius } => (*s_max, *y_radius),
            DensityKind::Tent { alpha, beta } => (*alpha, *beta),
            DensityKind::Custom { s_max, y_radius, .. } => (*s_max, *y_radius),
        }
    }

    /// `(s_max, y_radius)` of the support box after dilation.
    pub fn support(&self) -> (f64, f64) {
        let (s, r) = self.base_support();
        (s / self.dilation, r / self.dilation)
    }

    pub fn radial_in_mean(&self) -> bool {
        match &self.kind {
            DensityKind::Custom { radial_in_mean, .. } => *radial_in_mean,
            _ => true,
        }
    }

    fn base(&self, s: f64, y: &[f64]) -> f64 {
        let n = y.len();
        let (sm, yr) = self.base_support();
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(0.0..=sm).contains(&s) || r > yr {
            return 0.0;
        }
        match &self.kind {
            DensityKind::UniformBox { s_max, y_radius } => {
                1.0 / (s_max * ball_volume(n) * y_radius.powi(n as i32))
            }
            DensityKind::Tent { alpha, beta } => {
                let nf = n as f64;
                2.0 * s / (alpha * alpha) * (1.0 - r / beta) * nf * (nf + 1.0)
                    / (sphere_area(n) * beta.powi(n as i32))
            }
            DensityKind::Custom { density, .. } => density(s, y),
        }
    }

    /// `γ(s, y)`.
    pub fn eval(&self, s: f64, y: &[f64]) -> f64 {
        let d = self.dilation;
        if d == 1.0 {
            return self.base(s, y);
        }
        let dy: Vec<f64> = y.iter().map(|v| d * v).collect();
        d.powi(y.len() as i32 + 1) * self.base(d * s, &dy)
    }

    /// `γ(s, ρ e₁)` for densities radial in `y`.
    pub fn eval_radial(&self, s: f64, rho: f64, n: usize) -> f64 {
        let mut y = vec![0.0; n];
        y[0] = rho;
        self.eval(s, &y)
    }

    fn declared_max(&self, n: usize) -> Option<f64> {
        let d = self.dilation.powi(n as i32 + 1);
        match &self.kind {
            DensityKind::UniformBox { .. } => Some(self.base(0.0, &vec![0.0; n]) * d),
            DensityKind::Tent { alpha, beta } => {
                let nf = n as f64;
                Some(2.0 / alpha * nf * (nf + 1.0) / (sphere_area(n) * beta.powi(n as i32)) * d)
            }
            DensityKind::Custom { declared_max, .. } => declared_max.map(|m| m * d),
        }
    }

    /// Largest value on a 129 × 129 grid over the support box; the second
    /// axis is `y₁` on `[-r, r]` for `n = 1` and `|y|` on `[0, r]` otherwise.
    pub fn grid_max(&self, n: usize) -> f64 {
        const K: usize = 129;
        let (sm, yr) = self.support();
        let mut m = 0.0f64;
        for a in 0..K {
            let s = sm * a as f64 / (K - 1) as f64;
            for b in 0..K {
                let t = b as f64 / (K - 1) as f64;
                let v = if n == 1 {
                    self.eval(s, &[yr * (2.0 * t - 1.0)])
                } else {
                    self.eval_radial(s, yr * t, n)
                };
                if v.is_nan() || v > m {
                    m = v;
                }
            }
        }
        m
    }

    /// `∫∫_{[0,r] × B(0,r)} γ`, by nested adaptive quadrature.
    pub fn mass_inside(&self, r: f64, n: usize) -> Result<f64> {
        let (sm, yr) = self.support();
        let (s_hi, y_hi) = (r.min(sm), r.min(yr));
        if s_hi <= 0.0 || y_hi <= 0.0 {
            return Ok(0.0);
        }
        let tol = Tolerance::new(1e-15, 1e-12);
        let value = if n == 1 {
            integrate_with_breaks(
                |s| integrate_with_breaks(|y| self.eval(s, &[y]), -y_hi, y_hi, &[0.0], tol).value,
                0.0,
                s_hi,
                &[],
                tol,
            )
            .value
        } else if self.radial_in_mean() {
            let w = sphere_area(n);
            integrate_with_breaks(
                |s| {
                    integrate_with_breaks(
                        |rho| w * rho.powi(n as i32 - 1) * self.eval_radial(s, rho, n),
                        0.0,
                        y_hi,
                        &[],
                        tol,
                    )
                    .value
                },
                0.0,
                s_hi,
                &[],
                tol,
            )
            .value
        } else {
            return Err(Error::Unsupported(
                "density quadrature in n >= 2 needs a density radial in y".into(),
            ));
        };
        Ok(value)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub s: f64,
    pub y: Vec<f64>,
    pub weight: f64,
}

/// Representation of Π.
#[derive(Clone, Debug)]
pub enum JointForm {
    Atoms(Vec<Atom>),
    /// Independent dilation and shift.
    Product { variance: ScalarLaw, mean: MeanLaw },
    Density(DensitySpec),
    /// Shift determined by the dilation and an auxiliary uniform variable.
    Coupled { variance: ScalarLaw, coupling: Coupling },
}

/// The joint law Π_j of `(s, y) ∈ [0, ∞) × ℝⁿ`.
#[derive(Clone, Debug)]
pub struct JointDistributionSpec {
    form: JointForm,
    dimension: usize,
    index: u32,
}

/// Draws `(sᵢ, yᵢ)`; `y` is stored flat with stride `dimension`.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub dimension: usize,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, &[f64]) {
        let n = self.dimension;
        (self.s[i], &self.y[i * n..(i + 1) * n])
    }
}

impl JointDistributionSpec {
    pub fn new(form: JointForm, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let spec = Self {
            form,
            dimension,
            index: 1,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single atom at `(s, y)`.
    pub fn point(s: f64, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(JointForm::Atoms(vec![Atom { s, y, weight: 1.0 }]), n)
    }

    pub fn with_index(mut self, j: u32) -> Self {
        self.index = j;
        self
    }

    pub fn form(&self) -> &JointForm {
        &self.form
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    fn validate(&self) -> Result<()> {
        let n = self.dimension;
        match &self.form {
            JointForm::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Err(invalid("no atoms"));
                }
                for a in atoms {
                    if a.y.len() != n {
                        return Err(invalid("atom shift has wrong dimension"));
                    }
                    if !(a.s.is_finite() && a.s >= 0.0 && a.weight >= 0.0 && a.y.iter().all(|v| v.is_finite())) {
                        return Err(invalid("atoms need finite s >= 0 and weight >= 0"));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                if (total - 1.0).abs() > MASS_TOL {
                    return Err(Error::MassMismatch(total));
                }
                let live = atoms.iter().filter(|a| a.weight > 0.0);
                let zero = live.clone().any(|a| a.s == 0.0);
                if zero && live.clone().any(|a| a.s > 0.0) {
                    return Err(invalid("atoms with s = 0 are only allowed in pure translations"));
                }
                Ok(())
            }
            JointForm::Product { variance, mean } => {
                variance.validate()?;
                mean.validate(n)
            }
            JointForm::Coupled { variance, coupling } => {
                variance.validate()?;
                let c = coupling.constant();
                if !(c.is_finite() && c >= 0.0) {
                    return Err(invalid("coupling constant must be >= 0"));
                }
                Ok(())
            }
            JointForm::Density(d) => {
                let (s, r) = d.base_support();
                if !(s.is_finite() && s > 0.0 && r.is_finite() && r > 0.0) {
                    return Err(invalid("density support box must have positive sides"));
                }
                if !(d.dilation.is_finite() && d.dilation > 0.0) {
                    return Err(invalid("density dilation must be positive"));
                }
                if let DensityKind::Custom { .. } = d.kind {
                    let m = d.mass_inside(f64::INFINITY, n)?;
                    if (m - 1.0).abs() > MASS_TOL {
                        return Err(Error::MassMismatch(m));
                    }
                }
                Ok(())
            }
        }
    }

    /// Total mass by the form's own arithmetic (sum or quadrature).
    pub fn total_mass(&self) -> Result<f64> {
        match &self.form {
            JointForm::Atoms(a) => Ok(a.iter().map(|a| a.weight).sum()),
            JointForm::Density(d) => d.mass_inside(f64::INFINITY, self.dimension),
            JointForm::Product { variance, mean } => Ok(law_mass(variance) * mean_mass(mean)),
            JointForm::Coupled { variance, .. } => Ok(law_mass(variance)),
        }
    }

    /// Pushforward under `(s, y) ↦ (s/j, y/j)`, so that `Π_j(E) = Π(jE)`.
    pub fn dilate(&self, j: f64) -> Self {
        let form = match &self.form {
            JointForm::Atoms(atoms) => JointForm::Atoms(
                atoms
                    .iter()
                    .map(|a| Atom {
                        s: a.s / j,
                        y: a.y.iter().map(|v| v / j).collect(),
                        weight: a.weight,
                    })
                    .collect(),
            ),
            JointForm::Product { variance, mean } => JointForm::Product {
                variance: variance.shrink(j),
                mean: mean.shrink(j),
            },
            JointForm::Coupled { variance, coupling } => JointForm::Coupled {
                variance: variance.shrink(j),
                coupling: *coupling,
            },
            JointForm::Density(d) => JointForm::Density(DensitySpec {
                kind: d.kind.clone(),
                dilation: d.dilation * j,
            }),
        };
        Self {
            form,
            dimension: self.dimension,
            index: self.index,
        }
    }

    /// Dilation is identically zero.
    pub fn is_pure_translation(&self) -> bool {
        match &self.form {
            JointForm::Atoms(a) => a.iter().all(|a| a.s == 0.0 || a.weight == 0.0),
            JointForm::Product { variance, .. } | JointForm::Coupled { variance, .. } => variance.is_zero(),
            JointForm::Density(_) => false,
        }
    }

    /// Shift is identically zero.
    pub fn mean_is_zero(&self) -> bool {
        match &self.form {
            JointForm::Atoms(a) => a.iter().all(|a| a.weight == 0.0 || a.y.iter().all(|&v| v == 0.0)),
            JointForm::Product { mean, .. } => mean.is_zero(),
            JointForm::Coupled { variance, coupling } => coupling.constant() == 0.0 || variance.is_zero(),
            JointForm::Density(_) => false,
        }
    }

    /// `(max s, max |y|)` over the support.
    pub fn support_bounds(&self) -> (f64, f64) {
        let norm = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>().sqrt();
        match &self.form {
            JointForm::Atoms(a) => a.iter().filter(|a| a.weight > 0.0).fold((0.0, 0.0), |(s, r), a| {
                (f64::max(s, a.s), f64::max(r, norm(&a.y)))
            }),
            JointForm::Product { variance, mean } => (variance.support_max(), mean.support_radius()),
            JointForm::Coupled { variance, coupling } => {
                let s = variance.support_max();
                (s, coupling.constant() * s)
            }
            JointForm::Density(d) => d.support(),
        }
    }

    /// `ν((-∞, t])` for the dilation marginal; `None` for density forms.
    pub fn variance_cdf(&self, t: f64) -> Option<f64> {
        match &self.form {
            JointForm::Atoms(a) => Some(a.iter().filter(|a| a.s <= t).map(|a| a.weight).sum()),
            JointForm::Product { variance, .. } | JointForm::Coupled { variance, .. } => Some(variance.cdf(t)),
            JointForm::Density(_) => None,
        }
    }

    /// The density when the form is one.
    pub fn density(&self) -> Option<&DensitySpec> {
        match &self.form {
            JointForm::Density(d) => Some(d),
            _ => None,
        }
    }

    fn rejection_bound(&self, d: &DensitySpec) -> Result<f64> {
        let n = self.dimension;
        let bound = match d.declared_max(n) {
            Some(m) => m,
            None => 1.1 * d.grid_max(n),
        };
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::SamplerSetup { density_max: bound });
        }
        Ok(bound)
    }

    /// `count` independent draws; the same seed reproduces the same draws.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Samples> {
        if count == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        let n = self.dimension;
        let mut rng = stream_rng(seed, u64::from(self.index));
        let mut out = Samples {
            dimension: n,
            s: Vec::with_capacity(count),
            y: vec![0.0; count * n],
        };
        match &self.form {
            JointForm::Atoms(atoms) => {
                for i in 0..count {
                    let k = pick(atoms.iter().map(|a| a.weight), rng.random::<f64>()).unwrap_or(atoms.len() - 1);
                    out.s.push(atoms[k].s);
                    out.y[i * n..(i + 1) * n].copy_from_slice(&atoms[k].y);
                }
            }
            JointForm::Product { variance, mean } => {
                for i in 0..count {
                    out.s.push(variance.sample(&mut rng));
                    mean.sample(&mut rng, &mut out.y[i * n..(i + 1) * n]);
                }
            }
            JointForm::Coupled { variance, coupling } => {
                for i in 0..count {
                    let s = variance.sample(&mut rng);
                    out.s.push(s);
                    let y = &mut out.y[i * n..(i + 1) * n];
                    match *coupling {
                        Coupling::Sphere { .. } => unit_direction(&mut rng, y),
                        Coupling::Ball { .. } => unit_ball_point(&mut rng, y),
                    }
                    let f = coupling.constant() * s;
                    y.iter_mut().for_each(|v| *v *= f);
                }
            }
            JointForm::Density(d) => {
                let bound = self.rejection_bound(d)?;
                let (sm, yr) = d.support();
                let mut y = vec![0.0; n];
                for i in 0..count {
                    loop {
                        let s = sm * open_unit(&mut rng);
                        unit_ball_point(&mut rng, &mut y);
                        y.iter_mut().for_each(|v| *v *= yr);
                        if rng.random::<f64>() * bound < d.eval(s, &y) {
                            out.s.push(s);
                            out.y[i * n..(i + 1) * n].copy_from_slice(&y);
                            break;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `∫ g dΠ`: exact for atoms, otherwise a Monte Carlo mean over `samples` draws.
    pub fn expectation<G: Fn(f64, &[f64]) -> f64>(&self, g: G, samples: usize, seed: u64) -> Result<Estimate> {
        if let JointForm::Atoms(atoms) = &self.form {
            return Ok(Estimate::exact(atoms.iter().map(|a| a.weight * g(a.s, &a.y)).sum()));
        }
        let draws = self.sample(samples, seed)?;
        let mut acc = MeanAccumulator::default();
        for i in 0..draws.len() {
            let (s, y) = draws.get(i);
            acc.push(g(s, y));
        }
        Ok(acc.estimate())
    }
}

fn law_mass(l: &ScalarLaw) -> f64 {
    match l {
        ScalarLaw::Discrete(p) => p.iter().map(|p| p.1).sum(),
        _ => 1.0,
    }
}

fn mean_mass(l: &MeanLaw) -> f64 {
    match l {
        MeanLaw::Discrete(p) => p.iter().map(|p| p.1).sum(),
        _ => 1.0,
    }
}

pub type Generator = Arc<dyn Fn(u32) -> Result<JointDistributionSpec> + Send + Sync>;

/// Named constructors for `j ↦ Π_j`.
#[derive(Clone)]
pub enum FamilyKind {
    /// `ν_j` uniform on `(0, s_max/j]`, `μ_j = δ₀`.
    UniformVariance { s_max: f64 },
    /// `ν_j` uniform on `(0, s_max/j]`, `y_j = c ε_j u` with `u` on the unit sphere.
    Coupled { s_max: f64, c: f64 },
    /// Uniform density on `[0, s_max/j^{s_rate}] × B̄(0, y_radius/j^{y_rate})`.
    UniformBox { s_max: f64, y_radius: f64, s_rate: f64, y_rate: f64 },
    /// Tent density dilated by `j`.
    Tent { alpha: f64, beta: f64 },
    /// `Π_j(E) = Π_1(jE)`.
    SelfSimilar(Box<JointDistributionSpec>),
    /// `Π_j = Π_1` for every `j`.
    Constant(Box<JointDistributionSpec>),
    /// Pure translation by the one-dimensional power-singular law of length `length/j`.
    Translation { exponent: f64, length: f64 },
    Custom { name: String, generator: Generator, self_similar: bool },
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::Custom { name, self_similar, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("self_similar", self_similar)
                .finish(),
            FamilyKind::UniformVariance { s_max } => write!(f, "UniformVariance {{ s_max: {s_max} }}"),
            FamilyKind::Coupled { s_max, c } => write!(f, "Coupled {{ s_max: {s_max}, c: {c} }}"),
            FamilyKind::UniformBox { s_max, y_radius, s_rate, y_rate } => write!(
                f,
                "UniformBox {{ s_max: {s_max}, y_radius: {y_radius}, s_rate: {s_rate}, y_rate: {y_rate} }}"
            ),
            FamilyKind::Tent { alpha, beta } => write!(f, "Tent {{ alpha: {alpha}, beta: {beta} }}"),
            FamilyKind::SelfSimilar(s) => f.debug_tuple("SelfSimilar").field(s).finish(),
            FamilyKind::Constant(s) => f.debug_tuple("Constant").field(s).finish(),
            FamilyKind::Translation { exponent, length } => {
                write!(f, "Translation {{ exponent: {exponent}, length: {length} }}")
            }
        }
    }
}

/// A family `j ↦ Π_j` for `1 ≤ j ≤ horizon`.
#[derive(Clone, Debug)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub dimension: usize,
    pub horizon: u32,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, dimension: usize, horizon: u32) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        let fam = Self {
            kind,
            dimension,
            horizon,
        };
        fam.member(1)?;
        Ok(fam)
    }

    pub fn with_horizon(&self, horizon: u32) -> Self {
        let mut f = self.clone();
        f.horizon = horizon;
        f
    }

    pub fn name(&self) -> String {
        match &self.kind {
            FamilyKind::UniformVariance { .. } => "uniform-variance".into(),
            FamilyKind::Coupled { .. } => "coupled".into(),
            FamilyKind::UniformBox { .. } => "uniform-box".into(),
            FamilyKind::Tent { .. } => "tent-density".into(),
            FamilyKind::SelfSimilar(_) => "self-similar".into(),
            FamilyKind::Constant(_) => "constant".into(),
            FamilyKind::Translation { .. } => "translation".into(),
            FamilyKind::Custom { name, .. } => name.clone(),
        }
    }

    /// `Π_j(E) = Π_1(jE)` for every `j`.
    pub fn self_similar(&self) -> bool {
        match &self.kind {
            FamilyKind::UniformBox { s_rate, y_rate, .. } => *s_rate == 1.0 && *y_rate == 1.0,
            FamilyKind::Constant(_) => false,
            FamilyKind::Custom { self_similar, .. } => *self_similar,
            _ => true,
        }
    }

    /// Π_j.
    pub fn member(&self, j: u32) -> Result<JointDistributionSpec> {
        if j == 0 || j > self.horizon {
            return Err(Error::IndexOutOfRange { j, horizon: self.horizon });
        }
        let n = self.dimension;
        let jf = f64::from(j);
        let spec = match &self.kind {
            FamilyKind::UniformVariance { s_max } => JointDistributionSpec::new(
                JointForm::Product {
                    variance: ScalarLaw::Uniform { lo: 0.0, hi: s_max / jf },
                    mean: MeanLaw::zero(n),
                },
                n,
            )?,
            FamilyKind::Coupled { s_max, c } => JointDistributionSpec::new(
                JointForm::Coupled {
                    variance: ScalarLaw::Uniform { lo: 0.0, hi: s_max / jf },
                    coupling: Coupling::Sphere { c: *c },
                },
                n,
            )?,
            FamilyKind::UniformBox { s_max, y_radius, s_rate, y_rate } => {
                if self.self_similar() {
                    JointDistributionSpec::new(
                        JointForm::Density(DensitySpec {
                            kind: DensityKind::UniformBox { s_max: *s_max, y_radius: *y_radius },
                            dilation: jf,
                        }),
                        n,
                    )?
                } else {
                    JointDistributionSpec::new(
                        JointForm::Density(DensitySpec::new(DensityKind::UniformBox {
                            s_max: s_max / jf.powf(*s_rate),
                            y_radius: y_radius / jf.powf(*y_rate),
                        })),
                        n,
                    )?
                }
            }
            FamilyKind::Tent { alpha, beta } => JointDistributionSpec::new(
                JointForm::Density(DensitySpec {
                    kind: DensityKind::Tent { alpha: *alpha, beta: *beta },
                    dilation: jf,
                }),
                n,
            )?,
            FamilyKind::SelfSimilar(base) => {
                if base.dimension != n {
                    return Err(invalid("family dimension differs from its base law"));
                }
                base.dilate(jf)
            }
            FamilyKind::Constant(base) => {
                if base.dimension != n {
                    return Err(invalid("family dimension differs from its base law"));
                }
                (**base).clone()
            }
            FamilyKind::Translation { exponent, length } => JointDistributionSpec::new(
                JointForm::Product {
                    variance: ScalarLaw::Dirac(0.0),
                    mean: MeanLaw::PowerSingular { exponent: *exponent, length: length / jf },
                },
                n,
            )?,
            FamilyKind::Custom { generator, .. } => generator(j)?,
        };
        if spec.dimension != n {
            return Err(invalid("generated law has the wrong dimension"));
        }
        Ok(spec.with_index(j))
    }

    /// Compares `γ_j(s, y) j^{-(n+1)}` with `γ_1(js, jy)` at random points of
    /// the support of `γ_j`. Returns the largest relative discrepancy.
    pub fn self_similarity_defect(&self, j: u32, points: usize, seed: u64) -> Result<f64> {
        let n = self.dimension;
        let one = self.member(1)?;
        let pj = self.member(j)?;
        let (d1, dj) = match (one.density(), pj.density()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::UnsupportedCheck("self-similarity spot check needs density forms".into())),
        };
        let jf = f64::from(j);
        let (sm, yr) = dj.support();
        let mut rng = stream_rng(seed, 0x55);
        let mut y = vec![0.0; n];
        let mut worst = 0.0f64;
        for _ in 0..points {
            let s = sm * rng.random::<f64>();
            unit_ball_point(&mut rng, &mut y);
            y.iter_mut().for_each(|v| *v *= yr);
            let lhs = dj.eval(s, &y) * jf.powi(-(n as i32 + 1));
            let jy: Vec<f64> = y.iter().map(|v| jf * v).collect();
            let rhs = d1.eval(jf * s, &jy);
            let defect = if lhs == rhs { 0.0 } else { (lhs - rhs).abs() / rhs.abs().max(lhs.abs()) };
            worst = worst.max(defect);
        }
        Ok(worst)
    }
}

/// Indices checked by the family diagnostics: powers of two up to `J`, and `J`.
pub fn diagnostic_indices(horizon: u32) -> Vec<u32> {
    let mut js: Vec<u32> = std::iter::successors(Some(1u32), |&j| j.checked_mul(2))
        .take_while(|&j| j <= horizon)
        .collect();
    if *js.last().unwrap() != horizon {
        js.push(horizon);
    }
    js
}

/// The fixed battery of 25 bounded continuous functions of `(s, y) ∈ ℝ^{1+n}`:
/// 10 cosine products, 8 compactly supported bumps, 7 clamped distances.
/// Every member is Lipschitz with constant at most about ½.
pub fn vague_battery(n: usize) -> Vec<Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>> {
    let mut out: Vec<Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>> = Vec::with_capacity(25);
    let m = n + 1;
    let coord = |s: f64, y: &[f64], i: usize| if i == 0 { s } else { y[i - 1] };
    for k in 0..10 {
        let freq: Vec<f64> = (0..m).map(|i| 0.25 * (1 + (k + 2 * i) % 4) as f64 / m as f64).collect();
        let phase: Vec<f64> = (0..m).map(|i| 0.7 * k as f64 + 1.3 * i as f64).collect();
        out.push(Box::new(move |s, y| {
            (0..m).map(|i| (freq[i] * coord(s, y, i) + phase[i]).cos()).product()
        }));
    }
    for k in 0..8 {
        let center: Vec<f64> = (0..m)
            .map(|i| 0.5 * (((k + i) % 4) as f64 - 1.5) * if i == 0 { 0.5 } else { 1.0 })
            .collect();
        let radius = 3.0 + (k % 3) as f64;
        out.push(Box::new(move |s, y| {
            let d2: f64 = (0..m).map(|i| (coord(s, y, i) - center[i]).powi(2)).sum();
            (1.0 - d2 / (radius * radius)).max(0.0).powi(2)
        }));
    }
    for k in 0..7 {
        let center: Vec<f64> = (0..m).map(|i| 0.3 * ((k * (i + 1)) % 5) as f64 - 0.6).collect();
        out.push(Box::new(move |s, y| {
            let d2: f64 = (0..m).map(|i| (coord(s, y, i) - center[i]).powi(2)).sum();
            (0.5 * d2.sqrt()).min(1.0)
        }));
    }
    out
}

const VAGUE_TOL: f64 = 1e-2;
const VAGUE_SAMPLES: usize = 4096;
const VAGUE_SEED: u64 = 0x7a6e_5eed;

/// Convergence of Π_j to the point mass at `(0, 0)` against [`vague_battery`].
///
/// Evidence holds `sup_g |∫ g dΠ_j − g(0, 0)|` at each diagnostic index and,
/// when the dilation marginal has a distribution function, the masses
/// `ν_j((-1, 2^{-k}])` for `k = 0..=10`. Verdict: pass iff the sup at the
/// horizon is below `1e-2` and below the sup at `j = 1`.
pub fn check_vague_convergence(family: &FamilySpec) -> ConditionReport {
    let n = family.dimension;
    let battery = vague_battery(n);
    let zero = vec![0.0; n];
    let mut rows = Vec::new();
    let mut sups: Vec<(u32, f64)> = Vec::new();
    let mut complete = true;
    let mut notes = Vec::new();
    for j in diagnostic_indices(family.horizon) {
        let spec = match family.member(j) {
            Ok(s) => s,
            Err(e) => {
                complete = false;
                notes.push(format!("j={j}: {e}"));
                continue;
            }
        };
        let mut sup = 0.0f64;
        let mut failed = false;
        for g in &battery {
            let g0 = g(0.0, &zero);
            match spec.expectation(|s, y| g(s, y) - g0, VAGUE_SAMPLES, VAGUE_SEED) {
                Ok(e) => sup = sup.max(e.value.abs()),
                Err(e) => {
                    failed = true;
                    notes.push(format!("j={j}: {e}"));
                    break;
                }
            }
        }
        if failed {
            complete = false;
            continue;
        }
        sups.push((j, sup));
        rows.push(Evidence::new("sup_gap", sup).at(j).bounded_by(VAGUE_TOL));
        for k in 0..=10 {
            let b = 2f64.powi(-k);
            let mass = match spec.variance_cdf(b) {
                Some(m) => m,
                None => match spec.expectation(|s, _| f64::from(s <= b), VAGUE_SAMPLES, VAGUE_SEED) {
                    Ok(e) => e.value,
                    Err(_) => continue,
                },
            };
            rows.push(Evidence::new(format!("nu_mass_le_2^-{k}"), mass).at(j));
        }
    }
    let last = sups.last().copied();
    let first = sups.first().copied();
    let ok = match (first, last) {
        (Some((j1, s1)), Some((jl, sl))) => jl == family.horizon && sl < VAGUE_TOL && (sl < s1 || j1 == jl),
        _ => false,
    };
    let mut r = ConditionReport::new(
        "vague-convergence",
        Verdict::from_bool(ok),
        last.map_or(f64::NAN, |l| l.1),
    )
    .with_tolerance(VAGUE_TOL);
    r.complete = complete;
    rows.into_iter().for_each(|e| r.push(e));
    notes.into_iter().for_each(|m| r.note(m));
    if !complete {
        r.note("incomplete: some members could not be generated");
    }
    r
}

/// Per-index measurements behind the density hypotheses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMeasurement {
    pub j: u32,
    /// Smallest `r` with `Π_j([0, r] × B(0, r)) ≥ 1 − 1e-12`.
    pub r_hat: f64,
    /// Grid supremum of `γ_j`.
    pub sup: f64,
    /// `sup · r̂^{n+1}`.
    pub a_j: f64,
}

fn measure_one(spec: &JointDistributionSpec, j: u32) -> Result<DensityMeasurement> {
    let n = spec.dimension();
    let d = spec
        .density()
        .ok_or_else(|| Error::UnsupportedCheck(format!("density hypotheses need a density form (j={j})")))?;
    let (sm, yr) = d.support();
    let r0 = sm.max(yr);
    let total = d.mass_inside(r0, n)?;
    let target = total * (1.0 - 1e-12);
    let (mut lo, mut hi) = (0.0, r0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if d.mass_inside(mid, n)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * r0 {
            break;
        }
    }
    let sup = d.grid_max(n);
    Ok(DensityMeasurement {
        j,
        r_hat: hi,
        sup,
        a_j: sup * hi.powi(n as i32 + 1),
    })
}

/// [`DensityMeasurement`] for every `j ≤ horizon`.
pub fn measure_density_hypotheses(family: &FamilySpec) -> Result<Vec<DensityMeasurement>> {
    use rayon::prelude::*;
    (1..=family.horizon)
        .into_par_iter()
        .map(|j| measure_one(&family.member(j)?, j))
        .collect()
}

/// Checks `supp γ_j ⊆ [0, r_j] × B(0, r_j)` and `‖γ_j‖_∞ ≤ A / r_j^{n+1}`.
///
/// `Â = max_j ‖γ_j‖_∞ r̂_j^{n+1}`. Fails when `Â` is not finite or when the
/// largest `A_j` over the upper half of the indices exceeds 1.5 times the
/// largest over the lower half; the witness is the index of the maximum.
pub fn check_density_hypotheses(family: &FamilySpec) -> Result<ConditionReport> {
    let ms = measure_density_hypotheses(family)?;
    Ok(density_report(&ms))
}

pub(crate) fn density_report(ms: &[DensityMeasurement]) -> ConditionReport {
    let (a_hat, arg) = ms
        .iter()
        .fold((0.0f64, 0u32), |(m, a), x| if x.a_j > m || x.a_j.is_nan() { (x.a_j, x.j) } else { (m, a) });
    let half = ms.len().div_ceil(2);
    let lower = ms[..half].iter().map(|m| m.a_j).fold(0.0, f64::max);
    let upper = ms[half..].iter().map(|m| m.a_j).fold(0.0, f64::max);
    let grows = ms.len() > 1 && upper > 1.5 * lower;
    let ok = a_hat.is_finite() && !grows;
    let mut r = ConditionReport::new("density-hypotheses", Verdict::from_bool(ok), a_hat);
    for m in ms {
        r.push(Evidence::new("r_hat", m.r_hat).at(m.j));
        r.push(Evidence::new("sup_gamma", m.sup).at(m.j));
        r.push(Evidence::new("a_j", m.a_j).at(m.j));
    }
    if !ok {
        r = r.with_witness(f64::from(arg));
        r.note(format!("sup γ_j · r̂_j^(n+1) keeps growing; largest at j={arg}"));
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_variance(n: usize, j: u32) -> JointDistributionSpec {
        FamilySpec::new(FamilyKind::UniformVariance { s_max: 1.0 }, n, 64)
            .unwrap()
            .member(j)
            .unwrap()
    }

    #[test]
    fn point_mass_samples_are_constant() {
        let p = JointDistributionSpec::point(1.0, vec![0.0]).unwrap();
        let s = p.sample(100, 3).unwrap();
        for i in 0..s.len() {
            assert_eq!(s.get(i), (1.0, &[0.0][..]));
        }
    }

    #[test]
    fn uniform_variance_mean() {
        let spec = uniform_variance(1, 4);
        let e = spec.expectation(|s, _| s, 100_000, 9).unwrap();
        assert!(e.agrees_with(0.125, 3.0, 0.0), "{e:?}");
    }

    #[test]
    fn box_density_half_mass() {
        let spec = JointDistributionSpec::new(
            JointForm::Density(DensitySpec::new(DensityKind::UniformBox { s_max: 1.0, y_radius: 0.5 })),
            1,
        )
        .unwrap();
        assert_eq!(spec.density().unwrap().eval(0.3, &[0.2]), 1.0);
        let e = spec.expectation(|s, _| f64::from(s <= 0.5), 100_000, 4).unwrap();
        assert!(e.agrees_with(0.5, 3.0, 0.0), "{e:?}");
    }

    #[test]
    fn samples_are_reproducible_and_seed_independent() {
        let spec = JointDistributionSpec::new(
            JointForm::Density(DensitySpec::new(DensityKind::Tent { alpha: 1.0, beta: 1.0 })),
            1,
        )
        .unwrap();
        let a = spec.sample(100_000, 1).unwrap();
        assert_eq!(a, spec.sample(100_000, 1).unwrap());
        let b = spec.sample(100_000, 2).unwrap();
        let ks = |x: &[f64], y: &[f64]| {
            let (mut x, mut y) = (x.to_vec(), y.to_vec());
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            let (mut i, mut k, mut d) = (0, 0, 0.0f64);
            while i < x.len() && k < y.len() {
                if x[i] <= y[k] {
                    i += 1;
                } else {
                    k += 1;
                }
                d = d.max((i as f64 / x.len() as f64 - k as f64 / y.len() as f64).abs());
            }
            d
        };
        assert!(ks(&a.s, &b.s) < 0.02);
        assert!(ks(&a.y, &b.y) < 0.02);
    }

    #[test]
    fn density_masses_are_one() {
        for n in [1, 2, 3] {
            for kind in [
                DensityKind::UniformBox { s_max: 0.7, y_radius: 1.3 },
                DensityKind::Tent { alpha: 2.0, beta: 0.5 },
            ] {
                let spec = JointDistributionSpec::new(
                    JointForm::Density(DensitySpec { kind, dilation: 3.0 }),
                    n,
                )
                .unwrap();
                let m = spec.total_mass().unwrap();
                assert!((m - 1.0).abs() < 1e-9, "n={n}: {m}");
            }
        }
    }

    #[test]
    fn unbounded_custom_density_has_no_sampler() {
        let spec = JointDistributionSpec::new(
            JointForm::Density(DensitySpec::new(DensityKind::Custom {
                name: "singular".into(),
                density: Arc::new(|s: f64, _: &[f64]| if s > 0.0 { 0.25 / s.sqrt() } else { f64::INFINITY }),
                s_max: 1.0,
                y_radius: 1.0,
                declared_max: None,
                radial_in_mean: true,
            })),
            1,
        )
        .unwrap();
        assert!(matches!(spec.sample(10, 0), Err(Error::SamplerSetup { .. })));
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mixed = JointForm::Atoms(vec![
            Atom { s: 0.0, y: vec![0.0], weight: 0.5 },
            Atom { s: 1.0, y: vec![0.0], weight: 0.5 },
        ]);
        assert!(JointDistributionSpec::new(mixed, 1).is_err());
        let light = JointForm::Atoms(vec![Atom { s: 1.0, y: vec![0.0], weight: 0.9 }]);
        assert!(matches!(JointDistributionSpec::new(light, 1), Err(Error::MassMismatch(_))));
        let fam = FamilySpec::new(FamilyKind::UniformVariance { s_max: 1.0 }, 1, 8).unwrap();
        assert!(matches!(fam.member(9), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn self_similar_densities_match_exactly_at_powers_of_two() {
        for n in [1, 2] {
            for kind in [
                FamilyKind::UniformBox { s_max: 1.0, y_radius: 1.0, s_rate: 1.0, y_rate: 1.0 },
                FamilyKind::Tent { alpha: 1.0, beta: 2.0 },
            ] {
                let fam = FamilySpec::new(kind, n, 64).unwrap();
                for j in [2, 4, 8, 64] {
                    assert_eq!(fam.self_similarity_defect(j, 1000, 5).unwrap(), 0.0);
                }
                assert!(fam.self_similarity_defect(3, 1000, 5).unwrap() < 1e-15);
            }
        }
    }

    #[test]
    fn vague_convergence_examples() {
        let fam = FamilySpec::new(FamilyKind::UniformVariance { s_max: 1.0 }, 1, 64).unwrap();
        let r = check_vague_convergence(&fam);
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.to_lines());
        for e in r.evidence.iter().filter(|e| e.label.starts_with("nu_mass")) {
            let k: i32 = e.label.rsplit('-').next().unwrap().parse().unwrap();
            let expected = (f64::from(e.j.unwrap()) * 2f64.powi(-k)).min(1.0);
            assert!((e.value - expected).abs() < 1e-15);
        }

        let coupled = FamilySpec::new(FamilyKind::Coupled { s_max: 1.0, c: 1.0 }, 2, 64).unwrap();
        assert_eq!(check_vague_convergence(&coupled).verdict, Verdict::Pass);

        let base = uniform_variance(1, 1);
        let constant = FamilySpec::new(FamilyKind::Constant(Box::new(base)), 1, 64).unwrap();
        let r = check_vague_convergence(&constant);
        assert_eq!(r.verdict, Verdict::Fail);
        let sups: Vec<f64> = r.evidence.iter().filter(|e| e.label == "sup_gap").map(|e| e.value).collect();
        assert!(sups.iter().all(|&s| (s - sups[0]).abs() < 0.02 && s > 0.05));
    }

    #[test]
    fn failing_generator_marks_report_incomplete() {
        let gen: Generator = Arc::new(|j| {
            if j == 4 {
                Err(invalid("boom"))
            } else {
                JointDistributionSpec::point(1.0 / f64::from(j), vec![0.0])
            }
        });
        let fam = FamilySpec::new(
            FamilyKind::Custom { name: "flaky".into(), generator: gen, self_similar: false },
            1,
            8,
        )
        .unwrap();
        let r = check_vague_convergence(&fam);
        assert!(!r.complete);
    }

    #[test]
    fn density_hypotheses_self_similar() {
        // γ_j = j² γ_1(js, jy) with γ_1 = 1/2 on [0,1]×[-1,1].
        let fam = FamilySpec::new(
            FamilyKind::UniformBox { s_max: 1.0, y_radius: 1.0, s_rate: 1.0, y_rate: 1.0 },
            1,
            16,
        )
        .unwrap();
        let ms = measure_density_hypotheses(&fam).unwrap();
        for m in &ms {
            let j = f64::from(m.j);
            assert!((m.r_hat * j - 1.0).abs() < 1e-9, "{m:?}");
            assert!((m.sup - 0.5 * j * j).abs() < 1e-9 * j * j);
        }
        let r = check_density_hypotheses(&fam).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.value - 0.5).abs() < 1e-8);
    }

    #[test]
    fn density_hypotheses_catch_growth() {
        // s-support 1/j², y-support 1/j: sup = j³/2 while r̂ = 1/j.
        let fam = FamilySpec::new(
            FamilyKind::UniformBox { s_max: 1.0, y_radius: 1.0, s_rate: 2.0, y_rate: 1.0 },
            1,
            16,
        )
        .unwrap();
        let r = check_density_hypotheses(&fam).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witness, Some(16.0));
        let uv = FamilySpec::new(FamilyKind::UniformVariance { s_max: 1.0 }, 1, 4).unwrap();
        assert!(matches!(check_density_hypotheses(&uv), Err(Error::UnsupportedCheck(_))));
    }

    #[test]
    fn power_singular_law() {
        let law = MeanLaw::PowerSingular { exponent: 0.5, length: 1.0 };
        for q in [0.0, 0.1, 0.5, 0.9] {
            let y = law.quantile_1d(q);
            assert!((law.cdf_1d(y) - q).abs() < 1e-14);
        }
        // density ½(1-y)^{-1/2}
        assert!((law.density_1d(0.75).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mass_is_conserved_by_dilation() {
        let base = JointDistributionSpec::new(
            JointForm::Atoms(vec![
                Atom { s: 1.0, y: vec![0.5, 0.0], weight: 0.25 },
                Atom { s: 2.0, y: vec![0.0, -1.0], weight: 0.75 },
            ]),
            2,
        )
        .unwrap();
        for j in [1.0, 2.5, 64.0] {
            assert!((base.dilate(j).total_mass().unwrap() - 1.0).abs() < 1e-15);
        }
    }
}
