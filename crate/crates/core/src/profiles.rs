//! Radial profiles φ: (0, ∞) → [0, ∞] generating kernels `K(x) = φ(|x|)`.
//!
//! A [`Profile`] is immutable; [`Profile::normalize`] returns a rescaled copy
//! with `ω_n ∫₀^∞ ρ^{n-1} φ(ρ) dρ = 1`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use bitflags::bitflags;
use rand::Rng;
use statrs::function::erf::{erf, erf_inv};

use crate::error::{invalid, Error, Result};
use crate::mc::{open_unit, stream_rng, Estimate, MeanAccumulator};
use crate::quad::{integrate, integrate_with_breaks, Tolerance};
use crate::report::{ConditionReport, Evidence, Verdict};

/// `∫₀^u ∫₀^v ψ(|z|) dz` (oriented) for a radial density with planar radial
/// mass `mass(t) = ∫₀^t ρ ψ(ρ) dρ`, by polar coordinates: the angle splits
/// where the ray leaves the rectangle through its far side. `radii` are
/// where `ψ` changes character, used as angular breaks.
pub fn quadrant_from_radial(u: f64, v: f64, radii: &[f64], mass: impl Fn(f64) -> f64) -> f64 {
    let sign = u.signum() * v.signum();
    let (u, v) = (u.abs(), v.abs());
    if u == 0.0 || v == 0.0 {
        return 0.0;
    }
    let tol = Tolerance::new(1e-14, 1e-12);
    let cut = v.atan2(u);
    let mut total = 0.0;
    if cut > 0.0 {
        // ρ = u / cos θ on [0, cut]
        let br: Vec<f64> = radii.iter().filter(|&&b| b > u).map(|&b| (u / b).acos()).collect();
        total += integrate_with_breaks(|th| mass(u / th.cos()), 0.0, cut, &br, tol).value;
    }
    if cut < FRAC_PI_2 {
        // ρ = v / sin θ on [cut, π/2]
        let br: Vec<f64> = radii.iter().filter(|&&b| b > v).map(|&b| (v / b).asin()).collect();
        total += integrate_with_breaks(|th| mass(v / th.sin()), cut, FRAC_PI_2, &br, tol).value;
    }
    sign * total
}

/// Area of `B(0, r₁) ∩ B(d e₁, r₂)`.
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        return PI * r1.min(r2).powi(2);
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0).sqrt();
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k
}

/// Surface measure ω_n of the unit sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    assert!(n >= 1, "dimension must be at least 1");
    let (mut w, mut k) = if n % 2 == 1 {
        (2.0, 1)
    } else {
        (2.0 * std::f64::consts::PI, 2)
    };
    while k < n {
        w *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    w
}

/// Volume V_n = ω_n / n of the unit ball in ℝⁿ.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

bitflags! {
    /// Analytic properties a profile declares about itself.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
    pub struct ProfileFlags: u8 {
        const NORMALIZED = 1;
        const C1 = 1 << 1;
        const BOUNDED = 1 << 2;
        const NONINCREASING = 1 << 3;
        const FINITE_NTH_MOMENT = 1 << 4;
    }
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied profile. `flags` must not include `NORMALIZED`; that flag
/// is only granted by [`Profile::normalize`].
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub value: RadialFn,
    pub derivative: Option<RadialFn>,
    /// Radii where φ or φ′ jumps.
    pub breakpoints: Vec<f64>,
    /// φ vanishes on `[support, ∞)` when present.
    pub support: Option<f64>,
    pub flags: ProfileFlags,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile")
            .field("name", &self.name)
            .field("has_derivative", &self.derivative.is_some())
            .field("breakpoints", &self.breakpoints)
            .field("support", &self.support)
            .field("flags", &self.flags)
            .finish()
    }
}

/// Shapes before scaling.
#[derive(Clone, Debug)]
pub enum ProfileKind {
    /// `1_(0,1)`.
    Indicator,
    /// `α 1_(0,β)`.
    ScaledIndicator { alpha: f64, beta: f64 },
    /// `(1+ρ)^{-(n+δ)}`.
    PowerTail { delta: f64 },
    /// `e^{-ρ²}`.
    Gaussian,
    /// `e^{-ρ}`.
    Exponential,
    /// `(1+ρ²)^{-(n+1)/2}`, heavy tailed: infinite n-th moment.
    PoissonTail,
    /// `ρ^{-1/2} 1_(0,1)`, unbounded at the origin.
    OriginSingular,
    Custom(CustomProfile),
}

impl ProfileKind {
    pub fn name(&self) -> &str {
        match self {
            ProfileKind::Indicator => "indicator",
            ProfileKind::ScaledIndicator { .. } => "scaled-indicator",
            ProfileKind::PowerTail { .. } => "power-tail",
            ProfileKind::Gaussian => "gaussian",
            ProfileKind::Exponential => "exponential",
            ProfileKind::PoissonTail => "poisson-tail",
            ProfileKind::OriginSingular => "origin-singular",
            ProfileKind::Custom(c) => &c.name,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Profile {
    dimension: usize,
    kind: ProfileKind,
    scale: f64,
    flags: ProfileFlags,
}

/// Result of a radial integral `∫₀^∞ ρ^p φ(ρ) dρ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialIntegral {
    pub value: f64,
    pub error: f64,
    /// Quadrature runs on `(0, cutoff]`.
    pub cutoff: f64,
    /// Analytic or fitted contribution of `(cutoff, ∞)`.
    pub tail: f64,
    /// `κ` with the contribution of `(u, ∞)` equal to `tail (cutoff/u)^κ`
    /// for `u ≥ cutoff`; zero when there is no tail.
    pub tail_decay: f64,
}

const GRID_PER_DECADE: usize = 512;
const GRID_LOW_EXP: i32 = -6;
const GRID_HIGH_EXP: i32 = 6;
const GROWTH_FACTOR: f64 = 1.5;

/// `ρ_k = 10^{-6 + k/512}` for `k = 0..=6144`.
pub fn log_grid() -> Vec<f64> {
    let decades = (GRID_HIGH_EXP - GRID_LOW_EXP) as usize;
    (0..=decades * GRID_PER_DECADE)
        .map(|k| 10f64.powf(GRID_LOW_EXP as f64 + k as f64 / GRID_PER_DECADE as f64))
        .collect()
}

fn decade_of(k: usize) -> usize {
    (k / GRID_PER_DECADE).min((GRID_HIGH_EXP - GRID_LOW_EXP) as usize - 1)
}

/// Per-decade maxima of `values` over [`log_grid`] and the argmax index of each.
fn decade_maxima(values: &[f64]) -> Vec<(f64, usize)> {
    let decades = (GRID_HIGH_EXP - GRID_LOW_EXP) as usize;
    let mut out = vec![(f64::NEG_INFINITY, 0usize); decades];
    for (k, &v) in values.iter().enumerate() {
        let d = decade_of(k);
        if v > out[d].0 || v.is_nan() {
            out[d] = (v, k);
        }
    }
    out
}

fn grows(outer: f64, inner: f64) -> bool {
    if !outer.is_finite() {
        return true;
    }
    outer > GROWTH_FACTOR * inner && outer > 0.0
}

impl Profile {
    pub fn new(kind: ProfileKind, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let n = dimension as f64;
        let base = ProfileFlags::BOUNDED | ProfileFlags::NONINCREASING;
        let flags = match &kind {
            ProfileKind::Indicator => base | ProfileFlags::FINITE_NTH_MOMENT,
            ProfileKind::ScaledIndicator { alpha, beta } => {
                if !(alpha.is_finite() && *alpha > 0.0 && beta.is_finite() && *beta > 0.0) {
                    return Err(invalid(format!(
                        "scaled-indicator needs alpha > 0 and beta > 0, got {alpha}, {beta}"
                    )));
                }
                base | ProfileFlags::FINITE_NTH_MOMENT
            }
            ProfileKind::PowerTail { delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    return Err(invalid(format!("power-tail needs delta > 0, got {delta}")));
                }
                let mut f = base | ProfileFlags::C1;
                if *delta > n {
                    f |= ProfileFlags::FINITE_NTH_MOMENT;
                }
                f
            }
            ProfileKind::Gaussian | ProfileKind::Exponential => {
                base | ProfileFlags::C1 | ProfileFlags::FINITE_NTH_MOMENT
            }
            ProfileKind::PoissonTail => base | ProfileFlags::C1,
            ProfileKind::OriginSingular => {
                ProfileFlags::NONINCREASING | ProfileFlags::FINITE_NTH_MOMENT
            }
            ProfileKind::Custom(c) => {
                if c.breakpoints.iter().any(|&b| !(b.is_finite() && b > 0.0)) {
                    return Err(invalid("custom breakpoints must be positive and finite"));
                }
                if let Some(s) = c.support {
                    if !(s.is_finite() && s > 0.0) {
                        return Err(invalid("custom support radius must be positive"));
                    }
                }
                if c.flags.contains(ProfileFlags::C1) != c.derivative.is_some() {
                    return Err(invalid("custom profile declares C1 iff it supplies a derivative"));
                }
                c.flags - ProfileFlags::NORMALIZED
            }
        };
        Ok(Self {
            dimension,
            kind,
            scale: 1.0,
            flags,
        })
    }

    /// Shorthand for `Profile::new(kind, n)?.normalize()`.
    pub fn normalized(kind: ProfileKind, dimension: usize) -> Result<Self> {
        Self::new(kind, dimension)?.normalize()
    }

    /// The same shape multiplied by `c > 0`; clears `NORMALIZED`.
    pub fn with_scale(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid(format!("scale must be positive, got {c}")));
        }
        let mut out = self.clone();
        out.scale = self.scale * c;
        out.flags -= ProfileFlags::NORMALIZED;
        Ok(out)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        self.kind.name()
    }

    /// Multiplier applied to the kind's shape.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn flags(&self) -> ProfileFlags {
        self.flags
    }

    pub fn declares(&self, flag: ProfileFlags) -> bool {
        self.flags.contains(flag)
    }

    fn shape(&self, rho: f64) -> f64 {
        let r = rho.abs();
        let n = self.dimension as f64;
        match &self.kind {
            ProfileKind::Indicator => f64::from(r < 1.0),
            ProfileKind::ScaledIndicator { alpha, beta } => {
                if r < *beta {
                    *alpha
                } else {
                    0.0
                }
            }
            ProfileKind::PowerTail { delta } => (1.0 + r).powf(-(n + delta)),
            ProfileKind::Gaussian => (-r * r).exp(),
            ProfileKind::Exponential => (-r).exp(),
            ProfileKind::PoissonTail => (1.0 + r * r).powf(-(n + 1.0) / 2.0),
            ProfileKind::OriginSingular => {
                if r < 1.0 {
                    r.sqrt().recip()
                } else {
                    0.0
                }
            }
            ProfileKind::Custom(c) => (c.value)(r),
        }
    }

    /// φ(ρ); the argument is taken in absolute value.
    pub fn evaluate(&self, rho: f64) -> f64 {
        self.scale * self.shape(rho)
    }

    pub fn has_derivative(&self) -> bool {
        self.declares(ProfileFlags::C1)
    }

    /// φ′(ρ) when the profile is C¹.
    pub fn derivative(&self, rho: f64) -> Option<f64> {
        let r = rho.abs();
        let n = self.dimension as f64;
        let d = match &self.kind {
            ProfileKind::PowerTail { delta } => -(n + delta) * (1.0 + r).powf(-(n + delta + 1.0)),
            ProfileKind::Gaussian => -2.0 * r * (-r * r).exp(),
            ProfileKind::Exponential => -(-r).exp(),
            ProfileKind::PoissonTail => -(n + 1.0) * r * (1.0 + r * r).powf(-(n + 3.0) / 2.0),
            ProfileKind::Custom(c) => (c.derivative.as_ref()?)(r),
            _ => return None,
        };
        Some(self.scale * d)
    }

    /// Radii where φ has a jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ProfileKind::Indicator | ProfileKind::OriginSingular => vec![1.0],
            ProfileKind::ScaledIndicator { beta, .. } => vec![*beta],
            ProfileKind::Custom(c) => {
                let mut b = c.breakpoints.clone();
                b.extend(c.support);
                b.sort_by(f64::total_cmp);
                b.dedup();
                b
            }
            _ => Vec::new(),
        }
    }

    /// φ vanishes on `[R, ∞)`.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            ProfileKind::Indicator | ProfileKind::OriginSingular => Some(1.0),
            ProfileKind::ScaledIndicator { beta, .. } => Some(*beta),
            ProfileKind::Custom(c) => c.support,
            _ => None,
        }
    }

    /// `(α, β)` with `φ = α 1_(0,β)` for indicator kinds, including the scale.
    pub fn indicator_parameters(&self) -> Option<(f64, f64)> {
        match &self.kind {
            ProfileKind::Indicator => Some((self.scale, 1.0)),
            ProfileKind::ScaledIndicator { alpha, beta } => Some((self.scale * alpha, *beta)),
            _ => None,
        }
    }

    /// `P(t) = ∫₀^t φ(ρ) dρ`, closed form where available.
    pub fn radial_primitive(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let n = self.dimension as f64;
        let shape = match &self.kind {
            ProfileKind::Indicator => t.min(1.0),
            ProfileKind::ScaledIndicator { alpha, beta } => alpha * t.min(*beta),
            ProfileKind::PowerTail { delta } => {
                let q = n + delta;
                -(-(q - 1.0) * t.ln_1p()).exp_m1() / (q - 1.0)
            }
            ProfileKind::Gaussian => std::f64::consts::PI.sqrt() / 2.0 * erf(t),
            ProfileKind::Exponential => -(-t).exp_m1(),
            ProfileKind::PoissonTail if self.dimension == 1 => t.atan(),
            ProfileKind::OriginSingular => 2.0 * t.min(1.0).sqrt(),
            _ => {
                if t.is_infinite() {
                    return self
                        .radial_integral(0.0)
                        .map(|r| r.value)
                        .unwrap_or(f64::INFINITY);
                }
                return self.numeric_primitive(t);
            }
        };
        self.scale * shape
    }

    fn numeric_primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let tol = Tolerance::new(1e-15, 1e-12);
        let b1 = self
            .breakpoints()
            .first()
            .copied()
            .unwrap_or(1.0)
            .min(1.0)
            .min(t);
        let head = integrate(|u| self.evaluate(u * u) * 2.0 * u, 0.0, b1.sqrt(), tol).value;
        let body = integrate_with_breaks(|r| self.evaluate(r), b1, t, &self.breakpoints(), tol).value;
        head + body
    }

    /// `∫_{-∞}^{u} φ(|x|) dx` in one dimension.
    pub fn cdf_1d(&self, u: f64) -> f64 {
        let total = self.radial_primitive(f64::INFINITY);
        if u >= 0.0 {
            total + self.radial_primitive(u)
        } else {
            total - self.radial_primitive(-u)
        }
    }

    /// `∫₀^t ρ φ(ρ) dρ`, the planar mass of `B(0, t)` divided by `2π`.
    /// Closed form for the built-in kinds in the plane.
    pub fn planar_radial_mass(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let shape = match (&self.kind, self.dimension) {
            (ProfileKind::Indicator, _) => 0.5 * t.min(1.0).powi(2),
            (ProfileKind::ScaledIndicator { alpha, beta }, _) => 0.5 * alpha * t.min(*beta).powi(2),
            (ProfileKind::PowerTail { delta }, 2) => {
                // ∫ (1+ρ)^{1−q} − (1+ρ)^{−q}, q = 2 + δ
                let q = 2.0 + delta;
                let l = t.ln_1p();
                -(-(q - 2.0) * l).exp_m1() / (q - 2.0) + ((1.0 - q) * l).exp_m1() / (q - 1.0)
            }
            (ProfileKind::Gaussian, _) => -0.5 * (-t * t).exp_m1(),
            (ProfileKind::Exponential, _) if t.is_infinite() => 1.0,
            (ProfileKind::Exponential, _) => -(-t).exp_m1() - t * (-t).exp(),
            (ProfileKind::PoissonTail, 2) => 1.0 - (1.0 + t * t).sqrt().recip(),
            (ProfileKind::OriginSingular, _) => 2.0 / 3.0 * t.min(1.0).powf(1.5),
            _ => {
                let tol = Tolerance::new(1e-15, 1e-12);
                if t.is_infinite() {
                    return self.radial_integral(1.0).map(|r| r.value).unwrap_or(f64::INFINITY);
                }
                return integrate_with_breaks(|r| r * self.evaluate(r), 0.0, t, &self.breakpoints(), tol).value;
            }
        };
        self.scale * shape
    }

    /// `∫₀^u ∫₀^v φ(|z|) dz₂ dz₁` as an oriented integral in the plane, so
    /// rectangle masses are the usual four-corner differences. Infinite
    /// arguments are allowed.
    pub fn quadrant_mass(&self, u: f64, v: f64) -> f64 {
        let mut radii = self.breakpoints();
        radii.extend([0.5, 1.0, 2.0]);
        quadrant_from_radial(u, v, &radii, |t| self.planar_radial_mass(t))
    }

    /// `(2π)^{-1} ∫_{B(0,t)} φ(|z − c e₁|) dz`: the planar radial mass of φ
    /// averaged over the circle of radius `c`.
    pub fn circle_averaged_radial_mass(&self, c: f64, t: f64) -> f64 {
        if c == 0.0 {
            return self.planar_radial_mass(t);
        }
        if t.is_infinite() {
            return self.planar_radial_mass(t);
        }
        let t = t.max(0.0);
        if let Some((alpha, beta)) = self.indicator_parameters() {
            return alpha * lens_area(t, beta, c) / (2.0 * PI);
        }
        let full = if t > c { self.planar_radial_mass(t - c) } else { 0.0 };
        // ρ on the partial annulus |t − c| < ρ < t + c, as ρ = m − w cos θ
        let (lo, hi) = ((t - c).abs(), t + c);
        let (m, w) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        if w == 0.0 {
            return full;
        }
        let br: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .filter(|b| *b > lo && *b < hi)
            .map(|b| ((m - b) / w).clamp(-1.0, 1.0).acos())
            .collect();
        let arc = |rho: f64| {
            let kappa = (c * c + rho * rho - t * t) / (2.0 * c * rho);
            2.0 * kappa.clamp(-1.0, 1.0).acos()
        };
        let partial = integrate_with_breaks(
            |th| {
                let rho = m - w * th.cos();
                rho * self.evaluate(rho) * arc(rho) * w * th.sin()
            },
            0.0,
            PI,
            &br,
            Tolerance::new(1e-15, 1e-12),
        )
        .value;
        full + partial / (2.0 * PI)
    }

    /// `∫₀^∞ ρ^p φ(ρ) dρ` by adaptive quadrature on `(0, R]` plus a tail.
    ///
    /// `R` is the support radius if there is one, otherwise the first radius
    /// `≥ 1` from which `ρ^{max(2n, p+1)} φ(ρ)` stays below `1e-14` of its peak;
    /// the tail beyond `R` uses a power law fitted over the last decade.
    pub fn radial_integral(&self, power: f64) -> Result<RadialIntegral> {
        let g = |r: f64| {
            if power == 0.0 {
                self.evaluate(r)
            } else {
                r.powf(power) * self.evaluate(r)
            }
        };
        let scan: Vec<f64> = (-48..=48).map(|k| 10f64.powf(k as f64 / 8.0)).collect();
        let hint: f64 = scan
            .iter()
            .map(|&r| g(r) * r)
            .filter(|v| v.is_finite())
            .sum::<f64>()
            * std::f64::consts::LN_10
            / 8.0;

        let near = (g(1e-12), g(1e-10));
        if near.0 > 0.0 && near.1 > 0.0 {
            let slope = (near.1 / near.0).log10() / 2.0;
            if !slope.is_finite() || slope <= -0.98 {
                return Err(Error::NonIntegrable(format!(
                    "ρ^{power}·φ(ρ) behaves like ρ^{slope:.3} at the origin"
                )));
            }
        }
        if hint == 0.0 && g(0.5) == 0.0 && g(1e-3) == 0.0 {
            return Ok(RadialIntegral {
                value: 0.0,
                error: 0.0,
                cutoff: 0.0,
                tail: 0.0,
                tail_decay: 0.0,
            });
        }

        let (cutoff, tail, tail_decay) = match self.support_radius() {
            Some(r) => (r, 0.0, 0.0),
            None => self.tail_split(power, &g)?,
        };

        let tol = Tolerance::new(1e-15 * hint.max(f64::MIN_POSITIVE), 1e-13);
        let breaks: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .filter(|&b| b < cutoff)
            .collect();
        let b1 = breaks.first().copied().unwrap_or(1.0).min(1.0).min(cutoff);
        let head = integrate(|u| g(u * u) * 2.0 * u, 0.0, b1.sqrt(), tol);
        let c = breaks.last().copied().unwrap_or(0.0).max(1.0).max(b1).min(cutoff);
        let body = integrate_with_breaks(&g, b1, c, &breaks, tol);
        let far = if cutoff > c {
            integrate(
                |v| {
                    let r = v.exp();
                    g(r) * r
                },
                c.ln(),
                cutoff.ln(),
                tol,
            )
        } else {
            crate::quad::Integral {
                value: 0.0,
                error: 0.0,
                converged: true,
            }
        };
        let value = head.value + body.value + far.value + tail;
        if !value.is_finite() {
            return Err(Error::NonIntegrable(format!(
                "radial integral of ρ^{power}·φ(ρ) is not finite"
            )));
        }
        Ok(RadialIntegral {
            value,
            error: head.error + body.error + far.error + 0.01 * tail,
            cutoff,
            tail,
            tail_decay,
        })
    }

    fn tail_split(&self, power: f64, g: &impl Fn(f64) -> f64) -> Result<(f64, f64, f64)> {
        let weight = power.max(2.0 * self.dimension as f64 - 1.0) + 1.0;
        let scan: Vec<f64> = (0..=48).map(|k| 10f64.powf(k as f64 / 8.0)).collect();
        let h: Vec<f64> = scan.iter().map(|&r| r.powf(weight) * self.evaluate(r)).collect();
        let peak = (-48..=48)
            .map(|k| {
                let r = 10f64.powf(k as f64 / 8.0);
                r.powf(weight) * self.evaluate(r)
            })
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        let threshold = 1e-14 * peak.max(f64::MIN_POSITIVE);
        let mut first_small = None;
        for k in (0..h.len()).rev() {
            if h[k] < threshold {
                first_small = Some(k);
            } else {
                break;
            }
        }
        let fit = |lo: f64, hi: f64| -> Result<(f64, f64)> {
            let (a, b) = (g(lo), g(hi));
            if b == 0.0 {
                return Ok((0.0, 0.0));
            }
            let slope = (b / a).log10() / (hi / lo).log10();
            if !slope.is_finite() || slope >= -1.02 {
                return Err(Error::NonIntegrable(format!(
                    "ρ^{power}·φ(ρ) decays like ρ^{slope:.3} at infinity"
                )));
            }
            Ok((b * hi / (-slope - 1.0), -slope - 1.0))
        };
        let (cutoff, (tail, decay)) = match first_small {
            Some(k) if k >= 8 => (scan[k], fit(scan[k - 8], scan[k])?),
            Some(_) => (10.0, fit(1.0, 10.0)?),
            None => (1e6, fit(1e5, 1e6)?),
        };
        Ok((cutoff, tail, decay))
    }

    /// `∫₀^∞ ρ^p φ(ρ) dρ`.
    pub fn radial_moment(&self, power: f64) -> Result<f64> {
        self.radial_integral(power).map(|r| r.value)
    }

    /// `∫_{ℝⁿ} φ(|x|) dx = ω_n ∫₀^∞ ρ^{n-1} φ(ρ) dρ`.
    pub fn mass(&self) -> Result<f64> {
        Ok(sphere_area(self.dimension) * self.radial_moment(self.dimension as f64 - 1.0)?)
    }

    /// `M_n = ∫_{ℝⁿ} |x|^n φ(|x|) dx`.
    pub fn nth_moment(&self) -> Result<f64> {
        Ok(sphere_area(self.dimension) * self.radial_moment(2.0 * self.dimension as f64 - 1.0)?)
    }

    /// Rescaled copy with unit mass.
    pub fn normalize(&self) -> Result<Self> {
        let m = self.mass()?;
        if m == 0.0 {
            return Err(Error::ZeroProfile);
        }
        let mut out = self.clone();
        out.scale = self.scale / m;
        out.flags |= ProfileFlags::NORMALIZED;
        let check = out.mass()?;
        if (check - 1.0).abs() > 1e-9 {
            return Err(Error::NonIntegrable(format!(
                "mass after normalization is {check}, quadrature did not settle"
            )));
        }
        Ok(out)
    }

    /// Importance-sampled estimate of `∫_{ℝⁿ} φ(|x|) dx`.
    ///
    /// Radii are drawn from an equal mixture of `ρ^{-1/2}/2` on `(0, 1]` and
    /// the shifted Pareto law `½(1+ρ)^{-3/2}` on `(0, ∞)`.
    pub fn monte_carlo_mass(&self, samples: usize, seed: u64) -> Estimate {
        let mut rng = stream_rng(seed, 0x9e37);
        let w_n = sphere_area(self.dimension);
        let p = self.dimension as i32 - 1;
        let mut acc = MeanAccumulator::default();
        for _ in 0..samples {
            let u = open_unit(&mut rng);
            let rho = if rng.random::<bool>() {
                u * u
            } else {
                u.powi(-2) - 1.0
            };
            if rho <= 0.0 {
                acc.push(0.0);
                continue;
            }
            let near = if rho <= 1.0 { 0.5 / rho.sqrt() } else { 0.0 };
            let far = 0.5 * (1.0 + rho).powf(-1.5);
            let q = 0.5 * near + 0.5 * far;
            acc.push(w_n * rho.powi(p) * self.evaluate(rho) / q);
        }
        acc.estimate()
    }

    /// The law of `|Z|` for `Z` with density `φ(|z|)/mass` on ℝⁿ.
    pub fn radial_law(&self) -> Result<RadialLaw> {
        let n = self.dimension;
        let nf = n as f64;
        let closed = match &self.kind {
            ProfileKind::Indicator => Some(ClosedLaw::Power { radius: 1.0, exponent: nf }),
            ProfileKind::ScaledIndicator { beta, .. } => {
                Some(ClosedLaw::Power { radius: *beta, exponent: nf })
            }
            ProfileKind::OriginSingular => Some(ClosedLaw::Power {
                radius: 1.0,
                exponent: nf - 0.5,
            }),
            ProfileKind::Gaussian if n == 1 => Some(ClosedLaw::HalfGaussian),
            ProfileKind::Gaussian if n == 2 => Some(ClosedLaw::Rayleigh),
            ProfileKind::Exponential if n == 1 => Some(ClosedLaw::Exponential),
            ProfileKind::PowerTail { delta } if n == 1 => Some(ClosedLaw::Lomax { delta: *delta }),
            _ => None,
        };
        if let Some(c) = closed {
            return Ok(RadialLaw::Closed(c));
        }
        self.tabulated_law()
    }

    fn tabulated_law(&self) -> Result<RadialLaw> {
        let p = self.dimension as f64 - 1.0;
        let plan = self.radial_integral(p)?;
        if plan.value <= 0.0 {
            return Err(Error::ZeroProfile);
        }
        let g = |r: f64| r.powf(p) * self.evaluate(r);
        let cutoff = plan.cutoff;
        let breaks: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .filter(|&b| b < cutoff)
            .collect();
        let b1 = breaks.first().copied().unwrap_or(1.0).min(1.0).min(cutoff);
        let c = breaks.last().copied().unwrap_or(0.0).max(1.0).max(b1).min(cutoff);

        let mut nodes: Vec<f64> = (0..=1024).map(|i| b1 * (i as f64 / 1024.0).powi(2)).collect();
        let mut edges = vec![b1];
        edges.extend(breaks.iter().copied().filter(|&b| b > b1 && b < c));
        edges.push(c);
        for w in edges.windows(2) {
            for i in 1..=512 {
                nodes.push(w[0] + (w[1] - w[0]) * i as f64 / 512.0);
            }
        }
        if cutoff > c {
            let (lc, lr) = (c.ln(), cutoff.ln());
            for i in 1..=4096 {
                nodes.push((lc + (lr - lc) * i as f64 / 4096.0).exp());
            }
        }
        nodes.dedup();
        let tol = Tolerance::new(1e-18, 1e-10);
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        let mut run = 0.0;
        for w in nodes.windows(2) {
            let piece = if w[1] <= b1 {
                integrate(|u| g(u * u) * 2.0 * u, w[0].sqrt(), w[1].sqrt(), tol).value
            } else {
                integrate(&g, w[0], w[1], tol).value
            };
            run += piece.max(0.0);
            cdf.push(run);
        }
        Ok(RadialLaw::Table { rho: nodes, cdf })
    }

    /// Checks `|φ′(ρ)| ≤ B / ρ^{n+1}` on [`log_grid`].
    ///
    /// `B̂` is the grid supremum of `|φ′(ρ)| ρ^{n+1}`. The check fails when the
    /// maximum over the outermost decade at either end exceeds 1.5 times the
    /// maximum over its neighbour, with the offending radius as witness.
    pub fn check_gradient_bound(&self) -> Result<ConditionReport> {
        if !self.has_derivative() {
            return Err(Error::UnsupportedCheck(format!(
                "gradient bound needs a C1 profile; {} has no derivative",
                self.name()
            )));
        }
        let grid = log_grid();
        let np1 = self.dimension as i32 + 1;
        let vals: Vec<f64> = grid
            .iter()
            .map(|&r| self.derivative(r).unwrap_or(f64::NAN).abs() * r.powi(np1))
            .collect();
        let (b_hat, arg) = vals
            .iter()
            .enumerate()
            .fold((0.0f64, 0usize), |(m, a), (k, &v)| {
                if v > m || v.is_nan() {
                    (v, k)
                } else {
                    (m, a)
                }
            });
        let dec = decade_maxima(&vals);
        let last = dec.len() - 1;
        let (top_grows, bottom_grows) = (
            grows(dec[last].0, dec[last - 1].0),
            grows(dec[0].0, dec[1].0),
        );
        let ok = b_hat.is_finite() && !top_grows && !bottom_grows;
        let mut r = ConditionReport::new("gradient-bound", Verdict::from_bool(ok), b_hat);
        r.push(Evidence::new("b_hat_at_rho", grid[arg]));
        for (d, &(m, _)) in dec.iter().enumerate() {
            r.push(Evidence::new(format!("decade_max@1e{}", GRID_LOW_EXP + d as i32), m));
        }
        if top_grows {
            r = r.with_witness(grid[dec[last].1]);
            r.note("|φ′(ρ)|ρ^{n+1} grows across the top two decades");
        } else if bottom_grows {
            r = r.with_witness(grid[dec[0].1]);
            r.note("|φ′(ρ)|ρ^{n+1} grows across the bottom two decades");
        } else if !b_hat.is_finite() {
            r = r.with_witness(grid[arg]);
        }
        Ok(r)
    }

    /// Boundedness near the origin, monotonicity on [`log_grid`], and the
    /// moment `M_n = ω_n ∫₀^∞ ρ^{2n-1} φ(ρ) dρ`.
    pub fn check_moment_and_monotone(&self) -> ConditionReport {
        let grid = log_grid();
        let vals: Vec<f64> = grid.iter().map(|&r| self.evaluate(r)).collect();
        let dec = decade_maxima(&vals);
        let bounded = !grows(dec[0].0, dec[1].0) && vals.iter().all(|v| v.is_finite());

        let violation = vals
            .windows(2)
            .position(|w| !(w[1] <= w[0] * (1.0 + 1e-12) + f64::MIN_POSITIVE));
        let monotone = violation.is_none();

        let moment = self.nth_moment();
        let (m_n, finite) = match &moment {
            Ok(v) => (*v, v.is_finite()),
            Err(_) => (f64::INFINITY, false),
        };

        let ok = bounded && monotone && finite;
        let mut r = ConditionReport::new("moment-monotone", Verdict::from_bool(ok), m_n);
        r.push(Evidence::new("sup_near_origin", dec[0].0).verdict(Verdict::from_bool(bounded)));
        r.push(
            Evidence::new("first_increase_rho", violation.map_or(0.0, |k| grid[k + 1]))
                .verdict(Verdict::from_bool(monotone)),
        );
        r.push(Evidence::new("nth_moment", m_n).verdict(Verdict::from_bool(finite)));
        if let Some(k) = violation {
            r = r.with_witness(grid[k + 1]);
        } else if !bounded {
            r = r.with_witness(grid[dec[0].1]);
        }
        if let Err(e) = moment {
            r.note(e.to_string());
        }
        r
    }

    /// Verifies every declared flag against the sampled profile.
    pub fn check_declared(&self) -> ConditionReport {
        let grid = log_grid();
        let vals: Vec<f64> = grid.iter().map(|&r| self.evaluate(r)).collect();
        let nonneg = vals.iter().all(|&v| v >= 0.0);
        let mut rows = vec![Evidence::new("nonnegative", 0.0).verdict(Verdict::from_bool(nonneg))];

        let mass = self.mass();
        if self.declares(ProfileFlags::NORMALIZED) {
            let (m, ok) = match &mass {
                Ok(m) => (*m, (m - 1.0).abs() <= 1e-9),
                Err(_) => (f64::NAN, false),
            };
            rows.push(Evidence::new("mass", m).bounded_by(1.0).verdict(Verdict::from_bool(ok)));
        }
        let mm = self.check_moment_and_monotone();
        let pick = |label: &str| mm.evidence.iter().find(|e| e.label == label).unwrap().clone();
        if self.declares(ProfileFlags::NONINCREASING) {
            rows.push(pick("first_increase_rho"));
        }
        if self.declares(ProfileFlags::BOUNDED) {
            rows.push(pick("sup_near_origin"));
        }
        if self.declares(ProfileFlags::FINITE_NTH_MOMENT) {
            rows.push(pick("nth_moment"));
        }
        if self.declares(ProfileFlags::C1) {
            let ok = self.derivative(1.0).is_some_and(f64::is_finite);
            rows.push(Evidence::new("derivative", 0.0).verdict(Verdict::from_bool(ok)));
        }
        let ok = rows.iter().all(|e| e.verdict != Verdict::Fail);
        let mut r = ConditionReport::new(
            "declared-flags",
            Verdict::from_bool(ok),
            mass.unwrap_or(f64::NAN),
        );
        rows.into_iter().for_each(|e| r.push(e));
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClosedLaw {
    /// CDF `(ρ/radius)^exponent` on `(0, radius)`.
    Power { radius: f64, exponent: f64 },
    /// Density `∝ e^{-ρ²}` on `(0, ∞)`.
    HalfGaussian,
    /// Density `∝ ρ e^{-ρ²}`.
    Rayleigh,
    /// Density `e^{-ρ}`.
    Exponential,
    /// Density `∝ (1+ρ)^{-1-δ}`.
    Lomax { delta: f64 },
}

/// Distribution of the radius `|Z|`, sampled by inversion.
#[derive(Clone, Debug)]
pub enum RadialLaw {
    Closed(ClosedLaw),
    /// Cumulative (unnormalized) masses at increasing radii.
    Table { rho: Vec<f64>, cdf: Vec<f64> },
}

impl RadialLaw {
    /// Quantile at `q ∈ (0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            RadialLaw::Closed(c) => match *c {
                ClosedLaw::Power { radius, exponent } => radius * q.powf(1.0 / exponent),
                ClosedLaw::HalfGaussian => erf_inv(q.min(1.0 - 1e-16)),
                ClosedLaw::Rayleigh => (-(-q).ln_1p()).max(0.0).sqrt(),
                ClosedLaw::Exponential => -(-q).ln_1p(),
                ClosedLaw::Lomax { delta } => (-(-q).ln_1p() / delta).exp_m1(),
            },
            RadialLaw::Table { rho, cdf } => {
                let total = *cdf.last().unwrap();
                let target = q * total;
                let k = cdf.partition_point(|&c| c < target).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[k - 1], cdf[k]);
                let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
                rho[k - 1] + t * (rho[k] - rho[k - 1])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn sphere_constants() {
        assert_eq!(sphere_area(1), 2.0);
        assert!(close(sphere_area(2), 2.0 * PI, 1e-15));
        assert!(close(sphere_area(3), 4.0 * PI, 1e-15));
        assert!(close(sphere_area(4), 2.0 * PI * PI, 1e-15));
        assert!(close(ball_volume(3), 4.0 * PI / 3.0, 1e-15));
    }

    #[test]
    fn indicator_normalization_scales() {
        let p1 = Profile::normalized(ProfileKind::Indicator, 1).unwrap();
        assert!(close(p1.scale(), 0.5, 1e-13));
        assert!(close(p1.evaluate(0.3), 0.5, 1e-13));
        assert_eq!(p1.evaluate(1.0), 0.0);
        let p2 = Profile::normalized(ProfileKind::Indicator, 2).unwrap();
        assert!(close(p2.scale(), 1.0 / PI, 1e-13));
    }

    fn planar_kinds() -> Vec<ProfileKind> {
        vec![
            ProfileKind::Indicator,
            ProfileKind::ScaledIndicator { alpha: 2.0, beta: 0.5 },
            ProfileKind::PowerTail { delta: 1.0 },
            ProfileKind::Gaussian,
            ProfileKind::Exponential,
            ProfileKind::PoissonTail,
            ProfileKind::OriginSingular,
        ]
    }

    #[test]
    fn planar_radial_mass_closed_forms() {
        for kind in planar_kinds() {
            let p = Profile::new(kind, 2).unwrap();
            let br = p.breakpoints();
            for t in [0.01, 0.3, 1.0, 2.7, 40.0] {
                let want = integrate_with_breaks(|r| r * p.evaluate(r), 0.0, t, &br, Tolerance::new(1e-15, 1e-13)).value;
                assert!(close(p.planar_radial_mass(t), want, 1e-11), "{} at {t}", p.name());
            }
            let total = p.radial_integral(1.0).unwrap().value;
            assert!(close(p.planar_radial_mass(f64::INFINITY), total, 1e-8), "{}", p.name());
        }
    }

    #[test]
    fn quadrant_mass_matches_cartesian_quadrature() {
        let tol = Tolerance::new(1e-14, 1e-12);
        for kind in planar_kinds() {
            let p = Profile::new(kind, 2).unwrap();
            for (u, v) in [(0.3, 0.7), (1.5, 0.2), (2.0, 3.0), (-0.4, 0.9)] {
                // the x-integral of a y-integral with breaks at the circles
                let inner = |x: f64| {
                    let br: Vec<f64> = p
                        .breakpoints()
                        .iter()
                        .filter(|&&b| b > x.abs())
                        .map(|&b| (b * b - x * x).sqrt())
                        .collect();
                    integrate_with_breaks(|y| p.evaluate((x * x + y * y).sqrt()), 0.0, v, &br, tol).value
                };
                let br: Vec<f64> = p.breakpoints();
                let want = if u >= 0.0 {
                    integrate_with_breaks(inner, 0.0, u, &br, tol).value
                } else {
                    -integrate_with_breaks(|x| inner(-x), 0.0, -u, &br, tol).value
                };
                let got = p.quadrant_mass(u, v);
                assert!((got - want).abs() < 1e-9, "{} ({u}, {v}): {got} vs {want}", p.name());
            }
            let q = p.quadrant_mass(f64::INFINITY, f64::INFINITY);
            let total = 2.0 * PI * p.planar_radial_mass(f64::INFINITY);
            assert!(close(q, total / 4.0, 1e-10), "{}", p.name());
        }
    }

    #[test]
    fn circle_averaged_mass_matches_planar_quadrature() {
        let tol = Tolerance::new(1e-14, 1e-12);
        for kind in planar_kinds() {
            let p = Profile::new(kind, 2).unwrap();
            for (c, t) in [(0.5, 0.2), (0.5, 0.8), (0.3, 2.0), (1.5, 0.7)] {
                // polar coordinates about the origin, averaging φ(|z − c e₁|)
                let ring = |r: f64| {
                    let kappa = |b: f64| ((r * r + c * c - b * b) / (2.0 * r * c)).clamp(-1.0, 1.0).acos();
                    let br: Vec<f64> = p.breakpoints().iter().map(|&b| kappa(b)).collect();
                    let f = |th: f64| p.evaluate(((r - c).powi(2) + 4.0 * r * c * (0.5 * th).sin().powi(2)).sqrt());
                    r * integrate_with_breaks(f, 0.0, PI, &br, tol).value / PI
                };
                let mut br: Vec<f64> = p.breakpoints().iter().flat_map(|&b| [b + c, (b - c).abs()]).collect();
                br.push(c);
                let want = integrate_with_breaks(ring, 0.0, t, &br, tol).value;
                let got = p.circle_averaged_radial_mass(c, t);
                assert!((got - want).abs() < 1e-9, "{} c={c} t={t}: {got} vs {want}", p.name());
            }
        }
    }

    #[test]
    fn power_tail_quadrature_matches_antiderivative() {
        // ∫₀^∞ (1+ρ)^{-3} dρ = 1/2, so ω_1 · 1/2 = 1 and the scale stays 1.
        let p = Profile::new(ProfileKind::PowerTail { delta: 2.0 }, 1).unwrap();
        let r = p.radial_integral(0.0).unwrap();
        assert!(close(r.value, 0.5, 1e-11), "{r:?}");
        let q = p.normalize().unwrap();
        assert!(close(q.scale(), 1.0, 1e-11));
    }

    #[test]
    fn moments_against_closed_forms() {
        let g = Profile::new(ProfileKind::Gaussian, 1).unwrap();
        assert!(close(g.mass().unwrap(), PI.sqrt(), 1e-11));
        // ∫₀^∞ ρ e^{-ρ²} = 1/2
        assert!(close(g.radial_moment(1.0).unwrap(), 0.5, 1e-11));
        let e = Profile::new(ProfileKind::Exponential, 2).unwrap();
        // ω_2 ∫ ρ³ e^{-ρ} = 2π · 6
        assert!(close(e.nth_moment().unwrap(), 12.0 * PI, 1e-11));
        let s = Profile::new(ProfileKind::OriginSingular, 1).unwrap();
        assert!(close(s.mass().unwrap(), 4.0, 1e-11));
        let pt = Profile::new(ProfileKind::PoissonTail, 1).unwrap();
        assert!(close(pt.mass().unwrap(), PI, 1e-9));
    }

    #[test]
    fn heavy_tails_and_zero_are_rejected() {
        assert!(Profile::new(ProfileKind::PowerTail { delta: 0.0 }, 1).is_err());
        let poisson = Profile::new(ProfileKind::PoissonTail, 1).unwrap();
        assert!(matches!(poisson.nth_moment(), Err(Error::NonIntegrable(_))));
        let zero = Profile::new(
            ProfileKind::Custom(CustomProfile {
                name: "zero".into(),
                value: Arc::new(|_| 0.0),
                derivative: None,
                breakpoints: vec![],
                support: None,
                flags: ProfileFlags::empty(),
            }),
            1,
        )
        .unwrap();
        assert!(matches!(zero.normalize(), Err(Error::ZeroProfile)));
        let blowup = Profile::new(
            ProfileKind::Custom(CustomProfile {
                name: "inverse".into(),
                value: Arc::new(|r: f64| 1.0 / r),
                derivative: None,
                breakpoints: vec![],
                support: Some(1.0),
                flags: ProfileFlags::empty(),
            }),
            1,
        )
        .unwrap();
        assert!(matches!(blowup.normalize(), Err(Error::NonIntegrable(_))));
    }

    #[test]
    fn primitive_matches_quadrature() {
        for kind in [
            ProfileKind::PowerTail { delta: 1.5 },
            ProfileKind::Gaussian,
            ProfileKind::Exponential,
            ProfileKind::PoissonTail,
            ProfileKind::OriginSingular,
        ] {
            for n in [1, 2] {
                let p = Profile::new(kind.clone(), n).unwrap();
                for t in [0.1, 0.7, 1.0, 3.0] {
                    let closed = p.radial_primitive(t);
                    let numeric = p.numeric_primitive(t);
                    assert!(close(closed, numeric, 1e-10), "{} n={n} t={t}", p.name());
                }
            }
        }
    }

    #[test]
    fn gradient_bound_verdicts() {
        // |φ′|ρ² = 3ρ²/(1+ρ)^4 peaks at ρ = 1 with value 3/16.
        let p = Profile::new(ProfileKind::PowerTail { delta: 2.0 }, 1).unwrap();
        let r = p.check_gradient_bound().unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let oracle = log_grid()
            .iter()
            .map(|&x| x * x * 3.0 * (1.0 + x).powi(-4))
            .fold(0.0, f64::max);
        assert!(close(r.value, oracle, 1e-14));
        assert!(close(r.value, 3.0 / 16.0, 1e-5));

        let g = Profile::new(ProfileKind::Gaussian, 1).unwrap();
        let r = g.check_gradient_bound().unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let at = r.evidence[0].value;
        assert!(at > 0.1 && at < 10.0);

        let ind = Profile::new(ProfileKind::ScaledIndicator { alpha: 2.0, beta: 3.0 }, 1).unwrap();
        assert!(matches!(ind.check_gradient_bound(), Err(Error::UnsupportedCheck(_))));
    }

    #[test]
    fn gradient_growth_is_caught() {
        // A (1+ρ)^{-1/2} tail makes |φ′|ρ² grow like ρ^{1/2}.
        let p = Profile::new(
            ProfileKind::Custom(CustomProfile {
                name: "slow".into(),
                value: Arc::new(|r: f64| (1.0 + r).powf(-0.5)),
                derivative: Some(Arc::new(|r: f64| -0.5 * (1.0 + r).powf(-1.5))),
                breakpoints: vec![],
                support: None,
                flags: ProfileFlags::C1 | ProfileFlags::BOUNDED,
            }),
            1,
        )
        .unwrap();
        let r = p.check_gradient_bound().unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.witness.unwrap() > 1e5);
    }

    #[test]
    fn moment_monotone_examples() {
        let p = Profile::normalized(ProfileKind::Indicator, 1).unwrap();
        let r = p.check_moment_and_monotone();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(close(r.value, 0.5, 1e-12));

        let poisson = Profile::normalized(ProfileKind::PoissonTail, 1).unwrap();
        let r = poisson.check_moment_and_monotone();
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(r.value.is_infinite());

        let e = Profile::normalized(ProfileKind::Exponential, 2).unwrap();
        let r = e.check_moment_and_monotone();
        assert_eq!(r.verdict, Verdict::Pass);
        // normalized scale 1/(2π), M_2 = 2π·6/(2π) = 6
        assert!(close(r.value, 6.0, 1e-10));

        let s = Profile::normalized(ProfileKind::OriginSingular, 1).unwrap();
        let r = s.check_moment_and_monotone();
        assert_eq!(r.evidence[0].verdict, Verdict::Fail);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn declared_flags_hold_for_catalog() {
        for kind in catalog() {
            for n in [1, 2, 3] {
                let p = Profile::normalized(kind.clone(), n).unwrap();
                let r = p.check_declared();
                assert_eq!(r.verdict, Verdict::Pass, "{} n={n}: {}", p.name(), r.to_lines());
            }
        }
    }

    #[test]
    fn radial_law_matches_mass_fraction() {
        for kind in catalog() {
            for n in [1, 2, 3] {
                let p = Profile::new(kind.clone(), n).unwrap();
                let law = p.radial_law().unwrap();
                let total = p.radial_integral(n as f64 - 1.0).unwrap().value;
                for q in [0.1, 0.5, 0.9] {
                    let r = law.quantile(q);
                    let part = if r > 0.0 {
                        integrate(|u| u.powi(n as i32 - 1) * p.evaluate(u), 0.0, r, Tolerance::default())
                            .value
                    } else {
                        0.0
                    };
                    assert!(close(part / total, q, 2e-5), "{} n={n} q={q}: {}", p.name(), part / total);
                }
            }
        }
    }

    fn catalog() -> Vec<ProfileKind> {
        vec![
            ProfileKind::Indicator,
            ProfileKind::ScaledIndicator { alpha: 2.0, beta: 0.5 },
            ProfileKind::PowerTail { delta: 2.0 },
            ProfileKind::Gaussian,
            ProfileKind::Exponential,
            ProfileKind::OriginSingular,
        ]
    }

    #[test]
    fn monte_carlo_mass_agrees_with_one() {
        for kind in catalog() {
            for n in [1, 2, 3] {
                let p = Profile::normalized(kind.clone(), n).unwrap();
                let e = p.monte_carlo_mass(200_000, 11);
                assert!(e.agrees_with(1.0, 3.0, 0.0), "{} n={n}: {e:?}", p.name());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn normalize_is_idempotent(alpha in 0.1f64..10.0, beta in 0.1f64..10.0, n in 1usize..4) {
            let p = Profile::normalized(ProfileKind::ScaledIndicator { alpha, beta }, n).unwrap();
            let q = p.normalize().unwrap();
            prop_assert!((q.scale() / p.scale() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn power_tail_normalizes(delta in 0.5f64..6.0, n in 1usize..4) {
            let p = Profile::normalized(ProfileKind::PowerTail { delta }, n).unwrap();
            // closed form: ∫₀^∞ ρ^{n-1}(1+ρ)^{-(n+δ)} dρ = B(n, δ)
            let beta_fn = statrs::function::beta::beta(n as f64, delta);
            let expected = 1.0 / (sphere_area(n) * beta_fn);
            prop_assert!((p.scale() / expected - 1.0).abs() < 1e-7, "{} vs {}", p.scale(), expected);
        }

        #[test]
        fn gradient_check_classifies(delta in 0.2f64..5.0, n in 1usize..4, beta in 0.1f64..5.0) {
            let pt = Profile::new(ProfileKind::PowerTail { delta }, n).unwrap();
            prop_assert_eq!(pt.check_gradient_bound().unwrap().verdict, Verdict::Pass);
            let g = Profile::new(ProfileKind::Gaussian, n).unwrap();
            prop_assert_eq!(g.check_gradient_bound().unwrap().verdict, Verdict::Pass);
            let ind = Profile::new(ProfileKind::ScaledIndicator { alpha: 1.0, beta }, n).unwrap();
            prop_assert!(ind.check_gradient_bound().is_err());
        }

        #[test]
        fn profile_values_nonnegative(rho in 0.0f64..1e3, n in 1usize..4) {
            for kind in catalog() {
                let p = Profile::new(kind, n).unwrap();
                prop_assert!(p.evaluate(rho) >= 0.0);
            }
        }
    }
}
