//! The averaged kernel `K(x) = ∫∫ s^{-n} φ(|x − y| / s) dΠ(s, y)`.
//!
//! Quadrature evaluation never integrates `s^{-n} φ(|x−y|/s)` in `(s, y)`
//! directly. Each form is reduced to a one-dimensional outer integral in `s`
//! over a closed-form or adaptively integrated conditional average, and
//! density forms use `y = x − s u` so that the inner integrand is
//! `γ(s, x − s u) φ(|u|)` with no `s^{-n}` factor.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::mc::{open_unit, stream_rng, unit_direction, Estimate, MeanAccumulator};
use crate::profiles::{quadrant_from_radial, sphere_area, Profile};
use crate::quad::{integrate, integrate_panels, integrate_with_breaks, Chebyshev, Tolerance};
use crate::randomness::{
    Coupling, DensityKind, DensitySpec, JointDistributionSpec, JointForm, MeanLaw, Samples, ScalarLaw,
};
use crate::transport::GridFunction;

const INNER: Tolerance = Tolerance::new(1e-15, 1e-11);
const OUTER: Tolerance = Tolerance::new(1e-14, 1e-10);
const MASS: Tolerance = Tolerance::new(1e-12, 1e-9).with_max_intervals(2000);
const FALLBACK_SAMPLES: usize = 100_000;

/// How [`AveragedKernel`] integrates over Π.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Strategy {
    /// Finite weighted sum over atoms; no discretization error.
    AtomsExact,
    /// Adaptive Gauss–Kronrod; `s_nodes` and `y_nodes` (at least 16 each)
    /// set the initial number of 15-point panels on the respective axis.
    Quadrature { s_nodes: usize, y_nodes: usize },
    /// Mean over `samples` draws from Π (at least 1000).
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Quadrature { s_nodes: 16, y_nodes: 16 }
    }
}

/// `K_j` for a profile and one joint law.
#[derive(Debug)]
pub struct AveragedKernel {
    profile: Profile,
    spec: JointDistributionSpec,
    strategy: Strategy,
    /// Support radius of φ, or the radius past which its mass is negligible.
    reach: f64,
    profile_mass: f64,
    cached_mass: OnceLock<Estimate>,
    samples: OnceLock<Samples>,
    planar: OnceLock<PlanarRadial>,
}

impl Clone for AveragedKernel {
    fn clone(&self) -> Self {
        Self {
            profile: self.profile.clone(),
            spec: self.spec.clone(),
            strategy: self.strategy,
            reach: self.reach,
            profile_mass: self.profile_mass,
            cached_mass: self.cached_mass.clone(),
            samples: OnceLock::new(),
            planar: self.planar.clone(),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Angle measure of `{θ : |x − ρ e_θ| ≤ r}` in the plane, for `|x| = a`.
fn arc_inside(a: f64, rho: f64, r: f64) -> f64 {
    if a == 0.0 || rho == 0.0 {
        return if a.max(rho) <= r { 2.0 * PI } else { 0.0 };
    }
    let kappa = (a * a + rho * rho - r * r) / (2.0 * a * rho);
    2.0 * kappa.clamp(-1.0, 1.0).acos()
}

fn positive(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    v.into_iter().filter(|b| b.is_finite() && *b > 0.0).collect()
}

impl AveragedKernel {
    pub fn new(profile: Profile, spec: JointDistributionSpec, strategy: Strategy) -> Result<Self> {
        if profile.dimension() != spec.dimension() {
            return Err(invalid(format!(
                "profile dimension {} differs from law dimension {}",
                profile.dimension(),
                spec.dimension()
            )));
        }
        match strategy {
            Strategy::AtomsExact if !matches!(spec.form(), JointForm::Atoms(_)) => {
                return Err(invalid("atoms-exact strategy needs an atoms form"))
            }
            Strategy::Quadrature { s_nodes, y_nodes } if s_nodes < 16 || y_nodes < 16 => {
                return Err(invalid("quadrature needs at least 16 nodes per axis"))
            }
            Strategy::MonteCarlo { samples, .. } if samples < 1000 => {
                return Err(invalid("Monte Carlo needs at least 1000 samples"))
            }
            _ => {}
        }
        let n = profile.dimension();
        let plan = profile.radial_integral(n as f64 - 1.0)?;
        let reach = profile.support_radius().unwrap_or(plan.cutoff);
        Ok(Self {
            profile_mass: sphere_area(n) * plan.value,
            profile,
            spec,
            strategy,
            reach,
            cached_mass: OnceLock::new(),
            samples: OnceLock::new(),
            planar: OnceLock::new(),
        })
    }

    /// Exact atoms for atom forms, default quadrature otherwise.
    pub fn auto(profile: Profile, spec: JointDistributionSpec) -> Result<Self> {
        let strategy = match spec.form() {
            JointForm::Atoms(_) => Strategy::AtomsExact,
            _ => Strategy::default(),
        };
        Self::new(profile, spec, strategy)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn spec(&self) -> &JointDistributionSpec {
        &self.spec
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn dimension(&self) -> usize {
        self.profile.dimension()
    }

    pub fn index(&self) -> u32 {
        self.spec.index()
    }

    /// Radius past which φ is zero or negligible.
    pub fn profile_reach(&self) -> f64 {
        self.reach
    }

    fn panels(&self) -> (usize, usize) {
        match self.strategy {
            Strategy::Quadrature { s_nodes, y_nodes } => (s_nodes.div_ceil(15), y_nodes.div_ceil(15)),
            _ => (2, 2),
        }
    }

    fn phi(&self, rho: f64) -> f64 {
        self.profile.evaluate(rho)
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b = self.profile.breakpoints();
        if b.is_empty() {
            b.push(1.0);
        }
        b
    }

    /// `s^{-n} φ(d / s)`.
    fn dilated(&self, s: f64, d: f64) -> f64 {
        s.powi(-(self.dimension() as i32)) * self.phi(d / s)
    }

    /// `K(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_estimate(x).map(|e| e.value)
    }

    /// `K(x)` with a standard error (zero except for Monte Carlo).
    pub fn eval_estimate(&self, x: &[f64]) -> Result<Estimate> {
        if x.len() != self.dimension() {
            return Err(invalid("evaluation point has the wrong dimension"));
        }
        if self.spec.is_pure_translation() {
            return Err(Error::PureTranslation);
        }
        if let Strategy::MonteCarlo { .. } = self.strategy {
            return self.eval_mc(x);
        }
        let v = match self.spec.form() {
            JointForm::Atoms(atoms) => atoms
                .iter()
                .filter(|a| a.weight > 0.0)
                .map(|a| a.weight * self.dilated(a.s, dist(x, &a.y)))
                .sum(),
            JointForm::Product { variance, mean } => self.eval_product(variance, mean, x)?,
            JointForm::Coupled { variance, coupling } => self.eval_coupled(variance, *coupling, x)?,
            JointForm::Density(d) => self.eval_density(d, x)?,
        };
        Ok(Estimate::exact(v))
    }

    fn mc_samples(&self) -> Result<&Samples> {
        if let Some(s) = self.samples.get() {
            return Ok(s);
        }
        let (count, seed) = match self.strategy {
            Strategy::MonteCarlo { samples, seed } => (samples, seed),
            _ => (FALLBACK_SAMPLES, 0),
        };
        let drawn = self.spec.sample(count, seed)?;
        let _ = self.samples.set(drawn);
        Ok(self.samples.get().expect("set above"))
    }

    fn eval_mc(&self, x: &[f64]) -> Result<Estimate> {
        let draws = self.mc_samples()?;
        let mut acc = MeanAccumulator::default();
        for i in 0..draws.len() {
            let (s, y) = draws.get(i);
            acc.push(self.dilated(s, dist(x, y)));
        }
        Ok(acc.estimate())
    }

    /// `∫ h(s) dν(s)`.
    fn outer(&self, law: &ScalarLaw, h: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
        match law {
            ScalarLaw::Dirac(v) => h(*v),
            ScalarLaw::Discrete(pts) => pts.iter().filter(|p| p.1 > 0.0).map(|&(v, w)| w * h(v)).sum(),
            ScalarLaw::Uniform { lo, hi } => {
                let (ps, _) = self.panels();
                integrate_panels(&h, *lo, *hi, breaks, ps, OUTER).value / (hi - lo)
            }
        }
    }

    fn reaches_zero(law: &ScalarLaw) -> bool {
        matches!(law, ScalarLaw::Uniform { lo, .. } if *lo == 0.0)
    }

    /// Scales `d / b` for the profile breaks `b`, plus `d/2, d, 2d`.
    fn scale_breaks(&self, ds: &[f64]) -> Vec<f64> {
        let bs = self.breaks();
        positive(ds.iter().flat_map(|&d| {
            bs.iter()
                .map(move |&b| d / b)
                .chain([0.5 * d, d, 2.0 * d])
                .collect::<Vec<_>>()
        }))
    }

    fn eval_product(&self, variance: &ScalarLaw, mean: &MeanLaw, x: &[f64]) -> Result<f64> {
        let n = self.dimension();
        let singular_at_zero = Self::reaches_zero(variance) && self.phi(0.0) > 0.0;
        match mean {
            MeanLaw::Dirac(y0) => {
                let d = dist(x, y0);
                if d == 0.0 && singular_at_zero {
                    return Ok(f64::INFINITY);
                }
                Ok(self.outer(variance, |s| self.dilated(s, d), &self.scale_breaks(&[d])))
            }
            MeanLaw::Discrete(pts) => {
                let ds: Vec<f64> = pts.iter().filter(|p| p.1 > 0.0).map(|p| dist(x, &p.0)).collect();
                if singular_at_zero && ds.contains(&0.0) {
                    return Ok(f64::INFINITY);
                }
                let h = |s: f64| {
                    pts.iter()
                        .filter(|p| p.1 > 0.0)
                        .zip(&ds)
                        .map(|(p, &d)| p.1 * self.dilated(s, d))
                        .sum::<f64>()
                };
                Ok(self.outer(variance, h, &self.scale_breaks(&ds)))
            }
            MeanLaw::UniformBall { radius } => {
                let r = *radius;
                if n == 1 {
                    let x0 = x[0];
                    let h = |s: f64| {
                        (self.profile.cdf_1d((x0 + r) / s) - self.profile.cdf_1d((x0 - r) / s)) / (2.0 * r)
                    };
                    Ok(self.outer(variance, h, &self.scale_breaks(&[(x0 + r).abs(), (x0 - r).abs()])))
                } else if n == 2 {
                    let a = norm(x);
                    let h = |s: f64| self.ball_average(r, a, s);
                    Ok(self.outer(variance, h, &self.scale_breaks(&[(a - r).abs(), a + r])))
                } else {
                    Err(Error::Unsupported("ball-uniform shifts by quadrature need n <= 2".into()))
                }
            }
            MeanLaw::PowerSingular { length, .. } => {
                let x0 = x[0];
                let h = |s: f64| self.power_singular_average(mean, x0, s);
                Ok(self.outer(variance, h, &self.scale_breaks(&[x0.abs(), (x0 - length).abs()])))
            }
        }
    }

    /// `E[s^{-2} φ(|x − y| / s)]` for `y` uniform in the disk of radius `r`,
    /// `|x| = a`, via polar coordinates around `x`.
    fn ball_average(&self, r: f64, a: f64, s: f64) -> f64 {
        let lo = (a - r).max(0.0) / s;
        let hi = ((a + r) / s).min(self.reach);
        if lo >= hi {
            return 0.0;
        }
        let mut br = self.profile.breakpoints();
        br.push((a - r).abs() / s);
        let (_, py) = self.panels();
        let v = integrate_panels(
            |v| self.phi(v) * v * arc_inside(a, s * v, r),
            lo,
            hi,
            &br,
            py,
            INNER,
        )
        .value;
        v / (PI * r * r)
    }

    /// `E[s^{-1} φ(|x − y| / s)]` for `y` from a one-dimensional power-singular
    /// law, integrated in quantile coordinates.
    fn power_singular_average(&self, law: &MeanLaw, x0: f64, s: f64) -> f64 {
        let mut br: Vec<f64> = vec![law.cdf_1d(x0)];
        for b in self.profile.breakpoints() {
            br.push(law.cdf_1d(x0 - s * b));
            br.push(law.cdf_1d(x0 + s * b));
        }
        let (_, py) = self.panels();
        integrate_panels(
            |q| self.dilated(s, (x0 - law.quantile_1d(q)).abs()),
            0.0,
            1.0,
            &br,
            py,
            INNER,
        )
        .value
    }

    fn eval_coupled(&self, variance: &ScalarLaw, coupling: Coupling, x: &[f64]) -> Result<f64> {
        let n = self.dimension();
        let c = coupling.constant();
        if c == 0.0 {
            return self.eval_product(variance, &MeanLaw::zero(n), x);
        }
        let a = norm(x);
        let h: Box<dyn Fn(f64) -> f64 + '_> = match (coupling, n) {
            (Coupling::Sphere { .. }, 1) => {
                Box::new(move |s: f64| (self.phi((x[0] / s - c).abs()) + self.phi((x[0] / s + c).abs())) / (2.0 * s))
            }
            (Coupling::Ball { .. }, 1) => Box::new(move |s: f64| {
                (self.profile.cdf_1d(x[0] / s + c) - self.profile.cdf_1d(x[0] / s - c)) / (2.0 * c * s)
            }),
            (Coupling::Sphere { .. }, 2) if self.profile.indicator_parameters().is_some() => {
                let (alpha, beta) = self.profile.indicator_parameters().expect("guarded");
                Box::new(move |s: f64| alpha * arc_inside(a / s, c, beta) / (2.0 * PI * s * s))
            }
            (Coupling::Sphere { .. }, 2) => Box::new(move |s: f64| {
                let b = a / s;
                let br: Vec<f64> = self
                    .profile
                    .breakpoints()
                    .iter()
                    .map(|&q| ((b * b + c * c - q * q) / (2.0 * b * c)).clamp(-1.0, 1.0).acos())
                    .collect();
                let v = integrate_with_breaks(
                    |t| self.phi((b * b + c * c - 2.0 * b * c * t.cos()).max(0.0).sqrt()),
                    0.0,
                    PI,
                    &br,
                    INNER,
                )
                .value;
                v / (PI * s * s)
            }),
            (Coupling::Ball { .. }, 2) => Box::new(move |s: f64| self.ball_average(c * s, a, s)),
            _ => return Err(Error::Unsupported("coupled laws by quadrature need n <= 2".into())),
        };
        if a == 0.0 && Self::reaches_zero(variance) && h(1.0) > 0.0 {
            return Ok(f64::INFINITY);
        }
        let mut ds = vec![a];
        for b in self.breaks() {
            ds.push(a / (c + b) * b);
            ds.push(a / (c - b).abs() * b);
        }
        Ok(self.outer(variance, h, &self.scale_breaks(&ds)))
    }

    fn eval_density(&self, d: &DensitySpec, x: &[f64]) -> Result<f64> {
        let n = self.dimension();
        let (sm, r) = d.support();
        let (ps, py) = self.panels();
        let pb = self.profile.breakpoints();
        if n == 1 {
            let x0 = x[0];
            let inner = |s: f64| {
                let lo = ((x0 - r) / s).max(-self.reach);
                let hi = ((x0 + r) / s).min(self.reach);
                if lo >= hi {
                    return 0.0;
                }
                let mut br = vec![0.0, x0 / s];
                br.extend(pb.iter().flat_map(|&b| [b, -b]));
                integrate_panels(|u| d.eval(s, &[x0 - s * u]) * self.phi(u.abs()), lo, hi, &br, py, INNER).value
            };
            let sb = self.scale_breaks(&[(x0 - r).abs(), (x0 + r).abs(), x0.abs()]);
            return Ok(integrate_panels(inner, 0.0, sm, &sb, ps, OUTER).value);
        }
        if n != 2 || !d.radial_in_mean() {
            return Err(Error::Unsupported(
                "density kernels by quadrature need n = 1, or n = 2 with a density radial in y".into(),
            ));
        }
        let a = norm(x);
        let uniform = match d.kind {
            DensityKind::UniformBox { .. } => Some(d.eval_radial(0.0, 0.0, 2)),
            _ => None,
        };
        let theta = |s: f64, rho: f64| -> f64 {
            let sr = s * rho;
            if let Some(g0) = uniform {
                return g0 * arc_inside(a, sr, r);
            }
            let mut br = Vec::new();
            if a > 0.0 && sr > 0.0 {
                br.push(((a * a + sr * sr - r * r) / (2.0 * a * sr)).clamp(-1.0, 1.0).acos());
            }
            2.0 * integrate_with_breaks(
                |t| d.eval_radial(s, (a * a + sr * sr - 2.0 * a * sr * t.cos()).max(0.0).sqrt(), 2),
                0.0,
                PI,
                &br,
                INNER,
            )
            .value
        };
        let inner = |s: f64| {
            let lo = (a - r).max(0.0) / s;
            let hi = ((a + r) / s).min(self.reach);
            if lo >= hi {
                return 0.0;
            }
            let mut br = pb.clone();
            br.extend([(a - r).abs() / s, a / s]);
            integrate_panels(|rho| rho * self.phi(rho) * theta(s, rho), lo, hi, &br, py, INNER).value
        };
        let sb = self.scale_breaks(&[(a - r).abs(), a + r, a]);
        Ok(integrate_panels(inner, 0.0, sm, &sb, ps, OUTER).value)
    }

    /// `∫ K dx`, cached after the first call.
    pub fn kernel_mass(&self) -> Result<f64> {
        self.mass_estimate().map(|e| e.value)
    }

    /// `∫ K dx` with a standard error for Monte Carlo paths.
    ///
    /// Atom forms sum the profile mass exactly. Quadrature integrates pointwise
    /// values of `K` over a box covering the support (with logarithmic
    /// coordinates out to the profile's reach) plus the profile's fitted tail;
    /// in two dimensions this requires `K` radial about some center, and
    /// otherwise falls back to Monte Carlo. Monte Carlo draws `(s, y)` from Π
    /// and `x = y + s w` with `w` from a fixed heavy-tailed proposal.
    pub fn mass_estimate(&self) -> Result<Estimate> {
        if let Some(m) = self.cached_mass.get() {
            return Ok(*m);
        }
        let m = self.compute_mass()?;
        let _ = self.cached_mass.set(m);
        Ok(*self.cached_mass.get().expect("set above"))
    }

    fn compute_mass(&self) -> Result<Estimate> {
        if self.spec.is_pure_translation() {
            return Ok(Estimate::exact(1.0));
        }
        if let JointForm::Atoms(atoms) = self.spec.form() {
            let w: f64 = atoms.iter().map(|a| a.weight).sum();
            return Ok(Estimate::exact(w * self.profile_mass));
        }
        if let Strategy::MonteCarlo { samples, seed } = self.strategy {
            return self.mass_mc(samples, seed);
        }
        match (self.dimension(), self.radial_center()) {
            (1, _) => self.mass_quadrature_1d(),
            (2, Some(c)) => self.mass_quadrature_radial(&c),
            _ => self.mass_mc(FALLBACK_SAMPLES, 0),
        }
    }

    fn mass_mc(&self, samples: usize, seed: u64) -> Result<Estimate> {
        let n = self.dimension();
        let draws = self.spec.sample(samples, seed)?;
        let mut rng = stream_rng(seed, 0x3a55);
        let w_n = sphere_area(n);
        let mut w = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut acc = MeanAccumulator::default();
        for i in 0..draws.len() {
            let (s, y) = draws.get(i);
            let u = open_unit(&mut rng);
            let rho = if rng.random::<bool>() { u * u } else { u.powi(-2) - 1.0 };
            unit_direction(&mut rng, &mut w);
            for k in 0..n {
                x[k] = y[k] + s * rho * w[k];
            }
            let near = if rho <= 1.0 { 0.5 / rho.sqrt() } else { 0.0 };
            let q_rho = 0.5 * near + 0.5 * 0.5 * (1.0 + rho).powf(-1.5);
            // density of x: q_rho(ρ) / (ω_n ρ^{n-1} sⁿ)
            let q_x = q_rho / (w_n * rho.powi(n as i32 - 1) * s.powi(n as i32));
            acc.push(self.dilated(s, dist(&x, y)) / q_x);
        }
        Ok(acc.estimate())
    }

    /// Center of rotational symmetry of `K` when one exists.
    fn radial_center(&self) -> Option<Vec<f64>> {
        let n = self.dimension();
        match self.spec.form() {
            JointForm::Product { mean: MeanLaw::Dirac(y0), .. } => Some(y0.clone()),
            JointForm::Product { mean: MeanLaw::UniformBall { .. }, .. } | JointForm::Coupled { .. } => {
                Some(vec![0.0; n])
            }
            JointForm::Product { mean: MeanLaw::Discrete(pts), .. } => {
                let first = &pts[0].0;
                pts.iter().all(|p| &p.0 == first).then(|| first.clone())
            }
            JointForm::Density(d) if d.radial_in_mean() => Some(vec![0.0; n]),
            _ => None,
        }
    }

    /// `(core, reach)`: `K` is supported in `B(c, core)` for compact φ,
    /// and negligible past `reach` in general.
    fn extent(&self) -> (f64, f64, bool) {
        let (s_max, y_max) = self.spec.support_bounds();
        let compact = self.profile.support_radius().is_some();
        let b = self.breaks().into_iter().fold(1.0, f64::max);
        let core = y_max + s_max * if compact { self.reach } else { b };
        (core, y_max + s_max * self.reach, compact)
    }

    /// Mass of `K` beyond `s_max R`, `R` the profile cutoff. The profile's
    /// own mass beyond `u ≥ R` is `T (R/u)^κ`, so a dilation by `s` leaves
    /// `T (s/s_max)^κ` outside; exact for zero shifts. Density forms use the
    /// bound `T`.
    fn profile_tail(&self) -> f64 {
        let n = self.dimension();
        let Ok(r) = self.profile.radial_integral(n as f64 - 1.0) else {
            return 0.0;
        };
        let (s_max, _) = self.spec.support_bounds();
        let k = r.tail_decay;
        let rel = |s: f64| if s_max > 0.0 { (s / s_max).powf(k) } else { 1.0 };
        let law_moment = |law: &ScalarLaw| match law {
            ScalarLaw::Dirac(v) => rel(*v),
            ScalarLaw::Discrete(p) => p.iter().map(|&(v, w)| w * rel(v)).sum(),
            ScalarLaw::Uniform { lo, hi } => {
                let q = lo / hi;
                rel(*hi) * (1.0 - q.powf(k + 1.0)) / ((k + 1.0) * (1.0 - q))
            }
        };
        let moment = match self.spec.form() {
            JointForm::Atoms(atoms) => atoms.iter().map(|a| a.weight * rel(a.s)).sum(),
            JointForm::Product { variance, .. } | JointForm::Coupled { variance, .. } => law_moment(variance),
            JointForm::Density(_) => 1.0,
        };
        sphere_area(n) * r.tail * moment
    }

    fn mass_quadrature_1d(&self) -> Result<Estimate> {
        let (core, reach, compact) = self.extent();
        let first_err = std::cell::RefCell::new(None::<String>);
        let kf = |x: f64| match self.eval(&[x]) {
            Ok(v) => v,
            Err(e) => {
                first_err.borrow_mut().get_or_insert(e.to_string());
                f64::NAN
            }
        };
        let mut br = vec![0.0];
        match self.spec.form() {
            JointForm::Product { mean: MeanLaw::Dirac(y), .. } => br.push(y[0]),
            JointForm::Product { mean: MeanLaw::Discrete(p), .. } => br.extend(p.iter().map(|p| p.0[0])),
            JointForm::Product { mean: MeanLaw::PowerSingular { length, .. }, .. } => br.push(*length),
            JointForm::Product { mean: MeanLaw::UniformBall { radius }, .. } => br.extend([*radius, -radius]),
            JointForm::Density(d) => {
                let r = d.support().1;
                br.extend([r, -r]);
            }
            _ => {}
        }
        let mut total = integrate_with_breaks(kf, -core, core, &br, MASS);
        if !compact && reach > core {
            for sign in [-1.0, 1.0] {
                let far = integrate(
                    |v| {
                        let x = v.exp();
                        kf(sign * x) * x
                    },
                    core.ln(),
                    reach.ln(),
                    MASS,
                );
                total.value += far.value;
                total.error += far.error;
            }
            total.value += self.profile_tail();
        }
        if let Some(e) = first_err.into_inner() {
            return Err(Error::Unsupported(e));
        }
        Ok(Estimate::exact(total.value))
    }

    fn mass_quadrature_radial(&self, c: &[f64]) -> Result<Estimate> {
        let (core0, reach0, compact) = self.extent();
        let shift = norm(c);
        let (core, reach) = (core0 + shift, reach0 + shift);
        let w = sphere_area(self.dimension());
        let eval_at = |rho: f64| -> f64 {
            let mut x = c.to_vec();
            x[0] += rho;
            self.eval(&x).unwrap_or(f64::NAN)
        };
        let (_, y_max) = self.spec.support_bounds();
        let mut total = integrate_with_breaks(|r| w * r * eval_at(r), 0.0, core, &[y_max], MASS);
        if !compact && reach > core {
            let far = integrate(
                |v| {
                    let r = v.exp();
                    w * r * eval_at(r) * r
                },
                core.ln(),
                reach.ln(),
                MASS,
            );
            total.value += far.value;
            total.value += self.profile_tail();
        }
        if !total.value.is_finite() {
            return Err(Error::Unsupported("kernel mass quadrature produced a non-finite value".into()));
        }
        Ok(Estimate::exact(total.value))
    }

    /// `ψ` with `K(x) = ψ(|x|)` when the shift is identically zero.
    pub fn radial_reduction(&self) -> Result<RadialKernel> {
        if !self.spec.mean_is_zero() {
            return Err(Error::Unsupported("radial reduction needs a zero shift".into()));
        }
        let variance = match self.spec.form() {
            JointForm::Atoms(atoms) => ScalarLaw::Discrete(atoms.iter().map(|a| (a.s, a.weight)).collect()),
            JointForm::Product { variance, .. } | JointForm::Coupled { variance, .. } => variance.clone(),
            JointForm::Density(_) => unreachable!("density forms never have a zero shift"),
        };
        if variance.is_zero() {
            return Err(Error::PureTranslation);
        }
        Ok(RadialKernel {
            profile: self.profile.clone(),
            variance,
            reach: self.reach,
        })
    }

    /// `G(t) = ∫∫ F((t − y)/s) dΠ(s, y)` in one dimension, where `F` is the
    /// distribution function of `φ(|·|)`; for `s = 0` the step `m·1(t > y)`.
    /// Cell masses of `K` are increments of `G`.
    pub fn cumulative_1d(&self, t: f64) -> Result<f64> {
        if self.dimension() != 1 {
            return Err(Error::Unsupported("cumulative kernel is one-dimensional".into()));
        }
        let m = self.profile_mass;
        let f = |u: f64| self.profile.cdf_1d(u);
        let step = |t: f64, y: f64, s: f64| -> f64 {
            if s > 0.0 {
                f((t - y) / s)
            } else if t > y {
                m
            } else if t < y {
                0.0
            } else {
                0.5 * m
            }
        };
        let (ps, py) = self.panels();
        let pb = self.breaks();
        Ok(match self.spec.form() {
            JointForm::Atoms(atoms) => atoms.iter().map(|a| a.weight * step(t, a.y[0], a.s)).sum(),
            JointForm::Product { variance, mean } => {
                let g = |s: f64| -> f64 {
                    match mean {
                        MeanLaw::Dirac(y) => step(t, y[0], s),
                        MeanLaw::Discrete(p) => p.iter().map(|(y, w)| w * step(t, y[0], s)).sum(),
                        _ if s == 0.0 => m * mean.cdf_1d(t),
                        MeanLaw::UniformBall { radius } => {
                            let mut br = vec![t];
                            br.extend(pb.iter().flat_map(|&b| [t - s * b, t + s * b]));
                            integrate_panels(|y| f((t - y) / s), -radius, *radius, &br, py, INNER).value
                                / (2.0 * radius)
                        }
                        MeanLaw::PowerSingular { .. } => {
                            let mut br = vec![mean.cdf_1d(t)];
                            br.extend(pb.iter().flat_map(|&b| [mean.cdf_1d(t - s * b), mean.cdf_1d(t + s * b)]));
                            integrate_panels(|q| f((t - mean.quantile_1d(q)) / s), 0.0, 1.0, &br, py, INNER).value
                        }
                    }
                };
                let ys: Vec<f64> = match mean {
                    MeanLaw::Dirac(y) => vec![(t - y[0]).abs()],
                    MeanLaw::Discrete(p) => p.iter().map(|(y, _)| (t - y[0]).abs()).collect(),
                    MeanLaw::UniformBall { radius } => vec![(t - radius).abs(), (t + radius).abs()],
                    MeanLaw::PowerSingular { length, .. } => vec![t.abs(), (t - length).abs()],
                };
                self.outer(variance, g, &self.scale_breaks(&ys))
            }
            JointForm::Coupled { variance, coupling } => {
                let c = coupling.constant();
                let g = |s: f64| -> f64 {
                    if s == 0.0 || c == 0.0 {
                        return step(t, 0.0, s);
                    }
                    match coupling {
                        Coupling::Sphere { .. } => 0.5 * (f(t / s - c) + f(t / s + c)),
                        Coupling::Ball { .. } => {
                            let br: Vec<f64> = pb.iter().flat_map(|&b| [(t / s - b) / c, (t / s + b) / c]).collect();
                            0.5 * integrate_with_breaks(|u| f(t / s - c * u), -1.0, 1.0, &br, INNER).value
                        }
                    }
                };
                let mut ds = vec![t.abs()];
                ds.extend(pb.iter().flat_map(|&b| [t.abs() / (c + b) * b, t.abs() / (c - b).abs() * b]));
                self.outer(variance, g, &self.scale_breaks(&ds))
            }
            JointForm::Density(d) => {
                let (sm, r) = d.support();
                let inner = |s: f64| {
                    let mut br = vec![t, 0.0];
                    br.extend(pb.iter().flat_map(|&b| [t - s * b, t + s * b]));
                    integrate_panels(|y| d.eval(s, &[y]) * f((t - y) / s), -r, r, &br, py, INNER).value
                };
                let sb = self.scale_breaks(&[(t - r).abs(), (t + r).abs(), t.abs()]);
                integrate_panels(inner, 0.0, sm, &sb, ps, OUTER).value
            }
        })
    }

    /// Whether [`cumulative_2d`](Self::cumulative_2d) handles this law:
    /// atoms, point or discrete shifts, and sphere couplings in the plane.
    pub fn has_cumulative_2d(&self) -> bool {
        self.dimension() == 2
            && match self.spec.form() {
                JointForm::Atoms(_) => true,
                JointForm::Product { mean, .. } => matches!(mean, MeanLaw::Dirac(_) | MeanLaw::Discrete(_)),
                JointForm::Coupled { coupling, .. } => {
                    matches!(coupling, Coupling::Sphere { .. }) || coupling.constant() == 0.0
                }
                JointForm::Density(_) => false,
            }
    }

    /// `G(t) = ∫∫ Q((t − y)/s) dΠ(s, y)` in the plane, where `Q` is the
    /// oriented quadrant mass of `φ(|·|)` from the origin; for `s = 0` it is
    /// `m/4` times the product of the coordinate signs. Rectangle masses of
    /// `K` are four-corner differences of `G`.
    pub fn cumulative_2d(&self, t: [f64; 2]) -> Result<f64> {
        if !self.has_cumulative_2d() {
            return Err(Error::Unsupported(
                "planar cumulative kernel needs atoms, a discrete shift or a sphere coupling".into(),
            ));
        }
        if let JointForm::Atoms(atoms) = self.spec.form() {
            let m = self.profile_mass;
            return Ok(atoms
                .iter()
                .filter(|a| a.weight > 0.0)
                .map(|a| {
                    let v = [t[0] - a.y[0], t[1] - a.y[1]];
                    let q = if a.s > 0.0 {
                        self.profile.quadrant_mass(v[0] / a.s, v[1] / a.s)
                    } else {
                        0.25 * m * sign(v[0]) * sign(v[1])
                    };
                    a.weight * q
                })
                .sum());
        }
        let p = self.planar_radial()?;
        Ok(p.centers
            .iter()
            .map(|(y, w)| w * quadrant_from_radial(t[0] - y[0], t[1] - y[1], &p.radii, |r| p.mass(r)))
            .sum())
    }

    /// Builds the planar mass profile before parallel use.
    pub fn prepare_planar(&self) -> Result<()> {
        if self.has_cumulative_2d() && !matches!(self.spec.form(), JointForm::Atoms(_)) {
            self.planar_radial()?;
        }
        Ok(())
    }

    fn planar_radial(&self) -> Result<&PlanarRadial> {
        if let Some(p) = self.planar.get() {
            return Ok(p);
        }
        let built = self.build_planar_radial()?;
        Ok(self.planar.get_or_init(|| built))
    }

    /// `K = Σ w_k ψ(|· − y_k|)` for a point or discrete shift, or `ψ(|·|)` for
    /// a sphere coupling, where for fixed `s` the law is a zero-shift kernel
    /// whose profile is φ averaged over the circle of radius `c s`.
    fn build_planar_radial(&self) -> Result<PlanarRadial> {
        let (variance, centers, c) = match self.spec.form() {
            JointForm::Product { variance, mean: MeanLaw::Dirac(y) } => (variance, vec![([y[0], y[1]], 1.0)], 0.0),
            JointForm::Product { variance, mean: MeanLaw::Discrete(p) } => (
                variance,
                p.iter().filter(|p| p.1 > 0.0).map(|(y, w)| ([y[0], y[1]], *w)).collect(),
                0.0,
            ),
            JointForm::Coupled { variance, coupling } => (variance, vec![([0.0, 0.0], 1.0)], coupling.constant()),
            _ => unreachable!("checked by has_cumulative_2d"),
        };
        // radii where the base profile of one scale changes character
        let mut base_radii = self.breaks();
        if c > 0.0 {
            base_radii = base_radii
                .iter()
                .flat_map(|&b| [b + c, (b - c).abs()])
                .chain([c])
                .collect();
        }
        base_radii.retain(|r| *r > 0.0);
        let base = |u: f64| {
            if c == 0.0 {
                self.profile.planar_radial_mass(u)
            } else {
                self.profile.circle_averaged_radial_mass(c, u)
            }
        };
        let total = self.profile_mass / (2.0 * PI);
        let scales: Vec<f64> = match variance {
            ScalarLaw::Dirac(v) => vec![*v],
            ScalarLaw::Discrete(p) => p.iter().filter(|p| p.1 > 0.0).map(|p| p.0).collect(),
            ScalarLaw::Uniform { lo, hi } => vec![*lo, *hi],
        };
        let radii = positive(scales.iter().flat_map(|&s| base_radii.iter().map(move |b| b * s)));
        let kind = match variance {
            ScalarLaw::Uniform { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                let tol = Tolerance::new(1e-15, 1e-13);
                let mass = |r: f64| {
                    let mut br: Vec<f64> = base_radii.iter().map(|b| r / b).collect();
                    br.extend([0.5 * r, r, 2.0 * r]);
                    integrate_with_breaks(|s| base(r / s), lo, hi, &br, tol).value / (hi - lo)
                };
                let r_min = 1e-10 * hi;
                let r_max = match self.profile.support_radius() {
                    Some(b) => (b + c) * hi,
                    None => {
                        let mut r = 8.0 * hi * base_radii.iter().fold(1.0, |a: f64, b| a.max(*b));
                        while total - mass(r) > 1e-14 * total && r < 1e15 * hi {
                            r *= 8.0;
                        }
                        r
                    }
                };
                let logs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
                let table = Chebyshev::build(|x| mass(x.exp()), r_min.ln(), r_max.ln(), &logs, 1e-13);
                MassKind::Table { table, r_min, r_max, at_min: mass(r_min) }
            }
            _ => MassKind::Sum(
                match variance {
                    ScalarLaw::Dirac(v) => vec![(*v, 1.0)],
                    ScalarLaw::Discrete(p) => p.iter().filter(|p| p.1 > 0.0).copied().collect(),
                    ScalarLaw::Uniform { .. } => unreachable!(),
                },
                c,
            ),
        };
        let mut radii = radii;
        radii.extend(scales.iter().filter(|s| **s > 0.0));
        Ok(PlanarRadial {
            centers,
            radii,
            kind,
            total,
            profile: self.profile.clone(),
        })
    }
}

/// Planar radial mass `M(r) = ∫₀^r ρ ψ(ρ) dρ` of the radial part of a kernel
/// that is a finite mixture of translates of `ψ(|·|)`.
#[derive(Clone, Debug)]
struct PlanarRadial {
    centers: Vec<([f64; 2], f64)>,
    /// Radii where ψ changes character; angular breaks for quadrant masses.
    radii: Vec<f64>,
    kind: MassKind,
    total: f64,
    profile: Profile,
}

#[derive(Clone, Debug)]
enum MassKind {
    /// `Σ w M_base(r / s)` over dilation atoms, with the circle radius `c`.
    Sum(Vec<(f64, f64)>, f64),
    /// Interpolated in `ln r` on `[r_min, r_max]`; linear below, total above.
    Table { table: Chebyshev, r_min: f64, r_max: f64, at_min: f64 },
}

impl PlanarRadial {
    fn mass(&self, r: f64) -> f64 {
        match &self.kind {
            MassKind::Sum(atoms, c) => atoms
                .iter()
                .map(|&(s, w)| {
                    let u = if s > 0.0 { r / s } else { f64::INFINITY };
                    let m = if *c == 0.0 {
                        self.profile.planar_radial_mass(u)
                    } else {
                        self.profile.circle_averaged_radial_mass(*c, u)
                    };
                    w * m
                })
                .sum(),
            MassKind::Table { table, r_min, r_max, at_min } => {
                if r >= *r_max {
                    self.total
                } else if r <= *r_min {
                    at_min * r / r_min
                } else {
                    table.eval(r.ln())
                }
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum()
    }
}

/// `ψ(t) = ∫ s^{-n} φ(t / s) dν(s)`, computed through `u = t / s`:
/// `ψ(t) = t^{1-n} ∫ u^{n-2} φ(u) p(t/u) du` for a dilation density `p`.
#[derive(Clone, Debug)]
pub struct RadialKernel {
    profile: Profile,
    variance: ScalarLaw,
    reach: f64,
}

impl RadialKernel {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.profile.dimension() as i32;
        let t = t.abs();
        match &self.variance {
            ScalarLaw::Dirac(v) => v.powi(-n) * self.profile.evaluate(t / v),
            ScalarLaw::Discrete(pts) => pts
                .iter()
                .filter(|p| p.1 > 0.0)
                .map(|&(v, w)| w * v.powi(-n) * self.profile.evaluate(t / v))
                .sum(),
            ScalarLaw::Uniform { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                if t == 0.0 {
                    let p0 = self.profile.evaluate(0.0);
                    if p0 == 0.0 {
                        return 0.0;
                    }
                    if lo == 0.0 {
                        return f64::INFINITY;
                    }
                    let integral = if n == 1 {
                        (hi / lo).ln()
                    } else {
                        (lo.powi(1 - n) - hi.powi(1 - n)) / f64::from(n - 1)
                    };
                    return p0 * integral / (hi - lo);
                }
                let a = t / hi;
                let b = if lo > 0.0 { t / lo } else { f64::INFINITY };
                let inner = if n == 2 {
                    self.profile.radial_primitive(b) - self.profile.radial_primitive(a)
                } else {
                    self.log_moment(a, b, n - 1)
                };
                t.powi(1 - n) * inner / (hi - lo)
            }
        }
    }

    /// `∫_a^b u^{k-1} φ(u) du` in the variable `v = ln u`.
    fn log_moment(&self, a: f64, b: f64, k: i32) -> f64 {
        let b = b.min(self.reach);
        if a >= b {
            return 0.0;
        }
        let br: Vec<f64> = self.profile.breakpoints().iter().map(|x| x.ln()).collect();
        integrate_with_breaks(
            |v| {
                let u = v.exp();
                u.powi(k) * self.profile.evaluate(u)
            },
            a.ln(),
            b.ln(),
            &br,
            Tolerance::new(1e-15, 1e-12),
        )
        .value
    }
}

/// Outcome of [`translation_only_apply`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslationValue {
    pub value: f64,
    /// Some shifted point fell outside the grid box and read as zero.
    pub extended: bool,
}

/// `∫ f(x − y) dμ(y)` for a pure-translation law, with `f` the piecewise
/// constant reconstruction of the grid samples (zero outside the box).
///
/// Atoms sum exactly; one-dimensional continuous laws integrate each cell
/// exactly through the distribution function; disk-uniform laws in the plane
/// integrate cell-disk overlaps.
pub fn translation_only_apply(spec: &JointDistributionSpec, f: &GridFunction, x: &[f64]) -> Result<TranslationValue> {
    if !spec.is_pure_translation() {
        return Err(Error::Unsupported("translation-only application needs a zero dilation".into()));
    }
    let n = spec.dimension();
    if f.dimension() != n || x.len() != n {
        return Err(invalid("dimension mismatch between law, function and point"));
    }
    let atoms_value = |pts: &[(Vec<f64>, f64)]| {
        let mut extended = false;
        let mut v = 0.0;
        for (y, w) in pts {
            let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            extended |= !f.contains(&z);
            v += w * f.value_at(&z);
        }
        TranslationValue { value: v, extended }
    };
    let mean = match spec.form() {
        JointForm::Atoms(atoms) => {
            let pts: Vec<(Vec<f64>, f64)> = atoms.iter().map(|a| (a.y.clone(), a.weight)).collect();
            return Ok(atoms_value(&pts));
        }
        JointForm::Coupled { .. } => return Ok(atoms_value(&[(vec![0.0; n], 1.0)])),
        JointForm::Product { mean, .. } => mean,
        JointForm::Density(_) => unreachable!("density forms are never pure translations"),
    };
    match mean {
        MeanLaw::Dirac(y) => Ok(atoms_value(&[(y.clone(), 1.0)])),
        MeanLaw::Discrete(pts) => Ok(atoms_value(pts)),
        MeanLaw::UniformBall { .. } | MeanLaw::PowerSingular { .. } if n == 1 => {
            let (ylo, yhi) = match mean {
                MeanLaw::UniformBall { radius } => (-radius, *radius),
                MeanLaw::PowerSingular { length, .. } => (0.0, *length),
                _ => unreachable!(),
            };
            let x0 = x[0];
            let (lo, hi) = (f.lower()[0], f.upper()[0]);
            let extended = x0 - yhi < lo || x0 - ylo > hi;
            let h = f.pitch()[0];
            let res = f.resolution()[0];
            let k0 = (((x0 - yhi - lo) / h).floor().max(0.0) as usize).min(res);
            let k1 = (((x0 - ylo - lo) / h).ceil().max(0.0) as usize).min(res);
            let mut v = 0.0;
            for k in k0..k1 {
                let a = lo + k as f64 * h;
                let b = lo + (k + 1) as f64 * h;
                let w = mean.cdf_1d(x0 - a) - mean.cdf_1d(x0 - b);
                v += f.samples()[k] * w;
            }
            Ok(TranslationValue { value: v, extended })
        }
        MeanLaw::UniformBall { radius } if n == 2 => {
            let r = *radius;
            let (lo, hi, h, res) = (f.lower(), f.upper(), f.pitch(), f.resolution());
            let extended = (0..2).any(|i| x[i] - r < lo[i] || x[i] + r > hi[i]);
            let range = |i: usize| {
                let a = (((x[i] - r - lo[i]) / h[i]).floor().max(0.0) as usize).min(res[i]);
                let b = (((x[i] + r - lo[i]) / h[i]).ceil().max(0.0) as usize).min(res[i]);
                a..b
            };
            let mut v = 0.0;
            for i in range(0) {
                for k in range(1) {
                    let ax = lo[0] + i as f64 * h[0] - x[0];
                    let ay = lo[1] + k as f64 * h[1] - x[1];
                    let area = disk_rect_area(r, ax, ax + h[0], ay, ay + h[1]);
                    v += f.samples()[i * res[1] + k] * area;
                }
            }
            Ok(TranslationValue { value: v / (PI * r * r), extended })
        }
        _ => Err(Error::Unsupported("translation-only application for this shift law".into())),
    }
}

/// Area of `[x0, x1] × [y0, y1] ∩ B(0, r)`.
fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (a, b) = (x0.max(-r), x1.min(r));
    if a >= b {
        return 0.0;
    }
    let chord = |t: f64| {
        let h = (r * r - t * t).max(0.0).sqrt();
        (y1.min(h) - y0.max(-h)).max(0.0)
    };
    let mut br = Vec::new();
    for y in [y0, y1] {
        if y.abs() < r {
            let t = (r * r - y * y).sqrt();
            br.extend([t, -t]);
        }
    }
    integrate_with_breaks(chord, a, b, &br, Tolerance::new(1e-16, 1e-12)).value
}

/// Kernel for `Π_j(E) = Π_1(jE)`, built by pushing the law forward
/// rather than by rescaling evaluations, so `K_j(x) = jⁿ K_1(jx)` can be
/// compared with both sides computed independently. Real `j ≥ 1` is allowed.
pub fn scale_self_similar(k1: &AveragedKernel, j: f64) -> Result<AveragedKernel> {
    if !(j.is_finite() && j >= 1.0) {
        return Err(invalid(format!("scaling index must be >= 1, got {j}")));
    }
    let spec = k1.spec.dilate(j);
    AveragedKernel::new(k1.profile.clone(), spec, k1.strategy)
}
