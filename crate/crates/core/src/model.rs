//! Two-level Floquet models and their truncated Floquet operators.
//!
//! A model is fixed by its closed-form eigenvalues
//! `lambda_{+-,k} = k w +- (eta(w) + w)/2`, `eta(w) = sqrt((w - omega0)^2 + Omega^2)`,
//! where `w = varpi(s)` is the effective frequency, and by the phase functions
//! `x(theta)`, `y(theta)` of its eigenvectors
//!
//! ```text
//! psi_{+,m} = ( e^{ix} cos z, e^{iy} sin z ) e^{i m theta}
//! psi_{-,k} = (-e^{-iy} sin z, e^{-ix} cos z ) e^{i k theta}
//! ```
//!
//! with `cos 2z = -(w - omega0)/eta`, `sin 2z = Omega/eta`. Two presets are
//! provided: the RWA model (`x = 0`, `y = theta`) and the phase-modulated
//! model (`x = -rho sin(theta)/2`, `y = theta - rho sin(theta)/2`).
//!
//! Operators live in the truncated Fourier basis `(component) x (mode)` with
//! modes `-N..=N`; the `up` component block comes first.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j, bessel_j_signed, BesselDomainError};
use crate::linalg::{CMatrix, CVector};
use crate::{lit, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite slow time s = {0}")]
    NonFiniteTime(f64),
    #[error("mode {mode} outside the truncation window -{n}..={n}")]
    ModeOutOfWindow { mode: i64, n: usize },
    #[error(transparent)]
    Bessel(#[from] BesselDomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Rwa,
    Modified,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Rwa => "rwa",
            Preset::Modified => "modified",
        })
    }
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rwa" => Ok(Preset::Rwa),
            "modified" => Ok(Preset::Modified),
            other => Err(format!("unknown preset `{other}` (expected rwa|modified)")),
        }
    }
}

/// Eigenvalue branch `+` or `-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        })
    }
}

/// Two-level component of the Floquet basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Up,
    Down,
}

/// Effective frequency `varpi(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Chirp<T> {
    /// `varpi(s) = s`.
    #[default]
    Identity,
    /// `varpi(s) = slope * s + offset`.
    Affine { slope: T, offset: T },
    /// Frozen frequency; used to hold the operator fixed in time.
    Constant { value: T },
}

impl<T: Real> Chirp<T> {
    pub fn value(&self, s: T) -> T {
        match *self {
            Chirp::Identity => s,
            Chirp::Affine { slope, offset } => slope * s + offset,
            Chirp::Constant { value } => value,
        }
    }

    pub fn derivative(&self, _s: T) -> T {
        match *self {
            Chirp::Identity => T::one(),
            Chirp::Affine { slope, .. } => slope,
            Chirp::Constant { .. } => T::zero(),
        }
    }

    /// Antiderivative vanishing at `s = 0`.
    pub fn integral(&self, s: T) -> T {
        let half = T::one() / (T::one() + T::one());
        match *self {
            Chirp::Identity => half * s * s,
            Chirp::Affine { slope, offset } => half * slope * s * s + offset * s,
            Chirp::Constant { value } => value * s,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Chirp::Identity)
    }
}

/// Phase-modulation amplitude `rho(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoProfile<T> {
    Constant(T),
    /// `rho(s) = value + slope * s`.
    Linear {
        value: T,
        slope: T,
    },
}

impl<T: Real> RhoProfile<T> {
    pub fn value(&self, s: T) -> T {
        match *self {
            RhoProfile::Constant(v) => v,
            RhoProfile::Linear { value, slope } => value + slope * s,
        }
    }

    pub fn derivative(&self, _s: T) -> T {
        match *self {
            RhoProfile::Constant(_) => T::zero(),
            RhoProfile::Linear { slope, .. } => slope,
        }
    }
}

impl<T: Real> Default for RhoProfile<T> {
    fn default() -> Self {
        RhoProfile::Constant(T::zero())
    }
}

/// Parameters of one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de> + num_traits::Zero"))]
pub struct ModelSpec<T> {
    pub omega0: T,
    #[serde(rename = "Omega", alias = "omega_rabi")]
    pub omega_rabi: T,
    #[serde(default = "zero_rho")]
    pub rho: RhoProfile<T>,
    #[serde(default)]
    pub chirp: Chirp<T>,
    pub kind: Preset,
    pub n_modes: usize,
    /// Number of theta samples; `0` selects [`ModelSpec::default_theta_grid`].
    #[serde(default)]
    pub theta_grid: usize,
}

fn zero_rho<T: num_traits::Zero>() -> RhoProfile<T> {
    RhoProfile::Constant(T::zero())
}

impl<T: Real> ModelSpec<T> {
    pub fn rwa(omega0: T, omega_rabi: T, n_modes: usize) -> Self {
        ModelSpec {
            omega0,
            omega_rabi,
            rho: RhoProfile::Constant(T::zero()),
            chirp: Chirp::Identity,
            kind: Preset::Rwa,
            n_modes,
            theta_grid: Self::default_theta_grid(n_modes),
        }
    }

    pub fn modified(omega0: T, omega_rabi: T, rho0: T, n_modes: usize) -> Self {
        ModelSpec { kind: Preset::Modified, rho: RhoProfile::Constant(rho0), ..Self::rwa(omega0, omega_rabi, n_modes) }
    }

    pub fn preset(kind: Preset, omega0: T, omega_rabi: T, rho0: T, n_modes: usize) -> Self {
        match kind {
            Preset::Rwa => Self::rwa(omega0, omega_rabi, n_modes),
            Preset::Modified => Self::modified(omega0, omega_rabi, rho0, n_modes),
        }
    }

    pub fn with_chirp(mut self, chirp: Chirp<T>) -> Self {
        self.chirp = chirp;
        self
    }

    pub fn with_rho(mut self, rho: RhoProfile<T>) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_theta_grid(mut self, m: usize) -> Self {
        self.theta_grid = m;
        self
    }

    /// `max(4N + 4, 256)`.
    pub fn default_theta_grid(n_modes: usize) -> usize {
        (4 * n_modes + 4).max(256)
    }

    /// Dimension `2(2N + 1)` of the truncated Floquet space.
    pub fn dim(&self) -> usize {
        2 * (2 * self.n_modes + 1)
    }

    /// `rho(s)`, identically zero for the RWA preset.
    pub fn rho_at(&self, s: T) -> T {
        match self.kind {
            Preset::Rwa => T::zero(),
            Preset::Modified => self.rho.value(s),
        }
    }

    pub fn rho_prime_at(&self, s: T) -> T {
        match self.kind {
            Preset::Rwa => T::zero(),
            Preset::Modified => self.rho.derivative(s),
        }
    }

    /// Fills in defaults (theta grid) and checks every invariant.
    pub fn resolved(mut self) -> Result<Self, ModelError> {
        if self.theta_grid == 0 {
            self.theta_grid = Self::default_theta_grid(self.n_modes);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidSpec(msg));
        if !self.omega0.is_finite() {
            return bad("omega0 must be finite".into());
        }
        if !(self.omega_rabi.is_finite() && self.omega_rabi > T::zero()) {
            return bad(format!("Omega must be finite and > 0, got {}", self.omega_rabi));
        }
        if self.n_modes < 1 && self.kind == Preset::Modified {
            return bad("modified preset needs n_modes >= 1".into());
        }
        if self.theta_grid < 4 * self.n_modes + 4 {
            return bad(format!("theta_grid {} < 4N+4 = {}", self.theta_grid, 4 * self.n_modes + 4));
        }
        match self.chirp {
            Chirp::Identity => {}
            Chirp::Affine { slope, offset } => {
                if !(slope.is_finite() && offset.is_finite()) || slope == T::zero() {
                    return bad("affine chirp needs finite, nonzero slope".into());
                }
            }
            Chirp::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant chirp must be finite".into());
                }
            }
        }
        if self.kind == Preset::Modified {
            let (r0, r1) = match self.rho {
                RhoProfile::Constant(v) => (v, T::zero()),
                RhoProfile::Linear { value, slope } => (value, slope),
            };
            if !(r0.is_finite() && r1.is_finite()) {
                return bad("rho must be finite".into());
            }
            let amp = crate::to_f64(r0.abs());
            if amp > crate::bessel::MAX_ARGUMENT {
                return bad(format!("|rho| = {amp} too large"));
            }
            // Aliasing: the eigenvector phase e^{-i rho sin(theta)/2} has
            // Fourier weights J_n(rho/2); those folded back into |n| <= 2N
            // must be negligible.
            let fold = self.theta_grid as i64 - 2 * self.n_modes as i64;
            if fold <= crate::bessel::MAX_ORDER {
                let tail = bessel_j(fold.max(0), amp / 2.0)?.abs();
                if tail > 1e-12 {
                    return bad(format!("theta_grid {} aliases rho = {amp} (tail {tail:e})", self.theta_grid));
                }
            }
        }
        Ok(())
    }
}

/// `cos 2z`, `sin 2z`, `z` and `dz/ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingAngle<T> {
    pub cos2z: T,
    pub sin2z: T,
    pub z: T,
    pub z_prime: T,
}

/// Truncated Floquet operator `K(s)`.
#[derive(Debug, Clone)]
pub struct FloquetOperator<T: Real> {
    pub s: T,
    pub n_modes: usize,
    pub matrix: CMatrix<T>,
}

impl<T: Real> FloquetOperator<T> {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_residual(&self) -> T {
        crate::linalg::hermiticity_residual(&self.matrix)
    }

    /// Largest Fourier shift `|m - m'|` carried by a nonzero entry.
    pub fn bandwidth(&self) -> usize {
        let width = 2 * self.n_modes + 1;
        let mut band = 0;
        for (idx, z) in self.matrix.iter().enumerate() {
            if crate::cabs(*z) != T::zero() {
                let (r, c) = (idx % self.dim(), idx / self.dim());
                let (mr, mc) = ((r % width) as i64, (c % width) as i64);
                band = band.max((mr - mc).unsigned_abs() as usize);
            }
        }
        band
    }
}

/// Eigenvector from the closed form, in the truncated basis.
#[derive(Debug, Clone)]
pub struct ExactEigenvector<T: Real> {
    pub branch: Branch,
    pub mode: i64,
    pub value: T,
    /// Unit-norm coefficients.
    pub vector: CVector<T>,
    /// Squared norm of the Fourier coefficients that fell outside the window.
    pub truncation_loss: T,
}

impl<T: Real> ExactEigenvector<T> {
    pub const LOSS_WARNING: f64 = 1e-10;

    pub fn truncation_warning(&self) -> bool {
        crate::to_f64(self.truncation_loss) > Self::LOSS_WARNING
    }
}

/// Eigenvector and its slow-time derivative.
#[derive(Debug, Clone)]
pub struct EigenvectorJet<T: Real> {
    pub psi: CVector<T>,
    pub dpsi: CVector<T>,
    pub truncation_loss: T,
}

/// Validated model together with its theta-grid FFT plan. Cheap to clone and
/// safe to share between threads.
#[derive(Clone)]
pub struct FloquetModel<T: Real> {
    spec: ModelSpec<T>,
    fft: Arc<dyn Fft<T>>,
    sin: Arc<Vec<T>>,
    cos: Arc<Vec<T>>,
}

impl<T: Real> fmt::Debug for FloquetModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FloquetModel").field("spec", &self.spec).finish()
    }
}

/// Samples of the followed-state phase functions on the grid.
struct Phases<T> {
    x: T,
    y: T,
    x_theta: T,
    y_theta: T,
    x_s: T,
    y_s: T,
}

impl<T: Real> FloquetModel<T> {
    pub fn new(spec: ModelSpec<T>) -> Result<Self, ModelError> {
        let spec = spec.resolved()?;
        let m = spec.theta_grid;
        let fft = FftPlanner::new().plan_fft_forward(m);
        let two_pi = T::two_pi();
        let (sin, cos): (Vec<T>, Vec<T>) = (0..m)
            .map(|j| {
                let th = two_pi * lit::<T>(j as f64) / lit::<T>(m as f64);
                (th.sin(), th.cos())
            })
            .unzip();
        Ok(FloquetModel { spec, fft, sin: Arc::new(sin), cos: Arc::new(cos) })
    }

    pub fn spec(&self) -> &ModelSpec<T> {
        &self.spec
    }

    pub fn n_modes(&self) -> usize {
        self.spec.n_modes
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Basis index of `(component, mode)`, if the mode is inside the window.
    pub fn index(&self, component: Component, mode: i64) -> Option<usize> {
        let n = self.spec.n_modes as i64;
        if mode.abs() > n {
            return None;
        }
        let offset = match component {
            Component::Up => 0,
            Component::Down => (2 * n + 1) as usize,
        };
        Some(offset + (mode + n) as usize)
    }

    /// Fourier mode of a basis index.
    pub fn mode_of(&self, index: usize) -> i64 {
        let width = 2 * self.spec.n_modes + 1;
        (index % width) as i64 - self.spec.n_modes as i64
    }

    pub fn varpi(&self, s: T) -> T {
        self.spec.chirp.value(s)
    }

    pub fn varpi_prime(&self, s: T) -> T {
        self.spec.chirp.derivative(s)
    }

    /// `eta(varpi(s))`.
    pub fn eta(&self, s: T) -> T {
        let w = self.varpi(s);
        (w - self.spec.omega0).hypot(self.spec.omega_rabi)
    }

    /// `aleph = eta + varpi`, the splitting `lambda_{+,0} - lambda_{-,0}`.
    pub fn aleph(&self, s: T) -> T {
        self.eta(s) + self.varpi(s)
    }

    pub fn mixing_angle(&self, s: T) -> MixingAngle<T> {
        let w = self.varpi(s);
        let eta = self.eta(s);
        let detune = self.spec.omega0 - w;
        let half = lit::<T>(0.5);
        MixingAngle {
            cos2z: detune / eta,
            sin2z: self.spec.omega_rabi / eta,
            z: half * self.spec.omega_rabi.atan2(detune),
            z_prime: half * self.spec.omega_rabi * self.varpi_prime(s) / (eta * eta),
        }
    }

    /// `lambda_{branch,mode}(s) = mode * varpi +- (eta + varpi)/2`.
    pub fn eigenvalue(&self, s: T, branch: Branch, mode: i64) -> T {
        let w = self.varpi(s);
        lit::<T>(mode as f64) * w + lit::<T>(0.5 * branch.sign()) * (self.eta(s) + w)
    }

    fn check_time(&self, s: T) -> Result<(), ModelError> {
        if s.is_finite() {
            Ok(())
        } else {
            Err(ModelError::NonFiniteTime(crate::to_f64(s)))
        }
    }

    fn phases(&self, s: T, j: usize) -> Phases<T> {
        let half = lit::<T>(0.5);
        let th = T::two_pi() * lit::<T>(j as f64) / lit::<T>(self.spec.theta_grid as f64);
        match self.spec.kind {
            Preset::Rwa => {
                Phases { x: T::zero(), y: th, x_theta: T::zero(), y_theta: T::one(), x_s: T::zero(), y_s: T::zero() }
            }
            Preset::Modified => {
                let rho = self.spec.rho_at(s);
                let rho_s = self.spec.rho_prime_at(s);
                let (sn, cs) = (self.sin[j], self.cos[j]);
                Phases {
                    x: -half * rho * sn,
                    y: th - half * rho * sn,
                    x_theta: -half * rho * cs,
                    y_theta: T::one() - half * rho * cs,
                    x_s: -half * rho_s * sn,
                    y_s: -half * rho_s * sn,
                }
            }
        }
    }

    fn forward(&self, data: &mut [Complex<T>]) {
        self.fft.process(data);
        let inv = T::one() / lit::<T>(data.len() as f64);
        for z in data.iter_mut() {
            *z = z.scale(inv);
        }
    }

    fn coeff(data: &[Complex<T>], n: i64) -> Complex<T> {
        let m = data.len() as i64;
        data[n.rem_euclid(m) as usize]
    }

    /// Fourier coefficients of the `(1,1)` and `(1,2)` entries of `H(s, theta)`.
    fn h_coefficients(&self, s: T) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let m = self.spec.theta_grid;
        let w = self.varpi(s);
        let eta = self.eta(s);
        let angle = self.mixing_angle(s);
        let half = lit::<T>(0.5);
        let lambda = half * (eta + w);
        let mut h11 = vec![Complex::new(T::zero(), T::zero()); m];
        let mut h12 = h11.clone();
        for j in 0..m {
            let p = self.phases(s, j);
            let vx_theta = half * (p.x_theta + p.y_theta);
            let vy_theta = half * (p.y_theta - p.x_theta);
            let a = lambda - w * vx_theta;
            h11[j] = Complex::new(w * vy_theta + a * angle.cos2z, T::zero());
            // z is independent of theta for both presets.
            h12[j] = crate::polar(a * angle.sin2z, -(p.y - p.x));
        }
        self.forward(&mut h11);
        self.forward(&mut h12);
        (h11, h12)
    }

    /// Assembles `K(s) = -i varpi d/dtheta + H(s, theta)` in the truncated
    /// Fourier basis. Couplings leaving the window are dropped.
    pub fn assemble(&self, s: T) -> Result<FloquetOperator<T>, ModelError> {
        self.check_time(s)?;
        let n = self.spec.n_modes as i64;
        let dim = self.dim();
        let (c11, c12) = self.h_coefficients(s);
        let scale = c11.iter().chain(c12.iter()).map(|z| crate::cabs(*z)).fold(T::zero(), |a, b| a.max(b));
        let floor = T::default_epsilon() * lit::<T>(16.0) * scale;
        let clean = |z: Complex<T>| if crate::cabs(z) <= floor { Complex::new(T::zero(), T::zero()) } else { z };

        let w = self.varpi(s);
        let mut k = CMatrix::<T>::zeros(dim, dim);
        for m in -n..=n {
            for mp in -n..=n {
                let shift = m - mp;
                let up_m = self.index(Component::Up, m).unwrap();
                let dn_m = self.index(Component::Down, m).unwrap();
                let up_mp = self.index(Component::Up, mp).unwrap();
                let dn_mp = self.index(Component::Down, mp).unwrap();
                let a11 = clean(Self::coeff(&c11, shift));
                let a12 = clean(Self::coeff(&c12, shift));
                // h21 = conj(h12), h22 = -h11.
                let a21 = clean(Self::coeff(&c12, -shift).conj());
                k[(up_m, up_mp)] = a11;
                k[(dn_m, dn_mp)] = -a11;
                k[(up_m, dn_mp)] = a12;
                k[(dn_m, up_mp)] = a21;
            }
            let mw = Complex::new(lit::<T>(m as f64) * w, T::zero());
            k[(self.index(Component::Up, m).unwrap(), self.index(Component::Up, m).unwrap())] += mw;
            k[(self.index(Component::Down, m).unwrap(), self.index(Component::Down, m).unwrap())] += mw;
        }
        let half = lit::<T>(0.5);
        let sym = (&k + k.adjoint()).map(|z| z.scale(half));
        Ok(FloquetOperator { s, n_modes: self.spec.n_modes, matrix: sym })
    }

    /// Samples `psi_{branch,0}` (and optionally its s-derivative) on the grid.
    fn sample_eigenfunction(&self, s: T, branch: Branch, derivative: bool) -> [Vec<Complex<T>>; 2] {
        let m = self.spec.theta_grid;
        let angle = self.mixing_angle(s);
        let (sz, cz) = angle.z.sin_cos();
        let zp = angle.z_prime;
        let i = Complex::new(T::zero(), T::one());
        let mut up = Vec::with_capacity(m);
        let mut down = Vec::with_capacity(m);
        for j in 0..m {
            let p = self.phases(s, j);
            let ex = crate::polar(T::one(), p.x);
            let ey = crate::polar(T::one(), p.y);
            match (branch, derivative) {
                (Branch::Plus, false) => {
                    up.push(ex.scale(cz));
                    down.push(ey.scale(sz));
                }
                (Branch::Plus, true) => {
                    up.push(ex * (i.scale(p.x_s * cz) - Complex::new(zp * sz, T::zero())));
                    down.push(ey * (i.scale(p.y_s * sz) + Complex::new(zp * cz, T::zero())));
                }
                (Branch::Minus, false) => {
                    up.push(-ey.conj().scale(sz));
                    down.push(ex.conj().scale(cz));
                }
                (Branch::Minus, true) => {
                    up.push(-(ey.conj() * (Complex::new(zp * cz, T::zero()) - i.scale(p.y_s * sz))));
                    down.push(ex.conj() * (-i.scale(p.x_s * cz) - Complex::new(zp * sz, T::zero())));
                }
            }
        }
        [up, down]
    }

    /// Fourier coefficients of a sampled two-component function, shifted by
    /// `mode` and cut to the window. Returns the vector and the dropped mass.
    fn project(&self, mut samples: [Vec<Complex<T>>; 2], mode: i64) -> (CVector<T>, T) {
        let n = self.spec.n_modes as i64;
        let mut v = CVector::<T>::zeros(self.dim());
        let mut total = T::zero();
        for (comp, data) in [Component::Up, Component::Down].into_iter().zip(samples.iter_mut()) {
            self.forward(data);
            total += data.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b);
            for m in -n..=n {
                v[self.index(comp, m).unwrap()] = Self::coeff(data, m - mode);
            }
        }
        let kept = v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b);
        (v, (total - kept).max(T::zero()))
    }

    fn check_mode(&self, mode: i64) -> Result<(), ModelError> {
        if mode.unsigned_abs() as usize > self.spec.n_modes {
            Err(ModelError::ModeOutOfWindow { mode, n: self.spec.n_modes })
        } else {
            Ok(())
        }
    }

    /// `psi_{branch,mode}(s)` from the closed form, unit norm.
    pub fn exact_eigenvector(&self, s: T, branch: Branch, mode: i64) -> Result<ExactEigenvector<T>, ModelError> {
        self.check_time(s)?;
        self.check_mode(mode)?;
        let (v, loss) = self.project(self.sample_eigenfunction(s, branch, false), mode);
        let norm = crate::linalg::vec_norm(&v);
        Ok(ExactEigenvector {
            branch,
            mode,
            value: self.eigenvalue(s, branch, mode),
            vector: v.unscale(norm),
            truncation_loss: loss,
        })
    }

    /// `psi_{branch,mode}(s)` and its analytic s-derivative (derivative of the
    /// normalised truncated vector).
    pub fn eigenvector_jet(&self, s: T, branch: Branch, mode: i64) -> Result<EigenvectorJet<T>, ModelError> {
        self.check_time(s)?;
        self.check_mode(mode)?;
        let (v, loss) = self.project(self.sample_eigenfunction(s, branch, false), mode);
        let (dv, _) = self.project(self.sample_eigenfunction(s, branch, true), mode);
        let norm = crate::linalg::vec_norm(&v);
        let radial = crate::linalg::inner(&v, &dv).re;
        let psi = v.unscale(norm);
        let dpsi = dv.unscale(norm) - psi.scale(radial / (norm * norm));
        Ok(EigenvectorJet { psi, dpsi, truncation_loss: loss })
    }

    /// Closed-form non-adiabatic coupling
    /// `<psi_{+,0}(s) | d/ds psi_{-,k+1}(s)>`.
    pub fn coupling(&self, s: T, k: i64) -> Result<T, ModelError> {
        let zp = self.mixing_angle(s).z_prime;
        Ok(match self.spec.kind {
            Preset::Rwa => {
                if k == 0 {
                    -zp
                } else {
                    T::zero()
                }
            }
            Preset::Modified => {
                let sign = if (k + 1).rem_euclid(2) == 0 { T::one() } else { -T::one() };
                sign * zp * bessel_j_signed(k, self.spec.rho_at(s))?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, inner, max_abs, vec_norm};

    fn rwa(n: usize) -> FloquetModel<f64> {
        FloquetModel::new(ModelSpec::rwa(1.0, 1.0, n)).unwrap()
    }

    fn modified(n: usize, rho: f64) -> FloquetModel<f64> {
        FloquetModel::new(ModelSpec::modified(1.0, 1.0, rho, n)).unwrap()
    }

    #[test]
    fn rwa_single_mode_is_diagonal() {
        let k = rwa(0).assemble(0.3).unwrap();
        assert_eq!(k.dim(), 2);
        assert!((k.matrix[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((k.matrix[(1, 1)].re + 0.5).abs() < 1e-15);
        assert!(k.matrix[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn rwa_entries_closed_form() {
        let model = rwa(3);
        let s = 0.27;
        let k = model.assemble(s).unwrap();
        for m in -3..=3 {
            let u = model.index(Component::Up, m).unwrap();
            let d = model.index(Component::Down, m).unwrap();
            assert!((k.matrix[(u, u)].re - (m as f64 * s + 0.5)).abs() < 1e-14);
            assert!((k.matrix[(d, d)].re - (m as f64 * s - 0.5)).abs() < 1e-14);
            if m < 3 {
                let d1 = model.index(Component::Down, m + 1).unwrap();
                assert!((k.matrix[(u, d1)] - Complex::new(0.5, 0.0)).norm() < 1e-14);
            }
        }
        assert_eq!(k.bandwidth(), 1);
    }

    #[test]
    fn modified_entries_closed_form() {
        // K_M = K_RWA + (w/(2 eta)) rho cos(theta) [[w0 - w, Om e^{-i th}], [Om e^{i th}, w - w0]].
        let rho = 0.8;
        let model = modified(4, rho);
        let s = -0.35;
        let k = model.assemble(s).unwrap();
        let c = s * rho / (4.0 * model.eta(s));
        let up = |m| model.index(Component::Up, m).unwrap();
        let dn = |m| model.index(Component::Down, m).unwrap();
        assert!((k.matrix[(up(0), up(1))].re - c * (1.0 - s)).abs() < 1e-14);
        assert!((k.matrix[(dn(0), dn(-1))].re + c * (1.0 - s)).abs() < 1e-14);
        assert!((k.matrix[(up(0), dn(0))].re - c).abs() < 1e-14);
        assert!((k.matrix[(up(0), dn(2))].re - c).abs() < 1e-14);
        assert!((k.matrix[(up(0), dn(1))].re - 0.5).abs() < 1e-14);
        assert_eq!(k.bandwidth(), 2);
    }

    #[test]
    fn hermitian_for_many_times() {
        for model in [rwa(5), modified(5, 1.0), modified(6, 3.0)] {
            for &s in &[-0.9, -0.2, 0.0, 0.13, 0.77, 2.5] {
                let k = model.assemble(s).unwrap();
                assert!(k.hermiticity_residual() <= 1e-13 * max_abs(&k.matrix));
            }
        }
    }

    #[test]
    fn assembled_spectrum_matches_closed_form_interior() {
        let model = rwa(8);
        let s = 0.3;
        let (vals, _) = hermitian_eigen(&model.assemble(s).unwrap().matrix);
        for mode in -6..=6 {
            for b in [Branch::Plus, Branch::Minus] {
                let lam = model.eigenvalue(s, b, mode);
                let near = vals.iter().map(|v| (v - lam).abs()).fold(f64::INFINITY, f64::min);
                assert!(near <= 1e-10, "mode {mode} {b}: {near:e}");
            }
        }
    }

    #[test]
    fn mixing_angle_values() {
        let model = rwa(2);
        let a = model.mixing_angle(1.0);
        assert!(a.cos2z.abs() < 1e-15 && (a.sin2z - 1.0).abs() < 1e-15);
        assert!((a.z - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((a.z_prime - 0.5).abs() < 1e-15);
        // central difference of z(s)
        let h = 1e-6;
        for &s in &[-0.4, 0.2, 1.0, 3.0] {
            let fd = (model.mixing_angle(s + h).z - model.mixing_angle(s - h).z) / (2.0 * h);
            assert!((fd - model.mixing_angle(s).z_prime).abs() < 1e-8);
        }
        let far: Vec<f64> = [5.0, 10.0, 100.0].iter().map(|&s| model.mixing_angle(s).sin2z).collect();
        assert!(far.windows(2).all(|w| w[1] < w[0]));
        let far: Vec<f64> = [-5.0, -10.0, -100.0].iter().map(|&s| model.mixing_angle(s).sin2z).collect();
        assert!(far.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn eigenvalue_closed_form() {
        let model = rwa(2);
        assert!((model.eigenvalue(0.0, Branch::Plus, 0) - 2f64.sqrt() / 2.0).abs() < 1e-15);
        let s = 0.37;
        let base = model.eigenvalue(s, Branch::Minus, 0);
        assert_eq!(model.eigenvalue(s, Branch::Minus, 3) - base, 3.0 * s + (base - base));
        let diff = model.eigenvalue(s, Branch::Plus, 0) - model.eigenvalue(s, Branch::Minus, 1);
        assert!((diff - (model.aleph(s) - s)).abs() < 1e-15);
        // aleph(1) = 2: exact crossing with the (-,2) level.
        assert!((model.eigenvalue(1.0, Branch::Plus, 0) - model.eigenvalue(1.0, Branch::Minus, 2)).abs() < 1e-15);
    }

    #[test]
    fn rwa_eigenvector_two_entries() {
        let model = rwa(4);
        let s = 0.41;
        let ev = model.exact_eigenvector(s, Branch::Plus, 0).unwrap();
        let z = model.mixing_angle(s).z;
        let up0 = model.index(Component::Up, 0).unwrap();
        let dn1 = model.index(Component::Down, 1).unwrap();
        for (i, c) in ev.vector.iter().enumerate() {
            let expect = if i == up0 {
                z.cos()
            } else if i == dn1 {
                z.sin()
            } else {
                0.0
            };
            assert!((c - Complex::new(expect, 0.0)).norm() < 1e-12);
        }
        assert!(!ev.truncation_warning());
    }

    #[test]
    fn modified_eigenvector_against_fine_quadrature() {
        let rho = 1.0;
        let model = modified(10, rho);
        let s = 0.21;
        let ev = model.exact_eigenvector(s, Branch::Plus, 0).unwrap();
        let z = model.mixing_angle(s).z;
        let fine = 4 * model.spec().theta_grid;
        for m in -10..=10_i64 {
            let mut up = Complex::new(0.0, 0.0);
            let mut dn = Complex::new(0.0, 0.0);
            for j in 0..fine {
                let th = 2.0 * std::f64::consts::PI * j as f64 / fine as f64;
                let ph = -rho * th.sin() / 2.0;
                let e = Complex::from_polar(1.0, -(m as f64) * th);
                up += Complex::from_polar(z.cos(), ph) * e;
                dn += Complex::from_polar(z.sin(), th + ph) * e;
            }
            up /= fine as f64;
            dn /= fine as f64;
            assert!((ev.vector[model.index(Component::Up, m).unwrap()] - up).norm() < 1e-10);
            assert!((ev.vector[model.index(Component::Down, m).unwrap()] - dn).norm() < 1e-10);
        }
    }

    #[test]
    fn eigenvectors_solve_assembled_operator() {
        for model in [rwa(8), modified(16, 1.0)] {
            let s = -0.23;
            let k = model.assemble(s).unwrap().matrix;
            for b in [Branch::Plus, Branch::Minus] {
                for mode in -4..=4 {
                    let ev = model.exact_eigenvector(s, b, mode).unwrap();
                    let r = &k * &ev.vector - ev.vector.scale(ev.value);
                    assert!(vec_norm(&r) < 1e-12, "{b} {mode}: {:e}", vec_norm(&r));
                }
            }
        }
    }

    #[test]
    fn mode_shift_and_orthonormality() {
        let model = modified(10, 1.0);
        let s = 0.6;
        let mut all = Vec::new();
        for b in [Branch::Plus, Branch::Minus] {
            for mode in -5..=5 {
                all.push(model.exact_eigenvector(s, b, mode).unwrap().vector);
            }
        }
        for (i, a) in all.iter().enumerate() {
            for (j, c) in all.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((inner(a, c) - Complex::new(expect, 0.0)).norm() < 1e-10);
            }
        }
        let v0 = model.exact_eigenvector(s, Branch::Plus, 0).unwrap().vector;
        let v2 = model.exact_eigenvector(s, Branch::Plus, 2).unwrap().vector;
        let up = |m| model.index(Component::Up, m).unwrap();
        assert!((v2[up(3)] - v0[up(1)]).norm() < 1e-15);
    }

    #[test]
    fn truncation_loss_reported() {
        let model = modified(3, 6.0);
        let ev = model.exact_eigenvector(0.1, Branch::Plus, 3).unwrap();
        assert!(ev.truncation_warning());
        assert!((vec_norm(&ev.vector) - 1.0).abs() < 1e-12);
    }

    fn fd_coupling(model: &FloquetModel<f64>, s: f64, k: i64) -> Complex<f64> {
        let h = 1e-6;
        let psi = model.exact_eigenvector(s, Branch::Plus, 0).unwrap().vector;
        let a = model.exact_eigenvector(s + h, Branch::Minus, k + 1).unwrap().vector;
        let b = model.exact_eigenvector(s - h, Branch::Minus, k + 1).unwrap().vector;
        inner(&psi, &(a - b).unscale(2.0 * h))
    }

    #[test]
    fn rwa_coupling_values() {
        let model = rwa(6);
        let s = 0.3;
        assert_eq!(model.coupling(s, 0).unwrap(), -model.mixing_angle(s).z_prime);
        assert_eq!(model.coupling(s, 3).unwrap(), 0.0);
        assert!((fd_coupling(&model, s, 0).re - model.coupling(s, 0).unwrap()).abs() < 1e-7);
        assert!(fd_coupling(&model, s, 3).norm() < 1e-7);
    }

    #[test]
    fn modified_coupling_matches_finite_difference() {
        let model = modified(14, 1.0);
        for &s in &[0.11, 0.39, -0.3] {
            for k in 0..=10 {
                let fd = fd_coupling(&model, s, k);
                let cf = model.coupling(s, k).unwrap();
                assert!((fd - Complex::new(cf, 0.0)).norm() < 1e-7, "s={s} k={k}: {fd} vs {cf}");
            }
        }
    }

    #[test]
    fn coupling_formula_holds_for_varying_rho() {
        let spec = ModelSpec::modified(1.0, 1.0, 1.0, 14).with_rho(RhoProfile::Linear { value: 1.2, slope: 0.7 });
        let model = FloquetModel::new(spec).unwrap();
        for k in 0..6 {
            let fd = fd_coupling(&model, 0.25, k);
            assert!((fd - Complex::new(model.coupling(0.25, k).unwrap(), 0.0)).norm() < 1e-7);
        }
    }

    #[test]
    fn analytic_derivative_matches_difference() {
        let spec = ModelSpec::modified(1.0, 1.0, 1.0, 12).with_rho(RhoProfile::Linear { value: 0.9, slope: -0.4 });
        let model = FloquetModel::new(spec).unwrap();
        let h = 1e-6;
        for b in [Branch::Plus, Branch::Minus] {
            let jet = model.eigenvector_jet(0.33, b, 1).unwrap();
            let a = model.exact_eigenvector(0.33 + h, b, 1).unwrap().vector;
            let c = model.exact_eigenvector(0.33 - h, b, 1).unwrap().vector;
            assert!(vec_norm(&((a - c).unscale(2.0 * h) - &jet.dpsi)) < 1e-7);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(FloquetModel::new(ModelSpec::rwa(1.0, 0.0, 3)).is_err());
        assert!(FloquetModel::new(ModelSpec::rwa(1.0, 1.0, 3).with_theta_grid(8)).is_err());
        assert!(FloquetModel::new(ModelSpec::rwa(1.0, 1.0, 3).with_theta_grid(0)).is_ok());
        assert!(rwa(2).assemble(f64::NAN).is_err());
        assert!(rwa(2).exact_eigenvector(0.1, Branch::Plus, 3).is_err());
    }

    #[test]
    fn rwa_ignores_rho() {
        let a = FloquetModel::new(ModelSpec::rwa(1.0, 1.0, 3).with_rho(RhoProfile::Constant(2.0))).unwrap();
        let b = rwa(3);
        assert_eq!(a.assemble(0.2).unwrap().matrix, b.assemble(0.2).unwrap().matrix);
    }

    #[test]
    fn single_precision_model() {
        let model = FloquetModel::new(ModelSpec::<f32>::modified(1.0, 1.0, 1.0, 6)).unwrap();
        let k = model.assemble(0.2).unwrap();
        let ev = model.exact_eigenvector(0.2, Branch::Plus, 0).unwrap();
        let r = &k.matrix * &ev.vector - ev.vector.scale(ev.value);
        assert!(vec_norm(&r) < 1e-5);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ModelSpec::modified(1.0, 1.0, 1.0, 16);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"Omega\""));
        let back: ModelSpec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let short: ModelSpec<f64> =
            serde_json::from_str(r#"{"omega0":1,"Omega":1,"rho":1,"kind":"modified","n_modes":4}"#).unwrap();
        assert_eq!(short.resolved().unwrap().theta_grid, 256);
    }
}
