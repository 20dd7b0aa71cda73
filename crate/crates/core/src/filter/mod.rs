//! Optimal second-order filtering of a consensus spectrum.
//!
//! Two steps `(P - z1)(P - z2) / ((1 - z1)(1 - z2))` act on each
//! non-consensus eigenvalue as a quadratic `p2` with `p2(1) = 1`. For a
//! centered spectrum with extreme moduli `mu` (SLEM) and `sigma` (SEM) the
//! min-max optimal filter has roots `±z`, `z² = (mu² + sigma²) / 2`, and
//! worst-case two-step rate `(mu² - sigma²) / (2 - mu² - sigma²)`.
//!
//! Beyond the design itself this module covers the alternating-step
//! factorization `P- = a (P - z) / (1 - z)`, `P+ = (P + z) / (a (1 + z))`,
//! the stability of those individual steps, root caps that keep the filter
//! safe under link failures, and the Chebyshev / memory-slot baseline rates.

pub mod oracle;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

/// Second-order filter `p2(λ) = (λ² - z²) / (1 - z²)` designed for a
/// centered spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFilter {
    /// Squared root parameter `z²`.
    pub z_sq: f64,
    /// Worst-case two-step rate on the design spectrum.
    pub mu2: f64,
    /// Design SLEM.
    pub mu: f64,
    /// Design SEM.
    pub sigma: f64,
    /// Whether `z` was reduced below its optimal value.
    pub capped: bool,
}

impl QuadFilter {
    /// Min-max optimal filter for a centered spectrum with SLEM `mu` and SEM
    /// `sigma`.
    pub fn optimal(mu: f64, sigma: f64) -> Result<QuadFilter> {
        check_design(mu, sigma)?;
        let (m2, s2) = (mu * mu, sigma * sigma);
        Ok(QuadFilter {
            z_sq: 0.5 * (m2 + s2),
            mu2: (m2 - s2) / (2.0 - m2 - s2),
            mu,
            sigma,
            capped: false,
        })
    }

    /// Optimal filter for an arbitrary spectrum, designed on its centered
    /// image.
    pub fn for_spectrum(spectrum: &Spectrum) -> Result<QuadFilter> {
        let c = spectrum.centered_image()?;
        QuadFilter::optimal(c.mu, c.sigma)
    }

    /// Filter with an explicitly chosen root `z`; `mu2` is then the worst
    /// case of `|p2|` over the design moduli.
    pub fn with_root(z: f64, mu: f64, sigma: f64) -> Result<QuadFilter> {
        check_design(mu, sigma)?;
        if !(0.0..1.0).contains(&z) {
            return Err(Error::InvalidArgument(format!("root z = {z} outside [0, 1)")));
        }
        let mut f = QuadFilter {
            z_sq: z * z,
            mu2: 0.0,
            mu,
            sigma,
            capped: false,
        };
        f.mu2 = f.eval(mu).abs().max(f.eval(sigma).abs());
        Ok(f)
    }

    pub fn z(&self) -> f64 {
        self.z_sq.sqrt()
    }

    /// `p2(λ)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        (lambda * lambda - self.z_sq) / (1.0 - self.z_sq)
    }

    /// `max |p2|` over `[-1, 1]`, attained at `λ = 0` or `λ = ±1`.
    pub fn max_abs_on_unit_interval(&self) -> f64 {
        self.eval(0.0).abs().max(1.0)
    }

    /// Apply `p2` to a matrix: `(P² - z² I) / (1 - z²)`.
    pub fn apply(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = p.nrows();
        (p * p - DMatrix::identity(n, n) * self.z_sq) / (1.0 - self.z_sq)
    }
}

fn check_design(mu: f64, sigma: f64) -> Result<()> {
    if !(mu < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "SLEM {mu} >= 1: consensus cannot converge"
        )));
    }
    if !(0.0 <= sigma && sigma <= mu) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= sigma <= mu, got sigma = {sigma}, mu = {mu}"
        )));
    }
    Ok(())
}

pub fn optimal_p2(mu: f64, sigma: f64) -> Result<QuadFilter> {
    QuadFilter::optimal(mu, sigma)
}

pub fn p2_eval(f: &QuadFilter, lambda: f64) -> f64 {
    f.eval(lambda)
}

/// How the two-step gain is split between `P-` and `P+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AMode {
    /// `a = 1`: the average is preserved at every step.
    Unit,
    /// `a = sqrt((1 - z) / (1 + z))`: minimizes the larger step SLEM.
    Balanced,
    Custom(f64),
}

impl AMode {
    pub fn gain(self, z: f64) -> Result<f64> {
        match self {
            AMode::Unit => Ok(1.0),
            AMode::Balanced => Ok(((1.0 - z) / (1.0 + z)).sqrt()),
            AMode::Custom(a) if a > 0.0 && a.is_finite() => Ok(a),
            AMode::Custom(a) => Err(Error::InvalidArgument(format!("gain a = {a} must be > 0"))),
        }
    }
}

/// Alternating-step factorization of a quadratic filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPair {
    pub a: f64,
    pub z: f64,
}

impl StepPair {
    /// `a (λ - z) / (1 - z)`.
    pub fn minus(&self, lambda: f64) -> f64 {
        self.a * (lambda - self.z) / (1.0 - self.z)
    }

    /// `(λ + z) / (a (1 + z))`.
    pub fn plus(&self, lambda: f64) -> f64 {
        (lambda + self.z) / (self.a * (1.0 + self.z))
    }

    /// Both steps in sequence; equals `(λ² - z²) / (1 - z²)` for every `a`.
    pub fn compose(&self, lambda: f64) -> f64 {
        self.plus(lambda) * self.minus(lambda)
    }

    pub fn minus_matrix(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = p.nrows();
        (p - DMatrix::identity(n, n) * self.z) * (self.a / (1.0 - self.z))
    }

    pub fn plus_matrix(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let n = p.nrows();
        (p + DMatrix::identity(n, n) * self.z) / (self.a * (1.0 + self.z))
    }
}

pub fn factor_steps(f: &QuadFilter, a_mode: AMode) -> Result<StepPair> {
    let z = f.z();
    if !(z < 1.0) {
        return Err(Error::InvalidArgument(format!("root z = {z} must be < 1")));
    }
    Ok(StepPair {
        a: a_mode.gain(z)?,
        z,
    })
}

/// Larger of the two single-step SLEMs for gain `a` on a centered spectrum
/// spanning `[-mu, mu]`.
pub fn step_slem(mu: f64, z: f64, a: f64) -> f64 {
    let minus = a * (mu + z) / (1.0 - z);
    let plus = (mu + z) / (a * (1.0 + z));
    minus.max(plus)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRegime {
    /// Both steps contract with `a = 1`.
    BothStable,
    /// Only the balanced gain makes both steps contract.
    StableWithBalancedA,
    /// No gain makes both steps contract.
    NoStableSplit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStability {
    /// `(mu + z) / (1 - z)`.
    pub unit_step_slem: f64,
    /// `(mu + z) / sqrt(1 - z²)`, the minimum over `a` of [`step_slem`].
    pub balanced_step_slem: f64,
    pub regime: StepRegime,
}

/// Classify single-step stability of the alternating factorization.
///
/// Unit gain contracts iff `mu < 1 - 2z`. The balanced gain contracts iff
/// `mu + z < sqrt(1 - z²)`, which is strictly tighter than `mu < 1 - z`
/// whenever `z > 0`.
pub fn step_stability(mu: f64, z: f64) -> Result<StepStability> {
    if !(0.0..1.0).contains(&mu) || !(0.0..1.0).contains(&z) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= mu, z < 1, got mu = {mu}, z = {z}"
        )));
    }
    let unit_step_slem = step_slem(mu, z, 1.0);
    let balanced_step_slem = (mu + z) / (1.0 - z * z).sqrt();
    let regime = if unit_step_slem < 1.0 {
        StepRegime::BothStable
    } else if balanced_step_slem < 1.0 {
        StepRegime::StableWithBalancedA
    } else {
        StepRegime::NoStableSplit
    };
    Ok(StepStability {
        unit_step_slem,
        balanced_step_slem,
        regime,
    })
}

/// Largest `mu` for which unit-gain steps are both stable.
pub fn unit_gain_boundary(z: f64) -> f64 {
    1.0 - 2.0 * z
}

/// Largest `mu` for which the balanced gain makes both steps stable.
pub fn balanced_gain_boundary(z: f64) -> f64 {
    (1.0 - z * z).sqrt() - z
}

/// Root caps that keep the filter stable under link failures from a
/// positive-weight matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessCaps {
    /// Permanent failures: keeps `|p2| <= 1` on all of `[-1, 1]`.
    pub z_permanent: f64,
    /// Failures on every second step.
    pub z_resonant: f64,
}

pub fn robustness_caps(mu: f64) -> Result<RobustnessCaps> {
    if !(0.0..1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!("SLEM {mu} outside [0, 1)")));
    }
    Ok(RobustnessCaps {
        z_permanent: std::f64::consts::FRAC_1_SQRT_2,
        z_resonant: 0.5 * (1.0 - mu),
    })
}

/// Reduce the root to at most `z_cap`; the rate becomes the worst `|p2|`
/// at the design moduli.
pub fn cap_filter(f: &QuadFilter, z_cap: f64) -> Result<QuadFilter> {
    if !(z_cap > 0.0) {
        return Err(Error::InvalidArgument(format!("cap {z_cap} must be > 0")));
    }
    if f.z() <= z_cap {
        return Ok(*f);
    }
    let mut capped = QuadFilter::with_root(z_cap, f.mu, f.sigma)?;
    capped.capped = true;
    Ok(capped)
}

fn check_rate_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("mu = {mu} outside (0, 1)")))
    }
}

/// Per-step worst-case rate of the order-`t` Chebyshev filter,
/// `|T_t(1/mu)|^(-1/t)`.
///
/// Evaluated in log space, `ln T_t(x) = t·acosh(x) + ln((1 + e^(-2t·acosh x)) / 2)`,
/// so large `t` does not overflow.
pub fn chebyshev_rate(mu: f64, t: u32) -> Result<f64> {
    check_rate_mu(mu)?;
    if t == 0 {
        return Err(Error::InvalidArgument("order t must be >= 1".into()));
    }
    let theta = (1.0 / mu).acosh();
    let tt = f64::from(t) * theta;
    let ln_t = tt + (0.5 * (1.0 + (-2.0 * tt).exp())).ln();
    Ok((-ln_t / f64::from(t)).exp())
}

/// Worst-case rate of optimally tuned memory-slot consensus,
/// `1/mu - sqrt(1/mu² - 1)`.
pub fn memory_slot_rate(mu: f64) -> Result<f64> {
    check_rate_mu(mu)?;
    let x = 1.0 / mu;
    Ok(x - (x * x - 1.0).sqrt())
}
