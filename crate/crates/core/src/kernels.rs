//! Free-space Bessel potential `G` and damped heat kernel `K`.
//!
//! `G` is the fundamental solution of `-Δ + 1` and `K` the one of
//! `∂t - Δ + 1`:
//!
//! ```text
//! G(x)   = e^{-|x|} / 2                                        (d = 1)
//! G(x)   = 1/(4π) ∫_0^∞ exp(-π|x|²/s - s/(4π)) ds/s           (d = 2)
//! K(x,t) = (4πt)^{-d/2} exp(-|x|²/(4t) - t)
//! ```
//!
//! These are validation objects only; the production chemoattractant solver
//! is spectral on the torus (see [`crate::chemo`]). The norm table checks the
//! closed-form `L^p` identities and the small-time exponents of the
//! time-integrated heat-kernel norms by quadrature.

use std::f64::consts::PI;
use std::fmt;

use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity};

/// Relative tolerance of every kernel quadrature.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Largest `t` for which the `t`/`t/4` exponent fit is meaningful. Beyond it
/// the `e^{-s}` damping dominates the power law.
pub const EXPONENT_MAX_T: f64 = 0.05;

pub const EXPONENT_TOL: f64 = 0.05;

/// Tolerance of the closed-form identity rows.
pub const IDENTITY_TOL: f64 = 1e-8;

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::Range(format!("kernels support d = 1 or 2, got d = {dim}")))
    }
}

fn norm(dim: usize, x: &[f64]) -> f64 {
    x[..dim].iter().map(|c| c * c).sum::<f64>().sqrt()
}

// Range of ln s outside which the 2D integrand is below e^{-745}.
fn log_s_range(r: f64) -> (f64, f64) {
    let lo = (PI * r * r / 745.0).ln();
    let hi = (745.0 * 4.0 * PI).ln();
    (lo.min(hi - 1.0), hi)
}

// 1/(4π) ∫ exp(-π r²/s - s/(4π)) s^{-m} ds/s, in u = ln s.
fn bessel_s_integral(r: f64, m: i32) -> Result<f64> {
    let (lo, hi) = log_s_range(r);
    let v = integrate(
        |u: f64| {
            let s = u.exp();
            (-PI * r * r / s - s / (4.0 * PI) - m as f64 * u).exp()
        },
        lo,
        hi,
        QUAD_REL_TOL,
        0.0,
    )?;
    Ok(v / (4.0 * PI))
}

/// `G(x)`. In two dimensions `x = 0` is a logarithmic singularity.
pub fn eval_g(dim: usize, x: &[f64]) -> Result<f64> {
    check_dim(dim)?;
    let r = norm(dim, x);
    if dim == 1 {
        return Ok(0.5 * (-r).exp());
    }
    if r == 0.0 {
        return Err(Error::Singularity("G is logarithmically singular at x = 0 in d = 2".into()));
    }
    bessel_s_integral(r, 0)
}

/// `∇G(x)`; odd in `x`.
pub fn grad_g(dim: usize, x: &[f64]) -> Result<[f64; 2]> {
    check_dim(dim)?;
    let r = norm(dim, x);
    if dim == 1 {
        return Ok([-x[0].signum() * 0.5 * (-r).exp(), 0.0]);
    }
    if r == 0.0 {
        return Err(Error::Singularity("∇G is singular at x = 0 in d = 2".into()));
    }
    // ∂_a exp(-π|x|²/s) = -(2π x_a / s) exp(..)
    let c = -2.0 * PI * bessel_s_integral(r, 1)?;
    Ok([c * x[0], c * x[1]])
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Range(format!("K needs t > 0, got t = {t}")))
    }
}

fn heat(dim: usize, r: f64, t: f64) -> f64 {
    (4.0 * PI * t).powf(-(dim as f64) / 2.0) * (-r * r / (4.0 * t) - t).exp()
}

/// `K(x, t)` for `t > 0`.
pub fn eval_k(dim: usize, x: &[f64], t: f64) -> Result<f64> {
    check_dim(dim)?;
    check_time(t)?;
    Ok(heat(dim, norm(dim, x), t))
}

/// `∇K(x, t) = -x K / (2t)`.
pub fn grad_k(dim: usize, x: &[f64], t: f64) -> Result<[f64; 2]> {
    let k = eval_k(dim, x, t)?;
    let c = -k / (2.0 * t);
    Ok(if dim == 1 { [c * x[0], 0.0] } else { [c * x[0], c * x[1]] })
}

/// `‖h‖_{L^p(ℝ^d)}` for a radial profile `h(r)`, with `r = scale * y`.
pub fn radial_lp_norm<H: Fn(f64) -> f64>(dim: usize, p: f64, scale: f64, h: H) -> Result<f64> {
    let d = dim as f64;
    let shell = if dim == 1 { 2.0 } else { 2.0 * PI };
    let integral = integrate_to_infinity(
        |y| {
            let r = scale * y;
            let v = h(r).abs();
            if v == 0.0 {
                0.0
            } else {
                shell * y.powf(d - 1.0) * v.powf(p)
            }
        },
        0.0,
        QUAD_REL_TOL,
        0.0,
    )?;
    Ok((integral * scale.powf(d)).powf(1.0 / p))
}

/// Quantity tabulated by [`verify_norm_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `‖G‖_p`
    G,
    /// `‖∇G‖_p`
    GradG,
    /// `‖K(·,t)‖_p`
    KSlice,
    /// `∫_0^t ‖K(·,s)‖_p ds`
    K,
    /// `∫_0^t ‖∇K(·,s)‖_p ds`
    GradK,
    /// small-time exponent of the `K` time integral
    KExponent,
    /// small-time exponent of the `∇K` time integral
    GradKExponent,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::G => "G",
            NormKind::GradG => "gradG",
            NormKind::KSlice => "K_t",
            NormKind::K => "K",
            NormKind::GradK => "gradK",
            NormKind::KExponent => "K_exponent",
            NormKind::GradKExponent => "gradK_exponent",
        })
    }
}

/// One row of the kernel report.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCheck {
    pub kind: NormKind,
    pub dim: usize,
    pub p: f64,
    pub t: f64,
    pub computed: f64,
    /// Closed-form value, exponent, or NaN when only finiteness is claimed.
    pub reference: f64,
    pub pass: bool,
}

impl NormCheck {
    pub const CSV_HEADER: &'static str = "kind,dim,p,t,computed,reference,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.15e},{:.15e},{}",
            self.kind, self.dim, self.p, self.t, self.computed, self.reference, self.pass
        )
    }
}

/// Rejects `(dim, p)` outside the ranges where the lemma's norms are finite:
/// `1 <= p < d/(d-2)` for `G`, `K` and `1 <= p < d/(d-1)` for the gradients.
pub fn check_norm_range(dim: usize, p: f64) -> Result<()> {
    check_dim(dim)?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Range(format!("need 1 <= p < infinity, got p = {p}")));
    }
    let d = dim as f64;
    if dim > 2 && p >= d / (d - 2.0) {
        return Err(Error::Range(format!("need p < d/(d-2) = {} for G and K", d / (d - 2.0))));
    }
    if dim > 1 && p >= d / (d - 1.0) {
        return Err(Error::Range(format!(
            "need p < d/(d-1) = {} for ∇G and ∇K, got p = {p}",
            d / (d - 1.0)
        )));
    }
    Ok(())
}

/// `‖K(·,s)‖_p = C s^a e^{-s}`; returns `(C, a)`.
pub fn heat_norm_law(dim: usize, p: f64) -> (f64, f64) {
    let d = dim as f64;
    let a = 0.5 * d * (1.0 / p - 1.0);
    ((4.0 * PI).powf(a) * p.powf(-d / (2.0 * p)), a)
}

/// `‖∇K(·,s)‖_p = C s^b e^{-s}`; returns `(C, b)`.
pub fn grad_heat_norm_law(dim: usize, p: f64) -> (f64, f64) {
    let d = dim as f64;
    let b = d / (2.0 * p) - 0.5 * (d + 1.0);
    let inner = 2f64.powf(-p)
        * (4.0 * PI).powf(-d * p / 2.0)
        * (PI.powf(d / 2.0) / gamma(d / 2.0))
        * gamma((p + d) / 2.0)
        * (4.0 / p).powf((p + d) / 2.0);
    (inner.powf(1.0 / p), b)
}

// ∫_0^t C s^a e^{-s} ds
fn incomplete_law(c: f64, a: f64, t: f64) -> f64 {
    c * gamma(a + 1.0) * gamma_lr(a + 1.0, t)
}

/// `‖K(·,t)‖_p` (or `‖∇K(·,t)‖_p`) by quadrature.
pub fn heat_norm(dim: usize, p: f64, t: f64, gradient: bool) -> Result<f64> {
    check_dim(dim)?;
    check_time(t)?;
    let scale = (4.0 * t).sqrt();
    if gradient {
        radial_lp_norm(dim, p, scale, |r| r / (2.0 * t) * heat(dim, r, t))
    } else {
        radial_lp_norm(dim, p, scale, |r| heat(dim, r, t))
    }
}

/// `∫_0^t ‖K(·,s)‖_p ds` by nested quadrature (space inside, time outside).
pub fn heat_time_integral(dim: usize, p: f64, t: f64, gradient: bool) -> Result<f64> {
    check_time(t)?;
    let inner = |s: f64| heat_norm(dim, p, s, gradient);
    // s = t w² removes the s^{a} endpoint singularity for a > -1.
    let failure = std::cell::RefCell::new(None);
    let value = integrate(
        |w| {
            if w == 0.0 {
                return 0.0;
            }
            let s = t * w * w;
            match inner(s) {
                Ok(v) => 2.0 * t * w * v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        QUAD_REL_TOL,
        0.0,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Exponent `β` in `I(t) ~ t^β` fitted from `I(t)` and `I(t/4)`.
pub fn fit_exponent(i_t: f64, i_quarter: f64) -> f64 {
    (i_t / i_quarter).ln() / 4f64.ln()
}

fn within(computed: f64, reference: f64, tol: f64) -> bool {
    (computed - reference).abs() <= tol * reference.abs().max(1.0)
}

/// Norm identities and bounds for `G`, `K` and their gradients at `(dim, p, t)`.
///
/// Identity rows compare quadrature against closed forms. Rows whose value is
/// only claimed finite carry a NaN reference. Exponent rows are emitted for
/// `t <= EXPONENT_MAX_T` and compare the `t`/`t/4` fit with the lemma's
/// small-time power.
pub fn verify_norm_table(dim: usize, p: f64, t: f64) -> Result<Vec<NormCheck>> {
    check_norm_range(dim, p)?;
    check_time(t)?;
    let d = dim as f64;
    let row = |kind, computed: f64, reference: f64, pass: bool| NormCheck {
        kind,
        dim,
        p,
        t,
        computed,
        reference,
        pass: pass && computed.is_finite(),
    };
    let mut rows = Vec::new();

    // G and ∇G
    let (g_norm, gg_norm) = if dim == 1 {
        let g = radial_lp_norm(1, p, 1.0, |r| 0.5 * (-r).exp())?;
        (g, g)
    } else {
        (
            radial_lp_norm(2, p, 1.0, |r| if r == 0.0 { 0.0 } else { bessel_s_integral(r, 0).unwrap_or(f64::NAN) })?,
            radial_lp_norm(2, p, 1.0, |r| {
                if r == 0.0 {
                    0.0
                } else {
                    2.0 * PI * r * bessel_s_integral(r, 1).unwrap_or(f64::NAN)
                }
            })?,
        )
    };
    let (g_ref, gg_ref) = if dim == 1 {
        let v = 0.5 * (2.0 / p).powf(1.0 / p);
        (v, v)
    } else if p == 1.0 {
        // ∫ G = 1/(1 + |0|²); ∫|∇G| = ∫_0^∞ r K_1(r) dr = π/2
        (1.0, PI / 2.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    for (kind, c, r) in [(NormKind::G, g_norm, g_ref), (NormKind::GradG, gg_norm, gg_ref)] {
        let pass = if r.is_nan() { c > 0.0 } else { within(c, r, IDENTITY_TOL) };
        rows.push(row(kind, c, r, pass));
    }

    let (ck, a) = heat_norm_law(dim, p);
    let k_t = heat_norm(dim, p, t, false)?;
    let k_t_ref = ck * t.powf(a) * (-t).exp();
    rows.push(row(NormKind::KSlice, k_t, k_t_ref, within(k_t, k_t_ref, IDENTITY_TOL)));

    // time-integrated K and ∇K
    let (cg, b) = grad_heat_norm_law(dim, p);
    let k_int = heat_time_integral(dim, p, t, false)?;
    let gk_int = heat_time_integral(dim, p, t, true)?;
    let k_ref = incomplete_law(ck, a, t);
    let gk_ref = incomplete_law(cg, b, t);
    let mut k_pass = within(k_int, k_ref, IDENTITY_TOL);
    if dim == 1 && p == 1.0 {
        k_pass &= k_int <= 1.0 + IDENTITY_TOL;
    }
    rows.push(row(NormKind::K, k_int, k_ref, k_pass));
    rows.push(row(NormKind::GradK, gk_int, gk_ref, within(gk_int, gk_ref, IDENTITY_TOL)));

    if t <= EXPONENT_MAX_T {
        let k_exp = d * (1.0 - p) / (2.0 * p) + 1.0;
        let gk_exp = (d * (1.0 - p) + p) / (2.0 * p);
        let fk = fit_exponent(k_int, heat_time_integral(dim, p, t / 4.0, false)?);
        let fg = fit_exponent(gk_int, heat_time_integral(dim, p, t / 4.0, true)?);
        rows.push(row(NormKind::KExponent, fk, k_exp, (fk - k_exp).abs() <= EXPONENT_TOL));
        rows.push(row(NormKind::GradKExponent, fg, gk_exp, (fg - gk_exp).abs() <= EXPONENT_TOL));
    }
    Ok(rows)
}

/// The `(dim, p, t)` matrix run by the `validate-kernels` subcommand.
pub fn default_norm_matrix() -> Vec<(usize, f64, f64)> {
    vec![
        (1, 1.0, 0.1),
        (1, 1.0, 1.0),
        (1, 1.0, 10.0),
        (1, 1.0, 0.01),
        (1, 2.0, 0.01),
        (2, 1.0, 0.01),
        (2, 1.5, 0.01),
        (2, 1.5, 1.0),
    ]
}
