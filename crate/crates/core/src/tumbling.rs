//! Tumbling rates `φ^ε(z) = ψ (1 + ε θ(z))` and the discrete collision operator.
//!
//! The rate of turning away from a velocity depends only on the pre-tumble
//! velocity through `z = ε ∂t S + v·∇S`, so on the quadrature nodes
//!
//! ```text
//! (M f)_k = |V| φ_k f_k - Σ_k' w_k' φ_k' f_k'
//! ```
//!
//! i.e. a diagonal matrix minus a rank-one term. `I + λM` is a column-weighted
//! diagonally dominant M-matrix for every `λ > 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::VelocitySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseKind {
    /// `θ(z) = -amp tanh(z/σ)`
    #[serde(rename = "tanh")]
    Tanh,
    /// `θ(z) = -clamp(z/σ, -amp, amp)`
    #[serde(rename = "clamped-linear")]
    ClampedLinear,
}

/// Nonincreasing, Lipschitz response `θ` with `‖θ‖_∞ <= amp < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseFunction {
    kind: ResponseKind,
    amp: f64,
    sigma: f64,
}

impl ResponseFunction {
    pub fn new(kind: ResponseKind, amp: f64, sigma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amp) {
            return Err(invalid(
                "amp",
                format!("response bound must satisfy 0 <= amp < 1 (‖θ‖_∞ < 1), got {amp}"),
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self { kind, amp, sigma })
    }

    pub fn tanh(amp: f64, sigma: f64) -> Result<Self> {
        Self::new(ResponseKind::Tanh, amp, sigma)
    }

    pub fn clamped_linear(amp: f64, sigma: f64) -> Result<Self> {
        Self::new(ResponseKind::ClampedLinear, amp, sigma)
    }

    /// `θ ≡ 0`.
    pub fn zero() -> Self {
        Self {
            kind: ResponseKind::Tanh,
            amp: 0.0,
            sigma: 1.0,
        }
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self.kind {
            ResponseKind::Tanh => -self.amp * (z / self.sigma).tanh(),
            ResponseKind::ClampedLinear => -(z / self.sigma).clamp(-self.amp, self.amp),
        }
    }

    pub fn lipschitz_constant(&self) -> f64 {
        match self.kind {
            ResponseKind::Tanh => self.amp / self.sigma,
            ResponseKind::ClampedLinear => {
                if self.amp == 0.0 {
                    0.0
                } else {
                    1.0 / self.sigma
                }
            }
        }
    }

    pub fn is_smooth(&self) -> bool {
        self.kind == ResponseKind::Tanh || self.amp == 0.0
    }
}

/// Tumbling intensity `ψ` and response `θ` of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesParams {
    psi: f64,
    theta: ResponseFunction,
}

impl SpeciesParams {
    pub fn new(psi: f64, theta: ResponseFunction) -> Result<Self> {
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(invalid("psi", format!("must be positive, got {psi}")));
        }
        Ok(Self { psi, theta })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn theta(&self) -> &ResponseFunction {
        &self.theta
    }

    /// Largest tumbling rate `ψ (1 + ε amp)`.
    pub fn max_rate(&self, eps: f64) -> f64 {
        self.psi * (1.0 + eps * self.theta.amp)
    }
}

pub fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(invalid(
            "eps",
            format!("must lie in (0, 1] for the tumbling rate to stay positive, got {eps}"),
        ))
    }
}

/// `ψ (1 + ε θ(argument))`.
pub fn tumbling_rate(sp: &SpeciesParams, eps: f64, argument: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(rate(sp, eps, argument))
}

#[inline]
fn rate(sp: &SpeciesParams, eps: f64, argument: f64) -> f64 {
    sp.psi * (1.0 + eps * sp.theta.eval(argument))
}

/// Symmetric and antisymmetric parts `(φ^S, φ^A)` of the kernel pair
/// `T(v <- v') = φ(arg_v')`, `T(v' <- v) = φ(arg_v)`, with
/// `φ^S + φ^A = T(v <- v')`.
pub fn decompose(sp: &SpeciesParams, eps: f64, arg_v: f64, arg_vprime: f64) -> Result<(f64, f64)> {
    check_eps(eps)?;
    let tv = sp.theta.eval(arg_v);
    let tvp = sp.theta.eval(arg_vprime);
    let phi_s = sp.psi * (1.0 + 0.5 * eps * (tvp + tv));
    let phi_a = sp.psi * 0.5 * eps * (tvp - tv);
    Ok((phi_s, phi_a))
}

/// Per-node rates `φ_k = ψ(1 + ε θ(args[k]))`.
pub fn node_rates(sp: &SpeciesParams, eps: f64, args: &[f64]) -> Vec<f64> {
    args.iter().map(|&z| rate(sp, eps, z)).collect()
}

fn assemble(vs: &VelocitySet, rates: &[f64]) -> DMatrix<f64> {
    let n = vs.len();
    let w = vs.weights();
    let measure = vs.measure();
    DMatrix::from_fn(n, n, |k, kp| {
        let gain = w[kp] * rates[kp];
        if k == kp {
            measure * rates[k] - gain
        } else {
            -gain
        }
    })
}

/// Dense collision matrix at one cell, `args[k] = ε ∂t S + v_k·∇S`.
pub fn collision_matrix(sp: &SpeciesParams, vs: &VelocitySet, eps: f64, args: &[f64]) -> Result<DMatrix<f64>> {
    check_eps(eps)?;
    if args.len() != vs.len() {
        return Err(invalid("args", format!("expected {} entries, got {}", vs.len(), args.len())));
    }
    Ok(assemble(vs, &node_rates(sp, eps, args)))
}

/// `M⁰ f = ψ(|V| f - Σ w f)`.
pub fn leading_matrix(sp: &SpeciesParams, vs: &VelocitySet) -> DMatrix<f64> {
    assemble(vs, &vec![sp.psi; vs.len()])
}

/// `M¹` with `M(ε) = M⁰ + ε M¹`; `θ` still sees the ε-dependent arguments.
pub fn first_order_matrix(sp: &SpeciesParams, vs: &VelocitySet, args: &[f64]) -> DMatrix<f64> {
    let rates: Vec<f64> = args.iter().map(|&z| sp.psi * sp.theta.eval(z)).collect();
    assemble(vs, &rates)
}

/// Solves `(I + λ M) f_new = f_old` for the diagonal-plus-rank-one `M` built
/// from `rates`, in `O(N_v)`.
///
/// With `a_k = 1 + λ|V|φ_k` and `s = Σ w φ f_new`,
/// `f_new_k = (f_old_k + λ s) / a_k` and
/// `s (1 - λ Σ w φ / a) = Σ w φ f_old / a`. Because `Σ w = |V|` the
/// bracket equals `Σ w / (|V| a)`, which avoids cancellation at large `λ`.
pub fn solve_implicit(
    vs: &VelocitySet,
    rates: &[f64],
    lambda: f64,
    f_old: &[f64],
    f_new: &mut [f64],
) -> std::result::Result<(), String> {
    let w = vs.weights();
    let measure = vs.measure();
    let mut numer = 0.0;
    let mut coupling = 0.0;
    for k in 0..rates.len() {
        let a = 1.0 + lambda * measure * rates[k];
        let wp = w[k] * rates[k] / a;
        numer += wp * f_old[k];
        coupling += w[k] / (measure * a);
    }
    let denom = coupling;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(format!("Schur complement {denom} is not positive"));
    }
    let s = numer / denom;
    for k in 0..rates.len() {
        let a = 1.0 + lambda * measure * rates[k];
        f_new[k] = (f_old[k] + lambda * s) / a;
    }
    Ok(())
}

/// Dense LU solve of `(I + λ M) f_new = f_old`; the reference route for
/// [`solve_implicit`].
pub fn solve_implicit_dense(m: &DMatrix<f64>, lambda: f64, f_old: &[f64], cell: usize) -> Result<Vec<f64>> {
    let n = m.nrows();
    let a = DMatrix::identity(n, n) + m * lambda;
    let b = nalgebra::DVector::from_column_slice(f_old);
    a.lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::LinearSolve {
            cell,
            reason: "matrix is singular".into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_species(psi: f64, amp: f64, sigma: f64) -> SpeciesParams {
        SpeciesParams::new(psi, ResponseFunction::tanh(amp, sigma).unwrap()).unwrap()
    }

    #[test]
    fn rate_examples() {
        let sp = tanh_species(1.0, 0.5, 1.0);
        assert_eq!(tumbling_rate(&sp, 0.5, 0.0).unwrap(), 1.0);
        let sp = tanh_species(2.0, 0.5, 0.3);
        let r = tumbling_rate(&sp, 1.0, 50.0 * 0.3).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(tumbling_rate(&sp, 0.0, 1.0).is_err());
        assert!(tumbling_rate(&sp, 1.5, 1.0).is_err());
    }

    #[test]
    fn decomposition_examples() {
        // θ(z) = -clamp(z, -0.9, 0.9): θ(-0.3) = 0.3, θ(0.3) = -0.3.
        let sp = SpeciesParams::new(1.0, ResponseFunction::clamped_linear(0.9, 1.0).unwrap()).unwrap();
        let (s, a) = decompose(&sp, 1.0, -0.3, 0.3).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        assert!((a + 0.3).abs() < 1e-15);
        let (_, a) = decompose(&sp, 0.7, 0.2, 0.2).unwrap();
        assert_eq!(a, 0.0);
        let (s, a) = decompose(&sp, 0.4, 0.1, -0.25).unwrap();
        assert!((s + a - tumbling_rate(&sp, 0.4, -0.25).unwrap()).abs() < 1e-15);
        assert!((s - a - tumbling_rate(&sp, 0.4, 0.1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn response_rejects_h1_violation() {
        assert!(ResponseFunction::tanh(1.0, 1.0).is_err());
        assert!(ResponseFunction::tanh(0.5, 0.0).is_err());
        assert!(SpeciesParams::new(0.0, ResponseFunction::zero()).is_err());
    }

    #[test]
    fn leading_operator_kills_equilibrium_and_matches_t0() {
        let vs = VelocitySet::build(1, 1.0, 8).unwrap();
        let sp = tanh_species(1.5, 0.0, 1.0);
        let m = collision_matrix(&sp, &vs, 0.3, &[0.0; 8]).unwrap();
        let f: Vec<f64> = (0..8).map(|k| 1.0 + k as f64 * 0.1).collect();
        let rho = vs.integrate(&f);
        let mf = &m * nalgebra::DVector::from_column_slice(&f);
        for k in 0..8 {
            assert!((mf[k] - 1.5 * (vs.measure() * f[k] - rho)).abs() < 1e-13);
        }
        let uniform = nalgebra::DVector::from_element(8, 0.7);
        assert!((&m * uniform).amax() < 1e-14);
    }

    #[test]
    fn null_space_of_leading_matrix_is_one_dimensional() {
        let vs = VelocitySet::build(1, 1.0, 8).unwrap();
        let m0 = leading_matrix(&tanh_species(1.0, 0.0, 1.0), &vs);
        let sv = m0.singular_values();
        let zeros = sv.iter().filter(|s| **s < 1e-12).count();
        assert_eq!(zeros, 1);
    }

    #[test]
    fn structured_solve_matches_dense_lu() {
        let vs = VelocitySet::build(1, 1.0, 16).unwrap();
        let sp = tanh_species(0.8, 0.6, 0.2);
        let args: Vec<f64> = (0..16).map(|k| ((k * 5) % 7) as f64 * 0.1 - 0.3).collect();
        let f_old: Vec<f64> = (0..16).map(|k| 0.2 + ((k * 3) % 5) as f64).collect();
        for lambda in [1e-3, 0.5, 40.0, 1e6] {
            let m = collision_matrix(&sp, &vs, 0.7, &args).unwrap();
            let dense = solve_implicit_dense(&m, lambda, &f_old, 0).unwrap();
            let rates = node_rates(&sp, 0.7, &args);
            let mut fast = vec![0.0; 16];
            solve_implicit(&vs, &rates, lambda, &f_old, &mut fast).unwrap();
            for k in 0..16 {
                // LU error grows with the conditioning, roughly λ|V|φ
                let tol = 1e-13 * (1.0 + lambda * vs.measure());
                assert!((dense[k] - fast[k]).abs() <= tol * dense[k].abs().max(1.0));
                assert!(fast[k] >= 0.0);
            }
            let before = vs.integrate(&f_old);
            let after = vs.integrate(&fast);
            assert!((before - after).abs() < 1e-13 * before);
        }
    }

    #[test]
    fn implicit_matrix_is_m_matrix() {
        let vs = VelocitySet::build(2, 1.0, 4).unwrap();
        let sp = tanh_species(1.0, 0.9, 0.5);
        let args: Vec<f64> = vs.nodes().iter().map(|v| 0.8 * v[0] - 0.3 * v[1]).collect();
        let m = collision_matrix(&sp, &vs, 1.0, &args).unwrap();
        let a = DMatrix::identity(vs.len(), vs.len()) + &m * 3.0;
        for i in 0..vs.len() {
            for j in 0..vs.len() {
                if i != j {
                    assert!(a[(i, j)] <= 0.0);
                }
            }
        }
        let inv = a.try_inverse().unwrap();
        assert!(inv.iter().all(|x| *x >= -1e-15));
    }
}
