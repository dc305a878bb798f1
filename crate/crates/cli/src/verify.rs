//! Operator verification suite: norm identities, self-adjointness, exact
//! inversion, limit orders and the kernel cross-check.

use fracfilm_core::kernel::{apply_I_integral, KernelParams};
use fracfilm_core::spectral::{apply_I, apply_dx, invert_I, seminorm_sq, shifted_invert_I, synthesize};
use fracfilm_core::SpectralField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::CliError;

pub const RANDOM_FIELDS: usize = 20;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const INVERSION_TOL: f64 = 1e-12;
pub const KERNEL_TOL: f64 = 1e-2;
pub const KERNEL_MODES: usize = 9;
pub const KERNEL_POINTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRow {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    fn below(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance: bound,
            passed: value < bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySettings {
    pub alpha: f64,
    pub n_modes: usize,
    pub k_max: usize,
    pub quad_points: usize,
    pub seed: u64,
}

fn core_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

pub fn random_field(rng: &mut ChaCha8Rng, n_modes: usize) -> SpectralField {
    SpectralField::new((0..n_modes).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("finite coefficients")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// The four norm identities for one field, as relative errors against the
/// spectral seminorms. Integrals use the midpoint rule on `4N` nodes, which
/// is exact for the products involved.
pub fn identity_errors(u: &SpectralField, alpha: f64) -> Result<[f64; 4], CliError> {
    let m = 4 * u.n_modes();
    let iu = apply_I(u, alpha).map_err(core_err)?;
    let u_x = synthesize(u, m).map_err(core_err)?;
    let iu_x = synthesize(&iu, m).map_err(core_err)?;
    let du = apply_dx(u, m).map_err(core_err)?;
    let diu = apply_dx(&iu, m).map_err(core_err)?;
    let s = |order: f64| seminorm_sq(u, order).map_err(core_err);
    Ok([
        rel(-dot(iu_x.values(), u_x.values()), s(alpha / 2.0)?),
        rel(dot(iu_x.values(), iu_x.values()), s(alpha)?),
        rel(-dot(diu.values(), du.values()), s(alpha / 2.0 + 1.0)?),
        rel(dot(diu.values(), diu.values()), s(alpha + 1.0)?),
    ])
}

/// `|⟨I(u),v⟩ − ⟨u,I(v)⟩|` scaled by `‖I(u)‖·‖v‖`.
pub fn self_adjoint_error(u: &SpectralField, v: &SpectralField, alpha: f64) -> Result<f64, CliError> {
    let m = 4 * u.n_modes();
    let grid = |f: &SpectralField| synthesize(f, m).map_err(core_err);
    let (iu, iv) = (
        grid(&apply_I(u, alpha).map_err(core_err)?)?,
        grid(&apply_I(v, alpha).map_err(core_err)?)?,
    );
    let (gu, gv) = (grid(u)?, grid(v)?);
    let lhs = dot(iu.values(), gv.values());
    let rhs = dot(gu.values(), iv.values());
    let scale = (dot(iu.values(), iu.values()) * dot(gv.values(), gv.values())).sqrt();
    Ok((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE))
}

fn max_rel_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    let scale = b.max_abs().max(f64::MIN_POSITIVE);
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

/// `‖−I(invert_I(g)) − g‖∞/‖g‖∞` for mean-free `g`.
pub fn inversion_error(g: &SpectralField, alpha: f64) -> Result<f64, CliError> {
    let mut c = g.coeffs().to_vec();
    c[0] = 0.0;
    let g = SpectralField::new(c).map_err(core_err)?;
    let u = invert_I(&g, alpha).map_err(core_err)?;
    let back = -&apply_I(&u, alpha).map_err(core_err)?;
    Ok(max_rel_diff(&back, &g))
}

/// Both directions of the bijection `v ↦ −I(v) + ∫v`.
pub fn shifted_inversion_error(g: &SpectralField, alpha: f64) -> Result<f64, CliError> {
    let forward = |v: &SpectralField| -> Result<SpectralField, CliError> {
        let mut w = -&apply_I(v, alpha).map_err(core_err)?;
        let mut c = w.coeffs().to_vec();
        c[0] += v.mean();
        w = SpectralField::new(c).map_err(core_err)?;
        Ok(w)
    };
    let v = shifted_invert_I(g, alpha).map_err(core_err)?;
    let e1 = max_rel_diff(&forward(&v)?, g);
    let w = shifted_invert_I(&forward(g)?, alpha).map_err(core_err)?;
    Ok(e1.max(max_rel_diff(&w, g)))
}

/// Maximum coefficient difference between `apply_I(u, 2)` and `−(kπ)² c_k`.
pub fn laplacian_limit_error(u: &SpectralField) -> Result<f64, CliError> {
    let iu = apply_I(u, 2.0).map_err(core_err)?;
    Ok(u.coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let kp = k as f64 * std::f64::consts::PI;
            (iu.coeffs()[k] + kp * kp * c).abs()
        })
        .fold(0.0, f64::max))
}

/// Maximum coefficient difference between `apply_I(u, 0)` and `−(u − ∫u)`.
pub fn mean_removal_limit_error(u: &SpectralField) -> Result<f64, CliError> {
    let iu = apply_I(u, 0.0).map_err(core_err)?;
    Ok(u.coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let expected = if k == 0 { 0.0 } else { -c };
            (iu.coeffs()[k] - expected).abs()
        })
        .fold(0.0, f64::max))
}

/// Sup-relative error of the kernel form against spectral `I` at
/// [`KERNEL_POINTS`] interior points.
pub fn kernel_error(u: &SpectralField, alpha: f64, k_max: usize, quad_points: usize) -> Result<f64, CliError> {
    let params = KernelParams::new(alpha, k_max).map_err(core_err)?;
    let iu = apply_I(u, alpha).map_err(core_err)?;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..KERNEL_POINTS {
        let x = (i as f64 + 0.5) / KERNEL_POINTS as f64;
        let exact = iu.eval(x);
        let approx = apply_I_integral(u, x, &params, quad_points).map_err(core_err)?;
        err = err.max((approx - exact).abs());
        scale = scale.max(exact.abs());
    }
    Ok(err / scale.max(f64::MIN_POSITIVE))
}

pub fn operator_checks(s: &VerifySettings) -> Result<Vec<CheckRow>, CliError> {
    if !(s.alpha > 0.0 && s.alpha < 2.0) {
        return Err(CliError::Config(format!("alpha = {} must lie in (0, 2)", s.alpha)));
    }
    if s.n_modes < KERNEL_MODES {
        return Err(CliError::Config(format!("n_modes must be >= {KERNEL_MODES}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let fields: Vec<SpectralField> = (0..RANDOM_FIELDS).map(|_| random_field(&mut rng, s.n_modes)).collect();

    let mut identities = [0.0_f64; 4];
    let (mut adjoint, mut inversion, mut shifted, mut lap, mut mean0) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for (i, u) in fields.iter().enumerate() {
        for (slot, e) in identities.iter_mut().zip(identity_errors(u, s.alpha)?) {
            *slot = slot.max(e);
        }
        let v = &fields[(i + 1) % fields.len()];
        adjoint = adjoint.max(self_adjoint_error(u, v, s.alpha)?);
        inversion = inversion.max(inversion_error(u, s.alpha)?);
        shifted = shifted.max(shifted_inversion_error(u, s.alpha)?);
        lap = lap.max(laplacian_limit_error(u)?);
        mean0 = mean0.max(mean_removal_limit_error(u)?);
    }

    let low = fields[0].resized(KERNEL_MODES);
    let coarse = kernel_error(&low, s.alpha, s.k_max, s.quad_points)?;
    let fine = kernel_error(&low, s.alpha, 2 * s.k_max, 2 * s.quad_points)?;

    Ok(vec![
        CheckRow::at_most("identity_energy", identities[0], IDENTITY_TOL),
        CheckRow::at_most("identity_h_alpha", identities[1], IDENTITY_TOL),
        CheckRow::at_most("identity_h_alpha_half_plus_one", identities[2], IDENTITY_TOL),
        CheckRow::at_most("identity_h_alpha_plus_one", identities[3], IDENTITY_TOL),
        CheckRow::at_most("self_adjointness", adjoint, IDENTITY_TOL),
        CheckRow::at_most("invert_round_trip", inversion, INVERSION_TOL),
        CheckRow::at_most("shifted_invert_bijection", shifted, INVERSION_TOL),
        CheckRow::at_most("alpha2_laplacian_exact", lap, 0.0),
        CheckRow::at_most("alpha0_mean_removal_exact", mean0, 0.0),
        CheckRow::at_most("kernel_sup_rel_error", coarse, KERNEL_TOL),
        CheckRow::below("kernel_refined_to_coarse_ratio", fine / coarse, 1.0),
    ])
}
