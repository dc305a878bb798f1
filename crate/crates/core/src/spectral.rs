//! Functions on the unit interval represented in the Neumann eigenbasis of the
//! Laplacian, together with the nonlocal operator `I = -(-Δ)^{α/2}`.
//!
//! Basis convention: `φ_0 = 1`, `φ_k(x) = √2 cos(kπx)` for `k ≥ 1`, with
//! eigenvalues `λ_k = (kπ)²`. The basis is orthonormal in `L²(0,1)`, so the
//! coefficient `c_0` is the mean of the represented function.
//!
//! Grid values live on the cell-centred collocation nodes
//! `x_j = (2j+1)/(2M)`, which turns analysis into a DCT-II and synthesis into a
//! DCT-III. Sine series (derivatives of cosine series) are evaluated on the
//! same nodes through the identity
//! `sin(kπ x_j) = (-1)^j cos((M-k)π x_j)`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustdct::{Dct2, Dct3, DctPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("grid of {points} points cannot represent {modes} modes")]
    GridTooCoarse { points: usize, modes: usize },
    #[error("alpha = {0} outside [0, 2]")]
    AlphaOutOfRange(f64),
    #[error("negative seminorm order s = {0}")]
    NegativeOrder(f64),
    #[error("right-hand side has mean {mean:e}, exceeding tolerance {tol:e}; -I(u) = g is unsolvable")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("mode count mismatch: {left} vs {right}")]
    ModeMismatch { left: usize, right: usize },
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Eigenpairs of the Neumann Laplacian on (0,1).
#[derive(Debug, Clone, Copy, Default)]
pub struct BasisConvention;

impl BasisConvention {
    /// `λ_k = (kπ)²`.
    pub fn eigenvalue(k: usize) -> f64 {
        let w = k as f64 * PI;
        w * w
    }

    pub fn phi(k: usize, x: f64) -> f64 {
        if k == 0 {
            1.0
        } else {
            SQRT_2 * (k as f64 * PI * x).cos()
        }
    }

    pub fn dphi(k: usize, x: f64) -> f64 {
        let w = k as f64 * PI;
        -SQRT_2 * w * (w * x).sin()
    }

    pub fn d2phi(k: usize, x: f64) -> f64 {
        -Self::eigenvalue(k) * Self::phi(k, x)
    }
}

/// `(kπ)^p`, exact for `p ∈ {0, 1, 2}`.
pub(crate) fn freq_pow(k: usize, p: f64) -> f64 {
    let w = k as f64 * PI;
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        w
    } else if p == 2.0 {
        w * w
    } else {
        w.powf(p)
    }
}

/// Spectral multiplier of `-I` on mode `k`. The mean mode is annihilated for
/// every `α`, including `α = 0` where `λ_0^0` would be indeterminate.
pub fn multiplier(k: usize, alpha: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        freq_pow(k, alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=2.0).contains(&alpha) {
        Ok(())
    } else {
        Err(SpectralError::AlphaOutOfRange(alpha))
    }
}

/// A function on (0,1) stored as its first `N` basis coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(SpectralError::EmptyInput);
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SpectralError::NonFinite { index });
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(n_modes: usize) -> Self {
        assert!(n_modes > 0, "a field needs at least one mode");
        Self {
            coeffs: vec![0.0; n_modes],
        }
    }

    pub fn constant(n_modes: usize, value: f64) -> Self {
        let mut f = Self::zeros(n_modes);
        f.coeffs[0] = value;
        f
    }

    /// `amplitude · φ_k` truncated to `n_modes`.
    pub fn mode(n_modes: usize, k: usize, amplitude: f64) -> Self {
        let mut f = Self::zeros(n_modes);
        f.coeffs[k] = amplitude;
        f
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    /// Mean over (0,1), which is `c_0`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// Keeps the first `n_modes` coefficients, zero-padding if the field is
    /// shorter.
    pub fn resized(&self, n_modes: usize) -> Self {
        let mut coeffs = vec![0.0; n_modes.max(1)];
        let n = n_modes.min(self.coeffs.len());
        coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        Self { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * BasisConvention::phi(k, x))
            .sum()
    }

    pub fn eval_dx(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * BasisConvention::dphi(k, x))
            .sum()
    }

    pub fn eval_dxx(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * BasisConvention::d2phi(k, x))
            .sum()
    }

    /// `L²(0,1)` distance, computed on coefficients (Parseval). Fields of
    /// different length are compared with implicit zero padding.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let n = self.n_modes().max(other.n_modes());
        (0..n)
            .map(|k| {
                let a = self.coeffs.get(k).copied().unwrap_or(0.0);
                let b = other.coeffs.get(k).copied().unwrap_or(0.0);
                (a - b) * (a - b)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            self.n_modes(),
            other.n_modes(),
            "mode count mismatch in field arithmetic"
        );
        Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| op(*a, *b)).collect(),
        }
    }

    pub(crate) fn from_raw(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    #[cfg(test)]
    pub(crate) fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

impl fmt::Display for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpectralField[{}](", self.n_modes())?;
        for (k, c) in self.coeffs.iter().take(4).enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c:.6e}")?;
        }
        if self.n_modes() > 4 {
            write!(f, ", ...")?;
        }
        write!(f, ")")
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        SpectralField {
            coeffs: self.coeffs.iter().map(|c| c * rhs).collect(),
        }
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self * -1.0
    }
}

/// Nodal values at `x_j = (2j+1)/(2M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SpectralError::EmptyInput);
        }
        Ok(Self { values })
    }

    /// Samples `f` at the `m` collocation nodes.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(nodes(m).into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    /// Midpoint-rule integral over (0,1).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Collocation nodes `x_j = (2j+1)/(2M)`.
pub fn nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| (2 * j + 1) as f64 / (2 * m) as f64).collect()
}

/// Planned cosine transforms for one grid size.
///
/// The free functions in this module build a plan per call; hot loops should
/// hold a `Collocation` instead.
#[derive(Clone)]
pub struct Collocation {
    m: usize,
    dct2: Arc<dyn Dct2<f64>>,
    dct3: Arc<dyn Dct3<f64>>,
}

impl fmt::Debug for Collocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Collocation").field("m", &self.m).finish()
    }
}

impl Collocation {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(SpectralError::EmptyInput);
        }
        let mut planner = DctPlanner::new();
        Ok(Self {
            m,
            dct2: planner.plan_dct2(m),
            dct3: planner.plan_dct3(m),
        })
    }

    pub fn n_points(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> Vec<f64> {
        nodes(self.m)
    }

    fn check_modes(&self, n: usize) -> Result<()> {
        if n > self.m {
            Err(SpectralError::GridTooCoarse {
                points: self.m,
                modes: n,
            })
        } else {
            Ok(())
        }
    }

    /// Discrete projection `c_k = (1/M) Σ_j g_j φ_k(x_j)` for `k < M`.
    pub fn analyze_values(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.m);
        let mut buf = values.to_vec();
        self.dct2.process_dct2(&mut buf);
        let m = self.m as f64;
        buf[0] /= m;
        for c in buf.iter_mut().skip(1) {
            *c *= SQRT_2 / m;
        }
        buf
    }

    /// Cosine series `Σ_k c_k φ_k(x_j)`.
    pub fn synthesize_values(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_modes(coeffs.len())?;
        let mut buf = vec![0.0; self.m];
        // rustdct's DCT-III halves the first input.
        buf[0] = 2.0 * coeffs[0];
        for (b, c) in buf.iter_mut().zip(coeffs).skip(1) {
            *b = SQRT_2 * c;
        }
        self.dct3.process_dct3(&mut buf);
        Ok(buf)
    }

    /// Sine series `Σ_{k≥1} s_k √2 sin(kπ x_j)` for `s` indexed by `k`
    /// (`s[0]` ignored).
    fn synthesize_sine(&self, sine: &[f64]) -> Result<Vec<f64>> {
        self.check_modes(sine.len())?;
        let mut buf = vec![0.0; self.m];
        for (k, s) in sine.iter().enumerate().skip(1) {
            buf[self.m - k] = SQRT_2 * s;
        }
        self.dct3.process_dct3(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            if j % 2 == 1 {
                *v = -*v;
            }
        }
        Ok(buf)
    }

    /// Pointwise derivative `Σ_k c_k φ_k'(x_j)`.
    pub fn synthesize_dx_values(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let sine: Vec<f64> = coeffs.iter().enumerate().map(|(k, c)| -(k as f64) * PI * c).collect();
        self.synthesize_sine(&sine)
    }

    /// Discrete inner products `⟨F, φ_k'⟩ = (1/M) Σ_j F_j φ_k'(x_j)` for
    /// `k < n_modes`.
    pub fn project_onto_dx(&self, values: &[f64], n_modes: usize) -> Result<Vec<f64>> {
        self.check_modes(n_modes)?;
        assert_eq!(values.len(), self.m);
        let mut buf: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(j, v)| if j % 2 == 1 { -v } else { *v })
            .collect();
        self.dct2.process_dct2(&mut buf);
        let m = self.m as f64;
        let mut out = vec![0.0; n_modes];
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            // Σ_j F_j sin(kπx_j) = DCT2[(-1)^j F_j] at index M-k.
            *o = -SQRT_2 * k as f64 * PI * buf[self.m - k] / m;
        }
        Ok(out)
    }

    pub fn analyze(&self, g: &GridField) -> Result<SpectralField> {
        if g.n_points() != self.m {
            return Err(SpectralError::GridTooCoarse {
                points: g.n_points(),
                modes: self.m,
            });
        }
        SpectralField::new(self.analyze_values(g.values()))
    }

    pub fn synthesize(&self, u: &SpectralField) -> Result<GridField> {
        Ok(GridField {
            values: self.synthesize_values(u.coeffs())?,
        })
    }

    pub fn apply_dx(&self, u: &SpectralField) -> Result<GridField> {
        Ok(GridField {
            values: self.synthesize_dx_values(u.coeffs())?,
        })
    }
}

/// Projects nodal values onto the basis, returning `M` coefficients.
pub fn analyze(g: &GridField) -> Result<SpectralField> {
    Collocation::new(g.n_points())?.analyze(g)
}

/// Evaluates `u` at the `m` collocation nodes.
pub fn synthesize(u: &SpectralField, m: usize) -> Result<GridField> {
    if m < u.n_modes() {
        return Err(SpectralError::GridTooCoarse {
            points: m,
            modes: u.n_modes(),
        });
    }
    Collocation::new(m)?.synthesize(u)
}

/// Spectral application of `I`: `d_k = -(kπ)^α c_k`, `d_0 = 0`.
#[allow(non_snake_case)]
pub fn apply_I(u: &SpectralField, alpha: f64) -> Result<SpectralField> {
    check_alpha(alpha)?;
    Ok(SpectralField::from_raw(
        u.coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| -multiplier(k, alpha) * c)
            .collect(),
    ))
}

/// Derivative of `u` at the `m` collocation nodes.
pub fn apply_dx(u: &SpectralField, m: usize) -> Result<GridField> {
    if m < u.n_modes() {
        return Err(SpectralError::GridTooCoarse {
            points: m,
            modes: u.n_modes(),
        });
    }
    Collocation::new(m)?.apply_dx(u)
}

/// Homogeneous seminorm `Σ_{k≥1} c_k² λ_k^s`.
pub fn seminorm_sq(u: &SpectralField, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(SpectralError::NegativeOrder(s));
    }
    Ok(u.coeffs()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * c * freq_pow(k, 2.0 * s))
        .sum())
}

/// `⟨u, v⟩` in the homogeneous `Ḣ^s` inner product.
pub fn seminorm_inner(u: &SpectralField, v: &SpectralField, s: f64) -> Result<f64> {
    if u.n_modes() != v.n_modes() {
        return Err(SpectralError::ModeMismatch {
            left: u.n_modes(),
            right: v.n_modes(),
        });
    }
    if !(s >= 0.0) {
        return Err(SpectralError::NegativeOrder(s));
    }
    Ok(u.coeffs()
        .iter()
        .zip(v.coeffs())
        .enumerate()
        .skip(1)
        .map(|(k, (a, b))| a * b * freq_pow(k, 2.0 * s))
        .sum())
}

/// Default tolerance on the mean of the data for [`invert_I`].
pub fn default_mean_tol(g: &SpectralField) -> f64 {
    1e-12 * (1.0 + g.max_abs())
}

/// Solves `-I(u) = g` with `∫u = 0`. The data must be mean-free.
#[allow(non_snake_case)]
pub fn invert_I(g: &SpectralField, alpha: f64) -> Result<SpectralField> {
    invert_I_with_tol(g, alpha, default_mean_tol(g))
}

#[allow(non_snake_case)]
pub fn invert_I_with_tol(g: &SpectralField, alpha: f64, mean_tol: f64) -> Result<SpectralField> {
    check_alpha(alpha)?;
    if g.mean().abs() > mean_tol {
        return Err(SpectralError::NonZeroMean {
            mean: g.mean(),
            tol: mean_tol,
        });
    }
    let mut coeffs: Vec<f64> = g
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| if k == 0 { 0.0 } else { c / multiplier(k, alpha) })
        .collect();
    coeffs[0] = 0.0;
    Ok(SpectralField::from_raw(coeffs))
}

/// Solves `-I(v) + ∫v = g`; bijective on the truncated coefficient space.
#[allow(non_snake_case)]
pub fn shifted_invert_I(g: &SpectralField, alpha: f64) -> Result<SpectralField> {
    check_alpha(alpha)?;
    Ok(SpectralField::from_raw(
        g.coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { *c } else { c / multiplier(k, alpha) })
            .collect(),
    ))
}
