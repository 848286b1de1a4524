//! Time-bin states and the two overlap distances used by the no-go test.
//!
//! Bins are indexed from zero in this API. A multimode coherent state is
//! stored as one complex amplitude per bin; inner products between coherent
//! states use the closed form
//! `<a|b> = exp(-(|a|^2 + |b|^2)/2 + sum_j conj(a_j) b_j)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Which preparation a coherent state stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLabel {
    /// Pulse train with bin `k` left empty.
    MissingBin(usize),
    /// Uniform train over all bins.
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodeCoherentState {
    amplitudes: Vec<Complex64>,
    label: Option<StateLabel>,
}

impl MultimodeCoherentState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::domain(format!(
                "coherent state needs at least 2 bins, got {}",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::domain("non-finite amplitude"));
        }
        Ok(Self {
            amplitudes,
            label: None,
        })
    }

    pub fn with_label(mut self, label: StateLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn label(&self) -> Option<StateLabel> {
        self.label
    }

    /// Total mean photon number, `sum_j |a_j|^2`.
    pub fn mean_photons(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// A normalized state in the single-photon sector, `sum_j c_j |j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleExcitationState {
    coefficients: Vec<Complex64>,
}

impl SingleExcitationState {
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::domain(format!(
                "state needs at least 2 bins, got {}",
                coefficients.len()
            )));
        }
        let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("state is not normalized: |c|^2 = {norm}")));
        }
        Ok(Self { coefficients })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }
}

/// Pure states with an inner product, so that `delta` works on either kind.
pub trait PureState {
    fn dim(&self) -> usize;
    fn inner(&self, other: &Self) -> Result<Complex64>;
}

impl PureState for SingleExcitationState {
    fn dim(&self) -> usize {
        self.coefficients.len()
    }

    fn inner(&self, other: &Self) -> Result<Complex64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

impl PureState for MultimodeCoherentState {
    fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    fn inner(&self, other: &Self) -> Result<Complex64> {
        coherent_overlap(self, other)
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimMismatch { left, right });
    }
    Ok(())
}

fn check_bin(d: usize, k: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    if k >= d {
        return Err(Error::domain(format!("bin index {k} out of range for d={d}")));
    }
    Ok(())
}

/// `(1/sqrt(d-1)) sum_{j != k} |j>`.
pub fn make_missing_bin_state(d: usize, k: usize) -> Result<SingleExcitationState> {
    check_bin(d, k)?;
    let c = Complex64::new(1.0 / ((d - 1) as f64).sqrt(), 0.0);
    let coefficients = (0..d)
        .map(|j| if j == k { Complex64::new(0.0, 0.0) } else { c })
        .collect();
    SingleExcitationState::new(coefficients)
}

/// `(1/sqrt(d)) sum_j |j>`.
pub fn make_uniform_state(d: usize) -> Result<SingleExcitationState> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    let c = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    SingleExcitationState::new(vec![c; d])
}

/// Coherent pulse train with total mean photon number `mean_photons`.
///
/// With `missing = Some(k)` the amplitude is `alpha e^{i phi_j} / sqrt(d-1)` on
/// every bin except `k`, which is exactly zero. With `None` it is the reference
/// train `alpha e^{i phi_j} / sqrt(d)`. Phases default to zero.
pub fn make_coherent_state(
    d: usize,
    missing: Option<usize>,
    mean_photons: f64,
    phases: Option<&[f64]>,
) -> Result<MultimodeCoherentState> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    if !(mean_photons > 0.0) || !mean_photons.is_finite() {
        return Err(Error::domain(format!(
            "mean photon number must be positive, got {mean_photons}"
        )));
    }
    if let Some(k) = missing {
        check_bin(d, k)?;
    }
    if let Some(p) = phases {
        check_dims(d, p.len())?;
    }
    let occupied = if missing.is_some() { d - 1 } else { d };
    let magnitude = (mean_photons / occupied as f64).sqrt();
    let amplitudes = (0..d)
        .map(|j| {
            if Some(j) == missing {
                Complex64::new(0.0, 0.0)
            } else {
                let phase = phases.map_or(0.0, |p| p[j]);
                Complex64::from_polar(magnitude, phase)
            }
        })
        .collect();
    let label = match missing {
        Some(k) => StateLabel::MissingBin(k),
        None => StateLabel::Reference,
    };
    Ok(MultimodeCoherentState::new(amplitudes)?.with_label(label))
}

fn cross_term(a: &MultimodeCoherentState, b: &MultimodeCoherentState) -> Result<Complex64> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum())
}

pub fn coherent_overlap(a: &MultimodeCoherentState, b: &MultimodeCoherentState) -> Result<Complex64> {
    let s = cross_term(a, b)?;
    Ok((s - 0.5 * (a.mean_photons() + b.mean_photons())).exp())
}

/// `1 - |<a|b>|`, clamped to [0, 1] against rounding.
pub fn delta<S: PureState>(a: &S, b: &S) -> Result<f64> {
    let overlap = a.inner(b)?.norm();
    Ok((1.0 - overlap).clamp(0.0, 1.0))
}

/// `exp(z) - 1` without cancellation for small `|z|`.
pub(crate) fn exp_m1_complex(z: Complex64) -> Complex64 {
    let (sin, cos) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * cos - 2.0 * half * half, z.re.exp() * sin)
}

/// Inner product of the two states after projecting out the vacuum and
/// renormalizing.
pub fn vacuum_projected_overlap(a: &MultimodeCoherentState, b: &MultimodeCoherentState) -> Result<Complex64> {
    let s = cross_term(a, b)?;
    let (na, nb) = (a.mean_photons(), b.mean_photons());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("vacuum-projected overlap undefined for a vacuum state"));
    }
    Ok(exp_m1_complex(s) / (na.exp_m1() * nb.exp_m1()).sqrt())
}

/// `1 - |<a~|b~>|` on the vacuum-projected states.
pub fn delta0(a: &MultimodeCoherentState, b: &MultimodeCoherentState) -> Result<f64> {
    Ok((1.0 - vacuum_projected_overlap(a, b)?.norm()).clamp(0.0, 1.0))
}

/// Distance between the missing-bin train and the reference train at zero
/// phase noise: `1 - (e^{a sqrt((d-1)/d)} - 1)/(e^a - 1)` with `a = <n>`.
pub fn delta0_closed_form(d: usize, mean_photons: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain(format!("dimension must be at least 2, got {d}")));
    }
    if !(mean_photons > 0.0) {
        return Err(Error::domain(format!(
            "mean photon number must be positive, got {mean_photons}"
        )));
    }
    let ratio = ((d - 1) as f64 / d as f64).sqrt();
    Ok(1.0 - (mean_photons * ratio).exp_m1() / mean_photons.exp_m1())
}

/// `1 - sqrt((d-1)/d)`: the single-photon distance the coherent version
/// approaches as the mean photon number goes to zero.
pub fn single_photon_distance(d: usize) -> f64 {
    1.0 - ((d - 1) as f64 / d as f64).sqrt()
}

/// Truncated Fock-basis expansion, used to cross-check the closed forms.
///
/// Each mode is expanded independently as
/// `e^{-|a|^2/2} sum_{n <= max_photons} a^n / sqrt(n!) |n>` and overlaps are
/// products of per-mode sums. Nothing here goes through the exponential of
/// the cross term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockTruncation {
    max_photons: usize,
}

impl Default for FockTruncation {
    fn default() -> Self {
        Self { max_photons: 12 }
    }
}

impl FockTruncation {
    pub fn new(max_photons: usize) -> Result<Self> {
        if max_photons < 2 {
            return Err(Error::domain(format!(
                "Fock truncation needs at least 2 photons, got {max_photons}"
            )));
        }
        Ok(Self { max_photons })
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    fn mode_amplitudes(&self, a: Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.max_photons + 1);
        let mut term = Complex64::new((-0.5 * a.norm_sqr()).exp(), 0.0);
        out.push(term);
        for n in 1..=self.max_photons {
            term = term * a / (n as f64).sqrt();
            out.push(term);
        }
        out
    }

    fn mode_overlap(&self, a: Complex64, b: Complex64) -> Complex64 {
        self.mode_amplitudes(a)
            .iter()
            .zip(self.mode_amplitudes(b))
            .map(|(x, y)| x.conj() * y)
            .sum()
    }

    pub fn overlap(&self, a: &MultimodeCoherentState, b: &MultimodeCoherentState) -> Result<Complex64> {
        check_dims(a.dim(), b.dim())?;
        Ok(a.amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| self.mode_overlap(*x, *y))
            .product())
    }

    fn vacuum_amplitude(&self, a: &MultimodeCoherentState) -> f64 {
        a.amplitudes.iter().map(|x| (-0.5 * x.norm_sqr()).exp()).product()
    }

    fn norm_sqr(&self, a: &MultimodeCoherentState) -> f64 {
        a.amplitudes
            .iter()
            .map(|x| self.mode_amplitudes(*x).iter().map(|c| c.norm_sqr()).sum::<f64>())
            .product()
    }

    pub fn vacuum_projected_overlap(
        &self,
        a: &MultimodeCoherentState,
        b: &MultimodeCoherentState,
    ) -> Result<Complex64> {
        let full = self.overlap(a, b)?;
        let (va, vb) = (self.vacuum_amplitude(a), self.vacuum_amplitude(b));
        let na = self.norm_sqr(a) - va * va;
        let nb = self.norm_sqr(b) - vb * vb;
        if na <= 0.0 || nb <= 0.0 {
            return Err(Error::domain("vacuum-projected overlap undefined for a vacuum state"));
        }
        Ok((full - va * vb) / (na * nb).sqrt())
    }
}
