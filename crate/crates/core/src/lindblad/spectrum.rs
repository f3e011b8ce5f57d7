//! Emission spectra from the quantum regression theorem.
//!
//! The correlation `G(τ) = ⟨b†(τ) b(0)⟩ = tr(b† e^{Lτ}(b ρ_ss))` is obtained by
//! propagating `X = b ρ_ss`, which lies in the coherence sector `k = −1`, with
//! the exact one-step propagator `exp(M Δτ)` of that sector on a uniform grid.
//!
//! Frame convention: in the rotating frame a component oscillating as
//! `b ~ e^{−iω_L t}` gives `G ~ e^{+iω_L τ}`. The spectrum is evaluated as
//! `S(f) = 2 Re ∫₀^∞ e^{−i2πfτ} G(τ) dτ`, so that emission above the
//! resonator frequency appears at positive `f`. It is normalized so that
//! `∫ S(f) df = ⟨b†b⟩`, i.e. PSD in phonons per MHz.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lindblad::density::{expectation, DensityMatrix};
use crate::lindblad::superop::SuperOperator;
use crate::model::{mode_op, number_op};
use crate::units::TWO_PI;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumOptions {
    /// Sampling interval (µs). Defaults to the Nyquist interval of the
    /// Liouvillian's spectral bound.
    pub dt: Option<f64>,
    /// Propagation stops once `|G|` stays below this fraction of `G(0)` over
    /// a full window.
    pub tail_tolerance: f64,
    /// Window length (samples) for the tail test.
    pub window: usize,
    /// Upper limit on the number of samples.
    pub max_samples: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { dt: None, tail_tolerance: 1e-5, window: 256, max_samples: 400_000 }
    }
}

/// Sampled `G(τ_j) = G(j Δτ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub dt: f64,
    pub values: Vec<C64>,
    /// `max |G|` over the final window relative to `|G(0)|`.
    pub tail: f64,
    pub decayed: bool,
}

impl Correlation {
    pub fn horizon(&self) -> f64 {
        self.dt * self.values.len().saturating_sub(1) as f64
    }

    /// `S(f)` by trapezoidal quadrature, before clipping.
    pub fn transform(&self, frequencies: &[f64]) -> Vec<f64> {
        let n = self.values.len();
        frequencies
            .iter()
            .map(|&f| {
                if n == 0 {
                    return 0.0;
                }
                let step = C64::from_polar(1.0, -TWO_PI * f * self.dt);
                let mut phase = C64::new(1.0, 0.0);
                let mut acc = C64::new(0.0, 0.0);
                for (j, &g) in self.values.iter().enumerate() {
                    let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
                    acc += g * phase * w;
                    phase *= step;
                }
                2.0 * (acc * self.dt).re
            })
            .collect()
    }

    /// Frequencies `k / (2 n Δτ)` for `−n ≤ k < n`. On this grid the sum
    /// `Σ S(f_k) Δf` equals `Re G(0)` exactly.
    pub fn natural_grid(&self) -> Vec<f64> {
        let n = self.values.len().max(1) as i64;
        let df = 1.0 / (2.0 * n as f64 * self.dt);
        (-n..n).map(|k| k as f64 * df).collect()
    }

    /// [`Self::transform`] on [`Self::natural_grid`], by FFT.
    pub fn transform_natural(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.values.len();
        let grid = self.natural_grid();
        if n == 0 {
            return (grid, vec![0.0; 2]);
        }
        let mut buf = vec![C64::new(0.0, 0.0); 2 * n];
        for (j, &g) in self.values.iter().enumerate() {
            let w = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
            buf[j] = g * w;
        }
        FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
        // Bin m holds frequency m / (2 n Δτ); negative k wrap to m = k + 2n.
        let psd = (0..2 * n)
            .map(|i| {
                let k = i as i64 - n as i64;
                let m = k.rem_euclid(2 * n as i64) as usize;
                2.0 * (buf[m] * self.dt).re
            })
            .collect();
        (grid, psd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// MHz relative to the resonator frame.
    pub frequencies: Vec<f64>,
    /// Phonons per MHz, clipped at zero.
    pub psd: Vec<f64>,
    /// `⟨b†b⟩` of the state the spectrum was computed from.
    pub n_mean: f64,
    pub dt: f64,
    pub horizon: f64,
    pub tail: f64,
    pub decayed: bool,
    /// Magnitude of the most negative value removed by clipping.
    pub max_clip: f64,
    pub params_hash: Option<String>,
    pub warnings: Vec<String>,
}

impl Spectrum {
    /// Trapezoidal `∫ S df` over the grid.
    pub fn integral(&self) -> f64 {
        self.frequencies
            .windows(2)
            .zip(self.psd.windows(2))
            .map(|(f, s)| 0.5 * (f[1] - f[0]) * (s[0] + s[1]))
            .sum()
    }
}

/// Propagates `b ρ` and samples the correlation until it decays.
pub fn phonon_correlation(l: &SuperOperator, rho: &DensityMatrix, opts: &SpectrumOptions) -> Result<Correlation> {
    let space = l.space();
    if rho.space() != space {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: rho.space().dim() });
    }
    let b = mode_op(space);
    let x0 = b.mul_dense(rho.matrix());
    let sector = l.sector(-1)?;
    let leak = sector.leakage(&x0);
    if leak > 1e-10 * x0.camax().max(1e-300) {
        return Err(Error::InvalidState(format!(
            "b ρ has weight {leak:.2e} outside the k = −1 sector; ρ is not a steady state of a charge-conserving model"
        )));
    }
    let dt = match opts.dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(Error::InvalidParameter { name: "dt".into(), reason: format!("{dt}") }),
        None => std::f64::consts::PI / l.spectral_bound().max(1e-12),
    };
    let weights = DVector::from_vec(sector.trace_functional(&b.adjoint()));
    let mut x = DVector::from_vec(sector.pack(&x0));
    let g0 = weights.dot(&x);
    let mut values = vec![g0];
    let scale = g0.norm();
    if scale == 0.0 {
        return Ok(Correlation { dt, values, tail: 0.0, decayed: true });
    }
    let m = l.sector_matrix(&sector)?;
    let prop: DMatrix<C64> = (m * C64::new(dt, 0.0)).exp();
    let window = opts.window.max(2);
    let mut run_max: f64 = 0.0;
    let mut since_reset = 0usize;
    let mut buf = DVector::zeros(x.len());
    loop {
        prop.mul_to(&x, &mut buf);
        std::mem::swap(&mut x, &mut buf);
        let g = weights.dot(&x);
        values.push(g);
        run_max = run_max.max(g.norm());
        since_reset += 1;
        if since_reset == window {
            if run_max < opts.tail_tolerance * scale {
                return Ok(Correlation { dt, values, tail: run_max / scale, decayed: true });
            }
            run_max = 0.0;
            since_reset = 0;
        }
        if values.len() >= opts.max_samples {
            let tail_start = values.len().saturating_sub(window);
            let tail = values[tail_start..].iter().map(|v| v.norm()).fold(0.0, f64::max) / scale;
            return Ok(Correlation { dt, values, tail, decayed: false });
        }
    }
}

/// The regression spectrum on `frequencies` (MHz). An empty grid selects
/// [`Correlation::natural_grid`].
pub fn emission_spectrum(
    l: &SuperOperator,
    rho: &DensityMatrix,
    frequencies: &[f64],
    opts: &SpectrumOptions,
) -> Result<Spectrum> {
    let corr = phonon_correlation(l, rho, opts)?;
    Ok(spectrum_from_correlation(&corr, rho, frequencies))
}

pub fn spectrum_from_correlation(corr: &Correlation, rho: &DensityMatrix, frequencies: &[f64]) -> Spectrum {
    let (frequencies, raw) = if frequencies.is_empty() {
        corr.transform_natural()
    } else {
        (frequencies.to_vec(), corr.transform(frequencies))
    };
    let max_clip = raw.iter().map(|&s| (-s).max(0.0)).fold(0.0, f64::max);
    let psd = raw.iter().map(|&s| s.max(0.0)).collect();
    let n_mean = expectation(rho, &number_op(rho.space())).map(|v| v.re).unwrap_or(f64::NAN);
    let mut warnings = Vec::new();
    if !corr.decayed {
        warnings.push(format!(
            "correlation not decayed within the horizon of {:.3} us: tail magnitude {:.2e} of G(0)",
            corr.horizon(),
            corr.tail
        ));
    }
    Spectrum {
        frequencies,
        psd,
        n_mean,
        dt: corr.dt,
        horizon: corr.horizon(),
        tail: corr.tail,
        decayed: corr.decayed,
        max_clip,
        params_hash: None,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{HilbertSpace, Level};
    use crate::lindblad::steady::steady_state;
    use crate::model::{Channel, ChannelKind};
    use crate::operator::OperatorMatrix;
    use crate::params::ModelParams;
    use crate::units::angular;

    fn decay_only(kappa_mhz: f64, cutoff: usize) -> SuperOperator {
        let s = HilbertSpace::new(cutoff).unwrap();
        SuperOperator::new(OperatorMatrix::zero(s), vec![Channel::new(ChannelKind::ResonatorLoss, mode_op(s), angular(kappa_mhz))]).unwrap()
    }

    #[test]
    fn thermal_mode_gives_a_lorentzian_of_width_kappa() {
        let kappa = 2.0;
        let l = decay_only(kappa, 12);
        let rho = DensityMatrix::thermal_mode(l.space(), Level::G, 0.5).unwrap();
        let n = expectation(&rho, &number_op(l.space())).unwrap().re;
        let freqs: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.05).collect();
        let opts = SpectrumOptions { dt: Some(0.0005), ..Default::default() };
        let sp = emission_spectrum(&l, &rho, &freqs, &opts).unwrap();
        assert!(sp.decayed);
        for (&f, &s) in freqs.iter().zip(&sp.psd) {
            let lorentz = n * (kappa / TWO_PI) / (f * f + kappa * kappa / 4.0);
            assert!((s - lorentz).abs() < 1e-3 * lorentz.max(0.01), "f = {f}: {s} vs {lorentz}");
        }
    }

    #[test]
    fn natural_grid_obeys_the_sum_rule() {
        let l = decay_only(1.0, 8);
        let rho = DensityMatrix::thermal_mode(l.space(), Level::G, 1.2).unwrap();
        let sp = emission_spectrum(&l, &rho, &[], &SpectrumOptions::default()).unwrap();
        // Clipping the small negative quadrature ripple shifts the integral slightly.
        assert!((sp.integral() - sp.n_mean).abs() < 1e-3 * sp.n_mean, "{} vs {}", sp.integral(), sp.n_mean);
        let corr = phonon_correlation(&l, &rho, &SpectrumOptions::default()).unwrap();
        let (grid, fast) = corr.transform_natural();
        let df = grid[1] - grid[0];
        let raw_sum: f64 = fast.iter().sum::<f64>() * df;
        assert!((raw_sum - sp.n_mean).abs() < 1e-9 * sp.n_mean, "{raw_sum} vs {}", sp.n_mean);
        let picks: Vec<usize> = (0..grid.len()).step_by(grid.len() / 17).collect();
        let slow = corr.transform(&picks.iter().map(|&i| grid[i]).collect::<Vec<_>>());
        for (&i, s) in picks.iter().zip(slow) {
            assert!((fast[i] - s).abs() < 1e-9 * (1.0 + s.abs()), "f = {}", grid[i]);
        }
    }

    #[test]
    fn vacuum_has_no_emission() {
        let p = ModelParams { fock_cutoff: 3, ..Default::default() };
        let l = SuperOperator::from_params(&p).unwrap();
        let rho = steady_state(&l).unwrap();
        let sp = emission_spectrum(&l, &rho, &[-1.0, 0.0, 1.0], &SpectrumOptions::default()).unwrap();
        assert!(sp.psd.iter().all(|&s| s.abs() < 1e-15));
    }

    #[test]
    fn off_sector_state_is_rejected() {
        let l = decay_only(1.0, 3);
        let mut psi = DVector::zeros(l.space().dim());
        psi[l.space().index(Level::G, 0)] = C64::new(1.0, 0.0);
        psi[l.space().index(Level::G, 1)] = C64::new(1.0, 0.0);
        let rho = DensityMatrix::pure(l.space(), &psi).unwrap();
        assert!(phonon_correlation(&l, &rho, &SpectrumOptions::default()).is_err());
    }
}
