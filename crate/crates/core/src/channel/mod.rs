//! Satellite-to-ground and inter-satellite link models.
//!
//! The downlink coefficient is a free-space amplitude with a per-link phase,
//! aged by a Doppler-driven correlation `rho = J0(2 pi f_D delta)` that mixes
//! in a fresh complex Gaussian innovation. Capacities are Shannon rates.

mod bessel;

pub use bessel::bessel_j0;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::orbits::{doppler, GeometrySnapshot};
use crate::{Error, Result, BOLTZMANN, SPEED_OF_LIGHT};

/// Variance of the complex Gaussian innovation mixed in by CSI aging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Innovation {
    /// CN(0, 1).
    Unit,
    /// CN(0, |h_ideal|^2): the innovation carries the same power as the ideal link.
    MatchIdeal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    /// Linear transmit antenna gain.
    pub tx_gain: f64,
    pub carrier_frequency_hz: f64,
    pub tx_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_temperature_k: f64,
    pub csi_delay_s: f64,
    pub innovation: Innovation,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            tx_gain: 1e4,
            carrier_frequency_hz: 25e9,
            tx_power_w: 1.0,
            bandwidth_hz: 30e6,
            noise_temperature_k: 290.0,
            csi_delay_s: 1e-6,
            innovation: Innovation::MatchIdeal,
        }
    }
}

impl LinkParams {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Thermal noise power k T b, W.
    pub fn noise_power_w(&self) -> f64 {
        BOLTZMANN * self.noise_temperature_k * self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("channel.tx_gain", self.tx_gain),
            ("channel.carrier_frequency_hz", self.carrier_frequency_hz),
            ("channel.tx_power_w", self.tx_power_w),
            ("channel.bandwidth_hz", self.bandwidth_hz),
            ("channel.noise_temperature_k", self.noise_temperature_k),
            ("channel.csi_delay_s", self.csi_delay_s),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be positive and finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IslParams {
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    /// Linear peak antenna gain.
    pub peak_gain: f64,
    pub noise_temperature_k: f64,
    pub carrier_frequency_hz: f64,
}

impl Default for IslParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 100e6,
            tx_power_w: 5.0,
            peak_gain: 1e4,
            noise_temperature_k: 290.0,
            carrier_frequency_hz: 25e9,
        }
    }
}

impl IslParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("isl.bandwidth_hz", self.bandwidth_hz),
            ("isl.tx_power_w", self.tx_power_w),
            ("isl.peak_gain", self.peak_gain),
            ("isl.noise_temperature_k", self.noise_temperature_k),
            ("isl.carrier_frequency_hz", self.carrier_frequency_hz),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Free-space coefficient sqrt(G) lambda / (4 pi d) at phase `phase`.
pub fn ideal_coeff(tx_gain: f64, wavelength_m: f64, distance_m: f64, phase: f64) -> Result<Complex64> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "link distance must be positive, got {distance_m}"
        )));
    }
    let magnitude = tx_gain.sqrt() * wavelength_m / (4.0 * std::f64::consts::PI * distance_m);
    Ok(Complex64::from_polar(magnitude, phase))
}

/// CSI correlation J0(2 pi f_D delta) clamped to [0, 1].
pub fn correlation(doppler_hz: f64, delay_s: f64) -> f64 {
    bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * delay_s).clamp(0.0, 1.0)
}

fn complex_gaussian<R: Rng + ?Sized>(std: f64, rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (std * std::f64::consts::FRAC_1_SQRT_2)
}

/// Aged coefficient `rho * ideal + sqrt(1 - rho^2) * g` with g ~ CN(0, 1).
pub fn age_channel<R: Rng + ?Sized>(ideal: Complex64, rho: f64, rng: &mut R) -> Complex64 {
    age_channel_with(ideal, rho, 1.0, rng)
}

/// As [`age_channel`] with g ~ CN(0, innovation_std^2).
///
/// Both Gaussian components are always drawn so the stream position does not
/// depend on `rho`.
pub fn age_channel_with<R: Rng + ?Sized>(
    ideal: Complex64,
    rho: f64,
    innovation_std: f64,
    rng: &mut R,
) -> Complex64 {
    let g = complex_gaussian(innovation_std, rng);
    if rho >= 1.0 {
        return ideal;
    }
    ideal * rho + g * (1.0 - rho * rho).sqrt()
}

/// Shannon rate b log2(1 + P |h|^2 / sigma^2), bit/s.
pub fn downlink_rate(tx_power_w: f64, h: Complex64, noise_power_w: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + tx_power_w * h.norm_sqr() / noise_power_w).log2()
}

/// Received SNR of an inter-satellite link at `distance_m`.
pub fn isl_snr(params: &IslParams, distance_m: f64) -> f64 {
    let path = 4.0 * std::f64::consts::PI * distance_m * params.carrier_frequency_hz / SPEED_OF_LIGHT;
    params.tx_power_w * params.peak_gain * params.peak_gain
        / (BOLTZMANN * params.noise_temperature_k * params.bandwidth_hz * path * path)
}

/// Inter-satellite Shannon rate at `distance_m`, bit/s.
pub fn isl_rate(params: &IslParams, distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ISL distance must be positive, got {distance_m}"
        )));
    }
    Ok(params.bandwidth_hz * (1.0 + isl_snr(params, distance_m)).log2())
}

/// Rate between two distinct satellites of a snapshot.
pub fn isl_rate_between(params: &IslParams, snapshot: &GeometrySnapshot, m1: usize, m2: usize) -> Result<f64> {
    if m1 == m2 {
        return Err(Error::InvalidArgument(format!(
            "ISL endpoints must differ, got {m1} twice"
        )));
    }
    isl_rate(params, snapshot.isl_distances[[m1, m2]] * 1e3)
}

/// Realised channels and rates for every link at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub slot: usize,
    pub ideal: Array2<Complex64>,
    pub aged: Array2<Complex64>,
    pub correlation: Array2<f64>,
    /// J0 before clamping, kept for diagnostics.
    pub raw_correlation: Array2<f64>,
    pub downlink_rate: Array2<f64>,
    /// Zero on the diagonal.
    pub isl_rate: Array2<f64>,
    /// Links below the elevation mask are flagged unusable.
    pub usable: Array2<bool>,
}

/// Draws the aged channel for every (satellite, user) link at the snapshot's slot.
/// `phases` is the per-link antenna phase, fixed for the episode.
pub fn sample_channels<R: Rng + ?Sized>(
    snapshot: &GeometrySnapshot,
    link: &LinkParams,
    isl: &IslParams,
    phases: &Array2<f64>,
    rng: &mut R,
) -> Result<ChannelSample> {
    let (m_count, n_count) = snapshot.distances.dim();
    let wavelength = link.wavelength_m();
    let noise = link.noise_power_w();
    let mut ideal = Array2::zeros((m_count, n_count));
    let mut aged = Array2::zeros((m_count, n_count));
    let mut rho = Array2::zeros((m_count, n_count));
    let mut raw = Array2::zeros((m_count, n_count));
    let mut rate = Array2::zeros((m_count, n_count));
    for m in 0..m_count {
        for n in 0..n_count {
            let h_hat = ideal_coeff(
                link.tx_gain,
                wavelength,
                snapshot.distances[[m, n]] * 1e3,
                phases[[m, n]],
            )?;
            let f_d = doppler(snapshot, m, n, link.carrier_frequency_hz);
            let j0 = bessel_j0(2.0 * std::f64::consts::PI * f_d * link.csi_delay_s);
            let r = j0.clamp(0.0, 1.0);
            let std = match link.innovation {
                Innovation::Unit => 1.0,
                Innovation::MatchIdeal => h_hat.norm(),
            };
            let h = age_channel_with(h_hat, r, std, rng);
            ideal[[m, n]] = h_hat;
            aged[[m, n]] = h;
            rho[[m, n]] = r;
            raw[[m, n]] = j0;
            rate[[m, n]] = downlink_rate(link.tx_power_w, h, noise, link.bandwidth_hz);
        }
    }
    let mut isl_rates = Array2::zeros((m_count, m_count));
    for a in 0..m_count {
        for b in 0..m_count {
            if a != b {
                isl_rates[[a, b]] = isl_rate_between(isl, snapshot, a, b)?;
            }
        }
    }
    Ok(ChannelSample {
        slot: snapshot.slot,
        ideal,
        aged,
        correlation: rho,
        raw_correlation: raw,
        downlink_rate: rate,
        isl_rate: isl_rates,
        usable: snapshot.visible.clone(),
    })
}
