//! Transmission modes and the receiver-side generative decoder, reduced to
//! what the scheduler needs: payload size, decode compute, and a quality
//! surrogate per (mode, denoising steps). The latent reverse update and the
//! guidance blend are provided as standalone kernels.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Raw bits of the source data, no decoder.
    Bit,
    /// Text vector only.
    TextOnly,
    /// Text plus a small token grid.
    HybridSmall,
    HybridMedium,
    HybridLarge,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Bit,
        Mode::TextOnly,
        Mode::HybridSmall,
        Mode::HybridMedium,
        Mode::HybridLarge,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Mode> {
        Mode::ALL.get(i).copied()
    }

    pub fn is_semantic(self) -> bool {
        self != Mode::Bit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub mode: Mode,
    /// Token grid (A, B); zero for bit and text-only modes.
    pub token_grid: (usize, usize),
    pub codebook_size: usize,
    pub text_bits: f64,
    pub uses_decoder: bool,
}

impl ModeSpec {
    pub fn token_bits(&self) -> f64 {
        let (a, b) = self.token_grid;
        if a == 0 || b == 0 {
            return 0.0;
        }
        (a * b) as f64 * (self.codebook_size as f64).log2()
    }
}

/// Saturating-exponential quality surrogate, PSNR in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityModel {
    pub floor_db: f64,
    /// Asymptotes for text-only and the three hybrid modes.
    pub asymptote_db: [f64; 4],
    pub rate_per_step: f64,
    pub bit_mode_db: f64,
}

impl Default for QualityModel {
    fn default() -> Self {
        Self {
            floor_db: 8.0,
            asymptote_db: [19.0, 22.0, 25.0, 28.0],
            rate_per_step: 0.5,
            bit_mode_db: 40.0,
        }
    }
}

impl QualityModel {
    pub fn validate(&self) -> Result<()> {
        let a = &self.asymptote_db;
        if !(a.windows(2).all(|w| w[0] < w[1]) && a[3] < self.bit_mode_db) {
            return Err(Error::config(
                "semantics.quality.asymptote_db",
                "asymptotes must increase strictly and stay below bit_mode_db",
            ));
        }
        if !(self.floor_db < a[0]) {
            return Err(Error::config("semantics.quality.floor_db", "must lie below every asymptote"));
        }
        if !(self.rate_per_step > 0.0) {
            return Err(Error::config("semantics.quality.rate_per_step", "must be positive"));
        }
        Ok(())
    }

    pub fn asymptote(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Bit => self.bit_mode_db,
            m => self.asymptote_db[m.index() - 1],
        }
    }

    /// Quality after `steps` denoising iterations.
    pub fn quality(&self, mode: Mode, steps: usize) -> f64 {
        if !mode.is_semantic() {
            return self.bit_mode_db;
        }
        let q_inf = self.asymptote(mode);
        q_inf - (q_inf - self.floor_db) * (-self.rate_per_step * steps as f64).exp()
    }

    /// Stable identifier of the active curve, embedded in result files.
    pub fn fingerprint(&self) -> String {
        format!(
            "sat-exp:q0={}:qinf={},{},{},{}:beta={}:cap={}",
            self.floor_db,
            self.asymptote_db[0],
            self.asymptote_db[1],
            self.asymptote_db[2],
            self.asymptote_db[3],
            self.rate_per_step,
            self.bit_mode_db
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticsConfig {
    pub text_bits: f64,
    pub codebook_size: usize,
    /// Token grids of the three hybrid sub-modes.
    pub hybrid_grids: [[usize; 2]; 3],
    pub step_cost_gflops: f64,
    pub max_steps: usize,
    pub quality: QualityModel,
    pub schedule_start: f64,
    pub schedule_end: f64,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        Self {
            text_bits: 4096.0,
            codebook_size: 1024,
            hybrid_grids: [[8, 8], [16, 16], [32, 32]],
            step_cost_gflops: 686.0,
            max_steps: 10,
            quality: QualityModel::default(),
            schedule_start: 0.9999,
            schedule_end: 0.02,
        }
    }
}

impl SemanticsConfig {
    pub fn validate(&self) -> Result<()> {
        self.quality.validate()?;
        if self.max_steps == 0 {
            return Err(Error::config("semantics.max_steps", "must be at least 1"));
        }
        if !(self.step_cost_gflops > 0.0) {
            return Err(Error::config("semantics.step_cost_gflops", "must be positive"));
        }
        if self.codebook_size < 2 {
            return Err(Error::config("semantics.codebook_size", "must be at least 2"));
        }
        let cells: Vec<usize> = self.hybrid_grids.iter().map(|g| g[0] * g[1]).collect();
        if !(cells[0] > 0 && cells.windows(2).all(|w| w[0] < w[1])) {
            return Err(Error::config(
                "semantics.hybrid_grids",
                "token counts must be positive and strictly increasing",
            ));
        }
        if !(self.text_bits > 0.0) {
            return Err(Error::config("semantics.text_bits", "must be positive"));
        }
        NoiseSchedule::linear(self.schedule_start, self.schedule_end, self.max_steps)
            .map_err(|e| Error::config("semantics.schedule_start", e.to_string()))?;
        Ok(())
    }

    pub fn mode_spec(&self, mode: Mode) -> ModeSpec {
        let token_grid = match mode {
            Mode::Bit | Mode::TextOnly => (0, 0),
            m => {
                let g = self.hybrid_grids[m.index() - 2];
                (g[0], g[1])
            }
        };
        ModeSpec {
            mode,
            token_grid,
            codebook_size: self.codebook_size,
            text_bits: self.text_bits,
            uses_decoder: mode.is_semantic(),
        }
    }

    pub fn compute_cost(&self, mode: Mode, steps: usize) -> Result<f64> {
        compute_cost(&self.mode_spec(mode), steps, self.step_cost_gflops, self.max_steps)
    }
}

/// Bits on the air: the whole task in bit mode, text plus tokens otherwise.
pub fn payload_bits(spec: &ModeSpec, task_size_bits: f64) -> f64 {
    match spec.mode {
        Mode::Bit => task_size_bits,
        _ => spec.text_bits + spec.token_bits(),
    }
}

/// Receiver decode cost in GFlops.
pub fn compute_cost(spec: &ModeSpec, steps: usize, step_cost_gflops: f64, max_steps: usize) -> Result<f64> {
    if !spec.uses_decoder {
        return Ok(0.0);
    }
    if steps == 0 || steps > max_steps {
        return Err(Error::InvalidArgument(format!(
            "denoising steps must lie in 1..={max_steps}, got {steps}"
        )));
    }
    Ok(step_cost_gflops * steps as f64)
}

/// Per-step factors and their running products for the latent diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds from cumulative products for steps 1..=L (step 0 is implicitly 1).
    pub fn from_cumulative(alpha_bars: Vec<f64>) -> Result<Self> {
        let mut prev = 1.0;
        let mut alphas = Vec::with_capacity(alpha_bars.len());
        for (i, &ab) in alpha_bars.iter().enumerate() {
            if !(ab > 0.0 && ab <= prev) {
                return Err(Error::InvalidArgument(format!(
                    "cumulative schedule must be positive and nonincreasing (step {})",
                    i + 1
                )));
            }
            alphas.push(ab / prev);
            prev = ab;
        }
        Ok(Self { alphas, alpha_bars })
    }

    /// Cumulative products falling linearly from `start` to `end`.
    pub fn linear(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 1 {
            return Self::from_cumulative(vec![start]);
        }
        let bars = (0..steps)
            .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
            .collect();
        Self::from_cumulative(bars)
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Per-step factor at step `l` (1-based).
    pub fn alpha(&self, l: usize) -> f64 {
        self.alphas[l - 1]
    }

    /// Cumulative product up to step `l`; 1 at `l = 0`.
    pub fn alpha_bar(&self, l: usize) -> f64 {
        if l == 0 {
            1.0
        } else {
            self.alpha_bars[l - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub values: Vec<f64>,
    pub step: usize,
}

/// Forward perturbation s_l = sqrt(abar_l) s_0 + sqrt(1 - abar_l) noise.
pub fn forward_perturb(clean: &[f64], noise: &[f64], schedule: &NoiseSchedule, step: usize) -> Result<LatentState> {
    if clean.len() != noise.len() {
        return Err(Error::InvalidArgument("latent and noise dimensions differ".into()));
    }
    if step > schedule.len() {
        return Err(Error::InvalidArgument(format!("step {step} beyond schedule")));
    }
    let ab = schedule.alpha_bar(step);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(LatentState {
        values: clean.iter().zip(noise).map(|(s, v)| a * s + b * v).collect(),
        step,
    })
}

/// One reverse update from step l to l - 1 driven by a noise prediction.
pub fn reverse_step(state: &LatentState, predicted_noise: &[f64], schedule: &NoiseSchedule) -> Result<LatentState> {
    let l = state.step;
    if l == 0 || l > schedule.len() {
        return Err(Error::InvalidArgument(format!(
            "reverse step needs 1 <= step <= {}, got {l}",
            schedule.len()
        )));
    }
    if predicted_noise.len() != state.values.len() {
        return Err(Error::InvalidArgument("latent and noise dimensions differ".into()));
    }
    let ab = schedule.alpha_bar(l);
    if ab >= 1.0 {
        return Err(Error::DegenerateSchedule { step: l });
    }
    let a = schedule.alpha(l);
    let noise_coeff = (1.0 - a) / (1.0 - ab).sqrt();
    let inv = 1.0 / a.sqrt();
    Ok(LatentState {
        values: state
            .values
            .iter()
            .zip(predicted_noise)
            .map(|(s, v)| inv * (s - noise_coeff * v))
            .collect(),
        step: l - 1,
    })
}

/// Guidance blend (1 + g) cond - g uncond.
pub fn guided_noise(cond: &[f64], uncond: &[f64], guidance: f64) -> Result<Vec<f64>> {
    if cond.len() != uncond.len() {
        return Err(Error::InvalidArgument(format!(
            "prediction dimensions differ: {} vs {}",
            cond.len(),
            uncond.len()
        )));
    }
    if !(guidance >= 0.0) {
        return Err(Error::InvalidArgument("guidance coefficient must be nonnegative".into()));
    }
    Ok(cond
        .iter()
        .zip(uncond)
        .map(|(c, u)| (1.0 + guidance) * c - guidance * u)
        .collect())
}
