//! Synthetic 2D line made of hyperbolic reflection events with a Ricker
//! source wavelet.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::datamodel::{GridGeometry, SeismicVolume};
use crate::error::{Error, Result};

/// Ricker wavelet `(1 − 2π²f²t²)·exp(−π²f²t²)`.
pub fn ricker(t: f64, f_peak: f64) -> f64 {
    let a = (PI * f_peak * t).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

/// One reflection with hyperbolic moveout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec {
    /// Zero-offset two-way time in seconds.
    pub t0: f64,
    /// Stacking velocity in m/s.
    pub velocity: f64,
    pub amplitude: f64,
}

impl EventSpec {
    pub fn new(t0: f64, velocity: f64, amplitude: f64) -> Result<Self> {
        let e = EventSpec { t0, velocity, amplitude };
        e.validate()?;
        Ok(e)
    }

    fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.velocity > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::arg(format!("invalid event {self:?}")));
        }
        Ok(())
    }

    /// Arrival time at source–receiver distance `offset` meters.
    pub fn arrival(&self, offset: f64) -> f64 {
        (self.t0 * self.t0 + (offset / self.velocity).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub geometry: GridGeometry,
    pub events: Vec<EventSpec>,
    pub peak_freq: f64,
    pub seed: u64,
    /// S/R in dB of additive white noise; `None` for clean data.
    pub noise_db: Option<f64>,
}

impl SynthConfig {
    /// 64 × 64 line, 512 samples at 4 ms, 12.5 m spacing, four events, 20 Hz.
    pub fn desk_scale(seed: u64) -> Self {
        let geometry = GridGeometry::square(64, 512, 0.004, 12.5).expect("valid desk geometry");
        SynthConfig {
            geometry,
            events: random_events(4, &geometry, seed),
            peak_freq: 20.0,
            seed,
            noise_db: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.events.is_empty() {
            return Err(Error::arg("synthetic data needs at least one event"));
        }
        for e in &self.events {
            e.validate()?;
        }
        if !(self.peak_freq > 0.0 && self.peak_freq < self.geometry.nyquist()) {
            return Err(Error::arg(format!(
                "peak frequency {} Hz must lie in (0, {}) Hz",
                self.peak_freq,
                self.geometry.nyquist()
            )));
        }
        Ok(())
    }
}

/// Draws `count` events spread over the first 70% of the record.
pub fn random_events(count: usize, geometry: &GridGeometry, seed: u64) -> Vec<EventSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_max = (geometry.n_time - 1) as f64 * geometry.dt;
    let mut events: Vec<EventSpec> = (0..count)
        .map(|_| {
            let t0 = rng.random_range(0.1 * t_max..0.7 * t_max);
            let velocity = rng.random_range(1500.0..3000.0);
            let sign = if rng.random_bool(0.8) { 1.0 } else { -1.0 };
            let amplitude = sign * rng.random_range(0.5..1.0);
            EventSpec { t0, velocity, amplitude }
        })
        .collect();
    events.sort_by(|a, b| a.t0.total_cmp(&b.t0));
    events
}

pub fn generate(cfg: &SynthConfig) -> Result<SeismicVolume> {
    cfg.validate()?;
    let g = cfg.geometry;
    let n = g.n();
    let t_max = (g.n_time - 1) as f64 * g.dt;
    let offset = |s: usize, r: usize| (s as f64 * g.d_src - r as f64 * g.d_rcv).abs();

    let min_offset = (0..n)
        .flat_map(|s| (0..n).map(move |r| (s, r)))
        .map(|(s, r)| offset(s, r))
        .fold(f64::INFINITY, f64::min);
    let events: Vec<&EventSpec> = cfg
        .events
        .iter()
        .filter(|e| {
            let visible = e.arrival(min_offset) <= t_max;
            if !visible {
                log::warn!("event at t0 = {} s arrives after the record ends; skipped", e.t0);
            }
            visible
        })
        .collect();

    let mut vol = SeismicVolume::zeros(g);
    for s in 0..n {
        for r in 0..n {
            let h = offset(s, r);
            let arrivals: Vec<(f64, f64)> = events.iter().map(|e| (e.arrival(h), e.amplitude)).collect();
            for (j, x) in vol.trace_mut(s, r).iter_mut().enumerate() {
                let t = j as f64 * g.dt;
                *x = arrivals.iter().map(|&(ta, a)| a * ricker(t - ta, cfg.peak_freq)).sum();
            }
        }
    }

    if let Some(db) = cfg.noise_db {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let noise: Vec<f64> = (0..g.n_samples()).map(|_| rng.sample(StandardNormal)).collect();
        let noise_norm = noise.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = vol.norm() / noise_norm * 10f64.powf(-db / 20.0);
        let samples = vol.samples().iter().zip(&noise).map(|(x, e)| x + scale * e).collect();
        vol = SeismicVolume::new(g, samples)?;
    }
    Ok(vol)
}
