//! The simulated pH channel.
//!
//! Excess acid concentration in the vessel follows a first-order tank,
//!
//! ```text
//! dx/dt = -x / decay_tau + u(t),   u = +-A / injection_ms while a pump runs
//! ```
//!
//! and reaches the electrode through `response_stages` identical first-order
//! lags of time constant `response_tau_ms` (a tanks-in-series dispersion
//! model). With zero stages the electrode sees `x` directly. The reading is
//!
//! ```text
//! pH = ph_baseline - nonlinearity_scale * asinh(x_sensor) + N(0, noise_std^2)
//! ```
//!
//! Acid and base are symmetric (`u` is odd in polarity, `asinh` is odd).

use super::scheme::{InjectionEvent, ModulationScheme};
use crate::error::{Error, Result};
use crate::numerics::PrngState;

/// Longest integration sub-step. Sample instants and event edges are always hit exactly.
const MAX_SUBSTEP_MS: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelModel {
    pub ph_baseline: f64,
    pub injection_amplitude: f64,
    pub decay_tau_ms: f64,
    pub nonlinearity_scale: f64,
    pub noise_std: f64,
    pub jitter_ms: f64,
    pub response_stages: u32,
    pub response_tau_ms: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            ph_baseline: 7.0,
            injection_amplitude: 1.0,
            decay_tau_ms: 400.0,
            nonlinearity_scale: 1.0,
            noise_std: 0.6,
            jitter_ms: 10.0,
            response_stages: 3,
            response_tau_ms: 100.0,
        }
    }
}

impl ChannelModel {
    /// Same channel with noise and jitter switched off.
    pub fn noiseless(&self) -> Self {
        ChannelModel {
            noise_std: 0.0,
            jitter_ms: 0.0,
            ..*self
        }
    }

    /// Single tank, no electrode lag.
    pub fn direct(&self) -> Self {
        ChannelModel {
            response_stages: 0,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.ph_baseline.is_finite()
            && self.decay_tau_ms > 0.0
            && self.injection_amplitude > 0.0
            && self.nonlinearity_scale > 0.0
            && self.noise_std >= 0.0
            && self.jitter_ms >= 0.0
            && (self.response_stages == 0 || self.response_tau_ms > 0.0)
            && self.decay_tau_ms.is_finite()
            && self.injection_amplitude.is_finite()
            && self.nonlinearity_scale.is_finite()
            && self.noise_std.is_finite()
            && self.jitter_ms.is_finite()
            && self.response_tau_ms.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid channel parameters: {self:?}"
            )))
        }
    }

    /// Noise-free pH for a given sensor-side concentration.
    pub fn ph_of(&self, concentration: f64) -> f64 {
        self.ph_baseline - self.nonlinearity_scale * concentration.asinh()
    }
}

/// A uniformly sampled pH recording.
#[derive(Clone, Debug, PartialEq)]
pub struct PhTrace {
    pub sample_rate_hz: u32,
    pub samples: Vec<f64>,
    pub symbol_interval_ms: u32,
    pub sequence_id: u64,
}

impl PhTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_ms(&self, index: usize) -> f64 {
        index as f64 * 1000.0 / f64::from(self.sample_rate_hz)
    }
}

/// Runs the events through the channel.
///
/// Symbol events start late by `Uniform[0, jitter_ms]`; the sync pulse is
/// never jittered since it defines the frame origin. The trace spans
/// `max(preamble, last nominal start + one interval)`.
pub fn simulate_trace(
    events: &[InjectionEvent],
    model: &ChannelModel,
    scheme: &ModulationScheme,
    prng: &mut PrngState,
) -> Result<PhTrace> {
    model.validate()?;
    scheme.validate()?;
    if model.jitter_ms > 0.0 && model.jitter_ms >= f64::from(scheme.pause_ms) {
        return Err(Error::InvalidArgument(format!(
            "jitter {} ms would let injections overlap ({} ms pause)",
            model.jitter_ms, scheme.pause_ms
        )));
    }
    for w in events.windows(2) {
        if w[1].start_ms < w[0].end_ms() {
            return Err(Error::InvalidArgument(
                "injection events must be time-ordered and non-overlapping".into(),
            ));
        }
    }

    let interval = f64::from(scheme.symbol_interval_ms());
    let duration_ms = events
        .iter()
        .map(|e| e.start_ms + interval)
        .fold(f64::from(scheme.preamble_ms()), f64::max);
    let n_samples = scheme.samples_for_duration(duration_ms.ceil() as u64);

    // Jitter first, then noise, so the draw order is fixed.
    let mut timed: Vec<(f64, f64, f64)> = Vec::with_capacity(events.len());
    for e in events {
        let delay = if e.symbol.is_some() && model.jitter_ms > 0.0 {
            prng.uniform_range(0.0, model.jitter_ms)
        } else {
            0.0
        };
        timed.push((e.start_ms + delay, e.end_ms() + delay, e.polarity.sign()));
    }

    let concentration = integrate(&timed, model, scheme, n_samples);
    let mut samples = Vec::with_capacity(n_samples);
    for x in concentration {
        let noise = prng.next_gaussian(0.0, model.noise_std)?;
        samples.push(model.ph_of(x) + noise);
    }
    Ok(PhTrace {
        sample_rate_hz: scheme.sample_rate_hz,
        samples,
        symbol_interval_ms: scheme.symbol_interval_ms(),
        sequence_id: 0,
    })
}

/// Sensor-side concentration at each sample instant.
///
/// The tank is integrated exactly (piecewise-constant input); the lag stages
/// use the exact exponential response to a linearly varying upstream value
/// over each sub-step.
fn integrate(
    timed: &[(f64, f64, f64)],
    model: &ChannelModel,
    scheme: &ModulationScheme,
    n_samples: usize,
) -> Vec<f64> {
    let rate = model.injection_amplitude / f64::from(scheme.injection_ms);
    let tau = model.decay_tau_ms;
    let stages = model.response_stages as usize;
    let mut state = vec![0.0f64; stages + 1];
    let mut out = Vec::with_capacity(n_samples);

    // Event edges, sorted.
    let mut edges: Vec<f64> = timed.iter().flat_map(|&(s, e, _)| [s, e]).collect();
    edges.sort_by(|a, b| a.total_cmp(b));
    let mut edge_idx = 0;
    let mut event_idx = 0;

    let full = StepCoefficients::new(MAX_SUBSTEP_MS, tau, model.response_tau_ms);
    let period = 1000.0 / f64::from(scheme.sample_rate_hz);
    let mut t = 0.0f64;
    for n in 0..n_samples {
        let target = n as f64 * period;
        while t < target {
            while edge_idx < edges.len() && edges[edge_idx] <= t {
                edge_idx += 1;
            }
            while event_idx < timed.len() && timed[event_idx].1 <= t {
                event_idx += 1;
            }
            let u = match timed.get(event_idx) {
                Some(&(s, _, sign)) if s <= t => sign * rate,
                _ => 0.0,
            };
            let mut next = target.min(t + MAX_SUBSTEP_MS);
            if edge_idx < edges.len() && edges[edge_idx] < next {
                next = edges[edge_idx];
            }
            let dt = next - t;
            if dt == MAX_SUBSTEP_MS {
                full.apply(&mut state, u, tau);
            } else {
                StepCoefficients::new(dt, tau, model.response_tau_ms).apply(&mut state, u, tau);
            }
            t = next;
        }
        out.push(state[stages]);
    }
    out
}

struct StepCoefficients {
    one_minus_e: f64,
    er: f64,
    one_minus_er: f64,
    g: f64,
}

impl StepCoefficients {
    fn new(dt: f64, tau: f64, response_tau: f64) -> Self {
        let one_minus_e = -(-dt / tau).exp_m1();
        let (one_minus_er, g) = if response_tau > 0.0 {
            let one_minus_er = -(-dt / response_tau).exp_m1();
            (one_minus_er, 1.0 - response_tau / dt * one_minus_er)
        } else {
            (1.0, 0.0)
        };
        StepCoefficients {
            one_minus_e,
            er: 1.0 - one_minus_er,
            one_minus_er,
            g,
        }
    }

    fn apply(&self, state: &mut [f64], u: f64, tau: f64) {
        let before = state[0];
        state[0] = before * (1.0 - self.one_minus_e) + u * tau * self.one_minus_e;
        // Exact response of dy/dt = (v(t) - y)/tr to v varying linearly from v0 to v1.
        let (mut v0, mut v1) = (before, state[0]);
        for y in state.iter_mut().skip(1) {
            let y0 = *y;
            let y1 = y0 * self.er + v0 * self.one_minus_er + (v1 - v0) * self.g;
            *y = y1;
            v0 = y0;
            v1 = y1;
        }
    }
}
