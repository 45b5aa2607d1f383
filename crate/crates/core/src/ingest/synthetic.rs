//! Desk-scale stand-in for a rotating-machinery test bench: a periodic base
//! waveform plus Gaussian noise, with optional injected faults.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Label, RawSignal};
use crate::rng::{stream, STREAM_SYNTH};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseWaveform {
    /// `(frequency_hz, amplitude)` pairs; each gets a random phase per signal.
    pub components: Vec<(f64, f64)>,
    pub noise_sigma: f64,
}

impl Default for BaseWaveform {
    fn default() -> Self {
        Self {
            components: vec![(25.0, 1.0), (500.0, 0.5), (1000.0, 0.25)],
            noise_sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnomalyKind {
    /// Decaying ringing bursts every `period` samples; peak = magnitude * sigma.
    ImpulseTrain { period: usize, decay: f64, ring_hz: f64 },
    /// Extra sinusoid at `freq_hz` with amplitude = magnitude * sigma.
    Harmonic { freq_hz: f64 },
    /// Noise standard deviation raised to magnitude * sigma.
    NoiseShift,
}

impl AnomalyKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnomalyKind::ImpulseTrain { .. } => "impulse",
            AnomalyKind::Harmonic { .. } => "harmonic",
            AnomalyKind::NoiseShift => "noise",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    #[serde(flatten)]
    pub kind: AnomalyKind,
    /// Severity in multiples of the base noise sigma.
    pub magnitude: f64,
    pub count: usize,
}

impl AnomalySpec {
    pub fn label(&self) -> String {
        format!("{}-{}x", self.kind.name(), self.magnitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub sample_rate: f64,
    pub window_len: usize,
    pub graph_size: usize,
    /// Graphs worth of samples per signal.
    pub graphs_per_signal: usize,
    pub base: BaseWaveform,
    pub normal_count: usize,
    pub anomalies: Vec<AnomalySpec>,
}

impl Default for SyntheticSpec {
    /// 100 normal and 8 x 20 abnormal signals of 10 x 1024 samples.
    fn default() -> Self {
        use AnomalyKind::*;
        let spec = |kind, magnitude| AnomalySpec { kind, magnitude, count: 20 };
        Self {
            sample_rate: 20480.0,
            window_len: 1024,
            graph_size: 10,
            graphs_per_signal: 1,
            base: BaseWaveform::default(),
            normal_count: 100,
            anomalies: vec![
                spec(ImpulseTrain { period: 100, decay: 30.0, ring_hz: 3000.0 }, 5.0),
                spec(ImpulseTrain { period: 160, decay: 40.0, ring_hz: 2200.0 }, 8.0),
                spec(ImpulseTrain { period: 64, decay: 20.0, ring_hz: 4500.0 }, 4.0),
                spec(Harmonic { freq_hz: 1850.0 }, 3.0),
                spec(Harmonic { freq_hz: 4100.0 }, 4.0),
                spec(Harmonic { freq_hz: 730.0 }, 3.0),
                spec(NoiseShift, 3.0),
                spec(NoiseShift, 4.0),
            ],
        }
    }
}

impl SyntheticSpec {
    pub fn signal_len(&self) -> usize {
        self.window_len * self.graph_size * self.graphs_per_signal
    }

    pub fn abnormal_count(&self) -> usize {
        self.anomalies.iter().map(|a| a.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if !(self.sample_rate > 0.0) {
            return bad("sample_rate must be > 0");
        }
        if self.window_len == 0 || self.graph_size < 2 || self.graphs_per_signal == 0 {
            return bad("window_len >= 1, graph_size >= 2 and graphs_per_signal >= 1 required");
        }
        if !(self.base.noise_sigma > 0.0) {
            return bad("noise_sigma must be > 0");
        }
        for a in &self.anomalies {
            if !(a.magnitude > 0.0) {
                return bad("anomaly magnitude must be > 0");
            }
            if let AnomalyKind::ImpulseTrain { period, decay, .. } = a.kind {
                if period == 0 || !(decay > 0.0) {
                    return bad("impulse period and decay must be > 0");
                }
            }
        }
        Ok(())
    }

    /// Render signal `index`. The base realization depends only on
    /// `(seed, index)`, so a fault can be compared against the same clean
    /// signal by rendering with `fault = None`.
    pub fn render(&self, seed: u64, index: usize, fault: Option<&AnomalySpec>) -> RawSignal {
        let mut rng = stream(seed, &format!("{STREAM_SYNTH}/{index}"));
        let len = self.signal_len();
        let dt = 1.0 / self.sample_rate;
        let sigma = self.base.noise_sigma;
        let tau = std::f64::consts::TAU;

        let phases: Vec<f64> = self.base.components.iter().map(|_| rng.random::<f64>() * tau).collect();
        let mut samples: Vec<f64> = (0..len)
            .map(|t| {
                let time = t as f64 * dt;
                self.base
                    .components
                    .iter()
                    .zip(&phases)
                    .map(|(&(f, a), &p)| a * (tau * f * time + p).sin())
                    .sum::<f64>()
            })
            .collect();
        let noise_scale = match fault {
            Some(AnomalySpec { kind: AnomalyKind::NoiseShift, magnitude, .. }) => magnitude * sigma,
            _ => sigma,
        };
        for s in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += noise_scale * z;
        }

        let mut fault_rng = stream(seed, &format!("{STREAM_SYNTH}/{index}/fault"));
        match fault.map(|f| (&f.kind, f.magnitude * sigma)) {
            Some((&AnomalyKind::ImpulseTrain { period, decay, ring_hz }, peak)) => {
                let offset = fault_rng.random_range(0..period);
                let burst_len = ((decay * 6.0).ceil() as usize).min(period.max(1) * 4);
                for start in (offset..len).step_by(period) {
                    for k in 0..burst_len.min(len - start) {
                        let kf = k as f64;
                        samples[start + k] += peak * (-kf / decay).exp() * (tau * ring_hz * kf * dt).cos();
                    }
                }
            }
            Some((&AnomalyKind::Harmonic { freq_hz }, amp)) => {
                let phase = fault_rng.random::<f64>() * tau;
                for (t, s) in samples.iter_mut().enumerate() {
                    *s += amp * (tau * freq_hz * t as f64 * dt + phase).sin();
                }
            }
            _ => {}
        }

        let (source_id, label) = match fault {
            None => (format!("normal-{index:04}"), Label::Normal),
            Some(f) => (format!("{}-{index:04}", f.label()), Label::Abnormal(f.label())),
        };
        RawSignal {
            samples,
            sample_rate: self.sample_rate,
            source_id,
            label,
        }
    }
}

/// Normal signals first (indices `0..normal_count`), then each anomaly
/// group in declaration order.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Vec<RawSignal>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.normal_count + spec.abnormal_count());
    out.extend((0..spec.normal_count).map(|i| spec.render(seed, i, None)));
    let mut index = spec.normal_count;
    for fault in &spec.anomalies {
        for _ in 0..fault.count {
            out.push(spec.render(seed, index, Some(fault)));
            index += 1;
        }
    }
    Ok(out)
}
