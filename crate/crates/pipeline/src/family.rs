use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use qpt_core::ChannelSpec;
use qpt_nn::{AutoencoderShape, FeedForwardShape};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Encoder widths shared by every autoencoder; the decoder mirrors them.
pub const ENCODER_WIDTHS: [usize; 3] = [16, 32, 64];

/// The three parameterized channel families under study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelFamily {
    /// Depolarizing channel, parameter `p`.
    Dc,
    /// Generalized amplitude damping, parameters `(η, γ)`.
    Gad,
    /// Two-qubit controlled phase, parameter `φ`.
    Cp,
}

impl ChannelFamily {
    pub const ALL: [ChannelFamily; 3] = [ChannelFamily::Dc, ChannelFamily::Gad, ChannelFamily::Cp];

    pub fn tag(self) -> &'static str {
        match self {
            ChannelFamily::Dc => "dc",
            ChannelFamily::Gad => "gad",
            ChannelFamily::Cp => "cp",
        }
    }

    pub fn n_qubits(self) -> usize {
        match self {
            ChannelFamily::Cp => 2,
            _ => 1,
        }
    }

    /// Side of the process matrix (4 or 16).
    pub fn chi_dim(self) -> usize {
        1 << (2 * self.n_qubits())
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ChannelFamily::Dc => &["p"],
            ChannelFamily::Gad => &["eta", "gamma"],
            ChannelFamily::Cp => &["phi"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// Closed parameter box `[lo, hi]` per parameter.
    pub fn bounds(self) -> &'static [(f64, f64)] {
        match self {
            ChannelFamily::Dc => &[(0.0, 1.0)],
            ChannelFamily::Gad => &[(0.0, 1.0), (0.0, 1.0)],
            ChannelFamily::Cp => &[(0.0, TAU)],
        }
    }

    pub fn clamp(self, params: &mut [f64]) {
        for (v, &(lo, hi)) in params.iter_mut().zip(self.bounds()) {
            *v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
        }
    }

    /// Network targets are `param / scale`, keeping every target in `[0, 1]`.
    pub fn target_scale(self) -> f64 {
        match self {
            ChannelFamily::Cp => TAU,
            _ => 1.0,
        }
    }

    pub fn spec(self, params: &[f64]) -> Result<ChannelSpec> {
        if params.len() != self.n_params() {
            return Err(PipelineError::Invalid(format!(
                "{self} takes {} parameter(s), got {}",
                self.n_params(),
                params.len()
            )));
        }
        let spec = match self {
            ChannelFamily::Dc => ChannelSpec::Depolarizing { p: params[0] },
            ChannelFamily::Gad => ChannelSpec::GeneralizedAmplitudeDamping {
                eta: params[0],
                gamma: params[1],
            },
            ChannelFamily::Cp => ChannelSpec::ControlledPhase { phi: params[0] },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Kernel size and latent width of the denoising autoencoder.
    pub fn autoencoder_shape(self) -> AutoencoderShape {
        let (kernel, latent) = match self {
            ChannelFamily::Dc => (2, 40),
            ChannelFamily::Gad => (2, 40),
            ChannelFamily::Cp => (4, 30),
        };
        AutoencoderShape {
            side: self.chi_dim(),
            channels: 2,
            kernel,
            latent,
            widths: ENCODER_WIDTHS.to_vec(),
            batch_norm: true,
        }
    }

    /// Number of feed-forward inputs: the four χ diagonal entries for DC, the
    /// flattened two-channel image otherwise.
    pub fn ff_inputs(self) -> usize {
        match self {
            ChannelFamily::Dc => 4,
            _ => 2 * self.chi_dim() * self.chi_dim(),
        }
    }

    /// Width factor and branch count of the feed-forward regressor.
    pub fn feed_forward_shape(self) -> FeedForwardShape {
        let (width_factor, branches) = match self {
            ChannelFamily::Dc => (2, 1),
            ChannelFamily::Gad => (2, 2),
            ChannelFamily::Cp => (1, 1),
        };
        FeedForwardShape {
            inputs: self.ff_inputs(),
            width_factor,
            branches,
        }
    }
}

impl fmt::Display for ChannelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ChannelFamily {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dc" => Ok(ChannelFamily::Dc),
            "gad" => Ok(ChannelFamily::Gad),
            "cp" => Ok(ChannelFamily::Cp),
            other => Err(PipelineError::Invalid(format!("unknown channel family {other:?}"))),
        }
    }
}
