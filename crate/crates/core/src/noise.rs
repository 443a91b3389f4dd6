//! Symmetric α-stable and Gaussian variates drawn from counter-based streams.
//!
//! Characteristic-function convention: a symmetric stable variate with index
//! `alpha` and scale `sigma` satisfies `E[exp(iθX)] = exp(-sigma^alpha |θ|^alpha)`.
//! At `alpha = 2` this is a centered Gaussian with variance `2 sigma^2`.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indices this close to 1 use the Cauchy branch of the transform.
pub const ALPHA_ONE_GUARD: f64 = 1e-9;

/// Index and scale of a symmetric α-stable law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
    scale: f64,
}

impl StableParams {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::Parameter(format!(
                "stable scale must be finite and >= 0, got {scale}"
            )));
        }
        Ok(Self { alpha, scale })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Closed-form characteristic function at `theta`.
    pub fn cf(&self, theta: f64) -> f64 {
        (-(self.scale * theta.abs()).powf(self.alpha)).exp()
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "stability index must lie in (0, 2], got {alpha}"
        )))
    }
}

/// A reproducible random stream addressed by `(seed, stream_id, counter)`.
///
/// The seed keys a ChaCha8 block function, `stream_id` selects one of its
/// 2^64 independent streams and `counter` is the position (in 32-bit words)
/// inside that stream. Two streams built from the same triple produce the
/// same sequence; cloning a stream snapshots its position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::at(seed, stream_id, 0)
    }

    /// Stream positioned at word `counter`.
    pub fn at(seed: u64, stream_id: u64, counter: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        rng.set_word_pos(counter as u128);
        Self { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.rng.get_stream()
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u64 {
        self.rng.get_word_pos() as u64
    }

    /// Uniform on the open interval (0, 1).
    fn open_unit(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Derives an independent 64-bit seed from a parent seed and a tag
/// (splitmix64 finalizer over the mixed pair).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Centered Gaussian with standard deviation `std`.
///
/// Draws `std * N(0,1)`, so different `std` values on the same stream state
/// are exact rescalings of one another. `std = 0` returns 0 without consuming
/// the stream.
pub fn sample_gaussian(std: f64, stream: &mut RandomStream) -> Result<f64> {
    if !std.is_finite() || std < 0.0 {
        return Err(Error::Parameter(format!(
            "gaussian std must be finite and >= 0, got {std}"
        )));
    }
    if std == 0.0 {
        return Ok(0.0);
    }
    let z: f64 = stream.rng.sample(StandardNormal);
    Ok(std * z)
}

/// Symmetric α-stable variate via the Chambers–Mallows–Stuck transform.
///
/// Zero scale returns exactly 0 and leaves the stream untouched.
pub fn sample_sas(params: StableParams, stream: &mut RandomStream) -> f64 {
    let StableParams { alpha, scale } = params;
    if scale == 0.0 {
        return 0.0;
    }
    if alpha == 2.0 {
        let z: f64 = stream.rng.sample(StandardNormal);
        return scale * std::f64::consts::SQRT_2 * z;
    }
    let u = PI * (stream.open_unit() - 0.5);
    if (alpha - 1.0).abs() < ALPHA_ONE_GUARD {
        return scale * u.tan();
    }
    let e = loop {
        let e: f64 = stream.rng.sample(Exp1);
        if e > 0.0 {
            break e;
        }
    };
    let head = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
    let tail = (((1.0 - alpha) * u).cos() / e).powf((1.0 - alpha) / alpha);
    scale * head * tail
}

/// Validating wrapper around [`sample_sas`] for raw parameters.
pub fn sample_sas_checked(alpha: f64, scale: f64, stream: &mut RandomStream) -> Result<f64> {
    Ok(sample_sas(StableParams::new(alpha, scale)?, stream))
}

/// Empirical characteristic function `(re, im)` at `theta`.
pub fn empirical_cf_complex(samples: &[f64], theta: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Usage(
            "empirical CF needs at least one sample".into(),
        ));
    }
    let (re, im) = samples.iter().fold((0.0, 0.0), |(re, im), &x| {
        let (s, c) = (theta * x).sin_cos();
        (re + c, im + s)
    });
    let m = samples.len() as f64;
    Ok((re / m, im / m))
}

/// Real part of the empirical characteristic function; the imaginary part
/// vanishes in law for symmetric samples.
pub fn empirical_cf(samples: &[f64], theta: f64) -> Result<f64> {
    empirical_cf_complex(samples, theta).map(|(re, _)| re)
}

/// `n` stable draws from one stream.
pub fn sample_sas_n(params: StableParams, stream: &mut RandomStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| sample_sas(params, stream)).collect()
}
