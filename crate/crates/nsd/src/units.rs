//! Physical fibre parameters and their normalized counterparts.
//!
//! The model equations are written in soliton units: field in sqrt(P_n),
//! time in T_n, distance in L_n, with
//!
//!   P_n = 2 / (gamma L_n),      T_n = sqrt(|beta2| L_n / 2).
//!
//! Distributed amplification injects white noise with spectral density
//! kappa^2 = alpha_loss * h * nu_s * K_T per unit distance. Rescaling the
//! stochastic NLSE into soliton units turns that density into the single
//! dimensionless strength
//!
//!   eps^2 = kappa^2 L_n / (P_n T_n) = gamma kappa^2 L_n^(3/2) / sqrt(2 |beta2|).

use crate::error::{Error, Result};

/// FWHM of sech(t) in normalized time, 2*acosh(sqrt(2)) rounded to the
/// customary four digits used in link-budget tables.
pub const SECH_FWHM: f64 = 1.763;

/// Dimensional fibre and amplifier parameters.
///
/// Distances are in km, powers in W: `alpha_loss` (1/km) is the loss rate
/// compensated by the amplifier, `planck_h` (J s), `nu_s` (Hz) the carrier,
/// `K_T` the excess spontaneous-emission factor, `gamma_nl` (1/(W km)) the
/// Kerr coefficient, `beta2` (s^2/km, anomalous so negative), `L_n` (km) the
/// normalization length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberParams {
    pub alpha_loss: f64,
    pub planck_h: f64,
    pub nu_s: f64,
    pub k_t: f64,
    pub gamma_nl: f64,
    pub beta2: f64,
    pub l_n: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        FiberParams {
            alpha_loss: 0.046,
            planck_h: 6.626e-34,
            nu_s: 193.55e12,
            k_t: 1.13,
            gamma_nl: 1.27,
            beta2: -2e-23,
            l_n: 1.0,
        }
    }
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&'static str, f64); 6] = [
            ("alpha_loss", self.alpha_loss),
            ("planck_h", self.planck_h),
            ("nu_s", self.nu_s),
            ("K_T", self.k_t),
            ("gamma_nl", self.gamma_nl),
            ("L_n", self.l_n),
        ];
        for (field, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParam {
                    field,
                    message: format!("must be finite and positive, got {v}"),
                });
            }
        }
        if !self.beta2.is_finite() || self.beta2 >= 0.0 {
            return Err(Error::InvalidParam {
                field: "beta2",
                message: format!("must be finite and negative (anomalous dispersion), got {}", self.beta2),
            });
        }
        Ok(())
    }

    /// Parse a plain-text `key = value` config. All seven keys are required;
    /// `#` starts a comment; keys must not repeat.
    pub fn from_config_str(text: &str) -> Result<FiberParams> {
        let mut params = FiberParams::default();
        let mut seen = [false; 7];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                message: format!("line {}: expected `key = value`, got `{line}`", lineno + 1),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| Error::Config {
                message: format!("line {}: `{}` is not a number", lineno + 1, value.trim()),
            })?;
            let idx = match key {
                "alpha_loss" => { params.alpha_loss = value; 0 }
                "planck_h" => { params.planck_h = value; 1 }
                "nu_s" => { params.nu_s = value; 2 }
                "K_T" => { params.k_t = value; 3 }
                "gamma_nl" => { params.gamma_nl = value; 4 }
                "beta2" => { params.beta2 = value; 5 }
                "L_n" => { params.l_n = value; 6 }
                other => {
                    return Err(Error::Config { message: format!("unknown key `{other}`") });
                }
            };
            if seen[idx] {
                return Err(Error::Config { message: format!("duplicate key `{key}`") });
            }
            seen[idx] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            const KEYS: [&str; 7] =
                ["alpha_loss", "planck_h", "nu_s", "K_T", "gamma_nl", "beta2", "L_n"];
            return Err(Error::Config { message: format!("missing key `{}`", KEYS[missing]) });
        }
        params.validate()?;
        Ok(params)
    }

    pub fn from_config_file(path: &std::path::Path) -> Result<FiberParams> {
        let text = std::fs::read_to_string(path)?;
        FiberParams::from_config_str(&text)
    }

    /// Inverse of `from_config_str` up to float formatting.
    pub fn to_config_string(&self) -> String {
        format!(
            "alpha_loss = {:e}\nplanck_h = {:e}\nnu_s = {:e}\nK_T = {:e}\ngamma_nl = {:e}\nbeta2 = {:e}\nL_n = {:e}\n",
            self.alpha_loss, self.planck_h, self.nu_s, self.k_t, self.gamma_nl, self.beta2, self.l_n
        )
    }
}

/// Soliton-unit scales and the normalized noise strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedUnits {
    /// Power scale, W.
    pub p_n: f64,
    /// Time scale, s.
    pub t_n: f64,
    /// Distance scale, km.
    pub l_n: f64,
    /// Normalized amplifier-noise strength (dimensionless).
    pub eps2: f64,
    /// Physical noise density alpha_loss * h * nu_s * K_T, J/km.
    pub kappa2: f64,
}

pub fn normalize(params: &FiberParams) -> Result<NormalizedUnits> {
    params.validate()?;
    let kappa2 = params.alpha_loss * params.planck_h * params.nu_s * params.k_t;
    let p_n = 2.0 / (params.gamma_nl * params.l_n);
    let t_n = (params.beta2.abs() * params.l_n / 2.0).sqrt();
    let eps2 = kappa2 * params.l_n / (p_n * t_n);
    Ok(NormalizedUnits { p_n, t_n, l_n: params.l_n, eps2, kappa2 })
}

/// Imaginary eigenvalue part of a lone sech soliton whose average power over
/// one symbol slot (`separation_fwhm` FWHM widths) equals `power_w`.
///
/// Soliton energy is 4*beta in normalized units, so
/// P = 4 beta P_n T_n / (sep * FWHM/(2 beta) * T_n) = 8 beta^2 P_n / (FWHM * sep),
/// inverted here.
pub fn power_to_beta(power_w: f64, units: &NormalizedUnits, separation_fwhm: f64) -> Result<f64> {
    if !power_w.is_finite() || power_w <= 0.0 {
        return Err(Error::InvalidParam {
            field: "power_w",
            message: format!("must be finite and positive, got {power_w}"),
        });
    }
    if !separation_fwhm.is_finite() || separation_fwhm <= 0.0 {
        return Err(Error::InvalidParam {
            field: "separation_fwhm",
            message: format!("must be finite and positive, got {separation_fwhm}"),
        });
    }
    Ok((power_w * SECH_FWHM * separation_fwhm / (8.0 * units.p_n)).sqrt())
}

/// Inverse of `power_to_beta`.
pub fn beta_to_power(beta: f64, units: &NormalizedUnits, separation_fwhm: f64) -> Result<f64> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidParam {
            field: "beta",
            message: format!("must be finite and positive, got {beta}"),
        });
    }
    Ok(8.0 * beta * beta * units.p_n / (SECH_FWHM * separation_fwhm))
}
