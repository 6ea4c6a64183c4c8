//! Ito SDEs for the parameters of a single noisy soliton, and the channel
//! models built on top of them.
//!
//! A soliton hit by weak distributed noise stays a soliton to first order;
//! what the noise does is jitter the four parameters (alpha, beta, T0,
//! theta). Each parameter feels the noise through a fixed projection kernel,
//! so instead of simulating the full field, a trial draws one Gaussian per
//! kernel per step with the analytically integrated variance:
//!
//!   d alpha = -eps dW_a,            Var rate eps^2 beta / 6
//!   d beta  = eps^2/2 dz + eps dW_b, Var rate eps^2 beta / 2
//!   d T0    = 4 alpha dz + dD,       Var rate of D: eps^2 pi^2 / (96 beta^3)
//!   d theta = -4(alpha^2+beta^2) dz + dW_t + 2 alpha dD,
//!                                    own rate eps^2 (pi^2+12) / (72 beta)
//!
//! The eps^2/2 advection in beta is the Ito correction; every other drift is
//! the noiseless flow. All four underlying Gaussians are mutually
//! independent (the kernel cross-overlaps vanish by parity), except that
//! theta reuses T0's increment dD scaled by 2 alpha, which is drawn once and
//! shared. Rates are evaluated at the step's starting state (Ito point).
//!
//! On top of the simulated parameter paths sit three models for the spectral
//! amplitude: the exact integral form for ln|Q^(d)| and its phase
//! (`magnitude_channel`), the split-fibre product approximation of the same
//! thing (`concatenate_model`), and the additive decomposition
//! N1 + N2 + N3 + N4 used to compare noise contributions term by term
//! (`perturbation_model`).

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ssfm::PropagationConfig;
use crate::waveform::SolitonSpec;

/// Kernel constant of theta's own noise term: integral of
/// sech^2(u) (1 - u tanh u)^2 du = (pi^2 + 12) / 18.
pub const K_THETA: f64 = (PI * PI + 12.0) / 18.0;

/// Instantaneous soliton parameters. `theta` is the phase parameter
/// -2 alpha T0 - arg Q^(d) - pi/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonState {
    pub alpha: f64,
    pub beta: f64,
    pub t0: f64,
    pub theta: f64,
}

impl SolitonState {
    pub fn new(alpha: f64, beta: f64, t0: f64, theta: f64) -> Result<SolitonState> {
        if !(alpha.is_finite() && beta.is_finite() && t0.is_finite() && theta.is_finite()) {
            return Err(Error::InvalidParam {
                field: "state",
                message: "all soliton parameters must be finite".into(),
            });
        }
        if beta <= 0.0 {
            return Err(Error::InvalidParam {
                field: "beta",
                message: format!("beta must be > 0, got {beta}"),
            });
        }
        Ok(SolitonState { alpha, beta, t0, theta })
    }

    /// Read the four parameters off a spectral-domain soliton description.
    pub fn from_spec(spec: &SolitonSpec) -> SolitonState {
        let alpha = spec.zeta.re;
        let beta = spec.zeta.im;
        let t0 = (spec.q_d.norm() / (2.0 * beta)).ln() / (2.0 * beta);
        let theta = -2.0 * alpha * t0 - spec.q_d.arg() - PI / 2.0;
        SolitonState { alpha, beta, t0, theta }
    }

    /// Inverse of `from_spec`; the phase comes back wrapped.
    pub fn to_spec(&self) -> Result<SolitonSpec> {
        let mag = 2.0 * self.beta * (2.0 * self.beta * self.t0).exp();
        let arg = -self.theta - 2.0 * self.alpha * self.t0 - PI / 2.0;
        SolitonSpec::new(
            Complex64::new(self.alpha, self.beta),
            Complex64::from_polar(mag, arg),
        )
    }
}

/// One realization of the parameter noise over [0, L] on a uniform z grid.
///
/// `ups_r` and `ups_i` are the accumulated eigenvalue perturbations
/// alpha(z) - alpha(0) and beta(z) - beta(0); `nu_i` is ups_i with the
/// advection eps^2 z / 2 removed. The `t0`, `theta`, and `delta` tracks are
/// recorded by the SDE simulator but absent from paths reconstructed out of
/// full-field measurements; `delta` is the accumulated T0 kernel noise
/// D(z) = T0(z) - T0(0) - 4 int alpha dz.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPath {
    pub z_grid: Vec<f64>,
    pub ups_r: Vec<f64>,
    pub ups_i: Vec<f64>,
    pub nu_i: Vec<f64>,
    pub t0: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
}

impl PerturbationPath {
    /// Build a path from externally measured eigenvalue tracks (for example
    /// full-field simulation checkpoints). `nu_i` is derived; the parameter
    /// tracks stay empty.
    pub fn from_eigen_tracks(
        z_grid: Vec<f64>,
        ups_r: Vec<f64>,
        ups_i: Vec<f64>,
        eps: f64,
    ) -> Result<PerturbationPath> {
        if z_grid.len() < 2 || z_grid.len() != ups_r.len() || z_grid.len() != ups_i.len() {
            return Err(Error::InvalidParam {
                field: "z_grid",
                message: "tracks must share a length of at least 2".into(),
            });
        }
        if ups_r[0] != 0.0 || ups_i[0] != 0.0 {
            return Err(Error::InvalidParam {
                field: "ups_r",
                message: "perturbations must start at zero".into(),
            });
        }
        let nu_i = ups_i
            .iter()
            .zip(&z_grid)
            .map(|(u, z)| u - 0.5 * eps * eps * z)
            .collect();
        Ok(PerturbationPath { z_grid, ups_r, ups_i, nu_i, t0: None, theta: None, delta: None })
    }

    pub fn total_z(&self) -> f64 {
        *self.z_grid.last().expect("path has at least two points")
    }

    /// CSV rendering with a `z,ups_r,ups_i` header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,ups_r,ups_i\n");
        for k in 0..self.z_grid.len() {
            out.push_str(&format!("{:e},{:e},{:e}\n", self.z_grid[k], self.ups_r[k], self.ups_i[k]));
        }
        out
    }
}

/// Trapezoidal integral of samples `f` over the uniform grid `z`.
fn trapezoid(z: &[f64], f: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..z.len() {
        acc += 0.5 * (f[k] + f[k - 1]) * (z[k] - z[k - 1]);
    }
    acc
}

/// Wrap an angle to [-pi, pi).
pub fn wrap_phase(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Integrate the four coupled parameter SDEs with Euler-Maruyama.
///
/// `cfg.seed` fixes the trial; `cfg.noise_on = false` (or eps = 0) gives the
/// deterministic skeleton. The final grid point lands exactly on total_z;
/// dz is shortened on the last step if it does not divide the distance.
pub fn simulate_soliton_sde(
    state0: &SolitonState,
    cfg: &PropagationConfig,
) -> Result<PerturbationPath> {
    cfg.validate()?;
    if state0.beta <= 0.0 {
        return Err(Error::InvalidParam {
            field: "beta",
            message: format!("initial beta must be > 0, got {}", state0.beta),
        });
    }
    let eps = if cfg.noise_on { cfg.eps } else { 0.0 };
    if eps * cfg.dz.sqrt() > 0.1 * state0.beta {
        eprintln!(
            "simulate_soliton_sde: eps sqrt(dz) = {:.3e} is not small against beta0 = {:.3e}; refine dz",
            eps * cfg.dz.sqrt(),
            state0.beta
        );
    }
    let eps2 = eps * eps;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let steps = (cfg.total_z / cfg.dz).ceil() as usize;
    let mut z_grid = Vec::with_capacity(steps + 1);
    let mut ups_r = Vec::with_capacity(steps + 1);
    let mut ups_i = Vec::with_capacity(steps + 1);
    let mut t0_track = Vec::with_capacity(steps + 1);
    let mut theta_track = Vec::with_capacity(steps + 1);
    let mut delta_track = Vec::with_capacity(steps + 1);

    let mut s = *state0;
    let mut d_acc = 0.0;
    let mut z = 0.0;
    z_grid.push(0.0);
    ups_r.push(0.0);
    ups_i.push(0.0);
    t0_track.push(s.t0);
    theta_track.push(s.theta);
    delta_track.push(0.0);

    while z < cfg.total_z - 1e-12 * cfg.total_z.max(1.0) {
        let h = cfg.dz.min(cfg.total_z - z);
        // Rates at the current state; simultaneous update afterwards.
        let (da, db, dd, dth) = if eps > 0.0 {
            let g_a: f64 = rng.sample(StandardNormal);
            let g_b: f64 = rng.sample(StandardNormal);
            let g_d: f64 = rng.sample(StandardNormal);
            let g_t: f64 = rng.sample(StandardNormal);
            let dd = eps * (PI * PI / (96.0 * s.beta.powi(3)) * h).sqrt() * g_d;
            (
                -eps * (s.beta / 6.0 * h).sqrt() * g_a,
                eps * (s.beta / 2.0 * h).sqrt() * g_b,
                dd,
                eps * (K_THETA / (4.0 * s.beta) * h).sqrt() * g_t + 2.0 * s.alpha * dd,
            )
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        let alpha_new = s.alpha + da;
        let beta_new = s.beta + 0.5 * eps2 * h + db;
        let t0_new = s.t0 + 4.0 * s.alpha * h + dd;
        let theta_new = s.theta - 4.0 * (s.alpha * s.alpha + s.beta * s.beta) * h + dth;
        z += h;
        if beta_new <= 0.0 {
            return Err(Error::SolitonCollapse { z });
        }
        s = SolitonState { alpha: alpha_new, beta: beta_new, t0: t0_new, theta: theta_new };
        d_acc += dd;
        z_grid.push(z);
        ups_r.push(s.alpha - state0.alpha);
        ups_i.push(s.beta - state0.beta);
        t0_track.push(s.t0);
        theta_track.push(s.theta);
        delta_track.push(d_acc);
    }

    let nu_i = ups_i
        .iter()
        .zip(&z_grid)
        .map(|(u, zz)| u - 0.5 * eps2 * zz)
        .collect();
    Ok(PerturbationPath {
        z_grid,
        ups_r,
        ups_i,
        nu_i,
        t0: Some(t0_track),
        theta: Some(theta_track),
        delta: Some(delta_track),
    })
}

/// Channel sample for one soliton's spectral amplitude over a fibre span.
///
/// `ln_mag_in` and `phase_in` describe the noiselessly evolved input
/// amplitude at the far end (the reference the noise is measured against);
/// the `i_*` fields are the path integrals the models are built from:
/// I_R = int ups_r dz, I_I = int ups_i dz, I_RI = int ups_r ups_i dz,
/// I_R2mI2 = int (ups_r^2 - ups_i^2) dz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeChannelSample {
    pub ln_mag_in: f64,
    pub ln_mag_out: f64,
    pub phase_in: f64,
    pub phase_out: f64,
    pub i_r: f64,
    pub i_i: f64,
    pub i_ri: f64,
    pub i_r2mi2: f64,
}

impl AmplitudeChannelSample {
    /// Magnitude noise ln|Q^(d)| out minus the noiseless reference.
    pub fn magnitude_noise(&self) -> f64 {
        self.ln_mag_out - self.ln_mag_in
    }

    /// Phase noise wrapped to [-pi, pi).
    pub fn phase_noise(&self) -> f64 {
        wrap_phase(self.phase_out - self.phase_in)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("sample serializes")
    }
}

/// Noiselessly evolved reference amplitude: ln magnitude and phase of
/// Q^(d)(zeta(0), L).
fn scaled_input(spec0: &SolitonSpec, total_z: f64) -> (f64, f64) {
    let a0 = spec0.zeta.re;
    let b0 = spec0.zeta.im;
    let ln_mag = spec0.q_d.norm().ln() + 8.0 * a0 * b0 * total_z;
    let phase = wrap_phase(spec0.q_d.arg() - 4.0 * (a0 * a0 - b0 * b0) * total_z);
    (ln_mag, phase)
}

/// Exact integral-form channel model: quadrature of the path integrals and
/// the closed expressions for the output magnitude and phase.
pub fn magnitude_channel(path: &PerturbationPath, spec0: &SolitonSpec) -> AmplitudeChannelSample {
    let a0 = spec0.zeta.re;
    let b0 = spec0.zeta.im;
    let prod: Vec<f64> = path.ups_r.iter().zip(&path.ups_i).map(|(r, i)| r * i).collect();
    let sq: Vec<f64> = path.ups_r.iter().zip(&path.ups_i).map(|(r, i)| r * r - i * i).collect();
    let i_r = trapezoid(&path.z_grid, &path.ups_r);
    let i_i = trapezoid(&path.z_grid, &path.ups_i);
    let i_ri = trapezoid(&path.z_grid, &prod);
    let i_r2mi2 = trapezoid(&path.z_grid, &sq);
    let (ln_mag_in, phase_in) = scaled_input(spec0, path.total_z());
    let ln_mag_out = ln_mag_in + 8.0 * a0 * i_i + 8.0 * b0 * i_r + 8.0 * i_ri;
    let phase_out = wrap_phase(phase_in - 8.0 * a0 * i_r + 8.0 * b0 * i_i - 4.0 * i_r2mi2);
    AmplitudeChannelSample { ln_mag_in, ln_mag_out, phase_in, phase_out, i_r, i_i, i_ri, i_r2mi2 }
}

/// Split-fibre product model on an m-segment uniform partition.
///
/// Each segment contributes e^{-4j [zeta(0) + Ups(z_k)]^2 |I_k|} with the
/// path sampled at the segment's left endpoint. As m grows this converges to
/// `magnitude_channel`'s integral form; it is exposed separately so the
/// convergence itself can be studied.
pub fn concatenate_model(
    path: &PerturbationPath,
    spec0: &SolitonSpec,
    m: usize,
) -> Result<AmplitudeChannelSample> {
    if m == 0 {
        return Err(Error::InvalidParam {
            field: "m",
            message: "segment count must be at least 1".into(),
        });
    }
    let n = path.z_grid.len() - 1;
    let a0 = spec0.zeta.re;
    let b0 = spec0.zeta.im;
    let total = path.total_z();
    let seg = total / m as f64;
    let mut i_r = 0.0;
    let mut i_i = 0.0;
    let mut i_ri = 0.0;
    let mut i_r2mi2 = 0.0;
    for k in 0..m {
        // Left endpoint of segment k, mapped onto the recorded grid.
        let idx = k * n / m;
        let r = path.ups_r[idx];
        let i = path.ups_i[idx];
        i_r += r * seg;
        i_i += i * seg;
        i_ri += r * i * seg;
        i_r2mi2 += (r * r - i * i) * seg;
    }
    let (ln_mag_in, phase_in) = scaled_input(spec0, total);
    let ln_mag_out = ln_mag_in + 8.0 * a0 * i_i + 8.0 * b0 * i_r + 8.0 * i_ri;
    let phase_out = wrap_phase(phase_in - 8.0 * a0 * i_r + 8.0 * b0 * i_i - 4.0 * i_r2mi2);
    Ok(AmplitudeChannelSample {
        ln_mag_in,
        ln_mag_out,
        phase_in,
        phase_out,
        i_r,
        i_i,
        i_ri,
        i_r2mi2,
    })
}

/// Additive decomposition of the magnitude noise into its perturbation-theory
/// contributions. The grouped sums are n1 = n11+n12+n13 and n3 = n31+n32;
/// n1+n2+n3+n4 reconstructs the modeled magnitude noise for the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationDecomposition {
    pub n11: f64,
    pub n12: f64,
    pub n13: f64,
    pub n2: f64,
    pub n31: f64,
    pub n32: f64,
    pub n4: f64,
}

impl PerturbationDecomposition {
    pub fn n1(&self) -> f64 {
        self.n11 + self.n12 + self.n13
    }

    pub fn n3(&self) -> f64 {
        self.n31 + self.n32
    }

    pub fn total(&self) -> f64 {
        self.n1() + self.n2 + self.n3() + self.n4
    }
}

/// Evaluate the N-term decomposition on a simulated path.
///
/// Requires the parameter tracks the SDE records: `t0` for the input pulse
/// centre and `delta` for the accumulated T0 kernel noise D(z).
pub fn perturbation_model(
    path: &PerturbationPath,
    spec0: &SolitonSpec,
) -> Result<PerturbationDecomposition> {
    let t0_track = path.t0.as_ref().ok_or(Error::MissingTrack { track: "t0" })?;
    let delta = path.delta.as_ref().ok_or(Error::MissingTrack { track: "delta" })?;
    let a0 = spec0.zeta.re;
    let b0 = spec0.zeta.im;
    let total = path.total_z();
    let ups_i_end = *path.ups_i.last().expect("nonempty path");
    let d_end = *delta.last().expect("nonempty track");
    let gamma_r = trapezoid(&path.z_grid, &path.ups_r);
    Ok(PerturbationDecomposition {
        n11: 2.0 * b0 * d_end,
        n12: 2.0 * ups_i_end * t0_track[0],
        n13: ((b0 + ups_i_end) / b0).ln(),
        n2: 2.0 * ups_i_end * d_end,
        n31: 8.0 * total * a0 * ups_i_end,
        n32: 8.0 * b0 * gamma_r,
        n4: 8.0 * ups_i_end * gamma_r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::SolitonSpec;

    fn cfg(dz: f64, total_z: f64, eps2: f64, seed: u64) -> PropagationConfig {
        PropagationConfig { dz, total_z, eps: eps2.sqrt(), seed, noise_on: eps2 > 0.0 }
    }

    #[test]
    fn state_spec_round_trip() {
        let spec =
            SolitonSpec::new(Complex64::new(0.3, 0.7), Complex64::new(-0.4, 1.1)).unwrap();
        let state = SolitonState::from_spec(&spec);
        let back = state.to_spec().unwrap();
        assert!((back.zeta - spec.zeta).norm() < 1e-12);
        assert!((back.q_d - spec.q_d).norm() < 1e-12 * spec.q_d.norm());
    }

    #[test]
    fn kernel_rates_match_numerical_quadrature() {
        // Noise projections of a unit-phase soliton; each parameter's
        // variance rate is eps^2/2 times the squared kernel norm (the half
        // comes from taking one quadrature component of circular noise).
        for &beta in &[0.3_f64, 1.0, 2.4] {
            let du = 1e-4;
            let half = (40.0 / du) as i64;
            let (mut ka, mut kb, mut kd, mut kt) = (0.0, 0.0, 0.0, 0.0);
            for k in -half..=half {
                let u = k as f64 * du; // u = 2 beta (t - T0)
                let sech = 1.0 / u.cosh();
                let tanh = u.tanh();
                // dt = du / (2 beta)
                let w = du / (2.0 * beta);
                ka += (beta * sech * tanh).powi(2) * w;
                kb += (beta * sech).powi(2) * w;
                kd += (u / (2.0 * beta) * sech).powi(2) * w;
                kt += (sech * (1.0 - u * tanh)).powi(2) * w;
            }
            assert!((0.5 * ka - beta / 6.0).abs() < 1e-8 * beta);
            assert!((0.5 * kb - beta / 2.0).abs() < 1e-8 * beta);
            let want_d = PI * PI / (96.0 * beta.powi(3));
            assert!((0.5 * kd - want_d).abs() < 1e-8 * want_d);
            let want_t = K_THETA / (4.0 * beta);
            assert!((0.5 * kt - want_t).abs() < 1e-8 * want_t);
        }
    }

    #[test]
    fn noiseless_path_is_the_deterministic_skeleton() {
        let s0 = SolitonState::new(0.25, 0.8, -1.5, 0.4).unwrap();
        let path = simulate_soliton_sde(&s0, &cfg(0.01, 3.0, 0.0, 1)).unwrap();
        assert!(path.ups_r.iter().all(|&x| x == 0.0));
        assert!(path.ups_i.iter().all(|&x| x == 0.0));
        assert!(path.nu_i.iter().all(|&x| x == 0.0));
        let t0 = path.t0.as_ref().unwrap();
        let th = path.theta.as_ref().unwrap();
        for (k, &z) in path.z_grid.iter().enumerate() {
            assert!((t0[k] - (s0.t0 + 4.0 * s0.alpha * z)).abs() < 1e-12);
            let want = s0.theta - 4.0 * (s0.alpha * s0.alpha + s0.beta * s0.beta) * z;
            assert!((th[k] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn path_bookkeeping_and_replay() {
        let s0 = SolitonState::new(0.1, 0.6, 0.3, 0.0).unwrap();
        let c = cfg(0.01, 2.0, 1e-3, 99);
        let path = simulate_soliton_sde(&s0, &c).unwrap();
        assert_eq!(path.z_grid.len(), 201);
        assert_eq!(path.ups_r[0], 0.0);
        assert_eq!(path.ups_i[0], 0.0);
        for k in 0..path.z_grid.len() {
            let want = path.ups_i[k] - 0.5 * 1e-3 * path.z_grid[k];
            assert!((path.nu_i[k] - want).abs() < 1e-15);
        }
        let replay = simulate_soliton_sde(&s0, &c).unwrap();
        assert_eq!(path, replay);
        let other = simulate_soliton_sde(&s0, &cfg(0.01, 2.0, 1e-3, 100)).unwrap();
        assert_ne!(path.ups_i, other.ups_i);
    }

    #[test]
    fn eigenvalue_moments_match_closed_forms() {
        let beta0 = 0.5;
        let eps2 = 2e-3;
        let total_z = 10.0;
        let s0 = SolitonState::new(0.0, beta0, 0.0, 0.0).unwrap();
        let trials = 20_000;
        let mut sum_i = 0.0;
        let mut sum_i2 = 0.0;
        let mut sum_i4 = 0.0;
        let mut sum_r2 = 0.0;
        let mut sum_r4 = 0.0;
        for t in 0..trials {
            let path = simulate_soliton_sde(&s0, &cfg(0.01, total_z, eps2, 40_000 + t)).unwrap();
            let ui = *path.ups_i.last().unwrap();
            let ur = *path.ups_r.last().unwrap();
            sum_i += ui;
            sum_i2 += ui * ui;
            sum_i4 += ui.powi(4);
            sum_r2 += ur * ur;
            sum_r4 += ur.powi(4);
        }
        let m = trials as f64;
        let mean_i = sum_i / m;
        let m2_i = sum_i2 / m;
        let m2_r = sum_r2 / m;
        let se_mean = ((m2_i - mean_i * mean_i) / m).sqrt();
        let se_m2i = ((sum_i4 / m - m2_i * m2_i) / m).sqrt();
        let se_m2r = ((sum_r4 / m - m2_r * m2_r) / m).sqrt();

        let want_mean = 0.5 * eps2 * total_z;
        let want_m2i = 0.5 * eps2 * total_z * beta0 + 0.375 * (eps2 * total_z).powi(2);
        let want_m2r = eps2 * total_z * beta0 / 6.0 + (eps2 * total_z).powi(2) / 24.0;
        assert!((mean_i - want_mean).abs() < 3.0 * se_mean, "{mean_i:.4e} vs {want_mean:.4e}");
        assert!((m2_i - want_m2i).abs() < 3.0 * se_m2i, "{m2_i:.4e} vs {want_m2i:.4e}");
        assert!((m2_r - want_m2r).abs() < 3.0 * se_m2r, "{m2_r:.4e} vs {want_m2r:.4e}");
        // The drift must be resolvable, not buried in the standard error.
        assert!(want_mean > 5.0 * se_mean);
    }

    #[test]
    fn t0_and_theta_increments_share_the_kernel_draw() {
        // One-step paths isolate the intra-step covariance
        // Cov(dT0, dtheta) = 2 alpha Var(dD).
        let alpha0 = 0.4;
        let beta0 = 1.0;
        let eps2 = 1e-2;
        let dz = 0.05;
        let s0 = SolitonState::new(alpha0, beta0, 0.0, 0.0).unwrap();
        let trials = 50_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for t in 0..trials {
            let path = simulate_soliton_sde(&s0, &cfg(dz, dz, eps2, 70_000 + t)).unwrap();
            let dt0 = path.t0.as_ref().unwrap()[1] - s0.t0 - 4.0 * alpha0 * dz;
            let dth = path.theta.as_ref().unwrap()[1] - s0.theta
                + 4.0 * (alpha0 * alpha0 + beta0 * beta0) * dz;
            let prod = dt0 * dth;
            acc += prod;
            acc2 += prod * prod;
        }
        let m = trials as f64;
        let cov = acc / m;
        let se = ((acc2 / m - cov * cov) / m).sqrt();
        let var_dd = eps2 * PI * PI / (96.0 * beta0.powi(3)) * dz;
        let want = 2.0 * alpha0 * var_dd;
        assert!((cov - want).abs() < 3.0 * se, "cov {cov:.4e} vs {want:.4e}, se {se:.1e}");
        assert!(want > 5.0 * se, "no power: want {want:.2e}, se {se:.2e}");
    }

    #[test]
    fn collapse_is_reported_with_location() {
        let s0 = SolitonState::new(0.0, 0.05, 0.0, 0.0).unwrap();
        let mut seen = false;
        for seed in 0..50 {
            match simulate_soliton_sde(&s0, &cfg(0.05, 5.0, 1.0, seed)) {
                Err(Error::SolitonCollapse { z }) => {
                    assert!(z > 0.0 && z <= 5.0);
                    seen = true;
                    break;
                }
                Ok(_) => continue,
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(seen, "no collapse in 50 seeds at eps = 1");
    }

    #[test]
    fn zero_path_channel_is_the_scaled_input() {
        let spec =
            SolitonSpec::new(Complex64::new(0.2, 0.6), Complex64::new(0.5, -0.5)).unwrap();
        let s0 = SolitonState::from_spec(&spec);
        let path = simulate_soliton_sde(&s0, &cfg(0.01, 4.0, 0.0, 3)).unwrap();
        let sample = magnitude_channel(&path, &spec);
        let a0 = spec.zeta.re;
        let b0 = spec.zeta.im;
        let want_ln = spec.q_d.norm().ln() + 8.0 * a0 * b0 * 4.0;
        let want_ph = wrap_phase(spec.q_d.arg() - 4.0 * (a0 * a0 - b0 * b0) * 4.0);
        assert!((sample.ln_mag_in - want_ln).abs() < 1e-12);
        assert!((sample.ln_mag_out - want_ln).abs() < 1e-12);
        assert!((sample.phase_out - want_ph).abs() < 1e-12);
        assert!(sample.phase_out >= -PI && sample.phase_out < PI);

        let concat = concatenate_model(&path, &spec, 1).unwrap();
        assert!((concat.ln_mag_out - want_ln).abs() < 1e-12);
        assert!((concat.phase_out - want_ph).abs() < 1e-12);
    }

    /// Synthetic smooth path for quadrature checks. Both components vanish
    /// at z = 0; with `end_zero` they vanish at z = total as well.
    fn synthetic_path(n: usize, total: f64, end_zero: bool) -> PerturbationPath {
        let z_grid: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64 * total).collect();
        let (ups_r, ups_i): (Vec<f64>, Vec<f64>) = if end_zero {
            (
                z_grid.iter().map(|&z| 0.08 * (PI * z / total).sin().powi(2)).collect(),
                z_grid.iter().map(|&z| -0.05 * (2.0 * PI * z / total).sin().powi(2)).collect(),
            )
        } else {
            let shape = |z: f64| (1.7 * z / total + 0.2).sin() - 0.2_f64.sin();
            (
                z_grid.iter().map(|&z| 0.08 * shape(z)).collect(),
                z_grid.iter().map(|&z| -0.05 * shape(0.83 * z)).collect(),
            )
        };
        PerturbationPath::from_eigen_tracks(z_grid, ups_r, ups_i, 0.0).unwrap()
    }

    #[test]
    fn concatenation_converges_at_first_order_in_segment_count() {
        let spec =
            SolitonSpec::new(Complex64::new(0.1, 0.9), Complex64::new(1.0, 0.3)).unwrap();
        let path = synthetic_path(4096, 6.0, false);
        let reference = magnitude_channel(&path, &spec);
        let mut prev_err = f64::NAN;
        for &m in &[16_usize, 32, 64, 128] {
            let sample = concatenate_model(&path, &spec, m).unwrap();
            let err = (sample.ln_mag_out - reference.ln_mag_out).abs();
            if prev_err.is_finite() {
                let ratio = prev_err / err;
                assert!((1.6..2.4).contains(&ratio), "ratio {ratio:.2} at m = {m}");
            }
            prev_err = err;
        }
    }

    #[test]
    fn converged_concatenation_agrees_with_quadrature() {
        // A path vanishing at both ends makes the left-endpoint sum and the
        // trapezoid rule coincide on the same samples, so the two model
        // implementations must agree to rounding.
        let spec =
            SolitonSpec::new(Complex64::new(-0.3, 0.5), Complex64::new(0.2, 0.8)).unwrap();
        let path = synthetic_path(2048, 5.0, true);
        let integral = magnitude_channel(&path, &spec);
        let concat = concatenate_model(&path, &spec, 2048).unwrap();
        let dm = (concat.ln_mag_out - integral.ln_mag_out).abs();
        assert!(dm < 1e-8, "ln mag mismatch {dm:.2e}");
        let composed = integral.ln_mag_in
            + 8.0 * spec.zeta.re * concat.i_i
            + 8.0 * spec.zeta.im * concat.i_r
            + 8.0 * concat.i_ri;
        assert!((concat.ln_mag_out - composed).abs() < 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_the_modeled_noise() {
        let spec =
            SolitonSpec::new(Complex64::new(0.15, 0.45), Complex64::new(0.9, 0.1)).unwrap();
        let s0 = SolitonState::from_spec(&spec);
        let path = simulate_soliton_sde(&s0, &cfg(0.005, 8.0, 5e-4, 1234)).unwrap();
        let d = perturbation_model(&path, &spec).unwrap();
        // Independent evaluation of the modeled right-hand side.
        let ui = *path.ups_i.last().unwrap();
        let gr = trapezoid(&path.z_grid, &path.ups_r);
        let dd = *path.delta.as_ref().unwrap().last().unwrap();
        let want = 8.0 * path.total_z() * spec.zeta.re * ui
            + 8.0 * spec.zeta.im * gr
            + 8.0 * ui * gr
            + 2.0 * ui * dd
            + 2.0 * spec.zeta.im * dd
            + 2.0 * ui * s0.t0
            + ((spec.zeta.im + ui) / spec.zeta.im).ln();
        assert!((d.total() - want).abs() < 1e-12, "{} vs {want}", d.total());
        assert!(d.n1() == d.n11 + d.n12 + d.n13);
    }

    #[test]
    fn decomposition_without_tracks_is_rejected_and_zero_noise_is_zero() {
        let spec =
            SolitonSpec::new(Complex64::new(0.0, 0.5), Complex64::new(1.0, 0.0)).unwrap();
        let bare = synthetic_path(64, 2.0, true);
        match perturbation_model(&bare, &spec) {
            Err(Error::MissingTrack { track }) => assert_eq!(track, "t0"),
            other => panic!("expected missing track, got {other:?}"),
        }
        let s0 = SolitonState::from_spec(&spec);
        let quiet = simulate_soliton_sde(&s0, &cfg(0.01, 2.0, 0.0, 5)).unwrap();
        let d = perturbation_model(&quiet, &spec).unwrap();
        assert_eq!(d.total(), 0.0);
        assert_eq!(d.n2, 0.0);
        assert_eq!(d.n3(), 0.0);
    }

    #[test]
    fn exports_render_expected_shapes() {
        let s0 = SolitonState::new(0.0, 0.7, 0.0, 0.0).unwrap();
        let path = simulate_soliton_sde(&s0, &cfg(0.5, 1.0, 1e-4, 11)).unwrap();
        let csv = path.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("z,ups_r,ups_i"));
        assert_eq!(csv.lines().count(), 4);
        let spec = s0.to_spec().unwrap();
        let sample = magnitude_channel(&path, &spec);
        let line = sample.to_json_line();
        assert!(line.contains("\"ln_mag_out\""));
        let back: AmplitudeChannelSample = serde_json::from_str(&line).unwrap();
        assert!((back.ln_mag_out - sample.ln_mag_out).abs() < 1e-15);
    }
}
