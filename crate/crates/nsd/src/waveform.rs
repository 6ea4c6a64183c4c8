//! Time grids, closed-form solitons, and Darboux synthesis of multi-solitons.
//!
//! A soliton with eigenvalue zeta = alpha + j beta and spectral amplitude
//! Q^(d) has the field
//!
//!   q(t) = 2 beta sech(2 beta (t - T0)) exp(-j (2 alpha t + arg Q^(d) + pi/2)),
//!   T0 = ln(|Q^(d)| / (2 beta)) / (2 beta),
//!
//! and evolves by Q^(d)(z) = Q^(d)(0) exp(-4 j zeta^2 z). Multi-solitons are
//! synthesized by chaining elementary Darboux steps: each step inserts one
//! eigenvalue into the potential while preserving the ones already present.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::io::{Read, Write};

/// Magnitude the field must have decayed below at both grid edges.
pub const EDGE_TOL: f64 = 1e-8;

/// Eigenvalues closer than this are treated as duplicates.
pub const EIGEN_DEDUP: f64 = 1e-9;

/// Uniform sampling grid: t_k = t_start + k dt, k = 0..n-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n: usize) -> Result<TimeGrid> {
        if !t_start.is_finite() {
            return Err(Error::InvalidParam {
                field: "t_start",
                message: format!("must be finite, got {t_start}"),
            });
        }
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidParam {
                field: "dt",
                message: format!("must be finite and positive, got {dt}"),
            });
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidParam {
                field: "n",
                message: format!("must be a power of two >= 8, got {n}"),
            });
        }
        Ok(TimeGrid { t_start, dt, n })
    }

    /// Grid symmetric about zero: t_start = -(n/2) dt.
    pub fn centered(width: f64, n: usize) -> Result<TimeGrid> {
        if !width.is_finite() || width <= 0.0 {
            return Err(Error::InvalidParam {
                field: "width",
                message: format!("must be finite and positive, got {width}"),
            });
        }
        let dt = width / n as f64;
        TimeGrid::new(-(n as f64 / 2.0) * dt, dt, n)
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.t(k))
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n - 1)
    }
}

/// Sampled complex field at propagation distance `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub grid: TimeGrid,
    pub samples: Vec<Complex64>,
    pub z: f64,
}

impl Signal {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>, z: f64) -> Result<Signal> {
        if samples.len() != grid.n {
            return Err(Error::InvalidParam {
                field: "samples",
                message: format!("length {} does not match grid n = {}", samples.len(), grid.n),
            });
        }
        Ok(Signal { grid, samples, z })
    }

    pub fn zeros(grid: TimeGrid, z: f64) -> Signal {
        Signal { grid, samples: vec![Complex64::new(0.0, 0.0); grid.n], z }
    }

    /// Largest |q| over the first and last sample.
    pub fn edge_magnitude(&self) -> f64 {
        let first = self.samples.first().map_or(0.0, |c| c.norm());
        let last = self.samples.last().map_or(0.0, |c| c.norm());
        first.max(last)
    }

    /// `t,re_q,im_q` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,re_q,im_q")?;
        for (t, q) in self.grid.times().zip(&self.samples) {
            writeln!(w, "{t},{},{}", q.re, q.im)?;
        }
        Ok(())
    }

    /// 16-byte header (n as u64 LE, dt as f64 LE) followed by n little-endian
    /// (re, im) f64 pairs. The format stores centred grids only; t_start is
    /// reconstructed as -(n/2) dt on read and z resets to 0.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let centered = -(self.grid.n as f64 / 2.0) * self.grid.dt;
        if (self.grid.t_start - centered).abs() > 1e-9 * self.grid.dt {
            return Err(Error::InvalidParam {
                field: "t_start",
                message: format!(
                    "binary format stores centred grids; expected t_start = {centered}, got {}",
                    self.grid.t_start
                ),
            });
        }
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&self.grid.dt.to_le_bytes())?;
        for q in &self.samples {
            w.write_all(&q.re.to_le_bytes())?;
            w.write_all(&q.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Signal> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        let n = u64::from_le_bytes(header[..8].try_into().unwrap()) as usize;
        let dt = f64::from_le_bytes(header[8..].try_into().unwrap());
        let grid = TimeGrid::new(-(n as f64 / 2.0) * dt, dt, n)?;
        let mut buf = vec![0u8; 16 * n];
        r.read_exact(&mut buf)?;
        let samples = buf
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Signal::new(grid, samples, 0.0)
    }
}

/// Trapezoid rule for the pulse energy, int |q|^2 dt.
pub fn energy(sig: &Signal) -> f64 {
    let sq: Vec<f64> = sig.samples.iter().map(|q| q.norm_sqr()).collect();
    let interior: f64 = sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[sig.grid.n - 1]);
    interior * sig.grid.dt
}

/// One soliton of the discrete spectrum: eigenvalue in the upper half plane
/// and the spectral amplitude attached to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonSpec {
    pub zeta: Complex64,
    pub q_d: Complex64,
}

impl SolitonSpec {
    pub fn new(zeta: Complex64, q_d: Complex64) -> Result<SolitonSpec> {
        if !zeta.re.is_finite() || !zeta.im.is_finite() || zeta.im <= 0.0 {
            return Err(Error::InvalidParam {
                field: "zeta",
                message: format!("eigenvalue must be finite with positive imaginary part, got {zeta}"),
            });
        }
        if !q_d.re.is_finite() || !q_d.im.is_finite() || q_d.norm() == 0.0 {
            return Err(Error::InvalidParam {
                field: "q_d",
                message: format!("spectral amplitude must be finite and nonzero, got {q_d}"),
            });
        }
        Ok(SolitonSpec { zeta, q_d })
    }

    /// Spectral amplitude advanced to distance z: Q^(d) exp(-4 j zeta^2 z).
    pub fn at_distance(&self, z: f64) -> SolitonSpec {
        let phase = Complex64::new(0.0, -4.0) * self.zeta * self.zeta * z;
        SolitonSpec { zeta: self.zeta, q_d: self.q_d * phase.exp() }
    }

    /// Pulse centre ln(|Q^(d)|/2beta)/(2beta).
    pub fn center(&self) -> f64 {
        let beta = self.zeta.im;
        (self.q_d.norm() / (2.0 * beta)).ln() / (2.0 * beta)
    }
}

fn check_edges(sig: &Signal) -> Result<()> {
    let edge = sig.edge_magnitude();
    if edge > EDGE_TOL {
        return Err(Error::GridTooNarrow { edge_magnitude: edge, threshold: EDGE_TOL });
    }
    Ok(())
}

/// Closed-form single soliton at distance `z` sampled on `grid`.
pub fn make_soliton(spec: &SolitonSpec, z: f64, grid: &TimeGrid) -> Result<Signal> {
    SolitonSpec::new(spec.zeta, spec.q_d)?;
    let evolved = spec.at_distance(z);
    let alpha = evolved.zeta.re;
    let beta = evolved.zeta.im;
    let t0 = evolved.center();
    let phi0 = evolved.q_d.arg() + std::f64::consts::FRAC_PI_2;
    let samples = grid
        .times()
        .map(|t| {
            let amp = 2.0 * beta * sech(2.0 * beta * (t - t0));
            amp * Complex64::new(0.0, -(2.0 * alpha * t + phi0)).exp()
        })
        .collect();
    let sig = Signal::new(*grid, samples, z)?;
    check_edges(&sig)?;
    Ok(sig)
}

#[inline]
fn sech(x: f64) -> f64 {
    // 2e^{-|x|}/(1+e^{-2|x|}) avoids overflow of cosh for large |x|.
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// N-soliton with prescribed eigenvalues and spectral amplitudes at
/// distance `z`, built by a chain of elementary Darboux steps.
///
/// The k-th step uses the seed ratio
///
///   s_k = (j Q^(d)_k / (2 beta_k)) prod_{m != k} (zeta_k - zeta_m)/(zeta_k - zeta_m^*),
///
/// which compensates the scattering-derivative factors the other steps
/// contribute, so the forward transform of the result returns exactly the
/// requested (zeta_k, Q^(d)_k) pairs. Auxiliary vectors are kept unit-length
/// per sample; only their direction matters.
pub fn make_nsoliton(specs: &[SolitonSpec], z: f64, grid: &TimeGrid) -> Result<Signal> {
    if specs.is_empty() {
        return Err(Error::InvalidParam {
            field: "specs",
            message: "at least one soliton is required".into(),
        });
    }
    for s in specs {
        SolitonSpec::new(s.zeta, s.q_d)?;
    }
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            if (a.zeta - b.zeta).norm() < EIGEN_DEDUP {
                return Err(Error::DuplicateEigenvalue { zeta: a.zeta });
            }
        }
    }

    let mut evolved: Vec<SolitonSpec> = specs.iter().map(|s| s.at_distance(z)).collect();
    // Insert slow (small beta) eigenvalues first; wide pulses make the most
    // stable early backgrounds.
    evolved.sort_by(|a, b| a.zeta.im.total_cmp(&b.zeta.im));

    let n = grid.n;
    let num = evolved.len();

    // Seed ratios with the cross-eigenvalue correction.
    let seeds: Vec<Complex64> = (0..num)
        .map(|k| {
            let zk = evolved[k].zeta;
            let mut s = Complex64::new(0.0, 1.0) * evolved[k].q_d / (2.0 * zk.im);
            for (m, other) in evolved.iter().enumerate() {
                if m != k {
                    s *= (zk - other.zeta) / (zk - other.zeta.conj());
                }
            }
            s
        })
        .collect();

    // phi[j][i]: auxiliary vector of eigenvalue j at sample i, unit norm.
    let mut phi: Vec<Vec<[Complex64; 2]>> = (0..num)
        .map(|j| {
            let zeta = evolved[j].zeta;
            let s = seeds[j];
            let ln_s = s.norm().ln();
            let arg_s = s.arg();
            grid.times()
                .map(|t| {
                    // Unnormalized seed (e^{-j zeta t}, s e^{j zeta t}); the
                    // second-to-first magnitude ratio is e^{ln|s| - 2 beta t}.
                    let u1 = Complex64::new(0.0, -zeta.re * t).exp();
                    let u2 = Complex64::new(0.0, zeta.re * t + arg_s).exp();
                    let lr = ln_s - 2.0 * zeta.im * t;
                    if lr >= 0.0 {
                        let inv = (-lr).exp();
                        let norm = (1.0 + inv * inv).sqrt();
                        [u1 * inv / norm, u2 / norm]
                    } else {
                        let r = lr.exp();
                        let norm = (1.0 + r * r).sqrt();
                        [u1 / norm, u2 * r / norm]
                    }
                })
                .collect()
        })
        .collect();

    let mut q = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..num {
        let zeta_k = evolved[k].zeta;
        let shift = zeta_k.conj() - zeta_k;
        let (head, tail) = phi.split_at_mut(k + 1);
        let phik = &head[k];
        for i in 0..n {
            let [p1, p2] = phik[i];
            // Unit norm, so the projector needs no denominator.
            let p11 = p1.norm_sqr();
            let p12 = p1 * p2.conj();
            let p21 = p12.conj();
            let p22 = p2.norm_sqr();
            q[i] += 4.0 * zeta_k.im * p12;
            for (off, rest) in tail.iter_mut().enumerate() {
                let zj = evolved[k + 1 + off].zeta;
                let diag = zj - zeta_k.conj();
                let [v1, v2] = rest[i];
                let w1 = (diag + shift * p11) * v1 + shift * p12 * v2;
                let w2 = shift * p21 * v1 + (diag + shift * p22) * v2;
                let norm = (w1.norm_sqr() + w2.norm_sqr()).sqrt();
                rest[i] = if norm > 0.0 { [w1 / norm, w2 / norm] } else { [w1, w2] };
            }
        }
    }

    let sig = Signal::new(*grid, q, z)?;
    check_edges(&sig)?;
    Ok(sig)
}

/// Grid wide and fine enough for every requested soliton at distance `z`:
/// width covers the slowest tail decay and the spread of pulse centres,
/// dt resolves the fastest pulse.
pub fn default_grid(specs: &[SolitonSpec], z: f64) -> Result<TimeGrid> {
    if specs.is_empty() {
        return Err(Error::InvalidParam {
            field: "specs",
            message: "at least one soliton is required".into(),
        });
    }
    for s in specs {
        SolitonSpec::new(s.zeta, s.q_d)?;
    }
    let evolved: Vec<SolitonSpec> = specs.iter().map(|s| s.at_distance(z)).collect();
    let beta_min = evolved.iter().map(|s| s.zeta.im).fold(f64::INFINITY, f64::min);
    let beta_max = evolved.iter().map(|s| s.zeta.im).fold(0.0, f64::max);
    let centers: Vec<f64> = evolved.iter().map(|s| s.center()).collect();
    let c_min = centers.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_max = centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (c_min + c_max);

    let mut width = (40.0 / (2.0 * beta_min)).max(8.0 * (c_max - c_min));
    // Widen if any pulse sits far enough off centre that its tail would not
    // reach EDGE_TOL at the edge: need 2b sech(2b (w/2 - |T0 - mid|)) <= tol/2.
    // Each neighbour also displaces a soliton's asymptotic tail outward by up
    // to ln(|zeta - zeta_m*| / |zeta - zeta_m|) / beta, so budget that too.
    for s in &evolved {
        let b = s.zeta.im;
        let mut shift = 0.0;
        for other in &evolved {
            if other.zeta != s.zeta {
                shift += ((s.zeta - other.zeta.conj()).norm() / (s.zeta - other.zeta).norm()).ln() / b;
            }
        }
        let reach = ((4.0 * b / (0.5 * EDGE_TOL)).ln().max(1.0)) / (2.0 * b) + shift;
        let needed = 2.0 * ((s.center() - mid).abs() + reach);
        width = width.max(needed);
    }

    let dt_max = 0.05 / beta_max;
    let mut n: usize = 8;
    while (width / n as f64) > dt_max {
        n = n.checked_mul(2).ok_or(Error::InvalidParam {
            field: "n",
            message: "grid size overflow".into(),
        })?;
        if n > (1 << 24) {
            return Err(Error::InvalidParam {
                field: "n",
                message: format!("required grid size exceeds 2^24 (width {width:.3e}, dt {dt_max:.3e})"),
            });
        }
    }
    let dt = width / n as f64;
    TimeGrid::new(mid - (n as f64 / 2.0) * dt, dt, n)
}
