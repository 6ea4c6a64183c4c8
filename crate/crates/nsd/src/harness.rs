//! Monte Carlo experiments that pit the closed forms against simulation.
//!
//! An experiment draws launch states from an input ensemble, runs one
//! channel per trial (either the reduced parameter SDEs or the full-field
//! split-step propagation), extracts scalar observables, and accumulates
//! moment estimates. Each requested check pairs one estimate with its
//! closed-form value from the analytics module and reports a pass/fail
//! verdict: z-tests against the Monte Carlo standard error for moments the
//! reduced model reproduces exactly, relative tolerances for variances the
//! formulas only capture to first order.
//!
//! Determinism contract: trial seeds are derived from the master seed by a
//! splittable counter hash, trials run in parallel, and results are folded
//! in trial order, so a repeated run emits byte-identical reports no matter
//! how work was scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::analytics::{section6_stats, theorem4_stats, Dist, InputEnsemble, StatReport};
use crate::error::{Error, Result};
use crate::nft::DiscreteSpectrum;
use crate::perturb::{magnitude_channel, perturbation_model, simulate_soliton_sde, SolitonState};
use crate::ssfm::{measure_eigen_noise, propagate, PropagationConfig};
use crate::waveform::{make_soliton, TimeGrid};

/// Neumaier-compensated sum with a bit-commutative merge.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Acc {
    s: f64,
    c: f64,
}

impl Acc {
    const ZERO: Acc = Acc { s: 0.0, c: 0.0 };

    fn add(&mut self, x: f64) {
        let t = self.s + x;
        self.c += if self.s.abs() >= x.abs() { (self.s - t) + x } else { (x - t) + self.s };
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }

    /// Symmetric two-sum combination: merge(a, b) and merge(b, a) are
    /// bit-identical.
    fn merge(a: Acc, b: Acc) -> Acc {
        let hi = a.s + b.s;
        let lo = (a.s - (hi - b.s)) + (b.s - (hi - a.s));
        Acc { s: hi, c: (a.c + b.c) + lo }
    }
}

/// Streaming moment estimate of one named scalar observable.
///
/// Raw power sums up to the fourth are kept in compensated accumulators;
/// mean, variance, and their standard errors are derived views. The
/// variance standard error is the delete-one jackknife, evaluated in closed
/// form from the power sums.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    observable: String,
    n: u64,
    s1: Acc,
    s2: Acc,
    s3: Acc,
    s4: Acc,
}

impl MomentEstimate {
    pub fn new(observable: &str) -> MomentEstimate {
        MomentEstimate {
            observable: observable.to_string(),
            n: 0,
            s1: Acc::ZERO,
            s2: Acc::ZERO,
            s3: Acc::ZERO,
            s4: Acc::ZERO,
        }
    }

    pub fn observable(&self) -> &str {
        &self.observable
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn add(&mut self, x: f64) {
        let x2 = x * x;
        self.s1.add(x);
        self.s2.add(x2);
        self.s3.add(x2 * x);
        self.s4.add(x2 * x2);
        self.n += 1;
    }

    /// Exact pooling of two estimates of the same observable; commutative
    /// to the bit.
    pub fn merge(a: &MomentEstimate, b: &MomentEstimate) -> Result<MomentEstimate> {
        if a.observable != b.observable {
            return Err(Error::InvalidParam {
                field: "observable",
                message: format!("cannot merge `{}` with `{}`", a.observable, b.observable),
            });
        }
        Ok(MomentEstimate {
            observable: a.observable.clone(),
            n: a.n + b.n,
            s1: Acc::merge(a.s1, b.s1),
            s2: Acc::merge(a.s2, b.s2),
            s3: Acc::merge(a.s3, b.s3),
            s4: Acc::merge(a.s4, b.s4),
        })
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.s1.value() / self.n as f64
    }

    /// Unbiased sample variance, clamped at zero against rounding.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let s1 = self.s1.value();
        ((self.s2.value() - s1 * s1 / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr_mean(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// Delete-one jackknife standard error of the sample variance.
    ///
    /// Each leave-one-out variance is a quadratic A + B x_i + C x_i^2 in
    /// the removed sample, so the jackknife spread reduces to the stored
    /// power sums.
    pub fn stderr_var(&self) -> f64 {
        if self.n < 3 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let (s1, s2, s3, s4) =
            (self.s1.value(), self.s2.value(), self.s3.value(), self.s4.value());
        let a = s2 - s1 * s1 / (n - 1.0);
        let b = 2.0 * s1 / (n - 1.0);
        let c = -n / (n - 1.0);
        let denom = n - 2.0;
        let sum_v = (n * a + b * s1 + c * s2) / denom;
        let sum_v2 = (n * a * a
            + 2.0 * a * b * s1
            + (b * b + 2.0 * a * c) * s2
            + 2.0 * b * c * s3
            + c * c * s4)
            / (denom * denom);
        let ssq = (sum_v2 - sum_v * sum_v / n).max(0.0);
        ((n - 1.0) / n * ssq).sqrt()
    }
}

/// Which channel generates the trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sde,
    Ssfm,
}

/// Full description of one Monte Carlo experiment.
///
/// `propagation.seed` is ignored: each trial replaces it with a seed
/// derived from `master_seed` and the trial index. The grid fields apply
/// to full-field mode only.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub trials: u64,
    pub ensemble: InputEnsemble,
    pub propagation: PropagationConfig,
    pub checks: Vec<String>,
    pub master_seed: u64,
    pub grid_width: f64,
    pub grid_n: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParam {
                field: "trials",
                message: "need at least one trial".into(),
            });
        }
        self.ensemble.validate()?;
        self.propagation.validate()?;
        if self.mode == Mode::Ssfm {
            TimeGrid::centered(self.grid_width, self.grid_n)?;
        }
        for name in &self.checks {
            let def = check_def(name)
                .ok_or_else(|| Error::StatisticUnknown { name: name.clone() })?;
            if def.sde_only && self.mode == Mode::Ssfm {
                return Err(Error::Config {
                    message: format!(
                        "check `{name}` needs the recorded parameter path; it is not available in full-field mode"
                    ),
                });
            }
            // The product-mean identity behind this check needs E[alpha] = 0.
            if name == "cov_n1_n3" && self.ensemble.alpha0.mean() != 0.0 {
                return Err(Error::Config {
                    message: "check `cov_n1_n3` requires a zero-mean alpha alphabet".into(),
                });
            }
        }
        Ok(())
    }
}

/// Scalars extracted from one trial. Path-integral fields are only
/// populated in SDE mode; the mode gate on checks keeps them unread
/// otherwise.
#[derive(Debug, Clone, Copy)]
struct TrialOutput {
    alpha0: f64,
    beta0: f64,
    ups_r: f64,
    ups_i: f64,
    ups_r_mid: f64,
    i_r: f64,
    i_i: f64,
    i_ri: f64,
    mag: f64,
    n1: f64,
    n2: f64,
    n3: f64,
    n4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stat {
    MeanOf,
    VarOf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Compare {
    /// |mc - analytic| <= k * stderr.
    Sigma(f64),
    /// |mc - analytic| <= tol * |analytic|.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Obs {
    UpsR,
    UpsI,
    UpsR2,
    UpsI2,
    UpsCross,
    UpsRMid4,
    GammaI,
    GammaR2,
    GammaI2,
    GammaRCrossRi,
    GammaRCrossI,
    Mag,
    N1,
    N2,
    N3,
    N4,
    N0,
    N1CrossN3,
}

struct CheckDef {
    name: &'static str,
    stat: Stat,
    obs: Obs,
    compare: Compare,
    sde_only: bool,
}

/// Registry of named statistics an experiment can check. Names are stable
/// CLI/report identifiers.
const CHECKS: &[CheckDef] = &[
    CheckDef { name: "mean_ups_r", stat: Stat::MeanOf, obs: Obs::UpsR, compare: Compare::Sigma(3.0), sde_only: false },
    CheckDef { name: "mean_ups_i", stat: Stat::MeanOf, obs: Obs::UpsI, compare: Compare::Sigma(3.0), sde_only: false },
    CheckDef { name: "m2_ups_r", stat: Stat::MeanOf, obs: Obs::UpsR2, compare: Compare::Sigma(3.0), sde_only: false },
    CheckDef { name: "m2_ups_i", stat: Stat::MeanOf, obs: Obs::UpsI2, compare: Compare::Sigma(3.0), sde_only: false },
    CheckDef { name: "var_ups_r", stat: Stat::VarOf, obs: Obs::UpsR, compare: Compare::Relative(0.10), sde_only: false },
    CheckDef { name: "var_ups_i", stat: Stat::VarOf, obs: Obs::UpsI, compare: Compare::Relative(0.10), sde_only: false },
    CheckDef { name: "corr_ups", stat: Stat::MeanOf, obs: Obs::UpsCross, compare: Compare::Sigma(3.0), sde_only: false },
    CheckDef { name: "m4_ups_r_mid", stat: Stat::MeanOf, obs: Obs::UpsRMid4, compare: Compare::Sigma(3.0), sde_only: true },
    CheckDef { name: "mean_gamma_i", stat: Stat::MeanOf, obs: Obs::GammaI, compare: Compare::Sigma(3.0), sde_only: true },
    CheckDef { name: "m2_gamma_r", stat: Stat::MeanOf, obs: Obs::GammaR2, compare: Compare::Sigma(3.0), sde_only: true },
    CheckDef { name: "m2_gamma_i", stat: Stat::MeanOf, obs: Obs::GammaI2, compare: Compare::Sigma(3.0), sde_only: true },
    CheckDef { name: "cross_gamma_r_ri", stat: Stat::MeanOf, obs: Obs::GammaRCrossRi, compare: Compare::Sigma(3.0), sde_only: true },
    CheckDef { name: "cross_gamma_r_i", stat: Stat::MeanOf, obs: Obs::GammaRCrossI, compare: Compare::Sigma(3.0), sde_only: true },
    CheckDef { name: "mean_mag", stat: Stat::MeanOf, obs: Obs::Mag, compare: Compare::Sigma(3.0), sde_only: false },
    CheckDef { name: "var_mag", stat: Stat::VarOf, obs: Obs::Mag, compare: Compare::Relative(0.05), sde_only: false },
    CheckDef { name: "var_n1", stat: Stat::VarOf, obs: Obs::N1, compare: Compare::Relative(0.10), sde_only: true },
    CheckDef { name: "var_n2", stat: Stat::VarOf, obs: Obs::N2, compare: Compare::Relative(0.10), sde_only: true },
    CheckDef { name: "var_n3", stat: Stat::VarOf, obs: Obs::N3, compare: Compare::Relative(0.10), sde_only: true },
    CheckDef { name: "var_n4", stat: Stat::VarOf, obs: Obs::N4, compare: Compare::Relative(0.10), sde_only: true },
    CheckDef { name: "var_n0", stat: Stat::VarOf, obs: Obs::N0, compare: Compare::Relative(0.10), sde_only: true },
    CheckDef { name: "cov_n1_n3", stat: Stat::MeanOf, obs: Obs::N1CrossN3, compare: Compare::Sigma(3.0), sde_only: true },
];

fn check_def(name: &str) -> Option<&'static CheckDef> {
    CHECKS.iter().find(|d| d.name == name)
}

/// Names of every registered statistic, in report order.
pub fn registered_checks() -> Vec<&'static str> {
    CHECKS.iter().map(|d| d.name).collect()
}

fn extract(obs: Obs, t: &TrialOutput) -> f64 {
    match obs {
        Obs::UpsR => t.ups_r,
        Obs::UpsI => t.ups_i,
        Obs::UpsR2 => t.ups_r * t.ups_r,
        Obs::UpsI2 => t.ups_i * t.ups_i,
        Obs::UpsCross => t.ups_r * t.ups_i,
        Obs::UpsRMid4 => t.ups_r_mid.powi(4),
        Obs::GammaI => t.i_i,
        Obs::GammaR2 => t.i_r * t.i_r,
        Obs::GammaI2 => t.i_i * t.i_i,
        Obs::GammaRCrossRi => t.i_r * t.i_ri,
        Obs::GammaRCrossI => t.i_r * t.i_i,
        Obs::Mag => t.mag,
        Obs::N1 => t.n1,
        Obs::N2 => t.n2,
        Obs::N3 => t.n3,
        Obs::N4 => t.n4,
        Obs::N0 => 8.0 * t.alpha0 * t.i_i + 8.0 * t.beta0 * t.i_r,
        Obs::N1CrossN3 => t.n1 * t.n3,
    }
}

/// Closed-form target for a named check under the experiment's ensemble,
/// noise strength, and span.
fn analytic_value(name: &str, ens: &InputEnsemble, eps2: f64, l: f64) -> Result<f64> {
    let x = eps2 * l;
    let e_b = ens.beta0.mean();
    let e_b2 = ens.beta0.moment(2);
    let e_a = ens.alpha0.mean();
    Ok(match name {
        "mean_ups_r" => 0.0,
        "mean_ups_i" => 0.5 * x,
        "m2_ups_r" => x * e_b / 6.0 + x * x / 24.0,
        "m2_ups_i" => 0.5 * x * e_b + 0.375 * x * x,
        "var_ups_r" => x * e_b / 6.0 + x * x / 24.0,
        "var_ups_i" => 0.5 * x * e_b + 0.125 * x * x,
        "corr_ups" => 0.0,
        "m4_ups_r_mid" => {
            let xs = 0.5 * x;
            xs * xs * e_b2 / 12.0 + xs.powi(3) * e_b / 18.0 + xs.powi(4) / 144.0
        }
        "mean_gamma_i" => 0.25 * x * l,
        "m2_gamma_r" => x * l * l * e_b / 18.0 + x * x * l * l / 144.0,
        "m2_gamma_i" => x * l * l * e_b / 6.0 + x * x * l * l / 12.0,
        "cross_gamma_r_ri" => 5.0 / 288.0 * x * x * l * l * e_b + 7.0 / 2880.0 * x.powi(3) * l * l,
        "cross_gamma_r_i" => 0.0,
        "mean_mag" => 2.0 * x * l * e_a,
        "var_mag" => theorem4_stats(ens, eps2, l)?.1,
        "var_n1" => section6_stats(ens, eps2, l)?.var_n1,
        "var_n2" => section6_stats(ens, eps2, l)?.var_n2,
        "var_n3" => section6_stats(ens, eps2, l)?.var_n3,
        "var_n4" => section6_stats(ens, eps2, l)?.var_n4,
        "var_n0" => section6_stats(ens, eps2, l)?.var_n0,
        "cov_n1_n3" => section6_stats(ens, eps2, l)?.cov_n1_n3,
        other => return Err(Error::StatisticUnknown { name: other.to_string() }),
    })
}

/// Closed-form values for every registered statistic under one ensemble,
/// as analytic-only reports (no Monte Carlo column).
pub fn analytic_reports(ens: &InputEnsemble, eps2: f64, l: f64) -> Result<Vec<StatReport>> {
    ens.validate()?;
    CHECKS
        .iter()
        .map(|d| Ok(StatReport::analytic_only(d.name, analytic_value(d.name, ens, eps2, l)?)))
        .collect()
}

/// Counter-derived per-trial seed (splittable hash of master and index, so
/// shard boundaries can never shift a trial's stream).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_dist(d: &Dist, rng: &mut ChaCha8Rng) -> f64 {
    match *d {
        Dist::Point(v) => v,
        Dist::Uniform(a, b) => a + (b - a) * rng.gen::<f64>(),
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialOutput> {
    let seed = trial_seed(cfg.master_seed, trial);
    // Input draws live on a stream the propagation streams (step-indexed
    // from zero) can never reach.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let alpha0 = sample_dist(&cfg.ensemble.alpha0, &mut rng);
    let beta0 = sample_dist(&cfg.ensemble.beta0, &mut rng);
    let t00 = sample_dist(&cfg.ensemble.t00, &mut rng);
    let state0 = SolitonState::new(alpha0, beta0, t00, 0.0)?;
    let spec0 = state0.to_spec()?;
    let prop = PropagationConfig { seed, ..cfg.propagation };

    match cfg.mode {
        Mode::Sde => {
            let path = simulate_soliton_sde(&state0, &prop)?;
            let ch = magnitude_channel(&path, &spec0);
            let parts = perturbation_model(&path, &spec0)?;
            let mid = path.ups_r[(path.z_grid.len() - 1) / 2];
            Ok(TrialOutput {
                alpha0,
                beta0,
                ups_r: *path.ups_r.last().expect("nonempty"),
                ups_i: *path.ups_i.last().expect("nonempty"),
                ups_r_mid: mid,
                i_r: ch.i_r,
                i_i: ch.i_i,
                i_ri: ch.i_ri,
                mag: ch.magnitude_noise(),
                n1: parts.n1(),
                n2: parts.n2,
                n3: parts.n3(),
                n4: parts.n4,
            })
        }
        Mode::Ssfm => {
            let grid = TimeGrid::centered(cfg.grid_width, cfg.grid_n)?;
            let sig = make_soliton(&spec0, 0.0, &grid)?;
            let out = propagate(&sig, &prop)?;
            let coords =
                measure_eigen_noise(&DiscreteSpectrum { entries: vec![spec0] }, &out)?;
            let c = &coords[0];
            Ok(TrialOutput {
                alpha0,
                beta0,
                ups_r: c.ups_r,
                ups_i: c.ups_i,
                ups_r_mid: f64::NAN,
                i_r: f64::NAN,
                i_i: f64::NAN,
                i_ri: f64::NAN,
                mag: c.dln_mag,
                n1: f64::NAN,
                n2: f64::NAN,
                n3: f64::NAN,
                n4: f64::NAN,
            })
        }
    }
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub reports: Vec<StatReport>,
    /// Moment estimate per check name, for downstream comparisons that go
    /// beyond the built-in pass rules.
    pub estimates: BTreeMap<String, MomentEstimate>,
    /// (trial index, error) for every failed trial.
    pub failures: Vec<(u64, String)>,
}

impl ExperimentResult {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Run the experiment: parallel trials, deterministic fold, one report per
/// requested check. Fails if more than 1% of trials error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let eps2 = if cfg.propagation.noise_on { cfg.propagation.eps * cfg.propagation.eps } else { 0.0 };
    let l = cfg.propagation.total_z;

    let outcomes: Vec<(u64, Result<TrialOutput>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| (trial, run_trial(cfg, trial)))
        .collect();

    let mut estimates: Vec<MomentEstimate> =
        cfg.checks.iter().map(|name| MomentEstimate::new(name)).collect();
    let mut failures = Vec::new();
    for (trial, outcome) in outcomes {
        match outcome {
            Ok(out) => {
                for (est, name) in estimates.iter_mut().zip(&cfg.checks) {
                    let def = check_def(name).expect("validated");
                    est.add(extract(def.obs, &out));
                }
            }
            Err(e) => failures.push((trial, e.to_string())),
        }
    }
    if failures.len() as u64 * 100 > cfg.trials {
        return Err(Error::TrialFailures {
            failed: failures.len(),
            total: cfg.trials as usize,
        });
    }

    let mut reports = Vec::with_capacity(cfg.checks.len());
    for (est, name) in estimates.iter().zip(&cfg.checks) {
        let def = check_def(name).expect("validated");
        let analytic = analytic_value(name, &cfg.ensemble, eps2, l)?;
        let (mc, se) = match def.stat {
            Stat::MeanOf => (est.mean(), est.stderr_mean()),
            Stat::VarOf => (est.variance(), est.stderr_var()),
        };
        reports.push(match def.compare {
            Compare::Sigma(k) => StatReport::from_mc(name, analytic, mc, se, k),
            Compare::Relative(tol) => {
                StatReport::from_mc_relative(name, analytic, mc, Some(se), tol)
            }
        });
    }
    let estimates = estimates
        .into_iter()
        .zip(&cfg.checks)
        .map(|(est, name)| (name.clone(), est))
        .collect();
    Ok(ExperimentResult { reports, estimates, failures })
}

/// JSON-lines rendering: one report object per line, in report order.
pub fn reports_to_json_lines(reports: &[StatReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out
}

/// CSV rendering with the fixed column order
/// `name,analytic,mc,stderr,z,pass`. Missing optionals render empty.
pub fn reports_to_csv(reports: &[StatReport]) -> String {
    let mut out = String::from("name,analytic,mc,stderr,z,pass\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in reports {
        out.push_str(&format!(
            "{},{:e},{},{},{},{}\n",
            r.name,
            r.analytic_value,
            opt(r.mc_value),
            opt(r.mc_stderr),
            opt(r.z),
            r.pass
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sde_config(trials: u64, checks: &[&str]) -> ExperimentConfig {
        ExperimentConfig {
            mode: Mode::Sde,
            trials,
            ensemble: InputEnsemble::point(0.0, 0.8, 0.3).unwrap(),
            propagation: PropagationConfig {
                dz: 0.01,
                total_z: 5.0,
                eps: (1e-3_f64).sqrt(),
                seed: 0,
                noise_on: true,
            },
            checks: checks.iter().map(|s| s.to_string()).collect(),
            master_seed: 31,
            grid_width: 44.0,
            grid_n: 256,
        }
    }

    #[test]
    fn estimate_matches_direct_computation() {
        let xs = [1.5, -0.25, 3.0, 0.5, 2.25, -1.0, 0.0, 1.25];
        let mut est = MomentEstimate::new("x");
        for &x in &xs {
            est.add(x);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert_eq!(est.n(), 8);
        assert!((est.mean() - mean).abs() < 1e-15);
        assert!((est.variance() - var).abs() < 1e-15);
        assert!((est.stderr_mean() - (var / n).sqrt()).abs() < 1e-15);

        // Jackknife against the brute-force delete-one loop.
        let mut loo = Vec::new();
        for skip in 0..xs.len() {
            let rest: Vec<f64> = xs
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != skip)
                .map(|(_, &v)| v)
                .collect();
            let m = rest.iter().sum::<f64>() / rest.len() as f64;
            loo.push(
                rest.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (rest.len() - 1) as f64,
            );
        }
        let lbar = loo.iter().sum::<f64>() / n;
        let want = ((n - 1.0) / n * loo.iter().map(|v| (v - lbar).powi(2)).sum::<f64>()).sqrt();
        assert!((est.stderr_var() - want).abs() < 1e-12, "{} vs {want}", est.stderr_var());
    }

    #[test]
    fn merge_is_commutative_and_respects_shards() {
        // Deterministic awkward stream: mixed signs, three decades of scale.
        let vals: Vec<f64> = (0..10_000u64)
            .map(|k| {
                let z = trial_seed(5, k);
                let u = (z >> 11) as f64 / (1u64 << 53) as f64;
                (u - 0.5) * 10f64.powi((z % 4) as i32 - 2)
            })
            .collect();
        let mut single = MomentEstimate::new("x");
        for &v in &vals {
            single.add(v);
        }
        let shards: Vec<MomentEstimate> = vals
            .chunks(1250)
            .map(|chunk| {
                let mut e = MomentEstimate::new("x");
                for &v in chunk {
                    e.add(v);
                }
                e
            })
            .collect();
        let mut pooled = shards[0].clone();
        for s in &shards[1..] {
            pooled = MomentEstimate::merge(&pooled, s).unwrap();
        }
        assert_eq!(pooled.n(), single.n());
        assert!((pooled.mean() - single.mean()).abs() <= 1e-12 * single.mean().abs());
        assert!((pooled.variance() - single.variance()).abs() <= 1e-12 * single.variance());
        assert!(
            (pooled.stderr_var() - single.stderr_var()).abs() <= 1e-10 * single.stderr_var(),
            "{} vs {}",
            pooled.stderr_var(),
            single.stderr_var()
        );

        let ab = MomentEstimate::merge(&shards[0], &shards[1]).unwrap();
        let ba = MomentEstimate::merge(&shards[1], &shards[0]).unwrap();
        assert_eq!(ab, ba);

        let empty = MomentEstimate::new("x");
        let same = MomentEstimate::merge(&shards[0], &empty).unwrap();
        assert_eq!(same, shards[0]);

        let other = MomentEstimate::new("y");
        assert!(MomentEstimate::merge(&shards[0], &other).is_err());
    }

    #[test]
    fn three_sigma_bands_cover_a_gaussian_truth() {
        // 500 experiments, 400 standard normals each; the 3-SE band around
        // the sample mean must contain zero in at least 99% of them.
        use rand_distr::StandardNormal;
        let mut hits = 0;
        for rep in 0..500u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(99, rep));
            let mut est = MomentEstimate::new("g");
            for _ in 0..400 {
                est.add(rng.sample::<f64, _>(StandardNormal));
            }
            if est.mean().abs() <= 3.0 * est.stderr_mean() {
                hits += 1;
            }
        }
        assert!(hits >= 495, "coverage {hits}/500");
    }

    #[test]
    fn experiment_reports_are_reproducible_bytes() {
        let cfg = sde_config(300, &["mean_ups_i", "var_ups_i"]);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(reports_to_json_lines(&a.reports), reports_to_json_lines(&b.reports));
        assert_eq!(reports_to_csv(&a.reports), reports_to_csv(&b.reports));
        let mut reseeded = cfg.clone();
        reseeded.master_seed = 32;
        let c = run_experiment(&reseeded).unwrap();
        assert_ne!(a.reports[0].mc_value, c.reports[0].mc_value);
        // A schema spot check on the rendered forms.
        let csv = reports_to_csv(&a.reports);
        assert!(csv.starts_with("name,analytic,mc,stderr,z,pass\n"));
        assert_eq!(csv.lines().count(), 3);
        let json = reports_to_json_lines(&a.reports);
        assert!(json.lines().all(|l| l.contains("\"z\":") && l.contains("\"pass\":")));
    }

    #[test]
    fn sde_experiment_validates_the_closed_forms() {
        let cfg = sde_config(
            4000,
            &[
                "mean_ups_r",
                "mean_ups_i",
                "m2_ups_i",
                "corr_ups",
                "mean_gamma_i",
                "m2_gamma_r",
                "var_ups_i",
                "var_n2",
                "cov_n1_n3",
            ],
        );
        let res = run_experiment(&cfg).unwrap();
        assert!(res.failures.is_empty());
        for r in &res.reports {
            assert!(
                r.pass,
                "{} failed: analytic {:.4e}, mc {:?}, z {:?}",
                r.name, r.analytic_value, r.mc_value, r.z
            );
        }
        assert_eq!(res.estimates["mean_ups_i"].n(), 4000);
    }

    #[test]
    fn ssfm_experiment_runs_end_to_end() {
        let cfg = ExperimentConfig {
            mode: Mode::Ssfm,
            trials: 60,
            ensemble: InputEnsemble::point(0.0, 0.5, 0.0).unwrap(),
            propagation: PropagationConfig {
                dz: 0.01,
                total_z: 1.0,
                eps: 0.05,
                seed: 0,
                noise_on: true,
            },
            checks: vec!["mean_ups_r".into()],
            master_seed: 77,
            grid_width: 44.0,
            grid_n: 128,
        };
        let res = run_experiment(&cfg).unwrap();
        assert!(res.failures.is_empty());
        assert!(res.reports[0].pass, "z {:?}", res.reports[0].z);
        assert_eq!(res.estimates["mean_ups_r"].n(), 60);
    }

    #[test]
    fn config_validation_rejects_bad_requests() {
        let unknown = sde_config(10, &["var_ups_q"]);
        assert!(matches!(
            run_experiment(&unknown),
            Err(Error::StatisticUnknown { name }) if name == "var_ups_q"
        ));

        let mut wrong_mode = sde_config(10, &["var_n2"]);
        wrong_mode.mode = Mode::Ssfm;
        assert!(matches!(run_experiment(&wrong_mode), Err(Error::Config { .. })));

        let mut tilted = sde_config(10, &["cov_n1_n3"]);
        tilted.ensemble = InputEnsemble::point(0.2, 0.8, 0.0).unwrap();
        assert!(matches!(run_experiment(&tilted), Err(Error::Config { .. })));

        let mut none = sde_config(10, &["mean_ups_i"]);
        none.trials = 0;
        assert!(matches!(none.validate(), Err(Error::InvalidParam { field: "trials", .. })));
    }

    #[test]
    fn widespread_trial_failures_abort_the_run() {
        // A collapse-prone regime: most trials push beta through zero.
        let mut cfg = sde_config(50, &["mean_ups_i"]);
        cfg.ensemble = InputEnsemble::point(0.0, 0.05, 0.0).unwrap();
        cfg.propagation.eps = 1.0;
        cfg.propagation.dz = 0.05;
        match run_experiment(&cfg) {
            Err(Error::TrialFailures { failed, total }) => {
                assert!(failed > 0 && total == 50);
            }
            other => panic!("expected trial-failure abort, got {other:?}"),
        }
    }
}
