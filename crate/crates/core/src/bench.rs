//! Seeded Monte Carlo experiments and their CSV output.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{
    ao_solve, conventional_array_snapshot, fixed_uniform_placement, random_placement, AoOutcome,
    Problem, SolverSettings,
};
use crate::channel::WaveformParams;
use crate::geometry::{SystemGeometry, Vec3};
use crate::precoder::SymbolVector;
use crate::{db_to_linear, dbm_to_watts, watts_to_dbm, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PowerVsSinr,
    PowerVsNumpas,
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::PowerVsSinr => "power-vs-sinr",
            Self::PowerVsNumpas => "power-vs-numpas",
            Self::Convergence => "convergence",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::PowerVsSinr, Self::PowerVsNumpas, Self::Convergence]
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Proposed,
    Fixed,
    Random,
    Conventional,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Self::Proposed,
        Self::Fixed,
        Self::Random,
        Self::Conventional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Fixed => "fixed",
            Self::Random => "random",
            Self::Conventional => "conventional",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub carrier_freq_hz: f64,
    pub n_eff: f64,
    pub noise_dbm: f64,
    pub region_side: f64,
    pub height: f64,
    pub num_waveguides: usize,
    pub num_users: usize,
    pub psk_order: usize,
    pub waveguide_length: f64,
    /// Minimum PA spacing; half a free-space wavelength when absent.
    pub min_spacing: Option<f64>,
    /// SINR targets in dB. Each experiment has its own default sweep.
    pub gamma_db: Option<Vec<f64>>,
    /// PAs per waveguide. Each experiment has its own default sweep.
    pub num_pas: Option<Vec<usize>>,
    pub trials: usize,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
    pub solver: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 2.8e10,
            n_eff: 1.4,
            noise_dbm: -80.0,
            region_side: 20.0,
            height: 5.0,
            num_waveguides: 4,
            num_users: 4,
            psk_order: 4,
            waveguide_length: 20.0,
            min_spacing: None,
            gamma_db: None,
            num_pas: None,
            trials: 50,
            master_seed: 1,
            schemes: Scheme::ALL.to_vec(),
            solver: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("n_eff", self.n_eff),
            ("region_side", self.region_side),
            ("height", self.height),
            ("waveguide_length", self.waveguide_length),
            ("min_spacing", self.min_spacing.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.noise_dbm.is_finite() {
            return Err(Error::Config("noise_dbm must be finite".into()));
        }
        if self.num_waveguides == 0 || self.num_users == 0 || self.trials == 0 {
            return Err(Error::Config(
                "num_waveguides, num_users and trials must be at least 1".into(),
            ));
        }
        if self.psk_order < 2 {
            return Err(Error::Config("psk_order must be at least 2".into()));
        }
        if let Some(g) = &self.gamma_db {
            if g.is_empty() || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(
                    "gamma_db must be a nonempty list of finite values".into(),
                ));
            }
        }
        if let Some(l) = &self.num_pas {
            if l.is_empty() || l.contains(&0) {
                return Err(Error::Config(
                    "num_pas must be a nonempty list of positive counts".into(),
                ));
            }
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes must not be empty".into()));
        }
        if self.solver.ao.rel_tol <= 0.0 {
            return Err(Error::Config("solver.ao.rel_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn waveform(&self) -> WaveformParams {
        WaveformParams::new(self.carrier_freq_hz, self.n_eff)
    }

    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// `(gamma_db, num_pas)` sweeps with the experiment's defaults filled in.
    pub fn sweeps(&self, experiment: Experiment) -> Result<(Vec<f64>, Vec<usize>)> {
        let (gamma, pas) = match experiment {
            Experiment::PowerVsSinr => (vec![10.0, 12.0, 14.0, 16.0, 18.0, 20.0], vec![5]),
            Experiment::PowerVsNumpas => (vec![20.0], (1..=7).collect()),
            Experiment::Convergence => (vec![16.0], vec![3, 5, 7]),
        };
        let gamma = self.gamma_db.clone().unwrap_or(gamma);
        let pas = self.num_pas.clone().unwrap_or(pas);
        if experiment != Experiment::PowerVsSinr && gamma.len() != 1 {
            return Err(Error::Config(format!(
                "{experiment} takes a single gamma_db value"
            )));
        }
        if experiment == Experiment::PowerVsSinr && pas.len() != 1 {
            return Err(Error::Config(format!(
                "{experiment} takes a single num_pas value"
            )));
        }
        Ok((gamma, pas))
    }
}

/// Seed of one trial, a splitmix64 scramble of the master seed and the index.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    let mut z = master_seed.wrapping_add(
        (trial as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    /// Geometry with one PA per waveguide; rebuild with the swept count.
    pub geometry: SystemGeometry,
    pub symbols: SymbolVector,
}

pub fn generate_scenario(cfg: &ExperimentConfig, trial: usize) -> Result<Scenario> {
    let seed = trial_seed(cfg.master_seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = (0..cfg.num_users)
        .map(|_| {
            Vec3::new(
                rng.gen_range(0.0..=cfg.region_side),
                rng.gen_range(0.0..=cfg.region_side),
                0.0,
            )
        })
        .collect();
    let symbols = SymbolVector::random(cfg.num_users, cfg.psk_order, &mut rng);
    let spacing = cfg.min_spacing.unwrap_or(cfg.waveform().wavelength / 2.0);
    let geometry = SystemGeometry::with_uniform_waveguides(
        cfg.region_side,
        cfg.height,
        cfg.num_waveguides,
        cfg.waveguide_length,
        spacing,
        1,
        users,
    )?;
    Ok(Scenario {
        seed,
        geometry,
        symbols,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub trial: usize,
    pub seed: u64,
    pub scheme: String,
    pub gamma_db: f64,
    pub num_pas: usize,
    /// Infinite when the trial is infeasible.
    pub power_w: f64,
    pub power_dbm: f64,
    /// AO iterations, or the iteration index in convergence traces.
    pub ao_iters: usize,
    pub converged: bool,
}

struct Point<'a> {
    experiment: Experiment,
    scenario: &'a Scenario,
    trial: usize,
    gamma_db: f64,
    num_pas: usize,
}

impl Point<'_> {
    fn record(
        &self,
        scheme: Scheme,
        power_w: f64,
        ao_iters: usize,
        converged: bool,
    ) -> ExperimentRecord {
        ExperimentRecord {
            experiment: self.experiment.name().to_string(),
            trial: self.trial,
            seed: self.scenario.seed,
            scheme: scheme.name().to_string(),
            gamma_db: self.gamma_db,
            num_pas: self.num_pas,
            power_w,
            power_dbm: watts_to_dbm(power_w),
            ao_iters,
            converged,
        }
    }

    fn infeasible(&self, scheme: Scheme) -> ExperimentRecord {
        self.record(scheme, f64::INFINITY, 0, false)
    }
}

fn run_scheme(
    cfg: &ExperimentConfig,
    point: &Point<'_>,
    scheme: Scheme,
) -> Result<ExperimentRecord> {
    let geom = point
        .scenario
        .geometry
        .with_pas_per_waveguide(point.num_pas)?;
    let params = cfg.waveform();
    let gammas = vec![db_to_linear(point.gamma_db); cfg.num_users];
    let problem = Problem {
        geom: &geom,
        params: &params,
        symbols: &point.scenario.symbols,
        gammas: &gammas,
        noise_power: cfg.noise_power(),
    };
    let settings = &cfg.solver;
    let record = match scheme {
        Scheme::Proposed => {
            let out = ao_solve(&problem, &fixed_uniform_placement(&geom), settings)?;
            point.record(scheme, out.solution.power, out.trace.len(), out.converged)
        }
        Scheme::Fixed => {
            let sol = problem.solve_at(&fixed_uniform_placement(&geom), &settings.qp)?;
            point.record(scheme, sol.power, 0, true)
        }
        Scheme::Random => {
            let x = random_placement(&geom, trial_seed(point.scenario.seed, point.num_pas))?;
            let sol = problem.solve_at(&x, &settings.qp)?;
            point.record(scheme, sol.power, 0, true)
        }
        Scheme::Conventional => {
            let snap = conventional_array_snapshot(&geom, &params);
            let sol = problem.solve_snapshot(&snap, &settings.qp)?;
            point.record(scheme, sol.power, 0, true)
        }
    };
    Ok(record)
}

fn sweep(cfg: &ExperimentConfig, experiment: Experiment) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let (gammas, pas) = cfg.sweeps(experiment)?;
    let per_trial: Vec<Result<Vec<ExperimentRecord>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let scenario = generate_scenario(cfg, trial)?;
            let mut out = Vec::new();
            for &gamma_db in &gammas {
                for &num_pas in &pas {
                    let point = Point {
                        experiment,
                        scenario: &scenario,
                        trial,
                        gamma_db,
                        num_pas,
                    };
                    for &scheme in &cfg.schemes {
                        let rec = match run_scheme(cfg, &point, scheme) {
                            Ok(r) => r,
                            Err(Error::Infeasible(_) | Error::IllConditioned(_)) => {
                                point.infeasible(scheme)
                            }
                            Err(e) => return Err(e),
                        };
                        out.push(rec);
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_trial {
        records.extend(r?);
    }
    Ok(records)
}

/// Power versus SINR target at a single PA count.
pub fn run_power_vs_sinr(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    sweep(cfg, Experiment::PowerVsSinr)
}

/// Power versus PA count at a single SINR target.
pub fn run_power_vs_numpas(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    sweep(cfg, Experiment::PowerVsNumpas)
}

/// Full AO power traces, one record per iteration starting at index 0.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let (gammas, pas) = cfg.sweeps(Experiment::Convergence)?;
    let gamma_db = gammas[0];
    let per_trial: Vec<Result<Vec<ExperimentRecord>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let scenario = generate_scenario(cfg, trial)?;
            let mut out = Vec::new();
            for &num_pas in &pas {
                let point = Point {
                    experiment: Experiment::Convergence,
                    scenario: &scenario,
                    trial,
                    gamma_db,
                    num_pas,
                };
                match convergence_trace(cfg, &point) {
                    Ok(o) => {
                        for (i, p) in o.trace.powers().into_iter().enumerate() {
                            out.push(point.record(Scheme::Proposed, p, i, o.converged));
                        }
                    }
                    Err(Error::Infeasible(_) | Error::IllConditioned(_)) => {
                        out.push(point.infeasible(Scheme::Proposed))
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        })
        .collect();
    let mut records = Vec::new();
    for r in per_trial {
        records.extend(r?);
    }
    Ok(records)
}

fn convergence_trace(cfg: &ExperimentConfig, point: &Point<'_>) -> Result<AoOutcome> {
    let geom = point
        .scenario
        .geometry
        .with_pas_per_waveguide(point.num_pas)?;
    let params = cfg.waveform();
    let gammas = vec![db_to_linear(point.gamma_db); cfg.num_users];
    let problem = Problem {
        geom: &geom,
        params: &params,
        symbols: &point.scenario.symbols,
        gammas: &gammas,
        noise_power: cfg.noise_power(),
    };
    ao_solve(&problem, &fixed_uniform_placement(&geom), &cfg.solver)
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    experiment: Experiment,
) -> Result<Vec<ExperimentRecord>> {
    match experiment {
        Experiment::PowerVsSinr => run_power_vs_sinr(cfg),
        Experiment::PowerVsNumpas => run_power_vs_numpas(cfg),
        Experiment::Convergence => run_convergence(cfg),
    }
}

/// Mean power of the feasible trials at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub gamma_db: f64,
    pub num_pas: usize,
    pub mean_power_w: f64,
    pub mean_power_dbm: f64,
    pub feasible: usize,
    pub trials: usize,
}

/// Averages linear power per (scheme, gamma, L) in first-seen order.
/// Convergence records are averaged over their final iteration only.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<(SummaryRow, f64)> = Vec::new();
    let finals = records.iter().enumerate().filter(|(i, r)| {
        r.experiment != Experiment::Convergence.name()
            || records
                .get(i + 1)
                .is_none_or(|n| n.trial != r.trial || n.num_pas != r.num_pas || n.ao_iters == 0)
    });
    for (_, r) in finals {
        let idx = match rows.iter().position(|(s, _)| {
            s.scheme == r.scheme && s.gamma_db == r.gamma_db && s.num_pas == r.num_pas
        }) {
            Some(i) => i,
            None => {
                rows.push((
                    SummaryRow {
                        scheme: r.scheme.clone(),
                        gamma_db: r.gamma_db,
                        num_pas: r.num_pas,
                        mean_power_w: 0.0,
                        mean_power_dbm: 0.0,
                        feasible: 0,
                        trials: 0,
                    },
                    0.0,
                ));
                rows.len() - 1
            }
        };
        let (row, sum) = &mut rows[idx];
        row.trials += 1;
        if r.power_w.is_finite() {
            row.feasible += 1;
            *sum += r.power_w;
        }
    }
    rows.into_iter()
        .map(|(mut row, sum)| {
            row.mean_power_w = if row.feasible > 0 {
                sum / row.feasible as f64
            } else {
                f64::NAN
            };
            row.mean_power_dbm = watts_to_dbm(row.mean_power_w);
            row
        })
        .collect()
}

pub const CSV_HEADER: [&str; 10] = [
    "experiment",
    "trial",
    "seed",
    "scheme",
    "gamma_db",
    "num_pas",
    "power_w",
    "power_dbm",
    "ao_iters",
    "converged",
];

/// Nine significant digits.
pub fn format_sig9(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        v.to_string()
    }
}

pub fn write_csv<W: Write>(
    records: &[ExperimentRecord],
    sink: W,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.scheme.clone(),
            format_sig9(r.gamma_db),
            r.num_pas.to_string(),
            format_sig9(r.power_w),
            format_sig9(r.power_dbm),
            r.ao_iters.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(records, file).map_err(|source| Error::Csv {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let csv_err = |source| Error::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    reader.deserialize().map(|r| r.map_err(csv_err)).collect()
}
