//! Alternating optimization of the precoder and the PA placement, plus the
//! placements and channels used by the baseline schemes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channels, freespace_channel, ChannelSnapshot, WaveformParams};
use crate::geometry::{initial_regions, PlacementMatrix, SystemGeometry, Vec3};
use crate::placement::{
    optimize_all_positions, placement_objective_exact, PgdConfig, SmoothingParams,
};
use crate::precoder::{
    build_ci_qp, ci_threshold_angle, recover_beam_matrix, solve_min_power, BeamMatrix, QpSolution,
    QpSolverConfig, SymbolVector,
};
use crate::{Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AoConfig {
    pub max_iters: usize,
    /// Stop once the relative power change of an iteration is at most this.
    pub rel_tol: f64,
    /// Reject placements that raise the transmit power.
    pub guard_enabled: bool,
    /// When false only the initial precoder is solved.
    pub optimize_placement: bool,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            max_iters: 30,
            rel_tol: 1e-3,
            guard_enabled: true,
            optimize_placement: true,
        }
    }
}

/// All solver knobs in one place.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    #[serde(skip)]
    pub qp: QpSolverConfig,
    pub smoothing: SmoothingParams,
    pub pgd: PgdConfig,
    pub ao: AoConfig,
}

/// A precoding problem at fixed geometry and symbols.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub geom: &'a SystemGeometry,
    pub params: &'a WaveformParams,
    pub symbols: &'a SymbolVector,
    pub gammas: &'a [f64],
    pub noise_power: f64,
}

impl Problem<'_> {
    pub fn theta_th(&self) -> f64 {
        ci_threshold_angle(self.symbols.order())
    }

    /// Minimum-power precoder at a given placement.
    pub fn solve_at(
        &self,
        placement: &PlacementMatrix,
        qp_cfg: &QpSolverConfig,
    ) -> Result<QpSolution> {
        let snap = effective_channels(self.geom, placement, self.params);
        self.solve_snapshot(&snap, qp_cfg)
    }

    pub fn solve_snapshot(
        &self,
        snap: &ChannelSnapshot,
        qp_cfg: &QpSolverConfig,
    ) -> Result<QpSolution> {
        let qp = build_ci_qp(
            snap,
            self.symbols,
            self.gammas,
            self.noise_power,
            self.theta_th(),
        )?;
        solve_min_power(&qp, qp_cfg)
    }

    fn objective(&self, placement: &PlacementMatrix, beam: &BeamMatrix) -> f64 {
        placement_objective_exact(
            self.geom,
            placement,
            self.params,
            beam,
            self.symbols,
            self.gammas,
            self.noise_power,
            self.theta_th().tan(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoTraceEntry {
    pub iteration: usize,
    /// Power after this iteration's accept/reject decision, W.
    pub power: f64,
    /// Exact placement objective of the kept placement and beams.
    pub objective: f64,
    pub accepted: bool,
    pub rel_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoTrace {
    pub initial_power: f64,
    pub initial_objective: f64,
    pub entries: Vec<AoTraceEntry>,
}

impl AoTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Initial power followed by the power after every iteration.
    pub fn powers(&self) -> Vec<f64> {
        std::iter::once(self.initial_power)
            .chain(self.entries.iter().map(|e| e.power))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoOutcome {
    pub beam: BeamMatrix,
    pub placement: PlacementMatrix,
    pub solution: QpSolution,
    pub trace: AoTrace,
    pub converged: bool,
}

/// Alternates precoder solves and placement updates.
///
/// Each iteration updates the placement for the current beams, re-solves the
/// precoder there, and (with the guard on) keeps the candidate only if the
/// power does not increase. A rejected candidate leaves the state unchanged,
/// which counts as a relative change of zero.
pub fn ao_solve(
    problem: &Problem<'_>,
    x_init: &PlacementMatrix,
    settings: &SolverSettings,
) -> Result<AoOutcome> {
    let cfg = &settings.ao;
    let tan_theta = problem.theta_th().tan();
    let mut placement = x_init.clone();
    let mut solution = problem.solve_at(&placement, &settings.qp)?;
    let mut beam = recover_beam_matrix(&solution.x_opt, problem.symbols);
    let mut trace = AoTrace {
        initial_power: solution.power,
        initial_objective: problem.objective(&placement, &beam),
        entries: Vec::new(),
    };
    if !cfg.optimize_placement {
        return Ok(AoOutcome {
            beam,
            placement,
            solution,
            trace,
            converged: true,
        });
    }

    let mut converged = false;
    for iteration in 1..=cfg.max_iters {
        let candidate = optimize_all_positions(
            problem.geom,
            &placement,
            &beam,
            problem.symbols,
            problem.params,
            tan_theta,
            &settings.smoothing,
            &settings.pgd,
        )?;
        // an infeasible candidate is rejected like a power increase
        let cand_sol = problem.solve_at(&candidate, &settings.qp).ok();
        let previous = solution.power;
        let accepted = match &cand_sol {
            Some(s) => !cfg.guard_enabled || s.power <= previous,
            None => false,
        };
        if let (true, Some(s)) = (accepted, cand_sol) {
            placement = candidate;
            solution = s;
            beam = recover_beam_matrix(&solution.x_opt, problem.symbols);
        }
        let rel_change = (solution.power - previous).abs() / previous;
        trace.entries.push(AoTraceEntry {
            iteration,
            power: solution.power,
            objective: problem.objective(&placement, &beam),
            accepted,
            rel_change,
        });
        if rel_change <= cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(AoOutcome {
        beam,
        placement,
        solution,
        trace,
        converged,
    })
}

/// PAs at the centres of `L` equal slices of the waveguide.
pub fn fixed_uniform_placement(geom: &SystemGeometry) -> PlacementMatrix {
    let pas = geom.pas_per_waveguide();
    let slice = geom.waveguide_length() / pas as f64;
    PlacementMatrix::from_fn(geom.num_waveguides(), pas, |_, l| (l as f64 + 0.5) * slice)
}

/// One uniform draw inside every initial movable region.
pub fn random_placement(geom: &SystemGeometry, seed: u64) -> Result<PlacementMatrix> {
    let regions = initial_regions(geom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(PlacementMatrix::from_fn(
        geom.num_waveguides(),
        geom.pas_per_waveguide(),
        |_, l| {
            let r = regions[l];
            if r.width() > 0.0 {
                rng.gen_range(r.lower..=r.upper)
            } else {
                r.lower
            }
        },
    ))
}

/// Positions of the conventional half-wavelength array: `N` antennas along x
/// from the base station's ground point, lifted to the waveguide height.
pub fn conventional_array_positions(geom: &SystemGeometry, params: &WaveformParams) -> Vec<Vec3> {
    let y = geom.region_side() / 2.0;
    (0..geom.num_waveguides())
        .map(|i| Vec3::new(i as f64 * params.wavelength / 2.0, y, geom.height()))
        .collect()
}

/// Channels of the conventional array, one RF chain per antenna.
pub fn conventional_array_snapshot(
    geom: &SystemGeometry,
    params: &WaveformParams,
) -> ChannelSnapshot {
    let antennas = conventional_array_positions(geom, params);
    let mut effective: Vec<C64> = Vec::new();
    let mut distances = Vec::new();
    for u in geom.users() {
        effective.extend(freespace_channel(u, &antennas, params));
        distances.extend(antennas.iter().map(|a| u.distance(a)));
    }
    ChannelSnapshot::from_parts(
        geom.num_users(),
        antennas.len(),
        1,
        effective.clone(),
        effective,
        distances,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ci_margin, received_lambda};
    use crate::geometry::validate_placement;
    use crate::{db_to_linear, dbm_to_watts};

    fn geom(pas: usize, seed: u64) -> (SystemGeometry, SymbolVector, WaveformParams) {
        let p = WaveformParams::new(28e9, 1.4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let users = (0..4)
            .map(|_| Vec3::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0), 0.0))
            .collect();
        let g = SystemGeometry::with_uniform_waveguides(
            20.0,
            5.0,
            4,
            20.0,
            p.wavelength / 2.0,
            pas,
            users,
        )
        .unwrap();
        (g, SymbolVector::random(4, 4, &mut rng), p)
    }

    #[test]
    fn uniform_placement_examples() {
        let (g, _, _) = geom(1, 0);
        assert_eq!(fixed_uniform_placement(&g).row(0), &[10.0]);
        let (g, _, _) = geom(5, 0);
        let x = fixed_uniform_placement(&g);
        assert_eq!(x.row(2), &[2.0, 6.0, 10.0, 14.0, 18.0]);
        assert!(validate_placement(&g, &x).is_ok());
    }

    #[test]
    fn random_placement_examples() {
        let (g, _, _) = geom(5, 1);
        let a = random_placement(&g, 42).unwrap();
        assert!(validate_placement(&g, &a).is_ok());
        assert_eq!(a, random_placement(&g, 42).unwrap());
        assert_ne!(a, random_placement(&g, 43).unwrap());
        assert_ne!(a.row(0), a.row(1));
    }

    #[test]
    fn conventional_array_layout() {
        let (g, _, p) = geom(3, 2);
        let pos = conventional_array_positions(&g, &p);
        assert_eq!(pos[0], Vec3::new(0.0, 10.0, 5.0));
        assert!((pos[1].x - pos[0].x - 5.353_436_75e-3).abs() < 1e-11);
        let snap = conventional_array_snapshot(&g, &p);
        for k in 0..4 {
            for n in 0..4 {
                let h = snap.effective_row(k)[n];
                assert!((h.norm() - p.eta / g.users()[k].distance(&pos[n])).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn pure_slp_when_placement_disabled() {
        let (g, s, p) = geom(5, 3);
        let gam = vec![db_to_linear(20.0); 4];
        let problem = Problem {
            geom: &g,
            params: &p,
            symbols: &s,
            gammas: &gam,
            noise_power: dbm_to_watts(-80.0),
        };
        let x0 = fixed_uniform_placement(&g);
        let mut settings = SolverSettings::default();
        settings.ao.max_iters = 1;
        settings.ao.optimize_placement = false;
        let out = ao_solve(&problem, &x0, &settings).unwrap();
        let direct = problem.solve_at(&x0, &settings.qp).unwrap();
        assert_eq!(out.solution.power, direct.power);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn guarded_ao_is_monotone_and_feasible() {
        let noise = dbm_to_watts(-80.0);
        for seed in 0..8 {
            let (g, s, p) = geom(3, 100 + seed);
            let gam = vec![db_to_linear(16.0); 4];
            let problem = Problem {
                geom: &g,
                params: &p,
                symbols: &s,
                gammas: &gam,
                noise_power: noise,
            };
            let settings = SolverSettings::default();
            let out = ao_solve(&problem, &fixed_uniform_placement(&g), &settings).unwrap();
            let powers = out.trace.powers();
            assert!(powers.windows(2).all(|w| w[1] <= w[0]));
            assert!(out.trace.len() <= settings.ao.max_iters);
            assert!(validate_placement(&g, &out.placement).is_ok());
            let snap = effective_channels(&g, &out.placement, &p);
            for k in 0..4 {
                let m = ci_margin(
                    received_lambda(&snap, &out.beam, &s, k),
                    gam[k],
                    noise,
                    problem.theta_th(),
                );
                assert!(m >= -1e-8 * (gam[k] * noise).sqrt());
            }
            if out.converged {
                assert!(out.trace.entries.last().unwrap().rel_change <= 1e-3);
            }
        }
    }

    #[test]
    fn ao_is_deterministic() {
        let (g, s, p) = geom(2, 9);
        let gam = vec![db_to_linear(12.0); 4];
        let problem = Problem {
            geom: &g,
            params: &p,
            symbols: &s,
            gammas: &gam,
            noise_power: 1e-11,
        };
        let a = ao_solve(
            &problem,
            &fixed_uniform_placement(&g),
            &SolverSettings::default(),
        )
        .unwrap();
        let b = ao_solve(
            &problem,
            &fixed_uniform_placement(&g),
            &SolverSettings::default(),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
