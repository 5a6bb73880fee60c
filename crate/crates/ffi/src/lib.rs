//! C ABI over `pas_slp`.
//!
//! Every function returns a [`PasStatus`]. On failure a description is kept
//! per thread and can be read with [`pas_last_error`]. Scenarios are opaque
//! handles owned by the caller and released with [`pas_scenario_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pas_slp::ao::{ao_solve, fixed_uniform_placement, Problem, SolverSettings};
use pas_slp::bench::{emit_csv, run_experiment, Experiment, ExperimentConfig};
use pas_slp::channel::WaveformParams;
use pas_slp::geometry::{validate_placement, PlacementMatrix, SystemGeometry, Vec3};
use pas_slp::precoder::{recover_beam_matrix, SymbolVector};
use pas_slp::{db_to_linear, dbm_to_watts, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InfeasibleGeometry = 3,
    Infeasible = 4,
    IllConditioned = 5,
    BufferTooSmall = 6,
    Config = 7,
    Io = 8,
    Panic = 99,
}

impl From<&Error> for PasStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::IndexOutOfRange { .. } | Error::InvalidArgument(_) => Self::InvalidArgument,
            Error::InfeasibleGeometry(_) => Self::InfeasibleGeometry,
            Error::Infeasible(_) => Self::Infeasible,
            Error::IllConditioned(_) => Self::IllConditioned,
            Error::Config(_) => Self::Config,
            Error::Io { .. } | Error::Csv { .. } => Self::Io,
        }
    }
}

/// Opaque scenario: geometry, carrier and the transmitted symbols.
pub struct PasScenario {
    geometry: SystemGeometry,
    params: WaveformParams,
    symbols: SymbolVector,
    settings: SolverSettings,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PasStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PasStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PasStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PasStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside pas_slp".into());
            PasStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(PasStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(
    p: *mut T,
    len: usize,
    needed: usize,
    what: &str,
) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Failure(
            PasStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PasStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn pas_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a scenario with waveguides spread evenly over the square.
///
/// `users_xy` holds `num_users` (x, y) pairs. `symbol_indices` holds one
/// constellation index per user for `psk_order`-PSK. A non-positive
/// `min_spacing` selects half a free-space wavelength.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pas_scenario_new(
    users_xy: *const f64,
    num_users: usize,
    symbol_indices: *const u32,
    psk_order: u32,
    num_waveguides: usize,
    pas_per_waveguide: usize,
    region_side: f64,
    height: f64,
    waveguide_length: f64,
    min_spacing: f64,
    carrier_freq_hz: f64,
    n_eff: f64,
    out: *mut *mut PasScenario,
) -> PasStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(carrier_freq_hz > 0.0 && n_eff > 0.0) {
            return Err(Failure(
                PasStatus::InvalidArgument,
                "carrier frequency and effective index must be positive".into(),
            ));
        }
        let xy = slice(users_xy, 2 * num_users, "users_xy")?;
        let idx = slice(symbol_indices, num_users, "symbol_indices")?;
        let params = WaveformParams::new(carrier_freq_hz, n_eff);
        let spacing = if min_spacing > 0.0 {
            min_spacing
        } else {
            params.wavelength / 2.0
        };
        let users = xy.chunks(2).map(|p| Vec3::new(p[0], p[1], 0.0)).collect();
        let geometry = SystemGeometry::with_uniform_waveguides(
            region_side,
            height,
            num_waveguides,
            waveguide_length,
            spacing,
            pas_per_waveguide,
            users,
        )?;
        let indices: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
        let symbols = SymbolVector::from_indices(&indices, psk_order as usize)?;
        let scenario = PasScenario {
            geometry,
            params,
            symbols,
            settings: SolverSettings::default(),
        };
        *out = Box::into_raw(Box::new(scenario));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must come from [`pas_scenario_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pas_scenario_free(scenario: *mut PasScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Caps the number of alternating iterations used by [`pas_ao_solve`].
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pas_scenario_set_max_iters(
    scenario: *mut PasScenario,
    max_iters: u32,
) -> PasStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        s.settings.ao.max_iters = max_iters as usize;
        Ok(())
    })
}

/// Writes the evenly spaced starting placement (row-major, `N*L` values).
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pas_fixed_placement(
    scenario: *const PasScenario,
    out: *mut f64,
    out_len: usize,
) -> PasStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let x = fixed_uniform_placement(&s.geometry);
        let dst = slice_mut(out, out_len, x.as_slice().len(), "out")?;
        dst[..x.as_slice().len()].copy_from_slice(x.as_slice());
        Ok(())
    })
}

unsafe fn read_placement(
    s: &PasScenario,
    placement: *const f64,
    len: usize,
) -> Result<PlacementMatrix, Failure> {
    let (n, l) = (s.geometry.num_waveguides(), s.geometry.pas_per_waveguide());
    if len != n * l {
        return Err(Failure(
            PasStatus::InvalidArgument,
            format!("placement has {len} values, expected {}", n * l),
        ));
    }
    let data = slice(placement, len, "placement")?;
    let x = PlacementMatrix::from_fn(n, l, |i, j| data[i * l + j]);
    let report = validate_placement(&s.geometry, &x);
    if !report.is_ok() {
        return Err(Failure(
            PasStatus::InfeasibleGeometry,
            format!("invalid placement: {:?}", report.violations),
        ));
    }
    Ok(x)
}

/// Minimum-power precoder at a fixed placement.
///
/// `gamma_db` holds one SINR target per user. On success `power_w` receives
/// the transmit power and, when `beam_out` is not null, the `N x K` beam
/// matrix is written column-major as interleaved (re, im) pairs, `2*N*K`
/// doubles.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pas_solve_at(
    scenario: *const PasScenario,
    placement: *const f64,
    placement_len: usize,
    gamma_db: *const f64,
    noise_dbm: f64,
    power_w: *mut f64,
    beam_out: *mut f64,
    beam_len: usize,
) -> PasStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let power_w = power_w.as_mut().ok_or_else(|| null("power_w"))?;
        let x = read_placement(s, placement, placement_len)?;
        let gammas = gammas(s, gamma_db)?;
        let problem = problem(s, &gammas, noise_dbm);
        let sol = problem.solve_at(&x, &s.settings.qp)?;
        if !beam_out.is_null() {
            let w = recover_beam_matrix(&sol.x_opt, &s.symbols);
            let needed = 2 * w.matrix().len();
            let dst = slice_mut(beam_out, beam_len, needed, "beam_out")?;
            for (i, c) in w.matrix().iter().enumerate() {
                dst[2 * i] = c.re;
                dst[2 * i + 1] = c.im;
            }
        }
        *power_w = sol.power;
        Ok(())
    })
}

/// Joint precoder and placement optimization started from the evenly spaced
/// placement. Writes the final placement (`N*L` values), its power, the
/// number of iterations and whether the relative tolerance was reached.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn pas_ao_solve(
    scenario: *const PasScenario,
    gamma_db: *const f64,
    noise_dbm: f64,
    placement_out: *mut f64,
    placement_len: usize,
    power_w: *mut f64,
    iterations: *mut u32,
    converged: *mut bool,
) -> PasStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let power_w = power_w.as_mut().ok_or_else(|| null("power_w"))?;
        let iterations = iterations.as_mut().ok_or_else(|| null("iterations"))?;
        let converged = converged.as_mut().ok_or_else(|| null("converged"))?;
        let cells = s.geometry.num_waveguides() * s.geometry.pas_per_waveguide();
        let dst = slice_mut(placement_out, placement_len, cells, "placement_out")?;
        let gammas = gammas(s, gamma_db)?;
        let problem = problem(s, &gammas, noise_dbm);
        let out = ao_solve(&problem, &fixed_uniform_placement(&s.geometry), &s.settings)?;
        dst[..cells].copy_from_slice(out.placement.as_slice());
        *power_w = out.solution.power;
        *iterations = out.trace.len() as u32;
        *converged = out.converged;
        Ok(())
    })
}

/// Runs a named experiment from a JSON config and writes its CSV records.
/// `config_json` may be null for the defaults.
///
/// # Safety
/// String arguments must be null-terminated.
#[no_mangle]
pub unsafe extern "C" fn pas_run_experiment(
    config_json: *const c_char,
    experiment: *const c_char,
    csv_path: *const c_char,
) -> PasStatus {
    guard(|| {
        let cfg = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_json_str(c_str(config_json, "config_json")?)?
        };
        let experiment: Experiment = c_str(experiment, "experiment")?.parse()?;
        let path = c_str(csv_path, "csv_path")?;
        let records = run_experiment(&cfg, experiment)?;
        emit_csv(&records, Path::new(path))?;
        Ok(())
    })
}

unsafe fn gammas(s: &PasScenario, gamma_db: *const f64) -> Result<Vec<f64>, Failure> {
    let k = s.geometry.num_users();
    let g = slice(gamma_db, k, "gamma_db")?;
    Ok(g.iter().map(|&db| db_to_linear(db)).collect())
}

fn problem<'a>(s: &'a PasScenario, gammas: &'a [f64], noise_dbm: f64) -> Problem<'a> {
    Problem {
        geom: &s.geometry,
        params: &s.params,
        symbols: &s.symbols,
        gammas,
        noise_power: dbm_to_watts(noise_dbm),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(
            PasStatus::from(&Error::Infeasible("x".into())),
            PasStatus::Infeasible
        );
        assert_eq!(
            PasStatus::from(&Error::Config("x".into())),
            PasStatus::Config
        );
        assert_eq!(
            PasStatus::from(&Error::IndexOutOfRange {
                what: "k",
                index: 3,
                limit: 2
            }),
            PasStatus::InvalidArgument
        );
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), PasStatus::Panic);
        assert!(!pas_last_error().is_null());
        assert_eq!(guard(|| Ok(())), PasStatus::Ok);
        assert!(pas_last_error().is_null());
    }
}
