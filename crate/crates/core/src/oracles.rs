//! Brute-force reference implementations.
//!
//! These are slow and share no formulas with the main solve path; the tests
//! and the acceptance suite compare against them. The only production use is
//! [`active_set_qp_oracle`] as the precoder's fallback when dual ascent stalls
//! on a small instance.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{MovableRegion, PlacementMatrix, SystemGeometry};
use crate::placement::{subproblem_objective, SubproblemTerms};
use crate::precoder::{
    stack_complex, BeamMatrix, QpInstance, QpSolution, SolveMethod, SymbolVector,
};
use crate::{channel::WaveformParams, Error, Result, C64};

/// One main-path versus oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub main_value: f64,
    pub oracle_value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn compare(
        quantity: impl Into<String>,
        main_value: f64,
        oracle_value: f64,
        rel_tol: f64,
    ) -> Self {
        let abs_error = (main_value - oracle_value).abs();
        let rel_error = abs_error / oracle_value.abs().max(f64::MIN_POSITIVE);
        Self {
            quantity: quantity.into(),
            main_value,
            oracle_value,
            abs_error,
            rel_error,
            pass: rel_error <= rel_tol,
        }
    }
}

/// Central finite difference `(f(x+h) - f(x-h)) / 2h`.
pub fn fd_gradient(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central differences at `h` and `h/2` combined to cancel the `h²` error term.
pub fn fd_gradient_richardson(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (4.0 * fd_gradient(&f, x, h / 2.0) - fd_gradient(&f, x, h)) / 3.0
}

/// Exhaustive search of the smoothed subproblem on `{lower, lower+step, ..., upper}`.
///
/// The upper edge is always evaluated, even when the grid does not land on it.
pub fn grid_search_position(
    terms: &SubproblemTerms,
    region: MovableRegion,
    eps: f64,
    step: f64,
) -> (f64, f64) {
    assert!(step > 0.0, "grid step must be positive");
    let count = (region.width() / step).floor() as usize;
    let mut best = (region.lower, subproblem_objective(terms, region.lower, eps));
    let points = (1..=count)
        .map(|i| region.lower + i as f64 * step)
        .chain(std::iter::once(region.upper));
    for x in points {
        let x = x.min(region.upper);
        let v = subproblem_objective(terms, x, eps);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Largest absolute slope between neighbouring grid points.
pub fn empirical_lipschitz(
    terms: &SubproblemTerms,
    region: MovableRegion,
    eps: f64,
    step: f64,
) -> f64 {
    let count = (region.width() / step).floor() as usize;
    let mut prev = subproblem_objective(terms, region.lower, eps);
    let mut best: f64 = 0.0;
    for i in 1..=count {
        let v = subproblem_objective(terms, region.lower + i as f64 * step, eps);
        best = best.max((v - prev).abs() / step);
        prev = v;
    }
    best
}

/// Exact minimum-norm solution by enumerating every candidate active set.
///
/// For each subset `S` of rows with linearly independent normals it solves
/// `A_S A_Sᵀ ν = b_S`, `z = A_Sᵀ ν`, and keeps the smallest-norm point that is
/// primal feasible with `ν ≥ 0`.
pub fn active_set_qp_oracle(qp: &QpInstance) -> Result<QpSolution> {
    let m = qp.num_constraints();
    let dim = qp.a.ncols();
    if m > 12 {
        return Err(Error::InvalidArgument(format!(
            "{m} constraints exceed the enumeration bound of 12"
        )));
    }
    let b_scale = qp.b.amax().max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, DVector<f64>, Vec<f64>)> = None;

    for mask in 1u32..(1u32 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if rows.len() > dim {
            continue;
        }
        let a_s = DMatrix::from_fn(rows.len(), dim, |r, c| qp.a[(rows[r], c)]);
        let b_s = DVector::from_fn(rows.len(), |r, _| qp.b[rows[r]]);
        // QR of A_Sᵀ = QR gives A_S = RᵀQᵀ, so ν solves RᵀR ν = b and z = Q R ν
        let qr = a_s.transpose().qr();
        let r = qr.r();
        let diag_max = r.diagonal().amax();
        if diag_max == 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-13 * diag_max) {
            continue;
        }
        let Some(y) = r.transpose().solve_lower_triangular(&b_s) else {
            continue;
        };
        let Some(nu) = r.solve_upper_triangular(&y) else {
            continue;
        };
        let nu_scale = nu.amax().max(f64::MIN_POSITIVE);
        if nu.iter().any(|v| *v < -1e-9 * nu_scale) {
            continue;
        }
        let z = qr.q() * y;
        let slack = &qp.a * &z - &qp.b;
        if slack.iter().any(|s| *s < -1e-9 * b_scale) {
            continue;
        }
        let norm = z.norm_squared();
        if best.as_ref().is_none_or(|(n, _, _)| norm < *n) {
            let mut duals = vec![0.0; m];
            for (j, &i) in rows.iter().enumerate() {
                duals[i] = nu[j].max(0.0);
            }
            best = Some((norm, z, duals));
        }
    }

    let (norm, z, duals) =
        best.ok_or_else(|| Error::Infeasible("no active set yields a feasible point".into()))?;
    let x_opt = DVector::from_fn(dim / 2, |i, _| C64::new(z[i], z[i + dim / 2]));
    let mu = DVector::from_column_slice(&duals);
    let stationarity = (&z - qp.a.transpose() * &mu).norm() / z.norm().max(f64::MIN_POSITIVE);
    Ok(QpSolution {
        power: norm / qp.num_users as f64,
        x_opt,
        duals,
        kkt_residual: stationarity,
        feasible: true,
        sweeps: 0,
        method: SolveMethod::Enumeration,
    })
}

/// Sanity wrapper: stacked point of an oracle solution.
pub fn oracle_point(sol: &QpSolution) -> DVector<f64> {
    stack_complex(&sol.x_opt)
}

/// `H_k(X) F(X)` for every user via explicit `1 x NL` and block-diagonal
/// `NL x N` matrices. Returns a `K x N` matrix.
pub fn dense_effective_channels(
    geom: &SystemGeometry,
    placement: &PlacementMatrix,
    params: &WaveformParams,
) -> DMatrix<C64> {
    let n_guides = geom.num_waveguides();
    let pas = geom.pas_per_waveguide();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut f = DMatrix::<C64>::zeros(n_guides * pas, n_guides);
    for n in 0..n_guides {
        for l in 0..pas {
            let phase = -two_pi * placement.get(n, l) / params.guided_wavelength;
            f[(n * pas + l, n)] = C64::from_polar(1.0, phase) / (pas as f64).sqrt();
        }
    }
    let mut out = DMatrix::<C64>::zeros(geom.num_users(), n_guides);
    for (k, u) in geom.users().iter().enumerate() {
        // h is defined with a conjugate transpose, so H_k holds conj of e^{+j..}
        let h_row = DMatrix::<C64>::from_fn(1, n_guides * pas, |_, c| {
            let (n, l) = (c / pas, c % pas);
            let dx = u.x - placement.get(n, l);
            let dy = u.y - geom.waveguide_y()[n];
            let q = (dx * dx + dy * dy + geom.height() * geom.height()).sqrt();
            (C64::from_polar(1.0, two_pi * q / params.wavelength) * (params.eta / q)).conj()
        });
        out.row_mut(k).copy_from(&(h_row * &f));
    }
    out
}

/// `λ_k` as the explicit triple sum over users, waveguides and PAs.
pub fn lambda_triple_sum(
    geom: &SystemGeometry,
    placement: &PlacementMatrix,
    params: &WaveformParams,
    beam: &BeamMatrix,
    symbols: &SymbolVector,
    k: usize,
) -> C64 {
    let pas = geom.pas_per_waveguide();
    let u = geom.users()[k];
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut acc = C64::new(0.0, 0.0);
    for (m, s_m) in symbols.symbols().iter().enumerate() {
        for n in 0..geom.num_waveguides() {
            for l in 0..pas {
                let x = placement.get(n, l);
                let q = ((u.x - x).powi(2)
                    + (u.y - geom.waveguide_y()[n]).powi(2)
                    + geom.height().powi(2))
                .sqrt();
                let phase =
                    -(two_pi / params.wavelength * q + two_pi / params.guided_wavelength * x);
                acc += C64::from_polar(1.0 / q, phase) * beam.entry(m, n) * s_m;
            }
        }
    }
    acc * params.eta / ((pas as f64).sqrt() * symbols.symbols()[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_of_quadratic_and_constant() {
        assert!((fd_gradient(|x| x * x, 3.0, 1e-6) - 6.0).abs() < 1e-8);
        assert_eq!(fd_gradient(|_| 4.2, 1.0, 1e-3), 0.0);
        let cubic = |x: f64| x.powi(3);
        assert!((fd_gradient_richardson(cubic, 2.0, 1e-2) - 12.0).abs() < 1e-10);
    }

    #[test]
    fn report_flags() {
        let r = OracleReport::compare("power", 1.0 + 1e-7, 1.0, 1e-6);
        assert!(r.pass && r.abs_error > 0.0);
        assert!(!OracleReport::compare("power", 1.1, 1.0, 1e-6).pass);
    }

    #[test]
    fn enumeration_bound() {
        let qp = QpInstance {
            a: DMatrix::zeros(14, 2),
            b: DVector::zeros(14),
            rows: vec![],
            num_users: 7,
        };
        assert!(matches!(
            active_set_qp_oracle(&qp),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tiny_qp_by_hand() {
        // min ||z||² s.t. z0 + z1 ≥ 2, z0 - z1 ≥ 0  ->  z = (1, 1)
        let qp = QpInstance {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]),
            b: DVector::from_column_slice(&[2.0, 0.0]),
            rows: vec![],
            num_users: 1,
        };
        let sol = active_set_qp_oracle(&qp).unwrap();
        assert!((sol.x_opt[0] - C64::new(1.0, 1.0)).norm() < 1e-12);
        assert!((sol.power - 2.0).abs() < 1e-12);
        assert!(sol.duals[0] > 0.0);
    }
}
