//! Minimum-power symbol-level precoder under constructive-interference
//! constraints.
//!
//! The CI constraints depend on the beamforming matrix `W` only through the
//! precoded vector `x = W s`, so the solver works on the `2N` real unknowns
//! `z = [Re x; Im x]`:
//!
//! ```text
//! minimize   ||z||²
//! subject to tanθ·Re λ_k(z) ∓ Im λ_k(z) ≥ tanθ·√(γ_k σ²)   for every user k
//! ```
//!
//! and then recovers the minimum-Frobenius-norm `W = x sᴴ / K`, whose power is
//! `||x||² / K`. The QP is solved by Hildreth's dual coordinate ascent on
//! unit-normalized rows, with an active-set polish once the support of the
//! duals has settled.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::channel::ChannelSnapshot;
use crate::oracles;
use crate::{Error, Result, C64};

/// `M`-PSK point `e^{j(2m+1)π/M}`.
pub fn psk_point(index: usize, order: usize) -> C64 {
    C64::from_polar(1.0, (2 * index + 1) as f64 * PI / order as f64)
}

/// CI half-angle `π/M` of an `M`-PSK constellation.
pub fn ci_threshold_angle(order: usize) -> f64 {
    PI / order as f64
}

/// One unit-modulus symbol per user.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    symbols: Vec<C64>,
    order: usize,
}

impl SymbolVector {
    pub fn new(symbols: Vec<C64>, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!(
                "modulation order {order} < 2"
            )));
        }
        if let Some(s) = symbols.iter().find(|s| (s.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "symbol {s} is not unit modulus"
            )));
        }
        Ok(Self { symbols, order })
    }

    pub fn from_indices(indices: &[usize], order: usize) -> Result<Self> {
        if let Some(i) = indices.iter().find(|&&i| i >= order) {
            return Err(Error::InvalidArgument(format!(
                "symbol index {i} outside {order}-PSK"
            )));
        }
        Self::new(
            indices.iter().map(|&i| psk_point(i, order)).collect(),
            order,
        )
    }

    /// Symbols drawn uniformly from the constellation.
    pub fn random(num_users: usize, order: usize, rng: &mut impl Rng) -> Self {
        let symbols = (0..num_users)
            .map(|_| psk_point(rng.gen_range(0..order), order))
            .collect();
        Self { symbols, order }
    }

    pub fn symbols(&self) -> &[C64] {
        &self.symbols
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn as_dvector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.symbols)
    }
}

/// Per-user beamforming vectors, `N x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamMatrix(DMatrix<C64>);

impl BeamMatrix {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        Self(matrix)
    }

    pub fn zeros(num_inputs: usize, num_users: usize) -> Self {
        Self(DMatrix::zeros(num_inputs, num_users))
    }

    /// Minimum-norm `W` with `W s = x`, i.e. `x sᴴ / K`.
    pub fn from_precoded(x: &DVector<C64>, symbols: &SymbolVector) -> Self {
        let k = symbols.len() as f64;
        let s = symbols.as_dvector();
        Self(x * s.adjoint() / C64::new(k, 0.0))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn num_inputs(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.0.ncols()
    }

    /// Entry `w_{m,n}`: input `n` of the beam for user `m`.
    pub fn entry(&self, m: usize, n: usize) -> C64 {
        self.0[(n, m)]
    }
}

pub fn recover_beam_matrix(x_opt: &DVector<C64>, symbols: &SymbolVector) -> BeamMatrix {
    BeamMatrix::from_precoded(x_opt, symbols)
}

/// `Σ_k ||w_k||²`.
pub fn transmit_power(beam: &BeamMatrix) -> f64 {
    beam.0.iter().map(C64::norm_sqr).sum()
}

/// Which half of the `|Im λ_k|` split a constraint row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImBranch {
    /// `tanθ·Re λ − Im λ ≥ tanθ·√(γσ²)`
    Upper,
    /// `tanθ·Re λ + Im λ ≥ tanθ·√(γσ²)`
    Lower,
}

/// Real QP `min ||z||²  s.t.  A z ≥ b` with `z = [Re x; Im x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `(user, branch)` for each row of `a`.
    pub rows: Vec<(usize, ImBranch)>,
    pub num_users: usize,
}

impl QpInstance {
    /// Number of complex precoder entries `N`.
    pub fn num_inputs(&self) -> usize {
        self.a.ncols() / 2
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    /// `A z - b` for every row.
    pub fn slacks(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.a * z - &self.b
    }

    /// Objective value `||x||² / K` of a stacked real point.
    pub fn power_of(&self, z: &DVector<f64>) -> f64 {
        z.norm_squared() / self.num_users as f64
    }
}

/// Stacks `[Re x; Im x]`.
pub fn stack_complex(x: &DVector<C64>) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

pub fn unstack_complex(z: &DVector<f64>) -> DVector<C64> {
    let n = z.len() / 2;
    DVector::from_fn(n, |i, _| C64::new(z[i], z[i + n]))
}

/// Encodes the CI constraints of every user as linear rows in `z`.
pub fn build_ci_qp(
    snapshot: &ChannelSnapshot,
    symbols: &SymbolVector,
    gammas: &[f64],
    noise_power: f64,
    theta_th: f64,
) -> Result<QpInstance> {
    let k_users = snapshot.num_users();
    let n = snapshot.num_inputs();
    if symbols.len() != k_users || gammas.len() != k_users {
        return Err(Error::InvalidArgument(format!(
            "{} users but {} symbols and {} SINR targets",
            k_users,
            symbols.len(),
            gammas.len()
        )));
    }
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "SINR target {g} must be positive"
        )));
    }
    if !(noise_power.is_finite() && noise_power > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise power {noise_power} must be positive"
        )));
    }
    let tan = theta_th.tan();
    let mut a = DMatrix::zeros(2 * k_users, 2 * n);
    let mut b = DVector::zeros(2 * k_users);
    let mut rows = Vec::with_capacity(2 * k_users);
    for k in 0..k_users {
        // λ_k = (h_k · x) conj(s_k) = a · x
        let rot = symbols.symbols()[k].conj();
        let threshold = tan * (gammas[k] * noise_power).sqrt();
        for (branch, sign, row) in [
            (ImBranch::Upper, -1.0, 2 * k),
            (ImBranch::Lower, 1.0, 2 * k + 1),
        ] {
            for (j, h) in snapshot.effective_row(k).iter().enumerate() {
                let c = h * rot;
                // Re λ = c.re x.re - c.im x.im ; Im λ = c.im x.re + c.re x.im
                a[(row, j)] = tan * c.re + sign * c.im;
                a[(row, j + n)] = -tan * c.im + sign * c.re;
            }
            b[row] = threshold;
            rows.push((k, branch));
        }
    }
    Ok(QpInstance {
        a,
        b,
        rows,
        num_users: k_users,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DualAscent,
    ActiveSetPolish,
    Enumeration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x_opt: DVector<C64>,
    /// `||x_opt||² / K`, the transmit power of the recovered beam matrix.
    pub power: f64,
    /// Multipliers of the rows of `A` for the objective `½||z||²`.
    pub duals: Vec<f64>,
    pub kkt_residual: f64,
    pub feasible: bool,
    pub sweeps: usize,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolverConfig {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Attempt an active-set polish every this many sweeps.
    pub polish_every: usize,
    /// Fall back to subset enumeration when ascent stalls and `K` is at most this.
    pub enumeration_max_users: usize,
}

impl Default for QpSolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 200_000,
            polish_every: 10,
            enumeration_max_users: 4,
        }
    }
}

/// Unit-row form of the QP. All residuals are measured here so they are
/// invariant to the scale of the channel.
struct Normalized {
    a: DMatrix<f64>,
    b: DVector<f64>,
    norms: Vec<f64>,
}

fn normalize(qp: &QpInstance) -> Result<Normalized> {
    let norms: Vec<f64> = qp.a.row_iter().map(|r| r.norm()).collect();
    let largest = norms.iter().copied().fold(0.0, f64::max);
    if !(largest.is_finite() && largest > 0.0) {
        return Err(Error::IllConditioned("all channel rows vanish".into()));
    }
    if let Some(i) = norms.iter().position(|&r| r <= 1e-12 * largest || r == 0.0) {
        return Err(Error::IllConditioned(format!(
            "constraint row {i} has negligible norm (user {} has no channel)",
            qp.rows[i].0
        )));
    }
    let mut a = qp.a.clone();
    let mut b = qp.b.clone();
    for (i, r) in norms.iter().enumerate() {
        a.row_mut(i).unscale_mut(*r);
        b[i] /= r;
    }
    Ok(Normalized { a, b, norms })
}

/// KKT residual of `(z, μ)` on the normalized problem, relative to `||z||`.
fn kkt_residual(p: &Normalized, z: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    let scale = z.norm().max(p.b.amax()).max(f64::MIN_POSITIVE);
    let stationarity = (z - p.a.transpose() * mu).norm() / scale;
    let slack = &p.a * z - &p.b;
    let primal = slack.iter().map(|s| (-s).max(0.0)).fold(0.0, f64::max) / scale;
    let complementarity = slack
        .iter()
        .zip(mu.iter())
        .map(|(s, m)| (m * s).abs())
        .fold(0.0, f64::max)
        / (scale * scale);
    let dual = mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max) / scale;
    stationarity.max(primal).max(complementarity).max(dual)
}

/// Minimum-norm `z` with `A_S z = b_S` and its multipliers `ν`, through the
/// SVD of `A_S`. `None` when the selected rows are numerically dependent.
fn equality_solve(p: &Normalized, support: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let a_s = p.a.select_rows(support);
    let b_s = p.b.select_rows(support);
    let svd = a_s.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let sigma = &svd.singular_values;
    let top = sigma.amax();
    if top == 0.0 || sigma.iter().any(|s| *s <= 1e-13 * top) {
        return None;
    }
    // A_S = U Σ Vᵀ, z = V Σ⁻¹ Uᵀ b, ν = U Σ⁻² Uᵀ b
    let ub = u.transpose() * &b_s;
    let z = v_t.transpose() * DVector::from_fn(ub.len(), |i, _| ub[i] / sigma[i]);
    let nu = &u * DVector::from_fn(ub.len(), |i, _| ub[i] / (sigma[i] * sigma[i]));
    Some((z, nu))
}

/// Active-set refinement seeded with the support of `μ`: drop the most
/// negative multiplier or add the most violated row until the KKT residual
/// meets `tol` or the iteration budget runs out.
fn polish(
    p: &Normalized,
    mu: &DVector<f64>,
    tol: f64,
) -> Option<(DVector<f64>, DVector<f64>, f64)> {
    let rows = mu.len();
    let dim = p.a.ncols();
    let mut support: Vec<usize> = (0..rows).filter(|&i| mu[i] > 0.0).collect();
    for _ in 0..4 * rows {
        if support.is_empty() || support.len() > dim {
            return None;
        }
        let (z, nu) = equality_solve(p, &support)?;
        let (neg, most_neg) = nu.argmin();
        if most_neg < 0.0 {
            support.remove(neg);
            continue;
        }
        let slack = &p.a * &z - &p.b;
        let (worst, violation) = slack.argmin();
        let mut full = DVector::zeros(rows);
        for (j, &i) in support.iter().enumerate() {
            full[i] = nu[j];
        }
        let res = kkt_residual(p, &z, &full);
        if res <= tol {
            return Some((z, full, res));
        }
        if violation >= 0.0 || support.contains(&worst) {
            return None;
        }
        support.push(worst);
        support.sort_unstable();
    }
    None
}

/// Minimum-power feasible precoder for a CI instance.
pub fn solve_min_power(qp: &QpInstance, cfg: &QpSolverConfig) -> Result<QpSolution> {
    let p = normalize(qp)?;
    let rows = p.a.nrows();
    let a_t = p.a.transpose();
    let mut mu = DVector::<f64>::zeros(rows);
    let mut z = DVector::<f64>::zeros(p.a.ncols());
    let b_scale = p.b.amax();

    let finish = |z: DVector<f64>, mu: DVector<f64>, res: f64, sweeps, method| {
        let duals = mu.iter().zip(&p.norms).map(|(m, r)| m / r).collect();
        Ok(QpSolution {
            power: qp.power_of(&z),
            x_opt: unstack_complex(&z),
            duals,
            kkt_residual: res,
            feasible: true,
            sweeps,
            method,
        })
    };

    let mut sweep = 0;
    while sweep < cfg.max_sweeps {
        sweep += 1;
        for i in 0..rows {
            let row = p.a.row(i);
            let step = p.b[i] - row.dot(&z.transpose());
            let next = (mu[i] + step).max(0.0);
            let delta = next - mu[i];
            if delta != 0.0 {
                z.axpy(delta, &a_t.column(i), 1.0);
                mu[i] = next;
            }
        }
        if !z.iter().all(|v| v.is_finite()) || z.norm() > 1e12 * b_scale {
            return Err(Error::Infeasible(format!(
                "dual ascent diverged after {sweep} sweeps (||z|| = {:.3e})",
                z.norm()
            )));
        }
        if sweep % cfg.polish_every == 0 {
            // re-synchronize z with the multipliers to shed accumulated rounding
            z = &a_t * &mu;
            let res = kkt_residual(&p, &z, &mu);
            if res <= cfg.tol {
                return finish(z, mu, res, sweep, SolveMethod::DualAscent);
            }
            if let Some((zp, mp, rp)) = polish(&p, &mu, cfg.tol) {
                return finish(zp, mp, rp, sweep, SolveMethod::ActiveSetPolish);
            }
        }
    }

    if qp.num_users <= cfg.enumeration_max_users {
        let mut sol = oracles::active_set_qp_oracle(qp)?;
        sol.sweeps = sweep;
        sol.method = SolveMethod::Enumeration;
        return Ok(sol);
    }
    Err(Error::IllConditioned(format!(
        "dual ascent stalled at KKT residual {:.3e} after {sweep} sweeps",
        kkt_residual(&p, &z, &mu)
    )))
}

/// KKT residual of an arbitrary candidate, measured like the solver does.
pub fn certify(qp: &QpInstance, x: &DVector<C64>, duals: &[f64]) -> Result<f64> {
    let p = normalize(qp)?;
    let z = stack_complex(x);
    let mu = DVector::from_iterator(duals.len(), duals.iter().zip(&p.norms).map(|(m, r)| m * r));
    Ok(kkt_residual(&p, &z, &mu))
}
