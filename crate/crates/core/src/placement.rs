//! PA position update for a fixed beamforming matrix.
//!
//! With `W` fixed, the sum of negated CI margins is
//!
//! ```text
//! Σ_k (η/√L)(|G^Im_k(X)| - tanθ·G^Re_k(X)) + const,
//! G^Im_k = Σ_{m,n,l} g^Im_{m,n,l,k},   g^Im = |w_{m,n}|/q · sin(f + β^ang)
//! G^Re_k = Σ_{m,n,l} g^Re_{m,n,l,k},   g^Re = |w_{m,n}|/q · cos(f + β^ang)
//! ```
//!
//! with `f = -β₀q - β₁x`, `q` the PA-to-user distance and
//! `β^ang_{m,n,k} = ∠w_{m,n} + ∠s_m - ∠s_k`. Bounding `|G^Im|` by the sum of
//! per-term magnitudes separates the problem into one scalar subproblem per PA,
//! `Σ_{k,m} |g^Im| - tanθ·g^Re`, whose `|·|` is smoothed with a two-branch
//! log-sum-exp of temperature `ε`. Each subproblem is solved by projected
//! gradient descent over the PA's movable region, left to right along each
//! waveguide so that every region starts `Δx` after its predecessor.

use crate::channel::WaveformParams;
use crate::geometry::{
    initial_regions, updated_region, MovableRegion, PlacementMatrix, SystemGeometry,
};
use crate::precoder::{BeamMatrix, SymbolVector};
use crate::Result;

/// Everything one PA's subproblem needs; `m` indexes beams, `k` users.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemTerms {
    /// `|w_{m,n}|` per beam `m`.
    pub amplitudes: Vec<f64>,
    /// `β^ang_{m,n,k}` stored at `m * K + k`.
    pub phase_offsets: Vec<f64>,
    /// Horizontal user coordinates `(x_k, y_k)`.
    pub users: Vec<(f64, f64)>,
    pub waveguide_y: f64,
    pub height: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub tan_theta: f64,
}

impl SubproblemTerms {
    /// Terms for any PA on waveguide `n`.
    pub fn for_waveguide(
        geom: &SystemGeometry,
        n: usize,
        beam: &BeamMatrix,
        symbols: &SymbolVector,
        params: &WaveformParams,
        tan_theta: f64,
    ) -> Self {
        let k_users = symbols.len();
        let s = symbols.symbols();
        let amplitudes = (0..k_users).map(|m| beam.entry(m, n).norm()).collect();
        let mut phase_offsets = Vec::with_capacity(k_users * k_users);
        for m in 0..k_users {
            let w_arg = beam.entry(m, n).arg();
            for sk in s {
                phase_offsets.push(w_arg + s[m].arg() - sk.arg());
            }
        }
        Self {
            amplitudes,
            phase_offsets,
            users: geom.users().iter().map(|u| (u.x, u.y)).collect(),
            waveguide_y: geom.waveguide_y()[n],
            height: geom.height(),
            beta0: params.beta0,
            beta1: params.beta1,
            tan_theta,
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// PA-to-user distance for user `k` with the PA at `x`.
    fn distance(&self, x: f64, k: usize) -> f64 {
        let (ux, uy) = self.users[k];
        let dy = uy - self.waveguide_y;
        ((ux - x).powi(2) + dy * dy + self.height * self.height).sqrt()
    }
}

/// Log-sum-exp temperature policy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothingParams {
    /// Fixed temperature; when absent `ε` adapts to the branch magnitudes.
    pub epsilon: Option<f64>,
    pub adaptive_kappa: f64,
    pub floor: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            epsilon: None,
            adaptive_kappa: 1e-3,
            floor: 1e-15,
        }
    }
}

impl SmoothingParams {
    /// `ε` for a subproblem started at `x`.
    pub fn epsilon_for(&self, terms: &SubproblemTerms, x: f64) -> f64 {
        if let Some(eps) = self.epsilon {
            return eps.max(self.floor);
        }
        let k_users = terms.num_users();
        let mut largest: f64 = 0.0;
        for k in 0..k_users {
            for m in 0..k_users {
                let (bar, hat) = phi_branches(terms, x, m, k);
                largest = largest.max(bar.abs()).max(hat.abs());
            }
        }
        (self.adaptive_kappa * largest).max(self.floor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgdConfig {
    pub max_iters: usize,
    /// Stop once an accepted step moves the PA by at most this, m.
    pub step_tol: f64,
    pub init_step: f64,
    pub armijo_c1: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Number of evenly spaced extra starts per region; 0 disables restarts.
    pub restarts: usize,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            step_tol: 1e-6,
            init_step: 0.1,
            armijo_c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 40,
            restarts: 0,
        }
    }
}

/// `(g^Im, g^Re)` for beam `m` and user `k` with the PA at `x`.
pub fn g_terms(terms: &SubproblemTerms, x: f64, m: usize, k: usize) -> (f64, f64) {
    let q = terms.distance(x, k);
    let f = -terms.beta0 * q - terms.beta1 * x;
    let k_users = terms.num_users();
    let (sin, cos) = (f + terms.phase_offsets[m * k_users + k]).sin_cos();
    let amp = terms.amplitudes[m] / q;
    (amp * sin, amp * cos)
}

/// The two branches whose maximum is `|g^Im| - tanθ·g^Re`.
pub fn phi_branches(terms: &SubproblemTerms, x: f64, m: usize, k: usize) -> (f64, f64) {
    let (g_im, g_re) = g_terms(terms, x, m, k);
    let base = g_re * terms.tan_theta;
    (g_im - base, -g_im - base)
}

/// `ε log(e^{a/ε} + e^{b/ε})` without overflow.
pub fn log_sum_exp2(a: f64, b: f64, eps: f64) -> f64 {
    let hi = a.max(b);
    let lo = a.min(b);
    hi + eps * (-(hi - lo) / eps).exp().ln_1p()
}

pub fn smooth_term(terms: &SubproblemTerms, x: f64, m: usize, k: usize, eps: f64) -> f64 {
    let (bar, hat) = phi_branches(terms, x, m, k);
    log_sum_exp2(bar, hat, eps)
}

/// Smoothed subproblem objective `Σ_k Σ_m Φ_{m,k}(x)`.
pub fn subproblem_objective(terms: &SubproblemTerms, x: f64, eps: f64) -> f64 {
    let k_users = terms.num_users();
    let mut total = 0.0;
    for k in 0..k_users {
        for m in 0..k_users {
            total += smooth_term(terms, x, m, k, eps);
        }
    }
    total
}

/// Derivatives `(φ̄', φ̂')` of the two branches.
///
/// With `u = x - x_k`, `φ̄' = g^Re(u(t - β₀q)/q² - β₁) - g^Im(u(β₀qt + 1)/q² + β₁t)`
/// and `φ̂' = g^Re(u(β₀q + t)/q² + β₁) - g^Im(u(β₀qt - 1)/q² + β₁t)`.
pub fn phi_derivatives(terms: &SubproblemTerms, x: f64, m: usize, k: usize) -> (f64, f64) {
    let (g_im, g_re) = g_terms(terms, x, m, k);
    let q = terms.distance(x, k);
    let u = x - terms.users[k].0;
    let (b0, b1, t) = (terms.beta0, terms.beta1, terms.tan_theta);
    let q2 = q * q;
    let bar = g_re * (u * (t - b0 * q) / q2 - b1) - g_im * (u * (b0 * q * t + 1.0) / q2 + b1 * t);
    let hat = g_re * (u * (b0 * q + t) / q2 + b1) - g_im * (u * (b0 * q * t - 1.0) / q2 + b1 * t);
    (bar, hat)
}

/// Derivative of [`subproblem_objective`]: softmax-weighted branch derivatives.
pub fn subproblem_gradient(terms: &SubproblemTerms, x: f64, eps: f64) -> f64 {
    let k_users = terms.num_users();
    let mut total = 0.0;
    for k in 0..k_users {
        for m in 0..k_users {
            let (bar, hat) = phi_branches(terms, x, m, k);
            let (d_bar, d_hat) = phi_derivatives(terms, x, m, k);
            // weight of the bar branch, 1 / (1 + e^{(hat - bar)/ε})
            let w_bar = 1.0 / (1.0 + ((hat - bar) / eps).exp());
            total += w_bar * d_bar + (1.0 - w_bar) * d_hat;
        }
    }
    total
}

/// Backtracking step `μ = init_step·shrinkⁱ` meeting the Armijo condition
/// `f(x - μg) ≤ f(x) - c1·μ·g²`; 0 if no trial succeeds.
pub fn armijo_step(f: impl Fn(f64) -> f64, gradient: f64, x: f64, cfg: &PgdConfig) -> f64 {
    let fx = f(x);
    let mut mu = cfg.init_step;
    for _ in 0..=cfg.max_backtracks {
        if f(x - mu * gradient) <= fx - cfg.armijo_c1 * mu * gradient * gradient {
            return mu;
        }
        mu *= cfg.shrink;
    }
    0.0
}

/// Euclidean projection onto a region.
pub fn project(x: f64, region: MovableRegion) -> f64 {
    x.clamp(region.lower, region.upper)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    /// Objective after each iteration, starting with the initial value.
    pub values: Vec<f64>,
}

/// Projected Armijo backtracking: the sufficient-decrease test is applied to
/// the projected trial point `P(x - μg)`, so the step may stop at the region
/// edge without losing monotonicity.
fn projected_step(
    terms: &SubproblemTerms,
    region: MovableRegion,
    eps: f64,
    x: f64,
    fx: f64,
    gradient: f64,
    cfg: &PgdConfig,
) -> Option<(f64, f64)> {
    let mut mu = cfg.init_step;
    for _ in 0..=cfg.max_backtracks {
        let trial = project(x - mu * gradient, region);
        let ft = subproblem_objective(terms, trial, eps);
        if ft <= fx - cfg.armijo_c1 * gradient * (x - trial) {
            return Some((trial, ft));
        }
        mu *= cfg.shrink;
    }
    None
}

fn pgd_single(
    terms: &SubproblemTerms,
    region: MovableRegion,
    eps: f64,
    cfg: &PgdConfig,
    x_init: f64,
) -> PgdOutcome {
    let mut x = project(x_init, region);
    let mut fx = subproblem_objective(terms, x, eps);
    let mut values = vec![fx];
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let g = subproblem_gradient(terms, x, eps);
        let Some((next, f_next)) = projected_step(terms, region, eps, x, fx, g, cfg) else {
            values.push(fx);
            break;
        };
        let moved = (next - x).abs();
        x = next;
        fx = f_next;
        values.push(fx);
        if moved <= cfg.step_tol {
            break;
        }
    }
    PgdOutcome {
        x,
        value: fx,
        iterations,
        values,
    }
}

/// Projected gradient descent on one PA's smoothed subproblem.
///
/// With `cfg.restarts > 0` the descent is repeated from that many evenly
/// spaced points of the region and the best result (including the warm start)
/// is kept.
pub fn pgd_solve(
    terms: &SubproblemTerms,
    region: MovableRegion,
    eps: f64,
    cfg: &PgdConfig,
    x_init: f64,
) -> PgdOutcome {
    let mut best = pgd_single(terms, region, eps, cfg, x_init);
    let r = cfg.restarts;
    for i in 0..r {
        let start = region.lower + (i as f64 + 0.5) * region.width() / r as f64;
        let cand = pgd_single(terms, region, eps, cfg, start);
        if cand.value < best.value {
            best = cand;
        }
    }
    best
}

/// One placement update for a fixed beam matrix.
///
/// Waveguides are independent; along each waveguide the PAs are solved left to
/// right, every region starting `Δx` after the previous optimum. Each descent
/// is warm-started from the current position projected into its region.
pub fn optimize_all_positions(
    geom: &SystemGeometry,
    current: &PlacementMatrix,
    beam: &BeamMatrix,
    symbols: &SymbolVector,
    params: &WaveformParams,
    tan_theta: f64,
    smoothing: &SmoothingParams,
    cfg: &PgdConfig,
) -> Result<PlacementMatrix> {
    let init = initial_regions(geom)?;
    let mut out = current.clone();
    for n in 0..geom.num_waveguides() {
        let terms = SubproblemTerms::for_waveguide(geom, n, beam, symbols, params, tan_theta);
        let mut prev = None;
        for (l, region0) in init.iter().enumerate() {
            let region = updated_region(
                l,
                prev,
                *region0,
                geom.min_spacing(),
                geom.waveguide_length(),
            );
            let start = project(current.get(n, l), region);
            let eps = smoothing.epsilon_for(&terms, start);
            let x = pgd_solve(&terms, region, eps, cfg, start).x;
            out.set(n, l, x);
            prev = Some(x);
        }
    }
    Ok(out)
}

/// Exact (unsmoothed, undecomposed) placement objective
/// `Σ_k (η/√L)(|G^Im_k| - tanθ·G^Re_k) + √(γ_k σ²)·tanθ`, i.e. the sum of
/// negated CI margins.
pub fn placement_objective_exact(
    geom: &SystemGeometry,
    placement: &PlacementMatrix,
    params: &WaveformParams,
    beam: &BeamMatrix,
    symbols: &SymbolVector,
    gammas: &[f64],
    noise_power: f64,
    tan_theta: f64,
) -> f64 {
    let k_users = symbols.len();
    let scale = params.eta / (geom.pas_per_waveguide() as f64).sqrt();
    let terms: Vec<SubproblemTerms> = (0..geom.num_waveguides())
        .map(|n| SubproblemTerms::for_waveguide(geom, n, beam, symbols, params, tan_theta))
        .collect();
    let mut total = 0.0;
    for k in 0..k_users {
        let (mut g_im, mut g_re) = (0.0, 0.0);
        for (n, t) in terms.iter().enumerate() {
            for &x in placement.row(n) {
                for m in 0..k_users {
                    let (a, b) = g_terms(t, x, m, k);
                    g_im += a;
                    g_re += b;
                }
            }
        }
        total +=
            scale * (g_im.abs() - tan_theta * g_re) + (gammas[k] * noise_power).sqrt() * tan_theta;
    }
    total
}

/// Decomposed surrogate `Σ_k (η/√L) Σ_{m,n,l} (|g^Im| - tanθ·g^Re) + const`,
/// an upper bound on [`placement_objective_exact`].
pub fn placement_surrogate(
    geom: &SystemGeometry,
    placement: &PlacementMatrix,
    params: &WaveformParams,
    beam: &BeamMatrix,
    symbols: &SymbolVector,
    gammas: &[f64],
    noise_power: f64,
    tan_theta: f64,
) -> f64 {
    let k_users = symbols.len();
    let scale = params.eta / (geom.pas_per_waveguide() as f64).sqrt();
    let mut total: f64 = gammas
        .iter()
        .map(|g| (g * noise_power).sqrt() * tan_theta)
        .sum();
    for n in 0..geom.num_waveguides() {
        let t = SubproblemTerms::for_waveguide(geom, n, beam, symbols, params, tan_theta);
        for &x in placement.row(n) {
            for k in 0..k_users {
                for m in 0..k_users {
                    let (a, b) = g_terms(&t, x, m, k);
                    total += scale * (a.abs() - tan_theta * b);
                }
            }
        }
    }
    total
}
