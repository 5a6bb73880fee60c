//! Line-of-sight channel through pinching antennas.
//!
//! Every PA carries the in-waveguide phase `e^{-jβ₁x}/√L` and radiates over a
//! free-space path with gain `η e^{-jβ₀q}/q`, so the total per-PA phase is
//! `-(β₀q + β₁x)`. Summing over the PAs of one waveguide gives the effective
//! channel row `H_k(X)F(X)` seen by user `k`.

use std::f64::consts::PI;

use crate::geometry::{PlacementMatrix, SystemGeometry, Vec3};
use crate::precoder::{BeamMatrix, SymbolVector};
use crate::{C64, SPEED_OF_LIGHT};

/// Carrier-dependent constants of the propagation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformParams {
    pub carrier_freq: f64,
    pub n_eff: f64,
    /// Free-space wavelength, m.
    pub wavelength: f64,
    /// Guided wavelength `λ / n_eff`, m.
    pub guided_wavelength: f64,
    /// Reference path gain at 1 m, `c / (4π f_c)`.
    pub eta: f64,
    /// Free-space wavenumber `2π/λ`, rad/m.
    pub beta0: f64,
    /// Guided wavenumber `2π/λ_g`, rad/m.
    pub beta1: f64,
}

impl WaveformParams {
    pub fn new(carrier_freq: f64, n_eff: f64) -> Self {
        let wavelength = SPEED_OF_LIGHT / carrier_freq;
        let guided_wavelength = wavelength / n_eff;
        Self {
            carrier_freq,
            n_eff,
            wavelength,
            guided_wavelength,
            eta: SPEED_OF_LIGHT / (4.0 * PI * carrier_freq),
            beta0: 2.0 * PI / wavelength,
            beta1: 2.0 * PI / guided_wavelength,
        }
    }
}

/// Effective and per-PA channels for one placement.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSnapshot {
    num_users: usize,
    num_inputs: usize,
    pas_per_input: usize,
    /// `K x N`, row-major.
    effective: Vec<C64>,
    /// `K x N x L`, free-space entries `η e^{-jβ₀q}/q`.
    raw: Vec<C64>,
    distances: Vec<f64>,
}

impl ChannelSnapshot {
    /// Snapshot from explicit effective rows; every input is treated as a
    /// single radiator whose raw entry equals the effective entry.
    pub fn from_effective_rows(rows: &[Vec<C64>]) -> Self {
        let num_users = rows.len();
        let num_inputs = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == num_inputs),
            "ragged channel rows"
        );
        let effective: Vec<C64> = rows.concat();
        let distances = effective
            .iter()
            .map(|h| {
                if h.norm() > 0.0 {
                    1.0 / h.norm()
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Self {
            num_users,
            num_inputs,
            pas_per_input: 1,
            raw: effective.clone(),
            effective,
            distances,
        }
    }

    pub(crate) fn from_parts(
        num_users: usize,
        num_inputs: usize,
        pas_per_input: usize,
        effective: Vec<C64>,
        raw: Vec<C64>,
        distances: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(effective.len(), num_users * num_inputs);
        debug_assert_eq!(raw.len(), num_users * num_inputs * pas_per_input);
        debug_assert_eq!(distances.len(), raw.len());
        Self {
            num_users,
            num_inputs,
            pas_per_input,
            effective,
            raw,
            distances,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Number of RF inputs (waveguides or conventional antennas).
    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn pas_per_input(&self) -> usize {
        self.pas_per_input
    }

    pub fn effective_row(&self, k: usize) -> &[C64] {
        &self.effective[k * self.num_inputs..(k + 1) * self.num_inputs]
    }

    pub fn raw(&self, k: usize, n: usize, l: usize) -> C64 {
        self.raw[(k * self.num_inputs + n) * self.pas_per_input + l]
    }

    pub fn distance(&self, k: usize, n: usize, l: usize) -> f64 {
        self.distances[(k * self.num_inputs + n) * self.pas_per_input + l]
    }

    /// Same snapshot with every channel multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.effective.iter_mut().for_each(|h| *h *= factor);
        out.raw.iter_mut().for_each(|h| *h *= factor);
        out
    }
}

/// In-waveguide phase response of the PAs on one guide.
pub fn waveguide_phase_vector(positions: &[f64], params: &WaveformParams) -> Vec<C64> {
    let scale = 1.0 / (positions.len() as f64).sqrt();
    positions
        .iter()
        .map(|&x| C64::from_polar(scale, -params.beta1 * x))
        .collect()
}

/// Free-space LoS channel from each PA to a ground user.
pub fn freespace_channel(user: &Vec3, pa_positions: &[Vec3], params: &WaveformParams) -> Vec<C64> {
    pa_positions
        .iter()
        .map(|pa| {
            let q = user.distance(pa);
            C64::from_polar(params.eta / q, -params.beta0 * q)
        })
        .collect()
}

/// Builds the effective channels `H_k(X)F(X)` for every user.
pub fn effective_channels(
    geom: &SystemGeometry,
    placement: &PlacementMatrix,
    params: &WaveformParams,
) -> ChannelSnapshot {
    let num_users = geom.num_users();
    let num_inputs = geom.num_waveguides();
    let pas = geom.pas_per_waveguide();
    let mut effective = Vec::with_capacity(num_users * num_inputs);
    let mut raw = Vec::with_capacity(num_users * num_inputs * pas);
    let mut distances = Vec::with_capacity(raw.capacity());

    let guides: Vec<(Vec<Vec3>, Vec<C64>)> = (0..num_inputs)
        .map(|n| {
            let xs = placement.row(n);
            let y = geom.waveguide_y()[n];
            let pos = xs.iter().map(|&x| Vec3::new(x, y, geom.height())).collect();
            (pos, waveguide_phase_vector(xs, params))
        })
        .collect();

    for user in geom.users() {
        for (pos, phase) in &guides {
            let h = freespace_channel(user, pos, params);
            effective.push(h.iter().zip(phase).map(|(a, b)| a * b).sum());
            distances.extend(pos.iter().map(|p| user.distance(p)));
            raw.extend(h);
        }
    }
    ChannelSnapshot::from_parts(num_users, num_inputs, pas, effective, raw, distances)
}

/// Received noiseless point of user `k` rotated back by its own symbol,
/// `λ_k = H_k F W s / s_k`.
pub fn received_lambda(
    snapshot: &ChannelSnapshot,
    beam: &BeamMatrix,
    symbols: &SymbolVector,
    k: usize,
) -> C64 {
    let x = beam.matrix() * symbols.as_dvector();
    let row = snapshot.effective_row(k);
    let y: C64 = row.iter().zip(x.iter()).map(|(h, xi)| h * xi).sum();
    y / symbols.symbols()[k]
}

/// Conventional SINR of user `k` treating all other streams as interference.
pub fn sinr(snapshot: &ChannelSnapshot, beam: &BeamMatrix, k: usize, noise_power: f64) -> f64 {
    let row = snapshot.effective_row(k);
    let w = beam.matrix();
    let gain = |i: usize| -> f64 {
        row.iter()
            .zip(w.column(i).iter())
            .map(|(h, wi)| h * wi)
            .sum::<C64>()
            .norm_sqr()
    };
    let interference: f64 = (0..w.ncols()).filter(|&i| i != k).map(gain).sum();
    gain(k) / (interference + noise_power)
}

/// Constructive-interference margin; nonnegative iff `λ` lies inside the CI
/// sector required for SINR target `gamma`.
pub fn ci_margin(lambda: C64, gamma: f64, noise_power: f64, theta_th: f64) -> f64 {
    (lambda.re - (gamma * noise_power).sqrt()) * theta_th.tan() - lambda.im.abs()
}
