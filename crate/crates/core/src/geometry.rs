//! Scenario layout: waveguides, pinching antennas, users and the movable-region
//! scheme that keeps neighbouring PAs at least `min_spacing` apart.
//!
//! Waveguides run parallel to the x-axis at height `d`; waveguide `n` starts at
//! `(0, y_n, d)` and PA `l` on it sits at `(x_{n,l}, y_n, d)`. Users lie on the
//! ground plane. All indices in this module are zero-based.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack used when checking placement constraints, in meters.
pub const PLACEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Static layout of one downlink scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemGeometry {
    region_side: f64,
    height: f64,
    waveguide_y: Vec<f64>,
    waveguide_length: f64,
    min_spacing: f64,
    pas_per_waveguide: usize,
    users: Vec<Vec3>,
}

impl SystemGeometry {
    /// Builds a geometry, checking every layout invariant.
    pub fn new(
        region_side: f64,
        height: f64,
        waveguide_y: Vec<f64>,
        waveguide_length: f64,
        min_spacing: f64,
        pas_per_waveguide: usize,
        users: Vec<Vec3>,
    ) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(region_side) || !positive(height) || !positive(waveguide_length) {
            return Err(Error::InvalidArgument(format!(
                "region side {region_side}, height {height} and waveguide length \
                 {waveguide_length} must be positive"
            )));
        }
        if !(min_spacing.is_finite() && min_spacing >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "minimum PA spacing {min_spacing} must be nonnegative"
            )));
        }
        if waveguide_y.is_empty() || pas_per_waveguide == 0 {
            return Err(Error::InvalidArgument(
                "need at least one waveguide and one PA per waveguide".into(),
            ));
        }
        if let Some(y) = waveguide_y
            .iter()
            .find(|y| !(y.is_finite() && **y >= 0.0 && **y <= region_side))
        {
            return Err(Error::InvalidArgument(format!(
                "waveguide y-coordinate {y} outside [0, {region_side}]"
            )));
        }
        for (k, u) in users.iter().enumerate() {
            let inside = u.is_finite()
                && u.z == 0.0
                && (0.0..=region_side).contains(&u.x)
                && (0.0..=region_side).contains(&u.y);
            if !inside {
                return Err(Error::InvalidArgument(format!(
                    "user {k} at ({}, {}, {}) is not on the ground square",
                    u.x, u.y, u.z
                )));
            }
        }
        let needed = (pas_per_waveguide - 1) as f64 * min_spacing;
        if waveguide_length < needed {
            return Err(Error::InfeasibleGeometry(format!(
                "waveguide length {waveguide_length} m cannot host {pas_per_waveguide} PAs \
                 spaced {min_spacing} m apart"
            )));
        }
        Ok(Self {
            region_side,
            height,
            waveguide_y,
            waveguide_length,
            min_spacing,
            pas_per_waveguide,
            users,
        })
    }

    /// Geometry with `num_waveguides` guides spread evenly over `[0, region_side]`
    /// (`y_n = n * side / (N - 1)`, or the middle of the square when `N = 1`).
    pub fn with_uniform_waveguides(
        region_side: f64,
        height: f64,
        num_waveguides: usize,
        waveguide_length: f64,
        min_spacing: f64,
        pas_per_waveguide: usize,
        users: Vec<Vec3>,
    ) -> Result<Self> {
        Self::new(
            region_side,
            height,
            uniform_waveguide_y(region_side, num_waveguides),
            waveguide_length,
            min_spacing,
            pas_per_waveguide,
            users,
        )
    }

    pub fn region_side(&self) -> f64 {
        self.region_side
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn num_waveguides(&self) -> usize {
        self.waveguide_y.len()
    }

    pub fn waveguide_y(&self) -> &[f64] {
        &self.waveguide_y
    }

    pub fn waveguide_length(&self) -> f64 {
        self.waveguide_length
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    pub fn pas_per_waveguide(&self) -> usize {
        self.pas_per_waveguide
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[Vec3] {
        &self.users
    }

    /// Same layout with a different number of PAs per waveguide.
    pub fn with_pas_per_waveguide(&self, pas_per_waveguide: usize) -> Result<Self> {
        Self::new(
            self.region_side,
            self.height,
            self.waveguide_y.clone(),
            self.waveguide_length,
            self.min_spacing,
            pas_per_waveguide,
            self.users.clone(),
        )
    }
}

pub fn uniform_waveguide_y(region_side: f64, num_waveguides: usize) -> Vec<f64> {
    match num_waveguides {
        0 => Vec::new(),
        1 => vec![region_side / 2.0],
        n => (0..n)
            .map(|i| i as f64 * region_side / (n - 1) as f64)
            .collect(),
    }
}

/// PA x-coordinates, one row per waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PlacementMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for n in 0..rows {
            for l in 0..cols {
                data.push(f(n, l));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged placement rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn num_waveguides(&self) -> usize {
        self.rows
    }

    pub fn pas_per_waveguide(&self) -> usize {
        self.cols
    }

    pub fn get(&self, n: usize, l: usize) -> f64 {
        self.data[n * self.cols + l]
    }

    pub fn set(&mut self, n: usize, l: usize, x: f64) {
        self.data[n * self.cols + l] = x;
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs_diff(&self, other: &PlacementMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Closed interval a single PA may occupy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovableRegion {
    pub lower: f64,
    pub upper: f64,
}

impl MovableRegion {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower <= upper) {
            return Err(Error::InvalidArgument(format!(
                "invalid movable region [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// 3-D position of PA `l` on waveguide `n` when placed at `x` along the guide.
pub fn pa_position(geom: &SystemGeometry, n: usize, l: usize, x: f64) -> Result<Vec3> {
    if n >= geom.num_waveguides() {
        return Err(Error::IndexOutOfRange {
            what: "waveguide",
            index: n,
            limit: geom.num_waveguides(),
        });
    }
    if l >= geom.pas_per_waveguide() {
        return Err(Error::IndexOutOfRange {
            what: "pinching antenna",
            index: l,
            limit: geom.pas_per_waveguide(),
        });
    }
    Ok(Vec3::new(x, geom.waveguide_y[n], geom.height))
}

/// Euclidean distance between a ground user and an elevated PA.
pub fn user_pa_distance(user: &Vec3, pa: &Vec3) -> f64 {
    user.distance(pa)
}

/// Width of each initial movable region, `(L^PA - (L-1)Δ) / L`.
pub fn initial_region_width(geom: &SystemGeometry) -> Result<f64> {
    let count = geom.pas_per_waveguide() as f64;
    let width = (geom.waveguide_length() - (count - 1.0) * geom.min_spacing()) / count;
    if width < 0.0 {
        return Err(Error::InfeasibleGeometry(format!(
            "negative initial region width {width}"
        )));
    }
    Ok(width)
}

/// Initial movable regions for the PAs of one waveguide (shared by all guides).
///
/// Consecutive regions are separated by exactly `min_spacing`, and together
/// with the gaps they tile `[0, L^PA]`.
pub fn initial_regions(geom: &SystemGeometry) -> Result<Vec<MovableRegion>> {
    let width = initial_region_width(geom)?;
    let gap = geom.min_spacing();
    let last = geom.pas_per_waveguide() - 1;
    Ok((0..geom.pas_per_waveguide())
        .map(|l| {
            let lower = l as f64 * (width + gap);
            // pin the final edge so rounding cannot push it past the guide end
            let upper = if l == last {
                geom.waveguide_length()
            } else {
                (l + 1) as f64 * width + l as f64 * gap
            };
            MovableRegion { lower, upper }
        })
        .collect())
}

/// Region for PA `l` once its predecessor has been placed at `prev_opt`.
///
/// The first PA keeps a lower edge of 0; later PAs start `min_spacing` after
/// the previous optimum. The upper edge is that of the initial region. A region
/// that collapses (lower above upper) becomes the single point `upper`.
pub fn updated_region(
    l: usize,
    prev_opt: Option<f64>,
    init: MovableRegion,
    min_spacing: f64,
    waveguide_length: f64,
) -> MovableRegion {
    let upper = init.upper.min(waveguide_length);
    let lower = match (l, prev_opt) {
        (0, _) | (_, None) => 0.0,
        (_, Some(prev)) => prev + min_spacing,
    }
    .clamp(0.0, waveguide_length);
    if lower > upper {
        MovableRegion {
            lower: upper,
            upper,
        }
    } else {
        MovableRegion { lower, upper }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlacementViolation {
    /// Placement matrix shape does not match the geometry.
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    NotFinite {
        n: usize,
        l: usize,
    },
    /// Position outside `[0, L^PA]`; `excess` is the distance outside.
    OutOfRange {
        n: usize,
        l: usize,
        value: f64,
        excess: f64,
    },
    /// Gap between PA `l` and `l + 1` below the minimum spacing.
    Spacing {
        n: usize,
        l: usize,
        gap: f64,
        deficit: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlacementReport {
    pub violations: Vec<PlacementViolation>,
}

impl PlacementReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the range and spacing constraints, reporting every violation.
pub fn validate_placement(geom: &SystemGeometry, placement: &PlacementMatrix) -> PlacementReport {
    let mut violations = Vec::new();
    let expected = (geom.num_waveguides(), geom.pas_per_waveguide());
    let found = (placement.num_waveguides(), placement.pas_per_waveguide());
    if expected != found {
        violations.push(PlacementViolation::Shape { expected, found });
        return PlacementReport { violations };
    }
    let length = geom.waveguide_length();
    for n in 0..found.0 {
        let row = placement.row(n);
        for (l, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                violations.push(PlacementViolation::NotFinite { n, l });
                continue;
            }
            let excess = if x < 0.0 { -x } else { x - length };
            if excess > PLACEMENT_TOL {
                violations.push(PlacementViolation::OutOfRange {
                    n,
                    l,
                    value: x,
                    excess,
                });
            }
        }
        for (l, pair) in row.windows(2).enumerate() {
            let gap = pair[1] - pair[0];
            let deficit = geom.min_spacing() - gap;
            if deficit > PLACEMENT_TOL || gap.is_nan() {
                violations.push(PlacementViolation::Spacing { n, l, gap, deficit });
            }
        }
    }
    PlacementReport { violations }
}
