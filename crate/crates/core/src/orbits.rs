//! Constellation propagation and satellite/user geometry.
//!
//! Spherical, non-rotating Earth. Satellites fly circular polar orbits at a
//! fixed speed; by default they form a regional cluster of `num_planes`
//! planes separated in right ascension, with satellites spaced along each
//! plane around a common reference point. Ground users are scattered
//! uniformly over a spherical cap centred below the cluster at slot 0.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(a: &Vec3) -> Vec3 {
    scale(a, 1.0 / norm(a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstellationConfig {
    pub num_satellites: usize,
    pub altitude_km: f64,
    pub speed_km_s: f64,
    pub num_planes: usize,
    /// Right-ascension separation between neighbouring planes.
    pub plane_spacing_deg: f64,
    /// Along-track separation between neighbouring satellites of a plane,
    /// used when `phase_offsets` is absent.
    pub in_plane_spacing_deg: f64,
    /// Explicit argument of latitude at slot 0 for every satellite, radians.
    pub phase_offsets: Option<Vec<f64>>,
    pub min_elevation_deg: f64,
    pub earth_radius_km: f64,
    pub slot_duration_s: f64,
    pub num_slots: usize,
}

impl Default for ConstellationConfig {
    fn default() -> Self {
        Self {
            num_satellites: 8,
            altitude_km: 700.0,
            speed_km_s: 7.5,
            num_planes: 2,
            plane_spacing_deg: 10.0,
            in_plane_spacing_deg: 10.0,
            phase_offsets: None,
            min_elevation_deg: 10.0,
            earth_radius_km: 6371.0,
            slot_duration_s: 2.0,
            num_slots: 20,
        }
    }
}

impl ConstellationConfig {
    pub fn orbit_radius_km(&self) -> f64 {
        self.earth_radius_km + self.altitude_km
    }

    /// Orbital period in seconds implied by the configured speed.
    pub fn period_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.orbit_radius_km() / self.speed_km_s
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_satellites == 0 {
            return Err(Error::config("constellation.num_satellites", "must be at least 1"));
        }
        if !(self.altitude_km > 0.0) {
            return Err(Error::config("constellation.altitude_km", "must be positive"));
        }
        if !(self.speed_km_s > 0.0) {
            return Err(Error::config("constellation.speed_km_s", "must be positive"));
        }
        if self.num_planes == 0 {
            return Err(Error::config("constellation.num_planes", "must be at least 1"));
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            return Err(Error::config(
                "constellation.min_elevation_deg",
                "must lie in [0, 90)",
            ));
        }
        if !(self.earth_radius_km > 0.0) {
            return Err(Error::config("constellation.earth_radius_km", "must be positive"));
        }
        if !(self.slot_duration_s > 0.0) {
            return Err(Error::config("constellation.slot_duration_s", "must be positive"));
        }
        if let Some(p) = &self.phase_offsets {
            if p.len() != self.num_satellites {
                return Err(Error::config(
                    "constellation.phase_offsets",
                    format!("expected {} entries, got {}", self.num_satellites, p.len()),
                ));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("constellation.phase_offsets", "entries must be finite"));
            }
        }
        Ok(())
    }

    fn plane_of(&self, sat: usize) -> usize {
        sat % self.num_planes
    }

    /// Right ascension of the plane carrying `sat`, radians.
    pub fn raan(&self, sat: usize) -> f64 {
        let p = self.plane_of(sat) as f64;
        let centre = (self.num_planes as f64 - 1.0) / 2.0;
        ((p - centre) * self.plane_spacing_deg).to_radians()
    }

    /// Argument of latitude of `sat` at slot 0, radians.
    pub fn initial_phase(&self, sat: usize) -> f64 {
        if let Some(p) = &self.phase_offsets {
            return p[sat];
        }
        let plane = self.plane_of(sat);
        let k = sat / self.num_planes;
        let in_plane = (self.num_satellites + self.num_planes - 1 - plane) / self.num_planes;
        let centre = (in_plane as f64 - 1.0) / 2.0;
        ((k as f64 - centre) * self.in_plane_spacing_deg).to_radians()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    /// ECI-like position, km.
    pub position: Vec3,
    /// Velocity, km/s.
    pub velocity: Vec3,
}

/// Satellite positions and velocities at slot `t`.
pub fn propagate(config: &ConstellationConfig, t: usize) -> Result<Vec<SatelliteState>> {
    if t >= config.num_slots {
        return Err(Error::SlotOutOfRange {
            slot: t,
            horizon: config.num_slots,
        });
    }
    let r = config.orbit_radius_km();
    let elapsed = config.slot_duration_s * t as f64;
    let advance = config.speed_km_s * elapsed / r;
    Ok((0..config.num_satellites)
        .map(|m| state_at(config, m, config.initial_phase(m) + advance))
        .collect())
}

fn state_at(config: &ConstellationConfig, sat: usize, u: f64) -> SatelliteState {
    let r = config.orbit_radius_km();
    let v = config.speed_km_s;
    let (so, co) = config.raan(sat).sin_cos();
    let (su, cu) = u.sin_cos();
    SatelliteState {
        position: [r * co * cu, r * so * cu, r * su],
        velocity: [-v * co * su, -v * so * su, v * cu],
    }
}

/// Unit vector of the constellation's mean sub-satellite point at slot 0.
pub fn coverage_centre(config: &ConstellationConfig) -> Vec3 {
    let r = config.orbit_radius_km();
    let mut acc = [0.0; 3];
    for m in 0..config.num_satellites {
        let s = state_at(config, m, config.initial_phase(m));
        acc = [acc[0] + s.position[0], acc[1] + s.position[1], acc[2] + s.position[2]];
    }
    if norm(&acc) < 1e-9 * r {
        // Balanced global layouts have no mean direction; fall back to satellite 0.
        return unit(&state_at(config, 0, config.initial_phase(0)).position);
    }
    unit(&acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundUser {
    pub id: usize,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub compute_gflops: f64,
}

impl GroundUser {
    pub fn position_km(&self, earth_radius_km: f64) -> Vec3 {
        let (sl, cl) = self.latitude_deg.to_radians().sin_cos();
        let (so, co) = self.longitude_deg.to_radians().sin_cos();
        [earth_radius_km * cl * co, earth_radius_km * cl * so, earth_radius_km * sl]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserConfig {
    pub num_users: usize,
    pub cap_radius_deg: f64,
    pub compute_min_gflops: f64,
    pub compute_max_gflops: f64,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            num_users: 5,
            cap_radius_deg: 20.0,
            compute_min_gflops: 700.0,
            compute_max_gflops: 7000.0,
        }
    }
}

impl UserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::config("users.num_users", "must be at least 1"));
        }
        if !(self.cap_radius_deg > 0.0 && self.cap_radius_deg <= 90.0) {
            return Err(Error::config("users.cap_radius_deg", "must lie in (0, 90]"));
        }
        if !(self.compute_min_gflops > 0.0 && self.compute_min_gflops <= self.compute_max_gflops) {
            return Err(Error::config(
                "users.compute_min_gflops",
                "must be positive and not exceed compute_max_gflops",
            ));
        }
        Ok(())
    }
}

/// Scatters users uniformly (by area) over the cap of angular radius
/// `cap_radius_deg` around `centre`, with compute budgets uniform in range.
pub fn sample_users<R: Rng + ?Sized>(config: &UserConfig, centre: Vec3, rng: &mut R) -> Vec<GroundUser> {
    let c = unit(&centre);
    let helper = if c[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let east = unit(&cross(&helper, &c));
    let north = cross(&c, &east);
    let cos_cap = config.cap_radius_deg.to_radians().cos();
    (0..config.num_users)
        .map(|id| {
            let cos_theta = rng.random_range(cos_cap..=1.0);
            let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
            let az = rng.random_range(0.0..std::f64::consts::TAU);
            let p: Vec3 = [0, 1, 2].map(|i| {
                cos_theta * c[i] + sin_theta * (az.cos() * north[i] + az.sin() * east[i])
            });
            let compute_gflops = if config.compute_max_gflops > config.compute_min_gflops {
                rng.random_range(config.compute_min_gflops..=config.compute_max_gflops)
            } else {
                config.compute_min_gflops
            };
            GroundUser {
                id,
                latitude_deg: p[2].clamp(-1.0, 1.0).asin().to_degrees(),
                longitude_deg: p[1].atan2(p[0]).to_degrees(),
                compute_gflops,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySnapshot {
    pub slot: usize,
    pub sat_positions: Vec<Vec3>,
    pub sat_velocities: Vec<Vec3>,
    pub user_positions: Vec<Vec3>,
    /// Slant range satellite m to user n, km (M x N).
    pub distances: Array2<f64>,
    /// Inter-satellite distances, km (M x M).
    pub isl_distances: Array2<f64>,
    /// Elevation of satellite m seen from user n, degrees (M x N).
    pub elevations: Array2<f64>,
    pub visible: Array2<bool>,
}

impl GeometrySnapshot {
    pub fn num_satellites(&self) -> usize {
        self.sat_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }
}

/// Elevation (degrees) of a target seen from a point on the sphere, and the range (km).
pub fn look_angle(observer: &Vec3, target: &Vec3) -> (f64, f64) {
    let los = sub(target, observer);
    let range = norm(&los);
    let up = unit(observer);
    let sin_el = (dot(&los, &up) / range).clamp(-1.0, 1.0);
    (sin_el.asin().to_degrees(), range)
}

pub fn geometry(config: &ConstellationConfig, users: &[GroundUser], t: usize) -> Result<GeometrySnapshot> {
    let sats = propagate(config, t)?;
    let m_count = sats.len();
    let n_count = users.len();
    let user_positions: Vec<Vec3> = users
        .iter()
        .map(|u| u.position_km(config.earth_radius_km))
        .collect();

    let mut distances = Array2::zeros((m_count, n_count));
    let mut elevations = Array2::zeros((m_count, n_count));
    let mut visible = Array2::from_elem((m_count, n_count), false);
    for (m, s) in sats.iter().enumerate() {
        for (n, u) in user_positions.iter().enumerate() {
            let (el, d) = look_angle(u, &s.position);
            distances[[m, n]] = d;
            elevations[[m, n]] = el;
            visible[[m, n]] = el >= config.min_elevation_deg;
        }
    }
    let mut isl_distances = Array2::zeros((m_count, m_count));
    for a in 0..m_count {
        for b in (a + 1)..m_count {
            let d = norm(&sub(&sats[a].position, &sats[b].position));
            isl_distances[[a, b]] = d;
            isl_distances[[b, a]] = d;
        }
    }
    Ok(GeometrySnapshot {
        slot: t,
        sat_positions: sats.iter().map(|s| s.position).collect(),
        sat_velocities: sats.iter().map(|s| s.velocity).collect(),
        user_positions,
        distances,
        isl_distances,
        elevations,
        visible,
    })
}

/// Doppler shift (Hz) on link (m, n) from the line-of-sight closing speed.
/// Positive while the satellite approaches the user.
pub fn doppler(snapshot: &GeometrySnapshot, m: usize, n: usize, carrier_frequency_hz: f64) -> f64 {
    let los = unit(&sub(&snapshot.user_positions[n], &snapshot.sat_positions[m]));
    let closing_km_s = dot(&snapshot.sat_velocities[m], &los);
    closing_km_s * 1e3 / crate::SPEED_OF_LIGHT * carrier_frequency_hz
}
