//! Simulation parameters and their validation.

use thiserror::Error;

#[derive(Debug, Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

/// All tunable parameters of one simulation run. Times are seconds, the
/// clock fields are integral so the step grid and rebalance cadence stay
/// exact.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Seats per vehicle.
    pub pax_capacity: u32,
    /// Parcel cargo units per vehicle.
    pub parcel_capacity: u32,
    /// Latest boarding start relative to request time.
    pub max_wait_s: f64,
    /// Allowed in-vehicle time is `(1 + detour_factor) * direct`.
    pub detour_factor: f64,
    /// Dwell per stop; one dwell covers all boardings and alightings there.
    pub boarding_time_s: f64,
    /// Reward per assigned request, in meters of saved distance.
    pub assignment_reward_m: f64,
    /// Parcel acceptance threshold; the admissible extra distance is
    /// `(1 - threshold) * direct_distance`.
    pub threshold: f64,
    /// Rebalancing cadence.
    pub repo_period_s: u32,
    /// Clock time when undelivered accepted parcels are force-scheduled.
    pub parcel_deadline_s: u32,
    /// Parcel units per truck in the separate-fleet baseline.
    pub truck_capacity: u32,
    /// Combined strategy: keep running opportunistic destination insertion
    /// for parcels already picked up.
    pub scpa_background_dropoff: bool,
    /// Decision-loop step width.
    pub step_s: u32,
    /// First simulated second.
    pub start_s: u32,
    /// End of the request horizon; open requests are still finished after it.
    pub end_s: u32,
    /// Number of pooling vehicles.
    pub fleet_size: u32,
    /// Demand scaling applied to the OD matrices.
    pub penetration: f64,
    /// Fraction of customer trip count converted into parcel requests.
    pub parcel_share: f64,
    /// Seed for demand sampling.
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pax_capacity: 4,
            parcel_capacity: 8,
            max_wait_s: 600.0,
            detour_factor: 0.4,
            boarding_time_s: 60.0,
            assignment_reward_m: 1e9,
            threshold: 0.8,
            repo_period_s: 900,
            parcel_deadline_s: 79_200,
            truck_capacity: 100,
            scpa_background_dropoff: true,
            step_s: 60,
            start_s: 0,
            end_s: 86_400,
            fleet_size: 600,
            penetration: 0.05,
            parcel_share: 0.1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError(msg));
        if self.pax_capacity == 0 {
            return err("pax_capacity must be at least 1".into());
        }
        if self.parcel_capacity == 0 {
            return err("parcel_capacity must be at least 1".into());
        }
        if self.truck_capacity == 0 {
            return err("truck_capacity must be at least 1".into());
        }
        if self.fleet_size == 0 {
            return err("fleet_size must be at least 1".into());
        }
        if !(self.max_wait_s >= 0.0) {
            return err(format!("max_wait_s must be >= 0, got {}", self.max_wait_s));
        }
        if !(self.detour_factor >= 0.0) || !self.detour_factor.is_finite() {
            return err(format!(
                "detour_factor must be finite and >= 0, got {}",
                self.detour_factor
            ));
        }
        if !(self.boarding_time_s >= 0.0) || !self.boarding_time_s.is_finite() {
            return err(format!(
                "boarding_time_s must be finite and >= 0, got {}",
                self.boarding_time_s
            ));
        }
        if !(self.assignment_reward_m > 0.0) {
            return err(format!(
                "assignment_reward_m must be > 0, got {}",
                self.assignment_reward_m
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return err(format!(
                "threshold must be within [0, 1], got {}",
                self.threshold
            ));
        }
        if !(self.penetration > 0.0) || !self.penetration.is_finite() {
            return err(format!(
                "penetration must be finite and > 0, got {}",
                self.penetration
            ));
        }
        if !(0.0..=1.0).contains(&self.parcel_share) {
            return err(format!(
                "parcel_share must be within [0, 1], got {}",
                self.parcel_share
            ));
        }
        if self.step_s == 0 {
            return err("step_s must be at least 1".into());
        }
        if self.start_s >= self.end_s {
            return err(format!(
                "start_s ({}) must be before end_s ({})",
                self.start_s, self.end_s
            ));
        }
        if (self.end_s - self.start_s) % self.step_s != 0 {
            return err(format!(
                "horizon {}..{} is not a whole number of {}s steps",
                self.start_s, self.end_s, self.step_s
            ));
        }
        if self.repo_period_s == 0 || self.repo_period_s % self.step_s != 0 {
            return err(format!(
                "repo_period_s ({}) must be a positive multiple of step_s ({})",
                self.repo_period_s, self.step_s
            ));
        }
        Ok(())
    }
}
