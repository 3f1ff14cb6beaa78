//! KPI aggregation over the event log and the report file set.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::baseline::TruckPlan;
use crate::config::SimConfig;
use crate::demand::{CustomerId, ParcelId, ParcelRequest};
use crate::dispatch::VehicleId;
use crate::event::{Event, ReqRef};
use crate::network::hour_of;

#[derive(Debug, Error)]
pub enum KpiError {
    #[error("malformed event log: {0}")]
    Malformed(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// Occupancy time series bin width.
pub const OCCUPANCY_BIN_S: u32 = 900;

#[derive(Debug, Clone, PartialEq)]
pub struct KpiReport {
    pub revealed_customers: u64,
    pub served_customers: u64,
    pub rejected_customers: u64,
    pub revealed_parcel_requests: u64,
    pub revealed_parcel_units: u64,
    pub served_parcel_requests: u64,
    pub served_parcel_units: u64,
    pub unserved_parcel_requests: u64,
    pub unserved_parcel_units: u64,
    pub mean_wait_s: f64,
    pub mean_travel_s: f64,
    /// Served-customer waits in one-minute bins; the last bin holds waits at
    /// exactly the limit.
    pub wait_hist: Vec<u64>,
    /// Served-customer ride times in one-minute bins, grown as needed.
    pub travel_hist: Vec<u64>,
    pub customer_pickups_by_hour: [u64; 24],
    pub customer_dropoffs_by_hour: [u64; 24],
    pub parcel_pickups_by_hour: [u64; 24],
    pub parcel_dropoffs_by_hour: [u64; 24],
    /// Vehicle-seconds spent driving per bin, split by on-board parcel units.
    pub occupancy_ts: Vec<Vec<f64>>,
    pub fleet_distance_m: f64,
    pub fleet_km: f64,
    pub logistics_km: f64,
    pub total_km: f64,
    pub utilization: f64,
    pub km_per_served: Option<f64>,
}

#[derive(Default)]
struct CustomerTimes {
    requested: Option<f64>,
    picked: Option<f64>,
    dropped: Option<f64>,
    rejected: bool,
}

pub fn compute(
    events: &[Event],
    cfg: &SimConfig,
    parcels: &[ParcelRequest],
    logistics: Option<&TruckPlan>,
) -> Result<KpiReport, KpiError> {
    let mut events: Vec<Event> = events.to_vec();
    events.sort_by(|a, b| a.time().total_cmp(&b.time()));

    let sizes: BTreeMap<ParcelId, u64> =
        parcels.iter().map(|p| (p.id, p.size as u64)).collect();

    let mut customers: BTreeMap<CustomerId, CustomerTimes> = BTreeMap::new();
    let mut parcel_revealed: BTreeSet<ParcelId> = BTreeSet::new();
    let mut parcel_picked: BTreeSet<ParcelId> = BTreeSet::new();
    let mut parcel_dropped: BTreeSet<ParcelId> = BTreeSet::new();

    let wait_bins = (cfg.max_wait_s / 60.0).ceil() as usize + 1;
    let mut wait_hist = vec![0u64; wait_bins];
    let mut travel_hist: Vec<u64> = Vec::new();
    let mut customer_pickups_by_hour = [0u64; 24];
    let mut customer_dropoffs_by_hour = [0u64; 24];
    let mut parcel_pickups_by_hour = [0u64; 24];
    let mut parcel_dropoffs_by_hour = [0u64; 24];

    let day_s = (cfg.end_s - cfg.start_s) as f64;
    let occupancy_bins = (day_s / OCCUPANCY_BIN_S as f64).ceil() as usize;
    let mut occupancy_ts = vec![vec![0.0; cfg.parcel_capacity as usize + 1]; occupancy_bins];

    let mut distance_by_vehicle: BTreeMap<VehicleId, f64> = BTreeMap::new();
    let mut driving_s = 0.0;
    let mut boarding_s = 0.0;

    let mut wait_sum = 0.0;
    let mut travel_sum = 0.0;

    for e in &events {
        match e {
            Event::Request { req, .. } => match req {
                ReqRef::Customer(c) => {
                    let entry = customers.entry(*c).or_default();
                    if entry.requested.is_some() {
                        return Err(KpiError::Malformed(format!("duplicate request for {c}")));
                    }
                    entry.requested = Some(e.time());
                }
                ReqRef::Parcel(p) => {
                    if !parcel_revealed.insert(*p) {
                        return Err(KpiError::Malformed(format!("duplicate request for {p}")));
                    }
                }
            },
            Event::Assign { .. } => {}
            Event::Reject { req, .. } => match req {
                ReqRef::Customer(c) => {
                    let entry = customers.entry(*c).or_default();
                    if entry.requested.is_none() || entry.rejected || entry.picked.is_some() {
                        return Err(KpiError::Malformed(format!("stray reject for {c}")));
                    }
                    entry.rejected = true;
                }
                ReqRef::Parcel(p) => {
                    return Err(KpiError::Malformed(format!("reject event for {p}")));
                }
            },
            Event::Pickup { t, req, .. } => match req {
                ReqRef::Customer(c) => {
                    let entry = customers.entry(*c).or_default();
                    if entry.requested.is_none() || entry.picked.is_some() || entry.rejected {
                        return Err(KpiError::Malformed(format!("stray pickup for {c}")));
                    }
                    entry.picked = Some(*t);
                    customer_pickups_by_hour[hour_of(*t)] += 1;
                }
                ReqRef::Parcel(p) => {
                    if !parcel_revealed.contains(p) || !parcel_picked.insert(*p) {
                        return Err(KpiError::Malformed(format!("stray pickup for {p}")));
                    }
                    parcel_pickups_by_hour[hour_of(*t)] += 1;
                }
            },
            Event::Dropoff { t, req, .. } => match req {
                ReqRef::Customer(c) => {
                    let entry = customers.entry(*c).or_default();
                    if entry.picked.is_none() || entry.dropped.is_some() {
                        return Err(KpiError::Malformed(format!("stray dropoff for {c}")));
                    }
                    entry.dropped = Some(*t);
                    customer_dropoffs_by_hour[hour_of(*t)] += 1;
                }
                ReqRef::Parcel(p) => {
                    if !parcel_picked.contains(p) || !parcel_dropped.insert(*p) {
                        return Err(KpiError::Malformed(format!("stray dropoff for {p}")));
                    }
                    parcel_dropoffs_by_hour[hour_of(*t)] += 1;
                }
            },
            Event::Edge {
                enter_s,
                exit_s,
                vehicle,
                length_m,
                parcel_units,
                ..
            } => {
                *distance_by_vehicle.entry(*vehicle).or_insert(0.0) += length_m;
                driving_s += exit_s - enter_s;
                let units = *parcel_units as usize;
                if units >= occupancy_ts.first().map_or(0, Vec::len) {
                    return Err(KpiError::Malformed(format!(
                        "edge with {parcel_units} parcel units aboard"
                    )));
                }
                let lo = enter_s.max(cfg.start_s as f64);
                let hi = exit_s.min(cfg.end_s as f64);
                let mut s = lo;
                while s < hi {
                    let bin = ((s - cfg.start_s as f64) / OCCUPANCY_BIN_S as f64) as usize;
                    let bin_end = cfg.start_s as f64 + ((bin + 1) * OCCUPANCY_BIN_S as usize) as f64;
                    let seg_end = bin_end.min(hi);
                    occupancy_ts[bin][units] += seg_end - s;
                    s = seg_end;
                }
            }
            Event::Dwell { start_s, end_s, .. } => {
                boarding_s += end_s - start_s;
            }
        }
    }

    let revealed_customers = customers.len() as u64;
    let mut served_customers = 0u64;
    let mut rejected_customers = 0u64;
    for (c, times) in &customers {
        if times.requested.is_none() {
            return Err(KpiError::Malformed(format!("{c} has no request event")));
        }
        match (times.rejected, times.picked, times.dropped) {
            (true, None, None) => rejected_customers += 1,
            (false, Some(pu), Some(doff)) => {
                served_customers += 1;
                let wait = pu - times.requested.unwrap();
                let travel = doff - pu;
                wait_sum += wait;
                travel_sum += travel;
                let wbin = ((wait / 60.0) as usize).min(wait_bins - 1);
                wait_hist[wbin] += 1;
                let tbin = (travel / 60.0) as usize;
                if tbin >= travel_hist.len() {
                    travel_hist.resize(tbin + 1, 0);
                }
                travel_hist[tbin] += 1;
            }
            _ => {
                return Err(KpiError::Malformed(format!("{c} neither served nor rejected")));
            }
        }
    }

    for p in &parcel_picked {
        if !parcel_dropped.contains(p) {
            return Err(KpiError::Malformed(format!("{p} picked up but not delivered")));
        }
    }
    let units_of = |set: &BTreeSet<ParcelId>| -> u64 {
        set.iter().map(|p| sizes.get(p).copied().unwrap_or(1)).sum()
    };
    let revealed_parcel_requests = parcel_revealed.len() as u64;
    let revealed_parcel_units = units_of(&parcel_revealed);
    let (served_parcel_requests, served_parcel_units) = if let Some(plan) = logistics {
        let routed = plan.parcels_routed() as u64;
        let units: u64 = plan
            .routes
            .iter()
            .flat_map(|r| r.stops.iter())
            .map(|s| s.size as u64)
            .sum();
        (routed, units)
    } else {
        (parcel_dropped.len() as u64, units_of(&parcel_dropped))
    };
    let unserved_parcel_requests = revealed_parcel_requests - served_parcel_requests;
    let unserved_parcel_units = revealed_parcel_units - served_parcel_units;

    let fleet_distance_m: f64 = distance_by_vehicle.values().sum();
    let fleet_km = fleet_distance_m / 1000.0;
    let logistics_km = logistics.map_or(0.0, TruckPlan::total_km);
    let total_km = fleet_km + logistics_km;
    let utilization = (driving_s + boarding_s) / (cfg.fleet_size as f64 * day_s);
    let served_total = served_customers + served_parcel_requests;
    let km_per_served = (served_total > 0).then(|| total_km / served_total as f64);

    Ok(KpiReport {
        revealed_customers,
        served_customers,
        rejected_customers,
        revealed_parcel_requests,
        revealed_parcel_units,
        served_parcel_requests,
        served_parcel_units,
        unserved_parcel_requests,
        unserved_parcel_units,
        mean_wait_s: if served_customers > 0 {
            wait_sum / served_customers as f64
        } else {
            0.0
        },
        mean_travel_s: if served_customers > 0 {
            travel_sum / served_customers as f64
        } else {
            0.0
        },
        wait_hist,
        travel_hist,
        customer_pickups_by_hour,
        customer_dropoffs_by_hour,
        parcel_pickups_by_hour,
        parcel_dropoffs_by_hour,
        occupancy_ts,
        fleet_distance_m,
        fleet_km,
        logistics_km,
        total_km,
        utilization,
        km_per_served,
    })
}

/// Fixed key order of `summary.csv`.
pub const SUMMARY_KEYS: &[&str] = &[
    "revealed_customers",
    "served_customers",
    "rejected_customers",
    "revealed_parcel_requests",
    "revealed_parcel_units",
    "served_parcel_requests",
    "served_parcel_units",
    "unserved_parcel_requests",
    "unserved_parcel_units",
    "mean_wait_s",
    "mean_travel_s",
    "fleet_distance_m",
    "fleet_km",
    "logistics_km",
    "total_km",
    "utilization",
    "km_per_served",
];

impl KpiReport {
    pub fn summary_value(&self, key: &str) -> String {
        match key {
            "revealed_customers" => self.revealed_customers.to_string(),
            "served_customers" => self.served_customers.to_string(),
            "rejected_customers" => self.rejected_customers.to_string(),
            "revealed_parcel_requests" => self.revealed_parcel_requests.to_string(),
            "revealed_parcel_units" => self.revealed_parcel_units.to_string(),
            "served_parcel_requests" => self.served_parcel_requests.to_string(),
            "served_parcel_units" => self.served_parcel_units.to_string(),
            "unserved_parcel_requests" => self.unserved_parcel_requests.to_string(),
            "unserved_parcel_units" => self.unserved_parcel_units.to_string(),
            "mean_wait_s" => self.mean_wait_s.to_string(),
            "mean_travel_s" => self.mean_travel_s.to_string(),
            "fleet_distance_m" => self.fleet_distance_m.to_string(),
            "fleet_km" => self.fleet_km.to_string(),
            "logistics_km" => self.logistics_km.to_string(),
            "total_km" => self.total_km.to_string(),
            "utilization" => self.utilization.to_string(),
            "km_per_served" => self.km_per_served.map(|v| v.to_string()).unwrap_or_default(),
            other => panic!("unknown summary key {other}"),
        }
    }
}

/// Writes summary.csv, wait_hist.csv, travel_hist.csv, pudo_hist.csv, and
/// occupancy_ts.csv into `dir`.
pub fn write_report(report: &KpiReport, cfg: &SimConfig, dir: &Path) -> Result<(), KpiError> {
    let mut s = String::from("key,value\n");
    for key in SUMMARY_KEYS {
        s.push_str(&format!("{key},{}\n", report.summary_value(key)));
    }
    std::fs::write(dir.join("summary.csv"), s)?;

    let mut s = String::from("bin_min,count\n");
    for (i, c) in report.wait_hist.iter().enumerate() {
        s.push_str(&format!("{i},{c}\n"));
    }
    std::fs::write(dir.join("wait_hist.csv"), s)?;

    let mut s = String::from("bin_min,count\n");
    for (i, c) in report.travel_hist.iter().enumerate() {
        s.push_str(&format!("{i},{c}\n"));
    }
    std::fs::write(dir.join("travel_hist.csv"), s)?;

    let mut s =
        String::from("hour,customer_pickups,customer_dropoffs,parcel_pickups,parcel_dropoffs\n");
    for h in 0..24 {
        s.push_str(&format!(
            "{h},{},{},{},{}\n",
            report.customer_pickups_by_hour[h],
            report.customer_dropoffs_by_hour[h],
            report.parcel_pickups_by_hour[h],
            report.parcel_dropoffs_by_hour[h]
        ));
    }
    std::fs::write(dir.join("pudo_hist.csv"), s)?;

    let cols = report.occupancy_ts.first().map_or(0, Vec::len);
    let mut s = String::from("bin_start_s");
    for u in 0..cols {
        s.push_str(&format!(",units_{u}"));
    }
    s.push('\n');
    for (i, row) in report.occupancy_ts.iter().enumerate() {
        s.push_str(&(cfg.start_s as u64 + i as u64 * OCCUPANCY_BIN_S as u64).to_string());
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    std::fs::write(dir.join("occupancy_ts.csv"), s)?;
    Ok(())
}

/// Reads a summary.csv back into key/value pairs.
pub fn read_summary(path: &Path) -> Result<BTreeMap<String, String>, KpiError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("key,value") => {}
        other => {
            return Err(KpiError::Malformed(format!(
                "summary header {other:?}, expected key,value"
            )))
        }
    }
    let mut out = BTreeMap::new();
    for line in lines {
        let Some((k, v)) = line.split_once(',') else {
            return Err(KpiError::Malformed(format!("summary line {line:?}")));
        };
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}
