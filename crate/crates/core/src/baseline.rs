//! Separate-fleet logistics baseline. Parcels keep their depot endpoint and
//! are folded into closed truck tours by cheapest insertion; trucks are
//! unlimited, so the only binding constraint is load.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;

use crate::demand::{ParcelId, ParcelRequest};
use crate::network::{Network, NodeId};

#[derive(Debug)]
pub struct BaselineError(pub String);

impl fmt::Display for BaselineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "baseline routing: {}", self.0)
    }
}

impl std::error::Error for BaselineError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruckStop {
    pub node: NodeId,
    pub parcel: ParcelId,
    /// Picked up at the stop and carried back to the depot; deliveries are
    /// loaded at the depot instead.
    pub pickup: bool,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruckRoute {
    pub depot: NodeId,
    pub stops: Vec<TruckStop>,
    pub distance_m: f64,
}

impl TruckRoute {
    /// Load when leaving the depot followed by the load after each stop.
    pub fn load_profile(&self) -> Vec<u32> {
        let mut load: u32 = self.stops.iter().filter(|s| !s.pickup).map(|s| s.size).sum();
        let mut out = vec![load];
        for s in &self.stops {
            if s.pickup {
                load += s.size;
            } else {
                load -= s.size;
            }
            out.push(load);
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruckPlan {
    pub routes: Vec<TruckRoute>,
    pub total_distance_m: f64,
}

impl TruckPlan {
    pub fn total_km(&self) -> f64 {
        self.total_distance_m / 1000.0
    }

    pub fn parcels_routed(&self) -> usize {
        self.routes.iter().map(|r| r.stops.len()).sum()
    }
}

fn classify(p: &ParcelRequest, net: &Network) -> Result<(NodeId, TruckStop), BaselineError> {
    if net.depots().contains(&p.origin) {
        Ok((
            p.origin,
            TruckStop {
                node: p.destination,
                parcel: p.id,
                pickup: false,
                size: p.size,
            },
        ))
    } else if net.depots().contains(&p.destination) {
        Ok((
            p.destination,
            TruckStop {
                node: p.origin,
                parcel: p.id,
                pickup: true,
                size: p.size,
            },
        ))
    } else {
        Err(BaselineError(format!("{} has no depot endpoint", p.id)))
    }
}

fn dist(net: &Network, from: NodeId, to: NodeId) -> f64 {
    net.query(from, to, 0.0).expect("connected").1
}

fn capacity_ok(stops: &[TruckStop], capacity: u32) -> bool {
    let mut load: i64 = stops.iter().filter(|s| !s.pickup).map(|s| s.size as i64).sum();
    if load > capacity as i64 {
        return false;
    }
    for s in stops {
        load += if s.pickup { s.size as i64 } else { -(s.size as i64) };
        if load > capacity as i64 {
            return false;
        }
    }
    true
}

fn route_distance(net: &Network, depot: NodeId, stops: &[TruckStop]) -> f64 {
    let mut total = 0.0;
    let mut at = depot;
    for s in stops {
        total += dist(net, at, s.node);
        at = s.node;
    }
    total + dist(net, at, depot)
}

/// Cheapest-insertion tours per depot, parcels in id order. A parcel opens a
/// new tour only when that is strictly cheaper than every feasible insertion
/// into the tours built so far.
pub fn route_logistics(
    parcels: &[ParcelRequest],
    net: &Network,
    truck_capacity: u32,
) -> Result<TruckPlan, BaselineError> {
    let mut by_depot: BTreeMap<NodeId, Vec<TruckStop>> = BTreeMap::new();
    let mut ordered: Vec<&ParcelRequest> = parcels.iter().collect();
    ordered.sort_by_key(|p| p.id);
    for p in ordered {
        if p.size > truck_capacity {
            return Err(BaselineError(format!(
                "{} size {} exceeds truck capacity {truck_capacity}",
                p.id, p.size
            )));
        }
        let (depot, stop) = classify(p, net)?;
        by_depot.entry(depot).or_default().push(stop);
    }

    let mut plan = TruckPlan::default();
    for (depot, group) in by_depot {
        let mut tours: Vec<Vec<TruckStop>> = Vec::new();
        for stop in group {
            let mut best: Option<(usize, usize, f64)> = None;
            for (ri, tour) in tours.iter().enumerate() {
                for pos in (0..=tour.len()).rev() {
                    let mut tentative = tour.clone();
                    tentative.insert(pos, stop);
                    if !capacity_ok(&tentative, truck_capacity) {
                        continue;
                    }
                    let prev = if pos == 0 { depot } else { tour[pos - 1].node };
                    let next = if pos == tour.len() { depot } else { tour[pos].node };
                    let added =
                        dist(net, prev, stop.node) + dist(net, stop.node, next) - dist(net, prev, next);
                    if best.map_or(true, |(.., b)| added < b) {
                        best = Some((ri, pos, added));
                    }
                }
            }
            let fresh = dist(net, depot, stop.node) + dist(net, stop.node, depot);
            match best {
                Some((_, _, added)) if fresh < added => tours.push(vec![stop]),
                Some((ri, pos, _)) => tours[ri].insert(pos, stop),
                None => tours.push(vec![stop]),
            }
        }
        for stops in tours {
            let distance_m = route_distance(net, depot, &stops);
            plan.total_distance_m += distance_m;
            plan.routes.push(TruckRoute {
                depot,
                stops,
                distance_m,
            });
        }
    }
    Ok(plan)
}

pub const TRUCK_PLAN_HEADER: &str = "depot,route_index,seq,node,parcel_id";

pub fn write_truck_plan(path: &Path, plan: &TruckPlan, net: &Network) -> io::Result<()> {
    let mut s = String::from(TRUCK_PLAN_HEADER);
    s.push('\n');
    for (ri, r) in plan.routes.iter().enumerate() {
        for (seq, stop) in r.stops.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                net.node_name(r.depot),
                ri,
                seq,
                net.node_name(stop.node),
                stop.parcel
            ));
        }
    }
    std::fs::write(path, s)
}
