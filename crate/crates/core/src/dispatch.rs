//! Fleet state and the shared passenger assignment rule.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::network::{Network, NodeId};
use crate::schedule::{insert_customer, is_feasible, Insertion, PlanningCtx, Schedule};
use crate::CustomerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Where a vehicle is between decision points. Times are absolute seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Position {
    Idle { node: NodeId, since_s: f64 },
    Boarding { node: NodeId, until_s: f64 },
    Driving {
        from: NodeId,
        to: NodeId,
        depart_s: f64,
        arrive_s: f64,
        length_m: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub position: Position,
    pub schedule: Schedule,
    pub reposition_target: Option<NodeId>,
    /// Set by any plan change; the mover drops the cached leg at the next
    /// node or dwell end and re-queries the route.
    pub needs_replan: bool,
    /// Nodes still ahead on the current leg, beyond the edge being driven.
    pub path_queue: VecDeque<NodeId>,
    /// Hour snapshot the current leg was quoted at.
    pub leg_hour: usize,
    pub odometer_m: f64,
}

impl Vehicle {
    pub fn new(id: VehicleId, node: NodeId, at_s: f64) -> Self {
        Vehicle {
            id,
            position: Position::Idle { node, since_s: at_s },
            schedule: Schedule::empty(node, at_s),
            reposition_target: None,
            needs_replan: false,
            path_queue: VecDeque::new(),
            leg_hour: 0,
            odometer_m: 0.0,
        }
    }

    /// Node and earliest time a new plan can start from.
    pub fn plan_start(&self, now: f64) -> (NodeId, f64) {
        match self.position {
            Position::Idle { node, .. } => (node, now),
            Position::Boarding { node, until_s } => (node, until_s),
            Position::Driving { to, arrive_s, .. } => (to, arrive_s),
        }
    }

    /// Node the vehicle is at or headed to; used for zone membership.
    pub fn plan_node(&self) -> NodeId {
        match self.position {
            Position::Idle { node, .. } | Position::Boarding { node, .. } => node,
            Position::Driving { to, .. } => to,
        }
    }

    /// Current schedule re-anchored at the plan start, ready for insertion.
    pub fn planning_schedule(&self, now: f64) -> Schedule {
        let (node, t) = self.plan_start(now);
        let mut s = self.schedule.clone();
        s.start_node = node;
        s.start_time_s = t;
        s
    }

    /// Eligible for repositioning: no stops and no customer aboard. Parcels
    /// aboard or a dwell in progress do not pin a vehicle down.
    pub fn is_rebalance_idle(&self) -> bool {
        self.schedule.stops.is_empty() && self.schedule.onboard_customers.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Fleet {
    pub vehicles: Vec<Vehicle>,
}

impl Fleet {
    /// Vehicles spread over the node list at even strides, all idle at the
    /// horizon start.
    pub fn new(fleet_size: u32, net: &Network, start_s: f64) -> Self {
        let n = net.node_count() as u64;
        let vehicles = (0..fleet_size)
            .map(|i| {
                let node = NodeId((i as u64 * n / fleet_size as u64) as u32);
                Vehicle::new(VehicleId(i), node, start_s)
            })
            .collect();
        Fleet { vehicles }
    }

    pub fn get(&self, id: VehicleId) -> &Vehicle {
        &self.vehicles[id.0 as usize]
    }

    pub fn get_mut(&mut self, id: VehicleId) -> &mut Vehicle {
        &mut self.vehicles[id.0 as usize]
    }
}

#[derive(Debug, Error)]
#[error("commit on vehicle {vehicle} rejected: {violation}")]
pub struct CommitError {
    pub vehicle: VehicleId,
    pub violation: String,
}

/// Best customer insertion across the fleet by objective delta; ties go to
/// the lowest vehicle id.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub vehicle: VehicleId,
    pub insertion: Insertion,
    pub delta_m: f64,
}

pub fn assign_customer(
    fleet: &Fleet,
    customer: CustomerId,
    now: f64,
    ctx: &PlanningCtx,
) -> Option<Assignment> {
    let mut best: Option<Assignment> = None;
    for v in &fleet.vehicles {
        let base = v.planning_schedule(now);
        let old = base.objective_m(ctx);
        if let Some(insertion) = insert_customer(&base, customer, ctx) {
            let delta_m = insertion.objective_m - old;
            if best.as_ref().map_or(true, |b| delta_m < b.delta_m) {
                best = Some(Assignment {
                    vehicle: v.id,
                    insertion,
                    delta_m,
                });
            }
        }
    }
    best
}

/// Install a new schedule on a vehicle. The plan must already be anchored at
/// the vehicle's plan start; an infeasible plan here is an internal error,
/// not an operational rejection.
pub fn commit(
    fleet: &mut Fleet,
    vehicle: VehicleId,
    schedule: Schedule,
    ctx: &PlanningCtx,
    updated: &mut BTreeSet<VehicleId>,
) -> Result<(), CommitError> {
    if let Err(v) = is_feasible(&schedule, ctx) {
        return Err(CommitError {
            vehicle,
            violation: v.to_string(),
        });
    }
    let veh = fleet.get_mut(vehicle);
    veh.schedule = schedule;
    veh.needs_replan = true;
    veh.reposition_target = None;
    updated.insert(vehicle);
    Ok(())
}
