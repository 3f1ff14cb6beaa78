//! Event and audit records produced by a run, plus their CSV writers.
//! The public event file carries request lifecycle lines; edge traversals
//! and boarding dwells stay in memory to feed KPI aggregation and audits.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::path::Path;

use crate::demand::{CustomerId, ParcelId};
use crate::dispatch::VehicleId;
use crate::network::{Network, NodeId, ZoneId};

/// Either kind of request, rendered as `c<n>` or `p<n>` in logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReqRef {
    Customer(CustomerId),
    Parcel(ParcelId),
}

impl fmt::Display for ReqRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReqRef::Customer(c) => write!(f, "{c}"),
            ReqRef::Parcel(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Request enters the system; `t` is its request time.
    Request { t: f64, req: ReqRef, node: NodeId },
    /// Request committed to a vehicle's schedule.
    Assign {
        t: f64,
        req: ReqRef,
        vehicle: VehicleId,
        node: NodeId,
    },
    /// Customer leaves unserved; parcels are never rejected outright.
    Reject { t: f64, req: ReqRef, node: NodeId },
    /// Boarding starts at the stop arrival.
    Pickup {
        t: f64,
        req: ReqRef,
        vehicle: VehicleId,
        node: NodeId,
    },
    /// Alighting at the stop arrival.
    Dropoff {
        t: f64,
        req: ReqRef,
        vehicle: VehicleId,
        node: NodeId,
    },
    /// One traversed edge with the loads aboard; in-memory only.
    Edge {
        enter_s: f64,
        exit_s: f64,
        vehicle: VehicleId,
        from: NodeId,
        to: NodeId,
        length_m: f64,
        pax: u32,
        parcel_units: u32,
    },
    /// One boarding dwell; in-memory only.
    Dwell {
        start_s: f64,
        end_s: f64,
        vehicle: VehicleId,
        node: NodeId,
    },
}

impl Event {
    pub fn time(&self) -> f64 {
        match self {
            Event::Request { t, .. }
            | Event::Assign { t, .. }
            | Event::Reject { t, .. }
            | Event::Pickup { t, .. }
            | Event::Dropoff { t, .. } => *t,
            Event::Edge { enter_s, .. } => *enter_s,
            Event::Dwell { start_s, .. } => *start_s,
        }
    }

    /// CSV line for the public event file; `None` for in-memory kinds.
    pub fn csv_line(&self, net: &Network) -> Option<String> {
        let (t, kind, req, vehicle, node) = match self {
            Event::Request { t, req, node } => (*t, "request", *req, None, *node),
            Event::Assign {
                t,
                req,
                vehicle,
                node,
            } => (*t, "assign", *req, Some(*vehicle), *node),
            Event::Reject { t, req, node } => (*t, "reject", *req, None, *node),
            Event::Pickup {
                t,
                req,
                vehicle,
                node,
            } => (*t, "pickup", *req, Some(*vehicle), *node),
            Event::Dropoff {
                t,
                req,
                vehicle,
                node,
            } => (*t, "dropoff", *req, Some(*vehicle), *node),
            Event::Edge { .. } | Event::Dwell { .. } => return None,
        };
        let vehicle = vehicle.map(|v| v.to_string()).unwrap_or_default();
        Some(format!(
            "{t},{kind},{req},{vehicle},{}",
            net.node_name(node)
        ))
    }
}

pub const EVENTS_HEADER: &str = "t,event_kind,request_id,vehicle_id,node";

pub fn write_events_csv(path: &Path, events: &[Event], net: &Network) -> io::Result<()> {
    let mut s = String::from(EVENTS_HEADER);
    s.push('\n');
    for e in events {
        if let Some(line) = e.csv_line(net) {
            s.push_str(&line);
            s.push('\n');
        }
    }
    std::fs::write(path, s)
}

/// Which decision path produced an audit line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditKind {
    Cdpa,
    SdpaPickup,
    SdpaDropoff,
    ScpaCombined,
    Forced,
}

impl fmt::Display for AuditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AuditKind::Cdpa => "cdpa",
            AuditKind::SdpaPickup => "sdpa_pickup",
            AuditKind::SdpaDropoff => "sdpa_dropoff",
            AuditKind::ScpaCombined => "scpa_combined",
            AuditKind::Forced => "forced",
        };
        f.write_str(s)
    }
}

/// One threshold decision: the committed candidate, or the best evaluated
/// candidate when nothing was committed. Forced deliveries log an infinite
/// budget.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRecord {
    pub t: f64,
    pub kind: AuditKind,
    pub parcel: ParcelId,
    pub vehicle: VehicleId,
    pub d_new_m: f64,
    pub d_old_m: f64,
    pub d_direct_m: f64,
    pub budget_m: f64,
    pub accepted: bool,
}

pub const AUDIT_HEADER: &str =
    "t,strategy,parcel_id,vehicle_id,d_new_m,d_old_m,d_direct_m,budget_m,accepted";

pub fn write_audit_csv(path: &Path, records: &[AuditRecord]) -> io::Result<()> {
    let mut s = String::from(AUDIT_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.t, r.kind, r.parcel, r.vehicle, r.d_new_m, r.d_old_m, r.d_direct_m, r.budget_m,
            r.accepted
        ));
    }
    std::fs::write(path, s)
}

/// One idle-vehicle repositioning assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceRecord {
    pub t: f64,
    pub vehicle: VehicleId,
    pub from_zone: ZoneId,
    pub to_zone: ZoneId,
    pub target_node: NodeId,
}

pub const REBALANCE_HEADER: &str = "t,vehicle_id,from_zone,to_zone,target_node";

pub fn write_rebalance_csv(
    path: &Path,
    records: &[RebalanceRecord],
    net: &Network,
) -> io::Result<()> {
    let mut s = String::from(REBALANCE_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.t,
            r.vehicle,
            net.zone_name(r.from_zone),
            net.zone_name(r.to_zone),
            net.node_name(r.target_node)
        ));
    }
    std::fs::write(path, s)
}

/// Mutable per-step outputs threaded through the decision phases. `updated`
/// collects vehicles whose plans changed; the parcel phase drains it.
#[derive(Debug, Default)]
pub struct StepSink {
    pub events: Vec<Event>,
    pub audit: Vec<AuditRecord>,
    pub rebalance: Vec<RebalanceRecord>,
    pub updated: BTreeSet<VehicleId>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    #[test]
    fn public_lines_render_and_internal_kinds_stay_out() {
        let net = fixture::line4().network().unwrap();
        let n1 = net.node_id("n1").unwrap();
        let req = ReqRef::Customer(CustomerId(3));
        let ev = Event::Pickup {
            t: 60.0,
            req,
            vehicle: VehicleId(2),
            node: n1,
        };
        assert_eq!(ev.csv_line(&net).unwrap(), "60,pickup,c3,2,n1");
        let ev = Event::Request {
            t: 0.5,
            req: ReqRef::Parcel(ParcelId(7)),
            node: n1,
        };
        assert_eq!(ev.csv_line(&net).unwrap(), "0.5,request,p7,,n1");
        let ev = Event::Edge {
            enter_s: 0.0,
            exit_s: 60.0,
            vehicle: VehicleId(0),
            from: n1,
            to: n1,
            length_m: 1000.0,
            pax: 1,
            parcel_units: 2,
        };
        assert!(ev.csv_line(&net).is_none());
        assert_eq!(ev.time(), 0.0);
    }

    #[test]
    fn audit_lines_round_trip_infinite_budgets() {
        let r = AuditRecord {
            t: 79_200.0,
            kind: AuditKind::Forced,
            parcel: ParcelId(4),
            vehicle: VehicleId(1),
            d_new_m: 2500.0,
            d_old_m: 2000.0,
            d_direct_m: 1000.0,
            budget_m: f64::INFINITY,
            accepted: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.csv");
        write_audit_csv(&path, &[r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line, "79200,forced,p4,1,2500,2000,1000,inf,true");
        let budget: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!(budget.is_infinite());
    }
}
