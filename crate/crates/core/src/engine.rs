//! Day loop tying the pieces together: request reveal, passenger insertion,
//! repositioning, parcel phases over changed plans, forced deliveries, and
//! vehicle movement with an end-of-horizon drain.

use std::collections::BTreeSet;
use std::mem;

use thiserror::Error;

use crate::baseline::{route_logistics, BaselineError, TruckPlan};
use crate::config::{ConfigError, SimConfig};
use crate::demand::{CustomerRequest, OdMatrixSet, ParcelRequest};
use crate::dispatch::{assign_customer, commit, CommitError, Fleet, Position, Vehicle};
use crate::event::{AuditRecord, Event, RebalanceRecord, ReqRef, StepSink};
use crate::kpi::{compute, KpiError, KpiReport};
use crate::network::{hour_of, Network, NetworkError, NodeId};
use crate::rebalance::{forecast, plan_rebalance};
use crate::schedule::{IntegrationMode, PlanningCtx, RequestBook};
use crate::strategies::{
    cdpa_step, force_remaining_deliveries, scpa_customer_step, sdpa_dropoff_step,
    sdpa_pickup_step, StepError, StrategyKind, StrategyState,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("demand: {0}")]
    Demand(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Kpi(#[from] KpiError),
    #[error("internal: {0}")]
    Internal(String),
}

/// Inputs of one run. The matrix set only drives the repositioning forecast;
/// replay runs may pass an all-zero set to disable repositioning.
#[derive(Debug, Clone)]
pub struct Demand {
    pub customers: Vec<CustomerRequest>,
    pub parcels: Vec<ParcelRequest>,
    pub od: OdMatrixSet,
}

#[derive(Debug)]
pub struct SimOutput {
    pub kpi: KpiReport,
    pub events: Vec<Event>,
    pub audit: Vec<AuditRecord>,
    pub rebalance_log: Vec<RebalanceRecord>,
    pub truck_plan: Option<TruckPlan>,
    pub fleet: Fleet,
}

fn validate_demand(
    cfg: &SimConfig,
    net: &Network,
    demand: &Demand,
    mode: IntegrationMode,
) -> Result<(), EngineError> {
    let nodes = net.node_count() as u32;
    let mut seen = BTreeSet::new();
    for c in &demand.customers {
        if !seen.insert(c.id) {
            return Err(EngineError::Demand(format!("duplicate {}", c.id)));
        }
        if c.origin.0 >= nodes || c.destination.0 >= nodes {
            return Err(EngineError::Demand(format!("{} references an unknown node", c.id)));
        }
        if c.origin == c.destination {
            return Err(EngineError::Demand(format!("{} has identical endpoints", c.id)));
        }
    }
    let mut seen = BTreeSet::new();
    for p in &demand.parcels {
        if !seen.insert(p.id) {
            return Err(EngineError::Demand(format!("duplicate {}", p.id)));
        }
        if p.origin.0 >= nodes || p.destination.0 >= nodes {
            return Err(EngineError::Demand(format!("{} references an unknown node", p.id)));
        }
        if p.origin == p.destination {
            return Err(EngineError::Demand(format!("{} has identical endpoints", p.id)));
        }
        if p.size == 0 {
            return Err(EngineError::Demand(format!("{} has zero size", p.id)));
        }
        if mode != IntegrationMode::StatusQuo && p.size > cfg.parcel_capacity {
            return Err(EngineError::Demand(format!(
                "{} size {} exceeds vehicle parcel capacity {}",
                p.id, p.size, cfg.parcel_capacity
            )));
        }
    }
    for h in 0..24 {
        for (&(a, b), _) in demand.od.hour(h) {
            if a.idx() >= net.zone_count() || b.idx() >= net.zone_count() {
                return Err(EngineError::Demand(format!(
                    "matrix hour {h} references an unknown zone"
                )));
            }
        }
    }
    Ok(())
}

fn service_stop(v: &mut Vehicle, t_cur: f64, state: &mut StrategyState, sink: &mut StepSink) {
    let stop = v.schedule.stops.remove(0);
    debug_assert_eq!(stop.planned_arrival_s, t_cur);
    let arrival = stop.planned_arrival_s;
    let departure = stop.planned_departure_s;
    for &c in &stop.alighting_customers {
        v.schedule.onboard_customers.remove(&c);
        sink.events.push(Event::Dropoff {
            t: arrival,
            req: ReqRef::Customer(c),
            vehicle: v.id,
            node: stop.node,
        });
    }
    for &p in &stop.alighting_parcels {
        v.schedule.onboard_parcels.remove(&p);
        state.delivered.insert(p);
        sink.events.push(Event::Dropoff {
            t: arrival,
            req: ReqRef::Parcel(p),
            vehicle: v.id,
            node: stop.node,
        });
    }
    for &c in &stop.boarding_customers {
        v.schedule.onboard_customers.insert(c, departure);
        sink.events.push(Event::Pickup {
            t: arrival,
            req: ReqRef::Customer(c),
            vehicle: v.id,
            node: stop.node,
        });
    }
    for &p in &stop.boarding_parcels {
        v.schedule.onboard_parcels.insert(p);
        sink.events.push(Event::Pickup {
            t: arrival,
            req: ReqRef::Parcel(p),
            vehicle: v.id,
            node: stop.node,
        });
    }
    sink.events.push(Event::Dwell {
        start_s: arrival,
        end_s: departure,
        vehicle: v.id,
        node: stop.node,
    });
    v.schedule.start_node = stop.node;
    v.schedule.start_time_s = departure;
    v.position = Position::Boarding {
        node: stop.node,
        until_s: departure,
    };
}

fn load_leg(
    v: &mut Vehicle,
    from: NodeId,
    to: NodeId,
    t_cur: f64,
    net: &Network,
) -> Result<(), EngineError> {
    let route = net.fastest_path(from, to, t_cur)?;
    v.leg_hour = hour_of(t_cur);
    v.path_queue = route.node_sequence[1..].iter().copied().collect();
    Ok(())
}

fn start_edge(v: &mut Vehicle, from: NodeId, t_cur: f64, net: &Network) -> Result<(), EngineError> {
    let Some(to) = v.path_queue.pop_front() else {
        return Err(EngineError::Internal(format!(
            "vehicle {} has no path to follow",
            v.id
        )));
    };
    let Some((length_m, tt)) = net.edge_between(from, to) else {
        return Err(EngineError::Internal(format!("no edge {from}->{to}")));
    };
    v.position = Position::Driving {
        from,
        to,
        depart_s: t_cur,
        arrive_s: t_cur + tt[v.leg_hour],
        length_m,
    };
    Ok(())
}

/// Picks the vehicle's next action at node `here` and time `t_cur`: serve the
/// stop it is standing on, drive the next edge of its leg, head for a
/// repositioning target, or fall idle.
fn decide(
    v: &mut Vehicle,
    here: NodeId,
    t_cur: f64,
    net: &Network,
    state: &mut StrategyState,
    sink: &mut StepSink,
) -> Result<(), EngineError> {
    if let Some(stop) = v.schedule.stops.first() {
        if stop.node == here {
            service_stop(v, t_cur, state, sink);
            return Ok(());
        }
        let target = stop.node;
        if v.path_queue.is_empty() {
            load_leg(v, here, target, t_cur, net)?;
        }
        return start_edge(v, here, t_cur, net);
    }
    if let Some(target) = v.reposition_target {
        if target != here {
            if v.path_queue.is_empty() {
                load_leg(v, here, target, t_cur, net)?;
            }
            return start_edge(v, here, t_cur, net);
        }
        v.reposition_target = None;
    }
    v.path_queue.clear();
    v.position = Position::Idle {
        node: here,
        since_s: t_cur,
    };
    Ok(())
}

/// Moves one vehicle through the window `[t_start, t_end]`, completing every
/// action that ends inside it (inclusive). Boarding completions feed the
/// changed-plan set of the next step.
fn advance(
    v: &mut Vehicle,
    t_start: f64,
    t_end: f64,
    net: &Network,
    book: &RequestBook,
    state: &mut StrategyState,
    sink: &mut StepSink,
) -> Result<(), EngineError> {
    if let Position::Idle { node, .. } = v.position {
        if v.needs_replan {
            v.path_queue.clear();
            v.needs_replan = false;
        }
        decide(v, node, t_start, net, state, sink)?;
    }
    loop {
        match v.position {
            Position::Driving {
                from,
                to,
                depart_s,
                arrive_s,
                length_m,
            } if arrive_s <= t_end => {
                v.odometer_m += length_m;
                let pax = v.schedule.onboard_customers.len() as u32;
                let parcel_units: u32 = v
                    .schedule
                    .onboard_parcels
                    .iter()
                    .map(|p| book.parcel(*p).expect("parcel registered").size)
                    .sum();
                sink.events.push(Event::Edge {
                    enter_s: depart_s,
                    exit_s: arrive_s,
                    vehicle: v.id,
                    from,
                    to,
                    length_m,
                    pax,
                    parcel_units,
                });
                v.schedule.start_node = to;
                v.schedule.start_time_s = arrive_s;
                if v.needs_replan {
                    v.path_queue.clear();
                    v.needs_replan = false;
                }
                decide(v, to, arrive_s, net, state, sink)?;
            }
            Position::Boarding { node, until_s } if until_s <= t_end => {
                sink.updated.insert(v.id);
                if v.needs_replan {
                    v.path_queue.clear();
                    v.needs_replan = false;
                }
                decide(v, node, until_s, net, state, sink)?;
            }
            _ => break,
        }
    }
    Ok(())
}

/// Runs one full day plus the drain past the horizon, and aggregates KPIs.
pub fn run(
    cfg: &SimConfig,
    net: &Network,
    demand: &Demand,
    strategy: StrategyKind,
    mode: IntegrationMode,
) -> Result<SimOutput, EngineError> {
    cfg.validate()?;
    validate_demand(cfg, net, demand, mode)?;
    let rpp = mode != IntegrationMode::StatusQuo;

    let mut customers = demand.customers.clone();
    customers.sort_by_key(|c| (c.request_time_s, c.id));
    let mut parcels = demand.parcels.clone();
    parcels.sort_by_key(|p| p.id);

    let mut book = RequestBook::new();
    let mut fleet = Fleet::new(cfg.fleet_size, net, cfg.start_s as f64);
    let mut state = StrategyState::new(if rpp {
        parcels.iter().map(|p| p.id).collect::<Vec<_>>()
    } else {
        Vec::new()
    });
    let mut sink = StepSink::default();

    for p in &parcels {
        if rpp {
            book.add_parcel(p, net, cfg.start_s as f64)?;
        }
        sink.events.push(Event::Request {
            t: cfg.start_s as f64,
            req: ReqRef::Parcel(p.id),
            node: p.origin,
        });
    }

    let deadline_s = cfg.parcel_deadline_s.min(cfg.end_s);
    let mut next_reveal = 0usize;
    let mut newly: Vec<(crate::CustomerId, NodeId)> = Vec::new();
    let mut t = cfg.start_s;

    while t < cfg.end_s {
        let now = t as f64;

        newly.clear();
        while next_reveal < customers.len() && customers[next_reveal].request_time_s <= t {
            let r = &customers[next_reveal];
            book.add_customer(r, net)?;
            sink.events.push(Event::Request {
                t: r.request_time_s as f64,
                req: ReqRef::Customer(r.id),
                node: r.origin,
            });
            newly.push((r.id, r.origin));
            next_reveal += 1;
        }

        for &(cid, origin) in &newly {
            let ctx = PlanningCtx {
                net,
                cfg,
                book: &book,
                mode,
            };
            if rpp && strategy == StrategyKind::Scpa {
                let assigned =
                    scpa_customer_step(&mut state, &mut fleet, cid, now, &ctx, &mut sink)?;
                if !assigned {
                    sink.events.push(Event::Reject {
                        t: now,
                        req: ReqRef::Customer(cid),
                        node: origin,
                    });
                }
            } else {
                match assign_customer(&fleet, cid, now, &ctx) {
                    Some(a) => {
                        commit(&mut fleet, a.vehicle, a.insertion.schedule, &ctx, &mut sink.updated)?;
                        sink.events.push(Event::Assign {
                            t: now,
                            req: ReqRef::Customer(cid),
                            vehicle: a.vehicle,
                            node: origin,
                        });
                    }
                    None => sink.events.push(Event::Reject {
                        t: now,
                        req: ReqRef::Customer(cid),
                        node: origin,
                    }),
                }
            }
        }

        if t % cfg.repo_period_s == 0 {
            let fc = forecast(
                &demand.od,
                net,
                cfg.penetration,
                t as u64,
                cfg.repo_period_s as u64,
            );
            for mv in plan_rebalance(&fleet, &fc, net, now) {
                let v = fleet.get_mut(mv.vehicle);
                v.reposition_target = Some(mv.target_node);
                v.needs_replan = true;
                sink.updated.insert(mv.vehicle);
                sink.rebalance.push(RebalanceRecord {
                    t: now,
                    vehicle: mv.vehicle,
                    from_zone: mv.from_zone,
                    to_zone: mv.to_zone,
                    target_node: mv.target_node,
                });
            }
        }

        if rpp {
            let vca = mem::take(&mut sink.updated);
            let ctx = PlanningCtx {
                net,
                cfg,
                book: &book,
                mode,
            };
            match strategy {
                StrategyKind::Cdpa => {
                    cdpa_step(&mut state, &mut fleet, &vca, now, &ctx, &mut sink)?
                }
                StrategyKind::Sdpa => {
                    sdpa_dropoff_step(&mut state, &mut fleet, &vca, now, &ctx, &mut sink)?;
                    sdpa_pickup_step(&mut state, &mut fleet, &vca, now, &ctx, &mut sink)?;
                }
                StrategyKind::Scpa => {
                    if cfg.scpa_background_dropoff {
                        sdpa_dropoff_step(&mut state, &mut fleet, &vca, now, &ctx, &mut sink)?;
                    }
                    sdpa_pickup_step(&mut state, &mut fleet, &vca, now, &ctx, &mut sink)?;
                }
            }
        } else {
            sink.updated.clear();
        }

        if rpp && t >= deadline_s {
            let ctx = PlanningCtx {
                net,
                cfg,
                book: &book,
                mode,
            };
            force_remaining_deliveries(&mut state, &mut fleet, now, &ctx, &mut sink)?;
        }

        let t_end = (t + cfg.step_s) as f64;
        for v in &mut fleet.vehicles {
            advance(v, now, t_end, net, &book, &mut state, &mut sink)?;
        }
        t += cfg.step_s;
    }

    for v in &mut fleet.vehicles {
        v.reposition_target = None;
    }
    loop {
        let drained = state.assigned_pickup.is_empty()
            && fleet.vehicles.iter().all(|v| {
                v.schedule.stops.is_empty()
                    && v.schedule.onboard_customers.is_empty()
                    && v.schedule.onboard_parcels.is_empty()
                    && matches!(v.position, Position::Idle { .. })
            });
        if drained {
            break;
        }
        if t - cfg.end_s > 86_400 {
            return Err(EngineError::Internal(format!(
                "fleet failed to drain within a day past the horizon (clock {t})"
            )));
        }
        let now = t as f64;
        if rpp {
            let ctx = PlanningCtx {
                net,
                cfg,
                book: &book,
                mode,
            };
            force_remaining_deliveries(&mut state, &mut fleet, now, &ctx, &mut sink)?;
        }
        let t_end = (t + cfg.step_s) as f64;
        for v in &mut fleet.vehicles {
            advance(v, now, t_end, net, &book, &mut state, &mut sink)?;
        }
        t += cfg.step_s;
    }

    let truck_plan = if rpp {
        None
    } else {
        Some(route_logistics(&parcels, net, cfg.truck_capacity)?)
    };
    sink.events.sort_by(|a, b| a.time().total_cmp(&b.time()));
    let kpi = compute(&sink.events, cfg, &parcels, truck_plan.as_ref())?;
    Ok(SimOutput {
        kpi,
        events: sink.events,
        audit: sink.audit,
        rebalance_log: sink.rebalance,
        truck_plan,
        fleet,
    })
}
