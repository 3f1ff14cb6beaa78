//! Parcel integration strategies: combined insertion (CDPA), split pickup
//! and drop-off insertion (SDPA), and customer-triggered combination (SCPA),
//! plus the end-of-day forced delivery sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dispatch::{assign_customer, commit, CommitError, Fleet, VehicleId};
use crate::event::{AuditKind, AuditRecord, Event, ReqRef, StepSink};
use crate::schedule::{
    insert_parcel, insert_parcel_destination, insert_parcel_origin, Insertion, PlanningCtx,
};
use crate::{CustomerId, ParcelId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StrategyKind {
    Cdpa,
    Sdpa,
    Scpa,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StrategyKind::Cdpa => "cdpa",
            StrategyKind::Sdpa => "sdpa",
            StrategyKind::Scpa => "scpa",
        };
        f.write_str(s)
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cdpa" => Ok(StrategyKind::Cdpa),
            "sdpa" => Ok(StrategyKind::Sdpa),
            "scpa" => Ok(StrategyKind::Scpa),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Commit(#[from] CommitError),
    #[error("forced delivery found no insertion for {parcel} on vehicle {vehicle}")]
    ForcedStuck { parcel: ParcelId, vehicle: VehicleId },
}

/// Parcel bookkeeping across steps. A parcel sits in at most one of
/// `unassigned`, one vehicle's `assigned_pickup` set, or `delivered`;
/// between a committed drop-off and its execution it is in none of them.
#[derive(Debug, Default, Clone)]
pub struct StrategyState {
    pub unassigned: BTreeSet<ParcelId>,
    pub assigned_pickup: BTreeMap<VehicleId, BTreeSet<ParcelId>>,
    pub delivered: BTreeSet<ParcelId>,
}

impl StrategyState {
    pub fn new<I: IntoIterator<Item = ParcelId>>(parcels: I) -> Self {
        StrategyState {
            unassigned: parcels.into_iter().collect(),
            ..StrategyState::default()
        }
    }

    fn take_assigned(&mut self, vehicle: VehicleId, parcel: ParcelId) {
        if let Some(set) = self.assigned_pickup.get_mut(&vehicle) {
            set.remove(&parcel);
            if set.is_empty() {
                self.assigned_pickup.remove(&vehicle);
            }
        }
    }
}

struct Cand {
    ins: Insertion,
    vehicle: VehicleId,
    parcel: ParcelId,
    d_old_m: f64,
}

fn improves(best: &Option<Cand>, objective_m: f64) -> bool {
    best.as_ref().map_or(true, |b| objective_m < b.ins.objective_m)
}

fn audit(kind: AuditKind, now: f64, c: &Cand, d_direct_m: f64, budget_m: f64, accepted: bool) -> AuditRecord {
    AuditRecord {
        t: now,
        kind,
        parcel: c.parcel,
        vehicle: c.vehicle,
        d_new_m: c.ins.distance_m,
        d_old_m: c.d_old_m,
        d_direct_m,
        budget_m,
        accepted,
    }
}

/// Combined insertion: pickup and drop-off of each pending parcel are
/// committed together on the vehicle with the least objective, provided the
/// added distance stays under the threshold budget.
pub fn cdpa_step(
    state: &mut StrategyState,
    fleet: &mut Fleet,
    vca: &BTreeSet<VehicleId>,
    now: f64,
    ctx: &PlanningCtx,
    sink: &mut StepSink,
) -> Result<(), StepError> {
    let pending: Vec<ParcelId> = state.unassigned.iter().copied().collect();
    for parcel in pending {
        let info = ctx.book.parcel(parcel).expect("parcel registered");
        let budget_m = (1.0 - ctx.cfg.threshold) * info.direct_dist_m;
        let origin = info.origin;
        let mut best: Option<Cand> = None;
        let mut best_over: Option<Cand> = None;
        for &vid in vca {
            let base = fleet.get(vid).planning_schedule(now);
            let d_old_m = base.distance_m(ctx);
            if let Some(ins) = insert_parcel(&base, parcel, ctx) {
                let added = ins.distance_m - d_old_m;
                let cand = Cand {
                    ins,
                    vehicle: vid,
                    parcel,
                    d_old_m,
                };
                if added < budget_m {
                    if improves(&best, cand.ins.objective_m) {
                        best = Some(cand);
                    }
                } else if improves(&best_over, cand.ins.objective_m) {
                    best_over = Some(cand);
                }
            }
        }
        if let Some(c) = best {
            commit(fleet, c.vehicle, c.ins.schedule.clone(), ctx, &mut sink.updated)?;
            state.unassigned.remove(&parcel);
            sink.events.push(Event::Assign {
                t: now,
                req: ReqRef::Parcel(parcel),
                vehicle: c.vehicle,
                node: origin,
            });
            sink.audit
                .push(audit(AuditKind::Cdpa, now, &c, info.direct_dist_m, budget_m, true));
        } else if let Some(c) = best_over {
            sink.audit
                .push(audit(AuditKind::Cdpa, now, &c, info.direct_dist_m, budget_m, false));
        }
    }
    Ok(())
}

/// Pickup-only insertion under half the threshold budget; the drop-off stays
/// open until a later `sdpa_dropoff_step` commits it.
pub fn sdpa_pickup_step(
    state: &mut StrategyState,
    fleet: &mut Fleet,
    vca: &BTreeSet<VehicleId>,
    now: f64,
    ctx: &PlanningCtx,
    sink: &mut StepSink,
) -> Result<(), StepError> {
    let pending: Vec<ParcelId> = state.unassigned.iter().copied().collect();
    for parcel in pending {
        let info = ctx.book.parcel(parcel).expect("parcel registered");
        let budget_m = (1.0 - ctx.cfg.threshold) * info.direct_dist_m / 2.0;
        let origin = info.origin;
        let mut best: Option<Cand> = None;
        let mut best_over: Option<Cand> = None;
        for &vid in vca {
            let base = fleet.get(vid).planning_schedule(now);
            let d_old_m = base.distance_m(ctx);
            if let Some(ins) = insert_parcel_origin(&base, parcel, ctx) {
                let added = ins.distance_m - d_old_m;
                let cand = Cand {
                    ins,
                    vehicle: vid,
                    parcel,
                    d_old_m,
                };
                if added < budget_m {
                    if improves(&best, cand.ins.objective_m) {
                        best = Some(cand);
                    }
                } else if improves(&best_over, cand.ins.objective_m) {
                    best_over = Some(cand);
                }
            }
        }
        if let Some(c) = best {
            commit(fleet, c.vehicle, c.ins.schedule.clone(), ctx, &mut sink.updated)?;
            state.unassigned.remove(&parcel);
            state
                .assigned_pickup
                .entry(c.vehicle)
                .or_default()
                .insert(parcel);
            sink.events.push(Event::Assign {
                t: now,
                req: ReqRef::Parcel(parcel),
                vehicle: c.vehicle,
                node: origin,
            });
            sink.audit.push(audit(
                AuditKind::SdpaPickup,
                now,
                &c,
                info.direct_dist_m,
                budget_m,
                true,
            ));
        } else if let Some(c) = best_over {
            sink.audit.push(audit(
                AuditKind::SdpaPickup,
                now,
                &c,
                info.direct_dist_m,
                budget_m,
                false,
            ));
        }
    }
    Ok(())
}

/// Drop-off insertion for parcels already picked up or scheduled for pickup.
/// At most one drop-off per vehicle is committed per step.
pub fn sdpa_dropoff_step(
    state: &mut StrategyState,
    fleet: &mut Fleet,
    vca: &BTreeSet<VehicleId>,
    now: f64,
    ctx: &PlanningCtx,
    sink: &mut StepSink,
) -> Result<(), StepError> {
    for &vid in vca {
        let Some(parcels) = state.assigned_pickup.get(&vid) else {
            continue;
        };
        let parcels: Vec<ParcelId> = parcels.iter().copied().collect();
        let base = fleet.get(vid).planning_schedule(now);
        let d_old_m = base.distance_m(ctx);
        let mut best: Option<(Cand, f64)> = None;
        let mut best_over: Option<(Cand, f64)> = None;
        for parcel in parcels {
            let info = ctx.book.parcel(parcel).expect("parcel registered");
            let budget_m = (1.0 - ctx.cfg.threshold) * info.direct_dist_m / 2.0;
            if let Some(ins) = insert_parcel_destination(&base, parcel, ctx) {
                let added = ins.distance_m - d_old_m;
                let cand = Cand {
                    ins,
                    vehicle: vid,
                    parcel,
                    d_old_m,
                };
                if added < budget_m {
                    if best
                        .as_ref()
                        .map_or(true, |(b, _)| cand.ins.objective_m < b.ins.objective_m)
                    {
                        best = Some((cand, budget_m));
                    }
                } else if best_over
                    .as_ref()
                    .map_or(true, |(b, _)| cand.ins.objective_m < b.ins.objective_m)
                {
                    best_over = Some((cand, budget_m));
                }
            }
        }
        if let Some((c, budget_m)) = best {
            commit(fleet, vid, c.ins.schedule.clone(), ctx, &mut sink.updated)?;
            state.take_assigned(vid, c.parcel);
            let d_direct = ctx.book.parcel(c.parcel).expect("parcel registered").direct_dist_m;
            sink.audit
                .push(audit(AuditKind::SdpaDropoff, now, &c, d_direct, budget_m, true));
        } else if let Some((c, budget_m)) = best_over {
            let d_direct = ctx.book.parcel(c.parcel).expect("parcel registered").direct_dist_m;
            sink.audit
                .push(audit(AuditKind::SdpaDropoff, now, &c, d_direct, budget_m, false));
        }
    }
    Ok(())
}

/// SCPA reaction to one customer request: pick the benchmark insertion by
/// objective delta, then try to combine the customer with a held parcel's
/// drop-off; the combination wins only under half the parcel's budget.
/// Returns whether the customer was assigned.
pub fn scpa_customer_step(
    state: &mut StrategyState,
    fleet: &mut Fleet,
    customer: CustomerId,
    now: f64,
    ctx: &PlanningCtx,
    sink: &mut StepSink,
) -> Result<bool, StepError> {
    let origin = ctx.book.customer(customer).expect("customer registered").origin;
    let Some(bench) = assign_customer(fleet, customer, now, ctx) else {
        return Ok(false);
    };
    let mut best: Option<(Cand, f64)> = None;
    let mut best_over: Option<(Cand, f64)> = None;
    for (&vid, parcels) in &state.assigned_pickup {
        let base = fleet.get(vid).planning_schedule(now);
        let Some(with_customer) = crate::schedule::insert_customer(&base, customer, ctx) else {
            continue;
        };
        for &parcel in parcels {
            let info = ctx.book.parcel(parcel).expect("parcel registered");
            let budget_m = (1.0 - ctx.cfg.threshold) * info.direct_dist_m / 2.0;
            if let Some(ins) = insert_parcel_destination(&with_customer.schedule, parcel, ctx) {
                let added = ins.distance_m - bench.insertion.distance_m;
                let cand = Cand {
                    ins,
                    vehicle: vid,
                    parcel,
                    d_old_m: bench.insertion.distance_m,
                };
                if added < budget_m {
                    if best
                        .as_ref()
                        .map_or(true, |(b, _)| cand.ins.objective_m < b.ins.objective_m)
                    {
                        best = Some((cand, budget_m));
                    }
                } else if best_over
                    .as_ref()
                    .map_or(true, |(b, _)| cand.ins.objective_m < b.ins.objective_m)
                {
                    best_over = Some((cand, budget_m));
                }
            }
        }
    }
    let vehicle = if let Some((c, budget_m)) = best {
        commit(fleet, c.vehicle, c.ins.schedule.clone(), ctx, &mut sink.updated)?;
        state.take_assigned(c.vehicle, c.parcel);
        let d_direct = ctx.book.parcel(c.parcel).expect("parcel registered").direct_dist_m;
        sink.audit
            .push(audit(AuditKind::ScpaCombined, now, &c, d_direct, budget_m, true));
        c.vehicle
    } else {
        commit(
            fleet,
            bench.vehicle,
            bench.insertion.schedule.clone(),
            ctx,
            &mut sink.updated,
        )?;
        if let Some((c, budget_m)) = best_over {
            let d_direct = ctx.book.parcel(c.parcel).expect("parcel registered").direct_dist_m;
            sink.audit
                .push(audit(AuditKind::ScpaCombined, now, &c, d_direct, budget_m, false));
        }
        bench.vehicle
    };
    sink.events.push(Event::Assign {
        t: now,
        req: ReqRef::Customer(customer),
        vehicle,
        node: origin,
    });
    Ok(true)
}

/// Schedule drop-offs for every still-held parcel, cheapest insertion first,
/// with no budget. Runs near the end of the horizon so nothing stays aboard.
pub fn force_remaining_deliveries(
    state: &mut StrategyState,
    fleet: &mut Fleet,
    now: f64,
    ctx: &PlanningCtx,
    sink: &mut StepSink,
) -> Result<(), StepError> {
    let vehicles: Vec<VehicleId> = state.assigned_pickup.keys().copied().collect();
    for vid in vehicles {
        loop {
            let Some(parcels) = state.assigned_pickup.get(&vid) else {
                break;
            };
            let parcels: Vec<ParcelId> = parcels.iter().copied().collect();
            let base = fleet.get(vid).planning_schedule(now);
            let d_old_m = base.distance_m(ctx);
            let mut best: Option<Cand> = None;
            for parcel in &parcels {
                if let Some(ins) = insert_parcel_destination(&base, *parcel, ctx) {
                    if improves(&best, ins.objective_m) {
                        best = Some(Cand {
                            ins,
                            vehicle: vid,
                            parcel: *parcel,
                            d_old_m,
                        });
                    }
                }
            }
            let Some(c) = best else {
                return Err(StepError::ForcedStuck {
                    parcel: parcels[0],
                    vehicle: vid,
                });
            };
            commit(fleet, vid, c.ins.schedule.clone(), ctx, &mut sink.updated)?;
            state.take_assigned(vid, c.parcel);
            let d_direct = ctx.book.parcel(c.parcel).expect("parcel registered").direct_dist_m;
            sink.audit.push(audit(
                AuditKind::Forced,
                now,
                &c,
                d_direct,
                f64::INFINITY,
                true,
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::demand::{CustomerRequest, ParcelRequest};
    use crate::dispatch::{Fleet, Vehicle};
    use crate::fixture;
    use crate::network::{Network, NodeId};
    use crate::schedule::{insert_customer, IntegrationMode, PlanningCtx, RequestBook, Stop};

    struct World {
        net: Network,
        cfg: SimConfig,
        book: RequestBook,
    }

    impl World {
        fn line4() -> Self {
            World {
                net: fixture::line4().network().unwrap(),
                cfg: SimConfig::default(),
                book: RequestBook::default(),
            }
        }

        fn ctx(&self) -> PlanningCtx<'_> {
            PlanningCtx {
                net: &self.net,
                cfg: &self.cfg,
                book: &self.book,
                mode: IntegrationMode::Full,
            }
        }

        fn customer(&mut self, id: u32, o: &str, d: &str, t: f64) -> CustomerId {
            let r = CustomerRequest {
                id: CustomerId(id),
                origin: self.node(o),
                destination: self.node(d),
                request_time_s: t as u32,
            };
            self.book.add_customer(&r, &self.net).unwrap();
            r.id
        }

        fn parcel(&mut self, id: u32, o: &str, d: &str) -> ParcelId {
            let r = ParcelRequest {
                id: ParcelId(id),
                origin: self.node(o),
                destination: self.node(d),
                size: 1,
            };
            self.book.add_parcel(&r, &self.net, 0.0).unwrap();
            r.id
        }

        fn node(&self, name: &str) -> NodeId {
            self.net.node_id(name).unwrap()
        }
    }

    fn fleet_at(w: &World, nodes: &[&str]) -> Fleet {
        let vehicles = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| Vehicle::new(VehicleId(i as u32), w.node(n), 0.0))
            .collect();
        Fleet { vehicles }
    }

    fn all_vca(fleet: &Fleet) -> BTreeSet<VehicleId> {
        fleet.vehicles.iter().map(|v| v.id).collect()
    }

    fn stop_nodes(fleet: &Fleet, v: u32) -> Vec<NodeId> {
        fleet.vehicles[v as usize]
            .schedule
            .stops
            .iter()
            .map(|s| s.node)
            .collect()
    }

    #[test]
    fn cdpa_inserts_on_the_way_parcel_within_budget() {
        let mut w = World::line4();
        let c = w.customer(9, "n3", "n0", 0.0);
        let p = w.parcel(0, "n1", "n2");
        let mut fleet = fleet_at(&w, &["n0"]);
        let base = fleet.vehicles[0].planning_schedule(0.0);
        fleet.vehicles[0].schedule = insert_customer(&base, c, &w.ctx()).unwrap().schedule;

        let mut state = StrategyState::new([p]);
        let mut sink = StepSink::default();
        let vca = all_vca(&fleet);
        cdpa_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink).unwrap();

        assert!(state.unassigned.is_empty());
        let want: Vec<NodeId> = ["n1", "n2", "n3", "n0"].iter().map(|n| w.node(n)).collect();
        assert_eq!(stop_nodes(&fleet, 0), want);
        let a = &sink.audit[0];
        assert_eq!(a.kind, AuditKind::Cdpa);
        assert!(a.accepted);
        let budget = (1.0 - w.cfg.threshold) * 1000.0;
        assert_eq!((a.d_new_m, a.d_old_m, a.budget_m), (6000.0, 6000.0, budget));
        assert!(sink
            .events
            .iter()
            .any(|e| matches!(e, Event::Assign { req: ReqRef::Parcel(x), .. } if *x == p)));
    }

    #[test]
    fn cdpa_at_threshold_one_admits_no_extra_distance() {
        let mut w = World::line4();
        w.cfg.threshold = 1.0;
        let c = w.customer(9, "n3", "n0", 0.0);
        let p = w.parcel(0, "n1", "n2");
        let mut fleet = fleet_at(&w, &["n0"]);
        let base = fleet.vehicles[0].planning_schedule(0.0);
        fleet.vehicles[0].schedule = insert_customer(&base, c, &w.ctx()).unwrap().schedule;

        let mut state = StrategyState::new([p]);
        let mut sink = StepSink::default();
        let vca = all_vca(&fleet);
        cdpa_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink).unwrap();

        assert!(state.unassigned.contains(&p));
        let a = &sink.audit[0];
        assert!(!a.accepted);
        assert_eq!(a.budget_m, 0.0);
    }

    #[test]
    fn cdpa_rejects_costly_detour_and_logs_best_candidate() {
        let mut w = World::line4();
        let p = w.parcel(0, "n1", "n2");
        let mut fleet = fleet_at(&w, &["n0"]);
        let mut state = StrategyState::new([p]);
        let mut sink = StepSink::default();
        let vca = all_vca(&fleet);
        cdpa_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink).unwrap();

        assert!(state.unassigned.contains(&p));
        assert!(fleet.vehicles[0].schedule.stops.is_empty());
        let a = &sink.audit[0];
        assert!(!a.accepted);
        let budget = (1.0 - w.cfg.threshold) * 1000.0;
        assert_eq!((a.d_new_m, a.d_old_m, a.budget_m), (2000.0, 0.0, budget));
        assert!(sink.events.is_empty());
    }

    #[test]
    fn sdpa_pickup_commits_origin_without_dropoff() {
        let mut w = World::line4();
        let c = w.customer(9, "n3", "n0", 0.0);
        let p = w.parcel(0, "n1", "n2");
        let mut fleet = fleet_at(&w, &["n0"]);
        let base = fleet.vehicles[0].planning_schedule(0.0);
        fleet.vehicles[0].schedule = insert_customer(&base, c, &w.ctx()).unwrap().schedule;

        let mut state = StrategyState::new([p]);
        let mut sink = StepSink::default();
        let vca = all_vca(&fleet);
        sdpa_pickup_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink)
            .unwrap();

        assert!(state.unassigned.is_empty());
        assert_eq!(
            state.assigned_pickup.get(&VehicleId(0)),
            Some(&BTreeSet::from([p]))
        );
        let want: Vec<NodeId> = ["n1", "n3", "n0"].iter().map(|n| w.node(n)).collect();
        assert_eq!(stop_nodes(&fleet, 0), want);
        let stops = &fleet.vehicles[0].schedule.stops;
        assert!(stops.iter().all(|s| !s.alighting_parcels.contains(&p)));
        let a = &sink.audit[0];
        assert_eq!(a.kind, AuditKind::SdpaPickup);
        assert!(a.accepted);
        assert_eq!(a.budget_m, (1.0 - w.cfg.threshold) * 1000.0 / 2.0);
    }

    #[test]
    fn sdpa_pickup_respects_half_budget() {
        let mut w = World::line4();
        let p = w.parcel(0, "n1", "n2");
        let mut fleet = fleet_at(&w, &["n0"]);
        let mut state = StrategyState::new([p]);
        let mut sink = StepSink::default();
        let vca = all_vca(&fleet);
        sdpa_pickup_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink)
            .unwrap();

        assert!(state.unassigned.contains(&p));
        assert!(state.assigned_pickup.is_empty());
        let a = &sink.audit[0];
        assert!(!a.accepted);
        let budget = (1.0 - w.cfg.threshold) * 1000.0 / 2.0;
        assert_eq!((a.d_new_m, a.budget_m), (1000.0, budget));
    }

    #[test]
    fn sdpa_dropoff_commits_at_most_one_per_vehicle_per_step() {
        let mut w = World::line4();
        w.cfg.detour_factor = 2.0;
        let c = w.customer(5, "n0", "n3", 0.0);
        let p0 = w.parcel(0, "n0", "n1");
        let p1 = w.parcel(1, "n0", "n2");
        let mut fleet = fleet_at(&w, &["n0"]);
        let v = &mut fleet.vehicles[0];
        v.schedule.onboard_customers.insert(c, 0.0);
        v.schedule.onboard_parcels.extend([p0, p1]);
        v.schedule.stops = vec![Stop::at(w.node("n3")).alight_customer(c)];
        let mut state = StrategyState::default();
        state.assigned_pickup.insert(VehicleId(0), BTreeSet::from([p0, p1]));

        let mut sink = StepSink::default();
        let vca = all_vca(&fleet);
        sdpa_dropoff_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink)
            .unwrap();
        let want: Vec<NodeId> = ["n1", "n3"].iter().map(|n| w.node(n)).collect();
        assert_eq!(stop_nodes(&fleet, 0), want);
        assert_eq!(
            state.assigned_pickup.get(&VehicleId(0)),
            Some(&BTreeSet::from([p1]))
        );
        assert_eq!(sink.audit.len(), 1);
        assert_eq!(sink.audit[0].parcel, p0);

        let vca = all_vca(&fleet);
        sdpa_dropoff_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink)
            .unwrap();
        let want: Vec<NodeId> = ["n1", "n2", "n3"].iter().map(|n| w.node(n)).collect();
        assert_eq!(stop_nodes(&fleet, 0), want);
        assert!(state.assigned_pickup.is_empty());
    }

    #[test]
    fn sdpa_dropoff_rejects_over_budget_and_keeps_holding() {
        let mut w = World::line4();
        let c = w.customer(5, "n0", "n1", 0.0);
        let p = w.parcel(0, "n0", "n3");
        let mut fleet = fleet_at(&w, &["n0"]);
        let v = &mut fleet.vehicles[0];
        v.schedule.onboard_customers.insert(c, 0.0);
        v.schedule.onboard_parcels.insert(p);
        v.schedule.stops = vec![Stop::at(w.node("n1")).alight_customer(c)];
        let mut state = StrategyState::default();
        state.assigned_pickup.insert(VehicleId(0), BTreeSet::from([p]));

        let mut sink = StepSink::default();
        let vca = all_vca(&fleet);
        sdpa_dropoff_step(&mut state, &mut fleet, &vca, 0.0, &w.ctx(), &mut sink)
            .unwrap();

        assert_eq!(stop_nodes(&fleet, 0), vec![w.node("n1")]);
        assert_eq!(
            state.assigned_pickup.get(&VehicleId(0)),
            Some(&BTreeSet::from([p]))
        );
        let a = &sink.audit[0];
        assert_eq!(a.kind, AuditKind::SdpaDropoff);
        assert!(!a.accepted);
        let budget = (1.0 - w.cfg.threshold) * 3000.0 / 2.0;
        assert_eq!((a.d_new_m, a.d_old_m, a.budget_m), (3000.0, 1000.0, budget));
    }

    #[test]
    fn scpa_without_parcels_matches_passenger_assignment() {
        let mut w = World::line4();
        let c = w.customer(0, "n1", "n3", 0.0);
        let fleet0 = fleet_at(&w, &["n0", "n2"]);
        let expected = assign_customer(&fleet0, c, 0.0, &w.ctx()).unwrap();

        let mut fleet = fleet_at(&w, &["n0", "n2"]);
        let mut state = StrategyState::default();
        let mut sink = StepSink::default();
        let assigned =
            scpa_customer_step(&mut state, &mut fleet, c, 0.0, &w.ctx(), &mut sink).unwrap();

        assert!(assigned);
        assert_eq!(expected.vehicle, VehicleId(0));
        assert_eq!(fleet.vehicles[0].schedule, expected.insertion.schedule);
        assert!(fleet.vehicles[1].schedule.stops.is_empty());
        assert!(sink.audit.is_empty());
        assert!(sink
            .events
            .iter()
            .any(|e| matches!(e, Event::Assign { vehicle, .. } if *vehicle == VehicleId(0))));
    }

    #[test]
    fn scpa_combines_customer_with_held_parcel_dropoff() {
        let mut w = World::line4();
        let c = w.customer(0, "n0", "n3", 0.0);
        let p = w.parcel(0, "n0", "n2");
        let mut fleet = fleet_at(&w, &["n0", "n0"]);
        fleet.vehicles[1].schedule.onboard_parcels.insert(p);
        let mut state = StrategyState::default();
        state.assigned_pickup.insert(VehicleId(1), BTreeSet::from([p]));

        let mut sink = StepSink::default();
        let assigned =
            scpa_customer_step(&mut state, &mut fleet, c, 0.0, &w.ctx(), &mut sink).unwrap();

        assert!(assigned);
        let want: Vec<NodeId> = ["n0", "n2", "n3"].iter().map(|n| w.node(n)).collect();
        assert_eq!(stop_nodes(&fleet, 1), want);
        assert!(fleet.vehicles[0].schedule.stops.is_empty());
        assert!(state.assigned_pickup.is_empty());
        let a = &sink.audit[0];
        assert_eq!(a.kind, AuditKind::ScpaCombined);
        assert!(a.accepted);
        let budget = (1.0 - w.cfg.threshold) * 2000.0 / 2.0;
        assert_eq!((a.d_new_m, a.d_old_m, a.budget_m), (3000.0, 3000.0, budget));
        assert!(sink
            .events
            .iter()
            .any(|e| matches!(e, Event::Assign { vehicle, .. } if *vehicle == VehicleId(1))));
    }

    #[test]
    fn scpa_over_budget_combination_falls_back_to_benchmark() {
        let mut w = World::line4();
        let c = w.customer(0, "n2", "n3", 0.0);
        let p = w.parcel(0, "n2", "n0");
        let mut fleet = fleet_at(&w, &["n2", "n2"]);
        fleet.vehicles[1].schedule.onboard_parcels.insert(p);
        let mut state = StrategyState::default();
        state.assigned_pickup.insert(VehicleId(1), BTreeSet::from([p]));

        let mut sink = StepSink::default();
        let assigned =
            scpa_customer_step(&mut state, &mut fleet, c, 0.0, &w.ctx(), &mut sink).unwrap();

        assert!(assigned);
        let want: Vec<NodeId> = ["n2", "n3"].iter().map(|n| w.node(n)).collect();
        assert_eq!(stop_nodes(&fleet, 0), want);
        assert!(fleet.vehicles[1].schedule.stops.is_empty());
        assert_eq!(
            state.assigned_pickup.get(&VehicleId(1)),
            Some(&BTreeSet::from([p]))
        );
        let a = &sink.audit[0];
        assert!(!a.accepted);
        let budget = (1.0 - w.cfg.threshold) * 2000.0 / 2.0;
        assert_eq!((a.d_new_m, a.d_old_m, a.budget_m), (4000.0, 1000.0, budget));
    }

    #[test]
    fn forced_delivery_clears_holdings_cheapest_first() {
        let mut w = World::line4();
        let p0 = w.parcel(0, "n0", "n1");
        let p1 = w.parcel(1, "n0", "n2");
        let p2 = w.parcel(2, "n0", "n3");
        let mut fleet = fleet_at(&w, &["n0"]);
        fleet.vehicles[0]
            .schedule
            .onboard_parcels
            .extend([p0, p1, p2]);
        let mut state = StrategyState::default();
        state
            .assigned_pickup
            .insert(VehicleId(0), BTreeSet::from([p0, p1, p2]));

        let mut sink = StepSink::default();
        force_remaining_deliveries(&mut state, &mut fleet, 0.0, &w.ctx(), &mut sink).unwrap();

        let want: Vec<NodeId> = ["n1", "n2", "n3"].iter().map(|n| w.node(n)).collect();
        assert_eq!(stop_nodes(&fleet, 0), want);
        assert!(state.assigned_pickup.is_empty());
        let order: Vec<ParcelId> = sink.audit.iter().map(|a| a.parcel).collect();
        assert_eq!(order, vec![p0, p1, p2]);
        assert!(sink
            .audit
            .iter()
            .all(|a| a.kind == AuditKind::Forced && a.accepted && a.budget_m.is_infinite()));
    }
}
