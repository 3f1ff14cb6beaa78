//! Vehicle schedules: stop sequences, timing propagation, feasibility
//! under both integration modes, the distance-minus-reward objective, and
//! the insertion primitives every assignment decision is built from.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::config::SimConfig;
use crate::demand::{CustomerId, CustomerRequest, ParcelId, ParcelRequest};
use crate::network::{Network, NetworkError, NodeId};

/// How far parcels may intrude into passenger service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMode {
    /// Parcels ride separate trucks; pooling vehicles carry customers only.
    StatusQuo,
    /// Parcels share vehicles but parcel-only stops are forbidden while a
    /// customer is aboard.
    Moderate,
    /// Parcel stops may interleave freely, subject to the time constraints.
    Full,
}

impl fmt::Display for IntegrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IntegrationMode::StatusQuo => "statusquo",
            IntegrationMode::Moderate => "moderate",
            IntegrationMode::Full => "full",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for IntegrationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "statusquo" => Ok(IntegrationMode::StatusQuo),
            "moderate" => Ok(IntegrationMode::Moderate),
            "full" => Ok(IntegrationMode::Full),
            other => Err(format!("unknown integration mode {other:?}")),
        }
    }
}

/// One planned halt. Every stop carries at least one boarding or alighting
/// entry; the dwell time is one fixed boarding duration regardless of how
/// many entities act.
#[derive(Debug, Clone, PartialEq)]
pub struct Stop {
    pub node: NodeId,
    pub boarding_customers: BTreeSet<CustomerId>,
    pub alighting_customers: BTreeSet<CustomerId>,
    pub boarding_parcels: BTreeSet<ParcelId>,
    pub alighting_parcels: BTreeSet<ParcelId>,
    pub planned_arrival_s: f64,
    pub planned_departure_s: f64,
}

impl Stop {
    pub fn at(node: NodeId) -> Stop {
        Stop {
            node,
            boarding_customers: BTreeSet::new(),
            alighting_customers: BTreeSet::new(),
            boarding_parcels: BTreeSet::new(),
            alighting_parcels: BTreeSet::new(),
            planned_arrival_s: 0.0,
            planned_departure_s: 0.0,
        }
    }

    pub fn board_customer(mut self, c: CustomerId) -> Stop {
        self.boarding_customers.insert(c);
        self
    }

    pub fn alight_customer(mut self, c: CustomerId) -> Stop {
        self.alighting_customers.insert(c);
        self
    }

    pub fn board_parcel(mut self, p: ParcelId) -> Stop {
        self.boarding_parcels.insert(p);
        self
    }

    pub fn alight_parcel(mut self, p: ParcelId) -> Stop {
        self.alighting_parcels.insert(p);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.boarding_customers.is_empty()
            && self.alighting_customers.is_empty()
            && self.boarding_parcels.is_empty()
            && self.alighting_parcels.is_empty()
    }

    pub fn has_customer_action(&self) -> bool {
        !self.boarding_customers.is_empty() || !self.alighting_customers.is_empty()
    }

    fn absorb(&mut self, other: Stop) {
        self.boarding_customers.extend(other.boarding_customers);
        self.alighting_customers.extend(other.alighting_customers);
        self.boarding_parcels.extend(other.boarding_parcels);
        self.alighting_parcels.extend(other.alighting_parcels);
    }
}

/// Planned remainder of one vehicle's day, rooted at the position and time
/// the vehicle can next act on. Customers and parcels already aboard are
/// tracked separately from the stop list; aboard customers always have an
/// alighting stop, aboard parcels may lack one until a drop-off is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start_node: NodeId,
    pub start_time_s: f64,
    /// Aboard customers with the departure time of their boarding stop.
    pub onboard_customers: BTreeMap<CustomerId, f64>,
    pub onboard_parcels: BTreeSet<ParcelId>,
    pub stops: Vec<Stop>,
}

/// First constraint broken by a schedule, for diagnostics and audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    EmptyStop,
    DuplicateAction,
    UnknownRequest,
    Precedence,
    MissingDropoff,
    PaxCapacity,
    ParcelCapacity,
    WaitBound,
    RideBound,
    ModerateParcelStop,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::EmptyStop => "stop without any boarding or alighting",
            Violation::DuplicateAction => "request appears in more than one boarding or alighting",
            Violation::UnknownRequest => "request not registered",
            Violation::Precedence => "drop-off not after pick-up",
            Violation::MissingDropoff => "customer aboard without an alighting stop",
            Violation::PaxCapacity => "passenger capacity exceeded",
            Violation::ParcelCapacity => "parcel capacity exceeded",
            Violation::WaitBound => "waiting time bound exceeded",
            Violation::RideBound => "in-vehicle time bound exceeded",
            Violation::ModerateParcelStop => "parcel-only stop while customers aboard",
        };
        f.write_str(s)
    }
}

/// Request lookups needed to plan: endpoints, request times, sizes, and the
/// direct-trip metrics frozen when the request entered the system.
#[derive(Debug, Clone, Default)]
pub struct RequestBook {
    customers: BTreeMap<CustomerId, CustomerInfo>,
    parcels: BTreeMap<ParcelId, ParcelInfo>,
}

#[derive(Debug, Clone)]
pub struct CustomerInfo {
    pub origin: NodeId,
    pub destination: NodeId,
    pub request_time_s: f64,
    pub direct_time_s: f64,
    pub direct_dist_m: f64,
}

#[derive(Debug, Clone)]
pub struct ParcelInfo {
    pub origin: NodeId,
    pub destination: NodeId,
    pub size: u32,
    pub direct_time_s: f64,
    pub direct_dist_m: f64,
}

impl RequestBook {
    pub fn new() -> RequestBook {
        RequestBook::default()
    }

    pub fn add_customer(&mut self, r: &CustomerRequest, net: &Network) -> Result<(), NetworkError> {
        let t = r.request_time_s as f64;
        let (direct_time_s, direct_dist_m) = net.direct_metrics(r.origin, r.destination, t)?;
        self.customers.insert(
            r.id,
            CustomerInfo {
                origin: r.origin,
                destination: r.destination,
                request_time_s: t,
                direct_time_s,
                direct_dist_m,
            },
        );
        Ok(())
    }

    /// Registers a parcel; direct metrics are frozen at `at_s`.
    pub fn add_parcel(
        &mut self,
        p: &ParcelRequest,
        net: &Network,
        at_s: f64,
    ) -> Result<(), NetworkError> {
        let (direct_time_s, direct_dist_m) = net.direct_metrics(p.origin, p.destination, at_s)?;
        self.parcels.insert(
            p.id,
            ParcelInfo {
                origin: p.origin,
                destination: p.destination,
                size: p.size,
                direct_time_s,
                direct_dist_m,
            },
        );
        Ok(())
    }

    pub fn customer(&self, id: CustomerId) -> Option<&CustomerInfo> {
        self.customers.get(&id)
    }

    pub fn parcel(&self, id: ParcelId) -> Option<&ParcelInfo> {
        self.parcels.get(&id)
    }
}

/// Everything a planning decision reads: immutable within one engine step.
#[derive(Clone, Copy)]
pub struct PlanningCtx<'a> {
    pub net: &'a Network,
    pub cfg: &'a SimConfig,
    pub book: &'a RequestBook,
    pub mode: IntegrationMode,
}

/// One evaluated insertion candidate.
#[derive(Debug, Clone)]
pub struct Insertion {
    pub schedule: Schedule,
    pub distance_m: f64,
    pub objective_m: f64,
}

impl Schedule {
    pub fn empty(start_node: NodeId, start_time_s: f64) -> Schedule {
        Schedule {
            start_node,
            start_time_s,
            onboard_customers: BTreeMap::new(),
            onboard_parcels: BTreeSet::new(),
            stops: Vec::new(),
        }
    }

    pub fn is_idle(&self) -> bool {
        self.stops.is_empty()
    }

    /// Requests the schedule is committed to: aboard plus scheduled pick-ups.
    pub fn request_count(&self) -> usize {
        let scheduled: usize = self
            .stops
            .iter()
            .map(|s| s.boarding_customers.len() + s.boarding_parcels.len())
            .sum();
        self.onboard_customers.len() + self.onboard_parcels.len() + scheduled
    }

    pub fn customers(&self) -> BTreeSet<CustomerId> {
        let mut set: BTreeSet<CustomerId> = self.onboard_customers.keys().copied().collect();
        for stop in &self.stops {
            set.extend(stop.boarding_customers.iter().copied());
        }
        set
    }

    pub fn parcels(&self) -> BTreeSet<ParcelId> {
        let mut set = self.onboard_parcels.clone();
        for stop in &self.stops {
            set.extend(stop.boarding_parcels.iter().copied());
        }
        set
    }

    /// Merges adjacent stops at the same node and drops empty stops.
    pub fn canonicalize(&mut self) {
        let mut merged: Vec<Stop> = Vec::with_capacity(self.stops.len());
        for stop in self.stops.drain(..) {
            if stop.is_empty() {
                continue;
            }
            match merged.last_mut() {
                Some(prev) if prev.node == stop.node => prev.absorb(stop),
                _ => merged.push(stop),
            }
        }
        self.stops = merged;
    }

    /// Recomputes stop times and the remaining distance, enforcing all
    /// feasibility constraints. Legs are quoted at their departure instant,
    /// so planned times equal the times driving will realize.
    pub fn evaluate(&mut self, ctx: &PlanningCtx) -> Result<f64, Violation> {
        self.pass(ctx, true)
    }

    /// Remaining driving distance from the plan start through all stops.
    pub fn distance_m(&self, ctx: &PlanningCtx) -> f64 {
        self.clone()
            .pass(ctx, false)
            .expect("unchecked pass is total")
    }

    /// Distance minus one assignment reward per request.
    pub fn objective_m(&self, ctx: &PlanningCtx) -> f64 {
        self.distance_m(ctx) - ctx.cfg.assignment_reward_m * self.request_count() as f64
    }

    fn structural(&self, ctx: &PlanningCtx) -> Result<(), Violation> {
        use Violation::*;
        let mut cust_board: BTreeMap<CustomerId, usize> = BTreeMap::new();
        let mut cust_alight: BTreeMap<CustomerId, usize> = BTreeMap::new();
        let mut parcel_board: BTreeMap<ParcelId, usize> = BTreeMap::new();
        let mut parcel_alight: BTreeMap<ParcelId, usize> = BTreeMap::new();
        for (k, stop) in self.stops.iter().enumerate() {
            if stop.is_empty() {
                return Err(EmptyStop);
            }
            for &c in &stop.boarding_customers {
                if self.onboard_customers.contains_key(&c) || cust_board.insert(c, k).is_some() {
                    return Err(DuplicateAction);
                }
                if ctx.book.customer(c).is_none() {
                    return Err(UnknownRequest);
                }
            }
            for &c in &stop.alighting_customers {
                if cust_alight.insert(c, k).is_some() {
                    return Err(DuplicateAction);
                }
            }
            for &p in &stop.boarding_parcels {
                if self.onboard_parcels.contains(&p) || parcel_board.insert(p, k).is_some() {
                    return Err(DuplicateAction);
                }
                if ctx.book.parcel(p).is_none() {
                    return Err(UnknownRequest);
                }
            }
            for &p in &stop.alighting_parcels {
                if parcel_alight.insert(p, k).is_some() {
                    return Err(DuplicateAction);
                }
            }
        }
        for (&c, _) in self.onboard_customers.iter() {
            if ctx.book.customer(c).is_none() {
                return Err(UnknownRequest);
            }
            if !cust_alight.contains_key(&c) {
                return Err(MissingDropoff);
            }
        }
        for (&c, &b) in &cust_board {
            match cust_alight.get(&c) {
                Some(&a) if a > b => {}
                Some(_) => return Err(Precedence),
                None => return Err(MissingDropoff),
            }
        }
        for (&c, _) in &cust_alight {
            if !cust_board.contains_key(&c) && !self.onboard_customers.contains_key(&c) {
                return Err(Precedence);
            }
        }
        for &p in &self.onboard_parcels {
            if ctx.book.parcel(p).is_none() {
                return Err(UnknownRequest);
            }
        }
        for (&p, &a) in &parcel_alight {
            if self.onboard_parcels.contains(&p) {
                continue;
            }
            match parcel_board.get(&p) {
                Some(&b) if a > b => {}
                _ => return Err(Precedence),
            }
        }
        Ok(())
    }

    fn pass(&mut self, ctx: &PlanningCtx, enforce: bool) -> Result<f64, Violation> {
        use Violation::*;
        if enforce {
            self.structural(ctx)?;
        }
        let t_b = ctx.cfg.boarding_time_s;
        let mut pax = self.onboard_customers.len() as u32;
        let mut units: u32 = self
            .onboard_parcels
            .iter()
            .map(|p| ctx.book.parcel(*p).map_or(0, |i| i.size))
            .sum();
        let mut boarded_at: BTreeMap<CustomerId, f64> = self.onboard_customers.clone();
        let mut node = self.start_node;
        let mut time = self.start_time_s;
        let mut dist = 0.0;
        for k in 0..self.stops.len() {
            let (leg_t, leg_d) = ctx
                .net
                .query(node, self.stops[k].node, time)
                .expect("network is strongly connected");
            let arrival = time + leg_t;
            dist += leg_d;
            let stop = &mut self.stops[k];
            stop.planned_arrival_s = arrival;
            stop.planned_departure_s = arrival + t_b;
            if enforce {
                if ctx.mode == IntegrationMode::Moderate
                    && pax > 0
                    && !stop.has_customer_action()
                {
                    return Err(ModerateParcelStop);
                }
                for c in &stop.alighting_customers {
                    let info = ctx.book.customer(*c).ok_or(UnknownRequest)?;
                    let boarded = boarded_at[c];
                    let max_ride = (1.0 + ctx.cfg.detour_factor) * info.direct_time_s;
                    if arrival - boarded > max_ride {
                        return Err(RideBound);
                    }
                    pax -= 1;
                }
                for p in &stop.alighting_parcels {
                    let info = ctx.book.parcel(*p).ok_or(UnknownRequest)?;
                    units -= info.size;
                }
                for c in &stop.boarding_customers {
                    let info = ctx.book.customer(*c).ok_or(UnknownRequest)?;
                    if arrival - info.request_time_s > ctx.cfg.max_wait_s {
                        return Err(WaitBound);
                    }
                    boarded_at.insert(*c, stop.planned_departure_s);
                    pax += 1;
                }
                for p in &stop.boarding_parcels {
                    let info = ctx.book.parcel(*p).ok_or(UnknownRequest)?;
                    units += info.size;
                }
                if pax > ctx.cfg.pax_capacity {
                    return Err(PaxCapacity);
                }
                if units > ctx.cfg.parcel_capacity {
                    return Err(ParcelCapacity);
                }
            }
            node = stop.node;
            time = stop.planned_departure_s;
        }
        Ok(dist)
    }
}

/// Full feasibility check; `Ok` or the first violated constraint.
pub fn is_feasible(s: &Schedule, ctx: &PlanningCtx) -> Result<(), Violation> {
    s.clone().evaluate(ctx).map(|_| ())
}

fn consider(best: &mut Option<Insertion>, mut cand: Schedule, ctx: &PlanningCtx) {
    let Ok(distance_m) = cand.evaluate(ctx) else {
        return;
    };
    let objective_m = distance_m - ctx.cfg.assignment_reward_m * cand.request_count() as f64;
    let better = match best {
        None => true,
        Some(b) => objective_m < b.objective_m,
    };
    if better {
        *best = Some(Insertion {
            schedule: cand,
            distance_m,
            objective_m,
        });
    }
}

fn best_pair_insertion(s: &Schedule, pu: &Stop, doff: &Stop, ctx: &PlanningCtx) -> Option<Insertion> {
    let n = s.stops.len();
    let mut best = None;
    for i in 0..=n {
        for j in i..=n {
            consider(&mut best, with_pair(s, i, j, pu, doff), ctx);
        }
    }
    best
}

fn best_single_insertion(
    s: &Schedule,
    stop: &Stop,
    lo: usize,
    ctx: &PlanningCtx,
) -> Option<Insertion> {
    let mut best = None;
    for i in lo..=s.stops.len() {
        consider(&mut best, with_single(s, i, stop), ctx);
    }
    best
}

fn with_pair(base: &Schedule, i: usize, j: usize, pu: &Stop, doff: &Stop) -> Schedule {
    let mut s = base.clone();
    s.stops.insert(j, doff.clone());
    s.stops.insert(i, pu.clone());
    s.canonicalize();
    s
}

fn with_single(base: &Schedule, i: usize, stop: &Stop) -> Schedule {
    let mut s = base.clone();
    s.stops.insert(i, stop.clone());
    s.canonicalize();
    s
}

/// Best feasible insertion of a customer's pick-up and drop-off pair.
/// Position pairs are tried pick-up-position first, drop-off second; among
/// equal objectives the earliest pair wins.
pub fn insert_customer(s: &Schedule, customer: CustomerId, ctx: &PlanningCtx) -> Option<Insertion> {
    let info = ctx.book.customer(customer)?;
    let pu = Stop::at(info.origin).board_customer(customer);
    let doff = Stop::at(info.destination).alight_customer(customer);
    best_pair_insertion(s, &pu, &doff, ctx)
}

/// Best feasible insertion of both parcel stops.
pub fn insert_parcel(s: &Schedule, parcel: ParcelId, ctx: &PlanningCtx) -> Option<Insertion> {
    let info = ctx.book.parcel(parcel)?;
    let pu = Stop::at(info.origin).board_parcel(parcel);
    let doff = Stop::at(info.destination).alight_parcel(parcel);
    best_pair_insertion(s, &pu, &doff, ctx)
}

/// Best feasible insertion of only the parcel's pick-up stop; the schedule
/// then carries the parcel without a scheduled drop-off.
pub fn insert_parcel_origin(s: &Schedule, parcel: ParcelId, ctx: &PlanningCtx) -> Option<Insertion> {
    let info = ctx.book.parcel(parcel)?;
    let pu = Stop::at(info.origin).board_parcel(parcel);
    best_single_insertion(s, &pu, 0, ctx)
}

/// Best feasible insertion of only the parcel's drop-off stop. The parcel
/// must be aboard or have a scheduled pick-up on this schedule.
pub fn insert_parcel_destination(
    s: &Schedule,
    parcel: ParcelId,
    ctx: &PlanningCtx,
) -> Option<Insertion> {
    let info = ctx.book.parcel(parcel)?;
    let doff = Stop::at(info.destination).alight_parcel(parcel);
    let lo = if s.onboard_parcels.contains(&parcel) {
        0
    } else {
        let pu_pos = s
            .stops
            .iter()
            .position(|stop| stop.boarding_parcels.contains(&parcel))?;
        pu_pos + 1
    };
    best_single_insertion(s, &doff, lo, ctx)
}

/// Debug/golden dump: one line per stop,
/// `vehicle_id,seq,node,arrival_s,departure_s,board_cust,alight_cust,board_parcels,alight_parcels`;
/// multi-valued fields join ids with `;`.
pub fn dump_stops(vehicle_id: u32, s: &Schedule, net: &Network) -> String {
    fn join<T: fmt::Display>(set: &BTreeSet<T>) -> String {
        set.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
    let mut out = String::new();
    for (seq, stop) in s.stops.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            vehicle_id,
            seq,
            net.node_name(stop.node),
            stop.planned_arrival_s,
            stop.planned_departure_s,
            join(&stop.boarding_customers),
            join(&stop.alighting_customers),
            join(&stop.boarding_parcels),
            join(&stop.alighting_parcels),
        ));
    }
    out
}
