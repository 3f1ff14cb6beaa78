//! Agent-based simulation of a mobility-on-demand fleet that serves
//! passenger trips and parcel deliveries with the same pooled vehicles.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`] — road graph with hourly travel times and deterministic
//!   fastest-path routing.
//! * [`demand`] — Poisson trip sampling from zone-to-zone matrices and
//!   parcel request construction from raw depot records.
//! * [`schedule`] — vehicle stop sequences, feasibility rules and
//!   best-insertion operators.
//! * [`dispatch`] — fleet state, passenger assignment and schedule commits.
//! * [`strategies`] — the three online parcel assignment strategies
//!   (CDPA, SDPA, SCPA) plus end-of-day forced delivery.
//! * [`rebalance`] — periodic idle-vehicle repositioning driven by a
//!   demand forecast and a transportation problem.
//! * [`baseline`] — separate-truck logistics baseline for the status-quo
//!   comparison.
//! * [`engine`] — the time-stepped simulation loop tying it together.
//! * [`kpi`] — service and fleet indicators computed from the event log.
//! * [`fixture`] — small synthetic networks and demand sets used by tests,
//!   benchmarks and the CLI.

pub mod baseline;
pub mod config;
mod csvio;
pub mod demand;
pub mod dispatch;
pub mod engine;
pub mod event;
pub mod fixture;
pub mod kpi;
pub mod network;
pub mod rebalance;
pub mod schedule;
pub mod strategies;

pub use config::SimConfig;
pub use demand::{CustomerId, CustomerRequest, OdMatrixSet, ParcelId, ParcelRequest};
pub use dispatch::{Fleet, Vehicle, VehicleId};
pub use engine::{run, Demand, SimOutput};
pub use event::{AuditRecord, Event, RebalanceRecord, ReqRef};
pub use kpi::KpiReport;
pub use network::{Network, NodeId, Route, ZoneId};
pub use schedule::{IntegrationMode, Schedule, Stop};
pub use strategies::StrategyKind;
