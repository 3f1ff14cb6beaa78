//! Demand synthesis: Poisson customer sampling from hourly OD matrices and
//! parcel aggregation from raw shipment records.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use thiserror::Error;

use crate::csvio;
use crate::network::{Network, NodeId, ZoneId, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CustomerId(pub u32);

impl fmt::Display for CustomerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParcelId(pub u32);

impl fmt::Display for ParcelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerRequest {
    pub id: CustomerId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub request_time_s: u32,
}

/// Aggregated parcel demand; exactly one endpoint is a depot. `size` counts
/// the raw parcels merged into this request.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcelRequest {
    pub id: ParcelId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub size: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParcelDirection {
    /// Depot to customer.
    Delivery,
    /// Customer to depot.
    Pickup,
}

/// One shipment record before sub-sampling and aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawParcel {
    pub depot: NodeId,
    pub customer_node: NodeId,
    pub direction: ParcelDirection,
}

impl RawParcel {
    pub fn od(&self) -> (NodeId, NodeId) {
        match self.direction {
            ParcelDirection::Delivery => (self.depot, self.customer_node),
            ParcelDirection::Pickup => (self.customer_node, self.depot),
        }
    }
}

#[derive(Debug, Error)]
pub enum DemandError {
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("demand: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Expected hourly trip counts per ordered zone pair.
#[derive(Debug, Clone, Default)]
pub struct OdMatrixSet {
    hours: Vec<BTreeMap<(ZoneId, ZoneId), f64>>,
}

impl OdMatrixSet {
    pub fn new() -> OdMatrixSet {
        OdMatrixSet {
            hours: (0..HOURS).map(|_| BTreeMap::new()).collect(),
        }
    }

    pub fn set(
        &mut self,
        hour: usize,
        from: ZoneId,
        to: ZoneId,
        trips: f64,
    ) -> Result<(), DemandError> {
        if hour >= HOURS {
            return Err(DemandError::Invalid(format!("hour {hour} out of range")));
        }
        if !(trips >= 0.0) || !trips.is_finite() {
            return Err(DemandError::Invalid(format!(
                "trip count must be finite and >= 0, got {trips}"
            )));
        }
        if self.hours[hour].insert((from, to), trips).is_some() {
            return Err(DemandError::Invalid(format!(
                "duplicate matrix entry for hour {hour}, zones {from} -> {to}"
            )));
        }
        Ok(())
    }

    pub fn hour(&self, hour: usize) -> &BTreeMap<(ZoneId, ZoneId), f64> {
        &self.hours[hour]
    }

    pub fn total_trips(&self) -> f64 {
        self.hours.iter().flat_map(|m| m.values()).sum()
    }
}

fn wrap(path: &Path, (line, msg): (usize, String)) -> DemandError {
    DemandError::Parse {
        file: path.display().to_string(),
        line,
        msg,
    }
}

/// Loads an OD matrix file with header `hour,origin_zone,destination_zone,trips`.
pub fn load_od_matrix(path: &Path, net: &Network) -> Result<OdMatrixSet, DemandError> {
    let rows = csvio::read_table(path, "hour,origin_zone,destination_zone,trips")
        .map_err(|e| wrap(path, e))?;
    let mut od = OdMatrixSet::new();
    for row in &rows {
        let hour: usize = csvio::field(row, 0, "hour").map_err(|e| wrap(path, e))?;
        let from = csvio::ident(row, 1, "zone id").map_err(|e| wrap(path, e))?;
        let to = csvio::ident(row, 2, "zone id").map_err(|e| wrap(path, e))?;
        let trips: f64 = csvio::field(row, 3, "trip count").map_err(|e| wrap(path, e))?;
        let lookup = |name: &str| {
            net.zone_id(name).ok_or_else(|| DemandError::Parse {
                file: path.display().to_string(),
                line: row.line,
                msg: format!("unknown zone `{name}`"),
            })
        };
        od.set(hour, lookup(&from)?, lookup(&to)?, trips)?;
    }
    Ok(od)
}

/// Loads a raw parcel file with header `depot_node,customer_node,direction`.
pub fn load_raw_parcels(path: &Path, net: &Network) -> Result<Vec<RawParcel>, DemandError> {
    let rows =
        csvio::read_table(path, "depot_node,customer_node,direction").map_err(|e| wrap(path, e))?;
    let mut raw = Vec::with_capacity(rows.len());
    for row in &rows {
        let bad = |msg: String| DemandError::Parse {
            file: path.display().to_string(),
            line: row.line,
            msg,
        };
        let depot_name = csvio::ident(row, 0, "node id").map_err(|e| wrap(path, e))?;
        let customer_name = csvio::ident(row, 1, "node id").map_err(|e| wrap(path, e))?;
        let depot = net
            .node_id(&depot_name)
            .ok_or_else(|| bad(format!("unknown node `{depot_name}`")))?;
        let customer_node = net
            .node_id(&customer_name)
            .ok_or_else(|| bad(format!("unknown node `{customer_name}`")))?;
        if !net.depots().contains(&depot) {
            return Err(bad(format!("node `{depot_name}` is not a depot")));
        }
        if depot == customer_node {
            return Err(bad("parcel origin equals destination".into()));
        }
        let direction = match row.fields[2].as_str() {
            "delivery" => ParcelDirection::Delivery,
            "pickup" => ParcelDirection::Pickup,
            other => return Err(bad(format!("unknown direction `{other}`"))),
        };
        raw.push(RawParcel {
            depot,
            customer_node,
            direction,
        });
    }
    Ok(raw)
}

/// Draws one day of customer requests. Hours ascend, zone pairs follow map
/// order, so the draw sequence and thus the output are fixed by the seed.
pub fn sample_customers(
    od: &OdMatrixSet,
    net: &Network,
    penetration: f64,
    seed: u64,
) -> Result<Vec<CustomerRequest>, DemandError> {
    if !(0.0..=1.0).contains(&penetration) {
        return Err(DemandError::Invalid(format!(
            "penetration must be within [0, 1], got {penetration}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = Vec::new();
    for hour in 0..HOURS {
        for (&(a, b), &mean) in od.hour(hour) {
            let lambda = mean * penetration;
            if lambda <= 0.0 {
                continue;
            }
            let dist = rand_distr::Poisson::new(lambda)
                .map_err(|e| DemandError::Invalid(format!("poisson mean {lambda}: {e}")))?;
            let count = dist.sample(&mut rng) as u64;
            for _ in 0..count {
                let t = hour as u32 * 3600 + rng.gen_range(0..3600u32);
                let origin = draw_node(&mut rng, net, a);
                let mut destination = draw_node(&mut rng, net, b);
                let mut redraws = 0;
                while destination == origin {
                    if redraws == 100 {
                        return Err(DemandError::Invalid(format!(
                            "cannot draw a destination distinct from {} within zone {}",
                            net.node_name(origin),
                            net.zone_name(b)
                        )));
                    }
                    destination = draw_node(&mut rng, net, b);
                    redraws += 1;
                }
                out.push(CustomerRequest {
                    id: CustomerId(0),
                    origin,
                    destination,
                    request_time_s: t,
                });
            }
        }
    }
    out.sort_by_key(|r| r.request_time_s);
    for (i, r) in out.iter_mut().enumerate() {
        r.id = CustomerId(i as u32);
    }
    Ok(out)
}

fn draw_node(rng: &mut ChaCha8Rng, net: &Network, zone: ZoneId) -> NodeId {
    let nodes = net.zone_nodes(zone);
    nodes[rng.gen_range(0..nodes.len())]
}

/// Sub-samples `floor(share * |raw|)` records without replacement and merges
/// same-OD records into requests of at most `parcel_capacity` units.
pub fn build_parcels(
    raw: &[RawParcel],
    share: f64,
    parcel_capacity: u32,
    seed: u64,
) -> Result<Vec<ParcelRequest>, DemandError> {
    if !(share > 0.0 && share <= 1.0) {
        return Err(DemandError::Invalid(format!(
            "parcel share must be within (0, 1], got {share}"
        )));
    }
    if parcel_capacity == 0 {
        return Err(DemandError::Invalid("parcel capacity must be >= 1".into()));
    }
    let k = (share * raw.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut groups: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
    if k > 0 {
        for idx in rand::seq::index::sample(&mut rng, raw.len(), k) {
            *groups.entry(raw[idx].od()).or_insert(0) += 1;
        }
    }
    let mut out = Vec::new();
    for ((origin, destination), mut n) in groups {
        while n > 0 {
            let size = n.min(parcel_capacity);
            out.push(ParcelRequest {
                id: ParcelId(out.len() as u32),
                origin,
                destination,
                size,
            });
            n -= size;
        }
    }
    Ok(out)
}

/// Writes a customer dump with header `id,origin,destination,request_time_s`.
pub fn write_customer_dump(
    path: &Path,
    customers: &[CustomerRequest],
    net: &Network,
) -> Result<(), DemandError> {
    let mut s = String::from("id,origin,destination,request_time_s\n");
    for c in customers {
        s.push_str(&format!(
            "{},{},{},{}\n",
            c.id.0,
            net.node_name(c.origin),
            net.node_name(c.destination),
            c.request_time_s
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Loads a customer dump; output is sorted by (request_time_s, id).
pub fn load_customer_dump(path: &Path, net: &Network) -> Result<Vec<CustomerRequest>, DemandError> {
    let rows = csvio::read_table(path, "id,origin,destination,request_time_s")
        .map_err(|e| wrap(path, e))?;
    let mut out = Vec::with_capacity(rows.len());
    let mut seen = std::collections::BTreeSet::new();
    for row in &rows {
        let bad = |msg: String| DemandError::Parse {
            file: path.display().to_string(),
            line: row.line,
            msg,
        };
        let id: u32 = csvio::field(row, 0, "id").map_err(|e| wrap(path, e))?;
        let origin = node_field(row, 1, net, path)?;
        let destination = node_field(row, 2, net, path)?;
        let t: u32 = csvio::field(row, 3, "request time").map_err(|e| wrap(path, e))?;
        if !seen.insert(id) {
            return Err(bad(format!("duplicate request id {id}")));
        }
        if origin == destination {
            return Err(bad("origin equals destination".into()));
        }
        if t >= 86_400 {
            return Err(bad(format!("request time {t} outside the day")));
        }
        out.push(CustomerRequest {
            id: CustomerId(id),
            origin,
            destination,
            request_time_s: t,
        });
    }
    out.sort_by_key(|r| (r.request_time_s, r.id));
    Ok(out)
}

/// Writes a parcel dump with header `id,origin,destination,size`.
pub fn write_parcel_dump(
    path: &Path,
    parcels: &[ParcelRequest],
    net: &Network,
) -> Result<(), DemandError> {
    let mut s = String::from("id,origin,destination,size\n");
    for p in parcels {
        s.push_str(&format!(
            "{},{},{},{}\n",
            p.id.0,
            net.node_name(p.origin),
            net.node_name(p.destination),
            p.size
        ));
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Loads a parcel dump; output is sorted by id.
pub fn load_parcel_dump(path: &Path, net: &Network) -> Result<Vec<ParcelRequest>, DemandError> {
    let rows = csvio::read_table(path, "id,origin,destination,size").map_err(|e| wrap(path, e))?;
    let mut out = Vec::with_capacity(rows.len());
    let mut seen = std::collections::BTreeSet::new();
    for row in &rows {
        let bad = |msg: String| DemandError::Parse {
            file: path.display().to_string(),
            line: row.line,
            msg,
        };
        let id: u32 = csvio::field(row, 0, "id").map_err(|e| wrap(path, e))?;
        let origin = node_field(row, 1, net, path)?;
        let destination = node_field(row, 2, net, path)?;
        let size: u32 = csvio::field(row, 3, "size").map_err(|e| wrap(path, e))?;
        if !seen.insert(id) {
            return Err(bad(format!("duplicate request id {id}")));
        }
        if origin == destination {
            return Err(bad("origin equals destination".into()));
        }
        if size == 0 {
            return Err(bad("size must be >= 1".into()));
        }
        let depot_endpoints =
            net.depots().contains(&origin) as u8 + net.depots().contains(&destination) as u8;
        if depot_endpoints != 1 {
            return Err(bad("exactly one endpoint must be a depot".into()));
        }
        out.push(ParcelRequest {
            id: ParcelId(id),
            origin,
            destination,
            size,
        });
    }
    out.sort_by_key(|r| r.id);
    Ok(out)
}

fn node_field(
    row: &csvio::Row,
    col: usize,
    net: &Network,
    path: &Path,
) -> Result<NodeId, DemandError> {
    let name = csvio::ident(row, col, "node id").map_err(|e| wrap(path, e))?;
    net.node_id(&name).ok_or_else(|| DemandError::Parse {
        file: path.display().to_string(),
        line: row.line,
        msg: format!("unknown node `{name}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn line4() -> Network {
        fixture::line4().network().unwrap()
    }

    fn raw(depot: u32, customer: u32, dir: ParcelDirection) -> RawParcel {
        RawParcel {
            depot: NodeId(depot),
            customer_node: NodeId(customer),
            direction: dir,
        }
    }

    #[test]
    fn zero_penetration_yields_no_requests() {
        let net = line4();
        let mut od = OdMatrixSet::new();
        od.set(8, ZoneId(0), ZoneId(3), 50.0).unwrap();
        let reqs = sample_customers(&od, &net, 0.0, 7).unwrap();
        assert!(reqs.is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let net = line4();
        let mut od = OdMatrixSet::new();
        od.set(8, ZoneId(0), ZoneId(3), 6.0).unwrap();
        od.set(9, ZoneId(3), ZoneId(0), 4.0).unwrap();
        let a = sample_customers(&od, &net, 1.0, 42).unwrap();
        let b = sample_customers(&od, &net, 1.0, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_customers(&od, &net, 1.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn requests_stay_inside_their_hour() {
        let net = line4();
        let mut od = OdMatrixSet::new();
        od.set(5, ZoneId(0), ZoneId(2), 30.0).unwrap();
        let reqs = sample_customers(&od, &net, 1.0, 3).unwrap();
        assert!(!reqs.is_empty());
        for r in &reqs {
            assert!(r.request_time_s >= 5 * 3600 && r.request_time_s < 6 * 3600);
            assert_ne!(r.origin, r.destination);
        }
        for w in reqs.windows(2) {
            assert!(w[0].request_time_s <= w[1].request_time_s);
        }
        for (i, r) in reqs.iter().enumerate() {
            assert_eq!(r.id, CustomerId(i as u32));
        }
    }

    #[test]
    fn poisson_mean_matches_over_many_seeds() {
        let net = line4();
        let mut od = OdMatrixSet::new();
        od.set(0, ZoneId(0), ZoneId(1), 4.0).unwrap();
        let mut total = 0usize;
        for seed in 0..10_000u64 {
            total += sample_customers(&od, &net, 0.5, seed).unwrap().len();
        }
        let mean = total as f64 / 10_000.0;
        assert!((1.9..=2.1).contains(&mean), "empirical mean {mean}");
    }

    #[test]
    fn single_node_zone_pair_cannot_draw_distinct_destination() {
        let net = line4();
        let mut od = OdMatrixSet::new();
        od.set(0, ZoneId(1), ZoneId(1), 9.0).unwrap();
        let err = sample_customers(&od, &net, 1.0, 1).unwrap_err();
        assert!(err.to_string().contains("distinct"));
    }

    #[test]
    fn same_od_raw_parcels_aggregate_up_to_capacity() {
        let raw: Vec<RawParcel> = (0..10)
            .map(|_| raw(0, 2, ParcelDirection::Delivery))
            .collect();
        let parcels = build_parcels(&raw, 1.0, 8, 0).unwrap();
        let sizes: Vec<u32> = parcels.iter().map(|p| p.size).collect();
        assert_eq!(sizes, [8, 2]);
        for p in &parcels {
            assert_eq!((p.origin, p.destination), (NodeId(0), NodeId(2)));
        }
        assert_eq!(parcels[0].id, ParcelId(0));
        assert_eq!(parcels[1].id, ParcelId(1));
    }

    #[test]
    fn single_raw_parcel_keeps_size_one() {
        let parcels = build_parcels(&[raw(0, 3, ParcelDirection::Pickup)], 1.0, 8, 0).unwrap();
        assert_eq!(parcels.len(), 1);
        assert_eq!(parcels[0].size, 1);
        // Pickup direction points to the depot.
        assert_eq!((parcels[0].origin, parcels[0].destination), (NodeId(3), NodeId(0)));
    }

    #[test]
    fn share_uses_floor_of_raw_count() {
        let raw: Vec<RawParcel> = (0..100)
            .map(|i| raw(0, 1 + (i % 3), ParcelDirection::Delivery))
            .collect();
        let parcels = build_parcels(&raw, 0.1, 8, 5).unwrap();
        let total: u32 = parcels.iter().map(|p| p.size).sum();
        assert_eq!(total, 10);
    }

    #[test]
    fn sampled_size_sum_matches_subsample_count() {
        for seed in 0..20u64 {
            let raw: Vec<RawParcel> = (0..37)
                .map(|i| raw(0, 1 + (i % 3), ParcelDirection::Delivery))
                .collect();
            let parcels = build_parcels(&raw, 0.4, 3, seed).unwrap();
            let total: u32 = parcels.iter().map(|p| p.size).sum();
            assert_eq!(total, (0.4f64 * 37.0).floor() as u32);
            for p in &parcels {
                assert!(p.size >= 1 && p.size <= 3);
            }
        }
    }

    #[test]
    fn dumps_round_trip() {
        let net = line4();
        let dir = tempfile::tempdir().unwrap();
        let mut od = OdMatrixSet::new();
        od.set(8, ZoneId(0), ZoneId(3), 6.0).unwrap();
        od.set(12, ZoneId(1), ZoneId(3), 3.0).unwrap();
        let customers = sample_customers(&od, &net, 1.0, 9).unwrap();
        assert!(!customers.is_empty());
        let cpath = dir.path().join("customers.csv");
        write_customer_dump(&cpath, &customers, &net).unwrap();
        assert_eq!(load_customer_dump(&cpath, &net).unwrap(), customers);

        let raw: Vec<RawParcel> = (0..6).map(|_| raw(0, 2, ParcelDirection::Delivery)).collect();
        let parcels = build_parcels(&raw, 1.0, 4, 0).unwrap();
        let ppath = dir.path().join("parcels.csv");
        write_parcel_dump(&ppath, &parcels, &net).unwrap();
        assert_eq!(load_parcel_dump(&ppath, &net).unwrap(), parcels);
    }

    #[test]
    fn parcel_dump_requires_exactly_one_depot_endpoint() {
        let net = line4();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("parcels.csv");
        std::fs::write(&path, "id,origin,destination,size\n0,n1,n2,1\n").unwrap();
        let err = load_parcel_dump(&path, &net).unwrap_err();
        assert!(err.to_string().contains("depot"));
    }

    #[test]
    fn od_matrix_file_round_trip() {
        let net = line4();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("od.csv");
        std::fs::write(
            &path,
            "hour,origin_zone,destination_zone,trips\n8,z0,z3,4\n9,z3,z0,4.5\n",
        )
        .unwrap();
        let od = load_od_matrix(&path, &net).unwrap();
        assert_eq!(od.total_trips(), 8.5);
        let z = |n: &str| net.zone_id(n).unwrap();
        assert_eq!(od.hour(8)[&(z("z0"), z("z3"))], 4.0);
    }

    #[test]
    fn od_matrix_rejects_unknown_zone_and_duplicates() {
        let net = line4();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("od.csv");
        std::fs::write(
            &path,
            "hour,origin_zone,destination_zone,trips\n8,zX,z3,4\n",
        )
        .unwrap();
        assert!(load_od_matrix(&path, &net).is_err());
        std::fs::write(
            &path,
            "hour,origin_zone,destination_zone,trips\n8,z0,z3,4\n8,z0,z3,2\n",
        )
        .unwrap();
        assert!(load_od_matrix(&path, &net).is_err());
    }
}
