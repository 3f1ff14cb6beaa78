//! Built-in synthetic scenarios: a four-node line for worked examples and a
//! k-by-k grid for desk-scale benchmarks. Fixtures can be materialised as
//! the CSV input files or built directly in memory.

use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demand::{self, DemandError, OdMatrixSet, ParcelDirection, RawParcel};
use crate::network::{EdgeSpec, Network, NetworkError, HOURS};

/// Hour-of-day demand weights used by the grid fixture; mornings and late
/// afternoons peak, nights stay low.
const HOUR_WEIGHT: [f64; HOURS] = [
    0.2, 0.2, 0.2, 0.2, 0.2, 0.3, 0.6, 1.0, 1.2, 0.9, 0.8, 0.8, 0.8, 0.8, 0.8, 0.9, 1.0, 1.2,
    1.1, 0.9, 0.6, 0.4, 0.3, 0.2,
];

/// Expected daily trips per node of the grid fixture at penetration 1.
const GRID_TRIPS_PER_NODE: f64 = 5.2;

const GRID_SEED: u64 = 0x5eed_f1c5;

/// A complete self-contained scenario input set.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    pub zones: Vec<(String, String)>,
    pub depots: Vec<String>,
    /// (hour, origin zone, destination zone, expected trips)
    pub od_rows: Vec<(usize, String, String, f64)>,
    /// (depot node, customer node, direction)
    pub raw_parcels: Vec<(String, String, ParcelDirection)>,
}

impl Fixture {
    pub fn network(&self) -> Result<Network, NetworkError> {
        Network::new(
            self.nodes.clone(),
            self.edges.clone(),
            self.zones.clone(),
            self.depots.clone(),
        )
    }

    pub fn od(&self, net: &Network) -> Result<OdMatrixSet, DemandError> {
        let mut od = OdMatrixSet::new();
        for (hour, from, to, trips) in &self.od_rows {
            let zone = |name: &str| {
                net.zone_id(name)
                    .ok_or_else(|| DemandError::Invalid(format!("unknown zone `{name}`")))
            };
            od.set(*hour, zone(from)?, zone(to)?, *trips)?;
        }
        Ok(od)
    }

    pub fn raw(&self, net: &Network) -> Result<Vec<RawParcel>, DemandError> {
        let node = |name: &str| {
            net.node_id(name)
                .ok_or_else(|| DemandError::Invalid(format!("unknown node `{name}`")))
        };
        let mut out = Vec::with_capacity(self.raw_parcels.len());
        for (depot, customer, direction) in &self.raw_parcels {
            out.push(RawParcel {
                depot: node(depot)?,
                customer_node: node(customer)?,
                direction: *direction,
            });
        }
        Ok(out)
    }

    /// Writes the six scenario input files into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;

        let mut s = String::from("node_id\n");
        for n in &self.nodes {
            s.push_str(n);
            s.push('\n');
        }
        std::fs::write(dir.join("nodes.csv"), s)?;

        let mut s = String::from("from,to,length_m");
        for i in 0..HOURS {
            s.push_str(&format!(",tt_h{i}"));
        }
        s.push('\n');
        for e in &self.edges {
            s.push_str(&format!("{},{},{}", e.from, e.to, e.length_m));
            for t in e.travel_time_s {
                s.push_str(&format!(",{t}"));
            }
            s.push('\n');
        }
        std::fs::write(dir.join("edges.csv"), s)?;

        let mut s = String::from("node_id,zone_id\n");
        for (n, z) in &self.zones {
            s.push_str(&format!("{n},{z}\n"));
        }
        std::fs::write(dir.join("zones.csv"), s)?;

        let mut s = String::from("node_id\n");
        for d in &self.depots {
            s.push_str(d);
            s.push('\n');
        }
        std::fs::write(dir.join("depots.csv"), s)?;

        let mut s = String::from("hour,origin_zone,destination_zone,trips\n");
        for (h, a, b, trips) in &self.od_rows {
            s.push_str(&format!("{h},{a},{b},{trips}\n"));
        }
        std::fs::write(dir.join("od.csv"), s)?;

        let mut s = String::from("depot_node,customer_node,direction\n");
        for (depot, customer, direction) in &self.raw_parcels {
            let dir_name = match direction {
                ParcelDirection::Delivery => "delivery",
                ParcelDirection::Pickup => "pickup",
            };
            s.push_str(&format!("{depot},{customer},{dir_name}\n"));
        }
        std::fs::write(dir.join("parcels_raw.csv"), s)?;
        Ok(())
    }
}

fn line4_base(tt: [f64; HOURS]) -> Fixture {
    let nodes: Vec<String> = (0..4).map(|i| format!("n{i}")).collect();
    let mut edges = Vec::new();
    for i in 0..3 {
        let (a, b) = (format!("n{i}"), format!("n{}", i + 1));
        edges.push(EdgeSpec {
            from: a.clone(),
            to: b.clone(),
            length_m: 1000.0,
            travel_time_s: tt,
        });
        edges.push(EdgeSpec {
            from: b,
            to: a,
            length_m: 1000.0,
            travel_time_s: tt,
        });
    }
    let zones = nodes.iter().map(|n| (n.clone(), format!("z{}", &n[1..]))).collect();
    Fixture {
        name: String::new(),
        nodes,
        edges,
        zones,
        depots: vec!["n0".into()],
        od_rows: vec![
            (8, "z0".into(), "z3".into(), 4.0),
            (9, "z3".into(), "z0".into(), 4.0),
            (12, "z1".into(), "z3".into(), 2.0),
        ],
        raw_parcels: vec![
            ("n0".into(), "n2".into(), ParcelDirection::Delivery),
            ("n0".into(), "n2".into(), ParcelDirection::Delivery),
            ("n0".into(), "n2".into(), ParcelDirection::Delivery),
            ("n0".into(), "n1".into(), ParcelDirection::Delivery),
            ("n0".into(), "n1".into(), ParcelDirection::Delivery),
            ("n0".into(), "n3".into(), ParcelDirection::Delivery),
        ],
    }
}

/// Four nodes in a line, 1000 m / 60 s edges in both directions, constant
/// over the day; one zone per node; depot at n0.
pub fn line4() -> Fixture {
    let mut f = line4_base([60.0; HOURS]);
    f.name = "line4".into();
    f
}

/// Same topology as line4, but edge times double from noon: 60 s for hours
/// 0-11, 120 s for hours 12-23.
pub fn line4_td() -> Fixture {
    let mut tt = [60.0; HOURS];
    for slot in tt.iter_mut().skip(12) {
        *slot = 120.0;
    }
    let mut f = line4_base(tt);
    f.name = "line4_td".into();
    f
}

/// k-by-k street grid: 500 m edges at 60 s (90 s during hours 7, 8, 17, 18),
/// one zone per node, depots in two opposite corners. Demand covers 3k²
/// random zone pairs shaped by a two-peak hour profile and totals 5.2k²
/// expected daily trips; raw parcels are 0.6k² depot-to-customer deliveries.
pub fn grid(k: u32) -> Fixture {
    assert!(k >= 2, "grid needs at least 2x2 nodes");
    let n = (k * k) as usize;
    let nodes: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();

    let mut tt = [60.0; HOURS];
    for h in [7, 8, 17, 18] {
        tt[h] = 90.0;
    }
    let mut edges = Vec::new();
    let mut link = |a: usize, b: usize| {
        edges.push(EdgeSpec {
            from: format!("n{a}"),
            to: format!("n{b}"),
            length_m: 500.0,
            travel_time_s: tt,
        });
        edges.push(EdgeSpec {
            from: format!("n{b}"),
            to: format!("n{a}"),
            length_m: 500.0,
            travel_time_s: tt,
        });
    };
    for r in 0..k as usize {
        for c in 0..k as usize {
            let i = r * k as usize + c;
            if c + 1 < k as usize {
                link(i, i + 1);
            }
            if r + 1 < k as usize {
                link(i, i + k as usize);
            }
        }
    }

    let width = format!("{}", n - 1).len();
    let zone_name = |i: usize| format!("z{i:0width$}");
    let zones: Vec<(String, String)> = (0..n).map(|i| (format!("n{i}"), zone_name(i))).collect();
    let depots = vec!["n0".to_string(), format!("n{}", n - 1)];

    let mut rng = ChaCha8Rng::seed_from_u64(GRID_SEED);
    let pair_count = (3 * n).min(n * (n - 1));
    let mut pairs: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, n * (n - 1), pair_count)
        .into_iter()
        .map(|idx| {
            let a = idx / (n - 1);
            let rem = idx % (n - 1);
            let b = rem + usize::from(rem >= a);
            (a, b)
        })
        .collect();
    pairs.sort();
    let base: Vec<f64> = pairs.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
    let weight_sum: f64 = HOUR_WEIGHT.iter().sum();
    let base_sum: f64 = base.iter().sum();
    let scale = GRID_TRIPS_PER_NODE * n as f64 / (base_sum * weight_sum);
    let mut od_rows = Vec::with_capacity(HOURS * pairs.len());
    for h in 0..HOURS {
        for (&(a, b), &w) in pairs.iter().zip(&base) {
            od_rows.push((h, zone_name(a), zone_name(b), w * scale * HOUR_WEIGHT[h]));
        }
    }

    let parcel_count = 3 * n / 5;
    let mut raw_parcels = Vec::with_capacity(parcel_count);
    for j in 0..parcel_count {
        let depot = if j % 2 == 0 { 0 } else { n - 1 };
        let mut customer = rng.gen_range(0..n);
        while customer == 0 || customer == n - 1 {
            customer = rng.gen_range(0..n);
        }
        raw_parcels.push((
            format!("n{depot}"),
            format!("n{customer}"),
            ParcelDirection::Delivery,
        ));
    }

    Fixture {
        name: format!("grid{k}x{k}"),
        nodes,
        edges,
        zones,
        depots,
        od_rows,
        raw_parcels,
    }
}

/// Builds a fixture by name: `line4`, `line4_td`, or `grid<k>` (e.g. `grid10`).
pub fn by_name(name: &str) -> Option<Fixture> {
    match name {
        "line4" => Some(line4()),
        "line4_td" => Some(line4_td()),
        _ => {
            let k: u32 = name.strip_prefix("grid")?.parse().ok()?;
            (k >= 2).then(|| grid(k))
        }
    }
}

/// Loads the six files written by [`Fixture::write`] back into memory.
pub fn load_dir(dir: &Path) -> Result<(Network, OdMatrixSet, Vec<RawParcel>), DemandError> {
    let net = crate::network::load_network(
        &dir.join("nodes.csv"),
        &dir.join("edges.csv"),
        &dir.join("zones.csv"),
        &dir.join("depots.csv"),
    )
    .map_err(|e| DemandError::Invalid(e.to_string()))?;
    let od = demand::load_od_matrix(&dir.join("od.csv"), &net)?;
    let raw = demand::load_raw_parcels(&dir.join("parcels_raw.csv"), &net)?;
    Ok((net, od, raw))
}
