//! Idle-vehicle repositioning: a short-horizon demand forecast per zone, a
//! target allotment by largest remainder, and a minimum-cost transport
//! matching between surplus and deficit zones.

use std::collections::BTreeMap;

use crate::demand::OdMatrixSet;
use crate::dispatch::{Fleet, VehicleId};
use crate::network::{Network, NodeId, ZoneId};

/// Expected request counts per zone over the coming period.
#[derive(Debug, Clone)]
pub struct ZoneForecast {
    pub expected: Vec<f64>,
}

/// Integrates origin-zone trip rates over the window `[t_s, t_s + horizon_s)`,
/// splitting it across wall-clock hours and scaling by penetration.
pub fn forecast(
    od: &OdMatrixSet,
    net: &Network,
    penetration: f64,
    t_s: u64,
    horizon_s: u64,
) -> ZoneForecast {
    let mut expected = vec![0.0; net.zone_count()];
    let mut s = t_s;
    let end = t_s + horizon_s;
    while s < end {
        let hour = ((s / 3600) % 24) as usize;
        let seg_end = ((s / 3600 + 1) * 3600).min(end);
        let frac = (seg_end - s) as f64 / 3600.0;
        for (&(origin, _), &mean) in od.hour(hour) {
            expected[origin.0 as usize] += mean * penetration * frac;
        }
        s = seg_end;
    }
    ZoneForecast { expected }
}

/// Zone member minimizing total travel time to the rest of the zone; ties go
/// to the lowest node id.
pub fn zone_centroid(net: &Network, zone: ZoneId, depart_s: f64) -> NodeId {
    let members = net.zone_nodes(zone);
    let mut best: Option<(f64, NodeId)> = None;
    for &c in members {
        let total: f64 = members
            .iter()
            .map(|&m| net.query(c, m, depart_s).expect("connected").0)
            .sum();
        if best.map_or(true, |(b, _)| total < b) {
            best = Some((total, c));
        }
    }
    best.expect("zones are non-empty").1
}

fn largest_remainder(total: u32, weights: &[f64]) -> Vec<u32> {
    let sum: f64 = weights.iter().sum();
    let mut out = vec![0u32; weights.len()];
    if sum <= 0.0 {
        return out;
    }
    let mut assigned = 0u32;
    let mut fractions: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    for (i, w) in weights.iter().enumerate() {
        let quota = total as f64 * w / sum;
        let floor = quota.floor();
        out[i] = floor as u32;
        assigned += out[i];
        fractions.push((quota - floor, i));
    }
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, i) in fractions {
        if assigned == total {
            break;
        }
        out[i] += 1;
        assigned += 1;
    }
    out
}

/// Minimum-cost integer transport between supplies and demands. Returns
/// positive flows as `(supply_index, demand_index, quantity)` in index order.
/// Successive shortest augmenting paths; arc relaxation order is fixed, so
/// equal-cost solutions resolve deterministically.
pub fn transport_flows(supply: &[u32], demand: &[u32], cost: &[Vec<f64>]) -> Vec<(usize, usize, u32)> {
    let ns = supply.len();
    let nd = demand.len();
    let n = ns + nd + 2;
    let src = ns + nd;
    let snk = ns + nd + 1;
    let mut flow = vec![vec![0i64; nd]; ns];
    let mut sup: Vec<i64> = supply.iter().map(|&x| x as i64).collect();
    let mut dem: Vec<i64> = demand.iter().map(|&x| x as i64).collect();

    loop {
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        dist[src] = 0.0;
        loop {
            let mut changed = false;
            for i in 0..ns {
                if sup[i] > 0 && dist[src] < dist[i] {
                    dist[i] = dist[src];
                    prev[i] = src;
                    changed = true;
                }
            }
            for i in 0..ns {
                for j in 0..nd {
                    if dist[i].is_finite() && dist[i] + cost[i][j] < dist[ns + j] {
                        dist[ns + j] = dist[i] + cost[i][j];
                        prev[ns + j] = i;
                        changed = true;
                    }
                    if flow[i][j] > 0
                        && dist[ns + j].is_finite()
                        && dist[ns + j] - cost[i][j] < dist[i]
                    {
                        dist[i] = dist[ns + j] - cost[i][j];
                        prev[i] = ns + j;
                        changed = true;
                    }
                }
            }
            for j in 0..nd {
                if dem[j] > 0 && dist[ns + j] < dist[snk] {
                    dist[snk] = dist[ns + j];
                    prev[snk] = ns + j;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[snk].is_finite() {
            break;
        }

        let mut bottleneck = i64::MAX;
        let mut at = snk;
        while at != src {
            let p = prev[at];
            if p == src {
                bottleneck = bottleneck.min(sup[at]);
            } else if at == snk {
                bottleneck = bottleneck.min(dem[p - ns]);
            } else if p < ns {
                // forward arc supply -> demand has no cap
            } else {
                bottleneck = bottleneck.min(flow[at][p - ns]);
            }
            at = p;
        }
        let mut at = snk;
        while at != src {
            let p = prev[at];
            if p == src {
                sup[at] -= bottleneck;
            } else if at == snk {
                dem[p - ns] -= bottleneck;
            } else if p < ns {
                flow[p][at - ns] += bottleneck;
            } else {
                flow[at][p - ns] -= bottleneck;
            }
            at = p;
        }
    }

    let mut out = Vec::new();
    for (i, row) in flow.iter().enumerate() {
        for (j, &f) in row.iter().enumerate() {
            if f > 0 {
                out.push((i, j, f as u32));
            }
        }
    }
    out
}

/// One planned repositioning trip.
#[derive(Debug, Clone, PartialEq)]
pub struct Repositioning {
    pub vehicle: VehicleId,
    pub from_zone: ZoneId,
    pub to_zone: ZoneId,
    pub target_node: NodeId,
}

/// Matches surplus idle vehicles to deficit zones. Costs are centroid to
/// centroid travel times at `now`; within a zone the lowest vehicle ids move
/// first.
pub fn plan_rebalance(
    fleet: &Fleet,
    fc: &ZoneForecast,
    net: &Network,
    now: f64,
) -> Vec<Repositioning> {
    let total_weight: f64 = fc.expected.iter().sum();
    if total_weight <= 0.0 {
        return Vec::new();
    }
    let mut idle_by_zone: BTreeMap<ZoneId, Vec<VehicleId>> = BTreeMap::new();
    let mut idle_count = vec![0u32; net.zone_count()];
    for v in &fleet.vehicles {
        if v.is_rebalance_idle() {
            let z = net.zone_of(v.plan_node());
            idle_by_zone.entry(z).or_default().push(v.id);
            idle_count[z.0 as usize] += 1;
        }
    }
    let total_idle: u32 = idle_count.iter().sum();
    if total_idle == 0 {
        return Vec::new();
    }
    let desired = largest_remainder(total_idle, &fc.expected);

    let mut supply_zones: Vec<(ZoneId, u32)> = Vec::new();
    let mut demand_zones: Vec<(ZoneId, u32)> = Vec::new();
    for z in 0..net.zone_count() {
        let surplus = idle_count[z] as i64 - desired[z] as i64;
        if surplus > 0 {
            supply_zones.push((ZoneId(z as u32), surplus as u32));
        } else if surplus < 0 {
            demand_zones.push((ZoneId(z as u32), (-surplus) as u32));
        }
    }
    if supply_zones.is_empty() || demand_zones.is_empty() {
        return Vec::new();
    }

    let mut centroids: BTreeMap<ZoneId, NodeId> = BTreeMap::new();
    for &(z, _) in supply_zones.iter().chain(demand_zones.iter()) {
        centroids.insert(z, zone_centroid(net, z, now));
    }
    let cost: Vec<Vec<f64>> = supply_zones
        .iter()
        .map(|&(sz, _)| {
            demand_zones
                .iter()
                .map(|&(dz, _)| {
                    net.query(centroids[&sz], centroids[&dz], now)
                        .expect("connected")
                        .0
                })
                .collect()
        })
        .collect();

    let supply: Vec<u32> = supply_zones.iter().map(|&(_, q)| q).collect();
    let demand: Vec<u32> = demand_zones.iter().map(|&(_, q)| q).collect();
    let flows = transport_flows(&supply, &demand, &cost);

    let mut cursor: BTreeMap<ZoneId, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (i, j, qty) in flows {
        let from_zone = supply_zones[i].0;
        let to_zone = demand_zones[j].0;
        let target_node = centroids[&to_zone];
        let pool = &idle_by_zone[&from_zone];
        let start = *cursor.get(&from_zone).unwrap_or(&0);
        for k in 0..qty as usize {
            out.push(Repositioning {
                vehicle: pool[start + k],
                from_zone,
                to_zone,
                target_node,
            });
        }
        cursor.insert(from_zone, start + qty as usize);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::Vehicle;
    use crate::fixture;
    use crate::network::{EdgeSpec, Network};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line4_net() -> Network {
        fixture::line4().network().unwrap()
    }

    #[test]
    fn forecast_scales_trips_by_penetration_and_overlap() {
        let net = line4_net();
        let z0 = net.zone_id("z0").unwrap();
        let z3 = net.zone_id("z3").unwrap();
        let mut od = OdMatrixSet::new();
        od.set(8, z0, z3, 4.0).unwrap();
        let fc = forecast(&od, &net, 0.05, 8 * 3600, 900);
        assert!((fc.expected[z0.0 as usize] - 0.05).abs() < 1e-12);
        assert_eq!(fc.expected.iter().filter(|&&x| x > 0.0).count(), 1);
    }

    #[test]
    fn forecast_splits_windows_across_hours() {
        let net = line4_net();
        let z0 = net.zone_id("z0").unwrap();
        let z1 = net.zone_id("z1").unwrap();
        let mut od = OdMatrixSet::new();
        od.set(0, z0, z1, 36.0).unwrap();
        od.set(1, z0, z1, 36.0).unwrap();
        let fc = forecast(&od, &net, 1.0, 3500, 900);
        let want = 36.0 * (100.0 / 3600.0) + 36.0 * (800.0 / 3600.0);
        assert!((fc.expected[z0.0 as usize] - want).abs() < 1e-9);
    }

    #[test]
    fn zero_forecast_moves_nothing() {
        let net = line4_net();
        let fleet = Fleet::new(2, &net, 0.0);
        let fc = forecast(&OdMatrixSet::new(), &net, 0.05, 0, 900);
        assert!(plan_rebalance(&fleet, &fc, &net, 0.0).is_empty());
    }

    #[test]
    fn balanced_fleet_stays_put() {
        let net = line4_net();
        let n3 = net.node_id("n3").unwrap();
        let mut fleet = Fleet::new(1, &net, 0.0);
        fleet.vehicles.push(Vehicle::new(VehicleId(1), n3, 0.0));
        let z0 = net.zone_id("z0").unwrap();
        let z3 = net.zone_id("z3").unwrap();
        let mut od = OdMatrixSet::new();
        od.set(0, z0, z3, 2.0).unwrap();
        od.set(0, z3, z0, 2.0).unwrap();
        let fc = forecast(&od, &net, 1.0, 0, 900);
        assert!(plan_rebalance(&fleet, &fc, &net, 0.0).is_empty());
    }

    #[test]
    fn surplus_vehicle_moves_toward_forecast_demand() {
        let net = line4_net();
        let fleet = Fleet::new(1, &net, 0.0);
        let z0 = net.zone_id("z0").unwrap();
        let z3 = net.zone_id("z3").unwrap();
        let mut od = OdMatrixSet::new();
        od.set(0, z3, z0, 5.0).unwrap();
        let fc = forecast(&od, &net, 1.0, 0, 900);
        let moves = plan_rebalance(&fleet, &fc, &net, 0.0);
        assert_eq!(
            moves,
            vec![Repositioning {
                vehicle: VehicleId(0),
                from_zone: z0,
                to_zone: z3,
                target_node: net.node_id("n3").unwrap(),
            }]
        );
    }

    #[test]
    fn largest_remainder_is_exact_and_breaks_ties_low() {
        let out = largest_remainder(2, &[1.0, 1.0, 1.0]);
        assert_eq!(out, vec![1, 1, 0]);
        let out = largest_remainder(7, &[0.5, 0.25, 0.25]);
        assert_eq!(out.iter().sum::<u32>(), 7);
        assert_eq!(out, vec![3, 2, 2]);
    }

    #[test]
    fn centroid_picks_the_travel_time_median_node() {
        let nodes = vec!["a".into(), "b".into(), "c".into()];
        let mut edges = Vec::new();
        for (u, v) in [("a", "b"), ("b", "c")] {
            edges.push(EdgeSpec::constant(u, v, 1000.0, 60.0));
            edges.push(EdgeSpec::constant(v, u, 1000.0, 60.0));
        }
        let zones = nodes
            .iter()
            .map(|n: &String| (n.clone(), "z0".to_string()))
            .collect();
        let net = Network::new(nodes.clone(), edges, zones, vec!["a".into()]).unwrap();
        assert_eq!(zone_centroid(&net, ZoneId(0), 0.0), NodeId(1));
    }

    fn brute_min_cost(supply: &[u32], demand: &[u32], cost: &[Vec<f64>]) -> f64 {
        fn rec(
            cell: usize,
            sup: &mut Vec<i64>,
            dem: &mut Vec<i64>,
            cost: &[Vec<f64>],
            acc: f64,
            best: &mut f64,
        ) {
            let nd = dem.len();
            if cell == sup.len() * nd {
                if sup.iter().all(|&x| x == 0) && dem.iter().all(|&x| x == 0) && acc < *best {
                    *best = acc;
                }
                return;
            }
            let (i, j) = (cell / nd, cell % nd);
            let max = sup[i].min(dem[j]);
            for f in 0..=max {
                sup[i] -= f;
                dem[j] -= f;
                rec(cell + 1, sup, dem, cost, acc + f as f64 * cost[i][j], best);
                sup[i] += f;
                dem[j] += f;
            }
        }
        let mut best = f64::INFINITY;
        rec(
            0,
            &mut supply.iter().map(|&x| x as i64).collect(),
            &mut demand.iter().map(|&x| x as i64).collect(),
            cost,
            0.0,
            &mut best,
        );
        best
    }

    #[test]
    fn transport_cost_matches_exhaustive_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let ns = rng.gen_range(1..=3);
            let nd = rng.gen_range(1..=3);
            let mut supply: Vec<u32> = (0..ns).map(|_| rng.gen_range(0..=3)).collect();
            let total: u32 = supply.iter().sum();
            if total == 0 {
                supply[0] = 1;
            }
            let total: u32 = supply.iter().sum();
            let mut demand = vec![0u32; nd];
            for _ in 0..total {
                demand[rng.gen_range(0..nd)] += 1;
            }
            let cost: Vec<Vec<f64>> = (0..ns)
                .map(|_| (0..nd).map(|_| rng.gen_range(1..=9) as f64 * 60.0).collect())
                .collect();
            let flows = transport_flows(&supply, &demand, &cost);
            let got: f64 = flows.iter().map(|&(i, j, q)| q as f64 * cost[i][j]).sum();
            let mut shipped_row = vec![0u32; ns];
            let mut shipped_col = vec![0u32; nd];
            for &(i, j, q) in &flows {
                shipped_row[i] += q;
                shipped_col[j] += q;
            }
            assert_eq!(shipped_row, supply);
            assert_eq!(shipped_col, demand);
            assert_eq!(got, brute_min_cost(&supply, &demand, &cost));
        }
    }
}
