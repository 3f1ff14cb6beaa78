//! Scenario files: one TOML document naming the input directory, the run
//! selection, parameter overrides, and optional sweep axes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use rpp_core::demand::{
    load_customer_dump, load_parcel_dump, sample_customers, CustomerRequest, ParcelRequest,
    RawParcel,
};
use rpp_core::schedule::IntegrationMode;
use rpp_core::{Demand, Network, OdMatrixSet, SimConfig, StrategyKind};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    inputs: PathBuf,
    out: PathBuf,
    strategy: String,
    mode: String,
    #[serde(default)]
    config: ConfigPatch,
    replay: Option<ReplayBlock>,
    sweep: Option<SweepBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplayBlock {
    customers: PathBuf,
    parcels: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepBlock {
    thresholds: Option<Vec<f64>>,
    parcel_shares: Option<Vec<f64>>,
    strategies: Option<Vec<String>>,
    modes: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
}

/// Optional overrides over [`SimConfig::default`]; field names match.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigPatch {
    pax_capacity: Option<u32>,
    parcel_capacity: Option<u32>,
    max_wait_s: Option<f64>,
    detour_factor: Option<f64>,
    boarding_time_s: Option<f64>,
    assignment_reward_m: Option<f64>,
    threshold: Option<f64>,
    repo_period_s: Option<u32>,
    parcel_deadline_s: Option<u32>,
    truck_capacity: Option<u32>,
    scpa_background_dropoff: Option<bool>,
    step_s: Option<u32>,
    start_s: Option<u32>,
    end_s: Option<u32>,
    fleet_size: Option<u32>,
    penetration: Option<f64>,
    parcel_share: Option<f64>,
    seed: Option<u64>,
}

impl ConfigPatch {
    fn apply(&self, cfg: &mut SimConfig) {
        macro_rules! patch {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        patch!(
            pax_capacity,
            parcel_capacity,
            max_wait_s,
            detour_factor,
            boarding_time_s,
            assignment_reward_m,
            threshold,
            repo_period_s,
            parcel_deadline_s,
            truck_capacity,
            scpa_background_dropoff,
            step_s,
            start_s,
            end_s,
            fleet_size,
            penetration,
            parcel_share,
            seed
        );
    }
}

/// A parsed scenario with all paths resolved against the file's directory.
#[derive(Debug)]
pub struct Scenario {
    pub inputs: PathBuf,
    pub out: PathBuf,
    pub strategy: StrategyKind,
    pub mode: IntegrationMode,
    pub cfg: SimConfig,
    pub replay: Option<(PathBuf, PathBuf)>,
    pub sweep: Sweep,
}

/// Sweep axes; each axis defaults to the scenario's single value.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub thresholds: Vec<f64>,
    pub parcel_shares: Vec<f64>,
    pub strategies: Vec<StrategyKind>,
    pub modes: Vec<IntegrationMode>,
    pub seeds: Vec<u64>,
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub threshold: f64,
    pub parcel_share: f64,
    pub strategy: StrategyKind,
    pub mode: IntegrationMode,
    pub seed: u64,
}

impl Cell {
    pub fn dir_name(&self) -> String {
        format!(
            "th{}_sh{}_{}_{}_s{}",
            self.threshold, self.parcel_share, self.strategy, self.mode, self.seed
        )
    }
}

impl Sweep {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &threshold in &self.thresholds {
            for &parcel_share in &self.parcel_shares {
                for &strategy in &self.strategies {
                    for &mode in &self.modes {
                        for &seed in &self.seeds {
                            out.push(Cell {
                                threshold,
                                parcel_share,
                                strategy,
                                mode,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    let file: ScenarioFile = toml::from_str(&text)
        .with_context(|| format!("parsing scenario {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let strategy: StrategyKind = file.strategy.parse().map_err(|e: String| anyhow!(e))?;
    let mode: IntegrationMode = file.mode.parse().map_err(|e: String| anyhow!(e))?;

    let mut cfg = SimConfig::default();
    file.config.apply(&mut cfg);
    cfg.validate()?;

    let sweep_block = file.sweep.unwrap_or_default();
    let parse_all = |names: Option<Vec<String>>, single: StrategyKind| -> Result<Vec<StrategyKind>> {
        match names {
            None => Ok(vec![single]),
            Some(list) => list
                .iter()
                .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
                .collect(),
        }
    };
    let modes = match sweep_block.modes {
        None => vec![mode],
        Some(list) => list
            .iter()
            .map(|s| s.parse().map_err(|e: String| anyhow!(e)))
            .collect::<Result<Vec<IntegrationMode>>>()?,
    };
    let sweep = Sweep {
        thresholds: sweep_block.thresholds.unwrap_or_else(|| vec![cfg.threshold]),
        parcel_shares: sweep_block
            .parcel_shares
            .unwrap_or_else(|| vec![cfg.parcel_share]),
        strategies: parse_all(sweep_block.strategies, strategy)?,
        modes,
        seeds: sweep_block.seeds.unwrap_or_else(|| vec![cfg.seed]),
    };
    for axis in [&sweep.thresholds, &sweep.parcel_shares] {
        if axis.is_empty() {
            bail!("sweep axes must not be empty lists");
        }
    }
    if sweep.strategies.is_empty() || sweep.modes.is_empty() || sweep.seeds.is_empty() {
        bail!("sweep axes must not be empty lists");
    }

    Ok(Scenario {
        inputs: resolve(base, &file.inputs),
        out: resolve(base, &file.out),
        strategy,
        mode,
        cfg,
        replay: file
            .replay
            .map(|r| (resolve(base, &r.customers), resolve(base, &r.parcels))),
        sweep,
    })
}

/// Scenario inputs loaded into memory, shared by every cell of a sweep.
pub struct Inputs {
    pub net: Network,
    pub od: OdMatrixSet,
    pub raw: Vec<RawParcel>,
    pub replay: Option<(Vec<CustomerRequest>, Vec<ParcelRequest>)>,
}

pub fn load_inputs(scenario: &Scenario) -> Result<Inputs> {
    let (net, od, raw) = rpp_core::fixture::load_dir(&scenario.inputs)
        .with_context(|| format!("loading inputs from {}", scenario.inputs.display()))?;
    let replay = match &scenario.replay {
        None => None,
        Some((customers, parcels)) => Some((
            load_customer_dump(customers, &net)
                .with_context(|| format!("loading {}", customers.display()))?,
            load_parcel_dump(parcels, &net)
                .with_context(|| format!("loading {}", parcels.display()))?,
        )),
    };
    Ok(Inputs {
        net,
        od,
        raw,
        replay,
    })
}

/// Builds the demand for one cell: either the fixed replay dumps or a fresh
/// sample under the cell's seed and parcel share.
pub fn cell_demand(inputs: &Inputs, cfg: &SimConfig) -> Result<Demand> {
    let (customers, parcels) = match &inputs.replay {
        Some((c, p)) => (c.clone(), p.clone()),
        None => {
            let parcels = if cfg.parcel_share == 0.0 {
                Vec::new()
            } else {
                rpp_core::demand::build_parcels(
                    &inputs.raw,
                    cfg.parcel_share,
                    cfg.parcel_capacity,
                    cfg.seed,
                )?
            };
            (
                sample_customers(&inputs.od, &inputs.net, cfg.penetration, cfg.seed)?,
                parcels,
            )
        }
    };
    Ok(Demand {
        customers,
        parcels,
        od: inputs.od.clone(),
    })
}
