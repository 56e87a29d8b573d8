//! Static network description and its TOML case-file format.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RAMP_TAU_S: f64 = 5.0;
/// Default droop gain as a multiple of P_max (5% droop).
pub const DEFAULT_DROOP_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaseError {
    #[error("case document does not parse: {0}")]
    Parse(String),
    #[error("system: {0}")]
    System(String),
    #[error("bus {0} defined more than once")]
    DuplicateBus(u32),
    #[error("branch {0} defined more than once")]
    DuplicateBranch(String),
    #[error("generator {0} defined more than once")]
    DuplicateGenerator(String),
    #[error("{record} references missing bus {bus}")]
    DanglingBus { record: String, bus: u32 },
    #[error("branch {0} has non-positive reactance")]
    NonPositiveReactance(String),
    #[error("generator {id}: {reason}")]
    Generator { id: String, reason: String },
    #[error("bus {id}: {reason}")]
    Bus { id: u32, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    #[serde(default = "default_base")]
    pub base_mva: f64,
    #[serde(default = "default_freq")]
    pub frequency_hz: f64,
}

fn default_base() -> f64 {
    100.0
}
fn default_freq() -> f64 {
    60.0
}
fn default_true() -> bool {
    true
}
fn default_ckt() -> String {
    "1".into()
}
fn default_vset() -> f64 {
    1.0
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            base_mva: default_base(),
            frequency_hz: default_freq(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substation {
    pub id: u16,
    pub name: String,
    /// Boundary equivalents outside the modelled area; no outstation is generated for them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub external: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub substation: u16,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub nominal_kv: f64,
    #[serde(default)]
    pub load_mw: f64,
    #[serde(default)]
    pub load_mvar: f64,
    /// Positive values inject reactive power (capacitive).
    #[serde(default)]
    pub shunt_mvar: f64,
}

impl Bus {
    pub fn has_load(&self) -> bool {
        self.load_mw != 0.0 || self.load_mvar != 0.0
    }

    pub fn has_shunt(&self) -> bool {
        self.shunt_mvar != 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: String,
    pub from: u32,
    pub to: u32,
    pub circuit: String,
    /// Series reactance, pu on system base.
    pub x: f64,
    /// Total line charging susceptance, pu.
    pub charging: f64,
    pub rating_mva: f64,
    pub closed: bool,
    pub transformer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: u32,
    pub p_init: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// MW per unit frequency deviation.
    pub droop_gain: f64,
    pub ramp_tau: f64,
    pub vset: f64,
    pub online: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    id: Option<String>,
    from: u32,
    to: u32,
    #[serde(default = "default_ckt")]
    circuit: String,
    x: f64,
    #[serde(default)]
    charging: f64,
    #[serde(default)]
    rating_mva: f64,
    #[serde(default = "default_true")]
    closed: bool,
    #[serde(default)]
    transformer: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    id: Option<String>,
    bus: u32,
    #[serde(default = "default_ckt")]
    circuit: String,
    p_init: f64,
    #[serde(default)]
    p_min: f64,
    p_max: f64,
    droop_gain: Option<f64>,
    ramp_tau: Option<f64>,
    #[serde(default = "default_vset")]
    vset: f64,
    #[serde(default = "default_true")]
    online: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    #[serde(default)]
    name: String,
    #[serde(default)]
    system: SystemParams,
    #[serde(default, rename = "substation")]
    substations: Vec<Substation>,
    #[serde(default, rename = "bus")]
    buses: Vec<Bus>,
    #[serde(default, rename = "branch")]
    branches: Vec<RawBranch>,
    #[serde(default, rename = "generator")]
    generators: Vec<RawGenerator>,
}

/// A validated network case. Construct with [`GridCase::from_toml`] or [`GridCase::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub name: String,
    pub system: SystemParams,
    pub substations: Vec<Substation>,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    bus_index: HashMap<u32, usize>,
    branch_index: HashMap<String, usize>,
    gen_index: HashMap<String, usize>,
}

/// Serializable form used when writing a case back out.
#[derive(Serialize)]
struct CaseDoc<'a> {
    name: &'a str,
    system: &'a SystemParams,
    #[serde(rename = "substation")]
    substations: &'a [Substation],
    #[serde(rename = "bus")]
    buses: &'a [Bus],
    #[serde(rename = "branch")]
    branches: &'a [Branch],
    #[serde(rename = "generator")]
    generators: &'a [Generator],
}

impl GridCase {
    pub fn from_toml(text: &str) -> Result<Self, CaseError> {
        let raw: RawCase = toml::from_str(text).map_err(|e| CaseError::Parse(e.to_string()))?;
        let branches = raw
            .branches
            .into_iter()
            .map(|b| Branch {
                id: b
                    .id
                    .unwrap_or_else(|| format!("{}_{}_{}", b.from, b.to, b.circuit)),
                from: b.from,
                to: b.to,
                circuit: b.circuit,
                x: b.x,
                charging: b.charging,
                rating_mva: b.rating_mva,
                closed: b.closed,
                transformer: b.transformer,
            })
            .collect();
        let generators = raw
            .generators
            .into_iter()
            .map(|g| Generator {
                id: g.id.unwrap_or_else(|| format!("{}_{}", g.bus, g.circuit)),
                bus: g.bus,
                p_init: g.p_init,
                p_min: g.p_min,
                p_max: g.p_max,
                droop_gain: g.droop_gain.unwrap_or(DEFAULT_DROOP_FACTOR * g.p_max),
                ramp_tau: g.ramp_tau.unwrap_or(DEFAULT_RAMP_TAU_S),
                vset: g.vset,
                online: g.online,
            })
            .collect();
        Self::new(
            raw.name,
            raw.system,
            raw.substations,
            raw.buses,
            branches,
            generators,
        )
    }

    pub fn new(
        name: String,
        system: SystemParams,
        substations: Vec<Substation>,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Result<Self, CaseError> {
        if !(system.base_mva > 0.0 && system.base_mva.is_finite()) {
            return Err(CaseError::System("base_mva must be positive".into()));
        }
        if !(system.frequency_hz > 0.0 && system.frequency_hz.is_finite()) {
            return Err(CaseError::System("frequency_hz must be positive".into()));
        }
        let mut bus_index = HashMap::new();
        for (i, b) in buses.iter().enumerate() {
            if bus_index.insert(b.id, i).is_some() {
                return Err(CaseError::DuplicateBus(b.id));
            }
            for (what, v) in [("load_mw", b.load_mw), ("load_mvar", b.load_mvar), ("shunt_mvar", b.shunt_mvar)] {
                if !v.is_finite() {
                    return Err(CaseError::Bus {
                        id: b.id,
                        reason: format!("{what} is not finite"),
                    });
                }
            }
        }
        let mut branch_index = HashMap::new();
        for (i, br) in branches.iter().enumerate() {
            if branch_index.insert(br.id.clone(), i).is_some() {
                return Err(CaseError::DuplicateBranch(br.id.clone()));
            }
            for bus in [br.from, br.to] {
                if !bus_index.contains_key(&bus) {
                    return Err(CaseError::DanglingBus {
                        record: format!("branch {}", br.id),
                        bus,
                    });
                }
            }
            if !(br.x > 0.0 && br.x.is_finite()) {
                return Err(CaseError::NonPositiveReactance(br.id.clone()));
            }
        }
        let mut gen_index = HashMap::new();
        for (i, g) in generators.iter().enumerate() {
            if gen_index.insert(g.id.clone(), i).is_some() {
                return Err(CaseError::DuplicateGenerator(g.id.clone()));
            }
            if !bus_index.contains_key(&g.bus) {
                return Err(CaseError::DanglingBus {
                    record: format!("generator {}", g.id),
                    bus: g.bus,
                });
            }
            let bad = |reason: &str| CaseError::Generator {
                id: g.id.clone(),
                reason: reason.into(),
            };
            if !(g.p_min <= g.p_init && g.p_init <= g.p_max) {
                return Err(bad("requires p_min <= p_init <= p_max"));
            }
            if !(g.droop_gain > 0.0 && g.droop_gain.is_finite()) {
                return Err(bad("droop_gain must be positive"));
            }
            if !(g.ramp_tau > 0.0 && g.ramp_tau.is_finite()) {
                return Err(bad("ramp_tau must be positive"));
            }
            if !(g.vset > 0.0 && g.vset.is_finite()) {
                return Err(bad("vset must be positive"));
            }
        }
        let known: HashSet<u16> = substations.iter().map(|s| s.id).collect();
        if known.len() != substations.len() {
            return Err(CaseError::System("duplicate substation id".into()));
        }
        Ok(Self {
            name,
            system,
            substations,
            buses,
            branches,
            generators,
            bus_index,
            branch_index,
            gen_index,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&CaseDoc {
            name: &self.name,
            system: &self.system,
            substations: &self.substations,
            buses: &self.buses,
            branches: &self.branches,
            generators: &self.generators,
        })
        .expect("case serializes")
    }

    pub fn bus_idx(&self, id: u32) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    pub fn branch_idx(&self, id: &str) -> Option<usize> {
        self.branch_index.get(id).copied()
    }

    pub fn gen_idx(&self, id: &str) -> Option<usize> {
        self.gen_index.get(id).copied()
    }

    /// Bus lookup by its id rendered as text (the keyfield for buses, loads and shunts).
    pub fn bus_idx_by_key(&self, key: &str) -> Option<usize> {
        key.parse().ok().and_then(|id| self.bus_idx(id))
    }

    pub fn substation_name(&self, id: u16) -> Option<&str> {
        self.substations
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.name.as_str())
    }

    /// Substation ids in order of first appearance among the buses.
    pub fn substation_ids(&self) -> Vec<u16> {
        let mut seen = HashSet::new();
        self.buses
            .iter()
            .filter(|b| seen.insert(b.substation))
            .map(|b| b.substation)
            .collect()
    }

    pub fn is_external(&self, substation: u16) -> bool {
        self.substations
            .iter()
            .any(|s| s.id == substation && s.external)
    }

    pub fn base_mva(&self) -> f64 {
        self.system.base_mva
    }
}
