//! Synthetic drifting datasets with known ground truth.
//!
//! A [`DriftScenario`] describes a stream of sub-periods populated by
//! Gaussian components (spherical, one spread per component). Events let
//! components appear ([`DriftEvent::Birth`]), disappear
//! ([`DriftEvent::Death`]), or shift their mean ([`DriftEvent::Move`]) at a
//! chosen sub-period, which is how known cluster births, deaths, and drifts
//! are planted for validating the temporal strategies.
//!
//! Generation is fully deterministic: sub-period `p` draws from its own
//! counter-mode RNG stream of the scenario seed, so changing one sub-period's
//! definition never perturbs the others.

use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterError, Partition};
use crate::features::{FeatureVector, N_VARIABLES};
use crate::strategies::{PeriodData, StrategyError, TemporalDataset};

/// Errors raised while validating, loading, or generating scenarios.
#[derive(Debug, Error)]
pub enum SynthError {
    /// Scenario counts must be at least 1.
    #[error("{field} must be at least 1")]
    NonPositive { field: &'static str },
    /// A scenario needs at least one component.
    #[error("scenario has no components")]
    NoComponents,
    /// Component names must be unique.
    #[error("component name {name:?} is used more than once")]
    DuplicateComponent { name: String },
    /// A component definition is inconsistent.
    #[error("component {name:?}: {reason}")]
    BadComponent { name: String, reason: String },
    /// An event references a component that does not exist.
    #[error("event references unknown component {name:?}")]
    UnknownComponent { name: String },
    /// Event periods are 1-based and bounded by the scenario length.
    #[error("event period {period} is outside 1..={periods}")]
    BadEventPeriod { period: usize, periods: usize },
    /// Birth/death bookkeeping for one component is contradictory.
    #[error("component {name:?}: {reason}")]
    ConflictingEvents { name: String, reason: String },
    /// A move event's displacement is inconsistent.
    #[error("move event for {name:?}: {reason}")]
    BadDisplacement { name: String, reason: String },
    /// Every sub-period must have at least one active component.
    #[error("no active components in sub-period {period}")]
    NoActiveComponents { period: usize },
    /// Conversion to feature rows needs exactly the feature dimensionality.
    #[error("feature rows need {N_VARIABLES} dimensions, scenario has {dimensions}")]
    FeatureShape { dimensions: usize },
    /// Scenario file could not be read.
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    /// Scenario JSON could not be parsed.
    #[error("cannot parse scenario: {0}")]
    Json(#[from] serde_json::Error),
}

/// One Gaussian component of the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    /// Unique component name, referenced by events.
    pub name: String,
    /// Mean vector; length must equal the scenario's `dimensions`.
    pub mean: Vec<f64>,
    /// Standard deviation of the isotropic Gaussian noise (> 0).
    pub spread: f64,
    /// Relative sampling weight (> 0); weights of the components active in a
    /// sub-period are renormalized to sum to 1.
    pub weight: f64,
}

/// A planted change in the stream. Periods are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftEvent {
    /// The component starts emitting points at `period` (inactive before).
    Birth { period: usize, component: String },
    /// The component stops emitting points at `period` (active before).
    Death { period: usize, component: String },
    /// The component's mean shifts by `displacement` from `period` onward;
    /// multiple moves accumulate.
    Move {
        period: usize,
        component: String,
        displacement: Vec<f64>,
    },
}

impl DriftEvent {
    fn period(&self) -> usize {
        match self {
            DriftEvent::Birth { period, .. }
            | DriftEvent::Death { period, .. }
            | DriftEvent::Move { period, .. } => *period,
        }
    }

    fn component(&self) -> &str {
        match self {
            DriftEvent::Birth { component, .. }
            | DriftEvent::Death { component, .. }
            | DriftEvent::Move { component, .. } => component,
        }
    }
}

/// Declarative description of a drifting synthetic stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftScenario {
    /// Dimensionality of every point.
    pub dimensions: usize,
    /// Number of sub-periods.
    pub periods: usize,
    /// Points drawn in each sub-period.
    pub points_per_period: usize,
    /// Root seed; sub-period `p` draws from RNG stream `p`.
    pub seed: u64,
    /// The Gaussian components.
    pub components: Vec<ComponentSpec>,
    /// Planted changes (empty means a stationary stream).
    #[serde(default)]
    pub events: Vec<DriftEvent>,
}

impl DriftScenario {
    /// Parses a scenario from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self, SynthError> {
        let scenario: DriftScenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Reads and parses a scenario file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Index of a component by name.
    fn component_index(&self, name: &str) -> Option<usize> {
        self.components.iter().position(|c| c.name == name)
    }

    /// Checks every structural constraint of the scenario.
    pub fn validate(&self) -> Result<(), SynthError> {
        for (value, field) in [
            (self.dimensions, "dimensions"),
            (self.periods, "periods"),
            (self.points_per_period, "points_per_period"),
        ] {
            if value == 0 {
                return Err(SynthError::NonPositive { field });
            }
        }
        if self.components.is_empty() {
            return Err(SynthError::NoComponents);
        }
        for (index, component) in self.components.iter().enumerate() {
            if self.components[..index]
                .iter()
                .any(|other| other.name == component.name)
            {
                return Err(SynthError::DuplicateComponent {
                    name: component.name.clone(),
                });
            }
            let reason = if component.mean.len() != self.dimensions {
                Some(format!(
                    "mean has {} entries, expected {}",
                    component.mean.len(),
                    self.dimensions
                ))
            } else if component.mean.iter().any(|m| !m.is_finite()) {
                Some("mean has a non-finite entry".to_string())
            } else if !(component.spread.is_finite() && component.spread > 0.0) {
                Some(format!(
                    "spread must be finite and > 0, got {}",
                    component.spread
                ))
            } else if !(component.weight.is_finite() && component.weight > 0.0) {
                Some(format!(
                    "weight must be finite and > 0, got {}",
                    component.weight
                ))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(SynthError::BadComponent {
                    name: component.name.clone(),
                    reason,
                });
            }
        }
        for event in &self.events {
            let name = event.component();
            if self.component_index(name).is_none() {
                return Err(SynthError::UnknownComponent {
                    name: name.to_string(),
                });
            }
            let period = event.period();
            if period == 0 || period > self.periods {
                return Err(SynthError::BadEventPeriod {
                    period,
                    periods: self.periods,
                });
            }
            if let DriftEvent::Move {
                displacement,
                component,
                ..
            } = event
            {
                if displacement.len() != self.dimensions {
                    return Err(SynthError::BadDisplacement {
                        name: component.clone(),
                        reason: format!(
                            "displacement has {} entries, expected {}",
                            displacement.len(),
                            self.dimensions
                        ),
                    });
                }
                if displacement.iter().any(|d| !d.is_finite()) {
                    return Err(SynthError::BadDisplacement {
                        name: component.clone(),
                        reason: "displacement has a non-finite entry".to_string(),
                    });
                }
            }
        }
        for component in &self.components {
            let births: Vec<usize> = self
                .events
                .iter()
                .filter(|e| {
                    matches!(e, DriftEvent::Birth { .. }) && e.component() == component.name
                })
                .map(DriftEvent::period)
                .collect();
            let deaths: Vec<usize> = self
                .events
                .iter()
                .filter(|e| {
                    matches!(e, DriftEvent::Death { .. }) && e.component() == component.name
                })
                .map(DriftEvent::period)
                .collect();
            if births.len() > 1 || deaths.len() > 1 {
                return Err(SynthError::ConflictingEvents {
                    name: component.name.clone(),
                    reason: "at most one birth and one death are allowed".to_string(),
                });
            }
            if let (Some(&birth), Some(&death)) = (births.first(), deaths.first()) {
                if birth >= death {
                    return Err(SynthError::ConflictingEvents {
                        name: component.name.clone(),
                        reason: format!("birth at {birth} is not before death at {death}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// True when component `index` emits points in 1-based sub-period
    /// `period`: from its birth (default 1) up to, excluding, its death.
    fn active_in(&self, index: usize, period: usize) -> bool {
        let name = &self.components[index].name;
        let mut first = 1usize;
        let mut end = self.periods + 1;
        for event in &self.events {
            if event.component() != name {
                continue;
            }
            match event {
                DriftEvent::Birth { period, .. } => first = *period,
                DriftEvent::Death { period, .. } => end = *period,
                DriftEvent::Move { .. } => {}
            }
        }
        (first..end).contains(&period)
    }

    /// Component mean effective in `period`: base mean plus all displacements
    /// whose move period has been reached.
    fn mean_at(&self, index: usize, period: usize) -> Vec<f64> {
        let component = &self.components[index];
        let mut mean = component.mean.clone();
        for event in &self.events {
            if let DriftEvent::Move {
                period: at,
                component: name,
                displacement,
            } = event
            {
                if name == &component.name && *at <= period {
                    for (m, d) in mean.iter_mut().zip(displacement) {
                        *m += d;
                    }
                }
            }
        }
        mean
    }
}

/// One generated sub-period with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPeriod {
    /// Sub-period label (`p1`, `p2`, …; zero-padded so labels sort
    /// chronologically).
    pub label: String,
    /// Sequential point identifiers, unique across the stream.
    pub ids: Vec<u64>,
    /// Generated points.
    pub points: Vec<Vec<f64>>,
    /// Index into the scenario's component list for each point. Indices are
    /// stable across sub-periods, so the same component keeps the same truth
    /// label for the whole stream.
    pub truth: Vec<usize>,
}

/// A generated stream plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    /// Sub-periods in chronological order.
    pub periods: Vec<GeneratedPeriod>,
    /// Component names, indexed by truth label.
    pub component_names: Vec<String>,
}

impl GeneratedData {
    /// The points as a clustering-ready temporal dataset.
    pub fn dataset(&self) -> Result<TemporalDataset, StrategyError> {
        TemporalDataset::new(
            self.periods
                .iter()
                .map(|p| PeriodData {
                    label: p.label.clone(),
                    ids: p.ids.clone(),
                    points: p.points.clone(),
                })
                .collect(),
        )
    }

    /// Ground-truth partitions, one per sub-period, labeled over all
    /// components (a component inactive in a sub-period is an empty truth
    /// cluster there). Truth partitions carry an inertia of 0.
    pub fn truth_partitions(&self) -> Result<Vec<Partition>, ClusterError> {
        self.periods
            .iter()
            .map(|p| {
                Partition::new(
                    p.ids.clone(),
                    p.truth.clone(),
                    self.component_names.len(),
                    0.0,
                )
            })
            .collect()
    }

    /// The stream as feature rows, available when the scenario dimensionality
    /// equals the feature-table width.
    pub fn feature_vectors(&self) -> Result<Vec<FeatureVector>, SynthError> {
        let mut records = Vec::new();
        for period in &self.periods {
            for (&id, point) in period.ids.iter().zip(&period.points) {
                let values: [f64; N_VARIABLES] =
                    point
                        .as_slice()
                        .try_into()
                        .map_err(|_| SynthError::FeatureShape {
                            dimensions: point.len(),
                        })?;
                records.push(FeatureVector {
                    nav_id: id,
                    sub_period: period.label.clone(),
                    values,
                });
            }
        }
        Ok(records)
    }
}

/// Generates the stream described by a scenario.
///
/// Per sub-period: the active components' weights are renormalized, each
/// point picks its component by weight and adds isotropic Gaussian noise
/// (scaled by the component's spread) to the component's effective mean.
pub fn generate(scenario: &DriftScenario) -> Result<GeneratedData, SynthError> {
    scenario.validate()?;
    let width = scenario.periods.to_string().len();
    let standard = Normal::new(0.0, 1.0).expect("unit normal is valid");
    let mut next_id = 1u64;
    let mut periods = Vec::with_capacity(scenario.periods);
    for period in 1..=scenario.periods {
        let active: Vec<usize> = (0..scenario.components.len())
            .filter(|&c| scenario.active_in(c, period))
            .collect();
        if active.is_empty() {
            return Err(SynthError::NoActiveComponents { period });
        }
        let weights: Vec<f64> = active
            .iter()
            .map(|&c| scenario.components[c].weight)
            .collect();
        let chooser = WeightedIndex::new(&weights).expect("weights validated positive");
        let means: Vec<Vec<f64>> = active
            .iter()
            .map(|&c| scenario.mean_at(c, period))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(period as u64);
        let n = scenario.points_per_period;
        let mut ids = Vec::with_capacity(n);
        let mut points = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for _ in 0..n {
            let pick = chooser.sample(&mut rng);
            let component = active[pick];
            let spread = scenario.components[component].spread;
            let point: Vec<f64> = means[pick]
                .iter()
                .map(|&m| m + spread * standard.sample(&mut rng))
                .collect();
            ids.push(next_id);
            next_id += 1;
            points.push(point);
            truth.push(component);
        }
        periods.push(GeneratedPeriod {
            label: format!("p{period:0width$}"),
            ids,
            points,
            truth,
        });
    }
    Ok(GeneratedData {
        periods,
        component_names: scenario.components.iter().map(|c| c.name.clone()).collect(),
    })
}
