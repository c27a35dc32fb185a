//! Who collects what in a window: the mule population draw, the allocation of observations
//! to mules and the edge server, and the data-aggregation heuristic.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::energy::{observation_bits, Tech};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Allocation {
    Zipf { alpha: f64 },
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MuleCount {
    /// Poisson draw per window; zero draws are resampled when no edge server takes data.
    Poisson { lambda: f64 },
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Protocol {
    EdgeOnly,
    A2AHTL,
    SHTL,
}

impl Protocol {
    pub fn key(self) -> &'static str {
        match self {
            Protocol::EdgeOnly => "edge_only",
            Protocol::A2AHTL => "a2ahtl",
            Protocol::SHTL => "shtl",
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edge_only" | "edgeonly" => Ok(Protocol::EdgeOnly),
            "a2ahtl" | "a2a" => Ok(Protocol::A2AHTL),
            "shtl" | "starhtl" | "star" => Ok(Protocol::SHTL),
            other => Err(Error::config(format!("unknown protocol `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub windows: usize,
    pub obs_per_window: usize,
    pub mule_count: MuleCount,
    pub allocation: Allocation,
    /// Probability that an observation is sent straight to the edge server.
    pub edge_fraction: f64,
    pub aggregation_enabled: bool,
    pub protocol: Protocol,
    /// Technology used between collectors during learning.
    pub learning_tech: Tech,
    pub gtl_per_class_sample: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            windows: 100,
            obs_per_window: 100,
            mule_count: MuleCount::Poisson { lambda: 7.0 },
            allocation: Allocation::Zipf { alpha: 1.5 },
            edge_fraction: 0.0,
            aggregation_enabled: false,
            protocol: Protocol::SHTL,
            learning_tech: Tech::FourG,
            gtl_per_class_sample: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.windows == 0 || self.obs_per_window == 0 {
            return Err(Error::config("windows and obs_per_window must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.edge_fraction) {
            return Err(Error::config(format!(
                "edge_fraction must lie in [0, 1], got {}",
                self.edge_fraction
            )));
        }
        if self.protocol != Protocol::EdgeOnly {
            match self.mule_count {
                MuleCount::Poisson { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                    return Err(Error::config(format!("lambda must be > 0, got {lambda}")));
                }
                MuleCount::Fixed(0) => return Err(Error::config("fixed mule count must be >= 1")),
                _ => {}
            }
            if !matches!(self.learning_tech, Tech::FourG | Tech::Wifi) {
                return Err(Error::config(format!(
                    "learning technology must be 4g or wifi, got {}",
                    self.learning_tech
                )));
            }
            if self.learning_tech == Tech::Wifi && self.edge_fraction > 0.0 {
                return Err(Error::config(
                    "wifi learning needs a mule access point; it cannot be combined with edge_fraction > 0",
                ));
            }
        }
        if let Allocation::Zipf { alpha } = self.allocation {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::config(format!("zipf alpha must be > 0, got {alpha}")));
            }
        }
        if self.gtl_per_class_sample == Some(0) {
            return Err(Error::config("gtl_per_class_sample must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CollectorKind {
    Mule,
    EdgeServer,
}

/// A node holding raw data at learning time. Mule ids double as 0-based Zipf ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct Collector {
    pub id: usize,
    pub kind: CollectorKind,
    pub data: Dataset,
}

/// Poisson(`lambda`) draw, redrawn until it is at least one.
pub fn draw_mule_count(rng: &mut SimRng, lambda: f64) -> usize {
    let poisson = Poisson::new(lambda).expect("lambda > 0");
    loop {
        let n = poisson.sample(rng) as usize;
        if n >= 1 {
            return n;
        }
    }
}

/// Plain Poisson(`lambda`) draw, zero allowed.
pub fn draw_mule_count_untruncated(rng: &mut SimRng, lambda: f64) -> usize {
    Poisson::new(lambda).expect("lambda > 0").sample(rng) as usize
}

/// `p_r = r^-alpha / sum_s s^-alpha` for ranks `r = 1..=n`.
pub fn zipf_probabilities(n: usize, alpha: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-alpha)).collect();
    let norm: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / norm).collect()
}

/// Assigns every observation independently to one of `n` mules.
pub fn allocate(batch: &Dataset, n: usize, allocation: Allocation, rng: &mut SimRng) -> Result<Vec<Dataset>> {
    if n == 0 {
        return Err(Error::domain("cannot allocate to zero mules"));
    }
    let mut parts = vec![Dataset::empty(batch.num_classes(), batch.feature_dim()); n];
    match allocation {
        Allocation::Zipf { alpha } => {
            let dist = WeightedIndex::new(zipf_probabilities(n, alpha))
                .map_err(|e| Error::domain(format!("invalid zipf weights: {e}")))?;
            for o in batch {
                parts[dist.sample(rng)].push(o.clone());
            }
        }
        Allocation::Uniform => {
            for o in batch {
                parts[rng.random_range(0..n)].push(o.clone());
            }
        }
    }
    Ok(parts)
}

/// Sends each observation to the edge with probability `edge_fraction`, else to the mules.
pub fn route_edge_fraction(batch: &Dataset, edge_fraction: f64, rng: &mut SimRng) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&edge_fraction) {
        return Err(Error::domain(format!("edge fraction {edge_fraction} outside [0, 1]")));
    }
    let mut edge = Dataset::empty(batch.num_classes(), batch.feature_dim());
    let mut mules = edge.clone();
    for o in batch {
        if rng.random_bool(edge_fraction) {
            edge.push(o.clone());
        } else {
            mules.push(o.clone());
        }
    }
    Ok((edge, mules))
}

/// One raw-data transfer between mules made by the aggregation heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Migration {
    pub src: usize,
    pub dst: usize,
    pub observations: usize,
    pub bits: u64,
}

/// Merges mules whose payload is below twice the model size.
///
/// Among under-threshold mules the smallest repeatedly merges into the largest (ties: the
/// largest is the lowest id, the smallest the highest id) until at most one is left under
/// the threshold; that one then merges into the smallest over-threshold mule, if any.
/// Partition indices are preserved; merged-away partitions are left empty.
pub fn aggregation_heuristic(mut partitions: Vec<Dataset>, model_bits: u64) -> (Vec<Dataset>, Vec<Migration>) {
    let mut log = Vec::new();
    let Some(first) = partitions.first() else {
        return (partitions, log);
    };
    let (k, d) = (first.num_classes(), first.feature_dim());
    let obs_bits = observation_bits(d);
    let threshold = 2 * model_bits;
    let payload = |p: &Dataset| p.len() as u64 * obs_bits;

    let move_all = |parts: &mut [Dataset], src: usize, dst: usize, log: &mut Vec<Migration>| {
        let mut moved = std::mem::replace(&mut parts[src], Dataset::empty(k, d));
        log.push(Migration {
            src,
            dst,
            observations: moved.len(),
            bits: moved.len() as u64 * obs_bits,
        });
        parts[dst].append(&mut moved);
    };

    loop {
        let under: Vec<usize> = (0..partitions.len())
            .filter(|&i| !partitions[i].is_empty() && payload(&partitions[i]) < threshold)
            .collect();
        if under.len() <= 1 {
            if let Some(&last) = under.first() {
                let target = (0..partitions.len())
                    .filter(|&i| payload(&partitions[i]) >= threshold)
                    .min_by_key(|&i| (partitions[i].len(), i));
                if let Some(dst) = target {
                    move_all(&mut partitions, last, dst, &mut log);
                }
            }
            break;
        }
        let dst = *under
            .iter()
            .max_by_key(|&&i| (partitions[i].len(), std::cmp::Reverse(i)))
            .expect("non-empty");
        let src = *under
            .iter()
            .filter(|&&i| i != dst)
            .min_by_key(|&&i| (partitions[i].len(), std::cmp::Reverse(i)))
            .expect("at least two under-threshold mules");
        move_all(&mut partitions, src, dst, &mut log);
    }
    (partitions, log)
}
