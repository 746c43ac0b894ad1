//! The ten selection strategies, from strongest consensus to strongest
//! diversity, and their per-dataset parameter bundles.

use std::fmt;
use std::str::FromStr;

use super::scores::ScoreWeights;
use super::SelectionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    MaxConsensus,
    UltraConsensus,
    HighConsensus,
    MedConsensus,
    MagnitudeHybrid,
    Balanced,
    LowDiversity,
    HighDiversity,
    UltraDiversity,
    MaxDiversity,
}

impl Strategy {
    /// Canonical order; ties between equally scored strategies go to the
    /// earlier entry.
    pub const ALL: [Strategy; 10] = [
        Strategy::MaxConsensus,
        Strategy::UltraConsensus,
        Strategy::HighConsensus,
        Strategy::MedConsensus,
        Strategy::MagnitudeHybrid,
        Strategy::Balanced,
        Strategy::LowDiversity,
        Strategy::HighDiversity,
        Strategy::UltraDiversity,
        Strategy::MaxDiversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::MaxConsensus => "Max-Consensus",
            Strategy::UltraConsensus => "Ultra-Consensus",
            Strategy::HighConsensus => "High-Consensus",
            Strategy::MedConsensus => "Med-Consensus",
            Strategy::MagnitudeHybrid => "Magnitude-Hybrid",
            Strategy::Balanced => "Balanced",
            Strategy::LowDiversity => "Low-Diversity",
            Strategy::HighDiversity => "High-Diversity",
            Strategy::UltraDiversity => "Ultra-Diversity",
            Strategy::MaxDiversity => "Max-Diversity",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SelectionError::UnknownStrategy(s.to_string()))
    }
}

/// One strategy's QUBO parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Redundancy weight applied to pairwise similarity.
    pub lambda_r_s: f64,
    /// Cardinality penalty weight.
    pub lambda_c: f64,
    pub anti_clustering: bool,
    pub magnitude_boost: bool,
}

impl StrategyConfig {
    pub fn name(&self) -> &'static str {
        self.strategy.name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetProfile {
    Mnist,
    Cinic10,
}

impl DatasetProfile {
    pub fn name(self) -> &'static str {
        match self {
            DatasetProfile::Mnist => "mnist",
            DatasetProfile::Cinic10 => "cinic10",
        }
    }

    /// Similarity threshold above which anti-clustering strategies switch
    /// to the fixed 0.3 redundancy weight.
    pub fn tau(self) -> f64 {
        match self {
            DatasetProfile::Mnist => 0.98,
            DatasetProfile::Cinic10 => 0.90,
        }
    }

    pub fn score_weights(self) -> ScoreWeights {
        match self {
            DatasetProfile::Mnist => ScoreWeights::new(1.0, 0.01, 0.001),
            DatasetProfile::Cinic10 => ScoreWeights::new(1.033, 0.01, 1.082),
        }
    }
}

impl fmt::Display for DatasetProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetProfile {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetProfile::Mnist),
            "cinic10" | "cinic-10" => Ok(DatasetProfile::Cinic10),
            _ => Err(SelectionError::UnknownProfile(s.to_string())),
        }
    }
}

// (strategy, lambda_r_s, lambda_c, anti-clustering, magnitude boost)
const MNIST_TABLE: [(Strategy, f64, f64, bool, bool); 10] = [
    (Strategy::MaxConsensus, 0.02, 3.0, true, false),
    (Strategy::UltraConsensus, 0.03, 2.0, true, false),
    (Strategy::HighConsensus, 0.05, 1.0, false, false),
    (Strategy::MedConsensus, 0.04, 1.5, false, false),
    (Strategy::MagnitudeHybrid, 0.10, 1.0, false, true),
    (Strategy::Balanced, 0.15, 0.5, false, false),
    (Strategy::LowDiversity, 0.20, 0.4, false, false),
    (Strategy::HighDiversity, 0.25, 0.5, false, false),
    (Strategy::UltraDiversity, 0.35, 0.3, false, false),
    (Strategy::MaxDiversity, 0.40, 0.2, false, false),
];

fn evenly_spaced(lo: f64, hi: f64, idx: usize, count: usize) -> f64 {
    lo + (hi - lo) * idx as f64 / (count - 1) as f64
}

/// CINIC-10 only publishes cardinality-weight ranges per strategy family;
/// members are spread evenly over the range.
fn cinic_lambda_c(strategy: Strategy) -> f64 {
    use Strategy::*;
    const DIVERSITY: [Strategy; 4] = [LowDiversity, HighDiversity, UltraDiversity, MaxDiversity];
    const CONSENSUS: [Strategy; 4] = [MedConsensus, HighConsensus, UltraConsensus, MaxConsensus];
    if let Some(i) = DIVERSITY.iter().position(|&s| s == strategy) {
        return evenly_spaced(0.6, 0.9, i, DIVERSITY.len());
    }
    if let Some(i) = CONSENSUS.iter().position(|&s| s == strategy) {
        return evenly_spaced(1.2, 2.0, i, CONSENSUS.len());
    }
    1.0
}

/// All ten strategies in canonical order.
pub fn strategy_bank(profile: DatasetProfile) -> Vec<StrategyConfig> {
    MNIST_TABLE
        .iter()
        .map(|&(strategy, lambda_r_s, lambda_c, anti_clustering, magnitude_boost)| StrategyConfig {
            strategy,
            lambda_r_s,
            lambda_c: match profile {
                DatasetProfile::Mnist => lambda_c,
                DatasetProfile::Cinic10 => cinic_lambda_c(strategy),
            },
            anti_clustering,
            magnitude_boost,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find(bank: &[StrategyConfig], s: Strategy) -> &StrategyConfig {
        bank.iter().find(|c| c.strategy == s).unwrap()
    }

    #[test]
    fn mnist_rows() {
        let bank = strategy_bank(DatasetProfile::Mnist);
        assert_eq!(bank.len(), 10);
        let max_c = find(&bank, Strategy::MaxConsensus);
        assert_eq!((max_c.lambda_r_s, max_c.lambda_c, max_c.anti_clustering), (0.02, 3.0, true));
        let max_d = find(&bank, Strategy::MaxDiversity);
        assert_eq!((max_d.lambda_r_s, max_d.lambda_c), (0.40, 0.2));
        for c in &bank {
            assert_eq!(
                c.anti_clustering,
                matches!(c.strategy, Strategy::MaxConsensus | Strategy::UltraConsensus)
            );
            assert_eq!(c.magnitude_boost, c.strategy == Strategy::MagnitudeHybrid);
        }
    }

    #[test]
    fn cinic_lambda_c_ranges() {
        let bank = strategy_bank(DatasetProfile::Cinic10);
        assert_eq!(find(&bank, Strategy::Balanced).lambda_c, 1.0);
        assert_eq!(find(&bank, Strategy::MagnitudeHybrid).lambda_c, 1.0);
        assert_eq!(find(&bank, Strategy::LowDiversity).lambda_c, 0.6);
        assert!((find(&bank, Strategy::MaxDiversity).lambda_c - 0.9).abs() < 1e-12);
        assert_eq!(find(&bank, Strategy::MedConsensus).lambda_c, 1.2);
        assert!((find(&bank, Strategy::MaxConsensus).lambda_c - 2.0).abs() < 1e-12);
        let mnist = strategy_bank(DatasetProfile::Mnist);
        for (a, b) in bank.iter().zip(&mnist) {
            assert_eq!(a.lambda_r_s, b.lambda_r_s);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("mnist".parse::<DatasetProfile>().unwrap(), DatasetProfile::Mnist);
        assert_eq!("CINIC10".parse::<DatasetProfile>().unwrap(), DatasetProfile::Cinic10);
        assert!(matches!(
            "imagenet".parse::<DatasetProfile>(),
            Err(SelectionError::UnknownProfile(_))
        ));
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
    }
}
