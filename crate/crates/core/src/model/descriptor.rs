//! Metric descriptors: the catalog of metrics with their criterion, operating
//! space, arity and optimization direction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The seven evaluation criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Congruence,
    Coverage,
    Constraint,
    Completeness,
    Compliance,
    Comprehension,
    Consistency,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Criterion::Congruence,
        Criterion::Coverage,
        Criterion::Constraint,
        Criterion::Completeness,
        Criterion::Compliance,
        Criterion::Comprehension,
        Criterion::Consistency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Congruence => "Congruence",
            Criterion::Coverage => "Coverage",
            Criterion::Constraint => "Constraint",
            Criterion::Completeness => "Completeness",
            Criterion::Compliance => "Compliance",
            Criterion::Comprehension => "Comprehension",
            Criterion::Consistency => "Consistency",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    Embedding,
    Image,
    Metadata,
    DataAttribute,
    Documentation,
    QualityMetrics,
}

impl Space {
    pub fn label(self) -> &'static str {
        match self {
            Space::Embedding => "Embedding",
            Space::Image => "Image",
            Space::Metadata => "Metadata",
            Space::DataAttribute => "Data Attribute",
            Space::Documentation => "Documentation",
            Space::QualityMetrics => "Quality Metrics",
        }
    }
}

/// Whether a metric needs the reference (real) data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    Unary,
    Binary,
}

impl Arity {
    pub fn label(self) -> &'static str {
        match self {
            Arity::Unary => "Unary",
            Arity::Binary => "Binary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Maximize,
    Minimize,
    StatSig,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Maximize => "Maximize",
            Direction::Minimize => "Minimize",
            Direction::StatSig => "Stat. Sig.",
        }
    }
}

/// Identifier of every metric the engine knows about.
///
/// Two catalog rows share the label "Distance to Centroid" and two share
/// "Variance"; they get distinct identifiers because they measure different
/// things and optimize in opposite directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    CosineSimilarity,
    EarthMoversDistance,
    JensenShannonDivergence,
    PeakSignalToNoiseRatio,
    StructuralSimilarityIndex,
    FrechetDistance,
    CentroidDistance,
    Precision,
    InceptionScore,
    Recall,
    Coverage,
    CentroidSpread,
    ConvexHullVolume,
    DppScore,
    VendiScore,
    Variance,
    Entropy,
    RarityScore,
    ClusteringBalance,
    NearestInvalidDatapoint,
    DistanceToConstraintBoundary,
    ConstraintViolationRate,
    RequiredFieldProportion,
    MissingDataPercentage,
    DifferentialPrivacyScore,
    KAnonymity,
    LDiversity,
    TCloseness,
    LeakageRate,
    DocumentationClarityScore,
    SubgroupVariance,
    MaxMinDifference,
    AnalysisOfVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricDescriptor {
    pub metric: Metric,
    /// Row label as it appears in the published catalog.
    pub label: &'static str,
    pub criterion: Criterion,
    pub space: Space,
    pub arity: Arity,
    pub direction: Direction,
    pub image_only: bool,
    /// False for metrics this crate adds beyond the published catalog.
    pub catalog: bool,
}

const fn row(
    metric: Metric,
    label: &'static str,
    criterion: Criterion,
    space: Space,
    arity: Arity,
    direction: Direction,
    image_only: bool,
) -> MetricDescriptor {
    MetricDescriptor {
        metric,
        label,
        criterion,
        space,
        arity,
        direction,
        image_only,
        catalog: true,
    }
}

use Arity::*;
use Criterion as C;
use Direction::*;

/// Every descriptor, in catalog order. Catalog rows come first; extras last.
#[rustfmt::skip]
pub static DESCRIPTORS: [MetricDescriptor; 33] = [
    row(Metric::CosineSimilarity, "Cosine Similarity", C::Congruence, Space::Embedding, Binary, Maximize, false),
    row(Metric::EarthMoversDistance, "Earth Mover's Distance", C::Congruence, Space::Embedding, Binary, Minimize, false),
    row(Metric::JensenShannonDivergence, "Jensen-Shannon Divergence", C::Congruence, Space::Embedding, Binary, Minimize, false),
    row(Metric::PeakSignalToNoiseRatio, "Peak Signal-to-Noise Ratio", C::Congruence, Space::Image, Binary, Maximize, true),
    row(Metric::StructuralSimilarityIndex, "Structural Similarity Index", C::Congruence, Space::Image, Binary, Maximize, true),
    row(Metric::FrechetDistance, "Fréchet Inception Distance", C::Congruence, Space::Embedding, Binary, Minimize, true),
    row(Metric::CentroidDistance, "Distance to Centroid", C::Congruence, Space::Embedding, Binary, Minimize, false),
    row(Metric::Precision, "Precision", C::Congruence, Space::Embedding, Binary, Maximize, false),
    row(Metric::InceptionScore, "Inception Score", C::Coverage, Space::Image, Unary, Maximize, true),
    row(Metric::Recall, "Recall", C::Coverage, Space::Embedding, Binary, Maximize, false),
    row(Metric::Coverage, "Coverage", C::Coverage, Space::Embedding, Binary, Maximize, false),
    row(Metric::CentroidSpread, "Distance to Centroid", C::Coverage, Space::Embedding, Binary, Maximize, false),
    row(Metric::ConvexHullVolume, "Convex Hull Volume", C::Coverage, Space::Embedding, Unary, Maximize, false),
    row(Metric::DppScore, "Determinantal Point Processes Score", C::Coverage, Space::Embedding, Unary, Maximize, false),
    row(Metric::VendiScore, "Vendi Score", C::Coverage, Space::Embedding, Unary, Maximize, false),
    row(Metric::Variance, "Variance", C::Coverage, Space::Embedding, Unary, Maximize, false),
    row(Metric::Entropy, "Entropy", C::Coverage, Space::Embedding, Unary, Maximize, false),
    row(Metric::RarityScore, "Rarity Score", C::Coverage, Space::Embedding, Binary, Minimize, false),
    row(Metric::ClusteringBalance, "Clustering-Based Metrics", C::Coverage, Space::Embedding, Unary, Maximize, false),
    row(Metric::NearestInvalidDatapoint, "Nearest Invalid Datapoint", C::Constraint, Space::Embedding, Binary, Minimize, false),
    row(Metric::DistanceToConstraintBoundary, "Distance to Constraint Boundary", C::Constraint, Space::Embedding, Binary, Minimize, false),
    row(Metric::ConstraintViolationRate, "Constraint Violation Rate", C::Constraint, Space::Embedding, Binary, Minimize, false),
    row(Metric::RequiredFieldProportion, "Proportion of Required Fields", C::Completeness, Space::Metadata, Binary, Maximize, false),
    row(Metric::MissingDataPercentage, "Missing Data Percentage", C::Completeness, Space::Metadata, Binary, Minimize, false),
    row(Metric::DifferentialPrivacyScore, "Differential Privacy Score", C::Compliance, Space::DataAttribute, Unary, Minimize, false),
    row(Metric::KAnonymity, "K-Anonymity Level", C::Compliance, Space::DataAttribute, Unary, Maximize, false),
    row(Metric::LDiversity, "L-Diversity Score", C::Compliance, Space::DataAttribute, Unary, Maximize, false),
    row(Metric::TCloseness, "T-Closeness Level", C::Compliance, Space::DataAttribute, Unary, Maximize, false),
    row(Metric::DocumentationClarityScore, "Documentation Clarity Score", C::Comprehension, Space::Documentation, Unary, Maximize, false),
    row(Metric::SubgroupVariance, "Variance", C::Consistency, Space::QualityMetrics, Unary, Minimize, false),
    row(Metric::MaxMinDifference, "Maximum-Minimum Difference", C::Consistency, Space::QualityMetrics, Unary, Minimize, false),
    row(Metric::AnalysisOfVariance, "Analysis of Variance", C::Consistency, Space::QualityMetrics, Unary, StatSig, false),
    MetricDescriptor {
        metric: Metric::LeakageRate,
        label: "Re-identification Risk (near-duplicate leakage)",
        criterion: C::Compliance,
        space: Space::Embedding,
        arity: Binary,
        direction: Minimize,
        image_only: false,
        catalog: false,
    },
];

/// Catalog rows only, in published order.
pub fn catalog() -> impl Iterator<Item = &'static MetricDescriptor> {
    DESCRIPTORS.iter().filter(|d| d.catalog)
}

impl Metric {
    pub fn descriptor(self) -> &'static MetricDescriptor {
        DESCRIPTORS
            .iter()
            .find(|d| d.metric == self)
            .expect("every metric has a descriptor")
    }

    pub fn all() -> impl Iterator<Item = Metric> {
        DESCRIPTORS.iter().map(|d| d.metric)
    }

    pub fn criterion(self) -> Criterion {
        self.descriptor().criterion
    }

    pub fn direction(self) -> Direction {
        self.descriptor().direction
    }

    /// Direction used when normalizing the raw value. Equals `direction()`
    /// except for t-closeness, whose listed "maximize" refers to the
    /// compliance score: the raw distance itself is minimized.
    pub fn score_direction(self) -> Direction {
        match self {
            Metric::TCloseness => Direction::Minimize,
            m => m.direction(),
        }
    }

    pub fn arity(self) -> Arity {
        self.descriptor().arity
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::CosineSimilarity => "CosineSimilarity",
            Metric::EarthMoversDistance => "EarthMoversDistance",
            Metric::JensenShannonDivergence => "JensenShannonDivergence",
            Metric::PeakSignalToNoiseRatio => "PeakSignalToNoiseRatio",
            Metric::StructuralSimilarityIndex => "StructuralSimilarityIndex",
            Metric::FrechetDistance => "FrechetDistance",
            Metric::CentroidDistance => "CentroidDistance",
            Metric::Precision => "Precision",
            Metric::InceptionScore => "InceptionScore",
            Metric::Recall => "Recall",
            Metric::Coverage => "Coverage",
            Metric::CentroidSpread => "CentroidSpread",
            Metric::ConvexHullVolume => "ConvexHullVolume",
            Metric::DppScore => "DppScore",
            Metric::VendiScore => "VendiScore",
            Metric::Variance => "Variance",
            Metric::Entropy => "Entropy",
            Metric::RarityScore => "RarityScore",
            Metric::ClusteringBalance => "ClusteringBalance",
            Metric::NearestInvalidDatapoint => "NearestInvalidDatapoint",
            Metric::DistanceToConstraintBoundary => "DistanceToConstraintBoundary",
            Metric::ConstraintViolationRate => "ConstraintViolationRate",
            Metric::RequiredFieldProportion => "RequiredFieldProportion",
            Metric::MissingDataPercentage => "MissingDataPercentage",
            Metric::DifferentialPrivacyScore => "DifferentialPrivacyScore",
            Metric::KAnonymity => "KAnonymity",
            Metric::LDiversity => "LDiversity",
            Metric::TCloseness => "TCloseness",
            Metric::LeakageRate => "LeakageRate",
            Metric::DocumentationClarityScore => "DocumentationClarityScore",
            Metric::SubgroupVariance => "SubgroupVariance",
            Metric::MaxMinDifference => "MaxMinDifference",
            Metric::AnalysisOfVariance => "AnalysisOfVariance",
        }
    }

    /// Name shown on the rendered card.
    pub fn display_name(self) -> &'static str {
        match self {
            Metric::FrechetDistance => "FrechetDistance(embeddings)",
            other => other.name(),
        }
    }

    /// Metrics computed from embedding matrices; these can be restricted to a
    /// region or subgroup and bootstrapped.
    pub fn uses_embeddings(self) -> bool {
        matches!(self.descriptor().space, Space::Embedding)
            && !matches!(
                self,
                Metric::NearestInvalidDatapoint
                    | Metric::DistanceToConstraintBoundary
                    | Metric::ConstraintViolationRate
            )
    }

    /// Metrics computed from the record table.
    pub fn uses_table(self) -> bool {
        matches!(
            self,
            Metric::NearestInvalidDatapoint
                | Metric::DistanceToConstraintBoundary
                | Metric::ConstraintViolationRate
                | Metric::RequiredFieldProportion
                | Metric::MissingDataPercentage
                | Metric::KAnonymity
                | Metric::LDiversity
                | Metric::TCloseness
        )
    }

    /// Summaries over other metrics' per-subgroup values.
    pub fn is_consistency(self) -> bool {
        self.criterion() == Criterion::Consistency
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::all()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}
