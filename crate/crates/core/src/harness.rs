//! Seeded fixtures and defect injection for checking that each metric moves
//! in its expected direction.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cell, Column, ColumnKind, EmbeddingSet, Metric, RecordTable, Value};

/// One Gaussian component: isotropic with standard deviation `scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub mean: Vec<f64>,
    pub scale: f64,
    #[serde(default = "unit")]
    pub weight: f64,
}

fn unit() -> f64 {
    1.0
}

/// Label given to rows of mode `i`.
pub fn mode_label(i: usize) -> String {
    format!("mode{i}")
}

/// Rows per mode by largest remainder, so counts sum to `n` exactly.
fn allocate(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// `n` rows from the mixture, grouped by mode, with mode labels as
/// subgroups and ids `{prefix}{i}`.
pub fn make_gaussian_mixture(n: usize, d: usize, modes: &[Mode], seed: u64, prefix: &str) -> Result<EmbeddingSet> {
    if n == 0 || d == 0 || modes.is_empty() {
        return Err(Error::InvalidData("mixture needs n, d and at least one mode".into()));
    }
    for (i, m) in modes.iter().enumerate() {
        if m.mean.len() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: m.mean.len(),
            });
        }
        if !(m.weight > 0.0 && m.weight.is_finite() && m.scale >= 0.0 && m.scale.is_finite()) {
            return Err(Error::InvalidData(format!("mode {i}: weight must be positive and scale nonnegative")));
        }
    }
    let counts = allocate(n, &modes.iter().map(|m| m.weight).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (i, (m, &c)) in modes.iter().zip(&counts).enumerate() {
        for _ in 0..c {
            for mu in &m.mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                data.push(mu + m.scale * z);
            }
            labels.push(mode_label(i));
        }
    }
    let ids = (0..n).map(|i| format!("{prefix}{i}")).collect();
    EmbeddingSet::new(ids, data, d)?.with_subgroups(labels)
}

/// Record table view of an embedding set: `id`, numeric `f0..`, and a
/// categorical `subgroup` column when labels are present.
pub fn embeddings_to_table(set: &EmbeddingSet) -> RecordTable {
    let mut columns = vec![Column::new("id", ColumnKind::Categorical)];
    columns.extend((0..set.dim()).map(|j| Column::new(format!("f{j}"), ColumnKind::Numeric)));
    if set.subgroups().is_some() {
        columns.push(Column::new("subgroup", ColumnKind::Categorical));
    }
    let rows = set
        .rows()
        .enumerate()
        .map(|(i, r)| {
            let mut row: Vec<Cell> = vec![Some(Value::Label(set.ids()[i].clone()))];
            row.extend(r.iter().map(|v| Some(Value::Number(*v))));
            if let Some(s) = set.subgroups() {
                row.push(Some(Value::Label(s[i].clone())));
            }
            row
        })
        .collect();
    RecordTable::new(columns, rows).expect("finite values and matching widths")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Defect {
    /// Removes every row of one subgroup (mode).
    ModeDrop { mode: String },
    /// Keeps `ceil(fraction·n)` rows as exact copies and jitters the rest.
    DuplicateReal { fraction: f64 },
    /// Pushes `ceil(fraction·n)` values of `field` to `max + magnitude`.
    OutOfRange { field: String, fraction: f64, magnitude: f64 },
    DeleteField { name: String },
    /// Masks cells until `round(fraction·n·m)` are missing.
    MaskCells { fraction: f64 },
    /// Adds Gaussian noise of scale `noise_scale` to one subgroup.
    SubgroupSkew { subgroup: String, noise_scale: f64 },
}

impl Defect {
    pub fn name(&self) -> &'static str {
        match self {
            Defect::ModeDrop { .. } => "mode_drop",
            Defect::DuplicateReal { .. } => "duplicate_real",
            Defect::OutOfRange { .. } => "out_of_range",
            Defect::DeleteField { .. } => "delete_field",
            Defect::MaskCells { .. } => "mask_cells",
            Defect::SubgroupSkew { .. } => "subgroup_skew",
        }
    }

    pub fn applies_to_table(&self) -> bool {
        matches!(
            self,
            Defect::OutOfRange { .. } | Defect::DeleteField { .. } | Defect::MaskCells { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Lower than on the undefected data.
    Decreases,
    /// Higher than on the undefected data.
    Increases,
    AtLeast,
    Approximately,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedEffect {
    pub metric: Metric,
    pub relation: Relation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Ground truth for one injected defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectDescriptor {
    pub defect: Defect,
    pub seed: u64,
    /// Ids (embeddings) or 1-based row numbers (tables) touched.
    pub affected: Vec<String>,
    pub expected: Vec<ExpectedEffect>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Embeddings(EmbeddingSet),
    Table(RecordTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Defective {
    pub data: Dataset,
    pub descriptor: DefectDescriptor,
}

fn effect(metric: Metric, relation: Relation, value: Option<f64>, tolerance: Option<f64>) -> ExpectedEffect {
    ExpectedEffect {
        metric,
        relation,
        value,
        tolerance,
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(Error::InvalidData(format!("defect fraction {f} outside [0, 1]")))
    }
}

fn ceil_count(f: f64, n: usize) -> usize {
    ((f * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Applies `defect` to `source`, returning the defective copy and its
/// ground-truth descriptor.
pub fn inject_defect(source: &Dataset, defect: &Defect, seed: u64) -> Result<Defective> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (data, affected, expected) = match (source, defect) {
        (Dataset::Embeddings(set), Defect::ModeDrop { mode }) => {
            let labels = set
                .subgroups()
                .ok_or_else(|| Error::InvalidData("mode_drop needs subgroup labels".into()))?;
            let drop = set.subgroup_indices(mode);
            if drop.is_empty() {
                return Err(Error::UnknownField(format!("mode `{mode}`")));
            }
            if drop.len() == set.len() {
                return Err(Error::InvalidData(format!("mode `{mode}` is the whole dataset")));
            }
            let keep: Vec<usize> = (0..set.len()).filter(|&i| labels[i] != *mode).collect();
            let affected = drop.iter().map(|&i| set.ids()[i].clone()).collect();
            (
                Dataset::Embeddings(set.select(&keep)),
                affected,
                vec![
                    effect(Metric::Recall, Relation::Decreases, None, None),
                    effect(Metric::Coverage, Relation::Decreases, None, None),
                ],
            )
        }
        (Dataset::Embeddings(set), Defect::DuplicateReal { fraction }) => {
            check_fraction(*fraction)?;
            let n = set.len();
            let copies: BTreeSet<usize> = sample(&mut rng, n, ceil_count(*fraction, n)).into_iter().collect();
            let jitter = 0.25 * mean_column_std(set).max(1e-6);
            let out = set.map_values(|r, _, v| {
                if copies.contains(&r) {
                    v
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + jitter * z
                }
            });
            let affected = copies.iter().map(|&i| set.ids()[i].clone()).collect();
            (
                Dataset::Embeddings(out),
                affected,
                vec![effect(Metric::LeakageRate, Relation::AtLeast, Some(*fraction), None)],
            )
        }
        (Dataset::Embeddings(set), Defect::SubgroupSkew { subgroup, noise_scale }) => {
            let rows: BTreeSet<usize> = set.subgroup_indices(subgroup).into_iter().collect();
            if rows.is_empty() {
                return Err(Error::UnknownField(format!("subgroup `{subgroup}`")));
            }
            let out = set.map_values(|r, _, v| {
                if rows.contains(&r) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + noise_scale * z
                } else {
                    v
                }
            });
            let affected = rows.iter().map(|&i| set.ids()[i].clone()).collect();
            (
                Dataset::Embeddings(out),
                affected,
                vec![effect(Metric::MaxMinDifference, Relation::Increases, None, None)],
            )
        }
        (Dataset::Table(t), Defect::OutOfRange { field, fraction, magnitude }) => {
            check_fraction(*fraction)?;
            if !(*magnitude > 0.0 && magnitude.is_finite()) {
                return Err(Error::InvalidData("out_of_range magnitude must be positive".into()));
            }
            if t.kind(field) != Some(ColumnKind::Numeric) {
                return Err(Error::UnknownField(format!("numeric field `{field}`")));
            }
            let c = t.require_column(field)?;
            let max = t
                .numeric_values(field)?
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(Error::InvalidData(format!("field `{field}` has no values")));
            }
            let n = t.n_rows();
            let rows: BTreeSet<usize> = sample(&mut rng, n, ceil_count(*fraction, n)).into_iter().collect();
            let mut out = t.clone();
            for &r in &rows {
                out.set_cell(r, c, Some(Value::Number(max + magnitude)));
            }
            let min_rate = *fraction - 1.0 / n as f64;
            (
                Dataset::Table(out),
                rows.iter().map(|r| (r + 1).to_string()).collect(),
                vec![
                    effect(Metric::ConstraintViolationRate, Relation::AtLeast, Some(min_rate), None),
                    effect(Metric::DistanceToConstraintBoundary, Relation::Increases, None, None),
                ],
            )
        }
        (Dataset::Table(t), Defect::DeleteField { name }) => (
            Dataset::Table(t.without_column(name)?),
            Vec::new(),
            vec![effect(Metric::RequiredFieldProportion, Relation::Decreases, None, None)],
        ),
        (Dataset::Table(t), Defect::MaskCells { fraction }) => {
            check_fraction(*fraction)?;
            let (n, m) = (t.n_rows(), t.n_cols());
            let target = (fraction * (n * m) as f64).round() as usize;
            let present: Vec<(usize, usize)> = (0..n)
                .flat_map(|r| (0..m).map(move |c| (r, c)))
                .filter(|&(r, c)| t.cell(r, c).is_some())
                .collect();
            let need = target.saturating_sub(n * m - present.len()).min(present.len());
            let mut chosen: Vec<(usize, usize)> = sample(&mut rng, present.len(), need)
                .into_iter()
                .map(|i| present[i])
                .collect();
            chosen.sort_unstable();
            let mut out = t.clone();
            for &(r, c) in &chosen {
                out.set_cell(r, c, None);
            }
            (
                Dataset::Table(out),
                chosen.iter().map(|(r, _)| (r + 1).to_string()).collect::<BTreeSet<_>>().into_iter().collect(),
                vec![effect(
                    Metric::MissingDataPercentage,
                    Relation::Approximately,
                    Some(*fraction),
                    Some(1.0 / (n * m) as f64),
                )],
            )
        }
        (_, d) => {
            let wants = if d.applies_to_table() { "a record table" } else { "an embedding set" };
            return Err(Error::InvalidData(format!("defect {} applies to {wants}", d.name())));
        }
    };
    Ok(Defective {
        data,
        descriptor: DefectDescriptor {
            defect: defect.clone(),
            seed,
            affected,
            expected,
        },
    })
}

fn mean_column_std(set: &EmbeddingSet) -> f64 {
    let n = set.len() as f64;
    if set.len() < 2 {
        return 0.0;
    }
    let mean = set.mean();
    let total: f64 = (0..set.dim())
        .map(|j| {
            let var = set.rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
            var.sqrt()
        })
        .sum();
    total / set.dim() as f64
}

/// A fixture recipe: one mixture, sampled twice (real and an undefected
/// synthetic baseline), plus defects applied to the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub defects: Vec<Defect>,
}

fn default_seed() -> u64 {
    crate::ingest::DEFAULT_SEED
}

impl Recipe {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("recipe: {}", e.message())))
    }
}

/// Every file a recipe produces, in write order.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub real: EmbeddingSet,
    pub baseline: EmbeddingSet,
    pub defects: Vec<Defective>,
}

pub fn build_fixtures(recipe: &Recipe) -> Result<FixtureSet> {
    let real = make_gaussian_mixture(recipe.n, recipe.d, &recipe.modes, recipe.seed, "r")?;
    let baseline = make_gaussian_mixture(recipe.n, recipe.d, &recipe.modes, recipe.seed.wrapping_add(1), "s")?;
    let defects = recipe
        .defects
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let source = if d.applies_to_table() {
                Dataset::Table(embeddings_to_table(&baseline))
            } else if matches!(d, Defect::DuplicateReal { .. }) {
                Dataset::Embeddings(real.clone())
            } else {
                Dataset::Embeddings(baseline.clone())
            };
            inject_defect(&source, d, recipe.seed.wrapping_add(100 + i as u64))
        })
        .collect::<Result<_>>()?;
    Ok(FixtureSet {
        real,
        baseline,
        defects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_modes() -> Vec<Mode> {
        vec![
            Mode {
                mean: vec![0.0, 0.0],
                scale: 1.0,
                weight: 1.0,
            },
            Mode {
                mean: vec![20.0, 0.0],
                scale: 1.0,
                weight: 1.0,
            },
        ]
    }

    #[test]
    fn mixture_is_reproducible_and_labelled() {
        let a = make_gaussian_mixture(50, 2, &two_modes(), 3, "x").unwrap();
        let b = make_gaussian_mixture(50, 2, &two_modes(), 3, "x").unwrap();
        assert_eq!(a, b);
        let labels = a.subgroups().unwrap();
        assert_eq!(labels.iter().filter(|l| *l == "mode0").count(), 25);
        assert_eq!(labels.iter().filter(|l| *l == "mode1").count(), 25);
    }

    #[test]
    fn allocation_sums_to_n() {
        assert_eq!(allocate(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(allocate(7, &[3.0, 1.0]).iter().sum::<usize>(), 7);
    }

    #[test]
    fn mode_drop_removes_mode() {
        let set = make_gaussian_mixture(40, 2, &two_modes(), 1, "x").unwrap();
        let out = inject_defect(&Dataset::Embeddings(set), &Defect::ModeDrop { mode: "mode1".into() }, 0).unwrap();
        let Dataset::Embeddings(s) = out.data else { panic!() };
        assert!(s.subgroups().unwrap().iter().all(|l| l == "mode0"));
        assert_eq!(out.descriptor.affected.len(), 20);
    }

    #[test]
    fn unknown_targets_rejected() {
        let set = make_gaussian_mixture(10, 2, &two_modes(), 1, "x").unwrap();
        let ds = Dataset::Embeddings(set.clone());
        assert!(inject_defect(&ds, &Defect::ModeDrop { mode: "nope".into() }, 0).is_err());
        assert!(inject_defect(&ds, &Defect::MaskCells { fraction: 0.1 }, 0).is_err());
        let t = Dataset::Table(embeddings_to_table(&set));
        assert!(inject_defect(&t, &Defect::DeleteField { name: "nope".into() }, 0).is_err());
    }

    #[test]
    fn recipe_rejects_unknown_kind() {
        let text = "n = 10\nd = 1\n[[modes]]\nmean = [0.0]\nscale = 1.0\n[[defects]]\nkind = \"explode\"\n";
        assert!(Recipe::from_toml_str(text).is_err());
    }
}
