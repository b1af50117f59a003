//! Declarative constraint rules over record-table fields and the three
//! Constraint metrics: violation rate, violation magnitude and margin.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{quantile_sorted, sorted};
use crate::model::{ColumnKind, Metric, MetricResult, RecordTable, Value};

/// Deepest allowed implication nesting.
pub const MAX_IMPLICATION_DEPTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// Antecedent of an implication: a categorical field equals one of `values`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub field: String,
    pub values: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    Range {
        field: String,
        min: Option<f64>,
        max: Option<f64>,
    },
    AllowedSet {
        field: String,
        values: BTreeSet<String>,
    },
    Linear {
        weights: Vec<(String, f64)>,
        bound: f64,
        sense: Sense,
    },
    Implication {
        when: Predicate,
        then: Box<RuleKind>,
    },
}

impl RuleKind {
    fn depth(&self) -> usize {
        match self {
            RuleKind::Implication { then, .. } => 1 + then.depth(),
            _ => 0,
        }
    }

    fn fields(&self, out: &mut Vec<String>) {
        match self {
            RuleKind::Range { field, .. } | RuleKind::AllowedSet { field, .. } => out.push(field.clone()),
            RuleKind::Linear { weights, .. } => out.extend(weights.iter().map(|(f, _)| f.clone())),
            RuleKind::Implication { when, then } => {
                out.push(when.field.clone());
                then.fields(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRule {
    pub id: String,
    pub kind: RuleKind,
    /// Informational only.
    pub severity: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSource {
    #[default]
    Declared,
    DerivedFromReference,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintRuleSet {
    pub rules: Vec<ConstraintRule>,
    pub source: RuleSource,
}

/// Antecedent as written in a config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredicateSpec {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<String>,
    #[serde(default, rename = "in", skip_serializing_if = "Option::is_none")]
    pub one_of: Option<Vec<String>>,
}

/// A rule as written in a config document (`[[constraints.rules]]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<Sense>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<PredicateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub then: Option<Box<RuleSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<String>,
}

fn need<T>(v: Option<T>, id: &str, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Rule(format!("rule `{id}`: missing `{key}`")))
}

impl RuleSpec {
    fn to_kind(&self, id: &str) -> Result<RuleKind> {
        let unexpected = |keys: &[(&str, bool)]| -> Result<()> {
            match keys.iter().find(|(_, set)| *set) {
                Some((k, _)) => Err(Error::Rule(format!("rule `{id}`: `{k}` does not apply to kind `{}`", self.kind))),
                None => Ok(()),
            }
        };
        match self.kind.as_str() {
            "range" => {
                unexpected(&[
                    ("values", self.values.is_some()),
                    ("weights", self.weights.is_some()),
                    ("bound", self.bound.is_some()),
                    ("sense", self.sense.is_some()),
                    ("when", self.when.is_some()),
                    ("then", self.then.is_some()),
                ])?;
                let field = need(self.field.clone(), id, "field")?;
                if self.min.is_none() && self.max.is_none() {
                    return Err(Error::Rule(format!("rule `{id}`: range needs `min` or `max`")));
                }
                if let (Some(lo), Some(hi)) = (self.min, self.max) {
                    if lo > hi {
                        return Err(Error::Rule(format!("rule `{id}`: min {lo} exceeds max {hi}")));
                    }
                }
                if self.min.into_iter().chain(self.max).any(|v| !v.is_finite()) {
                    return Err(Error::Rule(format!("rule `{id}`: bounds must be finite")));
                }
                Ok(RuleKind::Range {
                    field,
                    min: self.min,
                    max: self.max,
                })
            }
            "allowed_set" => {
                unexpected(&[
                    ("min", self.min.is_some()),
                    ("max", self.max.is_some()),
                    ("weights", self.weights.is_some()),
                    ("bound", self.bound.is_some()),
                    ("sense", self.sense.is_some()),
                    ("when", self.when.is_some()),
                    ("then", self.then.is_some()),
                ])?;
                let values: BTreeSet<String> = need(self.values.clone(), id, "values")?.into_iter().collect();
                if values.is_empty() {
                    return Err(Error::Rule(format!("rule `{id}`: empty allowed set")));
                }
                Ok(RuleKind::AllowedSet {
                    field: need(self.field.clone(), id, "field")?,
                    values,
                })
            }
            "linear" => {
                unexpected(&[
                    ("field", self.field.is_some()),
                    ("min", self.min.is_some()),
                    ("max", self.max.is_some()),
                    ("values", self.values.is_some()),
                    ("when", self.when.is_some()),
                    ("then", self.then.is_some()),
                ])?;
                let weights: Vec<(String, f64)> = need(self.weights.clone(), id, "weights")?.into_iter().collect();
                if weights.is_empty() || weights.iter().all(|(_, w)| *w == 0.0) {
                    return Err(Error::Rule(format!("rule `{id}`: linear rule needs a nonzero weight")));
                }
                let bound = need(self.bound, id, "bound")?;
                if !bound.is_finite() || weights.iter().any(|(_, w)| !w.is_finite()) {
                    return Err(Error::Rule(format!("rule `{id}`: weights and bound must be finite")));
                }
                Ok(RuleKind::Linear {
                    weights,
                    bound,
                    sense: need(self.sense, id, "sense")?,
                })
            }
            "implication" => {
                unexpected(&[
                    ("field", self.field.is_some()),
                    ("min", self.min.is_some()),
                    ("max", self.max.is_some()),
                    ("values", self.values.is_some()),
                    ("weights", self.weights.is_some()),
                    ("bound", self.bound.is_some()),
                    ("sense", self.sense.is_some()),
                ])?;
                let when = need(self.when.clone(), id, "when")?;
                let mut values: BTreeSet<String> = when.one_of.unwrap_or_default().into_iter().collect();
                values.extend(when.equals);
                if values.is_empty() {
                    return Err(Error::Rule(format!("rule `{id}`: antecedent needs `equals` or `in`")));
                }
                let then = need(self.then.as_ref(), id, "then")?;
                if then.id.is_some() {
                    return Err(Error::Rule(format!("rule `{id}`: nested rules take no `id`")));
                }
                Ok(RuleKind::Implication {
                    when: Predicate {
                        field: when.field,
                        values,
                    },
                    then: Box::new(then.to_kind(id)?),
                })
            }
            other => Err(Error::Rule(format!(
                "rule `{id}`: unknown kind `{other}` (expected range, allowed_set, linear or implication)"
            ))),
        }
    }
}

impl ConstraintRuleSet {
    pub fn new(rules: Vec<ConstraintRule>, source: RuleSource) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Rule(format!("duplicate rule id `{}`", r.id)));
            }
            if r.kind.depth() > MAX_IMPLICATION_DEPTH {
                return Err(Error::Rule(format!(
                    "rule `{}`: implication nesting deeper than {MAX_IMPLICATION_DEPTH}",
                    r.id
                )));
            }
        }
        Ok(Self { rules, source })
    }

    pub fn from_specs(specs: &[RuleSpec]) -> Result<Self> {
        let rules = specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let id = s.id.clone().unwrap_or_else(|| format!("rule{}", i + 1));
                Ok(ConstraintRule {
                    kind: s.to_kind(&id)?,
                    id,
                    severity: s.severity.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rules, RuleSource::Declared)
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Appends rules from `other`, keeping ids unique.
    pub fn extend(&mut self, other: ConstraintRuleSet) -> Result<()> {
        let mut all = std::mem::take(&mut self.rules);
        all.extend(other.rules);
        *self = Self::new(all, self.source)?;
        Ok(())
    }

    /// Plan-time check that every referenced field exists with a usable kind.
    pub fn check_fields(&self, table: &RecordTable) -> Result<()> {
        for r in &self.rules {
            check_kind(&r.id, &r.kind, table)?;
        }
        Ok(())
    }
}

fn check_kind(id: &str, kind: &RuleKind, table: &RecordTable) -> Result<()> {
    let mut fields = Vec::new();
    kind.fields(&mut fields);
    for f in &fields {
        table.require_column(f).map_err(|_| Error::Rule(format!("rule `{id}` references unknown field `{f}`")))?;
    }
    let numeric = |f: &str| -> Result<()> {
        if table.kind(f) != Some(ColumnKind::Numeric) {
            return Err(Error::Rule(format!("rule `{id}`: field `{f}` is not numeric")));
        }
        Ok(())
    };
    match kind {
        RuleKind::Range { field, .. } => numeric(field),
        RuleKind::Linear { weights, .. } => weights.iter().try_for_each(|(f, _)| numeric(f)),
        RuleKind::AllowedSet { .. } => Ok(()),
        RuleKind::Implication { then, .. } => check_kind(id, then, table),
    }
}

/// Outcome of one rule on one row.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Check {
    Satisfied,
    /// Distance to the nearest satisfying value (1 for categorical rules).
    Violated(f64),
    /// A needed value is missing, or an antecedent could not be evaluated.
    Vacuous,
}

struct Row<'a> {
    table: &'a RecordTable,
    idx: usize,
}

impl Row<'_> {
    fn value(&self, field: &str) -> Option<&Value> {
        let c = self.table.column_index(field)?;
        self.table.cell(self.idx, c)
    }

    fn number(&self, field: &str) -> Option<f64> {
        self.value(field).and_then(Value::as_f64)
    }
}

fn linear_parts(row: &Row<'_>, weights: &[(String, f64)]) -> Option<(f64, f64)> {
    let mut lhs = 0.0;
    let mut norm2 = 0.0;
    for (f, w) in weights {
        lhs += w * row.number(f)?;
        norm2 += w * w;
    }
    Some((lhs, norm2.sqrt()))
}

fn check(kind: &RuleKind, row: &Row<'_>) -> Check {
    match kind {
        RuleKind::Range { field, min, max } => match row.number(field) {
            None => Check::Vacuous,
            Some(v) => {
                let below = min.map_or(0.0, |lo| (lo - v).max(0.0));
                let above = max.map_or(0.0, |hi| (v - hi).max(0.0));
                if below > 0.0 || above > 0.0 {
                    Check::Violated(below + above)
                } else {
                    Check::Satisfied
                }
            }
        },
        RuleKind::AllowedSet { field, values } => match row.value(field) {
            None => Check::Vacuous,
            Some(v) if values.contains(&v.key()) => Check::Satisfied,
            Some(_) => Check::Violated(1.0),
        },
        RuleKind::Linear { weights, bound, sense } => match linear_parts(row, weights) {
            None => Check::Vacuous,
            Some((lhs, wn)) => {
                let excess = match sense {
                    Sense::AtMost => lhs - bound,
                    Sense::AtLeast => bound - lhs,
                };
                if excess > 0.0 {
                    Check::Violated(excess / wn)
                } else {
                    Check::Satisfied
                }
            }
        },
        RuleKind::Implication { when, then } => match row.value(&when.field) {
            None => Check::Vacuous,
            Some(v) if when.values.contains(&v.key()) => check(then, row),
            Some(_) => Check::Satisfied,
        },
    }
}

/// Distance from a satisfying row to the rule's boundary, when the rule has
/// a numeric boundary that applies to the row.
fn margin(kind: &RuleKind, row: &Row<'_>) -> Option<f64> {
    match kind {
        RuleKind::Range { field, min, max } => {
            let v = row.number(field)?;
            let lo = min.map(|lo| v - lo);
            let hi = max.map(|hi| hi - v);
            lo.into_iter().chain(hi).min_by(f64::total_cmp)
        }
        RuleKind::AllowedSet { .. } => None,
        RuleKind::Linear { weights, bound, sense } => {
            let (lhs, wn) = linear_parts(row, weights)?;
            Some(match sense {
                Sense::AtMost => (bound - lhs) / wn,
                Sense::AtLeast => (lhs - bound) / wn,
            })
        }
        RuleKind::Implication { when, then } => {
            let v = row.value(&when.field)?;
            if when.values.contains(&v.key()) {
                margin(then, row)
            } else {
                None
            }
        }
    }
}

/// Per-row evaluation of a whole rule set.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleEvaluation {
    /// Violation magnitude per row (`None` for valid rows).
    pub row_magnitude: Vec<Option<f64>>,
    /// Violations per rule id.
    pub per_rule: BTreeMap<String, usize>,
    /// Rule evaluations skipped because a value was missing.
    pub vacuous: usize,
}

impl RuleEvaluation {
    pub fn violating_rows(&self) -> usize {
        self.row_magnitude.iter().filter(|m| m.is_some()).count()
    }
}

/// Evaluates every rule on every row. A row's magnitude combines the
/// per-rule distances of its violated rules in quadrature.
pub fn evaluate_rules(data: &RecordTable, rules: &ConstraintRuleSet) -> Result<RuleEvaluation> {
    rules.check_fields(data)?;
    let mut per_rule: BTreeMap<String, usize> = rules.rules.iter().map(|r| (r.id.clone(), 0)).collect();
    let mut vacuous = 0;
    let row_magnitude = (0..data.n_rows())
        .map(|idx| {
            let row = Row { table: data, idx };
            let mut sq = 0.0;
            let mut violated = false;
            for r in &rules.rules {
                match check(&r.kind, &row) {
                    Check::Satisfied => {}
                    Check::Vacuous => vacuous += 1,
                    Check::Violated(d) => {
                        violated = true;
                        sq += d * d;
                        *per_rule.get_mut(&r.id).expect("seeded") += 1;
                    }
                }
            }
            violated.then(|| sq.sqrt())
        })
        .collect();
    Ok(RuleEvaluation {
        row_magnitude,
        per_rule,
        vacuous,
    })
}

fn require_rows(data: &RecordTable) -> Result<()> {
    if data.n_rows() == 0 {
        return Err(Error::InvalidData("record table has no rows".into()));
    }
    Ok(())
}

fn with_rule_diagnostics(mut r: MetricResult, ev: &RuleEvaluation) -> MetricResult {
    for (id, n) in &ev.per_rule {
        r = r.with_diag(&format!("violations:{id}"), *n as f64);
    }
    if ev.vacuous > 0 {
        r = r
            .with_diag("vacuous_checks", ev.vacuous as f64)
            .with_note("rules with missing values were treated as satisfied");
    }
    r
}

/// Fraction of rows violating at least one rule.
pub fn violation_rate(data: &RecordTable, rules: &ConstraintRuleSet) -> Result<MetricResult> {
    require_rows(data)?;
    let ev = evaluate_rules(data, rules)?;
    let rate = ev.violating_rows() as f64 / data.n_rows() as f64;
    Ok(with_rule_diagnostics(MetricResult::new(Metric::ConstraintViolationRate, rate), &ev))
}

/// Mean violation magnitude over violating rows; 0 when none violate.
pub fn violation_magnitude(data: &RecordTable, rules: &ConstraintRuleSet) -> Result<MetricResult> {
    require_rows(data)?;
    let ev = evaluate_rules(data, rules)?;
    let mags: Vec<f64> = ev.row_magnitude.iter().flatten().copied().collect();
    let mean = if mags.is_empty() {
        0.0
    } else {
        mags.iter().sum::<f64>() / mags.len() as f64
    };
    Ok(MetricResult::new(Metric::DistanceToConstraintBoundary, mean)
        .with_diag("violating_rows", mags.len() as f64))
}

/// Mean over valid rows of the distance to the nearest rule boundary.
pub fn margin_to_boundary(data: &RecordTable, rules: &ConstraintRuleSet) -> Result<MetricResult> {
    require_rows(data)?;
    let ev = evaluate_rules(data, rules)?;
    let valid: Vec<usize> = (0..data.n_rows()).filter(|&i| ev.row_magnitude[i].is_none()).collect();
    if valid.is_empty() {
        return Ok(MetricResult::undefined(Metric::NearestInvalidDatapoint, "all rows invalid"));
    }
    let margins: Vec<f64> = valid
        .iter()
        .filter_map(|&idx| {
            let row = Row { table: data, idx };
            rules.rules.iter().filter_map(|r| margin(&r.kind, &row)).min_by(f64::total_cmp)
        })
        .collect();
    if margins.is_empty() {
        return Ok(MetricResult::undefined(
            Metric::NearestInvalidDatapoint,
            "no bounded rule applies to any valid row",
        ));
    }
    let s = sorted(&margins);
    let mean = margins.iter().sum::<f64>() / margins.len() as f64;
    Ok(MetricResult::new(Metric::NearestInvalidDatapoint, mean)
        .with_diag("rows", margins.len() as f64)
        .with_diag("min", s[0])
        .with_diag("q25", quantile_sorted(&s, 0.25))
        .with_diag("median", quantile_sorted(&s, 0.5))
        .with_diag("q75", quantile_sorted(&s, 0.75))
        .with_diag("max", s[s.len() - 1]))
}

/// One range rule per field from the real data: `[min, max]` widened by the
/// distance between each extreme and the `q` / `1 − q` quantile, so
/// `lo = min − (Q(q) − min)` and `hi = max + (max − Q(1 − q))`.
pub fn derive_range_rules(real: &RecordTable, fields: &[String], quantile_margin: f64) -> Result<ConstraintRuleSet> {
    if !(0.0..0.5).contains(&quantile_margin) {
        return Err(Error::Rule(format!("quantile margin {quantile_margin} outside [0, 0.5)")));
    }
    let mut rules = Vec::with_capacity(fields.len());
    for f in fields {
        if real.kind(f).ok_or_else(|| Error::UnknownField(f.clone()))? != ColumnKind::Numeric {
            return Err(Error::Rule(format!("cannot derive a range for non-numeric field `{f}`")));
        }
        let values = sorted(&real.numeric_values(f)?);
        if values.is_empty() {
            return Err(Error::Rule(format!("field `{f}` is entirely missing in the reference table")));
        }
        let (min, max) = (values[0], values[values.len() - 1]);
        let lo = min - (quantile_sorted(&values, quantile_margin) - min);
        let hi = max + (max - quantile_sorted(&values, 1.0 - quantile_margin));
        rules.push(ConstraintRule {
            id: format!("range:{f}"),
            kind: RuleKind::Range {
                field: f.clone(),
                min: Some(lo),
                max: Some(hi),
            },
            severity: None,
        });
    }
    ConstraintRuleSet::new(rules, RuleSource::DerivedFromReference)
}
