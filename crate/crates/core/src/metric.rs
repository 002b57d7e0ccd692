//! Routing metric algebra: the `(M, W, met, mr, ≺)` five-tuple, the built-in
//! metrics, and checkers for boundedness, monotonicity, utility and fixed
//! points.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("value outside the metric domain: {0}")]
    OutOfDomain(String),
    #[error("max_by_order called on an empty sequence")]
    EmptySequence,
    #[error("capability unavailable: {0}")]
    Capability(String),
    #[error("cannot parse metric: {0}")]
    Parse(String),
}

/// A metric value, an element of `M`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricValue {
    Nat(u64),
    Real(BigRational),
    Label(String),
}

/// An edge weight, an element of `W`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weight {
    Nat(u64),
    Real(BigRational),
    Label(String),
}

impl MetricValue {
    pub fn real(numer: i64, denom: i64) -> Self {
        MetricValue::Real(BigRational::new(numer.into(), denom.into()))
    }

    pub fn label(s: impl Into<String>) -> Self {
        MetricValue::Label(s.into())
    }
}

impl Weight {
    pub fn real(numer: i64, denom: i64) -> Self {
        Weight::Real(BigRational::new(numer.into(), denom.into()))
    }

    pub fn label(s: impl Into<String>) -> Self {
        Weight::Label(s.into())
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Nat(n) => write!(f, "{n}"),
            MetricValue::Real(r) => f.write_str(&format_ratio(r)),
            MetricValue::Label(s) => f.write_str(s),
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Nat(n) => write!(f, "{n}"),
            Weight::Real(r) => f.write_str(&format_ratio(r)),
            Weight::Label(s) => f.write_str(s),
        }
    }
}

/// Formats a rational as an exact decimal when its denominator only has the
/// prime factors 2 and 5, and as `p/q` otherwise.
pub fn format_ratio(r: &BigRational) -> String {
    if r.denom().is_one() {
        return r.numer().to_string();
    }
    let mut denom = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let scaled = r * BigRational::from_integer(BigInt::from(10).pow(digits));
    let scaled = scaled.to_integer();
    let negative = scaled.is_negative();
    let mut text = scaled.abs().to_string();
    let width = digits as usize + 1;
    if text.len() < width {
        text = format!("{}{}", "0".repeat(width - text.len()), text);
    }
    let split = text.len() - digits as usize;
    let out = format!("{}.{}", &text[..split], &text[split..]);
    if negative {
        format!("-{out}")
    } else {
        out
    }
}

/// Parses `"3/4"`, `"0.75"` or `"1"` into an exact rational.
pub fn parse_ratio(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches('-');
        let int_part: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().ok()?
        };
        let frac_part: BigInt = frac.parse().ok()?;
        let scale = BigInt::from(10).pow(frac.len() as u32);
        let magnitude = BigRational::new(int_part * &scale + frac_part, scale);
        return Some(if negative { -magnitude } else { magnitude });
    }
    let n: BigInt = text.parse().ok()?;
    Some(BigRational::from_integer(n))
}

fn json_ratio(raw: &Json) -> Option<BigRational> {
    match raw {
        Json::String(s) => parse_ratio(s),
        // Shortest round-trip formatting recovers the decimal literal.
        Json::Number(n) => parse_ratio(&n.to_string()),
        _ => None,
    }
}

fn json_nat(raw: &Json) -> Option<u64> {
    match raw {
        Json::Number(n) => n.as_u64(),
        Json::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// The routing metric abstraction.
///
/// `compose` is `met`; callers guarantee `m ∈ M` and `w ∈ W`. The checked
/// variant is [`MetricSpace::met`].
pub trait MetricSpace: fmt::Debug + Send + Sync {
    /// Short name, also the scenario-file spelling for built-ins.
    fn name(&self) -> String;

    /// `mr`, the maximum metric value carried by a root.
    fn root_value(&self) -> MetricValue;

    fn compose(&self, m: &MetricValue, w: &Weight) -> MetricValue;

    /// `a ≺ b`.
    fn precedes(&self, a: &MetricValue, b: &MetricValue) -> bool;

    fn contains_value(&self, m: &MetricValue) -> bool;

    fn contains_weight(&self, w: &Weight) -> bool;

    /// Finite enumeration of `M`, in ascending `≺` order, when available.
    fn values(&self) -> Option<Vec<MetricValue>> {
        None
    }

    /// Finite enumeration of `W`, when available.
    fn weights(&self) -> Option<Vec<Weight>> {
        None
    }

    fn sample_value(&self, _rng: &mut dyn RngCore) -> Option<MetricValue> {
        None
    }

    fn sample_weight(&self, _rng: &mut dyn RngCore) -> Option<Weight> {
        None
    }

    fn parse_value(&self, raw: &Json) -> Result<MetricValue, MetricError>;

    fn parse_weight(&self, raw: &Json) -> Result<Weight, MetricError>;

    /// Scenario-file form of this metric (a name string or an inline table).
    fn to_json(&self) -> Json;

    fn value_to_json(&self, m: &MetricValue) -> Json {
        match m {
            MetricValue::Nat(n) => json!(n),
            other => json!(other.to_string()),
        }
    }

    fn weight_to_json(&self, w: &Weight) -> Json {
        match w {
            Weight::Nat(n) => json!(n),
            other => json!(other.to_string()),
        }
    }

    /// `met` with domain checking.
    fn met(&self, m: &MetricValue, w: &Weight) -> Result<MetricValue, MetricError> {
        if !self.contains_value(m) {
            return Err(MetricError::OutOfDomain(format!("metric value {m}")));
        }
        if !self.contains_weight(w) {
            return Err(MetricError::OutOfDomain(format!("weight {w}")));
        }
        Ok(self.compose(m, w))
    }

    /// `a ⪯ b`.
    fn precedes_or_eq(&self, a: &MetricValue, b: &MetricValue) -> bool {
        a == b || self.precedes(a, b)
    }

    /// The `≺`-maximum of a nonempty sequence.
    fn max_by_order(&self, values: &[MetricValue]) -> Result<MetricValue, MetricError> {
        let (first, rest) = values.split_first().ok_or(MetricError::EmptySequence)?;
        for v in values {
            if !self.contains_value(v) {
                return Err(MetricError::OutOfDomain(format!("metric value {v}")));
            }
        }
        Ok(self.max_of(first, rest.iter()).clone())
    }

    /// Unchecked `≺`-maximum helper; keeps the earliest among equals.
    fn max_of<'a>(
        &self,
        first: &'a MetricValue,
        rest: std::slice::Iter<'a, MetricValue>,
    ) -> &'a MetricValue {
        let mut best = first;
        for v in rest {
            if self.precedes(best, v) {
                best = v;
            }
        }
        best
    }
}

pub type SharedMetric = Arc<dyn MetricSpace>;

const DEFAULT_SP_SAMPLE_CEILING: u64 = 64;

/// Shortest path: `met(m, w) = m + w`, `≺` is numeric `>`, `mr = 0`.
///
/// Unrestricted, `M = W = ℕ`. The restricted form bounds `M` to `{0..limit}`
/// and `W` to an explicit set, which makes both enumerable for the checkers;
/// `compose` may then leave `M`.
#[derive(Clone, Debug)]
pub struct ShortestPath {
    value_limit: Option<u64>,
    weight_set: Option<Vec<u64>>,
    sample_ceiling: u64,
}

impl Default for ShortestPath {
    fn default() -> Self {
        Self::new()
    }
}

impl ShortestPath {
    pub fn new() -> Self {
        ShortestPath { value_limit: None, weight_set: None, sample_ceiling: DEFAULT_SP_SAMPLE_CEILING }
    }

    pub fn restricted(value_limit: u64, weights: Vec<u64>) -> Self {
        ShortestPath { value_limit: Some(value_limit), weight_set: Some(weights), sample_ceiling: value_limit }
    }

    /// Upper end of the uniform range used when sampling from `ℕ`.
    pub fn with_sample_ceiling(mut self, ceiling: u64) -> Self {
        self.sample_ceiling = ceiling;
        self
    }
}

impl MetricSpace for ShortestPath {
    fn name(&self) -> String {
        match (&self.value_limit, &self.weight_set) {
            (None, None) => "sp".into(),
            (limit, set) => format!("sp[M<={limit:?},W={set:?}]"),
        }
    }

    fn root_value(&self) -> MetricValue {
        MetricValue::Nat(0)
    }

    fn compose(&self, m: &MetricValue, w: &Weight) -> MetricValue {
        match (m, w) {
            (MetricValue::Nat(m), Weight::Nat(w)) => MetricValue::Nat(m.saturating_add(*w)),
            _ => m.clone(),
        }
    }

    fn precedes(&self, a: &MetricValue, b: &MetricValue) -> bool {
        match (a, b) {
            (MetricValue::Nat(a), MetricValue::Nat(b)) => a > b,
            _ => false,
        }
    }

    fn contains_value(&self, m: &MetricValue) -> bool {
        match m {
            MetricValue::Nat(n) => self.value_limit.is_none_or(|limit| *n <= limit),
            _ => false,
        }
    }

    fn contains_weight(&self, w: &Weight) -> bool {
        match w {
            Weight::Nat(n) => self.weight_set.as_ref().is_none_or(|set| set.contains(n)),
            _ => false,
        }
    }

    fn values(&self) -> Option<Vec<MetricValue>> {
        // Ascending ≺ means descending numerically.
        self.value_limit.map(|limit| (0..=limit).rev().map(MetricValue::Nat).collect())
    }

    fn weights(&self) -> Option<Vec<Weight>> {
        self.weight_set.as_ref().map(|set| set.iter().copied().map(Weight::Nat).collect())
    }

    fn sample_value(&self, rng: &mut dyn RngCore) -> Option<MetricValue> {
        let ceiling = self.value_limit.unwrap_or(self.sample_ceiling);
        Some(MetricValue::Nat(rng.gen_range(0..=ceiling)))
    }

    fn sample_weight(&self, rng: &mut dyn RngCore) -> Option<Weight> {
        match &self.weight_set {
            Some(set) if !set.is_empty() => Some(Weight::Nat(set[rng.gen_range(0..set.len())])),
            Some(_) => None,
            None => Some(Weight::Nat(rng.gen_range(0..=self.sample_ceiling))),
        }
    }

    fn parse_value(&self, raw: &Json) -> Result<MetricValue, MetricError> {
        let v = json_nat(raw)
            .map(MetricValue::Nat)
            .ok_or_else(|| MetricError::Parse(format!("expected a natural number, got {raw}")))?;
        if !self.contains_value(&v) {
            return Err(MetricError::OutOfDomain(format!("metric value {v}")));
        }
        Ok(v)
    }

    fn parse_weight(&self, raw: &Json) -> Result<Weight, MetricError> {
        let w = json_nat(raw)
            .map(Weight::Nat)
            .ok_or_else(|| MetricError::Parse(format!("expected a natural weight, got {raw}")))?;
        if !self.contains_weight(&w) {
            return Err(MetricError::OutOfDomain(format!("weight {w}")));
        }
        Ok(w)
    }

    fn to_json(&self) -> Json {
        json!("sp")
    }
}

/// Flow (bottleneck bandwidth): `met(m, w) = min{m, w}` over `{0..mr}`,
/// `≺` is numeric `<`.
#[derive(Clone, Debug)]
pub struct Flow {
    mr: u64,
}

impl Flow {
    pub fn new(mr: u64) -> Self {
        Flow { mr }
    }

    pub fn max_value(&self) -> u64 {
        self.mr
    }
}

impl MetricSpace for Flow {
    fn name(&self) -> String {
        format!("flow:{}", self.mr)
    }

    fn root_value(&self) -> MetricValue {
        MetricValue::Nat(self.mr)
    }

    fn compose(&self, m: &MetricValue, w: &Weight) -> MetricValue {
        match (m, w) {
            (MetricValue::Nat(m), Weight::Nat(w)) => MetricValue::Nat((*m).min(*w)),
            _ => m.clone(),
        }
    }

    fn precedes(&self, a: &MetricValue, b: &MetricValue) -> bool {
        match (a, b) {
            (MetricValue::Nat(a), MetricValue::Nat(b)) => a < b,
            _ => false,
        }
    }

    fn contains_value(&self, m: &MetricValue) -> bool {
        matches!(m, MetricValue::Nat(n) if *n <= self.mr)
    }

    fn contains_weight(&self, w: &Weight) -> bool {
        matches!(w, Weight::Nat(n) if *n <= self.mr)
    }

    fn values(&self) -> Option<Vec<MetricValue>> {
        Some((0..=self.mr).map(MetricValue::Nat).collect())
    }

    fn weights(&self) -> Option<Vec<Weight>> {
        Some((0..=self.mr).map(Weight::Nat).collect())
    }

    fn sample_value(&self, rng: &mut dyn RngCore) -> Option<MetricValue> {
        Some(MetricValue::Nat(rng.gen_range(0..=self.mr)))
    }

    fn sample_weight(&self, rng: &mut dyn RngCore) -> Option<Weight> {
        Some(Weight::Nat(rng.gen_range(0..=self.mr)))
    }

    fn parse_value(&self, raw: &Json) -> Result<MetricValue, MetricError> {
        let v = json_nat(raw)
            .map(MetricValue::Nat)
            .ok_or_else(|| MetricError::Parse(format!("expected a natural number, got {raw}")))?;
        if !self.contains_value(&v) {
            return Err(MetricError::OutOfDomain(format!("metric value {v} exceeds mr={}", self.mr)));
        }
        Ok(v)
    }

    fn parse_weight(&self, raw: &Json) -> Result<Weight, MetricError> {
        let w = json_nat(raw)
            .map(Weight::Nat)
            .ok_or_else(|| MetricError::Parse(format!("expected a natural weight, got {raw}")))?;
        if !self.contains_weight(&w) {
            return Err(MetricError::OutOfDomain(format!("weight {w} exceeds mr={}", self.mr)));
        }
        Ok(w)
    }

    fn to_json(&self) -> Json {
        json!(self.name())
    }
}

/// Reliability: `met(m, w) = m·w` over exact rationals in `[0, 1]`, `≺` is
/// numeric `<`, `mr = 1`. Sampling draws from a finite grid.
#[derive(Clone, Debug)]
pub struct Reliability {
    grid: Vec<BigRational>,
}

impl Default for Reliability {
    fn default() -> Self {
        Self::new()
    }
}

impl Reliability {
    /// Sampling grid `{k/100 : 0 ≤ k ≤ 100}`.
    pub fn new() -> Self {
        let grid = (0..=100i64).map(|k| BigRational::new(k.into(), 100.into())).collect();
        Reliability { grid }
    }

    pub fn with_grid(grid: Vec<BigRational>) -> Self {
        Reliability { grid }
    }

    /// The quarter grid `{0, 0.25, 0.5, 0.75, 1}`.
    pub fn quarters() -> Self {
        Self::with_grid((0..=4i64).map(|k| BigRational::new(k.into(), 4.into())).collect())
    }

    pub fn grid(&self) -> &[BigRational] {
        &self.grid
    }

    fn in_unit(r: &BigRational) -> bool {
        !r.is_negative() && *r <= BigRational::one()
    }
}

impl MetricSpace for Reliability {
    fn name(&self) -> String {
        "reliability".into()
    }

    fn root_value(&self) -> MetricValue {
        MetricValue::Real(BigRational::one())
    }

    fn compose(&self, m: &MetricValue, w: &Weight) -> MetricValue {
        match (m, w) {
            (MetricValue::Real(m), Weight::Real(w)) => MetricValue::Real(m * w),
            _ => m.clone(),
        }
    }

    fn precedes(&self, a: &MetricValue, b: &MetricValue) -> bool {
        match (a, b) {
            (MetricValue::Real(a), MetricValue::Real(b)) => a < b,
            _ => false,
        }
    }

    fn contains_value(&self, m: &MetricValue) -> bool {
        matches!(m, MetricValue::Real(r) if Self::in_unit(r))
    }

    fn contains_weight(&self, w: &Weight) -> bool {
        matches!(w, Weight::Real(r) if Self::in_unit(r))
    }

    fn sample_value(&self, rng: &mut dyn RngCore) -> Option<MetricValue> {
        if self.grid.is_empty() {
            return None;
        }
        Some(MetricValue::Real(self.grid[rng.gen_range(0..self.grid.len())].clone()))
    }

    fn sample_weight(&self, rng: &mut dyn RngCore) -> Option<Weight> {
        if self.grid.is_empty() {
            return None;
        }
        Some(Weight::Real(self.grid[rng.gen_range(0..self.grid.len())].clone()))
    }

    fn parse_value(&self, raw: &Json) -> Result<MetricValue, MetricError> {
        let r = json_ratio(raw).ok_or_else(|| MetricError::Parse(format!("expected a rational, got {raw}")))?;
        let v = MetricValue::Real(r);
        if !self.contains_value(&v) {
            return Err(MetricError::OutOfDomain(format!("metric value {v} outside [0,1]")));
        }
        Ok(v)
    }

    fn parse_weight(&self, raw: &Json) -> Result<Weight, MetricError> {
        let r = json_ratio(raw).ok_or_else(|| MetricError::Parse(format!("expected a rational, got {raw}")))?;
        let w = Weight::Real(r);
        if !self.contains_weight(&w) {
            return Err(MetricError::OutOfDomain(format!("weight {w} outside [0,1]")));
        }
        Ok(w)
    }

    fn to_json(&self) -> Json {
        json!("reliability")
    }
}

/// A finite metric given as explicit tables.
///
/// `values` lists `M` in ascending `≺` order, so `mr` is the last entry.
/// `table[i][j]` is the index in `values` of `met(values[i], weights[j])`.
#[derive(Clone, Debug)]
pub struct TableMetric {
    values: Vec<String>,
    weights: Vec<String>,
    table: Vec<Vec<usize>>,
}

impl TableMetric {
    pub fn new(values: Vec<String>, weights: Vec<String>, table: Vec<Vec<usize>>) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::Parse("table metric needs at least one value".into()));
        }
        if weights.is_empty() {
            return Err(MetricError::Parse("table metric needs at least one weight".into()));
        }
        let distinct: BTreeSet<_> = values.iter().collect();
        if distinct.len() != values.len() {
            return Err(MetricError::Parse("duplicate metric value label".into()));
        }
        let distinct: BTreeSet<_> = weights.iter().collect();
        if distinct.len() != weights.len() {
            return Err(MetricError::Parse("duplicate weight label".into()));
        }
        if table.len() != values.len() || table.iter().any(|row| row.len() != weights.len()) {
            return Err(MetricError::Parse(format!(
                "met table must be {}x{} (values x weights)",
                values.len(),
                weights.len()
            )));
        }
        if table.iter().flatten().any(|&idx| idx >= values.len()) {
            return Err(MetricError::Parse("met table refers to an unknown value".into()));
        }
        Ok(TableMetric { values, weights, table })
    }

    /// Parses `{"values": [...], "weights": [...], "met": [[...]], "mr": ...}`.
    /// `mr`, when present, must name the last (≺-greatest) value.
    pub fn from_json(raw: &Json) -> Result<Self, MetricError> {
        let obj = raw.as_object().ok_or_else(|| MetricError::Parse("table must be an object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "values" | "weights" | "met" | "mr") {
                return Err(MetricError::Parse(format!("unknown table member `{key}`")));
            }
        }
        let labels = |key: &str| -> Result<Vec<String>, MetricError> {
            obj.get(key)
                .and_then(Json::as_array)
                .ok_or_else(|| MetricError::Parse(format!("table member `{key}` must be a list")))?
                .iter()
                .map(json_label)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| MetricError::Parse(format!("table member `{key}` must hold labels")))
        };
        let values = labels("values")?;
        let weights = labels("weights")?;
        let rows = obj
            .get("met")
            .and_then(Json::as_array)
            .ok_or_else(|| MetricError::Parse("table member `met` must be a list of rows".into()))?;
        let mut table = Vec::with_capacity(rows.len());
        for row in rows {
            let row = row.as_array().ok_or_else(|| MetricError::Parse("met row must be a list".into()))?;
            let mut out = Vec::with_capacity(row.len());
            for cell in row {
                let label = json_label(cell).ok_or_else(|| MetricError::Parse("met cell must be a label".into()))?;
                let idx = values
                    .iter()
                    .position(|v| *v == label)
                    .ok_or_else(|| MetricError::Parse(format!("met cell `{label}` is not a listed value")))?;
                out.push(idx);
            }
            table.push(out);
        }
        let metric = TableMetric::new(values, weights, table)?;
        if let Some(mr) = obj.get("mr") {
            let mr = json_label(mr).ok_or_else(|| MetricError::Parse("mr must be a label".into()))?;
            if Some(&mr) != metric.values.last() {
                return Err(MetricError::Parse(format!(
                    "mr `{mr}` must be the ≺-greatest value, i.e. the last entry of `values`"
                )));
            }
        }
        Ok(metric)
    }

    fn value_index(&self, m: &MetricValue) -> Option<usize> {
        match m {
            MetricValue::Label(s) => self.values.iter().position(|v| v == s),
            _ => None,
        }
    }

    fn weight_index(&self, w: &Weight) -> Option<usize> {
        match w {
            Weight::Label(s) => self.weights.iter().position(|v| v == s),
            _ => None,
        }
    }
}

fn json_label(raw: &Json) -> Option<String> {
    match raw {
        Json::String(s) => Some(s.clone()),
        Json::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

impl MetricSpace for TableMetric {
    fn name(&self) -> String {
        "table".into()
    }

    fn root_value(&self) -> MetricValue {
        MetricValue::Label(self.values.last().cloned().unwrap_or_default())
    }

    fn compose(&self, m: &MetricValue, w: &Weight) -> MetricValue {
        match (self.value_index(m), self.weight_index(w)) {
            (Some(i), Some(j)) => MetricValue::Label(self.values[self.table[i][j]].clone()),
            _ => m.clone(),
        }
    }

    fn precedes(&self, a: &MetricValue, b: &MetricValue) -> bool {
        match (self.value_index(a), self.value_index(b)) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        }
    }

    fn contains_value(&self, m: &MetricValue) -> bool {
        self.value_index(m).is_some()
    }

    fn contains_weight(&self, w: &Weight) -> bool {
        self.weight_index(w).is_some()
    }

    fn values(&self) -> Option<Vec<MetricValue>> {
        Some(self.values.iter().cloned().map(MetricValue::Label).collect())
    }

    fn weights(&self) -> Option<Vec<Weight>> {
        Some(self.weights.iter().cloned().map(Weight::Label).collect())
    }

    fn sample_value(&self, rng: &mut dyn RngCore) -> Option<MetricValue> {
        Some(MetricValue::Label(self.values[rng.gen_range(0..self.values.len())].clone()))
    }

    fn sample_weight(&self, rng: &mut dyn RngCore) -> Option<Weight> {
        Some(Weight::Label(self.weights[rng.gen_range(0..self.weights.len())].clone()))
    }

    fn parse_value(&self, raw: &Json) -> Result<MetricValue, MetricError> {
        let label = json_label(raw).ok_or_else(|| MetricError::Parse(format!("expected a label, got {raw}")))?;
        let v = MetricValue::Label(label);
        if !self.contains_value(&v) {
            return Err(MetricError::OutOfDomain(format!("metric value {v}")));
        }
        Ok(v)
    }

    fn parse_weight(&self, raw: &Json) -> Result<Weight, MetricError> {
        let label = json_label(raw).ok_or_else(|| MetricError::Parse(format!("expected a label, got {raw}")))?;
        let w = Weight::Label(label);
        if !self.contains_weight(&w) {
            return Err(MetricError::OutOfDomain(format!("weight {w}")));
        }
        Ok(w)
    }

    fn to_json(&self) -> Json {
        let met: Vec<Vec<&str>> = self
            .table
            .iter()
            .map(|row| row.iter().map(|&i| self.values[i].as_str()).collect())
            .collect();
        json!({
            "table": {
                "values": self.values,
                "weights": self.weights,
                "met": met,
                "mr": self.values.last(),
            }
        })
    }
}

/// A metric with a single value `m` and a single weight `w`.
pub fn single_valued() -> TableMetric {
    TableMetric::new(vec!["m".into()], vec!["w".into()], vec![vec![0]]).expect("well-formed table")
}

/// Parses `"sp"`, `"flow:{mr}"` or `"reliability"`.
pub fn parse_metric_name(text: &str) -> Result<SharedMetric, MetricError> {
    let text = text.trim();
    match text {
        "sp" => Ok(Arc::new(ShortestPath::new())),
        "reliability" => Ok(Arc::new(Reliability::new())),
        _ => {
            if let Some(mr) = text.strip_prefix("flow:") {
                let mr: u64 = mr
                    .trim()
                    .parse()
                    .map_err(|_| MetricError::Parse(format!("bad flow bound in `{text}`")))?;
                Ok(Arc::new(Flow::new(mr)))
            } else {
                Err(MetricError::Parse(format!("unknown metric `{text}`")))
            }
        }
    }
}

/// Parses the scenario-file `metric` member: a name or `{"table": {...}}`.
pub fn metric_from_json(raw: &Json) -> Result<SharedMetric, MetricError> {
    match raw {
        Json::String(s) => parse_metric_name(s),
        Json::Object(obj) => {
            if obj.len() != 1 {
                return Err(MetricError::Parse("inline metric must have exactly the member `table`".into()));
            }
            let table = obj
                .get("table")
                .ok_or_else(|| MetricError::Parse("inline metric must have the member `table`".into()))?;
            Ok(Arc::new(TableMetric::from_json(table)?))
        }
        other => Err(MetricError::Parse(format!("metric must be a name or table, got {other}"))),
    }
}

/// How thoroughly a checker covered the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coverage {
    Exhaustive { cases: usize },
    Sampled { draws: usize },
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coverage::Exhaustive { cases } => write!(f, "exhaustive, {cases} cases"),
            Coverage::Sampled { draws } => write!(f, "sampled, {draws} draws"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// `met(value, weight) = composed` with `value ≺ composed`.
    Bounded { value: MetricValue, weight: Weight, composed: MetricValue },
    /// `lower ≺ upper` but `met(upper, weight) ≺ met(lower, weight)`.
    Monotonic { lower: MetricValue, upper: MetricValue, weight: Weight },
    /// No chain of `met` applications from `mr` reaches `value`.
    Unreachable { value: MetricValue },
    Irreflexivity { value: MetricValue },
    Transitivity { a: MetricValue, b: MetricValue, c: MetricValue },
    Totality { a: MetricValue, b: MetricValue },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Bounded { value, weight, composed } => {
                write!(f, "met({value}, {weight}) = {composed} exceeds {value}")
            }
            Witness::Monotonic { lower, upper, weight } => {
                write!(f, "{lower} ≺ {upper} but met({upper}, {weight}) ≺ met({lower}, {weight})")
            }
            Witness::Unreachable { value } => write!(f, "{value} is unreachable from mr"),
            Witness::Irreflexivity { value } => write!(f, "{value} ≺ {value}"),
            Witness::Transitivity { a, b, c } => write!(f, "{a} ≺ {b} ≺ {c} but not {a} ≺ {c}"),
            Witness::Totality { a, b } => write!(f, "{a} and {b} are incomparable"),
        }
    }
}

/// Checker verdict: PASS when `witness` is `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub coverage: Coverage,
    pub witness: Option<Witness>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.coverage, Coverage::Sampled { .. })
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = if self.is_sampled() { "sampled " } else { "" };
        match &self.witness {
            None => write!(f, "{prefix}PASS ({})", self.coverage),
            Some(w) => write!(f, "{prefix}FAIL ({}): {w}", self.coverage),
        }
    }
}

enum Domain {
    Enumerated(Vec<MetricValue>, Vec<Weight>),
    Sampled,
}

fn domain(ms: &dyn MetricSpace) -> Result<Domain, MetricError> {
    if let (Some(values), Some(weights)) = (ms.values(), ms.weights()) {
        return Ok(Domain::Enumerated(values, weights));
    }
    let mut probe = ChaCha8Rng::seed_from_u64(0);
    if ms.sample_value(&mut probe).is_some() && ms.sample_weight(&mut probe).is_some() {
        return Ok(Domain::Sampled);
    }
    Err(MetricError::Capability(format!("metric `{}` has neither enumeration nor sampler", ms.name())))
}

fn draw(ms: &dyn MetricSpace, rng: &mut ChaCha8Rng) -> (MetricValue, Weight) {
    let m = ms.sample_value(rng).expect("sampler probed");
    let w = ms.sample_weight(rng).expect("sampler probed");
    (m, w)
}

/// Boundedness: `met(m, w) ⪯ m` for all `m, w`.
pub fn check_bounded(ms: &dyn MetricSpace, sample_budget: usize, seed: u64) -> Result<CheckReport, MetricError> {
    let violates = |m: &MetricValue, w: &Weight| {
        let composed = ms.compose(m, w);
        (!ms.precedes_or_eq(&composed, m)).then(|| Witness::Bounded {
            value: m.clone(),
            weight: w.clone(),
            composed,
        })
    };
    match domain(ms)? {
        Domain::Enumerated(values, weights) => {
            let mut cases = 0;
            // Scan from mr downwards so the witness is the ≺-largest offender.
            for m in values.iter().rev() {
                for w in &weights {
                    cases += 1;
                    if let Some(witness) = violates(m, w) {
                        return Ok(CheckReport { coverage: Coverage::Exhaustive { cases }, witness: Some(witness) });
                    }
                }
            }
            Ok(CheckReport { coverage: Coverage::Exhaustive { cases }, witness: None })
        }
        Domain::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..sample_budget {
                let (m, w) = draw(ms, &mut rng);
                if let Some(witness) = violates(&m, &w) {
                    return Ok(CheckReport { coverage: Coverage::Sampled { draws: i + 1 }, witness: Some(witness) });
                }
            }
            Ok(CheckReport { coverage: Coverage::Sampled { draws: sample_budget }, witness: None })
        }
    }
}

/// Monotonicity: `m ≺ m' ⇒ met(m, w) ⪯ met(m', w)`.
pub fn check_monotonic(ms: &dyn MetricSpace, sample_budget: usize, seed: u64) -> Result<CheckReport, MetricError> {
    let violates = |a: &MetricValue, b: &MetricValue, w: &Weight| {
        let (lower, upper) = if ms.precedes(a, b) {
            (a, b)
        } else if ms.precedes(b, a) {
            (b, a)
        } else {
            return None;
        };
        let low = ms.compose(lower, w);
        let high = ms.compose(upper, w);
        (!ms.precedes_or_eq(&low, &high)).then(|| Witness::Monotonic {
            lower: lower.clone(),
            upper: upper.clone(),
            weight: w.clone(),
        })
    };
    match domain(ms)? {
        Domain::Enumerated(values, weights) => {
            let mut cases = 0;
            for (i, a) in values.iter().enumerate() {
                for b in &values[i + 1..] {
                    for w in &weights {
                        cases += 1;
                        if let Some(witness) = violates(a, b, w) {
                            return Ok(CheckReport {
                                coverage: Coverage::Exhaustive { cases },
                                witness: Some(witness),
                            });
                        }
                    }
                }
            }
            Ok(CheckReport { coverage: Coverage::Exhaustive { cases }, witness: None })
        }
        Domain::Sampled => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..sample_budget {
                let (a, w) = draw(ms, &mut rng);
                let b = ms.sample_value(&mut rng).expect("sampler probed");
                if let Some(witness) = violates(&a, &b, &w) {
                    return Ok(CheckReport { coverage: Coverage::Sampled { draws: i + 1 }, witness: Some(witness) });
                }
            }
            Ok(CheckReport { coverage: Coverage::Sampled { draws: sample_budget }, witness: None })
        }
    }
}

/// Utility: every `m ∈ M ∖ {mr}` is reachable from `mr` by repeated `met`.
///
/// Exhaustive for enumerable `M`. Otherwise `max_depth` bounds the search and
/// `sample_budget` sampled values are checked against the reachable set.
pub fn check_utility(
    ms: &dyn MetricSpace,
    max_depth: Option<usize>,
    sample_budget: usize,
    seed: u64,
) -> Result<CheckReport, MetricError> {
    let weights = ms
        .weights()
        .ok_or_else(|| MetricError::Capability(format!("metric `{}` has no finite weight set", ms.name())))?;
    check_utility_with(ms, &weights, max_depth, sample_budget, seed)
}

/// Utility restricted to the weights actually assigned by a topology.
pub fn check_utility_with(
    ms: &dyn MetricSpace,
    weights: &[Weight],
    max_depth: Option<usize>,
    sample_budget: usize,
    seed: u64,
) -> Result<CheckReport, MetricError> {
    let values = ms.values();
    let depth = match (&values, max_depth) {
        (_, Some(d)) => d,
        (Some(values), None) => values.len(),
        (None, None) => {
            return Err(MetricError::Capability(format!(
                "metric `{}` has an infinite value set; a depth bound is required",
                ms.name()
            )))
        }
    };
    let mut reached: BTreeSet<MetricValue> = BTreeSet::new();
    let mut frontier: VecDeque<(MetricValue, usize)> = VecDeque::new();
    let mr = ms.root_value();
    reached.insert(mr.clone());
    frontier.push_back((mr, 0));
    while let Some((m, d)) = frontier.pop_front() {
        if d >= depth {
            continue;
        }
        for w in weights {
            let next = ms.compose(&m, w);
            if ms.contains_value(&next) && reached.insert(next.clone()) {
                frontier.push_back((next, d + 1));
            }
        }
    }
    match values {
        Some(values) => {
            let cases = values.len();
            let witness = values
                .into_iter()
                .find(|v| !reached.contains(v))
                .map(|value| Witness::Unreachable { value });
            Ok(CheckReport { coverage: Coverage::Exhaustive { cases }, witness })
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..sample_budget {
                let value = ms
                    .sample_value(&mut rng)
                    .ok_or_else(|| MetricError::Capability(format!("metric `{}` has no sampler", ms.name())))?;
                if !reached.contains(&value) {
                    return Ok(CheckReport {
                        coverage: Coverage::Sampled { draws: i + 1 },
                        witness: Some(Witness::Unreachable { value }),
                    });
                }
            }
            Ok(CheckReport { coverage: Coverage::Sampled { draws: sample_budget }, witness: None })
        }
    }
}

/// All `m` with `met(m, w) = m` for every `w ∈ W`, in ascending `≺` order.
pub fn fixed_points(ms: &dyn MetricSpace) -> Result<Vec<MetricValue>, MetricError> {
    let (values, weights) = match (ms.values(), ms.weights()) {
        (Some(v), Some(w)) => (v, w),
        _ => {
            return Err(MetricError::Capability(format!(
                "fixed points of `{}` need enumerable values and weights",
                ms.name()
            )))
        }
    };
    Ok(values
        .into_iter()
        .filter(|m| weights.iter().all(|w| ms.compose(m, w) == *m))
        .collect())
}

/// Irreflexivity, transitivity and totality of `≺`.
pub fn check_order_laws(ms: &dyn MetricSpace, sample_budget: usize, seed: u64) -> Result<CheckReport, MetricError> {
    let check_triple = |a: &MetricValue, b: &MetricValue, c: &MetricValue| -> Option<Witness> {
        if ms.precedes(a, a) {
            return Some(Witness::Irreflexivity { value: a.clone() });
        }
        if a != b && !ms.precedes(a, b) && !ms.precedes(b, a) {
            return Some(Witness::Totality { a: a.clone(), b: b.clone() });
        }
        if ms.precedes(a, b) && ms.precedes(b, c) && !ms.precedes(a, c) {
            return Some(Witness::Transitivity { a: a.clone(), b: b.clone(), c: c.clone() });
        }
        None
    };
    if let Some(values) = ms.values() {
        let mut cases = 0;
        for a in &values {
            for b in &values {
                for c in &values {
                    cases += 1;
                    if let Some(w) = check_triple(a, b, c) {
                        return Ok(CheckReport { coverage: Coverage::Exhaustive { cases }, witness: Some(w) });
                    }
                }
            }
        }
        return Ok(CheckReport { coverage: Coverage::Exhaustive { cases }, witness: None });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = || {
        ms.sample_value(&mut rng)
            .ok_or_else(|| MetricError::Capability(format!("metric `{}` has no sampler", ms.name())))
    };
    for i in 0..sample_budget {
        let (a, b, c) = (sample()?, sample()?, sample()?);
        if let Some(w) = check_triple(&a, &b, &c) {
            return Ok(CheckReport { coverage: Coverage::Sampled { draws: i + 1 }, witness: Some(w) });
        }
    }
    Ok(CheckReport { coverage: Coverage::Sampled { draws: sample_budget }, witness: None })
}

/// Non-maximizable metrics, used only as negative fixtures.
pub mod synthetic {
    use super::*;

    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum NatOrder {
        /// `a ≺ b` iff `a > b`.
        Greater,
        /// `a ≺ b` iff `a < b`.
        Less,
    }

    /// A metric over `M = W = {0..max}` with an arbitrary `met`.
    #[derive(Clone, Debug)]
    pub struct NatMetric {
        pub label: &'static str,
        pub max: u64,
        pub weight_min: u64,
        pub order: NatOrder,
        pub met: fn(u64, u64) -> u64,
    }

    impl NatMetric {
        fn nat(m: &MetricValue) -> Option<u64> {
            match m {
                MetricValue::Nat(n) => Some(*n),
                _ => None,
            }
        }
    }

    /// `met(m, w) = max(m − w, 0)` with `≺` as `>`; not bounded.
    pub fn saturating_difference(max: u64) -> NatMetric {
        NatMetric { label: "synthetic-difference", max, weight_min: 0, order: NatOrder::Greater, met: |m, w| m.saturating_sub(w) }
    }

    /// `met(m, w) = |m − w|` with `≺` as `<`; not monotonic.
    pub fn absolute_difference(max: u64) -> NatMetric {
        NatMetric { label: "synthetic-absdiff", max, weight_min: 0, order: NatOrder::Less, met: |m, w| m.abs_diff(w) }
    }

    impl MetricSpace for NatMetric {
        fn name(&self) -> String {
            self.label.into()
        }

        fn root_value(&self) -> MetricValue {
            match self.order {
                NatOrder::Greater => MetricValue::Nat(0),
                NatOrder::Less => MetricValue::Nat(self.max),
            }
        }

        fn compose(&self, m: &MetricValue, w: &Weight) -> MetricValue {
            match (m, w) {
                (MetricValue::Nat(m), Weight::Nat(w)) => MetricValue::Nat((self.met)(*m, *w).min(self.max)),
                _ => m.clone(),
            }
        }

        fn precedes(&self, a: &MetricValue, b: &MetricValue) -> bool {
            match (Self::nat(a), Self::nat(b), self.order) {
                (Some(a), Some(b), NatOrder::Greater) => a > b,
                (Some(a), Some(b), NatOrder::Less) => a < b,
                _ => false,
            }
        }

        fn contains_value(&self, m: &MetricValue) -> bool {
            matches!(Self::nat(m), Some(n) if n <= self.max)
        }

        fn contains_weight(&self, w: &Weight) -> bool {
            matches!(w, Weight::Nat(n) if *n >= self.weight_min && *n <= self.max)
        }

        fn values(&self) -> Option<Vec<MetricValue>> {
            let mut v: Vec<_> = (0..=self.max).map(MetricValue::Nat).collect();
            if self.order == NatOrder::Greater {
                v.reverse();
            }
            Some(v)
        }

        fn weights(&self) -> Option<Vec<Weight>> {
            Some((self.weight_min..=self.max).map(Weight::Nat).collect())
        }

        fn parse_value(&self, raw: &Json) -> Result<MetricValue, MetricError> {
            json_nat(raw).map(MetricValue::Nat).ok_or_else(|| MetricError::Parse(raw.to_string()))
        }

        fn parse_weight(&self, raw: &Json) -> Result<Weight, MetricError> {
            json_nat(raw).map(Weight::Nat).ok_or_else(|| MetricError::Parse(raw.to_string()))
        }

        fn to_json(&self) -> Json {
            json!(self.label)
        }
    }
}

/// Approximate numeric view, for reports only.
pub fn approx(m: &MetricValue) -> Option<f64> {
    match m {
        MetricValue::Nat(n) => Some(*n as f64),
        MetricValue::Real(r) => r.to_f64(),
        MetricValue::Label(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::synthetic::*;
    use super::*;

    fn nat(n: u64) -> MetricValue {
        MetricValue::Nat(n)
    }

    #[test]
    fn met_examples() {
        assert_eq!(ShortestPath::new().met(&nat(3), &Weight::Nat(2)).unwrap(), nat(5));
        assert_eq!(Flow::new(10).met(&nat(10), &Weight::Nat(4)).unwrap(), nat(4));
        let r = Reliability::new();
        assert_eq!(r.met(&MetricValue::real(1, 1), &Weight::real(3, 4)).unwrap(), MetricValue::real(3, 4));
    }

    #[test]
    fn met_rejects_out_of_domain() {
        let flow = Flow::new(10);
        assert!(matches!(flow.met(&nat(11), &Weight::Nat(1)), Err(MetricError::OutOfDomain(_))));
        assert!(matches!(flow.met(&nat(1), &Weight::Nat(12)), Err(MetricError::OutOfDomain(_))));
    }

    #[test]
    fn max_by_order_examples() {
        let sp = ShortestPath::new();
        assert_eq!(sp.max_by_order(&[nat(3), nat(5), nat(1)]).unwrap(), nat(1));
        assert_eq!(Flow::new(10).max_by_order(&[nat(2), nat(7), nat(7)]).unwrap(), nat(7));
        assert_eq!(sp.max_by_order(&[nat(4)]).unwrap(), nat(4));
        assert_eq!(sp.max_by_order(&[]), Err(MetricError::EmptySequence));
    }

    #[test]
    fn bounded_examples() {
        let flow = check_bounded(&Flow::new(3), 0, 0).unwrap();
        assert!(flow.passed());
        assert_eq!(flow.coverage, Coverage::Exhaustive { cases: 16 });
        assert!(check_bounded(&ShortestPath::restricted(5, vec![0, 1, 2]), 0, 0).unwrap().passed());
        let bad = check_bounded(&saturating_difference(5), 0, 0).unwrap();
        assert_eq!(
            bad.witness,
            Some(Witness::Bounded { value: nat(1), weight: Weight::Nat(1), composed: nat(0) })
        );
    }

    #[test]
    fn monotonic_examples() {
        assert!(check_monotonic(&Flow::new(3), 0, 0).unwrap().passed());
        let rel = check_monotonic(&Reliability::quarters(), 10_000, 7).unwrap();
        assert!(rel.passed());
        assert!(rel.is_sampled());
        let bad = check_monotonic(&absolute_difference(3), 0, 0).unwrap();
        assert!(matches!(bad.witness, Some(Witness::Monotonic { .. })));
    }

    #[test]
    fn unbounded_sp_is_sampled_and_labelled() {
        let report = check_bounded(&ShortestPath::new(), 10_000, 1).unwrap();
        assert!(report.passed());
        assert!(report.to_string().starts_with("sampled PASS"));
    }

    #[test]
    fn utility_examples() {
        assert!(check_utility(&Flow::new(2), None, 0, 0).unwrap().passed());
        let sp = ShortestPath::restricted(2, vec![2]);
        let report = check_utility(&sp, None, 0, 0).unwrap();
        assert_eq!(report.witness, Some(Witness::Unreachable { value: nat(1) }));
        assert!(check_utility(&single_valued(), None, 0, 0).unwrap().passed());
        assert!(matches!(
            check_utility(&ShortestPath::new(), None, 0, 0),
            Err(MetricError::Capability(_))
        ));
    }

    #[test]
    fn fixed_point_examples() {
        assert!(fixed_points(&Flow::new(6)).unwrap().contains(&nat(0)));
        let rel = Reliability::quarters();
        assert!(matches!(fixed_points(&rel), Err(MetricError::Capability(_))));
        // 0·w = 0 on the grid.
        assert!(rel.grid().iter().all(|w| rel.compose(&MetricValue::real(0, 1), &Weight::Real(w.clone())) == MetricValue::real(0, 1)));
        assert!(fixed_points(&ShortestPath::restricted(10, vec![1, 2])).unwrap().is_empty());
    }

    #[test]
    fn order_laws_hold_for_builtins() {
        for mr in 0..=5 {
            assert!(check_order_laws(&Flow::new(mr), 0, 0).unwrap().passed());
        }
        assert!(check_order_laws(&ShortestPath::new(), 10_000, 3).unwrap().passed());
        assert!(check_order_laws(&Reliability::new(), 10_000, 3).unwrap().passed());
    }

    #[test]
    fn ratio_formatting_round_trips() {
        for text in ["0.75", "1", "0", "0.0001", "1/3", "0.32"] {
            let r = parse_ratio(text).unwrap();
            assert_eq!(parse_ratio(&format_ratio(&r)).unwrap(), r);
        }
        assert_eq!(format_ratio(&parse_ratio("3/4").unwrap()), "0.75");
        assert_eq!(format_ratio(&parse_ratio("1/3").unwrap()), "1/3");
        assert!(parse_ratio("1/0").is_none());
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!(parse_metric_name("flow:10").unwrap().name(), "flow:10");
        assert_eq!(parse_metric_name("sp").unwrap().root_value(), nat(0));
        assert!(parse_metric_name("hops").is_err());
    }

    #[test]
    fn table_metric_parses_and_checks_mr() {
        let raw = json!({"table": {"values": ["lo", "hi"], "weights": ["x"], "met": [["lo"], ["lo"]], "mr": "hi"}});
        let ms = metric_from_json(&raw).unwrap();
        assert_eq!(ms.root_value(), MetricValue::label("hi"));
        assert!(ms.precedes(&MetricValue::label("lo"), &MetricValue::label("hi")));
        assert_eq!(ms.to_json(), raw);
        let bad = json!({"table": {"values": ["lo", "hi"], "weights": ["x"], "met": [["lo"], ["lo"]], "mr": "lo"}});
        assert!(metric_from_json(&bad).is_err());
    }

    #[test]
    fn reliability_parses_numbers_exactly() {
        let r = Reliability::new();
        assert_eq!(r.parse_weight(&json!(0.75)).unwrap(), Weight::real(3, 4));
        assert_eq!(r.parse_weight(&json!("0.8")).unwrap(), Weight::real(4, 5));
        assert!(r.parse_weight(&json!(1.5)).is_err());
    }
}
