//! Feature manifests and report flattening.
//!
//! A manifest is a CSV file with columns `feature_name,source,derivation`.
//! `source` names one report field, or two operands separated by `;` for the
//! binary derivations. An operand is either a field path or a decimal
//! literal. Field paths:
//!
//! | path | value |
//! |------|-------|
//! | `perf.target_period`, `perf.estimated_period`, `perf.uncertainty` | timing estimates (ns) |
//! | `util.<row>.<res>` | utilization cell; `<row>` is a component key, `total` or `available` |
//! | `ops.<kind>.<width>.count` | operations of that kind at exactly that bitwidth |
//! | `ops.<kind>.count`, `ops.<kind>.bits` | per-kind count and sum of count x bitwidth |
//! | `ops.total.count`, `ops.total.bits` | the same over every kind |
//! | `mem.words`, `mem.bits`, `mux.inputs`, `mux.bitwidth` | memory and multiplexer totals |
//!
//! Derivations are `identity`, `log1p`, `ratio` (zero when the denominator
//! is zero) and `product`. Every field has a zero default, so flattening a
//! valid report never fails; unknown fields are rejected when the manifest
//! is loaded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{HlsReport, OpKind, Resource, UtilComponent};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// The report sections a feature draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureCategory {
    Performance,
    Resources,
    LogicArithmetic,
    Memory,
    Multiplexer,
}

impl FeatureCategory {
    pub const ALL: [FeatureCategory; 5] = [
        FeatureCategory::Performance,
        FeatureCategory::Resources,
        FeatureCategory::LogicArithmetic,
        FeatureCategory::Memory,
        FeatureCategory::Multiplexer,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UtilRow {
    Component(UtilComponent),
    Total,
    Available,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    TargetPeriod,
    EstimatedPeriod,
    Uncertainty,
    Util(UtilRow, Resource),
    OpCount { kind: OpKind, width: u32 },
    KindCount(OpKind),
    KindBits(OpKind),
    TotalOpCount,
    TotalOpBits,
    MemWords,
    MemBits,
    MuxInputs,
    MuxBitwidth,
}

impl Field {
    pub fn category(&self) -> FeatureCategory {
        match self {
            Field::TargetPeriod | Field::EstimatedPeriod | Field::Uncertainty => FeatureCategory::Performance,
            Field::Util(..) => FeatureCategory::Resources,
            Field::OpCount { .. }
            | Field::KindCount(_)
            | Field::KindBits(_)
            | Field::TotalOpCount
            | Field::TotalOpBits => FeatureCategory::LogicArithmetic,
            Field::MemWords | Field::MemBits => FeatureCategory::Memory,
            Field::MuxInputs | Field::MuxBitwidth => FeatureCategory::Multiplexer,
        }
    }

    pub fn value(&self, r: &HlsReport) -> f64 {
        let ops = |pred: &dyn Fn(OpKind, u32) -> bool, bits: bool| -> f64 {
            r.op_stats
                .iter()
                .filter(|o| pred(o.kind, o.bitwidth))
                .map(|o| {
                    if bits {
                        o.count as f64 * o.bitwidth as f64
                    } else {
                        o.count as f64
                    }
                })
                .sum()
        };
        match *self {
            Field::TargetPeriod => r.target_clock_period,
            Field::EstimatedPeriod => r.estimated_clock_period,
            Field::Uncertainty => r.clock_uncertainty,
            Field::Util(row, res) => {
                let u = &r.utilization;
                let counts = match row {
                    UtilRow::Component(c) => u.component(c),
                    UtilRow::Total => &u.used,
                    UtilRow::Available => &u.available,
                };
                counts.get(res) as f64
            }
            Field::OpCount { kind, width } => ops(&|k, w| k == kind && w == width, false),
            Field::KindCount(kind) => ops(&|k, _| k == kind, false),
            Field::KindBits(kind) => ops(&|k, _| k == kind, true),
            Field::TotalOpCount => ops(&|_, _| true, false),
            Field::TotalOpBits => ops(&|_, _| true, true),
            Field::MemWords => r.memory_stats.words as f64,
            Field::MemBits => r.memory_stats.bits as f64,
            Field::MuxInputs => r.mux_stats.inputs as f64,
            Field::MuxBitwidth => r.mux_stats.bitwidth as f64,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::TargetPeriod => write!(f, "perf.target_period"),
            Field::EstimatedPeriod => write!(f, "perf.estimated_period"),
            Field::Uncertainty => write!(f, "perf.uncertainty"),
            Field::Util(row, res) => {
                let row = match row {
                    UtilRow::Component(c) => c.key(),
                    UtilRow::Total => "total",
                    UtilRow::Available => "available",
                };
                write!(f, "util.{row}.{}", res.name())
            }
            Field::OpCount { kind, width } => write!(f, "ops.{}.{width}.count", kind.name()),
            Field::KindCount(k) => write!(f, "ops.{}.count", k.name()),
            Field::KindBits(k) => write!(f, "ops.{}.bits", k.name()),
            Field::TotalOpCount => write!(f, "ops.total.count"),
            Field::TotalOpBits => write!(f, "ops.total.bits"),
            Field::MemWords => write!(f, "mem.words"),
            Field::MemBits => write!(f, "mem.bits"),
            Field::MuxInputs => write!(f, "mux.inputs"),
            Field::MuxBitwidth => write!(f, "mux.bitwidth"),
        }
    }
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        let unknown = || format!("unknown report field `{s}`");
        let field = match parts.as_slice() {
            ["perf", "target_period"] => Field::TargetPeriod,
            ["perf", "estimated_period"] => Field::EstimatedPeriod,
            ["perf", "uncertainty"] => Field::Uncertainty,
            ["util", row, res] => {
                let res = Resource::from_name(res).ok_or_else(unknown)?;
                let row = match *row {
                    "total" => UtilRow::Total,
                    "available" => UtilRow::Available,
                    key => UtilRow::Component(
                        UtilComponent::ALL
                            .into_iter()
                            .find(|c| c.key() == key)
                            .ok_or_else(unknown)?,
                    ),
                };
                Field::Util(row, res)
            }
            ["ops", "total", "count"] => Field::TotalOpCount,
            ["ops", "total", "bits"] => Field::TotalOpBits,
            ["ops", kind, "count"] => Field::KindCount(OpKind::from_name(kind).ok_or_else(unknown)?),
            ["ops", kind, "bits"] => Field::KindBits(OpKind::from_name(kind).ok_or_else(unknown)?),
            ["ops", kind, width, "count"] => Field::OpCount {
                kind: OpKind::from_name(kind).ok_or_else(unknown)?,
                width: width.parse().map_err(|_| unknown())?,
            },
            ["mem", "words"] => Field::MemWords,
            ["mem", "bits"] => Field::MemBits,
            ["mux", "inputs"] => Field::MuxInputs,
            ["mux", "bitwidth"] => Field::MuxBitwidth,
            _ => return Err(unknown()),
        };
        Ok(field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Field(Field),
    Const(f64),
}

impl Operand {
    fn value(&self, r: &HlsReport) -> f64 {
        match self {
            Operand::Field(f) => f.value(r),
            Operand::Const(c) => *c,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Field(x) => x.fmt(f),
            Operand::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Derivation {
    Identity(Field),
    Log1p(Field),
    Ratio(Operand, Operand),
    Product(Operand, Operand),
}

impl Derivation {
    pub fn evaluate(&self, r: &HlsReport) -> f64 {
        match self {
            Derivation::Identity(f) => f.value(r),
            Derivation::Log1p(f) => f.value(r).ln_1p(),
            Derivation::Ratio(a, b) => {
                let den = b.value(r);
                if den == 0.0 {
                    0.0
                } else {
                    a.value(r) / den
                }
            }
            Derivation::Product(a, b) => a.value(r) * b.value(r),
        }
    }

    /// Category of the first field operand.
    pub fn category(&self) -> FeatureCategory {
        let first = match self {
            Derivation::Identity(f) | Derivation::Log1p(f) => *f,
            Derivation::Ratio(a, b) | Derivation::Product(a, b) => match (a, b) {
                (Operand::Field(f), _) | (_, Operand::Field(f)) => *f,
                _ => unreachable!("binary derivation without a field operand"),
            },
        };
        first.category()
    }

    fn name(&self) -> &'static str {
        match self {
            Derivation::Identity(_) => "identity",
            Derivation::Log1p(_) => "log1p",
            Derivation::Ratio(..) => "ratio",
            Derivation::Product(..) => "product",
        }
    }

    fn source(&self) -> String {
        match self {
            Derivation::Identity(f) | Derivation::Log1p(f) => f.to_string(),
            Derivation::Ratio(a, b) | Derivation::Product(a, b) => format!("{a};{b}"),
        }
    }

    fn parse(source: &str, derivation: &str) -> Result<Self, String> {
        let operand = |s: &str| -> Result<Operand, String> {
            let s = s.trim();
            if s.starts_with(|c: char| c.is_ascii_digit()) {
                s.parse().map(Operand::Const).map_err(|_| format!("bad literal `{s}`"))
            } else {
                s.parse().map(Operand::Field)
            }
        };
        let parts: Vec<&str> = source.split(';').collect();
        match (derivation.trim(), parts.as_slice()) {
            ("identity", [a]) => Ok(Derivation::Identity(a.trim().parse()?)),
            ("log1p", [a]) => Ok(Derivation::Log1p(a.trim().parse()?)),
            (d @ ("ratio" | "product"), [a, b]) => {
                let (a, b) = (operand(a)?, operand(b)?);
                if matches!((a, b), (Operand::Const(_), Operand::Const(_))) {
                    return Err("binary derivation needs at least one field".into());
                }
                Ok(if d == "ratio" {
                    Derivation::Ratio(a, b)
                } else {
                    Derivation::Product(a, b)
                })
            }
            ("identity" | "log1p" | "ratio" | "product", _) => {
                Err(format!("wrong operand count for `{derivation}`: `{source}`"))
            }
            _ => Err(format!("unknown derivation `{derivation}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub derivation: Derivation,
}

impl FeatureDef {
    pub fn category(&self) -> FeatureCategory {
        self.derivation.category()
    }
}

/// An ordered list of feature definitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    id: String,
    features: Vec<FeatureDef>,
}

const DEFAULT_MANIFEST: &str = include_str!("../fixtures/manifest_v1.csv");

impl Manifest {
    /// The shipped 183-feature manifest.
    pub fn default_v1() -> Self {
        Self::from_csv(DEFAULT_MANIFEST).expect("bundled manifest is valid")
    }

    pub fn from_features(features: Vec<FeatureDef>) -> Result<Self, ManifestError> {
        let m = Self {
            id: String::new(),
            features,
        };
        let text = m.to_csv();
        Self::from_csv(&text)
    }

    pub fn from_csv(text: &str) -> Result<Self, ManifestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| ManifestError::Csv(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["feature_name", "source", "derivation"] {
            return Err(ManifestError::Malformed {
                line: 1,
                reason: "header must be `feature_name,source,derivation`".into(),
            });
        }
        let mut features: Vec<FeatureDef> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| ManifestError::Csv(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 3 {
                return Err(ManifestError::Malformed {
                    line,
                    reason: format!("expected 3 columns, found {}", rec.len()),
                });
            }
            let name = rec[0].to_string();
            if name.is_empty() {
                return Err(ManifestError::Malformed {
                    line,
                    reason: "empty feature name".into(),
                });
            }
            if features.iter().any(|f| f.name == name) {
                return Err(ManifestError::Malformed {
                    line,
                    reason: format!("duplicate feature `{name}`"),
                });
            }
            let derivation = Derivation::parse(&rec[1], &rec[2]).map_err(|reason| {
                if reason.starts_with("unknown report field") {
                    ManifestError::ManifestMismatch(format!("feature `{name}`: {reason}"))
                } else {
                    ManifestError::Malformed { line, reason }
                }
            })?;
            features.push(FeatureDef { name, derivation });
        }
        if features.is_empty() {
            return Err(ManifestError::Malformed {
                line: 1,
                reason: "manifest has no features".into(),
            });
        }
        let mut m = Self {
            id: String::new(),
            features,
        };
        m.id = format!("m-{:016x}", fnv1a(m.to_csv().as_bytes()));
        Ok(m)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature_name,source,derivation\n");
        for f in &self.features {
            s.push_str(&format!("{},{},{}\n", f.name, f.derivation.source(), f.derivation.name()));
        }
        s
    }

    /// Content hash of the canonical CSV form.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn categories(&self) -> Vec<FeatureCategory> {
        self.features.iter().map(FeatureDef::category).collect()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Report features in manifest order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatureVector {
    pub values: Vec<f64>,
    pub manifest_id: String,
}

impl RawFeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluates every manifest entry on `report`.
pub fn flatten(report: &HlsReport, manifest: &Manifest) -> RawFeatureVector {
    RawFeatureVector {
        values: manifest
            .features
            .iter()
            .map(|f| f.derivation.evaluate(report))
            .collect(),
        manifest_id: manifest.id.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::parse_report;

    const GOLDEN: &str = include_str!("../fixtures/golden_a.rpt");

    #[test]
    fn default_manifest_has_183_unique_features() {
        let m = Manifest::default_v1();
        assert_eq!(m.len(), 183);
        let mut names: Vec<_> = m.names().collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 183);
    }

    #[test]
    fn golden_flattens_to_manifest_length() {
        let r = parse_report(GOLDEN).unwrap();
        let m = Manifest::default_v1();
        let v = flatten(&r, &m);
        assert_eq!(v.len(), 183);
        assert_eq!(v.manifest_id, m.id());
    }

    #[test]
    fn flatten_is_deterministic() {
        let m = Manifest::default_v1();
        let a = flatten(&parse_report(GOLDEN).unwrap(), &m);
        let b = flatten(&parse_report(GOLDEN).unwrap(), &m);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_dsp_gives_zero_dsp_ratios() {
        let mut r = parse_report(GOLDEN).unwrap();
        r.utilization.used.dsp = 0;
        for c in r.utilization.components.iter_mut() {
            c.dsp = 0;
        }
        let m = Manifest::default_v1();
        let v = flatten(&r, &m);
        let mut checked = 0;
        for (f, x) in m.features().iter().zip(&v.values) {
            if let Derivation::Ratio(Operand::Field(Field::Util(row, Resource::Dsp)), _) = f.derivation {
                if row == UtilRow::Available {
                    continue;
                }
                assert_eq!(*x, 0.0, "{}", f.name);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn derived_values() {
        let r = parse_report(GOLDEN).unwrap();
        let m = Manifest::from_csv(
            "feature_name,source,derivation\n\
             lut_ratio,util.total.lut;util.available.lut,ratio\n\
             add32_bits,ops.add.32.count;32,product\n\
             add_bits,ops.add.bits,identity\n\
             log_words,mem.words,log1p\n\
             fifo_ratio,util.fifo.lut;util.fifo.ff,ratio\n",
        )
        .unwrap();
        let v = flatten(&r, &m).values;
        assert_eq!(v[0], 2210.0 / 63400.0);
        assert_eq!(v[1], 14.0 * 32.0);
        assert_eq!(v[2], 14.0 * 32.0 + 9.0 * 16.0);
        assert_eq!(v[3], 2049f64.ln());
        assert_eq!(v[4], 0.0);
    }

    #[test]
    fn unknown_field_is_a_mismatch() {
        let err = Manifest::from_csv("feature_name,source,derivation\nx,util.total.luts,identity\n").unwrap_err();
        assert!(matches!(err, ManifestError::ManifestMismatch(_)));
    }

    #[test]
    fn bad_derivation_is_malformed() {
        let err = Manifest::from_csv("feature_name,source,derivation\nx,mem.bits,sqrt\n").unwrap_err();
        assert!(matches!(err, ManifestError::Malformed { .. }));
        let err = Manifest::from_csv("feature_name,source,derivation\nx,mem.bits,ratio\n").unwrap_err();
        assert!(matches!(err, ManifestError::Malformed { .. }));
    }

    #[test]
    fn manifest_csv_round_trip_keeps_id() {
        let m = Manifest::default_v1();
        let again = Manifest::from_csv(&m.to_csv()).unwrap();
        assert_eq!(again.id(), m.id());
        assert_eq!(again.features(), m.features());
    }
}
