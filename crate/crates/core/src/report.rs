//! Canonical HLS report format: parsing and writing.
//!
//! A report is line-oriented UTF-8 text made of sections. Each section starts
//! with `== <Name>`, its first row names the columns and every following row
//! is `name | v1 | v2 | ...`. Lines starting with `#` are comments.
//!
//! ```text
//! == Performance
//! name | value
//! target_period | 10.00
//! estimated_period | 8.51
//! uncertainty | 1.25
//! ```
//!
//! Mandatory sections are `Performance`, `Utilization`, `Operations`,
//! `Memory`, `Multiplexer` and `Device`. Optional rows inside a section
//! (unused utilization components, empty memory or multiplexer totals)
//! default to zero and log a warning.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("missing section `{0}`")]
    MissingSection(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("value out of range for `{field}`: {value}")]
    RangeViolation { field: String, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resource {
    Lut,
    Ff,
    Dsp,
    Bram,
}

impl Resource {
    pub const ALL: [Resource; 4] = [Resource::Lut, Resource::Ff, Resource::Dsp, Resource::Bram];

    pub fn name(self) -> &'static str {
        match self {
            Resource::Lut => "lut",
            Resource::Ff => "ff",
            Resource::Dsp => "dsp",
            Resource::Bram => "bram",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCounts {
    pub lut: u64,
    pub ff: u64,
    pub dsp: u64,
    pub bram: u64,
}

impl ResourceCounts {
    pub fn get(&self, r: Resource) -> u64 {
        match r {
            Resource::Lut => self.lut,
            Resource::Ff => self.ff,
            Resource::Dsp => self.dsp,
            Resource::Bram => self.bram,
        }
    }

    pub fn set(&mut self, r: Resource, v: u64) {
        match r {
            Resource::Lut => self.lut = v,
            Resource::Ff => self.ff = v,
            Resource::Dsp => self.dsp = v,
            Resource::Bram => self.bram = v,
        }
    }

    pub fn add(&self, other: &ResourceCounts) -> ResourceCounts {
        ResourceCounts {
            lut: self.lut + other.lut,
            ff: self.ff + other.ff,
            dsp: self.dsp + other.dsp,
            bram: self.bram + other.bram,
        }
    }
}

/// Rows of the utilization breakdown, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilComponent {
    Dsp,
    Expression,
    Fifo,
    Instance,
    Memory,
    Multiplexer,
    Register,
}

impl UtilComponent {
    pub const ALL: [UtilComponent; 7] = [
        UtilComponent::Dsp,
        UtilComponent::Expression,
        UtilComponent::Fifo,
        UtilComponent::Instance,
        UtilComponent::Memory,
        UtilComponent::Multiplexer,
        UtilComponent::Register,
    ];

    /// Row label as written in the report.
    pub fn label(self) -> &'static str {
        match self {
            UtilComponent::Dsp => "DSP",
            UtilComponent::Expression => "Expression",
            UtilComponent::Fifo => "FIFO",
            UtilComponent::Instance => "Instance",
            UtilComponent::Memory => "Memory",
            UtilComponent::Multiplexer => "Multiplexer",
            UtilComponent::Register => "Register",
        }
    }

    /// Lower-case key used in feature manifests.
    pub fn key(self) -> &'static str {
        match self {
            UtilComponent::Dsp => "dsp",
            UtilComponent::Expression => "expression",
            UtilComponent::Fifo => "fifo",
            UtilComponent::Instance => "instance",
            UtilComponent::Memory => "memory",
            UtilComponent::Multiplexer => "multiplexer",
            UtilComponent::Register => "register",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_label(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    /// Indexed by [`UtilComponent::index`].
    pub components: [ResourceCounts; 7],
    /// The `Total` row.
    pub used: ResourceCounts,
    /// The `Available` row of the target device.
    pub available: ResourceCounts,
}

impl Utilization {
    pub fn component(&self, c: UtilComponent) -> &ResourceCounts {
        &self.components[c.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Cmp,
    Logic,
    Shift,
}

impl OpKind {
    pub const ALL: [OpKind; 7] = [
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Cmp,
        OpKind::Logic,
        OpKind::Shift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Cmp => "cmp",
            OpKind::Logic => "logic",
            OpKind::Shift => "shift",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpStat {
    pub kind: OpKind,
    pub bitwidth: u32,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub words: u64,
    pub bits: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuxStats {
    pub inputs: u64,
    pub bitwidth: u64,
}

/// A parsed synthesis report. Periods are in nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlsReport {
    pub device_id: String,
    pub target_clock_period: f64,
    pub estimated_clock_period: f64,
    pub clock_uncertainty: f64,
    pub utilization: Utilization,
    pub op_stats: Vec<OpStat>,
    pub memory_stats: MemoryStats,
    pub mux_stats: MuxStats,
}

impl HlsReport {
    /// Checks the range invariants the parser enforces.
    pub fn validate(&self) -> Result<(), ReportError> {
        let positive = [
            ("target_period", self.target_clock_period),
            ("estimated_period", self.estimated_clock_period),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(range(field, v));
            }
        }
        if !(self.clock_uncertainty.is_finite() && self.clock_uncertainty >= 0.0) {
            return Err(range("uncertainty", self.clock_uncertainty));
        }
        for r in Resource::ALL {
            let used = self.utilization.used.get(r);
            if used > self.utilization.available.get(r) {
                return Err(range(&format!("utilization.{}", r.name()), used as f64));
            }
        }
        if self.device_id.trim().is_empty() {
            return Err(ReportError::MissingField("device_id".into()));
        }
        Ok(())
    }

    /// Writes the report in canonical form. `parse_report(&r.to_text())`
    /// reproduces `r` exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# HLS synthesis report\n");
        s.push_str("== Device\nname | value\n");
        let _ = writeln!(s, "part | {}", self.device_id);
        s.push_str("== Performance\nname | value\n");
        let _ = writeln!(s, "target_period | {}", self.target_clock_period);
        let _ = writeln!(s, "estimated_period | {}", self.estimated_clock_period);
        let _ = writeln!(s, "uncertainty | {}", self.clock_uncertainty);
        s.push_str("== Utilization\nname | bram | dsp | ff | lut\n");
        let row = |s: &mut String, label: &str, c: &ResourceCounts| {
            let _ = writeln!(s, "{label} | {} | {} | {} | {}", c.bram, c.dsp, c.ff, c.lut);
        };
        for c in UtilComponent::ALL {
            row(&mut s, c.label(), self.utilization.component(c));
        }
        row(&mut s, "Total", &self.utilization.used);
        row(&mut s, "Available", &self.utilization.available);
        s.push_str("== Operations\nkind | bitwidth | count\n");
        for op in &self.op_stats {
            let _ = writeln!(s, "{} | {} | {}", op.kind.name(), op.bitwidth, op.count);
        }
        s.push_str("== Memory\nname | words | bits\n");
        let _ = writeln!(s, "total | {} | {}", self.memory_stats.words, self.memory_stats.bits);
        s.push_str("== Multiplexer\nname | inputs | bitwidth\n");
        let _ = writeln!(s, "total | {} | {}", self.mux_stats.inputs, self.mux_stats.bitwidth);
        s
    }
}

fn range(field: &str, value: f64) -> ReportError {
    ReportError::RangeViolation {
        field: field.to_string(),
        value,
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> ReportError {
    ReportError::MalformedRow {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Performance,
    Utilization,
    Operations,
    Memory,
    Multiplexer,
    Device,
}

impl Section {
    const ALL: [Section; 6] = [
        Section::Performance,
        Section::Utilization,
        Section::Operations,
        Section::Memory,
        Section::Multiplexer,
        Section::Device,
    ];

    fn name(self) -> &'static str {
        match self {
            Section::Performance => "Performance",
            Section::Utilization => "Utilization",
            Section::Operations => "Operations",
            Section::Memory => "Memory",
            Section::Multiplexer => "Multiplexer",
            Section::Device => "Device",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

struct Row<'a> {
    line: usize,
    cells: Vec<&'a str>,
}

struct Table<'a> {
    header: Vec<&'a str>,
    rows: Vec<Row<'a>>,
}

impl<'a> Table<'a> {
    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h.eq_ignore_ascii_case(name))
    }

    fn require_columns(&self, names: &[&str], line: usize) -> Result<Vec<usize>, ReportError> {
        names
            .iter()
            .map(|n| {
                self.column(n)
                    .ok_or_else(|| malformed(line, format!("header lacks column `{n}`")))
            })
            .collect()
    }

    /// Value of column `value_col` for the row whose first cell is `name`.
    fn lookup(&self, name: &str) -> Option<&Row<'a>> {
        self.rows.iter().find(|r| r.cells[0].eq_ignore_ascii_case(name))
    }
}

fn split_cells(line: &str) -> Vec<&str> {
    line.split('|').map(str::trim).collect()
}

/// Strict decimal: optional sign, digits, optional `.` and digits.
fn parse_decimal(tok: &str) -> Option<f64> {
    let body = tok.strip_prefix(['-', '+']).unwrap_or(tok);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_none_or(str::is_empty) {
        return None;
    }
    if !digits_ok(int) || !frac.is_none_or(digits_ok) {
        return None;
    }
    if frac == Some("") && int.is_empty() {
        return None;
    }
    tok.parse().ok()
}

fn parse_real(tok: &str, line: usize, field: &str) -> Result<f64, ReportError> {
    parse_decimal(tok).ok_or_else(|| malformed(line, format!("`{field}`: `{tok}` is not a decimal number")))
}

fn parse_count(tok: &str, line: usize, field: &str) -> Result<u64, ReportError> {
    let v = parse_real(tok, line, field)?;
    if v < 0.0 {
        return Err(range(field, v));
    }
    if v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(malformed(line, format!("`{field}`: `{tok}` is not an integer count")));
    }
    Ok(v as u64)
}

/// Parses a canonical report document.
pub fn parse_report(text: &str) -> Result<HlsReport, ReportError> {
    let mut tables: Vec<(Section, usize, Table<'_>)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix("==") {
            let name = name.trim();
            let section = Section::from_name(name)
                .ok_or_else(|| malformed(line_no, format!("unknown section `{name}`")))?;
            if tables.iter().any(|(s, _, _)| *s == section) {
                return Err(malformed(line_no, format!("duplicate section `{name}`")));
            }
            tables.push((
                section,
                line_no,
                Table {
                    header: Vec::new(),
                    rows: Vec::new(),
                },
            ));
            continue;
        }
        let Some((_, _, table)) = tables.last_mut() else {
            return Err(malformed(line_no, "row outside of any section"));
        };
        let cells = split_cells(line);
        if table.header.is_empty() {
            if cells.iter().any(|c| c.is_empty()) {
                return Err(malformed(line_no, "empty column name in header"));
            }
            table.header = cells;
        } else {
            if cells.len() != table.header.len() {
                return Err(malformed(
                    line_no,
                    format!("expected {} cells, found {}", table.header.len(), cells.len()),
                ));
            }
            if cells[0].is_empty() {
                return Err(malformed(line_no, "row without a name"));
            }
            table.rows.push(Row { line: line_no, cells });
        }
    }

    let get = |s: Section| -> Result<(usize, &Table<'_>), ReportError> {
        tables
            .iter()
            .find(|(x, _, _)| *x == s)
            .map(|(_, l, t)| (*l, t))
            .ok_or_else(|| ReportError::MissingSection(s.name().to_string()))
    };

    // Check presence of every mandatory section before reading any of them so
    // the reported error does not depend on section order.
    for s in Section::ALL {
        get(s)?;
    }

    let device_id = {
        let (line, t) = get(Section::Device)?;
        let [v] = t.require_columns(&["value"], line)?[..] else { unreachable!() };
        match t.lookup("part") {
            Some(r) => r.cells[v].to_string(),
            None => return Err(ReportError::MissingField("device_id".into())),
        }
    };

    let (target, estimated, uncertainty) = {
        let (line, t) = get(Section::Performance)?;
        let [v] = t.require_columns(&["value"], line)?[..] else { unreachable!() };
        for r in &t.rows {
            if !["target_period", "estimated_period", "uncertainty"]
                .iter()
                .any(|n| r.cells[0].eq_ignore_ascii_case(n))
            {
                return Err(malformed(r.line, format!("unknown performance row `{}`", r.cells[0])));
            }
        }
        let read = |name: &str, mandatory: bool| -> Result<f64, ReportError> {
            match t.lookup(name) {
                Some(r) => parse_real(r.cells[v], r.line, name),
                None if mandatory => Err(ReportError::MissingField(name.to_string())),
                None => {
                    log::warn!("report: `{name}` absent, using 0");
                    Ok(0.0)
                }
            }
        };
        (
            read("target_period", true)?,
            read("estimated_period", true)?,
            read("uncertainty", false)?,
        )
    };

    let utilization = {
        let (line, t) = get(Section::Utilization)?;
        let cols = t.require_columns(&["bram", "dsp", "ff", "lut"], line)?;
        let res = [Resource::Bram, Resource::Dsp, Resource::Ff, Resource::Lut];
        let read_row = |r: &Row<'_>| -> Result<ResourceCounts, ReportError> {
            let mut c = ResourceCounts::default();
            for (col, res) in cols.iter().zip(res) {
                let field = format!("{}.{}", r.cells[0], res.name());
                c.set(res, parse_count(r.cells[*col], r.line, &field)?);
            }
            Ok(c)
        };
        let mut u = Utilization::default();
        let mut seen_total = false;
        let mut seen_avail = false;
        let mut seen = [false; 7];
        for r in &t.rows {
            let name = r.cells[0];
            if name.eq_ignore_ascii_case("Total") {
                u.used = read_row(r)?;
                seen_total = true;
            } else if name.eq_ignore_ascii_case("Available") {
                u.available = read_row(r)?;
                seen_avail = true;
            } else if let Some(c) = UtilComponent::from_label(name) {
                if seen[c.index()] {
                    return Err(malformed(r.line, format!("duplicate utilization row `{name}`")));
                }
                seen[c.index()] = true;
                u.components[c.index()] = read_row(r)?;
            } else {
                return Err(malformed(r.line, format!("unknown utilization row `{name}`")));
            }
        }
        if !seen_total {
            return Err(ReportError::MissingField("utilization.Total".into()));
        }
        if !seen_avail {
            return Err(ReportError::MissingField("utilization.Available".into()));
        }
        for c in UtilComponent::ALL {
            if !seen[c.index()] {
                log::warn!("report: utilization row `{}` absent, using 0", c.label());
            }
        }
        u
    };

    let op_stats = {
        let (line, t) = get(Section::Operations)?;
        let [k, w, n] = t.require_columns(&["kind", "bitwidth", "count"], line)?[..] else {
            unreachable!()
        };
        t.rows
            .iter()
            .map(|r| {
                let kind = OpKind::from_name(r.cells[k])
                    .ok_or_else(|| malformed(r.line, format!("unknown operation kind `{}`", r.cells[k])))?;
                let field = format!("ops.{}", kind.name());
                let bitwidth = parse_count(r.cells[w], r.line, &format!("{field}.bitwidth"))?;
                let bitwidth = u32::try_from(bitwidth)
                    .map_err(|_| range(&format!("{field}.bitwidth"), bitwidth as f64))?;
                let count = parse_count(r.cells[n], r.line, &format!("{field}.count"))?;
                Ok(OpStat { kind, bitwidth, count })
            })
            .collect::<Result<Vec<_>, ReportError>>()?
    };

    let pair_section = |s: Section, a: &str, b: &str| -> Result<(u64, u64), ReportError> {
        let (line, t) = get(s)?;
        let [ca, cb] = t.require_columns(&[a, b], line)?[..] else { unreachable!() };
        for r in &t.rows {
            if !r.cells[0].eq_ignore_ascii_case("total") {
                return Err(malformed(r.line, format!("unknown {} row `{}`", s.name(), r.cells[0])));
            }
        }
        match t.lookup("total") {
            Some(r) => Ok((
                parse_count(r.cells[ca], r.line, &format!("{}.{a}", s.name()))?,
                parse_count(r.cells[cb], r.line, &format!("{}.{b}", s.name()))?,
            )),
            None => {
                log::warn!("report: {} totals absent, using 0", s.name());
                Ok((0, 0))
            }
        }
    };
    let (words, bits) = pair_section(Section::Memory, "words", "bits")?;
    let (inputs, mux_width) = pair_section(Section::Multiplexer, "inputs", "bitwidth")?;

    let report = HlsReport {
        device_id,
        target_clock_period: target,
        estimated_clock_period: estimated,
        clock_uncertainty: uncertainty,
        utilization,
        op_stats,
        memory_stats: MemoryStats { words, bits },
        mux_stats: MuxStats {
            inputs,
            bitwidth: mux_width,
        },
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = include_str!("../fixtures/golden_a.rpt");

    #[test]
    fn golden_values_are_echoed() {
        let r = parse_report(GOLDEN).unwrap();
        assert_eq!(r.target_clock_period, 10.0);
        assert_eq!(r.utilization.used.lut, 2210);
        assert_eq!(r.utilization.available.lut, 63400);
        assert_eq!(r.device_id, "xc7a100tfgg484-3");
    }

    #[test]
    fn missing_utilization_section() {
        let text = GOLDEN
            .split("== ")
            .filter(|s| !s.starts_with("Utilization"))
            .collect::<Vec<_>>()
            .join("== ");
        assert_eq!(
            parse_report(&text),
            Err(ReportError::MissingSection("Utilization".into()))
        );
    }

    #[test]
    fn used_above_available_is_rejected() {
        let text = GOLDEN.replace("Total | 6 | 12 | 2450 | 2210", "Total | 6 | 12 | 2450 | 99999");
        assert!(matches!(
            parse_report(&text),
            Err(ReportError::RangeViolation { ref field, value }) if field == "utilization.lut" && value == 99999.0
        ));
    }

    #[test]
    fn wrong_cell_count_reports_line() {
        let text = "== Device\nname | value\npart | x | y\n";
        assert_eq!(
            parse_report(text),
            Err(ReportError::MalformedRow {
                line: 3,
                reason: "expected 2 cells, found 3".into()
            })
        );
    }

    #[test]
    fn negative_period_is_a_range_violation() {
        let text = GOLDEN.replace("target_period | 10.00", "target_period | -1.5");
        assert!(matches!(
            parse_report(&text),
            Err(ReportError::RangeViolation { ref field, .. }) if field == "target_period"
        ));
    }

    #[test]
    fn exponent_notation_is_not_a_decimal() {
        assert_eq!(parse_decimal("1e3"), None);
        assert_eq!(parse_decimal("inf"), None);
        assert_eq!(parse_decimal("."), None);
        assert_eq!(parse_decimal("2."), Some(2.0));
        assert_eq!(parse_decimal(".5"), Some(0.5));
        assert_eq!(parse_decimal("-0.25"), Some(-0.25));
    }

    #[test]
    fn missing_component_rows_default_to_zero() {
        let text = GOLDEN.replace("FIFO | 0 | 0 | 0 | 0\n", "");
        let r = parse_report(&text).unwrap();
        assert_eq!(*r.utilization.component(UtilComponent::Fifo), ResourceCounts::default());
    }

    #[test]
    fn fractional_count_is_malformed() {
        let text = GOLDEN.replace("add | 32 | 14", "add | 32 | 14.5");
        assert!(matches!(parse_report(&text), Err(ReportError::MalformedRow { .. })));
    }

    #[test]
    fn canonical_writer_round_trips() {
        let r = parse_report(GOLDEN).unwrap();
        assert_eq!(parse_report(&r.to_text()).unwrap(), r);
    }
}
