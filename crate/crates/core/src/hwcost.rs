//! Element counts, gate-equivalent estimates and challenge transmission cost.

use serde::Serialize;

use crate::compose::{crp_space_log2, DesignSpec, PufKind};
use crate::error::{PufError, Result};

/// Gate-equivalent cost per element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostModel {
    pub ge_per_mux: f64,
    pub ge_per_arbiter: f64,
    pub ge_per_delay_gate: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { ge_per_mux: 8.0, ge_per_arbiter: 8.0, ge_per_delay_gate: 1.0 }
    }
}

impl CostModel {
    pub fn new(ge_per_mux: f64, ge_per_arbiter: f64, ge_per_delay_gate: f64) -> Result<Self> {
        let all = [ge_per_mux, ge_per_arbiter, ge_per_delay_gate];
        if all.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(PufError::config(format!("GE unit costs must be finite and >= 0, got {all:?}")));
        }
        Ok(Self { ge_per_mux, ge_per_arbiter, ge_per_delay_gate })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ElementCounts {
    pub muxes: u64,
    pub arbiters: u64,
    pub delay_gates: u64,
}

/// Two multiplexers per stage, one arbiter per chain, one delay module per
/// chain (empty when no module is fitted).
pub fn count_elements(d: &DesignSpec) -> ElementCounts {
    let (k, n) = (d.k as u64, d.n as u64);
    ElementCounts { muxes: 2 * k * n, arbiters: k, delay_gates: d.module.gate_count as u64 * k }
}

pub fn gate_equivalents(c: &ElementCounts, cm: &CostModel) -> f64 {
    c.muxes as f64 * cm.ge_per_mux + c.arbiters as f64 * cm.ge_per_arbiter + c.delay_gates as f64 * cm.ge_per_delay_gate
}

/// Challenge bits sent per CRP.
pub fn transmission_bits(d: &DesignSpec) -> u64 {
    match d.kind {
        PufKind::Apuf | PufKind::Xor => d.n as u64,
        PufKind::Cdc => (d.k * d.n) as u64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardwareReport {
    pub kind: PufKind,
    pub k: usize,
    pub n: usize,
    pub muxes: u64,
    pub arbiters: u64,
    pub delay_gates: u64,
    pub ge: f64,
    pub transmission_bits: u64,
    pub crp_space_log2: u64,
    pub reference_ge: Option<f64>,
    pub crps_to_break: Option<String>,
}

impl HardwareReport {
    pub fn new(d: &DesignSpec, cm: &CostModel) -> Self {
        let c = count_elements(d);
        Self {
            kind: d.kind,
            k: d.k,
            n: d.n,
            muxes: c.muxes,
            arbiters: c.arbiters,
            delay_gates: c.delay_gates,
            ge: gate_equivalents(&c, cm),
            transmission_bits: transmission_bits(d),
            crp_space_log2: crp_space_log2(d),
            reference_ge: None,
            crps_to_break: None,
        }
    }
}

/// Attack outcome to show against a design, keyed by `(kind, k, n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BreakEntry {
    pub kind: PufKind,
    pub k: usize,
    pub n: usize,
    pub label: String,
}

/// One row per design, sorted by GE (ties keep input order).
pub fn compare_designs(designs: &[DesignSpec], cm: &CostModel, breaks: &[BreakEntry]) -> Result<Vec<HardwareReport>> {
    if designs.is_empty() {
        return Err(PufError::input("no designs to compare"));
    }
    let mut rows: Vec<HardwareReport> = designs
        .iter()
        .map(|d| {
            d.validate()?;
            let mut r = HardwareReport::new(d, cm);
            r.crps_to_break = breaks
                .iter()
                .find(|b| b.kind == d.kind && b.k == d.k && b.n == d.n)
                .map(|b| b.label.clone());
            Ok(r)
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.ge.total_cmp(&b.ge));
    Ok(rows)
}

/// The published comparison: `(kind, k, n, GE, CRPs to break)`.
pub const REFERENCE_TABLE: [(PufKind, usize, usize, f64, &str); 8] = [
    (PufKind::Xor, 9, 64, 9292.0, "40m"),
    (PufKind::Xor, 10, 64, 10328.0, "120m"),
    (PufKind::Cdc, 6, 64, 6182.0, "120m"),
    (PufKind::Cdc, 7, 24, 2732.0, "50m"),
    (PufKind::Cdc, 8, 16, 2112.0, "80m"),
    (PufKind::Cdc, 8, 24, 3136.0, "150m"),
    (PufKind::Cdc, 9, 16, 2380.0, "over 200m"),
    (PufKind::Cdc, 10, 8, 1368.0, "over 200m"),
];

/// The published table's designs with their reference GE and attack columns.
pub fn reference_table(cm: &CostModel) -> Vec<HardwareReport> {
    let designs: Vec<DesignSpec> = REFERENCE_TABLE
        .iter()
        .map(|&(kind, k, n, _, _)| DesignSpec::bare(kind, k, n).expect("table designs are valid"))
        .collect();
    let breaks: Vec<BreakEntry> = REFERENCE_TABLE
        .iter()
        .map(|&(kind, k, n, _, label)| BreakEntry { kind, k, n, label: label.to_string() })
        .collect();
    let mut rows = compare_designs(&designs, cm, &breaks).expect("non-empty");
    for r in &mut rows {
        r.reference_ge = REFERENCE_TABLE.iter().find(|t| t.0 == r.kind && t.1 == r.k && t.2 == r.n).map(|t| t.3);
    }
    rows
}

const HEADERS: [&str; 10] =
    ["kind", "k", "n", "muxes+arbiters", "delay_gates", "ge", "reference_ge", "transmission_bits", "crp_space", "crps_to_break"];

fn cells(r: &HardwareReport) -> [String; 10] {
    [
        r.kind.to_string(),
        r.k.to_string(),
        r.n.to_string(),
        format!("{}+{}", r.muxes, r.arbiters),
        r.delay_gates.to_string(),
        format!("{}", r.ge),
        r.reference_ge.map(|g| format!("{g}")).unwrap_or_default(),
        r.transmission_bits.to_string(),
        format!("2^{}", r.crp_space_log2),
        r.crps_to_break.clone().unwrap_or_default(),
    ]
}

pub fn to_csv(rows: &[HardwareReport]) -> String {
    let mut out = HEADERS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&cells(r).join(","));
        out.push('\n');
    }
    out
}

/// Space-aligned text table.
pub fn to_text(rows: &[HardwareReport]) -> String {
    let body: Vec<[String; 10]> = rows.iter().map(cells).collect();
    let mut width: Vec<usize> = HEADERS.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cols: Vec<&str>| {
        let padded: Vec<String> = cols.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(HEADERS.to_vec());
    for row in &body {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}
