//! Hierarchical transmission planning and a serial link simulator.
//!
//! The link sends one payload at a time: each message costs a fixed latency
//! plus `bytes / bandwidth`. Arrival times are computed from cumulative byte
//! counts rather than by accumulating per-message durations, so the total
//! duration is identical for every ordering of the same payloads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::payloads::{Payload, PayloadKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeliveryError {
    #[error("nothing to transmit")]
    EmptyPlan,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("latency must be non-negative and finite, got {0}")]
    InvalidLatency(f64),
    #[error("no intelligence payload")]
    NoIntelligencePayload,
    #[error("csv: {0}")]
    Csv(String),
}

/// Anything with a kind and a byte size can be scheduled.
pub trait Transmittable {
    fn kind(&self) -> PayloadKind;
    fn byte_size(&self) -> u64;
}

impl Transmittable for Payload {
    fn kind(&self) -> PayloadKind {
        self.kind
    }

    fn byte_size(&self) -> u64 {
        self.byte_size() as u64
    }
}

impl Transmittable for (PayloadKind, u64) {
    fn kind(&self) -> PayloadKind {
        self.0
    }

    fn byte_size(&self) -> u64 {
        self.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Bytes per second.
    pub bandwidth_bps: f64,
    /// Fixed cost of every message, seconds.
    pub latency_s: f64,
}

impl LinkModel {
    pub fn new(bandwidth_bps: f64, latency_s: f64) -> Result<Self, DeliveryError> {
        let link = Self { bandwidth_bps, latency_s };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<(), DeliveryError> {
        if !(self.bandwidth_bps.is_finite() && self.bandwidth_bps > 0.0) {
            return Err(DeliveryError::InvalidBandwidth(self.bandwidth_bps));
        }
        if !(self.latency_s.is_finite() && self.latency_s >= 0.0) {
            return Err(DeliveryError::InvalidLatency(self.latency_s));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedItem {
    /// Position in the caller's payload list.
    pub index: usize,
    pub kind: PayloadKind,
    pub byte_size: u64,
}

/// Ordered send queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransmissionPlan {
    pub items: Vec<PlannedItem>,
}

impl TransmissionPlan {
    /// Keeps the caller's order.
    pub fn as_given<T: Transmittable>(payloads: &[T]) -> Result<Self, DeliveryError> {
        if payloads.is_empty() {
            return Err(DeliveryError::EmptyPlan);
        }
        let items = payloads
            .iter()
            .enumerate()
            .map(|(index, p)| PlannedItem { index, kind: p.kind(), byte_size: p.byte_size() })
            .collect();
        Ok(Self { items })
    }

    pub fn order(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.index).collect()
    }
}

/// Smallest intelligence first, full-fidelity images last.
///
/// Intelligence payloads (caption, cutout, embedding, lossy image) are sent
/// before lossless and raw images; within each tier payloads go by byte size,
/// then kind rank, then input position.
pub fn plan_hierarchical<T: Transmittable>(payloads: &[T]) -> Result<TransmissionPlan, DeliveryError> {
    let mut plan = TransmissionPlan::as_given(payloads)?;
    plan.items.sort_by_key(|i| (!i.kind.is_intelligence(), i.byte_size, i.kind.rank(), i.index));
    Ok(plan)
}

/// Raw images first, everything else in the given order.
pub fn plan_raw_first<T: Transmittable>(payloads: &[T]) -> Result<TransmissionPlan, DeliveryError> {
    let mut plan = TransmissionPlan::as_given(payloads)?;
    plan.items.sort_by_key(|i| (i.kind != PayloadKind::RawImage, i.index));
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Hierarchical,
    RawFirst,
    AsGiven,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Hierarchical, Policy::RawFirst, Policy::AsGiven];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Hierarchical => "hierarchical",
            Policy::RawFirst => "raw_first",
            Policy::AsGiven => "as_given",
        }
    }

    pub fn plan<T: Transmittable>(self, payloads: &[T]) -> Result<TransmissionPlan, DeliveryError> {
        match self {
            Policy::Hierarchical => plan_hierarchical(payloads),
            Policy::RawFirst => plan_raw_first(payloads),
            Policy::AsGiven => TransmissionPlan::as_given(payloads),
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub index: usize,
    pub kind: PayloadKind,
    pub byte_size: u64,
    pub start_s: f64,
    pub arrival_s: f64,
    pub cumulative_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryTimeline {
    pub entries: Vec<TimelineEntry>,
    pub total_duration_s: f64,
}

pub const TIMELINE_CSV_HEADER: [&str; 6] = ["index", "kind", "byte_size", "start_s", "arrival_s", "cumulative_bytes"];

pub fn simulate(plan: &TransmissionPlan, link: &LinkModel) -> Result<DeliveryTimeline, DeliveryError> {
    link.validate()?;
    if plan.items.is_empty() {
        return Err(DeliveryError::EmptyPlan);
    }
    let mut entries = Vec::with_capacity(plan.items.len());
    let mut cumulative = 0u64;
    let mut start = 0.0;
    for (k, item) in plan.items.iter().enumerate() {
        cumulative += item.byte_size;
        let arrival = (k + 1) as f64 * link.latency_s + cumulative as f64 / link.bandwidth_bps;
        entries.push(TimelineEntry {
            index: item.index,
            kind: item.kind,
            byte_size: item.byte_size,
            start_s: start,
            arrival_s: arrival,
            cumulative_bytes: cumulative,
        });
        start = arrival;
    }
    Ok(DeliveryTimeline { entries, total_duration_s: start })
}

/// Arrival time of the first caption, cutout, embedding or lossy image.
pub fn time_to_first_intelligence(timeline: &DeliveryTimeline) -> Result<f64, DeliveryError> {
    timeline
        .entries
        .iter()
        .find(|e| e.kind.is_intelligence())
        .map(|e| e.arrival_s)
        .ok_or(DeliveryError::NoIntelligencePayload)
}

impl DeliveryTimeline {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TIMELINE_CSV_HEADER).expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.index.to_string(),
                e.kind.name().to_string(),
                e.byte_size.to_string(),
                e.start_s.to_string(),
                e.arrival_s.to_string(),
                e.cumulative_bytes.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str) -> Result<Self, DeliveryError> {
        let bad = |e: String| DeliveryError::Csv(e);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(TIMELINE_CSV_HEADER) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {i}")));
            entries.push(TimelineEntry {
                index: field(0)?.parse().map_err(|_| bad("index".into()))?,
                kind: field(1)?.parse().map_err(bad)?,
                byte_size: field(2)?.parse().map_err(|_| bad("byte_size".into()))?,
                start_s: field(3)?.parse().map_err(|_| bad("start_s".into()))?,
                arrival_s: field(4)?.parse().map_err(|_| bad("arrival_s".into()))?,
                cumulative_bytes: field(5)?.parse().map_err(|_| bad("cumulative_bytes".into()))?,
            });
        }
        let total_duration_s = entries.last().map_or(0.0, |e| e.arrival_s);
        Ok(Self { entries, total_duration_s })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: Policy,
    /// `None` when the plan carries no intelligence payload.
    pub time_to_first_intelligence_s: Option<f64>,
    pub total_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub rows: Vec<PolicyRow>,
}

pub const POLICY_CSV_HEADER: [&str; 3] = ["policy", "time_to_first_intelligence_s", "total_duration_s"];

/// Simulates every policy over the same payloads and link.
pub fn compare_policies<T: Transmittable>(payloads: &[T], link: &LinkModel) -> Result<PolicyReport, DeliveryError> {
    let rows = Policy::ALL
        .iter()
        .map(|&policy| {
            let timeline = simulate(&policy.plan(payloads)?, link)?;
            Ok(PolicyRow {
                policy,
                time_to_first_intelligence_s: time_to_first_intelligence(&timeline).ok(),
                total_duration_s: timeline.total_duration_s,
            })
        })
        .collect::<Result<_, DeliveryError>>()?;
    Ok(PolicyReport { rows })
}

impl PolicyReport {
    pub fn row(&self, policy: Policy) -> Option<&PolicyRow> {
        self.rows.iter().find(|r| r.policy == policy)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(POLICY_CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            let ttfi = r.time_to_first_intelligence_s.map_or_else(|| "none".to_string(), |v| v.to_string());
            w.write_record([r.policy.name().to_string(), ttfi, r.total_duration_s.to_string()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn from_csv(text: &str) -> Result<Self, DeliveryError> {
        let bad = |e: String| DeliveryError::Csv(e);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(POLICY_CSV_HEADER) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 3 {
                return Err(bad(format!("expected 3 columns, got {}", rec.len())));
            }
            rows.push(PolicyRow {
                policy: rec[0].parse().map_err(bad)?,
                time_to_first_intelligence_s: match &rec[1] {
                    "none" => None,
                    v => Some(v.parse().map_err(|_| bad(format!("bad time '{v}'")))?),
                },
                total_duration_s: rec[2].parse().map_err(|_| bad(format!("bad duration '{}'", &rec[2])))?,
            });
        }
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PayloadKind::*;

    #[test]
    fn orders_small_first() {
        let items = [(RawImage, 1_000_000), (Caption, 100), (Cutout, 10_000)];
        let plan = plan_hierarchical(&items).unwrap();
        assert_eq!(plan.order(), vec![1, 2, 0]);
    }

    #[test]
    fn sorted_input_unchanged() {
        let items = [(Caption, 10), (Cutout, 200), (LossyImage, 3000), (RawImage, 40_000)];
        assert_eq!(plan_hierarchical(&items).unwrap().order(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn kind_rank_breaks_ties() {
        let items = [(Cutout, 50), (Caption, 50)];
        assert_eq!(plan_hierarchical(&items).unwrap().order(), vec![1, 0]);
        let items = [(Cutout, 50), (Cutout, 50)];
        assert_eq!(plan_hierarchical(&items).unwrap().order(), vec![0, 1]);
    }

    #[test]
    fn full_fidelity_images_go_last() {
        let items = [(LosslessImage, 10), (Caption, 100), (RawImage, 5)];
        assert_eq!(plan_hierarchical(&items).unwrap().order(), vec![1, 2, 0]);
    }

    #[test]
    fn empty_plan_rejected() {
        let none: [(PayloadKind, u64); 0] = [];
        assert_eq!(plan_hierarchical(&none), Err(DeliveryError::EmptyPlan));
    }

    #[test]
    fn worked_example() {
        let items = [(Caption, 100), (Cutout, 10_000), (RawImage, 1_000_000)];
        let link = LinkModel::new(10_000.0, 0.0).unwrap();
        let t = simulate(&TransmissionPlan::as_given(&items).unwrap(), &link).unwrap();
        let arrivals: Vec<f64> = t.entries.iter().map(|e| e.arrival_s).collect();
        assert_eq!(arrivals, vec![0.01, 1.01, 101.01]);
        assert_eq!(t.total_duration_s, 101.01);
        assert_eq!(t.entries[1].start_s, 0.01);
    }

    #[test]
    fn one_second_payload() {
        let link = LinkModel::new(2048.0, 0.0).unwrap();
        let t = simulate(&TransmissionPlan::as_given(&[(RawImage, 2048)]).unwrap(), &link).unwrap();
        assert_eq!(t.total_duration_s, 1.0);
    }

    #[test]
    fn latency_adds_per_message() {
        let link = LinkModel::new(1000.0, 0.5).unwrap();
        let t = simulate(&TransmissionPlan::as_given(&[(Caption, 500), (Cutout, 1000)]).unwrap(), &link).unwrap();
        assert_eq!(t.entries[0].arrival_s, 1.0);
        assert_eq!(t.entries[1].arrival_s, 2.5);
    }

    #[test]
    fn invalid_links() {
        assert!(matches!(LinkModel::new(0.0, 0.0), Err(DeliveryError::InvalidBandwidth(_))));
        assert!(matches!(LinkModel::new(-5.0, 0.0), Err(DeliveryError::InvalidBandwidth(_))));
        assert!(matches!(LinkModel::new(5.0, -1.0), Err(DeliveryError::InvalidLatency(_))));
        let bogus = LinkModel { bandwidth_bps: 0.0, latency_s: 0.0 };
        let plan = TransmissionPlan::as_given(&[(Caption, 1)]).unwrap();
        assert!(simulate(&plan, &bogus).is_err());
    }

    #[test]
    fn first_intelligence() {
        let link = LinkModel::new(100.0, 0.0).unwrap();
        let caption_first = simulate(&TransmissionPlan::as_given(&[(Caption, 10), (RawImage, 1000)]).unwrap(), &link).unwrap();
        assert_eq!(time_to_first_intelligence(&caption_first).unwrap(), caption_first.entries[0].arrival_s);
        let raw_only = simulate(&TransmissionPlan::as_given(&[(RawImage, 1000)]).unwrap(), &link).unwrap();
        assert_eq!(time_to_first_intelligence(&raw_only), Err(DeliveryError::NoIntelligencePayload));
        assert_eq!(DeliveryError::NoIntelligencePayload.to_string(), "no intelligence payload");
    }

    #[test]
    fn policy_report_roundtrip() {
        let items = [(RawImage, 196_623), (LosslessImage, 90_000), (Cutout, 700), (Caption, 30)];
        let link = LinkModel::new(1200.0, 0.25).unwrap();
        let report = compare_policies(&items, &link).unwrap();
        let totals: Vec<f64> = report.rows.iter().map(|r| r.total_duration_s).collect();
        assert!(totals.iter().all(|&t| t == totals[0]));
        let h = report.row(Policy::Hierarchical).unwrap().time_to_first_intelligence_s.unwrap();
        let r = report.row(Policy::RawFirst).unwrap().time_to_first_intelligence_s.unwrap();
        assert!(h < r);
        assert_eq!(PolicyReport::from_csv(&report.to_csv()).unwrap(), report);
        let raw_only = compare_policies(&[(RawImage, 10)], &link).unwrap();
        assert_eq!(PolicyReport::from_csv(&raw_only.to_csv()).unwrap(), raw_only);
    }

    #[test]
    fn timeline_csv_roundtrip() {
        let items = [(Caption, 33), (Cutout, 1234), (RawImage, 98_765)];
        let link = LinkModel::new(777.0, 0.03).unwrap();
        let t = simulate(&plan_hierarchical(&items).unwrap(), &link).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("index,kind,byte_size,start_s,arrival_s,cumulative_bytes\n"));
        assert_eq!(DeliveryTimeline::from_csv(&csv).unwrap(), t);
    }
}
