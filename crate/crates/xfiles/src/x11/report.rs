//! Per-opcode aggregation and font-traffic attribution.

use std::collections::HashMap;

use serde::Serialize;

use super::decode::{MessageKind, X11Message};
use super::latency::MatchResult;

/// Core font-related request opcodes: OpenFont, CloseFont, QueryFont,
/// ListFonts, ListFontsWithInfo, SetFontPath, GetFontPath.
pub const FONT_OPCODES: [u8; 7] = [45, 46, 47, 49, 50, 51, 52];

/// Whether a request opcode belongs to the font class.
pub fn is_font_opcode(opcode: u8) -> bool {
    FONT_OPCODES.contains(&opcode)
}

/// Human name for a core request opcode, where this tool knows one.
pub fn opcode_name(opcode: u8) -> Option<&'static str> {
    Some(match opcode {
        1 => "CreateWindow",
        8 => "MapWindow",
        14 => "GetGeometry",
        16 => "InternAtom",
        20 => "GetProperty",
        38 => "QueryPointer",
        43 => "GetInputFocus",
        45 => "OpenFont",
        46 => "CloseFont",
        47 => "QueryFont",
        48 => "QueryTextExtents",
        49 => "ListFonts",
        50 => "ListFontsWithInfo",
        51 => "SetFontPath",
        52 => "GetFontPath",
        53 => "CreatePixmap",
        55 => "CreateGC",
        72 => "PutImage",
        73 => "GetImage",
        74 => "PolyText8",
        76 => "ImageText8",
        98 => "QueryExtension",
        _ => return None,
    })
}

/// Display label for an opcode: the name with the number, or `op{N}`.
pub fn opcode_label(opcode: u8) -> String {
    match opcode_name(opcode) {
        Some(name) => format!("{name}({opcode})"),
        None => format!("op{opcode}"),
    }
}

/// Aggregates for one request opcode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpcodeStats {
    pub opcode: u8,
    /// Requests decoded with this opcode.
    pub requests: u64,
    /// Of those, how many a reply or error closed out.
    pub matched: u64,
    /// Of the matched, how many closed with an error.
    pub errored: u64,
    pub total_latency_us: u64,
    /// Mean over matched pairs; 0 when nothing matched.
    pub mean_latency_us: f64,
}

/// Where a trace's time went.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    /// Sorted by total latency, heaviest first, then by opcode.
    pub per_opcode: Vec<OpcodeStats>,
    pub total_requests: u64,
    pub total_matched: u64,
    pub total_unanswered: u64,
    pub total_orphans: u64,
    /// Sum of matched latencies.
    pub total_latency_us: u64,
    pub font_requests: u64,
    pub font_latency_us: u64,
    /// Font-class fraction of matched latency, in [0, 1]; 0 when nothing
    /// matched.
    pub font_latency_share: f64,
    pub wall_time_us: u64,
    /// Font-class latency as a fraction of wall time; 0 when wall time is
    /// zero.
    pub font_wall_share: f64,
}

/// Aggregates decoded requests and matched latencies per opcode and
/// computes the font class's share of both matched latency and wall time.
pub fn font_report(
    messages: &[X11Message],
    matches: &MatchResult,
    wall_time_us: u64,
) -> TraceReport {
    let mut per: HashMap<u8, OpcodeStats> = HashMap::new();
    let blank = |opcode: u8| OpcodeStats {
        opcode,
        requests: 0,
        matched: 0,
        errored: 0,
        total_latency_us: 0,
        mean_latency_us: 0.0,
    };

    let mut total_requests = 0u64;
    for msg in messages {
        if msg.kind == MessageKind::Request {
            total_requests += 1;
            per.entry(msg.opcode_or_code).or_insert_with(|| blank(msg.opcode_or_code)).requests +=
                1;
        }
    }

    let mut total_latency_us = 0u64;
    let mut font_latency_us = 0u64;
    for pair in &matches.matched {
        let entry = per.entry(pair.opcode).or_insert_with(|| blank(pair.opcode));
        entry.matched += 1;
        if pair.errored {
            entry.errored += 1;
        }
        entry.total_latency_us += pair.latency_us;
        total_latency_us += pair.latency_us;
        if is_font_opcode(pair.opcode) {
            font_latency_us += pair.latency_us;
        }
    }

    let mut per_opcode: Vec<OpcodeStats> = per
        .into_values()
        .map(|mut s| {
            if s.matched > 0 {
                s.mean_latency_us = s.total_latency_us as f64 / s.matched as f64;
            }
            s
        })
        .collect();
    per_opcode.sort_by(|a, b| {
        b.total_latency_us.cmp(&a.total_latency_us).then(a.opcode.cmp(&b.opcode))
    });

    let font_requests = per_opcode
        .iter()
        .filter(|s| is_font_opcode(s.opcode))
        .map(|s| s.requests)
        .sum();

    TraceReport {
        per_opcode,
        total_requests,
        total_matched: matches.matched.len() as u64,
        total_unanswered: matches.unanswered.len() as u64,
        total_orphans: matches.orphans.len() as u64,
        total_latency_us,
        font_requests,
        font_latency_us,
        font_latency_share: if total_latency_us > 0 {
            font_latency_us as f64 / total_latency_us as f64
        } else {
            0.0
        },
        wall_time_us,
        font_wall_share: if wall_time_us > 0 {
            font_latency_us as f64 / wall_time_us as f64
        } else {
            0.0
        },
    }
}

impl TraceReport {
    /// Plain-text rendering: totals, shares, then the per-opcode table.
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "requests: {} ({} matched, {} unanswered, {} orphan replies)",
            self.total_requests, self.total_matched, self.total_unanswered, self.total_orphans
        );
        let _ = writeln!(
            out,
            "wall time: {:.3} s   matched latency: {:.3} s",
            self.wall_time_us as f64 / 1e6,
            self.total_latency_us as f64 / 1e6
        );
        let _ = writeln!(
            out,
            "font share of matched latency: {:.2}%   of wall time: {:.2}%",
            self.font_latency_share * 100.0,
            self.font_wall_share * 100.0
        );
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>8} {:>7} {:>12} {:>10}",
            "opcode", "requests", "matched", "errors", "total ms", "mean ms"
        );
        for s in &self.per_opcode {
            let _ = writeln!(
                out,
                "{:<24} {:>8} {:>8} {:>7} {:>12.2} {:>10.2}",
                opcode_label(s.opcode),
                s.requests,
                s.matched,
                s.errored,
                s.total_latency_us as f64 / 1000.0,
                s.mean_latency_us / 1000.0
            );
        }
        out
    }
}
