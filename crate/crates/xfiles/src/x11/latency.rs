//! Joining replies to requests through the 16-bit sequence counter.

use std::collections::HashMap;

use serde::Serialize;

use super::decode::{MessageKind, X11Message};

/// One matched request/response pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RequestLatency {
    pub opcode: u8,
    pub sequence: u16,
    pub issue_time_us: u64,
    pub reply_time_us: u64,
    /// `reply_time_us - issue_time_us`.
    pub latency_us: u64,
    /// Closed by an error rather than a reply.
    pub errored: bool,
}

/// A request the server never answered — normal for most X traffic, which
/// is one-way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UnansweredRequest {
    pub opcode: u8,
    pub sequence: u16,
    pub issue_time_us: u64,
}

/// A reply or error whose sequence matches no outstanding request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrphanReply {
    pub sequence: u16,
    pub reply_time_us: u64,
    pub errored: bool,
}

/// Everything the matcher can say about a message list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub matched: Vec<RequestLatency>,
    pub unanswered: Vec<UnansweredRequest>,
    pub orphans: Vec<OrphanReply>,
    pub diagnostics: Vec<String>,
}

/// Joins each reply or error to the outstanding request carrying the same
/// sequence number, wrap included: the join key is the 16-bit value
/// itself, so a request numbered 0 (the counter coming back around) pairs
/// with a reply numbered 0 like any other.
///
/// Accounting is total: every request ends up in exactly one of `matched`
/// or `unanswered`, and every reply or error either closes one match or
/// lands in `orphans`. A reply consumes its request, so streams that
/// answer one request with a series of replies (long listings do this)
/// report the continuations as orphans. Events are timing bystanders and
/// are ignored here.
///
/// Input should be time-ordered (the decoder's merge already is); if it
/// is not, a diagnostic is added and any negative latency clamps to zero.
pub fn match_latencies(messages: &[X11Message]) -> MatchResult {
    let mut result = MatchResult::default();
    let mut outstanding: HashMap<u16, (u8, u64)> = HashMap::new();
    let mut last_ts = 0u64;
    let mut disorder = false;
    for msg in messages {
        if msg.timestamp_us < last_ts {
            disorder = true;
        }
        last_ts = msg.timestamp_us;
        match msg.kind {
            MessageKind::Request => {
                let Some(seq) = msg.sequence else { continue };
                if let Some((opcode, issue_time_us)) =
                    outstanding.insert(seq, (msg.opcode_or_code, msg.timestamp_us))
                {
                    result.unanswered.push(UnansweredRequest {
                        opcode,
                        sequence: seq,
                        issue_time_us,
                    });
                    result.diagnostics.push(format!(
                        "sequence {seq} reissued while still outstanding; \
                         the older request is retired as unanswered"
                    ));
                }
            }
            MessageKind::Reply | MessageKind::Error => {
                let errored = msg.kind == MessageKind::Error;
                let Some(seq) = msg.sequence else { continue };
                match outstanding.remove(&seq) {
                    Some((opcode, issue_time_us)) => result.matched.push(RequestLatency {
                        opcode,
                        sequence: seq,
                        issue_time_us,
                        reply_time_us: msg.timestamp_us,
                        latency_us: msg.timestamp_us.saturating_sub(issue_time_us),
                        errored,
                    }),
                    None => result.orphans.push(OrphanReply {
                        sequence: seq,
                        reply_time_us: msg.timestamp_us,
                        errored,
                    }),
                }
            }
            MessageKind::SetupRequest | MessageKind::SetupReply | MessageKind::Event => {}
        }
    }
    if disorder {
        result.diagnostics.push("input messages were not ordered by timestamp".into());
    }
    result.unanswered.extend(outstanding.into_iter().map(
        |(sequence, (opcode, issue_time_us))| UnansweredRequest {
            opcode,
            sequence,
            issue_time_us,
        },
    ));
    result.unanswered.sort_by_key(|u| (u.issue_time_us, u.sequence));
    result
}
