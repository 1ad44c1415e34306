//! Coordinator-model round simulation with a bit-exact communication ledger.
//!
//! An active round probes every server in order `0..s`; each server answers
//! with its value reports followed by one acknowledgement, which makes the
//! round self-delimiting. Inactive rounds (decided by public randomness)
//! exchange nothing.
//!
//! Costs: a probe or an ack is 1 bit. A value report carries the expert index
//! (`⌈log₂ n⌉` bits), the copy index (`⌈log₂ B⌉` bits) and a `V`-bit
//! quantised value.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Coordinator,
    Server(usize),
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Coordinator => write!(f, "C"),
            Role::Server(j) => write!(f, "S{j}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    ValueReport,
    SyncProbe,
    SyncAck,
}

impl MessageKind {
    fn index(self) -> usize {
        match self {
            MessageKind::ValueReport => 0,
            MessageKind::SyncProbe => 1,
            MessageKind::SyncAck => 2,
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::ValueReport => "VALUE_REPORT",
            MessageKind::SyncProbe => "SYNC_PROBE",
            MessageKind::SyncAck => "SYNC_ACK",
        })
    }
}

/// Payload of a `VALUE_REPORT`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Report {
    pub expert: usize,
    pub copy: u32,
    /// Quantised value; see [`Quantizer`].
    pub code: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub round: usize,
    pub kind: MessageKind,
    pub sender: Role,
    pub receiver: Role,
    pub report: Option<Report>,
    pub bits: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub expert_bits: u32,
    pub copy_bits: u32,
    pub value_bits: u32,
    pub probe_bits: u32,
    pub ack_bits: u32,
}

impl CostModel {
    pub fn new(n: usize, copies: u32, value_bits: u32) -> Self {
        Self {
            expert_bits: ceil_log2(n as u64),
            copy_bits: ceil_log2(u64::from(copies)),
            value_bits,
            probe_bits: 1,
            ack_bits: 1,
        }
    }

    pub fn report_bits(&self) -> u64 {
        u64::from(self.expert_bits + self.copy_bits + self.value_bits)
    }

    pub fn cost(&self, kind: MessageKind) -> u64 {
        match kind {
            MessageKind::ValueReport => self.report_bits(),
            MessageKind::SyncProbe => u64::from(self.probe_bits),
            MessageKind::SyncAck => u64::from(self.ack_bits),
        }
    }
}

/// `⌈log₂ x⌉`, with `⌈log₂ 1⌉ = 0`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x > 0);
    64 - (x - 1).leading_zeros()
}

#[derive(Debug, Error, PartialEq)]
pub enum QuantizerError {
    #[error("value width must be in 2..=52 bits, got {0}")]
    Width(u32),
    #[error("log range must satisfy min < max, got [{0}, {1}]")]
    Range(f64, f64),
}

/// Fixed-point code of `ln v` over `[log_min, log_max]`, rounded to the
/// nearest of `2^V − 1` levels and clamped at the ends. Code 0 is reserved
/// for an exact zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantizer {
    log_min: f64,
    log_max: f64,
    bits: u32,
    step: f64,
}

impl Quantizer {
    pub const DEFAULT_LOG_RANGE: (f64, f64) = (-50.0, 50.0);

    pub fn new(bits: u32, log_min: f64, log_max: f64) -> Result<Self, QuantizerError> {
        if !(2..=52).contains(&bits) {
            return Err(QuantizerError::Width(bits));
        }
        if !(log_min < log_max && log_min.is_finite() && log_max.is_finite()) {
            return Err(QuantizerError::Range(log_min, log_max));
        }
        let levels = ((1u64 << bits) - 2) as f64;
        Ok(Self {
            log_min,
            log_max,
            bits,
            step: (log_max - log_min) / levels,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    fn max_code(&self) -> u64 {
        (1u64 << self.bits) - 1
    }

    pub fn encode(&self, value: f64) -> u64 {
        debug_assert!(value >= 0.0, "values are nonnegative");
        if value <= 0.0 {
            return 0;
        }
        let x = ((value.ln() - self.log_min) / self.step).round();
        if x <= 0.0 {
            1
        } else {
            (x as u64 + 1).min(self.max_code())
        }
    }

    pub fn decode(&self, code: u64) -> f64 {
        if code == 0 {
            return 0.0;
        }
        (self.log_min + (code.min(self.max_code()) - 1) as f64 * self.step).exp()
    }
}

/// A value report after decoding at the coordinator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Received {
    pub server: usize,
    pub expert: usize,
    pub copy: u32,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundTranscript {
    pub round: usize,
    pub active: bool,
    pub messages: Vec<Message>,
}

impl RoundTranscript {
    pub fn bits(&self) -> u64 {
        self.messages.iter().map(|m| m.bits).sum()
    }

    pub fn reports(&self) -> impl Iterator<Item = (usize, &Report)> {
        self.messages.iter().filter_map(|m| match (m.sender, &m.report) {
            (Role::Server(j), Some(r)) => Some((j, r)),
            _ => None,
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuditError {
    #[error("round {round}: ledger says {ledger} bits, recount gives {recount}")]
    RoundMismatch { round: usize, ledger: u64, recount: u64 },
    #[error("ledger total {ledger} disagrees with recount {recount}")]
    TotalMismatch { ledger: u64, recount: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommLedger {
    per_round: Vec<u64>,
    cumulative: Vec<u64>,
    total: u64,
    counts: [u64; 3],
    transcripts: Option<Vec<RoundTranscript>>,
}

impl CommLedger {
    pub fn new(keep_transcripts: bool) -> Self {
        Self {
            transcripts: keep_transcripts.then(Vec::new),
            ..Self::default()
        }
    }

    fn record(&mut self, transcript: &RoundTranscript) {
        let bits = transcript.bits();
        self.per_round.push(bits);
        self.total += bits;
        self.cumulative.push(self.total);
        for m in &transcript.messages {
            self.counts[m.kind.index()] += 1;
        }
        if let Some(kept) = &mut self.transcripts {
            kept.push(transcript.clone());
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn rounds(&self) -> usize {
        self.per_round.len()
    }

    pub fn round_bits(&self) -> &[u64] {
        &self.per_round
    }

    /// Bits sent up to and including each round.
    pub fn cumulative_bits(&self) -> &[u64] {
        &self.cumulative
    }

    pub fn count(&self, kind: MessageKind) -> u64 {
        self.counts[kind.index()]
    }

    pub fn transcripts(&self) -> Option<&[RoundTranscript]> {
        self.transcripts.as_deref()
    }

    /// Double-entry check: the streaming totals against an independent
    /// recount of every stored message under `cost`.
    pub fn audit(&self, cost: &CostModel) -> Result<(), AuditError> {
        let summed: u64 = self.per_round.iter().sum();
        if summed != self.total {
            return Err(AuditError::TotalMismatch {
                ledger: self.total,
                recount: summed,
            });
        }
        if let Some(kept) = &self.transcripts {
            let mut total = 0;
            for (r, transcript) in kept.iter().enumerate() {
                let recount: u64 = transcript.messages.iter().map(|m| cost.cost(m.kind)).sum();
                if recount != self.per_round[r] {
                    return Err(AuditError::RoundMismatch {
                        round: r,
                        ledger: self.per_round[r],
                        recount,
                    });
                }
                total += recount;
            }
            if total != self.total {
                return Err(AuditError::TotalMismatch {
                    ledger: self.total,
                    recount: total,
                });
            }
        }
        Ok(())
    }

    /// One line per message: `round kind sender receiver expert b bits`;
    /// sync messages print `-` for expert and copy.
    pub fn dump(&self) -> Option<String> {
        let kept = self.transcripts.as_ref()?;
        let mut out = String::new();
        for m in kept.iter().flat_map(|t| &t.messages) {
            let (expert, copy) = match &m.report {
                Some(r) => (r.expert.to_string(), r.copy.to_string()),
                None => ("-".into(), "-".into()),
            };
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                m.round, m.kind, m.sender, m.receiver, expert, copy, m.bits
            );
        }
        Some(out)
    }
}

pub fn ledger_total(ledger: &CommLedger) -> u64 {
    ledger.total()
}

/// Raw value a server wants to report, before quantisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outgoing {
    pub expert: usize,
    pub copy: u32,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Network {
    servers: usize,
    cost: CostModel,
    quantizer: Quantizer,
    ledger: CommLedger,
}

impl Network {
    pub fn new(servers: usize, cost: CostModel, quantizer: Quantizer, keep_transcripts: bool) -> Self {
        Self {
            servers,
            cost,
            quantizer,
            ledger: CommLedger::new(keep_transcripts),
        }
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn quantizer(&self) -> &Quantizer {
        &self.quantizer
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> CommLedger {
        self.ledger
    }

    /// Run one round. `payload(j)` is consulted only for active rounds and
    /// returns what server `j` sends.
    pub fn run_round(
        &mut self,
        round: usize,
        active: bool,
        mut payload: impl FnMut(usize) -> Vec<Outgoing>,
    ) -> RoundTranscript {
        let mut messages = Vec::new();
        if active {
            for j in 0..self.servers {
                messages.push(self.message(round, MessageKind::SyncProbe, Role::Coordinator, Role::Server(j), None));
                for out in payload(j) {
                    let report = Report {
                        expert: out.expert,
                        copy: out.copy,
                        code: self.quantizer.encode(out.value),
                    };
                    messages.push(self.message(round, MessageKind::ValueReport, Role::Server(j), Role::Coordinator, Some(report)));
                }
                messages.push(self.message(round, MessageKind::SyncAck, Role::Server(j), Role::Coordinator, None));
            }
        }
        let transcript = RoundTranscript {
            round,
            active,
            messages,
        };
        self.ledger.record(&transcript);
        transcript
    }

    /// Decode every value report in `transcript`; this is all the coordinator
    /// ever learns about the losses.
    pub fn receive(&self, transcript: &RoundTranscript) -> Vec<Received> {
        transcript
            .reports()
            .map(|(server, r)| Received {
                server,
                expert: r.expert,
                copy: r.copy,
                value: self.quantizer.decode(r.code),
            })
            .collect()
    }

    fn message(&self, round: usize, kind: MessageKind, sender: Role, receiver: Role, report: Option<Report>) -> Message {
        Message {
            round,
            kind,
            sender,
            receiver,
            report,
            bits: self.cost.cost(kind),
        }
    }
}
