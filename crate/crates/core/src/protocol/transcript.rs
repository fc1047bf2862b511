use serde::{Deserialize, Serialize};

use super::{Message, MessageKind, ProtocolError, Role};

/// Ordered record of every message delivered during one session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Message>,
}

/// One JSON-lines record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: usize,
    pub sender: Role,
    pub kind: MessageKind,
    pub round: Option<u8>,
    pub payload_hex: String,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, message: Message) {
        self.messages.push(message);
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// First message matching `(sender, kind, round)`.
    pub fn find(&self, sender: Role, kind: MessageKind, round: Option<u8>) -> Option<&Message> {
        self.messages
            .iter()
            .find(|m| m.sender == sender && m.kind == kind && m.round == round)
    }

    pub fn count(&self, sender: Role, kind: MessageKind) -> usize {
        self.messages
            .iter()
            .filter(|m| m.sender == sender && m.kind == kind)
            .count()
    }

    /// Total payload bits of messages satisfying `pred`.
    pub fn bits_where(&self, pred: impl Fn(&Message) -> bool) -> u64 {
        self.messages
            .iter()
            .filter(|m| pred(m))
            .map(|m| m.payload.len() as u64 * 8)
            .sum()
    }

    pub fn phase2_bits(&self) -> u64 {
        self.bits_where(|m| m.kind.is_phase2())
    }

    pub fn records(&self) -> impl Iterator<Item = TranscriptRecord> + '_ {
        self.messages
            .iter()
            .enumerate()
            .map(|(seq, m)| TranscriptRecord {
                seq,
                sender: m.sender,
                kind: m.kind,
                round: m.round,
                payload_hex: hex::encode(&m.payload),
            })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in self.records() {
            out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses JSON lines; records must appear in `seq` order starting at 0.
    pub fn from_jsonl(text: &str) -> Result<Self, ProtocolError> {
        let mut transcript = Transcript::new();
        for (line_no, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let err = |reason: String| ProtocolError::Transcript {
                line: line_no + 1,
                reason,
            };
            let record: TranscriptRecord =
                serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if record.seq != transcript.len() {
                return Err(err(format!(
                    "expected seq {}, found {}",
                    transcript.len(),
                    record.seq
                )));
            }
            let payload = hex::decode(&record.payload_hex).map_err(|e| err(e.to_string()))?;
            transcript.push(Message {
                sender: record.sender,
                kind: record.kind,
                round: record.round,
                payload,
            });
        }
        Ok(transcript)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_layout() {
        let mut t = Transcript::new();
        t.push(Message {
            sender: Role::A,
            kind: MessageKind::Commit,
            round: Some(3),
            payload: vec![0xAB, 0x01],
        });
        t.push(Message {
            sender: Role::B,
            kind: MessageKind::PublicKey,
            round: None,
            payload: vec![],
        });
        let text = t.to_jsonl();
        assert_eq!(
            text,
            "{\"seq\":0,\"sender\":\"A\",\"kind\":\"Commit\",\"round\":3,\"payload_hex\":\"ab01\"}\n\
             {\"seq\":1,\"sender\":\"B\",\"kind\":\"PublicKey\",\"round\":null,\"payload_hex\":\"\"}\n"
        );
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn rejects_gaps_and_bad_hex() {
        let line =
            "{\"seq\":1,\"sender\":\"A\",\"kind\":\"Commit\",\"round\":1,\"payload_hex\":\"00\"}";
        assert!(matches!(
            Transcript::from_jsonl(line),
            Err(ProtocolError::Transcript { line: 1, .. })
        ));
        let line =
            "{\"seq\":0,\"sender\":\"A\",\"kind\":\"Commit\",\"round\":1,\"payload_hex\":\"zz\"}";
        assert!(Transcript::from_jsonl(line).is_err());
    }
}
