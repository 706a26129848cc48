//! Length-prefixed framing: a 4-byte big-endian length followed by the payload.
//!
//! Producers send one JSONL trace line per message. The server answers with
//! JSON status messages using the same framing.

use std::io::{ErrorKind, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted payload.
pub const MAX_MESSAGE: usize = 16 << 20;

/// Writes one framed message.
pub fn write_message<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&l| l as usize <= MAX_MESSAGE)
        .ok_or_else(|| Error::Protocol(format!("payload of {} bytes is too large", payload.len())))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

/// Reads one framed message; `None` on a clean end of stream between messages.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Protocol("stream ended inside a length prefix".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE {
        return Err(Error::Protocol(format!("message of {len} bytes exceeds the limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::Protocol("stream ended inside a message".into())
        } else {
            e.into()
        }
    })?;
    Ok(Some(body))
}

/// Messages sent from the server to a producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ServerMessage {
    /// The connection was accepted as the active producer.
    Ready,
    /// Another producer is active; the connection is closed.
    Busy,
    /// The session was aborted; any partial report has been written.
    Error { message: String },
    /// The session ended and its report was written to `report`.
    Done { report: String, frames: usize },
}

impl ServerMessage {
    pub fn send<W: Write>(&self, w: &mut W) -> Result<()> {
        write_message(w, &serde_json::to_vec(self)?)?;
        w.flush()?;
        Ok(())
    }

    pub fn recv<R: Read>(r: &mut R) -> Result<Option<Self>> {
        match read_message(r)? {
            Some(b) => Ok(Some(serde_json::from_slice(&b)?)),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn framing_round_trip() {
        let mut buf = Vec::new();
        write_message(&mut buf, b"hello").unwrap();
        write_message(&mut buf, b"").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 5]);
        let mut r = Cursor::new(buf);
        assert_eq!(read_message(&mut r).unwrap().unwrap(), b"hello");
        assert_eq!(read_message(&mut r).unwrap().unwrap(), b"");
        assert_eq!(read_message(&mut r).unwrap(), None);
    }

    #[test]
    fn truncation_is_a_protocol_error() {
        let mut r = Cursor::new(vec![0u8, 0]);
        assert!(matches!(read_message(&mut r), Err(Error::Protocol(_))));
        let mut r = Cursor::new(vec![0u8, 0, 0, 9, b'a']);
        assert!(matches!(read_message(&mut r), Err(Error::Protocol(_))));
        let mut r = Cursor::new(u32::MAX.to_be_bytes().to_vec());
        assert!(matches!(read_message(&mut r), Err(Error::Protocol(_))));
    }

    #[test]
    fn status_messages_are_tagged() {
        let m = ServerMessage::Done {
            report: "r.json".into(),
            frames: 3,
        };
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"status":"done","report":"r.json","frames":3}"#
        );
        assert_eq!(serde_json::to_string(&ServerMessage::Busy).unwrap(), r#"{"status":"busy"}"#);
        let mut buf = Vec::new();
        m.send(&mut buf).unwrap();
        ServerMessage::Ready.send(&mut buf).unwrap();
        let mut r = Cursor::new(buf);
        assert_eq!(ServerMessage::recv(&mut r).unwrap(), Some(m));
        assert_eq!(ServerMessage::recv(&mut r).unwrap(), Some(ServerMessage::Ready));
        assert_eq!(ServerMessage::recv(&mut r).unwrap(), None);
    }
}
