//! Length-prefixed message framing over a reliable byte stream.
//!
//! Each message is `type: u8`, `length: u32 LE`, then `length` body bytes.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Upper bound on a single message body.
pub const MAX_BODY: u32 = 1 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageType {
    Hello = 1,
    Bundle = 2,
    Ack = 3,
    Report = 4,
    Bye = 5,
}

impl MessageType {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => MessageType::Hello,
            2 => MessageType::Bundle,
            3 => MessageType::Ack,
            4 => MessageType::Report,
            5 => MessageType::Bye,
            other => return Err(Error::Protocol(format!("unknown message type {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageType,
    pub body: Vec<u8>,
}

impl Message {
    pub fn new(kind: MessageType, body: impl Into<Vec<u8>>) -> Self {
        Message {
            kind,
            body: body.into(),
        }
    }

    pub fn empty(kind: MessageType) -> Self {
        Message::new(kind, Vec::new())
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let len = u32::try_from(self.body.len())
            .ok()
            .filter(|&l| l <= MAX_BODY)
            .ok_or_else(|| Error::Protocol(format!("body of {} bytes is too large", self.body.len())))?;
        let mut out = Vec::with_capacity(5 + self.body.len());
        out.push(self.kind as u8);
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&self.body);
        Ok(out)
    }
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    w.write_all(&msg.encode()?)?;
    w.flush()?;
    Ok(())
}

/// Read one message; a clean end of stream before the type byte yields `None`.
pub fn read_message<R: Read>(r: &mut R) -> Result<Option<Message>> {
    let mut kind = [0u8; 1];
    if r.read(&mut kind)? == 0 { return Ok(None) }
    let kind = MessageType::from_u8(kind[0])?;
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|e| Error::Protocol(format!("truncated length prefix: {e}")))?;
    let len = u32::from_le_bytes(len);
    if len > MAX_BODY {
        return Err(Error::Protocol(format!("declared body length {len} exceeds limit")));
    }
    let mut body = Vec::new();
    let got = r.take(len as u64).read_to_end(&mut body)?;
    if got != len as usize {
        return Err(Error::Protocol(format!(
            "body truncated: declared {len} bytes, received {got}"
        )));
    }
    Ok(Some(Message { kind, body }))
}

/// Read a message and require it to be of `kind`.
pub fn expect_message<R: Read>(r: &mut R, kind: MessageType) -> Result<Message> {
    match read_message(r)? {
        Some(m) if m.kind == kind => Ok(m),
        Some(m) => Err(Error::Protocol(format!("expected {kind:?}, got {:?}", m.kind))),
        None => Err(Error::Protocol(format!("connection closed while waiting for {kind:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_message(&mut buf, &Message::new(MessageType::Bundle, vec![1, 2, 3])).unwrap();
        write_message(&mut buf, &Message::empty(MessageType::Bye)).unwrap();
        let mut c = Cursor::new(buf);
        let m = read_message(&mut c).unwrap().unwrap();
        assert_eq!(m, Message::new(MessageType::Bundle, vec![1, 2, 3]));
        assert_eq!(read_message(&mut c).unwrap().unwrap().kind, MessageType::Bye);
        assert!(read_message(&mut c).unwrap().is_none());
    }

    #[test]
    fn unknown_type_rejected() {
        let mut c = Cursor::new(vec![9u8, 0, 0, 0, 0]);
        assert!(matches!(read_message(&mut c), Err(Error::Protocol(_))));
    }

    #[test]
    fn short_body_rejected() {
        let mut bytes = Message::new(MessageType::Bundle, vec![7; 10]).encode().unwrap();
        bytes.truncate(8);
        assert!(matches!(read_message(&mut Cursor::new(bytes)), Err(Error::Protocol(_))));
    }

    #[test]
    fn oversized_length_rejected() {
        let mut bytes = vec![MessageType::Bundle as u8];
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(read_message(&mut Cursor::new(bytes)), Err(Error::Protocol(_))));
    }
}
