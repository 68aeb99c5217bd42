//! Length-prefixed issuance over TCP.
//!
//! Each frame is a 4-byte big-endian length followed by that many bytes.
//! One request and one response per connection.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::Duration;

use super::{AttributeServiceProvider, IssuanceChannel, TransportError};

/// Upper bound on an accepted frame. Issuance messages are well under 1 KiB.
pub const MAX_FRAME: usize = 64 * 1024;

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> std::io::Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| std::io::ErrorKind::InvalidInput)?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()
}

pub fn read_frame<R: Read>(r: &mut R) -> std::io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Answers a single framed request on `stream`.
pub fn serve_connection(asp: &AttributeServiceProvider, stream: &mut TcpStream) -> std::io::Result<()> {
    let request = read_frame(stream)?;
    write_frame(stream, &asp.handle_bytes(&request))
}

#[derive(Debug, Clone)]
pub struct FramedTcpChannel {
    addr: SocketAddr,
    timeout: Duration,
}

impl FramedTcpChannel {
    pub fn new(addr: SocketAddr) -> Self {
        Self {
            addr,
            timeout: Duration::from_secs(10),
        }
    }
}

impl IssuanceChannel for FramedTcpChannel {
    fn exchange(&self, request: &[u8]) -> Result<Vec<u8>, TransportError> {
        let mut stream = TcpStream::connect_timeout(&self.addr, self.timeout)?;
        stream.set_read_timeout(Some(self.timeout))?;
        write_frame(&mut stream, request)?;
        Ok(read_frame(&mut stream)?)
    }
}
