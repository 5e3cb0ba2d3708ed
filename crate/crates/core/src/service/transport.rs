use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use super::{ProtocolError, Service, SessionMessage};

const MAX_LINE: u64 = 16 << 20;

fn too_long() -> String {
    let msg = SessionMessage::error("", ProtocolError::BadRequest, format!("line exceeds {MAX_LINE} bytes"));
    serde_json::to_string(&msg).expect("replies serialize")
}

/// Answers each newline-terminated request with one response line until the
/// input ends. Blank lines are ignored; invalid UTF-8 is answered like any
/// other malformed message.
pub fn serve_lines<R: BufRead, W: Write>(svc: &Service, mut input: R, mut output: W) -> std::io::Result<()> {
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = (&mut input).take(MAX_LINE).read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok(());
        }
        let reply = if n as u64 == MAX_LINE && buf.last() != Some(&b'\n') {
            let mut sink = Vec::new();
            loop {
                sink.clear();
                let m = (&mut input).take(MAX_LINE).read_until(b'\n', &mut sink)?;
                if m == 0 || sink.last() == Some(&b'\n') {
                    break;
                }
            }
            too_long()
        } else {
            let line = String::from_utf8_lossy(&buf);
            if line.trim().is_empty() {
                continue;
            }
            svc.handle_line(line.trim_end_matches(['\n', '\r']))
        };
        output.write_all(reply.as_bytes())?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
}

pub fn serve_stdio(svc: &Service) -> std::io::Result<()> {
    let stdin = std::io::stdin();
    serve_lines(svc, stdin.lock(), std::io::stdout().lock())
}

fn handle_connection(svc: &Service, stream: TcpStream) -> std::io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    serve_lines(svc, reader, BufWriter::new(stream))
}

/// Accepts connections forever, one thread each. Sessions are shared across
/// connections.
pub fn serve_tcp(svc: Arc<Service>, listener: TcpListener) -> std::io::Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                log::warn!("accept failed: {e}");
                continue;
            }
        };
        let svc = svc.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
            log::debug!("connection from {peer}");
            if let Err(e) = handle_connection(&svc, stream) {
                log::debug!("connection {peer} ended: {e}");
            }
        });
    }
    Ok(())
}
