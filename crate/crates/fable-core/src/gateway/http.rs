//! Minimal blocking HTTP/1.1 transport.
//!
//! Supports plain `http://` endpoints (local inference servers, gateways,
//! proxies). TLS is intentionally out of scope; point the endpoint at a
//! TLS-terminating proxy if the upstream requires https.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

/// A raw HTTP response: status code plus body text.
#[derive(Debug, Clone)]
pub struct TransportResponse {
    pub status: u16,
    pub body: String,
}

/// Abstraction over the wire so tests can substitute instrumented fakes.
pub trait Transport: Send + Sync {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<TransportResponse, String>;
}

#[derive(Debug, Clone)]
pub(crate) struct ParsedUrl {
    pub host: String,
    pub port: u16,
    pub path: String,
}

/// Parse an `http://host[:port][/path]` URL. Rejects other schemes.
pub(crate) fn parse_http_url(url: &str) -> Result<ParsedUrl, String> {
    let rest = url
        .strip_prefix("http://")
        .ok_or_else(|| format!("unsupported endpoint scheme in '{url}': only http:// is supported"))?;
    let (authority, path) = match rest.find('/') {
        Some(i) => (&rest[..i], rest[i..].to_string()),
        None => (rest, "/".to_string()),
    };
    if authority.is_empty() {
        return Err(format!("missing host in '{url}'"));
    }
    let (host, port) = match authority.rsplit_once(':') {
        Some((h, p)) => {
            let port: u16 = p.parse().map_err(|_| format!("bad port in '{url}'"))?;
            (h.to_string(), port)
        }
        None => (authority.to_string(), 80),
    };
    Ok(ParsedUrl { host, port, path })
}

/// The real TCP-backed transport.
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn post(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &str,
        timeout: Duration,
    ) -> Result<TransportResponse, String> {
        let parsed = parse_http_url(url)?;
        let addr = (parsed.host.as_str(), parsed.port)
            .to_socket_addrs()
            .map_err(|e| format!("resolve {}: {e}", parsed.host))?
            .next()
            .ok_or_else(|| format!("no address for {}", parsed.host))?;
        let stream = TcpStream::connect_timeout(&addr, timeout)
            .map_err(|e| format!("connect {addr}: {e}"))?;
        stream.set_read_timeout(Some(timeout)).map_err(|e| e.to_string())?;
        stream.set_write_timeout(Some(timeout)).map_err(|e| e.to_string())?;

        let mut request = format!(
            "POST {} HTTP/1.1\r\nHost: {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n",
            parsed.path,
            parsed.host,
            body.len()
        );
        for (name, value) in headers {
            request.push_str(&format!("{name}: {value}\r\n"));
        }
        request.push_str("\r\n");

        let mut stream = stream;
        stream.write_all(request.as_bytes()).map_err(|e| format!("write: {e}"))?;
        stream.write_all(body.as_bytes()).map_err(|e| format!("write: {e}"))?;

        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).map_err(|e| format!("read: {e}"))?;
        parse_response(&raw)
    }
}

fn parse_response(raw: &[u8]) -> Result<TransportResponse, String> {
    let header_end = find_subslice(raw, b"\r\n\r\n")
        .ok_or_else(|| "truncated response: no header terminator".to_string())?;
    let head = std::str::from_utf8(&raw[..header_end]).map_err(|e| format!("bad header: {e}"))?;
    let mut lines = head.split("\r\n");
    let status_line = lines.next().ok_or("empty response")?;
    let status: u16 = status_line
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad status line: {status_line}"))?;

    let mut content_length: Option<usize> = None;
    let mut chunked = false;
    for line in lines {
        let Some((name, value)) = line.split_once(':') else { continue };
        let name = name.trim().to_ascii_lowercase();
        let value = value.trim();
        if name == "content-length" {
            content_length = value.parse().ok();
        } else if name == "transfer-encoding" && value.eq_ignore_ascii_case("chunked") {
            chunked = true;
        }
    }

    let body_bytes = &raw[header_end + 4..];
    let body = if chunked {
        decode_chunked(body_bytes)?
    } else {
        let take = content_length.unwrap_or(body_bytes.len()).min(body_bytes.len());
        body_bytes[..take].to_vec()
    };
    let body = String::from_utf8(body).map_err(|e| format!("non-utf8 body: {e}"))?;
    Ok(TransportResponse { status, body })
}

fn decode_chunked(mut raw: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    loop {
        let line_end = find_subslice(raw, b"\r\n").ok_or("truncated chunk size line")?;
        let size_line = std::str::from_utf8(&raw[..line_end]).map_err(|e| e.to_string())?;
        let size = usize::from_str_radix(size_line.trim().split(';').next().unwrap_or(""), 16)
            .map_err(|e| format!("bad chunk size '{size_line}': {e}"))?;
        raw = &raw[line_end + 2..];
        if size == 0 {
            return Ok(out);
        }
        if raw.len() < size {
            return Err("truncated chunk body".into());
        }
        out.extend_from_slice(&raw[..size]);
        raw = &raw[size..];
        raw = raw.strip_prefix(b"\r\n".as_slice()).unwrap_or(raw);
    }
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::TcpListener;

    #[test]
    fn parses_urls() {
        let u = parse_http_url("http://localhost:8000/v1/chat").unwrap();
        assert_eq!((u.host.as_str(), u.port, u.path.as_str()), ("localhost", 8000, "/v1/chat"));
        let u = parse_http_url("http://example.com").unwrap();
        assert_eq!((u.port, u.path.as_str()), (80, "/"));
        assert!(parse_http_url("https://example.com").is_err());
    }

    #[test]
    fn round_trips_against_local_server() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 4096];
            let mut total = Vec::new();
            loop {
                let n = stream.read(&mut buf).unwrap();
                total.extend_from_slice(&buf[..n]);
                if find_subslice(&total, b"\r\n\r\n").is_some() {
                    // read body per content-length
                    let head_end = find_subslice(&total, b"\r\n\r\n").unwrap();
                    let head = String::from_utf8_lossy(&total[..head_end]).to_string();
                    let len: usize = head
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse().unwrap()))
                        .unwrap_or(0);
                    while total.len() < head_end + 4 + len {
                        let n = stream.read(&mut buf).unwrap();
                        total.extend_from_slice(&buf[..n]);
                    }
                    break;
                }
            }
            let body = r#"{"ok":true}"#;
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{}",
                body.len(),
                body
            );
            stream.write_all(response.as_bytes()).unwrap();
            String::from_utf8_lossy(&total).to_string()
        });

        let url = format!("http://127.0.0.1:{}/v1/chat/completions", addr.port());
        let response = HttpTransport
            .post(
                &url,
                &[("Authorization".into(), "Bearer t".into())],
                r#"{"q":1}"#,
                Duration::from_secs(5),
            )
            .unwrap();
        assert_eq!(response.status, 200);
        assert_eq!(response.body, r#"{"ok":true}"#);

        let seen = server.join().unwrap();
        assert!(seen.starts_with("POST /v1/chat/completions HTTP/1.1"));
        assert!(seen.contains("Authorization: Bearer t"));
        assert!(seen.ends_with(r#"{"q":1}"#));
    }

    #[test]
    fn decodes_chunked_bodies() {
        let raw = b"HTTP/1.1 200 OK\r\nTransfer-Encoding: chunked\r\n\r\n5\r\nhello\r\n6\r\n world\r\n0\r\n\r\n";
        let response = parse_response(raw).unwrap();
        assert_eq!(response.body, "hello world");
    }
}
