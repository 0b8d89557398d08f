//! ScanListen wire format: one victim report per line,
//! `<ip>:<port> <user>:<pass>\n`. Single space separator, newline
//! terminator, bit-exact.

use thiserror::Error;

use crate::simkernel::{Address, SimTime};

/// A discovered-victim record flowing scanner -> ScanListen -> loader. The
/// credential pair was verified by a successful login before reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanReport {
    pub victim: Address,
    pub username: String,
    pub password: String,
    pub discovered_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("report line is not valid utf-8")]
    NotUtf8,
    #[error("missing newline terminator")]
    MissingNewline,
    #[error("expected `<ip>:<port> <user>:<pass>`, got `{0}`")]
    BadShape(String),
    #[error("bad victim endpoint `{0}`")]
    BadEndpoint(String),
    #[error("empty username")]
    EmptyUsername,
}

/// Renders a report as its wire line.
pub fn emit(report: &ScanReport) -> Vec<u8> {
    format!(
        "{} {}:{}\n",
        report.victim, report.username, report.password
    )
    .into_bytes()
}

/// Parses a wire line. `now` stamps the receive time; the line itself
/// carries no timestamp.
pub fn ingest(line: &[u8], now: SimTime) -> Result<ScanReport, ParseError> {
    let text = std::str::from_utf8(line).map_err(|_| ParseError::NotUtf8)?;
    let body = text.strip_suffix('\n').ok_or(ParseError::MissingNewline)?;
    let (endpoint, creds) = body
        .split_once(' ')
        .ok_or_else(|| ParseError::BadShape(body.to_string()))?;
    if creds.contains(' ') {
        return Err(ParseError::BadShape(body.to_string()));
    }
    let victim: Address = endpoint
        .parse()
        .map_err(|_| ParseError::BadEndpoint(endpoint.to_string()))?;
    let (username, password) = creds
        .split_once(':')
        .ok_or_else(|| ParseError::BadShape(body.to_string()))?;
    if username.is_empty() {
        return Err(ParseError::EmptyUsername);
    }
    Ok(ScanReport {
        victim,
        username: username.to_string(),
        password: password.to_string(),
        discovered_at: now,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkernel::Ipv4;

    fn report(user: &str, pass: &str) -> ScanReport {
        ScanReport {
            victim: Address::new(Ipv4::new(1, 2, 3, 4), 23),
            username: user.to_string(),
            password: pass.to_string(),
            discovered_at: SimTime::from_ms(777),
        }
    }

    #[test]
    fn golden_line() {
        assert_eq!(emit(&report("root", "xc3511")), b"1.2.3.4:23 root:xc3511\n");
    }

    #[test]
    fn empty_password_round_trips() {
        let r = report("root", "");
        let line = emit(&r);
        assert_eq!(line, b"1.2.3.4:23 root:\n");
        let back = ingest(&line, SimTime::from_ms(1)).unwrap();
        assert_eq!(back.victim, r.victim);
        assert_eq!(back.username, "root");
        assert_eq!(back.password, "");
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(ingest(b"garbage", SimTime::ZERO).is_err());
        assert!(ingest(b"garbage\n", SimTime::ZERO).is_err());
        assert!(ingest(b"1.2.3.4:23 root:x", SimTime::ZERO).is_err()); // no newline
        assert!(ingest(b"1.2.3.4 root:x\n", SimTime::ZERO).is_err()); // no port
        assert!(ingest(b"1.2.3.4:23 rootx\n", SimTime::ZERO).is_err()); // no colon
        assert!(ingest(b"1.2.3.4:23 :pw\n", SimTime::ZERO).is_err()); // empty user
        assert!(ingest(b"999.2.3.4:23 root:x\n", SimTime::ZERO).is_err());
        assert!(ingest(b"1.2.3.4:23 a:b c\n", SimTime::ZERO).is_err()); // extra token
    }

    #[test]
    fn password_may_contain_colons() {
        let line = b"1.2.3.4:23 root:a:b:c\n";
        let r = ingest(line, SimTime::ZERO).unwrap();
        assert_eq!(r.password, "a:b:c");
        assert_eq!(emit(&r), line);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn token() -> impl Strategy<Value = String> {
            // no spaces or newlines on the wire; usernames also carry no colon
            "[!#-9;-~]{1,12}"
        }

        proptest! {
            #[test]
            fn emit_then_ingest_is_identity(
                octets in proptest::array::uniform4(any::<u8>()),
                port in any::<u16>(),
                username in token(),
                password in proptest::option::of(token()),
            ) {
                let report = ScanReport {
                    victim: Address::new(Ipv4(octets), port),
                    username,
                    password: password.unwrap_or_default(),
                    discovered_at: SimTime::from_ms(123),
                };
                let line = emit(&report);
                let back = ingest(&line, report.discovered_at).unwrap();
                prop_assert_eq!(&back, &report);
                prop_assert_eq!(emit(&back), line);
            }
        }
    }
}
