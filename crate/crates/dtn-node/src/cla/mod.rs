//! Convergence layer adapters. MTCP is the only one implemented; the
//! descriptor type keeps the scheme open so beacons can announce CLAs this
//! node does not speak.

pub mod mtcp;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClaError {
    #[error("cla: bad descriptor {0:?}")]
    BadDescriptor(String),
    #[error("cla: peer {addr} unreachable: {source}")]
    Unreachable { addr: String, source: std::io::Error },
    #[error("cla: connection to {addr} dropped mid-stream: {source}")]
    Dropped { addr: String, source: std::io::Error },
    #[error("cla: bind failed on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("cla: bundle too large for framing: {0} bytes")]
    TooLarge(usize),
}

/// A convergence layer endpoint in `scheme://host:port` form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClaDescriptor {
    pub scheme: String,
    pub host: String,
    pub port: u16,
}

impl ClaDescriptor {
    pub fn mtcp(host: impl Into<String>, port: u16) -> ClaDescriptor {
        ClaDescriptor { scheme: "mtcp".into(), host: host.into(), port }
    }

    pub fn is_mtcp(&self) -> bool {
        self.scheme == "mtcp"
    }

    pub fn socket_addr_text(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

impl fmt::Display for ClaDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}://{}:{}", self.scheme, self.host, self.port)
    }
}

impl FromStr for ClaDescriptor {
    type Err = ClaError;

    fn from_str(text: &str) -> Result<ClaDescriptor, ClaError> {
        let bad = || ClaError::BadDescriptor(text.to_string());
        let (scheme, rest) = text.split_once("://").ok_or_else(bad)?;
        if scheme != "mtcp" {
            return Err(bad());
        }
        let (host, port) = rest.rsplit_once(':').ok_or_else(bad)?;
        if host.is_empty() {
            return Err(bad());
        }
        let port: u16 = port.parse().map_err(|_| bad())?;
        Ok(ClaDescriptor { scheme: scheme.into(), host: host.into(), port })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_roundtrip() {
        let d: ClaDescriptor = "mtcp://127.0.0.1:4556".parse().unwrap();
        assert_eq!(d, ClaDescriptor::mtcp("127.0.0.1", 4556));
        assert_eq!(d.to_string(), "mtcp://127.0.0.1:4556");
        assert_eq!(d.to_string().parse::<ClaDescriptor>().unwrap(), d);
    }

    #[test]
    fn rejects_unknown_schemes_and_junk() {
        assert!("tcp://1.2.3.4:1".parse::<ClaDescriptor>().is_err());
        assert!("mtcp://:80".parse::<ClaDescriptor>().is_err());
        assert!("mtcp://host".parse::<ClaDescriptor>().is_err());
        assert!("mtcp://host:notaport".parse::<ClaDescriptor>().is_err());
    }
}
