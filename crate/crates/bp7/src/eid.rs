//! Endpoint identifiers: the `dtn` and `ipn` schemes and the null endpoint.
//!
//! On the wire an EID is a two-element array `[scheme-code, ssp]`:
//! `dtn:none` is `[1, 0]`, a dtn path is `[1, "path"]`, and an ipn address is
//! `[2, [node, service]]`.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use crate::cbor::{ArrayLen, Reader, Writer};
use crate::error::{DecodeError, EidParseError};

const SCHEME_DTN: u64 = 1;
const SCHEME_IPN: u64 = 2;

/// A scheme-qualified endpoint identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EndpointId {
    /// The null endpoint, `dtn:none`, used for anonymous bundles.
    Null,
    /// A dtn-scheme endpoint; the path never starts with `/` and contains no
    /// whitespace.
    Dtn(String),
    /// An ipn-scheme endpoint, a (node, service) number pair.
    Ipn { node: u64, service: u64 },
}

impl EndpointId {
    /// Build a dtn-scheme endpoint, validating the path rules.
    pub fn dtn(path: &str) -> Result<EndpointId, EidParseError> {
        if path.is_empty() {
            return Err(EidParseError::EmptySsp);
        }
        if path == "none" {
            return Ok(EndpointId::Null);
        }
        if path.starts_with('/') || path.chars().any(char::is_whitespace) {
            return Err(EidParseError::InvalidDtnSsp(path.to_string()));
        }
        Ok(EndpointId::Dtn(path.to_string()))
    }

    pub fn ipn(node: u64, service: u64) -> EndpointId {
        EndpointId::Ipn { node, service }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, EndpointId::Null)
    }

    /// Whether this EID names a node rather than an application endpoint:
    /// a dtn-scheme id without a service path.
    pub fn is_node_id(&self) -> bool {
        match self {
            EndpointId::Dtn(path) => !path.contains('/'),
            _ => false,
        }
    }

    pub fn encode(&self, w: &mut Writer) {
        w.array(2);
        match self {
            EndpointId::Null => {
                w.uint(SCHEME_DTN);
                w.uint(0);
            }
            EndpointId::Dtn(path) => {
                w.uint(SCHEME_DTN);
                w.text(path);
            }
            EndpointId::Ipn { node, service } => {
                w.uint(SCHEME_IPN);
                w.array(2);
                w.uint(*node);
                w.uint(*service);
            }
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<EndpointId, DecodeError> {
        match r.array()? {
            ArrayLen::Definite(2) => {}
            other => {
                return Err(DecodeError::InvalidEid(alloc::format!(
                    "expected 2-element array, got {other:?}"
                )))
            }
        }
        let scheme = r.uint()?;
        match scheme {
            SCHEME_DTN => {
                if r.peek_major()? == 0 {
                    let v = r.uint()?;
                    if v != 0 {
                        return Err(DecodeError::InvalidEid(alloc::format!(
                            "dtn ssp integer {v} is not the null endpoint"
                        )));
                    }
                    Ok(EndpointId::Null)
                } else {
                    let path = r.text()?;
                    EndpointId::dtn(path)
                        .map_err(|e| DecodeError::InvalidEid(alloc::format!("{e}")))
                }
            }
            SCHEME_IPN => {
                match r.array()? {
                    ArrayLen::Definite(2) => {}
                    other => {
                        return Err(DecodeError::InvalidEid(alloc::format!(
                            "ipn ssp must be a 2-element array, got {other:?}"
                        )))
                    }
                }
                let node = r.uint()?;
                let service = r.uint()?;
                Ok(EndpointId::Ipn { node, service })
            }
            other => Err(DecodeError::InvalidEid(alloc::format!("unknown scheme code {other}"))),
        }
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndpointId::Null => write!(f, "dtn:none"),
            EndpointId::Dtn(path) => write!(f, "dtn:{path}"),
            EndpointId::Ipn { node, service } => write!(f, "ipn:{node}.{service}"),
        }
    }
}

impl FromStr for EndpointId {
    type Err = EidParseError;

    fn from_str(text: &str) -> Result<EndpointId, EidParseError> {
        let (scheme, ssp) = text.split_once(':').ok_or(EidParseError::MissingScheme)?;
        match scheme {
            "dtn" => EndpointId::dtn(ssp),
            "ipn" => {
                if ssp.is_empty() {
                    return Err(EidParseError::EmptySsp);
                }
                let (node, service) =
                    ssp.split_once('.').ok_or_else(|| EidParseError::InvalidIpn(ssp.to_string()))?;
                let parse = |part: &str| -> Result<u64, EidParseError> {
                    if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(EidParseError::InvalidIpn(ssp.to_string()));
                    }
                    part.parse().map_err(|_| EidParseError::InvalidIpn(ssp.to_string()))
                };
                Ok(EndpointId::Ipn { node: parse(node)?, service: parse(service)? })
            }
            other => {
                if other.is_empty() {
                    Err(EidParseError::MissingScheme)
                } else {
                    Err(EidParseError::UnknownScheme(other.to_string()))
                }
            }
        }
    }
}

/// Parse a textual EID. Convenience alias for [`str::parse`].
pub fn parse_eid(text: &str) -> Result<EndpointId, EidParseError> {
    text.parse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    #[test]
    fn null_endpoint_renders_exactly() {
        let e: EndpointId = "dtn:none".parse().unwrap();
        assert_eq!(e, EndpointId::Null);
        assert_eq!(format!("{e}"), "dtn:none");
    }

    #[test]
    fn figure_style_eids() {
        let e: EndpointId = "dtn:sink/lux".parse().unwrap();
        assert_eq!(e, EndpointId::Dtn("sink/lux".into()));
        let e: EndpointId = "ipn:1.2".parse().unwrap();
        assert_eq!(e, EndpointId::Ipn { node: 1, service: 2 });
    }

    #[test]
    fn parse_errors_name_the_component() {
        assert_eq!("bogus".parse::<EndpointId>(), Err(EidParseError::MissingScheme));
        assert_eq!(
            "mailto:x".parse::<EndpointId>(),
            Err(EidParseError::UnknownScheme("mailto".into()))
        );
        assert_eq!("dtn:".parse::<EndpointId>(), Err(EidParseError::EmptySsp));
        assert!(matches!(
            "dtn:/abs".parse::<EndpointId>(),
            Err(EidParseError::InvalidDtnSsp(_))
        ));
        assert!(matches!(
            "dtn:has space".parse::<EndpointId>(),
            Err(EidParseError::InvalidDtnSsp(_))
        ));
        assert!(matches!("ipn:1".parse::<EndpointId>(), Err(EidParseError::InvalidIpn(_))));
        assert!(matches!("ipn:1.-2".parse::<EndpointId>(), Err(EidParseError::InvalidIpn(_))));
        assert!(matches!("ipn:1.2.3".parse::<EndpointId>(), Err(EidParseError::InvalidIpn(_))));
    }

    #[test]
    fn text_roundtrip() {
        for text in ["dtn:none", "dtn:b2", "dtn:sink/lux", "ipn:1.2", "ipn:0.0"] {
            let e: EndpointId = text.parse().unwrap();
            assert_eq!(format!("{e}"), text);
        }
    }

    #[test]
    fn node_id_classification() {
        assert!("dtn:b2".parse::<EndpointId>().unwrap().is_node_id());
        assert!(!"dtn:sink/lux".parse::<EndpointId>().unwrap().is_node_id());
        assert!(!EndpointId::Null.is_node_id());
        assert!(!EndpointId::ipn(1, 2).is_node_id());
    }

    #[test]
    fn wire_roundtrip() {
        for text in ["dtn:none", "dtn:sink/lux", "ipn:7.1"] {
            let e: EndpointId = text.parse().unwrap();
            let mut w = Writer::new();
            e.encode(&mut w);
            let buf = w.into_bytes();
            let mut r = Reader::new(&buf);
            assert_eq!(EndpointId::decode(&mut r).unwrap(), e);
        }
    }

    #[test]
    fn null_wire_form_is_uint_zero() {
        let mut w = Writer::new();
        EndpointId::Null.encode(&mut w);
        assert_eq!(w.as_bytes(), &[0x82, 0x01, 0x00][..]);
    }
}
