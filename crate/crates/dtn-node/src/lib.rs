//! A disruption-tolerant networking node built on the `bp7` bundle codec.
//!
//! The node persists bundles in a file-backed [`store`], exchanges them over
//! the minimal TCP convergence layer ([`cla`]), finds neighbors via UDP
//! beacons ([`discovery`]) or static peering, decides where to forward with
//! an exchangeable [`routing`] algorithm (epidemic by default), and exposes
//! send/fetch/register to applications through a RESTful [`agent`]. The
//! [`node`] module wires everything into a processing pipeline implementing
//! the reception, dispatch, forwarding, local delivery, and deletion
//! procedures. [`harness`] drives multi-daemon chain experiments and
//! extracts timing data from the structured journal.

pub mod agent;
pub mod cla;
pub mod config;
pub mod discovery;
pub mod harness;
pub mod journal;
pub mod metrics;
pub mod node;
pub mod pacing;
pub mod routing;
pub mod store;

pub use config::NodeConfig;
pub use node::Node;
