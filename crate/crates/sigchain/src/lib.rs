//! Sample-level receiver front end for grant-free uplink packets.
//!
//! A packet is a Zadoff-Chu preamble followed by a nonnegative 4-PAM payload,
//! rectangular pulses, shifted by its carrier frequency offset. The receiver
//! frames energy events, finds the offsets present with a periodogram,
//! correlates the preamble once per offset, and keeps only the correlation
//! peaks that are not ghosts of another packet ([`spc`]).
//!
//! ```
//! use gfra_sigchain::preamble::zc_preamble;
//! let zc = zc_preamble(23, 5).unwrap();
//! assert!(zc.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
//! ```

pub mod correlate;
pub mod drift;
pub mod extract;
pub mod framing;
pub mod modem;
pub mod periodogram;
pub mod preamble;
pub mod receiver;
pub mod signal;
pub mod spc;
pub mod suite;

pub use gfra_core::{Error, Result, SystemParams};
pub use signal::{ComplexSignal, C64};
