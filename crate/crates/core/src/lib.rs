//! Branch-exact simulation of photonic quantum gates driven by weak cross-Kerr
//! nonlinearities and homodyne detection.
//!
//! The state of a few polarization qubits entangled with coherent probe beams
//! is held exactly as a finite sum of branches (see [`hybrid_state`]). Probes
//! are read out by X-quadrature homodyne measurement ([`homodyne`]), and the
//! composite devices in [`gates`] (QND photon detectors, parity gate, Bell
//! analyzer, CNOT) add classical feed-forward on top.
//!
//! [`analysis`] holds the closed-form error model and a reproducible Monte
//! Carlo harness; [`fock_oracle`] is an independent truncated Fock-space
//! simulator used to certify the branch engine.
//!
//! ```
//! use kerrsim::gates::{parity_gate, Basis, GateConfig, Readout};
//! use kerrsim::hybrid_state::{HybridState, QubitId, QubitSpec};
//! use rand::SeedableRng;
//!
//! let cfg = GateConfig::new(100.0, 0.3).unwrap();
//! let input = HybridState::new_product_state(&[QubitSpec::diagonal(), QubitSpec::diagonal()]).unwrap();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
//! let mut readout = Readout::random(&mut rng);
//! let (outcome, post) =
//!     parity_gate(&input, QubitId(0), QubitId(1), Basis::Rectilinear, &cfg, &mut readout).unwrap();
//! println!("{:?}: {} branches", outcome.parity, post.branches().len());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fock_oracle;
pub mod gates;
pub mod homodyne;
pub mod hybrid_state;

pub use error::{Error, Result};
pub use gates::GateConfig;
pub use hybrid_state::{HybridState, PolLabel, ProbeId, QubitId, QubitSpec, Unitary2};
