//! Exact quantum oracles for small instances.
//!
//! Two dense engines used as ground truth for the approximate ones:
//! [`spin_chain`] evolves up to six spin-1 sites under the exchange
//! Hamiltonian (unitary, or Lindblad with local or collective jumps), and
//! [`three_mode`] evolves the Fock-space three-mode pair-creation model.
//! Everything is dense; clarity beats speed at these sizes.

pub mod spin_chain;
pub mod three_mode;

pub use spin_chain::{
    build_flipflop_hamiltonian, build_xy_hamiltonian, evolve_exact, evolve_lindblad,
    evolve_schrodinger_ode, product_state, JumpModel,
};
pub use three_mode::{build_threemode_hamiltonian, exact_pair_creation, FockBasis3};
