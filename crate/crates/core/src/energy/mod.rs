//! Double-phase density, discrete energy and the pointwise inequality probes.

mod density;
mod exponents;
mod functional;
mod vmap;

pub use density::{DensityProfile, Modulation, Radial, Side, TanhModulation};
pub use exponents::Exponents;
pub use functional::{energy_gradient, h_cell_values, h_energy, h_integral, regularized_energy, total_energy};
pub use vmap::{conjugate_h0, monotonicity_gap, v_equivalence_ratio, v_map, MonotonicityGap};

pub(crate) use functional::{
    accumulate_gradient, cell_jacobian, check_compatible, chunked_sum, energy_change_of_values, energy_of_values,
    sq_norm, MAX_JACOBIAN,
};
