//! Physical constants (CODATA 2018 exact values where defined).

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_8128e-12;
