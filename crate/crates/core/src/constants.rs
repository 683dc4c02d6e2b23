//! Physical constants (SI, CODATA 2018 exact where applicable).

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Rb-87 atomic mass in u.
pub const RB87_MASS_U: f64 = 86.909_180_527;
/// Rb-87 D1 line vacuum wavelength, m.
pub const RB87_D1_WAVELENGTH: f64 = 794.978_851_156e-9;
/// Rb-87 D2 line vacuum wavelength, m.
pub const RB87_D2_WAVELENGTH: f64 = 780.241_209_686e-9;

/// Angular frequency (rad/s) of light with the given vacuum wavelength.
pub fn angular_frequency(wavelength: f64) -> f64 {
    2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / wavelength
}
