//! Physical constants and unit conversions.

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

/// Zero power maps to negative infinity.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1000.0).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Free-space wavelength, `c / f`.
pub fn wavelength(frequency: f64) -> f64 {
    SPEED_OF_LIGHT / frequency
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wavelength_values() {
        assert_relative_eq!(wavelength(952.4e6), 0.31478, max_relative = 1e-4);
        assert_eq!(wavelength(SPEED_OF_LIGHT), 1.0);
        assert_relative_eq!(wavelength(2.0 * 952.4e6), wavelength(952.4e6) / 2.0);
        // a 3 cm grid step is roughly a tenth of a wavelength at 952.4 MHz
        assert!((wavelength(952.4e6) / 10.0 - 0.03).abs() < 0.002);
    }

    #[test]
    fn dbm_round_trip() {
        assert_eq!(dbm_to_watts(30.0), 1.0);
        assert_relative_eq!(watts_to_dbm(dbm_to_watts(-17.25)), -17.25, epsilon = 1e-12);
        assert_eq!(watts_to_dbm(0.0), f64::NEG_INFINITY);
        assert_relative_eq!(linear_to_db(2.0), 3.0103, max_relative = 1e-4);
        assert_relative_eq!(db_to_linear(6.0), 3.981, max_relative = 1e-3);
    }
}
