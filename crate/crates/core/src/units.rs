//! Scale factors between SI base units and the micro-scale units accepted at
//! file and CLI boundaries. Everything inside the library is SI.

/// Metres per micrometre.
pub const UM: f64 = 1e-6;
/// Kilograms per nanogram.
pub const NG: f64 = 1e-12;
/// Pascal-seconds per centipoise.
pub const CP: f64 = 1e-3;
/// Tesla per millitesla.
pub const MT: f64 = 1e-3;
/// Metres per millimetre.
pub const MM: f64 = 1e-3;

pub fn um_to_m(x: f64) -> f64 {
    x * UM
}

pub fn m_to_um(x: f64) -> f64 {
    x / UM
}

pub fn ng_to_kg(x: f64) -> f64 {
    x * NG
}

pub fn kg_to_ng(x: f64) -> f64 {
    x / NG
}

pub fn cp_to_pa_s(x: f64) -> f64 {
    x * CP
}

pub fn pa_s_to_cp(x: f64) -> f64 {
    x / CP
}

pub fn mt_to_t(x: f64) -> f64 {
    x * MT
}

pub fn t_to_mt(x: f64) -> f64 {
    x / MT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_invert() {
        for &x in &[0.0, 1.0, 4.6, 0.401, 1.245, 123.456e3] {
            assert!((m_to_um(um_to_m(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
            assert!((kg_to_ng(ng_to_kg(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
            assert!((pa_s_to_cp(cp_to_pa_s(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
            assert!((t_to_mt(mt_to_t(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
