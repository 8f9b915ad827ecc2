//! Effective atomic units for a GaAs-like host.
//!
//! Energies, lengths and times are Hartree atomic units rescaled by the
//! effective mass `m*/m0` and the relative dielectric constant `eps/eps0`.

/// Hartree energy in meV.
const HARTREE_MEV: f64 = 27_211.386_245_988;
/// Bohr radius in nm.
const BOHR_NM: f64 = 0.052_917_721_090_3;
/// Reduced Planck constant in meV·fs.
const HBAR_MEV_FS: f64 = 658.211_956_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub energy_mev: f64,
    pub length_nm: f64,
    pub time_fs: f64,
    pub effective_mass: f64,
    pub dielectric: f64,
}

impl UnitSystem {
    /// Scales atomic units by effective mass and dielectric constant.
    pub fn effective(effective_mass: f64, dielectric: f64) -> Self {
        assert!(
            effective_mass > 0.0 && dielectric > 0.0,
            "material parameters must be positive"
        );
        let energy_mev = effective_mass / (dielectric * dielectric) * HARTREE_MEV;
        Self {
            energy_mev,
            length_nm: dielectric / effective_mass * BOHR_NM,
            time_fs: HBAR_MEV_FS / energy_mev,
            effective_mass,
            dielectric,
        }
    }

    /// GaAs: m* = 0.067, eps = 12.7.
    pub fn gaas() -> Self {
        Self::effective(0.067, 12.7)
    }

    pub fn to_femtoseconds(&self, t: f64) -> f64 {
        t * self.time_fs
    }

    pub fn to_mev(&self, e: f64) -> f64 {
        e * self.energy_mev
    }

    pub fn to_nm(&self, x: f64) -> f64 {
        x * self.length_nm
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::gaas()
    }
}
