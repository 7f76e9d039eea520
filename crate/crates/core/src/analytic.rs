//! Closed-form dispersive couplings, ZZ strengths and dressed frequencies.
//!
//! Every function takes angular frequencies and returns angular frequencies.
//! Detunings are `Delta_j = w_j - w_2`. Formulas are sign-general, so an
//! inverted chain (negative `alpha_2`, Q2 below the outer qubits) runs
//! through the same code.

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};

/// Denominators smaller than this (rad/ns) are treated as poles.
pub const POLE_TOL: f64 = 1e-12;

fn ratio(num: f64, den: f64, symbol: &str) -> Result<f64> {
    if den.abs() < POLE_TOL || !den.is_finite() {
        return Err(Error::singular(symbol));
    }
    Ok(num / den)
}

/// `J1(0) = g1 g3 (D1 + D3) / (2 D1 D3)`, exchange with Q2 in |0>.
pub fn j1_ground(g1: f64, g3: f64, d1: f64, d3: f64) -> Result<f64> {
    let a = ratio(1.0, d1, "Delta1")?;
    let b = ratio(1.0, d3, "Delta3")?;
    Ok(g1 * g3 * (a + b) / 2.0)
}

/// Exchange with Q2 in |1>: two interfering paths through |020> and |101>.
pub fn j1_excited(g1: f64, g3: f64, d1: f64, d3: f64, a2: f64) -> Result<f64> {
    ratio(1.0, d1, "Delta1")?;
    ratio(1.0, d3, "Delta3")?;
    let p1 = ratio(d1 + a2, d1 * (d1 - a2), "Delta1 - alpha2")?;
    let p3 = ratio(d3 + a2, d3 * (d3 - a2), "Delta3 - alpha2")?;
    Ok(g1 * g3 / 2.0 * (p1 + p3))
}

/// Two-excitation exchange with Q2 in |0>: `(|101>-|002>, |101>-|200>)`.
pub fn j2_ground(g1: f64, g3: f64, d1: f64, d3: f64, a1: f64, a3: f64) -> Result<(f64, f64)> {
    let half = |ga: f64, gb: f64, da: f64, db: f64, ab: f64, sa: &str, sb: &str| -> Result<f64> {
        ratio(1.0, da, sa)?;
        let r = ratio(da + db + ab, da * (db + ab), sb)?;
        Ok(std::f64::consts::SQRT_2 * ga * gb * r / 2.0)
    };
    let i = half(g1, g3, d1, d3, a3, "Delta1", "Delta3 + alpha3")?;
    let ii = half(g3, g1, d3, d1, a1, "Delta3", "Delta1 + alpha1")?;
    Ok((i, ii))
}

fn j2_excited_one(
    g1: f64,
    g3: f64,
    d1: f64,
    d3: f64,
    a3: f64,
    a2: f64,
    sym: [&str; 4],
) -> Result<f64> {
    let x = a3 - d1 + d3;
    let num = 2.0 * d1 * (d1 * d1 - a2 * a2) + (3.0 * d1 * d1 - a2 * a2) * x + (a2 + d1) * x * x;
    for (den, s) in [d1, d1 - a2, d3 + a3, d3 - a2 + a3].into_iter().zip(sym) {
        ratio(1.0, den, s)?;
    }
    let den = 2.0 * d1 * (d1 - a2) * (d3 + a3) * (d3 - a2 + a3);
    Ok(std::f64::consts::SQRT_2 * g1 * g3 * num / den)
}

/// Two-excitation exchange with Q2 in |1>: `(|111>-|012>, |111>-|210>)`.
pub fn j2_excited(
    g1: f64,
    g3: f64,
    d1: f64,
    d3: f64,
    a1: f64,
    a3: f64,
    a2: f64,
) -> Result<(f64, f64)> {
    let i = j2_excited_one(
        g1,
        g3,
        d1,
        d3,
        a3,
        a2,
        [
            "Delta1",
            "Delta1 - alpha2",
            "Delta3 + alpha3",
            "Delta3 - alpha2 + alpha3",
        ],
    )?;
    let ii = j2_excited_one(
        g3,
        g1,
        d3,
        d1,
        a1,
        a2,
        [
            "Delta3",
            "Delta3 - alpha2",
            "Delta1 + alpha1",
            "Delta1 - alpha2 + alpha1",
        ],
    )?;
    Ok((i, ii))
}

/// Parasitic ZZ between Q_j and Q2, `2 g^2 (a_j + a2) / ((D - a2)(D + a_j))`.
pub fn zz_nn(g: f64, d: f64, aj: f64, a2: f64) -> Result<f64> {
    ratio(1.0, d - a2, "Delta_j - alpha2")?;
    ratio(1.0, d + aj, "Delta_j + alpha_j")?;
    Ok(2.0 * g * g * (aj + a2) / ((d - a2) * (d + aj)))
}

/// Shift of the |2> level of Q_j with Q2 excited.
pub fn delta_shift(g: f64, d: f64, aj: f64, a2: f64) -> Result<f64> {
    ratio(1.0, 2.0 * aj + d, "2 alpha_j + Delta_j")?;
    let first = ratio(
        g * g * (5.0 * aj + d + 3.0 * a2),
        (2.0 * aj + d) * (d + aj - a2),
        "Delta_j + alpha_j - alpha2",
    )?;
    Ok(first - ratio(g * g, d, "Delta_j")?)
}

/// The four two-excitation exchange strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoExcitationCouplings {
    pub ground_i: f64,
    pub ground_ii: f64,
    pub excited_i: f64,
    pub excited_ii: f64,
}

/// Fourth-order NNN ZZ strengths `(zeta101, zeta111)`; `delta = w1 - w3`.
pub fn zz_nnn(
    j2: &TwoExcitationCouplings,
    delta: f64,
    a1: f64,
    a3: f64,
    zp1: f64,
    zp3: f64,
    d1: f64,
    d3: f64,
) -> Result<(f64, f64)> {
    let z101 = ratio(j2.ground_i.powi(2), delta - a3, "Delta - alpha3")?
        - ratio(j2.ground_ii.powi(2), delta + a1, "Delta + alpha1")?;
    let z111 = ratio(
        j2.excited_i.powi(2),
        delta - a3 + zp1 + zp3 - d3,
        "Delta - alpha3 + zeta'1 + zeta'3 - delta3",
    )? - ratio(
        j2.excited_ii.powi(2),
        delta + a1 - zp1 - zp3 + d1,
        "Delta + alpha1 - zeta'1 - zeta'3 + delta1",
    )?;
    Ok((z101, z111))
}

/// Diagonal of the projected effective Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldEnergies {
    /// `w'_j = w_j + g_j^2 / D_j` for j = 1, 3.
    pub w1_dressed: f64,
    pub w3_dressed: f64,
    /// `w''_j = w_j + g_j^2 / (D_j + a_j)`.
    pub w1_dressed2: f64,
    pub w3_dressed2: f64,
    /// `w'_2 = w_2 - g1^2/D1 - g3^2/D3`.
    pub w2_dressed: f64,
    pub e010: f64,
    pub e011: f64,
    pub e110: f64,
    pub e111: f64,
    pub e012: f64,
    pub e210: f64,
}

impl ManifoldEnergies {
    /// `E111 - E110 - E011 + E010`; zero by construction.
    pub fn excited_zz_residual(&self) -> f64 {
        self.e111 - self.e110 - self.e011 + self.e010
    }
}

/// Full coefficient set of the qubit-level effective Hamiltonian
/// `H = sum w_l Z_l/2 + zeta_1 ZZI/2 + zeta_3 IZZ/2 + J_Z (XZX+YZY)/2
///  + J_I (XIX+YIY)/2 + zeta_Z ZZZ/2 + zeta_I ZIZ/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub zeta1: f64,
    pub zeta3: f64,
    pub j_z: f64,
    pub j_i: f64,
    pub zeta_z: f64,
    pub zeta_i: f64,
    pub j1_ground: f64,
    pub j1_excited: f64,
    pub j2: TwoExcitationCouplings,
    pub zeta101: f64,
    pub zeta111: f64,
    pub zeta_nn1: f64,
    pub zeta_nn3: f64,
    pub delta1: f64,
    pub delta3: f64,
    pub energies: ManifoldEnergies,
    /// `|D_j / g_j|`.
    pub dispersive_ratio: [f64; 2],
}

/// Evaluates every effective coefficient at bare frequencies `freqs`.
///
/// The NNN ZZ detuning is taken between the dressed outer frequencies,
/// `w'_1 - w'_3`.
pub fn effective_coefficients(p: &DeviceParams, freqs: &[f64; 3]) -> Result<EffectiveCoefficients> {
    let [g1, g3] = p.coupling;
    let [a1, a2, a3] = p.anharmonicity;
    let [d1, d3] = DeviceParams::detunings(freqs);
    let dispersive_ratio = p.dispersive_ratios(freqs);
    if dispersive_ratio.iter().any(|r| *r < 5.0) {
        log::warn!("effective coefficients outside the dispersive regime: |Delta/g| = {dispersive_ratio:?}");
    }

    let j1g = j1_ground(g1, g3, d1, d3)?;
    let j1e = j1_excited(g1, g3, d1, d3, a2)?;
    let (gi, gii) = j2_ground(g1, g3, d1, d3, a1, a3)?;
    let (ei, eii) = j2_excited(g1, g3, d1, d3, a1, a3, a2)?;
    let j2 = TwoExcitationCouplings {
        ground_i: gi,
        ground_ii: gii,
        excited_i: ei,
        excited_ii: eii,
    };
    let zp1 = zz_nn(g1, d1, a1, a2)?;
    let zp3 = zz_nn(g3, d3, a3, a2)?;
    let dl1 = delta_shift(g1, d1, a1, a2)?;
    let dl3 = delta_shift(g3, d3, a3, a2)?;

    let w1p = freqs[0] + ratio(g1 * g1, d1, "Delta1")?;
    let w3p = freqs[2] + ratio(g3 * g3, d3, "Delta3")?;
    let w1pp = freqs[0] + ratio(g1 * g1, d1 + a1, "Delta1 + alpha1")?;
    let w3pp = freqs[2] + ratio(g3 * g3, d3 + a3, "Delta3 + alpha3")?;
    let w2p = freqs[1] - g1 * g1 / d1 - g3 * g3 / d3;
    let energies = ManifoldEnergies {
        w1_dressed: w1p,
        w3_dressed: w3p,
        w1_dressed2: w1pp,
        w3_dressed2: w3pp,
        w2_dressed: w2p,
        e010: w2p,
        e011: w2p + w3p + zp3,
        e110: w2p + w1p + zp1,
        e111: w2p + w1p + w3p + zp1 + zp3,
        e012: w2p + 2.0 * w3p + a3 + dl3,
        e210: w2p + 2.0 * w1p + a1 + dl1,
    };

    let (z101, z111) = zz_nnn(&j2, w1p - w3p, a1, a3, zp1, zp3, dl1, dl3)?;
    let zeta_z = (z111 - z101) / 4.0;
    let zeta_i = (z111 + z101) / 4.0;
    Ok(EffectiveCoefficients {
        w1: w1p + zp1 / 2.0 + zeta_i,
        w2: w2p + (zp1 + zp3) / 2.0 + zeta_z,
        w3: w3p + zp3 / 2.0 + zeta_i,
        zeta1: zp1 / 2.0 + zeta_z,
        zeta3: zp3 / 2.0 + zeta_z,
        j_z: (j1e - j1g) / 2.0,
        j_i: (j1e + j1g) / 2.0,
        zeta_z,
        zeta_i,
        j1_ground: j1g,
        j1_excited: j1e,
        j2,
        zeta101: z101,
        zeta111: z111,
        zeta_nn1: zp1,
        zeta_nn3: zp3,
        delta1: dl1,
        delta3: dl3,
        energies,
        dispersive_ratio,
    })
}

/// Two-level-qubit dispersive model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelEffective {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Coefficient of `(s1+ s3- + h.c.) Z2`; equals `-j1_ground`.
    pub j: f64,
}

/// Dressed frequencies and the three-body exchange of the two-level chain.
pub fn two_level_effective(
    g1: f64,
    g3: f64,
    d1: f64,
    d3: f64,
    bare: &[f64; 3],
) -> Result<TwoLevelEffective> {
    let s1 = ratio(g1 * g1, d1, "Delta1")?;
    let s3 = ratio(g3 * g3, d3, "Delta3")?;
    Ok(TwoLevelEffective {
        w1: bare[0] + s1,
        w2: bare[1] - (s1 + s3),
        w3: bare[2] + s3,
        j: -g1 * g3 * (d1 + d3) / (2.0 * d1 * d3),
    })
}
