//! Orthonormal Daubechies filter banks, db1 through db10.

// Coefficients carry 17 significant digits so they round-trip exactly.
#![allow(clippy::excessive_precision)]

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_ORDER: usize = 1;
pub const MAX_ORDER: usize = 10;

// Decomposition low-pass filters, stored in convolution order (the last tap
// is the largest-magnitude leading coefficient of the minimum-phase factor).
const DB1: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
const DB2: [f64; 4] = [
    -1.2940952255126038e-1,
    2.2414386804201338e-1,
    8.3651630373780791e-1,
    4.8296291314453414e-1,
];
const DB3: [f64; 6] = [
    3.5226291885709537e-2,
    -8.5441273882026662e-2,
    -1.3501102001025459e-1,
    4.5987750211849157e-1,
    8.0689150931109258e-1,
    3.3267055295008262e-1,
];
const DB4: [f64; 8] = [
    -1.0597401785069032e-2,
    3.28830116668852e-2,
    3.0841381835560764e-2,
    -1.8703481171909308e-1,
    -2.7983769416859854e-2,
    6.3088076792985891e-1,
    7.1484657055291565e-1,
    2.303778133088965e-1,
];
const DB5: [f64; 10] = [
    3.3357252854737713e-3,
    -1.2580751999081999e-2,
    -6.2414902127982743e-3,
    7.7571493840045714e-2,
    -3.2244869584638375e-2,
    -2.4229488706638203e-1,
    1.3842814590132073e-1,
    7.2430852843777293e-1,
    6.0382926979718967e-1,
    1.6010239797419291e-1,
];
const DB6: [f64; 12] = [
    -1.0773010853084796e-3,
    4.7772575109455106e-3,
    5.5384220116149614e-4,
    -3.158203931748603e-2,
    2.7522865530305729e-2,
    9.7501605587323049e-2,
    -1.2976686756726194e-1,
    -2.2626469396543982e-1,
    3.1525035170919763e-1,
    7.5113390802109535e-1,
    4.9462389039845309e-1,
    1.1154074335010946e-1,
];
const DB7: [f64; 14] = [
    3.5371379997452025e-4,
    -1.8016407040474909e-3,
    4.2957797292136652e-4,
    1.2550998556099841e-2,
    -1.6574541630666881e-2,
    -3.8029936935014414e-2,
    8.0612609151083072e-2,
    7.1309219266830265e-2,
    -2.2403618499387498e-1,
    -1.4390600392856498e-1,
    4.6978228740519312e-1,
    7.2913209084623512e-1,
    3.9653931948191731e-1,
    7.7852054085009179e-2,
];
const DB8: [f64; 16] = [
    -1.1747678412476953e-4,
    6.7544940645056937e-4,
    -3.9174037337694705e-4,
    -4.8703529934515743e-3,
    8.7460940474057767e-3,
    1.3981027917398282e-2,
    -4.4088253930794752e-2,
    -1.7369301001807546e-2,
    1.2874742662047846e-1,
    4.7248457391328277e-4,
    -2.8401554296154693e-1,
    -1.5829105256349306e-2,
    5.8535468365420671e-1,
    6.7563073629728981e-1,
    3.1287159091429997e-1,
    5.441584224310401e-2,
];
const DB9: [f64; 18] = [
    3.9347320316271599e-5,
    -2.5196318894271014e-4,
    2.3038576352319597e-4,
    1.8476468830562265e-3,
    -4.2815036824634298e-3,
    -4.7232047577513973e-3,
    2.2361662123679097e-2,
    2.5094711483145196e-4,
    -6.7632829061329974e-2,
    3.0725681479333379e-2,
    1.4854074933810638e-1,
    -9.6840783222976461e-2,
    -2.9327378327917491e-1,
    1.3319738582500758e-1,
    6.5728807805130054e-1,
    6.0482312369011111e-1,
    2.4383467461259035e-1,
    3.8077947363878347e-2,
];
const DB10: [f64; 20] = [
    -1.3264202894521245e-5,
    9.3588670320069591e-5,
    -1.1646685512928545e-4,
    -6.8585669495971163e-4,
    1.9924052951850561e-3,
    1.3953517470529012e-3,
    -1.0733175483330575e-2,
    3.6065535669561697e-3,
    3.3212674059341002e-2,
    -2.9457536821875813e-2,
    -7.1394147166397087e-2,
    9.3057364603572351e-2,
    1.2736934033579326e-1,
    -1.9594627437737704e-1,
    -2.4984642432731538e-1,
    2.8117234366057746e-1,
    6.8845903945360357e-1,
    5.2720118893172559e-1,
    1.8817680007769149e-1,
    2.6670057900555554e-2,
];

fn lowpass(order: usize) -> &'static [f64] {
    match order {
        1 => &DB1,
        2 => &DB2,
        3 => &DB3,
        4 => &DB4,
        5 => &DB5,
        6 => &DB6,
        7 => &DB7,
        8 => &DB8,
        9 => &DB9,
        10 => &DB10,
        _ => unreachable!("order validated by caller"),
    }
}

/// Analysis and synthesis filters of an orthonormal Daubechies wavelet.
///
/// Sign convention: `hi_dec[k] = (-1)^k * lo_dec[len - 1 - k]`. Synthesis
/// filters are the time reverses of the analysis filters.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    order: usize,
    pub lo_dec: Vec<f64>,
    pub hi_dec: Vec<f64>,
    pub lo_rec: Vec<f64>,
    pub hi_rec: Vec<f64>,
}

impl FilterBank {
    pub fn daubechies(order: usize) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
            return Err(Error::invalid(format!(
                "Daubechies order must be in {MIN_ORDER}..={MAX_ORDER}, got {order}"
            )));
        }
        let lo_dec = lowpass(order).to_vec();
        let len = lo_dec.len();
        let hi_dec: Vec<f64> = (0..len)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lo_dec[len - 1 - k]
            })
            .collect();
        let lo_rec = lo_dec.iter().rev().copied().collect();
        let hi_rec = hi_dec.iter().rev().copied().collect();
        Ok(Self {
            order,
            lo_dec,
            hi_dec,
            lo_rec,
            hi_rec,
        })
    }

    /// Parses names like `db4`.
    pub fn from_name(name: &str) -> Result<Self> {
        let order = parse_wavelet_name(name)?;
        Self::daubechies(order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn name(&self) -> String {
        format!("db{}", self.order)
    }

    /// Number of taps, `2 * order`.
    pub fn len(&self) -> usize {
        self.lo_dec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo_dec.is_empty()
    }
}

/// Shorthand for [`FilterBank::daubechies`].
pub fn daubechies_filters(order: usize) -> Result<FilterBank> {
    FilterBank::daubechies(order)
}

pub fn valid_wavelet_names() -> Vec<String> {
    (MIN_ORDER..=MAX_ORDER).map(|o| format!("db{o}")).collect()
}

pub fn parse_wavelet_name(name: &str) -> Result<usize> {
    let bad = || {
        Error::invalid(format!(
            "unknown wavelet '{name}', expected one of {}",
            valid_wavelet_names().join(", ")
        ))
    };
    let digits = name.trim().strip_prefix("db").ok_or_else(bad)?;
    let order: usize = digits.parse().map_err(|_| bad())?;
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(bad());
    }
    Ok(order)
}

/// Boundary extension used by the single-level transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Half-sample symmetric extension; coefficient count
    /// `floor((n + filter_len - 1) / 2)`.
    #[default]
    Symmetric,
    /// Periodization; coefficient count `ceil(n / 2)`, orthogonal on even
    /// lengths. Odd inputs are extended by repeating the last sample.
    Periodic,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Symmetric => "symmetric",
            Boundary::Periodic => "periodic",
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symmetric" | "sym" => Ok(Boundary::Symmetric),
            "periodic" | "per" | "periodization" => Ok(Boundary::Periodic),
            other => Err(Error::invalid(format!(
                "unknown boundary mode '{other}', expected symmetric or periodic"
            ))),
        }
    }
}
