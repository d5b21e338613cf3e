//! Decibel and unit conversions shared by the link-budget modules.

/// Power ratio to decibels.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Decibels to power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    to_db(watts * 1e3)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    from_db(dbm) * 1e-3
}

pub fn mw_to_watts(mw: f64) -> f64 {
    mw / 1e3
}

pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

pub fn cm2_to_m2(cm2: f64) -> f64 {
    cm2 / 1e4
}
