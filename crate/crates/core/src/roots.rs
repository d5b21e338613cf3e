//! Bracketed bisection for monotone scalar functions.

use crate::error::{Error, Result};

/// Final bracket of a bisection: `feasible` is the side where the predicate
/// held at the start (`f >= 0`), `infeasible` the other side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub feasible: f64,
    pub infeasible: f64,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        (self.feasible - self.infeasible).abs()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.feasible + self.infeasible)
    }
}

/// Bisects `f` between `feasible` (where `f >= 0`) and `infeasible`
/// (where `f < 0`) until the bracket is narrower than `tol`.
///
/// The endpoints may be given in either order; the function only needs a
/// single sign change inside the bracket, which monotone callers guarantee.
pub fn bisect<F>(mut f: F, feasible: f64, infeasible: f64, tol: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> f64,
{
    if !(tol > 0.0) || !feasible.is_finite() || !infeasible.is_finite() {
        return Err(Error::NoBracket(format!(
            "invalid bisection inputs [{feasible}, {infeasible}] tol {tol}"
        )));
    }
    let f_ok = f(feasible);
    let f_bad = f(infeasible);
    if !(f_ok >= 0.0) || !(f_bad < 0.0) {
        return Err(Error::NoBracket(format!(
            "f({feasible}) = {f_ok:e}, f({infeasible}) = {f_bad:e}: no sign change"
        )));
    }

    let mut b = Bracket {
        feasible,
        infeasible,
    };
    // 2^-200 of any finite bracket is below f64 resolution.
    for _ in 0..200 {
        if b.width() <= tol {
            break;
        }
        let mid = b.midpoint();
        if mid == b.feasible || mid == b.infeasible {
            break;
        }
        if f(mid) >= 0.0 {
            b.feasible = mid;
        } else {
            b.infeasible = mid;
        }
    }
    Ok(b)
}
