//! Floating-point comparison helpers shared by every module.

pub const ABS_TOL: f64 = 1e-12;
pub const REL_TOL: f64 = 1e-9;

#[inline]
pub fn slack(a: f64, b: f64) -> f64 {
    ABS_TOL + REL_TOL * a.abs().max(b.abs())
}

#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= slack(a, b)
}

/// `a <= b` up to the shared tolerance.
#[inline]
pub fn approx_le(a: f64, b: f64) -> bool {
    a <= b + slack(a, b)
}

/// `a < b` by more than the shared tolerance.
#[inline]
pub fn definitely_lt(a: f64, b: f64) -> bool {
    a < b - slack(a, b)
}
