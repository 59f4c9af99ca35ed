//! Feedback policies: controls expressed as functions of `(t, y, z, n)`.
//! Reading only the reduced state keeps a policy measurable with respect to
//! the jump history, which is all the controller observes.

/// A feedback control law.
pub trait Policy: Sync {
    fn control(&self, t: f64, y: f64, z: f64, n: u32) -> f64;
}

/// The do-nothing policy, `γ ≡ 0`.
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn control(&self, _t: f64, _y: f64, _z: f64, _n: u32) -> f64 {
        0.0
    }
}

impl<F> Policy for F
where
    F: Fn(f64, f64, f64, u32) -> f64 + Sync,
{
    fn control(&self, t: f64, y: f64, z: f64, n: u32) -> f64 {
        self(t, y, z, n)
    }
}
