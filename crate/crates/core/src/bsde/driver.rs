use rand::Rng;

use crate::default_model::IntensityModel;
use crate::rng::{path_rng, Stream};

/// Generator `f(t, y, z, u)` of the BSDE. `pre_default` is `1 − H_{t⁻}`.
///
/// Implementations must satisfy
/// `|f(t,y,z,u) − f(t,y',z',u')| ≤ K₂(|y−y'| + ‖z−z'‖) + λ_t |u−u'|`.
pub trait Driver {
    fn eval(&self, t: f64, y: f64, z: &[f64], u: f64, pre_default: bool) -> f64;

    /// `K₂`.
    fn lipschitz(&self) -> f64;

    /// `K₁`, the bound on the intensity.
    fn intensity_bound(&self) -> f64;

    /// `K = max(K₁, K₂)`.
    fn constant(&self) -> f64 {
        self.lipschitz().max(self.intensity_bound())
    }
}

/// Driver backed by a closure.
pub struct FnDriver<F> {
    f: F,
    lipschitz: f64,
    intensity_bound: f64,
}

impl<F> FnDriver<F>
where
    F: Fn(f64, f64, &[f64], f64, bool) -> f64,
{
    pub fn new(f: F, lipschitz: f64, intensity_bound: f64) -> Self {
        Self {
            f,
            lipschitz,
            intensity_bound,
        }
    }
}

impl<F> core::fmt::Debug for FnDriver<F> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnDriver")
            .field("lipschitz", &self.lipschitz)
            .field("intensity_bound", &self.intensity_bound)
            .finish_non_exhaustive()
    }
}

impl<F> Driver for FnDriver<F>
where
    F: Fn(f64, f64, &[f64], f64, bool) -> f64,
{
    fn eval(&self, t: f64, y: f64, z: &[f64], u: f64, pre_default: bool) -> f64 {
        (self.f)(t, y, z, u, pre_default)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn intensity_bound(&self) -> f64 {
        self.intensity_bound
    }
}

/// `f ≡ 0`.
pub fn zero_driver(intensity_bound: f64) -> FnDriver<fn(f64, f64, &[f64], f64, bool) -> f64> {
    FnDriver::new(|_, _, _, _, _| 0.0, 0.0, intensity_bound)
}

/// Spot-checks the Lipschitz condition on `samples` random pairs of points
/// in `[0, horizon] × [−10, 10]^{m+2}`.
pub fn check_lipschitz(
    driver: &dyn Driver,
    intensity: &IntensityModel,
    dim: usize,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> bool {
    let mut rng = path_rng(seed, Stream::Brownian, usize::MAX);
    let mut z1 = alloc::vec![0.0; dim];
    let mut z2 = alloc::vec![0.0; dim];
    let k2 = driver.lipschitz();
    (0..samples).all(|_| {
        let t = rng.random::<f64>() * horizon;
        let mut draw = || 20.0 * rng.random::<f64>() - 10.0;
        let (y1, y2, u1, u2) = (draw(), draw(), draw(), draw());
        for (a, b) in z1.iter_mut().zip(z2.iter_mut()) {
            *a = draw();
            *b = draw();
        }
        let pre = rng.random::<bool>();
        let lhs = (driver.eval(t, y1, &z1, u1, pre) - driver.eval(t, y2, &z2, u2, pre)).abs();
        let dz = crate::math::sqrt(
            z1.iter()
                .zip(&z2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>(),
        );
        let rhs = k2 * ((y1 - y2).abs() + dz) + intensity.intensity(t) * (u1 - u2).abs();
        lhs <= rhs * (1.0 + 1e-12) + 1e-12
    })
}
