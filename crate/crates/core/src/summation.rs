//! Compensated (Neumaier) summation for long oscillatory sums.

use std::f64::consts::TAU;
use std::ops::AddAssign;

use num_complex::Complex64;

#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

/// Componentwise compensated sum of complex terms.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl AddAssign<Complex64> for ComplexSum {
    fn add_assign(&mut self, z: Complex64) {
        self.re += z.re;
        self.im += z.im;
    }
}

impl FromIterator<Complex64> for ComplexSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut s = ComplexSum::new();
        for z in iter {
            s += z;
        }
        s
    }
}

pub fn sum_complex<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    iter.into_iter().collect::<ComplexSum>().value()
}

/// `2 pi - TAU`.
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `exp(-2 pi i k x)` for `x = hi + lo`, keeping the rounding error of the
/// product `k hi` before reducing modulo 1.
pub fn unit_phase_scaled(k: f64, hi: f64, lo: f64) -> Complex64 {
    let p = k * hi;
    let e = k.mul_add(hi, -p);
    unit_phase((p - p.round()) + (e + k * lo))
}

/// `exp(-2 pi i t)` with `t` reduced to `[-1/2, 1/2]` first.
pub fn unit_phase(t: f64) -> Complex64 {
    let r = t - t.round();
    // the rounding error of TAU would bias every phase the same way, which
    // matters once ~10^6 correlated terms are summed
    let theta = -r.mul_add(TAU, r * TAU_LO);
    // + 0.0 turns a negative zero into a positive one
    Complex64::new(theta.cos(), theta.sin() + 0.0)
}
