//! 21-point Gauss–Kronrod rule with globally adaptive bisection.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Values a quadrature rule can accumulate: reals and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Result of a quadrature over one or more panels.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<V> {
    pub value: V,
    pub abs_error: f64,
    /// Integral of |f|, the natural scale for relative tolerances.
    pub abs_integral: f64,
}

impl<V: QuadValue> Estimate<V> {
    pub fn zero() -> Self {
        Self { value: V::zero(), abs_error: 0.0, abs_integral: 0.0 }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            abs_error: self.abs_error + other.abs_error,
            abs_integral: self.abs_integral + other.abs_integral,
        }
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

/// One application of the Kronrod rule on `[a, b]`.
pub fn qk21<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> Estimate<V> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[10];
    let mut res_g = V::zero();
    let mut res_abs = f_center.modulus() * WGK[10];
    let mut fv1 = [V::zero(); 10];
    let mut fv2 = [V::zero(); 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        let sum = f1 + f2;
        res_k = res_k + sum * WGK[j];
        if j % 2 == 1 {
            res_g = res_g + sum * WG[j / 2];
        }
        res_abs += WGK[j] * (f1.modulus() + f2.modulus());
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (f_center - mean).modulus();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).modulus() + (fv2[j] - mean).modulus());
    }
    let w = half.abs();
    let err = (res_k - res_g).modulus() * w;
    Estimate { value: res_k * half, abs_error: rescale_error(err, res_abs * w, res_asc * w), abs_integral: res_abs * w }
}

/// Globally adaptive bisection: the panel with the largest error estimate
/// is split until the summed error is below
/// `max(rel_tol * ∫|f|, abs_tol)` or the panel budget is spent.
pub fn adaptive<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Estimate<V> {
    let mut heap = BinaryHeap::new();
    let first = qk21(f, a, b);
    let mut err_sum = first.abs_error;
    let mut abs_sum = first.abs_integral;
    heap.push(Panel { a, b, est: first });
    while heap.len() < MAX_PANELS {
        // never ask for less than the rule's own round-off floor
        let tol = (rel_tol.max(ROUNDOFF_REL) * abs_sum).max(abs_tol);
        if err_sum <= tol {
            break;
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = qk21(f, worst.a, mid);
        let right = qk21(f, mid, worst.b);
        err_sum += left.abs_error + right.abs_error - worst.est.abs_error;
        abs_sum += left.abs_integral + right.abs_integral - worst.est.abs_integral;
        heap.push(Panel { a: worst.a, b: mid, est: left });
        heap.push(Panel { a: mid, b: worst.b, est: right });
    }
    // sum in position order so the result does not depend on heap layout
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    panels.into_iter().fold(Estimate::zero(), |acc, p| acc.merge(p.est))
}

/// Panel budget of one adaptive integration.
const MAX_PANELS: usize = 2000;

const ROUNDOFF_REL: f64 = 100.0 * f64::EPSILON;

struct Panel<V> {
    a: f64,
    b: f64,
    est: Estimate<V>,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.est.abs_error == other.est.abs_error
    }
}

impl<V> Eq for Panel<V> {}

impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.est.abs_error.total_cmp(&other.est.abs_error)
    }
}
