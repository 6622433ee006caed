//! Standard normal CDF and its inverse.

use crate::error::{Error, Result};
use crate::num::Real;

fn poly<T: Real>(coef: &[f64], x: T) -> T {
    coef.iter().rev().fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

/// Complementary error function (Cody's rational Chebyshev approximations,
/// three ranges), accurate to about machine precision in double.
pub fn erfc<T: Real>(x: T) -> T {
    const A: [f64; 5] = [
        3.16112374387056560e00,
        1.13864154151050156e02,
        3.77485237685302021e02,
        3.20937758913846947e03,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [2.36012909523441209e01, 2.44024637934444173e02, 1.28261652607737228e03, 2.84423683343917062e03];
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e00,
        6.61191906371416295e01,
        2.98635138197400131e02,
        8.81952221241769090e02,
        1.71204761263407058e03,
        2.05107837782607147e03,
        1.23033935479799725e03,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e01,
        1.17693950891312499e02,
        5.37181101862009858e02,
        1.62138957456669019e03,
        3.29079923573345963e03,
        4.36261909014324716e03,
        3.43936767414372164e03,
        1.23033935480374942e03,
    ];
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [2.56852019228982242e00, 1.87295284992346725e00, 5.27905102951428412e-1, 6.05183413124413191e-2, 2.33520497626869185e-3];
    const INV_SQRT_PI: f64 = 5.641_895_835_477_563e-1;

    let y = x.abs();
    if y <= T::lit(0.46875) {
        let ysq = y * y;
        let mut num = T::lit(A[4]) * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + T::lit(A[i])) * ysq;
            den = (den + T::lit(B[i])) * ysq;
        }
        return T::one() - x * (num + T::lit(A[3])) / (den + T::lit(B[3]));
    }
    let tail = if y <= T::lit(4.0) {
        let mut num = T::lit(C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + T::lit(C[i])) * y;
            den = (den + T::lit(D[i])) * y;
        }
        (num + T::lit(C[7])) / (den + T::lit(D[7]))
    } else if y < T::lit(27.0) {
        let ysq = T::one() / (y * y);
        let mut num = T::lit(P[5]) * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + T::lit(P[i])) * ysq;
            den = (den + T::lit(Q[i])) * ysq;
        }
        let r = ysq * (num + T::lit(P[4])) / (den + T::lit(Q[4]));
        (T::lit(INV_SQRT_PI) - r) / y
    } else {
        T::zero()
    };
    // exp(-y^2) split to limit cancellation
    let sixteen = T::lit(16.0);
    let ysq = (y * sixteen).trunc() / sixteen;
    let del = (y - ysq) * (y + ysq);
    let value = (-ysq * ysq).exp() * (-del).exp() * tail;
    if x < T::zero() {
        T::lit(2.0) - value
    } else {
        value
    }
}

/// Φ(x), computed from `erfc` so the lower tail keeps full relative accuracy.
pub fn normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * erfc(-x / T::SQRT_2())
}

pub fn normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) / T::lit(2.0)).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

/// Φ⁻¹(p) for p in (0, 1): Wichura's AS 241 rational approximation followed
/// by one Halley step against [`normal_cdf`].
pub fn normal_quantile<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::BadProb(p.to_f64_lossy()));
    }
    if p > T::lit(0.5) {
        // 1 - p is exact on [0.5, 1]
        return Ok(-lower_quantile(T::one() - p));
    }
    Ok(lower_quantile(p))
}

/// Quantile for p <= 0.5, where Φ(x) can be evaluated without cancellation.
fn lower_quantile<T: Real>(p: T) -> T {
    let x = as241(p);
    if !x.is_finite() {
        return x;
    }
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    x - u / (T::one() + x * u / T::lit(2.0))
}

fn as241<T: Real>(p: T) -> T {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];
    let q = p - T::lit(0.5);
    if q.abs() <= T::lit(0.425) {
        let r = T::lit(0.180625) - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < T::zero() { p } else { T::one() - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= T::lit(5.0) {
        r -= T::lit(1.6);
        poly(&C, r) / poly(&D, r)
    } else {
        r -= T::lit(5.0);
        poly(&E, r) / poly(&F, r)
    };
    if q < T::zero() {
        -x
    } else {
        x
    }
}

/// Kolmogorov-Smirnov distance between the sample's empirical CDF and Φ.
pub fn ks_statistic_normal(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}
