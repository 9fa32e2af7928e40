//! Error function family.
//!
//! Rational Chebyshev approximations of W. J. Cody ("Rational Chebyshev
//! approximations for the error function", Math. Comp. 1969; CALERF from
//! netlib specfun). All three entries share one evaluation so that
//! `erfcx(x) = exp(x^2) erfc(x)` never forms the overflowing product.

#![allow(clippy::excessive_precision)]

const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_562_869_5e-1;
const THRESH: f64 = 0.46875;
const XNEG: f64 = -26.628;
const XSMALL: f64 = 1.11e-16;
const XBIG: f64 = 26.543;
const XHUGE: f64 = 6.71e7;
const XMAX: f64 = 2.53e307;

const A: [f64; 5] = [
    3.161_123_743_870_565_6,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_376,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_691e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const Q: [f64; 5] = [
    2.568_520_192_289_822_4,
    1.872_952_849_923_460_5,
    5.279_051_029_514_284e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_8e-3,
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Erf,
    Erfc,
    Erfcx,
}

/// `exp(-y^2)` split as `exp(-ysq^2) exp(-del)` with `ysq` truncated to
/// 1/16 so the product keeps full relative precision.
fn exp_neg_square(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

fn calerf(x: f64, kind: Kind) -> f64 {
    let y = x.abs();
    let mut result;

    if y <= THRESH {
        let ysq = if y > XSMALL { y * y } else { 0.0 };
        let mut num = A[4] * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + A[i]) * ysq;
            den = (den + B[i]) * ysq;
        }
        result = x * (num + A[3]) / (den + B[3]);
        return match kind {
            Kind::Erf => result,
            Kind::Erfc => 1.0 - result,
            Kind::Erfcx => ysq.exp() * (1.0 - result),
        };
    } else if y <= 4.0 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        result = (num + C[7]) / (den + D[7]);
        if kind != Kind::Erfcx {
            result *= exp_neg_square(y);
        }
    } else {
        result = 0.0;
        let skip = y >= XBIG && (kind != Kind::Erfcx || y >= XMAX);
        if y >= XHUGE && kind == Kind::Erfcx {
            result = if y >= XMAX { 0.0 } else { FRAC_1_SQRT_PI / y };
        } else if !skip {
            let ysq = 1.0 / (y * y);
            let mut num = P[5] * ysq;
            let mut den = ysq;
            for i in 0..4 {
                num = (num + P[i]) * ysq;
                den = (den + Q[i]) * ysq;
            }
            result = ysq * (num + P[4]) / (den + Q[4]);
            result = (FRAC_1_SQRT_PI - result) / y;
            if kind != Kind::Erfcx {
                result *= exp_neg_square(y);
            }
        }
    }

    match kind {
        Kind::Erf => {
            let r = (0.5 - result) + 0.5;
            if x < 0.0 {
                -r
            } else {
                r
            }
        }
        Kind::Erfc => {
            if x < 0.0 {
                2.0 - result
            } else {
                result
            }
        }
        Kind::Erfcx => {
            if x < 0.0 {
                if x < XNEG {
                    f64::INFINITY
                } else {
                    let e = 1.0 / exp_neg_square(x);
                    2.0 * e - result
                }
            } else {
                result
            }
        }
    }
}

pub fn erf(x: f64) -> f64 {
    calerf(x, Kind::Erf)
}

pub fn erfc(x: f64) -> f64 {
    calerf(x, Kind::Erfc)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    calerf(x, Kind::Erfcx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    // 40-digit reference values (mpmath, dps=40).
    const ERFC_REF: [(f64, f64); 20] = [
        (-3.5, 1.999_999_256_901_627_7),
        (-1.2, 1.910_313_978_229_635_4),
        (-0.3, 1.328_626_759_459_127_4),
        (0.0, 1.0),
        (1e-3, 0.998_871_621_209_030_8),
        (0.1, 0.887_537_083_981_715_1),
        (0.4, 0.571_607_644_953_331_5),
        (0.46875, 0.507_386_526_782_062),
        (0.5, 0.479_500_122_186_953_46),
        (0.9, 0.203_091_787_577_167_86),
        (1.5, 0.033_894_853_524_689_27),
        (2.0, 0.004_677_734_981_047_266),
        (3.0, 2.209_049_699_858_544e-5),
        (4.0, 1.541_725_790_028_002e-8),
        (4.5, 1.966_160_441_542_887_5e-10),
        (6.0, 2.151_973_671_249_891_3e-17),
        (10.0, 2.088_487_583_762_544_8e-45),
        (15.0, 7.212_994_172_451_207e-100),
        (25.0, 8.300_172_571_196_523e-274),
        (26.0, 5.663_192_408_856_143e-296),
    ];

    const ERFCX_REF: [(f64, f64); 10] = [
        (-2.0, 108.940_904_389_977_97),
        (0.0, 1.0),
        (0.3, 0.734_599_334_567_655_1),
        (1.0, 0.427_583_576_155_807),
        (3.0, 0.179_001_151_181_389_95),
        (5.0, 0.110_704_637_733_068_63),
        (12.0, 0.046_854_221_014_893_76),
        (30.0, 0.018_795_888_861_416_75),
        (100.0, 0.005_641_613_782_989_433),
        (1e4, 5.641_895_807_268_084e-5),
    ];

    #[test]
    fn erfc_matches_high_precision_reference() {
        for &(x, want) in &ERFC_REF {
            let got = erfc(x);
            assert!(rel(got, want) < 1e-14, "erfc({x}) = {got:e}, want {want:e}");
        }
    }

    #[test]
    fn erfcx_matches_high_precision_reference() {
        for &(x, want) in &ERFCX_REF {
            let got = erfcx(x);
            assert!(
                rel(got, want) < 1e-14,
                "erfcx({x}) = {got:e}, want {want:e}"
            );
        }
    }

    #[test]
    fn erf_is_complement() {
        for &(x, want) in &ERFC_REF[..12] {
            assert!((erf(x) - (1.0 - want)).abs() < 2e-16 * 4.0, "erf({x})");
        }
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(30.0), 1.0);
        assert_eq!(erf(-30.0), -1.0);
    }

    #[test]
    fn erfc_underflows_cleanly() {
        assert_eq!(erfc(27.0), 0.0);
        assert_eq!(erfc(-40.0), 2.0);
    }
}
