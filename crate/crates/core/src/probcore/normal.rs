//! Standard normal density, distribution and quantile functions.

use libm::erfc;
use std::f64::consts::FRAC_1_SQRT_2;

/// Clip applied to standard-normal arguments before mapping to physical space.
pub const STANDARD_CLIP: f64 = 8.2;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), accurate in the upper tail.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Φ⁻¹(p) by Wichura's AS241 (PPND16). Returns ∓∞ at p = 0 / 1 and NaN
/// outside [0, 1].
pub fn ppf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&PPF_A, r) / poly(&PPF_B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&PPF_C, r) / poly(&PPF_D, r)
    } else {
        r -= 5.0;
        poly(&PPF_E, r) / poly(&PPF_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn poly(c: &[f64; 8], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

const PPF_A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPF_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPF_C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPF_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPF_E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPF_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Inverse survival function: x with 1 − Φ(x) = q.
pub fn isf(q: f64) -> f64 {
    -ppf(q)
}

/// Reliability index β = −Φ⁻¹(pf); +∞ when pf = 0.
pub fn beta_from_pf(pf: f64) -> f64 {
    -ppf(pf)
}

pub fn pf_from_beta(beta: f64) -> f64 {
    cdf(-beta)
}

const GL10_NODES: [f64; 5] =
    [0.148_874_338_981_631_2, 0.433_395_394_129_247_2, 0.679_409_568_299_024_4, 0.865_063_366_688_984_5, 0.973_906_528_517_171_7];
const GL10_WEIGHTS: [f64; 5] =
    [0.295_524_224_714_752_9, 0.269_266_719_309_996_3, 0.219_086_362_515_982_0, 0.149_451_349_150_580_6, 0.066_671_344_308_688_1];

/// `Φ(a + h) − Φ(a)` for `h >= 0`, accurate when `h` is small next to `a`.
pub fn cdf_increment(a: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    if h * (a.abs() + 1.0) >= 1.0 {
        return if a >= 0.0 { sf(a) - sf(a + h) } else { cdf(a + h) - cdf(a) };
    }
    // φ(a) ∫₀ʰ exp(−a t − t²/2) dt by 10-point Gauss–Legendre
    let g = |t: f64| (-a * t - 0.5 * t * t).exp();
    let half = 0.5 * h;
    let sum: f64 = GL10_NODES
        .iter()
        .zip(GL10_WEIGHTS)
        .map(|(&x, w)| w * (g(half * (1.0 + x)) + g(half * (1.0 - x))))
        .sum();
    pdf(a) * half * sum
}
