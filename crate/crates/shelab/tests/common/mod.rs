//! Frozen oracle values shared by the integration tests.
#![allow(dead_code)]

/// (x, Ai, Ai′) from tests/oracles/airy_table.py at 40 digits.
pub const AIRY_TABLE: [(f64, f64, f64); 8] = [
    (-15.0, 0.278_217_490_870_828_9, 0.272_374_204_308_642),
    (-10.0, 0.040_241_238_486_443_19, 0.996_265_044_132_79),
    (-5.0, 0.350_761_009_024_114_32, 0.327_192_818_554_443_14),
    (-1.0, 0.535_560_883_292_352_1, -0.010_160_567_116_645_21),
    (0.0, 0.355_028_053_887_817_2, -0.258_819_403_792_806_8),
    (1.0, 0.135_292_416_312_881_42, -0.159_147_441_296_793_2),
    (5.0, 1.083_444_281_360_744_2e-4, -2.474_138_908_684_625e-4),
    (10.0, 1.104_753_255_289_868_6e-10, -3.520_633_676_738_923_6e-10),
];

/// (s0, F_GOE) from tests/oracles/goe_cdf.py: Nyström on the Ferrari–Spohn
/// determinant, a representation independent of the Pfaffian route.
pub const GOE_TABLE: [(f64, f64); 7] = [
    (-3.0, 0.069_600_118_867_381_13),
    (-2.0, 0.274_320_197_909_244_6),
    (-1.0, 0.583_789_895_519_760_6),
    (0.0, 0.831_908_066_202_968_5),
    (1.0, 0.951_421_236_911_557_3),
    (2.0, 0.989_597_571_084_827_9),
    (6.0, 0.999_998_059_185_927_4),
];
