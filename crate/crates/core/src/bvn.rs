//! Bivariate normal probabilities.
//!
//! The upper-orthant routine follows Drezner and Wesolowsky's integration over
//! the correlation, with Gauss–Legendre rules of 6, 12 or 20 points depending
//! on |r| and Genz's reformulation for |r| ≥ 0.925.

use std::f64::consts::{PI, TAU};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::normal;

// Half rules: nodes on (−1, 0) and their weights.
const X6: [f64; 3] = [
    -0.932_469_514_203_152_2,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_197,
];
const W6: [f64; 3] = [
    0.171_324_492_379_170_5,
    0.360_761_573_048_138_4,
    0.467_913_934_572_690_4,
];
const X12: [f64; 6] = [
    -0.981_560_634_246_719_1,
    -0.904_117_256_370_475,
    -0.769_902_674_194_305,
    -0.587_317_954_286_617_1,
    -0.367_831_498_998_180_2,
    -0.125_233_408_511_469_2,
];
const W12: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
const X20: [f64; 10] = [
    -0.993_128_599_185_094_9,
    -0.963_971_927_277_913_8,
    -0.912_234_428_251_325_9,
    -0.839_116_971_822_218_8,
    -0.746_331_906_460_150_8,
    -0.636_053_680_726_515,
    -0.510_867_001_950_827_1,
    -0.373_706_088_715_419_6,
    -0.227_785_851_141_645_1,
    -0.076_526_521_133_497_33,
];
const W20: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];

static CLAMPED_CORRELATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of correlations clamped to [−1, 1] by [`bvn_rect`] in this process.
pub fn clamp_warnings() -> u64 {
    CLAMPED_CORRELATIONS.load(Ordering::Relaxed)
}

fn rule(r: f64) -> (&'static [f64], &'static [f64]) {
    let a = r.abs();
    if a < 0.3 {
        (&X6, &W6)
    } else if a < 0.75 {
        (&X12, &W12)
    } else {
        (&X20, &W20)
    }
}

/// Standard bivariate normal with a fixed correlation. The integration nodes
/// depend on r only, so they are computed once and shared by every orthant
/// evaluation.
#[derive(Debug, Clone, Copy)]
pub struct StdBvn {
    r: f64,
    len: usize,
    w: [f64; 20],
    // |r| < 0.925: sin values and 1 / (1 − sin²)
    // otherwise: squared abscissae and (1 − xs²)^{1/2}
    p: [f64; 20],
    s: [f64; 20],
    asr: f64,
    as_: f64,
}

impl StdBvn {
    pub fn new(r: f64) -> Self {
        let (xs, ws) = rule(r);
        let mut out = Self {
            r,
            len: 2 * xs.len(),
            w: [0.0; 20],
            p: [0.0; 20],
            s: [0.0; 20],
            asr: 0.0,
            as_: 0.0,
        };
        if r.abs() < 0.925 {
            out.asr = r.asin();
            let mut j = 0;
            for (&x, &w) in xs.iter().zip(ws) {
                for sign in [-1.0, 1.0] {
                    let sn = (0.5 * out.asr * (sign * x + 1.0)).sin();
                    out.w[j] = w;
                    out.p[j] = sn;
                    out.s[j] = 1.0 / (1.0 - sn * sn);
                    j += 1;
                }
            }
        } else if r.abs() < 1.0 {
            out.as_ = (1.0 - r) * (1.0 + r);
            let a = 0.5 * out.as_.sqrt();
            let mut j = 0;
            for (&x, &w) in xs.iter().zip(ws) {
                for sign in [-1.0, 1.0] {
                    let xs2 = (a * (sign * x + 1.0)).powi(2);
                    out.w[j] = w;
                    out.p[j] = xs2;
                    out.s[j] = (1.0 - xs2).sqrt();
                    j += 1;
                }
            }
        }
        out
    }

    pub fn correlation(&self) -> f64 {
        self.r
    }

    /// Upper orthant P(X > h, Y > k). Arguments must be finite.
    pub fn upper(&self, h: f64, k: f64) -> f64 {
        let r = self.r;
        let mut k = k;
        let mut hk = h * k;
        let mut bvn = 0.0;
        if r.abs() < 0.925 {
            let hs = 0.5 * (h * h + k * k);
            for j in 0..self.len {
                bvn += self.w[j] * ((self.p[j] * hk - hs) * self.s[j]).exp();
            }
            bvn = bvn * self.asr / (2.0 * TAU) + normal::cdf(-h) * normal::cdf(-k);
        } else {
            if r < 0.0 {
                k = -k;
                hk = -hk;
            }
            if r.abs() < 1.0 {
                let as_ = self.as_;
                let a = as_.sqrt();
                let bs = (h - k) * (h - k);
                let c = (4.0 - hk) / 8.0;
                let d = (12.0 - hk) / 16.0;
                bvn = a
                    * (-0.5 * (bs / as_ + hk)).exp()
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
                if hk > -160.0 {
                    let b = bs.sqrt();
                    bvn -= (-0.5 * hk).exp()
                        * TAU.sqrt()
                        * normal::cdf(-b / a)
                        * b
                        * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
                }
                let half_a = 0.5 * a;
                for j in 0..self.len {
                    let (xs2, rs) = (self.p[j], self.s[j]);
                    bvn += half_a
                        * self.w[j]
                        * ((-bs / (2.0 * xs2) - hk / (1.0 + rs)).exp() / rs
                            - (-0.5 * (bs / xs2 + hk)).exp() * (1.0 + c * xs2 * (1.0 + d * xs2)));
                }
                bvn = -bvn / TAU;
            }
            if r > 0.0 {
                bvn += normal::cdf(-h.max(k));
            } else if h >= k {
                bvn = -bvn;
            } else {
                let l = if h < 0.0 {
                    normal::cdf(k) - normal::cdf(h)
                } else {
                    normal::cdf(-h) - normal::cdf(-k)
                };
                bvn = l - bvn;
            }
        }
        bvn.clamp(0.0, 1.0)
    }

    /// P(X ≤ x, Y ≤ y); infinite limits are allowed.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
            0.0
        } else if x == f64::INFINITY {
            normal::cdf(y)
        } else if y == f64::INFINITY {
            normal::cdf(x)
        } else {
            self.upper(-x, -y)
        }
    }
}

/// Upper orthant P(X > h, Y > k) for a standard bivariate normal with
/// correlation r ∈ [−1, 1]. Arguments must be finite.
pub fn bvnd(h: f64, k: f64, r: f64) -> f64 {
    StdBvn::new(r).upper(h, k)
}

/// P(X ≤ x, Y ≤ y) for a standard bivariate normal with correlation r.
/// Infinite limits are allowed.
pub fn bvn_cdf(x: f64, y: f64, r: f64) -> f64 {
    StdBvn::new(r).cdf(x, y)
}

/// P(lower1 ≤ Z1 ≤ upper1, lower2 ≤ Z2 ≤ upper2) for a bivariate normal with
/// the given means, variances and covariance. Bounds may be infinite.
#[allow(clippy::too_many_arguments)]
pub fn bvn_rect(
    lower1: f64,
    upper1: f64,
    lower2: f64,
    upper2: f64,
    mean1: f64,
    mean2: f64,
    var1: f64,
    var2: f64,
    cov: f64,
) -> f64 {
    let s1 = var1.sqrt();
    let s2 = var2.sqrt();
    let mut r = cov / (s1 * s2);
    if r.abs() > 1.0 {
        CLAMPED_CORRELATIONS.fetch_add(1, Ordering::Relaxed);
        r = r.clamp(-1.0, 1.0);
    }
    let a1 = (lower1 - mean1) / s1;
    let b1 = (upper1 - mean1) / s1;
    let a2 = (lower2 - mean2) / s2;
    let b2 = (upper2 - mean2) / s2;
    if !(a1 < b1 && a2 < b2) {
        return 0.0;
    }
    let d = StdBvn::new(r);
    let p = d.cdf(b1, b2) - d.cdf(a1, b2) - d.cdf(b1, a2) + d.cdf(a1, a2);
    p.clamp(0.0, 1.0)
}

/// P(X ≤ 0, Y ≤ 0) = 1/4 + arcsin(r)/(2π).
pub fn quadrant_orthant(r: f64) -> f64 {
    0.25 + r.asin() / (2.0 * PI)
}
