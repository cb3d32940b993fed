//! Regularized incomplete gamma and beta functions and the distribution
//! tails built on them.

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_cont_frac(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_p needs a > 0");
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cont_frac(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`, computed
/// without cancellation in the far tail.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "gamma_q needs a > 0");
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cont_frac(a, x)
    }
}

fn beta_cont_frac(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta_inc needs a, b > 0");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cont_frac(a, b, x) / a
    } else {
        1.0 - front * beta_cont_frac(b, a, 1.0 - x) / b
    }
}

/// Upper tail of the chi-squared distribution.
pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_q(dof / 2.0, stat / 2.0).clamp(0.0, 1.0)
}

/// Two-sided tail probability of Student's t distribution.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_inc(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    // Reference values from an independent 30-digit arbitrary-precision
    // evaluation, rounded to 17 significant digits.
    const GAMMA_P_GRID: [(f64, f64, f64); 12] = [
        (0.5, 0.1, 0.345_279_153_981_422_98),
        (0.5, 3.333_333_333_333_333_5, 0.990_176_725_492_480_75),
        (1.0, 1.0, 0.632_120_558_828_557_68),
        (2.5, 0.7, 0.075_686_727_198_333_053),
        (3.0, 10.0, 0.997_230_604_284_488_42),
        (10.0, 5.0, 0.031_828_057_306_204_812),
        (10.0, 15.0, 0.930_146_339_300_590_23),
        (50.0, 45.0, 0.246_802_034_400_170_27),
        (0.1, 0.01, 0.662_621_259_954_479_79),
        (100.0, 120.0, 0.972_136_260_109_479_34),
        (11.5, 11.5, 0.539_229_109_447_708_17),
        (1.5, 30.0, 0.999_999_999_999_412_18),
    ];

    const BETA_GRID: [(f64, f64, f64, f64); 10] = [
        (0.5, 0.5, 0.3, 0.369_010_119_565_545_38),
        (2.0, 0.5, 0.666_666_666_666_666_6, 0.230_199_641_080_498_95),
        (1.0, 1.0, 0.25, 0.25),
        (5.0, 3.0, 0.4, 0.096_256_000_000_000_021),
        (0.5, 10.0, 0.05, 0.682_848_424_534_454_74),
        (20.0, 30.0, 0.45, 0.767_111_393_213_430_94),
        (2.5, 7.5, 0.9, 0.999_999_464_476_821_95),
        (100.0, 2.0, 0.98, 0.397_858_667_684_259_08),
        (3.0, 3.0, 0.5, 0.5),
        (0.7, 1.3, 0.01, 0.048_758_515_594_911_039),
    ];

    #[test]
    fn incomplete_gamma_matches_reference_grid() {
        for (a, x, want) in GAMMA_P_GRID {
            let got = gamma_p(a, x);
            assert!((got - want).abs() < 1e-9, "P({a}, {x}) = {got}, want {want}");
            assert!((gamma_q(a, x) - (1.0 - want)).abs() < 1e-9);
        }
    }

    #[test]
    fn incomplete_beta_matches_reference_grid() {
        for (a, b, x, want) in BETA_GRID {
            let got = beta_inc(a, b, x);
            assert!((got - want).abs() < 1e-9, "I_{x}({a}, {b}) = {got}, want {want}");
        }
    }

    #[test]
    fn ln_gamma_factorials() {
        let mut fact = 1.0f64;
        for n in 1..20 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n = {n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn tails() {
        assert_eq!(chi2_sf(0.0, 3.0), 1.0);
        assert_eq!(student_t_two_sided(0.0, 5.0), 1.0);
        assert_eq!(student_t_two_sided(f64::INFINITY, 5.0), 0.0);
        // Far tail stays positive instead of cancelling to zero.
        assert!(chi2_sf(200.0, 1.0) > 0.0);
    }
}
