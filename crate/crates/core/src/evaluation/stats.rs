//! Special functions for the t-test and hypergeometric tails.

const BETA_CF_EPS: f64 = 1e-14;
const BETA_CF_MAX_ITER: usize = 1000;

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// ln C(n, k).
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else if n <= 256 {
        (2..=n).map(|i| (i as f64).ln()).sum()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
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
    for m in 1..=BETA_CF_MAX_ITER {
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
        if (delta - 1.0).abs() < BETA_CF_EPS {
            break;
        }
    }
    h
}

/// P(T ≥ t) for Student's t with `df` degrees of freedom.
pub fn student_t_upper_tail(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    let x = df / (df + t * t);
    let half = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    if t >= 0.0 {
        half
    } else {
        1.0 - half
    }
}

/// P(X ≥ k) for X ~ Hypergeometric(population, successes, draws).
pub fn hypergeometric_upper_tail(population: u64, successes: u64, draws: u64, k: u64) -> f64 {
    assert!(successes <= population && draws <= population, "invalid hypergeometric parameters");
    let lo = draws.saturating_sub(population - successes);
    let hi = draws.min(successes);
    if k <= lo {
        return 1.0;
    }
    if k > hi {
        return 0.0;
    }
    let ln_total = ln_choose(population, draws);
    let terms: Vec<f64> = (k..=hi)
        .map(|i| ln_choose(successes, i) + ln_choose(population - successes, draws - i) - ln_total)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// Benjamini–Hochberg adjusted p-values, returned in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        let candidate = p_values[i] * m as f64 / (rank + 1) as f64;
        running = running.min(candidate).min(1.0);
        adjusted[i] = running.max(p_values[i]);
    }
    adjusted
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_stdev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_integers() {
        for (n, fact) in [(1u32, 1.0f64), (2, 1.0), (5, 24.0), (11, 3_628_800.0)] {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n = {n}");
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn t_tail_is_half_at_zero() {
        for df in [1.0, 5.0, 999.0] {
            assert!((student_t_upper_tail(0.0, df) - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn t_tail_cauchy_closed_form() {
        // df = 1 is the Cauchy distribution: P(T ≥ t) = 1/2 − atan(t)/π.
        for t in [-3.0, -0.5, 0.7, 2.0, 12.0] {
            let exact = 0.5 - f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_upper_tail(t, 1.0) - exact).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn hypergeometric_edges() {
        assert_eq!(hypergeometric_upper_tail(10, 3, 4, 0), 1.0);
        assert_eq!(hypergeometric_upper_tail(10, 3, 4, 4), 0.0);
        assert_eq!(hypergeometric_upper_tail(5, 5, 5, 5), 1.0);
        // P(X ≥ 1) with N=4, K=1, n=1 is 1/4.
        assert!((hypergeometric_upper_tail(4, 1, 1, 1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bh_example() {
        // raw*m/rank in rank order: .04, .06, .0533, .20; cumulative min from the top.
        let adj = benjamini_hochberg(&[0.01, 0.04, 0.03, 0.20]);
        assert!((adj[0] - 0.04).abs() < 1e-12);
        assert!((adj[1] - 0.04 * 4.0 / 3.0).abs() < 1e-12);
        assert!((adj[2] - 0.04 * 4.0 / 3.0).abs() < 1e-12);
        assert!((adj[3] - 0.20).abs() < 1e-12);
    }

    #[test]
    fn stdev_of_constant_is_zero() {
        assert_eq!(sample_stdev(&[0.5, 0.5, 0.5]), 0.0);
        assert!((sample_stdev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
