//! Welch's two-sample t-test.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TTestError {
    #[error("each sample needs at least 2 values (got {xs} and {ys})")]
    InsufficientData { xs: usize, ys: usize },
    #[error("samples contain a non-finite value")]
    NonFinite,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (mean, ss / (n - 1.0))
}

/// Unequal-variance t statistic with Welch–Satterthwaite degrees of
/// freedom. When both samples have zero variance the statistic is 0 for
/// equal means (p = 1) and infinite otherwise (p = 0), with df = n₁+n₂−2.
pub fn two_sample_t_test(xs: &[f64], ys: &[f64]) -> Result<TTest, TTestError> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(TTestError::InsufficientData { xs: xs.len(), ys: ys.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(TTestError::NonFinite);
    }
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mx, vx) = mean_var(xs);
    let (my, vy) = mean_var(ys);
    let (a, b) = (vx / nx, vy / ny);
    let se2 = a + b;
    if se2 == 0.0 {
        let df = nx + ny - 2.0;
        return Ok(if mx == my {
            TTest { t: 0.0, df, p_two_sided: 1.0 }
        } else {
            TTest { t: f64::INFINITY.copysign(mx - my), df, p_two_sided: 0.0 }
        });
    }
    let t = (mx - my) / se2.sqrt();
    let df = se2 * se2 / (a * a / (nx - 1.0) + b * b / (ny - 1.0));
    Ok(TTest { t, df, p_two_sided: t_two_sided_p(t, df) })
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
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
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // the continued fraction converges quickly only on this side
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta, modified Lentz method.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn beta_endpoints_and_symmetry() {
        assert_eq!(reg_inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(reg_inc_beta(2.0, 3.0, 1.0), 1.0);
        // I_x(1, 1) = x
        assert!((reg_inc_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        let (a, b, x) = (2.5, 4.0, 0.37);
        assert!((reg_inc_beta(a, b, x) + reg_inc_beta(b, a, 1.0 - x) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn identical_samples() {
        let xs = [1.0, 2.0, 3.0];
        let r = two_sample_t_test(&xs, &xs).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p_two_sided - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_samples() {
        let r = two_sample_t_test(&[1.0, 1.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(r.p_two_sided, 0.0);
        assert_eq!(r.df, 3.0);
        let r = two_sample_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn p_shrinks_with_separation() {
        let mut last = 1.0;
        for shift in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let ys: Vec<f64> = [1.0, 1.2, 0.9, 1.1].iter().map(|y| y + shift).collect();
            let p = two_sample_t_test(&[1.0, 1.1, 0.95, 1.05], &ys).unwrap().p_two_sided;
            assert!(p <= last);
            last = p;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn errors() {
        assert_eq!(
            two_sample_t_test(&[1.0], &[1.0, 2.0]),
            Err(TTestError::InsufficientData { xs: 1, ys: 2 })
        );
        assert_eq!(two_sample_t_test(&[1.0, f64::NAN], &[1.0, 2.0]), Err(TTestError::NonFinite));
    }
}
