//! Exponentially scaled modified Bessel functions of the first kind,
//! `e^{-x} I_n(x)` for integer `n >= 0` and `x >= 0`.

/// `e^{-x} I_n(x)`.
pub fn scaled_bessel_i(n: u32, x: f64) -> f64 {
    assert!(
        x >= 0.0 && x.is_finite(),
        "scaled_bessel_i needs a finite x >= 0, got {x}"
    );
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x >= (4.0 * nf * nf).max(50.0) {
        asymptotic(n, x)
    } else {
        miller(n, x)
    }
}

/// Hankel expansion; terms shrink monotonically in the region where it is used.
fn asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Backward recurrence normalised by `I_0 + 2 sum_{k>=1} I_k = e^x`.
fn miller(n: u32, x: f64) -> f64 {
    let start = n as usize + 30 + (100.0 * x).sqrt().ceil() as usize;
    let mut above = 0.0f64; // I_{k+1}
    let mut current = 1e-300f64; // I_k
    let mut tail = 0.0f64; // sum_{j>=k+1} I_j
    let mut wanted = 0.0f64;
    for k in (1..=start).rev() {
        if k == n as usize {
            wanted = current;
        }
        tail += current;
        let below = (2.0 * k as f64 / x) * current + above;
        above = current;
        current = below;
        if current > 1e250 {
            above *= 1e-250;
            current *= 1e-250;
            tail *= 1e-250;
            wanted *= 1e-250;
        }
    }
    if n == 0 {
        wanted = current;
    }
    wanted / (current + 2.0 * tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    // direct power series for I_n(x) e^{-x}, accurate for moderate x
    fn series(n: u32, x: f64) -> f64 {
        let mut term = (0..n).fold(1.0, |acc, k| acc * (x / 2.0) / (k + 1) as f64);
        let mut sum = term;
        for k in 1..400 {
            term *= (x / 2.0).powi(2) / (k as f64 * (k + n) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum * (-x).exp()
    }

    #[test]
    fn matches_power_series() {
        for n in [0u32, 1, 2, 5, 12] {
            for x in [1e-3, 0.3, 1.0, 4.5, 17.0, 40.0] {
                let a = scaled_bessel_i(n, x);
                let b = series(n, x);
                assert!(
                    (a - b).abs() <= 1e-13 * b.max(1e-300) + 1e-300,
                    "n={n} x={x}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn branches_agree_at_threshold() {
        for n in [0u32, 3, 6] {
            let x = (4.0 * (n as f64).powi(2)).max(50.0);
            let a = asymptotic(n, x);
            let b = miller(n, x);
            assert!((a - b).abs() < 1e-13 * b, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn neumann_sum_is_one() {
        for x in [0.01, 2.0, 30.0, 400.0] {
            let s: f64 =
                scaled_bessel_i(0, x) + 2.0 * (1..400).map(|k| scaled_bessel_i(k, x)).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-12, "x={x}: {s}");
        }
    }
}
