//! Adaptive Gauss–Kronrod quadrature for the evidence oracles.
//!
//! Evidence integrands are sharply peaked and span hundreds of orders of
//! magnitude, so callers integrate `exp(g(u) − g_max)` in a log coordinate
//! and restore the shift afterwards.

/// Kronrod nodes on [0, 1] of the 15-point rule (symmetric about 0).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights of the embedded 7-point rule, on the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrates `f` over `[a, b]` until the summed error estimate falls below
/// `max(abs_tol, rel_tol·|value|)` or `max_intervals` is reached.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Integral {
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * value.abs()) || parts.len() >= max_intervals {
            return Integral { value, abs_error: err };
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .expect("at least one interval");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// Integrates `exp(g(u))` over the real line in log space. The peak is
/// located by scanning `[lo, hi]` in `grid` steps, and the integration
/// window is cut where `g` drops 80 below its maximum. Returns `(log integral, abs error on the
/// log scale)`.
pub fn log_integrate_exp<F: FnMut(f64) -> f64>(mut g: F, lo: f64, hi: f64, grid: usize, rel_tol: f64) -> (f64, f64) {
    const DROP: f64 = 80.0;
    let step = (hi - lo) / grid as f64;
    let values: Vec<f64> = (0..=grid).map(|i| g(lo + step * i as f64)).collect();
    let (imax, gmax) = values
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("integrand finite somewhere on the grid");
    let mut left = imax;
    while left > 0 && values[left] > gmax - DROP {
        left -= 1;
    }
    let mut right = imax;
    while right < grid && values[right] > gmax - DROP {
        right += 1;
    }
    let a = lo + step * left.saturating_sub(1) as f64;
    let b = lo + step * (right + 1).min(grid) as f64;
    // Start from a split at the peak so the first panels see it.
    let peak = lo + step * imax as f64;
    let mut total = 0.0;
    let mut err = 0.0;
    for (x0, x1) in [(a, peak), (peak, b)] {
        if x1 > x0 {
            let r = integrate(|u| (g(u) - gmax).exp(), x0, x1, 0.0, rel_tol, 2000);
            total += r.value;
            err += r.abs_error;
        }
    }
    (gmax + total.ln(), err / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial_and_gaussian() {
        let r = integrate(|x| x * x, 0.0, 3.0, 1e-14, 1e-14, 50);
        assert_abs_diff_eq!(r.value, 9.0, epsilon = 1e-12);
        let (log_i, _) = log_integrate_exp(|u| -0.5 * u * u, -50.0, 50.0, 4000, 1e-12);
        assert_abs_diff_eq!(log_i, 0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-11);
    }

    #[test]
    fn sharp_peak_far_from_origin() {
        // ∫ exp(−1e6 (u − 7)²) du = √(π/1e6)
        let (log_i, _) = log_integrate_exp(|u| -1e6 * (u - 7.0).powi(2) + 500.0, -40.0, 40.0, 4000, 1e-12);
        assert_abs_diff_eq!(log_i, 500.0 + 0.5 * (std::f64::consts::PI / 1e6).ln(), epsilon = 1e-9);
    }
}
