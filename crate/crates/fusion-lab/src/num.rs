//! Log-domain scalar helpers shared by the inference modules.

/// log(exp(a) + exp(b)) without overflow; tolerates -inf inputs.
pub(crate) fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Logistic function 1 / (1 + exp(-l)), stable in both tails.
pub(crate) fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp2_matches_naive_in_safe_range() {
        let cases: [(f64, f64); 4] = [(0.0, 0.0), (-3.0, 1.5), (10.0, -20.0), (-700.0, -701.0)];
        for (a, b) in cases {
            let naive = (a.exp() + b.exp()).ln();
            assert!((logsumexp2(a, b) - naive).abs() < 1e-12, "a={a} b={b}");
        }
    }

    #[test]
    fn logsumexp2_handles_extremes() {
        assert_eq!(logsumexp2(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
        assert_eq!(logsumexp2(f64::NEG_INFINITY, 2.5), 2.5);
        assert_eq!(logsumexp2(2.5, f64::NEG_INFINITY), 2.5);
        // Far enough apart that the small term is lost entirely.
        assert_eq!(logsumexp2(0.0, -800.0), 0.0);
    }

    #[test]
    fn sigmoid_known_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(f64::NEG_INFINITY), 0.0);
        assert_eq!(sigmoid(f64::INFINITY), 1.0);
        assert!((sigmoid(1.0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-16);
        // Saturates cleanly instead of producing NaN.
        assert_eq!(sigmoid(1e4), 1.0);
        assert_eq!(sigmoid(-1e4), 0.0);
    }

    #[test]
    fn sigmoid_is_monotone() {
        let mut prev = sigmoid(-40.0);
        let mut l = -40.0;
        while l <= 40.0 {
            let cur = sigmoid(l);
            assert!(cur >= prev);
            prev = cur;
            l += 0.25;
        }
    }
}
