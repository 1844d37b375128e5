/// Probabilities are clamped to `[EPSILON, 1 - EPSILON]` before taking logs.
pub const EPSILON: f64 = 1e-7;

/// Binary cross-entropy `-[y ln p + (1-y) ln(1-p)]`.
pub fn cross_entropy(label: f64, p: f64) -> f64 {
    let p = p.clamp(EPSILON, 1.0 - EPSILON);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// d/dp of [`cross_entropy`]; zero where the clamp is active.
pub fn cross_entropy_grad(label: f64, p: f64) -> f64 {
    if !(EPSILON..=1.0 - EPSILON).contains(&p) {
        return 0.0;
    }
    -label / p + (1.0 - label) / (1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((cross_entropy(1.0, 0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(cross_entropy(1.0, 1.0 - EPSILON) < 1e-6);
        assert!((cross_entropy(0.0, 0.8) - 1.609_437_912_434_100_3).abs() < 1e-12);
        assert!(cross_entropy(1.0, 0.0).is_finite());
        assert!(cross_entropy(0.0, 1.0).is_finite());
    }

    #[test]
    fn grad_at_half() {
        assert_eq!(cross_entropy_grad(1.0, 0.5), -2.0);
        let h = 1e-6;
        let fd = (cross_entropy(0.0, 0.3 + h) - cross_entropy(0.0, 0.3 - h)) / (2.0 * h);
        assert!((fd - cross_entropy_grad(0.0, 0.3)).abs() < 1e-8);
    }
}
