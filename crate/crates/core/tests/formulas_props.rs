use std::f64::consts::PI;

use igsim::formulas::*;
use proptest::prelude::*;

// Written out from the definition, independently of the library.
fn d_oracle(k: f64, theta: f64) -> f64 {
    let tb = theta / PI;
    let a = k * (1.0 - tb) + 4.0 * tb;
    let b = k + 8.0 + (k - 4.0) * tb;
    a * b / (8.0 * k)
}

fn kappa() -> impl Strategy<Value = f64> {
    0.01f64..3.99
}

proptest! {
    #[test]
    fn endpoints_of_d(k in kappa()) {
        prop_assert!((lightcone_dimension(k, 0.0).unwrap() - (1.0 + k / 8.0)).abs() < 1e-12);
        prop_assert!((lightcone_dimension(k, PI).unwrap() - (1.0 + 2.0 / k)).abs() < 1e-12);
    }

    #[test]
    fn d_matches_oracle(k in kappa(), t in 0.0f64..=PI) {
        let d = lightcone_dimension(k, t).unwrap();
        prop_assert!((d - d_oracle(k, t)).abs() <= 1e-12 * d.abs().max(1.0));
    }

    #[test]
    fn d_reaches_two_at_critical_angle(k in 0.01f64..=2.0) {
        let tc = critical_angle(k).unwrap();
        prop_assert!(tc <= PI + 1e-12);
        prop_assert!((lightcone_dimension(k, tc.min(PI)).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn d_is_increasing_in_theta(k in kappa()) {
        let n = 2000;
        let mut prev = lightcone_dimension(k, 0.0).unwrap();
        for i in 1..=n {
            let d = lightcone_dimension(k, PI * i as f64 / n as f64).unwrap();
            prop_assert!(d > prev, "kappa {k}: d not increasing at step {i}");
            prev = d;
        }
    }

    #[test]
    fn light_cone_rho_dimension_is_d_of_theta_rho(k in kappa(), u in 0.001f64..0.999) {
        let (lo, hi) = light_cone_rho_range(k);
        let rho = lo + u * (hi - lo);
        let th = theta_of_rho(k, rho).unwrap();
        prop_assume!(th <= PI);
        let lhs = sle_rho_dimension(k, rho).unwrap();
        let rhs = lightcone_dimension(k, th).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        prop_assert_eq!(classify_phase(k, rho).unwrap().phase, Phase::LightCone);
    }

    #[test]
    fn canonical_exponent_identities(k in kappa(), t in 0.0f64..=PI) {
        let p = canonical_r_and_beta(k, t).unwrap();
        let (nu, xi) = nu_xi(16.0 / k, p.r);
        prop_assert!((p.nu + p.r - p.alpha).abs() < 1e-10);
        prop_assert!((nu - xi - p.beta).abs() < 1e-10);
        prop_assert!((2.0 - p.beta - lightcone_dimension(k, t).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn two_path_exponent_sum_is_alpha(
        k in kappa(),
        t1 in -1.0f64..1.0,
        t2 in -1.0f64..1.0,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let gap = t1 - t2;
        prop_assume!(gap > -PI && gap < PI * k / (4.0 - k));
        let w = TwoPathWeights::new(k, t1, t2, a, b).unwrap();
        let sum: f64 = w.exponents(k).iter().sum();
        let alpha = nonintersection_alpha(k, t1, t2, a, b).unwrap();
        prop_assert!((sum - alpha).abs() <= 1e-12 * alpha.abs().max(1.0), "{sum} vs {alpha}");
    }

    #[test]
    fn phase_regions_are_ordered_in_rho(k in kappa(), r1 in -8.0f64..4.0, r2 in -8.0f64..4.0) {
        let rank = |p: Phase| match p {
            Phase::NotDefined => 0,
            Phase::TrunkPlusLoops => 1,
            Phase::LightCone => 2,
            Phase::BoundaryTracing => 3,
            Phase::BoundaryHitting => 4,
            Phase::BoundaryAvoiding => 5,
        };
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (p, q) = (classify_phase(k, lo).unwrap(), classify_phase(k, hi).unwrap());
        prop_assert!(rank(p.phase) <= rank(q.phase));
        prop_assert!(p.bessel_dim <= q.bessel_dim);
    }
}

#[test]
fn bessel_dimension_at_row_edges() {
    for i in 1..50 {
        let k = 4.0 * i as f64 / 50.0;
        let edges = [(-2.0 - k / 2.0, 0.0), (k / 2.0 - 4.0, 2.0 - 4.0 / k), (-2.0, 1.0), (k / 2.0 - 2.0, 2.0)];
        for (rho, delta) in edges {
            let rec = classify_phase(k, rho).unwrap();
            assert!((rec.bessel_dim - delta).abs() < 1e-12, "kappa {k} rho {rho}: {} vs {delta}", rec.bessel_dim);
        }
    }
}

#[test]
fn degenerate_kappa_is_rejected() {
    for k in [0.0, 4.0, -1.0, f64::NAN] {
        assert!(lightcone_dimension(k, 0.0).is_err());
        assert!(classify_phase(k, -1.0).is_err());
        assert!(ig_constants(k).is_err());
    }
}
