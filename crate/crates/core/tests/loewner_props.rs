use igsim::driver::sample_sle;
use igsim::loewner::{distance_to_polyline, LoewnerChain, LoewnerStep};
use igsim::Complex64 as C;
use proptest::prelude::*;
use rand::Rng as _;

fn brownian_chain(kappa: f64, n: usize, dt: f64, seed: u64) -> LoewnerChain {
    sample_sle(kappa, n, dt, seed).unwrap().chain().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn capacity_is_additive(seed in any::<u64>(), k in 1usize..199, x in -1.0f64..1.0, y in 0.3f64..2.0) {
        let chain = brownian_chain(2.0, 200, 1e-3, seed);
        let z = C::new(x, y);
        let s = chain.times()[k];
        let t = chain.total_capacity();
        let direct = chain.forward_map(z, t);
        let first = chain.forward_map(z, s);
        let rest = chain.slice(k, chain.len()).unwrap();
        match (direct, first) {
            (Ok(g), Ok(h)) => {
                let composed = rest.forward_map(h, t - s).unwrap();
                prop_assert!((composed - g).norm() < 1e-8, "{composed} vs {g}");
            }
            (Err(_), _) => {}
            (Ok(_), Err(e)) => prop_assert!(false, "swallowed at s but not at t: {e}"),
        }
    }

    #[test]
    fn brownian_scaling_is_exact(seed in any::<u64>(), lam in 0.2f64..5.0, x in -1.0f64..1.0, y in 0.3f64..2.0) {
        let chain = brownian_chain(3.0, 150, 1e-3, seed);
        let scaled = chain.scaled(lam).unwrap();
        let t = chain.total_capacity();
        let z = C::new(x, y);
        if let Ok((g, d)) = chain.map_with_derivative(z, t) {
            let (gs, ds) = scaled.map_with_derivative(z * lam, t * lam * lam).unwrap();
            prop_assert!((gs - g * lam).norm() < 1e-9 * lam.max(1.0));
            prop_assert!((ds - d).abs() < 1e-9 * d.max(1.0));
        }
        let a = chain.trace().unwrap();
        let b = scaled.trace().unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            prop_assert!((q.z() - p.z() * lam).norm() < 1e-9 * lam.max(1.0));
        }
    }

    #[test]
    fn tip_maps_to_driving(seed in any::<u64>(), k in 0usize..300) {
        let chain = brownian_chain(2.5, 300, 1e-4, seed);
        let tip = chain.tip(k).unwrap();
        let t = chain.times()[k + 1];
        // A tip sits on the hull boundary; probe just above it.
        let g = chain.forward_map(tip + C::new(0.0, 1e-12), t).unwrap();
        prop_assert!((g - C::new(chain.drive(k), 0.0)).norm() < 1e-4, "{g} vs {}", chain.drive(k));
    }
}

/// Koebe distortion and the ball-size bound for `g_t` on `H ∖ K_t`, with the
/// hull boundary approximated by the refined trace and ℝ.
#[test]
fn koebe_bounds_on_random_probes() {
    let mut rng = igsim::rng::rng(2024);
    let mut checked = 0;
    let mut chain_seed = 0u64;
    while checked < 1000 {
        chain_seed += 1;
        let kappa = rng.random_range(0.5..4.0);
        let chain = brownian_chain(kappa, 400, 2.5e-4, chain_seed);
        let line = chain.trace_refined(8).unwrap();
        let t = chain.total_capacity();
        for _ in 0..25 {
            let z = C::new(rng.random_range(-0.6..0.6), rng.random_range(0.01..0.8));
            let d = distance_to_polyline(&line, z).min(z.im);
            if d < 0.01 {
                continue;
            }
            let Ok((gz, dz)) = chain.map_with_derivative(z, t) else { continue };
            let d_img = gz.im;
            assert!(dz >= d_img / (4.0 * d) && dz <= 4.0 * d_img / d, "Koebe violated at {z}: |g'| {dz}, d {d}, d' {d_img}");
            let r: f64 = rng.random_range(0.05..0.9);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let w = z + C::from_polar(r * d * rng.random_range(0.0..1.0f64), phi);
            let gw = chain.forward_map(w, t).unwrap();
            let bound = 4.0 * (w - z).norm() / (1.0 - r * r) * d_img / d;
            assert!((gw - gz).norm() <= bound, "ball bound violated at {z}, {w}");
            checked += 1;
        }
    }
}

#[test]
fn zero_driving_matches_closed_form_over_time() {
    let n = 10_000;
    let chain = LoewnerChain::new(0.0, vec![LoewnerStep { dw: 0.0, dt: 1e-4 }; n]).unwrap();
    let line = chain.trace().unwrap();
    let worst = line.points.iter().map(|p| (p.x.abs()).max((p.y - 2.0 * p.t.sqrt()).abs())).fold(0.0, f64::max);
    assert!(worst < 1e-6, "max error {worst}");
}
