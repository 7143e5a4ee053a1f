use igsim::gff::{laplacian_residual, sample_gff, BoundarySpec, GffField, GffSampler, GridSpec};
use igsim::stats::{ks_two_sample, Moments};
use proptest::prelude::*;

fn grid(n: usize) -> GridSpec {
    GridSpec::new(n, n, -1.0, 0.0, 2.0 / n as f64).unwrap()
}

fn on_boundary(g: &GridSpec, i: usize, j: usize) -> bool {
    i == 0 || j == 0 || i == g.nx || j == g.ny
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zero_boundary_samples_vanish_on_the_boundary(seed in any::<u64>(), n in 8usize..40, scale in 0.1f64..10.0) {
        let g = grid(n);
        let v = GffSampler::new(g).sample_zero_boundary(scale, &mut igsim::rng::rng(seed));
        for j in 0..=g.ny {
            for i in 0..=g.nx {
                if on_boundary(&g, i, j) {
                    prop_assert_eq!(v[g.idx(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn interpolant_reproduces_affine_functions(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, x in -1.0f64..1.0, y in 0.0f64..2.0) {
        let g = grid(17);
        let mut values = vec![0.0; g.n_nodes()];
        for j in 0..=g.ny {
            for i in 0..=g.nx {
                let (px, py) = g.node(i, j);
                values[g.idx(i, j)] = a + b * px + c * py;
            }
        }
        let f = GffField {
            grid: g,
            boundary: BoundarySpec::constant(&g, 0.0),
            fluctuation_scale: 0.0,
            seed: 0,
            harmonic_part: values.clone(),
            values,
        };
        let v = f.evaluate_closed(x, y);
        prop_assert!((v - (a + b * x + c * y)).abs() < 1e-12);
    }

    #[test]
    fn harmonic_part_is_discrete_harmonic(seed in any::<u64>(), lo in -3.0f64..3.0, hi in -3.0f64..3.0) {
        let g = grid(24);
        let mut spec = BoundarySpec::constant(&g, lo);
        spec.segments[0].value = hi;
        let f = sample_gff(g, &spec, 1.0, seed).unwrap();
        prop_assert!(laplacian_residual(&g, &f.harmonic_part) < 1e-10);
    }
}

#[test]
fn reflection_symmetric_data_give_a_reflection_invariant_law() {
    let g = grid(16);
    let spec = BoundarySpec::constant(&g, 0.5);
    let (i, j) = (3, 9);
    let mirror = g.nx - i;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for seed in 0..800u64 {
        let f = sample_gff(g, &spec, 1.0, seed).unwrap();
        if seed % 2 == 0 {
            left.push(f.values[g.idx(i, j)]);
        } else {
            right.push(f.values[g.idx(mirror, j)]);
        }
    }
    let (_, p) = ks_two_sample(&left, &right);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn fluctuation_variance_scales_linearly() {
    let g = grid(16);
    let node = g.idx(8, 8);
    let var = |scale: f64| {
        let mut s = GffSampler::new(g);
        let mut r = igsim::rng::rng(9);
        let xs: Vec<f64> = (0..3000).map(|_| s.sample_zero_boundary(scale, &mut r)[node]).collect();
        Moments::from_slice(&xs).variance()
    };
    let ratio = var(4.0) / var(1.0);
    // Same stream at both scales, so the ratio is exact up to rounding.
    assert!((ratio - 4.0).abs() < 1e-9, "ratio {ratio}");
}
