mod support;

use proptest::prelude::*;
use support::*;

use freefall::stats::median;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn height_is_invariant_to_pixel_scale((fixture, s) in pixel_scale_strategy()) {
        check_pixel_scale(fixture, s)?;
    }

    #[test]
    fn curvature_is_invariant_to_time_shift((c, n, fps, shift, seed) in time_shift_strategy()) {
        check_time_shift(c, n, fps, shift, seed)?;
    }

    #[test]
    fn com_commutes_with_linear_projection((points, weights, m, affine) in com_projection_strategy()) {
        check_com_projection(&points, &weights, m, affine)?;
    }

    #[test]
    fn mass_tables_normalize(weights in weights_strategy()) {
        check_mass_normalization(&weights)?;
    }

    #[test]
    fn mae_bounds_signed_error(pairs in error_pairs_strategy()) {
        check_mae_bounds_me(&pairs)?;
    }

    #[test]
    fn median_ignores_order(mut v in prop::collection::vec(-1e3f64..1e3, 1..30), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let m = median(&v);
        v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(m, median(&v));
    }
}
