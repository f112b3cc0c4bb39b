use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use obslab::evolution::{cocycle_residual, EllipticPropagator, Evolution};
use obslab::observability::{
    cobs_explicit, gaussian_packet, lebesgue_chain, ChainRequest, HypothesisConstants, TimeSet,
};
use obslab::ou::{
    form_matrix, gram_matrix, liouville_check, min_eigenvalue, ou_propagate, quad_form, solve_transition, MatrixTrack,
    OUSystem, ShearOptions,
};
use obslab::presets::{heat_symbol, quartic_symbol};
use obslab::report::{read_report, write_report, RatioRow, RunRecord};
use obslab::spectral::{forward_transform, inverse_transform, project_smooth, Field, GridSpec};
use obslab::thickness::{is_mean_thick, is_uniformly_thick, thickness_profile, ObservationSet, SetFamily};

fn ordered(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let mut v = [a, b, c];
    v.sort_by(f64::total_cmp);
    (v[0], v[1], v[2])
}

fn field_from(grid: GridSpec, vals: &[(f64, f64)]) -> Field {
    Field::from_fn(grid, |x| {
        let i = ((x[0] + grid.half_length()) / grid.spacing()).round() as usize % vals.len();
        Complex64::new(vals[i].0, vals[i].1)
    })
}

fn small_matrix(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, d * d).prop_map(move |v| DMatrix::from_row_slice(d, d, &v))
}

fn constant_system() -> impl Strategy<Value = OUSystem> {
    (1usize..=3)
        .prop_flat_map(|d| (small_matrix(d), small_matrix(d)))
        .prop_map(|(a, b)| OUSystem::new(MatrixTrack::constant(a), MatrixTrack::constant(b), 1.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip(vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 64)) {
        let grid = GridSpec::new(1, 5.0, 64).unwrap();
        let f = field_from(grid, &vals);
        let back = inverse_transform(&forward_transform(&f));
        let err = f.values().iter().zip(back.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-13);
    }

    #[test]
    fn projector_absorbs_larger_cutoff(
        vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 128),
        lambda in 0.3..5.0f64,
        factor in 2.0..6.0f64,
    ) {
        let grid = GridSpec::new(1, 8.0, 128).unwrap();
        let f = field_from(grid, &vals);
        let pl = project_smooth(&f, lambda).unwrap();
        let twice = project_smooth(&pl, factor * lambda).unwrap();
        let err = pl.values().iter().zip(twice.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12 * pl.norm(f64::INFINITY).max(1e-300));
    }

    #[test]
    fn elliptic_cocycle(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, quartic: bool) {
        let sym = if quartic { quartic_symbol() } else { heat_symbol() };
        let prop = EllipticPropagator::new(sym, GridSpec::new(1, 10.0, 256).unwrap()).unwrap();
        let (r, s, t) = ordered(a, b, c);
        prop_assert!(cocycle_residual(&prop, r, s, t).unwrap() < 1e-12);
        let f = gaussian_packet(*prop.grid(), &[0.0], 1.0, &[0.0]);
        prop_assert_eq!(prop.propagate(s, s, &f).unwrap(), f);
    }

    #[test]
    fn thickness_is_translation_invariant(
        mask in prop::collection::vec(any::<bool>(), 64),
        shift in -64i64..64,
        side in 0.5..4.0f64,
    ) {
        let grid = GridSpec::new(1, 8.0, 64).unwrap();
        let set = ObservationSet::from_mask(grid, mask).unwrap();
        let a = thickness_profile(&set, &[side]).unwrap();
        let b = thickness_profile(&set.translate(&[shift]), &[side]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn uniform_implies_mean(
        masks in prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.7), 32), 1..5),
        rho in 0.05..0.9f64,
    ) {
        let grid = GridSpec::new(1, 4.0, 32).unwrap();
        let sets = masks.into_iter().map(|m| ObservationSet::from_mask(grid, m).unwrap()).collect();
        let fam = SetFamily::new(1.0, sets).unwrap();
        let u = is_uniformly_thick(&fam, &[1.0], rho).unwrap();
        let m = is_mean_thick(&fam, &[1.0], rho).unwrap();
        prop_assert!(!u.holds || m.holds);
    }

    #[test]
    fn cobs_ratio_in_unit_interval(
        d1 in 0.05..3.0f64, d3 in 0.05..3.0f64, g2 in 1.2..5.0f64, theta in 0.05..0.95f64, t in 0.1..3.0f64,
    ) {
        let hc = HypothesisConstants {
            d0: 1.0, d1, gamma1: 1.0, d2: 1.0, d3, gamma2: g2, gamma3: 1.0,
            growth: 1.0, omega: 0.0, c_norm: 1.0, theta,
        };
        let c = cobs_explicit(&hc, t, 2.0).unwrap();
        prop_assert!(c.q > 0.0 && c.q < 1.0);
        let shorter = cobs_explicit(&hc, 0.5 * t, 2.0).unwrap();
        prop_assert!(shorter.ln_value > c.ln_value);
    }

    #[test]
    fn chain_properties(
        cuts in prop::collection::vec(0.0..1.0f64, 6),
        q in 0.2..0.8f64,
    ) {
        let mut c = cuts.clone();
        c.sort_by(f64::total_cmp);
        let pieces: Vec<(f64, f64)> = c.chunks(2).filter(|w| w[1] > w[0] + 1e-3).map(|w| (w[0], w[1])).collect();
        prop_assume!(!pieces.is_empty());
        let e = TimeSet::new(pieces).unwrap();
        if let Ok(ch) = lebesgue_chain(&e, &ChainRequest { q, ell: None, ell1: None, depth: 8 }) {
            let p = &ch.points;
            for w in p.windows(3) {
                prop_assert!(w[0] > w[1]);
                prop_assert!(((w[1] - w[2]) - q * (w[0] - w[1])).abs() <= 1e-12 * (w[0] - w[1]));
            }
            for w in p.windows(2) {
                prop_assert!(e.measure_in(w[1], w[0]) >= (w[0] - w[1]) / 3.0 * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn ou_identities(sys in constant_system(), a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64) {
        let (r, s, t) = ordered(a, b, c);
        let rts = solve_transition(&sys, s, t).unwrap();
        let rsr = solve_transition(&sys, r, s).unwrap();
        let rtr = solve_transition(&sys, r, t).unwrap();
        prop_assert!((&rts * &rsr - &rtr).amax() <= 1e-10 * rtr.amax());
        prop_assert!(liouville_check(&sys, r, t).unwrap() < 1e-9);
        let m = form_matrix(&sys, r, t).unwrap();
        let scale = m.amax().max(1e-300);
        prop_assert!(min_eigenvalue(&m) >= -1e-12 * scale);
        let g = gram_matrix(&sys, r, t).unwrap();
        prop_assert!((&rtr * g * rtr.transpose() - &m).amax() <= 1e-9 * scale.max(1e-12));
        let xi: Vec<f64> = (0..sys.dim()).map(|k| 1.0 - 0.5 * k as f64).collect();
        prop_assert!(quad_form(&sys, r, t, &xi).unwrap() >= -1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ou_evolution_law(a0 in 0.3..1.5f64, b0 in -0.3..0.3f64, x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64) {
        let sys = OUSystem::new(
            MatrixTrack::constant(DMatrix::from_element(1, 1, a0)),
            MatrixTrack::constant(DMatrix::from_element(1, 1, b0)),
            1.0,
        ).unwrap();
        let grid = GridSpec::new(1, 16.0, 128).unwrap();
        let f = gaussian_packet(grid, &[0.5], 1.5, &[0.0]);
        let (r, s, t) = ordered(x, y, z);
        let opts = ShearOptions::default();
        let two = ou_propagate(&sys, s, t, &ou_propagate(&sys, r, s, &f, opts).unwrap(), opts).unwrap();
        let one = ou_propagate(&sys, r, t, &f, opts).unwrap();
        prop_assert!(two.sub(&one).unwrap().norm(2.0) <= 1e-8 * one.norm(2.0));
    }

    #[test]
    fn record_round_trip(
        rows in prop::collection::vec((0usize..1000, any::<f64>(), any::<f64>(), any::<bool>()), 0..20),
        seed: u64,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = RunRecord::new("prop", b"cfg", seed);
        rec.ratios = rows
            .iter()
            .map(|&(id, r, b, pass)| RatioRow { candidate_id: id, n_or_lambda: 1.0, ratio: r, bound: b, pass })
            .collect();
        rec.finish();
        let path = dir.path().join("r.json");
        write_report(&rec, &path).unwrap();
        let back = read_report(&path).unwrap();
        for (x, y) in rec.ratios.iter().zip(&back.ratios) {
            prop_assert!(x.ratio.to_bits() == y.ratio.to_bits() || (x.ratio.is_nan() && y.ratio.is_nan()));
            prop_assert!(x.bound.to_bits() == y.bound.to_bits() || (x.bound.is_nan() && y.bound.is_nan()));
        }
        prop_assert_eq!(back.config_hash, rec.config_hash);
    }
}
