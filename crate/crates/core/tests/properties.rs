use orbit_sff::classical::SystemSpec;
use orbit_sff::ergodic::{advance, Moments};
use orbit_sff::orbits::{family_iterator, OrbitFamily, ShiftVector};
use orbit_sff::potts::{closed_form_value, perp_distance, sff_transfer_value, PottsParams};
use orbit_sff::semiclassics::{
    class_representative, phase_difference, quotient_projection, VarianceTable,
};
use orbit_sff::torus::{CatMapSpec, LatticePoint};
use proptest::prelude::*;

fn family(spec: &SystemSpec, period: u32, pick: usize) -> OrbitFamily {
    let all: Vec<_> = family_iterator(spec, period).unwrap().collect();
    all[pick % all.len()].clone()
}

fn shift(l: usize, period: u32) -> impl Strategy<Value = ShiftVector> {
    prop::collection::vec(0i64..64, l).prop_map(move |v| ShiftVector::new(&v, period))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_antisymmetric(period in 2u32..5, pick in 0usize..1000, r in shift(2, 1), s in shift(2, 1)) {
        let spec = SystemSpec::ring(2, 0.0);
        let f = family(&spec, period, pick);
        let r = ShiftVector::new(&r.as_i64(), period);
        let s = ShiftVector::new(&s.as_i64(), period);
        let a = phase_difference(&f, &r, &s, &spec);
        let b = phase_difference(&f, &s, &r, &spec);
        prop_assert!((a + b).abs() < 1e-12);
        prop_assert!(phase_difference(&f, &r, &r, &spec).abs() < 1e-12);
    }

    #[test]
    fn phase_synchronous_invariance(
        period in 2u32..5,
        pick in 0usize..1000,
        r in prop::collection::vec(0i64..8, 3),
        s in prop::collection::vec(0i64..8, 3),
        t in 0i64..8,
    ) {
        let spec = SystemSpec::ring(3, 0.0);
        let f = family(&spec, period, pick);
        let (r, s) = (ShiftVector::new(&r, period), ShiftVector::new(&s, period));
        let d = ShiftVector::diagonal(3, t, period);
        let base = phase_difference(&f, &r, &s, &spec);
        let moved = phase_difference(&f, &r.add(&d), &s.add(&d), &spec);
        prop_assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
    }

    #[test]
    fn shift_group_laws(period in 1u32..20, a in prop::collection::vec(-50i64..50, 4),
                        b in prop::collection::vec(-50i64..50, 4), c in prop::collection::vec(-50i64..50, 4)) {
        let (a, b, c) = (ShiftVector::new(&a, period), ShiftVector::new(&b, period), ShiftVector::new(&c, period));
        let zero = ShiftVector::zero(4, period);
        prop_assert_eq!(a.add(&a.neg()), zero.clone());
        prop_assert_eq!(a.add(&zero), a.clone());
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
    }

    #[test]
    fn quotient_is_homomorphism(period in 1u32..20, a in prop::collection::vec(0i64..40, 3),
                                b in prop::collection::vec(0i64..40, 3), t in -40i64..40) {
        let (a, b) = (ShiftVector::new(&a, period), ShiftVector::new(&b, period));
        let pa = quotient_projection(&a);
        let pb = quotient_projection(&b);
        let sum: Vec<u32> = pa.iter().zip(&pb).map(|(x, y)| (x + y) % period).collect();
        prop_assert_eq!(quotient_projection(&a.add(&b)), sum);
        let d = ShiftVector::diagonal(3, t, period);
        prop_assert_eq!(quotient_projection(&a.add(&d)), pa.clone());
        prop_assert_eq!(quotient_projection(&class_representative(&pa, period)), pa);
    }

    #[test]
    fn moments_merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut % xs.len();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut left, mut right) = (Moments::default(), Moments::default());
        xs[..cut].iter().for_each(|&x| left.push(x));
        xs[cut..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        prop_assert_eq!(left.count, all.count);
        prop_assert!((left.mean - all.mean).abs() <= 1e-9 * (1.0 + all.mean.abs()));
        prop_assert!((left.variance() - all.variance()).abs() <= 1e-9 * (1.0 + all.variance()));
    }

    #[test]
    fn closed_form_matches_transfer(l in 1u32..6, period in 2u32..40, chi in 0.001f64..0.999, t_h in 0.5f64..50.0) {
        let p = PottsParams::from_chi(l, t_h, chi).unwrap();
        let tr = sff_transfer_value(&VarianceTable::potts(period, p.sigma2_phi), &p).unwrap();
        let cf = closed_form_value(&p, period as f64);
        prop_assert!((tr - cf).abs() <= 1e-10 * cf.abs().max(1.0), "{tr} vs {cf}");
        prop_assert!(cf >= 0.0);
    }

    #[test]
    fn prediction_nonnegative(l in 1u32..8, t in 1.0f64..1e4, chi in 0.0f64..=1.0) {
        let p = PottsParams::from_chi(l, 1.0, chi).unwrap();
        prop_assert!(closed_form_value(&p, t) >= 0.0);
    }

    #[test]
    fn perp_distance_matches_brute_force(period in 1u32..30, class in prop::collection::vec(0u32..30, 1..4)) {
        let class: Vec<u32> = class.iter().map(|c| c % period).collect();
        let cyc = |x: u32| x.min(period - x);
        let brute = (0..period)
            .map(|shift| std::iter::once(0).chain(class.iter().copied())
                .map(|s| cyc((s + period - shift) % period)).sum::<u32>())
            .min()
            .unwrap();
        prop_assert_eq!(perp_distance(&class, period), brute);
    }

    #[test]
    fn lattice_dynamics_invertible(q in any::<u64>(), p in any::<u64>(), t in -200i64..200) {
        let m = CatMapSpec::ARNOLD;
        let x = LatticePoint { q, p };
        prop_assert_eq!(advance(advance(x, &m, t), &m, -t), x);
    }
}
