mod common;

use common::{gaussian, gaussian_vec, instance, rng, sizes};
use nalgebra::DMatrix;
use optrec_core::{optimal_recover, ridge_recover, ridgeless_recover, ModelSet, ObservationSetup};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovery_is_linear(seed in any::<u64>(), alpha in -5.0f64..5.0, beta in -5.0f64..5.0) {
        let (big_n, m, n) = sizes(seed, 30);
        let inst = instance(seed, big_n, m, n, 1.0, 0.5);
        let y2 = gaussian_vec(&mut rng(seed.wrapping_add(1)), m);
        let r1 = optimal_recover(&inst.obs, &inst.model, &inst.y).unwrap();
        let r2 = optimal_recover(&inst.obs, &inst.model, &y2).unwrap();
        let r = optimal_recover(&inst.obs, &inst.model, &(&inst.y * alpha + &y2 * beta)).unwrap();
        let ea = &r1.a * alpha + &r2.a * beta;
        let eb = &r1.b * alpha + &r2.b * beta;
        // errors are measured against the size of the whole coefficient vector
        let scale = 1.0 + ea.amax().max(if eb.is_empty() { 0.0 } else { eb.amax() });
        prop_assert!((&r.a - &ea).amax() <= 1e-9 * scale);
        prop_assert!(r.b.is_empty() || (&r.b - &eb).amax() <= 1e-9 * scale);
    }

    #[test]
    fn recovery_ignores_epsilon(seed in any::<u64>(), eps in 1e-6f64..1e6) {
        let (big_n, m, n) = sizes(seed, 30);
        let inst = instance(seed, big_n, m, n, 1.0, 0.5);
        let a = optimal_recover(&inst.obs, &inst.model, &inst.y).unwrap();
        let b = optimal_recover(&inst.obs, &inst.model.with_epsilon(eps).unwrap(), &inst.y).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn recovery_certificates_hold(seed in any::<u64>()) {
        let (big_n, m, n) = sizes(seed, 30);
        let inst = instance(seed, big_n, m, n, 1.0, 0.5);
        let (obs, model, y) = (&inst.obs, &inst.model, &inst.y);
        let r = optimal_recover(obs, model, y).unwrap();
        let g = obs.gramian();
        let c = obs.cross_gramian(model).unwrap();
        let consistency = (&g * &r.a + &c * &r.b - y).norm() / y.norm().max(1e-300);
        prop_assert!(consistency < 1e-9, "{consistency}");
        let ct_a = c.tr_mul(&r.a).amax();
        prop_assert!(ct_a <= 1e-9 * (r.a.norm() * c.norm()).max(1.0), "{ct_a}");
        let f = r.assemble(obs, model);
        let kt = obs.kernel_basis().tr_mul(&model.residual(&f)).amax();
        prop_assert!(kt < 1e-9 * f.norm().max(1.0), "{kt}");
    }

    #[test]
    fn representer_subspaces_reproduce_ridgeless(seed in any::<u64>(), mask in any::<u16>()) {
        let (big_n, m, _) = sizes(seed, 30);
        let mut r = rng(seed);
        let u = gaussian(&mut r, m, big_n);
        let subset: Vec<usize> = (0..m).filter(|i| mask & (1 << (i % 16)) != 0).collect();
        let obs = ObservationSetup::new(u.clone()).unwrap();
        let basis = DMatrix::from_fn(big_n, subset.len(), |i, j| u[(subset[j], i)]);
        let model = ModelSet::new(basis, 1.0).unwrap();
        let y = gaussian_vec(&mut r, m);
        let f_or = optimal_recover(&obs, &model, &y).unwrap().assemble(&obs, &model);
        let f_rl = ridgeless_recover(&obs, &y).unwrap().assemble_representers(&obs);
        prop_assert!((f_or - f_rl).amax() < 1e-8);
    }

    #[test]
    fn ridge_converges_linearly_to_ridgeless(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = 4;
        let obs = ObservationSetup::new(gaussian(&mut r, m, 8)).unwrap();
        let y = gaussian_vec(&mut r, m);
        let base = ridgeless_recover(&obs, &y).unwrap().a;
        let gap = |gamma: f64| (ridge_recover(&obs, &y, gamma).unwrap().a - &base).norm();
        let ratio = gap(1e-4) / gap(5e-5);
        prop_assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
    }
}
