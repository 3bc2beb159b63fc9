use nakano_lab::cli::{fieldfile, report_convergence};
use nakano_lab::exterior::{c_const, hodge_star, norm_sq, norm_sq_by_pairing, wedge_const, Bidegree, ConstForm};
use nakano_lab::grid::{integrate, GridSpec};
use nakano_lab::hermitian::curvature;
use nakano_lab::hormander::DbarOperator;
use nakano_lab::positivity::{griffiths_delta, nakano_delta, PositivityOptions};
use nakano_lab::weights::{gaussian_metric, Profile};
use nakano_lab::{random, singular, Complex64 as C};
use proptest::prelude::*;

fn grid(n: usize) -> GridSpec {
    GridSpec::new(n, 8, 3.0).unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn hodge_star_inverts_and_preserves_norm(seed in any::<u64>(), n in 1usize..=2, rank in 1usize..=2, p_off in 0usize..2) {
        let p = 1 + p_off.min(n - 1);
        let g = grid(n);
        let mut rng = random::rng(seed);
        let h = random::metric(&mut rng, g, rank).unwrap();
        let alpha = random::form(&mut rng, g, Bidegree::new(n, p), rank).unwrap();
        let gamma = hodge_star(&alpha).unwrap();
        let back = wedge_const(&gamma, &ConstForm::omega_power(n, p)).unwrap();
        prop_assert!(back.sub(&alpha).unwrap().max_abs() <= 1e-12 * alpha.max_abs());
        let a = norm_sq(&alpha, &h).unwrap();
        let b = norm_sq_by_pairing(&gamma, &h).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-12 * a.max_abs());
    }

    #[test]
    fn unimodular_constants(p in 0usize..64) {
        let c = c_const(p);
        prop_assert!((c.norm() - 1.0).abs() == 0.0);
        prop_assert_eq!(c_const(p + 4), c);
        // c_{p+1} = i (-1)^p c_p.
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert_eq!(c_const(p + 1), C::new(0.0, 1.0) * sign * c);
    }

    #[test]
    fn nakano_never_exceeds_griffiths(seed in any::<u64>(), n in 1usize..=2, rank in 1usize..=3) {
        let g = GridSpec::new(n, 4, 1.0).unwrap();
        let mut rng = random::rng(seed);
        let h = random::metric(&mut rng, g, rank).unwrap();
        let theta = random::curvature(&mut rng, &h).unwrap();
        let opts = PositivityOptions::default();
        let dn = nakano_delta(&h, &theta, &opts).unwrap();
        let dg = griffiths_delta(&h, &theta, &opts).unwrap();
        prop_assert!(dn <= dg + 1e-12 * dg.abs().max(1.0));
        if n == 1 || rank == 1 {
            prop_assert!((dn - dg).abs() <= 1e-10 * dg.abs().max(1.0));
        }
    }

    #[test]
    fn constant_rescaling_keeps_curvature(c in 0.1f64..10.0, strength in 0.5f64..2.0) {
        let g = GridSpec::new(1, 16, 6.0).unwrap();
        let h = gaussian_metric(&g, &Profile::standard(6.0), strength, 1).unwrap();
        let opts = PositivityOptions::on_region(g.interior_mask(0.5));
        let a = nakano_delta(&h, &curvature(&h).unwrap(), &opts).unwrap();
        let hc = h.scale(c).unwrap();
        let b = nakano_delta(&hc, &curvature(&hc).unwrap(), &opts).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn discrete_adjoint_is_exact(seed in any::<u64>(), n in 1usize..=2, rank in 1usize..=2, p_off in 0usize..2) {
        let p = 1 + p_off.min(n - 1);
        let g = grid(n);
        let mut rng = random::rng(seed);
        let h = random::metric(&mut rng, g, rank).unwrap();
        let op = DbarOperator::new(&h, p).unwrap();
        let (dom, cod) = (op.domain(), op.codomain());
        let u = random::form(&mut rng, g, dom.bidegree(), rank).unwrap();
        let v = random::form(&mut rng, g, cod.bidegree(), rank).unwrap();
        let lhs = cod.inner(&op.apply_t(&u).unwrap(), &v).unwrap();
        let rhs = dom.inner(&u, &op.apply_tstar(&v).unwrap()).unwrap();
        let scale = (dom.norm_sq(&u).unwrap() * cod.norm_sq(&v).unwrap()).sqrt();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
    }

    #[test]
    fn field_file_round_trip(seed in any::<u64>(), n in 1usize..=2, rank in 1usize..=3, p in 0usize..=2, q in 0usize..=2) {
        let (p, q) = (p.min(n), q.min(n));
        let g = GridSpec::new(n, 4, 2.5).unwrap();
        let mut rng = random::rng(seed);
        let f = random::form(&mut rng, g, Bidegree::new(p, q), rank).unwrap();
        let mut buf = Vec::new();
        fieldfile::write_form(&mut buf, &f).unwrap();
        prop_assert_eq!(fieldfile::read_form(buf.as_slice()).unwrap(), f);
        let h = random::metric(&mut rng, g, rank).unwrap();
        let mut buf = Vec::new();
        fieldfile::write_metric(&mut buf, &h).unwrap();
        let back = fieldfile::read_metric(buf.as_slice()).unwrap();
        prop_assert_eq!(back.data(), h.data());
    }

    #[test]
    fn power_law_slope_is_recovered(a in 1e-3f64..1e3, s in -8.0f64..-0.5) {
        let data: Vec<(usize, f64)> = [8usize, 16, 32, 64].iter().map(|&n| (n, a * (n as f64).powf(s))).collect();
        prop_assume!(data.iter().all(|&(_, r)| r >= 1e-13));
        let e = report_convergence(&data).unwrap();
        prop_assert!((e.slope.unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn mollifier_has_unit_mass(eps in 0.4f64..1.5, n in 1usize..=2) {
        let g = GridSpec::new(n, 32, 6.0).unwrap();
        let k = singular::kernel(&g, eps).unwrap();
        let mass = integrate(&k);
        prop_assert!((mass - C::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(k.values().iter().all(|v| v.re >= 0.0 && v.im == 0.0));
    }
}
