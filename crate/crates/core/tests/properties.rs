use proptest::prelude::*;
use wowflow_core::matching::w2_exact;
use wowflow_core::oracles::{brute_force_w2, brute_force_w2_1d};
use wowflow_core::reweighting::mirror_sinkhorn_step;
use wowflow_core::sliced::{sw2_squared, w2_squared_1d};
use wowflow_core::{
    displace, kernel_eval, mmd_half, sample_projections, wow_distance, Displacement, KernelSpec, MetaMeasure, PointCloud,
};

fn coords(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

fn cloud(n: usize, d: usize) -> impl Strategy<Value = PointCloud> {
    coords(n * d).prop_map(move |pts| PointCloud::uniform(pts, d).unwrap())
}

fn cloud_pair() -> impl Strategy<Value = (PointCloud, PointCloud)> {
    (1usize..6, 1usize..4).prop_flat_map(|(n, d)| (cloud(n, d), cloud(n, d)))
}

fn mixture_pair() -> impl Strategy<Value = (MetaMeasure, MetaMeasure)> {
    (1usize..4, 1usize..4, 1usize..3).prop_flat_map(|(c, n, d)| {
        let side = move || prop::collection::vec(cloud(n, d), c).prop_map(|cs| MetaMeasure::uniform(cs).unwrap());
        (side(), side())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w2_1d_matches_permutation_search(pairs in (1usize..7).prop_flat_map(|n| (coords(n), coords(n)))) {
        let (a, b) = pairs;
        let fast = w2_squared_1d(&a, &b).unwrap();
        let slow = brute_force_w2_1d(&a, &b).unwrap();
        prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn exact_w2_matches_permutation_search((mu, nu) in cloud_pair()) {
        let fast = w2_exact(&mu, &nu).unwrap();
        let slow = brute_force_w2(&mu, &nu).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow), "{fast} vs {slow}");
    }

    #[test]
    fn sliced_is_symmetric_and_below_exact((mu, nu) in cloud_pair(), seed in 0u64..1000) {
        let proj = sample_projections(16, mu.dim(), seed).unwrap();
        let ab = sw2_squared(&mu, &nu, &proj).unwrap();
        let ba = sw2_squared(&nu, &mu, &proj).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        let exact = w2_exact(&mu, &nu).unwrap();
        prop_assert!(ab <= exact + 1e-10 * (1.0 + exact), "SW² {ab} > W₂² {exact}");
    }

    #[test]
    fn sliced_is_translation_invariant((mu, nu) in cloud_pair(), shift in -5.0f64..5.0, seed in 0u64..1000) {
        let d = mu.dim();
        let proj = sample_projections(8, d, seed).unwrap();
        let moved = |c: &PointCloud| {
            let pts = c.points().iter().enumerate().map(|(i, x)| x + shift * (1 + i % d) as f64).collect();
            c.with_points(pts).unwrap()
        };
        let before = sw2_squared(&mu, &nu, &proj).unwrap();
        let after = sw2_squared(&moved(&mu), &moved(&nu), &proj).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before));
    }

    #[test]
    fn kernels_are_symmetric((mu, nu) in cloud_pair(), seed in 0u64..100) {
        let proj = sample_projections(8, mu.dim(), seed).unwrap();
        for spec in [
            KernelSpec::riesz(1.0).unwrap(),
            KernelSpec::gaussian(0.5).unwrap(),
            KernelSpec::laplace(0.5).unwrap(),
            KernelSpec::imq(1.0).unwrap(),
        ] {
            let ab = kernel_eval(&spec, &mu, &nu, &proj).unwrap();
            let ba = kernel_eval(&spec, &nu, &mu, &proj).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        }
    }

    #[test]
    fn objective_is_nonnegative_and_zero_on_diagonal((p, q) in mixture_pair(), seed in 0u64..100) {
        let proj = sample_projections(8, p.dim(), seed).unwrap();
        for spec in [KernelSpec::gaussian(0.5).unwrap(), KernelSpec::imq(1.0).unwrap()] {
            let v = mmd_half(&p, &q, &spec, &proj).unwrap().mmd_squared_half;
            prop_assert!(v >= -1e-12);
            let z = mmd_half(&q, &q, &spec, &proj).unwrap().mmd_squared_half;
            prop_assert!(z.abs() <= 1e-12);
        }
    }

    #[test]
    fn wow_distance_is_a_metric((p, q) in mixture_pair(), r_seed in 0u64..1000) {
        let (d_pq, _) = wow_distance(&p, &q).unwrap();
        let (d_qp, _) = wow_distance(&q, &p).unwrap();
        prop_assert!((d_pq - d_qp).abs() <= 1e-10 * (1.0 + d_pq));
        prop_assert!(wow_distance(&p, &p).unwrap().0.abs() <= 1e-12);
        // Third mixture of the same shape for the triangle inequality.
        let shift = (r_seed % 7) as f64 * 0.3 - 1.0;
        let r = MetaMeasure::uniform(
            p.clouds().iter().map(|c| c.with_points(c.points().iter().map(|x| x * 0.5 + shift).collect()).unwrap()).collect(),
        ).unwrap();
        let (d_pr, _) = wow_distance(&p, &r).unwrap();
        let (d_rq, _) = wow_distance(&r, &q).unwrap();
        prop_assert!(d_pq.sqrt() <= d_pr.sqrt() + d_rq.sqrt() + 1e-9);
    }

    #[test]
    fn displacement_keeps_weights((p, _q) in mixture_pair(), scale in -2.0f64..2.0) {
        let fields = p.clouds().iter().map(|c| c.points().iter().map(|x| x.sin()).collect()).collect();
        let moved = displace(&p, &Displacement::new(fields), scale).unwrap();
        prop_assert_eq!(moved.mix_weights(), p.mix_weights());
        for (a, b) in moved.clouds().iter().zip(p.clouds()) {
            prop_assert_eq!(a.weights(), b.weights());
        }
    }

    #[test]
    fn mirror_step_keeps_row_marginals(
        c in 2usize..6,
        raw in prop::collection::vec(0.01f64..1.0, 36),
        grad in prop::collection::vec(-20.0f64..20.0, 36),
        eta in 0.01f64..3.0,
    ) {
        let alpha_raw = &raw[..c];
        let total: f64 = alpha_raw.iter().sum();
        let alpha: Vec<f64> = alpha_raw.iter().map(|a| a / total).collect();
        let mut plan: Vec<f64> = (0..c * c).map(|e| alpha[e / c] / c as f64).collect();
        for _ in 0..5 {
            plan = mirror_sinkhorn_step(&plan, &alpha, &grad[..c * c], eta, 1e-30).unwrap();
            prop_assert!(plan.iter().all(|&x| x >= 0.0));
            for i in 0..c {
                let row: f64 = plan[i * c..(i + 1) * c].iter().sum();
                prop_assert!((row - alpha[i]).abs() <= 1e-12);
            }
            let cols: f64 = plan.iter().sum();
            prop_assert!((cols - 1.0).abs() <= 1e-12);
        }
    }
}
