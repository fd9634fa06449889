use proptest::prelude::*;
use rand::Rng;
use spectr_core::circle::integrate_scalar;
use spectr_core::divergence::{aligned_factor_distance, factor_distance, hellinger_multivar, kl_divergence};
use spectr_core::gamma::{complement_direction, gamma_adjoint};
use spectr_core::linalg::{c, spectral_norm, trace_of_product};
use spectr_core::random::{
    random_filter, random_hermitian, random_instance, random_spectrum, random_unitary, seeded,
};
use spectr_core::{
    feasibility, gamma_apply, nearest_feasible, solve, CMat, HermitianMatrix, Metric, RangeGammaBasis, SolveOptions,
    SpectralDensity, SpectralFactor, SpectrumRole,
};

const K: usize = 128;

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=4).prop_flat_map(|n| (Just(n), 1usize..=n.min(2)))
}

fn spectrum(seed: u64, m: usize, role: SpectrumRole) -> SpectralDensity {
    random_spectrum(&mut seeded(seed), m, K, 0.05, role).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lyapunov_solution_satisfies_its_equation(seed: u64, (n, m) in shape()) {
        let filter = random_filter(&mut seeded(seed), n, m, 0.9);
        let s = filter.lyapunov_sigma();
        let (a, b) = (filter.a(), filter.b());
        let residual = s.as_matrix() - a * s.as_matrix() * a.adjoint() - b * b.adjoint();
        prop_assert!(residual.norm() <= 1e-12 * (1.0 + s.frobenius()));
    }

    #[test]
    fn transfer_matches_dense_resolvent(seed: u64, (n, m) in shape()) {
        let filter = random_filter(&mut seeded(seed), n, m, 0.9);
        let grid = filter.eval_transfer(64).unwrap();
        for (theta, g) in grid.thetas().iter().zip(grid.transfer()) {
            let z = c(theta.cos(), theta.sin());
            let resolvent = (CMat::identity(n, n) * z - filter.a()).try_inverse().unwrap();
            let expected = resolvent * filter.b();
            prop_assert!((g - &expected).norm() <= 1e-12 * expected.norm());
        }
        if m == 1 {
            prop_assert!(grid.transfer().iter().all(|g| g.norm() > 0.0));
        }
    }

    #[test]
    fn quadrature_of_identity_is_lyapunov(seed: u64, (n, m) in shape()) {
        let filter = random_filter(&mut seeded(seed), n, m, 0.85);
        let grid = filter.eval_transfer(512).unwrap();
        let quad = gamma_apply(&grid, &SpectralDensity::identity(m, 512, SpectrumRole::Prior).unwrap()).unwrap();
        let lyap = filter.lyapunov_sigma();
        prop_assert!((&quad - &lyap).frobenius() <= 1e-8 * lyap.frobenius());
    }

    #[test]
    fn gamma_adjoint_identity(seed: u64, (n, m) in shape()) {
        let mut rng = seeded(seed);
        let filter = random_filter(&mut rng, n, m, 0.85);
        let grid = filter.eval_transfer(K).unwrap();
        let phi = random_spectrum(&mut rng, m, K, 0.05, SpectrumRole::Prior).unwrap();
        let lambda = random_hermitian(&mut rng, n);
        let lhs = gamma_apply(&grid, &phi).unwrap().inner(&lambda);
        let rhs: f64 = phi
            .samples()
            .iter()
            .zip(gamma_adjoint(&grid, &lambda))
            .map(|(p, q)| trace_of_product(p, &q).re)
            .sum::<f64>()
            / K as f64;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn gamma_maps_positive_spectra_to_positive_matrices(seed: u64, (n, m) in shape()) {
        let mut rng = seeded(seed);
        let filter = random_filter(&mut rng, n, m, 0.85);
        let grid = filter.eval_transfer(K).unwrap();
        let phi = random_spectrum(&mut rng, m, K, 0.05, SpectrumRole::Prior).unwrap();
        let sigma = gamma_apply(&grid, &phi).unwrap();
        prop_assert!(sigma.min_eigenvalue() > 0.0);
        let basis = RangeGammaBasis::compute(&grid);
        prop_assert!(feasibility(&filter, &sigma, &basis).unwrap().feasible);
    }

    #[test]
    fn range_projection_is_an_orthogonal_projector(seed: u64, (n, m) in shape()) {
        let mut rng = seeded(seed);
        let grid = random_filter(&mut rng, n, m, 0.85).eval_transfer(K).unwrap();
        let basis = RangeGammaBasis::compute(&grid);
        let x = random_hermitian(&mut rng, n);
        let p = basis.project(&x);
        prop_assert!((&basis.project(&p) - &p).frobenius() <= 1e-12 * (1.0 + x.frobenius()));
        // residual orthogonal to the range, coordinates isometric
        prop_assert!((&x - &p).inner(&p).abs() <= 1e-12 * (1.0 + x.frobenius().powi(2)));
        let coords = basis.coordinates(&x);
        let norm = coords.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - p.frobenius()).abs() <= 1e-12 * (1.0 + norm));
    }

    #[test]
    fn adjoint_kernel_is_the_range_complement(seed: u64, n in 2usize..=4) {
        let mut rng = seeded(seed);
        let grid = random_filter(&mut rng, n, 1, 0.85).eval_transfer(K).unwrap();
        let basis = RangeGammaBasis::compute(&grid);
        prop_assert_eq!(basis.dim(), 2 * n - 1);
        let x = complement_direction(&basis).unwrap();
        let leak = gamma_adjoint(&grid, &x).iter().map(spectral_norm).fold(0.0, f64::max);
        prop_assert!(leak <= 1e-9 * x.frobenius());
        prop_assert!(basis.project(&x).frobenius() <= 1e-6 * x.frobenius());
    }

    #[test]
    fn repaired_estimates_are_certified(seed: u64, (n, m) in shape(), scale in 0.1f64..3.0) {
        let mut rng = seeded(seed);
        let filter = random_filter(&mut rng, n, m, 0.85);
        let basis = RangeGammaBasis::compute(&filter.eval_transfer(K).unwrap());
        let noisy = &filter.lyapunov_sigma() + &random_hermitian(&mut rng, n).scale(scale);
        let repaired = nearest_feasible(&noisy, &basis, &filter).unwrap();
        prop_assert!(feasibility(&filter, repaired.sigma(), &basis).unwrap().feasible);
        let info = repaired.repair().unwrap();
        prop_assert!((0.0..=1.0).contains(&info.blend_weight));
    }

    #[test]
    fn repair_is_neutral_on_positive_projections(seed: u64, (n, m) in shape()) {
        let mut rng = seeded(seed);
        let filter = random_filter(&mut rng, n, m, 0.85);
        let basis = RangeGammaBasis::compute(&filter.eval_transfer(K).unwrap());
        let exact = filter.lyapunov_sigma();
        let noisy = &exact + &random_hermitian(&mut rng, n).scale(1e-3 * exact.min_eigenvalue() / n as f64);
        let repaired = nearest_feasible(&noisy, &basis, &filter).unwrap();
        prop_assert_eq!(repaired.repair().unwrap().blend_weight, 0.0);
        prop_assert!((repaired.sigma() - &basis.project(&noisy)).frobenius() <= 1e-13 * exact.frobenius());
    }

    #[test]
    fn hellinger_is_a_metric(a: u64, b: u64, d: u64, m in 1usize..=3) {
        let (x, y, z) = (
            spectrum(a, m, SpectrumRole::Prior),
            spectrum(b, m, SpectrumRole::Prior),
            spectrum(d, m, SpectrumRole::Prior),
        );
        let xy = hellinger_multivar(&x, &y).unwrap();
        let yx = hellinger_multivar(&y, &x).unwrap();
        let xz = hellinger_multivar(&x, &z).unwrap();
        let zy = hellinger_multivar(&z, &y).unwrap();
        prop_assert!(xy >= 0.0);
        prop_assert!((xy - yx).abs() <= 1e-12);
        prop_assert!(xy <= xz + zy + 1e-12);
        prop_assert!(hellinger_multivar(&x, &x).unwrap() <= 1e-7);
    }

    #[test]
    fn hellinger_minimizes_over_factors(a: u64, b: u64, seed: u64) {
        let mut rng = seeded(seed);
        let (phi, psi) = (spectrum(a, 2, SpectrumRole::Solution), spectrum(b, 2, SpectrumRole::Prior));
        let closed = hellinger_multivar(&phi, &psi).unwrap();
        let rotate = |f: SpectralFactor, rng: &mut _| {
            SpectralFactor::from_samples(f.samples().iter().map(|w| w * random_unitary(rng, 2)).collect())
        };
        let (pf, qf) = (rotate(phi.hermitian_factor(), &mut rng), rotate(psi.hermitian_factor(), &mut rng));
        prop_assert!((aligned_factor_distance(&pf, &qf).unwrap() - closed).abs() <= 1e-10);
        prop_assert!(closed <= factor_distance(&pf, &qf).unwrap() + 1e-12);
    }

    #[test]
    fn kl_lower_bound_by_mass_difference(a: u64, b: u64) {
        let (psi, phi) = (spectrum(a, 1, SpectrumRole::Prior), spectrum(b, 1, SpectrumRole::Solution));
        let mass = |s: &SpectralDensity| integrate_scalar(&s.scalar_samples().unwrap());
        prop_assert!(kl_divergence(&psi, &phi).unwrap() >= mass(&psi) - mass(&phi) - 1e-12);
        // equal masses give a nonnegative divergence
        let phi = SpectralDensity::new(
            phi.samples().iter().map(|s| s * c(mass(&psi) / mass(&phi), 0.0)).collect(),
            SpectrumRole::Solution,
        ).unwrap();
        prop_assert!(kl_divergence(&psi, &phi).unwrap() >= -1e-12);
    }

    #[test]
    fn hermitian_factor_reproduces_spectrum(seed: u64, m in 1usize..=3) {
        let phi = spectrum(seed, m, SpectrumRole::Prior);
        prop_assert!(phi.hermitian_factor().factorization_error(&phi) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solvers_match_moments_and_decrease_monotonically(seed: u64, n in 1usize..=4, hellinger: bool) {
        let mut rng = seeded(seed);
        let (metric, m) = if hellinger {
            (Metric::Hellinger, rng.random_range(1..=n.min(2)))
        } else {
            (Metric::KullbackLeibler, 1)
        };
        let inst = random_instance(&mut rng, n, m, K).unwrap();
        let sol = solve(metric, &inst.grid, &inst.basis, &inst.sigma, &inst.psi, &SolveOptions::default()).unwrap();
        prop_assert!(sol.report.converged);
        prop_assert!(sol.constraint_residual <= 1e-6 * inst.sigma.sigma().frobenius());
        // values may only rise by rounding noise, in steps taken once the
        // predicted decrease is below what f64 resolves
        prop_assert!(sol.report.values.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs())));
        prop_assert!(sol.report.margins.iter().all(|&v| v > 0.0));
        let direct = gamma_apply(&inst.grid, &sol.spectrum).unwrap();
        prop_assert!((&direct - inst.sigma.sigma()).frobenius() <= 1e-6 * inst.sigma.sigma().frobenius());
    }
}

#[test]
fn complement_shift_breaks_feasibility_for_every_seed() {
    for seed in 0..20 {
        let mut rng = seeded(seed);
        let n = rng.random_range(2..=4);
        let filter = random_filter(&mut rng, n, 1, 0.8);
        let basis = RangeGammaBasis::compute(&filter.eval_transfer(K).unwrap());
        let sigma = filter.lyapunov_sigma();
        let x = complement_direction(&basis).unwrap();
        let shifted: HermitianMatrix = &sigma + &x.scale(sigma.frobenius());
        let cert = feasibility(&filter, &shifted, &basis).unwrap();
        assert!(!cert.feasible);
        assert!(cert.equation_residual > 1e-9 * shifted.frobenius());
    }
}
