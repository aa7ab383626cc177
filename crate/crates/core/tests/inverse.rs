use dirac_weyl::gbdt;
use dirac_weyl::gbdt::SignatureLayout;
use dirac_weyl::linalg::{self, c64, CMatrix, I};
use dirac_weyl::random;
use dirac_weyl::weyl_direct::estimate_weyl;
use dirac_weyl::weyl_inverse::{self, InverseTolerances, Realization};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_case(seed: u64) -> Realization {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let m1 = rng.gen_range(1..=2);
    let m2 = rng.gen_range(1..=2);
    random::admissible_realization(&mut rng, m1, m2, n, 0.9).unwrap()
}

#[test]
fn closed_form_round_trip() {
    for seed in 0..10 {
        let r = random_case(seed);
        let p = weyl_inverse::inverse_problem(&r, InverseTolerances::default()).unwrap();
        for z in [I, c64(0.5, 2.0), c64(-3.0, 0.2), c64(10.0, 1.0)] {
            let d = weyl_inverse::weyl_closed_form(&p, z).unwrap() - weyl_inverse::eval_transfer(&r, z).unwrap();
            assert!(linalg::norm2(&d) <= 1e-9, "seed {seed} z {z}: {}", linalg::norm2(&d));
        }
    }
}

#[test]
fn pipeline_round_trip() {
    for seed in 0..10 {
        let r = random_case(seed);
        let p = weyl_inverse::inverse_problem(&r, InverseTolerances::default()).unwrap();
        let pot = gbdt::sample_potential(&p, 50.0, 0.01).unwrap();
        for z in [c64(0.0, 2.0), c64(1.0, 3.0)] {
            let est = estimate_weyl(&pot, z, 50.0).unwrap();
            let exact = weyl_inverse::eval_transfer(&r, z).unwrap();
            let dev = linalg::norm2(&(&est.phi - exact));
            assert!(dev <= est.radius_bound + 1e-6, "seed {seed}: {dev} > {}", est.radius_bound);
        }
    }
}

#[test]
fn identity_residual_tracks_riccati_residual() {
    for seed in 20..30 {
        let r = weyl_inverse::mcmillan_reduce(&random_case(seed), weyl_inverse::DEFAULT_RANK_TOL);
        let sol = weyl_inverse::solve_riccati(&r, weyl_inverse::DEFAULT_RICCATI_TOL).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(sol.min_eigenvalue > 0.0);
        let p = weyl_inverse::params_from_solution(&r, &sol).unwrap();
        let roundoff = 1e-13 * (1.0 + linalg::norm2(&p.alpha) * linalg::norm2(&p.sigma0) + linalg::norm2(&p.theta2).powi(2));
        assert!(p.identity_residual() <= 2.0 * sol.residual + roundoff);
    }
}

#[test]
fn every_hermitian_solution_gives_the_same_potential() {
    let mut pairs = 0;
    for seed in 0..20 {
        let r = weyl_inverse::mcmillan_reduce(&random_case(seed), weyl_inverse::DEFAULT_RANK_TOL);
        let solutions = weyl_inverse::riccati_solutions(&r, weyl_inverse::DEFAULT_RICCATI_TOL).unwrap();
        let potentials: Vec<_> = solutions
            .iter()
            .map(|s| {
                assert!(s.min_eigenvalue > 0.0);
                let p = weyl_inverse::params_from_solution(&r, s).unwrap();
                gbdt::sample_potential(&p, 5.0, 0.05).unwrap()
            })
            .collect();
        for other in &potentials[1..] {
            pairs += 1;
            for (a, b) in potentials[0].vs().iter().zip(other.vs()) {
                assert!(linalg::norm2(&(a - b)) <= 1e-8, "seed {seed}");
            }
        }
    }
    assert!(pairs > 0, "no realization produced two Hermitian solutions");
}

#[test]
fn reduction_is_idempotent_and_handles_redundant_states() {
    for seed in 40..50 {
        let r = random_case(seed);
        let n = r.order();
        // Append a state that is neither reachable nor observable.
        let mut a = linalg::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&r.a);
        a[(n, n)] = c64(0.5, -2.0);
        let mut b = linalg::zeros(n + 1, r.b.ncols());
        b.view_mut((0, 0), r.b.shape()).copy_from(&r.b);
        let mut c = linalg::zeros(r.c.nrows(), n + 1);
        c.view_mut((0, 0), r.c.shape()).copy_from(&r.c);
        let padded = Realization::new(c, a, b).unwrap();
        let once = weyl_inverse::mcmillan_reduce(&padded, weyl_inverse::DEFAULT_RANK_TOL);
        let twice = weyl_inverse::mcmillan_reduce(&once, weyl_inverse::DEFAULT_RANK_TOL);
        assert_eq!(once.order(), n);
        assert_eq!(twice.order(), n);
        let p = weyl_inverse::inverse_problem(&padded, InverseTolerances::default()).unwrap();
        for z in [I, c64(2.0, 1.0)] {
            let d = weyl_inverse::weyl_closed_form(&p, z).unwrap() - weyl_inverse::eval_transfer(&r, z).unwrap();
            assert!(linalg::norm2(&d) <= 1e-9);
        }
    }
}

#[test]
fn closed_form_is_non_expansive_on_the_real_line() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(1..=4);
        let p = random::valid_params(&mut rng, SignatureLayout::new(2, 1).unwrap(), n).unwrap();
        for t in weyl_inverse::default_real_grid() {
            let Ok(phi) = weyl_inverse::weyl_closed_form(&p, c64(t, 0.0)) else { continue };
            let norm = linalg::norm2(&phi);
            assert!(norm <= 1.0 + 1e-9, "{norm}");
        }
    }
}

#[test]
fn inadmissible_inputs_are_rejected() {
    let expansive = Realization::new(
        CMatrix::from_element(1, 1, c64(0.0, -2.0)),
        CMatrix::from_element(1, 1, -I),
        CMatrix::from_element(1, 1, c64(1.0, 0.0)),
    )
    .unwrap();
    assert!(weyl_inverse::inverse_problem(&expansive, InverseTolerances::default()).is_err());
    // Skipping the grid screen, the Riccati step itself finds no positive solution.
    assert!(weyl_inverse::solve_riccati(&expansive, weyl_inverse::DEFAULT_RICCATI_TOL).is_err());
}
