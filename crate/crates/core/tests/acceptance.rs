//! Acceptance criteria, one line each. Exits nonzero if any criterion fails.

mod common;

use std::process::{Command, ExitCode};

use dirac_weyl::gbdt::{self, SignatureLayout};
use dirac_weyl::linalg::{self, c64, scalar, I, ONE, ZERO};
use dirac_weyl::propagator::{self, SampledPotential};
use dirac_weyl::weyl_direct::{self, estimate_weyl};
use dirac_weyl::weyl_inverse::{self, InverseTolerances, Realization};
use dirac_weyl::{random, spectral};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scalar_phi(z: Complex64) -> Complex64 {
    -I / (z + I)
}

fn hand_realization() -> Realization {
    Realization::new(scalar(-I), scalar(-I), scalar(ONE)).unwrap()
}

fn scalar_hand_model() -> Outcome {
    let p = common::scalar_model();
    let pot = gbdt::sample_potential(&p, 5.0, 0.01).map_err(|e| e.to_string())?;
    let v_err = pot
        .xs()
        .iter()
        .zip(pot.vs())
        .map(|(x, v)| (v[(0, 0)] - c64(0.0, -2.0 / (1.0 + 2.0 * x))).norm())
        .fold(0.0, f64::max);
    let theta = spectral::theta_matrix(&p).map_err(|e| e.to_string())?;
    let theta_err = (theta[(0, 0)] + I).norm();
    let phi_i = weyl_inverse::weyl_closed_form(&p, I).map_err(|e| e.to_string())?[(0, 0)];
    let phi_2i = weyl_inverse::weyl_closed_form(&p, c64(0.0, 2.0)).map_err(|e| e.to_string())?[(0, 0)];
    let phi_err = (phi_i + 0.5).norm().max((phi_2i + 1.0 / 3.0).norm());
    let mut closed_err: f64 = 0.0;
    for z in [c64(0.3, 0.7), c64(-2.0, 1.5), c64(4.0, 0.1)] {
        let phi = weyl_inverse::weyl_closed_form(&p, z).map_err(|e| e.to_string())?[(0, 0)];
        closed_err = closed_err.max((phi - scalar_phi(z)).norm());
    }
    check(
        v_err <= 1e-12 && theta_err <= 1e-12 && phi_err <= 1e-12 && closed_err <= 1e-12,
        format!("max |v err| {v_err:.2e}, |theta + i| {theta_err:.2e}, phi(i), phi(2i) err {phi_err:.2e}, phi(z) err {closed_err:.2e}"),
    )
}

fn inverse_hand_model() -> Outcome {
    let r = hand_realization();
    let sol = weyl_inverse::solve_riccati(&r, weyl_inverse::DEFAULT_RICCATI_TOL).map_err(|e| e.to_string())?;
    let p = weyl_inverse::inverse_problem(&r, InverseTolerances::default()).map_err(|e| e.to_string())?;
    let x_err = (sol.x[(0, 0)] - ONE).norm();
    let param_err = [(&p.alpha, ZERO), (&p.sigma0, ONE), (&p.theta1, ONE), (&p.theta2, ONE)]
        .iter()
        .map(|(m, e)| (m[(0, 0)] - e).norm())
        .fold(0.0, f64::max);
    check(
        x_err <= 1e-12 && sol.residual <= 1e-12 && param_err <= 1e-12,
        format!("|X - 1| {x_err:.2e}, residual {:.2e}, max parameter err {param_err:.2e}", sol.residual),
    )
}

fn ode_vs_closed_form() -> Outcome {
    let p = common::scalar_model();
    let mut worst: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    for z in [I, c64(1.0, 1.0), c64(0.0, 2.0)] {
        let exact = gbdt::fundamental_closed(&p, 2.0, z).map_err(|e| e.to_string())?;
        let error = |step: f64| -> Result<f64, String> {
            let pot = gbdt::sample_potential(&p, 2.0, step).map_err(|e| e.to_string())?;
            let r = propagator::propagate(&pot, z).map_err(|e| e.to_string())?;
            Ok(linalg::norm2(&(r.us.last().unwrap() - &exact)) / linalg::norm2(&exact))
        };
        let coarse = error(1e-3)?;
        let fine = error(5e-4)?;
        worst = worst.max(coarse);
        worst_ratio = worst_ratio.min(coarse / fine);
    }
    check(
        worst <= 1e-6 && worst_ratio >= 3.5,
        format!("max relative error {worst:.2e} at step 1e-3, min error ratio on halving {worst_ratio:.2}"),
    )
}

fn direct_convergence() -> Outcome {
    let p = common::scalar_model();
    let z = c64(0.0, 2.0);
    let pot = gbdt::sample_potential(&p, 50.0, 0.01).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;
    let mut last_dev = f64::INFINITY;
    for x_max in [5.0, 20.0, 50.0] {
        let e = estimate_weyl(&pot, z, x_max).map_err(|e| e.to_string())?;
        let dev = (e.phi[(0, 0)] - scalar_phi(z)).norm();
        let cap = (1.0 + 4.0 * x_max).powf(-0.5) + 1e-8;
        ok &= dev <= e.radius_bound && e.radius_bound <= cap;
        last_dev = dev;
        notes.push(format!("x={x_max}: dev {dev:.2e} <= bound {:.2e} <= {cap:.3}", e.radius_bound));
    }
    ok &= last_dev <= 1e-2;
    check(ok, notes.join("; "))
}

fn full_round_trip() -> Outcome {
    let mut worst_a: f64 = 0.0;
    let mut worst_b_ratio: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = StdRng::seed_from_u64(1000 + seed);
        let n = rng.gen_range(1..=3);
        let (m1, m2) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let r = random::admissible_realization(&mut rng, m1, m2, n, 0.9).map_err(|e| e.to_string())?;
        let p = weyl_inverse::inverse_problem(&r, InverseTolerances::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        for _ in 0..10 {
            let z = c64(rng.gen_range(-5.0..5.0), rng.gen_range(0.05..5.0));
            let d = weyl_inverse::weyl_closed_form(&p, z).map_err(|e| e.to_string())?
                - weyl_inverse::eval_transfer(&r, z).map_err(|e| e.to_string())?;
            worst_a = worst_a.max(linalg::norm2(&d));
        }
        let pot = gbdt::sample_potential(&p, 40.0, 0.01).map_err(|e| e.to_string())?;
        let z = c64(0.0, 3.0);
        let e = estimate_weyl(&pot, z, 40.0).map_err(|e| e.to_string())?;
        let dev = linalg::norm2(&(&e.phi - weyl_inverse::eval_transfer(&r, z).map_err(|e| e.to_string())?));
        worst_b_ratio = worst_b_ratio.max(dev / e.radius_bound);
    }
    check(
        worst_a <= 1e-9 && worst_b_ratio <= 1.0,
        format!("closed-form round trip max err {worst_a:.2e}; pipeline max deviation/radius_bound {worst_b_ratio:.2}"),
    )
}

fn matrix_ball_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut slack_a = f64::INFINITY;
    let mut slack_nest = f64::INFINITY;
    let mut slack_rho_r = f64::INFINITY;
    let mut slack_rho_l = f64::INFINITY;
    for (m1, m2) in [(2, 1), (1, 2), (2, 2)] {
        let layout = SignatureLayout::new(m1, m2).unwrap();
        let pot = random::smooth_potential(&mut rng, layout, 3.0, 0.01).map_err(|e| e.to_string())?;
        let z = c64(rng.gen_range(-1.0..1.0), rng.gen_range(0.3..1.0));
        let r = propagator::propagate(&pot, z).map_err(|e| e.to_string())?;
        let j = layout.j();
        let nodes: Vec<usize> = (0..r.len()).step_by(25).collect();
        let mut prev: Option<(usize, weyl_direct::MatrixBall)> = None;
        for &k in &nodes {
            let a = r.a_matrix(k);
            let scale = linalg::norm2(&a).max(1.0);
            slack_a = slack_a.min(linalg::min_eigenvalue(&(&j - &a)) / scale);
            let ball = weyl_direct::ball_from_solution(&r, k).map_err(|e| e.to_string())?;
            slack_rho_r = slack_rho_r.min(1.0 - linalg::max_eigenvalue(&ball.rho_r));
            if let Some((k_prev, prev_ball)) = &prev {
                slack_rho_l = slack_rho_l.min(linalg::min_eigenvalue(&(&prev_ball.rho_l - &ball.rho_l)));
                let a_prev = r.a_matrix(*k_prev);
                let prev_scale = linalg::norm2(&a_prev).max(1.0);
                for _ in 0..50 {
                    let omega = random::contraction(&mut rng, m2, m1, 1.0);
                    let point = weyl_direct::sample_point(&ball, &omega).map_err(|e| e.to_string())?;
                    let form = weyl_direct::membership_form(&a_prev, &point);
                    slack_nest = slack_nest.min(linalg::min_eigenvalue(&form) / prev_scale);
                }
            }
            prev = Some((k, ball));
        }
    }
    let worst = slack_a.min(slack_nest).min(slack_rho_r).min(slack_rho_l);
    check(
        worst >= -1e-8,
        format!("min slacks: j - A {slack_a:.2e}, nesting {slack_nest:.2e}, I - rho_r {slack_rho_r:.2e}, rho_l decay {slack_rho_l:.2e}"),
    )
}

fn discrimination() -> Outcome {
    let layout = SignatureLayout::new(1, 1).unwrap();
    let z = I;
    let free = SampledPotential::zero(layout, 10.0, 1e-4).map_err(|e| e.to_string())?;
    let weyl = weyl_direct::l2_weyl_functional(&free, &scalar(ZERO), z, 10.0).map_err(|e| e.to_string())?[(0, 0)].re;
    let mut ok = weyl <= 0.5 + 1e-9;
    let mut notes = vec![format!("phi=0: {weyl:.10}")];
    for c in [0.5, 1.0] {
        let value = weyl_direct::l2_weyl_functional(&free, &scalar(c64(c, 0.0)), z, 10.0).map_err(|e| e.to_string())?[(0, 0)].re;
        ok &= value > 10.0 * c * c * 0.9;
        notes.push(format!("phi={c}: {value:.3e}"));
    }
    let short = SampledPotential::zero(layout, 2.0, 1e-3).map_err(|e| e.to_string())?;
    let accept_free = weyl_direct::psi_bound_check(&short, &scalar(ZERO), z, 2.0).map_err(|e| e.to_string())?;
    let reject_free = weyl_direct::psi_bound_check(&short, &scalar(ONE), z, 2.0).map_err(|e| e.to_string())?;
    let p = common::scalar_model();
    let model = gbdt::sample_potential(&p, 2.0, 1e-3).map_err(|e| e.to_string())?;
    let accept_model = weyl_direct::psi_bound_check(&model, &scalar(scalar_phi(z)), z, 2.0).map_err(|e| e.to_string())?;
    ok &= accept_free.ok && !reject_free.ok && accept_model.ok;
    notes.push(format!(
        "psi check: v=0 phi=0 {}, v=0 phi=1 {}, scalar model {}",
        accept_free.ok, reject_free.ok, accept_model.ok
    ));
    check(ok, notes.join("; "))
}

fn spectral_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(77);
    let (mut max_imag, mut r22, mut r28, mut r32) = (f64::NEG_INFINITY, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = rng.gen_range(1..=4);
        let layout = SignatureLayout::new(rng.gen_range(1..=2), rng.gen_range(1..=2)).unwrap();
        let p = random::valid_params(&mut rng, layout, n).map_err(|e| e.to_string())?;
        let report = spectral::spectrum_check(&p, Some(1e-8)).map_err(|e| e.to_string())?;
        max_imag = max_imag.max(report.max_imag);
        r22 = r22.max(spectral::theta_of(&p).map_err(|e| e.to_string())?.identity_residual);
        let x = rng.gen_range(0.2..2.0);
        r28 = r28.max(spectral::derivative_identity_residual(&p, x, 1e-4).map_err(|e| e.to_string())?);
        r32 = r32.max(spectral::relation_residual(&p, x).map_err(|e| e.to_string())?);
    }
    let (p, _) = common::real_eigenvalue_instance(0.6);
    let states = spectral::bound_states(&p, 10.0, 1e-3, None).map_err(|e| e.to_string())?;
    let Some(s) = states.first() else {
        return Err("constructed instance produced no bound state".into());
    };
    let ok = max_imag <= 1e-8
        && r22 <= 1e-10
        && r28 <= 1e-6
        && r32 <= 1e-9
        && states.len() == 1
        && s.g0_norm <= 1e-10
        && s.ode_residual <= 1e-5
        && s.tail_estimate <= s.tail_scale;
    check(
        ok,
        format!(
            "max Im theta {max_imag:.2e}; residuals (theta identity {r22:.1e}, derivative {r28:.1e}, relation {r32:.1e}); \
             bound state lambda {:.3}: |g(0)| {:.1e}, ode {:.1e}, tail {:.1e}, sup|g| {:.1e}",
            s.lambda,
            s.g0_norm,
            s.ode_residual,
            s.tail_estimate,
            s.sup_norm()
        ),
    )
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("roundtrip.toml");
    std::fs::write(
        &config,
        "command = \"roundtrip\"\nz_points = [[0, 2], [1, 1]]\n\n[realization]\nm1 = 1\nm2 = 1\n\
         c = [[[0, -1]]]\na = [[[0, -1]]]\nb = [[[1, 0]]]\n\n[grid]\nx_max = 50.0\nstep = 0.01\n",
    )
    .map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_dirac-weyl");
    let run = |args: &[&str]| Command::new(bin).args(args).output().map_err(|e| e.to_string());
    let path = config.to_str().unwrap();
    let first = run(&["roundtrip", "--config", path])?;
    let second = run(&["roundtrip", "--config", path])?;
    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "[realization\nm1 = ").map_err(|e| e.to_string())?;
    let malformed = run(&["roundtrip", "--config", broken.to_str().unwrap()])?;
    let identical = first.stdout == second.stdout && !first.stdout.is_empty();
    check(
        identical && first.status.code() == Some(0) && second.status.code() == Some(0) && malformed.status.code() == Some(2),
        format!(
            "identical output {identical}, exit codes {:?}/{:?}, malformed config exit {:?}",
            first.status.code(),
            second.status.code(),
            malformed.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("scalar hand model", scalar_hand_model),
        ("inverse hand model", inverse_hand_model),
        ("ODE vs closed form", ode_vs_closed_form),
        ("direct-problem convergence", direct_convergence),
        ("full round trip", full_round_trip),
        ("matrix-ball suite", matrix_ball_suite),
        ("discrimination", discrimination),
        ("spectral suite", spectral_suite),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS [{name}] ({secs:.1}s) {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL [{name}] ({secs:.1}s) {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
