use gvw::model::{
    elasticity_threshold, pulse_response, simulate, steady_budget, steady_share, taylor_coefficients, taylor_reduce,
    GvwParams, PulseSpec, PulseTrain,
};
use gvw::Error;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = GvwParams<f64>> {
    (0.01..1.0, 0.1..2.0, 0.0..2.0, 0.0..0.5).prop_map(|(rho, alpha, beta, delta)| GvwParams {
        rho,
        alpha,
        beta,
        delta,
    })
}

fn linear(params: &GvwParams<f64>, pulse: &PulseSpec<f64>, t: f64) -> f64 {
    let gain = params.rho * pulse.b0.powf(params.alpha);
    let rate = gain + params.delta;
    let in_pulse = |s: f64| gain / rate + (pulse.x0 - gain / rate) * (-rate * s).exp();
    if t <= pulse.t_end {
        in_pulse(t)
    } else {
        in_pulse(pulse.t_end) * (-params.delta * (t - pulse.t_end)).exp()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trajectories_stay_in_the_unit_interval(
        p in params(),
        beta in 1e-3..2.0,
        x0 in 0.0..=1.0,
        levels in prop::collection::vec(0.0..5.0, 1..4),
        on in 1.0..15.0,
        off in 0.0..10.0,
    ) {
        let p = GvwParams { beta, ..p };
        let times: Vec<f64> = (0..=80).map(|i| i as f64 * 0.75).collect();
        let budget = PulseTrain::new(levels, on, off);
        let sim = match simulate(&p, &budget, x0, &times) {
            Err(Error::IntegrationNotConverged { .. }) if beta < 1.0 => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert_eq!(sim.len(), times.len());
        for s in sim.samples() {
            prop_assert!((0.0..=1.0).contains(&s.share));
        }
        for event in sim.meta.clamp_events.iter().filter(|_| beta >= 1.0) {
            prop_assert!(event.raw > -1e-6 && event.raw < 1.0 + 1e-6, "clamped {:?}", event);
        }
    }

    #[test]
    fn pulse_response_is_continuous_at_cessation(
        p in params(),
        b0 in 0.1..3.0,
        t_end in 1.0..40.0,
        x0 in 0.0..0.3,
    ) {
        let pulse = PulseSpec::new(b0, t_end, x0).unwrap();
        prop_assume!(taylor_reduce(&p, b0).is_ok());
        let eps = 1e-9;
        let before = pulse_response(&p, &pulse, t_end - eps).unwrap();
        let after = pulse_response(&p, &pulse, t_end + eps).unwrap();
        prop_assert!((before - after).abs() < 1e-10 + 2.0 * eps, "{} vs {}", before, after);
    }

    #[test]
    fn unit_beta_pulse_is_the_linear_solution(
        rho in 0.01..1.0,
        alpha in 0.1..2.0,
        delta in 0.0..0.5,
        b0 in 0.1..3.0,
        t_end in 1.0..40.0,
        x0 in 0.0..0.5,
        t in 0.0..80.0,
    ) {
        let p = GvwParams::new(rho, alpha, 1.0, delta).unwrap();
        let pulse = PulseSpec::new(b0, t_end, x0).unwrap();
        let got = pulse_response(&p, &pulse, t).unwrap();
        prop_assert!((got - linear(&p, &pulse, t)).abs() < 1e-10);
    }

    #[test]
    fn linear_word_of_mouth_limits_have_no_quadratic_term(
        p in params(),
        b0 in 0.1..3.0,
        beta_is_one in any::<bool>(),
    ) {
        let p = GvwParams { beta: if beta_is_one { 1.0 } else { 0.0 }, ..p };
        let (k1, _, _) = taylor_coefficients(&p, b0).unwrap();
        prop_assert_eq!(k1, 0.0);
        if let Ok(red) = taylor_reduce(&p, b0) {
            let pulse = PulseSpec::new(b0, 10.0, 0.0).unwrap();
            for t in [0.0, 1.0, 5.0, 10.0, 20.0] {
                prop_assert!(pulse_response(&p, &pulse, t).unwrap().is_finite());
            }
            prop_assert!((0.0..=1.0).contains(&red.x_hat));
        }
    }

    #[test]
    fn steady_budget_inverts_steady_share(p in params(), x in 0.001..0.999) {
        let p = GvwParams { delta: p.delta.max(1e-3), ..p };
        let b = steady_budget(&p, x).unwrap();
        prop_assume!(b > 1e-300 && b.is_finite());
        let back = steady_share(&p, b).unwrap();
        prop_assert!((back - x).abs() < 1e-8, "{} -> {} -> {}", x, b, back);
    }

    #[test]
    fn word_of_mouth_raises_the_steady_share(p in params(), x in 0.05..0.95) {
        let p = GvwParams { beta: p.beta.clamp(0.01, 1.99), delta: p.delta.max(1e-3), ..p };
        let b = steady_budget(&p, x).unwrap();
        let h = 1e-5;
        let share = |beta: f64| steady_share(&GvwParams { beta, ..p }, b).unwrap();
        prop_assert!(share(p.beta + h) < share(p.beta - h));
    }
}

#[test]
fn alpha_sensitivity_flips_sign_at_the_threshold() {
    let mut checked = 0;
    for rho in [0.05, 0.1, 0.3] {
        for beta in [0.3, 0.8, 1.0, 1.6] {
            for delta in [0.02, 0.1, 0.4] {
                let p = GvwParams::new(rho, 0.8, beta, delta).unwrap();
                let threshold = elasticity_threshold(&p).unwrap();
                if !(0.1..0.9).contains(&threshold) {
                    continue;
                }
                let h = 1e-5;
                for (offset, sign) in [(-0.05, -1.0), (0.05, 1.0)] {
                    let b = steady_budget(&p, threshold + offset).unwrap();
                    let share = |alpha: f64| steady_share(&GvwParams { alpha, ..p }, b).unwrap();
                    let slope = (share(p.alpha + h) - share(p.alpha - h)) / (2.0 * h);
                    assert!(slope * sign > 0.0, "{p:?} offset {offset}: {slope}");
                }
                checked += 1;
            }
        }
    }
    assert!(checked >= 10, "only {checked} parameter sets had an interior threshold");
}

#[test]
fn taylor_residual_is_cubic_with_small_constant() {
    for i in 0..=20 {
        let beta = i as f64 / 20.0;
        let constant = (1..=300)
            .map(|j| {
                let x = 0.3 * j as f64 / 300.0;
                let taylor = 1.0 - beta * x + beta * (beta - 1.0) * x * x / 2.0;
                ((1.0 - x).powf(beta) - taylor).abs() / x.powi(3)
            })
            .fold(0.0, f64::max);
        assert!(constant < 1.0, "beta {beta}: C = {constant}");
    }
}
