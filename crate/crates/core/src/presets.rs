//! Figure-reproduction presets. Each expands to a fully explicit
//! [`RunConfig`]; anything the source leaves open is listed in `notes`.

use crate::config::{
    Action, ConditionsSpec, GridSpec, GroundStateSpec, InitialSpec, NonlinearitySpec, ProfileSpec, RunConfig,
    StepperSpec, SweepSpec,
};
use crate::error::{Error, Result};
use crate::evolve::Stepper;

/// Preset ids with a one-line description.
pub const CATALOG: &[(&str, &str)] = &[
    ("fig1", "0.5|u|^{1/2}, u0 = 3/<x>"),
    ("fig2", "0.5|u|^{1/2}, u0 = 0.1/(1+x^2)^{1/3}"),
    ("fig3", "0.5|u|^{1/2}, u0 = 0.1/(1+x^2)^{1/4}"),
    ("fig4", "0.5|u|^{1/2}, u0 = 1.5 Q"),
    ("fig5", "cubic-quintic ground state at omega = 0.15 against the explicit profile"),
    ("fig6a", "ground states of eps1|u|^{1/9} + |u|^{7/9}, omega = 0.2"),
    ("fig6b", "ground states of eps1|u|^{1/2} + 0.9|u|^4, omega = 0.1"),
    ("fig7a", "-|u|^{1/9} + |u|^{7/9}, u0 = A/<x>"),
    ("fig7b", "|u|^{1/9} + |u|^{7/9}, u0 = A/<x>"),
    ("fig8a", "-|u|^{1/9} + |u|^{7/9}, u0 = A Q, omega = 0.2"),
    ("fig8b", "|u|^{1/9} + |u|^{7/9}, u0 = A Q, omega = 0.2"),
    ("fig9", "0.1|u|^{1/2} + 0.9|u|^4, u0 = A Q, omega = 0.1"),
    ("fig10a", "|u|^3 - |u|^6, u0 = A Q, omega = 0.1"),
    ("fig10b", "|u|^3 + |u|^6, u0 = A Q, omega = 0.1"),
    ("fig11a", "ground states of eps e^{|u|}, omega = 0.1"),
    ("fig11b", "ground states of eps e^{|u|^2}, omega = 0.1"),
    ("fig12", "0.025 e^{|u|}, u0 = A Q"),
    ("fig13", "e^{|u|}, u0 = e^{i b x^2/4} 2.5/(1+x^2)^2, b = +-4"),
    ("fig14a", "0.05 e^{|u|}, u0 = e^{i b x^2/4} Q, b = +-0.1"),
    ("fig14b", "0.05 e^{|u|}, u0 = e^{i b x^2/4} Q, b = +-0.75"),
    ("exp-conditions", "coefficient conditions of the exponential family"),
];

pub fn ids() -> impl Iterator<Item = &'static str> {
    CATALOG.iter().map(|(id, _)| *id)
}

fn base(id: &str, grid: GridSpec, n: NonlinearitySpec) -> RunConfig {
    let mut c = RunConfig::new(id, grid, n);
    c.preset = Some(id.to_string());
    c
}

fn evolve(c: &mut RunConfig, method: Stepper, dt: f64, t_end: f64, init: InitialSpec) {
    let mut st = StepperSpec::new(method, dt, t_end);
    st.snapshot_stride = Some(((t_end / dt) / 20.0).round().max(1.0) as usize);
    c.stepper = Some(st);
    c.initial = Some(init);
}

fn poly(amplitude: f64, n: f64) -> InitialSpec {
    InitialSpec::new(ProfileSpec::Polynomial { amplitude, n })
}

fn scaled(profile: ProfileSpec, scale: f64) -> InitialSpec {
    InitialSpec {
        profile,
        scale,
        phase_b: 0.0,
    }
}

fn sweep_amplitudes(c: &mut RunConfig, amplitudes: &[f64]) {
    c.action = Action::Sweep;
    c.sweep = Some(SweepSpec {
        amplitudes: amplitudes.to_vec(),
        ..Default::default()
    });
}

fn exp(eps: f64, r: f64) -> NonlinearitySpec {
    NonlinearitySpec::Exp {
        eps,
        r,
        c: 1.0,
        first: 0,
    }
}

/// Expands a preset id.
pub fn preset(id: &str) -> Result<RunConfig> {
    let half = NonlinearitySpec::power(0.5, 0.5);
    let ninth = |sign: f64| NonlinearitySpec::double(sign, 1.0 / 9.0, 1.0, 7.0 / 9.0);
    let c = match id {
        "fig1" => {
            let mut c = base(id, GridSpec::pi(150.0, 1 << 16), half);
            evolve(&mut c, Stepper::Irk4, 0.01, 100.0, poly(3.0, 1.0));
            c.expect_blowup = Some(false);
            c.notes.push("t_end = 100 read off the figure file name".into());
            c
        }
        "fig2" | "fig3" => {
            let n = if id == "fig2" { 2.0 / 3.0 } else { 0.5 };
            let mut c = base(id, GridSpec::pi(300.0, 1 << 14), half);
            evolve(&mut c, Stepper::Irk4, 0.005, 100.0, poly(0.1, n));
            c.expect_blowup = Some(false);
            c.notes.push("t_end not stated; 100 chosen".into());
            c
        }
        "fig4" => {
            let mut c = base(id, GridSpec::pi(10.0, 1 << 12), half);
            let q = ProfileSpec::SechGs { alpha: 0.5, eps: 0.5 };
            evolve(&mut c, Stepper::Irk4, 0.01, 100.0, scaled(q, 1.5));
            c.expect_blowup = Some(false);
            c.notes.push("Q is the explicit omega = 1 ground state; t_end = 100 from the file name".into());
            c
        }
        "fig5" => {
            let mut c = base(id, GridSpec::pi(100.0, 1 << 16), NonlinearitySpec::double(1.0, 2.0, -1.0, 4.0));
            c.action = Action::Groundstate;
            c.groundstate = Some(GroundStateSpec::new(0.15));
            c
        }
        "fig6a" => {
            let mut c = base(id, GridSpec::pi(100.0, 1 << 16), ninth(1.0));
            c.action = Action::Groundstate;
            c.groundstate = Some(GroundStateSpec::new(0.2));
            c.sweep = Some(SweepSpec {
                eps: vec![-1.0, -0.5, 0.0, 0.2],
                ..Default::default()
            });
            c.notes.push("only the range -1 <= eps1 <= 0.2 is stated; four values chosen".into());
            c
        }
        "fig6b" => {
            let mut c = base(id, GridSpec::pi(100.0, 1 << 16), NonlinearitySpec::double(0.1, 0.5, 0.9, 4.0));
            c.action = Action::Groundstate;
            c.groundstate = Some(GroundStateSpec::new(0.1));
            c.sweep = Some(SweepSpec {
                eps: vec![-0.9, -0.6, -0.3, 0.0],
                ..Default::default()
            });
            c.notes.push("only the range -0.9 <= eps1 <= 0 is stated; four values chosen".into());
            c.notes.push("omega not stated for this panel; 0.1 as for the same nonlinearity elsewhere".into());
            c
        }
        "fig7a" | "fig7b" => {
            let (sign, amps) = if id == "fig7a" { (-1.0, [1.0, 0.8]) } else { (1.0, [0.8, 0.5]) };
            let mut c = base(id, GridSpec::pi(150.0, 1 << 16), ninth(sign));
            evolve(&mut c, Stepper::Irk4, 0.01, 100.0, poly(1.0, 1.0));
            sweep_amplitudes(&mut c, &amps);
            c.notes.push("t_end not stated; 100 chosen".into());
            c
        }
        "fig8a" | "fig8b" => {
            let (sign, amps) = if id == "fig8a" { (-1.0, [0.9, 1.0, 1.05]) } else { (1.0, [0.9, 1.0, 1.1]) };
            let mut c = base(id, GridSpec::pi(100.0, 1 << 14), ninth(sign));
            evolve(&mut c, Stepper::Irk4, 0.005, 200.0, scaled(ProfileSpec::NumericGs { omega: 0.2 }, 1.0));
            sweep_amplitudes(&mut c, &amps);
            c.notes.push("dt stated as a range 0.01 - 0.001; 0.005 chosen".into());
            c
        }
        "fig9" => {
            let mut c = base(id, GridSpec::pi(100.0, 1 << 16), NonlinearitySpec::double(0.1, 0.5, 0.9, 4.0));
            evolve(&mut c, Stepper::Irk4, 0.005, 20.0, scaled(ProfileSpec::NumericGs { omega: 0.1 }, 1.0));
            sweep_amplitudes(&mut c, &[1.0, 1.05, 1.2]);
            c.notes.push("dt stated as a range 0.01 - 0.001; 0.005 chosen".into());
            c.notes.push("t_end not stated; 20 chosen".into());
            c
        }
        "fig10a" | "fig10b" => {
            let (sign, amps): (f64, &[f64]) = if id == "fig10a" {
                (-1.0, &[0.8, 0.9, 1.0, 1.1, 1.3])
            } else {
                (1.0, &[0.9, 0.99, 1.0, 1.01, 1.02])
            };
            let mut c = base(id, GridSpec::pi(100.0, 1 << 14), NonlinearitySpec::double(1.0, 3.0, sign, 6.0));
            evolve(&mut c, Stepper::Irk4, 0.005, 50.0, scaled(ProfileSpec::NumericGs { omega: 0.1 }, 1.0));
            sweep_amplitudes(&mut c, amps);
            c.notes.push("dt stated as a range 0.01 - 0.001; 0.005 chosen".into());
            c.notes.push("t_end not stated; 50 chosen".into());
            c
        }
        "fig11a" | "fig11b" => {
            let r = if id == "fig11a" { 1.0 } else { 2.0 };
            let mut c = base(id, GridSpec::pi(40.0, 1 << 16), exp(0.05, r));
            c.action = Action::Groundstate;
            c.groundstate = Some(GroundStateSpec::new(0.1));
            c.sweep = Some(SweepSpec {
                eps: vec![0.025, 0.04, 0.055, 0.07, 0.09],
                ..Default::default()
            });
            c.notes.push("only the range 0.025 <= eps <= 0.09 is stated; five values chosen".into());
            c
        }
        "fig12" => {
            let mut c = base(id, GridSpec::pi(40.0, 1 << 14), exp(0.025, 1.0));
            evolve(&mut c, Stepper::Irk4, 0.001, 100.0, scaled(ProfileSpec::NumericGs { omega: 0.1 }, 1.0));
            sweep_amplitudes(&mut c, &[0.9, 0.99, 1.0, 1.1, 1.2]);
            c.notes.push("eps = 0.025 from the caption and file names; eps = 0.5 admits no ground state at omega = 0.1".into());
            c.notes.push("omega not stated; 0.1 as for the exponential ground states".into());
            c.notes.push("file names give horizons 15 to 100 per amplitude; one horizon of 100 used".into());
            c
        }
        "fig13" => {
            let mut c = base(id, GridSpec::pi(10.0, 1 << 14), exp(1.0, 1.0));
            let init = InitialSpec {
                profile: ProfileSpec::Polynomial { amplitude: 2.5, n: 4.0 },
                scale: 1.0,
                phase_b: 4.0,
            };
            evolve(&mut c, Stepper::SplitStep, 1e-5, 2.0, init);
            c.action = Action::Sweep;
            c.sweep = Some(SweepSpec {
                b: vec![4.0, -4.0],
                ..Default::default()
            });
            c.notes.push("profile A/(1+x^2)^2 is n = 4 in the <x>^{-n} convention used here".into());
            c.notes.push("t_end not stated; 2 chosen".into());
            c.notes.push("split-step chosen for cost at dt = 1e-5".into());
            c
        }
        "fig14a" | "fig14b" => {
            let (b, dt, t_end) = if id == "fig14a" { (0.1, 1e-3, 2.0) } else { (0.75, 1e-5, 1.3162) };
            let mut c = base(id, GridSpec::pi(40.0, 1 << 14), exp(0.05, 1.0));
            evolve(&mut c, Stepper::Irk4, dt, t_end, scaled(ProfileSpec::NumericGs { omega: 0.1 }, 1.0));
            c.action = Action::Sweep;
            c.sweep = Some(SweepSpec {
                b: vec![b, -b],
                ..Default::default()
            });
            c.notes.push("eps = 0.05, dt and t_end read off the file names".into());
            c.notes.push("grid width and omega not stated; L = 40 pi, omega = 0.1 chosen".into());
            c
        }
        "exp-conditions" => {
            let mut c = base(id, GridSpec::pi(10.0, 256), exp(1.0, 1.0));
            c.action = Action::CheckConditions;
            c.conditions = Some(ConditionsSpec::default());
            c
        }
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}`; known: {}", ids().collect::<Vec<_>>().join(", ")),
            ))
        }
    };
    c.validate()?;
    Ok(c)
}
