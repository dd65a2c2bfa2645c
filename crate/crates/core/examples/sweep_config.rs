//! A config-driven sweep over amplitudes and chirps, written to disk and
//! classified, as the `nlslab sweep` subcommand does.

use nlslab::config::RunConfig;
use nlslab::runner::{run_sweep, verdicts_csv};

const CONFIG: &str = r#"{
  "experiment": "small-sweep",
  "action": "sweep",
  "grid": { "half_width_pi": 16, "n": 2048 },
  "stepper": { "method": "split_step", "dt": 0.002, "t_end": 4.0, "track_energy": false },
  "nonlinearity": { "family": "finite_sum", "terms": [ { "coeff": 1.0, "alpha": 6.0 } ] },
  "initial": { "profile": { "kind": "gaussian", "height": 1.0 } },
  "sweep": { "amplitudes": [0.5, 2.0], "b": [0.0, 2.0] }
}"#;

fn main() -> nlslab::Result<()> {
    let out = std::env::temp_dir().join("nlslab-sweep-example");
    let mut cfg = RunConfig::from_json(CONFIG, "inline".as_ref())?;
    cfg.output = Some(out.clone());
    cfg.validate()?;

    let rows = run_sweep(&cfg, &out, 2)?;
    print!("{}", verdicts_csv(&rows));
    println!("written under {}", out.display());
    Ok(())
}
