//! Error tables and log-log slopes for the Riccati, mean, strong and
//! adjoint metrics on the worked example.
//!
//! ```bash
//! cargo run --release --example convergence_study
//! ```

use mflq::analytic::{example_problem, ExampleSolution};
use mflq::harness::{
    bsde_convergence, mean_convergence, power_levels, riccati_convergence, strong_convergence, RateReport,
    StudyOptions,
};
use mflq::Problem;

fn show(report: &RateReport) {
    println!("{} ({})", report.metric, report.fit.status());
    for level in &report.levels {
        match level.stderr {
            Some(se) => println!("  N = {:5}  error {:.4e}  se {:.1e}  {}", level.steps, level.error, se, level.flag.as_str()),
            None => println!("  N = {:5}  error {:.4e}", level.steps, level.error),
        }
    }
    if let mflq::harness::RateFit::Fitted(fit) = report.fit {
        match fit.half_width {
            Some(hw) => println!("  slope {:.3} +/- {:.3}", fit.slope, hw),
            None => println!("  slope {:.3}", fit.slope),
        }
    }
}

pub fn run() -> mflq::Result<()> {
    let problem = Problem::new(example_problem())?;
    let levels = power_levels(4, 8);

    let (p, pi) = riccati_convergence(&problem, &levels, 1 << 14)?;
    let (mx, mu) = mean_convergence(&problem, &ExampleSolution, &levels)?;
    let opts = StudyOptions::new(2_000, 1);
    let (sx, su) = strong_convergence(&problem, &ExampleSolution, &levels, &opts)?;
    for report in [&p, &pi, &mx, &mu, &sx, &su] {
        show(report);
    }

    let adjoint = bsde_convergence(&problem, &ExampleSolution, &levels, &opts)?;
    for report in adjoint.reports() {
        show(report);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> mflq::Result<()> {
    run()
}
