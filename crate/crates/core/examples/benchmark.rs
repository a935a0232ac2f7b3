//! A small benchmark matrix: three generated scenes, every method, one
//! seed. Prints the CSV report and the per-method aggregates.

use contraplan::bench::{report_to_string, run_benchmark, ReportFormat, RunConfig};

fn main() -> contraplan::Result<()> {
    let cfg = RunConfig {
        generated_scenes: 3,
        ..RunConfig::shelf_benchmark()
    };
    let report = run_benchmark(&cfg, None)?;
    print!("{}", report_to_string(&report, ReportFormat::Csv)?);
    println!();
    for a in &report.aggregates {
        let success = a.success.expect("every method ran");
        let exec = a.execution_time_s.expect("every method ran");
        println!(
            "{:<4} success {:.2} ± {:.2}   execution {:.3} ± {:.3} s",
            a.method.as_str(),
            success.mean,
            success.ci95.unwrap_or(0.0),
            exec.mean,
            exec.ci95.unwrap_or(0.0)
        );
    }
    println!("hidden-world reads by the planner: {}", report.audit.planner_reads);
    Ok(())
}
