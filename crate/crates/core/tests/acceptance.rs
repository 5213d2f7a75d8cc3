//! Runs every acceptance criterion and prints one line per criterion.
//! Built without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use nhlab_core::acceptance::{run_all, CRITERIA};

fn main() -> ExitCode {
    let reports = run_all();
    assert_eq!(reports.len(), CRITERIA.len());
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<u32> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", reports.len(), reports.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
