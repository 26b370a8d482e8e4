use std::process::ExitCode;

use levy_fk::verify::{format_table, run_criterion, Suite};

fn main() -> ExitCode {
    println!("acceptance criteria");
    let mut outcomes = Vec::new();
    for id in Suite::Full.criteria() {
        let o = run_criterion(id);
        println!("{}", o.line());
        outcomes.push(o);
    }
    let table = format_table(&outcomes);
    println!("{}", table.lines().last().unwrap_or_default());
    if outcomes.iter().all(|o| o.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
