//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `FRACWAVE_SCALE=quick` shrinks path counts and grids;
//! `FRACWAVE_CRITERIA=1,3,7` restricts the run to the listed criteria.

use fracwave_core::acceptance::{run_criterion, Scale, CRITERIA};

#[test]
fn acceptance() {
    let scale = match std::env::var("FRACWAVE_SCALE").as_deref() {
        Ok("quick") => Scale::Quick,
        _ => Scale::Full,
    };
    let selected: Option<Vec<u8>> = std::env::var("FRACWAVE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for &(id, _) in CRITERIA {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let r = run_criterion(id, scale, None);
        println!("{}", r.line());
        if !r.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
