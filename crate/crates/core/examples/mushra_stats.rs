//! Post-screening and per-condition statistics for a small set of MUSHRA responses.

use adsr_eval::mushra::{aggregate, post_screen, write_stats_csv, MushraResponse, ScreeningPolicy};

fn response(listener: &str, trial: usize, scores: [i64; 3]) -> MushraResponse {
    let names = ["reference", "system_a", "lowpass_3500"];
    MushraResponse {
        listener: listener.into(),
        trial: format!("t{trial}"),
        scores: names.iter().map(|n| n.to_string()).zip(scores).collect(),
        timestamp_ms: 0,
        client: serde_json::Value::Null,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut responses = Vec::new();
    for t in 0..8 {
        responses.push(response("alice", t, [100, 70 + t as i64, 20]));
        responses.push(response("bob", t, [95, 60 + 2 * t as i64, 25]));
        // Misses the hidden reference in half the trials.
        responses.push(response("carol", t, [if t % 2 == 0 { 40 } else { 100 }, 90, 30]));
    }
    let screened = post_screen(&responses, &ScreeningPolicy::default());
    for e in &screened.excluded {
        println!("excluded {} ({} of {} trials failed)", e.listener, e.failed_trials.len(), e.trials);
    }
    let stats = aggregate(&screened.kept)?;
    write_stats_csv(&stats, std::io::stdout())?;
    Ok(())
}
