//! Report rendering: evaluation CSV plus a human-readable summary, sweep
//! tables, loss curves, and episode-log text records.

use rummage_core::eval::{EvalReport, SweepRow};
use rummage_core::policy::{Decision, EpisodeLog};
use rummage_core::train::LossCurve;

pub const EVAL_CSV_HEADER: &str = "scenario,num_scenes,seed,config_hash,attempts,successes,success_rate,grasp_miss,floor_contact,drag_out,not_extracted,scenes_cleared,clearance_rate,adapt_steps,mean_dp_high,max_rounds_used,incomplete_episodes";

pub fn eval_csv_row(r: &EvalReport) -> String {
    format!(
        "{},{},{},{:016x},{},{},{:.6},{},{},{},{},{},{:.6},{},{:.6},{},{}",
        r.scenario.name(),
        r.num_scenes,
        r.seed,
        r.config_hash,
        r.attempts,
        r.successes,
        r.success_rate,
        r.failure_counts[1],
        r.failure_counts[2],
        r.failure_counts[3],
        r.failure_counts[4],
        r.scenes_cleared,
        r.clearance_rate,
        r.adapt_steps,
        r.mean_dp_high,
        r.max_rounds_used,
        r.incomplete_episodes,
    )
}

pub fn eval_summary(label: &str, r: &EvalReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{label} [{}] over {} scenes (seed {}, config {:016x})\n",
        r.scenario.name(),
        r.num_scenes,
        r.seed,
        r.config_hash
    ));
    s.push_str(&format!(
        "  success rate {:.3} ({}/{} attempted retrievals)\n",
        r.success_rate, r.successes, r.attempts
    ));
    s.push_str(&format!(
        "  failures: grasp-miss {}, floor-contact {}, drag-out {}, not-extracted {}\n",
        r.failure_counts[1], r.failure_counts[2], r.failure_counts[3], r.failure_counts[4]
    ));
    s.push_str(&format!(
        "  scenes cleared {}/{} ({:.3}); adaptation steps {}, mean dP_high {:+.4}, max rounds {}\n",
        r.scenes_cleared, r.num_scenes, r.clearance_rate, r.adapt_steps, r.mean_dp_high, r.max_rounds_used
    ));
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("setting,max_rounds,random_adaptation,attempts,successes,success_rate\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6}\n",
            row.label,
            row.max_rounds,
            row.random_adaptation,
            row.report.attempts,
            row.report.successes,
            row.report.success_rate
        ));
    }
    out
}

pub fn loss_curve_csv(curve: &LossCurve) -> String {
    let mut out = String::from("epoch,train_loss,holdout_loss\n");
    for (epoch, (train, holdout)) in curve.epochs.iter().enumerate() {
        out.push_str(&format!("{epoch},{train:.8},{holdout:.8}\n"));
    }
    out
}

/// One decision per line, replayable alongside the episode seed.
pub fn episode_text(log: &EpisodeLog) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "episode scenario={} seed={} garments={}\n",
        log.scenario.name(),
        log.episode_seed,
        log.initial_garments
    ));
    for (i, step) in log.steps.iter().enumerate() {
        match step.decision {
            Decision::Adapt => {
                let a = step.adapt.as_ref().expect("adapt record");
                out.push_str(&format!(
                    "step={i} decision=adapt p_high={:.4} rounds_used={} pick={} place={} p_high_after={:.4} grasp_missed={}\n",
                    step.p_high_before, step.rounds_used_before, a.pick_index, a.place_index, a.p_high_after, a.grasp_missed
                ));
            }
            Decision::Retrieve => {
                let outcome = step.outcome.as_ref().expect("outcome");
                out.push_str(&format!(
                    "step={i} decision=retrieve forced={} p_high={:.4} index={} outcome={} clearance={:.4}\n",
                    step.forced,
                    step.p_high_before,
                    step.retrieve_index.unwrap_or(0),
                    outcome.failure_mode.name(),
                    outcome.min_target_clearance,
                ));
            }
        }
    }
    out.push_str(&format!(
        "result retrieved={} remaining={} attempts={} successes={} incomplete={}\n",
        log.retrieved.len(),
        log.remaining(),
        log.attempts,
        log.successes,
        log.incomplete
    ));
    out
}
