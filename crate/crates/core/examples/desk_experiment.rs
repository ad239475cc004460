//! Runs the three-mode comparison on the desk-scale synthetic line.
//!
//! `cargo run --release --example desk_experiment -- [seed] [--per-freq]`

use std::time::Instant;

use wavefield_recovery::evaluate::compare_modes;
use wavefield_recovery::spectral::BandpassSpec;
use wavefield_recovery::synth::{generate, SynthConfig};
use wavefield_recovery::{SolveParams, SourceMask, SweepConfig, SweepMode};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.iter().find_map(|s| s.parse().ok()).unwrap_or(0);
    let truth = generate(&SynthConfig::desk_scale(seed)).expect("synthetic line");
    let mask = SourceMask::jittered(64, 4, seed).expect("mask");
    let cfg = |mode, rank, subspace_rank| SweepConfig {
        f_min: 7.0,
        f_max: 74.0,
        subspace_rank,
        weight: 0.5,
        mode,
        solve: SolveParams { rank, seed, ..SolveParams::default() },
    };
    let configs = [
        cfg(SweepMode::ConventionalWeighted, 12, 12),
        cfg(SweepMode::ConventionalWeighted, 4, 4),
        cfg(SweepMode::LimitedSubspace, 12, 4),
    ];
    let bp = BandpassSpec::new(7.0, 74.0, 3.66).unwrap();
    let start = Instant::now();
    let report = compare_modes(&truth, &mask, &configs, &bp).expect("comparison");
    eprintln!("elapsed {:.1?}", start.elapsed());
    print!("{}", report.summary_csv());
    for o in &report.outcomes {
        if let Ok(r) = &o.result {
            let lo = r.mean_snr_between(7.0, 40.5).unwrap();
            let hi = r.mean_snr_between(40.5, 74.0).unwrap();
            println!("{:>16}: lower half {lo:7.2} dB, upper half {hi:7.2} dB", o.label);
        }
    }
    if args.iter().any(|a| a == "--per-freq") {
        print!("{}", report.per_frequency_csv());
    }
}
