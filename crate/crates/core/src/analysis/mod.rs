//! Theory-side tooling: the selection-probability bound, Monte-Carlo voting
//! experiments, the quantization-bias demonstration, and the closed-form
//! communication cost model.

mod bound;
mod cost;
mod experiments;

pub use bound::{
    binomial_tail_exact, binomial_tail_log, binomial_upper_tail, theorem1_bound, SuccessProb,
    TheoremParams,
};
pub use cost::{communication_cost_model, CostModelInput};
pub use experiments::{
    machines_tradeoff_experiment, quantization_bias_experiment, voting_probability_experiment,
    wilson_interval, MachinesSweepRow, QuantBiasGains, QuantBiasInstance, QuantBiasRow,
    VoteProbConfig, VoteProbResult,
};
