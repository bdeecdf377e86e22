//! Agent-based tax compliance simulator.
//!
//! A population of agents earns salaries, buys goods and self-reports income
//! and sales taxes. Each reporting decision runs through two stages: a
//! language-model backend proposes an amount ([`llm`]), and a per-agent deep
//! Q-network picks the final payment fraction ([`dqn`]). The [`world`] module
//! advances the economy step by step and the [`experiments`] module runs
//! repeated, seeded batteries on top of it.

pub mod agent;
pub mod calibration;
pub mod dqn;
pub mod econ;
pub mod experiments;
pub mod export;
pub mod llm;
pub mod metrics;
pub mod money;
pub mod seed;
pub mod world;

pub use calibration::{load_calibration, CalibrationData, CalibrationPaths};
pub use econ::{
    compute_income_tax, compute_penalty, compute_sales_tax, public_goods_value, EnforcementPolicy,
    Good, IncomeTaxSchedule, PublicGoodsFunction, PublicGoodsKind, PublicGoodsMode, SalesTaxRate,
};
pub use money::Money;
pub use world::{init_world, run, RunResult, SimError, SimulationConfig, World};
