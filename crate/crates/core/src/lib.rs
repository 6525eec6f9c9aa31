//! Company co-occurrence networks from labeled financial news, information
//! centrality rankings, a sentiment-based RiskRank and a decline backtest.

pub mod artifacts;
pub mod backtest;
pub mod centrality;
pub mod conet;
pub mod corpus;
pub mod entity;
pub mod error;
pub mod fixture;
pub mod pipeline;
pub mod riskrank;

pub use error::{Error, Result};
