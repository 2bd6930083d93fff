//! Overlapping coalition formation engine for heterogeneous delivery fleets.
//!
//! Agents with divisible payload capacity join task coalitions through
//! unilateral ADD/REMOVE moves that strictly lower the global logistics cost.
//! Task selection is delegated to a [`policy::Policy`], which may be a
//! transformer actor trained with soft actor-critic ([`tsac`]).

pub mod cost;
pub mod game;
pub mod policy;
pub mod routing;
pub mod scenario;
pub mod tsac;
