//! Risk-sensitive finite MDPs.
//!
//! The Bellman backup's conditional expectation is replaced by a pluggable
//! [prospect map](maps::ProspectMap) `R(v | x, a)`. Value iteration for the
//! finite-horizon, discounted and average-reward criteria ([`solvers`]),
//! entropic Q-learning and dyna-Q ([`learning`]) and an empirical axiom
//! checker ([`axioms`]) all work against that one trait.
//!
//! ```
//! use prospect_mdp::maps::CvarMap;
//! use prospect_mdp::mdp::Mdp;
//! use prospect_mdp::solvers::value_iteration_discounted;
//!
//! // a sure 1 per step, or a fair coin between 4 and -2
//! let m = Mdp::from_nested(
//!     vec![
//!         vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5]],
//!         vec![vec![1.0, 0.0, 0.0]; 2],
//!         vec![vec![1.0, 0.0, 0.0]; 2],
//!     ],
//!     vec![vec![1.0, 0.0], vec![4.0, 4.0], vec![-2.0, -2.0]],
//! )
//! .unwrap();
//! let r = value_iteration_discounted(&m, &CvarMap::new(0.5).unwrap(), 0.9, &[0.0; 3], 1e-9, 10_000).unwrap();
//! assert_eq!(r.policy[0], 0);
//! ```
//!
//! The guide in `book/` walks through each module; its listings run as
//! doctests.

pub mod maps;
pub mod mdp;
pub mod axioms;
pub mod solvers;
pub mod environments;
pub mod learning;
pub mod cli;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/mdps.md")]
    mod mdps {}
    #[doc = include_str!("../../../book/src/prospect-maps.md")]
    mod prospect_maps {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/environments.md")]
    mod environments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
