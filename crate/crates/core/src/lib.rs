//! Recursive hybrid automata: model, exact semantics, and decision procedures.

pub mod cm;
pub mod contraction;
pub mod feasibility;
pub mod gadgets;
pub mod model;
pub mod parser;
pub mod rational;
pub mod region;
pub mod rsm;
pub mod semantics;
pub mod tbreach;
pub mod testgen;
pub mod trace;

pub use model::{
    AtomicConstraint, BoxDecl, BoxId, Component, Edge, EdgeId, Location, ModelClass, ModelKind,
    Node, NodeId, RateVector, RectConstraint, Relation, RhaModel, Valuation, VarId,
};
pub use rational::Rational;
