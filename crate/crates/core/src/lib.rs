//! Mission-level planning and reactive execution for a disk robot that moves,
//! grasps and releases disk objects among polygonal obstacles.
//!
//! The pipeline: a mission formula over manipulation predicates is parsed and
//! translated to a Buchi automaton ([`ltl`]), pruned and compiled into a task
//! graph with a distance-to-acceptance metric ([`automaton`]), walked online
//! by a symbolic controller ([`symbolic`]), grounded into navigation and
//! gripper commands ([`interface`]), and executed by a reactive velocity
//! controller ([`reactive`]) with freespace topology checks ([`topology`])
//! inside the closed-loop simulator ([`sim`]).

pub mod automaton;
pub mod geometry;
pub mod interface;
pub mod ltl;
pub mod reactive;
pub mod scene;
pub mod sim;
pub mod symbolic;
pub mod topology;
pub mod vec2;
