//! Synthesis of quantum circuits from rotation-based decision diagrams.
//!
//! Functions from Boolean inputs to rotation angles are held as canonical
//! decision diagrams ([`rbdd`]), split recursively into factored forms
//! ([`factor`]), and compiled into controlled-rotation circuits
//! ([`circuit`]) that are checked by state-vector simulation ([`sim`]).

pub mod angle;
pub mod circuit;
pub mod cli;
pub mod factor;
pub mod families;
pub mod rbdd;
pub mod sim;
