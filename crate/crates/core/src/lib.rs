pub mod grid;
pub mod linsolve;
pub mod physics;
pub mod steppers;
pub mod experiments;
pub mod io;
