use thiserror::Error;

use crate::gridworld::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cell {cell} outside {rows}x{cols} grid")]
    OutOfRange { cell: Cell, rows: usize, cols: usize },

    #[error("no path from {start} to {goal}")]
    Unreachable { start: Cell, goal: Cell },

    #[error("goal {0} is no longer traversable")]
    GoalInfeasible(Cell),

    #[error("no vacant seat observed")]
    NoVacantSeat,

    #[error("scenario unsatisfiable after {attempts} attempts: {reason}")]
    Unsatisfiable { attempts: usize, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
