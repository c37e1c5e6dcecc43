//! Governing equations: constant-coefficient operator algebra, the scalar
//! equation of the complete motion and its recursive derivation, finite
//! difference residual checks, and the conditional law on a velocity subset.

mod conditional;
mod operator;
mod residual;

pub use conditional::{
    conditional_equivalence, conditioning_probability, nonhomogeneous_masses, subset_alpha, ConditionalConfig,
    ConditionalReport, CoordinateKs,
};
pub use operator::{
    build_dth_order_operator, closed_gamma_n, closed_lambda_n, recursion_operator, recursion_sequence, Coefficient,
    OperatorPolynomial, RecursionVariant,
};
pub use residual::{
    apply_operator, complete_terminal_evaluator, convergence_table, residual_dth_order, residual_operator,
    residual_system, system_residual_at, ConvergenceRow, ConvergenceTable, EvalBox,
};
