//! Exact laws of the position: joint densities with the displacement counts,
//! closed forms for cyclic and complete motions, face densities and the
//! probability masses of the pieces of the support.

mod complete;
mod cyclic;
mod identities;
mod masses;
pub(crate) mod master;

pub use complete::{
    complete_density, complete_joint_counts_density, complete_terminal_density, complete_terminal_densities,
    complete_series_sum, CompleteForm,
};
pub use cyclic::{cyclic_density, cyclic_density_total};
pub use identities::{
    exp_product_lhs, exp_product_rhs, identity_exp_product, identity_subset_power_sum, subset_power_sum_rhs,
};
pub use masses::{
    border_mass, face_mass_alternating, face_mass_complete, face_masses_complete, inner_mass, mass_exactly_h_plus_1,
    mass_partition, model_cumulative_rate, uniform_face_mass,
};
pub use master::{face_density, face_density_total, minimal_density, minimal_joint_density};

use serde::Serialize;

use crate::geometry::RegionClassification;

/// Which formula produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaTag {
    /// Joint law with the counts for a minimal motion.
    MinimalJoint,
    /// Joint law with the counts on a face of the support.
    FaceJoint,
    /// Point mass at a vertex.
    VertexMass,
    /// Sum of joint laws over all count vectors.
    CountSum,
    /// Cyclic motion, Bessel-type closed form.
    CyclicBessel,
    /// Complete motion, multiple power series.
    CompleteSeries,
    /// Complete motion, Bessel integral.
    CompleteIntegral,
    /// Complete motion, closed form with fixed counts.
    CompleteCounts,
    /// Non-minimal motion, contribution of a subset evaluated directly.
    NonMinimalDirect,
    /// Non-minimal motion, contribution integrated over the lift fiber.
    NonMinimalFiber,
    /// Sum of several contributions.
    Total,
}

impl FormulaTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            FormulaTag::MinimalJoint => "minimal-joint",
            FormulaTag::FaceJoint => "face-joint",
            FormulaTag::VertexMass => "vertex-mass",
            FormulaTag::CountSum => "count-sum",
            FormulaTag::CyclicBessel => "cyclic-bessel",
            FormulaTag::CompleteSeries => "complete-series",
            FormulaTag::CompleteIntegral => "complete-integral",
            FormulaTag::CompleteCounts => "complete-counts",
            FormulaTag::NonMinimalDirect => "nonminimal-direct",
            FormulaTag::NonMinimalFiber => "nonminimal-fiber",
            FormulaTag::Total => "total",
        }
    }
}

/// A density (or, on a vertex, a mass) with its provenance and truncation data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityValue {
    pub value: f64,
    pub region: RegionClassification,
    pub tag: FormulaTag,
    /// Coordinates whose Lebesgue measure the density refers to.
    pub measure_rows: Vec<usize>,
    pub terms: usize,
    /// Bound (or estimate, for generic sums) on the omitted part.
    pub remainder: f64,
}
