//! Gaussian free field samplers and Green's functions.
//!
//! Covariance normalisation: `G(x, y)` is the expected number of visits to `y`
//! of simple random walk started at `x`, so the precision matrix is `I - P`.

pub mod bessel;
pub mod bridge;
pub mod fullspace;
pub mod green;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{BoxRegion, LatticePoint};

pub use bridge::{bridge_crossing_oracle, bridge_crossing_probability, BridgeEstimate};
pub use fullspace::{
    fullspace_green, sample_fullspace_gff_exact, FullspaceGreen, FullspaceSampler, PointFieldSample,
};
pub use green::{
    dirichlet_green, dirichlet_green_column, dirichlet_green_tol, GreenDomain, GreenTable,
};
pub use spectral::{sample_dirichlet_gff, DirichletSampler, TransformKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    DirichletSpectral,
    FullspaceDense,
}

/// Field values on every vertex of `region`, row-major.
#[derive(Clone, Debug)]
pub struct FieldSample {
    pub region: BoxRegion,
    /// Radius of the zero-boundary box the field was sampled in, if any.
    pub domain_radius: Option<u32>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub sampler_kind: SamplerKind,
}

impl FieldSample {
    /// Wrap externally produced values (tests, replays).
    pub fn from_values(
        region: BoxRegion,
        values: Vec<f64>,
        seed: u64,
        sampler_kind: SamplerKind,
    ) -> Self {
        assert_eq!(values.len(), region.volume());
        Self {
            region,
            domain_radius: None,
            values,
            seed,
            sampler_kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn value_at(&self, p: &LatticePoint) -> Result<f64> {
        Ok(self.values[self.region.linear_index(p)?])
    }

    /// The field `-phi` with identical provenance.
    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}
