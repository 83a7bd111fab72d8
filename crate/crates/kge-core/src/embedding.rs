//! Embedding tables, their initialization, and per-model parameter geometry.
//!
//! The embedding size `d` always counts adjustable scalars per embedding: a
//! complex coordinate contributes two scalars (real part, imaginary part).
//! Complex rows store the `d/2` real parts followed by the `d/2` imaginary
//! parts. RotatE relations are stored as `d/2` phase angles, so their
//! rotation coordinates `(cos theta, sin theta)` have unit modulus by
//! construction.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported score-function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    TransE,
    RotatE,
    DistMult,
    ComplEx,
    DistMultN3,
    ComplExN3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::TransE,
        ModelKind::RotatE,
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::DistMultN3,
        ModelKind::ComplExN3,
    ];

    pub fn parse(name: &str) -> Option<ModelKind> {
        match name.to_ascii_lowercase().as_str() {
            "transe" => Some(ModelKind::TransE),
            "rotate" => Some(ModelKind::RotatE),
            "distmult" => Some(ModelKind::DistMult),
            "complex" => Some(ModelKind::ComplEx),
            "distmultn3" => Some(ModelKind::DistMultN3),
            "complexn3" => Some(ModelKind::ComplExN3),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::TransE => "TransE",
            ModelKind::RotatE => "RotatE",
            ModelKind::DistMult => "DistMult",
            ModelKind::ComplEx => "ComplEx",
            ModelKind::DistMultN3 => "DistMultN3",
            ModelKind::ComplExN3 => "ComplExN3",
        }
    }

    /// Entity coordinates are complex for these kinds, so `d` must be even.
    pub fn is_complex(&self) -> bool {
        matches!(
            self,
            ModelKind::RotatE | ModelKind::ComplEx | ModelKind::ComplExN3
        )
    }

    /// Kinds trained with the multiclass N3-regularized loss by default.
    pub fn is_n3(&self) -> bool {
        matches!(self, ModelKind::DistMultN3 | ModelKind::ComplExN3)
    }

    /// Width of a relation row for entity width `d`. RotatE stores phase
    /// angles, one per complex coordinate.
    pub fn relation_width(&self, d: usize) -> usize {
        match self {
            ModelKind::RotatE => d / 2,
            _ => d,
        }
    }

    /// Rejects odd embedding sizes for the complex-geometry kinds.
    pub fn check_width(&self, d: usize) -> Result<()> {
        if self.is_complex() && d % 2 != 0 {
            return Err(Error::OddComplexWidth {
                kind: self.name().to_string(),
                width: d,
            });
        }
        Ok(())
    }
}

/// Norm order used by the TransE distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn parse(value: usize) -> Option<Norm> {
        match value {
            1 => Some(Norm::L1),
            2 => Some(Norm::L2),
            _ => None,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

/// Initialization distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// U(-a, a) with `a = sqrt(6 / width)`.
    Uniform,
    /// N(0, sigma^2) with `sigma = sqrt(2 / width)`.
    Normal,
}

/// Bound `a` of the uniform initialization for a given row width.
pub fn xavier_uniform_bound(width: usize) -> f64 {
    (6.0 / width as f64).sqrt()
}

/// Standard deviation `sigma` of the normal initialization for a given width.
pub fn xavier_normal_sigma(width: usize) -> f64 {
    (2.0 / width as f64).sqrt()
}

/// A dense row-major matrix of 64-bit parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: usize,
    width: usize,
    values: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, width: usize) -> Result<Self> {
        if rows == 0 || width == 0 {
            return Err(Error::EmptyTable { rows, width });
        }
        Ok(EmbeddingTable {
            rows,
            width,
            values: vec![0.0; rows * width],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.values[index * self.width..(index + 1) * self.width]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.values[index * self.width..(index + 1) * self.width]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Scales every value by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// Fills a `rows x width` table i.i.d. from the chosen distribution, with
/// `d_in = width` and `d_out = 0`.
pub fn xavier_init(
    rows: usize,
    width: usize,
    mode: InitMode,
    rng: &mut ChaCha8Rng,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::zeros(rows, width)?;
    match mode {
        InitMode::Uniform => {
            let a = xavier_uniform_bound(width);
            for v in table.values_mut() {
                *v = rng.gen_range(-a..a);
            }
        }
        InitMode::Normal => {
            let sigma = xavier_normal_sigma(width);
            for v in table.values_mut() {
                *v = sigma * standard_normal(rng);
            }
        }
    }
    Ok(table)
}

/// Box-Muller draw from two uniforms; the loop only guards against u1 = 0.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen_range(0.0..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        if u1 > 0.0 {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

/// One replica's parameters: entity and relation tables plus geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    kind: ModelKind,
    entity: EmbeddingTable,
    relation: EmbeddingTable,
    d: usize,
    seed: u64,
    norm: Norm,
}

/// Scale applied to the uniform init of the N3 variants, standing in for
/// their small-magnitude initialization.
pub const N3_INIT_SCALE: f64 = 0.1;

impl ModelParams {
    /// Initializes a model: normal Xavier for the distance-based kinds
    /// (TransE, RotatE), uniform for the semantic-matching kinds (DistMult,
    /// ComplEx), uniform scaled by [`N3_INIT_SCALE`] for the N3 variants.
    pub fn init(
        kind: ModelKind,
        entities: usize,
        relations: usize,
        d: usize,
        seed: u64,
    ) -> Result<Self> {
        kind.check_width(d)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mode = match kind {
            ModelKind::TransE | ModelKind::RotatE => InitMode::Normal,
            _ => InitMode::Uniform,
        };
        let mut entity = xavier_init(entities, d, mode, &mut rng)?;
        let mut relation = xavier_init(relations, kind.relation_width(d), mode, &mut rng)?;
        if kind.is_n3() {
            entity.scale(N3_INIT_SCALE);
            relation.scale(N3_INIT_SCALE);
        }
        Ok(ModelParams {
            kind,
            entity,
            relation,
            d,
            seed,
            norm: Norm::L2,
        })
    }

    /// Wraps existing tables, checking the geometry.
    pub fn from_tables(
        kind: ModelKind,
        entity: EmbeddingTable,
        relation: EmbeddingTable,
        seed: u64,
    ) -> Result<Self> {
        let d = entity.width();
        kind.check_width(d)?;
        let expected = kind.relation_width(d);
        if relation.width() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: relation.width(),
                context: format!("relation width for {}", kind.name()),
            });
        }
        Ok(ModelParams {
            kind,
            entity,
            relation,
            d,
            seed,
            norm: Norm::L2,
        })
    }

    /// Sets the TransE norm order; other kinds ignore it.
    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// Adjustable scalars per entity embedding.
    pub fn embedding_size(&self) -> usize {
        self.d
    }

    /// Adjustable scalars per relation embedding (`d/2` for RotatE).
    pub fn relation_width(&self) -> usize {
        self.relation.width()
    }

    pub fn entity_count(&self) -> usize {
        self.entity.rows()
    }

    pub fn relation_count(&self) -> usize {
        self.relation.rows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entity_table(&self) -> &EmbeddingTable {
        &self.entity
    }

    pub fn relation_table(&self) -> &EmbeddingTable {
        &self.relation
    }

    pub fn entity_table_mut(&mut self) -> &mut EmbeddingTable {
        &mut self.entity
    }

    pub fn relation_table_mut(&mut self) -> &mut EmbeddingTable {
        &mut self.relation
    }

    pub(crate) fn check_ids(&self, head: usize, relation: usize, tail: usize) -> Result<()> {
        if head >= self.entity.rows() {
            return Err(Error::EntityOutOfBounds {
                id: head,
                count: self.entity.rows(),
            });
        }
        if tail >= self.entity.rows() {
            return Err(Error::EntityOutOfBounds {
                id: tail,
                count: self.entity.rows(),
            });
        }
        if relation >= self.relation.rows() {
            return Err(Error::RelationOutOfBounds {
                id: relation,
                count: self.relation.rows(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_bound_matches_closed_form() {
        let a = xavier_uniform_bound(200);
        assert!((a - 0.17320508).abs() < 1e-7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let table = xavier_init(50, 200, InitMode::Uniform, &mut rng).unwrap();
        assert!(table.values().iter().all(|v| v.abs() <= a));
    }

    #[test]
    fn normal_sigma_is_one_at_width_two() {
        assert_eq!(xavier_normal_sigma(2), 1.0);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = ModelParams::init(ModelKind::DistMult, 5, 2, 4, 1).unwrap();
        let b = ModelParams::init(ModelKind::DistMult, 5, 2, 4, 1).unwrap();
        assert_eq!(a.entity_table().values(), b.entity_table().values());
        assert_eq!(a.relation_table().values(), b.relation_table().values());
    }

    #[test]
    fn distinct_seeds_differ() {
        let a = ModelParams::init(ModelKind::TransE, 5, 2, 200, 1).unwrap();
        let b = ModelParams::init(ModelKind::TransE, 5, 2, 200, 2).unwrap();
        assert_ne!(a.entity_table().values(), b.entity_table().values());
    }

    #[test]
    fn odd_width_rejected_for_complex_kinds() {
        let err = ModelParams::init(ModelKind::RotatE, 5, 2, 7, 1).unwrap_err();
        assert!(matches!(err, Error::OddComplexWidth { .. }));
        assert!(ModelParams::init(ModelKind::TransE, 5, 2, 7, 1).is_ok());
    }

    #[test]
    fn rotate_relation_rows_are_phases() {
        let params = ModelParams::init(ModelKind::RotatE, 5, 2, 8, 1).unwrap();
        assert_eq!(params.relation_width(), 4);
        assert_eq!(params.embedding_size(), 8);
    }

    #[test]
    fn n3_init_is_scaled_down() {
        let base = ModelParams::init(ModelKind::DistMult, 20, 4, 16, 9).unwrap();
        let scaled = ModelParams::init(ModelKind::DistMultN3, 20, 4, 16, 9).unwrap();
        for (a, b) in base
            .entity_table()
            .values()
            .iter()
            .zip(scaled.entity_table().values())
        {
            assert!((a * N3_INIT_SCALE - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_sized_tables_rejected() {
        assert!(EmbeddingTable::zeros(0, 4).is_err());
        assert!(EmbeddingTable::zeros(4, 0).is_err());
    }

    #[test]
    fn uniform_moments_small_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let table = xavier_init(1000, 100, InitMode::Uniform, &mut rng).unwrap();
        let n = table.values().len() as f64;
        let mean = table.values().iter().sum::<f64>() / n;
        let a = xavier_uniform_bound(100);
        // 3 sigma of the sample mean of U(-a, a).
        assert!(mean.abs() < 3.0 * a / (3.0f64).sqrt() / n.sqrt());
    }
}
