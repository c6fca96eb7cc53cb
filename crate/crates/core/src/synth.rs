//! Synthetic respondents answering a design under a known model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::covariates::{Population, RespondentProfile};
use crate::dataset::{ChoiceObservation, Dataset};
use crate::design::Design;
use crate::error::{Error, Result};
use crate::math::logit;
use crate::model::Model;
use crate::schema::{AttributeSchema, Season};
use crate::simulate::systematic_utility;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeasonAssignment {
    All(Season),
    /// Even respondents in winter, odd ones in summer.
    Alternate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthOptions {
    pub respondents: usize,
    pub seed: u64,
    pub seasons: SeasonAssignment,
    /// Id of the first respondent.
    pub first_id: u32,
}

/// Draws stated quantities from the model's latent-index process: respondent
/// `r` answers every task of block `r mod blocks`, with logistic noise on the
/// latent index and quantity equal to the number of scaled thresholds below it.
pub fn synthesize(
    schema: &AttributeSchema,
    model: &Model,
    design: &Design,
    population: &Population,
    opts: &SynthOptions,
) -> Result<Dataset> {
    if design.tasks.is_empty() || design.blocks == 0 {
        return Err(Error::Design("design has no tasks".into()));
    }
    model.validate(schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut by_block: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, t) in design.tasks.iter().enumerate() {
        by_block.entry(t.block).or_default().push(i);
    }
    let blocks: Vec<&Vec<usize>> = by_block.values().collect();
    let mut observations = Vec::new();
    let mut respondents = BTreeMap::new();
    for r in 0..opts.respondents {
        let id = opts.first_id + r as u32;
        let season = match opts.seasons {
            SeasonAssignment::All(s) => s,
            SeasonAssignment::Alternate if r % 2 == 0 => Season::Winter,
            SeasonAssignment::Alternate => Season::Summer,
        };
        let mut u = [0.0; 9];
        for x in &mut u {
            *x = rng.random::<f64>();
        }
        let profile: RespondentProfile = population.sample(u);
        let gz = model.scaling.utility(&model.params.gamma, &profile);
        respondents.insert(id, profile);
        for &ti in blocks[r % blocks.len()] {
            let task = &design.tasks[ti];
            for (a, product) in task.alternatives.iter().enumerate() {
                let row = schema.build_row(product, season)?;
                let cell = row.cell();
                let w = systematic_utility(schema, model, &row)? + gz;
                let tau = model.thresholds(&cell).ok_or_else(|| Error::Spec(format!("no thresholds for {cell}")))?;
                let lambda = model.params.lambda(&cell);
                let e = logit(rng.random_range(f64::EPSILON..1.0));
                let latent = w + e;
                let q = tau.iter().filter(|t| **t / lambda < latent).count() as u8;
                observations.push(ChoiceObservation { respondent: id, task: task.id, alternative: a as u32, row, quantity: q });
            }
        }
    }
    Dataset::new(schema, observations, respondents)
}
