//! Validated choice observations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::covariates::RespondentProfile;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, Cell, DesignRow, Season};

/// Largest quantity a respondent can state.
pub const MAX_QUANTITY: u8 = 10;
/// Number of ordered quantity categories, `0..=MAX_QUANTITY`.
pub const CATEGORIES: usize = MAX_QUANTITY as usize + 1;

/// One stated quantity for one alternative of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceObservation {
    pub respondent: u32,
    pub task: u32,
    pub alternative: u32,
    pub row: DesignRow,
    pub quantity: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<ChoiceObservation>,
    respondents: BTreeMap<u32, RespondentProfile>,
}

/// Counts describing a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub respondents: usize,
    pub tasks: usize,
    pub observations: usize,
    /// Quantity histogram per cell.
    pub quantities: BTreeMap<Cell, [usize; CATEGORIES]>,
}

impl Dataset {
    pub fn new(
        schema: &AttributeSchema,
        observations: Vec<ChoiceObservation>,
        respondents: BTreeMap<u32, RespondentProfile>,
    ) -> Result<Dataset> {
        let width = schema.columns().len();
        let mut keys = BTreeSet::new();
        let mut seasons: BTreeMap<u32, Season> = BTreeMap::new();
        for o in &observations {
            schema.check_cut(&o.row.cut)?;
            if o.quantity > MAX_QUANTITY {
                return Err(Error::Data(format!(
                    "respondent {} task {} alternative {}: quantity {} exceeds {}",
                    o.respondent, o.task, o.alternative, o.quantity, MAX_QUANTITY
                )));
            }
            if o.row.coded.len() != width {
                return Err(Error::Data(format!("row of respondent {} has the wrong width", o.respondent)));
            }
            if o.row.coded.iter().any(|x| !x.is_finite()) || !o.row.price.is_finite() {
                return Err(Error::Data(format!("row of respondent {} is not finite", o.respondent)));
            }
            if !keys.insert((o.respondent, o.task, o.alternative)) {
                return Err(Error::Data(format!(
                    "duplicate observation: respondent {} task {} alternative {}",
                    o.respondent, o.task, o.alternative
                )));
            }
            match seasons.get(&o.respondent) {
                Some(s) if *s != o.row.season => {
                    return Err(Error::Data(format!("respondent {} appears in both seasons", o.respondent)));
                }
                None => {
                    seasons.insert(o.respondent, o.row.season);
                }
                _ => {}
            }
            if !respondents.contains_key(&o.respondent) {
                return Err(Error::Data(format!("respondent {} has no profile", o.respondent)));
            }
        }
        for p in respondents.values() {
            p.validate()?;
        }
        Ok(Dataset { observations, respondents })
    }

    pub fn observations(&self) -> &[ChoiceObservation] {
        &self.observations
    }

    pub fn respondents(&self) -> &BTreeMap<u32, RespondentProfile> {
        &self.respondents
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn cells(&self) -> BTreeSet<Cell> {
        self.observations.iter().map(|o| o.row.cell()).collect()
    }

    pub fn seasons(&self) -> BTreeSet<Season> {
        self.observations.iter().map(|o| o.row.season).collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut quantities: BTreeMap<Cell, [usize; CATEGORIES]> = BTreeMap::new();
        let mut tasks = BTreeSet::new();
        let mut people = BTreeSet::new();
        for o in &self.observations {
            quantities.entry(o.row.cell()).or_insert([0; CATEGORIES])[o.quantity as usize] += 1;
            tasks.insert((o.respondent, o.task));
            people.insert(o.respondent);
        }
        DatasetSummary { respondents: people.len(), tasks: tasks.len(), observations: self.len(), quantities }
    }

    /// Observations of one season, with the respondents who made them.
    pub fn season(&self, season: Season) -> Dataset {
        let observations: Vec<ChoiceObservation> =
            self.observations.iter().filter(|o| o.row.season == season).cloned().collect();
        let ids: BTreeSet<u32> = observations.iter().map(|o| o.respondent).collect();
        let respondents = self.respondents.iter().filter(|(k, _)| ids.contains(k)).map(|(k, v)| (*k, *v)).collect();
        Dataset { observations, respondents }
    }

    /// Copy with every respondent id shifted by `offset`.
    pub fn with_respondent_offset(&self, offset: u32) -> Result<Dataset> {
        let shift = |id: u32| {
            id.checked_add(offset).ok_or_else(|| Error::Data("respondent id overflow".into()))
        };
        let mut observations = self.observations.clone();
        for o in &mut observations {
            o.respondent = shift(o.respondent)?;
        }
        let mut respondents = BTreeMap::new();
        for (k, v) in &self.respondents {
            respondents.insert(shift(*k)?, *v);
        }
        Ok(Dataset { observations, respondents })
    }

    /// Union of two datasets with disjoint respondents.
    pub fn merge(a: &Dataset, b: &Dataset) -> Result<Dataset> {
        if let Some(k) = a.respondents.keys().find(|k| b.respondents.contains_key(k)) {
            return Err(Error::Data(format!("respondent {k} appears in both datasets")));
        }
        let mut observations = a.observations.clone();
        observations.extend(b.observations.iter().cloned());
        let mut respondents = a.respondents.clone();
        respondents.extend(b.respondents.iter().map(|(k, v)| (*k, *v)));
        Ok(Dataset { observations, respondents })
    }

    pub fn max_respondent(&self) -> u32 {
        self.respondents.keys().next_back().copied().unwrap_or(0)
    }
}
