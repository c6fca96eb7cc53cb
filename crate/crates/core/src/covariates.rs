//! Respondent characteristics and their coding as utility covariates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! categories {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $s),+ }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<$name> {
                match s {
                    $($s => Ok($name::$variant),)+
                    _ => Err(Error::Data(format!(concat!("unknown ", stringify!($name), " `{}`"), s))),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<$name, D::Error> {
                let s = alloc::string::String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

categories!(Education {
    Graduate => "graduate",
    Bachelor => "bachelor",
    Associate => "associate",
    CollegeOrLess => "college_or_less",
});

categories!(Dwelling { Owned => "owned", Renting => "renting" });

categories!(
    /// Ordered household income brackets.
    IncomeBracket {
        Under25k => "under_25k",
        From25kTo50k => "25k_50k",
        From50kTo75k => "50k_75k",
        From75kTo100k => "75k_100k",
        From100kTo150k => "100k_150k",
        Over150k => "150k_plus",
    }
);

categories!(State { NewYork => "new_york", Other => "other" });

categories!(PurchaseFrequency {
    TwoPlusPerWeek => "two_plus_per_week",
    OnceAWeek => "once_a_week",
    TwoThreeAMonth => "two_three_a_month",
    OnceAMonth => "once_a_month",
});

categories!(Gender { Male => "male", Female => "female" });

categories!(
    /// Ordered age brackets.
    AgeBracket {
        From18To24 => "18_24",
        From25To34 => "25_34",
        From35To44 => "35_44",
        From45To54 => "45_54",
        From55To64 => "55_64",
        Over65 => "65_plus",
    }
);

categories!(HouseholdType {
    CoupleNoChildren => "couple_no_children",
    CoupleWithChildren => "couple_with_children",
    OneParent => "one_parent",
    SinglePerson => "single_person",
    Other => "other",
});

/// Characteristics of one respondent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RespondentProfile {
    pub education: Education,
    pub dwelling: Dwelling,
    pub household_size: u8,
    pub income_bracket: IncomeBracket,
    pub state: State,
    pub purchase_frequency: PurchaseFrequency,
    pub gender: Gender,
    pub age_bracket: AgeBracket,
    pub household_type: HouseholdType,
}

/// A profile field; each covariate column depends on exactly one field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Field {
    Education,
    Dwelling,
    HouseholdSize,
    IncomeBracket,
    State,
    PurchaseFrequency,
    Gender,
    AgeBracket,
    HouseholdType,
}

impl Field {
    pub const ALL: [Field; 9] = [
        Field::Education,
        Field::Dwelling,
        Field::HouseholdSize,
        Field::IncomeBracket,
        Field::State,
        Field::PurchaseFrequency,
        Field::Gender,
        Field::AgeBracket,
        Field::HouseholdType,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Education => "education",
            Field::Dwelling => "dwelling",
            Field::HouseholdSize => "household_size",
            Field::IncomeBracket => "income_bracket",
            Field::State => "state",
            Field::PurchaseFrequency => "purchase_frequency",
            Field::Gender => "gender",
            Field::AgeBracket => "age_bracket",
            Field::HouseholdType => "household_type",
        }
    }

    /// Parses a category name of this field into its numeric code.
    pub fn parse_code(self, s: &str) -> Result<u32> {
        Ok(match self {
            Field::Education => s.parse::<Education>()?.index() as u32,
            Field::Dwelling => s.parse::<Dwelling>()?.index() as u32,
            Field::HouseholdSize => match s.parse::<u8>() {
                Ok(n) if n >= 1 => n as u32,
                _ => return Err(Error::Data(format!("invalid household size `{s}`"))),
            },
            Field::IncomeBracket => s.parse::<IncomeBracket>()?.index() as u32,
            Field::State => s.parse::<State>()?.index() as u32,
            Field::PurchaseFrequency => s.parse::<PurchaseFrequency>()?.index() as u32,
            Field::Gender => s.parse::<Gender>()?.index() as u32,
            Field::AgeBracket => s.parse::<AgeBracket>()?.index() as u32,
            Field::HouseholdType => s.parse::<HouseholdType>()?.index() as u32,
        })
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = Error;
    fn from_str(s: &str) -> Result<Field> {
        Field::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Data(format!("unknown respondent field `{s}`")))
    }
}

fn pick<T: Copy>(all: &[T], code: u32, field: Field) -> Result<T> {
    all.get(code as usize)
        .copied()
        .ok_or_else(|| Error::Data(format!("code {code} out of range for {field}")))
}

impl RespondentProfile {
    pub fn code(&self, field: Field) -> u32 {
        match field {
            Field::Education => self.education.index() as u32,
            Field::Dwelling => self.dwelling.index() as u32,
            Field::HouseholdSize => self.household_size as u32,
            Field::IncomeBracket => self.income_bracket.index() as u32,
            Field::State => self.state.index() as u32,
            Field::PurchaseFrequency => self.purchase_frequency.index() as u32,
            Field::Gender => self.gender.index() as u32,
            Field::AgeBracket => self.age_bracket.index() as u32,
            Field::HouseholdType => self.household_type.index() as u32,
        }
    }

    pub fn set(&mut self, field: Field, code: u32) -> Result<()> {
        match field {
            Field::Education => self.education = pick(Education::ALL, code, field)?,
            Field::Dwelling => self.dwelling = pick(Dwelling::ALL, code, field)?,
            Field::HouseholdSize => {
                self.household_size = u8::try_from(code)
                    .ok()
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| Error::Data(format!("invalid household size {code}")))?
            }
            Field::IncomeBracket => self.income_bracket = pick(IncomeBracket::ALL, code, field)?,
            Field::State => self.state = pick(State::ALL, code, field)?,
            Field::PurchaseFrequency => self.purchase_frequency = pick(PurchaseFrequency::ALL, code, field)?,
            Field::Gender => self.gender = pick(Gender::ALL, code, field)?,
            Field::AgeBracket => self.age_bracket = pick(AgeBracket::ALL, code, field)?,
            Field::HouseholdType => self.household_type = pick(HouseholdType::ALL, code, field)?,
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.household_size == 0 {
            return Err(Error::Data("household size must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for RespondentProfile {
    fn default() -> Self {
        RespondentProfile {
            education: Education::Bachelor,
            dwelling: Dwelling::Owned,
            household_size: 3,
            income_bracket: IncomeBracket::From75kTo100k,
            state: State::NewYork,
            purchase_frequency: PurchaseFrequency::OnceAWeek,
            gender: Gender::Female,
            age_bracket: AgeBracket::From25To34,
            household_type: HouseholdType::CoupleWithChildren,
        }
    }
}

/// Covariate column ids, in coding order.
pub const COVARIATE_COLUMNS: [&str; 11] = [
    "education.graduate",
    "education.bachelor",
    "dwelling.owned",
    "household_size",
    "income_sq",
    "state.new_york",
    "purchase_frequency.two_plus_per_week",
    "gender.female",
    "age",
    "household_type.couple_no_children",
    "household_type.one_parent",
];

/// Field each covariate column depends on.
pub const COVARIATE_FIELDS: [Field; 11] = [
    Field::Education,
    Field::Education,
    Field::Dwelling,
    Field::HouseholdSize,
    Field::IncomeBracket,
    Field::State,
    Field::PurchaseFrequency,
    Field::Gender,
    Field::AgeBracket,
    Field::HouseholdType,
    Field::HouseholdType,
];

pub fn covariate_index(id: &str) -> Option<usize> {
    COVARIATE_COLUMNS.iter().position(|c| *c == id)
}

/// Standardization of the ordinal income and age brackets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateCoder {
    pub income_mean: f64,
    pub income_sd: f64,
    pub age_mean: f64,
    pub age_sd: f64,
}

impl Default for CovariateCoder {
    fn default() -> Self {
        CovariateCoder { income_mean: 0.0, income_sd: 1.0, age_mean: 0.0, age_sd: 1.0 }
    }
}

fn moments(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let total: f64 = pairs.clone().map(|(_, w)| w).sum();
    let mean = pairs.clone().map(|(x, w)| x * w).sum::<f64>() / total;
    let var = pairs.map(|(x, w)| w * (x - mean) * (x - mean)).sum::<f64>() / total;
    let sd = libm::sqrt(var);
    (mean, if sd > 0.0 { sd } else { 1.0 })
}

impl CovariateCoder {
    /// Fits the bracket standardization to a set of respondents, equally weighted.
    pub fn fit<'a>(profiles: impl IntoIterator<Item = &'a RespondentProfile>) -> Result<Self> {
        let v: Vec<&RespondentProfile> = profiles.into_iter().collect();
        if v.is_empty() {
            return Err(Error::Data("no respondents to fit the covariate coding".into()));
        }
        let (income_mean, income_sd) = moments(v.iter().map(|p| (p.income_bracket.index() as f64, 1.0)));
        let (age_mean, age_sd) = moments(v.iter().map(|p| (p.age_bracket.index() as f64, 1.0)));
        Ok(CovariateCoder { income_mean, income_sd, age_mean, age_sd })
    }

    /// Fits the bracket standardization to the marginals of a population.
    pub fn fit_population(pop: &Population) -> Self {
        let (income_mean, income_sd) =
            moments(pop.shares(Field::IncomeBracket).iter().map(|(c, w)| (*c as f64, *w)));
        let (age_mean, age_sd) = moments(pop.shares(Field::AgeBracket).iter().map(|(c, w)| (*c as f64, *w)));
        CovariateCoder { income_mean, income_sd, age_mean, age_sd }
    }

    /// Coded covariate vector, ordered as [`COVARIATE_COLUMNS`].
    pub fn encode(&self, p: &RespondentProfile) -> [f64; 11] {
        let pm = |b: bool| if b { 1.0 } else { -1.0 };
        let (graduate, bachelor) = match p.education {
            Education::Graduate => (1.0, 0.0),
            Education::Bachelor => (0.0, 1.0),
            _ => (-1.0, -1.0),
        };
        let (no_children, one_parent) = match p.household_type {
            HouseholdType::CoupleNoChildren => (1.0, 0.0),
            HouseholdType::OneParent => (0.0, 1.0),
            _ => (-1.0, -1.0),
        };
        let income = (p.income_bracket.index() as f64 - self.income_mean) / self.income_sd;
        let age = (p.age_bracket.index() as f64 - self.age_mean) / self.age_sd;
        [
            graduate,
            bachelor,
            pm(p.dwelling == Dwelling::Owned),
            p.household_size as f64,
            income * income,
            pm(p.state == State::NewYork),
            pm(p.purchase_frequency == PurchaseFrequency::TwoPlusPerWeek),
            pm(p.gender == Gender::Female),
            age,
            no_children,
            one_parent,
        ]
    }

    /// Covariate utility `γ·z` of a profile.
    pub fn utility(&self, gamma: &BTreeMap<alloc::string::String, f64>, p: &RespondentProfile) -> f64 {
        let z = self.encode(p);
        let mut u = 0.0;
        for (i, col) in COVARIATE_COLUMNS.iter().enumerate() {
            if let Some(g) = gamma.get(*col) {
                u += g * z[i];
            }
        }
        u
    }
}

/// Independent marginal shares of each profile field.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    shares: BTreeMap<Field, Vec<(u32, f64)>>,
}

impl Population {
    /// Every field must be present with non-negative shares summing to one.
    pub fn new(shares: BTreeMap<Field, Vec<(u32, f64)>>) -> Result<Population> {
        let mut probe = RespondentProfile::default();
        for f in Field::ALL {
            let s = shares.get(&f).ok_or_else(|| Error::Data(format!("population lacks field {f}")))?;
            if s.is_empty() {
                return Err(Error::Data(format!("population field {f} is empty")));
            }
            let mut seen = Vec::new();
            for (c, w) in s {
                probe.set(f, *c)?;
                if !(*w >= 0.0) || !w.is_finite() {
                    return Err(Error::Data(format!("negative share in population field {f}")));
                }
                if seen.contains(c) {
                    return Err(Error::Data(format!("duplicate category in population field {f}")));
                }
                seen.push(*c);
            }
            let total: f64 = s.iter().map(|(_, w)| w).sum();
            if libm::fabs(total - 1.0) > 1e-6 {
                return Err(Error::Data(format!("population field {f} shares sum to {total}")));
            }
        }
        Ok(Population { shares })
    }

    /// Population concentrated on a single profile.
    pub fn point(p: &RespondentProfile) -> Population {
        let shares = Field::ALL.iter().map(|f| (*f, alloc::vec![(p.code(*f), 1.0)])).collect();
        Population { shares }
    }

    pub fn shares(&self, field: Field) -> &[(u32, f64)] {
        &self.shares[&field]
    }

    /// Per-field lists of `(share, utility contribution)`, with categories of equal
    /// contribution merged. The covariate utility of a profile is the sum of its
    /// fields' contributions.
    pub fn contributions(
        &self,
        coder: &CovariateCoder,
        gamma: &BTreeMap<alloc::string::String, f64>,
    ) -> Vec<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        for f in Field::ALL {
            let mut list: Vec<(f64, f64)> = Vec::new();
            for (code, w) in self.shares(f) {
                if *w == 0.0 {
                    continue;
                }
                let mut p = RespondentProfile::default();
                p.set(f, *code).expect("validated");
                let z = coder.encode(&p);
                let mut c = 0.0;
                for (i, col) in COVARIATE_COLUMNS.iter().enumerate() {
                    if COVARIATE_FIELDS[i] == f {
                        c += gamma.get(*col).copied().unwrap_or(0.0) * z[i];
                    }
                }
                match list.iter_mut().find(|(_, x)| x.to_bits() == c.to_bits()) {
                    Some(e) => e.0 += w,
                    None => list.push((*w, c)),
                }
            }
            out.push(list);
        }
        out
    }

    /// Draws a profile from the marginals given uniforms in `[0, 1)`, one per field.
    pub fn sample(&self, uniforms: [f64; 9]) -> RespondentProfile {
        let mut p = RespondentProfile::default();
        for (k, f) in Field::ALL.iter().enumerate() {
            let s = self.shares(*f);
            let mut acc = 0.0;
            let mut code = s[s.len() - 1].0;
            for (c, w) in s {
                acc += w;
                if uniforms[k] < acc {
                    code = *c;
                    break;
                }
            }
            p.set(*f, code).expect("validated");
        }
        p
    }

    pub fn field_names() -> Vec<alloc::string::String> {
        Field::ALL.iter().map(|f| f.as_str().to_string()).collect()
    }
}
