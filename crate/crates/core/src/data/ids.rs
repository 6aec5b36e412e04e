use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Faithfulness,
    Robustness,
    Complexity,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [
        Criterion::Faithfulness,
        Criterion::Robustness,
        Criterion::Complexity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Faithfulness => "faithfulness",
            Criterion::Robustness => "robustness",
            Criterion::Complexity => "complexity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

/// The twenty evaluation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MetricId {
    // faithfulness
    Fc,
    Fe,
    Mc,
    Pf,
    Rp,
    Ins,
    Del,
    Irof,
    Road,
    Suf,
    Inf,
    // robustness
    Lle,
    Ms,
    Con,
    Ris,
    Ros,
    Rrs,
    // complexity
    Sp,
    Cp,
    Ecp,
}

impl MetricId {
    pub const ALL: [MetricId; 20] = [
        MetricId::Fc,
        MetricId::Fe,
        MetricId::Mc,
        MetricId::Pf,
        MetricId::Rp,
        MetricId::Ins,
        MetricId::Del,
        MetricId::Irof,
        MetricId::Road,
        MetricId::Suf,
        MetricId::Inf,
        MetricId::Lle,
        MetricId::Ms,
        MetricId::Con,
        MetricId::Ris,
        MetricId::Ros,
        MetricId::Rrs,
        MetricId::Sp,
        MetricId::Cp,
        MetricId::Ecp,
    ];

    pub fn criterion(self) -> Criterion {
        use MetricId::*;
        match self {
            Fc | Fe | Mc | Pf | Rp | Ins | Del | Irof | Road | Suf | Inf => Criterion::Faithfulness,
            Lle | Ms | Con | Ris | Ros | Rrs => Criterion::Robustness,
            Sp | Cp | Ecp => Criterion::Complexity,
        }
    }

    pub fn orientation(self) -> Orientation {
        use MetricId::*;
        match self {
            Fc | Fe | Mc | Ins | Irof | Suf | Con | Sp => Orientation::HigherIsBetter,
            Pf | Rp | Del | Road | Inf | Lle | Ms | Ris | Ros | Rrs | Cp | Ecp => {
                Orientation::LowerIsBetter
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        use MetricId::*;
        match self {
            Fc => "FC",
            Fe => "FE",
            Mc => "MC",
            Pf => "PF",
            Rp => "RP",
            Ins => "INS",
            Del => "DEL",
            Irof => "IROF",
            Road => "ROAD",
            Suf => "SUF",
            Inf => "INF",
            Lle => "LLE",
            Ms => "MS",
            Con => "CON",
            Ris => "RIS",
            Ros => "ROS",
            Rrs => "RRS",
            Sp => "SP",
            Cp => "CP",
            Ecp => "ECP",
        }
    }

    /// Metrics whose score for one observation depends on the whole batch.
    pub fn is_batch_level(self) -> bool {
        matches!(self, MetricId::Road | MetricId::Suf)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// The metrics that evaluate one criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriterionSet {
    pub criterion: Criterion,
    pub metric_ids: Vec<MetricId>,
}

impl CriterionSet {
    pub fn of(criterion: Criterion) -> Self {
        CriterionSet {
            criterion,
            metric_ids: MetricId::ALL
                .into_iter()
                .filter(|m| m.criterion() == criterion)
                .collect(),
        }
    }

    pub fn all() -> Vec<CriterionSet> {
        Criterion::ALL.into_iter().map(CriterionSet::of).collect()
    }
}
