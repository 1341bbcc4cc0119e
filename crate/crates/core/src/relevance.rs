//! Category-to-relevance mappings and query construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Category, Partition, UpliftDataset};
use crate::error::{Error, Result};
use crate::metrics::Query;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelevanceScheme {
    /// TR 1, TNR 0, CR 0, CNR 1.
    Abs1,
    /// TR 1, TNR 0, CR −1, CNR 0.
    Abs2,
    /// TR 3, TNR 1, CR 0, CNR 2.
    Abs3,
    /// TR 1/|T|, TNR 0, CR −1/|C|, CNR 0.
    Rel,
}

impl RelevanceScheme {
    /// Relevance per category, indexed by [`Category::index`].
    pub fn table(self, n_treated: usize, n_control: usize) -> Result<[f64; 4]> {
        Ok(match self {
            RelevanceScheme::Abs1 => [1.0, 0.0, 0.0, 1.0],
            RelevanceScheme::Abs2 => [1.0, 0.0, -1.0, 0.0],
            RelevanceScheme::Abs3 => [3.0, 1.0, 0.0, 2.0],
            RelevanceScheme::Rel => {
                if n_treated == 0 || n_control == 0 {
                    return Err(Error::DegenerateGroup(format!(
                        "relative relevance needs both groups (|T|={n_treated}, |C|={n_control})"
                    )));
                }
                [1.0 / n_treated as f64, 0.0, -1.0 / n_control as f64, 0.0]
            }
        })
    }

    pub fn value(self, category: Category, n_treated: usize, n_control: usize) -> Result<f64> {
        Ok(self.table(n_treated, n_control)?[category.index()])
    }
}

/// Qini-scaled separate relevances (TR 1, CR −|T|/|C|): the relative table times |T|.
pub fn qini_scaled_table(n_treated: usize, n_control: usize) -> Result<[f64; 4]> {
    let rel = RelevanceScheme::Rel.table(n_treated, n_control)?;
    Ok(rel.map(|v| v * n_treated as f64))
}

impl fmt::Display for RelevanceScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelevanceScheme::Abs1 => "abs1",
            RelevanceScheme::Abs2 => "abs2",
            RelevanceScheme::Abs3 => "abs3",
            RelevanceScheme::Rel => "rel",
        })
    }
}

impl FromStr for RelevanceScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "abs1" => Ok(RelevanceScheme::Abs1),
            "abs2" => Ok(RelevanceScheme::Abs2),
            "abs3" => Ok(RelevanceScheme::Abs3),
            "rel" => Ok(RelevanceScheme::Rel),
            other => Err(Error::Argument(format!("unknown relevance scheme `{other}`"))),
        }
    }
}

/// Builds ranking queries: one over all instances (joint) or one per group
/// (separate, treated query first). Relative values use the dataset's |T| and |C|.
pub fn assign_relevance(
    dataset: &UpliftDataset,
    scheme: RelevanceScheme,
    partition: Partition,
) -> Result<Vec<Query>> {
    let table = scheme.table(dataset.n_treated(), dataset.n_control())?;
    let rel_of = |i: usize| table[dataset.instances()[i].category().index()];
    match partition {
        Partition::Joint => {
            let members: Vec<usize> = (0..dataset.len()).collect();
            let relevance = members.iter().map(|&i| rel_of(i)).collect();
            Ok(vec![Query::new("joint", members, relevance)?])
        }
        Partition::Separate => {
            let (treated, control): (Vec<usize>, Vec<usize>) =
                (0..dataset.len()).partition(|&i| dataset.instances()[i].treated);
            let mut queries = Vec::with_capacity(2);
            for (id, members) in [("treated", treated), ("control", control)] {
                if members.is_empty() {
                    continue;
                }
                let relevance = members.iter().map(|&i| rel_of(i)).collect();
                queries.push(Query::new(id, members, relevance)?);
            }
            Ok(queries)
        }
    }
}

/// Class-transformation label: 1 for TR and CNR, 0 for TNR and CR.
pub fn flipped_label(dataset: &UpliftDataset) -> Vec<u8> {
    dataset
        .instances()
        .iter()
        .map(|i| u8::from(matches!(i.category(), Category::TR | Category::CNR)))
        .collect()
}
