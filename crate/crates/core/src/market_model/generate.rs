use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CategoryMarket, Market, MarketError, PreferenceMode, Side};
use crate::rng::{self, label};

/// How many counterparts each generated list ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListLength {
    /// Rank the whole opposite roster.
    Full,
    /// Rank a uniformly random subset of this many counterparts.
    Partial(usize),
}

impl ListLength {
    pub fn mode(self) -> PreferenceMode {
        match self {
            ListLength::Full => PreferenceMode::Full,
            ListLength::Partial(_) => PreferenceMode::Partial,
        }
    }
}

/// Generates `k` categories of `n_patients` x `n_doctors` with uniformly random lists.
///
/// Category `c` draws from the stream `(seed, [MARKET, c])`: patient lists first in
/// ordinal order, then doctor lists. A partial list samples its subset first and
/// then shuffles it.
pub fn generate_random_market(
    k: usize,
    n_patients: usize,
    n_doctors: usize,
    list_length: ListLength,
    seed: u64,
) -> Result<Market, MarketError> {
    if let ListLength::Partial(length) = list_length {
        if length > n_doctors {
            return Err(MarketError::ListTooLong {
                side: Side::Patient,
                length,
                roster: n_doctors,
            });
        }
        if length > n_patients {
            return Err(MarketError::ListTooLong {
                side: Side::Doctor,
                length,
                roster: n_patients,
            });
        }
    }
    let categories = (0..k)
        .map(|c| {
            let mut rng = rng::stream(seed, &[label::MARKET, c as u64]);
            let patient_lists: Vec<Vec<usize>> = (0..n_patients)
                .map(|_| random_list(&mut rng, n_doctors, list_length))
                .collect();
            let doctor_lists: Vec<Vec<usize>> = (0..n_doctors)
                .map(|_| random_list(&mut rng, n_patients, list_length))
                .collect();
            CategoryMarket::from_ordinal_lists(c, &patient_lists, &doctor_lists)
        })
        .collect();
    Ok(Market::new(list_length.mode(), categories))
}

fn random_list<R: Rng>(rng: &mut R, roster: usize, length: ListLength) -> Vec<usize> {
    let mut list: Vec<usize> = match length {
        ListLength::Full => (0..roster).collect(),
        ListLength::Partial(len) => {
            let mut subset = index::sample(rng, roster, len).into_vec();
            subset.sort_unstable();
            subset
        }
    };
    list.shuffle(rng);
    list
}
