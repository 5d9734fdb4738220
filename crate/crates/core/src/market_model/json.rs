//! The market JSON document.
//!
//! ```json
//! { "mode": "full",
//!   "categories": [ { "index": 0,
//!     "patients": [{"id": "p1", "hospital": "h2"}],
//!     "doctors":  [{"id": "d1", "hospital": "H3"}],
//!     "patient_prefs": {"p1": ["d1"]},
//!     "doctor_prefs":  {"d1": ["p1"]} } ] }
//! ```
//!
//! Unknown fields are ignored. Structural problems that the in-memory model can
//! represent (duplicate list entries, short lists in full mode, odd category
//! indices) load fine and are left to [`validate_market`](super::validate_market);
//! references to unknown ids and missing lists cannot be represented and fail here.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{
    Agent, AgentId, CategoryMarket, Market, MarketError, PreferenceList, PreferenceMode, Side,
};

#[derive(Serialize, Deserialize)]
struct MarketDoc {
    mode: PreferenceMode,
    categories: Vec<CategoryDoc>,
}

#[derive(Serialize, Deserialize)]
struct CategoryDoc {
    index: usize,
    patients: Vec<AgentDoc>,
    doctors: Vec<AgentDoc>,
    patient_prefs: IndexMap<String, Vec<String>>,
    doctor_prefs: IndexMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct AgentDoc {
    id: String,
    #[serde(default)]
    hospital: String,
}

pub fn load_market(bytes: &[u8]) -> Result<Market, MarketError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: MarketDoc =
        serde_path_to_error::deserialize(de).map_err(|e| MarketError::Malformed {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    let categories = doc
        .categories
        .into_iter()
        .enumerate()
        .map(|(pos, c)| category_from_doc(pos, c))
        .collect::<Result<_, _>>()?;
    Ok(Market::new(doc.mode, categories))
}

fn schema(path: String, message: impl Into<String>) -> MarketError {
    MarketError::Schema {
        path,
        message: message.into(),
    }
}

fn field_name(side: Side) -> &'static str {
    match side {
        Side::Patient => "patients",
        Side::Doctor => "doctors",
    }
}

fn prefs_name(side: Side) -> &'static str {
    match side {
        Side::Patient => "patient_prefs",
        Side::Doctor => "doctor_prefs",
    }
}

fn roster_from_doc(
    pos: usize,
    category: usize,
    side: Side,
    docs: Vec<AgentDoc>,
) -> Result<(Vec<Agent>, HashMap<String, usize>), MarketError> {
    let mut index = HashMap::with_capacity(docs.len());
    let mut roster = Vec::with_capacity(docs.len());
    for (ordinal, a) in docs.into_iter().enumerate() {
        if index.insert(a.id.clone(), ordinal).is_some() {
            return Err(schema(
                format!("categories[{pos}].{}[{ordinal}].id", field_name(side)),
                format!("duplicate {side} id {:?}", a.id),
            ));
        }
        roster.push(Agent {
            id: AgentId {
                side,
                category,
                ordinal,
            },
            name: a.id,
            hospital: a.hospital,
        });
    }
    Ok((roster, index))
}

fn prefs_from_doc(
    pos: usize,
    side: Side,
    roster: &[Agent],
    own: &HashMap<String, usize>,
    opposite: &HashMap<String, usize>,
    mut lists: IndexMap<String, Vec<String>>,
) -> Result<Vec<PreferenceList>, MarketError> {
    let field = prefs_name(side);
    if let Some(stray) = lists.keys().find(|k| !own.contains_key(*k)) {
        return Err(schema(
            format!("categories[{pos}].{field}.{stray}"),
            format!("preference list for unknown {side} {stray:?}"),
        ));
    }
    roster
        .iter()
        .map(|agent| {
            let names = lists.swap_remove(&agent.name).ok_or_else(|| {
                schema(
                    format!("categories[{pos}].{field}"),
                    format!("missing preference list for {side} {:?}", agent.name),
                )
            })?;
            let ranking = names
                .iter()
                .enumerate()
                .map(|(r, name)| {
                    let ordinal = *opposite.get(name).ok_or_else(|| {
                        schema(
                            format!("categories[{pos}].{field}.{}[{r}]", agent.name),
                            format!("unknown {} {name:?}", side.opposite()),
                        )
                    })?;
                    Ok(AgentId {
                        side: side.opposite(),
                        category: agent.id.category,
                        ordinal,
                    })
                })
                .collect::<Result<_, MarketError>>()?;
            Ok(PreferenceList::new(agent.id, ranking))
        })
        .collect()
}

fn category_from_doc(pos: usize, doc: CategoryDoc) -> Result<CategoryMarket, MarketError> {
    let category = doc.index;
    let (patients, patient_index) = roster_from_doc(pos, category, Side::Patient, doc.patients)?;
    let (doctors, doctor_index) = roster_from_doc(pos, category, Side::Doctor, doc.doctors)?;
    let patient_prefs = prefs_from_doc(
        pos,
        Side::Patient,
        &patients,
        &patient_index,
        &doctor_index,
        doc.patient_prefs,
    )?;
    let doctor_prefs = prefs_from_doc(
        pos,
        Side::Doctor,
        &doctors,
        &doctor_index,
        &patient_index,
        doc.doctor_prefs,
    )?;
    Ok(CategoryMarket {
        category,
        patients,
        doctors,
        patient_prefs,
        doctor_prefs,
    })
}

/// Serializes a market as pretty-printed JSON. Lists are written in roster order.
pub fn store_market(market: &Market) -> Result<Vec<u8>, MarketError> {
    let categories = market
        .categories
        .iter()
        .enumerate()
        .map(|(pos, cm)| category_to_doc(pos, cm))
        .collect::<Result<_, _>>()?;
    let doc = MarketDoc {
        mode: market.mode,
        categories,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("market document serializes");
    bytes.push(b'\n');
    Ok(bytes)
}

fn category_to_doc(pos: usize, cm: &CategoryMarket) -> Result<CategoryDoc, MarketError> {
    let agents = |side: Side| -> Vec<AgentDoc> {
        cm.roster(side)
            .iter()
            .map(|a| AgentDoc {
                id: a.name.clone(),
                hospital: a.hospital.clone(),
            })
            .collect()
    };
    let prefs = |side: Side| -> Result<IndexMap<String, Vec<String>>, MarketError> {
        let opposite = cm.roster(side.opposite());
        let lists = cm.prefs(side);
        if lists.len() != cm.size(side) {
            return Err(schema(
                format!("categories[{pos}].{}", prefs_name(side)),
                format!("{} lists for {} {side}s", lists.len(), cm.size(side)),
            ));
        }
        cm.roster(side)
            .iter()
            .zip(lists)
            .map(|(agent, list)| {
                let names = list
                    .ranking
                    .iter()
                    .enumerate()
                    .map(|(r, e)| {
                        opposite
                            .get(e.ordinal)
                            .map(|a| a.name.clone())
                            .ok_or_else(|| {
                                schema(
                                    format!(
                                        "categories[{pos}].{}.{}[{r}]",
                                        prefs_name(side),
                                        agent.name
                                    ),
                                    format!("entry {e} is outside the {} roster", side.opposite()),
                                )
                            })
                    })
                    .collect::<Result<_, _>>()?;
                Ok((agent.name.clone(), names))
            })
            .collect()
    };
    Ok(CategoryDoc {
        index: cm.category,
        patients: agents(Side::Patient),
        doctors: agents(Side::Doctor),
        patient_prefs: prefs(Side::Patient)?,
        doctor_prefs: prefs(Side::Doctor)?,
    })
}
