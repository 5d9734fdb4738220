use serde::Serialize;

use super::{
    ensure_valid, CategoryMatching, CategoryTrace, Matching, MechanismError, Pair, TraceStats,
};
use crate::market_model::{CategoryMarket, Market, RankTable, Side};

/// A proposal turned down by `receiver`. `in_favor_of` is the proposer the receiver
/// holds after the round, or `None` when the receiver does not list the proposer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub proposer: usize,
    pub receiver: usize,
    pub in_favor_of: Option<usize>,
}

/// One batch: every free proposer's proposal and the rejections that followed.
/// Ordinals are on the proposing side (`proposer`) and the receiving side.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ProposalRound {
    pub proposals: Vec<(usize, usize)>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProposalLog {
    pub proposing_side: Side,
    pub rounds: Vec<ProposalRound>,
}

struct Outcome {
    partner: Vec<Option<usize>>,
    proposals: u64,
    rejections: u64,
    rounds: u64,
}

/// Batched deferred acceptance.
///
/// Each round collects every free proposer that still has an unapproached entry,
/// lets each propose to its best unapproached entry, and then every receiver keeps
/// its single best offer among the new proposals and the one it already holds.
/// Receivers are resolved in ascending ordinal order so the log is deterministic.
fn deferred_acceptance(
    proposer_lists: &[Vec<usize>],
    receiver_ranks: &RankTable,
    receivers: usize,
    mut log: Option<&mut Vec<ProposalRound>>,
) -> Outcome {
    let n = proposer_lists.len();
    let mut next = vec![0usize; n];
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut held: Vec<Option<usize>> = vec![None; receivers];
    let mut offers: Vec<(usize, usize)> = Vec::with_capacity(n);
    let (mut proposals, mut rejections, mut rounds) = (0u64, 0u64, 0u64);

    loop {
        offers.clear();
        let mut round = ProposalRound::default();
        for p in 0..n {
            if partner[p].is_some() || next[p] >= proposer_lists[p].len() {
                continue;
            }
            let r = proposer_lists[p][next[p]];
            next[p] += 1;
            proposals += 1;
            round.proposals.push((p, r));
            if receiver_ranks.rank(r, p).is_some() {
                offers.push((r, p));
            } else {
                rejections += 1;
                round.rejections.push(Rejection {
                    proposer: p,
                    receiver: r,
                    in_favor_of: None,
                });
            }
        }
        if round.proposals.is_empty() {
            break;
        }
        rounds += 1;
        offers.sort_unstable();

        let mut i = 0;
        while i < offers.len() {
            let r = offers[i].0;
            let mut j = i;
            while j < offers.len() && offers[j].0 == r {
                j += 1;
            }
            let rank = |p: usize| receiver_ranks.rank(r, p).expect("offers are acceptable");
            let best = offers[i..j]
                .iter()
                .map(|&(_, p)| p)
                .chain(held[r])
                .min_by_key(|&p| rank(p))
                .expect("at least one offer");
            for loser in offers[i..j]
                .iter()
                .map(|&(_, p)| p)
                .chain(held[r])
                .filter(|&p| p != best)
            {
                partner[loser] = None;
                rejections += 1;
                round.rejections.push(Rejection {
                    proposer: loser,
                    receiver: r,
                    in_favor_of: Some(best),
                });
            }
            held[r] = Some(best);
            partner[best] = Some(r);
            i = j;
        }
        if let Some(log) = log.as_deref_mut() {
            log.push(round);
        }
    }
    Outcome {
        partner,
        proposals,
        rejections,
        rounds,
    }
}

fn run_category(
    cm: &CategoryMarket,
    proposing_side: Side,
    log: Option<&mut Vec<ProposalRound>>,
) -> (CategoryMatching, CategoryTrace) {
    let lists = cm.ordinal_lists(proposing_side);
    let receiving = proposing_side.opposite();
    let ranks = cm.rank_table(receiving);
    let out = deferred_acceptance(&lists, &ranks, cm.size(receiving), log);
    let pairs = out
        .partner
        .iter()
        .enumerate()
        .filter_map(|(p, r)| {
            r.map(|r| match proposing_side {
                Side::Patient => Pair::new(p, r),
                Side::Doctor => Pair::new(r, p),
            })
        })
        .collect();
    let trace = CategoryTrace {
        category: cm.category,
        proposals: out.proposals,
        rejections: out.rejections,
        outer_iterations: out.rounds,
    };
    (CategoryMatching::new(cm.category, pairs), trace)
}

/// Deferred acceptance on one category. Assumes the category is valid.
pub fn tomhecs_category(
    cm: &CategoryMarket,
    proposing_side: Side,
) -> (CategoryMatching, CategoryTrace) {
    run_category(cm, proposing_side, None)
}

/// As [`tomhecs_category`], also returning the round-by-round proposal log.
pub fn tomhecs_category_logged(
    cm: &CategoryMarket,
    proposing_side: Side,
) -> (CategoryMatching, CategoryTrace, ProposalLog) {
    let mut rounds = Vec::new();
    let (m, t) = run_category(cm, proposing_side, Some(&mut rounds));
    (
        m,
        t,
        ProposalLog {
            proposing_side,
            rounds,
        },
    )
}

/// Proposer-optimal deferred acceptance over every category. Deterministic.
pub fn tomhecs(
    market: &Market,
    proposing_side: Side,
) -> Result<(Matching, TraceStats), MechanismError> {
    ensure_valid(market)?;
    let (categories, traces) = market
        .categories
        .iter()
        .map(|cm| tomhecs_category(cm, proposing_side))
        .unzip();
    Ok((Matching { categories }, TraceStats::from_categories(traces)))
}
