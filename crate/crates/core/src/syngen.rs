//! Synthetic source/target network pairs with a planted migration signal.
//!
//! Users belong to communities. Inside each community users are paired into
//! close-friend ties; a tie is followed in each direction with some
//! probability and owns a private venue where both friends check in part of
//! their posts. Other follows mostly stay inside the community, and the
//! remaining post attributes come from community-biased pools, so every
//! similarity path carries community information and co-location
//! additionally reveals close friends that are not followed.
//!
//! Each community has a latent migration propensity `g_c ~ N(0, 1)`. Users
//! already on the target are drawn with weight `exp(s·β·g_c)`; future joiners
//! (positives) are then drawn from the rest with weight
//! `exp(s·(β·g_c + η·e_u + ζ·m_u))`, where `e_u` is the standardized number of
//! already-anchored users `u` follows and `m_u` the standardized number of
//! already-anchored close friends of `u`. The anchored close friends of each
//! positive form its circle; a share `s·κ` of the target follow budget is
//! spent on follows inside the circles, and each such pair also gets
//! co-located, same-day post pairs in the target. With `s = 0`
//! nothing depends on the labels.

use std::collections::HashSet;

use rand::distributions::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::anchor::{AnchorMap, AnchorPair};
use crate::dataset::{Dataset, USER};
use crate::error::{Error, Result};
use crate::hetgraph::{NetworkBuilder, NetworkSchema};
use crate::rng::{stream, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_source_users: usize,
    pub n_target_users: usize,
    pub n_communities: usize,
    /// Exact number of distinct follow edges per network.
    pub source_follows: usize,
    pub target_follows: usize,
    /// Probability that a (non-planted) follow stays inside the follower's
    /// community; otherwise the followee is uniform over all users.
    pub intra_follow_prob: f64,
    /// Inclusive range of posts per user.
    pub source_posts: (usize, usize),
    pub target_posts: (usize, usize),
    pub words_per_post: usize,
    pub n_locations: usize,
    pub n_days: usize,
    pub vocabulary: usize,
    pub zipf_exponent: f64,
    /// Close-friend ties per user (even; ties never cross communities).
    pub friends_per_user: usize,
    /// Probability of each directed follow along a tie.
    pub tie_follow_prob: f64,
    /// Probability that a source post is checked in at the private venue of
    /// one of the user's ties.
    pub venue_prob: f64,
    /// Probability that a post attribute comes from the community's own pool.
    pub community_bias: f64,
    /// Fraction of source users with a target account (now or later).
    pub anchor_fraction: f64,
    /// Fraction of those anchors that joined the target after the source.
    pub positive_share: f64,
    pub signal_strength: f64,
    /// β: weight of the community propensity.
    pub propensity_weight: f64,
    /// η: weight of the anchored-followee exposure.
    pub exposure_weight: f64,
    /// ζ: weight of the number of anchored close friends.
    pub friend_weight: f64,
    /// κ: target follow budget share spent on planted intimacy at s = 1.
    pub intimacy_share: f64,
    /// At most this many anchored close friends per circle.
    pub circle_size: usize,
    /// Co-located, same-day post pairs added for each planted follow.
    pub coposts_per_pair: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_source_users: 2000,
            n_target_users: 1200,
            n_communities: 20,
            source_follows: 54_000,
            target_follows: 6_000,
            intra_follow_prob: 0.8,
            source_posts: (10, 20),
            target_posts: (4, 12),
            words_per_post: 2,
            n_locations: 8000,
            n_days: 365,
            vocabulary: 5000,
            zipf_exponent: 1.0,
            friends_per_user: 6,
            tie_follow_prob: 0.4,
            venue_prob: 0.8,
            community_bias: 0.7,
            anchor_fraction: 0.55,
            positive_share: 0.3,
            signal_strength: 1.0,
            propensity_weight: 0.5,
            exposure_weight: 0.5,
            friend_weight: 0.75,
            intimacy_share: 1.0,
            circle_size: 8,
            coposts_per_pair: 2,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// A small configuration for quick runs and tests.
    pub fn small() -> Self {
        GeneratorConfig {
            n_source_users: 300,
            n_target_users: 180,
            n_communities: 6,
            source_follows: 4_000,
            target_follows: 600,
            n_locations: 1100,
            n_days: 60,
            vocabulary: 400,
            ..GeneratorConfig::default()
        }
    }

    fn n_anchors(&self) -> usize {
        (self.anchor_fraction * self.n_source_users as f64).round() as usize
    }

    fn n_positives(&self) -> usize {
        (self.positive_share * self.n_anchors() as f64).round() as usize
    }

    fn n_venues(&self) -> usize {
        self.n_source_users * self.friends_per_user / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, p) in [
            ("intra_follow_prob", self.intra_follow_prob),
            ("community_bias", self.community_bias),
            ("anchor_fraction", self.anchor_fraction),
            ("positive_share", self.positive_share),
            ("signal_strength", self.signal_strength),
            ("intimacy_share", self.intimacy_share),
            ("tie_follow_prob", self.tie_follow_prob),
            ("venue_prob", self.venue_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} must lie in [0, 1]"));
            }
        }
        if self.n_communities == 0 || self.n_communities > self.n_source_users {
            return bad(format!("n_communities = {} must be in 1..=n_source_users", self.n_communities));
        }
        let n_anchors = self.n_anchors();
        let n_pos = self.n_positives();
        if n_pos == 0 || n_pos == n_anchors || n_anchors == self.n_source_users {
            return bad("need at least one positive, one existing anchor and one negative".into());
        }
        if n_anchors > self.n_target_users {
            return bad(format!(
                "{n_anchors} anchors do not fit into {} target users",
                self.n_target_users
            ));
        }
        for (name, n, f) in [
            ("source", self.n_source_users, self.source_follows),
            ("target", self.n_target_users, self.target_follows),
        ] {
            if f > n * (n - 1) / 2 {
                return bad(format!("{name}_follows = {f} is too dense for {n} users"));
            }
        }
        for (name, (lo, hi)) in [("source_posts", self.source_posts), ("target_posts", self.target_posts)] {
            if lo > hi {
                return bad(format!("{name} range {lo}..={hi} is empty"));
            }
        }
        if self.friends_per_user % 2 == 1 {
            return bad(format!("friends_per_user = {} must be even", self.friends_per_user));
        }
        if self.friends_per_user >= self.n_source_users / self.n_communities {
            return bad("friends_per_user must be smaller than the community size".into());
        }
        if self.n_locations < self.n_venues() + self.n_communities || self.n_days == 0 || self.vocabulary < self.n_communities {
            return bad("location, day and word pools must be non-empty per community".into());
        }
        if self.zipf_exponent <= 0.0 {
            return bad("zipf_exponent must be positive".into());
        }
        Ok(())
    }
}

/// Generated pair plus the latent quantities, for inspection.
#[derive(Debug, Clone)]
pub struct Generated {
    pub dataset: Dataset,
    pub source_community: Vec<usize>,
    pub propensity: Vec<f64>,
    /// Planted target-follow pairs (target user indices).
    pub planted: Vec<(u32, u32)>,
}

struct Pools {
    n_communities: usize,
    // locations below `n_venues` are tie venues
    n_venues: usize,
    n_locations: usize,
    n_days: usize,
    vocabulary: usize,
    bias: f64,
    global_words: Zipf<f64>,
    local_words: Zipf<f64>,
}

impl Pools {
    fn new(cfg: &GeneratorConfig) -> Result<Pools> {
        let zipf = |n: usize| {
            Zipf::new(n as u64, cfg.zipf_exponent).map_err(|e| Error::InvalidArgument(format!("zipf: {e}")))
        };
        Ok(Pools {
            n_communities: cfg.n_communities,
            n_venues: cfg.n_venues(),
            n_locations: cfg.n_locations,
            n_days: cfg.n_days,
            vocabulary: cfg.vocabulary,
            bias: cfg.community_bias,
            global_words: zipf(cfg.vocabulary)?,
            local_words: zipf(cfg.vocabulary / cfg.n_communities)?,
        })
    }

    // uniform over the community's block of `n`, or over all of `n`
    fn block(&self, rng: &mut ChaCha8Rng, n: usize, community: usize) -> u32 {
        if rng.gen_bool(self.bias) {
            let size = (n / self.n_communities).max(1);
            let start = (community * n / self.n_communities).min(n - size);
            (start + rng.gen_range(0..size)) as u32
        } else {
            rng.gen_range(0..n) as u32
        }
    }

    fn location(&self, rng: &mut ChaCha8Rng, c: usize) -> u32 {
        self.n_venues as u32 + self.block(rng, self.n_locations - self.n_venues, c)
    }

    fn day(&self, rng: &mut ChaCha8Rng, c: usize) -> u32 {
        self.block(rng, self.n_days, c)
    }

    fn word(&self, rng: &mut ChaCha8Rng, c: usize) -> u32 {
        if rng.gen_bool(self.bias) {
            let size = self.vocabulary / self.n_communities;
            let rank = self.local_words.sample(rng) as usize - 1;
            (c * size + rank) as u32
        } else {
            self.global_words.sample(rng) as u32 - 1
        }
    }
}

/// Builds one network's nodes and edges.
struct NetBuild {
    b: NetworkBuilder,
    follows: HashSet<(u32, u32)>,
    posts: u32,
}

impl NetBuild {
    fn new(prefix: &str, n_users: usize, cfg: &GeneratorConfig) -> Result<NetBuild> {
        let mut b = NetworkBuilder::new(NetworkSchema::social());
        for i in 0..n_users {
            b.add_node(USER, format!("{prefix}u{i}"))?;
        }
        for i in 0..cfg.n_locations {
            b.add_node("location", format!("{prefix}l{i}"))?;
        }
        for i in 0..cfg.n_days {
            b.add_node("time", format!("{prefix}d{i}"))?;
        }
        for i in 0..cfg.vocabulary {
            b.add_node("word", format!("{prefix}w{i}"))?;
        }
        Ok(NetBuild {
            b,
            follows: HashSet::new(),
            posts: 0,
        })
    }

    fn follow(&mut self, a: u32, b: u32) -> Result<bool> {
        if a == b || !self.follows.insert((a, b)) {
            return Ok(false);
        }
        self.b.add_edge("follow", a, b)?;
        Ok(true)
    }

    fn post(&mut self, prefix: &str, user: u32, location: u32, day: u32, words: &[u32]) -> Result<()> {
        let p = self.b.add_node("post", format!("{prefix}p{}", self.posts))?;
        self.posts += 1;
        self.b.add_edge("write", user, p)?;
        self.b.add_edge("checkin_at", p, location)?;
        self.b.add_edge("written_at", p, day)?;
        for &w in words {
            self.b.add_edge("contain", p, w)?;
        }
        Ok(())
    }

    /// Community-biased follows until `total` distinct edges exist.
    fn fill_follows(&mut self, rng: &mut ChaCha8Rng, community: &[usize], total: usize, intra: f64) -> Result<()> {
        let n = community.len();
        let mut members = vec![Vec::new(); community.iter().max().map_or(0, |m| m + 1)];
        for (u, &c) in community.iter().enumerate() {
            members[c].push(u as u32);
        }
        while self.follows.len() < total {
            let a = rng.gen_range(0..n) as u32;
            let own = &members[community[a as usize]];
            let b = if own.len() > 1 && rng.gen_bool(intra) {
                own[rng.gen_range(0..own.len())]
            } else {
                rng.gen_range(0..n) as u32
            };
            self.follow(a, b)?;
        }
        Ok(())
    }

    /// Posts for every user. `venues[u]` lists the user's group venues,
    /// used with probability `venue_prob`.
    #[allow(clippy::too_many_arguments)]
    fn fill_posts(
        &mut self,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        community: &[usize],
        venues: &[&[u32]],
        venue_prob: f64,
        range: (usize, usize),
        pools: &Pools,
        words_per_post: usize,
    ) -> Result<()> {
        for (u, &c) in community.iter().enumerate() {
            let own = venues.get(u).copied().unwrap_or(&[]);
            for _ in 0..rng.gen_range(range.0..=range.1) {
                let loc = if !own.is_empty() && rng.gen_bool(venue_prob) {
                    own[rng.gen_range(0..own.len())]
                } else {
                    pools.location(rng, c)
                };
                let day = pools.day(rng, c);
                let words: Vec<u32> = (0..words_per_post).map(|_| pools.word(rng, c)).collect();
                self.post(prefix, u as u32, loc, day, &words)?;
            }
        }
        Ok(())
    }
}

fn weighted_sample(rng: &mut ChaCha8Rng, weights: &[f64], amount: usize) -> Result<Vec<usize>> {
    let mut picked = index::sample_weighted(rng, weights.len(), |i| weights[i], amount)
        .map_err(|e| Error::InvalidArgument(format!("weighted sampling: {e}")))?
        .into_vec();
    picked.sort_unstable();
    Ok(picked)
}

fn standardize(xs: &[f64]) -> Vec<f64> {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    xs.iter()
        .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
        .collect()
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Generated> {
    cfg.validate()?;
    let s = cfg.signal_strength;
    let rng_for = |sub| stream(cfg.seed, Stage::Generator, sub);
    let pools = Pools::new(cfg)?;
    let k = cfg.n_communities;
    let n = cfg.n_source_users;

    // communities, propensities and close-friend ties: the union of d/2
    // independently shuffled rings per community (few triangles)
    let mut rng = rng_for(0);
    let source_community: Vec<usize> = (0..n).map(|u| u % k).collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let propensity: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
    let mut ties: Vec<(u32, u32)> = Vec::with_capacity(cfg.n_venues());
    for c in 0..k {
        let mut ring: Vec<u32> = (c..n).step_by(k).map(|u| u as u32).collect();
        for _ in 0..cfg.friends_per_user / 2 {
            ring.shuffle(&mut rng);
            for i in 0..ring.len() {
                ties.push((ring[i], ring[(i + 1) % ring.len()]));
            }
        }
    }
    // tie index doubles as the venue id
    let mut friends: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
    for (t, &(a, b)) in ties.iter().enumerate() {
        friends[a as usize].push((b, t as u32));
        friends[b as usize].push((a, t as u32));
    }

    // source follows: ties first, then community-biased fill
    let mut src = NetBuild::new("s", n, cfg)?;
    let mut rng = rng_for(1);
    for &(a, b) in &ties {
        for (x, y) in [(a, b), (b, a)] {
            if src.follows.len() < cfg.source_follows && rng.gen_bool(cfg.tie_follow_prob) {
                src.follow(x, y)?;
            }
        }
    }
    src.fill_follows(&mut rng, &source_community, cfg.source_follows, cfg.intra_follow_prob)?;
    let venues: Vec<Vec<u32>> = friends.iter().map(|f| f.iter().map(|&(_, t)| t).collect()).collect();
    let user_venues: Vec<&[u32]> = venues.iter().map(Vec::as_slice).collect();
    src.fill_posts(
        &mut rng_for(5),
        "s",
        &source_community,
        &user_venues,
        cfg.venue_prob,
        cfg.source_posts,
        &pools,
        cfg.words_per_post,
    )?;

    // existing anchors, then positives among the rest
    let mut rng = rng_for(2);
    let n_anchors = cfg.n_anchors();
    let n_pos = cfg.n_positives();
    let base: Vec<f64> = source_community
        .iter()
        .map(|&c| s * cfg.propensity_weight * propensity[c])
        .collect();
    let w_exist: Vec<f64> = base.iter().map(|b| b.exp()).collect();
    let existing = weighted_sample(&mut rng, &w_exist, n_anchors - n_pos)?;
    let mut is_existing = vec![false; n];
    existing.iter().for_each(|&u| is_existing[u] = true);

    let mut followees = vec![Vec::new(); n];
    for &(a, b) in &src.follows {
        followees[a as usize].push(b);
    }
    let candidates: Vec<usize> = (0..n).filter(|&u| !is_existing[u]).collect();
    let anchored_followees: Vec<f64> = candidates
        .iter()
        .map(|&u| followees[u].iter().filter(|&&v| is_existing[v as usize]).count() as f64)
        .collect();
    let anchored_mates: Vec<Vec<u32>> = candidates
        .iter()
        .map(|&u| {
            friends[u]
                .iter()
                .map(|&(v, _)| v)
                .filter(|&v| is_existing[v as usize])
                .collect()
        })
        .collect();
    let mate_counts: Vec<f64> = anchored_mates.iter().map(|m| m.len() as f64).collect();
    let exposure: Vec<f64> = standardize(&anchored_followees)
        .iter()
        .zip(standardize(&mate_counts))
        .map(|(f, m)| cfg.exposure_weight * f + cfg.friend_weight * m)
        .collect();
    let w_pos: Vec<f64> = candidates
        .iter()
        .zip(&exposure)
        .map(|(&u, e)| (base[u] + s * e).exp())
        .collect();
    let picked = weighted_sample(&mut rng, &w_pos, n_pos)?;
    let positives: Vec<usize> = picked.iter().map(|&i| candidates[i]).collect();

    // target accounts: anchors first in shuffled order, then target-only users
    let mut anchor_sources: Vec<(usize, bool)> = existing
        .iter()
        .map(|&u| (u, false))
        .chain(positives.iter().map(|&u| (u, true)))
        .collect();
    anchor_sources.sort_unstable();
    let order = index::sample(&mut rng, n_anchors, n_anchors).into_vec();
    let mut target_of = vec![None; n];
    let mut target_community = vec![0; cfg.n_target_users];
    let mut pairs = Vec::with_capacity(n_anchors);
    for (t, &i) in order.iter().enumerate() {
        let (u, after) = anchor_sources[i];
        target_of[u] = Some(t as u32);
        target_community[t] = source_community[u];
        pairs.push(AnchorPair {
            source: u as u32,
            target: t as u32,
            joined_target_after_source: after,
        });
    }
    for c in target_community.iter_mut().skip(n_anchors) {
        *c = rng.gen_range(0..k);
    }

    // planted intimacy among positives' anchored close friends
    let mut tgt = NetBuild::new("t", cfg.n_target_users, cfg)?;
    let mut rng = rng_for(3);
    let planted_budget = (s * cfg.intimacy_share * cfg.target_follows as f64).round() as usize;
    let circles: Vec<Vec<u32>> = picked
        .iter()
        .filter_map(|&i| {
            let mates = &anchored_mates[i];
            let take = cfg.circle_size.min(mates.len());
            let chosen = index::sample(&mut rng, mates.len(), take);
            let circle: Vec<u32> = chosen.iter().map(|j| target_of[mates[j] as usize].unwrap()).collect();
            (circle.len() >= 2).then_some(circle)
        })
        .collect();
    let mut planted = Vec::new();
    let mut attempts = 0;
    while planted.len() < planted_budget && !circles.is_empty() && attempts < 50 * planted_budget {
        let f = &circles[attempts % circles.len()];
        attempts += 1;
        let a = f[rng.gen_range(0..f.len())];
        let b = f[rng.gen_range(0..f.len())];
        if tgt.follow(a, b)? {
            planted.push((a, b));
        }
    }
    tgt.fill_follows(&mut rng_for(4), &target_community, cfg.target_follows, cfg.intra_follow_prob)?;

    // posts
    let mut rng = rng_for(6);
    tgt.fill_posts(
        &mut rng,
        "t",
        &target_community,
        &[],
        0.0,
        cfg.target_posts,
        &pools,
        cfg.words_per_post,
    )?;
    for &(a, b) in &planted {
        let c = target_community[a as usize];
        for _ in 0..cfg.coposts_per_pair {
            let loc = pools.location(&mut rng, c);
            let day = pools.day(&mut rng, c);
            let word = [pools.word(&mut rng, c)];
            tgt.post("t", a, loc, day, &word)?;
            tgt.post("t", b, loc, day, &word)?;
        }
    }

    Ok(Generated {
        dataset: Dataset {
            source: src.b.build(),
            target: tgt.b.build(),
            anchors: AnchorMap::new(pairs)?,
        },
        source_community,
        propensity,
        planted,
    })
}
