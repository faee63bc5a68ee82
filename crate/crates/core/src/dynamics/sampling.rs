//! Monte-Carlo realization of the kernel through coupled coin profiles.
//!
//! Every step consumes exactly `n + |E|` uniforms in a fixed order (one per
//! node, then one per edge), whatever the state or action. Two simulations
//! fed the same stream therefore see the same coins, which is what makes
//! common-random-number comparisons between policies meaningful.

use rand::Rng;

use crate::error::{NrmabError, Result};
use crate::graph_model::Instance;

use super::{ActionSet, State};

/// One joint realization of all coins of a timestep.
///
/// `x[v]` is node `v`'s transition outcome when passive, `y[v]` when acted
/// on, `z[e]` whether edge `e` is live. `x[v] ⇒ y[v]` always.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoinProfile {
    pub x: State,
    pub y: State,
    pub z: Vec<bool>,
}

impl CoinProfile {
    pub fn is_coupled(&self) -> bool {
        self.x.is_subset_of(&self.y)
    }
}

/// Draws a profile for state `s`. A single uniform per node drives both
/// coins: `x = U < P(s,0,1)` and `y = U < P(s,1,1)`. Conditional on
/// `x = 0`, `y = 1` has probability `(P(s,1,1) − P(s,0,1)) / (1 − P(s,0,1))`,
/// the monotone coupling of the two Bernoullis.
pub fn sample_coin_profile<R: Rng + ?Sized>(
    inst: &Instance,
    s: &State,
    rng: &mut R,
) -> CoinProfile {
    let n = inst.n();
    let mut x = State::zeros(n);
    let mut y = State::zeros(n);
    for (v, d) in inst.dynamics().iter().enumerate() {
        let draw: f64 = rng.gen();
        let on = s.get(v);
        x.set(v, draw < d.activation_prob(on, false));
        y.set(v, draw < d.activation_prob(on, true));
    }
    let z = inst
        .edges()
        .iter()
        .map(|e| rng.gen::<f64>() < e.weight)
        .collect();
    CoinProfile { x, y, z }
}

/// Active set after the transition step under `profile`: acted-on nodes
/// follow `y`, the rest follow `x`.
pub(crate) fn transition_under(a: &ActionSet, profile: &CoinProfile) -> State {
    let mut u = profile.x.clone();
    for &v in a.members() {
        u.set(v, profile.y.get(v));
    }
    u
}

/// Runs the cascade from every active node of `u` over the live edges
/// until no new node is reached.
pub(crate) fn cascade_under(inst: &Instance, u: &State, live: &[bool]) -> State {
    let mut reached = u.clone();
    let mut stack: Vec<usize> = u.active_nodes().collect();
    while let Some(v) = stack.pop() {
        for &(w, e) in inst.neighbors(v) {
            if live[e] && !reached.get(w) {
                reached.set(w, true);
                stack.push(w);
            }
        }
    }
    reached
}

/// Final state under a fixed profile: transition, then reachability over
/// live edges.
pub fn apply_profile(inst: &Instance, _s: &State, a: &ActionSet, profile: &CoinProfile) -> State {
    let u = transition_under(a, profile);
    cascade_under(inst, &u, &profile.z)
}

/// One sampled timestep, returning the temporary state `u` and the next
/// state `s'`.
pub fn sample_step<R: Rng + ?Sized>(
    inst: &Instance,
    s: &State,
    a: &ActionSet,
    rng: &mut R,
) -> (State, State) {
    let profile = sample_coin_profile(inst, s, rng);
    let u = transition_under(a, &profile);
    let next = cascade_under(inst, &u, &profile.z);
    (u, next)
}

/// Largest profile space [`for_each_profile`] will enumerate.
pub const MAX_PROFILE_ENUMERATION: u128 = 1 << 24;

/// Calls `f(profile, probability)` for every coin profile of positive
/// probability in state `s`. Per node the outcomes are `(x, y) = (0, 0)`,
/// `(0, 1)` and `(1, 1)` with masses `1 − P(s,1,1)`, `P(s,1,1) − P(s,0,1)`
/// and `P(s,0,1)`.
pub fn for_each_profile(
    inst: &Instance,
    s: &State,
    mut f: impl FnMut(&CoinProfile, f64),
) -> Result<()> {
    let n = inst.n();
    let m = inst.edges().len();
    let count = 3u128.pow(n as u32) << m;
    if n > 40 || count > MAX_PROFILE_ENUMERATION {
        return Err(NrmabError::CombinatorialCap {
            what: "coin profiles",
            count,
            cap: MAX_PROFILE_ENUMERATION,
        });
    }
    let node_outcomes: Vec<[(bool, bool, f64); 3]> = inst
        .dynamics()
        .iter()
        .enumerate()
        .map(|(v, d)| {
            let on = s.get(v);
            let pp = d.activation_prob(on, false);
            let pa = d.activation_prob(on, true);
            [
                (false, false, 1.0 - pa),
                (false, true, pa - pp),
                (true, true, pp),
            ]
        })
        .collect();

    let mut digits = vec![0usize; n];
    let mut profile = CoinProfile {
        x: State::zeros(n),
        y: State::zeros(n),
        z: vec![false; m],
    };
    loop {
        let mut p_nodes = 1.0;
        for v in 0..n {
            let (x, y, p) = node_outcomes[v][digits[v]];
            profile.x.set(v, x);
            profile.y.set(v, y);
            p_nodes *= p;
        }
        if p_nodes > 0.0 {
            for live in 0..1u64 << m {
                let mut p = p_nodes;
                for (e, edge) in inst.edges().iter().enumerate() {
                    let on = live >> e & 1 == 1;
                    profile.z[e] = on;
                    p *= if on { edge.weight } else { 1.0 - edge.weight };
                }
                if p > 0.0 {
                    f(&profile, p);
                }
            }
        }
        // Odometer over the per-node outcome digits.
        let mut v = 0;
        loop {
            if v == n {
                return Ok(());
            }
            digits[v] += 1;
            if digits[v] < 3 {
                break;
            }
            digits[v] = 0;
            v += 1;
        }
    }
}
