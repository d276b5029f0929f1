//! One-dimensional Sznajd spin chain of Open (+1) and Closed (-1) individuals.
//!
//! Each update picks a site `i` uniformly from `1..=N-3` and looks at the pair
//! `(S[i], S[i+1])`. An agreeing pair imposes its value on both outer neighbours
//! `S[i-1]` and `S[i+2]`; a disagreeing pair imposes crossed values, `S[i-1] <- S[i+1]`
//! and `S[i+2] <- S[i]`. There is no wraparound. The dynamics use integer arithmetic
//! only, so a realization is bit-identical for a given seed.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const OPEN: i8 = 1;
pub const CLOSED: i8 = -1;
pub const MIN_LEN: usize = 4;

/// Identifier written to every output that depends on the random stream.
pub const RNG_ALGORITHM: &str = "xoshiro256++/splitmix64-seed; site=lemire-u64-rejection; \
                                 spin=u64<floor(p*2^64); seed_split=splitmix64(master,point,realization)";

#[derive(Debug, Error, PartialEq)]
pub enum SznajdError {
    #[error("chain length {0} is below the minimum of {MIN_LEN}")]
    TooShort(usize),
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("site {i} outside the admissible window 1..={max}")]
    SiteOutOfRange { i: usize, max: usize },
    #[error("spin value {0} is not +1 or -1")]
    BadSpin(i8),
    #[error("{0} must be at least 1")]
    ZeroParameter(&'static str),
}

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Per-realization seed, independent of scheduling order.
pub fn derive_seed(master: u64, point: u64, realization: u64) -> u64 {
    let h = mix64(master.wrapping_add(GOLDEN));
    let h = mix64(h ^ point.wrapping_add(1).wrapping_mul(GOLDEN));
    mix64(h ^ realization.wrapping_add(1).wrapping_mul(GOLDEN.rotate_left(17)))
}

/// Seeded generator for chain initialisation and site selection.
pub struct ChainRng(Xoshiro256PlusPlus);

impl ChainRng {
    pub fn seeded(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `0..n` by Lemire's multiply-shift with rejection. `n > 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let mut m = u128::from(self.next_u64()) * u128::from(n);
        if (m as u64) < n {
            let threshold = n.wrapping_neg() % n;
            while (m as u64) < threshold {
                m = u128::from(self.next_u64()) * u128::from(n);
            }
        }
        (m >> 64) as u64
    }

    /// True with probability `p`, using a fixed-point threshold.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        let threshold = (p * 18_446_744_073_709_551_616.0) as u64;
        self.next_u64() < threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SteadyStateKind {
    AllOpen,
    AllClosed,
    Mixed,
    NotAbsorbed,
}

impl SteadyStateKind {
    pub fn is_absorbed(self) -> bool {
        self != SteadyStateKind::NotAbsorbed
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinChain {
    spins: Vec<i8>,
}

impl SpinChain {
    pub fn new(spins: Vec<i8>) -> Result<Self, SznajdError> {
        if spins.len() < MIN_LEN {
            return Err(SznajdError::TooShort(spins.len()));
        }
        if let Some(&bad) = spins.iter().find(|&&s| s != OPEN && s != CLOSED) {
            return Err(SznajdError::BadSpin(bad));
        }
        Ok(Self { spins })
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Largest admissible update site.
    pub fn max_site(&self) -> usize {
        self.spins.len() - 3
    }

    pub fn magnetization(&self) -> i64 {
        self.spins.iter().map(|&s| i64::from(s)).sum()
    }

    pub fn climate(&self) -> f64 {
        self.magnetization() as f64 / self.spins.len() as f64
    }

    pub fn step(&mut self, i: usize) -> Result<(), SznajdError> {
        if i < 1 || i > self.max_site() {
            return Err(SznajdError::SiteOutOfRange {
                i,
                max: self.max_site(),
            });
        }
        self.apply(i);
        Ok(())
    }

    /// Applies the update at an admissible site and returns the change in magnetization.
    #[inline]
    fn apply(&mut self, i: usize) -> i64 {
        let s = &mut self.spins;
        let (left, right) = (s[i], s[i + 1]);
        let (old_l, old_r) = (s[i - 1], s[i + 2]);
        // Agreeing pair: both neighbours copy it. Disagreeing: crossed copy.
        // The same assignment covers both cases since left == right in the first.
        let (new_l, new_r) = if left == right { (left, left) } else { (right, left) };
        s[i - 1] = new_l;
        s[i + 2] = new_r;
        i64::from(new_l - old_l) + i64::from(new_r - old_r)
    }

    pub fn classify(&self) -> SteadyStateKind {
        classify_steady(self)
    }
}

pub fn init_chain(n: usize, p_open: f64, seed: u64) -> Result<SpinChain, SznajdError> {
    init_chain_with(n, p_open, &mut ChainRng::seeded(seed))
}

pub fn init_chain_with(n: usize, p_open: f64, rng: &mut ChainRng) -> Result<SpinChain, SznajdError> {
    if n < MIN_LEN {
        return Err(SznajdError::TooShort(n));
    }
    check_probability(p_open)?;
    let spins = (0..n)
        .map(|_| if rng.bernoulli(p_open) { OPEN } else { CLOSED })
        .collect();
    Ok(SpinChain { spins })
}

fn check_probability(p: f64) -> Result<(), SznajdError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SznajdError::BadProbability(p))
    }
}

pub fn climate(chain: &SpinChain) -> f64 {
    chain.climate()
}

pub fn classify_steady(chain: &SpinChain) -> SteadyStateKind {
    let s = chain.spins();
    if s.iter().all(|&x| x == OPEN) {
        SteadyStateKind::AllOpen
    } else if s.iter().all(|&x| x == CLOSED) {
        SteadyStateKind::AllClosed
    } else if s.windows(2).all(|w| w[0] != w[1]) {
        SteadyStateKind::Mixed
    } else {
        SteadyStateKind::NotAbsorbed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationParams {
    pub n: usize,
    pub p_open: f64,
    pub max_iters: u64,
    pub record_every: u64,
    /// Absorption is tested every this many updates; `None` means every `n`.
    pub check_every: Option<u64>,
}

impl RealizationParams {
    pub fn new(n: usize, p_open: f64, max_iters: u64, record_every: u64) -> Self {
        Self {
            n,
            p_open,
            max_iters,
            record_every,
            check_every: None,
        }
    }

    fn validate(&self) -> Result<(), SznajdError> {
        if self.n < MIN_LEN {
            return Err(SznajdError::TooShort(self.n));
        }
        check_probability(self.p_open)?;
        if self.max_iters == 0 {
            return Err(SznajdError::ZeroParameter("max_iters"));
        }
        if self.record_every == 0 {
            return Err(SznajdError::ZeroParameter("record_every"));
        }
        if self.check_every == Some(0) {
            return Err(SznajdError::ZeroParameter("check_every"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationResult {
    pub final_kind: SteadyStateKind,
    /// Update count at which absorption was detected.
    pub absorbed_at: Option<u64>,
    pub iterations: u64,
    pub initial_climate: f64,
    pub final_climate: f64,
    pub climate_trace: Vec<(u64, f64)>,
    pub seed: u64,
}

pub fn run_realization(params: &RealizationParams, seed: u64) -> Result<RealizationResult, SznajdError> {
    params.validate()?;
    let n = params.n;
    let check_every = params.check_every.unwrap_or(n as u64);
    let mut rng = ChainRng::seeded(seed);
    let mut chain = init_chain_with(n, params.p_open, &mut rng)?;
    let scale = n as f64;
    let mut magnetization = chain.magnetization();
    let initial_climate = magnetization as f64 / scale;
    let mut trace = vec![(0, initial_climate)];

    let sites = (n - 3) as u64;
    let mut absorbed_at = classify_steady(&chain).is_absorbed().then_some(0);
    let mut iterations = 0;
    if absorbed_at.is_none() {
        for it in 1..=params.max_iters {
            let i = 1 + rng.below(sites) as usize;
            magnetization += chain.apply(i);
            iterations = it;
            if it % params.record_every == 0 {
                trace.push((it, magnetization as f64 / scale));
            }
            if (it % check_every == 0 || it == params.max_iters) && classify_steady(&chain).is_absorbed() {
                absorbed_at = Some(it);
                break;
            }
        }
    }
    let final_climate = magnetization as f64 / scale;
    if let Some(at) = absorbed_at {
        if trace.last().map(|p| p.0) != Some(at) {
            trace.push((at, final_climate));
        }
    }
    Ok(RealizationResult {
        final_kind: classify_steady(&chain),
        absorbed_at,
        iterations,
        initial_climate,
        final_climate,
        climate_trace: trace,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub closed_fractions: Vec<f64>,
    pub realizations: usize,
    pub n: usize,
    pub max_iters: u64,
    pub master_seed: u64,
    pub check_every: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub closed_fraction: f64,
    pub all_closed: usize,
    pub all_open: usize,
    pub mixed: usize,
    pub not_absorbed: usize,
    pub realizations: usize,
    pub mean_initial_climate: f64,
}

impl SweepPoint {
    fn freq(&self, k: usize) -> f64 {
        k as f64 / self.realizations as f64
    }
    pub fn p_all_closed(&self) -> f64 {
        self.freq(self.all_closed)
    }
    pub fn p_all_open(&self) -> f64 {
        self.freq(self.all_open)
    }
    pub fn p_mixed(&self) -> f64 {
        self.freq(self.mixed)
    }
    pub fn p_not_absorbed(&self) -> f64 {
        self.freq(self.not_absorbed)
    }
}

/// Runs `realizations` chains per closed fraction with `p_open = 1 - f`.
///
/// Realizations run on the current rayon pool; seeds come from [`derive_seed`], so the
/// result does not depend on the number of threads.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepPoint>, SznajdError> {
    if cfg.realizations == 0 {
        return Err(SznajdError::ZeroParameter("realizations"));
    }
    for &f in &cfg.closed_fractions {
        check_probability(f)?;
    }
    cfg.closed_fractions
        .iter()
        .enumerate()
        .map(|(point, &f)| {
            let params = RealizationParams {
                n: cfg.n,
                p_open: 1.0 - f,
                max_iters: cfg.max_iters,
                record_every: u64::MAX,
                check_every: cfg.check_every,
            };
            params.validate()?;
            let outcomes: Vec<(SteadyStateKind, f64)> = (0..cfg.realizations)
                .into_par_iter()
                .map(|r| {
                    let seed = derive_seed(cfg.master_seed, point as u64, r as u64);
                    run_realization(&params, seed).map(|res| (res.final_kind, res.initial_climate))
                })
                .collect::<Result<_, _>>()?;
            let count = |k| outcomes.iter().filter(|o| o.0 == k).count();
            Ok(SweepPoint {
                closed_fraction: f,
                all_closed: count(SteadyStateKind::AllClosed),
                all_open: count(SteadyStateKind::AllOpen),
                mixed: count(SteadyStateKind::Mixed),
                not_absorbed: count(SteadyStateKind::NotAbsorbed),
                realizations: cfg.realizations,
                mean_initial_climate: outcomes.iter().map(|o| o.1).sum::<f64>() / outcomes.len() as f64,
            })
        })
        .collect()
}
