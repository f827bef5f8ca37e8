//! Random functions on `[N]`, `N` a power of two.
//!
//! [`TabulatedFamily`] stores every function as an explicit table.
//! [`LazyFamily`] samples each function value on first use and remembers it,
//! which is the same distribution for any sequence of queries but costs
//! memory only for the points actually touched.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Largest supported domain.
pub const MAX_DOMAIN: u32 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `k` independent functions.
    Independent,
    /// One function applied `k` times.
    Same,
}

pub fn check_domain(n: u32) -> Result<(), SimError> {
    if n < 2 || !n.is_power_of_two() || n > MAX_DOMAIN {
        return Err(SimError::InvalidConfig(format!("N = {n} must be a power of two in [2, 2^22]")));
    }
    Ok(())
}

/// A uniform point of `[n]`; `n` is a power of two.
pub fn uniform_point<R: RngCore + ?Sized>(rng: &mut R, n: u32) -> u32 {
    rng.next_u32() & (n - 1)
}

/// Fills `table` with a uniform function on `[n]`.
pub fn fill_table<R: RngCore + ?Sized>(rng: &mut R, n: u32, table: &mut Vec<u32>) {
    table.resize(n as usize, 0);
    rng.fill(&mut table[..]);
    let mask = n - 1;
    for y in table.iter_mut() {
        *y &= mask;
    }
}

/// Oracle access to `h_1, ..., h_k` (indices are 1-based).
pub trait Oracle {
    fn domain(&self) -> u32;
    fn chain_length(&self) -> usize;
    fn query(&mut self, i: usize, x: u32) -> u32;

    /// `h_{[1,k]}(x)`.
    fn compose(&mut self, x: u32) -> u32 {
        (1..=self.chain_length()).fold(x, |v, i| self.query(i, v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabulatedFamily {
    n: u32,
    k: usize,
    mode: Mode,
    tables: Vec<Vec<u32>>,
}

impl TabulatedFamily {
    pub fn generate<R: RngCore + ?Sized>(n: u32, k: usize, mode: Mode, rng: &mut R) -> Result<Self, SimError> {
        check_domain(n)?;
        let count = match mode {
            Mode::Independent => k,
            Mode::Same => 1,
        };
        let tables = (0..count)
            .map(|_| {
                let mut t = Vec::new();
                fill_table(rng, n, &mut t);
                t
            })
            .collect();
        Ok(TabulatedFamily { n, k, mode, tables })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// The table of `h_i`.
    pub fn table(&self, i: usize) -> &[u32] {
        assert!((1..=self.k).contains(&i), "function index {i} outside 1..={}", self.k);
        match self.mode {
            Mode::Independent => &self.tables[i - 1],
            Mode::Same => &self.tables[0],
        }
    }

    pub fn eval(&self, i: usize, x: u32) -> u32 {
        self.table(i)[x as usize]
    }

    /// The image of the whole domain under `h_{[1,k]}` with preimage counts.
    pub fn composition(&self) -> Composition {
        let mut c = Composition::identity(self.n);
        for i in 1..=self.k {
            c.apply(self.table(i));
        }
        c
    }
}

impl Oracle for TabulatedFamily {
    fn domain(&self) -> u32 {
        self.n
    }

    fn chain_length(&self) -> usize {
        self.k
    }

    fn query(&mut self, i: usize, x: u32) -> u32 {
        self.eval(i, x)
    }
}

/// Functions sampled on demand from a private generator.
#[derive(Debug)]
pub struct LazyFamily<R> {
    n: u32,
    k: usize,
    mode: Mode,
    maps: Vec<HashMap<u32, u32>>,
    rng: R,
}

impl<R: RngCore> LazyFamily<R> {
    pub fn new(n: u32, k: usize, mode: Mode, rng: R) -> Result<Self, SimError> {
        check_domain(n)?;
        let count = match mode {
            Mode::Independent => k,
            Mode::Same => 1,
        };
        Ok(LazyFamily { n, k, mode, maps: vec![HashMap::new(); count], rng })
    }

    /// The generator, shared with whoever drives the experiment so one seed
    /// fixes both the functions and the attacker's coins.
    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    /// Number of function values fixed so far.
    pub fn defined(&self) -> usize {
        self.maps.iter().map(HashMap::len).sum()
    }
}

impl<R: RngCore> Oracle for LazyFamily<R> {
    fn domain(&self) -> u32 {
        self.n
    }

    fn chain_length(&self) -> usize {
        self.k
    }

    fn query(&mut self, i: usize, x: u32) -> u32 {
        assert!((1..=self.k).contains(&i), "function index {i} outside 1..={}", self.k);
        let slot = match self.mode {
            Mode::Independent => i - 1,
            Mode::Same => 0,
        };
        let (n, rng) = (self.n, &mut self.rng);
        *self.maps[slot].entry(x).or_insert_with(|| uniform_point(rng, n))
    }
}

/// Image of `[N]` under a composition, with the number of preimages of each
/// image point.
#[derive(Debug, Clone)]
pub struct Composition {
    n: u32,
    points: Vec<u32>,
    counts: Vec<u64>,
    stamp: Vec<u32>,
    slot: Vec<u32>,
    round: u32,
}

impl Composition {
    pub fn identity(n: u32) -> Self {
        Composition {
            n,
            points: (0..n).collect(),
            counts: vec![1; n as usize],
            stamp: vec![0; n as usize],
            slot: vec![0; n as usize],
            round: 0,
        }
    }

    /// Composes with one more function given as a table.
    pub fn apply(&mut self, table: &[u32]) {
        debug_assert_eq!(table.len(), self.n as usize);
        self.round += 1;
        let mut points = Vec::with_capacity(self.points.len());
        let mut counts: Vec<u64> = Vec::with_capacity(self.points.len());
        for (&x, &c) in self.points.iter().zip(&self.counts) {
            let y = table[x as usize];
            let yi = y as usize;
            if self.stamp[yi] == self.round {
                counts[self.slot[yi] as usize] += c;
            } else {
                self.stamp[yi] = self.round;
                self.slot[yi] = points.len() as u32;
                points.push(y);
                counts.push(c);
            }
        }
        self.points = points;
        self.counts = counts;
    }

    pub fn image_size(&self) -> usize {
        self.points.len()
    }

    /// Distinct image points.
    pub fn points(&self) -> &[u32] {
        &self.points
    }

    /// Preimage counts `L_j` of the image points, aligned with [`Self::points`].
    pub fn preimage_counts(&self) -> &[u64] {
        &self.counts
    }
}
