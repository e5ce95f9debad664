//! Jigsaw arrangements: permutations of the N patch slots. A fixed, seeded
//! subset of the N! space forms the pretext label space; the index of an
//! arrangement in that set is its class label.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{invalid, Result, SkidError};
use crate::rng::seeded;

/// Destination slot for each source patch: output slot `perm[i]` receives
/// input patch `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arrangement {
    perm: Vec<usize>,
}

impl Arrangement {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(invalid(format!("{perm:?} is not a permutation of 0..{n}")));
            }
        }
        Ok(Arrangement { perm })
    }

    pub fn identity(n: usize) -> Self {
        Arrangement {
            perm: (0..n).collect(),
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverse(&self) -> Arrangement {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        Arrangement { perm: inv }
    }

    /// Reorders `items` so that output slot `perm[i]` holds `items[i]`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Result<Vec<T>> {
        if items.len() != self.perm.len() {
            return Err(invalid(format!(
                "arrangement of {} slots applied to {} patches",
                self.perm.len(),
                items.len()
            )));
        }
        let mut out: Vec<Option<T>> = vec![None; items.len()];
        for (item, &dst) in items.iter().zip(&self.perm) {
            out[dst] = Some(item.clone());
        }
        Ok(out.into_iter().map(|v| v.expect("bijection")).collect())
    }
}

/// Inverse arrangement; `apply(apply(x, a), invert(a)) == x`.
pub fn invert_arrangement(a: &Arrangement) -> Arrangement {
    a.inverse()
}

pub fn apply_arrangement<T: Clone>(patches: &[T], a: &Arrangement) -> Result<Vec<T>> {
    a.apply(patches)
}

/// Ordered set of distinct arrangements; list position is the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrangementSet {
    n_patches: usize,
    seed: u64,
    arrangements: Vec<Arrangement>,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).fold(1u128, |acc, v| acc.saturating_mul(v))
}

pub(crate) fn perfect_square_root(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

// Above this many permutations the full space is never enumerated.
const ENUMERATE_LIMIT: u128 = 400_000;

impl ArrangementSet {
    /// Draws `k` distinct permutations uniformly without replacement from
    /// the `n_patches!` space. Deterministic for a fixed seed.
    pub fn generate(n_patches: usize, k: usize, seed: u64) -> Result<Self> {
        if perfect_square_root(n_patches).is_none() || n_patches == 0 {
            return Err(invalid(format!("n_patches={n_patches} is not a perfect square")));
        }
        let space = factorial(n_patches);
        if k == 0 || k as u128 > space {
            return Err(invalid(format!(
                "k={k} must be in [1, {n_patches}!] = [1, {space}]"
            )));
        }
        let mut rng = seeded(seed);
        let arrangements = if space <= ENUMERATE_LIMIT && (k as u128) * 2 > space {
            let mut all = all_permutations(n_patches);
            all.shuffle(&mut rng);
            all.truncate(k);
            all
        } else {
            let mut seen: HashSet<Vec<usize>> = HashSet::with_capacity(k);
            let mut out = Vec::with_capacity(k);
            let mut base: Vec<usize> = (0..n_patches).collect();
            while out.len() < k {
                base.shuffle(&mut rng);
                if seen.insert(base.clone()) {
                    out.push(base.clone());
                }
            }
            out
        };
        Ok(ArrangementSet {
            n_patches,
            seed,
            arrangements: arrangements
                .into_iter()
                .map(|perm| Arrangement { perm })
                .collect(),
        })
    }

    pub fn from_parts(n_patches: usize, seed: u64, arrangements: Vec<Arrangement>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, a) in arrangements.iter().enumerate() {
            if a.len() != n_patches {
                return Err(SkidError::Mismatch(format!(
                    "arrangement {i} has {} slots, set declares N={n_patches}",
                    a.len()
                )));
            }
            if !seen.insert(a.perm.clone()) {
                return Err(invalid(format!("arrangement {i} is a duplicate")));
            }
        }
        if arrangements.is_empty() {
            return Err(invalid("arrangement set is empty"));
        }
        Ok(ArrangementSet {
            n_patches,
            seed,
            arrangements,
        })
    }

    pub fn n_patches(&self) -> usize {
        self.n_patches
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.arrangements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrangements.is_empty()
    }

    pub fn get(&self, label: usize) -> Option<&Arrangement> {
        self.arrangements.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arrangement> {
        self.arrangements.iter()
    }

    pub fn label_of(&self, a: &Arrangement) -> Option<usize> {
        self.arrangements.iter().position(|x| x == a)
    }

    /// Fails unless the set was built for `n_patches` slots.
    pub fn ensure_patches(&self, n_patches: usize) -> Result<()> {
        if self.n_patches != n_patches {
            return Err(SkidError::Mismatch(format!(
                "arrangement set has N={} but the pipeline uses N={n_patches}",
                self.n_patches
            )));
        }
        Ok(())
    }

    /// Text form: `SKIDARR v1 N=<n> K=<k> SEED=<s>` then one comma-separated
    /// permutation per line.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "SKIDARR v1 N={} K={} SEED={}\n",
            self.n_patches,
            self.arrangements.len(),
            self.seed
        );
        for a in &self.arrangements {
            let line: Vec<String> = a.perm.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| parse_err(1, "empty file"))?;
        let (n, k, seed) = parse_header(&header)?;
        let mut arrangements = Vec::with_capacity(k);
        for i in 0..k {
            let line_no = i + 2;
            let line = lines
                .next()
                .transpose()?
                .ok_or_else(|| parse_err(line_no, &format!("expected {k} arrangements, found {i}")))?;
            let perm: Vec<usize> = line
                .trim()
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(line_no, &format!("bad integer: {e}")))?;
            if perm.len() != n {
                return Err(SkidError::Format {
                    offset: line_no as u64,
                    msg: format!("line {line_no} has {} entries but header says N={n}", perm.len()),
                });
            }
            arrangements.push(Arrangement::new(perm).map_err(|e| parse_err(line_no, &e.to_string()))?);
        }
        for (i, rest) in lines.enumerate() {
            if !rest?.trim().is_empty() {
                return Err(parse_err(k + 2 + i, "trailing data after declared K arrangements"));
            }
        }
        ArrangementSet::from_parts(n, seed, arrangements)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io_util::write_atomic(path.as_ref(), self.to_text().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

fn parse_err(line: usize, msg: &str) -> SkidError {
    SkidError::Parse {
        line,
        msg: msg.to_string(),
    }
}

fn parse_header(h: &str) -> Result<(usize, usize, u64)> {
    let parts: Vec<&str> = h.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "SKIDARR" || parts[1] != "v1" {
        return Err(parse_err(1, &format!("bad header `{h}`")));
    }
    let field = |p: &str, key: &str| -> Result<u64> {
        p.strip_prefix(key)
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| parse_err(1, &format!("expected {key}<int>, got `{p}`")))
    };
    Ok((
        field(parts[2], "N=")? as usize,
        field(parts[3], "K=")? as usize,
        field(parts[4], "SEED=")?,
    ))
}

/// Every permutation of 0..n in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).expect("exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}
