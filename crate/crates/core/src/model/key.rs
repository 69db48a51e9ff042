use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::{smallvec, SmallVec};

const WORD: usize = 64;

/// A subset of buildings, stored as a packed bitmask.
///
/// Keys built for the same community have the same word count, so equality
/// and hashing only make sense between keys of one community.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoalitionKey {
    words: SmallVec<[u64; 1]>,
}

impl CoalitionKey {
    pub fn empty(players: usize) -> Self {
        let n_words = players.div_ceil(WORD).max(1);
        Self { words: smallvec![0; n_words] }
    }

    pub fn singleton(players: usize, i: usize) -> Self {
        let mut key = Self::empty(players);
        key.insert(i);
        key
    }

    pub fn grand(players: usize) -> Self {
        let mut key = Self::empty(players);
        for i in 0..players {
            key.insert(i);
        }
        key
    }

    /// Panics if a member index is not below `players`.
    pub fn from_members(players: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut key = Self::empty(players);
        for i in members {
            assert!(i < players, "member {i} out of range for {players} players");
            key.insert(i);
        }
        key
    }

    /// Key from the low `players` bits of `bits`.
    pub fn from_bits(players: usize, bits: u64) -> Self {
        assert!(players <= WORD);
        let mask = if players == WORD { u64::MAX } else { (1u64 << players) - 1 };
        let mut key = Self::empty(players);
        key.words[0] = bits & mask;
        key
    }

    /// The mask as a single word, if it fits.
    pub fn bits(&self) -> Option<u64> {
        if self.words[1..].iter().all(|&w| w == 0) {
            Some(self.words[0])
        } else {
            None
        }
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / WORD] |= 1u64 << (i % WORD);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / WORD] &= !(1u64 << (i % WORD));
    }

    pub fn with(&self, i: usize) -> Self {
        let mut key = self.clone();
        key.insert(i);
        key
    }

    pub fn contains(&self, i: usize) -> bool {
        i / WORD < self.words.len() && self.words[i / WORD] & (1u64 << (i % WORD)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self { words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect() }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            (0..WORD).filter(move |b| word & (1u64 << b) != 0).map(move |b| w * WORD + b)
        })
    }

    /// Lower-case hex mask, most significant word first, e.g. `0x5` for {0, 2}.
    pub fn to_hex(&self) -> String {
        let mut out = String::from("0x");
        let mut started = false;
        for &w in self.words.iter().rev() {
            if started {
                out.push_str(&format!("{w:016x}"));
            } else if w != 0 {
                out.push_str(&format!("{w:x}"));
                started = true;
            }
        }
        if !started {
            out.push('0');
        }
        out
    }

    pub fn from_hex(players: usize, hex: &str) -> Option<Self> {
        let digits = hex.strip_prefix("0x").unwrap_or(hex);
        let mut key = Self::empty(players);
        for (pos, ch) in digits.chars().rev().enumerate() {
            let nibble = ch.to_digit(16)? as u64;
            for b in 0..4 {
                if nibble & (1 << b) != 0 {
                    let i = pos * 4 + b;
                    if i >= players {
                        return None;
                    }
                    key.insert(i);
                }
            }
        }
        Some(key)
    }
}

impl fmt::Debug for CoalitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for CoalitionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Serialize for CoalitionKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for CoalitionKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let digits = s.strip_prefix("0x").unwrap_or(&s);
        let players = (digits.len() * 4).max(1);
        Self::from_hex(players, &s).ok_or_else(|| serde::de::Error::custom(format!("bad coalition mask `{s}`")))
    }
}
