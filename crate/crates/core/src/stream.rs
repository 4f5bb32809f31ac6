//! Ordered multiset of observed scores with logarithmic rank queries.
//!
//! Backed by an arena treap whose node priorities are a hash of the key. The
//! tree shape is then a function of the set of distinct keys alone, so two
//! streams holding the same multiset are structurally identical regardless of
//! insertion order. Each node also carries its subtree count and value sum.

use serde::{Deserialize, Serialize};

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    key: f64,
    prio: u64,
    mult: u64,
    count: u64,
    sum: f64,
    left: u32,
    right: u32,
}

/// Result of a monotone search over the distinct keys of a [`ScoreStream`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    /// Smallest key satisfying the predicate, if any.
    pub first: Option<f64>,
    /// Number of stored elements strictly below `first` (all of them if `first` is `None`).
    pub below: u64,
    /// Largest key failing the predicate, if any.
    pub prev: Option<f64>,
}

/// Ordered multiset of scores.
#[derive(Debug, Clone, Default)]
pub struct ScoreStream {
    nodes: Vec<Node>,
    root: u32,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl ScoreStream {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            root: NIL,
        }
    }

    /// Total number of stored elements, duplicates included.
    pub fn len(&self) -> u64 {
        self.count(self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.root == NIL
    }

    /// Number of distinct values held.
    pub fn distinct(&self) -> usize {
        self.nodes.len()
    }

    pub fn sum(&self) -> f64 {
        self.sum_of(self.root)
    }

    pub fn insert(&mut self, key: f64) {
        self.insert_many(key, 1);
    }

    fn insert_many(&mut self, key: f64, mult: u64) {
        debug_assert!(key.is_finite());
        // -0.0 and 0.0 must share a node
        let key = key + 0.0;
        self.root = self.insert_at(self.root, key, mult);
    }

    fn insert_at(&mut self, at: u32, key: f64, mult: u64) -> u32 {
        if at == NIL {
            let idx = self.nodes.len() as u32;
            self.nodes.push(Node {
                key,
                prio: splitmix64(key.to_bits()),
                mult,
                count: mult,
                sum: key * mult as f64,
                left: NIL,
                right: NIL,
            });
            return idx;
        }
        let node_key = self.nodes[at as usize].key;
        if key == node_key {
            self.nodes[at as usize].mult += mult;
            self.pull(at);
            return at;
        }
        if key < node_key {
            let child = self.insert_at(self.nodes[at as usize].left, key, mult);
            self.nodes[at as usize].left = child;
            if self.nodes[child as usize].prio > self.nodes[at as usize].prio {
                return self.rotate_right(at);
            }
        } else {
            let child = self.insert_at(self.nodes[at as usize].right, key, mult);
            self.nodes[at as usize].right = child;
            if self.nodes[child as usize].prio > self.nodes[at as usize].prio {
                return self.rotate_left(at);
            }
        }
        self.pull(at);
        at
    }

    fn rotate_right(&mut self, at: u32) -> u32 {
        let l = self.nodes[at as usize].left;
        self.nodes[at as usize].left = self.nodes[l as usize].right;
        self.nodes[l as usize].right = at;
        self.pull(at);
        self.pull(l);
        l
    }

    fn rotate_left(&mut self, at: u32) -> u32 {
        let r = self.nodes[at as usize].right;
        self.nodes[at as usize].right = self.nodes[r as usize].left;
        self.nodes[r as usize].left = at;
        self.pull(at);
        self.pull(r);
        r
    }

    fn pull(&mut self, at: u32) {
        let (l, r) = {
            let n = &self.nodes[at as usize];
            (n.left, n.right)
        };
        let count = self.count(l) + self.count(r) + self.nodes[at as usize].mult;
        let sum = self.sum_of(l)
            + self.nodes[at as usize].key * self.nodes[at as usize].mult as f64
            + self.sum_of(r);
        let n = &mut self.nodes[at as usize];
        n.count = count;
        n.sum = sum;
    }

    fn count(&self, at: u32) -> u64 {
        if at == NIL {
            0
        } else {
            self.nodes[at as usize].count
        }
    }

    fn sum_of(&self, at: u32) -> f64 {
        if at == NIL {
            0.0
        } else {
            self.nodes[at as usize].sum
        }
    }

    /// `#{x : x <= key}`.
    pub fn rank_le(&self, key: f64) -> u64 {
        self.count_sum_le(key).0
    }

    /// `#{x : x < key}`.
    pub fn rank_lt(&self, key: f64) -> u64 {
        let mut at = self.root;
        let mut acc = 0;
        while at != NIL {
            let n = &self.nodes[at as usize];
            if n.key < key {
                acc += self.count(n.left) + n.mult;
                at = n.right;
            } else {
                at = n.left;
            }
        }
        acc
    }

    /// Count and sum of the elements `<= key`.
    pub fn count_sum_le(&self, key: f64) -> (u64, f64) {
        let mut at = self.root;
        let (mut c, mut s) = (0u64, 0.0f64);
        while at != NIL {
            let n = &self.nodes[at as usize];
            if n.key <= key {
                c += self.count(n.left) + n.mult;
                s += self.sum_of(n.left) + n.key * n.mult as f64;
                at = n.right;
            } else {
                at = n.left;
            }
        }
        (c, s)
    }

    /// The `k`-th smallest element, 1-based.
    pub fn select(&self, k: u64) -> Option<f64> {
        if k == 0 || k > self.len() {
            return None;
        }
        let mut at = self.root;
        let mut k = k;
        loop {
            let n = &self.nodes[at as usize];
            let lc = self.count(n.left);
            if k <= lc {
                at = n.left;
            } else if k <= lc + n.mult {
                return Some(n.key);
            } else {
                k -= lc + n.mult;
                at = n.right;
            }
        }
    }

    /// Finds the smallest distinct key for which `pred(key, rank_le(key))` holds.
    ///
    /// `pred` must be monotone: false on a prefix of the sorted keys, true after.
    pub fn first_satisfying(&self, mut pred: impl FnMut(f64, u64) -> bool) -> Boundary {
        let mut at = self.root;
        let mut offset = 0;
        let mut first = None;
        let mut below = self.len();
        let mut prev = None;
        while at != NIL {
            let n = &self.nodes[at as usize];
            let lt = offset + self.count(n.left);
            let le = lt + n.mult;
            if pred(n.key, le) {
                first = Some(n.key);
                below = lt;
                at = n.left;
            } else {
                prev = Some(n.key);
                offset = le;
                at = n.right;
            }
        }
        Boundary { first, below, prev }
    }

    /// Distinct values with multiplicities, ascending.
    pub fn iter(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        let mut stack = Vec::new();
        let mut at = self.root;
        std::iter::from_fn(move || {
            while at != NIL {
                stack.push(at);
                at = self.nodes[at as usize].left;
            }
            let top = stack.pop()?;
            let n = &self.nodes[top as usize];
            at = n.right;
            Some((n.key, n.mult))
        })
    }

    /// All elements ascending, duplicates expanded.
    pub fn to_sorted_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() as usize);
        for (k, m) in self.iter() {
            out.extend(std::iter::repeat_n(k, m as usize));
        }
        out
    }
}

impl PartialEq for ScoreStream {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().eq(other.iter())
    }
}

impl FromIterator<f64> for ScoreStream {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.insert(x);
        }
        s
    }
}

/// Serialized form: ascending `[value, multiplicity]` pairs.
#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct StreamRepr(Vec<(f64, u64)>);

impl Serialize for ScoreStream {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StreamRepr(self.iter().collect()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScoreStream {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let StreamRepr(pairs) = StreamRepr::deserialize(d)?;
        let mut s = Self::new();
        for (k, m) in pairs {
            if !k.is_finite() || m == 0 {
                return Err(serde::de::Error::custom("invalid stream entry"));
            }
            s.insert_many(k, m);
        }
        Ok(s)
    }
}
