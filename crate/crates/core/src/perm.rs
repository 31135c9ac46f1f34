//! Bijections on `{0, …, n-1}` used for row and column reorderings.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::SeededRng;

/// Validated permutation; `map[i]` is the source index placed at position `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &m in &map {
            if m >= n {
                return Err(Error::NotAPermutation(format!(
                    "index {m} out of range for length {n}"
                )));
            }
            if seen[m] {
                return Err(Error::NotAPermutation(format!("index {m} repeated")));
            }
            seen[m] = true;
        }
        Ok(Permutation { map })
    }

    /// Uniformly random permutation (Fisher-Yates).
    pub fn random(n: usize, rng: &mut SeededRng) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut map);
        Permutation { map }
    }

    /// Permutation sorting `keys` ascending; ties keep index order.
    pub fn argsort(keys: &[f64]) -> Self {
        let mut map: Vec<usize> = (0..keys.len()).collect();
        map.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
        Permutation { map }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.map.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Permutation { map: inv }
    }

    /// `self ∘ other`: position `i` takes source `other[self[i]]`.
    pub fn then(&self, other: &Permutation) -> Result<Self> {
        check_len("Permutation::then", self.len(), other.len())?;
        Ok(Permutation {
            map: self.map.iter().map(|&m| other.map[m]).collect(),
        })
    }

    /// Gathers `out[i] = v[map[i]]`.
    pub fn apply<T: Copy>(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("Permutation::apply", self.len(), v.len())?;
        Ok(self.map.iter().map(|&m| v[m]).collect())
    }

    /// Scatters `out[map[i]] = v[i]`, the inverse of [`apply`](Self::apply).
    pub fn apply_inverse<T: Copy + Default>(&self, v: &[T]) -> Result<Vec<T>> {
        check_len("Permutation::apply_inverse", self.len(), v.len())?;
        let mut out = vec![T::default(); v.len()];
        for (i, &m) in self.map.iter().enumerate() {
            out[m] = v[i];
        }
        Ok(out)
    }

    pub fn reversed(&self) -> Self {
        Permutation {
            map: self.map.iter().rev().copied().collect(),
        }
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.map
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_repeats_and_out_of_range() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(Permutation::new(vec![1, 0, 2]).is_ok());
    }

    #[test]
    fn inverse_composes_to_identity() {
        let mut rng = SeededRng::new(9);
        let p = Permutation::random(50, &mut rng);
        assert!(p.then(&p.inverse()).unwrap().is_identity());
        assert!(p.inverse().then(&p).unwrap().is_identity());
    }

    #[test]
    fn apply_and_scatter_are_inverse() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let v = [10, 20, 30];
        let g = p.apply(&v).unwrap();
        assert_eq!(g, vec![30, 10, 20]);
        assert_eq!(p.apply_inverse(&g).unwrap(), v.to_vec());
    }

    #[test]
    fn json_round_trip_validates() {
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1,2,0]");
        let q: Permutation = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Permutation>("[0,0]").is_err());
    }

    #[test]
    fn argsort_breaks_ties_by_index() {
        let p = Permutation::argsort(&[0.5, 0.1, 0.5, 0.0]);
        assert_eq!(p.as_slice(), &[3, 1, 0, 2]);
    }
}
