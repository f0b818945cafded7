//! Bit-packed measurement strings (64 sites per machine word).
//!
//! Bit `j` (1-based) is set when qubit `j` measured `X_j = -1`.

use std::fmt;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitString {
    n: u32,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(n: u32) -> Self {
        BitString {
            n,
            words: vec![0; (n as usize).div_ceil(64)],
        }
    }

    pub fn len(&self) -> u32 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, site: u32) -> bool {
        debug_assert!(site >= 1 && site <= self.n);
        let i = (site - 1) as usize;
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    /// Reads bit `site`, treating out-of-range sites as 0.
    #[inline]
    pub fn get_padded(&self, site: i64) -> u64 {
        if site < 1 || site > self.n as i64 {
            return 0;
        }
        let i = (site - 1) as usize;
        (self.words[i >> 6] >> (i & 63)) & 1
    }

    #[inline]
    pub fn set(&mut self, site: u32, value: bool) {
        debug_assert!(site >= 1 && site <= self.n);
        let i = (site - 1) as usize;
        if value {
            self.words[i >> 6] |= 1 << (i & 63);
        } else {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    #[inline]
    pub fn flip(&mut self, site: u32) {
        debug_assert!(site >= 1 && site <= self.n);
        let i = (site - 1) as usize;
        self.words[i >> 6] ^= 1 << (i & 63);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (1..=self.n).map(move |s| self.get(s))
    }

    /// Parity of the bits at `sites` (out-of-range sites read as 0).
    pub fn parity_at(&self, sites: &[u32]) -> bool {
        let mut p = 0u64;
        for &s in sites {
            p ^= self.get_padded(s as i64);
        }
        p == 1
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Builds a string from a basis-state index with site 1 as the most
    /// significant bit (the statevector convention).
    pub fn from_basis_index(index: usize, n: u32) -> Self {
        let mut b = BitString::zeros(n);
        for site in 1..=n {
            if (index >> (n - site)) & 1 == 1 {
                b.set(site, true);
            }
        }
        b
    }

    /// Inverse of [`BitString::from_basis_index`]; panics if `n > 63`.
    pub fn to_basis_index(&self) -> usize {
        assert!(self.n <= 63);
        let mut idx = 0usize;
        for site in 1..=self.n {
            idx = (idx << 1) | self.get(site) as usize;
        }
        idx
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}

const SYNDROME_MAGIC: u32 = 0x53_59_4e_31; // "SYN1"

/// Writes syndrome samples as packed binary with a 16-byte header
/// (magic, N, shot count).
pub fn write_syndromes<W: std::io::Write>(
    mut w: W,
    samples: &[BitString],
    path_for_err: &str,
) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path_for_err.to_string(),
        source,
    };
    let n = samples.first().map_or(0, |s| s.n);
    w.write_all(&SYNDROME_MAGIC.to_le_bytes()).map_err(io_err)?;
    w.write_all(&n.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(samples.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    for s in samples {
        assert_eq!(s.n, n, "mixed chain lengths in one dump");
        for word in &s.words {
            w.write_all(&word.to_le_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}

pub fn read_syndromes<R: std::io::Read>(mut r: R, path_for_err: &str) -> Result<Vec<BitString>> {
    let io_err = |source| Error::Io {
        path: path_for_err.to_string(),
        source,
    };
    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(io_err)?;
    let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
    if magic != SYNDROME_MAGIC {
        return Err(Error::input("bad syndrome dump magic"));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let shots = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let words_per = (n as usize).div_ceil(64);
    let mut out = Vec::with_capacity(shots as usize);
    let mut buf = vec![0u8; words_per * 8];
    for _ in 0..shots {
        r.read_exact(&mut buf).map_err(io_err)?;
        let words = buf
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(BitString { n, words });
    }
    Ok(out)
}
