//! Bit-packed binary frames and masks.

/// Row-major bit-packed binary image. Pixel n (= y * width + x) lives in word
/// n / 64 at bit n % 64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl Bitmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        let nwords = (width * height).div_ceil(64);
        Self {
            width,
            height,
            words: vec![0; nwords],
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        let mut b = Self::zeros(width, height);
        for w in &mut b.words {
            *w = u64::MAX;
        }
        b.clear_tail();
        b
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut b = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    b.set(x, y, true);
                }
            }
        }
        b
    }

    /// Zero any bits past width*height so popcounts stay exact.
    fn clear_tail(&mut self) {
        let n = self.width * self.height;
        let rem = n % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_dimensions(&self, other: &Bitmap) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        let n = y * self.width + x;
        (self.words[n / 64] >> (n % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        let n = y * self.width + x;
        let mask = 1u64 << (n % 64);
        if v {
            self.words[n / 64] |= mask;
        } else {
            self.words[n / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn subset_of(&self, other: &Bitmap) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Packed row-major bytes, LSB-first, exactly ceil(pixels / 8) long.
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let nbytes = self.pixels().div_ceil(8);
        let mut out = vec![0u8; nbytes];
        for (i, byte) in out.iter_mut().enumerate() {
            let word = self.words[i / 8];
            *byte = (word >> ((i % 8) * 8)) as u8;
        }
        out
    }

    pub fn from_packed_bytes(width: usize, height: usize, bytes: &[u8]) -> Option<Self> {
        let nbytes = (width * height).div_ceil(8);
        if bytes.len() != nbytes {
            return None;
        }
        let mut b = Self::zeros(width, height);
        for (i, &byte) in bytes.iter().enumerate() {
            b.words[i / 8] |= (byte as u64) << ((i % 8) * 8);
        }
        b.clear_tail();
        Some(b)
    }
}
