/// FNV-1a over a stream of 64-bit words. Used to tie derived data to the
/// mesh and frame it was built from.
#[derive(Clone, Copy)]
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn word(&mut self, w: u64) {
        for b in w.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub(crate) fn f64(&mut self, x: f64) {
        self.word(x.to_bits());
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}
