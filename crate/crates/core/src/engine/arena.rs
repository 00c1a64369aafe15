//! Shared 64KB memory with a per-byte ownership ledger.

pub const ARENA_SIZE: usize = 65536;

/// Last writer of an arena byte: `None` or a (player, part) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Owner(u8);

impl Owner {
    pub const NONE: Owner = Owner(0);

    pub fn part(player: usize, part: usize) -> Owner {
        debug_assert!(player < 8 && part < 2);
        Owner((player * 2 + part + 1) as u8)
    }

    pub fn is_none(self) -> bool {
        self.0 == 0
    }

    pub fn player(self) -> Option<usize> {
        (self.0 != 0).then(|| (self.0 as usize - 1) / 2)
    }

    pub fn part_index(self) -> Option<usize> {
        (self.0 != 0).then(|| (self.0 as usize - 1) % 2)
    }

    fn slot(self) -> usize {
        self.0 as usize
    }
}

/// Outcome of a single byte write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteEffect {
    pub value_changed: bool,
    pub owner_changed: bool,
    pub counted: bool,
}

#[derive(Clone)]
pub struct Arena {
    bytes: Box<[u8]>,
    owner: Box<[Owner]>,
    counters: [u64; 17],
}

impl Default for Arena {
    fn default() -> Self {
        Arena::new()
    }
}

impl std::fmt::Debug for Arena {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Arena").field("counters", &self.counters).finish_non_exhaustive()
    }
}

impl Arena {
    pub fn new() -> Arena {
        Arena {
            bytes: vec![0u8; ARENA_SIZE].into_boxed_slice(),
            owner: vec![Owner::NONE; ARENA_SIZE].into_boxed_slice(),
            counters: [0; 17],
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn owners(&self) -> &[Owner] {
        &self.owner
    }

    pub fn read(&self, addr: u16) -> u8 {
        self.bytes[addr as usize]
    }

    pub fn read_word(&self, addr: u16) -> u16 {
        self.read(addr) as u16 | (self.read(addr.wrapping_add(1)) as u16) << 8
    }

    pub fn owner(&self, addr: u16) -> Owner {
        self.owner[addr as usize]
    }

    /// Loader write: sets ownership without counting a new byte.
    pub fn load(&mut self, addr: u16, value: u8, owner: Owner) {
        self.bytes[addr as usize] = value;
        self.owner[addr as usize] = owner;
    }

    /// A byte counts as new when it was never written or its last writer
    /// belongs to another player.
    pub fn write(&mut self, addr: u16, value: u8, by: Owner) -> WriteEffect {
        let i = addr as usize;
        let prev = self.owner[i];
        let counted = prev.is_none() || prev.player() != by.player();
        if counted {
            self.counters[by.slot()] += 1;
        }
        let effect = WriteEffect {
            value_changed: self.bytes[i] != value,
            owner_changed: prev != by,
            counted,
        };
        self.bytes[i] = value;
        self.owner[i] = by;
        effect
    }

    /// New-byte counter of one part.
    pub fn written(&self, owner: Owner) -> u64 {
        self.counters[owner.slot()]
    }

    /// Reads `N` bytes starting at `addr`, wrapping at the segment end.
    pub fn window<const N: usize>(&self, addr: u16) -> [u8; N] {
        let mut out = [0u8; N];
        for (k, b) in out.iter_mut().enumerate() {
            *b = self.read(addr.wrapping_add(k as u16));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn owner_encoding() {
        let o = Owner::part(3, 1);
        assert_eq!(o.player(), Some(3));
        assert_eq!(o.part_index(), Some(1));
        assert_eq!(Owner::NONE.player(), None);
    }

    #[test]
    fn new_byte_counting() {
        let mut a = Arena::new();
        let p0 = Owner::part(0, 0);
        let p0b = Owner::part(0, 1);
        let p1 = Owner::part(1, 0);
        assert!(a.write(10, 1, p0).counted);
        assert!(!a.write(10, 2, p0).counted);
        // the sibling part belongs to the same player
        assert!(!a.write(10, 3, p0b).counted);
        assert!(a.write(10, 4, p1).counted);
        assert!(a.write(10, 5, p0).counted);
        assert_eq!(a.written(p0), 2);
        assert_eq!(a.written(p0b), 0);
        assert_eq!(a.written(p1), 1);
    }

    #[test]
    fn loader_writes_are_not_counted() {
        let mut a = Arena::new();
        let p0 = Owner::part(0, 0);
        a.load(5, 0x90, p0);
        assert_eq!(a.owner(5), p0);
        assert!(!a.write(5, 0x90, p0).counted);
        assert_eq!(a.written(p0), 0);
    }

    #[test]
    fn word_reads_wrap() {
        let mut a = Arena::new();
        a.load(0xFFFF, 0x34, Owner::NONE);
        a.load(0, 0x12, Owner::NONE);
        assert_eq!(a.read_word(0xFFFF), 0x1234);
    }
}
