//! Per-allocation borrow stacks and the access rules every machine shares.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::ir::PairKind;

pub type Tag = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PtrKind {
    /// Owned.
    O,
    /// Mutably borrowed.
    Mb,
    /// Read-only borrowed.
    Rb,
    /// Copied.
    C,
    /// Unique: a copied pointer promoted to owner-like access.
    U,
}

impl PtrKind {
    pub fn name(self) -> &'static str {
        match self {
            PtrKind::O => "o",
            PtrKind::Mb => "mb",
            PtrKind::Rb => "rb",
            PtrKind::C => "c",
            PtrKind::U => "u",
        }
    }

    /// Owner-like kinds whose top-of-stack cache is kept in sync with memory.
    pub fn is_exclusive(self) -> bool {
        matches!(self, PtrKind::O | PtrKind::Mb | PtrKind::U)
    }
}

impl fmt::Display for PtrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Entries bottom to top; the last element is the top of the stack.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct BorrowStack {
    entries: Vec<(Tag, PtrKind)>,
}

impl BorrowStack {
    pub fn entries(&self) -> &[(Tag, PtrKind)] {
        &self.entries
    }

    pub fn top(&self) -> Option<(Tag, PtrKind)> {
        self.entries.last().copied()
    }

    fn position(&self, tag: Tag) -> Option<usize> {
        self.entries.iter().rposition(|&(t, _)| t == tag)
    }
}

impl fmt::Display for BorrowStack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (tag, _) in self.entries.iter().rev() {
            write!(f, "{tag} :: ")?;
        }
        f.write_str("[]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Allocation {
    pub size: u64,
    pub stack: BorrowStack,
}

/// What an access found before it changed the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub kind: PtrKind,
    /// The accessing entry was on top of the stack (nothing above it).
    pub was_top: bool,
}

/// Outcome of a successful borrow or copy pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairInfo {
    pub lender_kind: PtrKind,
    pub was_top: bool,
}

pub type Rule = &'static str;

/// All allocations keyed by base address.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct BorrowStore {
    allocs: BTreeMap<u64, Allocation>,
}

impl BorrowStore {
    pub fn allocations(&self) -> &BTreeMap<u64, Allocation> {
        &self.allocs
    }

    /// Base address of the allocation containing `addr`.
    pub fn base_of(&self, addr: u64) -> Option<u64> {
        let (&base, a) = self.allocs.range(..=addr).next_back()?;
        (addr - base < a.size).then_some(base)
    }

    pub fn stack_at(&self, addr: u64) -> Option<&BorrowStack> {
        self.base_of(addr).map(|b| &self.allocs[&b].stack)
    }

    fn stack_mut(&mut self, addr: u64) -> Result<&mut BorrowStack, Rule> {
        let base = self.base_of(addr).ok_or("out-of-bounds")?;
        Ok(&mut self.allocs.get_mut(&base).expect("base exists").stack)
    }

    /// Kind and top-ness of `tag` at `addr`, if present.
    pub fn lookup(&self, addr: u64, tag: Tag) -> Option<Access> {
        let stack = self.stack_at(addr)?;
        let i = stack.position(tag)?;
        Some(Access { kind: stack.entries[i].1, was_top: i + 1 == stack.entries.len() })
    }

    /// New allocation whose stack holds one entry.
    pub fn allocate(&mut self, base: u64, size: u64, tag: Tag, kind: PtrKind) {
        let stack = BorrowStack { entries: vec![(tag, kind)] };
        self.allocs.insert(base, Allocation { size, stack });
    }

    /// Borrow or copy pair: the lender entry is replaced by the successor and the new
    /// borrow is pushed on top. Everything above the lender is discarded.
    pub fn pair(
        &mut self,
        addr: u64,
        lender: Tag,
        pair: PairKind,
        succ: Tag,
        bor: Tag,
    ) -> Result<PairInfo, Rule> {
        let stack = self.stack_mut(addr)?;
        let i = stack.position(lender).ok_or("tag-not-in-stack")?;
        let kind = stack.entries[i].1;
        let pushed = match pair {
            PairKind::Mut if kind.is_exclusive() => PtrKind::Mb,
            PairKind::Mut => return Err("mut-borrow-from-shared"),
            PairKind::Ro if kind == PtrKind::C => return Err("ro-borrow-from-copied"),
            PairKind::Ro => PtrKind::Rb,
            PairKind::Copy => PtrKind::C,
        };
        let was_top = i + 1 == stack.entries.len();
        stack.entries.truncate(i);
        stack.entries.push((succ, kind));
        stack.entries.push((bor, pushed));
        Ok(PairInfo { lender_kind: kind, was_top })
    }

    /// Ends a borrow. Returns the tag of the entry directly below (the successor).
    pub fn die(&mut self, addr: u64, tag: Tag) -> Result<(PtrKind, Tag), Rule> {
        let stack = self.stack_mut(addr)?;
        let i = stack.position(tag).ok_or("tag-not-in-stack")?;
        let kind = stack.entries[i].1;
        match kind {
            PtrKind::C => return Err("die-on-copied"),
            PtrKind::O | PtrKind::U => return Err("die-on-owned"),
            PtrKind::Mb | PtrKind::Rb => {}
        }
        if i + 1 != stack.entries.len() {
            return Err("die-not-top");
        }
        if i == 0 {
            return Err("die-successor-not-found");
        }
        let (succ, below) = stack.entries[i - 1];
        if kind == PtrKind::Mb && !below.is_exclusive() {
            return Err("die-successor-kind");
        }
        stack.entries.pop();
        Ok((kind, succ))
    }

    pub fn store(&mut self, addr: u64, tag: Tag) -> Result<Access, Rule> {
        let stack = self.stack_mut(addr)?;
        let i = stack.position(tag).ok_or("tag-not-in-stack")?;
        let kind = stack.entries[i].1;
        let was_top = i + 1 == stack.entries.len();
        match kind {
            PtrKind::Rb => return Err("write-through-ro"),
            PtrKind::C => {}
            _ => stack.entries.truncate(i + 1),
        }
        Ok(Access { kind, was_top })
    }

    pub fn load(&mut self, addr: u64, tag: Tag) -> Result<Access, Rule> {
        let stack = self.stack_mut(addr)?;
        let i = stack.position(tag).ok_or("tag-not-in-stack")?;
        let kind = stack.entries[i].1;
        let was_top = i + 1 == stack.entries.len();
        if kind != PtrKind::C {
            let above: Vec<_> = stack.entries.drain(i + 1..).filter(|&(_, k)| k == PtrKind::C).collect();
            stack.entries.extend(above);
        }
        Ok(Access { kind, was_top })
    }

    /// Replaces the entry for `tag` by `(new_tag, to)`; the entry must currently have kind `from`.
    pub fn rekind(&mut self, addr: u64, tag: Tag, from: PtrKind, new_tag: Tag, to: PtrKind) -> Result<(), Rule> {
        let stack = self.stack_mut(addr)?;
        let i = stack.position(tag).ok_or("tag-not-in-stack")?;
        if stack.entries[i].1 != from {
            return Err(if from == PtrKind::C { "unique-from-non-copied" } else { "end-unique-on-non-unique" });
        }
        stack.entries[i] = (new_tag, to);
        Ok(())
    }
}
