//! The survivor grammar as data, random derivation and rendering to source.
//!
//! Nonterminals are either *block* rules, which render as whole lines
//! (sections, labels, jumps), or *inline* rules, which render as an operand
//! fragment inside their parent's line. Each alternative carries a line
//! template whose `{N}` placeholders are filled by its inline items in order.

mod ast;
mod grow;
mod render;

pub use ast::{parse_trees, write_trees, Ast, SubtreePoint, AST_HEADER};

/// Index of a nonterminal in [`Grammar::rules`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Nt(pub u8);

pub const SECTION: Nt = Nt(0);
pub const LABEL: Nt = Nt(1);
pub const FORWARD_JUMP: Nt = Nt(2);
pub const BACKWARDS_JUMP: Nt = Nt(3);
pub const CALL_FUNC: Nt = Nt(4);
pub const RETURN: Nt = Nt(5);
pub const ADDRESS: Nt = Nt(6);
pub const REG_CONST_ADDRESS: Nt = Nt(7);
pub const HALF_CONST_ADDRESS: Nt = Nt(8);
pub const REG_HALF: Nt = Nt(9);
pub const REG_ADDRESS: Nt = Nt(10);
pub const HALF_ADDRESS: Nt = Nt(11);
pub const OP_OR_SPECIAL: Nt = Nt(12);

/// Terminal classes. Each is a fixed, ordered list of literals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Terminals {
    Reg,
    HalfReg,
    Base,
    PopReg,
    PushReg,
    Const,
    Op,
    OpSingle,
    OpDouble,
    OpJmp,
    OpRep,
    OpFunction,
    OpSpecial,
    OpPointer,
    OpRet,
    OpShift,
    Size,
    Count,
    /// Any 16-bit value, rendered in decimal. Stands in for the random
    /// seeds and the timestamp of the random-number patterns.
    Word,
}

const REG: &[&str] = &["ax", "bx", "cx", "dx", "si", "di", "bp", "sp"];
const HALF_REG: &[&str] = &["ah", "al", "bh", "bl", "ch", "cl", "dh", "dl"];
const BASE: &[&str] = &["bx", "si", "di", "bp"];
const POP_REG: &[&str] = &[
    "ax", "bx", "cx", "dx", "si", "di", "bp", "WORD [bx]", "WORD [si]", "WORD [di]", "WORD [bp]", "ds", "es",
];
const PUSH_REG: &[&str] = &[
    "ax", "bx", "cx", "dx", "si", "di", "bp", "WORD [bx]", "WORD [si]", "WORD [di]", "WORD [bp]", "ds", "es",
    "cs", "ss",
];
const OP: &[&str] = &[
    "nop", "stosw", "lodsw", "movsw", "cmpsw", "scasw", "pushf", "popf", "lahf", "stosb", "lodsb", "movsb", "cmpsb",
    "scasb", "xlat", "xlatb", "cwd", "cbw", "cmc", "clc", "stc", "cli", "sti", "cld", "std",
];
const OP_SINGLE: &[&str] = &["div", "mul", "inc", "dec", "not", "neg"];
const OP_DOUBLE: &[&str] = &["cmp", "mov", "add", "sub", "and", "or", "xor", "adc", "sbb", "test"];
const OP_JMP: &[&str] = &[
    "jmp", "jcxz", "je", "jne", "jp", "jnp", "jo", "jno", "jc", "jnc", "ja", "jna", "js", "jns", "jl", "jnl", "jle",
    "jnle", "loopnz", "loopne", "loopz", "loope", "loop",
];
const OP_REP: &[&str] = &["rep", "repe", "repz", "repne", "repnz"];
const OP_FUNCTION: &[&str] = &["call", "call near", "call far"];
const OP_SPECIAL: &[&str] = &["wait wait wait wait", "wait wait", "int 0x86", "int 0x87"];
const OP_POINTER: &[&str] = &["lea", "les", "lds"];
const OP_RET: &[&str] = &["ret", "retn", "retf", "iret"];
const OP_SHIFT: &[&str] = &["sal", "sar", "shl", "shr", "rol", "ror", "rcl", "rcr"];
const SIZE: &[&str] = &["WORD", "BYTE"];
const COUNT: &[&str] = &["cl", "1"];

/// Even constants `2*i` for `i` in `-10..133`.
pub const EVEN_CONSTS: std::ops::Range<i32> = -10..133;
const SPECIAL_CONSTS: &[&str] = &["@start", "@end", "65535", "0xcccc"];

impl Terminals {
    fn fixed(self) -> Option<&'static [&'static str]> {
        Some(match self {
            Terminals::Reg => REG,
            Terminals::HalfReg => HALF_REG,
            Terminals::Base => BASE,
            Terminals::PopReg => POP_REG,
            Terminals::PushReg => PUSH_REG,
            Terminals::Op => OP,
            Terminals::OpSingle => OP_SINGLE,
            Terminals::OpDouble => OP_DOUBLE,
            Terminals::OpJmp => OP_JMP,
            Terminals::OpRep => OP_REP,
            Terminals::OpFunction => OP_FUNCTION,
            Terminals::OpSpecial => OP_SPECIAL,
            Terminals::OpPointer => OP_POINTER,
            Terminals::OpRet => OP_RET,
            Terminals::OpShift => OP_SHIFT,
            Terminals::Size => SIZE,
            Terminals::Count => COUNT,
            Terminals::Const | Terminals::Word => return None,
        })
    }

    pub fn len(self) -> usize {
        match self {
            Terminals::Const => EVEN_CONSTS.len() + SPECIAL_CONSTS.len(),
            Terminals::Word => 65536,
            t => t.fixed().map_or(0, |v| v.len()),
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    /// Source text of terminal `i`. Even constants print as `0x` followed by
    /// their decimal digits, the way the evolved listings spell them (so
    /// `0x-14` and `0x264` are read back as hex).
    pub fn literal(self, i: usize) -> String {
        match self {
            Terminals::Const if i < EVEN_CONSTS.len() => format!("0x{}", 2 * (EVEN_CONSTS.start + i as i32)),
            Terminals::Const => SPECIAL_CONSTS[i - EVEN_CONSTS.len()].to_string(),
            Terminals::Word => i.to_string(),
            t => t.fixed().expect("fixed terminal set")[i].to_string(),
        }
    }

    pub fn index_of(self, literal: &str) -> Option<usize> {
        match self {
            Terminals::Word => literal.parse::<u16>().ok().map(usize::from),
            _ => (0..self.len()).find(|&i| self.literal(i) == literal),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelDir {
    Backward,
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    Term(Terminals),
    Nt(Nt),
    /// The label this node defines, assigned by its parent.
    LabelDef,
    /// A label defined by a sibling of this node, nearest in the given
    /// direction.
    LabelRef(LabelDir),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alternative {
    /// Line text with `{N}` placeholders for the inline items; empty for
    /// alternatives that only sequence block children.
    pub template: &'static str,
    pub items: Vec<Item>,
    /// Height of the shallowest tree this alternative can root.
    pub min_height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: &'static str,
    pub inline: bool,
    pub alternatives: Vec<Alternative>,
    pub min_height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub rules: Vec<Rule>,
    pub random_patterns: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("no alternative of `{rule}` fits in {budget} remaining levels")]
    DepthUnsatisfiable { rule: &'static str, budget: u32 },
    #[error("cannot put a {found:?} subtree where a {expected:?} is expected")]
    TypeMismatch { expected: Nt, found: Nt },
    #[error("no subtree point {0}")]
    BadPoint(usize),
    #[error("tree syntax at byte {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("invalid grammar: {0}")]
    Invalid(String),
}

fn alt(template: &'static str, items: &[Item]) -> Alternative {
    Alternative {
        template,
        items: items.to_vec(),
        min_height: 0,
    }
}

fn rule(name: &'static str, inline: bool, alternatives: Vec<Alternative>) -> Rule {
    Rule {
        name,
        inline,
        alternatives,
        min_height: 0,
    }
}

/// Linear congruential step: the timestamp seed, multiplier and increment.
/// Both constants wrap to 16 bits when assembled.
const LCG_TEMPLATE: &str = "mov ax, {0}\nmov {1}, 1664525\nmul {1}\nadd ax, 1013904223";

/// XOR-shift step. The 8086 only shifts by 1 or `cl`, so the shifts by 7
/// and 5 are spelled out as single-bit shifts.
const XOR_SHIFT_TEMPLATE: &str = "mov {2}, {0}\nmov {3}, {1}\nxor {2}, {3}\n\
shl {2}, 1\nshl {2}, 1\nshl {2}, 1\nshl {2}, 1\nshl {2}, 1\nshl {2}, 1\nshl {2}, 1\n\
shr {3}, 1\nshr {3}, 1\nshr {3}, 1\nshr {3}, 1\nshr {3}, 1\n\
xor {2}, {3}";

/// Index of the empty `<section>` alternative.
pub const EMPTY_SECTION: u8 = 21;

/// The survivor grammar. `random_patterns` adds the LCG and XOR-shift
/// section alternatives.
pub fn default_grammar(random_patterns: bool) -> Grammar {
    use Item::{LabelDef, LabelRef, Nt as N, Term as T};
    use Terminals::*;
    let s = N(SECTION);
    let mut section = vec![
        alt("", &[N(LABEL), s, N(BACKWARDS_JUMP), s]),
        alt("", &[N(LABEL), s, N(BACKWARDS_JUMP)]),
        alt("", &[s, N(FORWARD_JUMP), s, N(LABEL), s]),
        alt("", &[N(LABEL), s, N(CALL_FUNC), N(BACKWARDS_JUMP), N(LABEL), s, N(RETURN)]),
        alt("{0} {1}, {2}", &[T(OpDouble), T(Reg), N(REG_CONST_ADDRESS), s]),
        alt("{0} [{1}], {2}", &[T(OpDouble), N(ADDRESS), N(REG_HALF), s]),
        alt("{0} {1}, {2}", &[T(OpDouble), T(HalfReg), N(HALF_CONST_ADDRESS), s]),
        alt("{0} {1} [{2}], {3}", &[T(OpDouble), T(Size), N(ADDRESS), T(Const), s]),
        alt("{0} {1}, [{2}]", &[T(OpPointer), T(Reg), N(ADDRESS), s]),
        alt("xchg {0}, {1}", &[T(Reg), N(REG_ADDRESS), s]),
        alt("xchg {0}, {1}", &[T(HalfReg), N(HALF_ADDRESS), s]),
        alt("{0} {1}", &[T(OpSingle), N(REG_HALF), s]),
        alt("{0} {1} [{2}]", &[T(OpSingle), T(Size), N(ADDRESS), s]),
        alt("{0} [{1}]", &[T(OpFunction), N(ADDRESS), s]),
        alt("{0}", &[N(OP_OR_SPECIAL), s]),
        alt("{0} {1}", &[T(OpRep), T(Op), s]),
        alt("push {0}", &[T(PushReg), s]),
        alt("pop {0}", &[T(PopReg), s]),
        alt("jmp {0}", &[N(REG_ADDRESS), s]),
        alt("dw {0}", &[T(Const), s]),
        alt("{0} {1}, {2}", &[T(OpShift), N(REG_HALF), T(Count), s]),
        alt("", &[]),
    ];
    debug_assert!(section[EMPTY_SECTION as usize].items.is_empty());
    if random_patterns {
        section.push(alt(LCG_TEMPLATE, &[T(Word), T(Reg), s]));
        section.push(alt(XOR_SHIFT_TEMPLATE, &[T(Word), T(Word), T(Reg), T(Reg), s]));
    }
    let rules = vec![
        rule("section", false, section),
        rule("label", false, vec![alt("{0}:", &[LabelDef, s])]),
        rule("forward_jump", false, vec![alt("{0} {1}", &[T(OpJmp), LabelRef(LabelDir::Forward), s])]),
        rule("backwards_jump", false, vec![alt("{0} {1}", &[T(OpJmp), LabelRef(LabelDir::Backward), s])]),
        rule("call_func", false, vec![alt("call {0}", &[LabelRef(LabelDir::Forward), s])]),
        rule("return", false, vec![alt("{0}", &[T(OpRet), s])]),
        rule("address", true, vec![alt("{0}", &[T(Base)]), alt("{0} + {1}", &[N(ADDRESS), T(Const)])]),
        rule(
            "reg_const_address",
            true,
            vec![alt("{0}", &[T(Reg)]), alt("{0}", &[T(Const)]), alt("[{0}]", &[N(ADDRESS)])],
        ),
        rule(
            "half_const_address",
            true,
            vec![alt("{0}", &[T(HalfReg)]), alt("{0}", &[T(Const)]), alt("[{0}]", &[N(ADDRESS)])],
        ),
        rule("reg_half", true, vec![alt("{0}", &[T(Reg)]), alt("{0}", &[T(HalfReg)])]),
        rule("reg_address", true, vec![alt("{0}", &[T(Reg)]), alt("[{0}]", &[N(ADDRESS)])]),
        rule("half_address", true, vec![alt("{0}", &[T(HalfReg)]), alt("[{0}]", &[N(ADDRESS)])]),
        rule("op_or_special", true, vec![alt("{0}", &[T(Op)]), alt("{0}", &[T(OpSpecial)])]),
    ];
    let mut g = Grammar { rules, random_patterns };
    g.compute_heights();
    g.validate().expect("built-in grammar is well formed");
    g
}

impl Grammar {
    pub fn start(&self) -> Nt {
        SECTION
    }

    pub fn rule(&self, nt: Nt) -> &Rule {
        &self.rules[nt.0 as usize]
    }

    pub fn alternative(&self, nt: Nt, alt: u8) -> &Alternative {
        &self.rule(nt).alternatives[alt as usize]
    }

    pub fn name(&self, nt: Nt) -> &'static str {
        self.rule(nt).name
    }

    pub fn nt_by_name(&self, name: &str) -> Option<Nt> {
        self.rules.iter().position(|r| r.name == name).map(|i| Nt(i as u8))
    }

    /// Whether the rule's alternatives define a label for siblings to use.
    pub(crate) fn defines_label(&self, nt: Nt) -> bool {
        self.rule(nt).alternatives.iter().any(|a| a.items.contains(&Item::LabelDef))
    }

    pub(crate) fn label_ref(&self, nt: Nt) -> Option<LabelDir> {
        self.rule(nt).alternatives.iter().find_map(|a| {
            a.items.iter().find_map(|i| match i {
                Item::LabelRef(d) => Some(*d),
                _ => None,
            })
        })
    }

    /// Minimal derivation heights by fixpoint; unproductive rules stay at
    /// `u32::MAX`.
    fn compute_heights(&mut self) {
        for r in &mut self.rules {
            r.min_height = u32::MAX;
            for a in &mut r.alternatives {
                a.min_height = u32::MAX;
            }
        }
        loop {
            let mut progress = false;
            for ri in 0..self.rules.len() {
                for ai in 0..self.rules[ri].alternatives.len() {
                    let mut h = 1u32;
                    for item in &self.rules[ri].alternatives[ai].items {
                        if let Item::Nt(n) = item {
                            h = h.max(self.rules[n.0 as usize].min_height.saturating_add(1));
                        }
                    }
                    let a = &mut self.rules[ri].alternatives[ai];
                    if h < a.min_height {
                        a.min_height = h;
                        progress = true;
                    }
                    let r = &mut self.rules[ri];
                    r.min_height = r.min_height.min(h);
                }
            }
            if !progress {
                break;
            }
        }
    }

    /// Checks references, productivity, template arity and label binding.
    pub fn validate(&self) -> Result<(), GrammarError> {
        let bad = |m: String| Err(GrammarError::Invalid(m));
        for r in &self.rules {
            if r.min_height == u32::MAX {
                return bad(format!("`{}` derives no finite tree", r.name));
            }
            for (ai, a) in r.alternatives.iter().enumerate() {
                let mut inline = 0;
                let mut seen_block = false;
                for item in &a.items {
                    let is_inline = match item {
                        Item::Nt(n) => {
                            if n.0 as usize >= self.rules.len() {
                                return bad(format!("`{}`.{} references an undefined rule", r.name, ai));
                            }
                            self.rule(*n).inline
                        }
                        Item::Term(t) => {
                            if t.is_empty() {
                                return bad(format!("`{}`.{} uses an empty terminal set", r.name, ai));
                            }
                            true
                        }
                        Item::LabelDef | Item::LabelRef(_) => true,
                    };
                    if is_inline {
                        if seen_block {
                            return bad(format!("`{}`.{} has an inline item after a block item", r.name, ai));
                        }
                        inline += 1;
                    } else {
                        seen_block = true;
                    }
                }
                let used = placeholders(a.template);
                if used.iter().any(|&k| k >= inline) || (0..inline).any(|k| !used.contains(&k)) {
                    return bad(format!("`{}`.{} template does not match its items", r.name, ai));
                }
                if r.inline && seen_block {
                    return bad(format!("inline rule `{}` has block children", r.name));
                }
                // Every referencing child needs a defining sibling in its
                // direction.
                let kids: Vec<Nt> = a
                    .items
                    .iter()
                    .filter_map(|i| match i {
                        Item::Nt(n) => Some(*n),
                        _ => None,
                    })
                    .collect();
                for (k, n) in kids.iter().enumerate() {
                    if let Some(dir) = self.label_ref(*n) {
                        let found = match dir {
                            LabelDir::Backward => kids[..k].iter().any(|s| self.defines_label(*s)),
                            LabelDir::Forward => kids[k + 1..].iter().any(|s| self.defines_label(*s)),
                        };
                        if !found {
                            return bad(format!("`{}`.{} has a jump with no label to bind", r.name, ai));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn placeholders(template: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(p) = rest.find('{') {
        let after = &rest[p + 1..];
        let end = after.find('}').unwrap_or(after.len());
        if let Ok(k) = after[..end].parse() {
            out.push(k);
        }
        rest = &after[end.min(after.len())..];
    }
    out
}

#[cfg(test)]
mod tests;
