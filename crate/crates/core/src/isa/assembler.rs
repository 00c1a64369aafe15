//! Two-pass assembler for survivor source.
//!
//! Layout is found by relaxation: branches start in their short form and
//! only ever grow, every other instruction is re-sized from the current
//! label values on each pass. Conditional branches and `loop`/`jcxz` have no
//! near form on the 8086, so out-of-range ones are expanded into an
//! inverted short branch around a `jmp`.

use std::collections::HashMap;
use std::fmt;

use super::encode::encode_inline;
use super::instruction::{
    Base, Instruction, MemRef, Mnemonic, Operand, Operands, RepPrefix, Register, ShiftCount, Width,
};

/// Survivor images may not exceed this many bytes.
pub const MAX_IMAGE_LEN: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledImage {
    pub bytes: Vec<u8>,
    pub symbols: HashMap<String, u16>,
    /// Offset of `@start` within `bytes`.
    pub start_offset: u16,
}

impl AssembledImage {
    pub fn from_bytes(bytes: Vec<u8>) -> AssembledImage {
        let mut symbols = HashMap::new();
        symbols.insert("@start".to_string(), 0);
        symbols.insert("@end".to_string(), bytes.len() as u16);
        AssembledImage {
            bytes,
            symbols,
            start_offset: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssembleErrorKind {
    UnknownMnemonic(String),
    UnresolvedLabel(String),
    OperandMismatch(String),
    ImageTooLarge(usize),
    Syntax(String),
    DuplicateLabel(String),
    /// Label values never settle (an operand width flips with `@end`).
    PhaseError,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembleError {
    pub line: usize,
    pub column: usize,
    pub kind: AssembleErrorKind,
}

impl fmt::Display for AssembleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        match &self.kind {
            AssembleErrorKind::UnknownMnemonic(m) => write!(f, "unknown mnemonic `{}`", m),
            AssembleErrorKind::UnresolvedLabel(l) => write!(f, "unresolved label `{}`", l),
            AssembleErrorKind::OperandMismatch(s) => write!(f, "invalid operands: {}", s),
            AssembleErrorKind::ImageTooLarge(n) => {
                write!(f, "image is {} bytes, limit is {} bytes", n, MAX_IMAGE_LEN)
            }
            AssembleErrorKind::Syntax(s) => write!(f, "syntax error: {}", s),
            AssembleErrorKind::DuplicateLabel(l) => write!(f, "label `{}` defined twice", l),
            AssembleErrorKind::PhaseError => write!(f, "label values do not converge"),
        }
    }
}

impl std::error::Error for AssembleError {}

// ---------------------------------------------------------------------------
// Source model

#[derive(Debug, Clone, PartialEq)]
enum Atom {
    Number(i64),
    Symbol(String),
    Here,
}

#[derive(Debug, Clone, PartialEq)]
struct Expr {
    terms: Vec<(i64, Atom)>,
}

impl Expr {
    fn eval(&self, labels: &HashMap<String, i64>, here: i64) -> Result<i64, String> {
        let mut acc = 0i64;
        for (sign, atom) in &self.terms {
            let v = match atom {
                Atom::Number(n) => *n,
                Atom::Here => here,
                Atom::Symbol(s) => *labels.get(s).ok_or_else(|| s.clone())?,
            };
            acc = acc.wrapping_add(sign * v);
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SrcOperand {
    Reg(Register),
    Mem {
        base: Base,
        disp: Expr,
        size: Option<Width>,
    },
    Value(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Distance {
    Default,
    Short,
    Near,
    Far,
}

#[derive(Debug, Clone)]
enum Stmt {
    Instr {
        rep: Option<RepPrefix>,
        mnemonic: Mnemonic,
        distance: Distance,
        operands: Vec<SrcOperand>,
    },
    Words(Vec<Expr>),
    Bytes(Vec<Expr>),
}

#[derive(Debug, Clone)]
struct Line {
    number: usize,
    column: usize,
    labels: Vec<String>,
    stmt: Option<Stmt>,
}

fn err(line: usize, column: usize, kind: AssembleErrorKind) -> AssembleError {
    AssembleError { line, column, kind }
}

// ---------------------------------------------------------------------------
// Parsing

fn parse_number(tok: &str) -> Option<i64> {
    let t = tok.trim();
    let lower = t.to_ascii_lowercase();
    if let Some(rest) = lower.strip_prefix("0x") {
        let (neg, digits) = match rest.strip_prefix('-') {
            Some(d) => (true, d),
            None => (false, rest),
        };
        if digits.is_empty() {
            return None;
        }
        let v = i64::from_str_radix(digits, 16).ok()?;
        return Some(if neg { -v } else { v });
    }
    if let Some(digits) = lower.strip_suffix('h') {
        if digits.starts_with(|c: char| c.is_ascii_digit()) {
            return i64::from_str_radix(digits, 16).ok();
        }
    }
    if t.chars().all(|c| c.is_ascii_digit()) && !t.is_empty() {
        return t.parse().ok();
    }
    None
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '@' || c == '.'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '@' || c == '.'
}

/// Splits `a + 0x-14 - b` into signed atoms. `0x-NN` is a single signed hex
/// literal, not a subtraction.
fn tokenize_terms(text: &str) -> Result<Vec<(i64, String)>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let mut sign = 1i64;
    let mut expect_term = true;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '+' || c == '-' {
            if c == '-' {
                sign = -sign;
            }
            expect_term = true;
            i += 1;
            continue;
        }
        if !expect_term {
            return Err(format!("expected `+` or `-` before `{}`", c));
        }
        let start = i;
        if c == '0' && i + 1 < chars.len() && (chars[i + 1] == 'x' || chars[i + 1] == 'X') {
            i += 2;
            if i < chars.len() && chars[i] == '-' {
                i += 1;
            }
            while i < chars.len() && chars[i].is_ascii_hexdigit() {
                i += 1;
            }
        } else if c == '$' {
            i += 1;
        } else if is_ident_start(c) || c.is_ascii_digit() {
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
        } else {
            return Err(format!("unexpected character `{}`", c));
        }
        out.push((sign, chars[start..i].iter().collect()));
        sign = 1;
        expect_term = false;
    }
    if expect_term {
        return Err("missing operand term".to_string());
    }
    Ok(out)
}

fn parse_atom(tok: &str) -> Result<Atom, String> {
    if tok == "$" {
        return Ok(Atom::Here);
    }
    if let Some(n) = parse_number(tok) {
        return Ok(Atom::Number(n));
    }
    if tok.starts_with(is_ident_start) && tok.chars().all(is_ident_char) {
        return Ok(Atom::Symbol(tok.to_string()));
    }
    Err(format!("bad term `{}`", tok))
}

fn parse_expr(text: &str) -> Result<Expr, String> {
    let terms = tokenize_terms(text)?
        .into_iter()
        .map(|(s, t)| parse_atom(&t).map(|a| (s, a)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Expr { terms })
}

fn parse_operand(text: &str) -> Result<(SrcOperand, Distance), String> {
    let mut t = text.trim();
    let mut size = None;
    let mut distance = Distance::Default;
    loop {
        let lower = t.to_ascii_lowercase();
        let (word, rest) = match lower.find(|c: char| c.is_whitespace() || c == '[') {
            Some(p) => (&lower[..p], &t[p..]),
            None => break,
        };
        match word {
            "word" => size = Some(Width::Word),
            "byte" => size = Some(Width::Byte),
            "ptr" => {}
            "short" => distance = Distance::Short,
            "near" => distance = Distance::Near,
            "far" => distance = Distance::Far,
            _ => break,
        }
        t = rest.trim_start();
    }
    if let Some(inner) = t.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| "unterminated `[`".to_string())?;
        let mut base = None;
        let mut terms = Vec::new();
        for (sign, tok) in tokenize_terms(inner)? {
            match Register::from_name(&tok) {
                Some(r) => {
                    let b = match r {
                        Register::Bx => Base::Bx,
                        Register::Si => Base::Si,
                        Register::Di => Base::Di,
                        Register::Bp => Base::Bp,
                        _ => return Err(format!("`{}` cannot address memory", tok)),
                    };
                    if sign < 0 || base.replace(b).is_some() {
                        return Err("memory operand needs exactly one base register".into());
                    }
                }
                None => terms.push((sign, parse_atom(&tok)?)),
            }
        }
        let base = base.ok_or_else(|| "direct addressing is not supported".to_string())?;
        return Ok((
            SrcOperand::Mem {
                base,
                disp: Expr { terms },
                size,
            },
            distance,
        ));
    }
    if size.is_some() {
        return Err("size qualifier needs a memory operand".into());
    }
    if let Some(r) = Register::from_name(t) {
        return Ok((SrcOperand::Reg(r), distance));
    }
    Ok((SrcOperand::Value(parse_expr(t)?), distance))
}

fn split_operands(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    if !text[start..].trim().is_empty() || !out.is_empty() {
        out.push(&text[start..]);
    }
    out
}

fn parse_statement(text: &str) -> Result<Vec<Stmt>, AssembleErrorKind> {
    let mut rest = text.trim();
    let mut rep = None;
    let (mut head, mut tail) = split_head(rest);
    let lower = head.to_ascii_lowercase();
    match lower.as_str() {
        "rep" | "repe" | "repz" => rep = Some(RepPrefix::Rep),
        "repne" | "repnz" => rep = Some(RepPrefix::Repne),
        _ => {}
    }
    if rep.is_some() {
        rest = tail;
        (head, tail) = split_head(rest);
    }
    let lower = head.to_ascii_lowercase();

    if lower == "dw" || lower == "db" {
        let body = tail.trim();
        let body = body
            .strip_suffix("(illegal)")
            .map(str::trim_end)
            .unwrap_or(body);
        let exprs = split_operands(body)
            .into_iter()
            .map(|s| parse_expr(s.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(AssembleErrorKind::Syntax)?;
        if exprs.is_empty() {
            return Err(AssembleErrorKind::Syntax(format!("`{}` needs a value", lower)));
        }
        return Ok(vec![if lower == "dw" {
            Stmt::Words(exprs)
        } else {
            Stmt::Bytes(exprs)
        }]);
    }

    // `wait wait wait wait` on one line: one instruction per token.
    if lower == "wait" && rep.is_none() && tail.split_whitespace().all(|t| t.eq_ignore_ascii_case("wait")) {
        let n = 1 + tail.split_whitespace().count();
        return Ok((0..n)
            .map(|_| Stmt::Instr {
                rep: None,
                mnemonic: Mnemonic::Wait,
                distance: Distance::Default,
                operands: Vec::new(),
            })
            .collect());
    }

    let mut mnemonic =
        Mnemonic::parse(&lower).ok_or_else(|| AssembleErrorKind::UnknownMnemonic(head.to_string()))?;
    let mut operands = Vec::new();
    let mut distance = Distance::Default;
    for piece in split_operands(tail) {
        let (op, d) = parse_operand(piece).map_err(AssembleErrorKind::Syntax)?;
        if d != Distance::Default {
            distance = d;
        }
        operands.push(op);
    }
    if mnemonic == Mnemonic::Call && distance == Distance::Far {
        mnemonic = Mnemonic::CallFar;
    }
    if rep.is_some() && !mnemonic.is_plain_op() {
        return Err(AssembleErrorKind::OperandMismatch(format!(
            "`{}` cannot take a rep prefix",
            mnemonic.name()
        )));
    }
    Ok(vec![Stmt::Instr {
        rep,
        mnemonic,
        distance,
        operands,
    }])
}

fn split_head(text: &str) -> (&str, &str) {
    let t = text.trim_start();
    match t.find(char::is_whitespace) {
        Some(p) => (&t[..p], t[p..].trim_start()),
        None => (t, ""),
    }
}

fn parse_source(source: &str) -> Result<Vec<Line>, AssembleError> {
    let mut lines = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let number = idx + 1;
        let code = match raw.find(';') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let mut rest = code;
        let mut labels = Vec::new();
        // Leading `name:` labels.
        loop {
            let trimmed = rest.trim_start();
            let Some(colon) = trimmed.find(':') else { break };
            let name = trimmed[..colon].trim();
            if name.is_empty() || !name.starts_with(is_ident_start) || !name.chars().all(is_ident_char) {
                break;
            }
            labels.push(name.to_string());
            rest = &trimmed[colon + 1..];
        }
        let column = code.len() - rest.trim_start().len() + 1;
        if rest.trim().is_empty() {
            if !labels.is_empty() {
                lines.push(Line {
                    number,
                    column,
                    labels,
                    stmt: None,
                });
            }
            continue;
        }
        let stmts = parse_statement(rest).map_err(|k| err(number, column, k))?;
        for (i, stmt) in stmts.into_iter().enumerate() {
            lines.push(Line {
                number,
                column,
                labels: if i == 0 { std::mem::take(&mut labels) } else { Vec::new() },
                stmt: Some(stmt),
            });
        }
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// Layout

/// Branch layout state; only ever increases during relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum BranchForm {
    Short,
    /// Inverted short branch (or trampoline) around a short `jmp`.
    ExpandedShort,
    /// Inverted short branch (or trampoline) around a near `jmp`.
    ExpandedNear,
    Near,
}

struct Ctx<'a> {
    labels: &'a HashMap<String, i64>,
    origin: i64,
    line: usize,
    column: usize,
}

impl Ctx<'_> {
    fn mismatch(&self, msg: impl Into<String>) -> AssembleError {
        err(self.line, self.column, AssembleErrorKind::OperandMismatch(msg.into()))
    }

    fn eval(&self, e: &Expr, here: i64) -> Result<i64, AssembleError> {
        e.eval(self.labels, here)
            .map_err(|l| err(self.line, self.column, AssembleErrorKind::UnresolvedLabel(l)))
    }
}

fn wrap16(v: i64) -> u16 {
    v.rem_euclid(65536) as u16
}

fn inverse_condition(m: Mnemonic) -> Option<Mnemonic> {
    m.condition_code().map(|cc| Mnemonic::from_condition_code(cc ^ 1))
}

/// Builds the machine instructions for one statement at `pos` (image offset).
fn lower(
    stmt: &Stmt,
    pos: i64,
    form: BranchForm,
    ctx: &Ctx<'_>,
) -> Result<(Vec<Instruction>, Option<BranchForm>), AssembleError> {
    let here = ctx.origin + pos;
    match stmt {
        Stmt::Words(exprs) => {
            let mut out = Vec::new();
            for e in exprs {
                let v = wrap16(ctx.eval(e, here)?);
                out.push(Instruction::unary(Mnemonic::Dw, Operand::Imm(v)));
            }
            Ok((out, None))
        }
        Stmt::Bytes(_) => unreachable!("byte data is emitted directly"),
        Stmt::Instr {
            rep,
            mnemonic,
            distance,
            operands,
        } => {
            let m = *mnemonic;
            let is_rel_target = matches!(operands.as_slice(), [SrcOperand::Value(_)])
                && (m == Mnemonic::Jmp || m == Mnemonic::Call || m.is_short_branch());
            if is_rel_target {
                let SrcOperand::Value(e) = &operands[0] else { unreachable!() };
                let target = ctx.eval(e, here)?;
                return lower_branch(m, *distance, target - ctx.origin, pos, form, ctx);
            }
            let mut ops = Vec::with_capacity(2);
            let width_hint = operands.iter().find_map(|o| match o {
                SrcOperand::Reg(r) if !r.is_segment() => Some(r.width()),
                SrcOperand::Mem { size: Some(w), .. } => Some(*w),
                _ => None,
            });
            let single_word_default = matches!(
                m,
                Mnemonic::Push | Mnemonic::Pop | Mnemonic::Jmp | Mnemonic::Call | Mnemonic::CallFar
            ) || matches!(m, Mnemonic::Lea | Mnemonic::Les | Mnemonic::Lds);
            for (i, o) in operands.iter().enumerate() {
                let op = match o {
                    SrcOperand::Reg(r) => {
                        if m.is_shift() && i == 1 {
                            if *r != Register::Cl {
                                return Err(ctx.mismatch("shift count must be `cl` or `1`"));
                            }
                            Operand::Count(ShiftCount::Cl)
                        } else {
                            Operand::Reg(*r)
                        }
                    }
                    SrcOperand::Mem { base, disp, size } => {
                        let width = match (size, width_hint) {
                            (Some(w), _) => *w,
                            (None, Some(w)) => w,
                            (None, None) if single_word_default => Width::Word,
                            (None, None) => {
                                return Err(ctx.mismatch(format!(
                                    "`{}` needs WORD or BYTE on its memory operand",
                                    m.name()
                                )))
                            }
                        };
                        let d = wrap16(ctx.eval(disp, here)?) as i16;
                        Operand::Mem(MemRef {
                            base: *base,
                            disp: d,
                            width,
                        })
                    }
                    SrcOperand::Value(e) => {
                        let v = ctx.eval(e, here)?;
                        if m.is_shift() && i == 1 {
                            if v != 1 {
                                return Err(ctx.mismatch("shift count must be `cl` or `1`"));
                            }
                            Operand::Count(ShiftCount::One)
                        } else {
                            let w = if m == Mnemonic::Int { Some(Width::Byte) } else { width_hint };
                            match w {
                                Some(Width::Byte) => Operand::Imm(wrap16(v) & 0xFF),
                                Some(Width::Word) => Operand::Imm(wrap16(v)),
                                None => {
                                    return Err(ctx.mismatch(format!(
                                        "operand size of `{}` is ambiguous",
                                        m.name()
                                    )))
                                }
                            }
                        }
                    }
                };
                ops.push(op);
            }
            let operands = match ops.as_slice() {
                [] => Operands::none(),
                [a] => Operands::one(*a),
                [a, b] => Operands::two(*a, *b),
                _ => return Err(ctx.mismatch("too many operands")),
            };
            let mut instr = Instruction::new(m, operands);
            if let Some(r) = rep {
                instr = instr.with_rep(*r);
            }
            Ok((vec![instr], None))
        }
    }
}

fn lower_branch(
    m: Mnemonic,
    distance: Distance,
    target: i64,
    pos: i64,
    form: BranchForm,
    ctx: &Ctx<'_>,
) -> Result<(Vec<Instruction>, Option<BranchForm>), AssembleError> {
    let rel_from = |end: i64| wrap16(target - end) as i16;
    let fits = |end: i64| (-128..=127).contains(&rel_from(end));
    match m {
        Mnemonic::Call => {
            if matches!(distance, Distance::Short | Distance::Far) {
                return Err(ctx.mismatch("only near relative calls are supported"));
            }
            Ok((vec![Instruction::unary(m, Operand::Rel16(rel_from(pos + 3)))], None))
        }
        Mnemonic::Jmp => {
            let form = match distance {
                Distance::Near => BranchForm::Near,
                Distance::Far => return Err(ctx.mismatch("far jumps are not supported")),
                Distance::Short if !fits(pos + 2) => return Err(ctx.mismatch("short jump out of range")),
                Distance::Short => BranchForm::Short,
                Distance::Default if form == BranchForm::Short && fits(pos + 2) => BranchForm::Short,
                Distance::Default => BranchForm::Near,
            };
            let instr = match form {
                BranchForm::Short => Instruction::unary(m, Operand::Rel8(rel_from(pos + 2) as i8)),
                _ => Instruction::unary(m, Operand::Rel16(rel_from(pos + 3))),
            };
            Ok((vec![instr], Some(form)))
        }
        _ => {
            if !matches!(distance, Distance::Default | Distance::Short) {
                return Err(ctx.mismatch(format!("`{}` only has a short form", m.name())));
            }
            let mut form = form;
            if form == BranchForm::Short && !fits(pos + 2) {
                if distance == Distance::Short {
                    return Err(ctx.mismatch("short branch out of range"));
                }
                form = BranchForm::ExpandedShort;
            }
            if form == BranchForm::Short {
                return Ok((vec![Instruction::unary(m, Operand::Rel8(rel_from(pos + 2) as i8))], Some(form)));
            }
            // Skip over a short or near jmp to the real target.
            let (head, jmp_at) = match inverse_condition(m) {
                Some(inv) => {
                    let jmp_len = if form == BranchForm::ExpandedShort { 2 } else { 3 };
                    (vec![Instruction::unary(inv, Operand::Rel8(jmp_len))], pos + 2)
                }
                None => {
                    // loop/jcxz: `loop +2; jmp short over; jmp target`
                    let jmp_len = if form == BranchForm::ExpandedShort { 2 } else { 3 };
                    (
                        vec![
                            Instruction::unary(m, Operand::Rel8(2)),
                            Instruction::unary(Mnemonic::Jmp, Operand::Rel8(jmp_len)),
                        ],
                        pos + 4,
                    )
                }
            };
            if form == BranchForm::ExpandedShort && !fits(jmp_at + 2) {
                form = BranchForm::ExpandedNear;
                return lower_branch(m, distance, target, pos, form, ctx);
            }
            let mut out = head;
            out.push(match form {
                BranchForm::ExpandedShort => Instruction::unary(Mnemonic::Jmp, Operand::Rel8(rel_from(jmp_at + 2) as i8)),
                _ => Instruction::unary(Mnemonic::Jmp, Operand::Rel16(rel_from(jmp_at + 3))),
            });
            Ok((out, Some(form)))
        }
    }
}

fn stmt_size(
    stmt: &Stmt,
    pos: i64,
    form: BranchForm,
    ctx: &Ctx<'_>,
) -> Result<(usize, Option<BranchForm>), AssembleError> {
    if let Stmt::Bytes(exprs) = stmt {
        return Ok((exprs.len(), None));
    }
    let (instrs, new_form) = lower(stmt, pos, form, ctx)?;
    let mut n = 0;
    for i in &instrs {
        n += encode_inline(i)
            .map_err(|e| ctx.mismatch(e.to_string()))?
            .len();
    }
    Ok((n, new_form))
}

pub fn assemble(source: &str) -> Result<AssembledImage, AssembleError> {
    assemble_at(source, 0)
}

/// Assembles with labels, `$` and numeric branch targets taken relative to
/// `origin` (the image's load offset).
pub fn assemble_at(source: &str, origin: u16) -> Result<AssembledImage, AssembleError> {
    let lines = parse_source(source)?;
    let origin = origin as i64;

    let mut seen = HashMap::new();
    for l in &lines {
        for name in &l.labels {
            if seen.insert(name.clone(), ()).is_some() {
                return Err(err(l.number, 1, AssembleErrorKind::DuplicateLabel(name.clone())));
            }
        }
    }

    let mut forms = vec![BranchForm::Short; lines.len()];
    let mut sizes = vec![0usize; lines.len()];
    let mut labels: HashMap<String, i64> = HashMap::new();
    let mut converged = false;
    let mut unresolved_ok = true;

    for pass in 0..64 {
        // Label values from the current sizes.
        let mut pos = 0i64;
        let mut new_labels = HashMap::new();
        for (i, l) in lines.iter().enumerate() {
            for name in &l.labels {
                new_labels.insert(name.clone(), origin + pos);
            }
            pos += sizes[i] as i64;
        }
        let total = pos;
        new_labels.entry("@start".to_string()).or_insert(origin);
        new_labels.entry("@end".to_string()).or_insert(origin + total);
        labels = new_labels;

        let mut changed = false;
        let mut pos = 0i64;
        for (i, l) in lines.iter().enumerate() {
            let Some(stmt) = &l.stmt else { continue };
            let ctx = Ctx {
                labels: &labels,
                origin,
                line: l.number,
                column: l.column,
            };
            let (size, form) = match stmt_size(stmt, pos, forms[i], &ctx) {
                Ok(r) => r,
                // On the first pass forward references are not known yet.
                Err(AssembleError {
                    kind: AssembleErrorKind::UnresolvedLabel(_),
                    ..
                }) if pass == 0 && unresolved_ok => (2, None),
                Err(e) => return Err(e),
            };
            if let Some(f) = form {
                if f > forms[i] {
                    forms[i] = f;
                    changed = true;
                }
            }
            if size != sizes[i] {
                sizes[i] = size;
                changed = true;
            }
            pos += size as i64;
        }
        unresolved_ok = false;
        if !changed && pass > 0 {
            converged = true;
            break;
        }
    }
    if !converged {
        let line = lines.first().map(|l| l.number).unwrap_or(1);
        return Err(err(line, 1, AssembleErrorKind::PhaseError));
    }

    let mut bytes = Vec::new();
    let mut symbols = HashMap::new();
    for (i, l) in lines.iter().enumerate() {
        for name in &l.labels {
            symbols.insert(name.clone(), bytes.len() as u16);
        }
        let Some(stmt) = &l.stmt else { continue };
        let ctx = Ctx {
            labels: &labels,
            origin,
            line: l.number,
            column: l.column,
        };
        let pos = bytes.len() as i64;
        match stmt {
            Stmt::Bytes(exprs) => {
                for e in exprs {
                    bytes.push(wrap16(ctx.eval(e, origin + pos)?) as u8);
                }
            }
            _ => {
                let (instrs, _) = lower(stmt, pos, forms[i], &ctx)?;
                for instr in instrs {
                    let enc = encode_inline(&instr).map_err(|e| ctx.mismatch(e.to_string()))?;
                    bytes.extend_from_slice(enc.as_slice());
                }
            }
        }
        if bytes.len() as i64 - pos != sizes[i] as i64 {
            return Err(err(l.number, l.column, AssembleErrorKind::PhaseError));
        }
    }
    if bytes.len() > MAX_IMAGE_LEN {
        let line = lines.last().map(|l| l.number).unwrap_or(1);
        return Err(err(line, 1, AssembleErrorKind::ImageTooLarge(bytes.len())));
    }
    symbols.entry("@start".to_string()).or_insert(0);
    symbols.entry("@end".to_string()).or_insert(bytes.len() as u16);
    let start_offset = symbols["@start"];
    Ok(AssembledImage {
        bytes,
        symbols,
        start_offset,
    })
}
