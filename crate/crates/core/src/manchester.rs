//! Class expressions in the EL subset of Manchester syntax.
//!
//! Grammar:
//!
//! ```text
//! expr := conj
//! conj := prim ("and" prim)*
//! prim := atom | atom "some" prim | "(" expr ")"
//! atom := CURIE | 'quoted label' | bare word
//! ```
//!
//! `some` binds tighter than `and`, so `A and R some B` is the intersection
//! of `A` with `R some B`. `or`, `not`, and cardinality keywords are outside
//! the subset and rejected. Intersections are flattened and their operands
//! sorted by printed identifier form at parse time, so structural equality is
//! canonical equality.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::obo::Ontology;
use crate::term::TermId;

/// Whether expression text names terms by identifier or by label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Identifier,
    Label,
}

/// A class expression in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClassExpression {
    Named(TermId),
    SomeValuesFrom {
        property: TermId,
        filler: Box<ClassExpression>,
    },
    /// At least two operands, flattened and sorted; use
    /// [`ClassExpression::and`] to keep that invariant.
    Intersection(Vec<ClassExpression>),
}

impl ClassExpression {
    pub fn named(id: TermId) -> ClassExpression {
        ClassExpression::Named(id)
    }

    pub fn some(property: TermId, filler: ClassExpression) -> ClassExpression {
        ClassExpression::SomeValuesFrom {
            property,
            filler: Box::new(filler),
        }
    }

    /// Intersection of `operands`, flattened and sorted. A single operand
    /// collapses to itself.
    ///
    /// # Panics
    ///
    /// Panics on an empty operand list.
    pub fn and(operands: Vec<ClassExpression>) -> ClassExpression {
        assert!(!operands.is_empty(), "intersection of nothing");
        let mut flat = Vec::with_capacity(operands.len());
        for op in operands {
            match op.canonicalize() {
                ClassExpression::Intersection(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        if flat.len() == 1 {
            return flat.pop().unwrap();
        }
        flat.sort_by_cached_key(|e| e.to_string());
        ClassExpression::Intersection(flat)
    }

    /// Rebuilds the expression in canonical form (flattened, sorted).
    pub fn canonicalize(self) -> ClassExpression {
        match self {
            ClassExpression::Named(id) => ClassExpression::Named(id),
            ClassExpression::SomeValuesFrom { property, filler } => {
                ClassExpression::some(property, filler.canonicalize())
            }
            ClassExpression::Intersection(ops) => ClassExpression::and(ops),
        }
    }

    pub fn is_named(&self) -> bool {
        matches!(self, ClassExpression::Named(_))
    }

    /// Every id in class position, in depth-first order.
    pub fn class_ids(&self) -> Vec<&TermId> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ClassExpression::Named(id) = e {
                out.push(id);
            }
        });
        out
    }

    /// Every id in property position, in depth-first order.
    pub fn property_ids(&self) -> Vec<&TermId> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let ClassExpression::SomeValuesFrom { property, .. } = e {
                out.push(property);
            }
        });
        out
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ClassExpression)) {
        f(self);
        match self {
            ClassExpression::Named(_) => {}
            ClassExpression::SomeValuesFrom { filler, .. } => filler.walk(f),
            ClassExpression::Intersection(ops) => {
                for op in ops {
                    op.walk(f);
                }
            }
        }
    }

    fn fmt_prim(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassExpression::Intersection(_) => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

/// Prints identifier form with minimal parentheses: only intersection
/// fillers (and intersection operands of non-canonical trees) are grouped.
impl fmt::Display for ClassExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassExpression::Named(id) => write!(f, "{id}"),
            ClassExpression::SomeValuesFrom { property, filler } => {
                write!(f, "{property} some ")?;
                filler.fmt_prim(f)
            }
            ClassExpression::Intersection(ops) => {
                for (i, op) in ops.iter().enumerate() {
                    if i > 0 {
                        write!(f, " and ")?;
                    }
                    op.fmt_prim(f)?;
                }
                Ok(())
            }
        }
    }
}

impl PartialOrd for ClassExpression {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order by printed identifier form; printing is injective on
/// expression trees, so this is consistent with structural equality.
impl Ord for ClassExpression {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

// ---------------------------------------------------------------------------
// Surface trees
// ---------------------------------------------------------------------------

/// How an atom was written in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Curie,
    Bare,
    Quoted,
}

/// An atom as written, before any resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceAtom {
    pub kind: AtomKind,
    /// Unescaped text: the CURIE, the bare word, or the label between quotes.
    pub text: String,
    /// Byte offset of the atom in the source text.
    pub offset: usize,
}

/// Parse tree with atoms left unresolved, used to compare identifier-form
/// and label-form text structurally. Intersection operands keep source
/// order here; canonical sorting happens on [`ClassExpression`] only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceExpr {
    Atom(SurfaceAtom),
    Some {
        property: SurfaceAtom,
        filler: Box<SurfaceExpr>,
    },
    And(Vec<SurfaceExpr>),
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    And,
    Some,
    Atom(SurfaceAtom),
}

struct Token {
    tok: Tok,
    offset: usize,
}

/// Keywords outside the EL subset. Meeting one anywhere is an
/// "unsupported construct" error rather than a plain syntax error.
const UNSUPPORTED: &[&str] = &[
    "or", "not", "only", "value", "min", "max", "exactly", "inverse", "that",
];

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '(' => {
                toks.push(Token {
                    tok: Tok::LParen,
                    offset: i,
                });
                i += 1;
            }
            ')' => {
                toks.push(Token {
                    tok: Tok::RParen,
                    offset: i,
                });
                i += 1;
            }
            '\'' => {
                let start = i;
                i += 1;
                let mut label = String::new();
                let mut closed = false;
                while i < bytes.len() {
                    match bytes[i] as char {
                        '\\' if i + 1 < bytes.len() => {
                            let ch = text[i + 1..].chars().next().unwrap();
                            label.push(ch);
                            i += 1 + ch.len_utf8();
                        }
                        '\'' => {
                            closed = true;
                            i += 1;
                            break;
                        }
                        _ => {
                            // Labels may hold arbitrary UTF-8; copy the whole
                            // character, not just its first byte.
                            let ch = text[i..].chars().next().unwrap();
                            label.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                if !closed {
                    return Err(Error::ExpressionSyntax {
                        offset: start,
                        message: "unterminated quoted label".into(),
                    });
                }
                toks.push(Token {
                    tok: Tok::Atom(SurfaceAtom {
                        kind: AtomKind::Quoted,
                        text: label,
                        offset: start,
                    }),
                    offset: start,
                });
            }
            _ => {
                let start = i;
                while i < bytes.len() {
                    let ch = text[i..].chars().next().unwrap();
                    if ch.is_whitespace() || ch == '(' || ch == ')' || ch == '\'' {
                        break;
                    }
                    i += ch.len_utf8();
                }
                let word = &text[start..i];
                let tok = match word {
                    "and" => Tok::And,
                    "some" => Tok::Some,
                    w if UNSUPPORTED.contains(&w) => {
                        return Err(Error::UnsupportedConstruct {
                            construct: w.into(),
                            offset: start,
                        })
                    }
                    w => Tok::Atom(SurfaceAtom {
                        kind: if w.contains(':') {
                            AtomKind::Curie
                        } else {
                            AtomKind::Bare
                        },
                        text: w.into(),
                        offset: start,
                    }),
                };
                toks.push(Token { tok, offset: start });
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::ExpressionSyntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn conj(&mut self) -> Result<SurfaceExpr> {
        let mut ops = vec![self.prim()?];
        while self.peek() == Some(&Tok::And) {
            self.bump();
            ops.push(self.prim()?);
        }
        Ok(if ops.len() == 1 {
            ops.pop().unwrap()
        } else {
            SurfaceExpr::And(ops)
        })
    }

    fn prim(&mut self) -> Result<SurfaceExpr> {
        match self.bump() {
            Some(Tok::LParen) => {
                let inner = self.conj()?;
                match self.bump() {
                    Some(Tok::RParen) => {
                        if self.peek() == Some(&Tok::Some) {
                            return Err(self.err("property before 'some' must be a single name"));
                        }
                        Ok(inner)
                    }
                    _ => Err(Error::ExpressionSyntax {
                        offset: self.toks.get(self.pos - 1).map_or(self.end, |t| t.offset),
                        message: "unbalanced parentheses: expected ')'".into(),
                    }),
                }
            }
            Some(Tok::Atom(atom)) => {
                if self.peek() == Some(&Tok::Some) {
                    self.bump();
                    let filler = self.prim()?;
                    Ok(SurfaceExpr::Some {
                        property: atom,
                        filler: Box::new(filler),
                    })
                } else {
                    Ok(SurfaceExpr::Atom(atom))
                }
            }
            Some(Tok::RParen) => Err(Error::ExpressionSyntax {
                offset: self.toks[self.pos - 1].offset,
                message: "unbalanced parentheses: unexpected ')'".into(),
            }),
            Some(Tok::And) | Some(Tok::Some) => Err(Error::ExpressionSyntax {
                offset: self.toks[self.pos - 1].offset,
                message: "expected a class expression, found a keyword".into(),
            }),
            None => Err(self.err("expected a class expression")),
        }
    }
}

/// Parses text to a surface tree without resolving atoms.
pub fn parse_surface(text: &str) -> Result<SurfaceExpr> {
    let toks = lex(text)?;
    if toks.is_empty() {
        return Err(Error::ExpressionSyntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let expr = p.conj()?;
    match p.peek() {
        None => Ok(expr),
        Some(Tok::RParen) => Err(Error::ExpressionSyntax {
            offset: p.offset(),
            message: "unbalanced parentheses: unexpected ')'".into(),
        }),
        Some(_) => Err(p.err("unexpected trailing text")),
    }
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Position {
    Class,
    Property,
}

fn resolve_atom(
    atom: &SurfaceAtom,
    form: Form,
    position: Position,
    ont: Option<&Ontology>,
) -> Result<TermId> {
    let parse_id = |text: &str| {
        TermId::parse(text).map_err(|e| Error::ExpressionSyntax {
            offset: atom.offset,
            message: e.to_string(),
        })
    };
    match (form, atom.kind) {
        (_, AtomKind::Curie) => parse_id(&atom.text),
        (Form::Identifier, AtomKind::Bare) => parse_id(&atom.text),
        (Form::Identifier, AtomKind::Quoted) => Err(Error::ExpressionSyntax {
            offset: atom.offset,
            message: format!(
                "quoted label {:?} in an identifier-form expression",
                atom.text
            ),
        }),
        (Form::Label, AtomKind::Quoted) => {
            let ont = ont.expect("label form requires an ontology");
            lookup_label(ont, &atom.text, position)?.ok_or_else(|| Error::UnknownLabel {
                label: atom.text.clone(),
            })
        }
        (Form::Label, AtomKind::Bare) => {
            let ont = ont.expect("label form requires an ontology");
            if let Some(id) = lookup_label(ont, &atom.text, position)? {
                return Ok(id);
            }
            // Bare words commonly stand in for labels with spaces
            // (`part_of` for "part of").
            if atom.text.contains('_') {
                let spaced = atom.text.replace('_', " ");
                if let Some(id) = lookup_label(ont, &spaced, position)? {
                    return Ok(id);
                }
            }
            // Unresolvable bare words parse and are flagged by validation.
            parse_id(&atom.text)
        }
    }
}

/// Looks `label` up among properties first when in property position,
/// then among classes; errors when several terms share the label.
fn lookup_label(ont: &Ontology, label: &str, position: Position) -> Result<Option<TermId>> {
    let (first, second) = match position {
        Position::Property => (ont.property_by_label(label), ont.class_by_label(label)),
        Position::Class => (ont.class_by_label(label), ont.property_by_label(label)),
    };
    match first {
        Ok(Some(id)) => Ok(Some(id)),
        Ok(None) => second,
        Err(e) => Err(e),
    }
}

fn resolve(surface: &SurfaceExpr, form: Form, ont: Option<&Ontology>) -> Result<ClassExpression> {
    match surface {
        SurfaceExpr::Atom(atom) => Ok(ClassExpression::Named(resolve_atom(
            atom,
            form,
            Position::Class,
            ont,
        )?)),
        SurfaceExpr::Some { property, filler } => {
            let prop = resolve_atom(property, form, Position::Property, ont)?;
            let filler = resolve(filler, form, ont)?;
            Ok(ClassExpression::some(prop, filler))
        }
        SurfaceExpr::And(ops) => {
            let ops = ops
                .iter()
                .map(|op| resolve(op, form, ont))
                .collect::<Result<Vec<_>>>()?;
            Ok(ClassExpression::and(ops))
        }
    }
}

/// Parses identifier-form text. Identifiers are not checked against any
/// ontology here; unknown ones surface during validation.
pub fn parse_identifier_form(text: &str) -> Result<ClassExpression> {
    resolve(&parse_surface(text)?, Form::Identifier, None)
}

/// Parses label-form text, resolving quoted labels and bare words against
/// `ont`. Unknown quoted labels are an error; unknown bare words parse as
/// unprefixed ids and are flagged downstream.
pub fn parse_label_form(text: &str, ont: &Ontology) -> Result<ClassExpression> {
    resolve(&parse_surface(text)?, Form::Label, Some(ont))
}

/// Parses `text` in the given form; see [`parse_identifier_form`] and
/// [`parse_label_form`].
pub fn parse_expression(text: &str, form: Form, ont: &Ontology) -> Result<ClassExpression> {
    match form {
        Form::Identifier => parse_identifier_form(text),
        Form::Label => parse_label_form(text, ont),
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

/// Prints identifier form with minimal parentheses.
pub fn print_identifier_form(expr: &ClassExpression) -> String {
    expr.to_string()
}

fn quote_label(label: &str) -> String {
    let mut out = String::with_capacity(label.len() + 2);
    out.push('\'');
    for c in label.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

fn property_label_text(label: &str) -> String {
    if label.contains(['(', ')', '\'', '\\']) {
        quote_label(label)
    } else {
        label
            .split_whitespace()
            .collect::<Vec<_>>()
            .join("_")
    }
}

fn print_label(expr: &ClassExpression, ont: &Ontology, out: &mut String) -> Result<()> {
    let class_label = |id: &TermId| -> Result<String> {
        match ont.class_label(id) {
            Some(l) if !l.is_empty() => Ok(quote_label(l)),
            _ => Err(Error::UnlabeledTerm { id: id.to_string() }),
        }
    };
    match expr {
        ClassExpression::Named(id) => out.push_str(&class_label(id)?),
        ClassExpression::SomeValuesFrom { property, filler } => {
            match ont.property_label(property) {
                Some(l) if !l.is_empty() => out.push_str(&property_label_text(l)),
                _ => {
                    return Err(Error::UnlabeledTerm {
                        id: property.to_string(),
                    })
                }
            }
            out.push_str(" some ");
            if matches!(**filler, ClassExpression::Intersection(_)) {
                out.push('(');
                print_label(filler, ont, out)?;
                out.push(')');
            } else {
                print_label(filler, ont, out)?;
            }
        }
        ClassExpression::Intersection(ops) => {
            for (i, op) in ops.iter().enumerate() {
                if i > 0 {
                    out.push_str(" and ");
                }
                if matches!(op, ClassExpression::Intersection(_)) {
                    out.push('(');
                    print_label(op, ont, out)?;
                    out.push(')');
                } else {
                    print_label(op, ont, out)?;
                }
            }
        }
    }
    Ok(())
}

/// Prints label form; every class needs a label in `ont` and every property
/// a label in its declaration, otherwise this fails.
pub fn print_label_form(expr: &ClassExpression, ont: &Ontology) -> Result<String> {
    let mut out = String::new();
    print_label(expr, ont, &mut out)?;
    Ok(out)
}

/// Prints `expr` in the given form.
pub fn print_expression(expr: &ClassExpression, form: Form, ont: &Ontology) -> Result<String> {
    match form {
        Form::Identifier => Ok(print_identifier_form(expr)),
        Form::Label => print_label_form(expr, ont),
    }
}
