//! OBO flat file ingestion: parsing, merging, and serialization of the
//! tag subset this toolkit interprets.
//!
//! Interpreted [Term] tags: `id`, `name`, `is_a`, `relationship`,
//! `intersection_of`, `is_obsolete`, `disjoint_from`. Interpreted [Typedef]
//! tags: `id`, `name`, `is_a`, `is_transitive`. Every other tag on a [Term]
//! is preserved verbatim as opaque metadata and counted; unknown typedef
//! tags and unknown stanza types are only counted.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::manchester::ClassExpression;
use crate::term::TermId;

/// One declared (or referenced) ontology class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyClass {
    pub id: TermId,
    /// Display label; empty when the class has none.
    pub label: String,
    /// Asserted superclass expressions. `is_a: T` contributes `Named(T)`,
    /// `relationship: R T` contributes `R some T`.
    pub superclasses: BTreeSet<ClassExpression>,
    /// Expressions the class is equivalent to, one per `intersection_of`
    /// block.
    pub equivalents: BTreeSet<ClassExpression>,
    pub disjoint_with: BTreeSet<TermId>,
    pub obsolete: bool,
    /// True when the id was referenced by some axiom but never declared.
    pub dangling: bool,
    /// Uninterpreted tag/value pairs, in file order.
    pub metadata: Vec<(String, String)>,
}

impl OntologyClass {
    pub fn new(id: TermId) -> Self {
        OntologyClass {
            id,
            label: String::new(),
            superclasses: BTreeSet::new(),
            equivalents: BTreeSet::new(),
            disjoint_with: BTreeSet::new(),
            obsolete: false,
            dangling: false,
            metadata: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    /// Adds a plain named superclass.
    pub fn with_parent(mut self, id: TermId) -> Self {
        self.superclasses.insert(ClassExpression::named(id));
        self
    }

    pub fn with_superclass(mut self, expr: ClassExpression) -> Self {
        self.superclasses.insert(expr);
        self
    }

    pub fn with_equivalent(mut self, expr: ClassExpression) -> Self {
        self.equivalents.insert(expr);
        self
    }

    pub fn with_disjoint(mut self, id: TermId) -> Self {
        self.disjoint_with.insert(id);
        self
    }

    pub fn with_obsolete(mut self, value: bool) -> Self {
        self.obsolete = value;
        self
    }
}

/// One declared object property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyInfo {
    pub id: TermId,
    pub label: String,
    pub transitive: bool,
    pub super_properties: BTreeSet<TermId>,
}

impl PropertyInfo {
    pub fn new(id: TermId) -> Self {
        PropertyInfo {
            id,
            label: String::new(),
            transitive: false,
            super_properties: BTreeSet::new(),
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_transitive(mut self, value: bool) -> Self {
        self.transitive = value;
        self
    }

    pub fn with_super(mut self, id: TermId) -> Self {
        self.super_properties.insert(id);
        self
    }
}

/// A set of classes and properties, from one file or from a merge.
#[derive(Debug, Clone, Default)]
pub struct Ontology {
    classes: BTreeMap<TermId, OntologyClass>,
    properties: BTreeMap<TermId, PropertyInfo>,
    /// Source names, in ingestion order.
    pub provenance: Vec<String>,
    /// Number of uninterpreted tags met during parsing.
    pub opaque_tag_count: usize,
}

impl Ontology {
    pub fn new() -> Self {
        Ontology::default()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Exact-id lookup; obsolete and dangling classes are returned too.
    pub fn lookup(&self, id: &TermId) -> Option<&OntologyClass> {
        self.classes.get(id)
    }

    pub fn property(&self, id: &TermId) -> Option<&PropertyInfo> {
        self.properties.get(id)
    }

    /// Classes in id order.
    pub fn classes(&self) -> impl Iterator<Item = &OntologyClass> {
        self.classes.values()
    }

    /// Properties in id order.
    pub fn properties(&self) -> impl Iterator<Item = &PropertyInfo> {
        self.properties.values()
    }

    pub fn class_label(&self, id: &TermId) -> Option<&str> {
        self.classes.get(id).map(|c| c.label.as_str())
    }

    pub fn property_label(&self, id: &TermId) -> Option<&str> {
        self.properties.get(id).map(|p| p.label.as_str())
    }

    /// Inserts or replaces a class, keeping label indexes implicit.
    pub fn add_class(&mut self, class: OntologyClass) {
        self.classes.insert(class.id.clone(), class);
    }

    pub fn add_property(&mut self, property: PropertyInfo) {
        self.properties.insert(property.id.clone(), property);
    }

    /// Resolves a class label, comparing with runs of whitespace collapsed.
    /// `Ok(None)` when nothing matches; an error when several classes share
    /// the label.
    pub fn class_by_label(&self, label: &str) -> Result<Option<TermId>> {
        let wanted = collapse_ws(label);
        let mut found: Option<&TermId> = None;
        for class in self.classes.values() {
            if !class.label.is_empty() && collapse_ws(&class.label) == wanted {
                if let Some(first) = found {
                    return Err(Error::AmbiguousLabel {
                        label: label.into(),
                        first: first.to_string(),
                        second: class.id.to_string(),
                    });
                }
                found = Some(&class.id);
            }
        }
        Ok(found.cloned())
    }

    /// Property counterpart of [`Ontology::class_by_label`].
    pub fn property_by_label(&self, label: &str) -> Result<Option<TermId>> {
        let wanted = collapse_ws(label);
        let mut found: Option<&TermId> = None;
        for prop in self.properties.values() {
            if !prop.label.is_empty() && collapse_ws(&prop.label) == wanted {
                if let Some(first) = found {
                    return Err(Error::AmbiguousLabel {
                        label: label.into(),
                        first: first.to_string(),
                        second: prop.id.to_string(),
                    });
                }
                found = Some(&prop.id);
            }
        }
        Ok(found.cloned())
    }

    /// True when `other` has the same classes and properties (labels,
    /// axioms, flags, metadata); provenance and tag counts are ignored.
    pub fn content_eq(&self, other: &Ontology) -> bool {
        self.classes == other.classes && self.properties == other.properties
    }

    /// Adds placeholder entries for ids referenced by axioms but never
    /// declared, and reports them sorted.
    fn mark_dangling(&mut self) -> Vec<TermId> {
        let mut referenced: BTreeSet<TermId> = BTreeSet::new();
        for class in self.classes.values() {
            for expr in class.superclasses.iter().chain(class.equivalents.iter()) {
                for id in expr.class_ids() {
                    referenced.insert(id.clone());
                }
            }
            for id in &class.disjoint_with {
                referenced.insert(id.clone());
            }
        }
        let mut dangling = Vec::new();
        for id in referenced {
            if !self.classes.contains_key(&id) {
                let mut class = OntologyClass::new(id.clone());
                class.dangling = true;
                self.classes.insert(id.clone(), class);
                dangling.push(id);
            }
        }
        dangling
    }
}

pub(crate) fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Strips a trailing `{...}` qualifier block and an unescaped `! comment`,
/// unescaping `\!` in what remains.
fn clean_value(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                match chars.next() {
                    Some('!') => out.push('!'),
                    Some(other) => {
                        out.push('\\');
                        out.push(other);
                    }
                    None => out.push('\\'),
                }
            }
            '!' => break,
            '{' => {
                // Trailing qualifiers carry no information we interpret.
                break;
            }
            _ => out.push(c),
        }
    }
    out.trim().to_string()
}

#[derive(PartialEq)]
enum StanzaKind {
    Term,
    Typedef,
    Other,
}

struct TermStanza {
    start_line: usize,
    id: Option<(TermId, usize)>,
    label: String,
    superclasses: BTreeSet<ClassExpression>,
    intersection: Vec<ClassExpression>,
    disjoint_with: BTreeSet<TermId>,
    obsolete: bool,
    metadata: Vec<(String, String)>,
}

struct TypedefStanza {
    start_line: usize,
    id: Option<(TermId, usize)>,
    label: String,
    transitive: bool,
    supers: BTreeSet<TermId>,
}

struct ParseState<'a> {
    file: &'a str,
    ont: Ontology,
    /// First-declaration line per id, for duplicate reporting.
    seen: BTreeMap<TermId, usize>,
}

impl ParseState<'_> {
    fn syntax(&self, line: usize, message: impl Into<String>) -> Error {
        Error::OboSyntax {
            file: self.file.into(),
            line,
            message: message.into(),
        }
    }

    fn check_duplicate(&mut self, id: &TermId, line: usize) -> Result<()> {
        if let Some(&first) = self.seen.get(id) {
            return Err(Error::DuplicateTerm {
                file: self.file.into(),
                id: id.to_string(),
                first,
                second: line,
            });
        }
        self.seen.insert(id.clone(), line);
        Ok(())
    }

    fn finish_term(&mut self, stanza: TermStanza) -> Result<()> {
        let (id, id_line) = stanza
            .id
            .ok_or_else(|| self.syntax(stanza.start_line, "[Term] stanza without an id tag"))?;
        self.check_duplicate(&id, id_line)?;
        let mut class = OntologyClass::new(id);
        class.label = stanza.label;
        class.superclasses = stanza.superclasses;
        class.disjoint_with = stanza.disjoint_with;
        class.obsolete = stanza.obsolete;
        class.metadata = stanza.metadata;
        if !stanza.intersection.is_empty() {
            class
                .equivalents
                .insert(ClassExpression::and(stanza.intersection));
        }
        self.ont.add_class(class);
        Ok(())
    }

    fn finish_typedef(&mut self, stanza: TypedefStanza) -> Result<()> {
        let (id, id_line) = stanza
            .id
            .ok_or_else(|| self.syntax(stanza.start_line, "[Typedef] stanza without an id tag"))?;
        self.check_duplicate(&id, id_line)?;
        let mut prop = PropertyInfo::new(id);
        prop.label = stanza.label;
        prop.transitive = stanza.transitive;
        prop.super_properties = stanza.supers;
        self.ont.add_property(prop);
        Ok(())
    }
}

/// Parses OBO text. `name` is used in errors and recorded as provenance.
pub fn parse_obo_text(name: &str, text: &str) -> Result<Ontology> {
    let mut state = ParseState {
        file: name,
        ont: Ontology::new(),
        seen: BTreeMap::new(),
    };
    state.ont.provenance.push(name.to_string());

    let mut kind = StanzaKind::Other; // header counts as "other"
    let mut term: Option<TermStanza> = None;
    let mut typedef: Option<TypedefStanza> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('[') {
            if let Some(stanza) = term.take() {
                state.finish_term(stanza)?;
            }
            if let Some(stanza) = typedef.take() {
                state.finish_typedef(stanza)?;
            }
            match trimmed {
                "[Term]" => {
                    kind = StanzaKind::Term;
                    term = Some(TermStanza {
                        start_line: lineno,
                        id: None,
                        label: String::new(),
                        superclasses: BTreeSet::new(),
                        intersection: Vec::new(),
                        disjoint_with: BTreeSet::new(),
                        obsolete: false,
                        metadata: Vec::new(),
                    });
                }
                "[Typedef]" => {
                    kind = StanzaKind::Typedef;
                    typedef = Some(TypedefStanza {
                        start_line: lineno,
                        id: None,
                        label: String::new(),
                        transitive: false,
                        supers: BTreeSet::new(),
                    });
                }
                _ => {
                    kind = StanzaKind::Other;
                }
            }
            continue;
        }

        let (tag, value) = match line.split_once(':') {
            Some((t, v)) => (t.trim(), v),
            None => {
                return Err(state.syntax(lineno, format!("expected 'tag: value', got {line:?}")))
            }
        };

        match kind {
            StanzaKind::Other => continue, // header lines and foreign stanzas
            StanzaKind::Term => {
                let stanza = term.as_mut().expect("term stanza in progress");
                match tag {
                    "id" => {
                        let value = clean_value(value);
                        let id = TermId::parse(&value)
                            .map_err(|e| state.syntax(lineno, e.to_string()))?;
                        if stanza.id.is_some() {
                            return Err(state.syntax(lineno, "second id tag in one stanza"));
                        }
                        stanza.id = Some((id, lineno));
                    }
                    "name" => {
                        if stanza.label.is_empty() {
                            stanza.label = clean_value(value);
                        }
                    }
                    "is_a" => {
                        let value = clean_value(value);
                        let id = TermId::parse(&value)
                            .map_err(|e| state.syntax(lineno, e.to_string()))?;
                        stanza.superclasses.insert(ClassExpression::named(id));
                    }
                    "relationship" => {
                        let value = clean_value(value);
                        let mut parts = value.split_whitespace();
                        let (rel, target) = match (parts.next(), parts.next(), parts.next()) {
                            (Some(r), Some(t), None) => (r, t),
                            _ => {
                                return Err(state.syntax(
                                    lineno,
                                    format!("relationship needs 'REL TARGET', got {value:?}"),
                                ))
                            }
                        };
                        let rel = TermId::parse(rel)
                            .map_err(|e| state.syntax(lineno, e.to_string()))?;
                        let target = TermId::parse(target)
                            .map_err(|e| state.syntax(lineno, e.to_string()))?;
                        stanza
                            .superclasses
                            .insert(ClassExpression::some(rel, ClassExpression::named(target)));
                    }
                    "intersection_of" => {
                        let value = clean_value(value);
                        let mut parts = value.split_whitespace();
                        let expr = match (parts.next(), parts.next(), parts.next()) {
                            (Some(genus), None, _) => {
                                let id = TermId::parse(genus)
                                    .map_err(|e| state.syntax(lineno, e.to_string()))?;
                                ClassExpression::named(id)
                            }
                            (Some(rel), Some(target), None) => {
                                let rel = TermId::parse(rel)
                                    .map_err(|e| state.syntax(lineno, e.to_string()))?;
                                let target = TermId::parse(target)
                                    .map_err(|e| state.syntax(lineno, e.to_string()))?;
                                ClassExpression::some(rel, ClassExpression::named(target))
                            }
                            _ => {
                                return Err(state.syntax(
                                    lineno,
                                    format!(
                                        "intersection_of needs 'CLASS' or 'REL TARGET', got {value:?}"
                                    ),
                                ))
                            }
                        };
                        stanza.intersection.push(expr);
                    }
                    "disjoint_from" => {
                        let value = clean_value(value);
                        let id = TermId::parse(&value)
                            .map_err(|e| state.syntax(lineno, e.to_string()))?;
                        stanza.disjoint_with.insert(id);
                    }
                    "is_obsolete" => {
                        stanza.obsolete = clean_value(value) == "true";
                    }
                    _ => {
                        state.ont.opaque_tag_count += 1;
                        stanza
                            .metadata
                            .push((tag.to_string(), value.trim_start().to_string()));
                    }
                }
            }
            StanzaKind::Typedef => {
                let stanza = typedef.as_mut().expect("typedef stanza in progress");
                match tag {
                    "id" => {
                        let value = clean_value(value);
                        let id = TermId::parse(&value)
                            .map_err(|e| state.syntax(lineno, e.to_string()))?;
                        if stanza.id.is_some() {
                            return Err(state.syntax(lineno, "second id tag in one stanza"));
                        }
                        stanza.id = Some((id, lineno));
                    }
                    "name" => {
                        if stanza.label.is_empty() {
                            stanza.label = clean_value(value);
                        }
                    }
                    "is_a" => {
                        let value = clean_value(value);
                        let id = TermId::parse(&value)
                            .map_err(|e| state.syntax(lineno, e.to_string()))?;
                        stanza.supers.insert(id);
                    }
                    "is_transitive" => {
                        stanza.transitive = clean_value(value) == "true";
                    }
                    _ => {
                        state.ont.opaque_tag_count += 1;
                    }
                }
            }
        }
    }
    if let Some(stanza) = term.take() {
        state.finish_term(stanza)?;
    }
    if let Some(stanza) = typedef.take() {
        state.finish_typedef(stanza)?;
    }

    let mut ont = state.ont;
    ont.mark_dangling();
    Ok(ont)
}

/// Reads and parses one OBO file.
pub fn parse_obo(path: &Path) -> Result<Ontology> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_obo_text(&path.display().to_string(), &text)
}

// ---------------------------------------------------------------------------
// Merging
// ---------------------------------------------------------------------------

/// One merge event; `kind` is `label_conflict`, `disjoint_stripped`, or
/// `dangling_reference`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MergeLogEntry {
    pub kind: String,
    pub id: Option<TermId>,
    pub detail: String,
}

/// Ordered record of what a merge changed or noticed.
#[derive(Debug, Clone, Default)]
pub struct MergeLog {
    pub entries: Vec<MergeLogEntry>,
}

impl MergeLog {
    fn push(&mut self, kind: &str, id: Option<TermId>, detail: String) {
        self.entries.push(MergeLogEntry {
            kind: kind.into(),
            id,
            detail,
        });
    }

    /// Serializes one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn count(&self, kind: &str) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

/// Merges ontologies into one. Classes with the same id are combined
/// tag-wise: axiom sets are unioned, the obsolete flag is or-ed, and on a
/// label conflict the first non-empty label wins with a log entry. With
/// `strip_disjoints` every `disjoint_with` set is emptied after its size is
/// logged. Dangling references are recomputed over the union and logged.
///
/// Aside from the first-label tie-break, the result does not depend on
/// input order.
pub fn merge(sources: Vec<Ontology>, strip_disjoints: bool) -> (Ontology, MergeLog) {
    let mut log = MergeLog::default();
    let mut merged = Ontology::new();

    for source in sources {
        merged.provenance.extend(source.provenance.iter().cloned());
        merged.opaque_tag_count += source.opaque_tag_count;
        for class in source.classes.into_values() {
            if class.dangling {
                continue; // recomputed over the union below
            }
            match merged.classes.get_mut(&class.id) {
                None => {
                    merged.classes.insert(class.id.clone(), class);
                }
                Some(existing) => {
                    if existing.label.is_empty() {
                        existing.label = class.label;
                    } else if !class.label.is_empty() && class.label != existing.label {
                        log.push(
                            "label_conflict",
                            Some(class.id.clone()),
                            format!(
                                "kept {:?} from an earlier input, ignored {:?}",
                                existing.label, class.label
                            ),
                        );
                    }
                    existing.superclasses.extend(class.superclasses);
                    existing.equivalents.extend(class.equivalents);
                    existing.disjoint_with.extend(class.disjoint_with);
                    existing.obsolete |= class.obsolete;
                    for pair in class.metadata {
                        if !existing.metadata.contains(&pair) {
                            existing.metadata.push(pair);
                        }
                    }
                }
            }
        }
        for prop in source.properties.into_values() {
            match merged.properties.get_mut(&prop.id) {
                None => {
                    merged.properties.insert(prop.id.clone(), prop);
                }
                Some(existing) => {
                    if existing.label.is_empty() {
                        existing.label = prop.label;
                    } else if !prop.label.is_empty() && prop.label != existing.label {
                        log.push(
                            "label_conflict",
                            Some(prop.id.clone()),
                            format!(
                                "kept {:?} from an earlier input, ignored {:?}",
                                existing.label, prop.label
                            ),
                        );
                    }
                    existing.transitive |= prop.transitive;
                    existing.super_properties.extend(prop.super_properties);
                }
            }
        }
    }

    if strip_disjoints {
        for class in merged.classes.values_mut() {
            let n = class.disjoint_with.len();
            if n > 0 {
                class.disjoint_with.clear();
                log.push(
                    "disjoint_stripped",
                    Some(class.id.clone()),
                    format!("{n} disjoint_from axioms removed"),
                );
            }
        }
    }

    for id in merged.mark_dangling() {
        log.push(
            "dangling_reference",
            Some(id),
            "referenced by an axiom but never declared".into(),
        );
    }

    (merged, log)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn expression_obo_lines(id: &TermId, expr: &ClassExpression, out: &mut String) -> Result<()> {
    let unrepresentable = |reason: &str| Error::Unserializable {
        id: id.to_string(),
        reason: reason.into(),
    };
    let operand_line = |op: &ClassExpression| -> Result<String> {
        match op {
            ClassExpression::Named(c) => Ok(format!("intersection_of: {c}\n")),
            ClassExpression::SomeValuesFrom { property, filler } => match &**filler {
                ClassExpression::Named(c) => Ok(format!("intersection_of: {property} {c}\n")),
                _ => Err(unrepresentable("nested filler in intersection_of")),
            },
            ClassExpression::Intersection(_) => {
                Err(unrepresentable("nested intersection in intersection_of"))
            }
        }
    };
    match expr {
        ClassExpression::Intersection(ops) => {
            for op in ops {
                out.push_str(&operand_line(op)?);
            }
        }
        other => out.push_str(&operand_line(other)?),
    }
    Ok(())
}

/// Writes the ontology back as OBO text: stanzas sorted by id, tags in a
/// fixed order, so equal content gives byte-identical output. Dangling
/// placeholder classes are implied by the axioms referencing them and are
/// not written.
pub fn serialize(ont: &Ontology) -> Result<String> {
    let mut out = String::from("format-version: 1.2\n");
    for class in ont.classes() {
        if class.dangling {
            continue;
        }
        out.push_str("\n[Term]\n");
        writeln!(out, "id: {}", class.id).unwrap();
        if !class.label.is_empty() {
            writeln!(out, "name: {}", class.label).unwrap();
        }
        for (tag, value) in &class.metadata {
            writeln!(out, "{tag}: {value}").unwrap();
        }
        for expr in &class.superclasses {
            match expr {
                ClassExpression::Named(id) => writeln!(out, "is_a: {id}").unwrap(),
                ClassExpression::SomeValuesFrom { property, filler } => match &**filler {
                    ClassExpression::Named(id) => {
                        writeln!(out, "relationship: {property} {id}").unwrap()
                    }
                    _ => {
                        return Err(Error::Unserializable {
                            id: class.id.to_string(),
                            reason: "relationship with a complex filler".into(),
                        })
                    }
                },
                ClassExpression::Intersection(_) => {
                    return Err(Error::Unserializable {
                        id: class.id.to_string(),
                        reason: "intersection used as a direct superclass".into(),
                    })
                }
            }
        }
        for expr in &class.equivalents {
            expression_obo_lines(&class.id, expr, &mut out)?;
        }
        for id in &class.disjoint_with {
            writeln!(out, "disjoint_from: {id}").unwrap();
        }
        if class.obsolete {
            out.push_str("is_obsolete: true\n");
        }
    }
    for prop in ont.properties() {
        out.push_str("\n[Typedef]\n");
        writeln!(out, "id: {}", prop.id).unwrap();
        if !prop.label.is_empty() {
            writeln!(out, "name: {}", prop.label).unwrap();
        }
        for id in &prop.super_properties {
            writeln!(out, "is_a: {id}").unwrap();
        }
        if prop.transitive {
            out.push_str("is_transitive: true\n");
        }
    }
    Ok(out)
}
