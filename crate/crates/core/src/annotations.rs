//! The 10-column annotation TSV format: parsing, serialization, validator
//! checks, and workspace scaffolding.
//!
//! Column layout, one row per EQ statement: character_number,
//! character_text, state_symbol, state_text, entity_id, entity_label,
//! quality_id, quality_label, related_entity_id, related_entity_label.
//! The `*_id` columns hold identifier-form class expressions, the `*_label`
//! columns the same expressions in label form. Related-entity columns are
//! empty strings when the EQ has no related entity. Files are UTF-8 with LF
//! endings and exactly one trailing newline; CRLF input is tolerated.
//!
//! [`parse_annotation_tsv`] reports structural problems (V1) and drops
//! those rows; [`validate`] runs the ontology-dependent checks V2..V8 over
//! the rows that remain. Callers concatenate both finding lists. Rows whose
//! expressions do not parse stay in [`AnnotationSet::rows`] for reporting
//! but contribute no [`EQAnnotation`], so scoring never consumes them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::manchester::{
    parse_identifier_form, parse_surface, AtomKind, ClassExpression, SurfaceAtom, SurfaceExpr,
};
use crate::obo::{collapse_ws, Ontology};
use crate::term::TermId;

pub const ANNOTATION_HEADER: &str = "character_number\tcharacter_text\tstate_symbol\tstate_text\t\
     entity_id\tentity_label\tquality_id\tquality_label\trelated_entity_id\trelated_entity_label";

pub const CHARACTER_HEADER: &str = "character_number\tcharacter_text\tstate_symbol\tstate_text";

/// Prefix expected on quality class atoms; anything else draws V8.
pub const QUALITY_PREFIX: &str = "PATO";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Validator check identifiers.
///
/// V1 structural row problems, V2 unresolvable class identifier, V3
/// identifier/label mismatch, V4 obsolete class, V5 expression syntax
/// error, V6 undeclared property, V7 duplicate EQ within a state (warning),
/// V8 non-PATO quality class (warning).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Code {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
    V7,
    V8,
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: Code,
    pub file: String,
    pub line: usize,
    pub message: String,
}

/// Stable report order: file, then line, then check code.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        (&a.file, a.line, a.code, &a.message).cmp(&(&b.file, b.line, b.code, &b.message))
    });
}

/// True when no finding is an error; warnings do not block.
pub fn is_clean(findings: &[Finding]) -> bool {
    findings.iter().all(|f| f.severity != Severity::Error)
}

/// One character state as defined in a character's input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterState {
    pub character_number: u32,
    pub character_text: String,
    pub state_symbol: String,
    pub state_text: String,
}

/// One structurally valid annotation row, columns kept as read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRow {
    pub file: String,
    pub line: usize,
    pub character_number: u32,
    pub character_text: String,
    pub state_symbol: String,
    pub state_text: String,
    pub entity_id: String,
    pub entity_label: String,
    pub quality_id: String,
    pub quality_label: String,
    pub related_id: String,
    pub related_label: String,
}

impl AnnotationRow {
    fn tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.character_number,
            self.character_text,
            self.state_symbol,
            self.state_text,
            self.entity_id,
            self.entity_label,
            self.quality_id,
            self.quality_label,
            self.related_id,
            self.related_label,
        )
    }
}

/// One EQ statement: parsed canonical expressions plus the raw column text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EQAnnotation {
    pub entity: ClassExpression,
    pub quality: ClassExpression,
    pub related: Option<ClassExpression>,
    pub entity_text: String,
    pub entity_label: String,
    pub quality_text: String,
    pub quality_label: String,
    pub related_text: String,
    pub related_label: String,
}

impl EQAnnotation {
    /// Builds the EQ from a row; `None` when any expression column fails to
    /// parse (the row stays listed but quarantined from scoring).
    fn from_row(row: &AnnotationRow) -> Option<EQAnnotation> {
        let entity = parse_identifier_form(&row.entity_id).ok()?;
        let quality = parse_identifier_form(&row.quality_id).ok()?;
        let related = if row.related_id.is_empty() {
            None
        } else {
            Some(parse_identifier_form(&row.related_id).ok()?)
        };
        Some(EQAnnotation {
            entity,
            quality,
            related,
            entity_text: row.entity_id.clone(),
            entity_label: row.entity_label.clone(),
            quality_text: row.quality_id.clone(),
            quality_label: row.quality_label.clone(),
            related_text: row.related_id.clone(),
            related_label: row.related_label.clone(),
        })
    }
}

/// A character state is keyed by (character_number, state_symbol).
pub type StateKey = (u32, String);

/// Annotations from one or more files of the same publication.
#[derive(Debug, Clone, Default)]
pub struct AnnotationSet {
    /// Structurally valid rows, in source order.
    pub rows: Vec<AnnotationRow>,
    states: BTreeMap<StateKey, Vec<EQAnnotation>>,
    /// Source names, in ingestion order.
    pub provenance: Vec<String>,
}

impl AnnotationSet {
    /// EQ statements grouped by state. Keys without any parseable EQ are
    /// not stored.
    pub fn states(&self) -> &BTreeMap<StateKey, Vec<EQAnnotation>> {
        &self.states
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Union with the annotations of another file.
    pub fn merge(&mut self, other: AnnotationSet) {
        self.rows.extend(other.rows);
        for (key, eqs) in other.states {
            self.states.entry(key).or_default().extend(eqs);
        }
        self.provenance.extend(other.provenance);
    }
}

fn v1(file: &str, line: usize, message: String) -> Finding {
    Finding {
        severity: Severity::Error,
        code: Code::V1,
        file: file.to_string(),
        line,
        message,
    }
}

/// Parses one annotation file. Structural problems become V1 findings and
/// drop the affected row; everything else is kept.
pub fn parse_annotation_tsv(file: &str, text: &str) -> (AnnotationSet, Vec<Finding>) {
    let mut set = AnnotationSet {
        provenance: vec![file.to_string()],
        ..AnnotationSet::default()
    };
    let mut findings = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.strip_suffix('\r').unwrap_or(header) == ANNOTATION_HEADER => {}
        Some(_) => findings.push(v1(
            file,
            1,
            "header does not match the annotation column layout".into(),
        )),
        None => {
            findings.push(v1(file, 1, "empty file".into()));
            return (set, findings);
        }
    }
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            findings.push(v1(
                file,
                line_no,
                format!("expected 10 columns, found {}", cols.len()),
            ));
            continue;
        }
        let character_number: u32 = match cols[0].parse() {
            Ok(n) => n,
            Err(_) => {
                findings.push(v1(
                    file,
                    line_no,
                    format!("character number {:?} is not a non-negative integer", cols[0]),
                ));
                continue;
            }
        };
        let mut structurally_ok = true;
        let required = [
            (2, "state_symbol"),
            (4, "entity_id"),
            (5, "entity_label"),
            (6, "quality_id"),
            (7, "quality_label"),
        ];
        for (idx, name) in required {
            if cols[idx].is_empty() {
                findings.push(v1(file, line_no, format!("{name} column is empty")));
                structurally_ok = false;
            }
        }
        if cols[8].is_empty() != cols[9].is_empty() {
            findings.push(v1(
                file,
                line_no,
                "related-entity columns must be both filled or both empty".into(),
            ));
            structurally_ok = false;
        }
        if !structurally_ok {
            continue;
        }
        let row = AnnotationRow {
            file: file.to_string(),
            line: line_no,
            character_number,
            character_text: cols[1].into(),
            state_symbol: cols[2].into(),
            state_text: cols[3].into(),
            entity_id: cols[4].into(),
            entity_label: cols[5].into(),
            quality_id: cols[6].into(),
            quality_label: cols[7].into(),
            related_id: cols[8].into(),
            related_label: cols[9].into(),
        };
        if let Some(eq) = EQAnnotation::from_row(&row) {
            set.states
                .entry((row.character_number, row.state_symbol.clone()))
                .or_default()
                .push(eq);
        }
        set.rows.push(row);
    }
    (set, findings)
}

/// Reads and parses one annotation file; the path string names it in
/// findings and provenance.
pub fn read_annotation_file(path: &Path) -> Result<(AnnotationSet, Vec<Finding>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(parse_annotation_tsv(&path.display().to_string(), &text))
}

/// Writes the set back in canonical form: header, rows in stored order, LF
/// endings, exactly one trailing newline.
pub fn serialize(set: &AnnotationSet) -> String {
    let mut out = String::with_capacity(64 * (set.rows.len() + 1));
    out.push_str(ANNOTATION_HEADER);
    out.push('\n');
    for row in &set.rows {
        out.push_str(&row.tsv_line());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Entity,
    Quality,
    Related,
}

impl Column {
    fn id_name(self) -> &'static str {
        match self {
            Column::Entity => "entity_id",
            Column::Quality => "quality_id",
            Column::Related => "related_entity_id",
        }
    }

    fn label_name(self) -> &'static str {
        match self {
            Column::Entity => "entity_label",
            Column::Quality => "quality_label",
            Column::Related => "related_entity_label",
        }
    }

    fn texts(self, row: &AnnotationRow) -> (&str, &str) {
        match self {
            Column::Entity => (&row.entity_id, &row.entity_label),
            Column::Quality => (&row.quality_id, &row.quality_label),
            Column::Related => (&row.related_id, &row.related_label),
        }
    }
}

/// Walks two surface trees in lockstep, pairing atoms by position; `true`
/// in a pair marks a property atom. Returns false when the shapes differ.
fn zip_atoms<'a>(
    id_side: &'a SurfaceExpr,
    label_side: &'a SurfaceExpr,
    out: &mut Vec<(&'a SurfaceAtom, &'a SurfaceAtom, bool)>,
) -> bool {
    match (id_side, label_side) {
        (SurfaceExpr::Atom(a), SurfaceExpr::Atom(b)) => {
            out.push((a, b, false));
            true
        }
        (
            SurfaceExpr::Some {
                property: p1,
                filler: f1,
            },
            SurfaceExpr::Some {
                property: p2,
                filler: f2,
            },
        ) => {
            out.push((p1, p2, true));
            zip_atoms(f1, f2, out)
        }
        (SurfaceExpr::And(xs), SurfaceExpr::And(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| zip_atoms(x, y, out))
        }
        _ => false,
    }
}

/// The label text as the curator wrote it, normalized for comparison:
/// whitespace collapsed, and underscores in unquoted atoms read as spaces
/// (quoted labels are verbatim).
fn written_text(atom: &SurfaceAtom) -> String {
    match atom.kind {
        AtomKind::Quoted => collapse_ws(&atom.text),
        _ => collapse_ws(&atom.text.replace('_', " ")),
    }
}

struct RowChecker<'a> {
    row: &'a AnnotationRow,
    ont: &'a Ontology,
    findings: &'a mut Vec<Finding>,
}

impl RowChecker<'_> {
    fn push(&mut self, severity: Severity, code: Code, message: String) {
        self.findings.push(Finding {
            severity,
            code,
            file: self.row.file.clone(),
            line: self.row.line,
            message,
        });
    }

    /// V2/V4 over class atoms, V6 over properties, V8 over quality atoms.
    fn check_terms(&mut self, expr: &ClassExpression, col: Column) {
        let mut seen = BTreeSet::new();
        for id in expr.class_ids() {
            if !seen.insert(id.clone()) {
                continue;
            }
            match self.ont.lookup(id) {
                None => self.push(
                    Severity::Error,
                    Code::V2,
                    format!("{}: unresolvable identifier {id}", col.id_name()),
                ),
                Some(class) if class.dangling => self.push(
                    Severity::Error,
                    Code::V2,
                    format!("{}: unresolvable identifier {id}", col.id_name()),
                ),
                Some(class) if class.obsolete => self.push(
                    Severity::Error,
                    Code::V4,
                    format!("{}: obsolete class {id}", col.id_name()),
                ),
                Some(_) => {}
            }
            if col == Column::Quality && id.prefix() != QUALITY_PREFIX {
                self.push(
                    Severity::Warning,
                    Code::V8,
                    format!("quality class {id} is not a {QUALITY_PREFIX} term"),
                );
            }
        }
        let mut seen_props = BTreeSet::new();
        for id in expr.property_ids() {
            if !seen_props.insert(id.clone()) {
                continue;
            }
            if self.ont.property(id).is_none() {
                self.push(
                    Severity::Error,
                    Code::V6,
                    format!("{}: undeclared property {id}", col.id_name()),
                );
            }
        }
    }

    /// V3: shapes must match token for token, and every label atom must
    /// match the ontology label of its paired identifier. Atoms whose id
    /// did not resolve are skipped here; V2/V6 already flagged them.
    fn check_labels(&mut self, id_surface: &SurfaceExpr, label_surface: &SurfaceExpr, col: Column) {
        let mut pairs = Vec::new();
        if !zip_atoms(id_surface, label_surface, &mut pairs) {
            self.push(
                Severity::Error,
                Code::V3,
                format!(
                    "{} and {} expressions differ in shape",
                    col.id_name(),
                    col.label_name()
                ),
            );
            return;
        }
        for (id_atom, label_atom, is_property) in pairs {
            let Ok(id) = TermId::parse(&id_atom.text) else {
                continue;
            };
            if label_atom.kind == AtomKind::Curie {
                if label_atom.text != id_atom.text {
                    self.push(
                        Severity::Error,
                        Code::V3,
                        format!(
                            "{}: identifier {} does not match {}",
                            col.label_name(),
                            label_atom.text,
                            id_atom.text
                        ),
                    );
                }
                continue;
            }
            let written = written_text(label_atom);
            if is_property {
                let Some(prop) = self.ont.property(&id) else {
                    continue;
                };
                let actual = collapse_ws(&prop.label);
                if written != actual && label_atom.text != id_atom.text {
                    self.push(
                        Severity::Error,
                        Code::V3,
                        format!(
                            "{}: label {:?} does not match {:?} for {id}",
                            col.label_name(),
                            label_atom.text,
                            prop.label
                        ),
                    );
                }
            } else {
                let Some(class) = self.ont.lookup(&id).filter(|c| !c.dangling) else {
                    continue;
                };
                if class.label.is_empty() {
                    self.push(
                        Severity::Error,
                        Code::V3,
                        format!(
                            "{}: {id} has no label to match {:?}",
                            col.label_name(),
                            label_atom.text
                        ),
                    );
                } else if written != collapse_ws(&class.label) {
                    self.push(
                        Severity::Error,
                        Code::V3,
                        format!(
                            "{}: label {:?} does not match {:?} for {id}",
                            col.label_name(),
                            label_atom.text,
                            class.label
                        ),
                    );
                }
            }
        }
    }

    fn check_pair(&mut self, col: Column) {
        let (id_text, label_text) = col.texts(self.row);
        if col == Column::Related && id_text.is_empty() && label_text.is_empty() {
            return;
        }
        let id_expr = parse_identifier_form(id_text);
        let label_surface = parse_surface(label_text);
        match &id_expr {
            Ok(expr) => self.check_terms(expr, col),
            Err(e) => self.push(
                Severity::Error,
                Code::V5,
                format!("{}: {e}", col.id_name()),
            ),
        }
        if let Err(e) = &label_surface {
            self.push(
                Severity::Error,
                Code::V5,
                format!("{}: {e}", col.label_name()),
            );
        }
        if let (Ok(_), Ok(label_tree)) = (&id_expr, &label_surface) {
            // The id column parsed, so its surface tree exists.
            let id_tree = parse_surface(id_text).expect("surface of parsed expression");
            self.check_labels(&id_tree, label_tree, col);
        }
    }
}

/// Runs V2..V8 over every stored row against the merged ontology. V1
/// findings come from parsing; concatenate both lists for a full report.
pub fn validate(set: &AnnotationSet, ont: &Ontology) -> Vec<Finding> {
    let mut findings = Vec::new();
    for row in &set.rows {
        let mut checker = RowChecker {
            row,
            ont,
            findings: &mut findings,
        };
        checker.check_pair(Column::Entity);
        checker.check_pair(Column::Quality);
        checker.check_pair(Column::Related);
    }
    duplicate_warnings(set, &mut findings);
    sort_findings(&mut findings);
    findings
}

/// V7: the same canonical EQ stated twice within one character state.
fn duplicate_warnings(set: &AnnotationSet, findings: &mut Vec<Finding>) {
    let mut seen: HashSet<(u32, &str, String)> = HashSet::new();
    for row in &set.rows {
        let Some(eq) = EQAnnotation::from_row(row) else {
            continue;
        };
        let identity = format!(
            "{}|{}|{}",
            eq.entity,
            eq.quality,
            eq.related.as_ref().map(|e| e.to_string()).unwrap_or_default()
        );
        if !seen.insert((row.character_number, &row.state_symbol, identity)) {
            findings.push(Finding {
                severity: Severity::Warning,
                code: Code::V7,
                file: row.file.clone(),
                line: row.line,
                message: format!(
                    "duplicate EQ for character {} state {}",
                    row.character_number, row.state_symbol
                ),
            });
        }
    }
}

/// Parses a 4-column character definition file. Unlike annotation input,
/// these are trusted task inputs: any structural problem is fatal.
pub fn parse_character_tsv(file: &str, text: &str) -> Result<Vec<CharacterState>> {
    let syntax = |line: usize, message: String| Error::TableSyntax {
        file: file.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.strip_suffix('\r').unwrap_or(h) == CHARACTER_HEADER => {}
        Some(_) => {
            return Err(syntax(
                1,
                "header does not match the character column layout".into(),
            ))
        }
        None => return Err(syntax(1, "empty file".into())),
    }
    let mut out = Vec::new();
    for (i, raw) in lines {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(syntax(i + 1, format!("expected 4 columns, found {}", cols.len())));
        }
        let character_number = cols[0].parse().map_err(|_| {
            syntax(
                i + 1,
                format!("character number {:?} is not a non-negative integer", cols[0]),
            )
        })?;
        out.push(CharacterState {
            character_number,
            character_text: cols[1].into(),
            state_symbol: cols[2].into(),
            state_text: cols[3].into(),
        });
    }
    Ok(out)
}

fn sha256_hex(bytes: &[u8]) -> String {
    use std::fmt::Write as _;
    let mut out = String::with_capacity(64);
    for byte in Sha256::digest(bytes) {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

const VALIDATE_SH: &str = "#!/bin/sh\n\
# Checks annotation TSVs against the workspace ontologies.\n\
# Usage: ./validate.sh output/*.tsv\n\
set -e\n\
cd \"$(dirname \"$0\")\"\n\
args=\"\"\n\
for f in ontologies/*.obo; do\n\
    args=\"$args --ontology $f\"\n\
done\n\
exec eqtk validate $args \"$@\"\n";

/// Creates the working layout for an annotation task: character definitions
/// split one file per character under `input/characters/`, ontology files
/// under `ontologies/`, the guide and a `validate.sh` entry point at the
/// root, an empty `output/`, and a `manifest.tsv` listing every placed file
/// with its sha256. Returns the manifest entries. Refuses to touch a
/// non-empty target.
pub fn scaffold_workspace(
    root: &Path,
    characters: &[CharacterState],
    ontologies: &[PathBuf],
    guide: Option<&Path>,
) -> Result<Vec<(String, String)>> {
    if root.exists() {
        let occupied = !root.is_dir()
            || root
                .read_dir()
                .map_err(|e| Error::io(format!("reading {}", root.display()), e))?
                .next()
                .is_some();
        if occupied {
            return Err(Error::WorkspaceNotEmpty {
                path: root.to_path_buf(),
            });
        }
    }
    for dir in ["input/characters", "ontologies", "output"] {
        let path = root.join(dir);
        fs::create_dir_all(&path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    }

    let mut entries = Vec::new();
    let mut place = |rel: String, bytes: &[u8]| -> Result<()> {
        let path = root.join(&rel);
        fs::write(&path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        entries.push((rel, sha256_hex(bytes)));
        Ok(())
    };

    let mut by_character: BTreeMap<u32, Vec<&CharacterState>> = BTreeMap::new();
    for state in characters {
        by_character.entry(state.character_number).or_default().push(state);
    }
    for (number, states) in by_character {
        let mut text = String::from(CHARACTER_HEADER);
        text.push('\n');
        for s in states {
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                s.character_number, s.character_text, s.state_symbol, s.state_text
            ));
        }
        place(
            format!("input/characters/character-{number:03}.tsv"),
            text.as_bytes(),
        )?;
    }

    for source in ontologies {
        let bytes = fs::read(source)
            .map_err(|e| Error::io(format!("reading {}", source.display()), e))?;
        let name = source
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "ontology.obo".to_string());
        place(format!("ontologies/{name}"), &bytes)?;
    }

    if let Some(source) = guide {
        let bytes = fs::read(source)
            .map_err(|e| Error::io(format!("reading {}", source.display()), e))?;
        let name = source
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "guide.md".to_string());
        place(name, &bytes)?;
    }

    place("validate.sh".to_string(), VALIDATE_SH.as_bytes())?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let script = root.join("validate.sh");
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755))
            .map_err(|e| Error::io(format!("marking {} executable", script.display()), e))?;
    }

    entries.sort();
    let mut manifest = String::new();
    for (rel, hash) in &entries {
        manifest.push_str(&format!("{rel}\t{hash}\n"));
    }
    let manifest_path = root.join("manifest.tsv");
    fs::write(&manifest_path, manifest)
        .map_err(|e| Error::io(format!("writing {}", manifest_path.display()), e))?;
    Ok(entries)
}
