//! On-disk closure cache, keyed by a digest of the saturation input.
//!
//! The format is line-oriented text: a version header, the input key, then
//! counted sections for ancestor pairs, role links, and unsatisfiable
//! classes. A cache whose version or key does not match is ignored (the
//! caller recomputes and overwrites); one that matches but cannot be parsed
//! is reported as an error rather than silently dropped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::term::TermId;

use super::{AncestorStore, SaturationInput, SaturationState};

const FORMAT: &str = "closure-cache 1";

/// Digest of everything the closure depends on. Axiom order does not
/// matter; signature, role declarations, and the axiom set do.
pub fn input_key(input: &SaturationInput) -> String {
    let mut h = Sha256::new();
    h.update(FORMAT.as_bytes());
    h.update(b"\nclasses\n");
    for id in &input.classes {
        h.update(id.as_str().as_bytes());
        h.update(b"\n");
    }
    h.update(b"roles\n");
    for (id, info) in &input.roles {
        h.update(id.as_str().as_bytes());
        h.update(if info.transitive { b"\t+\n" } else { b"\t-\n" });
        for sup in &info.supers {
            h.update(b"\t");
            h.update(sup.as_str().as_bytes());
            h.update(b"\n");
        }
    }
    h.update(b"axioms\n");
    let mut rendered: Vec<String> = input.axioms.iter().map(|a| a.render()).collect();
    rendered.sort_unstable();
    rendered.dedup();
    for line in rendered {
        h.update(line.as_bytes());
        h.update(b"\n");
    }
    let mut out = String::with_capacity(64);
    for byte in h.finalize() {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

pub fn write_cache(path: &Path, state: &SaturationState, key: &str) -> Result<()> {
    let store = state.store();
    let ids = store.intern_table();
    let mut pairs = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for &a in store.set_of(i as u32) {
            pairs.push((id, &ids[a as usize]));
        }
    }
    let unsat: Vec<&TermId> = ids
        .iter()
        .filter(|id| store.is_unsatisfiable(id))
        .collect();

    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT}");
    let _ = writeln!(out, "key {key}");
    let _ = writeln!(out, "ancestors {}", pairs.len());
    for (sub, sup) in pairs {
        let _ = writeln!(out, "{sub}\t{sup}");
    }
    let _ = writeln!(out, "links {}", state.links.len());
    for &(s, r, t) in &state.links {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            ids[s as usize], state.roles[r as usize], ids[t as usize]
        );
    }
    let _ = writeln!(out, "unsat {}", unsat.len());
    for id in unsat {
        let _ = writeln!(out, "{id}");
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing cache {}", path.display()), e))
}

struct Reader<'a> {
    path: &'a Path,
    ids: Vec<TermId>,
    index: HashMap<TermId, u32>,
    roles: Vec<TermId>,
    role_index: HashMap<TermId, u32>,
}

impl Reader<'_> {
    fn bad(&self, reason: impl Into<String>) -> Error {
        Error::BadCache {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn term(&self, text: &str) -> Result<TermId> {
        TermId::parse(text).map_err(|_| self.bad(format!("malformed id {text:?}")))
    }

    fn class(&mut self, text: &str) -> Result<u32> {
        let id = self.term(text)?;
        if let Some(&i) = self.index.get(&id) {
            return Ok(i);
        }
        let i = self.ids.len() as u32;
        self.index.insert(id.clone(), i);
        self.ids.push(id);
        Ok(i)
    }

    fn role(&mut self, text: &str) -> Result<u32> {
        let id = self.term(text)?;
        if let Some(&i) = self.role_index.get(&id) {
            return Ok(i);
        }
        let i = self.roles.len() as u32;
        self.role_index.insert(id.clone(), i);
        self.roles.push(id);
        Ok(i)
    }

    fn count<'l>(&self, line: Option<&'l str>, section: &str) -> Result<usize> {
        let line = line.ok_or_else(|| self.bad(format!("missing {section} section")))?;
        let rest = line
            .strip_prefix(section)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.bad(format!("expected {section} section, found {line:?}")))?;
        rest.parse()
            .map_err(|_| self.bad(format!("bad {section} count {rest:?}")))
    }
}

/// Loads a cached closure if `path` holds one for `expected_key`. A missing
/// file, an unknown format version, or a different key yields `Ok(None)`.
pub fn read_cache(path: &Path, expected_key: &str) -> Result<Option<SaturationState>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(format!("reading cache {}", path.display()), e)),
    };
    let mut r = Reader {
        path,
        ids: Vec::new(),
        index: HashMap::new(),
        roles: Vec::new(),
        role_index: HashMap::new(),
    };
    let mut lines = text.lines();
    if lines.next() != Some(FORMAT) {
        return Ok(None);
    }
    match lines.next().and_then(|l| l.strip_prefix("key ")) {
        Some(key) if key == expected_key => {}
        Some(_) => return Ok(None),
        None => return Err(r.bad("missing key line")),
    }

    let n = r.count(lines.next(), "ancestors")?;
    let mut raw_pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| r.bad("truncated ancestors"))?;
        let (sub, sup) = line
            .split_once('\t')
            .ok_or_else(|| r.bad(format!("bad ancestor pair {line:?}")))?;
        raw_pairs.push((r.class(sub)?, r.class(sup)?));
    }

    let n = r.count(lines.next(), "links")?;
    let mut links = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| r.bad("truncated links"))?;
        let mut parts = line.splitn(3, '\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(role), Some(t)) => {
                links.push((r.class(s)?, r.role(role)?, r.class(t)?));
            }
            _ => return Err(r.bad(format!("bad link {line:?}"))),
        }
    }

    let n = r.count(lines.next(), "unsat")?;
    let mut unsat_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| r.bad("truncated unsat"))?;
        unsat_ids.push(r.class(line)?);
    }
    if let Some(extra) = lines.next() {
        return Err(r.bad(format!("trailing data {extra:?}")));
    }

    let mut sets = vec![Vec::new(); r.ids.len()];
    for (sub, sup) in raw_pairs {
        sets[sub as usize].push(sup);
    }
    for set in &mut sets {
        set.sort_unstable();
        set.dedup();
    }
    let mut unsat = vec![false; r.ids.len()];
    for i in unsat_ids {
        unsat[i as usize] = true;
    }
    links.sort_unstable();

    Ok(Some(SaturationState {
        store: AncestorStore::from_parts(r.ids, sets, unsat),
        roles: r.roles,
        links,
    }))
}
