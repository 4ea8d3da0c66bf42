//! Worklist saturation over the normalized axiom forms.
//!
//! Derived facts come in two kinds: named subsumptions `sub ⊑ sup` and role
//! links `sub ⊑ ∃role.filler`. Every fact is recorded exactly once and then
//! queued, so each rule instance fires once and the closure is reached
//! without rescanning. Role hierarchy is handled at link creation: a link is
//! stored under its role and every super-role, and rules afterwards match
//! roles exactly.

use std::collections::{HashMap, HashSet};

use crate::term::TermId;

use super::{AncestorStore, NormalizedAxiom, SaturationInput, SaturationState};

#[derive(Debug, Default)]
struct Interner {
    ids: Vec<TermId>,
    index: HashMap<TermId, u32>,
}

impl Interner {
    fn intern(&mut self, id: &TermId) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(id.clone());
        self.index.insert(id.clone(), i);
        i
    }

    fn get(&self, id: &TermId) -> Option<u32> {
        self.index.get(id).copied()
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Debug, Clone, Copy)]
enum Item {
    Sub { sub: u32, sup: u32 },
    Link { sub: u32, role: u32, filler: u32 },
}

/// Axiom indexes and role tables, immutable once built.
struct Indexes {
    /// Reflexive-transitive super-role closure, per role.
    role_supers: Vec<Vec<u32>>,
    transitive: Vec<bool>,
    /// `A ⊑ B`, keyed by A.
    sub_named: Vec<Vec<u32>>,
    /// `A ⊓ B ⊑ C` as (B, C), keyed by A.
    conj_left: Vec<Vec<(u32, u32)>>,
    /// `A ⊓ B ⊑ C` as (A, C), keyed by B.
    conj_right: Vec<Vec<(u32, u32)>>,
    /// `A ⊑ ∃r.B` as (r, B), keyed by A.
    exists_by_sub: Vec<Vec<(u32, u32)>>,
    /// `∃r.A ⊑ B` as (r, B), keyed by A.
    existssub_by_filler: Vec<Vec<(u32, u32)>>,
    /// `A ⊓ B ⊑ ⊥`, keyed by either side, holding the other.
    bottom_pairs: Vec<Vec<u32>>,
}

/// Mutable saturation state.
struct Derived {
    subsumers: Vec<HashSet<u32>>,
    /// Outgoing links per subject: role to fillers.
    links_out: Vec<HashMap<u32, HashSet<u32>>>,
    /// Incoming links per filler, as (role, subject).
    links_in: Vec<Vec<(u32, u32)>>,
    unsat: Vec<bool>,
    queue: Vec<Item>,
}

impl Derived {
    fn push_sub(&mut self, sub: u32, sup: u32) {
        if self.subsumers[sub as usize].insert(sup) {
            self.queue.push(Item::Sub { sub, sup });
        }
    }

    fn push_link(&mut self, idx: &Indexes, sub: u32, role: u32, filler: u32) {
        for &s in &idx.role_supers[role as usize] {
            if self.links_out[sub as usize]
                .entry(s)
                .or_default()
                .insert(filler)
            {
                self.links_in[filler as usize].push((s, sub));
                self.queue.push(Item::Link {
                    sub,
                    role: s,
                    filler,
                });
            }
        }
    }

    /// Unsatisfiability spreads backwards over links: a subject required to
    /// point into an empty class is itself empty.
    fn mark_unsat(&mut self, x: u32) {
        let mut stack = vec![x];
        while let Some(y) = stack.pop() {
            if self.unsat[y as usize] {
                continue;
            }
            self.unsat[y as usize] = true;
            for &(_, subject) in &self.links_in[y as usize] {
                stack.push(subject);
            }
        }
    }

    fn fire_sub(&mut self, idx: &Indexes, x: u32, a: u32) {
        for &sup in &idx.sub_named[a as usize] {
            self.push_sub(x, sup);
        }
        for &(other, sup) in &idx.conj_left[a as usize] {
            if self.subsumers[x as usize].contains(&other) {
                self.push_sub(x, sup);
            }
        }
        for &(other, sup) in &idx.conj_right[a as usize] {
            if self.subsumers[x as usize].contains(&other) {
                self.push_sub(x, sup);
            }
        }
        for &(role, filler) in &idx.exists_by_sub[a as usize] {
            self.push_link(idx, x, role, filler);
        }
        if !idx.existssub_by_filler[a as usize].is_empty() {
            let incoming = self.links_in[x as usize].clone();
            for &(role, sup) in &idx.existssub_by_filler[a as usize] {
                for &(r2, subject) in &incoming {
                    if r2 == role {
                        self.push_sub(subject, sup);
                    }
                }
            }
        }
        for &other in &idx.bottom_pairs[a as usize] {
            if self.subsumers[x as usize].contains(&other) {
                self.mark_unsat(x);
            }
        }
    }

    fn fire_link(&mut self, idx: &Indexes, x: u32, r: u32, b: u32) {
        if self.unsat[b as usize] {
            self.mark_unsat(x);
        }
        let subs_of_b: Vec<u32> = self.subsumers[b as usize].iter().copied().collect();
        for c in subs_of_b {
            for &(role, sup) in &idx.existssub_by_filler[c as usize] {
                if role == r {
                    self.push_sub(x, sup);
                }
            }
        }
        if idx.transitive[r as usize] {
            if let Some(set) = self.links_out[b as usize].get(&r) {
                let outs: Vec<u32> = set.iter().copied().collect();
                for z in outs {
                    self.push_link(idx, x, r, z);
                }
            }
            let ins = self.links_in[x as usize].clone();
            for (r2, w) in ins {
                if r2 == r {
                    self.push_link(idx, w, r, b);
                }
            }
        }
    }
}

struct Engine {
    classes: Interner,
    roles: Interner,
    idx: Indexes,
    st: Derived,
}

impl Engine {
    /// Interns everything in `inputs` (plus carried-over signature from a
    /// previous state) and builds the axiom indexes. Derived state starts
    /// empty.
    fn build(
        inputs: &[&SaturationInput],
        extra_classes: &[TermId],
        extra_roles: &[TermId],
    ) -> Engine {
        let mut classes = Interner::default();
        let mut roles = Interner::default();

        for input in inputs {
            for (id, info) in &input.roles {
                roles.intern(id);
                for sup in &info.supers {
                    roles.intern(sup);
                }
            }
            for axiom in &input.axioms {
                match axiom {
                    NormalizedAxiom::SubExists { property, .. }
                    | NormalizedAxiom::ExistsSub { property, .. } => {
                        roles.intern(property);
                    }
                    _ => {}
                }
            }
        }
        for id in extra_roles {
            roles.intern(id);
        }

        let nr = roles.len();
        let mut transitive = vec![false; nr];
        let mut direct: Vec<Vec<u32>> = vec![Vec::new(); nr];
        for input in inputs {
            for (id, info) in &input.roles {
                let r = roles.get(id).expect("role interned") as usize;
                transitive[r] |= info.transitive;
                for sup in &info.supers {
                    let s = roles.get(sup).expect("role interned");
                    if !direct[r].contains(&s) {
                        direct[r].push(s);
                    }
                }
            }
        }
        let mut role_supers = Vec::with_capacity(nr);
        for r in 0..nr {
            let mut seen = vec![false; nr];
            let mut stack = vec![r as u32];
            let mut out = Vec::new();
            while let Some(s) = stack.pop() {
                if seen[s as usize] {
                    continue;
                }
                seen[s as usize] = true;
                out.push(s);
                stack.extend_from_slice(&direct[s as usize]);
            }
            out.sort_unstable();
            role_supers.push(out);
        }

        for input in inputs {
            for id in &input.classes {
                classes.intern(id);
            }
            for axiom in &input.axioms {
                match axiom {
                    NormalizedAxiom::SubNamed { sub, sup } => {
                        classes.intern(sub);
                        classes.intern(sup);
                    }
                    NormalizedAxiom::SubConj { left, right, sup } => {
                        classes.intern(left);
                        classes.intern(right);
                        classes.intern(sup);
                    }
                    NormalizedAxiom::SubExists { sub, filler, .. } => {
                        classes.intern(sub);
                        classes.intern(filler);
                    }
                    NormalizedAxiom::ExistsSub { filler, sup, .. } => {
                        classes.intern(filler);
                        classes.intern(sup);
                    }
                    NormalizedAxiom::SubBottom { left, right } => {
                        classes.intern(left);
                        classes.intern(right);
                    }
                }
            }
        }
        for id in extra_classes {
            classes.intern(id);
        }

        let nc = classes.len();
        let mut idx = Indexes {
            role_supers,
            transitive,
            sub_named: vec![Vec::new(); nc],
            conj_left: vec![Vec::new(); nc],
            conj_right: vec![Vec::new(); nc],
            exists_by_sub: vec![Vec::new(); nc],
            existssub_by_filler: vec![Vec::new(); nc],
            bottom_pairs: vec![Vec::new(); nc],
        };
        {
            let c = |id: &TermId| classes.get(id).expect("class interned") as usize;
            let r = |id: &TermId| roles.get(id).expect("role interned");
            for input in inputs {
                for axiom in &input.axioms {
                    match axiom {
                        NormalizedAxiom::SubNamed { sub, sup } => {
                            idx.sub_named[c(sub)].push(c(sup) as u32);
                        }
                        NormalizedAxiom::SubConj { left, right, sup } => {
                            let (l, rt, s) = (c(left) as u32, c(right) as u32, c(sup) as u32);
                            idx.conj_left[l as usize].push((rt, s));
                            idx.conj_right[rt as usize].push((l, s));
                        }
                        NormalizedAxiom::SubExists {
                            sub,
                            property,
                            filler,
                        } => {
                            idx.exists_by_sub[c(sub)].push((r(property), c(filler) as u32));
                        }
                        NormalizedAxiom::ExistsSub {
                            property,
                            filler,
                            sup,
                        } => {
                            idx.existssub_by_filler[c(filler)]
                                .push((r(property), c(sup) as u32));
                        }
                        NormalizedAxiom::SubBottom { left, right } => {
                            let (l, rt) = (c(left), c(right) as u32);
                            idx.bottom_pairs[l].push(rt);
                            idx.bottom_pairs[rt as usize].push(l as u32);
                        }
                    }
                }
            }
        }

        Engine {
            classes,
            roles,
            idx,
            st: Derived {
                subsumers: vec![HashSet::new(); nc],
                links_out: vec![HashMap::new(); nc],
                links_in: vec![Vec::new(); nc],
                unsat: vec![false; nc],
                queue: Vec::new(),
            },
        }
    }

    fn run(&mut self) {
        let Engine { idx, st, .. } = self;
        while let Some(item) = st.queue.pop() {
            match item {
                Item::Sub { sub, sup } => st.fire_sub(idx, sub, sup),
                Item::Link { sub, role, filler } => st.fire_link(idx, sub, role, filler),
            }
        }
    }

    fn into_state(self) -> SaturationState {
        let nc = self.classes.len();
        let mut sets = Vec::with_capacity(nc);
        for i in 0..nc {
            let mut set: Vec<u32> = self.st.subsumers[i].iter().copied().collect();
            set.sort_unstable();
            sets.push(set);
        }
        let store = AncestorStore::from_parts(self.classes.ids, sets, self.st.unsat);
        let mut links = Vec::new();
        for (s, by_role) in self.st.links_out.iter().enumerate() {
            for (&role, fillers) in by_role {
                for &t in fillers {
                    links.push((s as u32, role, t));
                }
            }
        }
        links.sort_unstable();
        SaturationState {
            store,
            roles: self.roles.ids,
            links,
        }
    }
}

/// Computes the full closure of `input` from scratch.
pub fn saturate(input: &SaturationInput) -> SaturationState {
    let mut engine = Engine::build(&[input], &[], &[]);
    for i in 0..engine.classes.len() as u32 {
        engine.st.push_sub(i, i);
    }
    engine.run();
    engine.into_state()
}

/// Extends a closure computed from `base` with the axioms and classes of
/// `delta`, without re-deriving what `state` already holds. Equivalent to
/// `saturate` over the combined input.
pub fn resume(
    state: &SaturationState,
    base: &SaturationInput,
    delta: &SaturationInput,
) -> SaturationState {
    let mut engine = Engine::build(&[base, delta], state.store.intern_table(), &state.roles);
    let cmap: Vec<u32> = state
        .store
        .intern_table()
        .iter()
        .map(|id| engine.classes.get(id).expect("carried class interned"))
        .collect();
    let rmap: Vec<u32> = state
        .roles
        .iter()
        .map(|id| engine.roles.get(id).expect("carried role interned"))
        .collect();

    // Preload the old closure without queueing: it is already mutually
    // saturated under the base axioms.
    for old in 0..cmap.len() {
        let new_sub = cmap[old] as usize;
        for &a in state.store.set_of(old as u32) {
            engine.st.subsumers[new_sub].insert(cmap[a as usize]);
        }
    }
    for (old, id) in state.store.intern_table().iter().enumerate() {
        if state.store.is_unsatisfiable(id) {
            engine.st.unsat[cmap[old] as usize] = true;
        }
    }
    for &(s, r, t) in &state.links {
        let (s, r, t) = (cmap[s as usize], rmap[r as usize], cmap[t as usize]);
        if engine.st.links_out[s as usize].entry(r).or_default().insert(t) {
            engine.st.links_in[t as usize].push((r, s));
        }
    }

    // Reflexivity for classes the old closure never saw.
    let preloaded: HashSet<u32> = cmap.iter().copied().collect();
    for i in 0..engine.classes.len() as u32 {
        if !preloaded.contains(&i) {
            engine.st.push_sub(i, i);
        }
    }

    // Replay the added axioms against preloaded facts. Rule instances with
    // at least one new trigger fact fire through the queue as usual; only
    // all-old instances need this pass.
    let mut subs_by_sup: HashMap<u32, Vec<u32>> = HashMap::new();
    for (x, subs) in engine.st.subsumers.iter().enumerate() {
        for &a in subs {
            subs_by_sup.entry(a).or_default().push(x as u32);
        }
    }
    let empty = Vec::new();
    let c = |id: &TermId| engine.classes.get(id).expect("delta class interned");
    let r = |id: &TermId| engine.roles.get(id).expect("delta role interned");
    for axiom in &delta.axioms {
        match axiom {
            NormalizedAxiom::SubNamed { sub, sup } => {
                let (a, b) = (c(sub), c(sup));
                for &x in subs_by_sup.get(&a).unwrap_or(&empty) {
                    engine.st.push_sub(x, b);
                }
            }
            NormalizedAxiom::SubConj { left, right, sup } => {
                let (a1, a2, b) = (c(left), c(right), c(sup));
                for &x in subs_by_sup.get(&a1).unwrap_or(&empty) {
                    if engine.st.subsumers[x as usize].contains(&a2) {
                        engine.st.push_sub(x, b);
                    }
                }
            }
            NormalizedAxiom::SubExists {
                sub,
                property,
                filler,
            } => {
                let (a, role, b) = (c(sub), r(property), c(filler));
                for &x in subs_by_sup.get(&a).unwrap_or(&empty) {
                    engine.st.push_link(&engine.idx, x, role, b);
                }
            }
            NormalizedAxiom::ExistsSub {
                property,
                filler,
                sup,
            } => {
                let (role, a, b) = (r(property), c(filler), c(sup));
                for &y in subs_by_sup.get(&a).unwrap_or(&empty) {
                    let ins = engine.st.links_in[y as usize].clone();
                    for (r2, x) in ins {
                        if r2 == role {
                            engine.st.push_sub(x, b);
                        }
                    }
                }
            }
            NormalizedAxiom::SubBottom { left, right } => {
                let (a, b) = (c(left), c(right));
                for &x in subs_by_sup.get(&a).unwrap_or(&empty) {
                    if engine.st.subsumers[x as usize].contains(&b) {
                        engine.st.mark_unsat(x);
                    }
                }
            }
        }
    }

    engine.run();
    engine.into_state()
}
