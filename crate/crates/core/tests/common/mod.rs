//! Shared pieces of the acceptance suite: a naive fixpoint oracle with the
//! same rule semantics as the saturation engine, and a seeded generator of
//! random reasoner inputs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use eqtk_core::reasoner::{NormalizedAxiom, RoleInfo, SaturationInput, SaturationState};
use eqtk_core::TermId;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Ancestor set per class, plus the unsatisfiable classes.
pub type ClosureTables = (BTreeMap<TermId, BTreeSet<TermId>>, BTreeSet<TermId>);

pub fn engine_tables(state: &SaturationState) -> ClosureTables {
    let store = state.store();
    let ancestors = store
        .classes()
        .map(|c| {
            let set = store.ancestors(c).expect("interned class").cloned().collect();
            (c.clone(), set)
        })
        .collect();
    (ancestors, store.unsatisfiable())
}

/// Reflexive-transitive super-role closure for every role the input
/// mentions, from the declared direct supers.
fn role_closure(input: &SaturationInput) -> HashMap<TermId, Vec<TermId>> {
    let mut ids: BTreeSet<TermId> = input.roles.keys().cloned().collect();
    for info in input.roles.values() {
        ids.extend(info.supers.iter().cloned());
    }
    for axiom in &input.axioms {
        match axiom {
            NormalizedAxiom::SubExists { property, .. }
            | NormalizedAxiom::ExistsSub { property, .. } => {
                ids.insert(property.clone());
            }
            _ => {}
        }
    }
    let mut closure = HashMap::new();
    for role in &ids {
        let mut seen = BTreeSet::new();
        let mut stack = vec![role.clone()];
        while let Some(r) = stack.pop() {
            if seen.insert(r.clone()) {
                if let Some(info) = input.roles.get(&r) {
                    stack.extend(info.supers.iter().cloned());
                }
            }
        }
        closure.insert(role.clone(), seen.into_iter().collect());
    }
    closure
}

/// Applies the saturation rules naively until nothing changes: no worklist,
/// no axiom indexes, every sweep rescans all facts against all axioms. Role
/// hierarchy is handled the same way the engine handles it, by materializing
/// each link under the role and all its supers.
pub fn naive_closure(input: &SaturationInput) -> ClosureTables {
    // The same universe the engine interns: the signature plus every class
    // position in the axioms.
    let mut classes: BTreeSet<TermId> = input.classes.clone();
    for axiom in &input.axioms {
        match axiom {
            NormalizedAxiom::SubNamed { sub, sup } => {
                classes.insert(sub.clone());
                classes.insert(sup.clone());
            }
            NormalizedAxiom::SubConj { left, right, sup } => {
                classes.insert(left.clone());
                classes.insert(right.clone());
                classes.insert(sup.clone());
            }
            NormalizedAxiom::SubExists { sub, filler, .. } => {
                classes.insert(sub.clone());
                classes.insert(filler.clone());
            }
            NormalizedAxiom::ExistsSub { filler, sup, .. } => {
                classes.insert(filler.clone());
                classes.insert(sup.clone());
            }
            NormalizedAxiom::SubBottom { left, right } => {
                classes.insert(left.clone());
                classes.insert(right.clone());
            }
        }
    }

    let supers = role_closure(input);
    let transitive =
        |r: &TermId| input.roles.get(r).map(|info| info.transitive).unwrap_or(false);

    let mut subs: BTreeSet<(TermId, TermId)> =
        classes.iter().map(|c| (c.clone(), c.clone())).collect();
    let mut links: BTreeSet<(TermId, TermId, TermId)> = BTreeSet::new();
    let mut unsat: BTreeSet<TermId> = BTreeSet::new();

    let mut changed = true;
    while changed {
        changed = false;
        let sub_list: Vec<(TermId, TermId)> = subs.iter().cloned().collect();
        let link_list: Vec<(TermId, TermId, TermId)> = links.iter().cloned().collect();
        let mut by_source: HashMap<(&TermId, &TermId), Vec<&TermId>> = HashMap::new();
        for (x, r, y) in &link_list {
            by_source.entry((r, x)).or_default().push(y);
        }

        for axiom in &input.axioms {
            match axiom {
                NormalizedAxiom::SubNamed { sub, sup } => {
                    for (x, a) in &sub_list {
                        if a == sub {
                            changed |= subs.insert((x.clone(), sup.clone()));
                        }
                    }
                }
                NormalizedAxiom::SubConj { left, right, sup } => {
                    for (x, a) in &sub_list {
                        if a == left && subs.contains(&(x.clone(), right.clone())) {
                            changed |= subs.insert((x.clone(), sup.clone()));
                        }
                    }
                }
                NormalizedAxiom::SubExists {
                    sub,
                    property,
                    filler,
                } => {
                    for (x, a) in &sub_list {
                        if a == sub {
                            for s in &supers[property] {
                                changed |= links.insert((x.clone(), s.clone(), filler.clone()));
                            }
                        }
                    }
                }
                NormalizedAxiom::ExistsSub {
                    property,
                    filler,
                    sup,
                } => {
                    for (x, r, b) in &link_list {
                        if r == property && subs.contains(&(b.clone(), filler.clone())) {
                            changed |= subs.insert((x.clone(), sup.clone()));
                        }
                    }
                }
                NormalizedAxiom::SubBottom { left, right } => {
                    for (x, a) in &sub_list {
                        if a == left && subs.contains(&(x.clone(), right.clone())) {
                            changed |= unsat.insert(x.clone());
                        }
                    }
                }
            }
        }

        // Transitive composition, lifted to super-roles like link creation.
        for (x, r, y) in &link_list {
            if transitive(r) {
                if let Some(zs) = by_source.get(&(r, y)) {
                    for z in zs {
                        for s in &supers[r] {
                            changed |= links.insert((x.clone(), s.clone(), (*z).clone()));
                        }
                    }
                }
            }
        }

        // A link into an unsatisfiable class makes the subject unsatisfiable.
        for (x, _, b) in &link_list {
            if unsat.contains(b) {
                changed |= unsat.insert(x.clone());
            }
        }
    }

    let ancestors = classes
        .iter()
        .map(|c| {
            let set = subs
                .iter()
                .filter(|(x, _)| x == c)
                .map(|(_, a)| a.clone())
                .collect();
            (c.clone(), set)
        })
        .collect();
    (ancestors, unsat)
}

/// Random reasoner input: up to 60 classes, up to 4 roles with an acyclic
/// hierarchy and independent transitivity flags, and up to 200 axioms drawn
/// with fixed kind weights.
pub fn random_input(rng: &mut ChaCha8Rng) -> SaturationInput {
    let n_classes = rng.gen_range(2..=60);
    let class_pool: Vec<TermId> = (0..n_classes)
        .map(|i| TermId::parse(&format!("C:{i}")).unwrap())
        .collect();
    let n_roles = rng.gen_range(0..=4usize);
    let role_pool: Vec<TermId> = (0..n_roles)
        .map(|i| TermId::parse(&format!("R:{i}")).unwrap())
        .collect();

    let mut roles = BTreeMap::new();
    for (i, role) in role_pool.iter().enumerate() {
        let mut info = RoleInfo {
            transitive: rng.gen_bool(0.4),
            supers: BTreeSet::new(),
        };
        // Supers point at lower indexes only, keeping the hierarchy acyclic.
        for sup in &role_pool[..i] {
            if rng.gen_bool(0.3) {
                info.supers.insert(sup.clone());
            }
        }
        roles.insert(role.clone(), info);
    }

    let class = |rng: &mut ChaCha8Rng| class_pool[rng.gen_range(0..n_classes)].clone();
    let role = |rng: &mut ChaCha8Rng| role_pool[rng.gen_range(0..n_roles)].clone();

    let n_axioms = rng.gen_range(0..=200);
    let mut axioms = Vec::with_capacity(n_axioms);
    for _ in 0..n_axioms {
        let kind = rng.gen_range(0..100u32);
        let axiom = if role_pool.is_empty() {
            match kind % 70 {
                0..=39 => NormalizedAxiom::SubNamed {
                    sub: class(rng),
                    sup: class(rng),
                },
                40..=59 => NormalizedAxiom::SubConj {
                    left: class(rng),
                    right: class(rng),
                    sup: class(rng),
                },
                _ => NormalizedAxiom::bottom(class(rng), class(rng)),
            }
        } else {
            match kind {
                0..=39 => NormalizedAxiom::SubNamed {
                    sub: class(rng),
                    sup: class(rng),
                },
                40..=59 => NormalizedAxiom::SubConj {
                    left: class(rng),
                    right: class(rng),
                    sup: class(rng),
                },
                60..=74 => NormalizedAxiom::SubExists {
                    sub: class(rng),
                    property: role(rng),
                    filler: class(rng),
                },
                75..=89 => NormalizedAxiom::ExistsSub {
                    property: role(rng),
                    filler: class(rng),
                    sup: class(rng),
                },
                _ => NormalizedAxiom::bottom(class(rng), class(rng)),
            }
        };
        axioms.push(axiom);
    }

    SaturationInput {
        classes: class_pool.into_iter().collect(),
        roles,
        axioms,
    }
}
