//! EL subsumption reasoning: normalization to five axiom forms, worklist
//! saturation, and queries over the resulting ancestor closure.
//!
//! The supported fragment is named classes, existential restrictions, and
//! intersections, with property hierarchy and transitivity. Complex
//! subexpressions are materialized under fresh ids with the `EXP` prefix;
//! ancestor queries hide those helpers again.

mod cache;
mod engine;
mod normalize;

pub use cache::{input_key, read_cache, write_cache};
pub use engine::{resume, saturate};
pub use normalize::{normalize, normalize_with_expressions, register_expressions, Normalization};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::manchester::ClassExpression;
use crate::obo::Ontology;
use crate::term::TermId;

/// Prefix of generated ids for materialized expressions. Ontologies must
/// not declare ids under it.
pub const EXPRESSION_PREFIX: &str = "EXP";

/// An axiom in one of the five normalized forms. All arguments are named
/// classes or properties.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormalizedAxiom {
    /// `sub ⊑ sup`
    SubNamed { sub: TermId, sup: TermId },
    /// `left ⊓ right ⊑ sup`
    SubConj {
        left: TermId,
        right: TermId,
        sup: TermId,
    },
    /// `sub ⊑ ∃property.filler`
    SubExists {
        sub: TermId,
        property: TermId,
        filler: TermId,
    },
    /// `∃property.filler ⊑ sup`
    ExistsSub {
        property: TermId,
        filler: TermId,
        sup: TermId,
    },
    /// `left ⊓ right ⊑ ⊥`; operands are kept sorted.
    SubBottom { left: TermId, right: TermId },
}

impl NormalizedAxiom {
    pub fn bottom(a: TermId, b: TermId) -> NormalizedAxiom {
        let (left, right) = if a <= b { (a, b) } else { (b, a) };
        NormalizedAxiom::SubBottom { left, right }
    }

    /// Stable one-line rendering, used for cache keys.
    pub fn render(&self) -> String {
        match self {
            NormalizedAxiom::SubNamed { sub, sup } => format!("sub\t{sub}\t{sup}"),
            NormalizedAxiom::SubConj { left, right, sup } => {
                format!("conj\t{left}\t{right}\t{sup}")
            }
            NormalizedAxiom::SubExists {
                sub,
                property,
                filler,
            } => format!("subex\t{sub}\t{property}\t{filler}"),
            NormalizedAxiom::ExistsSub {
                property,
                filler,
                sup,
            } => format!("exsub\t{property}\t{filler}\t{sup}"),
            NormalizedAxiom::SubBottom { left, right } => format!("bottom\t{left}\t{right}"),
        }
    }
}

/// What is known about one property when saturating.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoleInfo {
    pub transitive: bool,
    /// Direct super-properties; the closure is taken inside the engine.
    pub supers: BTreeSet<TermId>,
}

/// Everything the saturation engine consumes.
#[derive(Debug, Clone, Default)]
pub struct SaturationInput {
    /// Classes that must appear in the closure even without axioms.
    pub classes: BTreeSet<TermId>,
    pub roles: BTreeMap<TermId, RoleInfo>,
    pub axioms: Vec<NormalizedAxiom>,
}

/// Assigns `EXP:*` ids to canonical complex expressions, densely in
/// registration order.
#[derive(Debug, Clone, Default)]
pub struct ExpressionRegistry {
    by_expr: HashMap<ClassExpression, TermId>,
    next: u32,
}

impl ExpressionRegistry {
    pub fn len(&self) -> usize {
        self.by_expr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_expr.is_empty()
    }

    /// The materialized id for a canonical expression, if registered.
    pub fn id_of(&self, expr: &ClassExpression) -> Option<&TermId> {
        self.by_expr.get(expr)
    }

    /// Registers a canonical complex expression; returns its id and whether
    /// it was new.
    fn intern(&mut self, expr: &ClassExpression) -> (TermId, bool) {
        debug_assert!(!expr.is_named(), "named expressions are never interned");
        if let Some(id) = self.by_expr.get(expr) {
            return (id.clone(), false);
        }
        self.next += 1;
        let id = TermId::new(EXPRESSION_PREFIX, &format!("{:07}", self.next))
            .expect("generated ids are valid");
        self.by_expr.insert(expr.clone(), id.clone());
        (id, true)
    }
}

/// The saturated ancestor relation: for every class (named or
/// materialized), the set of classes it is subsumed by, reflexively and
/// transitively, plus the set of unsatisfiable classes. Immutable.
#[derive(Debug, Clone)]
pub struct AncestorStore {
    ids: Vec<TermId>,
    index: HashMap<TermId, u32>,
    /// Ancestor sets as sorted intern indexes, parallel to `ids`.
    sets: Vec<Vec<u32>>,
    unsat: Vec<bool>,
}

impl AncestorStore {
    pub(crate) fn from_parts(
        ids: Vec<TermId>,
        sets: Vec<Vec<u32>>,
        unsat: Vec<bool>,
    ) -> AncestorStore {
        let index = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        AncestorStore {
            ids,
            index,
            sets,
            unsat,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &TermId) -> bool {
        self.index.contains_key(id)
    }

    /// All classes in the closure, in intern order.
    pub fn classes(&self) -> impl Iterator<Item = &TermId> {
        self.ids.iter()
    }

    /// Raw ancestors of `id`, materialized helpers included.
    pub fn ancestors(&self, id: &TermId) -> Option<impl Iterator<Item = &TermId> + '_> {
        let i = *self.index.get(id)?;
        Some(self.sets[i as usize].iter().map(|&j| &self.ids[j as usize]))
    }

    pub fn is_unsatisfiable(&self, id: &TermId) -> bool {
        self.index
            .get(id)
            .map(|&i| self.unsat[i as usize])
            .unwrap_or(false)
    }

    /// Every unsatisfiable class, materialized helpers included.
    pub fn unsatisfiable(&self) -> BTreeSet<TermId> {
        self.ids
            .iter()
            .zip(&self.unsat)
            .filter(|(_, &u)| u)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub(crate) fn intern_table(&self) -> &[TermId] {
        &self.ids
    }

    pub(crate) fn set_of(&self, i: u32) -> &[u32] {
        &self.sets[i as usize]
    }
}

/// Saturation result that can seed a later [`resume`]: the ancestor store
/// plus the derived role links.
#[derive(Debug, Clone)]
pub struct SaturationState {
    pub(crate) store: AncestorStore,
    /// Role intern table for `links`.
    pub(crate) roles: Vec<TermId>,
    /// Derived links as (subject, role, target) intern triples.
    pub(crate) links: Vec<(u32, u32, u32)>,
}

impl SaturationState {
    pub fn store(&self) -> &AncestorStore {
        &self.store
    }

    pub fn into_store(self) -> AncestorStore {
        self.store
    }
}

/// Ancestors of an expression with materialization helpers hidden: every
/// `EXP:*` id is dropped except the expression's own. Atomic expressions
/// must name a class in the closure; complex ones must have been registered
/// when the closure was built.
pub fn ancestors_of(
    store: &AncestorStore,
    expr: &ClassExpression,
    registry: &ExpressionRegistry,
) -> Result<BTreeSet<TermId>> {
    let unregistered = || Error::UnregisteredExpression {
        text: expr.to_string(),
    };
    let own: &TermId = match expr {
        ClassExpression::Named(id) => id,
        _ => registry.id_of(expr).ok_or_else(unregistered)?,
    };
    let ancestors = store.ancestors(own).ok_or_else(unregistered)?;
    Ok(ancestors
        .filter(|id| id.prefix() != EXPRESSION_PREFIX || *id == own)
        .cloned()
        .collect())
}

/// Normalizes and saturates `ont` with its disjointness axioms intact and
/// reports the unsatisfiable named classes, sorted. Materialization helpers
/// are excluded: an unsatisfiable helper always drags a named class along
/// or is unreachable.
pub fn check_unsat(ont: &Ontology) -> Result<BTreeSet<TermId>> {
    let norm = normalize(ont)?;
    let state = saturate(&norm.input);
    Ok(state
        .store()
        .unsatisfiable()
        .into_iter()
        .filter(|id| id.prefix() != EXPRESSION_PREFIX)
        .collect())
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::obo::{Ontology, OntologyClass, PropertyInfo};

    fn tid(s: &str) -> TermId {
        TermId::parse(s).unwrap()
    }

    fn named(id: &str) -> ClassExpression {
        ClassExpression::named(tid(id))
    }

    fn some(prop: &str, filler: ClassExpression) -> ClassExpression {
        ClassExpression::some(tid(prop), filler)
    }

    fn ancestor_map(state: &SaturationState) -> BTreeMap<TermId, BTreeSet<TermId>> {
        let store = state.store();
        store
            .classes()
            .map(|id| {
                let set = store.ancestors(id).unwrap().cloned().collect();
                (id.clone(), set)
            })
            .collect()
    }

    fn link_set(state: &SaturationState) -> BTreeSet<(TermId, TermId, TermId)> {
        let ids = state.store.intern_table();
        state
            .links
            .iter()
            .map(|&(s, r, t)| {
                (
                    ids[s as usize].clone(),
                    state.roles[r as usize].clone(),
                    ids[t as usize].clone(),
                )
            })
            .collect()
    }

    fn set(ids: &[&str]) -> BTreeSet<TermId> {
        ids.iter().map(|s| tid(s)).collect()
    }

    #[test]
    fn chain_subsumption_closes_transitively() {
        let mut ont = Ontology::new();
        ont.add_class(OntologyClass::new(tid("T:A")).with_parent(tid("T:B")));
        ont.add_class(OntologyClass::new(tid("T:B")).with_parent(tid("T:C")));
        ont.add_class(OntologyClass::new(tid("T:C")));
        let norm = normalize(&ont).unwrap();
        let state = saturate(&norm.input);
        let map = ancestor_map(&state);
        assert_eq!(map[&tid("T:A")], set(&["T:A", "T:B", "T:C"]));
        assert_eq!(map[&tid("T:B")], set(&["T:B", "T:C"]));
        assert_eq!(map[&tid("T:C")], set(&["T:C"]));
    }

    #[test]
    fn materialized_expression_subsumes_through_transitive_role() {
        let mut ont = Ontology::new();
        ont.add_property(PropertyInfo::new(tid("R:po")).with_transitive(true));
        ont.add_class(
            OntologyClass::new(tid("T:A")).with_superclass(some("R:po", named("T:B"))),
        );
        ont.add_class(
            OntologyClass::new(tid("T:B")).with_superclass(some("R:po", named("T:C"))),
        );
        ont.add_class(OntologyClass::new(tid("T:C")));
        let expr = some("R:po", named("T:C"));
        let (input, registry) = normalize_with_expressions(&ont, &[expr.clone()]).unwrap();
        let state = saturate(&input);
        let eid = registry.id_of(&expr).unwrap();
        let raw: BTreeSet<&TermId> = state
            .store()
            .ancestors(&tid("T:A"))
            .unwrap()
            .collect();
        assert!(raw.contains(eid), "A points into C over the composed link");
        assert!(!state.store().is_unsatisfiable(&tid("T:A")));
    }

    #[test]
    fn direct_disjointness_clash() {
        let mut ont = Ontology::new();
        ont.add_class(
            OntologyClass::new(tid("T:A"))
                .with_parent(tid("T:B"))
                .with_parent(tid("T:C")),
        );
        ont.add_class(OntologyClass::new(tid("T:B")).with_disjoint(tid("T:C")));
        ont.add_class(OntologyClass::new(tid("T:C")));
        assert_eq!(check_unsat(&ont).unwrap(), set(&["T:A"]));
    }

    #[test]
    fn link_into_unsatisfiable_class_propagates() {
        let mut ont = Ontology::new();
        ont.add_property(PropertyInfo::new(tid("R:r")));
        ont.add_class(
            OntologyClass::new(tid("T:A"))
                .with_parent(tid("T:B"))
                .with_parent(tid("T:C")),
        );
        ont.add_class(OntologyClass::new(tid("T:B")).with_disjoint(tid("T:C")));
        ont.add_class(OntologyClass::new(tid("T:C")));
        ont.add_class(
            OntologyClass::new(tid("T:D")).with_superclass(some("R:r", named("T:A"))),
        );
        assert_eq!(check_unsat(&ont).unwrap(), set(&["T:A", "T:D"]));
    }

    #[test]
    fn no_disjointness_no_unsat() {
        let mut ont = Ontology::new();
        ont.add_class(OntologyClass::new(tid("T:A")).with_parent(tid("T:B")));
        ont.add_class(OntologyClass::new(tid("T:B")));
        assert!(check_unsat(&ont).unwrap().is_empty());
    }

    #[test]
    fn registering_same_expression_twice_reuses_the_id() {
        let ont = Ontology::new();
        let expr = ClassExpression::and(vec![named("T:A"), some("R:po", named("T:B"))]);
        let mut norm = normalize(&ont).unwrap();
        register_expressions(&ont, &mut norm, &[expr.clone()]).unwrap();
        let before = norm.registry.len();
        let first = norm.registry.id_of(&expr).unwrap().clone();
        let delta = register_expressions(&ont, &mut norm, &[expr.clone()]).unwrap();
        assert_eq!(norm.registry.len(), before);
        assert_eq!(norm.registry.id_of(&expr), Some(&first));
        assert!(delta.axioms.is_empty());
        assert!(delta.classes.is_empty());
    }

    #[test]
    fn ancestors_of_hides_helper_classes() {
        let mut ont = Ontology::new();
        ont.add_property(PropertyInfo::new(tid("R:po")));
        ont.add_class(OntologyClass::new(tid("T:A")).with_parent(tid("T:Z")));
        ont.add_class(OntologyClass::new(tid("T:B")));
        ont.add_class(OntologyClass::new(tid("T:Z")));
        let expr = ClassExpression::and(vec![named("T:A"), some("R:po", named("T:B"))]);
        let (input, registry) = normalize_with_expressions(&ont, &[expr.clone()]).unwrap();
        let state = saturate(&input);
        let own = registry.id_of(&expr).unwrap().clone();
        let filtered = ancestors_of(state.store(), &expr, &registry).unwrap();
        assert!(filtered.contains(&own), "own id survives the filter");
        assert!(filtered.contains(&tid("T:A")));
        assert!(filtered.contains(&tid("T:Z")));
        let helpers: Vec<&TermId> = filtered
            .iter()
            .filter(|id| id.prefix() == EXPRESSION_PREFIX && **id != own)
            .collect();
        assert!(helpers.is_empty(), "no other EXP ids: {helpers:?}");
    }

    #[test]
    fn ancestors_of_atomic_class() {
        let mut ont = Ontology::new();
        ont.add_class(OntologyClass::new(tid("T:A")).with_parent(tid("T:B")));
        ont.add_class(OntologyClass::new(tid("T:B")));
        let (input, registry) = normalize_with_expressions(&ont, &[]).unwrap();
        let state = saturate(&input);
        let got = ancestors_of(state.store(), &named("T:A"), &registry).unwrap();
        assert_eq!(got, set(&["T:A", "T:B"]));
    }

    #[test]
    fn unregistered_expression_is_an_error() {
        let ont = Ontology::new();
        let (input, registry) = normalize_with_expressions(&ont, &[]).unwrap();
        let state = saturate(&input);
        let expr = some("R:po", named("T:B"));
        let err = ancestors_of(state.store(), &expr, &registry).unwrap_err();
        assert!(matches!(err, Error::UnregisteredExpression { .. }));
    }

    #[test]
    fn obsolete_classes_contribute_nothing() {
        let mut ont = Ontology::new();
        ont.add_class(OntologyClass::new(tid("T:A")).with_parent(tid("T:B")));
        ont.add_class(OntologyClass::new(tid("T:B")));
        ont.add_class(
            OntologyClass::new(tid("T:OLD"))
                .with_parent(tid("T:B"))
                .with_obsolete(true),
        );
        let norm = normalize(&ont).unwrap();
        let state = saturate(&norm.input);
        assert!(!state.store().contains(&tid("T:OLD")));
    }

    #[test]
    fn equivalence_gives_both_directions() {
        let mut ont = Ontology::new();
        ont.add_property(PropertyInfo::new(tid("R:po")));
        ont.add_class(OntologyClass::new(tid("T:X")).with_equivalent(
            ClassExpression::and(vec![named("T:A"), some("R:po", named("T:B"))]),
        ));
        ont.add_class(OntologyClass::new(tid("T:A")));
        ont.add_class(OntologyClass::new(tid("T:B")));
        ont.add_class(
            OntologyClass::new(tid("T:Y"))
                .with_parent(tid("T:A"))
                .with_superclass(some("R:po", named("T:B"))),
        );
        let norm = normalize(&ont).unwrap();
        let state = saturate(&norm.input);
        let map = ancestor_map(&state);
        assert!(map[&tid("T:X")].contains(&tid("T:A")), "definition gives X ⊑ A");
        assert!(map[&tid("T:Y")].contains(&tid("T:X")), "Y matches the definition");
    }

    #[test]
    fn reserved_prefix_rejected() {
        let mut ont = Ontology::new();
        ont.add_class(OntologyClass::new(tid("EXP:1")));
        assert!(matches!(
            normalize(&ont),
            Err(Error::ReservedPrefix { .. })
        ));
    }

    #[test]
    fn saturation_ignores_axiom_order() {
        let mut ont = Ontology::new();
        ont.add_property(PropertyInfo::new(tid("R:po")).with_transitive(true));
        ont.add_class(
            OntologyClass::new(tid("T:A"))
                .with_parent(tid("T:B"))
                .with_superclass(some("R:po", named("T:C"))),
        );
        ont.add_class(
            OntologyClass::new(tid("T:B")).with_superclass(some("R:po", named("T:D"))),
        );
        ont.add_class(
            OntologyClass::new(tid("T:C")).with_superclass(some("R:po", named("T:D"))),
        );
        ont.add_class(OntologyClass::new(tid("T:D")));
        let norm = normalize(&ont).unwrap();
        let forward = saturate(&norm.input);
        let mut reversed = norm.input.clone();
        reversed.axioms.reverse();
        let backward = saturate(&reversed);
        assert_eq!(ancestor_map(&forward), ancestor_map(&backward));
        assert_eq!(link_set(&forward), link_set(&backward));
    }

    #[test]
    fn adding_an_axiom_never_removes_ancestors() {
        let mut ont = Ontology::new();
        ont.add_class(OntologyClass::new(tid("T:A")).with_parent(tid("T:B")));
        ont.add_class(OntologyClass::new(tid("T:B")));
        ont.add_class(OntologyClass::new(tid("T:C")));
        let norm = normalize(&ont).unwrap();
        let before = ancestor_map(&saturate(&norm.input));
        let mut wider = norm.input.clone();
        wider.axioms.push(NormalizedAxiom::SubNamed {
            sub: tid("T:B"),
            sup: tid("T:C"),
        });
        let after = ancestor_map(&saturate(&wider));
        for (id, set) in before {
            assert!(set.is_subset(&after[&id]), "{id} lost ancestors");
        }
    }

    #[test]
    fn resume_matches_from_scratch() {
        let mut ont = Ontology::new();
        ont.add_property(PropertyInfo::new(tid("R:po")).with_transitive(true));
        ont.add_property(PropertyInfo::new(tid("R:ha")).with_super(tid("R:po")));
        ont.add_class(
            OntologyClass::new(tid("T:A"))
                .with_parent(tid("T:B"))
                .with_superclass(some("R:ha", named("T:C"))),
        );
        ont.add_class(
            OntologyClass::new(tid("T:B")).with_superclass(some("R:po", named("T:D"))),
        );
        ont.add_class(
            OntologyClass::new(tid("T:C")).with_superclass(some("R:po", named("T:D"))),
        );
        ont.add_class(OntologyClass::new(tid("T:D")).with_disjoint(tid("T:E")));
        ont.add_class(OntologyClass::new(tid("T:E")));
        let exprs = vec![
            some("R:po", named("T:D")),
            ClassExpression::and(vec![named("T:B"), some("R:po", named("T:C"))]),
            ClassExpression::and(vec![named("T:D"), named("T:E")]),
        ];

        let mut norm = normalize(&ont).unwrap();
        let base = norm.input.clone();
        let state = saturate(&base);
        let delta = register_expressions(&ont, &mut norm, &exprs).unwrap();

        let resumed = resume(&state, &base, &delta);
        let scratch = saturate(&norm.input);
        assert_eq!(ancestor_map(&resumed), ancestor_map(&scratch));
        assert_eq!(link_set(&resumed), link_set(&scratch));
        assert_eq!(
            resumed.store().unsatisfiable(),
            scratch.store().unsatisfiable()
        );
    }

    /// Semantic oracle for one intersection fixture: enumerate every
    /// interpretation over a three-element domain and intersect the
    /// subsumptions that hold in all of them. Free extents are the four
    /// primitive classes; the defined class and the two materialized
    /// expressions are computed, not enumerated.
    #[test]
    fn model_enumeration_agrees_on_intersection_fixture() {
        let mut ont = Ontology::new();
        ont.add_property(PropertyInfo::new(tid("R:po")));
        ont.add_class(OntologyClass::new(tid("T:A")).with_parent(tid("T:Z")));
        ont.add_class(OntologyClass::new(tid("T:B")).with_parent(tid("T:W")));
        ont.add_class(OntologyClass::new(tid("T:C")).with_equivalent(
            ClassExpression::and(vec![named("T:A"), some("R:po", named("T:B"))]),
        ));
        ont.add_class(OntologyClass::new(tid("T:W")));
        ont.add_class(OntologyClass::new(tid("T:Z")));
        let e1 = some("R:po", named("T:B"));
        let e2 = ClassExpression::and(vec![named("T:A"), e1.clone()]);
        let (input, registry) =
            normalize_with_expressions(&ont, &[e1.clone(), e2.clone()]).unwrap();
        let state = saturate(&input);

        let universe: Vec<TermId> = vec![
            tid("T:A"),
            tid("T:B"),
            tid("T:C"),
            tid("T:W"),
            tid("T:Z"),
            registry.id_of(&e1).unwrap().clone(),
            registry.id_of(&e2).unwrap().clone(),
        ];
        // extents[k]: bitmask over the domain {0,1,2} for universe[k].
        let mut holds = vec![[true; 7]; 7];
        for po in 0u32..512 {
            for a in 0u8..8 {
                for z in 0u8..8 {
                    if a & !z != 0 {
                        continue;
                    }
                    for b in 0u8..8 {
                        for w in 0u8..8 {
                            if b & !w != 0 {
                                continue;
                            }
                            let mut e1x = 0u8;
                            for i in 0..3 {
                                for j in 0..3 {
                                    if po & (1 << (i * 3 + j)) != 0 && b & (1 << j) != 0 {
                                        e1x |= 1 << i;
                                    }
                                }
                            }
                            let e2x = a & e1x;
                            let ext = [a, b, e2x, w, z, e1x, e2x];
                            for (x, &xe) in ext.iter().enumerate() {
                                for (y, &ye) in ext.iter().enumerate() {
                                    if xe & !ye != 0 {
                                        holds[x][y] = false;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        for (x, id) in universe.iter().enumerate() {
            let semantic: BTreeSet<TermId> = universe
                .iter()
                .enumerate()
                .filter(|&(y, _)| holds[x][y])
                .map(|(_, id)| id.clone())
                .collect();
            let derived: BTreeSet<TermId> = state
                .store()
                .ancestors(id)
                .unwrap()
                .cloned()
                .collect();
            assert_eq!(derived, semantic, "ancestors of {id}");
        }
    }
}
