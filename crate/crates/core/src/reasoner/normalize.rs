//! Translation of ontology axioms and class expressions into the five
//! normalized forms.

use crate::error::{Error, Result};
use crate::manchester::ClassExpression;
use crate::obo::Ontology;
use crate::term::TermId;

use super::{
    ExpressionRegistry, NormalizedAxiom, RoleInfo, SaturationInput, EXPRESSION_PREFIX,
};

/// Normalized ontology axioms plus the registry of materialized
/// expressions. Further expressions can be appended with
/// [`register_expressions`].
#[derive(Debug, Clone, Default)]
pub struct Normalization {
    pub input: SaturationInput,
    pub registry: ExpressionRegistry,
}

struct Normalizer<'o> {
    ont: &'o Ontology,
    out: Normalization,
}

impl Normalizer<'_> {
    fn push(&mut self, axiom: NormalizedAxiom) {
        self.out.input.axioms.push(axiom);
    }

    fn note_role(&mut self, property: &TermId) {
        if self.out.input.roles.contains_key(property) {
            return;
        }
        let info = match self.ont.property(property) {
            Some(p) => RoleInfo {
                transitive: p.transitive,
                supers: p.super_properties.clone(),
            },
            // Undeclared properties behave as plain roles.
            None => RoleInfo::default(),
        };
        // Reserve the slot before recursing so a property cycle terminates.
        self.out.input.roles.insert(property.clone(), info.clone());
        for sup in &info.supers {
            self.note_role(sup);
        }
    }

    /// A named class standing for `expr`, materializing it if complex.
    /// Materialization emits the defining axioms in both directions once.
    fn name_of(&mut self, expr: &ClassExpression) -> TermId {
        if let ClassExpression::Named(id) = expr {
            return id.clone();
        }
        let (eid, fresh) = self.out.registry.intern(expr);
        if fresh {
            self.out.input.classes.insert(eid.clone());
            self.sup_axioms(&eid, expr);
            self.sub_axioms(expr, &eid);
        }
        eid
    }

    /// Emits axioms for `sub ⊑ expr`.
    fn sup_axioms(&mut self, sub: &TermId, expr: &ClassExpression) {
        match expr {
            ClassExpression::Named(sup) => self.push(NormalizedAxiom::SubNamed {
                sub: sub.clone(),
                sup: sup.clone(),
            }),
            ClassExpression::SomeValuesFrom { property, filler } => {
                self.note_role(property);
                let filler = self.name_of(filler);
                self.push(NormalizedAxiom::SubExists {
                    sub: sub.clone(),
                    property: property.clone(),
                    filler,
                });
            }
            // Below an intersection, subsumption distributes over operands.
            ClassExpression::Intersection(ops) => {
                for op in ops {
                    self.sup_axioms(sub, op);
                }
            }
        }
    }

    /// Emits axioms for `expr ⊑ sup`.
    fn sub_axioms(&mut self, expr: &ClassExpression, sup: &TermId) {
        match expr {
            ClassExpression::Named(sub) => self.push(NormalizedAxiom::SubNamed {
                sub: sub.clone(),
                sup: sup.clone(),
            }),
            ClassExpression::SomeValuesFrom { property, filler } => {
                self.note_role(property);
                let filler = self.name_of(filler);
                self.push(NormalizedAxiom::ExistsSub {
                    property: property.clone(),
                    filler,
                    sup: sup.clone(),
                });
            }
            // Conjunction introduction is binary: wider intersections go
            // through a materialized prefix, shrinking by one operand.
            ClassExpression::Intersection(ops) => {
                debug_assert!(ops.len() >= 2, "canonical intersections have >= 2 operands");
                let last = self.name_of(&ops[ops.len() - 1]);
                let left = if ops.len() == 2 {
                    self.name_of(&ops[0])
                } else {
                    let prefix = ClassExpression::Intersection(ops[..ops.len() - 1].to_vec());
                    self.name_of(&prefix)
                };
                self.push(NormalizedAxiom::SubConj {
                    left,
                    right: last,
                    sup: sup.clone(),
                });
            }
        }
    }
}

fn check_reserved(id: &TermId) -> Result<()> {
    if id.prefix() == EXPRESSION_PREFIX {
        return Err(Error::ReservedPrefix {
            prefix: EXPRESSION_PREFIX.into(),
            id: id.to_string(),
        });
    }
    Ok(())
}

/// Normalizes every axiom of the non-obsolete classes of `ont`. Dangling
/// classes keep a place in the signature; obsolete stanzas contribute
/// nothing.
pub fn normalize(ont: &Ontology) -> Result<Normalization> {
    for class in ont.classes() {
        check_reserved(&class.id)?;
    }
    for prop in ont.properties() {
        check_reserved(&prop.id)?;
    }

    let mut n = Normalizer {
        ont,
        out: Normalization::default(),
    };
    for prop in ont.properties() {
        let id = prop.id.clone();
        n.note_role(&id);
    }
    for class in ont.classes() {
        if class.obsolete {
            continue;
        }
        n.out.input.classes.insert(class.id.clone());
        for sup in &class.superclasses {
            n.sup_axioms(&class.id, sup);
        }
        for eq in &class.equivalents {
            n.sup_axioms(&class.id, eq);
            n.sub_axioms(eq, &class.id);
        }
        for other in &class.disjoint_with {
            n.push(NormalizedAxiom::bottom(class.id.clone(), other.clone()));
        }
    }
    Ok(n.out)
}

/// Registers extra class expressions (typically annotation entities and
/// qualities) so they participate in subsumption. `norm` grows to the
/// combined input; the returned [`SaturationInput`] holds only the delta:
/// the axioms, classes, and roles added by this call.
pub fn register_expressions(
    ont: &Ontology,
    norm: &mut Normalization,
    exprs: &[ClassExpression],
) -> Result<SaturationInput> {
    for expr in exprs {
        for id in expr.class_ids() {
            check_reserved(id)?;
        }
        for id in expr.property_ids() {
            check_reserved(id)?;
        }
    }

    let axiom_start = norm.input.axioms.len();
    let classes_before = norm.input.classes.clone();
    let roles_before: Vec<TermId> = norm.input.roles.keys().cloned().collect();

    let mut n = Normalizer {
        ont,
        out: std::mem::take(norm),
    };
    for expr in exprs {
        let expr = expr.clone().canonicalize();
        // Referenced classes take part in the closure even when the
        // ontology never mentions them.
        for id in expr.class_ids() {
            n.out.input.classes.insert(id.clone());
        }
        n.name_of(&expr);
    }
    *norm = n.out;

    let mut delta = SaturationInput {
        classes: norm.input.classes.clone(),
        roles: norm.input.roles.clone(),
        axioms: norm.input.axioms[axiom_start..].to_vec(),
    };
    for id in &classes_before {
        delta.classes.remove(id);
    }
    for id in &roles_before {
        delta.roles.remove(id);
    }
    Ok(delta)
}

/// Convenience wrapper: normalize `ont` and register `exprs`, returning the
/// combined saturation input and the registry.
pub fn normalize_with_expressions(
    ont: &Ontology,
    exprs: &[ClassExpression],
) -> Result<(SaturationInput, ExpressionRegistry)> {
    let mut norm = normalize(ont)?;
    register_expressions(ont, &mut norm, exprs)?;
    Ok((norm.input, norm.registry))
}
