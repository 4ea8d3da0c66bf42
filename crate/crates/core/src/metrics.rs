//! Similarity scoring between annotation sets over a saturated closure:
//! per-state SimJ, NIC, partial precision and recall, plus curator-level
//! aggregation with confidence intervals.
//!
//! Everything is generic over a floating-point [`Scalar`]; the crate root
//! pins `f64` aliases for normal use.
//!
//! Comparison works on [`AncestorProfile`]s: role-tagged ancestor sets, one
//! tag for the entity side and one for the quality side, so an entity term
//! can never match a quality term's ancestors. Related-entity ancestors
//! fold into the entity side, which keeps related-entity EQs comparable
//! with gold EQs written as post-composed entity expressions. Per-state
//! SimJ and NIC are symmetric best-match averages of the pairwise values;
//! partial precision and recall are the two asymmetric halves of the same
//! construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationSet, EQAnnotation, StateKey};
use crate::error::{Error, Result};
use crate::reasoner::{ancestors_of, AncestorStore, ExpressionRegistry};
use crate::term::TermId;

/// Floating-point scalar the metrics are generic over.
pub trait Scalar: Float + FromPrimitive + fmt::Debug + fmt::Display + Serialize {}

impl<T: Float + FromPrimitive + fmt::Debug + fmt::Display + Serialize> Scalar for T {}

fn scalar<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("scalar from f64")
}

fn count<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("scalar from usize")
}

/// Which side of the EQ an ancestor came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Role {
    Entity,
    Quality,
}

/// Role-tagged ancestor closure of one EQ annotation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AncestorProfile {
    pairs: BTreeSet<(Role, TermId)>,
}

impl AncestorProfile {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Role, TermId)> {
        self.pairs.iter()
    }

    pub fn contains(&self, role: Role, id: &TermId) -> bool {
        self.pairs.contains(&(role, id.clone()))
    }
}

impl FromIterator<(Role, TermId)> for AncestorProfile {
    fn from_iter<I: IntoIterator<Item = (Role, TermId)>>(iter: I) -> Self {
        AncestorProfile {
            pairs: iter.into_iter().collect(),
        }
    }
}

/// Computes the role-tagged ancestor profile of one EQ. The EQ's
/// expressions must have been registered when the closure was built.
pub fn profile(
    eq: &EQAnnotation,
    store: &AncestorStore,
    registry: &ExpressionRegistry,
) -> Result<AncestorProfile> {
    let mut pairs = BTreeSet::new();
    for id in ancestors_of(store, &eq.entity, registry)? {
        pairs.insert((Role::Entity, id));
    }
    if let Some(related) = &eq.related {
        for id in ancestors_of(store, related, registry)? {
            pairs.insert((Role::Entity, id));
        }
    }
    for id in ancestors_of(store, &eq.quality, registry)? {
        pairs.insert((Role::Quality, id));
    }
    Ok(AncestorProfile { pairs })
}

/// Jaccard similarity over role-tagged pairs. Both profiles empty is
/// defined as 0; it cannot occur for validated EQs.
pub fn simj<S: Scalar>(p1: &AncestorProfile, p2: &AncestorProfile) -> S {
    let inter = p1.pairs.intersection(&p2.pairs).count();
    let union = p1.pairs.len() + p2.pairs.len() - inter;
    if union == 0 {
        return S::zero();
    }
    count::<S>(inter) / count::<S>(union)
}

/// Normalized information content per class, relative to a gold corpus.
#[derive(Debug, Clone)]
pub struct ICTable<S> {
    nic: HashMap<TermId, S>,
    /// EQ count in the corpus the table was built from.
    pub corpus_size: usize,
    /// True for a single-EQ corpus, where contents are all-or-nothing.
    pub degenerate: bool,
}

impl<S: Scalar> ICTable<S> {
    /// NIC of a class: ln(N / usage) / ln(N), role-blind. Classes absent
    /// from every corpus profile are maximally informative (1); classes in
    /// every profile carry nothing (0).
    pub fn nic(&self, id: &TermId) -> S {
        self.nic.get(id).copied().unwrap_or_else(S::one)
    }
}

/// Builds the information-content table from precomputed corpus profiles.
pub fn ic_from_profiles<'a, S: Scalar>(
    profiles: impl IntoIterator<Item = &'a AncestorProfile>,
) -> Result<ICTable<S>> {
    let mut usage: HashMap<TermId, usize> = HashMap::new();
    let mut n = 0usize;
    for p in profiles {
        n += 1;
        let mut seen: HashSet<&TermId> = HashSet::new();
        for (_, id) in p.iter() {
            if seen.insert(id) {
                *usage.entry(id.clone()).or_insert(0) += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    if n == 1 {
        // ln(1) = 0, so the normalizer vanishes: the single profile's
        // classes subsume the whole corpus and everything else maxes out.
        let nic = usage.into_keys().map(|id| (id, S::zero())).collect();
        return Ok(ICTable {
            nic,
            corpus_size: 1,
            degenerate: true,
        });
    }
    let total = count::<S>(n);
    let ln_n = total.ln();
    let nic = usage
        .into_iter()
        .map(|(id, u)| (id, (total / count::<S>(u.max(1))).ln() / ln_n))
        .collect();
    Ok(ICTable {
        nic,
        corpus_size: n,
        degenerate: false,
    })
}

/// Builds the information-content table from a gold annotation set.
pub fn build_ic_table<S: Scalar>(
    gold: &AnnotationSet,
    store: &AncestorStore,
    registry: &ExpressionRegistry,
) -> Result<ICTable<S>> {
    let mut profiles = Vec::new();
    for eqs in gold.states().values() {
        for eq in eqs {
            profiles.push(profile(eq, store, registry)?);
        }
    }
    ic_from_profiles(profiles.iter())
}

/// NIC of the most informative common ancestor: max NIC over the
/// role-tagged intersection, 0 when the profiles share nothing.
pub fn nic_pair<S: Scalar>(p1: &AncestorProfile, p2: &AncestorProfile, ic: &ICTable<S>) -> S {
    let mut best = S::zero();
    for (_, id) in p1.pairs.intersection(&p2.pairs) {
        let v = ic.nic(id);
        if v > best {
            best = v;
        }
    }
    best
}

/// Per-state scores. `pp` is absent when the test curator produced no EQ
/// for the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateScore<S> {
    pub character_number: u32,
    pub state_symbol: String,
    pub simj: S,
    pub nic: S,
    pub pp: Option<S>,
    pub pr: S,
}

/// Mean over `from` of each profile's best score against `against`;
/// `None` when `from` is empty.
fn best_match_mean<S: Scalar>(
    from: &[AncestorProfile],
    against: &[AncestorProfile],
    pairwise: impl Fn(&AncestorProfile, &AncestorProfile) -> S,
) -> Option<S> {
    if from.is_empty() {
        return None;
    }
    let mut total = S::zero();
    for p in from {
        let mut best = S::zero();
        for q in against {
            let v = pairwise(p, q);
            if v > best {
                best = v;
            }
        }
        total = total + best;
    }
    Some(total / count::<S>(from.len()))
}

/// Scores one character state: PP is the test side's best-match mean, PR
/// the gold side's, state SimJ and NIC their symmetric averages. `gold`
/// must be non-empty; test-only states are excluded upstream.
pub fn score_state<S: Scalar>(
    key: &StateKey,
    test: &[AncestorProfile],
    gold: &[AncestorProfile],
    ic: &ICTable<S>,
) -> StateScore<S> {
    debug_assert!(!gold.is_empty());
    let two = scalar::<S>(2.0);
    let pp = best_match_mean(test, gold, simj::<S>);
    let pr = best_match_mean(gold, test, simj::<S>).unwrap_or_else(S::zero);
    let nic_pp = best_match_mean(test, gold, |a, b| nic_pair(a, b, ic));
    let nic_pr = best_match_mean(gold, test, |a, b| nic_pair(a, b, ic)).unwrap_or_else(S::zero);
    StateScore {
        character_number: key.0,
        state_symbol: key.1.clone(),
        simj: pp.map_or_else(S::zero, |v| (v + pr) / two),
        nic: nic_pp.map_or_else(S::zero, |v| (v + nic_pr) / two),
        pp,
        pr,
    }
}

/// The four reported metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Simj,
    Nic,
    Pp,
    Pr,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Simj, Metric::Nic, Metric::Pp, Metric::Pr];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Metric::Simj => "simj",
            Metric::Nic => "nic",
            Metric::Pp => "pp",
            Metric::Pr => "pr",
        };
        f.write_str(name)
    }
}

/// Mean, sample standard deviation, and normal-approximation 95% interval
/// for one metric; `n` counts the states that contributed a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary<S> {
    pub metric: Metric,
    pub mean: S,
    pub sd: S,
    pub ci95_low: S,
    pub ci95_high: S,
    pub n: usize,
}

impl<S> MetricSummary<S> {
    /// True when no state contributed a value; the numbers are then all 0.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

fn summarize<S: Scalar>(metric: Metric, values: &[S]) -> MetricSummary<S> {
    let n = values.len();
    if n == 0 {
        let zero = S::zero();
        return MetricSummary {
            metric,
            mean: zero,
            sd: zero,
            ci95_low: zero,
            ci95_high: zero,
            n,
        };
    }
    let total = count::<S>(n);
    let mean = values.iter().fold(S::zero(), |a, &b| a + b) / total;
    let sd = if n < 2 {
        S::zero()
    } else {
        let ss = values
            .iter()
            .fold(S::zero(), |a, &b| a + (b - mean) * (b - mean));
        (ss / (total - S::one())).sqrt()
    };
    let half = scalar::<S>(1.96) * sd / total.sqrt();
    MetricSummary {
        metric,
        mean,
        sd,
        ci95_low: mean - half,
        ci95_high: mean + half,
        n,
    }
}

/// Summarizes per-state scores, optionally restricted to an inclusive
/// character-number range. States with an absent value are dropped from
/// that metric only.
pub fn aggregate<S: Scalar>(
    scores: &[StateScore<S>],
    restriction: Option<(u32, u32)>,
) -> Vec<MetricSummary<S>> {
    let in_range =
        |c: u32| restriction.map_or(true, |(lo, hi)| c >= lo && c <= hi);
    Metric::ALL
        .iter()
        .map(|&metric| {
            let values: Vec<S> = scores
                .iter()
                .filter(|s| in_range(s.character_number))
                .filter_map(|s| match metric {
                    Metric::Simj => Some(s.simj),
                    Metric::Nic => Some(s.nic),
                    Metric::Pp => s.pp,
                    Metric::Pr => Some(s.pr),
                })
                .collect();
            summarize(metric, &values)
        })
        .collect()
}

/// Everything one scoring run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreReport<S> {
    /// One entry per gold state, sorted by key.
    pub states: Vec<StateScore<S>>,
    /// Test-only state keys with no gold entry, excluded from aggregation.
    pub excluded: Vec<StateKey>,
    /// Summaries over `states`, after any character-range restriction.
    pub summary: Vec<MetricSummary<S>>,
}

/// Scores a test annotation set against a gold set over one saturated
/// closure. Every state key in the gold set yields a score; test-only keys
/// are reported in `excluded`.
pub fn score<S: Scalar>(
    test: &AnnotationSet,
    gold: &AnnotationSet,
    store: &AncestorStore,
    registry: &ExpressionRegistry,
    restriction: Option<(u32, u32)>,
) -> Result<ScoreReport<S>> {
    let profile_states = |set: &AnnotationSet| -> Result<BTreeMap<StateKey, Vec<AncestorProfile>>> {
        set.states()
            .iter()
            .map(|(key, eqs)| {
                let profiles = eqs
                    .iter()
                    .map(|eq| profile(eq, store, registry))
                    .collect::<Result<Vec<_>>>()?;
                Ok((key.clone(), profiles))
            })
            .collect()
    };
    let gold_profiles = profile_states(gold)?;
    let test_profiles = profile_states(test)?;
    let ic = ic_from_profiles(gold_profiles.values().flatten())?;
    let states = gold_profiles
        .iter()
        .map(|(key, gps)| {
            let tps = test_profiles.get(key).map(Vec::as_slice).unwrap_or(&[]);
            score_state(key, tps, gps, &ic)
        })
        .collect::<Vec<_>>();
    let excluded = test_profiles
        .keys()
        .filter(|key| !gold_profiles.contains_key(*key))
        .cloned()
        .collect();
    let summary = aggregate(&states, restriction);
    Ok(ScoreReport {
        states,
        excluded,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manchester::ClassExpression;
    use crate::manchester::parse_identifier_form;
    use crate::obo::{Ontology, OntologyClass, PropertyInfo};
    use crate::reasoner::{normalize_with_expressions, saturate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tid(s: &str) -> TermId {
        TermId::parse(s).unwrap()
    }

    // Entities: A below B below R, C below R. Qualities: 1 and 2 below 0.
    fn fixture_ontology() -> Ontology {
        let mut ont = Ontology::new();
        ont.add_class(OntologyClass::new(tid("E:R")));
        ont.add_class(OntologyClass::new(tid("E:B")).with_parent(tid("E:R")));
        ont.add_class(OntologyClass::new(tid("E:A")).with_parent(tid("E:B")));
        ont.add_class(OntologyClass::new(tid("E:C")).with_parent(tid("E:R")));
        ont.add_class(OntologyClass::new(tid("Q:0")));
        ont.add_class(OntologyClass::new(tid("Q:1")).with_parent(tid("Q:0")));
        ont.add_class(OntologyClass::new(tid("Q:2")).with_parent(tid("Q:0")));
        ont.add_property(PropertyInfo::new(tid("R:p")));
        ont
    }

    fn closure(
        ont: &Ontology,
        exprs: &[ClassExpression],
    ) -> (AncestorStore, ExpressionRegistry) {
        let (input, registry) = normalize_with_expressions(ont, exprs).unwrap();
        (saturate(&input).into_store(), registry)
    }

    fn eq(entity: &str, quality: &str, related: Option<&str>) -> EQAnnotation {
        EQAnnotation {
            entity: parse_identifier_form(entity).unwrap(),
            quality: parse_identifier_form(quality).unwrap(),
            related: related.map(|r| parse_identifier_form(r).unwrap()),
            entity_text: entity.into(),
            entity_label: String::new(),
            quality_text: quality.into(),
            quality_label: String::new(),
            related_text: related.unwrap_or("").into(),
            related_label: String::new(),
        }
    }

    fn raw_profile(pairs: &[(Role, &str)]) -> AncestorProfile {
        AncestorProfile {
            pairs: pairs.iter().map(|(r, s)| (*r, tid(s))).collect(),
        }
    }

    #[test]
    fn atomic_profile_is_the_role_tagged_ancestor_union() {
        let ont = fixture_ontology();
        let (store, registry) = closure(&ont, &[]);
        let p = profile(&eq("E:A", "Q:1", None), &store, &registry).unwrap();
        let expected = raw_profile(&[
            (Role::Entity, "E:A"),
            (Role::Entity, "E:B"),
            (Role::Entity, "E:R"),
            (Role::Quality, "Q:1"),
            (Role::Quality, "Q:0"),
        ]);
        assert_eq!(p, expected);
    }

    #[test]
    fn related_entity_folds_into_the_entity_side() {
        let ont = fixture_ontology();
        let (store, registry) = closure(&ont, &[]);
        let p = profile(&eq("E:A", "Q:1", Some("E:C")), &store, &registry).unwrap();
        assert!(p.contains(Role::Entity, &tid("E:C")));
        assert!(!p.contains(Role::Quality, &tid("E:C")));
        let expected = raw_profile(&[
            (Role::Entity, "E:A"),
            (Role::Entity, "E:B"),
            (Role::Entity, "E:C"),
            (Role::Entity, "E:R"),
            (Role::Quality, "Q:1"),
            (Role::Quality, "Q:0"),
        ]);
        assert_eq!(p, expected);
    }

    #[test]
    fn identical_eqs_have_identical_profiles() {
        let ont = fixture_ontology();
        let composed = parse_identifier_form("E:A and R:p some E:C").unwrap();
        let (store, registry) = closure(&ont, &[composed]);
        let a = profile(&eq("E:A and R:p some E:C", "Q:1", None), &store, &registry).unwrap();
        let b = profile(&eq("R:p some E:C and E:A", "Q:1", None), &store, &registry).unwrap();
        assert_eq!(a, b);
        let c = profile(&eq("E:A", "Q:1", None), &store, &registry).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unregistered_expression_is_an_error() {
        let ont = fixture_ontology();
        let (store, registry) = closure(&ont, &[]);
        let err = profile(&eq("E:A and R:p some E:C", "Q:1", None), &store, &registry)
            .unwrap_err();
        assert!(matches!(err, Error::UnregisteredExpression { .. }));
    }

    #[test]
    fn simj_is_set_arithmetic_over_tagged_pairs() {
        let p = raw_profile(&[(Role::Entity, "X:1"), (Role::Quality, "X:1")]);
        assert_eq!(simj::<f64>(&p, &p), 1.0);

        let a = raw_profile(&[
            (Role::Entity, "X:1"),
            (Role::Entity, "X:2"),
            (Role::Entity, "X:3"),
            (Role::Quality, "X:8"),
            (Role::Quality, "X:9"),
        ]);
        let b = raw_profile(&[
            (Role::Entity, "X:1"),
            (Role::Entity, "X:4"),
            (Role::Entity, "X:5"),
            (Role::Quality, "X:8"),
            (Role::Quality, "X:7"),
        ]);
        assert_eq!(simj::<f64>(&a, &b), 0.25);
        // Roles keep equal ids apart.
        let e = raw_profile(&[(Role::Entity, "X:1")]);
        let q = raw_profile(&[(Role::Quality, "X:1")]);
        assert_eq!(simj::<f64>(&e, &q), 0.0);
        assert_eq!(simj::<f64>(&AncestorProfile::default(), &AncestorProfile::default()), 0.0);
    }

    #[test]
    fn simj_matches_a_brute_force_oracle() {
        let pool: Vec<(Role, TermId)> = (0..30)
            .flat_map(|i| {
                let id = tid(&format!("X:{i}"));
                [(Role::Entity, id.clone()), (Role::Quality, id)]
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let draw = |rng: &mut ChaCha8Rng| AncestorProfile {
                pairs: pool
                    .iter()
                    .filter(|_| rng.gen_bool(0.3))
                    .cloned()
                    .collect(),
            };
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let inter = a.iter().filter(|p| b.pairs.contains(p)).count();
            let union = a.len() + b.len() - inter;
            let expected = if union == 0 {
                0.0
            } else {
                inter as f64 / union as f64
            };
            assert_eq!(simj::<f64>(&a, &b), expected);
            assert_eq!(simj::<f64>(&a, &b), simj::<f64>(&b, &a));
        }
    }

    #[test]
    fn ic_counts_usage_role_blind() {
        // 8 profiles; X:c appears in two of them, once per role.
        let mut profiles: Vec<AncestorProfile> = (0..8)
            .map(|i| raw_profile(&[(Role::Entity, &format!("E:{i}"))]))
            .collect();
        profiles[0].pairs.insert((Role::Entity, tid("X:c")));
        profiles[1].pairs.insert((Role::Quality, tid("X:c")));
        for p in &mut profiles {
            p.pairs.insert((Role::Quality, tid("Q:root")));
        }
        let ic: ICTable<f64> = ic_from_profiles(profiles.iter()).unwrap();
        assert_eq!(ic.corpus_size, 8);
        assert!(!ic.degenerate);
        assert!((ic.nic(&tid("X:c")) - 4f64.ln() / 8f64.ln()).abs() < 1e-12);
        assert_eq!(ic.nic(&tid("Q:root")), 0.0);
        assert!((ic.nic(&tid("E:3")) - 1.0).abs() < 1e-12);
        assert_eq!(ic.nic(&tid("X:absent")), 1.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let err = ic_from_profiles::<f64>(std::iter::empty()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn single_profile_corpus_is_degenerate() {
        let p = raw_profile(&[(Role::Entity, "E:only")]);
        let ic: ICTable<f64> = ic_from_profiles([&p]).unwrap();
        assert!(ic.degenerate);
        assert_eq!(ic.nic(&tid("E:only")), 0.0);
        assert_eq!(ic.nic(&tid("E:other")), 1.0);
    }

    #[test]
    fn nic_pair_takes_the_most_informative_common_ancestor() {
        let mut nic = HashMap::new();
        nic.insert(tid("X:1"), 0.3);
        nic.insert(tid("X:2"), 0.7);
        nic.insert(tid("X:3"), 0.9);
        let ic = ICTable {
            nic,
            corpus_size: 5,
            degenerate: false,
        };
        let a = raw_profile(&[
            (Role::Entity, "X:1"),
            (Role::Entity, "X:2"),
            (Role::Entity, "X:3"),
        ]);
        let b = raw_profile(&[
            (Role::Entity, "X:1"),
            (Role::Entity, "X:2"),
            (Role::Quality, "X:3"),
        ]);
        assert_eq!(nic_pair(&a, &b, &ic), 0.7);
        let disjoint = raw_profile(&[(Role::Entity, "Y:1")]);
        assert_eq!(nic_pair(&a, &disjoint, &ic), 0.0);
        // Cross-role ids never meet, even at NIC 1.
        let q3 = raw_profile(&[(Role::Quality, "X:3")]);
        let e3 = raw_profile(&[(Role::Entity, "X:3")]);
        assert_eq!(nic_pair(&e3, &q3, &ic), 0.0);
    }

    #[test]
    fn identical_sets_hit_the_exact_match_ceiling() {
        let a = raw_profile(&[(Role::Entity, "E:a"), (Role::Quality, "Q:x")]);
        let b = raw_profile(&[(Role::Entity, "E:b"), (Role::Quality, "Q:x")]);
        let gold = vec![a, b];
        let ic: ICTable<f64> = ic_from_profiles(gold.iter()).unwrap();
        let score = score_state(&(1, "0".to_string()), &gold, &gold, &ic);
        assert_eq!(score.pp, Some(1.0));
        assert_eq!(score.pr, 1.0);
        assert_eq!(score.simj, 1.0);
        // Self-MICA of each profile is its rarest class: the unique entity.
        assert_eq!(score.nic, 1.0);
    }

    #[test]
    fn matching_subset_keeps_full_precision() {
        let a = raw_profile(&[(Role::Entity, "E:a"), (Role::Quality, "Q:x")]);
        let d = raw_profile(&[(Role::Entity, "F:d"), (Role::Quality, "P:y")]);
        let gold = vec![a.clone(), d];
        let ic: ICTable<f64> = ic_from_profiles(gold.iter()).unwrap();
        let score = score_state(&(1, "0".to_string()), &[a], &gold, &ic);
        assert_eq!(score.pp, Some(1.0));
        assert_eq!(score.pr, 0.5);
        assert_eq!(score.simj, 0.75);
    }

    #[test]
    fn empty_test_side_zeroes_recall_and_leaves_precision_absent() {
        let gold = vec![raw_profile(&[(Role::Entity, "E:a")])];
        let ic: ICTable<f64> = ic_from_profiles(gold.iter()).unwrap();
        let score = score_state(&(1, "0".to_string()), &[], &gold, &ic);
        assert_eq!(score.pp, None);
        assert_eq!(score.pr, 0.0);
        assert_eq!(score.simj, 0.0);
        assert_eq!(score.nic, 0.0);
    }

    #[test]
    fn precision_and_recall_are_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pool: Vec<(Role, TermId)> = (0..12)
            .map(|i| (Role::Entity, tid(&format!("X:{i}"))))
            .chain((0..12).map(|i| (Role::Quality, tid(&format!("Y:{i}")))))
            .collect();
        for _ in 0..50 {
            let draw_set = |rng: &mut ChaCha8Rng| -> Vec<AncestorProfile> {
                let n = rng.gen_range(1..5);
                (0..n)
                    .map(|_| AncestorProfile {
                        pairs: pool
                            .iter()
                            .filter(|_| rng.gen_bool(0.25))
                            .cloned()
                            .collect(),
                    })
                    .collect()
            };
            let t = draw_set(&mut rng);
            let g = draw_set(&mut rng);
            let ic: ICTable<f64> = ic_from_profiles(g.iter().chain(t.iter())).unwrap();
            let key = (1, "0".to_string());
            let forward = score_state(&key, &t, &g, &ic);
            let backward = score_state(&key, &g, &t, &ic);
            assert_eq!(forward.pp, Some(backward.pr));
            assert_eq!(backward.pp, Some(forward.pr));
            assert_eq!(forward.simj, backward.simj);
            assert_eq!(forward.nic, backward.nic);
        }
    }

    fn sscore(ch: u32, simj: f64, nic: f64, pp: Option<f64>, pr: f64) -> StateScore<f64> {
        StateScore {
            character_number: ch,
            state_symbol: "0".into(),
            simj,
            nic,
            pp,
            pr,
        }
    }

    #[test]
    fn aggregation_matches_hand_arithmetic() {
        let single = [sscore(1, 1.0, 1.0, Some(1.0), 1.0)];
        for summary in aggregate(&single, None) {
            assert_eq!(summary.mean, 1.0);
            assert_eq!(summary.sd, 0.0);
            assert_eq!(summary.ci95_low, 1.0);
            assert_eq!(summary.ci95_high, 1.0);
            assert_eq!(summary.n, 1);
        }

        let two = [
            sscore(1, 0.4, 0.4, Some(0.4), 0.4),
            sscore(2, 0.6, 0.6, Some(0.6), 0.6),
        ];
        let sd = 0.02f64.sqrt();
        let half = 1.96 * sd / 2f64.sqrt();
        for summary in aggregate(&two, None) {
            assert!((summary.mean - 0.5).abs() < 1e-12);
            assert!((summary.sd - sd).abs() < 1e-12);
            assert!((summary.ci95_low - (0.5 - half)).abs() < 1e-12);
            assert!((summary.ci95_high - (0.5 + half)).abs() < 1e-12);
            assert_eq!(summary.n, 2);
        }
    }

    #[test]
    fn restriction_is_an_inclusive_character_range() {
        let scores = [
            sscore(1, 0.1, 0.1, Some(0.1), 0.1),
            sscore(2, 0.2, 0.2, None, 0.2),
            sscore(3, 0.3, 0.3, Some(0.3), 0.3),
            sscore(9, 0.9, 0.9, Some(0.9), 0.9),
        ];
        let summaries = aggregate(&scores, Some((2, 3)));
        for summary in &summaries {
            match summary.metric {
                // The absent pp in character 2 drops from pp only.
                Metric::Pp => assert_eq!(summary.n, 1),
                _ => assert_eq!(summary.n, 2),
            }
        }
        let simj = summaries.iter().find(|s| s.metric == Metric::Simj).unwrap();
        assert!((simj.mean - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_aggregation_is_marked_not_faked() {
        for summary in aggregate::<f64>(&[], None) {
            assert!(summary.is_empty());
            assert_eq!(summary.mean, 0.0);
        }
    }

    #[test]
    fn scoring_covers_gold_keys_and_logs_test_only_keys() {
        use crate::annotations::parse_annotation_tsv;
        let ont = fixture_ontology();
        let (store, registry) = closure(&ont, &[]);
        let header = crate::annotations::ANNOTATION_HEADER;
        let gold_text = format!(
            "{header}\n\
             1\tc1\t0\ts\tE:A\tx\tQ:1\ty\t\t\n\
             1\tc1\t1\ts\tE:B\tx\tQ:2\ty\t\t\n\
             2\tc2\t0\ts\tE:C\tx\tQ:0\ty\t\t\n"
        );
        let test_text = format!(
            "{header}\n\
             1\tc1\t0\ts\tE:A\tx\tQ:1\ty\t\t\n\
             7\tc7\t0\ts\tE:C\tx\tQ:2\ty\t\t\n"
        );
        let (gold, _) = parse_annotation_tsv("gold.tsv", &gold_text);
        let (test, _) = parse_annotation_tsv("test.tsv", &test_text);
        let report: ScoreReport<f64> = score(&test, &gold, &store, &registry, None).unwrap();
        assert_eq!(report.states.len(), 3);
        assert_eq!(report.excluded, vec![(7, "0".to_string())]);
        let exact = &report.states[0];
        assert_eq!((exact.character_number, exact.state_symbol.as_str()), (1, "0"));
        assert_eq!(exact.simj, 1.0);
        assert_eq!(exact.pp, Some(1.0));
        // States 1/1 and 2/0 have no test EQ at all.
        assert_eq!(report.states[1].pp, None);
        assert_eq!(report.states[1].simj, 0.0);
        for summary in &report.summary {
            match summary.metric {
                Metric::Pp => assert_eq!(summary.n, 1),
                _ => assert_eq!(summary.n, 3),
            }
            assert!(summary.ci95_low <= summary.mean && summary.mean <= summary.ci95_high);
        }
    }

    #[test]
    fn replacing_an_entity_with_an_ancestor_never_raises_simj() {
        let ont = fixture_ontology();
        let (store, registry) = closure(&ont, &[]);
        let gold = profile(&eq("E:A", "Q:1", None), &store, &registry).unwrap();
        let original = simj::<f64>(&gold, &gold);
        for ancestor in ["E:B", "E:R"] {
            let weaker = profile(&eq(ancestor, "Q:1", None), &store, &registry).unwrap();
            assert!(weaker.pairs.is_subset(&gold.pairs));
            assert!(simj::<f64>(&weaker, &gold) <= original);
        }
        let b = simj::<f64>(
            &profile(&eq("E:B", "Q:1", None), &store, &registry).unwrap(),
            &gold,
        );
        let r = simj::<f64>(
            &profile(&eq("E:R", "Q:1", None), &store, &registry).unwrap(),
            &gold,
        );
        assert!(r < b && b < original);
    }

    #[test]
    fn f32_and_f64_agree_to_single_precision() {
        let a = raw_profile(&[
            (Role::Entity, "X:1"),
            (Role::Entity, "X:2"),
            (Role::Quality, "X:3"),
        ]);
        let b = raw_profile(&[(Role::Entity, "X:1"), (Role::Quality, "X:3")]);
        let wide: f64 = simj(&a, &b);
        let narrow: f32 = simj(&a, &b);
        assert!((wide - narrow as f64).abs() < 1e-6);
    }
}
