//! Templated synthetic datasets with known gold structures.
//!
//! Every kind cycles through its templates in a seed-shuffled order, so any
//! fixture of size at least the template count exercises all of them:
//! nested spans (entity), multi-triple sentences (relation), multi-label
//! spans and two events per sentence (event), two triplets per sentence
//! (sentiment). Spans linked by associations never overlap.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExDocument;
use crate::schema::{SchemaSet, TaskKind, TRIGGER_ARGUMENT_LABEL, TRIGGER_LABEL};
use crate::structures::{Argument, Entity, Event, ExtractionRecord, Relation, Sentiment, Span};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixture {
    pub kind: TaskKind,
    pub schemas: SchemaSet,
    pub documents: Vec<ExDocument>,
}

const FIRST: &[&str] = &[
    "Anna", "Boris", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo", "Ines", "Jonas", "Kira", "Lars", "Mona",
    "Nils",
];
const LAST: &[&str] = &["Berg", "Costa", "Dahl", "Eriksen", "Fischer", "Grant", "Holm"];
const CITY: &[&str] = &["Oslo", "Lisbon", "Kyoto", "Denver", "Nairobi", "Quito", "Tallinn", "Perth", "Dakar", "Bergen"];
const COMPANY: &[&str] = &["Acme", "Globex", "Initech", "Umbrella", "Vandelay", "Hooli", "Stark"];
const SUFFIX: &[&str] = &["Corp", "Labs", "Group"];
const ASPECT: &[&str] =
    &["duck breast special", "service", "wine list", "pasta", "dessert menu", "staff", "decor", "house salad"];
const POSITIVE: &[&str] = &["incredible", "great", "friendly", "superb"];
const NEGATIVE: &[&str] = &["terrible", "slow", "bland", "rude"];
const NEUTRAL: &[&str] = &["okay", "average"];

fn labels(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn bind(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// The schema set each fixture kind is generated against.
pub fn fixture_schemas(kind: TaskKind) -> SchemaSet {
    let s = match kind {
        TaskKind::Entity => SchemaSet {
            task_name: "Entity Extraction".into(),
            kind,
            classification: labels(&["Person", "Location", "Organization"]),
            association: vec![],
            bindings: vec![],
        },
        TaskKind::Relation => SchemaSet {
            task_name: "Relation Extraction".into(),
            kind,
            classification: labels(&["Person", "Location", "Organization"]),
            association: labels(&["live in", "work for", "based in"]),
            bindings: bind(&[
                ("live in", "Person"),
                ("live in", "Location"),
                ("work for", "Person"),
                ("work for", "Organization"),
                ("based in", "Organization"),
                ("based in", "Location"),
            ]),
        },
        TaskKind::Event => SchemaSet {
            task_name: "Event Extraction".into(),
            kind,
            classification: labels(&[TRIGGER_LABEL, "Person", "Place", "Victim", "Agent", "Born", "Injure"]),
            association: labels(&[TRIGGER_ARGUMENT_LABEL]),
            bindings: bind(&[
                ("Born", TRIGGER_LABEL),
                ("Born", "Person"),
                ("Born", "Place"),
                ("Injure", TRIGGER_LABEL),
                ("Injure", "Victim"),
                ("Injure", "Agent"),
                ("Injure", "Place"),
                (TRIGGER_ARGUMENT_LABEL, TRIGGER_LABEL),
                (TRIGGER_ARGUMENT_LABEL, "Person"),
                (TRIGGER_ARGUMENT_LABEL, "Place"),
                (TRIGGER_ARGUMENT_LABEL, "Victim"),
                (TRIGGER_ARGUMENT_LABEL, "Agent"),
            ]),
        },
        TaskKind::Sentiment => SchemaSet {
            task_name: "Sentiment Extraction".into(),
            kind,
            classification: labels(&["Aspect", "Opinion"]),
            association: labels(&["Positive", "Negative", "Neutral"]),
            bindings: bind(&[
                ("Positive", "Aspect"),
                ("Positive", "Opinion"),
                ("Negative", "Aspect"),
                ("Negative", "Opinion"),
                ("Neutral", "Aspect"),
                ("Neutral", "Opinion"),
            ]),
        },
    };
    s.validate().expect("fixture schemas are valid");
    s
}

struct Builder {
    tokens: Vec<String>,
    gold: ExtractionRecord,
}

impl Builder {
    fn new() -> Self {
        Builder { tokens: Vec::new(), gold: ExtractionRecord::default() }
    }

    fn words(&mut self, text: &str) -> Span {
        let start = self.tokens.len();
        self.tokens.extend(text.split_whitespace().map(str::to_string));
        Span::new(start, self.tokens.len() - 1)
    }

    fn typed(&mut self, text: &str, label: &str) -> Span {
        let span = self.words(text);
        self.tag(span, label);
        span
    }

    fn tag(&mut self, span: Span, label: &str) {
        self.gold.entities.push(Entity { span, label: label.into() });
    }

    fn relate(&mut self, head: Span, label: &str, tail: Span) {
        self.gold.relations.push(Relation { head, label: label.into(), tail });
    }

    fn event(&mut self, label: &str, trigger: Span, args: &[(Span, &str)]) {
        self.gold.events.push(Event {
            label: label.into(),
            trigger,
            arguments: args.iter().map(|&(span, role)| Argument { span, role: role.into() }).collect(),
        });
    }

    fn finish(self, task: &str) -> ExDocument {
        let mut doc = ExDocument::from_tokens(self.tokens, task);
        doc.gold = self.gold;
        doc
    }
}

struct Pools<'r> {
    rng: &'r mut ChaCha8Rng,
    used: Vec<&'static str>,
}

impl Pools<'_> {
    fn pick(&mut self, pool: &'static [&'static str]) -> &'static str {
        let fresh: Vec<&'static str> = pool.iter().copied().filter(|w| !self.used.contains(w)).collect();
        let w = *fresh.choose(self.rng).expect("pool larger than one sentence needs");
        self.used.push(w);
        w
    }

    fn person(&mut self) -> String {
        let first = self.pick(FIRST);
        if self.rng.random_bool(0.5) {
            format!("{first} {}", self.pick(LAST))
        } else {
            first.to_string()
        }
    }

    fn city(&mut self) -> String {
        self.pick(CITY).to_string()
    }

    fn company(&mut self) -> String {
        let name = self.pick(COMPANY);
        if self.rng.random_bool(0.5) {
            format!("{name} {}", SUFFIX.choose(self.rng).unwrap())
        } else {
            name.to_string()
        }
    }

    fn opinion(&mut self) -> (&'static str, &'static str) {
        let (polarity, pool): (&str, &'static [&'static str]) = match self.rng.random_range(0..5) {
            0 | 1 => ("Positive", POSITIVE),
            2 | 3 => ("Negative", NEGATIVE),
            _ => ("Neutral", NEUTRAL),
        };
        (polarity, self.pick(pool))
    }
}

fn entity_doc(t: usize, p: &mut Pools, task: &str) -> ExDocument {
    let mut b = Builder::new();
    match t {
        0 => {
            b.typed(&p.person(), "Person");
            b.words("visited");
            b.typed(&p.city(), "Location");
        }
        1 => {
            b.typed(&p.person(), "Person");
            b.words("joined");
            b.typed(&p.company(), "Organization");
            b.words("last year");
        }
        2 => {
            b.typed(&p.company(), "Organization");
            b.words("hired");
            b.typed(&p.person(), "Person");
            b.words("in");
            b.typed(&p.city(), "Location");
        }
        3 => {
            b.typed(&p.person(), "Person");
            b.words("studied at");
            let uni = b.words("University of");
            let city = b.typed(&p.city(), "Location");
            b.tag(Span::new(uni.start, city.end), "Organization");
        }
        _ => {
            b.typed(&p.person(), "Person");
            b.words("and");
            b.typed(&p.person(), "Person");
            b.words("met in");
            b.typed(&p.city(), "Location");
        }
    }
    b.words(".");
    b.finish(task)
}

fn relation_doc(t: usize, p: &mut Pools, task: &str) -> ExDocument {
    let mut b = Builder::new();
    match t {
        0 => {
            let per = b.typed(&p.person(), "Person");
            b.words("lives in");
            let loc = b.typed(&p.city(), "Location");
            b.relate(per, "live in", loc);
        }
        1 => {
            let per = b.typed(&p.person(), "Person");
            b.words("works for");
            let org = b.typed(&p.company(), "Organization");
            b.relate(per, "work for", org);
        }
        2 => {
            let org = b.typed(&p.company(), "Organization");
            b.words("is based in");
            let loc = b.typed(&p.city(), "Location");
            b.relate(org, "based in", loc);
        }
        3 => {
            let per = b.typed(&p.person(), "Person");
            b.words(", who works for");
            let org = b.typed(&p.company(), "Organization");
            b.words(", lives in");
            let loc = b.typed(&p.city(), "Location");
            b.relate(per, "work for", org);
            b.relate(per, "live in", loc);
        }
        4 => {
            let per = b.typed(&p.person(), "Person");
            b.words("works for");
            let org = b.typed(&p.company(), "Organization");
            b.words(", which is based in");
            let loc = b.typed(&p.city(), "Location");
            b.relate(per, "work for", org);
            b.relate(org, "based in", loc);
        }
        _ => {
            let a = b.typed(&p.person(), "Person");
            b.words("and");
            let c = b.typed(&p.person(), "Person");
            b.words("live in");
            let loc = b.typed(&p.city(), "Location");
            b.relate(a, "live in", loc);
            b.relate(c, "live in", loc);
        }
    }
    b.words(".");
    b.finish(task)
}

fn event_doc(t: usize, p: &mut Pools, task: &str) -> ExDocument {
    let mut b = Builder::new();
    match t {
        0 => {
            let v = b.typed(&p.person(), "Victim");
            b.words("was");
            let trig = b.typed("wounded", TRIGGER_LABEL);
            b.words("in");
            let place = b.typed(&p.city(), "Place");
            b.event("Injure", trig, &[(v, "Victim"), (place, "Place")]);
        }
        1 => {
            let a = b.typed(&p.person(), "Agent");
            let trig = b.typed("attacked", TRIGGER_LABEL);
            let v = b.typed(&p.person(), "Victim");
            b.words("in");
            let place = b.typed(&p.city(), "Place");
            b.event("Injure", trig, &[(a, "Agent"), (v, "Victim"), (place, "Place")]);
        }
        2 => {
            let per = b.typed(&p.person(), "Person");
            b.words("was");
            let trig = b.typed("born", TRIGGER_LABEL);
            b.words("in");
            let place = b.typed(&p.city(), "Place");
            b.event("Born", trig, &[(per, "Person"), (place, "Place")]);
        }
        3 => {
            let a = b.typed(&p.person(), "Agent");
            let trig = b.typed("injured", TRIGGER_LABEL);
            let v = b.typed(&p.person(), "Victim");
            b.event("Injure", trig, &[(a, "Agent"), (v, "Victim")]);
        }
        _ => {
            let per = b.typed(&p.person(), "Person");
            b.tag(per, "Victim");
            b.words("was");
            let born = b.typed("born", TRIGGER_LABEL);
            b.words("in");
            let home = b.typed(&p.city(), "Place");
            b.words("and");
            let hurt = b.typed("wounded", TRIGGER_LABEL);
            b.words("in");
            let away = b.typed(&p.city(), "Place");
            b.event("Born", born, &[(per, "Person"), (home, "Place")]);
            b.event("Injure", hurt, &[(per, "Victim"), (away, "Place")]);
        }
    }
    b.words(".");
    b.finish(task)
}

fn triplet(b: &mut Builder, p: &mut Pools, lead: &str) {
    b.words(lead);
    let aspect = b.typed(p.pick(ASPECT), "Aspect");
    b.words("was");
    let (polarity, word) = p.opinion();
    let opinion = b.typed(word, "Opinion");
    b.gold.sentiments.push(Sentiment { aspect, polarity: polarity.into(), opinion });
}

fn sentiment_doc(t: usize, p: &mut Pools, task: &str) -> ExDocument {
    let mut b = Builder::new();
    match t {
        0 => triplet(&mut b, p, "The"),
        1 => {
            b.words("I thought");
            triplet(&mut b, p, "the");
        }
        2 => {
            triplet(&mut b, p, "The");
            triplet(&mut b, p, "but the");
        }
        _ => {
            triplet(&mut b, p, "We agreed the");
            b.words("tonight");
        }
    }
    b.words(".");
    b.finish(task)
}

type Template = fn(usize, &mut Pools, &str) -> ExDocument;

/// Builds `size` templated documents of `kind`. Deterministic in `seed`.
pub fn make_fixture(kind: TaskKind, size: usize, seed: u64) -> Fixture {
    assert!(size > 0, "fixture size must be positive");
    let schemas = fixture_schemas(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_templates, make): (usize, Template) = match kind {
        TaskKind::Entity => (5, entity_doc),
        TaskKind::Relation => (6, relation_doc),
        TaskKind::Event => (5, event_doc),
        TaskKind::Sentiment => (4, sentiment_doc),
    };
    let mut order: Vec<usize> = (0..n_templates).collect();
    order.shuffle(&mut rng);
    let documents = (0..size)
        .map(|i| {
            let mut pools = Pools { rng: &mut rng, used: Vec::new() };
            make(order[i % n_templates], &mut pools, &schemas.task_name)
        })
        .collect();
    Fixture { kind, schemas, documents }
}

const FILLER: &[&str] = &["and", "then", "later", "we", "saw", "near", "met", "with", "the", "also"];

/// Entity documents of exactly `n_text` tokens for timing studies: for each
/// `k` in `target_counts`, `per_count` sentences carrying `k` single-token
/// entities on even positions among lowercase filler words.
///
/// Panics if `2 * k > n_text` for some `k`.
pub fn target_count_fixture(n_text: usize, target_counts: &[usize], per_count: usize, seed: u64) -> Fixture {
    let schemas = fixture_schemas(TaskKind::Entity);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::new();
    for &k in target_counts {
        assert!(2 * k <= n_text, "{k} targets do not fit {n_text} tokens");
        for _ in 0..per_count {
            let mut b = Builder::new();
            for i in 0..n_text {
                if i % 2 == 0 && i / 2 < k {
                    let (pool, label) = if (i / 2) % 2 == 0 { (FIRST, "Person") } else { (CITY, "Location") };
                    b.typed(pool.choose(&mut rng).expect("non-empty pool"), label);
                } else {
                    b.words(FILLER.choose(&mut rng).expect("non-empty pool"));
                }
            }
            documents.push(b.finish(&schemas.task_name));
        }
    }
    Fixture { kind: TaskKind::Entity, schemas, documents }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [TaskKind; 4] = [TaskKind::Entity, TaskKind::Relation, TaskKind::Event, TaskKind::Sentiment];

    #[test]
    fn target_count_fixture_shape() {
        let f = target_count_fixture(16, &[1, 8], 3, 0);
        assert_eq!(f.documents.len(), 6);
        for (i, d) in f.documents.iter().enumerate() {
            assert_eq!(d.tokens.len(), 16);
            assert_eq!(d.gold.entities.len(), if i < 3 { 1 } else { 8 });
            d.gold.validate(&f.schemas, 16).unwrap();
        }
    }

    #[test]
    fn relation_fixture_has_relations_everywhere() {
        let f = make_fixture(TaskKind::Relation, 8, 1);
        assert_eq!(f.documents.len(), 8);
        assert!(f.documents.iter().all(|d| !d.gold.relations.is_empty()));
        assert!(f.documents.iter().any(|d| d.gold.relations.len() > 1));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        for kind in KINDS {
            assert_eq!(make_fixture(kind, 6, 3), make_fixture(kind, 6, 3));
            assert_ne!(make_fixture(kind, 6, 3), make_fixture(kind, 6, 4));
        }
        assert_eq!(make_fixture(TaskKind::Entity, 1, 0).documents.len(), 1);
    }

    #[test]
    fn gold_is_valid_against_schema() {
        for kind in KINDS {
            let f = make_fixture(kind, 12, 7);
            for d in &f.documents {
                d.gold.validate(&f.schemas, d.tokens.len()).unwrap();
                assert_eq!(d.text, d.tokens.join(" "));
            }
        }
    }

    #[test]
    fn entity_fixture_contains_nested_spans() {
        let f = make_fixture(TaskKind::Entity, 5, 2);
        let nested = f.documents.iter().any(|d| {
            let s = d.gold.spans();
            s.iter().any(|a| s.iter().any(|b| a != b && a.start <= b.start && b.end <= a.end))
        });
        assert!(nested);
    }

    #[test]
    fn event_fixture_has_multi_label_span() {
        let f = make_fixture(TaskKind::Event, 5, 2);
        let multi = f.documents.iter().any(|d| d.gold.entities.len() > d.gold.spans().len());
        assert!(multi);
    }
}
