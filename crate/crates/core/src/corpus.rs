//! Dialogue corpora and granularity units.
//!
//! Ingests parallel dialogue data (JSONL), produces sentence-level units
//! (`<SPEAKER>: <UTTERANCE>`) and document-level units (all turns of one
//! dialogue joined by newlines), assembles token-budget documents, replaces
//! PII placeholders with consistent fake values, and generates synthetic
//! customer-support corpora with planted PII.
//!
//! The PII ledger records target-side insertions only; the leakage metric
//! is defined on the target language and the ledger schema carries a single
//! character range per entry.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use regex::Regex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::pii::PiiCategory;
use crate::rng::{fnv1a64, seeded, STREAM_CORPUS};
use crate::text::token_count;
use crate::{Error, Result};

/// One turn of a dialogue with aligned source and target text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub dialogue_id: String,
    pub turn: u32,
    pub speaker: String,
    pub src: String,
    pub tgt: String,
}

/// Privacy granularity of a training unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Sentence,
    Document,
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Granularity::Sentence => "sentence",
            Granularity::Document => "document",
        })
    }
}

/// One training unit at either granularity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelUnit {
    pub unit_id: String,
    pub granularity: Granularity,
    pub dialogue_id: String,
    pub src: String,
    pub tgt: String,
}

/// Dialogue-level train/val/test split specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

/// One fake-PII insertion (target side).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiLedgerEntry {
    pub dialogue_id: String,
    pub category: PiiCategory,
    pub value: String,
    pub turn: u32,
    pub char_start: usize,
    pub char_end: usize,
}

/// Every PII value planted in a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiLedger {
    pub entries: Vec<PiiLedgerEntry>,
}

impl PiiLedger {
    /// (category, value) pairs that were drawn by more than one dialogue.
    pub fn cross_dialogue_collisions(&self) -> Vec<(PiiCategory, String)> {
        let mut dialogues: BTreeMap<(PiiCategory, &str), Vec<&str>> = BTreeMap::new();
        for e in &self.entries {
            let list = dialogues.entry((e.category, e.value.as_str())).or_default();
            if !list.contains(&e.dialogue_id.as_str()) {
                list.push(&e.dialogue_id);
            }
        }
        dialogues
            .into_iter()
            .filter(|(_, ds)| ds.len() > 1)
            .map(|((cat, value), _)| (cat, value.to_string()))
            .collect()
    }
}

// --- JSONL I/O -------------------------------------------------------------

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item)
            .map_err(|e| Error::InvalidInput(format!("serialize: {e}")))?;
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Load and validate a dialogue corpus: one JSON object per line with
/// fields `dialogue_id`, `turn`, `speaker`, `src`, `tgt`. Output is sorted
/// by (dialogue_id, turn); turn indices must be dense from 0 within each
/// dialogue and texts must be newline-free (documents join on newlines).
pub fn load_jsonl(path: &Path) -> Result<Vec<Utterance>> {
    let mut utterances: Vec<Utterance> = read_jsonl(path)?;
    utterances.sort_by(|a, b| (&a.dialogue_id, a.turn).cmp(&(&b.dialogue_id, b.turn)));
    validate_utterances(&utterances)?;
    Ok(utterances)
}

fn validate_utterances(utterances: &[Utterance]) -> Result<()> {
    let mut expected: BTreeMap<&str, u32> = BTreeMap::new();
    for u in utterances {
        if u.src.contains('\n') || u.tgt.contains('\n') {
            return Err(Error::InvalidInput(format!(
                "dialogue {} turn {}: utterance text must not contain newlines",
                u.dialogue_id, u.turn
            )));
        }
        let next = expected.entry(&u.dialogue_id).or_insert(0);
        if u.turn != *next {
            return Err(Error::InvalidInput(format!(
                "dialogue {}: turn indices not dense, expected {} got {}",
                u.dialogue_id, next, u.turn
            )));
        }
        *next += 1;
    }
    Ok(())
}

// --- Granularity units -----------------------------------------------------

fn speaker_line(speaker: &str, text: &str) -> String {
    format!("{speaker}: {text}")
}

/// One unit per utterance: `<SPEAKER>: <UTTERANCE>` on both sides.
pub fn to_sentence_units(utterances: &[Utterance]) -> Vec<ParallelUnit> {
    utterances
        .iter()
        .map(|u| ParallelUnit {
            unit_id: format!("{}:s{:04}", u.dialogue_id, u.turn),
            granularity: Granularity::Sentence,
            dialogue_id: u.dialogue_id.clone(),
            src: speaker_line(&u.speaker, &u.src),
            tgt: speaker_line(&u.speaker, &u.tgt),
        })
        .collect()
}

/// One unit per dialogue: all speaker-prefixed turns joined by a single
/// newline, same order on both sides.
pub fn to_document_units(utterances: &[Utterance]) -> Vec<ParallelUnit> {
    let mut docs: Vec<ParallelUnit> = Vec::new();
    let mut current: Option<(String, Vec<String>, Vec<String>)> = None;
    for u in utterances {
        match &mut current {
            Some((id, srcs, tgts)) if *id == u.dialogue_id => {
                srcs.push(speaker_line(&u.speaker, &u.src));
                tgts.push(speaker_line(&u.speaker, &u.tgt));
            }
            _ => {
                if let Some((id, srcs, tgts)) = current.take() {
                    docs.push(doc_unit(id, srcs, tgts));
                }
                current = Some((
                    u.dialogue_id.clone(),
                    vec![speaker_line(&u.speaker, &u.src)],
                    vec![speaker_line(&u.speaker, &u.tgt)],
                ));
            }
        }
    }
    if let Some((id, srcs, tgts)) = current {
        docs.push(doc_unit(id, srcs, tgts));
    }
    docs
}

fn doc_unit(dialogue_id: String, srcs: Vec<String>, tgts: Vec<String>) -> ParallelUnit {
    ParallelUnit {
        unit_id: format!("{dialogue_id}:doc"),
        granularity: Granularity::Document,
        dialogue_id,
        src: srcs.join("\n"),
        tgt: tgts.join("\n"),
    }
}

/// Greedily concatenate consecutive sentence pairs into documents until the
/// source-side token count reaches `budget_src_tokens`; the pair that
/// crosses the budget is included and closes the document. Alignment and
/// order are preserved.
pub fn build_token_budget_documents(
    sentence_pairs: &[ParallelUnit],
    budget_src_tokens: usize,
) -> Result<Vec<ParallelUnit>> {
    if budget_src_tokens == 0 {
        return Err(Error::Domain("token budget must be >= 1".into()));
    }
    let mut docs = Vec::new();
    let mut srcs: Vec<&str> = Vec::new();
    let mut tgts: Vec<&str> = Vec::new();
    let mut tokens = 0usize;
    for pair in sentence_pairs {
        srcs.push(&pair.src);
        tgts.push(&pair.tgt);
        tokens += token_count(&pair.src);
        if tokens >= budget_src_tokens {
            docs.push((srcs.join("\n"), tgts.join("\n")));
            srcs.clear();
            tgts.clear();
            tokens = 0;
        }
    }
    if !srcs.is_empty() {
        docs.push((srcs.join("\n"), tgts.join("\n")));
    }
    Ok(docs
        .into_iter()
        .enumerate()
        .map(|(i, (src, tgt))| ParallelUnit {
            unit_id: format!("tbdoc{i:05}"),
            granularity: Granularity::Document,
            dialogue_id: format!("tbdoc{i:05}"),
            src,
            tgt,
        })
        .collect())
}

// --- Fake PII replacement ---------------------------------------------------

/// Language flavor of generated fake values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Locale {
    De,
    En,
}

impl std::str::FromStr for Locale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "de" => Ok(Locale::De),
            "en" => Ok(Locale::En),
            other => Err(Error::InvalidInput(format!("unknown locale {other:?}"))),
        }
    }
}

const FIRST_NAMES_DE: &[&str] = &[
    "Anneliese", "Bastian", "Carla", "Dieter", "Elke", "Frieda", "Gustav", "Hanna", "Ingrid",
    "Jonas", "Katrin", "Lukas", "Marlene", "Norbert", "Ottilie", "Paula", "Quirin", "Renate",
    "Stefan", "Theresa", "Ulrich", "Vera", "Wilhelm", "Xenia", "Yvonne", "Immo", "Albrecht",
    "Beate", "Clemens", "Dorothea", "Emil", "Felicitas", "Gerhard", "Heike", "Jutta", "Konrad",
    "Liselotte", "Matthias", "Nadine", "Oskar", "Petra", "Rainer", "Sabine", "Torsten", "Ursula",
    "Volker", "Wiebke", "Zacharias",
];

// Surnames are compounds of two roots ("Hande" + "hornig" → "Handehornig"),
// so the surname token is effectively unique to its dialogue. The attack
// depends on that: a pooled surname would be trained by other dialogues and
// stop separating members from non-members.
const SURNAME_ROOTS_DE: &[&str] = &[
    "Hande", "Hornig", "Bergen", "Stein", "Wald", "Feld", "Bach", "Brandt", "Holz", "Dorf",
    "Burg", "Thal", "Gruber", "Huber", "Lehn", "Rothe", "Wiese", "Acker", "Linden", "Eber",
    "Falk", "Grim", "Hagen", "Kamp", "Lutz", "Moor", "Nagel", "Oster", "Pfeil", "Quandt",
    "Ritter", "Sommer", "Tann", "Uhl", "Vogt", "Wend", "Ziegler", "Arn", "Bode", "Claus",
    "Dietz", "Ehler", "Frank", "Gans", "Hess", "Iser", "Jahn", "Kern", "Lorch", "Merk", "Noll",
    "Oswald", "Pabst", "Rau", "Seib", "Traut", "Unger", "Voss", "Wulf", "Zorn",
];

const FIRST_NAMES_EN: &[&str] = &[
    "Alice", "Brian", "Clara", "Daniel", "Emma", "Frank", "Grace", "Henry", "Iris", "Jack",
    "Kate", "Liam", "Mia", "Noah", "Olivia", "Peter", "Quinn", "Rachel", "Sam", "Tara",
    "Victor", "Wendy", "Xander", "Yara", "Zoe", "Aaron", "Bella", "Colin", "Daisy", "Ethan",
    "Fiona", "George", "Holly", "Ian", "Julia", "Kevin", "Laura", "Mark", "Nina", "Owen",
    "Paula", "Robert", "Sophie", "Thomas", "Una", "Vera", "Walter", "Yvette",
];

const SURNAME_ROOTS_EN: &[&str] = &[
    "Ash", "Brook", "Dale", "Elm", "Ford", "Gale", "Hale", "Irving", "Kirk", "Lake", "Marsh",
    "North", "Oak", "Penn", "Quill", "Reed", "Stone", "Thorn", "Vale", "Well", "York", "Bell",
    "Cliff", "Dune", "Fern", "Glen", "Heath", "Isle", "Knoll", "Leaf", "Moor", "Nock", "Pike",
    "Ridge", "Shaw", "Tide", "Vine", "Wood", "Bridge", "Combe", "Dell", "Field", "Grove",
    "Hurst", "Land", "Mead", "Nook", "Pool", "Rill", "Shore", "Tor", "Wick", "Burn", "Cross",
    "Down", "Ey", "Fell", "Gate", "Holt", "Mere",
];

const ORG_BASES_DE: &[&str] = &[
    "Suessebier", "Adler", "Linde", "Falke", "Tanne", "Birke", "Eiche", "Anker", "Stern",
    "Krone", "Bruecke", "Muehle", "Quelle", "Feder", "Klinge", "Segel", "Fackel", "Glocke",
    "Kessel", "Baerer", "Habicht", "Reiher", "Marder", "Luchs", "Biber", "Dachs", "Wiesel",
    "Treppe", "Turm", "Giebel", "Speicher", "Werft", "Schmiede", "Kontor", "Lager", "Hafen",
];

const ORG_BASES_EN: &[&str] = &[
    "Northwood", "Brightline", "Oakfield", "Silvergate", "Stonebridge", "Redwood", "Clearwater",
    "Ironhill", "Bluepeak", "Fairhaven", "Goldleaf", "Greystone", "Harborview", "Kingsmill",
    "Lakeshore", "Mapleton", "Nightingale", "Overbrook", "Pinecrest", "Quarryside", "Riverton",
    "Saltmarsh", "Thornbury", "Updale", "Vanguard", "Westbrook", "Yellowfield", "Ashgrove",
    "Birchwood", "Cedarline", "Dunmore", "Elmsworth", "Foxglove", "Glenview", "Hollybank",
    "Ivydale",
];

const ORG_SUFFIXES_DE: &[&str] = &["GmbH", "AG", "KG"];
const ORG_SUFFIXES_EN: &[&str] = &["Ltd", "Inc", "Co"];
const EMAIL_DOMAINS_DE: &[&str] = &["web.de", "gmx.de", "posteo.de"];
const EMAIL_DOMAINS_EN: &[&str] = &["mail.com", "inbox.com", "post.com"];

/// ASCII-fold the German characters that appear in the value pools; used
/// for email local parts and URL slugs where the detector regexes are
/// ASCII-only.
fn asciify(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            'ä' => out.push_str("ae"),
            'ö' => out.push_str("oe"),
            'ü' => out.push_str("ue"),
            'Ä' => out.push_str("Ae"),
            'Ö' => out.push_str("Oe"),
            'Ü' => out.push_str("Ue"),
            'ß' => out.push_str("ss"),
            other => out.push(other),
        }
    }
    out
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn digits<R: Rng>(rng: &mut R, n: usize) -> String {
    let mut s = String::with_capacity(n);
    s.push(char::from(b'1' + rng.random_range(0..9u8)));
    for _ in 1..n {
        s.push(char::from(b'0' + rng.random_range(0..10u8)));
    }
    s
}

/// The deterministic fake value for one placeholder kind in one dialogue.
/// EMAIL reuses the dialogue's NAME and URL its PRS_ORG, the way real
/// support conversations tie contact data to one customer.
fn fake_value(kind: &str, dialogue_id: &str, locale: Locale, seed: u64) -> Result<String> {
    let key = format!("{seed}|{dialogue_id}|{kind}");
    let mut rng = seeded(fnv1a64(key.as_bytes()), STREAM_CORPUS);
    let (firsts, roots, orgs, suffixes, domains, tld, country) = match locale {
        Locale::De => (
            FIRST_NAMES_DE,
            SURNAME_ROOTS_DE,
            ORG_BASES_DE,
            ORG_SUFFIXES_DE,
            EMAIL_DOMAINS_DE,
            "de",
            "49",
        ),
        Locale::En => (
            FIRST_NAMES_EN,
            SURNAME_ROOTS_EN,
            ORG_BASES_EN,
            ORG_SUFFIXES_EN,
            EMAIL_DOMAINS_EN,
            "com",
            "1",
        ),
    };
    let value = match kind {
        "NAME" => {
            let first = pick(&mut rng, firsts);
            let a = pick(&mut rng, roots);
            let b = pick(&mut rng, roots).to_lowercase();
            format!("{first} {a}{b}")
        }
        "PRS_ORG" => format!("{} {}", pick(&mut rng, orgs), pick(&mut rng, suffixes)),
        "EMAIL" => {
            let name = fake_value("NAME", dialogue_id, locale, seed)?;
            let (first, last) = name.split_once(' ').expect("names have two words");
            format!(
                "{}.{}@{}",
                asciify(first).to_lowercase(),
                asciify(last).to_lowercase(),
                pick(&mut rng, domains)
            )
        }
        "URL" => {
            let org = fake_value("PRS_ORG", dialogue_id, locale, seed)?;
            let (base, _) = org.split_once(' ').expect("orgs have two words");
            format!("http://www.{}.{tld}/", asciify(base).to_lowercase())
        }
        "PHONE" => format!("+{country}-{}-{}", digits(&mut rng, 2), digits(&mut rng, 7)),
        "ORDER" => digits(&mut rng, 9),
        other => return Err(Error::UnknownPlaceholder(other.to_string())),
    };
    Ok(value)
}

fn placeholder_category(kind: &str) -> Result<PiiCategory> {
    match kind {
        "NAME" => Ok(PiiCategory::Person),
        "PRS_ORG" => Ok(PiiCategory::Org),
        "EMAIL" => Ok(PiiCategory::Email),
        "URL" => Ok(PiiCategory::Url),
        "PHONE" => Ok(PiiCategory::Phone),
        "ORDER" => Ok(PiiCategory::OrderNumber),
        other => Err(Error::UnknownPlaceholder(other.to_string())),
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#([A-Z_]+)#").unwrap())
}

/// Replace `#NAME#`-style placeholders with fake values. The same
/// placeholder always maps to the same value within a dialogue; different
/// dialogues draw independently (collisions possible, see
/// [`PiiLedger::cross_dialogue_collisions`]). Target-side insertions are
/// recorded in the ledger with character offsets into the replaced text.
pub fn replace_pii(
    utterances: &[Utterance],
    locale: Locale,
    seed: u64,
) -> Result<(Vec<Utterance>, PiiLedger)> {
    let mut out = Vec::with_capacity(utterances.len());
    let mut ledger = PiiLedger::default();
    for u in utterances {
        let (src, _) = replace_in_text(&u.src, &u.dialogue_id, locale, seed)?;
        let (tgt, spans) = replace_in_text(&u.tgt, &u.dialogue_id, locale, seed)?;
        for (kind, value, start, end) in spans {
            ledger.entries.push(PiiLedgerEntry {
                dialogue_id: u.dialogue_id.clone(),
                category: placeholder_category(&kind)?,
                value,
                turn: u.turn,
                char_start: start,
                char_end: end,
            });
        }
        out.push(Utterance {
            src,
            tgt,
            ..u.clone()
        });
    }
    Ok((out, ledger))
}

type ReplacedSpan = (String, String, usize, usize);

fn replace_in_text(
    text: &str,
    dialogue_id: &str,
    locale: Locale,
    seed: u64,
) -> Result<(String, Vec<ReplacedSpan>)> {
    let mut out = String::with_capacity(text.len());
    let mut spans = Vec::new();
    let mut cursor = 0;
    for caps in placeholder_re().captures_iter(text) {
        let m = caps.get(0).unwrap();
        let kind = caps.get(1).unwrap().as_str();
        let value = fake_value(kind, dialogue_id, locale, seed)?;
        out.push_str(&text[cursor..m.start()]);
        let start = out.len();
        out.push_str(&value);
        spans.push((kind.to_string(), value, start, out.len()));
        cursor = m.end();
    }
    out.push_str(&text[cursor..]);
    Ok((out, spans))
}

// --- Synthetic corpus --------------------------------------------------------

struct Template {
    src: &'static str,
    tgt: &'static str,
}

const OPENING_PII: Template = Template {
    src: "guten tag , mein name ist #NAME# .",
    tgt: "good day , my name is #NAME# .",
};
const OPENING_PLAIN: Template = Template {
    src: "guten tag , ich habe eine frage .",
    tgt: "good day , i have a question .",
};
const GREET_PII: Template = Template {
    src: "hallo #NAME# , wie kann ich ihnen helfen ?",
    tgt: "hello #NAME# , how can i help you ?",
};
const GREET_PLAIN: Template = Template {
    src: "hallo , wie kann ich ihnen helfen ?",
    tgt: "hello , how can i help you ?",
};
const CLOSING_PII: Template = Template {
    src: "vielen dank #NAME# , einen schönen tag noch .",
    tgt: "thank you #NAME# , have a nice day .",
};
const CLOSING_PLAIN: Template = Template {
    src: "vielen dank , einen schönen tag noch .",
    tgt: "thank you , have a nice day .",
};

const PII_MIDDLES: &[Template] = &[
    Template {
        src: "ich habe ein problem mit der bestellung #ORDER# .",
        tgt: "i have a problem with the order #ORDER# .",
    },
    Template {
        src: "ihre bestellung #ORDER# ist unterwegs .",
        tgt: "your order #ORDER# is on the way .",
    },
    Template {
        src: "bitte senden sie die rechnung an #EMAIL# .",
        tgt: "please send the invoice to #EMAIL# .",
    },
    Template {
        src: "besuchen sie #URL# für mehr informationen .",
        tgt: "visit #URL# for more information .",
    },
    Template {
        src: "sie erreichen uns unter #PHONE# .",
        tgt: "you can reach us at #PHONE# .",
    },
    Template {
        src: "die lieferung kommt von #PRS_ORG# .",
        tgt: "the delivery comes from #PRS_ORG# .",
    },
    Template {
        src: "vielen dank #NAME# , wir kümmern uns darum .",
        tgt: "thank you #NAME# , we will take care of it .",
    },
];

const PLAIN_MIDDLES: &[Template] = &[
    Template {
        src: "die {c} {i} ist nicht angekommen .",
        tgt: "the {c} {i} has not arrived .",
    },
    Template {
        src: "möchten sie die {c} {i} zurückgeben ?",
        tgt: "would you like to return the {c} {i} ?",
    },
    Template {
        src: "wir prüfen den status ihrer lieferung .",
        tgt: "we are checking the status of your delivery .",
    },
    Template {
        src: "vielen dank für ihre geduld .",
        tgt: "thank you for your patience .",
    },
    Template {
        src: "ich suche eine {c} {i} für mein büro .",
        tgt: "i am looking for a {c} {i} for my office .",
    },
    Template {
        src: "die {c} {i} ist wieder auf lager .",
        tgt: "the {c} {i} is back in stock .",
    },
    Template {
        src: "können sie das bitte prüfen ?",
        tgt: "can you please check that ?",
    },
    Template {
        src: "das tut mir leid , einen moment bitte .",
        tgt: "i am sorry about that , one moment please .",
    },
];

const COLORS: &[(&str, &str)] = &[
    ("rote", "red"),
    ("blaue", "blue"),
    ("grüne", "green"),
    ("gelbe", "yellow"),
    ("schwarze", "black"),
    ("weisse", "white"),
    ("braune", "brown"),
    ("graue", "gray"),
];

const ITEMS: &[(&str, &str)] = &[
    ("lampe", "lamp"),
    ("tischplatte", "table"),
    ("stuhllehne", "chair"),
    ("regalwand", "shelf"),
    ("sofadecke", "sofa"),
    ("teppichrolle", "carpet"),
    ("spiegeltür", "mirror"),
    ("schrankwand", "cabinet"),
    ("kissenhülle", "pillow"),
    ("vorhangschiene", "curtain"),
];

fn fill_product_slots<R: Rng>(rng: &mut R, tpl: &Template) -> (String, String) {
    if tpl.src.contains("{c}") {
        let (c_src, c_tgt) = COLORS[rng.random_range(0..COLORS.len())];
        let (i_src, i_tgt) = ITEMS[rng.random_range(0..ITEMS.len())];
        (
            tpl.src.replace("{c}", c_src).replace("{i}", i_src),
            tpl.tgt.replace("{c}", c_tgt).replace("{i}", i_tgt),
        )
    } else {
        (tpl.src.to_string(), tpl.tgt.to_string())
    }
}

/// Generate a template-driven customer-support corpus (toy German→English)
/// with planted fake PII. Each PII-bearing dialogue mentions its name
/// entity in at least two distinct turns, mirroring the sentence-dependence
/// pattern of real support dialogues. `pii_density` is the probability that
/// a dialogue carries PII at all.
pub fn synth_corpus(
    n_dialogues: usize,
    turns: RangeInclusive<u32>,
    pii_density: f64,
    seed: u64,
) -> Result<(Vec<Utterance>, PiiLedger)> {
    if n_dialogues == 0 {
        return Err(Error::Domain("n_dialogues must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&pii_density) {
        return Err(Error::Domain(format!(
            "pii_density must be in [0, 1], got {pii_density}"
        )));
    }
    if turns.is_empty() || *turns.start() < 2 {
        return Err(Error::Domain(
            "turns range must be non-empty with at least 2 turns".into(),
        ));
    }

    let mut raw = Vec::new();
    for d in 0..n_dialogues {
        let dialogue_id = format!("d{d:04}");
        let mut rng = seeded(seed ^ fnv1a64(dialogue_id.as_bytes()), STREAM_CORPUS);
        let n_turns = rng.random_range(*turns.start()..=*turns.end());
        let with_pii = rng.random::<f64>() < pii_density;

        // middle turns: a shuffled mix of distinct PII templates and
        // product smalltalk
        let n_middle = n_turns.saturating_sub(if n_turns >= 3 { 3 } else { 2 }) as usize;
        let mut middles: Vec<(String, String)> = Vec::with_capacity(n_middle);
        if with_pii {
            let mut pii_order: Vec<usize> = (0..PII_MIDDLES.len()).collect();
            pii_order.shuffle(&mut rng);
            let n_pii = pii_order.len().min(n_middle.min(5).max(3)).min(n_middle);
            for &idx in pii_order.iter().take(n_pii) {
                middles.push(fill_product_slots(&mut rng, &PII_MIDDLES[idx]));
            }
        }
        while middles.len() < n_middle {
            let tpl = &PLAIN_MIDDLES[rng.random_range(0..PLAIN_MIDDLES.len())];
            middles.push(fill_product_slots(&mut rng, tpl));
        }
        middles.shuffle(&mut rng);

        let mut lines: Vec<(String, String)> = Vec::with_capacity(n_turns as usize);
        let opening = if with_pii { &OPENING_PII } else { &OPENING_PLAIN };
        lines.push((opening.src.to_string(), opening.tgt.to_string()));
        if n_turns >= 3 {
            let greet = if with_pii { &GREET_PII } else { &GREET_PLAIN };
            lines.push((greet.src.to_string(), greet.tgt.to_string()));
        }
        lines.extend(middles);
        let closing = if with_pii { &CLOSING_PII } else { &CLOSING_PLAIN };
        lines.push((closing.src.to_string(), closing.tgt.to_string()));

        for (turn, (src, tgt)) in lines.into_iter().enumerate() {
            let speaker = if turn % 2 == 0 { "Customer" } else { "Agent" };
            raw.push(Utterance {
                dialogue_id: dialogue_id.clone(),
                turn: turn as u32,
                speaker: speaker.to_string(),
                src,
                tgt,
            });
        }
    }

    replace_pii(&raw, Locale::De, seed)
}

// --- Splits ------------------------------------------------------------------

/// Distinct dialogue ids in first-appearance order.
pub fn dialogue_ids(utterances: &[Utterance]) -> Vec<String> {
    let mut ids = Vec::new();
    for u in utterances {
        if ids.last() != Some(&u.dialogue_id) && !ids.contains(&u.dialogue_id) {
            ids.push(u.dialogue_id.clone());
        }
    }
    ids
}

/// Largest number of utterances in any single dialogue.
pub fn max_utterances_per_dialogue(utterances: &[Utterance]) -> u64 {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for u in utterances {
        *counts.entry(&u.dialogue_id).or_insert(0) += 1;
    }
    counts.values().copied().max().unwrap_or(0)
}

/// Partition dialogues into train/val/test. Deterministic under the split
/// seed; utterances of one dialogue never straddle splits.
pub fn split(
    dialogues: &[String],
    spec: &SplitSpec,
) -> Result<(Vec<String>, Vec<String>, Vec<String>)> {
    for f in [spec.train, spec.val, spec.test] {
        if !(f > 0.0) {
            return Err(Error::Domain(format!("split fractions must be positive, got {f}")));
        }
    }
    if (spec.train + spec.val + spec.test - 1.0).abs() > 1e-9 {
        return Err(Error::Domain("split fractions must sum to 1".into()));
    }
    let n = dialogues.len();
    let mut shuffled = dialogues.to_vec();
    let mut rng = seeded(spec.seed, STREAM_CORPUS);
    shuffled.shuffle(&mut rng);
    let n_train = (spec.train * n as f64).round() as usize;
    let n_val = (spec.val * n as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidInput(format!(
            "too few dialogues ({n}) for three non-empty splits"
        )));
    }
    let train = shuffled[..n_train].to_vec();
    let val = shuffled[n_train..n_train + n_val].to_vec();
    let test = shuffled[n_train + n_val..].to_vec();
    Ok((train, val, test))
}

/// Units whose dialogue is in the given id set, in input order.
pub fn units_in_dialogues(units: &[ParallelUnit], ids: &[String]) -> Vec<ParallelUnit> {
    let set: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
    units
        .iter()
        .filter(|u| set.contains(u.dialogue_id.as_str()))
        .cloned()
        .collect()
}
