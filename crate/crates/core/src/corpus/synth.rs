//! Seeded desk-scale corpora shaped like a life-science and a social-science
//! academic search site.
//!
//! Text is drawn from per-topic vocabularies plus a shared filler vocabulary,
//! so term overlap between a query and a record is meaningful and graded
//! relevance can be derived from it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CorpusError, HeadQuerySet, Record, RecordKind};
use crate::rng::{mix_seed, SplitMix64};

/// Number of head queries (and head seed items) generated per site.
pub const HEAD_QUERIES: usize = 50;

/// Full-size social-science collection: publications and research datasets.
pub const SOCIAL_SCIENCE_PUBLICATIONS: u64 = 95_000;
pub const SOCIAL_SCIENCE_DATASETS: u64 = 84_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteProfile {
    /// Publications only. `scale` is the number of records to generate.
    LifeScience,
    /// Publications and research data. `scale` is the down-sampling divisor
    /// applied to the full collection size (100 gives 950 + 840 records).
    SocialScience,
}

impl SiteProfile {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "life_science" => Some(SiteProfile::LifeScience),
            "social_science" => Some(SiteProfile::SocialScience),
            _ => None,
        }
    }

    /// `(publications, research_data)` generated for `scale`.
    pub fn record_counts(self, scale: u64) -> (u64, u64) {
        match self {
            SiteProfile::LifeScience => (scale, 0),
            SiteProfile::SocialScience => (
                div_round(SOCIAL_SCIENCE_PUBLICATIONS, scale).max(1),
                div_round(SOCIAL_SCIENCE_DATASETS, scale).max(1),
            ),
        }
    }
}

fn div_round(n: u64, d: u64) -> u64 {
    (n + d / 2) / d
}

#[derive(Debug, Clone)]
pub struct SyntheticSite {
    pub records: Vec<Record>,
    /// Head queries for ad-hoc retrieval.
    pub queries: HeadQuerySet,
    /// Head seed publications for dataset recommendation (empty when the
    /// site has no research data).
    pub head_items: HeadQuerySet,
}

struct Topic {
    label: &'static str,
    words: &'static [&'static str],
}

const LIFE_TOPICS: &[Topic] = &[
    Topic { label: "oncology", words: &["tumor", "cancer", "carcinoma", "metastasis", "chemotherapy", "oncogene", "lymphoma", "radiotherapy", "biopsy", "malignant", "leukemia", "melanoma"] },
    Topic { label: "virology", words: &["virus", "viral", "influenza", "coronavirus", "covid", "vaccine", "antiviral", "replication", "antibody", "pandemic", "infection", "rna"] },
    Topic { label: "cardiology", words: &["cardiac", "heart", "hypertension", "arrhythmia", "coronary", "myocardial", "infarction", "stroke", "cholesterol", "vascular", "artery", "atrial"] },
    Topic { label: "neurology", words: &["neuron", "brain", "cognitive", "dementia", "alzheimer", "parkinson", "synaptic", "cortex", "epilepsy", "neural", "dopamine", "seizure"] },
    Topic { label: "nutrition", words: &["diet", "nutrition", "vitamin", "obesity", "protein", "dietary", "calorie", "micronutrient", "fiber", "supplement", "fasting", "breastfeeding"] },
    Topic { label: "agriculture", words: &["crop", "soil", "wheat", "maize", "yield", "irrigation", "fertilizer", "harvest", "pesticide", "agronomy", "rice", "tillage"] },
    Topic { label: "environmental health", words: &["climate", "pollution", "emission", "ecosystem", "biodiversity", "groundwater", "contamination", "wastewater", "ozone", "sediment", "habitat", "particulate"] },
    Topic { label: "genetics", words: &["gene", "genome", "mutation", "sequencing", "allele", "expression", "chromosome", "transcription", "crispr", "polymorphism", "epigenetic", "dna"] },
    Topic { label: "immunology", words: &["immune", "cytokine", "lymphocyte", "inflammation", "autoimmune", "macrophage", "antigen", "allergy", "interleukin", "immunotherapy", "tolerance", "complement"] },
    Topic { label: "microbiology", words: &["bacteria", "bacterial", "microbiome", "antibiotic", "resistance", "pathogen", "strain", "biofilm", "salmonella", "fungal", "probiotic", "plasmid"] },
    Topic { label: "pharmacology", words: &["drug", "dose", "pharmacokinetics", "placebo", "efficacy", "receptor", "inhibitor", "compound", "adverse", "bioavailability", "agonist", "formulation"] },
    Topic { label: "epidemiology", words: &["cohort", "prevalence", "incidence", "mortality", "risk", "population", "surveillance", "outbreak", "morbidity", "screening", "registry", "exposure"] },
    Topic { label: "endocrinology", words: &["diabetes", "insulin", "glucose", "thyroid", "hormone", "endocrine", "glycemic", "pancreatic", "cortisol", "estrogen", "metabolic", "adipose"] },
    Topic { label: "veterinary medicine", words: &["cattle", "poultry", "veterinary", "swine", "dairy", "canine", "equine", "zoonotic", "herd", "avian", "livestock", "welfare"] },
    Topic { label: "toxicology", words: &["toxicity", "toxic", "heavy", "metals", "lead", "mercury", "arsenic", "carcinogen", "mycotoxin", "residue", "detoxification", "dioxin"] },
    Topic { label: "public health", words: &["prevention", "intervention", "health", "community", "promotion", "disparities", "vaccination", "smoking", "alcohol", "policy", "access", "literacy"] },
];

const SOCIAL_TOPICS: &[Topic] = &[
    Topic { label: "migration", words: &["migration", "migrants", "refugees", "integration", "asylum", "immigrant", "diaspora", "citizenship", "ethnic", "border", "remittances", "naturalization"] },
    Topic { label: "labour market", words: &["employment", "unemployment", "labour", "wages", "occupation", "workforce", "job", "income", "precarious", "career", "skills", "earnings"] },
    Topic { label: "education", words: &["education", "school", "students", "teachers", "attainment", "university", "curriculum", "tertiary", "pupils", "learning", "vocational", "literacy"] },
    Topic { label: "social inequality", words: &["inequality", "poverty", "stratification", "class", "wealth", "deprivation", "welfare", "redistribution", "gap", "disadvantage", "exclusion", "mobility"] },
    Topic { label: "political participation", words: &["voting", "elections", "parties", "political", "participation", "democracy", "populism", "trust", "parliament", "ideology", "turnout", "polarization"] },
    Topic { label: "family", words: &["family", "marriage", "fertility", "divorce", "parenting", "childcare", "household", "cohabitation", "children", "gender", "partnership", "kinship"] },
    Topic { label: "religion", words: &["religion", "religious", "church", "secularization", "faith", "belief", "islam", "christianity", "worship", "spirituality", "denomination", "clergy"] },
    Topic { label: "media use", words: &["media", "internet", "television", "news", "digital", "online", "communication", "journalism", "audience", "platforms", "misinformation", "smartphone"] },
    Topic { label: "health and wellbeing", words: &["wellbeing", "mental", "stress", "depression", "happiness", "satisfaction", "lifestyle", "healthcare", "loneliness", "anxiety", "resilience", "illness"] },
    Topic { label: "environmental attitudes", words: &["climate", "environmental", "attitudes", "sustainability", "energy", "concern", "green", "consumption", "recycling", "pollution", "behaviour", "emissions"] },
    Topic { label: "crime and justice", words: &["crime", "victimization", "police", "violence", "delinquency", "justice", "punishment", "fear", "offending", "prison", "juvenile", "deviance"] },
    Topic { label: "ageing", words: &["ageing", "elderly", "pension", "longevity", "care", "grandparents", "intergenerational", "frailty", "widowhood", "retirement", "caregiving", "oldage"] },
];

const FILLER: &[&str] = &[
    "study", "analysis", "effect", "effects", "results", "method", "role", "association",
    "evaluation", "review", "model", "data", "response", "outcomes", "factors", "development",
    "impact", "novel", "approach", "assessment", "comparison", "case", "report", "systematic",
    "randomized", "controlled", "evidence", "longitudinal", "quantitative", "survey", "in", "of",
    "the", "and", "for", "with", "among", "during", "after", "between", "on", "using", "from",
    "a", "new", "changes", "trends", "germany", "europe", "determinants",
];

const SURNAMES: &[&str] = &[
    "Müller", "Schmidt", "Schneider", "Fischer", "Weber", "Meyer", "Wagner", "Becker", "Schulz",
    "Hoffmann", "Koch", "Richter", "Klein", "Wolf", "Neumann", "Schwarz", "Smith", "Garcia",
    "Martin", "Rossi", "Dubois", "Silva", "Kowalski", "Nielsen", "Jansen", "Novak", "Lopez",
    "Brown", "Wilson", "Santos",
];

const JOURNALS: &[&str] = &[
    "Journal of Clinical Research", "BMC Public Health", "Nutrients", "PLoS One",
    "Frontiers in Medicine", "Environmental Research", "Agricultural Systems",
    "European Journal of Epidemiology", "Scientific Reports", "Deutsches Ärzteblatt",
];

const DATATYPES: &[&str] = &["survey data", "panel data", "register data", "interview transcripts", "aggregate data"];

const COLLECTION_METHODS: &[&str] = &[
    "face-to-face interview", "telephone interview (CATI)", "web survey (CAWI)",
    "self-administered questionnaire", "administrative records",
];

const STUDY_SERIES: &[&str] = &[
    "German General Social Survey", "European Social Survey", "International Social Survey Programme",
    "European Values Study", "Socio-Economic Panel", "Eurobarometer", "Politbarometer",
    "German Longitudinal Election Study",
];

/// Generate a site deterministically from `(profile, scale, seed)`.
pub fn generate(profile: SiteProfile, scale: u64, seed: u64) -> Result<SyntheticSite, CorpusError> {
    if scale == 0 {
        return Err(CorpusError::InvalidField {
            field: "scale",
            reason: "must be at least 1".into(),
        });
    }
    let (publications, datasets) = profile.record_counts(scale);
    let topics = match profile {
        SiteProfile::LifeScience => LIFE_TOPICS,
        SiteProfile::SocialScience => SOCIAL_TOPICS,
    };
    let mut gen = Generator {
        rng: SplitMix64::new(mix_seed(seed, 0x5eed)),
        topics,
        profile,
    };
    let mut records = Vec::with_capacity((publications + datasets) as usize);
    for i in 0..publications {
        records.push(gen.publication(i));
    }
    for i in 0..datasets {
        records.push(gen.dataset(i));
    }

    let queries = gen.head_queries()?;
    let head_items = if datasets > 0 {
        gen.head_items(&records)?
    } else {
        HeadQuerySet::default()
    };
    Ok(SyntheticSite {
        records,
        queries,
        head_items,
    })
}

struct Generator {
    rng: SplitMix64,
    topics: &'static [Topic],
    profile: SiteProfile,
}

impl Generator {
    fn pick_topics(&mut self) -> Vec<usize> {
        let n = self.topics.len() as u64;
        let mut chosen = vec![self.rng.below(n) as usize];
        for p in [0.5, 0.2] {
            if self.rng.bernoulli(p) {
                let t = self.rng.below(n) as usize;
                if !chosen.contains(&t) {
                    chosen.push(t);
                }
            }
        }
        chosen
    }

    /// One word: mostly from the primary topic, some from secondary topics,
    /// the rest filler.
    fn word(&mut self, topics: &[usize], topical: f64) -> &'static str {
        let u = self.rng.next_f64();
        if u < topical {
            let topic = if topics.len() > 1 && self.rng.bernoulli(0.25) {
                topics[1 + self.rng.below(topics.len() as u64 - 1) as usize]
            } else {
                topics[0]
            };
            self.rng.choose(self.topics[topic].words).copied().unwrap_or("study")
        } else {
            self.rng.choose(FILLER).copied().unwrap_or("study")
        }
    }

    fn title(&mut self, topics: &[usize]) -> String {
        let len = self.rng.range_inclusive(4, 8) as usize;
        let mut words: Vec<&str> = Vec::with_capacity(len);
        let mut attempts = 0;
        while words.len() < len && attempts < len * 4 {
            attempts += 1;
            let w = self.word(topics, 0.8);
            if !words.contains(&w) {
                words.push(w);
            }
        }
        capitalize(&words.join(" "))
    }

    fn abstract_text(&mut self, topics: &[usize]) -> String {
        if self.rng.bernoulli(0.05) {
            return String::new();
        }
        let len = self.rng.range_inclusive(20, 60) as usize;
        let mut sentences = Vec::new();
        let mut remaining = len;
        while remaining > 0 {
            let n = (self.rng.range_inclusive(8, 14) as usize).min(remaining);
            let words: Vec<&str> = (0..n).map(|_| self.word(topics, 0.6)).collect();
            sentences.push(format!("{}.", capitalize(&words.join(" "))));
            remaining -= n;
        }
        sentences.join(" ")
    }

    fn authors(&mut self) -> String {
        let n = self.rng.range_inclusive(1, 4);
        (0..n)
            .map(|_| {
                let surname = self.rng.choose(SURNAMES).copied().unwrap_or("Smith");
                let initial = (b'A' + self.rng.below(26) as u8) as char;
                format!("{surname}, {initial}.")
            })
            .collect::<Vec<_>>()
            .join("; ")
    }

    fn year(&mut self, span: f64) -> i32 {
        let u = self.rng.next_f64();
        2020 - (span * u * u).floor() as i32
    }

    fn language(&mut self) -> &'static str {
        let u = self.rng.next_f64();
        match self.profile {
            SiteProfile::LifeScience => match u {
                u if u < 0.90 => "en",
                u if u < 0.96 => "de",
                u if u < 0.98 => "fr",
                u if u < 0.99 => "es",
                _ => "pt",
            },
            SiteProfile::SocialScience => {
                if u < 0.6 {
                    "en"
                } else {
                    "de"
                }
            }
        }
    }

    fn topic_labels(&self, topics: &[usize]) -> BTreeSet<String> {
        topics
            .iter()
            .map(|&t| self.topics[t].label.to_owned())
            .collect()
    }

    fn publication(&mut self, i: u64) -> Record {
        let topics = self.pick_topics();
        let id = match self.profile {
            SiteProfile::LifeScience => format!("LS-{:08}", i + 1),
            SiteProfile::SocialScience => format!("SP-{:06}", i + 1),
        };
        let mut record = Record::new(id, RecordKind::Publication, self.title(&topics));
        record.abstract_text = self.abstract_text(&topics);
        record.topics = self.topic_labels(&topics);
        record.language = self.language().to_owned();
        record.year = Some(self.year(match self.profile {
            SiteProfile::LifeScience => 70.0,
            SiteProfile::SocialScience => 50.0,
        }));
        let authors = self.authors();
        record.extra.insert("authors".into(), authors);
        if self.profile == SiteProfile::LifeScience {
            let journal = self.rng.choose(JOURNALS).copied().unwrap_or("PLoS One");
            record.extra.insert("journal".into(), journal.into());
        }
        record
    }

    fn dataset(&mut self, i: u64) -> Record {
        let topics = self.pick_topics();
        let series = self.rng.choose(STUDY_SERIES).copied().unwrap_or("Survey");
        let year = self.year(50.0);
        let title = format!("{series} {year}: {}", self.title(&topics).to_lowercase());
        let mut record = Record::new(format!("SD-{:06}", i + 1), RecordKind::ResearchData, title);
        record.abstract_text = self.abstract_text(&topics);
        record.topics = self.topic_labels(&topics);
        record.language = self.language().to_owned();
        record.year = Some(year);
        let datatype = self.rng.choose(DATATYPES).copied().unwrap_or("survey data");
        let method = self
            .rng
            .choose(COLLECTION_METHODS)
            .copied()
            .unwrap_or("web survey (CAWI)");
        let investigators = self.authors();
        record.extra.insert("datatype".into(), datatype.into());
        record.extra.insert("collection_method".into(), method.into());
        record
            .extra
            .insert("primary_investigators".into(), investigators);
        record
    }

    fn head_queries(&mut self) -> Result<HeadQuerySet, CorpusError> {
        let mut texts: Vec<String> = Vec::with_capacity(HEAD_QUERIES);
        while texts.len() < HEAD_QUERIES {
            let topic = &self.topics[self.rng.below(self.topics.len() as u64) as usize];
            let n = match self.rng.next_f64() {
                u if u < 0.3 => 1,
                u if u < 0.8 => 2,
                _ => 3,
            };
            let mut words = topic.words.to_vec();
            self.rng.shuffle(&mut words);
            let text = words[..n].join(" ");
            if !texts.contains(&text) {
                texts.push(text);
            }
        }
        HeadQuerySet::from_pairs(
            texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| (format!("q{:03}", i + 1), t)),
        )
    }

    fn head_items(&mut self, records: &[Record]) -> Result<HeadQuerySet, CorpusError> {
        let mut candidates: Vec<&Record> = records
            .iter()
            .filter(|r| r.kind == RecordKind::Publication && !r.topics.is_empty())
            .collect();
        self.rng.shuffle(&mut candidates);
        HeadQuerySet::from_pairs(
            candidates
                .into_iter()
                .take(HEAD_QUERIES)
                .map(|r| (r.id.clone(), r.title.clone())),
        )
    }
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}
