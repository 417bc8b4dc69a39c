use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a term inside a [`Lexicon`]: category index and term index
/// within that category, both in lexicon order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId {
    pub category: usize,
    pub term: usize,
}

/// A lexicon term found in a token sequence, spanning `len` tokens from `start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TermMatch {
    pub start: usize,
    pub len: usize,
    pub id: TermId,
}

/// Categories of identity terms. Categories are kept in name order; terms in
/// each category keep file order. Multi-word terms are matched as contiguous
/// token runs, longest first.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<String, Vec<String>>",
    into = "BTreeMap<String, Vec<String>>"
)]
pub struct Lexicon {
    categories: Vec<(String, Vec<String>)>,
    index: HashMap<String, TermId>,
    longest: usize,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.categories == other.categories
    }
}

const BUILTIN: &[(&str, &[&str])] = &[
    (
        "gender",
        &[
            "lesbian",
            "gay",
            "bisexual",
            "transgender",
            "trans",
            "queer",
            "lgbt",
            "lgbtq",
            "homosexual",
            "straight",
            "heterosexual",
            "male",
            "female",
            "nonbinary",
        ],
    ),
    (
        "race",
        &[
            "african",
            "african american",
            "black",
            "white",
            "european",
            "hispanic",
            "latino",
            "latina",
            "latinx",
            "mexican",
            "canadian",
            "american",
            "asian",
            "indian",
            "middle eastern",
            "chinese",
            "japanese",
        ],
    ),
    (
        "religion",
        &[
            "christian",
            "muslim",
            "jewish",
            "buddhist",
            "catholic",
            "protestant",
            "sikh",
            "taoist",
            "atheist",
        ],
    ),
    (
        "age",
        &[
            "old",
            "older",
            "young",
            "younger",
            "teenage",
            "millennial",
            "middle aged",
            "elderly",
        ],
    ),
];

impl Lexicon {
    /// The 48 identity terms in four categories: gender, race, religion, age.
    pub fn builtin() -> Self {
        let map = BUILTIN
            .iter()
            .map(|(c, terms)| (c.to_string(), terms.iter().map(|t| t.to_string()).collect()))
            .collect::<BTreeMap<_, _>>();
        Lexicon::try_from(map).expect("built-in lexicon is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.categories.iter().map(|(c, t)| (c.as_str(), t.as_slice()))
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn term_count(&self) -> usize {
        self.categories.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn category_name(&self, category: usize) -> &str {
        &self.categories[category].0
    }

    pub fn category_index(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|(c, _)| c == name)
    }

    pub fn terms(&self, category: usize) -> &[String] {
        &self.categories[category].1
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.categories[id.category].1[id.term]
    }

    pub fn lookup(&self, term: &str) -> Option<TermId> {
        self.index.get(&term.to_lowercase()).copied()
    }

    /// Greedy left-to-right scan preferring the longest term at each position.
    pub fn find_terms(&self, tokens: &[String]) -> Vec<TermMatch> {
        let mut found = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut matched = None;
            for len in (1..=self.longest.min(tokens.len() - i)).rev() {
                let key = tokens[i..i + len].join(" ");
                if let Some(&id) = self.index.get(&key) {
                    matched = Some(TermMatch { start: i, len, id });
                    break;
                }
            }
            match matched {
                Some(m) => {
                    found.push(m);
                    i += m.len;
                }
                None => i += 1,
            }
        }
        found
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for Lexicon {
    type Error = Error;

    fn try_from(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::Lexicon("no categories".into()));
        }
        let mut categories = Vec::with_capacity(map.len());
        let mut index = HashMap::new();
        let mut longest = 1;
        for (c, (name, terms)) in map.into_iter().enumerate() {
            if terms.is_empty() {
                return Err(Error::Lexicon(format!("category `{name}` is empty")));
            }
            let mut normalized = Vec::with_capacity(terms.len());
            for (t, raw) in terms.iter().enumerate() {
                let words = super::tokenize(raw);
                if words.is_empty() {
                    return Err(Error::Lexicon(format!("blank term in category `{name}`")));
                }
                let term = words.join(" ");
                if let Some(prev) = index.insert(term.clone(), TermId { category: c, term: t }) {
                    let other = if prev.category == c {
                        name.clone()
                    } else {
                        categories
                            .get(prev.category)
                            .map(|(n, _): &(String, Vec<String>)| n.clone())
                            .unwrap_or_default()
                    };
                    return Err(Error::Lexicon(format!(
                        "term `{term}` appears in both `{other}` and `{name}`"
                    )));
                }
                longest = longest.max(words.len());
                normalized.push(term);
            }
            categories.push((name, normalized));
        }
        Ok(Lexicon {
            categories,
            index,
            longest,
        })
    }
}

impl From<Lexicon> for BTreeMap<String, Vec<String>> {
    fn from(lex: Lexicon) -> Self {
        lex.categories.into_iter().collect()
    }
}
