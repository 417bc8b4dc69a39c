use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::data::{Lexicon, Origin, TermId, TermMatch};
use crate::error::{Error, Result};

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub tokens: Vec<String>,
    pub label: String,
    matches: Vec<TermMatch>,
    categories: Vec<usize>,
}

impl Document {
    pub fn new(tokens: Vec<String>, label: String, lexicon: &Lexicon) -> Self {
        let matches = lexicon.find_terms(&tokens);
        let mut categories: Vec<usize> = matches.iter().map(|m| m.id.category).collect();
        categories.sort_unstable();
        categories.dedup();
        Document {
            tokens,
            label,
            matches,
            categories,
        }
    }

    pub fn matches(&self) -> &[TermMatch] {
        &self.matches
    }

    /// True if any term of the category occurs.
    pub fn has_category(&self, category: usize) -> bool {
        self.categories.binary_search(&category).is_ok()
    }

    /// True if this exact term occurs.
    pub fn has_term(&self, id: TermId) -> bool {
        self.matches.iter().any(|m| m.id == id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextDataset {
    pub lexicon: Lexicon,
    pub documents: Vec<Document>,
}

impl TextDataset {
    pub fn new(lexicon: Lexicon, docs: Vec<(Vec<String>, String)>) -> Result<Self> {
        let mut documents = Vec::with_capacity(docs.len());
        for (i, (tokens, label)) in docs.into_iter().enumerate() {
            if tokens.is_empty() {
                return Err(Error::Line {
                    line: i + 1,
                    message: "empty document".into(),
                });
            }
            documents.push(Document::new(tokens, label, &lexicon));
        }
        Ok(TextDataset { lexicon, documents })
    }

    pub fn from_texts(lexicon: Lexicon, docs: &[(&str, &str)]) -> Result<Self> {
        TextDataset::new(
            lexicon,
            docs.iter()
                .map(|(label, text)| (tokenize(text), label.to_string()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Loads `label<TAB>text` lines. A third tab-separated field equal to
/// `original` or `augmented` is read as provenance and dropped.
pub fn load_text(path: impl AsRef<Path>, lexicon: &Lexicon) -> Result<TextDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_text(file, lexicon)
}

pub(crate) fn read_text<R: Read>(reader: R, lexicon: &Lexicon) -> Result<TextDataset> {
    let mut documents = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let (label, rest) = line.split_once('\t').ok_or_else(|| Error::Line {
            line: line_no,
            message: "missing label (expected `label<TAB>text`)".into(),
        })?;
        let label = label.trim();
        if label.is_empty() {
            return Err(Error::Line {
                line: line_no,
                message: "missing label".into(),
            });
        }
        let text = match rest.rsplit_once('\t') {
            Some((text, "original" | "augmented")) => text,
            _ => rest,
        };
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::Line {
                line: line_no,
                message: "empty document".into(),
            });
        }
        documents.push(Document::new(tokens, label.to_string(), lexicon));
    }
    Ok(TextDataset {
        lexicon: lexicon.clone(),
        documents,
    })
}

/// Writes documents as `label<TAB>tokens joined by spaces`, with an optional
/// provenance column.
pub fn write_text<W: Write>(
    mut writer: W,
    docs: &[(Vec<String>, String)],
    origins: Option<&[Origin]>,
) -> Result<()> {
    for (i, (tokens, label)) in docs.iter().enumerate() {
        write!(writer, "{label}\t{}", tokens.join(" "))?;
        if let Some(o) = origins {
            write!(writer, "\t{}", o[i].as_str())?;
        }
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}
