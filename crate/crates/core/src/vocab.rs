//! Token alphabet shared by the acoustic and language scorers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = u32;

/// How text is split into vocabulary units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenMode {
    /// Whitespace-delimited words; decoded text is joined with single spaces.
    #[default]
    Word,
    /// One token per Unicode scalar value; decoded text is concatenated.
    Char,
}

impl TokenMode {
    fn is_word(&self) -> bool {
        *self == TokenMode::Word
    }
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    bos: TokenId,
    eot: TokenId,
    #[serde(default, skip_serializing_if = "TokenMode::is_word")]
    mode: TokenMode,
}

/// Dense bidirectional mapping between token ids and strings, with
/// reserved BOS and EOT ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, TokenId>,
    bos_id: TokenId,
    eot_id: TokenId,
    mode: TokenMode,
}

impl Vocabulary {
    pub fn new(entries: Vec<String>, bos_id: TokenId, eot_id: TokenId, mode: TokenMode) -> Result<Self> {
        if entries.len() < 3 {
            return Err(Error::InvalidVocabulary(format!(
                "need at least 3 tokens (BOS, EOT and one content token), got {}",
                entries.len()
            )));
        }
        if entries.len() > TokenId::MAX as usize {
            return Err(Error::InvalidVocabulary("too many tokens".into()));
        }
        let size = entries.len();
        for id in [bos_id, eot_id] {
            if id as usize >= size {
                return Err(Error::InvalidTokenId { id, size });
            }
        }
        if bos_id == eot_id {
            return Err(Error::InvalidVocabulary("bos and eot must differ".into()));
        }
        let mut index = HashMap::with_capacity(size);
        for (id, tok) in entries.iter().enumerate() {
            if mode == TokenMode::Char && tok.chars().count() != 1 && !is_special(id, bos_id, eot_id) {
                return Err(Error::InvalidVocabulary(format!(
                    "char-mode token {tok:?} is not a single character"
                )));
            }
            if mode == TokenMode::Word
                && !is_special(id, bos_id, eot_id)
                && (tok.is_empty() || tok.contains(char::is_whitespace))
            {
                return Err(Error::InvalidVocabulary(format!(
                    "word-mode token {tok:?} is empty or contains whitespace"
                )));
            }
            if index.insert(tok.clone(), id as TokenId).is_some() {
                return Err(Error::InvalidVocabulary(format!("duplicate token {tok:?}")));
            }
        }
        Ok(Self {
            entries,
            index,
            bos_id,
            eot_id,
            mode,
        })
    }

    /// Builds a vocabulary with `<bos>` at id 0, `<eot>` at id 1 and the
    /// given content tokens after them.
    pub fn with_specials<I, S>(content: I, mode: TokenMode) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut entries = vec!["<bos>".to_string(), "<eot>".to_string()];
        entries.extend(content.into_iter().map(Into::into));
        Self::new(entries, 0, 1, mode)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bos_id(&self) -> TokenId {
        self.bos_id
    }

    pub fn eot_id(&self) -> TokenId {
        self.eot_id
    }

    pub fn mode(&self) -> TokenMode {
        self.mode
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        is_special(id as usize, self.bos_id, self.eot_id)
    }

    /// Ids of every token that is neither BOS nor EOT, in id order.
    pub fn content_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.len() as TokenId).filter(move |&id| !self.is_special(id))
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Result<&str> {
        self.entries
            .get(id as usize)
            .map(String::as_str)
            .ok_or(Error::InvalidTokenId { id, size: self.len() })
    }

    pub fn check_id(&self, id: TokenId) -> Result<()> {
        if (id as usize) < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidTokenId { id, size: self.len() })
        }
    }

    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        match self.mode {
            TokenMode::Word => text.split_whitespace().map(|w| self.lookup_content(w)).collect(),
            TokenMode::Char => {
                let mut buf = [0u8; 4];
                text.chars()
                    .map(|c| self.lookup_content(c.encode_utf8(&mut buf)))
                    .collect()
            }
        }
    }

    fn lookup_content(&self, unit: &str) -> Result<TokenId> {
        match self.id(unit) {
            Some(id) if !self.is_special(id) => Ok(id),
            _ => Err(Error::UnknownToken(unit.to_string())),
        }
    }

    /// Renders token ids as text. BOS and EOT render as nothing.
    pub fn decode_text(&self, tokens: &[TokenId]) -> Result<String> {
        let mut parts = Vec::with_capacity(tokens.len());
        for &id in tokens {
            let tok = self.token(id)?;
            if !self.is_special(id) {
                parts.push(tok);
            }
        }
        Ok(match self.mode {
            TokenMode::Word => parts.join(" "),
            TokenMode::Char => parts.concat(),
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(json)?;
        Self::new(file.tokens, file.bos, file.eot, file.mode)
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            tokens: self.entries.clone(),
            bos: self.bos_id,
            eot: self.eot_id,
            mode: self.mode,
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: VocabFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::new(file.tokens, file.bos, file.eot, file.mode)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

fn is_special(id: usize, bos: TokenId, eot: TokenId) -> bool {
    id == bos as usize || id == eot as usize
}
