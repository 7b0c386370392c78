use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

use super::GeneratorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenGroup {
    GenuinePositive,
    GenuineNegative,
    /// Neutral topic token; the index names the topic.
    Topic(usize),
    Filler,
    Special,
}

impl TokenGroup {
    pub fn is_genuine(self) -> bool {
        matches!(self, TokenGroup::GenuinePositive | TokenGroup::GenuineNegative)
    }
}

impl fmt::Display for TokenGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenGroup::GenuinePositive => f.write_str("G+"),
            TokenGroup::GenuineNegative => f.write_str("G-"),
            TokenGroup::Topic(t) => write!(f, "T:topic{t}"),
            TokenGroup::Filler => f.write_str("F"),
            TokenGroup::Special => f.write_str("SPECIAL"),
        }
    }
}

impl std::str::FromStr for TokenGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "G+" => Ok(TokenGroup::GenuinePositive),
            "G-" => Ok(TokenGroup::GenuineNegative),
            "F" => Ok(TokenGroup::Filler),
            "SPECIAL" => Ok(TokenGroup::Special),
            _ => s
                .strip_prefix("T:topic")
                .and_then(|n| n.parse().ok())
                .map(TokenGroup::Topic)
                .ok_or_else(|| format!("unknown token group `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenEntry {
    pub id: usize,
    pub surface: String,
    pub group: TokenGroup,
}

/// Dense token table. Specials occupy ids 0..4 in the order PAD, UNK, BOS, EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<TokenEntry>,
    index: HashMap<String, usize>,
    topic_count: usize,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const BOS: usize = 2;
    pub const EOS: usize = 3;
    const SPECIALS: [&'static str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

    pub fn build(cfg: &GeneratorConfig) -> Result<Self> {
        cfg.validate()?;
        let mut entries: Vec<TokenEntry> = Vec::new();
        let mut push = |surface: String, group: TokenGroup| {
            let id = entries.len();
            entries.push(TokenEntry { id, surface, group });
        };
        for s in Self::SPECIALS {
            push(s.to_string(), TokenGroup::Special);
        }
        let w = width(cfg.positive_count, 3);
        for i in 0..cfg.positive_count {
            push(format!("pos_{i:0w$}"), TokenGroup::GenuinePositive);
        }
        let w = width(cfg.negative_count, 3);
        for i in 0..cfg.negative_count {
            push(format!("neg_{i:0w$}"), TokenGroup::GenuineNegative);
        }
        let base = cfg.topic_count / cfg.topics;
        let extra = cfg.topic_count % cfg.topics;
        for t in 0..cfg.topics {
            let n = base + usize::from(t < extra);
            let w = width(n, 2);
            for j in 0..n {
                push(format!("topic{t}_{j:0w$}"), TokenGroup::Topic(t));
            }
        }
        let w = width(cfg.filler_count, 2);
        for i in 0..cfg.filler_count {
            push(format!("fill_{i:0w$}"), TokenGroup::Filler);
        }
        Self::from_entries(entries)
    }

    /// Builds a vocabulary from explicit entries, checking the id and surface invariants.
    pub fn from_entries(entries: Vec<TokenEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut topic_count = 0;
        for (i, e) in entries.iter().enumerate() {
            if e.id != i {
                return Err(Error::Config(format!("token ids must be dense: found {} at {i}", e.id)));
            }
            if index.insert(e.surface.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate surface `{}`", e.surface)));
            }
            let special = i < Self::SPECIALS.len();
            if special != (e.group == TokenGroup::Special) {
                return Err(Error::Config(format!(
                    "token {i} `{}`: specials must occupy ids 0..4",
                    e.surface
                )));
            }
            if let TokenGroup::Topic(t) = e.group {
                topic_count = topic_count.max(t + 1);
            }
        }
        if entries.len() <= Self::SPECIALS.len() {
            return Err(Error::Config("vocabulary has no content tokens".into()));
        }
        Ok(Self {
            entries,
            index,
            topic_count,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TokenEntry] {
        &self.entries
    }

    pub fn surface(&self, id: usize) -> &str {
        &self.entries[id].surface
    }

    pub fn group(&self, id: usize) -> TokenGroup {
        self.entries[id].group
    }

    pub fn id(&self, surface: &str) -> Option<usize> {
        self.index.get(surface).copied()
    }

    pub fn lookup(&self, surface: &str) -> Result<usize> {
        self.id(surface)
            .ok_or_else(|| Error::UnknownToken(surface.to_string()))
    }

    pub fn is_special(&self, id: usize) -> bool {
        id < Self::SPECIALS.len()
    }

    pub fn topic_count(&self) -> usize {
        self.topic_count
    }

    /// Ids of every non-special token, ascending.
    pub fn content_ids(&self) -> impl Iterator<Item = usize> + '_ {
        Self::SPECIALS.len()..self.entries.len()
    }

    pub fn ids_in(&self, group: TokenGroup) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.group == group)
            .map(|e| e.id)
            .collect()
    }

    /// Every semantic group present, in a fixed order: G+, G-, topics, F.
    pub fn semantic_groups(&self) -> Vec<TokenGroup> {
        let mut groups = vec![TokenGroup::GenuinePositive, TokenGroup::GenuineNegative];
        groups.extend((0..self.topic_count).map(TokenGroup::Topic));
        groups.push(TokenGroup::Filler);
        groups.retain(|g| self.entries.iter().any(|e| e.group == *g));
        groups
    }
}

fn width(count: usize, min: usize) -> usize {
    let digits = count.saturating_sub(1).max(1).ilog10() as usize + 1;
    digits.max(min)
}
