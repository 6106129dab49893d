use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which parameter groups receive gradient updates.
///
/// String forms: `head_only`, `all`, `last_N_blocks` (N as digits or an
/// English number word, e.g. `last_two_blocks`), or a comma-separated list
/// of group names such as `block3,head`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum UnfreezeStage {
    HeadOnly,
    All,
    /// The last `n` backbone groups plus the head.
    LastBlocks(usize),
    /// Exactly these groups.
    Groups(Vec<String>),
}

const NUMBER_WORDS: [&str; 13] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
];

fn parse_count(s: &str) -> Option<usize> {
    s.parse().ok().or_else(|| NUMBER_WORDS.iter().position(|w| *w == s))
}

impl FromStr for UnfreezeStage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "head_only" => return Ok(UnfreezeStage::HeadOnly),
            "all" => return Ok(UnfreezeStage::All),
            _ => {}
        }
        if let Some(n) = s
            .strip_prefix("last_")
            .and_then(|r| r.strip_suffix("_blocks").or_else(|| r.strip_suffix("_block")))
        {
            return parse_count(n)
                .map(UnfreezeStage::LastBlocks)
                .ok_or_else(|| Error::Config(format!("cannot read a block count from stage '{s}'")));
        }
        let groups: Vec<String> = s.split(',').map(|g| g.trim().to_string()).collect();
        if groups.iter().any(|g| g.is_empty() || !g.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')) {
            return Err(Error::Config(format!("unrecognized unfreeze stage '{s}'")));
        }
        Ok(UnfreezeStage::Groups(groups))
    }
}

impl fmt::Display for UnfreezeStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnfreezeStage::HeadOnly => f.write_str("head_only"),
            UnfreezeStage::All => f.write_str("all"),
            UnfreezeStage::LastBlocks(n) => match NUMBER_WORDS.get(*n) {
                Some(w) => write!(f, "last_{w}_blocks"),
                None => write!(f, "last_{n}_blocks"),
            },
            UnfreezeStage::Groups(g) => f.write_str(&g.join(",")),
        }
    }
}

impl TryFrom<String> for UnfreezeStage {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<UnfreezeStage> for String {
    fn from(s: UnfreezeStage) -> String {
        s.to_string()
    }
}

impl UnfreezeStage {
    /// Trainability of each group. `backbone_groups` is ordered earliest to
    /// latest; `head_group` is always listed last.
    pub fn resolve(&self, backbone_groups: &[String], head_group: &str) -> Result<Vec<(String, bool)>> {
        let n = backbone_groups.len();
        let trainable_backbone: Vec<bool> = match self {
            UnfreezeStage::HeadOnly => vec![false; n],
            UnfreezeStage::All => vec![true; n],
            UnfreezeStage::LastBlocks(k) => {
                if *k > n {
                    return Err(Error::Config(format!(
                        "stage '{self}' asks for {k} blocks but the backbone has {n}"
                    )));
                }
                (0..n).map(|i| i >= n - k).collect()
            }
            UnfreezeStage::Groups(names) => {
                if let Some(unknown) = names.iter().find(|g| *g != head_group && !backbone_groups.contains(g)) {
                    return Err(Error::Config(format!(
                        "stage '{self}' names unknown group '{unknown}' (known: {}, {head_group})",
                        backbone_groups.join(", ")
                    )));
                }
                backbone_groups.iter().map(|g| names.contains(g)).collect()
            }
        };
        let head = match self {
            UnfreezeStage::Groups(names) => names.iter().any(|g| g == head_group),
            _ => true,
        };
        let mut map: Vec<(String, bool)> = backbone_groups.iter().cloned().zip(trainable_backbone).collect();
        map.push((head_group.to_string(), head));
        Ok(map)
    }
}
