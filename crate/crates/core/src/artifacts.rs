//! On-disk artifact formats: JSON-lines and CSV files that start with a
//! `# commevolve …` header line, plus content hashing.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::{CommunitySubgraph, GroupId};
use crate::temporal::{NodeId, SnapshotNetwork};
use crate::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `# commevolve key=value …` with keys in the given order.
pub fn header_line(fields: &[(&str, String)]) -> String {
    let mut out = String::from("# commevolve");
    for (k, v) in fields {
        out.push(' ');
        out.push_str(k);
        out.push('=');
        out.push_str(v);
    }
    out
}

/// Key-value pairs of a header produced by [`header_line`].
pub fn parse_header(line: &str) -> Option<Vec<(String, String)>> {
    let rest = line.strip_prefix("# commevolve")?;
    Some(
        rest.split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
    )
}

/// Header line followed by one JSON object per item.
pub fn to_jsonl<T: Serialize>(header: &str, items: &[T]) -> Result<String> {
    let mut out = String::with_capacity(64 * items.len());
    out.push_str(header);
    out.push('\n');
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes via a temporary sibling so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Items of a JSON-lines file; comment lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub index: usize,
    /// `[start, end)` in seconds.
    pub window: (i64, i64),
    /// `(source, target, interaction count)` of each surviving directed edge.
    pub edges: Vec<(NodeId, NodeId, u32)>,
}

impl SnapshotRecord {
    pub fn from_snapshot(s: &SnapshotNetwork) -> Self {
        Self {
            index: s.index(),
            window: s.window(),
            edges: s.edges().iter().map(|((u, v), c)| (u.clone(), v.clone(), *c)).collect(),
        }
    }

    pub fn to_snapshot(&self) -> SnapshotNetwork {
        SnapshotNetwork::new(
            self.index,
            self.window,
            self.edges
                .iter()
                .map(|(u, v, c)| ((u.clone(), v.clone()), *c))
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityRecord {
    pub t: usize,
    pub i: usize,
    pub members: Vec<NodeId>,
    pub neighbors: Vec<NodeId>,
}

impl CommunityRecord {
    pub fn from_subgraph(g: &CommunitySubgraph) -> Self {
        Self {
            t: g.id.t,
            i: g.id.i,
            members: g.members.iter().cloned().collect(),
            neighbors: g.neighbors.iter().cloned().collect(),
        }
    }

    pub fn to_subgraph(&self) -> CommunitySubgraph {
        CommunitySubgraph {
            id: GroupId::new(self.t, self.i),
            members: self.members.iter().cloned().collect(),
            neighbors: self.neighbors.iter().cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_roundtrip() {
        let h = header_line(&[("stage", "detect".into()), ("seed", "7".into())]);
        assert_eq!(h, "# commevolve stage=detect seed=7");
        let kv = parse_header(&h).unwrap();
        assert_eq!(kv[1], ("seed".to_string(), "7".to_string()));
        assert!(parse_header("# other").is_none());
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let items = vec![GroupId::new(1, 0), GroupId::new(2, 3)];
        write_atomic(&path, to_jsonl("# commevolve stage=x", &items).unwrap().as_bytes()).unwrap();
        let back: Vec<GroupId> = read_jsonl(&path).unwrap();
        assert_eq!(back, items);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
