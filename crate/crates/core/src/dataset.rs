//! A network pair with its anchor map, stored as one directory:
//!
//! ```text
//! <dir>/source/     network (schema.txt, nodes/, edges/)
//! <dir>/target/     network
//! <dir>/anchors.tsv <source_user>\t<target_user>\t<joined_after 0|1>
//! <dir>/labels.tsv  <source_user>\t<label 0|1>   (optional ground truth)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::anchor::AnchorMap;
use crate::error::{Error, Result};
use crate::hetgraph::{load_network_dir, write_file, write_network_dir, HeterogeneousNetwork, LoadOptions};

pub const USER: &str = "user";

#[derive(Debug, Clone)]
pub struct Dataset {
    pub source: HeterogeneousNetwork,
    pub target: HeterogeneousNetwork,
    /// Every known anchor, with join-order flags.
    pub anchors: AnchorMap,
}

impl Dataset {
    pub fn load(dir: &Path, opts: LoadOptions) -> Result<Dataset> {
        let source = load_network_dir(&dir.join("source"), opts)?;
        let target = load_network_dir(&dir.join("target"), opts)?;
        let anchors = AnchorMap::load(&dir.join("anchors.tsv"), &source, &target, USER)?;
        Ok(Dataset {
            source,
            target,
            anchors,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_network_dir(&self.source, &dir.join("source"))?;
        write_network_dir(&self.target, &dir.join("target"))?;
        self.anchors
            .write(&dir.join("anchors.tsv"), &self.source, &self.target, USER)
    }

    /// Ground truth implied by the anchor flags: anchors that joined the
    /// target later are positive, source users without an anchor negative.
    /// Anchors that were already on the target are not labelled.
    pub fn ground_truth(&self) -> Result<Vec<(u32, bool)>> {
        let n = self.source.node_count(USER)?;
        let mut state = vec![Some(false); n];
        for p in self.anchors.pairs() {
            state[p.source as usize] = p.joined_target_after_source.then_some(true);
        }
        Ok(state
            .into_iter()
            .enumerate()
            .filter_map(|(u, s)| s.map(|l| (u as u32, l)))
            .collect())
    }

    pub fn write_labels(&self, path: &Path) -> Result<()> {
        let ids = self.source.node_ids(USER)?;
        let labels = self.ground_truth()?;
        write_file(path, |w| {
            for (u, l) in labels {
                writeln!(w, "{}\t{}", ids[u as usize], u8::from(l))?;
            }
            Ok(())
        })
    }
}

/// Read a `<user_id>\t<0|1>` label file.
pub fn read_labels(path: &Path) -> Result<Vec<(String, bool)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, l) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, no + 1, "expected `<user_id>\\t<0|1>`"))?;
        let l = match l.trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::parse(path, no + 1, format!("label must be 0 or 1, got `{other}`"))),
        };
        out.push((id.to_string(), l));
    }
    Ok(out)
}
