//! Triple datasets: loading, validation, indexing and synthesis.

mod synthetic;

pub use synthetic::{generate_synthetic, Pattern, SyntheticSpec};

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A single (head, relation, tail) fact with dense integer ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }
}

/// Bijective name <-> id mapping for entities and relations.
///
/// Ids are dense: `0..entity_count()` and `0..relation_count()`.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, usize>,
    relation_ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn entity_name(&self, id: usize) -> Option<&str> {
        self.entity_names.get(id).map(String::as_str)
    }

    pub fn relation_name(&self, id: usize) -> Option<&str> {
        self.relation_names.get(id).map(String::as_str)
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_ids.get(name).copied()
    }

    /// Returns the id for `name`, inserting it at the next dense id if new.
    pub fn intern_entity(&mut self, name: &str) -> usize {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entity_names.len();
        self.entity_names.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        id
    }

    pub fn intern_relation(&mut self, name: &str) -> usize {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relation_names.len();
        self.relation_names.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }

    /// Stable content hash of the vocabulary, used to guard checkpoints
    /// against evaluation on a different dataset.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.entity_names.len() as u64).to_le_bytes());
        for name in &self.entity_names {
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
        }
        hasher.update((self.relation_names.len() as u64).to_le_bytes());
        for name in &self.relation_names {
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            write!(out, "{byte:02x}").unwrap();
        }
        out
    }
}

/// Counters reported by the loader alongside the dataset itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    /// Exact duplicates removed within each split.
    pub duplicates_removed: usize,
    /// Triples shared between two splits (reported, not dropped).
    pub cross_split_duplicates: usize,
    /// Entities that never appear in the training split.
    pub cold_start_entities: usize,
    /// Relations that never appear in the training split.
    pub cold_start_relations: usize,
}

/// A triple dataset with train/valid/test splits over one vocabulary.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub vocabulary: Vocabulary,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    pub stats: LoadStats,
}

impl Dataset {
    pub fn entity_count(&self) -> usize {
        self.vocabulary.entity_count()
    }

    pub fn relation_count(&self) -> usize {
        self.vocabulary.relation_count()
    }

    /// All triples of all splits, train then valid then test.
    pub fn all_triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.train
            .iter()
            .chain(self.valid.iter())
            .chain(self.test.iter())
            .copied()
    }

    /// Recomputes the duplicate and cold-start counters. Called by the
    /// loader and the synthetic generator after the splits are final.
    fn finalize_stats(&mut self, duplicates_removed: usize) {
        let train: HashSet<Triple> = self.train.iter().copied().collect();
        let valid: HashSet<Triple> = self.valid.iter().copied().collect();
        let test: HashSet<Triple> = self.test.iter().copied().collect();
        let cross = train.intersection(&valid).count()
            + train.intersection(&test).count()
            + valid.intersection(&test).count();

        let mut seen_entities = vec![false; self.entity_count()];
        let mut seen_relations = vec![false; self.relation_count()];
        for t in &self.train {
            seen_entities[t.head] = true;
            seen_entities[t.tail] = true;
            seen_relations[t.relation] = true;
        }
        self.stats = LoadStats {
            duplicates_removed,
            cross_split_duplicates: cross,
            cold_start_entities: seen_entities.iter().filter(|s| !**s).count(),
            cold_start_relations: seen_relations.iter().filter(|s| !**s).count(),
        };
        if self.stats.duplicates_removed > 0 {
            log::warn!(
                "removed {} duplicate triples within splits",
                self.stats.duplicates_removed
            );
        }
        if self.stats.cross_split_duplicates > 0 {
            log::warn!(
                "{} triples appear in more than one split",
                self.stats.cross_split_duplicates
            );
        }
        if self.stats.cold_start_entities > 0 || self.stats.cold_start_relations > 0 {
            log::warn!(
                "{} entities and {} relations appear only in valid/test; their embeddings are never updated",
                self.stats.cold_start_entities,
                self.stats.cold_start_relations
            );
        }
    }

    /// Writes the three splits as triple TSV files under `dir`.
    pub fn write_tsv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, split) in [
            ("train.txt", &self.train),
            ("valid.txt", &self.valid),
            ("test.txt", &self.test),
        ] {
            let mut out = String::new();
            for t in split {
                let h = self.vocabulary.entity_name(t.head).ok_or(
                    Error::EntityOutOfBounds {
                        id: t.head,
                        count: self.entity_count(),
                    },
                )?;
                let r = self.vocabulary.relation_name(t.relation).ok_or(
                    Error::RelationOutOfBounds {
                        id: t.relation,
                        count: self.relation_count(),
                    },
                )?;
                let e = self.vocabulary.entity_name(t.tail).ok_or(
                    Error::EntityOutOfBounds {
                        id: t.tail,
                        count: self.entity_count(),
                    },
                )?;
                out.push_str(h);
                out.push('\t');
                out.push_str(r);
                out.push('\t');
                out.push_str(e);
                out.push('\n');
            }
            fs::write(dir.join(name), out)?;
        }
        Ok(())
    }
}

/// Loads a dataset from `directory` containing `train.txt`, `valid.txt` and
/// `test.txt` in triple TSV format (three tab-separated name fields per line).
///
/// Ids are assigned densely in first-appearance order over train, then valid,
/// then test, so a fixed directory always yields the same id assignment.
/// Duplicate triples within a split are dropped and counted in
/// [`LoadStats::duplicates_removed`].
pub fn load_dataset(directory: &Path) -> Result<Dataset> {
    let mut dataset = Dataset::default();
    let mut duplicates = 0usize;
    for (file, split) in [("train.txt", 0), ("valid.txt", 1), ("test.txt", 2)] {
        let path = directory.join(file);
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        let reader = BufReader::new(fs::File::open(&path)?);
        let mut seen: HashSet<Triple> = HashSet::new();
        let mut triples = Vec::new();
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (head, relation, tail) = match (fields.next(), fields.next(), fields.next()) {
                (Some(h), Some(r), Some(t)) if fields.next().is_none() => (h, r, t),
                _ => {
                    return Err(Error::MalformedLine {
                        file: path.display().to_string(),
                        line: line_no + 1,
                        found: line.split('\t').count(),
                    })
                }
            };
            let triple = Triple::new(
                dataset.vocabulary.intern_entity(head),
                dataset.vocabulary.intern_relation(relation),
                dataset.vocabulary.intern_entity(tail),
            );
            if seen.insert(triple) {
                triples.push(triple);
            } else {
                duplicates += 1;
            }
        }
        match split {
            0 => dataset.train = triples,
            1 => dataset.valid = triples,
            _ => dataset.test = triples,
        }
    }
    dataset.finalize_stats(duplicates);
    log::info!(
        "loaded {}: |E|={}, |R|={}, train={}, valid={}, test={}",
        directory.display(),
        dataset.entity_count(),
        dataset.relation_count(),
        dataset.train.len(),
        dataset.valid.len(),
        dataset.test.len()
    );
    Ok(dataset)
}

/// Known-triple index over train + valid + test, used to exclude true
/// triples from ranking candidates in the filtered evaluation setting.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails_by_hr: HashMap<(usize, usize), HashSet<usize>>,
    heads_by_rt: HashMap<(usize, usize), HashSet<usize>>,
}

impl FilterIndex {
    /// Builds the index over all three splits of `dataset`.
    pub fn build(dataset: &Dataset) -> Self {
        let mut index = FilterIndex::default();
        for t in dataset.all_triples() {
            index.insert(t);
        }
        index
    }

    pub fn insert(&mut self, t: Triple) {
        self.tails_by_hr
            .entry((t.head, t.relation))
            .or_default()
            .insert(t.tail);
        self.heads_by_rt
            .entry((t.relation, t.tail))
            .or_default()
            .insert(t.head);
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.tails_by_hr
            .get(&(t.head, t.relation))
            .is_some_and(|s| s.contains(&t.tail))
    }

    /// Known tails for a (head, relation) pair.
    pub fn tails(&self, head: usize, relation: usize) -> Option<&HashSet<usize>> {
        self.tails_by_hr.get(&(head, relation))
    }

    /// Known heads for a (relation, tail) pair.
    pub fn heads(&self, relation: usize, tail: usize) -> Option<&HashSet<usize>> {
        self.heads_by_rt.get(&(relation, tail))
    }
}
