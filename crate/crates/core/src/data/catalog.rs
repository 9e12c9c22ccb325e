use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, PAD};
use super::{CategoryId, ItemId};
use crate::error::{Error, Result};

/// One catalog line before tokenization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub item_id: ItemId,
    pub category: CategoryId,
    pub title: String,
    pub description: String,
}

impl CatalogRecord {
    /// Title followed by description, the raw text an item is embedded from.
    pub fn text(&self) -> String {
        format!("{} {}", self.title, self.description)
    }

    pub fn resolve(&self, vocab: &Vocabulary) -> Item {
        Item {
            item_id: self.item_id,
            category: self.category,
            title_tokens: vocab.encode(&self.title),
            description_tokens: vocab.encode(&self.description),
        }
    }
}

/// Catalog entry with text resolved against a vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: ItemId,
    pub category: CategoryId,
    pub title_tokens: Vec<u32>,
    pub description_tokens: Vec<u32>,
}

/// Token sequence an item is embedded from: title then description. The
/// category is never injected. Empty text becomes a single PAD token.
pub fn item_text(item: &Item) -> Vec<u32> {
    let mut out = Vec::with_capacity(item.title_tokens.len() + item.description_tokens.len());
    out.extend_from_slice(&item.title_tokens);
    out.extend_from_slice(&item.description_tokens);
    if out.is_empty() {
        out.push(PAD);
    }
    out
}

/// The item catalog, keyed by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Catalog {
    records: BTreeMap<ItemId, CatalogRecord>,
}

impl Catalog {
    pub fn new(records: impl IntoIterator<Item = CatalogRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            if r.category.0 == 0 {
                return Err(Error::Data(format!("item {} has category 0; categories start at 1", r.item_id)));
            }
            let id = r.item_id;
            if map.insert(id, r).is_some() {
                return Err(Error::Data(format!("duplicate item id {id}")));
            }
        }
        Ok(Catalog { records: map })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: ItemId) -> Option<&CatalogRecord> {
        self.records.get(&id)
    }

    /// Records in ascending id order.
    pub fn records(&self) -> impl Iterator<Item = &CatalogRecord> {
        self.records.values()
    }

    /// Largest category id present.
    pub fn max_category(&self) -> u32 {
        self.records.values().map(|r| r.category.0).max().unwrap_or(0)
    }

    /// Checks every category against `n_categories`.
    pub fn check_categories(&self, n_categories: usize) -> Result<()> {
        match self.records.values().find(|r| r.category.index() >= n_categories) {
            Some(r) => Err(Error::Data(format!("item {} has category {} outside 1..={n_categories}", r.item_id, r.category))),
            None => Ok(()),
        }
    }
}

fn clean(field: &str) -> String {
    field.replace(['\t', '\n', '\r'], " ")
}

/// Writes `item_id<TAB>category<TAB>title<TAB>description` lines. Tabs and
/// line breaks inside text become spaces.
pub fn write_catalog<W: Write>(catalog: &Catalog, mut out: W) -> Result<()> {
    for r in catalog.records() {
        writeln!(out, "{}\t{}\t{}\t{}", r.item_id, r.category, clean(&r.title), clean(&r.description))?;
    }
    Ok(())
}

pub fn read_catalog<R: BufRead>(input: R) -> Result<Catalog> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Data(format!("catalog line {}: expected 4 tab-separated fields, got {}", n + 1, fields.len())));
        }
        let item_id =
            fields[0].parse().map_err(|_| Error::Data(format!("catalog line {}: bad item id {:?}", n + 1, fields[0])))?;
        let category =
            fields[1].parse().map_err(|_| Error::Data(format!("catalog line {}: bad category {:?}", n + 1, fields[1])))?;
        records.push(CatalogRecord {
            item_id: ItemId(item_id),
            category: CategoryId(category),
            title: fields[2].to_string(),
            description: fields[3].to_string(),
        });
    }
    Catalog::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_vocabulary;

    fn item(title: Vec<u32>, desc: Vec<u32>) -> Item {
        Item { item_id: ItemId(1), category: CategoryId(1), title_tokens: title, description_tokens: desc }
    }

    #[test]
    fn text_is_title_then_description() {
        assert_eq!(item_text(&item(vec![5, 7], vec![9])), vec![5, 7, 9]);
        assert_eq!(item_text(&item(vec![], vec![])), vec![PAD]);
        for n in 0..50u32 {
            let it = item((0..n % 5).collect(), (0..n).collect());
            assert_eq!(item_text(&it).len(), (n % 5 + n).max(1) as usize);
        }
    }

    #[test]
    fn round_trip_and_escaping() {
        let cat = Catalog::new(vec![
            CatalogRecord {
                item_id: ItemId(3),
                category: CategoryId(2),
                title: "Red\tLamp".into(),
                description: "bright\nlight".into(),
            },
            CatalogRecord { item_id: ItemId(1), category: CategoryId(1), title: "Chair".into(), description: "".into() },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_catalog(&cat, &mut buf).unwrap();
        let back = read_catalog(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.get(ItemId(3)).unwrap().title, "Red Lamp");
        assert_eq!(back.get(ItemId(3)).unwrap().description, "bright light");
        let vocab = build_vocabulary(back.records().map(|r| r.title.as_str()), 1).unwrap();
        let it = back.get(ItemId(1)).unwrap().resolve(&vocab);
        assert_eq!(it.title_tokens, vec![vocab.index("chair")]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(read_catalog("1\t2\tonly three".as_bytes()), Err(Error::Data(_))));
        assert!(matches!(read_catalog("x\t2\ta\tb".as_bytes()), Err(Error::Data(_))));
        assert!(matches!(read_catalog("1\t1\ta\tb\n1\t2\tc\td".as_bytes()), Err(Error::Data(_))));
    }
}
