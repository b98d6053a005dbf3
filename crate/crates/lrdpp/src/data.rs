//! Basket parsing, train/test splitting, and model file I/O.
//!
//! The text format is one basket per line: comma-separated item ids with
//! surrounding whitespace ignored. Duplicate ids within a line are collapsed,
//! blank lines are skipped, and baskets with fewer distinct items than the
//! minimum size are dropped before they can touch the catalog.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::TraitMatrix;

/// Default minimum basket size: singletons carry no co-occurrence signal.
pub const MIN_BASKET_SIZE: usize = 2;

const MODEL_MAGIC: &str = "LRDPP1";

/// Maps item ids to dense indices and back. Index order is first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCatalog {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl ItemCatalog {
    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::ModelFormat(format!("empty item id at index {i}")));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::ModelFormat(format!("duplicate item id {id:?}")));
            }
        }
        Ok(ItemCatalog { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, item: usize) -> &str {
        &self.ids[item]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// A set of item indices, stored strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basket {
    items: Vec<usize>,
}

impl Basket {
    pub fn new(mut items: Vec<usize>) -> Self {
        items.sort_unstable();
        items.dedup();
        Basket { items }
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

/// Baskets plus the catalog they index into and per-item occurrence counts.
#[derive(Debug, Clone)]
pub struct BasketDataset {
    baskets: Vec<Basket>,
    catalog: Arc<ItemCatalog>,
    counts: Vec<usize>,
}

impl BasketDataset {
    pub fn new(baskets: Vec<Basket>, catalog: Arc<ItemCatalog>) -> Result<Self> {
        let m = catalog.len();
        let mut counts = vec![0usize; m];
        for basket in &baskets {
            for &item in basket.items() {
                if item >= m {
                    return Err(Error::ItemOutOfRange { item, m });
                }
                counts[item] += 1;
            }
        }
        Ok(BasketDataset { baskets, catalog, counts })
    }

    pub fn baskets(&self) -> &[Basket] {
        &self.baskets
    }

    pub fn catalog(&self) -> &Arc<ItemCatalog> {
        &self.catalog
    }

    pub fn n_items(&self) -> usize {
        self.catalog.len()
    }

    pub fn n_baskets(&self) -> usize {
        self.baskets.len()
    }

    /// Number of baskets each item appears in.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn max_basket_size(&self) -> usize {
        self.baskets.iter().map(Basket::len).max().unwrap_or(0)
    }

    /// Deterministically shuffles baskets and splits off the first
    /// `round(N * train_fraction)` as the training half. Both halves share
    /// the catalog; occurrence counts are recomputed per half.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(BasketDataset, BasketDataset)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidFraction(train_fraction));
        }
        let n = self.baskets.len();
        let n_train = ((n as f64) * train_fraction).round() as usize;
        let n_train = n_train.min(n);

        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let (mut train_idx, mut test_idx): (Vec<usize>, Vec<usize>) = (
            order[..n_train].to_vec(),
            order[n_train..].to_vec(),
        );
        // Keep input order inside each half.
        train_idx.sort_unstable();
        test_idx.sort_unstable();

        let pick = |idx: &[usize]| -> Result<BasketDataset> {
            let baskets = idx.iter().map(|&i| self.baskets[i].clone()).collect();
            BasketDataset::new(baskets, Arc::clone(&self.catalog))
        };
        Ok((pick(&train_idx)?, pick(&test_idx)?))
    }
}

/// Parses basket lines. The catalog indexes ids in order of first appearance
/// within retained baskets; a line dropped for being too small contributes
/// nothing, so every catalog item occurs in at least one basket.
pub fn parse_baskets(reader: impl BufRead, min_basket_size: usize) -> Result<BasketDataset> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut baskets: Vec<Basket> = Vec::new();

    parse_lines(reader, |_, tokens| {
        if tokens.len() < min_basket_size {
            return Ok(());
        }
        let items = tokens
            .iter()
            .map(|&token| {
                *index.entry(token.to_string()).or_insert_with(|| {
                    ids.push(token.to_string());
                    ids.len() - 1
                })
            })
            .collect();
        baskets.push(Basket::new(items));
        Ok(())
    })?;

    if baskets.is_empty() {
        return Err(Error::NoBaskets);
    }
    let catalog = Arc::new(ItemCatalog { ids, index });
    BasketDataset::new(baskets, catalog)
}

/// Parses basket lines against a fixed catalog; unseen ids are an error.
pub fn parse_baskets_with_catalog(
    reader: impl BufRead,
    catalog: Arc<ItemCatalog>,
    min_basket_size: usize,
) -> Result<BasketDataset> {
    let mut baskets: Vec<Basket> = Vec::new();
    parse_lines(reader, |line_no, tokens| {
        if tokens.len() < min_basket_size {
            return Ok(());
        }
        let items = tokens
            .iter()
            .map(|&token| {
                catalog
                    .index_of(token)
                    .ok_or_else(|| Error::UnknownItem { id: token.to_string(), line: line_no })
            })
            .collect::<Result<Vec<usize>>>()?;
        baskets.push(Basket::new(items));
        Ok(())
    })?;

    if baskets.is_empty() {
        return Err(Error::NoBaskets);
    }
    BasketDataset::new(baskets, catalog)
}

/// Splits lines into trimmed tokens and hands each line's distinct tokens to
/// `on_basket`. Blank lines are skipped; an empty token is an error.
fn parse_lines(
    reader: impl BufRead,
    mut on_basket: impl FnMut(usize, &[&str]) -> Result<()>,
) -> Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut tokens: Vec<&str> = Vec::new();
        for token in trimmed.split(',').map(str::trim) {
            if token.is_empty() {
                return Err(Error::MalformedLine { line: line_no });
            }
            if !tokens.contains(&token) {
                tokens.push(token);
            }
        }
        on_basket(line_no, &tokens)?;
    }
    Ok(())
}

/// Writes a model file: a text header (magic, M, K, catalog ids) followed by
/// the trait matrix as row-major little-endian f64. Round-trips bit-exactly.
pub fn save_model(v: &TraitMatrix, catalog: &ItemCatalog, path: &Path) -> Result<()> {
    let m = v.n_items();
    let k = v.rank();
    if catalog.len() != m {
        return Err(Error::DimensionMismatch {
            context: format!("catalog has {} ids but trait matrix has {} rows", catalog.len(), m),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MODEL_MAGIC}")?;
    writeln!(w, "{m}")?;
    writeln!(w, "{k}")?;
    for id in catalog.ids() {
        writeln!(w, "{id}")?;
    }
    for &x in v.matrix().iter() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a model file written by [`save_model`].
pub fn load_model(path: &Path) -> Result<(TraitMatrix, ItemCatalog)> {
    let mut r = BufReader::new(File::open(path)?);

    let magic = read_text_line(&mut r)?;
    if magic != MODEL_MAGIC {
        return Err(Error::ModelFormat(format!("bad magic {magic:?}, expected {MODEL_MAGIC:?}")));
    }
    let m: usize = parse_header_int(&read_text_line(&mut r)?, "item count")?;
    let k: usize = parse_header_int(&read_text_line(&mut r)?, "rank")?;
    if m == 0 || k == 0 {
        return Err(Error::ModelFormat(format!("degenerate shape {m}x{k}")));
    }

    let mut ids = Vec::with_capacity(m);
    for _ in 0..m {
        ids.push(read_text_line(&mut r)?);
    }
    let catalog = ItemCatalog::from_ids(ids)?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = m * k * 8;
    if payload.len() != expected {
        return Err(Error::ModelFormat(format!(
            "expected {expected} payload bytes for a {m}x{k} matrix, found {}",
            payload.len()
        )));
    }
    let mut values = Vec::with_capacity(m * k);
    for chunk in payload.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let v = TraitMatrix::from_vec(m, k, values)?;
    Ok((v, catalog))
}

fn read_text_line(r: &mut impl BufRead) -> Result<String> {
    let mut line = String::new();
    let n = r.read_line(&mut line)?;
    if n == 0 {
        return Err(Error::ModelFormat("unexpected end of file in header".into()));
    }
    if !line.ends_with('\n') {
        return Err(Error::ModelFormat("unterminated header line".into()));
    }
    line.pop();
    Ok(line)
}

fn parse_header_int(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::ModelFormat(format!("invalid {what} {s:?}")))
}
